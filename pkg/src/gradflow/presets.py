"""Shipped run configurations for the standard experiments.

Resolutions default to desk scale (64^2, 32^3); ``paper_n`` carries the
full-scale mode counts selected by ``--paper-scale``. The 3D coarsening
preset reuses the 2D mobility and interface width because no separate 3D
values are published; treat those two numbers as an assumption.
"""

from __future__ import annotations

from .errors import ConfigError

PRESETS = {
    "ac-spinodal": """
[model]
kind = allen-cahn
mobility = 1.0
epsilon = 0.0707106781186547524

[grid]
dims = 2
n = 64
length = 2pi
paper_n = 256

[scheme]
kind = combined-cn
dt = 0.1
t_final = 20

[initial]
kind = random
seed = 42
offset = 0.03
amplitude = 0.001

[output]
directory = out/ac-spinodal
""",
    "ch-spinodal": """
[model]
kind = cahn-hilliard
mobility = 0.01
epsilon = 0.0707106781186547524

[grid]
dims = 2
n = 64
length = 2pi
paper_n = 256

[scheme]
kind = combined-cn
dt = 0.01
t_final = 2

[initial]
kind = random
seed = 42
offset = 0.03
amplitude = 0.001

[output]
directory = out/ch-spinodal
""",
    "ac-manufactured": """
[model]
kind = allen-cahn
mobility = 1.0
epsilon = 1.0

[grid]
dims = 2
n = 64
length = 2pi
paper_n = 256

[scheme]
kind = combined-cn
dt = 0.1
t_final = 1

[initial]
kind = cosine
variant = unit

[output]
directory = out/ac-manufactured
""",
    "ch-manufactured": """
[model]
kind = cahn-hilliard
mobility = 1.0
epsilon = 1.0

[grid]
dims = 2
n = 64
length = 2pi
paper_n = 256

[scheme]
kind = combined-bdf2
dt = 0.1
t_final = 1

[initial]
kind = cosine
variant = unit

[output]
directory = out/ch-manufactured
""",
    "mbe-2d": """
[model]
kind = mbe-no-slope
mobility = 0.1
epsilon = 0.03

[grid]
dims = 2
n = 64
length = 2pi
paper_n = 256

[scheme]
kind = combined-cn
dt = 5.2e-3
t_final = 5.2

[initial]
kind = random
seed = 42
offset = 0.0
amplitude = 0.01

[output]
directory = out/mbe-2d
""",
    "mbe-3d": """
[model]
kind = mbe-no-slope
mobility = 0.1
epsilon = 0.03

[grid]
dims = 3
n = 32
length = pi
paper_n = 128

[scheme]
kind = combined-cn
dt = 4.3e-3
t_final = 0.86

[initial]
kind = random
seed = 42
offset = 0.0
amplitude = 0.001

[output]
directory = out/mbe-3d
""",
    "ternary-accuracy": """
[model]
kind = ternary-cahn-hilliard
mobility = 1e-5
epsilon = 0.02
lambda = 7.0
sigma = 1 1 1

[grid]
dims = 2
n = 64
length = 2
paper_n = 256

[scheme]
kind = combined-cn
dt = 1e-3
t_final = 0.2

[initial]
kind = bubbles
radius = 0.35
x1 = 1.37
x2 = 0.63
y = 1.0

[output]
directory = out/ternary-accuracy
""",
    "ternary-spinodal": """
[model]
kind = ternary-cahn-hilliard
mobility = 1e-3
epsilon = 0.025
lambda = 0.0
sigma = 1 1 1

[grid]
dims = 2
n = 64 32
length = 2 1
paper_n = 256 128

[scheme]
kind = combined-cn
dt = 1e-4
t_final = 0.02

[initial]
kind = ramp-random
seed = 42
amplitude = 0.001

[output]
directory = out/ternary-spinodal
""",
    "ternary-spinodal-311": """
[model]
kind = ternary-cahn-hilliard
mobility = 1e-3
epsilon = 0.025
lambda = 0.0
sigma = 3 1 1

[grid]
dims = 2
n = 64 32
length = 2 1
paper_n = 256 128

[scheme]
kind = combined-cn
dt = 1e-4
t_final = 0.02

[initial]
kind = ramp-random
seed = 42
amplitude = 0.001

[output]
directory = out/ternary-spinodal-311
""",
    "ns-taylor-green": """
[model]
kind = navier-stokes
nu = 0.1

[grid]
dims = 2
n = 32
length = 2pi
paper_n = 128

[scheme]
kind = ns-be
dt = 0.1
t_final = 10

[initial]
kind = taylor-green

[output]
directory = out/ns-taylor-green
""",
}


def preset_names():
    return sorted(PRESETS)


def preset_text(name):
    try:
        return PRESETS[name]
    except KeyError:
        raise ConfigError(
            f"unknown preset {name!r}; available: {', '.join(preset_names())}")
