import math

from triples import RationalMatrix, SingularPoint

# One master source of truth for the example inputs shared across the test modules
# Add new examples here

SMALL_GRID = {"k": 1, "n_z": 16, "n_theta": 8, "refinements": 0}

CONTACT_CONSTANTS = (-1.0, 0.0, 0.5, 2.0)

TEST_SINGULARITY = {
    "chart": 0,
    "z": [0.3, -0.2],
    "theta": 1.0,
    "weights": [1, -1],
    "radius": 0.3,
}

TEST_CONFIG_DICT = {
    "command": "shift-C",
    "geometry": SMALL_GRID,
    "singularities": [TEST_SINGULARITY],
    "connection": {"kind": "contact", "constant": 0.5, "rank": 2},
    "flow": {"tol": 1e-5, "max_iter": 200, "constants": [0.0]},
    "triple": {"G": "z+5", "k": 1},
    "shift": {"weights": [[1]], "t": [math.pi / 2], "volume": 4 * math.pi ** 2},
    "spectral": {"matrix": [["0", "1"], ["z", "0"]], "points": 5},
    "output_dir": "output",
    "seed": 7,
}

# Monodromies with known spectral data
TRANSPOSITION = RationalMatrix([[0, 1], ['z', 0]])
THREE_CYCLE = RationalMatrix([[0, 1, 0], [0, 0, 1], ['z', 0, 0]])
SPLIT_PAIR = RationalMatrix.diagonal(['z', 'z+1'])
UPPER_TRIANGULAR = RationalMatrix([['z', 1], [0, 'z+1']])

SHIFT_EXAMPLE = {
    "points": [SingularPoint(0j, (0.0,), (1,))],
    "shifts": [math.pi / 2],
    "volume": 4 * math.pi ** 2,
    "expected": 1 / (8 * math.pi),
}

ABEL_POINTS = [
    SingularPoint(1 + 0j, (0.0,), (1,)),
    SingularPoint(-1 + 0j, (0.0,), (-1,)),
]
