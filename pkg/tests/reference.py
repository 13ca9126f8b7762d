"""Frozen reference values shared by several test modules."""

# (L, W, C_tot) for the 28 published architecture-sweep rows, d = 32,
# in table order.
TABLE1_ARCHITECTURES = [
    (3, 1, 35), (3, 2, 69), (3, 3, 103), (4, 3, 115), (4, 3, 115), (4, 2, 75), (5, 2, 81), (5, 1, 39),
    (3, 2, 69), (3, 1, 35), (3, 1, 35), (4, 2, 75), (4, 1, 37), (5, 3, 127), (5, 1, 39),
    (3, 1, 35), (3, 2, 69), (4, 3, 115), (4, 3, 115), (5, 5, 231), (5, 2, 81),
    (3, 1, 35), (3, 1, 35), (4, 3, 115), (4, 1, 37), (5, 4, 177), (5, 2, 81), (5, 1, 39),
]
