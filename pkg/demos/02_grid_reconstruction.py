"""Rebuilding a complete table grid from incomplete cell detections.

Cell detectors miss cells, but every detected cell contributes four border
coordinates.  Clustering the borders with 1-D DBSCAN gives the row and
column bands; empty band intersections are filled with inferred cells.
"""

import random

from migrec import Box, GridConfig, complete_grid, dbscan_1d, merge_split_tables
from migrec.interchange import CellHypothesis

rng = random.Random(1)

# 1-D DBSCAN over border coordinates: two tight groups and one stray value
values = [100.1, 99.8, 100.3, 250.2, 249.9, 250.0, 400.0]
print("border values:", values)
print("cluster labels:", dbscan_1d(values, eps=5.0, min_pts=2), "(-1 = noise)")


def cell(x0, y0, x1, y1):
    return CellHypothesis(box=Box(x0, y0, x1, y1, 0.9), class_probs=(1.0, 0.0, 0.0, 0.0))


# a 5x4 table with two missing detections and +-1.5 px border jitter
missing = {(1, 2), (3, 0)}
cells = []
for r in range(5):
    for c in range(4):
        if (r, c) in missing:
            continue
        j = lambda: rng.uniform(-1.5, 1.5)
        cells.append(cell(100 + c * 150 + j(), 200 + r * 60 + j(), 250 + c * 150 + j(), 260 + r * 60 + j()))

grid = complete_grid(Box(100, 200, 700, 500, 1.0), cells, GridConfig())
print(f"\nreconstructed {grid.n_rows}x{grid.n_cols} grid "
      f"({grid.count_provenance('detected')} detected, {grid.count_provenance('inferred')} inferred)")
for r, c in sorted(missing):
    slot = grid.cells[r][c]
    box = slot.hyp.box
    print(f"  missing cell ({r},{c}) inferred at ({box.x_min:.1f},{box.y_min:.1f})-({box.x_max:.1f},{box.y_max:.1f})")

# a full-opening table detected as two per-page halves is merged back when
# the halves abut the spine and their rows line up
left_half = complete_grid(
    Box(300, 200, 1200, 680, 1.0),
    [cell(300 + c * 300, 200 + r * 120, 600 + c * 300, 320 + r * 120) for r in range(4) for c in range(3)],
    GridConfig(),
)
right_half = complete_grid(
    Box(1200, 200, 2100, 680, 1.0),
    [cell(1200 + c * 300, 200 + r * 120, 1500 + c * 300, 320 + r * 120) for r in range(4) for c in range(3)],
    GridConfig(),
)
merged = merge_split_tables([left_half, right_half], center_x=1200.0, cfg=GridConfig())
print(f"\nsplit-table merge: {left_half.n_rows}x{left_half.n_cols} + "
      f"{right_half.n_rows}x{right_half.n_cols} -> "
      f"{[f'{t.n_rows}x{t.n_cols}' for t in merged]}")
