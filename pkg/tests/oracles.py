"""Independent brute-force reference implementations used as test oracles.

These deliberately avoid the library's code paths: quadratic neighbor
search for DBSCAN, a full-matrix edit distance, exhaustive matching and
exhaustive year-sequence search.  Keep them dumb.
"""

from __future__ import annotations

import itertools


def dbscan_reference(values, eps, min_pts):
    """Quadratic-neighbor-search DBSCAN on the line.

    Same contract as the library: seeds visited in ascending (value, index)
    order, cluster ids in discovery order, closed eps balls, a point counts
    itself toward min_pts.
    """
    n = len(values)
    order = sorted(range(n), key=lambda i: (values[i], i))
    UNVISITED, NOISE = -2, -1
    labels = {i: UNVISITED for i in range(n)}

    def neighbors(i):
        return [j for j in order if abs(values[j] - values[i]) <= eps]

    cluster = 0
    for i in order:
        if labels[i] != UNVISITED:
            continue
        seed_neighbors = neighbors(i)
        if len(seed_neighbors) < min_pts:
            labels[i] = NOISE
            continue
        labels[i] = cluster
        queue = list(seed_neighbors)
        k = 0
        while k < len(queue):
            j = queue[k]
            k += 1
            if labels[j] == NOISE:
                labels[j] = cluster
            if labels[j] != UNVISITED:
                continue
            labels[j] = cluster
            j_neighbors = neighbors(j)
            if len(j_neighbors) >= min_pts:
                queue.extend(j_neighbors)
        cluster += 1
    return [labels[i] for i in range(n)]


def edit_distance_reference(a: str, b: str) -> int:
    """Full-matrix Levenshtein distance."""
    rows, cols = len(a) + 1, len(b) + 1
    d = [[0] * cols for _ in range(rows)]
    for i in range(rows):
        d[i][0] = i
    for j in range(cols):
        d[0][j] = j
    for i in range(1, rows):
        for j in range(1, cols):
            cost = 0 if a[i - 1] == b[j - 1] else 1
            d[i][j] = min(d[i - 1][j] + 1, d[i][j - 1] + 1, d[i - 1][j - 1] + cost)
    return d[-1][-1]


def iou_reference(a, b) -> float:
    """IoU from explicit interval overlaps."""
    ix = max(0.0, min(a.x_max, b.x_max) - max(a.x_min, b.x_min))
    iy = max(0.0, min(a.y_max, b.y_max) - max(a.y_min, b.y_min))
    inter = ix * iy
    area_a = (a.x_max - a.x_min) * (a.y_max - a.y_min)
    area_b = (b.x_max - b.x_min) * (b.y_max - b.y_min)
    union = area_a + area_b - inter
    return inter / union if union > 0 else 0.0


def optimal_matching_tp(pred, gold, thr, iou_fn) -> int:
    """Maximum number of one-to-one matches with IoU above the threshold.

    Exhaustive over injections of the smaller set into the larger one;
    only usable for tiny instances.
    """
    if len(pred) > len(gold):
        pred, gold = gold, pred
    best = 0
    indices = range(len(gold))
    for assignment in itertools.permutations(indices, len(pred)):
        tp = sum(
            1
            for pi, gi in enumerate(assignment)
            if iou_fn(pred[pi], gold[gi]) > thr
        )
        best = max(best, tp)
    return best


def best_year_assignment(page_years, max_jump):
    """Exhaustive search over per-page keep-or-discard year assignments.

    ``page_years`` is a list of per-page year multisets (lists).  Returns the
    minimal (discarded, overridden_pages, total_jump) cost over all feasible
    assignments, where each page either keeps one of its observed years
    (non-decreasing, bounded jumps between kept pages) or discards them all.
    """
    n = len(page_years)
    options = []
    for years in page_years:
        opts = [None] + sorted(set(years))
        options.append(opts)
    best = None
    for combo in itertools.product(*options):
        kept = [(i, y) for i, y in enumerate(combo) if y is not None]
        feasible = True
        for (_, y1), (_, y2) in zip(kept, kept[1:]):
            if y2 < y1 or y2 - y1 > max_jump:
                feasible = False
                break
        if not feasible:
            continue
        discarded = 0
        overridden = 0
        for i, y in enumerate(combo):
            obs = page_years[i]
            if y is None:
                discarded += len(obs)
                if obs:
                    overridden += 1
            else:
                discarded += len(obs) - obs.count(y)
        jump = sum(y2 - y1 for (_, y1), (_, y2) in zip(kept, kept[1:]))
        cost = (discarded, overridden, jump)
        if best is None or cost < best:
            best = cost
    return best


def fill_repetitions_reference(column):
    """O(n^2) scan-back repetition fill."""
    out = []
    for i, (cell_type, text) in enumerate(column):
        if cell_type == "empty":
            out.append(None)
        elif cell_type == "repetition":
            value = None
            for j in range(i - 1, -1, -1):
                t, s = column[j]
                if t in ("single_line", "multi_line") and s:
                    value = s
                    break
            out.append(value)
        else:
            out.append(text)
    return out
