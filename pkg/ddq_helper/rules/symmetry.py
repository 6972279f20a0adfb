import numpy as np

from ddq_helper.lattice import CellState, axial_to_xy, step
from ddq_helper.rules.intents import Transition


MATCH_TOLERANCE = 0.25


def _point_symmetries():
    # the 11 non-identity elements of the hexagonal point group
    ops = []
    for k in range(1, 6):
        a = k * np.pi / 3.
        ops.append([[np.cos(a), -np.sin(a)], [np.sin(a), np.cos(a)]])
    for k in range(6):
        a = k * np.pi / 3.  # mirror axis at k * 30 degrees
        ops.append([[np.cos(a), np.sin(a)], [np.sin(a), -np.cos(a)]])
    return np.array(ops)


SYMMETRY_OPS = _point_symmetries()


def asymmetry_score(cells):
    """Fewest members left without a same-state image under any non-trivial
    hex point symmetry about the geometric centroid. 0 means symmetric."""
    if len(cells) <= 1:
        return 0
    coords = list(cells)
    xy = np.array([axial_to_xy(c[0], c[1]) for c in coords], dtype=np.float64)
    states = np.array([int(cells[c]) for c in coords])
    rel = xy - xy.mean(axis=0)
    images = np.einsum('oij,nj->oni', SYMMETRY_OPS, rel)
    dist = np.linalg.norm(images[:, :, None, :] - rel[None, None], axis=-1)
    matched = (dist <= MATCH_TOLERANCE) & (states[:, None] == states[None, :])
    unmatched = (~matched.any(axis=-1)).sum(axis=-1)
    return int(unmatched.min())


def symmetrize_rule6(grid, group):
    """Rule 6: the single fusion (S1 + S1 -> S3 + S2) or fission
    (S3 -> S1 + S1) that lowers the group's asymmetry the most, or None."""
    cells = group.cells()
    best_score = asymmetry_score(cells)
    if best_score == 0:
        return None
    best = None
    for coord in group.members:
        state = cells[coord]
        for d in range(6):
            n = step(coord, d)
            if not grid.in_bounds(n):
                continue
            trial = dict(cells)
            if state == CellState.S1 and cells.get(n) == CellState.S1:
                trial[coord] = CellState.S3
                del trial[n]
                t = Transition(6, coord, ((coord, CellState.S1, CellState.S3),
                                          (n, CellState.S1, CellState.S2)))
            elif state == CellState.S3 and n not in cells and not grid[n].charged:
                trial[coord] = CellState.S1
                trial[n] = CellState.S1
                t = Transition(6, coord, ((coord, CellState.S3, CellState.S1),
                                          (n, grid[n], CellState.S1)), ((coord, n),))
            else:
                continue
            score = asymmetry_score(trial)
            if score < best_score:
                best, best_score = t, score
    return best
