import numpy as np
from scipy import ndimage

from ddq_helper.lattice import CellState, hex_disc_kernel, row_major_key, step
from ddq_helper.rules.intents import Transition


def find_flowers(grid):
    """Centers whose whole radius-1 flower is S2"""
    s2 = grid.to_axial((grid.states == CellState.S2).astype(np.int64))
    counts = ndimage.correlate(s2, hex_disc_kernel(1), mode='constant', cval=0)
    return grid.coords_where(grid.from_axial(counts) == 7)


def hex_decay_rule4(grid, pending=frozenset()):
    """Rule 4: an all-S2 flower relaxes to S0 in two steps, center excepted.

    Ring cells at even enumeration positions (E, NW, SW) convert now, the
    others are returned as pending and convert on the next call if still S2.
    Returns (transitions, pending).
    """
    centers = set(find_flowers(grid))
    now, later = set(), set()
    for c in centers:
        for d in range(6):
            cell = step(c, d)
            if cell in centers:
                continue
            (now if d % 2 == 0 else later).add(cell)
    for cell in pending:
        if cell not in centers and grid.in_bounds(cell) and grid[cell] == CellState.S2:
            now.add(cell)
    later -= now
    transitions = [Transition(4, c, ((c, CellState.S2, CellState.S0),))
                   for c in sorted(now, key=row_major_key)]
    return transitions, frozenset(later)
