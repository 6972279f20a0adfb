from dataclasses import dataclass

from ddq_helper.lattice import CHARGE, CellCoord, CellState


@dataclass(frozen=True)
class Transition:
    """An atomic change proposed by one rule.

    cells holds (coord, before, after) triples; label_moves lists
    (from, to) pairs whose group label follows the moved charge.
    """
    rule: int
    source: CellCoord
    cells: tuple
    label_moves: tuple = ()

    @property
    def coords(self):
        return tuple(c for c, _, _ in self.cells)

    @property
    def before(self):
        return tuple(b for _, b, _ in self.cells)

    @property
    def after(self):
        return tuple(a for _, _, a in self.cells)

    def charge_delta(self):
        return int(sum(CHARGE[a] - CHARGE[b] for _, b, a in self.cells))


@dataclass(frozen=True)
class MoveIntent:
    """One charge hopping one lattice step; the vacated cell becomes a S2 trail"""
    source: CellCoord
    target: CellCoord
    moved_state: CellState
    target_state: CellState
    rule: int = 1
    distance: int = 1

    def transition(self):
        return Transition(self.rule, self.source,
                          ((self.source, self.moved_state, CellState.S2),
                           (self.target, self.target_state, self.moved_state)),
                          ((self.source, self.target),))


@dataclass(frozen=True)
class GroupMove:
    """A whole group shifted one step in a fixed direction (Rules 3 and 5)"""
    label: int
    direction: int
    rule: int
    transition: Transition

    @property
    def source(self):
        return self.transition.source


def as_transition(proposal):
    if isinstance(proposal, Transition):
        return proposal
    if isinstance(proposal, MoveIntent):
        return proposal.transition()
    if isinstance(proposal, GroupMove):
        return proposal.transition
    raise TypeError('Not a rule proposal: {!r}'.format(proposal))
