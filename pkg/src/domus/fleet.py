"""Fleets of buildings and adversarial transfer across them.

A deterministic builder turns one program into n bit-identical
structures, so a weakness found on any one of them is a weakness of
all. The randomized human model perturbs placement anchors with a small
seeded jitter, making members differ in detail. An attack removes a
budgeted set of cells; its quality is the fraction of the remaining
cells that lose static support, and its transfer rate is the fraction
of a fleet it collapses.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from . import vm
from .errors import DomusError
from .world import Cell, VoxelStructure, check_stability, unsupported_cells

__all__ = [
    "RobotBuilder",
    "HumanBuilder",
    "BuilderModel",
    "Attack",
    "FleetReport",
    "AlreadyUnstable",
    "build_fleet",
    "collapse_fraction",
    "find_attack",
    "transfer_rate",
]


class AlreadyUnstable(DomusError):
    """Attack search needs a stable prototype."""


@dataclass(frozen=True)
class RobotBuilder:
    """Executes the program exactly; every building is identical."""


@dataclass(frozen=True)
class HumanBuilder:
    """Displaces each placement anchor with probability jitter_prob by a
    uniform nonzero offset in {-1,0,1}^3; the stream is seeded per
    building, so member i is reproducible."""

    jitter_prob: float
    seed: int

    def __post_init__(self):
        if not (0.0 <= self.jitter_prob <= 1.0):
            raise ValueError(f"jitter_prob must be in [0,1], got {self.jitter_prob}")


BuilderModel = RobotBuilder | HumanBuilder

_OFFSETS = tuple(
    (dx, dy, dz)
    for dx in (-1, 0, 1)
    for dy in (-1, 0, 1)
    for dz in (-1, 0, 1)
    if (dx, dy, dz) != (0, 0, 0)
)


def _member_seed(seed: int, index: int) -> int:
    return seed * 1_000_003 + index


def build_fleet(program: vm.Program, n: int, model: BuilderModel,
                dims: tuple[int, int, int],
                limits: vm.ExecutionLimits | None = None) -> list[VoxelStructure]:
    """Build n structures from one program under the given builder model.

    Robot fleets execute once and share the immutable result. Human
    fleets rerun the program per member with a jitter stream seeded by
    (seed, member index); jittered placements that leave the world are
    dropped, not errors.
    """
    if n < 1:
        raise ValueError("fleet size must be >= 1")
    if isinstance(model, RobotBuilder):
        prototype = vm.execute(program, dims, limits)
        return [prototype] * n
    members = []
    for i in range(n):
        rng = random.Random(_member_seed(model.seed, i))

        def jitter():
            if rng.random() < model.jitter_prob:
                return _OFFSETS[rng.randrange(len(_OFFSETS))]
            return None

        members.append(vm.execute(program, dims, limits, jitter=jitter))
    return members


@dataclass(frozen=True)
class Attack:
    removed_cells: frozenset[Cell]
    k: int
    collapse_fraction: float

    def __post_init__(self):
        if len(self.removed_cells) > self.k:
            raise ValueError("attack exceeds its removal budget")


def collapse_fraction(s: VoxelStructure, removed: frozenset[Cell],
                      max_overhang: int = 2) -> float:
    """Fraction of surviving cells that newly lose support when the
    given cells are removed. Cells already unsupported before the
    attack do not count; removing everything collapses nothing."""
    before = frozenset(check_stability(s, max_overhang).unstable_cells)
    return _collapse_given_baseline(s, removed, before, max_overhang)


def _collapse_given_baseline(s: VoxelStructure, removed: frozenset[Cell],
                             unstable_before: frozenset[Cell],
                             max_overhang: int) -> float:
    present = removed & s.occupied
    remaining = s.occupied - present
    if not remaining:
        return 0.0
    newly = set(unsupported_cells(remaining, max_overhang)) - unstable_before
    return len(newly) / len(remaining)


def find_attack(s: VoxelStructure, k: int, max_overhang: int = 2,
                exhaustive_cell_limit: int = 500) -> Attack:
    """Best removal of at most k cells, by collapse fraction.

    Exhaustive over singletons and pairs when k <= 2 and the structure
    is small; otherwise greedy, iterating the best single removal. Ties
    keep the lexicographically smallest removal set.
    """
    if k < 1:
        raise ValueError("attack budget must be >= 1")
    report = check_stability(s, max_overhang)
    if not report.stable:
        raise AlreadyUnstable(f"{len(report.unstable_cells)} cells already unsupported")
    baseline = frozenset(report.unstable_cells)

    cells = sorted(s.occupied)
    best_set: frozenset[Cell] = frozenset()
    best_frac = -1.0

    def consider(removal: tuple[Cell, ...]):
        nonlocal best_set, best_frac
        fr = _collapse_given_baseline(s, frozenset(removal), baseline, max_overhang)
        if fr > best_frac:
            best_frac = fr
            best_set = frozenset(removal)

    if k <= 2 and len(cells) <= exhaustive_cell_limit:
        for a in cells:
            consider((a,))
        if k >= 2:
            for i, a in enumerate(cells):
                for b in cells[i + 1:]:
                    consider((a, b))
    else:
        removed: list[Cell] = []
        work = s
        for _ in range(k):
            step_best = None
            for c in sorted(work.occupied):
                fr = _collapse_given_baseline(s, frozenset(removed + [c]),
                                              baseline, max_overhang)
                if step_best is None or fr > step_best[0]:
                    step_best = (fr, c)
            if step_best is None:
                break
            removed.append(step_best[1])
            work = VoxelStructure(s.dims, work.occupied - {step_best[1]})
            consider(tuple(removed))

    return Attack(removed_cells=best_set, k=k,
                  collapse_fraction=max(best_frac, 0.0))


@dataclass(frozen=True)
class FleetReport:
    n: int
    distinct_structures: int
    transfer_rate: float


def transfer_rate(attack: Attack, fleet: list[VoxelStructure],
                  collapse_threshold: float = 0.5,
                  max_overhang: int = 2) -> FleetReport:
    """Apply one fixed attack to every fleet member.

    Removed cells absent from a member are no-ops. A member counts as
    collapsed when its collapse fraction reaches the threshold.
    """
    if not fleet:
        raise ValueError("fleet must be nonempty")
    collapsed = 0
    for member in fleet:
        if collapse_fraction(member, attack.removed_cells, max_overhang) >= collapse_threshold:
            collapsed += 1
    distinct = len({m.occupied for m in fleet})
    return FleetReport(
        n=len(fleet),
        distinct_structures=distinct,
        transfer_rate=collapsed / len(fleet),
    )
