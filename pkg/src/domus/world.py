"""Voxel structures and the functional analyses used as design constraints.

A structure is a finite set of occupied integer cells inside a fixed world
box. On top of that sit the checks a candidate building has to pass:
a combinatorial static-support rule, enclosed (roofed-over) volume,
a material budget, and a site box. Each constraint turns its violation
into a weighted penalty so that all penalties are commensurable with
program byte counts.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .errors import DomusError

Cell = tuple[int, int, int]

__all__ = [
    "Cell",
    "VoxelStructure",
    "StabilityReport",
    "Stability",
    "EnclosedVolumeAtLeast",
    "MaterialAtMost",
    "WithinBox",
    "ConstraintSet",
    "ConstraintPenalties",
    "FormatError",
    "check_stability",
    "unsupported_cells",
    "enclosed_volume",
    "eval_constraints",
    "load_constraints",
]


class FormatError(DomusError):
    """Malformed structure, pattern, or constraint file."""


@dataclass(frozen=True)
class VoxelStructure:
    """Occupancy grid: world dimensions plus the set of occupied cells.

    Equality is exact (same dims, same occupied set). Instances are
    immutable and hashable, so fleets of identical buildings share one
    object safely.
    """

    dims: tuple[int, int, int]
    occupied: frozenset[Cell] = frozenset()

    def __post_init__(self):
        nx, ny, nz = self.dims
        if nx < 1 or ny < 1 or nz < 1:
            raise ValueError(f"dims must be positive, got {self.dims}")
        cells = frozenset(self.occupied)
        object.__setattr__(self, "occupied", cells)
        for (x, y, z) in cells:
            if not (0 <= x < nx and 0 <= y < ny and 0 <= z < nz):
                raise ValueError(f"cell {(x, y, z)} outside dims {self.dims}")

    @property
    def count(self) -> int:
        return len(self.occupied)

    def bounding_box(self) -> tuple[Cell, Cell] | None:
        """(min corner, max corner), inclusive, or None when empty."""
        if not self.occupied:
            return None
        xs = [c[0] for c in self.occupied]
        ys = [c[1] for c in self.occupied]
        zs = [c[2] for c in self.occupied]
        return (min(xs), min(ys), min(zs)), (max(xs), max(ys), max(zs))

    def translated(self, dx: int, dy: int, dz: int) -> "VoxelStructure":
        moved = frozenset((x + dx, y + dy, z + dz) for (x, y, z) in self.occupied)
        return VoxelStructure(self.dims, moved)

    # --- layered text format (.vox.txt) ---

    def to_layer_text(self) -> str:
        """Render as the layered text format.

        First line "DIMS nx ny nz", then per z-layer a "LAYER z" line
        followed by ny rows of nx characters ('.' empty, '#' occupied),
        row y=0 first. No trailing newline.
        """
        nx, ny, nz = self.dims
        lines = [f"DIMS {nx} {ny} {nz}"]
        for z in range(nz):
            lines.append(f"LAYER {z}")
            for y in range(ny):
                lines.append(
                    "".join("#" if (x, y, z) in self.occupied else "." for x in range(nx))
                )
        return "\n".join(lines)

    @classmethod
    def from_layer_text(cls, text: str) -> "VoxelStructure":
        lines = text.splitlines()
        if not lines or not lines[0].startswith("DIMS "):
            raise FormatError("expected 'DIMS nx ny nz' on line 1")
        try:
            nx, ny, nz = (int(t) for t in lines[0].split()[1:])
        except (TypeError, ValueError) as exc:
            raise FormatError(f"bad DIMS line: {lines[0]!r}") from exc
        cells = set()
        pos = 1
        for z in range(nz):
            if pos >= len(lines) or lines[pos] != f"LAYER {z}":
                raise FormatError(f"expected 'LAYER {z}' at line {pos + 1}")
            pos += 1
            for y in range(ny):
                if pos >= len(lines):
                    raise FormatError(f"missing row y={y} of layer {z}")
                row = lines[pos]
                if len(row) != nx or any(ch not in ".#" for ch in row):
                    raise FormatError(f"bad row at line {pos + 1}: {row!r}")
                for x, ch in enumerate(row):
                    if ch == "#":
                        cells.add((x, y, z))
                pos += 1
        if pos != len(lines):
            raise FormatError(f"trailing content at line {pos + 1}")
        return cls((nx, ny, nz), frozenset(cells))


@dataclass(frozen=True)
class StabilityReport:
    stable: bool
    unstable_cells: tuple[Cell, ...]
    supported_count: int


def unsupported_cells(occupied, max_overhang: int = 2) -> tuple[Cell, ...]:
    """Occupied cells failing the support rule, from a bare cell set.

    Vectorized over the bounding box anchored at z=0: vertical support
    is a running AND down each column, and the lateral overhang rule is
    max_overhang rounds of 4-neighbor dilation masked to the occupied
    cells of each layer.
    """
    if not occupied:
        return ()
    xs = [c[0] for c in occupied]
    ys = [c[1] for c in occupied]
    zs = [c[2] for c in occupied]
    x0, y0 = min(xs), min(ys)
    nx = max(xs) - x0 + 1
    ny = max(ys) - y0 + 1
    nz = max(zs) + 1  # anchored at z=0 so ground contact stays visible
    occ = np.zeros((nx, ny, nz), dtype=bool)
    for (x, y, z) in occupied:
        occ[x - x0, y - y0, z] = True

    vertical = np.logical_and.accumulate(occ, axis=2)
    supported = vertical.copy()
    for z in range(nz):
        layer = occ[:, :, z]
        if not layer.any():
            continue
        seed = supported[:, :, z] & layer
        for _ in range(max_overhang):
            grown = seed.copy()
            grown[1:, :] |= seed[:-1, :]
            grown[:-1, :] |= seed[1:, :]
            grown[:, 1:] |= seed[:, :-1]
            grown[:, :-1] |= seed[:, 1:]
            new = grown & layer
            if (new == seed).all():
                break
            seed = new
        supported[:, :, z] = seed

    unstable_idx = np.argwhere(occ & ~supported)
    return tuple(sorted(
        (int(x) + x0, int(y) + y0, int(z)) for (x, y, z) in unstable_idx
    ))


def check_stability(s: VoxelStructure, max_overhang: int = 2) -> StabilityReport:
    """Static support check.

    A cell is vertically supported when its whole column down to z=0 is
    occupied. A cell is supported when it is vertically supported or can
    reach a vertically supported occupied cell of the same layer in at
    most ``max_overhang`` face-adjacent occupied steps. Everything else
    is reported unstable.
    """
    unstable = unsupported_cells(s.occupied, max_overhang)
    return StabilityReport(
        stable=not unstable,
        unstable_cells=unstable,
        supported_count=len(s.occupied) - len(unstable),
    )


def enclosed_volume(s: VoxelStructure) -> int:
    """Count empty cells unreachable from the world boundary.

    Reachability is 6-connected flood fill through empty cells starting
    from every empty cell on a boundary face of the dims box.
    """
    nx, ny, nz = s.dims
    occ = s.occupied
    total_empty = nx * ny * nz - len(occ)
    if total_empty == 0:
        return 0

    seen: set[Cell] = set()
    frontier: deque[Cell] = deque()

    def seed(c: Cell):
        if c not in occ and c not in seen:
            seen.add(c)
            frontier.append(c)

    for x in range(nx):
        for y in range(ny):
            seed((x, y, 0))
            seed((x, y, nz - 1))
    for x in range(nx):
        for z in range(nz):
            seed((x, 0, z))
            seed((x, ny - 1, z))
    for y in range(ny):
        for z in range(nz):
            seed((0, y, z))
            seed((nx - 1, y, z))

    while frontier:
        x, y, z = frontier.popleft()
        for nxt in (
            (x + 1, y, z), (x - 1, y, z),
            (x, y + 1, z), (x, y - 1, z),
            (x, y, z + 1), (x, y, z - 1),
        ):
            (a, b, c) = nxt
            if 0 <= a < nx and 0 <= b < ny and 0 <= c < nz:
                if nxt not in occ and nxt not in seen:
                    seen.add(nxt)
                    frontier.append(nxt)

    return total_empty - len(seen)


# --- constraints ---


@dataclass(frozen=True)
class Stability:
    """Penalize every unsupported cell."""

    weight: float = 1.0
    max_overhang: int = 2


@dataclass(frozen=True)
class EnclosedVolumeAtLeast:
    """Penalize the shortfall below a minimum enclosed volume."""

    min_volume: int
    weight: float = 1.0


@dataclass(frozen=True)
class MaterialAtMost:
    """Penalize occupied cells beyond the material budget."""

    max_cells: int
    weight: float = 1.0


@dataclass(frozen=True)
class WithinBox:
    """Penalize occupied cells outside an inclusive site box."""

    lo: Cell
    hi: Cell
    weight: float = 1.0


Constraint = Stability | EnclosedVolumeAtLeast | MaterialAtMost | WithinBox


@dataclass(frozen=True)
class ConstraintSet:
    constraints: tuple[Constraint, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "constraints", tuple(self.constraints))
        for c in self.constraints:
            if c.weight < 0:
                raise ValueError(f"constraint weight must be >= 0: {c}")


@dataclass(frozen=True)
class ConstraintPenalties:
    penalties: tuple[float, ...]
    total: float


def _violation(s: VoxelStructure, c: Constraint) -> float:
    if isinstance(c, Stability):
        return len(check_stability(s, c.max_overhang).unstable_cells)
    if isinstance(c, EnclosedVolumeAtLeast):
        return max(0, c.min_volume - enclosed_volume(s))
    if isinstance(c, MaterialAtMost):
        return max(0, len(s.occupied) - c.max_cells)
    if isinstance(c, WithinBox):
        (x0, y0, z0), (x1, y1, z1) = c.lo, c.hi
        return sum(
            1
            for (x, y, z) in s.occupied
            if not (x0 <= x <= x1 and y0 <= y <= y1 and z0 <= z <= z1)
        )
    raise TypeError(f"unknown constraint {c!r}")


def eval_constraints(s: VoxelStructure, cs: ConstraintSet) -> ConstraintPenalties:
    """Weighted hinge penalties, one per constraint, plus their sum."""
    per = tuple(c.weight * _violation(s, c) for c in cs.constraints)
    return ConstraintPenalties(penalties=per, total=sum(per))


def load_constraints(text: str) -> ConstraintSet:
    """Parse the JSON constraint list.

    Format: array of {"kind": ..., "params": {...}, "weight": w}. Kinds:
    Stability (optional param max_overhang), EnclosedVolumeAtLeast
    (param v_min), MaterialAtMost (param m_max), WithinBox (param box =
    [x0, y0, z0, x1, y1, z1], inclusive).
    """
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"constraint file is not valid JSON: {exc}") from exc
    if not isinstance(raw, list):
        raise FormatError("constraint file must hold a JSON array")
    out: list[Constraint] = []
    for i, entry in enumerate(raw):
        if not isinstance(entry, dict) or "kind" not in entry:
            raise FormatError(f"constraint #{i} lacks a 'kind'")
        kind = entry["kind"]
        weight = float(entry.get("weight", 1.0))
        params = entry.get("params", {})
        try:
            if kind == "Stability":
                out.append(Stability(weight=weight, max_overhang=int(params.get("max_overhang", 2))))
            elif kind == "EnclosedVolumeAtLeast":
                out.append(EnclosedVolumeAtLeast(min_volume=int(params["v_min"]), weight=weight))
            elif kind == "MaterialAtMost":
                out.append(MaterialAtMost(max_cells=int(params["m_max"]), weight=weight))
            elif kind == "WithinBox":
                box = params["box"]
                x0, y0, z0, x1, y1, z1 = (int(v) for v in box)
                out.append(WithinBox(lo=(x0, y0, z0), hi=(x1, y1, z1), weight=weight))
            else:
                raise FormatError(f"constraint #{i}: unknown kind {kind!r}")
        except (KeyError, TypeError, ValueError) as exc:
            raise FormatError(f"constraint #{i}: bad params for {kind}: {params!r}") from exc
    return ConstraintSet(tuple(out))
