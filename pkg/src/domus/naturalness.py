"""Regularity metrics separating machined-looking from natural-looking shapes.

Three appearance features are scored in [0, 1]: straightness (longest
axis-aligned run relative to the bounding box), planarity (how much of
the exposed surface lies in large flat patches), and mirror symmetry.
Their mean is the regularity index; naturalness is its complement.
Self-similarity is measured separately with a box-counting dimension
estimate, reported with the quality of its log-log fit.

The exact formulas and the 0.5 label threshold are calibrations chosen
for testability; every knob is exposed as a parameter.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

from .errors import DomusError
from .world import Cell, VoxelStructure

__all__ = [
    "EmptyStructure",
    "TooSmall",
    "NaturalnessReport",
    "straightness_score",
    "planarity_score",
    "symmetry_score",
    "box_counting_dimension",
    "naturalness_report",
]


class EmptyStructure(DomusError):
    """Metric asked of a structure with no occupied cells."""


class TooSmall(DomusError):
    """Bounding box admits fewer than three box-counting sizes."""


def _require_nonempty(s: VoxelStructure):
    if not s.occupied:
        raise EmptyStructure("metric undefined for an empty structure")


def straightness_score(s: VoxelStructure) -> float:
    """Longest occupied run along an axis over that axis's bounding-box
    extent, maximized over axes.

    Axes where the bounding box is a single cell thick are skipped (a
    flat shape should not score as a perfect line); a lone cell, where
    every axis degenerates, scores 1.0.
    """
    _require_nonempty(s)
    occ = s.occupied
    lo, hi = s.bounding_box()
    extents = (hi[0] - lo[0] + 1, hi[1] - lo[1] + 1, hi[2] - lo[2] + 1)

    best = None
    for axis in range(3):
        if extents[axis] == 1:
            continue
        step = [0, 0, 0]
        step[axis] = 1
        sx, sy, sz = step
        longest = 0
        for (x, y, z) in occ:
            if (x - sx, y - sy, z - sz) in occ:
                continue  # not a run start
            run = 1
            while (x + run * sx, y + run * sy, z + run * sz) in occ:
                run += 1
            longest = max(longest, run)
        ratio = longest / extents[axis]
        best = ratio if best is None else max(best, ratio)
    return 1.0 if best is None else best


_FACE_DIRS = (
    (1, 0, 0), (-1, 0, 0),
    (0, 1, 0), (0, -1, 0),
    (0, 0, 1), (0, 0, -1),
)


def planarity_score(s: VoxelStructure, min_patch: int = 4) -> float:
    """Fraction of exposed faces lying in coplanar patches of at least
    min_patch faces.

    A face is exposed when its neighbor cell is empty or beyond the
    world box. Faces join a patch when they share orientation and plane
    and their cells are adjacent within that plane.
    """
    _require_nonempty(s)
    occ = s.occupied
    faces: set[tuple[Cell, int]] = set()
    for c in occ:
        for di, (dx, dy, dz) in enumerate(_FACE_DIRS):
            n = (c[0] + dx, c[1] + dy, c[2] + dz)
            if n not in occ:
                faces.add((c, di))
    if not faces:
        return 0.0

    # in-plane neighbor steps for each face orientation
    tangents = {
        0: ((0, 1, 0), (0, -1, 0), (0, 0, 1), (0, 0, -1)),
        2: ((1, 0, 0), (-1, 0, 0), (0, 0, 1), (0, 0, -1)),
        4: ((1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0)),
    }
    flat_area = 0
    seen: set[tuple[Cell, int]] = set()
    for start in faces:
        if start in seen:
            continue
        stack = [start]
        seen.add(start)
        patch = 0
        while stack:
            (c, di) = stack.pop()
            patch += 1
            for (tx, ty, tz) in tangents[di & ~1]:
                nb = ((c[0] + tx, c[1] + ty, c[2] + tz), di)
                if nb in faces and nb not in seen:
                    seen.add(nb)
                    stack.append(nb)
        if patch >= min_patch:
            flat_area += patch
    return flat_area / len(faces)


def symmetry_score(s: VoxelStructure) -> float:
    """Best mirror-match fraction over the three axis-aligned planes
    through the bounding-box center.

    Axes where the bounding box is one cell thick are skipped, since
    mirroring across them is the identity; a lone cell scores 1.0.
    """
    _require_nonempty(s)
    occ = s.occupied
    lo, hi = s.bounding_box()
    best = None
    for axis in range(3):
        if hi[axis] == lo[axis]:
            continue
        span = lo[axis] + hi[axis]
        matched = 0
        for c in occ:
            m = list(c)
            m[axis] = span - c[axis]
            if tuple(m) in occ:
                matched += 1
        frac = matched / len(occ)
        best = frac if best is None else max(best, frac)
    return 1.0 if best is None else best


def box_counting_dimension(s: VoxelStructure) -> tuple[float, float]:
    """Box-counting dimension estimate and the r-squared of its fit.

    Boxes of side 1, 2, 4, ... up to half the longest bounding-box
    extent are anchored at the bounding-box corner (so the estimate is
    translation invariant); N(sigma) counts boxes holding at least one
    occupied cell. The dimension is the least-squares slope of
    ln N(sigma) against ln(1/sigma); at least three sizes are required.
    """
    _require_nonempty(s)
    lo, hi = s.bounding_box()
    max_extent = max(hi[i] - lo[i] + 1 for i in range(3))
    sizes = []
    sigma = 1
    while sigma <= max_extent / 2:
        sizes.append(sigma)
        sigma *= 2
    if len(sizes) < 3:
        raise TooSmall(
            f"need >= 3 box sizes, got {len(sizes)} (max extent {max_extent})"
        )

    xs, ys = [], []
    for sigma in sizes:
        boxes = {
            ((c[0] - lo[0]) // sigma, (c[1] - lo[1]) // sigma, (c[2] - lo[2]) // sigma)
            for c in s.occupied
        }
        xs.append(math.log(1.0 / sigma))
        ys.append(math.log(len(boxes)))

    n = len(xs)
    mean_x = sum(xs) / n
    mean_y = sum(ys) / n
    sxx = sum((x - mean_x) ** 2 for x in xs)
    sxy = sum((x - mean_x) * (y - mean_y) for x, y in zip(xs, ys))
    syy = sum((y - mean_y) ** 2 for y in ys)
    slope = sxy / sxx
    r2 = 1.0 if syy == 0 else (sxy * sxy) / (sxx * syy)
    return slope, r2


@dataclass(frozen=True)
class NaturalnessReport:
    straightness: float
    planarity: float
    symmetry: float
    fractal_dimension: Optional[float]
    fit_r2: Optional[float]
    regularity_index: float
    naturalness: float
    label: str  # "Natural" | "Artificial"


def naturalness_report(s: VoxelStructure, threshold: float = 0.5,
                       min_patch: int = 4) -> NaturalnessReport:
    """Assemble all metrics; label is Natural when naturalness >= threshold.

    The fractal fields are None when the structure is too small for a
    box-counting fit; the label depends only on the regularity scores.
    """
    _require_nonempty(s)
    st = straightness_score(s)
    pl = planarity_score(s, min_patch=min_patch)
    sy = symmetry_score(s)
    try:
        dim, r2 = box_counting_dimension(s)
    except TooSmall:
        dim, r2 = None, None
    regularity = (st + pl + sy) / 3.0
    nat = 1.0 - regularity
    return NaturalnessReport(
        straightness=st,
        planarity=pl,
        symmetry=sy,
        fractal_dimension=dim,
        fit_r2=r2,
        regularity_index=regularity,
        naturalness=nat,
        label="Natural" if nat >= threshold else "Artificial",
    )
