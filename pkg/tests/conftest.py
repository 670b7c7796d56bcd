import random
from pathlib import Path

import pytest

from domus.world import VoxelStructure

CORPUS = Path(__file__).resolve().parent.parent / "corpus"


@pytest.fixture(scope="session")
def corpus() -> Path:
    return CORPUS


def S(dims, cells) -> VoxelStructure:
    return VoxelStructure(tuple(dims), frozenset(cells))


def random_structure(rng: random.Random, max_cells: int = 200,
                     dims_lo: int = 6, dims_hi: int = 16) -> VoxelStructure:
    """Seeded mixture of scattered cells and small cuboid unions."""
    nx = rng.randint(dims_lo, dims_hi)
    ny = rng.randint(dims_lo, dims_hi)
    nz = rng.randint(dims_lo, dims_hi)
    budget = rng.randint(1, max_cells)
    cells: set[tuple[int, int, int]] = set()
    while len(cells) < budget:
        if rng.random() < 0.5:
            cells.add((rng.randrange(nx), rng.randrange(ny), rng.randrange(nz)))
        else:
            dx, dy, dz = rng.randint(1, 4), rng.randint(1, 4), rng.randint(1, 4)
            x = rng.randrange(max(1, nx - dx + 1))
            y = rng.randrange(max(1, ny - dy + 1))
            z = rng.randrange(max(1, nz - dz + 1))
            block = {(x + i, y + j, z + k)
                     for i in range(dx) for j in range(dy) for k in range(dz)}
            if len(cells | block) > budget:
                cells.add((rng.randrange(nx), rng.randrange(ny), rng.randrange(nz)))
            else:
                cells |= block
    extra = list(cells)
    while len(cells) > budget:
        cells.discard(extra.pop())
    return VoxelStructure((nx, ny, nz), frozenset(cells))
