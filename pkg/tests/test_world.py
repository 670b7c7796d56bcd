import random

import pytest

from domus import world
from domus.world import (
    ConstraintSet,
    EnclosedVolumeAtLeast,
    MaterialAtMost,
    Stability,
    VoxelStructure,
    WithinBox,
    check_stability,
    enclosed_volume,
    eval_constraints,
    load_constraints,
)

from conftest import S


def test_structure_validation():
    with pytest.raises(ValueError):
        VoxelStructure((2, 2, 2), frozenset({(2, 0, 0)}))
    with pytest.raises(ValueError):
        VoxelStructure((0, 1, 1))


def test_equality_is_cells_and_dims():
    a = S((3, 3, 3), {(0, 0, 0)})
    b = S((3, 3, 3), {(0, 0, 0)})
    c = S((4, 3, 3), {(0, 0, 0)})
    assert a == b and a != c


# --- layered text ---

def test_layer_text_examples():
    assert S((1, 1, 1), set()).to_layer_text() == "DIMS 1 1 1\nLAYER 0\n."
    assert S((1, 1, 1), {(0, 0, 0)}).to_layer_text() == "DIMS 1 1 1\nLAYER 0\n#"
    assert S((2, 1, 1), {(0, 0, 0), (1, 0, 0)}).to_layer_text() == "DIMS 2 1 1\nLAYER 0\n##"


def test_layer_text_roundtrip():
    rng = random.Random(5)
    for _ in range(25):
        nx, ny, nz = rng.randint(1, 6), rng.randint(1, 6), rng.randint(1, 6)
        cells = {(rng.randrange(nx), rng.randrange(ny), rng.randrange(nz))
                 for _ in range(rng.randint(0, 20))}
        s = S((nx, ny, nz), cells)
        assert VoxelStructure.from_layer_text(s.to_layer_text()) == s


def test_layer_text_bad_input():
    with pytest.raises(world.FormatError):
        VoxelStructure.from_layer_text("bogus")
    with pytest.raises(world.FormatError):
        VoxelStructure.from_layer_text("DIMS 2 1 1\nLAYER 0\n#")  # short row


# --- stability ---

def test_ground_cell_is_stable():
    rep = check_stability(S((3, 3, 3), {(0, 0, 0)}))
    assert rep.stable and rep.supported_count == 1


def test_floating_cell_is_unstable():
    rep = check_stability(S((3, 3, 3), {(0, 0, 1)}))
    assert not rep.stable
    assert rep.unstable_cells == ((0, 0, 1),)


def test_column_with_lateral_overhang():
    cells = {(0, 0, z) for z in range(4)} | {(1, 0, 3)}
    rep = check_stability(S((3, 1, 4), cells), max_overhang=2)
    assert rep.stable


def test_overhang_limit():
    # deck extends 3 steps from the column top: one step too far
    cells = {(0, 0, z) for z in range(2)}
    cells |= {(1, 0, 1), (2, 0, 1), (3, 0, 1)}
    rep = check_stability(S((4, 1, 2), cells), max_overhang=2)
    assert rep.unstable_cells == ((3, 0, 1),)
    assert check_stability(S((4, 1, 2), cells), max_overhang=3).stable


def test_ground_slab_stable_for_any_overhang():
    rng = random.Random(11)
    for overhang in (0, 1, 2, 5):
        cells = {(rng.randrange(8), rng.randrange(8), 0) for _ in range(20)}
        assert check_stability(S((8, 8, 1), cells), overhang).stable


# --- enclosed volume ---

def test_enclosed_volume_empty_world():
    assert enclosed_volume(S((4, 4, 4), set())) == 0


def test_enclosed_volume_hollow_shell():
    shell = {(x, y, z) for x in range(1, 4) for y in range(1, 4) for z in range(1, 4)}
    shell.discard((2, 2, 2))
    s = S((5, 5, 5), shell)
    assert len(s.occupied) == 26
    assert enclosed_volume(s) == 1


def test_enclosed_volume_solid_cube():
    cube = {(x, y, z) for x in range(3) for y in range(3) for z in range(3)}
    assert enclosed_volume(S((3, 3, 3), cube)) == 0


def test_enclosed_volume_translation_invariant():
    shell = {(x, y, z) for x in range(3) for y in range(3) for z in range(3)}
    shell.discard((1, 1, 1))
    a = S((9, 9, 9), {(x + 1, y + 1, z + 1) for (x, y, z) in shell})
    b = S((9, 9, 9), {(x + 4, y + 3, z + 2) for (x, y, z) in shell})
    assert enclosed_volume(a) == enclosed_volume(b) == 1


# --- constraints ---

def test_stability_penalty():
    cs = ConstraintSet((Stability(weight=10.0),))
    floor = S((4, 4, 2), {(x, y, 0) for x in range(4) for y in range(4)})
    assert eval_constraints(floor, cs).total == 0
    floating = S((4, 4, 2), {(0, 0, 1)})
    assert eval_constraints(floating, cs).total == 10.0


def test_material_hinge():
    cells = {(x, y, 0) for x in range(6) for y in range(5)}  # 30 cells
    cs = ConstraintSet((MaterialAtMost(20, weight=2.0),))
    assert eval_constraints(S((6, 5, 1), cells), cs).total == 20.0


def test_enclosed_volume_hinge():
    cs = ConstraintSet((EnclosedVolumeAtLeast(1, weight=3.0),))
    assert eval_constraints(S((4, 4, 4), set()), cs).total == 3.0


def test_within_box():
    cs = ConstraintSet((WithinBox(lo=(0, 0, 0), hi=(1, 1, 1), weight=1.0),))
    s = S((4, 4, 4), {(0, 0, 0), (1, 1, 1), (3, 3, 3), (2, 0, 0)})
    out = eval_constraints(s, cs)
    assert out.total == 2.0


def test_material_penalty_monotone_in_cells():
    rng = random.Random(3)
    cs = ConstraintSet((MaterialAtMost(10, weight=2.0),))
    cells: set[tuple[int, int, int]] = set()
    prev = 0.0
    for _ in range(40):
        cells.add((rng.randrange(6), rng.randrange(6), rng.randrange(6)))
        now = eval_constraints(S((6, 6, 6), cells), cs).total
        assert now >= prev
        prev = now


def test_total_zero_iff_all_zero():
    rng = random.Random(9)
    cs = ConstraintSet((Stability(weight=5.0), MaterialAtMost(15, weight=1.0)))
    for _ in range(30):
        cells = {(rng.randrange(5), rng.randrange(5), rng.randrange(3))
                 for _ in range(rng.randint(1, 25))}
        out = eval_constraints(S((5, 5, 3), cells), cs)
        assert (out.total == 0) == all(p == 0 for p in out.penalties)


def test_negative_weight_rejected():
    with pytest.raises(ValueError):
        ConstraintSet((Stability(weight=-1.0),))


def test_constraint_json_loader():
    text = """
    [
      {"kind": "Stability", "params": {"max_overhang": 1}, "weight": 10},
      {"kind": "EnclosedVolumeAtLeast", "params": {"v_min": 4}, "weight": 3},
      {"kind": "MaterialAtMost", "params": {"m_max": 20}, "weight": 2},
      {"kind": "WithinBox", "params": {"box": [0, 0, 0, 7, 7, 7]}, "weight": 1}
    ]
    """
    cs = load_constraints(text)
    assert cs.constraints == (
        Stability(weight=10.0, max_overhang=1),
        EnclosedVolumeAtLeast(min_volume=4, weight=3.0),
        MaterialAtMost(max_cells=20, weight=2.0),
        WithinBox(lo=(0, 0, 0), hi=(7, 7, 7), weight=1.0),
    )


@pytest.mark.parametrize("text", [
    "not json",
    "{}",
    '[{"weight": 1}]',
    '[{"kind": "Nope", "weight": 1}]',
    '[{"kind": "MaterialAtMost", "params": {}, "weight": 1}]',
])
def test_constraint_json_errors(text):
    with pytest.raises(world.FormatError):
        load_constraints(text)
