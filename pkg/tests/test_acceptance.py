"""End-to-end acceptance suite.

One test per criterion; each prints a single PASS/FAIL line with its
measured numbers (run with -s to see them on success). Criteria with a
stated runtime budget assert it.
"""

import io
import math
import random
import time
from contextlib import redirect_stdout
from itertools import combinations
from pathlib import Path

from domus import cli, designer, fleet, naturalness, synthesis, vm
from domus.aesthetics import Pattern, PatternDictionary, beauty_score
from domus.designer import SearchParams, objective, optimize
from domus.world import ConstraintSet, MaterialAtMost, Stability, VoxelStructure

from conftest import CORPUS, S, random_structure


def _report(num: int, ok: bool, detail: str):
    print(f"ACCEPTANCE {num} {'PASS' if ok else 'FAIL'}: {detail}")


# --- 1: oracle equivalence on the tiny corpus ---

def _classify(cells: frozenset) -> str:
    k = len(cells)
    if k == 0:
        return "other"
    if k == 1:
        return "single"
    xs = {c[0] for c in cells}
    ys = {c[1] for c in cells}
    zs = {c[2] for c in cells}
    spans = [max(v) - min(v) + 1 for v in (xs, ys, zs)]
    if spans[0] * spans[1] * spans[2] == k:
        return "cuboid"  # includes straight rows
    varying = [len(v) > 1 for v in (xs, ys, zs)]
    if sum(varying) == 1:
        axis = varying.index(True)
        vals = sorted(c[axis] for c in cells)
        if vals == list(range(vals[0], vals[0] + k)):
            return "row"
    return "other"


def test_criterion_1_oracle_equivalence():
    start = time.perf_counter()
    table = synthesis.exhaustive_table((3, 3, 3), 40)
    cells_all = [(x, y, z) for z in range(3) for y in range(3) for x in range(3)]
    checked = matched = 0
    failures = []
    for k in range(5):
        for combo in combinations(cells_all, k):
            cells = frozenset(combo)
            s = VoxelStructure((3, 3, 3), cells)
            bound = synthesis.synthesize_min(s)
            oracle = table.get(cells)
            shape = _classify(cells)
            checked += 1
            if shape in ("single", "row", "cuboid"):
                if oracle is None:
                    failures.append(f"{shape} {sorted(cells)}: no oracle within 40")
                elif bound.length != oracle.length:
                    failures.append(
                        f"{shape} {sorted(cells)}: pipeline {bound.length} != oracle {oracle.length}"
                    )
                else:
                    matched += 1
            else:
                if oracle is not None and bound.length < oracle.length:
                    failures.append(
                        f"other {sorted(cells)}: pipeline {bound.length} beat oracle {oracle.length}"
                    )
                if oracle is None and bound.length <= 40:
                    failures.append(
                        f"other {sorted(cells)}: pipeline found {bound.length} <= 40, oracle none"
                    )
    elapsed = time.perf_counter() - start
    ok = not failures and elapsed < 300
    _report(1, ok, f"{checked} structures, {matched} exact matches on "
                   f"single/row/cuboid shapes, {elapsed:.1f}s")
    assert not failures, failures[:5]
    assert elapsed < 300


# --- 2: soundness suite ---

def test_criterion_2_soundness():
    start = time.perf_counter()
    rng = random.Random(20540)
    for i in range(1000):
        s = random_structure(rng, max_cells=200)
        bound = synthesis.synthesize_min(s)
        assert vm.execute(bound.program, s.dims) == s, f"structure {i} not rebuilt"
        literal_len = vm.program_length(synthesis.literal_program(s))
        assert bound.length <= literal_len, f"structure {i} above literal"
    elapsed = time.perf_counter() - start
    _report(2, elapsed < 120, f"1000 structures rebuilt bit-exactly, {elapsed:.1f}s")
    assert elapsed < 120


# --- 3: overhead cancellation ---

def test_criterion_3_overhead_cancellation():
    rng = random.Random(31337)
    preamble = (
        vm.Def("zq1", (vm.Place(), vm.Move("X", 2))),
        vm.Def("zq2", (vm.Fill(2, 2, 1),)),
    )
    q_len = vm.program_length(vm.Program(preamble))
    pairs = 0
    while pairs < 100:
        a = random_structure(rng, max_cells=60)
        b = random_structure(rng, max_cells=60)
        if not a.occupied or not b.occupied:
            continue
        wa = synthesis.synthesize_min(a).program
        wb = synthesis.synthesize_min(b).program
        qa = vm.Program(preamble + wa.instructions)
        qb = vm.Program(preamble + wb.instructions)
        assert vm.program_length(qa) - vm.program_length(wa) == q_len + 1
        assert vm.program_length(qb) - vm.program_length(wb) == q_len + 1
        assert vm.execute(qa, a.dims) == a
        before = vm.program_length(wa) - vm.program_length(wb)
        after = vm.program_length(qa) - vm.program_length(qb)
        assert before == after
        pairs += 1
    _report(3, True, f"{pairs} pairs, byte difference invariant under a "
                     f"{q_len}-byte unused preamble")


# --- 4: beauty identities ---

def _random_dictionary(rng: random.Random, max_patterns: int = 3) -> PatternDictionary:
    pats = []
    for i in range(rng.randint(0, max_patterns)):
        cells = {(rng.randrange(3), rng.randrange(3), rng.randrange(2))
                 for _ in range(rng.randint(1, 5))}
        pats.append(Pattern(f"p{i}", frozenset(cells)))
    return PatternDictionary(tuple(pats))


def test_criterion_4_beauty_identities():
    rng = random.Random(777)
    zero_n = spanned = 0
    for _ in range(500):
        s = random_structure(rng, max_cells=40, dims_lo=4, dims_hi=10)
        d = _random_dictionary(rng)
        b = beauty_score(s, d)
        assert b.score == b.D * b.N + b.r
        if d.size == 0:
            zero_n += 1
            assert b.score == synthesis.synthesize_min(s).length
    # structures generated as unions of dictionary stamps have no residual
    for _ in range(100):
        d = _random_dictionary(rng, max_patterns=3)
        if d.size == 0:
            continue
        dims = (10, 10, 6)
        cells: set = set()
        for _ in range(rng.randint(1, 8)):
            pat = d.patterns[rng.randrange(d.size)]
            ax, ay, az = rng.randrange(7), rng.randrange(7), rng.randrange(4)
            cells.update((ax + x, ay + y, az + z) for (x, y, z) in pat.cells)
        if not cells:
            continue
        b = beauty_score(VoxelStructure(dims, frozenset(cells)), d)
        assert b.r == 0, "stamp union left a residual"
        spanned += 1
    _report(4, True, f"score identity exact on 500 pairs "
                     f"({zero_n} with N=0), residual zero on {spanned} stamp unions")


# --- 5: fractal dimension ---

def test_criterion_5_fractal_dimension():
    start = time.perf_counter()
    target = math.log(8) / math.log(3)

    slab = S((64, 64, 1), {(x, y, 0) for x in range(64) for y in range(64)})
    slab_dim, _ = naturalness.box_counting_dimension(slab)
    line = S((64, 1, 1), {(x, 0, 0) for x in range(64)})
    line_dim, _ = naturalness.box_counting_dimension(line)

    dims_by_depth = {}
    r2_by_depth = {}
    for depth in (2, 3, 4):
        side = 3 ** depth
        prog = vm.parse((CORPUS / f"sierpinski{depth}.cvm").read_text())
        s = vm.execute(prog, (side, side, 1))
        dims_by_depth[depth], r2_by_depth[depth] = naturalness.box_counting_dimension(s)
    errors = [abs(dims_by_depth[d] - target) for d in (2, 3, 4)]
    elapsed = time.perf_counter() - start

    failures = []
    if abs(slab_dim - 2.0) > 0.15:
        failures.append(f"slab {slab_dim:.4f} not within 2.0 +/- 0.15")
    if abs(line_dim - 1.0) > 0.15:
        failures.append(f"line {line_dim:.4f} not within 1.0 +/- 0.15")
    if abs(dims_by_depth[4] - target) > 0.10:
        failures.append(
            f"depth-4 carpet {dims_by_depth[4]:.4f} not within {target:.4f} +/- 0.10"
        )
    if r2_by_depth[4] < 0.98:
        failures.append(f"depth-4 fit r2 {r2_by_depth[4]:.4f} < 0.98")
    if not (errors[0] > errors[1] > errors[2]):
        failures.append(f"|error| not monotone over depths: {errors}")
    if elapsed >= 30:
        failures.append(f"runtime {elapsed:.1f}s >= 30s")

    _report(5, not failures,
            f"slab {slab_dim:.3f}, line {line_dim:.3f}, carpet d2/d3/d4 "
            f"{dims_by_depth[2]:.4f}/{dims_by_depth[3]:.4f}/{dims_by_depth[4]:.4f} "
            f"(target {target:.4f}, r2 {r2_by_depth[4]:.4f}), {elapsed:.1f}s")
    assert not failures, failures


# --- 6: design optimizer ---

def test_criterion_6_optimizer():
    brick = Pattern("brick", frozenset({(0, 0, 0), (1, 0, 0)}))
    dictionary = PatternDictionary((brick,))
    cs = ConstraintSet((Stability(weight=10.0), MaterialAtMost(2, weight=2.0)))
    params = SearchParams(seed=7, iterations=5000, dims=(8, 8, 8),
                          initial_temperature=8.0, cooling=0.999)
    start = time.perf_counter()
    best, trace = optimize(dictionary, cs, params)
    elapsed = time.perf_counter() - start
    final = objective(best, dictionary, cs, params.dims)
    bests = [r.best_so_far for r in trace.records]
    nonincreasing = all(a >= b for a, b in zip(bests, bests[1:]))
    best2, trace2 = optimize(dictionary, cs, params)
    identical = vm.serialize(best2) == vm.serialize(best) and trace2 == trace
    ok = final == 0.0 and nonincreasing and identical and elapsed < 60
    _report(6, ok, f"final objective {final}, monotone best {nonincreasing}, "
                   f"rerun identical {identical}, {elapsed:.1f}s")
    assert final == 0.0
    assert nonincreasing and identical
    assert elapsed < 60


# --- 7: adversarial transfer ---

def test_criterion_7_adversarial_transfer():
    start = time.perf_counter()
    program = vm.parse((CORPUS / "bridge.cvm").read_text())
    dims = (8, 1, 8)
    prototype = vm.execute(program, dims)
    attack = fleet.find_attack(prototype, 2)
    robots = fleet.build_fleet(program, 50, fleet.RobotBuilder(), dims)
    robot_rep = fleet.transfer_rate(attack, robots)
    humans = fleet.build_fleet(program, 50, fleet.HumanBuilder(0.2, 1), dims)
    human_rep = fleet.transfer_rate(attack, humans)
    elapsed = time.perf_counter() - start
    ok = (attack.collapse_fraction >= 0.5
          and robot_rep.transfer_rate == 1.0
          and human_rep.transfer_rate < 1.0
          and human_rep.distinct_structures > 1
          and elapsed < 60)
    _report(7, ok, f"attack collapse {attack.collapse_fraction:.2f}, robot "
                   f"transfer {robot_rep.transfer_rate}, human transfer "
                   f"{human_rep.transfer_rate} over {human_rep.distinct_structures} "
                   f"distinct members, {elapsed:.1f}s")
    assert attack.collapse_fraction >= 0.5
    assert robot_rep.transfer_rate == 1.0
    assert human_rep.transfer_rate < 1.0
    assert human_rep.distinct_structures > 1
    assert elapsed < 60


# --- 8: pipeline determinism ---

def _cli(argv: list[str]) -> tuple[int, str]:
    buf = io.StringIO()
    with redirect_stdout(buf):
        code = cli.run(argv)
    return code, buf.getvalue()


def _pipeline_once(name: str, dims: tuple[int, int, int], tmp: Path) -> str:
    d = [str(v) for v in dims]
    tmp.mkdir(parents=True, exist_ok=True)
    vox = tmp / f"{name}.vox.txt"
    chunks = []
    code, _ = _cli(["build", str(CORPUS / name), "--dims", *d, "-o", str(vox)])
    assert code == 0
    chunks.append(vox.read_text())
    for sub in (["complexity", str(vox)],
                ["beauty", str(vox), "--dict", str(CORPUS / "brick.pat")],
                ["natural", str(vox)]):
        code, out = _cli(sub + ["--dims", *d])
        assert code in (0, 1), sub
        chunks.append(out)
    code, out = _cli(["attack", str(CORPUS / name), "--dims", *d,
                      "--k", "2", "--seed", "1", "--builder", "human", "--p", "0.2",
                      "--fleet", "20"])
    assert code == 0
    chunks.append(out)
    return "\n".join(chunks)


def test_criterion_8_pipeline_determinism(tmp_path):
    start = time.perf_counter()
    sizes = {
        "row3.cvm": (4, 1, 1),
        "slab4.cvm": (8, 8, 4),
        "pillar.cvm": (4, 4, 10),
        "bridge.cvm": (8, 1, 8),
        "sierpinski2.cvm": (9, 9, 1),
        "sierpinski3.cvm": (27, 27, 1),
        "sierpinski4.cvm": (81, 81, 1),
    }
    for name, dims in sizes.items():
        first = _pipeline_once(name, dims, tmp_path / "a")
        second = _pipeline_once(name, dims, tmp_path / "b")
        assert first == second, f"{name}: reports differ between runs"

    # parallel-capable operation: island annealing across worker counts
    brick = Pattern("brick", frozenset({(0, 0, 0), (1, 0, 0)}))
    dictionary = PatternDictionary((brick,))
    cs = ConstraintSet((Stability(weight=10.0), MaterialAtMost(2, weight=2.0)))
    params = SearchParams(seed=7, iterations=150, dims=(8, 8, 8), islands=3)
    prog1, trace1 = optimize(dictionary, cs, params, workers=1)
    prog2, trace2 = optimize(dictionary, cs, params, workers=3)
    workers_equal = (vm.serialize(prog1) == vm.serialize(prog2)
                     and trace1.to_csv() == trace2.to_csv())
    elapsed = time.perf_counter() - start
    _report(8, workers_equal,
            f"{len(sizes)} corpus pipelines byte-identical across runs, "
            f"islands identical across worker counts {workers_equal}, {elapsed:.1f}s")
    assert workers_equal
