"""Search program space for designs that are cheap to perceive and
structurally sound.

The objective prices a candidate program by executing it and summing
the residual perception cost of its structure (bytes of shortest
program for whatever the pattern dictionary cannot explain) with the
weighted constraint penalties. Both terms are bytes-equivalent, so they
add. A seeded simulated annealer edits the program directly; every
dictionary pattern is precompiled into a DEF stamp so a single edit can
drop a whole primitive into the design.
"""

from __future__ import annotations

import math
import random
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from . import synthesis, vm
from .aesthetics import Pattern, PatternDictionary, cover
from .errors import DomusError
from .world import ConstraintSet, VoxelStructure, eval_constraints

__all__ = [
    "SearchParams",
    "TraceRecord",
    "SearchTrace",
    "objective",
    "optimize",
    "compile_stamp",
    "stamp_prelude",
]

_MOVE_KINDS = (
    "insert",
    "delete",
    "perturb",
    "wrap_repeat",
    "extract_def",
    "insert_stamp",
)

DEFAULT_MOVE_WEIGHTS = {
    "insert": 3.0,
    "delete": 2.0,
    "perturb": 3.0,
    "wrap_repeat": 1.0,
    "extract_def": 0.5,
    "insert_stamp": 3.0,
}


@dataclass(frozen=True)
class SearchParams:
    seed: int = 0
    iterations: int = 1000
    initial_temperature: float = 8.0
    cooling: float = 0.999
    dims: tuple[int, int, int] = (16, 16, 16)
    max_program_bytes: int = 4096
    move_weights: dict = field(default_factory=lambda: dict(DEFAULT_MOVE_WEIGHTS))
    islands: int = 1

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if not (0.0 < self.cooling < 1.0):
            raise ValueError("cooling must lie in (0, 1)")
        if self.initial_temperature <= 0:
            raise ValueError("initial temperature must be positive")
        if self.islands < 1:
            raise ValueError("islands must be >= 1")


@dataclass(frozen=True)
class TraceRecord:
    iteration: int
    objective: float
    accepted: bool
    best_so_far: float


@dataclass(frozen=True)
class SearchTrace:
    records: tuple[TraceRecord, ...]

    def to_csv(self) -> str:
        lines = ["iter,objective,accepted,best"]
        for r in self.records:
            lines.append(
                f"{r.iteration},{_fmt(r.objective)},{int(r.accepted)},{_fmt(r.best_so_far)}"
            )
        return "\n".join(lines) + "\n"


def _fmt(x: float) -> str:
    if x == math.inf:
        return "inf"
    if x == int(x):
        return str(int(x))
    return repr(x)


def objective(program: vm.Program, dictionary: PatternDictionary,
              cs: ConstraintSet, dims: tuple[int, int, int]) -> float:
    """Residual perception cost plus constraint penalties, in bytes.

    Programs that fail to execute score +inf.
    """
    try:
        built = vm.execute(program, dims)
    except DomusError:
        return math.inf
    cov = cover(built, dictionary)
    residual = VoxelStructure(dims, cov.residual)
    r = synthesis.synthesize_min(residual).length
    return r + eval_constraints(built, cs).total


_IDENT_OK = re.compile(r"[a-z][a-z0-9_]*\Z")


def compile_stamp(pattern: Pattern, name: str) -> vm.Def:
    """Turn a pattern into a DEF whose call at any anchor reproduces the
    pattern cells relative to that anchor."""
    shape = VoxelStructure(
        (
            max(c[0] for c in pattern.cells) + 1,
            max(c[1] for c in pattern.cells) + 1,
            max(c[2] for c in pattern.cells) + 1,
        ),
        pattern.cells,
    )
    body = synthesis.synthesize_min(shape).program.instructions
    if any(isinstance(ins, vm.Def) for ins in body):
        body = synthesis.literal_program(shape).instructions
    return vm.Def(name, body)


def stamp_prelude(dictionary: PatternDictionary) -> tuple[vm.Def, ...]:
    defs = []
    used: set[str] = set()
    for i, pat in enumerate(dictionary.patterns):
        name = pat.name if _IDENT_OK.match(pat.name) and pat.name not in used else f"p{i}"
        while name in used:
            name = f"p{i}_{len(used)}"
        used.add(name)
        defs.append(compile_stamp(pat, name))
    return tuple(defs)


class _Editor:
    """Random structure-preserving edits of the instruction list after
    the stamp prelude."""

    def __init__(self, rng: random.Random, params: SearchParams,
                 stamp_names: list[str]):
        self.rng = rng
        self.params = params
        self.stamp_names = stamp_names
        nx, ny, nz = params.dims
        self.max_move = max(nx, ny, nz) - 1 if max(nx, ny, nz) > 1 else 1
        weights = params.move_weights
        self.kinds = [k for k in _MOVE_KINDS if weights.get(k, 0) > 0]
        self.weights = [weights[k] for k in self.kinds]

    def random_instruction(self) -> vm.Instruction:
        rng = self.rng
        roll = rng.randrange(4 if self.stamp_names else 3)
        if roll == 0:
            return vm.Place()
        if roll == 1:
            axis = rng.choice("XYZ")
            n = rng.randint(1, min(4, self.max_move)) * rng.choice((1, -1))
            return vm.Move(axis, n)
        if roll == 2:
            nx, ny, nz = self.params.dims
            return vm.Fill(rng.randint(1, min(4, nx)), rng.randint(1, min(4, ny)),
                           rng.randint(1, min(4, nz)))
        return vm.Call(rng.choice(self.stamp_names))

    def propose(self, tail: list[vm.Instruction]) -> list[vm.Instruction] | None:
        kind = self.rng.choices(self.kinds, weights=self.weights, k=1)[0]
        fn = getattr(self, "_" + kind)
        return fn(list(tail))

    def _insert(self, tail):
        pos = self.rng.randint(0, len(tail))
        tail.insert(pos, self.random_instruction())
        return tail

    def _insert_stamp(self, tail):
        if not self.stamp_names:
            return None
        pos = self.rng.randint(0, len(tail))
        tail.insert(pos, vm.Call(self.rng.choice(self.stamp_names)))
        return tail

    def _delete(self, tail):
        if not tail:
            return None
        tail.pop(self.rng.randrange(len(tail)))
        return tail

    def _perturb(self, tail):
        spots = [i for i, ins in enumerate(tail)
                 if isinstance(ins, (vm.Move, vm.Fill, vm.Repeat, vm.Call))]
        if not spots:
            return None
        i = self.rng.choice(spots)
        ins = tail[i]
        delta = self.rng.choice((-2, -1, 1, 2))
        if isinstance(ins, vm.Move):
            n = ins.n + delta
            if n == 0:
                n = delta  # step over the forbidden zero
            tail[i] = vm.Move(ins.axis, n)
        elif isinstance(ins, vm.Fill):
            which = self.rng.randrange(3)
            vals = [ins.dx, ins.dy, ins.dz]
            vals[which] = max(1, vals[which] + delta)
            tail[i] = vm.Fill(*vals)
        elif isinstance(ins, vm.Repeat):
            tail[i] = vm.Repeat(max(2, ins.count + delta), ins.body)
        else:
            tail[i] = vm.Call(ins.name, max(1, ins.scale + delta))
        return tail

    def _wrap_repeat(self, tail):
        if not tail:
            return None
        i = self.rng.randrange(len(tail))
        j = min(len(tail), i + self.rng.randint(1, 3))
        block = tuple(tail[i:j])
        if any(isinstance(ins, vm.Def) for ins in block):
            return None  # DEF may not sink into a repeat body
        count = self.rng.randint(2, 4)
        tail[i:j] = [vm.Repeat(count, block)]
        return tail

    def _extract_def(self, tail):
        # reuse the synthesis pass on the tail; stamp names are reserved
        # so a fresh def can never shadow a dictionary primitive
        prog = synthesis._extract_defs(vm.Program(tuple(tail)),
                                       reserved_names=frozenset(self.stamp_names))
        new_tail = list(prog.instructions)
        if new_tail == tail:
            return None
        return new_tail


def _anneal(dictionary: PatternDictionary, cs: ConstraintSet,
            params: SearchParams, seed: int) -> tuple[vm.Program, SearchTrace]:
    rng = random.Random(seed)
    prelude = stamp_prelude(dictionary)
    stamp_names = [d.name for d in prelude]
    editor = _Editor(rng, params, stamp_names)

    def assemble(tail: list[vm.Instruction]) -> vm.Program:
        return vm.Program(prelude + tuple(tail))

    def score(tail: list[vm.Instruction]) -> float:
        return objective(assemble(tail), dictionary, cs, params.dims)

    current: list[vm.Instruction] = []
    current_j = score(current)
    best_tail = list(current)
    best_j = current_j

    temp = params.initial_temperature
    records = []
    for it in range(params.iterations):
        proposal = editor.propose(current)
        accepted = False
        prop_j = current_j
        if proposal is not None:
            candidate = assemble(proposal)
            if vm.program_length(candidate) <= params.max_program_bytes:
                prop_j = objective(candidate, dictionary, cs, params.dims)
                delta = prop_j - current_j
                if delta <= 0 or (temp > 0 and rng.random() < math.exp(-delta / temp)):
                    accepted = True
                    current = proposal
                    current_j = prop_j
                    if current_j < best_j:
                        best_j = current_j
                        best_tail = list(current)
        records.append(TraceRecord(iteration=it, objective=prop_j,
                                   accepted=accepted, best_so_far=best_j))
        temp *= params.cooling

    return assemble(best_tail), SearchTrace(tuple(records))


def optimize(dictionary: PatternDictionary, cs: ConstraintSet,
             params: SearchParams, workers: int = 1
             ) -> tuple[vm.Program, SearchTrace]:
    """Minimize the objective by simulated annealing.

    Single island: deterministic given the seed. Multiple islands run
    independent annealers seeded per island and keep the best final
    objective (ties to the lowest island index); the outcome depends on
    the island count but never on the worker count.
    """
    if params.islands == 1:
        return _anneal(dictionary, cs, params, params.seed)

    seeds = [_island_seed(params.seed, i) for i in range(params.islands)]
    if workers <= 1:
        results = [_anneal(dictionary, cs, params, s) for s in seeds]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_anneal, dictionary, cs, params, s) for s in seeds]
            results = [f.result() for f in futures]

    scored = [
        (objective(prog, dictionary, cs, params.dims), i)
        for i, (prog, _) in enumerate(results)
    ]
    _, winner = min(scored)
    return results[winner]


def _island_seed(seed: int, index: int) -> int:
    return seed if index == 0 else seed * 7_368_787 + index
