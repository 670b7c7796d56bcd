"""Shortest-program upper bounds for voxel structures.

True minimal description length is uncomputable in general, so this
module produces certified upper bounds: every returned bound carries a
witness program whose execution reproduces the structure exactly. The
pipeline in synthesize_min compresses the trivial cell-by-cell program
through three passes (cuboid decomposition, loop folding, subroutine
extraction), each accepted only when it strictly shrinks the canonical
byte length. For desk-scale worlds, exhaustive_min enumerates every
canonical program up to a byte budget and realizes the true minimum,
which anchors the pipeline in tests.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterator, Optional

import numpy as np

from . import vm
from .errors import DomusError
from .world import Cell, VoxelStructure

__all__ = [
    "ComplexityBound",
    "EnumerationBudgetExceeded",
    "literal_program",
    "synthesize_min",
    "exhaustive_min",
    "exhaustive_table",
    "relative_complexity",
]

DEFAULT_CELL_LIMIT = 1_000_000


class EnumerationBudgetExceeded(DomusError):
    """Exhaustive search exceeded its node budget."""


@dataclass(frozen=True)
class ComplexityBound:
    """A witness program, its canonical byte length, and how it was found."""

    program: vm.Program
    length: int
    method: str  # "literal" | "compressed" | "exhaustive"


def _zyx(c: Cell):
    return (c[2], c[1], c[0])


def _moves_between(src: Cell, dst: Cell) -> list[vm.Instruction]:
    out: list[vm.Instruction] = []
    for axis, a, b in (("X", src[0], dst[0]), ("Y", src[1], dst[1]), ("Z", src[2], dst[2])):
        if b != a:
            out.append(vm.Move(axis, b - a))
    return out


def literal_program(s: VoxelStructure) -> vm.Program:
    """The trivial witness: visit cells in (z, y, x) order, one PLACE each."""
    out: list[vm.Instruction] = []
    cur: Cell = (0, 0, 0)
    for cell in sorted(s.occupied, key=_zyx):
        out.extend(_moves_between(cur, cell))
        out.append(vm.Place())
        cur = cell
    return vm.Program(tuple(out))


def _cuboid_decomposition(occ: frozenset[Cell]) -> list[tuple[Cell, tuple[int, int, int]]]:
    """Greedy maximal cuboids covering the occupied set.

    Scans cells in (z, y, x) order; each uncovered cell seeds a cuboid
    grown along x, then y, then z while rows and slabs stay occupied.
    Cuboids may overlap previously covered cells; their union is exactly
    the occupied set.
    """
    remaining = set(occ)
    out = []
    for cell in sorted(occ, key=_zyx):
        if cell not in remaining:
            continue
        x, y, z = cell
        dx = 1
        while (x + dx, y, z) in occ:
            dx += 1
        dy = 1
        while all((x + i, y + dy, z) in occ for i in range(dx)):
            dy += 1
        dz = 1
        while all((x + i, y + j, z + dz) in occ for i in range(dx) for j in range(dy)):
            dz += 1
        for k in range(dz):
            for j in range(dy):
                for i in range(dx):
                    remaining.discard((x + i, y + j, z + k))
        out.append(((x, y, z), (dx, dy, dz)))
    out.sort(key=lambda cu: _zyx(cu[0]))
    return out


def _cuboid_program(s: VoxelStructure) -> vm.Program:
    out: list[vm.Instruction] = []
    cur: Cell = (0, 0, 0)
    for anchor, (dx, dy, dz) in _cuboid_decomposition(s.occupied):
        out.extend(_moves_between(cur, anchor))
        if (dx, dy, dz) == (1, 1, 1):
            out.append(vm.Place())
        else:
            out.append(vm.Fill(dx, dy, dz))
        cur = anchor
    return vm.Program(tuple(out))


# --- canonical lengths without serializing ---


def _ilen(ins: vm.Instruction) -> int:
    if isinstance(ins, vm.Place):
        return 5
    if isinstance(ins, vm.Move):
        return 7 + len(str(ins.n))
    if isinstance(ins, vm.Fill):
        return 7 + len(str(ins.dx)) + len(str(ins.dy)) + len(str(ins.dz))
    if isinstance(ins, vm.Repeat):
        if not ins.body:
            return 11 + len(str(ins.count))
        return 12 + len(str(ins.count)) + _seq_len(ins.body)
    if isinstance(ins, vm.Def):
        if not ins.body:
            return 8 + len(ins.name)
        return 9 + len(ins.name) + _seq_len(ins.body)
    if isinstance(ins, vm.Call):
        base = 5 + len(ins.name)
        return base if ins.scale == 1 else base + 1 + len(str(ins.scale))
    raise TypeError(f"not an instruction: {ins!r}")


def _seq_len(instrs) -> int:
    if not instrs:
        return 0
    return sum(_ilen(i) for i in instrs) + len(instrs) - 1


# --- shared rolling-hash scan over instruction sequences ---

_MASK64 = (1 << 64) - 1
_HASH_BASE = 0x9E3779B97F4A7C15 | 1


class _SeqHasher:
    """Interns instructions and exposes O(1) block hashes per sequence."""

    def __init__(self):
        self._intern: dict[vm.Instruction, int] = {}
        self._next_sentinel = 1 << 40

    def ids_for(self, seq, unique_mask=None) -> list[int]:
        out = []
        for k, ins in enumerate(seq):
            if unique_mask is not None and unique_mask(ins):
                out.append(self.sentinel())
                continue
            v = self._intern.get(ins)
            if v is None:
                v = ((len(self._intern) + 1) * 0x2545F4914F6CDD1D) & _MASK64
                self._intern[ins] = v
            out.append(v)
        return out

    def sentinel(self) -> int:
        self._next_sentinel += 0x10001
        return (self._next_sentinel * 0xD1342543DE82EF95) & _MASK64


def _prefix_hashes(ids: list[int]) -> tuple[np.ndarray, list[int]]:
    h = 0
    acc = [0]
    for v in ids:
        h = (h * _HASH_BASE + v) & _MASK64
        acc.append(h)
    pw = [1]
    for _ in ids:
        pw.append((pw[-1] * _HASH_BASE) & _MASK64)
    return np.array(acc, dtype=np.uint64), pw


def _block_hashes(h: np.ndarray, pw: list[int], b: int) -> np.ndarray:
    # hash of ids[i:i+b] at index i, modulo 2**64 wraparound
    return h[b:] - h[:-b] * np.uint64(pw[b] & _MASK64)


# --- sequence tree access ---


def _walk_sequences(instrs: tuple, path: tuple = ()) -> Iterator[tuple[tuple, tuple]]:
    """Yield (path, sequence) for the top level and every nested body."""
    yield path, instrs
    for i, ins in enumerate(instrs):
        if isinstance(ins, (vm.Repeat, vm.Def)):
            yield from _walk_sequences(ins.body, path + (i,))


def _rebuild_with(instrs: tuple, path: tuple, new_seq: tuple) -> tuple:
    if not path:
        return tuple(new_seq)
    i, rest = path[0], path[1:]
    ins = instrs[i]
    if isinstance(ins, vm.Repeat):
        replaced = vm.Repeat(ins.count, _rebuild_with(ins.body, rest, new_seq))
    elif isinstance(ins, vm.Def):
        replaced = vm.Def(ins.name, _rebuild_with(ins.body, rest, new_seq))
    else:
        raise ValueError(f"path {path} does not address a body")
    return instrs[:i] + (replaced,) + instrs[i + 1:]


# --- pass: loop folding ---


def _best_fold(seq: tuple, hasher: _SeqHasher):
    """Best (block_len, reps, start, savings) fold of this sequence, or None.

    Prefers the longest repeated block, then the most repetitions, then
    the earliest start; only folds that strictly shrink the canonical
    text qualify.
    """
    n = len(seq)
    if n < 2:
        return None
    ids = hasher.ids_for(seq)
    h, pw = _prefix_hashes(ids)
    best = None  # key: (b, r, -i) maximized
    for b in range(1, n // 2 + 1):
        bh = _block_hashes(h, pw, b)
        eq = bh[: n - 2 * b + 1] == bh[b: n - b + 1]
        cand = np.nonzero(eq)[0]
        if cand.size == 0:
            continue
        dominated = bytearray(n)
        for i in map(int, cand):
            if dominated[i]:
                continue
            block = seq[i: i + b]
            r = 1
            j = i
            while j + 2 * b <= n and seq[j + b: j + 2 * b] == block:
                r += 1
                j += b
                if j < n:
                    dominated[j] = 1
            if r < 2:
                continue
            lb = _seq_len(block)
            savings = (r - 1) * (lb + 1) - 12 - len(str(r))
            if savings <= 0:
                continue
            key = (b, r, -i)
            if best is None or key > best[0]:
                best = (key, (b, r, i, savings))
    return best[1] if best else None


def _fold_loops(program: vm.Program) -> vm.Program:
    """Fold consecutive repetitions of instruction blocks into REPEAT
    nodes, everywhere in the tree, while each fold strictly shrinks the
    canonical text."""
    instrs = program.instructions
    hasher = _SeqHasher()
    while True:
        chosen = None  # (key, path, fold)
        for path, seq in _walk_sequences(instrs):
            fold = _best_fold(seq, hasher)
            if fold is None:
                continue
            b, r, i, savings = fold
            key = (b, r)
            if chosen is None or key > chosen[0]:
                chosen = (key, path, fold)
        if chosen is None:
            return vm.Program(instrs)
        _, path, (b, r, i, _) = chosen
        seq = dict(_walk_sequences(instrs))[path]
        folded = seq[:i] + (vm.Repeat(r, seq[i: i + b]),) + seq[i + b * r:]
        instrs = _rebuild_with(instrs, path, folded)


# --- pass: subroutine extraction ---


def _net_displacement(instrs) -> tuple[int, int, int]:
    dx = dy = dz = 0
    for ins in instrs:
        if isinstance(ins, vm.Move):
            if ins.axis == "X":
                dx += ins.n
            elif ins.axis == "Y":
                dy += ins.n
            else:
                dz += ins.n
        elif isinstance(ins, vm.Repeat):
            (a, b, c) = _net_displacement(ins.body)
            dx, dy, dz = dx + ins.count * a, dy + ins.count * b, dz + ins.count * c
        # Place/Fill/Call leave the cursor where it was; Def never
        # appears inside an extractable block
    return dx, dy, dz


def _next_name(used: set[str]) -> str:
    alphabet = "abcdefghijklmnopqrstuvwxyz"
    for ch in alphabet:
        if ch not in used:
            return ch
    k = 2
    while True:
        for combo in itertools.product(alphabet, repeat=k):
            name = "".join(combo)
            if name not in used:
                return name
        k += 1


def _repl_instructions(name: str, disp: tuple[int, int, int]) -> tuple:
    out: list[vm.Instruction] = [vm.Call(name)]
    for axis, d in zip("XYZ", disp):
        if d != 0:
            out.append(vm.Move(axis, d))
    return tuple(out)


def _best_extraction(instrs: tuple, hasher: _SeqHasher, name: str):
    """Best repeated block to hoist into a DEF, or None.

    Returns (block, occurrences, savings) where occurrences is a list of
    (path, start) chosen non-overlapping. A CALL plus compensating MOVE
    instructions replaces each occurrence, so blocks with nonzero net
    cursor displacement stay eligible.
    """
    seqs = list(_walk_sequences(instrs))
    ids: list[int] = []
    where: list[tuple[tuple, int] | None] = []
    seq_by_path = dict(seqs)
    for path, seq in seqs:
        if ids:
            ids.append(hasher.sentinel())
            where.append(None)
        ids.extend(hasher.ids_for(seq, unique_mask=lambda ins: isinstance(ins, vm.Def)))
        where.extend((path, k) for k in range(len(seq)))
    m = len(ids)
    if m < 2:
        return None
    h, pw = _prefix_hashes(ids)
    max_b = max((len(seq) for _, seq in seqs), default=0)
    best = None  # minimized key: (-savings, first_pos, b)
    for b in range(1, max_b + 1):
        if 2 * b > m:
            break
        bh = _block_hashes(h, pw, b)
        uniq, inv, counts = np.unique(bh, return_inverse=True, return_counts=True)
        if not (counts >= 2).any():
            continue
        repeated = counts[inv] >= 2
        pos = np.nonzero(repeated)[0]
        order = np.argsort(inv[pos], kind="stable")
        pos = pos[order]
        groups: dict[int, list[int]] = {}
        for p in map(int, pos):
            groups.setdefault(int(inv[p]), []).append(p)
        for plist in groups.values():
            plist.sort()
            first = plist[0]
            loc = where[first]
            if loc is None:
                continue
            block = seq_by_path[loc[0]][loc[1]: loc[1] + b]
            if len(block) != b or any(isinstance(x, vm.Def) for x in block):
                continue
            occ: list[tuple[tuple, int]] = []
            last_end = -1
            for p in plist:
                w = where[p]
                if w is None or p < last_end:
                    continue
                path2, k2 = w
                cand = seq_by_path[path2][k2: k2 + b]
                if cand != block:
                    continue
                occ.append((path2, k2))
                last_end = p + b
            if len(occ) < 2:
                continue
            lb = _seq_len(block)
            repl = _repl_instructions(name, _net_displacement(block))
            repl_len = _seq_len(repl)
            def_cost = 9 + len(name) + lb + 1
            savings = len(occ) * (lb - repl_len) - def_cost
            if savings <= 0:
                continue
            key = (-savings, first, b)
            if best is None or key < best[0]:
                best = (key, block, occ, savings)
    if best is None:
        return None
    return best[1], best[2], best[3]


def _contains_call(ins: vm.Instruction, name: str) -> bool:
    if isinstance(ins, vm.Call):
        return ins.name == name
    if isinstance(ins, (vm.Repeat, vm.Def)):
        return any(_contains_call(sub, name) for sub in ins.body)
    return False


def _apply_extraction(instrs: tuple, block: tuple, occ: list[tuple[tuple, int]],
                      name: str) -> tuple:
    b = len(block)
    repl = _repl_instructions(name, _net_displacement(block))
    by_path: dict[tuple, list[int]] = {}
    for path, k in occ:
        by_path.setdefault(path, []).append(k)
    # deepest paths first: editing a sequence shifts indices inside it,
    # so every route through it must already be resolved
    seq_by_path = dict(_walk_sequences(instrs))
    for path, starts in sorted(by_path.items(), reverse=True):
        seq = seq_by_path[path]
        for k in sorted(starts, reverse=True):
            seq = seq[:k] + repl + seq[k + b:]
        instrs = _rebuild_with(instrs, path, seq)
        seq_by_path = dict(_walk_sequences(instrs))

    # the DEF goes right before the first top-level node whose subtree
    # calls it; every name the block itself calls is defined earlier
    insert_at = len(instrs)
    for i, ins in enumerate(instrs):
        if _contains_call(ins, name):
            insert_at = i
            break
    return instrs[:insert_at] + (vm.Def(name, block),) + instrs[insert_at:]


def _extract_defs(program: vm.Program,
                  reserved_names: frozenset[str] = frozenset()) -> vm.Program:
    """Hoist repeated instruction blocks into DEF/CALL while each
    extraction strictly shrinks the canonical text.

    The savings estimate ignores occurrences nested inside other
    replaced spans (possible only for blocks holding repeat bodies that
    themselves repeat the block), so the realized length is re-measured
    and any non-shrinking step is rolled back, which also bounds the
    loop.
    """
    instrs = program.instructions
    length = _seq_len(instrs)
    hasher = _SeqHasher()
    while True:
        used = {ins.name for ins in instrs if isinstance(ins, vm.Def)}
        name = _next_name(used | reserved_names)
        found = _best_extraction(instrs, hasher, name)
        if found is None:
            return vm.Program(instrs)
        block, occ, _ = found
        candidate = _apply_extraction(instrs, block, occ, name)
        cand_len = _seq_len(candidate)
        if cand_len >= length:
            return vm.Program(instrs)
        instrs, length = candidate, cand_len


# --- the pipeline ---


def synthesize_min(s: VoxelStructure,
                   cell_limit: int = DEFAULT_CELL_LIMIT) -> ComplexityBound:
    """Best upper bound the compression pipeline can certify.

    Passes run in a fixed order (literal, cuboids, loop folding,
    subroutine extraction); each is kept only when it strictly shortens
    the canonical serialization, so the result never exceeds the literal
    program. The witness is re-executed before returning.
    """
    if len(s.occupied) > cell_limit:
        raise vm.BudgetExceeded(
            f"structure has {len(s.occupied)} cells, limit {cell_limit}"
        )
    best = literal_program(s)
    best_len = vm.program_length(best)
    method = "literal"
    for candidate_pass in (_cuboid_program, _fold_loops, _extract_defs):
        if candidate_pass is _cuboid_program:
            candidate = candidate_pass(s)
        else:
            candidate = candidate_pass(best)
        cand_len = vm.program_length(candidate)
        if cand_len < best_len:
            best, best_len, method = candidate, cand_len, "compressed"

    rebuilt = vm.execute(best, s.dims)
    if rebuilt != s:
        raise RuntimeError("synthesis produced a witness that does not rebuild its input")
    return ComplexityBound(program=best, length=best_len, method=method)


def relative_complexity(a: VoxelStructure, b: VoxelStructure) -> int:
    """Signed byte difference between the two synthesized bounds. Any
    fixed interpreter overhead shared by both witnesses cancels."""
    return synthesize_min(a).length - synthesize_min(b).length


# --- exhaustive enumeration at desk scale ---

_ENUM_PLACEMENT_BUDGET = 10_000


class _Enumerator:
    """DFS over canonical programs up to a byte budget, with incremental
    execution on an occupancy bitmask.

    Pruning never discards a program that could be the unique shortest
    (or lexicographically smallest among shortest) producer of some
    structure: every pruned form has a strictly shorter or lex-smaller
    equivalent that is still enumerated. Pruned forms are: adjacent
    same-axis moves, move runs out of X<Y<Z order, doubled PLACE,
    placements adding no new cell, zero-effect REPEAT/CALL nodes,
    programs ending in a dead MOVE, and DEFs called fewer than twice
    (inlining is always at least as short at these literal sizes).
    Subroutine names are canonical (a, b, ... in definition order).
    """

    def __init__(self, dims: tuple[int, int, int], max_len: int,
                 node_budget: int, target_mask: Optional[int]):
        self.nx, self.ny, self.nz = dims
        self.maxd = max(dims)
        self.max_len = max_len
        self.node_budget = node_budget
        self.target = target_mask
        self.nodes = 0
        self.table: dict[int, tuple[int, str]] = {}
        self._body_memo: dict = {}

        self.move_opts = []
        for ai, ax in enumerate("XYZ"):
            for n in [k for k in range(1, self.maxd)] + [-k for k in range(1, self.maxd)]:
                self.move_opts.append((ai, n, 7 + len(str(n))))
        self.fill_opts = []
        for dx in range(1, self.nx + 1):
            for dy in range(1, self.ny + 1):
                for dz in range(1, self.nz + 1):
                    cost = 7 + len(str(dx)) + len(str(dy)) + len(str(dz))
                    self.fill_opts.append((dx, dy, dz, cost))
        self.rep_counts = list(range(2, self.maxd + 1))
        self.call_scales = list(range(1, self.maxd + 1))

    # internal instruction encoding: tuples, cheaper than dataclasses here
    # ("P",) ("M",ai,n) ("F",dx,dy,dz) ("R",n,body) ("C",idx,scale) ("D",idx,body)

    def _tick(self):
        self.nodes += 1
        if self.nodes > self.node_budget:
            raise EnumerationBudgetExceeded(
                f"exhaustive search exceeded {self.node_budget} nodes"
            )

    def _bit(self, x, y, z) -> int:
        return 1 << (x + self.nx * (y + self.ny * z))

    def _fill_mask(self, cx, cy, cz, dx, dy, dz) -> Optional[int]:
        if cx < 0 or cy < 0 or cz < 0:
            return None
        if cx + dx > self.nx or cy + dy > self.ny or cz + dz > self.nz:
            return None
        m = 0
        for z in range(cz, cz + dz):
            for y in range(cy, cy + dy):
                base = self.nx * (y + self.ny * z)
                for x in range(cx, cx + dx):
                    m |= 1 << (x + base)
        return m

    def _tuple_len(self, ins) -> int:
        k = ins[0]
        if k == "P":
            return 5
        if k == "M":
            return 7 + len(str(ins[2]))
        if k == "F":
            return 7 + len(str(ins[1])) + len(str(ins[2])) + len(str(ins[3]))
        if k == "R":
            return 12 + len(str(ins[1])) + self._body_len(ins[2])
        if k == "C":
            base = 6  # "CALL " + 1-char name
            return base if ins[2] == 1 else base + 1 + len(str(ins[2]))
        raise AssertionError(ins)

    def _body_len(self, body) -> int:
        return sum(self._tuple_len(i) for i in body) + len(body) - 1

    def _bodies(self, budget: int, ndefs: int, trailing_move_ok: bool) -> list:
        """All nonempty instruction tuples with canonical length <= budget.

        Context-free: placement validity is judged later, when the
        enclosing REPEAT or CALL node executes at a concrete cursor.
        """
        key = (budget, ndefs, trailing_move_ok)
        hit = self._body_memo.get(key)
        if hit is not None:
            return hit
        out: list[tuple] = []

        def extend(seq: list, used: int, last):
            self._tick()
            sep = 1 if seq else 0
            room = budget - used - sep
            if room >= 5 and not (last and last[0] == "P"):
                seq.append(("P",))
                out.append(tuple(seq))
                extend(seq, used + sep + 5, ("P",))
                seq.pop()
            for ai, n, cost in self.move_opts:
                if cost > room:
                    continue
                if last and last[0] == "M" and ai <= last[1]:
                    continue
                ins = ("M", ai, n)
                seq.append(ins)
                if trailing_move_ok:
                    out.append(tuple(seq))
                extend(seq, used + sep + cost, ins)
                seq.pop()
            for dx, dy, dz, cost in self.fill_opts:
                if cost > room:
                    continue
                ins = ("F", dx, dy, dz)
                seq.append(ins)
                out.append(tuple(seq))
                extend(seq, used + sep + cost, ins)
                seq.pop()
            for cnt in self.rep_counts:
                overhead = 12 + len(str(cnt))
                if room < overhead + 5:
                    continue
                for body in self._bodies(room - overhead, ndefs, True):
                    ins = ("R", cnt, body)
                    cost = self._tuple_len(ins)
                    if cost > room:
                        continue
                    seq.append(ins)
                    out.append(tuple(seq))
                    extend(seq, used + sep + cost, ins)
                    seq.pop()
            for d in range(ndefs):
                for sc in self.call_scales:
                    ins = ("C", d, sc)
                    cost = self._tuple_len(ins)
                    if cost > room:
                        continue
                    seq.append(ins)
                    out.append(tuple(seq))
                    extend(seq, used + sep + cost, ins)
                    seq.pop()

        extend([], 0, None)
        self._body_memo[key] = out
        return out

    def _exec(self, ins, mask: int, cur, defs, scale: int, placed: int):
        """Apply one instruction; returns (mask, cur, placed) or None when
        a placement leaves the world or the budget runs out."""
        k = ins[0]
        if k == "P":
            x, y, z = cur
            if not (0 <= x < self.nx and 0 <= y < self.ny and 0 <= z < self.nz):
                return None
            placed += 1
            if placed > _ENUM_PLACEMENT_BUDGET:
                return None
            return mask | self._bit(x, y, z), cur, placed
        if k == "M":
            d = ins[2] * scale
            x, y, z = cur
            if ins[1] == 0:
                return mask, (x + d, y, z), placed
            if ins[1] == 1:
                return mask, (x, y + d, z), placed
            return mask, (x, y, z + d), placed
        if k == "F":
            dx, dy, dz = ins[1] * scale, ins[2] * scale, ins[3] * scale
            placed += dx * dy * dz
            if placed > _ENUM_PLACEMENT_BUDGET:
                return None
            fm = self._fill_mask(cur[0], cur[1], cur[2], dx, dy, dz)
            if fm is None:
                return None
            return mask | fm, cur, placed
        if k == "R":
            for _ in range(ins[1]):
                for sub in ins[2]:
                    r = self._exec(sub, mask, cur, defs, scale, placed)
                    if r is None:
                        return None
                    mask, cur, placed = r
            return mask, cur, placed
        if k == "C":
            inner = cur
            for sub in defs[ins[1]]:
                r = self._exec(sub, mask, inner, defs, scale * ins[2], placed)
                if r is None:
                    return None
                mask, inner, placed = r
            return mask, cur, placed
        raise AssertionError(ins)

    _NAMES = "abcdefghijklmnopqrstuvwxyz"

    def _render(self, ins, lines: list[str]):
        k = ins[0]
        if k == "P":
            lines.append("PLACE")
        elif k == "M":
            lines.append(f"MOVE {'XYZ'[ins[1]]} {ins[2]}")
        elif k == "F":
            lines.append(f"FILL {ins[1]} {ins[2]} {ins[3]}")
        elif k == "R":
            lines.append(f"REPEAT {ins[1]} {{")
            for sub in ins[2]:
                self._render(sub, lines)
            lines.append("}")
        elif k == "C":
            nm = self._NAMES[ins[1]]
            lines.append(f"CALL {nm}" if ins[2] == 1 else f"CALL {nm} {ins[2]}")
        elif k == "D":
            lines.append(f"DEF {self._NAMES[ins[1]]} {{")
            for sub in ins[2]:
                self._render(sub, lines)
            lines.append("}")
        else:
            raise AssertionError(ins)

    def _record(self, mask: int, used: int, seq: list, call_counts: list[int]):
        if self.target is not None and mask != self.target:
            return
        if any(c < 2 for c in call_counts):
            return
        prev = self.table.get(mask)
        if prev is not None and prev[0] < used:
            return
        lines: list[str] = []
        for ins in seq:
            self._render(ins, lines)
        text = "\n".join(lines)
        if prev is None or used < prev[0] or (used == prev[0] and text < prev[1]):
            self.table[mask] = (used, text)

    def run(self):
        self.table[0] = (0, "")
        if self.target == 0:
            return
        self._dfs([], 0, 0, (0, 0, 0), 0, [], [])

    def _dfs(self, seq: list, used: int, mask: int, cur, placed: int,
             defs: list, call_counts: list[int]):
        self._tick()
        sep = 1 if seq else 0
        room = self.max_len - used - sep
        target = self.target
        last = seq[-1] if seq else None

        def attach(ins, cost, m2, c2, p2):
            seq.append(ins)
            if ins[0] == "C":
                call_counts[ins[1]] += 1
            if ins[0] != "M":
                self._record(m2, used + sep + cost, seq, call_counts)
            self._dfs(seq, used + sep + cost, m2, c2, p2, defs, call_counts)
            if ins[0] == "C":
                call_counts[ins[1]] -= 1
            seq.pop()

        # PLACE
        if room >= 5 and not (last and last[0] == "P"):
            x, y, z = cur
            if 0 <= x < self.nx and 0 <= y < self.ny and 0 <= z < self.nz:
                b = self._bit(x, y, z)
                if not (mask & b) and (target is None or (target & b)):
                    attach(("P",), 5, mask | b, cur, placed + 1)

        # MOVE
        for ai, n, cost in self.move_opts:
            if cost > room:
                continue
            if last and last[0] == "M" and ai <= last[1]:
                continue
            x, y, z = cur
            c2 = (x + n, y, z) if ai == 0 else ((x, y + n, z) if ai == 1 else (x, y, z + n))
            attach(("M", ai, n), cost, mask, c2, placed)

        # FILL
        for dx, dy, dz, cost in self.fill_opts:
            if cost > room:
                continue
            fm = self._fill_mask(cur[0], cur[1], cur[2], dx, dy, dz)
            if fm is None or not (fm & ~mask):
                continue
            if target is not None and (fm & ~target):
                continue
            attach(("F", dx, dy, dz), cost, mask | fm, cur, placed + dx * dy * dz)

        # REPEAT
        for cnt in self.rep_counts:
            overhead = 12 + len(str(cnt))
            if room < overhead + 5:
                continue
            for body in self._bodies(room - overhead, len(defs), True):
                ins = ("R", cnt, body)
                cost = self._tuple_len(ins)
                if cost > room:
                    continue
                r = self._exec(ins, mask, cur, defs, 1, placed)
                if r is None:
                    continue
                m2, c2, p2 = r
                if m2 == mask and c2 == cur:
                    continue
                if target is not None and (m2 & ~target):
                    continue
                attach(ins, cost, m2, c2, p2)

        # DEF (top level, canonical 1-char names)
        if len(defs) < len(self._NAMES):
            overhead = 10  # "DEF x {" header, braces, separators
            if room >= overhead + 5:
                for body in self._bodies(room - overhead, len(defs), False):
                    cost = overhead + self._body_len(body)
                    if cost > room:
                        continue
                    ins = ("D", len(defs), body)
                    seq.append(ins)
                    defs.append(body)
                    call_counts.append(0)
                    self._dfs(seq, used + sep + cost, mask, cur, placed,
                              defs, call_counts)
                    call_counts.pop()
                    defs.pop()
                    seq.pop()

        # CALL
        for d in range(len(defs)):
            for sc in self.call_scales:
                ins = ("C", d, sc)
                cost = self._tuple_len(ins)
                if cost > room:
                    continue
                r = self._exec(ins, mask, cur, defs, 1, placed)
                if r is None:
                    continue
                m2, c2, p2 = r
                if m2 == mask:
                    continue
                if target is not None and (m2 & ~target):
                    continue
                attach(ins, cost, m2, c2, p2)


def _mask_of(s: VoxelStructure) -> int:
    nx, ny, _ = s.dims
    m = 0
    for (x, y, z) in s.occupied:
        m |= 1 << (x + nx * (y + ny * z))
    return m


def _cells_of(mask: int, dims: tuple[int, int, int]) -> frozenset[Cell]:
    nx, ny, nz = dims
    cells = set()
    i = 0
    while mask:
        if mask & 1:
            cells.add((i % nx, (i // nx) % ny, i // (nx * ny)))
        mask >>= 1
        i += 1
    return frozenset(cells)


def exhaustive_min(s: VoxelStructure, max_len: int,
                   node_budget: int = 50_000_000) -> Optional[ComplexityBound]:
    """True minimum over every canonical program of at most max_len bytes.

    Returns None when no program within the budget produces the
    structure; among equal-length witnesses the lexicographically
    smallest canonical text wins. Integer literals are bounded by the
    world dimensions, which loses no producible structure at this scale.
    Raises EnumerationBudgetExceeded when the search space outgrows
    node_budget.
    """
    enum = _Enumerator(s.dims, max_len, node_budget, _mask_of(s))
    enum.run()
    hit = enum.table.get(_mask_of(s))
    if hit is None:
        return None
    length, text = hit
    return ComplexityBound(program=vm.parse(text), length=length, method="exhaustive")


def exhaustive_table(dims: tuple[int, int, int], max_len: int,
                     node_budget: int = 50_000_000
                     ) -> dict[frozenset[Cell], ComplexityBound]:
    """One shared enumeration answering exhaustive_min for every
    structure producible within max_len bytes in this world."""
    enum = _Enumerator(dims, max_len, node_budget, None)
    enum.run()
    out = {}
    for mask, (length, text) in enum.table.items():
        out[_cells_of(mask, dims)] = ComplexityBound(
            program=vm.parse(text), length=length, method="exhaustive"
        )
    return out
