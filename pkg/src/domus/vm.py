"""The construction machine: a small DSL and its deterministic interpreter.

A program is a sequence of placement and motion instructions executed by
a cursor walking an integer grid. Subroutines (DEF/CALL) have stamp
semantics: the cursor is saved before the body runs and restored after,
and a CALL may carry an integer scale that multiplies every MOVE
distance and FILL extent inside the body, composing multiplicatively
through nested calls. Programs have a bit-exact canonical text form;
the canonical byte length is the measurable size of a program.

Grammar (tokens are maximal runs of non-whitespace):

    program := { stmt }
    stmt    := "PLACE"
             | "FILL" int int int
             | "MOVE" ("X"|"Y"|"Z") int
             | "REPEAT" int "{" { stmt } "}"
             | "DEF" ident "{" { stmt } "}"
             | "CALL" ident [ int ]
    ident   := [a-z][a-z0-9_]*
    int     := "-"? decimal digits, no leading zeros

DEF is allowed at top level only, and a CALL may only name a DEF that
appears earlier in the program, so every program terminates.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Callable, Optional, Union

from .errors import DomusError
from .world import VoxelStructure

__all__ = [
    "Place",
    "Fill",
    "Move",
    "Repeat",
    "Def",
    "Call",
    "Instruction",
    "Program",
    "ExecutionLimits",
    "DslError",
    "ParseError",
    "UnknownName",
    "RecursiveCall",
    "BadLiteral",
    "ExecError",
    "OutOfBounds",
    "BudgetExceeded",
    "DepthExceeded",
    "parse",
    "serialize",
    "program_length",
    "execute",
]


class DslError(DomusError):
    """Base class for parse-time errors."""


class ParseError(DslError):
    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"{line}:{col}: {message}")
        self.line = line
        self.col = col


class UnknownName(DslError):
    """CALL names a subroutine that is not defined earlier."""


class RecursiveCall(DslError):
    """CALL inside the body of the DEF being defined."""


class BadLiteral(DslError):
    """Integer out of range for its instruction."""


class ExecError(DomusError):
    """Base class for execution-time errors."""


class OutOfBounds(ExecError):
    """A PLACE or FILL cell falls outside the world box."""


class BudgetExceeded(ExecError):
    """Placement count exceeded the execution budget."""


class DepthExceeded(ExecError):
    """CALL nesting exceeded the depth limit."""


@dataclass(frozen=True)
class Place:
    pass


@dataclass(frozen=True)
class Fill:
    dx: int
    dy: int
    dz: int


@dataclass(frozen=True)
class Move:
    axis: str  # "X" | "Y" | "Z"
    n: int


@dataclass(frozen=True)
class Repeat:
    count: int
    body: tuple["Instruction", ...]


@dataclass(frozen=True)
class Def:
    name: str
    body: tuple["Instruction", ...]


@dataclass(frozen=True)
class Call:
    name: str
    scale: int = 1


Instruction = Union[Place, Fill, Move, Repeat, Def, Call]


@dataclass(frozen=True)
class Program:
    instructions: tuple[Instruction, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "instructions", tuple(self.instructions))

    @property
    def defs(self) -> dict[str, tuple[Instruction, ...]]:
        """Name to body map, derived from the top-level DEF instructions."""
        return {ins.name: ins.body for ins in self.instructions if isinstance(ins, Def)}


@dataclass(frozen=True)
class ExecutionLimits:
    max_placements: int = 10_000_000
    max_call_depth: int = 32

    def __post_init__(self):
        if self.max_placements < 1 or self.max_call_depth < 1:
            raise ValueError("execution limits must be positive")


_IDENT_RE = re.compile(r"[a-z][a-z0-9_]*\Z")
_INT_RE = re.compile(r"-?(0|[1-9][0-9]*)\Z")


@dataclass
class _Token:
    text: str
    line: int
    col: int


def _tokenize(text: str) -> list[_Token]:
    toks = []
    for lineno, line in enumerate(text.split("\n"), start=1):
        for m in re.finditer(r"\S+", line):
            toks.append(_Token(m.group(0), lineno, m.start() + 1))
    return toks


class _Parser:
    def __init__(self, toks: list[_Token]):
        self.toks = toks
        self.pos = 0
        self.defined: dict[str, tuple[Instruction, ...]] = {}

    def _err(self, message: str) -> ParseError:
        if self.pos < len(self.toks):
            t = self.toks[self.pos]
            return ParseError(f"{message}, got {t.text!r}", t.line, t.col)
        last = self.toks[-1] if self.toks else _Token("", 1, 1)
        return ParseError(f"{message}, got end of input", last.line, last.col + len(last.text))

    def peek(self) -> Optional[str]:
        return self.toks[self.pos].text if self.pos < len(self.toks) else None

    def take(self) -> _Token:
        if self.pos >= len(self.toks):
            raise self._err("unexpected end of input")
        t = self.toks[self.pos]
        self.pos += 1
        return t

    def expect(self, text: str):
        if self.peek() != text:
            raise self._err(f"expected {text!r}")
        self.take()

    def take_int(self, what: str) -> int:
        if self.peek() is None or not _INT_RE.match(self.peek()):
            raise self._err(f"expected integer {what}")
        return int(self.take().text)

    def take_ident(self, what: str) -> str:
        if self.peek() is None or not _IDENT_RE.match(self.peek()):
            raise self._err(f"expected identifier {what}")
        return self.take().text

    def parse_program(self) -> Program:
        out = []
        while self.peek() is not None:
            out.append(self.parse_stmt(top_level=True, current_def=None))
        return Program(tuple(out))

    def parse_block(self, current_def: Optional[str]) -> tuple[Instruction, ...]:
        self.expect("{")
        body = []
        while self.peek() not in (None, "}"):
            body.append(self.parse_stmt(top_level=False, current_def=current_def))
        self.expect("}")
        return tuple(body)

    def parse_stmt(self, top_level: bool, current_def: Optional[str]) -> Instruction:
        head = self.peek()
        if head == "PLACE":
            self.take()
            return Place()
        if head == "FILL":
            self.take()
            dx = self.take_int("x extent")
            dy = self.take_int("y extent")
            dz = self.take_int("z extent")
            if dx < 1 or dy < 1 or dz < 1:
                raise BadLiteral(f"FILL extents must be >= 1, got {dx} {dy} {dz}")
            return Fill(dx, dy, dz)
        if head == "MOVE":
            self.take()
            if self.peek() not in ("X", "Y", "Z"):
                raise self._err("expected axis X, Y or Z")
            axis = self.take().text
            n = self.take_int("distance")
            if n == 0:
                raise BadLiteral("MOVE distance must be nonzero")
            return Move(axis, n)
        if head == "REPEAT":
            self.take()
            count = self.take_int("repeat count")
            if count < 2:
                raise BadLiteral(f"REPEAT count must be >= 2, got {count}")
            return Repeat(count, self.parse_block(current_def))
        if head == "DEF":
            tok = self.toks[self.pos]
            self.take()
            if not top_level:
                raise ParseError("DEF is only allowed at top level", tok.line, tok.col)
            name = self.take_ident("subroutine name")
            if name in self.defined:
                raise ParseError(f"duplicate definition of {name!r}", tok.line, tok.col)
            body = self.parse_block(current_def=name)
            self.defined[name] = body
            return Def(name, body)
        if head == "CALL":
            self.take()
            name = self.take_ident("subroutine name")
            scale = 1
            if self.peek() is not None and _INT_RE.match(self.peek()):
                scale = self.take_int("scale")
                if scale < 1:
                    raise BadLiteral(f"CALL scale must be >= 1, got {scale}")
            if name == current_def:
                raise RecursiveCall(f"{name!r} calls itself")
            if name not in self.defined:
                raise UnknownName(f"CALL {name!r} before its DEF")
            return Call(name, scale)
        raise self._err("expected an instruction")


def parse(text: str) -> Program:
    """Parse DSL source into a Program AST.

    Whitespace between tokens is free-form; the canonical layout from
    serialize() is one valid spelling among many.
    """
    return _Parser(_tokenize(text)).parse_program()


def _serialize_into(ins: Instruction, lines: list[str]):
    if isinstance(ins, Place):
        lines.append("PLACE")
    elif isinstance(ins, Fill):
        lines.append(f"FILL {ins.dx} {ins.dy} {ins.dz}")
    elif isinstance(ins, Move):
        lines.append(f"MOVE {ins.axis} {ins.n}")
    elif isinstance(ins, Repeat):
        lines.append(f"REPEAT {ins.count} {{")
        for sub in ins.body:
            _serialize_into(sub, lines)
        lines.append("}")
    elif isinstance(ins, Def):
        lines.append(f"DEF {ins.name} {{")
        for sub in ins.body:
            _serialize_into(sub, lines)
        lines.append("}")
    elif isinstance(ins, Call):
        lines.append(f"CALL {ins.name}" if ins.scale == 1 else f"CALL {ins.name} {ins.scale}")
    else:
        raise TypeError(f"not an instruction: {ins!r}")


def serialize(program: Program) -> str:
    """Canonical text: one instruction per line, single spaces, single
    LF separators, block headers ending in "{", "}" on its own line, no
    trailing newline, and CALL with scale 1 written without the scale."""
    lines: list[str] = []
    for ins in program.instructions:
        _serialize_into(ins, lines)
    return "\n".join(lines)


def program_length(program: Program) -> int:
    """Byte length of the canonical serialization (the grammar is ASCII)."""
    return len(serialize(program))


JitterFn = Callable[[], Optional[tuple[int, int, int]]]


class _Executor:
    def __init__(self, dims: tuple[int, int, int], limits: ExecutionLimits,
                 jitter: Optional[JitterFn]):
        self.nx, self.ny, self.nz = dims
        self.limits = limits
        self.jitter = jitter
        self.cells: set[tuple[int, int, int]] = set()
        self.placements = 0

    def _charge(self, n: int):
        self.placements += n
        if self.placements > self.limits.max_placements:
            raise BudgetExceeded(
                f"more than {self.limits.max_placements} placements"
            )

    def _in_bounds(self, x: int, y: int, z: int) -> bool:
        return 0 <= x < self.nx and 0 <= y < self.ny and 0 <= z < self.nz

    def _anchor(self, cur: tuple[int, int, int]) -> tuple[int, int, int]:
        if self.jitter is not None:
            off = self.jitter()
            if off is not None:
                return (cur[0] + off[0], cur[1] + off[1], cur[2] + off[2])
        return cur

    def _place(self, cur: tuple[int, int, int]):
        self._charge(1)
        x, y, z = self._anchor(cur)
        if not self._in_bounds(x, y, z):
            if self.jitter is not None:
                return  # human builders drop placements that leave the site
            raise OutOfBounds(f"PLACE at {(x, y, z)} outside dims {(self.nx, self.ny, self.nz)}")
        self.cells.add((x, y, z))

    def _fill(self, cur: tuple[int, int, int], dx: int, dy: int, dz: int):
        self._charge(dx * dy * dz)
        x0, y0, z0 = self._anchor(cur)
        if self.jitter is None:
            if not (self._in_bounds(x0, y0, z0)
                    and self._in_bounds(x0 + dx - 1, y0 + dy - 1, z0 + dz - 1)):
                raise OutOfBounds(
                    f"FILL {(dx, dy, dz)} at {(x0, y0, z0)} outside dims "
                    f"{(self.nx, self.ny, self.nz)}"
                )
        for z in range(z0, z0 + dz):
            for y in range(y0, y0 + dy):
                for x in range(x0, x0 + dx):
                    if self.jitter is not None and not self._in_bounds(x, y, z):
                        continue
                    self.cells.add((x, y, z))

    def run(self, body: tuple[Instruction, ...], cur: tuple[int, int, int],
            scale: int, depth: int,
            env: dict[str, tuple[Instruction, ...]],
            top: bool = False) -> tuple[int, int, int]:
        for ins in body:
            if isinstance(ins, Place):
                self._place(cur)
            elif isinstance(ins, Fill):
                self._fill(cur, ins.dx * scale, ins.dy * scale, ins.dz * scale)
            elif isinstance(ins, Move):
                d = ins.n * scale
                if ins.axis == "X":
                    cur = (cur[0] + d, cur[1], cur[2])
                elif ins.axis == "Y":
                    cur = (cur[0], cur[1] + d, cur[2])
                else:
                    cur = (cur[0], cur[1], cur[2] + d)
            elif isinstance(ins, Repeat):
                for _ in range(ins.count):
                    cur = self.run(ins.body, cur, scale, depth, env)
            elif isinstance(ins, Def):
                if not top:
                    raise DslError("DEF is only allowed at top level")
                env[ins.name] = ins.body
            elif isinstance(ins, Call):
                if ins.name not in env:
                    raise UnknownName(f"CALL {ins.name!r} before its DEF")
                if depth + 1 > self.limits.max_call_depth:
                    raise DepthExceeded(
                        f"call depth exceeds {self.limits.max_call_depth}"
                    )
                # stamp semantics: body runs at the call site, cursor restored
                self.run(env[ins.name], cur, scale * ins.scale, depth + 1, env)
            else:
                raise TypeError(f"not an instruction: {ins!r}")
        return cur


def execute(program: Program, dims: tuple[int, int, int],
            limits: ExecutionLimits | None = None,
            jitter: Optional[JitterFn] = None) -> VoxelStructure:
    """Run a program on an empty world and return the built structure.

    Deterministic for jitter=None: the cursor starts at (0, 0, 0), may
    wander outside the box freely, and any placement outside the box
    aborts with OutOfBounds. The jitter hook exists for the randomized
    builder model: when set, it is consulted once per PLACE/FILL, may
    displace the placement anchor, and out-of-bounds cells are silently
    skipped instead of raising.
    """
    if limits is None:
        limits = ExecutionLimits()
    ex = _Executor(dims, limits, jitter)
    ex.run(program.instructions, (0, 0, 0), 1, 0, {}, top=True)
    return VoxelStructure(dims, frozenset(ex.cells))
