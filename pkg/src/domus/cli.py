"""Command-line entry point.

Subcommands: build, render, complexity, beauty, natural, optimize,
attack. Reports are deterministic JSON (or plain text with
--format text) so that pipelines diff cleanly. Exit codes: 0 success,
1 negative domain verdict (a structure judged Artificial), 2 usage
error, 3 execution or analysis error. DOMUS_MAX_PLACEMENTS overrides
the placement budget.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import aesthetics, designer, fleet, naturalness, synthesis, vm
from .errors import DomusError
from .world import ConstraintSet, VoxelStructure, load_constraints

__all__ = ["run", "render", "main"]


def _limits() -> vm.ExecutionLimits:
    env = os.environ.get("DOMUS_MAX_PLACEMENTS")
    if env:
        try:
            return vm.ExecutionLimits(max_placements=int(env))
        except ValueError as exc:
            raise DomusError(f"bad DOMUS_MAX_PLACEMENTS value {env!r}") from exc
    return vm.ExecutionLimits()


def _read(path: str) -> str:
    p = Path(path)
    if not p.exists():
        raise DomusError(f"no such file: {path}")
    return p.read_text(encoding="utf-8")


def _load_structure(path: str, dims: tuple[int, int, int]) -> VoxelStructure:
    """A .cvm file is built at the given dims; anything else is read as
    the layered text format."""
    text = _read(path)
    if path.endswith(".cvm"):
        return vm.execute(vm.parse(text), dims, _limits())
    return VoxelStructure.from_layer_text(text)


def render(s: VoxelStructure) -> str:
    """Layered text, exactly as the structure file format."""
    return s.to_layer_text()


def _emit(args, payload: dict, text_lines: list[str]):
    if args.format == "json":
        out = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    else:
        out = "\n".join(text_lines) + "\n"
    if getattr(args, "out", None):
        Path(args.out).write_text(out, encoding="utf-8")
    else:
        sys.stdout.write(out)


def _cmd_build(args) -> int:
    program = vm.parse(_read(args.file))
    s = vm.execute(program, tuple(args.dims), _limits())
    text = render(s) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


def _cmd_render(args) -> int:
    s = _load_structure(args.file, tuple(args.dims))
    sys.stdout.write(render(s) + "\n")
    return 0


def _cmd_complexity(args) -> int:
    s = _load_structure(args.file, tuple(args.dims))
    bound = synthesis.synthesize_min(s)
    payload = {
        "length": bound.length,
        "method": bound.method,
        "program_text": vm.serialize(bound.program),
        "cells": len(s.occupied),
    }
    _emit(args, payload, [
        f"length: {bound.length}",
        f"method: {bound.method}",
        f"cells: {len(s.occupied)}",
        "program:",
        vm.serialize(bound.program),
    ])
    return 0


def _cmd_beauty(args) -> int:
    s = _load_structure(args.file, tuple(args.dims))
    dictionary = aesthetics.load_patterns(_read(args.dict))
    score = aesthetics.beauty_score(s, dictionary)
    payload = {
        "D": score.D,
        "N": score.N,
        "r": score.r,
        "score": score.score,
        "placements": [
            {"pattern": pl.pattern, "anchor": list(pl.anchor)}
            for pl in score.cover.placements
        ],
        "residual_cells": [list(c) for c in sorted(score.cover.residual)],
    }
    _emit(args, payload, [
        f"D: {score.D}",
        f"N: {score.N}",
        f"r: {score.r}",
        f"score: {score.score}",
        f"placements: {len(score.cover.placements)}",
        f"residual cells: {len(score.cover.residual)}",
    ])
    return 0


def _cmd_natural(args) -> int:
    s = _load_structure(args.file, tuple(args.dims))
    rep = naturalness.naturalness_report(s, threshold=args.threshold)
    payload = {
        "straightness": rep.straightness,
        "planarity": rep.planarity,
        "symmetry": rep.symmetry,
        "fractal_dimension": rep.fractal_dimension,
        "fit_r2": rep.fit_r2,
        "regularity_index": rep.regularity_index,
        "naturalness": rep.naturalness,
        "label": rep.label,
    }
    _emit(args, payload, [f"{k}: {v}" for k, v in payload.items()])
    return 0 if rep.label == "Natural" else 1


def _cmd_optimize(args) -> int:
    dictionary = aesthetics.load_patterns(_read(args.dict))
    cs: ConstraintSet = load_constraints(_read(args.constraints))
    params = designer.SearchParams(
        seed=args.seed,
        iterations=args.iters,
        initial_temperature=args.temperature,
        cooling=args.cooling,
        dims=tuple(args.dims),
        max_program_bytes=args.max_bytes,
        islands=args.islands,
    )
    best, trace = designer.optimize(dictionary, cs, params, workers=args.workers)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "best.cvm").write_text(vm.serialize(best) + "\n", encoding="utf-8")
    built = vm.execute(best, tuple(args.dims), _limits())
    (out_dir / "best.vox.txt").write_text(render(built) + "\n", encoding="utf-8")
    (out_dir / "trace.csv").write_text(trace.to_csv(), encoding="utf-8")
    final = designer.objective(best, dictionary, cs, tuple(args.dims))
    payload = {
        "objective": final,
        "iterations": args.iters,
        "program_bytes": vm.program_length(best),
        "out_dir": str(out_dir),
    }
    _emit(args, payload, [f"objective: {final}", f"wrote {out_dir}/best.cvm"])
    return 0


def _cmd_attack(args) -> int:
    program = vm.parse(_read(args.file))
    dims = tuple(args.dims)
    prototype = vm.execute(program, dims, _limits())
    atk = fleet.find_attack(prototype, args.k)
    if args.builder == "robot":
        model: fleet.BuilderModel = fleet.RobotBuilder()
    else:
        model = fleet.HumanBuilder(jitter_prob=args.p, seed=args.seed)
    members = fleet.build_fleet(program, args.fleet, model, dims, _limits())
    report = fleet.transfer_rate(atk, members, collapse_threshold=args.threshold)
    payload = {
        "attack_cells": [list(c) for c in sorted(atk.removed_cells)],
        "k": atk.k,
        "prototype_collapse": atk.collapse_fraction,
        "n": report.n,
        "distinct_structures": report.distinct_structures,
        "transfer_rate": report.transfer_rate,
    }
    _emit(args, payload, [
        f"attack: {sorted(atk.removed_cells)}",
        f"prototype collapse: {atk.collapse_fraction}",
        f"fleet: {report.n} members, {report.distinct_structures} distinct",
        f"transfer rate: {report.transfer_rate}",
    ])
    return 0


def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--dims", type=int, nargs=3, default=[64, 64, 64],
                        metavar=("NX", "NY", "NZ"), help="world size (default 64 64 64)")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", "-o", default=None, help="write output to this file")
    common.add_argument("--format", choices=("json", "text"), default="json")

    p = argparse.ArgumentParser(prog="domus",
                                description="construction VM and analysis toolkit")
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("build", parents=[common], help="run a .cvm program")
    sp.add_argument("file")
    sp.set_defaults(fn=_cmd_build)

    sp = sub.add_parser("render", parents=[common], help="print a structure as layered text")
    sp.add_argument("file")
    sp.set_defaults(fn=_cmd_render)

    sp = sub.add_parser("complexity", parents=[common], help="shortest-program bound")
    sp.add_argument("file")
    sp.set_defaults(fn=_cmd_complexity)

    sp = sub.add_parser("beauty", parents=[common], help="pattern-dictionary beauty score")
    sp.add_argument("file")
    sp.add_argument("--dict", required=True, help="pattern dictionary (.pat)")
    sp.set_defaults(fn=_cmd_beauty)

    sp = sub.add_parser("natural", parents=[common], help="regularity and fractal report")
    sp.add_argument("file")
    sp.add_argument("--threshold", type=float, default=0.5)
    sp.set_defaults(fn=_cmd_natural)

    sp = sub.add_parser("optimize", parents=[common], help="anneal a design")
    sp.add_argument("--dict", required=True)
    sp.add_argument("--constraints", required=True)
    sp.add_argument("--iters", type=int, default=1000)
    sp.add_argument("--temperature", type=float, default=8.0)
    sp.add_argument("--cooling", type=float, default=0.999)
    sp.add_argument("--max-bytes", type=int, default=4096)
    sp.add_argument("--islands", type=int, default=1)
    sp.add_argument("--workers", type=int, default=1)
    sp.add_argument("--out-dir", default="design_out")
    sp.set_defaults(fn=_cmd_optimize)

    sp = sub.add_parser("attack", parents=[common], help="fleet attack transfer")
    sp.add_argument("file", help="program (.cvm)")
    sp.add_argument("--fleet", type=int, default=50)
    sp.add_argument("--builder", choices=("robot", "human"), default="robot")
    sp.add_argument("--p", type=float, default=0.2, help="human jitter probability")
    sp.add_argument("--k", type=int, default=2, help="removal budget")
    sp.add_argument("--threshold", type=float, default=0.5)
    sp.set_defaults(fn=_cmd_attack)

    return p


def run(argv: list[str]) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code else 0
    try:
        return args.fn(args)
    except DomusError as exc:
        print(f"domus: error: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"domus: error: {exc}", file=sys.stderr)
        return 3


def main():
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
