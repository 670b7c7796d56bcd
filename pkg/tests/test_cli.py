import json

from domus import cli, vm
from domus.world import VoxelStructure

from conftest import CORPUS


def run(capsys, *argv):
    code = cli.run([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def test_build_row3(tmp_path, capsys):
    out_file = tmp_path / "row.vox.txt"
    code, _, _ = run(capsys, "build", CORPUS / "row3.cvm", "--dims", 4, 1, 1,
                     "-o", out_file)
    assert code == 0
    assert out_file.read_text() == "DIMS 4 1 1\nLAYER 0\n###.\n"


def test_build_missing_file(capsys):
    code, _, err = run(capsys, "build", "missing.cvm")
    assert code == 3
    assert "missing.cvm" in err


def test_build_bad_program(tmp_path, capsys):
    bad = tmp_path / "bad.cvm"
    bad.write_text("MOVE X 0\n")
    code, _, err = run(capsys, "build", bad)
    assert code == 3 and "MOVE" in err


def test_usage_error_is_exit_2(capsys):
    assert cli.run(["no-such-command"]) == 2
    assert cli.run([]) == 2


def test_render_examples(capsys):
    assert cli.render(VoxelStructure((1, 1, 1))) == "DIMS 1 1 1\nLAYER 0\n."
    assert cli.render(VoxelStructure((1, 1, 1), {(0, 0, 0)})) == "DIMS 1 1 1\nLAYER 0\n#"
    assert cli.render(VoxelStructure((2, 1, 1), {(0, 0, 0), (1, 0, 0)})) == "DIMS 2 1 1\nLAYER 0\n##"


def test_complexity_report(tmp_path, capsys):
    out_file = tmp_path / "row.vox.txt"
    run(capsys, "build", CORPUS / "row3.cvm", "--dims", 4, 1, 1, "-o", out_file)
    code, out, _ = run(capsys, "complexity", out_file)
    assert code == 0
    report = json.loads(out)
    assert report["length"] == 10
    assert report["cells"] == 3
    assert vm.execute(vm.parse(report["program_text"]), (4, 1, 1)).occupied == {
        (0, 0, 0), (1, 0, 0), (2, 0, 0)}


def test_beauty_report(tmp_path, capsys):
    out_file = tmp_path / "slab.vox.txt"
    run(capsys, "build", CORPUS / "slab4.cvm", "--dims", 4, 4, 1, "-o", out_file)
    code, out, _ = run(capsys, "beauty", out_file, "--dict", CORPUS / "brick.pat")
    assert code == 0
    report = json.loads(out)
    assert report["score"] == report["D"] * report["N"] + report["r"]
    assert report["residual_cells"] == []


def test_natural_exit_codes(capsys):
    code, out, _ = run(capsys, "natural", CORPUS / "slab4.cvm", "--dims", 8, 8, 8)
    assert code == 1  # a plain slab reads as artificial
    assert json.loads(out)["label"] == "Artificial"


def test_natural_small_structure_has_null_dimension(capsys):
    code, out, _ = run(capsys, "natural", CORPUS / "row3.cvm", "--dims", 4, 1, 1)
    report = json.loads(out)
    assert report["fractal_dimension"] is None
    assert code in (0, 1)


def test_attack_report(capsys):
    code, out, _ = run(capsys, "attack", CORPUS / "bridge.cvm",
                       "--fleet", 50, "--builder", "human", "--p", 0.2,
                       "--k", 2, "--seed", 1, "--dims", 8, 1, 8)
    assert code == 0
    report = json.loads(out)
    assert report["transfer_rate"] < 1.0
    assert report["distinct_structures"] > 1
    assert report["prototype_collapse"] >= 0.5


def test_optimize_writes_artifacts(tmp_path, capsys):
    out_dir = tmp_path / "design"
    code, out, _ = run(capsys, "optimize",
                       "--dict", CORPUS / "brick.pat",
                       "--constraints", CORPUS / "constraints.json",
                       "--dims", 8, 8, 8, "--seed", 7, "--iters", 50,
                       "--out-dir", out_dir)
    assert code == 0
    assert (out_dir / "best.cvm").exists()
    assert (out_dir / "best.vox.txt").exists()
    trace = (out_dir / "trace.csv").read_text().splitlines()
    assert trace[0] == "iter,objective,accepted,best"
    assert len(trace) == 51
    built = VoxelStructure.from_layer_text((out_dir / "best.vox.txt").read_text().rstrip("\n"))
    rebuilt = vm.execute(vm.parse((out_dir / "best.cvm").read_text()), (8, 8, 8))
    assert built == rebuilt


def test_reports_are_byte_identical_across_runs(tmp_path, capsys):
    args = ["natural", str(CORPUS / "sierpinski2.cvm"), "--dims", "9", "9", "1"]
    cli.run(args)
    first = capsys.readouterr().out
    cli.run(args)
    second = capsys.readouterr().out
    assert first == second


def test_corpus_builds_at_documented_dims(capsys):
    # sierpinski4 spans 81 cells, wider than the default 64-cell world
    sizes = {
        "row3.cvm": (64, 64, 64),
        "slab4.cvm": (64, 64, 64),
        "pillar.cvm": (64, 64, 64),
        "bridge.cvm": (64, 64, 64),
        "sierpinski2.cvm": (64, 64, 64),
        "sierpinski3.cvm": (64, 64, 64),
        "sierpinski4.cvm": (81, 81, 1),
    }
    for name, dims in sizes.items():
        code, _, err = run(capsys, "build", CORPUS / name,
                           "--dims", *dims)
        assert code == 0, (name, err)


def test_env_placement_budget(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv("DOMUS_MAX_PLACEMENTS", "2")
    code, _, err = run(capsys, "build", CORPUS / "slab4.cvm", "--dims", 4, 4, 1)
    assert code == 3
    assert "placements" in err
