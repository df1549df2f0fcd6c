import json

import numpy as np
import pytest

from utq import cli
from utq.composition import OneParticleOperator
from utq.fock import SpAlgebraElement
from utq.fourier import FourierLoop, ModeSpec
from utq.siegel import SiegelPoint, random_symplectic, write_block_csv


def run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def strip_clock(obj):
    if isinstance(obj, dict):
        return {k: strip_clock(v) for k, v in obj.items() if k != "wall_clock_s"}
    if isinstance(obj, list):
        return [strip_clock(v) for v in obj]
    return obj


@pytest.fixture
def files(tmp_path):
    paths = {}
    loop = FourierLoop.from_modes(ModeSpec(4), {1: 1.0, 3: 0.5j}, real=True)
    paths["loop"] = tmp_path / "loop.json"
    paths["loop"].write_text(json.dumps(loop.to_json()))
    paths["mobius"] = tmp_path / "mobius.json"
    paths["mobius"].write_text(json.dumps({"kind": "mobius", "a": [0.3, 0.2], "angle": 0.5}))
    paths["zigzag"] = tmp_path / "zigzag.json"
    paths["zigzag"].write_text(json.dumps({"kind": "zigzag", "s": 2.0}))
    paths["bad"] = tmp_path / "bad.json"
    paths["bad"].write_text("{not json")
    return paths


def test_unknown_subcommand(capsys):
    code, out, err = run(capsys, "frobnicate")
    assert code == cli.EXIT_UNKNOWN and "invalid choice" in err
    with pytest.raises(cli.UnknownExperiment):
        cli.run("frobnicate")


def test_malformed_json(capsys, files):
    code, _, err = run(capsys, "map", "check-qs", "--map", str(files["bad"]))
    assert code == cli.EXIT_BAD_JSON and "malformed JSON" in err


def test_missing_file(capsys, tmp_path):
    code, _, err = run(capsys, "map", "check-qs", "--map", str(tmp_path / "nope.json"))
    assert code == cli.EXIT_MISSING and "file not found" in err


def test_negative_tolerance_rejected_before_computing(capsys, tmp_path):
    code, out, err = run(capsys, "fock", "ccr", "--tol", "-1")
    assert code == cli.EXIT_INVALID and "tolerance" in err and out == ""
    suite = {"experiments": [{"test": "fock ccr", "params": {"degree": 4}},
                             {"test": "loop norm", "params": {"tol": -1e-3}}]}
    (tmp_path / "s.json").write_text(json.dumps(suite))
    code, out, err = run(capsys, "suite", str(tmp_path / "s.json"))
    assert code == cli.EXIT_INVALID and out == ""


def test_unknown_parameter():
    with pytest.raises(cli.InvalidConfig):
        cli.run("fock ccr", {"colour": "blue"})


def test_empty_suite_passes(capsys, tmp_path):
    (tmp_path / "e.json").write_text(json.dumps({"experiments": []}))
    code, out, _ = run(capsys, "suite", str(tmp_path / "e.json"))
    rep = json.loads(out)
    assert code == 0 and rep["passed"] and rep["reports"] == []


def test_report_fields_and_determinism(capsys):
    code, out1, _ = run(capsys, "fock", "coherent", "--pairs", "3", "--seed", "7")
    _, out2, _ = run(capsys, "fock", "coherent", "--pairs", "3", "--seed", "7")
    r1, r2 = json.loads(out1), json.loads(out2)
    assert code == 0
    for key in ("test", "params", "measured", "expected", "defect", "tag", "passed", "wall_clock_s"):
        assert key in r1
    assert r1["params"]["seed"] == 7
    assert json.dumps(strip_clock(r1), sort_keys=True) == json.dumps(strip_clock(r2), sort_keys=True)


def test_loop_norm(capsys, files):
    code, out, _ = run(capsys, "loop", "norm", "--loop", str(files["loop"]), "--pairs", "10")
    rep = json.loads(out)
    assert code == 0 and rep["measured"]["half_norm"] == pytest.approx(np.sqrt(2 + 6 * 0.25))


def test_map_check_qs(capsys, files):
    code, out, _ = run(capsys, "map", "check-qs", "--map", str(files["zigzag"]), "--samples", "500")
    rep = json.loads(out)
    assert code == 0 and 0 < rep["measured"]["epsilon_hat"] < 1


def test_op_th_writes_matrix(capsys, files, tmp_path):
    out_dir = tmp_path / "th"
    code, out, _ = run(capsys, "op", "th", "--map", str(files["mobius"]), "--out", str(out_dir))
    assert code == 0
    T = OneParticleOperator.load(out_dir)
    assert T.spec == ModeSpec(64)
    assert (out_dir / "report.json").exists() and (out_dir / "summary.txt").exists()


def test_op_symplectic_mobius(capsys, files):
    code, out, _ = run(capsys, "op", "symplectic", "--map", str(files["mobius"]), "--modes", "32",
                       "--grid", "2048")
    rep = json.loads(out)
    assert code == 0 and set(rep["defect"]) >= {"mobius_b", "mobius_a_unitary", "norm_bound"}


@pytest.mark.parametrize("check", ["hilbert", "hsnorm", "rank", "kernel", "quasiclassical"])
def test_qdiff_checks(capsys, check):
    argv = ["qdiff", "--check", check]
    if check in ("hilbert", "kernel"):
        argv += ["--modes", "16", "--grid", "2048", "--band", "4"]
    code, out, _ = run(capsys, *argv)
    assert code == 0, out


def test_qdiff_rank_of_loop_file(capsys, files):
    code, out, _ = run(capsys, "qdiff", "--check", "rank", "--f", str(files["loop"]))
    rep = json.loads(out)
    assert code == 0 and rep["measured"]["rank"] == 6


def test_siegel_act_files(capsys, tmp_path):
    A = random_symplectic(3, seed=2)
    write_block_csv(tmp_path / "a.csv", A.a)
    write_block_csv(tmp_path / "b.csv", A.b)
    Z = SiegelPoint.random(3, np.random.default_rng(0), 0.4)
    (tmp_path / "z.json").write_text(json.dumps(Z.to_json()))
    code, out, _ = run(capsys, "siegel", "act", "--a", str(tmp_path / "a.csv"),
                       "--b", str(tmp_path / "b.csv"), "--z", str(tmp_path / "z.json"))
    rep = json.loads(out)
    assert code == 0 and SiegelPoint.from_json(rep["info"]["image"]).n == 3
    code, _, err = run(capsys, "siegel", "act", "--a", str(tmp_path / "a.csv"),
                       "--b", str(tmp_path / "missing.csv"), "--z", str(tmp_path / "z.json"))
    assert code == cli.EXIT_MISSING


def test_fock_file_inputs(capsys, tmp_path):
    rng = np.random.default_rng(3)
    Z = SiegelPoint.random(2, rng, 0.3)
    (tmp_path / "z.json").write_text(json.dumps(Z.to_json()))
    code, _, _ = run(capsys, "fock", "coherent", "--z", str(tmp_path / "z.json"), "--degree", "20")
    assert code == 0
    for name in ("x1", "x2"):
        (tmp_path / f"{name}.json").write_text(json.dumps(SpAlgebraElement.random(2, rng).to_json()))
    code, out, _ = run(capsys, "fock", "cocycle", "--x1", str(tmp_path / "x1.json"),
                       "--x2", str(tmp_path / "x2.json"), "--degree", "8")
    assert code == 0 and json.loads(out)["tag"]["cocycle"] == "THEORY"


def test_fock_dgamma_with_maps(capsys, files):
    code, out, _ = run(capsys, "fock", "dgamma", "--map", str(files["mobius"]),
                       "--map", str(files["zigzag"]), "--degree", "6", "--pairs", "3")
    rep = json.loads(out)
    assert code == 0 and len(rep["info"]["generators"]) == 2


def test_report_shale_zigzag_is_observational(capsys, files, tmp_path):
    code, out, _ = run(capsys, "report", "shale", "--map", str(files["zigzag"]),
                       "--modes", "8,16,32", "--grid", "1024", "--out", str(tmp_path / "sh"))
    rep = json.loads(out)
    assert code == 0 and rep["tag"]["hs_b_column"] == "OBSERVATIONAL"
    lines = (tmp_path / "sh" / "shale.csv").read_text().splitlines()
    assert lines[0] == "N,hs_b,diff" and len(lines) == 4
    code, _, _ = run(capsys, "report", "shale", "--map", str(files["zigzag"]), "--modes", "16,8")
    assert code == cli.EXIT_INVALID


def test_shipped_suite_validates():
    suite = cli.default_suite()
    assert len(suite["experiments"]) >= 14
    for e in suite["experiments"]:
        cli.validate(e["test"], e["params"])


def test_failing_check_sets_exit_code(capsys):
    # the PV quadrature is accurate to rounding, not to exactly zero
    code, out, _ = run(capsys, "qdiff", "--check", "hilbert", "--tol", "0")
    assert code == cli.EXIT_FAIL and not json.loads(out)["passed"]


def test_inline_json_string_accepted(capsys):
    code = cli.main(["map", "check-qs", "--map", '{"kind": "zigzag", "s": 2}', "--samples", "500"])
    assert code == 0
    report = json.loads(capsys.readouterr().out)
    assert 0 < report["measured"]["epsilon_hat"] < 1


def test_inline_json_string_malformed():
    assert cli.main(["map", "check-qs", "--map", '{"kind": zig']) == cli.EXIT_BAD_JSON
