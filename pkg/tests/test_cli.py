"""End-to-end command-line behavior: exit codes, files, determinism."""

import json

import numpy as np
import pytest

import gkslmap.cli as cli
from gkslmap.cli import main
from gkslmap.experiments import coherence_revival_kernel, dephasing_kernel, random_kernel
from gkslmap.kernel import TwoTimeOperatorFunction, save_drift_spec, save_kernel_spec
from gkslmap.linalg import SIGMA_X
from gkslmap.profiles import ConstantProfile
from gkslmap.serialize import canonical_dumps
from gkslmap.trajectory import MapTrajectory


def write_kernel(path, kernel):
    path.write_text(canonical_dumps(save_kernel_spec(kernel)) + "\n")
    return str(path)


def write_drift(path, mat):
    w = TwoTimeOperatorFunction.build(2, [(ConstantProfile(1.0), np.asarray(mat, complex))])
    path.write_text(canonical_dumps(save_drift_spec(w)) + "\n")
    return str(path)


@pytest.fixture()
def kernel_file(tmp_path):
    return write_kernel(tmp_path / "dephasing.json", dephasing_kernel(g=0.8))


def test_solve_writes_trajectory_and_csv(tmp_path, kernel_file):
    out = tmp_path / "run"
    code = main(["solve", "--kernel", kernel_file, "--T", "1.0", "--steps", "50",
                 "--out", str(out)])
    assert code == 0
    doc = json.loads((out / "trajectory.json").read_text())
    assert doc["kind"] == "map-trajectory"
    assert doc["family"] == "local-full"
    prov = doc["provenance"]
    assert prov["tool"] == "gkslmap" and len(prov["config_hash"]) == 16
    assert prov["config"]["family"] == "local-full"
    assert "out" not in prov["config"]
    traj = MapTrajectory.from_doc(doc)
    assert len(traj) == 51
    csv_lines = (out / "trajectory.csv").read_text().split("\n")
    assert csv_lines[0] == f"# gkslmap {prov['version']} config_hash={prov['config_hash']}"
    assert csv_lines[2] == "t,map_norm,trace_dev"


def test_solve_family_alias(tmp_path, kernel_file):
    out = tmp_path / "weak"
    code = main(["solve", "--kernel", kernel_file, "--T", "1.0", "--steps", "40",
                 "--family", "weak", "--out", str(out)])
    assert code == 0
    doc = json.loads((out / "trajectory.json").read_text())
    assert doc["family"] == "weak-nonlocal-full"
    assert doc["provenance"]["config"]["family"] == "weak-nonlocal-full"


def test_certify_clean_trajectory(tmp_path, kernel_file):
    out = tmp_path / "run"
    main(["solve", "--kernel", kernel_file, "--T", "1.0", "--steps", "50", "--out", str(out)])
    code = main(["certify", "--trajectory", str(out / "trajectory.json"), "--out", str(out)])
    assert code == 0
    report = json.loads((out / "cp_report.json").read_text())
    assert report["all_cp"] is True
    assert "witness" not in report
    assert (out / "cp_report.csv").exists()


def test_certify_divisibility_violation_exit_one(tmp_path):
    kernel = write_kernel(tmp_path / "revival.json", coherence_revival_kernel())
    out = tmp_path / "run"
    code = main(["solve", "--kernel", kernel, "--family", "nonlocal-full",
                 "--T", "2.0", "--steps", "160", "--out", str(out)])
    assert code == 0
    code = main(["certify", "--trajectory", str(out / "trajectory.json"),
                 "--divisibility", "--out", str(out)])
    assert code == 1
    report = json.loads((out / "cp_report.json").read_text())
    assert report["all_cp"] is True  # nodes stay CP; the intervals violate
    assert "witness" not in report
    w = report["divisibility_witness"]
    assert w["lambda_min"] < -1e-8
    assert w["t"][0] > 1.0  # revival stretch starts past the coherence zero


def test_certify_requires_trajectory(tmp_path, capsys):
    code = main(["certify", "--out", str(tmp_path)])
    assert code == 2
    err = json.loads(capsys.readouterr().err)
    assert err["error"]["type"] == "config"


def test_counterexample_finds_witness(tmp_path):
    drift = write_drift(tmp_path / "sx.json", SIGMA_X)
    out = tmp_path / "run"
    code = main(["counterexample", "--kernel", drift, "--T", "2.0", "--steps", "200",
                 "--out", str(out)])
    assert code == 1
    doc = json.loads((out / "witness.json").read_text())
    w = doc["witness"]
    assert w["measure_value"] < -1e-7
    assert w["choi_lambda_min"] < -1e-7
    assert len(w["psi"]) == 4 and len(w["psi"][0]) == 2


def test_counterexample_diagonal_drift_finds_nothing(tmp_path):
    drift = write_drift(tmp_path / "diag.json", -0.5 * np.eye(2))
    out = tmp_path / "run"
    code = main(["counterexample", "--kernel", drift, "--T", "2.0", "--steps", "100",
                 "--out", str(out)])
    assert code == 0
    assert json.loads((out / "witness.json").read_text())["witness"] is None


def test_gscan_cli_round(tmp_path):
    kernel = write_kernel(tmp_path / "k.json", random_kernel(101, dim=2))
    out = tmp_path / "run"
    code = main(["gscan", "--kernel", kernel, "--T", "1.0", "--steps", "80",
                 "--g-list", "0.05,0.1,0.2,0.4", "--out", str(out)])
    assert code == 0
    doc = json.loads((out / "gscan.json").read_text())
    assert doc["kind"] == "gscan-result"
    assert len(doc["distance"]) == 4
    assert (out / "gscan.csv").read_text().strip().split("\n")[-1].startswith("# slope=")


def test_gscan_bad_g_list_is_config_error(tmp_path, kernel_file, capsys):
    code = main(["gscan", "--kernel", kernel_file, "--g-list", "", "--out", str(tmp_path)])
    assert code == 2
    assert json.loads(capsys.readouterr().err)["error"]["type"] == "config"
    code = main(["gscan", "--kernel", kernel_file, "--g-list", "0.1,0.2,0.4",
                 "--out", str(tmp_path)])
    assert code == 2


def test_convolution_cli(tmp_path):
    kernel = write_kernel(tmp_path / "k.json", dephasing_kernel(g=0.2))
    out = tmp_path / "run"
    code = main(["convolution", "--kernel", kernel, "--T", "1.2", "--steps", "100",
                 "--out", str(out)])
    assert code == 0
    doc = json.loads((out / "convolution.json").read_text())
    assert doc["consistent"] is True and doc["n_kraus"] == 1
    assert (out / "convolution_full.csv").exists()


def test_convolution_rejects_general_kernel(tmp_path, capsys):
    from gkslmap.profiles import SeparableProfile, SingleVarFactor

    sep = SeparableProfile(SingleVarFactor("exp", rate=-0.5),
                           SingleVarFactor("gaussian", tau=1.0))
    fn = TwoTimeOperatorFunction.build(2, [(sep, SIGMA_X)])
    from gkslmap.kernel import GKSLKernel

    kernel = write_kernel(tmp_path / "k.json", GKSLKernel.build(2, jump_ops=(fn,)))
    code = main(["convolution", "--kernel", kernel, "--out", str(tmp_path)])
    assert code == 2
    assert "convolution" in json.loads(capsys.readouterr().err)["error"]["message"]


def test_validate_reports_kind(tmp_path, kernel_file, capsys):
    assert main(["validate", "--kernel", kernel_file]) == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary == {
        "valid": True, "kind": "kernel", "dim": 2, "coupling_g": 0.8,
        "jump_operators": 1, "convolution": True,
    }
    drift = write_drift(tmp_path / "w.json", SIGMA_X)
    assert main(["validate", "--kernel", drift]) == 0
    assert json.loads(capsys.readouterr().out)["kind"] == "drift"

    out = tmp_path / "run"
    main(["solve", "--kernel", kernel_file, "--T", "0.5", "--steps", "10", "--out", str(out)])
    capsys.readouterr()
    assert main(["validate", "--kernel", str(out / "trajectory.json")]) == 0
    assert json.loads(capsys.readouterr().out)["kind"] == "map-trajectory"


def test_validate_rejects_malformed(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"dim": 99}')
    assert main(["validate", "--kernel", str(bad)]) == 2
    assert json.loads(capsys.readouterr().err)["error"]["type"] == "config"


def test_missing_kernel_file_is_config_error(tmp_path, capsys):
    code = main(["solve", "--kernel", str(tmp_path / "nope.json"), "--out", str(tmp_path)])
    assert code == 2
    assert json.loads(capsys.readouterr().err)["error"]["type"] == "config"


def test_unknown_config_key_is_rejected(tmp_path, kernel_file, capsys):
    conf = tmp_path / "conf.json"
    conf.write_text(json.dumps({"kernel": kernel_file, "bogus": 1}))
    code = main(["solve", "--config", str(conf), "--out", str(tmp_path)])
    assert code == 2
    assert "bogus" in json.loads(capsys.readouterr().err)["error"]["message"]


def test_config_paths_resolve_against_config_dir(tmp_path):
    sub = tmp_path / "conf"
    sub.mkdir()
    write_kernel(sub / "k.json", dephasing_kernel())
    conf = sub / "run.json"
    conf.write_text(json.dumps({"kernel": "k.json", "T": 0.5, "steps": 20}))
    out = tmp_path / "run"
    assert main(["solve", "--config", str(conf), "--out", str(out)]) == 0
    assert (out / "trajectory.json").exists()


def test_bad_family_flag_exits_via_argparse(tmp_path, kernel_file):
    with pytest.raises(SystemExit) as exc:
        main(["solve", "--kernel", kernel_file, "--family", "sideways"])
    assert exc.value.code == 2


def test_horizon_violation_is_config_error(tmp_path, capsys):
    kernel = write_kernel(tmp_path / "short.json", coherence_revival_kernel(t_max=1.0))
    code = main(["solve", "--kernel", kernel, "--T", "2.0", "--steps", "40",
                 "--out", str(tmp_path)])
    assert code == 2
    assert "horizon" in json.loads(capsys.readouterr().err)["error"]["message"]


def test_solver_failure_exit_three(tmp_path, kernel_file, capsys, monkeypatch):
    def explode(*args, **kwargs):
        raise np.linalg.LinAlgError("did not converge")

    monkeypatch.setattr(cli, "solve_family", explode)
    code = main(["solve", "--kernel", kernel_file, "--T", "1.0", "--steps", "10",
                 "--out", str(tmp_path)])
    assert code == 3
    err = json.loads(capsys.readouterr().err)
    assert err["error"]["type"] == "solver"
    assert "converge" in err["error"]["message"]


def test_reruns_are_byte_identical(tmp_path, kernel_file):
    outs = [tmp_path / "a", tmp_path / "b"]
    for out in outs:
        code = main(["solve", "--kernel", kernel_file, "--T", "1.0", "--steps", "30",
                     "--out", str(out)])
        assert code == 0
    for name in ("trajectory.json", "trajectory.csv"):
        assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()
