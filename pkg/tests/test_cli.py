import json

import numpy as np
import pytest

from parstab.cli import csv_header, load_config, main, read_path_csv, ConfigError
from parstab.models import trolley_coordinates, world_to_z


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr().out
    return code, out


def test_simulate_schema_and_first_row(tmp_path, capsys):
    prefix = tmp_path / "p"
    code, out = run(capsys, "simulate", "--model", "pendulum", "--seed", "42", "--t-final", "0.5", "--out", str(prefix))
    assert code == 0
    files = json.loads(out)["files"]
    header, data = read_path_csv(files[0])
    assert header == ["t", "x1", "x2", "x3", "x4", "u1", "V", "branch"]
    assert data.shape[1] == 1 + 4 + 1 + 2
    assert np.all(np.diff(data[:, 0]) > 0)
    np.testing.assert_array_equal(data[0, 1:5], [0.1, 0.0, 0.1, 0.0])
    assert set(np.unique(data[:, -1])) <= {0, 1, 2}


def test_csv_round_trip_is_exact(tmp_path, capsys):
    from parstab.integrate import IntegratorConfig, simulate_ensemble
    from parstab.models import build_model
    from parstab.sontag import SontagController

    prefix = tmp_path / "t"
    code, _ = run(capsys, "simulate", "--model", "trolley", "--t-final", "0.3", "--out", str(prefix))
    assert code == 0
    _, data = read_path_csv(f"{prefix}_path0000.csv")
    m = build_model("trolley")
    ref = simulate_ensemble(
        m.system, SontagController(m.system, m.clf), m.default_xi, IntegratorConfig(t_final=0.3), [0]
    )[0]
    np.testing.assert_array_equal(data[:, 1:6], ref.states)
    np.testing.assert_array_equal(data[:, 6:8], ref.controls)


def test_world_frame_columns(tmp_path, capsys):
    prefix = tmp_path / "w"
    code, _ = run(
        capsys, "simulate", "--model", "trolley", "--t-final", "0.5", "--world-frame", "--out", str(prefix)
    )
    assert code == 0
    header, data = read_path_csv(f"{prefix}_path0000.csv")
    assert header == csv_header(5, 2, world_frame=True)
    z, world = data[:, 1:6], data[:, 10:15]
    np.testing.assert_array_equal(world, trolley_coordinates(z))
    np.testing.assert_allclose(world_to_z(world), z, atol=1e-14)


def test_all_paths_blowing_up_exit_3_keeps_files(tmp_path, capsys):
    prefix = tmp_path / "b"
    code, out = run(capsys, "simulate", "--model", "pendulum", "--paths", "2", "--out", str(prefix))
    assert code == 3
    info = json.loads(out)
    assert info["termination"] == ["BLOWUP", "BLOWUP"]
    assert all((tmp_path / f"b_path000{i}.csv").exists() for i in range(2))


@pytest.mark.parametrize(
    "args",
    [
        ("--model", "pendulum", "--seed", "42", "--paths", "3"),
        ("--model", "trolley", "--seed", "7", "--paths", "3", "--t-final", "2", "--world-frame"),
    ],
)
def test_simulate_is_byte_identical(tmp_path, capsys, monkeypatch, args):
    run(capsys, "simulate", *args, "--out", str(tmp_path / "a"))
    monkeypatch.setenv("PARSTAB_THREADS", "3")
    run(capsys, "simulate", *args, "--out", str(tmp_path / "b"))
    for i in range(3):
        a = (tmp_path / f"a_path000{i}.csv").read_bytes()
        b = (tmp_path / f"b_path000{i}.csv").read_bytes()
        assert a == b


def test_config_file_and_flag_precedence(tmp_path):
    cfg_file = tmp_path / "c.json"
    cfg_file.write_text(json.dumps({"model": "trolley", "dt": 0.01, "paths": 4, "params": {"lam": 0.2}}))
    cfg = load_config(str(cfg_file), {"dt": 0.002, "paths": None})
    assert cfg.model == "trolley" and cfg.paths == 4 and cfg.dt == 0.002
    assert cfg.params == {"lam": 0.2}


@pytest.mark.parametrize(
    "payload",
    ['{"bogus": 1}', "[1, 2]", "{not json", '{"model": "cartpole"}', '{"paths": 0}', '{"dt": -1}'],
)
def test_bad_config_exit_2(tmp_path, capsys, payload):
    f = tmp_path / "bad.json"
    f.write_text(payload)
    code, _ = run(capsys, "simulate", "--config", str(f))
    assert code == 2


def test_usage_errors(capsys):
    assert run(capsys, "simulate", "--model", "pendulum", "--world-frame")[0] == 2
    assert run(capsys, "simulate", "--param", "nope=1")[0] == 2
    assert run(capsys, "verify", "--samples", "0")[0] == 2
    with pytest.raises(SystemExit) as err:
        main(["simulate", "--model", "cartpole"])
    assert err.value.code == 2
    with pytest.raises(ConfigError):
        load_config(None, {"xi": None, "samples": -3})


def test_verify_pendulum_passes(capsys):
    code, out = run(capsys, "verify", "--model", "pendulum", "--samples", "5000")
    report = json.loads(out)
    assert code == 0 and report["passed"]
    assert set(report["checks"]) == {
        "check_sclf", "dissipation_scan", "branch_boundary", "piecewise_identity", "derivatives", "small_control"
    }


def test_verify_indefinite_form_exit_1(capsys):
    code, out = run(capsys, "verify", "--param", "k1=2", "--param", "k2=-0.5")
    report = json.loads(out)
    assert code == 1 and report["failed"] == ["IndefiniteClf"]


def test_verify_trolley_names_failing_check(capsys):
    code, out = run(capsys, "verify", "--model", "trolley", "--samples", "2000")
    report = json.loads(out)
    assert code == 1
    assert report["failed"] == ["check_sclf"]
    assert report["checks"]["check_sclf"]["lower_violations"] > 0


def test_estimate_schema(tmp_path, capsys):
    prefix = tmp_path / "e"
    code, out = run(capsys, "estimate", "--model", "pendulum", "--paths", "200", "--eps", "1.0", "--out", str(prefix))
    # every pendulum path escapes in the spring coordinate before the 20 s horizon
    assert code == 3
    report = json.loads((tmp_path / "e_estimate.json").read_text())
    assert report == json.loads(out)
    exc = report["exceedance"]
    assert 0.0 <= exc["p_hat"] <= 1.0 and len(exc["ci"]) == 2
    assert {"convergence", "supermartingale", "ensemble", "caveat"} <= set(report)
    assert report["ensemble"]["blowups"] == 200


def test_estimate_noise_free_fraction_is_binary(tmp_path, capsys):
    code, out = run(
        capsys, "estimate", "--model", "custom-linear-test", "--param", "lam=0", "--paths", "20",
        "--out", str(tmp_path / "d"),
    )
    assert code == 0
    report = json.loads(out)
    assert report["convergence"]["p_hat"] in (0.0, 1.0)
    assert report["supermartingale"]["passed"]


def test_sweep_delta_monotone(tmp_path, capsys):
    radii = ["0.4", "0.2", "0.1", "0.05"]
    code, out = run(
        capsys, "estimate", "--model", "pendulum", "--paths", "200", "--t-final", "2", "--t-tail", "1",
        "--eps", "0.3", "--sweep-delta", *radii, "--out", str(tmp_path / "s"),
    )
    assert code == 0
    sweep = json.loads(out)["sweep"]
    assert [s["delta"] for s in sweep] == [0.4, 0.2, 0.1, 0.05]
    for big, small in zip(sweep, sweep[1:]):
        assert small["exceedance"]["ci"][0] <= big["exceedance"]["ci"][1]
    assert sweep[0]["exceedance"]["p_hat"] > sweep[-1]["exceedance"]["p_hat"]


def test_sweep_radius_beyond_domain(tmp_path, capsys):
    code, _ = run(capsys, "estimate", "--model", "pendulum", "--sweep-delta", "5", "--out", str(tmp_path / "x"))
    assert code == 2
