import json

import pytest

import chart_tracing
import ds2wb
from ds2wb import (
    CONFIG_ENV,
    EXIT_ERROR,
    EXIT_OK,
    JobConfig,
    ToleranceUpdate,
    UsageError,
    build_parser,
    load_config_file,
    main,
    parse_basis,
    parse_pair,
)


def test_parse_pair_and_basis():
    assert parse_pair("0.3,3") == (0.3, 3.0)
    assert parse_pair("20x30", int, "x") == (20, 30)
    assert parse_basis("1,0,1,1") == ((1, 0), (1, 1))
    with pytest.raises(UsageError):
        parse_pair("1,2,3")
    with pytest.raises(UsageError):
        parse_basis("1,0,1")


def test_flags_win_over_config_file(tmp_path):
    cfg_file = tmp_path / "job.env"
    cfg_file.write_text("THETA=2.0\nX=1.5\nY=0.5\nTOL_VERTEX=1e-8\n")
    args = build_parser().parse_args(["build", "--theta", "1.0", "--tol", "exit=1e-11"])
    cfg = JobConfig.from_args(args, load_config_file(str(cfg_file)))
    assert cfg.params["theta"] == 1.0
    assert cfg.params["x"] == 1.5
    assert cfg.params["y"] == 0.5
    assert cfg.tolerances == {"VERTEX": 1e-8, "EXIT": 1e-11}
    assert cfg.output_dir == ds2wb.OUTPUT_DIR


def test_config_file_from_environment(tmp_path, monkeypatch):
    cfg_file = tmp_path / "job.env"
    cfg_file.write_text("WINDOW=2\n")
    monkeypatch.setenv(CONFIG_ENV, str(cfg_file))
    args = build_parser().parse_args(["spectrum", "--descriptor", "t.json"])
    cfg = JobConfig.from_args(args, load_config_file(None))
    assert cfg.window == 2
    assert cfg.output_path("t_spectrum", ".csv").name == "t_spectrum.csv"


def test_missing_config_file():
    with pytest.raises(UsageError):
        load_config_file("/nonexistent/job.env")


def test_tolerance_update_is_scoped():
    before = chart_tracing.EPS_VERTEX
    with ToleranceUpdate({"VERTEX": 1e-6}):
        assert chart_tracing.EPS_VERTEX == 1e-6
    assert chart_tracing.EPS_VERTEX == before
    with pytest.raises(UsageError):
        with ToleranceUpdate({"NO_SUCH_TOLERANCE": 1.0}):
            pass


def test_require_names_the_missing_flags():
    cfg = JobConfig("invert", {"theta": 1.0, "l": None, "twist": None})
    with pytest.raises(UsageError, match="--l, --twist"):
        cfg.require("theta", "l", "twist")


def test_gbcheck(tmp_path, capsys):
    code = main(["gbcheck", "--random-triangles", "5", "--seed", "1", "--out-dir", str(tmp_path)])
    assert code == EXIT_OK
    assert "max residual" in capsys.readouterr().out


def test_usage_errors_exit_2(tmp_path):
    assert main(["build", "--x", "1.5", "--out-dir", str(tmp_path)]) == EXIT_ERROR
    assert main(["build", "--theta", "1.0", "--x", "1.5", "--y", "1.5", "--out-dir", str(tmp_path)]) == EXIT_ERROR
    assert main(["coords", "--descriptor", str(tmp_path / "missing.json"), "--out-dir", str(tmp_path)]) == EXIT_ERROR
    assert main(["rigidity", "--theta", "1.0", "--l-range", "3,1", "--out-dir", str(tmp_path)]) == EXIT_ERROR
    with pytest.raises(SystemExit):
        main([])


def test_build_coords_render(tmp_path, capsys):
    out = str(tmp_path)
    code = main(["build", "--rect", "--theta", "1.0", "--l", "1.2", "--twist", "0.25", "--out-dir", out, "--stem", "r"])
    assert code == EXIT_OK
    assert "invariants: PASS" in capsys.readouterr().err
    desc_path = tmp_path / "r.json"
    desc = json.loads(desc_path.read_text())
    assert desc["kind"] == "rectangle"
    assert desc["offset"] == pytest.approx(0.3)

    assert main(["coords", "--descriptor", str(desc_path), "--json", "--out-dir", out]) == EXIT_OK
    payload = json.loads(capsys.readouterr().out)
    assert payload["l"] == pytest.approx(1.2, rel=1e-10)
    assert payload["theta_twist"] == pytest.approx(0.25, abs=1e-6)

    assert main(["render", "--descriptor", str(desc_path), "--leaves", "4", "--out-dir", out]) == EXIT_OK
    assert (tmp_path / "r_render.svg").exists()


def test_invert_round_trip(tmp_path, capsys):
    code = main(["invert", "--theta", "1.0", "--l", "1.2", "--twist", "0.3", "--json", "--out-dir", str(tmp_path)])
    assert code == EXIT_OK
    payload = json.loads(capsys.readouterr().out)
    assert payload["round_trip_residual"] < 1e-8
    assert (tmp_path / "inv_theta1_l1.2_tw0.3.json").exists()


@pytest.mark.slow
def test_build_l_torus(tmp_path, capsys):
    assert main(["build", "--theta", "1.0", "--x", "1.5", "--y", "0.5", "--out-dir", str(tmp_path)]) == EXIT_OK
    assert "invariants: PASS" in capsys.readouterr().err
    assert (tmp_path / "L_theta1_x1.5_y0.5.json").exists()
