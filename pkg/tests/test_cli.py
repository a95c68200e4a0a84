import json
import math
import os

import pytest

from einbein.main import EXIT_CONFIG, EXIT_NUMERICAL, EXIT_OK, main, run


def _config(tmp_path, model, source, **extra):
    doc = {"model": model, "source": source, "out_dir": str(tmp_path / "out")}
    doc.update(extra)
    path = tmp_path / "config.json"
    path.write_text(json.dumps(doc))
    return str(path)


def _read(tmp_path, name):
    with open(tmp_path / "out" / name, encoding="utf-8") as f:
        return json.load(f)


LINEAR = {"kind": "linear_z", "n0sq": 1.0, "a": 1.0}
CONSTANT = {"kind": "constant", "n0sq": 1.0}
CHANNEL = {"kind": "quadratic_z", "n0sq": 1.0, "alpha": 0.01}
POINT = {"kind": "point_delta", "location": [0.0, 0.0]}
SHEET = {"kind": "phase_sheet", "location": [0.0, 0.0], "mu": 1.0}


def test_monodromy_command_writes_the_matrix(tmp_path, capsys):
    path = _config(tmp_path, CONSTANT, POINT)
    assert main(["monodromy", "--config", path, "--no-confirm"]) == EXIT_OK
    payload = _read(tmp_path, "monodromy_nu.json")
    assert payload["matrix"] == [[1, 1], [0, 1]]
    assert os.path.exists(tmp_path / "out" / "monodromy_nu.svg")
    assert os.path.exists(tmp_path / "out" / "run.log")
    assert "✓ Completed" in capsys.readouterr().out


def test_monodromy_loop_flag(tmp_path):
    path = _config(tmp_path, LINEAR, POINT)
    result = run(["monodromy", "--config", path, "--loop", "coord", "--no-confirm"])
    assert result.success
    assert result.details["matrix"] == [[1, 0, 0, 1], [0, 1, 0, 0], [0, 0, 1, 0], [0, 0, 0, 1]]


def test_unknown_loop_is_a_configuration_error(tmp_path):
    path = _config(tmp_path, LINEAR, POINT)
    assert main(["monodromy", "--config", path, "--loop", "spiral"]) == EXIT_CONFIG


def test_basis_that_does_not_close_is_a_numerical_failure(tmp_path):
    path = _config(tmp_path, CHANNEL, POINT)
    result = run(["monodromy", "--config", path, "--loop", "nu"])
    assert result.exit_code == EXIT_NUMERICAL
    assert result.error_message.startswith("BasisNotClosed")


def test_invalid_model_is_a_configuration_error(tmp_path):
    path = _config(tmp_path, {"kind": "quadratic_z", "alpha": 0.0}, POINT)
    assert main(["laurent", "--config", path]) == EXIT_CONFIG


def test_missing_config_file(tmp_path):
    assert main(["laurent", "--config", str(tmp_path / "nope.json")]) == EXIT_CONFIG


def test_field_needs_a_grid(tmp_path):
    path = _config(tmp_path, CONSTANT, POINT)
    assert main(["field", "--config", path]) == EXIT_CONFIG


def test_laurent_command_is_deterministic(tmp_path):
    path = _config(tmp_path, LINEAR, POINT, point=[1.0, 0.0])
    assert main(["laurent", "--config", path, "--order", "4"]) == EXIT_OK
    values = _read(tmp_path, "laurent_values.json")
    assert values["gamma_leading"]["3"] == pytest.approx(-1.0 / 12.0)
    assert values["exact"] is True
    first = (tmp_path / "out" / "laurent.json").read_bytes()
    assert main(["laurent", "--config", path, "--order", "4"]) == EXIT_OK
    assert (tmp_path / "out" / "laurent.json").read_bytes() == first


def test_pade_command_reports_the_first_ghost_pole(tmp_path):
    source = {"kind": "point_delta", "location": [0.0, 0.3]}
    path = _config(tmp_path, CHANNEL, source, point=[0.5, 0.7])
    assert main(["pade", "--config", path]) == EXIT_OK
    report = _read(tmp_path, "pade.json")["first_ghost_pole"]
    assert report["expected"] == pytest.approx(math.pi / 0.2)
    assert report["relative_error"] < 1e-3


def test_pade_command_counts_critical_points(tmp_path):
    path = _config(tmp_path, LINEAR, POINT, point=[1.0, 0.0])
    assert main(["pade", "--config", path, "--N", "3", "--M", "0"]) == EXIT_OK
    assert _read(tmp_path, "pade.json")["riemann_hurwitz"]["n_C"] == 4


def test_caustics_command(tmp_path):
    grid = {"x_range": [1.5, 2.5], "z_range": [-0.1, 0.1], "resolution": [4, 3]}
    path = _config(tmp_path, LINEAR, POINT, grid=grid)
    assert main(["caustics", "--config", path]) == EXIT_OK
    assert os.path.exists(tmp_path / "out" / "caustics.csv")
    assert os.path.exists(tmp_path / "out" / "caustics.svg")


@pytest.mark.slow
def test_field_command_writes_csv_and_svg(tmp_path):
    grid = {"x_range": [0.5, 1.5], "z_range": [-0.5, 0.5], "resolution": [3, 3]}
    path = _config(tmp_path, CONSTANT, POINT, grid=grid, k0=[5.0])
    result = run(["field", "--config", path])
    assert result.success
    assert any(p.endswith(".csv") for p in result.outputs)
    assert any(p.endswith(".svg") for p in result.outputs)


@pytest.mark.slow
def test_monodromy_command_confirms_numerically(tmp_path):
    path = _config(tmp_path, CONSTANT, POINT)
    result = run(["monodromy", "--config", path])
    assert result.success
    assert float(result.details["confirmation residual"]) < 1e-6


@pytest.mark.slow
def test_thimbles_command(tmp_path):
    path = _config(tmp_path, LINEAR, POINT, point=[1.0, 0.0])
    assert main(["thimbles", "--config", path]) == EXIT_OK
    report = _read(tmp_path, "thimbles.json")
    assert sorted(abs(t["coefficient"]) for t in report["thimbles"] if t["coefficient"]) == [1, 1]
    assert os.path.exists(tmp_path / "out" / "thimbles.svg")


@pytest.mark.slow
def test_arrivals_command_on_the_illuminated_side(tmp_path):
    path = _config(tmp_path, LINEAR, POINT, k0=[10.0], options={"transect": [[1.0, 0.0]]})
    result = run(["arrivals", "--config", path])
    assert result.success
    assert result.details["arrivals"] == 2
    assert (tmp_path / "out" / "arrivals.csv").read_text().count("\n") == 3


def test_caustics_command_on_the_phase_sheet(tmp_path):
    grid = {"x_range": [-1.5, 1.5], "z_range": [-2.5, 2.5], "resolution": [4, 6]}
    path = _config(tmp_path, CONSTANT, SHEET, grid=grid)
    assert main(["caustics", "--config", path]) == EXIT_OK
    report = _read(tmp_path, "caustics.json")
    assert report["closed_form"] == "astroid"
    assert report["ghost_lines"] == [{"description": "x = 0", "axis": 0, "offset": 0.0}]
    assert [p[0] for p in report["cusp_points"]] == pytest.approx([0.0, 0.0], abs=1e-6)
    assert [p[1] for p in report["cusp_points"]] == pytest.approx([-2.0, 2.0], abs=1e-6)
    assert report["expected_cusp_points"] == [[0.0, -2.0], [0.0, 2.0]]
    assert os.path.exists(tmp_path / "out" / "caustics.svg")


@pytest.mark.slow
def test_thimbles_command_writes_the_polylines(tmp_path):
    path = _config(tmp_path, LINEAR, POINT, point=[1.0, 0.0])
    assert main(["thimbles", "--config", path]) == EXIT_OK
    lines = (tmp_path / "out" / "thimbles.csv").read_text().splitlines()
    assert lines[0] == "thimble,critical_point,tau,re_lambda,im_lambda,re_action,im_action"
    report = _read(tmp_path, "thimbles.json")
    assert len(lines) - 1 == sum(len(t["path"]) for t in report["thimbles"])


@pytest.mark.slow
def test_field_json_carries_every_point(tmp_path):
    grid = {"x_range": [0.5, 1.5], "z_range": [-0.5, 0.5], "resolution": [3, 2]}
    path = _config(tmp_path, CONSTANT, POINT, grid=grid, k0=[5.0])
    assert main(["field", "--config", path]) == EXIT_OK
    name = next(n for n in os.listdir(tmp_path / "out") if n.startswith("field_") and n.endswith(".json"))
    points = _read(tmp_path, name)["points"]
    assert len(points) == 6
    assert set(points[0]) == {"x", "z", "re", "im", "abs", "zone"}
    for p in points:
        assert p["abs"] == pytest.approx(math.hypot(p["re"], p["im"]))
