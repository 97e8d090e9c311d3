import csv
import io
import json
import math

import numpy as np
import pytest
from PIL import Image

from beamholo import hbgf
from beamholo.cli import main
from beamholo.config import apply_override, from_dict, loads, parse_config
from beamholo.errors import ConfigError
from beamholo.outputs import OutputWriter, Table, csv_bytes, to_png_array

SMALL_CGH = ["--set", "cgh.rows=32", "--set", "cgh.cols=32", "--set", "cgh.iterations=5", "--set", "cgh.n_planes=2"]


def outputs(directory, suffix):
    return sorted(p for p in directory.iterdir() if p.name.endswith(suffix))


# -- config -------------------------------------------------------------------


def test_defaults_match_documented_values():
    cfg = loads("{}")
    assert cfg.optics.wavelength_nm == 532.0
    assert cfg.optics.thickness_um == 30.0
    assert cfg.optics.pupil_diameter_mm == 3.0
    assert cfg.cgh.n_planes == 6
    assert cfg.sweep.axis == "eyebox_xy"
    assert cfg.seed == 0


def test_negative_pupil_rejected():
    with pytest.raises(ConfigError, match="pupil_diameter_mm"):
        from_dict({"optics": {"pupil_diameter_mm": -1.0}})


def test_unknown_and_misspelt_keys():
    with pytest.raises(ConfigError, match="unknown key"):
        from_dict({"optics": {"colour": 1}})
    with pytest.raises(ConfigError, match="wrong unit suffix"):
        from_dict({"optics": {"wavelength_um": 0.532}})
    with pytest.raises(ConfigError, match="missing unit suffix"):
        from_dict({"optics": {"wavelength": 532}})
    with pytest.raises(ConfigError, match="top-level"):
        from_dict({"optix": {}})


def test_type_errors():
    with pytest.raises(ConfigError, match="integer"):
        from_dict({"cgh": {"rows": 12.5}})
    with pytest.raises(ConfigError, match="number"):
        from_dict({"optics": {"n0": "1.5"}})


def test_parse_error_reports_line(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text('{\n  "seed": 1,\n  oops\n}')
    with pytest.raises(ConfigError, match="line 3"):
        parse_config(p)


def test_config_round_trip():
    cfg = from_dict({"optics": {"n1": 0.03}, "sweep": {"axis": "orientation"}, "seed": 7})
    again = loads(cfg.to_json())
    assert again == cfg
    assert again.sweep.axis == "head_pan_tilt"
    assert again.content_hash() == cfg.content_hash()


def test_hash_ignores_output_directory():
    a = from_dict({"output": {"directory": "a"}})
    b = from_dict({"output": {"directory": "b"}})
    assert a.content_hash() == b.content_hash()
    assert a.content_hash() != from_dict({"seed": 1}).content_hash()


def test_override_parsing():
    raw = apply_override({}, "cgh.rows=64")
    apply_override(raw, "sweep.axis=head_pan_tilt")
    assert raw == {"cgh": {"rows": 64}, "sweep": {"axis": "head_pan_tilt"}}
    with pytest.raises(ConfigError):
        apply_override({}, "nonsense")


# -- outputs ------------------------------------------------------------------


def test_png_of_zero_grid_is_black():
    assert np.all(to_png_array(np.zeros((4, 4))) == 0)


def test_png_gamma():
    png = to_png_array(np.array([[0.0, 0.25, 1.0]]))
    assert png.tolist() == [[0, round(255 * 0.25 ** (1 / 2.2)), 255]]


def test_csv_is_crlf_and_exact():
    data = csv_bytes(Table(["a", "b"], [(1, 0.1), (2, 1 / 3)]))
    assert data == b"a,b\r\n1,0.1\r\n2,0.3333333333333333\r\n"


def test_writer_cleanup(tmp_path):
    w = OutputWriter(tmp_path, "x", "abc")
    w.grid("g", np.ones((3, 3)))
    assert len(list(tmp_path.iterdir())) == 2
    w.cleanup()
    assert list(tmp_path.iterdir()) == []


# -- commands -------------------------------------------------------------------


def test_unknown_command_exits_nonzero():
    with pytest.raises(SystemExit) as exc:
        main(["levitate"])
    assert exc.value.code != 0


def test_bad_config_exit_code(tmp_path, capsys):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"optics": {"pupil_diameter_mm": -3}}))
    assert main(["render-retina", "--config", str(p), "--output", str(tmp_path / "o")]) == 2
    assert "pupil_diameter_mm" in capsys.readouterr().err


def test_efficiency_map_csv(tmp_path):
    assert main(["efficiency-map", "--output", str(tmp_path)]) == 0
    (path,) = outputs(tmp_path, ".csv")
    assert path.name.startswith("efficiency-map_")
    raw = path.read_bytes()
    assert b"\r\n" in raw
    rows = list(csv.reader(io.StringIO(raw.decode())))
    assert rows[0] == ["theta_r_deg", "theta_s_deg", "eta"]
    assert len(rows) == 1 + 141 * 141
    assert float(rows[1][2]) == pytest.approx(math.sin(math.pi * 0.04 * 30e-6 / 532e-9) ** 2, abs=1e-12)
    assert float(rows[1][2]) == pytest.approx(0.518, abs=1e-3)
    grid = hbgf.read(outputs(tmp_path, ".hbgf")[0])
    assert grid.shape == (141, 141)
    assert grid[0, 0] == pytest.approx(float(rows[1][2]), abs=0)


def test_reruns_are_byte_identical(tmp_path):
    args = ["optimize-hologram", *SMALL_CGH]
    assert main([*args, "--output", str(tmp_path / "a")]) == 0
    assert main([*args, "--output", str(tmp_path / "b")]) == 0
    a = {p.name: p.read_bytes() for p in (tmp_path / "a").iterdir()}
    b = {p.name: p.read_bytes() for p in (tmp_path / "b").iterdir()}
    assert a == b
    assert any(n.endswith("_loss.csv") for n in a)


def test_encode_then_reconstruct(tmp_path):
    assert main(["encode", *SMALL_CGH, "--output", str(tmp_path)]) == 0
    (holo,) = [p for p in outputs(tmp_path, ".hbgf") if "hologram_phase" in p.name]
    phase = hbgf.read(holo)
    assert phase.shape == (32, 32)
    assert np.all((phase >= -np.pi) & (phase < np.pi))
    code = main(["reconstruct", *SMALL_CGH, "--set", f"cgh.hologram_path={json.dumps(str(holo))}", "--output", str(tmp_path / "r")])
    assert code == 0
    recons = outputs(tmp_path / "r", ".hbgf")
    assert len(recons) == 2
    with Image.open(outputs(tmp_path / "r", ".png")[0]) as im:
        assert im.size == (32, 32)


def test_reconstruct_without_hologram_fails_cleanly(tmp_path):
    assert main(["reconstruct", "--output", str(tmp_path)]) == 2
    assert not tmp_path.exists() or list(tmp_path.iterdir()) == []


def test_render_and_small_sweep(tmp_path):
    fast = ["--set", "optics.grid_points=3", "--set", "optics.rays_per_point=20"]
    assert main(["render-retina", *fast, "--output", str(tmp_path)]) == 0
    assert any("diagnostics" in p.name for p in outputs(tmp_path, ".csv"))
    sweep_args = ["sweep", *fast, "--axis", "orientation", "--set", "sweep.orientation_range_deg=1.0",
                  "--set", "sweep.orientation_step_deg=0.5", "--threads", "2", "--output", str(tmp_path / "s")]
    assert main(sweep_args) == 0
    (table,) = outputs(tmp_path / "s", ".csv")
    rows = list(csv.reader(io.StringIO(table.read_text())))
    assert len(rows) == 1 + 25
    centre = [r for r in rows[1:] if float(r[0]) == 0 and float(r[1]) == 0]
    assert float(centre[0][2]) == 1.0
