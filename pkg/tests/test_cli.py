import csv
import hashlib
import json
import shutil
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qphase.cli import EXIT_CONFIG, EXIT_NUMERIC, EXIT_OK, main
from qphase.config import ConfigError, parse_config, serialize_config
from qphase.core import WignerField, build_grid, gaussian_wigner, save_field
from qphase.plotting import PlotError, plot_field, plot_moments

CONFIGS = Path(__file__).resolve().parents[1] / "configs"

MINIMAL = """
[experiment]
kind = wigner_evolve

[grid]
q_min = -16
q_max = 16
n_q = 64
p_min = -8
p_max = 8
n_p = 64

[params]
hbar = 1.0
mass = 1.0

[potential]
kind = constant
U0 = 0

[initial]
q0 = 0
p0 = 0
sigma_q = 1.0

[solver]
dt = 0.05
steps = 60
record_every = 20

[output]
directory = out
"""


def write(tmp_path, text, name="exp.ini"):
    path = tmp_path / name
    path.write_text(text)
    return path


def test_minimal_config_valid():
    cfg = parse_config(MINIMAL)
    assert cfg.kind == "wigner_evolve"
    assert cfg["grid"]["n_q"] == 64
    assert cfg.seed == 0


def test_missing_mass_named():
    with pytest.raises(ConfigError) as exc:
        parse_config(MINIMAL.replace("mass = 1.0\n", ""))
    assert any("'mass'" in p for p in exc.value.problems)


def test_power_of_two_rule():
    with pytest.raises(ConfigError) as exc:
        parse_config(MINIMAL.replace("n_q = 64", "n_q = 100"))
    assert "power of two" in str(exc.value)


def test_all_problems_reported():
    text = MINIMAL.replace("n_q = 64", "n_q = 100").replace("hbar = 1.0", "hbar = 1.0\nhbr = 2").replace(
        "[output]", "[extras]\nx = 1\n\n[output]")
    with pytest.raises(ConfigError) as exc:
        parse_config(text)
    msg = "\n".join(exc.value.problems)
    assert "power of two" in msg and "'hbr'" in msg and "[extras]" in msg


@pytest.mark.parametrize("text,needle", [
    ("[experiment]\nkind = wigner_evolve\n", "needs section [grid]"),
    (MINIMAL.replace("U0 = 0", ""), "'U0'"),
    (MINIMAL.replace("dt = 0.05\n", ""), "'dt'"),
    (MINIMAL.replace("mass = 1.0", "mass = 0"), "mass = 0"),
    (MINIMAL.replace("kind = wigner_evolve", "kind = magic"), "magic"),
    ("not an ini file", "malformed"),
])
def test_config_errors(text, needle):
    with pytest.raises(ConfigError) as exc:
        parse_config(text)
    assert needle in str(exc.value)


@pytest.mark.parametrize("path", sorted(CONFIGS.glob("*.ini")), ids=lambda p: p.stem)
def test_roundtrip_sample_configs(path):
    cfg = parse_config(path.read_text())
    again = parse_config(serialize_config(cfg))
    assert again == cfg
    assert serialize_config(again) == serialize_config(cfg)


@settings(max_examples=50, deadline=None)
@given(st.floats(allow_nan=False, allow_infinity=False, min_value=1e-300, max_value=1e300),
       st.floats(allow_nan=False, allow_infinity=False, width=64))
def test_roundtrip_floats(hbar, q0):
    text = MINIMAL.replace("hbar = 1.0", f"hbar = {hbar!r}").replace("q0 = 0", f"q0 = {q0!r}")
    cfg = parse_config(text)
    assert parse_config(serialize_config(cfg)) == cfg


def test_validate_subcommand(tmp_path, capsys):
    assert main(["validate", str(write(tmp_path, MINIMAL))]) == EXIT_OK
    assert "wigner_evolve" in capsys.readouterr().out
    assert main(["validate", str(write(tmp_path, MINIMAL.replace("n_q = 64", "n_q = 60"), "bad.ini"))]) == EXIT_CONFIG
    assert main(["validate", str(tmp_path / "missing.ini")]) == EXIT_CONFIG


def read_csv(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_run_free_packet_follows_spreading_law(tmp_path):
    assert main(["run", str(write(tmp_path, MINIMAL))]) == EXIT_OK
    manifest = json.loads((tmp_path / "out" / "manifest.json").read_text())
    rows = read_csv(tmp_path / "out" / "moments.csv")
    assert len(rows) == 61
    for r in rows:
        t = float(r["t"])
        assert float(r["var_q"]) == pytest.approx(1 + t**2 / 4, rel=1e-3)
    kinds = sorted(a["kind"] for a in manifest["artifacts"])
    assert kinds == ["moments"] + ["wigner_field"] * 4
    # every artifact hash matches the file on disk
    for a in manifest["artifacts"]:
        data = (tmp_path / "out" / a["path"]).read_bytes()
        assert hashlib.sha256(data).hexdigest() == a["sha256"]


def test_rerun_is_bitwise_identical(tmp_path):
    cfg = write(tmp_path, MINIMAL)
    main(["run", str(cfg)])
    first = (tmp_path / "out" / "manifest.json").read_text()
    shutil.rmtree(tmp_path / "out")
    main(["run", str(cfg)])
    assert (tmp_path / "out" / "manifest.json").read_text() == first


def test_compare_harmonic(tmp_path):
    shutil.copy(CONFIGS / "harmonic_compare.ini", tmp_path / "h.ini")
    assert main(["run", str(tmp_path / "h.ini")]) == EXIT_OK
    rows = {r["kernel"]: r for r in read_csv(tmp_path / "out" / "harmonic_compare" / "compare.csv")}
    assert float(rows["exact"]["l2"]) <= 1e-6


def test_stochastic_report_deterministic(tmp_path):
    for name in ("a", "b"):
        text = (CONFIGS / "stochastic.ini").read_text().replace("out/stochastic", f"out/{name}")
        text = text.replace("count = 2000", "count = 1000").replace("steps = 200", "steps = 20")
        assert main(["run", str(write(tmp_path, text, f"{name}.ini"))]) == EXIT_OK
    a = (tmp_path / "out" / "a" / "closure_report.json").read_bytes()
    b = (tmp_path / "out" / "b" / "closure_report.json").read_bytes()
    assert a == b
    assert json.loads(a)["order0_within_tolerance"] is True


@pytest.mark.parametrize("name", ["diffusion.ini", "relativistic.ini"])
def test_other_kinds_run(tmp_path, name):
    shutil.copy(CONFIGS / name, tmp_path / name)
    assert main(["run", str(tmp_path / name)]) == EXIT_OK


def test_numerical_failure_exit_code(tmp_path, capsys):
    text = MINIMAL.replace("kind = wigner_evolve", "kind = schrodinger_reference").replace("p0 = 0", "p0 = 6")
    assert main(["run", str(write(tmp_path, text))]) == EXIT_NUMERIC
    assert "schrodinger_reference" in capsys.readouterr().err


def test_relativistic_gate_failure(tmp_path):
    text = (CONFIGS / "relativistic.ini").read_text().replace("p0 = 0.25", "p0 = 0.0").replace("sigma_q = 8.0", "sigma_q = 0.5")
    assert main(["run", str(write(tmp_path, text))]) == EXIT_NUMERIC


def test_plot_subcommand(tmp_path, capsys):
    main(["run", str(write(tmp_path, MINIMAL))])
    capsys.readouterr()
    assert main(["plot", str(tmp_path / "out" / "manifest.json")]) == EXIT_OK
    images = capsys.readouterr().out.split()
    assert len(images) == 5 and all(Path(p).stat().st_size > 0 for p in images)


def test_plot_missing_artifact(tmp_path):
    main(["run", str(write(tmp_path, MINIMAL))])
    (tmp_path / "out" / "moments.csv").unlink()
    assert main(["plot", str(tmp_path / "out" / "manifest.json")]) == EXIT_CONFIG


def test_plot_empty_csv(tmp_path):
    path = tmp_path / "m.csv"
    path.write_text("t,var_q\n")
    with pytest.raises(PlotError):
        plot_moments(path, tmp_path / "m.png")


def test_field_heatmap_symmetric(tmp_path):
    g = build_grid(-4, 4, 32, -4, 4, 32)
    W = gaussian_wigner(g, 0, 0, 0.7, 0.7)
    W = WignerField(g, W.values - 0.3 * np.roll(W.values, 8, axis=1))
    save_field(tmp_path / "w.csv", W)
    _, (lo, hi) = plot_field(tmp_path / "w.csv", tmp_path / "w.png")
    assert lo == -hi and hi == pytest.approx(np.abs(W.values).max())
