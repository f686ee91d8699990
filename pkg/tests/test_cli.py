import numpy as np
import pytest

from uccfn import cli
from uccfn.inversion import read_curve_csv


@pytest.fixture()
def light_config(tmp_path):
    f = tmp_path / "net.cfg"
    f.write_text("p_t = 0.1\nfreq = 4e9\nalpha = 2.5\nr0 = 1\nr1 = 100\n"
                 "n_av_R = 2\nn_av_U = 0.5\nm = 1\nn0 = 0\n")
    return f


@pytest.fixture()
def bad_config(tmp_path):
    f = tmp_path / "bad.cfg"
    f.write_text("p_t = 0.1\nfreq = 4e9\nalpha = 1.5\nr0 = 1\nr1 = 100\n"
                 "n_av_R = 2\nn_av_U = 0.5\nm = 1\n")
    return f


def test_validation_error_exit_code(bad_config, tmp_path):
    rc = cli.main(["analyze", "--config", str(bad_config),
                   "--out", str(tmp_path / "o")])
    assert rc == cli.EXIT_VALIDATION


def test_simulate_writes_artifacts(light_config, tmp_path):
    out = tmp_path / "sim"
    rc = cli.main(["simulate", "--config", str(light_config), "--trials", "60",
                   "--model", "gamma", "--seed", "3", "--out", str(out),
                   "--theta-step", "5", "--thetap-step", "10"])
    assert rc == cli.EXIT_OK
    samples = (out / "samples_gamma_approx.csv").read_text().splitlines()
    assert samples[0].startswith("# uccfn-samples")
    assert len(samples) == 62
    curve = read_curve_csv(out / "rate_ccdf_gamma_approx.csv")
    assert curve.kind == "coverage_ccdf"
    assert "params" in curve.meta


def test_simulate_determinism_across_runs(light_config, tmp_path):
    outs = []
    for name in ("a", "b"):
        out = tmp_path / name
        cli.main(["simulate", "--config", str(light_config), "--trials", "40",
                  "--seed", "11", "--out", str(out),
                  "--theta-step", "10", "--thetap-step", "20"])
        outs.append((out / "samples_exact.csv").read_text())
    assert outs[0] == outs[1]


@pytest.mark.slow
def test_analyze_and_compare_roundtrip(light_config, tmp_path):
    out = tmp_path / "an"
    rc = cli.main(["analyze", "--config", str(light_config), "--out", str(out),
                   "--theta-min", "-5", "--theta-max", "10", "--theta-step", "5",
                   "--thetap-min", "-70", "--thetap-max", "-40",
                   "--thetap-step", "10", "--plot-script"])
    assert rc == cli.EXIT_OK
    assert (out / "moments.csv").exists()
    assert (out / "view.gp").exists()
    cov = read_curve_csv(out / "coverage_analytic.csv")
    assert np.all(np.diff(cov.values) <= 2e-4)

    # identical curves compare clean; a shifted copy fails the report gate
    cmp_path = tmp_path / "cmp.csv"
    rc = cli.main(["compare", str(out / "coverage_analytic.csv"),
                   str(out / "coverage_analytic.csv"), "--out", str(cmp_path)])
    assert rc == cli.EXIT_OK
    rc = cli.main(["report", str(cmp_path), "--tol", "0.05"])
    assert rc == cli.EXIT_OK

    shifted = cov
    shifted.values = np.clip(cov.values + 0.1, 0, 1)
    from uccfn.inversion import write_curve_csv
    write_curve_csv(shifted, out / "shifted.csv")
    cmp2 = tmp_path / "cmp2.csv"
    cli.main(["compare", str(out / "coverage_analytic.csv"),
              str(out / "shifted.csv"), "--out", str(cmp2)])
    rc = cli.main(["report", str(cmp2), "--tol", "0.05"])
    assert rc == cli.EXIT_NUMERICS


def test_compare_grid_mismatch(light_config, tmp_path):
    from uccfn.inversion import DistCurve, write_curve_csv
    a = tmp_path / "a.csv"
    b = tmp_path / "b.csv"
    write_curve_csv(DistCurve([0.0, 1.0], [0.5, 0.4], "coverage_ccdf", "dB"), a)
    write_curve_csv(DistCurve([0.0, 2.0], [0.5, 0.4], "coverage_ccdf", "dB"), b)
    rc = cli.main(["compare", str(a), str(b), "--out", str(tmp_path / "c.csv")])
    assert rc == cli.EXIT_VALIDATION


@pytest.mark.slow
def test_sweep_emits_density_table(tmp_path):
    out = tmp_path / "sw"
    rc = cli.main(["sweep", "--metric", "G", "--theta", "5", "--theta-p",
                   "-55", "--densities", "2,6", "--out", str(out)])
    assert rc == cli.EXIT_OK
    rows = (out / "sweep_G_bounds.csv").read_text().splitlines()
    assert rows[1] == "n_av_R,theta_db,theta_p_dbm,g_lower,g_upper"
    assert len(rows) == 4
    for row in rows[2:]:
        nav, th, tp, lo, hi = map(float, row.split(","))
        assert 0.0 <= lo <= hi <= 1.0


@pytest.mark.slow
def test_figure_fig3_preset(tmp_path):
    out = tmp_path / "fig3"
    rc = cli.main(["figure", "fig3", "--trials", "300", "--seed", "2",
                   "--out", str(out), "--theta-min", "-5", "--theta-max", "10",
                   "--theta-step", "5", "--thetap-step", "20"])
    assert rc == cli.EXIT_OK
    names = {p.name for p in out.iterdir()}
    assert {"fig3_coverage_exact_mc.csv", "fig3_coverage_full.csv",
            "fig3_coverage_no_intra.csv",
            "fig3_coverage_independent_intra.csv"} <= names
    # presets set caption parameters and derive densities, never hard-code them
    full = read_curve_csv(out / "fig3_coverage_full.csv")
    from uccfn.cli import _preset_params
    from uccfn.config import params_digest
    assert full.meta["params"] == params_digest(_preset_params("fig3"))


def test_figure_rejects_unknown_id():
    with pytest.raises(SystemExit):
        cli.main(["figure", "fig99", "--out", "x"])
