import csv
import hashlib
import json
import logging
import time

import numpy as np
import pytest

from gtcopula.cli import (EXIT_DATA, EXIT_OK, EXIT_VALIDATION, load_config, main,
                          ValidationError)
from gtcopula.data import GarchParams, garch_unfilter, read_matrix

CHAIN = """
[chain]
seed = 5
n_tune = {n_tune}
n_burn = {n_burn}
n_sample = {n_sample}
tune_window = 25
"""


def write_config(tmp_path, body="", n_tune=100, n_burn=50, n_sample=300, name="run.ini"):
    path = tmp_path / name
    path.write_text(CHAIN.format(n_tune=n_tune, n_burn=n_burn, n_sample=n_sample) + body)
    return path


def write_prices(path, n_days=600, seed=0):
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((n_days, 3))
    z[:, 1] = 0.6 * z[:, 0] + 0.8 * z[:, 1]
    p = GarchParams(mu=0.0, omega=2e-6, alpha=0.06, beta=0.9, sigma0_sq=5e-5)
    r = np.column_stack([garch_unfilter(z[:, j], p) for j in range(3)])
    prices = np.vstack([np.ones(3), np.exp(np.cumsum(r, axis=0))])
    dates = np.datetime64("2004-01-01") + np.arange(n_days + 1)
    lines = ["date,EUR,JPY,GBP"]
    lines += [f"{d}," + ",".join(repr(float(v)) for v in row) for d, row in zip(dates, prices)]
    path.write_text("\n".join(lines) + "\n")


def manifest_ok(out):
    for line in (out / "MANIFEST").read_text().splitlines():
        digest, name = line.split("  ", 1)
        assert hashlib.sha256((out / name).read_bytes()).hexdigest() == digest


# ---------------------------------------------------------------------------
# configuration


def test_validation_reports_every_problem(tmp_path, capsys):
    cfg = write_config(tmp_path, """
[selection]
policy = some
importance = cauchy
[risk]
alpha = 0.3
bogus = 1
""")
    assert main(["select", "-c", str(cfg)]) == EXIT_VALIDATION
    err = capsys.readouterr().err
    for piece in ("policy", "importance", "alpha", "unknown key [risk] bogus"):
        assert piece in err


def test_seed_is_mandatory(tmp_path):
    cfg = tmp_path / "run.ini"
    cfg.write_text("[chain]\nn_sample = 100\n")
    with pytest.raises(ValidationError, match="seed"):
        load_config(cfg)
    assert load_config(cfg, seed=3).seed == 3


def test_missing_column_fails_before_work(tmp_path, capsys):
    write_prices(tmp_path / "prices.csv")
    cfg = write_config(tmp_path, "[data]\npath = prices.csv\ncolumns = EUR, CHF\n"
                                 "[output]\ndir = out\n")
    assert main(["filter", "-c", str(cfg)]) == EXIT_VALIDATION
    assert "CHF" in capsys.readouterr().err
    assert not (tmp_path / "out").exists()


def test_bad_arguments_are_validation_errors(tmp_path):
    assert main(["nonsense"]) == EXIT_VALIDATION
    assert main(["select", "-c", str(tmp_path / "absent.ini")]) == EXIT_VALIDATION


# ---------------------------------------------------------------------------
# filter


def test_filter_outputs_and_determinism(tmp_path):
    write_prices(tmp_path / "prices.csv")
    cfg = write_config(tmp_path, "[data]\npath = prices.csv\n")
    outs = [tmp_path / "a", tmp_path / "b"]
    for out in outs:
        assert main(["filter", "-c", str(cfg), "-o", str(out)]) == EXIT_OK
    a = outs[0]
    with open(a / "garch.csv", newline="") as fh:
        garch = list(csv.reader(fh))
    assert garch[0][0] == "asset" and [r[0] for r in garch[1:]] == ["EUR", "JPY", "GBP"]
    names, u = read_matrix(a / "pseudo_obs.csv")
    assert names == ["EUR", "JPY", "GBP"] and u.shape == (600, 3)
    assert np.all((u > 0) & (u < 1))
    _, sigma = read_matrix(a / "corr.csv")
    assert sigma.shape == (3, 3) and sigma[0, 1] > 0.3
    manifest_ok(a)
    assert (a / "MANIFEST").read_text() == (outs[1] / "MANIFEST").read_text()


def test_filter_without_data_path(tmp_path):
    cfg = write_config(tmp_path)
    assert main(["filter", "-c", str(cfg), "-o", str(tmp_path / "o")]) == EXIT_VALIDATION


# ---------------------------------------------------------------------------
# simulate, calibrate, select, report, cvar


@pytest.fixture(scope="module")
def simulated(tmp_path_factory):
    root = tmp_path_factory.mktemp("run")
    (root / "p1.csv").write_text("asset,weight\nX1,0.5\nX2,0.5\n")
    cfg = write_config(root, "[output]\ndir = out\n[risk]\nportfolios = p1.csv\n"
                             "n_sims = 20000\nseed = 11\n")
    assert main(["simulate", "-c", str(cfg), "--model", "M0", "--dof", "3", "40",
                 "--dim", "2", "--rho", "0.5", "--n-obs", "300"]) == EXIT_OK
    return root, cfg


def test_invalid_model_id_lists_valid_ids(simulated, capsys):
    root, cfg = simulated
    assert main(["calibrate", "-c", str(cfg), "--model", "M7"]) == EXIT_VALIDATION
    err = capsys.readouterr().err
    assert "M7" in err and "M0, M1" in err


def test_simulate_checks_dof_count(simulated):
    root, cfg = simulated
    assert main(["simulate", "-c", str(cfg), "-o", str(root / "x"), "--model", "M0",
                 "--dof", "3", "--dim", "2"]) == EXIT_VALIDATION


def test_cvar_needs_fits(simulated, capsys):
    root, cfg = simulated
    out = root / "nofit"
    out.mkdir()
    for f in ("pseudo_obs.csv", "corr.csv"):
        (out / f).write_bytes((root / "out" / f).read_bytes())
    code = main(["cvar", "-c", str(cfg), "-o", str(out), "--model-a", "M0", "--model-b", "M1"])
    assert code == EXIT_DATA
    assert "gtcopula calibrate --model M0" in capsys.readouterr().err


def test_calibrate_caches_chain(simulated, caplog):
    root, cfg = simulated
    with caplog.at_level(logging.INFO, logger="gtcopula"):
        assert main(["calibrate", "-c", str(cfg), "--model", "M0"]) == EXIT_OK
        first = (root / "out" / "fits" / "M0.json").read_bytes()
        assert "cache hit" not in caplog.text
        caplog.clear()
        assert main(["calibrate", "-c", str(cfg), "--model", "M0"]) == EXIT_OK
        assert "cache hit for M0" in caplog.text
    assert (root / "out" / "fits" / "M0.json").read_bytes() == first
    header, diag = read_matrix(root / "out" / "fits" / "M0_diagnostics.csv")
    assert header[:3] == ["group", "mean", "sd"] and diag.shape == (2, 7)


def test_select_reuses_chains_and_reports(simulated, caplog, capsys):
    root, cfg = simulated
    with caplog.at_level(logging.INFO, logger="gtcopula"):
        assert main(["select", "-c", str(cfg)]) == EXIT_OK
    assert "cache hit for M0" in caplog.text
    doc = json.loads((root / "out" / "selection.json").read_text())
    probs = [m["post_prob"] for m in doc["models"]]
    assert sum(probs) == pytest.approx(1.0, abs=1e-12)
    assert set(doc["ranking"]) >= {"log_rise", "dic", "post_prob"}
    assert main(["report", "-c", str(cfg)]) == EXIT_OK
    text = capsys.readouterr().out
    assert "Bayesian model choice" in text and "M1" in text
    manifest_ok(root / "out")


def test_select_is_deterministic(simulated):
    root, cfg = simulated
    out = root / "again"
    out.mkdir()
    for f in ("pseudo_obs.csv", "corr.csv"):
        (out / f).write_bytes((root / "out" / f).read_bytes())
    assert main(["select", "-c", str(cfg), "-o", str(out)]) == EXIT_OK
    assert (out / "selection.json").read_bytes() == \
        (root / "out" / "selection.json").read_bytes()


def test_cvar_same_model_and_self_test(simulated, capsys):
    root, cfg = simulated
    assert main(["calibrate", "-c", str(cfg), "--model", "M1"]) == EXIT_OK
    assert main(["cvar", "-c", str(cfg), "--model-a", "M0", "--model-b", "M0"]) == EXIT_OK
    assert "rel. diff 0.00%" in capsys.readouterr().out
    assert (root / "out" / "cvar_M0_M0.csv").is_file()
    assert main(["cvar", "-c", str(cfg), "--model-a", "M0", "--model-b", "M1"]) == EXIT_OK
    assert main(["cvar", "-c", str(cfg), "--self-test"]) == EXIT_OK
    _, rows = read_matrix(root / "out" / "cvar_selftest.csv")
    alpha, cvar, se, expected = rows[0]
    assert alpha == 0.99 and abs(cvar - 0.995) < 4 * se


# ---------------------------------------------------------------------------
# simulation oracle and smoke benchmark


def test_standard_model_recovers_dof(tmp_path):
    # six assets keep the dof well identified at K = 1000
    cfg = write_config(tmp_path, "[output]\ndir = out\n", n_tune=500, n_burn=500,
                       n_sample=2000)
    assert main(["simulate", "-c", str(cfg), "--model", "M32", "--dof", "11", "--dim", "6",
                 "--rho", "0.5", "--n-obs", "1000"]) == EXIT_OK
    assert main(["calibrate", "-c", str(cfg), "--model", "M32"]) == EXIT_OK
    fit = json.loads((tmp_path / "out" / "fits" / "M32.json").read_text())
    _, diag = read_matrix(tmp_path / "out" / "fits" / "M32_diagnostics.csv")
    sd = diag[0, 2]
    assert abs(fit["mmse"][0] - 11.0) < 3 * sd


SMOKE_SECONDS = 600.0


def test_two_asset_family_smoke_benchmark(tmp_path):
    cfg = write_config(tmp_path, "[output]\ndir = out\n", n_tune=1000, n_burn=1000,
                       n_sample=10_000)
    cfg.write_text(cfg.read_text().replace("tune_window = 25", "tune_window = 100"))
    assert main(["simulate", "-c", str(cfg), "--model", "M0", "--dof", "4", "30", "--dim", "2",
                 "--rho", "0.5", "--n-obs", "500"]) == EXIT_OK
    start = time.perf_counter()
    assert main(["select", "-c", str(cfg)]) == EXIT_OK
    elapsed = time.perf_counter() - start
    assert elapsed < SMOKE_SECONDS, elapsed
