import numpy as np
import pytest

from liefilter.cli import main
from liefilter.errors import NonConcentratedWarning
from liefilter.experiments import (
    ExperimentConfig,
    build_prior,
    default_tau_grid,
    emit_csv,
    emit_gnuplot,
    measure_euclidean,
    observe_euclidean,
    observe_group,
    run_sweep,
    TrialRecord,
)


# -- prior ------------------------------------------------------------------------

def test_prior_moments(so3):
    with pytest.warns(NonConcentratedWarning):
        prior = build_prior()
    assert np.abs(so3.log(prior.mean)
                  - np.array([np.pi / 3, np.pi / 4, np.pi / 6])).max() < 1e-12
    assert np.allclose(np.linalg.eigvalsh(prior.cov), [0.5, 0.8, 1.0])


# -- vector observation model -------------------------------------------------------

def test_measure_euclidean_identity():
    got = measure_euclidean(np.eye(3))
    assert np.allclose(got, [0.0, 0.0, -9.82, 0.33, 0.0, -0.95])


def test_measure_euclidean_half_turn_about_e3(so3):
    R = so3.exp(np.array([0.0, 0.0, np.pi - 1e-13]))
    got = measure_euclidean(R)
    assert np.abs(got - [0.0, 0.0, -9.82, -0.33, 0.0, -0.95]).max() < 1e-10


def test_observe_euclidean_vanishing_noise(so3):
    R = so3.exp(np.array([0.5, -0.2, 0.3]))
    got = observe_euclidean(R, 1e-30, seed=0)
    assert np.abs(got - measure_euclidean(R)).max() < 1e-12


def test_observe_euclidean_noise_covariance(so3):
    tau = 0.05
    R = so3.exp(np.array([0.1, 0.7, -0.3]))
    rng = np.random.default_rng(1)
    draws = np.stack([observe_euclidean(R, tau, rng) for _ in range(100_000)])
    emp = np.cov((draws - measure_euclidean(R)).T)
    target = tau * np.diag([0.3, 0.3, 0.3, 0.1, 0.1, 0.1])
    assert np.abs(np.diag(emp) - np.diag(target)).max() / (tau * 0.1) < 0.03 * 3


# -- group observation model ---------------------------------------------------------

def test_observe_group_vanishing_noise(so3):
    R = so3.exp(np.array([0.4, 0.4, -0.1]))
    assert np.abs(observe_group(R, 1e-30, seed=3) - R).max() < 1e-14


def test_observe_group_noise_covariance(so3):
    tau = 0.01
    R = so3.exp(np.array([-0.2, 0.5, 0.1]))
    rng = np.random.default_rng(4)
    draws = np.stack([observe_group(R, tau, rng) for _ in range(100_000)])
    logs = so3.log(R.T @ draws)
    emp = np.einsum("ki,kj->ij", logs, logs) / len(logs)
    assert np.abs(np.diag(emp) - 0.3 * tau).max() / (0.3 * tau) < 0.03


def test_observe_group_seed_reproducible(so3):
    R = so3.exp(np.array([0.3, 0.1, 0.2]))
    assert np.array_equal(observe_group(R, 0.1, seed=9),
                          observe_group(R, 0.1, seed=9))


# -- sweep ----------------------------------------------------------------------------

def test_single_sample_perfect_observation_costs_vanish():
    cfg = ExperimentConfig(model="group", sample_count=1,
                           tau_grid=np.array([1e-30]), seed=5)
    rec = run_sweep(cfg)[0]
    assert rec.c1_plain < 1e-25 and rec.c1_modified < 1e-25
    assert rec.c2_plain < 1e-25 and rec.c2_modified < 1e-25


@pytest.mark.parametrize("model", ["euclidean", "group"])
def test_sweep_smoke_and_determinism(model):
    cfg = ExperimentConfig(model=model, sample_count=40,
                           tau_grid=default_tau_grid(1e-2, 1.0, 3), seed=7)
    first = run_sweep(cfg)
    second = run_sweep(cfg)
    assert [r.tau for r in first] == list(cfg.tau_grid)
    for a, b in zip(first, second):
        assert (a.c1_plain, a.c1_modified, a.c2_plain, a.c2_modified) == \
            (b.c1_plain, b.c1_modified, b.c2_plain, b.c2_modified)
        assert min(a.c1_plain, a.c1_modified, a.c2_plain, a.c2_modified) >= 0
        assert a.wall_time >= 0


# -- CSV / gnuplot emission ------------------------------------------------------------

def test_emit_csv_header_only_for_empty_records(tmp_path):
    out = tmp_path / "empty.csv"
    emit_csv([], out)
    assert out.read_text() == "tau,c1_plain,c1_mod,c2_plain,c2_mod,wall_ms\n"


def test_emit_csv_layout_and_determinism(tmp_path):
    records = [TrialRecord(tau, 1e-3, 9e-4, 2e-3, 1.5e-3, wall_time=0.123 + tau)
               for tau in default_tau_grid()]
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    emit_csv(records, a)
    emit_csv(list(reversed(records)), b)
    lines = a.read_text().strip().split("\n")
    assert len(lines) == 14
    assert lines[0] == "tau,c1_plain,c1_mod,c2_plain,c2_mod,wall_ms"
    assert a.read_bytes() == b.read_bytes()          # sorted by tau, timing zeroed
    assert all(line.endswith("0.00000000000000000e+00") for line in lines[1:])
    timed = tmp_path / "timed.csv"
    emit_csv(records, timed, include_timing=True)
    assert timed.read_bytes() != a.read_bytes()


def test_emit_csv_roundtrip_precision(tmp_path):
    rec = TrialRecord(0.123456789123456789, 1 / 3, 2 / 7, 1 / 9, 3 / 11, 0.0)
    out = tmp_path / "prec.csv"
    emit_csv([rec], out)
    row = out.read_text().strip().split("\n")[1].split(",")
    assert float(row[1]) == rec.c1_plain
    assert float(row[4]) == rec.c2_modified


def test_emit_gnuplot_references_csv(tmp_path):
    script = tmp_path / "plot.gp"
    emit_gnuplot("results.csv", script)
    text = script.read_text()
    assert "results.csv" in text and "logscale" in text


# -- CLI --------------------------------------------------------------------------------

def test_cli_end_to_end_deterministic(tmp_path):
    out1, out2 = tmp_path / "r1.csv", tmp_path / "r2.csv"
    args = ["--model", "group", "--n", "30", "--tau-points", "3",
            "--seed", "11"]
    assert main(args + ["--out", str(out1), "--emit-gnuplot"]) == 0
    assert main(args + ["--out", str(out2)]) == 0
    assert out1.read_bytes() == out2.read_bytes()
    assert (tmp_path / "r1.csv.gp").exists()


def test_cli_reports_io_error(tmp_path):
    code = main(["--model", "group", "--n", "2", "--tau-points", "2",
                 "--out", str(tmp_path / "nope" / "x.csv")])
    assert code == 1


def test_cli_exit_code_on_exclusion_overflow(tmp_path, monkeypatch):
    from liefilter import experiments
    from liefilter.errors import LieDomainError

    def always_singular(*args, **kwargs):
        raise LieDomainError("synthetic chart-domain failure")

    monkeypatch.setattr(experiments, "fuse_group", always_singular)
    code = main(["--model", "group", "--n", "20", "--tau-points", "2",
                 "--out", str(tmp_path / "x.csv")])
    assert code == 2


def test_c2_standard_error_scales_with_sample_count():
    # std of the c2 estimate should shrink like 1/sqrt(n); the point estimate
    # of the std ratio over 12 replicates carries ~30% chi-noise, hence the
    # wide window around sqrt(2)
    def c2_std(n):
        vals = []
        for s in range(300, 312):
            cfg = ExperimentConfig(model="group", sample_count=n,
                                   tau_grid=np.array([0.1]), seed=s)
            vals.append(run_sweep(cfg)[0].c2_modified)
        return np.std(vals, ddof=1)

    ratio = c2_std(400) / c2_std(800)
    assert 1.0 < ratio < 2.6
