import numpy as np
import pytest

from ftcfd import harness
from ftcfd.basis import BasisSpec, eval_basis
from ftcfd.core import FunctionalSample
from ftcfd.dgp import DgpConfig, draw_sample
from ftcfd.errors import ArgumentError
from ftcfd.harness import (
    MODE_BIAS_VARIANCE,
    MODE_TEST_SELECTION,
    ExperimentSpec,
    estimate_cmd,
    run_bias_variance,
    run_test_selection,
    write_experiment_csv,
)
from ftcfd.harness import test_cmd as run_test_cmd


def _bv_spec(**kw):
    base = dict(
        mode=MODE_BIAS_VARIANCE,
        kinds=("IndCon",),
        n_values=(20,),
        replications=4,
        p=51,
        targets=("mean",),
        seed=0,
    )
    base.update(kw)
    return ExperimentSpec(**base)


def test_spec_validation():
    with pytest.raises(ArgumentError):
        _bv_spec(mode="nope")
    with pytest.raises(ArgumentError):
        _bv_spec(replications=0)
    with pytest.raises(ArgumentError):
        _bv_spec(kinds=("Bogus",))
    with pytest.raises(ArgumentError):
        _bv_spec(n_values=())
    with pytest.raises(ArgumentError):
        _bv_spec(targets=("median",))
    with pytest.raises(ArgumentError):
        ExperimentSpec(
            mode=MODE_TEST_SELECTION,
            kinds=("IndDis",),
            n_values=(20,),
            replications=2,
            J_max=20,
        )


def test_bias_variance_cells_are_nonnegative():
    result = run_bias_variance(_bv_spec())
    assert len(result.cells) == 2  # classical + ftc, one kind/n/target
    for cell in result.cells:
        assert cell.int_sq_bias >= 0.0
        assert cell.int_variance >= 0.0
        assert 0.0 <= cell.excluded_fraction < 1.0
        assert not cell.degenerate


def test_bias_variance_single_replication_is_degenerate():
    result = run_bias_variance(_bv_spec(replications=1))
    for cell in result.cells:
        assert cell.degenerate
        assert cell.int_variance == 0.0


def test_bias_variance_excludes_rarely_defined_points():
    # IndCon endpoints are < 1 almost surely, so the right edge of the grid
    # is undefined in most replications and must be dropped from the integrals.
    result = run_bias_variance(_bv_spec(kinds=("IndCon",), replications=6))
    classical = next(c for c in result.cells if c.estimator == "classical")
    assert classical.excluded_fraction > 0.0


def test_selection_percentages_sum_to_hundred():
    spec = ExperimentSpec(
        mode=MODE_TEST_SELECTION,
        kinds=("IndDis", "DepDis"),
        n_values=(40,),
        replications=3,
        p=101,
        J_max=21,
        R=200,
        seed=0,
    )
    result = run_test_selection(spec)
    assert len(result.cells) == 2
    for cell in result.cells:
        assert cell.null_pct + cell.v_pct + cell.other_pct == pytest.approx(100.0)


def test_result_csv_is_deterministic(tmp_path):
    spec = _bv_spec(replications=3)
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    write_experiment_csv(run_bias_variance(spec), a)
    write_experiment_csv(run_bias_variance(spec), b)
    assert a.read_bytes() == b.read_bytes()


def test_workers_do_not_change_results(tmp_path, monkeypatch):
    spec = _bv_spec(replications=4)
    seq, par = tmp_path / "seq.csv", tmp_path / "par.csv"
    monkeypatch.delenv(harness.WORKERS_ENV, raising=False)
    write_experiment_csv(run_bias_variance(spec), seq)
    monkeypatch.setenv(harness.WORKERS_ENV, "2")
    write_experiment_csv(run_bias_variance(spec), par)
    assert seq.read_bytes() == par.read_bytes()


def test_workers_env_must_be_integer(monkeypatch):
    monkeypatch.setenv(harness.WORKERS_ENV, "two")
    with pytest.raises(ArgumentError):
        run_bias_variance(_bv_spec(replications=1))


def test_result_csv_metadata_header(tmp_path):
    spec = _bv_spec(replications=2)
    path = tmp_path / "r.csv"
    write_experiment_csv(run_bias_variance(spec), path)
    lines = path.read_text().splitlines()
    meta = [l for l in lines if l.startswith("# ")]
    keys = {l[2:].split("=", 1)[0] for l in meta}
    assert keys == {
        "mode", "kinds", "n", "replications", "p",
        "J_max", "alpha", "R", "seed", "targets",
    }
    assert "# mode=bias_variance" in meta
    header = lines[len(meta)]
    assert header.startswith("dgp,n,estimator,target,")


def _mean_column(path):
    rows = [line.split(",") for line in open(path).read().strip().splitlines()[1:]]
    return np.array([float(r[1]) if r[1] else np.nan for r in rows])


def test_estimate_cmd_separates_biased_and_corrected_means(tmp_path):
    sample, _, _ = draw_sample(DgpConfig("DepDis", n=300, p=101, seed=12))
    estimate_cmd(sample, tmp_path)
    classical = _mean_column(tmp_path / "mean_classical.csv")
    ftc = _mean_column(tmp_path / "mean_ftc.csv")
    assert abs(classical[-1] - ftc[-1]) > 1.0


def test_estimate_cmd_fully_observed_estimates_agree(tmp_path):
    sample, _, xi = draw_sample(DgpConfig("IndDis", n=40, p=101, seed=13))
    full = FunctionalSample.from_values(
        sample.grid, xi @ eval_basis(BasisSpec(5, (0.0, 1.0)), sample.grid.points).T
    )
    written = estimate_cmd(full, tmp_path)
    assert len(written) == 4
    classical = _mean_column(tmp_path / "mean_classical.csv")
    ftc = _mean_column(tmp_path / "mean_ftc.csv")
    assert np.abs(classical - ftc).max() < 1e-3


def test_estimate_cmd_writes_component_scores(tmp_path):
    sample, _, _ = draw_sample(DgpConfig("DepCon", n=50, p=101, seed=14))
    written = estimate_cmd(sample, tmp_path, fpc_scores=True)
    path = tmp_path / "fpc_scores.csv"
    assert str(path) in written
    lines = path.read_text().splitlines()
    assert lines[0].startswith("# explained=")
    assert lines[1].startswith("i,score_1")
    assert len(lines) == 2 + sample.n


def test_test_cmd_outcomes(tmp_path):
    dep, _, _ = draw_sample(DgpConfig("DepDis", n=250, p=501, seed=(71, 0)))
    text = run_test_cmd(dep, out_path=tmp_path / "dep.txt", R=1000, seed=0)
    assert "outcome=V" in text
    assert (tmp_path / "dep.txt").read_text() == text
    ind, _, _ = draw_sample(DgpConfig("IndDis", n=250, p=501, seed=(73, 0)))
    assert "outcome=Null" in run_test_cmd(ind, R=1000, seed=0)


def test_test_cmd_j_max_does_not_change_clear_outcome():
    dep, _, _ = draw_sample(DgpConfig("DepDis", n=250, p=501, seed=(71, 0)))
    assert "outcome=V" in run_test_cmd(dep, J_max=41, R=1000, seed=0)
