"""Full-scale reproductions on 200x2000 matrices. Minutes to hours each; run with `pytest -m slow`."""
import pandas as pd
import pytest

from src.bench import run_sweep, run_threshold
from src.experiment_loader import ExperimentConfig, load_experiment_config
from src.models import Algorithm

pytestmark = pytest.mark.slow

DENSE_SHAPE = {"kind": "AbsNormal", "n": 200, "N": 2000}


def sweep_rates(cfg: ExperimentConfig, workers: int = 4) -> pd.DataFrame:
    result = run_sweep(cfg, workers=workers, progress=False)
    return pd.read_csv(result.summary_csv).set_index(["algorithm", "density", "k"])


def test_cosamp_rates(make_config):
    cfg = make_config(
        experiment_id="cosamp_rates",
        ensemble=DENSE_SHAPE,
        densities=[1.0, 0.1],
        algorithms=["cosamp"],
        k_max=None,
        sparsities=[30, 40, 50, 60],
        trials=100,
        seed=20140603,
    )
    rates = sweep_rates(cfg)["success_rate"]
    expected = {1.0: [0.99, 0.55, 0.07, 0.0], 0.1: [1.0, 1.0, 0.99, 0.75]}
    for density, targets in expected.items():
        for k, target in zip([30, 40, 50, 60], targets):
            assert abs(rates[("cosamp", density, k)] - target) <= 0.10, (density, k)


def test_lp_rates(make_config):
    cfg = make_config(
        experiment_id="lp_rates",
        ensemble=DENSE_SHAPE,
        densities=[1.0, 0.1],
        algorithms=["lp"],
        k_max=None,
        sparsities=[40, 50],
        trials=50,
        seed=20140603,
    )
    rates = sweep_rates(cfg)["success_rate"]
    expected = {1.0: [0.94, 0.38], 0.1: [0.99, 0.78]}
    for density, targets in expected.items():
        for k, target in zip([40, 50], targets):
            assert abs(rates[("lp", density, k)] - target) <= 0.14, (density, k)


def test_lp_is_faster_on_sparse_matrices(make_config):
    cfg = make_config(
        experiment_id="lp_timing",
        ensemble=DENSE_SHAPE,
        densities=[1.0, 0.1],
        algorithms=["lp"],
        k_max=None,
        sparsities=[30],
        trials=20,
        record_timing=True,
    )
    times = sweep_rates(cfg, workers=1)["mean_wall_time_s"]
    assert times[("lp", 1.0, 30)] >= 3 * times[("lp", 0.1, 30)]


def test_sparsification_raises_cosamp_threshold(make_config):
    cfg = make_config(
        experiment_id="threshold_smoke",
        ensemble=DENSE_SHAPE,
        densities=[1.0, 0.05],
        algorithms=["cosamp"],
        t=0.98,
        seed=20140604,
    )
    dense, sparse_ = run_threshold(cfg, workers=4, progress=False)
    assert sparse_.estimate.r_hat >= dense.estimate.r_hat + 3


@pytest.mark.parametrize("template, dense_target, sparse_target", [
    ("ensemble_table_normal", 39, 46),
    ("ensemble_table_uniform", 39, 45),
    ("ensemble_table_bernoulli", 39, 42),
    ("ensemble_table_circulant", 39, 46),
])
def test_ensemble_table(tmp_path, template, dense_target, sparse_target):
    cfg = load_experiment_config(template).model_copy(update={"output": str(tmp_path)})
    dense, sparse_ = run_threshold(cfg, workers=8, progress=False)
    assert abs(dense.estimate.r_hat - dense_target) <= 3
    assert abs(sparse_.estimate.r_hat - sparse_target) <= 3


@pytest.mark.parametrize("algorithm", ["lp", "omp", "cosamp"])
def test_density_sweep_peaks_at_moderate_density(tmp_path, algorithm):
    cfg = load_experiment_config("density_sweep").model_copy(
        update={"output": str(tmp_path), "algorithms": [Algorithm(algorithm)]}
    )
    runs = run_threshold(cfg, workers=8, progress=False)
    r_hat = {run.density: run.estimate.r_hat for run in runs}
    best = max(r_hat.values())
    peaks = [s for s, r in r_hat.items() if r == best]
    assert any(0.04 <= s <= 0.12 for s in peaks)
    assert r_hat[0.01] < best
