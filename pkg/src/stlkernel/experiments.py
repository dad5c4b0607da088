"""End-to-end regression experiments in formula space.

A run samples a formula corpus, estimates its targets (expected robustness
or satisfaction probability) under some trajectory measure, builds the STL
kernel on a second, independent sample, and sweeps the Gaussian bandwidth for
every regression method. Every random component takes its seed from one
master seed.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np

from .formula import Formula
from .formula_gen import FormulaGenConfig, sample_corpus
from .kernel import (
    DEGENERATE_EPS,
    GramMatrix,
    KernelSample,
    cross_gram,
    expected_robustness,
    gaussian_from_normalized,
    satisfaction_probability,
)
from .monitor import robustness_batch, satisfaction_batch
from .regression import TrainingSet, make_regressor, mse, split
from .seeding import derive_seed
from .ssa import SSAConfig, network_to_dict, resolve_model, sample_process_values
from .trajectories import Mu0Config, sample_mu0_values

__all__ = [
    "sigma_grid",
    "measure_sample",
    "estimate_targets",
    "estimate_both",
    "drop_degenerate",
    "sweep",
    "best_rows",
    "ExperimentConfig",
    "run_experiment",
]


def sigma_grid(lo: float = 0.05, hi: float = 5.0, n: int = 25) -> np.ndarray:
    return np.logspace(np.log10(lo), np.log10(hi), n)


def measure_sample(
    measure: str,
    count: int,
    seed: int,
    mu0: Optional[Mu0Config] = None,
    ssa: Optional[SSAConfig] = None,
    normalize: bool = True,
) -> KernelSample:
    """Trajectory sample from ``mu0`` or ``model:<name>`` / ``model:file:<path>``."""
    if measure == "mu0":
        cfg = Mu0Config(**{**asdict(mu0 or Mu0Config()), "seed": seed})
        values, _ = sample_mu0_values(cfg, count)
        source = {"measure": "mu0", "count": count, "mu0": asdict(cfg)}
        return KernelSample(values, cfg.h, cfg.a, source)
    if measure.startswith("model:"):
        net = resolve_model(measure[len("model:"):])
        cfg = SSAConfig(**{**asdict(ssa or SSAConfig()), "seed": seed})
        values = sample_process_values(net, cfg, count)
        if normalize:
            std = values.std()
            if not std > 0:
                raise ValueError("pooled variance is zero; cannot z-normalize")
            values = (values - values.mean()) / std
        source = {
            "measure": measure,
            "count": count,
            "ssa": asdict(cfg),
            "network": network_to_dict(net),
            "normalize": normalize,
        }
        return KernelSample(values, cfg.h, cfg.t0, source)
    raise ValueError(f"unknown measure {measure!r}; use 'mu0' or 'model:<name>'")


def estimate_targets(
    formulas: Sequence[Formula], sample: KernelSample, kind: str = "robustness", t_index: int = 0
) -> TrainingSet:
    est = expected_robustness if kind == "robustness" else satisfaction_probability
    if kind not in ("robustness", "satprob"):
        raise ValueError(f"unknown target kind {kind!r}")
    pairs = [est(f, sample, t_index) for f in formulas]
    return TrainingSet(list(formulas), [p[0] for p in pairs], kind, np.array([p[1] for p in pairs]))


def estimate_both(formulas: Sequence[Formula], sample: KernelSample, t_index: int = 0):
    """Expected robustness and satisfaction probability sets from one pass over the sample."""
    m = sample.size
    rob, rob_se, sat, sat_se = [], [], [], []
    for f in formulas:
        r = robustness_batch(f, sample.values, sample.h)[:, t_index]
        s = satisfaction_batch(f, sample.values, sample.h)[:, t_index]
        rob.append(r.mean())
        rob_se.append(r.std(ddof=1) / np.sqrt(m) if m > 1 else 0.0)
        p = s.mean()
        sat.append(p)
        sat_se.append(np.sqrt(p * (1 - p) / m))
    return (
        TrainingSet(list(formulas), rob, "robustness", np.array(rob_se)),
        TrainingSet(list(formulas), sat, "satprob", np.array(sat_se)),
    )


def drop_degenerate(formulas: Sequence[Formula], sample: KernelSample) -> tuple[list, list]:
    """Split off formulae whose self-kernel vanishes on ``sample``; returns ``(kept, dropped_indices)``."""
    kept, dropped = [], []
    for i, f in enumerate(formulas):
        r = sample.signals(f)
        if float(np.dot(r.ravel(), r.ravel())) * sample.h / sample.size <= DEGENERATE_EPS:
            dropped.append(i)
        else:
            kept.append(f)
    return kept, dropped


def sweep(
    train: TrainingSet,
    test: TrainingSet,
    sample: KernelSample,
    sigmas: Sequence[float],
    methods: Sequence[str] = ("nw", "knn", "krr", "svr"),
    ridge: float = 1e-6,
    C: float = 10.0,
    epsilon: float = 0.01,
    k: int = 5,
) -> list[dict]:
    """MSE on train and test for every method and bandwidth.

    The normalized kernel blocks are computed once and wrapped per bandwidth.
    KNN does not depend on the bandwidth and contributes one row; a
    mean-of-training-targets baseline is always reported as method ``mean``.
    """
    k_tt = cross_gram(train.formulas, train.formulas, sample, "normalized")
    k_tt = np.triu(k_tt) + np.triu(k_tt, 1).T
    np.fill_diagonal(k_tt, 1.0)
    k_st = cross_gram(test.formulas, train.formulas, sample, "normalized")
    rows = []
    base = float(train.targets.mean())
    rows.append(_row("mean", None, {}, mse(np.full(len(train), base), train.targets),
                     mse(np.full(len(test), base), test.targets)))
    if "knn" in methods:
        reg = make_regressor("knn", k=k)
        reg.fit(GramMatrix(train.formulas, k_tt, "normalized"), train.targets, train.kind)
        rows.append(_row("knn", None, reg.hyper(), mse(reg.predict_kernel_rows(k_tt), train.targets),
                         mse(reg.predict_kernel_rows(k_st), test.targets)))
    for sigma in sigmas:
        g_tt = gaussian_from_normalized(k_tt, sigma)
        np.fill_diagonal(g_tt, 1.0)
        g_st = gaussian_from_normalized(k_st, sigma)
        gm = GramMatrix(train.formulas, g_tt, "gaussian", float(sigma), sample.fingerprint)
        for method in methods:
            if method == "knn":
                continue
            reg = make_regressor(method, sigma=float(sigma), ridge=ridge, C=C, epsilon=epsilon)
            reg.fit(gm, train.targets, train.kind)
            rows.append(_row(method, float(sigma), reg.hyper(),
                             mse(reg.predict_kernel_rows(g_tt), train.targets),
                             mse(reg.predict_kernel_rows(g_st), test.targets)))
    return rows


def _row(method, sigma, hyper, mse_train, mse_test) -> dict:
    return {
        "method": method,
        "sigma": sigma,
        "lambda": hyper.get("lambda"),
        "C": hyper.get("C"),
        "epsilon": hyper.get("epsilon"),
        "k": hyper.get("k"),
        "mse_train": mse_train,
        "mse_test": mse_test,
    }


def best_rows(rows: Sequence[dict]) -> dict:
    """Lowest-test-MSE row per method."""
    best: dict = {}
    for r in rows:
        cur = best.get(r["method"])
        if cur is None or r["mse_test"] < cur["mse_test"]:
            best[r["method"]] = r
    return best


@dataclass
class ExperimentConfig:
    seed: int = 0
    n_train: int = 300
    n_test: int = 100
    target: str = "robustness"
    target_measure: str = "mu0"
    target_samples: int = 10_000
    kernel_measure: str = "mu0"
    kernel_samples: int = 1000
    t_index: int = 0
    normalize: bool = True
    methods: tuple = ("nw", "knn", "krr", "svr")
    sigmas: tuple = tuple(sigma_grid())
    ridge: float = 1e-6
    C: float = 10.0
    epsilon: float = 0.01
    k: int = 5
    mu0: Mu0Config = field(default_factory=Mu0Config)
    ssa: SSAConfig = field(default_factory=SSAConfig)
    formula_gen: FormulaGenConfig = field(default_factory=FormulaGenConfig)

    def component_seeds(self) -> dict:
        return {name: derive_seed(self.seed, name) for name in ("formulas", "targets", "kernel", "split")}


def run_experiment(cfg: ExperimentConfig, kernel_sample: Optional[KernelSample] = None,
                   target_set: Optional[TrainingSet] = None) -> dict:
    """Full sweep for one configuration; returns the data sets, the sample and the metric rows."""
    seeds = cfg.component_seeds()
    n = cfg.n_train + cfg.n_test
    if target_set is None:
        fg = FormulaGenConfig(**{**asdict(cfg.formula_gen), "seed": seeds["formulas"]})
        corpus = sample_corpus(fg, n)
        target_sample = measure_sample(cfg.target_measure, cfg.target_samples, seeds["targets"],
                                       cfg.mu0, cfg.ssa, cfg.normalize)
        target_set = estimate_targets(corpus, target_sample, cfg.target, cfg.t_index)
    if kernel_sample is None:
        kernel_sample = measure_sample(cfg.kernel_measure, cfg.kernel_samples, seeds["kernel"],
                                       cfg.mu0, cfg.ssa, cfg.normalize)
    kept, dropped = drop_degenerate(target_set.formulas, kernel_sample)
    if dropped:
        keep_idx = [i for i in range(len(target_set)) if i not in set(dropped)]
        target_set = target_set.subset(keep_idx)
    fraction = cfg.n_train / n
    train, test = split(target_set, fraction, seeds["split"])
    rows = sweep(train, test, kernel_sample, cfg.sigmas, cfg.methods, cfg.ridge, cfg.C, cfg.epsilon, cfg.k)
    return {
        "train": train,
        "test": test,
        "kernel_sample": kernel_sample,
        "rows": rows,
        "dropped": dropped,
        "seeds": seeds,
    }
