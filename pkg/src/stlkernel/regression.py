"""Kernel regression over formula space.

Four estimators share one interface: they are fitted on a Gram matrix of
training formulae and predict from the kernel row between a new formula and
the training set. Kernel rows are computed on the same trajectory sample
that produced the training Gram matrix.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import scipy.linalg

from .formula import Formula, parse_formula, print_formula
from .kernel import GramMatrix, KernelSample, cross_gram

__all__ = [
    "TrainingSet",
    "ConvergenceError",
    "Regressor",
    "NadarayaWatson",
    "KNearestNeighbors",
    "KernelRidge",
    "SupportVectorRegression",
    "METHODS",
    "make_regressor",
    "fit",
    "predict",
    "predict_many",
    "evaluate_mse",
    "mse",
    "split",
    "solve_svr_dual",
    "read_training_set",
    "write_training_set",
]

TARGET_KINDS = ("robustness", "satprob")


@dataclass
class TrainingSet:
    formulas: list
    targets: np.ndarray
    kind: str = "robustness"
    stderr: Optional[np.ndarray] = None

    def __post_init__(self):
        self.formulas = list(self.formulas)
        self.targets = np.asarray(self.targets, dtype=float)
        if self.kind not in TARGET_KINDS:
            raise ValueError(f"target kind must be one of {TARGET_KINDS}")
        if len(self.formulas) != self.targets.size:
            raise ValueError("formulas and targets must have equal length")
        if not np.all(np.isfinite(self.targets)):
            raise ValueError("targets must be finite")
        if self.kind == "satprob" and np.any((self.targets < 0) | (self.targets > 1)):
            raise ValueError("satisfaction probabilities must lie in [0, 1]")

    def __len__(self) -> int:
        return len(self.formulas)

    def subset(self, idx) -> "TrainingSet":
        idx = np.asarray(idx, dtype=int)
        se = None if self.stderr is None else np.asarray(self.stderr)[idx]
        return TrainingSet([self.formulas[i] for i in idx], self.targets[idx], self.kind, se)


def split(data: TrainingSet, fraction: float, seed: int) -> tuple[TrainingSet, TrainingSet]:
    """Shuffle and cut into ``round(fraction * n)`` training and the rest test items."""
    if not 0 < fraction < 1:
        raise ValueError("fraction must lie strictly between 0 and 1")
    n = len(data)
    perm = np.random.Generator(np.random.PCG64(seed)).permutation(n)
    n_train = min(max(int(round(fraction * n)), 1), n - 1)
    return data.subset(perm[:n_train]), data.subset(perm[n_train:])


class ConvergenceError(RuntimeError):
    def __init__(self, iterations: int, violation: float):
        self.iterations = iterations
        self.violation = violation
        super().__init__(f"SVR solver stopped after {iterations} iterations with KKT violation {violation:.3g}")


# -------------------------------------------------------------- estimators


@dataclass
class Regressor:
    """Common state: training formulae, targets and the kernel used for prediction."""

    formulas: list = field(default_factory=list, init=False)
    targets: np.ndarray = field(default=None, init=False, repr=False)
    target_kind: str = field(default="robustness", init=False)
    fingerprint: str = field(default="", init=False)

    method = ""
    kernel_kind = "gaussian"

    @property
    def sigma(self) -> Optional[float]:
        return getattr(self, "bandwidth", None)

    def _store(self, g: GramMatrix, targets, target_kind: str) -> np.ndarray:
        y = np.asarray(targets, dtype=float)
        if y.size != g.n:
            raise ValueError("targets must match the Gram matrix size")
        self.formulas = list(g.formulas)
        self.targets = y
        self.target_kind = target_kind
        self.fingerprint = g.fingerprint
        return y

    def _require_gaussian(self, g: GramMatrix) -> None:
        if g.kind != "gaussian":
            raise ValueError(f"{self.method} needs a gaussian Gram matrix, got {g.kind!r}")
        if g.sigma is not None and not np.isclose(g.sigma, self.bandwidth):
            raise ValueError("Gram bandwidth does not match the regressor bandwidth")

    def kernel_rows(self, formulas: Sequence[Formula], sample: KernelSample) -> np.ndarray:
        return cross_gram(list(formulas), self.formulas, sample, self.kernel_kind, self.sigma)

    def fit(self, g: GramMatrix, targets, target_kind: str = "robustness"):
        raise NotImplementedError

    def predict_from_kernel(self, rows: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def predict_kernel_rows(self, rows: np.ndarray) -> np.ndarray:
        pred = self.predict_from_kernel(np.atleast_2d(rows))
        if self.target_kind == "satprob":
            pred = np.clip(pred, 0.0, 1.0)
        return pred

    def hyper(self) -> dict:
        return {}

    def state(self) -> dict:
        return {}


@dataclass
class NadarayaWatson(Regressor):
    bandwidth: float = 0.5
    method = "nw"

    def fit(self, g, targets, target_kind="robustness"):
        self._require_gaussian(g)
        self._store(g, targets, target_kind)
        return self

    def predict_from_kernel(self, rows):
        w = rows
        total = w.sum(axis=1)
        # far from every training formula all weights underflow; fall back to the mean
        safe = np.where(total > 0, total, 1.0)
        return np.where(total > 0, (w @ self.targets) / safe, self.targets.mean())

    def hyper(self):
        return {"sigma": self.bandwidth}


@dataclass
class KNearestNeighbors(Regressor):
    k: int = 5
    method = "knn"
    kernel_kind = "normalized"

    @property
    def sigma(self):
        return None

    def fit(self, g, targets, target_kind="robustness"):
        if self.k < 1:
            raise ValueError("k must be at least 1")
        self._store(g, targets, target_kind)
        return self

    def predict_from_kernel(self, rows):
        # rows hold normalized kernel values; distance^2 = 2 - 2k
        dist = 2.0 - 2.0 * rows
        k = min(self.k, dist.shape[1])
        nearest = np.argsort(dist, axis=1, kind="stable")[:, :k]
        return self.targets[nearest].mean(axis=1)

    def hyper(self):
        return {"k": self.k}


@dataclass
class KernelRidge(Regressor):
    bandwidth: float = 0.5
    ridge: float = 1e-6
    method = "krr"
    alpha: np.ndarray = field(default=None, init=False, repr=False)
    jitter: float = field(default=0.0, init=False)

    def fit(self, g, targets, target_kind="robustness"):
        self._require_gaussian(g)
        if self.ridge < 0:
            raise ValueError("ridge must be non-negative")
        y = self._store(g, targets, target_kind)
        self.alpha, self.jitter = solve_ridge(g.entries, y, self.ridge)
        return self

    def predict_from_kernel(self, rows):
        return rows @ self.alpha

    def hyper(self):
        return {"sigma": self.bandwidth, "lambda": self.ridge}

    def state(self):
        return {"alpha": self.alpha.tolist(), "jitter": self.jitter}


def solve_ridge(k: np.ndarray, y: np.ndarray, ridge: float, refine: int = 2) -> tuple[np.ndarray, float]:
    """Solve ``(K + ridge I) alpha = y`` by Cholesky, adding jitter if ``K`` is not PD.

    Returns ``alpha`` and the jitter that had to be added (0 if none).
    """
    n = k.shape[0]
    a = k + ridge * np.eye(n)
    jitter = 0.0
    try:
        factor = scipy.linalg.cho_factor(a, lower=True)
    except np.linalg.LinAlgError:
        jitter = 1e-8 * float(np.trace(k)) / n
        a = a + jitter * np.eye(n)
        try:
            factor = scipy.linalg.cho_factor(a, lower=True)
        except np.linalg.LinAlgError as exc:
            raise np.linalg.LinAlgError("kernel ridge system is not positive definite after jitter") from exc
    alpha = scipy.linalg.cho_solve(factor, y)
    for _ in range(refine):
        alpha = alpha + scipy.linalg.cho_solve(factor, y - a @ alpha)
    return alpha, jitter


@dataclass
class SupportVectorRegression(Regressor):
    bandwidth: float = 0.5
    C: float = 10.0
    epsilon: float = 0.01
    tol: float = 1e-4
    max_iter: int = 100_000
    method = "svr"
    coef: np.ndarray = field(default=None, init=False, repr=False)
    bias: float = field(default=0.0, init=False)
    iterations: int = field(default=0, init=False)
    violation: float = field(default=0.0, init=False)

    def fit(self, g, targets, target_kind="robustness"):
        self._require_gaussian(g)
        if not self.C > 0 or self.epsilon < 0:
            raise ValueError("SVR needs C > 0 and epsilon >= 0")
        y = self._store(g, targets, target_kind)
        alpha, alpha_star, self.bias, self.iterations, self.violation = solve_svr_dual(
            g.entries, y, self.C, self.epsilon, self.tol, self.max_iter
        )
        self.coef = alpha - alpha_star
        return self

    def predict_from_kernel(self, rows):
        return rows @ self.coef + self.bias

    @property
    def support(self) -> np.ndarray:
        return np.flatnonzero(self.coef != 0)

    def hyper(self):
        return {"sigma": self.bandwidth, "C": self.C, "epsilon": self.epsilon}

    def state(self):
        return {"coef": self.coef.tolist(), "bias": self.bias, "iterations": self.iterations,
                "kkt_violation": self.violation}


def solve_svr_dual(k, y, C, epsilon, tol=1e-4, max_iter=100_000):
    """Epsilon-insensitive SVR dual by two-variable coordinate steps.

    The dual is written over ``a = [alpha; alpha*]`` with labels ``z = [+1; -1]``::

        min 1/2 a' Q a + p' a   s.t.  z' a = 0,  0 <= a <= C
        Q = (z z') * [[K, K], [K, K]],  p = [eps - y; eps + y]

    Each step picks the maximal violating pair with second-order gain and
    solves the pair sub-problem exactly. Stops when the KKT gap drops below
    ``tol``. Returns ``(alpha, alpha_star, bias, iterations, gap)``.
    """
    k = np.asarray(k, dtype=float)
    y = np.asarray(y, dtype=float)
    n = y.size
    z = np.concatenate([np.ones(n), -np.ones(n)])
    base = np.concatenate([np.arange(n), np.arange(n)])
    kd = np.diag(k)[base]
    a = np.zeros(2 * n)
    grad = np.concatenate([epsilon - y, epsilon + y])
    tau = 1e-12

    def q_col(i):
        return z * z[i] * k[base, base[i]]

    it = 0
    gap = np.inf
    while True:
        up = ((z > 0) & (a < C)) | ((z < 0) & (a > 0))
        low = ((z > 0) & (a > 0)) | ((z < 0) & (a < C))
        score = -z * grad
        m_up = np.where(up, score, -np.inf)
        i = int(np.argmax(m_up))
        g_max = m_up[i]
        g_min = np.min(np.where(low, score, np.inf))
        gap = g_max - g_min
        if gap < tol:
            break
        if it >= max_iter:
            raise ConvergenceError(it, float(gap))
        # second-order choice of the partner among violating lower-set indices
        b = g_max - score
        cand = low & (b > 0)
        quad = kd[i] + kd - 2.0 * k[base[i], base]
        quad = np.where(quad > 0, quad, tau)
        gain = np.where(cand, -(b * b) / quad, np.inf)
        j = int(np.argmin(gain))

        qi, qj = q_col(i), q_col(j)
        ai, aj = a[i], a[j]
        if z[i] != z[j]:
            quad_ij = kd[i] + kd[j] + 2.0 * qi[j]
            if quad_ij <= 0:
                quad_ij = tau
            delta = (-grad[i] - grad[j]) / quad_ij
            diff = ai - aj
            a[i] += delta
            a[j] += delta
            if diff > 0:
                if a[j] < 0:
                    a[j], a[i] = 0.0, diff
            elif a[i] < 0:
                a[i], a[j] = 0.0, -diff
            if diff > 0:
                if a[i] > C:
                    a[i], a[j] = C, C - diff
            elif a[j] > C:
                a[j], a[i] = C, C + diff
        else:
            quad_ij = kd[i] + kd[j] - 2.0 * qi[j]
            if quad_ij <= 0:
                quad_ij = tau
            delta = (grad[i] - grad[j]) / quad_ij
            total = ai + aj
            a[i] -= delta
            a[j] += delta
            if total > C:
                if a[i] > C:
                    a[i], a[j] = C, total - C
            elif a[j] < 0:
                a[j], a[i] = 0.0, total
            if total > C:
                if a[j] > C:
                    a[j], a[i] = C, total - C
            elif a[i] < 0:
                a[i], a[j] = 0.0, total
        grad += qi * (a[i] - ai) + qj * (a[j] - aj)
        it += 1

    # bias from free variables, else the midpoint of the feasible interval
    zg = z * grad
    free = (a > 0) & (a < C)
    if np.any(free):
        rho = float(zg[free].mean())
    else:
        at_ub = a >= C
        ub_mask = (at_ub & (z < 0)) | (~at_ub & (z > 0))
        lb_mask = (at_ub & (z > 0)) | (~at_ub & (z < 0))
        ub = float(np.min(zg[ub_mask], initial=np.inf))
        lb = float(np.max(zg[lb_mask], initial=-np.inf))
        rho = 0.5 * (ub + lb) if np.isfinite(ub) and np.isfinite(lb) else (ub if np.isfinite(ub) else lb)
    return a[:n].copy(), a[n:].copy(), -rho, it, float(gap)


METHODS = {
    "nw": NadarayaWatson,
    "knn": KNearestNeighbors,
    "krr": KernelRidge,
    "svr": SupportVectorRegression,
}


def make_regressor(method: str, sigma: float = 0.5, ridge: float = 1e-6, C: float = 10.0,
                   epsilon: float = 0.01, k: int = 5) -> Regressor:
    if method == "nw":
        return NadarayaWatson(bandwidth=sigma)
    if method == "knn":
        return KNearestNeighbors(k=k)
    if method == "krr":
        return KernelRidge(bandwidth=sigma, ridge=ridge)
    if method == "svr":
        return SupportVectorRegression(bandwidth=sigma, C=C, epsilon=epsilon)
    raise ValueError(f"unknown method {method!r}; choose from {sorted(METHODS)}")


def fit(method: str, gram_matrix: GramMatrix, targets, target_kind: str = "robustness", **hyper) -> Regressor:
    """Fit ``method`` on a Gram matrix; a normalized Gram is wrapped to the requested bandwidth."""
    reg = make_regressor(method, **hyper)
    g = gram_matrix
    if reg.kernel_kind == "gaussian" and g.kind == "normalized":
        g = g.to_gaussian(reg.sigma)
    return reg.fit(g, targets, target_kind)


def predict_many(reg: Regressor, formulas: Sequence[Formula], sample: KernelSample) -> np.ndarray:
    return reg.predict_kernel_rows(reg.kernel_rows(formulas, sample))


def predict(reg: Regressor, phi: Formula, sample: KernelSample) -> float:
    return float(predict_many(reg, [phi], sample)[0])


def mse(pred, targets) -> float:
    return float(np.mean((np.asarray(pred, dtype=float) - np.asarray(targets, dtype=float)) ** 2))


def evaluate_mse(reg: Regressor, test: TrainingSet, sample: KernelSample) -> float:
    return mse(predict_many(reg, test.formulas, sample), test.targets)


# -------------------------------------------------------------------- I/O


def write_training_set(data: TrainingSet, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["index", "formula", "target", "stderr", "kind"])
        se = data.stderr if data.stderr is not None else [float("nan")] * len(data)
        for i, (f, y, s) in enumerate(zip(data.formulas, data.targets, se)):
            w.writerow([i, print_formula(f), repr(float(y)), repr(float(s)), data.kind])


def read_training_set(path) -> TrainingSet:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise ValueError(f"no targets in {path}")
    kinds = {r["kind"] for r in rows}
    if len(kinds) != 1:
        raise ValueError("a targets file must hold a single target kind")
    return TrainingSet(
        [parse_formula(r["formula"]) for r in rows],
        [float(r["target"]) for r in rows],
        kinds.pop(),
        np.array([float(r["stderr"]) for r in rows]),
    )
