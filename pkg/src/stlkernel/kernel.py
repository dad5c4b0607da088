"""Monte-Carlo STL kernel over a fixed sample of trajectories.

The raw kernel of two formulae is the product of their robustness signals,
integrated over time with a left Riemann sum and averaged over the sample:

    k'(phi, psi) = (1/M) sum_xi  h * sum_t  rho(phi, xi, t) * rho(psi, xi, t)

It is normalized by the self-kernels, and optionally wrapped in a Gaussian
of the induced distance ``2 - 2 k``. Self-kernel, cross-kernel and
normalization always share the same sample, which keeps ``k(phi, phi) == 1``
and ``|k| <= 1`` exact for any finite sample.
"""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .formula import Formula, contains_true, parse_formula, print_formula
from .monitor import robustness_batch, satisfaction_batch
from .trajectories import Trajectory, stack_values

__all__ = [
    "DEGENERATE_EPS",
    "DegenerateFormulaError",
    "KernelSample",
    "GramMatrix",
    "raw_kernel",
    "normalized_kernel",
    "gaussian_kernel",
    "gaussian_from_normalized",
    "gram",
    "cross_gram",
    "add_jitter",
    "expected_robustness",
    "satisfaction_probability",
    "write_gram",
    "read_gram",
]

DEGENERATE_EPS = 1e-12


class DegenerateFormulaError(ValueError):
    """Formulae whose self-kernel is (numerically) zero on the sample."""

    def __init__(self, indices: Sequence[int], message: str = ""):
        self.indices = list(indices)
        super().__init__(message or f"degenerate self-kernel for formula index(es) {self.indices}")


class KernelSample:
    """An equally gridded batch of trajectories plus cached robustness signals.

    Robustness signals are cached per formula (formulae are hashable value
    objects), so each formula is monitored once no matter how many kernel
    entries use it.
    """

    def __init__(self, values, h: float, t0: float = 0.0, source: Optional[dict] = None):
        values = np.array(values, dtype=float)
        if values.ndim != 2 or values.shape[0] == 0 or values.shape[1] == 0:
            raise ValueError("kernel sample needs a non-empty (M, T) array of values")
        if not h > 0:
            raise ValueError("grid step must be positive")
        values.setflags(write=False)
        self.values = values
        self.h = float(h)
        self.t0 = float(t0)
        self.source = dict(source or {})
        self._cache: dict = {}

    @classmethod
    def from_trajectories(cls, trajs: Sequence[Trajectory], source: Optional[dict] = None) -> "KernelSample":
        if not trajs:
            raise ValueError("empty sample")
        return cls(stack_values(trajs), trajs[0].h, trajs[0].t0, source)

    @property
    def size(self) -> int:
        return self.values.shape[0]

    @property
    def n_points(self) -> int:
        return self.values.shape[1]

    @property
    def fingerprint(self) -> str:
        digest = hashlib.sha256()
        digest.update(np.array([self.t0, self.h], dtype="<f8").tobytes())
        digest.update(np.ascontiguousarray(self.values, dtype="<f8").tobytes())
        return digest.hexdigest()

    def trajectories(self) -> list[Trajectory]:
        return [Trajectory(self.t0, self.h, row) for row in self.values]

    def signals(self, f: Formula, cache: bool = True) -> np.ndarray:
        """Robustness of ``f`` on every trajectory and grid index, shape ``(M, T)``."""
        hit = self._cache.get(f)
        if hit is not None:
            return hit
        r = robustness_batch(f, self.values, self.h)
        r.setflags(write=False)
        if cache:
            self._cache[f] = r
        return r

    def clear_cache(self) -> None:
        self._cache.clear()


def _check_kernel_formula(f: Formula) -> None:
    if contains_true(f):
        raise ValueError(f"kernel formulae must not contain 'true': {print_formula(f)}")


def _raw(a: np.ndarray, b: np.ndarray, sample: KernelSample) -> float:
    return float(np.dot(a.ravel(), b.ravel())) * sample.h / sample.size


def raw_kernel(phi: Formula, psi: Formula, sample: KernelSample) -> float:
    feats = _feature_matrix([phi, psi], sample)
    return _raw(feats[0], feats[1], sample)


def normalized_kernel(phi: Formula, psi: Formula, sample: KernelSample) -> float:
    return float(cross_gram([phi], [psi], sample, "normalized")[0, 0])


def gaussian_from_normalized(k, sigma: float):
    if not sigma > 0:
        raise ValueError("sigma must be positive")
    return np.exp(-(2.0 - 2.0 * np.asarray(k, dtype=float)) / (2.0 * sigma * sigma))


def gaussian_kernel(phi: Formula, psi: Formula, sample: KernelSample, sigma: float) -> float:
    return float(gaussian_from_normalized(normalized_kernel(phi, psi, sample), sigma))


def _feature_matrix(formulas: Sequence[Formula], sample: KernelSample) -> np.ndarray:
    for f in formulas:
        _check_kernel_formula(f)
    m = np.empty((len(formulas), sample.size * sample.n_points))
    for i, f in enumerate(formulas):
        m[i] = sample.signals(f).ravel()
        if not np.all(np.isfinite(m[i])):
            # a window reaching past the trace end leaves F/G/U with an empty range
            raise ValueError(f"robustness is not finite on the sample: {print_formula(f)}")
    return m


def _self_kernels(feats: np.ndarray, sample: KernelSample) -> np.ndarray:
    return np.einsum("ij,ij->i", feats, feats) * sample.h / sample.size


def cross_gram(
    rows: Sequence[Formula],
    cols: Sequence[Formula],
    sample: KernelSample,
    kind: str = "normalized",
    sigma: Optional[float] = None,
) -> np.ndarray:
    """Kernel values between every formula in ``rows`` and every one in ``cols``."""
    _check_kind(kind, sigma)
    fr = _feature_matrix(rows, sample)
    fc = fr if cols is rows else _feature_matrix(cols, sample)
    raw = (fr @ fc.T) * (sample.h / sample.size)
    if kind == "raw":
        return raw
    dr = _self_kernels(fr, sample)
    dc = dr if cols is rows else _self_kernels(fc, sample)
    bad = sorted(set(np.flatnonzero(dr <= DEGENERATE_EPS).tolist()))
    if bad:
        raise DegenerateFormulaError(bad)
    bad_c = np.flatnonzero(dc <= DEGENERATE_EPS).tolist()
    if bad_c:
        raise DegenerateFormulaError(bad_c, f"degenerate self-kernel for column formula(s) {bad_c}")
    k = raw / np.sqrt(dr)[:, None] / np.sqrt(dc)[None, :]
    np.clip(k, -1.0, 1.0, out=k)
    # identical formulae have identical signals: their similarity is exactly one
    col_pos: dict = {}
    for j, f in enumerate(cols):
        col_pos.setdefault(f, []).append(j)
    for i, f in enumerate(rows):
        if f in col_pos:
            k[i, col_pos[f]] = 1.0
    if kind == "normalized":
        return k
    return gaussian_from_normalized(k, sigma)


def _check_kind(kind: str, sigma: Optional[float]) -> None:
    if kind not in ("raw", "normalized", "gaussian"):
        raise ValueError(f"unknown kernel kind {kind!r}")
    if kind == "gaussian" and not (sigma is not None and sigma > 0):
        raise ValueError("gaussian kernel needs a positive sigma")


@dataclass
class GramMatrix:
    formulas: list
    entries: np.ndarray
    kind: str
    sigma: Optional[float] = None
    fingerprint: str = ""
    jitter: float = 0.0
    metadata: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return len(self.formulas)

    def eigvalsh(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.entries)

    def to_gaussian(self, sigma: float) -> "GramMatrix":
        if self.kind != "normalized":
            raise ValueError("only a normalized Gram matrix can be wrapped in a Gaussian")
        g = gaussian_from_normalized(self.entries, sigma)
        np.fill_diagonal(g, 1.0)
        return GramMatrix(self.formulas, g, "gaussian", sigma, self.fingerprint, 0.0, dict(self.metadata))


def gram(
    corpus: Sequence[Formula],
    sample: KernelSample,
    kind: str = "normalized",
    sigma: Optional[float] = None,
) -> GramMatrix:
    corpus = list(corpus)
    entries = cross_gram(corpus, corpus, sample, kind, sigma)
    # mirror the upper triangle so symmetry is exact
    upper = np.triu(entries)
    entries = upper + np.triu(entries, 1).T
    if kind != "raw":
        np.fill_diagonal(entries, 1.0)
    return GramMatrix(corpus, entries, kind, sigma, sample.fingerprint, 0.0, {"sample": sample.source})


def add_jitter(g: GramMatrix, scale: float = 1e-8) -> GramMatrix:
    """Copy of ``g`` with ``scale * trace / n`` added to the diagonal."""
    lam = scale * float(np.trace(g.entries)) / g.n
    entries = g.entries + lam * np.eye(g.n)
    return GramMatrix(g.formulas, entries, g.kind, g.sigma, g.fingerprint, g.jitter + lam, dict(g.metadata))


# ------------------------------------------------------------- estimators


def _check_t(sample: KernelSample, t_index: int) -> None:
    if not 0 <= t_index < sample.n_points:
        raise IndexError(f"t_index {t_index} out of range for {sample.n_points} grid points")


def expected_robustness(phi: Formula, sample: KernelSample, t_index: int = 0) -> tuple[float, float]:
    """Sample mean of the robustness at ``t_index`` and its standard error."""
    _check_t(sample, t_index)
    r = robustness_batch(phi, sample.values, sample.h)[:, t_index]
    m = r.size
    stderr = float(r.std(ddof=1) / np.sqrt(m)) if m > 1 else 0.0
    return float(r.mean()), stderr


def satisfaction_probability(phi: Formula, sample: KernelSample, t_index: int = 0) -> tuple[float, float]:
    """Fraction of trajectories satisfying ``phi`` at ``t_index`` with its binomial standard error."""
    _check_t(sample, t_index)
    s = satisfaction_batch(phi, sample.values, sample.h)[:, t_index]
    p = float(s.mean())
    return p, float(np.sqrt(p * (1.0 - p) / s.size))


# -------------------------------------------------------------------- I/O


def write_gram(g: GramMatrix, csv_path, json_path, extra: Optional[dict] = None) -> None:
    with open(csv_path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["index"] + [str(j) for j in range(g.n)])
        for i, row in enumerate(g.entries):
            w.writerow([i] + [repr(float(v)) for v in row])
    meta = {
        "corpus": [print_formula(f) for f in g.formulas],
        "kind": g.kind,
        "sigma": g.sigma,
        "fingerprint": g.fingerprint,
        "jitter": g.jitter,
        **g.metadata,
        **(extra or {}),
    }
    with open(json_path, "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_gram(csv_path, json_path) -> GramMatrix:
    with open(json_path) as fh:
        meta = json.load(fh)
    with open(csv_path, newline="") as fh:
        rows = list(csv.reader(fh))[1:]
    entries = np.array([[float(v) for v in r[1:]] for r in rows])
    formulas = [parse_formula(t) for t in meta.pop("corpus")]
    return GramMatrix(
        formulas,
        entries,
        meta.pop("kind"),
        meta.pop("sigma"),
        meta.pop("fingerprint"),
        meta.pop("jitter", 0.0),
        meta,
    )
