import math

import numpy as np
import pytest
from hypothesis import given, settings

from conftest import formulas
from stlkernel.formula import GEQ, LEQ, And, Atom, Eventually, Globally, Not, TimeWindow, TrueF
from stlkernel.formula_gen import FormulaGenConfig, sample_corpus
from stlkernel.kernel import (
    DegenerateFormulaError,
    KernelSample,
    add_jitter,
    cross_gram,
    expected_robustness,
    gaussian_kernel,
    gram,
    normalized_kernel,
    raw_kernel,
    read_gram,
    satisfaction_probability,
    write_gram,
)
from stlkernel.trajectories import Mu0Config, Trajectory, sample_mu0, sample_mu0_values


def mu0_sample(count=200, seed=0):
    values, _ = sample_mu0_values(Mu0Config(seed=seed), count)
    return KernelSample(values, 1.0)


@pytest.fixture(scope="module")
def sample():
    return mu0_sample(300, 1)


def constant_sample(c, n=21):
    return KernelSample(np.full((1, n), c), 1.0)


@pytest.mark.parametrize("c", [0.5, 2.0, -3.0])
def test_raw_kernel_constant_trajectory(c):
    phi = Atom(GEQ, 0.0)
    assert raw_kernel(phi, phi, constant_sample(c)) == pytest.approx(21 * c * c, rel=1e-15)


def test_raw_kernel_left_riemann_weights():
    # h = 0.5 halves every quadrature weight
    values = np.full((1, 41), 2.0)
    phi = Atom(GEQ, 0.0)
    assert raw_kernel(phi, phi, KernelSample(values, 0.5)) == pytest.approx(41 * 4 * 0.5)


def test_normalized_and_gaussian_anchors(sample):
    phi = Eventually(And(Atom(GEQ, 0.3), Globally(Atom(LEQ, 1.2))))
    assert normalized_kernel(phi, phi, sample) == 1.0
    assert normalized_kernel(phi, Not(phi), sample) == pytest.approx(-1.0, abs=1e-12)
    assert gaussian_kernel(phi, phi, sample, 0.3) == 1.0
    assert gaussian_kernel(phi, Not(phi), sample, 1.0) == pytest.approx(math.exp(-2.0), rel=1e-9)


def test_small_grams(sample):
    phi = Atom(GEQ, 0.5)
    g = gram([phi], sample)
    np.testing.assert_array_equal(g.entries, [[1.0]])
    g2 = gram([phi, Not(phi)], sample)
    np.testing.assert_allclose(g2.entries, [[1, -1], [-1, 1]], atol=1e-12)
    np.testing.assert_allclose(g2.eigvalsh(), [0.0, 2.0], atol=1e-12)


@settings(max_examples=50)
@given(formulas(max_leaves=5, windowed=False), formulas(max_leaves=5, windowed=False))
def test_cauchy_schwarz_and_antisymmetry(phi, psi):
    s = mu0_sample(50, 2)
    try:
        k = normalized_kernel(phi, psi, s)
    except DegenerateFormulaError:
        return
    assert -1.0 <= k <= 1.0
    raw = raw_kernel(phi, psi, s)
    assert raw_kernel(Not(phi), psi, s) == -raw


def test_gram_invariants(sample):
    corpus = sample_corpus(FormulaGenConfig(seed=3), 40)
    for kind, sigma in (("normalized", None), ("gaussian", 0.4), ("raw", None)):
        g = gram(corpus, sample, kind, sigma)
        np.testing.assert_array_equal(g.entries, g.entries.T)
        if kind != "raw":
            np.testing.assert_array_equal(np.diag(g.entries), 1.0)
        if kind == "gaussian":
            assert np.all((g.entries > 0) & (g.entries <= 1))
        eig = g.eigvalsh()
        assert eig.min() >= -1e-9 * eig.max()


def test_gram_is_deterministic():
    corpus = sample_corpus(FormulaGenConfig(seed=4), 20)
    a, b = mu0_sample(100, 5), mu0_sample(100, 5)
    assert a.fingerprint == b.fingerprint
    np.testing.assert_array_equal(gram(corpus, a).entries, gram(corpus, b).entries)
    assert mu0_sample(100, 6).fingerprint != a.fingerprint


def test_cross_gram_matches_gram(sample):
    corpus = sample_corpus(FormulaGenConfig(seed=8), 10)
    full = gram(corpus, sample).entries
    np.testing.assert_allclose(cross_gram(corpus[:4], corpus, sample), full[:4], atol=1e-14)
    assert np.all(cross_gram(corpus[:3], corpus[:3], sample)[np.eye(3, dtype=bool)] == 1.0)


def test_degenerate_and_true_formulae():
    s = constant_sample(0.0)
    with pytest.raises(DegenerateFormulaError) as info:
        gram([Atom(GEQ, 1.0), Atom(GEQ, 0.0)], s)
    assert info.value.indices == [1]
    with pytest.raises(ValueError):
        raw_kernel(TrueF(), Atom(GEQ, 0.0), s)
    with pytest.raises(ValueError):
        gram([Atom(GEQ, 0.0)], s, "gaussian")
    with pytest.raises(ValueError, match="not finite"):
        raw_kernel(Eventually(Atom(GEQ, 0.0), TimeWindow(3, 5)), Atom(GEQ, 0.0), constant_sample(1.0))


def test_jitter(sample):
    g = gram(sample_corpus(FormulaGenConfig(seed=9), 5), sample)
    j = add_jitter(g)
    assert j.jitter == pytest.approx(1e-8)
    np.testing.assert_allclose(np.diag(j.entries), 1.0 + 1e-8)


def test_mc_convergence_rate():
    phi, psi = Eventually(Atom(GEQ, 0.5)), Globally(Atom(LEQ, 1.0))
    ms = [250, 1000, 4000]
    spread = []
    for m in ms:
        vals = [raw_kernel(phi, psi, mu0_sample(m, 100 + s)) for s in range(20)]
        spread.append(np.std(vals, ddof=1))
    slope = np.polyfit(np.log(ms), np.log(spread), 1)[0]
    assert -0.8 < slope < -0.25


def test_expected_robustness():
    s = mu0_sample(4000, 11)
    phi = Atom(GEQ, 0.0)
    mean, se = expected_robustness(phi, s)
    assert abs(mean) <= 3 * se
    neg, _ = expected_robustness(Not(phi), s)
    assert neg == -mean
    assert expected_robustness(Atom(GEQ, 1.5), constant_sample(2.0)) == (0.5, 0.0)
    with pytest.raises(IndexError):
        expected_robustness(phi, s, 21)


def test_satisfaction_probability():
    s = mu0_sample(4000, 12)
    p, se = satisfaction_probability(Atom(GEQ, 0.0), s)
    assert abs(p - 0.5) <= 3 * se
    assert satisfaction_probability(TrueF(), s) == (1.0, 0.0)


def test_kernel_sample_validation_and_cache():
    with pytest.raises(ValueError):
        KernelSample(np.zeros(5), 1.0)
    with pytest.raises(ValueError):
        KernelSample(np.zeros((2, 3)), 0.0)
    trajs = sample_mu0(Mu0Config(seed=3), 4)
    s = KernelSample.from_trajectories(trajs)
    assert s.trajectories() == trajs
    phi = Atom(GEQ, 0.0)
    assert s.signals(phi) is s.signals(phi)
    s.clear_cache()
    with pytest.raises(ValueError):
        KernelSample.from_trajectories([trajs[0], Trajectory(0.0, 0.5, trajs[1].values)])


def test_gram_file_roundtrip(tmp_path, sample):
    corpus = sample_corpus(FormulaGenConfig(seed=10), 6)
    g = gram(corpus, sample, "gaussian", 0.5)
    write_gram(g, tmp_path / "gram.csv", tmp_path / "gram.json", {"seed": 1})
    back = read_gram(tmp_path / "gram.csv", tmp_path / "gram.json")
    np.testing.assert_array_equal(back.entries, g.entries)
    assert back.formulas == corpus and back.sigma == 0.5 and back.fingerprint == sample.fingerprint
    assert back.metadata["seed"] == 1
