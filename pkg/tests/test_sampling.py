import math

import numpy as np
import pytest
from scipy import stats

from labelgen.formats import LabeledSample
from labelgen.sampling import (
    CategoricalDist,
    EnsemblePrediction,
    FilterConfig,
    confidence_rejection,
    js_divergence,
    nucleus_topk_sample,
    nucleus_topk_support,
    sample_uncertainty,
    truncated_normal,
    uncertainty_filter,
)

from .oracles import truncated_normal_variance


# ------------------------------------------------------------------ config

def test_filter_config_defaults():
    cfg = FilterConfig()
    assert (cfg.truncation_psi, cfg.rejection_rate) == (0.9, 0.9)
    assert (cfg.nucleus_p, cfg.top_k, cfg.uncertainty_fraction) == (0.92, 200, 0.10)


def test_filter_config_validation():
    with pytest.raises(ValueError):
        FilterConfig(rejection_rate=1.0)
    with pytest.raises(ValueError):
        FilterConfig(nucleus_p=0.0)
    with pytest.raises(ValueError):
        FilterConfig(truncation_psi=-1.0)


def test_filter_config_file_roundtrip(tmp_path):
    cfg = FilterConfig(truncation_psi=0.5, rejection_rate=0.8, top_k=50)
    path = tmp_path / "filters.cfg"
    cfg.to_file(path)
    assert FilterConfig.from_file(path) == cfg


def test_filter_config_override_ignores_none():
    cfg = FilterConfig().override(rejection_rate=0.5, top_k=None)
    assert cfg.rejection_rate == 0.5 and cfg.top_k == 200


# ------------------------------------------------------------------ truncation

def test_truncated_normal_respects_bound():
    rng = np.random.default_rng(0)
    z = truncated_normal(10_000, 0.9, rng)
    assert np.abs(z).max() <= 0.9


def test_truncated_normal_wide_bound_unit_variance():
    rng = np.random.default_rng(1)
    z = truncated_normal(100_000, 8.0, rng)
    assert z.var() == pytest.approx(1.0, abs=0.02)


def test_truncated_normal_tight_bound_variance():
    expected = truncated_normal_variance(0.9)
    assert expected == pytest.approx(0.242, abs=0.001)
    rng = np.random.default_rng(2)
    z = truncated_normal(100_000, 0.9, rng)
    assert z.var() == pytest.approx(expected, abs=0.01)


def test_truncated_normal_reproducible():
    a = truncated_normal(64, 0.9, np.random.default_rng(5))
    b = truncated_normal(64, 0.9, np.random.default_rng(5))
    np.testing.assert_array_equal(a, b)


# ------------------------------------------------------------------ nucleus

def test_nucleus_one_hot_always_that_index():
    probs = np.zeros(6)
    probs[3] = 1.0
    rng = np.random.default_rng(3)
    draws = nucleus_topk_sample(probs, 0.92, 200, rng, size=100)
    assert (draws == 3).all()


def test_nucleus_support_example():
    support, renorm = nucleus_topk_support([0.5, 0.3, 0.15, 0.05], 0.92, 200)
    np.testing.assert_array_equal(support, [0, 1, 2])
    np.testing.assert_allclose(renorm, [10 / 19, 6 / 19, 3 / 19])


def test_nucleus_topk_cap_example():
    support, renorm = nucleus_topk_support([0.5, 0.3, 0.15, 0.05], 0.92, 2)
    np.testing.assert_array_equal(support, [0, 1])
    np.testing.assert_allclose(renorm, [0.625, 0.375])


def test_nucleus_tie_break_by_index():
    support, _ = nucleus_topk_support([0.25, 0.25, 0.25, 0.25], 0.5, 200)
    np.testing.assert_array_equal(support, [0, 1])


def test_nucleus_empirical_frequencies_chi_squared():
    rng = np.random.default_rng(2024)
    for trial in range(10):
        probs = rng.dirichlet(np.full(12, 1.5)) * 0.9 + 0.1 / 12
        probs = probs / probs.sum()
        support, renorm = nucleus_topk_support(probs, 0.92, 8)
        draws = nucleus_topk_sample(probs, 0.92, 8, rng, size=100_000)
        assert set(np.unique(draws)) <= set(support.tolist())
        counts = np.array([(draws == s).sum() for s in support])
        p_value = stats.chisquare(counts, 100_000 * renorm).pvalue
        assert p_value > 0.01


def test_nucleus_never_outside_support():
    rng = np.random.default_rng(6)
    for _ in range(20):
        probs = rng.dirichlet(np.ones(20))
        support, _ = nucleus_topk_support(probs, 0.7, 5)
        draws = nucleus_topk_sample(probs, 0.7, 5, rng, size=500)
        assert set(np.unique(draws)) <= set(support.tolist())


def test_categorical_dist_validation():
    with pytest.raises(ValueError):
        CategoricalDist(np.array([0.5, 0.6]))
    with pytest.raises(ValueError):
        CategoricalDist(np.array([-0.1, 1.1]))


# ------------------------------------------------------------------ js divergence

def test_js_identical_zero():
    p = np.array([0.2, 0.3, 0.5])
    assert js_divergence([p, p]) == 0.0
    assert js_divergence([p] * 16) == 0.0


def test_js_disjoint_ln2():
    value = js_divergence([np.array([1.0, 0.0]), np.array([0.0, 1.0])])
    assert value == pytest.approx(math.log(2), abs=1e-12)


def test_js_bounds():
    rng = np.random.default_rng(7)
    for n in (2, 4, 16):
        dists = [rng.dirichlet(np.ones(6)) for _ in range(n)]
        value = js_divergence(dists)
        assert 0.0 <= value <= math.log(n) + 1e-12


def test_js_support_mismatch():
    with pytest.raises(ValueError):
        js_divergence([np.array([1.0, 0.0]), np.array([0.5, 0.25, 0.25])])
    with pytest.raises(ValueError):
        js_divergence([np.array([1.0, 0.0])])


# ------------------------------------------------------------------ uncertainty

def test_sample_uncertainty_identical_heads_zero():
    head = np.zeros((2, 2, 2))
    head[..., 0] = 1.0
    pred = EnsemblePrediction(np.repeat(head[None], 4, axis=0))
    assert sample_uncertainty(pred) == 0.0


def test_sample_uncertainty_single_pixel_ln2():
    probs = np.array([[[[1.0, 0.0]]], [[[0.0, 1.0]]]])
    assert sample_uncertainty(EnsemblePrediction(probs)) == pytest.approx(math.log(2))


def test_sample_uncertainty_bounded_by_ln_k():
    rng = np.random.default_rng(8)
    k = 6
    probs = rng.dirichlet(np.ones(3), size=(k, 4, 4))
    assert sample_uncertainty(EnsemblePrediction(probs)) <= math.log(k)


def test_ensemble_validation():
    with pytest.raises(ValueError):
        EnsemblePrediction(np.ones((1, 2, 2, 2)) * 0.5)  # K < 2
    with pytest.raises(ValueError):
        EnsemblePrediction(np.full((2, 2, 2, 2), 0.6))  # sums != 1


# ------------------------------------------------------------------ filters

def _scored(ids, confidence=None, uncertainty=None):
    samples = []
    for i, sid in enumerate(ids):
        samples.append(
            LabeledSample(
                id=sid,
                class_id=1,
                provenance="toy",
                confidence=None if confidence is None else confidence[i],
                uncertainty=None if uncertainty is None else uncertainty[i],
            )
        )
    return samples


def test_uncertainty_filter_zero_fraction_identity():
    samples = _scored(["a", "b"], uncertainty=[0.5, 0.1])
    assert uncertainty_filter(samples, 0.0) == samples


def test_uncertainty_filter_removes_single_max():
    ids = [f"s{i}" for i in range(10)]
    samples = _scored(ids, uncertainty=[0.1 * i for i in range(10)])
    kept = uncertainty_filter(samples, 0.10)
    assert [s.id for s in kept] == ids[:9]


def test_uncertainty_filter_tie_drops_largest_id():
    ids = [f"s{i}" for i in range(10)]
    scores = [0.0] * 7 + [0.9, 0.9, 0.9]
    samples = _scored(ids, uncertainty=scores)
    kept = uncertainty_filter(samples, 0.10)
    assert [s.id for s in kept] == ids[:9]  # s9 is the tied sample with largest id


def test_uncertainty_filter_preserves_order():
    ids = ["d", "b", "c", "a"]
    samples = _scored(ids, uncertainty=[0.1, 0.9, 0.2, 0.3])
    kept = uncertainty_filter(samples, 0.25)
    assert [s.id for s in kept] == ["d", "c", "a"]


def test_uncertainty_filter_requires_scores():
    with pytest.raises(ValueError, match="uncertainty"):
        uncertainty_filter(_scored(["a"], uncertainty=None), 0.1)


def test_confidence_rejection_zero_rate_identity():
    samples = _scored(["a", "b"], confidence=[0.5, 0.1])
    assert confidence_rejection(samples, 0.0) == samples


def test_confidence_rejection_keeps_single_max():
    ids = [f"s{i}" for i in range(10)]
    samples = _scored(ids, confidence=[0.05 * i for i in range(10)])
    kept = confidence_rejection(samples, 0.9)
    assert [s.id for s in kept] == ["s9"]


def test_confidence_rejection_matches_sort_oracle():
    rng = np.random.default_rng(9)
    ids = [f"s{i:02d}" for i in range(20)]
    conf = rng.random(20).tolist()
    samples = _scored(ids, confidence=conf)
    kept = confidence_rejection(samples, 0.9)
    expected = sorted(range(20), key=lambda i: (-conf[i], ids[i]))[: math.ceil(0.1 * 20)]
    assert {s.id for s in kept} == {ids[i] for i in expected}
    assert len(kept) == 2


def test_confidence_rejection_tie_keeps_smaller_id():
    samples = _scored(["b", "a", "c"], confidence=[0.9, 0.9, 0.1])
    kept = confidence_rejection(samples, 0.9)  # keeps ceil(0.3) = 1
    assert [s.id for s in kept] == ["a"]


def test_filters_monotone_in_rate_and_fraction():
    rng = np.random.default_rng(10)
    ids = [f"s{i:03d}" for i in range(40)]
    conf = rng.random(40).tolist()
    unc = rng.random(40).tolist()
    previous = None
    for rate in (0.0, 0.5, 0.9, 0.99):
        kept = {s.id for s in confidence_rejection(_scored(ids, confidence=conf), rate)}
        if previous is not None:
            assert kept <= previous
        previous = kept
    previous = None
    for fraction in (0.0, 0.5, 0.9, 0.99):
        kept = {s.id for s in uncertainty_filter(_scored(ids, uncertainty=unc), fraction)}
        if previous is not None:
            assert kept <= previous
        previous = kept
