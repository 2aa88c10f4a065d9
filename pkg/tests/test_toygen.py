import math

import numpy as np
import pytest
from scipy.stats import spearmanr

from labelgen.geometry import mask_stats
from labelgen.sampling import sample_uncertainty, truncated_normal
from labelgen.toygen import (
    FAMILIES,
    NUM_HEADS,
    ToyClassSpec,
    substream,
    toy_generate,
    toy_taxonomy,
)


def test_taxonomy_four_classes_one_per_family():
    taxonomy, specs = toy_taxonomy(4, seed=0)
    assert [s.shape_family for s in specs] == list(FAMILIES)
    assert sorted(taxonomy.classes) == [1, 2, 3, 4]
    assert taxonomy.groups["family"] == {1: 1, 2: 2, 3: 3, 4: 4}


def test_taxonomy_sixteen_classes_cycled():
    _, specs = toy_taxonomy(16, seed=0)
    for family in FAMILIES:
        assert sum(s.shape_family == family for s in specs) == 4


def test_taxonomy_deterministic():
    a = toy_taxonomy(8, seed=9)
    b = toy_taxonomy(8, seed=9)
    assert a[0] == b[0]
    assert a[1] == b[1]


def test_taxonomy_needs_four_classes():
    with pytest.raises(ValueError):
        toy_taxonomy(3, seed=0)


def _spec_and_z(index=0, seed=0):
    _, specs = toy_taxonomy(16, seed=0)
    spec = specs[index % 16]
    z = truncated_normal(8, 0.9, np.random.default_rng(seed))
    return spec, z


def test_generate_deterministic():
    spec, z = _spec_and_z()
    a = toy_generate(spec, z, seed=7, res=64)
    b = toy_generate(spec, z, seed=7, res=64)
    np.testing.assert_array_equal(a.image.data, b.image.data)
    np.testing.assert_array_equal(a.gt_mask.labels, b.gt_mask.labels)
    np.testing.assert_array_equal(a.ensemble.probs, b.ensemble.probs)
    assert a.confidence == b.confidence and a.disagreement == b.disagreement


def test_generate_invalid_resolution():
    spec, z = _spec_and_z()
    with pytest.raises(ValueError):
        toy_generate(spec, z, seed=0, res=100)


def test_zero_disagreement_one_hot_heads():
    spec, z = _spec_and_z()
    out = toy_generate(spec, z, seed=3, res=64, disagreement=0.0)
    assert out.ensemble.num_heads == NUM_HEADS
    fg = out.gt_mask.foreground()
    np.testing.assert_array_equal(out.ensemble.probs[:, :, :, 1] > 0.5, np.repeat(fg[None], NUM_HEADS, 0))
    assert sample_uncertainty(out.ensemble) == 0.0


def test_uncertainty_strictly_increasing_in_disagreement():
    _, specs = toy_taxonomy(16, seed=0)
    means = []
    for level in (0.0, 0.25, 0.5, 0.75):
        values = []
        for i in range(100):
            spec = specs[i % 16]
            z = truncated_normal(8, 0.9, substream(500 + i, 1))
            out = toy_generate(spec, z, seed=500 + i, res=64, disagreement=level)
            values.append(sample_uncertainty(out.ensemble))
        means.append(np.mean(values))
    assert means[0] < means[1] < means[2] < means[3]


def test_mask_class_label_matches_spec():
    spec, z = _spec_and_z(index=5)
    out = toy_generate(spec, z, seed=11, res=64)
    labels = set(np.unique(out.gt_mask.labels).tolist())
    assert labels == {0, spec.class_id}


def test_foreground_fraction_in_analytic_range():
    # closed-form areas exist for ellipses and axis-lengths of rectangles
    _, specs = toy_taxonomy(16, seed=0)
    rng = np.random.default_rng(13)
    for spec in specs:
        if spec.shape_family not in ("ellipse", "rectangle"):
            continue
        for trial in range(10):
            z = truncated_normal(8, 0.9, rng)
            out = toy_generate(spec, z, seed=int(rng.integers(1 << 32)), res=128)
            mi = mask_stats(out.gt_mask).mask_over_image
            s_lo, s_hi = spec.size_range
            a_lo, a_hi = spec.aspect_range
            if spec.shape_family == "ellipse":
                lo = math.pi / 4 * s_lo**2 * a_lo
                hi = math.pi / 4 * s_hi**2 * a_hi
            else:
                lo = s_lo**2 * a_lo
                hi = s_hi**2 * a_hi
            assert 0.95 * lo <= mi <= 1.05 * hi


def test_confidence_decreases_with_disagreement():
    spec, z = _spec_and_z()
    low = toy_generate(spec, z, seed=21, res=64, disagreement=0.0)
    high = toy_generate(spec, z, seed=21, res=64, disagreement=1.0)
    assert high.confidence < low.confidence


def test_uncertainty_ranks_track_injected_disagreement():
    _, specs = toy_taxonomy(16, seed=0)
    uncertainties, levels = [], []
    for i in range(200):
        spec = specs[i % 16]
        z = truncated_normal(8, 0.9, substream(9000 + i, 1))
        out = toy_generate(spec, z, seed=9000 + i, res=64)
        uncertainties.append(sample_uncertainty(out.ensemble))
        levels.append(out.disagreement)
    rho = spearmanr(uncertainties, levels).statistic
    assert rho > 0.95


def test_without_ensemble_matches_with_ensemble():
    spec, z = _spec_and_z(index=2)
    full = toy_generate(spec, z, seed=31, res=64, with_ensemble=True)
    lean = toy_generate(spec, z, seed=31, res=64, with_ensemble=False)
    assert lean.ensemble is None
    np.testing.assert_array_equal(full.image.data, lean.image.data)
    np.testing.assert_array_equal(full.gt_mask.labels, lean.gt_mask.labels)
    assert full.confidence == lean.confidence


def test_class_spec_validation():
    with pytest.raises(ValueError):
        ToyClassSpec(
            class_id=1, shape_family="blob", size_range=(0.4, 0.5),
            aspect_range=(0.8, 1.0), rotation_range=(0.0, 1.0),
            color_low=(0, 0, 0), color_high=(10, 10, 10), background_texture=0,
        )
    with pytest.raises(ValueError):
        ToyClassSpec(
            class_id=1, shape_family="ellipse", size_range=(0.4, 0.95),
            aspect_range=(0.8, 1.0), rotation_range=(0.0, 1.0),
            color_low=(0, 0, 0), color_high=(10, 10, 10), background_texture=0,
        )
