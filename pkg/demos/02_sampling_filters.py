"""
Sampling and filtering primitives
=================================

The four building blocks behind dataset filtering: truncated latents,
nucleus/top-k truncation of a categorical distribution, Jensen-Shannon
ensemble disagreement, and the two batch filters.
"""
import numpy as np

from labelgen.formats import LabeledSample
from labelgen.sampling import (
    confidence_rejection,
    js_divergence,
    nucleus_topk_support,
    truncated_normal,
    uncertainty_filter,
)

rng = np.random.default_rng(0)

# --- truncated latents: resample each coordinate until |z| <= psi
z = truncated_normal(100_000, 0.9, rng)
print(f"truncation 0.9: max|z|={np.abs(z).max():.3f}, variance={z.var():.3f} "
      "(untruncated would be 1.0)")

# --- nucleus + top-k: smallest prefix reaching 92% mass, capped at top-200
probs = np.array([0.5, 0.3, 0.15, 0.05])
support, renorm = nucleus_topk_support(probs, p=0.92, k=200)
print(f"\nnucleus p=0.92 on {probs.tolist()}: support={support.tolist()}, "
      f"renormalized={np.round(renorm, 4).tolist()}")
support_k2, renorm_k2 = nucleus_topk_support(probs, p=0.92, k=2)
print(f"same with k=2: support={support_k2.tolist()}, renormalized={renorm_k2.tolist()}")

# --- JS divergence: zero for agreeing heads, ln N at full disagreement
agree = [np.array([0.7, 0.3])] * 16
print(f"\nJS of 16 identical heads: {js_divergence(agree):.6f}")
disjoint = [np.array([1.0, 0.0]), np.array([0.0, 1.0])]
print(f"JS of 2 disjoint heads:   {js_divergence(disjoint):.6f} (ln 2 = {np.log(2):.6f})")

# --- batch filters keep exact counts with deterministic tie-breaks
samples = [
    LabeledSample(id=f"s{i:02d}", class_id=1, provenance="toy",
                  confidence=float(c), uncertainty=float(u))
    for i, (c, u) in enumerate(zip(rng.random(20), rng.random(20)))
]
kept = confidence_rejection(samples, rate=0.9)
print(f"\nconfidence rejection at 0.9 keeps {len(kept)}/20: {[s.id for s in kept]}")
kept = uncertainty_filter(samples, fraction=0.10)
print(f"uncertainty filter at 0.10 keeps {len(kept)}/20 "
      f"(dropped {sorted({s.id for s in samples} - {s.id for s in kept})})")
