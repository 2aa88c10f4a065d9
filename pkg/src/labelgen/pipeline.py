"""Dataset synthesis: a sample source composed with filter stages.

Offline mode generates a candidate pool sized so the batch filters leave the
requested number of samples, applies confidence rejection then uncertainty
filtering, and writes images, masks and a manifest. Online mode is a
never-repeating stream that applies only cheap per-sample filters: the
confidence threshold is calibrated once from a warmup batch, and the
expensive ensemble-uncertainty stage is not used.

Sources are deterministic functions of a 64-bit seed counter, so any run is
reproducible and candidate generation can be distributed over disjoint
counter ranges without changing the result.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .formats import (
    ClassTaxonomy,
    DatasetManifest,
    LabeledSample,
    ManifestEntry,
    write_image,
    write_manifest,
    write_mask,
    write_taxonomy,
)
from .sampling import (
    FilterConfig,
    confidence_rejection,
    sample_uncertainty,
    truncated_normal,
    uncertainty_filter,
)
from .toygen import ToyClassSpec, injected_disagreement, substream, toy_generate, toy_taxonomy

WARMUP_SIZE = 1000
# warmup counters live in their own range so the yielded stream always
# starts at counter 0, with or without calibration
_WARMUP_BASE = 1 << 56


@dataclass(frozen=True)
class PipelineSpec:
    """Source, filter stages and output mode of one synthesis run."""

    source: str = "toy"
    filters: FilterConfig = field(default_factory=FilterConfig)
    mode: str = "offline"
    n: int = 0
    out_dir: Path | None = None
    seed: int = 0
    resolution: int = 64
    num_classes: int = 16
    latent_dim: int = 8
    name: str = "dataset"

    def __post_init__(self):
        if self.mode not in ("offline", "online"):
            raise ValueError(f"mode must be offline or online, got {self.mode!r}")
        if self.mode == "offline" and self.n < 1:
            raise ValueError("offline mode needs n >= 1")


def _sample_seed(root: int, counter: int) -> int:
    """Stable 64-bit per-sample seed derived from (root, counter)."""
    seq = np.random.SeedSequence(root, spawn_key=(counter,))
    return int(seq.generate_state(1, np.uint64)[0])


class ToySource:
    """Procedural source: each counter yields one independent labeled sample.

    Classes rotate round-robin over the taxonomy; the latent is drawn from a
    truncated normal under the configured truncation; injected disagreement
    is uniform in [0, 1) per sample.
    """

    def __init__(self, num_classes: int = 16, seed: int = 0, resolution: int = 64,
                 truncation_psi: float = 0.9, latent_dim: int = 8):
        self.taxonomy, self.specs = toy_taxonomy(num_classes, seed)
        self.seed = seed
        self.resolution = resolution
        self.truncation_psi = truncation_psi
        self.latent_dim = latent_dim

    @classmethod
    def from_spec(cls, spec: PipelineSpec) -> "ToySource":
        return cls(
            num_classes=spec.num_classes,
            seed=spec.seed,
            resolution=spec.resolution,
            truncation_psi=spec.filters.truncation_psi,
            latent_dim=spec.latent_dim,
        )

    def injected_disagreement(self, counter: int) -> float:
        """Disagreement level the generator will inject for this counter."""
        return injected_disagreement(_sample_seed(self.seed, counter))

    def generate(self, counter: int, need_ensemble: bool = True):
        """Return (LabeledSample, EnsemblePrediction or None) for a counter."""
        class_spec: ToyClassSpec = self.specs[counter % len(self.specs)]
        seed = _sample_seed(self.seed, counter)
        z = truncated_normal(self.latent_dim, self.truncation_psi, substream(seed, 1))
        out = toy_generate(class_spec, z, seed, self.resolution, with_ensemble=need_ensemble)
        sample = LabeledSample(
            id=f"toy-{counter:012d}",
            class_id=class_spec.class_id,
            provenance="toy",
            latent_seed=seed,
            confidence=out.confidence,
            image=out.image,
            mask=out.gt_mask,
        )
        return sample, out.ensemble


SOURCES = {"toy": ToySource.from_spec}


def make_source(spec: PipelineSpec):
    if spec.source not in SOURCES:
        raise ValueError(f"unknown source {spec.source!r}; registered: {sorted(SOURCES)}")
    return SOURCES[spec.source](spec)


def candidate_pool_size(n: int, rejection_rate: float, uncertainty_fraction: float) -> int:
    """Candidates needed so the batch filters leave n survivors."""
    return math.ceil(n / ((1.0 - rejection_rate) * (1.0 - uncertainty_fraction)))


def _score_candidates(source, start: int, stop: int, need_uncertainty: bool):
    """Generate counters [start, stop) and keep metadata-only scored samples."""
    scored = []
    for counter in range(start, stop):
        sample, ensemble = source.generate(counter, need_ensemble=need_uncertainty)
        if need_uncertainty:
            sample = replace(sample, uncertainty=sample_uncertainty(ensemble))
        scored.append(replace(sample, image=None, mask=None))
    return scored


def synth_offline(spec: PipelineSpec) -> DatasetManifest:
    """Generate, filter and write an offline dataset of exactly spec.n samples."""
    if spec.mode != "offline":
        raise ValueError("synth_offline needs an offline-mode spec")
    if spec.out_dir is None:
        raise ValueError("offline synthesis needs an output directory")
    source = make_source(spec)
    rate = spec.filters.rejection_rate
    fraction = spec.filters.uncertainty_fraction
    need_uncertainty = fraction > 0

    pool = candidate_pool_size(spec.n, rate, fraction)
    candidates: list[LabeledSample] = []
    while True:
        candidates.extend(
            _score_candidates(source, len(candidates), pool, need_uncertainty)
        )
        kept = candidates
        if rate > 0:
            kept = confidence_rejection(kept, rate)
        if fraction > 0:
            kept = uncertainty_filter(kept, fraction)
        if len(kept) >= spec.n:
            break
        pool += math.ceil(0.1 * pool)
    survivors = kept[: spec.n]

    counter_of = {s.id: i for i, s in enumerate(candidates)}
    out_dir = Path(spec.out_dir)
    (out_dir / "images").mkdir(parents=True, exist_ok=True)
    (out_dir / "masks").mkdir(parents=True, exist_ok=True)
    entries = []
    for slim in survivors:
        full, _ = source.generate(counter_of[slim.id], need_ensemble=False)
        image_path = f"images/{full.id}.ppm"
        mask_path = f"masks/{full.id}.pgm"
        write_image(full.image, out_dir / image_path)
        write_mask(full.mask, out_dir / mask_path)
        entries.append(
            ManifestEntry(
                id=full.id,
                class_id=full.class_id,
                image_path=image_path,
                mask_path=mask_path,
                provenance=full.provenance,
                latent_seed=full.latent_seed,
                confidence=full.confidence,
                uncertainty=slim.uncertainty,
            )
        )
    manifest = DatasetManifest(
        name=spec.name,
        entries=tuple(entries),
        metadata=_run_metadata(spec, pool=len(candidates)),
    )
    write_manifest(manifest, out_dir / "manifest.txt")
    taxonomy = getattr(source, "taxonomy", None)
    if taxonomy is not None:
        write_taxonomy(taxonomy, out_dir / "taxonomy.txt")
    return manifest


def _run_metadata(spec: PipelineSpec, **extra) -> dict[str, str]:
    f = spec.filters
    metadata = {
        "source": spec.source,
        "mode": spec.mode,
        "seed": str(spec.seed),
        "resolution": str(spec.resolution),
        "num_classes": str(spec.num_classes),
        "truncation_psi": repr(f.truncation_psi),
        "rejection_rate": repr(f.rejection_rate),
        "nucleus_p": repr(f.nucleus_p),
        "top_k": str(f.top_k),
        "uncertainty_fraction": repr(f.uncertainty_fraction),
    }
    for key, value in extra.items():
        metadata[key] = str(value)
    return metadata


class OnlineStream:
    """Never-repeating stream of filtered samples.

    Each pull advances a monotone seed counter. When rejection is enabled the
    acceptance threshold is the rate-quantile of confidences over a warmup
    batch generated from a dedicated counter range; the ensemble-uncertainty
    stage is never applied online. ``candidates`` and ``accepted`` expose the
    running totals.
    """

    def __init__(self, spec: PipelineSpec):
        if spec.mode != "online":
            raise ValueError("OnlineStream needs an online-mode spec")
        self.spec = spec
        self.source = make_source(spec)
        self.counter = 0
        self.candidates = 0
        self.accepted = 0
        self.threshold: float | None = None
        rate = spec.filters.rejection_rate
        if rate > 0:
            warm = [
                self.source.generate(_WARMUP_BASE + i, need_ensemble=False)[0].confidence
                for i in range(WARMUP_SIZE)
            ]
            self.threshold = float(np.quantile(warm, rate))

    def __iter__(self):
        return self

    def __next__(self) -> LabeledSample:
        while True:
            sample, _ = self.source.generate(self.counter, need_ensemble=False)
            self.counter += 1
            self.candidates += 1
            if self.threshold is None or sample.confidence > self.threshold:
                self.accepted += 1
                return sample


def synth_online(spec: PipelineSpec) -> OnlineStream:
    """Open a filtered online sample stream (see OnlineStream)."""
    return OnlineStream(spec)


def write_stream(spec: PipelineSpec, count: int) -> DatasetManifest:
    """Materialize the first ``count`` samples of an online stream to disk."""
    if spec.out_dir is None:
        raise ValueError("writing a stream needs an output directory")
    out_dir = Path(spec.out_dir)
    (out_dir / "images").mkdir(parents=True, exist_ok=True)
    (out_dir / "masks").mkdir(parents=True, exist_ok=True)
    stream = synth_online(spec)
    entries = []
    for _ in range(count):
        sample = next(stream)
        image_path = f"images/{sample.id}.ppm"
        mask_path = f"masks/{sample.id}.pgm"
        write_image(sample.image, out_dir / image_path)
        write_mask(sample.mask, out_dir / mask_path)
        entries.append(
            ManifestEntry(
                id=sample.id,
                class_id=sample.class_id,
                image_path=image_path,
                mask_path=mask_path,
                provenance=sample.provenance,
                latent_seed=sample.latent_seed,
                confidence=sample.confidence,
                uncertainty=None,
            )
        )
    manifest = DatasetManifest(
        name=spec.name,
        entries=tuple(entries),
        metadata=_run_metadata(spec, candidates=stream.candidates),
    )
    write_manifest(manifest, out_dir / "manifest.txt")
    taxonomy: ClassTaxonomy | None = getattr(stream.source, "taxonomy", None)
    if taxonomy is not None:
        write_taxonomy(taxonomy, out_dir / "taxonomy.txt")
    return manifest
