"""Tooling for synthetic labeled datasets: filtering, geometry, metrics."""

from .formats import (
    ClassTaxonomy,
    DatasetManifest,
    EmbeddingSet,
    Image,
    LabeledSample,
    ManifestEntry,
    Mask,
    read_embeddings,
    read_image,
    read_manifest,
    read_mask,
    read_taxonomy,
    write_embeddings,
    write_image,
    write_manifest,
    write_mask,
    write_taxonomy,
)
from .geometry import (
    MaskStats,
    MeanShapeSet,
    Polygon,
    center_scatter,
    chamfer,
    connected_components,
    largest_component_polygon,
    mask_stats,
    mean_shapes,
    polygon_length,
    shape_complexity,
    shape_diversity,
    simplify_dp,
)
from .distmetrics import GaussianFit, apply_mask, fid, fit_gaussian, kid
from .sampling import (
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
from .toygen import ToyClassSpec, ToyOutput, toy_generate, toy_taxonomy
from .pipeline import OnlineStream, PipelineSpec, ToySource, synth_offline, synth_online
from .fusion import FusionPlan, LayerSpec, compare, plan_baseline, plan_grouped
from .benchmark import (
    ConfusionMatrix,
    TaskSpec,
    accumulate,
    build_task,
    miou,
    rank_classes,
    task_split_sizes,
)

__version__ = "0.1.0"
