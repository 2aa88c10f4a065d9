"""
Mask geometry statistics
========================

Per-mask area statistics, the contour-to-polygon pipeline, and the shape
complexity/diversity metrics, walked through on simple synthetic masks.
"""
import numpy as np

from labelgen.formats import Mask
from labelgen.geometry import (
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

# a 64x64 mask with one big disk and one small square
grid = np.zeros((64, 64), dtype=np.uint8)
ys, xs = np.mgrid[0:64, 0:64]
grid[(ys - 24) ** 2 + (xs - 24) ** 2 <= 15**2] = 1
grid[50:58, 50:58] = 1
mask = Mask(grid)

stats = mask_stats(mask)
print(f"components: {stats.instance_count}")
print(f"mask/image: {stats.mask_over_image:.4f}  bbox/image: {stats.bbox_over_image:.4f}  "
      f"mask/bbox: {stats.mask_over_bbox:.4f}")
print("component sizes:", [int(c.sum()) for c in connected_components(mask)])

# largest component -> clockwise outer contour, straight runs compressed,
# normalized to the unit square, then simplified at tolerance 0.01
poly = largest_component_polygon(mask, min_pixels=100)
simplified = simplify_dp(poly, epsilon=0.01)
print(f"\ncontour vertices: {len(poly)} -> {len(simplified)} after simplification")
print(f"perimeter (normalized): {polygon_length(simplified):.4f}")
print(f"shape complexity (vertex count): {shape_complexity(simplified)}")

# shape diversity: mean pairwise Chamfer distance per class
square = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
diamond = np.array([[0.5, 0.0], [1.0, 0.5], [0.5, 1.0], [0.0, 0.5]])
print(f"\nchamfer(square, diamond) = {chamfer(square, diamond):.4f}")
print(f"shape diversity of one class holding both: "
      f"{shape_diversity({1: [square, diamond]}):.4f}")

# mean shapes: bbox-crop, resize to 32x32, seeded 5-means
disks = []
for r in (10, 11, 12, 13, 14, 15):
    g = np.zeros((64, 64), dtype=np.uint8)
    g[(ys - 32) ** 2 + (xs - 32) ** 2 <= r * r] = 1
    disks.append(Mask(g))
result = mean_shapes(disks, k=5, seed=0)
print(f"\nmean shapes: cluster sizes {result.cluster_sizes.tolist()}, "
      f"centroid range [{result.shapes.min():.3f}, {result.shapes.max():.3f}]")

centers = center_scatter([mask] + disks)
print(f"bbox centers of all masks:\n{np.round(centers, 3)}")
