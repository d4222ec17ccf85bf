"""Deformable convolution kernels, warp decomposition and offset analytics.

Thin numpy bindings over the C++ core. Shapes follow the library
conventions: features are (C, H, W), flows and displacements are (2, H, W)
with the horizontal component first, offset fields are (G, N, 2, H, W) and
masks are (G, N, H, W).
"""

from ._core import (
    bilinear_sample,
    charbonnier,
    charbonnier_grad,
    conv2d,
    conv_backward,
    dcn_backward,
    decomposed_deform_conv,
    deform_conv,
    deformable_align,
    diversity_sweep,
    equivalence_report,
    fit_offsets,
    flow_align,
    flow_distance_cdf,
    heatmap_pgm,
    heaviside,
    image_align,
    kernel_taps,
    kernel_to_pointwise,
    mask_flow_scatter,
    modulated_deform_conv,
    offset_diversity_map,
    offset_fidelity,
    offset_fidelity_grad,
    pearson,
    predict_offsets,
    read_flo,
    read_tensor,
    sort_by_flow_distance,
    synth_pair,
    total_loss,
    warp,
    warp_backward,
    write_flo,
    write_tensor,
)

__all__ = [
    "bilinear_sample",
    "charbonnier",
    "charbonnier_grad",
    "conv2d",
    "conv_backward",
    "dcn_backward",
    "decomposed_deform_conv",
    "deform_conv",
    "deformable_align",
    "diversity_sweep",
    "equivalence_report",
    "fit_offsets",
    "flow_align",
    "flow_distance_cdf",
    "heatmap_pgm",
    "heaviside",
    "image_align",
    "kernel_taps",
    "kernel_to_pointwise",
    "mask_flow_scatter",
    "modulated_deform_conv",
    "offset_diversity_map",
    "offset_fidelity",
    "offset_fidelity_grad",
    "pearson",
    "predict_offsets",
    "read_flo",
    "read_tensor",
    "sort_by_flow_distance",
    "synth_pair",
    "total_loss",
    "warp",
    "warp_backward",
    "write_flo",
    "write_tensor",
]
