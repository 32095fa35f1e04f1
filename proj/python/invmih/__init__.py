"""Invertible multi-image hiding: Python bindings over the C++ core.

Images are float arrays in [0, 1], laid out (N, C, H, W) or (C, H, W).
"""

from ._core import (
    Model,
    cli,
    compose_dinv,
    decompose_d,
    evaluate,
    grid_for_count,
    haar_dwt,
    haar_idwt,
    js_divergence,
    lr_at,
    mixing_matrix,
    psnr,
    quantize,
    read_png,
    soft_histogram,
    splice_mosaic,
    ssim,
    unsplice_mosaic,
    write_png,
)

__all__ = [
    "Model",
    "cli",
    "compose_dinv",
    "decompose_d",
    "evaluate",
    "grid_for_count",
    "haar_dwt",
    "haar_idwt",
    "js_divergence",
    "lr_at",
    "mixing_matrix",
    "psnr",
    "quantize",
    "read_png",
    "soft_histogram",
    "splice_mosaic",
    "ssim",
    "unsplice_mosaic",
    "write_png",
]
