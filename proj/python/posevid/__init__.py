"""Pose-guided video diffusion mechanisms: curation, part masks, matching, guidance, metrics."""

from ._core import (
    DimensionError,
    DomainError,
    Error,
    EvaluationError,
    FormatError,
    IoError,
    PolicyError,
    adaptive_dilation_radius,
    cfg_decoupled,
    cfg_paired,
    curate,
    dilate,
    iou,
    l1,
    match_parts,
    psnr,
    ptcm_gradcheck,
    read_patn,
    sample,
    sparse_pose_mask,
    ssim,
    write_patn,
)

__all__ = [
    "DimensionError",
    "DomainError",
    "Error",
    "EvaluationError",
    "FormatError",
    "IoError",
    "PolicyError",
    "adaptive_dilation_radius",
    "cfg_decoupled",
    "cfg_paired",
    "curate",
    "dilate",
    "iou",
    "l1",
    "match_parts",
    "psnr",
    "ptcm_gradcheck",
    "read_patn",
    "sample",
    "sparse_pose_mask",
    "ssim",
    "write_patn",
]
