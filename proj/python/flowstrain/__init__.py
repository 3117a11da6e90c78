"""Dense volumetric registration, finite strain and network cost benchmarking."""

import json

from . import _core
from ._core import (
    DataError,
    FlowstrainError,
    NumericalError,
    compute_strain,
    corrcoef,
    dice,
    generate_phantom,
    loss_and_grad,
    run_cli,
    set_threads,
    threads,
    tv_loss,
    warp_image,
)

__all__ = [
    "DataError",
    "FlowstrainError",
    "NumericalError",
    "bland_altman",
    "compute_strain",
    "corrcoef",
    "count_costs",
    "dice",
    "generate_phantom",
    "loss_and_grad",
    "register_images",
    "run_cli",
    "set_threads",
    "threads",
    "tv_loss",
    "warp_image",
]


def register_images(fixed, moving, **kwargs):
    """Return (flow, report) where flow has shape (D, H, W, 3) and report is a dict."""
    flow, report = _core.register_images(fixed, moving, **kwargs)
    return flow, json.loads(report)


def bland_altman(test, retest, mode="abs"):
    return json.loads(_core.bland_altman(list(test), list(retest), mode))


def count_costs(spec, shape=(16, 128, 128), cascades=1):
    """`spec` is a builtin name (voxelmorph, voxelmorph_lite, flir_unet) or DSL text."""
    return json.loads(_core.count_costs(spec, list(shape), cascades))
