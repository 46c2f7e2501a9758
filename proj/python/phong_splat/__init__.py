"""Relightable Gaussian splatting with Phong shading and meta-learned shadows."""

from ._core import (
    PARAMS_PER_POINT,
    Camera,
    Capture,
    Dataset,
    PointLight,
    TrainConfig,
    evaluate,
    generate_olat_dataset,
    gradcheck,
    initial_points,
    light_transmittance,
    load_checkpoint,
    load_dataset,
    psnr,
    render,
    save_checkpoint,
    save_dataset,
    ssim,
    train,
)

__all__ = [
    "PARAMS_PER_POINT",
    "Camera",
    "Capture",
    "Dataset",
    "PointLight",
    "TrainConfig",
    "evaluate",
    "generate_olat_dataset",
    "gradcheck",
    "initial_points",
    "light_transmittance",
    "load_checkpoint",
    "load_dataset",
    "psnr",
    "render",
    "save_checkpoint",
    "save_dataset",
    "ssim",
    "train",
]
