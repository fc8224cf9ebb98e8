from .scene import (
    CLASS_PALETTE,
    GaussianScene,
    SyntheticSceneSpec,
    covariance3d,
    covariances3d,
    gaussian_influence,
    make_synthetic_scene,
    rgb_to_sh0,
    sh0_to_rgb,
    SH_C0,
)
from .render import (
    Camera,
    Projection,
    RenderedImage,
    UntaggedSceneError,
    eval_sh,
    look_at,
    project_scene,
    render,
    soft_landmark_histogram,
    visible_landmark_histogram,
)
from .ply import PlyError, load_ply, save_ply

__all__ = [
    "CLASS_PALETTE",
    "Camera",
    "GaussianScene",
    "PlyError",
    "Projection",
    "RenderedImage",
    "SH_C0",
    "SyntheticSceneSpec",
    "UntaggedSceneError",
    "covariance3d",
    "covariances3d",
    "eval_sh",
    "gaussian_influence",
    "load_ply",
    "look_at",
    "make_synthetic_scene",
    "project_scene",
    "render",
    "rgb_to_sh0",
    "save_ply",
    "sh0_to_rgb",
    "soft_landmark_histogram",
    "visible_landmark_histogram",
]
