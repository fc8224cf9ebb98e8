"""poseloc: conditional 6DoF camera-pose distributions over Gaussian scenes.

Learns p(pose | text/image embedding) with a denoising diffusion model,
refines sampled poses by splat render-and-compare, and scores distributions
with the relative-distribution-accuracy metric.
"""

from .geometry import Pose, TangentDelta, quat_normalize, retract, \
    rotation_error_deg, translation_error
from .diffusion import (
    DiffusionSchedule,
    SceneNormalization,
    TrainRecord,
    forward_noise,
    make_schedule,
    mixup_select,
    sample,
    train,
)
from .encoder import (
    CaptionSet,
    ConditionEmbedding,
    SyntheticVocabulary,
    cosine_similarity,
    filter_captions,
    format_noun_prompt,
    load_embeddings,
    save_embeddings,
    synthetic_encode,
)
from .numericnet import TrainConfig

__version__ = "0.1.0"

__all__ = [
    "CaptionSet",
    "ConditionEmbedding",
    "DiffusionSchedule",
    "Pose",
    "SceneNormalization",
    "SyntheticVocabulary",
    "TangentDelta",
    "TrainConfig",
    "TrainRecord",
    "cosine_similarity",
    "filter_captions",
    "format_noun_prompt",
    "forward_noise",
    "load_embeddings",
    "make_schedule",
    "mixup_select",
    "quat_normalize",
    "retract",
    "rotation_error_deg",
    "sample",
    "save_embeddings",
    "synthetic_encode",
    "train",
    "translation_error",
]
