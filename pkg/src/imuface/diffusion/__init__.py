from .infer import crossfade, window_starts, windowed_inference
from .model import Denoiser, DenoiserConfig, denoiser_forward, noise_embedding, predict_x0, timestep_features
from .sampler import denoise_step, sample
from .schedule import DiffusionSchedule, build_schedule, forward_diffuse
from .train import (
    TrainConfig,
    TrainHistory,
    condition_stats,
    evaluate_loss,
    load_model,
    make_windows,
    save_model,
    train,
)

__all__ = [
    "Denoiser",
    "DenoiserConfig",
    "DiffusionSchedule",
    "TrainConfig",
    "TrainHistory",
    "build_schedule",
    "condition_stats",
    "crossfade",
    "denoise_step",
    "denoiser_forward",
    "evaluate_loss",
    "forward_diffuse",
    "load_model",
    "make_windows",
    "noise_embedding",
    "predict_x0",
    "sample",
    "save_model",
    "timestep_features",
    "train",
    "window_starts",
    "windowed_inference",
]
