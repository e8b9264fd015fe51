"""MiniNet: a small from-scratch CNN with an optional multilevel feature head."""
from .gradcheck import TINY, check_gradients, grad_check
from .model import backward, cross_entropy, forward, predict, predict_batch, softmax
from .optim import AdamState, adam_step, lr_at
from .params import ArchDescriptor, ModelParams, init_params, zero_params
from .serialize import load_model, model_from_bytes, model_to_bytes, save_model
from .train import Dataset, EpochRecord, History, TrainConfig, evaluate_loss, train

__all__ = [
    "TINY", "check_gradients", "grad_check",
    "backward", "cross_entropy", "forward", "predict", "predict_batch", "softmax",
    "AdamState", "adam_step", "lr_at",
    "ArchDescriptor", "ModelParams", "init_params", "zero_params",
    "load_model", "model_from_bytes", "model_to_bytes", "save_model",
    "Dataset", "EpochRecord", "History", "TrainConfig", "evaluate_loss", "train",
]
