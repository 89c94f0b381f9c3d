"""Hybrid quantum-classical Iris classifier on a from-scratch statevector simulator."""

from .hybrid import HybridModel, TrainConfig, init_model, load_model, predict, save_model, train
from .qlayer import VariationalParams, build_circuit, evaluate, render_ascii

__all__ = [
    "HybridModel",
    "TrainConfig",
    "VariationalParams",
    "build_circuit",
    "evaluate",
    "init_model",
    "load_model",
    "predict",
    "render_ascii",
    "save_model",
    "train",
]
__version__ = "0.1.0"
