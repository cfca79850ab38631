"""Robust copula estimation for one-shot devices with two dependent failure modes."""

from .copulas import FRANK, GH, CopulaFamily, DomainError
from .data import CellCounts, OneShotDataset, TestCondition
from .datasets import load_csv, serial_sacrifice
from .inference import FitConfig, FitResult, ThetaVector, fit, fit_betas

__version__ = "0.1.0"

__all__ = [
    "CellCounts", "CopulaFamily", "DomainError", "FRANK", "FitConfig", "FitResult", "GH",
    "OneShotDataset", "TestCondition", "ThetaVector", "fit", "fit_betas", "load_csv",
    "serial_sacrifice", "__version__",
]
