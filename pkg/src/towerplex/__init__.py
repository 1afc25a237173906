"""Exact rational simulator for multiplexed rank-one tower constructions."""
from .exact import (ExactError, Interval, IntervalSet, PiecewiseAffineMap, apply, compose,
                    disagreement, image, invert, iterate, measure, preimage, set_algebra,
                    transport)
from .rankone import RankOneSpec, RankOneSystem, build_rank_one, rokhlin_tower
from .chain import Chain, StageState, assemble_T, stable_horizon
from .kernels import BACKEND

__all__ = [
    "BACKEND", "Chain", "ExactError", "Interval", "IntervalSet", "PiecewiseAffineMap",
    "RankOneSpec", "RankOneSystem", "StageState", "apply", "assemble_T", "build_rank_one",
    "compose", "disagreement", "image", "invert", "iterate", "measure", "preimage",
    "rokhlin_tower", "set_algebra", "stable_horizon", "transport",
]
