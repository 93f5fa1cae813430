"""Spatiotemporal event privacy for location release over Markov mobility models."""

from .checker import (CheckVerdict, PrivacyParams, QuadraticCondition, build_conditions, certify,
                      conditions_from_vectors, quantify_fixed_pi)
from .events import Event, pattern, presence
from .lppm import LppmSpec, PlanarLaplaceSpec, planar_laplace_matrix
from .markov import MarkovModel, synth_gaussian, train
from .release import ReleaseRecord, ReleaseSession, make_session, run_session
from .statespace import GridMap
from .twoworld import build_chain, joint, prior

__version__ = "0.1.0"
