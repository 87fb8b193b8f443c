"""Inference as program transformation for a small measure language."""

from .disintegrate import density, disintegrate, observe
from .errors import ProbxformError
from .expect import expect, total_mass
from .ir import alpha_equal
from .mcmc import KernelProgram, gibbs, mh
from .normalize import condition, normalize
from .sampler import ess, evaluate, run_chain, sample
from .simplify import RewriteTrace, integrate_out, recognize_density, simplify
from .syntax import parse, pretty
from .typecheck import typecheck

__all__ = [
    "KernelProgram", "ProbxformError", "RewriteTrace", "alpha_equal", "condition", "density",
    "disintegrate", "ess", "evaluate", "expect", "gibbs", "integrate_out", "mh", "normalize",
    "observe", "parse", "pretty", "recognize_density", "run_chain", "sample", "simplify",
    "total_mass", "typecheck",
]
