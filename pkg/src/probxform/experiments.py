"""Desk-scale experiment recipes: the noisy linear dynamical system and a
two-component Gaussian mixture classified by a generated Gibbs kernel."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources

import numpy as np

from .disintegrate import disintegrate
from .errors import ValidationError
from .ir import App, Expr, Lam, Pair, lit
from .mcmc import gibbs, mh
from .sampler import ess, make_rng, run_chain
from .simplify import simplify
from .syntax import parse

T_RANGE = (3.0, 8.0)
E_RANGE = (1.0, 4.0)


def _program(name: str) -> str:
    return resources.files("probxform").joinpath("programs").joinpath(name).read_text()


def load_program(name: str) -> Expr:
    return parse(_program(name))


# -- Kalman -------------------------------------------------------------------

@dataclass(frozen=True)
class KalmanPrograms:
    model: Expr
    proposal: Expr
    kalman2: Expr      # disintegrated model
    kalman3: Expr      # after simplify
    kalman4: Expr      # Lam(obs, mh kernel) before simplify
    kalman5: Expr      # Lam(obs, mh kernel) after simplify


@lru_cache(maxsize=1)
def kalman_programs() -> KalmanPrograms:
    model = load_program("kalman.ppt")
    proposal = load_program("proposal.ppt")
    k2 = disintegrate(model)
    k3 = simplify(k2)
    k4 = Lam(k2.var, mh(proposal, k2.body).expr)
    k5 = Lam(k3.var, simplify(mh(proposal, k3.body).expr, context=model))
    return KalmanPrograms(model, proposal, k2, k3, k4, k5)


def _obs_expr(obs) -> Expr:
    return Pair(lit(obs[0]), lit(obs[1]))


def kalman_posterior_oracle(obs=(0.0, 1.0)) -> dict:
    """Posterior means of (noiseT, noiseE) by 2-D quadrature.

    Integrating out the two latent states leaves a bivariate normal likelihood
    for the observations with covariance [[T²+E², T²], [T², 2T²+E²]].
    """
    from scipy import integrate

    m1, m2 = obs

    def lik(t, e):
        a, b, c = t * t + e * e, t * t, 2 * t * t + e * e
        det = a * c - b * b
        q = (c * m1 * m1 - 2 * b * m1 * m2 + a * m2 * m2) / det
        return math.exp(-q / 2) / (2 * math.pi * math.sqrt(det))

    def moment(f):
        val, _ = integrate.dblquad(lambda e, t: f(t, e) * lik(t, e), *T_RANGE, *E_RANGE,
                                   epsabs=1e-13, epsrel=1e-11)
        return val

    z = moment(lambda t, e: 1.0)
    mt = moment(lambda t, e: t) / z
    me = moment(lambda t, e: e) / z
    vt = moment(lambda t, e: t * t) / z - mt * mt
    ve = moment(lambda t, e: e * e) / z - me * me
    return {"noiseT": mt, "noiseE": me, "sd_noiseT": math.sqrt(vt), "sd_noiseE": math.sqrt(ve)}


@dataclass
class KalmanReport:
    seed: int
    n: int
    obs: tuple
    means: dict
    std_errors: dict
    ess_per_sample: dict
    accept_rate: float
    seconds: float = field(compare=False, default=0.0)

    def to_json(self) -> dict:
        return {"experiment": "kalman", "seed": self.seed, "n": self.n, "obs": list(self.obs),
                "means": self.means, "std_errors": self.std_errors,
                "ess_per_sample": self.ess_per_sample, "accept_rate": self.accept_rate,
                "seconds": self.seconds}


def kalman_kernel(obs=(0.0, 1.0), simplified: bool = True) -> Expr:
    progs = kalman_programs()
    k = progs.kalman5 if simplified else progs.kalman4
    return simplify(App(k, _obs_expr(obs))) if simplified else App(k, _obs_expr(obs))


def _summarize(states: np.ndarray) -> tuple[dict, dict, dict]:
    means, ses, eps = {}, {}, {}
    for j, name in enumerate(("noiseT", "noiseE")):
        col = states[:, j]
        n_eff = ess(col)
        means[name] = float(col.mean())
        ses[name] = float(col.std(ddof=1) / math.sqrt(n_eff))
        eps[name] = float(n_eff / len(col))
    return means, ses, eps


def experiment_kalman(seed: int = 42, n: int = 20000, obs=(0.0, 1.0),
                      init=(5.5, 2.5)) -> KalmanReport:
    """Run the collapsed MH sampler for the noise levels."""
    if n < 1000:
        raise ValidationError("experiment kalman needs n >= 1000")
    t0 = time.perf_counter()
    chain = run_chain(kalman_kernel(obs), tuple(init), n, seed=seed)
    states = np.array([[s[0], s[1]] for s in chain.states])
    means, ses, eps = _summarize(states)
    return KalmanReport(seed, n, tuple(obs), means, ses, eps, chain.acceptance_rate(),
                        time.perf_counter() - t0)


@lru_cache(maxsize=8)
def uncollapsed_kernel(obs=(0.0, 1.0)) -> Expr:
    """MH kernel over ((noiseT, noiseE), (x1, x2)) with the latent states kept.

    The proposal picks one of the four coordinates uniformly and redraws it
    from its prior conditional.
    """
    target = App(load_program("kalman_latent.ppt"), _obs_expr(obs))
    proposal = load_program("proposal_latent.ppt")
    return mh(proposal, target).expr


def ess_comparison(seed: int, n: int = 5000, obs=(0.0, 1.0)) -> dict:
    """ESS per sample of noiseT and noiseE for collapsed vs uncollapsed chains
    started from the same point with the same seed."""
    collapsed = run_chain(kalman_kernel(obs), (5.5, 2.5), n, seed=seed)
    full = run_chain(uncollapsed_kernel(tuple(obs)), ((5.5, 2.5), (0.0, 0.0)), n, seed=seed)
    a = np.array([[s[0], s[1]] for s in collapsed.states])
    b = np.array([[s[0][0], s[0][1]] for s in full.states])
    _, _, ea = _summarize(a)
    _, _, eb = _summarize(b)
    return {"seed": seed, "collapsed": ea, "uncollapsed": eb}


def throughput(kernel: Expr, init, seconds: float = 1.0, seed: int = 0, batch: int = 10) -> float:
    """Chain steps per second, measured for at least ``seconds``."""
    from .sampler import compile_measure, evaluate
    clo = evaluate(kernel)
    body = compile_measure(clo.body)
    env = dict(clo.env._d)
    rng = make_rng(seed)
    steps, t0 = 0, time.perf_counter()
    while True:
        for _ in range(batch):
            env[clo.var] = init
            body(env, rng)
        steps += batch
        dt = time.perf_counter() - t0
        if dt >= seconds:
            return steps / dt


# -- Gaussian mixture -----------------------------------------------------------

@dataclass
class GmmReport:
    seed: int
    n_points: int
    sweeps: int
    accuracy: list
    labels: list
    final_means: tuple

    def to_json(self) -> dict:
        return {"experiment": "gmm", "seed": self.seed, "n_points": self.n_points,
                "sweeps": self.sweeps, "accuracy": self.accuracy,
                "final_means": list(self.final_means)}


def gmm_data(seed: int, n_points: int, means=(-5.0, 5.0), sd: float = 1.0):
    rng = make_rng(seed)
    labels = rng.integers(0, 2, size=n_points)
    ys = rng.normal(np.asarray(means)[labels], sd)
    return [int(v) for v in labels], [round(float(v), 1) for v in ys]


def _nest(items: list[str]) -> str:
    out = items[-1]
    for it in reversed(items[:-1]):
        out = f"({it}, {out})"
    return out


def gmm_target_source(ys) -> str:
    """Unrolled mixture model conditioned on the data ``ys``."""
    lines = ["mu0 <~ Normal(0, 10);", "mu1 <~ Normal(0, 10);"]
    lines += [f"z{i} <~ Categorical((1/2, 0), (1/2, 1));" for i in range(len(ys))]
    lik = " * ".join(f"exp(-({y!r} - If(z{i} == 0, mu0, mu1))^2/2)" for i, y in enumerate(ys))
    point = _nest(["mu0", "mu1"] + [f"z{i}" for i in range(len(ys))])
    lines.append(f"Weight({lik}, {point})")
    return "\n".join(lines)


@lru_cache(maxsize=4)
def gmm_kernel(ys: tuple) -> Expr:
    target = parse(gmm_target_source(ys))
    return simplify(gibbs(target).expr, context=target)


def _flatten(state) -> list:
    out = []
    while isinstance(state, tuple):
        out.append(state[0])
        state = state[1]
    out.append(state)
    return out


def _accuracy(z, truth) -> float:
    hits = sum(int(a == b) for a, b in zip(z, truth)) / len(truth)
    return max(hits, 1.0 - hits)


def experiment_gmm(seed: int = 0, n_points: int = 30, sweeps: int = 5,
                   means=(-5.0, 5.0)) -> GmmReport:
    """Random-scan Gibbs on planted data; accuracy is label agreement up to
    swapping the two components."""
    if not 2 <= n_points <= 40:
        raise ValidationError("n_points must be between 2 and 40")
    if sweeps < 1:
        raise ValidationError("sweeps must be positive")
    truth, ys = gmm_data(seed, n_points, means)
    kernel = gmm_kernel(tuple(ys))
    rng = make_rng(seed + 1)
    z0 = [float(v) for v in rng.integers(0, 2, size=n_points)]
    init = _nest_value([0.0, 0.0] + z0)
    n_coord = n_points + 2
    chain = run_chain(kernel, init, sweeps * n_coord, rng=rng, kind="gibbs")
    acc = []
    for s in range(sweeps):
        flat = _flatten(chain.states[(s + 1) * n_coord - 1])
        acc.append(_accuracy([int(v) for v in flat[2:]], truth))
    final = _flatten(chain.states[-1])
    return GmmReport(seed, n_points, sweeps, acc, [int(v) for v in final[2:]], (final[0], final[1]))


def _nest_value(items: list):
    out = items[-1]
    for it in reversed(items[:-1]):
        out = (it, out)
    return out
