"""Quasi minimum density power divergence estimation of copula regressions.

The marginal failure probabilities at each test condition are replaced by
their observed proportions, and the copula regression ``theta = (a0, a1)`` is
chosen to minimise a weighted sum over conditions of the divergence between
the observed and model outcome probabilities. ``beta = 0`` is the
Kullback-Leibler case, whose minimiser is the quasi-MLE.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import NamedTuple, Sequence

import numpy as np
from scipy import optimize

from .copulas import (
    GH,
    CopulaFamily,
    copula_cdf,
    frank_alpha_from_tau,
    gh_alpha_from_tau,
    link_alpha,
    link_inverse,
    tau_from_alpha,
)
from .data import EmpiricalMargins, EmptyCellError, OneShotDataset

FRANK_LINEAR_TAU_LIMIT = 0.307
GH_TAU_CLIP = (0.01, 0.99)
FRANK_TAU_CLIP = (-0.99, 0.99)

# How conditions are weighted in the objective.
#   size     K_ij / K
#   uniform  1 / (number of conditions)
#   mixed    size at beta == 0, uniform at beta > 0
# On balanced designs (equal K_ij) all three give the same estimates.
WEIGHTINGS = ("size", "uniform", "mixed")


class IdentificationError(ValueError):
    """The design cannot identify both intercept and slope."""


class ThetaVector(NamedTuple):
    a0: float
    a1: float


class CellProbabilities(NamedTuple):
    pi0: float
    pi1: float
    pi2: float
    pi12: float


def cell_probabilities(family, theta, x: float, m: EmpiricalMargins) -> CellProbabilities:
    """Model outcome probabilities at stress ``x`` with margins ``m`` plugged in."""
    f1, f2 = float(m[0]), float(m[1])
    if not (0.0 <= f1 <= 1.0 and 0.0 <= f2 <= 1.0):
        raise ValueError("margins must lie in [0, 1]")
    c = float(copula_cdf(family, f1, f2, link_alpha(family, theta, x)))
    return CellProbabilities(1.0 - f1 - f2 + c, f1 - c, f2 - c, c)


def model_probabilities(family, theta, stresses, f1, f2) -> np.ndarray:
    """Vectorised :func:`cell_probabilities`; returns an ``(M, 4)`` array."""
    c = copula_cdf(family, f1, f2, link_alpha(family, theta, stresses))
    return np.stack([1.0 - f1 - f2 + c, f1 - c, f2 - c, c], axis=-1)


def kl_cell_divergence(p, pi, floor_eps: float = 1e-10) -> float:
    """``sum_r p_r log(p_r / pi_r)`` with ``0 log 0 = 0`` and ``pi`` floored."""
    p = np.asarray(p, dtype=float)
    pi = np.maximum(np.asarray(pi, dtype=float), floor_eps)
    mask = p > 0
    return float(np.sum(p[mask] * np.log(p[mask] / pi[mask])))


def dpd_cell_divergence(p, pi, beta: float, floor_eps: float = 1e-10) -> float:
    """Density power divergence between observed ``p`` and model ``pi``.

    Only the terms that depend on ``pi`` are kept:
    ``sum pi^(1+b) - (1+b)/b * sum p pi^b``. ``beta == 0`` is the KL case.
    """
    if beta < 0:
        raise ValueError("beta must be >= 0")
    if beta == 0:
        return kl_cell_divergence(p, pi, floor_eps)
    p = np.asarray(p, dtype=float)
    pi = np.maximum(np.asarray(pi, dtype=float), floor_eps)
    return float(np.sum(pi ** (1.0 + beta)) - (1.0 + beta) / beta * np.sum(p * pi**beta))


@dataclass(frozen=True)
class _Prepared:
    """Per-dataset arrays reused across objective evaluations."""

    counts: np.ndarray
    totals: np.ndarray
    p: np.ndarray
    f1: np.ndarray
    f2: np.ndarray
    stresses: np.ndarray

    @classmethod
    def from_dataset(cls, ds: OneShotDataset) -> "_Prepared":
        # canonical (stress, time) order so results do not depend on cell order
        order = np.lexsort((ds.times, ds.stresses))
        counts = ds.counts[order].astype(float)
        totals = counts.sum(axis=1)
        if len(totals) == 0:
            raise ValueError("dataset has no cells")
        if np.any(totals == 0):
            raise EmptyCellError("dataset contains a cell with no tested units")
        p = counts / totals[:, None]
        f1 = (counts[:, 1] + counts[:, 3]) / totals
        f2 = (counts[:, 2] + counts[:, 3]) / totals
        return cls(counts, totals, p, f1, f2, ds.stresses[order])

    def weights(self, weighting: str, beta: float) -> np.ndarray:
        if weighting == "mixed":
            weighting = "size" if beta == 0 else "uniform"
        if weighting == "size":
            return self.totals / self.totals.sum()
        if weighting == "uniform":
            return np.full(len(self.totals), 1.0 / len(self.totals))
        raise ValueError(f"unknown weighting {weighting!r}; expected one of {WEIGHTINGS}")

    def model(self, family, theta) -> np.ndarray:
        return model_probabilities(family, theta, self.stresses, self.f1, self.f2)


def _divergences(p: np.ndarray, pi: np.ndarray, beta: float, floor_eps: float) -> np.ndarray:
    pi = np.maximum(pi, floor_eps)
    if beta == 0:
        with np.errstate(divide="ignore", invalid="ignore"):
            terms = np.where(p > 0, p * np.log(p / pi), 0.0)
        return terms.sum(axis=1)
    return (pi ** (1.0 + beta)).sum(axis=1) - (1.0 + beta) / beta * (p * pi**beta).sum(axis=1)


def weighted_objective(ds: OneShotDataset, family, theta, beta: float,
                       weighting: str = "size", floor_eps: float = 1e-10) -> float:
    """Weighted sum over conditions of the cell divergence at ``theta``."""
    prep = _Prepared.from_dataset(ds)
    pi = prep.model(family, theta)
    return float(prep.weights(weighting, beta) @ _divergences(prep.p, pi, beta, floor_eps))


def composite_loglik(ds: OneShotDataset, family, theta, floor_eps: float = 1e-10) -> float:
    """Log-likelihood ``sum n_r log pi_r`` with observed margins plugged in."""
    prep = _Prepared.from_dataset(ds)
    pi = np.maximum(prep.model(family, theta), floor_eps)
    n = prep.counts
    return float(np.sum(np.where(n > 0, n * np.log(pi), 0.0)))


def floor_events(ds: OneShotDataset, family, theta, floor_eps: float = 1e-10) -> int:
    """Number of model probabilities that fall below ``floor_eps`` at ``theta``."""
    pi = _Prepared.from_dataset(ds).model(family, theta)
    return int(np.count_nonzero(pi < floor_eps))


def kendall_tau_hat(ds: OneShotDataset, x: float) -> float:
    """Concordance-based tau at stress ``x``: ``(C - D) / (C + D)``.

    Concordant pairs are ``n0 * n12`` and discordant pairs ``n1 * n2``,
    summed over inspection times. Returns 0 when there are no pairs.
    """
    rows = [n for c, n in ds.cells if c.stress == x]
    if not rows:
        raise KeyError(f"no cells at stress {x}")
    conc = sum(n.n0 * n.n12 for n in rows)
    disc = sum(n.n1 * n.n2 for n in rows)
    if conc + disc == 0:
        return 0.0
    return (conc - disc) / (conc + disc)


def _initial_alpha(family: CopulaFamily, tau: float) -> float:
    if family is GH:
        return float(gh_alpha_from_tau(min(max(tau, GH_TAU_CLIP[0]), GH_TAU_CLIP[1])))
    tau = min(max(tau, FRANK_TAU_CLIP[0]), FRANK_TAU_CLIP[1])
    if abs(tau) <= FRANK_LINEAR_TAU_LIMIT:
        return 9.0 * tau
    return float(frank_alpha_from_tau(tau))


def initialize_theta(ds: OneShotDataset, family) -> ThetaVector:
    """Least-squares start from per-stress Kendall tau estimates."""
    family = CopulaFamily.parse(family)
    stresses = ds.stress_levels
    if len(stresses) < 2:
        raise IdentificationError("need at least 2 distinct stress levels to estimate a slope")
    lam = np.array([float(link_inverse(family, _initial_alpha(family, kendall_tau_hat(ds, x))))
                    for x in stresses])
    design = np.column_stack([np.ones(len(stresses)), np.asarray(stresses)])
    coef, *_ = np.linalg.lstsq(design, lam, rcond=None)
    return ThetaVector(float(coef[0]), float(coef[1]))


@dataclass(frozen=True)
class FitConfig:
    beta: float = 0.0
    floor_eps: float = 1e-10
    weighting: str = "mixed"
    # Nelder-Mead settings
    initial_step: float = 0.1
    xatol: float = 1e-8
    fatol: float = 1e-10
    max_iter: int = 2000
    start: ThetaVector | None = None
    eval_stresses: tuple[float, ...] = ()

    def __post_init__(self):
        if not self.beta >= 0:
            raise ValueError("beta must be >= 0")
        if not 0 < self.floor_eps <= 1e-6:
            raise ValueError("floor_eps must lie in (0, 1e-6]")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if self.weighting not in WEIGHTINGS:
            raise ValueError(f"unknown weighting {self.weighting!r}; expected one of {WEIGHTINGS}")
        if self.start is not None:
            object.__setattr__(self, "start", ThetaVector(*map(float, self.start)))
        object.__setattr__(self, "eval_stresses", tuple(float(x) for x in self.eval_stresses))


@dataclass
class FitResult:
    family: CopulaFamily
    theta_hat: ThetaVector
    beta: float
    objective_value: float
    alpha_by_stress: dict[float, float]
    tau_by_stress: dict[float, float]
    abias_percent: float
    abias_weighted_percent: float
    converged: bool
    iterations: int
    start_used: ThetaVector
    weighting: str
    floor_events: int = 0
    message: str = ""

    def to_dict(self) -> dict:
        return {
            "beta": self.beta,
            "a0": self.theta_hat.a0,
            "a1": self.theta_hat.a1,
            "alpha": {_key(x): a for x, a in self.alpha_by_stress.items()},
            "tau": {_key(x): t for x, t in self.tau_by_stress.items()},
            "abias_percent": self.abias_percent,
            "abias_weighted_percent": self.abias_weighted_percent,
            "objective": self.objective_value,
            "converged": self.converged,
            "iterations": self.iterations,
            "start": {"a0": self.start_used.a0, "a1": self.start_used.a1},
            "weighting": self.weighting,
            "floor_events": self.floor_events,
        }


def _key(x: float) -> str:
    return str(int(x)) if float(x).is_integer() else repr(float(x))


def abias(ds: OneShotDataset, family, theta_hat, weighted: bool = False) -> float:
    """Mean absolute gap between observed and fitted outcome probabilities, in percent.

    The unweighted version averages over every (condition, outcome) pair; the
    weighted one weights conditions by ``K_ij / K``.
    """
    prep = _Prepared.from_dataset(ds)
    gaps = np.abs(prep.p - prep.model(family, theta_hat))
    if weighted:
        return float(100.0 * (prep.weights("size", 0.0) @ gaps.mean(axis=1)))
    return float(100.0 * gaps.mean())


def _nelder_mead(fun, start, config: FitConfig):
    x0 = np.asarray(start, dtype=float)
    simplex = np.vstack([x0, x0 + [config.initial_step, 0.0], x0 + [0.0, config.initial_step]])
    return optimize.minimize(
        fun, x0, method="Nelder-Mead",
        options={"initial_simplex": simplex, "xatol": config.xatol, "fatol": config.fatol,
                 "maxiter": config.max_iter, "maxfev": 10 * config.max_iter + 10},
    )


def _objective_fn(prep: _Prepared, family: CopulaFamily, beta: float, weighting: str, floor_eps: float):
    weights = prep.weights(weighting, beta)

    def fun(theta):
        with np.errstate(all="ignore"):
            try:
                pi = prep.model(family, theta)
            except ValueError:
                return math.inf
            value = float(weights @ _divergences(prep.p, pi, beta, floor_eps))
        return value if math.isfinite(value) else math.inf

    return fun


def _check_identified(ds: OneShotDataset):
    if len(ds.stress_levels) < 2:
        raise IdentificationError("need at least 2 distinct stress levels to estimate a slope")


def _assemble(ds, family, theta, config, value, converged, iterations, start, message) -> FitResult:
    stresses = sorted(set(ds.stress_levels) | set(config.eval_stresses))
    alphas = {x: float(link_alpha(family, theta, x)) for x in stresses}
    taus = {x: float(tau_from_alpha(family, a)) for x, a in alphas.items()}
    return FitResult(
        family=family,
        theta_hat=theta,
        beta=config.beta,
        objective_value=value,
        alpha_by_stress=alphas,
        tau_by_stress=taus,
        abias_percent=abias(ds, family, theta),
        abias_weighted_percent=abias(ds, family, theta, weighted=True),
        converged=converged,
        iterations=iterations,
        start_used=start,
        weighting=config.weighting,
        floor_events=floor_events(ds, family, theta, config.floor_eps),
        message=message,
    )


def fit(ds: OneShotDataset, family, config: FitConfig = FitConfig()) -> FitResult:
    """Minimise the weighted divergence over ``theta`` by Nelder-Mead.

    Non-convergence is reported through ``FitResult.converged``; it does not
    raise.
    """
    family = CopulaFamily.parse(family)
    _check_identified(ds)
    start = config.start if config.start is not None else initialize_theta(ds, family)
    prep = _Prepared.from_dataset(ds)
    fun = _objective_fn(prep, family, config.beta, config.weighting, config.floor_eps)
    res = _nelder_mead(fun, start, config)
    theta = ThetaVector(float(res.x[0]), float(res.x[1]))
    converged = bool(res.success) and math.isfinite(res.fun)
    return _assemble(ds, family, theta, config, float(res.fun), converged, int(res.nit), start, str(res.message))


def fit_betas(ds: OneShotDataset, family, betas: Sequence[float],
              config: FitConfig = FitConfig()) -> list[FitResult]:
    """Fit every ``beta`` from the same start; results in ascending ``beta``."""
    family = CopulaFamily.parse(family)
    _check_identified(ds)
    if config.start is None:
        config = replace(config, start=initialize_theta(ds, family))
    return [fit(ds, family, replace(config, beta=float(b))) for b in sorted(betas)]


def maximize_composite_loglik(ds: OneShotDataset, family,
                              config: FitConfig = FitConfig()) -> ThetaVector:
    """Quasi-MLE by direct maximisation of the plug-in log-likelihood.

    Independent route to the ``beta = 0`` estimate; used to cross-check
    :func:`fit`.
    """
    family = CopulaFamily.parse(family)
    _check_identified(ds)
    start = config.start if config.start is not None else initialize_theta(ds, family)
    prep = _Prepared.from_dataset(ds)
    n = prep.counts
    k = n.sum()

    def negloglik(theta):
        with np.errstate(all="ignore"):
            try:
                pi = np.maximum(prep.model(family, theta), config.floor_eps)
            except ValueError:
                return math.inf
            value = -float(np.sum(np.where(n > 0, n * np.log(pi), 0.0))) / k
        return value if math.isfinite(value) else math.inf

    res = _nelder_mead(negloglik, start, config)
    return ThetaVector(float(res.x[0]), float(res.x[1]))
