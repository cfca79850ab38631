"""Synthetic one-shot experiments and the contamination Monte Carlo study.

Datasets are drawn as ``Multinomial(k_star, pi_true)`` per test condition,
which has exactly the distribution of categorising simulated lifetimes at the
inspection time. The lifetime route (:func:`sample_lifetimes`) is kept as an
independent check on that shortcut.
"""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from typing import Sequence

import numpy as np
from scipy import special

from .copulas import GH, CopulaFamily, frank_cdf, gh_cdf, link_alpha, tau_from_alpha
from .data import CellCounts, OneShotDataset
from .inference import CellProbabilities, FitConfig, ThetaVector, cell_probabilities, fit, initialize_theta

THREADS_ENV = "ONESHOT_COPULA_THREADS"
PARAMETERS = ("a0", "a1", "alpha0", "tau0")


@dataclass(frozen=True)
class MarginalModel:
    """Lifetime law per failure mode with log-linear stress links.

    Scale ``exp(s0 + s1 x)`` is shared by both modes; the shape of mode g is
    ``exp(r0_g + r1 x)``.
    """

    family: str
    s0: float
    s1: float
    r0_mode1: float
    r0_mode2: float
    r1: float

    def __post_init__(self):
        if self.family not in ("weibull", "gamma"):
            raise ValueError(f"marginal family must be 'weibull' or 'gamma', got {self.family!r}")

    def scale(self, x):
        return np.exp(self.s0 + self.s1 * np.asarray(x, dtype=float))

    def shape(self, mode: int, x):
        if mode not in (1, 2):
            raise ValueError("mode must be 1 or 2")
        r0 = self.r0_mode1 if mode == 1 else self.r0_mode2
        return np.exp(r0 + self.r1 * np.asarray(x, dtype=float))


WEIBULL_REFERENCE = MarginalModel("weibull", 3.5, -0.02, 2.0, 2.1, -0.03)
GAMMA_REFERENCE = MarginalModel("gamma", -0.3, 0.04, 3.6, 3.8, -0.06)


def marginal_cdf(model: MarginalModel, mode: int, t, x):
    """Failure probability of ``mode`` by time ``t`` at stress ``x``."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("time must be >= 0")
    z = t / model.scale(x)
    shape = model.shape(mode, x)
    if model.family == "weibull":
        out = -np.expm1(-(z**shape))
    else:
        out = special.gammainc(shape, z)
    return out[()] if np.ndim(out) == 0 else out


def marginal_ppf(model: MarginalModel, mode: int, q, x, tol: float = 1e-10):
    """Invert :func:`marginal_cdf` in ``t`` by bisection (absolute tolerance ``tol`` on t)."""
    q = np.asarray(q, dtype=float)
    lo = np.zeros_like(q)
    hi = np.full_like(q, float(model.scale(x)))
    while True:
        short = marginal_cdf(model, mode, hi, x) < q
        if not np.any(short):
            break
        hi = np.where(short, hi * 2.0, hi)
    while np.max(hi - lo, initial=0.0) > tol:
        mid = 0.5 * (lo + hi)
        below = marginal_cdf(model, mode, mid, x) < q
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    return 0.5 * (lo + hi)


@dataclass(frozen=True)
class SimScenario:
    name: str
    stresses: tuple[float, ...]
    inspection_times: tuple[float, ...]
    k_star: int
    marginal: MarginalModel
    copula: CopulaFamily
    theta_true: ThetaVector
    contaminate: bool = False
    normal_stress_x0: float = 25.0

    def __post_init__(self):
        object.__setattr__(self, "stresses", tuple(float(x) for x in self.stresses))
        object.__setattr__(self, "inspection_times", tuple(float(t) for t in self.inspection_times))
        object.__setattr__(self, "copula", CopulaFamily.parse(self.copula))
        object.__setattr__(self, "theta_true", ThetaVector(*map(float, self.theta_true)))
        if int(self.k_star) != self.k_star or self.k_star < 1:
            raise ValueError("k_star must be a positive integer")
        object.__setattr__(self, "k_star", int(self.k_star))
        if not self.stresses or not self.inspection_times:
            raise ValueError("stresses and inspection_times must be non-empty")
        if len(set(self.stresses)) != len(self.stresses):
            raise ValueError("stresses must be distinct")
        if any(not t > 0 for t in self.inspection_times):
            raise ValueError("inspection times must be positive")

    @property
    def alpha0(self) -> float:
        return float(link_alpha(self.copula, self.theta_true, self.normal_stress_x0))

    @property
    def tau0(self) -> float:
        return float(tau_from_alpha(self.copula, self.alpha0))

    def true_values(self) -> dict[str, float]:
        return {"a0": self.theta_true.a0, "a1": self.theta_true.a1,
                "alpha0": self.alpha0, "tau0": self.tau0}

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "stresses": list(self.stresses),
            "inspection_times": list(self.inspection_times),
            "k_star": self.k_star,
            "normal_stress": self.normal_stress_x0,
            "contaminate": self.contaminate,
            "marginal": asdict(self.marginal),
            "copula": {"family": self.copula.value, "a0": self.theta_true.a0, "a1": self.theta_true.a1},
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "SimScenario":
        try:
            cop = doc["copula"]
            return cls(
                name=str(doc.get("name", "scenario")),
                stresses=tuple(doc["stresses"]),
                inspection_times=tuple(doc["inspection_times"]),
                k_star=doc["k_star"],
                marginal=MarginalModel(**doc["marginal"]),
                copula=CopulaFamily.parse(cop["family"]),
                theta_true=ThetaVector(float(cop["a0"]), float(cop["a1"])),
                contaminate=bool(doc.get("contaminate", False)),
                normal_stress_x0=float(doc.get("normal_stress", 25.0)),
            )
        except (KeyError, TypeError) as exc:
            raise ValueError(f"invalid scenario document: {exc}") from None


_REFERENCE_GRID = dict(stresses=(30.0, 40.0, 50.0), inspection_times=(5.0, 10.0, 15.0, 20.0))
_BUILTIN = {
    "gh-weibull": (WEIBULL_REFERENCE, "gh", (-2.0, 0.02)),
    "gh-gamma": (GAMMA_REFERENCE, "gh", (-2.0, 0.02)),
    "frank-pos-weibull": (WEIBULL_REFERENCE, "frank", (1.0, 0.02)),
    "frank-pos-gamma": (GAMMA_REFERENCE, "frank", (1.0, 0.02)),
    "frank-neg-weibull": (WEIBULL_REFERENCE, "frank", (-1.0, -0.02)),
    "frank-neg-gamma": (GAMMA_REFERENCE, "frank", (-1.0, -0.02)),
}
BUILTIN_SCENARIOS = tuple(_BUILTIN)


def builtin_scenario(name: str, k_star: int = 100, contaminate: bool = False) -> SimScenario:
    """One of the six reference designs: 3 stresses x 4 inspection times."""
    try:
        marginal, family, theta = _BUILTIN[name]
    except KeyError:
        raise ValueError(f"unknown scenario {name!r}; choose from {', '.join(BUILTIN_SCENARIOS)}") from None
    return SimScenario(name=name, k_star=k_star, marginal=marginal, copula=family,
                       theta_true=ThetaVector(*theta), contaminate=contaminate,
                       normal_stress_x0=25.0, **_REFERENCE_GRID)


def load_scenario(path: str | os.PathLike) -> SimScenario:
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValueError(f"{path}: not valid JSON ({exc})") from None
    return SimScenario.from_dict(doc)


def true_cell_probs(sc: SimScenario, it: float, x: float) -> CellProbabilities:
    f1 = float(marginal_cdf(sc.marginal, 1, it, x))
    f2 = float(marginal_cdf(sc.marginal, 2, it, x))
    return cell_probabilities(sc.copula, sc.theta_true, x, (f1, f2))


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def replication_seed(seed: int, r: int) -> np.random.SeedSequence:
    """Independent stream for replication ``r``; depends only on ``(seed, r)``."""
    return np.random.SeedSequence(int(seed), spawn_key=(int(r),))


def simulate_dataset(sc: SimScenario, seed) -> OneShotDataset:
    """Multinomial counts at every (inspection time, stress) condition.

    Conditions are drawn in stress-major order. Contamination is applied
    afterwards if ``sc.contaminate`` is set.
    """
    rng = _rng(seed)
    rows = []
    for x in sc.stresses:
        for it in sc.inspection_times:
            probs = np.clip(np.array(true_cell_probs(sc, it, x)), 0.0, None)
            n = rng.multinomial(sc.k_star, probs / probs.sum())
            rows.append((it, x, *(int(c) for c in n)))
    ds = OneShotDataset.from_rows(rows)
    return contaminate(ds, sc) if sc.contaminate else ds


def contaminate(ds: OneShotDataset, sc: SimScenario | None = None) -> OneShotDataset:
    """Move every both-modes failure to mode-2-only at the last condition.

    The last condition is the largest inspection time at the largest stress.
    """
    times = sc.inspection_times if sc is not None else ds.inspection_times
    stresses = sc.stresses if sc is not None else ds.stress_levels
    it, x = max(times), max(stresses)
    try:
        n = ds.cell(it, x)
    except KeyError:
        raise KeyError(f"cannot contaminate: no cell at inspection_time={it}, stress={x}") from None
    return ds.replace_cell(it, x, CellCounts(n.n0, n.n1, n.n2 + n.n12, 0))


def positive_stable(index: float, size, rng: np.random.Generator) -> np.ndarray:
    """Positive stable variates with Laplace transform ``exp(-s**index)``, 0 < index <= 1.

    Chambers-Mallows-Stuck / Kanter construction.
    """
    if not 0 < index <= 1:
        raise ValueError("stable index must lie in (0, 1]")
    if index == 1:
        return np.ones(size)
    theta = rng.uniform(0.0, np.pi, size)
    w = rng.exponential(1.0, size)
    a = index
    return (np.sin(a * theta) / np.sin(theta) ** (1.0 / a)
            * (np.sin((1.0 - a) * theta) / w) ** ((1.0 - a) / a))


def sample_copula(family, alpha: float, size: int, rng: np.random.Generator):
    """Draw ``(U, V)`` pairs from a GH or Frank copula."""
    family = CopulaFamily.parse(family)
    if family is GH:
        # Marshall-Olkin: U_i = psi(E_i / S) with psi(s) = exp(-s^(1/alpha))
        s = positive_stable(1.0 / alpha, size, rng)
        e = rng.exponential(1.0, (2, size))
        u, v = np.exp(-((e / s) ** (1.0 / alpha)))
        return u, v
    u = rng.uniform(size=size)
    w = rng.uniform(size=size)
    if alpha == 0:
        return u, w
    # conditional inversion of dC/du = w in v
    v = -np.log1p(w * np.expm1(-alpha) / (w + (1.0 - w) * np.exp(-alpha * u))) / alpha
    return u, np.clip(v, 0.0, 1.0)


def sample_lifetimes(sc: SimScenario, x: float, size: int, rng) -> tuple[np.ndarray, np.ndarray]:
    """Latent failure times of both modes for ``size`` units at stress ``x``."""
    rng = _rng(rng)
    alpha = float(link_alpha(sc.copula, sc.theta_true, x))
    u, v = sample_copula(sc.copula, alpha, size, rng)
    return marginal_ppf(sc.marginal, 1, u, x), marginal_ppf(sc.marginal, 2, v, x)


def sample_lifetime_pair(sc: SimScenario, x: float, rng) -> tuple[float, float]:
    t1, t2 = sample_lifetimes(sc, x, 1, rng)
    return float(t1[0]), float(t2[0])


def categorize(t1, t2, it: float) -> CellCounts:
    """Counts of units by failure status at inspection time ``it``."""
    d1 = np.asarray(t1) <= it
    d2 = np.asarray(t2) <= it
    return CellCounts(int(np.sum(~d1 & ~d2)), int(np.sum(d1 & ~d2)),
                      int(np.sum(~d1 & d2)), int(np.sum(d1 & d2)))


@dataclass
class MCSummary:
    scenario: SimScenario
    betas: tuple[float, ...]
    replications: int
    seed: int
    means: dict[float, dict[str, float]]
    converged: dict[float, int]
    failures: dict[float, int]
    # (replications, len(betas), 4) raw estimates of PARAMETERS; NaN where not converged
    estimates: np.ndarray = field(repr=False, default=None)

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario.to_dict(),
            "replications": self.replications,
            "seed": self.seed,
            "true_values": self.scenario.true_values(),
            "rows": [
                {"beta": b, **self.means[b], "converged": self.converged[b], "failures": self.failures[b]}
                for b in self.betas
            ],
        }


def _run_replication(sc: SimScenario, betas: tuple[float, ...], seed: int, r: int,
                     config: FitConfig) -> np.ndarray:
    ds = simulate_dataset(sc, replication_seed(seed, r))
    out = np.full((len(betas), len(PARAMETERS)), np.nan)
    try:
        start = config.start if config.start is not None else initialize_theta(ds, sc.copula)
    except (ValueError, ArithmeticError):
        return out
    x0 = sc.normal_stress_x0
    for k, beta in enumerate(betas):
        res = fit(ds, sc.copula, replace(config, beta=beta, start=start))
        if not res.converged:
            continue
        a0, a1 = res.theta_hat
        alpha0 = float(link_alpha(sc.copula, res.theta_hat, x0))
        if not math.isfinite(alpha0):
            continue
        out[k] = (a0, a1, alpha0, float(tau_from_alpha(sc.copula, alpha0)))
    return out


def _run_chunk(args) -> list[np.ndarray]:
    sc, betas, seed, indices, config = args
    return [_run_replication(sc, betas, seed, r, config) for r in indices]


def resolve_workers(workers: int | None = None) -> int:
    """Worker count: explicit value, else ``$ONESHOT_COPULA_THREADS``, else 1."""
    if workers is None:
        env = os.environ.get(THREADS_ENV, "").strip()
        workers = int(env) if env else 1
    return max(1, int(workers))


def monte_carlo(sc: SimScenario, betas: Sequence[float], replications: int, seed: int,
                workers: int | None = None, config: FitConfig = FitConfig()) -> MCSummary:
    """Mean QMDPDE estimates over ``replications`` simulated datasets.

    Replication ``r`` uses its own stream derived from ``(seed, r)``, so the
    result is identical whatever the worker count. Non-converged fits are left
    out of the means and counted in ``failures``.
    """
    if replications < 1:
        raise ValueError("replications must be >= 1")
    betas = tuple(sorted(float(b) for b in betas))
    if not betas or any(b < 0 for b in betas):
        raise ValueError("betas must be a non-empty list of values >= 0")
    workers = min(resolve_workers(workers), replications)
    if workers == 1:
        rows = _run_chunk((sc, betas, seed, range(replications), config))
    else:
        chunks = [range(i, replications, workers) for i in range(workers)]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_run_chunk, [(sc, betas, seed, c, config) for c in chunks]))
        rows = [None] * replications
        for chunk, part in zip(chunks, parts):
            for r, row in zip(chunk, part):
                rows[r] = row
    est = np.stack(rows)
    means, conv, fail = {}, {}, {}
    for k, beta in enumerate(betas):
        ok = ~np.isnan(est[:, k, 0])
        conv[beta] = int(ok.sum())
        fail[beta] = replications - conv[beta]
        means[beta] = {
            p: (math.fsum(est[ok, k, j]) / conv[beta] if conv[beta] else math.nan)
            for j, p in enumerate(PARAMETERS)
        }
    return MCSummary(scenario=sc, betas=betas, replications=replications, seed=int(seed),
                     means=means, converged=conv, failures=fail, estimates=est)
