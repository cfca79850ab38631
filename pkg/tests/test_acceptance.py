"""Acceptance checks, one group per criterion.

Each test is tagged ``acceptance(n, title)``; the terminal summary prints one
PASS/FAIL line per criterion. Run alone with ``pytest tests/test_acceptance.py``.
"""

import io
import json
import math
import os
import subprocess
import sys
import time
from contextlib import redirect_stdout

import mpmath
import numpy as np
import pytest

from oneshot_copula.cli import main
from oneshot_copula.copulas import (
    FRANK,
    GH,
    copula_cdf,
    copula_pdf,
    frank_alpha_from_tau,
    frank_tau,
    frank_tau_approx,
    gh_alpha_from_tau,
    gh_tau,
)
from oneshot_copula.datasets import serial_sacrifice
from oneshot_copula.inference import FitConfig, abias, fit, maximize_composite_loglik
from oneshot_copula.simulation import (
    BUILTIN_SCENARIOS,
    builtin_scenario,
    categorize,
    monte_carlo,
    sample_lifetimes,
    true_cell_probs,
)

SS = serial_sacrifice().dataset
BETAS = (0.0, 0.2, 0.4, 0.6)


def acceptance(number, title):
    return pytest.mark.acceptance(number, title)


def cli_json(*argv):
    buf = io.StringIO()
    with redirect_stdout(buf):
        code = main(list(argv))
    return code, json.loads(buf.getvalue())


# ------------------------------------------------------------- 1

@acceptance(1, "serial sacrifice, GH QMLE")
def test_c1_gh_real_data():
    t0 = time.perf_counter()
    code, doc = cli_json("fit", "--builtin", "serial-sacrifice", "--copula", "gh", "--beta", "0")
    elapsed = time.perf_counter() - t0
    row = doc["rows"][0]
    print(f"a0={row['a0']:.4f} a1={row['a1']:.4f} alpha(0)={row['alpha']['0']:.4f} "
          f"tau(0)={row['tau']['0']:.4f} ({elapsed:.2f} s)")
    assert code == 0
    assert abs(row["a0"] - (-2.135)) <= 0.010
    assert abs(row["a1"] - 0.048) <= 0.05
    assert abs(row["alpha"]["0"] - 1.118) <= 0.005
    assert abs(row["tau"]["0"] - 0.106) <= 0.005
    assert elapsed < 1.0


# ------------------------------------------------------------- 2

@acceptance(2, "serial sacrifice, Frank beta sweep")
def test_c2_frank_real_data():
    t0 = time.perf_counter()
    code, doc = cli_json("fit", "--builtin", "serial-sacrifice", "--copula", "frank", "--beta", "0,0.2,0.4,0.6")
    elapsed = time.perf_counter() - t0
    rows = {r["beta"]: r for r in doc["rows"]}
    q, r6 = rows[0.0], rows[0.6]
    print(f"beta=0: ({q['a0']:.4f}, {q['a1']:.4f}) alpha(1)={q['alpha']['1']:.4f}; "
          f"beta=0.6: ({r6['a0']:.4f}, {r6['a1']:.4f}) tau(1)={r6['tau']['1']:.4f} ({elapsed:.2f} s)")
    assert code == 0
    assert abs(q["a0"] - 1.342) <= 0.010 and abs(q["a1"] - 0.425) <= 0.010
    assert abs(r6["a0"] - 1.185) <= 0.020 and abs(r6["a1"] - 0.742) <= 0.020
    assert abs(q["alpha"]["1"] - 1.767) <= 0.010
    assert abs(r6["tau"]["1"] - 0.207) <= 0.005
    assert elapsed < 2.0


# ------------------------------------------------------------- 3

@acceptance(3, "ABias unweighted-mean definition")
def test_c3_abias():
    targets = {FRANK: 0.691, GH: 0.899}
    for family, target in targets.items():
        theta = fit(SS, family, FitConfig(beta=0.0)).theta_hat
        plain = abias(SS, family, theta)
        weighted = abias(SS, family, theta, weighted=True)
        print(f"{family.value}: unweighted {plain:.4f}, K-weighted {weighted:.4f}, target {target}")
        assert abs(plain - target) <= 0.05


# ------------------------------------------------------------- 4

@acceptance(4, "KL minimiser equals composite log-likelihood maximiser")
def test_c4_proposition_one():
    t0 = time.perf_counter()
    for family in (GH, FRANK):
        a = fit(SS, family, FitConfig(beta=0.0)).theta_hat
        b = maximize_composite_loglik(SS, family)
        print(f"{family.value}: {tuple(a)} vs {tuple(b)}")
        assert abs(a.a0 - b.a0) <= 1e-4 and abs(a.a1 - b.a1) <= 1e-4
    assert time.perf_counter() - t0 < 2.0


# ------------------------------------------------------------- 5

@pytest.mark.slow
@acceptance(5, "GH/Weibull K*=200 Monte Carlo, 200 replications")
def test_c5_simulation_reproduction():
    t0 = time.perf_counter()
    mc = monte_carlo(builtin_scenario("gh-weibull", k_star=200), [0.0], 200, seed=7)
    elapsed = time.perf_counter() - t0
    m = mc.means[0.0]
    print(f"mean a0={m['a0']:.4f} tau0={m['tau0']:.4f} failures={mc.failures[0.0]} ({elapsed:.1f} s)")
    assert abs(m["a0"] - (-2.039)) <= 0.15
    assert abs(m["tau0"] - 0.185) <= 0.01
    assert elapsed < 60.0


# ------------------------------------------------------------- 6

@pytest.fixture(scope="module")
def contaminated_studies():
    t0 = time.perf_counter()
    out = {name: monte_carlo(builtin_scenario(name, k_star=100, contaminate=True), BETAS, 200, seed=11)
           for name in BUILTIN_SCENARIOS}
    return out, time.perf_counter() - t0


@pytest.mark.slow
@acceptance(6, "robustness ordering in all six contaminated scenarios")
def test_c6_robustness_ordering(contaminated_studies):
    studies, elapsed = contaminated_studies
    ok = True
    for name, mc in studies.items():
        tau0 = mc.scenario.tau0
        dist = [abs(mc.means[b]["tau0"] - tau0) for b in BETAS]
        decreasing = all(x > y for x, y in zip(dist, dist[1:]))
        ok &= decreasing
        print(f"{name}: true {tau0:.4f}, means " + " ".join(f"{mc.means[b]['tau0']:.4f}" for b in BETAS)
              + ("" if decreasing else "  NOT DECREASING"))
    print(f"total {elapsed:.1f} s")
    assert ok
    assert elapsed < 300.0


# ------------------------------------------------------------- 7

_C7_TIME = []
C7_CASES = [(GH, 1.0), (GH, 1.5), (GH, 5.0), (FRANK, -5.0), (FRANK, 1.0), (FRANK, 5.0), (FRANK, 20.0)]


def timed(fn):
    def wrapper(*args, **kwargs):
        t0 = time.perf_counter()
        try:
            return fn(*args, **kwargs)
        finally:
            _C7_TIME.append(time.perf_counter() - t0)
    wrapper.__name__ = fn.__name__
    return wrapper


@acceptance(7, "copula math property suite")
@timed
def test_c7_uniform_margins():
    g = np.linspace(0, 1, 201)
    for family, alpha in C7_CASES:
        assert np.allclose(copula_cdf(family, g, 1.0, alpha), g, atol=1e-14)
        assert np.allclose(copula_cdf(family, 1.0, g, alpha), g, atol=1e-14)
        assert np.all(copula_cdf(family, g, 0.0, alpha) == 0.0)


@acceptance(7, "copula math property suite")
@timed
def test_c7_two_increasing():
    rng = np.random.default_rng(7)
    for family, alpha in C7_CASES:
        u = np.sort(rng.uniform(size=(5000, 2)), axis=1)
        v = np.sort(rng.uniform(size=(5000, 2)), axis=1)
        vol = (copula_cdf(family, u[:, 1], v[:, 1], alpha) - copula_cdf(family, u[:, 0], v[:, 1], alpha)
               - copula_cdf(family, u[:, 1], v[:, 0], alpha) + copula_cdf(family, u[:, 0], v[:, 0], alpha))
        assert vol.min() >= -1e-12


@acceptance(7, "copula math property suite")
@timed
def test_c7_frechet_bounds():
    u, v = np.meshgrid(np.linspace(0, 1, 101), np.linspace(0, 1, 101))
    for family, alpha in C7_CASES:
        c = copula_cdf(family, u, v, alpha)
        assert np.all(c >= np.maximum(u + v - 1, 0) - 1e-14)
        assert np.all(c <= np.minimum(u, v) + 1e-14)


def _mp_cdf(family, u, v, a):
    u, v, a = mpmath.mpf(u), mpmath.mpf(v), mpmath.mpf(a)
    if family is GH:
        return mpmath.exp(-(((-mpmath.log(u)) ** a + (-mpmath.log(v)) ** a) ** (1 / a)))
    return -mpmath.log(1 + mpmath.expm1(-a * u) * mpmath.expm1(-a * v) / mpmath.expm1(-a)) / a


@acceptance(7, "copula math property suite")
@timed
def test_c7_density_finite_difference():
    # mixed central difference of the CDF, evaluated at 40 digits so that
    # rounding cannot swamp small densities
    rng = np.random.default_rng(8)
    h = mpmath.mpf("1e-10")
    with mpmath.workdps(40):
        for family, alpha in C7_CASES[:-1]:
            for u, v in rng.uniform(0.05, 0.95, size=(60, 2)):
                c = lambda du, dv: _mp_cdf(family, u + du, v + dv, alpha)
                fd = float((c(h, h) - c(h, -h) - c(-h, h) + c(-h, -h)) / (4 * h * h))
                assert abs(float(copula_pdf(family, u, v, alpha)) - fd) <= 1e-4 * abs(fd)


@acceptance(7, "copula math property suite")
@timed
def test_c7_tau_round_trips():
    taus = np.linspace(0.0, 0.99, 100)
    assert np.max(np.abs(gh_tau(gh_alpha_from_tau(taus)) - taus)) <= 1e-12
    taus = np.linspace(-0.99, 0.99, 67)
    assert np.max(np.abs(frank_tau(frank_alpha_from_tau(taus)) - taus)) <= 1e-6


@acceptance(7, "copula math property suite")
@timed
def test_c7_frank_tau_odd():
    alphas = np.linspace(-40, 40, 161)
    assert np.max(np.abs(frank_tau(alphas) + frank_tau(-alphas))) <= 1e-12


@acceptance(7, "copula math property suite")
@timed
def test_c7_frank_linear_approximation_band():
    # stated band: |alpha/9 - tau| <= 0.02 on [-3, 3]
    alphas = np.linspace(-3.0, 3.0, 601)
    gap = np.abs(frank_tau_approx(alphas) - frank_tau(alphas))
    worst = alphas[np.argmax(gap)]
    print(f"max |alpha/9 - tau| on [-3, 3] = {gap.max():.5f} at alpha = {worst:g}")
    assert gap.max() <= 0.02


@acceptance(7, "copula math property suite")
def test_c7_runtime():
    print(f"property suite {sum(_C7_TIME):.2f} s")
    assert sum(_C7_TIME) < 10.0


# ------------------------------------------------------------- 8

def _freq_compare(sc, it, x, reps, rng):
    k = sc.k_star
    pi = np.array(true_cell_probs(sc, it, x))
    multi = rng.multinomial(k, pi / pi.sum(), size=reps) / k
    t1, t2 = sample_lifetimes(sc, x, k * reps, rng)
    t1, t2 = t1.reshape(reps, k), t2.reshape(reps, k)
    life = np.array([categorize(a, b, it).as_tuple() for a, b in zip(t1, t2)]) / k
    diff = multi.mean(axis=0) - life.mean(axis=0)
    se = np.sqrt(multi.var(axis=0, ddof=1) / reps + life.var(axis=0, ddof=1) / reps)
    return diff, se


@pytest.mark.slow
@acceptance(8, "multinomial generator matches lifetime sampling")
def test_c8_generator_equivalence():
    t0 = time.perf_counter()
    rng = np.random.default_rng(8)
    worst = 0.0
    for name in ("gh-weibull", "gh-gamma", "frank-pos-weibull", "frank-neg-gamma"):
        sc = builtin_scenario(name, k_star=200)
        diff, se = _freq_compare(sc, 10.0, 40.0, 2000, rng)
        z = np.abs(diff) / np.where(se > 0, se, np.inf)
        worst = max(worst, float(z.max()))
        print(f"{name}: |diff|/se = " + " ".join(f"{v:.2f}" for v in z))
        assert np.all(z <= 3.0)
    elapsed = time.perf_counter() - t0
    print(f"max z {worst:.2f} ({elapsed:.1f} s)")
    assert elapsed < 60.0


# ------------------------------------------------------------- 9

@acceptance(9, "simulate output identical across runs and worker counts")
def test_c9_determinism():
    argv = [sys.executable, "-m", "oneshot_copula", "simulate", "--scenario", "frank-neg-weibull",
            "--kstar", "100", "--reps", "24", "--seed", "2024", "--contaminate"]
    outputs = []
    for threads in ("1", "1", "3"):
        env = dict(os.environ, ONESHOT_COPULA_THREADS=threads)
        proc = subprocess.run(argv, capture_output=True, env=env, check=True)
        outputs.append(proc.stdout)
    proc = subprocess.run(argv + ["--workers", "2"], capture_output=True, check=True)
    outputs.append(proc.stdout)
    assert len(set(outputs)) == 1
    assert json.loads(outputs[0])["replications"] == 24


# ----------------------------------------------- related invariant (not a criterion)

@pytest.mark.slow
def test_contaminated_intercept_bias_shrinks(contaminated_studies):
    studies, _ = contaminated_studies
    for name, mc in studies.items():
        a0 = mc.scenario.theta_true.a0
        assert abs(mc.means[0.6]["a0"] - a0) < abs(mc.means[0.0]["a0"] - a0), name
