"""Gumbel-Hougaard and Frank copulas.

CDFs, densities, Kendall's tau maps in both directions and the stress links
``alpha = g(a0 + a1 * x)``. Every function accepts scalars or numpy arrays and
broadcasts; scalar input gives a numpy scalar back.
"""

from __future__ import annotations

import enum
import math

import numpy as np
from scipy import integrate, optimize


class DomainError(ValueError):
    """Argument outside the domain of a copula function."""


class CopulaFamily(str, enum.Enum):
    GUMBEL_HOUGAARD = "gh"
    FRANK = "frank"

    @classmethod
    def parse(cls, value: "str | CopulaFamily") -> "CopulaFamily":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("_", "-")
        aliases = {"gh": cls.GUMBEL_HOUGAARD, "gumbel": cls.GUMBEL_HOUGAARD,
                   "gumbel-hougaard": cls.GUMBEL_HOUGAARD, "frank": cls.FRANK}
        try:
            return aliases[key]
        except KeyError:
            raise ValueError(f"unknown copula family {value!r}; expected 'gh' or 'frank'") from None


GH = CopulaFamily.GUMBEL_HOUGAARD
FRANK = CopulaFamily.FRANK

# Frank tau below this |alpha| comes from the series alpha/9 - alpha^3/900.
_FRANK_SERIES_CUTOFF = 1e-3
# Range in which tau ~ alpha/9 is advertised as accurate.
FRANK_APPROX_ALPHA_RANGE = (-3.0, 3.0)
FRANK_APPROX_TAU_RANGE = (-0.307, 0.307)


def _check_unit(name, x, closed=True):
    x = np.asarray(x, dtype=float)
    if closed:
        bad = ~((x >= 0.0) & (x <= 1.0))
    else:
        bad = ~((x > 0.0) & (x < 1.0))
    if np.any(bad):
        interval = "[0, 1]" if closed else "(0, 1)"
        raise DomainError(f"{name} must lie in {interval}")
    return x


def _check_gh_alpha(alpha):
    alpha = np.asarray(alpha, dtype=float)
    if np.any(~(alpha >= 1.0)):
        raise DomainError("Gumbel-Hougaard alpha must be >= 1")
    return alpha


def _check_finite_alpha(alpha):
    alpha = np.asarray(alpha, dtype=float)
    if np.any(~np.isfinite(alpha)):
        raise DomainError("Frank alpha must be finite")
    return alpha


def gh_cdf(u, v, alpha):
    """Gumbel-Hougaard CDF ``exp(-[(-log u)^a + (-log v)^a]^(1/a))``.

    Evaluated as ``m * (1 + (min/m)^a)^(1/a)`` with ``m`` the larger of the two
    log terms, which stays finite for large alpha. C(u, 0) = 0 and C(u, 1) = u
    hold exactly.
    """
    u = _check_unit("u", u)
    v = _check_unit("v", v)
    alpha = _check_gh_alpha(alpha)
    with np.errstate(divide="ignore", invalid="ignore"):
        lu = -np.log(u)
        lv = -np.log(v)
        # scale by the larger term so lu**alpha cannot under/overflow
        big = np.maximum(lu, lv)
        ratio = np.minimum(lu, lv) / big
        s = big * (1.0 + ratio**alpha) ** (1.0 / alpha)
    s = np.where(big == 0.0, 0.0, np.where(np.isinf(big), np.inf, s))
    out = np.exp(-s)
    return out[()] if out.ndim == 0 else out


def gh_pdf(u, v, alpha):
    """Gumbel-Hougaard density on the open unit square."""
    u = _check_unit("u", u, closed=False)
    v = _check_unit("v", v, closed=False)
    alpha = _check_gh_alpha(alpha)
    lu = -np.log(u)
    lv = -np.log(v)
    s = lu**alpha + lv**alpha
    root = s ** (1.0 / alpha)
    return (np.exp(-root) / (u * v) * (lu * lv) ** (alpha - 1.0)
            * s ** (2.0 / alpha - 2.0) * (1.0 + (alpha - 1.0) / root))


def frank_cdf(u, v, alpha):
    """Frank CDF; ``alpha == 0`` is the independence copula ``u * v``."""
    u = _check_unit("u", u)
    v = _check_unit("v", v)
    alpha = _check_finite_alpha(alpha)
    u, v, alpha = np.broadcast_arrays(u, v, alpha)
    out = u * v
    nz = alpha != 0.0
    if np.any(nz):
        a, uu, vv = alpha[nz], u[nz], v[nz]
        with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
            ratio = np.expm1(-a * uu) * np.expm1(-a * vv) / np.expm1(-a)
            direct = -np.log1p(ratio) / a
            # For large positive alpha, 1 + ratio cancels; rewrite it as
            # [e^{-au}(1 - e^{-av}) + e^{-av}(1 - e^{-a(1-v)})] / (1 - e^{-a}),
            # a sum of two nonnegative terms.
            m = -np.exp(-a * uu) * np.expm1(-a * vv) - np.exp(-a * vv) * np.expm1(-a * (1.0 - vv))
            rearranged = -(np.log(m) - np.log(-np.expm1(-a))) / a
        out = np.array(out, dtype=float, copy=True)
        out[nz] = np.where((a > 0) & (ratio < -0.5), rearranged, direct)
    # rounding can push the result a few ulps outside [0, 1]
    out = np.clip(out, 0.0, 1.0)
    return out[()] if out.ndim == 0 else out


def frank_pdf(u, v, alpha):
    """Frank density; ``alpha == 0`` gives 1 everywhere."""
    u = _check_unit("u", u)
    v = _check_unit("v", v)
    alpha = _check_finite_alpha(alpha)
    u, v, alpha = np.broadcast_arrays(u, v, alpha)
    out = np.ones(u.shape, dtype=float)
    nz = alpha != 0.0
    if np.any(nz):
        a, uu, vv = alpha[nz], u[nz], v[nz]
        # alpha (1 - e^-a) e^{-a(u+v)} / [(1 - e^-a) - (1 - e^-au)(1 - e^-av)]^2
        one_minus = -np.expm1(-a)
        den = one_minus - np.expm1(-a * uu) * np.expm1(-a * vv)
        out[nz] = a * one_minus * np.exp(-a * (uu + vv)) / den**2
    return out[()] if out.ndim == 0 else out


def gh_tau(alpha):
    """Kendall's tau of the GH copula, ``1 - 1/alpha``."""
    alpha = _check_gh_alpha(alpha)
    return 1.0 - 1.0 / alpha


def gh_alpha_from_tau(tau):
    tau = np.asarray(tau, dtype=float)
    if np.any(~((tau >= 0.0) & (tau < 1.0))):
        raise DomainError("Gumbel-Hougaard tau must lie in [0, 1)")
    return 1.0 / (1.0 - tau)


def _debye_integrand(t):
    # t / (e^t - 1), with its limit 1 at t = 0
    return 1.0 if t == 0.0 else t / math.expm1(t)


def _frank_tau_scalar(alpha: float) -> float:
    if alpha == 0.0:
        return 0.0
    if abs(alpha) < _FRANK_SERIES_CUTOFF:
        return alpha / 9.0 - alpha**3 / 900.0
    integral, _ = integrate.quad(_debye_integrand, 0.0, alpha, epsabs=1e-13, epsrel=1e-13, limit=200)
    return 1.0 + 4.0 / alpha * (integral / alpha - 1.0)


def frank_tau(alpha):
    """Kendall's tau of the Frank copula.

    ``1 + (4/a) * ((1/a) * int_0^a t/(e^t - 1) dt - 1)`` with the integral
    done by adaptive quadrature.
    """
    alpha = _check_finite_alpha(alpha)
    if alpha.ndim == 0:
        return np.float64(_frank_tau_scalar(float(alpha)))
    return np.vectorize(_frank_tau_scalar, otypes=[float])(alpha)


def frank_tau_approx(alpha):
    """Linear approximation ``tau ~ alpha / 9``, accurate for |alpha| <= 3."""
    return np.asarray(alpha, dtype=float) / 9.0


def _frank_alpha_scalar(tau: float, xtol: float) -> float:
    if tau == 0.0:
        return 0.0
    # frank_tau is odd and strictly increasing, so solve for |tau| and flip
    target = abs(tau)
    hi = max(9.0 * target, 1e-3)
    while _frank_tau_scalar(hi) < target:
        hi *= 2.0
    lo = hi / 2.0
    while _frank_tau_scalar(lo) > target:
        lo /= 2.0
        if lo < 1e-12:
            lo = 0.0
            break
    root = optimize.brentq(lambda a: _frank_tau_scalar(a) - target, lo, hi, xtol=xtol, rtol=4 * np.finfo(float).eps)
    return math.copysign(root, tau)


def frank_alpha_from_tau(tau, xtol: float = 1e-10):
    """Invert :func:`frank_tau` by bracketed root finding seeded at ``9 * tau``."""
    tau = np.asarray(tau, dtype=float)
    if np.any(~(np.abs(tau) < 1.0)):
        raise DomainError("Frank tau must lie in (-1, 1)")
    if tau.ndim == 0:
        return np.float64(_frank_alpha_scalar(float(tau), xtol))
    return np.vectorize(lambda t: _frank_alpha_scalar(t, xtol), otypes=[float])(tau)


def copula_cdf(family, u, v, alpha):
    family = CopulaFamily.parse(family)
    return gh_cdf(u, v, alpha) if family is GH else frank_cdf(u, v, alpha)


def copula_pdf(family, u, v, alpha):
    family = CopulaFamily.parse(family)
    return gh_pdf(u, v, alpha) if family is GH else frank_pdf(u, v, alpha)


def tau_from_alpha(family, alpha):
    family = CopulaFamily.parse(family)
    return gh_tau(alpha) if family is GH else frank_tau(alpha)


def alpha_from_tau(family, tau):
    family = CopulaFamily.parse(family)
    return gh_alpha_from_tau(tau) if family is GH else frank_alpha_from_tau(tau)


def link_alpha(family, theta, x):
    """Copula parameter at stress ``x`` for regression ``theta = (a0, a1)``.

    GH uses ``1 + exp(a0 + a1 x)`` so alpha stays >= 1; Frank uses the
    identity link.
    """
    family = CopulaFamily.parse(family)
    a0, a1 = theta
    eta = a0 + a1 * np.asarray(x, dtype=float)
    if family is GH:
        return 1.0 + np.exp(eta)
    return eta + 0.0


def link_inverse(family, alpha):
    """Linear predictor giving ``alpha``: ``log(alpha - 1)`` for GH, identity for Frank."""
    family = CopulaFamily.parse(family)
    alpha = np.asarray(alpha, dtype=float)
    if family is GH:
        if np.any(~(alpha > 1.0)):
            raise DomainError("GH link inverse needs alpha > 1")
        return np.log(alpha - 1.0)
    return alpha + 0.0
