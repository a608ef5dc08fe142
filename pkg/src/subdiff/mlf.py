"""Two-parameter Mittag-Leffler function E_{a,b}(z) for real arguments.

    E_{a,b}(z) = sum_{k>=0} z^k / Gamma(a k + b)

The fractional solvers only ever need the completely monotone decay
profile x -> E_{a,1}(-x) on x >= 0, so evaluation is organised around
accuracy on the negative real axis.  Two expansions are used:

* the power series above, summed in float64 while cancellation is mild
  and in extended precision (mpmath) otherwise, stopping when the next
  term falls below 1e-16 of the partial sum (hard cap ``MAX_TERMS``);

* the asymptotic expansion for z -> -infinity,

      E_{a,b}(z) ~ -sum_{k>=1} z^{-k} / Gamma(b - a k),

  truncated at its smallest term.  The first omitted term serves as an
  error estimate and the branch is only accepted when that estimate
  clears ``ASYM_ACCEPT`` relative to the partial sum.

The series is preferred for |z| <= Z_SWITCH and the asymptotic branch
beyond, each falling back to the other when its own accuracy check
fails.  If neither branch can certify the tolerance an AccuracyError is
raised rather than returning a silently wrong value.  With the 500-term
cap this happens on the negative axis only for small orders (roughly
alpha < 0.2, far below anything the solvers use) and for the
exponential edge case alpha = beta = 1 beyond the series range, where
the asymptotic expansion degenerates to zero.

Positive arguments are supported through the series alone, up to the
point where either the term cap or float64 overflow (|z|^(1/a) around
700) is hit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import mpmath as mp
import numpy as np
from scipy.special import gammaln, rgamma

from .errors import AccuracyError, ValidationError

MAX_TERMS = 500          # hard cap on series terms
SERIES_STOP = 1e-16      # next-term / partial-sum termination ratio
Z_SWITCH = 50.0          # series preferred for |z| <= Z_SWITCH
ASYM_ACCEPT = 1e-13      # relative first-omitted-term acceptance bound
_F64_PEAK = 7.0          # max ln(term) for a float64 series attempt
_F64_LOSS = 3.2e2        # max (max term)/|sum| accepted in float64
_ASYM_KMAX = 480         # asymptotic terms never exceed the series cap scale


@dataclass(frozen=True)
class MlfParams:
    """Order pair (alpha, beta) of E_{alpha,beta}.

    The solvers use 0 < alpha < 1; alpha = 1 is allowed so the
    exponential identity E_{1,1}(z) = exp(z) can be cross-checked.
    """

    alpha: float
    beta: float

    def __post_init__(self):
        if not (math.isfinite(self.alpha) and 0.0 < self.alpha <= 1.0):
            raise ValidationError(
                f"alpha must lie in (0, 1], got {self.alpha!r}")
        if not (math.isfinite(self.beta) and self.beta > 0.0):
            raise ValidationError(f"beta must be positive, got {self.beta!r}")


class _BranchFailed(Exception):
    """Internal: one expansion could not certify the tolerance."""


# ---------------------------------------------------------------------------
# power series


def _term_log_profile(alpha: float, beta: float, absz: float) -> np.ndarray:
    """ln |term_k| for k = 0..MAX_TERMS at |z| = absz."""
    k = np.arange(MAX_TERMS + 1, dtype=float)
    with np.errstate(divide="ignore"):
        return k * np.log(absz) - gammaln(alpha * k + beta)


def _scale_floor_log(absz: float) -> float:
    # conservative lower bound on ln |E_{a,b}(-x)| away from zeros;
    # the negative axis decays no faster than ~ x^-2 for the (a, b)
    # pairs with b >= a used here
    return -2.0 * math.log(max(absz, 1.0)) - 8.0


def _series_f64(alpha: float, beta: float, z: float):
    """Float64 series; returns (value, max_abs_term, converged)."""
    s = 0.0
    zk = 1.0
    peak = 0.0
    for k in range(MAX_TERMS):
        t = zk * rgamma(alpha * k + beta)
        s += t
        peak = max(peak, abs(t))
        zk *= z
        nxt = abs(zk) * abs(rgamma(alpha * (k + 1) + beta))
        if nxt < SERIES_STOP * abs(s):
            return s, peak, True
    return s, peak, False


@lru_cache(maxsize=64)
def _gamma_table(alpha: float, beta: float, dps: int):
    """mpmath Gamma(alpha k + beta), k = 0..MAX_TERMS, at ``dps`` digits."""
    with mp.workdps(dps):
        a, b = mp.mpf(alpha), mp.mpf(beta)
        return tuple(mp.gamma(a * k + b) for k in range(MAX_TERMS + 1))


def _series_mp(alpha: float, beta: float, z: float, dps: int):
    """Extended-precision series; returns (value, max_abs_term, converged)."""
    gammas = _gamma_table(alpha, beta, dps)
    with mp.workdps(dps):
        zz = mp.mpf(z)
        s = mp.mpf(0)
        zk = mp.mpf(1)
        peak = mp.mpf(0)
        for k in range(MAX_TERMS):
            t = zk / gammas[k]
            s += t
            peak = max(peak, abs(t))
            zk *= zz
            if abs(zk) / gammas[k + 1] < SERIES_STOP * abs(s):
                return float(s), float(peak), True
        return float(s), float(peak), False


def _eval_series(alpha: float, beta: float, z: float) -> float:
    absz = abs(z)
    profile = _term_log_profile(alpha, beta, absz)
    peak_ln = float(profile.max())
    ipeak = int(profile.argmax())

    if z > 0.0:
        # all terms positive: sum their exponentials, no cancellation
        if peak_ln > 700.0:
            raise AccuracyError(
                f"E_({alpha},{beta})({z}) overflows float64 "
                f"(peak term exp({peak_ln:.0f}))")
        if profile[ipeak:].min() > peak_ln + math.log(SERIES_STOP):
            raise _BranchFailed("series cap reached before convergence")
        s = 0.0
        for k in range(MAX_TERMS):
            s += math.exp(profile[k])
            if math.exp(profile[k + 1]) < SERIES_STOP * s:
                return s
        raise _BranchFailed("series cap reached before convergence")

    # z < 0: alternating terms, cancellation governs the precision needed.
    # The pre-check below is optimistic (|sum| can never exceed ~1.2 on
    # the negative axis); the in-loop termination test is authoritative.
    floor_ln = _scale_floor_log(absz)
    if profile[ipeak:].min() > math.log(1.2) + math.log(SERIES_STOP):
        raise _BranchFailed("series cap reached before convergence")

    if peak_ln <= _F64_PEAK:
        value, peak, converged = _series_f64(alpha, beta, z)
        if converged and value != 0.0 and peak <= _F64_LOSS * abs(value):
            return value

    # required digits: cancellation loss plus working headroom
    dps = int((peak_ln - floor_ln) / math.log(10.0)) + 25
    for _ in range(2):
        dps = min(dps, 450)
        value, peak, converged = _series_mp(alpha, beta, z, dps)
        if not converged:
            raise _BranchFailed("series cap reached before convergence")
        round_err = 10.0 ** (1 - dps) * peak
        if value != 0.0 and round_err <= 1e-13 * abs(value):
            return value
        dps = int(dps * 1.6)
    raise _BranchFailed("series precision escalation failed")


# ---------------------------------------------------------------------------
# asymptotic expansion


def _asym_batch(alpha: float, beta: float, x: np.ndarray):
    """Asymptotic values of E_{a,b}(-x) with per-entry optimal truncation.

    Returns (values, truncation-error estimates).  The estimate is the
    smooth majorant Gamma(1 + a k - b) / (pi x^k) of the first omitted
    term; the oscillating sine factor from the reflection formula is
    deliberately left out of the truncation logic so that near-pole
    terms (which are small only accidentally) do not trigger premature
    freezing.  Entries whose envelope never shrank keep est = inf.
    """
    x = np.asarray(x, dtype=float)
    lnx = np.log(x)
    s = np.zeros_like(x)
    prev_env = np.full_like(x, np.inf)
    est = np.full_like(x, np.inf)
    active = np.ones(x.shape, dtype=bool)
    for k in range(1, _ASYM_KMAX + 1):
        g = 1.0 + alpha * k - beta
        u = beta - alpha * k
        xk = np.exp(-k * lnx)
        if g <= 0.0:
            # only for beta > 1 at small k, where u >= 1: |1/Gamma(u)| <= 1.13
            coeff = float(rgamma(u))
            term = -((-1.0) ** k) * coeff * xk
            env = 1.2 * xk
        else:
            # reflection 1/Gamma(u) = Gamma(g) sin(pi u) / pi with the
            # sine phase-reduced to keep it accurate for large |u|
            m = round(u)
            r = u - m
            sn = math.sin(math.pi * r) * (1.0 if m % 2 == 0 else -1.0)
            env = np.exp(gammaln(g) - k * lnx) / math.pi
            term = -((-1.0) ** k) * env * sn
        grew = active & (env > prev_env)
        est[grew] = env[grew]
        active &= ~grew
        s[active] += term[active]
        # terms already negligible against the sum: converged for float64
        tiny = active & (env < 1e-17 * np.abs(s))
        est[tiny] = env[tiny]
        active &= ~tiny
        prev_env = env
        if not active.any():
            break
    return s, est


def _eval_asym(alpha: float, beta: float, z: float) -> float:
    value, est = _asym_batch(alpha, beta, np.array([-z]))
    v, e = float(value[0]), float(est[0])
    if v == 0.0 or not (e <= ASYM_ACCEPT * abs(v)):
        raise _BranchFailed(f"asymptotic error estimate {e:.2e} too large")
    return v


# ---------------------------------------------------------------------------
# public entry points


def mlf_eval(params: MlfParams, z: float) -> float:
    """Evaluate E_{alpha,beta}(z) for real z.

    Guaranteed-accuracy regime is z <= 0 (relative error ~1e-13);
    positive z is served by the series up to its overflow bound.
    Raises AccuracyError when neither expansion can certify the result.
    """
    if not isinstance(params, MlfParams):
        params = MlfParams(*params)
    alpha, beta = params.alpha, params.beta
    if not math.isfinite(z):
        raise ValidationError(f"z must be finite, got {z!r}")
    if z == 0.0:
        return float(rgamma(beta))

    if z > 0.0:
        try:
            return _eval_series(alpha, beta, z)
        except _BranchFailed as exc:
            raise AccuracyError(
                f"series cannot reach tolerance for "
                f"E_({alpha},{beta})({z}): {exc}") from None

    branches = [_eval_series, _eval_asym]
    if -z > Z_SWITCH:
        branches.reverse()
    reasons = []
    for branch in branches:
        try:
            return branch(alpha, beta, z)
        except _BranchFailed as exc:
            reasons.append(str(exc))
    raise AccuracyError(
        f"no expansion meets tolerance for E_({alpha},{beta})({z}): "
        + "; ".join(reasons))


def mlf_e_alpha_1(alpha: float, x: float) -> float:
    """Decay factor E_{alpha,1}(-x) for x >= 0; lies in (0, 1]."""
    if not (math.isfinite(x) and x >= 0.0):
        raise ValidationError(f"x must be finite and nonnegative, got {x!r}")
    return mlf_eval(MlfParams(alpha, 1.0), -x)


# ---------------------------------------------------------------------------
# vectorised negative-axis driver used by the spectral solver


@lru_cache(maxsize=256)
def _axis_thresholds(alpha: float, beta: float):
    """(x_f64, x_series, x_asym) branch boundaries on the negative axis.

    x <= x_f64: float64 series; x >= x_asym: asymptotic branch;
    between: extended-precision series (feasible up to x_series).
    """

    def peak_ln(x):
        return float(_term_log_profile(alpha, beta, x).max())

    def series_ok(x):
        try:
            _eval_series(alpha, beta, -x)
            return True
        except (_BranchFailed, AccuracyError):
            return False

    def asym_ok(x):
        v, e = _asym_batch(alpha, beta, np.array([x]))
        return v[0] != 0.0 and e[0] <= ASYM_ACCEPT * abs(v[0])

    def bisect(pred, lo, hi, rising):
        # boundary of a monotone predicate on [lo, hi]
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            if pred(mid) == rising:
                hi = mid
            else:
                lo = mid
        return lo if rising else hi

    x_f64 = bisect(lambda x: peak_ln(x) > _F64_PEAK, 1e-6, 80.0, True)
    x_series = bisect(lambda x: not series_ok(x), 1e-6, 1e4, True)
    if asym_ok(1e-3):
        x_asym = 1e-3
    elif not asym_ok(9e5):
        x_asym = math.inf
    else:
        x_asym = bisect(asym_ok, 1e-3, 9e5, True)
    return x_f64, x_series, x_asym


@lru_cache(maxsize=200_000)
def _belt_value(alpha: float, beta: float, x: float) -> float:
    return mlf_eval(MlfParams(alpha, beta), -x)


def e_alpha_1_profile(alpha: float, xs) -> np.ndarray:
    """E_{alpha,1}(-x) for an array of x >= 0, branch-dispatched in bulk."""
    xs = np.asarray(xs, dtype=float)
    if xs.size and (not np.all(np.isfinite(xs)) or xs.min() < 0.0):
        raise ValidationError("profile arguments must be finite and >= 0")
    MlfParams(alpha, 1.0)
    x_f64, _, x_asym = _axis_thresholds(alpha, 1.0)
    out = np.empty_like(xs)

    zero = xs == 0.0
    out[zero] = 1.0
    low = ~zero & (xs <= x_f64)
    high = xs >= np.maximum(x_asym, x_f64)
    belt = ~zero & ~low & ~high

    if low.any():
        out[low] = _series_batch_f64(alpha, 1.0, xs[low])
    if high.any():
        v, est = _asym_batch(alpha, 1.0, xs[high])
        bad = ~(est <= ASYM_ACCEPT * np.abs(v))
        if bad.any():
            idx = np.flatnonzero(high)[bad]
            v[bad] = [_belt_value(alpha, 1.0, float(xs[i])) for i in idx]
        out[high] = v
    for i in np.flatnonzero(belt):
        out[i] = _belt_value(alpha, 1.0, float(xs[i]))
    return out


def _series_batch_f64(alpha: float, beta: float, x: np.ndarray) -> np.ndarray:
    """Vectorised float64 series for E_{a,b}(-x) on small x."""
    z = -np.asarray(x, dtype=float)
    s = np.zeros_like(z)
    zk = np.ones_like(z)
    active = np.ones(z.shape, dtype=bool)
    for k in range(MAX_TERMS):
        s[active] += zk[active] * rgamma(alpha * k + beta)
        zk *= z
        nxt = np.abs(zk) * abs(rgamma(alpha * (k + 1) + beta))
        active &= ~(nxt < SERIES_STOP * np.abs(s))
        if not active.any():
            return s
    raise AccuracyError("float64 series batch did not converge within cap")
