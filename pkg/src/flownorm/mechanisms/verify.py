"""Verification of (epsilon, delta) claims on small finite domains.

The privacy inequality under test says that for every pair of adjacent
databases and every output event S, Pr[M(X) in S] <= e^eps * Pr[M(X') in S]
+ delta. Three verification routes are provided, strongest first:

* ``ExactEnumeration`` — for finite-output mechanisms (binary randomized
  response and compositions of it). Outcome probabilities are computed in
  exact rational arithmetic over both adjacent one-bit inputs and the true
  worst-case log ratio is reported. For pure-DP mechanisms the worst event is
  a single outcome (a ratio of sums never exceeds the largest per-outcome
  ratio), so enumerating outcomes decides all events.
* ``AnalyticDensity`` — for Laplace releases. The log density ratio at output
  x is (|x - m'| - |x - m|)/b, bounded by |m - m'|/b; it is evaluated on a
  grid wide enough to contain the flat worst-case region, where the bound is
  attained exactly.
* ``MonteCarlo`` — for any mechanism. Empirical probabilities of the
  threshold events {output <= t} and {output > t} on a 201-point grid
  spanning the adjacent means +/- 6 noise scales, both adjacency directions.
  Wilson score bounds at the configured confidence give a guard band: the
  claim is refuted only when a statistically certain violation shows up, so
  this route can refute or fail to refute, never prove.

``max_log_ratio`` is always the delta-adjusted statistic
log(Pr[S | X] - delta) - log(Pr[S | X']) maximized over tested events (for
Monte Carlo, with the guard band folded in), and ``passed`` means it stayed
at or below the claimed epsilon plus the method tolerance.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np
from scipy.special import ndtri

from . import rng as _rng
from .release import MechanismName, MechanismSpec, gaussian_sigma, truth_probability

_CHUNK = 1 << 18


@dataclass(frozen=True)
class ExactEnumeration:
    tolerance: float = 1e-12


@dataclass(frozen=True)
class AnalyticDensity:
    grid_points: int = 10_000
    tolerance: float = 1e-9


@dataclass(frozen=True)
class MonteCarlo:
    sample_count: int = 1_000_000
    confidence: float = 0.99999
    thresholds: int = 201


Method = ExactEnumeration | AnalyticDensity | MonteCarlo


@dataclass(frozen=True)
class DpVerificationResult:
    max_log_ratio: float
    epsilon_claimed: float
    delta_claimed: float
    passed: bool
    method: Method
    detail: str = ""


# -- exact enumeration over finite channels ----------------------------------

Channel = tuple[dict[int, Fraction], dict[int, Fraction]]
"""Outcome distributions of one mechanism given adjacent inputs 0 and 1."""


def rr_channel(epsilon: float) -> Channel:
    """Binary randomized response as an exact channel.

    The truth probability e^eps/(1+e^eps) is formed from the float value of
    e^eps, represented exactly as a rational, so the enumerated worst-case
    ratio is exactly that float and its log recovers epsilon to float
    precision.
    """
    t = Fraction(math.exp(epsilon))
    p = t / (1 + t)
    q = 1 - p
    return ({0: p, 1: q}, {0: q, 1: p})


def constant_channel(value: int = 0) -> Channel:
    """A mechanism that ignores its input; composing it costs no budget."""
    dist = {value: Fraction(1)}
    return (dist, dict(dist))


def joint_max_ratio(channels: Sequence[Channel]) -> Fraction | None:
    """Worst per-outcome probability ratio of the joint mechanism, exactly.

    Returns ``None`` when some joint outcome has positive probability under
    one input and zero under the other (unbounded privacy loss).
    """
    if not channels:
        return Fraction(1)
    best = Fraction(0)
    outcome_spaces = [sorted(set(d0) | set(d1)) for d0, d1 in channels]
    for combo in itertools.product(*outcome_spaces):
        p0 = Fraction(1)
        p1 = Fraction(1)
        for (d0, d1), outcome in zip(channels, combo):
            p0 *= d0.get(outcome, Fraction(0))
            p1 *= d1.get(outcome, Fraction(0))
        if p0 == 0 and p1 == 0:
            continue
        if p0 == 0 or p1 == 0:
            return None
        best = max(best, p0 / p1, p1 / p0)
    return best


def fraction_log(value: Fraction) -> float:
    if value <= 0:
        return -math.inf
    return math.log(value.numerator) - math.log(value.denominator)


# -- verification entry points ------------------------------------------------


def default_method(name: MechanismName) -> Method:
    """Strongest applicable route: exact > analytic > Monte Carlo."""
    if name is MechanismName.RANDOMIZED_RESPONSE_BINARY:
        return ExactEnumeration()
    if name in (MechanismName.LAPLACE_SUM, MechanismName.LAPLACE_MEAN):
        return AnalyticDensity()
    return MonteCarlo()


def verify_dp(
    spec: MechanismSpec,
    method: Method | None = None,
    actual: MechanismSpec | None = None,
) -> DpVerificationResult:
    """Test the (epsilon, delta) claim of ``spec``.

    ``actual``, when given, is the mechanism actually exercised while the
    claim stays that of ``spec``; this is how a miscalibrated implementation
    is caught (claim small epsilon, run with too little noise).
    """
    actual = actual or spec
    if actual.name is not spec.name:
        raise ValueError("claimed and actual mechanisms must have the same name")
    method = method or default_method(spec.name)

    if isinstance(method, ExactEnumeration):
        if spec.name is not MechanismName.RANDOMIZED_RESPONSE_BINARY:
            raise ValueError("exact enumeration needs a finite-output mechanism")
        return _verify_exact([rr_channel(actual.epsilon)], spec.epsilon, spec.delta, method)

    if isinstance(method, AnalyticDensity):
        if spec.name not in (MechanismName.LAPLACE_SUM, MechanismName.LAPLACE_MEAN):
            raise ValueError("the analytic density route covers the Laplace mechanisms")
        return _verify_laplace_analytic(spec, actual, method)

    return _verify_monte_carlo(spec, actual, method)


def verify_composition(
    specs: Sequence[MechanismSpec],
    epsilon_claimed: float,
    method: ExactEnumeration | None = None,
) -> DpVerificationResult:
    """Exactly verify a sequential composition of randomized-response runs.

    All mechanisms read the same one-bit dataset, so the joint outcome space
    is finite and the worst-case ratio is enumerable. The claim passes only
    if the joint loss stays within both ``epsilon_claimed`` and the basic
    composition bound (the sum of the per-mechanism epsilons).
    """
    method = method or ExactEnumeration()
    channels = []
    budget = 0.0
    for spec in specs:
        if spec.name is not MechanismName.RANDOMIZED_RESPONSE_BINARY:
            raise ValueError("composition verification needs finite-output mechanisms")
        channels.append(rr_channel(spec.epsilon))
        budget += spec.epsilon
    result = _verify_exact(channels, min(epsilon_claimed, budget), 0.0, method)
    return DpVerificationResult(
        max_log_ratio=result.max_log_ratio,
        epsilon_claimed=epsilon_claimed,
        delta_claimed=0.0,
        passed=result.passed,
        method=method,
        detail=f"sum of component epsilons = {budget!r}",
    )


def _verify_exact(
    channels: Sequence[Channel], epsilon_claimed: float, delta_claimed: float, method: ExactEnumeration
) -> DpVerificationResult:
    ratio = joint_max_ratio(channels)
    max_log_ratio = math.inf if ratio is None else fraction_log(ratio)
    passed = max_log_ratio <= epsilon_claimed + method.tolerance
    return DpVerificationResult(
        max_log_ratio=max_log_ratio,
        epsilon_claimed=epsilon_claimed,
        delta_claimed=delta_claimed,
        passed=passed,
        method=method,
        detail=f"{len(channels)} mechanism(s) enumerated exactly",
    )


def _verify_laplace_analytic(
    spec: MechanismSpec, actual: MechanismSpec, method: AnalyticDensity
) -> DpVerificationResult:
    gap = spec.sensitivity  # worst-case adjacent shift of the true value
    scale = actual.sensitivity / actual.epsilon
    lo = -gap - 6.0 * scale
    hi = 2.0 * gap + 6.0 * scale
    xs = np.linspace(lo, hi, method.grid_points)
    log_ratio = np.abs(np.abs(xs - gap) - np.abs(xs)) / scale
    max_log_ratio = float(np.max(log_ratio))
    passed = max_log_ratio <= spec.epsilon + method.tolerance
    return DpVerificationResult(
        max_log_ratio=max_log_ratio,
        epsilon_claimed=spec.epsilon,
        delta_claimed=spec.delta,
        passed=passed,
        method=method,
        detail=f"grid of {method.grid_points} outputs, noise scale {scale!r}",
    )


def _draw_outputs(spec: MechanismSpec, shift: float, seed: int, count: int) -> np.ndarray:
    """``count`` outputs of the mechanism on a dataset with true value ``shift``."""
    streams = _rng.spawn_generators(seed, (count + _CHUNK - 1) // _CHUNK)
    chunks: list[np.ndarray] = []
    remaining = count
    if spec.name is MechanismName.RANDOMIZED_RESPONSE_BINARY:
        p = truth_probability(spec.epsilon)
        bit = int(shift)
        for stream in streams:
            size = min(_CHUNK, remaining)
            u = _rng.uniform_open(stream, size)
            chunks.append(np.where(u < p, bit, 1 - bit).astype(np.float64))
            remaining -= size
    elif spec.name in (MechanismName.LAPLACE_SUM, MechanismName.LAPLACE_MEAN):
        scale = spec.sensitivity / spec.epsilon
        for stream in streams:
            size = min(_CHUNK, remaining)
            chunks.append(shift + _rng.laplace_noise(stream, scale, size))
            remaining -= size
    else:
        sigma = gaussian_sigma(spec.sensitivity, spec.epsilon, spec.delta)
        for stream in streams:
            size = min(_CHUNK, remaining)
            chunks.append(shift + _rng.gaussian_noise(stream, sigma, size))
            remaining -= size
    return np.concatenate(chunks)


def _wilson_bounds(successes: np.ndarray, n: int, z: float) -> tuple[np.ndarray, np.ndarray]:
    p_hat = successes / n
    denom = 1.0 + z * z / n
    center = (p_hat + z * z / (2 * n)) / denom
    half = z * np.sqrt(p_hat * (1.0 - p_hat) / n + z * z / (4.0 * n * n)) / denom
    return np.clip(center - half, 0.0, 1.0), np.clip(center + half, 0.0, 1.0)


def _verify_monte_carlo(
    spec: MechanismSpec, actual: MechanismSpec, method: MonteCarlo
) -> DpVerificationResult:
    n = method.sample_count
    if spec.name is MechanismName.RANDOMIZED_RESPONSE_BINARY:
        shifts = (0.0, 1.0)
        scale = 1.0
    else:
        shifts = (0.0, spec.sensitivity)
        scale = actual.noise_scale
    seeds = (spec.rng_seed, spec.rng_seed + 1)
    samples = [np.sort(_draw_outputs(actual, shift, seed, n)) for shift, seed in zip(shifts, seeds)]

    ts = np.linspace(min(shifts) - 6.0 * scale, max(shifts) + 6.0 * scale, method.thresholds)
    # counts[i, j] = #(outputs of side i <= ts[j])
    counts = np.stack([np.searchsorted(side, ts, side="right") for side in samples]).astype(np.float64)
    z = float(ndtri(method.confidence))

    max_stat = -math.inf
    eps, delta = spec.epsilon, spec.delta
    for a, b in ((0, 1), (1, 0)):
        for polarity in ("le", "gt"):
            succ_a = counts[a] if polarity == "le" else n - counts[a]
            succ_b = counts[b] if polarity == "le" else n - counts[b]
            lo_a, _ = _wilson_bounds(succ_a, n, z)
            _, hi_b = _wilson_bounds(succ_b, n, z)
            adjusted = lo_a - delta
            ok = adjusted > 0
            if np.any(ok):
                stats = np.log(adjusted[ok]) - np.log(np.maximum(hi_b[ok], 1e-300))
                max_stat = max(max_stat, float(np.max(stats)))

    passed = max_stat <= eps
    return DpVerificationResult(
        max_log_ratio=max_stat,
        epsilon_claimed=eps,
        delta_claimed=delta,
        passed=passed,
        method=method,
        detail=(
            f"{n} draws per adjacent input, {method.thresholds} thresholds, "
            f"guard z = {z:.3f}; refutation is statistical, not a proof of the claim"
        ),
    )
