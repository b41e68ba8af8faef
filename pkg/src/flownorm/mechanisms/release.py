"""Noise-calibrated release mechanisms and their accuracy bounds.

Implements the mechanisms that transmission properties name: Laplace noise on
sums and means, Gaussian noise on sums, and binary randomized response.
Sensitivity always comes from the dataset's declared clipping bounds, never
from the data itself: a sum can move by at most (hi - lo) when one record
changes, a mean by (hi - lo)/n, and one randomized-response bit by 1.

Noise scales:

* Laplace: b = sensitivity / epsilon (pure epsilon-DP).
* Gaussian: sigma = sensitivity * sqrt(2 ln(1.25/delta)) / epsilon, valid for
  epsilon in (0, 1) and delta in (0, 1). The calibration is not trusted
  blindly; the verifier module tests the resulting (epsilon, delta) claim.
* Randomized response: answer truthfully with probability
  e^eps / (1 + e^eps), flip otherwise.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from . import rng as _rng


class QueryKind(enum.Enum):
    SUM = "sum"
    MEAN = "mean"


class MechanismName(enum.Enum):
    """Canonical mechanism names; policy files use these spellings verbatim."""

    LAPLACE_SUM = "laplace_sum"
    LAPLACE_MEAN = "laplace_mean"
    GAUSSIAN_SUM = "gaussian_sum"
    RANDOMIZED_RESPONSE_BINARY = "randomized_response_binary"


_QUERY_FOR = {
    MechanismName.LAPLACE_SUM: QueryKind.SUM,
    MechanismName.LAPLACE_MEAN: QueryKind.MEAN,
    MechanismName.GAUSSIAN_SUM: QueryKind.SUM,
}


@dataclass(frozen=True)
class Dataset:
    """Real-valued records clipped to declared bounds [lo, hi].

    Adjacency is change-one-record: neighboring datasets have the same size
    and differ in a single entry.
    """

    records: tuple[float, ...]
    lo: float
    hi: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "records", tuple(float(x) for x in self.records))
        if len(self.records) < 1:
            raise ValueError("a dataset needs at least one record")
        if not (math.isfinite(self.lo) and math.isfinite(self.hi) and self.lo < self.hi):
            raise ValueError("bounds must be finite with lo < hi")
        for x in self.records:
            if not self.lo <= x <= self.hi:
                raise ValueError(f"record {x!r} outside declared bounds [{self.lo}, {self.hi}]")

    @property
    def n(self) -> int:
        return len(self.records)

    def true_value(self, query: QueryKind) -> float:
        total = math.fsum(self.records)
        return total if query is QueryKind.SUM else total / self.n

    def sensitivity(self, query: QueryKind) -> float:
        width = self.hi - self.lo
        return width if query is QueryKind.SUM else width / self.n


@dataclass(frozen=True)
class MechanismSpec:
    """A mechanism with its privacy parameters, sensitivity, and seed."""

    name: MechanismName
    epsilon: float
    delta: float = 0.0
    sensitivity: float = 1.0
    rng_seed: int = 0

    def __post_init__(self) -> None:
        if not (self.epsilon > 0 and math.isfinite(self.epsilon)):
            raise ValueError("epsilon must be positive and finite")
        if not 0.0 <= self.delta < 1.0:
            raise ValueError("delta must lie in [0, 1)")
        if self.name is MechanismName.GAUSSIAN_SUM:
            if self.delta == 0.0:
                raise ValueError("the Gaussian mechanism requires delta > 0")
        elif self.delta != 0.0:
            raise ValueError(f"{self.name.value} is a pure-DP mechanism; delta must be 0")
        if self.name is MechanismName.RANDOMIZED_RESPONSE_BINARY:
            if self.sensitivity != 1.0:
                raise ValueError("binary randomized response has sensitivity 1")
        elif not (self.sensitivity > 0 and math.isfinite(self.sensitivity)):
            raise ValueError("sensitivity must be positive and finite")

    @classmethod
    def for_dataset(
        cls,
        name: MechanismName,
        dataset: Dataset,
        epsilon: float,
        delta: float = 0.0,
        rng_seed: int = 0,
    ) -> "MechanismSpec":
        if name is MechanismName.RANDOMIZED_RESPONSE_BINARY:
            sensitivity = 1.0
        else:
            sensitivity = dataset.sensitivity(_QUERY_FOR[name])
        return cls(name, epsilon, delta, sensitivity, rng_seed)

    @property
    def noise_scale(self) -> float:
        """Laplace b or Gaussian sigma implied by the parameters."""
        if self.name in (MechanismName.LAPLACE_SUM, MechanismName.LAPLACE_MEAN):
            return self.sensitivity / self.epsilon
        if self.name is MechanismName.GAUSSIAN_SUM:
            return gaussian_sigma(self.sensitivity, self.epsilon, self.delta)
        raise ValueError("randomized response has no real-valued noise scale")


def gaussian_sigma(sensitivity: float, epsilon: float, delta: float) -> float:
    """Classical Gaussian-mechanism calibration sqrt(2 ln(1.25/delta)) * sens / eps."""
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie in (0, 1)")
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    return sensitivity * math.sqrt(2.0 * math.log(1.25 / delta)) / epsilon


def truth_probability(epsilon: float) -> float:
    """Probability that randomized response reports the true bit."""
    if not (epsilon > 0 and math.isfinite(epsilon)):
        raise ValueError("epsilon must be positive and finite")
    # 1/(1 + e^-eps) is e^eps/(1 + e^eps), stable for large eps.
    return 1.0 / (1.0 + math.exp(-epsilon))


def randomized_response(bit: int, epsilon: float, seed: int = 0) -> int:
    """Release one bit, telling the truth with probability e^eps/(1+e^eps)."""
    if bit not in (0, 1):
        raise ValueError("randomized response takes a bit in {0, 1}")
    p = truth_probability(epsilon)
    u = _rng.uniform_open(_rng.generator(seed))
    return bit if u < p else 1 - bit


def randomized_response_bits(bits, epsilon: float, seed: int = 0) -> np.ndarray:
    """Vectorized randomized response over an array of bits (one draw each)."""
    bits = np.asarray(bits, dtype=np.int64)
    if bits.size and not np.isin(bits, (0, 1)).all():
        raise ValueError("randomized response takes bits in {0, 1}")
    p = truth_probability(epsilon)
    u = _rng.uniform_open(_rng.generator(seed), bits.size)
    return np.where(u < p, bits, 1 - bits)


def rr_debias_mean(released_bits, epsilon: float) -> float:
    """Unbiased estimate of the true bit mean from randomized responses."""
    p = truth_probability(epsilon)
    observed = float(np.mean(np.asarray(released_bits, dtype=np.float64)))
    return (observed - (1.0 - p)) / (2.0 * p - 1.0)


def laplace_release(dataset: Dataset, query: QueryKind, epsilon: float, seed: int = 0) -> float:
    """True query value plus Laplace(0, sensitivity/epsilon) noise."""
    if not (epsilon > 0 and math.isfinite(epsilon)):
        raise ValueError("epsilon must be positive and finite")
    scale = dataset.sensitivity(query) / epsilon
    noise = _rng.laplace_noise(_rng.generator(seed), scale)
    return dataset.true_value(query) + noise


def gaussian_release(
    dataset: Dataset, query: QueryKind, epsilon: float, delta: float, seed: int = 0
) -> float:
    """True query value plus calibrated Gaussian noise; epsilon must be in (0, 1)."""
    if not 0.0 < epsilon < 1.0:
        raise ValueError("the Gaussian calibration is valid for epsilon in (0, 1)")
    sigma = gaussian_sigma(dataset.sensitivity(query), epsilon, delta)
    noise = _rng.gaussian_noise(_rng.generator(seed), sigma)
    return dataset.true_value(query) + noise


def release_many(
    spec: MechanismSpec, dataset: Dataset, count: int
) -> np.ndarray:
    """``count`` sequential releases from one seeded stream (reproducible)."""
    if count < 1:
        raise ValueError("count must be positive")
    stream = _rng.generator(spec.rng_seed)
    query = _QUERY_FOR.get(spec.name)
    if spec.name in (MechanismName.LAPLACE_SUM, MechanismName.LAPLACE_MEAN):
        assert query is not None
        scale = dataset.sensitivity(query) / spec.epsilon
        return dataset.true_value(query) + _rng.laplace_noise(stream, scale, count)
    if spec.name is MechanismName.GAUSSIAN_SUM:
        if not 0.0 < spec.epsilon < 1.0:
            raise ValueError("the Gaussian calibration is valid for epsilon in (0, 1)")
        sigma = gaussian_sigma(dataset.sensitivity(QueryKind.SUM), spec.epsilon, spec.delta)
        return dataset.true_value(QueryKind.SUM) + _rng.gaussian_noise(stream, sigma, count)
    raise ValueError("release_many covers the additive mechanisms; use randomized_response_bits")


def accuracy_bound(spec: MechanismSpec, confidence: float) -> float:
    """Half-width of the two-sided confidence interval around the true value.

    Laplace: b * ln(1/(1-confidence)). Gaussian: sigma * z((1+confidence)/2).
    Shrinking epsilon widens the interval; that is the privacy-accuracy
    trade-off made quantitative.
    """
    if not 0.0 < confidence < 1.0:
        raise ValueError("confidence must lie in (0, 1)")
    if spec.name in (MechanismName.LAPLACE_SUM, MechanismName.LAPLACE_MEAN):
        scale = spec.sensitivity / spec.epsilon
        return scale * math.log(1.0 / (1.0 - confidence))
    if spec.name is MechanismName.GAUSSIAN_SUM:
        sigma = gaussian_sigma(spec.sensitivity, spec.epsilon, spec.delta)
        return sigma * float(_rng.normal_quantile((1.0 + confidence) / 2.0))
    raise ValueError("randomized response releases bits, not interval estimates")
