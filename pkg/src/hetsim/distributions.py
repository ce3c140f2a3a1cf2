"""Service-time distributions and seeded random substreams.

All durations are microseconds (floats). Every variant is sampled by an
inverse-CDF transform of a single uniform draw, so each call to
:func:`sample` advances the random stream by exactly one step no matter
which variant is used. That keeps paired (A/B) runs aligned when one
distribution is swapped for another.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from pathlib import Path
from statistics import NormalDist
from typing import Any, Iterable

import numpy as np

from hetsim.errors import DistributionError

_STD_NORMAL = NormalDist()
_TINY_U = 2.0**-53
_QUANTILES = (("p50", 0.50), ("p95", 0.95), ("p99", 0.99))


class RngState:
    """A reproducible uniform stream selected by ``(seed, stream_id)``.

    Two instances built from the same pair yield bitwise-identical
    sequences. Draws are buffered from a PCG64 generator whose seed
    sequence is keyed on both values.
    """

    __slots__ = ("seed", "stream_id", "_gen", "_buf", "_pos")

    _BLOCK = 512

    def __init__(self, seed: int, stream_id: int = 0):
        if not 0 <= seed < 2**64 or not 0 <= stream_id < 2**64:
            raise ValueError("seed and stream_id must be 64-bit unsigned integers")
        self.seed = seed
        self.stream_id = stream_id
        ss = np.random.SeedSequence(entropy=seed, spawn_key=(stream_id,))
        self._gen = np.random.Generator(np.random.PCG64(ss))
        self._buf: list[float] = []
        self._pos = 0

    @classmethod
    def for_key(cls, seed: int, key: str) -> "RngState":
        """Substream keyed by a string such as a node instance name."""
        return cls(seed, substream_id(key))

    def uniform(self) -> float:
        if self._pos >= len(self._buf):
            self._buf = self._gen.random(self._BLOCK).tolist()
            self._pos = 0
        u = self._buf[self._pos]
        self._pos += 1
        return u

    def __repr__(self) -> str:
        return f"RngState(seed={self.seed}, stream_id={self.stream_id})"


def substream_id(key: str) -> int:
    """Stable 64-bit id for a string key (same on every platform)."""
    return int.from_bytes(hashlib.blake2b(key.encode("utf-8"), digest_size=8).digest(), "little")


def _check_duration(value: float, what: str) -> float:
    value = float(value)
    if not math.isfinite(value) or value < 0:
        raise DistributionError(f"{what} must be a finite duration >= 0, got {value!r}")
    return value


class ServiceDistribution:
    """Base class. Subclasses are frozen dataclasses."""

    kind: str = ""

    def ppf(self, u: float) -> float:
        raise NotImplementedError

    def mean(self) -> float:
        raise NotImplementedError

    def summary(self) -> dict[str, float]:
        raise NotImplementedError

    def to_json(self) -> dict[str, Any]:
        raise NotImplementedError


@dataclass(frozen=True)
class Empirical(ServiceDistribution):
    samples: tuple[float, ...]
    kind = "empirical"

    def __post_init__(self):
        if len(self.samples) == 0:
            raise DistributionError("empirical distribution needs at least one sample")
        checked = tuple(_check_duration(s, "sample") for s in self.samples)
        object.__setattr__(self, "samples", checked)

    def ppf(self, u: float) -> float:
        # bootstrap: uniform index into the stored samples
        n = len(self.samples)
        i = int(u * n)
        return self.samples[i if i < n else n - 1]

    def mean(self) -> float:
        return math.fsum(self.samples) / len(self.samples)

    def summary(self) -> dict[str, float]:
        ordered = sorted(self.samples)
        n = len(ordered)
        out = {"mean": self.mean()}
        for name, p in _QUANTILES:
            out[name] = ordered[max(1, math.ceil(p * n)) - 1]
        out["min"] = ordered[0]
        out["max"] = ordered[-1]
        return out

    def to_json(self) -> dict[str, Any]:
        return {"kind": self.kind, "samples_us": list(self.samples)}


@dataclass(frozen=True)
class Constant(ServiceDistribution):
    value: float
    kind = "constant"

    def __post_init__(self):
        object.__setattr__(self, "value", _check_duration(self.value, "value"))

    def ppf(self, u: float) -> float:
        return self.value

    def mean(self) -> float:
        return self.value

    def summary(self) -> dict[str, float]:
        v = self.value
        return {"mean": v, "p50": v, "p95": v, "p99": v, "min": v, "max": v}

    def to_json(self) -> dict[str, Any]:
        return {"kind": self.kind, "value_us": self.value}


@dataclass(frozen=True)
class Uniform(ServiceDistribution):
    lo: float
    hi: float
    kind = "uniform"

    def __post_init__(self):
        lo = _check_duration(self.lo, "lo")
        hi = _check_duration(self.hi, "hi")
        if lo > hi:
            raise DistributionError(f"uniform needs lo <= hi, got {lo} > {hi}")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    def ppf(self, u: float) -> float:
        return self.lo + u * (self.hi - self.lo)

    def mean(self) -> float:
        return 0.5 * (self.lo + self.hi)

    def summary(self) -> dict[str, float]:
        out = {"mean": self.mean()}
        for name, p in _QUANTILES:
            out[name] = self.ppf(p)
        out["min"] = self.lo
        out["max"] = self.hi
        return out

    def to_json(self) -> dict[str, Any]:
        return {"kind": self.kind, "lo_us": self.lo, "hi_us": self.hi}


@dataclass(frozen=True)
class Exponential(ServiceDistribution):
    mean_us: float
    kind = "exponential"

    def __post_init__(self):
        m = _check_duration(self.mean_us, "mean")
        if m <= 0:
            raise DistributionError("exponential mean must be > 0")
        object.__setattr__(self, "mean_us", m)

    def ppf(self, u: float) -> float:
        return -self.mean_us * math.log1p(-u)

    def mean(self) -> float:
        return self.mean_us

    def summary(self) -> dict[str, float]:
        out = {"mean": self.mean_us}
        for name, p in _QUANTILES:
            out[name] = self.ppf(p)
        out["min"] = 0.0
        out["max"] = math.inf
        return out

    def to_json(self) -> dict[str, Any]:
        return {"kind": self.kind, "mean_us": self.mean_us}


@dataclass(frozen=True)
class LogNormal(ServiceDistribution):
    """Log-normal over microseconds: ``exp(mu + sigma * Z)``."""

    mu: float
    sigma: float
    kind = "lognormal"

    def __post_init__(self):
        mu, sigma = float(self.mu), float(self.sigma)
        if not (math.isfinite(mu) and math.isfinite(sigma)) or sigma < 0:
            raise DistributionError(f"lognormal needs finite mu and sigma >= 0, got {mu}, {sigma}")
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma", sigma)

    def ppf(self, u: float) -> float:
        if self.sigma == 0:
            return math.exp(self.mu)
        return math.exp(self.mu + self.sigma * _STD_NORMAL.inv_cdf(u if u > 0 else _TINY_U))

    def mean(self) -> float:
        return math.exp(self.mu + 0.5 * self.sigma**2)

    def summary(self) -> dict[str, float]:
        out = {"mean": self.mean()}
        for name, p in _QUANTILES:
            out[name] = self.ppf(p)
        if self.sigma == 0:
            out["min"] = out["max"] = math.exp(self.mu)
        else:
            out["min"], out["max"] = 0.0, math.inf
        return out

    def to_json(self) -> dict[str, Any]:
        return {"kind": self.kind, "mu": self.mu, "sigma": self.sigma}


def from_samples(samples: Iterable[float]) -> Empirical:
    """Build an empirical distribution from measured durations (µs)."""
    return Empirical(tuple(samples))


def sample(dist: ServiceDistribution, rng: RngState) -> float:
    return dist.ppf(rng.uniform())


def summary(dist: ServiceDistribution) -> dict[str, float]:
    """mean, p50, p95, p99, min, max; nearest-rank quantiles for empirical data."""
    return dist.summary()


# -- JSON --------------------------------------------------------------------

_FIELDS = {
    "empirical": {"samples_us"},
    "constant": {"value_us"},
    "uniform": {"lo_us", "hi_us"},
    "exponential": {"mean_us"},
    "lognormal": {"mu", "sigma"},
}


def from_json(obj: dict[str, Any]) -> ServiceDistribution:
    if not isinstance(obj, dict):
        raise DistributionError(f"distribution must be a JSON object, got {type(obj).__name__}")
    kind = obj.get("kind")
    if kind not in _FIELDS:
        raise DistributionError(f"unknown distribution kind {kind!r}")
    allowed = _FIELDS[kind] | {"kind", "name"}
    unknown = set(obj) - allowed
    if unknown:
        raise DistributionError(f"unknown keys for {kind} distribution: {sorted(unknown)}")
    missing = _FIELDS[kind] - set(obj)
    if missing:
        raise DistributionError(f"missing keys for {kind} distribution: {sorted(missing)}")
    try:
        if kind == "empirical":
            return Empirical(tuple(obj["samples_us"]))
        if kind == "constant":
            return Constant(obj["value_us"])
        if kind == "uniform":
            return Uniform(obj["lo_us"], obj["hi_us"])
        if kind == "exponential":
            return Exponential(obj["mean_us"])
        return LogNormal(obj["mu"], obj["sigma"])
    except (TypeError, ValueError) as exc:
        raise DistributionError(f"bad {kind} distribution: {exc}") from exc


def to_json(dist: ServiceDistribution, name: str | None = None) -> dict[str, Any]:
    obj = dist.to_json()
    if name is not None:
        obj = {"name": name, **obj}
    return obj


def load_distribution(path: str | Path) -> tuple[str | None, ServiceDistribution]:
    """Read one distribution file; returns ``(name, dist)``."""
    obj = json.loads(Path(path).read_text(encoding="utf-8"))
    return obj.get("name"), from_json(obj)


def dump_distribution(dist: ServiceDistribution, name: str | None = None) -> str:
    return json.dumps(to_json(dist, name), indent=2) + "\n"
