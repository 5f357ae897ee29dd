"""Jump-rate functions g on the occupation numbers.

A rate is admissible when g(0) = 0, g(k) > 0 for k >= 1, g is
non-decreasing, uniformly Lipschitz, and has a gap: g(k + n0) - g(k) >= c_g
for every k. The three benchmark rates are

    linear      g(k) = k                  (one-site law is Poisson)
    indicator   g(k) = 1 if k >= 1        (one-site law is geometric)
    piecewise   g(k) = k + max(0, k - 2)  (slope 1 then 2; genuinely
                                           nonlinear fugacity)
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class RateFunction:
    """A jump rate g tabulated on 0..K_cache with its structural constants.

    ``values[k]`` is g(k); ``n0``/``c_g`` witness the gap condition and
    ``lip`` the Lipschitz constant. All invariants are checked on the
    cached range at construction.
    """

    kind: str
    values: np.ndarray
    n0: int
    c_g: float
    lip: float
    name: str = field(default="")

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", v)
        if v[0] != 0.0:
            raise ValueError("rate must satisfy g(0) = 0")
        if v.size >= 2 and np.any(v[1:] <= 0.0):
            raise ValueError("rate must satisfy g(k) > 0 for k >= 1")
        d = np.diff(v)
        if np.any(d < 0.0):
            raise ValueError("rate must be non-decreasing")
        if np.any(d > self.lip + 1e-12):
            raise ValueError("rate increments exceed the declared Lipschitz constant")
        if self.n0 < 1 or self.c_g <= 0.0:
            raise ValueError("gap parameters must satisfy n0 >= 1, c_g > 0")
        gap = v[self.n0:] - v[:-self.n0]
        if gap.size and np.min(gap) < self.c_g - 1e-12:
            raise ValueError("rate violates the gap condition g(k+n0)-g(k) >= c_g")

    @property
    def k_cache(self) -> int:
        return self.values.size - 1

    def __call__(self, k):
        return self.values[k]

    def table(self, k_max: int) -> np.ndarray:
        """g on 0..k_max as a float array (k_max must be within the cache)."""
        if k_max > self.k_cache:
            raise ValueError(
                f"rate cached to k={self.k_cache} but k_max={k_max} requested"
            )
        return self.values[: k_max + 1]


_DEFAULT_K_CACHE = 1024


def linear_rate(k_cache: int = _DEFAULT_K_CACHE) -> RateFunction:
    k = np.arange(k_cache + 1, dtype=float)
    return RateFunction("linear", k, n0=1, c_g=1.0, lip=1.0, name="linear")


def indicator_rate(k_cache: int = _DEFAULT_K_CACHE) -> RateFunction:
    v = np.ones(k_cache + 1)
    v[0] = 0.0
    # flat for k >= 1: no uniform gap exists, the only valid witness is the
    # full-range step g(K) - g(0) = 1 (this rate is an analytic benchmark,
    # not a theorem-hypothesis rate)
    return RateFunction("indicator", v, n0=k_cache, c_g=1.0, lip=1.0, name="indicator")


def piecewise_rate(k_cache: int = _DEFAULT_K_CACHE) -> RateFunction:
    k = np.arange(k_cache + 1, dtype=float)
    v = k + np.maximum(0.0, k - 2.0)
    return RateFunction("piecewise-linear", v, n0=1, c_g=1.0, lip=2.0, name="piecewise")


def tabulated_rate(pairs, name: str = "tabulated") -> RateFunction:
    """Rate from (k, g(k)) pairs; k must be 0..K contiguous."""
    pairs = sorted((int(k), float(g)) for k, g in pairs)
    ks = [k for k, _ in pairs]
    if ks != list(range(len(ks))):
        raise ValueError("tabulated rate needs contiguous k = 0..K")
    v = np.array([g for _, g in pairs])
    d = np.diff(v)
    lip = float(np.max(d)) if d.size else 1.0
    # widest gap witness available on the table
    n0, c_g = _best_gap(v)
    return RateFunction("tabulated", v, n0=n0, c_g=c_g, lip=lip, name=name)


def _best_gap(v: np.ndarray):
    for n0 in range(1, v.size):
        gap = v[n0:] - v[:-n0]
        m = float(np.min(gap))
        if m > 0.0:
            return n0, m
    raise ValueError("rate has no positive gap on the tabulated range")


def load_rate_file(path) -> RateFunction:
    """Whitespace-separated ``k g(k)`` pairs, one per line, '#' comments."""
    pairs = []
    with open(path) as fh:
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            k, g = line.split()
            pairs.append((int(k), float(g)))
    return tabulated_rate(pairs, name=str(path))


def rate_by_name(name: str, k_cache: int = _DEFAULT_K_CACHE) -> RateFunction:
    """Resolve ``linear`` / ``indicator`` / ``piecewise`` or a file path."""
    factories = {
        "linear": linear_rate,
        "indicator": indicator_rate,
        "piecewise": piecewise_rate,
    }
    if name in factories:
        return factories[name](k_cache)
    return load_rate_file(name)
