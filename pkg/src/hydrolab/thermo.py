"""Exact thermodynamics of the one-site invariant measure family.

For a jump rate g the one-site weights are w_k = lambda^k / g(k)! with
g(k)! = g(k) g(k-1) ... g(1) and g(0)! = 1. Everything here is computed
from the truncated series

    Z(lambda)  = sum_k w_k          (partition function)
    R(lambda)  = sum_k k w_k / Z    (mean occupation, strictly increasing)
    sigma(rho) = R^{-1}(rho)        (fugacity of a density)

with a certified geometric tail bound: since g is non-decreasing, the term
ratio beyond the truncation order K is at most q = lambda / g(K), and every
evaluation refuses to answer (TruncationError) unless the resulting tail is
below ``tail_tol`` relative to the partial sum.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BracketError, TruncationError
from .rates import RateFunction

DEFAULT_K_MAX = 512
DEFAULT_TAIL_TOL = 1e-12


class ThermoTable:
    """Cached log-factorials of a rate plus the certified truncation order.

    Immutable after construction; safe to share between workers.
    """

    def __init__(self, rate: RateFunction, k_max: int = DEFAULT_K_MAX,
                 tail_tol: float = DEFAULT_TAIL_TOL):
        if rate.k_cache < k_max:
            raise ValueError("rate cache shorter than requested truncation order")
        self.rate = rate
        self.k_max = int(k_max)
        self.tail_tol = float(tail_tol)
        g = rate.table(k_max)
        with np.errstate(divide="ignore"):
            lg = np.log(g)
        lg[0] = 0.0
        self.log_factorials = np.cumsum(lg)
        self.log_factorials[0] = 0.0
        self._ks = np.arange(k_max + 1, dtype=float)

    # -- series kernels ----------------------------------------------------

    def _log_terms(self, lam: float) -> np.ndarray:
        if lam < 0.0:
            raise ValueError("fugacity must be >= 0")
        if lam == 0.0:
            t = np.full(self.k_max + 1, -np.inf)
            t[0] = 0.0
            return t
        return self._ks * np.log(lam) - self.log_factorials

    def _certify(self, lam: float, log_terms: np.ndarray, weight_sum: float,
                 shift: float, moment: int) -> None:
        """Geometric tail certificate for sum_k k^moment w_k beyond k_max."""
        if lam == 0.0:
            return
        g_top = self.rate.values[self.k_max]
        q = lam / g_top
        if q >= 1.0:
            raise TruncationError(
                f"lambda={lam} outside certified region (lambda/g(K)={q:.3g} >= 1)"
            )
        t_last = np.exp(log_terms[-1] - shift)
        k = float(self.k_max)
        if moment == 0:
            tail = t_last * q / (1.0 - q)
        else:
            # sum_j (K+j) q^j = K q/(1-q) + q/(1-q)^2
            tail = t_last * (k * q / (1.0 - q) + q / (1.0 - q) ** 2)
        if tail > self.tail_tol * weight_sum:
            raise TruncationError(
                f"series tail {tail / weight_sum:.3g} above tolerance "
                f"{self.tail_tol} at lambda={lam}"
            )

    def log_partition(self, lam: float) -> float:
        """ln Z(lambda), certified."""
        t = self._log_terms(lam)
        m = float(np.max(t))
        s = float(np.sum(np.exp(t - m)))
        self._certify(lam, t, s, m, moment=0)
        return m + np.log(s)

    # -- public operations ---------------------------------------------------

    def partition_Z(self, lam: float) -> float:
        """Z(lambda) = sum_k lambda^k / g(k)!."""
        if lam == 0.0:
            return 1.0
        return float(np.exp(self.log_partition(lam)))

    def mean_density_R(self, lam: float) -> float:
        """R(lambda) = (sum_k k lambda^k / g(k)!) / Z(lambda)."""
        if lam == 0.0:
            return 0.0
        t = self._log_terms(lam)
        m = float(np.max(t))
        w = np.exp(t - m)
        s = float(np.sum(w))
        num = float(np.sum(self._ks * w))
        self._certify(lam, t, s, m, moment=0)
        self._certify(lam, t, num, m, moment=1)
        return num / s

    def _mean_density_partial(self, lam: float) -> float:
        """Uncertified truncated R; a lower bound on the true R (the tail
        terms all carry k above the truncation order, so dropping them can
        only lower the mean)."""
        if lam == 0.0:
            return 0.0
        t = self._log_terms(lam)
        m = float(np.max(t))
        w = np.exp(t - m)
        return float(np.sum(self._ks * w) / np.sum(w))

    def fugacity_sigma(self, rho: float, tol: float = 1e-12) -> float:
        """The unique lambda with R(lambda) = rho, by bracketed bisection.

        Bracketing doubles from lambda = 1. A lambda beyond the certified
        region still serves as an upper bracket when even the truncated
        (lower-bound) mean exceeds rho; if no such lambda is found before
        certification fails, the density is out of reach and BracketError
        is raised.
        """
        if rho < 0.0:
            raise ValueError("density must be >= 0")
        if tol <= 0.0:
            raise ValueError("tolerance must be > 0")
        if rho == 0.0:
            return 0.0
        lo, hi = 0.0, 1.0
        while True:
            try:
                r_hi = self.mean_density_R(hi)
            except TruncationError as exc:
                if self._mean_density_partial(hi) >= rho:
                    break
                raise BracketError(
                    f"no upper bracket for rho={rho} before truncation: {exc}"
                ) from exc
            if r_hi >= rho:
                break
            lo = hi
            hi *= 2.0
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            try:
                r = self.mean_density_R(mid)
            except TruncationError:
                hi = mid  # uncertified lambdas lie to the right of the root
                continue
            if abs(r - rho) <= tol:
                return mid
            if r < rho:
                lo = mid
            else:
                hi = mid
            if hi - lo <= 1e-17 * max(1.0, hi):
                break
        mid = 0.5 * (lo + hi)
        if abs(self.mean_density_R(mid) - rho) <= max(tol, 1e-9 * max(1.0, rho)):
            return mid
        raise BracketError(f"bisection stalled for rho={rho}")

    def one_site_pmf(self, lam: float) -> "OneSitePmf":
        """The law n_lambda(k) = lambda^k / (g(k)! Z(lambda)) up to k_max."""
        if lam == 0.0:
            probs = np.zeros(self.k_max + 1)
            probs[0] = 1.0
            return OneSitePmf(lam, probs, np.cumsum(probs))
        t = self._log_terms(lam)
        m = float(np.max(t))
        w = np.exp(t - m)
        s = float(np.sum(w))
        self._certify(lam, t, s, m, moment=0)
        probs = np.exp(t - (m + np.log(s)))
        return OneSitePmf(lam, probs, np.cumsum(probs))

    def exp_moment(self, lam: float, theta: float) -> float:
        """E_{n_lambda}[exp(theta eta)] = Z(lambda e^theta) / Z(lambda)."""
        if theta == 0.0:
            return 1.0
        if lam == 0.0:
            return 1.0
        return float(np.exp(self.log_partition(lam * np.exp(theta))
                            - self.log_partition(lam)))

    # -- diagnostics ---------------------------------------------------------

    def sigma_prime_range(self, rho_max: float, n: int = 64):
        """Empirical (min, max) of sigma' by central differences on a grid.

        The regularity constant Lambda with sigma' in [Lambda, 1/Lambda] is
        never specified numerically, so it is estimated per rate and
        reported, not asserted.
        """
        rhos = np.linspace(rho_max / n, rho_max, n)
        h = rhos[0] * 0.5
        sp = [(self.fugacity_sigma(r + h) - self.fugacity_sigma(max(r - h, 0.0)))
              / (h + min(h, r)) for r in rhos]
        return float(np.min(sp)), float(np.max(sp))


@dataclass(frozen=True)
class OneSitePmf:
    """Truncated one-site law with its cumulative array."""

    lam: float
    probs: np.ndarray
    cdf: np.ndarray

    def mean(self) -> float:
        return float(np.dot(np.arange(self.probs.size), self.probs))

    def expectation(self, h_values: np.ndarray) -> float:
        """E[h(eta)] for h tabulated on 0..k_max."""
        return float(np.dot(np.asarray(h_values)[: self.probs.size], self.probs))

    def sample_inverse_cdf(self, u):
        """Inverse-CDF draws for uniforms u in (0, 1)."""
        k = np.searchsorted(self.cdf, u, side="left")
        return np.minimum(k, self.probs.size - 1)


def sigma_grid(table: ThermoTable, rho_max: float, n_points: int = 2048):
    """(rho grid, sigma values) for interpolation; includes rho = 0."""
    rhos = np.linspace(0.0, rho_max, n_points)
    sig = np.empty_like(rhos)
    sig[0] = 0.0
    for i in range(1, rhos.size):
        sig[i] = table.fugacity_sigma(rhos[i])
    return rhos, sig
