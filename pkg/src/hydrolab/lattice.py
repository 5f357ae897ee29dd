"""Discrete torus geometry, transition kernels, and particle configurations.

Sites of the d-dimensional torus (d in {1, 2}, side length N) are indexed
row-major; all displacement arithmetic wraps mod N per axis. The torus is
embedded in the continuous unit torus by x -> x / N.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import AsymmetryError, EmptySiteError, NormalizationError, ShapeError
from .rates import RateFunction


@dataclass(frozen=True)
class Torus:
    d: int
    N: int

    def __post_init__(self):
        if self.d not in (1, 2):
            raise ValueError("dimension must be 1 or 2")
        if self.N < 2:
            raise ValueError("side length must be >= 2")

    @property
    def n_sites(self) -> int:
        return self.N ** self.d

    def index(self, coords) -> int:
        """Row-major site index of (possibly unwrapped) coordinates."""
        if self.d == 1:
            return int(coords[0]) % self.N
        return (int(coords[0]) % self.N) * self.N + (int(coords[1]) % self.N)

    def coords(self, index: int):
        if self.d == 1:
            return (index % self.N,)
        return (index // self.N, index % self.N)

    def shift_index(self, index: int, disp) -> int:
        """Site reached from ``index`` by displacement vector ``disp``."""
        c = self.coords(index)
        return self.index(tuple(ci + di for ci, di in zip(c, disp)))

    def embedded_grid(self) -> np.ndarray:
        """Positions x/N of all sites, shape (n_sites, d)."""
        if self.d == 1:
            return (np.arange(self.N, dtype=float) / self.N)[:, None]
        ij = np.indices((self.N, self.N)).reshape(2, -1).T
        return ij.astype(float) / self.N

    def neighbor_table(self, displacements) -> np.ndarray:
        """int64 array (n_sites, n_disp): target site per displacement."""
        n = self.n_sites
        out = np.empty((n, len(displacements)), dtype=np.int64)
        for j, disp in enumerate(displacements):
            for i in range(n):
                out[i, j] = self.shift_index(i, disp)
        return out

    def distance(self, i: int, j: int) -> int:
        """Graph (taxicab) distance between two sites with wraparound."""
        ci, cj = self.coords(i), self.coords(j)
        total = 0
        for a, b in zip(ci, cj):
            delta = abs(a - b)
            total += min(delta, self.N - delta)
        return total


@dataclass(frozen=True)
class TransitionKernel:
    """Finite-range single-particle displacement law.

    ``gamma`` is the mean displacement and ``A`` the matrix with entries
    a_ij = (1/2) sum_x p(x) x_i x_j driving the parabolic limit.
    """

    displacements: tuple
    probabilities: np.ndarray
    gamma: np.ndarray
    A: np.ndarray
    is_symmetric: bool

    @property
    def d(self) -> int:
        return len(self.displacements[0])


def validate_kernel(support, parabolic: bool = True) -> TransitionKernel:
    """Build a kernel from (displacement, probability) pairs.

    Raises NormalizationError when probabilities do not sum to 1, and
    AsymmetryError when a parabolic-scaling caller passes a kernel with
    nonzero mean displacement.
    """
    if not support:
        raise ValueError("kernel support must be nonempty")
    disps = tuple(tuple(int(c) for c in x) for x, _ in support)
    probs = np.array([float(p) for _, p in support])
    d = len(disps[0])
    if any(len(x) != d for x in disps):
        raise ShapeError("displacements have mixed dimensions")
    if any(all(c == 0 for c in x) for x in disps):
        raise ValueError("kernel must not contain the zero displacement")
    if np.any(probs <= 0.0):
        raise NormalizationError("kernel probabilities must be positive")
    if abs(probs.sum() - 1.0) > 1e-12:
        raise NormalizationError(
            f"kernel probabilities sum to {probs.sum()!r}, not 1")
    xs = np.array(disps, dtype=float)
    gamma = probs @ xs
    A = 0.5 * (xs.T * probs) @ xs
    lookup = dict(zip(disps, probs))
    symmetric = all(
        abs(lookup.get(tuple(-c for c in x), 0.0) - p) <= 1e-15
        for x, p in zip(disps, probs))
    if parabolic and np.any(gamma != 0.0):
        raise AsymmetryError(
            f"parabolic scaling needs mean displacement zero, got {gamma}")
    return TransitionKernel(disps, probs, gamma, A, symmetric)


def nearest_neighbor_kernel(d: int) -> TransitionKernel:
    """Symmetric nearest-neighbour kernel: p = 1/(2d) on the unit steps."""
    if d == 1:
        support = [((1,), 0.5), ((-1,), 0.5)]
    elif d == 2:
        support = [((1, 0), 0.25), ((-1, 0), 0.25), ((0, 1), 0.25), ((0, -1), 0.25)]
    else:
        raise ValueError("dimension must be 1 or 2")
    return validate_kernel(support)


class Configuration:
    """Occupation numbers on a torus with cached mass and total jump rate.

    Single-writer object: one replica owns one configuration.
    """

    def __init__(self, torus: Torus, eta, rate: RateFunction):
        eta = np.asarray(eta, dtype=np.int64)
        if eta.size != torus.n_sites:
            raise ShapeError(
                f"eta has {eta.size} entries for a torus of {torus.n_sites} sites")
        if np.any(eta < 0):
            raise ValueError("occupation numbers must be >= 0")
        self.torus = torus
        self.eta = eta.copy()
        self.rate = rate
        self.total_mass = int(eta.sum())
        self.total_rate = float(rate.values[eta].sum())

    def g_at(self, site: int) -> float:
        return float(self.rate.values[self.eta[site]])

    def apply_jump(self, x: int, y: int) -> None:
        """One particle moves x -> y; caches updated incrementally."""
        if self.eta[x] < 1:
            raise EmptySiteError(f"site {x} is empty")
        gv = self.rate.values
        self.total_rate += (gv[self.eta[x] - 1] - gv[self.eta[x]]
                            + gv[self.eta[y] + 1] - gv[self.eta[y]])
        self.eta[x] -= 1
        self.eta[y] += 1

    def recompute_caches(self):
        """(mass, rate) from scratch; for coherence checks in tests."""
        return int(self.eta.sum()), float(self.rate.values[self.eta].sum())

    def copy(self) -> "Configuration":
        return Configuration(self.torus, self.eta, self.rate)


def l1_distance(a: Configuration, b: Configuration) -> int:
    if a.torus != b.torus:
        raise ShapeError("configurations live on different tori")
    return int(np.abs(a.eta - b.eta).sum())


def block_average(config: Configuration, h, center: int, ell: int) -> float:
    """(2 ell + 1)^{-d} sum of h(eta) over the periodic cube around center.

    ``h`` is either a callable on occupancies or an array indexed by
    occupancy.
    """
    torus = config.torus
    if 2 * ell + 1 > torus.N:
        raise ValueError("block exceeds the torus")
    c = torus.coords(center)
    offsets = range(-ell, ell + 1)
    if torus.d == 1:
        sites = [torus.index((c[0] + o,)) for o in offsets]
    else:
        sites = [torus.index((c[0] + o1, c[1] + o2))
                 for o1 in offsets for o2 in offsets]
    vals = config.eta[sites]
    if callable(h):
        hs = np.array([h(int(v)) for v in vals], dtype=float)
    else:
        hs = np.asarray(h, dtype=float)[vals]
    return float(hs.mean())


def empirical_pairing(config: Configuration, phi_grid) -> float:
    """N^{-d} sum_x eta_x phi(x/N) for phi sampled on the embedded grid."""
    phi = np.asarray(phi_grid, dtype=float).reshape(-1)
    if phi.size != config.torus.n_sites:
        raise ShapeError("test function grid does not match the torus")
    return float(np.dot(config.eta, phi)) / config.torus.n_sites


def save_snapshot(path, config: Configuration) -> None:
    """CSV with columns site_index,eta."""
    with open(path, "w", newline="") as fh:
        fh.write("site_index,eta\n")
        for i, v in enumerate(config.eta):
            fh.write(f"{i},{int(v)}\n")


def load_snapshot(path, torus: Torus, rate: RateFunction) -> Configuration:
    data = np.loadtxt(path, delimiter=",", skiprows=1, dtype=np.int64)
    data = np.atleast_2d(data)
    eta = np.zeros(torus.n_sites, dtype=np.int64)
    eta[data[:, 0]] = data[:, 1]
    return Configuration(torus, eta, rate)
