"""Finite-difference solver for the limit equation on the unit torus:

    df/dt = A : grad^2 sigma(f)

with the explicit centered second-order stencil, periodic wraparound, and
a CFL bound dt <= 0.25 h^2 / (trace(A) sup sigma'). The fugacity map
sigma is evaluated through a monotone cubic interpolation table so the
inner loop never root-finds; the interpolation is certified against the
direct map at construction.

Constant profiles are stationary, the scheme conserves mass to rounding
(the stencil telescopes), and min/max are monotone under the CFL bound
(discrete maximum principle).
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import PchipInterpolator

from .errors import CflError, FloorError, NegativityError
from .thermo import ThermoTable, sigma_grid

logger = logging.getLogger(__name__)

_NEG_TOL = -1e-12


@dataclass
class MacroProfile:
    """Grid values of the macroscopic density on the continuous torus.

    ``values`` has shape (M,) in d=1 and (M, M) in d=2, sampled at i/M.
    """

    d: int
    M: int
    values: np.ndarray
    delta_floor: float = 0.0

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        expect = (self.M,) if self.d == 1 else (self.M, self.M)
        if v.shape != expect:
            raise ValueError(f"values shape {v.shape}, expected {expect}")
        if not np.all(np.isfinite(v)):
            raise ValueError("profile values must be finite")
        if np.any(v < 0.0):
            raise ValueError("profile values must be >= 0")
        if self.delta_floor > 0.0 and np.min(v) < self.delta_floor:
            raise FloorError(
                f"profile min {v.min()} below the floor {self.delta_floor}")
        self.values = v

    @classmethod
    def constant(cls, d: int, M: int, rho: float, delta_floor: float = 0.0):
        shape = (M,) if d == 1 else (M, M)
        return cls(d, M, np.full(shape, float(rho)), delta_floor)

    @classmethod
    def cosine(cls, d: int, M: int, rho: float, amplitude: float,
               delta_floor: float = 0.0):
        """rho + (a/d) sum_i cos(2 pi u_i); marginals stay non-constant in
        d=2, which the axis-marginal diagnostics rely on."""
        u = np.arange(M) / M
        if d == 1:
            vals = rho + amplitude * np.cos(2 * np.pi * u)
        else:
            c = np.cos(2 * np.pi * u)
            vals = rho + 0.5 * amplitude * (c[:, None] + c[None, :])
        return cls(d, M, vals, delta_floor)

    def mean(self) -> float:
        return float(self.values.mean())

    def grid(self) -> np.ndarray:
        return np.arange(self.M) / self.M

    def copy(self) -> "MacroProfile":
        return MacroProfile(self.d, self.M, self.values.copy(), self.delta_floor)


class SigmaMap:
    """Fugacity rho -> sigma(rho) by monotone cubic interpolation of an
    exactly computed table; certified against the direct root-finder."""

    def __init__(self, table: ThermoTable, rho_max: float,
                 n_points: int = 2048, certify_tol: float = 1e-8):
        self.table = table
        self.rho_max = float(rho_max)
        rhos, sig = sigma_grid(table, rho_max, n_points)
        self._interp = PchipInterpolator(rhos, sig)
        self._deriv = self._interp.derivative()
        mids = rhos[:-1:32] + 0.5 * (rhos[1] - rhos[0])
        err = max(abs(float(self._interp(r)) - table.fugacity_sigma(float(r)))
                  for r in mids)
        if err > certify_tol:
            raise ValueError(
                f"sigma interpolation error {err:.3g} above {certify_tol}; "
                "increase n_points")
        self.certified_error = err

    def __call__(self, f: np.ndarray) -> np.ndarray:
        return self._interp(f)

    def derivative_max(self, lo: float, hi: float) -> float:
        xs = np.linspace(max(lo, 0.0), min(hi, self.rho_max), 512)
        return float(np.max(self._deriv(xs)))


def _as_sigma(sigma, f_max: float) -> SigmaMap:
    if isinstance(sigma, SigmaMap):
        return sigma
    if isinstance(sigma, ThermoTable):
        return SigmaMap(sigma, rho_max=2.0 * f_max)
    raise TypeError("sigma must be a SigmaMap or a ThermoTable")


def cfl_dt(M: int, A: np.ndarray, sigma_prime_max: float) -> float:
    """0.25 h^2 / (trace(A) sup sigma') with h = 1/M."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    h = 1.0 / M
    return 0.25 * h * h / (float(np.trace(A)) * sigma_prime_max)


def _laplacian_terms(s: np.ndarray, A: np.ndarray, M: int) -> np.ndarray:
    """A : centered second differences of s, with periodic wraparound."""
    h2 = float(M) * float(M)
    if s.ndim == 1:
        return A[0, 0] * (np.roll(s, -1) + np.roll(s, 1) - 2.0 * s) * h2
    out = A[0, 0] * (np.roll(s, -1, 0) + np.roll(s, 1, 0) - 2.0 * s) * h2
    out += A[1, 1] * (np.roll(s, -1, 1) + np.roll(s, 1, 1) - 2.0 * s) * h2
    if A[0, 1] != 0.0:
        cross = (np.roll(np.roll(s, -1, 0), -1, 1) + np.roll(np.roll(s, 1, 0), 1, 1)
                 - np.roll(np.roll(s, -1, 0), 1, 1) - np.roll(np.roll(s, 1, 0), -1, 1))
        out += 2.0 * A[0, 1] * cross * (h2 / 4.0)
    return out


def step_explicit(profile: MacroProfile, A, sigma, dt: float,
                  dt_bound: float | None = None) -> MacroProfile:
    """One forward-Euler step f <- f + dt A : Lap_h sigma(f), in place."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    sigma_map = _as_sigma(sigma, float(profile.values.max()))
    if dt_bound is None:
        sp = sigma_map.derivative_max(float(profile.values.min()),
                                      float(profile.values.max()))
        dt_bound = cfl_dt(profile.M, A, sp)
    if dt > dt_bound * (1.0 + 1e-12):
        raise CflError(f"dt={dt} exceeds the stability bound {dt_bound}")
    s = np.asarray(sigma_map(profile.values))
    profile.values += dt * _laplacian_terms(s, A, profile.M)
    vmin = float(profile.values.min())
    if vmin < 0.0:
        if vmin < _NEG_TOL:
            raise NegativityError(f"profile dipped to {vmin}")
        logger.warning("clamping tiny negative profile value %g to 0", vmin)
        np.clip(profile.values, 0.0, None, out=profile.values)
    return profile


@dataclass
class PdeRun:
    """Snapshot trajectory of a solve, with the step size actually used."""

    times: list
    snapshots: list
    dt_max: float
    cfl_ratio: float
    d: int
    M: int
    A: np.ndarray
    meta: dict = field(default_factory=dict)

    def sup_errors(self) -> np.ndarray:
        """sup |f_t - f_inf| per snapshot, f_inf the conserved mean."""
        f_inf = float(self.snapshots[0].mean())
        return np.array([np.max(np.abs(s - f_inf)) for s in self.snapshots])

    def masses(self) -> np.ndarray:
        return np.array([s.mean() for s in self.snapshots])

    def relaxation_rate(self) -> float:
        """Fitted decay rate of log sup-error over the later half of the
        run; reported, not asserted to any specific constant."""
        errs = self.sup_errors()
        ts = np.asarray(self.times)
        keep = errs > 0
        ts, errs = ts[keep], errs[keep]
        if ts.size < 3:
            return float("nan")
        half = ts.size // 2
        slope = np.polyfit(ts[half:], np.log(errs[half:]), 1)[0]
        return float(-slope)


def solve(f0: MacroProfile, A, sigma, t_end: float, snapshot_times,
          safety: float = 1.0) -> PdeRun:
    """Explicit solve with snapshots landed exactly on the requested times.

    The step within each snapshot segment is the largest dt <= safety *
    CFL bound that divides the segment evenly.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    sigma_map = _as_sigma(sigma, float(f0.values.max()))
    sp = sigma_map.derivative_max(float(f0.values.min()),
                                  float(f0.values.max()))
    bound = cfl_dt(f0.M, A, sp)
    dt_max = safety * bound
    if dt_max > bound * (1.0 + 1e-12):
        raise CflError("safety factor above 1 violates the CFL bound")
    times = sorted(t for t in snapshot_times if 0.0 < t <= t_end)
    if t_end not in times:
        times.append(t_end)
    profile = f0.copy()
    out_times = [0.0]
    out_snaps = [profile.values.copy()]
    t_prev = 0.0
    used_dt = 0.0
    for t_next in times:
        seg = t_next - t_prev
        n_steps = max(1, int(np.ceil(seg / dt_max - 1e-12)))
        dt = seg / n_steps
        used_dt = max(used_dt, dt)
        for _ in range(n_steps):
            step_explicit(profile, A, sigma_map, dt, dt_bound=bound)
        out_times.append(t_next)
        out_snaps.append(profile.values.copy())
        t_prev = t_next
    return PdeRun(out_times, out_snaps, used_dt, used_dt / bound,
                  f0.d, f0.M, A)


def save_run_csv(path, run: PdeRun) -> None:
    """Blocks of ``u,f`` rows (``u1,u2,f`` in d=2), one per snapshot,
    each preceded by a ``# t=...`` marker line."""
    with open(path, "w", newline="") as fh:
        for t, snap in zip(run.times, run.snapshots):
            fh.write(f"# t={t!r}\n")
            if run.d == 1:
                fh.write("u,f\n")
                for i, v in enumerate(snap):
                    fh.write(f"{i / run.M!r},{v!r}\n")
            else:
                fh.write("u1,u2,f\n")
                for i in range(run.M):
                    for j in range(run.M):
                        fh.write(f"{i / run.M!r},{j / run.M!r},{snap[i, j]!r}\n")


def save_run_meta(path, run: PdeRun, rate_name: str) -> None:
    meta = {
        "dt": run.dt_max,
        "cfl_ratio": run.cfl_ratio,
        "M": run.M,
        "d": run.d,
        "rate": rate_name,
        "A": np.atleast_2d(run.A).tolist(),
        "snapshot_times": list(run.times),
    }
    meta.update(run.meta)
    with open(path, "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
