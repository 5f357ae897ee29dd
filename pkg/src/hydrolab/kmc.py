"""Event-driven simulation of the zero-range process and its standard
coupling, under parabolic scaling (generator sped up by N^2).

A particle leaves site x at rate g(eta_x) and lands at x + z with kernel
probability p(z); the waiting time to the next event is exponential with
rate N^2 sum_x g(eta_x). The coupled pair jumps together at the per-site
rate min(g(eta_x), g(zeta_x)) and each copy alone at its excess rate,
which makes the l1 distance between the copies non-increasing pathwise.

States own their replica RNG stream; a trajectory is a pure function of
(root_seed, stream_id, initial configuration, snapshot schedule).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels as _k
from .errors import FrozenError, NotOneJumpError, ShapeError
from .lattice import Configuration, Torus, TransitionKernel, l1_distance
from .rng import RngStream
from .thermo import ThermoTable

_TAG_NAMES = {_k.TAG_JOINT: "joint", _k.TAG_ETA: "eta-only", _k.TAG_ZETA: "zeta-only"}


@dataclass(frozen=True)
class Event:
    t: float
    site_from: int
    site_to: int
    tag: str = "jump"


def _kernel_tables(kernel: TransitionKernel, torus: Torus):
    if any(max(abs(c) for c in disp) >= torus.N for disp in kernel.displacements):
        raise ValueError("kernel range must be smaller than the torus side")
    nbr = torus.neighbor_table(kernel.displacements)
    disp_cdf = np.cumsum(kernel.probabilities)
    disp_cdf[-1] = 1.0
    return nbr, disp_cdf


def _g_table(config: Configuration, mass_bound: int) -> np.ndarray:
    rate = config.rate
    if mass_bound + 1 > rate.k_cache:
        raise ValueError(
            f"rate cached to k={rate.k_cache} but occupancies may reach "
            f"{mass_bound}; construct the rate with a larger k_cache")
    return rate.table(mass_bound + 1)


class SimState:
    """One replica of the process: configuration, macroscopic clock,
    Fenwick rate index, and the replica RNG stream."""

    def __init__(self, config: Configuration, kernel: TransitionKernel,
                 rng: RngStream, time: float = 0.0):
        self.config = config
        self.kernel = kernel
        self.rng = rng
        self.time = float(time)
        self.time_scale = float(config.torus.N ** 2)
        self.g_table = _g_table(config, config.total_mass)
        self.nbr, self.disp_cdf = _kernel_tables(kernel, config.torus)
        self.tree = np.zeros(config.torus.n_sites)
        self.aux = np.zeros(3)
        _k._resync_zrp(self.tree, config.eta, self.g_table, self.aux)
        self.n_events = 0

    def _sync(self, t, n_events):
        self.time = float(t)
        self.n_events += int(n_events)
        self.config.total_rate = float(self.aux[0])

    def rate_index_total(self) -> float:
        return float(self.aux[0])

    def _advance(self, t_target, max_events, log_arrays=None):
        if log_arrays is None:
            log_t = np.empty(0)
            log_i = np.empty(0, dtype=np.int64)
            log = (log_t, log_i, log_i)
            log_on = False
        else:
            log = log_arrays
            log_on = True
        t, n, status = _k.run_zrp(
            self.config.eta, self.g_table, self.nbr, self.disp_cdf,
            self.tree, self.aux, self.rng.state,
            self.time, t_target, self.time_scale,
            np.iinfo(np.int64).max if max_events is None else int(max_events),
            log[0], log[1], log[2], log_on)
        self._sync(t, n)
        return status, n


def step(state: SimState) -> Event:
    """One event: exponential wait, weighted departure site, kernel
    displacement, then eta -> eta^{xy}."""
    log_t = np.empty(1)
    log_x = np.empty(1, dtype=np.int64)
    log_y = np.empty(1, dtype=np.int64)
    status, n = state._advance(np.inf, 1, (log_t, log_x, log_y))
    if status == _k.STATUS_FROZEN:
        raise FrozenError("total jump rate is zero", time=state.time,
                          n_events=state.n_events)
    return Event(float(log_t[0]), int(log_x[0]), int(log_y[0]))


def run_until(state: SimState, t_end: float, observer=None,
              snapshot_times=None) -> SimState:
    """Advance to t_end, invoking ``observer(state)`` at each snapshot time.

    Raises FrozenError (carrying the partial time and event count) if the
    configuration freezes before t_end.
    """
    if t_end < state.time:
        raise ValueError("t_end must be >= current time")
    times = sorted(t for t in (snapshot_times or []) if state.time < t <= t_end)
    for t_next in times + [t_end]:
        if t_next > state.time:
            status, _ = state._advance(t_next, None)
            if status == _k.STATUS_FROZEN:
                raise FrozenError("configuration froze before t_end",
                                  time=state.time, n_events=state.n_events)
        if observer is not None and t_next != t_end:
            observer(state)
    return state


class CoupledState:
    """Two configurations on one torus evolved by the standard coupling.

    ``stats`` tracks (l1 distance, contraction violations, support
    violations, joint events); check_mode 1 counts any event that
    increased the l1 distance, check_mode 2 additionally flags l1 leaving
    {0, 2} or re-leaving 0.
    """

    def __init__(self, eta: Configuration, zeta: Configuration,
                 kernel: TransitionKernel, rng: RngStream,
                 time: float = 0.0, check_mode: int = 1):
        if eta.torus != zeta.torus:
            raise ShapeError("coupled copies must share the torus")
        if eta.rate is not zeta.rate:
            raise ValueError("coupled copies must share the rate function")
        self.eta = eta
        self.zeta = zeta
        self.kernel = kernel
        self.rng = rng
        self.time = float(time)
        self.check_mode = int(check_mode)
        self.time_scale = float(eta.torus.N ** 2)
        bound = max(eta.total_mass, zeta.total_mass)
        self.g_table = _g_table(eta, bound)
        self.nbr, self.disp_cdf = _kernel_tables(kernel, eta.torus)
        n = eta.torus.n_sites
        self.tree_m = np.zeros(n)
        self.tree_e = np.zeros(n)
        self.tree_z = np.zeros(n)
        self.aux = np.zeros(8)
        _k._resync_coupled(self.tree_m, self.tree_e, self.tree_z,
                           eta.eta, zeta.eta, self.g_table, self.aux)
        self.stats = np.zeros(4, dtype=np.int64)
        self.stats[0] = l1_distance(eta, zeta)
        self.n_events = 0

    @property
    def l1(self) -> int:
        return int(self.stats[0])

    @property
    def contraction_violations(self) -> int:
        return int(self.stats[1])

    @property
    def support_violations(self) -> int:
        return int(self.stats[2])

    def _sync(self, t, n_events):
        self.time = float(t)
        self.n_events += int(n_events)
        self.eta.total_rate = float(self.aux[0] + self.aux[2])
        self.zeta.total_rate = float(self.aux[0] + self.aux[4])

    def _advance(self, t_target, max_events, log_arrays=None):
        if log_arrays is None:
            log_t = np.empty(0)
            log_i = np.empty(0, dtype=np.int64)
            log = (log_t, log_i, log_i, log_i)
            log_on = False
        else:
            log = log_arrays
            log_on = True
        t, n, status = _k.run_coupled(
            self.eta.eta, self.zeta.eta, self.g_table, self.nbr, self.disp_cdf,
            self.tree_m, self.tree_e, self.tree_z, self.aux, self.rng.state,
            self.time, t_target, self.time_scale,
            np.iinfo(np.int64).max if max_events is None else int(max_events),
            self.check_mode, self.stats,
            log[0], log[1], log[2], log[3], log_on)
        self._sync(t, n)
        return status, n


def coupled_step(state: CoupledState) -> Event:
    log_t = np.empty(1)
    log_x = np.empty(1, dtype=np.int64)
    log_y = np.empty(1, dtype=np.int64)
    log_tag = np.empty(1, dtype=np.int64)
    status, n = state._advance(np.inf, 1, (log_t, log_x, log_y, log_tag))
    if status == _k.STATUS_FROZEN:
        raise FrozenError("combined jump rate is zero", time=state.time,
                          n_events=state.n_events)
    return Event(float(log_t[0]), int(log_x[0]), int(log_y[0]),
                 _TAG_NAMES[int(log_tag[0])])


def run_coupled_until(state: CoupledState, t_end: float, observer=None,
                      snapshot_times=None) -> CoupledState:
    if t_end < state.time:
        raise ValueError("t_end must be >= current time")
    times = sorted(t for t in (snapshot_times or []) if state.time < t <= t_end)
    for t_next in times + [t_end]:
        if t_next > state.time:
            status, _ = state._advance(t_next, None)
            if status == _k.STATUS_FROZEN:
                raise FrozenError("coupled pair froze before t_end",
                                  time=state.time, n_events=state.n_events)
        if observer is not None and t_next != t_end:
            observer(state)
    return state


class LocalGibbsSampler:
    """Per-site inverse-CDF sampler for the local Gibbs measure of a
    profile: site x draws from the one-site law at fugacity sigma(f(x/N)).

    Building the per-site CDF matrix is the expensive part, so one sampler
    is shared by all replicas of an experiment.
    """

    def __init__(self, f_sites, table: ThermoTable, torus: Torus):
        f_sites = np.asarray(f_sites, dtype=float).reshape(-1)
        if f_sites.size != torus.n_sites:
            raise ShapeError("profile grid does not match the torus")
        if np.any(f_sites < 0.0):
            raise ValueError("profile must be nonnegative")
        self.torus = torus
        self.rate = table.rate
        values, inverse = np.unique(f_sites, return_inverse=True)
        cdfs = np.empty((values.size, table.k_max + 1))
        for i, rho in enumerate(values):
            lam = table.fugacity_sigma(float(rho))
            cdfs[i] = table.one_site_pmf(lam).cdf
        self.cdf_matrix = cdfs[inverse]

    def sample(self, rng: RngStream) -> Configuration:
        u = rng.unit_open_array(self.torus.n_sites)
        draws = (self.cdf_matrix < u[:, None]).sum(axis=1)
        np.minimum(draws, self.cdf_matrix.shape[1] - 1, out=draws)
        return Configuration(self.torus, draws, self.rate)


def sample_local_gibbs(profile, table: ThermoTable, torus: Torus,
                       rng: RngStream) -> Configuration:
    """Independent per-site draws eta_x ~ n_{sigma(f(x/N))}.

    ``profile`` is the density f sampled on the embedded N-grid (any shape
    with n_sites entries, row-major).
    """
    values = getattr(profile, "values", profile)
    return LocalGibbsSampler(values, table, torus).sample(rng)


def jump_distance_1d(eta, zeta) -> int:
    """Minimal number of nearest-neighbour moves between two d=1
    configurations that are at most one generalized jump apart.

    Accepts Configurations or plain occupancy arrays.
    """
    a = eta.eta if isinstance(eta, Configuration) else np.asarray(eta)
    b = zeta.eta if isinstance(zeta, Configuration) else np.asarray(zeta)
    if isinstance(eta, Configuration) and eta.torus.d != 1:
        raise NotOneJumpError("jump distance is defined for d = 1")
    if a.shape != b.shape:
        raise ShapeError("configurations differ in shape")
    diff = a.astype(np.int64) - b.astype(np.int64)
    nz = np.flatnonzero(diff)
    if nz.size == 0:
        return 0
    if nz.size != 2 or sorted(diff[nz]) != [-1, 1]:
        raise NotOneJumpError(
            "configurations are not one generalized jump apart")
    n = a.size
    delta = abs(int(nz[0]) - int(nz[1]))
    return min(delta, n - delta)
