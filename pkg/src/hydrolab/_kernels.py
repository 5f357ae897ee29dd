"""Compiled event-loop kernels (numba, nogil).

Everything here operates on flat numpy arrays so replicas can run on a
thread pool without sharing state. The RNG is xoshiro256++ on an explicit
uint64[4] state (see ``rng`` for the seeding contract); a replica's whole
trajectory is a pure function of its state array.

The weighted site selection uses a Fenwick (binary indexed) tree over the
per-site rates: O(log n) draw and O(log n) update per event. Totals are
carried with Kahan compensation and the tree is rebuilt from its leaves
every 2^20 events so float drift stays below the 1e-9 coherence budget
even for non-integer rate tables.
"""
import numpy as np
from numba import njit

U64 = np.uint64
_R23 = U64(23)
_R45 = U64(45)
_S11 = U64(11)
_S17 = U64(17)
_S30 = U64(30)
_S27 = U64(27)
_S31 = U64(31)
_S64 = U64(64)
_INV53 = 2.0 ** -53
_GOLDEN = U64(0x9E3779B97F4A7C15)
_MIX1 = U64(0xBF58476D1CE4E5B9)
_MIX2 = U64(0x94D049BB133111EB)
_RESYNC_EVERY = 1048576.0  # 2^20 events

STATUS_TARGET = 0
STATUS_FROZEN = 1
STATUS_MAXEVENTS = 2


# ---------------------------------------------------------------------------
# RNG core
# ---------------------------------------------------------------------------

@njit(cache=True, nogil=True, inline="always")
def _rotl(x, k):
    return (x << k) | (x >> (_S64 - k))


@njit(cache=True, nogil=True, inline="always")
def xo_next(s):
    s0 = s[0]
    s1 = s[1]
    s2 = s[2]
    s3 = s[3]
    result = _rotl(s0 + s3, _R23) + s0
    t = s1 << _S17
    s2 = s2 ^ s0
    s3 = s3 ^ s1
    s1 = s1 ^ s2
    s0 = s0 ^ s3
    s2 = s2 ^ t
    s3 = _rotl(s3, _R45)
    s[0] = s0
    s[1] = s1
    s[2] = s2
    s[3] = s3
    return result


@njit(cache=True, nogil=True, inline="always")
def unit_open(s):
    """Uniform double strictly inside (0, 1)."""
    return (np.float64(xo_next(s) >> _S11) + 0.5) * _INV53


@njit(cache=True, nogil=True)
def seed_state_nb(root_seed, stream_id, out):
    """Same seeding as rng.seed_state, usable inside kernels."""
    x = U64(root_seed) ^ ((U64(stream_id) + U64(1)) * _GOLDEN)
    nonzero = False
    for i in range(4):
        x = x + _GOLDEN
        z = x
        z = (z ^ (z >> _S30)) * _MIX1
        z = (z ^ (z >> _S27)) * _MIX2
        z = z ^ (z >> _S31)
        out[i] = z
        if z != U64(0):
            nonzero = True
    if not nonzero:
        out[0] = _GOLDEN


@njit(cache=True)
def xo_next_py(s):
    return xo_next(s)


@njit(cache=True)
def unit_open_py(s):
    return unit_open(s)


@njit(cache=True)
def fill_unit_open(s, out):
    for i in range(out.shape[0]):
        out[i] = unit_open(s)


# ---------------------------------------------------------------------------
# Fenwick tree over per-site rates
# ---------------------------------------------------------------------------

@njit(cache=True, nogil=True)
def fenwick_build(values):
    n = values.shape[0]
    tree = values.copy()
    for i in range(1, n + 1):
        parent = i + (i & (-i))
        if parent <= n:
            tree[parent - 1] += tree[i - 1]
    return tree


@njit(cache=True, nogil=True, inline="always")
def fenwick_add(tree, i, delta):
    n = tree.shape[0]
    j = i + 1
    while j <= n:
        tree[j - 1] += delta
        j += j & (-j)


@njit(cache=True, nogil=True, inline="always")
def fenwick_select(tree, value):
    """Smallest 0-based leaf whose cumulative window contains ``value``.

    May return n on a floating-point overshoot; callers clamp and verify
    the leaf weight.
    """
    n = tree.shape[0]
    j = 1
    while (j << 1) <= n:
        j <<= 1
    pos = 0
    while j > 0:
        k = pos + j
        if k <= n and tree[k - 1] <= value:
            value -= tree[k - 1]
            pos = k
        j >>= 1
    return pos


@njit(cache=True, nogil=True, inline="always")
def _kahan_add(aux, base, delta):
    y = delta - aux[base + 1]
    t = aux[base] + y
    aux[base + 1] = (t - aux[base]) - y
    aux[base] = t


# ---------------------------------------------------------------------------
# Zero-range event loop
# ---------------------------------------------------------------------------

@njit(cache=True, nogil=True)
def _resync_zrp(tree, eta, g_table, aux):
    n = eta.shape[0]
    s = 0.0
    c = 0.0
    for i in range(n):
        v = g_table[eta[i]]
        tree[i] = v
        y = v - c
        t = s + y
        c = (t - s) - y
        s = t
    for i in range(1, n + 1):
        parent = i + (i & (-i))
        if parent <= n:
            tree[parent - 1] += tree[i - 1]
    aux[0] = s
    aux[1] = c
    aux[2] = 0.0


@njit(cache=True, nogil=True)
def run_zrp(eta, g_table, nbr, disp_cdf, tree, aux, rng_state,
            t_now, t_target, time_scale, max_events,
            log_t, log_x, log_y, log_on):
    """Advance one replica until ``t_target``.

    aux = [total_rate, kahan_carry, events_since_resync].
    Draw order per event: waiting time, departure site, displacement.
    Returns (t_now, n_events, status).
    """
    n = eta.shape[0]
    n_disp = disp_cdf.shape[0]
    n_events = 0
    while True:
        total = aux[0]
        if total <= 0.0:
            return t_now, n_events, STATUS_FROZEN
        if n_events >= max_events:
            return t_now, n_events, STATUS_MAXEVENTS
        u1 = unit_open(rng_state)
        dt = -np.log(u1) / (time_scale * total)
        if t_now + dt > t_target:
            return t_target, n_events, STATUS_TARGET
        t_now += dt
        u2 = unit_open(rng_state)
        x = fenwick_select(tree, u2 * total)
        if x >= n:
            x = n - 1
        guard = 0
        while g_table[eta[x]] <= 0.0:
            x += 1
            if x >= n:
                x = 0
            guard += 1
            if guard > n:
                _resync_zrp(tree, eta, g_table, aux)
                break
        if guard > n:
            continue
        u3 = unit_open(rng_state)
        j = 0
        while j < n_disp - 1 and u3 > disp_cdf[j]:
            j += 1
        y = nbr[x, j]
        gx0 = g_table[eta[x]]
        gy0 = g_table[eta[y]]
        eta[x] -= 1
        eta[y] += 1
        _kahan_add(aux, 0, g_table[eta[x]] - gx0)
        _kahan_add(aux, 0, g_table[eta[y]] - gy0)
        fenwick_add(tree, x, g_table[eta[x]] - gx0)
        fenwick_add(tree, y, g_table[eta[y]] - gy0)
        if log_on and n_events < log_t.shape[0]:
            log_t[n_events] = t_now
            log_x[n_events] = x
            log_y[n_events] = y
        n_events += 1
        aux[2] += 1.0
        if aux[2] >= _RESYNC_EVERY:
            _resync_zrp(tree, eta, g_table, aux)
    return t_now, n_events, STATUS_TARGET


# ---------------------------------------------------------------------------
# Standard coupling event loop
# ---------------------------------------------------------------------------

TAG_JOINT = 0
TAG_ETA = 1
TAG_ZETA = 2


@njit(cache=True, nogil=True)
def _resync_coupled(tree_m, tree_e, tree_z, eta, zeta, g_table, aux):
    n = eta.shape[0]
    for base in range(3):
        aux[2 * base] = 0.0
        aux[2 * base + 1] = 0.0
    sm = 0.0
    se = 0.0
    sz = 0.0
    for i in range(n):
        ge = g_table[eta[i]]
        gz = g_table[zeta[i]]
        m = min(ge, gz)
        tree_m[i] = m
        tree_e[i] = ge - m
        tree_z[i] = gz - m
        sm += m
        se += ge - m
        sz += gz - m
    for i in range(1, n + 1):
        parent = i + (i & (-i))
        if parent <= n:
            tree_m[parent - 1] += tree_m[i - 1]
            tree_e[parent - 1] += tree_e[i - 1]
            tree_z[parent - 1] += tree_z[i - 1]
    aux[0] = sm
    aux[2] = se
    aux[4] = sz
    aux[6] = 0.0


@njit(cache=True, nogil=True)
def run_coupled(eta, zeta, g_table, nbr, disp_cdf,
                tree_m, tree_e, tree_z, aux, rng_state,
                t_now, t_target, time_scale, max_events,
                check_mode, stats,
                log_t, log_x, log_y, log_tag, log_on):
    """Coupled pair (eta, zeta): joint jumps at rate min(g, g), excess
    jumps move a single copy.

    aux = [Tmin, c, Teta, c, Tzeta, c, events_since_resync, unused].
    stats = [l1, contraction_violations, support_violations, joint_events]
    (int64); check_mode 0 none, 1 contraction, 2 contraction + support
    set {0, 2} with absorbing 0.
    Returns (t_now, n_events, status).
    """
    n = eta.shape[0]
    n_disp = disp_cdf.shape[0]
    n_events = 0
    while True:
        tm = aux[0]
        te = aux[2]
        tz = aux[4]
        total = tm + te + tz
        if total <= 0.0:
            return t_now, n_events, STATUS_FROZEN
        if n_events >= max_events:
            return t_now, n_events, STATUS_MAXEVENTS
        u1 = unit_open(rng_state)
        dt = -np.log(u1) / (time_scale * total)
        if t_now + dt > t_target:
            return t_target, n_events, STATUS_TARGET
        u2 = unit_open(rng_state)
        val = u2 * total
        if val < tm:
            tag = TAG_JOINT
        elif val < tm + te:
            tag = TAG_ETA
            val -= tm
        else:
            tag = TAG_ZETA
            val -= tm + te
        if tag == TAG_JOINT:
            x = fenwick_select(tree_m, val)
        elif tag == TAG_ETA:
            x = fenwick_select(tree_e, val)
        else:
            x = fenwick_select(tree_z, val)
        if x >= n:
            x = n - 1
        # verify the selected leaf really carries positive weight of its tag
        ok = False
        guard = 0
        while guard <= n:
            ge = g_table[eta[x]]
            gz = g_table[zeta[x]]
            m = min(ge, gz)
            if tag == TAG_JOINT:
                w = m
            elif tag == TAG_ETA:
                w = ge - m
            else:
                w = gz - m
            if w > 0.0:
                ok = True
                break
            x += 1
            if x >= n:
                x = 0
            guard += 1
        if not ok:
            # stale totals from float drift; rebuild and redraw
            _resync_coupled(tree_m, tree_e, tree_z, eta, zeta, g_table, aux)
            continue
        t_now += dt
        u3 = unit_open(rng_state)
        j = 0
        while j < n_disp - 1 and u3 > disp_cdf[j]:
            j += 1
        y = nbr[x, j]

        d_x0 = abs(eta[x] - zeta[x])
        d_y0 = abs(eta[y] - zeta[y])
        ge_x0 = g_table[eta[x]]
        gz_x0 = g_table[zeta[x]]
        ge_y0 = g_table[eta[y]]
        gz_y0 = g_table[zeta[y]]
        m_x0 = min(ge_x0, gz_x0)
        m_y0 = min(ge_y0, gz_y0)

        if tag == TAG_JOINT or tag == TAG_ETA:
            eta[x] -= 1
            eta[y] += 1
        if tag == TAG_JOINT or tag == TAG_ZETA:
            zeta[x] -= 1
            zeta[y] += 1

        ge_x1 = g_table[eta[x]]
        gz_x1 = g_table[zeta[x]]
        ge_y1 = g_table[eta[y]]
        gz_y1 = g_table[zeta[y]]
        m_x1 = min(ge_x1, gz_x1)
        m_y1 = min(ge_y1, gz_y1)

        fenwick_add(tree_m, x, m_x1 - m_x0)
        fenwick_add(tree_m, y, m_y1 - m_y0)
        fenwick_add(tree_e, x, (ge_x1 - m_x1) - (ge_x0 - m_x0))
        fenwick_add(tree_e, y, (ge_y1 - m_y1) - (ge_y0 - m_y0))
        fenwick_add(tree_z, x, (gz_x1 - m_x1) - (gz_x0 - m_x0))
        fenwick_add(tree_z, y, (gz_y1 - m_y1) - (gz_y0 - m_y0))
        _kahan_add(aux, 0, m_x1 - m_x0)
        _kahan_add(aux, 0, m_y1 - m_y0)
        _kahan_add(aux, 2, (ge_x1 - m_x1) - (ge_x0 - m_x0))
        _kahan_add(aux, 2, (ge_y1 - m_y1) - (ge_y0 - m_y0))
        _kahan_add(aux, 4, (gz_x1 - m_x1) - (gz_x0 - m_x0))
        _kahan_add(aux, 4, (gz_y1 - m_y1) - (gz_y0 - m_y0))

        d_x1 = abs(eta[x] - zeta[x])
        d_y1 = abs(eta[y] - zeta[y])
        l1_old = stats[0]
        l1_new = l1_old + (d_x1 - d_x0) + (d_y1 - d_y0)
        stats[0] = l1_new
        if check_mode >= 1 and l1_new > l1_old:
            stats[1] += 1
        if check_mode >= 2:
            if (l1_old == 0 and l1_new != 0) or (l1_new != 0 and l1_new != 2):
                stats[2] += 1
        if tag == TAG_JOINT:
            stats[3] += 1

        if log_on and n_events < log_t.shape[0]:
            log_t[n_events] = t_now
            log_x[n_events] = x
            log_y[n_events] = y
            log_tag[n_events] = tag
        n_events += 1
        aux[6] += 1.0
        if aux[6] >= _RESYNC_EVERY:
            _resync_coupled(tree_m, tree_e, tree_z, eta, zeta, g_table, aux)
    return t_now, n_events, STATUS_TARGET


# ---------------------------------------------------------------------------
# Random-walk first hitting of the origin (difference walk of one jump)
# ---------------------------------------------------------------------------

@njit(cache=True, nogil=True)
def rw_first_hit_1d(n_replicas, n_steps_max, root_seed, stream_base, out_steps):
    """Simple symmetric walk from 1; out_steps[r] = first step hitting 0,
    or n_steps_max + 1 when it survives the horizon."""
    state = np.empty(4, dtype=np.uint64)
    for r in range(n_replicas):
        seed_state_nb(root_seed, stream_base + r, state)
        pos = 1
        hit = n_steps_max + 1
        for step in range(1, n_steps_max + 1):
            if unit_open(state) < 0.5:
                pos += 1
            else:
                pos -= 1
            if pos == 0:
                hit = step
                break
        out_steps[r] = hit


@njit(cache=True, nogil=True)
def rw_first_hit_2d(n_replicas, n_steps_max, root_seed, stream_base, out_steps):
    state = np.empty(4, dtype=np.uint64)
    for r in range(n_replicas):
        seed_state_nb(root_seed, stream_base + r, state)
        px = 1
        py = 0
        hit = n_steps_max + 1
        for step in range(1, n_steps_max + 1):
            u = unit_open(state)
            if u < 0.25:
                px += 1
            elif u < 0.5:
                px -= 1
            elif u < 0.75:
                py += 1
            else:
                py -= 1
            if px == 0 and py == 0:
                hit = step
                break
        out_steps[r] = hit


# ---------------------------------------------------------------------------
# Jump-count chain: exponential waits with rates in [rate_lo, rate_hi]
# ---------------------------------------------------------------------------

@njit(cache=True, nogil=True)
def jump_chain_counts(n_replicas, rate_lo, rate_hi, t_total, uniform_rates,
                      root_seed, stream_base, out_counts):
    """Number of completed jumps by t_total per replica.

    uniform_rates False: every wait has rate rate_lo (the adversarial
    worst case); True: each wait's rate is drawn uniformly in
    [rate_lo, rate_hi].
    """
    state = np.empty(4, dtype=np.uint64)
    for r in range(n_replicas):
        seed_state_nb(root_seed, stream_base + r, state)
        t = 0.0
        count = 0
        while True:
            if uniform_rates:
                lam = rate_lo + (rate_hi - rate_lo) * unit_open(state)
            else:
                lam = rate_lo
            t += -np.log(unit_open(state)) / lam
            if t > t_total:
                break
            count += 1
        out_counts[r] = count
