"""Canonical-ensemble oracles: brute-force enumeration over all
configurations is the ground truth at small (n, S); closed forms cover the
linear (multinomial) and indicator (stars-and-bars) rates."""
import itertools
import math

import numpy as np
import pytest
from scipy import stats

from hydrolab.ensembles import (CanonicalTable, build_canonical,
                                canonical_expectation, canonical_mass_pmf,
                                canonical_mass_pmf_vs_gaussian,
                                equivalence_error, llt_sweep, mass_window_tail)
from hydrolab.errors import RangeError
from hydrolab.rates import indicator_rate, linear_rate, piecewise_rate
from hydrolab.thermo import ThermoTable

RATES = {
    "linear": linear_rate(),
    "indicator": indicator_rate(),
    "piecewise": piecewise_rate(),
}


def g_factorial(rate, k_max):
    gf = np.ones(k_max + 1)
    for k in range(1, k_max + 1):
        gf[k] = gf[k - 1] * rate.values[k]
    return gf


def compositions(total, parts):
    if parts == 1:
        yield (total,)
        return
    for k in range(total + 1):
        for rest in compositions(total - k, parts - 1):
            yield (k,) + rest


def brute_force(rate, n, S, h, lam=1.0):
    """(Z_{n,S} at lam=1, E[h(eta_0) | S]) by full enumeration."""
    gf = g_factorial(rate, S)
    Z = 0.0
    num = 0.0
    for cfg in compositions(S, n):
        w = 1.0
        for k in cfg:
            w *= lam**k / gf[k]
        Z += w
        num += h(cfg[0]) * w
    return Z, num / Z


class TestPartitionValues:
    def test_single_site_base_case(self):
        for rate in RATES.values():
            table = CanonicalTable(rate, 1, 8)
            gf = g_factorial(rate, 8)
            for S in range(9):
                assert table.Z(1, S) == pytest.approx(1.0 / gf[S], rel=1e-12)

    def test_indicator_stars_and_bars(self):
        table = build_canonical(RATES["indicator"], 4, 8)
        assert table.Z(4, 4) == pytest.approx(35.0, rel=1e-12)
        for n in (2, 3, 4):
            for S in range(9):
                assert table.Z(n, S) == pytest.approx(math.comb(S + n - 1, n - 1),
                                                      rel=1e-11)

    def test_linear_multinomial_identity(self):
        table = build_canonical(RATES["linear"], 4, 8)
        assert table.Z(2, 3) == pytest.approx(8.0 / 6.0, rel=1e-12)
        for n in (2, 3, 4):
            for S in range(9):
                assert table.Z(n, S) == pytest.approx(n**S / math.factorial(S),
                                                      rel=1e-11)

    def test_recursion_invariant(self):
        rate = RATES["piecewise"]
        table = CanonicalTable(rate, 5, 10)
        for n in (2, 4, 5):
            for S in (0, 3, 7, 10):
                terms = table.log_weights[:S + 1] + table.logZ[n - 1, S::-1]
                m = terms.max()
                lse = m + np.log(np.exp(terms - m).sum())
                assert table.logZ[n, S] == pytest.approx(lse, abs=1e-12)

    def test_range_error(self):
        table = CanonicalTable(RATES["linear"], 3, 5)
        with pytest.raises(RangeError):
            table.Z(4, 2)
        with pytest.raises(RangeError):
            table.Z(2, 6)


class TestCanonicalExpectation:
    def test_linear_binomial_splitting(self):
        table = build_canonical(RATES["linear"], 4, 8)
        g = RATES["linear"].values
        assert canonical_expectation(table, 4, g) == pytest.approx(1.0, abs=1e-13)

    def test_indicator_composition_count(self):
        table = build_canonical(RATES["indicator"], 4, 8)
        g = RATES["indicator"].values
        assert canonical_expectation(table, 4, g) == pytest.approx(4.0 / 7.0,
                                                                   abs=1e-13)

    def test_empty_system(self):
        for rate in RATES.values():
            table = build_canonical(rate, 3, 4)
            assert canonical_expectation(table, 0, lambda k: 5.0 + k) == 5.0

    @pytest.mark.parametrize("name", list(RATES))
    def test_brute_force_oracle(self, name):
        rate = RATES[name]
        for n in (2, 3, 4):
            table = build_canonical(rate, n, 8)
            for S in range(9):
                _, expected_g = brute_force(rate, n, S, lambda k: rate.values[k])
                _, expected_id = brute_force(rate, n, S, lambda k: k)
                got_g = canonical_expectation(table, S, rate.values)
                got_id = canonical_expectation(table, S, lambda k: float(k))
                assert got_g == pytest.approx(expected_g, abs=1e-12)
                assert got_id == pytest.approx(expected_id, abs=1e-12)

    def test_independent_of_grand_canonical_parameter(self):
        rate = RATES["piecewise"]
        for S in range(7):
            _, e1 = brute_force(rate, 3, S, lambda k: rate.values[k], lam=0.5)
            _, e2 = brute_force(rate, 3, S, lambda k: rate.values[k], lam=2.0)
            assert e1 == pytest.approx(e2, abs=1e-12)


class TestEquivalence:
    def test_linear_exact(self):
        thermo = ThermoTable(RATES["linear"])
        for ell in (2, 5, 16, 40):
            entry = equivalence_error(RATES["linear"], thermo, ell, 1, 1.0)
            assert entry.abs_error <= 1e-12

    def test_indicator_closed_form(self):
        thermo = ThermoTable(RATES["indicator"])
        for ell, m in [(4, 1.0), (10, 1.0), (100, 1.0), (8, 2.0)]:
            entry = equivalence_error(RATES["indicator"], thermo, ell, 1, m)
            S, n = entry.S, entry.n_sites
            closed = S / ((S + n - 1) * (S + n))
            assert entry.canonical_E == pytest.approx(S / (S + n - 1), rel=1e-12)
            assert entry.abs_error == pytest.approx(closed, rel=1e-9)

    def test_indicator_example_values(self):
        thermo = ThermoTable(RATES["indicator"])
        e4 = equivalence_error(RATES["indicator"], thermo, 4, 1, 1.0)
        assert e4.abs_error == pytest.approx(1.0 / 14.0, rel=1e-12)
        e100 = equivalence_error(RATES["indicator"], thermo, 100, 1, 1.0)
        assert e100.abs_error == pytest.approx(100.0 / (199.0 * 200.0), rel=1e-9)

    @pytest.mark.parametrize("name", ["indicator", "piecewise"])
    def test_decay_slope(self, name):
        rate = RATES[name]
        thermo = ThermoTable(rate)
        ells = [2, 4, 8, 16, 32, 64]
        report = llt_sweep(rate, thermo, ells, 1, 1.0)
        assert -1.3 <= report.slope <= -0.7


class TestGaussianComparison:
    def test_linear_mass_law_is_poisson(self):
        rate = RATES["linear"]
        thermo = ThermoTable(rate)
        n = 32
        table = CanonicalTable(rate, n, 80)
        pmf = canonical_mass_pmf(table, thermo, n, 1.0)
        expected = stats.poisson.pmf(np.arange(81), n)
        np.testing.assert_allclose(pmf, expected, rtol=1e-9, atol=1e-300)

    def test_centered_variance_band(self):
        rate = RATES["linear"]
        thermo = ThermoTable(rate)
        comp = canonical_mass_pmf_vs_gaussian(rate, thermo, 64, 1, 1.0)
        assert comp.sup_error_centered <= 0.06 / math.sqrt(64)
        assert comp.better == "centered"

    def test_error_decays(self):
        rate = RATES["linear"]
        thermo = ThermoTable(rate)
        errs = []
        for ell in (16, 64):
            comp = canonical_mass_pmf_vs_gaussian(rate, thermo, ell, 1, 1.0)
            errs.append(comp.sup_error_centered)
        assert errs[0] / errs[1] >= 1.7

    def test_single_site_skipped(self):
        rate = RATES["linear"]
        thermo = ThermoTable(rate)
        comp = canonical_mass_pmf_vs_gaussian(rate, thermo, 1, 1, 1.0)
        assert comp.skipped


def test_mass_window_concentration_log_linear():
    rate = RATES["piecewise"]
    thermo = ThermoTable(rate)
    ns = [4, 8, 16, 32]
    tails = []
    for n in ns:
        S_max = int(3 * n + 30)
        table = CanonicalTable(rate, n, S_max)
        tails.append(mass_window_tail(table, thermo, n, 1.0, 0.5, 1.5))
    ys = np.log(tails)
    coeff = np.polyfit(ns, ys, 1)
    resid = ys - np.polyval(coeff, ns)
    r2 = 1.0 - np.sum(resid**2) / np.sum((ys - ys.mean()) ** 2)
    assert coeff[0] < 0.0
    assert r2 >= 0.98
