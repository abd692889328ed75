"""Acceptance checks, one test per criterion.

Each test prints a single ``[criterion N] PASS/FAIL ...`` line (visible
with ``pytest -s`` or in the captured output of a failure).
"""

import math
import time

import numpy as np
import pytest

from cpbounds.bounds import force_bounds, matsubara_force_bounds
from cpbounds.halfspace import _POWERS, reduced_profile
from cpbounds.materials import GOLD, DipoleSpec, Dispersionless, EllipsoidSpec, ellipsoid_polarizability
from cpbounds.oracle import (
    build_domain, incident_field, monotonicity_suite, random_points, run_trials,
)
from cpbounds.materials import CONSTANTS, NM

CHI_GRID = np.logspace(-2, 6, 25)
RATIOS = (0.0, 0.5, 1.0, 2.0, 10.0, 100.0)
GOLD_DISTANCES = (10.0, 100.0, 1000.0, 10000.0)


def report(n, ok, detail):
    print(f"[criterion {n}] {'PASS' if ok else 'FAIL'} {detail}")
    assert ok, detail


@pytest.fixture(scope="module")
def chi_ratio_grid():
    t0 = time.perf_counter()
    res = {(c, r): force_bounds(DipoleSpec(1.0, r, 100.0), Dispersionless(c))
           for c in CHI_GRID for r in RATIOS}
    return res, time.perf_counter() - t0


@pytest.fixture(scope="module")
def trials():
    t0 = time.perf_counter()
    recs = run_trials(1000, seed=0, workers=4)
    return recs, time.perf_counter() - t0


def test_criterion_01_planar_tightness(chi_ratio_grid):
    res, elapsed = chi_ratio_grid
    ratios = np.array([r.F_planar / r.F_minus for r in res.values()])
    ok = bool(np.all((ratios > 0.88) & (ratios <= 1.0))) and elapsed < 60
    report(1, ok, f"F_planar/F_minus in [{ratios.min():.4f}, {ratios.max():.4f}] "
                  f"over {len(ratios)} points, {elapsed:.1f} s")


def test_criterion_02_repulsion_not_excluded(chi_ratio_grid):
    res, _ = chi_ratio_grid
    grid_min = min(r.F_plus for r in res.values())
    gold = [force_bounds(DipoleSpec(1.0, 1.0, d), GOLD).F_plus for d in GOLD_DISTANCES]
    ok = grid_min > 0 and min(gold) > 0
    report(2, ok, f"min F_plus grid {grid_min:.4g}, gold {min(gold):.4g}")


def test_criterion_03_magnitude_asymmetry(chi_ratio_grid):
    res, _ = chi_ratio_grid
    q = np.array([abs(res[(c, 1.0)].F_plus) / abs(res[(c, 1.0)].F_minus) for c in CHI_GRID])
    report(3, bool(np.all(q < 0.1)), f"max |F_plus|/|F_minus| = {q.max():.4f}")


def test_criterion_04_dispersionless_scaling():
    worst = 0.0
    for chi in (1.0, 1e3):
        mat = Dispersionless(chi)
        for d in (20.0, 100.0, 500.0):
            a = force_bounds(DipoleSpec(1.0, 1.0, d), mat)
            b = force_bounds(DipoleSpec(1.0, 1.0, 2 * d), mat)
            # forces in newtons so that the d^-5 law is tested, not the normalization
            for fa, fb in ((a.F_minus_N, b.F_minus_N), (a.F_plus_N, b.F_plus_N)):
                worst = max(worst, abs(fa * d**5 / (fb * (2 * d) ** 5) - 1))
    report(4, worst < 1e-6, f"max |F(d) d^5 / F(2d) (2d)^5 - 1| = {worst:.2e}")


def _gold_slope(d, step=1.02):
    lo = force_bounds(DipoleSpec(1.0, 1.0, d / step), GOLD).F_minus_N
    hi = force_bounds(DipoleSpec(1.0, 1.0, d * step), GOLD).F_minus_N
    return math.log(abs(hi) / abs(lo)) / math.log(step * step)


def test_criterion_05_gold_scaling_transition():
    grid = np.logspace(1, 4, 31)
    F = np.array([abs(force_bounds(DipoleSpec(1.0, 1.0, d), GOLD).F_minus_N) for d in grid])
    chords = np.diff(np.log(F)) / np.diff(np.log(grid))
    s_lo, s_hi = _gold_slope(10.0), _gold_slope(1e4)
    ok = bool(np.all((chords > -5.05) & (chords < -3.95))) and s_lo > -4.3 and s_hi < -4.7
    report(5, ok, f"slopes in [{chords.min():.3f}, {chords.max():.3f}], "
                  f"at 10 nm {s_lo:.3f}, at 10 um {s_hi:.3f}")


def test_criterion_06_pec_saturation():
    worst = 0.0
    for ratio in RATIOS:
        a = force_bounds(DipoleSpec(1.0, ratio, 100.0), Dispersionless(1e6))
        b = force_bounds(DipoleSpec(1.0, ratio, 100.0), Dispersionless(1e8))
        for fa, fb in ((a.F_minus, b.F_minus), (a.F_plus, b.F_plus), (a.F_planar, b.F_planar)):
            worst = max(worst, abs(fa / fb - 1))
    report(6, worst < 0.01, f"max relative change 1e6 -> 1e8: {worst:.2e}")


def test_criterion_07_ellipsoid_ratio():
    alpha = ellipsoid_polarizability(EllipsoidSpec((160.0, 10.0, 10.0)))
    ratio = alpha[0] / alpha[1]
    report(7, 50.6 <= ratio <= 51.6, f"alpha_perp/alpha_par = {ratio:.4f}")


def test_criterion_08_oracle_bracketing(trials):
    recs, elapsed = trials
    failed = [r.trial_id for r in recs if not r.passed]
    ok = len(recs) == 1000 and not failed and elapsed < 60
    report(8, ok, f"{len(recs)} trials, {len(failed)} failures, {elapsed:.1f} s")


def test_criterion_09_stationarity_and_t_identity(trials):
    recs, _ = trials
    c = max(r.constraint_residual for r in recs)
    t = max(r.t_identity_residual for r in recs)
    report(9, c < 1e-9 and t < 1e-9, f"max constraint residual {c:.2e}, T-identity {t:.2e}")


def test_criterion_10_domain_monotonicity():
    rng = np.random.default_rng(2024)
    bad = 0
    levels = 0
    for _ in range(10):
        n = int(rng.integers(24, 49))
        pts = random_points(rng, n)
        kappa = 10 ** rng.uniform(-3, -1)
        chi = 10 ** rng.uniform(-2, 4)
        dom = build_domain(pts, kappa * CONSTANTS.c / NM, chi_hint=chi)
        R = np.array([0.0, 0.0, rng.uniform(2, 30)])
        fld = incident_field(dom, R, int(rng.integers(3)), 2)
        order = rng.permutation(n)
        sizes = np.unique(np.linspace(n // 8, n, 5).astype(int))
        chain = [order[:s] for s in sizes]
        levels = min(levels or len(chain), len(chain))
        bad += not monotonicity_suite(dom, chain, chi, fld).monotone
    report(10, bad == 0 and levels >= 4, f"10 chains (>= {levels} levels), {bad} non-monotone")


def test_criterion_11_matsubara_consistency():
    dip = DipoleSpec(1.0, 1.0, 100.0)
    t0 = force_bounds(dip, GOLD)
    tm = matsubara_force_bounds(dip, GOLD, 1e-3)
    worst = max(abs(tm.F_minus / t0.F_minus - 1), abs(tm.F_plus / t0.F_plus - 1),
                abs(tm.F_planar / t0.F_planar - 1))
    report(11, worst < 1e-3, f"max relative difference at 1 mK = {worst:.2e}")


def test_criterion_12_derivatives_vs_finite_differences():
    c1 = np.array([1 / 12, -2 / 3, 0, 2 / 3, -1 / 12])
    c2 = np.array([-1 / 12, 4 / 3, -5 / 2, 4 / 3, -1 / 12])
    h = 1e-3
    ds = 1.0 + h * np.arange(-2, 3)
    worst = 0.0
    for chi in (1e-2, 1.0, 1e2, 1e4, math.inf):
        for x0 in (0.0, 1e-2, 0.3, 1.0, 3.0, 10.0):
            # d varies at fixed frequency, so x = x0 * d
            prof = np.array([reduced_profile(x0 * d, chi)[:, 0] / d**_POWERS for d in ds])
            G, dG, mid = prof[:, 0:2], prof[:, 2:4], prof[2]
            errs = [
                c1 @ G / h / mid[2:4] - 1,
                c2 @ G / h**2 / mid[4:6] - 1,
                c1 @ dG / h / mid[4:6] - 1,
            ]
            worst = max(worst, float(np.max(np.abs(errs))))
    report(12, worst < 1e-6, f"max relative deviation {worst:.2e} over 30 (chi, x) points")
