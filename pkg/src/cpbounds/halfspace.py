"""Scattering Green's function of a filled half-space at imaginary frequency.

The body occupies z < 0 and the dipole sits at z = d.  All transverse
wavevector integrals are written in the reduced variable p = k_z d, so
that with x = xi d / c

    G_xx d^3 = 1/2 Int_x^inf (p^2 r_p - x^2 r_s) e^{-2p} dp
    G_zz d^3 =     Int_x^inf (p^2 - x^2) r_p      e^{-2p} dp

Normal derivatives bring down -2p and 4p^2; a lateral derivative pair
d/dx d/dx' brings down k_x^2 = k_rho^2 cos^2(phi), which is averaged over
the azimuth exactly (the in-plane channels pick up different weights).

The overall sign and prefactor are those of the Gaussian-unit field
propagator, E_sca = G p, so a perfect mirror in the static limit gives
the image-dipole values G_xx = 1/(8 d^3) and G_zz = 1/(4 d^3).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields
from functools import lru_cache

import numpy as np
from numpy.polynomial.laguerre import laggauss
from numpy.polynomial.legendre import leggauss

from .errors import InputError, NumericalError
from .materials import CONSTANTS, NM, MaterialModel

# graded Gauss-Legendre on s = 2(p - x) in [0, S_SPLIT], Laguerre beyond
S_SPLIT = 2.0
DEFAULT_ORDER = (48, 48)

COMPONENTS = (
    "G_xx", "G_zz", "dG_xx", "dG_zz", "d2G_xx", "d2G_zz",
    "Glat_xx", "Glat_yy", "Glat_zz",
)


@dataclass(frozen=True)
class FresnelData:
    krho: float
    kz: float
    kz1: float
    r_s: float
    r_p: float


def _reflection(kz, kappa2, chi):
    """Stable r_s, r_p from vacuum k_z, (xi/c)^2 and chi (arrays broadcast)."""
    kz = np.asarray(kz, dtype=float)
    chi = np.asarray(chi, dtype=float)
    pec = np.isinf(chi)
    chi_f = np.where(pec, 0.0, chi)
    kz1 = np.sqrt(kz * kz + chi_f * kappa2)
    tot = kz + kz1
    with np.errstate(invalid="ignore", divide="ignore"):
        # p - p1 = -chi x^2 / (p + p1) keeps small-chi values accurate
        r_s = np.where(tot > 0, -chi_f * kappa2 / (tot * tot), 0.0)
        r_p = np.where(
            tot > 0,
            chi_f * (kz - np.where(tot > 0, kappa2 / tot, 0.0)) / ((1 + chi_f) * kz + kz1),
            chi_f / (chi_f + 2),
        )
    r_s = np.where(pec, -1.0, r_s)
    r_p = np.where(pec, 1.0, r_p)
    return r_s, r_p


def fresnel(xi: float, krho: float, chi: float) -> FresnelData:
    """Half-space reflection coefficients at imaginary frequency ``xi`` (rad/s).

    ``krho`` is in 1/nm.  ``chi = inf`` gives the perfect-conductor limit
    r_s = -1, r_p = 1.
    """
    if chi < 0 or math.isnan(chi):
        raise InputError(f"susceptibility must be >= 0, got {chi}")
    if xi < 0 or krho < 0:
        raise InputError("xi and krho must be >= 0")
    kappa = xi / CONSTANTS.c * NM
    kz = math.sqrt(krho * krho + kappa * kappa)
    kz1 = math.inf if math.isinf(chi) else math.sqrt(krho * krho + (1 + chi) * kappa * kappa)
    r_s, r_p = _reflection(kz, kappa * kappa, chi)
    return FresnelData(krho, kz, kz1, float(r_s), float(r_p))


@lru_cache(maxsize=None)
def _base_rules(n_graded, n_tail):
    t, wt = leggauss(n_graded)
    u, wu = laggauss(n_tail)
    return (t + 1) / 2, wt / 2, u, wu


def _nodes(x, order):
    """Nodes s (M, n) and weights for Int_0^inf f(s) e^{-s} ds at each x."""
    t01, wt01, u, wu = _base_rules(*order)
    xf = np.maximum(x, 1e-10)[:, None]
    span = np.log1p(S_SPLIT / (2 * xf))
    t = t01[None, :] * span
    s_a = 2 * xf * np.expm1(t)
    w_a = wt01[None, :] * span * (s_a + 2 * xf) * np.exp(-s_a)
    s_b = np.broadcast_to(S_SPLIT + u, (x.size, u.size))
    w_b = np.broadcast_to(wu * math.exp(-S_SPLIT), (x.size, u.size))
    return np.concatenate([s_a, s_b], axis=1), np.concatenate([w_a, w_b], axis=1)


def _integrands(p, x, chi):
    """Stacked reduced integrands, shape (9, ...) in COMPONENTS order."""
    r_s, r_p = _reflection(p, x * x, chi)
    x2 = x * x
    p2 = p * p
    k2 = p2 - x2
    a_xx = 0.5 * (p2 * r_p - x2 * r_s)
    a_zz = k2 * r_p
    return np.stack([
        a_xx, a_zz,
        -2 * p * a_xx, -2 * p * a_zz,
        4 * p2 * a_xx, 4 * p2 * a_zz,
        k2 * (3 * p2 * r_p - x2 * r_s) / 8,
        k2 * (p2 * r_p - 3 * x2 * r_s) / 8,
        k2 * k2 * r_p / 2,
    ])


def reduced_profile(x, chi, order=DEFAULT_ORDER) -> np.ndarray:
    """Dimensionless Green's components at reduced frequencies ``x = xi d / c``.

    Returns an array of shape (9, len(x)) ordered as ``COMPONENTS`` and
    scaled by d^3 (values), d^4 (first derivatives) or d^5 (second and
    lateral derivatives).
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    chi = np.broadcast_to(np.asarray(chi, dtype=float), x.shape)
    if np.any(chi < 0) or np.any(np.isnan(chi)):
        raise InputError("susceptibility must be >= 0")
    if np.any(x < 0):
        raise InputError("reduced frequency must be >= 0")
    s, w = _nodes(x, order)
    xc = x[:, None]
    vals = _integrands(xc + s / 2, xc, chi[:, None])
    return 0.5 * np.exp(-2 * x) * np.einsum("kmn,mn->km", vals, w)


def reduced_profile_adaptive(x: float, chi: float, rtol: float = 1e-9) -> np.ndarray:
    """Same as :func:`reduced_profile` for one point, by adaptive quadrature.

    Slow; intended as an independent cross-check of the fixed rule.
    """
    from scipy.integrate import quad

    scale = max(x, 1e-10)
    inner = min(x + 1.0, x + 50 * scale * math.sqrt(1 + min(chi, 1e12)))
    breaks = sorted({x, x + min(scale, 1.0), inner, x + 1.0, x + 40.0})
    out = np.empty(len(COMPONENTS))
    for k in range(len(COMPONENTS)):
        def f(p, k=k):
            return float(_integrands(np.array(p), np.array(x), np.array(chi))[k]) * math.exp(-2 * (p - x))

        total = 0.0
        for lo, hi in zip(breaks[:-1], breaks[1:]):
            total += quad(f, lo, hi, epsabs=0, epsrel=rtol, limit=400)[0]
        total += quad(f, breaks[-1], math.inf, epsabs=0, epsrel=rtol, limit=400)[0]
        out[k] = total * math.exp(-2 * x)
    return out


@dataclass(frozen=True)
class GreensProfile:
    """Coincident-point components of G_sca at one (d, xi).

    Units: values 1/nm^3, first derivatives in d 1/nm^4, second and
    lateral mixed derivatives 1/nm^5.  G_yy equals G_xx by symmetry, but
    the lateral (d/dx d/dx') derivative differs between x and y dipoles.
    """

    d: float
    xi: float
    G_xx: float
    G_zz: float
    dG_xx: float
    dG_zz: float
    d2G_xx: float
    d2G_zz: float
    Glat_xx: float
    Glat_yy: float
    Glat_zz: float

    def channel(self, beta: str) -> tuple:
        """(G, dG, d2G, Glat) for dipole axis ``beta``."""
        if beta == "z":
            return self.G_zz, self.dG_zz, self.d2G_zz, self.Glat_zz
        if beta == "x":
            return self.G_xx, self.dG_xx, self.d2G_xx, self.Glat_xx
        if beta == "y":
            return self.G_xx, self.dG_xx, self.d2G_xx, self.Glat_yy
        raise InputError(f"unknown axis {beta!r}")

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


_POWERS = np.array([3, 3, 4, 4, 5, 5, 5, 5, 5])

# below this magnitude products of components go subnormal and lose bits
UNDERFLOW_FLOOR = 1e-250


def greens_profile(
    d: float,
    xi: float,
    material: MaterialModel,
    rtol: float = 1e-10,
    max_nodes: int = 400,
) -> GreensProfile:
    """Evaluate :class:`GreensProfile` for separation ``d`` (nm) and ``xi`` (rad/s).

    The fixed rule is refined (node counts doubled) until two successive
    estimates agree to ``rtol``; :class:`NumericalError` is raised if
    ``max_nodes`` is exceeded first.  A profile with any component below
    ``UNDERFLOW_FLOOR`` in magnitude (xi d / c of several hundred) is
    returned as exactly zero.
    """
    if not d > 0:
        raise InputError(f"d must be > 0, got {d}")
    if xi < 0:
        raise InputError(f"xi must be >= 0, got {xi}")
    chi = float(material.chi(xi))
    x = xi * d * NM / CONSTANTS.c
    order = DEFAULT_ORDER
    prev = reduced_profile(x, chi, order)[:, 0]
    err = None
    while True:
        order = (order[0] * 2, order[1] * 2)
        if sum(order) > max_nodes:
            raise NumericalError(
                f"half-space quadrature did not reach rtol={rtol} within {max_nodes} nodes",
                estimate=prev / d**_POWERS,
                error=err,
            )
        cur = reduced_profile(x, chi, order)[:, 0]
        diff = np.abs(cur - prev)
        if np.all(diff <= rtol * np.abs(cur)):
            break
        prev, err = cur, float(np.max(diff))
    vals = cur / d**_POWERS
    if np.min(np.abs(vals)) < UNDERFLOW_FLOOR:
        vals = np.zeros_like(vals)
    return GreensProfile(d, xi, *map(float, vals))


@dataclass
class ProfileReport:
    checks: dict

    @property
    def passed(self) -> bool:
        return all(self.checks.values())

    def failures(self) -> list:
        return [k for k, ok in self.checks.items() if not ok]


def validate_profile(profile: GreensProfile) -> ProfileReport:
    """Check the sign pattern and Cauchy-Schwarz structure of a profile.

    A wrong sign fails; an exact zero passes vacuously, which covers the
    empty half-space (chi = 0) and components that underflow when xi d / c
    is very large.
    """
    checks = {}
    for beta in ("x", "y", "z"):
        g, dg, d2g, glat = profile.channel(beta)
        checks[f"G_{beta}>0"] = g >= 0
        checks[f"dG_{beta}<0"] = dg <= 0
        checks[f"d2G_{beta}>0"] = d2g >= 0
        checks[f"Glat_{beta}>0"] = glat >= 0
        checks[f"G*d2G_{beta}>=0"] = g * d2g >= 0
        # |<du,G u>|^2 <= <u,G u><du,G du> for a positive weight
        checks[f"cauchy_schwarz_{beta}"] = dg * dg <= g * d2g * (1 + 1e-12)
    return ProfileReport(checks)
