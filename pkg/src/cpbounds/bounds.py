"""Casimir-Polder force bounds above a half-space domain.

Per channel beta (dipole axis) and imaginary frequency the normal-force
integrand is

    alpha_beta [ dG/2  -/+  sqrt(G d2G) / 2 ]

(lower/upper bound) while the planar bulk gives alpha_beta dG.  For the
lateral axis the cross term vanishes and the bracket is
+/- alpha_beta sqrt(G Glat).  Integration runs over the reduced frequency
x = xi d / c, so for a dispersionless body the normalized result is
independent of d.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad_vec

from .errors import InputError, NumericalError
from .halfspace import DEFAULT_ORDER, GreensProfile, reduced_profile
from .materials import AXES, CONSTANTS, NM, DipoleSpec, MaterialModel

RADICAND_RTOL = 1e-12


@dataclass(frozen=True)
class QuadratureSettings:
    rtol: float = 1e-8
    max_nodes: int = 4096
    order: tuple = DEFAULT_ORDER

    def __post_init__(self):
        if not 1e-14 < self.rtol < 1e-2:
            raise InputError(f"rtol must lie in (1e-14, 1e-2), got {self.rtol}")
        if self.max_nodes < 42:
            raise InputError("max_nodes must allow at least one Gauss-Kronrod panel per side")


@dataclass
class PerXiIntegrand:
    """Force per unit xi, with the per-channel breakdown kept (arrays over x, y, z)."""

    phi_minus: float
    phi_planar: float
    phi_plus: float
    channels_minus: np.ndarray
    channels_planar: np.ndarray
    channels_plus: np.ndarray
    first_term: np.ndarray


def _sqrt_radicand(rad, scale):
    bad = rad < -RADICAND_RTOL * scale
    if np.any(bad):
        raise NumericalError(
            "negative radicand in bound bracket (sign convention broken)",
            estimate=rad,
        )
    return np.sqrt(np.maximum(rad, 0.0))


def _root_product(a, b):
    """sqrt(a b) over the channel axis (axis 0), scaled so the product cannot underflow.

    The clamp threshold is relative to the largest |a| times the largest
    |b| among the channels at the same node.
    """
    ma = np.max(np.abs(a), axis=0)
    mb = np.max(np.abs(b), axis=0)
    ma = np.where(ma > 0, ma, 1.0)
    mb = np.where(mb > 0, mb, 1.0)
    rad = (a / ma) * (b / mb)
    return _sqrt_radicand(rad, 1.0) * np.sqrt(ma) * np.sqrt(mb)


def channel_terms(red: np.ndarray, force_axis: str = "z") -> tuple:
    """Split reduced profiles into (cross term, root term), each shaped (3, M).

    ``red`` is the output of :func:`cpbounds.halfspace.reduced_profile`.
    """
    g = red[[0, 0, 1]]
    if force_axis == "z":
        dg = red[[2, 2, 3]]
        d2g = red[[4, 4, 5]]
        first = 0.5 * dg
        root = 0.5 * _root_product(g, d2g)
    elif force_axis == "x":
        glat = red[[6, 7, 8]]
        first = np.zeros_like(g)
        root = _root_product(g, glat)
    else:
        raise InputError(f"force_axis must be 'z' or 'x', got {force_axis!r}")
    return first, root


def per_xi_integrand(profile: GreensProfile, dipole: DipoleSpec) -> PerXiIntegrand:
    """Per-frequency bound integrands for one :class:`GreensProfile` (units nm^-1)."""
    alphas = dipole.alphas
    g = np.array([profile.channel(b)[0] for b in AXES])
    dg = np.array([profile.channel(b)[1] for b in AXES])
    d2g = np.array([profile.channel(b)[2] for b in AXES])
    glat = np.array([profile.channel(b)[3] for b in AXES])
    if dipole.force_axis == "z":
        first = alphas * 0.5 * dg
        root = alphas * 0.5 * _root_product(g, d2g)
        planar = alphas * dg
    else:
        first = np.zeros(3)
        root = alphas * _root_product(g, glat)
        planar = np.zeros(3)
    minus = first - root
    plus = first + root
    return PerXiIntegrand(
        float(minus.sum()), float(planar.sum()), float(plus.sum()),
        minus, planar, plus, first,
    )


@dataclass
class ForceResult:
    """Force bounds.  Unsuffixed values are normalized by ``normalization`` (N).

    ``channels`` maps each dipole axis to its (minus, planar, plus)
    normalized contribution.
    """

    F_minus: float
    F_planar: float
    F_plus: float
    normalization: float
    channels: dict
    error_estimate: float
    n_evals: int
    temperature: float = 0.0
    force_axis: str = "z"
    meta: dict = field(default_factory=dict)

    @property
    def F_minus_N(self) -> float:
        return self.F_minus * self.normalization

    @property
    def F_planar_N(self) -> float:
        return self.F_planar * self.normalization

    @property
    def F_plus_N(self) -> float:
        return self.F_plus * self.normalization


def normalization(dipole: DipoleSpec) -> float:
    """hbar c alpha / (8 pi^2 d^5) in newtons, alpha = alpha_par (alpha_perp if alpha_par is 0)."""
    alpha = dipole.alpha_par if dipole.alpha_par > 0 else dipole.alpha_perp
    d = dipole.d * NM
    return CONSTANTS.hbar * CONSTANTS.c * alpha * NM**3 / (8 * math.pi**2 * d**5)


def _norm_alpha(dipole):
    return dipole.alpha_par if dipole.alpha_par > 0 else (dipole.alpha_perp or 1.0)


def _reduced_integrand(material, d, force_axis, order):
    xi_per_x = CONSTANTS.c / (d * NM)

    def f(x):
        x = np.atleast_1d(x)
        chi = material.chi(x * xi_per_x)
        first, root = channel_terms(reduced_profile(x, chi, order), force_axis)
        return np.concatenate([first, root], axis=0)

    return f


def _assemble(dipole, first, root, err, n_evals, temperature, meta):
    w = dipole.alphas / _norm_alpha(dipole) * 4 * math.pi
    ch_first = w * first
    ch_root = w * root
    planar = 2 * ch_first if dipole.force_axis == "z" else np.zeros(3)
    channels = {
        b: (float(ch_first[i] - ch_root[i]), float(planar[i]), float(ch_first[i] + ch_root[i]))
        for i, b in enumerate(AXES)
    }
    return ForceResult(
        F_minus=float(ch_first.sum() - ch_root.sum()),
        F_planar=float(planar.sum()),
        F_plus=float(ch_first.sum() + ch_root.sum()),
        normalization=normalization(dipole),
        channels=channels,
        error_estimate=float(err * np.abs(w).max()),
        n_evals=int(n_evals),
        temperature=float(temperature),
        force_axis=dipole.force_axis,
        meta=meta,
    )


def reduced_force_integrals(material: MaterialModel, d: float, force_axis: str = "z",
                            quad: QuadratureSettings = QuadratureSettings()) -> tuple:
    """Integrals over x of the (cross, root) channel terms.

    Returns ``(first, root, error, n_evals)`` with ``first`` and ``root``
    shaped (3,).  Integration is split at x = 1 with an adaptive
    Gauss-Kronrod rule on each side.
    """
    f = _reduced_integrand(material, d, force_axis, quad.order)

    def g(x):
        return f(x)[:, 0]

    limit = max(1, quad.max_nodes // (2 * 21))
    total = np.zeros(6)
    err = 0.0
    n_evals = 0
    for lo, hi in ((0.0, 1.0), (1.0, math.inf)):
        res, e, info = quad_vec(g, lo, hi, epsabs=0.0, epsrel=quad.rtol, norm="max",
                                limit=limit, full_output=True)
        n_evals += info.neval
        total += res
        err += e
        if not info.success:
            raise NumericalError(
                f"frequency integral did not converge on [{lo}, {hi}]: {info.message}",
                estimate=total, error=err,
            )
    if n_evals > quad.max_nodes + 2 * 21:
        raise NumericalError("frequency integral exceeded node budget", estimate=total, error=err)
    return total[:3], total[3:], err, n_evals


def force_bounds(dipole: DipoleSpec, material: MaterialModel,
                 quad: QuadratureSettings = QuadratureSettings()) -> ForceResult:
    """Zero-temperature bounds F-, planar-bulk force and F+ on ``dipole``."""
    first, root, err, n = reduced_force_integrals(material, dipole.d, dipole.force_axis, quad)
    return _assemble(dipole, first, root, err, n, 0.0, {"method": "xi-integral"})


@dataclass(frozen=True)
class AffineForce:
    """Normalized force as an affine function of the polarizability ratio.

    F(ratio) = g_par + g_perp * ratio for each of (minus, planar, plus).
    """

    g_par: tuple
    g_perp: tuple

    def at(self, ratio: float) -> tuple:
        return tuple(a + b * ratio for a, b in zip(self.g_par, self.g_perp))


def affine_decomposition(material: MaterialModel, d: float = 100.0,
                         quad: QuadratureSettings = QuadratureSettings()) -> AffineForce:
    """Coefficient functions g_par, g_perp from evaluations at ratios 0 and 1."""
    r0 = force_bounds(DipoleSpec(1.0, 0.0, d), material, quad)
    r1 = force_bounds(DipoleSpec(1.0, 1.0, d), material, quad)
    f0 = (r0.F_minus, r0.F_planar, r0.F_plus)
    f1 = (r1.F_minus, r1.F_planar, r1.F_plus)
    return AffineForce(f0, tuple(b - a for a, b in zip(f0, f1)))


# ------------------------------------------------------------------ Matsubara


def matsubara_spacing(temperature: float) -> float:
    """Matsubara frequency spacing 2 pi k_B T / hbar (rad/s)."""
    if not temperature > 0:
        raise InputError(f"temperature must be > 0, got {temperature}")
    return 2 * math.pi * CONSTANTS.k_B * temperature / CONSTANTS.hbar


def matsubara_frequencies(temperature: float, xi_max: float) -> np.ndarray:
    """All xi_n = n * spacing with xi_n <= xi_max."""
    step = matsubara_spacing(temperature)
    return step * np.arange(int(math.floor(xi_max / step)) + 1)


def matsubara_force_bounds(
    dipole: DipoleSpec,
    material: MaterialModel,
    temperature: float,
    rtol: float = 1e-9,
    max_direct: int = 50_000,
    chunk: int = 4096,
    quad: QuadratureSettings = QuadratureSettings(),
) -> ForceResult:
    """Finite-temperature bounds, k_B T sum' over Matsubara frequencies.

    The n = 0 term carries half weight and is evaluated in the static
    limit.  Terms are summed explicitly until the remaining tail is below
    ``rtol``; when more than ``max_direct`` terms would be needed (very low
    temperature) the remainder is taken from the Euler-Maclaurin formula
    started at the last explicit term.
    """
    dx = matsubara_spacing(temperature) * dipole.d * NM / CONSTANTS.c
    f = _reduced_integrand(material, dipole.d, dipole.force_axis, quad.order)
    acc = np.zeros(6)
    n0 = 0
    tail_done = False
    meta = {"method": "matsubara", "spacing_x": dx}
    while n0 < max_direct:
        n = np.arange(n0, n0 + chunk)
        vals = f(n * dx)
        wts = np.ones(n.size)
        if n0 == 0:
            wts[0] = 0.5
            meta["n0_term"] = (0.5 * vals[:, 0]).tolist()
        acc += vals @ wts
        n0 += chunk
        last = vals[:, -1]
        # integrand decays at least like exp(-2x): geometric tail estimate
        ratio = math.exp(-2 * dx)
        tail = np.abs(last) * ratio / (1 - ratio)
        if np.all(tail <= rtol * np.maximum(np.abs(acc), 1e-300)):
            tail_done = True
            break
    n_terms = n0
    if not tail_done:
        # Euler-Maclaurin: sum_{n>=N} f(x_n) = (1/dx) int_{x_N}^inf f + f_N/2 - dx f'_N/12 + ...
        x_n = n0 * dx

        def g(x):
            return f(x)[:, 0]

        limit = max(1, quad.max_nodes // 21)
        integral, err, info = quad_vec(g, x_n, math.inf, epsabs=0.0, epsrel=quad.rtol,
                                       norm="max", limit=limit, full_output=True)
        if not info.success:
            raise NumericalError("Matsubara tail integral did not converge",
                                 estimate=acc, error=err)
        stencil = f(x_n + dx * np.array([-2.0, -1.0, 0.0, 1.0, 2.0]))
        f_n = stencil[:, 2]
        d1 = (stencil[:, 3] - stencil[:, 1]) / (2 * dx)
        d3 = (stencil[:, 4] - 2 * stencil[:, 3] + 2 * stencil[:, 1] - stencil[:, 0]) / (2 * dx**3)
        correction = dx**3 / 720 * d3
        tail = integral / dx + f_n / 2 - dx / 12 * d1 + correction
        if np.any(np.abs(correction) > 1e3 * rtol * np.maximum(np.abs(acc + tail), 1e-300)):
            raise NumericalError("Matsubara tail not resolved by Euler-Maclaurin",
                                 estimate=acc + tail, error=float(np.max(np.abs(correction))))
        acc = acc + tail
        meta["euler_maclaurin_from"] = n0
    sums = acc * dx
    meta["n_terms"] = n_terms
    return _assemble(dipole, sums[:3], sums[3:], 0.0, n_terms, temperature, meta)
