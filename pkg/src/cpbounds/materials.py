"""Physical constants, susceptibility models and dipole polarizabilities.

Lengths are in nanometres and polarizabilities in nm^3 (volume units, so
that a perfectly conducting sphere of radius r has polarizability r^3).
Frequencies are imaginary-axis magnitudes xi in rad/s.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence, Union

import numpy as np
from scipy import constants as _sc
from scipy.special import elliprd

from .errors import InputError

NM = 1e-9


@dataclass(frozen=True)
class Constants:
    hbar: float = _sc.hbar
    c: float = _sc.c
    k_B: float = _sc.k


CONSTANTS = Constants()


def _check_xi(xi):
    xi = np.asarray(xi, dtype=float)
    if np.any(xi < 0) or np.any(np.isnan(xi)):
        raise InputError("imaginary frequency xi must be >= 0")
    return xi


def _scalar_or_array(out, xi):
    return float(out) if np.ndim(xi) == 0 else out


@dataclass(frozen=True)
class Dispersionless:
    """Frequency-independent susceptibility ``chi0``; ``inf`` means PEC."""

    chi0: float

    def __post_init__(self):
        if not self.chi0 >= 0:
            raise InputError(f"chi0 must be >= 0, got {self.chi0}")

    def chi(self, xi):
        xi = _check_xi(xi)
        return _scalar_or_array(np.full(xi.shape, float(self.chi0)), xi)


@dataclass(frozen=True)
class Drude:
    """Drude metal, chi(i xi) = omega_p^2 / (xi^2 + gamma xi).

    At xi = 0 the susceptibility is returned as ``math.inf`` (perfect
    conductor at DC); downstream reflection code takes that limit
    analytically.
    """

    omega_p: float
    gamma: float

    def __post_init__(self):
        if not (self.omega_p > 0 and self.gamma > 0):
            raise InputError("Drude omega_p and gamma must both be > 0")

    def chi(self, xi):
        xi = _check_xi(xi)
        # overflow for denormal xi gives inf, the same limit as xi = 0
        with np.errstate(divide="ignore", over="ignore"):
            out = np.where(xi > 0, self.omega_p**2 / (xi * xi + self.gamma * xi), math.inf)
        return _scalar_or_array(out, xi)


@dataclass(frozen=True)
class Tabulated:
    """Sampled susceptibility, interpolated log-log and clamped outside the table.

    If any sample has chi == 0 the interpolation is linear in chi against
    log xi instead (log of zero is undefined).
    """

    xi: tuple
    values: tuple
    _logx: np.ndarray = field(init=False, repr=False, compare=False)
    _y: np.ndarray = field(init=False, repr=False, compare=False)
    _loglog: bool = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        xs = np.asarray(self.xi, dtype=float)
        ys = np.asarray(self.values, dtype=float)
        if xs.size == 0:
            raise InputError("tabulated material has no samples")
        if xs.shape != ys.shape or xs.ndim != 1:
            raise InputError("tabulated xi and chi must be 1-D and equally long")
        if np.any(xs <= 0):
            raise InputError("tabulated xi samples must be > 0")
        if np.any(np.diff(xs) <= 0):
            raise InputError("tabulated xi samples must be strictly increasing")
        if np.any(ys < 0) or not np.all(np.isfinite(ys)):
            raise InputError("tabulated chi samples must be finite and >= 0")
        loglog = bool(np.all(ys > 0))
        object.__setattr__(self, "_logx", np.log(xs))
        object.__setattr__(self, "_y", np.log(ys) if loglog else ys)
        object.__setattr__(self, "_loglog", loglog)

    @classmethod
    def from_file(cls, path: Union[str, Path]) -> "Tabulated":
        """Read two whitespace-separated columns ``xi_rad_per_s chi``; ``#`` starts a comment."""
        rows = []
        for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 2:
                raise InputError(f"{path}:{lineno}: expected 2 columns, got {len(parts)}")
            try:
                rows.append((float(parts[0]), float(parts[1])))
            except ValueError as exc:
                raise InputError(f"{path}:{lineno}: {exc}") from None
        if not rows:
            raise InputError(f"{path}: tabulated material file is empty")
        xs, ys = zip(*rows)
        return cls(tuple(xs), tuple(ys))

    def chi(self, xi):
        xi = _check_xi(xi)
        with np.errstate(divide="ignore"):
            lx = np.log(np.where(xi > 0, xi, np.exp(self._logx[0])))
        y = np.interp(lx, self._logx, self._y)
        out = np.exp(y) if self._loglog else y
        return _scalar_or_array(out, xi)


MaterialModel = Union[Dispersionless, Drude, Tabulated]

GOLD = Drude(omega_p=1.37e16, gamma=5.32e13)


def chi_eval(model: MaterialModel, xi):
    """Susceptibility of ``model`` at imaginary frequency ``xi`` (scalar or array)."""
    return model.chi(xi)


AXES = ("x", "y", "z")


@dataclass(frozen=True)
class DipoleSpec:
    """Dipole with principal axes along x, y, z.

    ``alpha_par`` applies to x and y, ``alpha_perp`` to z (the surface
    normal).  ``d`` is the distance to the domain face in nm.
    """

    alpha_par: float = 1.0
    alpha_perp: float = 1.0
    d: float = 100.0
    force_axis: str = "z"

    def __post_init__(self):
        if self.alpha_par < 0 or self.alpha_perp < 0:
            raise InputError("polarizabilities must be >= 0")
        if not self.d > 0:
            raise InputError(f"separation d must be > 0, got {self.d}")
        if self.force_axis not in ("z", "x"):
            raise InputError(f"force_axis must be 'z' or 'x', got {self.force_axis!r}")

    @property
    def alphas(self) -> np.ndarray:
        return np.array([self.alpha_par, self.alpha_par, self.alpha_perp])

    @property
    def ratio(self) -> float:
        return self.alpha_perp / self.alpha_par if self.alpha_par else math.inf


# ---------------------------------------------------------------- ellipsoids


@dataclass(frozen=True)
class EllipsoidSpec:
    """Ellipsoid with semi-axes in nm; ``permittivity=None`` means PEC."""

    semi_axes: Sequence[float]
    permittivity: Union[float, None] = None

    def __post_init__(self):
        axes = tuple(float(a) for a in self.semi_axes)
        if len(axes) != 3 or min(axes) <= 0:
            raise InputError("ellipsoid needs three positive semi-axes")
        object.__setattr__(self, "semi_axes", axes)
        if self.permittivity is not None:
            eps = float(self.permittivity)
            if not eps >= 1:
                raise InputError(f"permittivity must be >= 1, got {eps}")

    @property
    def pec(self) -> bool:
        return self.permittivity is None or math.isinf(self.permittivity)


_SERIES_E2 = 1e-2
_SERIES_TERMS = 8


def _prolate_series(e2):
    # 1/3 - sum_k 2 e^{2k} / ((2k+1)(2k+3))
    return 1 / 3 - sum(2 * e2**k / ((2 * k + 1) * (2 * k + 3)) for k in range(1, _SERIES_TERMS + 1))


def _oblate_series(e2):
    # 1/3 + sum_k c_k e^{2k}, c_1 = 2/15, c_{k+1} = c_k (2k+2)/(2k+5)
    total, c = 1 / 3, 2 / 15
    for k in range(1, _SERIES_TERMS + 1):
        total += c * e2**k
        c *= (2 * k + 2) / (2 * k + 5)
    return total


def _prolate_from_ratio(q: float) -> float:
    # q = short / long semi-axis, so 1 - e^2 = q^2 exactly
    e2 = (1 - q) * (1 + q)
    if e2 < _SERIES_E2:
        return _prolate_series(e2)
    e = math.sqrt(e2)
    # atanh(e) = log((1 + e) / q); the log form keeps accuracy as q -> 0
    ath = math.atanh(e) if e < 0.5 else math.log((1 + e) / q)
    return q * q / e2 * (ath / e - 1)


def _oblate_from_ratio(q: float) -> float:
    # q = symmetry-axis / equatorial semi-axis
    e2 = (1 - q) * (1 + q)
    if e2 < _SERIES_E2:
        return _oblate_series(e2)
    e = math.sqrt(e2)
    # pi/2 - atan(g) rewritten as asin(e) to avoid cancellation
    l_eq = q / (2 * e2 * e) * math.asin(e) - q * q / (2 * e2)
    return 1 - 2 * l_eq


def prolate_depolarization(e: float) -> float:
    """Depolarization factor along the long axis of a prolate spheroid of eccentricity ``e``."""
    if not 0 <= e < 1:
        raise InputError("eccentricity must lie in [0, 1)")
    return _prolate_from_ratio(math.sqrt(1 - e * e))


def oblate_depolarization(e: float) -> float:
    """Depolarization factor along the short (symmetry) axis of an oblate spheroid."""
    if not 0 <= e < 1:
        raise InputError("eccentricity must lie in [0, 1)")
    return _oblate_from_ratio(math.sqrt(1 - e * e))


def depolarization_factors(a: float, b: float, c: float) -> tuple:
    """Depolarization factors (L_a, L_b, L_c) of an ellipsoid with semi-axes a, b, c.

    Spheroids use the closed forms in the eccentricity; general ellipsoids
    use Carlson's symmetric integral, L_a = abc/3 * R_D(b^2, c^2, a^2).
    """
    axes = (float(a), float(b), float(c))
    if min(axes) <= 0:
        raise InputError("semi-axes must be > 0")
    rtol = 1e-14
    for i in range(3):
        j, k = [m for m in range(3) if m != i]
        if math.isclose(axes[j], axes[k], rel_tol=rtol):
            # axis i is the symmetry axis
            s, t = axes[i], axes[j]
            if math.isclose(s, t, rel_tol=rtol):
                return (1 / 3, 1 / 3, 1 / 3)
            if s > t:
                l_sym = _prolate_from_ratio(t / s)
            else:
                l_sym = _oblate_from_ratio(s / t)
            out = [(1 - l_sym) / 2] * 3
            out[i] = l_sym
            return tuple(out)
    sq = [x * x for x in axes]
    vol = axes[0] * axes[1] * axes[2] / 3
    return (
        vol * float(elliprd(sq[1], sq[2], sq[0])),
        vol * float(elliprd(sq[0], sq[2], sq[1])),
        vol * float(elliprd(sq[0], sq[1], sq[2])),
    )


def ellipsoid_polarizability(spec: EllipsoidSpec) -> tuple:
    """Static polarizabilities (nm^3) along each semi-axis, in the order given.

    alpha_j = (abc/3) (eps - 1) / (1 + L_j (eps - 1)), and abc / (3 L_j)
    for a perfect conductor.
    """
    a, b, c = spec.semi_axes
    factors = depolarization_factors(a, b, c)
    vol = a * b * c / 3
    if spec.pec:
        return tuple(vol / L for L in factors)
    de = spec.permittivity - 1
    return tuple(vol * de / (1 + L * de) for L in factors)
