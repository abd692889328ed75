"""Finite-dimensional check of the Lagrangian bound derivation.

A cloud of points stands in for the design domain.  The projected vacuum
Green's matrix G_dd is built from the imaginary-frequency free-space
dyadic between distinct points plus a self term -sigma I on the diagonal
blocks, with sigma raised until G_dd is negative definite.  For any
incident field e and its derivative de the bounds are

    L+/- = de.W.e +/- sqrt((de.W.de)(e.W.e)),   W = (I/chi - G_dd)^-1,

and every explicit structure S inside the domain must satisfy
2 de_S.(I/chi - G_SS)^-1.e_S in [L-, L+].
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .errors import InputError, InvariantViolation, NumericalError
from .materials import CONSTANTS, NM

_AXIS = {"x": 0, "y": 1, "z": 2}


def _axis_index(axis):
    if isinstance(axis, str):
        try:
            return _AXIS[axis]
        except KeyError:
            raise InputError(f"unknown axis {axis!r}") from None
    if axis not in (0, 1, 2):
        raise InputError(f"unknown axis {axis!r}")
    return int(axis)


def _radial(r, kappa):
    """A(r), C(r) and their r-derivatives for G = A I + C r r^T."""
    e = np.exp(-kappa * r)
    k2 = kappa * kappa
    a = -e * (1 / r**3 + kappa / r**2 + k2 / r)
    c = e * (3 / r**5 + 3 * kappa / r**4 + k2 / r**3)
    da = e * (3 / r**4 + 3 * kappa / r**3 + 2 * k2 / r**2 + k2 * kappa / r)
    dc = -e * (15 / r**6 + 15 * kappa / r**5 + 6 * k2 / r**4 + k2 * kappa / r**3)
    return a, c, da, dc


def _dyadic_blocks(r_vecs, kappa):
    """Vectorized dyadic over separations (M, 3) -> (M, 3, 3)."""
    r = np.linalg.norm(r_vecs, axis=-1)
    if np.any(r == 0):
        raise InputError("vacuum dyadic is singular at zero separation")
    a, c, _, _ = _radial(r, kappa)
    return a[:, None, None] * np.eye(3) + c[:, None, None] * r_vecs[:, :, None] * r_vecs[:, None, :]


def _dyadic_grad_blocks(r_vecs, kappa):
    """Vectorized gradient, (M, 3) -> (M, 3, 3, 3) indexed [m, k, a, b]."""
    r = np.linalg.norm(r_vecs, axis=-1)
    if np.any(r == 0):
        raise InputError("vacuum dyadic is singular at zero separation")
    a, c, da, dc = _radial(r, kappa)
    rhat = r_vecs / r[:, None]
    eye = np.eye(3)
    rr = r_vecs[:, :, None] * r_vecs[:, None, :]
    out = (da[:, None] * rhat)[:, :, None, None] * eye[None, None]
    out = out + (dc[:, None] * rhat)[:, :, None, None] * rr[:, None]
    out = out + c[:, None, None, None] * (
        eye[None, :, :, None] * r_vecs[:, None, None, :]
        + r_vecs[:, None, :, None] * eye[None, :, None, :]
    )
    return out


def vacuum_dyadic(r_vec, kappa: float) -> np.ndarray:
    """Free-space field of a unit dipole at separation ``r_vec`` (nm), imaginary frequency.

    G = e^{-kr}/r^3 [(3 + 3kr + k^2 r^2) rr/r^2 - (1 + kr + k^2 r^2) I],
    with k = xi/c in 1/nm; reduces to the electrostatic dipole field at k = 0.
    """
    return _dyadic_blocks(np.asarray(r_vec, dtype=float)[None, :], kappa)[0]


def vacuum_dyadic_grad(r_vec, kappa: float) -> np.ndarray:
    """Gradient dG_ab/dr_k of :func:`vacuum_dyadic`, indexed [k, a, b]."""
    return _dyadic_grad_blocks(np.asarray(r_vec, dtype=float)[None, :], kappa)[0]


# ------------------------------------------------------------------ domains


@dataclass
class DiscreteDomain:
    points: np.ndarray
    xi: float
    kappa: float
    G: np.ndarray
    self_term: float
    chi_hint: float = None
    doublings: int = 0

    @property
    def n_points(self) -> int:
        return len(self.points)

    def restrict(self, indices) -> "DiscreteDomain":
        """Sub-domain on point ``indices`` sharing this domain's self term."""
        idx = _dof_index(indices)
        return DiscreteDomain(
            self.points[np.asarray(indices, dtype=int)], self.xi, self.kappa,
            self.G[np.ix_(idx, idx)], self.self_term, self.chi_hint, self.doublings,
        )


def _dof_index(indices):
    idx = np.asarray(indices, dtype=int)
    return (3 * idx[:, None] + np.arange(3)[None, :]).ravel()


def _assemble_G(points, kappa):
    """Off-diagonal dyadic blocks only; the diagonal blocks are left zero."""
    n = len(points)
    G = np.zeros((n, 3, n, 3))
    i, j = np.triu_indices(n, 1)
    if i.size:
        blocks = _dyadic_blocks(points[i] - points[j], kappa)
        G[i, :, j, :] = blocks
        G[j, :, i, :] = np.swapaxes(blocks, 1, 2)
    return G.reshape(3 * n, 3 * n)


def build_domain(points, xi: float, chi_hint: float = None, self_term: float = 1e-3,
                 max_doublings: int = 60) -> DiscreteDomain:
    """Assemble the negative-definite projected Green's matrix for ``points`` (nm).

    ``self_term`` is the starting diagonal regularization; it is doubled
    until the largest eigenvalue is negative, and the final value is kept
    on the returned domain.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise InputError("points must be an (N, 3) array")
    if not self_term > 0:
        raise InputError("self_term must be > 0")
    if xi < 0:
        raise InputError("xi must be >= 0")
    n = len(pts)
    if n > 1:
        diff = np.linalg.norm(pts[:, None, :] - pts[None, :, :], axis=-1)
        diff[np.diag_indices(n)] = np.inf
        if np.min(diff) == 0:
            raise InputError("domain points must be distinct")
    kappa = xi / CONSTANTS.c * NM
    G0 = _assemble_G(pts, kappa)
    lam_max = np.linalg.eigvalsh(G0)[-1]
    # smallest number of doublings with sigma > lam_max, then confirm directly
    k = 0 if lam_max < self_term else int(math.floor(math.log2(lam_max / self_term))) + 1
    for k in range(k, max_doublings + 1):
        sigma = float(self_term) * 2.0**k
        G = G0 - sigma * np.eye(3 * n)
        if np.linalg.eigvalsh(G)[-1] < 0:
            return DiscreteDomain(pts, xi, kappa, G, sigma, chi_hint, k)
    raise InvariantViolation(
        f"could not make G_dd negative definite within {max_doublings} doublings"
    )


@dataclass
class DomainSpectrum:
    rho: np.ndarray
    modes: np.ndarray


def domain_spectrum(domain: DiscreteDomain) -> DomainSpectrum:
    """Eigendecomposition G_dd = -sum rho_mu N_mu N_mu^T, rho ascending."""
    try:
        rho, modes = np.linalg.eigh(-domain.G)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"eigensolver failed: {exc}") from exc
    if rho[0] <= 0:
        raise InvariantViolation("projected Green's matrix is not negative definite")
    return DomainSpectrum(rho, modes)


# ---------------------------------------------------------------- fields


@dataclass
class IncidentField:
    e: np.ndarray
    de: np.ndarray
    R: np.ndarray
    beta: int
    k: int

    def restrict(self, indices) -> "IncidentField":
        idx = _dof_index(indices)
        return IncidentField(self.e[idx], self.de[idx], self.R, self.beta, self.k)


def _outside_hull(points, R):
    if len(points) < 4:
        return True
    from scipy.spatial import Delaunay, QhullError

    try:
        return Delaunay(points).find_simplex(R) < 0
    except QhullError:
        return True  # degenerate (coplanar) cloud has no interior


def incident_field(domain: DiscreteDomain, R, beta="x", k="z") -> IncidentField:
    """Field of a unit dipole at ``R`` along ``beta`` and its derivative in R_k."""
    R = np.asarray(R, dtype=float)
    b = _axis_index(beta)
    kk = _axis_index(k)
    if np.any(np.linalg.norm(domain.points - R, axis=1) == 0):
        raise InputError("dipole position coincides with a domain point")
    if not _outside_hull(domain.points, R):
        raise InputError("dipole must lie outside the convex hull of the domain")
    r = domain.points - R
    e = _dyadic_blocks(r, domain.kappa)[:, :, b].ravel()
    # d/dR_k of G(x - R) = -(dG/dr_k)
    de = -_dyadic_grad_blocks(r, domain.kappa)[:, kk, :, b].ravel()
    if not np.any(de):
        raise InvariantViolation("dipole-sourced field derivative vanished")
    return IncidentField(e, de, R, b, kk)


# ----------------------------------------------------------------- bounds


@dataclass
class OracleSolution:
    L_minus: float
    L_plus: float
    lambda_minus: float
    lambda_plus: float
    t_minus: np.ndarray
    t_plus: np.ndarray
    X: float
    Y: float
    Z: float
    chi: float
    rho: np.ndarray
    v: np.ndarray
    dv: np.ndarray

    def lagrangian(self, t, lam) -> float:
        return float(np.sum(2 * self.dv * t - lam * (t * self.v - (1 / self.chi + self.rho) * t * t)))

    def objective(self, t) -> float:
        return float(2 * np.dot(self.dv, t))

    def constraint_residual(self, branch: str = "plus") -> float:
        """Relative residual of sum(t v - (1/chi + rho) t^2) = 0 on one branch."""
        t = self.t_plus if branch == "plus" else self.t_minus
        a = t * self.v
        b = (1 / self.chi + self.rho) * t * t
        return float(abs(np.sum(a - b)) / (np.sum(np.abs(a)) + np.sum(b)))


def _W_quadratic_forms(G, chi, e, de):
    A = np.eye(len(G)) / chi - G
    try:
        cf = linalg.cho_factor(A)
    except linalg.LinAlgError:
        raise InvariantViolation("1/chi - G_dd is not positive definite") from None
    We = linalg.cho_solve(cf, e)
    Wde = linalg.cho_solve(cf, de)
    return float(de @ We), float(de @ Wde), float(e @ We)


def discrete_bounds(domain: DiscreteDomain, chi: float, fld: IncidentField,
                    spectrum: DomainSpectrum = None, method: str = "solve") -> OracleSolution:
    """L+/- and the stationary points of the Lagrangian for susceptibility ``chi``.

    ``method="solve"`` uses a Cholesky solve with W; ``"spectrum"`` uses
    the eigen-expansion.  The stationary coefficients always come from
    the spectrum.
    """
    if not chi > 0:
        raise InputError(f"chi must be > 0, got {chi}")
    spec = spectrum or domain_spectrum(domain)
    v = spec.modes.T @ fld.e
    dv = spec.modes.T @ fld.de
    denom = 1 / chi + spec.rho
    if method == "solve":
        X, Y, Z = _W_quadratic_forms(domain.G, chi, fld.e, fld.de)
    elif method == "spectrum":
        X = float(np.sum(dv * v / denom))
        Y = float(np.sum(dv * dv / denom))
        Z = float(np.sum(v * v / denom))
    else:
        raise InputError(f"unknown method {method!r}")
    if not (Y > 0 and Z > 0):
        raise InvariantViolation("degenerate incident field (saddle point excluded)")
    root = math.sqrt(Y * Z)
    lam_plus = -2 * math.sqrt(Y / Z)
    lam_minus = 2 * math.sqrt(Y / Z)
    t_plus = (v / 2 - dv / lam_plus) / denom
    t_minus = (v / 2 - dv / lam_minus) / denom
    return OracleSolution(X - root, X + root, lam_minus, lam_plus, t_minus, t_plus,
                          X, Y, Z, float(chi), spec.rho, v, dv)


@dataclass
class StructureObjective:
    A: float
    T: np.ndarray
    # <E, P>, <P, P>/chi, <P, G P>
    constraint: tuple

    def t_identity_residual(self, G_SS, chi) -> float:
        """Relative residual of T (I/chi - G_SS) T = T."""
        if self.T.size == 0:
            return 0.0
        lhs = self.T @ (np.eye(len(G_SS)) / chi - G_SS) @ self.T
        return float(np.linalg.norm(lhs - self.T) / np.linalg.norm(self.T))


def structure_objective(domain: DiscreteDomain, subset, chi: float,
                        fld: IncidentField) -> StructureObjective:
    """Exact objective A = 2 de_S.T_S.e_S for the structure occupying point set ``subset``."""
    subset = np.asarray(sorted(set(int(i) for i in subset)), dtype=int)
    if subset.size == 0:
        return StructureObjective(0.0, np.zeros((0, 0)), (0.0, 0.0, 0.0))
    if subset.min() < 0 or subset.max() >= domain.n_points:
        raise InputError("subset index out of range")
    idx = _dof_index(subset)
    G_SS = domain.G[np.ix_(idx, idx)]
    try:
        T = np.linalg.inv(np.eye(idx.size) / chi - G_SS)
    except np.linalg.LinAlgError:
        raise InvariantViolation("singular (1/chi - G_SS); domain invariants broken") from None
    T = 0.5 * (T + T.T)
    e_S = fld.e[idx]
    P = T @ e_S
    A = 2 * float(fld.de[idx] @ P)
    return StructureObjective(A, T, (float(e_S @ P), float(P @ P) / chi, float(P @ G_SS @ P)))


# ------------------------------------------------------------ test drivers


@dataclass
class MonotonicityReport:
    L_minus: list
    L_plus: list
    monotone: bool


def monotonicity_suite(domain: DiscreteDomain, chain, chi: float, fld: IncidentField,
                       rtol: float = 1e-12) -> MonotonicityReport:
    """Bounds along nested point-index sets ``chain`` (each a superset of the last).

    ``domain`` and ``fld`` describe the largest set; smaller ones are
    restrictions, so all levels share one self term.
    """
    prev = None
    for level in chain:
        s = set(int(i) for i in level)
        if prev is not None and not prev <= s:
            raise InputError("chain levels must be nested")
        prev = s
    lo, hi = [], []
    for level in chain:
        idx = sorted(set(int(i) for i in level))
        sol = discrete_bounds(domain.restrict(idx), chi, fld.restrict(idx))
        lo.append(sol.L_minus)
        hi.append(sol.L_plus)
    ok = True
    for i in range(1, len(lo)):
        tol = rtol * (abs(lo[i]) + abs(hi[i]))
        ok &= hi[i] >= hi[i - 1] - tol and lo[i] <= lo[i - 1] + tol
    return MonotonicityReport(lo, hi, bool(ok))


def cube_points(n_side: int, spacing: float = 10.0, top: float = -5.0) -> np.ndarray:
    """n_side^3 points on a cubic grid below the plane z = ``top``."""
    r = np.arange(n_side) * spacing
    r = r - r.mean()
    X, Y, Z = np.meshgrid(r, r, np.arange(n_side) * -spacing + top, indexing="ij")
    return np.column_stack([X.ravel(), Y.ravel(), Z.ravel()])


def random_points(rng, n: int, box: float = 40.0, min_sep: float = 2.0) -> np.ndarray:
    """``n`` points in the slab |x|,|y| <= box/2, -box <= z <= -1 with a minimum separation."""
    pts = np.empty((0, 3))
    while len(pts) < n:
        p = np.array([rng.uniform(-box / 2, box / 2), rng.uniform(-box / 2, box / 2),
                      rng.uniform(-box, -1.0)])
        if len(pts) == 0 or np.min(np.linalg.norm(pts - p, axis=1)) >= min_sep:
            pts = np.vstack([pts, p])
    return pts


OCCUPANCIES = (0.1, 0.5, 0.9)


@dataclass
class TrialRecord:
    trial_id: int
    seed: int
    n_points: int
    subset_size: int
    chi: float
    A: float
    L_minus: float
    L_plus: float
    passed: bool
    constraint_residual: float = 0.0
    t_identity_residual: float = 0.0
    extra: dict = field(default_factory=dict)

    def line(self) -> str:
        return (f"{self.trial_id} {self.seed} {self.n_points} {self.subset_size} "
                f"{self.chi:.17g} {self.A:.17g} {self.L_minus:.17g} {self.L_plus:.17g} "
                f"{'pass' if self.passed else 'FAIL'}")


REPORT_HEADER = "trial_id seed N |S| chi A L_minus L_plus pass"


def run_trial(trial_id: int, seed: int = 0) -> TrialRecord:
    """One randomized bracketing trial, fully determined by (seed, trial_id)."""
    rng = np.random.default_rng([seed, trial_id])
    n = int(rng.integers(8, 65))
    pts = random_points(rng, n)
    kappa = 10 ** rng.uniform(-3, -1)
    xi = kappa * CONSTANTS.c / NM
    chi = 10 ** rng.uniform(-2, 4)
    dom = build_domain(pts, xi, chi_hint=chi)
    R = np.array([rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(2, 30)])
    beta = int(rng.integers(3))
    k = int(rng.integers(3))
    fld = incident_field(dom, R, beta, k)
    occ = OCCUPANCIES[int(rng.integers(len(OCCUPANCIES)))]
    subset = np.flatnonzero(rng.random(n) < occ)
    sol = discrete_bounds(dom, chi, fld)
    obj = structure_objective(dom, subset, chi, fld)
    tol = 1e-9 * (abs(sol.L_minus) + abs(sol.L_plus))
    passed = sol.L_minus - tol <= obj.A <= sol.L_plus + tol
    idx = _dof_index(subset) if subset.size else np.zeros(0, dtype=int)
    t_res = obj.t_identity_residual(dom.G[np.ix_(idx, idx)], chi)
    c_res = max(sol.constraint_residual("plus"), sol.constraint_residual("minus"))
    return TrialRecord(trial_id, seed, n, int(subset.size), chi, obj.A, sol.L_minus,
                       sol.L_plus, bool(passed), c_res, t_res,
                       {"occupancy": occ, "sigma": dom.self_term, "beta": beta, "k": k})


def run_trials(n_trials: int = 1000, seed: int = 0, workers: int = 1) -> list:
    """Run ``n_trials`` independent trials; order of results is by trial id."""
    if workers <= 1:
        return [run_trial(i, seed) for i in range(n_trials)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda i: run_trial(i, seed), range(n_trials)))
