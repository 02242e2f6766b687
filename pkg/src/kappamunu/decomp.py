"""Basis curvature tensors, least-squares decomposition of R, uniqueness
certificates, closed-form predictions and obstruction checks.

Tensors are stored as frame arrays ``T[i, j, k, l]`` = component ``l`` of
``T(E_i, E_j) E_k`` in the orthonormal phi-basis with ``xi = E_0``.  The
divided basis is ``R1, R2, R3, R4, R51, R52, R6, R7, R8``; the undivided one
replaces ``R51, R52`` by ``R5 = R51 - R52``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .curvature import CurvatureSample, curvature_sample
from .errors import InconsistencyError, UsageError
from .kmn import HOperator, compute_h
from .structure import ALMOST_COSYMPLECTIC, ALMOST_KENMOTSU, AlmostContactStructure

DIVIDED = ("R1", "R2", "R3", "R4", "R51", "R52", "R6", "R7", "R8")
UNDIVIDED = ("R1", "R2", "R3", "R4", "R5", "R6", "R7", "R8")
DIM3_SUBSET = ("R1", "R3", "R4", "R7")
ALL_TAGS = ("R1", "R2", "R3", "R4", "R5", "R51", "R52", "R6", "R7", "R8")

RANK_RTOL = 1e-8
TRIVIAL_TOL = 1e-10
OBSTRUCTION_TOL = 1e-3
FIT_TOL = 1e-6
KMN_MISMATCH_TOL = 1e-4


def _shifted(A, d):
    """``g(Y,Z)AX - g(X,Z)AY + g(AY,Z)X - g(AX,Z)Y``."""
    I = np.eye(d)
    return (
        np.einsum("jk,li->ijkl", I, A)
        - np.einsum("ik,lj->ijkl", I, A)
        + np.einsum("kj,il->ijkl", A, I)
        - np.einsum("ki,jl->ijkl", A, I)
    )


def _eta_part(A, e):
    """``eta(X)eta(Z)AY - eta(Y)eta(Z)AX + g(AX,Z)eta(Y)xi - g(AY,Z)eta(X)xi``."""
    return (
        np.einsum("i,k,lj->ijkl", e, e, A)
        - np.einsum("j,k,li->ijkl", e, e, A)
        + np.einsum("ki,j,l->ijkl", A, e, e)
        - np.einsum("kj,i,l->ijkl", A, e, e)
    )


def _product(A, B):
    """``g(AY,Z)BX - g(AX,Z)BY``."""
    return np.einsum("kj,li->ijkl", A, B) - np.einsum("ki,lj->ijkl", A, B)


@dataclass
class BasisTensorSet:
    tensors: dict
    point: np.ndarray = None

    def __getitem__(self, tag):
        return self.tensors[tag]

    def stack(self, tags):
        return np.stack([self.tensors[t] for t in tags])


def basis_tensors(phi, h, point=None) -> BasisTensorSet:
    """All basis tensors from frame matrices of ``phi`` and ``h`` (``xi = E_0``)."""
    phi = np.asarray(phi, dtype=float)
    h = np.asarray(h, dtype=float)
    d = phi.shape[0]
    I = np.eye(d)
    e = I[:, 0]
    ph = phi @ h
    T = {
        "R1": np.einsum("jk,il->ijkl", I, I) - np.einsum("ik,jl->ijkl", I, I),
        "R2": np.einsum("ik,lj->ijkl", phi, phi) - np.einsum("jk,li->ijkl", phi, phi)
        + 2.0 * np.einsum("ij,lk->ijkl", phi, phi),
        "R3": np.einsum("i,k,jl->ijkl", e, e, I) - np.einsum("j,k,il->ijkl", e, e, I)
        + np.einsum("ik,j,l->ijkl", I, e, e) - np.einsum("jk,i,l->ijkl", I, e, e),
        "R4": _shifted(h, d),
        "R51": _product(h, h),
        "R52": _product(ph, ph),
        "R6": _eta_part(h, e),
        "R7": _shifted(ph, d),
        "R8": _eta_part(ph, e),
    }
    T["R5"] = T["R51"] - T["R52"]
    return BasisTensorSet(T, point)


def basis_from_h(h: HOperator) -> BasisTensorSet:
    return basis_tensors(h.phi, h.matrix, h.point)


def eval_basis(basis: BasisTensorSet, X, Y, Z, tags=ALL_TAGS):
    """``[R_t(X, Y) Z for t in tags]`` for frame-component vectors."""
    return [np.einsum("abcd,a,b,c->d", basis[t], X, Y, Z) for t in tags]


def reconstruct(basis: BasisTensorSet, coeffs, tags):
    return np.einsum("t,tijkl->ijkl", np.asarray(coeffs, dtype=float), basis.stack(tags))


@dataclass
class FitPoint:
    """Curvature and basis tensors at one point, in the same frame."""

    sample: CurvatureSample
    basis: BasisTensorSet
    h: HOperator


def prepare(structure: AlmostContactStructure, points, alpha=None, rotation=None):
    out = []
    for p in points:
        h = compute_h(structure, p, alpha, rotation)
        sample = curvature_sample(structure, p, rotation=rotation)
        out.append(FitPoint(sample, basis_from_h(h), h))
    return out


def _rows(d):
    return [(i, j) for i in range(d) for j in range(i + 1, d)]


def design(fit_points, tags):
    """Design matrix and target over frame triples ``(E_i, E_j, E_k)``, ``i < j``."""
    A, b = [], []
    for fp in fit_points:
        d = fp.sample.dim
        idx = _rows(d)
        ii = [i for i, _ in idx]
        jj = [j for _, j in idx]
        B = fp.basis.stack(tags)[:, ii, jj]  # (t, pairs, k, l)
        A.append(B.reshape(len(tags), -1).T)
        b.append(fp.sample.riemann[ii, jj].reshape(-1))
    return np.vstack(A), np.concatenate(b)


@dataclass
class DecompositionFit:
    basis_tags: tuple
    coeffs: np.ndarray
    residual: float
    singular_values: np.ndarray
    nullspace: np.ndarray  # rows: unit coefficient directions with no effect
    rank: int
    trivial: bool = False
    abs_residual: float = 0.0
    row_space: np.ndarray = None

    def coeff(self, tag):
        return float(self.coeffs[self.basis_tags.index(tag)]) if tag in self.basis_tags else 0.0

    def as_dict(self):
        return {t: float(c) for t, c in zip(self.basis_tags, self.coeffs)}


def solve_min_norm(A, b, rtol=RANK_RTOL):
    """SVD minimum-norm least squares with a relative rank threshold."""
    U, s, Vt = np.linalg.svd(A, full_matrices=False)
    smax = s[0] if s.size else 0.0
    r = int(np.sum(s > rtol * smax)) if smax > 0 else 0
    x = Vt[:r].T @ ((U[:, :r].T @ b) / s[:r]) if r else np.zeros(A.shape[1])
    return x, s, r, Vt


def fit(fit_points, basis_tags=DIVIDED) -> DecompositionFit:
    """One least-squares fit aggregating every point in ``fit_points``."""
    if not fit_points:
        raise UsageError("fit needs at least one sample point")
    tags = tuple(basis_tags)
    unknown = set(tags) - set(ALL_TAGS)
    if unknown:
        raise UsageError(f"unknown basis tags {sorted(unknown)}")
    A, b = design(fit_points, tags)
    x, s, r, Vt = solve_min_norm(A, b)
    res = float(np.linalg.norm(A @ x - b))
    bn = float(np.linalg.norm(b))
    trivial = bn <= TRIVIAL_TOL
    rel = res if trivial else res / bn
    # full-length singular value list, zeros for missing ones
    sv = np.zeros(len(tags))
    sv[: s.size] = s
    return DecompositionFit(tags, x, rel, sv, Vt[r:], r, trivial, res, Vt[:r])


def fit_field(fit_points, basis_tags=DIVIDED):
    """Per-point fits (coefficients as functions on the manifold)."""
    return [fit([fp], basis_tags) for fp in fit_points]


@dataclass
class Certificate:
    rank: int
    nullity: int
    unique: bool


def uniqueness_certificate(f: DecompositionFit) -> Certificate:
    if tuple(f.basis_tags) != DIVIDED:
        raise UsageError("the uniqueness certificate is defined for the full divided basis")
    nullity = len(f.basis_tags) - f.rank
    return Certificate(f.rank, nullity, nullity == 0)


def predict_closed_form(cls, dim, kappa, mu=0.0, nu=0.0, tau=None, F=None, h_tol=1e-6):
    """Expected divided-basis coefficients ``(f1, f2, f3, f4, f51, f52, f6, f7, f8)``.

    * dim >= 5, ``h != 0``: ``R = -kappa R3 - R52 - mu R6 - nu R8`` (almost
      cosymplectic, ``kappa < 0``) or ``R = -R1 - (kappa+1) R3 - R52 - mu R6
      + R7 - (nu-1) R8`` (almost Kenmotsu, ``kappa < -1``);
    * dim 3, ``h != 0``: ``R = F R1 + (F - kappa) R3 + mu R4 + nu R7`` with
      ``F = tau/2 - 2 kappa`` when ``tau`` is given, the supplied ``F``, or the
      class value (``-kappa`` resp. ``-(kappa + 2)``);
    * dim 3, ``h = 0`` (``kappa = -alpha^2``): ``R = (tau/2 + 2b^2) R1 +
      (tau/2 + 3b^2) R3`` with ``b = 0`` resp. ``1``; needs ``tau``.
    """
    if cls not in (ALMOST_COSYMPLECTIC, ALMOST_KENMOTSU):
        raise UsageError(f"no closed form for class {cls!r}")
    if dim < 3 or dim % 2 == 0:
        raise UsageError("dimension must be odd and >= 3")
    a2 = 0.0 if cls == ALMOST_COSYMPLECTIC else 1.0
    f = dict.fromkeys(DIVIDED, 0.0)
    gap = kappa + a2
    if abs(gap) <= h_tol:
        if dim != 3:
            raise UsageError("the h = 0 closed form is only available in dimension 3")
        if tau is None:
            raise UsageError("the h = 0 closed form needs tau")
        f["R1"] = tau / 2 + 2 * a2
        f["R3"] = tau / 2 + 3 * a2
        return np.array([f[t] for t in DIVIDED])
    if gap > 0:
        bound = "0" if a2 == 0 else "-1"
        raise UsageError(f"kappa = {kappa} is outside the range kappa < {bound} for class {cls}")
    if dim == 3:
        if tau is not None:
            F = tau / 2 - 2 * kappa
        elif F is None:
            F = -kappa if a2 == 0 else -(kappa + 2)
        f.update(R1=F, R3=F - kappa, R4=mu, R7=nu)
    elif a2 == 0:
        f.update(R3=-kappa, R52=-1.0, R6=-mu, R8=-nu)
    else:
        f.update(R1=-1.0, R3=-(kappa + 1), R52=-1.0, R6=-mu, R7=1.0, R8=-(nu - 1))
    return np.array([f[t] for t in DIVIDED])


def to_basis(predicted_divided, tags):
    """Re-express a divided-basis coefficient vector in ``tags``.

    The undivided basis can only carry predictions with ``f51 = -f52``.
    """
    f = dict(zip(DIVIDED, np.asarray(predicted_divided, dtype=float)))
    if "R5" in tags:
        if abs(f["R51"] + f["R52"]) > 1e-12:
            raise UsageError("prediction has f51 != -f52 and no undivided writing")
        f["R5"] = f["R51"]
    return np.array([f.get(t, 0.0) for t in tags])


def compare_to_prediction(f: DecompositionFit, predicted):
    """Max componentwise gap between fitted and predicted coefficients.

    ``predicted`` is aligned with ``f.basis_tags``.  It is projected onto the
    fit's row space first, which is the identity when the design has full
    column rank.
    """
    predicted = np.asarray(predicted, dtype=float)
    if predicted.shape != (len(f.basis_tags),):
        raise UsageError("prediction and fit use different bases")
    proj = f.row_space.T @ (f.row_space @ predicted)
    return float(np.max(np.abs(f.coeffs - proj))), proj


def verify_dim3_identities(basis: BasisTensorSet, kappa, alpha):
    """Residuals of the dimension-3 relations among basis tensors."""
    if basis["R1"].shape[0] != 3:
        raise UsageError("the dimension-3 identities need dimension 3")
    R1, R2, R3, R4 = basis["R1"], basis["R2"], basis["R3"], basis["R4"]
    R51, R52, R6, R7, R8 = basis["R51"], basis["R52"], basis["R6"], basis["R7"], basis["R8"]
    m = lambda T: float(np.max(np.abs(T)))
    return {
        "R2=3(R1+R3)": m(R2 - 3 * (R1 + R3)),
        "R6=-R4": m(R6 + R4),
        "R8=-R7": m(R8 + R7),
        "R52=(kappa+alpha^2)(R1+R3)": m(R52 - (kappa + alpha**2) * (R1 + R3)),
        "R51=R52": m(R51 - R52),
    }


@dataclass
class InfeasibilityReport:
    undivided_residual: float
    divided_residual: float
    obstruction: bool
    undivided: DecompositionFit = field(repr=False, default=None)
    in_claimed_range: bool = False


def infeasibility_check(fit_points, kappa=None, alpha=None) -> InfeasibilityReport:
    """Fit with the undivided basis; an obstruction is a relative residual > 1e-3.

    ``in_claimed_range`` records whether the non-existence statement applies
    (dimension >= 5 and ``kappa < -alpha^2``); the fit itself runs in any
    dimension so the dimension-3 counterpart can be exercised.
    """
    und = fit(fit_points, UNDIVIDED)
    div = fit(fit_points, DIVIDED)
    d = fit_points[0].sample.dim
    claimed = d >= 5 and kappa is not None and alpha is not None and kappa < -(alpha**2) - 1e-6
    return InfeasibilityReport(und.residual, div.residual, und.residual > OBSTRUCTION_TOL, und, claimed)


@dataclass
class KmnFromFit:
    kappa: float
    mu: float
    nu: float
    mismatch: float = float("nan")
    degenerate: bool = False

    @property
    def triple(self):
        return (self.kappa, self.mu, self.nu)


def consistency_kmn_from_fit(f: DecompositionFit, estimate=None, tol=KMN_MISMATCH_TOL):
    """``(f1 - f3, f4 - f6, f7 - f8)``; compared against ``estimate`` when given.

    A trivial fit carries no information and returns ``None``.
    """
    if f.trivial:
        return None
    if f.residual > FIT_TOL:
        raise UsageError(f"fit residual {f.residual:.3e} too large to read off (kappa, mu, nu)")
    if "R5" in f.basis_tags and ("R51" in f.basis_tags or "R52" in f.basis_tags):
        raise UsageError("mixed divided/undivided basis")
    c = f.coeff
    out = KmnFromFit(c("R1") - c("R3"), c("R4") - c("R6"), c("R7") - c("R8"))
    if estimate is not None:
        mismatch = float(np.max(np.abs(np.array(out.triple) - np.array(estimate.triple))))
        out.mismatch = mismatch
        out.degenerate = bool(getattr(estimate, "degenerate", False))
        if mismatch > tol and not out.degenerate:
            raise InconsistencyError(f"(kappa, mu, nu) from the fit differs from extraction by {mismatch:.3e}")
    return out
