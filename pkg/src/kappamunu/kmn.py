"""The operator h = L_xi phi / 2, its eigen-distributions, (kappa, mu, nu)
extraction and the identity suite for almost alpha-cosymplectic spaces.

All per-point work happens in the orthonormal phi-basis ``(xi, E, phi E)``
returned by :func:`structure.adapted_frame`, where ``xi = e_0`` and the
metric is the identity.  Derivative-bearing identities are evaluated in the
backend basis and compared through frame components.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product

import numpy as np

from .curvature import CurvatureSample, covariant_derivative, covariant_derivative_endo, curvature_sample
from .errors import ExtractionError, ModelInconsistencyError, NotKmnSpaceError, UsageError
from .geometry_core import FieldDescriptor, Frame, check_metric, constant_field, lie_derivative_endo
from .structure import AXIOM_TOL, AlmostContactStructure, adapted_frame

H_ZERO_TOL = 1e-8
NABLA_XI_TOL = 1e-6
CLUSTER_TOL = 1e-6
IDENTITY_TOL = 1e-5


def h_backend(structure: AlmostContactStructure, p):
    """Matrix of ``h = (1/2) L_xi phi`` in the backend basis."""
    return 0.5 * lie_derivative_endo(structure.backend, structure.phi, structure.xi, p)


def h_field(structure: AlmostContactStructure):
    return FieldDescriptor("(1,1)-tensor", lambda q: h_backend(structure, q), "h")


def phi_h_field(structure: AlmostContactStructure):
    return FieldDescriptor("(1,1)-tensor", lambda q: structure.phi(q) @ h_backend(structure, q), "phi h")


@dataclass
class HOperator:
    """``h`` at one point, in the orthonormal phi-basis ``frame``."""

    matrix: np.ndarray
    frame: Frame
    phi: np.ndarray
    point: np.ndarray
    alpha: float = float("nan")
    residuals: dict = field(default_factory=dict)

    @property
    def norm(self):
        return float(np.linalg.norm(self.matrix))

    @property
    def is_zero(self):
        return self.norm <= H_ZERO_TOL

    @property
    def phi_h(self):
        return self.phi @ self.matrix


def compute_h(structure: AlmostContactStructure, p, alpha=None, rotation=None, tol=AXIOM_TOL, nabla_tol=NABLA_XI_TOL):
    """Compute ``h`` and check ``h xi = 0``, ``h phi = -phi h``, ``tr h = 0``,
    symmetry, and (when ``alpha`` is given) ``nabla_X xi = -alpha phi^2 X - phi h X``.

    Raises :class:`ModelInconsistencyError` when a relation fails.
    """
    backend = structure.backend
    p = backend.check_point(p)
    frame = adapted_frame(structure, p, rotation)
    hb = h_backend(structure, p)
    phib = structure.phi(p)
    hf = frame.endo_to_frame(hb)
    phif = frame.endo_to_frame(phib)
    res = {
        "h_xi": float(np.max(np.abs(hf[:, 0]))),
        "anticommute": float(np.max(np.abs(hf @ phif + phif @ hf))),
        "trace": float(abs(np.trace(hf))),
        "symmetric": float(np.max(np.abs(hf - hf.T))),
    }
    bad = {k: v for k, v in res.items() if v > tol}
    if alpha is not None:
        dxi = 0.0
        V = frame.vectors
        G = check_metric(backend.metric(p))
        for a in range(structure.dim):
            X = constant_field("vector", V[:, a])
            lhs = covariant_derivative(backend, X, structure.xi, p)
            rhs = -alpha * phib @ phib @ V[:, a] - phib @ hb @ V[:, a]
            diff = lhs - rhs
            dxi = max(dxi, float(np.sqrt(abs(diff @ G @ diff))))
        res["nabla_xi"] = dxi
        if dxi > nabla_tol:
            bad["nabla_xi"] = dxi
    if bad:
        detail = ", ".join(f"{k}={v:.3e}" for k, v in bad.items())
        raise ModelInconsistencyError(f"h relations fail for the claimed class: {detail}")
    return HOperator(hf, frame, phif, p, float("nan") if alpha is None else float(alpha), res)


@dataclass
class EigenSplit:
    lam: float
    D_plus: np.ndarray  # columns: frame components of an orthonormal basis
    D_minus: np.ndarray
    kernel: np.ndarray
    spectrum: np.ndarray
    degenerate: bool = False


def eigen_split(A, n=None, tol=CLUSTER_TOL, sym_tol=AXIOM_TOL) -> EigenSplit:
    """Split a symmetric frame matrix into its ``0, +lam, -lam`` eigenspaces.

    Raises :class:`NotKmnSpaceError` unless the spectrum clusters at
    ``{-lam, 0, lam}`` with multiplicities ``{n, 1, n}``.
    """
    A = np.asarray(A, dtype=float)
    d = A.shape[0]
    n = (d - 1) // 2 if n is None else n
    if d != 2 * n + 1:
        raise UsageError("operator size must be 2n + 1")
    if np.max(np.abs(A - A.T)) > sym_tol:
        raise UsageError("eigen_split needs a symmetric operator")
    w, U = np.linalg.eigh(0.5 * (A + A.T))
    if np.max(np.abs(w)) <= tol:
        return EigenSplit(0.0, np.zeros((d, 0)), np.zeros((d, 0)), U, w, degenerate=True)
    low, mid, high = w[:n], w[n], w[n + 1:]
    lam = 0.5 * (np.mean(high) - np.mean(low))
    width = max(np.ptp(low), np.ptp(high), abs(mid), abs(np.mean(high) + np.mean(low)))
    if width > tol:
        raise NotKmnSpaceError(f"spectrum {np.round(w, 10).tolist()} does not cluster at (-lam, 0, lam)")
    return EigenSplit(float(lam), U[:, n + 1:], U[:, :n], U[:, n : n + 1], w)


@dataclass
class KmnEstimate:
    kappa: float
    mu: float
    nu: float
    residual: float
    lam: float
    D_plus: np.ndarray
    D_minus: np.ndarray
    degenerate: bool
    alpha: float
    point: np.ndarray
    split_operator: str = "h"

    @property
    def triple(self):
        return (self.kappa, self.mu, self.nu)


def kmn_design(h: HOperator):
    """Targets and design columns for ``R(E_i, E_j) xi`` over frame pairs ``i < j``."""
    d = h.matrix.shape[0]
    I = np.eye(d)
    hf, phf = h.matrix, h.phi_h
    cols, rows = [], []
    for i in range(d):
        for j in range(i + 1, d):
            ei, ej = I[:, i], I[:, j]
            eta_i, eta_j = ei[0], ej[0]
            rows.append((i, j))
            cols.append(
                np.column_stack(
                    [
                        eta_j * ei - eta_i * ej,
                        eta_j * hf @ ei - eta_i * hf @ ej,
                        eta_j * phf @ ei - eta_i * phf @ ej,
                    ]
                )
            )
    return rows, np.vstack(cols)


def extract_kmn(structure: AlmostContactStructure, h: HOperator, sample: CurvatureSample, split_operator="h"):
    """Least-squares ``(kappa, mu, nu)`` from ``R(X, Y) xi``.

    With ``h = 0`` only ``kappa`` is fitted and ``mu = nu = 0`` is reported
    with ``degenerate = True``.
    """
    if not np.allclose(h.frame.vectors, sample.frame.vectors, atol=1e-12):
        raise UsageError("h and the curvature sample must use the same frame")
    rows, A = kmn_design(h)
    b = np.concatenate([sample.riemann[i, j, 0, :] for i, j in rows])
    degenerate = h.is_zero
    if degenerate:
        A = A[:, :1]
    s = np.linalg.svd(A, compute_uv=False)
    if s.min() <= 1e-8 * s.max():
        raise ExtractionError("rank-deficient (kappa, mu, nu) design")
    coef, *_ = np.linalg.lstsq(A, b, rcond=None)
    residual = float(np.linalg.norm(A @ coef - b))
    kappa = float(coef[0])
    mu, nu = (0.0, 0.0) if degenerate else (float(coef[1]), float(coef[2]))
    op = h.matrix if split_operator == "h" else h.phi_h
    if split_operator not in ("h", "phi_h"):
        raise UsageError("split_operator must be 'h' or 'phi_h'")
    split = eigen_split(op, structure.n)
    return KmnEstimate(
        kappa, mu, nu, residual, split.lam, split.D_plus, split.D_minus, split.degenerate or degenerate,
        h.alpha, h.point, split_operator,
    )


def estimate_at(structure: AlmostContactStructure, p, alpha, rotation=None, split_operator="h", rng=None):
    """Convenience: ``(h, curvature sample, estimate)`` at ``p``."""
    h = compute_h(structure, p, alpha, rotation)
    sample = curvature_sample(structure, p, rng=rng, rotation=rotation)
    return h, sample, extract_kmn(structure, h, sample, split_operator)


def _triple_at(structure, q, alpha):
    h = compute_h(structure, q, None)
    sample = curvature_sample(structure, q, n_phi=0)
    est = extract_kmn(structure, h, sample)
    return np.array(est.triple)


@dataclass
class IdentityReport:
    residuals: dict
    tol: float
    skipped: dict = field(default_factory=dict)

    @property
    def checks(self):
        return {k: v <= self.tol for k, v in self.residuals.items()}

    @property
    def passed(self):
        return all(self.checks.values())


def _gnorm(v, G):
    return float(np.sqrt(abs(v @ G @ v)))


def _update(res, key, value):
    res[key] = max(res.get(key, 0.0), float(value))


def identity_suite(structure: AlmostContactStructure, alpha, sample_points, estimates=None, tol=IDENTITY_TOL):
    """Per-identity max residual over the sample points.

    Identities (``a = alpha``, frame vectors ``X, Y, Z``):

    * ``h_squared``: ``h^2 = (kappa + a^2) phi^2``;
    * ``xi_kappa``: ``xi(kappa) = 2 (kappa + a^2)(nu - 2a)``;
    * ``R_xi``: ``R(xi,X)Y`` in terms of ``kappa, mu, nu``;
    * ``nabla_phi_h``, ``nabla_phi``, ``nabla_h``: first covariant derivatives;
    * ``nabla_xi_phi_h``: ``nabla_xi (phi h) = mu h + nu phi h`` (``a = 0``);
    * ``horizontal_kmn``: ``X(kappa) = X(mu) = X(nu) = 0`` for ``X`` orthogonal to ``xi`` (dim >= 5);
    * ``mu_formula``: ``mu = -2 g(nabla_xi X, phi X)`` for unit eigenvectors of ``h``;
    * ``blocks``: curvature on the eigen-distributions (``a = 0, nu = 0`` via ``h``;
      ``a = 1`` via ``phi h``), with the horizontal commutation rules for ``a = 1``.

    On the chart backend ``kappa, mu, nu`` are re-extracted at displaced
    points for their derivatives; on a Lie backend they are constant.
    """
    backend = structure.backend
    d, n = structure.dim, structure.n
    res, skipped = {}, {}
    lie = backend.kind == "lie"
    for idx, p in enumerate(sample_points):
        p = backend.check_point(p)
        if estimates is not None:
            est = estimates[idx]
            h = compute_h(structure, p, alpha)
            sample = curvature_sample(structure, p, n_phi=0)
        else:
            h, sample, est = estimate_at(structure, p, alpha)
        kappa, mu, nu = est.triple
        a = float(alpha)
        K = kappa + a * a
        frame = h.frame
        V = frame.vectors
        G = check_metric(backend.metric(p))
        hf, phif, phf = h.matrix, h.phi, h.phi_h
        I = np.eye(d)
        xi_f = I[:, 0]

        _update(res, "h_squared", np.max(np.abs(hf @ hf - K * phif @ phif)))

        # xi(kappa) and horizontal derivatives of (kappa, mu, nu)
        if lie:
            dxi = np.zeros(3)
            dhor = 0.0
        else:
            s = backend.step2
            xi_b = structure.xi(p)
            dxi = (_triple_at(structure, p + s * xi_b, a) - _triple_at(structure, p - s * xi_b, a)) / (2 * s)
            dhor = 0.0
            if d >= 5:
                for j in range(1, d):
                    v = V[:, j]
                    dd = (_triple_at(structure, p + s * v, a) - _triple_at(structure, p - s * v, a)) / (2 * s)
                    dhor = max(dhor, float(np.max(np.abs(dd))))
        _update(res, "xi_kappa", abs(dxi[0] - 2 * K * (nu - 2 * a)))
        if d >= 5:
            _update(res, "horizontal_kmn", dhor)
        else:
            skipped["horizontal_kmn"] = "only claimed in dimension >= 5"

        # R(xi, X) Y
        Rf = sample.riemann
        for i, j in product(range(d), repeat=2):
            X, Y = I[:, i], I[:, j]
            lhs = Rf[0, i, j, :]
            rhs = (
                kappa * ((X @ Y) * xi_f - Y[0] * X)
                + mu * ((hf @ X @ Y) * xi_f - Y[0] * hf @ X)
                + nu * ((phf @ X @ Y) * xi_f - Y[0] * phf @ X)
            )
            _update(res, "R_xi", np.max(np.abs(lhs - rhs)))

        # covariant derivatives of phi, h, phi h along frame vectors (backend basis)
        phi_fld, h_fld, ph_fld = structure.phi, h_field(structure), phi_h_field(structure)
        step = backend.step2

        def nab(A, j, fd_step=None):
            X = constant_field("vector", V[:, j])
            return frame.endo_to_frame(covariant_derivative_endo(backend, A, X, p, step=fd_step))

        nphi = [nab(phi_fld, j) for j in range(d)]
        nh = [nab(h_fld, j, step) for j in range(d)]
        nph = [nab(ph_fld, j, step) for j in range(d)]
        aphi_h = a * phif + hf
        for i, j in product(range(d), repeat=2):
            X, Y = I[:, i], I[:, j]
            ex, ey = X[0], Y[0]
            lhs = nph[j] @ X - nph[i] @ Y
            rhs = K * (ey * X - ex * Y) + mu * (ey * hf @ X - ex * hf @ Y) + (nu - a) * (ey * phf @ X - ex * phf @ Y)
            _update(res, "nabla_phi_h", np.max(np.abs(lhs - rhs)))
            lhs = nphi[i] @ Y
            rhs = (aphi_h @ X @ Y) * xi_f - ey * aphi_h @ X
            _update(res, "nabla_phi", np.max(np.abs(lhs - rhs)))
            lhs = nh[j] @ X - nh[i] @ Y
            rhs = (
                K * (ex * phif @ Y - ey * phif @ X + 2 * (X @ phif @ Y) * xi_f)
                + mu * (ex * phf @ Y - ey * phf @ X)
                + (a - nu) * (ex * hf @ Y - ey * hf @ X)
            )
            _update(res, "nabla_h", np.max(np.abs(lhs - rhs)))
        if abs(a) <= 1e-12:
            _update(res, "nabla_xi_phi_h", np.max(np.abs(nph[0] - mu * hf - nu * phf)))
        else:
            skipped["nabla_xi_phi_h"] = "stated for alpha = 0 only"

        if h.is_zero:
            skipped["mu_formula"] = "h = 0"
            skipped["blocks"] = "h = 0"
            continue

        # mu = -2 g(nabla_xi X, phi X) on eigenvector fields of h
        split = eigen_split(hf, n)
        lam = split.lam
        for sign, D in ((1.0, split.D_plus), (-1.0, split.D_minus)):
            x0 = V @ D[:, 0]

            def Xfield(q, x0=x0, sign=sign):
                P = 0.5 * (np.eye(d) - np.outer(structure.xi(q), structure.eta(q)) + sign * h_backend(structure, q) / lam)
                v = P @ x0
                return v / _gnorm(v, backend.metric(q))

            Xf = FieldDescriptor("vector", Xfield, "X")
            nx = covariant_derivative(backend, structure.xi, Xf, p) if lie else _nabla_fd(backend, structure.xi, Xf, p)
            val = -2.0 * float(nx @ G @ (structure.phi(p) @ Xf(p)))
            _update(res, "mu_formula", abs(val - mu))

        _blocks(res, skipped, Rf, hf, phif, phf, split, kappa, mu, nu, a, n, nph, d)

    return IdentityReport(res, tol, skipped)


def _nabla_fd(backend, X, Y, p):
    # Y is built from h, itself a first difference: use the coarser step
    x = X(p)
    return backend.derivative(Y, x, p, step=backend.step2) + np.einsum(
        "a,b,abc->c", x, Y(p), backend.christoffel(p)
    )


def _blocks(res, skipped, Rf, hf, phif, phf, split, kappa, mu, nu, a, n, nph, d):
    R = lambda x, y, z: np.einsum("abcd,a,b,c->d", Rf, x, y, z)
    I = np.eye(d)
    hor = [I[:, i] for i in range(1, d)]
    if abs(a) <= 1e-12:
        if abs(nu) > 1e-8:
            skipped["blocks"] = "eigen-distribution blocks are stated for nu = 0"
            return
        P, M = split.D_plus.T, split.D_minus.T
        k = kappa
        for x, y, z in product(range(n), repeat=3):
            Xp, Yp, Zp, Xm, Ym, Zm = P[x], P[y], P[z], M[x], M[y], M[z]
            r = [
                R(Xp, Yp, Zm) - k * ((phif @ Yp @ Zm) * phif @ Xp - (phif @ Xp @ Zm) * phif @ Yp),
                R(Xm, Ym, Zp) - k * ((phif @ Ym @ Zp) * phif @ Xm - (phif @ Xm @ Zp) * phif @ Ym),
                R(Xp, Ym, Zm) + k * (Xp @ phif @ Zm) * phif @ Ym,
                R(Xp, Ym, Zp) + k * (Zp @ phif @ Ym) * phif @ Xp,
                R(Xp, Yp, Zp),
                R(Xm, Ym, Zm),
            ]
            _update(res, "blocks", max(float(np.max(np.abs(v))) for v in r))
        return
    if abs(a - 1.0) > 1e-12:
        skipped["blocks"] = "eigen-distribution blocks are stated for alpha in {0, 1}"
        return
    # alpha = 1: eigenvectors of phi h (same lambda as h)
    split = eigen_split(phf, n)
    P, M = split.D_plus.T, split.D_minus.T
    k, lam = kappa, split.lam
    for x, y, z in product(range(n), repeat=3):
        Xp, Yp, Zp, Xm, Ym, Zm = P[x], P[y], P[z], M[x], M[y], M[z]
        r = [
            R(Xp, Yp, Zm),
            R(Xm, Ym, Zp),
            R(Xp, Ym, Zm) + (k + 2) * (Ym @ Zm) * Xp,
            R(Xp, Ym, Zp) - (k + 2) * (Xp @ Zp) * Ym,
            R(Xp, Yp, Zp) - (k + 2 * lam) * ((Yp @ Zp) * Xp - (Xp @ Zp) * Yp),
            R(Xm, Ym, Zm) - (k - 2 * lam) * ((Ym @ Zm) * Xm - (Xm @ Zm) * Ym),
        ]
        _update(res, "blocks", max(float(np.max(np.abs(v))) for v in r))
    pp = phif @ phif
    for X, Y, Z in product(hor, repeat=3):
        lhs = R(X, Y, phif @ Z) - phif @ R(X, Y, Z)
        rhs = (
            ((-X + phf @ X) @ Z) * (phif @ Y + hf @ Y)
            - ((-Y + phf @ Y) @ Z) * (phif @ X + hf @ X)
            - ((phif @ Y + hf @ Y) @ Z) * (-X + phf @ X)
            + ((phif @ X + hf @ X) @ Z) * (-Y + phf @ Y)
        )
        _update(res, "R_phi_commutator", np.max(np.abs(lhs - rhs)))
        lhs = R(X, Y, phf @ Z) - phf @ R(X, Y, Z)
        rhs = (k + 2) * ((Y @ Z) * phf @ X - (X @ Z) * phf @ Y + (phf @ X @ Z) * Y - (phf @ Y @ Z) * X)
        _update(res, "R_phi_h_commutator", np.max(np.abs(lhs - rhs)))
    xi_f = I[:, 0]
    for i, j in product(range(d), repeat=2):
        X, Y = I[:, i], I[:, j]
        w = (k + 1) * pp @ X - phf @ X
        rhs = (w @ Y) * xi_f + Y[0] * w + X[0] * (mu * hf @ Y + (nu - 2) * phf @ Y)
        _update(res, "nabla_phi_h_lemma", np.max(np.abs(nph[i] @ Y - rhs)))
