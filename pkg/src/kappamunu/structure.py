"""Almost contact metric structures: representation, validation, classification."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ClassificationError, StructureError, UsageError
from .geometry_core import Backend, FieldDescriptor, Frame, check_metric, exterior_d, wedge_1_2

ALMOST_COSYMPLECTIC = "almost_cosymplectic"
ALMOST_KENMOTSU = "almost_kenmotsu"
ALMOST_ALPHA_COSYMPLECTIC = "almost_alpha_cosymplectic"
CONTACT_METRIC = "contact_metric"
UNCLASSIFIED = "unclassified"

ALPHA_FAMILY = (ALMOST_COSYMPLECTIC, ALMOST_KENMOTSU, ALMOST_ALPHA_COSYMPLECTIC)

AXIOM_TOL = 1e-8
ALPHA_SPREAD_TOL = 1e-6


@dataclass(frozen=True)
class AlmostContactStructure:
    backend: Backend
    phi: FieldDescriptor
    xi: FieldDescriptor
    eta: FieldDescriptor
    name: str = ""

    @property
    def dim(self):
        return self.backend.dim

    @property
    def n(self):
        return (self.dim - 1) // 2

    def metric(self, p):
        return self.backend.metric(p)


@dataclass
class ValidationReport:
    residuals: dict
    tol: float

    @property
    def passed(self):
        return all(v <= self.tol for v in self.residuals.values())


def validate(structure: AlmostContactStructure, sample_points, tol=AXIOM_TOL) -> ValidationReport:
    """Max residual of each structure axiom over the sample points."""
    if len(sample_points) < 1:
        raise UsageError("validate needs at least one sample point")
    keys = ("eta_xi", "phi_squared", "compatibility", "phi_xi", "eta_phi", "eta_dual")
    res = dict.fromkeys(keys, 0.0)
    d = structure.dim
    for p in sample_points:
        G = check_metric(structure.metric(p))
        phi, xi, eta = structure.phi(p), structure.xi(p), structure.eta(p)
        vals = {
            "eta_xi": abs(eta @ xi - 1.0),
            "phi_squared": np.max(np.abs(phi @ phi + np.eye(d) - np.outer(xi, eta))),
            "compatibility": np.max(np.abs(phi.T @ G @ phi - G + np.outer(eta, eta))),
            "phi_xi": np.max(np.abs(phi @ xi)),
            "eta_phi": np.max(np.abs(eta @ phi)),
            "eta_dual": np.max(np.abs(G @ xi - eta)),
        }
        for k, v in vals.items():
            res[k] = max(res[k], float(v))
    return ValidationReport(res, tol)


def adapted_frame(structure: AlmostContactStructure, p, rotation=None) -> Frame:
    """Orthonormal phi-basis ``(xi, E_1..E_n, phi E_1..phi E_n)`` at ``p``.

    ``rotation`` (an orthogonal ``2n x 2n`` matrix) re-frames the vectors
    orthogonal to ``xi`` while keeping ``xi`` first.
    """
    G = check_metric(structure.metric(p))
    phi, xi = structure.phi(p), structure.xi(p)
    d = structure.dim
    vecs = [xi / np.sqrt(xi @ G @ xi)]
    chosen = []
    for _ in range(structure.n):
        best, best_norm = None, -1.0
        for a in range(d):
            v = np.zeros(d)
            v[a] = 1.0
            for _pass in range(2):
                for u in vecs:
                    v = v - (u @ G @ v) * u
            nrm = v @ G @ v
            if nrm > best_norm:
                best, best_norm = v, nrm
        if best_norm <= 1e-20:
            raise StructureError("cannot build a phi-basis: structure is degenerate")
        E = best / np.sqrt(best_norm)
        F = phi @ E
        F = F / np.sqrt(F @ G @ F)
        chosen.append((E, F))
        vecs.extend([E, F])
    cols = [vecs[0]] + [E for E, _ in chosen] + [F for _, F in chosen]
    V = np.column_stack(cols)
    if rotation is not None:
        Q = np.asarray(rotation, dtype=float)
        if Q.shape != (d - 1, d - 1):
            raise UsageError("rotation must act on the 2n vectors orthogonal to xi")
        V = np.column_stack([V[:, 0], V[:, 1:] @ Q])
    return Frame.from_vectors(V, G)


def fundamental_form(structure: AlmostContactStructure, p):
    """``Phi(e_a, e_b) = g(e_a, phi e_b)`` on the backend basis."""
    return structure.metric(p) @ structure.phi(p)


def fundamental_form_field(structure: AlmostContactStructure):
    return FieldDescriptor("2-form", lambda q: fundamental_form(structure, q), "Phi")


@dataclass
class StructureClass:
    tag: str
    alpha: float = float("nan")
    residuals: dict = field(default_factory=dict)
    normalization: str = ""
    alpha_fit: list = field(default_factory=list)

    @property
    def in_alpha_family(self):
        return self.tag in ALPHA_FAMILY


def _on_frame2(T, V):
    return V.T @ T @ V


def _on_frame3(T, V):
    return np.einsum("abc,ai,bj,ck->ijk", T, V, V, V)


def classify(
    structure: AlmostContactStructure,
    sample_points,
    rng=None,
    rotation=None,
    tol=None,
    n_random=10,
) -> StructureClass:
    """Tag the structure as almost alpha-cosymplectic (alpha fitted), contact
    metric, or unclassified.

    ``alpha`` is fitted per point by 1-D least squares on
    ``dPhi = 2 alpha eta ^ Phi`` over all frame triples containing ``xi`` and
    ``n_random`` random triples; the per-point values must agree.
    """
    backend = structure.backend
    tol = backend.tol if tol is None else tol
    rng = np.random.default_rng(42) if rng is None else rng
    d = structure.dim
    eta_field = structure.eta
    Phi_field = fundamental_form_field(structure)

    deta_res, frames, deta_frames, Phi_frames = 0.0, [], [], []
    for p in sample_points:
        V = adapted_frame(structure, p, rotation).vectors
        deta = _on_frame2(exterior_d(backend, eta_field, p), V)
        frames.append((p, V))
        deta_frames.append(deta)
        Phi_frames.append(_on_frame2(fundamental_form(structure, p), V))
        deta_res = max(deta_res, float(np.max(np.abs(deta))))

    residuals = {"d_eta": deta_res}
    if deta_res <= tol:
        alphas, fit_res = [], 0.0
        for p, V in frames:
            dPhi = _on_frame3(exterior_d(backend, Phi_field, p), V)
            wedge = 2.0 * wedge_1_2(np.eye(d)[0], _on_frame2(fundamental_form(structure, p), V))
            idx = [(0, i, j) for i in range(1, d) for j in range(i + 1, d)]
            a = [dPhi[t] for t in idx]
            b = [wedge[t] for t in idx]
            for _ in range(n_random):
                R = rng.standard_normal((d, 3))
                a.append(np.einsum("ijk,i,j,k->", dPhi, R[:, 0], R[:, 1], R[:, 2]))
                b.append(np.einsum("ijk,i,j,k->", wedge, R[:, 0], R[:, 1], R[:, 2]))
            a, b = np.array(a), np.array(b)
            alpha = float(a @ b / (b @ b))
            alphas.append(alpha)
            # also the full tensor, so the random sample cannot hide a defect
            fit_res = max(fit_res, float(np.max(np.abs(a - alpha * b))), float(np.max(np.abs(dPhi - alpha * wedge))))
        residuals["dPhi_fit"] = fit_res
        spread = float(max(alphas) - min(alphas))
        residuals["alpha_spread"] = spread
        if fit_res > tol:
            return StructureClass(UNCLASSIFIED, residuals=residuals, alpha_fit=alphas)
        if spread > ALPHA_SPREAD_TOL:
            raise ClassificationError(f"alpha varies across sample points (spread {spread:.3e})", spread)
        alpha = float(np.mean(alphas))
        if abs(alpha) <= ALPHA_SPREAD_TOL:
            return StructureClass(ALMOST_COSYMPLECTIC, 0.0, residuals, alpha_fit=alphas)
        if abs(alpha - 1.0) <= ALPHA_SPREAD_TOL:
            return StructureClass(ALMOST_KENMOTSU, 1.0, residuals, alpha_fit=alphas)
        return StructureClass(ALMOST_ALPHA_COSYMPLECTIC, alpha, residuals, alpha_fit=alphas)

    unit = max(float(np.max(np.abs(de - Ph))) for de, Ph in zip(deta_frames, Phi_frames))
    half = max(float(np.max(np.abs(0.5 * de - Ph))) for de, Ph in zip(deta_frames, Phi_frames))
    residuals["contact_unit"] = unit
    residuals["contact_half"] = half
    if unit <= tol:
        return StructureClass(CONTACT_METRIC, residuals=residuals, normalization="unit")
    if half <= tol:
        return StructureClass(CONTACT_METRIC, residuals=residuals, normalization="half")
    return StructureClass(UNCLASSIFIED, residuals=residuals)
