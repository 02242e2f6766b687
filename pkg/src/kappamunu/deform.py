"""D-homothetic deformations of almost cosymplectic structures.

``phi' = phi``, ``xi' = xi / beta``, ``eta' = beta eta``,
``g' = alpha_d g + (beta^2 - alpha_d) eta (x) eta``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import sympy

from .curvature import covariant_derivative
from .errors import ParameterError, UsageError
from .geometry_core import ChartBackend, FieldDescriptor, LieAlgebraSpec, LieBackend, check_metric, constant_field
from .kmn import compute_h, estimate_at, h_backend
from .structure import ALMOST_COSYMPLECTIC, AlmostContactStructure, classify, validate

BETA_MIN = 1e-8
LAW_TOL = 1e-5


@dataclass(frozen=True)
class DeformationParams:
    """``beta`` is a number or a callable of the point; ``beta_grad`` its coordinate gradient."""

    alpha_d: float = 1.0
    beta: object = 1.0
    beta_grad: Optional[Callable] = None
    expr: str = ""

    def __post_init__(self):
        a = float(self.alpha_d)
        if not np.isfinite(a) or a <= 0:
            raise ParameterError(f"alpha_d must be positive, got {self.alpha_d}")
        object.__setattr__(self, "alpha_d", a)
        if not callable(self.beta):
            b = float(self.beta)
            if not np.isfinite(b) or abs(b) < BETA_MIN:
                raise ParameterError(f"beta must be finite and nonzero, got {self.beta}")
            object.__setattr__(self, "beta", b)

    @property
    def constant(self):
        return not callable(self.beta)

    def beta_at(self, p):
        b = float(self.beta(p)) if callable(self.beta) else self.beta
        if not np.isfinite(b) or abs(b) < BETA_MIN:
            raise ParameterError(f"beta vanishes or is not finite at {np.asarray(p).tolist()}")
        return b

    def gradient(self, backend, p):
        """Coordinate gradient of beta (zeros for a constant)."""
        if self.constant:
            return np.zeros(backend.dim)
        if self.beta_grad is not None:
            return np.asarray(self.beta_grad(p), dtype=float)
        return np.array([backend.derivative(lambda q: np.array(self.beta_at(q)), e(p), p) for e in backend.basis()])

    def xi_beta(self, structure: AlmostContactStructure, p):
        return float(self.gradient(structure.backend, p) @ structure.xi(p))

    @classmethod
    def from_expr(cls, expr, alpha_d=1.0, dim=None):
        """Parse ``beta`` with sympy; ``t`` (or ``x0``) is the first coordinate."""
        try:
            e = sympy.sympify(expr, locals={"e": sympy.E})
        except (sympy.SympifyError, SyntaxError, TypeError) as exc:
            raise ParameterError(f"cannot parse beta expression {expr!r}: {exc}") from None
        t = sympy.Symbol("t")
        xs = sympy.symbols(f"x0:{dim}") if dim else ()
        allowed = {t, *xs}
        extra = e.free_symbols - allowed
        if extra:
            raise ParameterError(f"beta may only depend on t (the xi coordinate); got {sorted(map(str, extra))}")
        if not e.free_symbols:
            return cls(alpha_d, float(e), expr=str(expr))
        if dim is None:
            raise UsageError("a non-constant beta needs the chart dimension")
        e = e.subs(t, xs[0])
        f = sympy.lambdify([xs], e, "numpy")
        grads = [sympy.lambdify([xs], sympy.diff(e, x), "numpy") for x in xs]
        return cls(
            alpha_d,
            lambda p: float(f(np.asarray(p, dtype=float))),
            lambda p: np.array([float(g(np.asarray(p, dtype=float))) for g in grads]),
            str(expr),
        )


def _deformed_fields(structure, params):
    xi, eta = structure.xi, structure.eta
    return (
        structure.phi,
        FieldDescriptor("vector", lambda q: xi(q) / params.beta_at(q), "xi'"),
        FieldDescriptor("1-form", lambda q: params.beta_at(q) * eta(q), "eta'"),
    )


def apply(structure: AlmostContactStructure, params: DeformationParams, check_class=True, points=None):
    """Deformed structure on a new backend carrying ``g'``.

    The original must be almost cosymplectic; this is checked by
    classification at ``points`` (default: the base point) unless
    ``check_class`` is false.
    """
    backend = structure.backend
    pts = [backend.base_point()] if points is None else points
    for p in pts:
        params.beta_at(p)
    if check_class:
        cls = classify(structure, pts)
        if cls.tag != ALMOST_COSYMPLECTIC:
            raise UsageError(f"deformation laws are stated for almost cosymplectic structures, got {cls.tag}")
    a = params.alpha_d
    name = f"{structure.name}~({a:g},{params.expr or params.beta})"
    if backend.kind == "lie":
        if not params.constant:
            raise UsageError("a non-constant beta needs a chart backend (no xi coordinate on a Lie model)")
        p0 = backend.base_point()
        G, eta = backend.metric(p0), structure.eta(p0)
        b = params.beta
        Gbar = a * G + (b * b - a) * np.outer(eta, eta)
        new_backend = LieBackend(LieAlgebraSpec(backend.algebra.structure_constants, Gbar), tol=backend.tol, name=name)
        phi, xi, eta_f = structure.phi, structure.xi, structure.eta
        return AlmostContactStructure(
            new_backend,
            phi,
            constant_field("vector", xi(p0) / b, "xi'"),
            constant_field("1-form", b * eta_f(p0), "eta'"),
            name,
        )
    if backend.kind != "chart":
        raise UsageError(f"unsupported backend {backend.kind}")

    def metric(x):
        b = params.beta_at(x)
        eta = structure.eta(x)
        return a * backend.metric(x) + (b * b - a) * np.outer(eta, eta)

    def metric_derivative(x):
        b = params.beta_at(x)
        eta = structure.eta(x)
        db = params.gradient(backend, x)
        deta = np.stack([backend.derivative(structure.eta, e(x), x) for e in backend.basis()])
        return (
            a * backend.metric_derivative(x)
            + 2.0 * b * np.einsum("a,b,c->abc", db, eta, eta)
            + (b * b - a) * (np.einsum("ab,c->abc", deta, eta) + np.einsum("b,ac->abc", eta, deta))
        )

    new_backend = ChartBackend(
        backend.lower, backend.upper, metric, metric_derivative, backend.step, backend.step2, backend.tol, name
    )
    phi, xi, eta = _deformed_fields(structure, params)
    return AlmostContactStructure(new_backend, phi, xi, eta, name)


def predicted_kmn(kappa, mu, nu, beta, xi_beta):
    return (kappa / beta**2, mu / beta, (nu * beta - xi_beta) / beta**2)


@dataclass
class DeformationReport:
    residuals: dict
    tol: float
    predicted: list = field(default_factory=list)
    extracted: list = field(default_factory=list)
    original: list = field(default_factory=list)

    @property
    def checks(self):
        return {k: v <= self.tol for k, v in self.residuals.items()}

    @property
    def passed(self):
        return all(self.checks.values())


def verify_laws(structure, params: DeformationParams, sample_points, rng=None, n_pairs=10, tol=LAW_TOL, deformed=None):
    """Residuals of the h, connection and (kappa, mu, nu) transformation laws.

    ``axioms`` and ``class`` record that the deformed structure is again an
    almost cosymplectic structure.
    """
    rng = np.random.default_rng(42) if rng is None else rng
    bar = apply(structure, params, points=sample_points) if deformed is None else deformed
    backend, bbackend = structure.backend, bar.backend
    a = params.alpha_d
    d = structure.dim
    res = {"h_law": 0.0, "connection_law": 0.0, "kmn_law": 0.0}
    v = validate(bar, sample_points)
    res["axioms"] = max(v.residuals.values())
    cls = classify(bar, sample_points)
    res["class"] = 0.0 if cls.tag == ALMOST_COSYMPLECTIC else 1.0
    res["class_residual"] = max(cls.residuals.values())
    pred, ext, orig = [], [], []
    for p in sample_points:
        b = params.beta_at(p)
        xb = params.xi_beta(structure, p)
        # (a) h' = h / beta, compared in a g'-orthonormal frame
        hbar = compute_h(bar, p, alpha=0.0)
        diff = hbar.frame.endo_to_frame(h_backend(bar, p) - h_backend(structure, p) / b)
        res["h_law"] = max(res["h_law"], float(np.max(np.abs(diff))))
        # (b) connection law on random constant-component pairs
        G = check_metric(backend.metric(p))
        Gb = check_metric(bbackend.metric(p))
        phi, xi, eta = structure.phi(p), structure.xi(p), structure.eta(p)
        phih = phi @ h_backend(structure, p)
        for _ in range(n_pairs):
            x, y = rng.standard_normal(d), rng.standard_normal(d)
            X, Y = constant_field("vector", x), constant_field("vector", y)
            lhs = covariant_derivative(bbackend, X, Y, p)
            rhs = (
                covariant_derivative(backend, X, Y, p)
                - (b * b - a) / (b * b) * float((phih @ x) @ G @ y) * xi
                + xb / b * float(eta @ x) * float(eta @ y) * xi
            )
            r = lhs - rhs
            res["connection_law"] = max(res["connection_law"], float(np.sqrt(abs(r @ Gb @ r))))
        # (c) re-extraction vs predicted triple
        _, _, e0 = estimate_at(structure, p, 0.0)
        _, _, e1 = estimate_at(bar, p, 0.0)
        pt = predicted_kmn(*e0.triple, b, xb)
        gap = np.abs(np.array(e1.triple) - np.array(pt))
        if e1.degenerate:
            # h' = 0: mu' and nu' are not identifiable, compare kappa only
            gap = gap[:1]
        res["kmn_law"] = max(res["kmn_law"], float(np.max(gap)))
        pred.append(pt)
        ext.append(e1.triple)
        orig.append(e0.triple)
    return DeformationReport(res, tol, pred, ext, orig)
