"""Points, frames, fields, brackets and exterior derivatives on two backends.

Every backend exposes the same small interface in terms of a *backend basis*
``e_0, ..., e_{d-1}`` of vector fields:

* on a :class:`ChartBackend` the basis is the coordinate basis ``d/dx^a``
  (pairwise brackets vanish) and directional derivatives are taken by central
  differences;
* on a :class:`LieBackend` the basis is a left-invariant frame of a Lie group
  with structure constants ``c[i, j, k]`` and all data is left-invariant, so
  every function built from it is constant and all directional derivatives
  vanish.

Vector fields, forms and endomorphism fields are plain callables mapping a
point (a coordinate array) to components in the backend basis.  With this
convention one formula serves both backends, e.g.
``[X, Y] = D_X Y - D_Y X + c(X, Y)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import DegenerateFrameError, DomainError, NumericError, StructureError, UsageError

FieldFn = Callable[[np.ndarray], np.ndarray]

DEFAULT_STEP = 1e-5
DEFAULT_STEP2 = 1e-4

FIELD_KINDS = ("scalar", "vector", "1-form", "2-form", "(1,1)-tensor")


@dataclass(frozen=True)
class FieldDescriptor:
    """A named tensor field; calling it evaluates the components at ``p``."""

    kind: str
    evaluator: Callable
    name: str = ""

    def __post_init__(self):
        if self.kind not in FIELD_KINDS:
            raise UsageError(f"unknown field kind {self.kind!r}")

    def __call__(self, p):
        value = np.asarray(self.evaluator(p), dtype=float)
        if not np.all(np.isfinite(value)):
            raise NumericError(f"field {self.name or self.kind}", f"at {np.asarray(p).tolist()}")
        return value


def constant_field(kind, value, name=""):
    arr = np.array(value, dtype=float)
    arr.setflags(write=False)
    return FieldDescriptor(kind, lambda p: arr, name)


def basis_field(dim, a):
    """The a-th backend basis vector field (constant components)."""
    v = np.zeros(dim)
    v[a] = 1.0
    return constant_field("vector", v, f"e{a}")


@dataclass(frozen=True)
class Frame:
    """Ordered tangent vectors at a point, stored as the columns of ``vectors``."""

    vectors: np.ndarray
    metric_gram: np.ndarray

    @classmethod
    def from_vectors(cls, vectors, G):
        V = np.asarray(vectors, dtype=float)
        return cls(V, V.T @ G @ V)

    @property
    def size(self):
        return self.vectors.shape[1]

    def is_orthonormal(self, tol=1e-10):
        return float(np.max(np.abs(self.metric_gram - np.eye(self.size)))) <= tol

    def components(self, v):
        """Frame components of a backend-basis vector (frame must span)."""
        return np.linalg.solve(self.vectors, v)

    def endo_to_frame(self, A):
        """Matrix of a backend-basis endomorphism in this frame."""
        return np.linalg.solve(self.vectors, A @ self.vectors)


def orthonormalize(frame: Frame, G=None, tol=1e-10) -> Frame:
    """Gram-Schmidt against the metric; the span of every prefix is preserved.

    ``G`` is the metric Gram matrix of the backend basis; when omitted, the
    frame vectors are assumed to be expressed in a basis where it is the
    identity.
    """
    V = np.asarray(frame.vectors, dtype=float)
    if G is None:
        G = np.eye(V.shape[0])
    if np.linalg.svd(V, compute_uv=False).min() <= tol:
        raise DegenerateFrameError("frame vectors are linearly dependent")
    out = []
    for k in range(V.shape[1]):
        v = V[:, k].copy()
        # Two passes keep the Gram deviation at roundoff level.
        for _ in range(2):
            for u in out:
                v -= (u @ G @ v) * u
        norm2 = v @ G @ v
        if norm2 <= tol**2:
            raise DegenerateFrameError(f"vector {k} lies in the span of the previous ones")
        out.append(v / np.sqrt(norm2))
    W = np.column_stack(out)
    return Frame(W, W.T @ G @ W)


def check_metric(G, where="metric"):
    G = np.asarray(G, dtype=float)
    if not np.all(np.isfinite(G)):
        raise NumericError(where)
    if np.max(np.abs(G - G.T)) > 1e-10 * max(1.0, np.max(np.abs(G))):
        raise StructureError(f"{where} is not symmetric")
    try:
        np.linalg.cholesky(G)
    except np.linalg.LinAlgError:
        raise StructureError(f"{where} is not positive definite") from None
    return G


def jacobi_residual(c):
    """Max component of the cyclic sum [[e_i,e_j],e_k] + ... for constants c."""
    jac = (
        np.einsum("ijm,mkl->ijkl", c, c)
        + np.einsum("jkm,mil->ijkl", c, c)
        + np.einsum("kim,mjl->ijkl", c, c)
    )
    return float(np.max(np.abs(jac))) if jac.size else 0.0


@dataclass(frozen=True)
class LieAlgebraSpec:
    """Structure constants ``[e_i, e_j] = sum_k c[i, j, k] e_k`` plus a Gram matrix."""

    structure_constants: np.ndarray
    metric: Optional[np.ndarray] = None
    tol: float = 1e-10

    def __post_init__(self):
        c = np.asarray(self.structure_constants, dtype=float)
        if c.ndim != 3 or len(set(c.shape)) != 1:
            raise StructureError("structure constants must be a d x d x d array")
        d = c.shape[0]
        if d < 3 or d % 2 == 0:
            raise StructureError(f"dimension must be odd and >= 3, got {d}")
        if np.max(np.abs(c + c.transpose(1, 0, 2))) > self.tol:
            raise StructureError("structure constants are not antisymmetric in (i, j)")
        if jacobi_residual(c) > self.tol:
            raise StructureError(f"Jacobi identity fails (residual {jacobi_residual(c):.3e})")
        G = np.eye(d) if self.metric is None else check_metric(self.metric, "Lie algebra metric")
        object.__setattr__(self, "structure_constants", c)
        object.__setattr__(self, "metric", np.asarray(G, dtype=float))

    @property
    def dim(self):
        return self.structure_constants.shape[0]


class Backend:
    """Common machinery; subclasses supply metric data and derivatives."""

    kind = "abstract"

    def __init__(self, dim, step=DEFAULT_STEP, step2=DEFAULT_STEP2, tol=1e-8):
        if dim < 3 or dim % 2 == 0:
            raise StructureError(f"dimension must be odd and >= 3, got {dim}")
        self.dim = dim
        self.step = step
        self.step2 = step2
        self.tol = tol

    # -- interface -------------------------------------------------------
    def base_point(self):
        raise NotImplementedError

    def check_point(self, p):
        raise NotImplementedError

    def metric(self, p):
        raise NotImplementedError

    def metric_derivative(self, p):
        """``dG[a, b, c] = e_a(g(e_b, e_c))``."""
        raise NotImplementedError

    def frame_brackets(self, p):
        """``c[a, b, k]`` with ``[e_a, e_b] = sum_k c[a, b, k] e_k``."""
        raise NotImplementedError

    def derivative(self, f, v, p, step=None):
        """Directional derivative ``v(f)`` at ``p`` of an array-valued function."""
        raise NotImplementedError

    @property
    def exact_metric_derivatives(self):
        return True

    # -- derived ---------------------------------------------------------
    def basis(self):
        return [basis_field(self.dim, a) for a in range(self.dim)]

    def christoffel(self, p):
        """``Gamma[a, b, c]``: component ``c`` of the Levi-Civita ``nabla_{e_a} e_b``.

        Koszul formula in the backend basis, valid for non-holonomic frames and
        non-constant metrics alike.
        """
        G = check_metric(self.metric(p))
        dG = self.metric_derivative(p)
        C = np.einsum("abk,kc->abc", self.frame_brackets(p), G)
        K = 0.5 * (
            dG
            + dG.transpose(1, 0, 2)
            - dG.transpose(1, 2, 0)
            + C
            - C.transpose(2, 0, 1)
            + C.transpose(1, 2, 0)
        )
        # K[a, b, c] = g(nabla_a e_b, e_c)
        return np.einsum("abc,cd->abd", K, np.linalg.inv(G))

    def riemann(self, p):
        """``R[a, b, c, d]``: component ``d`` of ``R(e_a, e_b) e_c``.

        Sign convention ``R(X,Y)Z = nabla_X nabla_Y Z - nabla_Y nabla_X Z - nabla_[X,Y] Z``.
        """
        Gam = self.christoffel(p)
        step = self.step if self.exact_metric_derivatives else self.step2
        dGam = np.stack(
            [self.derivative(self.christoffel, e(p), p, step=step) for e in self.basis()]
        )
        c = self.frame_brackets(p)
        R = (
            dGam.transpose(0, 1, 2, 3)
            - dGam.transpose(1, 0, 2, 3)
            + np.einsum("bcm,amd->abcd", Gam, Gam)
            - np.einsum("acm,bmd->abcd", Gam, Gam)
            - np.einsum("abm,mcd->abcd", c, Gam)
        )
        if not np.all(np.isfinite(R)):
            raise NumericError("riemann")
        return R


def _evaluate(fn, p, what):
    """Call a user metric function; overflow and singular solves become NumericError."""
    try:
        with np.errstate(over="ignore", invalid="ignore"):
            return np.asarray(fn(p), dtype=float)
    except (np.linalg.LinAlgError, FloatingPointError, OverflowError, ValueError) as exc:
        raise NumericError(what, f"at {p.tolist()}: {exc}") from None


class ChartBackend(Backend):
    """A single coordinate chart over an explicit box ``lower <= x <= upper``.

    ``metric_fn(x)`` returns the Gram matrix of the coordinate basis;
    ``metric_derivative_fn(x)``, when given, returns ``dG[a, b, c] = d_a g_bc``
    analytically (otherwise central differences are used).
    """

    kind = "chart"

    def __init__(
        self,
        lower,
        upper,
        metric_fn,
        metric_derivative_fn=None,
        step=DEFAULT_STEP,
        step2=DEFAULT_STEP2,
        tol=1e-6,
        name="chart",
    ):
        lower = np.asarray(lower, dtype=float)
        upper = np.asarray(upper, dtype=float)
        if lower.shape != upper.shape or lower.ndim != 1 or np.any(lower >= upper):
            raise UsageError("chart box must satisfy lower < upper componentwise")
        super().__init__(lower.size, step, step2, tol)
        self.lower = lower
        self.upper = upper
        self.metric_fn = metric_fn
        self.metric_derivative_fn = metric_derivative_fn
        self.name = name

    @property
    def exact_metric_derivatives(self):
        return self.metric_derivative_fn is not None

    def base_point(self):
        return 0.5 * (self.lower + self.upper)

    def check_point(self, p):
        p = np.asarray(p, dtype=float)
        if p.shape != (self.dim,):
            raise UsageError(f"point must have {self.dim} coordinates")
        if not np.all(np.isfinite(p)):
            raise NumericError("point", str(p.tolist()))
        if np.any(p < self.lower) or np.any(p > self.upper):
            raise DomainError(f"point {p.tolist()} is outside the chart box")
        return p

    def metric(self, p):
        p = self.check_point(p)
        G = _evaluate(self.metric_fn, p, "metric")
        if not np.all(np.isfinite(G)):
            raise NumericError("metric", f"at {p.tolist()}")
        return G

    def metric_derivative(self, p):
        p = self.check_point(p)
        if self.metric_derivative_fn is not None:
            dG = _evaluate(self.metric_derivative_fn, p, "metric derivative")
            if not np.all(np.isfinite(dG)):
                raise NumericError("metric derivative", f"at {p.tolist()}")
            return dG
        return np.stack([self.derivative(self.metric, e(p), p) for e in self.basis()])

    def frame_brackets(self, p):
        return np.zeros((self.dim,) * 3)

    def derivative(self, f, v, p, step=None):
        p = self.check_point(p)
        v = np.asarray(v, dtype=float)
        norm = np.linalg.norm(v)
        if norm == 0.0:
            return np.zeros_like(np.asarray(f(p), dtype=float))
        s = (self.step if step is None else step) / norm
        fp = np.asarray(f(self.check_point(p + s * v)), dtype=float)
        fm = np.asarray(f(self.check_point(p - s * v)), dtype=float)
        out = (fp - fm) / (2.0 * s)
        if not np.all(np.isfinite(out)):
            raise NumericError("directional derivative", f"at {p.tolist()}")
        return out

    def sample_points(self, n, rng, margin=0.1):
        """Uniform points in the box shrunk by ``margin`` of its width."""
        width = self.upper - self.lower
        lo = self.lower + margin * width
        hi = self.upper - margin * width
        return [lo + rng.random(self.dim) * (hi - lo) for _ in range(n)]


class LieBackend(Backend):
    """Left-invariant geometry on a Lie group; only the identity is sampled."""

    kind = "lie"

    def __init__(self, algebra: LieAlgebraSpec, tol=1e-8, name="lie"):
        super().__init__(algebra.dim, tol=tol)
        self.algebra = algebra
        self.name = name

    def base_point(self):
        return np.zeros(self.dim)

    def check_point(self, p):
        p = np.asarray(p, dtype=float)
        if p.shape != (self.dim,):
            raise UsageError(f"point must have {self.dim} components")
        return p

    def metric(self, p):
        return self.algebra.metric

    def metric_derivative(self, p):
        return np.zeros((self.dim,) * 3)

    def frame_brackets(self, p):
        return self.algebra.structure_constants

    def derivative(self, f, v, p, step=None):
        # Functions of left-invariant data are constant.
        return np.zeros_like(np.asarray(f(self.check_point(p)), dtype=float))

    def sample_points(self, n, rng, margin=0.1):
        return [self.base_point()]


# ---------------------------------------------------------------------------
# operations


def lie_bracket(backend: Backend, X: FieldFn, Y: FieldFn, p):
    """``[X, Y]_p`` in backend-basis components."""
    p = backend.check_point(p)
    x, y = X(p), Y(p)
    out = (
        backend.derivative(Y, x, p)
        - backend.derivative(X, y, p)
        + np.einsum("i,j,ijk->k", x, y, backend.frame_brackets(p))
    )
    if not np.all(np.isfinite(out)):
        raise NumericError("lie_bracket")
    return out


def apply_endo(A: FieldFn, X: FieldFn) -> FieldFn:
    return lambda q: A(q) @ X(q)


def lie_derivative_endo(backend: Backend, A: FieldFn, Z: FieldFn, p):
    """Matrix of ``X -> [Z, AX] - A[Z, X]`` on the backend basis at ``p``."""
    p = backend.check_point(p)
    Ap = A(p)
    cols = []
    for e in backend.basis():
        cols.append(lie_bracket(backend, Z, apply_endo(A, e), p) - Ap @ lie_bracket(backend, Z, e, p))
    return np.column_stack(cols)


def exterior_d(backend: Backend, omega: FieldFn, p, step=None):
    """Exterior derivative of a 1-form or 2-form, no 1/2 normalisation.

    Returns the components on the backend basis: a ``d x d`` array for a
    1-form input and a ``d x d x d`` array for a 2-form input.
    """
    p = backend.check_point(p)
    w = omega(p)
    c = backend.frame_brackets(p)
    # D[a, ...] = e_a(omega(...))
    D = np.stack([backend.derivative(omega, e(p), p, step=step) for e in backend.basis()])
    if w.ndim == 1:
        out = D - D.T - np.einsum("abk,k->ab", c, w)
    elif w.ndim == 2:
        cw = np.einsum("abk,kc->abc", c, w)  # cw[a,b,c] = w([e_a,e_b], e_c)
        out = (
            D
            - D.transpose(1, 0, 2)
            + D.transpose(1, 2, 0)
            - cw
            + cw.transpose(0, 2, 1)
            - cw.transpose(2, 0, 1)
        )
    else:
        raise UsageError(f"exterior_d supports 1-forms and 2-forms, got rank {w.ndim}")
    if not np.all(np.isfinite(out)):
        raise NumericError("exterior_d")
    return out


def wedge_1_2(eta, Phi):
    """``(eta ^ Phi)(X,Y,Z) = eta(X)Phi(Y,Z) - eta(Y)Phi(X,Z) + eta(Z)Phi(X,Y)``."""
    return (
        np.einsum("a,bc->abc", eta, Phi)
        - np.einsum("b,ac->abc", eta, Phi)
        + np.einsum("c,ab->abc", eta, Phi)
    )


def d_of_d_residual(backend: Backend, omega: FieldFn, p, step=None):
    """Max component of d(d omega) at ``p`` for a 1-form ``omega``."""
    return float(np.max(np.abs(exterior_d(backend, lambda q: exterior_d(backend, omega, q, step=step), p, step=step))))
