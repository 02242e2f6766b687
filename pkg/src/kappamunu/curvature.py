"""Levi-Civita connection, Riemann tensor, Ricci operator and phi-sectional curvature."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import UsageError
from .geometry_core import Backend, Frame, check_metric, lie_bracket
from .structure import AlmostContactStructure, adapted_frame


def covariant_derivative(backend: Backend, X, Y, p):
    """``nabla_X Y`` at ``p`` (backend-basis components)."""
    check_metric(backend.metric(p))
    x = X(p)
    return backend.derivative(Y, x, p) + np.einsum("a,b,abc->c", x, Y(p), backend.christoffel(p))


def connection_matrix(backend: Backend, x, p):
    """Matrix of ``e_b -> nabla_x e_b`` for the backend basis."""
    return np.einsum("a,abc->cb", x, backend.christoffel(p))


def covariant_derivative_endo(backend: Backend, A, X, p, step=None):
    """Matrix of ``(nabla_X A)`` for a (1,1)-tensor field ``A``.

    ``step`` selects the finite-difference step for the outer derivative, for
    use when ``A`` itself is obtained by differentiation.
    """
    x = X(p)
    Gx = connection_matrix(backend, x, p)
    Ap = A(p)
    return backend.derivative(A, x, p, step=step) + Gx @ Ap - Ap @ Gx


def riemann_tensor(backend: Backend, p):
    return backend.riemann(p)


def riemann(backend: Backend, X, Y, Z, p):
    """``R(X,Y)Z`` with ``R(X,Y) = [nabla_X, nabla_Y] - nabla_[X,Y]``."""
    return np.einsum("abcd,a,b,c->d", backend.riemann(p), X(p), Y(p), Z(p))


def riemann_direct(backend: Backend, X, Y, Z, p, step=None):
    """``R(X,Y)Z`` from nested covariant derivatives of the given fields.

    Independent of :meth:`Backend.riemann`; used to cross-check it.
    """
    step = backend.step2 if step is None else step

    def nabla(U, W):
        return lambda q: covariant_derivative(backend, U, W, q)

    xy = lambda q: lie_bracket(backend, X, Y, q)
    p = backend.check_point(p)
    x, y = X(p), Y(p)
    dXdYZ = backend.derivative(nabla(Y, Z), x, p, step=step) + np.einsum(
        "a,b,abc->c", x, nabla(Y, Z)(p), backend.christoffel(p)
    )
    dYdXZ = backend.derivative(nabla(X, Z), y, p, step=step) + np.einsum(
        "a,b,abc->c", y, nabla(X, Z)(p), backend.christoffel(p)
    )
    return dXdYZ - dYdXZ - covariant_derivative(backend, xy, Z, p)


def to_frame(R, frame: Frame):
    """Frame components of a backend-basis ``R[a,b,c,d]``."""
    V = frame.vectors
    Vinv = np.linalg.inv(V)
    return np.einsum("abcd,ai,bj,ck,ld->ijkl", R, V, V, V, Vinv)


@dataclass
class CurvatureSample:
    """Curvature data at one point in an orthonormal phi-basis ``(xi, E, phi E)``."""

    point: np.ndarray
    frame: Frame
    riemann: np.ndarray
    ricci_Q: np.ndarray
    tau: float
    phi_sectional: list = field(default_factory=list)
    phi: np.ndarray = None

    @property
    def dim(self):
        return self.riemann.shape[0]

    def R(self, x, y, z):
        return np.einsum("abcd,a,b,c->d", self.riemann, x, y, z)


def ricci_from_riemann(Rf):
    """Ricci operator in an orthonormal frame: ``Ric(Y,Z) = sum_i g(R(E_i,Y)Z, E_i)``."""
    Ric = np.einsum("ijki->jk", Rf)
    return 0.5 * (Ric + Ric.T)


def sectional(Rf, x, y):
    """``K(x,y) = R(x,y,y,x) / (|x|^2|y|^2 - <x,y>^2)`` in an orthonormal frame."""
    num = np.einsum("abcd,a,b,c,d->", Rf, x, y, y, x)
    den = (x @ x) * (y @ y) - (x @ y) ** 2
    return float(num / den)


def random_unit_horizontal(dim, rng):
    """Random unit vector orthogonal to ``xi = e_0`` (frame components)."""
    v = np.zeros(dim)
    v[1:] = rng.standard_normal(dim - 1)
    return v / np.linalg.norm(v)


def curvature_sample(structure: AlmostContactStructure, p, rng=None, rotation=None, n_phi=20):
    rng = np.random.default_rng(42) if rng is None else rng
    backend = structure.backend
    p = backend.check_point(p)
    frame = adapted_frame(structure, p, rotation)
    Rf = to_frame(backend.riemann(p), frame)
    Q = ricci_from_riemann(Rf)
    phi_f = frame.endo_to_frame(structure.phi(p))
    ks = []
    for _ in range(n_phi):
        x = random_unit_horizontal(structure.dim, rng)
        ks.append(sectional(Rf, x, phi_f @ x))
    return CurvatureSample(p, frame, Rf, Q, float(np.trace(Q)), ks, phi_f)


# -- invariants ---------------------------------------------------------------


def antisymmetry_residual(Rf):
    return float(np.max(np.abs(Rf + Rf.transpose(1, 0, 2, 3))))


def skew_residual(Rf):
    """``g(R(X,Y)Z,W) + g(R(X,Y)W,Z)`` in an orthonormal frame."""
    return float(np.max(np.abs(Rf + Rf.transpose(0, 1, 3, 2))))


def pair_symmetry_residual(Rf):
    """``g(R(X,Y)Z,W) - g(R(Z,W)X,Y)``."""
    return float(np.max(np.abs(Rf - Rf.transpose(2, 3, 0, 1))))


def bianchi_residual(Rf):
    cyc = Rf + Rf.transpose(1, 2, 0, 3) + Rf.transpose(2, 0, 1, 3)
    return float(np.max(np.abs(cyc)))


def dim3_from_ricci(Q, tau):
    """Riemann tensor of a 3-manifold rebuilt from ``Q`` and ``tau`` (orthonormal frame).

    ``R(X,Y)Z = g(Y,Z)QX - g(X,Z)QY + g(QY,Z)X - g(QX,Z)Y - tau/2 (g(Y,Z)X - g(X,Z)Y)``.
    """
    if Q.shape != (3, 3):
        raise UsageError("the Ricci reconstruction only holds in dimension 3")
    I = np.eye(3)
    R = (
        np.einsum("jk,li->ijkl", I, Q)
        - np.einsum("ik,lj->ijkl", I, Q)
        + np.einsum("jk,il->ijkl", Q, I)
        - np.einsum("ik,jl->ijkl", Q, I)
        - 0.5 * tau * (np.einsum("jk,il->ijkl", I, I) - np.einsum("ik,jl->ijkl", I, I))
    )
    return R
