import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import points_for
from kappamunu.curvature import (
    antisymmetry_residual,
    bianchi_residual,
    covariant_derivative,
    curvature_sample,
    dim3_from_ricci,
    pair_symmetry_residual,
    riemann,
    riemann_direct,
    sectional,
    skew_residual,
)
from kappamunu.errors import UsageError
from kappamunu.geometry_core import constant_field
from test_structure import unitary_rotation

MODELS = [
    ("cosym3", {}),
    ("cosym5", {"b": 1.0, "c": 0.5}),
    ("kenmotsu5", {"lambda": 2.0}),
    ("kenmotsu_warped", {"n": 2}),
    ("cosym_chart", {"n": 1, "b": 0.5, "c": 1.0}),
    ("kenmotsu_chart", {"n": 1}),
]


@pytest.mark.parametrize("name, params", MODELS)
def test_algebraic_symmetries(models, name, params):
    m = models(name, **params)
    for p in points_for(m, 2):
        R = curvature_sample(m.structure, p).riemann
        tol = 1e-12 if m.backend.kind == "lie" else 1e-6
        assert antisymmetry_residual(R) <= tol
        assert skew_residual(R) <= tol
        assert pair_symmetry_residual(R) <= tol
        assert bianchi_residual(R) <= tol


def test_flat_is_zero(models):
    m = models("cosym_flat", n=2)
    for p in points_for(m, 2):
        assert np.max(np.abs(m.backend.riemann(p))) == 0.0


def test_warped_constant_curvature(models, rng):
    m = models("kenmotsu_warped", n=2, c=0.7)
    cs = curvature_sample(m.structure, points_for(m, 1)[0])
    assert cs.tau == pytest.approx(-20.0, abs=1e-7)
    for _ in range(10):
        x, y = rng.standard_normal(5), rng.standard_normal(5)
        assert sectional(cs.riemann, x, y) == pytest.approx(-1.0, abs=1e-7)
    assert np.allclose(cs.phi_sectional, -1.0, atol=1e-7)


@pytest.mark.parametrize("name, params", [("kenmotsu3", {}), ("kenmotsu_chart", {"n": 1, "lambda": 0.5})])
def test_riemann_direct_agrees(models, name, params, rng):
    m = models(name, **params)
    b = m.backend
    p = points_for(m, 1)[0]
    d = b.dim
    X, Y, Z = (constant_field("vector", rng.standard_normal(d)) for _ in range(3))
    a = riemann(b, X, Y, Z, p)
    direct = riemann_direct(b, X, Y, Z, p)
    assert np.max(np.abs(a - direct)) <= (1e-12 if b.kind == "lie" else 1e-5)


def test_metric_compatibility(models, rng):
    # X g(Y, Z) = g(nabla_X Y, Z) + g(Y, nabla_X Z) for constant-component fields
    m = models("kenmotsu_chart", n=1, **{"lambda": 0.5})
    b = m.backend
    p = points_for(m, 1)[0]
    x, y, z = rng.standard_normal((3, 3))
    X, Y, Z = (constant_field("vector", v) for v in (x, y, z))
    lhs = b.derivative(lambda q: np.array(y @ b.metric(q) @ z), x, p)
    G = b.metric(p)
    rhs = covariant_derivative(b, X, Y, p) @ G @ z + y @ G @ covariant_derivative(b, X, Z, p)
    assert lhs == pytest.approx(rhs, abs=1e-7)


@pytest.mark.parametrize("name", ["cosym3", "kenmotsu3", "kenmotsu_warped", "cosym_chart"])
def test_dim3_ricci_reconstruction(models, name):
    m = models(name) if name != "cosym_chart" else models(name, n=1)
    for p in points_for(m, 2):
        cs = curvature_sample(m.structure, p)
        assert np.max(np.abs(dim3_from_ricci(cs.ricci_Q, cs.tau) - cs.riemann)) <= 1e-6


def test_dim3_reconstruction_rejects_higher_dim():
    with pytest.raises(UsageError):
        dim3_from_ricci(np.eye(5), 0.0)


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_tau_and_frame_change(seed):
    from kappamunu import catalog

    rng = np.random.default_rng(seed)
    m = catalog.build("cosym5", {"b": 0.3, "c": 1.1})
    p = m.backend.base_point()
    Q = unitary_rotation(2, rng)
    a = curvature_sample(m.structure, p)
    b = curvature_sample(m.structure, p, rotation=Q)
    assert b.tau == pytest.approx(a.tau, abs=1e-12)
    T = np.eye(5)
    T[1:, 1:] = Q
    # R in the rotated frame is the tensor transform of R in the original
    assert np.allclose(np.einsum("abcd,ai,bj,ck,dl->ijkl", a.riemann, T, T, T, T), b.riemann, atol=1e-12)
