import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import points_for
from kappamunu import catalog
from kappamunu.catalog import reeb_action_constants, standard_phi
from kappamunu.errors import ClassificationError
from kappamunu.geometry_core import ChartBackend, LieAlgebraSpec, LieBackend, constant_field
from kappamunu.structure import (
    ALMOST_ALPHA_COSYMPLECTIC,
    ALMOST_COSYMPLECTIC,
    ALMOST_KENMOTSU,
    CONTACT_METRIC,
    UNCLASSIFIED,
    AlmostContactStructure,
    adapted_frame,
    classify,
    validate,
)

DEFAULTS = [e["name"] for e in catalog.list_catalog()]


def lie_structure(c, n, name="test"):
    d = 2 * n + 1
    e0 = np.eye(d)[0]
    return AlmostContactStructure(
        LieBackend(LieAlgebraSpec(c)),
        constant_field("(1,1)-tensor", standard_phi(n)),
        constant_field("vector", e0),
        constant_field("1-form", e0),
        name,
    )


def heisenberg(weights):
    """``[X_i, Y_i] = w_i xi`` on a (2n+1)-dimensional Heisenberg algebra."""
    n = len(weights)
    d = 2 * n + 1
    c = np.zeros((d, d, d))
    for i, w in enumerate(weights):
        c[1 + i, 1 + n + i, 0] = w
        c[1 + n + i, 1 + i, 0] = -w
    return lie_structure(c, n)


@pytest.mark.parametrize("name", DEFAULTS)
def test_catalog_defaults_validate_and_classify(name):
    m = catalog.build(name)
    pts = points_for(m)
    assert validate(m.structure, pts).passed
    cls = classify(m.structure, pts)
    assert cls.tag == m.expected["class"].value
    assert max(cls.residuals.values()) <= m.backend.tol


def test_adapted_frame_is_phi_basis(models):
    m = models("kenmotsu_chart", n=2, **{"lambda": 0.5})
    p = points_for(m, 1)[0]
    fr = adapted_frame(m.structure, p)
    assert fr.is_orthonormal(1e-10)
    phi = fr.endo_to_frame(m.structure.phi(p))
    assert np.allclose(phi, standard_phi(2), atol=1e-10)


def test_validate_reports_broken_phi(models):
    m = models("cosym3")
    s = m.structure
    bad = AlmostContactStructure(s.backend, constant_field("(1,1)-tensor", 1.1 * standard_phi(1)), s.xi, s.eta)
    rep = validate(bad, [s.backend.base_point()])
    assert not rep.passed
    assert rep.residuals["phi_squared"] > 0.1
    assert rep.residuals["eta_xi"] == 0.0


@pytest.mark.parametrize("w, norm", [((1.0,), "unit"), ((2.0,), "half"), ((1.0, 1.0), "unit")])
def test_heisenberg_is_contact_metric(w, norm):
    s = heisenberg(w)
    assert validate(s, [s.backend.base_point()]).passed
    cls = classify(s, [s.backend.base_point()])
    assert cls.tag == CONTACT_METRIC
    assert cls.normalization == norm


def test_unequal_heisenberg_is_unclassified():
    s = heisenberg((3.0, 1.0))
    assert classify(s, [s.backend.base_point()]).tag == UNCLASSIFIED


@pytest.mark.parametrize("a, b, alpha", [(-1.0, -1.0, 1.0), (-0.5, -0.5, 0.5), (-2.0, -1.0, 1.5), (0.3, -0.3, 0.0)])
def test_alpha_fit_from_reeb_trace(a, b, alpha):
    # [xi, X] = a X, [xi, Y] = b Y gives dPhi = -(a + b) eta ^ Phi
    s = lie_structure(reeb_action_constants(np.diag([a, b])), 1)
    cls = classify(s, [s.backend.base_point()])
    assert cls.alpha == pytest.approx(alpha, abs=1e-12)
    tag = {0.0: ALMOST_COSYMPLECTIC, 1.0: ALMOST_KENMOTSU}.get(alpha, ALMOST_ALPHA_COSYMPLECTIC)
    assert cls.tag == tag


def warped(f, df, d2f):
    """``dt^2 + e^{2 f(t)} (flat)``; ``dPhi = 2 f'(t) eta ^ Phi``."""

    def metric(x):
        G = np.eye(3)
        G[1:, 1:] *= np.exp(2 * f(x[0]))
        return G

    def dmetric(x):
        dG = np.zeros((3, 3, 3))
        dG[0, 1:, 1:] = 2 * df(x[0]) * np.exp(2 * f(x[0])) * np.eye(2)
        return dG

    b = ChartBackend(-np.ones(3), np.ones(3), metric, dmetric)
    e0 = np.eye(3)[0]
    return AlmostContactStructure(
        b, constant_field("(1,1)-tensor", standard_phi(1)), constant_field("vector", e0), constant_field("1-form", e0)
    )


def test_nonconstant_alpha_raises():
    s = warped(lambda t: t * t / 2, lambda t: t, lambda t: 1.0)
    pts = [np.array([-0.5, 0.0, 0.0]), np.array([0.5, 0.0, 0.0])]
    assert validate(s, pts).passed
    with pytest.raises(ClassificationError) as exc:
        classify(s, pts)
    assert exc.value.spread == pytest.approx(1.0, abs=1e-6)
    one = classify(s, pts[1:])
    assert one.alpha == pytest.approx(0.5, abs=1e-6)


def unitary_rotation(n, rng):
    """Real form of a random unitary matrix; it commutes with the standard phi."""
    Z = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    U, _ = np.linalg.qr(Z)
    A, B = U.real, U.imag
    return np.block([[A, -B], [B, A]])


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_classification_is_frame_independent(seed):
    rng = np.random.default_rng(seed)
    m = catalog.build("kenmotsu5", {"lambda": 0.7})
    Q = unitary_rotation(2, rng)
    assert np.allclose(Q @ standard_phi(2)[1:, 1:], standard_phi(2)[1:, 1:] @ Q)
    p = [m.backend.base_point()]
    a = classify(m.structure, p, rotation=Q)
    assert a.tag == ALMOST_KENMOTSU
    assert a.residuals["dPhi_fit"] <= 1e-10
