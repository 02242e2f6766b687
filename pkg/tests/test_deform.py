import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import points_for
from kappamunu import catalog
from kappamunu.deform import DeformationParams, apply, predicted_kmn, verify_laws
from kappamunu.errors import ParameterError, UsageError
from kappamunu.kmn import estimate_at
from kappamunu.structure import ALMOST_COSYMPLECTIC, classify


@pytest.mark.parametrize("beta", [0.5, 2.0])
@pytest.mark.parametrize("alpha_d", [1.0, 2.0])
def test_constant_beta_laws(beta, alpha_d):
    m = catalog.build("cosym5", {"b": 0.0, "c": 2.0})
    params = DeformationParams(alpha_d, beta)
    rep = verify_laws(m.structure, params, [m.backend.base_point()])
    assert rep.passed, rep.residuals
    assert np.allclose(rep.extracted[0], (-1 / beta**2, 2 / beta, 0.0), atol=1e-10)


def test_exp_beta_on_chart():
    m = catalog.build("cosym_chart", {"n": 2})
    params = DeformationParams.from_expr("exp(t)", 1.0, m.structure.dim)
    pts = points_for(m, 3)
    rep = verify_laws(m.structure, params, pts)
    assert rep.passed, rep.residuals
    for p, ext in zip(pts, rep.extracted):
        b = np.exp(p[0])
        # xi(beta) = beta, so nu' = (0 * beta - beta) / beta^2 = -1 / beta
        assert np.allclose(ext, (-1 / b**2, 2 / b, -1 / b), atol=1e-5)


def test_predicted_kmn_formula():
    assert predicted_kmn(-1.0, 2.0, 0.5, 2.0, 0.0) == (-0.25, 1.0, 0.25)
    assert predicted_kmn(-1.0, 0.0, 0.0, 1.0, 1.0) == (-1.0, 0.0, -1.0)


def test_flat_beta_field_only_kappa_identified():
    m = catalog.build("cosym_flat", {"n": 1})
    params = DeformationParams.from_expr("1 + t/4", 1.0, 3)
    rep = verify_laws(m.structure, params, points_for(m, 2))
    assert rep.passed, rep.residuals


def test_rejections():
    ken = catalog.build("kenmotsu5")
    with pytest.raises(UsageError):
        apply(ken.structure, DeformationParams(1.0, 2.0))
    cos = catalog.build("cosym5")
    with pytest.raises(UsageError):
        apply(cos.structure, DeformationParams.from_expr("exp(t)", 1.0, 5))
    with pytest.raises(ParameterError):
        DeformationParams(1.0, 0.0)
    with pytest.raises(ParameterError):
        DeformationParams(-1.0, 1.0)
    with pytest.raises(ParameterError):
        DeformationParams.from_expr("exp(s)", 1.0, 3)
    with pytest.raises(ParameterError):
        DeformationParams.from_expr("exp(", 1.0, 3)
    chart = catalog.build("cosym_chart", {"n": 1})
    with pytest.raises(ParameterError):
        apply(chart.structure, DeformationParams.from_expr("t", 1.0, 3), points=[np.zeros(3)])


@settings(max_examples=15, deadline=None)
@given(st.floats(0.3, 3.0), st.floats(0.3, 3.0), st.floats(0.3, 3.0), st.floats(0.3, 3.0))
def test_composition(a1, b1, a2, b2):
    m = catalog.build("cosym5", {"b": 0.5, "c": 1.0})
    p = m.backend.base_point()
    twice = apply(apply(m.structure, DeformationParams(a1, b1)), DeformationParams(a2, b2))
    once = apply(m.structure, DeformationParams(a1 * a2, b1 * b2))
    assert np.allclose(twice.metric(p), once.metric(p), rtol=1e-12)
    assert np.allclose(twice.xi(p), once.xi(p), rtol=1e-12)
    assert np.allclose(twice.eta(p), once.eta(p), rtol=1e-12)
    k2 = estimate_at(twice, p, 0.0)[2].triple
    k1 = estimate_at(once, p, 0.0)[2].triple
    assert np.allclose(k2, k1, atol=1e-9)


@settings(max_examples=10, deadline=None)
@given(st.floats(0.2, 4.0), st.floats(0.2, 4.0))
def test_deformed_stays_almost_cosymplectic(alpha_d, beta):
    m = catalog.build("cosym3", {"b": 1.0, "c": 0.5})
    bar = apply(m.structure, DeformationParams(alpha_d, beta))
    assert classify(bar, [m.backend.base_point()]).tag == ALMOST_COSYMPLECTIC
