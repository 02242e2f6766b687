"""Built-in example manifolds with independently derived ground truth.

Coordinates and bases are ordered ``(xi, X_1..X_n, Y_1..Y_n)`` with
``phi X_i = Y_i``.  Lie models are left-invariant structures on solvable
groups whose Reeb field acts on an abelian ideal; the ``*_chart`` entries
realise the same groups in global coordinates ``(t, u)`` via
``e_j = sum_a expm(t M)[a, j] d/du_a`` so that both backends can be compared.

Provenance tags on expected values:

* ``TRIVIAL``: read off the construction;
* ``DERIVED``: hand expansion of the brackets and the Koszul formula
  (recorded in the entry docstrings), never produced by the engine;
* ``PUBLISHED``: published closed-form values for this family.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.linalg import expm

from .errors import ParameterError, UsageError
from .geometry_core import ChartBackend, LieAlgebraSpec, LieBackend, constant_field, FieldDescriptor
from .structure import ALMOST_COSYMPLECTIC, ALMOST_KENMOTSU, AlmostContactStructure

DIVIDED_TAGS = ("R1", "R2", "R3", "R4", "R51", "R52", "R6", "R7", "R8")
UNDIVIDED_TAGS = ("R1", "R2", "R3", "R4", "R5", "R6", "R7", "R8")


@dataclass(frozen=True)
class Expected:
    value: object
    provenance: str


@dataclass(frozen=True)
class ParamSpec:
    default: float
    low: float = -np.inf
    high: float = np.inf
    strict_low: bool = False
    integer: bool = False
    doc: str = ""

    def check(self, name, value):
        if self.integer:
            if float(value) != int(value):
                raise ParameterError(f"parameter {name} must be an integer, got {value}")
            value = int(value)
        else:
            value = float(value)
        if not np.isfinite(value):
            raise ParameterError(f"parameter {name} must be finite")
        if value < self.low or (self.strict_low and value <= self.low) or value > self.high:
            lo = "(" if self.strict_low else "["
            raise ParameterError(f"parameter {name}={value} outside {lo}{self.low}, {self.high}]")
        return value

    def describe(self):
        lo = "(" if self.strict_low else "["
        kind = "int" if self.integer else "real"
        return f"{kind} in {lo}{self.low}, {self.high}]"


@dataclass
class BuiltModel:
    name: str
    params: dict
    structure: AlmostContactStructure
    expected: dict

    @property
    def backend(self):
        return self.structure.backend

    def sample_points(self, n, rng):
        return self.backend.sample_points(n, rng)


@dataclass(frozen=True)
class CatalogEntry:
    name: str
    params: dict
    builder: Callable
    backend: str
    expected_class: str
    description: str = ""

    def resolve(self, overrides=None):
        overrides = dict(overrides or {})
        unknown = set(overrides) - set(self.params)
        if unknown:
            raise ParameterError(f"unknown parameter(s) for {self.name}: {sorted(unknown)}")
        return {k: spec.check(k, overrides.get(k, spec.default)) for k, spec in self.params.items()}


# ---------------------------------------------------------------------------
# helpers


def standard_phi(n):
    """``phi X_i = Y_i``, ``phi Y_i = -X_i``, ``phi xi = 0`` on ``(xi, X, Y)``."""
    d = 2 * n + 1
    phi = np.zeros((d, d))
    for i in range(n):
        phi[1 + n + i, 1 + i] = 1.0
        phi[1 + i, 1 + n + i] = -1.0
    return phi


def _e0(d):
    v = np.zeros(d)
    v[0] = 1.0
    return v


def _constant_structure(backend, phi, name):
    d = backend.dim
    return AlmostContactStructure(
        backend,
        constant_field("(1,1)-tensor", phi, "phi"),
        constant_field("vector", _e0(d), "xi"),
        constant_field("1-form", _e0(d), "eta"),
        name,
    )


def reeb_action_constants(M):
    """Structure constants of ``R xi (+) V`` with ``[xi, v_j] = sum_k M[k, j] v_k``, V abelian."""
    m = M.shape[0]
    c = np.zeros((m + 1,) * 3)
    c[0, 1:, 1:] = M.T
    c[1:, 0, 1:] = -M.T
    return c


def cosym_action(n, b, c):
    """``[xi, X_i] = b Y_i``, ``[xi, Y_i] = c X_i``."""
    M = np.zeros((2 * n, 2 * n))
    for i in range(n):
        M[n + i, i] = b
        M[i, n + i] = c
    return M


def kenmotsu_action(n, lam):
    """``[xi, X_i] = -(1 + lam) X_i``, ``[xi, Y_i] = -(1 - lam) Y_i``."""
    return np.diag([-(1.0 + lam)] * n + [-(1.0 - lam)] * n)


def reeb_action_chart(M, n, half_width=1.0, name="chart"):
    """Chart ``(t, u)`` realising the group with Reeb action ``M``.

    The frame ``(d/dt, e_1..e_2n)`` with ``e_j = sum_a expm(tM)[a, j] d/du_a`` is
    declared orthonormal, so ``g_uu = A^{-T} A^{-1}`` and
    ``d/dt g_uu = -A^{-T} (M + M^T) A^{-1}``.
    """
    d = 2 * n + 1
    S = M + M.T

    def frame(x):
        E = np.eye(d)
        E[1:, 1:] = expm(x[0] * M)
        return E

    def metric(x):
        Einv = np.linalg.inv(frame(x))
        return Einv.T @ Einv

    def metric_derivative(x):
        Ainv = np.linalg.inv(expm(x[0] * M))
        dG = np.zeros((d, d, d))
        dG[0, 1:, 1:] = -Ainv.T @ S @ Ainv
        return dG

    backend = ChartBackend(-half_width * np.ones(d), half_width * np.ones(d), metric, metric_derivative, name=name)
    phi_f = standard_phi(n)

    def phi(x):
        E = frame(x)
        return E @ phi_f @ np.linalg.inv(E)

    structure = AlmostContactStructure(
        backend,
        FieldDescriptor("(1,1)-tensor", phi, "phi"),
        constant_field("vector", _e0(d), "xi"),
        constant_field("1-form", _e0(d), "eta"),
        name,
    )
    return structure, frame


# ---------------------------------------------------------------------------
# builders


def build_cosym_flat(n):
    """Flat ``R^{2n+1}`` with the standard cosymplectic structure."""
    d = 2 * n + 1
    backend = ChartBackend(-np.ones(d), np.ones(d), lambda x: np.eye(d), lambda x: np.zeros((d, d, d)), name="cosym_flat")
    structure = _constant_structure(backend, standard_phi(n), "cosym_flat")
    expected = {
        "class": Expected(ALMOST_COSYMPLECTIC, "TRIVIAL: all derivatives vanish"),
        "kmn": Expected((0.0, 0.0, 0.0), "TRIVIAL: R = 0"),
        "lambda": Expected(0.0, "TRIVIAL: h = 0"),
        "h_zero": Expected(True, "TRIVIAL: constant structure"),
        "tau": Expected(0.0, "TRIVIAL: flat metric"),
        "sectional": Expected(0.0, "TRIVIAL: flat metric"),
    }
    return structure, expected


def build_kenmotsu_warped(n, c):
    """``g = dt^2 + c e^{2t} (flat Kahler metric)``, ``xi = d/dt``, ``eta = dt``.

    The fibre is flat, so the warped product has constant sectional curvature
    -1 and ``tau = -(2n+1)(2n)``.
    """
    d = 2 * n + 1

    def metric(x):
        G = np.eye(d)
        G[1:, 1:] *= c * np.exp(2.0 * x[0])
        return G

    def metric_derivative(x):
        dG = np.zeros((d, d, d))
        dG[0, 1:, 1:] = 2.0 * c * np.exp(2.0 * x[0]) * np.eye(d - 1)
        return dG

    backend = ChartBackend(-np.ones(d), np.ones(d), metric, metric_derivative, name="kenmotsu_warped")
    structure = _constant_structure(backend, standard_phi(n), "kenmotsu_warped")
    expected = {
        "class": Expected(ALMOST_KENMOTSU, "PUBLISHED: kappa = -1 models are warped products over a Kahler fibre"),
        "kmn": Expected((-1.0, 0.0, 0.0), "PUBLISHED: kappa = -1 iff h = 0; mu = nu = 0 by the h = 0 convention"),
        "lambda": Expected(0.0, "PUBLISHED: kappa = -1 gives h = 0"),
        "h_zero": Expected(True, "PUBLISHED: kappa = -1 gives h = 0"),
        "sectional": Expected(-1.0, "DERIVED: warped product over a flat fibre with f^2 = c e^{2t}"),
        "tau": Expected(-float(d * (d - 1)), "DERIVED: constant curvature -1"),
    }
    if n == 1:
        # trans-Sasakian predictor with beta^2 = 1, beta' = 0: (tau/2 + 2, tau/2 + 3)
        expected["fit_R1_R3"] = Expected((-1.0, 0.0), "DERIVED: constant curvature -1 gives R = -R1")
    return structure, expected


def _cosym_expected(n, b, c):
    lam = abs(b + c) / 2.0
    kappa, mu = -lam**2, c - b
    exp = {
        "class": Expected(ALMOST_COSYMPLECTIC, "DERIVED: d eta = 0 and dPhi(xi, X_i, Y_i) = -b + c - (c - b) = 0"),
        "h_eigen": Expected((b + c) / 2.0, "DERIVED: (L_xi phi) X_i = [xi, Y_i] - phi[xi, X_i] = (b + c) X_i"),
        "lambda": Expected(lam, "DERIVED: h X_i = (b+c)/2 X_i, h Y_i = -(b+c)/2 Y_i"),
        "kmn": Expected(
            (kappa, mu if lam > 0 else 0.0, 0.0),
            "DERIVED: Koszul: nabla_xi X = (b-c)/2 Y, R(X,xi)xi = lam(c-3b)/2 X, R(Y,xi)xi = lam(b-3c)/2 Y",
        ),
        "h_zero": Expected(lam == 0.0, "DERIVED: lambda = |b + c| / 2"),
    }
    if lam > 0:
        if n >= 2:
            exp["divided"] = Expected(
                (0.0, 0.0, -kappa, 0.0, 0.0, -1.0, -mu, 0.0, 0.0),
                "PUBLISHED: R = -kappa R3 - R52 - mu R6 (nu = 0)",
            )
        else:
            exp["dim3_undivided"] = Expected(
                {"R1": -kappa, "R3": -2.0 * kappa, "R4": mu, "R7": 0.0},
                "PUBLISHED: dim 3 almost cosymplectic R = -kappa R1 - 2 kappa R3 + mu R4 + nu R7",
            )
    return exp


def build_cosym(n, b, c):
    """Left-invariant almost cosymplectic structure: ``[xi, X_i] = b Y_i``, ``[xi, Y_i] = c X_i``.

    Hand expansion (orthonormal Koszul, ``lam = (b+c)/2``):
    ``nabla_xi X_i = (b-c)/2 Y_i``, ``nabla_xi Y_i = (c-b)/2 X_i``,
    ``nabla_{X_i} xi = -lam Y_i``, ``nabla_{Y_i} xi = -lam X_i``, ``nabla_{X_i} Y_i = lam xi``.
    Hence ``R(X_i,xi)xi = lam (c-3b)/2 X_i`` and ``R(Y_i,xi)xi = lam (b-3c)/2 Y_i``,
    giving ``kappa = -lam^2``, ``mu = c - b``, ``nu = 0``.
    """
    algebra = LieAlgebraSpec(reeb_action_constants(cosym_action(n, b, c)))
    name = f"cosym{2 * n + 1}"
    structure = _constant_structure(LieBackend(algebra, name=name), standard_phi(n), name)
    return structure, _cosym_expected(n, b, c)


def _kenmotsu_expected(n, lam):
    exp = {
        "class": Expected(ALMOST_KENMOTSU, "DERIVED: dPhi(xi, X_i, Y_i) = -2 = 2 (eta ^ Phi)(xi, X_i, Y_i)"),
        "h_eigen": Expected(lam, "DERIVED: (L_xi phi) X_i = 2 lam Y_i, (L_xi phi) Y_i = 2 lam X_i"),
        "lambda": Expected(lam, "DERIVED: phi h X_i = -lam X_i, phi h Y_i = lam Y_i"),
        "kmn": Expected((-1.0 - lam**2, 0.0, 2.0), "PUBLISHED: almost Kenmotsu (-1 - lambda^2, 0, 2)-spaces"),
        "h_zero": Expected(False, "DERIVED: lam > 0"),
    }
    if n >= 2:
        exp["divided"] = Expected(
            (-1.0, 0.0, lam**2, 0.0, 0.0, -1.0, 0.0, 1.0, -1.0),
            "PUBLISHED: f1=-1, f2=0, f3=lambda^2, f4=0, f51=0, f52=-1, f6=0, f7=1, f8=-1",
        )
    else:
        exp["dim3_undivided"] = Expected(
            {"R1": -1.0 + lam**2, "R3": 2.0 * lam**2, "R4": 0.0, "R7": 2.0},
            "PUBLISHED: f1 = -1 + lambda^2, f2 = 0, f3 = 2 lambda^2, f4 = f5 = f6 = 0, f7 = 2, f8 = 0",
        )
    return exp


def build_kenmotsu(n, lam):
    """Left-invariant almost Kenmotsu structure: ``[xi, X_i] = -(1+lam) X_i``, ``[xi, Y_i] = -(1-lam) Y_i``."""
    algebra = LieAlgebraSpec(reeb_action_constants(kenmotsu_action(n, lam)))
    name = f"kenmotsu{2 * n + 1}"
    structure = _constant_structure(LieBackend(algebra, name=name), standard_phi(n), name)
    return structure, _kenmotsu_expected(n, lam)


def build_cosym_chart(n, b, c):
    structure, _ = reeb_action_chart(cosym_action(n, b, c), n, name="cosym_chart")
    exp = _cosym_expected(n, b, c)
    exp["class"] = Expected(ALMOST_COSYMPLECTIC, "DERIVED: same group as the Lie model cosym(n, b, c)")
    return structure, exp


def build_kenmotsu_chart(n, lam):
    structure, _ = reeb_action_chart(kenmotsu_action(n, lam), n, name="kenmotsu_chart")
    return structure, _kenmotsu_expected(n, lam)


_N = ParamSpec(1, 1, 3, integer=True, doc="number of (X_i, Y_i) pairs; dim = 2n + 1")
_B = ParamSpec(0.0, doc="[xi, X_i] = b Y_i")
_C = ParamSpec(2.0, doc="[xi, Y_i] = c X_i")
_LAM = ParamSpec(1.0, 0.0, strict_low=True, doc="eigenvalue of h")

CATALOG = {
    e.name: e
    for e in [
        CatalogEntry("cosym_flat", {"n": _N}, build_cosym_flat, "chart", ALMOST_COSYMPLECTIC,
                     "flat R^{2n+1}, standard cosymplectic structure"),
        CatalogEntry("kenmotsu_warped", {"n": _N, "c": ParamSpec(1.0, 0.0, strict_low=True, doc="warping constant")},
                     build_kenmotsu_warped, "chart", ALMOST_KENMOTSU,
                     "R x_f R^{2n} with f^2 = c e^{2t}; kappa = -1, h = 0"),
        CatalogEntry("cosym3", {"b": _B, "c": _C}, lambda b, c: build_cosym(1, b, c), "lie", ALMOST_COSYMPLECTIC,
                     "3-d Lie algebra [xi,e1] = b e2, [xi,e2] = c e1"),
        CatalogEntry("cosym5", {"b": _B, "c": _C}, lambda b, c: build_cosym(2, b, c), "lie", ALMOST_COSYMPLECTIC,
                     "5-d analogue of cosym3 with two (X_i, Y_i) pairs"),
        CatalogEntry("kenmotsu5", {"lambda": _LAM}, lambda **kw: build_kenmotsu(2, kw["lambda"]), "lie",
                     ALMOST_KENMOTSU, "almost Kenmotsu (-1-lambda^2, 0, 2)-space, dim 5"),
        CatalogEntry("kenmotsu3", {"lambda": _LAM}, lambda **kw: build_kenmotsu(1, kw["lambda"]), "lie",
                     ALMOST_KENMOTSU, "n = 1 restriction of kenmotsu5"),
        CatalogEntry("cosym_chart", {"n": ParamSpec(2, 1, 3, integer=True), "b": _B, "c": _C}, build_cosym_chart,
                     "chart", ALMOST_COSYMPLECTIC, "cosym(n, b, c) group realised in coordinates (t, u)"),
        CatalogEntry("kenmotsu_chart", {"n": ParamSpec(2, 1, 3, integer=True), "lambda": _LAM},
                     lambda n, **kw: build_kenmotsu_chart(n, kw["lambda"]), "chart", ALMOST_KENMOTSU,
                     "kenmotsu(n, lambda) group realised in coordinates (t, u)"),
    ]
}


def list_catalog():
    """Names, parameter ranges and expected classes of every entry."""
    return [
        {
            "name": e.name,
            "backend": e.backend,
            "expected_class": e.expected_class,
            "description": e.description,
            "params": {k: {"default": s.default, "range": s.describe(), "doc": s.doc} for k, s in e.params.items()},
        }
        for e in CATALOG.values()
    ]


def build(name, params=None) -> BuiltModel:
    if name not in CATALOG:
        raise UsageError(f"unknown catalog entry {name!r}; known: {sorted(CATALOG)}")
    entry = CATALOG[name]
    resolved = entry.resolve(params)
    structure, expected = entry.builder(**resolved)
    return BuiltModel(name, resolved, structure, expected)
