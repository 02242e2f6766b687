"""Report-producing pipelines behind the CLI subcommands.

Each pipeline appends numeric checks (value, tolerance, pass/fail) to a
:class:`Checks` list and fills named report sections.  ``verify`` runs the
whole chain and stops at the first structural failure.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import __version__, catalog
from . import decomp as dc
from .curvature import (
    antisymmetry_residual,
    bianchi_residual,
    curvature_sample,
    dim3_from_ricci,
    pair_symmetry_residual,
    skew_residual,
)
from .deform import DeformationParams, apply, verify_laws
from .errors import ClassificationError, ModelInconsistencyError, NotKmnSpaceError, UsageError
from .kmn import compute_h, extract_kmn, identity_suite
from .structure import ALMOST_COSYMPLECTIC, ALMOST_KENMOTSU, classify, validate

DEFAULT_TOLS = {
    "axioms": 1e-8,
    "classify": None,  # backend tolerance: 1e-8 Lie, 1e-6 chart
    "curvature": 1e-6,
    "h": 1e-8,
    "kmn": 1e-6,
    "identities": 1e-5,
    "fit": 1e-6,
    "closed_form": 1e-5,
    "dim3": 1e-8,
    "dim3_reconstruction": 1e-6,
    "obstruction": 1e-3,
    "deform": 1e-5,
}


class Checks:
    def __init__(self, tols):
        self.tols = tols
        self.items = []

    def le(self, name, value, key, detail=None):
        tol = self.tols[key]
        self._add(name, float(value), tol, "<=", float(value) <= tol, detail)

    def gt(self, name, value, key, detail=None):
        tol = self.tols[key]
        self._add(name, float(value), tol, ">", float(value) > tol, detail)

    def flag(self, name, ok, detail=None):
        """Exact condition: value 0 when it holds, 1 otherwise."""
        self._add(name, 0.0 if ok else 1.0, 0.0, "<=", bool(ok), detail)

    def _add(self, name, value, tol, op, passed, detail):
        item = {"name": name, "value": value, "tol": tol, "op": op, "passed": bool(passed)}
        if detail is not None:
            item["detail"] = detail
        self.items.append(item)

    @property
    def passed(self):
        return all(c["passed"] for c in self.items)


@dataclass
class Context:
    model: catalog.BuiltModel
    points: list
    rng: np.random.Generator
    tols: dict
    spec_echo: dict
    seed: int
    command: str
    report: dict = field(default_factory=dict)
    checks: Checks = None
    cls: object = None
    estimates: list = None
    hops: list = None

    @property
    def structure(self):
        return self.model.structure

    @property
    def expected(self):
        return self.model.expected


class Stop(Exception):
    """Raised to short-circuit a pipeline after a structural failure."""


def resolve_tols(backend, overrides):
    """Defaults with ``overrides`` applied; key ``"*"`` sets every tolerance."""
    tols = dict(DEFAULT_TOLS)
    tols["classify"] = backend.tol
    if "*" in overrides:
        tols = dict.fromkeys(tols, float(overrides["*"]))
    for k, v in overrides.items():
        if k == "*":
            continue
        if k not in tols:
            raise UsageError(f"unknown tolerance key {k!r}; known: {', '.join(sorted(tols))}")
        tols[k] = float(v)
    return tols


def new_context(model, points, seed, tol_overrides, spec_echo, command):
    rng = np.random.default_rng(seed)
    if points is None:
        points = model.sample_points(3, rng)
    tols = resolve_tols(model.backend, tol_overrides)
    ctx = Context(model, [np.asarray(p, dtype=float) for p in points], rng, tols, spec_echo, seed, command)
    ctx.checks = Checks(tols)
    return ctx


def finish(ctx):
    rep = {
        "engine": {"name": "kappamunu", "version": __version__},
        "command": ctx.command,
        "seed": ctx.seed,
        "spec": ctx.spec_echo,
    }
    if ctx.model is not None:
        s = ctx.structure
        rep["model"] = {
            "name": ctx.model.name,
            "params": ctx.model.params,
            "backend": s.backend.kind,
            "dim": s.dim,
            "sample_points": [p.tolist() for p in ctx.points],
        }
    rep["tolerances"] = {k: float(v) for k, v in ctx.tols.items()}
    rep.update(ctx.report)
    rep["checks"] = ctx.checks.items
    rep["passed"] = ctx.checks.passed
    return rep


# ---------------------------------------------------------------------------
# stages


def stage_validate(ctx):
    v = validate(ctx.structure, ctx.points)
    for k, r in v.residuals.items():
        ctx.checks.le(f"axioms.{k}", r, "axioms")
    if not all(r <= ctx.tols["axioms"] for r in v.residuals.values()):
        ctx.report["stopped"] = "structure axioms fail"
        raise Stop


def stage_classify(ctx, require_family=True):
    section = {}
    ctx.report["classification"] = section
    try:
        cls = classify(ctx.structure, ctx.points, rng=ctx.rng)
    except ClassificationError as exc:
        section.update(tag="error", message=str(exc), spread=exc.spread)
        ctx.checks.le("classify.alpha_spread", exc.spread, "classify")
        ctx.report["stopped"] = "alpha is not constant across sample points"
        raise Stop from None
    ctx.cls = cls
    section.update(tag=cls.tag, residuals=cls.residuals)
    if cls.in_alpha_family:
        section["alpha"] = cls.alpha
        section["alpha_fit"] = cls.alpha_fit
        ctx.checks.le("classify.d_eta", cls.residuals["d_eta"], "classify")
        ctx.checks.le("classify.dPhi_fit", cls.residuals["dPhi_fit"], "classify")
    if cls.normalization:
        section["normalization"] = cls.normalization
    exp = ctx.expected.get("class")
    if exp is not None:
        ctx.checks.flag("classify.expected_class", cls.tag == exp.value, f"expected {exp.value} [{exp.provenance}]")
    if require_family and not cls.in_alpha_family:
        ctx.checks.flag("classify.alpha_family", False, f"class {cls.tag}")
        ctx.report["stopped"] = f"class {cls.tag} is outside the almost alpha-cosymplectic family"
        raise Stop


def stage_curvature(ctx):
    s = ctx.structure
    worst = dict.fromkeys(["antisymmetry", "skew", "pair_symmetry", "bianchi", "tau_trace"], 0.0)
    dim3 = {}
    taus, spreads = [], []
    for p in ctx.points:
        cs = curvature_sample(s, p, rng=ctx.rng)
        R = cs.riemann
        worst["antisymmetry"] = max(worst["antisymmetry"], antisymmetry_residual(R))
        worst["skew"] = max(worst["skew"], skew_residual(R))
        worst["pair_symmetry"] = max(worst["pair_symmetry"], pair_symmetry_residual(R))
        worst["bianchi"] = max(worst["bianchi"], bianchi_residual(R))
        worst["tau_trace"] = max(worst["tau_trace"], abs(cs.tau - float(np.trace(cs.ricci_Q))))
        taus.append(cs.tau)
        if s.dim == 3:
            dim3["ricci_reconstruction"] = max(
                dim3.get("ricci_reconstruction", 0.0), float(np.max(np.abs(dim3_from_ricci(cs.ricci_Q, cs.tau) - R)))
            )
            spreads.append(float(np.ptp(cs.phi_sectional)))
    for k, v in worst.items():
        ctx.checks.le(f"curvature.{k}", v, "curvature")
    section = {"residuals": worst, "tau": taus}
    if s.dim == 3:
        section["ricci_reconstruction"] = dim3["ricci_reconstruction"]
        section["phi_sectional_spread"] = max(spreads)
        ctx.checks.le("curvature.dim3_ricci_reconstruction", dim3["ricci_reconstruction"], "dim3_reconstruction")
        ctx.checks.le("curvature.phi_sectional_spread", max(spreads), "dim3_reconstruction")
    for key in ("tau", "sectional"):
        exp = ctx.expected.get(key)
        if exp is None:
            continue
        if key == "tau":
            gap = max(abs(t - exp.value) for t in taus)
        else:
            gap = max(_sectional_gap(s, p, exp.value, ctx.rng) for p in ctx.points)
        ctx.checks.le(f"curvature.expected_{key}", gap, "curvature", f"expected {exp.value} [{exp.provenance}]")
    ctx.report["curvature"] = section


def _sectional_gap(structure, p, value, rng):
    from .curvature import sectional

    cs = curvature_sample(structure, p, n_phi=0)
    d = structure.dim
    gap = 0.0
    for _ in range(10):
        x, y = rng.standard_normal(d), rng.standard_normal(d)
        gap = max(gap, abs(sectional(cs.riemann, x, y) - value))
    return gap


def stage_kmn(ctx):
    s, alpha = ctx.structure, ctx.cls.alpha
    hsec, ksec = [], []
    ctx.hops, ctx.estimates = [], []
    for p in ctx.points:
        try:
            h = compute_h(s, p, alpha)
        except ModelInconsistencyError as exc:
            ctx.report["h"] = hsec + [{"error": str(exc)}]
            ctx.checks.flag("h.relations", False, str(exc))
            ctx.report["stopped"] = "h relations fail"
            raise Stop from None
        cs = curvature_sample(s, p, n_phi=0)
        try:
            est = extract_kmn(s, h, cs)
        except NotKmnSpaceError as exc:
            ctx.checks.flag("kmn.spectrum", False, str(exc))
            ctx.report["stopped"] = "spectrum of h does not cluster"
            raise Stop from None
        ctx.hops.append(h)
        ctx.estimates.append(est)
        hsec.append({"norm": h.norm, "residuals": h.residuals, "matrix": h.matrix})
        ksec.append(
            {
                "kappa": est.kappa,
                "mu": est.mu,
                "nu": est.nu,
                "residual": est.residual,
                "lambda": est.lam,
                "degenerate": est.degenerate,
                "D_plus": est.D_plus.T,
                "D_minus": est.D_minus.T,
            }
        )
    ctx.report["h"] = hsec
    ctx.report["kmn"] = ksec
    hkeys = ["h_xi", "anticommute", "trace", "symmetric"]
    for k in hkeys:
        ctx.checks.le(f"h.{k}", max(h.residuals[k] for h in ctx.hops), "h")
    ctx.checks.le("h.nabla_xi", max(h.residuals["nabla_xi"] for h in ctx.hops), "kmn")
    a2 = alpha * alpha
    ctx.checks.le("kmn.residual", max(e.residual for e in ctx.estimates), "kmn")
    ctx.checks.le(
        "kmn.lambda_vs_kappa",
        max(abs(e.lam - np.sqrt(max(-e.kappa - a2, 0.0))) for e in ctx.estimates),
        "kmn",
    )
    ctx.checks.le("kmn.kappa_bound", max(max(e.kappa + a2, 0.0) for e in ctx.estimates), "kmn")
    exp = ctx.expected.get("kmn")
    if exp is not None:
        gap = max(float(np.max(np.abs(np.array(e.triple) - np.array(exp.value)))) for e in ctx.estimates)
        ctx.checks.le("kmn.expected", gap, "kmn", f"expected {list(exp.value)} [{exp.provenance}]")
    exp = ctx.expected.get("lambda")
    if exp is not None:
        gap = max(abs(e.lam - exp.value) for e in ctx.estimates)
        ctx.checks.le("kmn.expected_lambda", gap, "kmn", f"expected {exp.value} [{exp.provenance}]")


def stage_identities(ctx):
    rep = identity_suite(ctx.structure, ctx.cls.alpha, ctx.points, ctx.estimates, tol=ctx.tols["identities"])
    ctx.report["identities"] = {"residuals": rep.residuals, "skipped": rep.skipped}
    for k, v in rep.residuals.items():
        ctx.checks.le(f"identities.{k}", v, "identities")


def _fits(ctx, fps, tags):
    """Aggregate fit on a Lie backend, per-point fits on a chart."""
    if ctx.structure.backend.kind == "lie":
        return [dc.fit(fps, tags)]
    return dc.fit_field(fps, tags)


def _fit_json(f):
    return {
        "basis": list(f.basis_tags),
        "coeffs": f.coeffs,
        "residual": f.residual,
        "singular_values": f.singular_values,
        "rank": f.rank,
        "nullspace": f.nullspace,
        "trivial": f.trivial,
    }


def _fit_points(ctx):
    fps = []
    for h in ctx.hops:
        cs = curvature_sample(ctx.structure, h.point, n_phi=0)
        fps.append(dc.FitPoint(cs, dc.basis_from_h(h), h))
    return fps


def _prediction(ctx, est, fp):
    tag = ctx.cls.tag
    if tag not in (ALMOST_COSYMPLECTIC, ALMOST_KENMOTSU):
        return None
    d = ctx.structure.dim
    a2 = ctx.cls.alpha**2
    if abs(est.kappa + a2) <= 1e-6 and d >= 5:
        return None
    if est.kappa + a2 > 1e-6:
        return None
    tau = fp.sample.tau if d == 3 else None
    return dc.predict_closed_form(tag, d, *est.triple, tau=tau)


def stage_decompose(ctx, basis="divided"):
    tags = dc.DIVIDED if basis == "divided" else dc.UNDIVIDED
    fps = _fit_points(ctx)
    fits = _fits(ctx, fps, tags)
    mode = "aggregate" if ctx.structure.backend.kind == "lie" else "per_point"
    section = {"basis": basis, "mode": mode}
    section["fits"] = [_fit_json(f) for f in fits]
    ctx.report["decomposition"] = section
    worst = max(f.residual for f in fits)
    ctx.checks.le(f"decomposition.{basis}_residual", worst, "fit")
    if basis == "undivided":
        d = ctx.structure.dim
        a2 = ctx.cls.alpha**2
        claimed = d >= 5 and all(e.kappa < -a2 - 1e-6 for e in ctx.estimates)
        ctx.report["obstruction"] = {
            "undivided_residual": worst,
            "confirmed": worst > ctx.tols["obstruction"],
            "in_claimed_range": claimed,
        }
        if claimed:
            ctx.checks.gt("obstruction.undivided_residual", worst, "obstruction")
    # estimates per fit: aggregate uses the first point (constant on Lie models)
    ests = ctx.estimates if len(fits) == len(ctx.estimates) else ctx.estimates[:1]
    fp_for = fps if len(fits) == len(fps) else fps[:1]
    kff, gaps, certs = [], [], []
    for f, est, fp in zip(fits, ests, fp_for):
        if f.trivial:
            kff.append(None)
        elif f.residual <= ctx.tols["fit"]:
            k = dc.consistency_kmn_from_fit(f, est, tol=np.inf)
            kff.append({"kappa": k.kappa, "mu": k.mu, "nu": k.nu, "mismatch": k.mismatch})
            if not est.degenerate:
                ctx.checks.le("decomposition.kmn_from_fit", k.mismatch, "kmn")
            else:
                ctx.checks.le("decomposition.kappa_from_fit", abs(k.kappa - est.kappa), "kmn")
        if basis == "divided":
            cert = dc.uniqueness_certificate(f)
            certs.append({"rank": cert.rank, "nullity": cert.nullity, "unique": cert.unique})
        pred = _prediction(ctx, est, fp)
        if pred is not None:
            try:
                vec = dc.to_basis(pred, f.basis_tags)
            except Exception:
                vec = None
            if vec is not None:
                gap, proj = dc.compare_to_prediction(f, vec)
                gaps.append({"predicted": vec, "projected": proj, "gap": gap})
    section["kmn_from_fit"] = kff
    if certs:
        section["certificate"] = certs
        if ctx.structure.dim >= 5 and all(not e.degenerate for e in ctx.estimates):
            ctx.checks.flag("decomposition.unique", all(c["unique"] for c in certs), "dim >= 5 with h != 0")
    if gaps:
        section["closed_form"] = gaps
        ctx.checks.le("decomposition.closed_form", max(g["gap"] for g in gaps), "closed_form")
    exp = ctx.expected.get("divided")
    if exp is not None and basis == "divided":
        gap = max(float(np.max(np.abs(f.coeffs - np.array(exp.value)))) for f in fits)
        ctx.checks.le("decomposition.expected_coeffs", gap, "closed_form", f"[{exp.provenance}]")
    return fps


def stage_dim3(ctx, fps):
    if ctx.structure.dim != 3:
        return
    alpha = ctx.cls.alpha
    sec = {"identities": {}, "subset_fit": []}
    worst_id = {}
    for fp, est in zip(fps, ctx.estimates):
        for k, v in dc.verify_dim3_identities(fp.basis, est.kappa, alpha).items():
            worst_id[k] = max(worst_id.get(k, 0.0), v)
    sec["identities"] = worst_id
    for k, v in worst_id.items():
        ctx.checks.le(f"dim3.{k}", v, "dim3")
    tau_gap = F_gap = Fs_gap = 0.0
    sub_gap = 0.0
    exp = ctx.expected.get("dim3_undivided")
    ts_gap = None
    exp_rr = ctx.expected.get("fit_R1_R3")
    rr_gap = 0.0
    for fp, est in zip(fps, ctx.estimates):
        cs = curvature_sample(ctx.structure, fp.h.point, rng=ctx.rng)
        R = cs.riemann
        tau = cs.tau
        sf = dc.fit([fp], dc.DIM3_SUBSET)
        entry = {"coeffs": sf.as_dict(), "residual": sf.residual}
        sec["subset_fit"].append(entry)
        if est.degenerate:
            # h = 0: trans-Sasakian predictor with beta^2 = alpha^2
            pred = dc.predict_closed_form(ctx.cls.tag, 3, est.kappa, tau=tau) if ctx.cls.tag in (
                ALMOST_COSYMPLECTIC, ALMOST_KENMOTSU) else None
            if pred is not None:
                g = max(abs(sf.coeff("R1") - pred[0]), abs(sf.coeff("R3") - pred[2]))
                ts_gap = g if ts_gap is None else max(ts_gap, g)
            if exp_rr is not None:
                rr_gap = max(rr_gap, abs(sf.coeff("R1") - exp_rr.value[0]), abs(sf.coeff("R3") - exp_rr.value[1]))
            continue
        tau_form = dc.predict_closed_form(ctx.cls.tag, 3, *est.triple, tau=tau)
        F = float(np.mean(cs.phi_sectional))
        F_form = dc.predict_closed_form(ctx.cls.tag, 3, *est.triple, F=F)
        tau_gap = max(tau_gap, float(np.max(np.abs(dc.reconstruct(fp.basis, tau_form, dc.DIVIDED) - R))))
        F_gap = max(F_gap, float(np.max(np.abs(dc.reconstruct(fp.basis, F_form, dc.DIVIDED) - R))))
        Fs_gap = max(Fs_gap, abs(F - (tau / 2 - 2 * est.kappa)), abs(sf.coeff("R1") - (tau / 2 - 2 * est.kappa)))
        entry["F"] = F
        if exp is not None:
            sub_gap = max(sub_gap, max(abs(sf.coeff(t) - v) for t, v in exp.value.items()))
    if not all(e.degenerate for e in ctx.estimates):
        sec.update(tau_form_gap=tau_gap, F_form_gap=F_gap, F_gap=Fs_gap)
        ctx.checks.le("dim3.tau_form", tau_gap, "dim3_reconstruction")
        ctx.checks.le("dim3.F_form", F_gap, "dim3_reconstruction")
        ctx.checks.le("dim3.F_equals_tau/2-2kappa", Fs_gap, "dim3_reconstruction")
        if exp is not None:
            ctx.checks.le("dim3.expected_coeffs", sub_gap, "closed_form", f"[{exp.provenance}]")
    if ts_gap is not None:
        sec["trans_sasakian_gap"] = ts_gap
        ctx.checks.le("dim3.trans_sasakian", ts_gap, "dim3_reconstruction")
    if exp_rr is not None and all(e.degenerate for e in ctx.estimates):
        ctx.checks.le("dim3.expected_R1_R3", rr_gap, "dim3_reconstruction", f"[{exp_rr.provenance}]")
    ctx.report["dim3"] = sec


def stage_obstruction(ctx, fps):
    d = ctx.structure.dim
    a2 = ctx.cls.alpha**2
    if d < 5 or ctx.cls.tag not in (ALMOST_COSYMPLECTIC, ALMOST_KENMOTSU):
        return
    if not all(e.kappa < -a2 - 1e-6 for e in ctx.estimates):
        return
    fits = _fits(ctx, fps, dc.UNDIVIDED)
    worst = min(f.residual for f in fits)
    ctx.report["obstruction"] = {"undivided_residual": worst, "confirmed": worst > ctx.tols["obstruction"],
                                 "in_claimed_range": True}
    ctx.checks.gt("obstruction.undivided_residual", worst, "obstruction")


# ---------------------------------------------------------------------------
# commands


def run_classify(ctx):
    try:
        stage_validate(ctx)
        stage_classify(ctx, require_family=False)
    except Stop:
        pass
    return finish(ctx)


def run_kmn(ctx):
    try:
        stage_validate(ctx)
        stage_classify(ctx)
        stage_kmn(ctx)
    except Stop:
        pass
    return finish(ctx)


def run_decompose(ctx, basis="divided"):
    try:
        stage_validate(ctx)
        stage_classify(ctx)
        stage_kmn(ctx)
        stage_decompose(ctx, basis)
    except Stop:
        pass
    return finish(ctx)


def run_verify(ctx):
    try:
        stage_validate(ctx)
        stage_classify(ctx)
        stage_curvature(ctx)
        stage_kmn(ctx)
        stage_identities(ctx)
        fps = stage_decompose(ctx, "divided")
        stage_dim3(ctx, fps)
        stage_obstruction(ctx, fps)
    except Stop:
        pass
    return finish(ctx)


def run_deform(ctx, params: DeformationParams):
    try:
        stage_validate(ctx)
        stage_classify(ctx)
    except Stop:
        return finish(ctx)
    s = ctx.structure
    bar = apply(s, params, points=ctx.points)
    rep = verify_laws(s, params, ctx.points, rng=ctx.rng, tol=ctx.tols["deform"], deformed=bar)
    sec = {
        "alpha_d": params.alpha_d,
        "beta": params.expr or params.beta,
        "residuals": rep.residuals,
        "original": rep.original,
        "predicted": rep.predicted,
        "extracted": rep.extracted,
    }
    for k, v in rep.residuals.items():
        ctx.checks.le(f"deform.{k}", v, "deform")
    ctx.checks.flag(
        "deform.kappa_sign",
        all((k0[0] < 0) == (k1[0] < 0) for k0, k1 in zip(rep.original, rep.extracted)),
        "sign of kappa is preserved",
    )
    if s.dim >= 5 and all(k[0] < -1e-6 for k in rep.extracted):
        fps = []
        for p in ctx.points:
            h = compute_h(bar, p, 0.0)
            fps.append(dc.FitPoint(curvature_sample(bar, p, n_phi=0), dc.basis_from_h(h), h))
        fits = [dc.fit(fps, dc.DIVIDED)] if s.backend.kind == "lie" else dc.fit_field(fps, dc.DIVIDED)
        gaps = []
        for f, k in zip(fits, rep.extracted):
            pred = dc.predict_closed_form(ALMOST_COSYMPLECTIC, s.dim, *k)
            gaps.append(dc.compare_to_prediction(f, pred)[0])
        sec["deformed_fit"] = [_fit_json(f) for f in fits]
        ctx.checks.le("deform.deformed_writing", max(gaps), "closed_form")
    ctx.report["deformation"] = sec
    return finish(ctx)


def run_catalog(name=None, params=None):
    out = {"catalog": catalog.list_catalog()}
    if name is not None:
        model = catalog.build(name, params)
        out["entry"] = {
            "name": name,
            "params": model.params,
            "expected": {k: {"value": e.value, "provenance": e.provenance} for k, e in model.expected.items()},
        }
    return out
