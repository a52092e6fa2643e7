"""Built-in geometries and the JSON geometry-spec format."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .calculus.expr import ONE, ZERO, Expr, ParseError, add, as_expr, diff, exp, mul, parse, to_string, var
from .calculus.fields import (
    Chart,
    LightlikeStructure,
    MetricField,
    OneForm,
    Samples,
    VectorField,
    christoffel,
    covariant,
    exterior_derivative,
    residual,
)
from .report import CheckRecord, check
from .screen import ScreenError, ScreenForm, make_screen
from .tractor import CompatibleStructure, antisymmetry_residual

SPEC_VERSION = 1


@dataclass
class Model:
    name: str
    struct: LightlikeStructure
    tau0: OneForm | None
    cs: CompatibleStructure | None = None
    data: dict = field(default_factory=dict)

    def base_screen(self) -> ScreenForm:
        if self.cs is not None:
            return self.cs.base
        if self.tau0 is None:
            raise ValueError(f"model {self.name!r} has no base screen form")
        screen = self.data.get("_screen")
        if screen is None:
            screen = make_screen(self.struct, self.tau0)
            self.data["_screen"] = screen
        return screen


# ---------------------------------------------------------------------------
# future light cone


def cone(m: int = 3, t_range: tuple[float, float] = (-1.0, 1.0), u_bound: float = 2.0, seed: int = 0) -> Model:
    """Graph chart v = e^t(σ(u), 1) of the future light cone, σ inverse stereographic.

    h = e^{2t}·4/(1+|u|²)²·Σ du_i², Z = ∂_t, τ₀ = dt.
    """
    if m < 2:
        raise ValueError("the cone needs m >= 2")
    coords = ("t",) + tuple(f"u{i}" for i in range(1, m + 1))
    chart = Chart(coords, (t_range,) + ((-u_bound, u_bound),) * m, seed)
    t = var("t")
    u = [var(c) for c in coords[1:]]
    r2 = add(1.0, *(x * x for x in u))
    conf = mul(4.0, exp(2 * t), r2**-2)
    rows = [[ZERO]]
    for i in range(1, m + 1):
        rows.append([ZERO] * i + [conf])
    h = MetricField(chart, rows)
    struct = LightlikeStructure(chart, h, chart.coordinate_field(0))
    return Model(f"cone{m}", struct, chart.coordinate_form(0))


def cone_embedding(m: int) -> list[Expr]:
    """Components of v(t,u) = e^t(2u/(1+|u|²), (|u|²−1)/(1+|u|²), 1) in 𝕃^{m+2}."""
    t = var("t")
    u = [var(f"u{i}") for i in range(1, m + 1)]
    s2 = add(*(x * x for x in u))
    inv = add(1.0, s2) ** -1
    et = exp(t)
    comps = [mul(2.0, et, x, inv) for x in u]
    comps.append(mul(et, add(s2, -1.0), inv))
    comps.append(et)
    return comps


# ---------------------------------------------------------------------------
# lightlike hyperplane


def hyperplane(m: int = 3, bound: float = 1.0, seed: int = 0) -> Model:
    """h = Σ_{i≥1} dr_i², Z = ∂_{r0}, α = dr0, flat ∇^α and D^α = P^α."""
    if m < 2:
        raise ValueError("the hyperplane needs m >= 2")
    coords = tuple(f"r{i}" for i in range(m + 1))
    chart = Chart(coords, ((-bound, bound),) * (m + 1), seed)
    rows = [[ZERO] * (i + 1) for i in range(m + 1)]
    for i in range(1, m + 1):
        rows[i][i] = ONE
    struct = LightlikeStructure(chart, MetricField(chart, rows), chart.coordinate_field(0))
    tau0 = chart.coordinate_form(0)
    base = make_screen(struct, tau0)
    gamma = [[[ZERO] * m for _ in range(m)] for _ in range(m + 1)]
    hl = [struct.h.lower(base.project(chart.coordinate_field(a))) for a in range(m + 1)]
    D0 = [[hl[a](E) for E in base.frame] for a in range(m + 1)]
    return Model(f"hyperplane{m}", struct, tau0, CompatibleStructure(base, gamma, D0))


# ---------------------------------------------------------------------------
# Sasakian manifold


class SasakianAxiomError(ValueError):
    pass


def sasakian(n: int = 1, bound: float = 1.0, seed: int = 0, samples: int = 20, tol: float = 1e-8) -> Model:
    """Standard Sasakian structure on ℝ^{2n+1} with coordinates (x_i, y_i, z).

    η = ½(dz − Σ y_i dx_i), Z = 2∂_z, g = η⊗η + ¼Σ(dx_i² + dy_i²). The
    endomorphism φ = −∇^g Z is computed, the axioms are checked at samples,
    and only then is the structure (∇^η, D^η = φ) on h = g − η⊗η emitted.
    """
    if n < 1:
        raise ValueError("n must be positive")
    coords = tuple(f"x{i}" for i in range(1, n + 1)) + tuple(f"y{i}" for i in range(1, n + 1)) + ("z",)
    dim = 2 * n + 1
    chart = Chart(coords, ((-bound, bound),) * dim, seed)
    ys = [var(f"y{i}") for i in range(1, n + 1)]
    eta_c = [ZERO] * dim
    for i in range(n):
        eta_c[i] = mul(-0.5, ys[i])
    eta_c[-1] = as_expr(0.5)
    eta = OneForm(chart, eta_c)
    Z = VectorField(chart, [ZERO] * (dim - 1) + [2.0])
    quarter = [0.25 if k < 2 * n else 0.0 for k in range(dim)]
    g_full = [[add(mul(eta_c[a], eta_c[b]), quarter[a] if a == b else 0.0) for b in range(dim)] for a in range(dim)]
    g = MetricField.from_matrix(chart, g_full)
    h_full = [[quarter[a] if a == b else ZERO for b in range(dim)] for a in range(dim)]
    h = MetricField.from_matrix(chart, h_full)
    struct = LightlikeStructure(chart, h, Z)

    gam = christoffel(g)
    coord_fields = chart.coordinate_fields()
    phi_cols = [-covariant(gam, d, Z) for d in coord_fields]

    def phi(V: VectorField) -> VectorField:
        out = VectorField.zero(chart)
        for a, c in enumerate(V.comps):
            if not c.is_zero():
                out = out + phi_cols[a].scale(c)
        return out

    def levi(V: VectorField, W: VectorField) -> VectorField:
        return covariant(gam, V, W)

    s = Samples(chart, samples)
    _validate_sasakian(chart, g, eta, Z, phi, levi, s, tol)

    def psi(V: VectorField, W: VectorField) -> Expr:
        return g(V, phi(W))

    def tanaka_screen(V: VectorField, X: VectorField) -> VectorField:
        """∇^η_V X = ∇^g_V X + η(V)φX + Ψ(V,X)Z."""
        return levi(V, X) + phi(X).scale(eta(V)) + Z.scale(psi(V, X))

    base = make_screen(struct, eta, samples=s)
    m = base.m
    gamma = []
    for d in coord_fields:
        rows = []
        for Ei in base.frame:
            hv = h.lower(tanaka_screen(d, Ei))
            rows.append([hv(Ej) for Ej in base.frame])
        gamma.append(rows)
    r = antisymmetry_residual(gamma, s)
    if not r.value < tol:
        raise SasakianAxiomError(f"screen connection is not metric: residual {r.value:.3e}")
    D0 = []
    for d in coord_fields:
        hp = h.lower(phi(d))
        D0.append([hp(E) for E in base.frame])
    cs = CompatibleStructure(base, gamma, D0)
    data = {"g": g, "eta": eta, "phi": phi, "levi_civita": levi, "psi": psi, "christoffel": gam, "m": m}
    return Model(f"sasakian{n}", struct, eta, cs, data)


def _validate_sasakian(chart, g, eta, Z, phi, levi, s: Samples, tol: float) -> None:
    fields = chart.coordinate_fields()

    def fail(name: str, r) -> None:
        raise SasakianAxiomError(f"Sasakian axiom violated: {name} (residual {r.value:.3e})")

    def run(name: str, pairs) -> None:
        lhs, rhs = [], []
        for a, b in pairs:
            lhs.extend(a.comps if isinstance(a, VectorField) else [a])
            rhs.extend(b.comps if isinstance(b, VectorField) else [b])
        r = residual(s.many(lhs), s.many(rhs))
        if not (r.value < tol) or r.invalid:
            fail(name, r)

    run("g(Z, Z) = 1", [(g(Z, Z), ONE)])
    run("eta = g(Z, .)", [(g(Z, V), eta(V)) for V in fields])
    run("phi^2 = -Id + eta (x) Z", [(phi(phi(V)), Z.scale(eta(V)) - V) for V in fields])
    pairs = []
    for V in fields:
        for W in fields:
            nab_phi = levi(V, phi(W)) - phi(levi(V, W))
            pairs.append((nab_phi, Z.scale(g(V, W)) - V.scale(g(W, Z))))
    run("(nabla_V phi) W = g(V,W) Z - g(W,Z) V", pairs)
    run("d eta(V,W) = 2 g(V, phi W)",
        [(exterior_derivative(eta, V, W), mul(2.0, g(V, phi(W)))) for V in fields for W in fields])
    run("(nabla_V eta)(W) = g(V, phi W)",
        [(add(V(eta(W)), mul(-1.0, eta(levi(V, W)))), g(V, phi(W))) for V in fields for W in fields])
    run("g(phi V, phi W) = g(V,W) - eta(V) eta(W)",
        [(g(phi(V), phi(W)), add(g(V, W), mul(-1.0, eta(V), eta(W)))) for V in fields for W in fields])


def tanaka_connection(model: Model, V: VectorField, W: VectorField) -> VectorField:
    """∇*_V W = ∇^g_V W + η(V)φW + η(W)φV + Ψ(V,W)Z on a Sasakian model."""
    d = model.data
    eta, phi = d["eta"], d["phi"]
    Z = model.struct.Z
    return d["levi_civita"](V, W) + phi(W).scale(eta(V)) + phi(V).scale(eta(W)) + Z.scale(d["psi"](V, W))


BUILTINS = {
    "cone": lambda size: cone(size),
    "hyperplane": lambda size: hyperplane(size),
    "sasakian": lambda size: sasakian(size),
}


def builtin(name: str, size: int | None = None) -> Model:
    """``cone`` and ``hyperplane`` take m (default 3); ``sasakian`` takes n (default 1)."""
    if name not in BUILTINS:
        raise ValueError(f"unknown built-in geometry {name!r}; choose from {sorted(BUILTINS)}")
    if size is None:
        size = 1 if name == "sasakian" else 3
    return BUILTINS[name](size)


# ---------------------------------------------------------------------------
# geometry spec files


class SpecError(ValueError):
    """Malformed spec: unreadable JSON, missing keys, or unparsable expressions."""


class SpecValidationError(ValueError):
    """Well-formed spec whose content fails validation."""

    def __init__(self, message: str, records: Sequence[CheckRecord] = ()):
        super().__init__(message)
        self.records = list(records)


def dump_spec(model: Model, include_structure: bool = True) -> dict:
    chart = model.struct.chart
    n = chart.dim
    h = model.struct.h
    spec = {
        "spec_version": SPEC_VERSION,
        "name": model.name,
        "dim": n,
        "coords": list(chart.coords),
        "metric": [[to_string(h.entry(i, j)) for j in range(i + 1)] for i in range(n)],
        "Z": [to_string(c) for c in model.struct.Z.comps],
        "domain": [list(iv) for iv in chart.domain],
        "seed": chart.seed,
    }
    if model.tau0 is not None:
        spec["tau0"] = [to_string(c) for c in model.tau0.comps]
    if include_structure and model.cs is not None:
        cs = model.cs
        spec["tau0"] = [to_string(c) for c in cs.base.tau.comps]
        spec["structure"] = {
            "gamma": {name: [[to_string(x) for x in row] for row in cs.gamma_matrix(a)]
                      for a, name in enumerate(chart.coords)},
            "D0": [[to_string(x) for x in row] for row in cs.D0],
        }
    return spec


def save_spec(model: Model, path: str | Path, include_structure: bool = True) -> None:
    Path(path).write_text(json.dumps(dump_spec(model, include_structure), indent=2) + "\n")


def _expr(text, coords, where: str) -> Expr:
    try:
        return parse(text, coords)
    except ParseError as exc:
        raise SpecError(f"{where}: {exc}") from None


def _require(spec: dict, key: str):
    if key not in spec:
        raise SpecError(f"missing required key {key!r}")
    return spec[key]


def parse_spec(spec: dict, samples: int = 50, tol: float = 1e-9) -> Model:
    if not isinstance(spec, dict):
        raise SpecError("spec must be a JSON object")
    version = spec.get("spec_version")
    if version != SPEC_VERSION:
        raise SpecError(f"unsupported spec_version {version!r}; expected {SPEC_VERSION}")
    name = str(_require(spec, "name"))
    coords = _require(spec, "coords")
    if not isinstance(coords, list) or not all(isinstance(c, str) and c.isidentifier() for c in coords):
        raise SpecError("coords must be a list of identifier strings")
    n = len(coords)
    if _require(spec, "dim") != n:
        raise SpecError(f"dim {spec['dim']!r} does not match {n} coordinates")
    domain = _require(spec, "domain")
    try:
        dom = tuple((float(lo), float(hi)) for lo, hi in domain)
        chart = Chart(tuple(coords), dom, int(spec.get("seed", 0)))
    except (TypeError, ValueError) as exc:
        raise SpecError(f"domain: {exc}") from None
    metric = _require(spec, "metric")
    if not isinstance(metric, list) or len(metric) != n or any(
            not isinstance(row, list) or len(row) != i + 1 for i, row in enumerate(metric)):
        raise SpecError("metric must be a lower triangle: row i holds i+1 entries")
    rows = [[_expr(x, coords, f"metric[{i}][{j}]") for j, x in enumerate(row)] for i, row in enumerate(metric)]
    Zs = _require(spec, "Z")
    if not isinstance(Zs, list) or len(Zs) != n:
        raise SpecError(f"Z must list {n} components")
    Z = VectorField(chart, [_expr(x, coords, f"Z[{i}]") for i, x in enumerate(Zs)])
    if n < 3:
        raise SpecValidationError("a lightlike structure needs at least 3 coordinates")
    struct = LightlikeStructure(chart, MetricField(chart, rows), Z)
    s = Samples(chart, samples)
    recs = struct.validate(s, tol)
    if not all(r.passed for r in recs):
        raise SpecValidationError("geometry fails lightlike-structure validation", recs)
    tau0 = None
    if "tau0" in spec:
        ts = spec["tau0"]
        if not isinstance(ts, list) or len(ts) != n:
            raise SpecError(f"tau0 must list {n} components")
        tau0 = OneForm(chart, [_expr(x, coords, f"tau0[{i}]") for i, x in enumerate(ts)])
        r = residual(s(tau0(Z)), 1.0)
        if not (r.value < tol) or r.invalid:
            raise SpecValidationError(
                "tau0(Z) must equal 1",
                [check("tau0(Z) = 1", "screen forms", r.value, tol, r.valid, invalid=r.invalid)])
    cs = None
    if "structure" in spec:
        if tau0 is None:
            raise SpecError("a structure requires tau0")
        st = spec["structure"]
        try:
            base = make_screen(struct, tau0, samples=s)
        except ScreenError as exc:
            raise SpecValidationError(str(exc)) from None
        m = base.m
        gam_spec = st.get("gamma") if isinstance(st, dict) else None
        if not isinstance(gam_spec, dict) or sorted(gam_spec) != sorted(coords):
            raise SpecError("structure.gamma must map every coordinate to an m x m matrix")
        gamma = []
        for c in coords:
            mat = gam_spec[c]
            if not isinstance(mat, list) or len(mat) != m or any(not isinstance(r, list) or len(r) != m for r in mat):
                raise SpecError(f"structure.gamma[{c}] must be {m}x{m}")
            gamma.append([[_expr(x, coords, f"structure.gamma[{c}][{i}][{j}]") for j, x in enumerate(row)]
                          for i, row in enumerate(mat)])
        r = antisymmetry_residual(gamma, s)
        if not (r.value < tol) or r.invalid:
            raise SpecValidationError(
                "structure.gamma must be antisymmetric",
                [check("gamma antisymmetry", "compatible structure", r.value, tol, r.valid, invalid=r.invalid)])
        d0 = st.get("D0")
        if not isinstance(d0, list) or len(d0) != n or any(not isinstance(r, list) or len(r) != m for r in d0):
            raise SpecError(f"structure.D0 must be {n}x{m}")
        D0 = [[_expr(x, coords, f"structure.D0[{a}][{j}]") for j, x in enumerate(row)] for a, row in enumerate(d0)]
        cs = CompatibleStructure(base, gamma, D0)
    return Model(name, struct, tau0, cs)


def load_spec(path: str | Path, samples: int = 50, tol: float = 1e-9) -> Model:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise SpecError(f"cannot read {path}: {exc.strerror}") from None
    try:
        spec = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SpecError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from None
    return parse_spec(spec, samples, tol)


def embedding_residual(model: Model, s: Samples) -> float:
    """Max residual of ⟨dv, dv⟩ − h for the cone embedding (oracle check)."""
    m = model.struct.m
    v = cone_embedding(m)
    chart = model.struct.chart
    signs = [1.0] * (m + 1) + [-1.0]
    lhs, rhs = [], []
    for a in range(chart.dim):
        for b in range(a + 1):
            terms = [mul(sg, diff(vc, chart.coords[a]), diff(vc, chart.coords[b])) for sg, vc in zip(signs, v)]
            lhs.append(add(*terms))
            rhs.append(model.struct.h.entry(a, b))
    r = residual(s.many(lhs), s.many(rhs))
    return r.value if not r.invalid else math.inf


__all__ = ["Model", "cone", "hyperplane", "sasakian", "builtin", "load_spec", "parse_spec", "dump_spec",
           "save_spec", "SpecError", "SpecValidationError", "SasakianAxiomError", "tanaka_connection",
           "cone_embedding", "embedding_residual"]
