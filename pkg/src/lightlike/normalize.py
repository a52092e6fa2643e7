"""Normalization of a lightlike-compatible structure when A_Z = Id.

Stages run in a fixed order, each feeding the next:

1. homothety gate: A_Z must be the identity;
2. screen connection from the Koszul-type formula;
3. screen curvature R^τ and the solve for D^τ(Z);
4. Ric^τ, S^τ and the Schouten-like D^τ on An(τ) (m ≥ 3 only);
5. assembly of (∇, D) at τ₀ and verification of the three curvature conditions.

A stage that fails is recorded and the later stages are skipped.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .calculus.expr import ZERO, Expr, add, mul, to_string
from .calculus.fields import (
    LightlikeStructure,
    Samples,
    VectorField,
    field_residual,
    lie_bracket,
    residual,
    residual_check,
)
from .models import Model
from .report import CheckRecord, Config, check
from .screen import (
    ScreenForm,
    default_screen_form,
    make_screen,
    matrix_values,
    radical_endomorphism,
    random_screen_form,
)
from .tractor import (
    BaseConnection,
    CompatibleStructure,
    CurvatureEngine,
    antisymmetry_residual,
    b_tensor,
    phi,
    phi_inverse,
    xi,
)

GATE_NOTE = (
    "normalization requires A_Z = Id, i.e. Z homothetic; if L_Z h = 2 f h with f nonvanishing, "
    "rescale Z to Z/f (see homothetic_rescaling)"
)


class NormalizationRefused(ValueError):
    def __init__(self, stage: str, message: str):
        super().__init__(message)
        self.stage = stage


# ---------------------------------------------------------------------------
# stage 1: homothety gate


def check_homothetic(struct: LightlikeStructure, screen: ScreenForm, s: Samples, tol: float = 1e-9) -> CheckRecord:
    """Residual of A_Z − Id in the frame of ``screen``."""
    vals = matrix_values(s, radical_endomorphism(struct, screen))
    r = residual(vals.transpose(1, 2, 0), np.eye(screen.m)[:, :, None])
    ev = np.linalg.eigvalsh(np.nan_to_num(0.5 * (vals + vals.transpose(0, 2, 1))))
    note = f"A_Z eigenvalues in [{ev.min():.3g}, {ev.max():.3g}]"
    rec = check("A_Z = Id (homothety gate)", "homothetic radical field", r.value, tol, r.valid, note, r.invalid)
    if not rec.passed:
        rec = CheckRecord(rec.name, rec.anchor, rec.samples, rec.max_residual, rec.tolerance, False,
                          f"{rec.notes}; {GATE_NOTE}")
    return rec


def homothetic_rescaling(struct: LightlikeStructure, screen: ScreenForm) -> tuple[LightlikeStructure, Expr]:
    """For conformal Z with L_Z h = 2 f h return (N, h, Z/f) and f = tr A_Z / m.

    Valid since h(Z, ·) = 0 gives L_{gZ} h = g L_Z h for any function g.
    """
    A = radical_endomorphism(struct, screen)
    f = mul(1.0 / screen.m, add(*(A[i][i] for i in range(screen.m))))
    Zhat = struct.Z.scale(f**-1)
    return LightlikeStructure(struct.chart, struct.h, Zhat), f


# ---------------------------------------------------------------------------
# stage 2: Koszul-type screen connection


def koszul_connection(struct: LightlikeStructure, screen: ScreenForm) -> list[list[list[Expr]]]:
    """Γ_a[i][j] = h(∇_{∂_a} E_i, E_j) from

    2h(∇_W X, Y) = W h(X,Y) + X h(W,Y) − Y h(X,W) + h([W,X],Y) − h([X,Y],W) + h([Y,W],X)

    with W = ∂_a, X = E_i, Y = E_j. Every term is kept, so the antisymmetry of
    Γ_a is a genuine output that can be measured.
    """
    h = struct.h
    chart = struct.chart
    E = screen.frame
    m = screen.m
    hEE = [[h(E[i], E[j]) for j in range(m)] for i in range(m)]
    brackets = {(i, j): lie_bracket(E[i], E[j]) for i in range(m) for j in range(m) if i < j}

    def br(i: int, j: int) -> VectorField:
        if i == j:
            return VectorField.zero(chart)
        return brackets[(i, j)] if i < j else -brackets[(j, i)]

    gamma = []
    for a, W in enumerate(chart.coordinate_fields()):
        hW = h.lower(W)
        hWE = [hW(Ei) for Ei in E]
        WE = [lie_bracket(W, Ei) for Ei in E]
        g = []
        for i in range(m):
            hWX = h.lower(WE[i])
            row = []
            for j in range(m):
                terms = [
                    W(hEE[i][j]),
                    E[i](hWE[j]),
                    mul(-1.0, E[j](hWE[i])),
                    hWX(E[j]),
                    mul(-1.0, hW(br(i, j))),
                    mul(-1.0, h(WE[j], E[i])),
                ]
                row.append(mul(0.5, add(*terms)))
            g.append(row)
        gamma.append(g)
    return gamma


def connection_of(screen: ScreenForm, gamma: Sequence[Sequence[Sequence[Expr]]],
                  D0: Sequence[Sequence] | None = None) -> BaseConnection:
    n, m = screen.chart.dim, screen.m
    D0 = D0 if D0 is not None else [[ZERO] * m for _ in range(n)]
    return CompatibleStructure(screen, gamma, D0).at(screen)


def torsion_records(struct: LightlikeStructure, screen: ScreenForm, conn: BaseConnection, s: Samples,
                    fields: Sequence[VectorField], tol: float) -> list[CheckRecord]:
    """The two screen-connection conditions equivalent to R^T(V,W)ξ ∥ ξ, and their aggregate form."""
    Z = struct.Z
    P = screen.project
    pairs = [(conn.nabla(Z, X), X + P(lie_bracket(Z, X))) for X in screen.frame]
    out = [residual_check("screen connection: nabla_Z X = X + P[Z,X]", "collinearity of R(V,W)xi", s, pairs, tol)]
    E = screen.frame
    pairs = []
    for i in range(len(E)):
        for j in range(i + 1, len(E)):
            pairs.append((conn.nabla(E[i], E[j]) - conn.nabla(E[j], E[i]), P(lie_bracket(E[i], E[j]))))
    out.append(residual_check("screen connection: torsion free on An(tau)", "collinearity of R(V,W)xi", s,
                              pairs, tol))
    pairs = []
    for i, V in enumerate(fields):
        for W in fields[i + 1:]:
            lhs = conn.nabla(V, P(W)) - conn.nabla(W, P(V)) - P(lie_bracket(V, W))
            pairs.append((lhs, b_tensor(screen, V, W)))
    out.append(residual_check("screen connection: aggregate torsion identity with B", "collinearity of R(V,W)xi",
                              s, pairs, tol))
    return out


# ---------------------------------------------------------------------------
# stage 3: screen curvature and D(Z)


def screen_curvature(conn: BaseConnection, V: VectorField, W: VectorField, X: VectorField) -> VectorField:
    """R^τ(V,W)X = ∇_V∇_W X − ∇_W∇_V X − ∇_{[V,W]} X."""
    out = conn.nabla(V, conn.nabla(W, X)) - conn.nabla(W, conn.nabla(V, X))
    br = lie_bracket(V, W)
    if not br.is_zero():
        out = out - conn.nabla(br, X)
    return out


def solve_dz(struct: LightlikeStructure, conn: BaseConnection, s: Samples,
             curv: dict | None = None) -> tuple[VectorField, list]:
    """D^τ(Z) from (m−1) D^τ(Z) = Σ_i R^τ(Z,E_i)E_i.

    Returns the field and the pairs (h(X,Y)DZ − h(Y,DZ)X, R^τ(Z,X)Y) over frame
    vectors; the equation is solvable only where these agree.
    """
    screen = conn.screen
    h = struct.h
    Z = struct.Z
    E = screen.frame
    m = screen.m
    curv = curv if curv is not None else {}
    RZ = {}
    for i in range(m):
        for j in range(m):
            key = ("Z", i, j)
            if key not in curv:
                curv[key] = screen_curvature(conn, Z, E[i], E[j])
            RZ[(i, j)] = curv[key]
    trace = RZ[(0, 0)]
    for i in range(1, m):
        trace = trace + RZ[(i, i)]
    DZ = trace.scale(1.0 / (m - 1))
    pairs = []
    for i in range(m):
        for j in range(m):
            lhs = DZ.scale(h(E[i], E[j])) - E[i].scale(h(E[j], DZ))
            pairs.append((lhs, RZ[(i, j)]))
    return DZ, pairs


# ---------------------------------------------------------------------------
# stage 4: Ricci-type contraction and Schouten-like D


def ricci(conn: BaseConnection, curv: dict | None = None) -> tuple[list[list[Expr]], Expr]:
    """Ric_ij = Σ_k h(R^τ(E_k,E_i)E_j, E_k) and S = Σ_i Ric_ii. Symmetry is not imposed."""
    screen = conn.screen
    h = screen.struct.h
    E = screen.frame
    m = screen.m
    curv = curv if curv is not None else {}
    ric = []
    for i in range(m):
        row = []
        for j in range(m):
            terms = []
            for k in range(m):
                if k == i:
                    continue
                key = (k, i, j)
                if key not in curv:
                    curv[key] = screen_curvature(conn, E[k], E[i], E[j])
                terms.append(h(curv[key], E[k]))
            row.append(add(*terms))
        ric.append(row)
    S = add(*(ric[i][i] for i in range(m)))
    return ric, S


def schouten_d(ric: Sequence[Sequence[Expr]], S: Expr, m: int) -> list[list[Expr]]:
    """h(D E_i, E_j) = (Ric_ij − S δ_ij / (2(m−1))) / (m − 2); undefined for m = 2."""
    if m < 3:
        raise NormalizationRefused("schouten", f"the Schouten-like formula needs m >= 3, got m = {m}")
    c = 1.0 / (m - 2)
    shift = mul(-1.0 / (2 * (m - 1)), S)
    return [[mul(c, add(ric[i][j], shift) if i == j else ric[i][j]) for j in range(m)] for i in range(m)]


def assemble(screen: ScreenForm, gamma: Sequence[Sequence[Sequence[Expr]]], dscreen: Sequence[Sequence[Expr]],
             DZ: VectorField) -> CompatibleStructure:
    """D0[a][j] = Σ_i h(∂_a, E_i) h(D E_i, E_j) + τ(∂_a) h(DZ, E_j)."""
    chart = screen.chart
    h = screen.struct.h
    m = screen.m
    dz = screen.components(DZ)
    D0 = []
    for W in chart.coordinate_fields():
        hW = h.lower(W)
        x = [hW(E) for E in screen.frame]
        tw = screen.tau(W)
        D0.append([add(*(mul(x[i], dscreen[i][j]) for i in range(m)), mul(tw, dz[j])) for j in range(m)])
    return CompatibleStructure(screen, gamma, D0)


# ---------------------------------------------------------------------------
# stage 5: verification


def verify_conditions(cs: CompatibleStructure, struct: LightlikeStructure, s: Samples, cfg: Config) -> list[CheckRecord]:
    """R^T(V,W)ξ ∥ ξ, R^T(Z,V)Φ(W) ∥ ξ, and the Ricci-type contraction of the curvature."""
    screen = cs.base
    eng = CurvatureEngine(cs, screen, cfg.node_budget, cfg.fd_fallback, cfg.fd_step)
    coords = screen.chart.coordinate_fields()
    h = struct.h
    E = screen.frame
    m = screen.m
    x = xi(screen)
    p1, p2 = [], []
    for a, V in enumerate(coords):
        for W in coords[a + 1:]:
            R = eng(V, W, x)
            p1.append(([R.beta, *R.X.comps], [0.0] * (len(R.X.comps) + 1)))
    phis = [phi(screen, W) for W in coords]
    for V in coords:
        for p in phis:
            R = eng(struct.Z, V, p)
            p2.append(([R.beta, *R.X.comps], [0.0] * (len(R.X.comps) + 1)))
    p3 = []
    phiE = [phi(screen, Ej) for Ej in E]
    for j in range(m):
        for k in range(m):
            terms = [h(phi_inverse(eng(E[i], E[j], phiE[k])), E[i]) for i in range(m) if i != j]
            p3.append((add(*terms), ZERO))
    ftol = cfg.fd_tol if eng.fd_used else cfg.tol
    note = "finite-difference fallback engaged" if eng.fd_used else ""
    out = []
    for name, anchor, pairs in (
        ("condition 1: R(V,W)xi collinear with xi", "normalization condition 1", p1),
        ("condition 2: R(Z,V)Phi(W) collinear with xi", "normalization condition 2", p2),
        ("condition 3: Ricci-type contraction vanishes", "normalization condition 3", p3),
    ):
        r = field_residual(s, pairs)
        out.append(check(name, anchor, r.value, ftol, r.valid, note, r.invalid))
    return out


def change_of_screen_records(res: NormalizationResult, taubar: ScreenForm, s: Samples, cfg: Config) -> list[CheckRecord]:
    """Normalize again directly at ``taubar`` and compare with the data transported by the change laws.

    Agreement is the uniqueness of the normalized structure seen through two screens.
    """
    struct = res.model.struct
    gamma = koszul_connection(struct, taubar)
    conn = connection_of(taubar, gamma)
    DZ, _ = solve_dz(struct, conn, s)
    ric, S = ricci(conn)
    dscreen = schouten_d(ric, S, taubar.m)
    direct = assemble(taubar, gamma, dscreen, DZ).at(taubar)
    moved = res.cs.at(taubar)
    fields = taubar.chart.coordinate_fields()
    p1 = [(direct.nabla(W, E), moved.nabla(W, E)) for W in fields for E in taubar.frame]
    p2 = [(direct.D(W), moved.D(W)) for W in fields]
    return [
        residual_check("normalized screen connection agrees across screens", "uniqueness of the normalization",
                       s, p1, cfg.tol),
        residual_check("normalized D agrees across screens", "uniqueness of the normalization", s, p2, cfg.tol),
    ]


def scale_bundle_check(model: Model, cs: CompatibleStructure, cfg: Config, label: str = "") -> list[CheckRecord]:
    """R^T(Z, ∂_a) s = 0 over basis sections s; characterizes bundles of scales."""
    from .suites import scale_bundle_records

    return scale_bundle_records(model, cs, cfg, label)


# ---------------------------------------------------------------------------
# pipeline


@dataclass
class NormalizationResult:
    model: Model
    screen: ScreenForm | None = None
    gamma: list | None = None
    DZ: VectorField | None = None
    ric: list | None = None
    S: Expr | None = None
    dscreen: list | None = None
    cs: CompatibleStructure | None = None
    records: list[CheckRecord] = field(default_factory=list)
    refused: str | None = None

    @property
    def passed(self) -> bool:
        return self.refused is None and self.cs is not None and all(r.passed for r in self.records)

    def as_dict(self) -> dict:
        out: dict = {"model": self.model.name, "refused_at": self.refused}
        if self.S is not None:
            out["S"] = to_string(self.S)
        if self.ric is not None:
            out["Ric"] = [[to_string(x) for x in row] for row in self.ric]
        if self.DZ is not None and self.screen is not None:
            out["DZ"] = [to_string(x) for x in self.screen.components(self.DZ)]
        if self.cs is not None:
            n, m = self.cs.base.chart.dim, self.cs.m
            coords = self.cs.base.chart.coords
            out["gamma"] = {coords[a]: [[to_string(self.cs.gamma(a, i, j)) for j in range(m)] for i in range(m)]
                            for a in range(n)}
            out["D0"] = [[to_string(x) for x in row] for row in self.cs.D0]
        return out

    def normalized_model(self) -> Model:
        if self.cs is None:
            raise ValueError("normalization did not produce a structure")
        return Model(self.model.name, self.model.struct, self.cs.base.tau, self.cs, dict(self.model.data))


def normalize(model: Model, cfg: Config | None = None, verify: bool = True) -> NormalizationResult:
    """Run the staged normalization at the model's base screen form."""
    cfg = cfg or Config()
    struct = model.struct
    chart = struct.chart
    s = Samples(chart, cfg.samples, cfg.seed)
    tau0 = model.tau0 if model.tau0 is not None else default_screen_form(struct)
    screen = make_screen(struct, tau0, samples=s)
    res = NormalizationResult(model, screen)
    tol = cfg.tol

    gate = check_homothetic(struct, screen, s, cfg.exact_tol)
    res.records.append(gate)
    if not gate.passed:
        res.refused = "homothety"
        return res

    gamma = koszul_connection(struct, screen)
    res.gamma = gamma
    r = antisymmetry_residual(gamma, s)
    res.records.append(check("Koszul connection is metric (Gamma antisymmetric)", "Koszul-type formula",
                             r.value, tol, r.valid, invalid=r.invalid))
    conn = connection_of(screen, gamma)
    fields = chart.coordinate_fields()
    res.records += torsion_records(struct, screen, conn, s, fields, tol)

    curv: dict = {}
    E = screen.frame
    m = screen.m
    for k in range(m):
        for i in range(m):
            if k != i:
                for j in range(m):
                    curv[(k, i, j)] = screen_curvature(conn, E[k], E[i], E[j])
    # h(R X, Y) + h(X, R Y) over frame triples
    pairs = []
    for (k, i, j), R in curv.items():
        for l in range(m):
            pairs.append((add(struct.h(R, E[l]), struct.h(E[j], curv[(k, i, l)])), ZERO))
    res.records.append(residual_check("screen curvature is skew-adjoint", "screen curvature", s, pairs, tol))

    DZ, dz_pairs = solve_dz(struct, conn, s, curv)
    res.DZ = DZ
    r = field_residual(s, dz_pairs)
    ok = r.value < tol and not r.invalid
    res.records.append(check("D(Z) equation solvable", "D(Z) equation", r.value, tol, r.valid,
                             "" if ok else "D(Z) equation unsolvable for this geometry", r.invalid))

    ric, S = ricci(conn, curv)
    res.ric, res.S = ric, S
    asym = [(ric[i][j], ric[j][i]) for i in range(screen.m) for j in range(i + 1, screen.m)]
    r = field_residual(s, asym) if asym else residual(np.zeros((1, s.count)))
    res.records.append(CheckRecord("Ric asymmetry (measured)", "Ricci-type contraction", r.valid, float(r.value),
                                   float("inf"), True, "reported only; symmetry is not assumed"))
    if not ok:
        res.refused = "dz"
        return res
    try:
        dscreen = schouten_d(ric, S, screen.m)
    except NormalizationRefused as exc:
        res.refused = exc.stage
        res.records.append(CheckRecord("Schouten-like D on the screen", "Schouten-like tensor", 0, float("nan"),
                                       tol, False, f"refused: {exc}"))
        return res
    res.dscreen = dscreen
    cs = assemble(screen, gamma, dscreen, DZ)
    res.cs = cs
    trD = add(*(dscreen[i][i] for i in range(m)))
    res.records.append(residual_check("trace identity tr D = S / (2(m-1))", "Schouten-like tensor", s,
                                      [(trD, mul(1.0 / (2 * (m - 1)), S))], tol))
    inter = []
    for i in range(m):
        for j in range(m):
            rhs = add(ric[i][j], mul(-1.0, trD)) if i == j else ric[i][j]
            inter.append((mul(m - 2, dscreen[i][j]), rhs))
    res.records.append(residual_check("contraction identity (m-2) h(DX,Y) = Ric - h tr D", "Schouten-like tensor",
                                      s, inter, tol))
    if verify:
        res.records += verify_conditions(cs, struct, s, cfg)
        seed = chart.seed if cfg.seed is None else cfg.seed
        taubar = make_screen(struct, random_screen_form(tau0, struct, np.random.default_rng(seed + 7919)), samples=s)
        res.records += change_of_screen_records(res, taubar, s, cfg)
    return res


__all__ = [
    "NormalizationRefused",
    "NormalizationResult",
    "check_homothetic",
    "homothetic_rescaling",
    "koszul_connection",
    "connection_of",
    "torsion_records",
    "screen_curvature",
    "solve_dz",
    "ricci",
    "schouten_d",
    "assemble",
    "verify_conditions",
    "scale_bundle_check",
    "change_of_screen_records",
    "normalize",
]
