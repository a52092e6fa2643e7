"""Residual suites over a geometry: screen identities, transition laws,
connection laws, Galilean identities and curvature tables."""

from __future__ import annotations

import numpy as np

from .calculus.expr import ZERO, Expr, add, mul
from .calculus.fields import (
    OneForm,
    Samples,
    VectorField,
    exterior_derivative,
    field_residual,
    lie_bracket,
    random_function,
    random_vector_field,
    residual,
    residual_check,
)
from .models import Model, tanaka_connection
from .report import CheckRecord, Config, check
from .screen import (
    K_field,
    L_field,
    ScreenForm,
    default_screen_form,
    make_screen,
    matrix_values,
    radical_endomorphism,
    random_screen_form,
    screen_checks,
)
from .tractor import (
    CompatibleStructure,
    CurvatureEngine,
    b_tensor,
    basis_sections,
    eta,
    galilean_extend,
    galilean_torsion,
    j_matrix,
    phi,
    phi_inverse,
    section,
    symmetric_part,
    t_omega,
    theta,
    tractor_connection,
    tractor_metric,
    transition,
    xi,
)

ANCHOR_PLUMBING = "plumbing"


class Setting:
    """Shared context of a suite run: samples, a base screen and two random screens."""

    def __init__(self, model: Model, cfg: Config):
        self.model = model
        self.cfg = cfg
        self.struct = model.struct
        self.chart = model.struct.chart
        seed = self.chart.seed if cfg.seed is None else cfg.seed
        self.rng = np.random.default_rng(seed + 7919)
        self.s = Samples(self.chart, cfg.samples, seed)
        if model.cs is not None:
            self.base = model.cs.base
        else:
            tau0 = model.tau0 if model.tau0 is not None else default_screen_form(self.struct)
            self.base = make_screen(self.struct, tau0, samples=self.s)
        self.bar = make_screen(self.struct, random_screen_form(self.base.tau, self.struct, self.rng), samples=self.s)
        self.hat = make_screen(self.struct, random_screen_form(self.base.tau, self.struct, self.rng), samples=self.s)
        self.coords = self.chart.coordinate_fields()
        self.extra_field = random_vector_field(self.chart, self.rng)
        self.fields = self.coords + [self.extra_field]

    def random_section(self, screen: ScreenForm):
        X = screen.project(random_vector_field(self.chart, self.rng))
        return section(screen, random_function(self.chart, self.rng), X, random_function(self.chart, self.rng))

    def rec(self, name: str, anchor: str, pairs, tol: float, notes: str = "") -> CheckRecord:
        return residual_check(name, anchor, self.s, pairs, tol, notes)


# ---------------------------------------------------------------------------
# radical endomorphism


def classify_az(values: np.ndarray, tol: float) -> str:
    """Name A_Z from sampled matrices (N, m, m): identity, zero or general."""
    eye = np.eye(values.shape[-1])
    finite = values[np.all(np.isfinite(values), axis=(1, 2))]
    if finite.size and np.max(np.abs(finite - eye)) < tol:
        return "identity"
    if finite.size and np.max(np.abs(finite)) < tol:
        return "zero"
    return "general"


def az_records(st: Setting) -> list[CheckRecord]:
    tol = st.cfg.exact_tol
    out = []
    A = radical_endomorphism(st.struct, st.base)
    vals = matrix_values(st.s, A)
    kind = classify_az(vals, tol)
    r = residual((vals - vals.transpose(0, 2, 1)).transpose(1, 2, 0))
    out.append(check("A_Z self-adjoint", "radical endomorphism", r.value, tol, r.valid, f"A_Z = {kind}", r.invalid))
    if kind in ("identity", "zero"):
        target = np.eye(vals.shape[-1]) if kind == "identity" else 0.0
        r = residual(vals.transpose(1, 2, 0), np.asarray(target)[..., None] if kind == "identity" else 0.0)
        out.append(check(f"A_Z = {'Id' if kind == 'identity' else '0'}", "radical endomorphism",
                         r.value, tol, r.valid, invalid=r.invalid))
    Ab = matrix_values(st.s, radical_endomorphism(st.struct, st.bar))
    ev0 = np.sort(np.linalg.eigvalsh(_sym(vals)), axis=1)
    ev1 = np.sort(np.linalg.eigvalsh(_sym(Ab)), axis=1)
    r = residual(ev0.T, ev1.T)
    out.append(check("A_Z eigenvalues independent of the screen form", "radical endomorphism",
                     r.value, 1e-7, r.valid, invalid=r.invalid))
    return out


def _sym(a: np.ndarray) -> np.ndarray:
    a = np.where(np.isfinite(a), a, 0.0)
    return 0.5 * (a + a.transpose(0, 2, 1))


# ---------------------------------------------------------------------------
# screen identities


def screen_records(st: Setting) -> list[CheckRecord]:
    tol = st.cfg.exact_tol
    h = st.struct.h
    Z = st.struct.Z
    out: list[CheckRecord] = []
    for label, sc in (("tau0", st.base), ("tau1", st.bar), ("tau2", st.hat)):
        for rec in screen_checks(sc, st.s, tol):
            out.append(_rename(rec, f"{rec.name} [{label}]"))
    pairs = [(st.base, st.bar, "tau0,tau1"), (st.bar, st.hat, "tau1,tau2")]
    for t, tb, lab in pairs:
        K = K_field(t, tb)
        L = L_field(t, tb)
        Lr = L_field(tb, t)
        hLL = h(L, L)
        out.append(st.rec(f"K: -tau(K) = taubar(K) [{lab}]", "difference field K",
                          [(mul(-1.0, t.tau(K)), tb.tau(K))], tol))
        out.append(st.rec(f"K: h(W,K) = tau(W) - taubar(W) [{lab}]", "difference field K",
                          [(h(W, K), add(t.tau(W), mul(-1.0, tb.tau(W)))) for W in st.fields], tol))
        via_transition = phi_inverse(eta(t) - transition(tb, t, eta(tb)))
        out.append(st.rec(f"K: K = L - h(L,L)Z/2 via transition of eta [{lab}]", "difference field K",
                          [(K, via_transition)], tol))
        out.append(st.rec(f"L: L(tau,taubar) + L(taubar,tau) = h(L,L)Z [{lab}]", "difference field L",
                          [(L + Lr, Z.scale(hLL))], tol))
        out.append(st.rec(f"L, K: h(L,L) = h(K,K) = -2 taubar(K) [{lab}]", "difference fields",
                          [(hLL, h(K, K)), (hLL, mul(-2.0, tb.tau(K)))], tol))
        out.append(st.rec(f"L = P^taubar(K) [{lab}]", "difference field L", [(L, tb.project(K))], tol))
        out.append(st.rec(f"L annihilated by taubar [{lab}]", "difference field L", [(tb.tau(L), ZERO)], tol))
    a, t, tb = st.base, st.bar, st.hat
    Lat = L_field(a, t)
    Lttb = L_field(t, tb)
    # the sign of the Z term is forced by the first identity (take tb = a)
    out.append(st.rec("L: L(a,t) + L(t,tb) = L(a,tb) - h(L(a,t), L(t,tb))Z", "difference field L",
                      [(Lat + Lttb, L_field(a, tb) - Z.scale(h(Lat, Lttb)))], tol))
    rev = list(reversed(range(st.chart.dim)))
    tb_rev = make_screen(st.struct, tb.tau, pivot_order=rev, samples=st.s)
    out.append(st.rec("L frame independence (reversed pivots)", "difference field L",
                      [(L_field(t, tb), L_field(t, tb_rev))], tol,
                      notes=f"pivots {list(tb.pivots)} vs {list(tb_rev.pivots)}"))
    return out


def _rename(rec: CheckRecord, name: str) -> CheckRecord:
    return CheckRecord(name, rec.anchor, rec.samples, rec.max_residual, rec.tolerance, rec.passed, rec.notes)


# ---------------------------------------------------------------------------
# transition maps and Φ


def transition_records(st: Setting) -> list[CheckRecord]:
    tol = st.cfg.exact_tol
    out = []
    t, tb, th = st.base, st.bar, st.hat
    secs = [s for _, s in basis_sections(t)] + [st.random_section(t), st.random_section(t)]
    F = [transition(t, tb, s) for s in secs]
    iso = []
    for i in range(len(secs)):
        for j in range(i, len(secs)):
            iso.append((tractor_metric(F[i], F[j]), tractor_metric(secs[i], secs[j])))
    out.append(st.rec("transition is an isometry", "transition map", iso, tol))
    coc = []
    for s, fs in zip(secs, F):
        lhs = transition(tb, th, fs)
        rhs = transition(t, th, s)
        coc.append((lhs.components(), rhs.components()))
    out.append(st.rec("transition cocycle F(t1,t2) F(t0,t1) = F(t0,t2)", "transition map", coc, tol))
    out.append(st.rec("transition fixes xi", "transition map",
                      [(transition(t, tb, xi(t)).components(), xi(tb).components())], tol))
    out.append(st.rec("transition F(t,t) = identity", "transition map",
                      [(transition(t, t, s).components(), s.components()) for s in secs], tol))
    h = st.struct.h
    phis = [phi(tb, V) for V in st.fields]
    iso = []
    for i, V in enumerate(st.fields):
        for j in range(i, len(st.fields)):
            iso.append((tractor_metric(phis[i], phis[j]), h(V, st.fields[j])))
    out.append(st.rec("Phi is an isometry", "Phi embedding", iso, tol))
    out.append(st.rec("Phi(Z) = xi", "Phi embedding",
                      [(phi(tb, st.struct.Z).components(), xi(tb).components())], tol))
    inj = [(phi_inverse(p), V) for p, V in zip(phis, st.fields)]
    out.append(st.rec("Phi injective: Phi^-1(Phi(W)) = W", "Phi embedding", inj, tol))
    metric = [(tractor_metric(xi(tb), xi(tb)), 0.0), (tractor_metric(xi(tb), eta(tb)), 1.0),
              (tractor_metric(eta(tb), eta(tb)), 0.0)]
    out.append(st.rec("tractor metric on xi, eta", "tractor metric", metric, tol))
    return out


# ---------------------------------------------------------------------------
# connection laws (need a compatible structure)


def connection_records(st: Setting, cs: CompatibleStructure) -> list[CheckRecord]:
    tol = st.cfg.identity_tol
    h = st.struct.h
    Z = st.struct.Z
    out = []
    t, tb, th = st.base, st.bar, st.hat
    Ws = st.fields
    for lab, sc in (("tau0", t), ("tau1", tb)):
        s1, s2 = st.random_section(sc), st.random_section(sc)
        pairs = []
        for W in Ws:
            lhs = W(tractor_metric(s1, s2))
            rhs = add(tractor_metric(tractor_connection(cs, sc, W, s1), s2),
                      tractor_metric(s1, tractor_connection(cs, sc, W, s2)))
            pairs.append((lhs, rhs))
        out.append(st.rec(f"tractor connection is metric [{lab}]", "tractor connection", pairs, tol))
        conn = cs.at(sc)
        pairs = []
        for W in Ws:
            for i, Ei in enumerate(sc.frame):
                for Ej in sc.frame[i:]:
                    pairs.append((W(h(Ei, Ej)), add(h(conn.nabla(W, Ei), Ej), h(Ei, conn.nabla(W, Ej)))))
        out.append(st.rec(f"screen connection is metric [{lab}]", "screen connection", pairs, tol))
        pairs = [(sc.tau(conn.nabla(W, E)), ZERO) for W in Ws for E in sc.frame]
        pairs += [(sc.tau(conn.D(W)), ZERO) for W in Ws]
        out.append(st.rec(f"screen connection and D take values in An(tau) [{lab}]", "screen connection",
                          pairs, tol))
        pairs = []
        for W in Ws:
            pairs.append((tractor_connection(cs, sc, W, xi(sc)).components(), phi(sc, W).components()))
            pairs.append((tractor_connection(cs, sc, W, eta(sc)).components(),
                          [ZERO, *conn.D(W).comps, mul(-1.0, sc.tau(W))]))
        out.append(st.rec(f"connection on xi and eta [{lab}]", "tractor connection", pairs, tol))
    # naturality of the transition map
    s = st.random_section(t)
    pairs = []
    for W in Ws:
        lhs = transition(t, tb, tractor_connection(cs, t, W, s))
        rhs = tractor_connection(cs, tb, W, transition(t, tb, s))
        pairs.append((lhs.components(), rhs.components()))
    out.append(st.rec("naturality: F(nabla s) = nabla(F s)", "transition map", pairs, tol))
    out += change_law_records(st, cs, tb, th, "tau1->tau2")
    out += galilean_records(st, cs)
    out += curvature_skew_records(st, cs)
    return out


def curvature_skew_records(st: Setting, cs: CompatibleStructure) -> list[CheckRecord]:
    """h(R s1, s2) + h(s1, R s2) = 0 and R(V,W)xi has no eta-component, over basis sections."""
    sc = st.base
    eng = CurvatureEngine(cs, sc, st.cfg.node_budget, st.cfg.fd_fallback, st.cfg.fd_step)
    secs = [x for _, x in basis_sections(sc)]
    pairs, third = [], []
    for i, V in enumerate(st.coords):
        for W in st.coords[i + 1:]:
            Rs = [eng(V, W, x) for x in secs]
            third.append((Rs[0].beta, ZERO))
            for a in range(len(secs)):
                for b in range(a, len(secs)):
                    pairs.append((add(tractor_metric(Rs[a], secs[b]), tractor_metric(secs[a], Rs[b])), ZERO))
    ftol = st.cfg.fd_tol if eng.fd_used else st.cfg.identity_tol
    return [
        st.rec("tractor curvature is skew-adjoint", "tractor curvature", pairs, ftol),
        st.rec("third component of R(V,W)xi vanishes", "curvature of xi", third, ftol),
    ]


def change_law_records(st: Setting, cs: CompatibleStructure, t: ScreenForm, tb: ScreenForm, lab: str) -> list[CheckRecord]:
    tol = st.cfg.identity_tol
    h = st.struct.h
    out = []
    ct, ctb = cs.at(t), cs.at(tb)
    L = L_field(t, tb)
    hLL = h(L, L)
    Xs = list(t.frame) + [t.project(st.extra_field)]
    pairs = []
    for W in st.fields:
        for X in Xs:
            lhs = ctb.nabla(W, tb.project(X))
            rhs = tb.project(ct.nabla(W, X) - W.scale(tb.tau(X))) - L.scale(h(X, W))
            pairs.append((lhs, rhs))
    out.append(st.rec(f"change law for the screen connection [{lab}]", "change laws", pairs, tol))
    pairs = []
    for W in st.fields:
        lhs = ctb.D(W)
        rhs = tb.project(ct.D(W) + W.scale(mul(0.5, hLL))) - L.scale(t.tau(W)) - ctb.nabla(W, L)
        pairs.append((lhs, rhs))
    out.append(st.rec(f"change law for D [{lab}]", "change laws", pairs, tol))
    pairs = []
    PL = t.project(L)
    for W in st.fields:
        DbW = ctb.D(W)
        DW = ct.D(W)
        for X in Xs:
            lhs = h(X, DbW)
            rhs = add(h(X, DW), mul(tb.tau(X), tb.tau(W)), mul(-0.5, hLL, h(X, W)), mul(-1.0, h(X, ct.nabla(W, PL))))
            pairs.append((lhs, rhs))
    out.append(st.rec(f"consistency identity for h(X, D W) [{lab}]", "change laws", pairs, tol))
    pairs = []
    for W in st.fields:
        lhs = add(t.tau(ctb.D(W)), tb.tau(ct.D(W)))
        rhs = add(mul(-0.5, W(hLL)), mul(-0.5, add(t.tau(W), tb.tau(W)), hLL))
        pairs.append((lhs, rhs))
    out.append(st.rec(f"consistency identity for tau(D) [{lab}]", "change laws", pairs, tol))
    # Galilean extension under change of screen
    pairs = []
    for V in st.fields:
        for W in st.fields:
            lhs = galilean_extend(cs, tb, V, W)
            rhs = (tb.project(galilean_extend(cs, t, V, W)) + st.struct.Z.scale(V(tb.tau(W)))
                   - L.scale(h(V, W)))
            pairs.append((lhs, rhs))
    out.append(st.rec(f"Galilean extension change of screen [{lab}]", "Galilean extension", pairs, tol))
    return out


def galilean_records(st: Setting, cs: CompatibleStructure) -> list[CheckRecord]:
    tol = st.cfg.identity_tol
    h = st.struct.h
    Z = st.struct.Z
    out = []
    for lab, sc in (("tau0", st.base), ("tau1", st.bar)):
        conn = cs.at(sc)
        out.append(st.rec(f"Galilean: vanishing gravitational field [{lab}]", "Galilean extension",
                          [(galilean_extend(cs, sc, Z, Z), VectorField.zero(st.chart))], tol))
        pairs = []
        tors = {}
        for V in st.fields:
            for W in st.fields:
                pairs.append((V(sc.tau(W)), sc.tau(galilean_extend(cs, sc, V, W))))
        out.append(st.rec(f"Galilean: clock form parallel [{lab}]", "Galilean extension", pairs, tol))
        pairs = []
        for i, V in enumerate(st.fields):
            for W in st.fields[i + 1:]:
                tors[(i, id(W))] = T = galilean_torsion(cs, sc, V, W)
                pairs.append((sc.tau(T), exterior_derivative(sc.tau, V, W)))
        out.append(st.rec(f"Galilean: tau(Tor) = d tau [{lab}]", "Galilean extension", pairs, tol))
        pairs = []
        for X in sc.frame:
            for Y in sc.frame:
                pairs.append((h(galilean_extend(cs, sc, X, Z), Y), h(X, galilean_extend(cs, sc, Y, Z))))
        out.append(st.rec(f"Galilean: zero vorticity [{lab}]", "Galilean extension", pairs, tol))
        pairs = []
        for i, V in enumerate(st.fields):
            for W in st.fields[i + 1:]:
                T = tors[(i, id(W))]
                rhs = (conn.nabla(V, sc.project(W)) - conn.nabla(W, sc.project(V)) - sc.project(lie_bracket(V, W))
                       - b_tensor(sc, V, W))
                pairs.append((sc.project(T), rhs))
        out.append(st.rec(f"projected torsion of the Galilean extension [{lab}]", "Galilean extension", pairs, tol))
    # component match of R^T(V,W)xi and the torsion tensor, plus independence of the screen
    for lab, sc in (("tau0", st.base), ("tau1", st.bar)):
        eng = CurvatureEngine(cs, sc, st.cfg.node_budget, st.cfg.fd_fallback, st.cfg.fd_step)
        pairs = []
        for i, V in enumerate(st.coords):
            for W in st.coords[i + 1:]:
                R = eng(V, W, xi(sc))
                T = galilean_torsion(cs, sc, V, W)
                first = add(sc.tau(T), theta(cs, sc, V, W))
                pairs.append(([R.alpha, R.beta], [first, ZERO]))
                pairs.append((R.X, sc.project(T)))
        out.append(st.rec(f"curvature of xi matches torsion components [{lab}]", "curvature of xi", pairs, tol))
    pairs = []
    for i, V in enumerate(st.coords):
        for W in st.coords[i + 1:]:
            pairs.append((t_omega(cs, st.base, V, W), t_omega(cs, st.bar, V, W)))
    out.append(st.rec("torsion tensor T independent of the screen form", "torsion tensor", pairs, tol))
    out += jsym_records(st, cs)
    return out


def jsym_records(st: Setting, cs: CompatibleStructure) -> list[CheckRecord]:
    tol = st.cfg.identity_tol
    out = []
    evs = []
    for lab, sc in (("tau0", st.base), ("tau1", st.bar)):
        J = j_matrix(cs, sc)
        A = radical_endomorphism(st.struct, sc)
        sym = symmetric_part(J)
        out.append(st.rec(f"J_sym = A_Z [{lab}]", "radical endomorphism", [(sym, A)], tol))
        evs.append(np.sort_complex(np.linalg.eigvals(np.nan_to_num(matrix_values(st.s, J)))))
    r = residual(np.abs(evs[0] - evs[1]).T)
    out.append(check("J eigenvalues independent of the screen form", "radical endomorphism", r.value, 1e-7, r.valid,
                     invalid=r.invalid))
    return out


def sasakian_records(st: Setting) -> list[CheckRecord]:
    model = st.model
    cs = model.cs
    tol = st.cfg.identity_tol
    sc = cs.base
    out = []
    pairs = []
    for V in st.coords:
        for W in st.coords:
            pairs.append((galilean_extend(cs, sc, V, W), tanaka_connection(model, V, W) + sc.project(V).scale(sc.tau(W))))
    out.append(st.rec("Tanaka relation for the Galilean extension", "Sasakian example", pairs, tol))
    out.append(st.rec("J = 0 on the Sasakian model", "Sasakian example", [(j_matrix(cs, sc), [[0.0] * sc.m] * sc.m)], tol))
    return out


def laws(model: Model, cfg: Config) -> list[CheckRecord]:
    st = Setting(model, cfg)
    out = az_records(st) + screen_records(st) + transition_records(st)
    if model.cs is None:
        out.append(CheckRecord("connection laws", ANCHOR_PLUMBING, 0, 0.0, cfg.identity_tol, True,
                               "skipped: no structure"))
        return out
    out += connection_records(st, model.cs)
    if "phi" in model.data:
        out += sasakian_records(st)
    return out


# ---------------------------------------------------------------------------
# curvature


def curvature_records(model: Model, cs: CompatibleStructure, cfg: Config, label: str = "",
                      full: bool = True, random_pairs: int = 0) -> list[CheckRecord]:
    """R^T table over coordinate directions and basis sections, collinearity and scale-bundle checks.

    ``random_pairs`` adds that many pairs (V, W) of random polynomial-coefficient
    fields to the full-curvature and R(V,W)xi checks.
    """
    chart = model.struct.chart
    s = Samples(chart, cfg.samples, cfg.seed)
    sc = cs.base
    eng = CurvatureEngine(cs, sc, cfg.node_budget, cfg.fd_fallback, cfg.fd_step)
    coords = chart.coordinate_fields()
    basis = basis_sections(sc)
    tag = f" [{label}]" if label else ""
    out = []
    pairs_xi, pairs_z, pairs_scale, pairs_all = [], [], [], []
    curv: dict[tuple, list[Expr]] = {}
    for a in range(chart.dim):
        for b in range(a + 1, chart.dim):
            for name, sec in basis:
                if not full and a != 0 and name != "xi":
                    continue
                R = eng(coords[a], coords[b], sec)
                comps = R.components()
                curv[(a, b, name)] = comps
                pairs_all.append((comps, [0.0] * len(comps)))
                if name == "xi":
                    pairs_xi.append((comps[1:], [0.0] * (len(comps) - 1)))
                if a == 0:
                    pairs_scale.append((comps, [0.0] * len(comps)))
                    if name.startswith("Phi"):
                        pairs_z.append((comps[1:], [0.0] * (len(comps) - 1)))
    seed = chart.seed if cfg.seed is None else cfg.seed
    rng = np.random.default_rng(seed + 31337)
    for _ in range(random_pairs):
        V, W = random_vector_field(chart, rng), random_vector_field(chart, rng)
        for name, sec in basis:
            comps = eng(V, W, sec).components()
            pairs_all.append((comps, [0.0] * len(comps)))
            if name == "xi":
                pairs_xi.append((comps[1:], [0.0] * (len(comps) - 1)))
    ftol = cfg.fd_tol if eng.fd_used else cfg.tol
    note = "finite-difference fallback engaged" if eng.fd_used else ""
    rnote = "; ".join(x for x in (note, f"includes {random_pairs} random (V, W) pair(s)" if random_pairs else "") if x)
    z_is_coordinate = _is_first_coordinate_field(model.struct.Z)
    if full:
        r = field_residual(s, pairs_all)
        out.append(check(f"tractor curvature vanishes (all components){tag}", "flat model", r.value, ftol, r.valid,
                         rnote, r.invalid))
    r = field_residual(s, pairs_xi)
    out.append(check(f"R(V,W)xi collinear with xi{tag}", "normalization condition 1", r.value, ftol, r.valid,
                     rnote, r.invalid))
    if z_is_coordinate:
        r = field_residual(s, pairs_z)
        out.append(check(f"R(Z,V)Phi(W) collinear with xi{tag}", "normalization condition 2", r.value, ftol,
                         r.valid, note, r.invalid))
        r = field_residual(s, pairs_scale)
        out.append(check(f"scale-bundle criterion R(Z,V)T = 0{tag}", "scale bundle", r.value, ftol, r.valid,
                         note, r.invalid))
    else:
        out += scale_bundle_records(model, cs, cfg, label)
    return out


def _is_first_coordinate_field(Z: VectorField) -> bool:
    c = Z.comps
    return c[0].is_const and c[0].data == 1.0 and all(x.is_zero() for x in c[1:])


def scale_bundle_records(model: Model, cs: CompatibleStructure, cfg: Config, label: str = "") -> list[CheckRecord]:
    """R^T(Z, ∂_a) s over basis sections, Z the radical field."""
    chart = model.struct.chart
    s = Samples(chart, cfg.samples, cfg.seed)
    sc = cs.base
    eng = CurvatureEngine(cs, sc, cfg.node_budget, cfg.fd_fallback, cfg.fd_step)
    Z = model.struct.Z
    pairs, pairs_z = [], []
    for V in chart.coordinate_fields():
        for name, sec in basis_sections(sc):
            comps = eng(Z, V, sec).components()
            pairs.append((comps, [0.0] * len(comps)))
            if name.startswith("Phi"):
                pairs_z.append((comps[1:], [0.0] * (len(comps) - 1)))
    ftol = cfg.fd_tol if eng.fd_used else cfg.tol
    note = "finite-difference fallback engaged" if eng.fd_used else ""
    tag = f" [{label}]" if label else ""
    r1 = field_residual(s, pairs_z)
    r2 = field_residual(s, pairs)
    return [
        check(f"R(Z,V)Phi(W) collinear with xi{tag}", "normalization condition 2", r1.value, ftol, r1.valid, note,
              r1.invalid),
        check(f"scale-bundle criterion R(Z,V)T = 0{tag}", "scale bundle", r2.value, ftol, r2.valid, note, r2.invalid),
    ]


def curvature_table(model: Model, cs: CompatibleStructure, cfg: Config) -> list[dict]:
    """Max |component| of R^T(∂_a, ∂_b) s per basis section, for reporting."""
    chart = model.struct.chart
    s = Samples(chart, cfg.samples, cfg.seed)
    sc = cs.base
    eng = CurvatureEngine(cs, sc, cfg.node_budget, cfg.fd_fallback, cfg.fd_step)
    coords = chart.coordinate_fields()
    rows = []
    for a in range(chart.dim):
        for b in range(a + 1, chart.dim):
            for name, sec in basis_sections(sc):
                R = eng(coords[a], coords[b], sec)
                vals = s.many(R.components())
                mx = lambda v: float(np.nanmax(np.abs(v))) if v.size else 0.0  # noqa: E731
                rows.append({"V": chart.coords[a], "W": chart.coords[b], "section": name,
                             "alpha": mx(vals[0]), "X": mx(vals[1:-1]), "beta": mx(vals[-1])})
    return rows


def torsion_records(model: Model, cs: CompatibleStructure, cfg: Config, label: str = "") -> list[CheckRecord]:
    chart = model.struct.chart
    s = Samples(chart, cfg.samples, cfg.seed)
    coords = chart.coordinate_fields()
    pairs = []
    for i, V in enumerate(coords):
        for W in coords[i + 1:]:
            pairs.append((t_omega(cs, cs.base, V, W), VectorField.zero(chart)))
    r = field_residual(s, pairs)
    tag = f" [{label}]" if label else ""
    return [check(f"torsion tensor T vanishes{tag}", "torsion tensor", r.value, cfg.tol, r.valid, invalid=r.invalid)]


__all__ = ["Setting", "laws", "curvature_records", "scale_bundle_records", "curvature_table", "torsion_records",
           "az_records", "screen_records", "transition_records", "connection_records", "classify_az"]
