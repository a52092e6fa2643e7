"""The standard tractor bundle in τ-splittings.

A section is a triple (α, X, β) relative to a screen form τ, where X is a
vector field in An(τ) stored by its coordinate components. The connection
data of a lightlike-compatible structure are stored once, at a base screen
τ₀; the screen connection ∇^τ and the morphism D^τ for any other τ are
derived on demand from the change laws.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .calculus.expr import ONE, ZERO, Expr, add, as_expr, finite_differences, mul, node_count
from .calculus.fields import (
    OneForm,
    Samples,
    VectorField,
    combine,
    exterior_derivative,
    lie_bracket,
    residual,
)
from .screen import L_field, ScreenForm


class CompatibleStructure:
    """Connection coefficients Γ and morphism components D0 at a base screen τ₀.

    ``gamma[a][i][j] = h(∇^{τ₀}_{∂_a} E_i, E_j)`` and
    ``D0[a][j] = h(D^{τ₀}(∂_a), E_j)`` in the base frame. Only the strict
    upper triangle of each Γ_a is kept; the lower triangle is its negative.
    """

    def __init__(self, base: ScreenForm, gamma: Sequence[Sequence[Sequence]], D0: Sequence[Sequence]):
        n, m = base.chart.dim, base.m
        if len(gamma) != n or any(len(g) != m or any(len(r) != m for r in g) for g in gamma):
            raise ValueError(f"gamma must be {n} matrices of size {m}x{m}")
        if len(D0) != n or any(len(r) != m for r in D0):
            raise ValueError(f"D0 must be {n}x{m}")
        self.base = base
        self._upper = [{(i, j): as_expr(g[i][j]) for i in range(m) for j in range(i + 1, m)} for g in gamma]
        self.D0 = [[as_expr(x) for x in row] for row in D0]
        self._derived: dict[tuple, ScreenConnection] = {}

    @property
    def m(self) -> int:
        return self.base.m

    def gamma(self, a: int, i: int, j: int) -> Expr:
        if i == j:
            return ZERO
        if i < j:
            return self._upper[a][(i, j)]
        return mul(-1.0, self._upper[a][(j, i)])

    def gamma_matrix(self, a: int) -> list[list[Expr]]:
        return [[self.gamma(a, i, j) for j in range(self.m)] for i in range(self.m)]

    def at(self, screen: ScreenForm) -> ScreenConnection:
        """(∇^τ, D^τ) for the given screen, derived from the base data when τ ≠ τ₀."""
        if screen.struct is not self.base.struct:
            raise ValueError("screen belongs to a different structure")
        key = screen.key()
        conn = self._derived.get(key)
        if conn is None:
            if screen.same_splitting(self.base):
                conn = BaseConnection(self)
            else:
                conn = DerivedConnection(self, screen)
            self._derived[key] = conn
        return conn

    def perturbed(self, rng: np.random.Generator, eps: float) -> CompatibleStructure:
        """Γ_a += eps·A_a with random constant antisymmetric A_a."""
        m = self.m
        gamma = []
        for a in range(self.base.chart.dim):
            g = self.gamma_matrix(a)
            skew = rng.uniform(-1, 1, size=(m, m))
            skew = skew - skew.T
            gamma.append([[add(g[i][j], eps * skew[i, j]) for j in range(m)] for i in range(m)])
        return CompatibleStructure(self.base, gamma, self.D0)


def antisymmetry_residual(gamma: Sequence[Sequence[Sequence[Expr]]], s: Samples):
    """Pointwise residual of Γ_a + Γ_aᵀ for full coefficient matrices."""
    lhs = [add(g[i][j], g[j][i]) for g in gamma for i in range(len(g)) for j in range(len(g))]
    return residual(s.many(lhs)) if lhs else residual(np.zeros((1, s.count)))


class ScreenConnection:
    screen: ScreenForm

    def nabla(self, W: VectorField, X: VectorField) -> VectorField:
        raise NotImplementedError

    def D(self, W: VectorField) -> VectorField:
        raise NotImplementedError


class BaseConnection(ScreenConnection):
    def __init__(self, cs: CompatibleStructure):
        self.cs = cs
        self.screen = cs.base
        self._gw: dict[tuple, list[list[Expr]]] = {}

    def _contract(self, W: VectorField) -> list[list[Expr]]:
        key = tuple(c.idx for c in W.comps)
        gw = self._gw.get(key)
        if gw is None:
            m = self.cs.m
            active = [a for a, c in enumerate(W.comps) if not c.is_zero()]
            gw = [[add(*(mul(W.comps[a], self.cs.gamma(a, i, j)) for a in active)) for j in range(m)]
                  for i in range(m)]
            self._gw[key] = gw
        return gw

    def nabla(self, W: VectorField, X: VectorField) -> VectorField:
        """∇_W X = Σ_j (W(x_j) + Σ_i x_i Γ_W[i][j]) E_j with x_i = h(X, E_i)."""
        if X.is_zero():
            return X
        x = self.screen.components(X)
        gw = self._contract(W)
        m = len(x)
        out = [add(W(x[j]), *(mul(x[i], gw[i][j]) for i in range(m) if not x[i].is_zero())) for j in range(m)]
        return self.screen.assemble(out)

    def D(self, W: VectorField) -> VectorField:
        m = self.cs.m
        active = [a for a, c in enumerate(W.comps) if not c.is_zero()]
        comps = [add(*(mul(W.comps[a], self.cs.D0[a][j]) for a in active)) for j in range(m)]
        return self.screen.assemble(comps)


class DerivedConnection(ScreenConnection):
    """Data at τ obtained from τ₀ by the change laws with L = L_{τ₀,τ}.

    ∇^τ_W Y = P^τ(∇^{τ₀}_W Y₀ − τ(Y₀) W) − h(Y₀, W) L with Y₀ = P^{τ₀} Y, and
    D^τ(W) = P^τ(D^{τ₀}(W) + ½h(L,L) W) − τ₀(W) L − ∇^τ_W L.
    """

    def __init__(self, cs: CompatibleStructure, screen: ScreenForm):
        self.cs = cs
        self.screen = screen
        self.base = cs.at(cs.base)
        self.L = L_field(cs.base, screen)
        h = screen.struct.h
        self.hLL = h(self.L, self.L)

    def nabla(self, W: VectorField, X: VectorField) -> VectorField:
        if X.is_zero():
            return X
        h = self.screen.struct.h
        X0 = self.cs.base.project(X)
        inner = self.base.nabla(W, X0) - W.scale(self.screen.tau(X0))
        return self.screen.project(inner) - self.L.scale(h(X0, W))

    def D(self, W: VectorField) -> VectorField:
        tau0 = self.cs.base.tau
        head = self.screen.project(self.base.D(W) + W.scale(mul(0.5, self.hLL)))
        return head - self.L.scale(tau0(W)) - self.nabla(W, self.L)


def derive_structure(cs: CompatibleStructure, screen: ScreenForm) -> ScreenConnection:
    return cs.at(screen)


# ---------------------------------------------------------------------------
# sections


@dataclass(frozen=True, eq=False)
class TractorSection:
    screen: ScreenForm
    alpha: Expr
    X: VectorField
    beta: Expr

    def components(self) -> list[Expr]:
        return [self.alpha, *self.X.comps, self.beta]

    def __add__(self, other: TractorSection) -> TractorSection:
        _same_screen(self, other)
        return TractorSection(self.screen, add(self.alpha, other.alpha), self.X + other.X, add(self.beta, other.beta))

    def __sub__(self, other: TractorSection) -> TractorSection:
        _same_screen(self, other)
        return TractorSection(self.screen, add(self.alpha, mul(-1.0, other.alpha)), self.X - other.X,
                              add(self.beta, mul(-1.0, other.beta)))

    def scale(self, f) -> TractorSection:
        return TractorSection(self.screen, mul(f, self.alpha), self.X.scale(f), mul(f, self.beta))


def _same_screen(s1: TractorSection, s2: TractorSection) -> None:
    if not s1.screen.same_splitting(s2.screen):
        raise ValueError("tractor sections are expressed in different splittings")


def section(screen: ScreenForm, alpha, X: VectorField | None, beta) -> TractorSection:
    return TractorSection(screen, as_expr(alpha), X if X is not None else VectorField.zero(screen.chart), as_expr(beta))


def xi(screen: ScreenForm) -> TractorSection:
    return section(screen, ONE, None, ZERO)


def eta(screen: ScreenForm) -> TractorSection:
    return section(screen, ZERO, None, ONE)


def phi(screen: ScreenForm, W: VectorField) -> TractorSection:
    """Φ(W) = (τ(W), P^τ W, 0)."""
    return section(screen, screen.tau(W), screen.project(W), ZERO)


def phi_inverse(s: TractorSection) -> VectorField:
    """Inverse of Φ on sections with vanishing third slot."""
    return s.X + s.screen.struct.Z.scale(s.alpha)


def basis_sections(screen: ScreenForm) -> list[tuple[str, TractorSection]]:
    out = [("xi", xi(screen))]
    out += [(f"Phi(E{i + 1})", phi(screen, E)) for i, E in enumerate(screen.frame)]
    out.append(("eta", eta(screen)))
    return out


def tractor_metric(s1: TractorSection, s2: TractorSection) -> Expr:
    """𝐡 = α₁β₂ + β₁α₂ + h(X₁, X₂)."""
    _same_screen(s1, s2)
    h = s1.screen.struct.h
    return add(mul(s1.alpha, s2.beta), mul(s1.beta, s2.alpha), h(s1.X, s2.X))


def transition(tau: ScreenForm, taubar: ScreenForm, s: TractorSection) -> TractorSection:
    """F_{τ,τ̄}: (α, X, β) ↦ (α + τ̄(X) − ½h(L,L)β, P^{τ̄}X + βL, β), L = L_{τ,τ̄}."""
    if not s.screen.same_splitting(tau):
        raise ValueError("section is not expressed in the source splitting")
    L = L_field(tau, taubar)
    h = tau.struct.h
    alpha = add(s.alpha, taubar.tau(s.X), mul(-0.5, h(L, L), s.beta))
    X = taubar.project(s.X) + L.scale(s.beta)
    return TractorSection(taubar, alpha, X, s.beta)


def tractor_connection(cs: CompatibleStructure, screen: ScreenForm, W: VectorField, s: TractorSection) -> TractorSection:
    """∇^T_W (α, X, β) in the τ-splitting:

    (W(α) + ατ(W) − h(X, D^τW),  αP^τW + βD^τW + ∇^τ_W X,  W(β) − βτ(W) − h(X, W)).
    """
    if not s.screen.same_splitting(screen):
        raise ValueError("section is not expressed in this splitting")
    conn = cs.at(screen)
    h = screen.struct.h
    tw = screen.tau(W)
    alpha, X, beta = s.alpha, s.X, s.beta
    need_d = not (X.is_zero() and beta.is_zero())
    DW = conn.D(W) if need_d else None
    if X.is_zero():
        a_new = add(W(alpha), mul(alpha, tw))
        b_new = add(W(beta), mul(-1.0, beta, tw))
    else:
        a_new = add(W(alpha), mul(alpha, tw), mul(-1.0, h(X, DW)))
        b_new = add(W(beta), mul(-1.0, beta, tw), mul(-1.0, h(X, W)))
    terms = []
    if not alpha.is_zero():
        terms.append((alpha, screen.project(W)))
    if not beta.is_zero():
        terms.append((beta, DW))
    Xn = conn.nabla(W, X)
    if terms:
        Xn = Xn + combine(screen.chart, terms)
    return TractorSection(screen, a_new, Xn, b_new)


class CurvatureEngine:
    """R^T(V,W)s = ∇_V∇_W s − ∇_W∇_V s − ∇_{[V,W]} s with a node budget.

    First derivatives ∇_W s are cached. When the projected size of the second
    derivative exceeds the budget and the fallback is enabled, the outer
    derivative is taken by central differences at evaluation time.
    """

    def __init__(self, cs: CompatibleStructure, screen: ScreenForm, node_budget: int = 2_000_000,
                 fd_fallback: bool = True, fd_step: float = 1e-5):
        self.cs = cs
        self.screen = screen
        self.node_budget = node_budget
        self.fd_fallback = fd_fallback
        self.fd_step = fd_step
        self.fd_used = False
        self.over_budget = False
        self._first: dict[tuple, TractorSection] = {}

    def first(self, W: VectorField, s: TractorSection) -> TractorSection:
        key = (tuple(c.idx for c in W.comps), id(s))
        hit = self._first.get(key)
        if hit is None:
            hit = tractor_connection(self.cs, self.screen, W, s)
            self._first[key] = (hit, s)  # keep s alive so id() stays unique
            return hit
        return hit[0]

    def _second(self, V: VectorField, inner: TractorSection) -> TractorSection:
        size = node_count(inner.components())
        if size * V.chart.dim > self.node_budget:
            if not self.fd_fallback:
                self.over_budget = True
                raise BudgetExceeded(size * V.chart.dim, self.node_budget)
            self.fd_used = True
            with finite_differences(self.fd_step):
                return tractor_connection(self.cs, self.screen, V, inner)
        return tractor_connection(self.cs, self.screen, V, inner)

    def __call__(self, V: VectorField, W: VectorField, s: TractorSection) -> TractorSection:
        a = self._second(V, self.first(W, s))
        b = self._second(W, self.first(V, s))
        out = a - b
        br = lie_bracket(V, W)
        if not br.is_zero():
            out = out - tractor_connection(self.cs, self.screen, br, s)
        return out


class BudgetExceeded(RuntimeError):
    def __init__(self, size: int, budget: int):
        super().__init__(f"expression size {size} exceeds node budget {budget}")
        self.size = size
        self.budget = budget


def tractor_curvature(cs: CompatibleStructure, screen: ScreenForm, V: VectorField, W: VectorField,
                      s: TractorSection, node_budget: int = 2_000_000, fd_fallback: bool = True) -> TractorSection:
    return CurvatureEngine(cs, screen, node_budget, fd_fallback)(V, W, s)


# ---------------------------------------------------------------------------
# Galilean extension and derived tensors


def galilean_extend(cs: CompatibleStructure, screen: ScreenForm, V: VectorField, W: VectorField) -> VectorField:
    """∇̃^τ_V W = V(τ(W)) Z + τ(W) P^τ V + ∇^τ_V(P^τ W)."""
    conn = cs.at(screen)
    Z = screen.struct.Z
    tw = screen.tau(W)
    out = conn.nabla(V, screen.project(W))
    return out + combine(screen.chart, [(V(tw), Z), (tw, screen.project(V))])


def galilean_torsion(cs: CompatibleStructure, screen: ScreenForm, V: VectorField, W: VectorField) -> VectorField:
    return galilean_extend(cs, screen, V, W) - galilean_extend(cs, screen, W, V) - lie_bracket(V, W)


def theta(cs: CompatibleStructure, screen: ScreenForm, V: VectorField, W: VectorField) -> Expr:
    """θ^τ(V,W) = h(V, D^τW) − h(W, D^τV)."""
    conn = cs.at(screen)
    h = screen.struct.h
    return add(h(V, conn.D(W)), mul(-1.0, h(W, conn.D(V))))


def b_tensor(screen: ScreenForm, V: VectorField, W: VectorField) -> VectorField:
    """B^τ(V,W) = τ(V) W − τ(W) V."""
    return combine(screen.chart, [(screen.tau(V), W), (mul(-1.0, screen.tau(W)), V)])


def t_omega(cs: CompatibleStructure, screen: ScreenForm, V: VectorField, W: VectorField) -> VectorField:
    """𝐓(V,W) = P^τ T̃or^τ(V,W) + (dτ(V,W) + θ^τ(V,W)) Z; independent of τ."""
    tor = galilean_torsion(cs, screen, V, W)
    scal = add(exterior_derivative(screen.tau, V, W), theta(cs, screen, V, W))
    return screen.project(tor) + screen.struct.Z.scale(scal)


def j_matrix(cs: CompatibleStructure, screen: ScreenForm) -> list[list[Expr]]:
    """J_ij = h(∇^τ_Z E_i − [Z, E_i], E_j) in the frame of An(τ)."""
    conn = cs.at(screen)
    Z = screen.struct.Z
    h = screen.struct.h
    rows = []
    for Ei in screen.frame:
        JE = conn.nabla(Z, Ei) - lie_bracket(Z, Ei)
        hj = h.lower(JE)
        rows.append([hj(Ej) for Ej in screen.frame])
    return rows


def symmetric_part(mat: Sequence[Sequence[Expr]]) -> list[list[Expr]]:
    m = len(mat)
    return [[mul(0.5, add(mat[i][j], mat[j][i])) for j in range(m)] for i in range(m)]
