"""Screen forms τ with τ(Z) = 1, their projectors and orthonormal frames, and
the difference fields L and K between two screens."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .calculus.expr import ONE, Expr, add, mul, sqrt
from .calculus.fields import (
    LightlikeStructure,
    OneForm,
    Samples,
    VectorField,
    combine,
    lie_derivative_metric,
    random_function,
    residual,
)

PIVOT_TOL = 1e-12
ZNORM_TOL = 1e-9


class ScreenError(ValueError):
    pass


class ScreenForm:
    """A screen 1-form with the orthonormal frame E_1..E_m of its kernel An(τ)."""

    def __init__(self, struct: LightlikeStructure, tau: OneForm, frame: Sequence[VectorField], pivots: Sequence[int]):
        self.struct = struct
        self.tau = tau
        self.frame = tuple(frame)
        self.pivots = tuple(pivots)

    @property
    def chart(self):
        return self.struct.chart

    @property
    def m(self) -> int:
        return len(self.frame)

    def key(self) -> tuple[int, ...]:
        # the splitting depends on τ alone, not on the frame chosen for An(τ)
        return self.tau.key()

    def same_splitting(self, other: ScreenForm) -> bool:
        return self is other or self.key() == other.key()

    def project(self, V: VectorField) -> VectorField:
        """P^τ(V) = V − τ(V) Z."""
        t = self.tau(V)
        if t.is_zero():
            return V
        return V - self.struct.Z.scale(t)

    def components(self, X: VectorField) -> list[Expr]:
        """Frame components h(X, E_i); exact for X in An(τ)."""
        hx = self.struct.h.lower(X)
        return [hx(E) for E in self.frame]

    def assemble(self, comps: Sequence[Expr]) -> VectorField:
        return combine(self.chart, list(zip(comps, self.frame)))


def make_screen(
    struct: LightlikeStructure,
    tau: OneForm,
    pivot_order: Sequence[int] | None = None,
    samples: Samples | None = None,
    tol: float = 1e-9,
) -> ScreenForm:
    """Project coordinate fields with P^τ and Gram–Schmidt them against h.

    Candidates are taken in ``pivot_order`` (ascending coordinate index by
    default); a candidate whose orthogonalized h-norm² falls below 1e−12 at
    the chart centre is skipped, which discards the Z-direction.
    """
    chart = struct.chart
    s = samples if samples is not None else Samples(chart, 20)
    r = residual(s(tau(struct.Z)), 1.0)
    if not (r.value < tol) or r.invalid:
        raise ScreenError(f"screen form must satisfy tau(Z) = 1; residual {r.value:.3e}")
    centre = Samples(chart, points=chart.center()[None, :])
    order = list(range(chart.dim)) if pivot_order is None else list(pivot_order)
    h = struct.h
    frame: list[VectorField] = []
    pivots: list[int] = []
    for i in order:
        if len(frame) == struct.m:
            break
        v = chart.coordinate_field(i)
        t = tau(v)
        if not t.is_zero():
            v = v - struct.Z.scale(t)
        if v.is_zero():
            continue
        hv = h.lower(v)
        coeffs = [hv(E) for E in frame]
        v = v - combine(chart, list(zip(coeffs, frame))) if frame else v
        norm2 = h(v, v)
        if float(centre(norm2)[0]) < PIVOT_TOL:
            continue
        frame.append(v.scale(sqrt(norm2) ** -1) if norm2 is not ONE else v)
        pivots.append(i)
    if len(frame) != struct.m:
        raise ScreenError(f"Gram-Schmidt produced {len(frame)} screen vectors, expected {struct.m}")
    return ScreenForm(struct, tau, frame, pivots)


def project(screen: ScreenForm, V: VectorField) -> VectorField:
    return screen.project(V)


def L_field(tau: ScreenForm, taubar: ScreenForm) -> VectorField:
    """L_{τ,τ̄} = Σ τ(E_i) E_i over the frame of An(τ̄)."""
    if tau.struct is not taubar.struct:
        raise ValueError("screens belong to different structures")
    if tau.same_splitting(taubar):
        return VectorField.zero(tau.chart)
    return combine(tau.chart, [(tau.tau(E), E) for E in taubar.frame])


def K_field(tau: ScreenForm, taubar: ScreenForm) -> VectorField:
    """K_{τ,τ̄} = L − ½ h(L,L) Z."""
    L = L_field(tau, taubar)
    if L.is_zero():
        return L
    h = tau.struct.h
    return L - tau.struct.Z.scale(mul(0.5, h(L, L)))


def radical_endomorphism(struct: LightlikeStructure, screen: ScreenForm) -> list[list[Expr]]:
    """Matrix of A_Z in the screen frame: M_ij = ½ (L_Z h)(E_i, E_j)."""
    lz = lie_derivative_metric(struct.h, struct.Z)
    return [[mul(0.5, lz(Ei, Ej)) for Ej in screen.frame] for Ei in screen.frame]


def matrix_values(s: Samples, mat: Sequence[Sequence[Expr]]) -> np.ndarray:
    """Evaluate an m×m expression matrix at every sample, shape (N, m, m)."""
    m = len(mat)
    vals = s.many([x for row in mat for x in row])
    return vals.reshape(m, m, -1).transpose(2, 0, 1)


def default_screen_form(struct: LightlikeStructure) -> OneForm:
    """τ = Z♭/|Z|² with the Euclidean coordinate dual; satisfies τ(Z) = 1 wherever Z ≠ 0."""
    Z = struct.Z
    norm2 = add(*(mul(c, c) for c in Z.comps))
    inv = norm2**-1 if norm2 is not ONE else ONE
    return OneForm(struct.chart, [mul(c, inv) for c in Z.comps])


def random_screen_form(base: OneForm, struct: LightlikeStructure, rng: np.random.Generator, scale: float = 0.4) -> OneForm:
    """τ̄ = τ₀ + β − β(Z) τ₀ with β a random smooth 1-form, so τ̄(Z) = 1 exactly."""
    chart = struct.chart
    beta = OneForm(chart, [random_function(chart, rng, scale) for _ in range(chart.dim)])
    bz = beta(struct.Z)
    return OneForm(chart, [add(t, b, mul(-1.0, bz, t)) for t, b in zip(base.comps, beta.comps)])


def screen_checks(screen: ScreenForm, s: Samples, tol: float = 1e-9) -> list:
    from .report import check

    h = screen.struct.h
    m = screen.m
    gram = [[h(Ei, Ej) for Ej in screen.frame] for Ei in screen.frame]
    eye = np.eye(m)
    g = matrix_values(s, gram)
    r1 = residual(g.transpose(1, 2, 0), eye[:, :, None])
    r2 = residual(s.many([screen.tau(E) for E in screen.frame]))
    r3 = residual(s(screen.tau(screen.struct.Z)), 1.0)
    return [
        check("screen: tau(Z) = 1", "screen forms", r3.value, tol, r3.valid, invalid=r3.invalid),
        check("screen: frame orthonormal", "screen frame", r1.value, tol, r1.valid, invalid=r1.invalid),
        check("screen: tau(E_i) = 0", "screen frame", r2.value, tol, r2.valid, invalid=r2.invalid),
    ]


__all__ = [
    "ScreenForm",
    "ScreenError",
    "make_screen",
    "project",
    "L_field",
    "K_field",
    "radical_endomorphism",
    "default_screen_form",
    "random_screen_form",
    "matrix_values",
    "screen_checks",
]
