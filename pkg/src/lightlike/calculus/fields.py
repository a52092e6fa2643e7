"""Charts, tensor fields in coordinate components, and sampled residuals."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..report import CheckRecord, check
from .expr import (
    ONE,
    ZERO,
    DomainError,
    Evaluator,
    Expr,
    add,
    as_expr,
    cos,
    diff,
    guard_nodes,
    mul,
    partial,
    sin,
    var,
)

SHRINK = 0.05


@dataclass(frozen=True)
class Chart:
    coords: tuple[str, ...]
    domain: tuple[tuple[float, float], ...]
    seed: int = 0

    def __post_init__(self):
        if len(self.coords) != len(self.domain):
            raise ValueError("one domain interval per coordinate is required")
        if len(set(self.coords)) != len(self.coords):
            raise ValueError("coordinate names must be distinct")
        for lo, hi in self.domain:
            if not lo < hi:
                raise ValueError(f"empty domain interval [{lo}, {hi}]")

    @property
    def dim(self) -> int:
        return len(self.coords)

    def x(self, i: int) -> Expr:
        return var(self.coords[i])

    def center(self) -> np.ndarray:
        return np.array([(lo + hi) / 2 for lo, hi in self.domain])

    def sample(self, count: int, seed: int | None = None) -> np.ndarray:
        """Uniform points in the domain box shrunk by 5% per side, shape (count, n)."""
        rng = np.random.default_rng(self.seed if seed is None else seed)
        lo = np.array([a for a, _ in self.domain])
        hi = np.array([b for _, b in self.domain])
        width = hi - lo
        u = rng.uniform(size=(count, self.dim))
        return lo + width * (SHRINK + (1 - 2 * SHRINK) * u)

    def env(self, points: np.ndarray) -> dict[str, np.ndarray]:
        points = np.atleast_2d(points)
        return {name: points[:, i] for i, name in enumerate(self.coords)}

    def coordinate_field(self, i: int) -> VectorField:
        return VectorField(self, tuple(ONE if j == i else ZERO for j in range(self.dim)))

    def coordinate_fields(self) -> list[VectorField]:
        return [self.coordinate_field(i) for i in range(self.dim)]

    def coordinate_form(self, i: int) -> OneForm:
        return OneForm(self, tuple(ONE if j == i else ZERO for j in range(self.dim)))


def _same_chart(a, b) -> None:
    if a.chart is not b.chart and a.chart != b.chart:
        raise ValueError("fields live on different charts")


class VectorField:
    __slots__ = ("chart", "comps")

    def __init__(self, chart: Chart, comps: Sequence):
        if len(comps) != chart.dim:
            raise ValueError(f"expected {chart.dim} components, got {len(comps)}")
        self.chart = chart
        self.comps = tuple(as_expr(c) for c in comps)

    @classmethod
    def zero(cls, chart: Chart) -> VectorField:
        return cls(chart, (ZERO,) * chart.dim)

    def __add__(self, other: VectorField) -> VectorField:
        _same_chart(self, other)
        return VectorField(self.chart, [add(a, b) for a, b in zip(self.comps, other.comps)])

    def __sub__(self, other: VectorField) -> VectorField:
        _same_chart(self, other)
        return VectorField(self.chart, [add(a, mul(-1.0, b)) for a, b in zip(self.comps, other.comps)])

    def __neg__(self) -> VectorField:
        return self.scale(-1.0)

    def scale(self, f) -> VectorField:
        f = as_expr(f)
        if f.is_zero():
            return VectorField.zero(self.chart)
        return VectorField(self.chart, [mul(f, c) for c in self.comps])

    __rmul__ = scale

    def __call__(self, f: Expr) -> Expr:
        """Directional derivative V(f)."""
        f = as_expr(f)
        return add(*(mul(c, partial(f, name)) for c, name in zip(self.comps, self.chart.coords) if not c.is_zero()))

    def is_zero(self) -> bool:
        return all(c.is_zero() for c in self.comps)

    def __repr__(self) -> str:
        return f"VectorField({list(self.comps)})"


def combine(chart: Chart, terms: Sequence[tuple[Expr, VectorField]]) -> VectorField:
    """Sum of f_i * V_i built with one n-ary addition per component."""
    comps = []
    for k in range(chart.dim):
        comps.append(add(*(mul(f, V.comps[k]) for f, V in terms if not V.comps[k].is_zero())))
    return VectorField(chart, comps)


class OneForm:
    __slots__ = ("chart", "comps")

    def __init__(self, chart: Chart, comps: Sequence):
        if len(comps) != chart.dim:
            raise ValueError(f"expected {chart.dim} components, got {len(comps)}")
        self.chart = chart
        self.comps = tuple(as_expr(c) for c in comps)

    def __call__(self, V: VectorField) -> Expr:
        _same_chart(self, V)
        return add(*(mul(a, b) for a, b in zip(self.comps, V.comps) if not (a.is_zero() or b.is_zero())))

    def __add__(self, other: OneForm) -> OneForm:
        return OneForm(self.chart, [add(a, b) for a, b in zip(self.comps, other.comps)])

    def __sub__(self, other: OneForm) -> OneForm:
        return OneForm(self.chart, [add(a, mul(-1.0, b)) for a, b in zip(self.comps, other.comps)])

    def scale(self, f) -> OneForm:
        return OneForm(self.chart, [mul(f, c) for c in self.comps])

    def key(self) -> tuple[int, ...]:
        return tuple(c.idx for c in self.comps)

    def __repr__(self) -> str:
        return f"OneForm({list(self.comps)})"


def exterior_derivative(tau: OneForm, V: VectorField, W: VectorField) -> Expr:
    """dτ(V,W) = V(τ(W)) − W(τ(V)) − τ([V,W])."""
    return add(V(tau(W)), mul(-1.0, W(tau(V))), mul(-1.0, tau(lie_bracket(V, W))))


class MetricField:
    """Symmetric 2-tensor; only the lower triangle is stored."""

    __slots__ = ("chart", "rows")

    def __init__(self, chart: Chart, lower: Sequence[Sequence]):
        n = chart.dim
        if len(lower) != n or any(len(lower[i]) != i + 1 for i in range(n)):
            raise ValueError("metric must be given as a lower triangle with rows of length 1..n")
        self.chart = chart
        self.rows = tuple(tuple(as_expr(c) for c in row) for row in lower)

    @classmethod
    def from_matrix(cls, chart: Chart, full: Sequence[Sequence]) -> MetricField:
        return cls(chart, [[full[i][j] for j in range(i + 1)] for i in range(chart.dim)])

    def entry(self, a: int, b: int) -> Expr:
        return self.rows[a][b] if b <= a else self.rows[b][a]

    def matrix(self) -> list[list[Expr]]:
        n = self.chart.dim
        return [[self.entry(a, b) for b in range(n)] for a in range(n)]

    def lower(self, V: VectorField) -> OneForm:
        n = self.chart.dim
        comps = []
        for b in range(n):
            comps.append(add(*(mul(self.entry(a, b), V.comps[a]) for a in range(n)
                               if not (V.comps[a].is_zero() or self.entry(a, b).is_zero()))))
        return OneForm(self.chart, comps)

    def __call__(self, V: VectorField, W: VectorField) -> Expr:
        return self.lower(V)(W)


def lie_bracket(V: VectorField, W: VectorField) -> VectorField:
    """[V,W]^k = V(W^k) − W(V^k)."""
    _same_chart(V, W)
    return VectorField(V.chart, [add(V(w), mul(-1.0, W(v))) for v, w in zip(V.comps, W.comps)])


def lie_derivative_metric(h: MetricField, Z: VectorField) -> MetricField:
    """(L_Z h)_ab = Z^c ∂_c h_ab + h_cb ∂_a Z^c + h_ac ∂_b Z^c."""
    chart = h.chart
    n = chart.dim
    names = chart.coords
    rows = []
    for a in range(n):
        row = []
        for b in range(a + 1):
            terms = [Z(h.entry(a, b))]
            for c in range(n):
                terms.append(mul(h.entry(c, b), diff(Z.comps[c], names[a])))
                terms.append(mul(h.entry(a, c), diff(Z.comps[c], names[b])))
            row.append(add(*terms))
        rows.append(row)
    return MetricField(chart, rows)


@dataclass(frozen=True)
class Residual:
    value: float
    valid: int
    invalid: int


def residual(actual: np.ndarray, expected: np.ndarray | float = 0.0) -> Residual:
    """Max over valid samples of |a − b|, relative to |b| where |b| > 1.

    The last axis indexes sample points; any non-finite entry marks that
    sample as a domain violation and excludes it.
    """
    a = np.asarray(actual, dtype=float)
    b = np.broadcast_to(np.asarray(expected, dtype=float), a.shape)
    if a.ndim == 0:
        a = a[None]
        b = b[None]
    flat_a = a.reshape(-1, a.shape[-1])
    flat_b = b.reshape(-1, b.shape[-1])
    ok = np.all(np.isfinite(flat_a) & np.isfinite(flat_b), axis=0)
    if not ok.any():
        return Residual(float("nan"), 0, int(a.shape[-1]))
    da = flat_a[:, ok]
    db = flat_b[:, ok]
    err = np.abs(da - db) / np.maximum(1.0, np.abs(db))
    return Residual(float(err.max()) if err.size else 0.0, int(ok.sum()), int((~ok).sum()))


class Samples:
    """Seeded sample points on a chart with a shared evaluation memo."""

    def __init__(self, chart: Chart, count: int = 20, seed: int | None = None, points: np.ndarray | None = None):
        self.chart = chart
        self.points = chart.sample(count, seed) if points is None else np.atleast_2d(np.asarray(points, float))
        self.count = len(self.points)
        self.ev = Evaluator(chart.env(self.points))

    def __call__(self, e: Expr) -> np.ndarray:
        return self.ev(e)

    def many(self, exprs: Sequence[Expr]) -> np.ndarray:
        return self.ev.many(list(exprs))

    def field(self, V: VectorField) -> np.ndarray:
        return self.ev.many(list(V.comps))


def field_residual(s: Samples, pairs: Sequence[tuple]) -> Residual:
    """Residual over pairs (lhs, rhs) of expressions, vector fields or lists of either."""
    lhs: list[Expr] = []
    rhs: list[Expr] = []
    for a, b in pairs:
        lhs.extend(_flatten(a))
        rhs.extend(_flatten(b))
    if len(lhs) != len(rhs):
        raise ValueError("mismatched shapes in residual")
    if not lhs:
        return Residual(0.0, s.count, 0)
    return residual(s.many(lhs), s.many(rhs))


def _flatten(x) -> list[Expr]:
    if isinstance(x, VectorField) or isinstance(x, OneForm):
        return list(x.comps)
    if isinstance(x, (list, tuple)):
        out = []
        for y in x:
            out.extend(_flatten(y))
        return out
    return [as_expr(x)]


def residual_check(name: str, anchor: str, s: Samples, pairs: Sequence[tuple], tol: float, notes: str = "") -> CheckRecord:
    r = field_residual(s, pairs)
    return check(name, anchor, r.value, tol, r.valid, notes, r.invalid)


# ---------------------------------------------------------------------------
# finite-difference cross-check


def _admissible(evaluator_values: list[np.ndarray], kinds: list[str]) -> np.ndarray:
    ok = None
    for kind, vals in zip(kinds, evaluator_values):
        # vals has shape (3, N): stencil minus, centre, plus
        if kind == "nonzero":
            good = np.all(np.sign(vals) == np.sign(vals[1]), axis=0) & np.all(vals != 0, axis=0)
        elif kind == "positive":
            good = np.all(vals > 0, axis=0)
        else:
            good = np.all(vals >= 0, axis=0)
        ok = good if ok is None else ok & good
    return ok


def fd_crosscheck_points(e: Expr, coord: str, chart: Chart, points: np.ndarray, step: float = 1e-5) -> np.ndarray:
    """Residuals |∂e − central difference| (relative where |∂e| > 1); NaN marks domain violations."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    i = chart.coords.index(coord)
    shift = np.zeros(chart.dim)
    shift[i] = step
    evs = [Evaluator(chart.env(points - shift)), Evaluator(chart.env(points)), Evaluator(chart.env(points + shift))]
    d = diff(e, coord)
    guards = guard_nodes(e) + guard_nodes(d)
    ok = np.ones(len(points), dtype=bool)
    if guards:
        kinds = [k for k, _ in guards]
        vals = [np.stack([ev(g) for ev in evs]) for _, g in guards]
        ok &= _admissible(vals, kinds)
    lo, mid_d, hi = evs[0](e), evs[1](d), evs[2](e)
    fd = (hi - lo) / (2 * step)
    res = np.abs(mid_d - fd) / np.maximum(1.0, np.abs(mid_d))
    ok &= np.isfinite(res)
    return np.where(ok, res, np.nan)


def fd_crosscheck(e: Expr, coord: str, point: dict[str, float], step: float = 1e-5) -> float:
    """Single-point cross-check of the symbolic derivative; raises DomainError on inadmissible stencils."""
    names = tuple(point)
    if coord not in names:
        raise ValueError(f"coordinate {coord!r} has no value in the point")
    chart = Chart(names, tuple((v - 1.0, v + 1.0) for v in point.values()))
    res = fd_crosscheck_points(e, coord, chart, np.array([list(point.values())]), step)[0]
    if not np.isfinite(res):
        raise DomainError(f"finite-difference stencil leaves the domain of the expression at {point}")
    return float(res)


# ---------------------------------------------------------------------------
# lightlike structure


@dataclass(frozen=True)
class LightlikeStructure:
    chart: Chart
    h: MetricField
    Z: VectorField

    def __post_init__(self):
        if self.chart.dim < 3:
            raise ValueError("a lightlike structure needs n = m + 1 >= 3 coordinates")

    @property
    def m(self) -> int:
        return self.chart.dim - 1

    def validate(self, samples: Samples, tol: float = 1e-9, rank_tol: float = 1e-9) -> list[CheckRecord]:
        chart = self.chart
        n = chart.dim
        hz = self.h.lower(self.Z)
        recs = [residual_check("radical: h(Z, .) = 0", "lightlike structure", samples, [(hz, [0.0] * n)], tol)]
        H = samples.many([self.h.entry(a, b) for a in range(n) for b in range(n)])
        H = H.reshape(n, n, -1).transpose(2, 0, 1)
        bad = 0
        worst_kernel = 0.0
        worst_gap = np.inf
        for k in range(H.shape[0]):
            if not np.all(np.isfinite(H[k])):
                bad += 1
                continue
            lam = np.linalg.eigvalsh(H[k])
            small = np.abs(lam) < rank_tol
            if small.sum() != 1 or np.any(lam[~small] <= rank_tol):
                worst_gap = min(worst_gap, float(lam.min()))
                worst_kernel = max(worst_kernel, np.inf)
                continue
            worst_kernel = max(worst_kernel, float(np.abs(lam[small]).max()))
            worst_gap = min(worst_gap, float(lam[~small].min()))
        valid = H.shape[0] - bad
        note = f"smallest nonzero eigenvalue {worst_gap:.3e}" if np.isfinite(worst_gap) else ""
        recs.append(check(f"signature: positive semidefinite, rank {self.m}", "lightlike structure",
                          worst_kernel, rank_tol, valid, note, bad))
        zn = samples.field(self.Z)
        norm = np.sqrt(np.sum(zn**2, axis=0))
        finite = np.isfinite(norm)
        small = int(np.sum(norm[finite] <= rank_tol))
        low = float(norm[finite].min()) if finite.any() else float("nan")
        recs.append(check("radical field Z nonvanishing", "lightlike structure", float(small), 0.5,
                          int(finite.sum()), f"residual counts samples with |Z| <= {rank_tol:g}; min |Z| = {low:.3e}",
                          int((~finite).sum())))
        return recs


# ---------------------------------------------------------------------------
# non-degenerate metrics (used by the Sasakian builder)


def symbolic_inverse(mat: Sequence[Sequence[Expr]], pivot_values: np.ndarray) -> list[list[Expr]]:
    """Gauss-Jordan inverse with pivots chosen by magnitude at a reference point."""
    n = len(mat)
    a = [[as_expr(x) for x in row] + [ONE if i == j else ZERO for j in range(n)] for i, row in enumerate(mat)]
    pv = [list(map(float, row)) + [1.0 if i == j else 0.0 for j in range(n)] for i, row in enumerate(pivot_values)]
    for col in range(n):
        r = max(range(col, n), key=lambda i: abs(pv[i][col]))
        if abs(pv[r][col]) < 1e-14:
            raise ValueError("matrix is singular at the reference point")
        a[col], a[r] = a[r], a[col]
        pv[col], pv[r] = pv[r], pv[col]
        inv = 1 / a[col][col]
        pinv = 1.0 / pv[col][col]
        a[col] = [mul(inv, x) for x in a[col]]
        pv[col] = [pinv * x for x in pv[col]]
        for i in range(n):
            if i == col or a[i][col].is_zero():
                continue
            f = a[i][col]
            pf = pv[i][col]
            a[i] = [add(x, mul(-1.0, f, y)) for x, y in zip(a[i], a[col])]
            pv[i] = [x - pf * y for x, y in zip(pv[i], pv[col])]
    return [row[n:] for row in a]


def christoffel(g: MetricField) -> list[list[list[Expr]]]:
    """Γ^k_ij = ½ g^{kl}(∂_i g_jl + ∂_j g_il − ∂_l g_ij) for a non-degenerate metric."""
    chart = g.chart
    n = chart.dim
    names = chart.coords
    centre = Samples(chart, points=chart.center()[None, :])
    gm = g.matrix()
    vals = centre.many([x for row in gm for x in row]).reshape(n, n)
    ginv = symbolic_inverse(gm, vals)
    first = [[[mul(0.5, add(diff(g.entry(j, l), names[i]), diff(g.entry(i, l), names[j]),
                            mul(-1.0, diff(g.entry(i, j), names[l]))))
               for l in range(n)] for j in range(n)] for i in range(n)]
    return [[[add(*(mul(ginv[k][l], first[i][j][l]) for l in range(n))) for j in range(n)]
             for i in range(n)] for k in range(n)]


def covariant(gamma: list[list[list[Expr]]], V: VectorField, W: VectorField) -> VectorField:
    """∇_V W for the affine connection with Christoffel symbols Γ^k_ij."""
    n = V.chart.dim
    comps = []
    for k in range(n):
        terms = [V(W.comps[k])]
        for i in range(n):
            if V.comps[i].is_zero():
                continue
            for j in range(n):
                if W.comps[j].is_zero() or gamma[k][i][j].is_zero():
                    continue
                terms.append(mul(gamma[k][i][j], V.comps[i], W.comps[j]))
        comps.append(add(*terms))
    return VectorField(V.chart, comps)


# ---------------------------------------------------------------------------
# random test data


def random_function(chart: Chart, rng: np.random.Generator, scale: float = 0.5) -> Expr:
    """A bounded smooth function mixing a low-degree polynomial and a trigonometric term."""
    n = chart.dim
    a, b = rng.integers(0, n, size=2)
    c = rng.uniform(-scale, scale, size=4)
    k = rng.uniform(0.5, 1.5)
    phase = rng.uniform(0, np.pi)
    xa, xb = chart.x(int(a)), chart.x(int(b))
    return add(c[0], mul(c[1], xa), mul(c[2], sin(add(mul(k, xb), phase))), mul(c[3], xa, cos(xb)))


def random_vector_field(chart: Chart, rng: np.random.Generator) -> VectorField:
    """Polynomial-coefficient field, degree at most two."""
    comps = []
    for _ in range(chart.dim):
        i, j = rng.integers(0, chart.dim, size=2)
        c = rng.uniform(-1, 1, size=3)
        comps.append(add(c[0], mul(c[1], chart.x(int(i))), mul(c[2], chart.x(int(i)), chart.x(int(j)))))
    return VectorField(chart, comps)
