"""The model Lie algebra o(m+1,1) with its |1|-grading, and the groups H ⊂ P.

Basis (ℓ, e_1, …, e_m, n) with bilinear form S = [[0,0,1],[0,I,0],[1,0,0]].
An algebra element has block form

    [[ a,  Zrow,  0     ],
     [ X,  A,    −Zrowᵀ ],
     [ 0,  −Xᵀ,  −a     ]]

with A skew; X spans g₋₁, (a, A) spans g₀ and Zrow spans g₁. All checks are
in floating point with an exactness tolerance of 1e−12.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .report import CheckRecord, check

EXACT = 1e-12


class MembershipError(ValueError):
    pass


def form(m: int) -> np.ndarray:
    S = np.zeros((m + 2, m + 2))
    S[0, -1] = S[-1, 0] = 1.0
    S[1:-1, 1:-1] = np.eye(m)
    return S


def element(a: float = 0.0, X=None, Zrow=None, A=None, m: int | None = None) -> np.ndarray:
    """Assemble an algebra element from its blocks; missing blocks are zero."""
    if m is None:
        for blk in (X, Zrow, A):
            if blk is not None:
                m = np.shape(blk)[0]
                break
        else:
            raise ValueError("cannot infer m")
    X = np.zeros(m) if X is None else np.asarray(X, float)
    Zrow = np.zeros(m) if Zrow is None else np.asarray(Zrow, float)
    A = np.zeros((m, m)) if A is None else np.asarray(A, float)
    M = np.zeros((m + 2, m + 2))
    M[0, 0] = a
    M[-1, -1] = -a
    M[1:-1, 0] = X
    M[-1, 1:-1] = -X
    M[0, 1:-1] = Zrow
    M[1:-1, -1] = -Zrow
    M[1:-1, 1:-1] = A
    return M


def grading_element(m: int) -> np.ndarray:
    return element(1.0, m=m)


def membership_residual(M: np.ndarray) -> float:
    S = form(M.shape[0] - 2)
    return float(np.max(np.abs(M.T @ S + S @ M)))


def group_residual(sigma: np.ndarray) -> float:
    S = form(sigma.shape[0] - 2)
    return float(np.max(np.abs(sigma.T @ S @ sigma - S)))


@dataclass(frozen=True)
class Graded:
    """g₋₁ ⊕ g₀ ⊕ g₁ components of an algebra element."""

    X: np.ndarray
    a: float
    A: np.ndarray
    Zrow: np.ndarray

    def assemble(self) -> np.ndarray:
        return element(self.a, self.X, self.Zrow, self.A)

    def part(self, k: int) -> np.ndarray:
        m = len(self.X)
        if k == -1:
            return element(X=self.X, m=m)
        if k == 0:
            return element(self.a, A=self.A, m=m)
        if k == 1:
            return element(Zrow=self.Zrow, m=m)
        return np.zeros((m + 2, m + 2))

    def h_part(self) -> np.ndarray:
        """Component in h = [g₀, g₀] ⊕ g₁, the isotropy algebra of ℓ."""
        return element(A=self.A, Zrow=self.Zrow, m=len(self.X))

    def quotient(self) -> tuple[float, np.ndarray]:
        """Image in g/h ≅ ℝ × ℝᵐ."""
        return self.a, self.X


def grade_project(M: np.ndarray, tol: float = EXACT) -> Graded:
    r = membership_residual(M)
    if r > tol:
        raise MembershipError(f"matrix is not in o(m+1,1): residual {r:.3e}")
    return Graded(M[1:-1, 0].copy(), float(M[0, 0]), M[1:-1, 1:-1].copy(), M[0, 1:-1].copy())


def bracket(M1: np.ndarray, M2: np.ndarray) -> np.ndarray:
    return M1 @ M2 - M2 @ M1


# ---------------------------------------------------------------------------
# groups


def _check_orthogonal(g: np.ndarray, tol: float = EXACT) -> None:
    r = float(np.max(np.abs(g.T @ g - np.eye(len(g)))))
    if r > tol:
        raise MembershipError(f"g is not orthogonal: residual {r:.3e}")


def h_embed(w, g) -> np.ndarray:
    """The element of H attached to the rigid motion (w, g):

    [[1, −wᵀg, −½|w|²], [0, g, w], [0, 0, 1]].
    """
    return p_embed(1.0, w, g)


def p_embed(lam: float, w, g) -> np.ndarray:
    """Element of the isotropy group P of the line through ℓ; λ = 1 gives H."""
    w = np.asarray(w, float)
    g = np.asarray(g, float)
    _check_orthogonal(g)
    if lam <= 0:
        raise ValueError("lambda must be positive")
    m = len(w)
    sig = np.zeros((m + 2, m + 2))
    sig[0, 0] = lam
    sig[0, 1:-1] = -lam * (w @ g)
    sig[0, -1] = -0.5 * lam * float(w @ w)
    sig[1:-1, 1:-1] = g
    sig[1:-1, -1] = w
    sig[-1, -1] = 1.0 / lam
    return sig


def h_parameters(sigma: np.ndarray, tol: float = 1e-10) -> tuple[np.ndarray, np.ndarray]:
    """Recover (w, g) from an element of H, validating its shape."""
    g = sigma[1:-1, 1:-1].copy()
    w = sigma[1:-1, -1].copy()
    r = float(np.max(np.abs(sigma - h_embed(w, g))))
    if r > tol:
        raise MembershipError(f"matrix is not in the image of H: residual {r:.3e}")
    return w, g


def is_orthochronous(sigma: np.ndarray) -> bool:
    """σ preserves the time cone: ⟨σ(ℓ − n), ℓ − n⟩ < 0 for the timelike vector ℓ − n."""
    m = sigma.shape[0] - 2
    t = np.zeros(m + 2)
    t[0], t[-1] = 1.0, -1.0
    return float((sigma @ t) @ form(m) @ t) < 0


def quotient_adjoint(w, g, a: float, X) -> tuple[float, np.ndarray]:
    """Ad(h) on g/h: (a, X) ↦ (a − ⟨w, gX⟩, gX)."""
    w = np.asarray(w, float)
    g = np.asarray(g, float)
    _check_orthogonal(g)
    gX = g @ np.asarray(X, float)
    return a - float(w @ gX), gX


def adjoint(sigma: np.ndarray, M: np.ndarray) -> np.ndarray:
    return sigma @ M @ np.linalg.inv(sigma)


# ---------------------------------------------------------------------------
# random elements


def random_orthogonal(m: int, rng: np.random.Generator) -> np.ndarray:
    q, r = np.linalg.qr(rng.standard_normal((m, m)))
    return q * np.sign(np.diag(r))


def random_skew(m: int, rng: np.random.Generator) -> np.ndarray:
    A = rng.standard_normal((m, m))
    return A - A.T


def random_graded(m: int, k: int, rng: np.random.Generator) -> np.ndarray:
    if k == -1:
        return element(X=rng.standard_normal(m), m=m)
    if k == 0:
        return element(float(rng.standard_normal()), A=random_skew(m, rng), m=m)
    if k == 1:
        return element(Zrow=rng.standard_normal(m), m=m)
    raise ValueError(k)


def random_element(m: int, rng: np.random.Generator) -> np.ndarray:
    return sum(random_graded(m, k, rng) for k in (-1, 0, 1))


# ---------------------------------------------------------------------------
# invariant suite


def algebra_suite(m: int, count: int = 200, seed: int = 0, tol: float = EXACT) -> list[CheckRecord]:
    """Structure checks of the graded algebra and of H for one value of m."""
    rng = np.random.default_rng(seed)
    out: list[CheckRecord] = []
    anchor = "model algebra"
    tag = f" [m={m}]"

    def rec(name: str, values: list[float], notes: str = "") -> None:
        out.append(check(name + tag, anchor, max(values) if values else 0.0, tol, len(values), notes))

    elems = [random_element(m, rng) for _ in range(count)]
    rec("algebra membership M^T S + S M = 0", [membership_residual(M) for M in elems])
    rec("grade decomposition reassembles", [float(np.max(np.abs(grade_project(M).assemble() - M))) for M in elems])

    E = grading_element(m)
    res = []
    for k in (-1, 0, 1):
        for _ in range(count):
            M = random_graded(m, k, rng)
            res.append(float(np.max(np.abs(bracket(E, M) - k * M))))
    rec("ad(E) has eigenvalue k on g_k", res)

    res = []
    for i in (-1, 0, 1):
        for j in (-1, 0, 1):
            for _ in range(count):
                B = bracket(random_graded(m, i, rng), random_graded(m, j, rng))
                res.append(float(np.max(np.abs(B - grade_project(B).part(i + j)))))
    rec("grading [g_i, g_j] in g_(i+j)", res)

    hs = [(rng.standard_normal(m), random_orthogonal(m, rng)) for _ in range(count)]
    sig = [h_embed(w, g) for w, g in hs]
    rec("H elements satisfy sigma^T S sigma = S", [group_residual(s) for s in sig])
    e0 = np.zeros(m + 2)
    e0[0] = 1.0
    rec("H fixes the lightlike vector l", [float(np.max(np.abs(s @ e0 - e0))) for s in sig])
    bad = sum(not is_orthochronous(s) for s in sig)
    out.append(check("H elements are orthochronous" + tag, anchor, float(bad), 0.5, count,
                     "residual counts elements that reverse the time cone"))
    ps = [p_embed(float(np.exp(rng.standard_normal())), w, g) for w, g in hs]
    rec("P elements satisfy sigma^T S sigma = S", [group_residual(s) for s in ps])

    res, law, conj, rad = [], [], [], []
    for idx in range(count):
        (w1, g1), (w2, g2) = hs[idx], hs[(idx + 1) % count]
        prod = sig[idx] @ sig[(idx + 1) % count]
        res.append(float(np.max(np.abs(prod - h_embed(w1 + g1 @ w2, g1 @ g2)))))
        a, X = float(rng.standard_normal()), rng.standard_normal(m)
        a2, X2 = quotient_adjoint(w2, g2, a, X)
        a12, X12 = quotient_adjoint(w1, g1, a2, X2)
        w, g = h_parameters(prod)
        b, Y = quotient_adjoint(w, g, a, X)
        law.append(max(abs(b - a12), float(np.max(np.abs(Y - X12)))))
        M = element(a, X, rng.standard_normal(m), random_skew(m, rng))
        c, Xc = grade_project(adjoint(sig[idx], M), tol=1e-10).quotient()
        qa, qX = quotient_adjoint(w1, g1, a, X)
        conj.append(max(abs(c - qa), float(np.max(np.abs(Xc - qX)))))
        r1, rX = quotient_adjoint(w1, g1, 1.0, np.zeros(m))
        rad.append(max(abs(r1 - 1.0), float(np.max(np.abs(rX)))))
    rec("H closed under products", res)
    rec("quotient adjoint is a representation", law)
    rec("quotient adjoint matches conjugation modulo h", conj)
    rec("radical direction (1,0) is H-invariant", rad)
    return out


def run_suite(ms=(2, 3, 4), count: int = 200, seed: int = 0, tol: float = EXACT) -> tuple[list[CheckRecord], float]:
    t0 = time.perf_counter()
    recs = [r for m in ms for r in algebra_suite(m, count, seed, tol)]
    return recs, time.perf_counter() - t0


__all__ = [
    "form",
    "element",
    "grading_element",
    "Graded",
    "grade_project",
    "bracket",
    "membership_residual",
    "group_residual",
    "h_embed",
    "p_embed",
    "h_parameters",
    "is_orthochronous",
    "quotient_adjoint",
    "adjoint",
    "random_orthogonal",
    "random_element",
    "random_graded",
    "algebra_suite",
    "run_suite",
    "MembershipError",
]
