"""Hash-consed scalar expressions over named chart coordinates.

Every node is interned: structurally equal expressions are the same Python
object, so shared subexpressions are stored and differentiated once.
Simplification is deliberately shallow (constant folding, 0/1 absorption,
collection of like terms and like factors); there is no general rewriting.
"""

from __future__ import annotations

import contextvars
import math
from typing import Callable, Iterable, Sequence

import numpy as np

FUNCTIONS = ("exp", "log", "sin", "cos", "sqrt")

_table: dict[tuple, "Expr"] = {}
_nodes: list["Expr"] = []
_var_bits: dict[str, int] = {}
_diff_memo: dict[tuple[int, str], "Expr"] = {}


class DomainError(ValueError):
    """Raised when an expression is evaluated outside its admissible domain."""


class Expr:
    """Immutable interned expression node.

    ``op`` is one of ``const``, ``var``, ``add``, ``mul``, ``pow``, ``fd`` or a
    function name. ``data`` holds the constant value, variable name, additive
    offset, multiplicative coefficient, integer exponent, or the
    ``(coordinate, step)`` pair of a finite-difference node.
    """

    __slots__ = ("op", "data", "args", "idx", "mask")

    op: str
    data: object
    args: tuple["Expr", ...]
    idx: int
    mask: int

    def __repr__(self) -> str:
        try:
            return f"Expr({to_string(self)})"
        except ValueError:
            return f"Expr(<{self.op} #{self.idx}>)"

    def __reduce__(self):
        return (parse, (to_string(self),))

    # arithmetic sugar
    def __add__(self, other: ExprLike) -> Expr:
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other: ExprLike) -> Expr:
        return add(self, mul(-1.0, other))

    def __rsub__(self, other: ExprLike) -> Expr:
        return add(other, mul(-1.0, self))

    def __mul__(self, other: ExprLike) -> Expr:
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other: ExprLike) -> Expr:
        return mul(self, power(as_expr(other), -1))

    def __rtruediv__(self, other: ExprLike) -> Expr:
        return mul(other, power(self, -1))

    def __neg__(self) -> Expr:
        return mul(-1.0, self)

    def __pow__(self, k: int) -> Expr:
        return power(self, k)

    @property
    def is_const(self) -> bool:
        return self.op == "const"

    def is_zero(self) -> bool:
        return self.op == "const" and self.data == 0.0

    def depends_on(self, name: str) -> bool:
        bit = _var_bits.get(name)
        return bit is not None and bool(self.mask >> bit & 1)


ExprLike = "Expr | float | int"


def _intern(op: str, data: object, args: tuple[Expr, ...]) -> Expr:
    key = (op, data, tuple(a.idx for a in args))
    node = _table.get(key)
    if node is not None:
        return node
    node = object.__new__(Expr)
    node.op = op
    node.data = data
    node.args = args
    node.idx = len(_nodes)
    mask = 0
    for a in args:
        mask |= a.mask
    if op == "var":
        bit = _var_bits.setdefault(data, len(_var_bits))
        mask |= 1 << bit
    node.mask = mask
    _table[key] = node
    _nodes.append(node)
    return node


def const(value: float) -> Expr:
    value = float(value)
    if value == 0.0:
        value = 0.0  # fold -0.0
    if not math.isfinite(value):
        raise DomainError(f"non-finite constant {value}")
    return _intern("const", value, ())


ZERO = const(0.0)
ONE = const(1.0)


def var(name: str) -> Expr:
    return _intern("var", name, ())


def as_expr(x: ExprLike) -> Expr:
    if isinstance(x, Expr):
        return x
    if isinstance(x, (int, float, np.floating, np.integer)):
        return const(float(x))
    raise TypeError(f"cannot convert {type(x).__name__} to Expr")


def _split_coeff(e: Expr) -> tuple[float, Expr]:
    """Write a non-constant term as coefficient times a coefficient-free core."""
    if e.op == "mul" and e.data != 1.0:
        args = e.args
        core = args[0] if len(args) == 1 else _intern("mul", 1.0, args)
        return e.data, core
    return 1.0, e


def _scaled(core: Expr, c: float) -> Expr:
    if c == 1.0:
        return core
    if core.op == "mul":
        return _intern("mul", c, core.args)
    return _intern("mul", c, (core,))


def add(*items: ExprLike) -> Expr:
    offset = 0.0
    terms: dict[int, list] = {}

    def take(t: Expr) -> None:
        c, core = _split_coeff(t)
        slot = terms.get(core.idx)
        if slot is None:
            terms[core.idx] = [core, c]
        else:
            slot[1] += c

    for raw in items:
        t = as_expr(raw)
        if t.op == "const":
            offset += t.data
        elif t.op == "add":
            offset += t.data
            for s in t.args:
                take(s)
        else:
            take(t)
    out = [_scaled(core, c) for k, (core, c) in sorted(terms.items()) if c != 0.0]
    if not out:
        return const(offset)
    if offset == 0.0 and len(out) == 1:
        return out[0]
    return _intern("add", offset + 0.0, tuple(out))


def _const_pow(c: float, k: int) -> float:
    if c == 0.0 and k < 0:
        raise DomainError("division by the constant zero")
    return c**k


def _mul_core(pairs: Iterable[tuple[Expr, int]], coeff: float = 1.0) -> Expr:
    exps: dict[int, list] = {}
    box = [coeff]

    def take(g: Expr, k: int) -> None:
        op = g.op
        if op == "const":
            box[0] *= _const_pow(g.data, k)
        elif op == "mul":
            box[0] *= _const_pow(g.data, k)
            for f in g.args:
                take(f, k)
        elif op == "pow":
            take(g.args[0], g.data * k)
        else:
            slot = exps.get(g.idx)
            if slot is None:
                exps[g.idx] = [g, k]
            else:
                slot[1] += k

    for g, k in pairs:
        take(g, k)
    # sqrt(u)^(2q+r) -> u^q * sqrt(u)^r; repeat since u may itself hold a sqrt
    changed = True
    while changed:
        changed = False
        for key in list(exps):
            base, k = exps[key]
            if base.op == "sqrt" and abs(k) >= 2:
                q, r = divmod(k, 2)
                exps[key][1] = r
                take(base.args[0], q)
                changed = True
    c = box[0]
    if c == 0.0:
        return ZERO
    factors = []
    for key in sorted(exps):
        base, k = exps[key]
        if k == 0:
            continue
        factors.append(base if k == 1 else _intern("pow", k, (base,)))
    if not factors:
        return const(c)
    if c == 1.0 and len(factors) == 1:
        return factors[0]
    return _intern("mul", c + 0.0, tuple(factors))


def mul(*items: ExprLike) -> Expr:
    return _mul_core((as_expr(x), 1) for x in items)


def power(base: ExprLike, k: int) -> Expr:
    if int(k) != k:
        raise ValueError("only integer exponents are supported")
    k = int(k)
    if k == 0:
        return ONE
    return _mul_core([(as_expr(base), k)])


def div(a: ExprLike, b: ExprLike) -> Expr:
    return mul(a, power(b, -1))


def neg(a: ExprLike) -> Expr:
    return mul(-1.0, a)


def sub(a: ExprLike, b: ExprLike) -> Expr:
    return add(a, mul(-1.0, b))


_FOLD = {
    "exp": math.exp,
    "log": math.log,
    "sin": math.sin,
    "cos": math.cos,
    "sqrt": math.sqrt,
}


def func(name: str, arg: ExprLike) -> Expr:
    if name not in _FOLD:
        raise ValueError(f"unknown function {name!r}")
    a = as_expr(arg)
    if a.op == "const":
        try:
            return const(_FOLD[name](a.data))
        except (ValueError, OverflowError) as exc:
            raise DomainError(f"{name}({a.data}) is undefined") from exc
    if name == "log" and a.op == "exp":
        return a.args[0]
    if name == "exp" and a.op == "log":
        return a.args[0]
    return _intern(name, None, (a,))


def exp(a: ExprLike) -> Expr:
    return func("exp", a)


def log(a: ExprLike) -> Expr:
    return func("log", a)


def sin(a: ExprLike) -> Expr:
    return func("sin", a)


def cos(a: ExprLike) -> Expr:
    return func("cos", a)


def sqrt(a: ExprLike) -> Expr:
    return func("sqrt", a)


def fd_node(e: Expr, name: str, step: float) -> Expr:
    """Central-difference derivative of ``e`` along ``name``, resolved at evaluation."""
    if not e.depends_on(name):
        return ZERO
    return _intern("fd", (name, float(step)), (e,))


# ---------------------------------------------------------------------------
# traversal


def _reachable(roots: Iterable[Expr], stop: Callable[[Expr], bool] | None = None) -> list[Expr]:
    seen: dict[int, Expr] = {}
    stack = list(roots)
    while stack:
        e = stack.pop()
        if e.idx in seen:
            continue
        if stop is not None and stop(e):
            continue
        seen[e.idx] = e
        stack.extend(e.args)
    # children are always created before parents, so idx order is topological
    return [seen[k] for k in sorted(seen)]


def node_count(roots: Iterable[Expr]) -> int:
    """Number of distinct nodes in the DAG spanned by ``roots``."""
    return len(_reachable(roots))


def interned_count() -> int:
    return len(_nodes)


def interned_nodes() -> Sequence[Expr]:
    return _nodes


def free_vars(e: Expr) -> list[str]:
    return [name for name, bit in _var_bits.items() if e.mask >> bit & 1]


# ---------------------------------------------------------------------------
# differentiation


def diff(e: Expr, name: str) -> Expr:
    """Exact partial derivative of ``e`` with respect to coordinate ``name``."""
    if not e.depends_on(name):
        return ZERO
    key = (e.idx, name)
    hit = _diff_memo.get(key)
    if hit is not None:
        return hit
    todo = _reachable([e], stop=lambda n: not n.depends_on(name) or (n.idx, name) in _diff_memo)
    for n in todo:
        _diff_memo[(n.idx, name)] = _diff_rule(n, name)
    return _diff_memo[key]


def _d(n: Expr, name: str) -> Expr:
    if not n.depends_on(name):
        return ZERO
    return _diff_memo[(n.idx, name)]


def _diff_rule(n: Expr, name: str) -> Expr:
    op = n.op
    if op == "var":
        return ONE if n.data == name else ZERO
    if op == "add":
        return add(*(_d(t, name) for t in n.args))
    if op == "mul":
        args = n.args
        terms = []
        for i, f in enumerate(args):
            df = _d(f, name)
            if df.is_zero():
                continue
            terms.append(mul(n.data, df, *args[:i], *args[i + 1 :]))
        return add(*terms)
    if op == "pow":
        base = n.args[0]
        k = n.data
        return mul(float(k), power(base, k - 1), _d(base, name))
    if op == "fd":
        raise ValueError("finite-difference nodes cannot be differentiated symbolically")
    u = n.args[0]
    du = _d(u, name)
    if op == "exp":
        return mul(n, du)
    if op == "log":
        return mul(du, power(u, -1))
    if op == "sin":
        return mul(cos(u), du)
    if op == "cos":
        return mul(-1.0, sin(u), du)
    if op == "sqrt":
        return mul(0.5, du, power(n, -1))
    raise AssertionError(op)


def clear_diff_cache() -> None:
    _diff_memo.clear()


# ---------------------------------------------------------------------------
# numeric evaluation

_NUMPY_FUNCS = {
    "exp": np.exp,
    "log": np.log,
    "sin": np.sin,
    "cos": np.cos,
    "sqrt": np.sqrt,
}


class Evaluator:
    """Batch evaluator over a fixed set of points with a shared node memo.

    ``env`` maps coordinate names to equally shaped float arrays. Results are
    arrays of that shape; inadmissible points yield non-finite entries rather
    than exceptions.
    """

    def __init__(self, env: dict[str, np.ndarray]):
        self.env = {k: np.asarray(v, dtype=float) for k, v in env.items()}
        shapes = {v.shape for v in self.env.values()}
        if len(shapes) > 1:
            raise ValueError("coordinate arrays must share one shape")
        self.shape = shapes.pop() if shapes else ()
        self._memo: dict[int, object] = {}
        self._shifted: dict[tuple[str, float], Evaluator] = {}

    def _shift(self, name: str, delta: float) -> Evaluator:
        key = (name, delta)
        ev = self._shifted.get(key)
        if ev is None:
            env = dict(self.env)
            env[name] = env[name] + delta
            ev = Evaluator(env)
            self._shifted[key] = ev
        return ev

    def __call__(self, e: Expr) -> np.ndarray:
        memo = self._memo
        if e.idx not in memo:
            with np.errstate(all="ignore"):
                for n in _reachable([e], stop=lambda n: n.idx in memo):
                    memo[n.idx] = self._compute(n)
        v = memo[e.idx]
        return np.broadcast_to(np.asarray(v, dtype=float), self.shape)

    def many(self, exprs: Sequence[Expr]) -> np.ndarray:
        """Stack the values of ``exprs`` along a new leading axis."""
        if not exprs:
            return np.zeros((0,) + self.shape)
        memo = self._memo
        with np.errstate(all="ignore"):
            for n in _reachable(exprs, stop=lambda n: n.idx in memo):
                memo[n.idx] = self._compute(n)
        return np.stack([np.broadcast_to(np.asarray(memo[e.idx], dtype=float), self.shape) for e in exprs])

    def _compute(self, n: Expr):
        op = n.op
        memo = self._memo
        if op == "const":
            return n.data
        if op == "var":
            try:
                return self.env[n.data]
            except KeyError:
                raise KeyError(f"no value supplied for coordinate {n.data!r}") from None
        if op == "add":
            acc = n.data
            for a in n.args:
                acc = acc + memo[a.idx]
            return acc
        if op == "mul":
            acc = n.data
            for a in n.args:
                acc = acc * memo[a.idx]
            return acc
        if op == "pow":
            base = memo[n.args[0].idx]
            k = n.data
            if k < 0:
                return 1.0 / np.power(base, -k) if not isinstance(base, float) else _scalar_pow(base, k)
            return base**k
        if op == "fd":
            name, step = n.data
            child = n.args[0]
            hi = self._shift(name, step)(child)
            lo = self._shift(name, -step)(child)
            return (hi - lo) / (2.0 * step)
        return _NUMPY_FUNCS[op](memo[n.args[0].idx])


def _scalar_pow(base: float, k: int) -> float:
    if base == 0.0:
        return math.inf
    return base**k


def evaluate(e: Expr, point: dict[str, float] | None = None, **coords: float) -> float:
    """Evaluate at a single point; raises DomainError when the value is not finite."""
    env = dict(point or {})
    env.update(coords)
    val = float(Evaluator({k: np.asarray(float(v)) for k, v in env.items()})(e))
    if not math.isfinite(val):
        raise DomainError("expression is not finite at the given point")
    return val


def guard_nodes(e: Expr) -> list[tuple[str, Expr]]:
    """Subexpressions whose sign decides admissibility: denominators, log and sqrt arguments."""
    out = []
    for n in _reachable([e]):
        if n.op == "pow" and n.data < 0:
            out.append(("nonzero", n.args[0]))
        elif n.op == "log":
            out.append(("positive", n.args[0]))
        elif n.op == "sqrt":
            out.append(("nonnegative", n.args[0]))
    return out


# ---------------------------------------------------------------------------
# printing and parsing


def _num(v: float) -> str:
    if v == int(v) and abs(v) < 1e15:
        return str(int(v))
    return repr(v)


def to_string(e: Expr) -> str:
    """Infix rendering that :func:`parse` reads back to the same node."""
    memo: dict[int, str] = {}
    for n in _reachable([e]):
        memo[n.idx] = _render(n, memo)
    return memo[e.idx]


def _atomic(n: Expr) -> bool:
    return n.op in ("var",) or n.op in FUNCTIONS or (n.op == "const" and n.data >= 0)


def _render(n: Expr, memo: dict[int, str]) -> str:
    op = n.op
    if op == "const":
        return _num(n.data)
    if op == "var":
        return n.data
    if op in FUNCTIONS:
        return f"{op}({memo[n.args[0].idx]})"
    if op == "pow":
        base = n.args[0]
        b = memo[base.idx] if _atomic(base) else f"({memo[base.idx]})"
        return f"{b}^{n.data}" if n.data > 0 else f"{b}^({n.data})"
    if op == "add":
        parts = []
        for t in n.args:
            s = memo[t.idx]
            if t.op == "mul" and t.data < 0:
                parts.append(("-", s[1:]))
            else:
                parts.append(("+", s))
        if n.data != 0.0:
            parts.append(("-", _num(-n.data)) if n.data < 0 else ("+", _num(n.data)))
        sign, first = parts[0]
        out = first if sign == "+" else f"-{first}"
        for sign, s in parts[1:]:
            out += f" {sign} {s}"
        return out
    if op == "mul":
        num, den = [], []
        for f in n.args:
            if f.op == "pow" and f.data < 0:
                base = f.args[0]
                s = memo[base.idx] if _atomic(base) else f"({memo[base.idx]})"
                den.append(s if f.data == -1 else f"{s}^{-f.data}")
            else:
                s = memo[f.idx]
                num.append(s if f.op != "add" else f"({s})")
        c = n.data
        if c not in (1.0, -1.0):
            num.insert(0, _num(abs(c)))
        body = "*".join(num) if num else "1"
        if den:
            body += "/" + (den[0] if len(den) == 1 else "(" + "*".join(den) + ")")
        return f"-{body}" if c < 0 else body
    if op == "fd":
        raise ValueError("finite-difference nodes have no string form")
    raise AssertionError(op)


class ParseError(ValueError):
    def __init__(self, message: str, text: str = "", pos: int = -1):
        where = f" at column {pos + 1} of {text!r}" if pos >= 0 else ""
        super().__init__(message + where)
        self.text = text
        self.pos = pos


_TOKEN_CHARS = "+-*/^()"


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    toks = []
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
        elif ch in _TOKEN_CHARS:
            toks.append(("op", ch, i))
            i += 1
        elif ch.isdigit() or ch == ".":
            j = i
            while j < n and (text[j].isdigit() or text[j] == "."):
                j += 1
            if j < n and text[j] in "eE":
                k = j + 1
                if k < n and text[k] in "+-":
                    k += 1
                if k < n and text[k].isdigit():
                    j = k
                    while j < n and text[j].isdigit():
                        j += 1
            try:
                toks.append(("num", str(float(text[i:j])), i))
            except ValueError:
                raise ParseError(f"bad number {text[i:j]!r}", text, i) from None
            i = j
        elif ch.isalpha() or ch == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            toks.append(("name", text[i:j], i))
            i = j
        else:
            raise ParseError(f"unexpected character {ch!r}", text, i)
    toks.append(("end", "", n))
    return toks


class _Parser:
    def __init__(self, text: str, allowed: Sequence[str] | None):
        self.text = text
        self.toks = _tokenize(text)
        self.pos = 0
        self.allowed = None if allowed is None else set(allowed)

    def peek(self) -> tuple[str, str, int]:
        return self.toks[self.pos]

    def take(self) -> tuple[str, str, int]:
        tok = self.toks[self.pos]
        self.pos += 1
        return tok

    def expect(self, value: str) -> None:
        kind, val, at = self.take()
        if val != value or kind != "op":
            raise ParseError(f"expected {value!r}", self.text, at)

    def parse(self) -> Expr:
        e = self.expr()
        kind, val, at = self.peek()
        if kind != "end":
            raise ParseError(f"unexpected {val!r}", self.text, at)
        return e

    def expr(self) -> Expr:
        e = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            _, op, _ = self.take()
            rhs = self.term()
            e = add(e, rhs) if op == "+" else sub(e, rhs)
        return e

    def term(self) -> Expr:
        e = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            _, op, _ = self.take()
            rhs = self.unary()
            e = mul(e, rhs) if op == "*" else div(e, rhs)
        return e

    def unary(self) -> Expr:
        kind, val, _ = self.peek()
        if kind == "op" and val in ("-", "+"):
            self.take()
            inner = self.unary()
            return neg(inner) if val == "-" else inner
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        kind, val, at = self.peek()
        if kind == "op" and val == "^":
            self.take()
            exponent = self.unary()
            if exponent.op != "const" or exponent.data != int(exponent.data):
                raise ParseError("exponent must be an integer constant", self.text, at)
            try:
                return power(base, int(exponent.data))
            except DomainError as exc:
                raise ParseError(str(exc), self.text, at) from None
        return base

    def atom(self) -> Expr:
        kind, val, at = self.take()
        if kind == "num":
            return const(float(val))
        if kind == "name":
            if val in FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                try:
                    return func(val, arg)
                except DomainError as exc:
                    raise ParseError(str(exc), self.text, at) from None
            if val == "pi":
                return const(math.pi)
            if self.allowed is not None and val not in self.allowed:
                raise ParseError(f"unknown coordinate {val!r}", self.text, at)
            return var(val)
        if kind == "op" and val == "(":
            e = self.expr()
            self.expect(")")
            return e
        raise ParseError("unexpected end of input" if kind == "end" else f"unexpected {val!r}", self.text, at)


def parse(text: str, coords: Sequence[str] | None = None) -> Expr:
    """Parse an infix expression; ``coords`` restricts the admissible names."""
    if not isinstance(text, str):
        raise ParseError(f"expected an expression string, got {type(text).__name__}")
    try:
        return _Parser(text, coords).parse()
    except DomainError as exc:
        raise ParseError(str(exc), text) from None


# derivative strategy used by vector fields acting on functions; swapped for a
# finite-difference strategy when the symbolic node budget is exceeded
_fd_step: contextvars.ContextVar[float | None] = contextvars.ContextVar("fd_step", default=None)


def partial(e: Expr, name: str) -> Expr:
    step = _fd_step.get()
    if step is None:
        return diff(e, name)
    return fd_node(e, name, step)


class finite_differences:
    """Context manager: inside it, :func:`partial` emits finite-difference nodes."""

    def __init__(self, step: float = 1e-5):
        self.step = step
        self._token = None

    def __enter__(self):
        self._token = _fd_step.set(self.step)
        return self

    def __exit__(self, *exc):
        _fd_step.reset(self._token)
        return False
