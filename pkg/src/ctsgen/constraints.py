"""Declarative constraints over the L x K sample grid.

Constraints compile two ways: into a differentiable penalty (soft rendering
used by penalty-trained and guided samplers) and into residual callbacks
for the constrained solver.  The penalty of an inequality g <= 0 is
lambda_g * relu(g); an equality h = 0 contributes lambda_h * h^2; a trend
target s contributes the squared L2 distance; a fixed point is treated as
an equality so every method can target it.
"""

from __future__ import annotations

import os
import re
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from . import config as cfgfile
from . import tensor as T
from .data import TimeSeries, read_samples_csv, write_samples_csv
from .errors import ConfigError, ConstraintError, ParseError

# --- expression trees ---------------------------------------------------------


@dataclass(frozen=True)
class Const:
    value: float


@dataclass(frozen=True)
class Point:
    i: int
    j: int


@dataclass(frozen=True)
class Agg:
    """Aggregate over the half-open index rectangle [t0,t1) x [f0,f1).

    A bound of None means "full range along that axis".
    """

    kind: str  # min | max | mean | sum
    t0: int | None = None
    t1: int | None = None
    f0: int | None = None
    f1: int | None = None


@dataclass(frozen=True)
class Bin:
    op: str  # + - * /
    a: "Expr"
    b: "Expr"


@dataclass(frozen=True)
class Abs:
    a: "Expr"


@dataclass(frozen=True)
class Square:
    a: "Expr"


Expr = Const | Point | Agg | Bin | Abs | Square

_AGG_NP = {"min": np.min, "max": np.max, "mean": np.mean, "sum": np.sum}
_AGG_T = {"min": T.tmin, "max": T.tmax, "mean": T.tmean, "sum": T.tsum}


def _resolve_range(bound0, bound1, size, what):
    lo = 0 if bound0 is None else bound0
    hi = size if bound1 is None else bound1
    if not (0 <= lo < hi <= size):
        raise ConstraintError(f"aggregate {what}-range [{lo},{hi}) outside [0,{size})")
    return lo, hi


def eval_expr(expr: Expr, x: np.ndarray) -> float:
    length, features = x.shape
    if isinstance(expr, Const):
        return expr.value
    if isinstance(expr, Point):
        if not (0 <= expr.i < length and 0 <= expr.j < features):
            raise ConstraintError(f"point x[{expr.i},{expr.j}] outside {length}x{features} grid")
        return float(x[expr.i, expr.j])
    if isinstance(expr, Agg):
        t0, t1 = _resolve_range(expr.t0, expr.t1, length, "time")
        f0, f1 = _resolve_range(expr.f0, expr.f1, features, "feature")
        return float(_AGG_NP[expr.kind](x[t0:t1, f0:f1]))
    if isinstance(expr, Bin):
        a = eval_expr(expr.a, x)
        b = eval_expr(expr.b, x)
        if expr.op == "+":
            return a + b
        if expr.op == "-":
            return a - b
        if expr.op == "*":
            return a * b
        if expr.op == "/":
            if b == 0.0:
                raise ConstraintError("expression divides by zero")
            return a / b
        raise ConstraintError(f"unknown operator {expr.op}")
    if isinstance(expr, Abs):
        return abs(eval_expr(expr.a, x))
    if isinstance(expr, Square):
        return eval_expr(expr.a, x) ** 2
    raise ConstraintError(f"unknown expression node {expr!r}")


def compile_expr(expr: Expr, node: T.Tensor) -> T.Tensor:
    """Build tape ops for `expr` on an (L, K) tensor node; returns a scalar node."""
    length, features = node.shape
    if isinstance(expr, Const):
        return T.Tensor(np.asarray(expr.value))
    if isinstance(expr, Point):
        if not (0 <= expr.i < length and 0 <= expr.j < features):
            raise ConstraintError(f"point x[{expr.i},{expr.j}] outside {length}x{features} grid")
        return T.reshape(T.slice_(node, [(expr.i, expr.i + 1), (expr.j, expr.j + 1)]), ())
    if isinstance(expr, Agg):
        t0, t1 = _resolve_range(expr.t0, expr.t1, length, "time")
        f0, f1 = _resolve_range(expr.f0, expr.f1, features, "feature")
        return _AGG_T[expr.kind](T.slice_(node, [(t0, t1), (f0, f1)]))
    if isinstance(expr, Bin):
        a = compile_expr(expr.a, node)
        b = compile_expr(expr.b, node)
        fn = {"+": T.add, "-": T.sub, "*": T.mul, "/": T.div}[expr.op]
        return fn(a, b)
    if isinstance(expr, Abs):
        inner = compile_expr(expr.a, node)
        neg = T.mul(inner, T.Tensor(np.asarray(-1.0)))
        return T.add(T.relu(inner), T.relu(neg))
    if isinstance(expr, Square):
        return T.square(compile_expr(expr.a, node))
    raise ConstraintError(f"unknown expression node {expr!r}")


def expr_time_refs(expr: Expr, length: int) -> set[int]:
    """Time indices the expression reads (used for solver windowing)."""
    if isinstance(expr, Const):
        return set()
    if isinstance(expr, Point):
        return {expr.i}
    if isinstance(expr, Agg):
        lo = 0 if expr.t0 is None else expr.t0
        hi = length if expr.t1 is None else expr.t1
        return set(range(lo, hi))
    if isinstance(expr, Bin):
        return expr_time_refs(expr.a, length) | expr_time_refs(expr.b, length)
    if isinstance(expr, (Abs, Square)):
        return expr_time_refs(expr.a, length)
    return set()


# --- expression text form ------------------------------------------------------

_TOKEN = re.compile(r"\s*(?:(\d+\.\d*(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?"
                    r"|\d+(?:[eE][+-]?\d+)?)|(x\[)|(abs|square|min|max|mean|sum)"
                    r"|([\[\](),:+\-*/]))")


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0
        self.tokens = self._tokenize()
        self.cursor = 0

    def _tokenize(self):
        tokens = []
        pos = 0
        while pos < len(self.text):
            m = _TOKEN.match(self.text, pos)
            if m is None:
                if self.text[pos:].strip() == "":
                    break
                raise ParseError(f"bad expression near '{self.text[pos:pos+12]}'")
            num, xbrack, name, punct = m.groups()
            if num is not None:
                tokens.append(("num", num))
            elif xbrack is not None:
                tokens.append(("x[", "x["))
            elif name is not None:
                tokens.append(("name", name))
            else:
                tokens.append((punct, punct))
            pos = m.end()
        tokens.append(("end", ""))
        return tokens

    def peek(self):
        return self.tokens[self.cursor]

    def next(self, expected=None):
        tok = self.tokens[self.cursor]
        if expected is not None and tok[0] != expected:
            raise ParseError(f"expected '{expected}', got '{tok[1] or 'end'}'")
        self.cursor += 1
        return tok

    def parse(self) -> Expr:
        e = self.expr()
        if self.peek()[0] != "end":
            raise ParseError(f"trailing input '{self.peek()[1]}'")
        return e

    def expr(self) -> Expr:
        node = self.term()
        while self.peek()[0] in "+-":
            op = self.next()[0]
            node = Bin(op, node, self.term())
        return node

    def term(self) -> Expr:
        node = self.unary()
        while self.peek()[0] in "*/":
            op = self.next()[0]
            node = Bin(op, node, self.unary())
        return node

    def unary(self) -> Expr:
        if self.peek()[0] == "-":
            self.next()
            inner = self.unary()
            if isinstance(inner, Const):
                return Const(-inner.value)
            return Bin("-", Const(0.0), inner)
        return self.atom()

    def _int(self) -> int:
        tok = self.next("num")
        if "." in tok[1] or "e" in tok[1].lower():
            raise ParseError(f"expected integer index, got {tok[1]}")
        return int(tok[1])

    def _span(self, allow_open: bool) -> tuple[int | None, int | None, bool]:
        """INT | INT:INT | : | INT: | :INT  ->  (lo, hi, is_single)."""
        lo = None
        if self.peek()[0] == "num":
            lo = self._int()
        if self.peek()[0] == ":":
            self.next()
            hi = self._int() if self.peek()[0] == "num" else None
            return lo, hi, False
        if lo is None:
            raise ParseError("expected index or range")
        return lo, lo + 1, True

    def atom(self) -> Expr:
        kind, value = self.peek()
        if kind == "num":
            self.next()
            return Const(float(value))
        if kind == "(":
            self.next()
            node = self.expr()
            self.next(")")
            return node
        if kind == "x[":
            self.next()
            i0, i1, i_single = self._span(allow_open=False)
            self.next(",")
            j0, j1, j_single = self._span(allow_open=False)
            self.next("]")
            if i_single and j_single:
                return Point(i0, j0)
            raise ParseError("bare x[range] needs an aggregate (min/max/mean/sum)")
        if kind == "name":
            name = self.next()[1]
            self.next("(")
            if name in ("abs", "square"):
                node = self.expr()
                self.next(")")
                return Abs(node) if name == "abs" else Square(node)
            self.next("x[")
            t0, t1, _ = self._span(allow_open=True)
            self.next(",")
            f0, f1, _ = self._span(allow_open=True)
            self.next("]")
            self.next(")")
            return Agg(name, t0, t1, f0, f1)
        raise ParseError(f"unexpected token '{value or 'end'}'")


def parse_expr(text: str) -> Expr:
    return _Parser(text).parse()


def _span_text(lo, hi) -> str:
    if lo is not None and hi is not None and hi == lo + 1:
        return str(lo)
    left = "" if lo is None else str(lo)
    right = "" if hi is None else str(hi)
    return f"{left}:{right}"


_PRECEDENCE = {"+": 1, "-": 1, "*": 2, "/": 2}


def format_expr(expr: Expr, parent_prec: int = 0) -> str:
    if isinstance(expr, Const):
        v = expr.value
        text = repr(int(v)) if float(v).is_integer() and abs(v) < 1e15 else repr(v)
        return f"({text})" if v < 0 and parent_prec > 0 else text
    if isinstance(expr, Point):
        return f"x[{expr.i},{expr.j}]"
    if isinstance(expr, Agg):
        return f"{expr.kind}(x[{_span_text(expr.t0, expr.t1)},{_span_text(expr.f0, expr.f1)}])"
    if isinstance(expr, Bin):
        prec = _PRECEDENCE[expr.op]
        left = format_expr(expr.a, prec)
        # right operand of - and / binds tighter
        right = format_expr(expr.b, prec + (1 if expr.op in "-/" else 0))
        text = f"{left} {expr.op} {right}"
        return f"({text})" if prec < parent_prec else text
    if isinstance(expr, Abs):
        return f"abs({format_expr(expr.a)})"
    if isinstance(expr, Square):
        return f"square({format_expr(expr.a)})"
    raise ConstraintError(f"unknown expression node {expr!r}")


# --- constraints ---------------------------------------------------------------


class Kind(Enum):
    TREND = "trend"
    FIXED_POINT = "fixed_point"
    INEQ = "ineq"
    EQ = "eq"


@dataclass(frozen=True)
class Constraint:
    kind: Kind
    hardness: str = "hard"  # "soft" | "hard"
    expr: Expr | None = None          # INEQ / EQ
    i: int = 0                        # FIXED_POINT
    j: int = 0
    value: float = 0.0
    series: TimeSeries | None = None  # TREND
    label: str = ""

    def __post_init__(self):
        if self.kind is Kind.TREND and self.hardness != "soft":
            object.__setattr__(self, "hardness", "soft")
        if self.kind is Kind.FIXED_POINT and self.hardness != "hard":
            object.__setattr__(self, "hardness", "hard")
        if self.kind in (Kind.INEQ, Kind.EQ) and self.expr is None:
            raise ConstraintError(f"{self.kind.value} constraint needs an expression")
        if self.kind is Kind.TREND and self.series is None:
            raise ConstraintError("trend constraint needs a target series")

    def describe(self) -> str:
        if self.label:
            return self.label
        if self.kind is Kind.FIXED_POINT:
            return f"fixed_point x[{self.i},{self.j}] = {self.value}"
        if self.kind is Kind.TREND:
            return "trend"
        rel = "<= 0" if self.kind is Kind.INEQ else "= 0"
        return f"{self.kind.value} {format_expr(self.expr)} {rel}"


@dataclass(frozen=True)
class PenaltyWeights:
    lambda_g: float = 1.0
    lambda_h: float = 1.0
    rho: float = 1.0

    def __post_init__(self):
        if self.lambda_g < 0 or self.lambda_h < 0 or self.rho < 0:
            raise ConstraintError("penalty weights must be non-negative")


@dataclass
class ConstraintSet:
    constraints: list[Constraint] = field(default_factory=list)
    weights: PenaltyWeights = field(default_factory=PenaltyWeights)
    # declarative entries as loaded/declared, kept for lossless file round-trips
    entries: list[tuple[str, dict[str, str]]] = field(default_factory=list)

    def hard(self) -> list[Constraint]:
        return [c for c in self.constraints if c.hardness == "hard"]

    def trends(self) -> list[Constraint]:
        return [c for c in self.constraints if c.kind is Kind.TREND]


DEFAULT_TOL = 1e-6  # satisfaction tolerance in normalized units


def _check_trend_shape(c: Constraint, x: np.ndarray) -> np.ndarray:
    s = c.series.values
    if s.shape != x.shape:
        raise ConstraintError(f"trend shape {s.shape} does not match sample shape {x.shape}")
    return s


def penalty(cset: ConstraintSet, x: TimeSeries | np.ndarray,
            weights: PenaltyWeights | None = None) -> float:
    """Soft rendering of every constraint; non-negative, zero iff all satisfied."""
    arr = x.values if isinstance(x, TimeSeries) else np.asarray(x, dtype=np.float64)
    w = weights if weights is not None else cset.weights
    total = 0.0
    for c in cset.constraints:
        if c.kind is Kind.INEQ:
            total += w.lambda_g * max(0.0, eval_expr(c.expr, arr))
        elif c.kind is Kind.EQ:
            total += w.lambda_h * eval_expr(c.expr, arr) ** 2
        elif c.kind is Kind.FIXED_POINT:
            if not (0 <= c.i < arr.shape[0] and 0 <= c.j < arr.shape[1]):
                raise ConstraintError(f"fixed point ({c.i},{c.j}) outside grid")
            total += w.lambda_h * (arr[c.i, c.j] - c.value) ** 2
        elif c.kind is Kind.TREND:
            s = _check_trend_shape(c, arr)
            total += float(np.sum((s - arr) ** 2))
    return total


def penalty_node(cset: ConstraintSet, node: T.Tensor,
                 weights: PenaltyWeights | None = None) -> T.Tensor:
    """Tape version of `penalty` on an (L, K) node, for nested differentiation."""
    w = weights if weights is not None else cset.weights
    length, features = node.shape
    terms: list[T.Tensor] = []
    for c in cset.constraints:
        if c.kind is Kind.INEQ:
            g = T.relu(compile_expr(c.expr, node))
            terms.append(T.mul(g, T.Tensor(np.asarray(w.lambda_g))))
        elif c.kind is Kind.EQ:
            h = T.square(compile_expr(c.expr, node))
            terms.append(T.mul(h, T.Tensor(np.asarray(w.lambda_h))))
        elif c.kind is Kind.FIXED_POINT:
            if not (0 <= c.i < length and 0 <= c.j < features):
                raise ConstraintError(f"fixed point ({c.i},{c.j}) outside grid")
            p = T.reshape(T.slice_(node, [(c.i, c.i + 1), (c.j, c.j + 1)]), ())
            d = T.square(T.sub(p, T.Tensor(np.asarray(c.value))))
            terms.append(T.mul(d, T.Tensor(np.asarray(w.lambda_h))))
        elif c.kind is Kind.TREND:
            s = _check_trend_shape(c, node.data)
            terms.append(T.tsum(T.square(T.sub(T.Tensor(s), node))))
    if not terms:
        return T.Tensor(np.asarray(0.0))
    acc = terms[0]
    for t in terms[1:]:
        acc = T.add(acc, t)
    return acc


def penalty_grad(cset: ConstraintSet, x: TimeSeries | np.ndarray,
                 weights: PenaltyWeights | None = None) -> np.ndarray:
    """Gradient of the penalty w.r.t. every grid value; shape (L, K)."""
    arr = x.values if isinstance(x, TimeSeries) else np.asarray(x, dtype=np.float64)
    graph = T.Graph()
    node = graph.leaf(arr)
    root = penalty_node(cset, node, weights)
    if root.graph is None:  # empty set: constant zero penalty
        return np.zeros_like(arr)
    return graph.backward(root)[node].data


def is_satisfied(cset: ConstraintSet, x: TimeSeries | np.ndarray,
                 tol: float = DEFAULT_TOL) -> tuple[bool, list[tuple[str, float]]]:
    """Check hard constraints at tolerance `tol`; soft ones never fail."""
    if tol < 0:
        raise ConstraintError("tolerance must be non-negative")
    arr = x.values if isinstance(x, TimeSeries) else np.asarray(x, dtype=np.float64)
    violations: list[tuple[str, float]] = []
    for c in cset.constraints:
        if c.hardness != "hard":
            continue
        if c.kind is Kind.INEQ:
            residual = eval_expr(c.expr, arr)
            if residual > tol:
                violations.append((c.describe(), residual))
        elif c.kind is Kind.EQ:
            residual = abs(eval_expr(c.expr, arr))
            if residual > tol:
                violations.append((c.describe(), residual))
        elif c.kind is Kind.FIXED_POINT:
            if not (0 <= c.i < arr.shape[0] and 0 <= c.j < arr.shape[1]):
                raise ConstraintError(f"fixed point ({c.i},{c.j}) outside grid")
            residual = abs(arr[c.i, c.j] - c.value)
            if residual > tol:
                violations.append((c.describe(), residual))
    return (not violations), violations


# --- builtins ------------------------------------------------------------------

OHLC_ROLES = ("open", "high", "low", "close", "adj_close", "volume")


def global_min_at(i: int, j: int, length: int, features: int) -> ConstraintSet:
    """x[i,j] must not exceed any other grid value."""
    if not (0 <= i < length and 0 <= j < features):
        raise ConstraintError(f"anchor ({i},{j}) outside {length}x{features} grid")
    cons = []
    for a in range(length):
        for b in range(features):
            if (a, b) == (i, j):
                continue
            cons.append(Constraint(Kind.INEQ, "hard",
                                   expr=Bin("-", Point(i, j), Point(a, b)),
                                   label=f"global_min x[{i},{j}] <= x[{a},{b}]"))
    entry = ("constraint", {"kind": "global_min", "i": str(i), "j": str(j)})
    return ConstraintSet(cons, entries=[entry])


def global_max_at(i: int, j: int, length: int, features: int) -> ConstraintSet:
    if not (0 <= i < length and 0 <= j < features):
        raise ConstraintError(f"anchor ({i},{j}) outside {length}x{features} grid")
    cons = []
    for a in range(length):
        for b in range(features):
            if (a, b) == (i, j):
                continue
            cons.append(Constraint(Kind.INEQ, "hard",
                                   expr=Bin("-", Point(a, b), Point(i, j)),
                                   label=f"global_max x[{a},{b}] <= x[{i},{j}]"))
    entry = ("constraint", {"kind": "global_max", "i": str(i), "j": str(j)})
    return ConstraintSet(cons, entries=[entry])


def ohlc(roles: dict[str, int], length: int) -> ConstraintSet:
    """High dominates and Low is dominated by every other price column, per step.

    Volume is excluded from the ordering.  `roles` maps each of
    open/high/low/close/adj_close (and optionally volume) to a column index.
    """
    required = ("open", "high", "low", "close", "adj_close")
    missing = [r for r in required if r not in roles]
    if missing:
        raise ConfigError(f"ohlc roles missing {missing}")
    cols = {r: int(roles[r]) for r in roles}
    if len({cols[r] for r in required}) != len(required):
        raise ConfigError("ohlc roles map different names to the same column")
    high, low = cols["high"], cols["low"]
    others_vs_high = [r for r in required if r != "high"]
    others_vs_low = [r for r in required if r != "low"]
    cons = []
    for t in range(length):
        for r in others_vs_high:
            cons.append(Constraint(Kind.INEQ, "hard",
                                   expr=Bin("-", Point(t, cols[r]), Point(t, high)),
                                   label=f"ohlc[t={t}] {r} <= high"))
        for r in others_vs_low:
            cons.append(Constraint(Kind.INEQ, "hard",
                                   expr=Bin("-", Point(t, low), Point(t, cols[r])),
                                   label=f"ohlc[t={t}] low <= {r}"))
    entry_fields = {"kind": "ohlc"}
    entry_fields.update({r: str(cols[r]) for r in roles})
    return ConstraintSet(cons, entries=[("constraint", entry_fields)])


def merge(*sets: ConstraintSet, weights: PenaltyWeights | None = None) -> ConstraintSet:
    cons, entries = [], []
    for cs in sets:
        cons.extend(cs.constraints)
        entries.extend(cs.entries)
    w = weights if weights is not None else (sets[0].weights if sets else PenaltyWeights())
    return ConstraintSet(cons, weights=w, entries=entries)


def fixed_points(points: list[tuple[int, int, float]]) -> ConstraintSet:
    cons = [Constraint(Kind.FIXED_POINT, i=i, j=j, value=v) for i, j, v in points]
    entries = [("constraint", {"kind": "fixed_point", "i": str(i), "j": str(j),
                               "value": repr(float(v))}) for i, j, v in points]
    return ConstraintSet(cons, entries=entries)


def trend(series: TimeSeries) -> ConstraintSet:
    cons = [Constraint(Kind.TREND, series=series)]
    return ConstraintSet(cons, entries=[("constraint", {"kind": "trend"})])


# --- constraint files ----------------------------------------------------------


def _entry_to_set(fields: dict[str, str], base_dir: str,
                  grid: tuple[int, int] | None) -> ConstraintSet:
    kind = fields.get("kind")
    if kind == "fixed_point":
        return fixed_points([(int(fields["i"]), int(fields["j"]),
                              float(fields["value"]))])
    if kind in ("global_min", "global_max"):
        if grid is None:
            raise ConfigError(f"{kind} constraint needs the sample grid size")
        fn = global_min_at if kind == "global_min" else global_max_at
        return fn(int(fields["i"]), int(fields["j"]), grid[0], grid[1])
    if kind == "ohlc":
        if grid is None:
            raise ConfigError("ohlc constraint needs the sample grid size")
        roles = {r: int(fields[r]) for r in OHLC_ROLES if r in fields}
        return ohlc(roles, grid[0])
    if kind == "trend":
        csv_path = fields.get("csv")
        if not csv_path:
            raise ConfigError("trend constraint entry needs csv = <path>")
        if not os.path.isabs(csv_path):
            csv_path = os.path.join(base_dir, csv_path)
        series = read_samples_csv(csv_path)[0]
        cons = [Constraint(Kind.TREND, series=series)]
        return ConstraintSet(cons, entries=[("constraint",
                                             {"kind": "trend", "csv": fields["csv"]})])
    if kind in ("ineq", "eq"):
        expr = parse_expr(fields["expr"])
        hardness = fields.get("hardness", "hard")
        if hardness not in ("hard", "soft"):
            raise ConfigError(f"invalid hardness '{hardness}'")
        ckind = Kind.INEQ if kind == "ineq" else Kind.EQ
        cons = [Constraint(ckind, hardness, expr=expr, label=fields.get("label", ""))]
        entry = {"kind": kind, "hardness": hardness, "expr": format_expr(expr)}
        if fields.get("label"):
            entry["label"] = fields["label"]
        return ConstraintSet(cons, entries=[("constraint", entry)])
    raise ConfigError(f"unknown constraint kind '{kind}'")


def read_constraints(path: str, grid: tuple[int, int] | None = None) -> ConstraintSet:
    """Load a constraint file; `grid` = (L, K) is needed by grid-sized builtins."""
    sections = cfgfile.read_sections(path)
    base_dir = os.path.dirname(os.path.abspath(path))
    weights = PenaltyWeights()
    parts: list[ConstraintSet] = []
    for name, fields in sections:
        if name == "weights":
            weights = PenaltyWeights(
                lambda_g=cfgfile.get_float(fields, "lambda_g", 1.0),
                lambda_h=cfgfile.get_float(fields, "lambda_h", 1.0),
                rho=cfgfile.get_float(fields, "rho", 1.0))
        elif name == "constraint":
            parts.append(_entry_to_set(fields, base_dir, grid))
        else:
            raise ConfigError(f"{path}: unknown section [{name}]")
    merged = merge(*parts) if parts else ConstraintSet()
    merged.weights = weights
    return merged


def write_constraints(cset: ConstraintSet, path: str) -> None:
    sections: list[tuple[str, dict[str, str]]] = []
    w = cset.weights
    if (w.lambda_g, w.lambda_h, w.rho) != (1.0, 1.0, 1.0):
        sections.append(("weights", {"lambda_g": repr(w.lambda_g),
                                     "lambda_h": repr(w.lambda_h),
                                     "rho": repr(w.rho)}))
    trend_no = 0
    for name, fields in cset.entries:
        if fields.get("kind") == "trend" and "csv" not in fields:
            # inline-declared trend: persist its series next to the file
            series = cset.trends()[trend_no].series
            csv_name = f"{os.path.splitext(os.path.basename(path))[0]}_trend{trend_no}.csv"
            write_samples_csv(os.path.join(os.path.dirname(os.path.abspath(path)), csv_name),
                              [series])
            fields = dict(fields)
            fields["csv"] = csv_name
            trend_no += 1
        sections.append((name, fields))
    cfgfile.write_sections(path, sections)


def parse_fixed_points_arg(text: str) -> ConstraintSet:
    """CLI inline form: "6,0=0.2;18,0=-0.1"."""
    points = []
    for part in text.split(";"):
        part = part.strip()
        if not part:
            continue
        try:
            left, value = part.split("=")
            i, j = left.split(",")
            points.append((int(i), int(j), float(value)))
        except ValueError as exc:
            raise ConfigError(f"bad fixed-point spec '{part}', want i,j=value") from exc
    if not points:
        raise ConfigError("no fixed points given")
    return fixed_points(points)
