"""Lambdas as first-class values, and the call-site model that counts them.

A Lambda is an expression tree plus an arity, a capture count and a call-site
id.  Call sites go through three observable phases, each of which the
CallSiteCache accounts for separately:

  linkage       first touch of a site compiles its body once (link_events)
  capture       binding capture values produces an invocable instance; a
                non-capturing site reuses a single cached instance forever,
                a capturing site produces one instance per capture event
                (instantiations)
  invocation    calling the instance evaluates the body (the engines charge
                this to the owning stage's lambda_applies)

The compiled instances are plain Python callables built by folding the tree
into nested closures, with the handful of shapes that dominate the benchmark
suite special-cased.  They must agree with eval_scalar bit for bit; the test
suite holds them to that.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

from .counters import CounterSet
from .errors import ArityMismatch, DivisionByZero, InvalidExpression
from .exprs import (
    Arith,
    Capture,
    Const,
    Param,
    ScalarExpr,
    I64_MAX,
    I64_MIN,
    max_capture_slot,
    max_param_index,
    mod_i64,
)

_MASK = (1 << 64) - 1
_BIAS = 1 << 63

_site_ids = itertools.count()


@dataclass(frozen=True, slots=True)
class Lambda:
    """An anonymous function value: body tree, arity, captures, call site."""

    arity: int
    captures: int
    body: ScalarExpr
    site_id: int

    def __post_init__(self) -> None:
        if self.arity < 1:
            raise InvalidExpression(f"lambda arity must be >= 1, got {self.arity}")
        if self.captures < 0:
            raise InvalidExpression(f"negative capture count: {self.captures}")
        if max_param_index(self.body) >= self.arity:
            raise InvalidExpression(
                f"body references param {max_param_index(self.body)} "
                f"but arity is {self.arity}")
        if max_capture_slot(self.body) >= self.captures:
            raise InvalidExpression(
                f"body references capture slot {max_capture_slot(self.body)} "
                f"but only {self.captures} declared")


def make_lambda(body: ScalarExpr, arity: int = 1, captures: int = 0) -> Lambda:
    """Build a Lambda with a fresh, process-unique call-site id."""
    return Lambda(arity, captures, body, next(_site_ids))


def is_capturing(lam: Lambda) -> bool:
    return lam.captures > 0


# ---------------------------------------------------------------------------
# Closure compilation: expression tree -> Python callable
# ---------------------------------------------------------------------------
# Linking a site compiles its body once.  Both compilers return callables over
# positional parameters; capture values are baked in at capture time so the
# per-invocation path carries no environment lookups it does not need.

def _wrap_fn(op):
    if op == "add":
        def fn(a, b):
            t = a + b
            return t if I64_MIN <= t <= I64_MAX else ((t + _BIAS) & _MASK) - _BIAS
    elif op == "sub":
        def fn(a, b):
            t = a - b
            return t if I64_MIN <= t <= I64_MAX else ((t + _BIAS) & _MASK) - _BIAS
    elif op == "mul":
        def fn(a, b):
            t = a * b
            return t if I64_MIN <= t <= I64_MAX else ((t + _BIAS) & _MASK) - _BIAS
    else:
        fn = mod_i64
    return fn


def _mod_const(k: int):
    """Truncated remainder by a fixed non-zero divisor."""
    ak = abs(k)

    def fn(x, _ak=ak):
        return x % _ak if x >= 0 else -((-x) % _ak)

    return fn


def _raise_div_zero(*_args):
    raise DivisionByZero("mod by zero")


def compile_unary(expr: ScalarExpr, captures: tuple = ()):
    """Compile a one-parameter, capture-resolved tree to a callable f(x)."""
    kind = type(expr)
    if kind is Const:
        v = expr.value
        return lambda x, _v=v: _v
    if kind is Param:
        if expr.index != 0:
            raise InvalidExpression(f"param {expr.index} in unary compile")
        return lambda x: x
    if kind is Capture:
        if expr.slot >= len(captures):
            raise InvalidExpression(f"unbound capture slot {expr.slot}")
        v = captures[expr.slot]
        return lambda x, _v=v: _v
    left, right, op = expr.left, expr.right, expr.op
    lp = type(left) is Param
    rp = type(right) is Param
    if kind is Arith:
        if op == "mul" and lp and rp:
            def sq(x):
                t = x * x
                return t if t <= I64_MAX else ((t + _BIAS) & _MASK) - _BIAS
            return sq
        if rp and not lp and op in ("add", "mul") and type(left) in (Const, Capture):
            # commutative ops: move the parameter left so one shape covers both
            left, right = right, left
            lp, rp = True, False
        if lp and type(right) in (Const, Capture):
            if type(right) is Const:
                c = right.value
            else:
                if right.slot >= len(captures):
                    raise InvalidExpression(f"unbound capture slot {right.slot}")
                c = captures[right.slot]
            if op == "add":
                def fn(x, _c=c):
                    t = x + _c
                    return t if I64_MIN <= t <= I64_MAX else ((t + _BIAS) & _MASK) - _BIAS
                return fn
            if op == "sub":
                def fn(x, _c=c):
                    t = x - _c
                    return t if I64_MIN <= t <= I64_MAX else ((t + _BIAS) & _MASK) - _BIAS
                return fn
            if op == "mul":
                def fn(x, _c=c):
                    t = x * _c
                    return t if I64_MIN <= t <= I64_MAX else ((t + _BIAS) & _MASK) - _BIAS
                return fn
            if c == 0:
                return _raise_div_zero
            return _mod_const(c)
        lf = compile_unary(left, captures)
        rf = compile_unary(right, captures)
        o = _wrap_fn(op)
        return lambda x, _l=lf, _r=rf, _o=o: _o(_l(x), _r(x))
    # Cmp root
    lf = compile_unary(left, captures)
    if type(right) is Const:
        c = right.value
        if op == "eq":
            return lambda x, _l=lf, _c=c: _l(x) == _c
        return lambda x, _l=lf, _c=c: _l(x) < _c
    rf = compile_unary(right, captures)
    if op == "eq":
        return lambda x, _l=lf, _r=rf: _l(x) == _r(x)
    return lambda x, _l=lf, _r=rf: _l(x) < _r(x)


def compile_binary(expr: ScalarExpr):
    """Compile a capture-free two-parameter tree to a callable f(x0, x1)."""
    kind = type(expr)
    if kind is Const:
        v = expr.value
        return lambda a, b, _v=v: _v
    if kind is Param:
        if expr.index == 0:
            return lambda a, b: a
        if expr.index == 1:
            return lambda a, b: b
        raise InvalidExpression(f"param {expr.index} in binary compile")
    if kind is Capture:
        raise InvalidExpression("capture slot in a fused expression")
    left, right, op = expr.left, expr.right, expr.op
    if kind is Arith:
        if op == "mul" and type(left) is Param and type(right) is Param:
            if left.index == 1 and right.index == 0:
                def fn(a, b):
                    t = b * a
                    return t if I64_MIN <= t <= I64_MAX else ((t + _BIAS) & _MASK) - _BIAS
                return fn
            if left.index == 0 and right.index == 1:
                def fn(a, b):
                    t = a * b
                    return t if I64_MIN <= t <= I64_MAX else ((t + _BIAS) & _MASK) - _BIAS
                return fn
        lf = compile_binary(left)
        rf = compile_binary(right)
        o = _wrap_fn(op)
        return lambda a, b, _l=lf, _r=rf, _o=o: _o(_l(a, b), _r(a, b))
    lf = compile_binary(left)
    rf = compile_binary(right)
    if op == "eq":
        return lambda a, b, _l=lf, _r=rf: _l(a, b) == _r(a, b)
    return lambda a, b, _l=lf, _r=rf: _l(a, b) < _r(a, b)


def _capture_template(expr: ScalarExpr):
    """Compile once into a maker: maker(captures) -> f(x).

    The tree is analyzed at link time; the per-capture work is only the
    closure construction for the bound values.
    """
    kind = type(expr)
    if kind is Arith and type(expr.left) is Param and type(expr.right) is Capture:
        op, slot = expr.op, expr.right.slot
        if op == "mul":
            def maker(caps, _slot=slot):
                c = caps[_slot]

                def fn(x, _c=c):
                    t = x * _c
                    return t if I64_MIN <= t <= I64_MAX else ((t + _BIAS) & _MASK) - _BIAS
                return fn
            return maker
        if op == "add":
            def maker(caps, _slot=slot):
                c = caps[_slot]

                def fn(x, _c=c):
                    t = x + _c
                    return t if I64_MIN <= t <= I64_MAX else ((t + _BIAS) & _MASK) - _BIAS
                return fn
            return maker
    return lambda caps: compile_unary(expr, caps)


# ---------------------------------------------------------------------------
# Call sites
# ---------------------------------------------------------------------------


class _Site:
    __slots__ = ("lam", "instance", "template", "counters")

    def __init__(self, lam, counters):
        self.lam = lam
        self.instance = None
        self.template = None
        self.counters = counters


class CallSiteCache:
    """Per-run registry of call sites and their closure accounting.

    Counters are written straight into a CounterSet's site table so that one
    object carries everything a run observed.  A cache is private to one run
    (or one parallel worker); nothing here is thread-safe by design.
    """

    def __init__(self, counters: CounterSet | None = None):
        self.counters = counters if counters is not None else CounterSet()
        self._sites: dict[int, _Site] = {}

    def bind(self, lam: Lambda, captures: tuple = ()):
        """Link on first touch, then produce (or reuse) an invocable instance."""
        site = self._sites.get(lam.site_id)
        if site is None:
            site = self._link(lam)
        if lam.captures == 0:
            return site.instance
        if len(captures) != lam.captures:
            raise ArityMismatch(
                f"lambda captures {lam.captures} values, got {len(captures)}")
        site.counters.instantiations += 1
        return site.template(captures)

    def _link(self, lam: Lambda) -> _Site:
        ctr = self.counters.site(lam.site_id)
        site = _Site(lam, ctr)
        ctr.link_events += 1
        if lam.arity != 1:
            raise ArityMismatch(f"stage lambdas are unary, got arity {lam.arity}")
        if lam.captures == 0:
            site.instance = compile_unary(lam.body)
            ctr.instantiations += 1
        else:
            site.template = _capture_template(lam.body)
        self._sites[lam.site_id] = site
        return site

    def stats(self, site_id: int):
        """(link_events, instantiations) for a site; zeros if never touched."""
        ctr = self.counters.sites.get(site_id)
        if ctr is None:
            return (0, 0)
        return (ctr.link_events, ctr.instantiations)


def apply_lambda(cache: CallSiteCache, lam: Lambda, params: tuple,
                 captures: tuple = (), stage=None):
    """One-shot apply: capture (one event if capturing) then invoke.

    Equivalent to eval_scalar on the same bindings; the counters are the only
    side effect.  `stage` is an optional StageCounters to charge the apply to.
    """
    if len(params) != lam.arity:
        raise ArityMismatch(f"lambda arity {lam.arity}, got {len(params)} params")
    fn = cache.bind(lam, captures)
    if stage is not None:
        stage.lambda_applies += 1
    return fn(*params)
