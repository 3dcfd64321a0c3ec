"""Query fusion: compile a pipeline into a loop nest with inlined bodies.

optimize() folds every stage lambda into guard and body expressions by
substitution, so the resulting plan holds no lambda references at all.  Filters
become guards at their loop level: a filter before any map guards on the raw
loop variable, a filter after maps guards on the composed body expression.  A
flat-map contributes the inner loop; its lambdas' Capture(0) references are
rebound to the (composed) outer element during inlining.

exec_fused() interprets the plan as nested loops over resolved datasets.  It
touches no cursors, no consumers and no call sites: zero control dispatches,
zero lambda applies, zero instantiations.  Plan text rendering is stable and
documented here because golden tests pin it:

    loop0: for x0 in <source>[0:len) if <guard> && <guard>
    loop1: for x1 in <inner>[0:len) if <guard>        (only when a flat-map fused)
    body: <expr>
    acc: sum(init=0) | count(init=0)

x0 names the outer loop variable (Param 0), x1 the inner one (Param 1); the
" if ..." part is omitted for a guard-free loop.
"""

from __future__ import annotations

from dataclasses import dataclass
from operator import attrgetter

from .counters import CounterSet
from .errors import InvalidPipeline
from .exprs import (
    Arith,
    Capture,
    Cmp,
    Const,
    Param,
    ScalarExpr,
    I64_MAX,
    I64_MIN,
    format_expr,
    max_capture_slot,
    max_param_index,
    wrap_i64,
)
from .lambdas import compile_binary, compile_unary
from .query import Filter, FlatMap, Map, QueryExpr, RefsDataset, Terminal, resolve_dataset

_MASK = (1 << 64) - 1
_BIAS = 1 << 63


def substitute(expr: ScalarExpr, replacement: ScalarExpr,
               captures: dict | None = None) -> ScalarExpr:
    """Inline: replace Param(0) with `replacement`, rebind mapped captures.

    Evaluating the substituted tree equals evaluating `expr` with Param(0)
    bound to the value of `replacement` — the composition law the property
    tests hold this to.
    """
    kind = type(expr)
    if kind is Param:
        return replacement if expr.index == 0 else expr
    if kind is Capture:
        if captures is not None and expr.slot in captures:
            return captures[expr.slot]
        return expr
    if kind is Const:
        return expr
    left = substitute(expr.left, replacement, captures)
    right = substitute(expr.right, replacement, captures)
    if kind is Arith:
        return Arith(expr.op, left, right)
    return Cmp(expr.op, left, right)


@dataclass(frozen=True, slots=True)
class LoopLevel:
    """One loop of the nest: its dataset and the guards tested at this depth."""

    source: str
    guards: tuple


@dataclass(frozen=True, slots=True)
class FusedPlan:
    """A query compiled to at most two nested loops plus an accumulator.

    outer_element is only set for two-loop plans: the composed expression the
    inner lambdas' captures were rebound to.  It is kept so execution can
    preserve evaluation effects — a mod-by-zero in a map before the flat-map
    must still raise even when no surviving inner tree references the value.
    """

    outer: LoopLevel
    inner: LoopLevel | None
    body: ScalarExpr
    terminal: Terminal
    outer_element: ScalarExpr | None = None


def _may_raise(expr: ScalarExpr) -> bool:
    """True when evaluating the tree can fail (it contains a mod node)."""
    kind = type(expr)
    if kind in (Const, Param, Capture):
        return False
    if kind is Arith and expr.op == "mod":
        return True
    return _may_raise(expr.left) or _may_raise(expr.right)


def _anchor(effectful: ScalarExpr, tree: ScalarExpr) -> ScalarExpr:
    """`tree`, still evaluating `effectful` first: ((effectful * 0) + tree)."""
    return Arith("add", Arith("mul", effectful, Const(0)), tree)


def _fold_map(body: ScalarExpr, cur: ScalarExpr, rebind=None) -> ScalarExpr:
    """Inline a map over the running element expression.

    A body with no Param(0) erases `cur` from everything downstream; when
    `cur` can fail, keep it anchored so the failure still happens in order.
    """
    new = substitute(body, cur, rebind)
    if max_param_index(body) < 0 and _may_raise(cur):
        return _anchor(cur, new)
    return new


def _fold_guard(pred: ScalarExpr, cur: ScalarExpr, rebind=None) -> ScalarExpr:
    """Inline a predicate; anchor `cur` when the predicate never reads it.

    A constant guard can drop an element before anything else looks at it,
    so a failing map ahead of it must fire here, as it would stage by stage.
    """
    guard = substitute(pred, cur, rebind)
    if max_param_index(pred) < 0 and _may_raise(cur):
        return Cmp(guard.op, _anchor(cur, guard.left), guard.right)
    return guard


def optimize(query: QueryExpr) -> FusedPlan:
    """Fuse a query into a FusedPlan.  Pure tree rewriting, no execution."""
    cur: ScalarExpr = Param(0)
    outer_guards: list = []
    inner_guards: list = []
    inner_source = None
    outer_element = None
    depth = 0
    for stage in query.stages:
        if isinstance(stage, Map):
            cur = _fold_map(stage.fn.body, cur)
        elif isinstance(stage, Filter):
            guard = _fold_guard(stage.predicate.body, cur)
            (inner_guards if depth else outer_guards).append(guard)
        elif isinstance(stage, FlatMap):
            outer_element = cur
            inner_source = stage.inner_source
            depth = 1
            cur = Param(1)
            rebind = {0: outer_element}
            for inner in stage.stages:
                if isinstance(inner, Map):
                    cur = _fold_map(inner.fn.body, cur, rebind)
                else:
                    inner_guards.append(
                        _fold_guard(inner.predicate.body, cur, rebind))
        else:
            raise InvalidPipeline(f"not a pipeline stage: {stage!r}")
    checked = (*outer_guards, *inner_guards, cur) if outer_element is None \
        else (*outer_guards, *inner_guards, cur, outer_element)
    for tree in checked:
        if max_capture_slot(tree) >= 0:
            raise InvalidPipeline("fusion left an unresolved capture slot")
    inner = LoopLevel(inner_source, tuple(inner_guards)) if inner_source else None
    return FusedPlan(LoopLevel(query.source, tuple(outer_guards)), inner,
                     cur, query.terminal,
                     outer_element if inner_source else None)


def render_plan(plan: FusedPlan) -> str:
    """The stable text form documented in the module docstring."""
    def loop_line(idx: int, var: str, level: LoopLevel) -> str:
        line = f"loop{idx}: for {var} in {level.source}[0:len)"
        if level.guards:
            line += " if " + " && ".join(format_expr(g) for g in level.guards)
        return line

    lines = [loop_line(0, "x0", plan.outer)]
    if plan.inner is not None:
        lines.append(loop_line(1, "x1", plan.inner))
    lines.append(f"body: {format_expr(plan.body)}")
    lines.append(f"acc: {plan.terminal.value}(init=0)")
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# Plan interpretation
# ---------------------------------------------------------------------------

_IDENTITY = Param(0)
_get_value = attrgetter("value")


def _values(ds, lo: int, hi: int):
    if isinstance(ds, RefsDataset):
        return map(_get_value, ds.data[lo:hi])
    return ds.data[lo:hi]


def _inner_sum_loop(body: ScalarExpr):
    """A whole-inner-loop accumulator for the hot fused nested shapes.

    Returns f(outer_value, inner_values) -> partial sum, or None when the
    body is not one of the recognized shapes.
    """
    if type(body) is Arith and body.op == "mul":
        l, r = body.left, body.right
        if type(l) is Param and type(r) is Param and {l.index, r.index} == {0, 1}:
            def run(v0, vals):
                acc = 0
                for v1 in vals:
                    t = v1 * v0
                    if t < I64_MIN or t > I64_MAX:
                        t = ((t + _BIAS) & _MASK) - _BIAS
                    acc += t
                return acc
            return run
    if body == Param(1):
        def run(v0, vals):
            acc = 0
            for v1 in vals:
                acc += v1
            return acc
        return run
    return None


def exec_fused(plan: FusedPlan, datasets, counters: CounterSet | None = None,
               lo: int = 0, hi: int | None = None) -> int:
    """Interpret the loop nest over [lo, hi) of the outer source.

    `counters` is accepted for interface symmetry with the other strategies
    and is left untouched: a fused run has nothing to count.
    """
    outer_ds = resolve_dataset(datasets, plan.outer.source)
    if hi is None:
        hi = len(outer_ds)
    is_sum = plan.terminal is Terminal.SUM
    guards = [compile_unary(g) for g in plan.outer.guards]

    if plan.inner is None:
        body = plan.body
        if not guards and body == _IDENTITY:
            if is_sum:
                return wrap_i64(sum(_values(outer_ds, lo, hi)))
            return hi - lo
        b = compile_unary(body)
        g1 = guards[0] if len(guards) == 1 else None
        acc = 0
        if g1 is not None:
            if is_sum:
                for v in _values(outer_ds, lo, hi):
                    if g1(v):
                        acc += b(v)
            else:
                for v in _values(outer_ds, lo, hi):
                    if g1(v):
                        b(v)
                        acc += 1
        elif not guards:
            if is_sum:
                for v in _values(outer_ds, lo, hi):
                    acc += b(v)
            else:
                for v in _values(outer_ds, lo, hi):
                    b(v)
                    acc += 1
        else:
            for v in _values(outer_ds, lo, hi):
                for g in guards:
                    if not g(v):
                        break
                else:
                    if is_sum:
                        acc += b(v)
                    else:
                        b(v)
                        acc += 1
        return wrap_i64(acc) if is_sum else acc

    # two-level nest: the inner dataset is traversed in full per outer element
    inner_ds = resolve_dataset(datasets, plan.inner.source)
    inner_vals = list(_values(inner_ds, 0, len(inner_ds)))
    inner_guards = [compile_binary(g) for g in plan.inner.guards]
    body2 = compile_binary(plan.body)
    # maps folded into the outer element still fail per element, even when the
    # inner loop would never evaluate them
    force = None
    if plan.outer_element is not None and _may_raise(plan.outer_element):
        force = compile_unary(plan.outer_element)
    acc = 0
    fast_inner = None
    if is_sum and not inner_guards:
        fast_inner = _inner_sum_loop(plan.body)
    for v0 in _values(outer_ds, lo, hi):
        ok = True
        for g in guards:
            if not g(v0):
                ok = False
                break
        if not ok:
            continue
        if force is not None:
            force(v0)
        if fast_inner is not None:
            acc += fast_inner(v0, inner_vals)
        elif not inner_guards:
            if is_sum:
                for v1 in inner_vals:
                    acc += body2(v0, v1)
            else:
                for v1 in inner_vals:
                    body2(v0, v1)
                    acc += 1
        else:
            for v1 in inner_vals:
                keep = True
                for g in inner_guards:
                    if not g(v0, v1):
                        keep = False
                        break
                if keep:
                    if is_sum:
                        acc += body2(v0, v1)
                    else:
                        body2(v0, v1)
                        acc += 1
    return wrap_i64(acc) if is_sum else acc


def run_fused(query: QueryExpr, datasets, counters: CounterSet | None = None) -> int:
    """optimize() then exec_fused() in one step."""
    return exec_fused(optimize(query), datasets, counters)
