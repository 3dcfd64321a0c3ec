"""Declarative pipelines and the datasets they run over.

A QueryExpr is pure data: a named source, an ordered list of stages and a
terminal fold.  The same QueryExpr runs unchanged on every execution strategy,
which is the whole point — the strategies differ only in who drives iteration
and how many boundary crossings that costs.

Datasets come in two shapes.  IntsDataset is a contiguous 64-bit array;
RefsDataset holds records with the value one indirection away, so element
access genuinely pays a pointer chase.
"""

from __future__ import annotations

from array import array
from dataclasses import dataclass
from enum import Enum

from .errors import InvalidPipeline, UnresolvedDataset
from .exprs import Cmp, wrap_i64
from .lambdas import Lambda


# ---------------------------------------------------------------------------
# Datasets
# ---------------------------------------------------------------------------


class Ref:
    """A record holding one value behind a level of indirection."""

    __slots__ = ("value",)

    def __init__(self, value: int):
        self.value = value

    def __repr__(self) -> str:
        return f"Ref({self.value})"


class IntsDataset:
    """A contiguous array of signed 64-bit values."""

    __slots__ = ("data",)

    def __init__(self, values):
        self.data = array("q", (wrap_i64(v) for v in values))

    def __len__(self) -> int:
        return len(self.data)


class RefsDataset:
    """An array of Ref records; one indirection per element access."""

    __slots__ = ("data",)

    def __init__(self, values):
        self.data = [Ref(wrap_i64(v)) for v in values]

    def __len__(self) -> int:
        return len(self.data)


Dataset = IntsDataset | RefsDataset


def ints_dataset(values) -> IntsDataset:
    return IntsDataset(values)


def refs_dataset(values) -> RefsDataset:
    return RefsDataset(values)


def resolve_dataset(datasets, name: str) -> Dataset:
    try:
        return datasets[name]
    except KeyError:
        raise UnresolvedDataset(f"no dataset bound to {name!r}") from None


def dataset_values(ds: Dataset) -> list[int]:
    """Plain value list, indirections resolved.  Oracle/test convenience."""
    if isinstance(ds, RefsDataset):
        return [r.value for r in ds.data]
    return list(ds.data)


# ---------------------------------------------------------------------------
# Stages and queries
# ---------------------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class Map:
    """Transform each element with an arithmetic lambda."""

    fn: Lambda


@dataclass(frozen=True, slots=True)
class Filter:
    """Keep elements whose predicate lambda holds."""

    predicate: Lambda


@dataclass(frozen=True, slots=True)
class FlatMap:
    """For each element, iterate a named inner dataset through inner stages.

    Inner stage lambdas may reference Capture(0), which is bound to the
    current outer element for the duration of the inner traversal.
    """

    inner_source: str
    stages: tuple


Stage = Map | Filter | FlatMap


class Terminal(Enum):
    SUM = "sum"
    COUNT = "count"


@dataclass(frozen=True, slots=True)
class QueryExpr:
    source: str
    stages: tuple
    terminal: Terminal


def _check_stage_lambda(lam: Lambda, where: str, is_predicate: bool,
                        max_captures: int) -> None:
    if lam.arity != 1:
        raise InvalidPipeline(f"{where}: stage lambdas are unary, got arity {lam.arity}")
    if lam.captures > max_captures:
        raise InvalidPipeline(
            f"{where}: at most {max_captures} capture slot(s) allowed here, "
            f"lambda declares {lam.captures}")
    body_is_cmp = type(lam.body) is Cmp
    if is_predicate and not body_is_cmp:
        raise InvalidPipeline(f"{where}: predicate body must be comparison-rooted")
    if not is_predicate and body_is_cmp:
        raise InvalidPipeline(f"{where}: map body must be arithmetic, not a comparison")


def build_query(source: str, stages, terminal: Terminal) -> QueryExpr:
    """Validate and assemble a pipeline.

    Rules enforced here: stage lambdas are unary; top-level lambdas capture
    nothing; predicates are comparison-rooted and map bodies are not; flat-map
    nesting is at most one level deep; and a query holds at most one FlatMap
    (the fused plan format has exactly one optional inner loop, and every
    strategy accepts the same query language).
    """
    if not isinstance(terminal, Terminal):
        raise InvalidPipeline(f"unknown terminal: {terminal!r}")
    stages = tuple(stages)
    flatmaps = 0
    for pos, stage in enumerate(stages):
        where = f"stage {pos}"
        if isinstance(stage, Map):
            _check_stage_lambda(stage.fn, where, False, 0)
        elif isinstance(stage, Filter):
            _check_stage_lambda(stage.predicate, where, True, 0)
        elif isinstance(stage, FlatMap):
            flatmaps += 1
            if flatmaps > 1:
                raise InvalidPipeline("at most one flat-map per query")
            for ipos, inner in enumerate(stage.stages):
                iwhere = f"{where}.inner {ipos}"
                if isinstance(inner, Map):
                    _check_stage_lambda(inner.fn, iwhere, False, 1)
                elif isinstance(inner, Filter):
                    _check_stage_lambda(inner.predicate, iwhere, True, 1)
                else:
                    raise InvalidPipeline(
                        f"{iwhere}: flat-map nesting is limited to depth 2")
        else:
            raise InvalidPipeline(f"{where}: not a pipeline stage: {stage!r}")
    return QueryExpr(source, stages, terminal)


# ---------------------------------------------------------------------------
# Stage slot layout
# ---------------------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class StageLayout:
    """Counter slot assignment for a query.

    Slot 0 is the source, slots 1..k the top-level stages in order.  A
    flat-map's inner source and inner stages get the slots after that, so the
    inner machinery is attributable without disturbing top-level numbering.
    """

    labels: tuple
    top_slots: tuple
    flatmap_pos: int | None
    inner_source_slot: int | None
    inner_slots: tuple


def _stage_kind(stage: Stage) -> str:
    if isinstance(stage, Map):
        return "map"
    if isinstance(stage, Filter):
        return "filter"
    return "flat_map"


def layout_query(query: QueryExpr) -> StageLayout:
    labels = ["source"]
    top_slots = []
    flatmap_pos = None
    inner_source_slot = None
    inner_slots = []
    flatmap = None
    for pos, stage in enumerate(query.stages):
        top_slots.append(len(labels))
        labels.append(f"{pos}:{_stage_kind(stage)}")
        if isinstance(stage, FlatMap):
            flatmap_pos = pos
            flatmap = stage
    if flatmap is not None:
        inner_source_slot = len(labels)
        labels.append(f"{flatmap_pos}.inner:source")
        for ipos, inner in enumerate(flatmap.stages):
            inner_slots.append(len(labels))
            labels.append(f"{flatmap_pos}.inner.{ipos}:{_stage_kind(inner)}")
    return StageLayout(tuple(labels), tuple(top_slots), flatmap_pos,
                       inner_source_slot, tuple(inner_slots))
