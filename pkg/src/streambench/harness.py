"""Measurement harness: warmup, timed iterations, Student-T inference.

A benchmark task is a setup action (builds inputs, never timed) plus a body
returning a value.  measure() runs the body warmup times, then iters timed
iterations on the monotonic clock, checks every result against the expected
value (a wrong result aborts — no timing for wrong answers), and feeds every
result through a sink whose running checksum keeps the work observable so
nothing can be optimized away.  Garbage collection is requested once before
the run so earlier allocations are less likely to bill this benchmark.

The 95% confidence half-interval uses the Student-T 0.975 quantile: an
embedded table for 1..60 degrees of freedom (values good to double precision)
and the normal approximation beyond.  Sample standard deviation uses the n-1
denominator.  Samples are never discarded; outliers widen the interval, which
is the honest outcome.
"""

from __future__ import annotations

import gc
import math
import time
from dataclasses import dataclass
from typing import Any, Callable

from .errors import ResultMismatch, TooFewSamples
from .exprs import wrap_i64

# Student-T distribution, two-sided 95% (i.e. 0.975 quantile), df 1..60.
_T_975 = {
    1: 12.706204736432095, 2: 4.302652729696142, 3: 3.182446305284263,
    4: 2.7764451051977987, 5: 2.570581835636314, 6: 2.4469118511449692,
    7: 2.3646242515927844, 8: 2.306004135204166, 9: 2.2621571628540993,
    10: 2.2281388519649385, 11: 2.200985160082949, 12: 2.1788128296634177,
    13: 2.1603686564610127, 14: 2.1447866879169273, 15: 2.131449545559323,
    16: 2.1199052992210112, 17: 2.1098155778331806, 18: 2.10092204024096,
    19: 2.093024054408263, 20: 2.0859634472658364, 21: 2.079613844727662,
    22: 2.0738730679040147, 23: 2.0686576104190406, 24: 2.0638985616280205,
    25: 2.059538552753294, 26: 2.055529438642871, 27: 2.0518305164802833,
    28: 2.048407141795244, 29: 2.045229642132703, 30: 2.0422724563012373,
    31: 2.0395134463964077, 32: 2.036933343460101, 33: 2.0345152974493383,
    34: 2.032244509317718, 35: 2.0301079282503425, 36: 2.0280940009804502,
    37: 2.0261924630291093, 38: 2.024394163911969, 39: 2.0226909200367604,
    40: 2.0210753903062733, 41: 2.019540970441376, 42: 2.018081702818444,
    43: 2.016692199227824, 44: 2.0153675744437636, 45: 2.014103388880846,
    46: 2.0128955989194286, 47: 2.0117405137297655, 48: 2.010634757624232,
    49: 2.0095752371292397, 50: 2.008559112100761, 51: 2.007583770315836,
    52: 2.006646805061688, 53: 2.0057459953178687, 54: 2.004879288188057,
    55: 2.004044783289146, 56: 2.003240718847872, 57: 2.002465459291007,
    58: 2.0017174841452356, 59: 2.0009953780882674, 60: 2.00029782201426,
}
_NORMAL_975 = 1.959963984540054

_SINK_MIX = 6364136223846793005


def t_quantile_975(df: int) -> float:
    """Two-sided 95% t quantile; normal approximation past the table."""
    if df < 1:
        raise TooFewSamples(f"degrees of freedom must be >= 1, got {df}")
    return _T_975.get(df, _NORMAL_975)


def student_t_stats(samples) -> tuple[float, float, float]:
    """(mean, sample stddev, 95% CI half-width) of a sample vector."""
    n = len(samples)
    if n < 2:
        raise TooFewSamples(f"need at least 2 samples, got {n}")
    mean = math.fsum(samples) / n
    var = math.fsum((x - mean) ** 2 for x in samples) / (n - 1)
    stddev = math.sqrt(var)
    ci95 = t_quantile_975(n - 1) * stddev / math.sqrt(n)
    return mean, stddev, ci95


@dataclass(frozen=True)
class SampleStats:
    samples: tuple
    mean: float
    stddev: float
    ci95_half: float

    @classmethod
    def from_samples(cls, samples) -> "SampleStats":
        mean, stddev, ci95 = student_t_stats(samples)
        return cls(tuple(samples), mean, stddev, ci95)

    @property
    def low(self) -> float:
        return self.mean - self.ci95_half

    @property
    def high(self) -> float:
        return self.mean + self.ci95_half


class Sink:
    """Dead-code sink: folds every observed value into a running checksum."""

    __slots__ = ("checksum",)

    def __init__(self):
        self.checksum = 0

    def fold(self, value: int) -> None:
        self.checksum = wrap_i64(self.checksum * _SINK_MIX + value)

    def reset(self) -> None:
        self.checksum = 0


DEFAULT_SINK = Sink()


@dataclass(frozen=True)
class BenchTask:
    """One measurable unit: named setup + body + the result it must produce."""

    name: str
    setup: Callable[[], Any]
    body: Callable[[Any], int]
    expected: int


def _check(task: BenchTask, result: int, phase: str) -> None:
    if result != task.expected:
        raise ResultMismatch(
            f"{task.name} ({phase}): got {result}, expected {task.expected}")


def measure(task: BenchTask, warmup: int = 10, iters: int = 10,
            sink: Sink = DEFAULT_SINK, clock=time.perf_counter_ns) -> SampleStats:
    """Run a task and return per-iteration wall times in milliseconds.

    Setup runs once, outside any timing.  Both warmup and timed results are
    checked and sunk; only timed iterations become samples.
    """
    if warmup < 0:
        raise ValueError(f"warmup must be >= 0, got {warmup}")
    if iters < 2:
        raise TooFewSamples(f"need at least 2 timed iterations, got {iters}")
    state = task.setup()
    gc.collect()
    for _ in range(warmup):
        result = task.body(state)
        sink.fold(result)
        _check(task, result, "warmup")
    samples = []
    for _ in range(iters):
        t0 = clock()
        result = task.body(state)
        t1 = clock()
        sink.fold(result)
        _check(task, result, "timed")
        samples.append((t1 - t0) / 1e6)
    return SampleStats.from_samples(samples)


@dataclass(frozen=True)
class CompareResult:
    """a versus b: ratio of means and what the intervals allow us to say."""

    ratio: float
    intervals_overlap: bool
    significantly_faster: bool


def compare(a: SampleStats, b: SampleStats) -> CompareResult:
    """Is `a` significantly faster than `b`?  Requires disjoint 95% CIs."""
    ratio = a.mean / b.mean if b.mean else math.inf
    overlap = not (a.high < b.low or b.high < a.low)
    return CompareResult(ratio, overlap, a.mean < b.mean and not overlap)
