"""Power and null-convergence studies with CSV output."""

from __future__ import annotations

import csv
import io
import logging
import math
import re
import warnings
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from ovlq import distributions as dist
from ovlq._rng import derive_seed
from ovlq.nulldist import (
    NullTable,
    asymptotic_sf_d2,
    build_null_table,
    build_null_tables,
    cvm_from_u,
    dq_kernel,
    empirical_pvalue,
    simulate_statistics,
)

log = logging.getLogger(__name__)

DEFAULT_PAIRS: tuple[tuple[str, str], ...] = (
    ("normal(0.2,1)", "normal(0,1)"),
    ("normal(0,1.1)", "normal(0,1)"),
    ("trapezoidal", "normal(0,1)"),
    ("mixture", "normal(0,1)"),
    ("trapezoidal", "mixture"),
    ("mixture", "trapezoidal"),
)
DEFAULT_TESTS = ("OVL-2", "KS", "CvM")
DESK_N_GRID = tuple(2**k for k in range(3, 11))
FULL_N_GRID = tuple(2**k for k in range(3, 13))
MIN_TRIALS = 100

POWER_COLUMNS = ("sampling_dist", "reference_dist", "n", "test", "trials", "rejections", "power")
CONVERGENCE_COLUMNS = ("n", "a", "empirical_cdf", "asymptotic_cdf")

_OVL_RE = re.compile(r"OVL-(\d+)")


class TooFewTrialsError(ValueError):
    pass


def fmt(x: float) -> str:
    return f"{x:.17g}"


def _table_key(test: str) -> str:
    if test == "KS":
        return "dq1"
    if test == "CvM":
        return "cvm"
    m = _OVL_RE.fullmatch(test)
    if not m or int(m.group(1)) < 1:
        raise ValueError(f"unknown test {test!r}; use OVL-<q>, KS or CvM")
    return f"dq{int(m.group(1))}"


def _kernel(key: str):
    return cvm_from_u if key == "cvm" else dq_kernel(int(key[2:]))


@dataclass(frozen=True)
class PowerRow:
    sampling_dist: str
    reference_dist: str
    n: int
    test: str
    trials: int
    rejections: int

    @property
    def power(self) -> float:
        return self.rejections / self.trials


@dataclass
class PowerGrid:
    rows: list[PowerRow] = field(default_factory=list)

    def power(self, sampling: str, reference: str, n: int, test: str) -> float:
        for r in self.rows:
            if (r.sampling_dist, r.reference_dist, r.n, r.test) == (sampling, reference, n, test):
                return r.power
        raise KeyError((sampling, reference, n, test))

    def pairs(self) -> list[tuple[str, str]]:
        return list(dict.fromkeys((r.sampling_dist, r.reference_dist) for r in self.rows))

    def sizes(self) -> list[int]:
        return sorted({r.n for r in self.rows})

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(POWER_COLUMNS)
        for r in self.rows:
            w.writerow([r.sampling_dist, r.reference_dist, r.n, r.test, r.trials, r.rejections, fmt(r.power)])
        return buf.getvalue()

    def to_records(self) -> list[dict]:
        return [
            {
                "sampling_dist": r.sampling_dist,
                "reference_dist": r.reference_dist,
                "n": r.n,
                "test": r.test,
                "trials": r.trials,
                "rejections": r.rejections,
                "power": r.power,
            }
            for r in self.rows
        ]


@dataclass
class PowerConfig:
    """Power-study settings. Defaults are desk scale; see :meth:`full_scale`."""

    seed: int
    pairs: Sequence[tuple[str, str]] = DEFAULT_PAIRS
    n_grid: Sequence[int] = DESK_N_GRID
    trials: int = 5000
    alpha: float = 0.05
    null_reps: int = 100_000
    tests: Sequence[str] = DEFAULT_TESTS
    threads: int = 1
    allow_few_trials: bool = False

    @classmethod
    def full_scale(cls, seed: int, **kw) -> "PowerConfig":
        return cls(seed=seed, n_grid=FULL_N_GRID, trials=100_000, **kw)


def run_power_study(config: PowerConfig, tables: dict[int, dict[str, NullTable]] | None = None) -> PowerGrid:
    """Rejection rates for every (pair, n, test).

    Each trial draws one sample from the sampling distribution and runs all
    tests on it against the reference. Null tables are built once per n from
    a stream disjoint from the trial streams (or passed in via ``tables``,
    keyed by n and then ``"dq<q>"``/``"cvm"``).
    """
    if config.trials < MIN_TRIALS:
        msg = f"{config.trials} trials is too few for a power estimate (minimum {MIN_TRIALS})"
        if not config.allow_few_trials:
            raise TooFewTrialsError(msg)
        warnings.warn(msg, stacklevel=2)
    if not 0 < config.alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    pairs = [(dist.parse_distribution(s), dist.parse_distribution(r)) for s, r in config.pairs]
    keys = {t: _table_key(t) for t in config.tests}
    qs = sorted({int(k[2:]) for k in keys.values() if k != "cvm"})
    want_cvm = "cvm" in keys.values()
    tables = dict(tables or {})

    grid = PowerGrid()
    for n in config.n_grid:
        if n not in tables:
            log.info("building null tables for n=%d (%d reps)", n, config.null_reps)
            tables[n] = build_null_tables(qs, n, config.null_reps, config.seed, cvm=want_cvm, threads=config.threads)
        kernels = {k: _kernel(k) for k in set(keys.values())}
        for (sampling, ref), (s_name, r_name) in zip(pairs, config.pairs):
            trial_seed = derive_seed(config.seed, "trials", sampling.name, ref.name, n)
            stats = simulate_statistics(kernels, sampling, ref, n, config.trials, trial_seed, threads=config.threads)
            for test, key in keys.items():
                p = empirical_pvalue(tables[n][key], stats[key])
                rejected = int(np.count_nonzero(p < config.alpha))
                grid.rows.append(PowerRow(sampling.name, ref.name, n, test, config.trials, rejected))
            log.info("n=%d %s vs %s done", n, sampling.name, ref.name)
    return grid


@dataclass
class ConvergenceGrid:
    """Rows of (n, a, empirical CDF of sqrt(n) * D_2 at a, asymptotic CDF at a)."""

    rows: list[tuple[int, float, float, float]] = field(default_factory=list)

    def sup_deviation(self) -> dict[int, float]:
        out: dict[int, float] = {}
        for n, _, emp, asym in self.rows:
            out[n] = max(out.get(n, 0.0), abs(emp - asym))
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CONVERGENCE_COLUMNS)
        for n, a, emp, asym in self.rows:
            w.writerow([n, fmt(a), fmt(emp), fmt(asym)])
        return buf.getvalue()

    def to_records(self) -> list[dict]:
        return [dict(zip(CONVERGENCE_COLUMNS, r)) for r in self.rows]


@dataclass
class ConvergenceConfig:
    seed: int
    n_grid: Sequence[int] = (8, 32, 128, 512)
    reps: int = 20_000
    a_min: float = 0.5
    a_max: float = 2.5
    points: int = 1000
    threads: int = 1


def empirical_cdf_at(sorted_values: np.ndarray, a: Iterable[float]) -> np.ndarray:
    return np.searchsorted(sorted_values, np.asarray(a, dtype=np.float64), side="right") / len(sorted_values)


def run_convergence_study(config: ConvergenceConfig) -> ConvergenceGrid:
    """ECDF of ``sqrt(n) * D_2(U_n, U)`` next to the limiting CDF on an a-grid."""
    a = np.linspace(config.a_min, config.a_max, config.points)
    asym = 1.0 - asymptotic_sf_d2(a)
    grid = ConvergenceGrid()
    for n in config.n_grid:
        table = build_null_table(2, n, config.reps, config.seed, threads=config.threads)
        emp = empirical_cdf_at(math.sqrt(n) * table.values, a)
        grid.rows.extend(zip([n] * len(a), a.tolist(), emp.tolist(), asym.tolist()))
    return grid
