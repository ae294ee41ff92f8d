"""One-sample goodness-of-fit tests: OVL-q, Kolmogorov-Smirnov, Cramer-von Mises."""

from __future__ import annotations

import json
import math
import threading
from dataclasses import asdict, dataclass

import numpy as np

from ovlq.distributions import DistributionSpec, EmpiricalSample
from ovlq.nulldist import (
    NullTable,
    asymptotic_sf,
    build_cvm_table,
    build_null_table,
    cvm_from_u,
    empirical_pvalue,
)
from ovlq.statistics import dq_statistic, transformed

MONTE_CARLO = "montecarlo"
ASYMPTOTIC = "asymptotic"


class MissingTableError(ValueError):
    pass


class TableMismatchError(ValueError):
    pass


@dataclass(frozen=True)
class TestReport:
    """Outcome of one test. ``reject`` is ``pvalue < alpha`` (strict)."""

    __test__ = False  # keep pytest from collecting this class

    test_name: str
    statistic: float
    pvalue: float
    pvalue_method: str
    alpha: float
    reject: bool

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def ovlq_name(q: int) -> str:
    return f"OVL-{q}"


def _check_alpha(alpha: float) -> None:
    if not (0.0 < alpha < 1.0):
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")


def _check_table(table: NullTable, statistic: str, q: int, n: int) -> None:
    if table.statistic != statistic or (statistic == "dq" and table.q != q) or table.n != n:
        raise TableMismatchError(
            f"table is for {table.table_id} but the test needs "
            f"{statistic}{q if statistic == 'dq' else ''} with n={n}"
        )


def _report(name, stat, p, method, alpha) -> TestReport:
    return TestReport(name, float(stat), float(p), method, float(alpha), bool(p < alpha))


def ovlq_test(
    sample: EmpiricalSample,
    ref: DistributionSpec,
    q: int = 2,
    alpha: float = 0.05,
    pvalue_method: str = MONTE_CARLO,
    table: NullTable | None = None,
    *,
    test_name: str | None = None,
) -> TestReport:
    """One-sample OVL-q test of ``sample`` against the continuous ``ref``.

    Monte-Carlo p-values need a ``table`` with matching ``(q, n)``; the
    asymptotic method exists only for q = 1 and q = 2 and uses
    ``p = SF(sqrt(n) * D_q)``.
    """
    _check_alpha(alpha)
    stat = dq_statistic(sample, ref, q)
    name = test_name or ovlq_name(q)
    if pvalue_method == ASYMPTOTIC:
        if q not in (1, 2):
            raise NotImplementedError(f"asymptotic p-values are unavailable for q={q}")
        a = math.sqrt(sample.n) * stat
        p = asymptotic_sf(q, a) if a > 0 else 1.0
        return _report(name, stat, p, "Asymptotic", alpha)
    if pvalue_method != MONTE_CARLO:
        raise ValueError(f"unknown p-value method {pvalue_method!r}")
    if table is None:
        raise MissingTableError("Monte-Carlo p-values need a null table")
    _check_table(table, "dq", q, sample.n)
    return _report(name, stat, empirical_pvalue(table, stat), f"MonteCarlo({table.table_id})", alpha)


def ks_test(
    sample: EmpiricalSample,
    ref: DistributionSpec,
    alpha: float = 0.05,
    pvalue_method: str = MONTE_CARLO,
    table: NullTable | None = None,
) -> TestReport:
    return ovlq_test(sample, ref, 1, alpha, pvalue_method, table, test_name="KS")


def cvm_statistic(sample: EmpiricalSample, ref: DistributionSpec) -> float:
    return float(cvm_from_u(transformed(sample, ref)))


def cvm_test(
    sample: EmpiricalSample,
    ref: DistributionSpec,
    alpha: float = 0.05,
    table: NullTable | None = None,
) -> TestReport:
    _check_alpha(alpha)
    if table is None:
        raise MissingTableError("the Cramer-von Mises test needs a null table")
    _check_table(table, "cvm", 0, sample.n)
    stat = cvm_statistic(sample, ref)
    return _report("CvM", stat, empirical_pvalue(table, stat), f"MonteCarlo({table.table_id})", alpha)


class TableCache:
    """Builds null tables on demand and keeps them per ``(statistic, q, n)``."""

    def __init__(self, reps: int, seed: int, threads: int = 1) -> None:
        self.reps = reps
        self.seed = seed
        self.threads = threads
        self._tables: dict[tuple[str, int, int], NullTable] = {}
        self._lock = threading.Lock()

    def get(self, statistic: str, q: int, n: int) -> NullTable:
        key = (statistic, q, n)
        with self._lock:
            if key not in self._tables:
                if statistic == "cvm":
                    t = build_cvm_table(n, self.reps, self.seed, threads=self.threads)
                else:
                    t = build_null_table(q, n, self.reps, self.seed, threads=self.threads)
                self._tables[key] = t
            return self._tables[key]

    def put(self, table: NullTable) -> None:
        with self._lock:
            self._tables[(table.statistic, table.q, table.n)] = table


def rejection_counts(pvalues: np.ndarray, alpha: float) -> int:
    return int(np.count_nonzero(np.asarray(pvalues) < alpha))
