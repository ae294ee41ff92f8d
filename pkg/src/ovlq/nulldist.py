"""Null distributions: asymptotic survival series and Monte-Carlo tables."""

from __future__ import annotations

import enum
import hashlib
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Sequence

import numpy as np

from ovlq import distributions as dist
from ovlq._rng import derive_seed
from ovlq.statistics import dq_from_u

FORMAT_HEADER = "ovlq-null-table v1"
# float64 elements per staged block (about 64 MB of uniforms)
DEFAULT_MEMORY_BUDGET = 8_000_000


class TableFormatError(ValueError):
    """Raised when a null-table file is malformed, truncated or tampered with."""


class SeriesKind(enum.Enum):
    D1_KOLMOGOROV = "d1"
    D2_KUIPER = "d2"


@dataclass(frozen=True)
class SurvivalSeries:
    """Limiting survival function ``P(sqrt(n) * D >= a)`` as a truncated series.

    Summation stops once a bound on the term magnitude drops below ``tol``
    or after ``max_terms`` terms. Below ``small_a_cutoff`` the survival function
    is 1 to double precision and the series is not evaluated.
    """

    kind: SeriesKind
    max_terms: int = 100
    small_a_cutoff: float = 0.4
    tol: float = 1e-16

    def _term(self, i: int, a2):
        """The i-th term and an upper bound on its magnitude.

        The bound matters for the D_2 series, whose first term vanishes at
        a = 0.5 although later terms do not.
        """
        e = np.exp(-2.0 * i * i * a2)
        if self.kind is SeriesKind.D2_KUIPER:
            return 2.0 * (4.0 * i * i * a2 - 1.0) * e, 2.0 * (4.0 * i * i * a2 + 1.0) * e
        return (2.0 if i % 2 else -2.0) * e, 2.0 * e

    def sf(self, a):
        a = np.asarray(a, dtype=np.float64)
        if np.any(~(a > 0)):
            raise ValueError("asymptotic survival function needs a > 0")
        a2 = a * a
        total = np.zeros_like(a)
        live = a >= self.small_a_cutoff
        for i in range(1, self.max_terms + 1):
            if not live.any():
                break
            term, bound = self._term(i, a2)
            total = np.where(live, total + term, total)
            live &= bound >= self.tol
        out = np.where(a >= self.small_a_cutoff, np.clip(total, 0.0, 1.0), 1.0)
        return float(out) if out.ndim == 0 else out

    def cdf(self, a):
        return 1.0 - self.sf(a)


D2_SERIES = SurvivalSeries(SeriesKind.D2_KUIPER, small_a_cutoff=0.4)
# Kolmogorov's SF differs from 1 by less than 1e-300 below a = 0.1.
D1_SERIES = SurvivalSeries(SeriesKind.D1_KOLMOGOROV, small_a_cutoff=0.1)


def asymptotic_sf_d2(a):
    """``2 * sum_i (4 i^2 a^2 - 1) exp(-2 i^2 a^2)``, the limit of ``P(sqrt(n) D_2 >= a)``."""
    return D2_SERIES.sf(a)


def asymptotic_sf_d1(a):
    """Kolmogorov: ``2 * sum_i (-1)^(i-1) exp(-2 i^2 a^2)``."""
    return D1_SERIES.sf(a)


def asymptotic_sf(q: int, a):
    if q == 1:
        return asymptotic_sf_d1(a)
    if q == 2:
        return asymptotic_sf_d2(a)
    raise NotImplementedError(f"no asymptotic distribution for q={q}")


# --------------------------------------------------------------------------
# statistic kernels on transformed sorted samples u = F(x_(i))


def cvm_from_u(u):
    """Cramer-von Mises ``W^2 = 1/(12n) + sum ((2i-1)/(2n) - u_i)^2``."""
    u = np.asarray(u, dtype=np.float64)
    n = u.shape[-1]
    mids = (2.0 * np.arange(1, n + 1) - 1.0) / (2.0 * n)
    return 1.0 / (12.0 * n) + np.sum((mids - u) ** 2, axis=-1)


Kernel = Callable[[np.ndarray], np.ndarray]


def dq_kernel(q: int) -> Kernel:
    return lambda u: dq_from_u(u, q)


def simulate_statistics(
    kernels: dict[str, Kernel],
    sampling: dist.DistributionSpec,
    ref: dist.DistributionSpec,
    n: int,
    reps: int,
    seed: int,
    *,
    threads: int = 1,
    memory_budget: int = DEFAULT_MEMORY_BUDGET,
) -> dict[str, np.ndarray]:
    """Evaluate each kernel on ``reps`` samples of size ``n`` drawn from ``sampling``.

    Replicate ``r`` uses substream ``(seed, r)`` no matter how the work is
    staged, so block size and thread count do not change results. All
    kernels see the same samples.
    """
    if reps < 1:
        raise ValueError("reps must be >= 1")
    if n < 1:
        raise dist.EmptySampleError("n must be >= 1")
    per_draw = dist.uniforms_per_draw(sampling)
    block = max(1, memory_budget // (n * per_draw))
    starts = list(range(0, reps, block))
    out = {name: np.empty(reps) for name in kernels}

    def work(start: int) -> None:
        count = min(block, reps - start)
        x = dist.sample_batch(sampling, n, seed, start, count)
        u = np.asarray(dist.cdf(ref, x))
        for name, kernel in kernels.items():
            out[name][start : start + count] = kernel(u)

    if threads > 1 and len(starts) > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            list(ex.map(work, starts))
    else:
        for s in starts:
            work(s)
    return out


# --------------------------------------------------------------------------
# tables


@dataclass(frozen=True)
class NullTable:
    """Sorted null draws of a statistic for fixed ``(q, n)``.

    ``statistic`` is ``"dq"`` for OVL-q tables (q = 1 is the KS table) and
    ``"cvm"`` for Cramer-von Mises tables; only ``"dq"`` tables have a file
    format.
    """

    q: int
    n: int
    reps: int
    seed: int
    values: np.ndarray = field(repr=False)
    statistic: str = "dq"

    def __post_init__(self) -> None:
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 1 or v.size != self.reps or self.reps < 1:
            raise ValueError("values must be a 1-d array of length reps >= 1")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        if np.any(np.diff(v) < 0):
            v = np.sort(v)
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @cached_property
    def checksum(self) -> str:
        return hashlib.sha256("".join(_value_lines(self.values)).encode()).hexdigest()

    @property
    def table_id(self) -> str:
        kind = f"dq{self.q}" if self.statistic == "dq" else self.statistic
        return f"{kind}-n{self.n}-{self.checksum[:12]}"

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, NullTable):
            return NotImplemented
        return (
            (self.q, self.n, self.reps, self.seed, self.statistic)
            == (other.q, other.n, other.reps, other.seed, other.statistic)
            and np.array_equal(self.values, other.values)
        )

    __hash__ = None  # type: ignore[assignment]


def table_seed(seed: int, n: int) -> int:
    """Seed for the draws behind a null table; disjoint from trial streams."""
    return derive_seed(seed, "null-table", n)


def build_null_tables(
    qs: Sequence[int],
    n: int,
    reps: int,
    seed: int,
    *,
    cvm: bool = False,
    threads: int = 1,
    memory_budget: int = DEFAULT_MEMORY_BUDGET,
) -> dict[str, NullTable]:
    """Several null tables from one set of uniform draws.

    Keys are ``"dq<q>"`` and, with ``cvm=True``, ``"cvm"``. Each dq table is
    identical to what :func:`build_null_table` returns for the same
    arguments.
    """
    kernels: dict[str, Kernel] = {f"dq{q}": dq_kernel(q) for q in qs}
    if cvm:
        kernels["cvm"] = cvm_from_u
    raw = simulate_statistics(
        kernels,
        dist.UNIFORM,
        dist.UNIFORM,
        n,
        reps,
        table_seed(seed, n),
        threads=threads,
        memory_budget=memory_budget,
    )
    tables = {}
    for name, vals in raw.items():
        if name == "cvm":
            tables[name] = NullTable(0, n, reps, seed, np.sort(vals), statistic="cvm")
        else:
            tables[name] = NullTable(int(name[2:]), n, reps, seed, np.sort(vals))
    return tables


def build_null_table(
    q: int,
    n: int,
    reps: int,
    seed: int,
    *,
    threads: int = 1,
    memory_budget: int = DEFAULT_MEMORY_BUDGET,
) -> NullTable:
    """Monte-Carlo table of D_q(U_n, U) under the uniform null.

    Distribution-freeness makes the same table valid for every continuous
    reference.
    """
    return build_null_tables(
        [q], n, reps, seed, threads=threads, memory_budget=memory_budget
    )[f"dq{q}"]


def build_cvm_table(n: int, reps: int, seed: int, *, threads: int = 1) -> NullTable:
    return build_null_tables([], n, reps, seed, cvm=True, threads=threads)["cvm"]


def empirical_pvalue(table: NullTable, stat):
    """Fraction of table entries ``>= stat``."""
    v = table.values
    below = np.searchsorted(v, np.asarray(stat, dtype=np.float64), side="left")
    p = (v.size - below) / v.size
    return float(p) if np.ndim(p) == 0 else p


def critical_value(table: NullTable, alpha: float) -> float:
    """Smallest table value ``u`` such that every ``stat > u`` has p-value < alpha.

    With sorted values ``v_1 <= ... <= v_R`` and ``k = ceil(alpha * R)``, a
    statistic strictly above ``v_(R-k+1)`` is exceeded-or-matched by at most
    ``k - 1 < alpha * R`` entries, while ``p(v_(R-k+1)) >= k / R >= alpha``.
    So ``u = v_(R-k+1)`` (1-based), i.e. ``values[R - k]``.
    """
    if not (0.0 < alpha < 1.0):
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    reps = table.values.size
    k = max(1, math.ceil(alpha * reps - 1e-12))
    return float(table.values[reps - k])


def _value_lines(values: np.ndarray) -> list[str]:
    return [f"{v:.17g}\n" for v in values]


def save_table(table: NullTable, path: str | os.PathLike) -> None:
    if table.statistic != "dq":
        raise ValueError("only D_q tables have a file format")
    lines = _value_lines(table.values)
    digest = hashlib.sha256("".join(lines).encode()).hexdigest()
    head = [
        FORMAT_HEADER + "\n",
        f"q={table.q}\n",
        f"n={table.n}\n",
        f"reps={table.reps}\n",
        f"seed={table.seed}\n",
        f"sha256={digest}\n",
    ]
    tmp = f"{os.fspath(path)}.tmp"
    with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
        fh.writelines(head + lines)
    os.replace(tmp, path)


def _field(line: str, key: str, lineno: int) -> str:
    prefix = key + "="
    if not line.startswith(prefix):
        raise TableFormatError(f"line {lineno}: expected '{prefix}...', got {line!r}")
    return line[len(prefix) :]


def load_table(path: str | os.PathLike) -> NullTable:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        raw = fh.read()
    lines = raw.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    else:
        raise TableFormatError("file does not end with a newline (truncated?)")
    lines = [ln.rstrip("\r") for ln in lines]
    if len(lines) < 6:
        raise TableFormatError("header incomplete")
    if lines[0] != FORMAT_HEADER:
        raise TableFormatError(f"unsupported format/version: {lines[0]!r}")
    try:
        q = int(_field(lines[1], "q", 2))
        n = int(_field(lines[2], "n", 3))
        reps = int(_field(lines[3], "reps", 4))
        seed = int(_field(lines[4], "seed", 5))
    except ValueError as exc:
        if isinstance(exc, TableFormatError):
            raise
        raise TableFormatError(f"bad header value: {exc}") from None
    digest = _field(lines[5], "sha256", 6)
    body = lines[6:]
    if len(body) != reps:
        raise TableFormatError(f"header says reps={reps} but file has {len(body)} values")
    actual = hashlib.sha256("".join(ln + "\n" for ln in body).encode()).hexdigest()
    if actual != digest:
        raise TableFormatError("checksum mismatch")
    try:
        values = np.array([float(ln) for ln in body])
    except ValueError as exc:
        raise TableFormatError(f"non-numeric value: {exc}") from None
    if np.any(np.diff(values) < 0) or np.any((values < 0) | (values > 1)):
        raise TableFormatError("values must be sorted and lie in [0, 1]")
    return NullTable(q, n, reps, seed, values)
