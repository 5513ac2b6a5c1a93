"""Measurements on walk distributions.

Region classifiers, exact k-wise independence errors, mixing curves, hybrid
row differences, escape probabilities (exact and simulated) and collision
statistics for the grid construction.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .bitcore import (GridView, TupleState, _as_bitstring, extract_bits, pack_tuple, popcount,
                      state_strings)
from .errors import CapacityError, ModelError, ParameterError, RangeError, StructureError
from .walkops import (DENSE_CAP, EXACT_CAP, MATVEC_CAP, OrbitPartition, WalkOperator, _check_nk,
                      equality_pattern, grid_pass, op_2d, spectral_gap)

B0, B1, B2 = "B=0", "B=1", "B>=2"
COLL1, SAFE1 = "Bcoll>=1", "Bsafe>=1"
BCOLL, BSAFE = "Bcoll", "Bsafe"
DISTINCT = "D"
TAGS_1D = (B0, B1, B2)
TAGS_WINDOW = (B0, COLL1, SAFE1)
TAGS_2D = (B0, BCOLL, BSAFE)


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("BRICKMIX_THREADS", "1")))
    except ValueError:
        return 1


# ---------------------------------------------------------------------------
# Region classification


@dataclass(frozen=True)
class Region1D:
    tag: str
    window: Optional[tuple[int, ...]] = None


@dataclass(frozen=True)
class ColorClass:
    """Per-row equality partitions of a grid tuple and the coarse tag."""

    partitions: tuple[tuple[tuple[int, ...], ...], ...]
    tag: str


def _pairs(k: int):
    return list(combinations(range(k), 2))


def _strings(states, n, k):
    return state_strings(n, k, np.asarray(states, dtype=np.int64))


def distinct_mask(n: int, k: int, states=None) -> np.ndarray:
    """True where all k strings are pairwise distinct."""
    if states is None:
        states = np.arange(1 << (n * k), dtype=np.int64)
    s = _strings(states, n, k)
    out = np.ones(s.shape[0], dtype=bool)
    for i, j in _pairs(k):
        out &= s[:, i] != s[:, j]
    return out


def distinct_size(n: int, k: int) -> int:
    """``|D| = prod_{j<k} (2^n - j)``."""
    return math.prod((1 << n) - j for j in range(k))


def regions_1d(n: int, k: int, states=None) -> np.ndarray:
    """Tag of each state among ``B=0``, ``B=1``, ``B>=2`` (as strings)."""
    if states is None:
        states = np.arange(1 << (n * k), dtype=np.int64)
    s = _strings(states, n, k)
    dmin = np.full(s.shape[0], n + 1, dtype=np.int64)
    for i, j in _pairs(k):
        dmin = np.minimum(dmin, popcount(s[:, i] ^ s[:, j]))
    out = np.full(s.shape[0], B2, dtype=object)
    out[dmin == 1] = B1
    out[dmin == 0] = B0
    return out


def _window_coords(n: int, window) -> tuple[int, ...]:
    coords = tuple(sorted(set(int(a) for a in window)))
    if not coords or coords[0] < 1 or coords[-1] > n:
        raise RangeError(f"window {window} outside [1, {n}]")
    return coords


def regions_window(n: int, k: int, window, states=None) -> np.ndarray:
    """Tag of each state among ``B=0``, ``Bcoll>=1``, ``Bsafe>=1`` for the window coordinates."""
    coords = _window_coords(n, window)
    if states is None:
        states = np.arange(1 << (n * k), dtype=np.int64)
    s = _strings(states, n, k)
    sub = extract_bits(s, coords)
    full = np.zeros(s.shape[0], dtype=bool)
    coll = np.zeros(s.shape[0], dtype=bool)
    for i, j in _pairs(k):
        full |= s[:, i] == s[:, j]
        coll |= sub[:, i] == sub[:, j]
    out = np.full(s.shape[0], SAFE1, dtype=object)
    out[coll] = COLL1
    out[full] = B0
    return out


def regions_2d(side: int, k: int, states=None) -> np.ndarray:
    """Tag of each grid state among ``B=0``, ``Bcoll``, ``Bsafe``."""
    grid = GridView(side)
    n = grid.n
    if states is None:
        states = np.arange(1 << (n * k), dtype=np.int64)
    s = _strings(states, n, k)
    full = np.zeros(s.shape[0], dtype=bool)
    coll = np.zeros(s.shape[0], dtype=bool)
    for i, j in _pairs(k):
        full |= s[:, i] == s[:, j]
    for row in grid.rows():
        sub = extract_bits(s, row)
        for i, j in _pairs(k):
            coll |= sub[:, i] == sub[:, j]
    out = np.full(s.shape[0], BSAFE, dtype=object)
    out[coll] = BCOLL
    out[full] = B0
    return out


def color_labels(side: int, k: int, states=None) -> np.ndarray:
    """Integer code of the per-row equality partitions of each state."""
    grid = GridView(side)
    if states is None:
        states = np.arange(1 << (grid.n * k), dtype=np.int64)
    s = _strings(states, grid.n, k)
    code = np.zeros(s.shape[0], dtype=np.int64)
    radix = math.factorial(k)
    for row in grid.rows():
        sub = extract_bits(s, row)
        code = code * radix + equality_pattern([sub[:, i] for i in range(k)])
    return code


def region_mask(n: int, k: int, tag: str, states=None, window=None) -> np.ndarray:
    """Boolean mask of a named region over ``states`` (default: all states).

    ``D`` is the distinct set; grid tags require ``n`` to be a perfect square
    and window tags require ``window``.
    """
    if tag == DISTINCT:
        return distinct_mask(n, k, states)
    if tag == B0:
        return ~distinct_mask(n, k, states)
    if tag in (B1, B2):
        return regions_1d(n, k, states) == tag
    if tag in (COLL1, SAFE1):
        if window is None:
            raise ParameterError(f"region {tag} needs a window")
        return regions_window(n, k, window, states) == tag
    if tag in (BCOLL, BSAFE):
        return regions_2d(GridView.for_n(n).side, k, states) == tag
    raise ParameterError(f"unknown region {tag!r}")


def classify_1d(X: TupleState) -> Region1D:
    return Region1D(str(regions_1d(X.n, X.k, [X.index])[0]))


def classify_window(X: TupleState, window) -> Region1D:
    coords = _window_coords(X.n, window)
    return Region1D(str(regions_window(X.n, X.k, coords, [X.index])[0]), coords)


def classify_2d(X: TupleState) -> ColorClass:
    grid = GridView.for_n(X.n)
    parts = []
    for i in range(1, grid.side + 1):
        rows = [grid.row(X, ell, i) for ell in range(1, X.k + 1)]
        blocks: dict = {}
        for ell, r in enumerate(rows, start=1):
            blocks.setdefault(r, []).append(ell)
        parts.append(tuple(sorted(tuple(b) for b in blocks.values())))
    tag = str(regions_2d(grid.side, X.k, [X.index])[0])
    return ColorClass(tuple(parts), tag)


# ---------------------------------------------------------------------------
# Exact k-wise independence


@dataclass
class KwiseReport:
    """Worst-case TV to uniform on distinct tuples, and its per-start table.

    ``starts`` are state indices; with the symmetry fast path they are orbit
    representatives and ``weights`` holds the orbit sizes.
    """

    epsilon: Union[float, Fraction]
    starts: np.ndarray
    tv: list
    distinct_size: int
    method: str
    n: int
    k: int
    t: int = 1
    weights: Optional[np.ndarray] = None

    def to_dict(self, table: bool = False) -> dict:
        d = {"epsilon": float(self.epsilon), "distinct_size": self.distinct_size,
             "method": self.method, "n": self.n, "k": self.k, "t": self.t,
             "num_starts": int(len(self.starts)), "symmetry": self.weights is not None}
        if isinstance(self.epsilon, Fraction):
            d["epsilon_exact"] = str(self.epsilon)
        if table:
            d["per_start"] = self.rows()
        return d

    def rows(self) -> list[dict]:
        out = []
        for idx, (X, tv) in enumerate(zip(self.starts, self.tv)):
            row = {"start": int(X), "tv": float(tv)}
            if self.weights is not None:
                row["orbit_size"] = int(self.weights[idx])
            out.append(row)
        return out


def _xor_and_swap_generators(n: int, k: int) -> list[np.ndarray]:
    """State permutations: XOR every string by a unit vector, and swap adjacent strings."""
    N = 1 << (n * k)
    idx = np.arange(N, dtype=np.int64)
    gens = []
    for a in range(n):
        c = 0
        for i in range(k):
            c |= 1 << (i * n + a)
        gens.append(idx ^ c)
    s = state_strings(n, k, idx)
    for i in range(k - 1):
        t = s.copy()
        t[:, [i, i + 1]] = t[:, [i + 1, i]]
        out = np.zeros(N, dtype=np.int64)
        for j in range(k):
            out |= t[:, j] << (j * n)
        gens.append(out)
    return gens


def symmetry_representatives(op: WalkOperator, check: bool = True, seed: int = 0):
    """Orbit representatives of distinct tuples under global XOR and string swaps.

    With ``check`` the operator is first verified to commute with every
    generator, which makes the per-start TV constant along each orbit.
    """
    n, k = op.n, op.k
    gens = _xor_and_swap_generators(n, k)
    if check:
        rng = np.random.default_rng(seed)
        v = rng.standard_normal(op.N)
        Av = op.matvec(v)
        scale = max(1.0, float(np.abs(Av).max()))
        for g in gens:
            # (P v)(X) = v(g X); commuting means A P v = P A v
            if np.abs(op.matvec(v[g]) - Av[g]).max() > 1e-10 * scale:
                raise StructureError("operator does not commute with the XOR/swap symmetry")
    uf = OrbitPartition(op.N)
    for g in gens:
        uf.union_perm(g)
    labels = uf.labels()
    D = np.flatnonzero(distinct_mask(n, k))
    lab = labels[D]
    uniq, first, counts = np.unique(lab, return_index=True, return_counts=True)
    return D[first], counts


def _tv_rows(rows: np.ndarray, dsize: int) -> np.ndarray:
    return 0.5 * np.abs(rows - 1.0 / dsize).sum(axis=1)


def _check_leak(rows: np.ndarray, tol: float = 1e-9):
    mass = rows.sum(axis=1)
    bad = np.abs(mass - 1.0) > tol
    if bad.any():
        raise ModelError(f"operator moves mass {1 - mass[bad].min():.3g} out of the distinct set")


class _RowPropagator:
    """Rows ``e_X^T A^t`` restricted to the distinct set, advanced one step at a time."""

    def __init__(self, op: WalkOperator, starts: np.ndarray, D: np.ndarray):
        self.op, self.D = op, D
        self.pos = np.full(op.N, -1, dtype=np.int64)
        self.pos[D] = np.arange(len(D))
        self.dense = op.N <= DENSE_CAP
        if self.dense:
            A = op.dense()
            self.ADD = np.ascontiguousarray(A[np.ix_(D, D)])
            _check_leak(self.ADD)
            self.rows = np.zeros((len(starts), len(D)))
            self.rows[np.arange(len(starts)), self.pos[starts]] = 1.0
        else:
            self.rows = None
            self.cols = np.zeros((op.N, len(starts)))
            self.cols[starts, np.arange(len(starts))] = 1.0

    def current(self) -> np.ndarray:
        if self.dense:
            return self.rows
        return self.cols[self.D].T

    def advance(self):
        if self.dense:
            self.rows = self.rows @ self.ADD
        else:
            self.cols = _parallel_columns(self.op.rmatvec, self.cols)
            _check_leak(self.cols[self.D].T)


def _parallel_columns(fn: Callable, cols: np.ndarray, chunk: int = 32) -> np.ndarray:
    pieces = [cols[:, lo:lo + chunk] for lo in range(0, cols.shape[1], chunk)]
    threads = _threads()
    if threads > 1 and len(pieces) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(fn, pieces))
    else:
        results = [fn(p) for p in pieces]
    return np.concatenate(results, axis=1)


def _starts(op: WalkOperator, symmetry: bool):
    D = np.flatnonzero(distinct_mask(op.n, op.k))
    if symmetry:
        reps, weights = symmetry_representatives(op)
        return D, reps, weights
    return D, D, None


def kwise_epsilon_exact(op: WalkOperator, t: int = 1, exact: bool = False, symmetry: bool = False) -> KwiseReport:
    """``eps = max_X (1/2) sum_{Y in D} |Pr[X -> Y under op^t] - 1/|D||`` over distinct starts.

    ``exact`` uses rational arithmetic (``2^(n k) <= 1024``) and returns a
    :class:`~fractions.Fraction`. ``symmetry`` sweeps orbit representatives
    only, after checking that ``op`` commutes with the symmetry.
    """
    if not op.stochastic:
        raise ModelError("k-wise independence needs a stochastic operator")
    if t < 0:
        raise ParameterError("t must be non-negative")
    n, k = op.n, op.k
    dsize = distinct_size(n, k)
    if dsize == 0:
        raise ParameterError(f"no distinct {k}-tuples of {n}-bit strings")
    D, starts, weights = _starts(op, symmetry)
    if exact:
        if op.N > EXACT_CAP:
            raise CapacityError(f"exact mode needs 2^(n k) <= {EXACT_CAP}")
        E = op.power(t).exact()
        sub = E.num[np.ix_(starts, D)].astype(object)
        tvs = []
        for row in sub:
            if sum(row) != E.den:
                raise ModelError("operator moves mass out of the distinct set")
            tvs.append(Fraction(sum(abs(int(p) * dsize - E.den) for p in row), 2 * E.den * dsize))
        return KwiseReport(max(tvs), starts, tvs, dsize, "exact", n, k, t, weights)
    prop = _RowPropagator(op, starts, D)
    for _ in range(t):
        prop.advance()
    tvs = _tv_rows(prop.current(), dsize)
    return KwiseReport(float(tvs.max()), starts, list(tvs), dsize, "matvec-powering", n, k, t, weights)


@dataclass
class MixingCurve:
    t: list
    epsilon: list
    envelope: list
    gap: float
    distinct_size: int

    def rows(self) -> list[dict]:
        return [{"t": t, "epsilon": e, "envelope": v} for t, e, v in zip(self.t, self.epsilon, self.envelope)]


def mixing_curve(op: WalkOperator, t_max: int, gap: Optional[float] = None, symmetry: bool = False) -> MixingCurve:
    """``eps(t)`` for ``t = 0..t_max`` with the envelope ``(1/2) sqrt(|D|) (1 - g)^t``.

    ``g`` is the symmetrized gap of ``op`` unless given.
    """
    if t_max < 0:
        raise ParameterError("t_max must be non-negative")
    if not op.stochastic:
        raise ModelError("mixing curves need a stochastic operator")
    dsize = distinct_size(op.n, op.k)
    if gap is None:
        gap = spectral_gap(op).value
    D, starts, _ = _starts(op, symmetry)
    prop = _RowPropagator(op, starts, D)
    eps = []
    for t in range(t_max + 1):
        if t:
            prop.advance()
        eps.append(float(_tv_rows(prop.current(), dsize).max()))
    env = [0.5 * math.sqrt(dsize) * (1.0 - gap) ** t for t in range(t_max + 1)]
    return MixingCurve(list(range(t_max + 1)), eps, env, float(gap), dsize)


# ---------------------------------------------------------------------------
# Row comparisons


def _index(X, n: int, k: int) -> int:
    if isinstance(X, TupleState):
        return X.index
    if isinstance(X, (int, np.integer)):
        return int(X)
    return pack_tuple(X)


def _mask_for(op: WalkOperator, region, window=None) -> np.ndarray:
    if isinstance(region, str):
        return region_mask(op.n, op.k, region, window=window)
    region = np.asarray(region)
    if region.dtype != bool or region.shape != (op.N,):
        raise ParameterError("region must be a tag or a boolean mask over states")
    return region


def hybrid_tv_row(opA: WalkOperator, opB: WalkOperator, X, region, window=None, exact: bool = False):
    """``sum_{Y in region} |Pr_A[X -> Y] - Pr_B[X -> Y]|``."""
    opA._compatible(opB)
    x = _index(X, opA.n, opA.k)
    mask = _mask_for(opA, region, window)
    if exact:
        EA, EB = opA.exact(), opB.exact()
        diff = (EA - EB)
        row = diff.num[x][mask]
        return Fraction(int(np.abs(row.astype(object)).sum()), diff.den)
    return float(np.abs(opA.row(x) - opB.row(x))[mask].sum())


def tv_linear_form(opA: WalkOperator, opB: WalkOperator, X) -> float:
    """``(1/2) sum_Y |<e_X, (A - B) e_Y>|``, the TV distance between the two rows."""
    x = _index(X, opA.n, opA.k)
    diff = (opA - opB).rmatvec(np.eye(opA.N)[x])
    return 0.5 * float(np.abs(diff).sum())


def comparison_bound(A: np.ndarray, B: np.ndarray, f: np.ndarray, g: np.ndarray, support: np.ndarray) -> float:
    """Right-hand side of the support-restricted comparison inequality for ``|<f, (A - B) g>|``."""
    diff = np.abs(A - B)[np.ix_(support, support)].sum(axis=1)
    return math.sqrt(float((f[support] ** 2 * diff).sum()) * float((g[support] ** 2 * diff).sum()))


def escape_bound(A: np.ndarray, f: np.ndarray, g: np.ndarray) -> float:
    """``sqrt(eps) ||f|| ||g||`` with ``eps`` the largest mass moved from Supp(f) into Supp(g)."""
    sf, sg = np.flatnonzero(f), np.flatnonzero(g)
    eps = float(A[np.ix_(sf, sg)].sum(axis=1).max()) if sf.size and sg.size else 0.0
    return math.sqrt(eps) * float(np.linalg.norm(f)) * float(np.linalg.norm(g))


# ---------------------------------------------------------------------------
# Probabilities, exact and simulated


def hoeffding_halfwidth(trials: int, confidence: float = 0.99) -> float:
    """Two-sided Hoeffding half-width ``sqrt(ln(2/alpha) / (2 T))`` for a [0,1] mean."""
    if trials < 1:
        raise ParameterError("trials must be positive")
    if not 0 < confidence < 1:
        raise ParameterError("confidence must lie in (0, 1)")
    return math.sqrt(math.log(2.0 / (1.0 - confidence)) / (2.0 * trials))


@dataclass
class Estimate:
    estimate: float
    ci_lo: float
    ci_hi: float
    trials: int
    seed: Optional[int]
    mode: str = "mc"
    exact: Optional[float] = None

    def contains(self, value: float) -> bool:
        return self.ci_lo <= value <= self.ci_hi

    def to_dict(self) -> dict:
        return {"estimate": self.estimate, "ci_lo": self.ci_lo, "ci_hi": self.ci_hi,
                "trials": self.trials, "seed": self.seed, "mode": self.mode, "exact": self.exact}


def mean_interval(values: np.ndarray, lo: float, hi: float, confidence: float, seed) -> Estimate:
    """Sample mean with a Hoeffding interval for values bounded in ``[lo, hi]``."""
    values = np.asarray(values, dtype=np.float64)
    T = values.size
    m = float(values.mean())
    h = (hi - lo) * hoeffding_halfwidth(T, confidence)
    return Estimate(m, max(lo, m - h), min(hi, m + h), T, seed)


def escape_probability(op: WalkOperator, X, target, mode: str = "exact", trials: Optional[int] = None,
                       seed: Optional[int] = None, confidence: float = 0.99, window=None,
                       exact_rational: bool = False):
    """Probability of one step of ``op`` from ``X`` landing in ``target``.

    ``mode="exact"`` sums the transition row (a Fraction with
    ``exact_rational``). ``mode="mc"`` simulates ``trials`` steps seeded by
    ``seed`` and returns an :class:`Estimate` with a Hoeffding interval.
    """
    x = _index(X, op.n, op.k)
    if not 0 <= x < op.N:
        raise RangeError(f"state {x} out of range")
    if mode == "exact":
        mask = _mask_for(op, target, window)
        if exact_rational:
            E = op.exact()
            return Fraction(int(E.num[x][mask].astype(object).sum()), E.den)
        return float(op.row(x)[mask].sum())
    if mode != "mc":
        raise ParameterError(f"unknown mode {mode!r}")
    if trials is None or trials < 1 or seed is None:
        raise ParameterError("mc mode needs trials >= 1 and a seed")
    rng = np.random.default_rng(np.random.SeedSequence(int(seed)))
    ys = op.sample(np.full(trials, x, dtype=np.int64), rng)
    if isinstance(target, str):
        hits = region_mask(op.n, op.k, target, states=ys, window=window)
    else:
        hits = np.asarray(target)[ys]
    return mean_interval(hits, 0.0, 1.0, confidence, seed)


@dataclass
class CollisionStats:
    side: int
    k: int
    trials: int
    seed: int
    start: int
    rows: list = field(default_factory=list)

    def table(self) -> list[dict]:
        return self.rows


def distinct_pair_distance_pmf(side: int) -> np.ndarray:
    """Distribution of the Hamming distance of a uniform ordered pair of distinct strings."""
    total = (1 << side) - 1
    return np.array([0.0] + [math.comb(side, d) / total for d in range(1, side + 1)])


def collision_witness_stats(side: int, k: int, trials: int, seed: int, start=None,
                            confidence: float = 0.99) -> CollisionStats:
    """Simulate a row pass then a column pass from a distinct grid tuple.

    For each pair of strings it records the Hamming distance of the pair's
    first differing row after the row pass (the witness row), the event that
    this distance is at most ``side/4``, and after the column pass the event
    that any row of the pair coincides. The event of landing in ``Bcoll`` is
    reported as well. Intervals are Hoeffding at ``confidence``.
    """
    if trials < 1:
        raise ParameterError("trials must be >= 1")
    grid = GridView(side)
    n = grid.n
    row_pass, col_pass = grid_pass("GR", side, k), grid_pass("GC", side, k)
    if start is None:
        start = sum(ell << (ell * n) for ell in range(k))
    x = _index(start, n, k)
    if not distinct_mask(n, k, [x])[0]:
        raise ParameterError("the start must have pairwise distinct strings")
    rng = np.random.default_rng(np.random.SeedSequence(int(seed)))
    Y = row_pass(np.full(trials, x, dtype=np.int64), rng)
    Z = col_pass(Y, rng)
    xs = state_strings(n, k, np.array([x]))[0]
    ys, zs = state_strings(n, k, Y), state_strings(n, k, Z)
    pmf = distinct_pair_distance_pmf(side)
    rows = []
    for i, j in _pairs(k):
        witness = next(r for r in grid.rows()
                       if extract_bits(np.array([xs[i]]), r)[0] != extract_bits(np.array([xs[j]]), r)[0])
        d = popcount(extract_bits(ys[:, i], witness) ^ extract_bits(ys[:, j], witness))
        pair = f"{i + 1}-{j + 1}"
        for dist in range(side + 1):
            est = mean_interval(d == dist, 0, 1, confidence, seed)
            rows.append(_row("distance_pmf", pair, dist, est, pmf[dist]))
        near = mean_interval(d <= side / 4, 0, 1, confidence, seed)
        rows.append(_row("distance_le_side_over_4", pair, "", near,
                         float(pmf[: int(math.floor(side / 4)) + 1].sum())))
        rows.append(_row("distance_mean", pair, "", mean_interval(d, 0, side, confidence, seed),
                         side * (1 << (side - 1)) / ((1 << side) - 1)))
        eq = np.zeros(trials, dtype=bool)
        for r in grid.rows():
            eq |= extract_bits(zs[:, i], r) == extract_bits(zs[:, j], r)
        rows.append(_row("row_collision_after_column_pass", pair, "",
                         mean_interval(eq, 0, 1, confidence, seed), None))
    coll = regions_2d(side, k, Z) == BCOLL
    exact = None
    if (1 << (n * k)) <= DENSE_CAP:
        exact = escape_probability(op_2d("GR", side, k) @ op_2d("GC", side, k), x, BCOLL)
    rows.append(_row("bcoll_after_row_column", "all", "", mean_interval(coll, 0, 1, confidence, seed), exact))
    return CollisionStats(side, k, trials, seed, x, rows)


def _row(quantity, pair, value, est: Estimate, exact) -> dict:
    return {"quantity": quantity, "pair": pair, "value": value, "estimate": est.estimate,
            "ci_lo": est.ci_lo, "ci_hi": est.ci_hi, "trials": est.trials, "seed": est.seed,
            "exact": exact}


# ---------------------------------------------------------------------------
# Sampling with and without replacement


@dataclass(frozen=True)
class BoundCheck:
    holds: bool
    lhs: Fraction
    rhs: Fraction
    N: int
    k: int


def product_bound_check(N: int, k: int) -> BoundCheck:
    """Compare ``prod_{i<k} N/(N - i)`` with ``1 + k^2/N`` exactly."""
    if N < 1 or k < 0:
        raise ParameterError("need N >= 1 and k >= 0")
    if k * k > N:
        raise ParameterError(f"need k <= sqrt(N), got k={k}, N={N}")
    lhs = Fraction(1)
    for i in range(k):
        lhs *= Fraction(N, N - i)
    rhs = 1 + Fraction(k * k, N)
    return BoundCheck(lhs <= rhs, lhs, rhs, N, k)
