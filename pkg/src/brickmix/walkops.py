"""Random-walk operators on functions of k-tuples, and their spectral analysis.

An operator ``A`` acts on functions ``v`` of the packed state index by
``(A v)(X) = E[v(Y)]`` where ``Y`` is one step of the walk from ``X``, so
``A[X, Y] = Pr[X -> Y]``. The product ``A @ B`` takes a step of ``A`` first and
then a step of ``B``; :meth:`WalkOperator.step` pushes a distribution forward.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Optional, Sequence, Union

import numpy as np
import scipy.linalg
import scipy.sparse.linalg

from .bitcore import (CharacterIndex, GridView, character_vector, deposit_bits, extract_bits,
                      coord_mask, pack_strings, state_strings, walsh_hadamard)
from .errors import (CapacityError, DimensionError, ParameterError, PlacementError,
                     StructureError)
from .gates import Gate, PlacedGate, enumerate_gate_set

DENSE_CAP = 4096
EXACT_CAP = 1024
MATVEC_CAP = 1 << 24
_SAMPLE_CHUNK = 1 << 22


def _check_nk(n: int, k: int) -> int:
    if k < 1:
        raise ParameterError("k must be at least 1")
    if n < 1:
        raise ParameterError("n must be at least 1")
    if n * k > 24:
        raise CapacityError(f"2^(n k) = 2^{n * k} exceeds the matvec cap 2^24")
    return 1 << (n * k)


def _check_set(n: int, S: Iterable[int]) -> tuple[int, ...]:
    S = tuple(sorted(set(int(a) for a in S)))
    if not S:
        raise ParameterError("the coordinate set must be nonempty")
    if S[0] < 1 or S[-1] > n:
        raise DimensionError(f"coordinates {S} outside [1, {n}]")
    return S


# ---------------------------------------------------------------------------
# Exact rational matrices


def _gcd_all(arr: np.ndarray) -> int:
    if arr.dtype == object:
        g = 0
        for v in arr.ravel():
            g = math.gcd(g, int(v))
            if g == 1:
                break
        return g
    if arr.size == 0:
        return 0
    return int(np.gcd.reduce(arr.ravel()))


def _max_abs(arr: np.ndarray) -> int:
    if arr.size == 0:
        return 0
    if arr.dtype == object:
        return max(abs(int(v)) for v in arr.ravel())
    return int(np.abs(arr).max())


_INT_LIMIT = 1 << 62


class ExactMatrix:
    """The rational matrix ``num / den`` with integer numerators.

    Numerators are ``int64`` while every intermediate fits, and Python
    integers (object dtype) otherwise.
    """

    def __init__(self, num: np.ndarray, den: int = 1):
        den = int(den)
        if den <= 0:
            raise ValueError("denominator must be positive")
        num = np.asarray(num)
        if num.dtype != object:
            num = num.astype(np.int64)
        g = math.gcd(_gcd_all(num), den)
        if g > 1:
            num = num // g
            den //= g
        self.num = num
        self.den = den

    @property
    def shape(self):
        return self.num.shape

    @staticmethod
    def _fit(arr_bound: int) -> bool:
        return arr_bound < _INT_LIMIT

    def _as(self, dtype):
        return self.num.astype(dtype) if self.num.dtype != dtype else self.num

    def __matmul__(self, other: "ExactMatrix") -> "ExactMatrix":
        inner = self.num.shape[-1]
        bound = _max_abs(self.num) * _max_abs(other.num) * inner
        if self._fit(bound) and self.num.dtype != object and other.num.dtype != object:
            num = self.num @ other.num
        else:
            num = self._as(object) @ other._as(object)
        return ExactMatrix(num, self.den * other.den)

    def _combine(self, other: "ExactMatrix", sign: int) -> "ExactMatrix":
        L = self.den * other.den // math.gcd(self.den, other.den)
        fa, fb = L // self.den, L // other.den
        bound = _max_abs(self.num) * fa + _max_abs(other.num) * fb
        if self._fit(bound) and self.num.dtype != object and other.num.dtype != object:
            num = self.num * fa + sign * other.num * fb
        else:
            num = self._as(object) * fa + sign * (other._as(object) * fb)
        return ExactMatrix(num, L)

    def __add__(self, other):
        return self._combine(other, 1)

    def __sub__(self, other):
        return self._combine(other, -1)

    def scale(self, c) -> "ExactMatrix":
        c = Fraction(c)
        bound = _max_abs(self.num) * abs(c.numerator)
        num = self.num * c.numerator if self._fit(bound) and self.num.dtype != object \
            else self._as(object) * c.numerator
        return ExactMatrix(num, self.den * c.denominator)

    @property
    def T(self) -> "ExactMatrix":
        return ExactMatrix(self.num.T.copy(), self.den)

    def __eq__(self, other):
        if not isinstance(other, ExactMatrix):
            return NotImplemented
        return self.den == other.den and self.num.shape == other.num.shape \
            and bool(np.all(self.num == other.num))

    __hash__ = None

    def is_zero(self) -> bool:
        return _max_abs(self.num) == 0

    def entry(self, i: int, j: int) -> Fraction:
        return Fraction(int(self.num[i, j]), self.den)

    def row_sums(self) -> list[Fraction]:
        return [Fraction(int(s), self.den) for s in self._as(object).sum(axis=1)]

    def col_sums(self) -> list[Fraction]:
        return [Fraction(int(s), self.den) for s in self._as(object).sum(axis=0)]

    def max_abs(self) -> Fraction:
        return Fraction(_max_abs(self.num), self.den)

    def to_float(self) -> np.ndarray:
        return self.num.astype(np.float64) / self.den

    @classmethod
    def identity(cls, N: int) -> "ExactMatrix":
        return cls(np.eye(N, dtype=np.int64), 1)

    @classmethod
    def from_fractions(cls, weights: Sequence, mats: Sequence[np.ndarray]) -> "ExactMatrix":
        """``sum_g weights[g] * mats[g]`` for integer matrices ``mats``."""
        weights = [Fraction(w) for w in weights]
        den = 1
        for w in weights:
            den = den * w.denominator // math.gcd(den, w.denominator)
        num = None
        for w, m in zip(weights, mats):
            term = np.asarray(m, dtype=np.int64) * (w.numerator * (den // w.denominator))
            num = term if num is None else num + term
        return cls(num, den)


# ---------------------------------------------------------------------------
# Operator classes


class WalkOperator:
    """Base class: an implicit linear operator on the ``2^(n k)``-dimensional function space."""

    kind = "operator"
    stochastic = True
    symmetric = False

    def __init__(self, n: int, k: int):
        self.N = _check_nk(n, k)
        self.n = n
        self.k = k
        self._dense_cache = None
        self._exact_cache = None

    # -- action -------------------------------------------------------------
    def matvec(self, v: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def rmatvec(self, v: np.ndarray) -> np.ndarray:
        """Action of the transpose; rows of ``A`` are ``rmatvec(e_X)``."""
        raise NotImplementedError

    def step(self, dist: np.ndarray) -> np.ndarray:
        """Push a distribution (or several, as columns) forward by one step."""
        return self.rmatvec(dist)

    def row(self, X: int) -> np.ndarray:
        e = np.zeros(self.N)
        e[int(X)] = 1.0
        return self.rmatvec(e)

    def sample(self, states: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        """One simulated step from each of ``states``."""
        raise NotImplementedError(f"{self.kind} operators cannot be simulated")

    def connections(self) -> list[tuple[str, np.ndarray]]:
        """Generators of the support graph: ``("perm", p)`` or ``("labels", l)`` entries."""
        raise StructureError(f"{self.kind} operators carry no connection structure")

    # -- realizations ---------------------------------------------------------
    def dense(self) -> np.ndarray:
        if self.N > DENSE_CAP:
            raise CapacityError(f"dense realization needs 2^(n k) <= {DENSE_CAP}, got {self.N}")
        if self._dense_cache is None:
            mat = np.ascontiguousarray(self._dense(), dtype=np.float64)
            mat.setflags(write=False)
            self._dense_cache = mat
        return self._dense_cache

    def _dense(self) -> np.ndarray:
        return self.matvec(np.eye(self.N))

    def exact(self) -> ExactMatrix:
        if self.N > EXACT_CAP:
            raise CapacityError(f"exact mode needs 2^(n k) <= {EXACT_CAP}, got {self.N}")
        if self._exact_cache is None:
            self._exact_cache = self._exact()
        return self._exact_cache

    def _exact(self) -> ExactMatrix:
        raise NotImplementedError(f"{self.kind} has no exact realization")

    # -- algebra ------------------------------------------------------------
    def _compatible(self, other: "WalkOperator"):
        if (self.n, self.k) != (other.n, other.k):
            raise DimensionError(f"operators on (n,k)=({self.n},{self.k}) and ({other.n},{other.k})")

    def __matmul__(self, other: "WalkOperator") -> "WalkOperator":
        return Product([self, other])

    def __add__(self, other):
        return LinearCombination([(1, self), (1, other)])

    def __sub__(self, other):
        return LinearCombination([(1, self), (-1, other)])

    def __mul__(self, c):
        return LinearCombination([(c, self)])

    __rmul__ = __mul__

    def __neg__(self):
        return LinearCombination([(-1, self)])

    def power(self, t: int) -> "WalkOperator":
        if t < 0:
            raise ParameterError("power must be non-negative")
        if t == 0:
            return Identity(self.n, self.k)
        if t == 1:
            return self
        return Power(self, t)

    def adjoint(self) -> "WalkOperator":
        return self if self.symmetric else Adjoint(self)

    def __repr__(self):
        return f"{type(self).__name__}(n={self.n}, k={self.k}, kind={self.kind!r})"


def _as_columns(v):
    v = np.asarray(v)
    if v.dtype != object and not np.issubdtype(v.dtype, np.floating):
        v = v.astype(np.float64)
    return v


class Identity(WalkOperator):
    kind = "identity"
    symmetric = True

    def matvec(self, v):
        return np.array(_as_columns(v), copy=True)

    rmatvec = matvec

    def _dense(self):
        return np.eye(self.N)

    def _exact(self):
        return ExactMatrix.identity(self.N)

    def sample(self, states, rng):
        return np.asarray(states, dtype=np.int64).copy()

    def connections(self):
        return []


class BlockAverage(WalkOperator):
    """Replace ``X`` by a uniform state with the same label.

    Such an operator is the orthogonal projection onto functions that are
    constant on label classes. ``sampler`` simulates the step from its actual
    definition rather than from the labels.
    """

    symmetric = True

    def __init__(self, n: int, k: int, labels: np.ndarray, kind: str = "block",
                 sampler: Optional[Callable] = None):
        super().__init__(n, k)
        labels = np.asarray(labels, dtype=np.int64)
        if labels.shape != (self.N,):
            raise DimensionError("one label per state is required")
        _, inv, counts = np.unique(labels, return_inverse=True, return_counts=True)
        self.labels = inv.astype(np.int64)
        self.counts = counts.astype(np.int64)
        self._order = np.argsort(self.labels, kind="stable")
        self._starts = np.concatenate([[0], np.cumsum(self.counts)[:-1]])
        self.kind = kind
        self._sampler = sampler

    @property
    def num_blocks(self) -> int:
        return len(self.counts)

    def matvec(self, v):
        v = _as_columns(v)
        sums = np.add.reduceat(v[self._order], self._starts, axis=0)
        scale = self.counts if v.ndim == 1 else self.counts[:, None]
        return (sums / scale)[self.labels]

    rmatvec = matvec

    def _dense(self):
        same = self.labels[:, None] == self.labels[None, :]
        return same / self.counts[self.labels][:, None]

    def _exact(self):
        den = 1
        for c in np.unique(self.counts):
            den = den * int(c) // math.gcd(den, int(c))
        same = (self.labels[:, None] == self.labels[None, :]).astype(np.int64)
        return ExactMatrix(same * (den // self.counts[self.labels])[:, None], den)

    def sample(self, states, rng):
        if self._sampler is None:
            return super().sample(states, rng)
        return self._sampler(np.asarray(states, dtype=np.int64), rng)

    def connections(self):
        return [("labels", self.labels)]


class PermutationMixture(WalkOperator):
    """Apply a random permutation of ``{0,1}^n`` diagonally to all k strings.

    ``perms[g]`` is a permutation of string values chosen with probability
    ``weights[g]``. Equal permutations are merged.
    """

    def __init__(self, n: int, k: int, perms: np.ndarray, weights: Sequence, kind: str = "gates"):
        super().__init__(n, k)
        perms = np.asarray(perms, dtype=np.int64)
        if perms.ndim != 2 or perms.shape[1] != (1 << n):
            raise DimensionError(f"permutations of 2^{n} string values expected")
        for p in perms:
            if not np.array_equal(np.sort(p), np.arange(1 << n)):
                raise StructureError("generator is not a permutation")
        weights = [Fraction(w) if not isinstance(w, float) else Fraction(w).limit_denominator(1 << 40)
                   for w in weights]
        merged: dict[bytes, list] = {}
        for p, w in zip(perms, weights):
            key = p.tobytes()
            if key in merged:
                merged[key][1] += w
            else:
                merged[key] = [p, w]
        self.perms = np.array([v[0] for v in merged.values()])
        self.weights_exact = [v[1] for v in merged.values()]
        self.weights = np.array([float(w) for w in self.weights_exact])
        self.inverse_perms = np.argsort(self.perms, axis=1)
        self.kind = kind
        self.symmetric = self._closed_under_inverse()
        self._state_perm_cache: dict[int, np.ndarray] = {}
        self._cache_states = len(self.perms) * self.N <= (1 << 23)

    def _closed_under_inverse(self) -> bool:
        lookup = {p.tobytes(): w for p, w in zip(self.perms, self.weights_exact)}
        return all(lookup.get(q.tobytes()) == w for q, w in zip(self.inverse_perms, self.weights_exact))

    def _lift(self, perm: np.ndarray, states: np.ndarray) -> np.ndarray:
        mask = (1 << self.n) - 1
        out = np.zeros_like(states)
        for i in range(self.k):
            out |= perm[(states >> (i * self.n)) & mask] << (i * self.n)
        return out

    def state_perm(self, g: int, inverse: bool = False) -> np.ndarray:
        key = -g - 1 if inverse else g
        if key in self._state_perm_cache:
            return self._state_perm_cache[key]
        table = self.inverse_perms[g] if inverse else self.perms[g]
        p = self._lift(table, np.arange(self.N, dtype=np.int64))
        if self._cache_states:
            self._state_perm_cache[key] = p
        return p

    def _apply(self, v, inverse):
        v = _as_columns(v)
        out = np.zeros(v.shape, dtype=np.result_type(v.dtype, np.float64))
        for g, w in enumerate(self.weights):
            out += w * v[self.state_perm(g, inverse)]
        return out

    def matvec(self, v):
        return self._apply(v, False)

    def rmatvec(self, v):
        return self._apply(v, True)

    def _dense(self):
        M = np.zeros((self.N, self.N))
        rows = np.arange(self.N)
        for g, w in enumerate(self.weights):
            M[rows, self.state_perm(g)] += w
        return M

    def _exact(self):
        rows = np.arange(self.N)
        mats = []
        for g in range(len(self.perms)):
            m = np.zeros((self.N, self.N), dtype=np.int64)
            m[rows, self.state_perm(g)] = 1
            mats.append(m)
        return ExactMatrix.from_fractions(self.weights_exact, mats)

    def sample(self, states, rng):
        states = np.asarray(states, dtype=np.int64)
        choice = rng.choice(len(self.perms), size=states.shape[0], p=self.weights / self.weights.sum())
        mask = (1 << self.n) - 1
        out = np.zeros_like(states)
        for i in range(self.k):
            out |= self.perms[choice, (states >> (i * self.n)) & mask] << (i * self.n)
        return out

    def connections(self):
        ident = np.arange(1 << self.n)
        return [("perm", self.state_perm(g)) for g in range(len(self.perms))
                if not np.array_equal(self.perms[g], ident)]


class Mixture(WalkOperator):
    """Take a step of ``ops[i]`` with probability ``weights[i]``."""

    kind = "mixture"

    def __init__(self, ops: Sequence[WalkOperator], weights: Optional[Sequence] = None, kind: str = "mixture"):
        ops = list(ops)
        if not ops:
            raise ParameterError("a mixture needs at least one operator")
        super().__init__(ops[0].n, ops[0].k)
        for op in ops:
            self._compatible(op)
        if weights is None:
            weights = [Fraction(1, len(ops))] * len(ops)
        self.weights_exact = [Fraction(w) for w in weights]
        self.weights = np.array([float(w) for w in self.weights_exact])
        self.ops = ops
        self.kind = kind
        self.stochastic = all(op.stochastic for op in ops)
        self.symmetric = all(op.symmetric for op in ops)

    def matvec(self, v):
        return sum(w * op.matvec(v) for w, op in zip(self.weights, self.ops))

    def rmatvec(self, v):
        return sum(w * op.rmatvec(v) for w, op in zip(self.weights, self.ops))

    def _dense(self):
        return sum(w * op.dense() for w, op in zip(self.weights, self.ops))

    def _exact(self):
        total = None
        for w, op in zip(self.weights_exact, self.ops):
            term = op.exact().scale(w)
            total = term if total is None else total + term
        return total

    def sample(self, states, rng):
        states = np.asarray(states, dtype=np.int64).copy()
        choice = rng.choice(len(self.ops), size=states.shape[0], p=self.weights / self.weights.sum())
        for i, op in enumerate(self.ops):
            sel = np.flatnonzero(choice == i)
            if sel.size:
                states[sel] = op.sample(states[sel], rng)
        return states

    def connections(self):
        return [c for op in self.ops for c in op.connections()]


class Product(WalkOperator):
    """Steps of ``ops[0]``, then ``ops[1]``, and so on (the matrix product in that order)."""

    kind = "product"

    def __init__(self, ops: Sequence[WalkOperator], kind: str = "product"):
        flat = []
        for op in ops:
            flat.extend(op.ops if isinstance(op, Product) else [op])
        if not flat:
            raise ParameterError("a product needs at least one operator")
        super().__init__(flat[0].n, flat[0].k)
        for op in flat:
            self._compatible(op)
        self.ops = flat
        self.kind = kind
        self.stochastic = all(op.stochastic for op in flat)

    def matvec(self, v):
        for op in reversed(self.ops):
            v = op.matvec(v)
        return v

    def rmatvec(self, v):
        for op in self.ops:
            v = op.rmatvec(v)
        return v

    def _dense(self):
        M = self.ops[0].dense()
        for op in self.ops[1:]:
            M = M @ op.dense()
        return M

    def _exact(self):
        M = self.ops[0].exact()
        for op in self.ops[1:]:
            M = M @ op.exact()
        return M

    def sample(self, states, rng):
        for op in self.ops:
            states = op.sample(states, rng)
        return states

    def connections(self):
        seen, out = set(), []
        for op in self.ops:
            if id(op) not in seen:
                seen.add(id(op))
                out.extend(op.connections())
        return out


class Power(WalkOperator):
    kind = "power"

    def __init__(self, op: WalkOperator, t: int):
        super().__init__(op.n, op.k)
        self.op = op
        self.t = int(t)
        self.stochastic = op.stochastic
        self.symmetric = op.symmetric

    def matvec(self, v):
        for _ in range(self.t):
            v = self.op.matvec(v)
        return v

    def rmatvec(self, v):
        for _ in range(self.t):
            v = self.op.rmatvec(v)
        return v

    def _dense(self):
        return np.linalg.matrix_power(self.op.dense(), self.t)

    def _exact(self):
        base, out, t = self.op.exact(), None, self.t
        while t:
            if t & 1:
                out = base if out is None else out @ base
            t >>= 1
            if t:
                base = base @ base
        return out

    def sample(self, states, rng):
        for _ in range(self.t):
            states = self.op.sample(states, rng)
        return states

    def connections(self):
        return self.op.connections()


class LinearCombination(WalkOperator):
    """``sum_i c_i A_i``; no stochasticity is claimed."""

    kind = "combination"
    stochastic = False

    def __init__(self, terms: Sequence[tuple]):
        terms = [(Fraction(c) if not isinstance(c, float) else c, op) for c, op in terms]
        flat = []
        for c, op in terms:
            if isinstance(op, LinearCombination):
                flat.extend((c * c2, op2) for c2, op2 in op.terms)
            else:
                flat.append((c, op))
        super().__init__(flat[0][1].n, flat[0][1].k)
        for _, op in flat:
            self._compatible(op)
        self.terms = flat
        self.symmetric = all(op.symmetric for _, op in flat)

    def matvec(self, v):
        return sum(float(c) * op.matvec(v) for c, op in self.terms)

    def rmatvec(self, v):
        return sum(float(c) * op.rmatvec(v) for c, op in self.terms)

    def _dense(self):
        return sum(float(c) * op.dense() for c, op in self.terms)

    def _exact(self):
        total = None
        for c, op in self.terms:
            term = op.exact().scale(c)
            total = term if total is None else total + term
        return total


class Adjoint(WalkOperator):
    kind = "adjoint"

    def __init__(self, op: WalkOperator):
        super().__init__(op.n, op.k)
        self.op = op
        self.stochastic = op.stochastic

    def matvec(self, v):
        return self.op.rmatvec(v)

    def rmatvec(self, v):
        return self.op.matvec(v)

    def _dense(self):
        return self.op.dense().T

    def _exact(self):
        return self.op.exact().T

    def connections(self):
        return self.op.connections()

    def adjoint(self):
        return self.op


class DenseOperator(WalkOperator):
    """Wrap an explicit matrix."""

    kind = "dense"

    def __init__(self, n: int, k: int, matrix: np.ndarray, stochastic: bool = False):
        super().__init__(n, k)
        matrix = np.asarray(matrix, dtype=np.float64)
        if matrix.shape != (self.N, self.N):
            raise DimensionError(f"matrix must be {self.N}x{self.N}")
        self.matrix = matrix
        self.stochastic = stochastic
        self.symmetric = bool(np.allclose(matrix, matrix.T, atol=0, rtol=0))

    def matvec(self, v):
        return self.matrix @ _as_columns(v)

    def rmatvec(self, v):
        return self.matrix.T @ _as_columns(v)

    def _dense(self):
        return self.matrix

    def connections(self):
        rows, cols = np.nonzero(self.matrix)
        return [("edges", np.stack([rows, cols]))]


# ---------------------------------------------------------------------------
# Labels and samplers


def _compress(lab: np.ndarray) -> np.ndarray:
    return np.unique(lab, return_inverse=True)[1].astype(np.int64)


def _combine(parts: Sequence[tuple[np.ndarray, int]]) -> np.ndarray:
    """Mixed-radix combination of label columns, compressing before overflow."""
    lab = np.zeros(parts[0][0].shape, dtype=np.int64)
    top = 1
    for arr, radix in parts:
        if top * radix >= _INT_LIMIT:
            lab = _compress(lab)
            top = int(lab.max()) + 1
        lab = lab * radix + arr
        top *= radix
    return lab


def equality_pattern(columns: Sequence[np.ndarray]) -> np.ndarray:
    """Canonical code of which columns are equal, row by row.

    Column ``i`` contributes the smallest ``j <= i`` with ``columns[j] == columns[i]``,
    combined in mixed radix ``1, 2, ..., k``.
    """
    code = np.zeros(np.shape(columns[0]), dtype=np.int64)
    radix = 1
    for i in range(len(columns)):
        first = np.full(code.shape, i, dtype=np.int64)
        for j in range(i - 1, -1, -1):
            first = np.where(columns[j] == columns[i], j, first)
        code += first * radix
        radix *= i + 1
    return code


def _R_labels(n: int, S: Sequence[int], k: int) -> np.ndarray:
    N = 1 << (n * k)
    idx = np.arange(N, dtype=np.int64)
    m = coord_mask(S)
    full = 0
    for i in range(k):
        full |= m << (i * n)
    strings = state_strings(n, k, idx)
    subs = [extract_bits(strings[:, i], S) for i in range(k)]
    return _combine([(idx & ~full, N), (equality_pattern(subs), math.factorial(k))])


def _permute_substrings(states, n, k, coords, rng):
    """Apply one uniform permutation of ``{0,1}^|coords|`` to the ``coords`` substrings of every string."""
    states = np.asarray(states, dtype=np.int64)
    size = 1 << len(coords)
    out = np.empty_like(states)
    chunk = max(1, _SAMPLE_CHUNK // size)
    for lo in range(0, states.shape[0], chunk):
        part = states[lo:lo + chunk]
        strings = state_strings(n, k, part)
        perm = np.argsort(rng.random((part.shape[0], size)), axis=1)
        subs = extract_bits(strings, coords)
        new = perm[np.arange(part.shape[0])[:, None], subs]
        out[lo:lo + chunk] = pack_strings(deposit_bits(strings, coords, new), n)
    return out


def _resample_bits(states, n, k, coords, rng):
    states = np.asarray(states, dtype=np.int64)
    strings = state_strings(n, k, states)
    m = coord_mask(coords)
    fresh = rng.integers(0, 1 << n, size=strings.shape, dtype=np.int64)
    return pack_strings((strings & ~m) | (fresh & m), n)


# ---------------------------------------------------------------------------
# Builders


def op_R(n: int, S: Iterable[int], k: int) -> BlockAverage:
    """Apply one uniform permutation of ``{0,1}^|S|`` to the S-substrings of all k strings."""
    S = _check_set(n, S)
    _check_nk(n, k)
    return BlockAverage(n, k, _R_labels(n, S, k), kind=f"R{list(S)}",
                        sampler=lambda st, rng: _permute_substrings(st, n, k, S, rng))


def op_Q(n: int, S: Iterable[int], k: int) -> BlockAverage:
    """Resample the coordinates in ``S`` of every string independently and uniformly."""
    S = _check_set(n, S)
    N = _check_nk(n, k)
    full = 0
    for i in range(k):
        full |= coord_mask(S) << (i * n)
    labels = np.arange(N, dtype=np.int64) & ~full
    return BlockAverage(n, k, labels, kind=f"Q{list(S)}",
                        sampler=lambda st, rng: _resample_bits(st, n, k, S, rng))


def _subset_mixture(builder, n: int, m: int, k: int, tag: str) -> WalkOperator:
    if not 1 <= m <= n:
        raise ParameterError(f"subset size m={m} outside [1, {n}]")
    _check_nk(n, k)
    if m == n:
        return builder(n, range(1, n + 1), k)
    subsets = list(itertools.combinations(range(1, n + 1), m))
    return Mixture([builder(n, S, k) for S in subsets], kind=f"{tag}mix{m}")


def op_mix_R(n: int, m: int, k: int) -> WalkOperator:
    """Uniform average of ``op_R(n, S, k)`` over all ``S`` of size ``m``."""
    return _subset_mixture(op_R, n, m, k, "R")


def op_mix_Q(n: int, m: int, k: int) -> WalkOperator:
    """Uniform average of ``op_Q(n, S, k)`` over all ``S`` of size ``m``."""
    return _subset_mixture(op_Q, n, m, k, "Q")


GateSetLike = Union[str, Sequence[Gate]]


def op_gate_average(gate_set: GateSetLike, windows: Sequence[Sequence[int]], n: int, k: int) -> WalkOperator:
    """Uniformly random window and gate, applied to all k strings.

    ``gate_set`` is ``"s8"``, ``"des2"`` or an explicit list of gates (uniform
    weights). The full ``s8`` average over one window is a uniform
    permutation of the window's patterns and is built as ``op_R`` directly.
    """
    windows = [tuple(int(a) for a in w) for w in windows]
    if not windows:
        raise PlacementError("at least one window is required")
    for w in windows:
        PlacedGate(enumerate_gate_set("des2")[0][0], w).check(n)
    _check_nk(n, k)
    if isinstance(gate_set, str) and gate_set == "s8":
        ops = [op_R(n, w, k) for w in windows]
        return ops[0] if len(ops) == 1 else Mixture(ops, kind="s8-average")
    if isinstance(gate_set, str):
        gates, _ = enumerate_gate_set(gate_set)
        tag = gate_set
    else:
        gates, tag = list(gate_set), "gates"
    values = np.arange(1 << n, dtype=np.int64)
    perms = [PlacedGate(g, w).apply_values(values) for w in windows for g in gates]
    weight = Fraction(1, len(perms))
    return PermutationMixture(n, k, np.array(perms), [weight] * len(perms), kind=f"{tag}-average")


def op_brickwork_layer(n: int, k: int, gate_set: GateSetLike = "des2",
                       coords: Optional[Sequence[int]] = None, total_n: Optional[int] = None) -> WalkOperator:
    """One brickwork layer as the ordered product of per-window gate averages.

    With ``coords`` the layer runs on those wires (local wire ``a`` is
    ``coords[a-1]``) of a ``total_n``-wire register.
    """
    from .architectures import brickwork_layer_windows

    windows = brickwork_layer_windows(n)
    if coords is not None:
        windows = [tuple(coords[a - 1] for a in w) for w in windows]
    width = total_n if total_n is not None else n
    ops = [op_gate_average(gate_set, [w], width, k) for w in windows]
    return ops[0] if len(ops) == 1 else Product(ops, kind="brickwork-layer")


def _pattern_labels(n: int, k: int, groups: Sequence[Sequence[int]]) -> np.ndarray:
    N = 1 << (n * k)
    strings = state_strings(n, k, np.arange(N, dtype=np.int64))
    parts = []
    for coords in groups:
        subs = [extract_bits(strings[:, i], coords) for i in range(k)]
        parts.append((equality_pattern(subs), math.factorial(k)))
    return _combine(parts)


def op_2d(kind: str, side: int, k: int) -> WalkOperator:
    """Grid walks on ``n = side^2`` wires.

    ``GR`` applies an independent uniform permutation to each row, ``GC`` to
    each column, and ``G`` one uniform permutation to whole strings.
    """
    if side < 1:
        raise ParameterError("side must be positive")
    grid = GridView(side)
    n = grid.n
    _check_nk(n, k)
    kind = kind.upper()
    if kind == "G":
        op = op_R(n, range(1, n + 1), k)
        op.kind = "G"
        return op
    sampler = grid_pass(kind, side, k)
    lines = grid.rows() if kind == "GR" else grid.cols()
    return BlockAverage(n, k, _pattern_labels(n, k, lines), kind=kind, sampler=sampler)


def grid_pass(kind: str, side: int, k: int) -> Callable:
    """Simulator of one ``GR`` or ``GC`` step that never touches the full state space.

    The returned function maps an array of packed states and an rng to the
    next states, so it works whenever ``side^2 * k`` fits in 62 bits.
    """
    if side < 1:
        raise ParameterError("side must be positive")
    grid = GridView(side)
    n = grid.n
    if k < 1:
        raise ParameterError("k must be at least 1")
    if n * k > 62:
        raise CapacityError(f"packed states need n k <= 62, got {n * k}")
    kind = kind.upper()
    if kind not in ("GR", "GC"):
        raise ParameterError(f"unknown grid walk {kind!r}; expected GR, GC or G")
    lines = grid.rows() if kind == "GR" else grid.cols()

    def sampler(states, rng):
        for line in lines:
            states = _permute_substrings(states, n, k, line, rng)
        return states

    return sampler


def op_nachtergaele(m: int, ell: int, k: int) -> WalkOperator:
    """``R_{m,[m-ell-1, m],k} (R_{m,[m-1],k} - R_{m,[m],k})``."""
    if not 1 <= m - ell - 1 <= m:
        raise ParameterError(f"need 0 <= ell <= m - 2, got ell={ell}, m={m}")
    left = op_R(m, range(m - ell - 1, m + 1), k)
    return left @ (op_R(m, range(1, m), k) - op_R(m, range(1, m + 1), k))


def descriptor_operator(desc, k: int, coords: Optional[Sequence[int]] = None,
                        total_n: Optional[int] = None) -> WalkOperator:
    """Exact walk operator of the circuit distribution described by ``desc``."""
    from .architectures import (all_windows, lattice_blocks, lattice_fibers, nn_windows)

    coords = list(coords) if coords is not None else list(range(1, desc.n + 1))
    width = total_n if total_n is not None else desc.n

    def mapped(windows):
        return [tuple(coords[a - 1] for a in w) for w in windows]

    if desc.kind == "fullyrandom":
        return op_gate_average(desc.gate_set, mapped(all_windows(desc.n)), width, k).power(desc.rounds)
    if desc.kind == "nn1d":
        return op_gate_average(desc.gate_set, mapped(nn_windows(desc.n)), width, k).power(desc.rounds)
    if desc.kind == "brickwork1d":
        layer = op_brickwork_layer(desc.n, k, desc.gate_set, coords=coords, total_n=width)
        return layer.power(desc.rounds)

    side = desc.side

    def level_op(level, sub_coords):
        if level == 1:
            return descriptor_operator(desc.base, k, sub_coords, width)
        slab = Product([level_op(level - 1, [sub_coords[p - 1] for p in block])
                        for block in lattice_blocks(side, level)], kind=f"slab{level}")
        col = Product([descriptor_operator(desc.base, k, [sub_coords[p - 1] for p in fiber], width)
                       for fiber in lattice_fibers(side, level)], kind=f"column{level}")
        rounds = desc.rounds_at(level)
        if rounds == 0:
            return slab
        return Product([slab, Product([col, slab]).power(rounds)], kind=f"lattice{level}")

    levels = 2 if desc.kind == "lattice2d" else desc.dims
    return level_op(levels, coords)


# ---------------------------------------------------------------------------
# Ground space


class OrbitPartition:
    """Vectorised union-find over ``N`` states.

    Edges are merged by hooking larger roots onto smaller ones and then
    compressing paths until every edge joins equal roots.
    """

    def __init__(self, N: int):
        self.parent = np.arange(N, dtype=np.int64)

    def _compress(self):
        p = self.parent
        while True:
            pp = p[p]
            if np.array_equal(pp, p):
                break
            p = pp
        self.parent = p

    def union_edges(self, u: np.ndarray, v: np.ndarray):
        u = np.asarray(u, dtype=np.int64)
        v = np.asarray(v, dtype=np.int64)
        while True:
            pu, pv = self.parent[u], self.parent[v]
            diff = pu != pv
            if not diff.any():
                return
            lo = np.minimum(pu[diff], pv[diff])
            hi = np.maximum(pu[diff], pv[diff])
            np.minimum.at(self.parent, hi, lo)
            self._compress()

    def union_perm(self, perm: np.ndarray):
        self.union_edges(np.arange(len(perm)), perm)

    def union_labels(self, labels: np.ndarray):
        labels = np.asarray(labels)
        _, first, inv = np.unique(labels, return_index=True, return_inverse=True)
        self.union_edges(np.arange(len(labels)), first[inv])

    def labels(self) -> np.ndarray:
        self._compress()
        return _compress(self.parent)


@dataclass
class GroundSpace:
    """Orbit partition of the state space and the projector averaging over orbits."""

    labels: np.ndarray
    counts: np.ndarray
    n: int
    k: int

    @property
    def dim(self) -> int:
        return len(self.counts)

    def projector(self) -> BlockAverage:
        return BlockAverage(self.n, self.k, self.labels, kind="ground")

    def orbits(self) -> list[np.ndarray]:
        order = np.argsort(self.labels, kind="stable")
        return np.split(order, np.cumsum(self.counts)[:-1])


def _lift_string_perm(perm, n, k):
    states = np.arange(1 << (n * k), dtype=np.int64)
    mask = (1 << n) - 1
    out = np.zeros_like(states)
    for i in range(k):
        out |= np.asarray(perm, dtype=np.int64)[(states >> (i * n)) & mask] << (i * n)
    return out


def ground_space(source, n: Optional[int] = None, k: Optional[int] = None) -> GroundSpace:
    """Orbit partition under an operator's support or a list of generators.

    ``source`` is a :class:`WalkOperator` or a sequence of permutations. With
    ``n`` and ``k`` given, permutations of length ``2^n`` are string
    permutations acting diagonally; otherwise they act on states directly.
    """
    if isinstance(source, WalkOperator):
        n, k = source.n, source.k
        items = source.connections()
    else:
        if n is None or k is None:
            raise ParameterError("n and k are required with a generator list")
        N = _check_nk(n, k)
        items = []
        for g in source:
            g = np.asarray(g, dtype=np.int64)
            size = len(g)
            if not np.array_equal(np.sort(g), np.arange(size)):
                raise StructureError("generator is not a permutation")
            if size == (1 << n) and size != N:
                g = _lift_string_perm(g, n, k)
            elif size != N:
                raise StructureError(f"generator of length {size} fits neither 2^n nor 2^(n k)")
            items.append(("perm", g))
    N = 1 << (n * k)
    uf = OrbitPartition(N)
    for tag, data in items:
        if tag == "perm":
            uf.union_perm(data)
        elif tag == "labels":
            uf.union_labels(data)
        elif tag == "edges":
            uf.union_edges(data[0], data[1])
        else:
            raise StructureError(f"unknown connection type {tag!r}")
    labels = uf.labels()
    return GroundSpace(labels=labels, counts=np.bincount(labels).astype(np.int64), n=n, k=k)


# ---------------------------------------------------------------------------
# Spectral quantities


@dataclass
class SpectralReport:
    quantity: str
    value: float
    method: str
    tolerance: float
    iterations: int
    ground_dim: Optional[int] = None
    residual: float = 0.0
    converged: bool = True
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = {"quantity": self.quantity, "value": float(self.value), "method": self.method,
             "tolerance": float(self.tolerance), "iterations": int(self.iterations),
             "ground_dim": self.ground_dim, "residual": float(self.residual),
             "converged": bool(self.converged)}
        d.update(self.extra)
        return d


def _block_top_eig(apply: Callable, N: int, project: Callable, rng, tol: float, max_iter: int,
                   block: int) -> tuple[float, float, int, bool]:
    """Largest eigenvalue of a PSD operator by subspace iteration with Rayleigh-Ritz."""
    V = project(rng.standard_normal((N, block)))
    V, _ = np.linalg.qr(V)
    W = apply(V)
    theta, residual = 0.0, np.inf
    for it in range(1, max_iter + 1):
        H = V.T @ W
        H = 0.5 * (H + H.T)
        evals, evecs = np.linalg.eigh(H)
        theta = float(evals[-1])
        y = evecs[:, -1]
        r = W @ y - theta * (V @ y)
        residual = float(np.linalg.norm(r))
        if residual < tol:
            return theta, residual, it, True
        # rotate onto Ritz vectors so the leading column carries the estimate
        V, _ = np.linalg.qr(project(W @ evecs[:, ::-1]))
        W = apply(V)
    return theta, residual, max_iter, False


def _top_eigvalsh(M: np.ndarray) -> float:
    N = M.shape[0]
    return float(scipy.linalg.eigh(M, eigvals_only=True, subset_by_index=[N - 1, N - 1],
                                   driver="evr")[0])


def _top_singular(B: np.ndarray, seed: int = 0) -> float:
    if not np.any(B):
        return 0.0
    if B.shape[0] <= 64:
        return float(np.linalg.norm(B, 2))
    v0 = np.random.default_rng(seed).standard_normal(B.shape[1])
    return float(scipy.sparse.linalg.svds(B, k=1, v0=v0, tol=0, return_singular_vectors=False)[0])


def _choose_method(N: int, method: Optional[str]) -> str:
    if method is None:
        return "dense" if N <= DENSE_CAP else "power"
    if method not in ("dense", "power"):
        raise ParameterError(f"unknown method {method!r}")
    if method == "dense" and N > DENSE_CAP:
        raise CapacityError(f"dense method needs 2^(n k) <= {DENSE_CAP}, got {N}")
    return method


def spectral_gap(op: WalkOperator, ground: Optional[GroundSpace] = None, method: Optional[str] = None,
                 tol: float = 1e-10, seed: int = 0, max_iter: int = 100_000, block: int = 8,
                 singular: bool = True) -> SpectralReport:
    """``1 - max eig`` of the additive symmetrization restricted to the ground complement.

    With ``singular`` the report's ``extra`` also carries
    ``singular_gap = 1 - ||A (I - P)||``, with ``P`` the ground projector.
    """
    if op.N > MATVEC_CAP:
        raise CapacityError("operator exceeds the matvec cap")
    ground = ground if ground is not None else ground_space(op)
    method = _choose_method(op.N, method)
    N = op.N
    comp = N - ground.dim
    if comp == 0:
        return SpectralReport("gap", 1.0, method, tol, 0, ground.dim,
                              extra={"singular_gap": 1.0, "note": "ground space is everything"})
    P = ground.projector()
    if method == "dense":
        A = op.dense()
        S = 0.5 * (A + A.T)
        if ground.dim <= 64:
            U = np.zeros((N, ground.dim))
            U[np.arange(N), ground.labels] = 1.0 / np.sqrt(ground.counts[ground.labels])
            SU = S @ U
            M = S - U @ SU.T - SU @ U.T + U @ (U.T @ SU) @ U.T - 2.0 * (U @ U.T)
            B = A - (A @ U) @ U.T                 # A (I - P)
        else:
            Pd = P.dense()
            SP = S @ Pd
            M = S - SP - SP.T + Pd @ SP - 2.0 * Pd
            B = A - A @ Pd
        lam = _top_eigvalsh(0.5 * (M + M.T))
        extra = {"top_eigenvalue": lam}
        if singular:
            extra["singular_gap"] = 1.0 - _top_singular(B, seed)
        return SpectralReport("gap", 1.0 - lam, "dense", tol, 1, ground.dim, extra=extra)

    def project(V):
        return V - P.matvec(V)

    def apply(V):
        V = project(V)
        SV = 0.5 * (op.matvec(V) + op.rmatvec(V))
        return 0.5 * (project(SV) + V)

    rng = np.random.default_rng(seed)
    b = max(1, min(block, comp))
    theta, res, its, ok = _block_top_eig(apply, N, project, rng, tol, max_iter, b)
    lam = 2.0 * theta - 1.0
    extra = {"top_eigenvalue": lam}
    if singular:
        sing = operator_norm(_Deflated(op, P), method="power", tol=tol, seed=seed, max_iter=max_iter)
        extra.update(singular_gap=1.0 - sing.value, singular_converged=sing.converged)
    return SpectralReport("gap", 1.0 - lam, "power", tol, its, ground.dim, residual=res, converged=ok,
                          extra=extra)


class _Deflated(WalkOperator):
    """``A (I - P)`` for a ground projector ``P``."""

    kind = "deflated"
    stochastic = False

    def __init__(self, op: WalkOperator, P: BlockAverage):
        super().__init__(op.n, op.k)
        self.op, self.P = op, P

    def matvec(self, v):
        v = _as_columns(v)
        return self.op.matvec(v - self.P.matvec(v))

    def rmatvec(self, v):
        w = self.op.rmatvec(v)
        return w - self.P.matvec(w)

    def _dense(self):
        return self.op.dense() @ (np.eye(self.N) - self.P.dense())


def operator_norm(op: WalkOperator, method: Optional[str] = None, tol: float = 1e-10, seed: int = 0,
                  max_iter: int = 100_000, block: int = 4) -> SpectralReport:
    """Largest singular value, by dense SVD or subspace iteration on ``A^T A``."""
    if op.N > MATVEC_CAP:
        raise CapacityError("operator exceeds the matvec cap")
    method = _choose_method(op.N, method)
    if method == "dense":
        value = _top_singular(op.dense(), seed)
        return SpectralReport("norm", value, "dense", tol, 1)

    def apply(V):
        return op.rmatvec(op.matvec(V))

    rng = np.random.default_rng(seed)
    probe = apply(rng.standard_normal((op.N, 1)))
    if not np.any(np.abs(probe) > 0):
        return SpectralReport("norm", 0.0, "power", tol, 1)
    # scale the tolerance on A^T A so the singular value meets ``tol``
    theta, res, its, ok = _block_top_eig(apply, op.N, lambda V: V, rng, tol, max_iter, min(block, op.N))
    return SpectralReport("norm", math.sqrt(max(theta, 0.0)), "power", tol, its, residual=res,
                          converged=ok)


# ---------------------------------------------------------------------------
# Fourier images


def fourier_image(op: WalkOperator, chi: CharacterIndex, exact: Optional[bool] = None,
                  atol: float = 1e-12) -> dict:
    """Coefficients of ``op chi`` in the character basis: ``<op chi, chi_T> / 2^(n k)``.

    In exact mode (the default when ``2^(n k) <= 1024``) the values are
    :class:`~fractions.Fraction` and only nonzero ones are returned; in float
    mode coefficients below ``atol`` are dropped.
    """
    n, k, N = op.n, op.k, op.N
    vec = character_vector(chi, n, k).astype(np.int64)
    if exact is None:
        exact = N <= EXACT_CAP
    if exact:
        E = op.exact()
        num = E.num @ vec if E.num.dtype != object else E.num @ vec.astype(object)
        coeffs = walsh_hadamard(num)
        return {CharacterIndex.from_mask(s, n, k): Fraction(int(c), E.den * N)
                for s, c in enumerate(coeffs) if c != 0}
    coeffs = walsh_hadamard(op.matvec(vec.astype(np.float64))) / N
    return {CharacterIndex.from_mask(s, n, k): float(c)
            for s, c in enumerate(coeffs) if abs(c) > atol}


def character_matrix(op: WalkOperator) -> np.ndarray:
    """Matrix ``C[S, T] = <chi_S, op chi_T> / 2^(n k)`` over all character masks (float, dense)."""
    A = op.dense()
    H = walsh_hadamard(np.eye(op.N))
    return (H.T @ A @ H) / op.N
