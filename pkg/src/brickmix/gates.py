"""Three-bit reversible gates, placed gates and circuits.

A window ``(w0, w1, w2)`` reads the pattern index ``4*x[w0] + 2*x[w1] + x[w2]``;
a gate table maps pattern indices to pattern indices.
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence, Union

import numpy as np

from .bitcore import BitString, _as_bitstring
from .errors import DimensionError, PlacementError

GATE_SETS = ("s8", "des2")


@dataclass(frozen=True)
class Gate3:
    """An arbitrary permutation of {0,1}^3 given by its table."""

    table: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "table", tuple(int(v) for v in self.table))
        if sorted(self.table) != list(range(8)):
            raise ValueError(f"not a permutation of 0..7: {self.table}")

    def inverse(self) -> "Gate3":
        inv = [0] * 8
        for p, q in enumerate(self.table):
            inv[q] = p
        return Gate3(tuple(inv))

    @classmethod
    def identity(cls) -> "Gate3":
        return cls(tuple(range(8)))


@dataclass(frozen=True)
class DES2Gate:
    """The gate ``(x, b) -> (x, b XOR f(x))``.

    ``target`` (1, 2 or 3) is the window position receiving the XOR; the other
    two window bits, in window order, form ``x`` and index ``f_table`` as
    ``2*x1 + x2``.
    """

    f_table: tuple[int, ...]
    target: int

    def __post_init__(self):
        object.__setattr__(self, "f_table", tuple(int(b) for b in self.f_table))
        if len(self.f_table) != 4 or any(b not in (0, 1) for b in self.f_table):
            raise ValueError(f"f_table must be 4 bits, got {self.f_table}")
        if self.target not in (1, 2, 3):
            raise ValueError(f"target must be 1, 2 or 3, got {self.target}")

    @property
    def table(self) -> tuple[int, ...]:
        return _des2_table(self.f_table, self.target)

    def inverse(self) -> "DES2Gate":
        return self


@lru_cache(maxsize=None)
def _des2_table(f_table: tuple[int, ...], target: int) -> tuple[int, ...]:
    tbit = 3 - target                   # bit position of the target inside the pattern index
    controls = [p for p in (2, 1, 0) if p != tbit]
    out = []
    for p in range(8):
        x1, x2 = (p >> controls[0]) & 1, (p >> controls[1]) & 1
        out.append(p ^ (f_table[2 * x1 + x2] << tbit))
    return tuple(out)


Gate = Union[Gate3, DES2Gate]

TOFFOLI = DES2Gate((0, 0, 0, 1), 3)


def gate_inverse(g: Gate) -> Gate:
    return g.inverse()


@dataclass(frozen=True)
class PlacedGate:
    gate: Gate
    window: tuple[int, int, int]

    def __post_init__(self):
        object.__setattr__(self, "window", tuple(int(a) for a in self.window))
        if len(self.window) != 3 or len(set(self.window)) != 3:
            raise PlacementError(f"window must be 3 distinct wires, got {self.window}")
        if min(self.window) < 1:
            raise PlacementError(f"wires are numbered from 1, got {self.window}")

    def check(self, n: int):
        if max(self.window) > n:
            raise PlacementError(f"window {self.window} out of range for n={n}")

    def inverse(self) -> "PlacedGate":
        return PlacedGate(self.gate.inverse(), self.window)

    def apply_values(self, values: np.ndarray) -> np.ndarray:
        """Apply to an array of string values (any shape)."""
        values = np.asarray(values, dtype=np.int64)
        w0, w1, w2 = (a - 1 for a in self.window)
        pattern = (((values >> w0) & 1) << 2) | (((values >> w1) & 1) << 1) | ((values >> w2) & 1)
        image = np.asarray(self.gate.table, dtype=np.int64)[pattern]
        clear = ~((1 << w0) | (1 << w1) | (1 << w2))
        return (values & clear) | (((image >> 2) & 1) << w0) | (((image >> 1) & 1) << w1) \
            | ((image & 1) << w2)


def apply_gate(pg: PlacedGate, x) -> BitString:
    x = _as_bitstring(x)
    pg.check(x.n)
    return BitString.from_int(int(pg.apply_values(np.int64(x.value))), x.n)


@dataclass(frozen=True, eq=False)
class Circuit:
    """Gates applied first to last. ``layers`` holds the gate count of each layer."""

    n: int
    gates: tuple[PlacedGate, ...] = ()
    gate_set: str = "s8"
    layers: tuple[int, ...] = ()
    seed: str = ""
    arch: str = ""

    def __post_init__(self):
        object.__setattr__(self, "gates", tuple(self.gates))
        object.__setattr__(self, "layers", tuple(int(c) for c in self.layers))
        if self.n < 1:
            raise DimensionError("a circuit needs n >= 1")
        for pg in self.gates:
            pg.check(self.n)
        if self.layers and sum(self.layers) != len(self.gates):
            raise ValueError("layer counts do not add up to the gate count")

    def __eq__(self, other):
        if not isinstance(other, Circuit):
            return NotImplemented
        return self.n == other.n and self.gates == other.gates

    def __hash__(self):
        return hash((self.n, self.gates))

    def __len__(self):
        return len(self.gates)

    @property
    def depth(self) -> int:
        return len(self.layers) if self.layers else len(self.gates)

    def permutation(self) -> np.ndarray:
        """The computed permutation of {0,1}^n as an array over string values."""
        values = np.arange(1 << self.n, dtype=np.int64)
        for pg in self.gates:
            values = pg.apply_values(values)
        return values

    def to_dict(self) -> dict:
        gates = []
        for pg in self.gates:
            if isinstance(pg.gate, DES2Gate):
                gates.append({"window": list(pg.window), "f": list(pg.gate.f_table),
                              "target": pg.gate.target})
            else:
                gates.append({"window": list(pg.window), "perm": list(pg.gate.table)})
        return {"version": 1, "n": self.n, "gate_set": self.gate_set, "gates": gates,
                "layers": list(self.layers), "seed": self.seed}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), separators=(",", ":"))

    @classmethod
    def from_dict(cls, d: dict) -> "Circuit":
        if d.get("version") != 1:
            raise ValueError(f"unsupported circuit version {d.get('version')!r}")
        if d["gate_set"] not in GATE_SETS:
            raise ValueError(f"unknown gate set {d['gate_set']!r}")
        gates = []
        for g in d["gates"]:
            if "perm" in g:
                gate: Gate = Gate3(tuple(g["perm"]))
            else:
                gate = DES2Gate(tuple(g["f"]), int(g["target"]))
            gates.append(PlacedGate(gate, tuple(g["window"])))
        return cls(n=int(d["n"]), gates=tuple(gates), gate_set=d["gate_set"],
                   layers=tuple(d.get("layers", ())), seed=str(d.get("seed", "")))

    @classmethod
    def from_json(cls, text: str) -> "Circuit":
        return cls.from_dict(json.loads(text))


def circuit_apply(c: Circuit, x) -> BitString:
    x = _as_bitstring(x)
    if x.n != c.n:
        raise DimensionError(f"input has {x.n} bits, circuit has {c.n} wires")
    v = np.int64(x.value)
    for pg in c.gates:
        v = pg.apply_values(v)
    return BitString.from_int(int(v), c.n)


def circuit_invert(c: Circuit) -> Circuit:
    return Circuit(n=c.n, gates=tuple(pg.inverse() for pg in reversed(c.gates)),
                   gate_set=c.gate_set, layers=tuple(reversed(c.layers)), seed=c.seed,
                   arch=c.arch)


@lru_cache(maxsize=None)
def _enumerate(kind: str) -> tuple:
    if kind == "s8":
        return tuple(Gate3(p) for p in itertools.permutations(range(8)))
    if kind == "des2":
        return tuple(DES2Gate(tuple((f >> (3 - b)) & 1 for b in range(4)), target)
                     for target in (1, 2, 3) for f in range(16))
    raise ValueError(f"unknown gate set {kind!r}; expected one of {GATE_SETS}")


def enumerate_gate_set(kind: str) -> tuple[list[Gate], np.ndarray]:
    """All gates of a set with their (uniform) weights.

    DES2 lists the 48 ``(f, target)`` pairs, keeping gates that induce the
    same permutation (for example ``f = 0`` for each target) separately.
    """
    gates = list(_enumerate(kind))
    return gates, np.full(len(gates), 1.0 / len(gates))


def sample_gate(kind: str, rng: np.random.Generator) -> Gate:
    if kind == "s8":
        return Gate3(tuple(int(v) for v in rng.permutation(8)))
    if kind == "des2":
        return _enumerate("des2")[int(rng.integers(48))]
    raise ValueError(f"unknown gate set {kind!r}; expected one of {GATE_SETS}")


def gate_tables(gates: Sequence[Gate]) -> np.ndarray:
    return np.array([g.table for g in gates], dtype=np.int64)


def generated_group_size(tables: Sequence[Sequence[int]], limit: int = 40320) -> int:
    """Size of the subgroup of S_8 generated by ``tables``, by breadth-first closure."""
    gens = [tuple(t) for t in tables]
    start = tuple(range(8))
    seen = {start}
    frontier = [start]
    while frontier:
        nxt = []
        for p in frontier:
            for g in gens:
                q = tuple(g[v] for v in p)
                if q not in seen:
                    seen.add(q)
                    nxt.append(q)
        frontier = nxt
        if len(seen) > limit:
            break
    return len(seen)
