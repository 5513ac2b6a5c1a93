"""Circuit architectures: descriptors, window layouts and samplers.

Supported kinds are ``fullyrandom`` (gates on uniformly random 3-subsets),
``nn1d`` (gates on random nearest-neighbour triples), ``brickwork1d``
(staggered layers of nearest-neighbour gates), ``lattice2d`` (row and column
passes of a base circuit over a square grid) and ``latticed`` (the recursive
D-dimensional version of the same construction).
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import ArchitectureError, ParameterError
from .gates import GATE_SETS, Circuit, PlacedGate, sample_gate

KINDS = ("fullyrandom", "nn1d", "brickwork1d", "lattice2d", "latticed")
DEFAULT_LEVEL_ROUNDS = 2500


def derive_rng(seed: int, stream: int = 0) -> np.random.Generator:
    """Independent generator for stream ``stream`` of master seed ``seed``.

    Streams are split with ``SeedSequence(entropy=seed, spawn_key=(stream,))``
    so that distinct streams never share state.
    """
    return np.random.default_rng(np.random.SeedSequence(entropy=int(seed), spawn_key=(int(stream),)))


@dataclass(frozen=True)
class ArchDescriptor:
    """Parameters of a circuit distribution.

    For ``fullyrandom`` and ``nn1d`` the round count ``t`` is the number of
    gates. For ``brickwork1d`` it is the number of layers, one layer being
    both staggered passes. For the lattices it is the number of column passes
    (``t + 1`` slab passes are interleaved with them); ``base`` describes the
    circuit run on each line of ``side`` wires. ``level_t`` optionally gives a
    separate round count for each level ``2..dims`` of ``latticed``.
    """

    kind: str
    n: int
    t: Optional[int] = None
    gate_set: str = "des2"
    side: Optional[int] = None
    dims: Optional[int] = None
    base: Optional["ArchDescriptor"] = None
    level_t: Optional[tuple[int, ...]] = None

    def __post_init__(self):
        if self.level_t is not None:
            object.__setattr__(self, "level_t", tuple(int(v) for v in self.level_t))
        self.validate()

    def validate(self):
        if self.kind not in KINDS:
            raise ArchitectureError(f"unknown architecture {self.kind!r}; expected one of {KINDS}")
        if self.gate_set not in GATE_SETS:
            raise ArchitectureError(f"unknown gate set {self.gate_set!r}")
        if self.t is not None and self.t < 0:
            raise ArchitectureError("round count t must be non-negative")
        if self.kind in ("fullyrandom", "nn1d", "brickwork1d"):
            if self.n < 3:
                raise ArchitectureError(f"{self.kind} needs n >= 3, got {self.n}")
            return
        if self.base is None:
            raise ArchitectureError(f"{self.kind} needs a base descriptor")
        if self.kind == "lattice2d":
            side = self.side if self.side is not None else math.isqrt(self.n)
            if side * side != self.n:
                raise ArchitectureError(f"lattice2d needs side^2 = n, got n={self.n}")
            dims = 2
        else:
            if self.dims is None or self.dims < 1:
                raise ArchitectureError("latticed needs dims >= 1")
            dims = self.dims
            side = self.side if self.side is not None else round(self.n ** (1.0 / dims))
            if side ** dims != self.n:
                raise ArchitectureError(f"latticed needs side^dims = n, got n={self.n}, dims={dims}")
            if self.level_t is not None and len(self.level_t) != dims - 1:
                raise ArchitectureError(f"level_t needs {dims - 1} entries")
        if self.side is not None and self.side != side:
            raise ArchitectureError("side does not match n")
        if self.base.n != side:
            raise ArchitectureError(f"base must act on side={side} wires, got n={self.base.n}")
        if self.base.kind in ("lattice2d", "latticed"):
            raise ArchitectureError("base must be a one-dimensional architecture")
        object.__setattr__(self, "side", side)
        if self.kind == "latticed":
            object.__setattr__(self, "dims", dims)

    @property
    def rounds(self) -> int:
        if self.t is not None:
            return self.t
        if self.kind == "latticed":
            return DEFAULT_LEVEL_ROUNDS
        raise ArchitectureError(f"{self.kind} needs a round count t")

    def rounds_at(self, level: int) -> int:
        """Round count used when building level ``level`` (2..dims) of a lattice."""
        if self.level_t is not None:
            return self.level_t[level - 2]
        return self.rounds

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "n": self.n, "t": self.t, "gate_set": self.gate_set}
        if self.side is not None:
            d["side"] = self.side
        if self.dims is not None:
            d["dims"] = self.dims
        if self.level_t is not None:
            d["level_t"] = list(self.level_t)
        if self.base is not None:
            d["base"] = self.base.to_dict()
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), separators=(",", ":"))

    @classmethod
    def from_dict(cls, d: dict) -> "ArchDescriptor":
        base = d.get("base")
        return cls(kind=d["kind"], n=int(d["n"]), t=d.get("t"), gate_set=d.get("gate_set", "des2"),
                   side=d.get("side"), dims=d.get("dims"),
                   base=cls.from_dict(base) if base else None,
                   level_t=tuple(d["level_t"]) if d.get("level_t") is not None else None)

    @classmethod
    def from_json(cls, text: str) -> "ArchDescriptor":
        return cls.from_dict(json.loads(text))


def brickwork_layer_windows(n: int) -> list[tuple[int, int, int]]:
    """Windows of one brickwork layer: starts ``a = 1 mod 3`` then ``a = 2 mod 3``, each ``a <= n - 2``.

    >>> brickwork_layer_windows(6)
    [(1, 2, 3), (4, 5, 6), (2, 3, 4)]
    """
    if n < 3:
        raise ArchitectureError(f"brickwork needs n >= 3, got {n}")
    first = [(a, a + 1, a + 2) for a in range(1, n - 1, 3)]
    second = [(a, a + 1, a + 2) for a in range(2, n - 1, 3)]
    return first + second


def nn_windows(n: int) -> list[tuple[int, int, int]]:
    if n < 3:
        raise ArchitectureError(f"nearest-neighbour gates need n >= 3, got {n}")
    return [(a, a + 1, a + 2) for a in range(1, n - 1)]


def all_windows(n: int) -> list[tuple[int, int, int]]:
    """All 3-subsets of ``[n]`` in ascending order."""
    if n < 3:
        raise ArchitectureError(f"gates need n >= 3, got {n}")
    return [(a, b, c) for a in range(1, n + 1) for b in range(a + 1, n + 1) for c in range(b + 1, n + 1)]


def lattice_blocks(side: int, level: int) -> list[tuple[int, ...]]:
    """Contiguous slabs of ``side^(level-1)`` positions, one per value of the top coordinate."""
    size = side ** (level - 1)
    return [tuple(range(i * size + 1, (i + 1) * size + 1)) for i in range(side)]


def lattice_fibers(side: int, level: int) -> list[tuple[int, ...]]:
    """Lines along the top coordinate: positions ``(i - 1) * side^(level-1) + tau`` for ``i = 1..side``."""
    size = side ** (level - 1)
    return [tuple(i * size + tau for i in range(side)) for tau in range(1, size + 1)]


def _sample_gates(desc: ArchDescriptor, rng, coords: Sequence[int]) -> list[list[PlacedGate]]:
    """Sample ``desc`` on the wires ``coords`` (the descriptor's local wire ``a`` is ``coords[a-1]``).

    Returns the gates grouped by layer.
    """
    def place(window):
        return PlacedGate(sample_gate(desc.gate_set, rng), tuple(coords[a - 1] for a in window))

    n = desc.n
    if desc.kind == "fullyrandom":
        out = []
        for _ in range(desc.rounds):
            window = tuple(int(a) + 1 for a in np.sort(rng.choice(n, size=3, replace=False)))
            out.append([place(window)])
        return out
    if desc.kind == "nn1d":
        out = []
        for _ in range(desc.rounds):
            a = int(rng.integers(1, n - 1))
            out.append([place((a, a + 1, a + 2))])
        return out
    if desc.kind == "brickwork1d":
        windows = brickwork_layer_windows(n)
        return [[place(w) for w in windows] for _ in range(desc.rounds)]
    levels = 2 if desc.kind == "lattice2d" else desc.dims
    return _sample_lattice(desc, rng, coords, levels)


def _sample_lattice(desc: ArchDescriptor, rng, coords: Sequence[int], level: int) -> list[list[PlacedGate]]:
    side = desc.side
    if level == 1:
        return [[g for layer in _sample_gates(desc.base, rng, coords) for g in layer]]

    def slab_pass():
        gates = []
        for block in lattice_blocks(side, level):
            sub = [coords[p - 1] for p in block]
            for layer in _sample_lattice(desc, rng, sub, level - 1):
                gates.extend(layer)
        return gates

    def column_pass():
        gates = []
        for fiber in lattice_fibers(side, level):
            sub = [coords[p - 1] for p in fiber]
            for layer in _sample_gates(desc.base, rng, sub):
                gates.extend(layer)
        return gates

    passes = [slab_pass()]
    for _ in range(desc.rounds_at(level)):
        passes.append(column_pass())
        passes.append(slab_pass())
    return passes


def sample_circuit(desc: ArchDescriptor, rng: np.random.Generator, seed: str = "") -> Circuit:
    """Draw one circuit from the distribution described by ``desc``.

    Layers in the result are: single gates for ``fullyrandom`` and ``nn1d``,
    brickwork layers for ``brickwork1d`` and slab or column passes for the
    lattices.
    """
    groups = _sample_gates(desc, rng, list(range(1, desc.n + 1)))
    gates = tuple(g for layer in groups for g in layer)
    return Circuit(n=desc.n, gates=gates, gate_set=desc.gate_set,
                   layers=tuple(len(layer) for layer in groups), seed=str(seed), arch=desc.kind)


@dataclass(frozen=True)
class CircuitStats:
    size: int
    depth: int
    wires: frozenset[int] = field(default_factory=frozenset)

    def to_dict(self) -> dict:
        return {"size": self.size, "depth": self.depth, "wires": sorted(self.wires)}


def circuit_stats(c: Circuit) -> CircuitStats:
    """Gate count, greedy depth and touched wires.

    Depth places each gate in the first layer after every earlier gate that
    shares one of its wires, so gates within a layer have disjoint windows.
    """
    level = {}
    depth = 0
    for pg in c.gates:
        d = 1 + max(level.get(a, 0) for a in pg.window)
        for a in pg.window:
            level[a] = d
        depth = max(depth, d)
    return CircuitStats(size=len(c.gates), depth=depth, wires=frozenset(level))


def recommend_rounds(k: int, epsilon: float, side: int) -> tuple[int, dict]:
    """Round count ``ceil(500 * (k log2 k + log2(1/epsilon) / side))`` and its terms."""
    if k < 1 or side < 1:
        raise ParameterError("k and side must be positive")
    if not 0 < epsilon < 1:
        raise ParameterError(f"epsilon must lie in (0, 1), got {epsilon}")
    k_term = k * math.log2(k)
    eps_term = math.log2(1.0 / epsilon) / side
    value = 500.0 * (k_term + eps_term)
    # absorb floating noise so exact integers do not round up
    t = math.ceil(value - 1e-9)
    return t, {"k_log2_k": k_term, "log2_inv_eps_over_side": eps_term, "constant": 500,
               "value": value}
