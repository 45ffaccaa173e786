"""Configuration primitives: spins, particles, windows, edge sets and a cell index."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

SPIN_KINDS = ("unit", "discrete", "scalar", "direction")


class ConfigurationError(ValueError):
    """Raised when a configuration violates one of its invariants."""


@dataclass(frozen=True)
class SpinKind:
    """Law of the spin marks. Discrete labels are 1..q, uniform; scalar is uniform on [lo, hi]."""

    kind: str = "unit"
    q: int = 0
    lo: float = 0.0
    hi: float = 1.0

    def __post_init__(self):
        if self.kind not in SPIN_KINDS:
            raise ValueError(f"unknown spin kind {self.kind!r}")
        if self.kind == "discrete" and self.q < 1:
            raise ValueError("discrete spin kind needs q >= 1")
        if self.kind == "scalar" and not self.hi > self.lo:
            raise ValueError("scalar spin kind needs lo < hi")

    @property
    def code(self) -> int:
        return SPIN_KINDS.index(self.kind)

    def validate(self, values: np.ndarray) -> None:
        v = np.asarray(values, dtype=float)
        if v.size == 0:
            return
        if not np.all(np.isfinite(v)):
            raise ConfigurationError("non-finite spin value")
        if self.kind == "unit" and np.any(v != 0.0):
            raise ConfigurationError("unit spins must be 0")
        if self.kind == "discrete":
            if np.any(v != np.round(v)) or np.any(v < 1) or np.any(v > self.q):
                raise ConfigurationError(f"discrete labels must lie in 1..{self.q}")
        if self.kind == "scalar" and (np.any(v < self.lo) or np.any(v > self.hi)):
            raise ConfigurationError(f"scalar spin outside [{self.lo}, {self.hi}]")
        if self.kind == "direction" and (np.any(v < 0.0) or np.any(v >= math.pi)):
            raise ConfigurationError("direction angle outside [0, pi)")

    def from_uniform(self, u: np.ndarray) -> np.ndarray:
        """Map uniforms in [0,1) to spin values (same map as the compiled kernels)."""
        u = np.asarray(u, dtype=float)
        if self.kind == "unit":
            return np.zeros_like(u)
        if self.kind == "discrete":
            return np.minimum(np.floor(u * self.q), self.q - 1) + 1.0
        if self.kind == "scalar":
            return self.lo + u * (self.hi - self.lo)
        return u * math.pi

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return self.from_uniform(rng.random(size))

    def grid(self, points: int = 64) -> tuple[np.ndarray, np.ndarray]:
        """Quadrature nodes and probability weights for the spin law."""
        if self.kind == "unit":
            return np.zeros(1), np.ones(1)
        if self.kind == "discrete":
            return np.arange(1, self.q + 1, dtype=float), np.full(self.q, 1.0 / self.q)
        lo, hi = (self.lo, self.hi) if self.kind == "scalar" else (0.0, math.pi)
        nodes = lo + (np.arange(points) + 0.5) * (hi - lo) / points
        return nodes, np.full(points, 1.0 / points)

    def to_dict(self) -> dict:
        d = {"kind": self.kind}
        if self.kind == "discrete":
            d["q"] = self.q
        if self.kind == "scalar":
            d["lo"], d["hi"] = self.lo, self.hi
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SpinKind":
        return cls(d.get("kind", "unit"), int(d.get("q", 0)), float(d.get("lo", 0.0)), float(d.get("hi", 1.0)))


UNIT = SpinKind()


@dataclass(frozen=True)
class Spin:
    kind: str
    value: float = 0.0

    @classmethod
    def unit(cls) -> "Spin":
        return cls("unit", 0.0)

    @classmethod
    def discrete(cls, label: int) -> "Spin":
        return cls("discrete", float(int(label)))

    @classmethod
    def scalar(cls, value: float, lo: float, hi: float) -> "Spin":
        if not lo <= value <= hi:
            raise ConfigurationError(f"scalar spin {value} outside [{lo}, {hi}]")
        return cls("scalar", float(value))

    @classmethod
    def direction(cls, angle: float) -> "Spin":
        if not 0.0 <= angle < math.pi:
            raise ConfigurationError("direction angle outside [0, pi)")
        return cls("direction", float(angle))


@dataclass(frozen=True)
class Particle:
    id: int
    x: tuple[float, float]
    sigma: Spin = field(default_factory=Spin.unit)


@dataclass(frozen=True)
class Window:
    n: float

    def __post_init__(self):
        if not self.n > 0:
            raise ValueError("window half side must be positive")

    @property
    def area(self) -> float:
        return (2.0 * self.n) ** 2

    def contains(self, pos: np.ndarray) -> np.ndarray:
        """Closed-box membership by sup-norm."""
        pos = np.asarray(pos, dtype=float).reshape(-1, 2)
        return np.max(np.abs(pos), axis=1) <= self.n


def sup_norm(x) -> float:
    return max(abs(float(x[0])), abs(float(x[1])))


def sup_norms(pos: np.ndarray) -> np.ndarray:
    pos = np.asarray(pos, dtype=float).reshape(-1, 2)
    return np.maximum(np.abs(pos[:, 0]), np.abs(pos[:, 1]))


class EdgeSet:
    """Unordered id pairs stored as a sorted (E, 2) int array with a < b per row."""

    __slots__ = ("_pairs",)

    def __init__(self, pairs: Iterable = ()):
        arr = np.asarray(list(pairs) if not isinstance(pairs, np.ndarray) else pairs, dtype=np.int64)
        arr = arr.reshape(-1, 2)
        if np.any(arr[:, 0] == arr[:, 1]):
            raise ConfigurationError("edge set contains a self-loop")
        arr = np.sort(arr, axis=1)
        if len(arr):
            arr = arr[np.lexsort((arr[:, 1], arr[:, 0]))]
            if np.any(np.all(arr[1:] == arr[:-1], axis=1)):
                raise ConfigurationError("edge set contains a duplicate pair")
        arr.setflags(write=False)
        self._pairs = arr

    @property
    def pairs(self) -> np.ndarray:
        return self._pairs

    def __len__(self) -> int:
        return len(self._pairs)

    def __iter__(self) -> Iterator[tuple[int, int]]:
        return (tuple(int(v) for v in p) for p in self._pairs)

    def __contains__(self, pair) -> bool:
        a, b = sorted(int(v) for v in pair)
        return bool(np.any((self._pairs[:, 0] == a) & (self._pairs[:, 1] == b)))

    def __eq__(self, other) -> bool:
        return isinstance(other, EdgeSet) and np.array_equal(self._pairs, other._pairs)

    def __repr__(self) -> str:
        return f"EdgeSet({[tuple(p) for p in self._pairs.tolist()]})"


class MarkedConfiguration:
    """Interior particles in the window, a finite boundary outside it, and an edge set.

    Stored as parallel arrays (ids, pos, spin); rows with sup-norm <= n are interior.
    Instances are treated as immutable: arrays are flagged read-only.
    """

    def __init__(self, window: Window, ids, pos, spin=None, spin_kind: SpinKind = UNIT,
                 edges: EdgeSet | Iterable = (), check: bool = True):
        self.window = window if isinstance(window, Window) else Window(float(window))
        self.ids = np.asarray(ids, dtype=np.int64).reshape(-1)
        self.pos = np.asarray(pos, dtype=float).reshape(-1, 2)
        n = len(self.ids)
        self.spin = np.zeros(n) if spin is None else np.asarray(spin, dtype=float).reshape(-1)
        self.spin_kind = spin_kind
        self.edges = edges if isinstance(edges, EdgeSet) else EdgeSet(edges)
        for a in (self.ids, self.pos, self.spin):
            a.setflags(write=False)
        if check:
            self._check()
        self.interior = self.window.contains(self.pos)
        self.interior.setflags(write=False)
        self._id_index = None

    def _check(self):
        n = len(self.ids)
        if self.pos.shape != (n, 2) or self.spin.shape != (n,):
            raise ConfigurationError("ids, positions and spins have different lengths")
        if not np.all(np.isfinite(self.pos)):
            raise ConfigurationError("non-finite particle position")
        if len(np.unique(self.ids)) != n:
            raise ConfigurationError("particle ids are not unique")
        self.spin_kind.validate(self.spin)
        if len(self.edges):
            known = np.isin(self.edges.pairs, self.ids)
            if not np.all(known):
                raise ConfigurationError("edge endpoint references an unknown particle id")

    @classmethod
    def from_particles(cls, window, interior: Sequence[Particle], boundary: Sequence[Particle] = (),
                       edges=(), spin_kind: SpinKind = UNIT) -> "MarkedConfiguration":
        w = window if isinstance(window, Window) else Window(float(window))
        parts = list(interior) + list(boundary)
        inside = w.contains(np.array([p.x for p in parts], dtype=float).reshape(-1, 2))
        k = len(interior)
        if not np.all(inside[:k]) or np.any(inside[k:]):
            raise ConfigurationError("interior/boundary membership inconsistent with the window")
        return cls(w, [p.id for p in parts], [p.x for p in parts], [p.sigma.value for p in parts],
                   spin_kind, edges)

    @classmethod
    def empty(cls, window, spin_kind: SpinKind = UNIT) -> "MarkedConfiguration":
        return cls(window, [], np.zeros((0, 2)), [], spin_kind)

    def __len__(self) -> int:
        return len(self.ids)

    @property
    def n_interior(self) -> int:
        return int(self.interior.sum())

    def index_of(self, ids) -> np.ndarray:
        """Row indices for the given ids; raises on unknown ids."""
        if self._id_index is None:
            self._id_index = {int(v): i for i, v in enumerate(self.ids)}
        try:
            return np.array([self._id_index[int(v)] for v in np.atleast_1d(ids)], dtype=np.int64)
        except KeyError as exc:
            raise ConfigurationError(f"unknown particle id {exc.args[0]}") from None

    def particle(self, i: int) -> Particle:
        return Particle(int(self.ids[i]), (float(self.pos[i, 0]), float(self.pos[i, 1])),
                        Spin(self.spin_kind.kind, float(self.spin[i])))

    def particles(self, which: str = "all") -> list[Particle]:
        mask = {"all": np.ones(len(self), bool), "interior": self.interior, "boundary": ~self.interior}[which]
        return [self.particle(i) for i in np.flatnonzero(mask)]

    def with_positions(self, pos) -> "MarkedConfiguration":
        return MarkedConfiguration(self.window, self.ids, pos, self.spin, self.spin_kind, self.edges, check=False)

    def with_edges(self, edges) -> "MarkedConfiguration":
        return MarkedConfiguration(self.window, self.ids, self.pos, self.spin, self.spin_kind, edges)

    def edge_index_pairs(self) -> np.ndarray:
        """Edges as row-index pairs."""
        if not len(self.edges):
            return np.zeros((0, 2), dtype=np.int64)
        return self.index_of(self.edges.pairs.ravel()).reshape(-1, 2)

    def __eq__(self, other) -> bool:
        return (isinstance(other, MarkedConfiguration) and self.window == other.window
                and self.spin_kind == other.spin_kind and np.array_equal(self.ids, other.ids)
                and np.array_equal(self.pos, other.pos) and np.array_equal(self.spin, other.spin)
                and self.edges == other.edges)

    def __repr__(self) -> str:
        return (f"MarkedConfiguration(n={self.window.n}, interior={self.n_interior}, "
                f"boundary={len(self) - self.n_interior}, edges={len(self.edges)})")


def _spin_out(kind: SpinKind, v: float):
    return int(v) if kind.kind == "discrete" else float(v)


def config_to_dict(cfg: MarkedConfiguration) -> dict:
    def rows(mask):
        return [{"id": int(cfg.ids[i]), "x": [float(cfg.pos[i, 0]), float(cfg.pos[i, 1])],
                 "spin": _spin_out(cfg.spin_kind, cfg.spin[i])} for i in np.flatnonzero(mask)]

    return {
        "window_n": float(cfg.window.n),
        "spin_kind": cfg.spin_kind.to_dict(),
        "interior": rows(cfg.interior),
        "boundary": rows(~cfg.interior),
        "edges": cfg.edges.pairs.tolist(),
    }


def config_from_dict(d: dict) -> MarkedConfiguration:
    kind = SpinKind.from_dict(d.get("spin_kind", {"kind": "unit"}))
    rows = list(d.get("interior", [])) + list(d.get("boundary", []))
    window = Window(float(d["window_n"]))
    cfg = MarkedConfiguration(
        window,
        [r["id"] for r in rows],
        np.array([r["x"] for r in rows], dtype=float).reshape(-1, 2),
        [float(r.get("spin", 0.0)) for r in rows],
        kind,
        d.get("edges", []),
    )
    k = len(d.get("interior", []))
    if not np.all(cfg.interior[:k]) or np.any(cfg.interior[k:]):
        raise ConfigurationError("interior/boundary membership inconsistent with the window")
    return cfg


def dumps_config(cfg: MarkedConfiguration) -> str:
    # json uses repr() for floats, the shortest string that round-trips exactly
    return json.dumps(config_to_dict(cfg), separators=(",", ":"))


def loads_config(line: str) -> MarkedConfiguration:
    return config_from_dict(json.loads(line))


def write_jsonl(path, configs: Iterable[MarkedConfiguration]) -> int:
    count = 0
    with open(path, "w") as fh:
        for cfg in configs:
            fh.write(dumps_config(cfg) + "\n")
            count += 1
    return count


def read_jsonl(path) -> Iterator[MarkedConfiguration]:
    with open(path) as fh:
        for line in fh:
            if line.strip():
                yield loads_config(line)


class CellIndex:
    """Uniform grid over a point set with cell size >= the query range.

    Cells are stored CSR-style: points of cell c are order[start[c]:start[c+1]].
    """

    def __init__(self, pos: np.ndarray, cell_size: float, ids: np.ndarray | None = None):
        if not cell_size > 0:
            raise ValueError("cell size must be positive")
        self.pos = np.asarray(pos, dtype=float).reshape(-1, 2)
        self.ids = np.arange(len(self.pos)) if ids is None else np.asarray(ids)
        self.cell_size = float(cell_size)
        if len(self.pos):
            self.origin = self.pos.min(axis=0) - 1e-9 * (1.0 + np.abs(self.pos.min(axis=0)))
            span = self.pos.max(axis=0) - self.origin
            self.shape = tuple(int(v) for v in np.floor(span / self.cell_size).astype(np.int64) + 1)
        else:
            self.origin = np.zeros(2)
            self.shape = (1, 1)
        cx, cy = self._cell_xy(self.pos)
        cell = cx * self.shape[1] + cy
        self.order = np.argsort(cell, kind="stable").astype(np.int64)
        counts = np.bincount(cell, minlength=self.shape[0] * self.shape[1])
        self.start = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
        self.cell_of = cell

    def _cell_xy(self, pts):
        pts = np.asarray(pts, dtype=float).reshape(-1, 2)
        c = np.floor((pts - self.origin) / self.cell_size).astype(np.int64)
        c[:, 0] = np.clip(c[:, 0], 0, self.shape[0] - 1)
        c[:, 1] = np.clip(c[:, 1], 0, self.shape[1] - 1)
        return c[:, 0], c[:, 1]

    @property
    def cells(self) -> dict[tuple[int, int], list]:
        """Map from integer cell coordinates to the ids stored there."""
        out = {}
        for c in np.unique(self.cell_of):
            members = self.order[self.start[c]:self.start[c + 1]]
            out[(int(c // self.shape[1]), int(c % self.shape[1]))] = [self.ids[i].item() for i in members]
        return out

    def candidates(self, p) -> np.ndarray:
        """Row indices in the 3x3 block of cells around p (superset of the range ball)."""
        f = np.floor((np.asarray(p, dtype=float) - self.origin) / self.cell_size).astype(np.int64)
        out = []
        for i in range(f[0] - 1, f[0] + 2):
            if i < 0 or i >= self.shape[0]:
                continue
            for j in range(f[1] - 1, f[1] + 2):
                if j < 0 or j >= self.shape[1]:
                    continue
                c = i * self.shape[1] + j
                out.append(self.order[self.start[c]:self.start[c + 1]])
        return np.concatenate(out) if out else np.zeros(0, dtype=np.int64)

    def query(self, p, radius: float) -> np.ndarray:
        """Row indices within Euclidean distance <= radius of p (radius <= cell size)."""
        if radius > self.cell_size:
            raise ValueError("query radius exceeds the cell size")
        cand = self.candidates(p)
        d = self.pos[cand] - np.asarray(p, dtype=float)
        return np.sort(cand[(d * d).sum(axis=1) <= radius * radius])

    def neighbors_of(self, i: int, radius: float) -> np.ndarray:
        out = self.query(self.pos[i], radius)
        return out[out != i]


def build_cell_index(config: MarkedConfiguration, range_: float) -> CellIndex:
    if not range_ > 0:
        raise ValueError("range must be positive")
    return CellIndex(config.pos, range_, config.ids)


def components(n_nodes: int, pairs: np.ndarray) -> np.ndarray:
    """Connected-component label per node for an undirected graph on 0..n-1."""
    if n_nodes == 0:
        return np.zeros(0, dtype=np.int64)
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    g = coo_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(n_nodes, n_nodes))
    _, labels = connected_components(g, directed=False)
    return labels.astype(np.int64)


def b_cluster(config: MarkedConfiguration, edges: EdgeSet, seeds: Iterable[int]) -> set[int]:
    """Ids connected to any seed id by a path of edges."""
    seed_rows = config.index_of(list(seeds)) if seeds else np.zeros(0, np.int64)
    rows = config.index_of(edges.pairs.ravel()).reshape(-1, 2) if len(edges) else np.zeros((0, 2), np.int64)
    labels = components(len(config), rows)
    hit = np.isin(labels, labels[seed_rows])
    return set(int(v) for v in config.ids[hit])
