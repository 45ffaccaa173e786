"""The shift transformation: proposal, slow-downs, cluster recursion, inverse, goodness and densities."""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from . import kernels as _kernels
from .core import MarkedConfiguration, Particle, components, sup_norm, sup_norms
from .potential import PotentialModel, SmoothDecomposition


# ---------------------------------------------------------------- parameters

@dataclass(frozen=True)
class TransformParams:
    n: float
    c: float
    delta: float
    eps: float
    c_K: float
    direction: int = 1
    strict_mode: bool = False

    def __post_init__(self):
        if self.direction not in (1, -1):
            raise ValueError("direction must be +1 or -1")
        if not self.n > 1:
            raise ValueError("n must exceed 1 (the proposal uses log n)")
        if not self.c >= 0:
            raise ValueError("c must be nonnegative")
        if not self.delta > 0:
            raise ValueError("delta must be positive")
        if not self.eps > 0:
            raise ValueError("eps must be positive")
        if not self.c_K >= 0:
            raise ValueError("c_K must be nonnegative")
        if self.strict_mode:
            problems = []
            if not self.delta < 1e-6:
                problems.append("delta < 1e-6")
            if not self.delta * self.c_K < 1:
                problems.append("delta < 1/c_K")
            if not self.c <= self.delta ** 2:
                problems.append("c <= delta^2")
            if not self.n >= self.delta ** -8:
                problems.append("n >= delta^-8")
            if problems:
                raise ValueError("strict mode requires " + ", ".join(problems))
        else:
            if not self.delta <= 0.5:
                raise ValueError("relaxed mode requires delta <= 1/2")
            if self.proposal_slope > self.delta * (1 + 1e-12):
                raise ValueError(
                    f"relaxed mode requires the proposal slope 3c/(n^(2/3) sqrt(log n)) = "
                    f"{self.proposal_slope:.4g} to be at most delta")

    @property
    def plateau(self) -> float:
        return self.c * math.sqrt(math.log(self.n))

    @property
    def coef(self) -> float:
        return 3.0 * self.c / math.sqrt(math.log(self.n))

    @property
    def n23(self) -> float:
        return self.n ** (2.0 / 3.0)

    @property
    def proposal_slope(self) -> float:
        return self.coef / self.n23

    def flipped(self) -> "TransformParams":
        return TransformParams(self.n, self.c, self.delta, self.eps, self.c_K, -self.direction, self.strict_mode)

    def with_direction(self, direction: int) -> "TransformParams":
        return self if direction == self.direction else self.flipped()

    @classmethod
    def from_decomposition(cls, n, c, delta, decomp: SmoothDecomposition, direction=1, strict_mode=False):
        return cls(float(n), float(c), float(delta), decomp.eps, decomp.c_K, direction, strict_mode)

    def to_dict(self) -> dict:
        return {"n": self.n, "c": self.c, "delta": self.delta, "eps": self.eps, "c_K": self.c_K,
                "direction": self.direction, "strict_mode": self.strict_mode}


def shift_proposal(s: float, n: float, c: float) -> float:
    """(3c/sqrt(log n)) log(n / max(n^(2/3), min(s, n))), returned exactly as c sqrt(log n) on the plateau."""
    if s < 0:
        raise ValueError("s must be nonnegative")
    if not n > 1:
        raise ValueError("n must exceed 1")
    plateau = c * math.sqrt(math.log(n))
    coef = 3.0 * c / math.sqrt(math.log(n))
    return _kernels.python_kernels.shift_value(float(s), float(n), plateau, coef, n ** (2.0 / 3.0))


def _shift_vec(s, p: TransformParams):
    # libm log, as in the kernels: numpy's vectorised log can differ in the last bit
    s = np.asarray(s, dtype=float)
    out = np.where(s <= p.n23, p.plateau, 0.0)
    mid = (s > p.n23) & (s < p.n)
    if np.any(mid):
        out[mid] = [p.coef * math.log(p.n / v) for v in s[mid].tolist()]
    return out


def _shift_deriv(s, p: TransformParams):
    s = np.asarray(s, dtype=float)
    with np.errstate(divide="ignore"):
        d = -p.coef / s
    return np.where((s > p.n23) & (s < p.n), d, 0.0)


def slowdown(y: Particle, tau: float, y2: Particle, params: TransformParams, decomp: SmoothDecomposition) -> float:
    """Slow-down function of particle y at level tau, evaluated at y2."""
    if tau < 0:
        raise ValueError("tau must be nonnegative")
    h = abs(shift_proposal(max(0.0, sup_norm(y.x) - params.c_K), params.n, params.c) - tau)
    if h > params.delta * params.eps:
        return float(tau)
    d = float(decomp.dK(y.x[0], y.x[1], y.sigma.value, y2.x[0], y2.x[1], y2.sigma.value))
    if d < params.eps:
        return tau + (h / params.eps) * d
    return math.inf


# ---------------------------------------------------------------- result

PIECE_NAMES = {-1: "none", 0: "t0", 1: "slowdown", 2: "floor"}


@dataclass
class TransformResult:
    """Transcript of one run of the recursion; arrays are indexed by configuration row."""

    ids: np.ndarray
    cluster_of: np.ndarray
    taus: np.ndarray
    m: int
    m_star: int
    in_p: np.ndarray
    piece: np.ndarray
    src: np.ndarray
    deriv: np.ndarray
    params: TransformParams
    implementation: str = ""
    h_values: np.ndarray = field(default=None, repr=False)

    @property
    def shift(self) -> np.ndarray:
        return self.taus[self.cluster_of] if len(self.cluster_of) else np.zeros(0)

    @property
    def shift_of(self) -> dict[int, float]:
        return {int(i): float(t) for i, t in zip(self.ids, self.shift)}

    @property
    def clusters(self) -> list[tuple[set[int], float]]:
        return [(set(int(v) for v in self.ids[self.cluster_of == k]), float(self.taus[k]))
                for k in range(len(self.taus))]

    @property
    def profile_transcript(self) -> list[dict]:
        out = []
        for i in np.flatnonzero(self.in_p):
            out.append({"id": int(self.ids[i]), "step": int(self.cluster_of[i]),
                        "piece": PIECE_NAMES[int(self.piece[i])],
                        "source": int(self.ids[self.src[i]]) if self.src[i] >= 0 else None,
                        "derivative": float(self.deriv[i])})
        return out

    def factors(self, direction: int) -> np.ndarray:
        """|1 + direction * d/dx1 t_k(y)| for the selected points y, 1 elsewhere."""
        f = np.abs(1.0 + direction * self.deriv)
        return np.where(self.in_p.astype(bool), f, 1.0)

    @property
    def jacobian_factors(self) -> dict[int, float]:
        f = self.factors(self.params.direction)
        return {int(self.ids[i]): float(f[i]) for i in np.flatnonzero(self.in_p)}

    @property
    def theta(self) -> float:
        return float(np.prod(self.factors(self.params.direction)))

    def theta_for(self, direction: int) -> float:
        return float(np.prod(self.factors(direction)))

    def log_theta_for(self, direction: int) -> float:
        return float(np.sum(np.log(self.factors(direction))))

    def to_dict(self) -> dict:
        return {
            "clusters": [sorted(c) for c, _ in self.clusters],
            "taus": self.taus.tolist(),
            "m": self.m,
            "m_star": self.m_star,
            "theta": self.theta,
        }


# ---------------------------------------------------------------- helpers shared by build and invert

def _component_csr(cfg: MarkedConfiguration):
    comp = components(len(cfg), cfg.edge_index_pairs())
    order = np.argsort(comp, kind="stable").astype(np.int64)
    start = np.concatenate([[0], np.cumsum(np.bincount(comp, minlength=comp.max() + 1 if len(comp) else 0))])
    return comp.astype(np.int64), start.astype(np.int64), order


def _cell_csr(pos: np.ndarray, cs: float):
    cs = float(cs) if cs > 0 else 1.0
    lo = pos.min(axis=0) - 1e-9 * (1.0 + np.abs(pos.min(axis=0)))
    span = pos.max(axis=0) - lo
    ncx, ncy = (int(v) for v in np.floor(span / cs).astype(np.int64) + 1)
    cx = np.clip(np.floor((pos[:, 0] - lo[0]) / cs).astype(np.int64), 0, ncx - 1)
    cy = np.clip(np.floor((pos[:, 1] - lo[1]) / cs).astype(np.int64), 0, ncy - 1)
    cell = cx * ncy + cy
    items = np.argsort(cell, kind="stable").astype(np.int64)
    start = np.concatenate([[0], np.cumsum(np.bincount(cell, minlength=ncx * ncy))]).astype(np.int64)
    return float(lo[0]), float(lo[1]), cs, ncx, ncy, start, items


def _reach(decomp: SmoothDecomposition, params: TransformParams) -> float:
    """Largest centre distance of a pair in K_eps."""
    return decomp.c_K - decomp.eps + params.eps


def _kernel_inputs(cfg: MarkedConfiguration, decomp: SmoothDecomposition):
    geom = decomp.geometry()
    labels = np.ascontiguousarray(decomp.model.labels(cfg.spin), dtype=np.int64)
    return geom, labels


def _h_values(pos, taus_of_rows, params: TransformParams) -> np.ndarray:
    s = np.maximum(sup_norms(pos) - params.c_K, 0.0)
    return np.abs(_shift_vec(s, params) - taus_of_rows)


# ---------------------------------------------------------------- build

def build_transform(config: MarkedConfiguration, params: TransformParams, decomp: SmoothDecomposition,
                    kernel: str | None = None) -> TransformResult:
    """Run the cluster recursion on the configuration (positions, spins and B-edges)."""
    N = len(config)
    if N == 0:
        e = np.zeros(0, dtype=np.int64)
        return TransformResult(config.ids, e, np.zeros(1), 0, 0, np.zeros(0, np.uint8), np.zeros(0, np.int8), e,
                               np.zeros(0), params, _kernels.get(kernel).IMPLEMENTATION, np.zeros(0))
    k = _kernels.get(kernel)
    comp, cstart, citems = _component_csr(config)
    geom, labels = _kernel_inputs(config, decomp)
    pos = np.ascontiguousarray(config.pos)
    cells = _cell_csr(pos, _reach(decomp, params))
    boundary = np.ascontiguousarray(~config.interior, dtype=np.uint8)
    cluster_of, taus, in_p, piece, src, m_star = k.forward_recursion(
        np.ascontiguousarray(pos[:, 0]), np.ascontiguousarray(pos[:, 1]), np.ascontiguousarray(config.spin),
        labels, boundary, comp, cstart, citems,
        geom["kind"], geom["table"], geom["additive"], geom["rod_half"],
        params.n, params.plateau, params.coef, params.n23, params.delta, params.eps, params.c_K,
        *cells)
    h = _h_values(pos, taus[cluster_of], params)
    deriv = _derivatives(config, params, decomp, cluster_of, taus, in_p, piece, src, h)
    return TransformResult(config.ids, cluster_of, taus, len(taus) - 1, int(m_star), in_p, piece, src, deriv,
                           params, k.IMPLEMENTATION, h)


def _derivatives(cfg, params, decomp, cluster_of, taus, in_p, piece, src, h):
    """e1-derivative of the active piece of t_k at each selected point."""
    d = np.zeros(len(cfg))
    pos = cfg.pos
    sel0 = (piece == 0) & in_p.astype(bool)
    if np.any(sel0):
        x1, x2 = pos[sel0, 0], pos[sel0, 1]
        s = np.maximum(np.abs(x1), np.abs(x2))
        d[sel0] = _shift_deriv(s, params) * np.sign(x1) * (np.abs(x1) > np.abs(x2))
    sel1 = (piece == 1) & in_p.astype(bool)
    if np.any(sel1):
        j = np.flatnonzero(sel1)
        a = src[j]
        g = decomp.dK_grad_x(pos[a, 0], pos[a, 1], cfg.spin[a], pos[j, 0], pos[j, 1], cfg.spin[j])
        d[j] = (h[a] / params.eps) * g
    return d


def apply_transform(config: MarkedConfiguration, result: TransformResult, direction: int | None = None
                    ) -> MarkedConfiguration:
    direction = result.params.direction if direction is None else direction
    if not np.array_equal(config.ids, result.ids):
        raise ValueError("transform result was built for a different configuration")
    pos = np.array(config.pos, dtype=float)
    pos[:, 0] = pos[:, 0] + direction * result.shift
    return config.with_positions(pos)


def transform(config, params, decomp, kernel=None):
    """Build and apply in one go; returns (image, result)."""
    res = build_transform(config, params, decomp, kernel)
    return apply_transform(config, res, params.direction), res


# ---------------------------------------------------------------- inverse

def invert_transform(image: MarkedConfiguration, params: TransformParams, decomp: SmoothDecomposition,
                     kernel: str | None = None, return_taus: bool = False):
    """Preimage of an image configuration under the transformation with params.direction."""
    N = len(image)
    if N == 0:
        return (image, np.zeros(1)) if return_taus else image
    k = _kernels.get(kernel)
    comp, cstart, citems = _component_csr(image)
    geom, labels = _kernel_inputs(image, decomp)
    pos = np.ascontiguousarray(image.pos)
    cells = _cell_csr(pos, _reach(decomp, params) + params.plateau)
    boundary = np.ascontiguousarray(~image.interior, dtype=np.uint8)
    cluster_of, taus = k.inverse_recursion(
        np.ascontiguousarray(pos[:, 0]), np.ascontiguousarray(pos[:, 1]), np.ascontiguousarray(image.spin),
        labels, boundary, comp, cstart, citems,
        geom["kind"], geom["table"], geom["additive"], geom["rod_half"],
        params.n, params.plateau, params.coef, params.n23, params.delta, params.eps, params.c_K,
        float(params.direction), *cells)
    out = np.array(pos)
    out[:, 0] = out[:, 0] - params.direction * taus[cluster_of]
    pre = image.with_positions(out)
    return (pre, taus) if return_taus else pre


# ---------------------------------------------------------------- goodness

@dataclass(frozen=True)
class GoodnessVerdict:
    good: bool
    witness: tuple | None = None  # (y id, y' id, path of ids from y to y')

    def to_dict(self) -> dict:
        if self.good:
            return {"good": True}
        y, y2, path = self.witness
        return {"good": False, "witness": [y, y2], "path": list(path)}


def k_eps_pairs(config: MarkedConfiguration, decomp: SmoothDecomposition, eps: float) -> np.ndarray:
    """Row pairs (i < j) with d_K < eps."""
    if len(config) < 2 or decomp.empty_core:
        return np.zeros((0, 2), dtype=np.int64)
    reach = decomp.c_K - decomp.eps + eps
    pairs = cKDTree(config.pos).query_pairs(reach, output_type="ndarray")
    if len(pairs) == 0:
        return np.zeros((0, 2), dtype=np.int64)
    i, j = pairs[:, 0], pairs[:, 1]
    p, s = config.pos, config.spin
    d = decomp.dK(p[i, 0], p[i, 1], s[i], p[j, 0], p[j, 1], s[j])
    return pairs[d < eps].astype(np.int64)


def k_core_pairs(config: MarkedConfiguration, decomp: SmoothDecomposition) -> np.ndarray:
    """Row pairs in the open enlarged core K."""
    if len(config) < 2 or decomp.empty_core:
        return np.zeros((0, 2), dtype=np.int64)
    pairs = cKDTree(config.pos).query_pairs(decomp.c_K - decomp.eps + 1e-12, output_type="ndarray")
    if len(pairs) == 0:
        return np.zeros((0, 2), dtype=np.int64)
    i, j = pairs[:, 0], pairs[:, 1]
    p, s = config.pos, config.spin
    return pairs[decomp.K_core(p[i, 0], p[i, 1], s[i], p[j, 0], p[j, 1], s[j])].astype(np.int64)


def _good_bound(s):
    s = np.asarray(s, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        sl = np.where(s > 0, s * np.log(s), 0.0)
    return np.maximum(1.0, sl)


def is_good(config: MarkedConfiguration, params: TransformParams, decomp: SmoothDecomposition) -> GoodnessVerdict:
    N = len(config)
    if N == 0:
        return GoodnessVerdict(True)
    plus = np.concatenate([config.edge_index_pairs(), k_eps_pairs(config, decomp, params.eps)])
    comp = components(N, plus)
    s = sup_norms(config.pos)
    bound = _good_bound(s) / params.delta
    # per component: the smallest bound must dominate the largest sup-norm
    ncomp = comp.max() + 1
    smax = np.full(ncomp, -np.inf)
    np.maximum.at(smax, comp, s)
    bmin = np.full(ncomp, np.inf)
    np.minimum.at(bmin, comp, bound)
    bad = np.flatnonzero(smax > bmin)
    if len(bad) == 0:
        return GoodnessVerdict(True)
    c = bad[0]
    rows = np.flatnonzero(comp == c)
    y = rows[np.argmin(bound[rows])]
    y2 = rows[np.argmax(s[rows])]
    path = _bfs_path(N, plus, y, y2)
    ids = config.ids
    return GoodnessVerdict(False, (int(ids[y]), int(ids[y2]), tuple(int(ids[v]) for v in path)))


def _bfs_path(N, pairs, a, b):
    adj = [[] for _ in range(N)]
    for i, j in pairs:
        adj[int(i)].append(int(j))
        adj[int(j)].append(int(i))
    prev = {int(a): None}
    q = deque([int(a)])
    while q:
        v = q.popleft()
        if v == b:
            break
        for w in adj[v]:
            if w not in prev:
                prev[w] = v
                q.append(w)
    path, v = [], int(b)
    while v is not None:
        path.append(v)
        v = prev[v]
    return path[::-1]


# ---------------------------------------------------------------- densities and diagnostics

def _interaction_pairs(config, new_positions, shift, decomp: SmoothDecomposition):
    """Row pairs with at least one interior particle whose shifts differ and whose Ubar may change."""
    N = len(config)
    if N < 2 or (decomp.ubar_zero and decomp.empty_core):
        return np.zeros((0, 2), dtype=np.int64)
    if decomp.ubar_zero:
        # Ubar vanishes off K, so only pairs that end up in K can contribute
        reach = decomp.c_K - decomp.eps + 1e-9
        sets = [cKDTree(p).query_pairs(reach, output_type="ndarray") for p in new_positions]
        pairs = np.unique(np.concatenate(sets), axis=0) if sets else np.zeros((0, 2), np.int64)
    else:
        i, j = np.triu_indices(N, 1)
        pairs = np.stack([i, j], axis=1)
    if len(pairs) == 0:
        return np.zeros((0, 2), dtype=np.int64)
    i, j = pairs[:, 0], pairs[:, 1]
    keep = (shift[i] != shift[j]) & (config.interior[i] | config.interior[j])
    return pairs[keep].astype(np.int64)


def _ubar_pairs(decomp, pos, spin, pairs):
    i, j = pairs[:, 0], pairs[:, 1]
    return decomp.ubar(pos[i, 0], pos[i, 1], spin[i], pos[j, 0], pos[j, 1], spin[j])


def ubar_energy_change(config, result: TransformResult, decomp, direction: int) -> float:
    """H^Ubar(T Y) - H^Ubar(Y) over the pairs whose relative position changes."""
    new = config.pos.copy()
    new[:, 0] += direction * result.shift
    pairs = _interaction_pairs(config, [new], result.shift, decomp)
    if len(pairs) == 0:
        return 0.0
    after = _ubar_pairs(decomp, new, config.spin, pairs)
    if np.any(np.isinf(after)):
        return math.inf
    before = _ubar_pairs(decomp, config.pos, config.spin, pairs)
    return float(np.sum(after - before))


def jacobian_density(config: MarkedConfiguration, result: TransformResult, params: TransformParams,
                     decomp: SmoothDecomposition, model: PotentialModel | None = None, beta: float = 1.0
                     ) -> tuple[float, float]:
    """(theta, phi) for the transformation in params.direction."""
    theta = result.theta_for(params.direction)
    dh = ubar_energy_change(config, result, decomp, params.direction)
    phi = 0.0 if math.isinf(dh) else math.exp(-beta * dh) * theta
    return theta, phi


def diagnostics(config: MarkedConfiguration, params: TransformParams, decomp: SmoothDecomposition,
                model: PotentialModel | None = None, result: TransformResult | None = None,
                kernel: str | None = None) -> tuple[float, float]:
    """(S1, S2): second-order energy and log-Jacobian defects of the paired transformations."""
    res = build_transform(config, params, decomp, kernel) if result is None else result
    plus = config.pos.copy()
    plus[:, 0] += res.shift
    minus = config.pos.copy()
    minus[:, 0] -= res.shift
    pairs = _interaction_pairs(config, [plus, minus], res.shift, decomp)
    s1 = 0.0
    if len(pairs):
        a = _ubar_pairs(decomp, plus, config.spin, pairs)
        b = _ubar_pairs(decomp, minus, config.spin, pairs)
        if np.any(np.isinf(a)) or np.any(np.isinf(b)):
            s1 = math.inf
        else:
            c0 = _ubar_pairs(decomp, config.pos, config.spin, pairs)
            s1 = abs(float(np.sum(a + b - 2 * c0)))
    s2 = abs(res.log_theta_for(1) + res.log_theta_for(-1))
    return s1, s2


# ---------------------------------------------------------------- profile evaluation at arbitrary points

def profile_at(config: MarkedConfiguration, result: TransformResult, decomp: SmoothDecomposition, k: int,
               points, spins=None) -> tuple[np.ndarray, np.ndarray]:
    """Value and e1-derivative of t_k at arbitrary points, from clusters 0..k-1 by direct scan.

    Ties in the minimum go to t0, then to the lowest cluster index, then the lowest row.
    """
    p = result.params
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    sp = np.zeros(len(pts)) if spins is None else np.broadcast_to(np.asarray(spins, dtype=float), (len(pts),))
    x1, x2 = pts[:, 0], pts[:, 1]
    s = np.maximum(np.abs(x1), np.abs(x2))
    val = _shift_vec(s, p)
    der = _shift_deriv(s, p) * np.sign(x1) * (np.abs(x1) > np.abs(x2))
    prev = np.flatnonzero(result.cluster_of < k)
    prev = prev[np.lexsort((prev, result.cluster_of[prev]))]
    hb = p.delta * p.eps
    for a in prev:
        tau = result.taus[result.cluster_of[a]]
        h = result.h_values[a]
        if h > hb:
            better = tau < val
            val = np.where(better, tau, val)
            der = np.where(better, 0.0, der)
            continue
        d = decomp.dK(config.pos[a, 0], config.pos[a, 1], config.spin[a], x1, x2, sp)
        m = np.where(d < p.eps, tau + (h / p.eps) * d, np.inf)
        better = m < val
        if np.any(better):
            g = decomp.dK_grad_x(config.pos[a, 0], config.pos[a, 1], config.spin[a], x1, x2, sp)
            val = np.where(better, m, val)
            der = np.where(better, (h / p.eps) * g, der)
    return val, der
