"""Poisson reference process, Hamiltonians, grand-canonical MCMC, edge process and small-box oracle."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree
from scipy.stats import poisson

from . import kernels as _kernels
from .core import EdgeSet, MarkedConfiguration, SpinKind, Window
from .potential import DerivedConstants, PotentialModel, SmoothDecomposition


def make_rng(seed) -> np.random.Generator:
    """Counter-based 64-bit generator (Philox)."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.Philox(seed))


def spawn_seeds(seed: int, count: int) -> list[np.random.SeedSequence]:
    return np.random.SeedSequence(seed).spawn(count)


# ---------------------------------------------------------------- parameters

@dataclass
class GibbsParams:
    model: PotentialModel
    beta: float
    z: float
    window: Window
    decomp: SmoothDecomposition | None = None
    constants: DerivedConstants | None = None
    xi: float | None = None
    boundary_pos: np.ndarray = field(default_factory=lambda: np.zeros((0, 2)))
    boundary_spin: np.ndarray = field(default_factory=lambda: np.zeros(0))
    boundary_ids: np.ndarray | None = None

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError("beta must be positive")
        if not self.z > 0:
            raise ValueError("z must be positive")
        if not isinstance(self.window, Window):
            self.window = Window(float(self.window))
        self.boundary_pos = np.asarray(self.boundary_pos, dtype=float).reshape(-1, 2)
        self.boundary_spin = np.asarray(self.boundary_spin, dtype=float).reshape(-1)
        if len(self.boundary_spin) != len(self.boundary_pos):
            raise ValueError("boundary positions and spins differ in length")
        if np.any(self.window.contains(self.boundary_pos)):
            raise ValueError("boundary particles must lie outside the window")
        if self.boundary_ids is None:
            self.boundary_ids = np.arange(len(self.boundary_pos), dtype=np.int64) + 10**9
        self.boundary_ids = np.asarray(self.boundary_ids, dtype=np.int64)
        if self.xi is None:
            self.xi = self.constants.xi if self.constants is not None else self.z

    @property
    def spin_kind(self) -> SpinKind:
        return self.model.spin_kind

    @classmethod
    def with_boundary(cls, model, beta, z, window, boundary, **kw) -> "GibbsParams":
        """boundary: a MarkedConfiguration (all of it is used) or a sequence of Particle."""
        if isinstance(boundary, MarkedConfiguration):
            pos, spin, ids = boundary.pos, boundary.spin, boundary.ids
        else:
            parts = list(boundary)
            pos = np.array([p.x for p in parts], dtype=float).reshape(-1, 2)
            spin = np.array([p.sigma.value for p in parts], dtype=float)
            ids = np.array([p.id for p in parts], dtype=np.int64)
        return cls(model, beta, z, window, boundary_pos=pos, boundary_spin=spin, boundary_ids=ids, **kw)


@dataclass(frozen=True)
class McmcSettings:
    steps: int
    burn_in: int = 0
    thin: int = 1
    seed: int = 0
    move_probs: tuple = (1 / 3, 1 / 3, 1 / 3)
    sigma: float | None = None
    batch: int = 1 << 16

    def __post_init__(self):
        if not (self.steps >= self.burn_in >= 0):
            raise ValueError("need steps >= burn_in >= 0")
        if self.thin < 1:
            raise ValueError("thin must be >= 1")
        p = self.move_probs
        if len(p) != 3 or min(p) < 0 or abs(sum(p) - 1.0) > 1e-12:
            raise ValueError("move probabilities must be three nonnegative numbers summing to 1")
        if self.batch < 1:
            raise ValueError("batch must be positive")

    def step_size(self, model: PotentialModel) -> float:
        return float(self.sigma) if self.sigma is not None else model.step_scale()


# ---------------------------------------------------------------- Poisson process

def sample_poisson(window: Window, spin_kind: SpinKind, intensity: float, seed, id_offset: int = 0
                   ) -> MarkedConfiguration:
    """Poisson process of the given intensity in the window with i.i.d. spins."""
    if not intensity > 0:
        raise ValueError("intensity must be positive")
    window = window if isinstance(window, Window) else Window(float(window))
    rng = make_rng(seed)
    k = int(rng.poisson(intensity * window.area))
    pos = rng.uniform(-window.n, window.n, size=(k, 2))
    spin = spin_kind.sample(rng, k)
    return MarkedConfiguration(window, np.arange(k) + id_offset, pos, spin, spin_kind)


# ---------------------------------------------------------------- energies

def _arrays(obj):
    if isinstance(obj, MarkedConfiguration):
        return obj.pos, obj.spin
    if isinstance(obj, tuple) and len(obj) == 2 and isinstance(obj[0], np.ndarray):
        return np.asarray(obj[0], dtype=float).reshape(-1, 2), np.asarray(obj[1], dtype=float).reshape(-1)
    parts = list(obj)
    pos = np.array([p.x for p in parts], dtype=float).reshape(-1, 2)
    spin = np.array([p.sigma.value for p in parts], dtype=float)
    return pos, spin


def _candidate_pairs(pos_a, pos_b, rng_):
    """Index pairs (i in a, j in b) possibly within interaction range."""
    if len(pos_a) == 0 or len(pos_b) == 0:
        return np.zeros(0, np.int64), np.zeros(0, np.int64)
    if math.isinf(rng_):
        i, j = np.meshgrid(np.arange(len(pos_a)), np.arange(len(pos_b)), indexing="ij")
        return i.ravel(), j.ravel()
    ta, tb = cKDTree(pos_a), cKDTree(pos_b)
    sm = ta.sparse_distance_matrix(tb, rng_ * (1 + 1e-12) + 1e-12, output_type="ndarray")
    return sm["i"].astype(np.int64), sm["j"].astype(np.int64)


def _pair_sum(model, pa, sa, pb, sb, i, j) -> float:
    if len(i) == 0:
        return 0.0
    v = model.pair(pa[i, 0], pa[i, 1], sa[i], pb[j, 0], pb[j, 1], sb[j])
    if np.any(np.isposinf(v)):
        return math.inf
    return float(np.sum(v))


def interaction_energy(model: PotentialModel, Y1, Y2) -> float:
    """Sum of U over cross pairs (y1, y2) with y1 in Y1, y2 in Y2."""
    p1, s1 = _arrays(Y1)
    p2, s2 = _arrays(Y2)
    i, j = _candidate_pairs(p1, p2, model.interaction_range)
    return _pair_sum(model, p1, s1, p2, s2, i, j)


def _self_energy(model, pos, spin) -> float:
    if len(pos) < 2:
        return 0.0
    r = model.interaction_range
    if math.isinf(r):
        i, j = np.triu_indices(len(pos), 1)
    else:
        pr = cKDTree(pos).query_pairs(r * (1 + 1e-12) + 1e-12, output_type="ndarray")
        i, j = (pr[:, 0], pr[:, 1]) if len(pr) else (np.zeros(0, np.int64), np.zeros(0, np.int64))
    return _pair_sum(model, pos, spin, pos, spin, i, j)


def hamiltonian(model: PotentialModel, config: MarkedConfiguration, window: Window | None = None) -> float:
    """H over interior-interior plus interior-boundary pairs; +inf on any hard-core overlap."""
    inside = config.interior if window is None else window.contains(config.pos)
    pi, si = config.pos[inside], config.spin[inside]
    pb, sb = config.pos[~inside], config.spin[~inside]
    return _self_energy(model, pi, si) + interaction_energy(model, (pi, si), (pb, sb))


def hamiltonian_arrays(model, pos, spin, bpos=None, bspin=None) -> float:
    e = _self_energy(model, pos, spin)
    if bpos is not None and len(bpos):
        e += interaction_energy(model, (pos, spin), (bpos, bspin))
    return e


def has_overlap(model: PotentialModel, config: MarkedConfiguration) -> bool:
    """True if any pair with an interior particle lies in the hard core."""
    pos, spin = config.pos, config.spin
    if len(pos) < 2:
        return False
    r = model.max_core
    pr = cKDTree(pos).query_pairs(r * (1 + 1e-12) + 1e-12, output_type="ndarray")
    if len(pr) == 0:
        return False
    i, j = pr[:, 0], pr[:, 1]
    keep = config.interior[i] | config.interior[j]
    i, j = i[keep], j[keep]
    return bool(np.any(model.core(pos[i, 0], pos[i, 1], spin[i], pos[j, 0], pos[j, 1], spin[j])))


# ---------------------------------------------------------------- Metropolis-Hastings

def birth_ratio(dH: float, n: int, z: float, area: float, beta: float) -> float:
    """MH ratio for adding one particle to n existing ones; min(1, .) is the acceptance."""
    if math.isinf(dH) and dH > 0:
        return 0.0
    return z * area * math.exp(-beta * dH) / (n + 1)


def death_ratio(dH: float, n: int, z: float, area: float, beta: float) -> float:
    """MH ratio for removing one of n particles; dH is the energy change of the removal."""
    return n / (z * area) * math.exp(-beta * dH)


def translate_ratio(dH: float, beta: float) -> float:
    if math.isinf(dH) and dH > 0:
        return 0.0
    return math.exp(-beta * dH)


def _core_geometry(model: PotentialModel):
    if not model.radial:
        return 1, np.zeros((1, 1)), False, float(model.r), 2.0 * model.r
    table, additive = model.core_table()
    table = np.ascontiguousarray(table, dtype=float)
    reach = float(model.max_core)
    return 0, table, bool(additive), 0.0, reach


class _Chain:
    """Mutable chain state with capacity-doubling particle arrays."""

    def __init__(self, params: GibbsParams, settings: McmcSettings, init: MarkedConfiguration | None):
        self.p = params
        self.s = settings
        self.rng = make_rng(settings.seed)
        n0 = 0 if init is None else int(init.interior.sum())
        cap = max(64, 2 * n0)
        self.px, self.py, self.ps = np.zeros(cap), np.zeros(cap), np.zeros(cap)
        if n0:
            self.px[:n0] = init.pos[init.interior, 0]
            self.py[:n0] = init.pos[init.interior, 1]
            self.ps[:n0] = init.spin[init.interior]
        self.n = n0
        self.counts = np.zeros(6, dtype=np.int64)
        self.next_id = 0
        self.sigma = settings.step_size(params.model)
        k = params.spin_kind
        self.code, self.q, self.lo, self.hi = k.code, k.q, k.lo, k.hi
        self.use_kernel = params.model.pure_hard_core

    def _grow(self):
        cap = 2 * len(self.px)
        for name in ("px", "py", "ps"):
            a = np.zeros(cap)
            a[: self.n] = getattr(self, name)[: self.n]
            setattr(self, name, a)

    def run(self, steps: int, kernel=None):
        done = 0
        while done < steps:
            m = min(self.s.batch, steps - done)
            unif = self.rng.random((m, 5))
            gauss = self.rng.standard_normal((m, 2))
            if self.use_kernel and kernel != "generic":
                self._run_kernel(unif, gauss, kernel)
            else:
                self._run_generic(unif, gauss)
            done += m

    def _run_kernel(self, unif, gauss, kernel):
        k = _kernels.get(kernel)
        p = self.p
        gkind, table, additive, rod_half, reach = _core_geometry(p.model)
        disc = p.spin_kind.kind == "discrete"
        pb, _, _ = self.s.move_probs
        off = 0
        while off < len(unif):
            n, did = k.mcmc_hardcore(
                self.px, self.py, self.ps, self.n,
                np.ascontiguousarray(p.boundary_pos[:, 0]), np.ascontiguousarray(p.boundary_pos[:, 1]),
                np.ascontiguousarray(p.boundary_spin),
                gkind, table, additive, rod_half, disc,
                p.window.n, p.z, pb, self.s.move_probs[1], self.sigma,
                self.code, self.q, self.lo, self.hi,
                unif[off:], gauss[off:], reach, self.counts)
            self.n = int(n)
            off += int(did)
            if off < len(unif):
                self._grow()

    def _energy_with(self, x, y, s, skip):
        """Energy of a particle at (x, y, s) against the current state (row skip excluded) and boundary."""
        model = self.p.model
        n = self.n
        pos_x, pos_y, sp = self.px[:n], self.py[:n], self.ps[:n]
        if skip >= 0:
            mask = np.ones(n, bool)
            mask[skip] = False
            pos_x, pos_y, sp = pos_x[mask], pos_y[mask], sp[mask]
        bx, by, bs = self.p.boundary_pos[:, 0], self.p.boundary_pos[:, 1], self.p.boundary_spin
        ax = np.concatenate([pos_x, bx])
        ay = np.concatenate([pos_y, by])
        asp = np.concatenate([sp, bs])
        if len(ax) == 0:
            return 0.0
        r = model.interaction_range
        if not math.isinf(r):
            near = (np.abs(ax - x) <= r) & (np.abs(ay - y) <= r)
            ax, ay, asp = ax[near], ay[near], asp[near]
            if len(ax) == 0:
                return 0.0
        v = model.pair(np.full(len(ax), x), np.full(len(ax), y), np.full(len(ax), s), ax, ay, asp)
        if np.any(np.isposinf(v)):
            return math.inf
        return float(np.sum(v))

    def _run_generic(self, unif, gauss):
        p, beta, z = self.p, self.p.beta, self.p.z
        half = p.window.n
        area = p.window.area
        pb, pd, _ = self.s.move_probs
        for step in range(len(unif)):
            u0, u1, u2, u3, u4 = (float(v) for v in unif[step])
            if u0 < pb:
                self.counts[0] += 1
                x = -half + 2.0 * half * u1
                y = -half + 2.0 * half * u2
                s = _kernels.python_kernels._spin_from(u3, self.code, self.q, self.lo, self.hi)
                dH = self._energy_with(x, y, s, -1)
                if u4 < birth_ratio(dH, self.n, z, area, beta):
                    if self.n == len(self.px):
                        self._grow()
                    self.px[self.n], self.py[self.n], self.ps[self.n] = x, y, s
                    self.n += 1
                    self.counts[1] += 1
            elif u0 < pb + pd:
                self.counts[2] += 1
                if self.n == 0:
                    continue
                i = int(u1 * self.n)
                dH = -self._energy_with(self.px[i], self.py[i], self.ps[i], i)
                if u4 < death_ratio(dH, self.n, z, area, beta):
                    last = self.n - 1
                    if i != last:
                        self.px[i], self.py[i], self.ps[i] = self.px[last], self.py[last], self.ps[last]
                    self.n = last
                    self.counts[3] += 1
            else:
                self.counts[4] += 1
                if self.n == 0:
                    continue
                i = int(u1 * self.n)
                x = self.px[i] + self.sigma * float(gauss[step, 0])
                y = self.py[i] + self.sigma * float(gauss[step, 1])
                s = (_kernels.python_kernels._spin_from(u3, self.code, self.q, self.lo, self.hi)
                     if u2 < 0.5 else self.ps[i])
                if x < -half or x > half or y < -half or y > half:
                    continue
                new = self._energy_with(x, y, s, i)
                if math.isinf(new):
                    continue
                old = self._energy_with(self.px[i], self.py[i], self.ps[i], i)
                if u4 < translate_ratio(new - old, beta):
                    self.px[i], self.py[i], self.ps[i] = x, y, s
                    self.counts[5] += 1

    def snapshot(self, with_boundary: bool = True) -> MarkedConfiguration:
        p = self.p
        n = self.n
        pos = np.stack([self.px[:n], self.py[:n]], axis=1)
        ids = np.arange(n, dtype=np.int64)
        spin = self.ps[:n].copy()
        if with_boundary and len(p.boundary_pos):
            pos = np.concatenate([pos, p.boundary_pos])
            ids = np.concatenate([ids, p.boundary_ids])
            spin = np.concatenate([spin, p.boundary_spin])
        return MarkedConfiguration(p.window, ids, pos, spin, p.spin_kind, check=False)

    def acceptance(self) -> dict:
        c = self.counts
        rate = lambda a, b: float(c[b] / c[a]) if c[a] else float("nan")  # noqa: E731
        return {"birth": rate(0, 1), "death": rate(2, 3), "translate": rate(4, 5), "sigma": self.sigma}


def gibbs_chain(params: GibbsParams, settings: McmcSettings, init: MarkedConfiguration | None = None,
                kernel: str | None = None, with_boundary: bool = True, return_stats: bool = False):
    """Samples after burn-in, one every `thin` steps, until `steps` steps have been made."""
    ch = _Chain(params, settings, init)
    ch.run(settings.burn_in, kernel)
    out = []
    done = settings.burn_in
    while done + settings.thin <= settings.steps:
        ch.run(settings.thin, kernel)
        done += settings.thin
        out.append(ch.snapshot(with_boundary))
    if return_stats:
        return out, ch.acceptance()
    return out


def sample_gibbs(params: GibbsParams, settings: McmcSettings, init: MarkedConfiguration | None = None,
                 kernel: str | None = None, with_boundary: bool = True) -> MarkedConfiguration:
    """Final state of a chain of settings.steps Metropolis-Hastings steps."""
    ch = _Chain(params, settings, init)
    ch.run(settings.steps, kernel)
    return ch.snapshot(with_boundary)


# ---------------------------------------------------------------- exact small-box oracle

class SmallBoxOracle:
    """Exact sampler for tiny windows: Poisson proposals truncated at k_max, accepted with exp(-beta H).

    For potentials bounded below by -vneg the acceptance uses the bound exp(beta vneg P_k)
    on the k-particle weight, where P_k counts the pairs involving the k particles.
    """

    def __init__(self, params: GibbsParams, k_max: int, quadrature_grid: int = 32, tail: float = 1e-6):
        self.p = params
        self.k_max = int(k_max)
        self.grid = int(quadrature_grid)
        lam = params.z * params.window.area
        vneg = self._vneg()
        nb = len(params.boundary_pos)
        ks = np.arange(self.k_max + 1)
        self.log_bound = params.beta * vneg * (ks * (ks - 1) / 2 + ks * nb)
        # dominating Poisson tail; exp(beta vneg ...) inflates the weights of larger k
        if vneg > 0:
            lam = lam * math.exp(params.beta * vneg * (self.k_max + nb))
        self.tail_mass = float(poisson.sf(self.k_max, lam))
        if self.tail_mass >= tail:
            raise ValueError(f"k_max={self.k_max} too small: dominating Poisson tail {self.tail_mass:.3g} >= {tail}")
        logw = ks * math.log(params.z * params.window.area) - np.array([math.lgamma(k + 1) for k in ks])
        logw = logw + self.log_bound
        w = np.exp(logw - logw.max())
        self.proposal = w / w.sum()
        self.proposed = 0
        self.accepted = 0

    def _vneg(self) -> float:
        m = self.p.model
        if m.pure_hard_core:
            return 0.0
        r = np.linspace(max(m.max_core, 1e-6), max(4 * m.max_core, 10.0), 20001)
        v = m.profile(r)
        v = v[np.isfinite(v)]
        return float(max(0.0, -v.min())) if len(v) else 0.0

    def _draw_one(self, rng, next_id):
        p = self.p
        half = p.window.n
        while True:
            k = int(rng.choice(self.k_max + 1, p=self.proposal))
            pos = rng.uniform(-half, half, size=(k, 2))
            spin = p.spin_kind.sample(rng, k)
            u = rng.random()
            self.proposed += 1
            h = hamiltonian_arrays(p.model, pos, spin, p.boundary_pos, p.boundary_spin)
            if math.isinf(h):
                continue
            if u < math.exp(-p.beta * h - self.log_bound[k]):
                self.accepted += 1
                return pos, spin

    def sample(self, rng, with_boundary: bool = True) -> MarkedConfiguration:
        p = self.p
        pos, spin = self._draw_one(rng, 0)
        ids = np.arange(len(pos), dtype=np.int64)
        if with_boundary and len(p.boundary_pos):
            pos = np.concatenate([pos, p.boundary_pos])
            spin = np.concatenate([spin, p.boundary_spin])
            ids = np.concatenate([ids, p.boundary_ids])
        return MarkedConfiguration(p.window, ids, pos, spin, p.spin_kind, check=False)

    def samples(self, count: int, seed, with_boundary: bool = True) -> list[MarkedConfiguration]:
        rng = make_rng(seed)
        return [self.sample(rng, with_boundary) for _ in range(count)]

    def one_particle_density(self, points, spins=None) -> np.ndarray:
        """Unnormalised one-particle weight z exp(-beta W(y, boundary)) at the given points."""
        p = self.p
        pts = np.asarray(points, dtype=float).reshape(-1, 2)
        sp = np.zeros(len(pts)) if spins is None else np.broadcast_to(spins, (len(pts),)).astype(float)
        out = np.empty(len(pts))
        for a in range(len(pts)):
            w = interaction_energy(p.model, (pts[a:a + 1], sp[a:a + 1]), (p.boundary_pos, p.boundary_spin))
            out[a] = 0.0 if math.isinf(w) else p.z * math.exp(-p.beta * w)
        return out

    def partition_terms(self, k_upto: int = 2) -> np.ndarray:
        """z^k/k! Z_k for k <= k_upto by a midpoint tensor grid (spins on the kind's grid)."""
        p = self.p
        half = p.window.n
        g = self.grid
        h = 2 * half / g
        c = -half + h * (np.arange(g) + 0.5)
        X, Y = np.meshgrid(c, c, indexing="ij")
        nodes, weights = p.spin_kind.grid(8)
        pts = np.stack([X.ravel(), Y.ravel()], axis=1)
        P = np.repeat(pts, len(nodes), axis=0)
        S = np.tile(nodes, len(pts))
        W = np.tile(weights, len(pts)) * h * h
        one = self.one_particle_density(P, S) / p.z
        terms = [1.0]
        if k_upto >= 1:
            terms.append(p.z * float(np.sum(W * one)))
        if k_upto >= 2:
            M = len(P)
            if M > 6000:
                raise ValueError("grid too fine for the two-particle term")
            pair = p.model.pair(P[:, None, 0], P[:, None, 1], S[:, None], P[None, :, 0], P[None, :, 1], S[None, :])
            with np.errstate(over="ignore"):
                bw = np.exp(-p.beta * pair)
            vec = W * one
            terms.append(p.z ** 2 / 2 * float(vec @ bw @ vec))
        if k_upto > 2:
            raise ValueError("tensor-grid terms are only tabulated up to k = 2")
        return np.array(terms)


def exact_sample_small(params: GibbsParams, k_max: int, quadrature_grid: int = 32, seed=0, count: int | None = None,
                       with_boundary: bool = True):
    """One exact sample (or `count` of them) from the conditional Gibbs law in a tiny window."""
    oracle = SmallBoxOracle(params, k_max, quadrature_grid)
    if count is None:
        return oracle.sample(make_rng(seed), with_boundary)
    return oracle.samples(count, seed, with_boundary)


# ---------------------------------------------------------------- edge process

def sample_edges(decomp: SmoothDecomposition, beta, config: MarkedConfiguration, seed,
                 u_fn=None, u_range: float | None = None) -> EdgeSet:
    """Independent Bernoulli(1 - exp(-beta u)) edges on pairs with an interior particle within u_range.

    beta may be a DerivedConstants. u_fn(x1, y1, s1, x2, y2, s2) overrides decomp.u_small.
    """
    if isinstance(beta, DerivedConstants):
        beta = beta.beta
    rng = make_rng(seed)
    if u_fn is None and decomp.ubar_zero and decomp.model.pure_hard_core:
        return EdgeSet()
    r = decomp.u_range if u_range is None else u_range
    if len(config) < 2 or r <= 0:
        return EdgeSet()
    pos, spin = config.pos, config.spin
    pr = cKDTree(pos).query_pairs(r, output_type="ndarray")
    if len(pr) == 0:
        return EdgeSet()
    pr = pr[np.lexsort((pr[:, 1], pr[:, 0]))]
    i, j = pr[:, 0], pr[:, 1]
    keep = config.interior[i] | config.interior[j]
    i, j = i[keep], j[keep]
    f = decomp.u_small if u_fn is None else u_fn
    u = np.asarray(f(pos[i, 0], pos[i, 1], spin[i], pos[j, 0], pos[j, 1], spin[j]), dtype=float)
    with np.errstate(over="ignore"):
        prob = np.where(np.isposinf(u), 1.0, -np.expm1(-beta * u))
    draw = rng.random(len(i))
    on = draw < prob
    ids = config.ids
    return EdgeSet(np.stack([ids[i[on]], ids[j[on]]], axis=1))


# ---------------------------------------------------------------- correlation estimates

def estimate_correlation(samples, m: int, test_cells, xi: float) -> list[dict]:
    """Empirical m-point factorial moments per cell tuple against the Ruelle bound xi^m prod |A_i|.

    test_cells: boxes (x0, x1, y0, y1) for m = 1, pairs of boxes for m = 2.
    """
    samples = list(samples)
    if len(samples) < 30:
        raise ValueError("need at least 30 samples")
    if m not in (1, 2):
        raise ValueError("m must be 1 or 2")

    def count(cfg, box):
        x0, x1, y0, y1 = box
        p = cfg.pos[cfg.interior]
        return np.sum((p[:, 0] >= x0) & (p[:, 0] < x1) & (p[:, 1] >= y0) & (p[:, 1] < y1))

    def area(box):
        return (box[1] - box[0]) * (box[3] - box[2])

    def inter(a, b):
        return (max(a[0], b[0]), min(a[1], b[1]), max(a[2], b[2]), min(a[3], b[3]))

    rows = []
    for cell in test_cells:
        if m == 1:
            vals = np.array([count(c, cell) for c in samples], dtype=float)
            bound = xi * area(cell)
            name = f"rho1{tuple(cell)}"
        else:
            a, b = cell
            ab = inter(a, b)
            has = ab[0] < ab[1] and ab[2] < ab[3]
            vals = np.array([count(c, a) * count(c, b) - (count(c, ab) if has else 0) for c in samples], dtype=float)
            bound = xi ** 2 * area(a) * area(b)
            name = f"rho2{tuple(a)}x{tuple(b)}"
        est = float(vals.mean())
        se = float(vals.std(ddof=1) / math.sqrt(len(vals)))
        rows.append({"quantity": name, "estimate": est, "stderr": se, "bound": bound,
                     "flag": bool(est > bound + 3 * se)})
    return rows
