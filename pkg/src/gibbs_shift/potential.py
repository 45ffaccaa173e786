"""Pair potentials with hard cores, smooth decompositions and derived constants.

Pair functions are vectorised over particle arrays. For a pair (y1, y2) the relative
position is x2 - x1; all bundled potentials are symmetric so the order never matters.
Rods with angle a are the segments {x + s*(-sin a, cos a) : |s| <= r}.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate, optimize
from scipy.interpolate import CubicSpline

from .core import Particle, SpinKind, UNIT


class ParameterError(ValueError):
    """Invalid model parameters."""


class InfeasibleError(ValueError):
    """A derived constant violates the smallness regime (e.g. c_u >= 1)."""


# ---------------------------------------------------------------- geometry helpers

def rod_direction(angle):
    angle = np.asarray(angle, dtype=float)
    return -np.sin(angle), np.cos(angle)


def segment_closest(x1, y1, a1, x2, y2, a2, r):
    """Closest points between rods (x1,y1,a1) and (x2,y2,a2) of half length r.

    Returns (c1x, c1y, c2x, c2y, dist). Vectorised version of the standard
    clamped closest-point computation for two segments.
    """
    x1, y1, a1, x2, y2, a2 = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (x1, y1, a1, x2, y2, a2)))
    u1x, u1y = rod_direction(a1)
    u2x, u2y = rod_direction(a2)
    p1x, p1y = x1 - r * u1x, y1 - r * u1y
    p2x, p2y = x2 - r * u2x, y2 - r * u2y
    d1x, d1y = 2 * r * u1x, 2 * r * u1y
    d2x, d2y = 2 * r * u2x, 2 * r * u2y
    rx, ry = p1x - p2x, p1y - p2y
    a = d1x * d1x + d1y * d1y
    e = d2x * d2x + d2y * d2y
    f = d2x * rx + d2y * ry
    c = d1x * rx + d1y * ry
    b = d1x * d2x + d1y * d2y
    denom = a * e - b * b
    with np.errstate(divide="ignore", invalid="ignore"):
        s = np.where(denom > 1e-15 * a * e, np.clip((b * f - c * e) / denom, 0.0, 1.0), 0.0)
        t = (b * s + f) / e
        s = np.where(t < 0, np.clip(-c / a, 0.0, 1.0), np.where(t > 1, np.clip((b - c) / a, 0.0, 1.0), s))
    t = np.clip(t, 0.0, 1.0)
    c1x, c1y = p1x + d1x * s, p1y + d1y * s
    c2x, c2y = p2x + d2x * t, p2y + d2y * t
    dist = np.sqrt((c1x - c2x) ** 2 + (c1y - c2y) ** 2)
    return c1x, c1y, c2x, c2y, dist


def _orient(ax, ay, bx, by, cx, cy):
    return (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)


def _on_segment(ax, ay, bx, by, cx, cy):
    return ((np.minimum(ax, bx) <= cx) & (cx <= np.maximum(ax, bx))
            & (np.minimum(ay, by) <= cy) & (cy <= np.maximum(ay, by)))


def segments_intersect(x1, y1, a1, x2, y2, a2, r):
    """Closed-segment intersection predicate (orientation tests, collinear overlap included)."""
    x1, y1, a1, x2, y2, a2 = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (x1, y1, a1, x2, y2, a2)))
    u1x, u1y = rod_direction(a1)
    u2x, u2y = rod_direction(a2)
    px, py, qx, qy = x1 - r * u1x, y1 - r * u1y, x1 + r * u1x, y1 + r * u1y
    sx, sy, tx, ty = x2 - r * u2x, y2 - r * u2y, x2 + r * u2x, y2 + r * u2y
    o1 = np.sign(_orient(px, py, qx, qy, sx, sy))
    o2 = np.sign(_orient(px, py, qx, qy, tx, ty))
    o3 = np.sign(_orient(sx, sy, tx, ty, px, py))
    o4 = np.sign(_orient(sx, sy, tx, ty, qx, qy))
    general = (o1 != o2) & (o3 != o4)
    col = ((o1 == 0) & _on_segment(px, py, qx, qy, sx, sy)) | ((o2 == 0) & _on_segment(px, py, qx, qy, tx, ty)) \
        | ((o3 == 0) & _on_segment(sx, sy, tx, ty, px, py)) | ((o4 == 0) & _on_segment(sx, sy, tx, ty, qx, qy))
    return general | col


def _arr(*vals):
    return np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in vals))


# ---------------------------------------------------------------- models

class PotentialModel:
    """Base class. Subclasses define the radial profile or override the pair functions."""

    name = "model"
    spin_kind: SpinKind = UNIT
    radial = True
    pure_hard_core = False
    alpha = 5.0  # decay exponent used for psi

    # --- radial description (ignored by rods)
    def core_table(self) -> tuple[np.ndarray, bool]:
        """Hard-core radius table indexed by spin label, and whether spins add to it."""
        return np.zeros((1, 1)), False

    def labels(self, spin) -> np.ndarray:
        spin = np.asarray(spin, dtype=float)
        if self.spin_kind.kind == "discrete":
            return spin.astype(np.int64)
        return np.zeros(spin.shape, dtype=np.int64)

    def core_radius(self, s1, s2) -> np.ndarray:
        table, additive = self.core_table()
        r = table[self.labels(s1), self.labels(s2)]
        if additive:
            r = r + np.asarray(s1, dtype=float) + np.asarray(s2, dtype=float)
        return r

    def profile(self, r) -> np.ndarray:
        """V(r) outside the hard core (unit spins for the soft models)."""
        return np.zeros_like(np.asarray(r, dtype=float))

    def profile_d1(self, r) -> np.ndarray:
        h = 1e-6 * np.maximum(1.0, r)
        return (self.profile(r + h) - self.profile(r - h)) / (2 * h)

    def profile_d2(self, r) -> np.ndarray:
        h = 1e-4 * np.maximum(1.0, r)
        return (self.profile(r + h) - 2 * self.profile(r) + self.profile(r - h)) / (h * h)

    def jumps(self) -> list[float]:
        """Jump radii r^(1..N) of the profile (the last is R)."""
        return []

    @property
    def interaction_range(self) -> float:
        """Distance beyond which U vanishes identically (inf for long tails)."""
        return float(np.max(self.core_radius(*self.extreme_spins())))

    def extreme_spins(self):
        nodes, _ = self.spin_kind.grid(64)
        if self.spin_kind.kind == "scalar":
            nodes = np.array([self.spin_kind.hi])
        s1, s2 = np.meshgrid(nodes, nodes)
        return s1.ravel(), s2.ravel()

    @property
    def max_core(self) -> float:
        return float(np.max(self.core_radius(*self.extreme_spins())))

    # --- vectorised pair functions
    def core(self, x1, y1, s1, x2, y2, s2) -> np.ndarray:
        x1, y1, s1, x2, y2, s2 = _arr(x1, y1, s1, x2, y2, s2)
        dx, dy = x2 - x1, y2 - y1
        r0 = self.core_radius(s1, s2)
        return dx * dx + dy * dy < r0 * r0

    def pair(self, x1, y1, s1, x2, y2, s2) -> np.ndarray:
        x1, y1, s1, x2, y2, s2 = _arr(x1, y1, s1, x2, y2, s2)
        dx, dy = x2 - x1, y2 - y1
        r = np.sqrt(dx * dx + dy * dy)
        out = np.where(self.core(x1, y1, s1, x2, y2, s2), np.inf, 0.0)
        free = ~np.isinf(out)
        if np.any(free) and not self.pure_hard_core:
            out[free] = self.profile(r[free])
        return out

    # --- particle API
    def evaluate(self, y: Particle, y2: Particle) -> float:
        return float(self.pair(y.x[0], y.x[1], y.sigma.value, y2.x[0], y2.x[1], y2.sigma.value))

    def hard_core_test(self, y: Particle, y2: Particle) -> bool:
        return bool(self.core(y.x[0], y.x[1], y.sigma.value, y2.x[0], y2.x[1], y2.sigma.value))

    def descriptor(self) -> dict:
        raise NotImplementedError

    def step_scale(self) -> float:
        """Length scale for translate moves: half the hard-core radius, or 0.1 without core."""
        core = self.max_core
        return 0.5 * core if core > 0 else 0.1

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.descriptor()})"


def _positive(name, v):
    v = float(v)
    if not v > 0 or not math.isfinite(v):
        raise ParameterError(f"{name} must be positive, got {v}")
    return v


def _nonneg(name, v):
    v = float(v)
    if not v >= 0 or not math.isfinite(v):
        raise ParameterError(f"{name} must be nonnegative, got {v}")
    return v


class Ideal(PotentialModel):
    """U identically zero (Poisson reference)."""

    name = "ideal"
    pure_hard_core = True

    def __init__(self, spin_kind: SpinKind = UNIT):
        self.spin_kind = spin_kind

    @property
    def interaction_range(self) -> float:
        return 0.0

    def descriptor(self):
        return {"kind": "Ideal"}


class HardCore(PotentialModel):
    """Pure hard core: U = inf for |x - x'| < r0(sigma, sigma'). r0 scalar or (q x q) table."""

    name = "hard-core"
    pure_hard_core = True

    def __init__(self, r0):
        r0 = np.asarray(r0, dtype=float)
        if r0.ndim == 0:
            self._table = np.array([[_positive("r0", r0)]])
            self.spin_kind = UNIT
        else:
            if r0.shape[0] != r0.shape[1] or not np.array_equal(r0, r0.T):
                raise ParameterError("r0 table must be square and symmetric")
            if np.any(r0 <= 0):
                raise ParameterError("r0 table entries must be positive")
            q = r0.shape[0]
            self._table = np.zeros((q + 1, q + 1))
            self._table[1:, 1:] = r0
            self.spin_kind = SpinKind("discrete", q)
        self.r0 = r0

    def core_table(self):
        return self._table, False

    def descriptor(self):
        return {"kind": "HardCore", "r0": self.r0.tolist()}


class WidomRowlinson(PotentialModel):
    name = "widom-rowlinson"
    pure_hard_core = True

    def __init__(self, q: int = 2, r: float = 0.5):
        if int(q) < 2:
            raise ParameterError("Widom-Rowlinson needs q >= 2")
        self.q, self.r = int(q), _positive("r", r)
        self.spin_kind = SpinKind("discrete", self.q)
        t = np.full((self.q + 1, self.q + 1), 2 * self.r)
        np.fill_diagonal(t, 0.0)
        self._table = t

    def core_table(self):
        return self._table, False

    def step_scale(self):
        return self.r

    def descriptor(self):
        return {"kind": "WidomRowlinson", "q": self.q, "r": self.r}


class RandomRadiiDisks(PotentialModel):
    """Hard disks whose radii are the spins, uniform on (0, R); core radius sigma + sigma'."""

    name = "random-radii"
    pure_hard_core = True

    def __init__(self, R: float = 0.5):
        self.R = _positive("R", R)
        self.spin_kind = SpinKind("scalar", lo=0.0, hi=self.R)

    def core_table(self):
        return np.zeros((1, 1)), True

    def step_scale(self):
        return 0.5 * self.R

    def descriptor(self):
        return {"kind": "RandomRadiiDisks", "R": self.R}


class SoftCore(PotentialModel):
    """V(r) = c1 for r < r1, else 0."""

    name = "soft-core"

    def __init__(self, c1: float = 1.0, r1: float = 1.0):
        self.c1, self.r1 = _nonneg("c1", c1), _positive("r1", r1)

    def profile(self, r):
        r = np.asarray(r, dtype=float)
        return np.where(r < self.r1, self.c1, 0.0)

    def profile_d1(self, r):
        return np.zeros_like(np.asarray(r, dtype=float))

    def profile_d2(self, r):
        return np.zeros_like(np.asarray(r, dtype=float))

    def jumps(self):
        return [self.r1]

    @property
    def interaction_range(self):
        return self.r1

    def step_scale(self):
        return 0.1

    def descriptor(self):
        return {"kind": "SoftCore", "c1": self.c1, "r1": self.r1}


class Well(PotentialModel):
    """Hard core r0, well depth -c1 on (r0, r1), tail c2/r^3 beyond r1."""

    name = "well"

    def __init__(self, r0: float = 0.5, r1: float = 1.0, c1: float = 1.0, c2: float = 0.1):
        self.r0, self.r1 = _positive("r0", r0), _positive("r1", r1)
        if not self.r1 > self.r0:
            raise ParameterError("Well needs r1 > r0")
        self.c1, self.c2 = _nonneg("c1", c1), _nonneg("c2", c2)

    def core_table(self):
        return np.array([[self.r0]]), False

    def profile(self, r):
        r = np.asarray(r, dtype=float)
        with np.errstate(divide="ignore"):
            return np.where(r < self.r1, -self.c1, self.c2 / r ** 3)

    def profile_d1(self, r):
        r = np.asarray(r, dtype=float)
        return np.where(r < self.r1, 0.0, -3 * self.c2 / r ** 4)

    def profile_d2(self, r):
        r = np.asarray(r, dtype=float)
        return np.where(r < self.r1, 0.0, 12 * self.c2 / r ** 5)

    def jumps(self):
        return [self.r1]

    @property
    def interaction_range(self):
        return math.inf if self.c2 > 0 else self.r1

    def descriptor(self):
        return {"kind": "Well", "r0": self.r0, "r1": self.r1, "c1": self.c1, "c2": self.c2}


class LennardJones(PotentialModel):
    """V(r) = c1/r^12 - c2/r^6."""

    name = "lennard-jones"
    alpha = 8.0

    def __init__(self, c1: float = 4.0, c2: float = 4.0):
        self.c1, self.c2 = _positive("c1", c1), _nonneg("c2", c2)

    def profile(self, r):
        r = np.asarray(r, dtype=float)
        with np.errstate(divide="ignore", over="ignore"):
            r6 = r ** -6
            return self.c1 * r6 * r6 - self.c2 * r6

    def profile_d1(self, r):
        r = np.asarray(r, dtype=float)
        return -12 * self.c1 * r ** -13 + 6 * self.c2 * r ** -7

    def profile_d2(self, r):
        r = np.asarray(r, dtype=float)
        return 156 * self.c1 * r ** -14 - 42 * self.c2 * r ** -8

    @property
    def interaction_range(self):
        return math.inf

    def step_scale(self):
        return 0.1

    def descriptor(self):
        return {"kind": "LennardJones", "c1": self.c1, "c2": self.c2}


class HardRods(PotentialModel):
    """Segments of half length r; U = inf iff the closed segments intersect."""

    name = "hard-rods"
    radial = False
    pure_hard_core = True

    def __init__(self, r: float = 0.5):
        self.r = _positive("r", r)
        self.spin_kind = SpinKind("direction")

    def core(self, x1, y1, s1, x2, y2, s2):
        return segments_intersect(x1, y1, s1, x2, y2, s2, self.r)

    def pair(self, x1, y1, s1, x2, y2, s2):
        return np.where(self.core(x1, y1, s1, x2, y2, s2), np.inf, 0.0)

    @property
    def interaction_range(self):
        return 2 * self.r

    @property
    def max_core(self):
        return 2 * self.r

    def step_scale(self):
        return 0.5 * self.r

    def descriptor(self):
        return {"kind": "HardRods", "r": self.r}


MODEL_KINDS = {
    "Ideal": Ideal,
    "HardCore": HardCore,
    "SoftCore": SoftCore,
    "Well": Well,
    "LennardJones": LennardJones,
    "WidomRowlinson": WidomRowlinson,
    "RandomRadiiDisks": RandomRadiiDisks,
    "HardRods": HardRods,
}


def make_model(spec) -> PotentialModel:
    """Build a model from a descriptor dict {"kind": ..., params...} or pass a model through."""
    if isinstance(spec, PotentialModel):
        return spec
    spec = dict(spec)
    kind = spec.pop("kind", None)
    if kind not in MODEL_KINDS:
        raise ParameterError(f"unknown model kind {kind!r}; expected one of {sorted(MODEL_KINDS)}")
    try:
        return MODEL_KINDS[kind](**spec)
    except TypeError as exc:
        raise ParameterError(f"bad parameters for {kind}: {exc}") from None


# ---------------------------------------------------------------- mollifier

_GL_X, _GL_W = np.polynomial.legendre.leggauss(64)
# normalised under the same Gauss-Legendre rule used for the convolutions, so that a constant
# convolves to exactly itself (the decomposition has zero margin on flat pieces)
_BUMP_MASS = float(np.dot(np.exp(-1.0 / (1.0 - _GL_X ** 2)), _GL_W))


class Bump:
    """Normalised bump density supported in (-width, width) and its distribution function."""

    def __init__(self, width: float):
        self.width = _positive("mollifier width", width)

    def pdf(self, t):
        s = np.asarray(t, dtype=float) / self.width
        out = np.zeros_like(s)
        m = np.abs(s) < 1
        out[m] = np.exp(-1.0 / (1.0 - s[m] ** 2)) / (_BUMP_MASS * self.width)
        return out

    def pdf_d1(self, t):
        s = np.asarray(t, dtype=float) / self.width
        out = np.zeros_like(s)
        m = np.abs(s) < 1
        out[m] = self.pdf(t)[m] * (-2 * s[m] / (1 - s[m] ** 2) ** 2) / self.width
        return out

    def cdf(self, x):
        x = np.clip(np.asarray(x, dtype=float), -self.width, self.width)
        lo = -self.width
        half = 0.5 * (x - lo)
        nodes = lo + half[..., None] * (_GL_X + 1.0)
        return np.clip(half * (self.pdf(nodes) * _GL_W).sum(axis=-1), 0.0, 1.0)


# ---------------------------------------------------------------- decomposition

def _root_area(R: float, gamma: float) -> float:
    """Positive root e of 2 pi R e + pi e^2 = gamma."""
    return -R + math.sqrt(R * R + gamma / math.pi)


@dataclass
class SmoothDecomposition:
    """K, Ubar, u, psi and d_K for a model.

    Radial cores: K = {|x| < rK(s,s')} with rK = core radius + eps0.
    Rods: K = K^U (trivial decomposition).
    """

    model: PotentialModel
    gamma_target: float
    eps0: float
    eps: float
    u_range: float
    alpha: float = 5.0
    c_second: float = 0.0  # c'' of psi = c'' / |x|^alpha
    ubar_zero: bool = True
    meta: dict = field(default_factory=dict)
    _vbar: Callable | None = None

    # ---- K
    def k_table(self) -> tuple[np.ndarray, bool]:
        table, additive = self.model.core_table()
        return table + self.eps0, additive

    def k_radius(self, s1, s2):
        table, additive = self.k_table()
        r = table[self.model.labels(s1), self.model.labels(s2)]
        if additive:
            r = r + np.asarray(s1, dtype=float) + np.asarray(s2, dtype=float)
        return r

    @property
    def empty_core(self) -> bool:
        """No hard core at all: then K and every enlargement of it are empty."""
        return self.model.radial and self.model.pure_hard_core and self.model.max_core == 0.0

    @property
    def c_K(self) -> float:
        """sup-norm radius ||K_eps|| (Euclidean radius bounds the sup norm)."""
        if self.empty_core:
            return 0.0
        if not self.model.radial:
            return 2 * self.model.r + self.eps
        s1, s2 = self.model.extreme_spins()
        return float(np.max(self.k_radius(s1, s2))) + self.eps

    def dK(self, x1, y1, s1, x2, y2, s2):
        x1, y1, s1, x2, y2, s2 = _arr(x1, y1, s1, x2, y2, s2)
        if self.empty_core:
            return np.full(np.broadcast(x1, x2).shape, np.inf)
        if not self.model.radial:
            dist = segment_closest(x1, y1, s1, x2, y2, s2, self.model.r)[4]
            return np.where(segments_intersect(x1, y1, s1, x2, y2, s2, self.model.r), 0.0, dist)
        dx, dy = x2 - x1, y2 - y1
        d = np.sqrt(dx * dx + dy * dy) - self.k_radius(s1, s2)
        return np.where(d > 0, d, 0.0)

    def dK_grad_x(self, x1, y1, s1, x2, y2, s2):
        """Derivative of d_K in the e1-translate of the second particle."""
        x1, y1, s1, x2, y2, s2 = _arr(x1, y1, s1, x2, y2, s2)
        if self.empty_core:
            return np.zeros(np.broadcast(x1, x2).shape)
        if not self.model.radial:
            c1x, c1y, c2x, c2y, dist = segment_closest(x1, y1, s1, x2, y2, s2, self.model.r)
            with np.errstate(invalid="ignore", divide="ignore"):
                g = (c2x - c1x) / dist
            return np.where(dist > 0, g, 0.0)
        dx, dy = x2 - x1, y2 - y1
        dist = np.sqrt(dx * dx + dy * dy)
        with np.errstate(invalid="ignore", divide="ignore"):
            g = dx / dist
        return np.where(dist > self.k_radius(s1, s2), g, 0.0)

    def K_core(self, x1, y1, s1, x2, y2, s2):
        """Open K membership, used for the equal-shift property."""
        x1, y1, s1, x2, y2, s2 = _arr(x1, y1, s1, x2, y2, s2)
        if self.empty_core:
            return np.zeros(np.broadcast(x1, x2).shape, dtype=bool)
        if not self.model.radial:
            return self.model.core(x1, y1, s1, x2, y2, s2)
        dx, dy = x2 - x1, y2 - y1
        rk = self.k_radius(s1, s2)
        return dx * dx + dy * dy < rk * rk

    def K_closed(self, x1, y1, s1, x2, y2, s2):
        return self.dK(x1, y1, s1, x2, y2, s2) == 0.0

    def in_K_eps(self, x1, y1, s1, x2, y2, s2, eps=None):
        return self.dK(x1, y1, s1, x2, y2, s2) < (self.eps if eps is None else eps)

    # ---- Ubar, u, psi
    def vbar(self, r):
        r = np.asarray(r, dtype=float)
        if self._vbar is None:
            return np.zeros_like(r)
        return self._vbar(r)

    def ubar(self, x1, y1, s1, x2, y2, s2):
        """Ubar on K^c, U (possibly inf) on K."""
        x1, y1, s1, x2, y2, s2 = _arr(x1, y1, s1, x2, y2, s2)
        inK = self.K_core(x1, y1, s1, x2, y2, s2)
        out = np.zeros(x1.shape)
        if np.any(inK):
            out[inK] = self.model.pair(x1[inK], y1[inK], s1[inK], x2[inK], y2[inK], s2[inK])
        if not self.ubar_zero:
            free = ~inK
            dx, dy = x2[free] - x1[free], y2[free] - y1[free]
            out[free] = self.vbar(np.sqrt(dx * dx + dy * dy))
        return out

    def u_small(self, x1, y1, s1, x2, y2, s2):
        x1, y1, s1, x2, y2, s2 = _arr(x1, y1, s1, x2, y2, s2)
        out = np.zeros(x1.shape)
        if self.ubar_zero and self.model.pure_hard_core:
            return out
        free = ~self.K_core(x1, y1, s1, x2, y2, s2)
        if np.any(free):
            ub = self.ubar(x1[free], y1[free], s1[free], x2[free], y2[free], s2[free])
            uu = self.model.pair(x1[free], y1[free], s1[free], x2[free], y2[free], s2[free])
            out[free] = np.maximum(ub - uu, 0.0)
        return out

    def u_radial(self, r):
        """u as a function of distance for radial soft models (0 inside K)."""
        r = np.asarray(r, dtype=float)
        rk = float(self.k_radius(0.0, 0.0))
        out = np.zeros_like(r)
        m = r >= rk
        if np.any(m) and not (self.ubar_zero and self.model.pure_hard_core):
            out[m] = np.maximum(self.vbar(r[m]) - self.model.profile(r[m]), 0.0)
        return out

    def psi(self, x1, y1, s1, x2, y2, s2):
        x1, y1, s1, x2, y2, s2 = _arr(x1, y1, s1, x2, y2, s2)
        if self.c_second == 0.0:
            return np.zeros(x1.shape)
        dx, dy = x2 - x1, y2 - y1
        r = np.sqrt(dx * dx + dy * dy)
        with np.errstate(divide="ignore"):
            val = self.c_second / r ** self.alpha
        return np.where(self.K_core(x1, y1, s1, x2, y2, s2), 0.0, val)

    # ---- kernel encoding
    def geometry(self) -> dict:
        if not self.model.radial:
            return {"kind": 1, "table": np.zeros((1, 1)), "additive": False, "rod_half": self.model.r}
        table, additive = self.k_table()
        if self.empty_core:
            table = np.full_like(table, -np.inf)
        return {"kind": 0, "table": np.ascontiguousarray(table, dtype=float), "additive": additive, "rod_half": 0.0}

    def report(self) -> dict:
        return {"eps0": self.eps0, "eps": self.eps, "c_K": self.c_K, "gamma": self.gamma_target, **self.meta}


def transform_eps(model: PotentialModel, eps0: float, gamma: float) -> float:
    """Half the largest eps with area(K_eps \\ K) < gamma, capped at 0.5."""
    if model.radial:
        rk = model.max_core + eps0
        e = _root_area(rk, gamma)
    else:
        # area(K_eps \ K^U) = 8 r eps + pi eps^2 (Steiner formula for the segment difference body)
        r = model.r
        e = (-8 * r + math.sqrt(64 * r * r + 4 * math.pi * gamma)) / (2 * math.pi)
    return min(0.5 * e, 0.5)


def smooth_decompose(model: PotentialModel, gamma: float, mollifier_width: float | None = None,
                     eps: float | None = None, eps0: float | None = None) -> SmoothDecomposition:
    """Decompose U = Ubar - u off an enlarged core K, following the mollification construction.

    mollifier_width defaults to a quarter of the collar half-width.
    """
    gamma = _positive("gamma", gamma)
    model = make_model(model)
    if isinstance(model, HardRods):
        e = transform_eps(model, 0.0, gamma) if eps is None else _positive("eps", eps)
        return SmoothDecomposition(model, gamma, 0.0, e, 0.0, meta={"construction": "trivial"})
    if isinstance(model, LennardJones):
        return _decompose_smooth_profile(model, gamma, eps, eps0)
    R = max([model.max_core] + model.jumps() + [1e-300])
    if eps0 is None:
        eps0 = min(0.5 * _root_area(R, gamma), 0.5)
    else:
        eps0 = _nonneg("eps0", eps0)
        if 2 * R * eps0 * math.pi + eps0 ** 2 * math.pi >= gamma and eps0 > 0:
            raise InfeasibleError("eps0 too large: area(K \\ K^U) >= gamma")
    e = transform_eps(model, eps0, gamma) if eps is None else _positive("eps", eps)
    if model.pure_hard_core:
        return SmoothDecomposition(model, gamma, eps0, e, 0.0, meta={"construction": "trivial"})
    return _decompose_mollified(model, gamma, eps0, e, mollifier_width)


def _decompose_smooth_profile(model, gamma, eps, eps0):
    # no jumps and no hard core: take K = {|x| < eps0} with pi eps0^2 = gamma/2 and Ubar = V
    if eps0 is None:
        eps0 = math.sqrt(gamma / (2 * math.pi))
    e = transform_eps(model, eps0, gamma) if eps is None else _positive("eps", eps)
    c_prime = _psi_constant(lambda r: model.profile_d1(r), lambda r: model.profile_d2(r), model.alpha,
                            np.geomspace(eps0, 1e4, 200001))
    dec = SmoothDecomposition(model, gamma, eps0, e, 0.0, alpha=model.alpha,
                              c_second=c_prime * 2 ** model.alpha, ubar_zero=False,
                              meta={"construction": "smooth-profile", "c_prime": c_prime, "psi_safety": 1.05})
    dec._vbar = model.profile
    return dec


def _psi_constant(d1, d2, alpha, r, safety=1.05):
    """c' = safety * sup r^alpha (|V''| + 2|V'|/r) over the nodes r."""
    vals = r ** alpha * (np.abs(d2(r)) + 2 * np.abs(d1(r)) / r)
    return float(safety * np.max(vals))


def _decompose_mollified(model, gamma, eps0, eps, mollifier_width):
    r0 = model.max_core
    jumps = model.jumps()
    R = jumps[-1]
    N = len(jumps)
    eps_c = 0.5 * min(eps0 / 2, gamma / (16 * math.pi * N * R))
    delta = eps_c / 4 if mollifier_width is None else _positive("mollifier_width", mollifier_width)
    if not delta < eps_c / 2:
        raise ParameterError(f"mollifier width must be below {eps_c / 2}")
    # M: sup |V| on [r0 + eps_c, inf); L: Lipschitz constant on the open pieces
    probe = np.concatenate([np.linspace(r0 + eps_c, R + 4, 200001), np.geomspace(R + 4, 1e4, 20001)])
    M = float(np.max(np.abs(model.profile(probe))))
    edges = [r0] + jumps
    L = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        g = np.linspace(a + eps_c, b - eps_c, 20001)
        if len(g) > 1 and b - a > 2 * eps_c:
            v = model.profile(g)
            L = max(L, float(np.max(np.abs(np.diff(v) / np.diff(g)))))
    bump = Bump(delta)
    w = eps_c + delta
    # pieces of Vhat as (a, b, const or None); None means V + delta L
    pieces = [(-np.inf, r0 + w, M)]
    for i, (a, b) in enumerate(zip(edges[:-1], edges[1:])):
        lo, hi = a + w, b - w
        if hi > lo:
            pieces.append((lo, hi, None))
        pieces.append((hi, b + w, M) if i < N - 1 else (hi, np.inf, M))
    rK = r0 + eps0
    step = delta / 50
    top = R + 2 * delta + 20 * step

    def convolve(r):
        """Vtilde(r) = integral of f(r - t) Vhat(t) dt, piece by piece."""
        r = np.asarray(r, dtype=float)
        out = np.zeros_like(r)
        for a, b, const in pieces:
            lo = np.maximum(a, r - delta)
            hi = np.minimum(b, r + delta)
            m = hi > lo
            if not np.any(m):
                continue
            # exact masses telescope across adjacent pieces, so flat stretches come out exact
            mass = bump.cdf(r[m] - lo[m]) - bump.cdf(r[m] - hi[m])
            if const is not None:
                out[m] += const * mass
                continue
            # V(anchor) times the mass plus the quadrature of the variation around it
            anchor = model.profile(np.clip(r[m], a, b))
            half = 0.5 * (hi[m] - lo[m])
            t = lo[m][:, None] + half[:, None] * (_GL_X + 1.0)
            f = bump.pdf(r[m][:, None] - t) * (model.profile(t) - anchor[:, None])
            out[m] += (anchor + delta * L) * mass + half * (f * _GL_W).sum(axis=1)
        return out

    # Ubar = Vtilde (1 - b) + V b with b the blend into the tail, evaluated exactly (no interpolation)
    # so that Ubar - V = (1 - b)(Vtilde - V) >= 0 holds to rounding. The spline of Vtilde on a fine grid
    # is only used to bound the derivatives for psi.
    nodes = np.arange(rK - 20 * step, top + step, step)
    spline = CubicSpline(nodes, convolve(nodes))
    cut = R + 2 * delta

    def vbar(r):
        r = np.asarray(r, dtype=float)
        flat = r.reshape(-1)
        out = model.profile(np.maximum(flat, cut))
        m = flat < cut
        if np.any(m):
            rc = np.maximum(flat[m], rK - 20 * step)
            b = bump.cdf(rc - R - delta)
            v = np.where(b > 0, model.profile(np.maximum(rc, R)), 0.0)
            out[m] = convolve(rc) * (1 - b) + v * b
        return out.reshape(r.shape)

    def blend_derivs(r):
        b = bump.cdf(r - R - delta)
        b1, b2 = bump.pdf(r - R - delta), bump.pdf_d1(r - R - delta)
        S, S1, S2 = spline(r), spline(r, 1), spline(r, 2)
        V, V1, V2 = model.profile(r), model.profile_d1(r), model.profile_d2(r)
        d1 = S1 * (1 - b) + (V - S) * b1 + V1 * b
        d2 = S2 * (1 - b) + 2 * (V1 - S1) * b1 + (V - S) * b2 + V2 * b
        return d1, d2

    # psi constant: spline derivatives at knots below R (the spline's second derivative is piecewise
    # linear, so its extremes sit at knots), the exact blend on a dense grid, the profile beyond the cut
    knots = nodes[(nodes >= rK) & (nodes <= R)]
    zone = np.linspace(R, cut, 20001)
    tail = np.geomspace(cut, 1e4, 100001)
    c_spline = _psi_constant(spline.derivative(1), spline.derivative(2), model.alpha, knots, 1.0)
    bd1, bd2 = blend_derivs(zone)
    c_blend = float(np.max(zone ** model.alpha * (np.abs(bd2) + 2 * np.abs(bd1) / zone)))
    c_tail = _psi_constant(model.profile_d1, model.profile_d2, model.alpha, tail, 1.0)
    c_prime = 1.05 * max(c_spline, c_blend, c_tail)
    dec = SmoothDecomposition(model, gamma, eps0, eps, u_range=R + eps_c + 2 * delta, alpha=model.alpha,
                              c_second=c_prime * 2 ** model.alpha, ubar_zero=False,
                              meta={"construction": "mollified", "M": M, "L": L, "collar": eps_c,
                                    "mollifier_width": delta, "grid_step": step, "c_prime": c_prime,
                                    "psi_safety": 1.05})
    dec._vbar = vbar
    return dec


def d_K(decomp: SmoothDecomposition, y: Particle, y2: Particle) -> float:
    return float(decomp.dK(y.x[0], y.x[1], y.sigma.value, y2.x[0], y2.x[1], y2.sigma.value))


def d_K_bisect(core_test: Callable, x1, y1, s1, x2, y2, s2, reach: float, n_dirs: int = 720,
               tol: float = 1e-10) -> float:
    """Generic d_K: smallest |z| such that shifting the second particle by z lands in the core.

    Scans directions, finds the first hit along each ray by a coarse march plus bisection,
    then refines the best direction by bounded scalar minimisation.
    """
    if core_test(x1, y1, s1, x2, y2, s2):
        return 0.0

    def ray(theta):
        cx, cy = math.cos(theta), math.sin(theta)
        ts = np.linspace(0.0, reach, 2001)
        hit = np.asarray(core_test(x1, y1, s1, x2 + ts * cx, y2 + ts * cy, s2))
        if not hit.any():
            return math.inf
        k = int(np.argmax(hit))
        lo, hi = ts[k - 1], ts[k]
        while hi - lo > tol:
            mid = 0.5 * (lo + hi)
            if core_test(x1, y1, s1, x2 + mid * cx, y2 + mid * cy, s2):
                hi = mid
            else:
                lo = mid
        return hi

    thetas = np.linspace(0, 2 * math.pi, n_dirs, endpoint=False)
    vals = np.array([ray(t) for t in thetas])
    k = int(np.argmin(vals))
    if not math.isfinite(vals[k]):
        return math.inf
    h = 2 * math.pi / n_dirs
    res = optimize.minimize_scalar(ray, bounds=(thetas[k] - h, thetas[k] + h), method="bounded",
                                   options={"xatol": 1e-12})
    return float(min(vals[k], res.fun))


# ---------------------------------------------------------------- derived constants

@dataclass(frozen=True)
class DerivedConstants:
    c_K: float
    c_psi: float
    c_u: float
    c_u_prime: float
    xi: float
    beta: float
    z: float
    gamma: float
    feasible: bool = True

    def report(self) -> dict:
        return {"c_K": self.c_K, "c_psi": self.c_psi, "c_u": self.c_u, "c_u_prime": self.c_u_prime,
                "gamma": self.gamma, "xi": self.xi, "beta": self.beta, "z": self.z, "feasible": self.feasible}


def gamma_for(xi: float, beta: float) -> float:
    return 1.0 / (3.0 * xi * max(1.0, beta))


def _rod_region_moments(r: float, eps: float, rel_angles: np.ndarray, cells: int = 500):
    """Area and second moment of K_eps \\ K^U for rods, by midpoint rule, per relative angle."""
    ext = 2 * r + eps
    g = (np.arange(cells) + 0.5) / cells * 2 * ext - ext
    X, Y = np.meshgrid(g, g)
    dA = (2 * ext / cells) ** 2
    areas, moments = [], []
    for a in rel_angles:
        d = segment_closest(0.0, 0.0, 0.0, X, Y, a, r)[4]
        inside = (d < eps) & ~segments_intersect(0.0, 0.0, 0.0, X, Y, a, r)
        areas.append(inside.sum() * dA)
        moments.append(((X * X + Y * Y) * inside).sum() * dA)
    return np.array(areas), np.array(moments)


def derive_constants(decomp: SmoothDecomposition, xi: float, beta: float, z: float | None = None,
                     check: bool = True) -> DerivedConstants:
    """Evaluate c_K, c_psi, c_u, c_u' for the decomposition; raise if c_u >= 1 (when check)."""
    xi, beta = _positive("xi", xi), _positive("beta", beta)
    z = xi if z is None else _positive("z", z)
    model = decomp.model
    eps = decomp.eps
    if not model.radial:
        # indicator term only; the area is the same for every relative angle (Steiner formula)
        rel = (np.arange(32) + 0.5) * math.pi / 32
        area = 8 * model.r * eps + math.pi * eps ** 2
        _, moments = _rod_region_moments(model.r, eps, rel)
        c_u, c_u2, c_psi = xi * area, xi * float(moments.mean()), 0.0
    else:
        nodes, weights = model.spin_kind.grid(64)
        if decomp.empty_core:
            nodes, weights = nodes[:0], weights[:0]
        c_u, c_u2 = 0.0, 0.0
        u_int = u_int2 = 0.0
        if not (decomp.ubar_zero and model.pure_hard_core):
            rk = float(decomp.k_radius(0.0, 0.0))
            pts = sorted(set([rk] + model.jumps() + [decomp.u_range]))
            f = lambda r: 2 * math.pi * r * min(beta * float(decomp.u_radial(r)), 1.0)
            if decomp.u_range > rk:
                u_int = sum(integrate.quad(f, a, b, limit=200, epsabs=1e-12)[0] for a, b in zip(pts[:-1], pts[1:]))
                u_int2 = sum(integrate.quad(lambda r: f(r) * r * r, a, b, limit=200, epsabs=1e-12)[0]
                             for a, b in zip(pts[:-1], pts[1:]))
        for s in nodes:
            s1 = np.full(len(nodes), s)
            r0 = model.core_radius(s1, nodes)
            rk = decomp.k_radius(s1, nodes)
            ro = rk + eps
            area = math.pi * (ro ** 2 - r0 ** 2)
            mom = math.pi / 2 * (ro ** 4 - r0 ** 4)
            c_u = max(c_u, xi * (float(np.dot(weights, area)) + u_int))
            c_u2 = max(c_u2, xi * (float(np.dot(weights, mom)) + u_int2))
        c_psi = 0.0
        if decomp.c_second > 0:
            rk = float(decomp.k_radius(0.0, 0.0))
            a = decomp.alpha
            g = lambda r: 2 * math.pi * r * decomp.c_second * r ** -a * max(1.0, r * r)
            pts = [rk, max(rk, 1.0)]
            c_psi = xi * (integrate.quad(g, pts[0], pts[1])[0] + integrate.quad(g, pts[1], np.inf)[0])
    feasible = c_u < 1.0
    consts = DerivedConstants(decomp.c_K, c_psi, c_u, c_u2, xi, beta, z, gamma_for(xi, beta), feasible)
    if check and not feasible:
        raise InfeasibleError(f"c_u = {c_u:.6g} >= 1: the smallness bound c_u < 1 is violated")
    return consts


def decomposition_report(decomp: SmoothDecomposition, consts: DerivedConstants) -> dict:
    return {"eps0": decomp.eps0, "eps": decomp.eps, "c_K": consts.c_K, "c_psi": consts.c_psi,
            "c_u": consts.c_u, "c_u_prime": consts.c_u_prime, "gamma": consts.gamma,
            "feasible": consts.feasible}
