"""Per-configuration checks of the transformation properties, used by the harness and the tests."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .core import MarkedConfiguration, sup_norms
from .potential import SmoothDecomposition
from .transform import (TransformParams, TransformResult, _shift_vec, apply_transform, build_transform,
                        invert_transform, is_good, k_core_pairs)

LIPSCHITZ_SLACK = 1e-12
ROUNDTRIP_TOL = 1e-9


@dataclass
class CheckOutcome:
    violations: dict = field(default_factory=dict)
    stats: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return not self.violations

    def fail(self, name: str, detail) -> None:
        self.violations.setdefault(name, detail)


def check_boundary(cfg: MarkedConfiguration, res: TransformResult, out: CheckOutcome) -> None:
    shift = res.shift
    b = ~cfg.interior
    if np.any(shift[b] != 0.0):
        i = np.flatnonzero(b & (shift != 0.0))[0]
        out.fail("T2", {"id": int(cfg.ids[i]), "shift": float(shift[i])})
    img = apply_transform(cfg, res)
    if not np.all(cfg.window.contains(img.pos[cfg.interior])):
        i = np.flatnonzero(cfg.interior & ~cfg.window.contains(img.pos))[0]
        out.fail("T2", {"id": int(cfg.ids[i]), "image": img.pos[i].tolist()})
    if not (np.array_equal(img.pos[:, 1], cfg.pos[:, 1]) and np.array_equal(img.spin, cfg.spin)
            and img.edges == cfg.edges):
        out.fail("T1", "transform changed more than the e1 coordinates")


def check_equal_shift(cfg, res, decomp: SmoothDecomposition, out: CheckOutcome) -> None:
    shift = res.shift
    pairs = [cfg.edge_index_pairs(), k_core_pairs(cfg, decomp), _closed_core_pairs(cfg, decomp)]
    for kind, pr in zip(("B", "K", "K"), pairs):
        if len(pr) == 0:
            continue
        bad = shift[pr[:, 0]] != shift[pr[:, 1]]
        if np.any(bad):
            i, j = pr[np.flatnonzero(bad)[0]]
            out.fail("T4", {"pair": [int(cfg.ids[i]), int(cfg.ids[j])], "kind": kind,
                            "shifts": [float(shift[i]), float(shift[j])]})
            return


def _closed_core_pairs(cfg, decomp):
    if len(cfg) < 2 or decomp.empty_core:
        return np.zeros((0, 2), np.int64)
    pr = cKDTree(cfg.pos).query_pairs(decomp.c_K - decomp.eps + 1e-9, output_type="ndarray")
    if len(pr) == 0:
        return np.zeros((0, 2), np.int64)
    i, j = pr[:, 0], pr[:, 1]
    p, s = cfg.pos, cfg.spin
    return pr[decomp.K_closed(p[i, 0], p[i, 1], s[i], p[j, 0], p[j, 1], s[j])]


def check_lipschitz(cfg, res, params: TransformParams, out: CheckOutcome) -> None:
    """|t(y) - t(y')| <= delta |y - y'|; shifts lie in [0, plateau] so farther pairs pass trivially."""
    if len(cfg) < 2:
        return
    shift = res.shift
    r = params.plateau / params.delta
    pr = cKDTree(cfg.pos).query_pairs(r * (1 + 1e-9) + 1e-12, output_type="ndarray")
    if len(pr) == 0:
        return
    i, j = pr[:, 0], pr[:, 1]
    d = np.hypot(cfg.pos[i, 0] - cfg.pos[j, 0], cfg.pos[i, 1] - cfg.pos[j, 1])
    gap = np.abs(shift[i] - shift[j]) - params.delta * d
    out.stats["lipschitz_max_excess"] = float(gap.max())
    if gap.max() > LIPSCHITZ_SLACK:
        a = int(np.argmax(gap))
        out.fail("T5", {"pair": [int(cfg.ids[i[a]]), int(cfg.ids[j[a]])], "excess": float(gap[a])})


def check_bounds(cfg, res, params: TransformParams, out: CheckOutcome) -> None:
    shift = res.shift
    cap = _shift_vec(sup_norms(cfg.pos), params)
    if np.any(shift < 0) or np.any(shift > params.plateau):
        out.fail("bounds", "shift outside [0, c sqrt(log n)]")
    if np.any(shift > cap):
        i = int(np.argmax(shift - cap))
        out.fail("bounds", {"id": int(cfg.ids[i]), "shift": float(shift[i]), "proposal": float(cap[i])})
    if res.taus[0] != 0.0:
        out.fail("bounds", "tau_0 is not 0")


def check_transcript(cfg, res: TransformResult, decomp: SmoothDecomposition, out: CheckOutcome,
                     tol: float = 1e-12) -> None:
    """tau_k nondecreasing and t_k nonincreasing in k at every site, recomputed from the partition.

    For each site j the profile values t_1(j), ..., t_{k(j)}(j) are rebuilt from scratch (t0, the
    running floor and the slow-downs of earlier clusters) and checked to be nonincreasing; at
    k(j) the value must be at least tau_{k(j)}, with equality for the points of P_k(j).
    """
    p = res.params
    taus, cl = res.taus, res.cluster_of
    if np.any(np.diff(taus) < 0):
        k = int(np.flatnonzero(np.diff(taus) < 0)[0])
        out.fail("monotone_tau", {"k": k, "tau_k": float(taus[k]), "tau_k+1": float(taus[k + 1])})
    N = len(cfg)
    if N == 0:
        return
    m = len(taus) - 1
    hb = p.delta * p.eps
    case1 = res.h_values > hb
    # running floor: min tau_l over clusters l < k holding a case-1 point
    first = np.full(m + 1, np.inf)
    np.minimum.at(first, cl[case1], taus[cl[case1]])
    floor_before = np.concatenate([[np.inf], np.minimum.accumulate(first)[:-1]])
    t0 = _shift_vec(sup_norms(cfg.pos), p)
    # slow-down pieces: ordered pairs (a -> j) with d_K < eps and a in an earlier cluster
    reach = decomp.c_K - decomp.eps + p.eps
    pr = cKDTree(cfg.pos).query_pairs(reach, output_type="ndarray") if N > 1 else np.zeros((0, 2), int)
    if len(pr):
        a = np.concatenate([pr[:, 0], pr[:, 1]])
        j = np.concatenate([pr[:, 1], pr[:, 0]])
        pos, s = cfg.pos, cfg.spin
        d = decomp.dK(pos[a, 0], pos[a, 1], s[a], pos[j, 0], pos[j, 1], s[j])
        keep = (d < p.eps) & (cl[a] < cl[j]) & ~case1[a]
        a, j, d = a[keep], j[keep], d[keep]
        val = taus[cl[a]] + (res.h_values[a] / p.eps) * d
    else:
        a = j = np.zeros(0, int)
        val = np.zeros(0)
    # value at the site's own step
    tk = np.minimum(t0, floor_before[cl])
    np.minimum.at(tk, j, val)
    interior_steps = cl > 0
    own = taus[cl]
    low = interior_steps & (tk < own - tol)
    if np.any(low):
        i = int(np.flatnonzero(low)[0])
        out.fail("monotone_profile", {"id": int(cfg.ids[i]), "t_k": float(tk[i]), "tau_k": float(own[i])})
    inp = res.in_p.astype(bool) & interior_steps
    off = inp & (np.abs(tk - own) > tol)
    if np.any(off):
        i = int(np.flatnonzero(off)[0])
        out.fail("profile_minimum", {"id": int(cfg.ids[i]), "t_k": float(tk[i]), "tau_k": float(own[i])})
    # the whole sequence: t at each step where a new slow-down reaches the site, then at its own step
    if len(j):
        order = np.lexsort((cl[a], j))
        a, j, val = a[order], j[order], val[order]
        ks = cl[a] + 1
        inside = ks <= cl[j]
        a, j, val, ks = a[inside], j[inside], val[inside], ks[inside]
    if len(j):
        # exact group-wise prefix minimum through integer ranks
        uniq, rank = np.unique(val, return_inverse=True)
        grp = np.concatenate([[0], np.cumsum(j[1:] != j[:-1])])
        G, M = int(grp[-1]) + 1, len(uniq)
        w = rank.astype(np.int64) + (G - grp).astype(np.int64) * M
        pref = uniq[np.minimum.accumulate(w) - (G - grp) * M]
        seq = np.minimum(np.minimum(t0[j], floor_before[ks]), pref)
        last = np.concatenate([j[1:] != j[:-1], [True]])
        nxt = np.where(last, tk[j], np.concatenate([seq[1:], [0.0]]))
        inc = nxt - seq
        if np.any(inc > 0):
            i = int(np.flatnonzero(inc > 0)[0])
            out.fail("monotone_profile", {"id": int(cfg.ids[j[i]]), "step": int(ks[i]), "increase": float(inc[i])})
    out.stats["transcript_sites"] = int(interior_steps.sum())


def check_roundtrip(cfg, res, params, decomp, out: CheckOutcome, kernel=None) -> float:
    img = apply_transform(cfg, res)
    back = invert_transform(img, params, decomp, kernel)
    err = float(np.max(np.abs(back.pos - cfg.pos))) if len(cfg) else 0.0
    out.stats["roundtrip_error"] = err
    if not err <= ROUNDTRIP_TOL:
        out.fail("roundtrip", {"max_error": err})
    return err


def check_direction_symmetry(cfg, res, params, decomp, out: CheckOutcome, kernel=None) -> None:
    other = build_transform(cfg, params.flipped(), decomp, kernel)
    if not (np.array_equal(other.taus, res.taus) and np.array_equal(other.cluster_of, res.cluster_of)):
        out.fail("direction_symmetry", "the e1 and -e1 recursions differ")


def check_configuration(cfg: MarkedConfiguration, params: TransformParams, decomp: SmoothDecomposition,
                        kernel=None, roundtrip: bool = True, symmetry: bool = False,
                        result: TransformResult | None = None) -> tuple[CheckOutcome, TransformResult]:
    """All hard assertions for one configuration (T1, T2, T4, T5, bounds, transcript, round trip)."""
    out = CheckOutcome()
    res = build_transform(cfg, params, decomp, kernel) if result is None else result
    check_boundary(cfg, res, out)
    check_equal_shift(cfg, res, decomp, out)
    check_lipschitz(cfg, res, params, out)
    check_bounds(cfg, res, params, out)
    check_transcript(cfg, res, decomp, out)
    if roundtrip:
        check_roundtrip(cfg, res, params, decomp, out, kernel)
    if symmetry:
        check_direction_symmetry(cfg, res, params, decomp, out, kernel)
    out.stats["m"] = res.m
    out.stats["m_star"] = res.m_star
    return out, res


def central_shift_check(cfg, res, params, decomp) -> dict:
    """(T3) data for one configuration: goodness and whether every particle in the central box got the plateau."""
    verdict = is_good(cfg, params, decomp)
    central = sup_norms(cfg.pos) <= np.sqrt(params.n)
    full = bool(np.all(res.shift[central] == params.plateau))
    return {"good": verdict.good, "central_count": int(central.sum()), "central_full_shift": full,
            "m_equals_m_star": res.m == res.m_star, "verdict": verdict}
