"""Pure-Python kernels. Operation order mirrors _ckernels.pyx so both give identical floats."""

import heapq
from math import cos, floor, inf, log, sin, sqrt

import numpy as np

IMPLEMENTATION = "python"


# ---------------------------------------------------------------- shared scalar helpers

def shift_value(s, n, plateau, coef, n23):
    """Shift proposal at sup-norm s; plateau and coef are precomputed by the caller."""
    if s <= n23:
        return plateau
    if s >= n:
        return 0.0
    return coef * log(n / s)


def _rod_ends(x, y, a, r):
    ux = -sin(a)
    uy = cos(a)
    return x - r * ux, y - r * uy, x + r * ux, y + r * uy


def _orient(ax, ay, bx, by, cx, cy):
    v = (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)
    if v > 0:
        return 1
    if v < 0:
        return -1
    return 0


def _onseg(ax, ay, bx, by, cx, cy):
    return min(ax, bx) <= cx <= max(ax, bx) and min(ay, by) <= cy <= max(ay, by)


def rods_intersect(x1, y1, a1, x2, y2, a2, r):
    px, py, qx, qy = _rod_ends(x1, y1, a1, r)
    sx, sy, tx, ty = _rod_ends(x2, y2, a2, r)
    o1 = _orient(px, py, qx, qy, sx, sy)
    o2 = _orient(px, py, qx, qy, tx, ty)
    o3 = _orient(sx, sy, tx, ty, px, py)
    o4 = _orient(sx, sy, tx, ty, qx, qy)
    if o1 != o2 and o3 != o4:
        return True
    if o1 == 0 and _onseg(px, py, qx, qy, sx, sy):
        return True
    if o2 == 0 and _onseg(px, py, qx, qy, tx, ty):
        return True
    if o3 == 0 and _onseg(sx, sy, tx, ty, px, py):
        return True
    if o4 == 0 and _onseg(sx, sy, tx, ty, qx, qy):
        return True
    return False


def _clamp01(v):
    if v < 0.0:
        return 0.0
    if v > 1.0:
        return 1.0
    return v


def rods_distance(x1, y1, a1, x2, y2, a2, r):
    if rods_intersect(x1, y1, a1, x2, y2, a2, r):
        return 0.0
    u1x = -sin(a1)
    u1y = cos(a1)
    u2x = -sin(a2)
    u2y = cos(a2)
    p1x = x1 - r * u1x
    p1y = y1 - r * u1y
    p2x = x2 - r * u2x
    p2y = y2 - r * u2y
    d1x = 2.0 * r * u1x
    d1y = 2.0 * r * u1y
    d2x = 2.0 * r * u2x
    d2y = 2.0 * r * u2y
    rx = p1x - p2x
    ry = p1y - p2y
    a = d1x * d1x + d1y * d1y
    e = d2x * d2x + d2y * d2y
    f = d2x * rx + d2y * ry
    c = d1x * rx + d1y * ry
    b = d1x * d2x + d1y * d2y
    denom = a * e - b * b
    if denom > 1e-15 * a * e:
        s = _clamp01((b * f - c * e) / denom)
    else:
        s = 0.0
    t = (b * s + f) / e
    if t < 0.0:
        t = 0.0
        s = _clamp01(-c / a)
    elif t > 1.0:
        t = 1.0
        s = _clamp01((b - c) / a)
    dx = (p1x + d1x * s) - (p2x + d2x * t)
    dy = (p1y + d1y * s) - (p2y + d2y * t)
    return sqrt(dx * dx + dy * dy)


class _Geom:
    """Distance-to-core evaluator for radial tables or rods."""

    def __init__(self, gkind, table, additive, rod_half):
        self.gkind = int(gkind)
        self.table = np.asarray(table, dtype=float)
        self.additive = bool(additive)
        self.rod_half = float(rod_half)

    def dk(self, x1, y1, s1, l1, x2, y2, s2, l2):
        if self.gkind == 1:
            return rods_distance(x1, y1, s1, x2, y2, s2, self.rod_half)
        dx = x2 - x1
        dy = y2 - y1
        rk = self.table[l1, l2]
        if self.additive:
            rk = rk + s1 + s2
        d = sqrt(dx * dx + dy * dy) - rk
        return d if d > 0.0 else 0.0

    def overlap(self, x1, y1, s1, l1, x2, y2, s2, l2):
        if self.gkind == 1:
            return rods_intersect(x1, y1, s1, x2, y2, s2, self.rod_half)
        dx = x2 - x1
        dy = y2 - y1
        rk = self.table[l1, l2]
        if self.additive:
            rk = rk + s1 + s2
        return dx * dx + dy * dy < rk * rk


def _cell_range(px, py, ox, oy, cs, ncx, ncy):
    cx = int(floor((px - ox) / cs))
    cy = int(floor((py - oy) / cs))
    out = []
    for i in range(cx - 1, cx + 2):
        if i < 0 or i >= ncx:
            continue
        for j in range(cy - 1, cy + 2):
            if j < 0 or j >= ncy:
                continue
            out.append(i * ncy + j)
    return out


# ---------------------------------------------------------------- forward recursion

def forward_recursion(px, py, spin, labels, boundary, comp, comp_start, comp_items,
                      gkind, table, additive, rod_half,
                      n, plateau, coef, n23, delta, eps, c_K,
                      ox, oy, cs, ncx, ncy, cell_start, cell_items):
    """Cluster partition of the shift recursion.

    Returns (cluster_of, taus, in_p, piece, src, m_star) where piece is -1 (not in any P),
    0 (t0 attains the minimum), 1 (a slow-down from particle src) or 2 (the case-1 floor).
    """
    geom = _Geom(gkind, table, additive, rod_half)
    N = len(px)
    px = [float(v) for v in px]
    py = [float(v) for v in py]
    sp = [float(v) for v in spin]
    lab = [int(v) for v in labels]
    comp = [int(v) for v in comp]
    comp_start = [int(v) for v in comp_start]
    comp_items = [int(v) for v in comp_items]
    cell_start = [int(v) for v in cell_start]
    cell_items = [int(v) for v in cell_items]
    assigned = [-1] * N
    val = [0.0] * N
    piece = [0] * N
    src = [-1] * N
    in_p = [0] * N
    for i in range(N):
        val[i] = shift_value(max(abs(px[i]), abs(py[i])), n, plateau, coef, n23)
    state = {"floor": inf, "mstar": -1}
    heap = []
    hbound = delta * eps

    def take_components(seeds, k):
        members = []
        for i in seeds:
            cmp = comp[i]
            for t in range(comp_start[cmp], comp_start[cmp + 1]):
                j = comp_items[t]
                if assigned[j] < 0:
                    assigned[j] = k
                    members.append(j)
        return members

    def process(members, tau, k):
        for a in members:
            s = max(abs(px[a]), abs(py[a])) - c_K
            if s < 0.0:
                s = 0.0
            h = abs(shift_value(s, n, plateau, coef, n23) - tau)
            if h > hbound:
                if state["mstar"] < 0:
                    state["mstar"] = k
                if tau < state["floor"]:
                    state["floor"] = tau
                continue
            slope = h / eps
            for cell in _cell_range(px[a], py[a], ox, oy, cs, ncx, ncy):
                for t in range(cell_start[cell], cell_start[cell + 1]):
                    j = cell_items[t]
                    if assigned[j] >= 0:
                        continue
                    d = geom.dk(px[a], py[a], sp[a], lab[a], px[j], py[j], sp[j], lab[j])
                    if d < eps:
                        cand = tau + slope * d
                        if cand < val[j]:
                            val[j] = cand
                            piece[j] = 1
                            src[j] = a
                            heapq.heappush(heap, (cand, j))

    seeds = [i for i in range(N) if boundary[i]]
    members = take_components(seeds, 0)
    taus = [0.0]
    process(members, 0.0, 0)
    remaining = N - len(members)
    for i in range(N):
        if assigned[i] < 0:
            heap.append((val[i], i))
    heapq.heapify(heap)
    k = 0
    while remaining > 0:
        k += 1
        while heap and (assigned[heap[0][1]] >= 0 or heap[0][0] != val[heap[0][1]]):
            heapq.heappop(heap)
        v = heap[0][0] if heap else inf
        P = []
        if state["floor"] <= v:
            tau = state["floor"]
            for i in range(N):
                if assigned[i] < 0:
                    P.append(i)
                    if val[i] > tau:
                        val[i] = tau
                        piece[i] = 2
                        src[i] = -1
        else:
            tau = v
            while heap and heap[0][0] == v:
                vv, i = heapq.heappop(heap)
                if assigned[i] < 0 and val[i] == vv and not in_p[i]:
                    P.append(i)
                    in_p[i] = 1
        for i in P:
            in_p[i] = 1
        members = take_components(P, k)
        remaining -= len(members)
        taus.append(tau)
        process(members, tau, k)
    mstar = state["mstar"] if state["mstar"] >= 0 else k
    for i in range(N):
        if not in_p[i]:
            piece[i] = -1
            src[i] = -1
    return (np.array(assigned, dtype=np.int64), np.array(taus, dtype=float),
            np.array(in_p, dtype=np.uint8), np.array(piece, dtype=np.int8),
            np.array(src, dtype=np.int64), int(mstar))


# ---------------------------------------------------------------- inverse recursion

def _phi(c, qx, qy, sgn, n, plateau, coef, n23, geom, ax, ay, sa, la, sj, lj, tau, slope, eps, use_m):
    zx = qx - sgn * c
    v = shift_value(max(abs(zx), abs(qy)), n, plateau, coef, n23)
    if use_m:
        d = geom.dk(ax, ay, sa, la, zx, qy, sj, lj)
        if d < eps:
            m = tau + slope * d
            if m < v:
                v = m
    return v - c


def _solve(lo, hi, qx, qy, sgn, n, plateau, coef, n23, geom, ax, ay, sa, la, sj, lj, tau, slope, eps, use_m):
    """Bisection for the root of a decreasing phi with phi(lo) >= 0 > phi(hi)."""
    while True:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            return lo
        if _phi(mid, qx, qy, sgn, n, plateau, coef, n23, geom, ax, ay, sa, la, sj, lj, tau, slope, eps, use_m) >= 0.0:
            lo = mid
        else:
            hi = mid


def inverse_recursion(qx, qy, spin, labels, boundary, comp, comp_start, comp_items,
                      gkind, table, additive, rod_half,
                      n, plateau, coef, n23, delta, eps, c_K, sgn,
                      ox, oy, cs, ncx, ncy, cell_start, cell_items):
    """Tilde recursion on image positions; returns (cluster_of, taus)."""
    geom = _Geom(gkind, table, additive, rod_half)
    N = len(qx)
    qx = [float(v) for v in qx]
    qy = [float(v) for v in qy]
    sp = [float(v) for v in spin]
    lab = [int(v) for v in labels]
    comp = [int(v) for v in comp]
    comp_start = [int(v) for v in comp_start]
    comp_items = [int(v) for v in comp_items]
    cell_start = [int(v) for v in cell_start]
    cell_items = [int(v) for v in cell_items]
    sgn = float(sgn)
    assigned = [-1] * N
    val = [0.0] * N
    for i in range(N):
        if boundary[i]:
            continue
        args = (qx[i], qy[i], sgn, n, plateau, coef, n23, geom, 0.0, 0.0, 0.0, 0, 0.0, 0, 0.0, 0.0, eps, False)
        if _phi(plateau, *args) >= 0.0:
            val[i] = plateau
        elif _phi(0.0, *args) <= 0.0:
            val[i] = 0.0
        else:
            val[i] = _solve(0.0, plateau, *args)
    state = {"floor": inf}
    heap = []
    hbound = delta * eps

    def take_components(seeds, k):
        members = []
        for i in seeds:
            cmp = comp[i]
            for t in range(comp_start[cmp], comp_start[cmp + 1]):
                j = comp_items[t]
                if assigned[j] < 0:
                    assigned[j] = k
                    members.append(j)
        return members

    def process(members, tau):
        for a in members:
            ax = qx[a] - sgn * tau
            ay = qy[a]
            s = max(abs(ax), abs(ay)) - c_K
            if s < 0.0:
                s = 0.0
            h = abs(shift_value(s, n, plateau, coef, n23) - tau)
            if h > hbound:
                if tau < state["floor"]:
                    state["floor"] = tau
                continue
            slope = h / eps
            for cell in _cell_range(ax, ay, ox, oy, cs, ncx, ncy):
                for t in range(cell_start[cell], cell_start[cell + 1]):
                    j = cell_items[t]
                    if assigned[j] >= 0:
                        continue
                    args = (qx[j], qy[j], sgn, n, plateau, coef, n23, geom, ax, ay, sp[a], lab[a],
                            sp[j], lab[j], tau, slope, eps, True)
                    g = val[j]
                    if _phi(g, *args) >= 0.0:
                        continue
                    f_tau = _phi(tau, *args)
                    if f_tau == 0.0:
                        new = tau
                    elif f_tau > 0.0:
                        new = _solve(tau, g, *args)
                    else:
                        new = _solve(0.0, g, *args)
                    if new < val[j]:
                        val[j] = new
                        heapq.heappush(heap, (new, j))

    seeds = [i for i in range(N) if boundary[i]]
    members = take_components(seeds, 0)
    taus = [0.0]
    process(members, 0.0)
    remaining = N - len(members)
    for i in range(N):
        if assigned[i] < 0:
            heap.append((val[i], i))
    heapq.heapify(heap)
    k = 0
    flag = [0] * N
    while remaining > 0:
        k += 1
        while heap and (assigned[heap[0][1]] >= 0 or heap[0][0] != val[heap[0][1]]):
            heapq.heappop(heap)
        v = heap[0][0] if heap else inf
        P = []
        if state["floor"] <= v:
            tau = state["floor"]
            P = [i for i in range(N) if assigned[i] < 0]
        else:
            tau = v
            while heap and heap[0][0] == v:
                vv, i = heapq.heappop(heap)
                if assigned[i] < 0 and val[i] == vv and not flag[i]:
                    flag[i] = 1
                    P.append(i)
        members = take_components(P, k)
        remaining -= len(members)
        taus.append(tau)
        process(members, tau)
    return np.array(assigned, dtype=np.int64), np.array(taus, dtype=float)


# ---------------------------------------------------------------- hard-core MCMC

def _spin_from(u, code, q, lo, hi):
    if code == 0:
        return 0.0
    if code == 1:
        v = floor(u * q)
        if v > q - 1:
            v = q - 1
        return v + 1.0
    if code == 2:
        return lo + u * (hi - lo)
    return u * 3.141592653589793


class _Grid:
    """Linked-list cell grid over the sampling window plus a margin."""

    def __init__(self, half, cs, cap, nb):
        self.cs = cs
        self.ox = -half - cs
        self.nc = int(floor(2.0 * (half + cs) / cs)) + 1
        self.head = [-1] * (self.nc * self.nc)
        self.nxt = [-1] * (cap + nb)
        self.prv = [-1] * (cap + nb)
        self.cell = [-1] * (cap + nb)

    def cell_of(self, x, y):
        cx = int(floor((x - self.ox) / self.cs))
        cy = int(floor((y - self.ox) / self.cs))
        if cx < 0 or cy < 0 or cx >= self.nc or cy >= self.nc:
            return -1
        return cx * self.nc + cy

    def insert(self, slot, x, y):
        c = self.cell_of(x, y)
        self.cell[slot] = c
        if c < 0:
            return
        h = self.head[c]
        self.nxt[slot] = h
        self.prv[slot] = -1
        if h >= 0:
            self.prv[h] = slot
        self.head[c] = slot

    def remove(self, slot):
        c = self.cell[slot]
        if c < 0:
            return
        p, q = self.prv[slot], self.nxt[slot]
        if p >= 0:
            self.nxt[p] = q
        else:
            self.head[c] = q
        if q >= 0:
            self.prv[q] = p
        self.cell[slot] = -1


def mcmc_hardcore(px, py, ps, n_cur, bx, by, bs, gkind, table, additive, rod_half, disc,
                  half, z, p_birth, p_death, sigma, code, q, lo, hi, unif, gauss, cs, counts):
    """Run len(unif) MH steps for a pure hard-core model, mutating px/py/ps in place.

    Returns (n_cur, steps_done); stops early when the capacity len(px) is reached.
    counts[0..5] accumulate (proposed, accepted) for birth, death, translate.
    """
    geom = _Geom(gkind, table, additive, rod_half)
    cap = len(px)
    nb = len(bx)
    area = (2.0 * half) ** 2
    use_grid = cs > 0.0
    grid = _Grid(half, cs, cap, nb) if use_grid else None
    bl = [int(v) if disc else 0 for v in bs]
    if use_grid:
        for i in range(n_cur):
            grid.insert(i, px[i], py[i])
        for b in range(nb):
            grid.insert(cap + b, bx[b], by[b])

    def blocked(x, y, s, skip):
        if not use_grid:
            return False
        ls = int(s) if disc else 0
        c = grid.cell_of(x, y)
        cx, cy = c // grid.nc, c % grid.nc
        for i in range(cx - 1, cx + 2):
            if i < 0 or i >= grid.nc:
                continue
            for j in range(cy - 1, cy + 2):
                if j < 0 or j >= grid.nc:
                    continue
                t = grid.head[i * grid.nc + j]
                while t >= 0:
                    if t != skip:
                        if t < cap:
                            hit = geom.overlap(x, y, s, ls, px[t], py[t], ps[t], int(ps[t]) if disc else 0)
                        else:
                            b = t - cap
                            hit = geom.overlap(x, y, s, ls, bx[b], by[b], bs[b], bl[b])
                        if hit:
                            return True
                    t = grid.nxt[t]
        return False

    steps = len(unif)
    for step in range(steps):
        u0, u1, u2, u3, u4 = (float(v) for v in unif[step])
        if u0 < p_birth:
            if n_cur == cap:
                return n_cur, step
            counts[0] += 1
            x = -half + 2.0 * half * u1
            y = -half + 2.0 * half * u2
            s = _spin_from(u3, code, q, lo, hi)
            if blocked(x, y, s, -1):
                continue
            if u4 < z * area / (n_cur + 1):
                px[n_cur] = x
                py[n_cur] = y
                ps[n_cur] = s
                if use_grid:
                    grid.insert(n_cur, x, y)
                n_cur += 1
                counts[1] += 1
        elif u0 < p_birth + p_death:
            counts[2] += 1
            if n_cur == 0:
                continue
            i = int(u1 * n_cur)
            if u4 < n_cur / (z * area):
                last = n_cur - 1
                if use_grid:
                    grid.remove(i)
                    if i != last:
                        grid.remove(last)
                if i != last:
                    px[i] = px[last]
                    py[i] = py[last]
                    ps[i] = ps[last]
                    if use_grid:
                        grid.insert(i, px[i], py[i])
                n_cur = last
                counts[3] += 1
        else:
            counts[4] += 1
            if n_cur == 0:
                continue
            i = int(u1 * n_cur)
            x = px[i] + sigma * float(gauss[step, 0])
            y = py[i] + sigma * float(gauss[step, 1])
            s = _spin_from(u3, code, q, lo, hi) if u2 < 0.5 else ps[i]
            if x < -half or x > half or y < -half or y > half:
                continue
            if blocked(x, y, s, i):
                continue
            if use_grid:
                grid.remove(i)
            px[i] = x
            py[i] = y
            ps[i] = s
            if use_grid:
                grid.insert(i, x, y)
            counts[5] += 1
    return n_cur, steps
