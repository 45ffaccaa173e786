# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels. Same algorithms and operation order as _pykernels.py."""

import numpy as np
cimport numpy as cnp
from libc.math cimport cos, floor, log, sin, sqrt, fabs, INFINITY
from libc.stdlib cimport malloc, realloc, free

cnp.import_array()

IMPLEMENTATION = "cython"


cdef inline double _shift(double s, double n, double plateau, double coef, double n23) nogil:
    if s <= n23:
        return plateau
    if s >= n:
        return 0.0
    return coef * log(n / s)


def shift_value(double s, double n, double plateau, double coef, double n23):
    return _shift(s, n, plateau, coef, n23)


cdef inline double _supn(double x, double y) nogil:
    cdef double a = fabs(x), b = fabs(y)
    return a if a >= b else b


cdef inline int _orient(double ax, double ay, double bx, double by, double cx, double cy) nogil:
    cdef double v = (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)
    if v > 0:
        return 1
    if v < 0:
        return -1
    return 0


cdef inline bint _onseg(double ax, double ay, double bx, double by, double cx, double cy) nogil:
    cdef double mnx = ax if ax <= bx else bx
    cdef double mxx = bx if ax <= bx else ax
    cdef double mny = ay if ay <= by else by
    cdef double mxy = by if ay <= by else ay
    return mnx <= cx and cx <= mxx and mny <= cy and cy <= mxy


cdef bint _rods_intersect(double x1, double y1, double a1, double x2, double y2, double a2, double r) nogil:
    cdef double ux = -sin(a1), uy = cos(a1), vx = -sin(a2), vy = cos(a2)
    cdef double px = x1 - r * ux, py = y1 - r * uy, qx = x1 + r * ux, qy = y1 + r * uy
    cdef double sx = x2 - r * vx, sy = y2 - r * vy, tx = x2 + r * vx, ty = y2 + r * vy
    cdef int o1 = _orient(px, py, qx, qy, sx, sy)
    cdef int o2 = _orient(px, py, qx, qy, tx, ty)
    cdef int o3 = _orient(sx, sy, tx, ty, px, py)
    cdef int o4 = _orient(sx, sy, tx, ty, qx, qy)
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


cdef inline double _clamp01(double v) nogil:
    if v < 0.0:
        return 0.0
    if v > 1.0:
        return 1.0
    return v


cdef double _rods_distance(double x1, double y1, double a1, double x2, double y2, double a2, double r) nogil:
    if _rods_intersect(x1, y1, a1, x2, y2, a2, r):
        return 0.0
    cdef double u1x = -sin(a1), u1y = cos(a1), u2x = -sin(a2), u2y = cos(a2)
    cdef double p1x = x1 - r * u1x, p1y = y1 - r * u1y
    cdef double p2x = x2 - r * u2x, p2y = y2 - r * u2y
    cdef double d1x = 2.0 * r * u1x, d1y = 2.0 * r * u1y
    cdef double d2x = 2.0 * r * u2x, d2y = 2.0 * r * u2y
    cdef double rx = p1x - p2x, ry = p1y - p2y
    cdef double a = d1x * d1x + d1y * d1y
    cdef double e = d2x * d2x + d2y * d2y
    cdef double f = d2x * rx + d2y * ry
    cdef double c = d1x * rx + d1y * ry
    cdef double b = d1x * d2x + d1y * d2y
    cdef double denom = a * e - b * b
    cdef double s, t, dx, dy
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


def rods_distance(double x1, double y1, double a1, double x2, double y2, double a2, double r):
    return _rods_distance(x1, y1, a1, x2, y2, a2, r)


def rods_intersect(double x1, double y1, double a1, double x2, double y2, double a2, double r):
    return bool(_rods_intersect(x1, y1, a1, x2, y2, a2, r))


cdef struct Geom:
    int gkind
    double *table
    int tdim
    int additive
    double rod_half


cdef inline double _dk(Geom *g, double x1, double y1, double s1, long l1,
                       double x2, double y2, double s2, long l2) nogil:
    cdef double dx, dy, rk, d
    if g.gkind == 1:
        return _rods_distance(x1, y1, s1, x2, y2, s2, g.rod_half)
    dx = x2 - x1
    dy = y2 - y1
    rk = g.table[l1 * g.tdim + l2]
    if g.additive:
        rk = rk + s1 + s2
    d = sqrt(dx * dx + dy * dy) - rk
    return d if d > 0.0 else 0.0


cdef inline bint _overlap(Geom *g, double x1, double y1, double s1, long l1,
                          double x2, double y2, double s2, long l2) nogil:
    cdef double dx, dy, rk
    if g.gkind == 1:
        return _rods_intersect(x1, y1, s1, x2, y2, s2, g.rod_half)
    dx = x2 - x1
    dy = y2 - y1
    rk = g.table[l1 * g.tdim + l2]
    if g.additive:
        rk = rk + s1 + s2
    return dx * dx + dy * dy < rk * rk


# ---------------------------------------------------------------- binary heap keyed by (value, index)

cdef struct Heap:
    double *val
    long *idx
    long size
    long cap


cdef int _heap_init(Heap *h, long cap) except -1:
    if cap < 16:
        cap = 16
    h.val = <double *> malloc(cap * sizeof(double))
    h.idx = <long *> malloc(cap * sizeof(long))
    if h.val == NULL or h.idx == NULL:
        raise MemoryError()
    h.size = 0
    h.cap = cap
    return 0


cdef void _heap_free(Heap *h) nogil:
    free(h.val)
    free(h.idx)


cdef inline bint _less(double va, long ia, double vb, long ib) nogil:
    return va < vb or (va == vb and ia < ib)


cdef int _heap_push(Heap *h, double v, long i) except -1:
    cdef long pos, parent
    if h.size == h.cap:
        h.cap *= 2
        h.val = <double *> realloc(h.val, h.cap * sizeof(double))
        h.idx = <long *> realloc(h.idx, h.cap * sizeof(long))
        if h.val == NULL or h.idx == NULL:
            raise MemoryError()
    pos = h.size
    h.size += 1
    while pos > 0:
        parent = (pos - 1) >> 1
        if _less(v, i, h.val[parent], h.idx[parent]):
            h.val[pos] = h.val[parent]
            h.idx[pos] = h.idx[parent]
            pos = parent
        else:
            break
    h.val[pos] = v
    h.idx[pos] = i
    return 0


cdef void _heap_pop(Heap *h) nogil:
    cdef long pos = 0, child
    cdef double v
    cdef long i
    h.size -= 1
    if h.size == 0:
        return
    v = h.val[h.size]
    i = h.idx[h.size]
    while True:
        child = 2 * pos + 1
        if child >= h.size:
            break
        if child + 1 < h.size and _less(h.val[child + 1], h.idx[child + 1], h.val[child], h.idx[child]):
            child += 1
        if _less(h.val[child], h.idx[child], v, i):
            h.val[pos] = h.val[child]
            h.idx[pos] = h.idx[child]
            pos = child
        else:
            break
    h.val[pos] = v
    h.idx[pos] = i


cdef struct Cells:
    double ox
    double oy
    double cs
    long ncx
    long ncy
    long *start
    long *items


cdef inline long _take(long *seeds, long nseeds, long k, long *assigned, long *comp,
                       long *comp_start, long *comp_items, long *members) nogil:
    cdef long a, i, cmp, t, j, count = 0
    for a in range(nseeds):
        i = seeds[a]
        cmp = comp[i]
        for t in range(comp_start[cmp], comp_start[cmp + 1]):
            j = comp_items[t]
            if assigned[j] < 0:
                assigned[j] = k
                members[count] = j
                count += 1
    return count


# ---------------------------------------------------------------- forward recursion

def forward_recursion(const double[::1] px, const double[::1] py, const double[::1] spin, const long[::1] labels,
                      const cnp.uint8_t[::1] boundary, const long[::1] comp, const long[::1] comp_start, const long[::1] comp_items,
                      int gkind, const double[:, ::1] table, bint additive, double rod_half,
                      double n, double plateau, double coef, double n23, double delta, double eps, double c_K,
                      double ox, double oy, double cs, long ncx, long ncy,
                      const long[::1] cell_start, const long[::1] cell_items):
    cdef long N = px.shape[0]
    cdef Geom g
    g.gkind = gkind
    g.table = &table[0, 0]
    g.tdim = table.shape[1]
    g.additive = additive
    g.rod_half = rod_half
    cdef Cells cells
    cells.ox = ox
    cells.oy = oy
    cells.cs = cs
    cells.ncx = ncx
    cells.ncy = ncy
    cells.start = &cell_start[0]
    cells.items = &cell_items[0]

    assigned_a = np.full(N, -1, dtype=np.int64)
    val_a = np.zeros(N, dtype=np.float64)
    piece_a = np.zeros(N, dtype=np.int8)
    src_a = np.full(N, -1, dtype=np.int64)
    inp_a = np.zeros(N, dtype=np.uint8)
    members_a = np.zeros(N + 1, dtype=np.int64)
    p_a = np.zeros(N + 1, dtype=np.int64)
    cdef long[::1] assigned = assigned_a
    cdef double[::1] val = val_a
    cdef cnp.int8_t[::1] piece = piece_a
    cdef long[::1] src = src_a
    cdef cnp.uint8_t[::1] in_p = inp_a
    cdef long[::1] members = members_a
    cdef long[::1] P = p_a
    taus = [0.0]

    cdef long i, j, k, t, cnt, nP, remaining, a, cx, cy, ci, cj, cell
    cdef double floor_v = INFINITY, hbound = delta * eps, s, h, slope, d, cand, v, tau
    cdef long mstar = -1
    cdef Heap heap
    _heap_init(&heap, 2 * N + 16)

    for i in range(N):
        val[i] = _shift(_supn(px[i], py[i]), n, plateau, coef, n23)

    # cluster 0: components of the boundary particles
    nP = 0
    for i in range(N):
        if boundary[i]:
            P[nP] = i
            nP += 1
    k = 0
    tau = 0.0
    try:
        while True:
            cnt = _take(&P[0], nP, k, &assigned[0], &comp[0], &comp_start[0], &comp_items[0], &members[0])
            if k == 0:
                remaining = N - cnt
            else:
                remaining -= cnt
                taus.append(tau)
            for a in range(cnt):
                i = members[a]
                s = _supn(px[i], py[i]) - c_K
                if s < 0.0:
                    s = 0.0
                h = fabs(_shift(s, n, plateau, coef, n23) - tau)
                if h > hbound:
                    if mstar < 0:
                        mstar = k
                    if tau < floor_v:
                        floor_v = tau
                    continue
                slope = h / eps
                cx = <long> floor((px[i] - cells.ox) / cells.cs)
                cy = <long> floor((py[i] - cells.oy) / cells.cs)
                for ci in range(cx - 1, cx + 2):
                    if ci < 0 or ci >= cells.ncx:
                        continue
                    for cj in range(cy - 1, cy + 2):
                        if cj < 0 or cj >= cells.ncy:
                            continue
                        cell = ci * cells.ncy + cj
                        for t in range(cells.start[cell], cells.start[cell + 1]):
                            j = cells.items[t]
                            if assigned[j] >= 0:
                                continue
                            d = _dk(&g, px[i], py[i], spin[i], labels[i], px[j], py[j], spin[j], labels[j])
                            if d < eps:
                                cand = tau + slope * d
                                if cand < val[j]:
                                    val[j] = cand
                                    piece[j] = 1
                                    src[j] = i
                                    if k > 0:
                                        _heap_push(&heap, cand, j)
            if k == 0:
                for i in range(N):
                    if assigned[i] < 0:
                        _heap_push(&heap, val[i], i)
            if remaining <= 0:
                break
            k += 1
            while heap.size > 0 and (assigned[heap.idx[0]] >= 0 or heap.val[0] != val[heap.idx[0]]):
                _heap_pop(&heap)
            v = heap.val[0] if heap.size > 0 else INFINITY
            nP = 0
            if floor_v <= v:
                tau = floor_v
                for i in range(N):
                    if assigned[i] < 0:
                        P[nP] = i
                        nP += 1
                        in_p[i] = 1
                        if val[i] > tau:
                            val[i] = tau
                            piece[i] = 2
                            src[i] = -1
            else:
                tau = v
                while heap.size > 0 and heap.val[0] == v:
                    i = heap.idx[0]
                    _heap_pop(&heap)
                    if assigned[i] < 0 and val[i] == v and not in_p[i]:
                        P[nP] = i
                        nP += 1
                        in_p[i] = 1
    finally:
        _heap_free(&heap)
    if mstar < 0:
        mstar = k
    for i in range(N):
        if not in_p[i]:
            piece[i] = -1
            src[i] = -1
    return assigned_a, np.array(taus, dtype=np.float64), inp_a, piece_a, src_a, int(mstar)


# ---------------------------------------------------------------- inverse recursion

cdef inline double _phi(double c, double qx, double qy, double sgn, double n, double plateau, double coef,
                        double n23, Geom *g, double ax, double ay, double sa, long la, double sj, long lj,
                        double tau, double slope, double eps, bint use_m) nogil:
    cdef double zx = qx - sgn * c, v, d, m
    v = _shift(_supn(zx, qy), n, plateau, coef, n23)
    if use_m:
        d = _dk(g, ax, ay, sa, la, zx, qy, sj, lj)
        if d < eps:
            m = tau + slope * d
            if m < v:
                v = m
    return v - c


cdef double _solve(double lo, double hi, double qx, double qy, double sgn, double n, double plateau, double coef,
                   double n23, Geom *g, double ax, double ay, double sa, long la, double sj, long lj,
                   double tau, double slope, double eps, bint use_m) nogil:
    cdef double mid
    while True:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            return lo
        if _phi(mid, qx, qy, sgn, n, plateau, coef, n23, g, ax, ay, sa, la, sj, lj, tau, slope, eps, use_m) >= 0.0:
            lo = mid
        else:
            hi = mid


def inverse_recursion(const double[::1] qx, const double[::1] qy, const double[::1] spin, const long[::1] labels,
                      const cnp.uint8_t[::1] boundary, const long[::1] comp, const long[::1] comp_start, const long[::1] comp_items,
                      int gkind, const double[:, ::1] table, bint additive, double rod_half,
                      double n, double plateau, double coef, double n23, double delta, double eps, double c_K,
                      double sgn, double ox, double oy, double cs, long ncx, long ncy,
                      const long[::1] cell_start, const long[::1] cell_items):
    cdef long N = qx.shape[0]
    cdef Geom g
    g.gkind = gkind
    g.table = &table[0, 0]
    g.tdim = table.shape[1]
    g.additive = additive
    g.rod_half = rod_half

    assigned_a = np.full(N, -1, dtype=np.int64)
    val_a = np.zeros(N, dtype=np.float64)
    flag_a = np.zeros(N, dtype=np.uint8)
    members_a = np.zeros(N + 1, dtype=np.int64)
    p_a = np.zeros(N + 1, dtype=np.int64)
    cdef long[::1] assigned = assigned_a
    cdef double[::1] val = val_a
    cdef cnp.uint8_t[::1] flag = flag_a
    cdef long[::1] members = members_a
    cdef long[::1] P = p_a
    taus = [0.0]

    cdef long i, j, k, t, cnt, nP, remaining = 0, a, cx, cy, ci, cj, cell
    cdef double floor_v = INFINITY, hbound = delta * eps, s, h, slope, cur, ftau, new, v, tau, ax, ay
    cdef Heap heap
    _heap_init(&heap, 2 * N + 16)

    for i in range(N):
        if boundary[i]:
            continue
        if _phi(plateau, qx[i], qy[i], sgn, n, plateau, coef, n23, &g, 0.0, 0.0, 0.0, 0, 0.0, 0, 0.0, 0.0, eps, False) >= 0.0:
            val[i] = plateau
        elif _phi(0.0, qx[i], qy[i], sgn, n, plateau, coef, n23, &g, 0.0, 0.0, 0.0, 0, 0.0, 0, 0.0, 0.0, eps, False) <= 0.0:
            val[i] = 0.0
        else:
            val[i] = _solve(0.0, plateau, qx[i], qy[i], sgn, n, plateau, coef, n23, &g,
                            0.0, 0.0, 0.0, 0, 0.0, 0, 0.0, 0.0, eps, False)

    nP = 0
    for i in range(N):
        if boundary[i]:
            P[nP] = i
            nP += 1
    k = 0
    tau = 0.0
    try:
        while True:
            cnt = _take(&P[0], nP, k, &assigned[0], &comp[0], &comp_start[0], &comp_items[0], &members[0])
            if k == 0:
                remaining = N - cnt
            else:
                remaining -= cnt
                taus.append(tau)
            for a in range(cnt):
                i = members[a]
                ax = qx[i] - sgn * tau
                ay = qy[i]
                s = _supn(ax, ay) - c_K
                if s < 0.0:
                    s = 0.0
                h = fabs(_shift(s, n, plateau, coef, n23) - tau)
                if h > hbound:
                    if tau < floor_v:
                        floor_v = tau
                    continue
                slope = h / eps
                cx = <long> floor((ax - ox) / cs)
                cy = <long> floor((ay - oy) / cs)
                for ci in range(cx - 1, cx + 2):
                    if ci < 0 or ci >= ncx:
                        continue
                    for cj in range(cy - 1, cy + 2):
                        if cj < 0 or cj >= ncy:
                            continue
                        cell = ci * ncy + cj
                        for t in range(cell_start[cell], cell_start[cell + 1]):
                            j = cell_items[t]
                            if assigned[j] >= 0:
                                continue
                            cur = val[j]
                            if _phi(cur, qx[j], qy[j], sgn, n, plateau, coef, n23, &g, ax, ay, spin[i], labels[i],
                                    spin[j], labels[j], tau, slope, eps, True) >= 0.0:
                                continue
                            ftau = _phi(tau, qx[j], qy[j], sgn, n, plateau, coef, n23, &g, ax, ay, spin[i],
                                        labels[i], spin[j], labels[j], tau, slope, eps, True)
                            if ftau == 0.0:
                                new = tau
                            elif ftau > 0.0:
                                new = _solve(tau, cur, qx[j], qy[j], sgn, n, plateau, coef, n23, &g, ax, ay,
                                             spin[i], labels[i], spin[j], labels[j], tau, slope, eps, True)
                            else:
                                new = _solve(0.0, cur, qx[j], qy[j], sgn, n, plateau, coef, n23, &g, ax, ay,
                                             spin[i], labels[i], spin[j], labels[j], tau, slope, eps, True)
                            if new < val[j]:
                                val[j] = new
                                if k > 0:
                                    _heap_push(&heap, new, j)
            if k == 0:
                for i in range(N):
                    if assigned[i] < 0:
                        _heap_push(&heap, val[i], i)
            if remaining <= 0:
                break
            k += 1
            while heap.size > 0 and (assigned[heap.idx[0]] >= 0 or heap.val[0] != val[heap.idx[0]]):
                _heap_pop(&heap)
            v = heap.val[0] if heap.size > 0 else INFINITY
            nP = 0
            if floor_v <= v:
                tau = floor_v
                for i in range(N):
                    if assigned[i] < 0:
                        P[nP] = i
                        nP += 1
            else:
                tau = v
                while heap.size > 0 and heap.val[0] == v:
                    i = heap.idx[0]
                    _heap_pop(&heap)
                    if assigned[i] < 0 and val[i] == v and not flag[i]:
                        flag[i] = 1
                        P[nP] = i
                        nP += 1
    finally:
        _heap_free(&heap)
    return assigned_a, np.array(taus, dtype=np.float64)


# ---------------------------------------------------------------- hard-core MCMC

cdef inline double _spin_from(double u, int code, long q, double lo, double hi) nogil:
    cdef double v
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


cdef struct Grid:
    double cs
    double ox
    long nc
    long *head
    long *nxt
    long *prv
    long *cell


cdef inline long _grid_cell(Grid *gr, double x, double y) nogil:
    cdef long cx = <long> floor((x - gr.ox) / gr.cs)
    cdef long cy = <long> floor((y - gr.ox) / gr.cs)
    if cx < 0 or cy < 0 or cx >= gr.nc or cy >= gr.nc:
        return -1
    return cx * gr.nc + cy


cdef inline void _grid_insert(Grid *gr, long slot, double x, double y) nogil:
    cdef long c = _grid_cell(gr, x, y), h
    gr.cell[slot] = c
    if c < 0:
        return
    h = gr.head[c]
    gr.nxt[slot] = h
    gr.prv[slot] = -1
    if h >= 0:
        gr.prv[h] = slot
    gr.head[c] = slot


cdef inline void _grid_remove(Grid *gr, long slot) nogil:
    cdef long c = gr.cell[slot], p, q
    if c < 0:
        return
    p = gr.prv[slot]
    q = gr.nxt[slot]
    if p >= 0:
        gr.nxt[p] = q
    else:
        gr.head[c] = q
    if q >= 0:
        gr.prv[q] = p
    gr.cell[slot] = -1


cdef bint _blocked(Grid *gr, Geom *g, bint disc, long cap, double x, double y, double s, long skip,
                   double *px, double *py, double *ps, double *bx, double *by, double *bs) nogil:
    cdef long ls = <long> s if disc else 0
    cdef long c = _grid_cell(gr, x, y)
    cdef long cx = c // gr.nc, cy = c % gr.nc, i, j, t, b
    cdef bint hit
    for i in range(cx - 1, cx + 2):
        if i < 0 or i >= gr.nc:
            continue
        for j in range(cy - 1, cy + 2):
            if j < 0 or j >= gr.nc:
                continue
            t = gr.head[i * gr.nc + j]
            while t >= 0:
                if t != skip:
                    if t < cap:
                        hit = _overlap(g, x, y, s, ls, px[t], py[t], ps[t], (<long> ps[t]) if disc else 0)
                    else:
                        b = t - cap
                        hit = _overlap(g, x, y, s, ls, bx[b], by[b], bs[b], (<long> bs[b]) if disc else 0)
                    if hit:
                        return True
                t = gr.nxt[t]
    return False


def mcmc_hardcore(double[::1] px, double[::1] py, double[::1] ps, long n_cur,
                  const double[::1] bx, const double[::1] by, const double[::1] bs,
                  int gkind, const double[:, ::1] table, bint additive, double rod_half, bint disc,
                  double half, double z, double p_birth, double p_death, double sigma,
                  int code, long q, double lo, double hi,
                  double[:, ::1] unif, double[:, ::1] gauss, double cs, long[::1] counts):
    cdef long cap = px.shape[0], nb = bx.shape[0], steps = unif.shape[0], step, i, last, b
    cdef double area = (2.0 * half) * (2.0 * half), u0, u1, u2, u3, u4, x, y, s
    cdef bint use_grid = cs > 0.0
    cdef Geom g
    g.gkind = gkind
    g.table = &table[0, 0]
    g.tdim = table.shape[1]
    g.additive = additive
    g.rod_half = rod_half
    cdef Grid gr
    cdef double dummy = 0.0
    cdef double *pbx = &bx[0] if nb > 0 else &dummy
    cdef double *pby = &by[0] if nb > 0 else &dummy
    cdef double *pbs = &bs[0] if nb > 0 else &dummy
    head_a = nxt_a = prv_a = cell_a = None
    cdef long[::1] head, nxt, prv, cellv
    if use_grid:
        gr.cs = cs
        gr.ox = -half - cs
        gr.nc = <long> floor(2.0 * (half + cs) / cs) + 1
        head_a = np.full(gr.nc * gr.nc, -1, dtype=np.int64)
        nxt_a = np.full(cap + nb, -1, dtype=np.int64)
        prv_a = np.full(cap + nb, -1, dtype=np.int64)
        cell_a = np.full(cap + nb, -1, dtype=np.int64)
        head = head_a
        nxt = nxt_a
        prv = prv_a
        cellv = cell_a
        gr.head = &head[0]
        gr.nxt = &nxt[0]
        gr.prv = &prv[0]
        gr.cell = &cellv[0]
        for i in range(n_cur):
            _grid_insert(&gr, i, px[i], py[i])
        for b in range(nb):
            _grid_insert(&gr, cap + b, bx[b], by[b])
    for step in range(steps):
        u0 = unif[step, 0]
        u1 = unif[step, 1]
        u2 = unif[step, 2]
        u3 = unif[step, 3]
        u4 = unif[step, 4]
        if u0 < p_birth:
            if n_cur == cap:
                return n_cur, step
            counts[0] += 1
            x = -half + 2.0 * half * u1
            y = -half + 2.0 * half * u2
            s = _spin_from(u3, code, q, lo, hi)
            if use_grid and _blocked(&gr, &g, disc, cap, x, y, s, -1, &px[0], &py[0], &ps[0], pbx, pby, pbs):
                continue
            if u4 < z * area / (n_cur + 1):
                px[n_cur] = x
                py[n_cur] = y
                ps[n_cur] = s
                if use_grid:
                    _grid_insert(&gr, n_cur, x, y)
                n_cur += 1
                counts[1] += 1
        elif u0 < p_birth + p_death:
            counts[2] += 1
            if n_cur == 0:
                continue
            i = <long> (u1 * n_cur)
            if u4 < n_cur / (z * area):
                last = n_cur - 1
                if use_grid:
                    _grid_remove(&gr, i)
                    if i != last:
                        _grid_remove(&gr, last)
                if i != last:
                    px[i] = px[last]
                    py[i] = py[last]
                    ps[i] = ps[last]
                    if use_grid:
                        _grid_insert(&gr, i, px[i], py[i])
                n_cur = last
                counts[3] += 1
        else:
            counts[4] += 1
            if n_cur == 0:
                continue
            i = <long> (u1 * n_cur)
            x = px[i] + sigma * gauss[step, 0]
            y = py[i] + sigma * gauss[step, 1]
            s = _spin_from(u3, code, q, lo, hi) if u2 < 0.5 else ps[i]
            if x < -half or x > half or y < -half or y > half:
                continue
            if use_grid and _blocked(&gr, &g, disc, cap, x, y, s, i, &px[0], &py[0], &ps[0], pbx, pby, pbs):
                continue
            if use_grid:
                _grid_remove(&gr, i)
            px[i] = x
            py[i] = y
            ps[i] = s
            if use_grid:
                _grid_insert(&gr, i, x, y)
            counts[5] += 1
    return n_cur, steps
