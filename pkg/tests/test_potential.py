import math

import numpy as np
import pytest
from scipy import integrate

from gibbs_shift.core import Particle, Spin
from gibbs_shift.potential import (HardCore, HardRods, Ideal, InfeasibleError, LennardJones, ParameterError,
                                   RandomRadiiDisks, SmoothDecomposition, SoftCore, Well, WidomRowlinson, d_K,
                                   d_K_bisect, derive_constants, gamma_for, make_model, segments_intersect,
                                   smooth_decompose)


def P(i, x, y, s=0.0, kind="unit"):
    return Particle(i, (x, y), Spin(kind, s))


def test_widom_rowlinson_examples():
    m = WidomRowlinson(q=2, r=0.5)
    assert m.evaluate(P(1, 0, 0, 1, "discrete"), P(2, 0.6, 0, 2, "discrete")) == math.inf
    assert m.evaluate(P(1, 0, 0, 1, "discrete"), P(2, 0.6, 0, 1, "discrete")) == 0.0
    assert m.evaluate(P(1, 0, 0, 1, "discrete"), P(2, 1.01, 0, 2, "discrete")) == 0.0


def test_lennard_jones_at_unit_distance():
    assert LennardJones(4, 4).evaluate(P(1, 0, 0), P(2, 1, 0)) == 0.0


def test_hard_rods_collinear_overlap():
    m = HardRods(r=1)
    assert m.evaluate(P(1, 0, 0, 0, "direction"), P(2, 0, 0.1, 0, "direction")) == math.inf
    # parallel but side by side: no contact
    assert m.evaluate(P(1, 0, 0, 0, "direction"), P(2, 0.1, 0, 0, "direction")) == 0.0
    # crossing
    assert m.evaluate(P(1, 0, 0, 0, "direction"), P(2, 0.2, 0.3, math.pi / 2, "direction")) == math.inf


def test_segments_intersect_touching_endpoints():
    assert segments_intersect(0.0, 0.0, 0.0, 0.0, 2.0, 0.0, 1.0)
    assert not segments_intersect(0.0, 0.0, 0.0, 0.0, 2.0 + 1e-12, 0.0, 1.0)


def test_hard_core_and_random_radii():
    assert HardCore(1.0).pair(0, 0, 0, 0.99, 0, 0) == math.inf
    assert HardCore(1.0).pair(0, 0, 0, 1.0, 0, 0) == 0.0
    m = RandomRadiiDisks(0.5)
    assert m.pair(0, 0, 0.2, 0.45, 0, 0.3) == math.inf
    assert m.pair(0, 0, 0.2, 0.55, 0, 0.3) == 0.0


def test_hard_core_table_by_spin():
    m = HardCore([[1.0, 0.5], [0.5, 0.2]])
    assert m.spin_kind.kind == "discrete" and m.spin_kind.q == 2
    assert m.pair(0, 0, 1, 0.7, 0, 2) == 0.0
    assert m.pair(0, 0, 1, 0.7, 0, 1) == math.inf


@pytest.mark.parametrize("bad", [{"kind": "HardCore", "r0": -1}, {"kind": "Nope"}, {"kind": "Well", "r0": 1, "r1": 0.5},
                                 {"kind": "WidomRowlinson", "q": 1}, {"kind": "SoftCore", "bogus": 1}])
def test_make_model_rejects_bad_parameters(bad):
    with pytest.raises(ParameterError):
        make_model(bad)


def test_make_model_round_trips_descriptor():
    for m in (HardCore(0.5), WidomRowlinson(3, 0.4), SoftCore(1, 1), Well(0.5, 1, 1, 0.1), LennardJones(4, 4),
              HardRods(0.5), RandomRadiiDisks(0.3), Ideal()):
        assert make_model(m.descriptor()).descriptor() == m.descriptor()


# ---------------------------------------------------------------- decomposition

def test_rods_trivial_decomposition():
    d = smooth_decompose(HardRods(1.0), 0.2)
    rng = np.random.default_rng(0)
    x = rng.uniform(-3, 3, (200, 2))
    a = rng.uniform(0, np.pi, 200)
    assert np.all(d.u_small(0.0, 0.0, 0.3, x[:, 0], x[:, 1], a) == 0)
    assert np.all(d.psi(0.0, 0.0, 0.3, x[:, 0], x[:, 1], a) == 0)
    off = ~d.K_core(0.0, 0.0, 0.3, x[:, 0], x[:, 1], a)
    assert np.all(d.ubar(0.0, 0.0, 0.3, x[off, 0], x[off, 1], a[off]) == 0)
    assert np.array_equal(d.K_core(0.0, 0.0, 0.3, x[:, 0], x[:, 1], a), HardRods(1.0).core(0.0, 0.0, 0.3, x[:, 0], x[:, 1], a))


def test_hard_core_decomposition():
    gamma = 0.1
    d = smooth_decompose(HardCore(1.0), gamma)
    e0 = d.eps0
    assert e0 > 0 and 2 * e0 * math.pi + e0 ** 2 * math.pi < gamma
    assert float(d.k_radius(0.0, 0.0)) == 1.0 + e0
    r = np.linspace(1 + e0, 5, 50)
    assert np.all(d.u_small(0.0, 0.0, 0.0, r, 0.0, 0.0) == 0)
    assert np.all(d.ubar(0.0, 0.0, 0.0, r, 0.0, 0.0) == 0)


def test_soft_core_u_is_small():
    gamma = gamma_for(0.5, 1.0)
    d = smooth_decompose(SoftCore(1.0, 1.0), gamma)
    rk = float(d.k_radius(0.0, 0.0))
    pts = sorted({rk, 1.0, d.u_range})
    f = lambda r: 2 * math.pi * r * min(float(d.u_radial(r)), 1.0)
    total = sum(integrate.quad(f, a, b, limit=200)[0] for a, b in zip(pts[:-1], pts[1:]))
    assert total < gamma


def test_decomposition_identity_off_core():
    """U = Ubar - u wherever u > 0, and u >= 0 everywhere."""
    for m in (SoftCore(1.0, 1.0), Well(0.5, 1.0, 1.0, 0.1)):
        d = smooth_decompose(m, gamma_for(0.5, 1.0))
        r = np.linspace(float(d.k_radius(0.0, 0.0)) + 1e-6, 3.0, 4001)
        u = d.u_small(0.0, 0.0, 0.0, r, 0.0, 0.0)
        ub = d.ubar(0.0, 0.0, 0.0, r, 0.0, 0.0)
        U = m.pair(0.0, 0.0, 0.0, r, 0.0, 0.0)
        assert np.all(u >= 0)
        assert np.all(ub - U >= -1e-12)
        assert np.allclose(U, ub - u, atol=1e-12)


@pytest.mark.parametrize("s, expected", [(1.0, 0.0), (2.5, 1.5)])
def test_dK_radial(s, expected):
    d = SmoothDecomposition(HardCore(1.0), 0.5, 0.0, 0.1, 0.0)
    assert d_K(d, P(1, 0, 0), P(2, s, 0)) == pytest.approx(expected, abs=1e-15)


def test_dK_rods_example():
    d = smooth_decompose(HardRods(1.0), 0.3)
    assert float(d.dK(0.0, 0.0, 0.0, 0.0, 3.0, 0.0)) == pytest.approx(1.0, abs=1e-12)


def test_dK_rods_matches_bisection():
    m = HardRods(1.0)
    d = smooth_decompose(m, 0.3)
    rng = np.random.default_rng(5)
    for _ in range(8):
        x2, y2 = rng.uniform(-2.5, 2.5, 2)
        a1, a2 = rng.uniform(0, np.pi, 2)
        ref = d_K_bisect(m.core, 0.0, 0.0, a1, x2, y2, a2, reach=6.0)
        assert float(d.dK(0.0, 0.0, a1, x2, y2, a2)) == pytest.approx(ref, abs=1e-6)


def test_dK_radial_matches_bisection():
    m = WidomRowlinson(2, 0.5)
    d = SmoothDecomposition(m, 0.5, 0.0, 0.1, 0.0)
    assert float(d.dK(0.0, 0.0, 1, 1.7, 0.4, 2)) == pytest.approx(
        d_K_bisect(m.core, 0.0, 0.0, 1, 1.7, 0.4, 2, reach=3.0), abs=1e-6)


def test_dK_gradient_matches_finite_difference():
    for d in (smooth_decompose(HardRods(1.0), 0.3), smooth_decompose(HardCore(0.5), 0.3)):
        rng = np.random.default_rng(9)
        for _ in range(20):
            x2, y2 = rng.uniform(-3, 3, 2)
            a1, a2 = rng.uniform(0, np.pi, 2) if not d.model.radial else (0.0, 0.0)
            if float(d.dK(0.0, 0.0, a1, x2, y2, a2)) == 0.0:
                continue
            h = 1e-7
            fd = (float(d.dK(0.0, 0.0, a1, x2 + h, y2, a2)) - float(d.dK(0.0, 0.0, a1, x2 - h, y2, a2))) / (2 * h)
            assert float(d.dK_grad_x(0.0, 0.0, a1, x2, y2, a2)) == pytest.approx(fd, abs=1e-6)


def test_ideal_model_has_empty_core():
    d = smooth_decompose(Ideal(), 0.5)
    assert d.empty_core and d.c_K == 0.0
    assert float(d.dK(0.0, 0.0, 0.0, 0.0, 0.0, 0.0)) == math.inf
    c = derive_constants(d, 0.5, 1.0)
    assert c.c_u == 0.0


# ---------------------------------------------------------------- derived constants

def test_trivial_decomposition_constants():
    d = SmoothDecomposition(HardCore(1.0), 1.0, 0.0, 0.1, 0.0)
    c = derive_constants(d, xi=1.0, beta=1.0)
    assert c.c_psi == 0.0
    assert c.c_u == pytest.approx(math.pi * (1.1 ** 2 - 1.0), abs=1e-12)
    assert c.c_u == pytest.approx(0.6597, abs=1e-4)
    with pytest.raises(InfeasibleError):
        derive_constants(d, xi=2.0, beta=1.0)
    c2 = derive_constants(d, xi=2.0, beta=1.0, check=False)
    assert c2.c_u == pytest.approx(1.3195, abs=1e-4) and not c2.feasible


def test_hard_core_c_u_is_indicator_area():
    d = smooth_decompose(HardCore(0.5), gamma_for(0.5, 1.0))
    c = derive_constants(d, 0.5, 1.0)
    ro = 0.5 + d.eps0 + d.eps
    assert c.c_u == pytest.approx(0.5 * math.pi * (ro ** 2 - 0.25), rel=1e-12)


def test_rods_constants_feasible():
    d = smooth_decompose(HardRods(0.5), gamma_for(0.5, 1.0))
    c = derive_constants(d, 0.5, 1.0)
    assert 0 < c.c_u < 1 and c.c_psi == 0
    assert c.c_u == pytest.approx(0.5 * (8 * 0.5 * d.eps + math.pi * d.eps ** 2))


def test_lennard_jones_decomposition_feasible():
    d = smooth_decompose(LennardJones(4, 4), gamma_for(0.5, 1.0))
    c = derive_constants(d, 0.5, 1.0)
    assert c.feasible and c.c_u < 1
    assert d.c_K > 0
