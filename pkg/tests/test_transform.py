import math

import numpy as np
import pytest

from gibbs_shift.core import MarkedConfiguration, Particle, SpinKind, Window
from gibbs_shift.potential import Well, gamma_for, smooth_decompose
from gibbs_shift.properties import check_configuration
from gibbs_shift.transform import (TransformParams, apply_transform, build_transform, diagnostics, invert_transform,
                                   is_good, jacobian_density, k_eps_pairs, profile_at, shift_proposal, slowdown,
                                   transform)

from conftest import KERNELS, chain_config, params_for, random_config


# ---------------------------------------------------------------- proposal

@pytest.mark.parametrize("s, expected", [(100, 2.8841), (5000, 0.0), (1024, 1.4421), (4096, 0.0)])
def test_shift_proposal_examples(s, expected):
    assert shift_proposal(s, 4096, 1.0) == pytest.approx(expected, abs=1e-4)


def test_shift_proposal_is_continuous_and_monotone():
    n, c = 4096.0, 1.0
    assert shift_proposal(255.0, n, c) == c * math.sqrt(math.log(n))
    # 4096 ** (2/3) rounds just below 256, so check continuity across the corner
    assert shift_proposal(256.0, n, c) == pytest.approx(c * math.sqrt(math.log(n)), rel=1e-12)
    s = np.linspace(0, 5000, 2001)
    v = [shift_proposal(x, n, c) for x in s]
    assert all(a >= b for a, b in zip(v, v[1:]))
    with pytest.raises(ValueError):
        shift_proposal(-1.0, n, c)
    with pytest.raises(ValueError):
        shift_proposal(1.0, 1.0, c)


def test_params_validation(disks):
    with pytest.raises(ValueError):
        params_for(disks, delta=0.6)
    with pytest.raises(ValueError):
        params_for(disks, direction=0)
    with pytest.raises(ValueError):
        # slope 3c/(n^(2/3) sqrt(log n)) above delta
        params_for(disks, n=2.0, c=1.0, delta=0.1)
    with pytest.raises(ValueError):
        TransformParams(16.0, 0.05, 0.1, 0.1, 1.0, strict_mode=True)
    p = params_for(disks)
    assert p.flipped().direction == -1 and p.flipped().flipped() == p


# ---------------------------------------------------------------- slow-down

def test_slowdown_cases(disks):
    p = params_for(disks, n=64.0)
    y = Particle(1, (1.0, 0.0))
    t0 = shift_proposal(0.0, p.n, p.c)
    # h = 0: linear in d_K inside K_eps, infinite outside
    near = Particle(2, (1.0 + disks.c_K - disks.eps + p.eps / 2, 0.0))
    d = float(disks.dK(1.0, 0.0, 0.0, near.x[0], 0.0, 0.0))
    assert 0 < d < p.eps
    assert slowdown(y, t0, near, p, disks) == t0
    assert slowdown(y, t0, Particle(3, (9.0, 0.0)), p, disks) == math.inf
    # small h: slope h / eps
    tau = t0 - p.delta * p.eps / 2
    assert slowdown(y, tau, near, p, disks) == pytest.approx(tau + (t0 - tau) / p.eps * d, rel=1e-12)
    # large h: the floor
    assert slowdown(y, 0.0, Particle(3, (9.0, 0.0)), p, disks) == 0.0
    with pytest.raises(ValueError):
        slowdown(y, -1.0, near, p, disks)


# ---------------------------------------------------------------- recursion examples

def test_single_particle_gets_plateau(disks, kernel):
    cfg = MarkedConfiguration(Window(16.0), [1], [[1.0, 0.0]])
    p = params_for(disks)
    res = build_transform(cfg, p, disks, kernel)
    assert res.shift[0] == p.plateau and res.m == 1 and res.piece[0] == 0
    assert res.theta == 1.0


def test_single_particle_on_slope_theta(disks, kernel):
    n, s = 64.0, 30.0
    p = params_for(disks, n=n)
    cfg = MarkedConfiguration(Window(n), [1], [[s, 0.0]])
    res = build_transform(cfg, p, disks, kernel)
    assert res.shift[0] == pytest.approx(p.coef * math.log(n / s), rel=1e-15)
    assert res.theta == pytest.approx(1 - 3 * p.c / (s * math.sqrt(math.log(n))), rel=1e-12)
    assert res.theta_for(-1) == pytest.approx(1 + 3 * p.c / (s * math.sqrt(math.log(n))), rel=1e-12)
    # mirrored particle: derivative changes sign
    res2 = build_transform(MarkedConfiguration(Window(n), [1], [[-s, 0.0]]), p, disks, kernel)
    assert res2.theta == pytest.approx(res.theta_for(-1), rel=1e-12)


def test_all_outside_is_identity(disks, kernel):
    cfg = MarkedConfiguration(Window(4.0), [1, 2, 3], [[5.0, 0.0], [0.0, -6.0], [4.5, 4.5]])
    p = params_for(disks, n=4.0, c=0.01)
    img, res = transform(cfg, p, disks, kernel)
    assert np.all(res.shift == 0.0) and img == cfg
    assert invert_transform(cfg, p, disks, kernel) == cfg


def test_empty_configuration(disks, kernel):
    cfg = MarkedConfiguration.empty(Window(8.0))
    p = params_for(disks, n=8.0)
    img, res = transform(cfg, p, disks, kernel)
    assert len(img) == 0 and res.m == 0 and res.theta == 1.0
    assert is_good(cfg, p, disks).good


def test_edge_pair_shares_the_smaller_shift(disks, kernel):
    n = 64.0
    p = params_for(disks, n=n)
    cfg = MarkedConfiguration(Window(n), [1, 2], [[1.0, 0.0], [30.0, 0.0]], edges=[(1, 2)])
    res = build_transform(cfg, p, disks, kernel)
    assert res.shift[0] == res.shift[1] == pytest.approx(p.coef * math.log(n / 30.0))
    assert list(res.in_p) == [0, 1]
    assert res.jacobian_factors == {2: pytest.approx(1 - p.coef / 30.0)}


def test_ties_put_several_points_in_one_step(disks, kernel):
    p = params_for(disks)
    pos = [[1.0, 0.0], [0.0, -2.0], [-3.0, 3.0], [5.0, 5.0]]
    cfg = MarkedConfiguration(Window(16.0), [1, 2, 3, 4], pos)
    res = build_transform(cfg, p, disks, kernel)
    assert res.m == 1 and np.all(res.cluster_of == 1) and np.all(res.in_p == 1)
    assert np.all(res.shift == p.plateau)
    assert res.clusters[1] == ({1, 2, 3, 4}, p.plateau)


def test_boundary_neighbour_slows_the_interior(disks, kernel):
    """A particle in contact range of a boundary particle is slowed towards 0."""
    n = 16.0
    p = params_for(disks, n=n)
    gap = disks.c_K - disks.eps + p.eps / 4
    cfg = MarkedConfiguration(Window(n), [1, 2], [[n + 0.01, 0.0], [n + 0.01 - gap, 0.0]])
    res = build_transform(cfg, p, disks, kernel)
    d = float(disks.dK(n + 0.01, 0.0, 0.0, n + 0.01 - gap, 0.0, 0.0))
    h0 = res.h_values[0]
    if h0 <= p.delta * p.eps:
        assert res.piece[1] == 1 and res.src[1] == 0
        assert res.shift[1] == pytest.approx(h0 / p.eps * d, rel=1e-12)
    else:
        assert res.piece[1] == 2 and res.shift[1] == 0.0
    assert res.shift[0] == 0.0


def test_apply_rejects_mismatched_result(disks):
    p = params_for(disks)
    a = MarkedConfiguration(Window(16.0), [1], [[1.0, 0.0]])
    b = MarkedConfiguration(Window(16.0), [2], [[1.0, 0.0]])
    with pytest.raises(ValueError):
        apply_transform(b, build_transform(a, p, disks))


def test_transcript_and_dict(disks):
    n = 64.0
    p = params_for(disks, n=n)
    cfg = MarkedConfiguration(Window(n), [1, 2], [[1.0, 0.0], [30.0, 0.0]], edges=[(1, 2)])
    res = build_transform(cfg, p, disks)
    tr = res.profile_transcript
    assert tr == [{"id": 2, "step": 1, "piece": "t0", "source": None, "derivative": pytest.approx(-p.coef / 30)}]
    d = res.to_dict()
    assert d["clusters"] == [[], [1, 2]] and d["m"] == 1


# ---------------------------------------------------------------- kernels, inverse, symmetry

@pytest.mark.parametrize("fixture, edges_p", [("disks", 0.0), ("wr", 0.3), ("rods", 0.3), ("disks", 0.5)])
def test_kernels_agree_and_round_trip(fixture, edges_p, request):
    decomp = request.getfixturevalue(fixture)
    rng = np.random.default_rng(17)
    for trial in range(6):
        n = float(rng.choice([8.0, 16.0]))
        p = params_for(decomp, n=n, c=0.05)
        cfg = random_config(rng, decomp, n, int(rng.integers(20, 120)), edges_p=edges_p)
        results = [build_transform(cfg, p, decomp, k) for k in KERNELS]
        for r in results[1:]:
            assert np.array_equal(r.taus, results[0].taus)
            assert np.array_equal(r.cluster_of, results[0].cluster_of)
            assert np.array_equal(r.piece, results[0].piece)
        for k in KERNELS:
            for direction in (1, -1):
                pd = p.with_direction(direction)
                img, _ = transform(cfg, pd, decomp, k)
                back = invert_transform(img, pd, decomp, k)
                assert np.max(np.abs(back.pos - cfg.pos)) <= 1e-9


def test_direction_symmetry(wr):
    rng = np.random.default_rng(4)
    p = params_for(wr, n=16.0)
    cfg = random_config(rng, wr, 16.0, 80, edges_p=0.3)
    a = build_transform(cfg, p, wr)
    b = build_transform(cfg, p.flipped(), wr)
    assert np.array_equal(a.taus, b.taus) and np.array_equal(a.cluster_of, b.cluster_of)
    out, _ = check_configuration(cfg, p, wr, symmetry=True)
    assert out.ok, out.violations


def test_profile_at_reproduces_the_recursion(rods):
    rng = np.random.default_rng(8)
    p = params_for(rods, n=16.0)
    cfg = random_config(rng, rods, 16.0, 150)
    res = build_transform(cfg, p, rods)
    for i in np.flatnonzero(res.in_p):
        k = int(res.cluster_of[i])
        val, der = profile_at(cfg, res, rods, k, cfg.pos[i], cfg.spin[i])
        assert val[0] == pytest.approx(res.taus[k], abs=1e-12)
        if res.piece[i] != 2:
            assert der[0] == pytest.approx(res.deriv[i], abs=1e-12)


# ---------------------------------------------------------------- goodness

def test_isolated_singletons_are_good(disks):
    p = params_for(disks, n=32.0)
    cfg = MarkedConfiguration(Window(32.0), [1, 2, 3], [[0.5, 0.0], [-3.0, 2.0], [4.0, -4.0]])
    assert is_good(cfg, p, disks).good


def test_edge_chain_to_far_particle_is_bad(disks):
    p = params_for(disks, n=32.0, delta=0.1)
    cfg = MarkedConfiguration(Window(32.0), [1, 2, 3], [[0.5, 0.0], [8.0, 0.0], [20.0, 0.0]],
                              edges=[(1, 2), (2, 3)])
    v = is_good(cfg, p, disks)
    assert not v.good
    y, y2, path = v.witness
    assert (y, y2) == (1, 3) and path == (1, 2, 3)
    assert v.to_dict() == {"good": False, "witness": [1, 3], "path": [1, 2, 3]}


def test_k_eps_chain_is_bad_with_valid_path(disks):
    p = params_for(disks, n=32.0, delta=0.1)
    step = disks.c_K - disks.eps + p.eps / 2
    cfg = chain_config(disks, 32.0, (0.2, 0.0), (1.0, 0.0), int(14 / step) + 1, step)
    v = is_good(cfg, p, disks)
    assert not v.good
    y, y2, path = v.witness
    pairs = {tuple(sorted((int(cfg.ids[i]), int(cfg.ids[j])))) for i, j in k_eps_pairs(cfg, disks, p.eps)}
    assert path[0] == y and path[-1] == y2
    assert all(tuple(sorted(e)) in pairs for e in zip(path, path[1:]))


# ---------------------------------------------------------------- densities and diagnostics

def test_zero_shift_gives_trivial_density_and_diagnostics(wr):
    rng = np.random.default_rng(2)
    p = params_for(wr, n=8.0, c=0.0)
    cfg = random_config(rng, wr, 8.0, 60, edges_p=0.3)
    res = build_transform(cfg, p, wr)
    assert np.all(res.shift == 0.0)
    assert jacobian_density(cfg, res, p, wr) == (1.0, 1.0)
    assert diagnostics(cfg, p, wr) == (0.0, 0.0)


def test_single_particle_diagnostics(disks):
    n, s = 64.0, 30.0
    p = params_for(disks, n=n)
    cfg = MarkedConfiguration(Window(n), [1], [[s, 0.0]])
    a = p.coef / s
    s1, s2 = diagnostics(cfg, p, disks)
    assert s1 == 0.0 and s2 == pytest.approx(abs(math.log(1 - a * a)), rel=1e-9)


def test_soft_model_density_uses_ubar():
    well = Well(0.5, 1.0, 1.0, 0.1)
    d = smooth_decompose(well, gamma_for(0.5, 1.0))
    p = TransformParams.from_decomposition(16.0, 0.05, 0.1, d)
    # one interior particle next to a fixed boundary particle: the pair energy changes under the shift
    cfg = MarkedConfiguration(Window(16.0), [1, 2], [[15.5, 0.0], [16.3, 0.5]], None, SpinKind())
    res = build_transform(cfg, p, d)
    theta, phi = jacobian_density(cfg, res, p, d, well, beta=1.0)
    new = cfg.pos[0] + [res.shift[0], 0.0]
    dh = float(d.ubar(new[0], new[1], 0.0, 16.3, 0.5, 0.0)) - float(d.ubar(15.5, 0.0, 0.0, 16.3, 0.5, 0.0))
    assert phi == pytest.approx(math.exp(-dh) * theta, rel=1e-12)
