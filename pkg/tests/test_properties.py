"""Randomised checks of the transformation properties on arbitrary (not necessarily Gibbsian) configurations."""

import numpy as np
import pytest
from hypothesis import HealthCheck, assume, given, settings
from hypothesis import strategies as st

from gibbs_shift.core import MarkedConfiguration, Window
from gibbs_shift.potential import Ideal, gamma_for, smooth_decompose
from gibbs_shift.properties import CheckOutcome, check_configuration, check_equal_shift, check_lipschitz
from gibbs_shift.transform import build_transform

from conftest import KERNELS, params_for, random_config

SETTINGS = settings(max_examples=40, deadline=None, suppress_health_check=[HealthCheck.function_scoped_fixture])


@SETTINGS
@given(seed=st.integers(0, 2**32 - 1), n=st.sampled_from([4.0, 8.0, 16.0]), count=st.integers(0, 150),
       edges_p=st.sampled_from([0.0, 0.2, 0.6]), c=st.sampled_from([0.0, 0.02, 0.05, 0.1]),
       delta=st.sampled_from([0.1, 0.25, 0.5]), which=st.sampled_from(["disks", "wr", "rods"]),
       kernel=st.sampled_from(KERNELS))
def test_random_configurations_pass_all_checks(request, seed, n, count, edges_p, c, delta, which, kernel):
    # relaxed mode needs the proposal slope 3c/(n^(2/3) sqrt(log n)) to be at most delta
    assume(3 * c / (n ** (2 / 3) * np.sqrt(np.log(n))) <= delta)
    decomp = request.getfixturevalue(which)
    rng = np.random.default_rng(seed)
    p = params_for(decomp, n=n, c=c, delta=delta, direction=int(rng.choice([1, -1])))
    cfg = random_config(rng, decomp, n, count, edges_p=edges_p)
    out, res = check_configuration(cfg, p, decomp, kernel, symmetry=True)
    assert out.ok, out.violations
    assert np.all(res.shift >= 0) and np.all(res.shift <= p.plateau)


@SETTINGS
@given(seed=st.integers(0, 2**32 - 1), count=st.integers(1, 60))
def test_dense_clumps_pass_all_checks(disks, seed, count):
    """Particles packed around a few centres: long K_eps chains and many ties with the boundary."""
    rng = np.random.default_rng(seed)
    n = 4.0
    centres = rng.uniform(-n - 1, n + 1, size=(3, 2))
    pos = centres[rng.integers(0, 3, count)] + rng.normal(scale=0.6, size=(count, 2))
    cfg = MarkedConfiguration(Window(n), np.arange(count) + 1, pos)
    out, _ = check_configuration(cfg, params_for(disks, n=n, c=0.1, delta=0.5), disks, symmetry=True)
    assert out.ok, out.violations


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), count=st.integers(0, 100))
def test_ideal_model_is_always_plateau_inside(seed, count):
    d = smooth_decompose(Ideal(), gamma_for(0.5, 1.0))
    rng = np.random.default_rng(seed)
    n = 8.0
    pos = rng.uniform(-2.0, 2.0, size=(count, 2))
    cfg = MarkedConfiguration(Window(n), np.arange(count), pos)
    p = params_for(d, n=n)
    res = build_transform(cfg, p, d)
    assert np.all(res.shift == p.plateau)


def test_checks_detect_tampering(disks):
    """The checks are not vacuous: a hand-edited shift vector is caught."""
    p = params_for(disks, n=8.0, c=0.1)
    step = disks.c_K - disks.eps + p.eps / 3
    pos = np.array([[0.0, 0.0], [step, 0.0]])
    cfg = MarkedConfiguration(Window(8.0), [1, 2], pos, edges=[(1, 2)])
    res = build_transform(cfg, p, disks)
    res.taus = np.array([0.0, res.taus[1], 0.0])
    res.cluster_of = np.array([1, 2])
    out = CheckOutcome()
    check_equal_shift(cfg, res, disks, out)
    assert "T4" in out.violations
    cfg2 = MarkedConfiguration(Window(8.0), [1, 2], [[0.0, 3.0], [0.05, 3.0]])
    res2 = build_transform(cfg2, p, disks)
    res2.taus = np.array([0.0, p.plateau, 0.0])
    res2.cluster_of = np.array([1, 2])
    out2 = CheckOutcome()
    check_lipschitz(cfg2, res2, p, out2)
    assert "T5" in out2.violations


@pytest.mark.parametrize("which", ["disks", "wr", "rods"])
def test_shifts_never_exceed_plateau(request, which):
    decomp = request.getfixturevalue(which)
    rng = np.random.default_rng(12)
    p = params_for(decomp, n=16.0)
    res = build_transform(random_config(rng, decomp, 16.0, 200, edges_p=0.3), p, decomp)
    assert res.shift.max() <= p.plateau and res.shift.min() >= 0
