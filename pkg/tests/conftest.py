import math

import numpy as np
import pytest

from gibbs_shift import kernels
from gibbs_shift.core import MarkedConfiguration, SpinKind, Window
from gibbs_shift.potential import HardCore, HardRods, WidomRowlinson, gamma_for, smooth_decompose
from gibbs_shift.transform import TransformParams

KERNELS = ["python"] + (["cython"] if kernels.compiled_kernels is not None else [])


@pytest.fixture(params=KERNELS)
def kernel(request):
    return request.param


@pytest.fixture(scope="session")
def disks():
    return smooth_decompose(HardCore(0.5), gamma_for(0.5, 1.0))


@pytest.fixture(scope="session")
def wr():
    return smooth_decompose(WidomRowlinson(2, 0.5), gamma_for(0.5, 1.0))


@pytest.fixture(scope="session")
def rods():
    return smooth_decompose(HardRods(0.5), gamma_for(0.5, 1.0))


def params_for(decomp, n=16.0, c=0.05, delta=0.1, direction=1):
    return TransformParams.from_decomposition(n, c, delta, decomp, direction)


def random_config(rng, decomp, n, count, pad=2.0, edges_p=0.0, spacing=None):
    """Random positions in the padded window, with spins of the model's kind and optional random edges
    between close pairs. Hard-core overlaps are allowed: the transform does not look at U."""
    kind = decomp.model.spin_kind
    half = n + pad
    pos = rng.uniform(-half, half, size=(count, 2))
    if spacing is not None:
        # thin to a minimum spacing
        keep = []
        for i, p in enumerate(pos):
            if all(np.hypot(*(p - pos[j])) >= spacing for j in keep):
                keep.append(i)
        pos = pos[keep]
    spin = kind.sample(rng, len(pos))
    ids = np.arange(len(pos)) + 1
    edges = []
    if edges_p > 0 and len(pos) > 1:
        from scipy.spatial import cKDTree

        for i, j in cKDTree(pos).query_pairs(1.2):
            if rng.random() < edges_p:
                edges.append((ids[i], ids[j]))
    return MarkedConfiguration(Window(n), ids, pos, spin, kind, edges)


def chain_config(decomp, n, start, direction, count, step, extra=(), edges=()):
    """Particles on a straight chain from `start` in `direction` with the given spacing."""
    d = np.asarray(direction, dtype=float)
    d = d / np.hypot(*d)
    pos = [np.asarray(start, dtype=float) + k * step * d for k in range(count)] + [np.asarray(e) for e in extra]
    ids = np.arange(len(pos)) + 1
    return MarkedConfiguration(Window(n), ids, np.array(pos), None, SpinKind(), edges)


def log_n(n):
    return math.log(n)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
