"""Gibbs point processes with spins: sampling, shift transformations and their verification."""

__version__ = "0.1.0"

from .core import (EdgeSet, MarkedConfiguration, Particle, Spin, SpinKind, Window, read_jsonl,  # noqa: E402
                   write_jsonl)
from .gibbs import (GibbsParams, McmcSettings, SmallBoxOracle, exact_sample_small, gibbs_chain,  # noqa: E402
                    hamiltonian, sample_edges, sample_gibbs, sample_poisson)
from .kernels import IMPLEMENTATION  # noqa: E402
from .potential import (HardCore, HardRods, Ideal, LennardJones, RandomRadiiDisks, SmoothDecomposition,  # noqa: E402
                        SoftCore, Well, WidomRowlinson, derive_constants, make_model, smooth_decompose)
from .transform import (TransformParams, apply_transform, build_transform, diagnostics, invert_transform,  # noqa: E402
                        is_good, jacobian_density, shift_proposal)

__all__ = [
    "EdgeSet", "MarkedConfiguration", "Particle", "Spin", "SpinKind", "Window", "read_jsonl", "write_jsonl",
    "GibbsParams", "McmcSettings", "SmallBoxOracle", "exact_sample_small", "gibbs_chain", "hamiltonian",
    "sample_edges", "sample_gibbs", "sample_poisson", "IMPLEMENTATION",
    "HardCore", "HardRods", "Ideal", "LennardJones", "RandomRadiiDisks", "SmoothDecomposition", "SoftCore", "Well",
    "WidomRowlinson", "derive_constants", "make_model", "smooth_decompose",
    "TransformParams", "apply_transform", "build_transform", "diagnostics", "invert_transform", "is_good",
    "jacobian_density", "shift_proposal",
]
