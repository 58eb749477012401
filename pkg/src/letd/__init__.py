"""Localized exponential time differencing for the diffusion equation.

Monodomain and overlapping-domain-decomposition ETD1/ETD2 solvers for

    u_t = nu Laplace(u) + f   on an interval or rectangle,

with Dirichlet boundary data, plus two iterative coupling drivers (a
per-time-step Schwarz iteration and a global-in-time waveform
relaxation) and an experiment harness that records convergence rates
and accuracy tables as CSV.
"""

from .matfunc import (
    build_laplacian_1d,
    build_laplacian_2d,
    spectral_factorization,
    spectral_factorization_2d,
    phi_scalar,
    apply_phi,
    apply_phi_2d,
    expm_dense,
)

__version__ = "0.1.0"
