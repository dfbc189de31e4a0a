"""Simulation and phase-only GRAPE pulse design for a four-qubit NMR
partial-swap homogeniser."""
from .homogeniser import (closed_form_marginals, entropy_profile, homogenize_chain,
                          marginal_map_iterate, partial_swap_unitary, simulate_homogeniser,
                          standard_schedule)
from .quantum import (DensityMatrix, expm_skew_hermitian, partial_trace, polarisation,
                      state_from_f, tensor_product, trace_distance, von_neumann_entropy)

__all__ = [
    "DensityMatrix", "closed_form_marginals", "entropy_profile", "expm_skew_hermitian",
    "homogenize_chain", "marginal_map_iterate", "partial_swap_unitary", "partial_trace",
    "polarisation", "simulate_homogeniser", "standard_schedule", "state_from_f",
    "tensor_product", "trace_distance", "von_neumann_entropy",
]
