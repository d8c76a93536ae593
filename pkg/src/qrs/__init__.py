"""Numerical tools for quantum channel simulation with coherent feedback."""
from .channels import (
    QuantumChannel,
    apply_channel,
    complementary_channel,
    compose,
    from_choi,
    stinespring_dilation,
    tensor_channels,
    to_choi,
    validate_cptp,
)
from .entropics import (
    afw_bound,
    binary_entropy,
    conditional_entropy,
    conditional_mutual_information,
    decoupling_delta,
    fannes_audenaert_bound,
    fidelity,
    mutual_information,
    trace_distance,
    von_neumann_entropy,
)
from .ki import KIDecomposition, ki_decompose, ki_entropies, ki_reconstruct
from .protocol import ProtocolReport, SimProtocol, decoupling_check, run_protocol
from .rates import (
    OptimizerConfig,
    RateQuery,
    RateResult,
    assisted_rate,
    entanglement_of_purification,
    feasible_point_value,
    gradient_check,
    oracle_identity_assisted,
    oracle_identity_unassisted,
    unassisted_rate,
)
from .tensor import DensityOperator, Ket, LinearOperator, SystemLayout, partial_trace, permute_systems, purify

__version__ = "0.1.0"
