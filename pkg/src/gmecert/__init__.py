"""Certification of genuine multipartite entanglement from separable marginals.

The pipeline: build the three-qubit target state, verify that all two-qubit
marginals are PPT (hence separable), search a fully decomposable witness
acting only on the marginals by semidefinite programming, and reproduce the
tomography / Monte Carlo analysis at experimental count rates.
"""

from .linalg import (
    NumericalError,
    eig_hermitian,
    kron,
    matrix_from_json,
    matrix_to_json,
    partial_trace,
    partial_transpose,
    sqrtm_psd,
)
from .separability import MarginalReport, analyze_marginals, beta_of_pair, beta_values
from .states import (
    DensityMatrix,
    StateVector,
    fully_separable_twin,
    get_state,
    ghz_state,
    identity_mixed,
    preparation_inputs,
    random_biseparable,
    rho_noisy,
    rho_target,
    w_bar_state,
    w_radioactive,
    xi_state,
)
from .sdp import SdpProblem, SdpSolution, SolverOptions, embed_complex, solve
from .tomography import (
    MlOptions,
    TomographyDataset,
    bias_study,
    exact_dataset,
    fidelity,
    mix_datasets,
    ml_reconstruct,
    monte_carlo,
    optimize_local_unitaries,
    purity,
    simulate_counts,
)
from .witness import (
    WitnessCertificate,
    build_witness_problem,
    find_witness,
    noise_tolerance,
    pauli_compose,
    pauli_decompose,
    validate_certificate,
    witness_value,
)

__version__ = "0.1.0"

__all__ = [
    "NumericalError",
    "eig_hermitian",
    "kron",
    "matrix_from_json",
    "matrix_to_json",
    "partial_trace",
    "partial_transpose",
    "sqrtm_psd",
    "MarginalReport",
    "analyze_marginals",
    "beta_of_pair",
    "beta_values",
    "DensityMatrix",
    "StateVector",
    "fully_separable_twin",
    "get_state",
    "ghz_state",
    "identity_mixed",
    "preparation_inputs",
    "random_biseparable",
    "rho_noisy",
    "rho_target",
    "w_bar_state",
    "w_radioactive",
    "xi_state",
    "SdpProblem",
    "SdpSolution",
    "SolverOptions",
    "embed_complex",
    "solve",
    "MlOptions",
    "TomographyDataset",
    "bias_study",
    "exact_dataset",
    "fidelity",
    "mix_datasets",
    "ml_reconstruct",
    "monte_carlo",
    "optimize_local_unitaries",
    "purity",
    "simulate_counts",
    "WitnessCertificate",
    "build_witness_problem",
    "find_witness",
    "noise_tolerance",
    "pauli_compose",
    "pauli_decompose",
    "validate_certificate",
    "witness_value",
]
