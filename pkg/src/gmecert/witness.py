"""Fully decomposable entanglement witnesses acting on two-qubit marginals.

The search is a semidefinite program over a witness W with unit trace whose
Pauli expansion carries no genuinely three-body word, together with a
decomposition W = P_M + partial_transpose(Q_M, M) into PSD parts for every
single-qubit bipartition M. A strictly negative Tr(rho W) then certifies
genuine multipartite entanglement of rho from its marginals alone.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from . import linalg, sdp
from .states import DensityMatrix, rho_noisy

__all__ = [
    "PAULI_WORDS",
    "TWO_BODY_MASK",
    "WitnessCertificate",
    "CertificateValidation",
    "pauli_decompose",
    "pauli_compose",
    "two_body_support_residual",
    "build_witness_problem",
    "find_witness",
    "witness_value",
    "noise_tolerance",
    "closed_form_noise_tolerance",
    "validate_certificate",
]

BIPARTITIONS = ("A", "B", "C")

TRACE_RESIDUAL_TOL = 1e-8
SUPPORT_RESIDUAL_TOL = 1e-8
RECONSTRUCTION_RESIDUAL_TOL = 1e-6
MIN_EIG_TOL = 1e-8


def _pauli_words() -> np.ndarray:
    words = np.empty((4, 4, 4, 8, 8), dtype=complex)
    for i, j, k in itertools.product(range(4), repeat=3):
        words[i, j, k] = linalg.kron(linalg.kron(linalg.PAULI[i], linalg.PAULI[j]), linalg.PAULI[k])
    return words


PAULI_WORDS = _pauli_words()

# Words acting nontrivially on all three qubits are excluded from two-body
# witnesses: 27 forbidden, 37 permitted (identity word included).
TWO_BODY_MASK = np.ones((4, 4, 4), dtype=bool)
for _i, _j, _k in itertools.product(range(1, 4), repeat=3):
    TWO_BODY_MASK[_i, _j, _k] = False

_WORDS_FLAT = PAULI_WORDS.reshape(64, 64)


def pauli_decompose(h: np.ndarray) -> np.ndarray:
    """Coefficients c[i,j,k] with h = sum c_ijk sigma_i x sigma_j x sigma_k."""
    h = linalg.as_hermitian(h)
    if h.shape != (8, 8):
        raise ValueError(f"expected an 8x8 matrix, got {h.shape}")
    coeffs = (_WORDS_FLAT.conj() @ h.ravel()).real / 8.0
    return coeffs.reshape(4, 4, 4)


def pauli_compose(coeffs: np.ndarray) -> np.ndarray:
    """Inverse of pauli_decompose."""
    coeffs = np.asarray(coeffs, dtype=float)
    if coeffs.shape != (4, 4, 4):
        raise ValueError(f"expected coefficients of shape (4, 4, 4), got {coeffs.shape}")
    return (coeffs.reshape(64) @ _WORDS_FLAT).reshape(8, 8)


def two_body_support_residual(w: np.ndarray) -> float:
    """Frobenius norm of the genuinely three-body part of w."""
    coeffs = pauli_decompose(w)
    forbidden = np.where(TWO_BODY_MASK, 0.0, coeffs)
    return float(np.linalg.norm(pauli_compose(forbidden)))


@dataclass(frozen=True)
class WitnessCertificate:
    """Witness plus its PSD decompositions per bipartition.

    `residuals` carries the trace-normalization defect, the two-body support
    defect, and per-bipartition reconstruction defects and minimal
    eigenvalues of P and Q, all recomputed from the stored matrices.
    """

    w: np.ndarray
    decompositions: dict  # "A"/"B"/"C" -> (P, Q)
    objective: float
    two_body_only: bool
    status: str
    residuals: dict
    valid: bool

    def to_json(self) -> dict:
        return {
            "W": linalg.matrix_to_json(self.w),
            "decompositions": {
                m: {"P": linalg.matrix_to_json(p), "Q": linalg.matrix_to_json(q)}
                for m, (p, q) in self.decompositions.items()
            },
            "objective": self.objective,
            "residuals": dict(self.residuals),
            "status": self.status,
            "two_body_only": self.two_body_only,
            "valid": self.valid,
        }


@dataclass(frozen=True)
class CertificateValidation:
    checks: dict  # name -> (value, bound, passed)
    passed: bool

    def to_json(self) -> dict:
        return {
            "passed": self.passed,
            "checks": {
                name: {"value": value, "bound": bound, "passed": ok}
                for name, (value, bound, ok) in self.checks.items()
            },
        }


def build_witness_problem(rho: DensityMatrix, two_body_only: bool = True) -> sdp.SdpProblem:
    """The witness search SDP for a three-qubit state.

    Variable blocks: W (parametrized by the 37 permitted Pauli words when
    two_body_only, all 64 otherwise), and P_M, Q_M per bipartition. The
    equalities impose Tr(W) = 1 and W = P_M + Q_M^{T_M}; the cones require
    every P_M and Q_M to be PSD; the objective minimizes Tr(rho W).
    Identity/8 on all blocks (suitably scaled) is strictly feasible.
    """
    if rho.n_qubits != 3:
        raise ValueError("witness construction requires a 3-qubit state")
    if two_body_only:
        w_basis = tuple(
            PAULI_WORDS[i, j, k]
            for i, j, k in itertools.product(range(4), repeat=3)
            if TWO_BODY_MASK[i, j, k]
        )
    else:
        w_basis = tuple(
            PAULI_WORDS[i, j, k] for i, j, k in itertools.product(range(4), repeat=3)
        )

    blocks = [sdp.BlockSpec("W", 8, w_basis)]
    for m in BIPARTITIONS:
        blocks.append(sdp.BlockSpec(f"P_{m}", 8))
        blocks.append(sdp.BlockSpec(f"Q_{m}", 8))

    eye8 = np.eye(8, dtype=complex)
    equalities = [sdp.EqualityConstraint(sdp.LinearFunctional({"W": eye8}), 1.0)]
    for m in BIPARTITIONS:
        m_pos = linalg.qubit_index(m)
        for i, j, k in itertools.product(range(4), repeat=3):
            word = PAULI_WORDS[i, j, k]
            equalities.append(
                sdp.EqualityConstraint(
                    sdp.LinearFunctional(
                        {
                            "W": word,
                            f"P_{m}": -word,
                            f"Q_{m}": -linalg.partial_transpose(word, {m_pos}),
                        }
                    ),
                    0.0,
                )
            )

    psd = [sdp.PsdConstraint(f"{kind}_{m}") for m in BIPARTITIONS for kind in ("P", "Q")]
    objective = sdp.LinearFunctional({"W": rho.matrix})
    return sdp.SdpProblem(
        blocks=tuple(blocks),
        equalities=tuple(equalities),
        psd=tuple(psd),
        objective=objective,
    )


def _certificate_residuals(w, decompositions, two_body_only) -> dict:
    residuals = {
        "trace": abs(float(np.trace(w).real) - 1.0),
        "two_body_support": two_body_support_residual(w) if two_body_only else 0.0,
    }
    for m, (p, q) in decompositions.items():
        m_pos = linalg.qubit_index(m)
        recon = w - p - linalg.partial_transpose(q, {m_pos})
        residuals[f"reconstruction_{m}"] = float(np.linalg.norm(recon))
        residuals[f"min_eig_P_{m}"] = linalg.min_eig(p)
        residuals[f"min_eig_Q_{m}"] = linalg.min_eig(q)
    return residuals


def _residuals_pass(residuals: dict) -> bool:
    if residuals["trace"] > TRACE_RESIDUAL_TOL:
        return False
    if residuals["two_body_support"] > SUPPORT_RESIDUAL_TOL:
        return False
    for m in BIPARTITIONS:
        if residuals[f"reconstruction_{m}"] > RECONSTRUCTION_RESIDUAL_TOL:
            return False
        if residuals[f"min_eig_P_{m}"] < -MIN_EIG_TOL:
            return False
        if residuals[f"min_eig_Q_{m}"] < -MIN_EIG_TOL:
            return False
    return True


def find_witness(
    rho: DensityMatrix,
    two_body_only: bool = True,
    options: sdp.SolverOptions | None = None,
) -> WitnessCertificate:
    """Solve the witness SDP for rho and return a validated certificate.

    On solver non-convergence the best iterate is still packaged, with the
    solver status propagated and the certificate flagged invalid.
    """
    problem = build_witness_problem(rho, two_body_only)
    solution = sdp.solve(problem, options)
    w = linalg.as_hermitian(solution.blocks["W"], tol=1e-8)
    decompositions = {
        m: (
            linalg.as_hermitian(solution.blocks[f"P_{m}"], tol=1e-8),
            linalg.as_hermitian(solution.blocks[f"Q_{m}"], tol=1e-8),
        )
        for m in BIPARTITIONS
    }
    objective = witness_value(w, rho)
    residuals = _certificate_residuals(w, decompositions, two_body_only)
    valid = solution.status == sdp.STATUS_OPTIMAL and _residuals_pass(residuals)
    return WitnessCertificate(
        w=w,
        decompositions=decompositions,
        objective=objective,
        two_body_only=two_body_only,
        status=solution.status,
        residuals=residuals,
        valid=valid,
    )


def witness_value(w: np.ndarray, rho: DensityMatrix) -> float:
    """Tr(rho W); the imaginary part must vanish to 1e-10."""
    w = np.asarray(w, dtype=complex)
    if w.shape != rho.matrix.shape:
        raise ValueError(f"dimension mismatch: witness {w.shape} vs state {rho.matrix.shape}")
    value = complex(np.trace(rho.matrix @ w))
    if abs(value.imag) > 1e-10:
        raise linalg.NumericalError(f"witness value has imaginary part {value.imag:.3e}")
    return float(value.real)


def validate_certificate(cert: WitnessCertificate) -> CertificateValidation:
    """Recompute every certificate residual from scratch (no solver code)."""
    residuals = _certificate_residuals(cert.w, cert.decompositions, cert.two_body_only)
    checks = {
        "trace": (residuals["trace"], TRACE_RESIDUAL_TOL, residuals["trace"] <= TRACE_RESIDUAL_TOL),
        "two_body_support": (
            residuals["two_body_support"],
            SUPPORT_RESIDUAL_TOL,
            residuals["two_body_support"] <= SUPPORT_RESIDUAL_TOL,
        ),
    }
    for m in BIPARTITIONS:
        rec = residuals[f"reconstruction_{m}"]
        checks[f"reconstruction_{m}"] = (rec, RECONSTRUCTION_RESIDUAL_TOL, rec <= RECONSTRUCTION_RESIDUAL_TOL)
        for kind in ("P", "Q"):
            lo = residuals[f"min_eig_{kind}_{m}"]
            checks[f"min_eig_{kind}_{m}"] = (lo, -MIN_EIG_TOL, lo >= -MIN_EIG_TOL)
    return CertificateValidation(checks=checks, passed=all(ok for _, _, ok in checks.values()))


def closed_form_noise_tolerance(objective: float) -> float:
    """1 - 1/(1 - 8 t) for a fixed witness with Tr(rho W) = t < 0.

    Follows from Tr(rho_p W) = p t + (1 - p)/8 for any unit-trace W, which
    crosses zero at p = 1/(1 - 8t); a lower bound on the re-optimized
    tolerance.
    """
    if objective >= 0:
        raise ValueError("closed-form tolerance requires a negative witness value")
    return 1.0 - 1.0 / (1.0 - 8.0 * objective)


def noise_tolerance(
    rho: DensityMatrix,
    options: sdp.SolverOptions | None = None,
    bracket: tuple[float, float] = (0.7, 1.0),
    p_tol: float = 1e-3,
    max_solves: int = 20,
) -> float:
    """Largest white-noise fraction 1 - p* at which the witness SDP still
    certifies GME, by bisection on p with a re-optimized witness per point.
    """
    lo, hi = bracket
    cert = find_witness(rho_noisy(hi, rho) if hi != 1.0 else rho, options=options)
    if cert.objective >= 0:
        raise ValueError(
            f"no marginal-constrained witness detects this state (objective {cert.objective:.3e})"
        )
    g_lo = find_witness(rho_noisy(lo, rho), options=options).objective
    if g_lo <= 0:
        raise ValueError(f"bisection bracket too narrow: objective at p={lo} is {g_lo:.3e}")
    solves = 2
    while hi - lo > p_tol and solves < max_solves:
        mid = 0.5 * (lo + hi)
        if find_witness(rho_noisy(mid, rho), options=options).objective >= 0:
            lo = mid
        else:
            hi = mid
        solves += 1
    return 1.0 - 0.5 * (lo + hi)
