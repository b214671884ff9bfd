"""Constructors for the three-qubit states and operators used by the pipeline.

Qubit A is the most significant bit of the computational basis index, so
|abc> sits at index 4a + 2b + c. All constructors return validated
StateVector / DensityMatrix values; random generators take explicit seeds.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import linalg

__all__ = [
    "StateVector",
    "DensityMatrix",
    "PreparationInputs",
    "basis_state",
    "w_radioactive",
    "xi_state",
    "w_bar_state",
    "ghz_state",
    "rho_target",
    "rho_noisy",
    "fully_separable_twin",
    "identity_mixed",
    "preparation_inputs",
    "random_biseparable",
    "get_state",
    "registry_keys",
]

NORM_TOL = 1e-12
TRACE_TOL = 1e-10
PSD_TOL = 1e-9


@dataclass(frozen=True)
class StateVector:
    """Unit-norm complex amplitude vector over an n-qubit basis."""

    amplitudes: np.ndarray
    n_qubits: int = field(init=False)

    def __post_init__(self):
        amp = np.asarray(self.amplitudes, dtype=complex)
        n = int(round(np.log2(amp.size)))
        if 2**n != amp.size:
            raise ValueError(f"amplitude count {amp.size} is not a power of two")
        norm = np.linalg.norm(amp)
        if abs(norm - 1.0) > NORM_TOL:
            raise ValueError(f"state vector is not normalized: |norm - 1| = {abs(norm - 1):.3e}")
        amp = amp.copy()
        amp.setflags(write=False)
        object.__setattr__(self, "amplitudes", amp)
        object.__setattr__(self, "n_qubits", n)

    def to_density_matrix(self) -> "DensityMatrix":
        return DensityMatrix(np.outer(self.amplitudes, self.amplitudes.conj()))


@dataclass(frozen=True)
class DensityMatrix:
    """Hermitian, PSD, trace-one matrix over an n-qubit space."""

    matrix: np.ndarray
    n_qubits: int = field(init=False)

    def __post_init__(self):
        m = linalg.as_hermitian(self.matrix)
        n = int(round(np.log2(m.shape[0])))
        if 2**n != m.shape[0]:
            raise ValueError(f"dimension {m.shape[0]} is not a power of two")
        tr = np.trace(m).real
        if abs(tr - 1.0) > TRACE_TOL:
            raise ValueError(f"trace deviates from one by {abs(tr - 1):.3e}")
        lo = linalg.min_eig(m)
        if lo < -PSD_TOL:
            raise ValueError(f"matrix is not PSD: min eigenvalue {lo:.3e}")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "n_qubits", n)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


def basis_state(bits: str) -> StateVector:
    """Computational basis state |bits>, e.g. basis_state("101")."""
    if not bits or any(b not in "01" for b in bits):
        raise ValueError(f"invalid bit string {bits!r}")
    amp = np.zeros(2 ** len(bits), dtype=complex)
    amp[int(bits, 2)] = 1.0
    return StateVector(amp)


def w_radioactive() -> StateVector:
    """W-like state (e^{i pi/3}|001> + e^{-i pi/3}|010> - |100>) / sqrt(3)."""
    amp = np.zeros(8, dtype=complex)
    amp[0b001] = np.exp(1j * np.pi / 3)
    amp[0b010] = np.exp(-1j * np.pi / 3)
    amp[0b100] = -1.0
    return StateVector(amp / np.sqrt(3))


def xi_state() -> StateVector:
    """|xi> = w_radioactive()/sqrt(3) + sqrt(2/3) |111>."""
    amp = w_radioactive().amplitudes / np.sqrt(3)
    amp = amp.copy()
    amp[0b111] = np.sqrt(2.0 / 3.0)
    return StateVector(amp)


def w_bar_state() -> StateVector:
    """(|011> + |101> + |110>) / sqrt(3): the flipped W state."""
    amp = np.zeros(8, dtype=complex)
    amp[0b011] = amp[0b101] = amp[0b110] = 1.0 / np.sqrt(3)
    return StateVector(amp)


def ghz_state() -> StateVector:
    """(|000> + |111>) / sqrt(2)."""
    amp = np.zeros(8, dtype=complex)
    amp[0b000] = amp[0b111] = 1.0 / np.sqrt(2)
    return StateVector(amp)


def rho_target() -> DensityMatrix:
    """The rank-2 target state (2/3)|xi><xi| + (1/3)|wbar><wbar|."""
    xi = xi_state().amplitudes
    wb = w_bar_state().amplitudes
    m = (2.0 / 3.0) * np.outer(xi, xi.conj()) + (1.0 / 3.0) * np.outer(wb, wb.conj())
    return DensityMatrix(m)


def rho_noisy(p: float, rho: DensityMatrix | None = None) -> DensityMatrix:
    """White-noise mixture p*rho + (1-p)/8 * identity, 0 <= p <= 1."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"mixing parameter p={p} outside [0, 1]")
    if rho is None:
        rho = rho_target()
    if rho.dim != 8:
        raise ValueError("rho_noisy expects a 3-qubit state")
    return DensityMatrix(p * rho.matrix + (1.0 - p) * np.eye(8) / 8.0)


def fully_separable_twin() -> DensityMatrix:
    """(|000><000| + |111><111|)/2: shares every two-qubit marginal with GHZ."""
    m = np.zeros((8, 8), dtype=complex)
    m[0, 0] = m[7, 7] = 0.5
    return DensityMatrix(m)


def identity_mixed() -> DensityMatrix:
    """The maximally mixed three-qubit state, identity/8."""
    return DensityMatrix(np.eye(8, dtype=complex) / 8.0)


@dataclass(frozen=True)
class PreparationInputs:
    """Input states and local unitary entering the preparation circuit.

    `xi_input_raw_norm_sq` is the squared norm of the xi-preparation input
    as printed, (74 + 8*sqrt(6))/18; the stored vector is the normalized one.
    """

    xi_input: StateVector
    xi_input_raw_norm_sq: float
    wbar_input: StateVector
    u_c: np.ndarray


def _ac_times_b0(ac_amplitudes: np.ndarray) -> np.ndarray:
    """Lift a two-qubit (A, C) amplitude vector to (A, B, C) with B in |0>."""
    amp = np.zeros(8, dtype=complex)
    for a in range(2):
        for c in range(2):
            amp[4 * a + c] = ac_amplitudes[2 * a + c]
    return amp


def preparation_inputs() -> PreparationInputs:
    """The two preparation inputs (on qubits A, C with B in |0>) and U_C.

    The xi input is returned normalized because the printed amplitudes are
    not unit-norm; its raw squared norm is reported alongside. The wbar
    input is unit-norm as printed. U_C is checked unitary to 1e-12.
    """
    w = np.exp(1j * np.pi / 3)
    xi_ac = np.zeros(4, dtype=complex)
    xi_ac[0b11] = np.sqrt(2.0) / 3.0
    xi_ac[0b00] = (np.conj(w) + np.sqrt(6.0) * w) / (3.0 * np.sqrt(2.0))
    xi_ac[0b01] = (np.conj(w) ** 2 - np.sqrt(6.0)) / np.sqrt(2.0)
    raw = _ac_times_b0(xi_ac)
    raw_norm_sq = float(np.vdot(raw, raw).real)
    xi_input = StateVector(raw / np.sqrt(raw_norm_sq))

    wbar_ac = np.zeros(4, dtype=complex)
    wbar_ac[0b01] = 1.0
    wbar_ac[0b10] = 1.0
    wbar_ac[0b11] = 1.0
    wbar_input = StateVector(_ac_times_b0(wbar_ac / np.sqrt(3.0)))

    u_c = np.array([[-1.0, np.conj(w)], [w, 1.0]], dtype=complex) / np.sqrt(2.0)
    defect = np.max(np.abs(u_c @ u_c.conj().T - np.eye(2)))
    if defect > 1e-12:
        raise AssertionError(f"U_C failed the unitarity check: {defect:.3e}")
    return PreparationInputs(xi_input, raw_norm_sq, wbar_input, u_c)


def _haar_pure(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random pure state: normalized vector of standard complex Gaussians."""
    v = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    return v / np.linalg.norm(v)


# Orderings that bring (single qubit, remaining pair) factors back to (A, B, C).
_BIPARTITION_ORDER = {0: (0, 1, 2), 1: (1, 0, 2), 2: (1, 2, 0)}


def random_biseparable(rng_seed: int, n_terms: int, bipartition=None) -> DensityMatrix:
    """Random biseparable state: a convex mixture of product states.

    Each term is a Haar-random pure product state across one of the three
    bipartitions A|BC, B|AC, C|AB (chosen uniformly unless `bipartition`
    pins one); term weights are Dirichlet-uniform. Deterministic in the seed.
    """
    if n_terms < 1:
        raise ValueError("n_terms must be at least 1")
    rng = np.random.default_rng(rng_seed)
    weights = rng.dirichlet(np.ones(n_terms))
    m = np.zeros((8, 8), dtype=complex)
    for weight in weights:
        part = linalg.qubit_index(bipartition) if bipartition is not None else int(rng.integers(3))
        single = _haar_pure(2, rng)
        pair = _haar_pure(4, rng)
        vec = np.kron(single, pair)  # ordered (single qubit, pair qubits)
        term = np.outer(vec, vec.conj())
        term = linalg.permute_qubits(term, _BIPARTITION_ORDER[part])
        m += weight * term
    return DensityMatrix(m)


_REGISTRY = {
    "rho": rho_target,
    "ghz": lambda: ghz_state().to_density_matrix(),
    "twin": fully_separable_twin,
    "xi": lambda: xi_state().to_density_matrix(),
    "wbar": lambda: w_bar_state().to_density_matrix(),
    "wrad": lambda: w_radioactive().to_density_matrix(),
    "identity8": identity_mixed,
}


def get_state(key: str) -> DensityMatrix:
    """Resolve a named state: registry keys plus "rho_p:<p>" and "basis:<bits>"."""
    key = key.strip()
    if key in _REGISTRY:
        return _REGISTRY[key]()
    if key.startswith("rho_p:"):
        return rho_noisy(float(key.split(":", 1)[1]))
    if key.startswith("basis:"):
        bits = key.split(":", 1)[1]
        if len(bits) != 3:
            raise ValueError(f"basis states must name three bits, got {bits!r}")
        return basis_state(bits).to_density_matrix()
    raise ValueError(
        f"unknown state {key!r}; expected one of {sorted(_REGISTRY)}, "
        f"'rho_p:<p>' or 'basis:<bits>'"
    )


def registry_keys() -> list[str]:
    return sorted(_REGISTRY) + ["rho_p:<p>", "basis:<bits>"]
