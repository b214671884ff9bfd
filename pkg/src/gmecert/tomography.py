"""Simulated three-qubit tomography with maximum-likelihood reconstruction.

The measurement protocol projects every qubit onto the six states
|0>, |1>, |+>, |->, |+i>, |-i>, giving 6^3 = 216 product settings. Counts
are Poisson with mean 8 * mean_pairs * Tr(rho Pi), so the average count
over all settings equals mean_pairs (the 216 Born probabilities of any
state sum to 27). Reconstruction is the iterative R rho R fixed point;
uncertainties come from Poisson resampling of the recorded counts.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from . import linalg, separability
from .states import DensityMatrix

__all__ = [
    "BASIS_LABELS",
    "SETTING_LABELS",
    "TomographyDataset",
    "ReconstructionResult",
    "MlOptions",
    "MonteCarloResult",
    "BiasReport",
    "born_probabilities",
    "setting_projector",
    "simulate_counts",
    "exact_dataset",
    "ml_reconstruct",
    "mix_datasets",
    "fidelity",
    "purity",
    "optimize_local_unitaries",
    "monte_carlo",
    "joint_satisfaction_fraction",
    "bias_study",
]

_SQRT2 = np.sqrt(2.0)

_BASIS_KETS = {
    "Z+": np.array([1.0, 0.0], dtype=complex),
    "Z-": np.array([0.0, 1.0], dtype=complex),
    "X+": np.array([1.0, 1.0], dtype=complex) / _SQRT2,
    "X-": np.array([1.0, -1.0], dtype=complex) / _SQRT2,
    "Y+": np.array([1.0, 1.0j], dtype=complex) / _SQRT2,
    "Y-": np.array([1.0, -1.0j], dtype=complex) / _SQRT2,
}
BASIS_LABELS = ("Z+", "Z-", "X+", "X-", "Y+", "Y-")

# Canonical enumeration: lexicographic over qubits A, B, C with the
# per-qubit label order above; qubit A varies slowest.
SETTING_LABELS = tuple(
    f"{a}|{b}|{c}" for a in BASIS_LABELS for b in BASIS_LABELS for c in BASIS_LABELS
)


def _build_projectors() -> np.ndarray:
    proj = np.empty((216, 8, 8), dtype=complex)
    for idx, label in enumerate(SETTING_LABELS):
        la, lb, lc = label.split("|")
        ket = np.kron(np.kron(_BASIS_KETS[la], _BASIS_KETS[lb]), _BASIS_KETS[lc])
        proj[idx] = np.outer(ket, ket.conj())
    return proj


_PROJ = _build_projectors()
_PROJ_FLAT = _PROJ.reshape(216, 64)
_PROJ_CONJ_FLAT = _PROJ_FLAT.conj()
_SETTING_INDEX = {label: i for i, label in enumerate(SETTING_LABELS)}


def setting_projector(label: str) -> np.ndarray:
    """Rank-one product projector for a setting label like "Z+|X-|Y+"."""
    try:
        return _PROJ[_SETTING_INDEX[label]]
    except KeyError:
        raise ValueError(f"unknown measurement setting {label!r}") from None


def _projector_rows(settings) -> np.ndarray:
    try:
        return np.array([_SETTING_INDEX[label] for label in settings])
    except KeyError as exc:
        raise ValueError(f"unknown measurement setting {exc.args[0]!r}") from None


def born_probabilities(rho, settings=None) -> np.ndarray:
    """Tr(rho Pi) for each setting (all 216 in canonical order by default)."""
    m = rho.matrix if isinstance(rho, DensityMatrix) else np.asarray(rho, dtype=complex)
    probs = (_PROJ_CONJ_FLAT @ m.ravel()).real
    if settings is not None:
        probs = probs[_projector_rows(settings)]
    return probs


@dataclass(frozen=True)
class TomographyDataset:
    """Measured (or synthesized) counts for a list of settings.

    Counts are stored as floats: simulated data is integral, but datasets
    produced by convex mixing carry fractional effective counts. Relative
    frequencies always sum to one.
    """

    settings: tuple
    counts: np.ndarray

    def __post_init__(self):
        settings = tuple(self.settings)
        rows = _projector_rows(settings)  # validates the labels
        if len(set(settings)) != len(settings):
            raise ValueError("duplicate measurement settings")
        counts = np.asarray(self.counts, dtype=float)
        if counts.shape != (len(settings),):
            raise ValueError(f"counts shape {counts.shape} does not match {len(settings)} settings")
        if not np.all(np.isfinite(counts)) or np.any(counts < 0):
            raise ValueError("counts must be finite and non-negative")
        if counts.sum() <= 0:
            raise ValueError("dataset has no counts")
        counts = counts.copy()
        counts.setflags(write=False)
        object.__setattr__(self, "settings", settings)
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "_rows", rows)

    @property
    def total(self) -> float:
        return float(self.counts.sum())

    @property
    def frequencies(self) -> np.ndarray:
        return self.counts / self.counts.sum()

    def to_json(self) -> dict:
        return {
            "settings": list(self.settings),
            "counts": [
                int(round(c)) if abs(c - round(c)) < 1e-9 else float(c) for c in self.counts
            ],
        }

    @staticmethod
    def from_json(obj) -> "TomographyDataset":
        return TomographyDataset(tuple(obj["settings"]), np.asarray(obj["counts"], dtype=float))


def simulate_counts(rho: DensityMatrix, mean_pairs: float, rng_seed) -> TomographyDataset:
    """Poisson counts for the full 216-setting protocol.

    Each setting draws from Poisson(8 * mean_pairs * Tr(rho Pi)), making
    mean_pairs the expected per-setting average over the protocol.
    """
    if mean_pairs <= 0:
        raise ValueError("mean_pairs must be positive")
    if rho.n_qubits != 3:
        raise ValueError("the protocol measures three qubits")
    probs = np.clip(born_probabilities(rho), 0.0, None)
    rng = np.random.default_rng(rng_seed)
    counts = rng.poisson(8.0 * mean_pairs * probs).astype(float)
    return TomographyDataset(SETTING_LABELS, counts)


def exact_dataset(rho: DensityMatrix, total: float = 216.0) -> TomographyDataset:
    """Infinite-statistics dataset: counts proportional to Born probabilities."""
    probs = np.clip(born_probabilities(rho), 0.0, None)
    return TomographyDataset(SETTING_LABELS, total * probs / probs.sum())


def mix_datasets(parts) -> TomographyDataset:
    """Convex mixture of datasets on the frequency level.

    `parts` is a sequence of (dataset, weight) with non-negative weights
    summing to one and identical setting order. The mixed counts are the
    mixed frequencies rescaled to the effective total sum_i w_i * total_i,
    preserving each acquisition's statistical weight for later resampling.
    """
    parts = list(parts)
    if not parts:
        raise ValueError("mix_datasets needs at least one part")
    weights = np.array([float(w) for _, w in parts])
    if np.any(weights < 0) or abs(weights.sum() - 1.0) > 1e-12:
        raise ValueError("weights must be non-negative and sum to one")
    settings = parts[0][0].settings
    for ds, _ in parts[1:]:
        if ds.settings != settings:
            raise ValueError("datasets to be mixed must share the same settings")
    freq = sum(w * ds.frequencies for ds, w in parts)
    effective_total = float(sum(w * ds.total for ds, w in parts))
    return TomographyDataset(settings, freq * effective_total)


@dataclass(frozen=True)
class MlOptions:
    max_iterations: int = 5000
    step_tol: float = 1e-10
    prob_floor: float = 1e-12
    # Fraction of each R rho R step that is applied; 1.0 is the plain
    # iteration, smaller values dilute it for pathological datasets.
    dilution: float = 1.0


@dataclass(frozen=True)
class ReconstructionResult:
    rho_hat: DensityMatrix
    iterations: int
    final_step_norm: float
    log_likelihood: float
    converged: bool
    ll_violations: int
    max_ll_decrease: float


def ml_reconstruct(data: TomographyDataset, options: MlOptions | None = None) -> ReconstructionResult:
    """Maximum-likelihood reconstruction by the R rho R fixed-point iteration.

    R(rho) = sum_j (f_j / Tr(rho Pi_j)) Pi_j; rho <- R rho R / Tr(R rho R),
    starting from the maximally mixed state. Stops when the Frobenius step
    drops below `step_tol` or at the iteration cap. The log-likelihood
    sum_j f_j log Tr(rho Pi_j) is monitored; decreases beyond 1e-12 are
    counted in `ll_violations`.
    """
    options = options or MlOptions()
    if not 0.0 < options.dilution <= 1.0:
        raise ValueError("dilution must lie in (0, 1]")
    rows = data._rows
    proj_flat = _PROJ_FLAT[rows]
    proj_conj_flat = _PROJ_CONJ_FLAT[rows]
    freq = data.frequencies
    rho = np.eye(8, dtype=complex) / 8.0
    ll_prev = -np.inf
    ll_violations = 0
    max_ll_decrease = 0.0
    step = np.inf
    converged = False
    iterations = 0
    for iterations in range(1, options.max_iterations + 1):
        probs = np.clip((proj_conj_flat @ rho.ravel()).real, options.prob_floor, None)
        ll = float(freq @ np.log(probs))
        if ll < ll_prev - 1e-12:
            ll_violations += 1
            max_ll_decrease = max(max_ll_decrease, ll_prev - ll)
        ll_prev = ll
        r_op = ((freq / probs) @ proj_flat).reshape(8, 8)
        new = r_op @ rho @ r_op
        new = (new + new.conj().T) / 2
        new /= np.trace(new).real
        if options.dilution < 1.0:
            new = (1.0 - options.dilution) * rho + options.dilution * new
        step = float(np.linalg.norm(new - rho))
        rho = new
        if step <= options.step_tol:
            converged = True
            break
    probs = np.clip((proj_conj_flat @ rho.ravel()).real, options.prob_floor, None)
    ll = float(freq @ np.log(probs))
    return ReconstructionResult(
        rho_hat=DensityMatrix(rho),
        iterations=iterations,
        final_step_norm=step,
        log_likelihood=ll,
        converged=converged,
        ll_violations=ll_violations,
        max_ll_decrease=max_ll_decrease,
    )


def purity(rho: DensityMatrix) -> float:
    """Tr(rho^2); 1/dim for the maximally mixed state, 1 for pure states."""
    return float(np.sum(np.abs(rho.matrix) ** 2))


def fidelity(rho: DensityMatrix, sigma: DensityMatrix) -> float:
    """Uhlmann fidelity (Tr sqrt(sqrt(rho) sigma sqrt(rho)))^2.

    Exactly 1 for identical states; roundoff excess beyond 1 (square roots
    of near-zero eigenvalues) is capped.
    """
    if rho.matrix.shape != sigma.matrix.shape:
        raise ValueError("fidelity requires states of equal dimension")
    root = linalg.sqrtm_psd(rho.matrix)
    inner = root @ sigma.matrix @ root
    w, _ = linalg.eig_hermitian((inner + inner.conj().T) / 2)
    value = float(np.sum(np.sqrt(np.clip(w, 0.0, None))) ** 2)
    return min(value, 1.0)


def _unitary_from_angles(angles) -> np.ndarray:
    """Z-Y-Z Euler rotation, global phase dropped."""
    a, b, c = angles
    rz1 = np.diag([np.exp(-0.5j * a), np.exp(0.5j * a)])
    ry = np.array(
        [[np.cos(b / 2), -np.sin(b / 2)], [np.sin(b / 2), np.cos(b / 2)]], dtype=complex
    )
    rz2 = np.diag([np.exp(-0.5j * c), np.exp(0.5j * c)])
    return rz1 @ ry @ rz2


@dataclass(frozen=True)
class LocalUnitaryOptions:
    restarts: int = 20
    rng_seed: int = 20260810
    fatol: float = 1e-9
    xatol: float = 1e-6
    max_evals: int = 4000


def optimize_local_unitaries(
    rho_exp: DensityMatrix,
    rho_target: DensityMatrix,
    options: LocalUnitaryOptions | None = None,
):
    """Maximize fidelity((U_A x U_B x U_C) rho_exp (.)^dag, rho_target).

    Nelder-Mead over the nine Euler angles, with seeded random restarts on
    top of the identity start, so the result never falls below the
    unoptimized fidelity. Returns ((U_A, U_B, U_C), optimized_fidelity).
    """
    options = options or LocalUnitaryOptions()
    if rho_exp.n_qubits != 3 or rho_target.n_qubits != 3:
        raise ValueError("local-unitary optimization expects 3-qubit states")
    root = linalg.sqrtm_psd(rho_target.matrix)
    m_exp = rho_exp.matrix

    def neg_fidelity(angles):
        u = np.kron(
            np.kron(_unitary_from_angles(angles[0:3]), _unitary_from_angles(angles[3:6])),
            _unitary_from_angles(angles[6:9]),
        )
        rotated = u @ m_exp @ u.conj().T
        inner = root @ rotated @ root
        w = np.linalg.eigvalsh((inner + inner.conj().T) / 2)
        return -float(np.sum(np.sqrt(np.clip(w, 0.0, None))) ** 2)

    rng = np.random.default_rng(options.rng_seed)
    starts = [np.zeros(9)]
    starts += [rng.uniform(-np.pi, np.pi, size=9) for _ in range(options.restarts)]
    best_angles, best_val = starts[0], neg_fidelity(starts[0])
    for start in starts:
        res = minimize(
            neg_fidelity,
            start,
            method="Nelder-Mead",
            options={
                "fatol": options.fatol,
                "xatol": options.xatol,
                "maxfev": options.max_evals,
            },
        )
        if res.fun < best_val:
            best_val, best_angles = res.fun, res.x
    unitaries = tuple(_unitary_from_angles(best_angles[3 * q : 3 * q + 3]) for q in range(3))
    u_full = np.kron(np.kron(unitaries[0], unitaries[1]), unitaries[2])
    rotated = DensityMatrix(u_full @ m_exp @ u_full.conj().T)
    return unitaries, fidelity(rotated, rho_target)


@dataclass(frozen=True)
class StatSummary:
    mean: float
    std: float
    samples: np.ndarray


@dataclass(frozen=True)
class MonteCarloResult:
    n_samples: int
    rng_seed: int
    statistics: dict  # name -> StatSummary


def _resample_and_evaluate(args):
    data_counts, settings, child_seed, statistics, ml_options = args
    rng = np.random.default_rng(child_seed)
    counts = rng.poisson(data_counts).astype(float)
    dataset = TomographyDataset(settings, counts)
    result = ml_reconstruct(dataset, ml_options)
    return {name: float(fn(result.rho_hat)) for name, fn in statistics.items()}


def monte_carlo(
    data: TomographyDataset,
    n_samples: int,
    statistics: dict,
    rng_seed: int,
    ml_options: MlOptions | None = None,
    workers: int = 1,
) -> MonteCarloResult:
    """Poisson-resample the counts, reconstruct each sample, evaluate statistics.

    `statistics` maps names to callables DensityMatrix -> float. Each sample
    derives its RNG stream from (rng_seed, sample index), and results are
    reduced by sample index, so the outcome is identical for any worker count.
    """
    if n_samples < 2:
        raise ValueError("monte_carlo needs at least 2 samples")
    children = np.random.SeedSequence(rng_seed).spawn(n_samples)
    jobs = [(data.counts, data.settings, children[i], statistics, ml_options) for i in range(n_samples)]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            evaluated = list(pool.map(_resample_and_evaluate, jobs))
    else:
        evaluated = [_resample_and_evaluate(job) for job in jobs]
    summaries = {}
    for name in statistics:
        samples = np.array([row[name] for row in evaluated])
        summaries[name] = StatSummary(
            mean=float(samples.mean()), std=float(samples.std(ddof=1)), samples=samples
        )
    return MonteCarloResult(n_samples=n_samples, rng_seed=rng_seed, statistics=summaries)


def joint_satisfaction_fraction(
    result: MonteCarloResult,
    beta_keys=("beta_AB", "beta_BC", "beta_AC"),
    witness_key="witness_value",
) -> float:
    """Fraction of samples with every beta positive and a negative witness value."""
    ok = np.ones(result.n_samples, dtype=bool)
    for key in beta_keys:
        ok &= result.statistics[key].samples > 0
    ok &= result.statistics[witness_key].samples < 0
    return float(ok.mean())


def standard_statistics(w: np.ndarray) -> dict:
    """The default Monte Carlo statistics: the three betas and Tr(rho W)."""
    from .witness import witness_value  # local import to avoid a cycle

    stats = {}
    for pair in separability.PAIRS:
        stats[f"beta_{pair}"] = lambda rho, p=pair: separability.beta_of_pair(rho, p)
    stats["witness_value"] = lambda rho: witness_value(w, rho)
    return stats


@dataclass(frozen=True)
class BiasReport:
    n_trials: int
    mean_pairs: float
    rng_seed: int
    true_values: dict  # name -> exact value on rho_true
    biases: dict  # name -> (bias, standard error, sample std)

    def to_json(self) -> dict:
        return {
            "n_trials": self.n_trials,
            "mean_pairs": self.mean_pairs,
            "seed": self.rng_seed,
            "true_values": dict(self.true_values),
            "biases": {
                name: {"bias": b, "standard_error": se, "sample_std": sd}
                for name, (b, se, sd) in self.biases.items()
            },
        }


def bias_study(
    rho_true: DensityMatrix,
    w: np.ndarray,
    mean_pairs: float,
    n_trials: int,
    rng_seed: int,
    ml_options: MlOptions | None = None,
    workers: int = 1,
) -> BiasReport:
    """Systematic ML-reconstruction shift of the witness value and the betas.

    Simulates `n_trials` independent datasets from rho_true, reconstructs
    each, and reports mean(statistic_hat) - statistic_true with standard
    errors. At experimental count rates the reconstruction pushes the
    witness value up and every beta down.

    The default ML options here run the fixed point to convergence (the
    stock iteration cap truncates a sizeable fraction of runs at a few
    hundred counts per setting, and the truncation residue would swamp the
    reconstruction bias being measured).
    """
    if n_trials < 30:
        raise ValueError("bias_study needs at least 30 trials")
    if ml_options is None:
        ml_options = MlOptions(max_iterations=20000, step_tol=1e-8)
    statistics = standard_statistics(w)
    true_values = {name: float(fn(rho_true)) for name, fn in statistics.items()}
    children = np.random.SeedSequence(rng_seed).spawn(n_trials)

    def one_trial(child):
        dataset = simulate_counts(rho_true, mean_pairs, child)
        result = ml_reconstruct(dataset, ml_options)
        return {name: float(fn(result.rho_hat)) for name, fn in statistics.items()}

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            evaluated = list(pool.map(one_trial, children))
    else:
        evaluated = [one_trial(child) for child in children]
    biases = {}
    for name in statistics:
        samples = np.array([row[name] for row in evaluated])
        deviation = samples - true_values[name]
        biases[name] = (
            float(deviation.mean()),
            float(deviation.std(ddof=1) / np.sqrt(n_trials)),
            float(deviation.std(ddof=1)),
        )
    return BiasReport(
        n_trials=n_trials,
        mean_pairs=mean_pairs,
        rng_seed=rng_seed,
        true_values=true_values,
        biases=biases,
    )
