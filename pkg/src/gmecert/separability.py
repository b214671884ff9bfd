"""PPT analysis of the two-qubit marginals of a three-qubit state.

For two qubits the Peres-Horodecki criterion is necessary and sufficient,
so the minimal eigenvalue beta of the partially transposed marginal decides
separability outright for exact inputs. Reconstructed states should be
judged by the caller from the raw beta plus its Monte Carlo spread.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import linalg
from .states import DensityMatrix

__all__ = ["MarginalReport", "PAIRS", "analyze_marginals", "beta_of_pair", "beta_values"]

# Table column order; the transposed subsystem is the first-listed qubit.
PAIRS = ("AB", "BC", "AC")

VERDICT_TOL = 1e-10


@dataclass(frozen=True)
class MarginalReport:
    pair: str
    beta: float
    separable: bool
    transposed_subsystem: str

    def to_json(self) -> dict:
        return {
            "pair": self.pair,
            "beta": self.beta,
            "separable": self.separable,
            "transposed_subsystem": self.transposed_subsystem,
        }


def _marginal_pt_min_eig(rho: np.ndarray, pair: str) -> float:
    keep = [linalg.qubit_index(q) for q in pair]
    marginal = linalg.partial_trace(rho, keep)
    # partial_trace orders factors by ascending qubit index, which for the
    # pairs AB, BC and AC puts the first-listed qubit at factor position 0.
    pt = linalg.partial_transpose(marginal, {0})
    return linalg.min_eig(pt)


def beta_of_pair(rho: DensityMatrix, pair: str) -> float:
    """Minimal eigenvalue of the marginal's partial transpose for one pair."""
    if pair not in PAIRS:
        raise ValueError(f"unknown pair {pair!r}; expected one of {PAIRS}")
    if rho.n_qubits != 3:
        raise ValueError("marginal analysis requires a 3-qubit state")
    return _marginal_pt_min_eig(rho.matrix, pair)


def analyze_marginals(rho: DensityMatrix) -> list[MarginalReport]:
    """One report per qubit pair, in the fixed order AB, BC, AC."""
    if rho.n_qubits != 3:
        raise ValueError("marginal analysis requires a 3-qubit state")
    reports = []
    for pair in PAIRS:
        beta = _marginal_pt_min_eig(rho.matrix, pair)
        reports.append(
            MarginalReport(
                pair=pair,
                beta=beta,
                separable=beta >= -VERDICT_TOL,
                transposed_subsystem=pair[0],
            )
        )
    return reports


def beta_values(rho: DensityMatrix) -> np.ndarray:
    """The three beta values as an array ordered like PAIRS."""
    return np.array([report.beta for report in analyze_marginals(rho)])
