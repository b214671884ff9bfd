"""Small dense semidefinite-program solver.

Problems are stated over named Hermitian matrix variables ("blocks") with
real-linear equality constraints, PSD cone memberships and a real-linear
objective to minimize. Equalities are eliminated through a null-space
parametrization, complex Hermitian cones are embedded into real symmetric
ones, and the reduced linear matrix inequality is solved with an
infeasible-start primal-dual path-following iteration using Nesterov-Todd
scaling. Problem sizes here are tiny (blocks of at most 16x16 after
embedding), so the implementation favors robustness over speed.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.linalg import solve_triangular

from . import linalg

__all__ = [
    "BlockSpec",
    "LinearFunctional",
    "EqualityConstraint",
    "PsdConstraint",
    "SdpProblem",
    "SolverOptions",
    "SdpSolution",
    "embed_complex",
    "hermitian_basis",
    "solve",
    "problem_debug_json",
]

STATUS_OPTIMAL = "optimal"
STATUS_MAX_ITERATIONS = "max_iterations"
STATUS_INFEASIBLE = "infeasible_suspected"


def embed_complex(h: np.ndarray) -> np.ndarray:
    """Real symmetric embedding [[Re, -Im], [Im, Re]] of a Hermitian matrix.

    The embedding is PSD iff h is PSD; every eigenvalue of h appears twice.
    """
    h = np.asarray(h, dtype=complex)
    re, im = h.real, h.imag
    return np.block([[re, -im], [im, re]])


def hermitian_basis(dim: int) -> list[np.ndarray]:
    """Orthonormal (Frobenius) basis of the dim x dim Hermitian matrices."""
    basis = []
    for i in range(dim):
        e = np.zeros((dim, dim), dtype=complex)
        e[i, i] = 1.0
        basis.append(e)
    inv_sqrt2 = 1.0 / np.sqrt(2.0)
    for i in range(dim):
        for j in range(i + 1, dim):
            e = np.zeros((dim, dim), dtype=complex)
            e[i, j] = e[j, i] = inv_sqrt2
            basis.append(e)
    for i in range(dim):
        for j in range(i + 1, dim):
            e = np.zeros((dim, dim), dtype=complex)
            e[i, j] = 1j * inv_sqrt2
            e[j, i] = -1j * inv_sqrt2
            basis.append(e)
    return basis


@dataclass(frozen=True)
class BlockSpec:
    """Hermitian matrix variable; `basis` restricts it to a real span."""

    name: str
    dim: int
    basis: Optional[tuple] = None  # tuple of Hermitian ndarrays, or None for the full space


@dataclass(frozen=True)
class LinearFunctional:
    """Real-linear functional sum_b Re Tr(G_b @ V_b) over named blocks."""

    terms: dict  # block name -> Hermitian ndarray G


@dataclass(frozen=True)
class EqualityConstraint:
    functional: LinearFunctional
    rhs: float


@dataclass(frozen=True)
class PsdConstraint:
    """Membership L(V_block) >= 0 for an optional fixed linear map L."""

    block: str
    transform: Optional[Callable[[np.ndarray], np.ndarray]] = None


@dataclass(frozen=True)
class SdpProblem:
    blocks: tuple
    equalities: tuple
    psd: tuple
    objective: LinearFunctional


@dataclass(frozen=True)
class SolverOptions:
    tolerance: float = 1e-8
    max_iterations: int = 5000
    seed: Optional[int] = None  # accepted for API stability; the solver is deterministic
    step_scale: float = 0.98
    verbose: bool = False


@dataclass
class SdpSolution:
    status: str
    objective: float
    blocks: dict
    iterations: int
    residuals: dict  # primal feasibility, dual feasibility, signed duality gap
    message: str = ""


# ---------------------------------------------------------------------------
# Problem assembly: coordinates, equality elimination, cone data
# ---------------------------------------------------------------------------


class _Coords:
    """Real coordinates for the stacked block variables."""

    def __init__(self, problem: SdpProblem):
        names = [b.name for b in problem.blocks]
        if len(set(names)) != len(names):
            raise ValueError("duplicate block names")
        self.blocks = {}
        self.slices = {}
        offset = 0
        for spec in problem.blocks:
            if spec.dim < 1:
                raise ValueError(f"block {spec.name!r} has non-positive dimension")
            if spec.basis is None:
                basis = hermitian_basis(spec.dim)
            else:
                basis = [linalg.as_hermitian(m) for m in spec.basis]
                for m in basis:
                    if m.shape != (spec.dim, spec.dim):
                        raise ValueError(
                            f"basis element of block {spec.name!r} has shape {m.shape}, "
                            f"expected {(spec.dim, spec.dim)}"
                        )
            stack = np.array(basis)
            self.blocks[spec.name] = (spec.dim, stack)
            self.slices[spec.name] = slice(offset, offset + len(basis))
            offset += len(basis)
        self.total = offset

    def functional_row(self, functional: LinearFunctional) -> np.ndarray:
        row = np.zeros(self.total)
        for name, g in functional.terms.items():
            if name not in self.blocks:
                raise ValueError(f"functional references undeclared block {name!r}")
            dim, stack = self.blocks[name]
            g = linalg.as_hermitian(g)
            if g.shape != (dim, dim):
                raise ValueError(f"functional matrix for block {name!r} has shape {g.shape}")
            row[self.slices[name]] = np.einsum("ab,kab->k", g.conj(), stack).real
        return row

    def block_value(self, name: str, theta: np.ndarray) -> np.ndarray:
        _, stack = self.blocks[name]
        coeffs = theta[self.slices[name]]
        value = np.tensordot(coeffs, stack, axes=1)
        return (value + value.conj().T) / 2


def _eliminate_equalities(coords: _Coords, problem: SdpProblem, feas_tol: float):
    """Particular solution + orthonormal null-space basis of the equalities."""
    n = coords.total
    if not problem.equalities:
        return np.zeros(n), np.eye(n), 0.0
    e_rows = np.array([coords.functional_row(eq.functional) for eq in problem.equalities])
    rhs = np.array([float(eq.rhs) for eq in problem.equalities])
    theta_p, *_ = np.linalg.lstsq(e_rows, rhs, rcond=None)
    resid = np.max(np.abs(e_rows @ theta_p - rhs)) if rhs.size else 0.0
    if resid > feas_tol * (1.0 + np.max(np.abs(rhs), initial=0.0)):
        raise _InconsistentEqualities(resid)
    _, sing, vt = np.linalg.svd(e_rows, full_matrices=True)
    cutoff = max(e_rows.shape) * np.finfo(float).eps * (sing[0] if sing.size else 0.0)
    rank = int(np.sum(sing > cutoff))
    null_basis = vt[rank:].T  # (n, n - rank), orthonormal columns
    return theta_p, null_basis, resid


class _InconsistentEqualities(Exception):
    def __init__(self, residual: float):
        super().__init__(f"equality constraints are inconsistent (residual {residual:.3e})")
        self.residual = residual


def _cone_data(coords: _Coords, problem: SdpProblem, theta_p, null_basis):
    """Embedded LMI data per cone: S_c(z) = F0_c + sum_j z_j F_jc."""
    nz = null_basis.shape[1]
    cones = []
    for psd in problem.psd:
        if psd.block not in coords.blocks:
            raise ValueError(f"PSD constraint references undeclared block {psd.block!r}")
        transform = psd.transform or (lambda m: m)
        f0 = embed_complex(transform(coords.block_value(psd.block, theta_p)))
        dim, stack = coords.blocks[psd.block]
        coeffs = null_basis[coords.slices[psd.block], :]  # (n_b, nz)
        deltas = np.tensordot(coeffs.T, stack, axes=1)  # (nz, dim, dim)
        fs = np.empty((nz, 2 * dim, 2 * dim))
        for j in range(nz):
            h = deltas[j]
            fs[j] = embed_complex(transform((h + h.conj().T) / 2))
        cones.append((f0, fs))
    return cones


# ---------------------------------------------------------------------------
# Interior-point core on the reduced LMI
# ---------------------------------------------------------------------------


def _sym(m: np.ndarray) -> np.ndarray:
    return (m + m.T) / 2


def _nt_scaling(x: np.ndarray, s: np.ndarray):
    """Nesterov-Todd scaling point W with W S W = X, plus S^{-1}."""
    ws, vs = np.linalg.eigh(s)
    ws = np.clip(ws, 1e-300, None)
    rt = np.sqrt(ws)
    s_half = (vs * rt) @ vs.T
    s_mhalf = (vs / rt) @ vs.T
    s_inv = (vs / ws) @ vs.T
    b = _sym(s_half @ x @ s_half)
    wb, vb = np.linalg.eigh(b)
    wb = np.clip(wb, 1e-300, None)
    b_half = (vb * np.sqrt(wb)) @ vb.T
    w = _sym(s_mhalf @ b_half @ s_mhalf)
    return w, _sym(s_inv)


def _max_step(z: np.ndarray, dz: np.ndarray) -> float:
    """Largest alpha with z + alpha*dz PSD, for PD z."""
    n = z.shape[0]
    try:
        chol = np.linalg.cholesky(z)
    except np.linalg.LinAlgError:
        chol = np.linalg.cholesky(z + 1e-14 * np.trace(z) / n * np.eye(n))
    tmp = solve_triangular(chol, dz, lower=True)
    y = solve_triangular(chol, tmp.T, lower=True).T
    lam = np.linalg.eigvalsh(_sym(y)).min()
    if lam >= -1e-14:
        return np.inf
    return -1.0 / lam


def _solve_spd(m: np.ndarray, rhs: np.ndarray):
    """Cholesky solve with escalating diagonal damping as a fallback."""
    n = m.shape[0]
    scale = max(1.0, float(np.max(np.diag(m), initial=0.0)))
    damp = 0.0
    for attempt in range(7):
        try:
            chol = np.linalg.cholesky(m + damp * np.eye(n))
            tmp = solve_triangular(chol, rhs, lower=True)
            return solve_triangular(chol.T, tmp, lower=False)
        except np.linalg.LinAlgError:
            damp = scale * 10.0 ** (-14 + 2 * attempt)
    return np.linalg.lstsq(m, rhs, rcond=None)[0]


def _ipm(cones, c: np.ndarray, options: SolverOptions):
    """Minimize c.z subject to F0_c + sum_j z_j F_jc >= 0 for every cone.

    Internally runs the standard primal-dual pair
        (P) min <C, X>  s.t. <A_j, X> = b_j, X >= 0
        (D) max b.y     s.t. sum_j y_j A_j + S = C, S >= 0
    with A_j = -F_j, C = F0 and b = -c, so y is the user variable z.
    """
    nz = c.size
    ncones = len(cones)
    a_mats = [-fs.reshape(nz, -1) for _, fs in cones]  # (nz, D*D) per cone
    a_tens = [-fs for _, fs in cones]
    c_mats = [f0 for f0, _ in cones]
    dims = [f0.shape[0] for f0, _ in cones]
    n_tot = sum(dims)
    b = -c

    xs = [np.eye(d) for d in dims]
    ss = [np.eye(d) for d in dims]
    y = np.zeros(nz)

    b_norm = 1.0 + np.linalg.norm(b)
    c_norm = 1.0 + np.sqrt(sum(np.linalg.norm(cm) ** 2 for cm in c_mats))

    best = None
    status = STATUS_MAX_ITERATIONS
    message = ""
    it = 0
    for it in range(1, options.max_iterations + 1):
        rds = [c_mats[k] - ss[k] - np.tensordot(y, a_tens[k], axes=1) for k in range(ncones)]
        rp = b - sum(a_mats[k] @ xs[k].ravel() for k in range(ncones))
        gap = sum(float(np.sum(xs[k] * ss[k])) for k in range(ncones))
        mu = gap / n_tot
        pobj = sum(float(np.sum(c_mats[k] * xs[k])) for k in range(ncones))
        dobj = float(b @ y)
        res_p = np.linalg.norm(rp) / b_norm
        res_d = np.sqrt(sum(np.linalg.norm(rd) ** 2 for rd in rds)) / c_norm
        res_g = (pobj - dobj) / (1.0 + abs(pobj) + abs(dobj))
        worst = max(res_p, res_d, abs(res_g))
        if options.verbose:
            print(
                f"  ipm it={it:3d} mu={mu:9.2e} res_p={res_p:9.2e} "
                f"res_d={res_d:9.2e} gap={res_g:+9.2e}"
            )
        snapshot = (worst, y.copy(), res_p, res_d, res_g, it)
        if best is None or worst < best[0]:
            best = snapshot
        if worst <= options.tolerance:
            status = STATUS_OPTIMAL
            best = snapshot
            break
        if max(max(np.abs(x).max() for x in xs), max(np.abs(s).max() for s in ss)) > 1e12:
            status = STATUS_INFEASIBLE
            message = "iterates diverged; the problem may be primal or dual infeasible"
            break
        if mu < 1e-14 * options.tolerance and worst > options.tolerance:
            status = STATUS_INFEASIBLE
            message = "complementarity vanished with residuals outstanding"
            break

        scal = [_nt_scaling(xs[k], ss[k]) for k in range(ncones)]
        schur = np.zeros((nz, nz))
        wahw = []
        for k in range(ncones):
            w, _ = scal[k]
            t = np.matmul(np.matmul(w, a_tens[k]), w)  # (nz, D, D)
            wahw.append(t)
            schur += a_mats[k] @ t.reshape(nz, -1).T
        schur = _sym(schur)

        def directions(rcs):
            # rhs_j = rp_j - <A_j, Rc> + <A_j, W Rd W>
            rhs = rp.copy()
            for k in range(ncones):
                w, _ = scal[k]
                rhs -= a_mats[k] @ rcs[k].ravel()
                rhs += a_mats[k] @ _sym(w @ rds[k] @ w).ravel()
            dy = _solve_spd(schur, rhs)
            dss = [rds[k] - np.tensordot(dy, a_tens[k], axes=1) for k in range(ncones)]
            dxs = [
                _sym(rcs[k] - scal[k][0] @ dss[k] @ scal[k][0]) for k in range(ncones)
            ]
            return dy, dxs, dss

        # Predictor: pure affine step fixes the centering weight sigma.
        rcs_aff = [-xs[k] for k in range(ncones)]
        _, dxs_aff, dss_aff = directions(rcs_aff)
        ap_aff = min(1.0, min(_max_step(xs[k], dxs_aff[k]) for k in range(ncones)))
        ad_aff = min(1.0, min(_max_step(ss[k], dss_aff[k]) for k in range(ncones)))
        gap_aff = sum(
            float(np.sum((xs[k] + ap_aff * dxs_aff[k]) * (ss[k] + ad_aff * dss_aff[k])))
            for k in range(ncones)
        )
        sigma = float(np.clip((max(gap_aff, 0.0) / gap) ** 3, 1e-8, 0.9)) if gap > 0 else 0.1

        rcs = [sigma * mu * scal[k][1] - xs[k] for k in range(ncones)]
        dy, dxs, dss = directions(rcs)
        ap = min(1.0, options.step_scale * min(_max_step(xs[k], dxs[k]) for k in range(ncones)))
        ad = min(1.0, options.step_scale * min(_max_step(ss[k], dss[k]) for k in range(ncones)))
        if ap < 1e-12 and ad < 1e-12:
            message = "step sizes collapsed before reaching the tolerance"
            break
        for k in range(ncones):
            xs[k] = _sym(xs[k] + ap * dxs[k])
            ss[k] = _sym(ss[k] + ad * dss[k])
        y = y + ad * dy

    worst, y_best, res_p, res_d, res_g, best_it = best
    residuals = {"primal": res_d, "dual": res_p, "gap": res_g}
    return y_best, status, it, residuals, message


# ---------------------------------------------------------------------------
# Public entry point
# ---------------------------------------------------------------------------


def solve(problem: SdpProblem, options: SolverOptions | None = None) -> SdpSolution:
    """Solve the SDP, minimizing the objective functional.

    Returns a status-qualified solution: block values, the objective at the
    returned point, and KKT residuals (primal feasibility, dual feasibility,
    signed duality gap, all normalized).
    """
    options = options or SolverOptions()
    coords = _Coords(problem)
    c_theta = coords.functional_row(problem.objective)

    def finish(theta, status, iterations, residuals, message=""):
        blocks = {spec.name: coords.block_value(spec.name, theta) for spec in problem.blocks}
        objective = float(c_theta @ theta)
        return SdpSolution(
            status=status,
            objective=objective,
            blocks=blocks,
            iterations=iterations,
            residuals=residuals,
            message=message,
        )

    try:
        theta_p, null_basis, eq_resid = _eliminate_equalities(
            coords, problem, feas_tol=max(options.tolerance, 1e-9)
        )
    except _InconsistentEqualities as exc:
        coords_zero = np.zeros(coords.total)
        return finish(
            coords_zero,
            STATUS_INFEASIBLE,
            0,
            {"primal": exc.residual, "dual": 0.0, "gap": 0.0},
            str(exc),
        )

    cones = _cone_data(coords, problem, theta_p, null_basis)
    nz = null_basis.shape[1]
    c_z = null_basis.T @ c_theta

    # Restrict to directions the cones can see; leftover directions either
    # make the problem unbounded (objective component) or are fixed at zero.
    if cones and nz > 0:
        g = np.hstack([fs.reshape(nz, -1) for _, fs in cones])
        u, sing, _ = np.linalg.svd(g, full_matrices=False)
        cutoff = max(g.shape) * np.finfo(float).eps * (sing[0] if sing.size else 0.0)
        rank = int(np.sum(sing > cutoff))
        visible = u[:, :rank]
    else:
        visible = np.zeros((nz, 0))
        rank = 0

    c_invisible = c_z - visible @ (visible.T @ c_z)
    if np.linalg.norm(c_invisible) > 1e-9 * (1.0 + np.linalg.norm(c_z)):
        return finish(
            theta_p,
            STATUS_INFEASIBLE,
            0,
            {"primal": 0.0, "dual": np.inf, "gap": -np.inf},
            "objective is unbounded along a direction invisible to the cones",
        )

    if rank == 0:
        # Nothing to optimize; theta_p must already satisfy the cones.
        worst = 0.0
        for f0, _ in cones:
            worst = min(worst, float(np.linalg.eigvalsh(f0).min()))
        if worst < -np.sqrt(options.tolerance):
            return finish(
                theta_p,
                STATUS_INFEASIBLE,
                0,
                {"primal": -worst, "dual": 0.0, "gap": 0.0},
                "constant cone constraint is not positive semidefinite",
            )
        return finish(theta_p, STATUS_OPTIMAL, 0, {"primal": 0.0, "dual": 0.0, "gap": 0.0})

    reduced_cones = [
        (f0, np.tensordot(visible.T, fs, axes=1)) for f0, fs in cones
    ]
    c_red = visible.T @ c_z

    zeta, status, iterations, residuals, message = _ipm(reduced_cones, c_red, options)
    theta = theta_p + null_basis @ (visible @ zeta)
    return finish(theta, status, iterations, residuals, message)


def problem_debug_json(problem: SdpProblem) -> dict:
    """Dump a problem to a JSON-friendly dict for offline inspection.

    Debug aid only; not a stable interchange format.
    """

    def enc(m):
        return linalg.matrix_to_json(np.asarray(m, dtype=complex), dims=[m.shape[0]])

    return {
        "blocks": [
            {
                "name": spec.name,
                "dim": spec.dim,
                "basis_size": len(spec.basis) if spec.basis is not None else spec.dim**2,
            }
            for spec in problem.blocks
        ],
        "equalities": [
            {
                "rhs": eq.rhs,
                "terms": {name: enc(g) for name, g in eq.functional.terms.items()},
            }
            for eq in problem.equalities
        ],
        "psd": [
            {"block": psd.block, "transformed": psd.transform is not None}
            for psd in problem.psd
        ],
        "objective": {name: enc(g) for name, g in problem.objective.terms.items()},
    }
