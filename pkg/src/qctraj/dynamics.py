"""Equations of motion for the three trajectory closures.

Per-trajectory closure (no pair coupling):

    dq_a = d<psi_a|H_a psi_a>/dp,  dp_a = -d<psi_a|H_a psi_a>/dq,
    i hbar dpsi_a = H_a psi_a,     H_a := H(zeta_a).

Shared-density closure: the classical force uses one ensemble rho for every
trajectory and rho evolves under the weighted average of the H(zeta_a).

Regularized closure: trajectories exchange population through the kernel
tables. The discrete ensemble Hamiltonian

    h = sum_a w_a Re <psi_a|H_a psi_a>
        - hbar sum_ab w_a w_b Im Tr([rho_a, rho_b] I_ab)

generates the flow: dq_s = (1/w_s) dh/dp_s, dp_s = -(1/w_s) dh/dq_s, and
i hbar dpsi_a = G_a psi_a with G_a = (1/w_a) dh/drho_a, which keeps h constant
along exact trajectories and every |psi_a| at norm one.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from .errors import GeometryError, InternalError
from .hamiltonian import IMAG_TOL, eval_H_many
from .kernels import (
    JTable,
    KernelIntegralTable,
    KernelTableBuilder,
    Mollifier,
    QuadratureGrid,
    j_values,
    require_fresh,
)
from .model import ClosureState, HybridHamiltonian, _frozen, hermiticity_defect

GENERATOR_HERM_TOL = 1e-10
FIELD_HERM_TOL = 1e-10
FIELD_TRACE_TOL = 1e-12


@dataclass(frozen=True)
class StateDerivative:
    """Time derivative of a ClosureState; exactly one of dpsi/drho is set."""

    dq: np.ndarray
    dp: np.ndarray
    dpsi: Optional[np.ndarray] = None
    drho: Optional[np.ndarray] = None


@dataclass(frozen=True)
class EffectiveGenerator:
    """Per-trajectory Hermitian generators G_a driving i hbar dpsi_a = G_a psi_a."""

    matrices: np.ndarray
    state_gen: int

    def __post_init__(self):
        defect = hermiticity_defect(self.matrices)
        if defect > GENERATOR_HERM_TOL:
            raise InternalError(
                f"effective generator Hermiticity defect {defect:.3e} exceeds "
                f"{GENERATOR_HERM_TOL:.0e}; the coupling pipeline is broken"
            )
        object.__setattr__(self, "matrices", _frozen(self.matrices))


def _trajectory_parts(state: ClosureState, H: HybridHamiltonian):
    """H(zeta_a) plus force expectations, shared by every per-trajectory path.

    Both the plain trajectory closure and the regularized closure call this
    one routine, so their classical channels agree bitwise whenever the
    coupling contribution vanishes.
    """
    val, dHq, dHp = eval_H_many(H, state.q, state.p)
    psic = np.conjugate(state.psi)
    fq = np.einsum("ai,aij,aj->a", psic, dHq, state.psi)
    fp = np.einsum("ai,aij,aj->a", psic, dHp, state.psi)
    worst = max(float(np.max(np.abs(fq.imag))), float(np.max(np.abs(fp.imag))))
    if worst > IMAG_TOL:
        raise InternalError(f"force expectation has imaginary part {worst:.3e}")
    return val, fq.real.copy(), fp.real.copy()


def _pair_commutators(state: ClosureState) -> np.ndarray:
    """[rho_a, rho_b] for all pairs, shape (N, N, n, n); anti-Hermitian."""
    rho = state.densities()
    prod = np.einsum("aij,bjk->abik", rho, rho)
    return prod - np.conjugate(np.swapaxes(prod, -1, -2))


def rhs_ehrenfest(state: ClosureState, H: HybridHamiltonian) -> StateDerivative:
    """Independent-trajectory closure; no inter-trajectory terms at all."""
    val, fq, fp = _trajectory_parts(state, H)
    dpsi = (-1j / state.hbar) * np.einsum("aij,aj->ai", val, state.psi)
    return StateDerivative(dq=fp, dp=-fq, dpsi=dpsi)


def rhs_meanfield(state: ClosureState, H: HybridHamiltonian) -> StateDerivative:
    """Shared-density closure: one rho sees the weighted average Hamiltonian."""
    val, dHq, dHp = eval_H_many(H, state.q, state.p)
    rho = state.rho
    fq = np.einsum("ij,aji->a", rho, dHq)
    fp = np.einsum("ij,aji->a", rho, dHp)
    worst = max(float(np.max(np.abs(fq.imag))), float(np.max(np.abs(fp.imag))))
    if worst > IMAG_TOL:
        raise InternalError(f"force expectation has imaginary part {worst:.3e}")
    h_mf = np.einsum("a,aij->ij", state.weights.w, val)
    drho = (-1j / state.hbar) * (h_mf @ rho - rho @ h_mf)
    return StateDerivative(dq=fp.real.copy(), dp=-fq.real.copy(), drho=drho)


def hamiltonian_h(state: ClosureState, H: HybridHamiltonian,
                  tables: KernelIntegralTable) -> float:
    """Discrete ensemble Hamiltonian of the regularized closure.

    Conserved along exact trajectories of rhs_regularized; the quadrature grid
    is part of its definition, so the same grid must be used throughout a run.
    """
    require_fresh(tables, state)
    val, _, _ = eval_H_many(H, state.q, state.p)
    w = state.weights.w
    psic = np.conjugate(state.psi)
    base = float(np.einsum("a,ai,aij,aj->", w, psic, val, state.psi).real)
    comm = _pair_commutators(state)
    cross = np.einsum("a,b,abij,abji->", w, w, comm, tables.I)
    return base - state.hbar * float(cross.imag)


def gradient_h(state: ClosureState, H: HybridHamiltonian,
               tables: KernelIntegralTable):
    """Exact (dh/dq_s, dh/dp_s) of the discretized ensemble Hamiltonian."""
    require_fresh(tables, state)
    if tables.dI is None:
        raise InternalError("gradient_h needs a table built with derivatives")
    _, fq, fp = _trajectory_parts(state, H)
    comm = _pair_commutators(state)
    tr = np.einsum("abij,abscji->absc", comm, tables.dI).imag
    ww = state.weights.w[:, None] * state.weights.w[None, :]
    table_grad = np.einsum("ab,absc->sc", ww, tr)
    dh_dq = state.weights.w * fq - state.hbar * table_grad[:, 0]
    dh_dp = state.weights.w * fp - state.hbar * table_grad[:, 1]
    return dh_dq, dh_dp


def effective_generators(state: ClosureState, H: HybridHamiltonian,
                         tables: KernelIntegralTable) -> EffectiveGenerator:
    """G_a = H_a + i hbar sum_b w_b [rho_b, I_ab - I_ba]."""
    require_fresh(tables, state)
    val, _, _ = eval_H_many(H, state.q, state.p)
    D = tables.I - np.transpose(tables.I, (1, 0, 2, 3))
    rho = state.densities()
    lhs = np.einsum("bjk,abkl->abjl", rho, D)
    commD = lhs - np.swapaxes(np.conjugate(lhs), -1, -2)
    G = val + 1j * state.hbar * np.einsum("b,abij->aij", state.weights.w, commD)
    return EffectiveGenerator(matrices=G, state_gen=state.gen)


def rhs_regularized(state: ClosureState, H: HybridHamiltonian,
                    mollifier: Optional[Mollifier] = None,
                    grid: Optional[QuadratureGrid] = None, *,
                    coupling: bool = True,
                    pair_cutoff: bool = True,
                    builder: Optional[KernelTableBuilder] = None) -> StateDerivative:
    """Regularized closure right-hand side.

    With coupling disabled the kernel machinery is bypassed entirely and the
    result is computed by the same code path as rhs_ehrenfest. Passing a
    prebuilt KernelTableBuilder avoids recomputing static node data each call.
    """
    if not coupling:
        return rhs_ehrenfest(state, H)
    if builder is None:
        if mollifier is None or grid is None:
            raise InternalError("rhs_regularized needs a mollifier and grid (or a builder)")
        builder = KernelTableBuilder(H, mollifier, grid, pair_cutoff=pair_cutoff)
    tables = builder.integrals(state, derivatives=True)
    val, fq, fp = _trajectory_parts(state, H)
    comm = _pair_commutators(state)
    tr = np.einsum("abij,abscji->absc", comm, tables.dI).imag
    ww = state.weights.w[:, None] * state.weights.w[None, :]
    table_grad = np.einsum("ab,absc->sc", ww, tr)
    inv_w = 1.0 / state.weights.w
    dq = fp - state.hbar * inv_w * table_grad[:, 1]
    dp = -fq + state.hbar * inv_w * table_grad[:, 0]
    D = tables.I - np.transpose(tables.I, (1, 0, 2, 3))
    rho = state.densities()
    lhs = np.einsum("bjk,abkl->abjl", rho, D)
    commD = lhs - np.swapaxes(np.conjugate(lhs), -1, -2)
    G = val + 1j * state.hbar * np.einsum("b,abij->aij", state.weights.w, commD)
    defect = hermiticity_defect(G)
    if defect > GENERATOR_HERM_TOL:
        raise InternalError(
            f"effective generator Hermiticity defect {defect:.3e} exceeds "
            f"{GENERATOR_HERM_TOL:.0e}; the coupling pipeline is broken"
        )
    dpsi = (-1j / state.hbar) * np.einsum("aij,aj->ai", G, state.psi)
    return StateDerivative(dq=dq, dp=dp, dpsi=dpsi)


@dataclass(frozen=True)
class HybridOperatorField:
    """Operator-valued hybrid density: a smooth field plus trajectory point masses.

    smooth[s] is the Hermitian, traceless matrix
    i hbar sum_ab w_a w_b J_ab(z_s) [rho_a, rho_b] at sample s; point_masses
    holds (zeta_a, w_a rho_a) pairs carrying the singular part.
    """

    sample_q: np.ndarray
    sample_p: np.ndarray
    smooth: np.ndarray
    point_masses: Tuple

    def total_point_mass(self) -> np.ndarray:
        """Sum of the point-mass matrices; trace 1 for normalized ensembles."""
        return np.sum([m for _, m in self.point_masses], axis=0)


def hybrid_operator_field(state: ClosureState, j_table: JTable,
                          sample_q: Sequence[float],
                          sample_p: Sequence[float]) -> HybridOperatorField:
    """Evaluate the hybrid operator's smooth part at samples inside the box."""
    require_fresh(j_table, state)
    sq = np.atleast_1d(np.asarray(sample_q, dtype=float))
    sp = np.atleast_1d(np.asarray(sample_p, dtype=float))
    if sq.shape != sp.shape:
        raise GeometryError(f"sample arrays disagree in shape: {sq.shape} vs {sp.shape}")
    inside = j_table.grid.contains(sq, sp)
    if not np.all(inside):
        s = int(np.nonzero(~inside)[0][0])
        raise GeometryError(
            f"sample {s} at ({sq[s]:.6g}, {sp[s]:.6g}) lies outside the quadrature box"
        )
    Js = j_values(state, j_table.mollifier, sq, sp)
    comm = _pair_commutators(state)
    w = state.weights.w
    smooth = 1j * state.hbar * np.einsum("a,b,abs,abij->sij", w, w, Js, comm)
    defect = hermiticity_defect(smooth)
    if defect > FIELD_HERM_TOL:
        raise InternalError(f"hybrid field Hermiticity defect {defect:.3e}")
    worst_tr = float(np.max(np.abs(np.trace(smooth, axis1=-2, axis2=-1))))
    if worst_tr > FIELD_TRACE_TOL:
        raise InternalError(f"hybrid field trace defect {worst_tr:.3e}")
    masses = tuple(
        (state.point(a), state.weights.w[a] * rho_a)
        for a, rho_a in enumerate(state.densities())
    )
    return HybridOperatorField(sample_q=sq, sample_p=sp, smooth=smooth, point_masses=masses)
