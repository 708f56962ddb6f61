"""Pointwise evaluation of the operator-valued Hamiltonian.

Evaluates H(z) and its phase-space gradient from the stacked monomial terms,
either at a single point or over arrays of points (trajectories or quadrature
nodes). Everything here is exact polynomial arithmetic; no quadrature.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InternalError
from .model import HybridHamiltonian, PhasePoint, PureState, hermiticity_defect, _frozen

HERM_TOL = 1e-12
# Expectation values of Hermitian operators pick up only rounding-level
# imaginary parts; anything larger flags a broken operator pipeline.
IMAG_TOL = 1e-9


@dataclass(frozen=True)
class OperatorField:
    """H and its gradient at one phase point: value, d/dq, d/dp (all Hermitian)."""

    value: np.ndarray
    dq: np.ndarray
    dp: np.ndarray

    def __post_init__(self):
        for name in ("value", "dq", "dp"):
            m = np.asarray(getattr(self, name), dtype=complex)
            defect = hermiticity_defect(m)
            if defect > HERM_TOL:
                raise InternalError(f"OperatorField.{name} not Hermitian (defect {defect:.3e})")
            object.__setattr__(self, name, _frozen(m))


def monomial_fields(H: HybridHamiltonian, q: np.ndarray, p: np.ndarray):
    """Per-term scalar fields over points: (value, d/dq, d/dp), each (K, M).

    For term c q^m p^n the derivative fields are c m q^{m-1} p^n and
    c n q^m p^{n-1}; the 0^{-1} case is suppressed by the zero prefactor.
    """
    q = np.asarray(q, dtype=float)
    p = np.asarray(p, dtype=float)
    c = H._coeff[:, None]
    mq = H._qpow[:, None]
    mp = H._ppow[:, None]
    qk = q[None, :] ** mq
    pk = p[None, :] ** mp
    val = c * qk * pk
    dq = c * mq * np.where(mq > 0, q[None, :] ** np.maximum(mq - 1, 0), 0.0) * pk
    dp = c * mp * qk * np.where(mp > 0, p[None, :] ** np.maximum(mp - 1, 0), 0.0)
    return val, dq, dp


def eval_H_many(H: HybridHamiltonian, q: np.ndarray, p: np.ndarray):
    """H(z_a) and its gradient for arrays of points: three (N, n, n) stacks."""
    val, dq, dp = monomial_fields(H, q, p)
    mats = H._mats
    return (
        np.einsum("ka,kij->aij", val, mats),
        np.einsum("ka,kij->aij", dq, mats),
        np.einsum("ka,kij->aij", dp, mats),
    )


def eval_H(H: HybridHamiltonian, z: PhasePoint) -> OperatorField:
    """Evaluate H and its phase-space gradient at one point."""
    val, dq, dp = eval_H_many(H, np.array([z.q]), np.array([z.p]))
    return OperatorField(val[0], dq[0], dp[0])


def expectation_gradients(H: HybridHamiltonian, q, p, psi):
    """Re <psi_a| dH/dq (z_a) |psi_a> and the d/dp partner, shape (N,) each.

    These are the classical force channels shared by the trajectory closure
    and by the zero-coupling limit of the regularized closure; both call this
    exact routine so the reduction is bitwise, not approximate.
    """
    _, dq, dp = eval_H_many(H, q, p)
    psic = np.conjugate(psi)
    eq = np.einsum("ai,aij,aj->a", psic, dq, psi)
    ep = np.einsum("ai,aij,aj->a", psic, dp, psi)
    worst = max(float(np.max(np.abs(eq.imag))), float(np.max(np.abs(ep.imag))))
    if worst > IMAG_TOL:
        raise InternalError(f"expectation of Hermitian gradient has imaginary part {worst:.3e}")
    return eq.real.copy(), ep.real.copy()


def ehrenfest_field(H: HybridHamiltonian, z: PhasePoint, psi: PureState):
    """Classical velocity field (dq/dt, dp/dt) for one trajectory.

    dq/dt = d<psi|H psi>/dp and dp/dt = -d<psi|H psi>/dq, evaluated at z.
    """
    eq, ep = expectation_gradients(
        H, np.array([z.q]), np.array([z.p]), psi.psi[None, :]
    )
    return float(ep[0]), float(-eq[0])
