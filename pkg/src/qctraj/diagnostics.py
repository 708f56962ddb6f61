"""Scalar diagnostics, CSV streams, and JSON state snapshots.

Purity is reported twice on purpose: per trajectory, where it is pinned to 1
by construction and only measures pipeline health, and for the ensemble
density matrix, where its change is the decoherence signal. Energy dispatches
on the model: the per-trajectory functional for the plain closure, the
averaged-Hamiltonian trace for the shared-density closure, and the discrete
ensemble Hamiltonian (kernel coupling included) for the regularized closure.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from .dynamics import hamiltonian_h
from .errors import InternalError
from .hamiltonian import eval_H_many
from .kernels import KernelTableBuilder, Mollifier, QuadratureGrid, compute_J
from .model import ClosureState, DensityMatrix, HybridHamiltonian, ensemble_rho

PURITY_SLACK = 1e-9
MIN_EIG_FLOOR = -1e-9

RUN_CSV_COLUMNS = (
    "t", "energy", "purity", "norm_min", "norm_max",
    "traj_purity_min", "traj_purity_max", "rho_min_eig",
    "i_table_norm", "j_table_norm",
)
TRAJ_CSV_COLUMNS = ("t", "traj", "q", "p")


def purity(rho) -> float:
    """Tr(rho^2); 1 for pure states, 1/n for the maximally mixed state."""
    mat = rho.rho if isinstance(rho, DensityMatrix) else np.asarray(rho)
    return float(np.einsum("ij,ji->", mat, mat).real)


@dataclass(frozen=True)
class DiagnosticsRecord:
    """One measurement row; constructing it re-checks the state invariants."""

    t: float
    energy: float
    purity: float
    norms: np.ndarray
    traj_purity: np.ndarray
    rho_min_eig: float
    hilbert_dim: int
    i_table_norm: Optional[float] = None
    j_table_norm: Optional[float] = None

    def __post_init__(self):
        lo = 1.0 / self.hilbert_dim - PURITY_SLACK
        if not (lo <= self.purity <= 1.0 + PURITY_SLACK):
            raise InternalError(
                f"ensemble purity {self.purity!r} outside [{lo}, {1.0 + PURITY_SLACK}] "
                f"at t = {self.t:g}"
            )
        if self.rho_min_eig < MIN_EIG_FLOOR:
            raise InternalError(
                f"ensemble density matrix eigenvalue {self.rho_min_eig:.3e} below "
                f"{MIN_EIG_FLOOR:.0e} at t = {self.t:g}"
            )


def record(state: ClosureState, H: HybridHamiltonian, t: float, *, model: str,
           coupling: bool = True,
           mollifier: Optional[Mollifier] = None,
           grid: Optional[QuadratureGrid] = None,
           builder: Optional[KernelTableBuilder] = None,
           table_norms: bool = False) -> DiagnosticsRecord:
    """Measure one state. For the regularized model with coupling enabled a
    kernel table (fresh for this state) is built for the energy; pass builder
    to reuse cached node data across records."""
    w = state.weights.w
    rho_ens = ensemble_rho(state)
    pur = float(np.einsum("ij,ji->", rho_ens, rho_ens).real)
    min_eig = float(np.linalg.eigvalsh(0.5 * (rho_ens + rho_ens.conj().T)).min())

    if state.per_trajectory:
        norms = np.linalg.norm(state.psi, axis=1)
        traj_pur = norms**4
    else:
        # Shared-density variant: the norm column carries Tr(rho) and the
        # per-trajectory purity column the ensemble purity (see docs/formats.md).
        norms = np.array([float(np.trace(rho_ens).real)])
        traj_pur = np.array([pur])

    kernel_active = model == "regularized" and coupling
    if kernel_active and builder is None:
        if mollifier is None or grid is None:
            raise InternalError("regularized diagnostics need a builder or mollifier+grid")
        builder = KernelTableBuilder(H, mollifier, grid)

    if model == "meanfield":
        val, _, _ = eval_H_many(H, state.q, state.p)
        h_mf = np.einsum("a,aij->ij", w, val)
        energy = float(np.einsum("ij,ji->", rho_ens, h_mf).real)
    elif kernel_active:
        energy = hamiltonian_h(state, H, builder.integrals(state))
    else:
        val, _, _ = eval_H_many(H, state.q, state.p)
        psic = np.conjugate(state.psi)
        energy = float(np.einsum("a,ai,aij,aj->", w, psic, val, state.psi).real)

    i_norm = j_norm = None
    if table_norms and kernel_active:
        table = builder.integrals(state)
        i_norm = float(np.sqrt(np.max(np.sum(np.abs(table.I) ** 2, axis=(-2, -1)))))
        jt = compute_J(state, builder.mollifier, builder.grid)
        j_norm = float(np.max(np.abs(jt.J)))

    return DiagnosticsRecord(
        t=t, energy=energy, purity=pur, norms=norms, traj_purity=traj_pur,
        rho_min_eig=min_eig, hilbert_dim=state.hilbert_dim,
        i_table_norm=i_norm, j_table_norm=j_norm,
    )


def _fmt(x) -> str:
    if x is None:
        return ""
    return repr(float(x))


def run_csv_lines(records: Sequence[DiagnosticsRecord]) -> List[str]:
    lines = [",".join(RUN_CSV_COLUMNS)]
    for r in records:
        lines.append(",".join([
            _fmt(r.t), _fmt(r.energy), _fmt(r.purity),
            _fmt(np.min(r.norms)), _fmt(np.max(r.norms)),
            _fmt(np.min(r.traj_purity)), _fmt(np.max(r.traj_purity)),
            _fmt(r.rho_min_eig), _fmt(r.i_table_norm), _fmt(r.j_table_norm),
        ]))
    return lines


def write_run_csv(records: Sequence[DiagnosticsRecord], path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write("\n".join(run_csv_lines(records)) + "\n")


def trajectories_csv_lines(times, states: Sequence[ClosureState]) -> List[str]:
    """Long-format per-trajectory positions; the phase-portrait input."""
    lines = [",".join(TRAJ_CSV_COLUMNS)]
    for t, s in zip(times, states):
        for a in range(s.n_traj):
            lines.append(f"{_fmt(t)},{a},{_fmt(s.q[a])},{_fmt(s.p[a])}")
    return lines


def write_trajectories_csv(times, states: Sequence[ClosureState], path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write("\n".join(trajectories_csv_lines(times, states)) + "\n")


def snapshot_dict(state: ClosureState, t: float, model: str) -> dict:
    """JSON-ready full state dump."""
    out = {
        "t": float(t),
        "model": model,
        "hbar": state.hbar,
        "weights": state.weights.w.tolist(),
        "q": state.q.tolist(),
        "p": state.p.tolist(),
    }
    if state.per_trajectory:
        out["psi_re"] = state.psi.real.tolist()
        out["psi_im"] = state.psi.imag.tolist()
    else:
        out["rho_re"] = state.rho.real.tolist()
        out["rho_im"] = state.rho.imag.tolist()
    return out


def write_snapshot(state: ClosureState, t: float, model: str, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(snapshot_dict(state, t, model), f, sort_keys=True, indent=1)
        f.write("\n")


def summarize(records: Sequence[DiagnosticsRecord]) -> dict:
    """Endpoint/extreme diagnostics across a run; feeds scan index rows."""
    first, last = records[0], records[-1]
    scale = max(abs(first.energy), 1e-30)
    return {
        "t_final": last.t,
        "energy_first": first.energy,
        "energy_last": last.energy,
        "energy_drift_rel": max(abs(r.energy - first.energy) for r in records) / scale,
        "purity_first": first.purity,
        "purity_last": last.purity,
        "purity_change_max": max(abs(r.purity - first.purity) for r in records),
        "rho_min_eig_min": min(r.rho_min_eig for r in records),
        "norm_dev_max": max(float(np.max(np.abs(r.norms - 1.0))) for r in records),
        "traj_purity_dev_max": max(float(np.max(np.abs(r.traj_purity - 1.0)))
                                   for r in records),
    }
