"""Fixed-step RK4 time stepping and run orchestration.

The stepper advances (zeta, psi) or (zeta, rho) jointly and renormalizes each
psi_a after the full step, logging the correction; a correction above 1e-10
at dt <= 1e-3 means the generator pipeline lost Hermiticity and is treated as
a bug, not as noise. Intermediate Runge-Kutta states skip invariant
validation (they sit off the constraint manifold at rounding level by
construction); diagnostics re-validate at every record point.
"""

from __future__ import annotations

import logging
import math
from contextlib import nullcontext
from dataclasses import dataclass, replace
from typing import Callable, List, Optional, Tuple

import numpy as np

from .config import RunConfig, build_state
from .diagnostics import DiagnosticsRecord, record
from .dynamics import StateDerivative, rhs_ehrenfest, rhs_meanfield, rhs_regularized
from .errors import ConfigError, DivergenceError, InternalError
from .kernels import KernelTableBuilder
from .model import ClosureState

log = logging.getLogger(__name__)

RENORM_TOL = 1e-10
RENORM_DT_BOUND = 1e-3 * (1.0 + 1e-9)


@dataclass(frozen=True)
class Trajectory:
    """States captured at the output cadence, starting at t = 0."""

    times: np.ndarray
    states: Tuple[ClosureState, ...]

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        if times.size == 0 or times[0] != 0.0:
            raise InternalError("trajectory must start at t = 0")
        if times.size != len(self.states):
            raise InternalError("trajectory times and states disagree in length")
        if np.any(np.diff(times) <= 0.0):
            raise InternalError("trajectory times must be strictly increasing")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "states", tuple(self.states))


@dataclass(frozen=True)
class RunResult:
    trajectory: Trajectory
    records: Tuple[DiagnosticsRecord, ...]
    final_state: ClosureState
    max_renorm_correction: float


def _check_derivative(d: StateDerivative, t: Optional[float]) -> None:
    suffix = "" if t is None else f" at t = {t:.9g}"
    for name, arr in (("dq", d.dq), ("dp", d.dp), ("dpsi", d.dpsi), ("drho", d.drho)):
        if arr is None:
            continue
        finite = np.isfinite(arr) if arr.dtype.kind != "c" else (
            np.isfinite(arr.real) & np.isfinite(arr.imag)
        )
        if not np.all(finite):
            flat = int(np.nonzero(~finite.ravel())[0][0])
            if name == "drho":
                raise DivergenceError(f"non-finite {name} entry {flat}{suffix}")
            a = flat if arr.ndim == 1 else flat // arr.shape[1]
            raise DivergenceError(f"non-finite {name} for trajectory {a}{suffix}")


def _shifted(state: ClosureState, d: StateDerivative, h: float) -> ClosureState:
    q = state.q + h * d.dq
    p = state.p + h * d.dp
    if state.per_trajectory:
        return ClosureState._advanced(q, p, state.weights, state.hbar,
                                      psi=state.psi + h * d.dpsi)
    return ClosureState._advanced(q, p, state.weights, state.hbar,
                                  rho=state.rho + h * d.drho)


def step_rk4(state: ClosureState, rhs: Callable[[ClosureState], StateDerivative],
             dt: float, *, t: Optional[float] = None,
             stats: Optional[dict] = None) -> ClosureState:
    """One classical RK4 step applied jointly to the whole closure state."""
    if dt <= 0.0:
        raise ConfigError(f"dt must be positive, got {dt!r}")
    k1 = rhs(state)
    _check_derivative(k1, t)
    k2 = rhs(_shifted(state, k1, 0.5 * dt))
    _check_derivative(k2, t)
    k3 = rhs(_shifted(state, k2, 0.5 * dt))
    _check_derivative(k3, t)
    k4 = rhs(_shifted(state, k3, dt))
    _check_derivative(k4, t)
    c = dt / 6.0
    q = state.q + c * (k1.dq + 2.0 * k2.dq + 2.0 * k3.dq + k4.dq)
    p = state.p + c * (k1.dp + 2.0 * k2.dp + 2.0 * k3.dp + k4.dp)
    correction = 0.0
    if state.per_trajectory:
        psi = state.psi + c * (k1.dpsi + 2.0 * k2.dpsi + 2.0 * k3.dpsi + k4.dpsi)
        norms = np.linalg.norm(psi, axis=1)
        correction = float(np.max(np.abs(norms - 1.0)))
        if dt <= RENORM_DT_BOUND and correction > RENORM_TOL:
            raise InternalError(
                f"renormalization correction {correction:.3e} exceeds {RENORM_TOL:.0e} "
                f"at dt = {dt:g}; the generator Hermiticity pipeline is broken"
            )
        log.debug("renormalization correction %.3e", correction)
        new = ClosureState._advanced(q, p, state.weights, state.hbar,
                                     psi=psi / norms[:, None])
    else:
        rho = state.rho + c * (k1.drho + 2.0 * k2.drho + 2.0 * k3.drho + k4.drho)
        new = ClosureState._advanced(q, p, state.weights, state.hbar, rho=rho)
    if stats is not None:
        stats["renorm_correction"] = correction
    return new


def make_rhs(config: RunConfig) -> Callable[[ClosureState], StateDerivative]:
    """RHS closure for the configured model, with kernel caches prebuilt."""
    H = config.hamiltonian
    if config.model == "ehrenfest":
        return lambda s: rhs_ehrenfest(s, H)
    if config.model == "meanfield":
        return lambda s: rhs_meanfield(s, H)
    if not config.coupling_hbar_terms:
        return lambda s: rhs_regularized(s, H, coupling=False)
    builder = KernelTableBuilder(H, config.mollifier, config.grid,
                                 pair_cutoff=config.pair_cutoff)
    return lambda s: rhs_regularized(s, H, coupling=True, builder=builder)


def _deterministic_context():
    """Pin BLAS pools to one thread so reduction order is machine-fixed."""
    try:
        from threadpoolctl import threadpool_limits
    except ImportError:  # reductions are still fixed-order numpy expressions
        log.warning("threadpoolctl not installed; deterministic mode relies on "
                    "single-threaded reductions already in use")
        return nullcontext()
    return threadpool_limits(limits=1)


def integrate(config: RunConfig) -> RunResult:
    """Run from t = 0 to t_final, recording diagnostics at the output cadence.

    The step count is fixed up front; a single shorter remainder step lands
    exactly on t_final when it is not an integer multiple of dt. Geometry and
    divergence errors propagate annotated with the simulation time.
    """
    with _deterministic_context() if config.deterministic else nullcontext():
        return _integrate_body(config)


def _integrate_body(config: RunConfig) -> RunResult:
    state = build_state(config)
    rhs = make_rhs(config)
    builder = None
    if config.model == "regularized" and config.coupling_hbar_terms:
        builder = KernelTableBuilder(config.hamiltonian, config.mollifier, config.grid,
                                     pair_cutoff=config.pair_cutoff)

    def take_record(s: ClosureState, t: float) -> DiagnosticsRecord:
        return record(s, config.hamiltonian, t, model=config.model,
                      coupling=config.coupling_hbar_terms, builder=builder,
                      table_norms=config.table_norms)

    n_full = int(math.floor(config.t_final / config.dt + 1e-9))
    remainder = config.t_final - n_full * config.dt
    if remainder < 1e-12 * max(config.t_final, 1.0):
        remainder = 0.0

    records: List[DiagnosticsRecord] = [take_record(state, 0.0)]
    times = [0.0]
    snaps = [state]
    stats: dict = {}
    max_corr = 0.0
    every = config.output_every
    for k in range(1, n_full + 1):
        t_prev = (k - 1) * config.dt
        state = step_rk4(state, rhs, config.dt, t=t_prev, stats=stats)
        max_corr = max(max_corr, stats["renorm_correction"])
        t_now = k * config.dt
        if k % every == 0 and not (k == n_full and remainder == 0.0):
            records.append(take_record(state, t_now))
            times.append(t_now)
            snaps.append(state)
    if remainder > 0.0:
        state = step_rk4(state, rhs, remainder, t=n_full * config.dt, stats=stats)
        max_corr = max(max_corr, stats["renorm_correction"])
    records.append(take_record(state, config.t_final))
    times.append(config.t_final)
    snaps.append(state)
    return RunResult(
        trajectory=Trajectory(times=np.asarray(times), states=tuple(snaps)),
        records=tuple(records),
        final_state=state,
        max_renorm_correction=max_corr,
    )


def state_distance(a: ClosureState, b: ClosureState) -> float:
    """Max-abs difference over all state components; used by convergence tests."""
    if a.per_trajectory != b.per_trajectory:
        raise ConfigError("cannot compare states of different variants")
    d = max(float(np.max(np.abs(a.q - b.q))), float(np.max(np.abs(a.p - b.p))))
    if a.per_trajectory:
        return max(d, float(np.max(np.abs(a.psi - b.psi))))
    return max(d, float(np.max(np.abs(a.rho - b.rho))))


def self_convergence_slope(config: RunConfig, dts, ref_dt: float):
    """Log-log slope of endpoint error versus dt against a fine reference run.

    Returns (slope, errors); fixed-step RK4 should give a slope near 4.
    """
    dts = sorted(float(d) for d in dts)
    if ref_dt >= dts[0] / 2.0:
        raise ConfigError("reference dt must be well below the smallest test dt")
    ref = integrate(replace(config, dt=ref_dt)).final_state
    errors = [state_distance(integrate(replace(config, dt=d)).final_state, ref)
              for d in dts]
    slope = float(np.polyfit(np.log(dts), np.log(errors), 1)[0])
    return slope, errors
