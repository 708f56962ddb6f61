"""Core value types shared across the package.

Phase-space points, quantum states, trajectory weights, the operator-valued
Hamiltonian, and the ensemble state advanced by the integrators. All types are
frozen; integration produces new states instead of mutating old ones. Each
ClosureState carries a generation token so derived tables can detect staleness.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import ConfigError

# Tolerances for construction-time invariants.
NORM_TOL = 1e-9
HERM_TOL = 1e-12
WEIGHT_SUM_TOL = 1e-12
EIG_FLOOR = -1e-10

_generation = itertools.count(1)


def _frozen(a: np.ndarray) -> np.ndarray:
    out = np.array(a, copy=True)
    out.setflags(write=False)
    return out


def hermiticity_defect(m: np.ndarray) -> float:
    """Largest absolute entry of m - m^dagger (over trailing two axes)."""
    return float(np.max(np.abs(m - np.conjugate(np.swapaxes(m, -1, -2)))))


@dataclass(frozen=True)
class PhasePoint:
    """A classical phase-space point z = (q, p)."""

    q: float
    p: float

    def __post_init__(self):
        if not (np.isfinite(self.q) and np.isfinite(self.p)):
            raise ConfigError(f"phase point must be finite, got ({self.q}, {self.p})")


@dataclass(frozen=True)
class PureState:
    """A normalized state vector in C^n."""

    psi: np.ndarray

    def __post_init__(self):
        psi = np.asarray(self.psi, dtype=complex)
        if psi.ndim != 1 or psi.size == 0:
            raise ConfigError(f"state vector must be a nonempty 1-d array, got shape {psi.shape}")
        nrm = float(np.linalg.norm(psi))
        if abs(nrm - 1.0) > NORM_TOL:
            raise ConfigError(f"state vector norm {nrm!r} deviates from 1 by more than {NORM_TOL}")
        object.__setattr__(self, "psi", _frozen(psi))

    @property
    def dim(self) -> int:
        return self.psi.size

    def density(self) -> "DensityMatrix":
        return DensityMatrix(np.outer(self.psi, np.conjugate(self.psi)))


@dataclass(frozen=True)
class DensityMatrix:
    """A Hermitian, unit-trace, positive-semidefinite matrix on C^n."""

    rho: np.ndarray

    def __post_init__(self):
        rho = np.asarray(self.rho, dtype=complex)
        if rho.ndim != 2 or rho.shape[0] != rho.shape[1] or rho.shape[0] == 0:
            raise ConfigError(f"density matrix must be square, got shape {rho.shape}")
        defect = hermiticity_defect(rho)
        if defect > HERM_TOL:
            raise ConfigError(f"density matrix is not Hermitian (defect {defect:.3e})")
        tr = float(np.trace(rho).real)
        if abs(tr - 1.0) > NORM_TOL:
            raise ConfigError(f"density matrix trace {tr!r} deviates from 1 by more than {NORM_TOL}")
        lo = float(np.linalg.eigvalsh(0.5 * (rho + rho.conj().T)).min())
        if lo < EIG_FLOOR:
            raise ConfigError(f"density matrix has negative eigenvalue {lo:.3e}")
        object.__setattr__(self, "rho", _frozen(rho))

    @property
    def dim(self) -> int:
        return self.rho.shape[0]


@dataclass(frozen=True)
class Weights:
    """Strictly positive trajectory weights summing to one."""

    w: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.w, dtype=float)
        if w.ndim != 1 or w.size == 0:
            raise ConfigError(f"weights must be a nonempty 1-d array, got shape {w.shape}")
        if not np.all(np.isfinite(w)) or np.any(w <= 0.0):
            raise ConfigError("weights must be finite and strictly positive")
        total = float(np.sum(w))
        if abs(total - 1.0) > WEIGHT_SUM_TOL:
            raise ConfigError(
                f"weights sum to {total!r}; must equal 1 within {WEIGHT_SUM_TOL} "
                "(normalize before constructing Weights)"
            )
        object.__setattr__(self, "w", _frozen(w))

    @property
    def n_traj(self) -> int:
        return self.w.size

    @classmethod
    def uniform(cls, n: int) -> "Weights":
        if n < 1:
            raise ConfigError(f"need at least one trajectory, got {n}")
        return cls(np.full(n, 1.0 / n))

    @classmethod
    def normalized(cls, raw: Sequence[float]) -> "Weights":
        w = np.asarray(raw, dtype=float)
        if w.size == 0 or not np.all(np.isfinite(w)) or np.any(w <= 0.0):
            raise ConfigError("weights must be finite and strictly positive")
        return cls(w / np.sum(w))


@dataclass(frozen=True)
class HamiltonianTerm:
    """One monomial term coeff * q**q_power * p**p_power * matrix."""

    coeff: float
    q_power: int
    p_power: int
    matrix: np.ndarray

    def __post_init__(self):
        if not np.isfinite(self.coeff):
            raise ConfigError("term coefficient must be finite")
        if self.q_power < 0 or self.p_power < 0:
            raise ConfigError("monomial powers must be nonnegative integers")
        m = np.asarray(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] == 0:
            raise ConfigError(f"term matrix must be square, got shape {m.shape}")
        defect = hermiticity_defect(m)
        if defect > HERM_TOL:
            raise ConfigError(f"term matrix is not Hermitian (defect {defect:.3e})")
        object.__setattr__(self, "matrix", _frozen(m))


@dataclass(frozen=True)
class HybridHamiltonian:
    """Operator-valued polynomial H(q, p) = sum_k c_k q^{m_k} p^{n_k} B_k.

    The B_k are Hermitian n x n matrices, so H(z) is Hermitian at every phase
    point. Stacked per-term arrays are precomputed once for vectorized
    evaluation over many points or quadrature nodes.
    """

    terms: tuple

    def __post_init__(self):
        terms = tuple(self.terms)
        if not terms:
            raise ConfigError("Hamiltonian needs at least one term")
        if not all(isinstance(t, HamiltonianTerm) for t in terms):
            raise ConfigError("terms must be HamiltonianTerm instances")
        dims = {t.matrix.shape[0] for t in terms}
        if len(dims) != 1:
            raise ConfigError(f"term matrices disagree on dimension: {sorted(dims)}")
        object.__setattr__(self, "terms", terms)
        object.__setattr__(self, "_coeff", _frozen([t.coeff for t in terms]))
        object.__setattr__(self, "_qpow", _frozen(np.array([t.q_power for t in terms], dtype=int)))
        object.__setattr__(self, "_ppow", _frozen(np.array([t.p_power for t in terms], dtype=int)))
        object.__setattr__(self, "_mats", _frozen(np.stack([t.matrix for t in terms])))

    @property
    def dim(self) -> int:
        return self.terms[0].matrix.shape[0]

    @property
    def n_terms(self) -> int:
        return len(self.terms)

    @classmethod
    def from_terms(cls, specs: Sequence) -> "HybridHamiltonian":
        """Build from (coeff, q_power, p_power, matrix) tuples."""
        return cls(tuple(HamiltonianTerm(c, mq, mp, mat) for c, mq, mp, mat in specs))


@dataclass(frozen=True, eq=False)
class ClosureState:
    """Weighted trajectory ensemble at one instant.

    Two variants share this container: the per-trajectory variant stores one
    state vector per trajectory in psi (N, n) and leaves rho None; the
    shared-density variant stores a single rho (n, n) and leaves psi None.
    The generation token gen is unique per instance and is stamped into every
    derived kernel table, making stale-table reuse detectable.
    """

    q: np.ndarray
    p: np.ndarray
    weights: Weights
    hbar: float
    psi: Optional[np.ndarray] = None
    rho: Optional[np.ndarray] = None
    gen: int = field(default_factory=lambda: next(_generation))

    def __post_init__(self):
        q = np.asarray(self.q, dtype=float)
        p = np.asarray(self.p, dtype=float)
        n_traj = self.weights.n_traj
        if q.shape != (n_traj,) or p.shape != (n_traj,):
            raise ConfigError(
                f"q/p must have shape ({n_traj},) matching the weights, "
                f"got {q.shape} and {p.shape}"
            )
        if not (np.all(np.isfinite(q)) and np.all(np.isfinite(p))):
            raise ConfigError("trajectory positions must be finite")
        if not (np.isfinite(self.hbar) and self.hbar > 0.0):
            raise ConfigError(f"hbar must be positive, got {self.hbar!r}")
        if (self.psi is None) == (self.rho is None):
            raise ConfigError("exactly one of psi (per-trajectory) or rho (shared) must be set")
        if self.psi is not None:
            psi = np.asarray(self.psi, dtype=complex)
            if psi.ndim != 2 or psi.shape[0] != n_traj or psi.shape[1] == 0:
                raise ConfigError(f"psi must have shape ({n_traj}, n), got {psi.shape}")
            norms = np.linalg.norm(psi, axis=1)
            worst = float(np.max(np.abs(norms - 1.0)))
            if worst > NORM_TOL:
                raise ConfigError(f"state vector norms deviate from 1 by {worst:.3e}")
            object.__setattr__(self, "psi", _frozen(psi))
        else:
            rho = DensityMatrix(self.rho).rho  # validates Hermiticity/trace/PSD
            object.__setattr__(self, "rho", rho)
        object.__setattr__(self, "q", _frozen(q))
        object.__setattr__(self, "p", _frozen(p))

    @property
    def n_traj(self) -> int:
        return self.weights.n_traj

    @property
    def hilbert_dim(self) -> int:
        return self.psi.shape[1] if self.psi is not None else self.rho.shape[0]

    @property
    def per_trajectory(self) -> bool:
        return self.psi is not None

    def point(self, a: int) -> PhasePoint:
        return PhasePoint(float(self.q[a]), float(self.p[a]))

    def densities(self) -> np.ndarray:
        """Per-trajectory projectors |psi_a><psi_a| (N, n, n), or rho tiled."""
        if self.psi is not None:
            return np.einsum("ai,aj->aij", self.psi, np.conjugate(self.psi))
        return np.broadcast_to(self.rho, (self.n_traj,) + self.rho.shape).copy()

    @classmethod
    def _advanced(cls, q, p, weights, hbar, psi=None, rho=None) -> "ClosureState":
        """Internal fast path for integrator steps; skips re-validation.

        Intermediate Runge-Kutta states can transiently break the norm and
        positivity invariants at rounding level, so the stepper builds states
        through here and the diagnostics layer re-checks at record points.
        """
        obj = object.__new__(cls)
        for name, val in (("q", q), ("p", p), ("psi", psi), ("rho", rho)):
            if isinstance(val, np.ndarray):
                val.setflags(write=False)
            object.__setattr__(obj, name, val)
        object.__setattr__(obj, "weights", weights)
        object.__setattr__(obj, "hbar", float(hbar))
        object.__setattr__(obj, "gen", next(_generation))
        return obj


def ensemble_rho(state: ClosureState) -> np.ndarray:
    """Ensemble density matrix sum_a w_a |psi_a><psi_a| (or the shared rho), raw."""
    if state.rho is not None:
        return np.array(state.rho)
    return np.einsum("a,ai,aj->ij", state.weights.w, state.psi, np.conjugate(state.psi))


def density_matrix(state: ClosureState) -> DensityMatrix:
    """Ensemble density matrix as a validated DensityMatrix value."""
    return DensityMatrix(ensemble_rho(state))


def sample_phase_points(mean, cov, n_traj: int, seed: int):
    """Draw n_traj Gaussian phase points; fixed seed gives a fixed draw.

    The covariance may be singular (a point ensemble); any negative
    eigenvalue beyond rounding is rejected.
    """
    mean = np.asarray(mean, dtype=float)
    cov = np.asarray(cov, dtype=float)
    if mean.shape != (2,):
        raise ConfigError(f"initial mean must have shape (2,), got {mean.shape}")
    if cov.shape != (2, 2):
        raise ConfigError(f"initial covariance must have shape (2, 2), got {cov.shape}")
    if np.max(np.abs(cov - cov.T)) > 1e-12:
        raise ConfigError("initial covariance must be symmetric")
    evals, evecs = np.linalg.eigh(cov)
    scale = max(float(np.max(np.abs(evals))), 1.0)
    if float(evals.min()) < -1e-12 * scale:
        raise ConfigError(f"initial covariance has negative eigenvalue {evals.min():.3e}")
    root = evecs @ np.diag(np.sqrt(np.clip(evals, 0.0, None))) @ evecs.T
    rng = np.random.default_rng(seed)
    xi = rng.standard_normal(size=(n_traj, 2))
    pts = mean[None, :] + xi @ root.T
    return pts[:, 0].copy(), pts[:, 1].copy()
