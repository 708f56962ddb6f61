"""Gaussian mollifier, phase-space quadrature, and trajectory-pair kernel tables.

The regularized closure smears each trajectory into a Gaussian bump
K(z - zeta_a) and couples pairs through the phase-space integrals

    I_ab = (1/2) * int K_a {K_b, H} / (sum_c w_c K_c) d^2z,

with {f, g} = f_q g_p - f_p g_q. Integrals run over a fixed midpoint-rule
tensor grid; since the Hamiltonian is a matrix polynomial, the integrand
splits per monomial term into a real scalar node field times a constant
Hermitian matrix, and tables assemble from dense products over the node axis.

Derivatives of table entries with respect to trajectory positions
differentiate the discretized sum exactly (node positions never move with the
state), so the discrete ensemble energy built from these tables is conserved
by the exact flow; the integrator is the only drift source.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ConfigError, GeometryError, InternalError, StalenessError
from .model import ClosureState, HybridHamiltonian, PhasePoint, _frozen
from .hamiltonian import monomial_fields

log = logging.getLogger(__name__)

# Kernel support is effectively 6 standard deviations; trajectories must keep
# this margin from the box edge or the quadrature silently loses mass.
MARGIN_FACTOR = 6.0
# Nodes where the ensemble denominator has decayed below this fraction of its
# maximum contribute zero; their true contribution is exponentially smaller
# than any tolerance used here and the ratio 0/0 is avoided.
DENOM_CUT = 1e-14
# Table entries for pairs separated beyond this many alphas (with no third
# trajectory bridging them) are structurally zeroed when the cutoff is on.
PAIR_CUTOFF_FACTOR = 12.0
HERM_DEFECT_TOL = 1e-9


@dataclass(frozen=True)
class Mollifier:
    """Isotropic Gaussian kernel K(z) = exp(-|z|^2 / (2 alpha^2)) / (2 pi alpha^2).

    alpha is the standard deviation of the Gaussian in phase-space units; the
    kernel has unit integral and tends to a delta function as alpha -> 0.
    """

    alpha: float

    def __post_init__(self):
        if not (np.isfinite(self.alpha) and self.alpha > 0.0):
            raise ConfigError(f"mollifier width alpha must be positive, got {self.alpha!r}")

    @property
    def peak(self) -> float:
        return 1.0 / (2.0 * np.pi * self.alpha**2)


def kernel_eval(m: Mollifier, z: PhasePoint) -> float:
    """K(z) for displacement z from the kernel center."""
    r2 = z.q * z.q + z.p * z.p
    return m.peak * float(np.exp(-0.5 * r2 / m.alpha**2))


def kernel_grad(m: Mollifier, z: PhasePoint):
    """(dK/dq, dK/dp) at displacement z; grad K = -(z / alpha^2) K."""
    k = kernel_eval(m, z)
    inv_a2 = 1.0 / m.alpha**2
    return (-z.q * inv_a2 * k, -z.p * inv_a2 * k)


@dataclass(frozen=True)
class QuadratureGrid:
    """Midpoint-rule tensor grid over the phase-space box [q0, q1] x [p0, p1].

    Node positions depend only on the box and counts, never on the ensemble,
    which keeps table derivatives exact. The midpoint rule is spectrally
    accurate for the Gaussian-decay integrands used here, so refining the grid
    changes tables far below the working tolerances once the spacing is below
    about a quarter of the kernel width.
    """

    q_min: float
    q_max: float
    p_min: float
    p_max: float
    n_q: int
    n_p: int

    def __post_init__(self):
        if not all(np.isfinite(v) for v in (self.q_min, self.q_max, self.p_min, self.p_max)):
            raise ConfigError("grid bounds must be finite")
        if not (self.q_max > self.q_min and self.p_max > self.p_min):
            raise ConfigError("grid box must have positive extent in q and p")
        if self.n_q < 2 or self.n_p < 2:
            raise ConfigError(f"grid needs at least 2 nodes per axis, got {self.n_q} x {self.n_p}")
        hq = (self.q_max - self.q_min) / self.n_q
        hp = (self.p_max - self.p_min) / self.n_p
        qc = self.q_min + (np.arange(self.n_q) + 0.5) * hq
        pc = self.p_min + (np.arange(self.n_p) + 0.5) * hp
        Q, P = np.meshgrid(qc, pc, indexing="ij")
        object.__setattr__(self, "node_q", _frozen(Q.ravel()))
        object.__setattr__(self, "node_p", _frozen(P.ravel()))
        object.__setattr__(self, "node_weight", hq * hp)
        area = (self.q_max - self.q_min) * (self.p_max - self.p_min)
        if abs(self.n_nodes * self.node_weight - area) > 1e-9 * area:
            raise InternalError("quadrature weights do not sum to the box area")

    @property
    def n_nodes(self) -> int:
        return self.n_q * self.n_p

    @property
    def spacing(self):
        return (
            (self.q_max - self.q_min) / self.n_q,
            (self.p_max - self.p_min) / self.n_p,
        )

    def refined(self, factor: int = 2) -> "QuadratureGrid":
        """Same box with factor-times more nodes per axis."""
        return QuadratureGrid(
            self.q_min, self.q_max, self.p_min, self.p_max,
            self.n_q * factor, self.n_p * factor,
        )

    def contains(self, q, p) -> np.ndarray:
        q = np.asarray(q, dtype=float)
        p = np.asarray(p, dtype=float)
        return (q >= self.q_min) & (q <= self.q_max) & (p >= self.p_min) & (p <= self.p_max)

    def require_margin(self, q, p, margin: float) -> None:
        """Raise GeometryError naming the first trajectory too close to an edge."""
        q = np.asarray(q, dtype=float)
        p = np.asarray(p, dtype=float)
        edge = np.minimum.reduce([q - self.q_min, self.q_max - q, p - self.p_min, self.p_max - p])
        bad = np.nonzero(edge < margin)[0]
        if bad.size:
            a = int(bad[0])
            raise GeometryError(
                f"trajectory {a} at (q, p) = ({q[a]:.6g}, {p[a]:.6g}) is within "
                f"{margin:.6g} of the quadrature box boundary "
                f"[{self.q_min}, {self.q_max}] x [{self.p_min}, {self.p_max}]; "
                "enlarge the box or shrink the kernel width"
            )


@dataclass(frozen=True)
class KernelIntegralTable:
    """Pair-coupling integrals for one ensemble state.

    I has shape (N, N, n, n); each I[a, b] is Hermitian after symmetrization
    and herm_defect records the worst pre-symmetrization deviation. dI, when
    present, has shape (N, N, N, 2, n, n): dI[a, b, s, 0] and dI[a, b, s, 1]
    are the exact derivatives of I[a, b] with respect to q_s and p_s of the
    discretized sum. state_gen ties the table to the state it was built from.
    """

    I: np.ndarray
    dI: Optional[np.ndarray]
    herm_defect: float
    state_gen: int


@dataclass(frozen=True)
class JTable:
    """Antisymmetric pair fields J_ab sampled on the quadrature grid.

    J has shape (N, N, M) with J[b, a] = -J[a, b] exactly and zero diagonal.
    The mollifier is kept so the same fields can be re-evaluated at
    off-grid sample points.
    """

    J: np.ndarray
    state_gen: int
    grid: QuadratureGrid
    mollifier: Mollifier

    def box_integral(self, a: int, b: int) -> float:
        """Quadrature integral of J_ab over the box; near zero for interior pairs."""
        return float(np.sum(self.J[a, b]) * self.grid.node_weight)


def require_fresh(table, state: ClosureState) -> None:
    if table.state_gen != state.gen:
        raise StalenessError(
            f"kernel table built for state generation {table.state_gen} "
            f"used with state generation {state.gen}; rebuild tables after every step"
        )


def _pair_active(q, p, alpha: float) -> np.ndarray:
    """Pairs kept by the separation cutoff.

    A pair is retained when the two centers lie within PAIR_CUTOFF_FACTOR
    alphas of each other, or when any third trajectory is within range of
    both (it props up the shared denominator between them).
    """
    d2 = (q[:, None] - q[None, :]) ** 2 + (p[:, None] - p[None, :]) ** 2
    near = (d2 <= (PAIR_CUTOFF_FACTOR * alpha) ** 2).astype(np.int32)
    # near has a unit diagonal, so one product covers both the direct case
    # (s = a) and every bridging trajectory.
    return (near @ near) > 0


class KernelTableBuilder:
    """Node-level cache for one (Hamiltonian, mollifier, grid) triple.

    Grid nodes never move, so per-term monomial gradient fields are computed
    once here; per-state Gaussian evaluations are the only work repeated
    inside the integration loop.
    """

    def __init__(self, H: HybridHamiltonian, mollifier: Mollifier, grid: QuadratureGrid,
                 *, pair_cutoff: bool = True):
        self.H = H
        self.mollifier = mollifier
        self.grid = grid
        self.pair_cutoff = bool(pair_cutoff)
        hq, hp = grid.spacing
        if max(hq, hp) > mollifier.alpha / 4.0 + 1e-12:
            log.warning(
                "grid spacing (%.3g, %.3g) exceeds alpha/4 = %.3g; "
                "kernel tables may be under-resolved", hq, hp, mollifier.alpha / 4.0,
            )
        _, self._fq, self._fp = monomial_fields(H, grid.node_q, grid.node_p)
        self._mats = H._mats

    def _node_kernels(self, state: ClosureState, need_hessian: bool):
        """Per-trajectory kernel fields restricted to live quadrature nodes.

        Nodes where the ensemble denominator falls below DENOM_CUT of its
        maximum contribute exactly zero to every table entry (each
        contribution carries a factor 1/S together with a kernel value bounded
        by S/w_min), so they are dropped up front; this also removes the 0/0
        hazard where every kernel has underflowed.
        """
        alpha = self.mollifier.alpha
        inv_a2 = 1.0 / alpha**2
        uq = self.grid.node_q[None, :] - state.q[:, None]
        up = self.grid.node_p[None, :] - state.p[:, None]
        Ka = self.mollifier.peak * np.exp((-0.5 * inv_a2) * (uq * uq + up * up))
        S = state.weights.w @ Ka
        smax = float(S.max())
        if smax <= 0.0:
            raise GeometryError("ensemble denominator vanishes on every quadrature node")
        live = np.nonzero(S > DENOM_CUT * smax)[0]
        Ka = np.ascontiguousarray(Ka[:, live])
        tq = uq[:, live] * inv_a2
        tp = up[:, live] * inv_a2
        Rinv = 1.0 / S[live]
        dKq = -tq * Ka
        dKp = -tp * Ka
        hess = None
        if need_hessian:
            hess = (
                (tq * tq - inv_a2) * Ka,  # d2K/dq2
                tq * tp * Ka,             # d2K/dqdp
                (tp * tp - inv_a2) * Ka,  # d2K/dp2
            )
        return Ka, dKq, dKp, Rinv, live, hess

    def integrals(self, state: ClosureState, *, derivatives: bool = False) -> KernelIntegralTable:
        """Assemble I (and optionally its exact position derivatives) for state."""
        self.grid.require_margin(state.q, state.p, MARGIN_FACTOR * self.mollifier.alpha)
        w = state.weights.w
        N = state.n_traj
        K = self.H.n_terms
        wt = self.grid.node_weight

        Ka, dKq, dKp, Rinv, live, hess = self._node_kernels(state, derivatives)
        R = wt * Rinv
        KaR = Ka * R[None, :]
        fq = np.ascontiguousarray(self._fq[:, live])
        fp = np.ascontiguousarray(self._fp[:, live])

        def unpack(mat):
            # (N, K*N) GEMM output -> (K, N, N) term-major blocks
            return np.ascontiguousarray(mat.reshape(N, K, N).transpose(1, 0, 2))

        # bracket fields {K_b, H_k} = dK_b/dq * fp_k - dK_b/dp * fq_k, all terms at once
        B = dKq[None, :, :] * fp[:, None, :] - dKp[None, :, :] * fq[:, None, :]
        BT = B.reshape(K * N, -1).T
        scalar = unpack(KaR @ BT)

        dscalar = None
        if derivatives:
            Kqq, Kqp, Kpp = hess
            dKqR = dKq * R[None, :]
            dKpR = dKp * R[None, :]
            KaR2 = KaR * Rinv[None, :]
            wdKq = w[:, None] * dKq
            wdKp = w[:, None] * dKp
            # denominator channel: d(1/S)/dz_s = + w_s grad K_s / S^2;
            # chunked over terms to bound the (N, N, M) intermediate
            Gq = np.empty((K, N, N, N))
            Gp = np.empty((K, N, N, N))
            for k in range(K):
                X = (KaR2[:, None, :] * B[k][None, :, :]).reshape(N * N, -1)
                Gq[k] = (X @ wdKq.T).reshape(N, N, N)
                Gp[k] = (X @ wdKp.T).reshape(N, N, N)
            # channel s = a: dK_a/dq_a = -(dK/dq)(z - zeta_a)
            Eq = unpack(dKqR @ BT)
            Ep = unpack(dKpR @ BT)
            idx = np.arange(N)
            Gq[:, idx, :, idx] -= Eq.transpose(1, 0, 2)
            Gp[:, idx, :, idx] -= Ep.transpose(1, 0, 2)
            # channel s = b: second kernel derivatives, same sign flip
            Cq = Kqp[None, :, :] * fq[:, None, :] - Kqq[None, :, :] * fp[:, None, :]
            Cp = Kpp[None, :, :] * fq[:, None, :] - Kqp[None, :, :] * fp[:, None, :]
            Gq[:, :, idx, idx] += unpack(KaR @ Cq.reshape(K * N, -1).T)
            Gp[:, :, idx, idx] += unpack(KaR @ Cp.reshape(K * N, -1).T)
            dscalar = np.stack([Gq, Gp], axis=-1)

        if self.pair_cutoff:
            active = _pair_active(state.q, state.p, self.mollifier.alpha)
            scalar *= active[None, :, :]
            if derivatives:
                dscalar *= active[None, :, :, None, None]

        I = 0.5 * np.einsum("kab,kij->abij", scalar, self._mats)
        # Scalar prefactors are real and term matrices Hermitian, so any
        # asymmetry beyond matrix-input rounding means the pipeline is broken.
        defect = float(np.max(np.abs(I - np.conjugate(np.swapaxes(I, -1, -2)))))
        if defect > HERM_DEFECT_TOL:
            raise InternalError(f"kernel integral Hermiticity defect {defect:.3e} exceeds "
                                f"{HERM_DEFECT_TOL:.0e}")
        I = 0.5 * (I + np.conjugate(np.swapaxes(I, -1, -2)))
        dI = None
        if derivatives:
            dI = 0.5 * np.einsum("kabsc,kij->abscij", dscalar, self._mats)
            dI = 0.5 * (dI + np.conjugate(np.swapaxes(dI, -1, -2)))
        return KernelIntegralTable(I=I, dI=dI, herm_defect=defect, state_gen=state.gen)


def compute_I(H, state, mollifier, grid, *, pair_cutoff: bool = True) -> KernelIntegralTable:
    """Pair-coupling table I_ab for one state (no derivatives)."""
    builder = KernelTableBuilder(H, mollifier, grid, pair_cutoff=pair_cutoff)
    return builder.integrals(state)


def compute_dI(H, state, mollifier, grid, *, pair_cutoff: bool = True) -> KernelIntegralTable:
    """Pair-coupling table with exact position derivatives dI[a, b, s, c]."""
    builder = KernelTableBuilder(H, mollifier, grid, pair_cutoff=pair_cutoff)
    return builder.integrals(state, derivatives=True)


def j_values(state: ClosureState, mollifier: Mollifier, zq, zp) -> np.ndarray:
    """Antisymmetric pair fields J_ab at arbitrary sample points, shape (N, N, S).

        J_ab = (1/4) ({K_a, K_b / S} - {K_b, K_a / S}),   S = sum_c w_c K_c.

    Every division is by S only, organized as bounded ratios, so far samples
    underflow to zero instead of producing 0/0.
    """
    zq = np.atleast_1d(np.asarray(zq, dtype=float))
    zp = np.atleast_1d(np.asarray(zp, dtype=float))
    alpha = mollifier.alpha
    inv_a2 = 1.0 / alpha**2
    uq = zq[None, :] - state.q[:, None]
    up = zp[None, :] - state.p[:, None]
    Ka = mollifier.peak * np.exp(-0.5 * (uq * uq + up * up) * inv_a2)
    dKq = -uq * inv_a2 * Ka
    dKp = -up * inv_a2 * Ka
    w = state.weights.w
    S = w @ Ka
    Sq = w @ dKq
    Sp = w @ dKp
    smax = float(S.max(initial=0.0))
    if smax <= 0.0:
        return np.zeros((state.n_traj, state.n_traj, zq.size))
    mask = S > DENOM_CUT * smax
    Rinv = np.where(mask, 1.0 / np.where(mask, S, 1.0), 0.0)
    ra = Ka * Rinv[None, :]                      # K_a / S, bounded by 1/w_a
    brkS = (dKq * Sp[None, :] - dKp * Sq[None, :]) * Rinv[None, :]   # {K_a, S}/S
    N = state.n_traj
    J = np.zeros((N, N, zq.size))
    for a in range(N):
        for b in range(a + 1, N):
            brk_ab = (dKq[a] * dKp[b] - dKp[a] * dKq[b]) * Rinv
            Jab = 0.25 * (2.0 * brk_ab - ra[b] * brkS[a] + ra[a] * brkS[b])
            J[a, b] = Jab
            J[b, a] = -Jab
    return J


def compute_J(state: ClosureState, mollifier: Mollifier, grid: QuadratureGrid) -> JTable:
    """J_ab sampled on the grid nodes; antisymmetric with exact zero diagonal."""
    grid.require_margin(state.q, state.p, MARGIN_FACTOR * mollifier.alpha)
    J = j_values(state, mollifier, grid.node_q, grid.node_p)
    return JTable(J=J, state_gen=state.gen, grid=grid, mollifier=mollifier)
