"""Mollifier, quadrature grid, and kernel integral tables."""
import numpy as np
import pytest

from qctraj import (
    ClosureState,
    ConfigError,
    GeometryError,
    HybridHamiltonian,
    KernelTableBuilder,
    Mollifier,
    PhasePoint,
    QuadratureGrid,
    StalenessError,
    Weights,
    compute_I,
    compute_J,
    j_values,
    kernel_eval,
    kernel_grad,
)
from qctraj.kernels import require_fresh
from conftest import SX, SY, SZ, I2, make_state, spin_boson, tilted_psis


# -- mollifier ---------------------------------------------------------------

def test_mollifier_validation():
    with pytest.raises(ConfigError):
        Mollifier(alpha=0.0)
    with pytest.raises(ConfigError):
        Mollifier(alpha=-1.0)


def test_kernel_peak_and_decay(mollifier):
    k0 = kernel_eval(mollifier, PhasePoint(q=0.0, p=0.0))
    assert abs(k0 - mollifier.peak) < 1e-15
    # one alpha out: factor exp(-1/2)
    k1 = kernel_eval(mollifier, PhasePoint(q=mollifier.alpha, p=0.0))
    assert abs(k1 / k0 - np.exp(-0.5)) < 1e-12


def test_kernel_unit_integral(mollifier, grid):
    z = np.exp(-0.5 * (grid.node_q**2 + grid.node_p**2) / mollifier.alpha**2)
    total = float(np.sum(z)) * mollifier.peak * grid.node_weight
    assert abs(total - 1.0) < 1e-8


def test_kernel_grad_matches_fd(mollifier):
    h = 1e-7
    for q, p in [(0.2, -0.5), (-1.1, 0.3)]:
        gq, gp = kernel_grad(mollifier, PhasePoint(q=q, p=p))
        fq = (kernel_eval(mollifier, PhasePoint(q=q + h, p=p))
              - kernel_eval(mollifier, PhasePoint(q=q - h, p=p))) / (2 * h)
        fp = (kernel_eval(mollifier, PhasePoint(q=q, p=p + h))
              - kernel_eval(mollifier, PhasePoint(q=q, p=p - h))) / (2 * h)
        assert abs(gq - fq) < 1e-7
        assert abs(gp - fp) < 1e-7


# -- quadrature grid ---------------------------------------------------------

def test_grid_midpoint_layout():
    g = QuadratureGrid(0.0, 1.0, 0.0, 2.0, 2, 4)
    assert g.n_nodes == 8
    assert g.node_weight == pytest.approx(0.25)
    assert sorted(set(np.round(g.node_q, 12))) == [0.25, 0.75]
    assert sorted(set(np.round(g.node_p, 12))) == [0.25, 0.75, 1.25, 1.75]


def test_grid_validation():
    with pytest.raises(ConfigError):
        QuadratureGrid(1.0, 0.0, 0.0, 1.0, 4, 4)
    with pytest.raises(ConfigError):
        QuadratureGrid(0.0, 1.0, 0.0, 1.0, 1, 4)


def test_grid_refined_and_contains(grid):
    g2 = grid.refined()
    assert g2.n_nodes == 4 * grid.n_nodes
    assert g2.q_min == grid.q_min and g2.q_max == grid.q_max
    inside = grid.contains([0.0, 5.0], [0.0, 0.0])
    assert inside.tolist() == [True, False]


def test_require_margin_names_trajectory(grid):
    grid.require_margin(np.array([0.0]), np.array([0.0]), 3.6)
    with pytest.raises(GeometryError, match="trajectory 1"):
        grid.require_margin(np.array([0.0, 1.5]), np.array([0.0, 0.0]), 3.6)


# -- I table against the brute-force oracle ----------------------------------

ORACLE_H = [
    (0.5, 0, 2, I2),
    (0.5, 2, 0, I2),
    (0.2, 1, 0, SZ),
    (0.3, 0, 0, SX),
    (0.15, 1, 1, SY),
]
ORACLE_I = np.array([
    [[[-0.15987017187986247, 0.007993508583371629j],
      [-0.007993508583371629j, 0.05329005728913133]],
     [[-0.1040210799433368, 0.005201053997173512j],
      [-0.005201053997173512j, 0.03467369331445676]]],
    [[[0.06851578794804823, -0.0034257893973945763j],
      [0.0034257893973945763j, -0.02283859598268705]],
     [[0.0445804628365208, -0.00222902309807946j],
      [0.00222902309807946j, -0.014860154236004345]]],
], dtype=complex)
ORACLE_J01 = {
    (0.0, 0.0): 0.043615549307013245,
    (0.5, -0.3): -0.019911805011339555,
    (-1.0, 0.8): 0.005986699166978008,
}


def oracle_state():
    return ClosureState(
        q=np.array([0.3, -0.4]), p=np.array([-0.2, 0.5]),
        weights=Weights(np.array([0.3, 0.7])), hbar=1.0,
        psi=np.array([[1.0, 1.0], [1.0, 1.0j]]) / np.sqrt(2.0),
    )


def test_I_matches_independent_sum(mollifier, grid):
    H = HybridHamiltonian.from_terms(ORACLE_H)
    table = compute_I(H, oracle_state(), mollifier, grid)
    scale = np.max(np.abs(ORACLE_I))
    assert np.max(np.abs(table.I - ORACLE_I)) < 1e-12 * scale
    assert table.herm_defect < 1e-9


def test_I_hermitian_entries(mollifier, grid):
    table = compute_I(spin_boson(), oracle_state(), mollifier, grid)
    flipped = np.conjugate(np.transpose(table.I, (0, 1, 3, 2)))
    assert np.array_equal(table.I, flipped)


def test_I_grid_refinement_converged(mollifier, grid):
    H = HybridHamiltonian.from_terms(ORACLE_H)
    st = oracle_state()
    coarse = compute_I(H, st, mollifier, grid)
    fine = compute_I(H, st, mollifier, grid.refined())
    assert np.max(np.abs(coarse.I - fine.I)) < 1e-8


def test_dI_matches_fd_of_I(mollifier, grid):
    H = HybridHamiltonian.from_terms(ORACLE_H)
    st = oracle_state()
    table = compute_I(H, st, mollifier, grid)
    dtable = KernelTableBuilder(H, mollifier, grid).integrals(st, derivatives=True)
    h = 1e-6
    for s in range(2):
        for c, arr in ((0, "q"), (1, "p")):
            qp = np.array(st.q), np.array(st.p)
            qp[c][s] += h
            up = ClosureState(q=qp[0], p=qp[1], weights=st.weights, hbar=1.0, psi=st.psi)
            qm = np.array(st.q), np.array(st.p)
            qm[c][s] -= h
            dn = ClosureState(q=qm[0], p=qm[1], weights=st.weights, hbar=1.0, psi=st.psi)
            fd = (compute_I(H, up, mollifier, grid).I
                  - compute_I(H, dn, mollifier, grid).I) / (2 * h)
            assert np.max(np.abs(dtable.dI[:, :, s, c] - fd)) < 2e-5
    assert np.max(np.abs(table.I - dtable.I)) == 0.0


def test_far_pair_integrals_vanish(mollifier):
    # separation 16 alpha: beyond the pair cutoff, and the true coupling is
    # below working precision anyway, so zeroing the pair is exact in effect
    sep = 16.0 * mollifier.alpha
    half = sep / 2.0
    box = half + 6.0 * mollifier.alpha + 0.5
    n = int(np.ceil(2 * box / (mollifier.alpha / 4.0)))
    g = QuadratureGrid(-box, box, -box, box, n, n)
    st = ClosureState(
        q=np.array([-half, half]), p=np.zeros(2),
        weights=Weights.uniform(2), hbar=1.0, psi=tilted_psis(2),
    )
    H = spin_boson()
    cut = compute_I(H, st, mollifier, g, pair_cutoff=True)
    full = compute_I(H, st, mollifier, g, pair_cutoff=False)
    assert np.array_equal(cut.I[0, 1], np.zeros((2, 2)))
    assert np.array_equal(cut.I[1, 0], np.zeros((2, 2)))
    assert np.max(np.abs(full.I[0, 1])) < 1e-10
    # self blocks unaffected by the cutoff
    assert np.max(np.abs(cut.I[0, 0] - full.I[0, 0])) < 1e-13


def test_pair_cutoff_keeps_bridged_pairs(mollifier):
    # a and c sit 13 alpha apart (beyond the 12 alpha direct cutoff) but b
    # bridges them, so the a-c block must be kept
    alpha = mollifier.alpha
    qpos = np.array([-6.5 * alpha, 0.0, 6.5 * alpha])
    box = qpos[2] + 6.0 * alpha + 0.5
    n = int(np.ceil(2 * box / (alpha / 4.0)))
    g = QuadratureGrid(-box, box, -box, box, n, n)
    st = ClosureState(q=qpos, p=np.zeros(3), weights=Weights.uniform(3),
                      hbar=1.0, psi=tilted_psis(3))
    H = spin_boson()
    cut = compute_I(H, st, mollifier, g, pair_cutoff=True)
    full = compute_I(H, st, mollifier, g, pair_cutoff=False)
    assert np.max(np.abs(cut.I - full.I)) < 1e-12


def test_margin_violation_raises(mollifier, grid):
    st = ClosureState(q=np.array([0.0, 3.9]), p=np.zeros(2),
                      weights=Weights.uniform(2), hbar=1.0, psi=tilted_psis(2))
    with pytest.raises(GeometryError, match="trajectory 1"):
        compute_I(spin_boson(), st, mollifier, grid)


def test_staleness_detection(mollifier, grid):
    st = oracle_state()
    table = compute_I(spin_boson(), st, mollifier, grid)
    require_fresh(table, st)
    other = oracle_state()
    with pytest.raises(StalenessError):
        require_fresh(table, other)


# -- J table -----------------------------------------------------------------

def test_j_values_match_independent_formula(mollifier):
    st = oracle_state()
    pts = list(ORACLE_J01.keys())
    zq = np.array([z[0] for z in pts])
    zp = np.array([z[1] for z in pts])
    J = j_values(st, mollifier, zq, zp)
    expected = np.array([ORACLE_J01[z] for z in pts])
    assert np.max(np.abs(J[0, 1] - expected)) < 1e-13
    assert np.max(np.abs(J[1, 0] + expected)) < 1e-13


def test_J_antisymmetry_exact(mollifier, grid):
    st = make_state(3, weights=[1.0, 2.0, 3.0])
    table = compute_J(st, mollifier, grid)
    assert np.array_equal(table.J, -np.transpose(table.J, (1, 0, 2)))
    assert np.array_equal(table.J[0, 0], np.zeros(grid.n_nodes))


def test_J_box_integral_vanishes(mollifier, grid):
    st = make_state(3)
    table = compute_J(st, mollifier, grid)
    for a in range(3):
        for b in range(3):
            assert abs(table.box_integral(a, b)) < 1e-8


def test_J_far_samples_underflow_cleanly(mollifier, grid):
    st = make_state(2)
    J = j_values(st, mollifier, np.array([3.95]), np.array([3.95]))
    assert np.all(np.isfinite(J))
