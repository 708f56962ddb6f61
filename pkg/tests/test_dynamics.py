"""Closure right-hand sides, conservation structure, hybrid operator field."""
import numpy as np
import pytest

from qctraj import (
    ClosureState,
    GeometryError,
    KernelTableBuilder,
    StalenessError,
    compute_J,
    effective_generators,
    gradient_h,
    hamiltonian_h,
    hybrid_operator_field,
    rhs_ehrenfest,
    rhs_meanfield,
    rhs_regularized,
)
from qctraj.model import hermiticity_defect
from conftest import SX, SZ, I2, make_state, spin_boson


def test_ehrenfest_rhs_manual():
    H = spin_boson(coupling=0.2, drive=0.4)
    st = make_state(2)
    d = rhs_ehrenfest(st, H)
    for a in range(2):
        psi = st.psi[a]
        sz = float(np.real(np.conjugate(psi) @ SZ @ psi))
        assert d.dq[a] == pytest.approx(st.p[a], abs=1e-14)
        assert d.dp[a] == pytest.approx(-st.q[a] - 0.2 * sz, abs=1e-14)
        Ha = (0.5 * st.p[a] ** 2 + 0.5 * st.q[a] ** 2) * I2 + 0.2 * st.q[a] * SZ + 0.4 * SX
        assert np.allclose(d.dpsi[a], -1j * Ha @ psi, atol=1e-14)
    assert d.drho is None


def test_ehrenfest_rhs_norm_preserving():
    # d|psi|^2/dt = 2 Re <psi|dpsi> = 0 for Hermitian generators
    st = make_state(3)
    d = rhs_ehrenfest(st, spin_boson())
    rate = np.einsum("ai,ai->a", np.conjugate(st.psi), d.dpsi).real
    assert np.max(np.abs(rate)) < 1e-14


def test_meanfield_rhs_structure():
    H = spin_boson(coupling=0.3)
    st = make_state(3, shared_rho=True, weights=[1.0, 1.0, 2.0])
    d = rhs_meanfield(st, H)
    assert d.dpsi is None
    # -i[H, rho] is Hermitian and traceless, so trace and Hermiticity persist
    assert abs(np.trace(d.drho)) < 1e-14
    assert hermiticity_defect(d.drho) < 1e-13
    # commutator with the weighted-average Hamiltonian, written out directly
    from qctraj import eval_H_many
    val, dq, dp = eval_H_many(H, st.q, st.p)
    h_mf = np.einsum("a,aij->ij", st.weights.w, val)
    expected = -1j * (h_mf @ st.rho - st.rho @ h_mf)
    assert np.allclose(d.drho, expected, atol=1e-14)
    assert np.allclose(d.dq, np.einsum("ij,aji->a", st.rho, dp).real, atol=1e-14)


def test_regularized_reduces_to_ehrenfest_without_coupling(mollifier, grid):
    H = spin_boson()
    st = make_state(3)
    a = rhs_ehrenfest(st, H)
    b = rhs_regularized(st, H, mollifier, grid, coupling=False)
    assert np.array_equal(a.dq, b.dq)
    assert np.array_equal(a.dp, b.dp)
    assert np.array_equal(a.dpsi, b.dpsi)


def test_single_trajectory_coupling_is_inert(mollifier, grid):
    # with one trajectory the pair commutator vanishes, so the kernel terms
    # contribute exactly zero and the closure coincides with the bare one
    H = spin_boson()
    st = make_state(1)
    a = rhs_ehrenfest(st, H)
    b = rhs_regularized(st, H, mollifier, grid)
    assert np.array_equal(a.dq, b.dq)
    assert np.array_equal(a.dp, b.dp)
    assert np.array_equal(a.dpsi, b.dpsi)


def test_regularized_coupling_changes_forces(mollifier, grid):
    H = spin_boson(coupling=0.4)
    st = make_state(2)
    bare = rhs_ehrenfest(st, H)
    full = rhs_regularized(st, H, mollifier, grid)
    assert np.max(np.abs(full.dp - bare.dp)) > 1e-4


def test_gradient_h_matches_fd(mollifier, grid):
    H = spin_boson(coupling=0.4)
    st = make_state(3, weights=[1.0, 2.0, 3.0])
    builder = KernelTableBuilder(H, mollifier, grid, pair_cutoff=False)
    dh_dq, dh_dp = gradient_h(st, H, builder.integrals(st, derivatives=True))
    h = 1e-6

    def h_at(q, p):
        s = ClosureState(q=q, p=p, weights=st.weights, hbar=st.hbar, psi=st.psi)
        return hamiltonian_h(s, H, builder.integrals(s))

    for s_idx in range(3):
        for c, grad in ((0, dh_dq), (1, dh_dp)):
            up_qp = [np.array(st.q), np.array(st.p)]
            up_qp[c][s_idx] += h
            dn_qp = [np.array(st.q), np.array(st.p)]
            dn_qp[c][s_idx] -= h
            fd = (h_at(*up_qp) - h_at(*dn_qp)) / (2 * h)
            assert grad[s_idx] == pytest.approx(fd, rel=2e-6, abs=1e-10)


def test_effective_generators_hermitian(mollifier, grid):
    H = spin_boson(coupling=0.4)
    st = make_state(3)
    tables = KernelTableBuilder(H, mollifier, grid).integrals(st)
    gen = effective_generators(st, H, tables)
    assert gen.matrices.shape == (3, 2, 2)
    assert hermiticity_defect(gen.matrices) < 1e-12


def test_generator_preserves_trajectory_purity(mollifier, grid):
    # dpsi from a Hermitian generator keeps each |psi_a| constant
    H = spin_boson(coupling=0.4)
    st = make_state(2)
    d = rhs_regularized(st, H, mollifier, grid)
    rate = np.einsum("ai,ai->a", np.conjugate(st.psi), d.dpsi).real
    assert np.max(np.abs(rate)) < 1e-13


def test_energy_conserved_along_flow_direction(mollifier, grid):
    # directional derivative of h along the closure flow must vanish:
    # classical channels cancel by construction, quantum channel by
    # Tr(G [G, rho]) = 0
    H = spin_boson(coupling=0.4)
    st = make_state(2)
    builder = KernelTableBuilder(H, mollifier, grid)
    d = rhs_regularized(st, H, builder=builder)
    eps = 1e-7
    q2 = st.q + eps * d.dq
    p2 = st.p + eps * d.dp
    psi2 = st.psi + eps * d.dpsi
    psi2 = psi2 / np.linalg.norm(psi2, axis=1)[:, None]
    st2 = ClosureState(q=q2, p=p2, weights=st.weights, hbar=st.hbar, psi=psi2)
    h1 = hamiltonian_h(st, H, builder.integrals(st))
    h2 = hamiltonian_h(st2, H, builder.integrals(st2))
    assert abs(h2 - h1) / abs(h1) < 1e-9


def test_hybrid_field_identities(mollifier, grid):
    st = make_state(3, weights=[2.0, 1.0, 1.0])
    j_table = compute_J(st, mollifier, grid)
    sq = np.array([0.0, 0.4, -0.8])
    sp = np.array([0.1, -0.2, 0.6])
    field = hybrid_operator_field(st, j_table, sq, sp)
    # smooth part: Hermitian and pointwise traceless
    assert hermiticity_defect(field.smooth) < 1e-12
    assert np.max(np.abs(np.trace(field.smooth, axis1=-2, axis2=-1))) < 1e-12
    # point masses carry w_a rho_a and unit total trace
    for a, (z, m) in enumerate(field.point_masses):
        assert z.q == st.q[a] and z.p == st.p[a]
        expected = st.weights.w[a] * np.outer(st.psi[a], np.conjugate(st.psi[a]))
        assert np.allclose(m, expected, atol=1e-15)
    assert abs(np.trace(field.total_point_mass()) - 1.0) < 1e-12


def test_hybrid_field_rejects_outside_samples(mollifier, grid):
    st = make_state(2)
    j_table = compute_J(st, mollifier, grid)
    with pytest.raises(GeometryError, match="sample 1"):
        hybrid_operator_field(st, j_table, [0.0, 9.0], [0.0, 0.0])


def test_hybrid_field_rejects_stale_table(mollifier, grid):
    st = make_state(2)
    j_table = compute_J(st, mollifier, grid)
    other = make_state(2)
    with pytest.raises(StalenessError):
        hybrid_operator_field(other, j_table, [0.0], [0.0])
