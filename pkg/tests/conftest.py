"""Shared builders for the test suite."""
import numpy as np
import pytest

from qctraj import (
    ClosureState,
    HybridHamiltonian,
    Mollifier,
    QuadratureGrid,
    Weights,
)

SX = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
SY = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex)
SZ = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)
I2 = np.eye(2, dtype=complex)


def spin_boson(coupling=0.1, drive=0.5):
    """Harmonic oscillator carrying a driven two-level system."""
    return HybridHamiltonian.from_terms([
        (0.5, 0, 2, I2),
        (0.5, 2, 0, I2),
        (coupling, 1, 0, SZ),
        (drive, 0, 0, SX),
    ])


def tilted_psis(n):
    """n unit vectors with pairwise non-commuting density matrices."""
    out = np.zeros((n, 2), dtype=complex)
    for a in range(n):
        th = 0.4 + 0.9 * a
        ph = 0.3 * a
        out[a] = [np.cos(th / 2), np.exp(1j * ph) * np.sin(th / 2)]
    return out


def make_state(n_traj=2, hbar=1.0, weights=None, spread=0.45, shared_rho=False, seed=None):
    """Small deterministic ensemble near the origin."""
    if seed is None:
        q = 0.3 - spread * np.arange(n_traj, dtype=float)
        p = -0.2 + spread * 0.8 * np.arange(n_traj, dtype=float)
    else:
        rng = np.random.default_rng(seed)
        q = spread * rng.standard_normal(n_traj)
        p = spread * rng.standard_normal(n_traj)
    if weights is None:
        w = Weights.uniform(n_traj)
    else:
        w = Weights.normalized(weights)
    if shared_rho:
        psi = tilted_psis(1)[0]
        rho = np.outer(psi, np.conjugate(psi))
        return ClosureState(q=q, p=p, weights=w, hbar=hbar, rho=rho)
    return ClosureState(q=q, p=p, weights=w, hbar=hbar, psi=tilted_psis(n_traj))


@pytest.fixture
def mollifier():
    return Mollifier(alpha=0.6)


@pytest.fixture
def grid():
    # spacing 9/60 = 0.15 = alpha / 4
    return QuadratureGrid(-4.5, 4.5, -4.5, 4.5, 60, 60)
