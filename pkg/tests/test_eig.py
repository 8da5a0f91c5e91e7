"""Eigensolvers: dense reference, shift-invert Krylov-Schur, matrix-free.

Targeted solves are validated against the full dense spectrum on sizes
where both are cheap; determinism and shift invariance are contract
tests for the experiment runner.
"""

import numpy as np
import pytest

from dimerchain import theory
from dimerchain.eig import (
    EigenPair,
    InnerSolveStagnation,
    RestartLimitExceeded,
    SolverConfig,
    Spectrum,
    eig_dense_all,
    eig_target,
    nearest_match,
    residual_norm,
)
from dimerchain.model import (
    ChainGeometry,
    TwoExcitationBasis,
    TwoExcitationWaveguideOp,
    build_single_hamiltonian,
    build_two_hamiltonian,
)


def two_exc(N, kd_pi):
    chain = ChainGeometry.from_kd(N, kd_pi * np.pi)
    return chain, build_two_hamiltonian(chain)


# ------------------------------------------------------------ dense


def test_dense_one_by_one():
    spec = eig_dense_all(np.array([[-0.5j]]))
    assert len(spec) == 1
    assert spec[0].lam == -0.5j and spec[0].residual == 0.0


def test_dense_two_emitters():
    phi = 0.2 * np.pi
    H = build_single_hamiltonian(ChainGeometry.from_kd(2, phi))
    spec = eig_dense_all(H)
    want = sorted([-0.5j * (1 - np.exp(1j * phi)), -0.5j * (1 + np.exp(1j * phi))],
                  key=lambda l: -l.imag)
    assert np.allclose(spec.eigenvalues, want, atol=1e-14)
    # most subradiant first
    assert spec[0].decay_rate < spec[1].decay_rate


def test_dense_sorting_and_residuals():
    _, H2 = two_exc(20, 0.2)
    spec = eig_dense_all(H2)
    rates = spec.decay_rates
    assert np.all(np.diff(rates) >= -1e-14)
    assert max(p.residual for p in spec.pairs) < 1e-11
    for p in spec.pairs[:5]:
        assert residual_norm(H2, p) == pytest.approx(p.residual, abs=1e-13)
    assert spec.meta["solver_mode"] == "dense"
    assert spec.meta["dim"] == 190
    assert spec.meta["wall_time"] > 0


def test_dense_full_two_exc_spectrum_n50():
    # D = 1225 states; the global invariants pin the whole spectrum
    chain, H2 = two_exc(50, 0.2)
    spec = eig_dense_all(H2)
    assert len(spec) == 1225
    lam = spec.eigenvalues
    assert abs(lam.sum() - np.trace(H2)) < 1e-9
    assert np.max(lam.imag) < 1e-10  # all states decay
    assert np.min(-2 * lam.imag) < 1e-3  # subradiant branch present


def test_dense_cap_enforced():
    with pytest.raises(ValueError):
        eig_dense_all(np.eye(11, dtype=complex), cap=10)
    with pytest.raises(ValueError):
        eig_dense_all(np.ones((3, 4), dtype=complex))


# ------------------------------------------------------------ targeted


def test_target_dim_one():
    spec = eig_target(np.array([[-0.5j]]), 1, SolverConfig(target=0.0))
    assert spec[0].lam == -0.5j


def test_target_dense_mode_nearest():
    _, H2 = two_exc(16, 0.25)
    full = eig_dense_all(H2)
    sigma = 1.0 - 0.05j
    cfg = SolverConfig(target=sigma, count=4, mode="dense")
    spec = eig_target(H2, H2.shape[0], cfg)
    assert len(spec) == 4
    want = sorted(full.eigenvalues, key=lambda l: abs(l - sigma))[:4]
    assert np.allclose(sorted(spec.eigenvalues, key=lambda l: abs(l - sigma)),
                       sorted(want, key=lambda l: abs(l - sigma)), atol=1e-12)


@pytest.mark.parametrize("mode", ["si-direct", "si-matfree"])
def test_target_matches_dense(mode):
    # N = 48 at the shallow-dip wavenumber; target the type-I dimer line
    kd = 0.1676 * np.pi
    chain, H2 = two_exc(48, 0.1676)
    sigma = 2.0 / np.tan(kd)
    cfg = SolverConfig(target=sigma, count=6, mode=mode)
    if mode == "si-matfree":
        op = TwoExcitationWaveguideOp(chain)
        spec = eig_target(op, op.dim, cfg, diag=op.diagonal(),
                          precond=op.shift_preconditioner(sigma))
    else:
        spec = eig_target(H2, H2.shape[0], cfg)
    full = eig_dense_all(H2)
    want = np.array(sorted(full.eigenvalues, key=lambda l: abs(l - sigma))[:6])
    got = spec.eigenvalues
    for w in want:
        assert np.min(np.abs(got - w)) < 1e-9
    assert max(p.residual for p in spec.pairs) < 1e-9
    assert spec.meta["solver_mode"] == mode


def test_target_shift_invariance():
    _, H2 = two_exc(30, 0.25)
    lam = {}
    for ds in (0.0, 0.01):
        cfg = SolverConfig(target=0.0 + ds, count=4, mode="si-direct")
        spec = eig_target(H2, H2.shape[0], cfg)
        key = np.argsort(np.abs(spec.eigenvalues))
        lam[ds] = spec.eigenvalues[key]
    assert np.max(np.abs(lam[0.0] - lam[0.01])) < 1e-9


def test_target_deterministic_rerun():
    _, H2 = two_exc(24, 0.2)
    cfg = SolverConfig(target=2.0 / np.tan(0.2 * np.pi), count=4, seed=11)
    a = eig_target(H2, H2.shape[0], cfg)
    b = eig_target(H2, H2.shape[0], cfg)
    assert a.eigenvalues.tobytes() == b.eigenvalues.tobytes()
    for pa, pb in zip(a.pairs, b.pairs):
        assert pa.vector.tobytes() == pb.vector.tobytes()


def test_target_warm_start_converges():
    chain, H2 = two_exc(24, 0.25)
    cfg = SolverConfig(target=0.0, count=4)
    spec = eig_target(H2, H2.shape[0], cfg)
    v0 = spec[0].vector
    again = eig_target(H2, H2.shape[0], cfg, v0=v0)
    assert np.min(np.abs(again.eigenvalues - spec[0].lam)) < 1e-10


def test_target_v0_validation():
    _, H2 = two_exc(10, 0.25)
    cfg = SolverConfig(target=0.0)
    with pytest.raises(ValueError):
        eig_target(H2, H2.shape[0], cfg, v0=np.zeros(H2.shape[0]))
    with pytest.raises(ValueError):
        eig_target(H2, H2.shape[0], cfg, v0=np.ones(3))


def test_target_requires_matrix_for_direct():
    op = TwoExcitationWaveguideOp(ChainGeometry.from_kd(8, 0.25 * np.pi))
    with pytest.raises(TypeError):
        eig_target(op, op.dim, SolverConfig(target=0.0, mode="si-direct"))
    with pytest.raises(TypeError):
        eig_target(op.matvec, op.dim, SolverConfig(target=0.0, mode="dense"))


def test_target_restart_limit():
    _, H2 = two_exc(14, 0.2)
    cfg = SolverConfig(target=0.0, count=6, tol=1e-14, max_restarts=0,
                       max_subspace=7)
    with pytest.raises(RestartLimitExceeded):
        eig_target(H2, H2.shape[0], cfg)


def test_target_inner_stagnation():
    # matrix-free with a starved inner solver must fail loudly, not return
    # silently wrong eigenvalues
    chain = ChainGeometry.from_kd(30, 0.2 * np.pi)
    op = TwoExcitationWaveguideOp(chain)
    cfg = SolverConfig(target=2.0 / np.tan(0.2 * np.pi), count=2,
                       mode="si-matfree", inner_restart=2, inner_maxiter=1)
    with pytest.raises((InnerSolveStagnation, RestartLimitExceeded)):
        eig_target(op, op.dim, cfg, diag=op.diagonal())


def test_solver_config_validation():
    with pytest.raises(ValueError):
        SolverConfig(mode="magic")
    with pytest.raises(ValueError):
        SolverConfig(tol=0.0)
    with pytest.raises(ValueError):
        SolverConfig(count=8, max_subspace=4)
    assert SolverConfig(count=2).subspace == 12
    assert SolverConfig(count=6).subspace == 24


# ------------------------------------------------------------ helpers


def test_residual_norm_detects_perturbation():
    _, H2 = two_exc(12, 0.25)
    spec = eig_dense_all(H2)
    p = spec[0]
    eps = 1e-6
    bad = EigenPair(p.lam + eps, p.vector, p.residual)
    assert residual_norm(H2, bad) == pytest.approx(eps, rel=1e-3)


def test_nearest_match():
    vals = np.array([1.0 + 0j, 2.0 - 1j, -3.0 + 0.5j])
    assert nearest_match(vals, 1.9 - 1.2j) == 1
    assert nearest_match(vals, [1.1, -2.9 + 0.4j]) == [0, 2]


def test_spectrum_sorting_contract():
    pairs = [EigenPair(1.0 - 0.5j, np.ones(1), 0.0),
             EigenPair(-1.0 - 0.1j, np.ones(1), 0.0),
             EigenPair(0.0 - 0.1j, np.ones(1), 0.0)]
    spec = Spectrum(pairs)
    assert [p.lam for p in spec.pairs] == [-1.0 - 0.1j, 0.0 - 0.1j, 1.0 - 0.5j]
