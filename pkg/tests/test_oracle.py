import numpy as np
import pytest

from membrane_patterns.errors import PreconditionError
from membrane_patterns.mesh import build_torus_mesh
from membrane_patterns.model import ModelParams, Operators, SimState
from membrane_patterns.oracle import (DenseSystem, OracleConfig, minimize_J_direct,
                                      minimize_Jn_coupled, saddle_dense_matrix, saddle_dense_oracle)
from membrane_patterns.scheme import SolverSettings, ch_step, height_step

from conftest import fig2_params

TIGHT = SolverSettings(newton_tol=1e-12, minres_tol=1e-13)


def _state(rng, n, mean=0.1, amp=0.3, h_scale=0.01):
    N = n * n
    u = mean + amp * rng.uniform(-1, 1, N)
    u += mean - u.mean()
    return SimState(u, np.zeros(N), h_scale * rng.normal(size=N), np.zeros(N))


@pytest.fixture(scope="module")
def setup8():
    params = fig2_params()
    mesh = build_torus_mesh(8)
    return params, mesh, Operators(mesh, params), DenseSystem(mesh, params)


def test_ch_step_matches_oracle(setup8, rng):
    params, mesh, ops, D = setup8
    for _ in range(3):
        state = _state(rng, 8)
        h, _, _ = height_step(state, params, ops, TIGHT)
        u, _, _ = ch_step(state, h, params, ops, TIGHT)
        ref = minimize_J_direct(state.u, h, params, mesh, dense=D)
        assert np.abs(u - ref).max() <= 1e-6


def test_height_step_matches_dense_lu(setup8, rng):
    params, mesh, ops, D = setup8
    for _ in range(3):
        state = _state(rng, 8)
        h, g, _ = height_step(state, params, ops, TIGHT)
        h_ref, g_ref = saddle_dense_oracle(state, params, mesh, dense=D)
        assert np.abs(h - h_ref).max() <= 1e-8
        assert np.abs(g - g_ref).max() <= 1e-8


def test_oracle_trivial_cases(setup8):
    params, mesh, ops, D = setup8
    N = mesh.vertex_count
    # a constant state with flat height is already the minimiser
    u = minimize_J_direct(np.full(N, 0.2), np.zeros(N), params, mesh, dense=D)
    assert np.abs(u - 0.2).max() <= 1e-12
    h, g = saddle_dense_oracle(SimState(np.full(N, 0.2), np.zeros(N), np.zeros(N), np.zeros(N)),
                               params, mesh, dense=D)
    assert np.abs(h).max() <= 1e-14 and np.abs(g).max() <= 1e-14


def test_oracle_translation_invariant(setup8, rng):
    params, mesh, ops, D = setup8
    state = _state(rng, 8)
    h, _ = saddle_dense_oracle(state, params, mesh, dense=D)
    u = minimize_J_direct(state.u, h, params, mesh, dense=D)

    def shift(v):
        return np.roll(v.reshape(8, 8), (3, 2), axis=(0, 1)).ravel()

    u_s = minimize_J_direct(shift(state.u), shift(h), params, mesh, dense=D)
    assert np.abs(u_s - shift(u)).max() <= 1e-10


def test_dense_saddle_is_symmetric(setup8):
    params, mesh, _, D = setup8
    S = saddle_dense_matrix(params, mesh, D)
    assert np.abs(S - S.T).max() <= 1e-13 * np.abs(S).max()


def test_oracle_rejects_large_meshes():
    params = fig2_params()
    mesh = build_torus_mesh(20)
    N = mesh.vertex_count
    with pytest.raises(PreconditionError):
        minimize_J_direct(np.zeros(N), np.zeros(N), params, mesh)
    with pytest.raises(PreconditionError):
        OracleConfig(n=32)


def test_coupled_functional_close_to_split_for_small_steps(rng):
    # report only: the split scheme is not a minimiser of the unsplit functional,
    # and for larger tau that functional is no longer convex near u_prev
    params = fig2_params(tau=1e-6)
    mesh = build_torus_mesh(6)
    ops = Operators(mesh, params)
    state = _state(rng, 6, amp=0.05)
    res = minimize_Jn_coupled(state.u, state.h, params, mesh, OracleConfig(tol=1e-9))
    h, _, _ = height_step(state, params, ops, TIGHT)
    u, _, _ = ch_step(state, h, params, ops, TIGHT)
    gap = np.abs(u - res.u).max()
    print(f"coupled vs split gap in u: {gap:.3e}, in h: {np.abs(h - res.h).max():.3e}")
    assert gap <= 10 * np.abs(u - state.u).max()
    assert abs(ops.mass_of(res.u) - ops.mass_of(state.u)) <= 1e-12


def test_coupled_oracle_rejects_large_tau(rng):
    params = fig2_params(tau=0.1)
    mesh = build_torus_mesh(6)
    with pytest.raises(PreconditionError):
        minimize_Jn_coupled(np.zeros(36), np.zeros(36), params, mesh)
