
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from conftest import tiny_config
from oracles import dense_chain, dense_stationary, enumerate_queue_kernel, erlang_loss_distribution
from ofdma_cac import build_transition_matrix, reference_config, queue_kernel, solve_stationary, truncation_check
from ofdma_cac.chain import StateIndexer, StationaryDistribution, read_triplets, write_triplets
from ofdma_cac.errors import CapacityOverflow, NotConverged, ReducibleChain, WrongMode
from ofdma_cac.mmpp import phase_transition_matrix, steady_state
from ofdma_cac.traffic import connection_transition_probs


def test_indexer_is_bijective():
    ix = StateIndexer(4, 3)
    assert ix.n_states == 2 * 5 * 4
    i, j, k = np.meshgrid(range(2), range(5), range(4), indexing="ij")
    flat = ix.index(i, j, k).ravel()
    assert sorted(flat) == list(range(ix.n_states))
    np.testing.assert_array_equal(np.stack(ix.unravel(flat)), np.stack([i.ravel(), j.ravel(), k.ravel()]))
    assert sorted(ix.level_permutation()) == list(range(ix.n_states))


def test_reference_state_count():
    assert StateIndexer(150, 10).n_states == 3322


def test_queue_kernel_identity():
    Q, d = queue_kernel([1.0], [1.0], 4)
    np.testing.assert_array_equal(Q, np.eye(5))
    np.testing.assert_array_equal(d, 0)


def test_queue_kernel_full_buffer_no_service():
    Q, d = queue_kernel([0.0, 1.0], [1.0], 1)
    assert Q[1, 1] == 1.0 and d[1] == 1.0


def test_queue_kernel_two_outcomes():
    Q, d = queue_kernel([0.5, 0.0, 0.5], [0.0, 1.0], 2)
    np.testing.assert_allclose(Q[1], [0.5, 0.0, 0.5])
    assert d[1] == 0.0


pmfs = hnp.arrays(np.float64, st.integers(1, 8), elements=st.floats(0, 1)).filter(lambda a: a.sum() > 0.1)


@settings(max_examples=60, deadline=None)
@given(pmfs, pmfs, st.integers(0, 9))
def test_queue_kernel_matches_enumeration(arr, tx, L):
    arr, tx = arr / arr.sum(), tx / tx.sum()
    Q, d = queue_kernel(arr, tx, L)
    Qb, db = enumerate_queue_kernel(arr, tx, L)
    np.testing.assert_allclose(Q, Qb, atol=1e-14)
    np.testing.assert_allclose(d, db, atol=1e-13)
    np.testing.assert_allclose(Q.sum(axis=1), 1.0, atol=1e-14)


def test_matrix_factorizes_on_four_states():
    cfg = reference_config(queue_size=0, cac_threshold=1, fading="deterministic", lambda0=1.0, lambda1=1.0,
                         connection_rate=3000.0, mean_holding=1e-3)
    P = build_transition_matrix(cfg).matrix.toarray()
    assert P.shape == (4, 4)
    phase = phase_transition_matrix(cfg.mmpp, 1.0)
    conn = cfg.connection_params()
    C = np.zeros((2, 2))
    for k in range(2):
        up, down, stay = connection_transition_probs(k, conn)
        C[k, k] = stay
        if k == 0:
            C[0, 1] = up
        else:
            C[1, 0] = down
    # index (i, 0, k) = 2 i + k, so P is the Kronecker product phase x connections
    np.testing.assert_allclose(P, np.kron(phase, C), atol=1e-15)


def test_rows_are_stochastic(reference_solved):
    P, _ = reference_solved
    assert P.n_states == 3322
    np.testing.assert_allclose(P.row_sums(), 1.0, atol=1e-12)
    assert P.matrix.data.min() >= 0 and P.matrix.data.max() <= 1
    assert P.expected_drops.min() >= 0


def test_two_state_examples():
    assert solve_stationary(np.array([[0.0, 1.0], [1.0, 0.0]])).pi == pytest.approx([0.5, 0.5], abs=1e-15)
    for method in ("direct", "power"):
        d = solve_stationary(np.array([[0.9, 0.1], [0.2, 0.8]]), method=method, tol=1e-14)
        assert d.pi == pytest.approx([2 / 3, 1 / 3], abs=1e-13)


def test_tiny_direct_power_dense_agree(tiny):
    P = build_transition_matrix(tiny)
    direct = solve_stationary(P, "direct", tol=1e-14)
    power = solve_stationary(P, "power", tol=1e-15)
    dense = dense_stationary(dense_chain(tiny)[0])
    np.testing.assert_allclose(direct.pi, dense, atol=1e-12)
    np.testing.assert_allclose(power.pi, direct.pi, atol=1e-12)


@pytest.mark.parametrize("mode", ["cac", "no_cac"])
def test_direct_and_power_within_ten_tol(fast, mode):
    P = build_transition_matrix(fast, mode=mode)
    direct = solve_stationary(P, "direct", tol=1e-10)
    power = solve_stationary(P, "power", tol=1e-10)
    assert np.abs(direct.pi - power.pi).sum() <= 10 * 1e-10


def test_backends_agree(fast):
    P = build_transition_matrix(fast)
    a = solve_stationary(P, "direct", backend="numba")
    b = solve_stationary(P, "direct", backend="numpy")
    np.testing.assert_allclose(a.pi, b.pi, atol=1e-14, rtol=1e-11)


def test_reducible_chain_detected():
    with pytest.raises(ReducibleChain):
        solve_stationary(np.eye(3), "direct")


def test_power_iteration_cap():
    P = np.array([[0.999999, 0.000001], [0.000002, 0.999998]])
    with pytest.raises(NotConverged):
        solve_stationary(P, "power", tol=1e-14, max_iter=50)


def test_state_budget():
    with pytest.raises(CapacityOverflow):
        build_transition_matrix(reference_config(state_budget=1000))


def test_phase_marginal(reference_solved):
    _, d = reference_solved
    np.testing.assert_allclose(d.phase_marginal(), steady_state(reference_config().mmpp), atol=1e-8)


def test_connection_marginal_is_erlang_loss(reference_solved):
    _, d = reference_solved
    ref = erlang_loss_distribution(4.0, 10)
    np.testing.assert_allclose(d.connection_marginal(), ref, rtol=5e-3)


def test_truncation_check(reference_no_cac_solved):
    _, d = reference_no_cac_solved
    assert truncation_check(d) < 2e-4
    with pytest.raises(WrongMode):
        truncation_check(d, mode="cac")
    ix = StateIndexer(2, 3)
    pi = np.zeros(ix.n_states)
    pi[ix.index(0, 0, 0)] = 1.0
    assert truncation_check(StationaryDistribution(pi, ix, 0.0, "direct")) == 0.0


def test_truncation_violated_under_heavy_load():
    cfg = tiny_config(mode="no_cac", truncation_level=2)
    P = build_transition_matrix(cfg)
    assert truncation_check(solve_stationary(P)) >= 2e-4


def test_triplet_dump_round_trip(tiny, tmp_path):
    P = build_transition_matrix(tiny)
    d = solve_stationary(P)
    path = tmp_path / "chain.txt"
    write_triplets(path, P, d)
    back = read_triplets(path)
    assert back["header"] == {"N": 24, "L": 3, "K": 2}
    assert (back["P"] != P.matrix).nnz == 0
    np.testing.assert_array_equal(back["pi"], d.pi)
