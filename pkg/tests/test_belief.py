import numpy as np
import pytest

from pne.belief import (
    BPError,
    bp_approx,
    bp_scalar,
    grouped_network,
    joint_message_pair,
    projectors_from_bp,
    run_bp,
    symmetrize,
)
from pne.models import random_grid
from pne.network import TensorNetwork, contract
from pne.presets import OPEN2X3_AXES


def random_tree(n_nodes, rng, max_dim=5):
    edges = {}
    legs = {i: [] for i in range(n_nodes)}
    for i in range(1, n_nodes):
        j = int(rng.integers(0, i))
        d = int(rng.integers(2, max_dim + 1))
        legs[j].append((i - 1, d))
        legs[i].append((i - 1, d))
        edges[i - 1] = d
    tensors = {}
    attach = {e: [] for e in edges}
    for i in range(n_nodes):
        dims = [d for _, d in legs[i]]
        tensors[i] = rng.normal(size=tuple(dims)) if dims else np.asarray(rng.normal())
        for ax, (eid, _) in enumerate(legs[i]):
            attach[eid].append((i, ax))
    return TensorNetwork.build(tensors, attach)


def converged_instance(seed, shape=(2, 3), chi=4, bias=0.5):
    # Not every random instance reaches a fixed point; scan a deterministic
    # seed ladder for one that does.
    for attempt in range(5):
        s = seed + 1000 * attempt
        g = random_grid(shape, chi, bias=bias, seed=s)
        state = run_bp(g.net, tol=1e-12, max_iter=4000, seed=s)
        if state.converged:
            return g.net, state
    raise AssertionError(f"no convergent instance found from seed {seed}")


class TestRunBp:
    def test_exact_on_trees(self):
        rng = np.random.default_rng(42)
        for trial in range(8):
            net = random_tree(int(rng.integers(3, 10)), rng)
            state = run_bp(net, tol=1e-13, max_iter=500, damping=0.0, seed=trial)
            assert state.converged
            ex = float(contract(net))
            assert abs((bp_scalar(net, state) - ex) / ex) < 1e-10

    def test_unbiased_random_typically_fails(self):
        fails = 0
        for seed in range(4):
            g = random_grid((2, 3), 4, bias=0.0, seed=seed)
            state = run_bp(g.net, tol=1e-12, max_iter=300, seed=seed)
            fails += not state.converged
        assert fails >= 3

    def test_messages_unit_norm(self):
        net, state = converged_instance(0)
        for m in state.messages.values():
            np.testing.assert_allclose(np.linalg.norm(m), 1.0, atol=1e-12)

    def test_damping_shares_fixed_points(self):
        net, state = converged_instance(1)
        for d2 in (0.0, 0.5):
            resumed = run_bp(net, tol=1e-10, max_iter=2000, damping=d2, seed=1)
            assert resumed.converged
            for k in state.messages:
                np.testing.assert_allclose(resumed.messages[k], state.messages[k], atol=1e-7)

    def test_scale_invariant_messages(self):
        g = random_grid((2, 3), 3, bias=0.5, seed=5)
        s1 = run_bp(g.net, tol=1e-12, max_iter=4000, seed=3)
        scaled = g.net.copy()
        scaled.nodes[0] = 7.5 * scaled.nodes[0]
        s2 = run_bp(scaled, tol=1e-12, max_iter=4000, seed=3)
        assert s1.converged and s2.converged
        for k in s1.messages:
            np.testing.assert_allclose(s2.messages[k], s1.messages[k], atol=1e-9)


class TestBpScalar:
    def test_tree_equals_exact(self):
        rng = np.random.default_rng(7)
        net = random_tree(7, rng)
        state = run_bp(net, tol=1e-13, max_iter=500, damping=0.0)
        ex = float(contract(net))
        assert abs((bp_scalar(net, state) - ex) / ex) < 1e-10

    def test_equals_insertion_form(self):
        net, state = converged_instance(2)
        np.testing.assert_allclose(bp_scalar(net, state), float(bp_approx(net, state)), rtol=1e-10)

    def test_linear_in_single_tensor(self):
        net, state = converged_instance(3)
        base = bp_scalar(net, state)
        scaled = net.copy()
        scaled.nodes[2] = 3.0 * scaled.nodes[2]
        np.testing.assert_allclose(bp_scalar(scaled, state), 3.0 * base, rtol=1e-12)

    def test_requires_convergence(self):
        g = random_grid((2, 3), 4, bias=0.0, seed=1)
        state = run_bp(g.net, max_iter=20, seed=1)
        if not state.converged:
            with pytest.raises(BPError):
                bp_scalar(g.net, state)


class TestSymmetrize:
    def test_scalar_preserved_and_messages_e0(self):
        net, state = converged_instance(4)
        ex = float(contract(net))
        net2, gauge = symmetrize(net, state)
        np.testing.assert_allclose(float(contract(net2)), ex, rtol=1e-10)
        resumed = run_bp(net2, tol=1e-12, max_iter=2000, seed=0)
        assert resumed.converged
        for (eid, _), m in resumed.messages.items():
            e0 = np.zeros(m.size)
            e0[0] = 1.0
            assert np.linalg.norm(m - e0) < 1e-9

    def test_gauge_factors_invert(self):
        net, state = converged_instance(5)
        _, gauge = symmetrize(net, state)
        for eid, x in gauge.x.items():
            np.testing.assert_allclose(x @ gauge.x_inv[eid], np.eye(x.shape[0]), atol=1e-10)

    def test_identity_when_already_symmetric(self):
        # A network whose converged messages are already e0 in both directions.
        net, state = converged_instance(6)
        net2, _ = symmetrize(net, state)
        state2 = run_bp(net2, tol=1e-12, max_iter=2000, seed=0)
        net3, gauge3 = symmetrize(net2, state2)
        for eid, x in gauge3.x.items():
            np.testing.assert_allclose(np.abs(x), np.eye(x.shape[0]), atol=1e-7)

    def test_open_network_gauge_compensation(self):
        g = random_grid((2, 3), 3, bias=0.5, seed=8, open_axes=OPEN2X3_AXES)
        state = run_bp(g.net, tol=1e-12, max_iter=4000, seed=2)
        assert state.converged
        exact = contract(g.net)
        net2, gauge = symmetrize(g.net, state)
        rotated = contract(net2)
        restored = gauge.compensate_open(rotated, net2.open_edge_ids())
        np.testing.assert_allclose(restored, exact, rtol=1e-9)


class TestProjectors:
    def test_basis_column(self):
        net, state = converged_instance(9)
        _, gauge = symmetrize(net, state)
        pr = projectors_from_bp(gauge, sorted(net.edges))
        for eid, p in pr.items():
            iso = p.isometry
            assert iso.shape == (net.edges[eid].dim, 1)
            assert iso[0, 0] == 1.0 and np.all(iso[1:] == 0.0)

    def test_idempotent_complementary(self):
        net, state = converged_instance(10)
        _, gauge = symmetrize(net, state)
        pr = projectors_from_bp(gauge, [0])
        u = pr[0].isometry
        p = u @ u.T
        q = np.eye(p.shape[0]) - p
        np.testing.assert_allclose(p @ p, p, atol=1e-14)
        np.testing.assert_allclose(q @ q, q, atol=1e-14)
        np.testing.assert_allclose(p @ q, 0.0 * p, atol=1e-14)

    def test_tree_leading_term_exact(self):
        from pne.expansion import Factorized, Partition, build_combinatorial, evaluate

        rng = np.random.default_rng(11)
        net = random_tree(6, rng)
        state = run_bp(net, tol=1e-13, max_iter=500, damping=0.0)
        net2, gauge = symmetrize(net, state)
        pr = projectors_from_bp(gauge, sorted(net2.edges))
        parts = [
            Partition(id=k, edges=(e,), projector=Factorized((pr[e].isometry,)))
            for k, e in enumerate(sorted(net2.edges))
        ]
        exp = build_combinatorial(net2, parts)
        ex = float(contract(net))
        assert abs((float(evaluate(exp).value) - ex) / ex) < 1e-10


class TestGrouped:
    def test_fused_value_preserved(self):
        g = random_grid((2, 2, 2), 2, bias=0.3, seed=3)
        e1 = g.bond[(0, (0, 0, 0))]
        e2 = g.bond[(0, (0, 0, 1))]
        derived, fused = grouped_network(g.net, (e1, e2))
        assert derived.edges[fused].dim == 4
        np.testing.assert_allclose(float(contract(derived)), float(contract(g.net)), rtol=1e-10)

    def test_joint_pair_idempotent(self):
        g = random_grid((2, 2, 2), 2, bias=0.5, seed=4)
        e1 = g.bond[(0, (0, 0, 0))]
        e2 = g.bond[(0, (0, 0, 1))]
        derived, fused = grouped_network(g.net, (e1, e2))
        state = run_bp(derived, tol=1e-12, max_iter=4000, seed=0)
        assert state.converged
        ket, bra, ov = joint_message_pair(state, fused)
        p = np.outer(ket, bra) / ov
        np.testing.assert_allclose(p @ p, p, atol=1e-10)
