import numpy as np
import pytest

from pne.belief import run_bp
from pne.expansion import Factorized, JointIsometry, JointKetBra, Partition
from pne.io import (
    load_any,
    load_bp_state,
    load_network,
    load_partitions,
    load_weight_state,
    save_bp_state,
    save_network,
    save_partitions,
    save_weight_state,
)
from pne.models import random_grid
from pne.network import contract
from pne.weights import run_weight_passing


def test_network_round_trip(tmp_path):
    g = random_grid((2, 3), 3, bias=0.2, seed=0, open_axes=frozenset({((1, 1), (0, 1))}))
    path = tmp_path / "net.pnec"
    save_network(path, g.net)
    loaded = load_network(path)
    assert sorted(loaded.edges) == sorted(g.net.edges)
    for e in g.net.edges:
        assert loaded.edges[e].endpoints == g.net.edges[e].endpoints
        assert loaded.edges[e].dim == g.net.edges[e].dim
    np.testing.assert_allclose(contract(loaded), contract(g.net), rtol=1e-15)


def test_bp_state_round_trip(tmp_path):
    g = random_grid((2, 2), 3, bias=0.5, seed=1)
    state = run_bp(g.net, tol=1e-12, max_iter=2000, seed=1)
    path = tmp_path / "bp.pnec"
    save_bp_state(path, state)
    loaded = load_bp_state(path)
    assert loaded.converged == state.converged
    assert loaded.iterations == state.iterations
    assert loaded.tol == state.tol
    for k, m in state.messages.items():
        np.testing.assert_array_equal(loaded.messages[k], m)
        assert loaded.residuals[k] == state.residuals[k]


def test_weight_state_round_trip(tmp_path):
    g = random_grid((2, 2), 3, bias=0.3, seed=2)
    state = run_weight_passing(g.net, alpha=0.8, tol=1e-10, max_sweeps=100)
    path = tmp_path / "wp.pnec"
    save_weight_state(path, state)
    loaded = load_weight_state(path)
    assert loaded.alpha == state.alpha
    assert loaded.converged == state.converged
    assert loaded.log_prefactor == state.log_prefactor
    for e, w in state.weights.items():
        np.testing.assert_array_equal(loaded.weights[e], w)
    np.testing.assert_allclose(loaded.contract_value(), state.contract_value(), rtol=1e-12)


def test_partitions_round_trip(tmp_path):
    rng = np.random.default_rng(3)
    q, _ = np.linalg.qr(rng.normal(size=(4, 2)))
    parts = [
        Partition(id=0, edges=(0, 1), projector=Factorized((np.eye(3)[:, :1], np.eye(3)[:, :2]))),
        Partition(id=1, edges=(2, 3), projector=JointIsometry(q)),
        Partition(id=2, edges=(4,), projector=JointKetBra(rng.normal(size=3), rng.normal(size=3))),
    ]
    path = tmp_path / "parts.pnec"
    save_partitions(path, parts, form="combinatorial")
    loaded, form = load_partitions(path)
    assert form == "combinatorial"
    assert [p.id for p in loaded] == [0, 1, 2]
    assert loaded[0].edges == (0, 1)
    np.testing.assert_array_equal(loaded[0].projector.factors[1], np.eye(3)[:, :2])
    np.testing.assert_array_equal(loaded[1].projector.isometry, q)
    np.testing.assert_array_equal(loaded[2].projector.ket, parts[2].projector.ket)


def test_load_any_dispatch(tmp_path):
    g = random_grid((2, 2), 2, seed=4)
    path = tmp_path / "x.pnec"
    save_network(path, g.net)
    loaded = load_any(path)
    assert sorted(loaded.nodes) == sorted(g.net.nodes)


def test_bad_magic(tmp_path):
    path = tmp_path / "bad.pnec"
    path.write_bytes(b"nope")
    with pytest.raises(ValueError, match="magic"):
        load_network(path)
