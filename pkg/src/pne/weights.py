"""Weight passing: an iterative gauge that places a positive diagonal weight
spectrum on every edge of a closed network.

Each edge update dresses the two endpoint tensors with their neighboring
weights, decomposes both against the shared index, re-decomposes the merged
spectrum and keeps its ``alpha`` power as the new edge weight (the remainder
is pushed back into the endpoint tensors). Every update is a pure gauge
move, so the weighted network keeps its contracted value. The leading weight
directions then seed projectors of any rank, with no fixed point of message
passing required.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from pne.network import Edge, NetworkError, ProjectorP, TensorNetwork, validate
from pne.tensor import asarray, svd

__all__ = ["WeightState", "run_weight_passing", "wp_update_edge", "projectors_from_weights"]

SINGULAR_FLOOR = 1e-13


class WeightPassingError(NetworkError):
    pass


@dataclass
class WeightState:
    """Gauged network plus per-edge descending positive weight vectors.

    Weight vectors are kept at unit 2-norm; the scale stripped at each
    update accumulates in ``log_prefactor`` so that
    ``contract(network_with_weights()) * exp(log_prefactor)`` stays equal to
    the contraction of the original network.
    """

    net: TensorNetwork
    weights: dict[int, np.ndarray]
    alpha: float
    sweeps: int = 0
    residual: float = np.inf
    converged: bool = False
    log_prefactor: float = 0.0
    residual_history: list[float] = field(default_factory=list)

    def network_with_weights(self) -> TensorNetwork:
        """Plain network with every edge weight absorbed into its tail node."""
        out = self.net.copy()
        for eid, w in sorted(self.weights.items()):
            n, ax = out.edges[eid].endpoints[0]
            shape = [1] * out.nodes[n].ndim
            shape[ax] = w.size
            out.nodes[n] = out.nodes[n] * w.reshape(shape)
        return out

    def contract_value(self) -> float:
        from pne.network import contract

        return float(contract(self.network_with_weights())) * float(np.exp(self.log_prefactor))


def _init_state(net: TensorNetwork, alpha: float) -> WeightState:
    problems = validate(net)
    if problems:
        raise WeightPassingError("invalid network: " + "; ".join(problems))
    if not net.is_closed:
        raise WeightPassingError("weight passing is defined for closed networks only")
    for eid, edge in net.edges.items():
        if edge.endpoints[0][0] == edge.endpoints[1][0]:
            raise WeightPassingError(f"edge {eid} is a self-loop; weight passing does not support it")
    weights = {eid: np.ones(edge.dim) for eid, edge in net.edges.items()}
    return WeightState(net=net.copy(), weights=weights, alpha=alpha)


def _dressed(state: WeightState, nid: int, skip_edge: int) -> np.ndarray:
    """Node tensor with the weights of all other incident edges absorbed."""
    t = state.net.nodes[nid]
    for eid, edge in state.net.edges.items():
        if eid == skip_edge:
            continue
        for n, ax in edge.endpoints:
            if n == nid:
                shape = [1] * t.ndim
                shape[ax] = state.weights[eid].size
                t = t * state.weights[eid].reshape(shape)
    return t


def _apply_gauge(t: np.ndarray, ax: int, g: np.ndarray, head_side: bool) -> np.ndarray:
    out = np.tensordot(t, g, axes=([ax], [1 if head_side else 0]))
    return np.moveaxis(out, -1, ax)


def wp_update_edge(state: WeightState, eid: int) -> WeightState:
    """One gauge update of a single edge (mutates and returns ``state``).

    Singular values below ``1e-13`` are floored before inversion (with a
    warning); directions that small carry no weight anyway.
    """
    edge = state.net.edges[eid]
    (an, aax), (bn, bax) = edge.endpoints
    a_dressed = _dressed(state, an, skip_edge=eid)
    b_dressed = _dressed(state, bn, skip_edge=eid)

    other_a = [i for i in range(a_dressed.ndim) if i != aax]
    res_a = svd(a_dressed, row_axes=other_a, col_axes=[aax])
    other_b = [i for i in range(b_dressed.ndim) if i != bax]
    res_b = svd(b_dressed, row_axes=[bax], col_axes=other_b)

    s_a, vh_a = res_a.s, res_a.vh_matrix()
    u_b, s_b = res_b.u_matrix(), res_b.s
    if np.any(s_a < SINGULAR_FLOOR) or np.any(s_b < SINGULAR_FLOOR):
        warnings.warn(
            f"edge {eid}: singular values below {SINGULAR_FLOOR:g} floored during weight update",
            stacklevel=2,
        )
    inv_a = 1.0 / np.maximum(s_a, SINGULAR_FLOOR)
    inv_b = 1.0 / np.maximum(s_b, SINGULAR_FLOOR)

    mid = (s_a[:, None] * vh_a) @ (state.weights[eid][:, None] * u_b * s_b[None, :])
    res_c = svd(mid)
    s_c = res_c.s
    u_c = res_c.u_matrix()
    vh_c = res_c.vh_matrix()

    half = np.power(s_c, (1.0 - state.alpha) / 2.0)
    new_w = np.power(s_c, state.alpha)
    nrm = float(np.linalg.norm(new_w))
    if nrm == 0.0:
        raise WeightPassingError(f"edge {eid}: weight spectrum collapsed to zero")
    state.log_prefactor += float(np.log(nrm))

    g_a = (res_a.vh_matrix().T * inv_a[None, :]) @ (u_c * half[None, :])
    g_b = (half[:, None] * vh_c) @ (inv_b[:, None] * u_b.T)

    state.net.nodes[an] = _apply_gauge(state.net.nodes[an], aax, g_a, head_side=False)
    state.net.nodes[bn] = _apply_gauge(state.net.nodes[bn], bax, g_b, head_side=True)
    new_dim = s_c.size
    if new_dim != edge.dim:
        state.net.edges[eid] = Edge(endpoints=edge.endpoints, dim=new_dim)
    state.weights[eid] = new_w / nrm
    return state


def run_weight_passing(
    net: TensorNetwork,
    alpha: float = 0.8,
    tol: float = 1e-10,
    max_sweeps: int = 500,
    ramp: list[float] | None = None,
) -> WeightState:
    """Sweep edge updates (ascending edge id) until the weights converge.

    With ``ramp`` the stages run in order, each to convergence, carrying the
    gauge forward; annealing from flatter spectra helps difficult networks.
    A non-convergent run returns ``converged=False`` with the residual
    history rather than raising.
    """
    state = _init_state(net, alpha)
    stages = list(ramp) if ramp else []
    stages.append(alpha)
    for stage_alpha in stages:
        state.alpha = stage_alpha
        state.converged = False
        for _ in range(max_sweeps):
            previous = {eid: w.copy() for eid, w in state.weights.items()}
            for eid in sorted(state.net.edges):
                wp_update_edge(state, eid)
            state.sweeps += 1
            residual = 0.0
            for eid, w in state.weights.items():
                old = previous[eid]
                if old.size != w.size:
                    residual = np.inf
                    break
                residual = max(residual, float(np.linalg.norm(w - old)))
            state.residual = residual
            state.residual_history.append(residual)
            if residual < tol:
                state.converged = True
                break
    return state


def projectors_from_weights(
    state: WeightState,
    edges,
    rank: int,
) -> dict[int, ProjectorP]:
    """Rank-r factors spanning the leading weight directions.

    In the weight gauge the spectra are axis-aligned, so the factor on each
    edge is simply the first r basis columns. A near-degenerate spectrum at
    the cut is reported: truncating there is gauge-ambiguous.
    """
    out = {}
    for eid in sorted(edges):
        if eid not in state.weights:
            raise WeightPassingError(f"edge {eid} has no weights")
        w = state.weights[eid]
        dim = state.net.edges[eid].dim
        if rank > dim:
            raise WeightPassingError(f"rank {rank} exceeds the extent {dim} of edge {eid}")
        if rank < dim and abs(w[rank - 1] - w[rank]) < 1e-12:
            warnings.warn(
                f"edge {eid}: weight spectrum is degenerate at the rank-{rank} cutoff",
                stacklevel=2,
            )
        iso = np.zeros((dim, rank))
        iso[:rank, :rank] = np.eye(rank)
        out[eid] = ProjectorP(isometry=iso)
    return out
