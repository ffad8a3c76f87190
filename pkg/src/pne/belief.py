"""Belief propagation on tensor networks.

Messages are unit-norm vectors living on directed edges. Open edges use
boundary reflection: the incoming message on an open index is the outgoing
message on that index. After convergence the message pairs can be gauged so
both directions equal the first basis vector ``e0``, which makes the rank-1
dominant-subspace factor on every edge a plain basis column.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from pne.network import (
    DenseOp,
    Edge,
    EdgeInsertion,
    MessagePair,
    NetworkError,
    ProjectorP,
    TensorNetwork,
    apply_insertions,
    contract,
    validate,
)
from pne.tensor import asarray, orthogonal_complement

__all__ = [
    "BPError",
    "GaugeError",
    "BPState",
    "SymmetrizedGauge",
    "run_bp",
    "bp_scalar",
    "bp_approx",
    "symmetrize",
    "projectors_from_bp",
    "grouped_network",
    "joint_message_pair",
]


class BPError(NetworkError):
    pass


class GaugeError(BPError):
    """Message overlap too small to fix a gauge."""


def _sign_fix(v: np.ndarray) -> np.ndarray:
    """Canonical sign: first component of magnitude > 1e-12 is positive."""
    idx = np.flatnonzero(np.abs(v) > 1e-12)
    pivot = v[idx[0]] if idx.size else v[np.argmax(np.abs(v))]
    return -v if pivot < 0 else v


@dataclass
class BPState:
    """Directed messages keyed by ``(edge_id, direction)``.

    Direction 0 is emitted by the edge tail toward the head; direction 1 is
    the reverse. Open edges store both directions equal (reflection).
    """

    messages: dict[tuple[int, int], np.ndarray]
    iterations: int
    residuals: dict[tuple[int, int], float]
    converged: bool
    tol: float

    @property
    def max_residual(self) -> float:
        return max(self.residuals.values(), default=0.0)


def _incoming(net: TensorNetwork, messages, nid: int, exclude: tuple[int, int] | None):
    """Incoming message for every axis of ``nid`` except the excluded (edge, axis)."""
    pairs = []
    for eid, edge in net.edges.items():
        for slot, (n, ax) in enumerate(edge.endpoints):
            if n != nid:
                continue
            if exclude is not None and (eid, ax) == exclude:
                continue
            if edge.is_open:
                # Reflection: incoming equals the stored outgoing message.
                pairs.append((ax, messages[(eid, 0)]))
            else:
                # Incoming at the tail is the head-emitted message and vice versa.
                pairs.append((ax, messages[(eid, 1 - slot)]))
    return pairs


def _absorb_all(t: np.ndarray, pairs) -> np.ndarray:
    for ax, vec in sorted(pairs, key=lambda p: -p[0]):
        t = np.tensordot(t, vec, axes=([ax], [0]))
    return t


def run_bp(
    net: TensorNetwork,
    tol: float = 1e-12,
    max_iter: int = 2000,
    damping: float = 0.2,
    seed: int = 0,
    initial: dict[tuple[int, int], np.ndarray] | None = None,
) -> BPState:
    """Iterate synchronous damped message passing to a fixed point.

    Returns a state with ``converged=False`` after ``max_iter`` sweeps rather
    than raising; expansions can fall back to weight passing in that case.
    ``initial`` warm-starts from given directed messages (normalized copies
    are taken) instead of the seeded near-uniform start.
    """
    problems = validate(net)
    if problems:
        raise BPError("cannot run BP on an invalid network: " + "; ".join(problems))
    for eid, edge in net.edges.items():
        if len(edge.endpoints) == 2 and edge.endpoints[0][0] == edge.endpoints[1][0]:
            raise BPError(f"edge {eid} is a self-loop; BP updates are not defined for it")

    rng = np.random.default_rng(seed)
    messages: dict[tuple[int, int], np.ndarray] = {}
    for eid, edge in sorted(net.edges.items()):
        ndir = 1 if edge.is_open else 2
        for d in range(ndir):
            if initial is not None:
                m = asarray(initial[(eid, d)]).copy()
            else:
                m = np.ones(edge.dim) + 1e-3 * rng.standard_normal(edge.dim)
            m /= np.linalg.norm(m)
            messages[(eid, d)] = _sign_fix(m)
        if edge.is_open:
            messages[(eid, 1)] = messages[(eid, 0)]

    residuals = {k: np.inf for k in messages}
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        new: dict[tuple[int, int], np.ndarray] = {}
        for eid, edge in sorted(net.edges.items()):
            ndir = 1 if edge.is_open else 2
            for d in range(ndir):
                nid, ax = edge.endpoints[d]
                t = _absorb_all(net.nodes[nid], _incoming(net, messages, nid, exclude=(eid, ax)))
                nrm = np.linalg.norm(t)
                if nrm == 0.0:
                    raise BPError(f"zero outgoing message on edge {eid}")
                m = t / nrm
                if damping:
                    m = (1.0 - damping) * m + damping * messages[(eid, d)]
                    m /= np.linalg.norm(m)
                new[(eid, d)] = _sign_fix(m)
            if edge.is_open:
                new[(eid, 1)] = new[(eid, 0)]
        residuals = {k: float(np.linalg.norm(new[k] - messages[k])) for k in new}
        messages = new
        if max(residuals.values(), default=0.0) < tol:
            converged = True
            break
    return BPState(messages=messages, iterations=it, residuals=residuals, converged=converged, tol=tol)


def _node_term(net: TensorNetwork, messages, nid: int) -> float:
    val = _absorb_all(net.nodes[nid], _incoming(net, messages, nid, exclude=None))
    return float(val)


def bp_scalar(net: TensorNetwork, state: BPState) -> float:
    """Fixed-point estimate of the closed-network scalar.

    Equal to contracting the network with message pairs inserted on every
    edge and dividing by the product of per-edge message overlaps.
    """
    if not state.converged:
        raise BPError("bp_scalar requires a converged BP state")
    if not net.is_closed:
        raise BPError("bp_scalar is defined for closed networks; use bp_approx for open ones")
    value = 1.0
    for nid in sorted(net.nodes):
        value *= _node_term(net, state.messages, nid)
    for eid, edge in sorted(net.edges.items()):
        ov = float(state.messages[(eid, 0)] @ state.messages[(eid, 1)])
        if abs(ov) < 1e-14:
            raise GaugeError(f"message overlap on edge {eid} is {ov:.2e}; gauge is ill-conditioned")
        value /= ov
    return value


def bp_approx(net: TensorNetwork, state: BPState) -> np.ndarray:
    """BP approximation of the network contraction (scalar or open tensor).

    Every closed edge is cut by its message pair; open edges pass through, so
    for open networks the result is the rank-1-environment estimate of the
    open tensor in ascending open-edge order.
    """
    if not state.converged:
        raise BPError("bp_approx requires a converged BP state")
    insertions = []
    scale = 1.0
    for eid, edge in sorted(net.edges.items()):
        if edge.is_open:
            continue
        ket = state.messages[(eid, 1)]
        bra = state.messages[(eid, 0)]
        ov = float(bra @ ket)
        if abs(ov) < 1e-14:
            raise GaugeError(f"message overlap on edge {eid} is {ov:.2e}; gauge is ill-conditioned")
        insertions.append(EdgeInsertion(eid, MessagePair(ket=ket, bra=bra)))
        scale /= ov
    return contract(apply_insertions(net, insertions)) * scale


@dataclass
class SymmetrizedGauge:
    """Per-edge gauge factors bringing both fixed-point messages to ``e0``.

    ``x`` acts on the head side and ``x_inv`` on the tail side, so the pair
    inserts the identity on every closed edge. Open edges record the tail
    factor only; the contracted open tensor is rotated by ``x`` on those axes
    (compensate with :meth:`compensate_open` when comparing against the
    pre-gauge network).
    """

    x: dict[int, np.ndarray] = field(default_factory=dict)
    x_inv: dict[int, np.ndarray] = field(default_factory=dict)
    dims: dict[int, int] = field(default_factory=dict)
    open_edges: set[int] = field(default_factory=set)

    def compensate_open(self, tensor: np.ndarray, open_edge_order: list[int]) -> np.ndarray:
        """Undo the open-leg rotations on a contracted open tensor."""
        out = tensor
        for ax, eid in enumerate(open_edge_order):
            if eid in self.open_edges:
                out = np.moveaxis(np.tensordot(np.asarray(out), self.x[eid], axes=([ax], [0])), -1, ax)
        return out


def symmetrize(net: TensorNetwork, state: BPState) -> tuple[TensorNetwork, SymmetrizedGauge]:
    """Re-gauge every edge so incoming and outgoing messages both become e0.

    The gauge matrix on an edge stacks the (pair-normalized) reverse message
    on top of an orthonormal basis of the forward message's orthogonal
    complement; absorbing the factor pair into the endpoint tensors leaves
    the contracted value unchanged.
    """
    if not state.converged:
        raise BPError("symmetrize requires a converged BP state")
    out = net.copy()
    gauge = SymmetrizedGauge()
    for eid, edge in sorted(net.edges.items()):
        fwd = state.messages[(eid, 0)]   # tail -> head
        rev = state.messages[(eid, 1)]   # head -> tail
        c = float(fwd @ rev)
        if abs(c) < 1e-12:
            raise GaugeError(f"message overlap {c:.2e} on edge {eid} is too small to symmetrize")
        s = np.sqrt(abs(c))
        fwd_n = fwd * (np.sign(c) / s)
        rev_n = rev / s
        x = np.vstack([fwd_n[None, :], orthogonal_complement(rev_n)])
        x_inv = np.linalg.solve(x, np.eye(edge.dim))
        gauge.x[eid] = x
        gauge.x_inv[eid] = x_inv
        gauge.dims[eid] = edge.dim
        if edge.is_open:
            gauge.open_edges.add(eid)
            tn, tax = edge.endpoints[0]
            out.nodes[tn] = _absorb(out.nodes[tn], tax, x_inv, head_side=False)
        else:
            (tn, tax), (hn, hax) = edge.endpoints
            out.nodes[tn] = _absorb(out.nodes[tn], tax, x_inv, head_side=False)
            out.nodes[hn] = _absorb(out.nodes[hn], hax, x, head_side=True)
    return out, gauge


def _absorb(t: np.ndarray, ax: int, m: np.ndarray, head_side: bool) -> np.ndarray:
    out = np.tensordot(t, m, axes=([ax], [1 if head_side else 0]))
    return np.moveaxis(out, -1, ax)


def projectors_from_bp(gauge: SymmetrizedGauge, edges) -> dict[int, ProjectorP]:
    """Rank-1 dominant-subspace factors on symmetrized edges.

    In the symmetrized gauge the fixed-point message is e0, so the factor on
    every edge is the single basis column.
    """
    out = {}
    for eid in edges:
        if eid not in gauge.dims:
            raise GaugeError(f"edge {eid} is not part of the gauge")
        iso = np.zeros((gauge.dims[eid], 1))
        iso[0, 0] = 1.0
        out[eid] = ProjectorP(isometry=iso)
    return out


# ---------------------------------------------------------------------------
# Two-site (grouped) messages
# ---------------------------------------------------------------------------

def grouped_network(net: TensorNetwork, pair: tuple[int, int]) -> tuple[TensorNetwork, int]:
    """Derived network in which a pair of edges is merged into one edge.

    The two tail endpoints are merged into one node (contracting any bonds
    between them) and likewise the two head endpoints; the paired edges then
    fuse into a single edge whose extent is the product of the pair's
    extents (first edge major). Running ordinary message passing on the
    derived network yields genuinely two-site messages whenever the merged
    endpoints share a bond.
    """
    e1, e2 = pair
    for eid in (e1, e2):
        if net.edges[eid].is_open:
            raise BPError(f"edge {eid} is open; grouping needs closed edges")
    out = net.copy()
    (t1, _), (h1, _) = out.edges[e1].endpoints
    (t2, _), (h2, _) = out.edges[e2].endpoints
    if {t1, t2} & {h1, h2}:
        raise BPError("tail and head groups of the paired edges overlap")
    t_node = _merge_nodes(out, t1, t2, keep=(e1, e2))
    h_node = _merge_nodes(out, h1, h2, keep=(e1, e2))
    fused = out.next_edge_id()
    _fuse_pair(out, e1, e2, t_node, h_node, fused)
    return out, fused


def _merge_nodes(net: TensorNetwork, a: int, b: int, keep: tuple[int, int]) -> int:
    """Contract nodes a and b over all shared edges (in place); returns the id."""
    if a == b:
        return a
    shared = [e for e in net.edges_between(a, b) if e not in keep]
    ta, tb = net.nodes[a], net.nodes[b]
    ax_a, ax_b = [], []
    for eid in shared:
        for n, ax in net.edges[eid].endpoints:
            (ax_a if n == a else ax_b).append(ax)
    merged = np.tensordot(ta, tb, axes=(ax_a, ax_b)) if shared else np.multiply.outer(ta, tb)
    rem_a = [i for i in range(ta.ndim) if i not in ax_a]
    rem_b = [i for i in range(tb.ndim) if i not in ax_b]
    new_pos: dict[tuple[int, int], int] = {}
    for k, i in enumerate(rem_a):
        new_pos[(a, i)] = k
    for k, i in enumerate(rem_b):
        new_pos[(b, i)] = len(rem_a) + k
    for eid in shared:
        del net.edges[eid]
    for eid, edge in list(net.edges.items()):
        eps = tuple(
            (a, new_pos[(n, ax)]) if n in (a, b) else (n, ax)
            for n, ax in edge.endpoints
        )
        net.edges[eid] = Edge(endpoints=eps, dim=edge.dim)
    net.nodes[a] = merged
    del net.nodes[b]
    return a


def _fuse_pair(net: TensorNetwork, e1: int, e2: int, t_node: int, h_node: int, fused_eid: int) -> None:
    d1, d2 = net.edges[e1].dim, net.edges[e2].dim
    attach = {}
    for nid in (t_node, h_node):
        ax1 = [ax for n, ax in net.edges[e1].endpoints if n == nid][0]
        ax2 = [ax for n, ax in net.edges[e2].endpoints if n == nid][0]
        t = np.moveaxis(net.nodes[nid], (ax1, ax2), (-2, -1))
        net.nodes[nid] = t.reshape(t.shape[:-2] + (d1 * d2,))
        removed = sorted((ax1, ax2))
        for eid, edge in list(net.edges.items()):
            if eid in (e1, e2):
                continue
            eps = []
            for n, ax in edge.endpoints:
                if n == nid:
                    shift = sum(1 for r in removed if ax > r)
                    eps.append((n, ax - shift))
                else:
                    eps.append((n, ax))
            net.edges[eid] = Edge(endpoints=tuple(eps), dim=edge.dim)
        attach[nid] = net.nodes[nid].ndim - 1
    del net.edges[e1]
    del net.edges[e2]
    net.edges[fused_eid] = Edge(
        endpoints=((t_node, attach[t_node]), (h_node, attach[h_node])), dim=d1 * d2
    )


def joint_message_pair(state: BPState, fused_edge: int) -> tuple[np.ndarray, np.ndarray, float]:
    """Ket/bra pair of the fixed-point messages on a fused edge.

    ``|ket><bra| / overlap`` is an idempotent rank-1 operator on the merged
    index space; the ket caps the tail side and the bra the head side.
    """
    ket = state.messages[(fused_edge, 1)]
    bra = state.messages[(fused_edge, 0)]
    ov = float(bra @ ket)
    if abs(ov) < 1e-14:
        raise GaugeError(f"two-site message overlap {ov:.2e} on fused edge {fused_edge}")
    return ket, bra, ov
