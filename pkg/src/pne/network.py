"""Tensor network data model and exact contraction.

A :class:`TensorNetwork` is a graph whose nodes hold dense tensors and whose
edges identify pairs of tensor axes that are summed over. Edges with a single
attachment are *open*: their axes survive contraction and appear in the
result in ascending edge-id order. Edge ids are stable integers assigned at
construction; every canonical ordering in the package derives from them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from pne.tensor import asarray

__all__ = [
    "NetworkError",
    "InsertionError",
    "MemoryBudgetError",
    "Edge",
    "TensorNetwork",
    "Identity",
    "ProjectorP",
    "ProjectorQ",
    "MessagePair",
    "Weight",
    "DenseOp",
    "EdgeInsertion",
    "PlanStep",
    "ContractionPlan",
    "validate",
    "apply_insertions",
    "insert_joint_ketbra",
    "insert_joint_isometry",
    "insert_joint_dense",
    "contract",
    "plan_order",
]

DEFAULT_MEMORY_CAP_BYTES = 2 * 1024**3


class NetworkError(ValueError):
    """Structural problem with a tensor network."""


class InsertionError(NetworkError):
    """An edge insertion cannot be realized."""


class MemoryBudgetError(NetworkError):
    """A contraction would exceed the configured memory cap."""

    def __init__(self, msg: str, shape: tuple[int, ...]):
        super().__init__(msg)
        self.shape = shape


@dataclass(frozen=True)
class Edge:
    """Attachment record for one network edge.

    ``endpoints`` holds one ``(node_id, axis)`` pair for an open edge and two
    for a closed edge. The first endpoint is the edge *tail*; directed
    quantities (messages, gauge factors) use tail -> head as the positive
    orientation.
    """

    endpoints: tuple[tuple[int, int], ...]
    dim: int

    @property
    def is_open(self) -> bool:
        return len(self.endpoints) == 1


@dataclass
class TensorNetwork:
    nodes: dict[int, np.ndarray]
    edges: dict[int, Edge]

    @classmethod
    def build(
        cls,
        tensors: Mapping[int, np.ndarray],
        attachments: Mapping[int, Sequence[tuple[int, int]]],
    ) -> "TensorNetwork":
        """Construct a network from tensors and per-edge attachment lists.

        Edge dims are inferred from the attached tensor axes and checked for
        consistency.
        """
        nodes = {int(n): asarray(t) for n, t in tensors.items()}
        edges: dict[int, Edge] = {}
        for eid, eps in attachments.items():
            eps = tuple((int(n), int(ax)) for n, ax in eps)
            if not 1 <= len(eps) <= 2:
                raise NetworkError(f"edge {eid} must have one or two endpoints, got {len(eps)}")
            dims = []
            for n, ax in eps:
                if n not in nodes:
                    raise NetworkError(f"edge {eid} references unknown node {n}")
                if not 0 <= ax < nodes[n].ndim:
                    raise NetworkError(f"edge {eid} references axis {ax} of node {n} (rank {nodes[n].ndim})")
                dims.append(nodes[n].shape[ax])
            if len(set(dims)) > 1:
                raise NetworkError(f"edge {eid} joins axes of unequal extents {dims}")
            edges[int(eid)] = Edge(endpoints=eps, dim=dims[0])
        net = cls(nodes=nodes, edges=edges)
        problems = validate(net)
        if problems:
            raise NetworkError("; ".join(problems))
        return net

    def copy(self) -> "TensorNetwork":
        return TensorNetwork(nodes=dict(self.nodes), edges=dict(self.edges))

    def node_axes(self, nid: int) -> list[int | None]:
        """Edge id attached to each axis of node ``nid`` (None if uncovered)."""
        axes: list[int | None] = [None] * self.nodes[nid].ndim
        for eid, edge in self.edges.items():
            for n, ax in edge.endpoints:
                if n == nid:
                    axes[ax] = eid
        return axes

    def open_edge_ids(self) -> list[int]:
        return sorted(eid for eid, e in self.edges.items() if e.is_open)

    @property
    def is_closed(self) -> bool:
        return not any(e.is_open for e in self.edges.values())

    def edges_between(self, a: int, b: int) -> list[int]:
        out = []
        for eid, e in self.edges.items():
            if len(e.endpoints) == 2:
                ns = {e.endpoints[0][0], e.endpoints[1][0]}
                if ns == {a, b}:
                    out.append(eid)
        return sorted(out)

    def next_node_id(self) -> int:
        return max(self.nodes, default=-1) + 1

    def next_edge_id(self) -> int:
        return max(self.edges, default=-1) + 1


def validate(net: TensorNetwork) -> list[str]:
    """Return a list of structural violations (empty when the network is ok)."""
    problems: list[str] = []
    seen: dict[tuple[int, int], int] = {}
    for eid, edge in net.edges.items():
        if not 1 <= len(edge.endpoints) <= 2:
            problems.append(f"edge {eid}: has {len(edge.endpoints)} endpoints")
            continue
        for n, ax in edge.endpoints:
            if n not in net.nodes:
                problems.append(f"edge {eid}: unknown node {n}")
                continue
            t = net.nodes[n]
            if not 0 <= ax < t.ndim:
                problems.append(f"edge {eid}: node {n} has no axis {ax}")
                continue
            if t.shape[ax] != edge.dim:
                problems.append(
                    f"edge {eid}: extent {t.shape[ax]} of node {n} axis {ax} != edge dim {edge.dim}"
                )
            key = (n, ax)
            if key in seen:
                problems.append(f"axis {ax} of node {n} covered by edges {seen[key]} and {eid}")
            else:
                seen[key] = eid
    for n, t in net.nodes.items():
        for ax in range(t.ndim):
            if (n, ax) not in seen:
                problems.append(f"axis {ax} of node {n} is not covered by any edge")
    return problems


# ---------------------------------------------------------------------------
# Edge insertions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Identity:
    pass


@dataclass(frozen=True)
class ProjectorP:
    """Rank-r orthogonal projector, stored as its d x r isometric factor.

    Realized by absorbing the isometry into both endpoint tensors, shrinking
    the edge extent to r.
    """

    isometry: np.ndarray


@dataclass(frozen=True)
class ProjectorQ:
    """Complement of :class:`ProjectorP`. Never realized directly here; the
    expansion module rewrites it as a dense ``I - U U^T`` absorption."""

    isometry: np.ndarray


@dataclass(frozen=True)
class MessagePair:
    """Rank-1 cut: the tail absorbs ``ket`` and the head absorbs ``bra``,
    removing the edge. The inserted operator is ``|ket><bra|``."""

    ket: np.ndarray
    bra: np.ndarray


@dataclass(frozen=True)
class Weight:
    """Diagonal operator, multiplied onto the tail endpoint."""

    diag: np.ndarray


@dataclass(frozen=True)
class DenseOp:
    """Square dense operator absorbed into one endpoint (extent unchanged).

    ``side`` 0 absorbs into the tail, 1 into the head; ``None`` picks the
    endpoint with the smaller tensor (ties to the tail). When both sides of
    an edge carry dense absorptions the combined inserted operator is
    ``m_tail @ m_head``.
    """

    matrix: np.ndarray
    side: int | None = None


Operator = Identity | ProjectorP | ProjectorQ | MessagePair | Weight | DenseOp


@dataclass(frozen=True)
class EdgeInsertion:
    edge: int
    op: Operator


def _absorb_matrix(t: np.ndarray, ax: int, m: np.ndarray, head_side: bool) -> np.ndarray:
    """Contract matrix ``m`` onto axis ``ax`` of ``t`` and restore axis order.

    Tail side: new_axis_j = sum_i t[..i..] m[i, j]. Head side:
    new_axis_j = sum_k m[j, k] t[..k..].
    """
    contract_ax = 1 if head_side else 0
    out = np.tensordot(t, m, axes=([ax], [contract_ax]))
    return np.moveaxis(out, -1, ax)


def _absorb_vector(t: np.ndarray, ax: int, v: np.ndarray) -> np.ndarray:
    return np.tensordot(t, v, axes=([ax], [0]))


def apply_insertions(
    net: TensorNetwork,
    insertions: Iterable[EdgeInsertion],
) -> TensorNetwork:
    """Return a new network equal to ``net`` with operators inserted on edges.

    The contraction of the returned network equals the contraction of the
    original with the stated operators inserted. Insertions must reference
    distinct existing edges.
    """
    out = net.copy()
    seen: set[int] = set()
    for ins in insertions:
        eid, op = ins.edge, ins.op
        if eid not in out.edges:
            raise InsertionError(f"edge {eid} does not exist")
        if eid in seen:
            raise InsertionError(f"edge {eid} referenced by more than one insertion")
        seen.add(eid)
        edge = out.edges[eid]
        if isinstance(op, Identity):
            continue
        if isinstance(op, ProjectorQ):
            raise InsertionError(
                "ProjectorQ cannot be applied directly (it would require extent "
                "growth); the expansion module rewrites Q as a dense I - U U^T"
            )
        if isinstance(op, ProjectorP):
            if edge.is_open:
                raise InsertionError(f"edge {eid} is open; projectors apply to closed edges")
            u = asarray(op.isometry)
            if u.ndim != 2 or u.shape[0] != edge.dim or not 1 <= u.shape[1] <= edge.dim:
                raise InsertionError(
                    f"edge {eid}: isometry shape {u.shape} incompatible with edge dim {edge.dim}"
                )
            if not np.allclose(u.T @ u, np.eye(u.shape[1]), atol=1e-8):
                raise InsertionError(f"edge {eid}: projector factor columns are not orthonormal")
            for n, ax in edge.endpoints:
                out.nodes[n] = _absorb_matrix(out.nodes[n], ax, u, head_side=False)
            out.edges[eid] = Edge(endpoints=edge.endpoints, dim=u.shape[1])
        elif isinstance(op, MessagePair):
            if edge.is_open:
                raise InsertionError(f"edge {eid} is open; a message pair needs both sides")
            ket = asarray(op.ket).reshape(-1)
            bra = asarray(op.bra).reshape(-1)
            if ket.size != edge.dim or bra.size != edge.dim:
                raise InsertionError(
                    f"edge {eid}: message lengths {ket.size}/{bra.size} != edge dim {edge.dim}"
                )
            (tn, tax), (hn, hax) = edge.endpoints
            out.nodes[tn] = _absorb_vector(out.nodes[tn], tax, ket)
            _shift_axes(out, tn, tax)
            out.nodes[hn] = _absorb_vector(out.nodes[hn], hax, bra)
            _shift_axes(out, hn, hax)
            del out.edges[eid]
        elif isinstance(op, Weight):
            w = asarray(op.diag).reshape(-1)
            if w.size != edge.dim:
                raise InsertionError(f"edge {eid}: weight length {w.size} != edge dim {edge.dim}")
            n, ax = edge.endpoints[0]
            shape = [1] * out.nodes[n].ndim
            shape[ax] = edge.dim
            out.nodes[n] = out.nodes[n] * w.reshape(shape)
        elif isinstance(op, DenseOp):
            m = asarray(op.matrix)
            if m.shape != (edge.dim, edge.dim):
                raise InsertionError(f"edge {eid}: dense operator shape {m.shape} != ({edge.dim}, {edge.dim})")
            side = op.side
            if side is None:
                if edge.is_open:
                    side = 0
                else:
                    sizes = [out.nodes[n].size for n, _ in edge.endpoints]
                    side = 0 if sizes[0] <= sizes[1] else 1
            if side >= len(edge.endpoints):
                raise InsertionError(f"edge {eid} is open; dense side must be 0")
            n, ax = edge.endpoints[side]
            out.nodes[n] = _absorb_matrix(out.nodes[n], ax, m, head_side=(side == 1))
        else:
            raise InsertionError(f"unknown operator {op!r}")
    return out


def _shift_axes(net: TensorNetwork, nid: int, removed_axis: int) -> None:
    """Re-index edge attachments of ``nid`` after one of its axes was removed."""
    for eid, edge in list(net.edges.items()):
        new_eps = []
        changed = False
        for n, ax in edge.endpoints:
            if n == nid and ax > removed_axis:
                new_eps.append((n, ax - 1))
                changed = True
            else:
                new_eps.append((n, ax))
        if changed:
            net.edges[eid] = Edge(endpoints=tuple(new_eps), dim=edge.dim)


def insert_joint_ketbra(
    net: TensorNetwork,
    edge_ids: Sequence[int],
    ket: np.ndarray,
    bra: np.ndarray,
    scale: float = 1.0,
) -> TensorNetwork:
    """Insert a rank-1 operator ``scale * |ket><bra|`` over the joint space of
    several edges.

    The edges are cut; a ket node joins their tail attachments and a bra node
    joins the head attachments (each reshaped over the per-edge extents).
    """
    out = net.copy()
    dims = []
    for eid in edge_ids:
        edge = out.edges[eid]
        if edge.is_open:
            raise InsertionError(f"edge {eid} is open; joint insertions need closed edges")
        dims.append(edge.dim)
    bigdim = int(np.prod(dims))
    ket = asarray(ket).reshape(-1)
    bra = asarray(bra).reshape(-1)
    if ket.size != bigdim or bra.size != bigdim:
        raise InsertionError(f"joint vectors of length {ket.size}/{bra.size} != merged dim {bigdim}")
    ket_node = out.next_node_id()
    bra_node = ket_node + 1
    out.nodes[ket_node] = (scale * ket).reshape(dims)
    out.nodes[bra_node] = bra.reshape(dims)
    next_eid = out.next_edge_id()
    for k, eid in enumerate(edge_ids):
        edge = out.edges[eid]
        (tn, tax), (hn, hax) = edge.endpoints
        del out.edges[eid]
        out.edges[next_eid] = Edge(endpoints=((tn, tax), (ket_node, k)), dim=edge.dim)
        out.edges[next_eid + 1] = Edge(endpoints=((bra_node, k), (hn, hax)), dim=edge.dim)
        next_eid += 2
    return out


def insert_joint_isometry(
    net: TensorNetwork,
    edge_ids: Sequence[int],
    isometry: np.ndarray,
) -> TensorNetwork:
    """Insert the orthogonal projector ``W W^T`` over the joint space of
    several edges without materializing it densely.

    ``W`` is (D, r); it becomes a (k+1)-leg node on each side of the cut,
    joined by a new rank-r edge.
    """
    out = net.copy()
    dims = []
    for eid in edge_ids:
        edge = out.edges[eid]
        if edge.is_open:
            raise InsertionError(f"edge {eid} is open; joint insertions need closed edges")
        dims.append(edge.dim)
    bigdim = int(np.prod(dims))
    w = asarray(isometry)
    if w.ndim != 2 or w.shape[0] != bigdim or not 1 <= w.shape[1] <= bigdim:
        raise InsertionError(f"joint isometry shape {w.shape} incompatible with merged dim {bigdim}")
    if not np.allclose(w.T @ w, np.eye(w.shape[1]), atol=1e-8):
        raise InsertionError("joint projector factor columns are not orthonormal")
    r = w.shape[1]
    k = len(dims)
    tail_node = out.next_node_id()
    head_node = tail_node + 1
    out.nodes[tail_node] = w.reshape(dims + [r])
    out.nodes[head_node] = w.reshape(dims + [r])
    next_eid = out.next_edge_id()
    for m, eid in enumerate(edge_ids):
        edge = out.edges[eid]
        (tn, tax), (hn, hax) = edge.endpoints
        del out.edges[eid]
        out.edges[next_eid] = Edge(endpoints=((tn, tax), (tail_node, m)), dim=edge.dim)
        out.edges[next_eid + 1] = Edge(endpoints=((head_node, m), (hn, hax)), dim=edge.dim)
        next_eid += 2
    out.edges[next_eid] = Edge(endpoints=((tail_node, k), (head_node, k)), dim=r)
    return out


def insert_joint_dense(
    net: TensorNetwork,
    edge_ids: Sequence[int],
    op: np.ndarray,
) -> tuple[TensorNetwork, dict[int, int]]:
    """Insert a dense operator over the joint space of several edges.

    ``op`` is (D, D) with D the product of the edge extents; it becomes a
    single 2k-leg node wired between the tail and head attachments. Returns
    the new network plus, per input edge, the id of the head-side edge: a
    later operator inserted there composes on the right of this one.
    """
    out = net.copy()
    dims = []
    for eid in edge_ids:
        edge = out.edges[eid]
        if edge.is_open:
            raise InsertionError(f"edge {eid} is open; joint insertions need closed edges")
        dims.append(edge.dim)
    bigdim = int(np.prod(dims))
    op = asarray(op)
    if op.shape != (bigdim, bigdim):
        raise InsertionError(f"joint operator shape {op.shape} != ({bigdim}, {bigdim})")
    op_node = out.next_node_id()
    out.nodes[op_node] = op.reshape(dims + dims)
    k = len(dims)
    next_eid = out.next_edge_id()
    continuation: dict[int, int] = {}
    for m, eid in enumerate(edge_ids):
        edge = out.edges[eid]
        (tn, tax), (hn, hax) = edge.endpoints
        del out.edges[eid]
        out.edges[next_eid] = Edge(endpoints=((tn, tax), (op_node, m)), dim=edge.dim)
        out.edges[next_eid + 1] = Edge(endpoints=((op_node, k + m), (hn, hax)), dim=edge.dim)
        continuation[eid] = next_eid + 1
        next_eid += 2
    return out, continuation


# ---------------------------------------------------------------------------
# Contraction planning and execution
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PlanStep:
    kind: str              # "trace" | "pair" | "outer"
    nodes: tuple[int, ...]  # (node,) for trace, (a, b) otherwise
    result: int             # surviving node id
    flops: int              # product of the extents of all involved indices
    result_entries: int


@dataclass(frozen=True)
class ContractionPlan:
    steps: tuple[PlanStep, ...]
    total_flops: int
    peak_step_flops: int
    peak_result_entries: int

    def cost_exponent(self, chi: float) -> float:
        """Peak step cost as a power of ``chi`` (exact when all extents are
        chi or 1)."""
        if self.peak_step_flops <= 1:
            return 0.0
        return math.log(self.peak_step_flops) / math.log(chi)


class _Planner:
    """Shared stepping machinery for the deterministic plan heuristics."""

    def __init__(self, net: TensorNetwork):
        # node id -> list of (edge id, dim); self-loops appear twice.
        self.incident: dict[int, list[tuple[int, int]]] = {n: [] for n in net.nodes}
        for eid, edge in net.edges.items():
            for n, _ax in edge.endpoints:
                self.incident[n].append((eid, edge.dim))
        self.steps: list[PlanStep] = []
        self.total = 0
        self.peak_flops = 0
        self.peak_entries = 0

    def record(self, kind, nodes, result, flops, entries):
        self.steps.append(PlanStep(kind, nodes, result, flops, entries))
        self.total += flops
        self.peak_flops = max(self.peak_flops, flops)
        self.peak_entries = max(self.peak_entries, entries)

    def trace_loops(self):
        for n in sorted(self.incident):
            counts: dict[int, int] = {}
            for eid, _ in self.incident[n]:
                counts[eid] = counts.get(eid, 0) + 1
            for eid in sorted(e for e, c in counts.items() if c == 2):
                flops = int(np.prod([d for _, d in self.incident[n]], dtype=np.int64)) or 1
                self.incident[n] = [(e, d) for e, d in self.incident[n] if e != eid]
                entries = int(np.prod([d for _, d in self.incident[n]], dtype=np.int64)) or 1
                self.record("trace", (n,), n, flops, entries)

    def step_cost(self, a: int, b: int) -> tuple[int, int, int]:
        edges_a = {e for e, _ in self.incident[a]}
        shared = sorted(e for e, _ in self.incident[b] if e in edges_a)
        union: dict[int, int] = {}
        for e, d in self.incident[a] + self.incident[b]:
            union[e] = d
        flops = int(np.prod(list(union.values()), dtype=np.int64)) or 1
        entries = int(np.prod([d for e, d in union.items() if e not in shared], dtype=np.int64)) or 1
        return flops, entries, (shared[0] if shared else -1)

    def merge(self, a: int, b: int, kind: str, flops: int, entries: int):
        self.record(kind, (a, b), a, flops, entries)
        shared = {e for e, _ in self.incident[a]} & {e for e, _ in self.incident[b]}
        merged = [(e, d) for e, d in self.incident[a] if e not in shared]
        merged += [(e, d) for e, d in self.incident[b] if e not in shared]
        self.incident[a] = merged
        del self.incident[b]

    def plan(self) -> ContractionPlan:
        return ContractionPlan(
            steps=tuple(self.steps),
            total_flops=self.total,
            peak_step_flops=self.peak_flops,
            peak_result_entries=self.peak_entries,
        )


def _plan_greedy(net: TensorNetwork, seed: int | None = None) -> ContractionPlan:
    """Greedy: contract the adjacent pair with the smallest merged tensor.

    With ``seed=None`` ties break on node ids; otherwise among the tied
    pairs a seeded choice is made, which lets a handful of restarts escape
    the bias of any fixed tie order."""
    rng = np.random.default_rng(seed) if seed is not None else None
    pl = _Planner(net)
    pl.trace_loops()
    live = sorted(pl.incident)
    while len(live) > 1:
        cands = []
        for i, a in enumerate(live):
            edges_a = {e for e, _ in pl.incident[a]}
            if not edges_a:
                continue
            for b in live[i + 1:]:
                if not any(e in edges_a for e, _ in pl.incident[b]):
                    continue
                flops, entries, _ = pl.step_cost(a, b)
                cands.append((entries, a, b, flops))
        if not cands:
            a, b = live[0], live[1]
            flops, entries, _ = pl.step_cost(a, b)
            pl.merge(a, b, "outer", flops, entries)
        else:
            lowest = min(c[0] for c in cands)
            pool = [c for c in cands if c[0] == lowest]
            pick = pool[0] if rng is None else pool[int(rng.integers(len(pool)))]
            entries, a, b, flops = pick
            pl.merge(a, b, "pair", flops, entries)
        live = sorted(pl.incident)
    return pl.plan()


def _plan_sweep(net: TensorNetwork, reverse: bool = False) -> ContractionPlan:
    """Sweep: absorb nodes into an accumulator in node-id order, preferring
    adjacent nodes. Node ids of lattice builders follow row-major position
    order, so this reproduces the boundary sweep whose frontier is one
    lattice cross-section (``reverse`` sweeps from the other end)."""
    pl = _Planner(net)
    pl.trace_loops()
    while len(pl.incident) > 1:
        live = sorted(pl.incident, reverse=reverse)
        acc = live[0]
        acc_edges = {e for e, _ in pl.incident[acc]}
        nxt = None
        for b in live[1:]:
            if any(e in acc_edges for e, _ in pl.incident[b]):
                nxt = b
                break
        kind = "pair"
        if nxt is None:
            nxt = live[1]
            kind = "outer"
        a, b = min(acc, nxt), max(acc, nxt)
        flops, entries, _ = pl.step_cost(a, b)
        pl.merge(a, b, kind, flops, entries)
    return pl.plan()


DP_NODE_CAP = 10
GREEDY_RESTARTS = 8


def _plan_dp(net: TensorNetwork) -> ContractionPlan:
    """Exact subset dynamic program minimizing (peak step flops, total flops).

    Exponential in the node count; only used below :data:`DP_NODE_CAP`.
    """
    pl = _Planner(net)
    pl.trace_loops()
    nodes = sorted(pl.incident)
    n = len(nodes)
    pos = {nid: i for i, nid in enumerate(nodes)}
    edge_members: dict[int, list[int]] = {}
    edge_dim: dict[int, int] = {}
    for nid in nodes:
        for eid, d in pl.incident[nid]:
            edge_members.setdefault(eid, []).append(pos[nid])
            edge_dim[eid] = d

    legs: list[dict[int, int]] = [dict() for _ in range(1 << n)]
    for mask in range(1, 1 << n):
        out = {}
        for eid, members in edge_members.items():
            inside = sum(1 for m in members if mask >> m & 1)
            if inside and (inside < len(members) or len(members) == 1):
                out[eid] = edge_dim[eid]
        legs[mask] = out

    best: list[tuple[int, int] | None] = [None] * (1 << n)
    split: list[int] = [0] * (1 << n)
    for i in range(n):
        best[1 << i] = (0, 0)
    for mask in range(1, 1 << n):
        if best[mask] is not None:
            continue
        lowest = mask & -mask
        rest = mask ^ lowest
        sub = (rest - 1) & rest
        choice = None
        while True:
            a = sub | lowest
            b = mask ^ a
            union = dict(legs[a])
            union.update(legs[b])
            flops = 1
            for d in union.values():
                flops *= d
            pa, ta = best[a]
            pb, tb = best[b]
            cand = (max(pa, pb, flops), ta + tb + flops)
            if choice is None or cand < choice[0] or (cand == choice[0] and a < choice[1]):
                choice = (cand, a)
            if sub == 0:
                break
            sub = (sub - 1) & rest
        best[mask] = choice[0]
        split[mask] = choice[1]

    merges: list[tuple[int, int]] = []

    def emit(mask: int) -> int:
        if mask & (mask - 1) == 0:
            return nodes[mask.bit_length() - 1]
        a = split[mask]
        b = mask ^ a
        ra = emit(a)
        rb = emit(b)
        lo, hi = min(ra, rb), max(ra, rb)
        merges.append((lo, hi))
        return lo

    emit((1 << n) - 1)
    for a, b in merges:
        shared = {e for e, _ in pl.incident[a]} & {e for e, _ in pl.incident[b]}
        flops, entries, _ = pl.step_cost(a, b)
        pl.merge(a, b, "pair" if shared else "outer", flops, entries)
    return pl.plan()


def plan_order(net: TensorNetwork, strategy: str = "auto") -> ContractionPlan:
    """Deterministic pairwise contraction plan.

    ``auto`` evaluates the greedy heuristic and the id-order sweep, plus an
    optimal subset DP on small networks, and keeps the plan with the lowest
    peak step cost (plain greedy misjudges wide lattices, where the sweep's
    cross-section frontier is the right shape). Disconnected components end
    in outer products between the smallest surviving node ids.
    """
    problems = validate(net)
    if problems:
        raise NetworkError("cannot plan an invalid network: " + "; ".join(problems))
    if strategy == "greedy":
        return _plan_greedy(net)
    if strategy == "sweep":
        return _plan_sweep(net)
    if strategy == "dp":
        return _plan_dp(net)
    if strategy != "auto":
        raise NetworkError(f"unknown planning strategy {strategy!r}")
    candidates = [_plan_sweep(net), _plan_sweep(net, reverse=True), _plan_greedy(net)]
    candidates += [_plan_greedy(net, seed=k) for k in range(GREEDY_RESTARTS)]
    if len(net.nodes) <= DP_NODE_CAP:
        candidates.append(_plan_dp(net))
    return min(candidates, key=lambda p: (p.peak_step_flops, p.total_flops))


def contract(
    net: TensorNetwork,
    memory_cap_bytes: int = DEFAULT_MEMORY_CAP_BYTES,
    plan: ContractionPlan | None = None,
) -> np.ndarray:
    """Contract the network exactly.

    Closed networks yield a rank-0 array; open edges become result axes in
    ascending edge-id order. Raises :class:`MemoryBudgetError` before
    materializing an intermediate larger than ``memory_cap_bytes``.
    """
    if plan is None:
        plan = plan_order(net)
    if plan.peak_result_entries * 8 > memory_cap_bytes:
        big = max(plan.steps, key=lambda s: s.result_entries)
        raise MemoryBudgetError(
            f"planned intermediate of {big.result_entries} entries "
            f"({big.result_entries * 8} bytes) exceeds the {memory_cap_bytes}-byte cap",
            shape=(big.result_entries,),
        )

    tensors = {n: net.nodes[n] for n in net.nodes}
    axes: dict[int, list[int]] = {}
    for n in net.nodes:
        axes[n] = [-1] * net.nodes[n].ndim
    for eid, edge in net.edges.items():
        for nd, ax in edge.endpoints:
            axes[nd][ax] = eid

    for step in plan.steps:
        if step.kind == "trace":
            (n,) = step.nodes
            eid_counts: dict[int, int] = {}
            for e in axes[n]:
                eid_counts[e] = eid_counts.get(e, 0) + 1
            eid = min(e for e, c in eid_counts.items() if c == 2)
            positions = [i for i, e in enumerate(axes[n]) if e == eid]
            tensors[n] = np.trace(tensors[n], axis1=positions[0], axis2=positions[1])
            axes[n] = [e for i, e in enumerate(axes[n]) if i not in positions]
        else:
            a, b = step.nodes
            shared = sorted(set(axes[a]) & set(axes[b]))
            ax_a = [axes[a].index(e) for e in shared]
            ax_b = [axes[b].index(e) for e in shared]
            if shared:
                res = np.tensordot(tensors[a], tensors[b], axes=(ax_a, ax_b))
            else:
                res = np.multiply.outer(tensors[a], tensors[b])
            new_axes = [e for e in axes[a] if e not in shared] + [e for e in axes[b] if e not in shared]
            tensors[step.result] = res
            axes[step.result] = new_axes
            other = b if step.result == a else a
            del tensors[other]
            del axes[other]

    (last,) = tensors
    result = tensors[last]
    open_ids = axes[last]
    if open_ids:
        order = np.argsort(open_ids, kind="stable")
        result = result.transpose(tuple(int(i) for i in order))
    return result
