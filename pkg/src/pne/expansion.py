"""Partitioned expansions of network contractions.

A *partition* selects a set of edges and a projector on their joint index
space; its complement is never materialized at full extent. The linear form
telescopes the contraction into M terms (prefix of complements, then the
projector); the combinatorial form is an inclusion-exclusion over the
2^M - 1 non-empty activation patterns. Both are exact identities once the
all-complement *residue* is added back, for any network and any idempotent
projectors.
"""

from __future__ import annotations

import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from pne.network import (
    ContractionPlan,
    DenseOp,
    EdgeInsertion,
    NetworkError,
    ProjectorP,
    TensorNetwork,
    apply_insertions,
    contract,
    insert_joint_dense,
    insert_joint_isometry,
    insert_joint_ketbra,
    plan_order,
)
from pne.tensor import asarray

__all__ = [
    "ExpansionError",
    "Factorized",
    "JointIsometry",
    "JointKetBra",
    "Partition",
    "ExpansionTerm",
    "Expansion",
    "build_linear",
    "build_combinatorial",
    "evaluate",
    "EvalResult",
    "evaluate_residue",
    "residue_pattern_sum",
    "residue_degrees",
    "recursive_expand",
]

COMBINATORIAL_CAP = 12


class ExpansionError(NetworkError):
    pass


@dataclass(frozen=True)
class Factorized:
    """One isometric factor per partition edge; the joint projector is the
    tensor product of the per-edge rank-r_k projectors."""

    factors: tuple[np.ndarray, ...]


@dataclass(frozen=True)
class JointIsometry:
    """A single isometry over the merged edge space (orthogonal projector of
    rank r that need not factorize over the edges)."""

    isometry: np.ndarray


@dataclass(frozen=True)
class JointKetBra:
    """Oblique rank-1 projector ``|ket><bra| / <bra|ket>`` over the merged
    edge space, e.g. from two-site fixed-point messages whose symmetrizing
    gauge cannot be absorbed into separate endpoint tensors."""

    ket: np.ndarray
    bra: np.ndarray


Projector = Factorized | JointIsometry | JointKetBra


@dataclass(frozen=True)
class Partition:
    id: int
    edges: tuple[int, ...]
    projector: Projector

    def __post_init__(self):
        if isinstance(self.projector, Factorized) and len(self.projector.factors) != len(self.edges):
            raise ExpansionError(
                f"partition {self.id}: {len(self.projector.factors)} factors for {len(self.edges)} edges"
            )

    @property
    def is_single_edge(self) -> bool:
        return len(self.edges) == 1

    def rank(self) -> int:
        if isinstance(self.projector, Factorized):
            return int(np.prod([f.shape[1] for f in self.projector.factors]))
        if isinstance(self.projector, JointIsometry):
            return self.projector.isometry.shape[1]
        return 1

    def dense_matrix(self) -> np.ndarray:
        """The projector as a dense matrix on the merged edge space."""
        if isinstance(self.projector, Factorized):
            mat = np.array([[1.0]])
            for f in self.projector.factors:
                f = asarray(f)
                mat = np.kron(mat, f @ f.T)
            return mat
        if isinstance(self.projector, JointIsometry):
            w = asarray(self.projector.isometry)
            return w @ w.T
        ket = asarray(self.projector.ket).reshape(-1)
        bra = asarray(self.projector.bra).reshape(-1)
        ov = float(bra @ ket)
        if abs(ov) < 1e-14:
            raise ExpansionError(f"partition {self.id}: ket/bra overlap {ov:.2e} is numerically singular")
        return np.outer(ket, bra) / ov


def _insert_joint_p(net: TensorNetwork, part: Partition) -> TensorNetwork:
    if isinstance(part.projector, JointIsometry):
        return insert_joint_isometry(net, part.edges, part.projector.isometry)
    ket = asarray(part.projector.ket).reshape(-1)
    bra = asarray(part.projector.bra).reshape(-1)
    ov = float(bra @ ket)
    if abs(ov) < 1e-14:
        raise ExpansionError(f"partition {part.id}: ket/bra overlap {ov:.2e} is numerically singular")
    return insert_joint_ketbra(net, part.edges, ket, bra, scale=1.0 / ov)


def _apply_active(net: TensorNetwork, partitions: Sequence[Partition], active) -> TensorNetwork:
    """Insert the projectors of the active partitions.

    Partitions may share edges when their per-edge factors coincide there;
    the shared factor is absorbed once (the operator product of identical
    idempotents). Joint projectors never share edges with anything.
    """
    factors: dict[int, np.ndarray] = {}
    joints: list[Partition] = []
    for k in active:
        part = partitions[k]
        if isinstance(part.projector, Factorized):
            for e, f in zip(part.edges, part.projector.factors):
                if e not in factors:
                    factors[e] = asarray(f)
        else:
            joints.append(part)
    work = net
    if factors:
        work = apply_insertions(
            work, [EdgeInsertion(e, ProjectorP(f)) for e, f in sorted(factors.items())]
        )
    for part in joints:
        work = _insert_joint_p(work, part)
    return work


def _insert_all_q(net: TensorNetwork, partitions: Sequence[Partition]) -> TensorNetwork:
    """Insert the complement of every partition at full extent (verification
    only). Complements of overlapping partitions compose as operators on the
    shared edges, tail to head in partition order."""
    remap = {e: e for e in net.edges}
    work = net
    for part in partitions:
        if part.is_single_edge and isinstance(part.projector, Factorized):
            f = asarray(part.projector.factors[0])
            q = np.eye(f.shape[0]) - f @ f.T
            eid = remap[part.edges[0]]
            work = apply_insertions(work, [EdgeInsertion(eid, DenseOp(q, side=0))])
        else:
            p = part.dense_matrix()
            eids = [remap[e] for e in part.edges]
            work, continuation = insert_joint_dense(work, eids, np.eye(p.shape[0]) - p)
            for orig, cur in zip(part.edges, eids):
                remap[orig] = continuation[cur]
    return work


@dataclass(frozen=True)
class ExpansionTerm:
    pattern: tuple[str, ...]       # one of "I", "P", "Q" per partition
    coefficient: int
    network: TensorNetwork
    plan: ContractionPlan


@dataclass(frozen=True)
class ResidueSpec:
    """One all-complement network to add back for exact verification."""

    coefficient: float
    network: TensorNetwork
    partitions: tuple[Partition, ...]


@dataclass
class Expansion:
    form: str                      # "linear" | "combinatorial" | "recursive"
    net: TensorNetwork
    partitions: tuple[Partition, ...]
    terms: list[ExpansionTerm]
    residues: list[ResidueSpec] = field(default_factory=list)

    @property
    def term_count(self) -> int:
        return len(self.terms)

    def peak_cost_exponent(self, chi: float) -> float:
        return max(t.plan.cost_exponent(chi) for t in self.terms)


def _check_partitions(net: TensorNetwork, partitions: Sequence[Partition]) -> None:
    seen: dict[int, np.ndarray ] = {}
    joint_edges: set[int] = set()
    for part in partitions:
        factorized = isinstance(part.projector, Factorized)
        for idx, e in enumerate(part.edges):
            if e not in net.edges:
                raise ExpansionError(f"partition {part.id} references unknown edge {e}")
            if net.edges[e].is_open:
                raise ExpansionError(f"partition {part.id} references open edge {e}")
            if e in joint_edges or (e in seen and not factorized):
                raise ExpansionError(f"edge {e} is shared with a joint partition")
            if factorized:
                f = asarray(part.projector.factors[idx])
                if e in seen:
                    if seen[e].shape != f.shape or not np.allclose(seen[e], f, atol=1e-12):
                        raise ExpansionError(
                            f"edge {e} is shared between partitions with different factors; "
                            "shared edges must carry identical projectors"
                        )
                else:
                    seen[e] = f
            else:
                joint_edges.add(e)


def build_linear(net: TensorNetwork, partitions: Sequence[Partition]) -> Expansion:
    """Linear-form expansion: term r carries complements on the first r
    partitions and the projector on partition r.

    Restricted to single-edge partitions: a multi-edge complement does not
    factorize and would raise the contraction cost, so multi-edge partition
    sets must use :func:`build_combinatorial`.
    """
    partitions = tuple(partitions)
    _check_partitions(net, partitions)
    edges_seen = set()
    for part in partitions:
        if not (part.is_single_edge and isinstance(part.projector, Factorized)):
            raise ExpansionError(
                f"partition {part.id} spans {len(part.edges)} edges; the linear form "
                "only supports single-edge partitions -- use build_combinatorial"
            )
        if part.edges[0] in edges_seen:
            raise ExpansionError(f"edge {part.edges[0]} appears in more than one linear partition")
        edges_seen.add(part.edges[0])
    terms = []
    m = len(partitions)
    for r in range(m):
        work = net
        pattern = []
        for k, part in enumerate(partitions):
            if k < r:
                work = _insert_all_q(work, [part])
                pattern.append("Q")
            elif k == r:
                work = _apply_active(work, partitions, [k])
                pattern.append("P")
            else:
                pattern.append("I")
        terms.append(
            ExpansionTerm(pattern=tuple(pattern), coefficient=1, network=work, plan=plan_order(work))
        )
    residue = ResidueSpec(coefficient=1.0, network=net, partitions=partitions)
    return Expansion(form="linear", net=net, partitions=partitions, terms=terms, residues=[residue])


def build_combinatorial(
    net: TensorNetwork,
    partitions: Sequence[Partition],
    cap: int = COMBINATORIAL_CAP,
) -> Expansion:
    """Inclusion-exclusion expansion over all non-empty activation patterns.

    Patterns with an odd number of active projectors enter with +1, even
    patterns with -1; 2^M - 1 terms in total.
    """
    partitions = tuple(partitions)
    _check_partitions(net, partitions)
    m = len(partitions)
    if m > cap:
        raise ExpansionError(
            f"{m} partitions would create {2 ** m - 1} terms (cap {cap}); "
            "use recursive_expand to keep the term count bounded"
        )
    terms = []
    indices = range(m)
    for size in range(1, m + 1):
        for active in itertools.combinations(indices, size):
            work = _apply_active(net, partitions, active)
            pattern = tuple("P" if k in active else "I" for k in indices)
            coeff = 1 if size % 2 == 1 else -1
            terms.append(
                ExpansionTerm(pattern=pattern, coefficient=coeff, network=work, plan=plan_order(work))
            )
    residue = ResidueSpec(coefficient=1.0, network=net, partitions=partitions)
    return Expansion(form="combinatorial", net=net, partitions=partitions, terms=terms, residues=[residue])


@dataclass(frozen=True)
class EvalResult:
    value: np.ndarray
    term_values: tuple[np.ndarray, ...]
    pruned: tuple[int, ...] = ()

    def scalar(self) -> float:
        return float(self.value)


def evaluate(
    exp: Expansion,
    workers: int = 1,
    prune_dangling: bool = False,
    memory_cap_bytes: int | None = None,
) -> EvalResult:
    """Evaluate the expansion: sum of coefficient * contraction over terms.

    The reduction always runs in term-index order, so the value is
    bit-reproducible for any worker count. With ``prune_dangling`` (valid
    only for symmetrized rank-1 message projectors on closed networks),
    terms whose uncapped edges cannot host a dangling-free excitation are
    not contracted: they all equal the message vacuum, which is computed
    once and accounted for combinatorially.
    """
    kwargs = {}
    if memory_cap_bytes is not None:
        kwargs["memory_cap_bytes"] = memory_cap_bytes

    pruned_idx: list[int] = []
    vacuum = None
    if prune_dangling:
        if exp.form != "combinatorial":
            raise ExpansionError("dangling-excitation pruning applies to the combinatorial form only")
        pruned_idx = _prunable_terms(exp)
        if pruned_idx:
            vacuum = _message_vacuum(exp.net, **kwargs)
    prune_set = set(pruned_idx)

    def term_value(i: int) -> np.ndarray:
        t = exp.terms[i]
        if i in prune_set:
            return vacuum
        try:
            return contract(t.network, plan=t.plan, **kwargs)
        except NetworkError as exc:
            raise ExpansionError(f"term {t.pattern} failed to contract: {exc}") from exc
    n = len(exp.terms)
    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            values = list(pool.map(term_value, range(n)))
    else:
        values = [term_value(i) for i in range(n)]
    total = None
    for t, v in zip(exp.terms, values):
        contrib = t.coefficient * v
        total = contrib if total is None else total + contrib
    return EvalResult(value=np.asarray(total), term_values=tuple(values), pruned=tuple(pruned_idx))


def _prunable_terms(exp: Expansion) -> list[int]:
    if not exp.net.is_closed:
        raise ExpansionError("dangling-excitation pruning is only valid for closed networks")
    for part in exp.partitions:
        if not isinstance(part.projector, Factorized):
            raise ExpansionError("pruning requires per-edge rank-1 message projectors")
        for f in part.projector.factors:
            f = asarray(f)
            e0 = np.zeros(f.shape[0])
            e0[0] = 1.0
            if f.shape[1] != 1 or not np.allclose(f[:, 0], e0, atol=1e-10):
                raise ExpansionError(
                    "pruning requires symmetrized fixed-point projectors (rank-1, e0 basis column)"
                )
    out = []
    for i, term in enumerate(exp.terms):
        capped: set[int] = set()
        for k, tag in enumerate(term.pattern):
            if tag != "I":
                capped.update(exp.partitions[k].edges)
        if not _has_loop_support(exp.net, capped):
            out.append(i)
    return out


def _has_loop_support(net: TensorNetwork, capped: set[int]) -> bool:
    """Whether the uncapped closed edges contain a subgraph of minimum degree 2.

    Equivalent to a non-empty 2-core; only such subgraphs can carry an
    excitation pattern with no dangling (degree-1) tensor.
    """
    degree: dict[int, int] = {}
    incident: dict[int, list[tuple[int, int]]] = {}
    live: set[int] = set()
    for eid, edge in net.edges.items():
        if edge.is_open or eid in capped:
            continue
        a = edge.endpoints[0][0]
        b = edge.endpoints[1][0]
        live.add(eid)
        for n, other in ((a, b), (b, a)):
            degree[n] = degree.get(n, 0) + 1
            incident.setdefault(n, []).append((eid, other))
    queue = [n for n, d in degree.items() if d <= 1]
    while queue:
        n = queue.pop()
        if degree.get(n, 0) > 1:
            continue
        for eid, other in incident.get(n, []):
            if eid in live:
                live.discard(eid)
                degree[n] -= 1
                degree[other] -= 1
                if degree[other] == 1:
                    queue.append(other)
    return bool(live)


def _message_vacuum(net: TensorNetwork, **kwargs) -> np.ndarray:
    """Contraction with the e0 rank-1 cap on every closed edge."""
    e0cols = {}
    ins = []
    for eid, edge in sorted(net.edges.items()):
        if edge.is_open:
            continue
        iso = e0cols.get(edge.dim)
        if iso is None:
            iso = np.zeros((edge.dim, 1))
            iso[0, 0] = 1.0
            e0cols[edge.dim] = iso
        ins.append(EdgeInsertion(eid, ProjectorP(iso)))
    return contract(apply_insertions(net, ins), **kwargs)


def evaluate_residue(
    exp: Expansion,
    cross_check: bool = True,
    rtol: float = 1e-10,
    memory_cap_bytes: int | None = None,
) -> np.ndarray:
    """Directly evaluate the all-complement residue network(s).

    The complements are inserted at full extent as dense operators, which is
    affordable only at verification scale. With ``cross_check`` the result
    is compared against ``contract(net) - evaluate(exp)``.
    """
    kwargs = {}
    if memory_cap_bytes is not None:
        kwargs["memory_cap_bytes"] = memory_cap_bytes
    total = None
    for spec in exp.residues:
        work = _insert_all_q(spec.network, spec.partitions)
        val = spec.coefficient * contract(work, **kwargs)
        total = val if total is None else total + val
    total = np.asarray(total)
    if cross_check:
        exact = contract(exp.net, **kwargs)
        approx = evaluate(exp, memory_cap_bytes=memory_cap_bytes).value
        ref = exact - approx
        scale = max(float(np.linalg.norm(exact.ravel())), 1e-300)
        err = float(np.linalg.norm((total - ref).ravel())) / scale
        if err > rtol:
            raise ExpansionError(
                f"residue disagrees with the subtraction form by a relative {err:.3e}"
            )
    return total


def residue_pattern_sum(
    net: TensorNetwork,
    partitions: Sequence[Partition],
    memory_cap_bytes: int | None = None,
) -> np.ndarray:
    """Residue of factorized partitions as the explicit sum over per-edge
    complement patterns (at least one complement within every partition).

    Exponential in the total edge count; verification oracle only.
    """
    kwargs = {}
    if memory_cap_bytes is not None:
        kwargs["memory_cap_bytes"] = memory_cap_bytes
    seen_edges = set()
    for part in partitions:
        if not isinstance(part.projector, Factorized):
            raise ExpansionError("pattern-sum residue needs factorized projectors")
        if seen_edges & set(part.edges):
            raise ExpansionError("pattern-sum residue needs edge-disjoint partitions")
        seen_edges.update(part.edges)
    choices = []
    for part in partitions:
        k = len(part.edges)
        pats = [p for p in itertools.product("PQ", repeat=k) if "Q" in p]
        choices.append(pats)
    total = None
    for combo in itertools.product(*choices):
        work = net
        for part, pat in zip(partitions, combo):
            for e, f, tag in zip(part.edges, part.projector.factors, pat):
                f = asarray(f)
                if tag == "P":
                    work = apply_insertions(work, [EdgeInsertion(e, ProjectorP(f))])
                else:
                    q = np.eye(f.shape[0]) - f @ f.T
                    work = apply_insertions(work, [EdgeInsertion(e, DenseOp(q))])
        val = contract(work, **kwargs)
        total = val if total is None else total + val
    return np.asarray(total)


def residue_degrees(
    exp: Expansion,
    max_degree: int = 10,
) -> list[int]:
    """Degrees (excited-edge counts) of the non-dangling residue
    configurations, up to ``max_degree``.

    Valid only for rank-1 fixed-point message projectors (symmetrized e0
    columns): only then do configurations with a dangling excitation vanish
    identically. Every configuration must excite at least one edge of every
    partition and give each tensor 0 or >= 2 excited edges.
    """
    for part in exp.partitions:
        if not isinstance(part.projector, Factorized):
            raise ExpansionError("residue degrees require rank-1 fixed-point message projectors")
        for f in part.projector.factors:
            f = asarray(f)
            e0 = np.zeros(f.shape[0])
            e0[0] = 1.0
            if f.shape[1] != 1 or not np.allclose(f[:, 0], e0, atol=1e-10):
                raise ExpansionError("residue degrees require rank-1 fixed-point message projectors")
    net = exp.net
    closed = sorted(e for e, edge in net.edges.items() if not edge.is_open)
    part_sets = [set(p.edges) for p in exp.partitions]
    endpoints = {e: (net.edges[e].endpoints[0][0], net.edges[e].endpoints[1][0]) for e in closed}
    degrees: list[int] = []
    for size in range(1, min(len(closed), max_degree) + 1):
        for combo in itertools.combinations(closed, size):
            excited = set(combo)
            if any(not (ps & excited) for ps in part_sets):
                continue
            count: dict[int, int] = {}
            for e in combo:
                a, b = endpoints[e]
                count[a] = count.get(a, 0) + 1
                count[b] = count.get(b, 0) + 1
            if any(c == 1 for c in count.values()):
                continue
            degrees.append(size)
    return sorted(degrees)


ProjectorSource = Callable[[TensorNetwork, int], "tuple[TensorNetwork, Sequence[Partition]] | None"]


def recursive_expand(
    net: TensorNetwork,
    partitions: Sequence[Partition],
    cost_cap_exponent: float,
    projector_source: ProjectorSource,
    chi: float | None = None,
    depth_cap: int = 4,
    form: str = "combinatorial",
) -> Expansion:
    """Expand, then re-expand every term whose planned cost exceeds the cap.

    ``projector_source(sub_network, depth)`` supplies finer partitions for an
    over-budget term; it may return the sub-network re-gauged (any rewriting
    that preserves the contracted value) together with partitions on it, or
    None when it cannot help. The flattened signed term list plus one residue
    per expansion event reproduces the exact contraction.
    """
    if chi is None:
        chi = max(e.dim for e in net.edges.values())
    builder = build_combinatorial if form == "combinatorial" else build_linear

    flat_terms: list[ExpansionTerm] = []
    residues: list[ResidueSpec] = []

    def expand(work: TensorNetwork, parts: Sequence[Partition], coeff: float, depth: int) -> None:
        exp = builder(work, parts)
        residues.append(ResidueSpec(coefficient=coeff, network=work, partitions=tuple(parts)))
        offenders = []
        for term in exp.terms:
            if term.plan.cost_exponent(chi) <= cost_cap_exponent + 1e-9:
                flat_terms.append(
                    ExpansionTerm(
                        pattern=term.pattern,
                        coefficient=int(coeff) * term.coefficient,
                        network=term.network,
                        plan=term.plan,
                    )
                )
                continue
            if depth + 1 > depth_cap:
                offenders.append(term.pattern)
                continue
            sourced = projector_source(term.network, depth + 1)
            if not sourced:
                offenders.append(term.pattern)
                continue
            sub_net, sub_parts = sourced
            expand(sub_net, sub_parts, coeff * term.coefficient, depth + 1)
        if offenders:
            raise ExpansionError(
                f"depth cap {depth_cap} reached with terms above cost exponent "
                f"{cost_cap_exponent}: {offenders}"
            )

    expand(net, tuple(partitions), 1.0, 0)
    result = Expansion(
        form="recursive",
        net=net,
        partitions=tuple(partitions),
        terms=flat_terms,
        residues=residues,
    )
    return result
