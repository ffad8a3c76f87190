"""Benchmark network generators: classical Ising encodings in 2D/3D, the
square-lattice AKLT double-layer norm, biased random tensors, exact
coarse-grain blocking, and finite patches cut from uniform infinite lattices
by capping boundary indices with self-consistent messages.

Grid conventions
----------------
Positions are tuples (row, col) or (i, j, k); grid axis g advances the g-th
coordinate. A uniform *unit* tensor carries one axis pair per grid axis in
the order ``[(0,-), (0,+), (1,-), (1,+), ...]``, where ``(g,+)`` faces the
neighbor at larger coordinate. Bond edges are directed from the smaller
coordinate (tail) to the larger (head).
"""

from __future__ import annotations

import functools
import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from pne.network import Edge, NetworkError, TensorNetwork, contract, validate
from pne.tensor import asarray

__all__ = [
    "BETA_C_2D",
    "BETA_C_3D",
    "ModelSpec",
    "GridNetwork",
    "ising_unit_tensor",
    "ising_open_patch",
    "aklt_peps_tensor",
    "aklt_norm_tensor",
    "random_tensor",
    "random_grid",
    "UniformBP",
    "uniform_fixed_point",
    "symmetrize_uniform",
    "BlockedUnit",
    "block_unit",
    "capped_patch",
    "block",
    "finite_patch",
    "brute_force_ising",
    "ising_free_energy_2d",
]

BETA_C_2D = math.log(1.0 + math.sqrt(2.0)) / 2.0      # ~ 0.440687
BETA_C_3D = 0.2216546                                  # simple cubic lattice


class ModelError(NetworkError):
    pass


# ---------------------------------------------------------------------------
# Grid assembly
# ---------------------------------------------------------------------------

Pos = tuple[int, ...]
AxisDir = tuple[int, int]      # (grid axis, side): side 0 faces -g, 1 faces +g


@dataclass
class GridNetwork:
    """A lattice-shaped tensor network with position/edge lookup tables."""

    net: TensorNetwork
    shape: tuple[int, ...]
    node_of: dict[Pos, int]
    bond: dict[tuple[int, Pos], int]          # (axis, tail position) -> edge id
    open_leg: dict[tuple[Pos, AxisDir], int]  # (position, (axis, side)) -> edge id

    @property
    def ndim(self) -> int:
        return len(self.shape)

    def v_edge(self, r: int, c: int) -> int:
        """2D: bond between (r, c) and (r+1, c)."""
        return self.bond[(0, (r, c))]

    def h_edge(self, r: int, c: int) -> int:
        """2D: bond between (r, c) and (r, c+1)."""
        return self.bond[(1, (r, c))]

    def axis_bonds(self, g: int) -> list[int]:
        return [eid for (ax, _), eid in sorted(self.bond.items()) if ax == g]

    def contract(self, **kwargs) -> np.ndarray:
        return contract(self.net, **kwargs)


def _positions(shape: tuple[int, ...]) -> list[Pos]:
    return [tuple(p) for p in itertools.product(*(range(n) for n in shape))]


def _assemble_grid(
    shape: tuple[int, ...],
    node_axes: dict[Pos, list[tuple[str, int, int]]],
    tensors: dict[Pos, np.ndarray],
) -> GridNetwork:
    """Wire per-position tensors into a grid network.

    ``node_axes[pos]`` lists descriptors aligned with the tensor axes, each
    ``("bond", g, side)`` or ``("open", g, side)``. Bond edge ids come first
    (ordered by axis then tail position), then open legs (by position).
    """
    positions = _positions(shape)
    node_of = {pos: i for i, pos in enumerate(p for p in positions if p in tensors)}
    bond: dict[tuple[int, Pos], int] = {}
    eid = 0
    ndim = len(shape)
    for g in range(ndim):
        for pos in positions:
            if pos not in tensors:
                continue
            nxt = tuple(p + (1 if a == g else 0) for a, p in enumerate(pos))
            if ("bond", g, 1) in node_axes[pos]:
                if nxt not in tensors or ("bond", g, 0) not in node_axes[nxt]:
                    raise ModelError(f"bond ({g}, {pos}) has no matching endpoint")
                bond[(g, pos)] = eid
                eid += 1
    open_leg: dict[tuple[Pos, AxisDir], int] = {}
    for pos in positions:
        if pos not in tensors:
            continue
        for kind, g, s in node_axes[pos]:
            if kind == "open":
                open_leg[(pos, (g, s))] = eid
                eid += 1
    slotted: dict[int, list[tuple[int, int, int]]] = {e: [] for e in range(eid)}
    for pos in positions:
        if pos not in tensors:
            continue
        nid = node_of[pos]
        for ax, (kind, g, s) in enumerate(node_axes[pos]):
            if kind == "open":
                slotted[open_leg[(pos, (g, s))]].append((0, nid, ax))
            else:
                # The tail of a bond sits at the smaller coordinate (s == 1 side).
                key = (g, pos) if s == 1 else (
                    g, tuple(p - (1 if a == g else 0) for a, p in enumerate(pos))
                )
                slotted[bond[key]].append((0 if s == 1 else 1, nid, ax))
    final = {e: tuple((n, ax) for _, n, ax in sorted(eps)) for e, eps in slotted.items()}
    net = TensorNetwork.build({node_of[p]: tensors[p] for p in node_of}, final)
    return GridNetwork(net=net, shape=tuple(shape), node_of=node_of, bond=bond, open_leg=open_leg)


# ---------------------------------------------------------------------------
# Unit tensors
# ---------------------------------------------------------------------------

def _ising_leg_factor(beta: float) -> np.ndarray:
    """Symmetric square root of the bond Boltzmann matrix exp(beta * s s')."""
    if beta < 0:
        raise ModelError("the symmetric bond split needs beta >= 0")
    u = np.array([[1.0, 1.0], [1.0, -1.0]]) / math.sqrt(2.0)
    lam = np.array([2.0 * math.cosh(beta), 2.0 * math.sinh(beta)])
    return (u * np.sqrt(lam)[None, :]) @ u.T


def _spin_vertex(beta: float, nlegs: int) -> np.ndarray:
    """Vertex tensor summing one spin against ``nlegs`` bond half-factors."""
    x = _ising_leg_factor(beta)
    out = np.zeros((2,) * nlegs)
    for s in range(2):
        term = np.array(1.0)
        for _ in range(nlegs):
            term = np.multiply.outer(term, x[s])
        out += term
    return out


def ising_unit_tensor(dimension: int, beta: float) -> np.ndarray:
    """Bulk vertex tensor of the square (4 legs) or cubic (6 legs) lattice
    partition-function network at inverse temperature beta, extent 2 per leg."""
    if dimension not in (2, 3):
        raise ModelError("dimension must be 2 or 3")
    return _spin_vertex(beta, 2 * dimension)


def ising_open_patch(dimension: int, beta: float, shape: tuple[int, ...]) -> GridNetwork:
    """Open-boundary Ising patch: boundary vertices simply lack outward legs,
    so the closed network contracts exactly to the finite-lattice partition
    function."""
    if len(shape) != dimension:
        raise ModelError(f"shape {shape} does not match dimension {dimension}")
    node_axes: dict[Pos, list] = {}
    tensors: dict[Pos, np.ndarray] = {}
    for pos in _positions(tuple(shape)):
        axes = []
        for g in range(dimension):
            for s in (0, 1):
                coord = pos[g] + (1 if s == 1 else -1)
                if 0 <= coord < shape[g]:
                    axes.append(("bond", g, s))
        node_axes[pos] = axes
        tensors[pos] = _spin_vertex(beta, len(axes))
    return _assemble_grid(tuple(shape), node_axes, tensors)


def aklt_peps_tensor() -> np.ndarray:
    """Spin-2 square-lattice valence-bond tensor, axes (phys, u, d, l, r).

    Four virtual spin-1/2 legs are symmetrized onto the five-dimensional
    physical space; the singlet matrix sits on the two positive-direction
    legs so every lattice bond carries exactly one."""
    sym = np.zeros((5, 2, 2, 2, 2))
    for p in range(5):          # p = number of down spins
        norm = 1.0 / math.sqrt(math.comb(4, p))
        for virt in itertools.product((0, 1), repeat=4):
            if sum(virt) == p:
                sym[(p, *virt)] = norm
    singlet = np.array([[0.0, 1.0], [-1.0, 0.0]])
    a = np.einsum("pudlr,dD,rR->puDlR", sym, singlet, singlet)
    return a


def aklt_norm_tensor() -> np.ndarray:
    """Double-layer AKLT tensor: bra and ket contracted over the physical
    index, virtual pairs fused to extent 4, axes (u, d, l, r)."""
    a = aklt_peps_tensor()
    e = np.einsum("pudlr,pUDLR->uUdDlLrR", a, a)
    return e.reshape(4, 4, 4, 4)


def random_tensor(extents, bias: float, seed=0) -> np.ndarray:
    """Entries i.i.d. uniform on [-1 + bias, 1 + bias]."""
    if not 0.0 <= bias <= 1.0:
        raise ModelError("bias must lie in [0, 1]")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return rng.uniform(-1.0 + bias, 1.0 + bias, size=tuple(extents))


def random_grid(
    shape: tuple[int, ...],
    chi: int,
    bias: float = 0.2,
    seed=0,
    open_axes: frozenset[tuple[Pos, AxisDir]] = frozenset(),
) -> GridNetwork:
    """Grid of independent random tensors with extent ``chi`` on every leg.

    ``open_axes`` lists boundary directions to keep as open legs (they must
    point outside the grid)."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    ndim = len(shape)
    node_axes: dict[Pos, list] = {}
    tensors: dict[Pos, np.ndarray] = {}
    for pos in _positions(tuple(shape)):
        axes = []
        for g in range(ndim):
            for s in (0, 1):
                coord = pos[g] + (1 if s == 1 else -1)
                if 0 <= coord < shape[g]:
                    axes.append(("bond", g, s))
                elif (pos, (g, s)) in open_axes:
                    axes.append(("open", g, s))
        node_axes[pos] = axes
        tensors[pos] = random_tensor((chi,) * len(axes), bias, rng)
    return _assemble_grid(tuple(shape), node_axes, tensors)


# ---------------------------------------------------------------------------
# Uniform (infinite-lattice) message passing
# ---------------------------------------------------------------------------

def _sign_fix(v: np.ndarray) -> np.ndarray:
    idx = np.flatnonzero(np.abs(v) > 1e-12)
    pivot = v[idx[0]] if idx.size else v[np.argmax(np.abs(v))]
    return -v if pivot < 0 else v


class _UnitOps:
    """Uniform-update dispatch for a dense unit tensor."""

    def __init__(self, unit: np.ndarray):
        self.unit = asarray(unit)
        if self.unit.ndim % 2:
            raise ModelError("a unit tensor needs one axis pair per grid axis")
        self.ndim = self.unit.ndim // 2

    def face_dim(self, g: int, s: int) -> int:
        return self.unit.shape[2 * g + s]

    def apply_caps(self, caps: dict[AxisDir, np.ndarray | None]) -> np.ndarray:
        t = self.unit
        for g in range(self.ndim - 1, -1, -1):
            for s in (1, 0):
                vec = caps.get((g, s))
                if vec is not None:
                    t = np.tensordot(t, vec, axes=([2 * g + s], [0]))
        return t


@dataclass
class UniformBP:
    """Self-consistent messages of a translation-invariant lattice.

    ``out_messages[(g, s)]`` is the unit-norm message a node emits from its
    (g, s) axis; the cap for a dangling (g, s) axis is the message arriving
    there, i.e. the one emitted from the opposite side of a neighbor."""

    out_messages: dict[AxisDir, np.ndarray]
    iterations: int
    residual: float
    converged: bool

    def cap(self, g: int, s: int) -> np.ndarray:
        return self.out_messages[(g, 1 - s)]

    def caps(self) -> dict[AxisDir, np.ndarray]:
        return {(g, s): self.cap(g, s) for (g, s) in self.out_messages}


def uniform_fixed_point(
    unit,
    tol: float = 1e-12,
    max_iter: int = 4000,
    damping: float = 0.2,
    seed: int = 0,
) -> UniformBP:
    """Damped synchronous iteration of the single-tensor self-consistency
    equations (all nodes share one message per axis direction)."""
    ops = unit if isinstance(unit, BlockedUnit) else _UnitOps(unit)
    rng = np.random.default_rng(seed)
    dirs = [(g, s) for g in range(ops.ndim) for s in (0, 1)]
    out: dict[AxisDir, np.ndarray] = {}
    for g, s in dirs:
        m = np.ones(ops.face_dim(g, s)) + 1e-3 * rng.standard_normal(ops.face_dim(g, s))
        out[(g, s)] = _sign_fix(m / np.linalg.norm(m))
    residual = np.inf
    it = 0
    for it in range(1, max_iter + 1):
        new = {}
        for g, s in dirs:
            caps = {(h, t): out[(h, 1 - t)] for h, t in dirs if (h, t) != (g, s)}
            caps[(g, s)] = None
            vec = np.asarray(ops.apply_caps(caps)).reshape(-1)
            nrm = np.linalg.norm(vec)
            if nrm == 0.0:
                raise ModelError(f"zero uniform message along axis {(g, s)}")
            m = vec / nrm
            if damping:
                m = (1.0 - damping) * m + damping * out[(g, s)]
                m /= np.linalg.norm(m)
            new[(g, s)] = _sign_fix(m)
        residual = max(float(np.linalg.norm(new[d] - out[d])) for d in dirs)
        out = new
        if residual < tol:
            return UniformBP(out_messages=out, iterations=it, residual=residual, converged=True)
    return UniformBP(out_messages=out, iterations=it, residual=residual, converged=False)


def symmetrize_uniform(unit: np.ndarray, ubp: UniformBP) -> tuple[np.ndarray, dict[int, np.ndarray]]:
    """Gauge a uniform unit tensor so every directed message becomes e0.

    Returns the re-gauged unit and the per-axis gauge matrices. On each axis
    the tail side absorbs the inverse and the head side the gauge, so any
    network tiled from the unit keeps its contraction value."""
    from pne.tensor import orthogonal_complement

    unit = asarray(unit)
    ndim = unit.ndim // 2
    gauges: dict[int, np.ndarray] = {}
    out = unit
    for g in range(ndim):
        fwd = ubp.out_messages[(g, 1)]     # tail -> head (+g direction)
        rev = ubp.out_messages[(g, 0)]     # head -> tail
        c = float(fwd @ rev)
        if abs(c) < 1e-12:
            raise ModelError(f"uniform message overlap {c:.2e} on axis {g} is too small")
        srt = math.sqrt(abs(c))
        x = np.vstack([(fwd * (np.sign(c) / srt))[None, :], orthogonal_complement(rev / srt)])
        x_inv = np.linalg.solve(x, np.eye(x.shape[0]))
        out = np.moveaxis(np.tensordot(out, x_inv, axes=([2 * g + 1], [0])), -1, 2 * g + 1)
        out = np.moveaxis(np.tensordot(out, x, axes=([2 * g], [1])), -1, 2 * g)
        gauges[g] = x
    return out, gauges


# ---------------------------------------------------------------------------
# Blocking
# ---------------------------------------------------------------------------

class BlockedUnit:
    """Coarse-grained uniform tensor, kept as a contraction recipe.

    The blocked tensor is the exact contraction of a cluster of unit copies
    with the boundary sub-axes of each face fused (transverse positions in
    lexicographic order). Faces can be capped or left open without ever
    materializing the full tensor, which keeps 3D blocks affordable."""

    def __init__(self, unit: np.ndarray, factors: tuple[int, ...]):
        self.unit = asarray(unit)
        self.factors = tuple(int(f) for f in factors)
        if self.unit.ndim != 2 * len(self.factors):
            raise ModelError("blocking factors must give one entry per grid axis")
        self.ndim = len(self.factors)
        self._materialized: np.ndarray | None = None
        self._plan_cache: dict = {}

    def face_cells(self, g: int, s: int) -> list[Pos]:
        edge_coord = self.factors[g] - 1 if s == 1 else 0
        return [p for p in _positions(self.factors) if p[g] == edge_coord]

    def face_dim(self, g: int, s: int) -> int:
        return self.unit.shape[2 * g + s] ** len(self.face_cells(g, s))

    def apply_caps(self, caps: dict[AxisDir, np.ndarray | None]) -> np.ndarray:
        """Contract the cluster with fused cap vectors on the given faces.

        Faces mapped to None (or omitted) stay open; the result carries one
        fused axis per open face in canonical ``(g, s)`` order."""
        if self._materialized is not None:
            return _UnitOps(self._materialized).apply_caps(caps)
        cells = _positions(self.factors)
        node_of = {p: i for i, p in enumerate(cells)}
        tensors = {node_of[p]: self.unit for p in cells}
        attachments: dict[int, list[tuple[int, int]]] = {}
        eid = 0
        for g in range(self.ndim):
            for pos in cells:
                nxt = tuple(p + (1 if a == g else 0) for a, p in enumerate(pos))
                if nxt in node_of:
                    attachments[eid] = [(node_of[pos], 2 * g + 1), (node_of[nxt], 2 * g)]
                    eid += 1
        open_faces: list[AxisDir] = []
        n_extra = len(tensors)
        for g in range(self.ndim):
            for s in (0, 1):
                face = self.face_cells(g, s)
                vec = caps.get((g, s))
                if vec is not None:
                    v = np.asarray(vec).reshape((self.unit.shape[2 * g + s],) * len(face))
                    tensors[n_extra] = v
                    for k, cell in enumerate(face):
                        attachments[eid] = [(node_of[cell], 2 * g + s), (n_extra, k)]
                        eid += 1
                    n_extra += 1
                else:
                    open_faces.append((g, s))
                    for cell in face:
                        attachments[eid] = [(node_of[cell], 2 * g + s)]
                        eid += 1
        net = TensorNetwork.build(tensors, {e: tuple(a) for e, a in attachments.items()})
        # The network topology only depends on which faces are capped, so the
        # contraction plan can be reused across message-passing sweeps.
        sig = tuple(sorted((g, s) for (g, s), v in caps.items() if v is not None))
        plan = self._plan_cache.get(sig)
        if plan is None:
            from pne.network import plan_order

            plan = plan_order(net)
            self._plan_cache[sig] = plan
        res = contract(net, plan=plan)
        # Open sub-axes arrive grouped per face in (g, s) order; fuse each group.
        shape = []
        for g, s in open_faces:
            shape.append(self.unit.shape[2 * g + s] ** len(self.face_cells(g, s)))
        return res.reshape(tuple(shape))

    def materialize(self) -> np.ndarray:
        if self._materialized is None:
            self._materialized = self.apply_caps({})
        return self._materialized

    def maybe_materialize(self, max_entries: int = 2**21) -> "np.ndarray | BlockedUnit":
        total = 1
        for g in range(self.ndim):
            total *= self.face_dim(g, 0) * self.face_dim(g, 1)
        if total <= max_entries:
            return self.materialize()
        return self


def block_unit(unit: np.ndarray, factors: tuple[int, ...]) -> BlockedUnit:
    """Exact coarse-graining of a uniform unit tensor."""
    return BlockedUnit(unit, factors)


def block(grid: GridNetwork, factors: tuple[int, ...]) -> GridNetwork:
    """Exactly coarse-grain a finite lattice network by contracting blocks of
    ``factors`` nodes into single tensors with fused cross-block bonds."""
    if grid.open_leg:
        raise ModelError("blocking of grids with open legs is not supported")
    ndim = grid.ndim
    factors = tuple(int(f) for f in factors)
    if len(factors) != ndim:
        raise ModelError("one blocking factor per grid axis is required")
    if any(n % f for n, f in zip(grid.shape, factors)):
        raise ModelError(f"shape {grid.shape} is not divisible by factors {factors}")
    new_shape = tuple(n // f for n, f in zip(grid.shape, factors))
    node_axes: dict[Pos, list] = {}
    tensors: dict[Pos, np.ndarray] = {}
    for bpos in _positions(new_shape):
        cells = [
            tuple(bpos[a] * factors[a] + off[a] for a in range(ndim))
            for off in _positions(factors)
        ]
        cellset = set(cells)
        sub_tensors = {}
        sub_attach: dict[int, list[tuple[int, int]]] = {}
        local_id = {p: i for i, p in enumerate(cells)}
        for p in cells:
            sub_tensors[local_id[p]] = grid.net.nodes[grid.node_of[p]]
        # Internal bonds first, then boundary stubs face by face.
        eid = 0
        axis_of = {}
        for p in cells:
            nid = grid.node_of[p]
            axes = grid.net.node_axes(nid)
            axis_of[p] = axes
        for g in range(ndim):
            for p in cells:
                nxt = tuple(q + (1 if a == g else 0) for a, q in enumerate(p))
                if nxt in cellset and (g, p) in grid.bond:
                    orig = grid.bond[(g, p)]
                    tail_ax = [ax for ax, e in enumerate(axis_of[p]) if e == orig][0]
                    head_ax = [ax for ax, e in enumerate(axis_of[nxt]) if e == orig][0]
                    sub_attach[eid] = [(local_id[p], tail_ax), (local_id[nxt], head_ax)]
                    eid += 1
        faces = []
        for g in range(ndim):
            for s in (0, 1):
                stubs = []
                for p in sorted(cellset):
                    q = tuple(c + (1 if (a == g and s == 1) else -1 if (a == g and s == 0) else 0)
                              for a, c in enumerate(p))
                    if q in cellset:
                        continue
                    key = (g, p) if s == 1 else (g, q)
                    if key in grid.bond:
                        orig = grid.bond[key]
                        ax = [a for a, e in enumerate(axis_of[p]) if e == orig][0]
                        stubs.append((p, ax, orig))
                if stubs:
                    faces.append(((g, s), stubs))
        face_dims = []
        for (g, s), stubs in faces:
            dims = []
            for p, ax, orig in stubs:
                sub_attach[eid] = [(local_id[p], ax)]
                dims.append(grid.net.edges[orig].dim)
                eid += 1
            face_dims.append(((g, s), int(np.prod(dims))))
        sub_net = TensorNetwork.build(sub_tensors, {e: tuple(a) for e, a in sub_attach.items()})
        blocked = contract(sub_net)
        blocked = blocked.reshape(tuple(d for _, d in face_dims))
        node_axes[bpos] = [("bond", g, s) for (g, s), _ in face_dims]
        tensors[bpos] = blocked
    return _assemble_grid(new_shape, node_axes, tensors)


# ---------------------------------------------------------------------------
# Patches
# ---------------------------------------------------------------------------

def capped_patch(
    unit,
    shape: tuple[int, ...],
    caps: dict[AxisDir, np.ndarray],
    open_axes: frozenset[tuple[Pos, AxisDir]] = frozenset(),
) -> GridNetwork:
    """Finite patch of a uniform lattice with boundary indices capped.

    ``unit`` is a dense unit tensor or a :class:`BlockedUnit`; ``caps`` maps
    each outward direction to the vector absorbed there (typically the
    self-consistent incoming messages). Directions listed in ``open_axes``
    are left as open legs instead."""
    ops = unit if isinstance(unit, BlockedUnit) else _UnitOps(unit)
    ndim = ops.ndim
    if len(shape) != ndim:
        raise ModelError(f"patch shape {shape} does not match the unit rank")
    node_axes: dict[Pos, list] = {}
    tensors: dict[Pos, np.ndarray] = {}
    for pos in _positions(tuple(shape)):
        axes = []
        cap_pattern: dict[AxisDir, np.ndarray | None] = {}
        for g in range(ndim):
            for s in (0, 1):
                coord = pos[g] + (1 if s == 1 else -1)
                if 0 <= coord < shape[g]:
                    axes.append(("bond", g, s))
                    cap_pattern[(g, s)] = None
                elif (pos, (g, s)) in open_axes:
                    axes.append(("open", g, s))
                    cap_pattern[(g, s)] = None
                else:
                    cap_pattern[(g, s)] = caps[(g, s)]
        node_axes[pos] = axes
        t = ops.apply_caps(cap_pattern)
        tensors[pos] = np.asarray(t)
    return _assemble_grid(tuple(shape), node_axes, tensors)


@dataclass
class ModelSpec:
    """Parameters selecting one benchmark network."""

    kind: str                                   # ising2d | ising3d | aklt | random
    beta: float | None = None
    bias: float = 0.2
    seed: int = 0
    block_factors: tuple[int, ...] | None = None
    patch: tuple[int, ...] = ()
    boundary: str = "bp"                        # bp | open
    chi: int = 4
    open_axes: frozenset[tuple[Pos, AxisDir]] = frozenset()


def finite_patch(spec: ModelSpec) -> GridNetwork:
    """Build the benchmark network described by ``spec``.

    For uniform models with ``boundary="bp"`` the unit (after optional
    blocking) is capped with its self-consistent messages, so the interior
    fixed point of the patch is homogeneous by construction. With
    ``boundary="open"`` the finite-lattice model is built directly (then
    blocked), which only the Ising and AKLT generators support."""
    if spec.kind == "random":
        return random_grid(spec.patch, spec.chi, spec.bias, spec.seed, spec.open_axes)
    if spec.kind in ("ising2d", "ising3d"):
        dimension = 2 if spec.kind == "ising2d" else 3
        if spec.beta is None:
            raise ModelError("Ising models need beta")
        if spec.boundary == "open":
            factors = spec.block_factors or (1,) * dimension
            spins = tuple(p * f for p, f in zip(spec.patch, factors))
            patch = ising_open_patch(dimension, spec.beta, spins)
            if any(f != 1 for f in factors):
                patch = block(patch, factors)
            return patch
        unit = ising_unit_tensor(dimension, spec.beta)
    elif spec.kind == "aklt":
        unit = aklt_norm_tensor()
        if spec.boundary == "open":
            factors = spec.block_factors or (1, 1)
            cells = tuple(p * f for p, f in zip(spec.patch, factors))
            ident = np.eye(2).reshape(-1)
            caps = {(g, s): ident for g in range(2) for s in (0, 1)}
            patch = capped_patch(unit, cells, caps)
            if any(f != 1 for f in factors):
                patch = block(patch, factors)
            return patch
    else:
        raise ModelError(f"unknown model kind {spec.kind!r}")
    work = unit
    if spec.block_factors and any(f != 1 for f in spec.block_factors):
        work = block_unit(unit, spec.block_factors).maybe_materialize()
    ubp = uniform_fixed_point(work)
    if not ubp.converged:
        raise ModelError(
            "uniform message passing did not converge; try boundary='open' instead"
        )
    return capped_patch(work, spec.patch, ubp.caps(), spec.open_axes)


# ---------------------------------------------------------------------------
# Oracles
# ---------------------------------------------------------------------------

def brute_force_ising(dimension: int, beta: float, shape: tuple[int, ...]) -> float:
    """Exhaustive partition sum of the open-boundary Ising patch (<= 20 spins)."""
    n = int(np.prod(shape))
    if n > 20:
        raise ModelError(f"{n} spins is beyond the exhaustive oracle")
    positions = _positions(tuple(shape))
    index = {p: i for i, p in enumerate(positions)}
    bonds = []
    for p in positions:
        for g in range(dimension):
            q = tuple(c + (1 if a == g else 0) for a, c in enumerate(p))
            if q in index:
                bonds.append((index[p], index[q]))
    states = ((np.arange(2**n)[:, None] >> np.arange(n)[None, :]) & 1) * 2 - 1
    energy = np.zeros(2**n)
    for i, j in bonds:
        energy += states[:, i] * states[:, j]
    return float(np.sum(np.exp(beta * energy)))


@functools.lru_cache(maxsize=None)
def ising_free_energy_2d(beta: float) -> float:
    """Onsager free energy density of the infinite square-lattice Ising
    model, in the dimensionless convention f = -lim log(Z_N)/N."""
    c2 = math.cosh(2.0 * beta) ** 2
    s = math.sinh(2.0 * beta)

    def integrand(t1: float, t2: float) -> float:
        return math.log(c2 - s * (math.cos(t1) + math.cos(t2)))

    val, _ = integrate.dblquad(integrand, 0.0, math.pi, 0.0, math.pi, epsabs=1e-12, epsrel=1e-12)
    return -math.log(2.0) - val / (2.0 * math.pi**2)
