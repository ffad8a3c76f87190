"""Free-energy density of infinite translation-invariant square-lattice
networks via strip expansions.

The lattice is partitioned into width-L strips along one or both axes; the
inclusion-exclusion over strip-set activations reduces every term to
products of strip transfer-matrix eigenvalues and finite capped patches.
All quantities are computed in the symmetrized uniform gauge, where every
boundary cap is the first basis vector, and with the unit tensor normalized
by its single-site capped scalar so the logarithms stay well conditioned.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from pne.models import (
    GridNetwork,
    UniformBP,
    capped_patch,
    symmetrize_uniform,
    uniform_fixed_point,
)
from pne.network import NetworkError, contract
from pne.tensor import DominantEig, dominant_eig

__all__ = [
    "InfiniteError",
    "StripContext",
    "prepare_strips",
    "transfer_eigs",
    "patch_scalar",
    "FreeEnergyResult",
    "free_energy",
    "cylinder_baseline",
]


class InfiniteError(NetworkError):
    pass


@dataclass
class StripContext:
    """Symmetrized, site-normalized unit tensor plus cached strip data.

    ``log_site_scale`` restores absolute free energies:
    f(original unit) = f(normalized unit) - log_site_scale.
    """

    unit: np.ndarray                   # gauged and normalized, axes (u-, u+, l-, l+)
    log_site_scale: float
    lambdas: dict[int, float] = field(default_factory=dict)   # axis-0 strip eigenvalues
    gammas: dict[int, float] = field(default_factory=dict)    # axis-1 strip eigenvalues
    patches: dict[tuple[int, int], float] = field(default_factory=dict)

    def e0(self) -> np.ndarray:
        v = np.zeros(self.unit.shape[0])
        v[0] = 1.0
        return v


def prepare_strips(unit: np.ndarray, ubp: UniformBP | None = None, **bp_kwargs) -> StripContext:
    """Gauge and normalize a uniform 2D unit tensor for strip expansions."""
    unit = np.asarray(unit, dtype=np.float64)
    if unit.ndim != 4:
        raise InfiniteError("strip expansions need a 4-leg uniform unit tensor")
    if ubp is None:
        ubp = uniform_fixed_point(unit, **bp_kwargs)
    if not ubp.converged:
        raise InfiniteError("uniform message passing did not converge on this unit")
    gauged, _ = symmetrize_uniform(unit, ubp)
    site = float(gauged[0, 0, 0, 0])
    if site <= 0:
        raise InfiniteError(f"single-site capped scalar is {site:.3e}; cannot normalize logs")
    return StripContext(unit=gauged / site, log_site_scale=math.log(site))


def _strip_apply(unit: np.ndarray, k: int, v: np.ndarray) -> np.ndarray:
    """One row of a width-k strip applied to the state on k vertical bonds.

    Axes are (up, down, left, right); the transverse boundary bonds are
    capped with e0 on both sides (the partition projectors in the
    symmetrized gauge)."""
    chi = unit.shape[0]
    state = v.reshape((chi,) * k)
    # carry: (consumed output axes ..., horizontal bond)
    carry = state
    e0 = np.zeros(unit.shape[2])
    e0[0] = 1.0
    left = np.tensordot(unit, e0, axes=([2], [0]))      # (u, d, r)
    bulk = unit                                          # (u, d, l, r)
    for j in range(k):
        t = left if j == 0 else bulk
        if j == 0:
            # carry axes: (s_0 .. s_{k-1}); contract s_0 with u of t
            carry = np.tensordot(carry, t, axes=([0], [0]))
            # now (s_1.., d, r) -> put d at front of "done" block
            carry = np.moveaxis(carry, -2, 0)
        else:
            # carry axes: (d_0..d_{j-1}, s_j.., h); contract (s_j, h) with (u, l)
            carry = np.tensordot(carry, t, axes=([j, carry.ndim - 1], [0, 2]))
            carry = np.moveaxis(carry, -2, j)
    # remaining last axis is the right boundary bond
    carry = np.tensordot(carry, e0, axes=([carry.ndim - 1], [0]))
    return carry.reshape(-1)


def transfer_eigs(
    ctx: StripContext,
    widths,
    axis: int = 0,
    tol: float = 1e-12,
    max_iter: int = 20000,
) -> dict[int, float]:
    """Leading eigenvalue of the width-k strip transfer operator for each k.

    ``axis=0`` advances along rows (vertical strips, one value per row of k
    sites); ``axis=1`` along columns. A degenerate dominant pair aborts with
    an error, as every strip formula assumes a simple leading eigenvalue.
    """
    unit = ctx.unit if axis == 0 else ctx.unit.transpose(2, 3, 0, 1)
    cache = ctx.lambdas if axis == 0 else ctx.gammas
    chi = unit.shape[0]
    out = {}
    for k in sorted(set(int(w) for w in widths)):
        if k not in cache:
            res: DominantEig = dominant_eig(
                lambda v, k=k: _strip_apply(unit, k, v), chi**k, tol=tol, max_iter=max_iter
            )
            if res.degenerate:
                raise InfiniteError(
                    f"width-{k} transfer operator has a degenerate +/- leading pair "
                    f"(|lambda| = {res.value:.6g})"
                )
            cache[k] = float(res.value)
        out[k] = cache[k]
    return out


def patch_scalar(ctx: StripContext, k: int, p: int) -> float:
    """Scalar of the k-column by p-row capped patch of the normalized unit."""
    key = (int(k), int(p))
    if key not in ctx.patches:
        caps = {(g, s): ctx.e0() for g in range(2) for s in (0, 1)}
        grid: GridNetwork = capped_patch(ctx.unit, (key[1], key[0]), caps)
        ctx.patches[key] = float(contract(grid.net))
    return ctx.patches[key]


def _cyclic_gaps(offsets: tuple[int, ...], width: int) -> list[int]:
    s = sorted(offsets)
    return [(s[(i + 1) % len(s)] - s[i]) % width or width for i in range(len(s))]


@dataclass(frozen=True)
class FreeEnergyResult:
    value: float                     # free energy density, f = -lim log(Z_N)/N
    width: int
    axes: str                        # "v" or "vh"
    mode: str                        # "single" or "all"
    terms: tuple[tuple[str, int, float], ...]   # (description, sign, value per supercell)
    argument: float                  # the signed sum fed to the log


def free_energy(
    unit: np.ndarray,
    width: int,
    axes: str = "vh",
    mode: str = "all",
    ctx: StripContext | None = None,
    **bp_kwargs,
) -> FreeEnergyResult:
    """Strip-expansion estimate of the free energy density.

    ``axes="v"`` partitions into vertical width-``width`` strips only;
    ``axes="vh"`` uses both axes. ``mode="single"`` keeps one strip set (one
    expansion term); ``mode="all"`` uses every offset class of strip sets
    and the full inclusion-exclusion over their activations. Each term
    factorizes into strip eigenvalues (for the uncut axis) or into capped
    rectangular patches (both axes cut).
    """
    if ctx is None:
        ctx = prepare_strips(unit, **bp_kwargs)
    width = int(width)
    if width < 1:
        raise InfiniteError("strip width must be at least 1")
    if axes not in ("v", "vh"):
        raise InfiniteError("axes must be 'v' or 'vh'")
    if mode not in ("single", "all"):
        raise InfiniteError("mode must be 'single' or 'all'")

    terms: list[tuple[str, int, float]] = []
    if axes == "v" and mode == "single":
        lam = transfer_eigs(ctx, [width], axis=0)[width]
        terms.append((f"strip(v,{width})", 1, lam**1))
        total = lam
        sites = width
        f_norm = -math.log(total) / sites
    elif axes == "v":
        lams = transfer_eigs(ctx, range(1, width + 1), axis=0)
        total = 0.0
        for size in range(1, width + 1):
            for offsets in itertools.combinations(range(width), size):
                gaps = _cyclic_gaps(offsets, width)
                val = 1.0
                for w in gaps:
                    val *= lams[w]
                sign = 1 if size % 2 == 1 else -1
                terms.append((f"v-offsets{offsets}->widths{tuple(sorted(gaps))}", sign, val))
                total += sign * val
        if total <= 0:
            raise InfiniteError(
                f"strip expansion argument {total:.6e} is not positive; "
                f"terms: {[(d, s, v) for d, s, v in terms]}"
            )
        f_norm = -math.log(total) / width
    else:
        lams = transfer_eigs(ctx, range(1, width + 1), axis=0)
        gams = transfer_eigs(ctx, range(1, width + 1), axis=1)
        total = 0.0
        supercell = width * width
        for nv in range(width + 1):
            for sv in itertools.combinations(range(width), nv):
                for nh in range(width + 1):
                    if nv == 0 and nh == 0:
                        continue
                    for sh in itertools.combinations(range(width), nh):
                        sign = 1 if (nv + nh) % 2 == 1 else -1
                        if nh == 0:
                            gaps = _cyclic_gaps(sv, width)
                            val = 1.0
                            for w in gaps:
                                val *= lams[w] ** width
                            desc = f"v{sv}"
                        elif nv == 0:
                            gaps = _cyclic_gaps(sh, width)
                            val = 1.0
                            for w in gaps:
                                val *= gams[w] ** width
                            desc = f"h{sh}"
                        else:
                            vgaps = _cyclic_gaps(sv, width)
                            hgaps = _cyclic_gaps(sh, width)
                            val = 1.0
                            for w in vgaps:
                                for hgt in hgaps:
                                    val *= patch_scalar(ctx, w, hgt)
                            desc = f"v{sv} x h{sh}"
                        terms.append((desc, sign, val))
                        total += sign * val
        if total <= 0:
            raise InfiniteError(
                f"strip expansion argument {total:.6e} is not positive; "
                f"term breakdown: {[(d, s, v) for d, s, v in terms]}"
            )
        f_norm = -math.log(total) / supercell
    value = f_norm - ctx.log_site_scale
    return FreeEnergyResult(
        value=value, width=width, axes=axes, mode=mode, terms=tuple(terms), argument=float(total)
    )


def _ring_apply(unit: np.ndarray, length: int, v: np.ndarray) -> np.ndarray:
    """Transfer operator of a circumference-``length`` cylinder row."""
    chi = unit.shape[0]
    state = v.reshape((chi,) * length)
    carry = np.tensordot(state, unit, axes=([0], [0]))   # (s1.., d, l, r)
    carry = np.moveaxis(carry, -3, 0)                    # (d0, s1.., l, r)
    for j in range(1, length):
        # contract (s_j, r) with (u, l) of the next unit
        carry = np.tensordot(carry, unit, axes=([j, carry.ndim - 1], [0, 2]))
        carry = np.moveaxis(carry, -2, j)                # place d_j
    # close the ring: trace the left bond of site 0 with the right of site L-1
    return np.trace(carry, axis1=length, axis2=length + 1).reshape(-1)


def cylinder_baseline(
    unit: np.ndarray,
    circumference: int,
    tol: float = 1e-12,
    max_iter: int = 20000,
) -> float:
    """Free energy density from exact contraction of an infinite cylinder.

    Returns -log(lambda)/L for the dominant eigenvalue of the periodic
    width-L row transfer operator of the raw unit tensor.
    """
    unit = np.asarray(unit, dtype=np.float64)
    if unit.ndim != 4:
        raise InfiniteError("the cylinder baseline needs a 4-leg uniform unit tensor")
    length = int(circumference)
    if length < 1:
        raise InfiniteError("circumference must be at least 1")
    chi = unit.shape[0]
    res = dominant_eig(lambda v: _ring_apply(unit, length, v), chi**length, tol=tol, max_iter=max_iter)
    if res.degenerate:
        raise InfiniteError(
            f"cylinder transfer operator has a degenerate +/- leading pair (|lambda| = {res.value:.6g})"
        )
    if res.value <= 0:
        raise InfiniteError(f"cylinder leading eigenvalue {res.value:.6e} is not positive")
    return -math.log(res.value) / length
