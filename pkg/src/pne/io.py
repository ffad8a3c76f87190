"""Container file format for networks, message states, weight states and
partition sets.

Layout: 4-byte magic ``PNEC``, a little-endian uint32 header length, a UTF-8
JSON header, then the concatenated float64 little-endian payload arrays in
the order they are declared in the header. The header always carries
``format_version`` and ``kind``.
"""

from __future__ import annotations

import json
import struct
from typing import BinaryIO

import numpy as np

from pne.belief import BPState
from pne.expansion import Factorized, JointIsometry, JointKetBra, Partition
from pne.network import Edge, TensorNetwork
from pne.weights import WeightState

__all__ = [
    "save_network",
    "load_network",
    "save_bp_state",
    "load_bp_state",
    "save_weight_state",
    "load_weight_state",
    "save_partitions",
    "load_partitions",
    "load_any",
]

MAGIC = b"PNEC"
FORMAT_VERSION = 1


def _write(fh: BinaryIO, header: dict, arrays: list[np.ndarray]) -> None:
    header = dict(header)
    header["format_version"] = FORMAT_VERSION
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    fh.write(MAGIC)
    fh.write(struct.pack("<I", len(blob)))
    fh.write(blob)
    for arr in arrays:
        fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def _read(fh: BinaryIO) -> tuple[dict, bytes]:
    magic = fh.read(4)
    if magic != MAGIC:
        raise ValueError(f"not a container file (magic {magic!r})")
    (hlen,) = struct.unpack("<I", fh.read(4))
    header = json.loads(fh.read(hlen).decode("utf-8"))
    if header.get("format_version") != FORMAT_VERSION:
        raise ValueError(f"unsupported format version {header.get('format_version')}")
    return header, fh.read()


def _take(buf: bytes, offset: int, shape) -> tuple[np.ndarray, int]:
    count = int(np.prod(shape)) if shape else 1
    arr = np.frombuffer(buf, dtype="<f8", count=count, offset=offset).astype(np.float64)
    return arr.reshape(shape), offset + count * 8


def _network_header(net: TensorNetwork) -> tuple[dict, list[np.ndarray]]:
    nodes = [{"id": n, "dims": list(net.nodes[n].shape)} for n in sorted(net.nodes)]
    edges = [
        {"id": e, "dim": net.edges[e].dim, "endpoints": [list(p) for p in net.edges[e].endpoints]}
        for e in sorted(net.edges)
    ]
    payload = [net.nodes[n] for n in sorted(net.nodes)]
    return {"node_count": len(nodes), "nodes": nodes, "edges": edges}, payload


def _network_from_header(header: dict, buf: bytes, offset: int) -> tuple[TensorNetwork, int]:
    nodes = {}
    for rec in header["nodes"]:
        arr, offset = _take(buf, offset, tuple(rec["dims"]))
        nodes[int(rec["id"])] = arr
    edges = {}
    for rec in header["edges"]:
        edges[int(rec["id"])] = Edge(
            endpoints=tuple((int(n), int(ax)) for n, ax in rec["endpoints"]),
            dim=int(rec["dim"]),
        )
    return TensorNetwork(nodes=nodes, edges=edges), offset


def save_network(path: str, net: TensorNetwork) -> None:
    header, payload = _network_header(net)
    header["kind"] = "network"
    with open(path, "wb") as fh:
        _write(fh, header, payload)


def load_network(path: str) -> TensorNetwork:
    with open(path, "rb") as fh:
        header, buf = _read(fh)
    if header["kind"] != "network":
        raise ValueError(f"expected a network container, found {header['kind']}")
    net, _ = _network_from_header(header, buf, 0)
    return net


def save_bp_state(path: str, state: BPState) -> None:
    keys = sorted(state.messages)
    header = {
        "kind": "bp_state",
        "messages": [
            {"edge": e, "direction": d, "length": int(state.messages[(e, d)].size)}
            for e, d in keys
        ],
        "iterations": state.iterations,
        "converged": state.converged,
        "tol": state.tol,
        "residuals": [[e, d, state.residuals[(e, d)]] for e, d in keys],
    }
    with open(path, "wb") as fh:
        _write(fh, header, [state.messages[k] for k in keys])


def load_bp_state(path: str) -> BPState:
    with open(path, "rb") as fh:
        header, buf = _read(fh)
    if header["kind"] != "bp_state":
        raise ValueError(f"expected a bp_state container, found {header['kind']}")
    messages = {}
    offset = 0
    for rec in header["messages"]:
        vec, offset = _take(buf, offset, (rec["length"],))
        messages[(int(rec["edge"]), int(rec["direction"]))] = vec
    residuals = {(int(e), int(d)): float(r) for e, d, r in header["residuals"]}
    return BPState(
        messages=messages,
        iterations=int(header["iterations"]),
        residuals=residuals,
        converged=bool(header["converged"]),
        tol=float(header["tol"]),
    )


def save_weight_state(path: str, state: WeightState) -> None:
    net_header, net_payload = _network_header(state.net)
    keys = sorted(state.weights)
    header = {
        "kind": "weight_state",
        "network": net_header,
        "weights": [{"edge": e, "length": int(state.weights[e].size)} for e in keys],
        "alpha": state.alpha,
        "sweeps": state.sweeps,
        "residual": state.residual,
        "converged": state.converged,
        "log_prefactor": state.log_prefactor,
    }
    with open(path, "wb") as fh:
        _write(fh, header, net_payload + [state.weights[e] for e in keys])


def load_weight_state(path: str) -> WeightState:
    with open(path, "rb") as fh:
        header, buf = _read(fh)
    if header["kind"] != "weight_state":
        raise ValueError(f"expected a weight_state container, found {header['kind']}")
    net, offset = _network_from_header(header["network"], buf, 0)
    weights = {}
    for rec in header["weights"]:
        vec, offset = _take(buf, offset, (rec["length"],))
        weights[int(rec["edge"])] = vec
    return WeightState(
        net=net,
        weights=weights,
        alpha=float(header["alpha"]),
        sweeps=int(header["sweeps"]),
        residual=float(header["residual"]),
        converged=bool(header["converged"]),
        log_prefactor=float(header["log_prefactor"]),
    )


def save_partitions(path: str, partitions, form: str | None = None) -> None:
    records = []
    payload: list[np.ndarray] = []
    for part in partitions:
        proj = part.projector
        if isinstance(proj, Factorized):
            kind = "factorized"
            shapes = [list(f.shape) for f in proj.factors]
            payload.extend(np.asarray(f, dtype=np.float64) for f in proj.factors)
        elif isinstance(proj, JointIsometry):
            kind = "joint_isometry"
            shapes = [list(proj.isometry.shape)]
            payload.append(np.asarray(proj.isometry, dtype=np.float64))
        elif isinstance(proj, JointKetBra):
            kind = "joint_ketbra"
            shapes = [[int(np.asarray(proj.ket).size)], [int(np.asarray(proj.bra).size)]]
            payload.append(np.asarray(proj.ket, dtype=np.float64).reshape(-1))
            payload.append(np.asarray(proj.bra, dtype=np.float64).reshape(-1))
        else:
            raise ValueError(f"unknown projector {proj!r}")
        records.append({"id": part.id, "edges": list(part.edges), "kind": kind, "shapes": shapes})
    header = {"kind": "partitions", "partitions": records}
    if form is not None:
        header["form"] = form
    with open(path, "wb") as fh:
        _write(fh, header, payload)


def load_partitions(path: str) -> tuple[list[Partition], str | None]:
    with open(path, "rb") as fh:
        header, buf = _read(fh)
    if header["kind"] != "partitions":
        raise ValueError(f"expected a partitions container, found {header['kind']}")
    out = []
    offset = 0
    for rec in header["partitions"]:
        kind = rec["kind"]
        if kind == "factorized":
            factors = []
            for shape in rec["shapes"]:
                arr, offset = _take(buf, offset, tuple(shape))
                factors.append(arr)
            proj = Factorized(factors=tuple(factors))
        elif kind == "joint_isometry":
            arr, offset = _take(buf, offset, tuple(rec["shapes"][0]))
            proj = JointIsometry(isometry=arr)
        else:
            ket, offset = _take(buf, offset, tuple(rec["shapes"][0]))
            bra, offset = _take(buf, offset, tuple(rec["shapes"][1]))
            proj = JointKetBra(ket=ket, bra=bra)
        out.append(Partition(id=int(rec["id"]), edges=tuple(int(e) for e in rec["edges"]), projector=proj))
    return out, header.get("form")


def load_any(path: str):
    """Load whatever the container holds, dispatching on its kind field."""
    with open(path, "rb") as fh:
        header, _ = _read(fh)
    kind = header["kind"]
    loader = {
        "network": load_network,
        "bp_state": load_bp_state,
        "weight_state": load_weight_state,
        "partitions": load_partitions,
    }[kind]
    return loader(path)
