"""Fully connected networks with hand-written reverse mode.

Inputs are either a single vector ``(in,)`` or a batch ``(B, in)``; weights are
stored ``(out, in)``.  ``backward`` returns the gradient of
``sum(output * upstream)`` summed over the batch.
"""

from __future__ import annotations

import json
import struct
import zlib
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import (CheckpointVersionError, CorruptCheckpointError, MissingCheckpointError,
                     RosterMismatchError, ShapeError)

TANH, RELU, LINEAR = "tanh", "relu", "linear"
ACTIVATIONS = (TANH, RELU, LINEAR)


@dataclass
class Layer:
    weight: np.ndarray
    bias: np.ndarray
    activation: str = LINEAR


@dataclass
class MlpParams:
    layers: list[Layer]

    @property
    def in_dim(self) -> int:
        return self.layers[0].weight.shape[1]

    @property
    def out_dim(self) -> int:
        return self.layers[-1].weight.shape[0]

    def copy(self) -> "MlpParams":
        return MlpParams([Layer(l.weight.copy(), l.bias.copy(), l.activation) for l in self.layers])

    def arrays(self) -> list[np.ndarray]:
        out = []
        for l in self.layers:
            out.extend((l.weight, l.bias))
        return out

    def flat(self) -> np.ndarray:
        return np.concatenate([a.ravel() for a in self.arrays()])


@dataclass
class GradientSet:
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    def arrays(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend((w, b))
        return out

    def flat(self) -> np.ndarray:
        return np.concatenate([a.ravel() for a in self.arrays()])


def init_mlp(sizes: Sequence[int], rng: np.random.Generator, hidden: str = RELU, output: str = LINEAR) -> MlpParams:
    """Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) initialisation."""
    layers = []
    for k in range(len(sizes) - 1):
        fan_in, fan_out = sizes[k], sizes[k + 1]
        bound = 1.0 / np.sqrt(fan_in)
        w = rng.uniform(-bound, bound, size=(fan_out, fan_in))
        b = rng.uniform(-bound, bound, size=fan_out)
        act = output if k == len(sizes) - 2 else hidden
        layers.append(Layer(w, b, act))
    return MlpParams(layers)


def _activate(z, act):
    if act == TANH:
        return np.tanh(z)
    if act == RELU:
        return np.maximum(z, 0.0)
    return z


def _check_input(params: MlpParams, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim not in (1, 2) or x.shape[-1] != params.in_dim:
        raise ShapeError(f"input shape {x.shape} does not fit a net with in_dim {params.in_dim}")
    return x


def forward(params: MlpParams, x) -> np.ndarray:
    h = _check_input(params, x)
    for l in params.layers:
        h = _activate(h @ l.weight.T + l.bias, l.activation)
    return h


def forward_vector(params: MlpParams, x: np.ndarray) -> np.ndarray:
    """Unchecked single-vector forward pass for rollout loops."""
    h = x
    for l in params.layers:
        h = l.weight @ h + l.bias
        if l.activation == TANH:
            h = np.tanh(h)
        elif l.activation == RELU:
            h = np.maximum(h, 0.0)
    return h


def forward_cache(params: MlpParams, x) -> tuple[np.ndarray, list[np.ndarray]]:
    """Forward pass that also returns every layer's input and the output."""
    h = _check_input(params, x)
    acts = [h]
    for l in params.layers:
        h = _activate(h @ l.weight.T + l.bias, l.activation)
        acts.append(h)
    return h, acts


def backward_cache(params: MlpParams, acts: list[np.ndarray], upstream: np.ndarray,
                   need_params: bool = True) -> tuple[GradientSet | None, np.ndarray]:
    g = np.asarray(upstream, dtype=np.float64)
    if g.shape != acts[-1].shape:
        raise ShapeError(f"upstream shape {g.shape} != output shape {acts[-1].shape}")
    batched = g.ndim == 2
    gw, gb = [], []
    for k in range(len(params.layers) - 1, -1, -1):
        l = params.layers[k]
        y = acts[k + 1]
        if l.activation == TANH:
            g = g * (1.0 - y * y)
        elif l.activation == RELU:
            g = g * (y > 0.0)
        if need_params:
            if batched:
                gw.append(g.T @ acts[k])
                gb.append(g.sum(axis=0))
            else:
                gw.append(np.outer(g, acts[k]))
                gb.append(g.copy())
        g = g @ l.weight
    grads = GradientSet(gw[::-1], gb[::-1]) if need_params else None
    return grads, g


def backward(params: MlpParams, x, upstream) -> tuple[GradientSet, np.ndarray]:
    """Exact gradients of ``sum(forward(params, x) * upstream)`` with respect
    to every parameter and to the input."""
    _, acts = forward_cache(params, x)
    grads, dx = backward_cache(params, acts, upstream)
    return grads, dx


def _congruent(a: MlpParams, b: MlpParams) -> None:
    if len(a.layers) != len(b.layers) or any(
            la.weight.shape != lb.weight.shape or la.bias.shape != lb.bias.shape
            for la, lb in zip(a.layers, b.layers)):
        raise ShapeError("parameter sets are not shape-congruent")


def soft_update(target: MlpParams, online: MlpParams, tau: float) -> MlpParams:
    """Return ``tau * online + (1 - tau) * target`` parameter-wise."""
    _congruent(target, online)
    return MlpParams([Layer(tau * lo.weight + (1.0 - tau) * lt.weight,
                            tau * lo.bias + (1.0 - tau) * lt.bias, lt.activation)
                      for lt, lo in zip(target.layers, online.layers)])


def soft_update_(target: MlpParams, online: MlpParams, tau: float) -> None:
    """In-place :func:`soft_update`."""
    _congruent(target, online)
    for lt, lo in zip(target.layers, online.layers):
        lt.weight *= 1.0 - tau
        lt.weight += tau * lo.weight
        lt.bias *= 1.0 - tau
        lt.bias += tau * lo.bias


def apply_gradient(params: MlpParams, grads: GradientSet, step: float) -> None:
    """``params += step * grads`` in place (negative step descends)."""
    for l, gw, gb in zip(params.layers, grads.weights, grads.biases):
        l.weight += step * gw
        l.bias += step * gb


def clip_gradient(grads: GradientSet, max_norm: float) -> GradientSet:
    if max_norm <= 0.0:
        return grads
    norm = float(np.sqrt(sum(float(np.sum(a * a)) for a in grads.arrays())))
    if norm <= max_norm:
        return grads
    s = max_norm / norm
    return GradientSet([w * s for w in grads.weights], [b * s for b in grads.biases])


# ---------------------------------------------------------------------------
# checkpoints
# ---------------------------------------------------------------------------

ROLES = ("policy", "policy_target", "critic", "critic_target")


@dataclass
class AgentNets:
    """Per-robot policy and centralised critic, each with a target copy."""

    roster: tuple[str, ...]
    policy: list[MlpParams]
    policy_target: list[MlpParams]
    critic: list[MlpParams]
    critic_target: list[MlpParams]

    @property
    def obs_dims(self) -> list[int]:
        return [p.in_dim for p in self.policy]

    @property
    def act_dims(self) -> list[int]:
        return [p.out_dim for p in self.policy]

    def nets(self, role: str) -> list[MlpParams]:
        return getattr(self, role)

    def copy(self) -> "AgentNets":
        return AgentNets(self.roster, *[[p.copy() for p in self.nets(r)] for r in ROLES])


MAGIC = b"PARNETS\x00"
VERSION = 1
_PREFIX = struct.Struct("<8sII")


def save_checkpoint(nets: AgentNets, path: str | Path) -> None:
    """Write ``nets`` as a self-describing little-endian float64 file."""
    shapes, payload = [], []
    for i, rid in enumerate(nets.roster):
        for role in ROLES:
            p = nets.nets(role)[i]
            shapes.append({"robot": rid, "role": role,
                           "layers": [[l.weight.shape[0], l.weight.shape[1], l.activation] for l in p.layers]})
            for a in p.arrays():
                payload.append(np.ascontiguousarray(a, dtype="<f8").tobytes())
    body = b"".join(payload)
    header = json.dumps({"roster": list(nets.roster), "nets": shapes,
                         "payload_bytes": len(body), "crc32": zlib.crc32(body)}).encode()
    Path(path).write_bytes(_PREFIX.pack(MAGIC, VERSION, len(header)) + header + body)


def load_checkpoint(path: str | Path, roster: Sequence[str] | None = None) -> AgentNets:
    path = Path(path)
    if not path.is_file():
        raise MissingCheckpointError(f"no checkpoint at {path}")
    raw = path.read_bytes()
    if len(raw) < _PREFIX.size:
        raise CorruptCheckpointError("file too short for a checkpoint header")
    magic, version, hlen = _PREFIX.unpack_from(raw)
    if magic != MAGIC:
        raise CorruptCheckpointError("bad magic; not a checkpoint file")
    if version != VERSION:
        raise CheckpointVersionError(f"checkpoint version {version}, expected {VERSION}")
    start = _PREFIX.size + hlen
    try:
        header = json.loads(raw[_PREFIX.size:start].decode())
    except (UnicodeDecodeError, json.JSONDecodeError):
        raise CorruptCheckpointError("unreadable checkpoint header") from None
    body = raw[start:]
    if len(body) != header.get("payload_bytes") or zlib.crc32(body) != header.get("crc32"):
        raise CorruptCheckpointError("checkpoint payload truncated or damaged")
    ids = tuple(header["roster"])
    if roster is not None and tuple(roster) != ids:
        raise RosterMismatchError(f"checkpoint roster {list(ids)} != scenario roster {list(roster)}")

    offset = 0
    per_robot: dict[str, dict[str, MlpParams]] = {rid: {} for rid in ids}
    for entry in header["nets"]:
        layers = []
        for out_dim, in_dim, act in entry["layers"]:
            w = np.frombuffer(body, dtype="<f8", count=out_dim * in_dim, offset=offset)
            offset += 8 * out_dim * in_dim
            b = np.frombuffer(body, dtype="<f8", count=out_dim, offset=offset)
            offset += 8 * out_dim
            layers.append(Layer(w.reshape(out_dim, in_dim).astype(np.float64),
                                b.astype(np.float64), act))
        per_robot[entry["robot"]][entry["role"]] = MlpParams(layers)
    return AgentNets(ids, *[[per_robot[rid][role] for rid in ids] for role in ROLES])
