"""Small feedforward networks with hand-written reverse mode.

A network is a list of dense layers ``r_i = phi(W_i r_{i-1} + b_i)``.  Inputs
may be a single vector ``(N0,)`` or a batch ``(B, N0)``; gradients of a batch
are summed over rows.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import List, Sequence

import numpy as np
from scipy.special import expit

from .signal import DimensionError, c2r, r2c

ACTIVATIONS = ("identity", "tanh", "sigmoid")
P_CLAMP = 1e-12
UNDERFLOW = 1e-9
_MAGIC = b"RE2W"
_VERSION = 1


class NormalizationUnderflowError(ArithmeticError):
    pass


@dataclass
class Layer:
    W: np.ndarray
    b: np.ndarray
    activation: str

    @property
    def n_in(self) -> int:
        return self.W.shape[1]

    @property
    def n_out(self) -> int:
        return self.W.shape[0]


@dataclass
class NetworkParams:
    layers: List[Layer]

    def __post_init__(self):
        for i, layer in enumerate(self.layers):
            if layer.activation not in ACTIVATIONS:
                raise ValueError(f"unknown activation {layer.activation!r}")
            if layer.b.shape != (layer.n_out,):
                raise DimensionError(f"layer {i}: bias shape {layer.b.shape} != ({layer.n_out},)")
            if i and layer.n_in != self.layers[i - 1].n_out:
                raise DimensionError(
                    f"layer {i} expects {layer.n_in} inputs, previous layer gives "
                    f"{self.layers[i - 1].n_out}")

    @property
    def dims(self) -> list:
        return [self.layers[0].n_in] + [layer.n_out for layer in self.layers]

    @property
    def activations(self) -> list:
        return [layer.activation for layer in self.layers]

    def copy(self) -> "NetworkParams":
        return NetworkParams([Layer(l.W.copy(), l.b.copy(), l.activation) for l in self.layers])

    def flat(self) -> np.ndarray:
        return np.concatenate([np.concatenate([l.W.ravel(), l.b]) for l in self.layers])

    def with_flat(self, v) -> "NetworkParams":
        v = np.asarray(v, dtype=float)
        layers, pos = [], 0
        for l in self.layers:
            nW = l.W.size
            W = v[pos:pos + nW].reshape(l.W.shape)
            b = v[pos + nW:pos + nW + l.b.size].copy()
            pos += nW + l.b.size
            layers.append(Layer(W.copy(), b, l.activation))
        if pos != v.size:
            raise DimensionError("flat vector length does not match parameters")
        return NetworkParams(layers)

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(l.W)) and np.all(np.isfinite(l.b)) for l in self.layers)


@dataclass
class ParamGrads:
    dW: List[np.ndarray]
    db: List[np.ndarray]

    def flat(self) -> np.ndarray:
        return np.concatenate([np.concatenate([w.ravel(), b]) for w, b in zip(self.dW, self.db)])

    def scaled(self, c: float) -> "ParamGrads":
        return ParamGrads([c * w for w in self.dW], [c * b for b in self.db])


def init_network(layer_dims: Sequence[int], activations: Sequence[str], seed) -> NetworkParams:
    """Glorot-uniform weights, zero biases.

    ``seed`` is an int or a ``numpy.random.Generator``.
    """
    if len(layer_dims) != len(activations) + 1:
        raise DimensionError("need exactly one activation per layer (len(dims) - 1)")
    if any(int(d) < 1 for d in layer_dims):
        raise DimensionError("layer sizes must be >= 1")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    layers = []
    for n_in, n_out, act in zip(layer_dims[:-1], layer_dims[1:], activations):
        a = np.sqrt(6.0 / (n_in + n_out))
        layers.append(Layer(rng.uniform(-a, a, (n_out, n_in)), np.zeros(n_out), act))
    return NetworkParams(layers)


def _phi(x, act):
    if act == "tanh":
        return np.tanh(x)
    if act == "sigmoid":
        return expit(x)
    return x


def _dphi_from_output(a, act):
    if act == "tanh":
        return 1.0 - a * a
    if act == "sigmoid":
        return a * (1.0 - a)
    return np.ones_like(a)


def forward(params: NetworkParams, r0) -> list:
    """Return ``[r0, r1, ..., rI]``; the last entry is the network output."""
    r = np.asarray(r0, dtype=float)
    if r.shape[-1] != params.layers[0].n_in:
        raise DimensionError(f"input has {r.shape[-1]} features, network expects "
                             f"{params.layers[0].n_in}")
    trace = [r]
    for layer in params.layers:
        r = _phi(r @ layer.W.T + layer.b, layer.activation)
        trace.append(r)
    return trace


def output_preactivation(params: NetworkParams, trace: list) -> np.ndarray:
    last = params.layers[-1]
    return trace[-2] @ last.W.T + last.b


def backward(params: NetworkParams, trace: list, d_out, wrt: str = "output"):
    """Reverse-mode gradients of a scalar loss.

    ``d_out`` is dLoss/d(output) with the output's shape.  With
    ``wrt="preactivation"`` it is taken as dLoss/d(last pre-activation)
    instead, which stays exact when a sigmoid output saturates.

    Returns ``(ParamGrads, dLoss_dInput)``.
    """
    if len(trace) != len(params.layers) + 1:
        raise DimensionError("trace does not belong to these parameters")
    delta = np.asarray(d_out, dtype=float)
    if delta.shape != trace[-1].shape:
        raise DimensionError(f"upstream gradient shape {delta.shape} != output {trace[-1].shape}")
    batched = trace[0].ndim == 2
    dWs, dbs = [], []
    for i in range(len(params.layers) - 1, -1, -1):
        layer = params.layers[i]
        if not (i == len(params.layers) - 1 and wrt == "preactivation"):
            delta = delta * _dphi_from_output(trace[i + 1], layer.activation)
        r_prev = trace[i]
        if batched:
            dWs.append(delta.T @ r_prev)
            dbs.append(delta.sum(axis=0))
        else:
            dWs.append(np.outer(delta, r_prev))
            dbs.append(delta.copy())
        delta = delta @ layer.W
    return ParamGrads(dWs[::-1], dbs[::-1]), delta


def sgd_step(params: NetworkParams, grads: ParamGrads, eta: float) -> NetworkParams:
    if eta < 0:
        raise ValueError("eta must be >= 0")
    if len(grads.dW) != len(params.layers):
        raise DimensionError("gradient/parameter layer count mismatch")
    layers = []
    for l, dW, db in zip(params.layers, grads.dW, grads.db):
        if dW.shape != l.W.shape or db.shape != l.b.shape:
            raise DimensionError("gradient/parameter shape mismatch")
        layers.append(Layer(l.W - eta * dW, l.b - eta * db, l.activation))
    return NetworkParams(layers)


# radar-specific maps

def transmitter_network(K: int, seed, output_activation: str = "identity") -> NetworkParams:
    return init_network([2 * K, 2 * K, 2 * K], ["tanh", output_activation], seed)


def receiver_network(K: int, M: int, seed) -> NetworkParams:
    return init_network([2 * K, M, 1], ["sigmoid", "sigmoid"], seed)


@dataclass
class TransmitTrace:
    y: np.ndarray        # normalized complex waveform
    u_norm: float
    trace: list


def transmit_forward(theta_T: NetworkParams, x) -> TransmitTrace:
    """C2R -> network -> R2C -> unit-power normalization, keeping the trace."""
    x = np.asarray(x, dtype=complex)
    if 2 * x.shape[-1] != theta_T.layers[0].n_in:
        raise DimensionError("transmitter input dimension must be 2K")
    trace = forward(theta_T, c2r(x))
    u = r2c(trace[-1])
    nrm = float(np.linalg.norm(u))
    if not nrm >= UNDERFLOW:
        raise NormalizationUnderflowError(f"transmitter output norm {nrm:.3g} below {UNDERFLOW}")
    return TransmitTrace(y=u / nrm, u_norm=nrm, trace=trace)


def transmit(theta_T: NetworkParams, x) -> np.ndarray:
    return transmit_forward(theta_T, x).y


def transmit_backward(theta_T: NetworkParams, tt: TransmitTrace, d_y_real) -> ParamGrads:
    """Gradient w.r.t. ``theta_T`` given dLoss/dy in C2R coordinates."""
    g = np.asarray(d_y_real, dtype=float)
    yr = c2r(tt.y)
    d_u = (g - yr * (yr @ g)) / tt.u_norm
    grads, _ = backward(theta_T, tt.trace, d_u)
    return grads


def receiver_logit(theta_R: NetworkParams, z) -> np.ndarray:
    """Pre-sigmoid receiver output; a monotone proxy for ``p``."""
    z = np.asarray(z, dtype=complex)
    if 2 * z.shape[-1] != theta_R.layers[0].n_in:
        raise DimensionError("receiver input dimension must be 2K")
    trace = forward(theta_R, c2r(z))
    return output_preactivation(theta_R, trace)[..., 0]


def receive(theta_R: NetworkParams, z):
    """Target-presence probability in ``[1e-12, 1 - 1e-12]``.

    A single ``(K,)`` vector gives a float; a ``(B, K)`` batch gives ``(B,)``.
    """
    if theta_R.layers[-1].activation != "sigmoid" or theta_R.layers[-1].n_out != 1:
        raise DimensionError("receiver must end in a single sigmoid unit")
    z = np.asarray(z, dtype=complex)
    if 2 * z.shape[-1] != theta_R.layers[0].n_in:
        raise DimensionError("receiver input dimension must be 2K")
    p = np.clip(forward(theta_R, c2r(z))[-1][..., 0], P_CLAMP, 1 - P_CLAMP)
    return float(p) if p.ndim == 0 else p


# weight files: little-endian header then row-major float64 W and b per layer

def params_to_bytes(params: NetworkParams) -> bytes:
    dims = params.dims
    codes = [ACTIVATIONS.index(a) for a in params.activations]
    n = len(params.layers)
    out = [_MAGIC, struct.pack("<II", _VERSION, n),
           struct.pack(f"<{n + 1}I", *dims), struct.pack(f"<{n}B", *codes)]
    for l in params.layers:
        out.append(np.ascontiguousarray(l.W, dtype="<f8").tobytes())
        out.append(np.ascontiguousarray(l.b, dtype="<f8").tobytes())
    return b"".join(out)


def params_from_bytes(data: bytes) -> NetworkParams:
    if data[:4] != _MAGIC:
        raise ValueError("not a weight file (bad magic)")
    version, n = struct.unpack_from("<II", data, 4)
    if version != _VERSION:
        raise ValueError(f"unsupported weight file version {version}")
    pos = 12
    dims = struct.unpack_from(f"<{n + 1}I", data, pos)
    pos += 4 * (n + 1)
    codes = struct.unpack_from(f"<{n}B", data, pos)
    pos += n
    layers = []
    for i in range(n):
        n_in, n_out = dims[i], dims[i + 1]
        W = np.frombuffer(data, "<f8", n_out * n_in, pos).reshape(n_out, n_in).astype(float)
        pos += 8 * n_out * n_in
        b = np.frombuffer(data, "<f8", n_out, pos).astype(float)
        pos += 8 * n_out
        layers.append(Layer(W, b, ACTIVATIONS[codes[i]]))
    if pos != len(data):
        raise ValueError("trailing bytes in weight file")
    return NetworkParams(layers)


def save_params(path, params: NetworkParams) -> None:
    with open(path, "wb") as fh:
        fh.write(params_to_bytes(params))


def load_params(path) -> NetworkParams:
    with open(path, "rb") as fh:
        return params_from_bytes(fh.read())
