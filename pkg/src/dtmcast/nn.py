"""Multilayer perceptrons, the Adam optimizer, and target-network blending.

Networks hold plain float64 numpy arrays. The fast inference path
(`Mlp.forward`) never touches the tape; differentiable passes wrap the
parameter arrays in `Tensor` nodes once per update via `tensor_params` and
push inputs through `apply_mlp`, so gradient accumulation works even when
the same network is applied several times in one graph (the denoising
chain does exactly that).
"""

from __future__ import annotations

import io
import json
from typing import Sequence

import numpy as np

from .autodiff import Tensor

_ACTIVATIONS = ("identity", "tanh", "relu")


class Mlp:
    """Fully connected network with relu hidden layers."""

    def __init__(self, sizes: Sequence[int], out_activation: str = "identity",
                 rng: np.random.Generator | None = None):
        if len(sizes) < 2:
            raise ValueError("need at least input and output sizes")
        if out_activation not in _ACTIVATIONS:
            raise ValueError(f"unknown output activation {out_activation!r}")
        self.sizes = tuple(int(s) for s in sizes)
        self.out_activation = out_activation
        rng = rng or np.random.default_rng()
        self.weights: list[np.ndarray] = []
        self.biases: list[np.ndarray] = []
        for fan_in, fan_out in zip(self.sizes[:-1], self.sizes[1:]):
            bound = 1.0 / np.sqrt(fan_in)
            self.weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
            self.biases.append(rng.uniform(-bound, bound, size=(fan_out,)))

    # ---- parameter access ---------------------------------------------

    def params(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out.append(w)
            out.append(b)
        return out

    def tensor_params(self) -> list[Tensor]:
        """One Tensor wrapper per parameter array, shared across reuses."""
        return [Tensor(p) for p in self.params()]

    def set_params(self, arrays: Sequence[np.ndarray]) -> None:
        own = self.params()
        if len(arrays) != len(own):
            raise ValueError("parameter count mismatch")
        for dst, src in zip(own, arrays):
            if dst.shape != src.shape:
                raise ValueError("parameter shape mismatch")
            dst[...] = src

    def copy(self) -> "Mlp":
        clone = Mlp.__new__(Mlp)
        clone.sizes = self.sizes
        clone.out_activation = self.out_activation
        clone.weights = [w.copy() for w in self.weights]
        clone.biases = [b.copy() for b in self.biases]
        return clone

    # ---- inference ------------------------------------------------------

    def forward(self, x: np.ndarray) -> np.ndarray:
        """Fast numpy pass; accepts (d,) or (batch, d)."""
        x = np.asarray(x, dtype=np.float64)
        squeeze = x.ndim == 1
        h = x[None, :] if squeeze else x
        if h.shape[1] != self.sizes[0]:
            raise ValueError(f"input dim {h.shape[1]} != expected {self.sizes[0]}")
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = h @ w + b
            if i < last:
                h = np.maximum(h, 0.0)
        if self.out_activation == "tanh":
            h = np.tanh(h)
        elif self.out_activation == "relu":
            h = np.maximum(h, 0.0)
        return h[0] if squeeze else h


def apply_mlp(param_tensors: Sequence[Tensor], x: Tensor,
              out_activation: str = "identity") -> Tensor:
    """Differentiable pass through an Mlp's wrapped parameters."""
    n_layers = len(param_tensors) // 2
    h = x
    for i in range(n_layers):
        h = h @ param_tensors[2 * i] + param_tensors[2 * i + 1]
        if i < n_layers - 1:
            h = h.relu()
    if out_activation == "tanh":
        h = h.tanh()
    elif out_activation == "relu":
        h = h.relu()
    return h


class Adam:
    """Adaptive-moment optimizer with bias correction, updating in place."""

    def __init__(self, lr: float, beta1: float = 0.9, beta2: float = 0.999,
                 eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m: list[np.ndarray] | None = None
        self.v: list[np.ndarray] | None = None

    def step(self, params: Sequence[np.ndarray], grads: Sequence[np.ndarray]) -> None:
        if self.m is None:
            self.m = [np.zeros_like(p) for p in params]
            self.v = [np.zeros_like(p) for p in params]
        if len(grads) != len(self.m):
            raise ValueError("gradient count mismatch")
        for g in grads:
            if not np.all(np.isfinite(g)):
                raise FloatingPointError("non-finite gradient in adam_step")
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)

    def state_arrays(self) -> dict[str, np.ndarray]:
        out: dict[str, np.ndarray] = {"t": np.array([self.t], dtype=np.int64)}
        for i, arr in enumerate(self.m or []):
            out[f"m{i}"] = arr
        for i, arr in enumerate(self.v or []):
            out[f"v{i}"] = arr
        return out

    def load_state_arrays(self, arrays: dict[str, np.ndarray]) -> None:
        self.t = int(arrays["t"][0])
        ms = sorted((k for k in arrays if k.startswith("m")), key=lambda k: int(k[1:]))
        vs = sorted((k for k in arrays if k.startswith("v")), key=lambda k: int(k[1:]))
        self.m = [arrays[k].copy() for k in ms]
        self.v = [arrays[k].copy() for k in vs]


def adam_step(params: Sequence[np.ndarray], grads: Sequence[np.ndarray],
              state: Adam, lr: float | None = None) -> Adam:
    """Functional wrapper around `Adam.step` (updates params in place)."""
    if lr is not None:
        state.lr = lr
    state.step(params, grads)
    return state


def soft_update(target: Mlp, online: Mlp, tau: float) -> None:
    """Blend target := tau * online + (1 - tau) * target, parameterwise."""
    if target.sizes != online.sizes or target.out_activation != online.out_activation:
        raise ValueError("architecture mismatch in soft_update")
    for t, o in zip(target.params(), online.params()):
        t *= 1.0 - tau
        t += tau * o


def assert_finite(net: Mlp) -> None:
    for p in net.params():
        if not np.all(np.isfinite(p)):
            raise FloatingPointError("non-finite network parameter")


CHECKPOINT_VERSION = 1


def save_checkpoint(path, nets: dict[str, Mlp],
                    optimizers: dict[str, Adam] | None = None,
                    extra: dict | None = None) -> None:
    """Versioned npz dump of all parameter arrays; round-trips bit-exact."""
    meta = {
        "version": CHECKPOINT_VERSION,
        "nets": {
            name: {"sizes": list(net.sizes), "out_activation": net.out_activation}
            for name, net in nets.items()
        },
        "optimizers": sorted(optimizers) if optimizers else [],
        "extra": extra or {},
    }
    arrays: dict[str, np.ndarray] = {}
    for name, net in nets.items():
        for i, p in enumerate(net.params()):
            arrays[f"net/{name}/{i}"] = p
    for name, opt in (optimizers or {}).items():
        for key, arr in opt.state_arrays().items():
            arrays[f"opt/{name}/{key}"] = arr
    buf = io.BytesIO()
    np.savez(buf, __meta__=np.frombuffer(
        json.dumps(meta, sort_keys=True).encode(), dtype=np.uint8), **arrays)
    with open(path, "wb") as fh:
        fh.write(buf.getvalue())


def load_checkpoint(path) -> tuple[dict[str, Mlp], dict[str, Adam], dict]:
    with np.load(path) as data:
        meta = json.loads(bytes(data["__meta__"]).decode())
        if meta["version"] != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {meta['version']}")
        nets: dict[str, Mlp] = {}
        for name, spec in meta["nets"].items():
            net = Mlp(spec["sizes"], spec["out_activation"],
                      rng=np.random.default_rng(0))
            n = len(net.params())
            net.set_params([data[f"net/{name}/{i}"] for i in range(n)])
            nets[name] = net
        opts: dict[str, Adam] = {}
        for name in meta["optimizers"]:
            prefix = f"opt/{name}/"
            arrays = {k[len(prefix):]: data[k] for k in data.files
                      if k.startswith(prefix)}
            opt = Adam(lr=0.0)
            opt.load_state_arrays(arrays)
            opts[name] = opt
    return nets, opts, meta["extra"]
