"""Minimal dense-network substrate with hand-derived gradients.

Fixed two-hidden-layer perceptrons (LeakyReLU) with one of three output
heads: tanh, linear, or a Gaussian head emitting a mean row and a
clamped log-std row. Enough for the actor and critics; no autodiff
graph, no GPU.
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass, field

import numpy as np

HEAD_TANH = "tanh"
HEAD_LINEAR = "linear"
HEAD_GAUSSIAN = "gaussian"

_MAGIC = b"FLNN"
_VERSION = 1


class ShapeMismatch(Exception):
    """Input or gradient shapes do not match the network."""


@dataclass
class Mlp:
    """input -> h1 -> h2 -> head, LeakyReLU on both hidden layers.

    For the Gaussian head the output is the concatenation
    [mean, clamped log-std], each of width out_dim.
    """

    in_dim: int
    hidden: tuple[int, int]
    out_dim: int
    head: str
    leaky_slope: float = 0.01
    log_std_min: float = -20.0
    log_std_max: float = 2.0
    params: list[np.ndarray] = field(default_factory=list)

    # params layout: [W1, b1, W2, b2] + head layers:
    #   tanh/linear -> [W3, b3]
    #   gaussian    -> [Wm, bm, Ws, bs]

    @classmethod
    def create(
        cls,
        in_dim: int,
        out_dim: int,
        head: str,
        rng: np.random.Generator,
        hidden: tuple[int, int] = (400, 300),
        leaky_slope: float = 0.01,
        log_std_min: float = -20.0,
        log_std_max: float = 2.0,
        final_init: float | None = None,
        dtype=np.float64,
    ) -> "Mlp":
        """Uniform +-1/sqrt(fan_in) init; final layer(s) in +-final_init if given."""
        if head not in (HEAD_TANH, HEAD_LINEAR, HEAD_GAUSSIAN):
            raise ValueError(f"unknown head {head!r}")

        def layer(n_in, n_out, bound=None):
            b = bound if bound is not None else 1.0 / np.sqrt(n_in)
            w = rng.uniform(-b, b, size=(n_in, n_out)).astype(dtype)
            bias = rng.uniform(-b, b, size=n_out).astype(dtype)
            return [w, bias]

        h1, h2 = hidden
        params = layer(in_dim, h1) + layer(h1, h2)
        if head == HEAD_GAUSSIAN:
            params += layer(h2, out_dim, final_init) + layer(h2, out_dim, final_init)
        else:
            params += layer(h2, out_dim, final_init)
        return cls(in_dim, (h1, h2), out_dim, head, leaky_slope, log_std_min, log_std_max, params)

    @property
    def dtype(self):
        return self.params[0].dtype

    @property
    def output_width(self) -> int:
        return 2 * self.out_dim if self.head == HEAD_GAUSSIAN else self.out_dim

    def copy(self) -> "Mlp":
        return Mlp(
            self.in_dim, self.hidden, self.out_dim, self.head,
            self.leaky_slope, self.log_std_min, self.log_std_max,
            [p.copy() for p in self.params],
        )

    # -- evaluation ---------------------------------------------------------

    def forward(self, x: np.ndarray) -> tuple[np.ndarray, tuple]:
        """Returns (output, cache). Accepts (N, in_dim) or a single (in_dim,) row."""
        x = np.asarray(x, dtype=self.dtype)
        single = x.ndim == 1
        if single:
            x = x[None, :]
        if x.ndim != 2 or x.shape[1] != self.in_dim:
            raise ShapeMismatch(f"expected (*, {self.in_dim}), got {x.shape}")

        w1, b1, w2, b2 = self.params[:4]
        s = self.leaky_slope
        z1 = x @ w1 + b1
        h1 = np.where(z1 >= 0, z1, s * z1)
        z2 = h1 @ w2 + b2
        h2 = np.where(z2 >= 0, z2, s * z2)

        if self.head == HEAD_GAUSSIAN:
            wm, bm, ws, bs = self.params[4:]
            mean = h2 @ wm + bm
            log_std_raw = h2 @ ws + bs
            log_std = np.clip(log_std_raw, self.log_std_min, self.log_std_max)
            out = np.concatenate([mean, log_std], axis=1)
            cache = (x, z1, h1, z2, h2, log_std_raw, None)
        else:
            w3, b3 = self.params[4:]
            z3 = h2 @ w3 + b3
            out = np.tanh(z3) if self.head == HEAD_TANH else z3
            cache = (x, z1, h1, z2, h2, None, out)
        if single:
            return out[0], cache
        return out, cache

    def _head_delta(self, cache, out_grad):
        """Gradient at the last hidden layer plus head parameter grads."""
        x, z1, h1, z2, h2, log_std_raw, out = cache
        out_grad = np.asarray(out_grad, dtype=self.dtype)
        if out_grad.ndim == 1:
            out_grad = out_grad[None, :]
        if out_grad.shape != (x.shape[0], self.output_width):
            raise ShapeMismatch(
                f"expected output grad {(x.shape[0], self.output_width)}, got {out_grad.shape}"
            )
        if self.head == HEAD_GAUSSIAN:
            wm, bm, ws, bs = self.params[4:]
            g_mean = out_grad[:, : self.out_dim]
            g_ls = out_grad[:, self.out_dim:]
            # clamp blocks the gradient outside (min, max)
            inside = (log_std_raw > self.log_std_min) & (log_std_raw < self.log_std_max)
            g_ls = g_ls * inside
            head_grads = [h2.T @ g_mean, g_mean.sum(axis=0), h2.T @ g_ls, g_ls.sum(axis=0)]
            dh2 = g_mean @ wm.T + g_ls @ ws.T
        else:
            w3, b3 = self.params[4:]
            d3 = out_grad * (1.0 - out * out) if self.head == HEAD_TANH else out_grad
            head_grads = [h2.T @ d3, d3.sum(axis=0)]
            dh2 = d3 @ w3.T
        return dh2, head_grads

    def backward(self, cache, out_grad) -> tuple[list[np.ndarray], np.ndarray]:
        """Exact reverse-mode gradients: (parameter grads, input grad)."""
        x, z1, h1, z2, h2, _, _ = cache
        w1, b1, w2, b2 = self.params[:4]
        s = self.leaky_slope

        dh2, head_grads = self._head_delta(cache, out_grad)
        dz2 = dh2 * np.where(z2 >= 0, 1.0, s)
        dh1 = dz2 @ w2.T
        dz1 = dh1 * np.where(z1 >= 0, 1.0, s)
        grads = [x.T @ dz1, dz1.sum(axis=0), h1.T @ dz2, dz2.sum(axis=0)] + head_grads
        return grads, dz1 @ w1.T

    def input_gradient(self, cache, out_grad) -> np.ndarray:
        """Input gradient only (skips the parameter outer products)."""
        x, z1, h1, z2, h2, _, _ = cache
        w1, b1, w2, b2 = self.params[:4]
        s = self.leaky_slope
        dh2, _ = self._head_delta(cache, out_grad)
        dz2 = dh2 * np.where(z2 >= 0, 1.0, s)
        dz1 = (dz2 @ w2.T) * np.where(z1 >= 0, 1.0, s)
        return dz1 @ w1.T


# ---------------------------------------------------------------------------
# optimizer


@dataclass
class AdamState:
    """Bias-corrected adaptive-moment optimizer state for one parameter list."""

    lr: float
    m: list[np.ndarray]
    v: list[np.ndarray]
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def create(cls, params: list[np.ndarray], lr: float, **kwargs) -> "AdamState":
        return cls(
            lr=lr,
            m=[np.zeros_like(p) for p in params],
            v=[np.zeros_like(p) for p in params],
            **kwargs,
        )


def adam_step(
    params: list[np.ndarray], grads: list[np.ndarray], opt: AdamState
) -> tuple[list[np.ndarray], AdamState]:
    """One Adam update; returns fresh parameter arrays and the advanced state."""
    if len(params) != len(grads) or len(params) != len(opt.m):
        raise ShapeMismatch("parameter/gradient/moment counts disagree")
    t = opt.step + 1
    c1 = 1.0 - opt.beta1**t
    c2 = 1.0 - opt.beta2**t
    new_params = []
    for i, (p, g) in enumerate(zip(params, grads)):
        if p.shape != g.shape:
            raise ShapeMismatch(f"param {i}: {p.shape} vs grad {g.shape}")
        m = opt.beta1 * opt.m[i] + (1.0 - opt.beta1) * g
        v = opt.beta2 * opt.v[i] + (1.0 - opt.beta2) * (g * g)
        opt.m[i] = m
        opt.v[i] = v
        new_params.append(p - opt.lr * (m / c1) / (np.sqrt(v / c2) + opt.eps))
    opt.step = t
    return new_params, opt


# ---------------------------------------------------------------------------
# serialization: little-endian flat binary with a JSON header


def _dtype_tag(dtype) -> str:
    return {np.dtype(np.float64): "<f8", np.dtype(np.float32): "<f4"}[np.dtype(dtype)]


def write_blob(fh, header: dict, arrays: list[np.ndarray]) -> None:
    """magic | u32 header length | JSON header | raw row-major blocks."""
    header = dict(header)
    header["arrays"] = [
        {"shape": list(a.shape), "dtype": _dtype_tag(a.dtype)} for a in arrays
    ]
    raw = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    fh.write(_MAGIC)
    fh.write(_VERSION.to_bytes(4, "little"))
    fh.write(len(raw).to_bytes(4, "little"))
    fh.write(raw)
    for a in arrays:
        fh.write(np.ascontiguousarray(a).astype(_dtype_tag(a.dtype), copy=False).tobytes())


def read_blob(fh) -> tuple[dict, list[np.ndarray]]:
    magic = fh.read(4)
    if magic != _MAGIC:
        raise ValueError("not a flightlab checkpoint (bad magic)")
    version = int(np.frombuffer(fh.read(4), dtype="<u4")[0])
    if version != _VERSION:
        raise ValueError(f"unsupported checkpoint version {version}")
    hlen = int(np.frombuffer(fh.read(4), dtype="<u4")[0])
    header = json.loads(fh.read(hlen).decode("utf-8"))
    arrays = []
    for spec in header["arrays"]:
        shape = tuple(spec["shape"])
        dt = np.dtype(spec["dtype"])
        n = int(np.prod(shape)) if shape else 1
        buf = fh.read(n * dt.itemsize)
        arrays.append(np.frombuffer(buf, dtype=dt).reshape(shape).copy())
    return header, arrays


def mlp_header(net: Mlp) -> dict:
    return {
        "kind": "mlp",
        "in_dim": net.in_dim,
        "hidden": list(net.hidden),
        "out_dim": net.out_dim,
        "head": net.head,
        "leaky_slope": net.leaky_slope,
        "log_std_min": net.log_std_min,
        "log_std_max": net.log_std_max,
    }


def mlp_from_header(header: dict, params: list[np.ndarray]) -> Mlp:
    return Mlp(
        in_dim=header["in_dim"],
        hidden=tuple(header["hidden"]),
        out_dim=header["out_dim"],
        head=header["head"],
        leaky_slope=header["leaky_slope"],
        log_std_min=header["log_std_min"],
        log_std_max=header["log_std_max"],
        params=params,
    )


def save_mlp(net: Mlp, path) -> None:
    with open(path, "wb") as fh:
        write_blob(fh, mlp_header(net), net.params)


def load_mlp(path) -> Mlp:
    with open(path, "rb") as fh:
        header, arrays = read_blob(fh)
    if header.get("kind") != "mlp":
        raise ValueError("checkpoint does not hold a single network")
    return mlp_from_header(header, arrays)
