"""Minimal reverse-mode autodiff over numpy float64, plus the few layer
kinds the models need: Linear, GruCell, Mlp, and softmax over index sets.

A Tensor records its parents and a backward closure; ``backward`` walks the
tape in reverse topological order and accumulates into ``grad``. Everything
is double precision so central finite differences verify every op tightly.
"""

from __future__ import annotations

import json
import struct
from contextlib import contextmanager
from dataclasses import dataclass

import numpy as np

_grad_enabled = True


@contextmanager
def no_grad():
    """Disable tape recording (pure-numpy forward speed)."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


class ShapeMismatch(Exception):
    pass


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_bw")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._parents: tuple[Tensor, ...] = ()
        self._bw = None

    @property
    def shape(self):
        return self.data.shape

    def _accumulate(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, grad={'yes' if self.requires_grad else 'no'})"

    # operator sugar
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return add(self, mul(_wrap(other), -1.0))

    def __rsub__(self, other):
        return add(_wrap(other), mul(self, -1.0))

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(self, other)

    def __truediv__(self, other):
        return div(self, other)

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)


def _wrap(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=np.float64))


def _make(data: np.ndarray, parents: tuple[Tensor, ...], bw) -> Tensor:
    out = Tensor(data)
    if _grad_enabled and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = parents
        out._bw = bw
    return out


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    if g.shape == shape:
        return g
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for i, s in enumerate(shape):
        if s == 1 and g.shape[i] != 1:
            g = g.sum(axis=i, keepdims=True)
    return g


def add(a, b) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    def bw(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g, a.data.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(g, b.data.shape))
    return _make(a.data + b.data, (a, b), bw)


def mul(a, b) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    def bw(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g * b.data, a.data.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(g * a.data, b.data.shape))
    return _make(a.data * b.data, (a, b), bw)


def div(a, b) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    def bw(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g / b.data, a.data.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(-g * a.data / (b.data * b.data), b.data.shape))
    return _make(a.data / b.data, (a, b), bw)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    def bw(g):
        if a.data.ndim == 2 and b.data.ndim == 2:
            if a.requires_grad:
                a._accumulate(g @ b.data.T)
            if b.requires_grad:
                b._accumulate(a.data.T @ g)
        elif a.data.ndim == 2 and b.data.ndim == 1:
            if a.requires_grad:
                a._accumulate(np.outer(g, b.data))
            if b.requires_grad:
                b._accumulate(a.data.T @ g)
        else:
            raise ShapeMismatch(f"matmul backward unsupported for {a.data.shape} @ {b.data.shape}")
    return _make(a.data @ b.data, (a, b), bw)


def exp(a: Tensor) -> Tensor:
    out_data = np.exp(a.data)
    def bw(g):
        if a.requires_grad:
            a._accumulate(g * out_data)
    return _make(out_data, (a,), bw)


def tanh(a: Tensor) -> Tensor:
    out_data = np.tanh(a.data)
    def bw(g):
        if a.requires_grad:
            a._accumulate(g * (1.0 - out_data * out_data))
    return _make(out_data, (a,), bw)


def sigmoid(a: Tensor) -> Tensor:
    out_data = 1.0 / (1.0 + np.exp(-a.data))
    def bw(g):
        if a.requires_grad:
            a._accumulate(g * out_data * (1.0 - out_data))
    return _make(out_data, (a,), bw)


def relu(a: Tensor) -> Tensor:
    keep = a.data > 0
    def bw(g):
        if a.requires_grad:
            a._accumulate(g * keep)
    return _make(a.data * keep, (a,), bw)


def absolute(a: Tensor) -> Tensor:
    sign = np.sign(a.data)
    def bw(g):
        if a.requires_grad:
            a._accumulate(g * sign)
    return _make(np.abs(a.data), (a,), bw)


def tsum(a: Tensor) -> Tensor:
    def bw(g):
        if a.requires_grad:
            a._accumulate(np.full_like(a.data, g))
    return _make(np.asarray(a.data.sum()), (a,), bw)


def tmean(a: Tensor) -> Tensor:
    n = a.data.size
    def bw(g):
        if a.requires_grad:
            a._accumulate(np.full_like(a.data, g / n))
    return _make(np.asarray(a.data.mean()), (a,), bw)


def concat_cols(a: Tensor, b: Tensor) -> Tensor:
    na = a.data.shape[1]
    def bw(g):
        if a.requires_grad:
            a._accumulate(g[:, :na])
        if b.requires_grad:
            b._accumulate(g[:, na:])
    return _make(np.concatenate([a.data, b.data], axis=1), (a, b), bw)


def slice_cols(a: Tensor, lo: int, hi: int) -> Tensor:
    def bw(g):
        if a.requires_grad:
            full = np.zeros_like(a.data)
            full[:, lo:hi] = g
            a._accumulate(full)
    return _make(a.data[:, lo:hi], (a,), bw)


def gather_rows(a: Tensor, idx: np.ndarray) -> Tensor:
    def bw(g):
        if a.requires_grad:
            full = np.zeros_like(a.data)
            np.add.at(full, idx, g)
            a._accumulate(full)
    return _make(a.data[idx], (a,), bw)


def segment_sum(a: Tensor, seg: np.ndarray, n_segments: int) -> Tensor:
    out_shape = (n_segments,) + a.data.shape[1:]
    data = np.zeros(out_shape)
    np.add.at(data, seg, a.data)
    def bw(g):
        if a.requires_grad:
            a._accumulate(g[seg])
    return _make(data, (a,), bw)


def unsqueeze_col(a: Tensor) -> Tensor:
    """(M,) -> (M, 1) for broadcasting against row-vector matrices."""
    def bw(g):
        if a.requires_grad:
            a._accumulate(g.reshape(-1))
    return _make(a.data.reshape(-1, 1), (a,), bw)


def softmax_over_set(scores: Tensor, seg: np.ndarray, n_segments: int) -> Tensor:
    """Softmax normalized within each index segment of a flat score vector."""
    m = np.full(n_segments, -np.inf)
    np.maximum.at(m, seg, scores.data)
    shifted = add(scores, Tensor(-m[seg]))  # constant shift, exact softmax
    e = exp(shifted)
    denom = segment_sum(e, seg, n_segments)
    return div(e, gather_rows(denom, seg))


def backward(out: Tensor, seed: float | np.ndarray = 1.0) -> None:
    """Reverse pass from ``out``; accumulates into every reachable ``grad``."""
    topo: list[Tensor] = []
    visited: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(out, False)]
    while stack:
        node, processed = stack.pop()
        if processed:
            topo.append(node)
            continue
        if id(node) in visited or not node.requires_grad:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            stack.append((p, False))
    out._accumulate(np.broadcast_to(np.asarray(seed, dtype=np.float64), out.data.shape).copy())
    for node in reversed(topo):
        if node._bw is not None:
            node._bw(node.grad)


class ParamStore:
    """Named float64 parameter tensors with gradient and ADAM state."""

    def __init__(self, seed: int = 0):
        self.tensors: dict[str, Tensor] = {}
        self._m: dict[str, np.ndarray] = {}
        self._v: dict[str, np.ndarray] = {}
        self.step_count = 0
        self._rng = np.random.default_rng(np.random.SeedSequence([0xADA7, seed]))

    def add(self, name: str, shape: tuple[int, ...], fan_in: int) -> Tensor:
        """New parameter, uniform in +-1/sqrt(fan_in), seed-controlled."""
        if name in self.tensors:
            raise ValueError(f"duplicate parameter {name!r}")
        bound = 1.0 / np.sqrt(fan_in)
        t = Tensor(self._rng.uniform(-bound, bound, size=shape), requires_grad=True)
        self.tensors[name] = t
        self._m[name] = np.zeros(shape)
        self._v[name] = np.zeros(shape)
        return t

    def __getitem__(self, name: str) -> Tensor:
        return self.tensors[name]

    def zero_grad(self) -> None:
        for t in self.tensors.values():
            t.grad = None

    def n_params(self) -> int:
        return sum(t.data.size for t in self.tensors.values())

    def copy(self) -> "ParamStore":
        out = ParamStore()
        for name, t in self.tensors.items():
            c = Tensor(t.data.copy(), requires_grad=True)
            out.tensors[name] = c
            out._m[name] = self._m[name].copy()
            out._v[name] = self._v[name].copy()
        out.step_count = self.step_count
        return out

    def load_arrays(self, arrays: dict[str, np.ndarray]) -> None:
        for name, arr in arrays.items():
            if name in self.tensors:
                if self.tensors[name].data.shape != arr.shape:
                    raise ShapeMismatch(f"{name}: {self.tensors[name].data.shape} vs {arr.shape}")
                self.tensors[name].data = arr.astype(np.float64).copy()
            else:
                self.tensors[name] = Tensor(arr.astype(np.float64).copy(), requires_grad=True)
                self._m[name] = np.zeros(arr.shape)
                self._v[name] = np.zeros(arr.shape)


ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


def adam_step(store: ParamStore, lr: float, beta1: float = ADAM_BETA1,
              beta2: float = ADAM_BETA2, eps: float = ADAM_EPS) -> None:
    """Bias-corrected ADAM over all parameters; zeroes gradients afterward.

    Parameters without an accumulated gradient are treated as gradient zero
    (their moments still decay).
    """
    store.step_count += 1
    t = store.step_count
    bc1 = 1.0 - beta1 ** t
    bc2 = 1.0 - beta2 ** t
    for name, p in store.tensors.items():
        g = p.grad if p.grad is not None else 0.0
        m = store._m[name]
        v = store._v[name]
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * np.square(g)
        p.data -= lr * (m / bc1) / (np.sqrt(v / bc2) + eps)
    store.zero_grad()


@dataclass
class Linear:
    name: str
    in_dim: int
    out_dim: int

    def init(self, store: ParamStore) -> None:
        store.add(f"{self.name}.W", (self.in_dim, self.out_dim), fan_in=self.in_dim)
        store.add(f"{self.name}.b", (self.out_dim,), fan_in=self.in_dim)

    def __call__(self, store: ParamStore, x: Tensor) -> Tensor:
        if x.data.shape[-1] != self.in_dim:
            raise ShapeMismatch(f"{self.name}: expected {self.in_dim} features, got {x.data.shape}")
        return add(matmul(x, store[f"{self.name}.W"]), store[f"{self.name}.b"])


@dataclass
class GruCell:
    """Gated recurrent cell; h' = (1-z)*h + z*n so a saturated update gate
    hands over the candidate state."""

    name: str
    input_dim: int
    hidden_dim: int

    def init(self, store: ParamStore) -> None:
        h = self.hidden_dim
        store.add(f"{self.name}.Wx", (self.input_dim, 3 * h), fan_in=self.input_dim)
        store.add(f"{self.name}.Wh", (h, 3 * h), fan_in=h)
        store.add(f"{self.name}.bx", (3 * h,), fan_in=self.input_dim)
        store.add(f"{self.name}.bh", (3 * h,), fan_in=h)

    def __call__(self, store: ParamStore, x: Tensor, h: Tensor) -> Tensor:
        if x.data.shape[-1] != self.input_dim or h.data.shape[-1] != self.hidden_dim:
            raise ShapeMismatch(f"{self.name}: got x{x.data.shape} h{h.data.shape}")
        hd = self.hidden_dim
        gx = add(matmul(x, store[f"{self.name}.Wx"]), store[f"{self.name}.bx"])
        gh = add(matmul(h, store[f"{self.name}.Wh"]), store[f"{self.name}.bh"])
        z = sigmoid(add(slice_cols(gx, 0, hd), slice_cols(gh, 0, hd)))
        r = sigmoid(add(slice_cols(gx, hd, 2 * hd), slice_cols(gh, hd, 2 * hd)))
        n = tanh(add(slice_cols(gx, 2 * hd, 3 * hd), mul(r, slice_cols(gh, 2 * hd, 3 * hd))))
        return add(h, mul(z, add(n, mul(h, -1.0))))  # h + z*(n-h)


@dataclass
class Mlp:
    name: str
    dims: tuple[int, ...]
    activation: str = "relu"

    def init(self, store: ParamStore) -> None:
        for i in range(len(self.dims) - 1):
            Linear(f"{self.name}.{i}", self.dims[i], self.dims[i + 1]).init(store)

    def __call__(self, store: ParamStore, x: Tensor) -> Tensor:
        act = {"relu": relu, "tanh": tanh}[self.activation]
        for i in range(len(self.dims) - 1):
            x = Linear(f"{self.name}.{i}", self.dims[i], self.dims[i + 1])(store, x)
            if i < len(self.dims) - 2:
                x = act(x)
        return x


CHECKPOINT_MAGIC = b"TPLBCKPT"
CHECKPOINT_VERSION = 1


def save_checkpoint(path: str, arrays: dict[str, np.ndarray], meta: dict) -> None:
    """Named-tensor container: shape header + little-endian IEEE-754 payload."""
    meta_bytes = json.dumps(meta, sort_keys=True).encode("utf-8")
    with open(path, "wb") as f:
        f.write(CHECKPOINT_MAGIC)
        f.write(struct.pack("<I", CHECKPOINT_VERSION))
        f.write(struct.pack("<I", len(meta_bytes)))
        f.write(meta_bytes)
        f.write(struct.pack("<I", len(arrays)))
        for name in sorted(arrays):
            arr = np.ascontiguousarray(arrays[name], dtype=np.float64)
            nb = name.encode("utf-8")
            f.write(struct.pack("<I", len(nb)))
            f.write(nb)
            f.write(struct.pack("<I", arr.ndim))
            f.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            f.write(arr.astype("<f8").tobytes())


def load_checkpoint(path: str) -> tuple[dict[str, np.ndarray], dict]:
    with open(path, "rb") as f:
        blob = f.read()
    if blob[:8] != CHECKPOINT_MAGIC:
        raise ValueError("not a tpilab checkpoint")
    off = 8
    (version,) = struct.unpack_from("<I", blob, off); off += 4
    if version != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {version}")
    (meta_len,) = struct.unpack_from("<I", blob, off); off += 4
    meta = json.loads(blob[off:off + meta_len].decode("utf-8")); off += meta_len
    (count,) = struct.unpack_from("<I", blob, off); off += 4
    arrays: dict[str, np.ndarray] = {}
    for _ in range(count):
        (name_len,) = struct.unpack_from("<I", blob, off); off += 4
        name = blob[off:off + name_len].decode("utf-8"); off += name_len
        (ndim,) = struct.unpack_from("<I", blob, off); off += 4
        shape = struct.unpack_from(f"<{ndim}I", blob, off); off += 4 * ndim
        size = int(np.prod(shape)) if ndim else 1
        arr = np.frombuffer(blob, dtype="<f8", count=size, offset=off).reshape(shape).copy()
        off += 8 * size
        arrays[name] = arr
    return arrays, meta


def finite_difference_check(store: ParamStore, loss_fn, rng: np.random.Generator,
                            probes_per_tensor: int = 4, step: float = 1e-5):
    """Central-difference probe of ``loss_fn()`` against analytic gradients.

    Returns a list of (name, flat_index, analytic, numeric, rel_err); the
    relative error uses a 1e-6 floor so zero gradients compare cleanly.
    """
    store.zero_grad()
    loss = loss_fn()
    backward(loss)
    results = []
    for name, p in store.tensors.items():
        flat = p.data.reshape(-1)
        grad = (p.grad if p.grad is not None else np.zeros_like(p.data)).reshape(-1)
        n_probe = min(probes_per_tensor, flat.size)
        idxs = rng.choice(flat.size, size=n_probe, replace=False)
        for i in idxs:
            keep = flat[i]
            flat[i] = keep + step
            up = float(loss_fn().data)
            flat[i] = keep - step
            down = float(loss_fn().data)
            flat[i] = keep
            numeric = (up - down) / (2.0 * step)
            analytic = float(grad[i])
            rel = abs(analytic - numeric) / max(1e-6, abs(analytic), abs(numeric))
            results.append((name, int(i), analytic, numeric, rel))
    store.zero_grad()
    return results
