"""Parameter storage and the dense layers the predictor is assembled from."""

from __future__ import annotations

import numpy as np

from .tensor import Tensor, batchnorm, linear, relu

BN_MOMENTUM = 0.9


class ParamStore:
    """Named trainable tensors plus non-trainable buffers (running stats, scales)."""

    def __init__(self):
        self.params: dict[str, Tensor] = {}
        self.buffers: dict[str, np.ndarray] = {}

    def add(self, name: str, value: np.ndarray) -> Tensor:
        if name in self.params:
            raise KeyError(f"parameter {name!r} already exists")
        t = Tensor(value, requires_grad=True)
        self.params[name] = t
        return t

    def add_buffer(self, name: str, value: np.ndarray) -> None:
        self.buffers[name] = np.asarray(value, dtype=np.float64)

    def zero_grad(self):
        for p in self.params.values():
            p.grad = None

    def count(self) -> int:
        return int(sum(p.data.size for p in self.params.values()))

    def state(self) -> dict[str, np.ndarray]:
        out = {f"param/{k}": v.data for k, v in self.params.items()}
        out.update({f"buffer/{k}": v for k, v in self.buffers.items()})
        return out

    def load_state(self, state: dict[str, np.ndarray]) -> None:
        for k, p in self.params.items():
            arr = state[f"param/{k}"]
            if arr.shape != p.data.shape:
                raise ValueError(f"parameter {k}: checkpoint shape {arr.shape} != model shape {p.data.shape}")
            p.data = np.array(arr, dtype=np.float64)
        for k, b in self.buffers.items():
            arr = state[f"buffer/{k}"]
            if arr.shape != b.shape:
                raise ValueError(f"buffer {k}: checkpoint shape {arr.shape} != model shape {b.shape}")
            self.buffers[k] = np.array(arr, dtype=np.float64)


class Linear:
    def __init__(self, store: ParamStore, name: str, n_in: int, n_out: int, rng: np.random.Generator):
        # He initialization for ReLU stacks
        self.w = store.add(f"{name}.w", rng.normal(0.0, np.sqrt(2.0 / n_in), size=(n_in, n_out)))
        self.b = store.add(f"{name}.b", np.zeros(n_out))
        self.n_in, self.n_out = n_in, n_out

    def __call__(self, x: Tensor) -> Tensor:
        return linear(x, self.w, self.b)


class BatchNorm:
    """Column batch norm; training updates running stats by EMA (momentum 0.9)."""

    def __init__(self, store: ParamStore, name: str, n: int, eps: float = 1e-5):
        self.store, self.name, self.eps = store, name, eps
        self.gamma = store.add(f"{name}.gamma", np.ones(n))
        self.beta = store.add(f"{name}.beta", np.zeros(n))
        store.add_buffer(f"{name}.mean", np.zeros(n))
        store.add_buffer(f"{name}.var", np.ones(n))

    def __call__(self, x: Tensor, training: bool) -> Tensor:
        b = self.store.buffers
        if not training:
            return batchnorm(x, self.gamma, self.beta, self.eps, running=(b[f"{self.name}.mean"], b[f"{self.name}.var"]))
        out, mean, var = batchnorm(x, self.gamma, self.beta, self.eps)
        m = BN_MOMENTUM
        b[f"{self.name}.mean"] = m * b[f"{self.name}.mean"] + (1 - m) * mean
        b[f"{self.name}.var"] = m * b[f"{self.name}.var"] + (1 - m) * var
        return out


class MLP:
    """Stack of Linear -> BatchNorm -> ReLU; the last layer is bare unless ``norm_last``."""

    def __init__(self, store: ParamStore, name: str, widths: list[int], rng: np.random.Generator,
                 norm_last: bool = False, batch_norm: bool = True):
        if len(widths) < 2:
            raise ValueError(f"{name}: need input and output widths, got {widths}")
        self.layers = []
        n = len(widths) - 1
        for i in range(n):
            lin = Linear(store, f"{name}.{i}", widths[i], widths[i + 1], rng)
            hidden = i < n - 1 or norm_last
            bn = BatchNorm(store, f"{name}.{i}.bn", widths[i + 1]) if hidden and batch_norm else None
            self.layers.append((lin, bn, hidden))

    def __call__(self, x: Tensor, training: bool, keep: list | None = None) -> Tensor:
        for lin, bn, hidden in self.layers:
            x = lin(x)
            if bn is not None:
                x = bn(x, training)
            if hidden:
                x = relu(x)
            if keep is not None:
                keep.append(x)
        return x

    @property
    def depth(self) -> int:
        return len(self.layers)
