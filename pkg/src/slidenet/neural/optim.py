"""Adam with an exponentially decaying learning rate."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .tensor import Tensor


def exp_decay_lr(step: int, total_steps: int, lr_start: float = 5e-3, lr_end: float = 1e-5) -> float:
    """lr_start * (lr_end / lr_start) ** (step / total_steps)."""
    if total_steps <= 0:
        return lr_start
    return lr_start * (lr_end / lr_start) ** (min(step, total_steps) / total_steps)


@dataclass
class AdamState:
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


class Adam:
    def __init__(self, params: dict[str, Tensor], beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.params = params
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.state = AdamState(
            m={k: np.zeros_like(p.data) for k, p in params.items()},
            v={k: np.zeros_like(p.data) for k, p in params.items()},
        )

    def step(self, lr: float) -> None:
        st = self.state
        st.step += 1
        b1, b2 = self.beta1, self.beta2
        c1, c2 = 1 - b1 ** st.step, 1 - b2 ** st.step
        for k, p in self.params.items():
            g = p.grad
            if g is None:
                continue
            m, v = st.m[k], st.v[k]
            m *= b1
            m += (1 - b1) * g
            v *= b2
            v += (1 - b2) * g * g
            p.data -= lr * (m / c1) / (np.sqrt(v / c2) + self.eps)

    def state_arrays(self) -> dict[str, np.ndarray]:
        out = {f"adam_m/{k}": v for k, v in self.state.m.items()}
        out.update({f"adam_v/{k}": v for k, v in self.state.v.items()})
        out["adam_step"] = np.array([self.state.step], dtype=np.float64)
        return out

    def load_state_arrays(self, arrays: dict[str, np.ndarray]) -> None:
        for k in self.params:
            self.state.m[k] = np.array(arrays[f"adam_m/{k}"], dtype=np.float64)
            self.state.v[k] = np.array(arrays[f"adam_v/{k}"], dtype=np.float64)
        self.state.step = int(arrays["adam_step"][0])
