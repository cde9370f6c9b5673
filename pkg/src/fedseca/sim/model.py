"""Flat-parameter classifiers with hand-written softmax cross-entropy gradients.

Parameter layout (row-major, concatenated):

* ``linear``: W (d, C), b (C)
* ``mlp``:    W1 (d, h), b1 (h), W2 (h, C), b2 (C), one hidden layer

The hidden activation is ``relu`` or ``tanh``. Training minimises mean
softmax cross-entropy.
"""

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Model:
    kind: str
    feature_dim: int
    n_classes: int
    hidden: int = 4
    activation: str = "relu"

    def __post_init__(self):
        if self.kind not in ("linear", "mlp"):
            raise ValueError(f"unknown model kind {self.kind!r}; expected 'linear' or 'mlp'")
        if self.activation not in ("relu", "tanh"):
            raise ValueError(f"unknown activation {self.activation!r}; expected 'relu' or 'tanh'")

    @property
    def n_params(self) -> int:
        d, c, h = self.feature_dim, self.n_classes, self.hidden
        if self.kind == "linear":
            return d * c + c
        return d * h + h + h * c + c

    def unpack(self, w: np.ndarray):
        d, c, h = self.feature_dim, self.n_classes, self.hidden
        if w.shape != (self.n_params,):
            raise ValueError(f"expected {self.n_params} parameters, got {w.shape}")
        if self.kind == "linear":
            return w[: d * c].reshape(d, c), w[d * c :]
        i = 0
        w1 = w[i : i + d * h].reshape(d, h); i += d * h
        b1 = w[i : i + h]; i += h
        w2 = w[i : i + h * c].reshape(h, c); i += h * c
        b2 = w[i : i + c]
        return w1, b1, w2, b2

    def init_weights(self, rng: np.random.Generator, scale: float = 0.1) -> np.ndarray:
        if self.kind == "linear":
            return np.zeros(self.n_params)
        return scale * rng.standard_normal(self.n_params)

    def logits(self, w: np.ndarray, x: np.ndarray) -> np.ndarray:
        p = self.unpack(w)
        if self.kind == "linear":
            return x @ p[0] + p[1]
        w1, b1, w2, b2 = p
        return self._act(x @ w1 + b1) @ w2 + b2

    def predict(self, w: np.ndarray, x: np.ndarray) -> np.ndarray:
        return np.argmax(self.logits(w, x), axis=1)

    def loss_and_grad(self, w: np.ndarray, x: np.ndarray, y: np.ndarray):
        """Mean softmax cross-entropy and its gradient with respect to ``w``."""
        n = x.shape[0]
        onehot = np.zeros((n, self.n_classes))
        onehot[np.arange(n), y] = 1.0
        if self.kind == "linear":
            wm, b = self.unpack(w)
            probs, loss = _softmax_ce(x @ wm + b, onehot)
            dz = (probs - onehot) / n
            return loss, np.concatenate([(x.T @ dz).ravel(), dz.sum(axis=0)])
        w1, b1, w2, b2 = self.unpack(w)
        pre = x @ w1 + b1
        hid = self._act(pre)
        probs, loss = _softmax_ce(hid @ w2 + b2, onehot)
        dz = (probs - onehot) / n
        dh = (dz @ w2.T) * self._act_grad(pre, hid)
        grad = np.concatenate([
            (x.T @ dh).ravel(), dh.sum(axis=0), (hid.T @ dz).ravel(), dz.sum(axis=0),
        ])
        return loss, grad

    def _act(self, pre: np.ndarray) -> np.ndarray:
        return np.maximum(pre, 0.0) if self.activation == "relu" else np.tanh(pre)

    def _act_grad(self, pre: np.ndarray, hid: np.ndarray) -> np.ndarray:
        # relu'(0) is taken as 0
        return (pre > 0).astype(float) if self.activation == "relu" else 1.0 - hid**2


def _softmax_ce(z: np.ndarray, onehot: np.ndarray):
    z = z - z.max(axis=1, keepdims=True)
    logsum = np.log(np.exp(z).sum(axis=1, keepdims=True))
    logp = z - logsum
    loss = float(-(onehot * logp).sum(axis=1).mean())
    return np.exp(logp), loss
