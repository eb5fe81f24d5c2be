"""Trainable layers: Linear, two-layer MLP, GRU cell, and the CharCNN name
encoder.  Parameters carry hierarchical names so checkpoints are flat maps."""

from __future__ import annotations

import string

import numpy as np

from . import tensor as T

# 70 rows: pad + unknown + lowercase + digits + punctuation
PAD_CHAR = "\x00"
UNK_CHAR = "\x01"
CHARSET = PAD_CHAR + UNK_CHAR + string.ascii_lowercase + string.digits + string.punctuation
CHAR_INDEX = {c: i for i, c in enumerate(CHARSET)}

MAX_NAME_CHARS = 32
CHAR_EMBED_DIM = 16
EMBED_INIT = 0.05


class Linear:
    def __init__(self, rng, n_in: int, n_out: int, prefix: str, bias: bool = True):
        if n_in <= 0 or n_out <= 0:
            raise ValueError(f"linear dims must be positive, got {n_in}x{n_out}")
        self.w = T.Parameter(T.glorot_uniform(rng, (n_in, n_out), n_in, n_out), f"{prefix}.weight")
        self.b = T.Parameter(np.zeros(n_out), f"{prefix}.bias") if bias else None

    def __call__(self, x: T.Tensor) -> T.Tensor:
        out = T.matmul(x, self.w.tensor)
        if self.b is not None:
            out = T.add(out, self.b.tensor)
        return out

    def parameters(self):
        return [self.w] + ([self.b] if self.b is not None else [])


class MLP:
    """One hidden relu layer; used by the readout heads."""

    def __init__(self, rng, n_in: int, n_hidden: int, n_out: int, prefix: str):
        self.fc1 = Linear(rng, n_in, n_hidden, f"{prefix}.fc1")
        self.fc2 = Linear(rng, n_hidden, n_out, f"{prefix}.fc2")

    def __call__(self, x: T.Tensor) -> T.Tensor:
        return self.fc2(T.relu(self.fc1(x)))

    def parameters(self):
        return self.fc1.parameters() + self.fc2.parameters()


class GRUCell:
    """Gates in (reset, update, candidate) order; biases start at zero."""

    def __init__(self, rng, n_in: int, n_hidden: int, prefix: str):
        if n_in <= 0 or n_hidden <= 0:
            raise ValueError(f"gru dims must be positive, got {n_in}, {n_hidden}")
        self.n_hidden = n_hidden
        self.w_ih = T.Parameter(
            T.glorot_uniform(rng, (n_in, 3 * n_hidden), n_in, 3 * n_hidden), f"{prefix}.w_ih"
        )
        self.w_hh = T.Parameter(
            T.glorot_uniform(rng, (n_hidden, 3 * n_hidden), n_hidden, 3 * n_hidden), f"{prefix}.w_hh"
        )
        self.b_ih = T.Parameter(np.zeros(3 * n_hidden), f"{prefix}.b_ih")
        self.b_hh = T.Parameter(np.zeros(3 * n_hidden), f"{prefix}.b_hh")

    def __call__(self, x: T.Tensor, h: T.Tensor) -> T.Tensor:
        H = self.n_hidden
        gi = T.add(T.matmul(x, self.w_ih.tensor), self.b_ih.tensor)
        gh = T.add(T.matmul(h, self.w_hh.tensor), self.b_hh.tensor)
        r = T.sigmoid(T.add(gi[..., 0:H], gh[..., 0:H]))
        z = T.sigmoid(T.add(gi[..., H : 2 * H], gh[..., H : 2 * H]))
        n = T.tanh(T.add(gi[..., 2 * H : 3 * H], T.mul(r, gh[..., 2 * H : 3 * H])))
        return T.add(T.mul(1.0 - z, n), T.mul(z, h))

    def parameters(self):
        return [self.w_ih, self.w_hh, self.b_ih, self.b_hh]


def encode_chars(name: str, max_chars: int = MAX_NAME_CHARS) -> np.ndarray:
    """Fixed-length char-id row; lowercased, truncated, padded with PAD."""
    ids = np.zeros(max_chars, dtype=np.intp)
    for i, ch in enumerate(name.lower()[:max_chars]):
        ids[i] = CHAR_INDEX.get(ch, CHAR_INDEX[UNK_CHAR])
    return ids


class CharCNN:
    """Two width-3 conv layers (32 then 64 channels) with relu and max-pool.

    Names are always padded to the same fixed length so an embedding depends
    on the string alone, never on what else is in the batch.
    """

    def __init__(self, rng, out_dim: int = 64, prefix: str = "charcnn"):
        self.out_dim = out_dim
        self.char_table = T.Parameter(
            rng.uniform(-EMBED_INIT, EMBED_INIT, size=(len(CHARSET), CHAR_EMBED_DIM)),
            f"{prefix}.chars",
        )
        self.k1 = T.Parameter(
            T.glorot_uniform(rng, (3, CHAR_EMBED_DIM, 32), 3 * CHAR_EMBED_DIM, 32),
            f"{prefix}.conv1.weight",
        )
        self.b1 = T.Parameter(np.zeros(32), f"{prefix}.conv1.bias")
        self.k2 = T.Parameter(
            T.glorot_uniform(rng, (3, 32, out_dim), 3 * 32, out_dim), f"{prefix}.conv2.weight"
        )
        self.b2 = T.Parameter(np.zeros(out_dim), f"{prefix}.conv2.bias")

    def __call__(self, names: list[str]) -> T.Tensor:
        ids = np.stack([encode_chars(n) for n in names])
        emb = T.gather(self.char_table.tensor, ids)
        h = T.relu(T.conv1d(emb, self.k1.tensor, self.b1.tensor))
        h = T.relu(T.conv1d(h, self.k2.tensor, self.b2.tensor))
        return T.reduce_max(h, axis=1)

    def parameters(self):
        return [self.char_table, self.k1, self.b1, self.k2, self.b2]
