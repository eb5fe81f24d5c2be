"""Initial hidden states h^0 for every graph node, width 64.

Syntax nodes get a learned embedding of their construct label.  Variable and
cache nodes get linear(concat(type_embedding, name_embedding)) where the name
embedding is either a CharCNN over the raw characters (charcnn/gsc
strategies) or the mean of closed-vocabulary word embeddings (closed_vocab).
Special tokens (<FILL-IN-THE-BLANK>, <NAME-ME>) have dedicated vectors.
"""

from __future__ import annotations

from collections import Counter

import numpy as np

from . import graph as gr
from . import layers as L
from . import parser as ps
from . import tensor as T
from .gsc import split_name

UNK = "<UNK>"
EOS = "<EOS>"

CLOSED_VOCAB = "closed_vocab"
CHARCNN = "charcnn"
GSC = "gsc"
STRATEGIES = (CLOSED_VOCAB, CHARCNN, GSC)

HIDDEN = 64
TYPE_DIM = 16
DEFAULT_VOCAB_SIZE = 5000


class VocabTable:
    """word -> index with reserved <UNK>=0 and <EOS>=1; built from training data."""

    def __init__(self, words: list[str]):
        self.words = [UNK, EOS] + list(words)
        self.index_of = {w: i for i, w in enumerate(self.words)}
        if len(self.index_of) != len(self.words):
            raise ValueError("duplicate words in vocabulary")

    @classmethod
    def build(cls, words, size: int = DEFAULT_VOCAB_SIZE) -> "VocabTable":
        counts = Counter(words)
        counts.pop(UNK, None)
        counts.pop(EOS, None)
        ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
        return cls([w for w, _ in ranked[:size]])

    @property
    def size(self) -> int:
        return len(self.words)

    @property
    def unk(self) -> int:
        return 0

    @property
    def eos(self) -> int:
        return 1

    def index(self, word: str) -> int:
        return self.index_of.get(word, 0)

    def __contains__(self, word: str) -> bool:
        return word in self.index_of

    def to_list(self) -> list[str]:
        return list(self.words[2:])

    @classmethod
    def from_list(cls, words) -> "VocabTable":
        return cls(list(words))


class TypeTable:
    """type name -> index with reserved <UNK_TYPE>=0 and CACHE_NODE=1."""

    RESERVED = [gr.UNK_TYPE, gr.CACHE_NODE_TYPE]

    def __init__(self, names: list[str]):
        self.names = list(self.RESERVED) + [n for n in names if n not in self.RESERVED]
        self.index_of = {n: i for i, n in enumerate(self.names)}

    @classmethod
    def build(cls, names, size: int = 200) -> "TypeTable":
        counts = Counter(n for n in names if n)
        for r in cls.RESERVED:
            counts.pop(r, None)
        ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
        return cls([n for n, _ in ranked[:size]])

    @property
    def size(self) -> int:
        return len(self.names)

    def index(self, name) -> int:
        return self.index_of.get(name, 0)

    def to_list(self) -> list[str]:
        return list(self.names[len(self.RESERVED) :])

    @classmethod
    def from_list(cls, names) -> "TypeTable":
        return cls(list(names))


class NodeEmbedder:
    SPECIAL_CONSTRUCTS = (ps.C_FITB, ps.C_NAMEME)

    def __init__(self, rng, strategy: str, vocab: VocabTable, types: TypeTable,
                 constructs=ps.ALL_CONSTRUCTS, hidden: int = HIDDEN, prefix: str = "embed"):
        if strategy not in STRATEGIES:
            raise ValueError(f"unknown embedding strategy {strategy!r}")
        self.strategy = strategy
        self.vocab = vocab
        self.types = types
        self.hidden = hidden
        self.constructs = tuple(constructs)
        self.construct_index = {c: i for i, c in enumerate(self.constructs)}
        self.construct_table = T.Parameter(
            rng.uniform(-L.EMBED_INIT, L.EMBED_INIT, size=(len(self.constructs), hidden)),
            f"{prefix}.construct",
        )
        self.type_table = T.Parameter(
            rng.uniform(-L.EMBED_INIT, L.EMBED_INIT, size=(types.size, TYPE_DIM)),
            f"{prefix}.type",
        )
        self.special_table = T.Parameter(
            rng.uniform(-L.EMBED_INIT, L.EMBED_INIT, size=(len(self.SPECIAL_CONSTRUCTS), hidden)),
            f"{prefix}.special",
        )
        self.special_index = {c: i for i, c in enumerate(self.SPECIAL_CONSTRUCTS)}
        if strategy == CLOSED_VOCAB:
            self.word_table = T.Parameter(
                rng.uniform(-L.EMBED_INIT, L.EMBED_INIT, size=(vocab.size, hidden)),
                f"{prefix}.word",
            )
            self.charcnn = None
        else:
            self.word_table = None
            self.charcnn = L.CharCNN(rng, out_dim=hidden, prefix=f"{prefix}.charcnn")
        self.name_linear = L.Linear(rng, TYPE_DIM + hidden, hidden, f"{prefix}.name_linear")

    def parameters(self):
        params = [self.construct_table, self.type_table, self.special_table]
        if self.word_table is not None:
            params.append(self.word_table)
        if self.charcnn is not None:
            params.extend(self.charcnn.parameters())
        params.extend(self.name_linear.parameters())
        return params

    def name_embedding(self, names: list[str]) -> T.Tensor:
        """(len(names), hidden) matrix of name vectors under the strategy."""
        if self.charcnn is not None:
            return self.charcnn(names)
        rows = []
        for name in names:
            words = split_name(name).words or (UNK,)
            idx = np.array([self.vocab.index(w) for w in words], dtype=np.intp)
            rows.append(T.reduce_mean(T.gather(self.word_table.tensor, idx), axis=0))
        return T.stack(rows, axis=0)

    def charcnn_embed(self, name: str) -> T.Tensor:
        if self.charcnn is None:
            raise ValueError("closed_vocab strategy has no CharCNN")
        return self.charcnn([name])[0]

    def init_hidden_states(self, g: gr.CodeGraph):
        """(sorted node ids, Tensor (N, hidden)) of initial states.

        Distinct construct labels, (name, type) pairs and special tokens are
        embedded once and scattered back to nodes with a gather, so repeated
        names cost one CharCNN pass.
        """
        ids = sorted(g.nodes)
        construct_rows: list[int] = []
        named_pairs: list[tuple] = []
        special_rows: list[int] = []
        seen: dict = {}
        plan: list[tuple[str, int]] = []
        for nid in ids:
            n = g.nodes[nid]
            if n.construct in self.special_index:
                key = ("special", self.special_index[n.construct])
                if key not in seen:
                    seen[key] = len(special_rows)
                    special_rows.append(key[1])
            elif n.kind in (gr.VARIABLE, gr.CACHE):
                key = ("named", (n.name or "", n.type_name))
                if key not in seen:
                    seen[key] = len(named_pairs)
                    named_pairs.append(key[1])
            else:
                if n.construct not in self.construct_index:
                    raise ValueError(f"unknown construct label {n.construct!r}")
                key = ("construct", self.construct_index[n.construct])
                if key not in seen:
                    seen[key] = len(construct_rows)
                    construct_rows.append(key[1])
            plan.append((key[0], seen[key]))
        parts = []
        base = {}
        if construct_rows:
            base["construct"] = 0
            parts.append(T.gather(self.construct_table.tensor, np.array(construct_rows, dtype=np.intp)))
        if named_pairs:
            base["named"] = len(construct_rows)
            type_idx = np.array([self.types.index(t) for _, t in named_pairs], dtype=np.intp)
            type_vecs = T.gather(self.type_table.tensor, type_idx)
            name_vecs = self.name_embedding([name for name, _ in named_pairs])
            parts.append(self.name_linear(T.concat([type_vecs, name_vecs], axis=1)))
        if special_rows:
            base["special"] = len(construct_rows) + len(named_pairs)
            parts.append(T.gather(self.special_table.tensor, np.array(special_rows, dtype=np.intp)))
        full = T.concat(parts, axis=0) if len(parts) > 1 else parts[0]
        rows = np.array([base[kind] + i for kind, i in plan], dtype=np.intp)
        return ids, T.gather(full, rows)
