"""Prediction heads: FITB attention scoring over nodes, and the naming
decoder (1-layer GRU, optionally mixing a pointer over cache nodes with a
closed-vocabulary softmax via a sentinel)."""

from __future__ import annotations

import numpy as np

from .. import graph as gr
from .. import gsc
from .. import layers as L
from .. import tensor as T
from ..embed import EOS, VocabTable
from ..gnn import GGNN, VARIANTS, GnnState
from .instances import MAX_TARGET_WORDS

DECODE_CLOSED = "closed_vocab"
DECODE_CHARCNN = "charcnn_vocab"
DECODE_POINTER = "pointer_sentinel"
DECODE_GSC = "gsc"
DECODERS = (DECODE_CLOSED, DECODE_CHARCNN, DECODE_POINTER, DECODE_GSC)

MIX_NORMALIZED = "normalized"
MIX_PAPER_LITERAL = "paper-literal"
MIXTURES = (MIX_NORMALIZED, MIX_PAPER_LITERAL)

# 8 words of unroll plus the terminating <EOS> step
DECODE_STEPS = MAX_TARGET_WORDS + 1

_EPS = 1e-7


class FitbReadout:
    """Per-node blank-fit score in (0, 1).

    The ggnn head gates f2(h^T) by sigma(f1(h^T, h^0)); both factors pass
    through a sigmoid so the product is a probability.  The other variants
    use a single hidden-layer MLP on h^T.
    """

    def __init__(self, rng, variant: str, hidden: int = 64, prefix: str = "fitb"):
        if variant not in VARIANTS:
            raise ValueError(f"unknown gnn variant {variant!r}")
        self.variant = variant
        if variant == GGNN:
            self.f1 = L.MLP(rng, 2 * hidden, hidden, 1, f"{prefix}.f1")
            self.f2 = L.MLP(rng, hidden, hidden, 1, f"{prefix}.f2")
        else:
            self.f = L.MLP(rng, hidden, hidden, 1, f"{prefix}.f")

    def __call__(self, state: GnnState) -> T.Tensor:
        if self.variant == GGNN:
            both = T.concat([state.final, state.initial], axis=1)
            scores = T.mul(T.sigmoid(self.f1(both)), T.sigmoid(self.f2(state.final)))
        else:
            scores = T.sigmoid(self.f(state.final))
        return T.reshape(scores, (len(state.ids),))

    def parameters(self):
        if self.variant == GGNN:
            return self.f1.parameters() + self.f2.parameters()
        return self.f.parameters()


def fitb_loss(scores: T.Tensor, ids: list[int], correct_nodes) -> T.Tensor:
    """Mean binary cross entropy over all nodes; label 1 on the answer set."""
    v = scores.values
    if np.any(v < 0.0) or np.any(v > 1.0):
        raise ValueError("fitb scores must lie in (0, 1)")
    labels = np.array([1.0 if nid in correct_nodes else 0.0 for nid in ids])
    p = T.clip(scores, _EPS, 1.0 - _EPS)
    ll = T.add(T.mul(labels, T.log(p)), T.mul(1.0 - labels, T.log(T.add(1.0, -p))))
    return T.mul(T.reduce_mean(ll), -1.0)


def fitb_predict(state: GnnState, scores: T.Tensor, g: gr.CodeGraph) -> list[tuple[int, float]]:
    """Candidate variable nodes ranked by score; ties go to the smaller id."""
    ranked = sorted(
        (
            (nid, float(scores.values[row]))
            for row, nid in enumerate(state.ids)
            if g.nodes[nid].kind == gr.VARIABLE
        ),
        key=lambda p: (-p[1], p[0]),
    )
    return ranked


class NameDecoder:
    """Fixed-unroll GRU over words.

    Previous words enter as a closed-vocabulary embedding (closed_vocab) or
    a CharCNN encoding (all other decoders); a learned start vector seeds
    step one.  Pointer decoders mix a softmax attention over cache-node
    states (plus a sentinel) with the vocabulary softmax.
    """

    def __init__(
        self,
        rng,
        kind: str,
        vocab: VocabTable,
        hidden: int = 64,
        mixture: str = MIX_NORMALIZED,
        prefix: str = "decode",
    ):
        if kind not in DECODERS:
            raise ValueError(f"unknown decoder {kind!r}")
        if mixture not in MIXTURES:
            raise ValueError(f"unknown mixture {mixture!r}")
        self.kind = kind
        self.vocab = vocab
        self.hidden = hidden
        self.mixture = mixture
        self.sos = T.Parameter(
            rng.uniform(-L.EMBED_INIT, L.EMBED_INIT, size=(1, hidden)), f"{prefix}.sos"
        )
        self.gru = L.GRUCell(rng, hidden, hidden, f"{prefix}.gru")
        self.out = L.Linear(rng, hidden, vocab.size, f"{prefix}.out")
        if kind == DECODE_CLOSED:
            self.word_in = T.Parameter(
                rng.uniform(-L.EMBED_INIT, L.EMBED_INIT, size=(vocab.size, hidden)),
                f"{prefix}.word_in",
            )
        else:
            self.charcnn = L.CharCNN(rng, hidden, f"{prefix}.charcnn")
        if self.pointer:
            self.key = L.Linear(rng, hidden, hidden, f"{prefix}.key")
            self.sentinel = T.Parameter(
                rng.uniform(-L.EMBED_INIT, L.EMBED_INIT, size=(1, hidden)), f"{prefix}.sentinel"
            )

    @property
    def pointer(self) -> bool:
        return self.kind in (DECODE_POINTER, DECODE_GSC)

    def parameters(self):
        params = [self.sos] + self.gru.parameters() + self.out.parameters()
        if self.kind == DECODE_CLOSED:
            params.append(self.word_in)
        else:
            params += self.charcnn.parameters()
        if self.pointer:
            params += self.key.parameters() + [self.sentinel]
        return params

    def embed_word(self, word: str) -> T.Tensor:
        if self.kind == DECODE_CLOSED:
            return T.gather(self.word_in.tensor, np.array([self.vocab.index(word)], dtype=np.intp))
        return self.charcnn([word])

    def initial_hidden(self, state: GnnState, name_me_nodes) -> T.Tensor:
        rows = [state.ids.index(nid) for nid in sorted(name_me_nodes)]
        if not rows:
            raise ValueError("no <NAME-ME> nodes to decode from")
        return T.reduce_mean(T.gather(state.final, np.array(rows, dtype=np.intp)), axis=0, keepdims=True)

    def cache_context(self, g: gr.CodeGraph, state: GnnState):
        """Cache words paired with their h^T rows, sorted by word."""
        pairs = sorted((n.name, state.ids.index(n.id)) for n in gsc.cache_nodes(g))
        words = [w for w, _ in pairs]
        rows = np.array([r for _, r in pairs], dtype=np.intp)
        return words, rows, state.final

    def step(self, x: T.Tensor, h: T.Tensor, ctx=None):
        """One unroll step: returns (next hidden, words, probability Tensor)."""
        h2 = self.gru(x, h)
        vocab_probs = T.softmax(self.out(h2), axis=1)
        if not self.pointer:
            return h2, list(self.vocab.words), T.reshape(vocab_probs, (self.vocab.size,))
        cache_words, cache_rows, h_final = ctx
        n_cache = len(cache_words)
        keys_in = T.concat([T.gather(h_final, cache_rows), self.sentinel.tensor], axis=0)
        keys = self.key(keys_in)
        graph_logits = T.matmul(keys, T.reshape(h2, (self.hidden, 1)))
        p_graph = T.softmax(graph_logits, axis=0)  # (n_cache + 1, 1); sentinel last

        union = list(self.vocab.words) + sorted(set(cache_words) - set(self.vocab.words))
        pos = {w: i for i, w in enumerate(union)}
        p_sentinel = p_graph[n_cache : n_cache + 1]
        padded_vocab = T.reshape(vocab_probs, (self.vocab.size, 1))
        if len(union) > self.vocab.size:
            zeros = T.Tensor(np.zeros((len(union) - self.vocab.size, 1)))
            padded_vocab = T.concat([padded_vocab, zeros], axis=0)
        if n_cache:
            idx = np.array([pos[w] for w in cache_words], dtype=np.intp)
            pointer_part = T.segment_sum(p_graph[0:n_cache], idx, len(union))
        else:
            pointer_part = T.Tensor(np.zeros((len(union), 1)))
        if self.mixture == MIX_NORMALIZED:
            combined = T.add(pointer_part, T.mul(p_sentinel, padded_vocab))
        else:
            # paper-literal form leaks mass, so renormalize afterwards
            raw = T.add(
                T.mul(p_sentinel, pointer_part), T.mul(T.add(1.0, -p_sentinel), padded_vocab)
            )
            combined = T.div(raw, T.reduce_sum(raw))
        return h2, union, T.reshape(combined, (len(union),))


def teacher_distributions(decoder: NameDecoder, state: GnnState, g: gr.CodeGraph, name_me_nodes, target_words):
    """Per-step distributions with the true previous word fed at each step."""
    ctx = decoder.cache_context(g, state) if decoder.pointer else None
    h = decoder.initial_hidden(state, name_me_nodes)
    x = decoder.sos.tensor
    dists = []
    for word in target_words:
        h, words, probs = decoder.step(x, h, ctx)
        dists.append((words, probs))
        x = decoder.embed_word(word)
    return dists


def varnaming_loss(distributions, target_words) -> T.Tensor:
    """Sum of -log P(target word) per step; requires one distribution per
    target entry (EOS included).  A target absent from a distribution's
    support falls back to the <UNK> entry at position 0."""
    if len(distributions) < len(target_words):
        raise ValueError(
            f"{len(distributions)} steps cannot cover {len(target_words)} target words"
        )
    picked = []
    for (words, probs), target in zip(distributions, target_words):
        try:
            i = words.index(target)
        except ValueError:
            i = 0
        picked.append(T.clip(probs[i : i + 1], 1e-12, 2.0))
    return T.mul(T.reduce_sum(T.log(T.concat(picked, axis=0))), -1.0)


def decode_greedy(decoder: NameDecoder, state: GnnState, g: gr.CodeGraph, name_me_nodes, steps: int = DECODE_STEPS):
    """Fixed unroll feeding back the argmax word; returns (distributions, words)."""
    ctx = decoder.cache_context(g, state) if decoder.pointer else None
    h = decoder.initial_hidden(state, name_me_nodes)
    x = decoder.sos.tensor
    dists, seq = [], []
    for _ in range(steps):
        h, words, probs = decoder.step(x, h, ctx)
        dists.append((words, probs))
        word = words[int(np.argmax(probs.values))]
        seq.append(word)
        x = decoder.embed_word(word)
    return dists, seq


def beam_search(
    decoder: NameDecoder,
    state: GnnState,
    g: gr.CodeGraph,
    name_me_nodes,
    beam_width: int = 5,
    steps: int = DECODE_STEPS,
) -> list[tuple[tuple[str, ...], float]]:
    """Top sequences by log-probability; EOS ends a sequence and is not
    included in its words.  Results are deduplicated and sorted."""
    if beam_width < 1:
        raise ValueError(f"beam width must be >= 1, got {beam_width}")
    with T.no_grad():
        ctx = decoder.cache_context(g, state) if decoder.pointer else None
        h0 = decoder.initial_hidden(state, name_me_nodes)
        live = [(0.0, (), h0, decoder.sos.tensor)]
        done: list[tuple[float, tuple[str, ...]]] = []
        for _ in range(steps):
            if not live:
                break
            grown = []
            for lp, words, h, x in live:
                h2, support, probs = decoder.step(x, h, ctx)
                logp = np.log(np.clip(probs.values, 1e-300, None))
                for j in np.argsort(-logp, kind="stable")[:beam_width]:
                    grown.append((lp + float(logp[j]), words, support[int(j)], h2))
            grown.sort(key=lambda c: (-c[0], c[1], c[2]))
            live = []
            for lp, words, word, h2 in grown[:beam_width]:
                if word == EOS:
                    done.append((lp, words))
                else:
                    live.append((lp, words + (word,), h2, decoder.embed_word(word)))
        done.extend((lp, words) for lp, words, _, _ in live)  # ran out of steps
    best: dict[tuple[str, ...], float] = {}
    for lp, words in done:
        if words not in best or lp > best[words]:
            best[words] = lp
    ranked = sorted(best.items(), key=lambda kv: (-kv[1], kv[0]))
    return [(words, lp) for words, lp in ranked[:beam_width]]
