"""Message passing over typed directed multigraphs: GGNN, RGCN, DTNN.

All variants share the schedule: for each round, every node sums messages
from its incoming edges (one learned transform per edge type), then applies
the variant's update to its previous state.  Parameters are shared across
rounds.  Reverse edge types are separate types with their own transforms,
so information flows both ways when the graph carries them.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import graph as gr
from . import layers as L
from . import tensor as T

GGNN = "ggnn"
RGCN = "rgcn"
DTNN = "dtnn"
VARIANTS = (GGNN, RGCN, DTNN)

DEFAULT_ROUNDS = 8
EDGE_VECTOR_DIM = 16
FACTOR_DIM = 64


@dataclass
class GnnState:
    """States for every round: states[0] is h^0, states[-1] is h^T."""

    ids: list[int]
    states: list[T.Tensor]

    @property
    def rounds(self) -> int:
        return len(self.states) - 1

    @property
    def initial(self) -> T.Tensor:
        return self.states[0]

    @property
    def final(self) -> T.Tensor:
        return self.states[-1]

    def row_of(self, node_id: int) -> int:
        return self.ids.index(node_id)


class GnnModel:
    """One message transform per edge type plus a variant-specific update."""

    def __init__(self, rng, variant: str, edge_types, hidden: int = 64):
        if variant not in VARIANTS:
            raise ValueError(f"unknown gnn variant {variant!r}")
        if hidden <= 0:
            raise ValueError(f"hidden width must be positive, got {hidden}")
        self.variant = variant
        self.hidden = hidden
        self.edge_types = sorted(set(edge_types))
        self.edge_params: dict[str, dict] = {}
        if variant == GGNN:
            for t in self.edge_types:
                self.edge_params[t] = {
                    "w": T.Parameter(
                        T.glorot_uniform(rng, (hidden, hidden), hidden, hidden),
                        f"ggnn.edge.{t}.weight",
                    ),
                    "b": T.Parameter(np.zeros(hidden), f"ggnn.edge.{t}.bias"),
                }
            self.gru = L.GRUCell(rng, hidden, hidden, "ggnn.gru")
        elif variant == RGCN:
            self.self_weight = T.Parameter(
                T.glorot_uniform(rng, (hidden, hidden), hidden, hidden), "rgcn.self.weight"
            )
            for t in self.edge_types:
                self.edge_params[t] = {
                    "w": T.Parameter(
                        T.glorot_uniform(rng, (hidden, hidden), hidden, hidden),
                        f"rgcn.edge.{t}.weight",
                    )
                }
        else:
            for t in self.edge_types:
                self.edge_params[t] = {
                    "e": T.Parameter(
                        rng.uniform(-L.EMBED_INIT, L.EMBED_INIT, size=EDGE_VECTOR_DIM),
                        f"dtnn.edge.{t}.vector",
                    )
                }
            self.cf = L.Linear(rng, hidden, FACTOR_DIM, "dtnn.cf")
            self.df = L.Linear(rng, EDGE_VECTOR_DIM, FACTOR_DIM, "dtnn.df")
            self.fc = L.Linear(rng, FACTOR_DIM, hidden, "dtnn.fc", bias=False)

    def parameters(self) -> list[T.Parameter]:
        out: list[T.Parameter] = []
        for t in self.edge_types:
            out.extend(self.edge_params[t].values())
        if self.variant == GGNN:
            out.extend(self.gru.parameters())
        elif self.variant == RGCN:
            out.append(self.self_weight)
        else:
            out.extend(self.cf.parameters() + self.df.parameters() + self.fc.parameters())
        return out


def count_parameters(model: GnnModel) -> int:
    return sum(p.values.size for p in model.parameters())


def _edge_plan(g: gr.CodeGraph, ids: list[int], model: GnnModel):
    """Per edge type: (source rows, destination rows), rows into the id order."""
    pos = {nid: i for i, nid in enumerate(ids)}
    grouped: dict[str, tuple[list[int], list[int]]] = {}
    for src, dst, etype in g.edges:
        if etype not in model.edge_params:
            raise ValueError(f"edge type {etype!r} not covered by the model")
        rows = grouped.setdefault(etype, ([], []))
        rows[0].append(pos[src])
        rows[1].append(pos[dst])
    return {
        t: (np.array(s, dtype=np.intp), np.array(d, dtype=np.intp))
        for t, (s, d) in sorted(grouped.items())
    }


def _ggnn_round(model, h, plan, n):
    m = T.Tensor(np.zeros((n, model.hidden)))
    for etype, (src, dst) in plan.items():
        p = model.edge_params[etype]
        msg = T.add(T.matmul(T.gather(h, src), p["w"].tensor), p["b"].tensor)
        m = T.add(m, T.segment_sum(msg, dst, n))
    return model.gru(m, h)


def _rgcn_round(model, h, plan, n):
    acc = T.matmul(h, model.self_weight.tensor)
    for etype, (src, dst) in plan.items():
        counts = np.bincount(dst, minlength=n).astype(float)
        scale = (1.0 / counts[dst])[:, None]
        msg = T.mul(T.matmul(T.gather(h, src), model.edge_params[etype]["w"].tensor), scale)
        acc = T.add(acc, T.segment_sum(msg, dst, n))
    return T.relu(acc)


def _dtnn_round(model, h, plan, n):
    m = T.Tensor(np.zeros((n, model.hidden)))
    for etype, (src, dst) in plan.items():
        f_h = model.cf(T.gather(h, src))
        f_e = model.df(T.reshape(model.edge_params[etype]["e"].tensor, (1, EDGE_VECTOR_DIM)))
        msg = T.tanh(model.fc(T.mul(f_h, f_e)))
        m = T.add(m, T.segment_sum(msg, dst, n))
    return T.add(h, m)


_ROUND_FNS = {GGNN: _ggnn_round, RGCN: _rgcn_round, DTNN: _dtnn_round}


def message_pass(
    g: gr.CodeGraph, ids: list[int], h0: T.Tensor, model: GnnModel, rounds: int = DEFAULT_ROUNDS
) -> GnnState:
    """Run `rounds` rounds; messages travel along edge direction (w->v feeds v)."""
    if rounds < 0:
        raise ValueError(f"rounds must be non-negative, got {rounds}")
    if set(ids) != set(g.nodes):
        missing = sorted(set(g.nodes) - set(ids))
        extra = sorted(set(ids) - set(g.nodes))
        raise ValueError(f"h0 does not cover the graph: missing {missing}, extra {extra}")
    n = len(ids)
    if h0.values.shape != (n, model.hidden):
        raise T.ShapeError(f"h0 shape {h0.values.shape} != ({n}, {model.hidden})")
    plan = _edge_plan(g, ids, model)
    step = _ROUND_FNS[model.variant]
    states = [h0]
    for _ in range(rounds):
        states.append(step(model, states[-1], plan, n))
    return GnnState(ids=list(ids), states=states)
