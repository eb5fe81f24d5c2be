"""Instance construction for both tasks: blank a name with a special token,
truncate the graph around the blanks, then augment/cache per configuration."""

from __future__ import annotations

import json
import random
from dataclasses import dataclass

from .. import augment as au
from .. import graph as gr
from .. import gsc
from .. import parser as ps
from ..embed import EOS

MAX_NODES = 500
MAX_TARGET_WORDS = 8

REPR_AST = "ast"
REPR_AUGAST = "augast"
REPRS = (REPR_AST, REPR_AUGAST)

TASK_FITB = "fitb"
TASK_VARNAMING = "varnaming"

_DATA_DECLS = (ps.C_VARDECL, ps.C_FIELD, ps.C_PARAM)


@dataclass
class FitbInstance:
    """A graph with one usage blanked; the other usages are the answer."""

    graph: gr.CodeGraph
    blank_node: int
    correct_nodes: set[int]

    def to_record(self) -> dict:
        rec = self.graph.to_record()
        rec["task"] = TASK_FITB
        rec["blank_node"] = self.blank_node
        rec["answer"] = sorted(self.correct_nodes)
        return rec

    @classmethod
    def from_record(cls, rec: dict) -> "FitbInstance":
        return cls(gr.CodeGraph.from_record(rec), rec["blank_node"], set(rec["answer"]))


@dataclass
class VarNamingInstance:
    """A graph with every occurrence of one name hidden; the words are the answer."""

    graph: gr.CodeGraph
    name_me_nodes: set[int]
    target_words: list[str]  # already truncated, ends with EOS

    def to_record(self) -> dict:
        rec = self.graph.to_record()
        rec["task"] = TASK_VARNAMING
        rec["name_me_nodes"] = sorted(self.name_me_nodes)
        rec["answer"] = self.target_words[:-1]
        return rec

    @classmethod
    def from_record(cls, rec: dict) -> "VarNamingInstance":
        return cls(
            gr.CodeGraph.from_record(rec), set(rec["name_me_nodes"]), list(rec["answer"]) + [EOS]
        )


def write_instances(instances, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for inst in instances:
            f.write(json.dumps(inst.to_record(), sort_keys=True) + "\n")


def read_instances(path) -> list:
    out = []
    with open(path, encoding="utf-8") as f:
        for line in f:
            if not line.strip():
                continue
            rec = json.loads(line)
            task = rec.get("task")
            if task == TASK_FITB:
                out.append(FitbInstance.from_record(rec))
            elif task == TASK_VARNAMING:
                out.append(VarNamingInstance.from_record(rec))
            else:
                raise ValueError(f"unknown task {task!r} in {path}")
    return out


def truncate_graph(g: gr.CodeGraph, centers, max_nodes: int = MAX_NODES) -> gr.CodeGraph:
    """Breadth-first ball around the centers, capped at max_nodes.

    Expansion ignores edge direction; within a level, smaller node ids win
    when the budget runs out.  Centers are always retained.
    """
    centers = set(centers)
    if not centers:
        raise ValueError("centers must be non-empty")
    missing = centers - set(g.nodes)
    if missing:
        raise ValueError(f"centers not in graph: {sorted(missing)}")
    if len(g.nodes) <= max_nodes:
        return g.copy()
    adj: dict[int, set[int]] = {nid: set() for nid in g.nodes}
    for s, d, _ in g.edges:
        adj[s].add(d)
        adj[d].add(s)
    keep = set(centers)
    level = sorted(centers)
    while level and len(keep) < max_nodes:
        frontier = sorted({m for v in level for m in adj[v]} - keep)
        level = frontier[: max_nodes - len(keep)]
        keep.update(level)
    return g.induced_subgraph(keep)


def _parents(g: gr.CodeGraph) -> dict[int, int]:
    return {c: p for p, kids in g.children.items() for c in kids}


def _occurrences(g: gr.CodeGraph) -> dict[int, list[int]]:
    """Declaration leaf id -> sorted occurrence ids (the leaf itself included)."""
    occ: dict[int, list[int]] = {}
    for use, decl in g.decl_of.items():
        occ.setdefault(decl, []).append(use)
    return {d: sorted(v) for d, v in occ.items()}


def _decl_category(g, parents, decl_id):
    p = parents.get(decl_id)
    return g.nodes[p].construct if p is not None else None


def _make_special(g: gr.CodeGraph, nid: int, construct: str, token: str, keep_type: bool) -> None:
    n = g.nodes[nid]
    n.kind = gr.SPECIAL
    n.construct = construct
    n.name = token
    if not keep_type:
        n.type_name = None
    # drop the resolution entry so semantic edges cannot point at the answer
    g.decl_of.pop(nid, None)
    g.unresolved.discard(nid)


def _finish(g: gr.CodeGraph, centers, repr_mode: str, gsc_mode, max_nodes: int) -> gr.CodeGraph:
    if repr_mode not in REPRS:
        raise ValueError(f"unknown representation {repr_mode!r}")
    t = truncate_graph(g, centers, max_nodes)
    if repr_mode == REPR_AUGAST:
        au.augment_graph(t)
    if gsc_mode is not None:
        gsc.build_cache(t, gsc_mode)
    au.add_reverse_edges(t)
    return t


def make_fitb_instances(
    g: gr.CodeGraph,
    seed: int,
    repr_mode: str = REPR_AUGAST,
    gsc_mode=None,
    max_nodes: int = MAX_NODES,
    per_variable: int = 1,
) -> list[FitbInstance]:
    """One instance per variable with >= 2 usages: blank one sampled usage.

    Only data declarations (locals, parameters, fields) are eligible; the
    declaration name leaf itself is never blanked and never counted correct.
    """
    rng = random.Random(seed)
    parents = _parents(g)
    out = []
    for decl, occs in sorted(_occurrences(g).items()):
        if _decl_category(g, parents, decl) not in _DATA_DECLS:
            continue
        uses = [o for o in occs if o != decl]
        if len(uses) < 2:
            continue
        for use in sorted(rng.sample(uses, min(per_variable, len(uses)))):
            inst = g.copy()
            _make_special(inst, use, ps.C_FITB, gr.FITB_TOKEN, keep_type=False)
            t = _finish(inst, {use}, repr_mode, gsc_mode, max_nodes)
            correct = (set(uses) - {use}) & set(t.nodes)
            if not correct:  # every other usage fell outside the truncation ball
                continue
            out.append(FitbInstance(t, use, correct))
    return out


def make_varnaming_instances(
    g: gr.CodeGraph,
    seed: int,
    repr_mode: str = REPR_AUGAST,
    gsc_mode=None,
    max_nodes: int = MAX_NODES,
) -> list[VarNamingInstance]:
    """One instance per named declaration (variable, parameter, field, method,
    or class); every occurrence of the name becomes a <NAME-ME> node.

    `seed` is accepted for interface symmetry with FITB generation; the
    enumeration itself is exhaustive and deterministic.
    """
    del seed
    parents = _parents(g)
    occ = _occurrences(g)
    out = []
    for decl in sorted(d for d in occ if g.nodes[d].construct == ps.C_NAME):
        name = g.nodes[decl].name
        if not name:
            continue
        cat = _decl_category(g, parents, decl)
        inst = g.copy()
        targets = set(occ[decl])
        if cat == ps.C_CLASS:
            targets |= {
                nid
                for nid, n in inst.nodes.items()
                if n.construct == ps.C_TYPEREF and n.name == name
            }
        for nid in targets:
            _make_special(inst, nid, ps.C_NAMEME, gr.NAME_ME_TOKEN, keep_type=True)
        if cat == ps.C_CLASS:
            # a type annotation carrying the class name would leak the answer
            for n in inst.nodes.values():
                if n.type_name == name:
                    n.type_name = gr.UNK_TYPE
        t = _finish(inst, targets, repr_mode, gsc_mode, max_nodes)
        words = list(gsc.split_name(name))[:MAX_TARGET_WORDS]
        out.append(VarNamingInstance(t, targets, words + [EOS]))
    return out
