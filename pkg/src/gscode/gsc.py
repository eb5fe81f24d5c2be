"""Graph-structured cache: name splitting and cache-node wiring.

Variable names are split into lowercase words at underscores, camelCase
boundaries and acronym boundaries (digits attach to the preceding word).  One
cache node is added per distinct word over the instance's variable names; in
full_gsc mode each cache node points at every variable whose name contains its
word via a WORD_USE edge, while pointer_sentinel_no_edges adds the same nodes
unconnected (the cache then only serves the decoder's pointer mechanism).
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from . import graph as gr
from . import parser as ps

FULL_GSC = "full_gsc"
POINTER_SENTINEL = "pointer_sentinel_no_edges"
MODES = (FULL_GSC, POINTER_SENTINEL)

_SEGMENT = re.compile(r"[A-Z]+(?![a-z])|[A-Z][a-z]*|[a-z]+|[0-9]+")


@dataclass(frozen=True)
class WordSplit:
    original: str
    words: tuple

    def __iter__(self):
        return iter(self.words)


def split_name(name: str) -> WordSplit:
    """Lowercase words of an identifier; "XMLParser2" -> (xml, parser2)."""
    segments = _SEGMENT.findall(name or "")
    words: list[str] = []
    for seg in segments:
        if seg.isdigit() and words:
            words[-1] += seg
        else:
            words.append(seg.lower())
    return WordSplit(name, tuple(words))


def instance_words(g: gr.CodeGraph) -> dict[str, list[int]]:
    """word -> sorted variable-node ids whose split name contains the word."""
    uses: dict[str, list[int]] = {}
    for n in g.variable_nodes():
        if not n.name:
            continue
        for word in set(split_name(n.name).words):
            uses.setdefault(word, []).append(n.id)
    return {w: sorted(ids) for w, ids in uses.items()}


def build_cache(g: gr.CodeGraph, mode: str = FULL_GSC) -> gr.CodeGraph:
    """Add cache nodes (and WORD_USE edges in full_gsc mode) in place."""
    if mode not in MODES:
        raise ValueError(f"unknown cache mode {mode!r}, expected one of {MODES}")
    if any(n.kind == gr.CACHE for n in g.nodes.values()):
        raise ValueError("graph already has cache nodes")
    uses = instance_words(g)
    for word in sorted(uses):
        cid = g.new_node(gr.CACHE, ps.C_CACHE, name=word, type_name=gr.CACHE_NODE_TYPE)
        if mode == FULL_GSC:
            for vid in uses[word]:
                g.add_edge(cid, vid, gr.EDGE_WORD_USE)
    return g


def cache_nodes(g: gr.CodeGraph) -> list[gr.Node]:
    return g.nodes_of_kind(gr.CACHE)
