"""Directed multigraph of typed nodes and typed edges built from source code.

A CodeGraph starts life as a plain AST (AST + NEXT_TOKEN edges), gets semantic
edges from the augment module, cache nodes from the gsc module, and finally
reversed edges.  Serialized as one JSON object per graph (JSONL), which is the
contract between extraction and training.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

# node kinds
SYNTAX = "syntax"
VARIABLE = "variable"
CACHE = "cache"
SPECIAL = "special"

NODE_KINDS = (SYNTAX, VARIABLE, CACHE, SPECIAL)

# forward edge types; the reversed variant of type T is REVERSE_PREFIX + T
EDGE_AST = "AST"
EDGE_NEXT_TOKEN = "NEXT_TOKEN"
EDGE_COMPUTED_FROM = "COMPUTED_FROM"
EDGE_LAST_READ = "LAST_READ"
EDGE_LAST_WRITE = "LAST_WRITE"
EDGE_RETURNS_TO = "RETURNS_TO"
EDGE_LAST_SCOPE_USE = "LAST_SCOPE_USE"
EDGE_LAST_FIELD_LEX = "LAST_FIELD_LEX"
EDGE_FIELD = "FIELD"
EDGE_WORD_USE = "WORD_USE"

FORWARD_EDGE_TYPES = (
    EDGE_AST,
    EDGE_NEXT_TOKEN,
    EDGE_COMPUTED_FROM,
    EDGE_LAST_READ,
    EDGE_LAST_WRITE,
    EDGE_RETURNS_TO,
    EDGE_LAST_SCOPE_USE,
    EDGE_LAST_FIELD_LEX,
    EDGE_FIELD,
    EDGE_WORD_USE,
)

REVERSE_PREFIX = "reverse_"

# reserved type string for cache nodes, and the fallback for unresolved types
CACHE_NODE_TYPE = "CACHE_NODE"
UNK_TYPE = "<UNK_TYPE>"

FITB_TOKEN = "<FILL-IN-THE-BLANK>"
NAME_ME_TOKEN = "<NAME-ME>"


def reverse_type(edge_type: str) -> str:
    return REVERSE_PREFIX + edge_type


def is_reverse_type(edge_type: str) -> bool:
    return edge_type.startswith(REVERSE_PREFIX)


@dataclass
class Node:
    id: int
    kind: str
    construct: str
    name: str | None = None
    type_name: str | None = None


@dataclass
class CodeGraph:
    """Typed directed multigraph plus the in-memory AST bookkeeping.

    `children` (ordered AST children) and `decl_of` (occurrence node -> the
    declaration's name-leaf node) are working state for augmentation and
    instance building; they are not part of the serialized record.
    """

    file: str = ""
    nodes: dict[int, Node] = field(default_factory=dict)
    edges: list[tuple[int, int, str]] = field(default_factory=list)
    children: dict[int, list[int]] = field(default_factory=dict)
    root: int | None = None
    decl_of: dict[int, int] = field(default_factory=dict)
    unresolved: set[int] = field(default_factory=set)
    positions: dict[int, tuple[int, int]] = field(default_factory=dict)

    def add_node(self, node: Node) -> int:
        if node.id in self.nodes:
            raise ValueError(f"duplicate node id {node.id}")
        self.nodes[node.id] = node
        return node.id

    def new_node(self, kind, construct, name=None, type_name=None) -> int:
        nid = (max(self.nodes) + 1) if self.nodes else 0
        return self.add_node(Node(nid, kind, construct, name, type_name))

    def add_edge(self, src: int, dst: int, edge_type: str) -> None:
        if src not in self.nodes or dst not in self.nodes:
            raise KeyError(f"edge ({src},{dst},{edge_type}) references missing node")
        self.edges.append((src, dst, edge_type))

    def edge_types(self) -> list[str]:
        seen = []
        for _, _, t in self.edges:
            if t not in seen:
                seen.append(t)
        return seen

    def nodes_of_kind(self, kind: str) -> list[Node]:
        return [n for n in sorted(self.nodes.values(), key=lambda n: n.id) if n.kind == kind]

    def variable_nodes(self) -> list[Node]:
        return self.nodes_of_kind(VARIABLE)

    def undirected_neighbors(self, ignore_types: tuple[str, ...] = ()) -> dict[int, set[int]]:
        adj: dict[int, set[int]] = {nid: set() for nid in self.nodes}
        for src, dst, t in self.edges:
            if t in ignore_types:
                continue
            adj[src].add(dst)
            adj[dst].add(src)
        return adj

    def leaf_ids_in_order(self) -> list[int]:
        """Leaves of the AST in left-to-right order (token order)."""
        if self.root is None:
            return []
        out: list[int] = []
        stack = [self.root]
        while stack:
            nid = stack.pop()
            kids = self.children.get(nid, [])
            if not kids:
                out.append(nid)
            else:
                stack.extend(reversed(kids))
        return out

    def to_record(self) -> dict:
        rec_nodes = []
        for nid in sorted(self.nodes):
            n = self.nodes[nid]
            item: dict = {"id": n.id, "kind": n.kind, "construct": n.construct}
            if n.name is not None:
                item["name"] = n.name
            if n.type_name is not None:
                item["type"] = n.type_name
            rec_nodes.append(item)
        return {
            "file": self.file,
            "nodes": rec_nodes,
            "edges": [[s, d, t] for s, d, t in self.edges],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_record(), sort_keys=False)

    @classmethod
    def from_record(cls, rec: dict) -> "CodeGraph":
        g = cls(file=rec.get("file", ""))
        for item in rec["nodes"]:
            g.add_node(
                Node(
                    item["id"],
                    item["kind"],
                    item["construct"],
                    item.get("name"),
                    item.get("type"),
                )
            )
        for src, dst, t in rec["edges"]:
            g.add_edge(src, dst, t)
        g._rebuild_children()
        return g

    @classmethod
    def from_json(cls, line: str) -> "CodeGraph":
        return cls.from_record(json.loads(line))

    def _rebuild_children(self) -> None:
        """Recover AST child order from the serialized AST edge order."""
        self.children = {}
        has_parent = set()
        for src, dst, t in self.edges:
            if t == EDGE_AST:
                self.children.setdefault(src, []).append(dst)
                has_parent.add(dst)
        roots = [nid for nid in self.nodes if nid in self.children and nid not in has_parent]
        self.root = min(roots) if roots else None

    def copy(self) -> "CodeGraph":
        g = CodeGraph(file=self.file)
        g.nodes = {nid: Node(n.id, n.kind, n.construct, n.name, n.type_name) for nid, n in self.nodes.items()}
        g.edges = list(self.edges)
        g.children = {nid: list(kids) for nid, kids in self.children.items()}
        g.root = self.root
        g.decl_of = dict(self.decl_of)
        g.unresolved = set(self.unresolved)
        g.positions = dict(self.positions)
        return g

    def induced_subgraph(self, keep: set[int]) -> "CodeGraph":
        """Subgraph on `keep`, preserving edge order, child order and resolution."""
        g = CodeGraph(file=self.file)
        for nid in sorted(keep):
            n = self.nodes[nid]
            g.add_node(Node(n.id, n.kind, n.construct, n.name, n.type_name))
        g.edges = [(s, d, t) for s, d, t in self.edges if s in keep and d in keep]
        g.children = {
            nid: [k for k in kids if k in keep] for nid, kids in self.children.items() if nid in keep
        }
        g.root = self.root if self.root in keep else None
        g.decl_of = {use: decl for use, decl in self.decl_of.items() if use in keep and decl in keep}
        g.unresolved = {nid for nid in self.unresolved if nid in keep}
        g.positions = {nid: pos for nid, pos in self.positions.items() if nid in keep}
        return g


def write_jsonl(graphs, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for g in graphs:
            f.write(g.to_json() + "\n")


def read_jsonl(path) -> list[CodeGraph]:
    out = []
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            if line.strip():
                out.append(CodeGraph.from_json(line))
    return out
