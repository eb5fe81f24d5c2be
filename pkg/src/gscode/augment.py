"""Semantic edges over the parsed AST graph.

Adds COMPUTED_FROM, LAST_READ, LAST_WRITE, RETURNS_TO, LAST_SCOPE_USE,
LAST_FIELD_LEX and FIELD edges, then (separately) reversed variants of every
edge.  LAST_READ/LAST_WRITE use a may-analysis: a statement-level control flow
graph per method is solved to a fixed point with union joins, so a use points
at every access that could have been the most recent one on some path.

All passes mutate the graph in place and return it.  They operate on graph
structure alone (constructs + child order + decl links), so they also work on
truncated subgraphs where parts of a construct may be missing.
"""

from __future__ import annotations

from collections import deque

from . import graph as gr
from . import parser as ps

READ = "read"
WRITE = "write"

_SIMPLE_STMTS = (ps.C_VARDECL, ps.C_ASSIGN, ps.C_EXPRSTMT, ps.C_RETURN)
_STMT_CONSTRUCTS = (ps.C_BLOCK, ps.C_IF, ps.C_WHILE, ps.C_FOR) + _SIMPLE_STMTS
_DATA_DECLS = (ps.C_VARDECL, ps.C_FIELD, ps.C_PARAM)


def _parent_map(g: gr.CodeGraph) -> dict[int, int]:
    parents = {}
    for pid, kids in g.children.items():
        for k in kids:
            parents[k] = pid
    return parents


def _construct(g, nid):
    return g.nodes[nid].construct


def _is_tok(g, nid, text=None):
    c = _construct(g, nid)
    if not c.startswith(ps.TOK_PREFIX):
        return False
    return text is None or c == ps.TOK_PREFIX + text


def _kids(g, nid):
    return g.children.get(nid, [])


def _walk(g, root):
    """Pre-order node ids of the AST subtree under root (textual order)."""
    out = []
    stack = [root]
    while stack:
        nid = stack.pop()
        out.append(nid)
        stack.extend(reversed(_kids(g, nid)))
    return out


def _enclosing_method(g, parents, nid):
    cur = parents.get(nid)
    while cur is not None:
        if _construct(g, cur) == ps.C_METHOD:
            return cur
        cur = parents.get(cur)
    return None


def _decl_category(g, parents, decl_id):
    parent = parents.get(decl_id)
    return _construct(g, parent) if parent is not None else None


def _data_decl(g, parents, occ):
    """Declaration name-leaf id if occ refers to a local/param/field, else None."""
    decl = g.decl_of.get(occ)
    if decl is None or decl not in g.nodes:
        return None
    return decl if _decl_category(g, parents, decl) in _DATA_DECLS else None


def _expr_reads(g, parents, root):
    """Read events for every data-variable occurrence in an expression subtree."""
    events = []
    for nid in _walk(g, root):
        n = g.nodes[nid]
        if n.kind == gr.VARIABLE and n.construct == ps.C_NAMEUSE:
            decl = _data_decl(g, parents, nid)
            if decl is not None:
                events.append((nid, decl, READ))
    return events


def _vardecl_events(g, parents, sid):
    kids = _kids(g, sid)
    name_leaf = next((k for k in kids if _construct(g, k) == ps.C_NAME), None)
    has_init = any(_is_tok(g, k, "=") for k in kids)
    events = []
    seen_eq = False
    for k in kids:
        if _is_tok(g, k, "="):
            seen_eq = True
        elif seen_eq and not _is_tok(g, k):
            events.extend(_expr_reads(g, parents, k))
    if has_init and name_leaf is not None and _data_decl(g, parents, name_leaf):
        events.append((name_leaf, name_leaf, WRITE))
    return events


def _assign_events(g, parents, sid):
    kids = _kids(g, sid)
    eq = next((i for i, k in enumerate(kids) if _is_tok(g, k, "=")), None)
    if eq is None:
        return [e for k in kids if not _is_tok(g, k) for e in _expr_reads(g, parents, k)]
    events = []
    for k in kids[eq + 1 :]:
        if not _is_tok(g, k):
            events.extend(_expr_reads(g, parents, k))
    targets = [k for k in kids[:eq] if not _is_tok(g, k)]
    if targets:
        target = targets[0]
        if _construct(g, target) == ps.C_NAMEUSE:
            decl = _data_decl(g, parents, target)
            if decl is not None:
                events.append((target, decl, WRITE))
        elif _construct(g, target) == ps.C_FIELDACCESS:
            fa_kids = _kids(g, target)
            uses = [k for k in fa_kids if _construct(g, k) == ps.C_NAMEUSE]
            member = uses[-1] if uses else None
            for k in fa_kids:
                if k != member and not _is_tok(g, k):
                    events.extend(_expr_reads(g, parents, k))
            if member is not None:
                decl = _data_decl(g, parents, member)
                if decl is not None:
                    events.append((member, decl, WRITE))
    return events


def _simple_events(g, parents, sid):
    c = _construct(g, sid)
    if c == ps.C_VARDECL:
        return _vardecl_events(g, parents, sid)
    if c == ps.C_ASSIGN:
        return _assign_events(g, parents, sid)
    # ExprStmt / Return: reads only
    return [e for k in _kids(g, sid) if not _is_tok(g, k) for e in _expr_reads(g, parents, k)]


class ControlFlowGraph:
    """Statement-level CFG for one method; block -> statement ids and events."""

    def __init__(self):
        self.blocks: list[list[int]] = []
        self.successors: dict[int, set[int]] = {}
        self.events: list[list[tuple[int, int, str]]] = []
        self.entry = self.new_block()
        self.exit = self.new_block()

    def new_block(self, stmt_ids=(), events=()) -> int:
        b = len(self.blocks)
        self.blocks.append(list(stmt_ids))
        self.events.append(list(events))
        self.successors[b] = set()
        return b

    def connect(self, srcs, dst):
        for s in srcs:
            self.successors[s].add(dst)


class _CfgBuilder:
    def __init__(self, g, parents):
        self.g = g
        self.parents = parents
        self.cfg = ControlFlowGraph()

    def build(self, body_id):
        preds = self._stmt(body_id, {self.cfg.entry})
        self.cfg.connect(preds, self.cfg.exit)
        return self.cfg

    def _sequence(self, stmt_ids, preds):
        for sid in stmt_ids:
            preds = self._stmt(sid, preds)
        return preds

    def _cond_block(self, sid, expr_ids, preds):
        events = [e for k in expr_ids for e in _expr_reads(self.g, self.parents, k)]
        b = self.cfg.new_block([sid], events)
        self.cfg.connect(preds, b)
        return b

    def _stmt(self, sid, preds):
        g, c = self.g, _construct(self.g, sid)
        if c == ps.C_BLOCK:
            inner = [k for k in _kids(g, sid) if _construct(g, k) in _STMT_CONSTRUCTS]
            return self._sequence(inner, preds)
        if c in (ps.C_VARDECL, ps.C_ASSIGN, ps.C_EXPRSTMT):
            b = self.cfg.new_block([sid], _simple_events(g, self.parents, sid))
            self.cfg.connect(preds, b)
            return {b}
        if c == ps.C_RETURN:
            b = self.cfg.new_block([sid], _simple_events(g, self.parents, sid))
            self.cfg.connect(preds, b)
            self.cfg.connect({b}, self.cfg.exit)
            return set()
        if c == ps.C_IF:
            return self._if(sid, preds)
        if c == ps.C_WHILE:
            return self._while(sid, preds)
        if c == ps.C_FOR:
            return self._for(sid, preds)
        # not a statement (stray expression after truncation): read-only block
        b = self.cfg.new_block([sid], _expr_reads(g, self.parents, sid))
        self.cfg.connect(preds, b)
        return {b}

    def _split_branches(self, sid):
        cond, stmts = [], []
        for k in _kids(self.g, sid):
            if _is_tok(self.g, k):
                continue
            if _construct(self.g, k) in _STMT_CONSTRUCTS:
                stmts.append(k)
            else:
                cond.append(k)
        return cond, stmts

    def _if(self, sid, preds):
        cond, branches = self._split_branches(sid)
        c = self._cond_block(sid, cond, preds)
        if not branches:
            return {c}
        then_ends = self._stmt(branches[0], {c})
        if len(branches) > 1:
            else_ends = self._stmt(branches[1], {c})
        else:
            else_ends = {c}
        return then_ends | else_ends

    def _while(self, sid, preds):
        cond, bodies = self._split_branches(sid)
        c = self._cond_block(sid, cond, preds)
        if bodies:
            body_ends = self._stmt(bodies[0], {c})
            self.cfg.connect(body_ends, c)
        return {c}

    def _for(self, sid, preds):
        g = self.g
        kids = _kids(g, sid)
        semis = [i for i, k in enumerate(kids) if _is_tok(g, k, ";")]
        if len(semis) != 2:
            # truncated header: degrade to a plain sequence of the remaining parts
            parts = [k for k in kids if not _is_tok(g, k)]
            return self._sequence(parts, preds) if parts else preds
        init = [k for k in kids[: semis[0]] if not _is_tok(g, k)]
        cond = [k for k in kids[semis[0] + 1 : semis[1]] if not _is_tok(g, k)]
        tail = [k for k in kids[semis[1] + 1 :] if not _is_tok(g, k)]
        update = [k for k in tail if _construct(g, k) == ps.C_ASSIGN][:1]
        body = [k for k in tail if k not in update]
        preds = self._sequence(init, preds)
        c = self._cond_block(sid, cond, preds)
        ends = {c}
        if body:
            ends = self._stmt(body[-1], {c})
        ends = self._sequence(update, ends)
        self.cfg.connect(ends, c)
        return {c}


def method_ids(g: gr.CodeGraph) -> list[int]:
    return sorted(nid for nid, n in g.nodes.items() if n.construct == ps.C_METHOD)


def build_cfg(g: gr.CodeGraph, method_id: int, parents=None) -> ControlFlowGraph | None:
    if parents is None:
        parents = _parent_map(g)
    body = next((k for k in _kids(g, method_id) if _construct(g, k) == ps.C_BLOCK), None)
    if body is None:
        return None
    return _CfgBuilder(g, parents).build(body)


_EMPTY = (frozenset(), frozenset())


def _transfer(state, events):
    for node, decl, kind in events:
        reads, writes = state.get(decl, _EMPTY)
        if kind == READ:
            state[decl] = (frozenset((node,)), writes)
        else:
            state[decl] = (reads, frozenset((node,)))
    return state


def _solve(cfg: ControlFlowGraph):
    """Fixed point of may last-read/last-write sets at block entry."""
    n = len(cfg.blocks)
    incoming: list[dict] = [{} for _ in range(n)]
    work = deque(range(n))
    while work:
        b = work.popleft()
        out = _transfer(dict(incoming[b]), cfg.events[b])
        for s in sorted(cfg.successors[b]):
            tgt = incoming[s]
            changed = False
            for decl, (reads, writes) in out.items():
                prev_r, prev_w = tgt.get(decl, _EMPTY)
                new_r, new_w = prev_r | reads, prev_w | writes
                if new_r != prev_r or new_w != prev_w:
                    tgt[decl] = (new_r, new_w)
                    changed = True
            if changed:
                work.append(s)
    return incoming


def compute_last_accesses(g: gr.CodeGraph) -> gr.CodeGraph:
    """LAST_READ / LAST_WRITE edges from every variable access to the accesses
    that may have been the most recent on some execution path."""
    parents = _parent_map(g)
    for mid in method_ids(g):
        cfg = build_cfg(g, mid, parents)
        if cfg is None:
            continue
        incoming = _solve(cfg)
        for b in range(len(cfg.blocks)):
            state = dict(incoming[b])
            for node, decl, kind in cfg.events[b]:
                reads, writes = state.get(decl, _EMPTY)
                for tgt in sorted(reads - {node}):
                    g.add_edge(node, tgt, gr.EDGE_LAST_READ)
                for tgt in sorted(writes - {node}):
                    g.add_edge(node, tgt, gr.EDGE_LAST_WRITE)
                _transfer(state, [(node, decl, kind)])
    return g


def _call_name_ids(g: gr.CodeGraph) -> set[int]:
    """NameUse leaves in call-name position (immediately before an open paren)."""
    out = set()
    for nid, n in g.nodes.items():
        if n.construct != ps.C_CALL:
            continue
        kids = _kids(g, nid)
        for a, b in zip(kids, kids[1:]):
            if _construct(g, a) == ps.C_NAMEUSE and _is_tok(g, b, "("):
                out.add(a)
    return out


def add_computed_from(g: gr.CodeGraph) -> gr.CodeGraph:
    """LHS variable -> each variable occurrence in the RHS, per assignment or
    initialized declaration; call names are not variable occurrences."""
    call_names = _call_name_ids(g)
    for sid in sorted(g.nodes):
        c = _construct(g, sid)
        if c not in (ps.C_ASSIGN, ps.C_VARDECL, ps.C_FIELD):
            continue
        kids = _kids(g, sid)
        eq = next((i for i, k in enumerate(kids) if _is_tok(g, k, "=")), None)
        if eq is None:
            continue
        lhs = None
        if c == ps.C_ASSIGN:
            targets = [k for k in kids[:eq] if not _is_tok(g, k)]
            if targets:
                t = targets[0]
                if _construct(g, t) == ps.C_NAMEUSE:
                    lhs = t
                elif _construct(g, t) == ps.C_FIELDACCESS:
                    uses = [k for k in _kids(g, t) if _construct(g, k) == ps.C_NAMEUSE]
                    lhs = uses[-1] if uses else None
        else:
            lhs = next((k for k in kids if _construct(g, k) == ps.C_NAME), None)
        if lhs is None:
            continue
        for k in kids[eq + 1 :]:
            if _is_tok(g, k):
                continue
            for nid in _walk(g, k):
                n = g.nodes[nid]
                if n.kind == gr.VARIABLE and nid not in call_names:
                    g.add_edge(lhs, nid, gr.EDGE_COMPUTED_FROM)
    return g


def add_returns_to(g: gr.CodeGraph) -> gr.CodeGraph:
    """Returned-expression root -> the method's return-type node."""
    for mid in method_ids(g):
        ret_type = next((k for k in _kids(g, mid) if _construct(g, k) == ps.C_TYPEREF), None)
        if ret_type is None:
            continue
        for nid in _walk(g, mid):
            if _construct(g, nid) != ps.C_RETURN:
                continue
            expr = next((k for k in _kids(g, nid) if not _is_tok(g, k)), None)
            if expr is not None:
                g.add_edge(expr, ret_type, gr.EDGE_RETURNS_TO)
    return g


def add_lexical_edges(g: gr.CodeGraph) -> gr.CodeGraph:
    """LAST_SCOPE_USE chains per declaration within a method; LAST_FIELD_LEX
    chains per field across the whole file; FIELD from each field use to its
    declaration."""
    parents = _parent_map(g)
    occ_by_decl: dict[int, list[int]] = {}
    for occ, decl in g.decl_of.items():
        if occ in g.nodes and decl in g.nodes:
            occ_by_decl.setdefault(decl, []).append(occ)
    for decl in sorted(occ_by_decl):
        occs = sorted(occ_by_decl[decl])
        if _decl_category(g, parents, decl) == ps.C_FIELD:
            for occ in occs:
                if occ != decl:
                    g.add_edge(occ, decl, gr.EDGE_FIELD)
            for prev, cur in zip(occs, occs[1:]):
                g.add_edge(cur, prev, gr.EDGE_LAST_FIELD_LEX)
        else:
            by_method: dict[int, list[int]] = {}
            for occ in occs:
                m = _enclosing_method(g, parents, occ)
                if m is not None:
                    by_method.setdefault(m, []).append(occ)
            for m in sorted(by_method):
                chain = by_method[m]
                for prev, cur in zip(chain, chain[1:]):
                    g.add_edge(cur, prev, gr.EDGE_LAST_SCOPE_USE)
    return g


def add_reverse_edges(g: gr.CodeGraph) -> gr.CodeGraph:
    """One reversed edge with a reverse_* type per existing edge; not idempotent."""
    if any(gr.is_reverse_type(t) for _, _, t in g.edges):
        raise ValueError("reverse edges already present")
    for src, dst, t in list(g.edges):
        g.add_edge(dst, src, gr.reverse_type(t))
    return g


def augment_graph(g: gr.CodeGraph) -> gr.CodeGraph:
    """All semantic edge passes except reversal (applied after cache wiring)."""
    add_computed_from(g)
    compute_last_accesses(g)
    add_returns_to(g)
    add_lexical_edges(g)
    return g
