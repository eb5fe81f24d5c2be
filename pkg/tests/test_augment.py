import pytest

from gscode import augment as ag
from gscode import graph as gr
from gscode import parser as ps


def build(src):
    return ps.parse_source(src, file="t.src")


def edges_of(g, etype):
    return [(s, d) for s, d, t in g.edges if t == etype]


def node_named(g, name, construct=None):
    out = [
        n
        for n in g.nodes.values()
        if n.name == name and (construct is None or n.construct == construct)
    ]
    return sorted(out, key=lambda n: n.id)


def test_computed_from_simple_assignment():
    g = build("class A { void f() { int x = 0; int y = 0; int z = 0; x = y + z; } }")
    ag.add_computed_from(g)
    cf = edges_of(g, gr.EDGE_COMPUTED_FROM)
    x_lhs = node_named(g, "x", "NameUse")[0]
    y_use = node_named(g, "y", "NameUse")[0]
    z_use = node_named(g, "z", "NameUse")[0]
    # declarations with literal initializers contribute nothing
    assert set(cf) == {(x_lhs.id, y_use.id), (x_lhs.id, z_use.id)}


def test_computed_from_literal_rhs_has_no_edges():
    g = build("class A { void f() { int x = 0; x = 5; } }")
    ag.add_computed_from(g)
    # the declaration's initializer is a literal too
    assert edges_of(g, gr.EDGE_COMPUTED_FROM) == []


def test_computed_from_call_names_excluded_occurrences_kept():
    src = """
    class A {
        int f(int p, int q) { return p; }
        void g() {
            int a = 1; int b = 2; int x = 0;
            x = f(a, b) + a;
        }
    }
    """
    g = build(src)
    ag.add_computed_from(g)
    cf = edges_of(g, gr.EDGE_COMPUTED_FROM)
    x_lhs = node_named(g, "x", "NameUse")[0]
    a_uses = [n.id for n in node_named(g, "a", "NameUse")]
    b_uses = [n.id for n in node_named(g, "b", "NameUse")]
    f_uses = [n.id for n in node_named(g, "f", "NameUse")]
    assert sorted(cf) == sorted([(x_lhs.id, a_uses[0]), (x_lhs.id, b_uses[0]), (x_lhs.id, a_uses[1])])
    assert all((x_lhs.id, fid) not in cf for fid in f_uses)


def test_computed_from_outdegree_matches_rhs_occurrences():
    g = build("class A { void f() { int a = 0; int b = 0; b = a + a * a; } }")
    ag.add_computed_from(g)
    cf = edges_of(g, gr.EDGE_COMPUTED_FROM)
    b_lhs = node_named(g, "b", "NameUse")[0]
    assert sum(1 for s, _ in cf if s == b_lhs.id) == 3


def test_computed_from_declaration_initializer():
    g = build("class A { void f() { int y = 1; int x = y; } }")
    ag.add_computed_from(g)
    cf = edges_of(g, gr.EDGE_COMPUTED_FROM)
    x_decl = node_named(g, "x", "Name")[0]
    y_use = node_named(g, "y", "NameUse")[0]
    assert cf == [(x_decl.id, y_use.id)]


def test_returns_to_points_at_return_type():
    g = build("class A { int getX() { int x = 1; return x; } }")
    ag.add_returns_to(g)
    rt = edges_of(g, gr.EDGE_RETURNS_TO)
    x_use = node_named(g, "x", "NameUse")[0]
    int_refs = [n for n in g.nodes.values() if n.construct == "TypeRef" and n.name == "int"]
    method_type = min(int_refs, key=lambda n: n.id)
    assert rt == [(x_use.id, method_type.id)]


def test_returns_to_void_bare_return():
    g = build("class A { void f() { return; } }")
    ag.add_returns_to(g)
    assert edges_of(g, gr.EDGE_RETURNS_TO) == []


def test_returns_to_two_returns_same_type():
    g = build("class A { int f(int c) { if (c > 0) { return 1; } return 2; } }")
    ag.add_returns_to(g)
    rt = edges_of(g, gr.EDGE_RETURNS_TO)
    assert len(rt) == 2
    assert len({d for _, d in rt}) == 1


def test_last_scope_use_chains_in_textual_order():
    g = build("class A { int f(int n) { int m = n; m = n + m; return m; } }")
    ag.add_lexical_edges(g)
    lsu = edges_of(g, gr.EDGE_LAST_SCOPE_USE)
    n_nodes = [n.id for n in node_named(g, "n")]
    # chain over n: decl leaf <- use1 <- use2
    n_edges = sorted((s, d) for s, d in lsu if s in n_nodes)
    assert n_edges == [(n_nodes[1], n_nodes[0]), (n_nodes[2], n_nodes[1])]


def test_field_edges_cross_methods_scope_use_does_not():
    src = """
    class A {
        int w;
        int f() { return w; }
        int g() { return w; }
    }
    """
    g = build(src)
    ag.add_lexical_edges(g)
    w_nodes = [n.id for n in node_named(g, "w")]
    decl, use_f, use_g = w_nodes
    assert set(edges_of(g, gr.EDGE_FIELD)) == {(use_f, decl), (use_g, decl)}
    lex = edges_of(g, gr.EDGE_LAST_FIELD_LEX)
    assert (use_g, use_f) in lex and (use_f, decl) in lex
    assert edges_of(g, gr.EDGE_LAST_SCOPE_USE) == []


def test_shadowed_locals_chain_separately():
    src = """
    class A {
        void f() {
            int x = 1;
            x = 2;
            { int y = x; }
        }
        void g() { int x = 9; x = x + 1; }
    }
    """
    g = build(src)
    ag.add_lexical_edges(g)
    lsu = edges_of(g, gr.EDGE_LAST_SCOPE_USE)
    parents = {}
    for pid, kids in g.children.items():
        for k in kids:
            parents[k] = pid
    methods = sorted(nid for nid, n in g.nodes.items() if n.construct == "MethodDecl")
    for s, d in lsu:
        assert g.nodes[s].name == g.nodes[d].name
        assert _enclosing_method(g, parents, s) == _enclosing_method(g, parents, d)
    # two chains for x (one per method), each linking decl + two occurrences
    x_edges = [(s, d) for s, d in lsu if g.nodes[s].name == "x"]
    per_method = {}
    for s, d in x_edges:
        per_method.setdefault(_enclosing_method(g, parents, s), []).append((s, d))
    assert sorted(per_method) == methods
    assert all(len(v) == 2 for v in per_method.values())


def test_reverse_edges_double_and_biject():
    g = build("class A { int f(int n) { return n + 1; } }")
    ag.augment_graph(g)
    before = list(g.edges)
    ag.add_reverse_edges(g)
    assert len(g.edges) == 2 * len(before)
    forward = set()
    reverse = set()
    for s, d, t in g.edges:
        (reverse if gr.is_reverse_type(t) else forward).add((s, d, t))
    assert {(d, s, gr.reverse_type(t)) for s, d, t in forward} == reverse


def test_reverse_edges_twice_is_an_error():
    g = build("class A { int f(int n) { return n; } }")
    ag.add_reverse_edges(g)
    with pytest.raises(ValueError):
        ag.add_reverse_edges(g)


def test_reverse_edges_on_empty_edge_graph():
    g = gr.CodeGraph()
    g.add_node(gr.Node(0, gr.SYNTAX, "Block"))
    ag.add_reverse_edges(g)
    assert g.edges == []


def test_reverse_edge_count_on_mixed_fixture():
    g = build("class A { int f(int n) { int m = n; m = m + n; return m; } }")
    ag.augment_graph(g)
    n_edges = len(g.edges)
    types_before = sorted(t for _, _, t in g.edges)
    ag.add_reverse_edges(g)
    assert len(g.edges) == 2 * n_edges
    doubled = sorted([t for _, _, t in g.edges if not gr.is_reverse_type(t)])
    assert doubled == types_before


def _enclosing_method(g, parents, nid):
    cur = nid
    while cur is not None:
        if g.nodes[cur].construct == "MethodDecl":
            return cur
        cur = parents.get(cur)
    return None


def test_semantic_edges_stay_within_method_except_field_kinds():
    src = """
    class A {
        int w;
        int f(int n) { w = n; return w; }
        int g() { int k = w + 1; for (int i = 0; i < k; i = i + 1) { k = k + w; } return k; }
    }
    """
    g = build(src)
    ag.augment_graph(g)
    parents = {}
    for pid, kids in g.children.items():
        for k in kids:
            parents[k] = pid
    semantic = [
        (s, d, t)
        for s, d, t in g.edges
        if t not in (gr.EDGE_AST, gr.EDGE_NEXT_TOKEN, gr.EDGE_LAST_FIELD_LEX, gr.EDGE_FIELD)
    ]
    assert semantic, "fixture should produce semantic edges"
    for s, d, t in semantic:
        assert _enclosing_method(g, parents, s) == _enclosing_method(g, parents, d), (s, d, t)


def test_augment_skips_truncated_constructs_gracefully():
    g = build("class A { int f(int n) { int m = n + 1; for (int i = 0; i < n; i = i + 1) { m = m + i; } return m; } }")
    keep = set(g.nodes) - set(list(sorted(g.nodes))[-12:])
    sub = g.induced_subgraph(keep)
    ag.augment_graph(sub)  # must not raise
    for s, d, _ in sub.edges:
        assert s in sub.nodes and d in sub.nodes
