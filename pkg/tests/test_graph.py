import json

import pytest

from gscode import graph as gr


def tiny():
    g = gr.CodeGraph(file="a.src")
    g.add_node(gr.Node(0, gr.SYNTAX, "Block"))
    g.add_node(gr.Node(1, gr.VARIABLE, "NameUse", name="x", type_name="int"))
    g.add_node(gr.Node(2, gr.SYNTAX, "tok:;"))
    g.add_edge(0, 1, gr.EDGE_AST)
    g.add_edge(0, 2, gr.EDGE_AST)
    g.add_edge(1, 2, gr.EDGE_NEXT_TOKEN)
    g.children[0] = [1, 2]
    g.root = 0
    return g


def test_edge_requires_known_endpoints():
    g = tiny()
    with pytest.raises(KeyError):
        g.add_edge(0, 99, gr.EDGE_AST)


def test_duplicate_node_id_rejected():
    g = tiny()
    with pytest.raises(ValueError):
        g.add_node(gr.Node(1, gr.SYNTAX, "Block"))


def test_serialization_roundtrip_preserves_everything():
    g = tiny()
    g2 = gr.CodeGraph.from_json(g.to_json())
    assert g2.file == "a.src"
    assert {n.id: (n.kind, n.construct, n.name, n.type_name) for n in g2.nodes.values()} == {
        n.id: (n.kind, n.construct, n.name, n.type_name) for n in g.nodes.values()
    }
    assert g2.edges == g.edges
    assert g2.children == g.children and g2.root == 0


def test_record_omits_null_fields():
    rec = tiny().to_record()
    block = rec["nodes"][0]
    assert "name" not in block and "type" not in block
    var = rec["nodes"][1]
    assert var["name"] == "x" and var["type"] == "int"


def test_edges_serialized_as_triples():
    rec = tiny().to_record()
    assert rec["edges"][0] == [0, 1, gr.EDGE_AST]


def test_reverse_type_helpers():
    assert gr.reverse_type(gr.EDGE_AST) == "reverse_AST"
    assert gr.is_reverse_type("reverse_AST")
    assert not gr.is_reverse_type(gr.EDGE_AST)


def test_undirected_neighbors_ignores_requested_types():
    g = tiny()
    adj = g.undirected_neighbors()
    assert adj[1] == {0, 2}
    adj = g.undirected_neighbors(ignore_types=(gr.EDGE_NEXT_TOKEN,))
    assert adj[1] == {0}


def test_induced_subgraph_drops_cross_edges():
    g = tiny()
    sub = g.induced_subgraph({0, 1})
    assert sorted(sub.nodes) == [0, 1]
    assert sub.edges == [(0, 1, gr.EDGE_AST)]
    assert sub.children[0] == [1]


def test_jsonl_io(tmp_path):
    path = tmp_path / "graphs.jsonl"
    gr.write_jsonl([tiny(), tiny()], path)
    lines = path.read_text().strip().split("\n")
    assert len(lines) == 2
    back = gr.read_jsonl(path)
    assert len(back) == 2 and back[0].edges == tiny().edges


def test_forward_edge_types_cover_spec_names():
    assert gr.FORWARD_EDGE_TYPES == (
        "AST",
        "NEXT_TOKEN",
        "COMPUTED_FROM",
        "LAST_READ",
        "LAST_WRITE",
        "RETURNS_TO",
        "LAST_SCOPE_USE",
        "LAST_FIELD_LEX",
        "FIELD",
        "WORD_USE",
    )


def test_new_node_allocates_fresh_ids():
    g = tiny()
    nid = g.new_node(gr.CACHE, "CacheWord", name="foo", type_name=gr.CACHE_NODE_TYPE)
    assert nid == 3 and g.nodes[3].name == "foo"
