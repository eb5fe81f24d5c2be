"""Acceptance gate: ten checks covering gradients, oracle equivalence,
dataflow soundness, parsing, normalization, overfit capability, the
directional vocabulary-cache claim, the random baseline, instance
invariants, and checkpoint reproducibility.

Each test prints one summary line; the two training-based checks dominate
the runtime.
"""

import time

import numpy as np
import pytest

import gscode.corpus as cp
import gscode.embed as em
import gscode.gnn as gn
import gscode.graph as gr
import gscode.harness as hn
import gscode.layers as L
import gscode.lexer as lx
import gscode.parser as ps
import gscode.tasks.readout as ro
import gscode.tensor as T
from gscode import augment as ag

from helpers_dataflow import ProgramGenerator, oracle_edges_all_methods
from test_gnn import _dense_pass, _random_graph, TYPES3

CORPUS_DIR = "fixtures/corpus"
SPLIT_SEED = 7  # holds out the two repos with corpus-unique vocabulary
SEEDS = (0, 1, 2)


def _report(num: int, detail: str) -> None:
    print(f"criterion {num:02d} PASS: {detail}")


@pytest.fixture(scope="module")
def units():
    return cp.scan_corpus(CORPUS_DIR)


@pytest.fixture(scope="module")
def fitb_pool(units):
    cfg = hn.ExperimentConfig(task="fitb", representation="augast", vocab_strategy="gsc", seed=0)
    insts, failures = hn.generate_instances(units, cfg, per_variable=8)
    assert failures == []
    return insts


@pytest.fixture(scope="module")
def varnaming_pool(units):
    cfg = hn.ExperimentConfig(task="varnaming", representation="augast",
                              vocab_strategy="gsc", seed=0)
    insts, failures = hn.generate_instances(units, cfg)
    assert failures == []
    return insts


# ---------------------------------------------------------------- criterion 1


def _layer_checks(seed: int):
    """(name, build_loss, params) triples over every trainable layer family,
    all dims at or below 8."""
    rng = np.random.default_rng(seed)
    checks = []

    lin = L.Linear(rng, 3, 4, "t.lin")
    x_lin = T.Tensor(rng.normal(size=(2, 3)))
    checks.append(("linear", lambda: T.reduce_sum(lin(x_lin)), lin.parameters()))

    mlp = L.MLP(rng, 4, 5, 2, "t.mlp")
    x_mlp = T.Tensor(rng.normal(size=(3, 4)))
    checks.append(("mlp", lambda: T.reduce_sum(mlp(x_mlp)), mlp.parameters()))

    gru = L.GRUCell(rng, 4, 4, "t.gru")
    x_gru = T.Tensor(rng.normal(size=(2, 4)))
    h_gru = T.Tensor(rng.normal(size=(2, 4)))
    checks.append(("gru", lambda: T.reduce_sum(gru(x_gru, h_gru)), gru.parameters()))

    cnn = L.CharCNN(rng, out_dim=4, prefix="t.cnn")
    checks.append(("charcnn", lambda: T.reduce_sum(cnn(["totalCount", "x9"])), cnn.parameters()))

    g = gr.CodeGraph()
    for nid in range(4):
        g.add_node(gr.Node(nid, gr.SYNTAX, "Block"))
    for s, d, t in [(0, 1, "A"), (1, 2, "B"), (2, 3, "A"), (3, 0, "B"), (1, 1, "A")]:
        g.add_edge(s, d, t)
    ids = [0, 1, 2, 3]
    h0 = T.Tensor(rng.normal(size=(4, 4)))
    for variant in gn.VARIANTS:
        model = gn.GnnModel(rng, variant, ["A", "B"], hidden=4)
        checks.append((
            f"edge transforms ({variant})",
            lambda m=model: T.reduce_sum(gn.message_pass(g, ids, h0, m, rounds=2).final),
            model.parameters(),
        ))

    vocab = em.VocabTable(["foo", "bar"])
    dec = ro.NameDecoder(rng, ro.DECODE_GSC, vocab, hidden=4, prefix="t.dec")
    x_dec = T.Tensor(rng.normal(size=(1, 4)))
    h_dec = T.Tensor(rng.normal(size=(1, 4)))
    h_final = T.Tensor(rng.normal(size=(5, 4)))
    ctx = (["baz", "foo"], np.array([0, 3], dtype=np.intp), h_final)

    def sentinel_loss():
        _, _, probs = dec.step(x_dec, h_dec, ctx)
        return T.mul(T.log(T.clip(probs[1:2], 1e-12, 2.0)), -1.0)

    checks.append(("sentinel attention",
                   sentinel_loss,
                   dec.key.parameters() + [dec.sentinel]))

    types = em.TypeTable(["int"])
    code = ps.parse_source("class A { int f(int x) { return x; } }")
    embedder = em.NodeEmbedder(rng, em.CLOSED_VOCAB, vocab, types, hidden=4, prefix="t.emb")
    checks.append(("embeddings",
                   lambda: T.reduce_sum(embedder.init_hidden_states(code)[1]),
                   embedder.parameters()))
    return checks


def test_criterion_01_gradient_correctness(monkeypatch):
    # small internal widths keep the finite-difference sweep under the budget
    monkeypatch.setattr(L, "CHAR_EMBED_DIM", 4)
    monkeypatch.setattr(gn, "EDGE_VECTOR_DIM", 4)
    monkeypatch.setattr(gn, "FACTOR_DIM", 4)
    start = time.perf_counter()
    worst_by_layer: dict[str, float] = {}
    for seed in range(20):
        for name, build_loss, params in _layer_checks(seed):
            err = T.gradient_check(build_loss, params, eps=1e-5)
            worst_by_layer[name] = max(worst_by_layer.get(name, 0.0), err)
            assert err < 1e-4, f"{name} seed {seed}: rel err {err:.2e}"
    elapsed = time.perf_counter() - start
    assert elapsed < 60.0, f"gradient sweep took {elapsed:.1f}s"
    worst = max(worst_by_layer.values())
    _report(1, f"{len(worst_by_layer)} layer families x 20 seeds, "
               f"worst rel err {worst:.2e} in {elapsed:.1f}s")


# ---------------------------------------------------------------- criterion 2


def test_criterion_02_gnn_dense_oracle():
    start = time.perf_counter()
    worst = 0.0
    for variant in gn.VARIANTS:
        for i in range(100):
            rng = np.random.default_rng(1000 * gn.VARIANTS.index(variant) + i)
            g, ids = _random_graph(rng, max_nodes=6, types=TYPES3)
            model = gn.GnnModel(rng, variant, TYPES3, hidden=8)
            h0 = T.Tensor(rng.normal(size=(len(ids), 8)))
            out = gn.message_pass(g, ids, h0, model, rounds=3)
            dense = _dense_pass(model, g, ids, h0.values, 3)
            for got, want in zip(out.states, dense):
                gap = float(np.max(np.abs(np.asarray(got.values) - want)))
                worst = max(worst, gap)
                assert gap <= 1e-10, f"{variant} graph {i}: gap {gap:.2e}"
    elapsed = time.perf_counter() - start
    assert elapsed < 60.0, f"oracle sweep took {elapsed:.1f}s"
    _report(2, f"3 variants x 100 random graphs, worst gap {worst:.1e} in {elapsed:.1f}s")


# ---------------------------------------------------------------- criterion 3


def test_criterion_03_dataflow_oracle():
    start = time.perf_counter()
    flow_types = (gr.EDGE_LAST_READ, gr.EDGE_LAST_WRITE)
    fixtures = 0
    for seed in range(32):
        src = ProgramGenerator(seed).program(max_stmts=14)
        g = ps.parse_source(src)
        ag.compute_last_accesses(g)
        got = {(s, d, t) for s, d, t in g.edges if t in flow_types}
        want = oracle_edges_all_methods(g)
        assert got == want, f"fixture seed {seed}: sets differ"
        fixtures += 1
    elapsed = time.perf_counter() - start
    assert fixtures >= 30
    assert elapsed < 60.0, f"dataflow sweep took {elapsed:.1f}s"
    _report(3, f"{fixtures} structured fixtures, exact set equality in {elapsed:.1f}s")


# ---------------------------------------------------------------- criterion 4


def test_criterion_04_parser_roundtrip(units):
    failures = []
    for unit in units:
        try:
            g = ps.parse_source(unit.text, file=unit.key)
        except ps.ParseError as exc:
            failures.append((unit.key, str(exc)))
            continue
        toks = [t.text for t in lx.tokenize(unit.text)]
        leaves = []
        for nid in g.leaf_ids_in_order():
            n = g.nodes[nid]
            leaves.append(n.construct[4:] if n.construct.startswith("tok:") else n.name)
        assert leaves == toks, f"{unit.key}: leaf tokens diverge from the token stream"
    assert failures == [], f"bundled corpus must parse fully, got {failures}"
    _report(4, f"{len(units)} corpus files parse and round-trip their token streams")


# ---------------------------------------------------------------- criterion 5


def test_criterion_05_distribution_normalization():
    rng = np.random.default_rng(5)
    vocab = em.VocabTable(["alpha", "beta", "gamma"])
    decoders = [
        ro.NameDecoder(rng, kind, vocab, hidden=8, mixture=mix, prefix=f"f.{kind}.{mix}")
        for kind in ro.DECODERS
        for mix in ro.MIXTURES
    ]
    steps = 0
    with T.no_grad():
        for i in range(250):
            shape = (int(rng.integers(1, 7)),) if i % 2 else (int(rng.integers(1, 4)), 5)
            logits = T.Tensor(rng.normal(scale=rng.uniform(0.1, 60.0), size=shape))
            probs = T.softmax(logits, axis=len(shape) - 1)
            sums = np.sum(np.asarray(probs.values), axis=len(shape) - 1)
            assert np.all(np.abs(sums - 1.0) <= 1e-6)
            steps += 1
        while steps < 1000:
            dec = decoders[steps % len(decoders)]
            n_cache = steps % 5  # covers the zero-cache degenerate case
            x = T.Tensor(rng.normal(size=(1, 8)))
            h = T.Tensor(rng.normal(size=(1, 8)))
            ctx = None
            if dec.pointer:
                h_final = T.Tensor(rng.normal(size=(max(n_cache, 1), 8)))
                words = [f"w{j % 3}" for j in range(n_cache)]
                rows = np.arange(n_cache, dtype=np.intp)
                ctx = (words, rows, h_final)
            _, _, probs = dec.step(x, h, ctx)
            total = float(np.sum(np.asarray(probs.values)))
            assert abs(total - 1.0) <= 1e-6, f"step {steps}: sum {total}"
            steps += 1
    _report(5, f"{steps} fuzz steps, every distribution within 1e-6 of unit mass")


# ---------------------------------------------------------------- criterion 6


def test_criterion_06_overfit_capability(fitb_pool, varnaming_pool):
    start = time.perf_counter()
    cfg = hn.ExperimentConfig(task="fitb", representation="augast", vocab_strategy="gsc",
                              gnn="ggnn", patience=40, max_epochs=200, seed=0)
    fitb_ck = hn.train(cfg, fitb_pool[:50], fitb_pool[:50])
    assert fitb_ck.best_metric >= 0.95, f"fitb train accuracy {fitb_ck.best_metric:.3f}"

    cfg_v = hn.ExperimentConfig(task="varnaming", representation="augast",
                                vocab_strategy="gsc", gnn="ggnn",
                                patience=40, max_epochs=200, seed=0)
    vn_ck = hn.train(cfg_v, varnaming_pool[:20], varnaming_pool[:20])
    assert vn_ck.best_metric >= 0.90, f"varnaming exact match {vn_ck.best_metric:.3f}"
    elapsed = time.perf_counter() - start
    assert elapsed < 1800.0, f"overfit runs took {elapsed:.0f}s"
    _report(6, f"fitb 50-instance accuracy {fitb_ck.best_metric:.2f}, "
               f"varnaming 20-instance exact match {vn_ck.best_metric:.2f} "
               f"in {elapsed:.0f}s")


# ---------------------------------------------------------------- criterion 7


def _directional_run(split, task, representation, vocab, seed, max_epochs):
    cfg = hn.ExperimentConfig(task=task, representation=representation,
                              vocab_strategy=vocab, hidden=32, rounds=4,
                              lr=1e-3, batch_size=20, patience=max_epochs,
                              max_epochs=max_epochs, seed=seed)
    per_var = 8 if task == "fitb" else 1
    parts = []
    for files in (split.train, split.validation, split.seen_test, split.unseen_test):
        insts, failures = hn.generate_instances(files, cfg, per_variable=per_var)
        assert failures == []
        parts.append(insts)
    tr, va, se, un = parts
    ck = hn.train(cfg, tr, va)
    res = hn.evaluate(ck, se + un, "test")
    return res.report.accuracy, sum(len(p) for p in parts)


def test_criterion_07_directional_claim(units):
    split = cp.split_dataset(units, unseen_repo_count=2, seen_file_fraction=0.15,
                             val_fraction=0.15, seed=SPLIT_SEED)
    acc: dict[tuple, float] = {}
    pool_sizes: dict[str, int] = {}
    for seed in SEEDS:
        for task, rep, vocab, epochs in [
            ("fitb", "augast", "gsc", 10),
            ("fitb", "augast", "closed_vocab", 10),
            ("fitb", "ast", "gsc", 10),
            ("varnaming", "augast", "gsc", 18),
            ("varnaming", "augast", "closed_vocab", 18),
        ]:
            a, n = _directional_run(split, task, rep, vocab, seed, epochs)
            acc[(task, rep, vocab, seed)] = a
            pool_sizes[task] = n
    total = sum(pool_sizes.values())
    assert total >= 2000, f"desk corpus yields only {total} instances"

    fitb_gsc_beats_closed = sum(
        acc[("fitb", "augast", "gsc", s)] > acc[("fitb", "augast", "closed_vocab", s)]
        for s in SEEDS)
    fitb_augast_at_least_ast = sum(
        acc[("fitb", "augast", "gsc", s)] >= acc[("fitb", "ast", "gsc", s)]
        for s in SEEDS)
    vn_gsc_beats_closed = sum(
        acc[("varnaming", "augast", "gsc", s)] > acc[("varnaming", "augast", "closed_vocab", s)]
        for s in SEEDS)
    detail = (f"{total} instances; seeds favoring cache on fitb {fitb_gsc_beats_closed}/3, "
              f"augmentation {fitb_augast_at_least_ast}/3, naming {vn_gsc_beats_closed}/3")
    assert fitb_gsc_beats_closed >= 2, detail
    assert fitb_augast_at_least_ast >= 2, detail
    assert vn_gsc_beats_closed >= 2, detail
    _report(7, detail)


# ---------------------------------------------------------------- criterion 8


def test_criterion_08_random_baseline(fitb_pool):
    report = hn.random_baseline_fitb(fitb_pool, radius=8, trials=500, seed=0)
    gap = abs(report.mc_accuracy - report.exact_expectation)
    bound = 3.0 * report.std_error
    assert gap <= bound, f"|{report.mc_accuracy:.4f} - {report.exact_expectation:.4f}| > 3se"
    _report(8, f"monte carlo {report.mc_accuracy:.4f} vs exact "
               f"{report.exact_expectation:.4f} (gap {gap:.4f} <= 3se {bound:.4f}) "
               f"over {report.count} instances")


# ---------------------------------------------------------------- criterion 9


def test_criterion_09_instance_invariants(units, fitb_pool, varnaming_pool):
    checked = 0
    for inst in fitb_pool:
        assert len(inst.graph.nodes) <= 500
        assert inst.blank_node in inst.graph.nodes
        assert inst.correct_nodes and inst.correct_nodes <= set(inst.graph.nodes)
        checked += 1
    for inst in varnaming_pool:
        assert len(inst.graph.nodes) <= 500
        assert inst.name_me_nodes and inst.name_me_nodes <= set(inst.graph.nodes)
        assert inst.target_words[-1] == em.EOS
        assert 2 <= len(inst.target_words) <= 9
        checked += 1
    # a tight node budget forces truncation; centers must always survive it
    cfg = hn.ExperimentConfig(task="fitb", vocab_strategy="gsc", max_nodes=120, seed=0)
    tight, failures = hn.generate_instances(units, cfg, per_variable=2)
    assert failures == []
    truncated = 0
    for inst in tight:
        assert len(inst.graph.nodes) <= 120
        assert inst.blank_node in inst.graph.nodes
        assert inst.correct_nodes and inst.correct_nodes <= set(inst.graph.nodes)
        truncated += 1
        checked += 1
    assert truncated > 0
    _report(9, f"{checked} instances satisfy node budgets, retained centers, "
               f"eligibility, and target length bounds")


# --------------------------------------------------------------- criterion 10


def test_criterion_10_checkpoint_roundtrip(fitb_pool, tmp_path):
    cfg = hn.ExperimentConfig(task="fitb", vocab_strategy="gsc", hidden=8, rounds=2,
                              max_epochs=2, patience=2, batch_size=8, seed=3)
    ck = hn.train(cfg, fitb_pool[:24], fitb_pool[24:40])
    before = hn.evaluate(ck, fitb_pool[40:80], "seen").report.to_json()
    path = tmp_path / "model.json"
    ck.save(path)
    again = hn.Checkpoint.load(path)
    after = hn.evaluate(again, fitb_pool[40:80], "seen").report.to_json()
    assert before == after, "reloaded checkpoint changed the evaluation report"
    _report(10, f"saved and reloaded model reproduces the report bitwise "
                f"({len(ck.parameters)} parameter tensors)")
