"""Experiment orchestration: the configuration grid (representation x
vocabulary strategy x GNN variant), instance generation over a corpus,
training with early stopping, sharded evaluation, JSON checkpoints, and the
random-guess FITB baseline."""

from __future__ import annotations

import hashlib
import json
import random
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from . import embed as em
from . import gnn
from . import graph as gr
from . import gsc
from . import parser as ps
from . import tasks as tk
from . import tensor as T
from .lexer import ParseError
from .tasks.readout import DECODE_CHARCNN, DECODE_CLOSED, DECODE_GSC, DECODE_POINTER
from .util import num_threads

TASKS = (tk.TASK_FITB, tk.TASK_VARNAMING)

VOCAB_CLOSED = "closed_vocab"
VOCAB_CHARCNN = "charcnn"
VOCAB_POINTER = "pointer_sentinel"
VOCAB_GSC = "gsc"
VOCAB_STRATEGIES = (VOCAB_CLOSED, VOCAB_CHARCNN, VOCAB_POINTER, VOCAB_GSC)

# vocab strategy -> (node embedding, cache construction, decoder head)
_AXIS = {
    VOCAB_CLOSED: (em.CLOSED_VOCAB, None, DECODE_CLOSED),
    VOCAB_CHARCNN: (em.CHARCNN, None, DECODE_CHARCNN),
    VOCAB_POINTER: (em.CHARCNN, gsc.POINTER_SENTINEL, DECODE_POINTER),
    VOCAB_GSC: (em.GSC, gsc.FULL_GSC, DECODE_GSC),
}

_INT_FIELDS = frozenset(
    {"hidden", "rounds", "max_nodes", "unroll", "vocab_size", "batch_size",
     "patience", "max_epochs", "seed"}
)
_FLOAT_FIELDS = frozenset({"lr"})


@dataclass
class ExperimentConfig:
    task: str
    representation: str = tk.REPR_AUGAST
    vocab_strategy: str = VOCAB_GSC
    gnn: str = gnn.GGNN
    hidden: int = 64
    rounds: int = 8
    max_nodes: int = tk.MAX_NODES
    unroll: int = tk.MAX_TARGET_WORDS
    vocab_size: int = em.DEFAULT_VOCAB_SIZE
    lr: float = 1e-3
    batch_size: int = 20
    patience: int = 10
    max_epochs: int = 200
    seed: int = 0
    mixture: str = tk.MIX_NORMALIZED

    def __post_init__(self):
        if self.task not in TASKS:
            raise ValueError(f"unknown task {self.task!r}")
        if self.representation not in tk.REPRS:
            raise ValueError(f"unknown representation {self.representation!r}")
        if self.vocab_strategy not in VOCAB_STRATEGIES:
            raise ValueError(f"unknown vocab strategy {self.vocab_strategy!r}")
        if self.gnn not in gnn.VARIANTS:
            raise ValueError(f"unknown gnn variant {self.gnn!r}")
        if self.mixture not in tk.MIXTURES:
            raise ValueError(f"unknown mixture {self.mixture!r}")
        if self.task == tk.TASK_FITB and self.vocab_strategy == VOCAB_POINTER:
            # pointer-sentinel only changes the naming decoder; cache nodes
            # without WORD_USE edges are invisible to the FITB readout
            raise ValueError("pointer_sentinel applies to varnaming only")
        for f in ("hidden", "rounds", "max_nodes", "unroll", "vocab_size",
                  "batch_size", "max_epochs"):
            if getattr(self, f) < 1:
                raise ValueError(f"{f} must be >= 1")
        if self.patience < 0:
            raise ValueError("patience must be >= 0")
        if self.lr <= 0:
            raise ValueError("lr must be positive")

    @property
    def embed_strategy(self) -> str:
        return _AXIS[self.vocab_strategy][0]

    @property
    def gsc_mode(self):
        return _AXIS[self.vocab_strategy][1]

    @property
    def decoder_kind(self) -> str:
        return _AXIS[self.vocab_strategy][2]

    def edge_types(self) -> list[str]:
        if self.representation == tk.REPR_AST:
            fwd = [gr.EDGE_AST, gr.EDGE_NEXT_TOKEN]
        else:
            fwd = [t for t in gr.FORWARD_EDGE_TYPES if t != gr.EDGE_WORD_USE]
        if self.gsc_mode == gsc.FULL_GSC:
            fwd.append(gr.EDGE_WORD_USE)
        return sorted(fwd + [gr.reverse_type(t) for t in fwd])

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        kwargs = {}
        for key, value in raw.items():
            if key in _INT_FIELDS:
                kwargs[key] = int(value)
            elif key in _FLOAT_FIELDS:
                kwargs[key] = float(value)
            else:
                kwargs[key] = str(value)
        return cls(**kwargs)

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:12]


def parse_config_text(text: str) -> dict:
    """key = value lines; blank lines and # comments ignored."""
    out = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ValueError(f"line {lineno}: expected key = value, got {line!r}")
        key, value = stripped.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def load_config(path, **overrides) -> ExperimentConfig:
    with open(path, encoding="utf-8") as f:
        raw = parse_config_text(f.read())
    raw.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentConfig.from_dict(raw)


def save_config(config: ExperimentConfig, path) -> None:
    lines = [f"{f.name} = {getattr(config, f.name)}" for f in fields(config)]
    with open(path, "w", encoding="utf-8") as f:
        f.write("\n".join(lines) + "\n")


def worker_count(explicit=None) -> int:
    """Worker cap: explicit argument, else GSC_NUM_THREADS, else 1."""
    if explicit is not None:
        return max(1, int(explicit))
    return num_threads()


# ------------------------------------------------------- instance generation


def generate_instances(units, config: ExperimentConfig, per_variable: int = 1):
    """Instances for every unit that parses; returns (instances, failures).

    failures is a list of (unit key, error message) for files rejected by
    the grammar; the per-unit seed is derived from the config seed so the
    output is stable under corpus reordering only if the unit list order is.
    """
    instances, failures = [], []
    for i, unit in enumerate(units):
        try:
            g = ps.parse_source(unit.text, unit.path)
        except ParseError as e:
            failures.append((unit.key, str(e)))
            continue
        seed = config.seed * 1_000_003 + i
        if config.task == tk.TASK_FITB:
            instances.extend(
                tk.make_fitb_instances(
                    g, seed, config.representation, config.gsc_mode,
                    config.max_nodes, per_variable,
                )
            )
        else:
            instances.extend(
                tk.make_varnaming_instances(
                    g, seed, config.representation, config.gsc_mode, config.max_nodes
                )
            )
    return instances, failures


def build_tables(config: ExperimentConfig, train_instances):
    """Vocabulary and type tables from the training split only.

    Name words come from visible variable names plus the training answers
    (the labels are training data); hidden tokens contribute nothing.
    """
    words, type_names = [], []
    for inst in train_instances:
        for n in inst.graph.nodes.values():
            if n.kind == gr.VARIABLE and n.name:
                words.extend(gsc.split_name(n.name))
            elif n.kind == gr.CACHE and n.name:
                words.append(n.name)
            if n.type_name:
                type_names.append(n.type_name)
        if isinstance(inst, tk.VarNamingInstance):
            words.extend(inst.target_words[:-1])
    vocab = em.VocabTable.build(words, size=config.vocab_size)
    types = em.TypeTable.build(type_names)
    return vocab, types


# --------------------------------------------------------------------- model


class TaskModel:
    """Embedder, GNN, and task head assembled from one config."""

    def __init__(self, config: ExperimentConfig, vocab: em.VocabTable, types: em.TypeTable):
        rng = np.random.default_rng(config.seed)
        self.config = config
        self.vocab = vocab
        self.types = types
        self.embedder = em.NodeEmbedder(rng, config.embed_strategy, vocab, types,
                                        hidden=config.hidden)
        self.gnn = gnn.GnnModel(rng, config.gnn, config.edge_types(), hidden=config.hidden)
        if config.task == tk.TASK_FITB:
            self.head = tk.FitbReadout(rng, config.gnn, hidden=config.hidden)
        else:
            self.head = tk.NameDecoder(rng, config.decoder_kind, vocab,
                                       hidden=config.hidden, mixture=config.mixture)

    def parameters(self):
        return self.embedder.parameters() + self.gnn.parameters() + self.head.parameters()

    def _state(self, g: gr.CodeGraph) -> gnn.GnnState:
        ids, h0 = self.embedder.init_hidden_states(g)
        return gnn.message_pass(g, ids, h0, self.gnn, rounds=self.config.rounds)

    def loss(self, inst) -> T.Tensor:
        if isinstance(inst, tk.FitbInstance):
            state = self._state(inst.graph)
            scores = self.head(state)
            return tk.fitb_loss(scores, state.ids, inst.correct_nodes)
        state = self._state(inst.graph)
        dists = tk.teacher_distributions(
            self.head, state, inst.graph, inst.name_me_nodes, inst.target_words
        )
        return tk.varnaming_loss(dists, inst.target_words)

    def predict(self, inst):
        """FITB: ranked (node, score) list.  VarNaming: (greedy words, beams)."""
        with T.no_grad():
            state = self._state(inst.graph)
            if isinstance(inst, tk.FitbInstance):
                return tk.fitb_predict(state, self.head(state), inst.graph)
            steps = self.config.unroll + 1
            _, greedy = tk.decode_greedy(
                self.head, state, inst.graph, inst.name_me_nodes, steps=steps
            )
            beams = tk.beam_search(
                self.head, state, inst.graph, inst.name_me_nodes, steps=steps
            )
            return greedy, beams


def _check_task(instances, task: str) -> None:
    want = tk.FitbInstance if task == tk.TASK_FITB else tk.VarNamingInstance
    for inst in instances:
        if not isinstance(inst, want):
            raise ValueError(f"instance of {type(inst).__name__} does not fit task {task!r}")


def _predict_all(model: TaskModel, instances, threads: int):
    if threads <= 1:
        return [model.predict(inst) for inst in instances]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(model.predict, instances))


def _metrics(model: TaskModel, instances, threads: int = 1) -> tk.MetricsReport:
    preds = _predict_all(model, instances, threads)
    if model.config.task == tk.TASK_FITB:
        return tk.fitb_metrics(preds, instances)
    return tk.varnaming_metrics(preds, instances)


# ---------------------------------------------------------------- checkpoint


@dataclass
class Checkpoint:
    config: ExperimentConfig
    vocab_words: list[str]
    type_names: list[str]
    parameters: dict[str, np.ndarray]
    curve: list[dict] = field(default_factory=list)
    best_metric: float = 0.0

    def save(self, path) -> None:
        payload = {
            "config": self.config.to_dict(),
            "vocab": list(self.vocab_words),
            "types": list(self.type_names),
            "parameters": {
                name: {"shape": list(arr.shape), "values": arr.reshape(-1).tolist()}
                for name, arr in sorted(self.parameters.items())
            },
            "curve": self.curve,
            "best_metric": self.best_metric,
        }
        with open(path, "w", encoding="utf-8") as f:
            json.dump(payload, f, sort_keys=True)
            f.write("\n")

    @classmethod
    def load(cls, path) -> "Checkpoint":
        with open(path, encoding="utf-8") as f:
            payload = json.load(f)
        params = {
            name: np.array(entry["values"], dtype=np.float64).reshape(entry["shape"])
            for name, entry in payload["parameters"].items()
        }
        return cls(
            ExperimentConfig.from_dict(payload["config"]),
            payload["vocab"],
            payload["types"],
            params,
            payload.get("curve", []),
            payload.get("best_metric", 0.0),
        )

    def build_model(self) -> TaskModel:
        vocab = em.VocabTable.from_list(self.vocab_words)
        types = em.TypeTable.from_list(self.type_names)
        model = TaskModel(self.config, vocab, types)
        seen = set()
        for p in model.parameters():
            if p.name not in self.parameters:
                raise ValueError(f"checkpoint is missing parameter {p.name!r}")
            saved = self.parameters[p.name]
            if saved.shape != p.values.shape:
                raise ValueError(
                    f"parameter {p.name!r} has shape {p.values.shape}, checkpoint {saved.shape}"
                )
            p.tensor.values[:] = saved
            seen.add(p.name)
        extra = set(self.parameters) - seen
        if extra:
            raise ValueError(f"checkpoint has unknown parameters: {sorted(extra)}")
        return model


def _snapshot(model: TaskModel) -> dict[str, np.ndarray]:
    out = {}
    for p in model.parameters():
        if p.name in out:
            raise ValueError(f"duplicate parameter name {p.name!r}")
        out[p.name] = p.values.copy()
    return out


# ------------------------------------------------------------------ training


class TrainingDiverged(RuntimeError):
    pass


def train(config: ExperimentConfig, train_instances, val_instances, log=None) -> Checkpoint:
    """Adam with gradient accumulation; early stopping on the validation
    metric (accuracy / exact match) with the configured patience.  Returns
    the checkpoint of the best epoch seen."""
    if not train_instances:
        raise ValueError("training set is empty")
    if not val_instances:
        raise ValueError("validation set is empty")
    _check_task(train_instances, config.task)
    _check_task(val_instances, config.task)
    vocab, types = build_tables(config, train_instances)
    model = TaskModel(config, vocab, types)
    params = model.parameters()
    shuffler = random.Random(config.seed)
    curve: list[dict] = []
    best_metric = -float("inf")
    best_params: dict[str, np.ndarray] = {}
    since_improvement = 0
    for epoch in range(1, config.max_epochs + 1):
        order = list(range(len(train_instances)))
        shuffler.shuffle(order)
        total_loss = 0.0
        for start in range(0, len(order), config.batch_size):
            batch = order[start : start + config.batch_size]
            for i in batch:
                loss = model.loss(train_instances[i])
                value = float(loss.values)
                if not np.isfinite(value):
                    raise TrainingDiverged(
                        f"non-finite loss {value} on train instance {i} in epoch {epoch}"
                    )
                total_loss += value
                T.mul(loss, 1.0 / len(batch)).backward()
            T.adam_update([p for p in params if p.tensor.grad is not None], lr=config.lr)
        metric = _metrics(model, val_instances).accuracy
        curve.append(
            {"epoch": epoch, "train_loss": total_loss / len(order), "val_metric": metric}
        )
        if log is not None:
            log(curve[-1])
        if metric > best_metric:
            best_metric = metric
            best_params = _snapshot(model)
            since_improvement = 0
        else:
            since_improvement += 1
        if since_improvement >= config.patience:
            break
    return Checkpoint(config, vocab.to_list(), types.to_list(), best_params, curve, best_metric)


# ---------------------------------------------------------------- evaluation


@dataclass
class EvalResult:
    split: str
    report: tk.MetricsReport
    wall_clock_s: float

    def to_json(self) -> dict:
        out = {"split": self.split, "wall_clock_s": self.wall_clock_s}
        out.update(self.report.to_json())
        return out


def evaluate(checkpoint: Checkpoint, instances, split_name: str, threads=None) -> EvalResult:
    if not instances:
        raise ValueError(f"no instances in split {split_name!r}")
    _check_task(instances, checkpoint.config.task)
    model = checkpoint.build_model()
    started = time.perf_counter()
    report = _metrics(model, instances, threads=worker_count(threads))
    return EvalResult(split_name, report, time.perf_counter() - started)


# ---------------------------------------------------------------- prediction


class UsageError(ValueError):
    """The request itself is malformed (missing or unknown target)."""


def predict_source(checkpoint: Checkpoint, text: str, path: str = "<source>",
                   target=None, top: int = 5) -> dict:
    """Run the checkpointed model on one source file.

    `target` names the identifier to hide; FITB blanks one of its usages,
    VarNaming hides every occurrence.  The available targets are exactly the
    names the instance generators would produce instances for.
    """
    config = checkpoint.config
    g = ps.parse_source(text, path)
    named: dict[str, object] = {}
    if config.task == tk.TASK_FITB:
        insts = tk.make_fitb_instances(
            g, config.seed, config.representation, config.gsc_mode, config.max_nodes
        )
        for inst in insts:
            named.setdefault(g.nodes[g.decl_of[inst.blank_node]].name, inst)
    else:
        insts = tk.make_varnaming_instances(
            g, config.seed, config.representation, config.gsc_mode, config.max_nodes
        )
        for inst in insts:
            # the declaration leaf resolves to itself and still knows the name
            decls = [n for n in sorted(inst.name_me_nodes) if g.decl_of.get(n) == n]
            if decls:
                named.setdefault(g.nodes[decls[0]].name, inst)
    if not named:
        raise UsageError(f"no predictable targets in {path}")
    if target is None:
        raise UsageError(f"no target specified; choose one of: {', '.join(sorted(named))}")
    if target not in named:
        raise UsageError(f"unknown target {target!r}; choose one of: {', '.join(sorted(named))}")
    inst = named[target]
    model = checkpoint.build_model()
    result = {"task": config.task, "file": path, "target": target}
    if config.task == tk.TASK_FITB:
        candidates = []
        for nid, score in model.predict(inst)[:top]:
            line, column = inst.graph.positions.get(nid, (None, None))
            candidates.append(
                {"node": nid, "name": inst.graph.nodes[nid].name, "score": score,
                 "line": line, "column": column}
            )
        result["candidates"] = candidates
    else:
        _, beams = model.predict(inst)
        result["names"] = [
            {"words": list(words), "name": "".join(words), "log_prob": lp}
            for words, lp in beams[:top]
        ]
    return result


# ------------------------------------------------------------ random baseline


@dataclass
class BaselineReport:
    radius: int
    trials: int
    count: int
    mc_accuracy: float
    std_error: float
    exact_expectation: float

    def to_json(self) -> dict:
        return asdict(self)


def _candidates_in_radius(g: gr.CodeGraph, center: int, radius: int) -> list[int]:
    adj: dict[int, set[int]] = {nid: set() for nid in g.nodes}
    for s, d, _ in g.edges:
        adj[s].add(d)
        adj[d].add(s)
    seen = {center}
    frontier = [center]
    for _ in range(radius):
        nxt = {m for v in frontier for m in adj[v]} - seen
        if not nxt:
            break
        seen.update(nxt)
        frontier = sorted(nxt)
    return sorted(nid for nid in seen if g.nodes[nid].kind == gr.VARIABLE)


def random_baseline_fitb(instances, radius: int = 8, trials: int = 500, seed: int = 0) -> BaselineReport:
    """Uniform guess among variable nodes within the edge radius of the
    blank.  Reports the Monte-Carlo estimate with standard error next to the
    exact per-instance expectation c/k."""
    if radius < 1:
        raise ValueError("radius must be >= 1")
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if not instances:
        raise ValueError("no instances to guess on")
    _check_task(instances, tk.TASK_FITB)
    pools = []
    exact_total = 0.0
    for inst in instances:
        cands = _candidates_in_radius(inst.graph, inst.blank_node, radius)
        hits = sum(1 for nid in cands if nid in inst.correct_nodes)
        exact_total += hits / len(cands) if cands else 0.0
        pools.append((cands, inst.correct_nodes))
    rng = np.random.default_rng(seed)
    per_trial = np.empty(trials)
    for t in range(trials):
        wins = 0
        for cands, correct in pools:
            if cands and int(cands[rng.integers(len(cands))]) in correct:
                wins += 1
        per_trial[t] = wins / len(instances)
    se = float(per_trial.std(ddof=1) / np.sqrt(trials)) if trials > 1 else 0.0
    return BaselineReport(
        radius,
        trials,
        len(instances),
        float(per_trial.mean()),
        se,
        exact_total / len(instances),
    )
