"""HTTP facade over the pipeline: corpus extraction, instance generation,
training, evaluation, the random baseline, and single-file prediction."""

from __future__ import annotations

import json
from dataclasses import fields
from pathlib import Path

from fastapi import FastAPI
from fastapi.responses import JSONResponse

from . import __version__
from . import corpus as cp
from . import harness as hn
from . import tasks as tk
from .lexer import ParseError
from .schemas import (
    BaselineRequest,
    BaselineResponse,
    EvalRequest,
    EvalResponse,
    ExtractRequest,
    ExtractResponse,
    HealthResponse,
    InstancesRequest,
    InstancesResponse,
    ParseFailure,
    PredictRequest,
    PredictResponse,
    TrainRequest,
    TrainResponse,
)

SPLIT_FILES = {
    "train": "train.jsonl",
    "validation": "validation.jsonl",
    "seen": "seen_test.jsonl",
    "unseen": "unseen_test.jsonl",
}

_CONFIG_KEYS = tuple(f.name for f in fields(hn.ExperimentConfig))


def _read_instances(path: Path):
    if not path.is_file():
        raise FileNotFoundError(f"no instance file at {path}")
    return tk.read_instances(path)


def create_app() -> FastAPI:
    app = FastAPI(title="gscode", version=__version__)

    def _as_detail(status: int):
        async def handler(request, exc):
            return JSONResponse(status_code=status, content={"detail": str(exc)})

        return handler

    # handlers match along the exception MRO, so UsageError wins over ValueError
    app.add_exception_handler(hn.UsageError, _as_detail(422))
    app.add_exception_handler(ValueError, _as_detail(400))
    app.add_exception_handler(ParseError, _as_detail(400))
    app.add_exception_handler(hn.TrainingDiverged, _as_detail(400))
    app.add_exception_handler(OSError, _as_detail(400))

    @app.get("/health", response_model=HealthResponse)
    def health() -> HealthResponse:
        return HealthResponse(status="ok", version=__version__)

    @app.post("/extract", response_model=ExtractResponse)
    def extract(req: ExtractRequest) -> ExtractResponse:
        units = cp.scan_corpus(req.input_dir)
        split = cp.split_dataset(
            units, req.unseen_repo_count, req.seen_file_fraction, req.val_fraction, req.seed
        )
        duplication = cp.detect_duplication(units, req.min_token_run)
        out_dir = Path(req.out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        manifest_path = out_dir / "manifest.json"
        manifest_path.write_text(split.to_json() + "\n", encoding="utf-8")
        return ExtractResponse(
            manifest_path=str(manifest_path),
            units=len(units),
            repos=len({u.repo_id for u in units}),
            split_sizes={
                "train": len(split.train),
                "validation": len(split.validation),
                "seen_test": len(split.seen_test),
                "unseen_test": len(split.unseen_test),
            },
            duplication_fraction=duplication.fraction,
        )

    @app.post("/instances", response_model=InstancesResponse)
    def instances(req: InstancesRequest) -> InstancesResponse:
        units = cp.scan_corpus(req.input_dir)
        manifest = json.loads(Path(req.manifest_path).read_text(encoding="utf-8"))
        split = cp.DatasetSplit.from_manifest(manifest, units)
        config = hn.ExperimentConfig(
            task=req.task,
            representation=req.representation,
            vocab_strategy=req.vocab_strategy,
            seed=req.seed,
            max_nodes=req.max_nodes,
        )
        out_dir = Path(req.out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        counts: dict[str, int] = {}
        failures: list[ParseFailure] = []
        for part in ("train", "validation", "seen_test", "unseen_test"):
            insts, fails = hn.generate_instances(
                split.part(part), config, per_variable=req.per_variable
            )
            tk.write_instances(insts, out_dir / f"{part}.jsonl")
            counts[part] = len(insts)
            failures.extend(ParseFailure(unit=key, reason=why) for key, why in fails)
        return InstancesResponse(out_dir=str(out_dir), counts=counts, failures=failures)

    @app.post("/train", response_model=TrainResponse)
    def train(req: TrainRequest) -> TrainResponse:
        overrides = {k: getattr(req, k) for k in _CONFIG_KEYS if getattr(req, k) is not None}
        if req.config_path is not None:
            config = hn.load_config(req.config_path, **overrides)
        else:
            config = hn.ExperimentConfig.from_dict(overrides)
        data_dir = Path(req.data_dir)
        train_instances = _read_instances(data_dir / SPLIT_FILES["train"])
        val_instances = _read_instances(data_dir / SPLIT_FILES["validation"])
        checkpoint = hn.train(config, train_instances, val_instances)
        out_dir = Path(req.out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        checkpoint_path = out_dir / "checkpoint.json"
        checkpoint.save(checkpoint_path)
        hn.save_config(config, out_dir / "config.cfg")
        return TrainResponse(
            checkpoint_path=str(checkpoint_path),
            config=config.to_dict(),
            config_digest=config.digest(),
            epochs=len(checkpoint.curve),
            best_metric=checkpoint.best_metric,
            curve=checkpoint.curve,
        )

    @app.post("/eval", response_model=EvalResponse, response_model_exclude_none=True)
    def eval_split(req: EvalRequest) -> EvalResponse:
        checkpoint = hn.Checkpoint.load(req.checkpoint_path)
        instances = _read_instances(Path(req.data_dir) / SPLIT_FILES[req.split])
        result = hn.evaluate(checkpoint, instances, req.split, threads=req.threads)
        return EvalResponse(**result.to_json())

    @app.post("/baseline", response_model=BaselineResponse)
    def baseline(req: BaselineRequest) -> BaselineResponse:
        instances = _read_instances(Path(req.instances_path))
        report = hn.random_baseline_fitb(instances, req.radius, req.trials, req.seed)
        return BaselineResponse(**report.to_json())

    @app.post("/predict", response_model=PredictResponse, response_model_exclude_none=True)
    def predict(req: PredictRequest) -> PredictResponse:
        checkpoint = hn.Checkpoint.load(req.checkpoint_path)
        text = Path(req.file_path).read_text(encoding="utf-8")
        result = hn.predict_source(
            checkpoint, text, path=req.file_path, target=req.target, top=req.top
        )
        return PredictResponse(**result)

    return app
