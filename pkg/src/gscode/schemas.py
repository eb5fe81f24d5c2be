"""Request and response bodies for the HTTP service.

Paths in requests are paths on the machine running the service; this is a
local experiment-runner facade, not a multi-tenant API.
"""

from __future__ import annotations

from typing import Literal

from pydantic import BaseModel, Field

SplitName = Literal["train", "validation", "seen", "unseen"]


class ExtractRequest(BaseModel):
    input_dir: str
    out_dir: str
    unseen_repo_count: int = Field(1, ge=0)
    seen_file_fraction: float = 0.15
    val_fraction: float = 0.15
    seed: int = 0
    min_token_run: int = Field(150, ge=1)


class ExtractResponse(BaseModel):
    manifest_path: str
    units: int
    repos: int
    split_sizes: dict[str, int]
    duplication_fraction: float


class InstancesRequest(BaseModel):
    input_dir: str
    manifest_path: str
    out_dir: str
    task: Literal["fitb", "varnaming"]
    representation: Literal["ast", "augast"] = "augast"
    vocab_strategy: Literal["closed_vocab", "charcnn", "pointer_sentinel", "gsc"] = "gsc"
    seed: int = 0
    max_nodes: int = Field(500, ge=1)
    per_variable: int = Field(1, ge=1)


class ParseFailure(BaseModel):
    unit: str
    reason: str


class InstancesResponse(BaseModel):
    out_dir: str
    counts: dict[str, int]
    failures: list[ParseFailure]


class TrainRequest(BaseModel):
    data_dir: str
    out_dir: str
    config_path: str | None = None
    # each field overrides the config file (or the default) when set
    task: str | None = None
    representation: str | None = None
    vocab_strategy: str | None = None
    gnn: str | None = None
    hidden: int | None = None
    rounds: int | None = None
    max_nodes: int | None = None
    unroll: int | None = None
    vocab_size: int | None = None
    lr: float | None = None
    batch_size: int | None = None
    patience: int | None = None
    max_epochs: int | None = None
    seed: int | None = None
    mixture: str | None = None


class TrainResponse(BaseModel):
    checkpoint_path: str
    config: dict
    config_digest: str
    epochs: int
    best_metric: float
    curve: list[dict]


class EvalRequest(BaseModel):
    checkpoint_path: str
    data_dir: str
    split: SplitName
    threads: int | None = None


class EvalResponse(BaseModel):
    split: str
    wall_clock_s: float
    task: str
    count: int
    accuracy: float
    top5_accuracy: float
    subword_accuracy: float | None = None
    edit_distance: float | None = None
    normalized_edit_distance: float | None = None


class BaselineRequest(BaseModel):
    instances_path: str
    radius: int = Field(8, ge=1)
    trials: int = Field(500, ge=1)
    seed: int = 0


class BaselineResponse(BaseModel):
    radius: int
    trials: int
    count: int
    mc_accuracy: float
    std_error: float
    exact_expectation: float


class PredictRequest(BaseModel):
    checkpoint_path: str
    file_path: str
    target: str | None = None
    top: int = Field(5, ge=1)


class FitbCandidate(BaseModel):
    node: int
    name: str | None
    score: float
    line: int | None
    column: int | None


class NameHypothesis(BaseModel):
    words: list[str]
    name: str
    log_prob: float


class PredictResponse(BaseModel):
    task: str
    file: str
    target: str
    candidates: list[FitbCandidate] | None = None
    names: list[NameHypothesis] | None = None


class HealthResponse(BaseModel):
    status: str
    version: str
