"""Corpus ingestion, deterministic dataset splits, and duplicate detection.

A corpus root contains one directory per repository; every file below a repo
directory with the source extension is one SourceUnit.  Splits hold out whole
repositories for the unseen-repo test and individual files for the seen test
and validation sets, so instances from one file never straddle a split.
"""

from __future__ import annotations

import json
import logging
import random
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .lexer import ParseError, tokenize
from .util import num_threads

log = logging.getLogger(__name__)

SOURCE_EXTENSION = ".src"

# polynomial rolling hash over interned token ids
_HASH_BASE = 1000003
_HASH_MOD = (1 << 61) - 1


@dataclass(frozen=True)
class SourceUnit:
    repo_id: str
    path: str
    text: str

    @property
    def key(self) -> str:
        return f"{self.repo_id}/{self.path}"


@dataclass
class DatasetSplit:
    train: list = field(default_factory=list)
    validation: list = field(default_factory=list)
    seen_test: list = field(default_factory=list)
    unseen_test: list = field(default_factory=list)
    seed: int = 0

    def part(self, name: str) -> list:
        if name not in ("train", "validation", "seen_test", "unseen_test"):
            raise ValueError(f"unknown split part {name!r}")
        return getattr(self, name)

    def to_manifest(self) -> dict:
        return {
            "seed": self.seed,
            "train": sorted(u.key for u in self.train),
            "validation": sorted(u.key for u in self.validation),
            "seen_test": sorted(u.key for u in self.seen_test),
            "unseen_test": sorted(u.key for u in self.unseen_test),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_manifest(), sort_keys=True)

    @classmethod
    def from_manifest(cls, manifest: dict, units: list) -> "DatasetSplit":
        by_key = {u.key: u for u in units}
        split = cls(seed=manifest["seed"])
        for name in ("train", "validation", "seen_test", "unseen_test"):
            for key in manifest[name]:
                if key in by_key:
                    split.part(name).append(by_key[key])
        return split


def _read_unit(root: Path, path: Path) -> SourceUnit | None:
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        log.warning("skipping unreadable file %s: %s", path, exc)
        return None
    rel = path.relative_to(root)
    parts = rel.parts
    repo_id = parts[0] if len(parts) > 1 else ""
    sub = "/".join(parts[1:]) if len(parts) > 1 else parts[0]
    return SourceUnit(repo_id, sub, text)


def scan_corpus(root, extension: str = SOURCE_EXTENSION) -> list[SourceUnit]:
    """All source files under root, ordered by (repo_id, path).

    Unreadable files are skipped with a warning; a corpus with no matching
    files is an error.
    """
    root = Path(root)
    if not root.is_dir():
        raise ValueError(f"corpus root {root} is not a directory")
    paths = sorted(p for p in root.rglob("*" + extension) if p.is_file())
    workers = num_threads()
    if workers > 1 and len(paths) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            units = list(pool.map(lambda p: _read_unit(root, p), paths))
    else:
        units = [_read_unit(root, p) for p in paths]
    units = [u for u in units if u is not None]
    units.sort(key=lambda u: (u.repo_id, u.path))
    if not units:
        raise ValueError("empty corpus")
    return units


def split_dataset(
    units: list[SourceUnit],
    unseen_repo_count: int,
    seen_file_fraction: float,
    val_fraction: float,
    seed: int,
) -> DatasetSplit:
    """Seeded repo-level and file-level holdouts; same seed, same split."""
    for frac in (seen_file_fraction, val_fraction):
        if not (0.0 < frac < 1.0):
            raise ValueError(f"fraction {frac} outside (0, 1)")
    repos = sorted({u.repo_id for u in units})
    if len(repos) < unseen_repo_count + 1:
        raise ValueError(
            f"need at least {unseen_repo_count + 1} repos, corpus has {len(repos)}"
        )
    rng = random.Random(seed)
    unseen_repos = set(rng.sample(repos, unseen_repo_count)) if unseen_repo_count else set()

    split = DatasetSplit(seed=seed)
    split.unseen_test = [u for u in units if u.repo_id in unseen_repos]
    rest = [u for u in units if u.repo_id not in unseen_repos]
    order = sorted(rest, key=lambda u: (u.repo_id, u.path))
    rng.shuffle(order)
    n_seen = int(len(order) * seen_file_fraction)
    split.seen_test = order[:n_seen]
    remaining = order[n_seen:]
    n_val = int(len(remaining) * val_fraction)
    split.validation = remaining[:n_val]
    split.train = remaining[n_val:]
    return split


@dataclass
class DuplicationReport:
    fraction: float
    duplicated_lines: int
    total_lines: int
    locations: list = field(default_factory=list)  # {unit, start_line, end_line}


def _token_stream(unit: SourceUnit):
    try:
        toks = tokenize(unit.text)
    except ParseError as exc:
        log.warning("skipping untokenizable file %s: %s", unit.key, exc)
        return None
    return [(t.text, t.line) for t in toks]


def detect_duplication(units: list[SourceUnit], min_token_run: int = 150) -> DuplicationReport:
    """Fraction of source lines inside token runs of >= min_token_run tokens
    that occur two or more times anywhere in the corpus.

    Windows are hashed with a stride-1 rolling hash; candidate matches are
    verified token-by-token before any line is counted.
    """
    if min_token_run < 1:
        raise ValueError("min_token_run must be >= 1")
    streams = []
    for u in units:
        s = _token_stream(u)
        if s is not None:
            streams.append((u, s))

    intern: dict[str, int] = {}
    ids_per_file = []
    for _, stream in streams:
        ids = []
        for text, _ in stream:
            if text not in intern:
                intern[text] = len(intern) + 1
            ids.append(intern[text])
        ids_per_file.append(ids)

    # window hash -> list of (file_index, start)
    occurrences: dict[int, list[tuple[int, int]]] = {}
    L = min_token_run
    top = pow(_HASH_BASE, L - 1, _HASH_MOD)
    for fi, ids in enumerate(ids_per_file):
        if len(ids) < L:
            continue
        h = 0
        for v in ids[:L]:
            h = (h * _HASH_BASE + v) % _HASH_MOD
        occurrences.setdefault(h, []).append((fi, 0))
        for start in range(1, len(ids) - L + 1):
            h = ((h - ids[start - 1] * top) * _HASH_BASE + ids[start + L - 1]) % _HASH_MOD
            occurrences.setdefault(h, []).append((fi, start))

    dup_lines: dict[int, set[int]] = {fi: set() for fi in range(len(streams))}
    for bucket in occurrences.values():
        if len(bucket) < 2:
            continue
        # verify exact equality within the bucket (collision guard)
        groups: list[list[tuple[int, int]]] = []
        for fi, start in bucket:
            window = ids_per_file[fi][start : start + L]
            for grp in groups:
                gfi, gstart = grp[0]
                if ids_per_file[gfi][gstart : gstart + L] == window:
                    grp.append((fi, start))
                    break
            else:
                groups.append([(fi, start)])
        for grp in groups:
            if len(grp) < 2:
                continue
            for fi, start in grp:
                stream = streams[fi][1]
                for _, line in stream[start : start + L]:
                    dup_lines[fi].add(line)

    total_lines = sum(len(u.text.splitlines()) for u, _ in streams)
    duplicated = sum(len(lines) for lines in dup_lines.values())
    locations = []
    for fi, lines in dup_lines.items():
        if not lines:
            continue
        for start, end in _line_ranges(sorted(lines)):
            locations.append({"unit": streams[fi][0].key, "start_line": start, "end_line": end})
    fraction = duplicated / total_lines if total_lines else 0.0
    return DuplicationReport(fraction, duplicated, total_lines, locations)


def _line_ranges(lines: list[int]):
    start = prev = lines[0]
    for x in lines[1:]:
        if x != prev + 1:
            yield start, prev
            start = x
        prev = x
    yield start, prev
