import json
import os

import pytest

from gscode import corpus as cp


def make_corpus(tmp_path, files):
    for rel, text in files.items():
        p = tmp_path / rel
        p.parent.mkdir(parents=True, exist_ok=True)
        p.write_text(text)
    return tmp_path


def test_scan_orders_lexicographically(tmp_path):
    root = make_corpus(tmp_path, {"b/Bar.src": "class B {}", "a/Foo.src": "class A {}"})
    units = cp.scan_corpus(root)
    assert [(u.repo_id, u.path) for u in units] == [("a", "Foo.src"), ("b", "Bar.src")]


def test_scan_empty_corpus_is_error(tmp_path):
    (tmp_path / "a").mkdir()
    with pytest.raises(ValueError, match="empty corpus"):
        cp.scan_corpus(tmp_path)


def test_scan_skips_unreadable_with_warning(tmp_path, caplog, monkeypatch):
    root = make_corpus(
        tmp_path,
        {"a/X.src": "class X {}", "a/Y.src": "class Y {}", "a/Z.src": "class Z {}"},
    )
    real_read = cp.Path.read_text

    def flaky(self, *args, **kwargs):
        if self.name == "Y.src":
            raise PermissionError(13, "Permission denied", str(self))
        return real_read(self, *args, **kwargs)

    monkeypatch.setattr(cp.Path, "read_text", flaky)
    with caplog.at_level("WARNING"):
        units = cp.scan_corpus(root)
    assert [u.path for u in units] == ["X.src", "Z.src"]
    assert sum("skipping unreadable" in r.message for r in caplog.records) == 1


def six_repo_units():
    units = []
    for r in "abcdef":
        for i in range(4):
            units.append(cp.SourceUnit(r, f"F{i}.src", f"class {r.upper()}{i} {{}}"))
    return units


def test_split_determinism():
    units = six_repo_units()
    s1 = cp.split_dataset(units, 1, 0.15, 0.15, seed=7)
    s2 = cp.split_dataset(units, 1, 0.15, 0.15, seed=7)
    assert s1.to_json() == s2.to_json()
    s3 = cp.split_dataset(units, 1, 0.15, 0.15, seed=8)
    assert s3.to_json() != s1.to_json()


def test_split_partitions_all_files():
    units = six_repo_units()
    split = cp.split_dataset(units, 2, 0.25, 0.25, seed=3)
    buckets = [split.train, split.validation, split.seen_test, split.unseen_test]
    keys = [u.key for b in buckets for u in b]
    assert sorted(keys) == sorted(u.key for u in units)


def test_unseen_test_holds_out_whole_repos():
    units = six_repo_units()
    split = cp.split_dataset(units, 2, 0.25, 0.25, seed=3)
    unseen_repos = {u.repo_id for u in split.unseen_test}
    assert len(unseen_repos) == 2
    for bucket in (split.train, split.validation, split.seen_test):
        assert all(u.repo_id not in unseen_repos for u in bucket)
    for r in unseen_repos:
        assert sum(1 for u in split.unseen_test if u.repo_id == r) == 4


def test_zero_unseen_repos():
    split = cp.split_dataset(six_repo_units(), 0, 0.25, 0.25, seed=1)
    assert split.unseen_test == []


def test_bad_fraction_rejected():
    with pytest.raises(ValueError):
        cp.split_dataset(six_repo_units(), 1, 0.0, 0.25, seed=1)
    with pytest.raises(ValueError):
        cp.split_dataset(six_repo_units(), 1, 0.25, 1.0, seed=1)


def test_too_few_repos_rejected():
    units = [cp.SourceUnit("only", "A.src", "class A {}")]
    with pytest.raises(ValueError):
        cp.split_dataset(units, 1, 0.25, 0.25, seed=1)


def test_manifest_keys_and_roundtrip():
    units = six_repo_units()
    split = cp.split_dataset(units, 1, 0.25, 0.25, seed=11)
    manifest = json.loads(split.to_json())
    assert set(manifest) == {"seed", "train", "validation", "seen_test", "unseen_test"}
    assert all("/" in k for k in manifest["train"])
    back = cp.DatasetSplit.from_manifest(manifest, units)
    assert sorted(u.key for u in back.train) == manifest["train"]


def word_file(words, per_line=10):
    lines = []
    for i in range(0, len(words), per_line):
        lines.append(" ".join(words[i : i + per_line]) + " ;")
    return "\n".join(lines)


def test_identical_files_fully_duplicated():
    text = word_file([f"w{i}" for i in range(200)])
    units = [cp.SourceUnit("a", "X.src", text), cp.SourceUnit("b", "Y.src", text)]
    report = cp.detect_duplication(units, min_token_run=150)
    assert report.fraction == pytest.approx(1.0)


def test_distinct_files_have_zero_duplication():
    u1 = cp.SourceUnit("a", "X.src", word_file([f"x{i}" for i in range(200)]))
    u2 = cp.SourceUnit("b", "Y.src", word_file([f"y{i}" for i in range(200)]))
    report = cp.detect_duplication([u1, u2], min_token_run=150)
    assert report.fraction == 0.0
    assert report.locations == []


def test_repeated_block_within_one_file():
    block = [f"b{i}" for i in range(160)]
    filler = [f"u{i}" for i in range(300)]
    text = word_file(block) + "\n" + word_file(filler) + "\n" + word_file(block)
    unit = cp.SourceUnit("a", "X.src", text)
    report = cp.detect_duplication([unit], min_token_run=150)
    assert 0.0 < report.fraction < 1.0
    dup = {line for loc in report.locations for line in range(loc["start_line"], loc["end_line"] + 1)}
    n_block_lines = len(word_file(block).splitlines())
    filler_start = n_block_lines + 1
    assert all(line <= n_block_lines or line > filler_start + len(word_file(filler).splitlines()) - 1 for line in dup)


def brute_force_dup_lines(units, L):
    streams = []
    for u in units:
        from gscode.lexer import tokenize

        streams.append([(t.text, t.line) for t in tokenize(u.text)])
    windows = {}
    for fi, s in enumerate(streams):
        for start in range(len(s) - L + 1):
            key = tuple(t for t, _ in s[start : start + L])
            windows.setdefault(key, []).append((fi, start))
    dup = {fi: set() for fi in range(len(units))}
    for occs in windows.values():
        if len(occs) >= 2:
            for fi, start in occs:
                for _, line in streams[fi][start : start + L]:
                    dup[fi].add(line)
    return sum(len(v) for v in dup.values())


def test_detector_matches_brute_force_oracle():
    import random

    rng = random.Random(0)
    units = []
    shared = [f"s{i}" for i in range(30)]
    for fi in range(8):
        words = [f"f{fi}w{i}" for i in range(rng.randrange(20, 60))]
        if fi % 2 == 0:
            pos = rng.randrange(0, len(words))
            words[pos:pos] = shared
        units.append(cp.SourceUnit("r", f"F{fi}.src", word_file(words, per_line=7)))
    for L in (10, 25, 30):
        report = cp.detect_duplication(units, min_token_run=L)
        assert report.duplicated_lines == brute_force_dup_lines(units, L)


def test_empty_units_fraction_zero():
    report = cp.detect_duplication([], min_token_run=150)
    assert report.fraction == 0.0
