"""Evaluation metrics for both tasks.

Naming metrics compare word sequences; the character-level edit distance
runs on the concatenated lowercase words so that word segmentation does not
mask (or invent) character errors.
"""

from __future__ import annotations

from dataclasses import dataclass

from ..embed import EOS


@dataclass
class MetricsReport:
    task: str
    count: int
    accuracy: float
    top5_accuracy: float
    subword_accuracy: float | None = None
    edit_distance: float | None = None
    normalized_edit_distance: float | None = None

    def to_json(self) -> dict:
        out = {"task": self.task, "count": self.count, "accuracy": self.accuracy,
               "top5_accuracy": self.top5_accuracy}
        if self.subword_accuracy is not None:
            out["subword_accuracy"] = self.subword_accuracy
            out["edit_distance"] = self.edit_distance
            out["normalized_edit_distance"] = self.normalized_edit_distance
        return out


def levenshtein(a: str, b: str) -> int:
    """Classic two-row edit-distance DP over characters."""
    if len(a) < len(b):
        a, b = b, a
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        cur = [i]
        for j, cb in enumerate(b, start=1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb)))
        prev = cur
    return prev[-1]


def fitb_metrics(ranked_lists, instances) -> MetricsReport:
    """ranked_lists[i] is the candidate ranking for instances[i], best first."""
    if len(ranked_lists) != len(instances):
        raise ValueError("predictions and instances are misaligned")
    hits = top5 = 0
    for ranked, inst in zip(ranked_lists, instances):
        ids = [nid for nid, _ in ranked]
        if ids and ids[0] in inst.correct_nodes:
            hits += 1
        if any(nid in inst.correct_nodes for nid in ids[:5]):
            top5 += 1
    n = max(1, len(instances))
    return MetricsReport("fitb", len(instances), hits / n, top5 / n)


def _trim(words) -> list[str]:
    out = []
    for w in words:
        if w == EOS:
            break
        out.append(w)
    return out


def varnaming_metrics(predictions, instances) -> MetricsReport:
    """predictions[i] = (greedy word sequence, beam list of (words, logprob)).

    Exact match requires the greedy sequence to reproduce every target word
    and then emit EOS; top-5 asks whether any beam equals the target words.
    Subword accuracy is the fraction of word positions the greedy sequence
    gets right; edit distance is character-wise on the joined name.
    """
    if len(predictions) != len(instances):
        raise ValueError("predictions and instances are misaligned")
    exact = top5 = 0
    subword_num = subword_den = 0
    dist_total = 0.0
    norm_total = 0.0
    for (greedy, beams), inst in zip(predictions, instances):
        target = inst.target_words  # words + EOS
        true_words = target[:-1]
        if list(greedy[: len(target)]) == list(target):
            exact += 1
        if any(tuple(words) == tuple(true_words) for words, _ in beams[:5]):
            top5 += 1
        pred_words = _trim(greedy)
        for i, w in enumerate(true_words):
            subword_den += 1
            if i < len(pred_words) and pred_words[i] == w:
                subword_num += 1
        true_name = "".join(true_words)
        dist = levenshtein("".join(pred_words), true_name)
        dist_total += dist
        norm_total += dist / max(1, len(true_name))
    n = max(1, len(instances))
    return MetricsReport(
        "varnaming",
        len(instances),
        exact / n,
        top5 / n,
        subword_num / max(1, subword_den),
        dist_total / n,
        norm_total / n,
    )
