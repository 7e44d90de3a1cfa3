"""Scoring under the strict exact-match protocol, plus the rank-correlation
and bootstrap statistics used to sanity-check a benchmark against external
references.
"""

from __future__ import annotations

import math
import random
import re
import time
from dataclasses import dataclass
from typing import Optional, Sequence

from .benchmark import BenchmarkItem
from .errors import DegenerateInput, LengthMismatch, UnknownItemId


@dataclass(frozen=True)
class Prediction:
    item_id: str
    raw_text: str

    def to_record(self) -> dict:
        return {"item_id": self.item_id, "raw_text": self.raw_text}

    @classmethod
    def from_record(cls, rec: dict) -> "Prediction":
        return cls(rec["item_id"], rec.get("raw_text", ""))


@dataclass
class EvaluationReport:
    model_name: str
    timestamp: str
    overall_accuracy: float
    correct: int
    total: int
    per_subject: dict[str, dict]
    error_samples: list[dict]

    def to_record(self) -> dict:
        return {
            "model_name": self.model_name,
            "timestamp": self.timestamp,
            "overall_accuracy": self.overall_accuracy,
            "correct": self.correct,
            "total": self.total,
            "per_subject": self.per_subject,
            "error_samples": self.error_samples,
        }

    @classmethod
    def from_record(cls, rec: dict) -> "EvaluationReport":
        return cls(
            model_name=rec["model_name"],
            timestamp=rec["timestamp"],
            overall_accuracy=rec["overall_accuracy"],
            correct=rec["correct"],
            total=rec["total"],
            per_subject=dict(rec["per_subject"]),
            error_samples=list(rec["error_samples"]),
        )


# A letter counts only when it stands alone: an uppercase option letter with
# no alphanumeric on either side. "answer is"-style framing is stripped
# first; phrasing never contains standalone capitals so this is belt and
# braces, but it keeps the scan anchored to post-verdict text.
_ANSWER_FRAME_RE = re.compile(r"(?i)\b(?:the\s+)?(?:correct\s+)?answer(?:s)?\s*(?:is|are)?\s*[:\-]?")


def parse_multi_choice_answer(raw: str, valid: Sequence[str] = ("A", "B", "C", "D")) -> str:
    """Canonicalize a generative answer: extract standalone option letters,
    filter to the valid set, deduplicate, sort, and comma-join. An empty
    result is allowed and scores as wrong."""
    valid_set = {v.upper() for v in valid}
    if not valid_set:
        raise ValueError("valid letter set must be non-empty")
    text = _ANSWER_FRAME_RE.sub(" ", raw or "")
    letters = {
        m.group(1)
        for m in re.finditer(r"(?<![A-Za-z0-9])([A-Z])(?![A-Za-z0-9])", text)
        if m.group(1) in valid_set
    }
    return ",".join(sorted(letters))


def canonical_truth(item: BenchmarkItem) -> str:
    return ",".join(sorted(item.answer))


def score(
    benchmark: Sequence[BenchmarkItem],
    predictions: Sequence[Prediction],
    model_name: str = "external",
    timestamp: Optional[str] = None,
) -> EvaluationReport:
    """Exact-match scoring with no partial credit.

    An item is correct iff the canonicalized prediction equals the
    canonicalized truth; missing predictions score as wrong.
    """
    by_item: dict[str, Prediction] = {}
    for pred in predictions:
        if pred.item_id in by_item:
            raise ValueError(f"duplicate prediction for item {pred.item_id}")
        by_item[pred.item_id] = pred
    known = {item.item_id for item in benchmark}
    for item_id in by_item:
        if item_id not in known:
            raise UnknownItemId(item_id)

    if timestamp is None:
        timestamp = time.strftime("%Y%m%d_%H%M%S")

    correct = 0
    per_subject: dict[str, dict] = {}
    error_samples: list[dict] = []
    for item in benchmark:
        truth = canonical_truth(item)
        pred = by_item.get(item.item_id)
        predicted = parse_multi_choice_answer(pred.raw_text, sorted(item.options)) if pred else ""
        ok = predicted == truth

        bucket = per_subject.setdefault(item.cid, {"accuracy": 0.0, "total": 0, "errors": 0})
        bucket["total"] += 1
        if ok:
            correct += 1
        else:
            bucket["errors"] += 1
            error_samples.append({
                "item_id": item.item_id,
                "question": item.question,
                "true_answer": truth,
                "predicted_answer": predicted,
                "question_type": item.question_type,
                "cid": item.cid,
                "metadata": item.metadata,
            })

    for bucket in per_subject.values():
        bucket["accuracy"] = (bucket["total"] - bucket["errors"]) / bucket["total"]

    total = len(benchmark)
    return EvaluationReport(
        model_name=model_name,
        timestamp=timestamp,
        overall_accuracy=correct / total if total else 0.0,
        correct=correct,
        total=total,
        per_subject=dict(sorted(per_subject.items())),
        error_samples=error_samples,
    )


def error_set(report: EvaluationReport) -> list[dict]:
    """The incorrect items with metadata carried through (the input for
    diagnosis)."""
    return list(report.error_samples)


def _average_ranks(values: Sequence[float]) -> list[float]:
    order = sorted(range(len(values)), key=lambda i: values[i])
    ranks = [0.0] * len(values)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        rank = (i + j) / 2 + 1  # average of 1-based positions
        for pos in range(i, j + 1):
            ranks[order[pos]] = rank
        i = j + 1
    return ranks


def spearman_rho(a: Sequence[float], b: Sequence[float]) -> float:
    """Rank correlation with average-rank tie handling (Pearson over ranks)."""
    if len(a) != len(b):
        raise LengthMismatch(f"lengths differ: {len(a)} vs {len(b)}")
    if len(a) < 2:
        raise LengthMismatch("need at least 2 observations")
    ra, rb = _average_ranks(a), _average_ranks(b)
    n = len(ra)
    mean_a = sum(ra) / n
    mean_b = sum(rb) / n
    cov = sum((ra[i] - mean_a) * (rb[i] - mean_b) for i in range(n))
    var_a = sum((x - mean_a) ** 2 for x in ra)
    var_b = sum((x - mean_b) ** 2 for x in rb)
    if var_a == 0 or var_b == 0:
        raise DegenerateInput("zero rank variance")
    return cov / math.sqrt(var_a * var_b)


def _quantile(sorted_values: Sequence[float], q: float) -> float:
    """Linear-interpolation quantile over pre-sorted values."""
    if not sorted_values:
        raise ValueError("empty values")
    h = (len(sorted_values) - 1) * q
    lo = math.floor(h)
    hi = math.ceil(h)
    if lo == hi:
        return sorted_values[lo]
    return sorted_values[lo] + (sorted_values[hi] - sorted_values[lo]) * (h - lo)


def bootstrap_ci(
    values: Sequence[float],
    resamples: int = 10_000,
    level: float = 0.95,
    seed: int = 0,
) -> tuple[float, float]:
    """Percentile bootstrap interval for the mean.

    Resampler contract (pinned so independent implementations can agree
    exactly): rng = random.Random(seed); each resample draws n indices via
    rng.randrange(n) in order; the statistic is sum/n; interval bounds are
    linear-interpolation quantiles of the sorted statistics at
    (1-level)/2 and 1-(1-level)/2.
    """
    if not values:
        raise ValueError("values must be non-empty")
    if not 0 < level < 1:
        raise ValueError("level must lie in (0, 1)")
    n = len(values)
    rng = random.Random(seed)
    stats = []
    for _ in range(resamples):
        total = 0.0
        for _ in range(n):
            total += values[rng.randrange(n)]
        stats.append(total / n)
    stats.sort()
    alpha = (1 - level) / 2
    return _quantile(stats, alpha), _quantile(stats, 1 - alpha)


def run_inference(benchmark: Sequence[BenchmarkItem], backend) -> list[Prediction]:
    """Drive greedy inference over the benchmark via a generation backend.

    Offered for convenience; the canonical path scores externally produced
    prediction files.
    """
    from . import prompts

    out = []
    for item in benchmark:
        request = prompts.render_eval_inference(item.question, item.options)
        out.append(Prediction(item.item_id, backend.complete(request)))
    return out
