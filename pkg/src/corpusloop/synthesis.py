"""Initial training-corpus synthesis from statements and concepts.

A sliding window batches statements per discipline; each batch is rendered
into open-ended, choice, and true/false samples at a configured mix, with
every sample carrying traceability ids back into the knowledge structure.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

from . import prompts
from .backend import Backend, extract_json_payload
from .errors import EmptyGeneration, SchemaInvalid
from .knowledge import KnowledgeStructure, L1Concept, L2Statement

log = logging.getLogger(__name__)

QUESTION_TYPES = ("open_ended", "single_choice", "multiple_choice", "true_false")
ORIGINS = ("initial", "patch", "replay")
FORMATS = ("open_ended", "choice", "true_false")

TF_OPTIONS = {"A": "True", "B": "False"}

# The choice bucket is split between single- and multi-select inside the
# generation prompt; ~77/23 reproduces the observed global type distribution.
DEFAULT_SINGLE_CHOICE_RATIO = 0.77
DEFAULT_TRUE_RATIO = 0.6

# Ask for a little more than the quota and truncate: generation batches
# under-deliver, and deterministic truncation preserves replay stability.
OVERGEN_FACTOR = 1.1


@dataclass
class TrainingSample:
    sample_id: str
    question: str
    answer: str
    question_type: str
    l2_ids: list[str]
    l1_ids: list[str]
    cid: str
    origin: str = "initial"
    options: Optional[dict[str, str]] = None
    explanation: Optional[str] = None

    def __post_init__(self):
        if self.question_type not in QUESTION_TYPES:
            raise ValueError(f"bad question_type {self.question_type!r}")
        if self.origin not in ORIGINS:
            raise ValueError(f"bad origin {self.origin!r}")
        needs_options = self.question_type != "open_ended"
        if needs_options and not self.options:
            raise ValueError(f"sample {self.sample_id}: {self.question_type} requires options")
        if not needs_options and self.options:
            raise ValueError(f"sample {self.sample_id}: open_ended must not carry options")
        if self.origin == "initial" and not self.l2_ids:
            raise ValueError(f"sample {self.sample_id}: initial sample needs l2_ids")
        if self.question_type == "true_false" and self.answer.split("\n")[0].strip() not in ("A", "B"):
            raise ValueError(f"sample {self.sample_id}: true/false answer must start with A or B")

    def to_record(self) -> dict:
        rec = {
            "sample_id": self.sample_id,
            "question": self.question,
            "answer": self.answer,
            "question_type": self.question_type,
            "l2_ids": self.l2_ids,
            "l1_ids": self.l1_ids,
            "cid": self.cid,
            "origin": self.origin,
        }
        if self.options is not None:
            rec["options"] = self.options
        if self.explanation is not None:
            rec["explanation"] = self.explanation
        return rec

    @classmethod
    def from_record(cls, rec: dict) -> "TrainingSample":
        return cls(
            sample_id=rec["sample_id"],
            question=rec["question"],
            answer=rec["answer"],
            question_type=rec["question_type"],
            l2_ids=list(rec.get("l2_ids", [])),
            l1_ids=list(rec.get("l1_ids", [])),
            cid=rec["cid"],
            origin=rec.get("origin", "initial"),
            options=dict(rec["options"]) if rec.get("options") else None,
            explanation=rec.get("explanation"),
        )

    def to_instruction_record(self) -> dict:
        """Export view for external trainers (the training boundary)."""
        if self.options:
            option_lines = "\n".join(f"{k}. {v}" for k, v in sorted(self.options.items()))
            instruction = f"{self.question}\n\n{option_lines}"
        else:
            instruction = self.question
        output = self.answer
        if self.explanation:
            output = f"{output}\n\n{self.explanation}"
        return {"instruction": instruction, "input": "", "output": output}


@dataclass(frozen=True)
class FormatMix:
    open_ended: float = 0.6
    choice: float = 0.3
    true_false: float = 0.1

    def __post_init__(self):
        shares = (self.open_ended, self.choice, self.true_false)
        if any(s < 0 for s in shares):
            raise ValueError("mix shares must be non-negative")
        if abs(sum(shares) - 1.0) > 1e-9:
            raise ValueError(f"mix shares must sum to 1, got {sum(shares)}")

    def as_dict(self) -> dict[str, float]:
        return {"open_ended": self.open_ended, "choice": self.choice, "true_false": self.true_false}


def plan_windows(
    statements: Sequence[L2Statement],
    window: int,
    stride: int,
) -> list[list[L2Statement]]:
    """Ordered sliding-window batches covering every statement at least once."""
    if window < 1:
        raise ValueError("window must be >= 1")
    if not 1 <= stride <= window:
        raise ValueError("stride must satisfy 1 <= stride <= window")
    items = list(statements)
    if not items:
        return []
    batches: list[list[L2Statement]] = []
    start = 0
    while True:
        batches.append(items[start : start + window])
        if start + window >= len(items):
            break
        start += stride
    return batches


def allocate_format_mix(total: int, mix: FormatMix) -> dict[str, int]:
    """Integer apportionment of ``total`` across the three formats by
    largest-remainder rounding; counts always sum to total and each stays
    within 1 of the real-valued share."""
    if total < 0:
        raise ValueError("total must be >= 0")
    shares = mix.as_dict()
    ideal = {name: total * share for name, share in shares.items()}
    counts = {name: math.floor(v) for name, v in ideal.items()}
    remainder = total - sum(counts.values())
    by_fraction = sorted(shares, key=lambda name: (-(ideal[name] - counts[name]), FORMATS.index(name)))
    for name in by_fraction[:remainder]:
        counts[name] += 1
    return counts


def _letters_for(options: Sequence[str]) -> dict[str, str]:
    keys = [chr(ord("A") + i) for i in range(len(options))]
    return dict(zip(keys, [str(o) for o in options]))


def _canonical_letters(raw: object, valid: set[str]) -> str:
    if isinstance(raw, list):
        letters = [str(x).strip().upper() for x in raw]
    elif isinstance(raw, str):
        letters = [p.strip().upper() for p in raw.replace(",", " ").split() if p.strip()]
    else:
        raise SchemaInvalid(f"answer of type {type(raw).__name__}")
    letters = sorted(set(letters))
    if not letters or any(l not in valid for l in letters):
        raise SchemaInvalid(f"answer letters {letters} invalid")
    return ",".join(letters)


def _entry_to_sample(
    entry: dict,
    fmt: str,
    sample_id: str,
    batch_ids: set[str],
    known_concepts: set[str],
    cid: str,
) -> TrainingSample:
    if not isinstance(entry, dict):
        raise SchemaInvalid("entry is not an object")

    if fmt == "open_ended":
        question = entry.get("question")
        answer = entry.get("answer")
        if not question or not answer:
            raise SchemaInvalid("QA entry needs question and answer")
        cited = entry.get("l2_statement_id") or entry.get("l2_statement_ids")
        l2_ids = [cited] if isinstance(cited, str) else list(cited or [])
        options = None
        question_type = "open_ended"
        explanation = None
    elif fmt == "choice":
        question = entry.get("question")
        raw_options = entry.get("options")
        if not question or not isinstance(raw_options, list) or len(raw_options) != 4:
            raise SchemaInvalid("choice entry needs question and exactly 4 options")
        options = _letters_for(raw_options)
        answer = _canonical_letters(entry.get("answer"), set(options))
        # the answer cardinality, not the declared type, decides the bucket
        question_type = "multiple_choice" if "," in answer else "single_choice"
        l2_ids = list(entry.get("l2_statement_ids") or [])
        explanation = entry.get("explanation")
    elif fmt == "true_false":
        question = entry.get("statement") or entry.get("question")
        verdict = str(entry.get("answer", "")).strip().lower()
        if not question or verdict not in ("true", "false"):
            raise SchemaInvalid("true/false entry needs a statement and a true|false answer")
        options = dict(TF_OPTIONS)
        answer = "A" if verdict == "true" else "B"
        question_type = "true_false"
        l2_ids = list(entry.get("l2_statement_ids") or [])
        explanation = entry.get("explanation")
    else:
        raise ValueError(f"unknown format {fmt!r}")

    l2_ids = sorted(set(l2_ids))
    if not l2_ids or any(sid not in batch_ids for sid in l2_ids):
        raise SchemaInvalid(f"cited statements {l2_ids} not all inside the batch")
    linked = entry.get("linked_concepts") or []
    l1_ids = sorted({c for c in linked if c in known_concepts})

    return TrainingSample(
        sample_id=sample_id,
        question=str(question),
        answer=str(answer),
        question_type=question_type,
        l2_ids=l2_ids,
        l1_ids=l1_ids,
        cid=cid,
        origin="initial",
        options=options,
        explanation=str(explanation) if explanation else None,
    )


def synthesize_batch(
    batch: Sequence[L2Statement],
    concepts: Sequence[L1Concept],
    fmt: str,
    count: int,
    backend: Backend,
    cid: str = "001",
    id_prefix: str = "",
    single_choice_ratio: float = DEFAULT_SINGLE_CHOICE_RATIO,
    true_ratio: float = DEFAULT_TRUE_RATIO,
) -> list[TrainingSample]:
    """Generate up to ``count`` samples of one format from a statement batch.

    Entries that fail schema validation are skipped with a warning; a
    response with entries but zero valid ones raises SchemaInvalid, an empty
    response raises EmptyGeneration.
    """
    if not batch:
        raise ValueError("synthesize_batch requires a non-empty batch")
    if fmt not in FORMATS:
        raise ValueError(f"format must be one of {FORMATS}")
    if count < 1:
        return []

    ask = math.ceil(count * OVERGEN_FACTOR)
    statement_records = [s.to_record() for s in batch]
    concept_records = [c.to_record() for c in concepts]
    if fmt == "open_ended":
        request = prompts.render_sft_qa(statement_records, concept_records, ask)
    elif fmt == "choice":
        request = prompts.render_sft_choice(statement_records, concept_records, ask, single_choice_ratio)
    else:
        request = prompts.render_sft_tf(statement_records, concept_records, ask, true_ratio)

    payload = extract_json_payload(backend.complete(request))
    if not isinstance(payload, list):
        raise SchemaInvalid("synthesis payload must be an array")
    if not payload:
        raise EmptyGeneration(f"no samples generated for {fmt} batch")

    batch_ids = {s.statement_id for s in batch}
    known_concepts = {c.concept_id for c in concepts}
    prefix = id_prefix or f"{cid}-b0"
    fmt_code = {"open_ended": "qa", "choice": "ch", "true_false": "tf"}[fmt]

    samples: list[TrainingSample] = []
    rejected = 0
    for n, entry in enumerate(payload):
        sample_id = f"{prefix}-{fmt_code}-{n:03d}"
        try:
            samples.append(_entry_to_sample(entry, fmt, sample_id, batch_ids, known_concepts, cid))
        except SchemaInvalid as exc:
            rejected += 1
            log.warning("batch %s: dropped %s entry %d: %s", prefix, fmt, n, exc)
        if len(samples) == count:
            break
    if not samples:
        raise SchemaInvalid(f"all {rejected} generated {fmt} entries failed validation")
    return samples


def coverage_report(samples: Sequence[TrainingSample], statements: Sequence[L2Statement]) -> dict:
    """Fraction of statements cited by at least one sample, plus the
    uncovered ids. Warns below the 0.7 coverage floor."""
    ids = {s.statement_id for s in statements}
    cited: set[str] = set()
    for sample in samples:
        cited.update(sample.l2_ids)
    covered = cited & ids
    fraction = len(covered) / len(ids) if ids else 1.0
    if fraction < 0.7:
        log.warning("statement coverage %.2f below 0.7", fraction)
    return {"covered_fraction": fraction, "uncovered_ids": sorted(ids - covered)}


@dataclass
class SynthesisPlan:
    """Per-discipline quota split over windows and formats, deterministic."""
    cid: str
    jobs: list[dict] = field(default_factory=list)  # {window, fmt, count}


def plan_discipline_synthesis(
    cid: str,
    statements: Sequence[L2Statement],
    quota: int,
    mix: FormatMix,
    window: int,
    stride: int,
) -> tuple[list[list[L2Statement]], SynthesisPlan]:
    """Spread a discipline's per-format quotas across its windows by
    largest remainder, so every window contributes and counts stay exact."""
    batches = plan_windows(statements, window, stride)
    plan = SynthesisPlan(cid=cid)
    if not batches or quota <= 0:
        return batches, plan
    per_format = allocate_format_mix(quota, mix)
    w = len(batches)
    for fmt in FORMATS:
        total = per_format[fmt]
        base, extra = divmod(total, w)
        for i in range(w):
            count = base + (1 if i < extra else 0)
            if count > 0:
                plan.jobs.append({"window": i, "fmt": fmt, "count": count})
    plan.jobs.sort(key=lambda j: (j["window"], FORMATS.index(j["fmt"])))
    return batches, plan


def synthesize_discipline(
    cid: str,
    statements: Sequence[L2Statement],
    k: KnowledgeStructure,
    quota: int,
    mix: FormatMix,
    window: int,
    stride: int,
    backend: Backend,
    single_choice_ratio: float = DEFAULT_SINGLE_CHOICE_RATIO,
    true_ratio: float = DEFAULT_TRUE_RATIO,
) -> list[TrainingSample]:
    batches, plan = plan_discipline_synthesis(cid, statements, quota, mix, window, stride)
    samples: list[TrainingSample] = []
    for job in plan.jobs:
        batch = batches[job["window"]]
        concept_ids = sorted({
            concept_id
            for stmt in batch
            for concept_id in k.concepts_by_statement.get(stmt.statement_id, [])
        })
        concepts = [k.concepts[i] for i in concept_ids]
        samples.extend(synthesize_batch(
            batch,
            concepts,
            job["fmt"],
            job["count"],
            backend,
            cid=cid,
            id_prefix=f"{cid}-w{job['window']:03d}",
            single_choice_ratio=single_choice_ratio,
            true_ratio=true_ratio,
        ))
    return samples
