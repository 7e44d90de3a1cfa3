"""Failure diagnosis and targeted data repair.

Every benchmark error is classified as a concept gap or a capability
deficit, traced through its structural metadata to the responsible
knowledge nodes, and answered with a fixed-size patch batch. Per-discipline
quotas follow the error distribution; the remainder of each quota is filled
with replay samples whose statement ids are disjoint from the patches, and
the result is assembled into a round-2 corpus of unchanged volume.
"""

from __future__ import annotations

import hashlib
import logging
import random
from dataclasses import dataclass
from typing import Optional, Sequence

from . import prompts
from .backend import Backend, extract_json_payload
from .errors import (
    AllZeroErrors,
    InsufficientDisjointPool,
    QuotaMismatch,
    SchemaInvalid,
    ShortBatch,
)
from .evaluation import EvaluationReport
from .knowledge import KnowledgeStructure, neighbor_set
from .synthesis import TF_OPTIONS, TrainingSample

log = logging.getLogger(__name__)

ISSUE_TYPES = ("concept_gap", "capability_deficit")

# Fixed patch contract: 20 samples per diagnosed error, split 12/6/2
# (a 6:3:1 format ratio).
PATCH_BATCH_SIZE = 20
PATCH_FORMAT_COUNTS = {"open_ended": 12, "choice": 6, "true_false": 2}
PATCH_REGEN_ATTEMPTS = 2


@dataclass
class Diagnosis:
    item_id: str
    issue_type: str
    key_concept: str
    reasoning: str
    recommendation: str
    confidence: float

    def __post_init__(self):
        if self.issue_type not in ISSUE_TYPES:
            raise ValueError(f"issue_type must be one of {ISSUE_TYPES}, got {self.issue_type!r}")
        if not self.key_concept.strip():
            raise ValueError("key_concept must be non-empty")
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence {self.confidence} outside [0, 1]")

    def to_record(self) -> dict:
        return {
            "item_id": self.item_id,
            "issue_type": self.issue_type,
            "key_concept": self.key_concept,
            "reasoning": self.reasoning,
            "recommendation": self.recommendation,
            "confidence": self.confidence,
        }

    @classmethod
    def from_record(cls, rec: dict) -> "Diagnosis":
        return cls(
            item_id=rec["item_id"],
            issue_type=rec["issue_type"],
            key_concept=rec["key_concept"],
            reasoning=rec.get("reasoning", ""),
            recommendation=rec.get("recommendation", ""),
            confidence=float(rec.get("confidence", 0.0)),
        )


@dataclass
class RepairPlan:
    round: int
    quotas: dict[str, int]
    diagnoses: list[Diagnosis]
    patch_batches: dict[str, list[TrainingSample]]
    replay: dict[str, list[TrainingSample]]

    def manifest(self) -> dict:
        counts: dict[str, dict[str, int]] = {}
        for batch in self.patch_batches.values():
            for sample in batch:
                by_origin = counts.setdefault(sample.cid, {})
                by_origin["patch"] = by_origin.get("patch", 0) + 1
        for cid, samples in self.replay.items():
            by_origin = counts.setdefault(cid, {})
            by_origin["replay"] = by_origin.get("replay", 0) + len(samples)
        return {
            "round": self.round,
            "quotas": dict(sorted(self.quotas.items())),
            "diagnosed": len(self.diagnoses),
            "per_cid_origin_counts": dict(sorted(counts.items())),
        }


def parse_diagnosis(payload: dict, item_id: str) -> Diagnosis:
    if not isinstance(payload, dict):
        raise SchemaInvalid("diagnosis payload is not an object")
    try:
        return Diagnosis(
            item_id=item_id,
            issue_type=payload["issue_type"],
            key_concept=payload["key_concept"],
            reasoning=str(payload.get("reasoning", "")),
            recommendation=str(payload.get("recommendation", "")),
            confidence=float(payload["confidence"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaInvalid(f"bad diagnosis for {item_id}: {exc}") from None


def diagnose(error_sample: dict, backend: Backend) -> Diagnosis:
    request = prompts.render_diagnosis(error_sample)
    payload = extract_json_payload(backend.complete(request))
    return parse_diagnosis(payload, error_sample["item_id"])


def diagnose_all(errors: Sequence[dict], backend: Backend, retries: int = 2) -> list[Diagnosis]:
    """Diagnose every error; unparseable judge output is retried then
    dropped from patching (the error stays in the ledger), so diagnosed
    counts may legitimately undercount errors."""
    out: list[Diagnosis] = []
    for error in errors:
        for attempt in range(retries + 1):
            try:
                out.append(diagnose(error, backend))
                break
            except SchemaInvalid as exc:
                if attempt == retries:
                    log.warning("dropping undiagnosable error %s: %s", error.get("item_id"), exc)
    return out


def aggregate_patterns(diagnoses: Sequence[Diagnosis], errors: Sequence[dict]) -> dict:
    by_issue: dict[str, int] = {}
    for d in diagnoses:
        by_issue[d.issue_type] = by_issue.get(d.issue_type, 0) + 1
    by_question: dict[str, int] = {}
    for e in errors:
        qt = e.get("question_type", "unknown")
        by_question[qt] = by_question.get(qt, 0) + 1
    return {
        "by_issue_type": dict(sorted(by_issue.items())),
        "by_question_type": dict(sorted(by_question.items())),
        "errors": len(errors),
        "diagnosed": len(diagnoses),
        "undiagnosed": len(errors) - len(diagnoses),
    }


def allocate_quota(error_counts: dict[str, int], total: int) -> dict[str, int]:
    """Per-discipline sample quotas proportional to error share, rounded by
    largest remainder so they sum to ``total`` exactly."""
    if total < 0:
        raise ValueError("total must be >= 0")
    if any(v < 0 for v in error_counts.values()):
        raise ValueError("error counts must be non-negative")
    errors_total = sum(error_counts.values())
    if total > 0 and errors_total == 0:
        raise AllZeroErrors("cannot allocate a nonzero total over zero errors")
    cids = sorted(error_counts)
    if total == 0:
        return {cid: 0 for cid in cids}
    ideal = {cid: total * error_counts[cid] / errors_total for cid in cids}
    quotas = {cid: int(ideal[cid]) for cid in cids}
    remainder = total - sum(quotas.values())
    by_fraction = sorted(cids, key=lambda cid: (-(ideal[cid] - quotas[cid]), cid))
    for cid in by_fraction[:remainder]:
        quotas[cid] += 1
    return quotas


@dataclass
class PatchContext:
    """Structure slice backing one repair batch, assembled by walking the
    failed item's traceability metadata."""
    concept_id: Optional[str]
    concept_term: str
    definition: str
    statement_ids: list[str]
    facts: list[str]
    neighbor_terms: list[str]
    chain_summary: str
    related_example: str
    cid: str


def build_patch_context(diagnosis: Diagnosis, error: dict, k: KnowledgeStructure) -> PatchContext:
    """Resolve the judge's key concept against the structure, falling back to
    the item's own concept metadata so context assembly never dead-ends."""
    meta = error.get("metadata", {})
    concept_id = k.resolve_term(diagnosis.key_concept)
    if concept_id is None:
        for candidate in meta.get("l1_ids", []):
            if candidate in k.concepts:
                concept_id = candidate
                break

    statement_ids: list[str] = []
    neighbor_terms: list[str] = []
    term = diagnosis.key_concept
    definition = ""
    if concept_id is not None:
        concept = k.concepts[concept_id]
        term = concept.term
        definition = concept.definition
        statement_ids = sorted(s for s in concept.parent_statement_ids if s in k.statements)
        neighbor_terms = sorted(k.concepts[n].term for n in neighbor_set(k, concept_id))[:8]
    if not statement_ids:
        statement_ids = sorted(s for s in meta.get("l2_ids", []) if s in k.statements)

    facts = [
        f"{k.statements[s].subject} {k.statements[s].predicate} {k.statements[s].object}"
        for s in statement_ids
    ]

    chain_summary = ""
    chain_id = meta.get("chain_id")
    if chain_id in k.chains:
        chain = k.chains[chain_id]
        steps = "\n".join(f"{i + 1}. {s}" for i, s in enumerate(chain.steps))
        chain_summary = f"{chain.process_name}: {chain.narrative_summary}\nSteps:\n{steps}"

    related_example = (
        f"Question: {error.get('question', '')}\n"
        f"Model answered: {error.get('predicted_answer', '')}\n"
        f"Correct answer: {error.get('true_answer', '')}"
    )
    return PatchContext(
        concept_id=concept_id,
        concept_term=term,
        definition=definition,
        statement_ids=statement_ids,
        facts=facts,
        neighbor_terms=neighbor_terms,
        chain_summary=chain_summary,
        related_example=related_example,
        cid=error.get("cid", ""),
    )


def _patch_entry_to_sample(
    entry: dict,
    fmt: str,
    sample_id: str,
    context: PatchContext,
) -> TrainingSample:
    if not isinstance(entry, dict):
        raise SchemaInvalid("patch entry is not an object")
    question = entry.get("question")
    answer = entry.get("answer")
    if not isinstance(question, str) or not question.strip():
        raise SchemaInvalid("patch entry lacks a question")
    if not isinstance(answer, str) or not answer.strip():
        raise SchemaInvalid("patch entry lacks an answer")

    options = None
    explanation = None
    if fmt == "open_ended":
        question_type = "open_ended"
    elif fmt == "choice":
        raw_options = entry.get("options")
        if not isinstance(raw_options, dict) or tuple(sorted(raw_options)) != ("A", "B", "C", "D"):
            raise SchemaInvalid("choice patch entry needs options A-D")
        options = {key: str(raw_options[key]) for key in ("A", "B", "C", "D")}
        first_line = answer.split("\n")[0]
        letters = sorted({p.strip().upper() for p in first_line.split(",") if p.strip()})
        if not letters or any(l not in options for l in letters):
            raise SchemaInvalid(f"choice patch answer {first_line!r} invalid")
        question_type = "multiple_choice" if len(letters) > 1 else "single_choice"
    elif fmt == "true_false":
        raw_options = entry.get("options")
        if not isinstance(raw_options, dict) or set(raw_options) != {"A", "B"}:
            raise SchemaInvalid("true/false patch entry needs options A/B")
        verdict = answer.split("\n")[0].strip().upper()
        if verdict not in ("A", "B"):
            raise SchemaInvalid(f"true/false patch answer {verdict!r} must start with A or B")
        options = dict(TF_OPTIONS)
        question_type = "true_false"
    else:
        raise ValueError(f"unknown patch format {fmt!r}")

    l1_ids = [context.concept_id] if context.concept_id else []
    return TrainingSample(
        sample_id=sample_id,
        question=question,
        answer=answer,
        question_type=question_type,
        l2_ids=list(context.statement_ids),
        l1_ids=l1_ids,
        cid=context.cid,
        origin="patch",
        options=options,
        explanation=explanation,
    )


def generate_patch(
    diagnosis: Diagnosis,
    context: PatchContext,
    backend: Backend,
) -> list[TrainingSample]:
    """Exactly 20 repair samples per diagnosis: 12 open-ended, 6 choice,
    2 true/false. Concept gaps get contrastive reinforcement against the
    concept's neighbours; capability deficits get chain-of-thought
    scaffolding over the source chain."""
    batch: list[TrainingSample] = []
    base = f"patch-{diagnosis.item_id}"
    fmt_code = {"open_ended": "qa", "choice": "ch", "true_false": "tf"}

    for fmt, need in PATCH_FORMAT_COUNTS.items():
        collected: list[TrainingSample] = []
        for attempt in range(PATCH_REGEN_ATTEMPTS + 1):
            if diagnosis.issue_type == "concept_gap":
                contrast = list(context.facts)
                if context.neighbor_terms:
                    contrast.append(
                        f"Do not confuse {context.concept_term} with: {', '.join(context.neighbor_terms)}"
                    )
                request = prompts.render_concept_gap_patch(
                    context.concept_term,
                    context.definition,
                    contrast,
                    context.related_example,
                    fmt,
                    need,
                )
            else:
                request = prompts.render_capability_deficit_patch(
                    context.concept_term,
                    context.chain_summary or "\n".join(context.facts),
                    diagnosis.reasoning or diagnosis.recommendation,
                    fmt,
                    need,
                )
            payload = extract_json_payload(backend.complete(request))
            if not isinstance(payload, list):
                raise SchemaInvalid(f"{base}: patch payload must be an array")
            collected = []
            for n, entry in enumerate(payload):
                sample_id = f"{base}-{fmt_code[fmt]}-{n:02d}"
                try:
                    collected.append(_patch_entry_to_sample(entry, fmt, sample_id, context))
                except SchemaInvalid as exc:
                    log.warning("%s: dropped %s patch entry %d: %s", base, fmt, n, exc)
                if len(collected) == need:
                    break
            if len(collected) >= need:
                break
            log.warning("%s: %s patch under-delivered (%d/%d), attempt %d",
                        base, fmt, len(collected), need, attempt + 1)
        if len(collected) < need:
            raise ShortBatch(
                f"{base}: only {len(collected)}/{need} valid {fmt} samples after "
                f"{PATCH_REGEN_ATTEMPTS + 1} attempts"
            )
        batch.extend(collected[:need])
    return batch


def _cid_rng(seed: int, cid: str) -> random.Random:
    digest = hashlib.sha256(f"{seed}:{cid}".encode("utf-8")).hexdigest()
    return random.Random(int(digest[:16], 16))


def patch_l2_ids(patches: Sequence[TrainingSample]) -> set[str]:
    return {sid for sample in patches for sid in sample.l2_ids}


def select_replay(
    v1_corpus: Sequence[TrainingSample],
    patches: Sequence[TrainingSample],
    quota: dict[str, int],
    seed: int,
    report: Optional[EvaluationReport] = None,
    strict: bool = True,
) -> dict[str, list[TrainingSample]]:
    """Seeded-uniform replay selection under the statement-disjointness
    constraint: per discipline, replayed samples may not cite any statement
    id used by that discipline's patches.

    When an evaluation report is supplied, samples tied to incorrectly
    answered items are excluded too (replay reviews what the model already
    gets right); samples no item tested remain eligible. Strict mode errors
    on an insufficient pool; relaxed mode fills the shortfall from the
    minimum-overlap samples and logs the violation count.
    """
    patch_by_cid: dict[str, list[TrainingSample]] = {}
    for sample in patches:
        patch_by_cid.setdefault(sample.cid, []).append(sample)

    error_l2: set[str] = set()
    if report is not None:
        for err in report.error_samples:
            error_l2.update(err.get("metadata", {}).get("l2_ids", []))

    pool_by_cid: dict[str, list[TrainingSample]] = {}
    for sample in v1_corpus:
        pool_by_cid.setdefault(sample.cid, []).append(sample)

    out: dict[str, list[TrainingSample]] = {}
    for cid in sorted(quota):
        blocked = patch_l2_ids(patch_by_cid.get(cid, []))
        need = quota[cid] - len(patch_by_cid.get(cid, []))
        if need < 0:
            raise ValueError(
                f"cid {cid}: patches ({len(patch_by_cid.get(cid, []))}) exceed quota ({quota[cid]}); "
                "trim patches before selecting replay"
            )
        candidates = sorted(pool_by_cid.get(cid, []), key=lambda s: s.sample_id)
        eligible = [
            s for s in candidates
            if not (set(s.l2_ids) & blocked) and not (set(s.l2_ids) & error_l2)
        ]
        if len(eligible) < need:
            if strict:
                raise InsufficientDisjointPool(
                    f"cid {cid}: need {need} disjoint replay samples, pool has {len(eligible)}"
                )
            shortfall = need - len(eligible)
            leftovers = [s for s in candidates if s not in eligible]
            leftovers.sort(key=lambda s: (len(set(s.l2_ids) & blocked), s.sample_id))
            log.warning("cid %s: relaxed replay admits %d overlapping samples", cid, shortfall)
            eligible = eligible + leftovers[:shortfall]
            chosen = eligible
        else:
            rng = _cid_rng(seed, cid)
            chosen = rng.sample(eligible, need)
        chosen = sorted(chosen, key=lambda s: s.sample_id)
        out[cid] = [
            TrainingSample(
                sample_id=s.sample_id,
                question=s.question,
                answer=s.answer,
                question_type=s.question_type,
                l2_ids=list(s.l2_ids),
                l1_ids=list(s.l1_ids),
                cid=s.cid,
                origin="replay",
                options=dict(s.options) if s.options else None,
                explanation=s.explanation,
            )
            for s in chosen
        ]
    return out


def assemble_round2(
    patches: dict[str, list[TrainingSample]],
    replay: dict[str, list[TrainingSample]],
    target_total: int,
    seed: int = 0,
    quotas: Optional[dict[str, int]] = None,
) -> tuple[list[TrainingSample], dict]:
    """Concatenate patches and replay, verify quotas, shuffle with the seed,
    and emit the provenance manifest. The corpus volume must come out at
    exactly ``target_total``."""
    per_cid: dict[str, dict[str, int]] = {}
    merged: list[TrainingSample] = []
    for item_id in sorted(patches):
        for sample in patches[item_id]:
            per_cid.setdefault(sample.cid, {"patch": 0, "replay": 0})["patch"] += 1
            merged.append(sample)
    for cid in sorted(replay):
        for sample in replay[cid]:
            per_cid.setdefault(sample.cid, {"patch": 0, "replay": 0})["replay"] += 1
            merged.append(sample)

    if quotas is not None:
        for cid, quota in quotas.items():
            got = sum(per_cid.get(cid, {}).values())
            if got != quota:
                raise QuotaMismatch(f"cid {cid}: assembled {got} samples, quota is {quota}")
    if len(merged) != target_total:
        raise QuotaMismatch(f"assembled {len(merged)} samples, target is {target_total}")

    rng = random.Random(seed)
    rng.shuffle(merged)
    manifest = {
        "target_total": target_total,
        "per_cid_origin_counts": dict(sorted(per_cid.items())),
    }
    return merged, manifest


@dataclass
class DebugCycleResult:
    plan: RepairPlan
    corpus: list[TrainingSample]
    manifest: dict
    patterns: dict


def run_debug_cycle(
    report: EvaluationReport,
    v1_corpus: Sequence[TrainingSample],
    k: KnowledgeStructure,
    backend: Backend,
    corpus_total: int,
    seed: int,
    round_number: int,
    strict_replay: bool = True,
    diagnoses: Optional[list[Diagnosis]] = None,
    patch_batches: Optional[dict[str, list[TrainingSample]]] = None,
) -> DebugCycleResult:
    """Full debug round: diagnose, allocate, patch, trim, replay, assemble.

    Pre-computed diagnoses/patches may be passed in when stages run
    separately. If a discipline's patches outgrow its quota, replay is
    dropped first and then the oldest patch batches, keeping the volume
    contract intact.
    """
    errors = report.error_samples
    if diagnoses is None:
        diagnoses = diagnose_all(errors, backend)
    patterns = aggregate_patterns(diagnoses, errors)

    error_counts: dict[str, int] = {}
    for err in errors:
        error_counts[err["cid"]] = error_counts.get(err["cid"], 0) + 1
    quotas = allocate_quota(error_counts, corpus_total) if errors else {}

    errors_by_id = {e["item_id"]: e for e in errors}
    if patch_batches is None:
        patch_batches = {}
        for diagnosis in diagnoses:
            context = build_patch_context(diagnosis, errors_by_id[diagnosis.item_id], k)
            patch_batches[diagnosis.item_id] = generate_patch(diagnosis, context, backend)

    # trim overgrown disciplines: oldest patch batches go first, whole
    # batches at a time, so the 20-sample contract stays visible per batch
    kept_batches: dict[str, list[TrainingSample]] = dict(patch_batches)
    patch_count: dict[str, int] = {}
    for batch in kept_batches.values():
        for sample in batch:
            patch_count[sample.cid] = patch_count.get(sample.cid, 0) + 1
    for cid, quota in sorted(quotas.items()):
        while patch_count.get(cid, 0) > quota:
            oldest = next(
                item_id for item_id in sorted(kept_batches)
                if kept_batches[item_id] and kept_batches[item_id][0].cid == cid
            )
            dropped = kept_batches.pop(oldest)
            patch_count[cid] -= len(dropped)
            log.warning("cid %s: dropping patch batch %s to fit quota %d", cid, oldest, quota)

    all_patches = [s for batch in kept_batches.values() for s in batch]
    replay = select_replay(v1_corpus, all_patches, quotas, seed, report=report, strict=strict_replay)
    corpus, manifest = assemble_round2(kept_batches, replay, corpus_total, seed, quotas)

    plan = RepairPlan(
        round=round_number,
        quotas=quotas,
        diagnoses=diagnoses,
        patch_batches=kept_batches,
        replay=replay,
    )
    return DebugCycleResult(plan=plan, corpus=corpus, manifest=manifest, patterns=patterns)


def render_diagnostic_report(
    report: EvaluationReport,
    patterns: dict,
    diagnoses: Sequence[Diagnosis],
    max_samples: int = 5,
) -> str:
    """Human-readable cycle report: global metrics, per-subject table,
    error-pattern counts, and representative diagnosed samples."""
    lines = [
        "=" * 64,
        "EVALUATION DIAGNOSTIC REPORT",
        "=" * 64,
        "",
        "Global Evaluation Metrics",
        f"  Model Name: {report.model_name}",
        f"  Timestamp: {report.timestamp}",
        f"  Overall Accuracy: {report.overall_accuracy * 100:.2f}% "
        f"(Correct: {report.correct:,} / Total: {report.total:,})",
        f"  Error Samples Count: {report.total - report.correct:,}",
        "",
        "Subject-wise Performance",
    ]
    for cid, row in sorted(report.per_subject.items()):
        lines.append(
            f"  Subject-{cid}: Accuracy {row['accuracy'] * 100:.1f}% "
            f"(Total: {row['total']}, Error: {row['errors']})"
        )
    lines += ["", "Error Pattern Analysis", "  By Issue Type:"]
    for issue, count in patterns.get("by_issue_type", {}).items():
        lines.append(f"    {issue}: {count:,} samples")
    lines.append("  By Question Type:")
    for qt, count in patterns.get("by_question_type", {}).items():
        lines.append(f"    {qt}: {count:,}")
    if patterns.get("undiagnosed"):
        lines.append(f"  Undiagnosed errors: {patterns['undiagnosed']:,}")

    by_item = {d.item_id: d for d in diagnoses}
    shown = 0
    for err in report.error_samples:
        diagnosis = by_item.get(err["item_id"])
        if diagnosis is None:
            continue
        lines += [
            "",
            f"Representative Error Sample ({diagnosis.issue_type})",
            f"  Item: {err['item_id']}",
            f"  Question: {err['question'][:160]}",
            f"  Ground Truth: {err['true_answer']}   Model Prediction: {err['predicted_answer'] or '(none)'}",
            f"  Key Concept: {diagnosis.key_concept}",
            f"  Reasoning: {diagnosis.reasoning}",
            f"  Recommendation: {diagnosis.recommendation}",
        ]
        shown += 1
        if shown >= max_samples:
            break
    remaining = len(report.error_samples) - shown
    if remaining > 0:
        lines += ["", f"... ({remaining:,} additional error samples omitted)"]
    lines.append("")
    return "\n".join(lines)
