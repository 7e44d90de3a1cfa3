"""Top-down extraction: one reasoning chain per gated chunk, statements
decomposed from adjacent steps, then a global concept harvest. The order is
the point: statements always descend from a chain and concepts from
statements, so the assembled structure validates with zero orphans by
construction.
"""

from __future__ import annotations

import hashlib
import logging
import math
from dataclasses import dataclass
from typing import Optional, Sequence

from . import prompts
from .backend import Backend, extract_json_payload
from .curation import Chunk
from .errors import (
    AdjacencyViolation,
    CorpusLoopError,
    DanglingParent,
    SchemaInvalid,
    TooFewSteps,
    ValidationFailed,
)
from .knowledge import (
    STEP_WARN_BAND,
    KnowledgeStructure,
    L1Concept,
    L2Statement,
    L3Chain,
    canonicalize_concepts,
)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ExtractionConfig:
    min_steps: int = 3
    # Floor on decomposition yield as a fraction of the T-1 possible links;
    # flags pathological decompositions without rejecting honest skips.
    statement_floor_fraction: float = 0.6
    balance_max_share: float = 0.20
    balance_top3_share: float = 0.50

    def __post_init__(self):
        if not 0 < self.statement_floor_fraction <= 1:
            raise ValueError("statement_floor_fraction must lie in (0, 1]")
        for name in ("balance_max_share", "balance_top3_share"):
            if not 0 < getattr(self, name) <= 1:
                raise ValueError(f"{name} must lie in (0, 1]")


def chain_id_for_chunk(chunk_id: str) -> str:
    """Deterministic chain id: reuse the chunk's own key when it looks like
    one ("chunk-XYZ" -> "chain-XYZ"), otherwise fall back to a hash prefix.
    Chunk ids are project-unique, so either way the chain id is too."""
    for prefix in ("chunk-", "chunk_"):
        if chunk_id.startswith(prefix):
            return "chain-" + chunk_id[len(prefix):]
    if chunk_id.replace("-", "").replace("_", "").isalnum() and len(chunk_id) <= 40:
        return "chain-" + chunk_id
    return "chain-" + hashlib.sha1(chunk_id.encode("utf-8")).hexdigest()[:10]


def _require_str(payload: dict, key: str, where: str) -> str:
    value = payload.get(key)
    if not isinstance(value, str):
        raise SchemaInvalid(f"{where}: field {key!r} missing or not a string")
    return value


def _require_str_list(payload: dict, key: str, where: str) -> list[str]:
    value = payload.get(key)
    if not isinstance(value, list) or not all(isinstance(v, str) for v in value):
        raise SchemaInvalid(f"{where}: field {key!r} missing or not a list of strings")
    return value


def extract_chain(chunk: Chunk, backend: Backend, cfg: ExtractionConfig = ExtractionConfig()) -> L3Chain:
    request = prompts.render_chain_extraction(chunk.text)
    payload = extract_json_payload(backend.complete(request))
    if isinstance(payload, dict):
        payload = [payload]
    if not isinstance(payload, list) or not payload or not isinstance(payload[0], dict):
        raise SchemaInvalid(f"chunk {chunk.chunk_id}: expected an array with one chain object")
    record = payload[0]

    where = f"chunk {chunk.chunk_id}"
    steps = _require_str_list(record, "steps", where)
    if len(steps) < cfg.min_steps:
        raise TooFewSteps(f"{where}: {len(steps)} steps < min {cfg.min_steps}")
    if not STEP_WARN_BAND[0] <= len(steps) <= STEP_WARN_BAND[1]:
        log.warning("%s: %d steps outside the expected band %s", where, len(steps), STEP_WARN_BAND)

    return L3Chain(
        chain_id=chain_id_for_chunk(chunk.chunk_id),
        domain_context=_require_str(record, "domain_context", where),
        process_name=_require_str(record, "process_name", where),
        narrative_summary=_require_str(record, "narrative_summary", where),
        preconditions=_require_str_list(record, "preconditions", where),
        negative_constraints=_require_str_list(record, "negative_constraints", where),
        steps=steps,
        cid=chunk.cid,
        source_chunk_id=chunk.chunk_id,
    )


def _step_index_of(text: str, steps: list[str]) -> Optional[int]:
    """Index of the unique step containing the text, or None when ambiguous
    or absent. Used to spot non-adjacent links when provenance is clear."""
    needle = " ".join(text.split()).casefold()
    if len(needle) < 8:
        return None
    hits = [i for i, step in enumerate(steps) if needle in " ".join(step.split()).casefold()]
    return hits[0] if len(hits) == 1 else None


def decompose_chain(
    chain: L3Chain,
    chunk: Chunk,
    backend: Backend,
    cfg: ExtractionConfig = ExtractionConfig(),
) -> list[L2Statement]:
    request = prompts.render_decomposition(chain.to_record(), chunk.text)
    payload = extract_json_payload(backend.complete(request))
    if not isinstance(payload, list):
        raise SchemaInvalid(f"chain {chain.chain_id}: decomposition must be an array")

    max_links = chain.step_count - 1
    if len(payload) > max_links:
        raise SchemaInvalid(
            f"chain {chain.chain_id}: {len(payload)} statements exceed the {max_links} adjacent links"
        )

    statements: list[L2Statement] = []
    seen_ids: set[str] = set()
    base = chain.chain_id.removeprefix("chain-")
    for n, record in enumerate(payload):
        if not isinstance(record, dict):
            raise SchemaInvalid(f"chain {chain.chain_id}: statement {n} is not an object")
        where = f"chain {chain.chain_id} statement {n}"
        subject = _require_str(record, "subject", where)
        predicate = _require_str(record, "predicate", where)
        obj = _require_str(record, "object", where)

        si = _step_index_of(subject, chain.steps)
        oi = _step_index_of(obj, chain.steps)
        if si is not None and oi is not None and oi - si != 1:
            raise AdjacencyViolation(
                f"{where}: links step {si + 1} to step {oi + 1}; only immediate neighbours are allowed"
            )

        # Model-emitted ids are kept when unique (fixtures depend on them);
        # collisions and blanks fall back to a deterministic scheme.
        emitted = record.get("statement_id")
        if not isinstance(emitted, str) or not emitted or emitted in seen_ids:
            emitted = f"stmt-{base}-{n:03d}"
        seen_ids.add(emitted)

        try:
            statements.append(L2Statement(
                statement_id=emitted,
                parent_chain_id=chain.chain_id,
                subject=subject,
                predicate=predicate,
                object=obj,
                source_quote=record.get("source_quote", "") or "",
            ))
        except ValueError as exc:
            raise SchemaInvalid(str(exc)) from None

    floor = math.ceil(cfg.statement_floor_fraction * max_links)
    if len(statements) < floor:
        log.warning(
            "chain %s: only %d/%d links decomposed (floor %d)",
            chain.chain_id, len(statements), max_links, floor,
        )
    return statements


def check_balance(
    statements: Sequence[L2Statement],
    chains: Sequence[L3Chain],
    cfg: ExtractionConfig = ExtractionConfig(),
) -> list[dict]:
    """Flag chains that dominate the statement pool. Waived below 5 chains.

    The 3-chain clause only needs the three largest contributors: shares are
    maximized there, so if they pass, every 3-subset passes.
    """
    if len(chains) < 5:
        return []
    total = len(statements)
    if total == 0:
        return []
    counts: dict[str, int] = {chain.chain_id: 0 for chain in chains}
    for stmt in statements:
        if stmt.parent_chain_id in counts:
            counts[stmt.parent_chain_id] += 1

    violations: list[dict] = []
    for chain_id in sorted(counts):
        share = counts[chain_id] / total
        if share > cfg.balance_max_share:
            violations.append({"kind": "chain_share", "chain_id": chain_id, "share": share})

    top3 = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))[:3]
    top3_share = sum(c for _, c in top3) / total
    if top3_share > cfg.balance_top3_share:
        violations.append({
            "kind": "top3_share",
            "chain_ids": sorted(cid for cid, _ in top3),
            "share": top3_share,
        })
    return violations


def harvest_concepts(
    statements: Sequence[L2Statement],
    backend: Backend,
) -> tuple[list[L1Concept], list[str]]:
    """One harvest call over a batch of statements.

    Returns (concepts, uncovered statement ids). Concepts keep their emitted
    ids; parents must be non-empty and drawn from the input batch.
    """
    if not statements:
        raise ValueError("harvest_concepts requires a non-empty batch")
    input_ids = {s.statement_id for s in statements}
    records = [stmt.to_record() for stmt in statements]

    request = prompts.render_concept_harvest(records)
    payload = extract_json_payload(backend.complete(request))
    if not isinstance(payload, list):
        raise SchemaInvalid("concept harvest must return an array")

    concepts: list[L1Concept] = []
    covered: set[str] = set()
    for n, record in enumerate(payload):
        if not isinstance(record, dict):
            raise SchemaInvalid(f"concept {n} is not an object")
        where = f"concept {n}"
        parents = record.get("parent_statement_ids")
        if not isinstance(parents, list) or not parents:
            raise DanglingParent(f"{where}: parent_statement_ids missing or empty")
        unknown = [p for p in parents if p not in input_ids]
        if unknown:
            raise DanglingParent(f"{where}: parents {unknown} not in the input batch")
        covered.update(parents)
        concepts.append(L1Concept(
            concept_id=_require_str(record, "concept_id", where),
            term=_require_str(record, "term", where),
            type=record.get("type", "") or "",
            definition=record.get("definition", "") or "",
            parent_statement_ids=sorted(set(parents)),
            cids=[],
        ))
    uncovered = sorted(input_ids - covered)
    return concepts, uncovered


def run_extraction(
    chunks: Sequence[Chunk],
    backend: Backend,
    cfg: ExtractionConfig = ExtractionConfig(),
    extraction_log: Optional[list[dict]] = None,
) -> KnowledgeStructure:
    """Full Builder pass: per-chunk chain + decomposition (failures
    quarantine the chunk), then a per-chain harvest, global
    canonicalization, and validation. The result always validates cleanly
    or the run fails with the report attached.
    """
    chains: list[L3Chain] = []
    statements: list[L2Statement] = []
    per_chain_statements: dict[str, list[L2Statement]] = {}

    for chunk in sorted(chunks, key=lambda c: c.chunk_id):
        entry = {"chunk_id": chunk.chunk_id, "status": "ok", "error": ""}
        try:
            chain = extract_chain(chunk, backend, cfg)
            chain_statements = decompose_chain(chain, chunk, backend, cfg)
        except CorpusLoopError as exc:
            entry["status"] = "failed"
            entry["error"] = f"{type(exc).__name__}: {exc}"
            log.warning("chunk %s quarantined: %s", chunk.chunk_id, exc)
        else:
            chains.append(chain)
            statements.extend(chain_statements)
            per_chain_statements[chain.chain_id] = chain_statements
        if extraction_log is not None:
            extraction_log.append(entry)

    cid_by_statement = {
        stmt.statement_id: chain.cid
        for chain in chains
        for stmt in per_chain_statements.get(chain.chain_id, [])
    }

    raw_concepts: list[L1Concept] = []
    used_ids: dict[str, str] = {}  # concept_id -> normalized term that claimed it
    for chain in sorted(chains, key=lambda c: c.chain_id):
        batch = per_chain_statements.get(chain.chain_id, [])
        if not batch:
            continue
        concepts, uncovered = harvest_concepts(batch, backend)
        if uncovered:
            log.warning("chain %s: statements without concepts: %s", chain.chain_id, uncovered)
        for concept in concepts:
            # Discipline codes are derived from parents, not trusted from the
            # model; id collisions across batches get a deterministic suffix.
            concept.cids = sorted({cid_by_statement[p] for p in concept.parent_statement_ids})
            key = concept.term.casefold()
            claimed = used_ids.get(concept.concept_id)
            if claimed is not None and claimed != key:
                concept.concept_id += "-" + hashlib.sha1(concept.term.encode("utf-8")).hexdigest()[:6]
            used_ids.setdefault(concept.concept_id, key)
            raw_concepts.append(concept)

    merged = canonicalize_concepts(raw_concepts)
    structure = KnowledgeStructure(chains, statements, merged)
    report = structure.validate()
    if report:
        raise ValidationFailed(report)
    return structure
