"""Benchmark compilation from reasoning chains.

Each chain yields one adversarial multi-choice item whose wrong options are
seeded by structure-derived corruptions: substituting a semantically adjacent
concept, inverting a relation, or truncating the chain before its conclusion.
Items carry structural metadata (chain id, statement ids, concept ids) so
failures stay traceable, and a token-overlap check enforces textual
separation from the training corpus.
"""

from __future__ import annotations

import random
import re
from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

from . import prompts
from .backend import Backend, extract_json_payload
from .errors import (
    AnswerNotInOptions,
    EmptyNeighborhood,
    IndexOutOfRange,
    OptionCountWrong,
    SchemaInvalid,
)
from .knowledge import KnowledgeStructure, L2Statement, L3Chain, neighbor_set, normalize_term

OPTION_KEYS = ("A", "B", "C", "D")

# Small editable inverse-relation table; the open predicate vocabulary makes
# a complete lexicon impossible, unmapped predicates get a negation fallback.
DEFAULT_INVERSE_LEXICON = {
    "promotes": "inhibits",
    "inhibits": "promotes",
    "increases": "decreases",
    "decreases": "increases",
    "activates": "deactivates",
    "deactivates": "activates",
    "precedes": "follows",
    "follows": "precedes",
    "strengthens": "weakens",
    "weakens": "strengthens",
}

DEFAULT_NGRAM = 13
DEFAULT_MULTI_SELECT_SHARE = 0.8


@dataclass
class BenchmarkItem:
    item_id: str
    question: str
    options: dict[str, str]
    answer: frozenset[str]
    explanation: str
    metadata: dict
    cid: str

    def __post_init__(self):
        if tuple(sorted(self.options)) != OPTION_KEYS:
            raise OptionCountWrong(f"item {self.item_id}: options must be exactly A-D")
        if not self.answer:
            raise AnswerNotInOptions(f"item {self.item_id}: empty answer set")
        if not self.answer <= set(self.options):
            raise AnswerNotInOptions(f"item {self.item_id}: answer {sorted(self.answer)} outside options")
        if "chain_id" not in self.metadata:
            raise SchemaInvalid(f"item {self.item_id}: metadata lacks chain_id")

    @property
    def answer_key(self) -> str:
        return ",".join(sorted(self.answer))

    @property
    def question_type(self) -> str:
        return "multiple_choice" if len(self.answer) > 1 else "single_choice"

    def to_record(self) -> dict:
        return {
            "item_id": self.item_id,
            "question": self.question,
            "options": {k: self.options[k] for k in OPTION_KEYS},
            "answer": sorted(self.answer),
            "explanation": self.explanation,
            "metadata": self.metadata,
            "cid": self.cid,
        }

    @classmethod
    def from_record(cls, rec: dict) -> "BenchmarkItem":
        return cls(
            item_id=rec["item_id"],
            question=rec["question"],
            options=dict(rec["options"]),
            answer=frozenset(rec["answer"]),
            explanation=rec.get("explanation", ""),
            metadata=dict(rec["metadata"]),
            cid=rec["cid"],
        )


@dataclass
class PerturbedChain:
    base_chain_id: str
    operator: str  # subst_adjacent | invert_relation | truncate
    detail: dict
    steps: list[str]


def _find_anchor_concept(chain: L3Chain, step_index: int, k: KnowledgeStructure) -> Optional[str]:
    """Concept of this chain whose term occurs in the step's text; the longest
    match wins, ties broken by id."""
    step_text = " ".join(chain.steps[step_index].split()).casefold()
    best: Optional[tuple[int, str]] = None
    for concept_id in k.chain_concept_ids(chain.chain_id):
        term = k.concepts[concept_id].term
        needle = normalize_term(term)
        if needle and needle in step_text:
            key = (-len(needle), concept_id)
            if best is None or key < best:
                best = key
    return best[1] if best else None


def perturb_substitute(
    chain: L3Chain,
    step_index: int,
    k: KnowledgeStructure,
    rng_seed: int,
) -> PerturbedChain:
    """Swap the step's anchor concept for a seeded-uniform pick from its
    semantic neighborhood."""
    if not 0 <= step_index < chain.step_count:
        raise IndexOutOfRange(f"step_index {step_index} outside 0..{chain.step_count - 1}")
    anchor_id = _find_anchor_concept(chain, step_index, k)
    if anchor_id is None:
        raise EmptyNeighborhood(f"chain {chain.chain_id} step {step_index}: no anchor concept found")
    neighbors = sorted(neighbor_set(k, anchor_id))
    if not neighbors:
        raise EmptyNeighborhood(f"concept {anchor_id} has no semantic neighbours")

    rng = random.Random(rng_seed)
    substitute_id = neighbors[rng.randrange(len(neighbors))]
    original_term = k.concepts[anchor_id].term
    substitute_term = k.concepts[substitute_id].term

    steps = list(chain.steps)
    pattern = re.compile(re.escape(original_term), re.IGNORECASE)
    steps[step_index] = pattern.sub(substitute_term, steps[step_index], count=1)
    return PerturbedChain(
        base_chain_id=chain.chain_id,
        operator="subst_adjacent",
        detail={
            "step_index": step_index,
            "original": original_term,
            "substitute": substitute_term,
            "original_concept_id": anchor_id,
            "substitute_concept_id": substitute_id,
        },
        steps=steps,
    )


def _negate_predicate(predicate: str) -> str:
    """Fallback inversion when the lexicon has no entry: negate the verb
    phrase, de-inflecting a third-person-singular head verb."""
    words = predicate.split()
    if not words:
        return "does not " + predicate
    head = words[0]
    lowered = head.lower()
    if lowered in ("is", "are", "was", "were"):
        return " ".join([head, "not"] + words[1:])
    if lowered.endswith("ies") and len(lowered) > 3:
        head = head[:-3] + "y"
    elif lowered.endswith(("ches", "shes", "xes", "zes", "sses", "oes")):
        head = head[:-2]
    elif lowered.endswith("s") and not lowered.endswith("ss"):
        head = head[:-1]
    return " ".join(["does not", head.lower()] + words[1:])


def perturb_invert(
    statement: L2Statement,
    inverse_lexicon: Optional[dict[str, str]] = None,
) -> L2Statement:
    """Replace the predicate with its semantic inverse (lexicon hit) or a
    negated form. Everything else is preserved; the id gains an -inv suffix."""
    lexicon = DEFAULT_INVERSE_LEXICON if inverse_lexicon is None else inverse_lexicon
    inverse = lexicon.get(statement.predicate)
    if inverse is None:
        inverse = lexicon.get(statement.predicate.strip().casefold())
    if inverse is None:
        inverse = _negate_predicate(statement.predicate)
    return L2Statement(
        statement_id=statement.statement_id + "-inv",
        parent_chain_id=statement.parent_chain_id,
        subject=statement.subject,
        predicate=inverse,
        object=statement.object,
        source_quote=statement.source_quote,
    )


def perturb_truncate(chain: L3Chain, t: int) -> PerturbedChain:
    """Keep only the first t steps, so the pathway stops short of its
    conclusion. Requires 1 <= t < step count (a full copy is no perturbation)."""
    if not 1 <= t < chain.step_count:
        raise IndexOutOfRange(f"t={t} must satisfy 1 <= t < {chain.step_count}")
    return PerturbedChain(
        base_chain_id=chain.chain_id,
        operator="truncate",
        detail={"t": t},
        steps=list(chain.steps[:t]),
    )


def build_perturbation_hints(
    chain: L3Chain,
    k: KnowledgeStructure,
    rng_seed: int,
) -> list[str]:
    """One natural-language corruption per operator, when the structure
    supports it. These go to the item generator as distractor raw material."""
    rng = random.Random(rng_seed)
    hints: list[str] = []

    order = list(range(chain.step_count))
    rng.shuffle(order)
    for idx in order:
        try:
            sub = perturb_substitute(chain, idx, k, rng_seed)
        except EmptyNeighborhood:
            continue
        hints.append(
            f'Concept swap in step {sub.detail["step_index"] + 1}: '
            f'"{sub.detail["original"]}" replaced by the related but wrong "{sub.detail["substitute"]}".'
        )
        break

    statement_ids = k.chain_statement_ids(chain.chain_id)
    if statement_ids:
        stmt = k.statements[statement_ids[rng.randrange(len(statement_ids))]]
        inverted = perturb_invert(stmt)
        hints.append(
            f'Inverted relation: claim that {inverted.subject} {inverted.predicate} {inverted.object}.'
        )

    t = max(1, chain.step_count - 1 - rng.randrange(min(3, chain.step_count - 1)))
    truncated = perturb_truncate(chain, t)
    hints.append(
        f"Truncated pathway: stop after step {t} "
        f'("{truncated.steps[-1]}") and treat that as the final outcome.'
    )
    return hints


def _parse_answer_letters(raw: object) -> frozenset[str]:
    if isinstance(raw, list):
        letters = [str(x).strip().upper() for x in raw]
    elif isinstance(raw, str):
        letters = [p.strip().upper() for p in re.split(r"[,\s/]+", raw) if p.strip()]
    else:
        raise SchemaInvalid(f"answer field has unexpected type {type(raw).__name__}")
    return frozenset(letters)


def generate_item(
    chain: L3Chain,
    k: KnowledgeStructure,
    backend: Backend,
    rng_seed: int,
    multi_select_share: float = DEFAULT_MULTI_SELECT_SHARE,
) -> BenchmarkItem:
    """One benchmark item per chain: perturbation hints feed the prompt, the
    parsed item is validated and stamped with structural metadata."""
    rng = random.Random(rng_seed)
    multi_select = rng.random() < multi_select_share
    hints = build_perturbation_hints(chain, k, rng_seed)

    request = prompts.render_benchmark_item(chain.to_record(), chain.cid, hints, multi_select)
    payload = extract_json_payload(backend.complete(request))
    if isinstance(payload, list):
        payload = payload[0] if payload and isinstance(payload[0], dict) else None
    if not isinstance(payload, dict):
        raise SchemaInvalid(f"chain {chain.chain_id}: item payload is not an object")

    options = payload.get("options")
    if not isinstance(options, dict):
        raise SchemaInvalid(f"chain {chain.chain_id}: options missing")
    if tuple(sorted(options)) != OPTION_KEYS:
        raise OptionCountWrong(
            f"chain {chain.chain_id}: got options {sorted(options)}, need exactly A-D"
        )
    answer = _parse_answer_letters(payload.get("answer"))
    if not answer or not answer <= set(OPTION_KEYS):
        raise AnswerNotInOptions(f"chain {chain.chain_id}: answer {sorted(answer)} invalid")

    question = payload.get("question")
    if not isinstance(question, str) or not question.strip():
        raise SchemaInvalid(f"chain {chain.chain_id}: question missing")

    return BenchmarkItem(
        item_id="item-" + chain.chain_id.removeprefix("chain-"),
        question=question,
        options={key: str(options[key]) for key in OPTION_KEYS},
        answer=answer,
        explanation=str(payload.get("explanation", "")),
        metadata={
            "chain_id": chain.chain_id,
            "l2_ids": k.chain_statement_ids(chain.chain_id),
            "l1_ids": k.chain_concept_ids(chain.chain_id),
        },
        cid=chain.cid,
    )


def _tokens(text: str) -> list[str]:
    return text.casefold().split()


def _ngrams(tokens: Sequence[str], n: int) -> Iterable[str]:
    for i in range(len(tokens) - n + 1):
        yield " ".join(tokens[i : i + n])


def sample_text_fields(sample: dict) -> str:
    """Text of a training sample subject to the overlap check."""
    parts = [sample.get("question", ""), sample.get("answer", "")]
    explanation = sample.get("explanation")
    if explanation:
        parts.append(explanation)
    return " ".join(p for p in parts if p)


def check_orthogonality(
    benchmark: Sequence[BenchmarkItem],
    corpus: Sequence[dict],
    n: int = DEFAULT_NGRAM,
) -> list[dict]:
    """Instance-level separation check between benchmark and training corpus.

    Structural route: items must source a chain, initial samples must source
    statements (both hold by construction and are asserted here). Textual
    route: flag any training sample sharing a contiguous n-token span with
    any benchmark question. One collision per (sample, item) pair.
    """
    if n < 5:
        raise ValueError("n must be >= 5")

    for item in benchmark:
        if not item.metadata.get("chain_id"):
            raise SchemaInvalid(f"item {item.item_id}: missing source chain")
    for sample in corpus:
        if sample.get("origin", "initial") == "initial" and not sample.get("l2_ids"):
            raise SchemaInvalid(f"sample {sample.get('sample_id')}: initial sample lacks l2_ids")

    index: dict[str, set[str]] = defaultdict(set)
    for item in benchmark:
        for gram in _ngrams(_tokens(item.question), n):
            index[gram].add(item.item_id)

    collisions: list[dict] = []
    for sample in corpus:
        hits: dict[str, str] = {}
        for gram in _ngrams(_tokens(sample_text_fields(sample)), n):
            for item_id in index.get(gram, ()):
                hits.setdefault(item_id, gram)
        for item_id in sorted(hits):
            collisions.append({
                "sample_id": sample.get("sample_id", ""),
                "item_id": item_id,
                "ngram": hits[item_id],
            })
    return collisions
