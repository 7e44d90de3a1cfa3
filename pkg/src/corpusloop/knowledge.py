"""The shared three-level knowledge structure.

Level 3 holds multi-step reasoning chains, level 2 the relational statements
decomposed from adjacent chain steps, level 1 the canonicalized concepts
harvested from statement subjects and objects. The structural contract is
reachability: every statement resolves to a chain, every concept to at least
one statement, so nothing untestable can enter the store.
"""

from __future__ import annotations

import re
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .errors import DanglingReference, UnknownConcept
from .ioutils import read_jsonl, write_jsonl

# Observed step-count band for chains in large corpora; outside it we warn,
# we do not reject.
STEP_WARN_BAND = (3, 19)

_ARTICLE_RE = re.compile(r"^(the|a|an)\s+", re.IGNORECASE)


def normalize_term(term: str) -> str:
    """Merge key for concept terms: case-fold, trim, collapse whitespace,
    strip a leading article."""
    term = " ".join(term.split()).strip()
    term = _ARTICLE_RE.sub("", term)
    return term.casefold()


@dataclass
class L3Chain:
    chain_id: str
    domain_context: str
    process_name: str
    narrative_summary: str
    preconditions: list[str]
    negative_constraints: list[str]
    steps: list[str]
    cid: str
    source_chunk_id: str

    def __post_init__(self):
        if len(self.steps) < 2:
            raise ValueError(f"chain {self.chain_id}: needs at least 2 steps, got {len(self.steps)}")

    @property
    def step_count(self) -> int:
        return len(self.steps)

    def to_record(self) -> dict:
        return {
            "chain_id": self.chain_id,
            "domain_context": self.domain_context,
            "process_name": self.process_name,
            "narrative_summary": self.narrative_summary,
            "preconditions": self.preconditions,
            "negative_constraints": self.negative_constraints,
            "steps": self.steps,
            "cid": self.cid,
            "source_chunk_id": self.source_chunk_id,
        }

    @classmethod
    def from_record(cls, rec: dict) -> "L3Chain":
        return cls(
            chain_id=rec["chain_id"],
            domain_context=rec.get("domain_context", ""),
            process_name=rec.get("process_name", ""),
            narrative_summary=rec.get("narrative_summary", ""),
            preconditions=list(rec.get("preconditions", [])),
            negative_constraints=list(rec.get("negative_constraints", [])),
            steps=list(rec["steps"]),
            cid=rec["cid"],
            source_chunk_id=rec.get("source_chunk_id", ""),
        )


@dataclass
class L2Statement:
    statement_id: str
    parent_chain_id: str
    subject: str
    predicate: str
    object: str
    source_quote: str = ""

    def __post_init__(self):
        for name in ("subject", "predicate", "object"):
            if not getattr(self, name).strip():
                raise ValueError(f"statement {self.statement_id}: empty {name}")

    def to_record(self) -> dict:
        return {
            "statement_id": self.statement_id,
            "parent_chain_id": self.parent_chain_id,
            "subject": self.subject,
            "predicate": self.predicate,
            "object": self.object,
            "source_quote": self.source_quote,
        }

    @classmethod
    def from_record(cls, rec: dict) -> "L2Statement":
        return cls(
            statement_id=rec["statement_id"],
            parent_chain_id=rec["parent_chain_id"],
            subject=rec["subject"],
            predicate=rec["predicate"],
            object=rec["object"],
            source_quote=rec.get("source_quote", ""),
        )


@dataclass
class L1Concept:
    concept_id: str
    term: str
    type: str
    definition: str
    parent_statement_ids: list[str]
    cids: list[str] = field(default_factory=list)

    def __post_init__(self):
        if not self.parent_statement_ids:
            raise ValueError(f"concept {self.concept_id}: parent_statement_ids must be non-empty")

    def to_record(self) -> dict:
        return {
            "concept_id": self.concept_id,
            "term": self.term,
            "type": self.type,
            "definition": self.definition,
            "parent_statement_ids": self.parent_statement_ids,
            "cids": self.cids,
        }

    @classmethod
    def from_record(cls, rec: dict) -> "L1Concept":
        return cls(
            concept_id=rec["concept_id"],
            term=rec["term"],
            type=rec.get("type", ""),
            definition=rec.get("definition", ""),
            parent_statement_ids=list(rec["parent_statement_ids"]),
            cids=list(rec.get("cids", [])),
        )


CHAINS_FILE = "chains.jsonl"
STATEMENTS_FILE = "statements.jsonl"
CONCEPTS_FILE = "concepts.jsonl"


class KnowledgeStructure:
    """Immutable-after-build container with by-id and cross-level indexes."""

    def __init__(
        self,
        chains: Iterable[L3Chain] = (),
        statements: Iterable[L2Statement] = (),
        concepts: Iterable[L1Concept] = (),
    ):
        self.chains: dict[str, L3Chain] = {}
        self.statements: dict[str, L2Statement] = {}
        self.concepts: dict[str, L1Concept] = {}
        self.duplicate_ids: list[tuple[str, str]] = []  # (level, id)

        for chain in chains:
            if chain.chain_id in self.chains:
                self.duplicate_ids.append(("chain", chain.chain_id))
            else:
                self.chains[chain.chain_id] = chain
        for stmt in statements:
            if stmt.statement_id in self.statements:
                self.duplicate_ids.append(("statement", stmt.statement_id))
            else:
                self.statements[stmt.statement_id] = stmt
        for concept in concepts:
            if concept.concept_id in self.concepts:
                self.duplicate_ids.append(("concept", concept.concept_id))
            else:
                self.concepts[concept.concept_id] = concept

        self.statements_by_chain: dict[str, list[str]] = defaultdict(list)
        for sid, stmt in self.statements.items():
            self.statements_by_chain[stmt.parent_chain_id].append(sid)
        self.concepts_by_statement: dict[str, list[str]] = defaultdict(list)
        for cid_, concept in self.concepts.items():
            for sid in concept.parent_statement_ids:
                self.concepts_by_statement[sid].append(cid_)
        self.concept_by_norm_term: dict[str, str] = {}
        for concept_id in sorted(self.concepts):
            self.concept_by_norm_term.setdefault(normalize_term(self.concepts[concept_id].term), concept_id)

    def __len__(self) -> int:
        return len(self.chains) + len(self.statements) + len(self.concepts)

    # --- queries -----------------------------------------------------------

    def chain_statement_ids(self, chain_id: str) -> list[str]:
        return sorted(self.statements_by_chain.get(chain_id, []))

    def chain_concept_ids(self, chain_id: str) -> list[str]:
        out: set[str] = set()
        for sid in self.statements_by_chain.get(chain_id, []):
            out.update(self.concepts_by_statement.get(sid, []))
        return sorted(out)

    def resolve_term(self, term: str) -> str | None:
        return self.concept_by_norm_term.get(normalize_term(term))

    # --- validation --------------------------------------------------------

    def validate(self) -> list[dict]:
        """Structural violation report; an empty report means the structure
        holds the reachability contract.

        Kinds: duplicate_id, orphan_statement (no parent chain),
        orphan_concept (unreachable from any chain), dangling_reference
        (some, but not all, parent links resolve).
        """
        report: list[dict] = []
        for level, dup in self.duplicate_ids:
            report.append({"kind": "duplicate_id", "offending_id": dup, "level": level})

        reachable_statements: set[str] = set()
        for sid in sorted(self.statements):
            stmt = self.statements[sid]
            if stmt.parent_chain_id not in self.chains:
                report.append({"kind": "orphan_statement", "offending_id": sid, "level": "statement"})
            else:
                reachable_statements.add(sid)

        for concept_id in sorted(self.concepts):
            concept = self.concepts[concept_id]
            resolved = [p for p in concept.parent_statement_ids if p in self.statements]
            reaching = [p for p in resolved if p in reachable_statements]
            if not reaching:
                report.append({"kind": "orphan_concept", "offending_id": concept_id, "level": "concept"})
            elif len(resolved) < len(concept.parent_statement_ids):
                report.append({"kind": "dangling_reference", "offending_id": concept_id, "level": "concept"})
        return report

    # --- persistence -------------------------------------------------------

    def save(self, directory: str | Path) -> list[Path]:
        directory = Path(directory)
        paths = [directory / CHAINS_FILE, directory / STATEMENTS_FILE, directory / CONCEPTS_FILE]
        write_jsonl(paths[0], (self.chains[k].to_record() for k in sorted(self.chains)))
        write_jsonl(paths[1], (self.statements[k].to_record() for k in sorted(self.statements)))
        write_jsonl(paths[2], (self.concepts[k].to_record() for k in sorted(self.concepts)))
        return paths

    @classmethod
    def load(cls, directory: str | Path) -> "KnowledgeStructure":
        directory = Path(directory)
        return cls(
            chains=(L3Chain.from_record(r) for r in read_jsonl(directory / CHAINS_FILE)),
            statements=(L2Statement.from_record(r) for r in read_jsonl(directory / STATEMENTS_FILE)),
            concepts=(L1Concept.from_record(r) for r in read_jsonl(directory / CONCEPTS_FILE)),
        )


def neighbor_set(k: KnowledgeStructure, concept_id: str) -> set[str]:
    """Semantically adjacent concepts: the union of co-endpoint concepts
    (sharing a statement) and concepts participating in a statement whose
    predicate matches one of the given concept's statement predicates.
    Never contains the concept itself.
    """
    if concept_id not in k.concepts:
        raise UnknownConcept(concept_id)
    own_statements = [s for s in k.concepts[concept_id].parent_statement_ids if s in k.statements]

    neighbors: set[str] = set()
    for sid in own_statements:
        neighbors.update(k.concepts_by_statement.get(sid, []))

    own_predicates = {k.statements[sid].predicate for sid in own_statements}
    if own_predicates:
        for sid, stmt in k.statements.items():
            if stmt.predicate in own_predicates:
                neighbors.update(k.concepts_by_statement.get(sid, []))

    neighbors.discard(concept_id)
    return neighbors


def canonicalize_concepts(raw: Sequence[L1Concept]) -> list[L1Concept]:
    """Merge lexical duplicates within a discipline.

    Entries whose normalized terms match and whose discipline codes overlap
    are merged (transitively): parents and cids are unioned, the longest
    definition wins (ties broken by lexicographically smaller id), and the
    surviving id is the lexicographically smallest. Deterministic and
    idempotent. Embedding-based semantic merging is a future hook.
    """
    by_term: dict[str, list[L1Concept]] = defaultdict(list)
    for concept in raw:
        by_term[normalize_term(concept.term)].append(concept)

    merged: list[L1Concept] = []
    for term_key in by_term:
        group = sorted(by_term[term_key], key=lambda c: c.concept_id)
        # union-find over cid overlap inside the term group
        parent = list(range(len(group)))

        def find(i: int) -> int:
            while parent[i] != i:
                parent[i] = parent[parent[i]]
                i = parent[i]
            return i

        def union(i: int, j: int) -> None:
            ri, rj = find(i), find(j)
            if ri != rj:
                parent[max(ri, rj)] = min(ri, rj)

        cid_owner: dict[str, int] = {}
        for i, concept in enumerate(group):
            cids = concept.cids or [""]  # entries without cids merge freely
            for c in cids:
                if c in cid_owner:
                    union(cid_owner[c], i)
                else:
                    cid_owner[c] = i
        if any(not c.cids for c in group):
            # cid-less entries join every cluster of the same term
            for i in range(len(group)):
                union(0, i)

        clusters: dict[int, list[L1Concept]] = defaultdict(list)
        for i, concept in enumerate(group):
            clusters[find(i)].append(concept)

        for members in clusters.values():
            members.sort(key=lambda c: c.concept_id)
            best = min(members, key=lambda c: (-len(c.definition), c.concept_id))
            parents = sorted({p for m in members for p in m.parent_statement_ids})
            cids = sorted({c for m in members for c in m.cids})
            merged.append(L1Concept(
                concept_id=members[0].concept_id,
                term=best.term,
                type=best.type,
                definition=best.definition,
                parent_statement_ids=parents,
                cids=cids,
            ))

    merged.sort(key=lambda c: c.concept_id)
    return merged


def connectivity_stats(k: KnowledgeStructure) -> dict:
    """Node counts per level and the largest-connected-component ratio of the
    undirected parent-link graph (one node per entry, one edge per link)."""
    for violation in k.validate():
        if violation["kind"] in ("orphan_statement", "orphan_concept", "dangling_reference"):
            raise DanglingReference(f"{violation['kind']}: {violation['offending_id']}")

    nodes: list[tuple[str, str]] = (
        [("chain", i) for i in k.chains]
        + [("statement", i) for i in k.statements]
        + [("concept", i) for i in k.concepts]
    )
    index = {node: n for n, node in enumerate(nodes)}
    adjacency: list[list[int]] = [[] for _ in nodes]

    def link(a: tuple[str, str], b: tuple[str, str]) -> None:
        ia, ib = index[a], index[b]
        adjacency[ia].append(ib)
        adjacency[ib].append(ia)

    for sid, stmt in k.statements.items():
        link(("statement", sid), ("chain", stmt.parent_chain_id))
    for concept_id, concept in k.concepts.items():
        for sid in concept.parent_statement_ids:
            link(("concept", concept_id), ("statement", sid))

    seen = [False] * len(nodes)
    largest = 0
    for start in range(len(nodes)):
        if seen[start]:
            continue
        size = 0
        stack = [start]
        seen[start] = True
        while stack:
            current = stack.pop()
            size += 1
            for nxt in adjacency[current]:
                if not seen[nxt]:
                    seen[nxt] = True
                    stack.append(nxt)
        largest = max(largest, size)

    total = len(nodes)
    return {
        "chains": len(k.chains),
        "statements": len(k.statements),
        "concepts": len(k.concepts),
        "total_nodes": total,
        "lcc_ratio": largest / total if total else 1.0,
    }
