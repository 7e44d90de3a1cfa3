import json

import pytest

_ACCEPTANCE_RESULTS: list[tuple[str, str]] = []


def pytest_runtest_logreport(report):
    if report.when == "call" and "test_acceptance" in report.nodeid:
        name = report.nodeid.split("::")[-1]
        _ACCEPTANCE_RESULTS.append((name, report.outcome))


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_RESULTS:
        terminalreporter.write_sep("=", "acceptance criteria")
        for name, outcome in _ACCEPTANCE_RESULTS:
            verdict = "PASS" if outcome == "passed" else "FAIL"
            terminalreporter.write_line(f"  {verdict}  {name}")

from corpusloop.demo import ScriptedBackend, build_demo_project
from corpusloop.knowledge import KnowledgeStructure, L1Concept, L2Statement, L3Chain
from corpusloop.project import STAGES, Project


class StubBackend:
    """Returns queued responses in order, or one fixed response forever."""

    def __init__(self, *responses, repeat_last=False):
        self.responses = list(responses)
        self.repeat_last = repeat_last
        self.requests = []

    def complete(self, request):
        self.requests.append(request)
        if len(self.responses) > 1 or not self.repeat_last:
            return self.responses.pop(0)
        return self.responses[0]


@pytest.fixture
def stub_backend_factory():
    return StubBackend


@pytest.fixture(scope="session")
def scripted_backend():
    return ScriptedBackend()


@pytest.fixture(scope="session")
def demo_project(tmp_path_factory) -> Project:
    """A fully built demo project with every stage already run."""
    root = tmp_path_factory.mktemp("demo") / "project"
    project = build_demo_project(root, seed=42)
    for stage in STAGES:
        project.run_stage(stage)
    return project


@pytest.fixture(scope="session")
def demo_knowledge(demo_project) -> KnowledgeStructure:
    return demo_project.load_knowledge()


def make_structure(spec: dict) -> KnowledgeStructure:
    """Build a structure from a compact description.

    spec = {
        "chains": {chain_id: {"cid": ..., "steps": [...]}},
        "statements": {stmt_id: (chain_id, subject, predicate, object)},
        "concepts": {concept_id: (term, [parent stmt ids])},
    }
    """
    chains = [
        L3Chain(
            chain_id=cid,
            domain_context="test",
            process_name=cid,
            narrative_summary="",
            preconditions=[],
            negative_constraints=[],
            steps=body.get("steps", ["1. a", "2. b"]),
            cid=body.get("cid", "001"),
            source_chunk_id=body.get("source_chunk_id", "chunk-x"),
        )
        for cid, body in spec.get("chains", {}).items()
    ]
    statements = [
        L2Statement(sid, chain, subject, predicate, obj)
        for sid, (chain, subject, predicate, obj) in spec.get("statements", {}).items()
    ]
    concepts = [
        L1Concept(conc_id, term, "t", f"def of {term}", list(parents), cids=["001"])
        for conc_id, (term, parents) in spec.get("concepts", {}).items()
    ]
    return KnowledgeStructure(chains, statements, concepts)


@pytest.fixture
def structure_factory():
    return make_structure


@pytest.fixture
def biology_reference_structure() -> KnowledgeStructure:
    """The pinned chromatin-activation slice: one chain, its first statement,
    and the two concepts harvested from that statement's endpoints."""
    chain = L3Chain(
        chain_id="chain-110007",
        domain_context="Molecular Biology and Genetics",
        process_name="Mechanism of Eukaryotic Chromatin Activation for Gene Transcription",
        narrative_summary="Histone modification loosens chromatin for transcription.",
        preconditions=["DNA must be packaged into nucleosomes"],
        negative_constraints=["Does not occur in prokaryotes"],
        steps=[
            "1. Histone proteins (H3, H4) undergo acetylation, phosphorylation, or methylation.",
            "2. Acetylation reduces the net positive charge of the histone octamer.",
        ],
        cid="006",
        source_chunk_id="chunk-110007",
    )
    statement = L2Statement(
        statement_id="stmt-chain-110007-000",
        parent_chain_id="chain-110007",
        subject="Histone proteins (H3 and H4)",
        predicate="undergo chemical modifications including",
        object="acetylation of lysine/arginine residues",
    )
    concepts = [
        L1Concept(
            concept_id="concept-128465",
            term="Histone Proteins (H3 and H4)",
            type="Protein",
            definition="Highly alkaline proteins that package and order DNA into structural units.",
            parent_statement_ids=["stmt-chain-110007-000"],
            cids=["006"],
        ),
        L1Concept(
            concept_id="concept-128466",
            term="Acetylation of lysine/arginine residues",
            type="Process",
            definition="Addition of acetyl groups to histone tails.",
            parent_statement_ids=["stmt-chain-110007-000"],
            cids=["006"],
        ),
    ]
    return KnowledgeStructure([chain], [statement], concepts)


def json_response(payload) -> str:
    return json.dumps(payload, ensure_ascii=False)
