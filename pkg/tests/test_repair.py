import random

import pytest

from conftest import json_response
from corpusloop.errors import (
    AllZeroErrors,
    InsufficientDisjointPool,
    QuotaMismatch,
    SchemaInvalid,
    ShortBatch,
)
from corpusloop.evaluation import EvaluationReport
from corpusloop.repair import (
    PATCH_FORMAT_COUNTS,
    Diagnosis,
    PatchContext,
    aggregate_patterns,
    allocate_quota,
    assemble_round2,
    build_patch_context,
    diagnose,
    generate_patch,
    parse_diagnosis,
    patch_l2_ids,
    select_replay,
)
from corpusloop.synthesis import TrainingSample


def make_context(cid="001", statement_ids=("s1", "s2"), concept_id="c1"):
    return PatchContext(
        concept_id=concept_id,
        concept_term="the focus concept",
        definition="a definition",
        statement_ids=list(statement_ids),
        facts=["a fact"],
        neighbor_terms=["near thing"],
        chain_summary="summary",
        related_example="Question: q\nModel answered: A\nCorrect answer: B",
        cid=cid,
    )


def diag(item_id="item-1", issue="concept_gap"):
    return Diagnosis(item_id, issue, "the focus concept", "r", "rec", 0.9)


class TestDiagnose:
    def test_fresnel_error_is_concept_gap(self, demo_project):
        report = demo_project.load_eval_report(1)
        backend = demo_project.backend()
        fresnel = next(e for e in report.error_samples if e["item_id"] == "item-100003")
        d = diagnose(fresnel, backend)
        assert d.issue_type == "concept_gap"
        assert d.key_concept == "Interference in diffraction patterns"

    def test_curved_rod_error_is_capability_deficit(self, demo_project):
        report = demo_project.load_eval_report(1)
        backend = demo_project.backend()
        rod = next(e for e in report.error_samples if e["item_id"] == "item-100007")
        d = diagnose(rod, backend)
        assert d.issue_type == "capability_deficit"
        assert "curved slender rod" in d.key_concept.lower()

    def test_missing_issue_type_rejected(self, stub_backend_factory):
        backend = stub_backend_factory(json_response({
            "key_concept": "x", "reasoning": "r", "recommendation": "", "confidence": 0.5,
        }))
        with pytest.raises(SchemaInvalid):
            diagnose({"item_id": "item-1", "question": "q", "true_answer": "A",
                      "predicted_answer": "B", "question_type": "single_choice",
                      "cid": "001", "metadata": {}}, backend)

    def test_unknown_issue_type_rejected(self):
        with pytest.raises(SchemaInvalid):
            parse_diagnosis({"issue_type": "laziness", "key_concept": "x", "confidence": 0.5}, "i")

    def test_confidence_bounds(self):
        with pytest.raises(SchemaInvalid):
            parse_diagnosis({"issue_type": "concept_gap", "key_concept": "x", "confidence": 1.5}, "i")


class TestAggregatePatterns:
    def test_published_error_pattern_counts(self):
        diagnoses = [diag(f"i{n}", "concept_gap") for n in range(1509)]
        diagnoses += [diag(f"j{n}", "capability_deficit") for n in range(3093)]
        errors = [{"item_id": f"e{n}", "question_type": "multiple_choice"} for n in range(4787)]
        errors += [{"item_id": f"s{n}", "question_type": "single_choice"} for n in range(17)]
        patterns = aggregate_patterns(diagnoses, errors)
        assert patterns["by_issue_type"] == {"capability_deficit": 3093, "concept_gap": 1509}
        assert patterns["by_question_type"] == {"multiple_choice": 4787, "single_choice": 17}
        assert patterns["errors"] == 4804
        assert patterns["diagnosed"] == 4602
        assert patterns["undiagnosed"] == 202

    def test_empty_inputs(self):
        patterns = aggregate_patterns([], [])
        assert patterns["by_issue_type"] == {}
        assert patterns["errors"] == 0

    def test_random_counts_match_fold_oracle(self):
        rng = random.Random(9)
        for _ in range(20):
            diagnoses = [diag(f"i{n}", rng.choice(("concept_gap", "capability_deficit")))
                         for n in range(rng.randint(0, 30))]
            errors = [{"item_id": f"e{n}", "question_type": rng.choice(("a", "b", "c"))}
                      for n in range(rng.randint(0, 30))]
            patterns = aggregate_patterns(diagnoses, errors)
            fold = {}
            for d in diagnoses:
                fold[d.issue_type] = fold.get(d.issue_type, 0) + 1
            assert patterns["by_issue_type"] == dict(sorted(fold.items()))
            fold_q = {}
            for e in errors:
                fold_q[e["question_type"]] = fold_q.get(e["question_type"], 0) + 1
            assert patterns["by_question_type"] == dict(sorted(fold_q.items()))


class TestAllocateQuota:
    def test_published_thirty_percent_case(self):
        quotas = allocate_quota({"A": 30, "B": 10, "C": 60}, 160_000)
        assert quotas == {"A": 48_000, "B": 16_000, "C": 96_000}

    def test_single_discipline_takes_all(self):
        assert allocate_quota({"X": 7}, 500) == {"X": 500}

    def test_all_zero_errors_rejected(self):
        with pytest.raises(AllZeroErrors):
            allocate_quota({"A": 0, "B": 0}, 10)
        assert allocate_quota({"A": 0}, 0) == {"A": 0}

    def test_thousand_random_distributions(self):
        rng = random.Random(13)
        for _ in range(1000):
            cids = [f"{i:03d}" for i in range(1, rng.randint(2, 17))]
            counts = {cid: rng.randint(0, 500) for cid in cids}
            if sum(counts.values()) == 0:
                counts[cids[0]] = 1
            total = rng.randint(0, 200_000)
            quotas = allocate_quota(counts, total)
            assert sum(quotas.values()) == total
            error_total = sum(counts.values())
            for cid in cids:
                ideal = total * counts[cid] / error_total
                assert abs(quotas[cid] - ideal) < 1.0 + 1e-9


class TestGeneratePatch:
    def test_exact_twenty_with_format_split(self, scripted_backend):
        batch = generate_patch(diag(), make_context(), scripted_backend)
        assert len(batch) == 20
        by_fmt = {"open_ended": 0, "choice": 0, "true_false": 0}
        for s in batch:
            if s.question_type == "open_ended":
                by_fmt["open_ended"] += 1
            elif s.question_type in ("single_choice", "multiple_choice"):
                by_fmt["choice"] += 1
            else:
                by_fmt["true_false"] += 1
        assert by_fmt == {"open_ended": 12, "choice": 6, "true_false": 2}
        assert all(s.origin == "patch" for s in batch)

    def test_concept_gap_samples_carry_concept_id(self, scripted_backend):
        context = make_context(concept_id="concept-77")
        batch = generate_patch(diag(issue="concept_gap"), context, scripted_backend)
        assert all(s.l1_ids == ["concept-77"] for s in batch)
        assert all(set(s.l2_ids) == {"s1", "s2"} for s in batch)

    def test_capability_deficit_routes_to_cot(self, scripted_backend):
        batch = generate_patch(diag(issue="capability_deficit"), make_context(), scripted_backend)
        assert len(batch) == 20
        assert any("Step 1" in s.answer for s in batch if s.question_type == "open_ended")

    def test_short_batch_after_retries(self, stub_backend_factory):
        nineteen = json_response([
            {"question": f"q{i}", "answer": f"a{i}"} for i in range(11)
        ])
        backend = stub_backend_factory(nineteen, repeat_last=True)
        with pytest.raises(ShortBatch):
            generate_patch(diag(), make_context(), backend)

    def test_invalid_choice_answer_rejected_and_skipped(self, stub_backend_factory):
        good_qa = json_response([{"question": f"q{i}", "answer": f"a{i}"} for i in range(12)])
        bad_choice = json_response([
            {"question": "q", "options": {"A": "1", "B": "2", "C": "3", "D": "4"}, "answer": "E\n\nx"},
        ] + [
            {"question": f"q{i}", "options": {"A": "1", "B": "2", "C": "3", "D": "4"},
             "answer": "A,B\n\nwhy"} for i in range(6)
        ])
        good_tf = json_response([
            {"question": f"t{i}", "options": {"A": "True", "B": "False"}, "answer": "A\n\nr"}
            for i in range(2)
        ])
        backend = stub_backend_factory(good_qa, bad_choice, good_tf)
        batch = generate_patch(diag(), make_context(), backend)
        assert len(batch) == 20


def training_sample(sample_id, cid, l2_ids, origin="initial"):
    return TrainingSample(sample_id, f"q {sample_id}", "a", "open_ended",
                          list(l2_ids), [], cid, origin=origin)


class TestSelectReplay:
    def test_disjoint_pool_exact_selection(self):
        pool = [training_sample(f"v{i}", "001", [f"x{i}"]) for i in range(10)]
        patches = [training_sample("p0", "001", ["y0"], origin="patch")]
        replay = select_replay(pool, patches, {"001": 6}, seed=3)
        chosen = replay["001"]
        assert len(chosen) == 5  # quota 6 minus 1 patch
        assert all(s.origin == "replay" for s in chosen)
        assert not patch_l2_ids(patches) & {sid for s in chosen for sid in s.l2_ids}

    def test_fully_overlapping_pool_fails_strict(self):
        pool = [training_sample(f"v{i}", "001", ["shared"]) for i in range(5)]
        patches = [training_sample("p0", "001", ["shared"], origin="patch")]
        with pytest.raises(InsufficientDisjointPool):
            select_replay(pool, patches, {"001": 3}, seed=1)

    def test_relaxed_mode_fills_shortfall(self, caplog):
        pool = [training_sample(f"v{i}", "001", ["shared"]) for i in range(5)]
        pool += [training_sample("clean", "001", ["free"])]
        patches = [training_sample("p0", "001", ["shared"], origin="patch")]
        with caplog.at_level("WARNING"):
            replay = select_replay(pool, patches, {"001": 4}, seed=1, strict=False)
        assert len(replay["001"]) == 3
        assert any("relaxed replay" in r.message for r in caplog.records)

    def test_random_pools_brute_force_disjointness(self):
        rng = random.Random(19)
        for _ in range(30):
            ids = [f"l2-{i}" for i in range(20)]
            pool = [
                training_sample(f"v{i}", "001", rng.sample(ids, rng.randint(1, 3)))
                for i in range(40)
            ]
            patch_ids = set(rng.sample(ids, 4))
            patches = [training_sample("p0", "001", sorted(patch_ids), origin="patch")]
            eligible = [s for s in pool if not set(s.l2_ids) & patch_ids]
            quota = {"001": len(patches) + min(5, len(eligible))}
            replay = select_replay(pool, patches, quota, seed=rng.randrange(10**6))
            for s in replay["001"]:
                assert not set(s.l2_ids) & patch_ids  # Eq: intersection empty
            assert len(replay["001"]) == quota["001"] - 1

    def test_correct_only_restriction_with_report(self):
        pool = [
            training_sample("v-err", "001", ["err-stmt"]),
            training_sample("v-ok", "001", ["ok-stmt"]),
        ]
        report = EvaluationReport(
            model_name="m", timestamp="t", overall_accuracy=0.5, correct=1, total=2,
            per_subject={}, error_samples=[{
                "item_id": "i1", "question": "q", "true_answer": "A", "predicted_answer": "B",
                "question_type": "single_choice", "cid": "001",
                "metadata": {"chain_id": "c", "l2_ids": ["err-stmt"], "l1_ids": []},
            }],
        )
        replay = select_replay(pool, [], {"001": 1}, seed=5, report=report)
        assert [s.sample_id for s in replay["001"]] == ["v-ok"]

    def test_seeded_selection_deterministic(self):
        pool = [training_sample(f"v{i}", "001", [f"x{i}"]) for i in range(30)]
        a = select_replay(pool, [], {"001": 10}, seed=77)
        b = select_replay(pool, [], {"001": 10}, seed=77)
        assert [s.sample_id for s in a["001"]] == [s.sample_id for s in b["001"]]


class TestAssembleRound2:
    def test_volume_contract(self):
        patches = {"item-1": [training_sample(f"p{i}", "001", ["a"], origin="patch") for i in range(20)]}
        replay = {"001": [training_sample(f"r{i}", "001", ["b"], origin="replay") for i in range(30)],
                  "002": [training_sample(f"q{i}", "002", ["c"], origin="replay") for i in range(50)]}
        corpus, manifest = assemble_round2(patches, replay, 100, seed=1,
                                           quotas={"001": 50, "002": 50})
        assert len(corpus) == 100
        assert manifest["per_cid_origin_counts"]["001"] == {"patch": 20, "replay": 30}
        assert manifest["per_cid_origin_counts"]["002"] == {"patch": 0, "replay": 50}

    def test_degenerate_replay_only_round(self):
        replay = {"001": [training_sample(f"r{i}", "001", ["b"], origin="replay") for i in range(10)]}
        corpus, manifest = assemble_round2({}, replay, 10, seed=2)
        assert len(corpus) == 10
        assert all(s.origin == "replay" for s in corpus)

    def test_quota_mismatch_detected(self):
        replay = {"001": [training_sample("r0", "001", ["b"], origin="replay")]}
        with pytest.raises(QuotaMismatch):
            assemble_round2({}, replay, 5, seed=0)
        with pytest.raises(QuotaMismatch):
            assemble_round2({}, replay, 1, seed=0, quotas={"001": 2})

    def test_shuffle_deterministic_and_tagged(self):
        replay = {"001": [training_sample(f"r{i}", "001", ["b"], origin="replay") for i in range(20)]}
        a, _ = assemble_round2({}, replay, 20, seed=9)
        b, _ = assemble_round2({}, replay, 20, seed=9)
        assert [s.sample_id for s in a] == [s.sample_id for s in b]
        c, _ = assemble_round2({}, replay, 20, seed=10)
        assert [s.sample_id for s in a] != [s.sample_id for s in c]


class TestBuildPatchContext:
    def test_resolves_key_concept_by_term(self, biology_reference_structure):
        d = Diagnosis("item-1", "concept_gap", "histone proteins (H3 and H4)", "", "", 0.9)
        error = {"item_id": "item-1", "question": "q", "cid": "006",
                 "metadata": {"chain_id": "chain-110007", "l2_ids": [], "l1_ids": []}}
        context = build_patch_context(d, error, biology_reference_structure)
        assert context.concept_id == "concept-128465"
        assert context.statement_ids == ["stmt-chain-110007-000"]
        assert context.chain_summary  # chain resolved via metadata

    def test_falls_back_to_item_metadata(self, biology_reference_structure):
        d = Diagnosis("item-1", "concept_gap", "a phrase matching nothing", "", "", 0.9)
        error = {"item_id": "item-1", "question": "q", "cid": "006",
                 "metadata": {"chain_id": "chain-110007", "l2_ids": ["stmt-chain-110007-000"],
                              "l1_ids": ["concept-128466"]}}
        context = build_patch_context(d, error, biology_reference_structure)
        assert context.concept_id == "concept-128466"

    def test_never_dead_ends(self, biology_reference_structure):
        d = Diagnosis("item-1", "capability_deficit", "nothing resolvable", "", "", 0.9)
        error = {"item_id": "item-1", "question": "q", "cid": "006",
                 "metadata": {"chain_id": "chain-ghost", "l2_ids": [], "l1_ids": []}}
        context = build_patch_context(d, error, biology_reference_structure)
        assert context.concept_term == "nothing resolvable"
        assert context.statement_ids == []


class TestDemoRoundTwo:
    def test_round2_partition_counts(self, demo_project):
        corpus = demo_project.load_corpus(2)
        assert len(corpus) == 360
        per = {}
        for s in corpus:
            per.setdefault(s.cid, {}).setdefault(s.origin, 0)
            per[s.cid][s.origin] += 1
        for cid in ("001", "006", "007"):
            assert per[cid]["patch"] == 40   # 2 diagnosed errors x 20
            assert per[cid]["replay"] == 80  # quota 120 minus patches
        assert all(set(p) <= {"patch", "replay"} for p in per.values())

    def test_round2_disjointness_brute_force(self, demo_project):
        corpus = demo_project.load_corpus(2)
        by_cid = {}
        for s in corpus:
            by_cid.setdefault(s.cid, {"patch": set(), "replay": set()})
            by_cid[s.cid][s.origin].update(s.l2_ids)
        for cid, sets in by_cid.items():
            assert sets["patch"] & sets["replay"] == set()
