import math
import random
import statistics

import pytest
from hypothesis import given, settings, strategies as st

from corpusloop.benchmark import BenchmarkItem
from corpusloop.errors import DegenerateInput, LengthMismatch, UnknownItemId
from corpusloop.evaluation import (
    EvaluationReport,
    Prediction,
    bootstrap_ci,
    error_set,
    parse_multi_choice_answer,
    score,
    spearman_rho,
)


def item(item_id, answer, cid="001", question="q?"):
    return BenchmarkItem(
        item_id=item_id,
        question=question,
        options={"A": "a", "B": "b", "C": "c", "D": "d"},
        answer=frozenset(answer),
        explanation="",
        metadata={"chain_id": "chain-1", "l2_ids": [], "l1_ids": []},
        cid=cid,
    )


class TestParseMultiChoiceAnswer:
    def test_prose_answer(self):
        assert parse_multi_choice_answer("The answer is B and D.") == "B,D"

    def test_dedup_and_alphabetize(self):
        assert parse_multi_choice_answer("B,A,B") == "A,B"

    def test_repeated_single(self):
        assert parse_multi_choice_answer("I think option C. Also C.") == "C"

    def test_empty_result_allowed(self):
        assert parse_multi_choice_answer("no letters here") == ""
        assert parse_multi_choice_answer("") == ""

    def test_letters_inside_words_ignored(self):
        assert parse_multi_choice_answer("CAB rides are nice") == ""
        assert parse_multi_choice_answer("option (B) then A.") == "A,B"

    def test_filtered_to_valid_set(self):
        assert parse_multi_choice_answer("A, B or F", valid=("A", "B")) == "A,B"
        assert parse_multi_choice_answer("C", valid=("A", "B")) == ""

    @given(st.text(alphabet="ABCDEFxyz,. ()\n", max_size=60))
    def test_fuzz_properties(self, raw):
        out = parse_multi_choice_answer(raw)
        letters = out.split(",") if out else []
        assert letters == sorted(set(letters))
        assert set(letters) <= {"A", "B", "C", "D"}
        assert parse_multi_choice_answer(out) == out  # idempotent


def build_d5_fixture():
    """Benchmark and predictions engineered to the published report header:
    14,072 items, 9,268 correct, 4,804 errors, first three subjects at
    1,000 items with 354/350/370 errors."""
    subject_plan = [("001", 1000, 354), ("002", 1000, 350), ("003", 1000, 370)]
    remaining_items = 14_072 - 3000
    remaining_errors = 4_804 - 1074
    widths = [remaining_items // 13] * 13
    widths[-1] += remaining_items - sum(widths)
    errs = [remaining_errors // 13] * 13
    errs[-1] += remaining_errors - sum(errs)
    for i in range(13):
        subject_plan.append((f"{i + 4:03d}", widths[i], errs[i]))

    benchmark, predictions = [], []
    n = 0
    for cid, total, errors in subject_plan:
        for i in range(total):
            truth = ("A", "A,B", "B,D", "A,C,D")[n % 4]
            it = item(f"item-{n:05d}", truth.split(","), cid=cid)
            benchmark.append(it)
            if i < errors:
                wrong = "B" if truth != "B" else "C"
                predictions.append(Prediction(it.item_id, wrong))
            else:
                predictions.append(Prediction(it.item_id, f"The answer is {truth}."))
            n += 1
    return benchmark, predictions


class TestScore:
    def test_report_header_matches_published_fixture(self):
        benchmark, predictions = build_d5_fixture()
        report = score(benchmark, predictions, model_name="fixture", timestamp="20260210_220124")
        assert report.total == 14_072
        assert report.correct == 9_268
        assert f"{report.overall_accuracy * 100:.2f}" == "65.86"
        assert len(report.error_samples) == 4_804
        assert report.per_subject["001"] == {"accuracy": 0.646, "total": 1000, "errors": 354}

    def test_all_correct(self):
        benchmark = [item(f"i{n}", "A") for n in range(5)]
        predictions = [Prediction(f"i{n}", "A") for n in range(5)]
        report = score(benchmark, predictions)
        assert report.overall_accuracy == 1.0
        assert report.error_samples == []

    def test_missing_prediction_scores_wrong(self):
        benchmark = [item("i1", "A"), item("i2", "B")]
        report = score(benchmark, [Prediction("i1", "A")])
        assert report.correct == 1
        assert report.error_samples[0]["item_id"] == "i2"
        assert report.error_samples[0]["predicted_answer"] == ""

    def test_no_partial_credit(self):
        benchmark = [item("i1", ("A", "B"))]
        for raw in ("A", "A,B,C", "B"):
            assert score(benchmark, [Prediction("i1", raw)]).correct == 0
        assert score(benchmark, [Prediction("i1", "B, A")]).correct == 1

    def test_unknown_item_rejected(self):
        with pytest.raises(UnknownItemId):
            score([item("i1", "A")], [Prediction("ghost", "A")])

    def test_duplicate_predictions_rejected(self):
        with pytest.raises(ValueError):
            score([item("i1", "A")], [Prediction("i1", "A"), Prediction("i1", "B")])

    def test_per_subject_grouping_oracle(self):
        rng = random.Random(4)
        benchmark, predictions = [], []
        for n in range(30):
            cid = rng.choice(("001", "002", "003"))
            truth = rng.choice(("A", "B", "A,C"))
            benchmark.append(item(f"i{n}", truth.split(","), cid=cid))
            correct = rng.random() < 0.5
            predictions.append(Prediction(f"i{n}", truth if correct else "D"))
        report = score(benchmark, predictions)

        by_cid = {}
        for it, pred in zip(benchmark, predictions):
            truth = ",".join(sorted(it.answer))
            ok = parse_multi_choice_answer(pred.raw_text) == truth
            bucket = by_cid.setdefault(it.cid, [0, 0])
            bucket[0] += 1
            bucket[1] += 0 if ok else 1
        for cid, (total, errors) in by_cid.items():
            assert report.per_subject[cid]["total"] == total
            assert report.per_subject[cid]["errors"] == errors
            assert report.per_subject[cid]["accuracy"] == pytest.approx((total - errors) / total)
        assert sum(v["total"] for v in report.per_subject.values()) == report.total

    def test_permutation_invariance(self):
        benchmark, predictions = [], []
        rng = random.Random(8)
        for n in range(20):
            truth = rng.choice(("A", "B,C"))
            benchmark.append(item(f"i{n}", truth.split(",")))
            predictions.append(Prediction(f"i{n}", rng.choice(("A", "B,C", "D"))))
        base = score(benchmark, predictions, timestamp="t")
        shuffled = list(predictions)
        rng.shuffle(shuffled)
        again = score(benchmark, shuffled, timestamp="t")
        assert base.to_record() == again.to_record()

    def test_accuracy_monotone_under_single_fix(self):
        benchmark = [item(f"i{n}", "A") for n in range(10)]
        wrong_preds = [Prediction(f"i{n}", "B") for n in range(10)]
        before = score(benchmark, wrong_preds).overall_accuracy
        fixed = [Prediction("i0", "A")] + wrong_preds[1:]
        after = score(benchmark, fixed).overall_accuracy
        assert after - before == pytest.approx(1 / 10)


class TestErrorSet:
    def test_extraction_identity(self):
        benchmark, predictions = build_d5_fixture()
        report = score(benchmark, predictions, timestamp="t")
        errors = error_set(report)
        assert len(errors) == 4_804
        assert len(errors) + report.correct == report.total
        assert all(e["metadata"]["chain_id"] for e in errors)

    def test_perfect_run_empty(self):
        report = score([item("i1", "A")], [Prediction("i1", "A")])
        assert error_set(report) == []

    def test_accounting_identity_random(self):
        rng = random.Random(12)
        for _ in range(20):
            n = rng.randint(1, 40)
            benchmark = [item(f"i{j}", rng.choice(("A", "B", "C,D")).split(",")) for j in range(n)]
            predictions = [Prediction(f"i{j}", rng.choice(("A", "B", "C,D", ""))) for j in range(n)]
            report = score(benchmark, predictions)
            assert len(error_set(report)) + report.correct == report.total


def rank_oracle(values):
    """Independent average-rank computation via sorted groups."""
    pairs = sorted(enumerate(values), key=lambda p: p[1])
    ranks = [0.0] * len(values)
    i = 0
    while i < len(pairs):
        j = i
        while j + 1 < len(pairs) and pairs[j + 1][1] == pairs[i][1]:
            j += 1
        avg = sum(range(i + 1, j + 2)) / (j - i + 1)
        for k in range(i, j + 1):
            ranks[pairs[k][0]] = avg
        i = j + 1
    return ranks


class TestSpearman:
    def test_identical_orderings(self):
        assert spearman_rho([1, 2, 3, 4], [10, 20, 30, 40]) == pytest.approx(1.0)

    def test_reversed(self):
        assert spearman_rho([1, 2, 3, 4], [4, 3, 2, 1]) == pytest.approx(-1.0)

    def test_length_mismatch(self):
        with pytest.raises(LengthMismatch):
            spearman_rho([1, 2], [1, 2, 3])
        with pytest.raises(LengthMismatch):
            spearman_rho([1], [1])

    def test_degenerate(self):
        with pytest.raises(DegenerateInput):
            spearman_rho([5, 5, 5], [1, 2, 3])

    def test_matches_from_definition_oracle_with_ties(self):
        rng = random.Random(21)
        for _ in range(200):
            n = rng.randint(2, 20)
            a = [rng.randint(0, 5) for _ in range(n)]
            b = [rng.randint(0, 5) for _ in range(n)]
            ra, rb = rank_oracle(a), rank_oracle(b)
            if len(set(a)) < 2 or len(set(b)) < 2:
                with pytest.raises(DegenerateInput):
                    spearman_rho(a, b)
                continue
            expected = statistics.correlation(ra, rb)
            assert abs(spearman_rho(a, b) - expected) < 1e-12


def bootstrap_twin(values, resamples, level, seed):
    """Second implementation written against the documented resampler
    contract; must agree bit for bit."""
    rng = random.Random(seed)
    n = len(values)
    means = []
    for _ in range(resamples):
        total = 0.0
        for _ in range(n):
            total += values[rng.randrange(n)]
        means.append(total / n)
    means.sort()

    def quantile(q):
        h = (len(means) - 1) * q
        lo, hi = math.floor(h), math.ceil(h)
        if lo == hi:
            return means[lo]
        return means[lo] + (means[hi] - means[lo]) * (h - lo)

    alpha = (1 - level) / 2
    return quantile(alpha), quantile(1 - alpha)


class TestBootstrap:
    def test_constant_values_collapse(self):
        assert bootstrap_ci([3.5] * 8, resamples=500, seed=1) == (3.5, 3.5)

    def test_single_value(self):
        assert bootstrap_ci([2.25], resamples=100, seed=5) == (2.25, 2.25)

    def test_seed_deterministic(self):
        values = [0.5, 0.62, 0.71, 0.44, 0.58]
        assert bootstrap_ci(values, 2000, 0.95, seed=7) == bootstrap_ci(values, 2000, 0.95, seed=7)
        assert bootstrap_ci(values, 2000, 0.95, seed=7) != bootstrap_ci(values, 2000, 0.95, seed=8)

    def test_dual_implementation_agrees_exactly(self):
        rng = random.Random(33)
        values = [rng.uniform(0.4, 0.9) for _ in range(16)]
        ours = bootstrap_ci(values, resamples=10_000, level=0.95, seed=42)
        twin = bootstrap_twin(values, resamples=10_000, level=0.95, seed=42)
        assert ours == twin

    def test_interval_ordering_and_coverage_of_mean(self):
        rng = random.Random(2)
        values = [rng.uniform(0, 1) for _ in range(30)]
        lo, hi = bootstrap_ci(values, resamples=3000, seed=11)
        assert lo <= statistics.fmean(values) <= hi

    def test_validation(self):
        with pytest.raises(ValueError):
            bootstrap_ci([], 10, 0.95, 0)
        with pytest.raises(ValueError):
            bootstrap_ci([1.0], 10, 1.5, 0)


class TestReportRoundTrip:
    def test_record_round_trip(self):
        benchmark, predictions = build_d5_fixture()
        report = score(benchmark[:50], predictions[:50], timestamp="t")
        again = EvaluationReport.from_record(report.to_record())
        assert again.to_record() == report.to_record()
