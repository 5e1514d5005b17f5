"""Suite loading and answer scoring against an independent normalizer."""

import json
import random
from collections import Counter
from decimal import Decimal

import pytest

from dana.answering import KIND_COMMA_LIST, KIND_NUMERIC, GuidelineSpec
from dana.bench import (
    BenchmarkTask,
    build_report,
    load_suite,
    score_answer,
    TaskResult,
)
from dana.errors import DuplicateTask, MalformedRecord, SuiteUnreadable


def write_suite(path, records):
    path.write_text("\n".join(json.dumps(r) for r in records) + "\n", encoding="utf-8")


class TestLoadSuite:
    def test_three_well_formed_records(self, tmp_path):
        path = tmp_path / "suite.jsonl"
        write_suite(
            path,
            [
                {"task_id": "t1", "question": "q1", "level": "easy", "answer": "a"},
                {"task_id": "t2", "question": "q2", "level": "hard"},
                {"task_id": "t3", "question": "q3", "guideline": "g"},
            ],
        )
        tasks = load_suite(path)
        assert [t.task_id for t in tasks] == ["t1", "t2", "t3"]
        assert tasks[0].expected_answer == "a"
        assert tasks[1].expected_answer is None

    def test_missing_task_id_names_the_line(self, tmp_path):
        path = tmp_path / "suite.jsonl"
        write_suite(path, [{"task_id": "t1", "question": "q"}, {"question": "no id"}])
        with pytest.raises(MalformedRecord, match=":2"):
            load_suite(path)

    def test_lenient_mode_skips_malformed_records(self, tmp_path):
        path = tmp_path / "suite.jsonl"
        write_suite(path, [{"task_id": "t1", "question": "q"}, {"question": "no id"}])
        tasks = load_suite(path, lenient=True)
        assert [t.task_id for t in tasks] == ["t1"]

    def test_duplicate_task_id_is_always_fatal(self, tmp_path):
        path = tmp_path / "suite.jsonl"
        write_suite(path, [{"task_id": "t1", "question": "a"}, {"task_id": "t1", "question": "b"}])
        with pytest.raises(DuplicateTask):
            load_suite(path, lenient=True)

    def test_unreadable_suite(self, tmp_path):
        with pytest.raises(SuiteUnreadable):
            load_suite(tmp_path / "missing.jsonl")


LIST_SPEC = GuidelineSpec(kind=KIND_COMMA_LIST)
NUM_SPEC = GuidelineSpec(kind=KIND_NUMERIC, decimals=2)
TEXT_SPEC = GuidelineSpec()


def oracle_score(produced: str, expected: str, spec: GuidelineSpec, ordered: bool = False) -> bool:
    """Independent normalizer: Counter-based multiset compare for lists,
    Decimal arithmetic for numerics, plain normalized equality otherwise."""
    if spec.kind == KIND_COMMA_LIST:
        left = [e.strip().casefold() for e in produced.split(",") if e.strip()]
        right = [e.strip().casefold() for e in expected.split(",") if e.strip()]
        return left == right if ordered else Counter(left) == Counter(right)
    if spec.kind == KIND_NUMERIC:
        try:
            a, b = Decimal(produced.strip()), Decimal(expected.strip())
        except ArithmeticError:
            a = b = None
        except Exception:
            a = b = None
        if a is not None:
            if spec.decimals is not None:
                q = Decimal(10) ** -spec.decimals
                if a.quantize(q) == b.quantize(q):
                    return True
            tolerance = Decimal("1e-6") * max(Decimal(1), abs(a), abs(b))
            return abs(a - b) <= tolerance
    return produced.strip().casefold() == expected.strip().casefold()


class TestScoreAnswer:
    def test_list_is_order_insensitive_and_normalized(self):
        assert score_answer("a,b , c", "A, B, C", LIST_SPEC)

    def test_ordered_flag_enforces_sequence(self):
        assert not score_answer("b, a", "a, b", LIST_SPEC, ordered=True)
        assert score_answer("a, b", "a, b", LIST_SPEC, ordered=True)

    def test_duplicates_are_multiset_significant(self):
        assert not score_answer("a, a, b", "a, b", LIST_SPEC)
        assert score_answer("a, a, b", "b, a, a", LIST_SPEC)

    def test_not_applicable_is_case_insensitive(self):
        assert score_answer("not applicable", "Not Applicable", TEXT_SPEC)

    def test_numeric_tolerance(self):
        assert score_answer("0.50", "0.5", NUM_SPEC)
        # 2.5 apart at magnitude 1e6 exceeds the 1e-6 relative tolerance
        # and differs at 2 decimals.
        assert score_answer("1000000.0", "1000002.5", NUM_SPEC) is False
        assert score_answer("2.00001", "2.0", GuidelineSpec(kind=KIND_NUMERIC, decimals=6)) is False
        assert score_answer("2.0000000019", "2.0", NUM_SPEC)

    def test_agrees_with_oracle_on_generated_corpus(self):
        rng = random.Random(99)
        vocabulary = ["alpha", "Beta", "GAMMA", "delta", "5411", "x y"]
        checked = 0
        for _ in range(400):  # comma_list pairs
            left = rng.sample(vocabulary, rng.randint(0, 4))
            right = rng.sample(vocabulary, rng.randint(0, 4))
            if rng.random() < 0.5:
                right = [e.upper() + " " for e in left]
                rng.shuffle(right)
            produced, expected = ", ".join(left), ",".join(right)
            assert score_answer(produced, expected, LIST_SPEC) == oracle_score(
                produced, expected, LIST_SPEC
            )
            checked += 1
        for _ in range(300):  # numeric pairs
            base = rng.uniform(-1000, 1000)
            jitter = rng.choice([0.0, 1e-9, 1e-7, 0.01, 1.0])
            produced, expected = f"{base + jitter:.8f}", f"{base:.8f}"
            assert score_answer(produced, expected, NUM_SPEC) == oracle_score(
                produced, expected, NUM_SPEC
            ), (produced, expected)
            checked += 1
        for _ in range(300):  # scalar pairs
            word = rng.choice(vocabulary)
            produced = word if rng.random() < 0.5 else word.swapcase() + " "
            expected = rng.choice([word, word + "!"])
            assert score_answer(produced, expected, TEXT_SPEC) == oracle_score(
                produced, expected, TEXT_SPEC
            )
            checked += 1
        assert checked >= 1000


class TestBuildReport:
    def test_counts_partition_and_accuracy(self):
        tasks = [
            BenchmarkTask(task_id="e1", question="q", level="easy", expected_answer="a"),
            BenchmarkTask(task_id="e2", question="q", level="easy", expected_answer="a"),
            BenchmarkTask(task_id="h1", question="q", level="hard", expected_answer="a"),
            BenchmarkTask(task_id="h2", question="q", level="hard"),
            BenchmarkTask(task_id="h3", question="q", level="hard", expected_answer="a"),
        ]
        results = [
            TaskResult("e1", "a", True, None, 5, 2, "t"),
            TaskResult("e2", "b", False, None, 5, 2, "t"),
            TaskResult("h1", "a", True, None, 5, 2, "t"),
            TaskResult("h2", "whatever", None, None, 5, 2, "t"),
            TaskResult("h3", "", False, "CassetteMiss", 5, 0, "t"),
        ]
        report = build_report("fixture", tasks, results, "fp")
        assert report.counts == {"total": 5, "matched": 2, "failed": 1, "errored": 1, "unscored": 1}
        assert report.per_level["easy"] == 0.5
        assert report.per_level["hard"] == pytest.approx(1 / 3, abs=1e-6)
        assert report.overall_accuracy == 0.4

    def test_report_bytes_are_stable(self):
        tasks = [BenchmarkTask(task_id="t", question="q", expected_answer="a")]
        results = [TaskResult("t", "a", True, None, 1, 1, "x")]
        one = build_report("s", tasks, results, "fp").to_json_bytes()
        two = build_report("s", tasks, results, "fp").to_json_bytes()
        assert one == two


class TestSuiteRuns:
    def test_task_outcomes_are_independent_of_execution_order(self, tmp_path):
        import fixture_lib
        from dana.bench import run_suite

        catalog = fixture_lib.build_catalog(fixture_lib.E2E_ROOT)
        suite_path = fixture_lib.E2E_ROOT / "suite.jsonl"

        # A permuted copy of the committed suite must score task-for-task
        # the same.
        lines = suite_path.read_text().strip().splitlines()
        permuted = tmp_path / "suite.jsonl"  # same stem keeps the report name stable
        permuted.write_text("\n".join(reversed(lines)) + "\n")

        _, results_fwd = run_suite(
            suite_path, catalog, fixture_lib.bench_config(),
            cassette_path=fixture_lib.E2E_ROOT / "cassettes", out_dir=tmp_path / "fwd",
        )
        _, results_rev = run_suite(
            permuted, catalog, fixture_lib.bench_config(),
            cassette_path=fixture_lib.E2E_ROOT / "cassettes", out_dir=tmp_path / "rev",
        )
        view = lambda rs: {r.task_id: (r.produced_answer, r.match, r.failure_class) for r in rs}
        assert view(results_fwd) == view(results_rev)

    def test_one_missing_cassette_errors_only_that_task(self, tmp_path):
        import fixture_lib
        from dana.bench import run_suite

        catalog = fixture_lib.build_catalog(fixture_lib.E2E_ROOT)
        partial = tmp_path / "cassettes"
        partial.mkdir()
        for file in (fixture_lib.E2E_ROOT / "cassettes").iterdir():
            if not file.name.startswith("t3-"):
                (partial / file.name).write_bytes(file.read_bytes())

        report, results = run_suite(
            fixture_lib.E2E_ROOT / "suite.jsonl", catalog, fixture_lib.bench_config(),
            cassette_path=partial, out_dir=tmp_path / "out",
        )
        by_id = {r.task_id: r for r in results}
        assert by_id["t3-payment-count"].failure_class == "IoFailure"
        assert by_id["t1-average-amount"].match is True
        assert report.counts["errored"] == 1
        assert report.counts["total"] == 5

    def test_report_agrees_with_the_results_file(self, tmp_path):
        import fixture_lib
        from dana.bench import run_suite

        catalog = fixture_lib.build_catalog(fixture_lib.E2E_ROOT)
        report, _ = run_suite(
            fixture_lib.E2E_ROOT / "suite.jsonl", catalog, fixture_lib.bench_config(),
            cassette_path=fixture_lib.E2E_ROOT / "cassettes", out_dir=tmp_path,
        )
        rows = [json.loads(line) for line in (tmp_path / "results.jsonl").read_text().splitlines()]
        on_disk = json.loads((tmp_path / "report.json").read_text())
        matched = sum(1 for r in rows if r["match"] is True)
        assert on_disk["counts"]["matched"] == report.counts["matched"] == matched
        assert on_disk["overall_accuracy"] == round(matched / len(rows), 6)
