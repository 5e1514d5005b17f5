"""The committed 5-task replay corpus: data, SOPs, suite, and cassettes.

Cassettes are generated by actually running the pipeline in record mode
against scripted model replies, then replayed by the test suite. Run
``python3 tests/fixture_lib.py`` to regenerate after changing prompts,
profiling, or the scenarios below.
"""

from __future__ import annotations

import json
import shutil
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

from helpers import (  # noqa: E402
    SequenceProvider,
    error_result,
    exec_code_reply,
    exec_final_reply,
    goal_reply,
    grounding_reply,
    ok_result,
    plan_reply,
)

from dana.belief import UserQuery  # noqa: E402
from dana.config import RunConfig  # noqa: E402
from dana.executor import ExecutorLimits  # noqa: E402
from dana.gateway import Cassette, Gateway  # noqa: E402
from dana.metadata import MetadataCatalog, ProfileConfig, create_metadata, discover_sources  # noqa: E402
from dana.pipeline import run_query  # noqa: E402
from dana.sandboxclient import ScriptedSandbox  # noqa: E402
from dana.trace import TraceWriter  # noqa: E402

E2E_ROOT = Path(__file__).parent / "fixtures" / "e2e"

LIST_FORMAT_GUIDELINE = (
    "Answer must be a list of values in comma-separated list, eg: A, B, C. "
    "If the answer is an empty list, reply with an empty string. "
    "If a question does not have a relevant or applicable answer for the task, "
    "please respond with 'Not Applicable'."
)

DATA_FILES = {
    "payments.csv": (
        "payment_id,merchant,category,amount_eur\n"
        "p1,Alpha Books,Books,12.50\n"
        "p2,Beta Games,Games,20.00\n"
        "p3,Alpha Books,Books,5.00\n"
    ),
    "merchants.csv": (
        "merchant,city\n"
        "Alpha Books,Lisbon\n"
        "Beta Games,Porto\n"
    ),
}

SOP_FILES = {
    "fee-rules.md": (
        "# Fee rules\n"
        "\n"
        "All amounts are recorded in euros. The most expensive category is the one\n"
        "with the highest single transaction amount.\n"
        "\n"
        "When a value is missing, treat the row as not applicable. An empty list\n"
        "must be reported as an empty string.\n"
    ),
}

SOP_QUOTE = "All amounts are recorded in euros."

SUITE = [
    {
        "task_id": "t1-average-amount",
        "question": "What is the average transaction amount in euros?",
        "guideline": "Answer must be a single number rounded to 2 decimal places.",
        "level": "easy",
        "answer": "12.50",
        "data_refs": ["payments.csv"],
    },
    {
        "task_id": "t2-distinct-categories",
        "question": "List the distinct product categories in the payments data.",
        "guideline": LIST_FORMAT_GUIDELINE,
        "level": "easy",
        "answer": "Games, Books",
        "data_refs": ["payments.csv"],
    },
    {
        "task_id": "t3-payment-count",
        "question": "How many payments were recorded in total?",
        "level": "hard",
        "answer": "3",
        "data_refs": ["payments.csv"],
    },
    {
        "task_id": "t4-fee-anomaly",
        "question": "Which merchant shows a fee anomaly according to the rules?",
        "level": "hard",
        "answer": "Not Applicable",
        "data_refs": ["payments.csv", "merchants.csv"],
    },
    {
        "task_id": "t5-top-city",
        "question": "Which city hosts the most merchants?",
        "level": "hard",
        "answer": "Porto",
        "data_refs": ["merchants.csv"],
    },
]

# Scripted model replies and sandbox results per task. t3 exercises the
# error-then-repair path; t4 never completes and exhausts the iteration
# budget; t5 answers wrong on purpose so the report has a failed stratum.
SCENARIOS = {
    "t1-average-amount": {
        "replies": [
            goal_reply(
                understanding="Compute the mean of amount_eur over payments.csv.",
                entities="average, transaction amount, euros",
                approach="Load payments.csv and average the amount column.",
                constraints="Round to 2 decimal places.",
            ),
            grounding_reply([SOP_QUOTE], "Average amount_eur directly; euros need no conversion."),
            plan_reply(["load payments.csv and compute the mean", "report the rounded mean"]),
            exec_code_reply(
                "import csv\nrows=list(csv.DictReader(open('payments.csv')))\n"
                "print(sum(float(r['amount_eur']) for r in rows)/len(rows))",
                task_id=1,
            ),
            exec_final_reply(12.5, task_id=2, reasoning="mean of 12.50, 20.00, 5.00 is 12.50"),
        ],
        "sandbox": [ok_result(stdout="12.5\n", value_repr=None)],
    },
    "t2-distinct-categories": {
        "replies": [
            goal_reply(
                understanding="Enumerate distinct category values in payments.csv.",
                entities="categories, payments",
                approach="Collect the unique values of the category column.",
                constraints="Comma-separated list output.",
            ),
            grounding_reply([SOP_QUOTE], "Read the category column and deduplicate."),
            plan_reply(["load payments.csv and collect distinct categories", "format the list"]),
            exec_code_reply(
                "import csv\nprint(sorted({r['category'] for r in csv.DictReader(open('payments.csv'))}))",
                task_id=1,
            ),
            exec_final_reply(["Books", "Games"], task_id=2, reasoning="two categories appear"),
        ],
        "sandbox": [ok_result(stdout="['Books', 'Games']\n")],
    },
    "t3-payment-count": {
        "replies": [
            goal_reply(
                understanding="Count the rows of payments.csv.",
                entities="payments, count",
                approach="Load the table and count records.",
                constraints="(none stated)",
            ),
            grounding_reply([SOP_QUOTE], "A plain row count satisfies the rules."),
            plan_reply(["count the payment rows", "report the count"]),
            exec_code_reply("print(len(rows))", task_id=1, reasoning="count the loaded rows"),
            exec_code_reply(
                "import csv\nrows=list(csv.DictReader(open('payments.csv')))\nprint(len(rows))",
                task_id=1,
                reasoning="rows was undefined; load the file first",
            ),
            exec_final_reply("3", task_id=2, reasoning="three payment rows"),
        ],
        "sandbox": [
            error_result("NameError: name 'rows' is not defined"),
            ok_result(stdout="3\n"),
        ],
    },
    "t4-fee-anomaly": {
        "replies": [
            goal_reply(
                understanding="Find a merchant whose fees break the SOP rules.",
                entities="merchant, fee anomaly",
                approach="Inspect fees merchant by merchant.",
                constraints="Anomaly definition comes from the SOP.",
            ),
            grounding_reply([SOP_QUOTE], "Compare each merchant's rows against the fee rules."),
            plan_reply(["scan merchants for rule violations", "report the anomalous merchant"]),
            exec_code_reply("inspect_chunk(0)", task_id=1, reasoning="scan part 0"),
            exec_code_reply("inspect_chunk(1)", task_id=1, reasoning="scan part 1"),
            exec_code_reply("inspect_chunk(2)", task_id=1, reasoning="scan part 2"),
            exec_code_reply("inspect_chunk(3)", task_id=1, reasoning="scan part 3"),
        ],
        "sandbox": [
            ok_result(stdout="nothing unusual in part 0\n"),
            ok_result(stdout="nothing unusual in part 1\n"),
            ok_result(stdout="nothing unusual in part 2\n"),
            ok_result(stdout="nothing unusual in part 3\n"),
        ],
    },
    "t5-top-city": {
        "replies": [
            goal_reply(
                understanding="Find the city with the most merchants.",
                entities="city, merchants",
                approach="Group merchants.csv by city and take the max.",
                constraints="(none stated)",
            ),
            grounding_reply([SOP_QUOTE], "Count merchants per city."),
            plan_reply(["group merchants by city", "report the top city"]),
            exec_code_reply(
                "import csv,collections\n"
                "print(collections.Counter(r['city'] for r in csv.DictReader(open('merchants.csv'))))",
                task_id=1,
            ),
            exec_final_reply("Lisbon", task_id=2, reasoning="Lisbon appeared first in the counter"),
        ],
        "sandbox": [ok_result(stdout="Counter({'Lisbon': 1, 'Porto': 1})\n")],
    },
}

# One task never completes, so the suite budget must match the number of
# scripted executor replies there.
BENCH_LIMITS = ExecutorLimits(max_iterations=4)


def bench_config(catalog_path: str = "") -> RunConfig:
    return RunConfig(model_id="fixture", limits=BENCH_LIMITS, catalog_path=catalog_path)


def write_corpus(root: Path) -> None:
    (root / "data").mkdir(parents=True, exist_ok=True)
    (root / "sops").mkdir(parents=True, exist_ok=True)
    for name, text in DATA_FILES.items():
        (root / "data" / name).write_text(text, encoding="utf-8")
    for name, text in SOP_FILES.items():
        (root / "sops" / name).write_text(text, encoding="utf-8")
    with (root / "suite.jsonl").open("w", encoding="utf-8") as handle:
        for record in SUITE:
            handle.write(json.dumps(record) + "\n")


def build_catalog(root: Path) -> MetadataCatalog:
    return create_metadata(
        discover_sources(root / "data"),
        sorted(str(p) for p in (root / "sops").iterdir()),
        ProfileConfig(),
    )


def generate_cassettes(root: Path, scratch: Path) -> None:
    catalog = build_catalog(root)
    cassette_dir = root / "cassettes"
    if cassette_dir.exists():
        shutil.rmtree(cassette_dir)
    cassette_dir.mkdir(parents=True)

    for record in SUITE:
        task_id = record["task_id"]
        scenario = SCENARIOS[task_id]
        sandbox_results = scenario["sandbox"]

        with (cassette_dir / f"{task_id}.sandbox.jsonl").open("w", encoding="utf-8") as handle:
            for result in sandbox_results:
                handle.write(json.dumps(result.to_dict()) + "\n")

        gateway = Gateway(
            provider=SequenceProvider(list(scenario["replies"])),
            cassette=Cassette(cassette_dir / f"{task_id}.chat.jsonl", mode="record"),
        )
        run = run_query(
            UserQuery(text=record["question"], guideline=record.get("guideline")),
            catalog,
            bench_config(),
            gateway,
            ScriptedSandbox(list(sandbox_results)),
            TraceWriter(scratch / f"{task_id}.trace.jsonl", run_id=f"gen-{task_id}"),
        )
        print(f"  {task_id}: {run.context.final_status} -> {run.response.answer_text!r}")


def main() -> int:
    root = E2E_ROOT
    scratch = root / "_gen_scratch"
    print(f"regenerating fixtures under {root}")
    write_corpus(root)
    scratch.mkdir(parents=True, exist_ok=True)
    try:
        generate_cassettes(root, scratch)
    finally:
        shutil.rmtree(scratch, ignore_errors=True)
    print("done")
    return 0


if __name__ == "__main__":
    sys.exit(main())
