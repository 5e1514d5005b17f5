"""Guideline parsing, answer formatting, and finalize contracts."""

import pytest

from dana.answering import (
    KIND_COMMA_LIST,
    KIND_FREE_TEXT,
    KIND_NUMERIC,
    GuidelineSpec,
    FinalResponse,
    finalize,
    format_answer,
    parse_answer,
    parse_guideline,
    validate_answer,
)
from dana.belief import UserQuery
from dana.errors import FormatMismatch
from dana.planning import init_context, parse_plan_reply
from dana.state import FAILURE_BUDGET, IterationRecord, ToolInvocation
from helpers import plan_reply

LIST_FORMAT_GUIDELINE = (
    "Answer must be a list of values in comma-separated list, eg: A, B, C. "
    "If the answer is an empty list, reply with an empty string. "
    "If a question does not have a relevant or applicable answer for the task, "
    "please respond with 'Not Applicable'."
)


class TestParseGuideline:
    def test_list_guideline_maps_to_comma_list_with_tokens(self):
        spec = parse_guideline(LIST_FORMAT_GUIDELINE)
        assert spec.kind == KIND_COMMA_LIST
        assert spec.empty_list_token == ""
        assert spec.not_applicable_token == "Not Applicable"

    def test_absent_guideline_is_free_text(self):
        assert parse_guideline(None).kind == KIND_FREE_TEXT
        assert parse_guideline("  ").kind == KIND_FREE_TEXT

    def test_decimal_places_keyword(self):
        spec = parse_guideline("Round the result to 2 decimal places.")
        assert spec.kind == KIND_NUMERIC
        assert spec.decimals == 2

    def test_ambiguous_text_degrades_to_free_text_with_note(self):
        spec = parse_guideline("Please answer thoughtfully.")
        assert spec.kind == KIND_FREE_TEXT
        assert spec.note


class TestFormatAnswer:
    def test_three_element_list(self):
        assert format_answer(["A", "B", "C"], GuidelineSpec(kind=KIND_COMMA_LIST)) == "A, B, C"

    def test_empty_list_renders_the_empty_token(self):
        assert format_answer([], GuidelineSpec(kind=KIND_COMMA_LIST)) == ""

    def test_single_element_list_renders_bare_value(self):
        assert format_answer(["5411"], GuidelineSpec(kind=KIND_COMMA_LIST)) == "5411"

    def test_scalar_for_list_spec_is_a_mismatch(self):
        with pytest.raises(FormatMismatch):
            format_answer("not a list", GuidelineSpec(kind=KIND_COMMA_LIST))

    def test_numeric_fixed_decimals(self):
        spec = GuidelineSpec(kind=KIND_NUMERIC, decimals=2)
        assert format_answer(12.5, spec) == "12.50"
        assert format_answer("0.5", spec) == "0.50"

    def test_numeric_garbage_is_a_mismatch(self):
        with pytest.raises(FormatMismatch):
            format_answer("twelve", GuidelineSpec(kind=KIND_NUMERIC, decimals=1))

    def test_none_and_na_strings_map_to_the_token(self):
        spec = GuidelineSpec(kind=KIND_COMMA_LIST)
        assert format_answer(None, spec) == "Not Applicable"
        assert format_answer("not applicable", spec) == "Not Applicable"

    def test_formatting_idempotence_for_lists_and_scalars(self):
        list_spec = GuidelineSpec(kind=KIND_COMMA_LIST)
        for raw in (["A", "B", "C"], ["one"], []):
            once = format_answer(raw, list_spec)
            again = format_answer(parse_answer(once, list_spec), list_spec)
            assert once == again
        scalar_spec = GuidelineSpec(kind="scalar")
        once = format_answer("42", scalar_spec)
        assert format_answer(parse_answer(once, scalar_spec), scalar_spec) == once


class TestValidator:
    def test_accepts_what_format_produces(self):
        spec = GuidelineSpec(kind=KIND_COMMA_LIST)
        for raw in (["A", "B"], [], ["only"]):
            assert validate_answer(format_answer(raw, spec), spec)

    def test_rejects_ragged_spacing(self):
        assert not validate_answer("A,B", GuidelineSpec(kind=KIND_COMMA_LIST))
        assert not validate_answer("A,  B", GuidelineSpec(kind=KIND_COMMA_LIST))

    def test_numeric_decimal_count(self):
        spec = GuidelineSpec(kind=KIND_NUMERIC, decimals=2)
        assert validate_answer("3.14", spec)
        assert not validate_answer("3.1", spec)


def _terminal_context(answer, status="completed", failure=None):
    context = init_context(parse_plan_reply(plan_reply(["only task"])))
    if answer is not None:
        context.append_record(
            IterationRecord(
                invocation=ToolInvocation(iteration=1, kind="final_answer", answer=answer),
                result=None,
                plan_status="completed",
                reasoning="computed from the table",
            )
        )
    context.final_status = status
    context.failure_reason = failure
    return context


QUERY = UserQuery(text="list the categories")


class TestFinalize:
    def test_completed_single_element(self):
        response = finalize(_terminal_context(["A"]), QUERY, GuidelineSpec(kind=KIND_COMMA_LIST))
        assert isinstance(response, FinalResponse)
        assert response.answer_text == "A"
        assert response.task_echo == QUERY.text
        assert "computed from the table" in response.supporting_summary

    def test_budget_exhaustion_yields_not_applicable(self):
        context = _terminal_context(None, status="failed", failure=FAILURE_BUDGET)
        response = finalize(context, QUERY, GuidelineSpec(kind=KIND_COMMA_LIST))
        assert response.answer_text == "Not Applicable"
        assert FAILURE_BUDGET in response.supporting_summary

    def test_format_mismatch_is_flagged_with_raw_preserved(self):
        context = _terminal_context({"unexpected": "shape"})
        response = finalize(context, QUERY, GuidelineSpec(kind=KIND_COMMA_LIST))
        assert response.answer_text == "Not Applicable"
        assert "FORMAT MISMATCH" in response.supporting_summary
        assert "unexpected" in response.supporting_summary

    def test_completed_without_payload_is_not_applicable(self):
        response = finalize(_terminal_context(None), QUERY, GuidelineSpec(kind=KIND_FREE_TEXT))
        assert response.answer_text == "Not Applicable"

    def test_non_terminal_context_is_rejected(self):
        context = init_context(parse_plan_reply(plan_reply(["t"])))
        with pytest.raises(ValueError):
            finalize(context, QUERY, GuidelineSpec())
