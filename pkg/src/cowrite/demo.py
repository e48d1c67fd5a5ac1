"""Bundled demonstration corpus and a fully scripted offline backend.

The toy corpus is twenty continuation queries over four contiguously
segmented articles, so stateful history synthesis reconstructs each query's
own context exactly. The scripted backend answers every completion,
checklist, and edit-cost request deterministically from the prompt text
alone: no network, reproducible bit for bit.
"""

from __future__ import annotations

import hashlib
import json
from importlib import resources
from typing import Iterable, Sequence

from .core import EvalQuery
from .errors import TransportError, UnscriptedRequestError
from .gateway import MockBackend
from .harness import load_queries

#: Query ids the scripted checklist judge accepts: 7 of 20, so the bundled
#: corpus lands at exactly 35.0% acceptance.
TOY_PLANTED_ACCEPTS: frozenset[str] = frozenset(
    {"a1q2", "a1q4", "a2q1", "a2q5", "a3q3", "a4q1", "a4q4"}
)


def toy_corpus_path():
    """Traversable for the bundled twenty-query corpus."""
    return resources.files("cowrite").joinpath("data").joinpath("toy_corpus.jsonl")


def load_toy_corpus() -> list[EvalQuery]:
    with resources.as_file(toy_corpus_path()) as path:
        return load_queries(path)


def _boxed(obj: dict) -> str:
    return "\\boxed{" + json.dumps(obj, ensure_ascii=False) + "}"


def _accept_response() -> str:
    return _boxed(
        {
            "accept": True,
            "triggered_condition": "17. Comprehensive judgment",
            "reasoning": "scripted verdict: planted accept",
        }
    )


def _reject_response() -> str:
    return _boxed(
        {
            "accept": False,
            "triggered_condition": "17. Comprehensive judgment",
            "reasoning": "scripted verdict: planted reject",
        }
    )


def toy_ked_cost(query_id: str) -> int:
    """Deterministic per-query edit cost in [0, 4]."""
    return sum(query_id.encode()) % 5


def _ked_response(query_id: str) -> str:
    cost = toy_ked_cost(query_id)
    return _boxed(
        {
            "edit_plan": [
                {
                    "operation": "MODIFY",
                    "instruction": f"scripted revision for {query_id}",
                    "cost": cost,
                    "reasoning": "scripted edit plan",
                }
            ],
            "total_editing_cost": cost,
            "summary": "scripted edit plan",
        }
    )


def scripted_toy_backend(
    *,
    planted_accepts: Iterable[str] | None = None,
    fail_judging: Iterable[str] = (),
    corpus: Sequence[EvalQuery] | None = None,
) -> MockBackend:
    """Strict mock backend scripted for batch runs over the toy corpus.

    Completion prompts get a short deterministic continuation; checklist
    prompts accept exactly the planted query ids; edit-cost prompts return a
    one-action plan with a per-query cost. Queries listed in fail_judging
    raise a transport error from the checklist judge, exercising the
    flagging path. Judge scripts identify the query by the gold reference
    quoted in the prompt, so they work under both stateless and stateful
    completion paradigms.
    """
    queries = list(corpus) if corpus is not None else load_toy_corpus()
    planted = (
        TOY_PLANTED_ACCEPTS if planted_accepts is None else frozenset(planted_accepts)
    )
    failing = frozenset(fail_judging)
    by_quoted_reference = {
        f'<REFERENCE>: "{query.reference}"': query for query in queries
    }

    def query_for(prompt: str) -> EvalQuery:
        for quoted, query in by_quoted_reference.items():
            if quoted in prompt:
                return query
        raise UnscriptedRequestError("no corpus reference quoted in judge prompt")

    def complete(prompt: str) -> str:
        digest = hashlib.sha256(prompt.encode("utf-8")).hexdigest()[:8]
        return f"A drafted continuation for block {digest}."

    def decide(prompt: str) -> str:
        query = query_for(prompt)
        if query.id in failing:
            raise TransportError(f"scripted transport failure for {query.id}")
        return _accept_response() if query.id in planted else _reject_response()

    def plan_edits(prompt: str) -> str:
        return _ked_response(query_for(prompt).id)

    mock = MockBackend(strict=True)
    mock.script("Decision Criteria (Checklist)", decide)
    mock.script("Cost Assessment Rules of Action", plan_edits)
    mock.script("Lingxi", complete)  # stateful completion system prompt
    mock.script("CONTEXT:", complete)  # stateless completion prompts
    return mock
