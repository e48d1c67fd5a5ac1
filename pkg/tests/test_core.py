"""Document state machine: transitions, snapshots, serialization."""

from __future__ import annotations

import re

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cowrite import core
from cowrite.core import (
    DocumentState,
    FeedbackKind,
    InteractionRecord,
    ParadigmLevel,
    Suggestion,
    UserFeedback,
)
from cowrite.errors import DuplicateTransitionError


def make_suggestion(content="foo", sid="s1", paradigm=ParadigmLevel.L1):
    return Suggestion(id=sid, content=content, paradigm=paradigm, prompt_hash="h" * 8, created_at=1000)


def feedback(kind, final_text="", at=2000):
    return UserFeedback(kind=kind, decided_at=at, decision_ms=500, final_text=final_text)


def strip_snapshot(snapshot: str) -> str:
    """Independent tag stripper: drop del/reject payloads, unwrap the rest."""
    out = re.sub(r"<(del|reject)>.*?</\1>", "", snapshot, flags=re.S)
    return re.sub(r"</?(accept|add)>", "", out)


# --- transition ------------------------------------------------------------


def test_accept_appends_content():
    state = DocumentState.new("Hello ")
    new = core.transition(state, make_suggestion("world"), feedback(FeedbackKind.ACCEPT))
    assert new.text == "Hello world"
    assert len(new.log) == 1
    assert new.updated_at == 2000


def test_modify_appends_final_text():
    state = DocumentState.new("Hello ")
    new = core.transition(
        state, make_suggestion("world"), feedback(FeedbackKind.MODIFY, final_text="there")
    )
    assert new.text == "Hello there"
    assert new.log[-1].suggestion.content == "world"


def test_reject_leaves_text():
    state = DocumentState.new("Hello")
    new = core.transition(state, make_suggestion("junk"), feedback(FeedbackKind.REJECT))
    assert new.text == "Hello"
    assert len(new.log) == 1


def test_transition_is_pure():
    state = DocumentState.new("base")
    core.transition(state, make_suggestion("x"), feedback(FeedbackKind.ACCEPT))
    assert state.text == "base"
    assert state.log == ()


def test_duplicate_suggestion_id_rejected():
    state = DocumentState.new("")
    state = core.transition(state, make_suggestion("a", sid="dup"), feedback(FeedbackKind.ACCEPT))
    with pytest.raises(DuplicateTransitionError):
        core.transition(state, make_suggestion("b", sid="dup"), feedback(FeedbackKind.REJECT))


def test_free_edits_apply_before_feedback():
    state = DocumentState.new("one two three")
    new = core.transition(
        state,
        make_suggestion(" four"),
        feedback(FeedbackKind.ACCEPT),
        deleted_spans=((4, "two "),),
        added_text=" extra",
    )
    assert new.text == "one three extra four"


def test_bad_deletion_span_rejected():
    state = DocumentState.new("short")
    with pytest.raises(ValueError):
        core.transition(
            state,
            make_suggestion("x"),
            feedback(FeedbackKind.ACCEPT),
            deleted_spans=((0, "nomatch"),),
        )


def test_feedback_validation():
    with pytest.raises(ValueError):
        UserFeedback(kind=FeedbackKind.MODIFY, decided_at=0, decision_ms=0, final_text="")
    with pytest.raises(ValueError):
        UserFeedback(kind=FeedbackKind.ACCEPT, decided_at=0, decision_ms=0, final_text="oops")
    with pytest.raises(ValueError):
        UserFeedback(kind=FeedbackKind.ACCEPT, decided_at=0, decision_ms=-1)


def test_suggestion_validation():
    with pytest.raises(ValueError):
        Suggestion(id="", content="x", paradigm=ParadigmLevel.L1, prompt_hash="h", created_at=0)
    with pytest.raises(ValueError):
        Suggestion(id="s", content="", paradigm=ParadigmLevel.L1, prompt_hash="h", created_at=0)


def test_paradigm_ordering():
    assert ParadigmLevel.L0 < ParadigmLevel.L1 < ParadigmLevel.L2 < ParadigmLevel.L3


# --- replay ----------------------------------------------------------------


def test_replay_reproduces_text():
    state = DocumentState.new("start.", created_at=100)
    state = core.transition(state, make_suggestion(" a", sid="s1"), feedback(FeedbackKind.ACCEPT))
    state = core.transition(state, make_suggestion(" b", sid="s2"), feedback(FeedbackKind.REJECT))
    state = core.transition(
        state,
        make_suggestion(" c", sid="s3"),
        feedback(FeedbackKind.MODIFY, final_text=" c'"),
        deleted_spans=((0, "start"),),
        added_text=" typed",
    )
    rebuilt = core.replay("start.", state.log, created_at=100)
    assert rebuilt.text == state.text
    assert rebuilt.log == state.log


@given(
    st.lists(
        st.tuples(
            st.sampled_from([FeedbackKind.ACCEPT, FeedbackKind.MODIFY, FeedbackKind.REJECT]),
            st.text(alphabet="abc ", min_size=1, max_size=5),
        ),
        max_size=6,
    )
)
@settings(max_examples=50, deadline=None)
def test_replay_identity_property(rounds):
    state = DocumentState.new("seed ")
    for i, (kind, content) in enumerate(rounds):
        fb = feedback(kind, final_text=content + "!" if kind is FeedbackKind.MODIFY else "")
        state = core.transition(state, make_suggestion(content, sid=f"s{i}"), fb)
    rebuilt = core.replay("seed ", state.log)
    assert rebuilt.text == state.text


# --- snapshots -------------------------------------------------------------


def test_snapshot_plain_document():
    state = DocumentState.new("just text")
    assert core.render_snapshot(state) == "just text"


def test_snapshot_accept_annotation():
    state = DocumentState.new("Hello ")
    state = core.transition(state, make_suggestion("foo"), feedback(FeedbackKind.ACCEPT))
    snapshot = core.render_snapshot(state)
    assert snapshot == "Hello <accept>foo</accept>"


def test_snapshot_reject_annotation():
    state = DocumentState.new("Hello")
    state = core.transition(state, make_suggestion(" foo"), feedback(FeedbackKind.REJECT))
    assert core.render_snapshot(state) == "Hello<reject> foo</reject>"


def test_snapshot_modify_shows_reject_then_add():
    state = DocumentState.new("Hello ")
    state = core.transition(
        state, make_suggestion("foo"), feedback(FeedbackKind.MODIFY, final_text="bar")
    )
    assert core.render_snapshot(state) == "Hello <reject>foo</reject><add>bar</add>"


def test_snapshot_deletion_and_typed_text():
    # hand-built replay: delete "bar" from the base, type "baz", reject a suggestion
    state = DocumentState.new("foo bar qux")
    state = core.transition(
        state,
        make_suggestion(" tail"),
        feedback(FeedbackKind.REJECT),
        deleted_spans=((4, "bar "),),
        added_text=" baz",
    )
    snapshot = core.render_snapshot(state)
    assert snapshot == "foo <del>bar </del>qux<add> baz</add><reject> tail</reject>"
    # del precedes add in document order
    assert snapshot.index("<del>") < snapshot.index("<add>")


def test_snapshot_pending_edits_without_new_record():
    state = DocumentState.new("alpha beta")
    snapshot = core.render_snapshot(state, pending_deletions=((0, "alpha "),), pending_added=" gamma")
    assert snapshot == "<del>alpha </del>beta<add> gamma</add>"


def test_snapshot_pending_deletion_carves_accepted_text():
    state = DocumentState.new("doc ")
    state = core.transition(state, make_suggestion("accepted"), feedback(FeedbackKind.ACCEPT))
    snapshot = core.render_snapshot(state, pending_deletions=((4, "acc"),))
    assert "<del>acc</del>" in snapshot
    assert "<accept>epted</accept>" in snapshot


def test_snapshot_strip_round_trip():
    state = DocumentState.new("foo bar qux")
    state = core.transition(
        state,
        make_suggestion(" tail"),
        feedback(FeedbackKind.MODIFY, final_text=" edited"),
        deleted_spans=((0, "foo "),),
        added_text=" typed",
    )
    assert strip_snapshot(core.render_snapshot(state)) == state.text


@given(
    st.sampled_from([FeedbackKind.ACCEPT, FeedbackKind.MODIFY, FeedbackKind.REJECT]),
    st.text(alphabet="ab ", min_size=1, max_size=8),
    st.text(alphabet="cd ", max_size=6),
)
@settings(max_examples=60, deadline=None)
def test_snapshot_strip_round_trip_property(kind, content, typed):
    state = DocumentState.new("base text here")
    fb = feedback(kind, final_text="final" if kind is FeedbackKind.MODIFY else "")
    state = core.transition(
        state,
        make_suggestion(content),
        fb,
        deleted_spans=((5, "text "),),
        added_text=typed,
    )
    assert strip_snapshot(core.render_snapshot(state)) == state.text


def test_snapshot_only_four_tags_used():
    state = DocumentState.new("a b c")
    state = core.transition(
        state,
        make_suggestion(" s"),
        feedback(FeedbackKind.MODIFY, final_text=" f"),
        deleted_spans=((0, "a "),),
        added_text=" t",
    )
    snapshot = core.render_snapshot(state)
    tags = set(re.findall(r"</?([a-z]+)>", snapshot))
    assert tags <= {"del", "accept", "reject", "add"}


# --- event log serialization ----------------------------------------------


def test_event_log_round_trip(tmp_path):
    state = DocumentState.new("init ", created_at=42)
    state = core.transition(state, make_suggestion("one", sid="a"), feedback(FeedbackKind.ACCEPT))
    state = core.transition(
        state,
        make_suggestion("two", sid="b"),
        feedback(FeedbackKind.MODIFY, final_text="2"),
        deleted_spans=((0, "i"),),
        added_text="!",
    )
    path = tmp_path / "log.jsonl"
    core.write_event_log(path, "init ", state.log, created_at=42)
    rebuilt = core.read_event_log(path)
    assert rebuilt.text == state.text
    assert rebuilt.log == state.log
    assert rebuilt.created_at == 42


def test_event_log_one_line_per_record(tmp_path):
    state = DocumentState.new("x")
    state = core.transition(state, make_suggestion("y"), feedback(FeedbackKind.ACCEPT))
    path = tmp_path / "log.jsonl"
    core.write_event_log(path, "x", state.log)
    lines = path.read_text(encoding="utf-8").strip().splitlines()
    assert len(lines) == 1 + len(state.log)


def test_eval_query_validation():
    good = dict(
        id="q1",
        domain_tag="Short Fiction",
        category=core.Category.CREATIVE,
        article_id="a1",
        position=core.Position.EARLY,
        progress=0.1,
        context="ctx",
        reference="ref",
    )
    core.EvalQuery(**good)
    with pytest.raises(ValueError):
        core.EvalQuery(**{**good, "domain_tag": "Nonexistent"})
    with pytest.raises(ValueError):
        core.EvalQuery(**{**good, "progress": 1.5})
    with pytest.raises(ValueError):
        core.EvalQuery(**{**good, "context": ""})
