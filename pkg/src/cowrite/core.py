"""Document state machine for human-in-the-loop co-writing.

The document is modeled as an append-at-end text plus an append-only log of
interaction records. Every state change flows through a suggestion/feedback
pair: the assistant proposes text, the human accepts it, modifies it, or
rejects it. Free-form edits the user made between suggestions ride along on
the next record (deleted spans plus typed text), so replaying the log from the
initial text reproduces the document exactly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum, IntEnum
from typing import Iterable, Sequence

from .errors import DuplicateTransitionError


class ParadigmLevel(IntEnum):
    """Interaction paradigms, ordered by assistant involvement."""

    L0 = 0  # suggestions only on explicit demand
    L1 = 1  # idle-triggered, stateless context prompts
    L2 = 2  # idle-triggered, stateful snapshot prompts
    L3 = 3  # adaptive: stage-dependent strategy and idle thresholds


class FeedbackKind(str, Enum):
    ACCEPT = "accept"
    MODIFY = "modify"
    REJECT = "reject"


class Position(str, Enum):
    """Coarse location of an evaluation query inside its source article."""

    EARLY = "early"
    MIDDLE = "middle"
    LATE = "late"


class Category(str, Enum):
    SCIENTIFIC = "scientific"
    CREATIVE = "creative"


#: The sixteen writing domains an evaluation corpus may label queries with.
DOMAIN_LABELS: frozenset[str] = frozenset(
    {
        "Technique Report",
        "Paper Reading",
        "Survey Report",
        "Popular Science Article",
        "Principle Analysis",
        "Healthy News",
        "Wildlife",
        "Architecture & Hardware",
        "CS & Education",
        "Prose Poem Collection",
        "Short Fiction",
        "Culture",
        "Travel",
        "Psychology & Philosophy",
        "Miscellaneous Talks",
        "Tweet",
    }
)

SCIENTIFIC_DOMAINS: frozenset[str] = frozenset(
    {
        "Technique Report",
        "Paper Reading",
        "Survey Report",
        "Popular Science Article",
        "Principle Analysis",
    }
)


@dataclass(frozen=True)
class Suggestion:
    """One assistant proposal, always attached at the document end."""

    id: str
    content: str
    paradigm: ParadigmLevel
    prompt_hash: str
    created_at: int  # epoch ms

    def __post_init__(self) -> None:
        if not self.id:
            raise ValueError("suggestion id must be non-empty")
        if not self.content:
            raise ValueError("suggestion content must be non-empty")


@dataclass(frozen=True)
class UserFeedback:
    """The human decision on one suggestion."""

    kind: FeedbackKind
    decided_at: int  # epoch ms
    decision_ms: int  # exposure-to-decision latency
    final_text: str = ""  # what entered the document; modify only

    def __post_init__(self) -> None:
        if self.decision_ms < 0:
            raise ValueError("decision_ms must be >= 0")
        if self.kind is FeedbackKind.MODIFY and not self.final_text:
            raise ValueError("modify feedback requires non-empty final_text")
        if self.kind is not FeedbackKind.MODIFY and self.final_text:
            raise ValueError("final_text is only meaningful for modify feedback")


@dataclass(frozen=True)
class InteractionRecord:
    """One suggestion round plus the free edits that preceded it.

    deleted_spans and added_text describe what the user did between the
    previous record and this suggestion, in document order: deletions first
    (offsets valid against the then-current text, applied sequentially), then
    typed text appended at the end.
    """

    suggestion: Suggestion
    feedback: UserFeedback
    deleted_spans: tuple[tuple[int, str], ...] = ()
    added_text: str = ""


@dataclass(frozen=True)
class DocumentState:
    """Immutable document snapshot: text plus the full interaction log."""

    text: str
    log: tuple[InteractionRecord, ...] = ()
    created_at: int = 0  # epoch ms
    updated_at: int = 0

    @classmethod
    def new(cls, text: str = "", created_at: int = 0) -> "DocumentState":
        return cls(text=text, log=(), created_at=created_at, updated_at=created_at)


@dataclass(frozen=True)
class EvalQuery:
    """One evaluation unit: a context to continue and its gold reference."""

    id: str
    domain_tag: str
    category: Category
    article_id: str
    position: Position
    progress: float
    context: str
    reference: str

    def __post_init__(self) -> None:
        if not self.id:
            raise ValueError("query id must be non-empty")
        if self.domain_tag not in DOMAIN_LABELS:
            raise ValueError(f"unknown domain_tag: {self.domain_tag!r}")
        if not 0.0 <= self.progress <= 1.0:
            raise ValueError("progress must lie in [0, 1]")
        if not self.context:
            raise ValueError("query context must be non-empty")
        if not self.reference:
            raise ValueError("query reference must be non-empty")


def apply_deletions(text: str, spans: Sequence[tuple[int, str]]) -> str:
    """Apply deletion spans sequentially, verifying each against the text."""
    for offset, removed in spans:
        if offset < 0 or offset + len(removed) > len(text):
            raise ValueError(f"deletion span ({offset}, {removed!r}) out of range")
        if text[offset : offset + len(removed)] != removed:
            raise ValueError(f"deletion span ({offset}, {removed!r}) does not match document")
        text = text[:offset] + text[offset + len(removed) :]
    return text


def transition(
    state: DocumentState,
    suggestion: Suggestion,
    feedback: UserFeedback,
    *,
    deleted_spans: Sequence[tuple[int, str]] = (),
    added_text: str = "",
) -> DocumentState:
    """Fold one suggestion round into the document.

    The user's free edits since the previous record are applied first
    (deletions, then typed text at the end), then the feedback effect:
    accept appends suggestion.content, modify appends feedback.final_text,
    reject leaves the text unchanged. The log grows by exactly one record.
    """
    if any(rec.suggestion.id == suggestion.id for rec in state.log):
        raise DuplicateTransitionError(f"suggestion id {suggestion.id!r} already logged")

    text = apply_deletions(state.text, deleted_spans)
    text += added_text
    if feedback.kind is FeedbackKind.ACCEPT:
        text += suggestion.content
    elif feedback.kind is FeedbackKind.MODIFY:
        text += feedback.final_text

    record = InteractionRecord(
        suggestion=suggestion,
        feedback=feedback,
        deleted_spans=tuple(deleted_spans),
        added_text=added_text,
    )
    return DocumentState(
        text=text,
        log=state.log + (record,),
        created_at=state.created_at,
        updated_at=feedback.decided_at,
    )


def replay(initial_text: str, records: Iterable[InteractionRecord], created_at: int = 0) -> DocumentState:
    """Rebuild a document state by folding records over the initial text."""
    state = DocumentState.new(initial_text, created_at=created_at)
    for rec in records:
        state = transition(
            state,
            rec.suggestion,
            rec.feedback,
            deleted_spans=rec.deleted_spans,
            added_text=rec.added_text,
        )
    return state


# --- round snapshots -------------------------------------------------------
#
# A snapshot shows the current document with the latest round annotated:
#   <del>...</del>      text the user deleted
#   <accept>...</accept> previously suggested text the user kept
#   <reject>...</reject> previously suggested text the user discarded
#   <add>...</add>       text the user typed
# Stripping the tags (and dropping del/reject payloads, which are not part of
# the document) yields the current text exactly.

_Segment = tuple[str, str]  # (kind, text); kind: plain/del/accept/reject/add
_DOC_KINDS = frozenset({"plain", "accept", "add"})


def _carve(segments: list[_Segment], offset: int, removed: str) -> list[_Segment]:
    """Turn [offset, offset+len(removed)) of the document text into del segments.

    Offsets count only document-bearing segments (plain/accept/add); del and
    reject payloads are invisible to them. The carved text must equal
    `removed`.
    """
    end = offset + len(removed)
    out: list[_Segment] = []
    pos = 0
    carved: list[str] = []
    for kind, text in segments:
        if kind not in _DOC_KINDS:
            out.append((kind, text))
            continue
        seg_start, seg_end = pos, pos + len(text)
        pos = seg_end
        if seg_end <= offset or seg_start >= end:
            out.append((kind, text))
            continue
        cut_from = max(offset, seg_start) - seg_start
        cut_to = min(end, seg_end) - seg_start
        if cut_from > 0:
            out.append((kind, text[:cut_from]))
        carved.append(text[cut_from:cut_to])
        out.append(("del", text[cut_from:cut_to]))
        if cut_to < len(text):
            out.append((kind, text[cut_to:]))
    if "".join(carved) != removed:
        raise ValueError(f"deletion span ({offset}, {removed!r}) does not match document")
    return out


def _strip_suffix(text: str, suffix: str, what: str) -> str:
    if suffix and not text.endswith(suffix):
        raise ValueError(f"{what} is not a suffix of the document text")
    return text[: len(text) - len(suffix)] if suffix else text


def render_snapshot(
    state: DocumentState,
    pending_deletions: Sequence[tuple[int, str]] = (),
    pending_added: str = "",
) -> str:
    """Render the document with the latest round's edits annotated.

    The latest round is the last logged record (its free edits and feedback
    outcome) plus any still-uncommitted edits passed in. A document with no
    log and no pending edits renders as its raw text.
    """
    if state.log:
        rec = state.log[-1]
        fb = rec.feedback
        text = state.text
        if fb.kind is FeedbackKind.ACCEPT:
            text = _strip_suffix(text, rec.suggestion.content, "accepted content")
        elif fb.kind is FeedbackKind.MODIFY:
            text = _strip_suffix(text, fb.final_text, "modified content")
        text = _strip_suffix(text, rec.added_text, "typed text")
        # undo the record's deletions to recover the round's base text
        for offset, removed in reversed(rec.deleted_spans):
            text = text[:offset] + removed + text[offset:]

        segments: list[_Segment] = [("plain", text)] if text else []
        for offset, removed in rec.deleted_spans:
            segments = _carve(segments, offset, removed)
        if rec.added_text:
            segments.append(("add", rec.added_text))
        if fb.kind is FeedbackKind.ACCEPT:
            segments.append(("accept", rec.suggestion.content))
        elif fb.kind is FeedbackKind.REJECT:
            segments.append(("reject", rec.suggestion.content))
        else:
            segments.append(("reject", rec.suggestion.content))
            segments.append(("add", fb.final_text))
    else:
        segments = [("plain", state.text)] if state.text else []

    for offset, removed in pending_deletions:
        segments = _carve(segments, offset, removed)
    if pending_added:
        segments.append(("add", pending_added))

    if all(kind == "plain" for kind, _ in segments):
        return "".join(text for _, text in segments)
    parts = []
    for kind, text in segments:
        if kind == "plain":
            parts.append(text)
        else:
            parts.append(f"<{kind}>{text}</{kind}>")
    return "".join(parts)


# --- serialization ---------------------------------------------------------


def record_to_dict(rec: InteractionRecord) -> dict:
    return {
        "suggestion": {
            "id": rec.suggestion.id,
            "content": rec.suggestion.content,
            "paradigm": rec.suggestion.paradigm.name,
            "prompt_hash": rec.suggestion.prompt_hash,
            "created_at": rec.suggestion.created_at,
        },
        "feedback": {
            "kind": rec.feedback.kind.value,
            "decided_at": rec.feedback.decided_at,
            "decision_ms": rec.feedback.decision_ms,
            "final_text": rec.feedback.final_text,
        },
        "deleted_spans": [[offset, removed] for offset, removed in rec.deleted_spans],
        "added_text": rec.added_text,
    }


def record_from_dict(data: dict) -> InteractionRecord:
    sug = data["suggestion"]
    fb = data["feedback"]
    return InteractionRecord(
        suggestion=Suggestion(
            id=sug["id"],
            content=sug["content"],
            paradigm=ParadigmLevel[sug["paradigm"]],
            prompt_hash=sug["prompt_hash"],
            created_at=sug["created_at"],
        ),
        feedback=UserFeedback(
            kind=FeedbackKind(fb["kind"]),
            decided_at=fb["decided_at"],
            decision_ms=fb["decision_ms"],
            final_text=fb.get("final_text", ""),
        ),
        deleted_spans=tuple((span[0], span[1]) for span in data.get("deleted_spans", [])),
        added_text=data.get("added_text", ""),
    )


def write_event_log(path, initial_text: str, records: Iterable[InteractionRecord], created_at: int = 0) -> None:
    """Persist a transition log as line-delimited JSON (header + one line per record)."""
    with open(path, "w", encoding="utf-8") as fh:
        header = {"initial_text": initial_text, "created_at": created_at}
        fh.write(json.dumps(header, ensure_ascii=False) + "\n")
        for rec in records:
            fh.write(json.dumps(record_to_dict(rec), ensure_ascii=False) + "\n")


def read_event_log(path) -> DocumentState:
    """Replay a persisted transition log back into a document state."""
    with open(path, "r", encoding="utf-8") as fh:
        lines = [line for line in fh.read().splitlines() if line.strip()]
    header = json.loads(lines[0])
    records = [record_from_dict(json.loads(line)) for line in lines[1:]]
    return replay(header["initial_text"], records, created_at=header.get("created_at", 0))
