"""Assistant-side session engine: when to intervene, how, and with what.

A Session owns the committed document plus the current round's free edits
(deletions and typed text that arrived since the last suggestion round).
Policy objects decide intervention timing and completion strategy per
paradigm: on-demand only (L0), stateless proactive (L1), stateful proactive
(L2), and the adaptive controller (L3) that switches both strategy and idle
threshold as the estimated writing stage advances.
"""

from __future__ import annotations

import hashlib
import math
import time
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

from .core import (
    DocumentState,
    ParadigmLevel,
    Suggestion,
    UserFeedback,
    apply_deletions,
    render_snapshot,
    transition,
)
from .errors import EmptySuggestionError, GatewayError, StaleFeedbackError
from .gateway import LLMGateway, cache_key
from .prompts import load_template
from .textstats import tokenize


class Stage(str, Enum):
    EARLY = "early"
    MIDDLE = "middle"
    LATE = "late"


class StageBasis(str, Enum):
    HEURISTIC = "heuristic"
    MODEL = "model"


class Strategy(str, Enum):
    STATELESS = "stateless"
    STATEFUL = "stateful"


_STAGE_RANK = {Stage.EARLY: 0, Stage.MIDDLE: 1, Stage.LATE: 2}
EARLY_BOUNDARY = 1 / 3
LATE_BOUNDARY = 2 / 3


def stage_for_progress(progress: float) -> Stage:
    if progress < EARLY_BOUNDARY:
        return Stage.EARLY
    if progress < LATE_BOUNDARY:
        return Stage.MIDDLE
    return Stage.LATE


@dataclass(frozen=True)
class StageEstimate:
    stage: Stage
    progress: float
    basis: StageBasis

    def __post_init__(self) -> None:
        if not 0.0 <= self.progress <= 1.0:
            raise ValueError("progress must lie in [0, 1]")
        if self.basis is StageBasis.HEURISTIC and self.stage is not stage_for_progress(self.progress):
            raise ValueError("heuristic estimates must respect the 1/3 and 2/3 boundaries")


@dataclass(frozen=True)
class IdlePolicy:
    """Pause durations that trigger a proactive suggestion.

    L1/L2 use the flat base threshold; L3 applies the per-stage values,
    which must not increase as writing progresses (intervene sooner the
    closer the document is to done).
    """

    base_threshold_s: float = 2.0
    early_s: float = 3.0
    middle_s: float = 2.0
    late_s: float = 1.5

    def __post_init__(self) -> None:
        for label, value in (
            ("base_threshold_s", self.base_threshold_s),
            ("early_s", self.early_s),
            ("middle_s", self.middle_s),
            ("late_s", self.late_s),
        ):
            if value <= 0:
                raise ValueError(f"{label} must be positive")
        if not self.early_s >= self.middle_s >= self.late_s:
            raise ValueError("stage thresholds must be non-increasing early >= middle >= late")

    def for_stage(self, stage: Stage) -> float:
        return {Stage.EARLY: self.early_s, Stage.MIDDLE: self.middle_s, Stage.LATE: self.late_s}[stage]


@dataclass(frozen=True)
class StrategyPolicy:
    """When the adaptive paradigm trades stateless context for full history."""

    switch_stage: Stage = Stage.MIDDLE

    def __post_init__(self) -> None:
        if self.switch_stage is Stage.EARLY:
            raise ValueError("switch_stage must be middle or late")


DEFAULT_TYPICAL_PARAGRAPHS = 12


def _count_paragraphs(text: str) -> int:
    return sum(1 for block in text.split("\n\n") if block.strip())


def _heuristic_progress(text: str, target_length: int | None, typical_paragraphs: int) -> float:
    if target_length is not None:
        if target_length <= 0:
            raise ValueError("target_length must be positive")
        return min(1.0, len(tokenize(text)) / target_length)
    return min(1.0, _count_paragraphs(text) / typical_paragraphs)


def estimate_stage(
    state: DocumentState,
    target_length: int | None = None,
    *,
    typical_paragraphs: int = DEFAULT_TYPICAL_PARAGRAPHS,
) -> StageEstimate:
    """Where the draft stands: token ratio when a target is known, else
    paragraph count against a typical article length."""
    progress = _heuristic_progress(state.text, target_length, typical_paragraphs)
    return StageEstimate(stage_for_progress(progress), progress, StageBasis.HEURISTIC)


_STAGE_PROMPT = (
    "You will see a document draft. Classify how far along the writing is. "
    "Answer with exactly one word: early, middle, or late.\n\nDRAFT:\n"
)


def estimate_stage_with_model(
    state: DocumentState,
    gateway: LLMGateway,
    target_length: int | None = None,
    *,
    model: str | None = None,
    typical_paragraphs: int = DEFAULT_TYPICAL_PARAGRAPHS,
) -> StageEstimate:
    """One-word model classification; any failure falls back to the heuristic."""
    heuristic = estimate_stage(state, target_length, typical_paragraphs=typical_paragraphs)
    try:
        raw = gateway.complete(
            [{"role": "user", "content": _STAGE_PROMPT + state.text}],
            model=model,
            temperature=0.0,
        )
    except GatewayError:
        return heuristic
    word = raw.strip().strip(".").lower()
    try:
        stage = Stage(word)
    except ValueError:
        return heuristic
    return StageEstimate(stage, heuristic.progress, StageBasis.MODEL)


def select_strategy(
    stage: StageEstimate, policy: StrategyPolicy, paradigm: ParadigmLevel
) -> Strategy:
    """The completion mode a paradigm uses at this stage."""
    if paradigm is ParadigmLevel.L2:
        return Strategy.STATEFUL
    if paradigm is ParadigmLevel.L3:
        if _STAGE_RANK[stage.stage] >= _STAGE_RANK[policy.switch_stage]:
            return Strategy.STATEFUL
        return Strategy.STATELESS
    return Strategy.STATELESS  # L0 and L1


def idle_threshold(stage: StageEstimate, policy: IdlePolicy, paradigm: ParadigmLevel) -> float:
    """Seconds of pause before a proactive suggestion; inf means never."""
    if paradigm is ParadigmLevel.L0:
        return math.inf
    if paradigm is ParadigmLevel.L3:
        return policy.for_stage(stage.stage)
    return policy.base_threshold_s


@dataclass(frozen=True)
class InterventionPlan:
    stage: StageEstimate
    strategy: Strategy
    idle_threshold_s: float


def propose(
    state: DocumentState,
    strategy: Strategy,
    gateway: LLMGateway,
    *,
    paradigm: ParadigmLevel | None = None,
    pending_deletions: Sequence[tuple[int, str]] = (),
    pending_added: str = "",
    model: str | None = None,
    temperature: float = 0.0,
    now: int | None = None,
) -> Suggestion:
    """One completion proposal for the current document.

    Stateless mode sends the live text after a CONTEXT: marker; stateful
    mode sends the annotated snapshot carrying the last round's decisions
    and this round's pending edits. The suggestion id is derived from the
    prompt digest, log length, and timestamp, so replays are reproducible.
    """
    live = apply_deletions(state.text, pending_deletions) + pending_added
    if strategy is Strategy.STATEFUL:
        if not live:
            raise ValueError("stateful proposals need a non-empty document")
        system = load_template("completion_l2")
        user = render_snapshot(state, tuple(pending_deletions), pending_added)
        fallback_paradigm = ParadigmLevel.L2
    else:
        system = load_template("completion_l1")
        user = "CONTEXT:\n" + live
        fallback_paradigm = ParadigmLevel.L1
    messages = [
        {"role": "system", "content": system},
        {"role": "user", "content": user},
    ]
    effective_model = model if model is not None else gateway.config.model
    digest = cache_key(effective_model, temperature, messages)
    content = gateway.complete(messages, model=model, temperature=temperature)
    if not content.strip():
        raise EmptySuggestionError("completion backend returned empty text")
    created = now if now is not None else int(time.time() * 1000)
    suggestion_id = hashlib.sha256(f"{digest}:{len(state.log)}:{created}".encode()).hexdigest()[:16]
    return Suggestion(
        id=suggestion_id,
        content=content,
        paradigm=paradigm if paradigm is not None else fallback_paradigm,
        prompt_hash=digest,
        created_at=created,
    )


class Session:
    """One live co-writing session (single writer).

    Committed history lives in an immutable DocumentState; free edits since
    the last round accumulate in pending_deletions (offsets against the
    committed text, applied in order) and pending_added (typed at the end).
    Feedback on the pending suggestion folds everything into the next
    committed state via the core transition.
    """

    def __init__(
        self,
        paradigm: ParadigmLevel,
        initial_text: str = "",
        *,
        idle_policy: IdlePolicy | None = None,
        strategy_policy: StrategyPolicy | None = None,
        target_length: int | None = None,
        created_at: int = 0,
    ):
        self.paradigm = paradigm
        self.state = DocumentState.new(initial_text, created_at=created_at)
        self.idle_policy = idle_policy if idle_policy is not None else IdlePolicy()
        self.strategy_policy = strategy_policy if strategy_policy is not None else StrategyPolicy()
        self.target_length = target_length
        self.pending_suggestion: Suggestion | None = None
        self.pending_deletions: list[tuple[int, str]] = []
        self.pending_added: str = ""

    @property
    def base_text(self) -> str:
        """Committed text with this round's deletions already applied."""
        return apply_deletions(self.state.text, self.pending_deletions)

    @property
    def live_text(self) -> str:
        return self.base_text + self.pending_added

    def snapshot(self) -> str:
        return render_snapshot(self.state, tuple(self.pending_deletions), self.pending_added)

    def stage(self) -> StageEstimate:
        progress = _heuristic_progress(self.live_text, self.target_length, DEFAULT_TYPICAL_PARAGRAPHS)
        return StageEstimate(stage_for_progress(progress), progress, StageBasis.HEURISTIC)

    def plan(self) -> InterventionPlan:
        estimate = self.stage()
        return InterventionPlan(
            stage=estimate,
            strategy=select_strategy(estimate, self.strategy_policy, self.paradigm),
            idle_threshold_s=idle_threshold(estimate, self.idle_policy, self.paradigm),
        )

    def record_typed_text(self, text: str) -> None:
        if text:
            self.pending_added += text

    def record_deletion(self, offset: int, removed: str) -> None:
        """Register a user deletion given in live-document coordinates."""
        if not removed:
            return
        live = self.live_text
        if offset < 0 or offset + len(removed) > len(live):
            raise ValueError(f"deletion span ({offset}, {removed!r}) out of range")
        if live[offset : offset + len(removed)] != removed:
            raise ValueError(f"deletion span ({offset}, {removed!r}) does not match the document")
        base_len = len(live) - len(self.pending_added)
        base_take = max(0, min(len(removed), base_len - offset))
        if base_take:
            self.pending_deletions.append((offset, removed[:base_take]))
        if base_take < len(removed):
            start = max(offset, base_len) - base_len
            length = len(removed) - base_take
            self.pending_added = self.pending_added[:start] + self.pending_added[start + length :]

    def propose(
        self,
        gateway: LLMGateway,
        *,
        model: str | None = None,
        temperature: float = 0.0,
        now: int | None = None,
    ) -> Suggestion:
        if self.pending_suggestion is not None:
            raise ValueError("a suggestion is already pending")
        strategy = select_strategy(self.stage(), self.strategy_policy, self.paradigm)
        suggestion = propose(
            self.state,
            strategy,
            gateway,
            paradigm=self.paradigm,
            pending_deletions=tuple(self.pending_deletions),
            pending_added=self.pending_added,
            model=model,
            temperature=temperature,
            now=now,
        )
        self.pending_suggestion = suggestion
        return suggestion

    def handle_feedback(self, suggestion: Suggestion, feedback: UserFeedback) -> DocumentState:
        """Fold the round into committed state; only the pending proposal counts."""
        pending = self.pending_suggestion
        if pending is None or pending.id != suggestion.id:
            raise StaleFeedbackError(
                f"suggestion {suggestion.id!r} is not the pending proposal"
            )
        self.state = transition(
            self.state,
            suggestion,
            feedback,
            deleted_spans=tuple(self.pending_deletions),
            added_text=self.pending_added,
        )
        self.pending_suggestion = None
        self.pending_deletions = []
        self.pending_added = ""
        return self.state
