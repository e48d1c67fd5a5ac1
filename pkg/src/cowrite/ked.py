"""Knowledge-aware editing distance: costed edit plans from completion to reference.

A model is asked for the lazy editor's plan turning a completion into the
reference text, pricing each ADD/DELETE/MODIFY by the entities it touches
(complex 3, simple 1) plus a transitional-phrasing score (0..2). DELETE
carries no entity points; its whole cost is phrasing. The plan total is
always recomputed from the per-action costs, which are authoritative.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from .core import EvalQuery
from .errors import ResponseParseError
from .gateway import LLMGateway
from .judge import request_judgment
from .prompts import extract_boxed_json, load_template, render_template


class EditOperation(str, Enum):
    ADD = "ADD"
    DELETE = "DELETE"
    MODIFY = "MODIFY"


class EntityComplexity(str, Enum):
    SIMPLE = "simple"
    COMPLEX = "complex"


ENTITY_POINTS = {EntityComplexity.SIMPLE: 1, EntityComplexity.COMPLEX: 3}
MAX_PHRASING_SCORE = 2


@dataclass(frozen=True)
class EditAction:
    """One priced step of an edit plan.

    entity_breakdown and phrasing_score are optional detail: the output
    schema does not require them, but when present they must reproduce the
    reported cost (exactly when both are given, within phrasing slack when
    only the breakdown is).
    """

    operation: EditOperation
    instruction: str
    cost: int
    reasoning: str
    entity_breakdown: tuple[tuple[str, EntityComplexity], ...] | None = None
    phrasing_score: int | None = None

    def __post_init__(self) -> None:
        if not isinstance(self.cost, int) or isinstance(self.cost, bool) or self.cost < 0:
            raise ValueError(f"cost must be a non-negative integer: {self.cost!r}")
        if self.phrasing_score is not None and self.phrasing_score not in (0, 1, 2):
            raise ValueError(f"phrasing_score must be 0, 1, or 2: {self.phrasing_score!r}")
        if self.entity_breakdown is not None:
            points = self.entity_points
            if self.phrasing_score is not None:
                if self.cost != points + self.phrasing_score:
                    raise ValueError(
                        f"cost {self.cost} != entity points {points} + phrasing {self.phrasing_score}"
                    )
            elif not points <= self.cost <= points + MAX_PHRASING_SCORE:
                raise ValueError(
                    f"cost {self.cost} outside [{points}, {points + MAX_PHRASING_SCORE}] "
                    "implied by the entity breakdown"
                )

    @property
    def entity_points(self) -> int:
        """Entity cost share: zero for DELETE, 1 or 3 per entity otherwise."""
        if self.entity_breakdown is None or self.operation is EditOperation.DELETE:
            return 0
        return sum(ENTITY_POINTS[complexity] for _, complexity in self.entity_breakdown)


@dataclass(frozen=True)
class EditPlan:
    actions: tuple[EditAction, ...]
    total_editing_cost: int  # as reported by the model
    summary: str
    validated_total: int
    total_mismatch: bool

    def __post_init__(self) -> None:
        recomputed = sum(action.cost for action in self.actions)
        if self.validated_total != recomputed:
            raise ValueError(f"validated_total {self.validated_total} != action sum {recomputed}")
        if self.total_mismatch != (self.total_editing_cost != self.validated_total):
            raise ValueError("total_mismatch flag inconsistent with the totals")

    @classmethod
    def build(cls, actions: tuple[EditAction, ...], reported_total: int, summary: str) -> EditPlan:
        validated = sum(action.cost for action in actions)
        return cls(
            actions=actions,
            total_editing_cost=reported_total,
            summary=summary,
            validated_total=validated,
            total_mismatch=reported_total != validated,
        )


def render_ked_prompt(reference: str, completion: str) -> str:
    if not reference or not completion:
        raise ValueError("reference and completion must both be non-empty")
    return render_template(
        load_template("ked"), {"sentence_A": reference, "sentence_B": completion}
    )


def _parse_breakdown(value, raw: str) -> tuple[tuple[str, EntityComplexity], ...]:
    if not isinstance(value, list):
        raise ResponseParseError(f"entity_breakdown is not a list: {value!r}", raw)
    entries: list[tuple[str, EntityComplexity]] = []
    for item in value:
        if isinstance(item, dict) and "entity" in item and "complexity" in item:
            entity, complexity = item["entity"], item["complexity"]
        elif isinstance(item, (list, tuple)) and len(item) == 2:
            entity, complexity = item
        else:
            raise ResponseParseError(f"unusable entity_breakdown entry: {item!r}", raw)
        if not isinstance(complexity, str):
            raise ResponseParseError(f"entity complexity is not a string: {complexity!r}", raw)
        try:
            parsed = EntityComplexity(complexity.strip().lower())
        except ValueError:
            raise ResponseParseError(f"unknown entity complexity: {complexity!r}", raw) from None
        entries.append((str(entity), parsed))
    return tuple(entries)


def _require_int(value, label: str, raw: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ResponseParseError(f"{label} must be an integer: {value!r}", raw)
    if value < 0:
        raise ResponseParseError(f"{label} must be non-negative: {value!r}", raw)
    return value


def parse_edit_plan(response: str) -> EditPlan:
    """EditPlan from a raw model response, with every cost revalidated."""
    obj = extract_boxed_json(response)
    items = obj.get("edit_plan")
    if not isinstance(items, list):
        raise ResponseParseError('response lacks the "edit_plan" array', response)
    actions: list[EditAction] = []
    for item in items:
        if not isinstance(item, dict):
            raise ResponseParseError(f"edit_plan entry is not an object: {item!r}", response)
        operation_raw = item.get("operation")
        if not isinstance(operation_raw, str):
            raise ResponseParseError(f"operation is not a string: {operation_raw!r}", response)
        try:
            operation = EditOperation(operation_raw.strip().upper())
        except ValueError:
            raise ResponseParseError(f"unknown operation: {operation_raw!r}", response) from None
        cost = _require_int(item.get("cost"), "cost", response)
        breakdown = None
        if item.get("entity_breakdown") is not None:
            breakdown = _parse_breakdown(item["entity_breakdown"], response)
        phrasing = item.get("phrasing_score")
        if phrasing is not None:
            phrasing = _require_int(phrasing, "phrasing_score", response)
        try:
            actions.append(
                EditAction(
                    operation=operation,
                    instruction=str(item.get("instruction", "")),
                    cost=cost,
                    reasoning=str(item.get("reasoning", "")),
                    entity_breakdown=breakdown,
                    phrasing_score=phrasing,
                )
            )
        except ValueError as exc:
            raise ResponseParseError(str(exc), response) from None
    if "total_editing_cost" not in obj:
        raise ResponseParseError('response lacks "total_editing_cost"', response)
    reported = _require_int(obj["total_editing_cost"], "total_editing_cost", response)
    return EditPlan.build(tuple(actions), reported, str(obj.get("summary", "")))


def request_edit_plan(
    reference: str,
    completion: str,
    gateway: LLMGateway,
    *,
    model: str | None = None,
    temperature: float = 0.0,
    max_parse_retries: int = 2,
) -> tuple[EditPlan | None, str]:
    """Elicit and validate a plan; (None, last_raw) after parse exhaustion."""
    prompt = render_ked_prompt(reference, completion)
    return request_judgment(
        prompt,
        gateway,
        parse_edit_plan,
        model=model,
        temperature=temperature,
        max_parse_retries=max_parse_retries,
    )


def evaluate_ked(
    query: EvalQuery,
    completion: str,
    gateway: LLMGateway,
    *,
    model: str | None = None,
    temperature: float = 0.0,
    max_parse_retries: int = 2,
) -> int | None:
    """Validated total editing cost, or None when no plan could be parsed.

    None rows are flagged by callers and excluded from aggregates; the raw
    reported total is never returned.
    """
    plan, _ = request_edit_plan(
        query.reference,
        completion,
        gateway,
        model=model,
        temperature=temperature,
        max_parse_retries=max_parse_retries,
    )
    return None if plan is None else plan.validated_total
