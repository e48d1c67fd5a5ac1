"""Acceptance judges: the layered checklist and four single-dimension baselines.

The checklist judge renders a 17-rule decision prompt (optionally truncated
to its first one or two layers), asks the gateway for a boxed-JSON verdict,
and parses it. A deterministic fast path can short-circuit the model call
for the four rules that pure text analysis can decide. Baseline judges wrap
the logic / style / semantic / holistic comparison prompts and, where the
template states an arithmetic rule, recompute it rather than trusting the
model's own total.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, replace
from decimal import ROUND_HALF_UP, Decimal
from enum import Enum
from functools import lru_cache
from typing import Callable, TypeVar

from .core import EvalQuery
from .errors import ResponseParseError
from .gateway import LLMGateway
from .prompts import extract_boxed_json, load_template, render_template
from .textstats import (
    check_closure,
    early_overlap_ratio,
    prefix_repetition_ratio,
    tokenize,
)


class RuleLayer(str, Enum):
    L1_INTERACTION = "L1_interaction"
    L2_SURFACE = "L2_surface"
    L3_SEMANTIC = "L3_semantic"


class RuleAction(str, Enum):
    REJECT = "reject"
    ACCEPT = "accept"
    COMPREHENSIVE = "comprehensive"


class JudgeKind(str, Enum):
    HAR = "har"
    LOGIC = "logic"
    STYLE = "style"
    SEMANTIC = "semantic"
    HOLISTIC = "holistic"


LAYER_ORDER = (RuleLayer.L1_INTERACTION, RuleLayer.L2_SURFACE, RuleLayer.L3_SEMANTIC)


@dataclass(frozen=True)
class RuleSpec:
    number: int
    name: str
    layer: RuleLayer
    action_on_trigger: RuleAction


def _rule(number: int, name: str, layer: RuleLayer, action: RuleAction = RuleAction.REJECT) -> RuleSpec:
    return RuleSpec(number, name, layer, action)


RULES: tuple[RuleSpec, ...] = (
    _rule(1, "Start repetition", RuleLayer.L1_INTERACTION),
    _rule(2, "Language mismatch", RuleLayer.L1_INTERACTION),
    _rule(3, "Semantic coherence", RuleLayer.L1_INTERACTION),
    _rule(4, "Early semantic overlap with <REFERENCE>", RuleLayer.L1_INTERACTION, RuleAction.ACCEPT),
    _rule(5, "Paired punctuation mark closure", RuleLayer.L1_INTERACTION),
    _rule(6, "Markdown/LaTeX/Code closure", RuleLayer.L1_INTERACTION),
    _rule(7, "Format mismatch", RuleLayer.L2_SURFACE),
    _rule(8, "Format consistency with preceding text", RuleLayer.L2_SURFACE),
    _rule(9, "Depth mismatch", RuleLayer.L2_SURFACE),
    _rule(10, "Style/Register mismatch", RuleLayer.L2_SURFACE),
    _rule(11, "Sentence type mismatch", RuleLayer.L2_SURFACE),
    _rule(12, "Personal perspective check", RuleLayer.L2_SURFACE),
    _rule(13, "Subset acceptance (lists/tables)", RuleLayer.L3_SEMANTIC, RuleAction.ACCEPT),
    _rule(14, "Topic divergence", RuleLayer.L3_SEMANTIC),
    _rule(15, "Key entities", RuleLayer.L3_SEMANTIC),
    _rule(16, "Intent mismatch", RuleLayer.L3_SEMANTIC),
    _rule(17, "Comprehensive judgment", RuleLayer.L3_SEMANTIC, RuleAction.COMPREHENSIVE),
)


@dataclass(frozen=True)
class ChecklistConfig:
    """Which checklist layers to render, and how to query the judge model."""

    included_layers: tuple[RuleLayer, ...] = LAYER_ORDER
    judge_model: str | None = None
    temperature: float = 0.0
    max_parse_retries: int = 2
    fast_path: bool = False

    def __post_init__(self) -> None:
        layers = tuple(self.included_layers)
        if layers != LAYER_ORDER[: len(layers)] or not layers:
            raise ValueError("included_layers must be a non-empty prefix of (L1, L2, L3)")
        object.__setattr__(self, "included_layers", layers)
        if self.max_parse_retries < 0:
            raise ValueError("max_parse_retries must be >= 0")


def checklist_config(depth: int, **overrides) -> ChecklistConfig:
    """Config covering the first depth layers (1, 2, or 3)."""
    return ChecklistConfig(included_layers=LAYER_ORDER[:depth], **overrides)


def included_rules(config: ChecklistConfig) -> tuple[RuleSpec, ...]:
    """Rules the config keeps, renumbered contiguously, comprehensive last."""
    kept = [
        rule
        for rule in RULES
        if rule.layer in config.included_layers and rule.action_on_trigger != RuleAction.COMPREHENSIVE
    ]
    comprehensive = RULES[-1]
    renumbered = [replace(rule, number=i + 1) for i, rule in enumerate(kept)]
    renumbered.append(replace(comprehensive, number=len(renumbered) + 1))
    return tuple(renumbered)


# --- checklist template ----------------------------------------------------

_RULE_LINE = re.compile(r"^(\d+)\. \*\*(.+?):\*\* ")


@dataclass(frozen=True)
class _ChecklistTemplate:
    header_lines: tuple[str, ...]
    rule_lines: tuple[str, ...]  # rule_lines[i] belongs to RULES[i]
    footer_lines: tuple[str, ...]


@lru_cache(maxsize=1)
def _checklist_template() -> _ChecklistTemplate:
    lines = load_template("har").split("\n")
    rule_rows = [(i, _RULE_LINE.match(line)) for i, line in enumerate(lines) if _RULE_LINE.match(line)]
    if len(rule_rows) != len(RULES):
        raise ValueError(f"checklist asset lists {len(rule_rows)} rules, expected {len(RULES)}")
    first = rule_rows[0][0]
    for offset, (index, match) in enumerate(rule_rows):
        rule = RULES[offset]
        if index != first + offset:
            raise ValueError("checklist asset rules are not contiguous lines")
        if int(match.group(1)) != rule.number or match.group(2) != rule.name:
            raise ValueError(
                f"checklist asset rule {match.group(1)} ({match.group(2)!r}) "
                f"does not match the rule table entry {rule.number} ({rule.name!r})"
            )
    last = rule_rows[-1][0]
    return _ChecklistTemplate(
        header_lines=tuple(lines[:first]),
        rule_lines=tuple(lines[first : last + 1]),
        footer_lines=tuple(lines[last + 1 :]),
    )


def render_har_prompt(query: EvalQuery, completion: str, config: ChecklistConfig) -> str:
    """The checklist prompt for (context, reference, completion) under config.

    The full config reproduces the template asset byte-exact apart from the
    placeholder substitutions; truncated configs keep only the included
    layers' rule lines, renumbered from 1, with the comprehensive rule last.
    """
    template = _checklist_template()
    rendered_rules = []
    for rule in included_rules(config):
        original = next(r for r in RULES if r.name == rule.name)
        line = template.rule_lines[original.number - 1]
        rendered_rules.append(re.sub(r"^\d+", str(rule.number), line, count=1))
    body = "\n".join([*template.header_lines, *rendered_rules, *template.footer_lines])
    return render_template(
        body,
        {"context": query.context, "sentence_A": query.reference, "sentence_B": completion},
    )


# --- verdicts --------------------------------------------------------------


@dataclass(frozen=True)
class Verdict:
    """One judge decision, traceable back to the raw model response."""

    accept: bool
    triggered_condition: str
    reasoning: str
    raw_response: str
    judge: JudgeKind
    scores: dict[str, float] | None = None
    fast_path: bool = False
    flagged: bool = False


def _coerce_accept(obj: dict, raw: str) -> bool:
    if "accept" not in obj:
        raise ResponseParseError('verdict object lacks the required "accept" field', raw)
    value = obj["accept"]
    if isinstance(value, bool):
        return value
    if isinstance(value, str) and value.strip().lower() in ("true", "false"):
        return value.strip().lower() == "true"
    raise ResponseParseError(f'"accept" is not a boolean: {value!r}', raw)


def parse_boxed_verdict(response: str) -> Verdict:
    """Checklist-shaped verdict from a raw judge response."""
    obj = extract_boxed_json(response)
    return Verdict(
        accept=_coerce_accept(obj, response),
        triggered_condition=str(obj.get("triggered_condition", "")),
        reasoning=str(obj.get("reasoning", "")),
        raw_response=response,
        judge=JudgeKind.HAR,
    )


_Parsed = TypeVar("_Parsed")


def request_judgment(
    prompt: str,
    gateway: LLMGateway,
    parse: Callable[[str], _Parsed],
    *,
    model: str | None = None,
    temperature: float = 0.0,
    max_parse_retries: int = 2,
) -> tuple[_Parsed | None, str]:
    """Submit prompt, parse; on parse/schema failure retry with a reminder.

    Each retry appends a numbered format reminder, so retried requests are
    new cache entries rather than replays of the malformed response.
    Returns (verdict, raw) on success and (None, last_raw) on exhaustion.
    """
    raw = ""
    for attempt in range(max_parse_retries + 1):
        content = prompt
        if attempt:
            content += (
                f"\n\nFormat reminder (attempt {attempt + 1}): respond with exactly one "
                "\\boxed{...} block containing the JSON object described above, and nothing else."
            )
        raw = gateway.complete(
            [{"role": "user", "content": content}], model=model, temperature=temperature
        )
        try:
            return parse(raw), raw
        except ResponseParseError:
            continue
    return None, raw


def _parse_failure(judge: JudgeKind, raw: str) -> Verdict:
    return Verdict(
        accept=False,
        triggered_condition="parse_error",
        reasoning="no parseable verdict after format retries; rejected conservatively",
        raw_response=raw,
        judge=judge,
        flagged=True,
    )


# --- deterministic fast path ----------------------------------------------


def fast_path_verdict(query: EvalQuery, completion: str) -> Verdict | None:
    """Decide rules 1, 4, 5, 6 from text analysis alone, in checklist order.

    Returns None when no deterministic rule fires; closure rules only count
    openers the user introduced in the context, since the completion cannot
    be blamed for leaving its own fresh openers unclosed mid-thought.
    """
    context, reference = query.context, query.reference
    if tokenize(completion):
        if prefix_repetition_ratio(context, completion) >= 0.5:
            return _fast_verdict(RULES[0], accept=False)
        if early_overlap_ratio(completion, reference) > 0.5:
            return _fast_verdict(RULES[3], accept=True)
    report = check_closure(context, completion)
    context_len = len(context)
    if any(position < context_len for _, position in report.unclosed_pairs):
        return _fast_verdict(RULES[4], accept=False)
    if any(position < context_len for _, position in report.unclosed_fences):
        return _fast_verdict(RULES[5], accept=False)
    return None


def _fast_verdict(rule: RuleSpec, accept: bool) -> Verdict:
    return Verdict(
        accept=accept,
        triggered_condition=f"{rule.number}. {rule.name}",
        reasoning=f"deterministic pre-check fired rule {rule.number} ({rule.name})",
        raw_response="",
        judge=JudgeKind.HAR,
        fast_path=True,
    )


# --- the checklist judge ---------------------------------------------------


def judge_har(
    query: EvalQuery, completion: str, config: ChecklistConfig, gateway: LLMGateway
) -> Verdict:
    """Accept or reject completion against the checklist.

    With config.fast_path on, deterministic rules may answer without any
    gateway traffic. Parse exhaustion rejects conservatively and flags the
    verdict; transport failures propagate as gateway errors.
    """
    if config.fast_path:
        short_circuit = fast_path_verdict(query, completion)
        if short_circuit is not None:
            return short_circuit
    prompt = render_har_prompt(query, completion, config)
    verdict, raw = request_judgment(
        prompt,
        gateway,
        parse_boxed_verdict,
        model=config.judge_model,
        temperature=config.temperature,
        max_parse_retries=config.max_parse_retries,
    )
    if verdict is None:
        return _parse_failure(JudgeKind.HAR, raw)
    return verdict


# --- baseline judges -------------------------------------------------------


@dataclass(frozen=True)
class BaselineThresholds:
    """Accept cutoffs for score-valued baselines; surfaced in every report."""

    style: float = 8.0
    semantic: int = 8


STYLE_WEIGHTS = (Decimal("0.25"), Decimal("0.25"), Decimal("0.30"), Decimal("0.20"))
_STYLE_DIMENSIONS = ("lexical_style", "syntactic_structure", "linguistic_features", "genre_features")


def style_overall(scores: tuple[float, float, float, float]) -> float:
    """Weighted style similarity, rounded half-up to one decimal."""
    weighted = sum(
        (Decimal(str(score)) * weight for score, weight in zip(scores, STYLE_WEIGHTS)),
        Decimal(0),
    )
    return float(weighted.quantize(Decimal("0.1"), rounding=ROUND_HALF_UP))


def _require_score(value, label: str, low: int, high: int, raw: str, *, integral: bool = False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ResponseParseError(f"{label} is not a number: {value!r}", raw)
    if integral and float(value) != int(value):
        raise ResponseParseError(f"{label} must be an integer: {value!r}", raw)
    if not low <= float(value) <= high:
        raise ResponseParseError(f"{label} out of range [{low}, {high}]: {value!r}", raw)
    return int(value) if integral else float(value)


def render_baseline_prompt(kind: JudgeKind, query: EvalQuery, completion: str) -> str:
    if kind is JudgeKind.HAR:
        raise ValueError("checklist prompts are rendered by render_har_prompt")
    return render_template(
        load_template(kind.value), {"sentence_A": query.reference, "sentence_B": completion}
    )


def _parse_logic(raw: str) -> Verdict:
    obj = extract_boxed_json(raw)
    compare = obj.get("logicalCompare")
    if not isinstance(compare, str) or compare.strip().upper() not in ("A", "B"):
        raise ResponseParseError(f'logicalCompare must be "A" or "B": {compare!r}', raw)
    compare = compare.strip().upper()
    scores: dict[str, float] = {}
    for key, name in (("Preference_logic", "preference_logic"), ("Prediction_logic", "prediction_logic")):
        if key in obj:
            scores[name] = _require_score(obj[key], key, 1, 7, raw, integral=True)
    return Verdict(
        accept=compare == "A",
        triggered_condition=f"logicalCompare={compare}",
        reasoning="backbone logic categories match" if compare == "A" else "backbone logic categories differ",
        raw_response=raw,
        judge=JudgeKind.LOGIC,
        scores=scores or None,
    )


def _parse_style(raw: str, threshold: float) -> Verdict:
    obj = extract_boxed_json(raw)
    analysis = obj.get("analysis")
    if not isinstance(analysis, dict):
        raise ResponseParseError('style verdict lacks the "analysis" object', raw)
    subs: list[float] = []
    for i, dimension in enumerate(_STYLE_DIMENSIONS, start=1):
        section = analysis.get(dimension)
        if not isinstance(section, dict) or f"score{i}" not in section:
            raise ResponseParseError(f"style verdict lacks {dimension}.score{i}", raw)
        subs.append(_require_score(section[f"score{i}"], f"score{i}", 1, 10, raw))
    overall = style_overall(tuple(subs))
    reported = obj.get("styleSimilarity_overall")
    if isinstance(reported, (int, float)) and not isinstance(reported, bool):
        deviation = abs(Decimal(str(reported)) - Decimal(str(overall)))
        if deviation > Decimal("0.05"):
            raise ResponseParseError(
                f"reported overall {reported} deviates from recomputed {overall} by {deviation}", raw
            )
    scores = {f"score{i}": value for i, value in enumerate(subs, start=1)}
    scores["overall"] = overall
    return Verdict(
        accept=overall >= threshold,
        triggered_condition=f"styleSimilarity_overall={overall:.1f}",
        reasoning=str(obj.get("conclusion", "")),
        raw_response=raw,
        judge=JudgeKind.STYLE,
        scores=scores,
    )


def _parse_semantic(raw: str, threshold: int) -> Verdict:
    obj = extract_boxed_json(raw)
    if "semanticSimilarity_score" not in obj:
        raise ResponseParseError('semantic verdict lacks "semanticSimilarity_score"', raw)
    score = _require_score(obj["semanticSimilarity_score"], "semanticSimilarity_score", 0, 10, raw, integral=True)
    return Verdict(
        accept=score >= threshold,
        triggered_condition=f"semanticSimilarity_score={score}",
        reasoning=str(obj.get("reason", "")),
        raw_response=raw,
        judge=JudgeKind.SEMANTIC,
        scores={"semanticSimilarity_score": float(score)},
    )


def _parse_holistic(raw: str) -> Verdict:
    obj = extract_boxed_json(raw)
    accept = _coerce_accept(obj, raw)
    scores: dict[str, float] = {}
    similarities = obj.get("similarities")
    if isinstance(similarities, list):
        for entry in similarities:
            if not isinstance(entry, dict):
                continue
            for key, value in entry.items():
                if re.fullmatch(r"score\d", key):
                    scores[key] = _require_score(value, key, 1, 10, raw)
    return Verdict(
        accept=accept,
        triggered_condition="holistic judgment",
        reasoning=str(obj.get("overall_reasoning", "")),
        raw_response=raw,
        judge=JudgeKind.HOLISTIC,
        scores=scores or None,
    )


def judge_baseline(
    kind: JudgeKind,
    query: EvalQuery,
    completion: str,
    gateway: LLMGateway,
    thresholds: BaselineThresholds = BaselineThresholds(),
    *,
    model: str | None = None,
    temperature: float = 0.0,
    max_parse_retries: int = 2,
) -> Verdict:
    """One single-dimension or holistic accept decision for completion."""
    parsers: dict[JudgeKind, Callable[[str], Verdict]] = {
        JudgeKind.LOGIC: _parse_logic,
        JudgeKind.STYLE: lambda raw: _parse_style(raw, thresholds.style),
        JudgeKind.SEMANTIC: lambda raw: _parse_semantic(raw, thresholds.semantic),
        JudgeKind.HOLISTIC: _parse_holistic,
    }
    if kind not in parsers:
        raise ValueError(f"judge_baseline does not handle {kind!r}")
    prompt = render_baseline_prompt(kind, query, completion)
    verdict, raw = request_judgment(
        prompt,
        gateway,
        parsers[kind],
        model=model,
        temperature=temperature,
        max_parse_retries=max_parse_retries,
    )
    if verdict is None:
        return _parse_failure(kind, raw)
    return verdict
