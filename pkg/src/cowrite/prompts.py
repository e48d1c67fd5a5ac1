"""Prompt assets and boxed-JSON response parsing.

Templates ship as plain text with {context} / {sentence_A} / {sentence_B}
style placeholders. They contain literal JSON braces (including doubled
ones), so substitution is a single regex pass over known placeholder names,
never str.format. Model responses come back as a \\boxed{...} block wrapping
a JSON object; extraction tolerates the doubled-brace variant, a nested
object on its own line, trailing commas, and line comments.
"""

from __future__ import annotations

import json
import re
from functools import lru_cache
from importlib import resources

from .errors import ResponseParseError

TEMPLATE_NAMES = (
    "har",
    "ked",
    "logic",
    "style",
    "semantic",
    "holistic",
    "completion_l1",
    "completion_l2",
    "coherence_train",
    "semantic_train",
)

_PLACEHOLDER = re.compile(r"\{(context|sentence_A|sentence_B|reference|predicted)\}")


@lru_cache(maxsize=None)
def load_template(name: str) -> str:
    if name not in TEMPLATE_NAMES:
        raise ValueError(f"unknown template: {name!r}")
    path = resources.files("cowrite").joinpath("templates").joinpath(f"{name}.txt")
    return path.read_text(encoding="utf-8")


def render_template(template: str, values: dict[str, str]) -> str:
    """Substitute placeholders in one pass; unknown names in values are ignored."""

    def substitute(match: re.Match) -> str:
        key = match.group(1)
        if key not in values:
            raise KeyError(f"template needs a value for {{{key}}}")
        return values[key]

    return _PLACEHOLDER.sub(substitute, template)


def _balanced_span(text: str, open_idx: int) -> str | None:
    """The {...} span starting at open_idx, brace-balanced and string-aware."""
    depth = 0
    in_string = False
    escaped = False
    for i in range(open_idx, len(text)):
        ch = text[i]
        if in_string:
            if escaped:
                escaped = False
            elif ch == "\\":
                escaped = True
            elif ch == '"':
                in_string = False
        elif ch == '"':
            in_string = True
        elif ch == "{":
            depth += 1
        elif ch == "}":
            depth -= 1
            if depth == 0:
                return text[open_idx : i + 1]
    return None


def _strip_noise(span: str) -> str:
    """Drop // line comments and commas dangling before } or ], string-aware."""
    out: list[str] = []
    in_string = False
    escaped = False
    i = 0
    while i < len(span):
        ch = span[i]
        if in_string:
            out.append(ch)
            if escaped:
                escaped = False
            elif ch == "\\":
                escaped = True
            elif ch == '"':
                in_string = False
            i += 1
            continue
        if ch == '"':
            in_string = True
            out.append(ch)
            i += 1
            continue
        if span.startswith("//", i):
            while i < len(span) and span[i] != "\n":
                i += 1
            continue
        if ch == ",":
            j = i + 1
            while j < len(span) and (span[j] in " \t\r\n" or span.startswith("//", j)):
                if span.startswith("//", j):
                    while j < len(span) and span[j] != "\n":
                        j += 1
                else:
                    j += 1
            if j < len(span) and span[j] in "}]":
                i += 1  # dangling comma: skip it, keep the closer for later passes
                continue
        out.append(ch)
        i += 1
    return "".join(out)


def _try_object(span: str) -> dict | None:
    for candidate in (span, _strip_noise(span)):
        for variant in (candidate, candidate[1:-1] if len(candidate) >= 2 else ""):
            if not variant.strip():
                continue
            try:
                obj = json.loads(variant)
            except ValueError:
                continue
            if isinstance(obj, dict):
                return obj
    return None


def extract_boxed_json(response: str) -> dict:
    """The JSON object a judge response carries.

    Tries every \\boxed{...} block first, then any top-level {...} span in
    the raw text. Each candidate is parsed as-is, with noise stripped, and
    with one outer brace layer peeled (covers \\boxed{{...}} and a nested
    object on its own line).
    """
    spans: list[str] = []
    for match in re.finditer(r"\\boxed\s*\{", response):
        span = _balanced_span(response, match.end() - 1)
        if span is not None:
            spans.append(span)
    for span in spans:
        obj = _try_object(span)
        if obj is not None:
            return obj
    search_from = 0
    while True:
        idx = response.find("{", search_from)
        if idx < 0:
            break
        span = _balanced_span(response, idx)
        if span is not None:
            obj = _try_object(span)
            if obj is not None:
                return obj
        search_from = idx + 1
    raise ResponseParseError("no JSON object found in response", response)
