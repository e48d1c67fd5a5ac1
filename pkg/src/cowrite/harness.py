"""Batch evaluation over continuation-query corpora.

Loads line-delimited query files, generates a completion for every query
under the L1 or L2 paradigm, scores each completion against its gold
reference (checklist verdict, edit-cost estimate, deterministic text
metrics), and folds the records into split-level reports with agreement and
correlation statistics. Records and RL-style rewards serialize as
line-delimited JSON.
"""

from __future__ import annotations

import json
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

from .core import (
    Category,
    DocumentState,
    EvalQuery,
    FeedbackKind,
    ParadigmLevel,
    Position,
    Suggestion,
    UserFeedback,
    transition,
)
from .errors import BatchFailureError, CorpusError, GatewayError
from .gateway import LLMGateway
from .judge import (
    BaselineThresholds,
    ChecklistConfig,
    JudgeKind,
    Verdict,
    included_rules,
    judge_baseline,
    judge_har,
)
from .ked import evaluate_ked
from .session import (
    IdlePolicy,
    Stage,
    Strategy,
    StrategyPolicy,
    propose,
    stage_for_progress,
)
from .stats import BootstrapCI, bootstrap_delta_ci, cohen_kappa, pearson, spearman
from .textstats import bleu, levenshtein, meteor, ncd, revision_distance, rouge_l

logger = logging.getLogger(__name__)

#: Deterministic per-record similarity metrics, in reporting order.
METRIC_NAMES: tuple[str, ...] = (
    "levenshtein",
    "ncd",
    "revision_distance",
    "rouge_l",
    "bleu",
    "meteor",
)

#: How stateful batch runs reconstruct an interaction history; echoed in
#: every report header so offline numbers are interpretable.
L2_HISTORY_NOTE = (
    "stateful runs replay earlier same-article queries in document order "
    "with their gold references treated as accepted content"
)


# ---------------------------------------------------------------------------
# corpus loading


def query_from_dict(row: Mapping) -> EvalQuery:
    """Build an EvalQuery from one parsed corpus row."""
    if not isinstance(row, Mapping):
        raise ValueError(f"expected a JSON object, got {type(row).__name__}")
    try:
        progress = row["progress"]
        if isinstance(progress, bool) or not isinstance(progress, (int, float)):
            raise ValueError("progress must be a number")
        return EvalQuery(
            id=row["id"],
            domain_tag=row["domain_tag"],
            category=Category(row["category"]),
            article_id=row["article_id"],
            position=Position(row["position"]),
            progress=float(progress),
            context=row["context"],
            reference=row["reference"],
        )
    except KeyError as exc:
        raise ValueError(f"missing field {exc.args[0]!r}") from exc


def query_to_dict(query: EvalQuery) -> dict:
    return {
        "id": query.id,
        "domain_tag": query.domain_tag,
        "category": query.category.value,
        "article_id": query.article_id,
        "position": query.position.value,
        "progress": query.progress,
        "context": query.context,
        "reference": query.reference,
    }


def load_queries(path, *, skip_bad: bool = False) -> list[EvalQuery]:
    """Read a line-delimited JSON corpus, preserving input order.

    Every malformed line is reported with its line number in a single
    aggregated CorpusError. With skip_bad the bad lines are logged and
    dropped instead. An empty corpus is legal but logged as a warning.
    """
    queries: list[EvalQuery] = []
    seen_ids: set[str] = set()
    problems: list[str] = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
            except json.JSONDecodeError as exc:
                problems.append(f"line {line_no}: invalid JSON: {exc.msg}")
                continue
            try:
                query = query_from_dict(row)
            except (TypeError, ValueError) as exc:
                problems.append(f"line {line_no}: {exc}")
                continue
            if query.id in seen_ids:
                problems.append(f"line {line_no}: duplicate query id {query.id!r}")
                continue
            seen_ids.add(query.id)
            queries.append(query)
    if problems:
        report = f"corpus {path}: {len(problems)} bad line(s)\n" + "\n".join(problems)
        if not skip_bad:
            raise CorpusError(report)
        logger.warning("%s (skipped)", report)
    if not queries:
        logger.warning("corpus %s contains no queries", path)
    return queries


def load_gold(path) -> dict[str, bool]:
    """Read gold accept labels, one {query_id, accept} object per line."""
    labels: dict[str, bool] = {}
    problems: list[str] = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
            except json.JSONDecodeError as exc:
                problems.append(f"line {line_no}: invalid JSON: {exc.msg}")
                continue
            query_id = row.get("query_id") if isinstance(row, dict) else None
            accept = row.get("accept") if isinstance(row, dict) else None
            if not isinstance(query_id, str) or not query_id:
                problems.append(f"line {line_no}: missing or empty query_id")
            elif not isinstance(accept, bool):
                problems.append(f"line {line_no}: accept must be true or false")
            elif query_id in labels:
                problems.append(f"line {line_no}: duplicate query id {query_id!r}")
            else:
                labels[query_id] = accept
    if problems:
        raise CorpusError(
            f"gold labels {path}: {len(problems)} bad line(s)\n" + "\n".join(problems)
        )
    return labels


# ---------------------------------------------------------------------------
# batch scoring


@dataclass(frozen=True)
class CompletionConfig:
    """Knobs for the completion side of a batch run."""

    model: str | None = None  # None uses the gateway default
    temperature: float = 0.0


@dataclass(frozen=True)
class RunRecord:
    """One scored query: the completion and everything measured about it."""

    query_id: str
    paradigm: ParadigmLevel
    completion: str
    har: Verdict
    ked: int | None
    metric_scores: dict[str, float]
    baseline_verdicts: dict[str, bool] = field(default_factory=dict)
    parse_error: bool = False
    transport_error: bool = False
    elapsed_ms: int = 0

    def __post_init__(self) -> None:
        if self.parse_error and not self.har.flagged:
            raise ValueError("parse_error requires a flagged checklist verdict")
        if (self.parse_error or self.transport_error) and self.ked is not None:
            raise ValueError("flagged records must not carry an edit cost")

    @property
    def flagged(self) -> bool:
        return self.parse_error or self.transport_error


def verdict_to_dict(verdict: Verdict) -> dict:
    return {
        "accept": verdict.accept,
        "triggered_condition": verdict.triggered_condition,
        "reasoning": verdict.reasoning,
        "raw_response": verdict.raw_response,
        "judge": verdict.judge.value,
        "scores": verdict.scores,
        "fast_path": verdict.fast_path,
        "flagged": verdict.flagged,
    }


def verdict_from_dict(data: Mapping) -> Verdict:
    return Verdict(
        accept=data["accept"],
        triggered_condition=data["triggered_condition"],
        reasoning=data["reasoning"],
        raw_response=data["raw_response"],
        judge=JudgeKind(data["judge"]),
        scores=dict(data["scores"]) if data.get("scores") is not None else None,
        fast_path=data.get("fast_path", False),
        flagged=data.get("flagged", False),
    )


def record_to_dict(record: RunRecord) -> dict:
    return {
        "query_id": record.query_id,
        "paradigm": record.paradigm.name,
        "completion": record.completion,
        "har": verdict_to_dict(record.har),
        "ked": record.ked,
        "metric_scores": record.metric_scores,
        "baseline_verdicts": record.baseline_verdicts,
        "parse_error": record.parse_error,
        "transport_error": record.transport_error,
        "elapsed_ms": record.elapsed_ms,
    }


def record_from_dict(data: Mapping) -> RunRecord:
    return RunRecord(
        query_id=data["query_id"],
        paradigm=ParadigmLevel[data["paradigm"]],
        completion=data["completion"],
        har=verdict_from_dict(data["har"]),
        ked=data["ked"],
        metric_scores=dict(data["metric_scores"]),
        baseline_verdicts=dict(data.get("baseline_verdicts", {})),
        parse_error=data.get("parse_error", False),
        transport_error=data.get("transport_error", False),
        elapsed_ms=data.get("elapsed_ms", 0),
    )


def write_records(path, records: Sequence[RunRecord]) -> None:
    """Write scored records as line-delimited JSON, one record per line."""
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record_to_dict(record), ensure_ascii=False, sort_keys=True))
            fh.write("\n")


def read_records(path) -> list[RunRecord]:
    records = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                records.append(record_from_dict(json.loads(line)))
            except (KeyError, TypeError, ValueError) as exc:
                raise CorpusError(f"records {path}: line {line_no}: {exc}") from exc
    return records


def completion_metrics(completion: str, reference: str) -> dict[str, float]:
    """Deterministic similarity metrics between a completion and its reference."""
    return {
        "levenshtein": float(levenshtein(completion, reference)),
        "ncd": ncd(completion, reference),
        "revision_distance": float(revision_distance(completion, reference)),
        "rouge_l": rouge_l(completion, reference),
        "bleu": bleu(completion, reference),
        "meteor": meteor(completion, reference),
    }


def synthesize_history_state(
    article_queries: Sequence[EvalQuery], index: int
) -> DocumentState:
    """Replay an article's earlier queries as accepted suggestions.

    The document starts from the article's first context; each query before
    `index` contributes its gold reference as accepted assistant content.
    On a contiguously segmented corpus the resulting text equals the target
    query's own context, and the annotated snapshot carries the previous
    round's accepted span, which is exactly what a live stateful session
    would have seen.
    """
    if not 0 <= index < len(article_queries):
        raise ValueError(f"index {index} outside article of {len(article_queries)} queries")
    state = DocumentState.new(article_queries[0].context)
    for earlier in article_queries[:index]:
        suggestion = Suggestion(
            id=f"history-{earlier.id}",
            content=earlier.reference,
            paradigm=ParadigmLevel.L2,
            prompt_hash="synthesized-history",
            created_at=0,
        )
        feedback = UserFeedback(kind=FeedbackKind.ACCEPT, decided_at=0, decision_ms=0)
        state = transition(state, suggestion, feedback)
    return state


def _transport_reject() -> Verdict:
    return Verdict(
        accept=False,
        triggered_condition="transport_error",
        reasoning="no verdict: the gateway failed after retries",
        raw_response="",
        judge=JudgeKind.HAR,
        flagged=True,
    )


def _score_query(
    query: EvalQuery,
    paradigm: ParadigmLevel,
    article_queries: Sequence[EvalQuery],
    index: int,
    completion_config: CompletionConfig,
    judge_config: ChecklistConfig,
    gateway: LLMGateway,
    *,
    with_ked: bool,
    baseline_kinds: Sequence[JudgeKind],
    thresholds: BaselineThresholds,
    clock: Callable[[], float],
) -> RunRecord:
    start = clock()
    transport_error = False
    completion = ""
    try:
        if paradigm is ParadigmLevel.L2:
            state = synthesize_history_state(article_queries, index)
            strategy = Strategy.STATEFUL
        else:
            state = DocumentState.new(query.context)
            strategy = Strategy.STATELESS
        completion = propose(
            state,
            strategy,
            gateway,
            paradigm=paradigm,
            model=completion_config.model,
            temperature=completion_config.temperature,
            now=0,
        ).content
    except GatewayError:
        transport_error = True

    har: Verdict | None = None
    if not transport_error:
        try:
            har = judge_har(query, completion, judge_config, gateway)
        except GatewayError:
            transport_error = True
    if har is None:
        har = _transport_reject()
    parse_error = har.flagged and not transport_error

    ked_cost: int | None = None
    if with_ked and not transport_error and not parse_error:
        try:
            ked_cost = evaluate_ked(
                query,
                completion,
                gateway,
                model=judge_config.judge_model,
                temperature=judge_config.temperature,
                max_parse_retries=judge_config.max_parse_retries,
            )
        except GatewayError:
            transport_error = True

    baseline_verdicts: dict[str, bool] = {}
    if not transport_error and not parse_error:
        for kind in baseline_kinds:
            try:
                verdict = judge_baseline(
                    kind,
                    query,
                    completion,
                    gateway,
                    thresholds,
                    model=judge_config.judge_model,
                    temperature=judge_config.temperature,
                    max_parse_retries=judge_config.max_parse_retries,
                )
            except GatewayError:
                transport_error = True
                break
            baseline_verdicts[kind.value] = verdict.accept

    if transport_error:
        ked_cost = None
    return RunRecord(
        query_id=query.id,
        paradigm=paradigm,
        completion=completion,
        har=har,
        ked=ked_cost,
        metric_scores=completion_metrics(completion, query.reference) if completion else {},
        baseline_verdicts=baseline_verdicts,
        parse_error=parse_error,
        transport_error=transport_error,
        elapsed_ms=int(round((clock() - start) * 1000)),
    )


def run_batch(
    queries: Sequence[EvalQuery],
    paradigm: ParadigmLevel,
    completion_config: CompletionConfig,
    judge_config: ChecklistConfig,
    gateway: LLMGateway,
    *,
    with_ked: bool = True,
    baseline_kinds: Sequence[JudgeKind] = (),
    thresholds: BaselineThresholds = BaselineThresholds(),
    max_failure_rate: float = 0.5,
    concurrency: int | None = None,
    clock: Callable[[], float] = time.monotonic,
) -> list[RunRecord]:
    """Score every query and return one record per query, in input order.

    Gateway failures flag the affected record instead of dropping it; the
    run only aborts when the flagged share exceeds max_failure_rate. Under a
    mock or fully cached gateway (and an injected constant clock) the result
    is bit-for-bit reproducible.
    """
    if paradigm not in (ParadigmLevel.L1, ParadigmLevel.L2):
        raise ValueError("batch runs support the L1 and L2 paradigms only")
    if not 0.0 <= max_failure_rate <= 1.0:
        raise ValueError("max_failure_rate must lie in [0, 1]")
    ids = [query.id for query in queries]
    if len(set(ids)) != len(ids):
        raise ValueError("query ids must be unique within a batch")
    if not queries:
        return []

    by_article: dict[str, list[EvalQuery]] = {}
    for query in queries:
        by_article.setdefault(query.article_id, []).append(query)
    position_in_article = {
        query.id: (article, i)
        for article in by_article.values()
        for i, query in enumerate(article)
    }

    def score(query: EvalQuery) -> RunRecord:
        article, index = position_in_article[query.id]
        return _score_query(
            query,
            paradigm,
            article,
            index,
            completion_config,
            judge_config,
            gateway,
            with_ked=with_ked,
            baseline_kinds=baseline_kinds,
            thresholds=thresholds,
            clock=clock,
        )

    workers = concurrency if concurrency is not None else gateway.config.max_inflight
    workers = max(1, min(workers, len(queries)))
    if workers == 1:
        records = [score(query) for query in queries]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(score, queries))

    failed = sum(1 for record in records if record.flagged)
    if failed / len(records) > max_failure_rate:
        error = BatchFailureError(
            f"{failed}/{len(records)} records flagged, above the "
            f"{max_failure_rate:.0%} failure ceiling"
        )
        error.records = records
        raise error
    return records


# ---------------------------------------------------------------------------
# aggregation


@dataclass(frozen=True)
class Cell:
    """Metrics for one split of the record set."""

    n: int
    accepted: int
    har_pct: float | None
    n_ked: int
    mean_ked: float | None


def _cell(records: Sequence[RunRecord]) -> Cell:
    n = len(records)
    accepted = sum(1 for record in records if record.har.accept)
    keds = [record.ked for record in records if record.ked is not None]
    return Cell(
        n=n,
        accepted=accepted,
        har_pct=100.0 * accepted / n if n else None,
        n_ked=len(keds),
        mean_ked=sum(keds) / len(keds) if keds else None,
    )


@dataclass(frozen=True)
class AlignmentStats:
    """Judge-vs-gold agreement over unflagged records."""

    n: int
    alignment_pct: float
    kappa: float
    kappa_degenerate: bool


@dataclass(frozen=True)
class CorrelationRow:
    metric: str
    n: int
    pearson_r: float | None
    spearman_rho: float | None


@dataclass(frozen=True)
class MetricReport:
    """Aggregated view of one batch run."""

    header: dict
    n_records: int
    n_flagged: int
    overall: Cell
    by_category: dict[str, Cell]
    by_domain: dict[str, Cell]
    by_position: dict[str, Cell]
    by_progress: dict[str, Cell]
    alignment: AlignmentStats | None = None
    correlations: tuple[CorrelationRow, ...] = ()


def _split(
    records: Sequence[RunRecord],
    labels: Sequence[str],
    label_of: Callable[[RunRecord], str],
) -> dict[str, Cell]:
    groups: dict[str, list[RunRecord]] = {label: [] for label in labels}
    for record in records:
        groups[label_of(record)].append(record)
    return {label: _cell(group) for label, group in groups.items()}


def aggregate(
    records: Sequence[RunRecord],
    queries: Sequence[EvalQuery],
    *,
    gold: Mapping[str, bool] | None = None,
    correlation_target: str | None = None,
    header: Mapping | None = None,
) -> MetricReport:
    """Fold records into split-level metrics.

    Flagged records are excluded from every cell rather than imputed; each
    cell reports its own n so exclusions stay visible, and split sizes sum
    back to the unflagged total. Gold labels add alignment statistics; a
    correlation target adds the per-metric correlation table. The result is
    a pure function of the record and query sets, invariant to their order.
    """
    query_by_id = {query.id: query for query in queries}
    for record in records:
        if record.query_id not in query_by_id:
            raise ValueError(f"record references unknown query id {record.query_id!r}")
    unflagged = [record for record in records if not record.flagged]

    def q(record: RunRecord) -> EvalQuery:
        return query_by_id[record.query_id]

    domains = sorted({query.domain_tag for query in queries})
    report = MetricReport(
        header=dict(header or {}),
        n_records=len(records),
        n_flagged=len(records) - len(unflagged),
        overall=_cell(unflagged),
        by_category=_split(
            unflagged, [c.value for c in Category], lambda r: q(r).category.value
        ),
        by_domain=_split(unflagged, domains, lambda r: q(r).domain_tag),
        by_position=_split(
            unflagged, [p.value for p in Position], lambda r: q(r).position.value
        ),
        by_progress=_split(
            unflagged,
            [s.value for s in Stage],
            lambda r: stage_for_progress(q(r).progress).value,
        ),
        alignment=_alignment(unflagged, gold) if gold is not None else None,
        correlations=(
            correlation_table(records, target=correlation_target)
            if correlation_target is not None
            else ()
        ),
    )
    for split in (report.by_category, report.by_domain, report.by_position, report.by_progress):
        if sum(cell.n for cell in split.values()) != report.overall.n:
            raise RuntimeError("split sizes do not sum to the unflagged total")
    return report


def _alignment(unflagged: Sequence[RunRecord], gold: Mapping[str, bool]) -> AlignmentStats:
    pairs = [
        (record.har.accept, gold[record.query_id])
        for record in unflagged
        if record.query_id in gold
    ]
    if not pairs:
        raise ValueError("gold labels cover no unflagged record")
    verdicts = [v for v, _ in pairs]
    labels = [g for _, g in pairs]
    kappa = cohen_kappa(verdicts, labels)
    matches = sum(1 for v, g in pairs if v == g)
    return AlignmentStats(
        n=len(pairs),
        alignment_pct=100.0 * matches / len(pairs),
        kappa=kappa.kappa,
        kappa_degenerate=kappa.degenerate,
    )


def correlation_table(
    records: Sequence[RunRecord], target: str = "ked"
) -> tuple[CorrelationRow, ...]:
    """Correlate each deterministic metric with a target column.

    The target is "ked" or any metric name; rows pair only unflagged records
    where both values exist. Correlations that are undefined on the pairing
    (constant input, fewer than two points) report None rather than failing
    the whole table.
    """

    def value(record: RunRecord, column: str) -> float | None:
        if column == "ked":
            return float(record.ked) if record.ked is not None else None
        return record.metric_scores.get(column)

    usable = [record for record in records if not record.flagged]
    names = [name for name in METRIC_NAMES if name != target]
    rows = []
    for name in names:
        pairs = [
            (xs, ys)
            for record in usable
            if (xs := value(record, name)) is not None
            and (ys := value(record, target)) is not None
        ]
        r = rho = None
        if len(pairs) >= 2:
            x_vals = [x for x, _ in pairs]
            y_vals = [y for _, y in pairs]
            try:
                r = pearson(x_vals, y_vals)
            except ValueError:
                r = None
            try:
                rho = spearman(x_vals, y_vals)
            except ValueError:
                rho = None
        rows.append(CorrelationRow(metric=name, n=len(pairs), pearson_r=r, spearman_rho=rho))
    return tuple(rows)


@dataclass(frozen=True)
class ParadigmComparison:
    """Paired HAR delta between two runs over the same queries."""

    paradigm_a: str
    paradigm_b: str
    n_pairs: int
    har_a_pct: float
    har_b_pct: float
    delta: BootstrapCI  # b minus a, in percentage points
    level: float = 0.95


def compare_paradigms(
    records_a: Sequence[RunRecord],
    records_b: Sequence[RunRecord],
    *,
    resamples: int = 1000,
    level: float = 0.95,
    seed: int = 42,
) -> ParadigmComparison:
    """Bootstrap the paired accept-rate delta over queries scored by both runs.

    Pairs form on query id and drop any query flagged on either side, so the
    delta compares identical query sets.
    """
    by_id_b = {record.query_id: record for record in records_b}
    pairs = [
        (record, by_id_b[record.query_id])
        for record in records_a
        if not record.flagged
        and record.query_id in by_id_b
        and not by_id_b[record.query_id].flagged
    ]
    if not pairs:
        raise ValueError("no unflagged query is shared by both record sets")
    a_vals = [1.0 if a.har.accept else 0.0 for a, _ in pairs]
    b_vals = [1.0 if b.har.accept else 0.0 for _, b in pairs]
    ci = bootstrap_delta_ci(b_vals, a_vals, resamples=resamples, level=level, seed=seed)
    return ParadigmComparison(
        paradigm_a=pairs[0][0].paradigm.name,
        paradigm_b=pairs[0][1].paradigm.name,
        n_pairs=len(pairs),
        har_a_pct=100.0 * sum(a_vals) / len(pairs),
        har_b_pct=100.0 * sum(b_vals) / len(pairs),
        delta=BootstrapCI(ci.delta * 100.0, ci.lower * 100.0, ci.upper * 100.0),
        level=level,
    )


def export_rewards(records: Sequence[RunRecord], path) -> None:
    """Write binary rewards as line-delimited JSON.

    Reward is 1 exactly when the checklist verdict accepted an unflagged
    record; flagged records emit reward 0 and carry a flag field.
    """
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            row: dict = {
                "query_id": record.query_id,
                "completion": record.completion,
                "reward": 1 if record.har.accept and not record.flagged else 0,
            }
            if record.flagged:
                row["flagged"] = True
            fh.write(json.dumps(row, ensure_ascii=False, sort_keys=True))
            fh.write("\n")


# ---------------------------------------------------------------------------
# report rendering


def run_header(
    paradigm: ParadigmLevel,
    completion_config: CompletionConfig,
    judge_config: ChecklistConfig,
    *,
    thresholds: BaselineThresholds = BaselineThresholds(),
    idle_policy: IdlePolicy = IdlePolicy(),
    strategy_policy: StrategyPolicy = StrategyPolicy(),
    bootstrap_seed: int = 42,
    extra: Mapping | None = None,
) -> dict:
    """Echo every knob that shaped a run, for embedding in its report."""
    header = {
        "paradigm": paradigm.name,
        "completion_model": completion_config.model or "<gateway default>",
        "completion_temperature": completion_config.temperature,
        "judge_model": judge_config.judge_model or "<gateway default>",
        "judge_temperature": judge_config.temperature,
        "checklist_layers": [layer.value for layer in judge_config.included_layers],
        "checklist_rules": len(included_rules(judge_config)),
        "fast_path": judge_config.fast_path,
        "max_parse_retries": judge_config.max_parse_retries,
        "style_accept_threshold": float(thresholds.style),
        "semantic_accept_threshold": thresholds.semantic,
        "idle_threshold_s": idle_policy.base_threshold_s,
        "adaptive_idle_s": {
            "early": idle_policy.early_s,
            "middle": idle_policy.middle_s,
            "late": idle_policy.late_s,
        },
        "strategy_switch_stage": strategy_policy.switch_stage.value,
        "bootstrap_seed": bootstrap_seed,
        "l2_history_synthesis": L2_HISTORY_NOTE,
    }
    if extra:
        header.update(extra)
    return header


def _cell_to_dict(cell: Cell) -> dict:
    return {
        "n": cell.n,
        "accepted": cell.accepted,
        "har_pct": cell.har_pct,
        "n_ked": cell.n_ked,
        "mean_ked": cell.mean_ked,
    }


def report_to_dict(report: MetricReport) -> dict:
    """Plain-dict form of a report, ready for json.dumps."""
    result = {
        "header": report.header,
        "n_records": report.n_records,
        "n_flagged": report.n_flagged,
        "overall": _cell_to_dict(report.overall),
        "by_category": {k: _cell_to_dict(v) for k, v in report.by_category.items()},
        "by_domain": {k: _cell_to_dict(v) for k, v in report.by_domain.items()},
        "by_position": {k: _cell_to_dict(v) for k, v in report.by_position.items()},
        "by_progress": {k: _cell_to_dict(v) for k, v in report.by_progress.items()},
        "alignment": None,
        "correlations": [
            {
                "metric": row.metric,
                "n": row.n,
                "pearson_r": row.pearson_r,
                "spearman_rho": row.spearman_rho,
            }
            for row in report.correlations
        ],
    }
    if report.alignment is not None:
        result["alignment"] = {
            "n": report.alignment.n,
            "alignment_pct": report.alignment.alignment_pct,
            "kappa": report.alignment.kappa,
            "kappa_degenerate": report.alignment.kappa_degenerate,
        }
    return result


def _fmt(value: float | None, spec: str = ".1f") -> str:
    return "-" if value is None else format(value, spec)


def _split_table(title: str, cells: Mapping[str, Cell]) -> list[str]:
    width = max([len(title)] + [len(label) for label in cells]) + 2
    lines = [title, f"  {'split':<{width}} {'n':>5} {'HAR%':>7} {'meanKED':>9} {'nKED':>5}"]
    for label, cell in cells.items():
        lines.append(
            f"  {label:<{width}} {cell.n:>5} {_fmt(cell.har_pct):>7}"
            f" {_fmt(cell.mean_ked, '.2f'):>9} {cell.n_ked:>5}"
        )
    return lines


def render_report(report: MetricReport) -> str:
    """Aligned-column text rendering of a report."""
    lines = ["co-writing batch report", "=" * 23, ""]
    for key, value in report.header.items():
        rendered = json.dumps(value, ensure_ascii=False) if isinstance(value, (dict, list)) else value
        lines.append(f"{key}: {rendered}")
    if report.header:
        lines.append("")
    overall = report.overall
    lines.append(
        f"records: {report.n_records} total, {report.n_flagged} flagged, "
        f"{overall.n} scored"
    )
    lines.append(
        f"overall: HAR% {_fmt(overall.har_pct)} ({overall.accepted}/{overall.n}),"
        f" mean KED {_fmt(overall.mean_ked, '.2f')} over {overall.n_ked}"
    )
    lines.append("")
    for title, cells in (
        ("by category", report.by_category),
        ("by domain", report.by_domain),
        ("by position", report.by_position),
        ("by progress bucket", report.by_progress),
    ):
        lines.extend(_split_table(title, cells))
        lines.append("")
    if report.alignment is not None:
        a = report.alignment
        degenerate = " (degenerate)" if a.kappa_degenerate else ""
        lines.append(
            f"gold alignment: {a.alignment_pct:.1f}% over {a.n},"
            f" kappa {a.kappa:.3f}{degenerate}"
        )
        lines.append("")
    if report.correlations:
        lines.append("correlations vs target")
        lines.append(f"  {'metric':<20} {'n':>5} {'pearson':>9} {'spearman':>9}")
        for row in report.correlations:
            lines.append(
                f"  {row.metric:<20} {row.n:>5} {_fmt(row.pearson_r, '.3f'):>9}"
                f" {_fmt(row.spearman_rho, '.3f'):>9}"
            )
        lines.append("")
    return "\n".join(lines).rstrip() + "\n"


def render_comparison(comparison: ParadigmComparison) -> str:
    """One-paragraph text rendering of a paired paradigm comparison."""
    ci = comparison.delta
    return (
        f"paired comparison over {comparison.n_pairs} queries: "
        f"{comparison.paradigm_a} HAR% {comparison.har_a_pct:.1f}, "
        f"{comparison.paradigm_b} HAR% {comparison.har_b_pct:.1f}, "
        f"delta {ci.delta:+.1f} pp ({comparison.level:.0%} CI {ci.lower:+.1f}"
        f" to {ci.upper:+.1f})\n"
    )
