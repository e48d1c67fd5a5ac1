"""Batch harness: corpus loading, scoring, aggregation, rewards, reports."""

from __future__ import annotations

import json
import logging

import pytest

from cowrite.core import Category, ParadigmLevel, Position
from cowrite.demo import (
    TOY_PLANTED_ACCEPTS,
    load_toy_corpus,
    scripted_toy_backend,
    toy_ked_cost,
)
from cowrite.errors import BatchFailureError, CorpusError
from cowrite.gateway import BackendConfig, LLMGateway, MockBackend
from cowrite.harness import (
    METRIC_NAMES,
    CompletionConfig,
    RunRecord,
    aggregate,
    compare_paradigms,
    completion_metrics,
    correlation_table,
    export_rewards,
    load_gold,
    load_queries,
    query_from_dict,
    query_to_dict,
    read_records,
    record_from_dict,
    record_to_dict,
    render_comparison,
    render_report,
    report_to_dict,
    run_batch,
    run_header,
    synthesize_history_state,
    write_records,
)
from cowrite.judge import ChecklistConfig, JudgeKind, Verdict
from cowrite.session import stage_for_progress
from cowrite.stats import cohen_kappa

CORPUS = load_toy_corpus()
QUERY_IDS = [query.id for query in CORPUS]


def ZERO_CLOCK() -> float:
    return 0.0


def good_row(**overrides) -> dict:
    row = {
        "id": "q1",
        "domain_tag": "Travel",
        "category": "creative",
        "article_id": "art-1",
        "position": "middle",
        "progress": 0.5,
        "context": "The road narrows",
        "reference": " past the mill.",
    }
    row.update(overrides)
    return row


def write_lines(path, rows) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write((row if isinstance(row, str) else json.dumps(row)) + "\n")


def run_toy(
    paradigm: ParadigmLevel = ParadigmLevel.L1,
    *,
    planted=None,
    fail=(),
    max_failure_rate: float = 1.0,
    with_ked: bool = True,
    concurrency: int | None = None,
):
    mock = scripted_toy_backend(planted_accepts=planted, fail_judging=fail)
    gateway = LLMGateway(BackendConfig(max_retries=0), transport=mock)
    records = run_batch(
        CORPUS,
        paradigm,
        CompletionConfig(),
        ChecklistConfig(),
        gateway,
        with_ked=with_ked,
        max_failure_rate=max_failure_rate,
        concurrency=concurrency,
        clock=ZERO_CLOCK,
    )
    return records, mock


def make_record(
    query_id: str,
    *,
    accept: bool = True,
    ked: int | None = None,
    metrics: dict | None = None,
    parse_error: bool = False,
    transport_error: bool = False,
) -> RunRecord:
    verdict = Verdict(
        accept=accept and not parse_error and not transport_error,
        triggered_condition="17. Comprehensive judgment",
        reasoning="",
        raw_response="",
        judge=JudgeKind.HAR,
        flagged=parse_error or transport_error,
    )
    return RunRecord(
        query_id=query_id,
        paradigm=ParadigmLevel.L1,
        completion="text",
        har=verdict,
        ked=None if parse_error or transport_error else ked,
        metric_scores=metrics or {},
        parse_error=parse_error,
        transport_error=transport_error,
    )


# ---------------------------------------------------------------------------
# corpus loading


class TestLoadQueries:
    def test_valid_file_preserves_order(self, tmp_path):
        path = tmp_path / "corpus.jsonl"
        rows = [good_row(id=f"q{i}", article_id=f"art-{i}") for i in (3, 1, 2)]
        write_lines(path, rows)
        queries = load_queries(path)
        assert [q.id for q in queries] == ["q3", "q1", "q2"]
        assert queries[0].category is Category.CREATIVE
        assert queries[0].position is Position.MIDDLE

    def test_bad_progress_reports_line_number(self, tmp_path):
        path = tmp_path / "corpus.jsonl"
        write_lines(path, [good_row(), good_row(id="q2", progress=1.5)])
        with pytest.raises(CorpusError) as exc:
            load_queries(path)
        assert "line 2" in str(exc.value)
        assert "progress" in str(exc.value)

    def test_multiple_problems_aggregated(self, tmp_path):
        path = tmp_path / "corpus.jsonl"
        write_lines(path, ["not json", good_row(), json.dumps(good_row(id=""))])
        with pytest.raises(CorpusError) as exc:
            load_queries(path)
        message = str(exc.value)
        assert "line 1" in message and "line 3" in message
        assert "2 bad line(s)" in message

    def test_skip_bad_keeps_good_rows(self, tmp_path, caplog):
        path = tmp_path / "corpus.jsonl"
        write_lines(path, [good_row(), "broken", good_row(id="q2", article_id="a2")])
        with caplog.at_level(logging.WARNING, logger="cowrite.harness"):
            queries = load_queries(path, skip_bad=True)
        assert [q.id for q in queries] == ["q1", "q2"]
        assert "line 2" in caplog.text

    def test_empty_file_warns(self, tmp_path, caplog):
        path = tmp_path / "corpus.jsonl"
        path.write_text("")
        with caplog.at_level(logging.WARNING, logger="cowrite.harness"):
            assert load_queries(path) == []
        assert "no queries" in caplog.text

    def test_blank_lines_ignored(self, tmp_path):
        path = tmp_path / "corpus.jsonl"
        path.write_text("\n" + json.dumps(good_row()) + "\n\n")
        assert len(load_queries(path)) == 1

    def test_duplicate_id_rejected(self, tmp_path):
        path = tmp_path / "corpus.jsonl"
        write_lines(path, [good_row(), good_row(article_id="other")])
        with pytest.raises(CorpusError, match="duplicate query id"):
            load_queries(path)

    def test_missing_field_named(self, tmp_path):
        path = tmp_path / "corpus.jsonl"
        row = good_row()
        del row["reference"]
        write_lines(path, [row])
        with pytest.raises(CorpusError, match="reference"):
            load_queries(path)

    def test_non_numeric_progress_rejected(self):
        with pytest.raises(ValueError, match="progress"):
            query_from_dict(good_row(progress="0.5"))

    def test_round_trip(self):
        query = query_from_dict(good_row())
        assert query_from_dict(query_to_dict(query)) == query


class TestLoadGold:
    def test_valid_labels(self, tmp_path):
        path = tmp_path / "gold.jsonl"
        write_lines(path, [{"query_id": "q1", "accept": True}, {"query_id": "q2", "accept": False}])
        assert load_gold(path) == {"q1": True, "q2": False}

    def test_non_boolean_accept_rejected(self, tmp_path):
        path = tmp_path / "gold.jsonl"
        write_lines(path, [{"query_id": "q1", "accept": 1}])
        with pytest.raises(CorpusError, match="accept"):
            load_gold(path)

    def test_duplicate_and_missing_ids_reported(self, tmp_path):
        path = tmp_path / "gold.jsonl"
        write_lines(
            path,
            [
                {"query_id": "q1", "accept": True},
                {"query_id": "q1", "accept": False},
                {"accept": True},
            ],
        )
        with pytest.raises(CorpusError) as exc:
            load_gold(path)
        assert "line 2" in str(exc.value) and "line 3" in str(exc.value)


# ---------------------------------------------------------------------------
# bundled toy corpus


class TestToyCorpus:
    def test_twenty_queries_four_articles(self):
        assert len(CORPUS) == 20
        assert len({q.article_id for q in CORPUS}) == 4
        assert len(set(QUERY_IDS)) == 20
        assert len({q.reference for q in CORPUS}) == 20

    def test_contiguous_segmentation(self):
        by_article: dict[str, list] = {}
        for query in CORPUS:
            by_article.setdefault(query.article_id, []).append(query)
        for group in by_article.values():
            for prev, nxt in zip(group, group[1:]):
                assert nxt.context == prev.context + prev.reference

    def test_both_categories_present(self):
        categories = {q.category for q in CORPUS}
        assert categories == {Category.SCIENTIFIC, Category.CREATIVE}

    def test_position_labels_match_progress_buckets(self):
        for query in CORPUS:
            assert query.position.value == stage_for_progress(query.progress).value

    def test_history_state_matches_context(self):
        group = [q for q in CORPUS if q.article_id == "a3"]
        for index, query in enumerate(group):
            state = synthesize_history_state(group, index)
            assert state.text == query.context
            assert len(state.log) == index

    def test_history_index_out_of_range(self):
        group = [q for q in CORPUS if q.article_id == "a1"]
        with pytest.raises(ValueError):
            synthesize_history_state(group, len(group))


# ---------------------------------------------------------------------------
# batch runs


class TestRunBatch:
    def test_planted_accepts_land_exactly(self):
        records, _ = run_toy()
        assert [r.query_id for r in records] == QUERY_IDS
        accepted = {r.query_id for r in records if r.har.accept}
        assert accepted == TOY_PLANTED_ACCEPTS
        assert all(not r.flagged for r in records)
        assert all(r.ked == toy_ked_cost(r.query_id) for r in records)

    def test_metric_scores_cover_all_metrics(self):
        records, _ = run_toy()
        for record in records:
            assert set(record.metric_scores) == set(METRIC_NAMES)
            reference = next(q.reference for q in CORPUS if q.id == record.query_id)
            assert record.metric_scores == completion_metrics(record.completion, reference)

    def test_deterministic_across_fresh_runs(self):
        first, _ = run_toy()
        second, _ = run_toy()
        assert first == second

        def as_json(records):
            return json.dumps([record_to_dict(r) for r in records], sort_keys=True)

        assert as_json(first) == as_json(second)

    def test_sequential_and_threaded_agree(self):
        threaded, _ = run_toy(concurrency=8)
        sequential, _ = run_toy(concurrency=1)
        assert threaded == sequential

    def test_l2_accepts_match_l1(self):
        records, _ = run_toy(ParadigmLevel.L2)
        accepted = {r.query_id for r in records if r.har.accept}
        assert accepted == TOY_PLANTED_ACCEPTS

    def test_l2_prompts_carry_history_snapshots(self):
        _, mock = run_toy(ParadigmLevel.L2)
        snapshots = [
            payload["messages"][1]["content"]
            for payload in mock.calls
            if "document_snapshot" in payload["messages"][0]["content"]
        ]
        assert len(snapshots) == 20
        assert sum(1 for text in snapshots if "<accept>" in text) == 16  # all but each article's first
        first_context = next(q for q in CORPUS if q.id == "a1q1").context
        assert first_context in snapshots  # no history yet: the bare context

    def test_l1_prompts_are_context_only(self):
        _, mock = run_toy(ParadigmLevel.L1)
        joined = ["\n".join(m["content"] for m in payload["messages"]) for payload in mock.calls]
        for query in CORPUS:
            assert any(text.endswith("CONTEXT:\n" + query.context) for text in joined)

    def test_transport_failure_flags_one_record(self):
        records, _ = run_toy(fail=("a2q3",))
        assert len(records) == 20
        flagged = [r for r in records if r.flagged]
        assert [r.query_id for r in flagged] == ["a2q3"]
        bad = flagged[0]
        assert bad.transport_error and not bad.parse_error
        assert bad.har.accept is False and bad.har.flagged
        assert bad.har.triggered_condition == "transport_error"
        assert bad.ked is None

    def test_failure_ceiling_trips(self):
        failing = tuple(QUERY_IDS[:6])  # 30% above a 25% ceiling
        with pytest.raises(BatchFailureError) as exc:
            run_toy(fail=failing, max_failure_rate=0.25)
        assert "6/20" in str(exc.value)
        assert len(exc.value.records) == 20

    def test_failure_ceiling_holds_at_boundary(self):
        records, _ = run_toy(fail=tuple(QUERY_IDS[:5]), max_failure_rate=0.25)
        assert sum(1 for r in records if r.flagged) == 5

    def test_parse_exhaustion_flags_record(self):
        mock = MockBackend(strict=True)
        mock.script("Decision Criteria (Checklist)", "no json here")
        mock.script("CONTEXT:", "a drafted line.")
        gateway = LLMGateway(BackendConfig(max_retries=0), transport=mock)
        records = run_batch(
            CORPUS[:1],
            ParadigmLevel.L1,
            CompletionConfig(),
            ChecklistConfig(),
            gateway,
            max_failure_rate=1.0,
            clock=ZERO_CLOCK,
        )
        record = records[0]
        assert record.parse_error and not record.transport_error
        assert record.har.triggered_condition == "parse_error"
        assert record.ked is None

    def test_with_ked_off_skips_edit_costs(self):
        records, mock = run_toy(with_ked=False)
        assert all(r.ked is None for r in records)
        joined = ["\n".join(m["content"] for m in payload["messages"]) for payload in mock.calls]
        assert not any("Cost Assessment" in text for text in joined)

    def test_rejects_non_batch_paradigms(self):
        gateway = LLMGateway(BackendConfig(), transport=scripted_toy_backend())
        for paradigm in (ParadigmLevel.L0, ParadigmLevel.L3):
            with pytest.raises(ValueError, match="L1 and L2"):
                run_batch(CORPUS, paradigm, CompletionConfig(), ChecklistConfig(), gateway)

    def test_rejects_duplicate_query_ids(self):
        gateway = LLMGateway(BackendConfig(), transport=scripted_toy_backend())
        with pytest.raises(ValueError, match="unique"):
            run_batch(
                [CORPUS[0], CORPUS[0]],
                ParadigmLevel.L1,
                CompletionConfig(),
                ChecklistConfig(),
                gateway,
            )

    def test_empty_batch(self):
        gateway = LLMGateway(BackendConfig(), transport=scripted_toy_backend())
        assert (
            run_batch([], ParadigmLevel.L1, CompletionConfig(), ChecklistConfig(), gateway)
            == []
        )

    def test_fake_clock_sets_elapsed(self):
        ticks = iter(range(1000))
        records, _ = run_toy(concurrency=1)
        mock = scripted_toy_backend()
        gateway = LLMGateway(BackendConfig(max_retries=0), transport=mock)
        timed = run_batch(
            CORPUS[:2],
            ParadigmLevel.L1,
            CompletionConfig(),
            ChecklistConfig(),
            gateway,
            concurrency=1,
            clock=lambda: float(next(ticks)),
        )
        assert [r.elapsed_ms for r in timed] == [1000, 1000]
        assert all(r.elapsed_ms == 0 for r in records)


class TestRecordSerialization:
    def test_round_trip_through_file(self, tmp_path):
        records, _ = run_toy(fail=("a4q2",))
        path = tmp_path / "records.jsonl"
        write_records(path, records)
        assert read_records(path) == records

    def test_corrupt_line_reports_position(self, tmp_path):
        path = tmp_path / "records.jsonl"
        path.write_text('{"query_id": "q1"}\n')
        with pytest.raises(CorpusError, match="line 1"):
            read_records(path)

    def test_dict_round_trip(self):
        records, _ = run_toy()
        assert record_from_dict(record_to_dict(records[0])) == records[0]

    def test_flagged_record_rejects_ked(self):
        flagged = make_record("q1", transport_error=True)
        with pytest.raises(ValueError, match="edit cost"):
            RunRecord(
                query_id="q1",
                paradigm=ParadigmLevel.L1,
                completion="text",
                har=flagged.har,
                ked=3,
                metric_scores={},
                transport_error=True,
            )

    def test_parse_error_requires_flagged_verdict(self):
        clean = make_record("q1")
        with pytest.raises(ValueError, match="flagged"):
            RunRecord(
                query_id="q1",
                paradigm=ParadigmLevel.L1,
                completion="text",
                har=clean.har,
                ked=None,
                metric_scores={},
                parse_error=True,
            )


# ---------------------------------------------------------------------------
# aggregation


class TestAggregate:
    def test_overall_and_category_split(self):
        records, _ = run_toy()
        report = aggregate(records, CORPUS)
        assert report.n_records == 20 and report.n_flagged == 0
        assert report.overall.n == 20 and report.overall.accepted == 7
        assert report.overall.har_pct == pytest.approx(35.0)
        assert report.by_category["scientific"].har_pct == pytest.approx(40.0)
        assert report.by_category["creative"].har_pct == pytest.approx(30.0)
        expected_mean = sum(toy_ked_cost(q) for q in QUERY_IDS) / 20
        assert report.overall.mean_ked == pytest.approx(expected_mean)

    def test_domain_and_position_splits_partition(self):
        records, _ = run_toy()
        report = aggregate(records, CORPUS)
        assert set(report.by_domain) == {q.domain_tag for q in CORPUS}
        for split in (
            report.by_category,
            report.by_domain,
            report.by_position,
            report.by_progress,
        ):
            assert sum(cell.n for cell in split.values()) == report.overall.n
        assert [report.by_position[k].n for k in ("early", "middle", "late")] == [8, 4, 8]
        assert report.by_position == report.by_progress  # toy labels align by design

    def test_flagged_records_excluded_everywhere(self):
        records, _ = run_toy(fail=("a2q3",))
        report = aggregate(records, CORPUS)
        assert report.n_flagged == 1
        assert report.overall.n == 19
        assert sum(cell.n for cell in report.by_domain.values()) == 19
        assert report.by_domain["Popular Science Article"].n == 4

    def test_empty_split_reports_null_metrics(self):
        subset = [q for q in CORPUS if q.article_id == "a1"]
        mock = scripted_toy_backend(corpus=subset)
        gateway = LLMGateway(BackendConfig(max_retries=0), transport=mock)
        records = run_batch(
            subset, ParadigmLevel.L1, CompletionConfig(), ChecklistConfig(), gateway,
            clock=ZERO_CLOCK,
        )
        report = aggregate(records, subset)
        empty = report.by_category["creative"]
        assert empty.n == 0 and empty.har_pct is None and empty.mean_ked is None

    def test_all_flagged_never_divides_by_zero(self):
        records, _ = run_toy(fail=tuple(QUERY_IDS), max_failure_rate=1.0)
        report = aggregate(records, CORPUS)
        assert report.overall.n == 0
        assert report.overall.har_pct is None
        assert report.n_flagged == 20

    def test_permutation_invariant(self):
        records, _ = run_toy()
        report = aggregate(records, CORPUS)
        shuffled = aggregate(list(reversed(records)), list(reversed(CORPUS)))
        assert shuffled == report

    def test_unknown_query_id_rejected(self):
        records, _ = run_toy()
        with pytest.raises(ValueError, match="unknown query id"):
            aggregate(records, CORPUS[:5])

    def test_header_is_echoed(self):
        records, _ = run_toy()
        header = {"paradigm": "L1", "note": "test"}
        report = aggregate(records, CORPUS, header=header)
        assert report.header == header


class TestAlignment:
    def test_perfect_gold_alignment(self):
        records, _ = run_toy()
        gold = {q: (q in TOY_PLANTED_ACCEPTS) for q in QUERY_IDS}
        report = aggregate(records, CORPUS, gold=gold)
        assert report.alignment.n == 20
        assert report.alignment.alignment_pct == pytest.approx(100.0)
        assert report.alignment.kappa == pytest.approx(1.0)
        assert not report.alignment.kappa_degenerate

    def test_partial_gold_alignment(self):
        records, _ = run_toy()
        gold = {q: (q in TOY_PLANTED_ACCEPTS) for q in QUERY_IDS}
        for query_id in sorted(TOY_PLANTED_ACCEPTS)[:4]:
            gold[query_id] = False
        report = aggregate(records, CORPUS, gold=gold)
        assert report.alignment.alignment_pct == pytest.approx(80.0)
        verdicts = [r.query_id in TOY_PLANTED_ACCEPTS for r in records]
        labels = [gold[r.query_id] for r in records]
        assert report.alignment.kappa == pytest.approx(cohen_kappa(verdicts, labels).kappa)

    def test_flagged_rows_leave_alignment_denominator(self):
        records, _ = run_toy(fail=("a1q2",))
        gold = {q: (q in TOY_PLANTED_ACCEPTS) for q in QUERY_IDS}
        report = aggregate(records, CORPUS, gold=gold)
        assert report.alignment.n == 19
        assert report.alignment.alignment_pct == pytest.approx(100.0)

    def test_gold_subset_scores_subset(self):
        records, _ = run_toy()
        gold = {"a1q1": False, "a1q2": True}
        report = aggregate(records, CORPUS, gold=gold)
        assert report.alignment.n == 2
        assert report.alignment.alignment_pct == pytest.approx(100.0)

    def test_gold_without_overlap_rejected(self):
        records, _ = run_toy()
        with pytest.raises(ValueError, match="gold"):
            aggregate(records, CORPUS, gold={"missing": True})


class TestCorrelation:
    def test_linear_metric_correlates_perfectly(self):
        records = [
            make_record(f"q{i}", ked=i, metrics={"levenshtein": 2.0 * i + 1.0, "bleu": 0.5})
            for i in range(1, 6)
        ]
        rows = {row.metric: row for row in correlation_table(records, target="ked")}
        assert rows["levenshtein"].pearson_r == pytest.approx(1.0)
        assert rows["levenshtein"].spearman_rho == pytest.approx(1.0)
        assert rows["levenshtein"].n == 5

    def test_constant_metric_reports_none(self):
        records = [
            make_record(f"q{i}", ked=i, metrics={"bleu": 0.5}) for i in range(1, 6)
        ]
        rows = {row.metric: row for row in correlation_table(records, target="ked")}
        assert rows["bleu"].pearson_r is None
        assert rows["bleu"].spearman_rho is None

    def test_metric_target_excludes_itself(self):
        records = [
            make_record(f"q{i}", metrics={"rouge_l": i / 10, "bleu": 1.0 - i / 10})
            for i in range(1, 6)
        ]
        rows = correlation_table(records, target="rouge_l")
        names = [row.metric for row in rows]
        assert "rouge_l" not in names
        by_name = {row.metric: row for row in rows}
        assert by_name["bleu"].pearson_r == pytest.approx(-1.0)

    def test_flagged_and_missing_rows_drop_out(self):
        records = [
            make_record("q1", ked=1, metrics={"bleu": 0.1}),
            make_record("q2", ked=2, metrics={"bleu": 0.4}),
            make_record("q3", ked=None, metrics={"bleu": 0.9}),
            make_record("q4", ked=4, metrics={"bleu": 0.2}, transport_error=True),
        ]
        rows = {row.metric: row for row in correlation_table(records, target="ked")}
        assert rows["bleu"].n == 2

    def test_single_pair_reports_none(self):
        records = [make_record("q1", ked=1, metrics={"bleu": 0.1})]
        rows = {row.metric: row for row in correlation_table(records, target="ked")}
        assert rows["bleu"].n == 1
        assert rows["bleu"].pearson_r is None

    def test_attached_to_report(self):
        records, _ = run_toy()
        report = aggregate(records, CORPUS, correlation_target="ked")
        assert {row.metric for row in report.correlations} == set(METRIC_NAMES)
        assert all(row.n == 20 for row in report.correlations)


class TestCompareParadigms:
    def test_paired_delta_counts(self):
        low, _ = run_toy(planted=QUERY_IDS[:5])
        high, _ = run_toy(planted=QUERY_IDS[:10])
        comparison = compare_paradigms(low, high, seed=7)
        assert comparison.n_pairs == 20
        assert comparison.har_a_pct == pytest.approx(25.0)
        assert comparison.har_b_pct == pytest.approx(50.0)
        assert comparison.delta.delta == pytest.approx(25.0)
        assert comparison.delta.lower <= comparison.delta.delta <= comparison.delta.upper

    def test_seeded_bootstrap_reproducible(self):
        low, _ = run_toy(planted=QUERY_IDS[:5])
        high, _ = run_toy(planted=QUERY_IDS[:10])
        first = compare_paradigms(low, high, seed=42)
        second = compare_paradigms(low, high, seed=42)
        assert first == second

    def test_flagged_pairs_dropped(self):
        base, _ = run_toy()
        other, _ = run_toy(ParadigmLevel.L2, fail=("a3q2",))
        comparison = compare_paradigms(base, other)
        assert comparison.n_pairs == 19
        assert comparison.paradigm_a == "L1" and comparison.paradigm_b == "L2"

    def test_no_shared_queries_rejected(self):
        records, _ = run_toy()
        with pytest.raises(ValueError, match="shared"):
            compare_paradigms(records[:5], records[10:])


# ---------------------------------------------------------------------------
# rewards and reports


class TestExportRewards:
    def test_reward_one_iff_accepted(self, tmp_path):
        records, _ = run_toy(fail=("a1q2",))
        path = tmp_path / "rewards.jsonl"
        export_rewards(records, path)
        rows = [json.loads(line) for line in path.read_text().splitlines()]
        assert len(rows) == 20
        by_id = {row["query_id"]: row for row in rows}
        for record in records:
            row = by_id[record.query_id]
            if record.query_id == "a1q2":
                assert row["reward"] == 0 and row["flagged"] is True
            elif record.query_id in TOY_PLANTED_ACCEPTS:
                assert row["reward"] == 1 and "flagged" not in row
            else:
                assert row["reward"] == 0 and "flagged" not in row
            assert row["completion"] == record.completion

    def test_unwritable_path_raises(self, tmp_path):
        records, _ = run_toy()
        with pytest.raises(OSError):
            export_rewards(records, tmp_path / "missing-dir" / "rewards.jsonl")


class TestReportRendering:
    def test_run_header_echoes_every_knob(self):
        header = run_header(
            ParadigmLevel.L2,
            CompletionConfig(model="writer-model", temperature=0.3),
            ChecklistConfig(),
            extra={"corpus": "toy"},
        )
        assert header["paradigm"] == "L2"
        assert header["completion_model"] == "writer-model"
        assert header["checklist_rules"] == 17
        assert header["style_accept_threshold"] == pytest.approx(8.0)
        assert header["semantic_accept_threshold"] == 8
        assert header["adaptive_idle_s"] == {"early": 3.0, "middle": 2.0, "late": 1.5}
        assert header["strategy_switch_stage"] == "middle"
        assert "replay" in header["l2_history_synthesis"]
        assert header["corpus"] == "toy"

    def test_report_dict_is_json_ready(self):
        records, _ = run_toy()
        gold = {q: (q in TOY_PLANTED_ACCEPTS) for q in QUERY_IDS}
        report = aggregate(
            records,
            CORPUS,
            gold=gold,
            correlation_target="ked",
            header=run_header(ParadigmLevel.L1, CompletionConfig(), ChecklistConfig()),
        )
        payload = json.loads(json.dumps(report_to_dict(report)))
        assert payload["overall"]["har_pct"] == pytest.approx(35.0)
        assert payload["alignment"]["kappa"] == pytest.approx(1.0)
        assert len(payload["correlations"]) == len(METRIC_NAMES)

    def test_rendered_text_contains_tables(self):
        records, _ = run_toy(fail=("a4q5",))
        gold = {q: (q in TOY_PLANTED_ACCEPTS) for q in QUERY_IDS}
        report = aggregate(
            records,
            CORPUS,
            gold=gold,
            correlation_target="ked",
            header=run_header(ParadigmLevel.L1, CompletionConfig(), ChecklistConfig()),
        )
        text = render_report(report)
        for expected in (
            "co-writing batch report",
            "records: 20 total, 1 flagged, 19 scored",
            "by category",
            "scientific",
            "Short Fiction",
            "by progress bucket",
            "gold alignment",
            "correlations vs target",
            "l2_history_synthesis",
        ):
            assert expected in text
        assert not any(line.startswith("\t") for line in text.splitlines())

    def test_reports_byte_identical_across_runs(self):
        def build() -> str:
            records, _ = run_toy()
            header = run_header(ParadigmLevel.L1, CompletionConfig(), ChecklistConfig())
            return render_report(aggregate(records, CORPUS, header=header))

        assert build() == build()

    def test_render_comparison_mentions_both_sides(self):
        low, _ = run_toy(planted=QUERY_IDS[:5])
        high, _ = run_toy(ParadigmLevel.L2, planted=QUERY_IDS[:10])
        text = render_comparison(compare_paradigms(low, high))
        assert "L1 HAR% 25.0" in text
        assert "L2 HAR% 50.0" in text
        assert "+25.0 pp" in text and "95% CI" in text
