"""Command-line surface for judging, batch evaluation, and serving.

Configuration comes from an optional JSON file merged with flags; the
backend API key is only ever read from an environment variable. The --mock
flag swaps in the bundled scripted backend so every command runs offline
against the toy corpus.
"""

from __future__ import annotations

import dataclasses
import json
import sys

import click
import uvicorn

from .core import Category, EvalQuery, ParadigmLevel, Position
from .demo import scripted_toy_backend, toy_corpus_path
from .errors import CowriteError, ResponseParseError
from .gateway import BackendConfig, LLMGateway
from .harness import (
    CompletionConfig,
    aggregate,
    compare_paradigms,
    correlation_table,
    export_rewards,
    load_gold,
    load_queries,
    read_records,
    render_comparison,
    render_report,
    report_to_dict,
    run_batch,
    run_header,
)
from .judge import (
    BaselineThresholds,
    JudgeKind,
    checklist_config,
    judge_baseline,
    judge_har,
    render_baseline_prompt,
    render_har_prompt,
)
from .ked import render_ked_prompt, request_edit_plan
from .prompts import TEMPLATE_NAMES, load_template
from .service import ServiceConfig, create_app

_BACKEND_FIELDS = {f.name for f in dataclasses.fields(BackendConfig)}


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    with open(path, encoding="utf-8") as fh:
        config = json.load(fh)
    if not isinstance(config, dict):
        raise click.ClickException("config file must hold a JSON object")
    return config


def _make_gateway(config: dict, cache_dir: str | None, mock: bool) -> LLMGateway:
    kwargs = {k: v for k, v in config.items() if k in _BACKEND_FIELDS}
    if cache_dir is not None:
        kwargs["cache_dir"] = cache_dir
    backend = BackendConfig(**kwargs)
    transport = scripted_toy_backend() if mock else None
    return LLMGateway(backend, transport=transport)


def _completion_config(config: dict) -> CompletionConfig:
    return CompletionConfig(
        model=config.get("completion_model"),
        temperature=config.get("completion_temperature", 0.0),
    )


def _judge_config(config: dict, depth: int, fast_path: bool):
    return checklist_config(
        depth,
        judge_model=config.get("judge_model"),
        temperature=config.get("judge_temperature", 0.0),
        max_parse_retries=config.get("max_parse_retries", 2),
        fast_path=fast_path,
    )


def _thresholds(config: dict) -> BaselineThresholds:
    return BaselineThresholds(
        style=config.get("style_threshold", 8.0),
        semantic=config.get("semantic_threshold", 8),
    )


def _query_for_pair(context: str, reference: str) -> EvalQuery:
    """Minimal query wrapper for one-off judging from the command line."""
    return EvalQuery(
        id="cli",
        domain_tag="Miscellaneous Talks",
        category=Category.CREATIVE,
        article_id="cli",
        position=Position.MIDDLE,
        progress=0.5,
        context=context,
        reference=reference,
    )


def _read_arg(value: str | None, file_path: str | None, name: str) -> str:
    if (value is None) == (file_path is None):
        raise click.ClickException(f"provide exactly one of --{name} or --{name}-file")
    if value is not None:
        return value
    with open(file_path, encoding="utf-8") as fh:
        return fh.read()


def config_option(fn):
    fn = click.option(
        "--config",
        "config_path",
        type=click.Path(exists=True, dir_okay=False),
        default=None,
        help="JSON config file (backend, models, thresholds).",
    )(fn)
    fn = click.option("--cache-dir", default=None, help="Response cache directory.")(fn)
    fn = click.option(
        "--mock",
        is_flag=True,
        help="Use the bundled scripted backend; offline, toy corpus only.",
    )(fn)
    return fn


@click.group()
@click.version_option(package_name="cowrite", prog_name="cowrite")
def main() -> None:
    """Co-writing fidelity suite: judges, sessions, batch evaluation."""


@main.command("eval")
@click.argument("corpus", type=click.Path(exists=True, dir_okay=False))
@click.option("--paradigm", type=click.Choice(["L1", "L2"]), default="L1", show_default=True)
@click.option("--depth", type=click.IntRange(1, 3), default=3, show_default=True, help="Checklist layers to run.")
@click.option("--fast-path", is_flag=True, help="Enable deterministic checklist pre-checks.")
@click.option("--no-ked", is_flag=True, help="Skip edit-cost judging.")
@click.option("--skip-bad", is_flag=True, help="Drop malformed corpus lines instead of aborting.")
@click.option("--gold", "gold_path", type=click.Path(exists=True, dir_okay=False), default=None, help="Gold accept labels for alignment statistics.")
@click.option("--correlation-target", default=None, help='Correlation target column ("ked" or a metric name).')
@click.option("--out-records", type=click.Path(dir_okay=False), default=None, help="Write per-query records as JSONL.")
@click.option("--out-report", type=click.Path(dir_okay=False), default=None, help="Write the report as JSON.")
@click.option("--out-text", type=click.Path(dir_okay=False), default=None, help="Write the aligned-column text report.")
@click.option("--max-failure-rate", type=click.FloatRange(0.0, 1.0), default=0.5, show_default=True)
@click.option("--concurrency", type=click.IntRange(1), default=None, help="Worker threads (default: gateway limit).")
@click.option("--quiet", is_flag=True, help="Suppress the text report on stdout.")
@config_option
def eval_command(
    corpus,
    paradigm,
    depth,
    fast_path,
    no_ked,
    skip_bad,
    gold_path,
    correlation_target,
    out_records,
    out_report,
    out_text,
    max_failure_rate,
    concurrency,
    quiet,
    config_path,
    cache_dir,
    mock,
):
    """Score a corpus and aggregate the records into a report."""
    config = _load_config(config_path)
    try:
        queries = load_queries(corpus, skip_bad=skip_bad)
        gateway = _make_gateway(config, cache_dir, mock)
        judge_config = _judge_config(config, depth, fast_path)
        completion_config = _completion_config(config)
        level = ParadigmLevel[paradigm]
        records = run_batch(
            queries,
            level,
            completion_config,
            judge_config,
            gateway,
            with_ked=not no_ked,
            max_failure_rate=max_failure_rate,
            concurrency=concurrency,
        )
        gold = load_gold(gold_path) if gold_path else None
        header = run_header(
            level,
            completion_config,
            judge_config,
            thresholds=_thresholds(config),
            extra={"corpus": str(corpus), "mock": mock},
        )
        report = aggregate(
            records,
            queries,
            gold=gold,
            correlation_target=correlation_target,
            header=header,
        )
    except CowriteError as exc:
        raise click.ClickException(str(exc))
    if out_records:
        from .harness import write_records

        write_records(out_records, records)
    if out_report:
        with open(out_report, "w", encoding="utf-8") as fh:
            json.dump(report_to_dict(report), fh, indent=2, sort_keys=True)
            fh.write("\n")
    text = render_report(report)
    if out_text:
        with open(out_text, "w", encoding="utf-8") as fh:
            fh.write(text)
    if not quiet:
        click.echo(text, nl=False)


@main.command("ked")
@click.option("--reference", default=None)
@click.option("--reference-file", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--completion", default=None)
@click.option("--completion-file", type=click.Path(exists=True, dir_okay=False), default=None)
@config_option
def ked_command(reference, reference_file, completion, completion_file, config_path, cache_dir, mock):
    """Estimate the edit cost between one completion and its reference."""
    config = _load_config(config_path)
    reference_text = _read_arg(reference, reference_file, "reference")
    completion_text = _read_arg(completion, completion_file, "completion")
    gateway = _make_gateway(config, cache_dir, mock)
    try:
        plan, raw = request_edit_plan(
            reference_text,
            completion_text,
            gateway,
            model=config.get("judge_model"),
            temperature=config.get("judge_temperature", 0.0),
            max_parse_retries=config.get("max_parse_retries", 2),
        )
    except CowriteError as exc:
        raise click.ClickException(str(exc))
    if plan is None:
        click.echo("no parseable edit plan; raw response follows", err=True)
        click.echo(raw, err=True)
        sys.exit(1)
    click.echo(
        json.dumps(
            {
                "validated_total": plan.validated_total,
                "reported_total": plan.total_editing_cost,
                "total_mismatch": plan.total_mismatch,
                "summary": plan.summary,
                "actions": [
                    {
                        "operation": action.operation.value,
                        "instruction": action.instruction,
                        "cost": action.cost,
                    }
                    for action in plan.actions
                ],
            },
            indent=2,
            ensure_ascii=False,
        )
    )


@main.command("judge")
@click.option("--kind", type=click.Choice([k.value for k in JudgeKind]), default="har", show_default=True)
@click.option("--context", default=None)
@click.option("--context-file", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--reference", default=None)
@click.option("--reference-file", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--completion", default=None)
@click.option("--completion-file", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--depth", type=click.IntRange(1, 3), default=3, show_default=True)
@click.option("--fast-path", is_flag=True)
@config_option
def judge_command(
    kind,
    context,
    context_file,
    reference,
    reference_file,
    completion,
    completion_file,
    depth,
    fast_path,
    config_path,
    cache_dir,
    mock,
):
    """Judge one completion against its reference with any judge kind."""
    config = _load_config(config_path)
    context_text = _read_arg(context, context_file, "context")
    reference_text = _read_arg(reference, reference_file, "reference")
    completion_text = _read_arg(completion, completion_file, "completion")
    query = _query_for_pair(context_text, reference_text)
    gateway = _make_gateway(config, cache_dir, mock)
    judge_kind = JudgeKind(kind)
    try:
        if judge_kind is JudgeKind.HAR:
            verdict = judge_har(
                query, completion_text, _judge_config(config, depth, fast_path), gateway
            )
        else:
            verdict = judge_baseline(
                judge_kind,
                query,
                completion_text,
                gateway,
                _thresholds(config),
                model=config.get("judge_model"),
                temperature=config.get("judge_temperature", 0.0),
                max_parse_retries=config.get("max_parse_retries", 2),
            )
    except CowriteError as exc:
        raise click.ClickException(str(exc))
    from .harness import verdict_to_dict

    click.echo(json.dumps(verdict_to_dict(verdict), indent=2, ensure_ascii=False))


@main.command("simulate")
@click.argument("corpus", type=click.Path(exists=True, dir_okay=False), required=False)
@click.option("--depth", type=click.IntRange(1, 3), default=3, show_default=True)
@click.option("--no-ked", is_flag=True)
@click.option("--resamples", type=click.IntRange(1), default=1000, show_default=True)
@click.option("--level", type=click.FloatRange(0.0, 1.0), default=0.95, show_default=True)
@click.option("--seed", type=int, default=42, show_default=True)
@click.option("--out-records-l1", type=click.Path(dir_okay=False), default=None)
@click.option("--out-records-l2", type=click.Path(dir_okay=False), default=None)
@click.option("--reports", is_flag=True, help="Also print the full per-paradigm reports.")
@config_option
def simulate_command(
    corpus,
    depth,
    no_ked,
    resamples,
    level,
    seed,
    out_records_l1,
    out_records_l2,
    reports,
    config_path,
    cache_dir,
    mock,
):
    """Run the same corpus under L1 and L2 and bootstrap the paired delta.

    Without a corpus argument the bundled toy corpus is used.
    """
    config = _load_config(config_path)
    try:
        if corpus is None:
            from importlib import resources

            with resources.as_file(toy_corpus_path()) as path:
                queries = load_queries(path)
            corpus = "<bundled toy corpus>"
        else:
            queries = load_queries(corpus)
        gateway = _make_gateway(config, cache_dir, mock)
        judge_config = _judge_config(config, depth, False)
        completion_config = _completion_config(config)
        results = {}
        for level_name in ("L1", "L2"):
            results[level_name] = run_batch(
                queries,
                ParadigmLevel[level_name],
                completion_config,
                judge_config,
                gateway,
                with_ked=not no_ked,
            )
        comparison = compare_paradigms(
            results["L1"], results["L2"], resamples=resamples, level=level, seed=seed
        )
    except CowriteError as exc:
        raise click.ClickException(str(exc))
    if out_records_l1:
        from .harness import write_records

        write_records(out_records_l1, results["L1"])
    if out_records_l2:
        from .harness import write_records

        write_records(out_records_l2, results["L2"])
    if reports:
        for level_name in ("L1", "L2"):
            header = run_header(
                ParadigmLevel[level_name],
                completion_config,
                judge_config,
                thresholds=_thresholds(config),
                bootstrap_seed=seed,
                extra={"corpus": str(corpus), "mock": mock},
            )
            click.echo(render_report(aggregate(results[level_name], queries, header=header)))
    click.echo(render_comparison(comparison), nl=False)


@main.command("correlate")
@click.argument("records", type=click.Path(exists=True, dir_okay=False))
@click.option("--target", default="ked", show_default=True)
@click.option("--as-json", is_flag=True, help="Emit the table as JSON.")
def correlate_command(records, target, as_json):
    """Correlate deterministic metrics against a target column of a records file."""
    try:
        rows = correlation_table(read_records(records), target=target)
    except CowriteError as exc:
        raise click.ClickException(str(exc))
    if as_json:
        click.echo(
            json.dumps(
                [
                    {
                        "metric": row.metric,
                        "n": row.n,
                        "pearson_r": row.pearson_r,
                        "spearman_rho": row.spearman_rho,
                    }
                    for row in rows
                ],
                indent=2,
            )
        )
        return
    click.echo(f"{'metric':<20} {'n':>5} {'pearson':>9} {'spearman':>9}")
    for row in rows:
        pearson_text = "-" if row.pearson_r is None else f"{row.pearson_r:.3f}"
        spearman_text = "-" if row.spearman_rho is None else f"{row.spearman_rho:.3f}"
        click.echo(f"{row.metric:<20} {row.n:>5} {pearson_text:>9} {spearman_text:>9}")


@main.command("rewards")
@click.argument("records", type=click.Path(exists=True, dir_okay=False))
@click.argument("out", type=click.Path(dir_okay=False))
def rewards_command(records, out):
    """Convert a records file into binary RL rewards (1 iff checklist accept)."""
    try:
        export_rewards(read_records(records), out)
    except CowriteError as exc:
        raise click.ClickException(str(exc))
    click.echo(f"wrote rewards to {out}")


@main.command("serve")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8080, show_default=True)
@click.option("--data-dir", type=click.Path(file_okay=False), default="cowrite-sessions", show_default=True, help="Session log directory.")
@click.option("--target-length", type=click.IntRange(1), default=None, help="Token target for stage estimation.")
@config_option
def serve_command(host, port, data_dir, target_length, config_path, cache_dir, mock):
    """Serve the co-writing session API over HTTP."""
    config = _load_config(config_path)
    gateway = _make_gateway(config, cache_dir, mock)
    app = create_app(
        gateway,
        ServiceConfig(
            data_dir=data_dir,
            completion_model=config.get("completion_model"),
            temperature=config.get("completion_temperature", 0.0),
            target_length=target_length,
        ),
    )
    uvicorn.run(app, host=host, port=port)


@main.command("render-prompt")
@click.option("--template", type=click.Choice(sorted(TEMPLATE_NAMES)), required=True)
@click.option("--context", default="")
@click.option("--reference", default="")
@click.option("--completion", default="")
@click.option("--depth", type=click.IntRange(1, 3), default=3, show_default=True, help="Checklist layers (har only).")
def render_prompt_command(template, context, reference, completion, depth):
    """Print a prompt exactly as it would be sent; golden-file tooling.

    With no substitution inputs the raw template is printed verbatim.
    """
    if not (context or reference or completion):
        click.echo(load_template(template), nl=False)
        return
    try:
        if template == "har":
            query = _query_for_pair(context or " ", reference or " ")
            text = render_har_prompt(query, completion, checklist_config(depth))
        elif template == "ked":
            text = render_ked_prompt(reference, completion)
        elif template in ("logic", "style", "semantic", "holistic"):
            query = _query_for_pair(context or " ", reference or " ")
            text = render_baseline_prompt(JudgeKind(template), query, completion)
        elif template == "completion_l1":
            text = load_template(template) + "\n" + "CONTEXT:\n" + context
        else:
            raise click.ClickException(
                f"template {template!r} takes no substitution inputs"
            )
    except (CowriteError, ValueError) as exc:
        raise click.ClickException(str(exc))
    click.echo(text, nl=False)


if __name__ == "__main__":
    main()
