"""Unified command-line entry point.

Every stochastic command takes an explicit --seed; all randomness flows
from it through named substreams, so re-running a command with the same
inputs and seed reproduces its artifacts byte for byte (the
MOODNET_THREADS worker bound never changes results).
"""

from __future__ import annotations

import sys
from pathlib import Path

import click

from . import calibrate as cal
from . import communicability
from . import community
from . import pipeline as pipe
from . import storage
from .abm import (AgentModel, GlobalParams, build_model,
                  moments_from_history, simulate)
from .core import DateWindow, SCALES
from .ingest import FilterConfig, build_evolving_network, \
    build_interaction_graph, filter_users, parse_tweets, reciprocal_core

try:
    import tomllib
except ImportError:  # Python 3.10
    import tomli as tomllib


def _window(text: str) -> DateWindow:
    return DateWindow.from_string(text)


def _scale(kind: str):
    return SCALES[kind]


scale_option = click.option("--scale", "scale_kind",
                            type=click.Choice(["mc", "ss", "l"]),
                            default="ss", show_default=True,
                            help="Sentiment scale to analyse.")


@click.group()
@click.version_option()
def main():
    """Sentiment dynamics on evolving mention networks."""


@main.command()
@click.option("--input", "input_path", type=click.Path(exists=True, path_type=Path),
              required=True, help="Tweet stream (JSON Lines).")
@click.option("--window", "window_text", required=True,
              help="Analysis window START..END (inclusive UTC dates).")
@click.option("--strict", is_flag=True,
              help="Abort on the first malformed input line.")
@click.option("--max-tweets-per-day", type=float, default=200.0, show_default=True)
@click.option("--max-self-mention-ratio", type=float, default=0.5, show_default=True)
@click.option("--max-in-out-degree-ratio", type=float, default=50.0, show_default=True)
@click.option("--min-weight", type=int, default=1, show_default=True,
              help="Minimum exchanged-message count for interaction edges.")
@click.option("--out", "out_dir", type=click.Path(path_type=Path), required=True)
def ingest(input_path, window_text, strict, max_tweets_per_day,
           max_self_mention_ratio, max_in_out_degree_ratio, min_weight,
           out_dir):
    """Parse, filter, extract the reciprocated core, build networks."""
    window = _window(window_text)
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(input_path, "rb") as fh:
        records, errors = parse_tweets(fh, strict=strict)
    if not records:
        raise click.ClickException("no parseable tweets in input")
    report = filter_users(records, FilterConfig(
        max_tweets_per_day=max_tweets_per_day,
        max_self_mention_ratio=max_self_mention_ratio,
        max_in_out_degree_ratio=max_in_out_degree_ratio))
    core = reciprocal_core(records, report.retained, window)
    if not core:
        raise click.ClickException("reciprocated-mention core is empty")
    users = sorted(core)
    net = build_evolving_network(records, users, window, binary=False)
    graph = build_interaction_graph(records, window, min_weight=min_weight,
                                    users=users)
    (out_dir / "filter_report.json").write_text(report.to_json() + "\n",
                                                encoding="utf-8")
    storage.write_network(net, out_dir)
    storage.write_mentions(records, out_dir / "mentions.csv", window, users)
    storage.write_interaction(graph, out_dir / "interaction.csv")
    if errors:
        storage.write_json([{"line": e.line_no, "error": e.message}
                            for e in errors], out_dir / "parse_errors.json")
    click.echo(f"retained {len(report.retained)} users, core {len(users)}; "
               f"{len(errors)} malformed lines")


@main.command("communicability")
@click.option("--network", "network_dir", type=click.Path(exists=True, path_type=Path),
              required=True, help="Directory with users.txt and network.csv.")
@click.option("--alpha", type=float, default=0.75, show_default=True)
@click.option("--truncation", type=int, default=10, show_default=True)
@click.option("--weighted", is_flag=True,
              help="Use mention counts instead of binary snapshots.")
@click.option("--eligible", type=click.Choice(["first-day", "all"]),
              default="first-day", show_default=True)
@click.option("--out", "out_path", type=click.Path(path_type=Path), required=True)
def communicability_cmd(network_dir, alpha, truncation, weighted, eligible,
                        out_path):
    """Broadcast/receive indices; output CSV user,broadcast,receive,rank."""
    net = storage.read_network(network_dir, binary=not weighted)
    cfg = communicability.CommunicabilityConfig(alpha, truncation)
    broadcast = communicability.broadcast_scores(net, cfg)
    receive = communicability.receive_scores(net, cfg)
    members = net.first_day_active() if eligible == "first-day" else net.users
    ranked = communicability.rank_by_score(broadcast, members)
    ranks = {u: i + 1 for i, u in enumerate(ranked)}
    out_path.parent.mkdir(parents=True, exist_ok=True)
    storage.write_scores(out_path, net.users, broadcast.scores,
                         receive.scores, ranks)
    click.echo(f"scored {net.n_users} users over {net.n_days} days "
               f"({len(ranked)} eligible)")


@main.command("sent-metrics")
@click.option("--scores", "scores_path", type=click.Path(exists=True, path_type=Path),
              required=True)
@click.option("--edges", "edges_dir", type=click.Path(exists=True, path_type=Path),
              required=True, help="Ingest output directory (mentions.csv).")
@scale_option
@click.option("--top", default="500,1000,5000", show_default=True,
              help="Comma-separated top-broadcaster group sizes.")
@click.option("--nsamples", type=int, default=100000, show_default=True)
@click.option("--ma-window", type=int, default=1000, show_default=True)
@click.option("--seed", type=int, required=True)
@click.option("--out", "out_path", type=click.Path(path_type=Path), required=True)
def sent_metrics(scores_path, edges_dir, scale_kind, top, nsamples,
                 ma_window, seed, out_path):
    """Top-broadcaster sentiment comparison with randomization p-values."""
    scores = storage.read_scores(scores_path)
    mentions = storage.read_mentions(Path(edges_dir) / "mentions.csv")
    tops = [int(t) for t in top.split(",") if t]
    report, table = pipe.sentiment_report(
        scores, mentions, _scale(scale_kind), tops, nsamples, seed, ma_window)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    storage.write_json(report, out_path)
    pipe.write_ma_table(table, out_path.with_suffix(".moving_avg.csv"))
    click.echo(f"report for {len(tops)} groups -> {out_path}")


@main.command()
@click.option("--graph", "graph_path", type=click.Path(exists=True, path_type=Path),
              required=True, help="Interaction graph CSV src,dst,weight.")
@click.option("--method", type=click.Choice(["louvain", "wlouvain", "kclique"]),
              default="louvain", show_default=True)
@click.option("--k", type=int, default=4, show_default=True,
              help="Clique size for kclique.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--stats", is_flag=True, help="Attach per-community statistics.")
@click.option("--mentions", "mentions_path", type=click.Path(path_type=Path),
              help="mentions.csv (required with --stats).")
@scale_option
@click.option("--window", "window_text", help="Window for --stats.")
@click.option("--min-size", type=int, default=2, show_default=True)
@click.option("--out", "out_dir", type=click.Path(path_type=Path), required=True)
def communities(graph_path, method, k, seed, stats, mentions_path, scale_kind,
                window_text, min_size, out_dir):
    """Detect communities; optionally profile each one."""
    graph = storage.read_interaction(graph_path)
    if method == "louvain":
        found = community.louvain(graph, use_weights=False, seed=seed)
    elif method == "wlouvain":
        found = community.louvain(graph, use_weights=True, seed=seed)
    else:
        found = community.k_clique_communities(graph, k)
    entries = []
    mentions = None
    window = _window(window_text) if window_text else None
    if stats:
        if not mentions_path or window is None:
            raise click.ClickException("--stats needs --mentions and --window")
        mentions = storage.read_mentions(mentions_path)
    for c in found:
        if len(c.members) < min_size:
            continue
        entry = {"id": c.id, "algorithm": c.source_algorithm,
                 "members": sorted(c.members)}
        if stats:
            entry["stats"] = community.community_stats(
                graph, mentions, c.members, _scale(scale_kind),
                window).as_dict()
        entries.append(entry)
    out_dir.mkdir(parents=True, exist_ok=True)
    storage.write_json(entries, out_dir / "communities.json")
    click.echo(f"{len(entries)} communities (method {method}) -> "
               f"{out_dir / 'communities.json'}")


@main.command()
@click.option("--mentions", "mentions_path", type=click.Path(exists=True, path_type=Path),
              required=True)
@click.option("--communities", "communities_path",
              type=click.Path(exists=True, path_type=Path), required=True)
@click.option("--period-a", "period_a_text", required=True,
              help="Earlier period START..END.")
@click.option("--period-b", "period_b_text", required=True,
              help="Later period START..END.")
@click.option("--out", "out_path", type=click.Path(path_type=Path), required=True)
def endure(mentions_path, communities_path, period_a_text, period_b_text,
           out_path):
    """User loss factors between two periods, per community."""
    mentions = storage.read_mentions(mentions_path)
    entries = storage.read_json(communities_path)
    period_a = _window(period_a_text)
    period_b = _window(period_b_text)
    rows = []
    for entry in entries:
        try:
            rec = community.user_loss_factor(mentions, entry["members"],
                                             period_a, period_b)
        except ValueError as exc:
            rows.append({"community": entry["id"], "error": str(exc)})
            continue
        rows.append({"community": entry["id"],
                     "active_a": rec.active_autumn,
                     "active_b": rec.active_spring,
                     "user_loss_factor": rec.user_loss_factor})
    out_path.parent.mkdir(parents=True, exist_ok=True)
    storage.write_json(rows, out_path)
    click.echo(f"endurance for {len(rows)} communities -> {out_path}")


@main.group()
def abm():
    """Agent-based model commands."""


@abm.command("build")
@click.option("--history", "history_path", type=click.Path(exists=True, path_type=Path),
              required=True, help="Tweet stream (JSON Lines).")
@click.option("--community", "members_path", type=click.Path(exists=True, path_type=Path),
              required=True, help="Member ids, one per line.")
@scale_option
@click.option("--window", "window_text", help="History window START..END.")
@click.option("--iterations-per-day", type=int, default=48, show_default=True)
@click.option("--mean-burst-size", type=float, default=1.5, show_default=True)
@click.option("--contagion-factor", type=float, default=0.1, show_default=True)
@click.option("--reset-probability", type=float, default=0.05, show_default=True)
@click.option("--sentiment-noise", type=float, default=1.0, show_default=True)
@click.option("--neighbour-threshold", type=int, default=1, show_default=True)
@click.option("--out", "out_path", type=click.Path(path_type=Path), required=True)
def abm_build(history_path, members_path, scale_kind, window_text,
              iterations_per_day, mean_burst_size, contagion_factor,
              reset_probability, sentiment_noise, neighbour_threshold,
              out_path):
    """Construct a model (graph + profiles) from history."""
    with open(history_path, "rb") as fh:
        records, _ = parse_tweets(fh)
    members = storage.read_users(members_path)
    params = GlobalParams(iterations_per_day, mean_burst_size,
                          contagion_factor, reset_probability,
                          sentiment_noise, neighbour_threshold)
    model = build_model(records, members, params, _scale(scale_kind),
                        _window(window_text) if window_text else None)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    out_path.write_text(model.to_json() + "\n", encoding="utf-8")
    click.echo(f"model with {model.n_agents} agents, "
               f"{model.graph.n_edges} edges -> {out_path}")


@abm.command("run")
@click.option("--model", "model_path", type=click.Path(exists=True, path_type=Path),
              required=True)
@click.option("--days", type=int, required=True)
@click.option("--seed", type=int, required=True)
@click.option("--backend", type=click.Choice(["auto", "compiled", "python"]),
              default="auto", show_default=True)
@click.option("--out", "out_path", type=click.Path(path_type=Path), required=True)
def abm_run(model_path, days, seed, backend, out_path):
    """Simulate; output CSV step,sender,recipient,burst,sentiment."""
    model = AgentModel.from_json(model_path.read_text(encoding="utf-8"))
    log = simulate(model, days, seed, backend=backend)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    storage.write_log(log, out_path)
    click.echo(f"{len(log)} bursts / {log.n_messages} messages -> {out_path}")


def _ranges_from_toml(path: Path, scale) -> cal.ParamRanges:
    base = cal.ParamRanges.defaults_for(scale)
    with open(path, "rb") as fh:
        data = tomllib.load(fh)
    overrides = {}
    for name, _ in base.dims():
        if name not in data:
            continue
        spec = data[name]
        if "values" in spec:
            overrides[name] = cal.GridDim(0, 0, values=tuple(spec["values"]))
        else:
            overrides[name] = cal.GridDim(
                float(spec["lo"]), float(spec["hi"]),
                int(spec.get("points", 5)),
                integer=bool(spec.get("integer", False)))
    from dataclasses import replace
    return replace(base, **overrides) if overrides else base


@main.command("calibrate")
@click.option("--history", "history_path", type=click.Path(exists=True, path_type=Path),
              required=True)
@click.option("--community", "members_path", type=click.Path(exists=True, path_type=Path),
              required=True)
@scale_option
@click.option("--window", "window_text", required=True)
@click.option("--ranges", "ranges_path", type=click.Path(exists=True, path_type=Path),
              help="TOML file with per-parameter search ranges.")
@click.option("--stages", type=int, default=5, show_default=True)
@click.option("--runs", type=int, default=50, show_default=True,
              help="Simulation runs per grid cell.")
@click.option("--seed", type=int, required=True)
@click.option("--out", "out_dir", type=click.Path(path_type=Path), required=True)
def calibrate_cmd(history_path, members_path, scale_kind, window_text,
                  ranges_path, stages, runs, seed, out_dir):
    """Zooming grid search of the six global parameters."""
    with open(history_path, "rb") as fh:
        records, _ = parse_tweets(fh)
    members = storage.read_users(members_path)
    scale = _scale(scale_kind)
    window = _window(window_text)
    real = moments_from_history(records, members, window, scale)
    ranges = (_ranges_from_toml(ranges_path, scale) if ranges_path
              else cal.ParamRanges.defaults_for(scale))
    builder = cal.make_history_builder(records, members, scale, window)
    result = cal.grid_search(builder, ranges, real, stages=stages,
                             runs_per_cell=runs, seed=seed)
    out_dir.mkdir(parents=True, exist_ok=True)
    storage.write_json(result.as_dict(), out_dir / "calibration.json")
    best_model = builder(result.best_params)
    (out_dir / "model_best.json").write_text(best_model.to_json() + "\n",
                                             encoding="utf-8")
    click.echo(f"best rho {result.best_score:.6g} at "
               f"{result.best_params.as_dict()}")


@main.command()
@click.option("--model", "model_path", type=click.Path(exists=True, path_type=Path),
              required=True)
@click.option("--strategy", "strategies", multiple=True,
              type=click.Choice(cal.STRATEGIES),
              help="Repeatable; defaults to all four.")
@click.option("--runs", type=int, default=100, show_default=True)
@click.option("--days", type=int, default=30, show_default=True)
@click.option("--multiplier", type=float, default=3.0, show_default=True)
@click.option("--seed", type=int, required=True)
@click.option("--out", "out_path", type=click.Path(path_type=Path), required=True)
def scenario(model_path, strategies, runs, days, multiplier, seed, out_path):
    """New-user befriending scenarios vs the unmodified baseline."""
    model = AgentModel.from_json(model_path.read_text(encoding="utf-8"))
    chosen = strategies or cal.STRATEGIES
    results = cal.scenario_compare(model, chosen, runs=runs, seed=seed,
                                   days=days, multiplier=multiplier)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    storage.write_json({name: m.as_dict() for name, m in results.items()},
                       out_path)
    click.echo(f"{len(chosen)} strategies + baseline -> {out_path}")


@main.command()
@click.argument("kind", type=click.Choice(pipe.REPORT_KINDS))
@click.option("--artifacts", "artifacts_dir", type=click.Path(exists=True, path_type=Path),
              required=True, help="Pipeline output directory.")
@scale_option
@click.option("--window", "window_text")
@click.option("--members", "members_path", type=click.Path(path_type=Path),
              help="Member ids file (daily-series).")
@click.option("--period-a", "period_a_text")
@click.option("--period-b", "period_b_text")
@click.option("--ma-window", type=int, default=1000, show_default=True)
@click.option("--out", "out_path", type=click.Path(path_type=Path), required=True)
def report(kind, artifacts_dir, scale_kind, window_text, members_path,
           period_a_text, period_b_text, ma_window, out_path):
    """Emit a plot-ready data file for one figure family."""
    out_path.parent.mkdir(parents=True, exist_ok=True)
    pipe.emit_report(
        artifacts_dir, kind, out_path,
        scale=_scale(scale_kind),
        window=_window(window_text) if window_text else None,
        members=storage.read_users(members_path) if members_path else None,
        period_a=_window(period_a_text) if period_a_text else None,
        period_b=_window(period_b_text) if period_b_text else None,
        ma_window=ma_window)
    click.echo(f"{kind} -> {out_path}")


@main.command("pipeline")
@click.option("--config", "config_path", type=click.Path(exists=True, path_type=Path),
              required=True, help="INI pipeline configuration.")
def pipeline_cmd(config_path):
    """Run configured stages in dependency order."""
    cfg = pipe.PipelineConfig.from_ini(config_path)
    try:
        done = pipe.run_pipeline(cfg)
    except pipe.PipelineError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)
    for stage, artifacts in done.items():
        click.echo(f"{stage}: {', '.join(artifacts)}")


if __name__ == "__main__":
    main()
