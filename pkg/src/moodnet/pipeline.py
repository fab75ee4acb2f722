"""Pipeline driver: executes requested stages in dependency order with a
single seed, writing each stage's artifacts plus a manifest recording
the config hash and seed. Also renders plot-ready report files from the
artifacts.

Config files are INI (flat key-value with sections); see the README for
the grammar. Artifacts are deterministic for a fixed config and seed,
independent of MOODNET_THREADS.
"""

from __future__ import annotations

import configparser
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from . import calibrate as cal
from . import communicability
from . import community
from . import sentiment as sent
from .abm import (GlobalParams, build_model, moments_from_history, simulate)
from .core import DateWindow, SCALES, SentimentScale
from .ingest import FilterConfig, build_evolving_network, build_interaction_graph, \
    filter_users, parse_tweets, reciprocal_core
from . import storage

STAGE_ORDER = ("ingest", "communicability", "communities", "sent-metrics",
               "abm", "calibrate", "scenario")

REPORT_KINDS = ("broadcast-vs-sentiment", "endurance", "daily-series",
                "calibration", "scenario")


class PipelineError(RuntimeError):
    def __init__(self, stage: str, message: str):
        super().__init__(f"stage {stage}: {message}")
        self.stage = stage
        self.message = message


@dataclass
class PipelineConfig:
    stages: tuple[str, ...]
    seed: int
    out_dir: Path
    tweets_path: Optional[Path]
    window: Optional[DateWindow]
    scale: SentimentScale
    options: dict[str, dict[str, str]] = field(default_factory=dict)

    @classmethod
    def from_ini(cls, path: Path) -> "PipelineConfig":
        parser = configparser.ConfigParser()
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
        pipe = parser["pipeline"]
        stages = tuple(s.strip() for s in pipe.get("stages", "").split(",")
                       if s.strip())
        unknown = [s for s in stages if s not in STAGE_ORDER]
        if unknown:
            raise ValueError(f"unknown stages: {unknown}")
        window = None
        if parser.has_section("window"):
            window = DateWindow.from_string(
                f"{parser['window']['start']}..{parser['window']['end']}")
        tweets = None
        if parser.has_section("input") and parser["input"].get("tweets"):
            tweets = Path(parser["input"]["tweets"])
            if not tweets.is_absolute():
                tweets = path.parent / tweets
        scale_kind = (parser["scale"]["kind"]
                      if parser.has_section("scale") else "ss")
        out_dir = Path(pipe.get("out", "out"))
        if not out_dir.is_absolute():
            out_dir = path.parent / out_dir
        options = {section: dict(parser[section])
                   for section in parser.sections()}
        return cls(stages=stages, seed=pipe.getint("seed", 0),
                   out_dir=out_dir, tweets_path=tweets, window=window,
                   scale=SCALES[scale_kind], options=options)

    def opt(self, section: str, key: str, default: str = "") -> str:
        return self.options.get(section, {}).get(key, default)

    def config_hash(self) -> str:
        canon = {
            "stages": list(self.stages),
            "seed": self.seed,
            "tweets": str(self.tweets_path),
            "window": str(self.window),
            "scale": self.scale.kind,
            "options": {k: dict(sorted(v.items()))
                        for k, v in sorted(self.options.items())},
        }
        return hashlib.sha256(
            json.dumps(canon, sort_keys=True).encode()).hexdigest()


def _manifest(cfg: PipelineConfig, stage: str, directory: Path,
              artifacts: list[str]) -> None:
    storage.write_json(
        {"stage": stage, "seed": cfg.seed, "config_sha256": cfg.config_hash(),
         "artifacts": sorted(artifacts)},
        directory / "manifest.json")


def _require(path: Path, stage: str, hint: str) -> Path:
    if not path.exists():
        raise PipelineError(stage, f"missing upstream artifact {path} ({hint})")
    return path


def _stage_dir(cfg: PipelineConfig, stage: str) -> Path:
    d = cfg.out_dir / stage
    d.mkdir(parents=True, exist_ok=True)
    return d


def _read_tweets(cfg: PipelineConfig, stage: str):
    if cfg.tweets_path is None:
        raise PipelineError(stage, "no input tweets configured")
    strict = cfg.opt("ingest", "strict", "false").lower() == "true"
    with open(cfg.tweets_path, "rb") as fh:
        return parse_tweets(fh, strict=strict)


def stage_ingest(cfg: PipelineConfig) -> list[str]:
    stage = "ingest"
    if cfg.window is None:
        raise PipelineError(stage, "no window configured")
    out = _stage_dir(cfg, stage)
    records, errors = _read_tweets(cfg, stage)
    if not records:
        raise PipelineError(stage, "no parseable tweets")
    fc = FilterConfig(
        max_tweets_per_day=float(cfg.opt(stage, "max_tweets_per_day", "200")),
        max_self_mention_ratio=float(
            cfg.opt(stage, "max_self_mention_ratio", "0.5")),
        max_in_out_degree_ratio=float(
            cfg.opt(stage, "max_in_out_degree_ratio", "50")),
        min_tweets_for_frequency=int(
            cfg.opt(stage, "min_tweets_for_frequency", "200")),
    )
    report = filter_users(records, fc)
    core = reciprocal_core(records, report.retained, cfg.window)
    if not core:
        raise PipelineError(stage, "reciprocated-mention core is empty")
    users = sorted(core)
    net = build_evolving_network(records, users, cfg.window, binary=False)
    min_weight = int(cfg.opt(stage, "min_weight", "1"))
    graph = build_interaction_graph(records, cfg.window,
                                    min_weight=min_weight, users=users)
    (out / "filter_report.json").write_text(report.to_json() + "\n",
                                            encoding="utf-8")
    storage.write_network(net, out)
    storage.write_mentions(records, out / "mentions.csv", cfg.window, users)
    storage.write_interaction(graph, out / "interaction.csv")
    if errors:
        storage.write_json([{"line": e.line_no, "error": e.message}
                            for e in errors], out / "parse_errors.json")
    artifacts = ["filter_report.json", "users.txt", "window.txt",
                 "network.csv", "mentions.csv", "interaction.csv"]
    if errors:
        artifacts.append("parse_errors.json")
    _manifest(cfg, stage, out, artifacts)
    return artifacts


def stage_communicability(cfg: PipelineConfig) -> list[str]:
    stage = "communicability"
    out = _stage_dir(cfg, stage)
    ingest_dir = cfg.out_dir / "ingest"
    _require(ingest_dir / "network.csv", stage, "run ingest first")
    weighted = cfg.opt(stage, "weighted", "false").lower() == "true"
    net = storage.read_network(ingest_dir, binary=not weighted)
    ccfg = communicability.CommunicabilityConfig(
        alpha=float(cfg.opt(stage, "alpha", "0.75")),
        truncation_order=int(cfg.opt(stage, "truncation", "10")))
    broadcast = communicability.broadcast_scores(net, ccfg)
    receive = communicability.receive_scores(net, ccfg)
    eligible_mode = cfg.opt(stage, "eligible", "first-day")
    if eligible_mode == "first-day":
        eligible = net.first_day_active()
    elif eligible_mode == "all":
        eligible = frozenset(net.users)
    else:
        raise PipelineError(stage, f"unknown eligibility {eligible_mode!r}")
    ranked = communicability.rank_by_score(broadcast, eligible)
    ranks = {u: i + 1 for i, u in enumerate(ranked)}
    storage.write_scores(out / "scores.csv", net.users,
                         broadcast.scores, receive.scores, ranks)
    _manifest(cfg, stage, out, ["scores.csv"])
    return ["scores.csv"]


def stage_communities(cfg: PipelineConfig) -> list[str]:
    stage = "communities"
    out = _stage_dir(cfg, stage)
    ingest_dir = cfg.out_dir / "ingest"
    graph = storage.read_interaction(
        _require(ingest_dir / "interaction.csv", stage, "run ingest first"))
    method = cfg.opt(stage, "method", "louvain")
    if method == "louvain":
        found = community.louvain(graph, use_weights=False, seed=cfg.seed)
    elif method == "wlouvain":
        found = community.louvain(graph, use_weights=True, seed=cfg.seed)
    elif method == "kclique":
        found = community.k_clique_communities(graph, int(cfg.opt(stage, "k", "4")))
    else:
        raise PipelineError(stage, f"unknown method {method!r}")
    min_size = int(cfg.opt(stage, "min_size", "2"))
    mentions = storage.read_mentions(
        _require(ingest_dir / "mentions.csv", stage, "run ingest first"))
    entries = []
    for c in found:
        if len(c.members) < min_size:
            continue
        entry = {"id": c.id, "algorithm": c.source_algorithm,
                 "members": sorted(c.members)}
        if cfg.window is not None:
            entry["stats"] = community.community_stats(
                graph, mentions, c.members, cfg.scale, cfg.window).as_dict()
        entries.append(entry)
    storage.write_json(entries, out / "communities.json")
    _manifest(cfg, stage, out, ["communities.json"])
    return ["communities.json"]


def stage_sent_metrics(cfg: PipelineConfig) -> list[str]:
    stage = "sent-metrics"
    out = _stage_dir(cfg, stage)
    scores = storage.read_scores(
        _require(cfg.out_dir / "communicability" / "scores.csv", stage,
                 "run communicability first"))
    mentions = storage.read_mentions(
        _require(cfg.out_dir / "ingest" / "mentions.csv", stage,
                 "run ingest first"))
    tops = [int(t) for t in cfg.opt(stage, "top", "500,1000,5000").split(",")]
    n_samples = int(cfg.opt(stage, "nsamples", "100000"))
    ma_window = int(cfg.opt(stage, "ma_window", "1000"))
    report, ma_table = sentiment_report(
        scores, mentions, cfg.scale, tops, n_samples, cfg.seed, ma_window)
    storage.write_json(report, out / "report.json")
    write_ma_table(ma_table, out / "moving_avg.csv")
    _manifest(cfg, stage, out, ["report.json", "moving_avg.csv"])
    return ["report.json", "moving_avg.csv"]


def sentiment_report(scores: list[dict], mentions, scale: SentimentScale,
                     tops: list[int], n_samples: int, seed: int,
                     ma_window: int):
    """Group means, one-sided randomization p-values (direction chosen by
    the observed difference) and moving-average-by-rank series."""
    attrs = sent.attributes_by_user(mentions, scale)
    ranked = [r["user"] for r in sorted(
        (r for r in scores if r["rank"] is not None), key=lambda r: r["rank"])]
    ranked = [u for u in ranked if u in attrs]
    if not ranked:
        raise ValueError("no ranked users with sentiment attributes")
    population = list(attrs)
    pop_means = sent.group_means(attrs, population)
    report = {
        "scale": scale.kind,
        "n_population": len(population),
        "n_ranked": len(ranked),
        "population_means": pop_means.as_dict(),
        "groups": {},
        "p_values": {},
    }
    for top in tops:
        k = min(top, len(ranked))
        subset = ranked[:k]
        g = sent.group_means(attrs, subset)
        report["groups"][str(top)] = {"size": k, "means": g.as_dict()}
        pvals = {}
        for name in sent.ATTRIBUTE_NAMES:
            observed = getattr(g, name)
            side = "lower" if observed < getattr(pop_means, name) else "upper"
            pvals[name] = {
                "observed": observed,
                "side": side,
                "p": sent.randomization_pvalue(
                    attrs, k, observed, name, n_samples, side, seed=seed),
            }
        report["p_values"][str(top)] = pvals
    window = min(ma_window, len(ranked))
    table = {"start_rank": list(range(1, len(ranked) - window + 2))}
    for name in sent.ATTRIBUTE_NAMES:
        values = [getattr(attrs[u], name) for u in ranked]
        table[name] = [float(x) for x in
                       sent.moving_average_by_rank(values, window)]
    return report, table


def write_ma_table(table: dict, path: Path) -> None:
    import csv

    names = [k for k in table if k != "start_rank"]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["start_rank"] + names)
        for i, rank in enumerate(table["start_rank"]):
            w.writerow([rank] + [repr(table[name][i]) for name in names])


def _abm_community(cfg: PipelineConfig, stage: str) -> list[str]:
    choice = cfg.opt(stage, "community", "largest")
    if choice == "largest":
        path = _require(cfg.out_dir / "communities" / "communities.json",
                        stage, "run communities first or give a members file")
        entries = storage.read_json(path)
        if not entries:
            raise PipelineError(stage, "no communities detected")
        best = max(entries, key=lambda e: (len(e["members"]), e["id"]))
        return list(best["members"])
    members_path = Path(choice)
    if not members_path.is_absolute() and not members_path.exists():
        members_path = cfg.out_dir / choice
    return storage.read_users(_require(members_path, stage, "members file"))


def _global_params(cfg: PipelineConfig, section: str) -> GlobalParams:
    return GlobalParams(
        iterations_per_day=int(cfg.opt(section, "iterations_per_day", "48")),
        mean_burst_size=float(cfg.opt(section, "mean_burst_size", "1.5")),
        contagion_factor=float(cfg.opt(section, "contagion_factor", "0.1")),
        reset_probability=float(cfg.opt(section, "reset_probability", "0.05")),
        sentiment_noise=float(cfg.opt(section, "sentiment_noise", "1.0")),
        neighbour_threshold=int(cfg.opt(section, "neighbour_threshold", "1")),
    )


def stage_abm(cfg: PipelineConfig) -> list[str]:
    stage = "abm"
    out = _stage_dir(cfg, stage)
    mentions = storage.read_mentions(
        _require(cfg.out_dir / "ingest" / "mentions.csv", stage,
                 "run ingest first"))
    members = _abm_community(cfg, stage)
    model = build_model(mentions, members, _global_params(cfg, stage),
                        cfg.scale, cfg.window)
    days = int(cfg.opt(stage, "days",
                       str(cfg.window.n_days if cfg.window else 7)))
    log = simulate(model, days, cfg.seed)
    (out / "model.json").write_text(model.to_json() + "\n", encoding="utf-8")
    storage.write_log(log, out / "log.csv")
    _manifest(cfg, stage, out, ["model.json", "log.csv"])
    return ["model.json", "log.csv"]


def _parse_grid(text: str) -> cal.GridDim:
    """Grid grammar: "a,b,c" explicit values; "lo:hi:points[:int]" range."""
    text = text.strip()
    if ":" in text:
        parts = text.split(":")
        lo, hi, points = float(parts[0]), float(parts[1]), int(parts[2])
        integer = len(parts) > 3 and parts[3] == "int"
        return cal.GridDim(lo, hi, points, integer=integer)
    values = tuple(float(v) for v in text.split(","))
    return cal.GridDim(0, 0, values=values)


def calibration_ranges(cfg: PipelineConfig, section: str,
                       scale: SentimentScale) -> cal.ParamRanges:
    base = cal.ParamRanges.defaults_for(scale)
    overrides = {}
    for name, _ in base.dims():
        raw = cfg.opt(section, name)
        if raw:
            overrides[name] = _parse_grid(raw)
    if not overrides:
        return base
    from dataclasses import replace
    return replace(base, **overrides)


def stage_calibrate(cfg: PipelineConfig) -> list[str]:
    stage = "calibrate"
    out = _stage_dir(cfg, stage)
    if cfg.window is None:
        raise PipelineError(stage, "calibration needs a window")
    mentions = storage.read_mentions(
        _require(cfg.out_dir / "ingest" / "mentions.csv", stage,
                 "run ingest first"))
    members = _abm_community(cfg, stage)
    real = moments_from_history(mentions, members, cfg.window, cfg.scale)
    builder = cal.make_history_builder(mentions, members, cfg.scale, cfg.window)
    result = cal.grid_search(
        builder,
        calibration_ranges(cfg, stage, cfg.scale),
        real,
        stages=int(cfg.opt(stage, "stages", "5")),
        runs_per_cell=int(cfg.opt(stage, "runs", "50")),
        seed=cfg.seed,
    )
    storage.write_json(result.as_dict(), out / "calibration.json")
    best_model = builder(result.best_params)
    (out / "model_best.json").write_text(best_model.to_json() + "\n",
                                         encoding="utf-8")
    _manifest(cfg, stage, out, ["calibration.json", "model_best.json"])
    return ["calibration.json", "model_best.json"]


def stage_scenario(cfg: PipelineConfig) -> list[str]:
    stage = "scenario"
    out = _stage_dir(cfg, stage)
    source = cfg.opt(stage, "model", "calibrate")
    candidates = {
        "calibrate": cfg.out_dir / "calibrate" / "model_best.json",
        "abm": cfg.out_dir / "abm" / "model.json",
    }
    path = candidates.get(source, Path(source))
    from .abm import AgentModel

    model = AgentModel.from_json(
        _require(path, stage, "run abm or calibrate first").read_text())
    strategies = [s.strip() for s in
                  cfg.opt(stage, "strategies", ",".join(cal.STRATEGIES)).split(",")
                  if s.strip()]
    results = cal.scenario_compare(
        model, strategies,
        runs=int(cfg.opt(stage, "runs", "100")),
        seed=cfg.seed,
        days=int(cfg.opt(stage, "days", "30")),
        multiplier=float(cfg.opt(stage, "multiplier", "3.0")))
    storage.write_json({name: m.as_dict() for name, m in results.items()},
                       out / "scenario.json")
    _manifest(cfg, stage, out, ["scenario.json"])
    return ["scenario.json"]


_STAGE_FN = {
    "ingest": stage_ingest,
    "communicability": stage_communicability,
    "communities": stage_communities,
    "sent-metrics": stage_sent_metrics,
    "abm": stage_abm,
    "calibrate": stage_calibrate,
    "scenario": stage_scenario,
}


def run_pipeline(cfg: PipelineConfig) -> dict[str, list[str]]:
    """Execute the requested stages in dependency order. On failure an
    errors.json record is written and PipelineError raised."""
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    done: dict[str, list[str]] = {}
    for stage in STAGE_ORDER:
        if stage not in cfg.stages:
            continue
        try:
            done[stage] = _STAGE_FN[stage](cfg)
        except PipelineError as exc:
            storage.write_json([{"stage": exc.stage, "error": exc.message}],
                               cfg.out_dir / "errors.json")
            raise
        except Exception as exc:
            storage.write_json([{"stage": stage, "error": str(exc)}],
                               cfg.out_dir / "errors.json")
            raise PipelineError(stage, str(exc)) from exc
    return done


# ---------------------------------------------------------------------------
# reports: plot-ready data files derived from pipeline artifacts


def emit_report(artifacts_dir: Path, kind: str, out_path: Path,
                scale: Optional[SentimentScale] = None,
                window: Optional[DateWindow] = None,
                members: Optional[list[str]] = None,
                period_a: Optional[DateWindow] = None,
                period_b: Optional[DateWindow] = None,
                ma_window: int = 1000) -> Path:
    """Write one plot-ready file per figure family; returns the path."""
    artifacts_dir = Path(artifacts_dir)
    if kind == "daily-series":
        if scale is None or window is None or not members:
            raise ValueError("daily-series needs scale, window and members")
        mentions = storage.read_mentions(artifacts_dir / "ingest" / "mentions.csv")
        series = community.daily_sentiment_series(mentions, members, scale, window)
        storage.write_series(series, out_path)
    elif kind == "broadcast-vs-sentiment":
        if scale is None:
            raise ValueError("broadcast-vs-sentiment needs a scale")
        scores = storage.read_scores(
            artifacts_dir / "communicability" / "scores.csv")
        mentions = storage.read_mentions(artifacts_dir / "ingest" / "mentions.csv")
        _, table = sentiment_report(scores, mentions, scale, tops=[],
                                    n_samples=1, seed=0, ma_window=ma_window)
        write_ma_table(table, out_path)
    elif kind == "endurance":
        if scale is None or period_a is None or period_b is None:
            raise ValueError("endurance needs scale and both periods")
        mentions = storage.read_mentions(artifacts_dir / "ingest" / "mentions.csv")
        graph = storage.read_interaction(artifacts_dir / "ingest" / "interaction.csv")
        entries = storage.read_json(
            artifacts_dir / "communities" / "communities.json")
        _write_endurance(entries, mentions, graph, scale,
                         period_a, period_b, out_path)
    elif kind == "calibration":
        result = storage.read_json(
            artifacts_dir / "calibrate" / "calibration.json")
        _write_calibration_table(result, out_path)
    elif kind == "scenario":
        result = storage.read_json(artifacts_dir / "scenario" / "scenario.json")
        _write_scenario_table(result, out_path)
    else:
        raise ValueError(f"unknown report kind {kind!r}; "
                         f"expected one of {REPORT_KINDS}")
    return out_path


def _write_endurance(entries, mentions, graph, scale, period_a, period_b,
                     out_path: Path) -> None:
    import csv

    rows = []
    for entry in entries:
        members = entry["members"]
        try:
            rec = community.user_loss_factor(mentions, members, period_a, period_b)
        except ValueError:
            continue
        sent_a = community.daily_sentiment_series(mentions, members, scale, period_a)
        scored = [(p.mean, p.count) for p in sent_a if p.mean is not None]
        total = sum(c for _, c in scored)
        mean_sent = (sum(m * c for m, c in scored) / total) if total else None
        cond = (community.conductance(graph, members)
                if 0 < len(members) < graph.n_users else None)
        rows.append({
            "community": entry["id"],
            "size": len(members),
            "active_a": rec.active_autumn,
            "active_b": rec.active_spring,
            "user_loss_factor": rec.user_loss_factor,
            "conductance": cond,
            "mean_sentiment_a": mean_sent,
        })
    with open(out_path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        header = ["community", "size", "active_a", "active_b",
                  "user_loss_factor", "conductance", "mean_sentiment_a"]
        w.writerow(header)
        for row in rows:
            w.writerow(["" if row[k] is None else
                        (repr(row[k]) if isinstance(row[k], float) else row[k])
                        for k in header])


def _write_calibration_table(result: dict, out_path: Path) -> None:
    import csv

    with open(out_path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        names = [name for name, _ in cal.ParamRanges().dims()]
        w.writerow(["stage"] + names + ["rho"])
        for stage in result["stages"]:
            for cell in stage["cells"]:
                w.writerow([stage["stage"]]
                           + [repr(float(cell["params"][n])) for n in names]
                           + [repr(float(cell["rho"]))])


def _write_scenario_table(result: dict, out_path: Path) -> None:
    import csv

    with open(out_path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["strategy", "activity_mean", "activity_std",
                    "sentiment_mean", "sentiment_std"])
        order = ["baseline"] + [k for k in result if k != "baseline"]
        for name in order:
            m = result[name]
            w.writerow([name] + [repr(float(m[k])) for k in
                                 ("activity_mean", "activity_std",
                                  "sentiment_mean", "sentiment_std")])
