"""On-disk formats for every artifact the pipeline exchanges.

All writers are deterministic: fixed column orders, sorted keys, ISO
dates, shortest round-trip float formatting and "\n" line endings, so
re-running a stage with the same seed reproduces files byte for byte.

  users.txt        one user id per line (defines the node order)
  network.csv      day,src,dst,weight   daily directed mention counts
  mentions.csv     timestamp,src,dst,mc,ss,l  one row per mention event
  interaction.csv  src,dst,weight       undirected exchanged-message counts
  scores.csv       user,broadcast,receive,rank  (rank empty if ineligible)
  log.csv          step,sender,recipient,burst,sentiment
"""

from __future__ import annotations

import csv
import json
from datetime import date
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np
from scipy import sparse

from .core import (DateWindow, EvolvingMentionNetwork, TweetRecord,
                   WeightedInteractionGraph, parse_timestamp)
from .ingest import mention_events
from .abm.engine import MessageLog


def _fmt(x) -> str:
    if isinstance(x, float):
        return repr(x)
    return str(x)


def _writer(fh):
    return csv.writer(fh, lineterminator="\n")


def write_users(users: Sequence[str], path: Path) -> None:
    path.write_text("".join(f"{u}\n" for u in users), encoding="utf-8")


def read_users(path: Path) -> list[str]:
    return [line for line in path.read_text(encoding="utf-8").splitlines()
            if line]


def write_network(net: EvolvingMentionNetwork, directory: Path) -> None:
    """users.txt, window.txt and the sparse triplet CSV of per-day
    entries. Write the weighted network so binary loading stays
    lossless; window.txt keeps all-zero boundary days."""
    directory.mkdir(parents=True, exist_ok=True)
    write_users(net.users, directory / "users.txt")
    window = DateWindow(net.snapshots[0][0], net.snapshots[-1][0])
    (directory / "window.txt").write_text(f"{window}\n", encoding="utf-8")
    with open(directory / "network.csv", "w", encoding="utf-8", newline="") as fh:
        w = _writer(fh)
        w.writerow(["day", "src", "dst", "weight"])
        for day, mat in net.snapshots:
            coo = mat.tocoo()
            order = np.lexsort((coo.col, coo.row))
            for k in order:
                w.writerow([day.isoformat(), net.users[coo.row[k]],
                            net.users[coo.col[k]], _fmt(int(coo.data[k]))])


def read_network(directory: Path, binary: bool = True) -> EvolvingMentionNetwork:
    users = read_users(Path(directory) / "users.txt")
    index = {u: i for i, u in enumerate(users)}
    n = len(users)
    per_day: dict[date, list[tuple[int, int, float]]] = {}
    with open(Path(directory) / "network.csv", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            day = date.fromisoformat(row["day"])
            per_day.setdefault(day, []).append(
                (index[row["src"]], index[row["dst"]], float(row["weight"])))
    window_file = Path(directory) / "window.txt"
    if window_file.exists():
        window = DateWindow.from_string(window_file.read_text().strip())
    elif per_day:
        window = DateWindow(min(per_day), max(per_day))
    else:
        raise ValueError(f"empty network in {directory}")
    snapshots = []
    for day in window.days():
        triplets = per_day.get(day, [])
        if triplets:
            rows, cols, vals = zip(*triplets)
            vals = np.ones(len(vals)) if binary else np.array(vals)
            mat = sparse.csr_array((vals, (rows, cols)), shape=(n, n))
        else:
            mat = sparse.csr_array((n, n), dtype=np.float64)
        snapshots.append((day, mat))
    return EvolvingMentionNetwork(users, snapshots, binary=binary)


def write_mentions(tweets: Iterable[TweetRecord], path: Path,
                   window: Optional[DateWindow] = None,
                   users: Optional[Iterable[str]] = None) -> None:
    """One row per mention event (self-mentions excluded), with the
    scores of all three scales where present."""
    keep = None if users is None else set(users)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = _writer(fh)
        w.writerow(["timestamp", "src", "dst", "mc", "ss", "l"])
        for rec, m in mention_events(tweets, window):
            if keep is not None and (rec.sender not in keep or m not in keep):
                continue
            w.writerow([
                rec.timestamp.strftime("%Y-%m-%dT%H:%M:%SZ"),
                rec.sender, m,
                "" if rec.scores.get("mc") is None else _fmt(int(rec.scores["mc"])),
                "" if rec.scores.get("ss") is None else _fmt(int(rec.scores["ss"])),
                "" if rec.scores.get("l") is None else _fmt(float(rec.scores["l"])),
            ])


def read_mentions(path: Path) -> list[TweetRecord]:
    """Rebuild single-mention tweet records from mentions.csv."""
    records = []
    with open(path, encoding="utf-8", newline="") as fh:
        for i, row in enumerate(csv.DictReader(fh)):
            scores = {}
            for kind in ("mc", "ss", "l"):
                raw = row.get(kind, "")
                if raw:
                    scores[kind] = float(raw) if kind == "l" else int(raw)
            records.append(TweetRecord(
                tweet_id=f"m{i}",
                timestamp=parse_timestamp(row["timestamp"]),
                sender=row["src"],
                mentions=(row["dst"],),
                scores=scores,
            ))
    return records


def write_interaction(graph: WeightedInteractionGraph, path: Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = _writer(fh)
        w.writerow(["src", "dst", "weight"])
        for (a, b), weight in graph.edges.items():
            w.writerow([a, b, _fmt(int(weight))])


def read_interaction(path: Path,
                     users: Optional[Sequence[str]] = None,
                     ) -> WeightedInteractionGraph:
    edges = {}
    seen = set()
    with open(path, encoding="utf-8", newline="") as fh:
        for row in csv.DictReader(fh):
            edges[(row["src"], row["dst"])] = int(float(row["weight"]))
            seen.add(row["src"])
            seen.add(row["dst"])
    nodes = sorted(seen) if users is None else list(users)
    return WeightedInteractionGraph(nodes, edges)


def write_scores(path: Path, users: Sequence[str],
                 broadcast: Sequence[float], receive: Sequence[float],
                 ranks: dict[str, int]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = _writer(fh)
        w.writerow(["user", "broadcast", "receive", "rank"])
        for u, b, r in zip(users, broadcast, receive):
            w.writerow([u, _fmt(float(b)), _fmt(float(r)),
                        "" if u not in ranks else str(ranks[u])])


def read_scores(path: Path) -> list[dict]:
    rows = []
    with open(path, encoding="utf-8", newline="") as fh:
        for row in csv.DictReader(fh):
            rows.append({
                "user": row["user"],
                "broadcast": float(row["broadcast"]),
                "receive": float(row["receive"]),
                "rank": int(row["rank"]) if row["rank"] else None,
            })
    return rows


def write_log(log: MessageLog, path: Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = _writer(fh)
        w.writerow(["step", "sender", "recipient", "burst", "sentiment"])
        for step, s, r, burst, value in zip(log.steps, log.senders,
                                            log.recipients, log.bursts,
                                            log.sentiments):
            w.writerow([int(step), log.users[int(s)], log.users[int(r)],
                        int(burst), _fmt(float(value))])


def write_series(series, path: Path) -> None:
    """Daily sentiment series CSV; absent means are empty cells."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = _writer(fh)
        w.writerow(["date", "mean", "count"])
        for point in series:
            w.writerow([point.day.isoformat(),
                        "" if point.mean is None else _fmt(float(point.mean)),
                        point.count])


def write_json(obj, path: Path) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n",
                    encoding="utf-8")


def read_json(path: Path):
    return json.loads(path.read_text(encoding="utf-8"))
