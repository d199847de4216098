"""Binary score ingestion and per-row sample statistics."""
from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass, field
from typing import Optional

from .errors import ScoreError
from .generator import Plan

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ScoreDataset:
    plan: Plan
    observations: tuple  # ((row_id, sample_id, score), ...)

    def __post_init__(self):
        ids = set(self.plan.row_ids)
        seen = set()
        for rid, sid, score in self.observations:
            if rid not in ids:
                raise ScoreError(f"unknown row {rid}: not in plan")
            if (rid, sid) in seen:
                raise ScoreError(f"duplicate observation for row {rid}, sample {sid!r}")
            if score not in (0, 1) or isinstance(score, bool):
                raise ScoreError(f"score must be 0 or 1 (row {rid}, sample {sid!r})")
            seen.add((rid, sid))

    def __len__(self):
        return len(self.observations)

    def scores_by_row(self) -> dict:
        out = {rid: [] for rid in self.plan.row_ids}
        for rid, _, score in self.observations:
            out[rid].append(score)
        return out


@dataclass(frozen=True)
class RowStats:
    row_id: int
    n: int
    successes: int

    @property
    def mean(self) -> float:
        return self.successes / self.n

    @property
    def std(self) -> Optional[float]:
        """Sample standard deviation (n-1 denominator); ``None`` when n == 1."""
        if self.n < 2:
            return None
        p = self.mean
        return math.sqrt(p * (1 - p) * self.n / (self.n - 1))


@dataclass(frozen=True)
class SampleStats:
    rows: dict  # row_id -> RowStats, plan order
    unscored: tuple = field(default=())

    def __getitem__(self, row_id):
        return self.rows[row_id]

    def __len__(self):
        return len(self.rows)

    @property
    def total(self) -> int:
        return sum(r.n for r in self.rows.values())


def _parse_score(raw: str, rid, sid) -> int:
    raw = raw.strip()
    if raw in ("0", "1"):
        return int(raw)
    try:
        value = float(raw)
    except ValueError:
        value = None
    if value in (0.0, 1.0):
        return int(value)
    raise ScoreError(f"score must be 0 or 1, got {raw!r} (row {rid}, sample {sid!r})")


def ingest_scores(plan: Plan, document: str) -> ScoreDataset:
    """Parse a ``row_id,sample_id,score`` CSV against ``plan``."""
    reader = csv.reader(io.StringIO(document))
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise ScoreError("scores file is empty") from None
    if header != ["row_id", "sample_id", "score"]:
        raise ScoreError("scores header must be 'row_id,sample_id,score'")
    obs = []
    for lineno, rec in enumerate(reader, start=2):
        if not rec or all(not c.strip() for c in rec):
            continue
        if len(rec) != 3:
            raise ScoreError(f"scores line {lineno}: expected 3 fields")
        try:
            rid = int(rec[0])
        except ValueError:
            raise ScoreError(f"scores line {lineno}: row_id {rec[0]!r} is not an integer") from None
        sid = rec[1].strip()
        obs.append((rid, sid, _parse_score(rec[2], rid, sid)))
    if not obs:
        raise ScoreError("scores file has no observations")
    return ScoreDataset(plan, tuple(obs))


def dump_scores(dataset: ScoreDataset) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("row_id", "sample_id", "score"))
    w.writerows(dataset.observations)
    return buf.getvalue()


def sample_stats(dataset: ScoreDataset) -> SampleStats:
    """Count, mean and sample std per plan row; rows without scores are set aside."""
    counts = {rid: [0, 0] for rid in dataset.plan.row_ids}
    for rid, _, score in dataset.observations:
        counts[rid][0] += 1
        counts[rid][1] += score
    rows, unscored = {}, []
    for rid, (n, s) in counts.items():
        if n == 0:
            unscored.append(rid)
        else:
            rows[rid] = RowStats(rid, n, s)
    if unscored:
        log.warning("plan rows without scores (excluded): %s", ", ".join(map(str, unscored)))
    return SampleStats(rows, tuple(unscored))
