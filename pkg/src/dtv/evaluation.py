"""Ranking metrics and the dialogue-rounds ablation.

Gold ranks use a deterministic tie rule so results are reproducible across
platforms: a tied candidate counts as ahead of the gold video only when its
id sorts before the gold id. Float ties really happen here (an untrained
zero-initialized query projection scores every video identically), so the
rule is part of the contract, not a corner case.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autograd import Tensor
from .model import DialogueQuery, ModelParams, VideoRecord, score_matrix


@dataclass
class RankingResult:
    """Full ranking for one query: candidates best-first plus the gold rank."""

    query_id: str
    ranking: list[tuple[str, float]]
    gold_video_id: str
    gold_rank: int


def _as_array(scores) -> np.ndarray:
    data = scores.data if isinstance(scores, Tensor) else np.asarray(scores, dtype=np.float64)
    if data.ndim != 2:
        raise ValueError(f"scores must be a Q x V matrix, got shape {data.shape}")
    return data


def compute_ranks(scores, gold_indices, video_ids: list[str]) -> list[int]:
    """Gold rank per query: 1 + (strictly better candidates) + (tied
    candidates whose video-id sorts before the gold id)."""
    s = _as_array(scores)
    q, v = s.shape
    if len(video_ids) != v:
        raise ValueError(f"{len(video_ids)} video ids for {v} score columns")
    ranks = []
    id_arr = np.array(video_ids)
    for qi, gold in enumerate(gold_indices):
        if not (0 <= gold < v):
            raise ValueError(f"query {qi}: gold index {gold} outside candidate set of {v}")
        row = s[qi]
        gold_score = row[gold]
        better = int(np.sum(row > gold_score))
        tied = (row == gold_score) & (id_arr < id_arr[gold])
        ranks.append(1 + better + int(np.sum(tied)))
    return ranks


def rank_candidates(scores_row, video_ids: list[str]) -> list[tuple[str, float]]:
    """Candidates sorted best-first, ties broken by ascending video-id."""
    row = np.asarray(scores_row, dtype=np.float64).reshape(-1)
    if row.shape[0] != len(video_ids):
        raise ValueError(f"{len(video_ids)} video ids for {row.shape[0]} scores")
    order = sorted(range(len(video_ids)), key=lambda i: (-row[i], video_ids[i]))
    return [(video_ids[i], float(row[i])) for i in order]


def recall_at_k(ranks: list[int], k: int) -> float:
    if not ranks:
        raise ValueError("ranks must be non-empty")
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    return sum(1 for r in ranks if r <= k) / len(ranks)


def median_rank(ranks: list[int]) -> float:
    if not ranks:
        raise ValueError("ranks must be non-empty")
    return float(np.median(ranks))


def mean_rank(ranks: list[int]) -> float:
    if not ranks:
        raise ValueError("ranks must be non-empty")
    return float(np.mean(ranks))


def metrics_from_ranks(ranks: list[int]) -> dict:
    return {
        "r1": recall_at_k(ranks, 1),
        "r5": recall_at_k(ranks, 5),
        "r10": recall_at_k(ranks, 10),
        "med_rank": median_rank(ranks),
        "mean_rank": mean_rank(ranks),
        "num_queries": len(ranks),
    }


def evaluate(
    params: ModelParams,
    videos: list[VideoRecord],
    queries: list[DialogueQuery],
    rounds: int | None = None,
) -> dict:
    """Score every query against every video and report the metric suite.

    Gold pairing is by id: each query's gold video is the one sharing its
    id. Queries whose id has no video raise, matching the precondition that
    the gold video is in the candidate set.
    """
    if not videos or not queries:
        raise ValueError("evaluation needs at least one video and one query")
    video_ids = [v.video_id for v in videos]
    index_of = {vid: i for i, vid in enumerate(video_ids)}
    gold = []
    for q in queries:
        if q.query_id not in index_of:
            raise ValueError(f"query {q.query_id!r} has no gold video in the candidate set")
        gold.append(index_of[q.query_id])
    scores = score_matrix(queries, videos, params, rounds=rounds)
    ranks = compute_ranks(scores, gold, video_ids)
    return metrics_from_ranks(ranks)


def rounds_ablation(
    params: ModelParams,
    videos: list[VideoRecord],
    queries: list[DialogueQuery],
    rounds_list: list[int] | None = None,
) -> list[dict]:
    """Metric suite per round budget: queries truncated to their first r
    turns (prefix row r in cumulative mode, r recurrence steps in per-turn
    mode). Returns one report per r, each tagged with its round count."""
    max_turns = min(q.num_turns for q in queries)
    if rounds_list is None:
        rounds_list = list(range(1, max_turns + 1))
    curve = []
    for r in rounds_list:
        if not (1 <= r <= max_turns):
            raise ValueError(
                f"round count {r} outside the available 1..{max_turns} turns"
            )
        report = evaluate(params, videos, queries, rounds=r)
        report["rounds"] = r
        curve.append(report)
    return curve
