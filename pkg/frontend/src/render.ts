/**
 * Pure renderers: view state in, display rows out.
 *
 * Numeric values (scores, attention weights) pass through untouched; only
 * labels and bar widths are derived. The DOM layer binds these rows
 * verbatim, so "what the user sees" equals "what the service sent".
 */

import type { AttentionView, SessionView } from "./state.js";

export interface RankingDisplayRow {
  rank: number;
  videoId: string;
  score: number;
  deltaLabel: string;
}

export function deltaLabel(delta: number | null): string {
  if (delta === null) return "new";
  if (delta > 0) return `up ${delta}`;
  if (delta < 0) return `down ${-delta}`;
  return "same";
}

export function renderRanking(view: SessionView): RankingDisplayRow[] {
  return view.ranking.map((row) => ({
    rank: row.rank,
    videoId: row.videoId,
    score: row.score,
    deltaLabel: deltaLabel(row.delta),
  }));
}

export interface AttentionBar {
  frame: number;
  weight: number;
  /** bar width relative to the largest weight, in [0, 1]. */
  relativeWidth: number;
}

export interface AttentionDisplay {
  videoId: string;
  score: number;
  bars: AttentionBar[];
}

export function renderAttention(attention: AttentionView): AttentionDisplay {
  const peak = Math.max(...attention.weights);
  return {
    videoId: attention.videoId,
    score: attention.score,
    bars: attention.weights.map((weight, frame) => ({
      frame,
      weight,
      relativeWidth: peak > 0 ? weight / peak : 0,
    })),
  };
}

export function renderTranscript(view: SessionView): string[] {
  return view.transcript.map((text, index) => `${index + 1}. ${text}`);
}
