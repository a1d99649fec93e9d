/**
 * Session view state: a plain immutable object derived solely from service
 * responses. No score arithmetic happens here beyond rank deltas between
 * two server-delivered rankings.
 */

import type { Attention, Ranking } from "./api.js";

export const K_CHOICES = [1, 5, 10] as const;

export interface RankedRow {
  rank: number;
  videoId: string;
  score: number;
  /** previous rank minus current rank: positive = moved up; null = new. */
  delta: number | null;
}

export interface AttentionView {
  videoId: string;
  score: number;
  weights: number[];
}

export interface SessionView {
  sessionId: string;
  transcript: string[];
  k: number;
  ranking: RankedRow[];
  attention: AttentionView | null;
  /** true while a turn submission round trip is in flight. */
  busy: boolean;
  error: string | null;
  notice: string | null;
}

export function initialView(sessionId: string, k: number = 5): SessionView {
  return {
    sessionId,
    transcript: [],
    k,
    ranking: [],
    attention: null,
    busy: false,
    error: null,
    notice: null,
  };
}

export function applyRanking(view: SessionView, payload: Ranking): SessionView {
  const previous = new Map(view.ranking.map((row) => [row.videoId, row.rank]));
  const ranking = payload.results.map((entry) => {
    const before = previous.get(entry.video_id);
    return {
      rank: entry.rank,
      videoId: entry.video_id,
      score: entry.score,
      delta: before === undefined ? null : before - entry.rank,
    };
  });
  return { ...view, ranking, error: null };
}

export function appendTurn(view: SessionView, text: string): SessionView {
  return { ...view, transcript: [...view.transcript, text] };
}

export function setTranscript(view: SessionView, texts: string[]): SessionView {
  return { ...view, transcript: [...texts] };
}

export function setAttention(view: SessionView, payload: Attention): SessionView {
  return {
    ...view,
    attention: {
      videoId: payload.video_id,
      score: payload.score,
      weights: [...payload.weights],
    },
  };
}

export function setBusy(view: SessionView, busy: boolean): SessionView {
  return { ...view, busy };
}

export function setError(view: SessionView, error: string): SessionView {
  return { ...view, error, busy: false };
}

export function setNotice(view: SessionView, notice: string): SessionView {
  return { ...view, notice };
}

export function dismissNotice(view: SessionView): SessionView {
  return { ...view, notice: null };
}

export function setK(view: SessionView, k: number): SessionView {
  if (!K_CHOICES.some((choice) => choice === k)) {
    throw new Error(`k must be one of ${K_CHOICES.join(", ")}, got ${k}`);
  }
  return { ...view, k };
}
