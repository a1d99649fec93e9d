/**
 * User-intent handlers: each takes the current view, talks to the service,
 * and returns the next view. One submission = exactly one POST turn plus
 * exactly one ranking re-fetch; concurrent submissions are blocked while
 * one is in flight (the submit control is disabled off the busy flag).
 */

import { ApiClient, ApiError } from "./api.js";
import {
  SessionView,
  appendTurn,
  applyRanking,
  dismissNotice,
  initialView,
  setAttention,
  setBusy,
  setError,
  setK,
  setNotice,
  setTranscript,
} from "./state.js";

export async function startSession(client: ApiClient, k?: number): Promise<SessionView> {
  const created = await client.createSession();
  return initialView(created.session_id, k);
}

/** Re-fetch an existing session (e.g. after a page refresh): transcript and
 * current ranking both come back from the server. */
export async function restoreSession(
  client: ApiClient,
  sessionId: string,
  k: number = 5,
): Promise<SessionView> {
  const state = await client.fetchSession(sessionId);
  let view = initialView(sessionId, k);
  if (state.texts !== null) {
    view = setTranscript(view, state.texts);
  }
  if (state.num_turns > 0) {
    view = applyRanking(view, await client.fetchRanking(sessionId, view.k));
  }
  return view;
}

export async function submitTurn(
  client: ApiClient,
  view: SessionView,
  text: string,
): Promise<SessionView> {
  const trimmed = text.trim();
  if (trimmed === "") {
    return setNotice(view, "enter a dialogue turn first");
  }
  if (view.busy) {
    return view;
  }
  let next = setBusy(dismissNotice(view), true);
  try {
    await client.postTurn(view.sessionId, trimmed);
    const ranking = await client.fetchRanking(view.sessionId, next.k);
    next = applyRanking(appendTurn(next, trimmed), ranking);
    return setBusy(next, false);
  } catch (error) {
    if (error instanceof ApiError) {
      return setError(next, `turn failed: ${error.message}`);
    }
    throw error;
  }
}

export async function selectVideo(
  client: ApiClient,
  view: SessionView,
  videoId: string,
): Promise<SessionView> {
  try {
    return setAttention(view, await client.fetchAttention(view.sessionId, videoId));
  } catch (error) {
    if (error instanceof ApiError && error.status === 404) {
      return setNotice(view, `video ${videoId} is not in the index`);
    }
    throw error;
  }
}

export async function changeK(
  client: ApiClient,
  view: SessionView,
  k: number,
): Promise<SessionView> {
  const next = setK(view, k);
  if (next.transcript.length === 0 && next.ranking.length === 0) {
    return next;
  }
  return applyRanking(next, await client.fetchRanking(next.sessionId, k));
}
