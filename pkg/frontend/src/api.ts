/**
 * Typed client for the retrieval service HTTP API.
 *
 * Every response is validated against a strict schema before use, so any
 * drift between service and client fails loudly in one place. The view
 * layer never computes scores; it only carries these payloads through.
 */

import { z } from "zod";

export const InfoSchema = z
  .object({
    service: z.string(),
    num_videos: z.number().int(),
    embedding_dim: z.number().int(),
    dialogue_mode: z.string(),
    max_turns: z.number().int(),
    checkpoint_sha256: z.string(),
    text_turns_supported: z.boolean(),
  })
  .strict();

export const SessionCreatedSchema = z
  .object({ session_id: z.string(), mode: z.string() })
  .strict();

export const TurnPostedSchema = z
  .object({ session_id: z.string(), turn_index: z.number().int() })
  .strict();

export const RankingEntrySchema = z
  .object({ rank: z.number().int(), video_id: z.string(), score: z.number() })
  .strict();

export const RankingSchema = z
  .object({
    session_id: z.string(),
    num_turns: z.number().int(),
    k: z.number().int(),
    results: z.array(RankingEntrySchema),
  })
  .strict();

export const AttentionSchema = z
  .object({
    session_id: z.string(),
    video_id: z.string(),
    num_turns: z.number().int(),
    score: z.number(),
    weights: z.array(z.number()),
  })
  .strict();

export const SessionStateSchema = z
  .object({
    session_id: z.string(),
    mode: z.string(),
    created_at: z.number(),
    num_turns: z.number().int(),
    texts: z.array(z.string()).nullable(),
  })
  .strict();

export type Info = z.infer<typeof InfoSchema>;
export type SessionCreated = z.infer<typeof SessionCreatedSchema>;
export type TurnPosted = z.infer<typeof TurnPostedSchema>;
export type RankingEntry = z.infer<typeof RankingEntrySchema>;
export type Ranking = z.infer<typeof RankingSchema>;
export type Attention = z.infer<typeof AttentionSchema>;
export type SessionState = z.infer<typeof SessionStateSchema>;

export class ApiError extends Error {
  constructor(
    readonly status: number,
    detail: string,
  ) {
    super(detail);
    this.name = "ApiError";
  }
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

const JSON_HEADERS = { "Content-Type": "application/json" };

export class ApiClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchImpl: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async request<T>(
    schema: z.ZodType<T>,
    path: string,
    init?: RequestInit,
  ): Promise<T> {
    const response = await this.fetchImpl(this.baseUrl + path, init);
    const body: unknown = await response.json();
    if (!response.ok) {
      const detail =
        typeof body === "object" && body !== null && "detail" in body
          ? String((body as { detail: unknown }).detail)
          : `request failed with status ${response.status}`;
      throw new ApiError(response.status, detail);
    }
    return schema.parse(body);
  }

  info(): Promise<Info> {
    return this.request(InfoSchema, "/");
  }

  createSession(mode?: string): Promise<SessionCreated> {
    return this.request(SessionCreatedSchema, "/sessions", {
      method: "POST",
      headers: JSON_HEADERS,
      body: JSON.stringify(mode === undefined ? {} : { mode }),
    });
  }

  fetchSession(sessionId: string): Promise<SessionState> {
    return this.request(SessionStateSchema, `/sessions/${sessionId}`);
  }

  postTurn(sessionId: string, text: string): Promise<TurnPosted> {
    return this.request(TurnPostedSchema, `/sessions/${sessionId}/turns`, {
      method: "POST",
      headers: JSON_HEADERS,
      body: JSON.stringify({ text }),
    });
  }

  fetchRanking(sessionId: string, k: number): Promise<Ranking> {
    return this.request(RankingSchema, `/sessions/${sessionId}/ranking?k=${k}`);
  }

  fetchAttention(sessionId: string, videoId: string): Promise<Attention> {
    return this.request(
      AttentionSchema,
      `/sessions/${sessionId}/attention/${encodeURIComponent(videoId)}`,
    );
  }

  async deleteSession(sessionId: string): Promise<void> {
    const response = await this.fetchImpl(`${this.baseUrl}/sessions/${sessionId}`, {
      method: "DELETE",
    });
    if (!response.ok) {
      throw new ApiError(response.status, `delete failed with status ${response.status}`);
    }
  }
}
