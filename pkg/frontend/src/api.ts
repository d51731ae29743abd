// Gateway client plus a latest-wins guard so drag gestures never pile up
// requests: a newer call aborts the in-flight one, and a superseded call
// resolves to null instead of delivering stale data.

import type { Meta, SampleRequest, SampleResponse, SweepCurve, SweepRequest } from "./types.js";

export class GatewayError extends Error {
  readonly status: number;
  readonly details: unknown;

  constructor(status: number, message: string, details?: unknown) {
    super(message);
    this.status = status;
    this.details = details;
  }
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class GatewayClient {
  private readonly baseUrl: string;
  private readonly fetchFn: FetchLike;

  constructor(baseUrl: string, fetchFn?: FetchLike) {
    this.baseUrl = baseUrl.replace(/\/$/, "");
    this.fetchFn = fetchFn ?? ((url, init) => fetch(url, init));
  }

  async meta(): Promise<Meta> {
    return this.getJson<Meta>("/api/meta");
  }

  async health(): Promise<{ status: string }> {
    return this.getJson<{ status: string }>("/api/health");
  }

  async sample(req: SampleRequest, signal?: AbortSignal): Promise<SampleResponse> {
    return this.postJson<SampleResponse>("/api/sample", req, signal);
  }

  async sweep(req: SweepRequest, signal?: AbortSignal): Promise<SweepCurve> {
    return this.postJson<SweepCurve>("/api/sweep", req, signal);
  }

  private async getJson<T>(path: string): Promise<T> {
    const res = await this.fetchFn(this.baseUrl + path, {
      headers: { accept: "application/json" },
    });
    return this.decode<T>(res, path);
  }

  private async postJson<T>(path: string, body: unknown, signal?: AbortSignal): Promise<T> {
    const res = await this.fetchFn(this.baseUrl + path, {
      method: "POST",
      headers: { "content-type": "application/json", accept: "application/json" },
      body: JSON.stringify(body),
      signal,
    });
    return this.decode<T>(res, path);
  }

  private async decode<T>(res: Response, path: string): Promise<T> {
    if (!res.ok) {
      let details: unknown;
      try {
        details = await res.json();
      } catch {
        details = undefined;
      }
      throw new GatewayError(res.status, `HTTP ${res.status} for ${path}`, details);
    }
    return (await res.json()) as T;
  }
}

/** Serializes calls so only the most recent one delivers a result. */
export class LatestWins {
  private controller: AbortController | null = null;
  private requestId = 0;

  get inflight(): boolean {
    return this.controller !== null;
  }

  async run<T>(fn: (signal: AbortSignal) => Promise<T>): Promise<T | null> {
    this.controller?.abort();
    const controller = new AbortController();
    this.controller = controller;
    const id = ++this.requestId;
    try {
      const result = await fn(controller.signal);
      return id === this.requestId ? result : null;
    } catch (err) {
      if (controller.signal.aborted && id !== this.requestId) {
        return null; // superseded, swallow the abort
      }
      throw err;
    } finally {
      if (id === this.requestId) {
        this.controller = null;
      }
    }
  }
}
