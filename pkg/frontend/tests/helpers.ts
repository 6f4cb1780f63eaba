import type { FetchLike } from "../src/api.js";
import type { TranscriptionResult } from "../src/types.js";

export const cannedResult: TranscriptionResult = {
  devanagari: "अग्निमीळे पुरोहितं यज्ञस्य देवमृत्विजम् होतारं रत्नधातमम्",
  slp1: "agnimILe purohitaM yajYasya devamftvijam hotAraM ratnaDAtamam",
  chunks: [
    { start_s: 0.0, end_s: 30.0, devanagari: "अग्निमीळे पुरोहितं" },
    { start_s: 30.0, end_s: 60.0, devanagari: "यज्ञस्य देवमृत्विजम्" },
    { start_s: 60.0, end_s: 65.0, devanagari: "होतारं रत्नधातमम्" },
  ],
  model_name: "toy",
  audio_duration_s: 65.0,
};

export function jsonResponse(status: number, body: unknown): Response {
  return {
    ok: status >= 200 && status < 300,
    status,
    statusText: `status ${status}`,
    json: async () => body,
  } as unknown as Response;
}

export interface FetchStub {
  fetch: FetchLike;
  calls: Array<{ url: string; init?: RequestInit }>;
}

/** Fetch stub that answers by URL suffix; unmatched URLs reject. */
export function stubFetch(
  routes: Record<string, () => Promise<Response>>,
): FetchStub {
  const calls: FetchStub["calls"] = [];
  const fetch: FetchLike = (url, init) => {
    calls.push({ url, init });
    for (const [suffix, handler] of Object.entries(routes)) {
      if (url.endsWith(suffix)) return handler();
    }
    return Promise.reject(new TypeError("fetch failed"));
  };
  return { fetch, calls };
}

export const healthOk = () =>
  Promise.resolve(
    jsonResponse(200, { status: "ok", model_name: "toy", uptime_s: 1.0 }),
  );

export const configOk = (maxBodyBytes = 4 * 1024 * 1024) => () =>
  Promise.resolve(
    jsonResponse(200, {
      model_name: "toy",
      max_body_bytes: maxBodyBytes,
      sample_rate_hz: 16000,
      context_seconds: 30.0,
    }),
  );

export interface Deferred<T> {
  promise: Promise<T>;
  resolve: (value: T) => void;
  reject: (err: unknown) => void;
}

export function deferred<T>(): Deferred<T> {
  let resolve!: (value: T) => void;
  let reject!: (err: unknown) => void;
  const promise = new Promise<T>((res, rej) => {
    resolve = res;
    reject = rej;
  });
  return { promise, resolve, reject };
}
