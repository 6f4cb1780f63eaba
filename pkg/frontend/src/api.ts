import type { HealthInfo, ServiceConfig, TranscriptionResult } from "./types.js";

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ServiceError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    message: string,
  ) {
    super(message);
    this.name = "ServiceError";
  }
}

// Error bodies look like {"error": {"code": ..., "message": ...}}; anything
// else (proxies, crashes) degrades to the HTTP status text.
async function raiseForStatus(r: Response): Promise<Response> {
  if (r.ok) return r;
  let code = `http_${r.status}`;
  let message = r.statusText || "request failed";
  try {
    const body = await r.json();
    if (body?.error?.code) code = body.error.code;
    if (body?.error?.message) message = body.error.message;
  } catch {
    // non-JSON error body; keep the status text
  }
  throw new ServiceError(r.status, code, message);
}

export class ApiClient {
  private baseUrl: string;

  constructor(
    baseUrl: string,
    private readonly fetchImpl: FetchLike = (url, init) => fetch(url, init),
  ) {
    this.baseUrl = ApiClient.normalize(baseUrl);
  }

  static normalize(url: string): string {
    return url.replace(/\/+$/, "");
  }

  setBaseUrl(url: string): void {
    this.baseUrl = ApiClient.normalize(url);
  }

  getBaseUrl(): string {
    return this.baseUrl;
  }

  async health(): Promise<HealthInfo> {
    const r = await raiseForStatus(await this.fetchImpl(`${this.baseUrl}/health`));
    return r.json();
  }

  async config(): Promise<ServiceConfig> {
    const r = await raiseForStatus(await this.fetchImpl(`${this.baseUrl}/config`));
    return r.json();
  }

  async transcribe(body: Blob): Promise<TranscriptionResult> {
    const r = await raiseForStatus(
      await this.fetchImpl(`${this.baseUrl}/transcribe`, { method: "POST", body }),
    );
    return r.json();
  }
}
