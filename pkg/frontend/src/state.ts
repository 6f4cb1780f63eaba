import { ApiClient, ServiceError } from "./api.js";
import type { TranscriptionResult } from "./types.js";

export type Phase = "idle" | "recording" | "submitting";

export interface UiState {
  phase: Phase;
  selectedFile: Blob | null;
  lastResult: TranscriptionResult | null;
  banner: string | null;
  baseUrl: string;
  serviceReady: boolean;
}

export type Listener = (state: UiState) => void;

// Single-threaded state machine around the API client. The one hard
// invariant: at most one transcription request in flight, enforced here
// rather than in every caller.
export class Controller {
  state: UiState;
  private inFlight = false;
  private maxBodyBytes: number | null = null;

  constructor(
    readonly api: ApiClient,
    private readonly onChange: Listener = () => {},
  ) {
    this.state = {
      phase: "idle",
      selectedFile: null,
      lastResult: null,
      banner: null,
      baseUrl: api.getBaseUrl(),
      serviceReady: false,
    };
  }

  private set(patch: Partial<UiState>): void {
    this.state = { ...this.state, ...patch };
    this.onChange(this.state);
  }

  async applyBaseUrl(url: string): Promise<void> {
    this.api.setBaseUrl(url);
    this.set({ baseUrl: this.api.getBaseUrl() });
    await this.refresh();
  }

  async refresh(): Promise<void> {
    try {
      const health = await this.api.health();
      const config = await this.api.config();
      this.maxBodyBytes = config.max_body_bytes;
      this.set({ serviceReady: health.status === "ok", banner: null });
    } catch {
      this.maxBodyBytes = null;
      this.set({
        serviceReady: false,
        banner: "service unreachable; check the base URL and retry",
      });
    }
  }

  selectFile(file: Blob | null): void {
    this.set({ selectedFile: file, banner: null });
  }

  setRecording(on: boolean): void {
    if (this.state.phase === "submitting") return;
    this.set({ phase: on ? "recording" : "idle" });
  }

  /** Returns true iff a request was actually sent and succeeded. */
  async submit(audio?: Blob): Promise<boolean> {
    const body = audio ?? this.state.selectedFile;
    if (!body) {
      this.set({ banner: "record or choose an audio file first" });
      return false;
    }
    if (this.inFlight) return false;
    if (this.maxBodyBytes !== null && body.size > this.maxBodyBytes) {
      this.set({
        banner: `file is ${body.size} bytes; the service accepts at most ${this.maxBodyBytes}`,
      });
      return false;
    }
    this.inFlight = true;
    this.set({ phase: "submitting", banner: null });
    try {
      const result = await this.api.transcribe(body);
      this.set({ phase: "idle", lastResult: result });
      return true;
    } catch (e) {
      const banner =
        e instanceof ServiceError
          ? `service error ${e.status} (${e.code}): ${e.message}`
          : `request failed: ${e instanceof Error ? e.message : String(e)}`;
      this.set({ phase: "idle", banner });
      return false;
    } finally {
      this.inFlight = false;
    }
  }
}
