import { ApiClient } from "./api.js";
import { MicRecorder } from "./recorder.js";
import { renderBanner, renderResult, renderStatus } from "./render.js";
import { Controller } from "./state.js";

const DEFAULT_BASE_URL = "http://127.0.0.1:8000";

function byId<T extends HTMLElement>(id: string): T {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing element #${id}`);
  return el as T;
}

function init(): void {
  const baseUrlInput = byId<HTMLInputElement>("base-url");
  const applyBtn = byId<HTMLButtonElement>("apply-url");
  const statusEl = byId<HTMLSpanElement>("status");
  const fileInput = byId<HTMLInputElement>("file");
  const recordBtn = byId<HTMLButtonElement>("record");
  const submitBtn = byId<HTMLButtonElement>("submit");
  const bannerEl = byId<HTMLDivElement>("banner");
  const resultEl = byId<HTMLDivElement>("result");

  baseUrlInput.value = DEFAULT_BASE_URL;
  const api = new ApiClient(DEFAULT_BASE_URL);
  const controller = new Controller(api, (state) => {
    renderStatus(statusEl, state.serviceReady);
    renderBanner(bannerEl, state.banner);
    renderResult(resultEl, state.lastResult);
    recordBtn.textContent = state.phase === "recording" ? "stop" : "record";
    submitBtn.disabled = state.phase !== "idle" || state.selectedFile === null;
  });
  const recorder = new MicRecorder();

  applyBtn.addEventListener("click", () => {
    void controller.applyBaseUrl(baseUrlInput.value);
  });

  fileInput.addEventListener("change", () => {
    controller.selectFile(fileInput.files?.[0] ?? null);
  });

  recordBtn.addEventListener("click", async () => {
    if (!recorder.active) {
      try {
        await recorder.start();
        controller.setRecording(true);
      } catch {
        renderBanner(bannerEl, "microphone permission denied; use a file upload instead");
      }
      return;
    }
    const capture = await recorder.stop();
    controller.setRecording(false);
    await controller.submit(capture);
  });

  submitBtn.addEventListener("click", () => {
    void controller.submit();
  });

  void controller.refresh();
}

if (typeof document !== "undefined") {
  document.addEventListener("DOMContentLoaded", init);
}
