import type { TranscriptionResult } from "./types.js";

// Pure DOM builders; all service text lands via textContent, never markup,
// and Devanagari is shown exactly as the service returned it.

export function renderResult(
  container: HTMLElement,
  result: TranscriptionResult | null,
): void {
  const doc = container.ownerDocument;
  container.textContent = "";
  if (result === null) return;

  const deva = doc.createElement("p");
  deva.className = "transcript";
  deva.lang = "sa";
  deva.textContent = result.devanagari;
  container.appendChild(deva);

  const slp1 = doc.createElement("p");
  slp1.className = "slp1";
  slp1.textContent = result.slp1;
  container.appendChild(slp1);

  const meta = doc.createElement("p");
  meta.className = "meta";
  meta.textContent = `${result.model_name}, ${result.audio_duration_s.toFixed(1)} s`;
  container.appendChild(meta);

  const table = doc.createElement("table");
  table.className = "chunks";
  for (const chunk of result.chunks) {
    const row = doc.createElement("tr");
    row.className = "chunk-row";
    row.dataset.startS = String(chunk.start_s);
    row.dataset.endS = String(chunk.end_s);
    const span = doc.createElement("td");
    span.className = "chunk-span";
    span.textContent = `${chunk.start_s.toFixed(1)}-${chunk.end_s.toFixed(1)} s`;
    const text = doc.createElement("td");
    text.className = "chunk-text";
    text.lang = "sa";
    text.textContent = chunk.devanagari;
    row.appendChild(span);
    row.appendChild(text);
    table.appendChild(row);
  }
  container.appendChild(table);
}

export function renderBanner(el: HTMLElement, text: string | null): void {
  el.textContent = text ?? "";
  el.hidden = text === null;
}

export function renderStatus(el: HTMLElement, ready: boolean): void {
  el.textContent = ready ? "ready" : "offline";
  el.className = ready ? "status status-ready" : "status status-offline";
}
