// Mirrors the transcription service's JSON payloads, field for field.

export interface ChunkRow {
  start_s: number;
  end_s: number;
  devanagari: string;
}

export interface TranscriptionResult {
  devanagari: string;
  slp1: string;
  chunks: ChunkRow[];
  model_name: string;
  audio_duration_s: number;
}

export interface HealthInfo {
  status: string;
  model_name: string;
  uptime_s: number;
}

export interface ServiceConfig {
  model_name: string;
  max_body_bytes: number;
  sample_rate_hz: number;
  context_seconds: number;
}
