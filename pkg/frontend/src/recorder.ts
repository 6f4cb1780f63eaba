import { encodeWavPcm16 } from "./wav.js";

// Captures raw mono PCM off the microphone and re-encodes it as WAV
// client-side, so the service only ever sees one container format.
export class MicRecorder {
  private ctx: AudioContext | null = null;
  private stream: MediaStream | null = null;
  private node: ScriptProcessorNode | null = null;
  private chunks: Float32Array[] = [];

  get active(): boolean {
    return this.ctx !== null;
  }

  async start(): Promise<void> {
    if (this.ctx) return;
    this.stream = await navigator.mediaDevices.getUserMedia({ audio: true });
    this.ctx = new AudioContext();
    const source = this.ctx.createMediaStreamSource(this.stream);
    this.node = this.ctx.createScriptProcessor(4096, 1, 1);
    this.chunks = [];
    this.node.onaudioprocess = (e) => {
      this.chunks.push(new Float32Array(e.inputBuffer.getChannelData(0)));
    };
    source.connect(this.node);
    this.node.connect(this.ctx.destination);
  }

  async stop(): Promise<Blob> {
    if (!this.ctx) throw new Error("recorder is not running");
    const sampleRate = this.ctx.sampleRate;
    this.node?.disconnect();
    this.stream?.getTracks().forEach((t) => t.stop());
    await this.ctx.close();
    this.ctx = null;
    this.node = null;
    this.stream = null;

    const total = this.chunks.reduce((acc, c) => acc + c.length, 0);
    const samples = new Float32Array(total);
    let pos = 0;
    for (const c of this.chunks) {
      samples.set(c, pos);
      pos += c.length;
    }
    this.chunks = [];
    return new Blob([encodeWavPcm16(samples, sampleRate)], { type: "audio/wav" });
  }
}
