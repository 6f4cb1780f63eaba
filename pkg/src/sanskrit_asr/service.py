"""HTTP transcription service: POST WAV bytes, receive transcript JSON.

The model is loaded once and shared read-only across requests. Clients may
post WAV at any sample rate; resampling happens server-side.
"""

from __future__ import annotations

import time

from fastapi import FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from . import audio as dsp
from .errors import SanskritAsrError
from .model import ModelParams, load_checkpoint
from .pipeline import context_seconds, transcribe

DEFAULT_MAX_BODY_BYTES = 100 * 1024 * 1024


def create_app(params: ModelParams, max_body_bytes: int = DEFAULT_MAX_BODY_BYTES) -> FastAPI:
    app = FastAPI(title="sanskrit-asr", docs_url=None, redoc_url=None)
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )
    started = time.monotonic()

    @app.get("/health")
    def health():
        return {
            "status": "ok",
            "model_name": params.name,
            "uptime_s": time.monotonic() - started,
        }

    @app.get("/config")
    def config():
        return {
            "model_name": params.name,
            "max_body_bytes": max_body_bytes,
            "sample_rate_hz": dsp.SAMPLE_RATE,
            "context_seconds": context_seconds(params),
        }

    @app.post("/transcribe")
    async def transcribe_endpoint(request: Request):
        body = await request.body()
        if len(body) > max_body_bytes:
            return JSONResponse(
                status_code=413,
                content={
                    "error": {
                        "code": "too_large",
                        "message": f"body exceeds {max_body_bytes} bytes",
                    }
                },
            )
        try:
            audio = dsp.read_wav(body)
            result = transcribe(audio, params)
        except SanskritAsrError as e:
            return JSONResponse(
                status_code=400,
                content={"error": {"code": "invalid_audio", "message": str(e)}},
            )
        return result.to_json()

    return app


def serve(
    checkpoint_path,
    host: str = "127.0.0.1",
    port: int = 8000,
    max_body_bytes: int = DEFAULT_MAX_BODY_BYTES,
) -> None:
    """Blocking entry point: load a checkpoint and run the HTTP service."""
    import uvicorn

    params = load_checkpoint(checkpoint_path)
    app = create_app(params, max_body_bytes=max_body_bytes)
    uvicorn.run(app, host=host, port=port, log_level="warning")
