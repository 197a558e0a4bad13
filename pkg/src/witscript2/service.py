"""HTTP facade over the pipeline, plus static hosting for the chat UI.

Stateless request handling: one immutable prompt set and one backend are
shared across requests, and each request runs its own pipeline. Errors map
to a fixed body shape: {"error": <code>, "stage": <stage|null>, "message"}.
"""

from __future__ import annotations

from pathlib import Path

from fastapi import FastAPI
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from .backend import Backend, BackendError
from .domain import TopicValidationError
from .pipeline import (
    JokeRejected,
    PipelineConfig,
    StageError,
    generate_joke,
)
from .prompts import PromptSet, default_prompt_set

DEFAULT_LISTEN = "127.0.0.1:8787"


class JokeRequestBody(BaseModel):
    text: str
    trace: bool = False


def _error_body(code: str, stage: str | None, message: str) -> dict:
    return {"error": code, "stage": stage, "message": message}


def create_app(
    backend: Backend,
    prompt_set: PromptSet | None = None,
    config: PipelineConfig | None = None,
    static_dir: str | Path | None = None,
) -> FastAPI:
    """Build the application around one backend and one prompt set."""
    prompt_set = prompt_set or default_prompt_set()
    config = config or PipelineConfig()
    backend_available = backend.health_check()

    app = FastAPI(title="witscript2")

    @app.get("/api/health")
    def health() -> dict:
        return {
            "status": "ok" if backend_available else "unavailable",
            "backend_kind": backend.kind,
            "model_name": backend.model_name,
        }

    @app.post("/api/joke")
    def joke(body: JokeRequestBody):
        if not backend_available:
            return JSONResponse(
                status_code=503,
                content=_error_body(
                    "BackendUnavailable",
                    None,
                    "the configured backend failed its startup health check",
                ),
            )
        try:
            response = generate_joke(body.text, backend, prompt_set, config)
        except TopicValidationError as exc:
            return JSONResponse(
                status_code=400, content=_error_body(exc.code, None, str(exc))
            )
        except JokeRejected as exc:
            return JSONResponse(
                status_code=502,
                content=_error_body(exc.code, exc.stage.value, str(exc)),
            )
        except StageError as exc:
            return JSONResponse(
                status_code=502,
                content=_error_body(exc.code, exc.stage.value, str(exc)),
            )
        except BackendError as exc:
            return JSONResponse(
                status_code=502, content=_error_body(exc.code, None, str(exc))
            )
        return response.to_dict(include_trace=body.trace)

    if static_dir is not None:
        app.mount("/", StaticFiles(directory=str(static_dir), html=True), name="ui")

    return app
