"""Read-only query service over a loaded index snapshot.

Handlers are pure functions of (snapshot, request) returning response body
dicts; the FastAPI layer only does parameter parsing, error mapping, CORS
and request logging.  Replaying a request log against the same snapshot
yields identical bodies.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Optional, Sequence

from fastapi import FastAPI, Query, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from . import index as index_store
from .errors import NotFoundError, SnapshotError, ValidationError
from .index import IndexSnapshot, IndexedSentence

logger = logging.getLogger("gapsearch.service")

API_VERSION = 1

MAX_LIMIT = 100


@dataclass(frozen=True)
class SearchRequest:
    entities: tuple[str, ...]
    label: str = "both"
    offset: int = 0
    limit: int = 20

    def __post_init__(self) -> None:
        if not self.entities:
            raise ValidationError("entities must be nonempty")
        if self.label not in index_store.QUERY_LABELS:
            raise ValidationError(f"label must be one of {index_store.QUERY_LABELS}")
        if self.offset < 0:
            raise ValidationError("offset must be >= 0")
        if not (1 <= self.limit <= MAX_LIMIT):
            raise ValidationError(f"limit must lie in [1,{MAX_LIMIT}]")
        object.__setattr__(self, "entities", tuple(self.entities))


@dataclass
class ServiceConfig:
    cors_origins: tuple[str, ...] = ()
    log_requests: bool = True
    dedupe_results: bool = False


def _sentence_body(idx: IndexSnapshot, sent: IndexedSentence) -> dict:
    return {
        "sentence_id": sent.sentence_id,
        "text": sent.text,
        "prev_text": sent.prev_text,
        "next_text": sent.next_text,
        "challenge": sent.decision.challenge,
        "direction": sent.decision.direction,
        "challenge_prob": sent.probs[0],
        "direction_prob": sent.probs[1],
        "paper": {
            "paper_id": sent.paper_id,
            "title": sent.title,
            "date": sent.date,
            "url": sent.url,
            "journal": sent.journal,
        },
        "entities": [
            {"entity_id": eid, "name": idx.entity_name(eid)} for eid in sent.entity_ids
        ],
    }


def handle_search(idx: IndexSnapshot, req: SearchRequest, dedupe: bool = False) -> dict:
    page = index_store.query(
        idx, list(req.entities), label=req.label, offset=req.offset, limit=req.limit, dedupe=dedupe
    )
    return {
        "api_version": API_VERSION,
        "total": page.total,
        "offset": page.offset,
        "limit": page.limit,
        "items": [_sentence_body(idx, sent) for sent in page.items],
    }


def handle_autocomplete(idx: IndexSnapshot, prefix: str, limit: int = 10) -> dict:
    if limit > MAX_LIMIT:
        raise ValidationError(f"limit must lie in [1,{MAX_LIMIT}]")
    matches = index_store.autocomplete(idx, prefix, limit=limit)
    return {
        "api_version": API_VERSION,
        "items": [{"alias": alias, "entity_id": eid} for alias, eid in matches],
    }


def handle_cooccurring(idx: IndexSnapshot, entity_id: str) -> dict:
    pairs = index_store.cooccurring(idx, entity_id)
    return {
        "api_version": API_VERSION,
        "entity_id": entity_id,
        "items": [
            {"entity_id": other, "name": idx.entity_name(other), "count": count}
            for other, count in pairs
        ],
    }


def handle_sentence(idx: IndexSnapshot, sentence_id: str) -> dict:
    sent = index_store.get_sentence(idx, sentence_id)
    return {"api_version": API_VERSION, "sentence": _sentence_body(idx, sent)}


def handle_stats(idx: IndexSnapshot, counters: Optional[dict] = None) -> dict:
    body = {"api_version": API_VERSION, "manifest": idx.manifest}
    if counters is not None:
        body["counters"] = dict(counters)
    return body


def handle_health(idx: IndexSnapshot) -> dict:
    return {
        "api_version": API_VERSION,
        "status": "ok",
        "counts": idx.manifest.get("counts", {}),
    }


def _error_response(status: int, code: str, message: str) -> JSONResponse:
    return JSONResponse(
        status_code=status,
        content={"api_version": API_VERSION, "error": {"code": code, "message": message}},
    )


def create_app(idx: IndexSnapshot, config: Optional[ServiceConfig] = None) -> FastAPI:
    config = config or ServiceConfig()
    app = FastAPI(title="gapsearch", docs_url=None, redoc_url=None)
    app.state.snapshot = idx
    app.state.counters = {"requests": 0, "errors": 0}

    if config.cors_origins:
        app.add_middleware(
            CORSMiddleware,
            allow_origins=list(config.cors_origins),
            allow_methods=["GET"],
            allow_headers=["*"],
        )

    @app.exception_handler(ValidationError)
    async def _validation(request: Request, exc: ValidationError):
        app.state.counters["errors"] += 1
        return _error_response(400, "validation_error", str(exc))

    @app.exception_handler(NotFoundError)
    async def _not_found(request: Request, exc: NotFoundError):
        app.state.counters["errors"] += 1
        return _error_response(404, "not_found", str(exc))

    @app.middleware("http")
    async def _log_and_count(request: Request, call_next):
        app.state.counters["requests"] += 1
        start = time.monotonic()
        response = await call_next(request)
        if config.log_requests:
            logger.info(
                "request method=%s path=%s status=%d duration_ms=%.1f",
                request.method,
                request.url.path,
                response.status_code,
                (time.monotonic() - start) * 1000.0,
            )
        return response

    @app.get("/search")
    async def search(
        entities: list[str] = Query(default=[]),
        label: str = "both",
        offset: int = 0,
        limit: int = 20,
    ):
        req = SearchRequest(entities=tuple(entities), label=label, offset=offset, limit=limit)
        return handle_search(idx, req, dedupe=config.dedupe_results)

    @app.get("/autocomplete")
    async def autocomplete(prefix: str = "", limit: int = 10):
        return handle_autocomplete(idx, prefix, limit=limit)

    @app.get("/cooccurring/{entity_id}")
    async def cooccurring(entity_id: str):
        return handle_cooccurring(idx, entity_id)

    @app.get("/sentence/{sentence_id}")
    async def sentence(sentence_id: str):
        return handle_sentence(idx, sentence_id)

    @app.get("/stats")
    async def stats():
        return handle_stats(idx, app.state.counters)

    @app.get("/health")
    async def health():
        return handle_health(idx)

    return app


def serve(
    snapshot_path,
    bind_address: str = "127.0.0.1:8000",
    config: Optional[ServiceConfig] = None,
) -> None:
    """Load the snapshot and serve it until interrupted.

    Startup fails fast (nonzero exit via the raised error) when the snapshot
    is missing or corrupt; uvicorn handles graceful shutdown on SIGINT and
    SIGTERM.
    """
    import uvicorn

    idx = index_store.load(snapshot_path)
    logger.info(
        "snapshot loaded: %d sentences, %d entities",
        idx.manifest.get("counts", {}).get("sentences", 0),
        idx.manifest.get("counts", {}).get("entities", 0),
    )
    app = create_app(idx, config)
    host, _, port = bind_address.rpartition(":")
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port), log_level="info")
