"""Thin HTTP wrapper over :meth:`Pipeline.run_query`."""
from __future__ import annotations

import hmac
import logging
import os

from flask import Flask, jsonify, request

from .exceptions import StageError
from .pipeline import DEFAULT_PROFILE, PROFILES, Pipeline

logger = logging.getLogger(__name__)

TOKEN_HEADER = "X-Service-Token"


def create_app(pipeline: Pipeline, token: str | None = None) -> Flask:
    """
    Build the service app.

    Routes
    ------
    ``GET /health``
        Index size and namespace count; never requires the token.
    ``POST /query``
        Body ``{"question": str, "profile": str?, "question_id": str?}``;
        answers with the serialized trace. When *token* is set the request
        must carry it in the ``X-Service-Token`` header.
    """
    app = Flask(__name__)

    @app.get("/health")
    def health():
        counts = pipeline.store.total_count()
        return jsonify(status="ok", namespaces=len(counts), vectors=sum(counts.values()))

    @app.post("/query")
    def query():
        if token and not hmac.compare_digest(request.headers.get(TOKEN_HEADER, ""), token):
            return jsonify(error="unauthorized"), 401
        body = request.get_json(silent=True)
        if not isinstance(body, dict) or not str(body.get("question", "")).strip():
            return jsonify(error="body must be a JSON object with a non-empty 'question'"), 400
        profile = body.get("profile", DEFAULT_PROFILE)
        if not isinstance(profile, str) or profile not in PROFILES:
            return jsonify(error=f"unknown profile {profile!r}"), 400
        try:
            trace = pipeline.run_query(
                str(body["question"]), profile, question_id=body.get("question_id")
            )
        except StageError as exc:
            logger.error("query failed at %s: %s", exc.stage, exc.cause)
            return jsonify(error=str(exc), trace=exc.trace.to_dict()), 502
        return jsonify(trace.to_dict())

    return app


def serve(pipeline: Pipeline) -> None:
    """Run the app on the configured host and port until interrupted."""
    config = pipeline.config
    token = os.environ.get(config.service_token_env) if config.service_token_env else None
    if not token:
        logger.warning("no service token set; /query is open")
    app = create_app(pipeline, token)
    logger.info("serving on http://%s:%d", config.service_host, config.service_port)
    app.run(host=config.service_host, port=config.service_port, threaded=True)
