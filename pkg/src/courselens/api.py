"""HTTP facade: role-gated JSON endpoints under /api/v1.

Handlers stay thin: every response body is reproducible by calling the
underlying engine operation directly. Roles come from two static bearer
tokens (student, staff); real identity is the opaque student_ref carried
in request bodies, honored only in named mode.
"""

from __future__ import annotations

import json

from fastapi import Depends, FastAPI, HTTPException, Request
from fastapi.responses import JSONResponse, StreamingResponse
from pydantic import BaseModel, Field

from courselens.config import ServiceConfig
from courselens.gateway import LlmUnavailableError
from courselens.models import Identity, IdentityMode
from courselens.service import ConflictError, CourseService, NotFoundError


class IdentityBody(BaseModel):
    mode: str = "anonymous"
    student_ref: str | None = None

    def to_identity(self) -> Identity:
        if self.mode == IdentityMode.ANONYMOUS.value:
            return Identity.anonymous()
        if self.mode == IdentityMode.NAMED.value:
            if not self.student_ref:
                raise HTTPException(400, "named identity requires student_ref")
            return Identity.named(self.student_ref)
        raise HTTPException(400, f"unknown identity mode {self.mode!r}")


class CourseBody(BaseModel):
    title: str


class ExerciseBody(BaseModel):
    text: str


class ReviewDecision(BaseModel):
    keyword: str
    action: str  # accept | remove | add


class ReviewBody(BaseModel):
    decisions: list[ReviewDecision] = Field(default_factory=list)


class ChatBody(BaseModel):
    course_id: str
    text: str
    exercise_id: str | None = None
    identity: IdentityBody = Field(default_factory=IdentityBody)


class FaqUpdateBody(BaseModel):
    answer: str | None = None
    published: bool | None = None


class ManualFaqBody(BaseModel):
    course_id: str
    question: str
    answer: str


class RatingBody(BaseModel):
    value: int
    identity: IdentityBody = Field(default_factory=IdentityBody)


class ViewBody(BaseModel):
    identity: IdentityBody = Field(default_factory=IdentityBody)


def create_app(service: CourseService, config: ServiceConfig) -> FastAPI:
    app = FastAPI(title="courselens", version="0.1.0")
    app.state.service = service
    app.state.config = config

    def role_of(request: Request) -> str | None:
        auth = request.headers.get("authorization", "")
        if not auth.lower().startswith("bearer "):
            return None
        token = auth[7:].strip()
        if token == config.staff_token:
            return "staff"
        if token == config.student_token:
            return "student"
        return None

    def require(role: str):
        def check(request: Request) -> str:
            actual = role_of(request)
            if actual is None:
                raise HTTPException(401, "missing or invalid token")
            if role == "staff" and actual != "staff":
                raise HTTPException(403, "staff role required")
            return actual

        return Depends(check)

    @app.exception_handler(NotFoundError)
    async def _not_found(request, exc):
        return JSONResponse(status_code=404, content={"detail": str(exc)})

    @app.exception_handler(ConflictError)
    async def _conflict(request, exc):
        return JSONResponse(status_code=409, content={"detail": str(exc)})

    @app.exception_handler(ValueError)
    async def _bad_request(request, exc):
        return JSONResponse(status_code=400, content={"detail": str(exc)})

    api = "/api/v1"

    @app.post(api + "/courses", status_code=201)
    def create_course(body: CourseBody, role: str = require("staff")):
        return {"course_id": service.create_course(body.title)}

    @app.post(api + "/courses/{course_id}/exercises", status_code=201)
    def add_exercise(course_id: str, body: ExerciseBody, role: str = require("staff")):
        return {"exercise_id": service.add_exercise(course_id, body.text)}

    @app.post(api + "/exercises/{exercise_id}/keywords/extract")
    def extract_keywords(exercise_id: str, role: str = require("staff")):
        return {"keywords": service.extract_keywords(exercise_id)}

    @app.put(api + "/exercises/{exercise_id}/keywords")
    def review_keywords(
        exercise_id: str, body: ReviewBody, role: str = require("staff")
    ):
        decisions = [(d.keyword, d.action) for d in body.decisions]
        return service.review_exercise_keywords(exercise_id, decisions)

    @app.post(api + "/chat")
    def chat(body: ChatBody, role: str = require("student")):
        identity = body.identity.to_identity()
        outcome = service.submit_question(
            course_id=body.course_id,
            text=body.text,
            identity=identity,
            exercise_id=body.exercise_id,
        )

        def ndjson():
            head = {
                "question_id": outcome.question_id,
                "served_from": outcome.served_from,
                "topic": outcome.topic,
                "faq_group_id": outcome.group_id,
            }
            yield json.dumps(head) + "\n"
            try:
                for fragment in outcome.stream:
                    yield json.dumps({"content": fragment, "done": False}) + "\n"
                yield json.dumps({"done": True}) + "\n"
            except LlmUnavailableError as exc:
                yield json.dumps({"error": str(exc), "done": True}) + "\n"

        return StreamingResponse(ndjson(), media_type="application/x-ndjson")

    @app.get(api + "/faq")
    def list_faq(course: str, request: Request, role: str = require("student")):
        # the role query param from the UI never outranks the token
        requested = request.query_params.get("role", role)
        effective = "staff" if (requested == "staff" and role == "staff") else "student"
        return {"items": service.list_faq(course, role=effective)}

    @app.post(api + "/faq/{group_id}/view")
    def record_view(group_id: str, body: ViewBody, role: str = require("student")):
        count = service.record_view(
            group_id, body.identity.to_identity(), role=role
        )
        return {"view_count": count}

    @app.put(api + "/faq/{group_id}")
    def update_faq(group_id: str, body: FaqUpdateBody, role: str = require("staff")):
        if body.answer is not None:
            service.edit_answer(group_id, body.answer)
        if body.published is not None:
            service.set_published(group_id, body.published)
        g = service.store.state.groups[group_id]
        return {
            "id": g.id,
            "answer": g.answer,
            "answer_source": g.answer_source.value,
            "published": g.published,
        }

    @app.post(api + "/faq", status_code=201)
    def create_manual_faq(body: ManualFaqBody, role: str = require("staff")):
        gid = service.create_manual_faq(body.course_id, body.question, body.answer)
        return {"group_id": gid}

    @app.post(api + "/exercises/{exercise_id}/rating")
    def rate(exercise_id: str, body: RatingBody, role: str = require("student")):
        service.rate_exercise(exercise_id, body.value, body.identity.to_identity())
        return {"ok": True}

    @app.get(api + "/analytics/{course_id}/topics")
    def topics(course_id: str, role: str = require("staff")):
        snap = service.store.snapshot_analytics(course_id)
        return {"topic_counts": snap.topic_counts, "as_of_seq": snap.as_of_seq}

    @app.get(api + "/analytics/{course_id}/faq-views")
    def faq_views(course_id: str, role: str = require("staff")):
        snap = service.store.snapshot_analytics(course_id)
        return {"faq_view_counts": snap.faq_view_counts, "as_of_seq": snap.as_of_seq}

    @app.get(api + "/analytics/{course_id}/difficulty")
    def difficulty(course_id: str, role: str = require("staff")):
        snap = service.store.snapshot_analytics(course_id)
        return {
            "difficulty_histograms": snap.difficulty_histograms,
            "as_of_seq": snap.as_of_seq,
        }

    @app.get(api + "/export/{course_id}")
    def export(course_id: str, role: str = require("staff")):
        return service.store.export(course_id)

    @app.get(api + "/health")
    def health():
        llm = (
            service.gateway.healthcheck()
            if service.gateway is not None
            else {"available": False, "model_present": False}
        )
        embedder_ok = True
        try:
            service.embedder.embed("health check")
        except Exception:
            embedder_ok = False
        degraded = not (llm["available"] and embedder_ok)
        return {
            "status": "degraded" if degraded else "ok",
            "store": {"last_seq": service.store.state.last_seq},
            "embedder": {"available": embedder_ok},
            "llm": llm,
        }

    return app
