import json

import pytest
from fastapi.testclient import TestClient

from courselens.api import create_app
from courselens.config import ConfigError, ServiceConfig, load_config
from courselens.models import Identity
from courselens.service import CourseService
from tests.conftest import EXERCISE_TEXTS
from tests.test_service import RecordingRunner

STAFF = {"Authorization": "Bearer staff-token"}
STUDENT = {"Authorization": "Bearer student-token"}


@pytest.fixture
def runner():
    return RecordingRunner(answer="an llm answer")


@pytest.fixture
def client(store, mock_embedder, runner):
    config = ServiceConfig(embed_backend="mock").validate()
    service = CourseService(
        store=store, embedder=mock_embedder, gateway=runner.gateway()
    )
    app = create_app(service, config)
    with TestClient(app) as c:
        c.service = service
        yield c


def setup_course(client):
    course_id = client.post(
        "/api/v1/courses", json={"title": "Algorithms"}, headers=STAFF
    ).json()["course_id"]
    ex_ids = []
    for text in EXERCISE_TEXTS:
        ex_id = client.post(
            f"/api/v1/courses/{course_id}/exercises",
            json={"text": text},
            headers=STAFF,
        ).json()["exercise_id"]
        keywords = client.post(
            f"/api/v1/exercises/{ex_id}/keywords/extract", headers=STAFF
        ).json()["keywords"]
        client.put(
            f"/api/v1/exercises/{ex_id}/keywords",
            json={
                "decisions": [
                    {"keyword": k["text"], "action": "accept"} for k in keywords
                ]
            },
            headers=STAFF,
        )
        ex_ids.append(ex_id)
    return course_id, ex_ids


def chat(client, course_id, text, identity=None, headers=STUDENT):
    body = {"course_id": course_id, "text": text}
    if identity is not None:
        body["identity"] = identity
    with client.stream("POST", "/api/v1/chat", json=body, headers=headers) as resp:
        assert resp.status_code == 200
        lines = [json.loads(l) for l in resp.iter_lines() if l.strip()]
    return lines


class TestRoleGating:
    STAFF_ROUTES = [
        ("POST", "/api/v1/courses", {"title": "x"}),
        ("POST", "/api/v1/courses/c/exercises", {"text": "x"}),
        ("POST", "/api/v1/exercises/e/keywords/extract", None),
        ("PUT", "/api/v1/exercises/e/keywords", {"decisions": []}),
        ("PUT", "/api/v1/faq/g", {"answer": "x"}),
        ("POST", "/api/v1/faq", {"course_id": "c", "question": "q", "answer": "a"}),
        ("GET", "/api/v1/analytics/c/topics", None),
        ("GET", "/api/v1/analytics/c/faq-views", None),
        ("GET", "/api/v1/analytics/c/difficulty", None),
        ("GET", "/api/v1/export/c", None),
    ]

    @pytest.mark.parametrize("method,path,body", STAFF_ROUTES)
    def test_student_token_forbidden_on_staff_routes(self, client, method, path, body):
        resp = client.request(method, path, json=body, headers=STUDENT)
        assert resp.status_code == 403

    @pytest.mark.parametrize("method,path,body", STAFF_ROUTES)
    def test_missing_token_unauthorized(self, client, method, path, body):
        assert client.request(method, path, json=body).status_code == 401

    def test_bad_token_unauthorized(self, client):
        resp = client.get(
            "/api/v1/faq?course=c", headers={"Authorization": "Bearer wrong"}
        )
        assert resp.status_code == 401

    def test_health_is_open(self, client):
        assert client.get("/api/v1/health").status_code == 200

    def test_role_query_param_cannot_escalate(self, client):
        course_id, _ = setup_course(client)
        chat(client, course_id, "tree question")  # unpublished group exists
        staff_view = client.get(
            f"/api/v1/faq?course={course_id}&role=staff", headers=STUDENT
        ).json()["items"]
        assert staff_view == []


class TestChat:
    def test_stream_framing_and_metadata(self, client):
        course_id, _ = setup_course(client)
        lines = chat(client, course_id, "how does a binary tree search work")
        head = lines[0]
        assert head["served_from"] == "llm"
        assert head["topic"] == "binary tree"
        assert head["question_id"].startswith("q-")
        fragments = [l["content"] for l in lines[1:] if not l["done"]]
        assert "".join(fragments) == "an llm answer"
        assert lines[-1] == {"done": True}

    def test_cached_answer_served_without_llm_call(self, client, runner):
        course_id, _ = setup_course(client)
        first = chat(client, course_id, "how does a binary tree search work")
        client.put(
            f"/api/v1/faq/{first[0]['faq_group_id']}",
            json={"published": True},
            headers=STAFF,
        )
        calls_before = len(runner.calls)
        second = chat(client, course_id, "binary tree search how does work")
        assert second[0]["served_from"] == "faq_cache"
        assert len(runner.calls) == calls_before

    def test_unknown_course_404(self, client):
        resp = client.post(
            "/api/v1/chat",
            json={"course_id": "nope", "text": "hi"},
            headers=STUDENT,
        )
        assert resp.status_code == 404

    def test_named_identity_recorded(self, client):
        course_id, _ = setup_course(client)
        lines = chat(
            client,
            course_id,
            "a named question",
            identity={"mode": "named", "student_ref": "s77"},
        )
        q = client.service.store.state.questions[lines[0]["question_id"]]
        assert q.identity.student_ref == "s77"


class TestFaqAndRatings:
    def test_faq_edit_read_your_write(self, client):
        course_id, _ = setup_course(client)
        gid = chat(client, course_id, "tree question")[0]["faq_group_id"]
        client.put(
            f"/api/v1/faq/{gid}",
            json={"answer": "teacher says so", "published": True},
            headers=STAFF,
        )
        items = client.get(
            f"/api/v1/faq?course={course_id}", headers=STUDENT
        ).json()["items"]
        assert items[0]["answer"] == "teacher says so"
        assert items[0]["answer_source"] == "staff_edited"

    def test_view_counting_endpoint(self, client):
        course_id, _ = setup_course(client)
        gid = chat(client, course_id, "tree question")[0]["faq_group_id"]
        client.put(f"/api/v1/faq/{gid}", json={"published": True}, headers=STAFF)
        for expected in (1, 2, 3):
            got = client.post(
                f"/api/v1/faq/{gid}/view",
                json={"identity": {"mode": "anonymous"}},
                headers=STUDENT,
            ).json()["view_count"]
            assert got == expected

    def test_unpublished_view_rejected(self, client):
        course_id, _ = setup_course(client)
        gid = chat(client, course_id, "tree question")[0]["faq_group_id"]
        resp = client.post(
            f"/api/v1/faq/{gid}/view",
            json={"identity": {"mode": "anonymous"}},
            headers=STUDENT,
        )
        assert resp.status_code == 409

    def test_manual_faq_creation(self, client):
        course_id, _ = setup_course(client)
        resp = client.post(
            "/api/v1/faq",
            json={"course_id": course_id, "question": "what is big o", "answer": "a bound"},
            headers=STAFF,
        )
        assert resp.status_code == 201
        items = client.get(
            f"/api/v1/faq?course={course_id}", headers=STUDENT
        ).json()["items"]
        assert [i["question"] for i in items] == ["what is big o"]

    def test_rating_bounds(self, client):
        course_id, ex_ids = setup_course(client)
        bad = client.post(
            f"/api/v1/exercises/{ex_ids[0]}/rating",
            json={"value": 0, "identity": {"mode": "anonymous"}},
            headers=STUDENT,
        )
        assert bad.status_code in (400, 422)
        ok = client.post(
            f"/api/v1/exercises/{ex_ids[0]}/rating",
            json={"value": 4, "identity": {"mode": "named", "student_ref": "s1"}},
            headers=STUDENT,
        )
        assert ok.status_code == 200


class TestHandlerThinness:
    def test_analytics_body_equals_engine_output(self, client):
        course_id, ex_ids = setup_course(client)
        chat(client, course_id, "a binary tree question")
        client.post(
            f"/api/v1/exercises/{ex_ids[0]}/rating",
            json={"value": 3, "identity": {"mode": "anonymous"}},
            headers=STUDENT,
        )
        snap = client.service.store.snapshot_analytics(course_id)
        topics = client.get(
            f"/api/v1/analytics/{course_id}/topics", headers=STAFF
        ).json()
        assert topics["topic_counts"] == snap.topic_counts
        difficulty = client.get(
            f"/api/v1/analytics/{course_id}/difficulty", headers=STAFF
        ).json()
        assert difficulty["difficulty_histograms"] == snap.difficulty_histograms
        views = client.get(
            f"/api/v1/analytics/{course_id}/faq-views", headers=STAFF
        ).json()
        assert views["faq_view_counts"] == snap.faq_view_counts

    def test_faq_list_equals_engine_output(self, client):
        course_id, _ = setup_course(client)
        gid = chat(client, course_id, "tree question")[0]["faq_group_id"]
        client.put(f"/api/v1/faq/{gid}", json={"published": True}, headers=STAFF)
        body = client.get(f"/api/v1/faq?course={course_id}", headers=STUDENT).json()
        assert body["items"] == client.service.list_faq(course_id, role="student")


class TestHealth:
    def test_healthy_in_mock_mode(self, client):
        body = client.get("/api/v1/health").json()
        assert body["embedder"]["available"] is True
        assert body["llm"]["available"] is True
        assert body["status"] == "ok"

    def test_degraded_with_runner_down_faq_still_served(
        self, store, mock_embedder
    ):
        config = ServiceConfig(embed_backend="mock").validate()
        down = RecordingRunner(fail=True)
        service = CourseService(
            store=store, embedder=mock_embedder, gateway=down.gateway()
        )
        app = create_app(service, config)
        with TestClient(app) as client:
            client.service = service
            course_id = client.post(
                "/api/v1/courses", json={"title": "t"}, headers=STAFF
            ).json()["course_id"]
            health = client.get("/api/v1/health").json()
            assert health["status"] == "degraded"
            assert health["llm"]["available"] is False
            faq = client.get(f"/api/v1/faq?course={course_id}", headers=STUDENT)
            assert faq.status_code == 200


class TestConfig:
    def test_malformed_threshold_rejected_at_startup(self, tmp_path):
        p = tmp_path / "bad.conf"
        p.write_text("tau_faq = 1.5\n")
        with pytest.raises(ConfigError, match="tau_faq"):
            load_config(p)

    def test_unknown_key_named_in_error(self, tmp_path):
        p = tmp_path / "bad.conf"
        p.write_text("no_such_key = 1\n")
        with pytest.raises(ConfigError, match="no_such_key"):
            load_config(p)

    def test_round_trip_and_overrides(self, tmp_path):
        p = tmp_path / "ok.conf"
        p.write_text(
            "# comment\n"
            "listen = 0.0.0.0:9000\n"
            "tau_topic = 0.5\n"
            "serve_cached_first = false\n"
            "promote_at = 2\n"
        )
        config = load_config(p, embed_backend="mock", seed=42)
        assert config.listen == "0.0.0.0:9000"
        assert config.tau_topic == 0.5
        assert config.serve_cached_first is False
        assert config.promote_at == 2
        assert config.embed_backend == "mock"
        assert config.seed == 42
