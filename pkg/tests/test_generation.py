import json

import httpx
import pytest

from casegpt.errors import BackendUnavailable
from casegpt.generation import ExtractiveBackend, RemoteGenerator, ScriptedBackend

PROMPT = (
    "Question: what outcome?\n"
    "\n"
    "[CASE:case-001] (rank 1)\n"
    "First claim sentence one. More detail here.\n"
    "Second line of section.\n"
    "\n"
    "[CASE:case-002] (rank 2)\n"
    "Second case lead sentence. Trailing text.\n"
    "\n"
    "Answer with citations.\n"
)


class TestExtractiveBackend:
    def test_quotes_lead_line_per_section_with_markers(self):
        out = ExtractiveBackend().generate(PROMPT, max_tokens=200, temperature=0.9)
        assert "First claim sentence one. More detail here [CASE:case-001]." in out
        assert "Second case lead sentence. Trailing text [CASE:case-002]." in out

    def test_markers_sit_inside_sentence_terminators(self):
        # Placement before the closing punctuation is what keeps a
        # multi-claim report splittable into per-claim sentences.
        from casegpt.insights import split_sentences

        out = ExtractiveBackend().generate(PROMPT, max_tokens=200, temperature=0.0)
        assert ". [CASE:" not in out
        sentences = split_sentences(out)
        assert sentences[0] == "First claim sentence one."
        assert sentences[1] == "More detail here [CASE:case-001]."
        assert sentences[-1] == "Trailing text [CASE:case-002]."
        assert sum("[CASE:" in s for s in sentences) == 2

    def test_deterministic_across_calls_and_temperatures(self):
        backend = ExtractiveBackend()
        a = backend.generate(PROMPT, 200, 0.0)
        b = backend.generate(PROMPT, 200, 1.0)
        assert a == b
        assert backend.deterministic is True

    def test_token_budget_truncates_but_keeps_first_section(self):
        out = ExtractiveBackend().generate(PROMPT, max_tokens=3, temperature=0.0)
        assert "[CASE:case-001]" in out
        assert "[CASE:case-002]" not in out

    def test_no_sections_yields_empty(self):
        assert ExtractiveBackend().generate("no markers here", 100, 0.0) == ""


class TestScriptedBackend:
    def test_replays_in_order(self):
        backend = ScriptedBackend(["first", "second"])
        assert backend.generate("p", 10, 0.0) == "first"
        assert backend.generate("p", 10, 0.0) == "second"
        assert backend.calls == 2

    def test_exhaustion_raises(self):
        backend = ScriptedBackend(["only"])
        backend.generate("p", 10, 0.0)
        with pytest.raises(BackendUnavailable):
            backend.generate("p", 10, 0.0)

    def test_from_file_list(self, tmp_path):
        path = tmp_path / "script.json"
        path.write_text(json.dumps(["a", "b"]), encoding="utf-8")
        backend = ScriptedBackend.from_file(str(path))
        assert backend.generate("p", 10, 0.0) == "a"
        assert backend.generate("p", 10, 0.0) == "b"

    def test_from_file_dict_ordered_by_numeric_key(self, tmp_path):
        path = tmp_path / "script.json"
        path.write_text(json.dumps({"10": "late", "2": "early"}), encoding="utf-8")
        backend = ScriptedBackend.from_file(str(path))
        assert backend.generate("p", 10, 0.0) == "early"
        assert backend.generate("p", 10, 0.0) == "late"


def make_generator(handler, **kw):
    transport = httpx.MockTransport(handler)
    return RemoteGenerator(
        "http://testserver/generate",
        model="test-model",
        backoff=0.0,
        transport=transport,
        **kw,
    )


class TestRemoteGenerator:
    def test_success_round_trip(self):
        seen = {}

        def handler(request):
            seen["payload"] = json.loads(request.content)
            return httpx.Response(200, json={"text": "generated insight"})

        gen = make_generator(handler)
        try:
            assert gen.generate("the prompt", 64, 0.2) == "generated insight"
        finally:
            gen.close()
        assert seen["payload"] == {
            "model": "test-model",
            "prompt": "the prompt",
            "max_tokens": 64,
            "temperature": 0.2,
        }

    def test_auth_header_sent_when_token_given(self):
        seen = {}

        def handler(request):
            seen["auth"] = request.headers.get("authorization")
            return httpx.Response(200, json={"text": "ok"})

        gen = make_generator(handler, auth_token="sekrit")
        try:
            gen.generate("p", 8, 0.0)
        finally:
            gen.close()
        assert seen["auth"] == "Bearer sekrit"

    def test_server_errors_retried_then_raise(self):
        calls = {"n": 0}

        def handler(request):
            calls["n"] += 1
            return httpx.Response(503, text="down")

        gen = make_generator(handler, max_retries=2)
        try:
            with pytest.raises(BackendUnavailable):
                gen.generate("p", 8, 0.0)
        finally:
            gen.close()
        assert calls["n"] == 3

    def test_server_error_then_success(self):
        calls = {"n": 0}

        def handler(request):
            calls["n"] += 1
            if calls["n"] == 1:
                return httpx.Response(500, text="flaky")
            return httpx.Response(200, json={"text": "recovered"})

        gen = make_generator(handler, max_retries=2)
        try:
            assert gen.generate("p", 8, 0.0) == "recovered"
        finally:
            gen.close()
        assert calls["n"] == 2

    def test_client_error_not_retried(self):
        calls = {"n": 0}

        def handler(request):
            calls["n"] += 1
            return httpx.Response(400, text="bad request")

        gen = make_generator(handler, max_retries=3)
        try:
            with pytest.raises(BackendUnavailable):
                gen.generate("p", 8, 0.0)
        finally:
            gen.close()
        assert calls["n"] == 1

    def test_malformed_body_raises(self):
        def handler(request):
            return httpx.Response(200, json={"output": "missing text key"})

        gen = make_generator(handler)
        try:
            with pytest.raises(BackendUnavailable):
                gen.generate("p", 8, 0.0)
        finally:
            gen.close()

    def test_network_error_retried(self):
        calls = {"n": 0}

        def handler(request):
            calls["n"] += 1
            if calls["n"] < 3:
                raise httpx.ConnectError("refused")
            return httpx.Response(200, json={"text": "late"})

        gen = make_generator(handler, max_retries=2)
        try:
            assert gen.generate("p", 8, 0.0) == "late"
        finally:
            gen.close()
        assert calls["n"] == 3
