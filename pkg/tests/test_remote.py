import pytest

from defkit.corpus import TaskKind, split_examples
from defkit.errors import BackendError
from defkit.scorer import GenerationParams, RemoteBackend, score
from defkit.stubserver import StubServer, echo_generation

from conftest import make_task


def echo_task(n=4):
    inputs = [f"sentence number {i}" for i in range(n)]
    return make_task(
        task_id="task_echo",
        kind=TaskKind.GENERATION,
        label_list=None,
        n_instances=n,
        inputs=inputs,
        references=[[inp] for inp in inputs],
    )


def fit_set(task):
    fit, _ = split_examples(task, len(task.instances), 0, 0)
    return fit


class TestEchoGeneration:
    def test_extracts_last_input_block(self):
        prompt = (
            "Definition: d\n"
            "Positive Example 1- Input: a Output: b\n"
            "Now complete the following example- Input: the payload Output:"
        )
        assert echo_generation(prompt) == "the payload"

    def test_no_marker_passthrough(self):
        assert echo_generation("plain text") == "plain text"


class TestRemoteBackend:
    def test_echo_alignment_scores_one(self):
        task = echo_task()
        with StubServer() as server:
            backend = RemoteBackend(server.url, GenerationParams())
            record = score(task.definition, task, fit_set(task), backend)
        assert record.per_instance == (1.0,) * 4
        assert backend.calls == 1

    def test_request_payload_and_params(self):
        task = echo_task(2)
        params = GenerationParams(max_new_tokens=32, temperature=0.5, seed=7)
        with StubServer() as server:
            backend = RemoteBackend(server.url, params)
            score(task.definition, task, fit_set(task), backend)
            body = server.requests[0]["body"]
        assert len(body["prompts"]) == 2
        assert body["max_new_tokens"] == 32
        assert body["temperature"] == 0.5
        assert body["seed"] == 7

    def test_bearer_token_from_environment(self, monkeypatch):
        monkeypatch.setenv("DEFKIT_API_KEY", "sekrit")
        task = echo_task(2)
        with StubServer() as server:
            backend = RemoteBackend(server.url, GenerationParams())
            score(task.definition, task, fit_set(task), backend)
            auth = server.requests[0]["authorization"]
        assert auth == "Bearer sekrit"

    def test_no_token_no_header(self, monkeypatch):
        monkeypatch.delenv("DEFKIT_API_KEY", raising=False)
        task = echo_task(2)
        with StubServer() as server:
            backend = RemoteBackend(server.url, GenerationParams())
            score(task.definition, task, fit_set(task), backend)
            assert server.requests[0]["authorization"] is None

    def test_misaligned_response_fails_fast(self):
        task = echo_task(3)
        with StubServer(mode="misaligned") as server:
            backend = RemoteBackend(server.url, GenerationParams())
            with pytest.raises(BackendError, match="misaligned"):
                score(task.definition, task, fit_set(task), backend)
        # a contract violation is not retried
        assert backend.calls == 1

    def test_server_errors_exhaust_retries(self):
        task = echo_task(2)
        with StubServer(mode="error") as server:
            backend = RemoteBackend(server.url, GenerationParams(), backoffs=(0, 0))
            with pytest.raises(BackendError, match="after retries"):
                score(task.definition, task, fit_set(task), backend)
            assert len(server.requests) == 3  # initial attempt + 2 retries

    def test_unreachable_endpoint(self):
        task = echo_task(2)
        backend = RemoteBackend("http://127.0.0.1:1/generate", GenerationParams(), backoffs=())
        with pytest.raises(BackendError, match="unreachable"):
            score(task.definition, task, fit_set(task), backend)

    def test_batched_requests_preserve_order(self):
        task = echo_task(5)
        with StubServer() as server:
            backend = RemoteBackend(
                server.url, GenerationParams(), batch_size=2, max_in_flight=2
            )
            record = score(task.definition, task, fit_set(task), backend)
            sizes = sorted(len(r["body"]["prompts"]) for r in server.requests)
        assert record.per_instance == (1.0,) * 5
        assert sizes == [1, 2, 2]
