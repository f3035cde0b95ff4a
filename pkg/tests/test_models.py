import json
import threading
import warnings

import httpx
import pytest

from semql.errors import FixtureParseError, ProviderError
from semql.models import (
    ORACLE,
    AccuracyProfile,
    CallableProvider,
    ConcurrencyLimiter,
    ConsistentProvider,
    HttpProvider,
    ModelRequest,
    ModelResponse,
    ProviderRegistry,
    RecordingProvider,
    RetryingProvider,
    ScriptedProvider,
    SyntheticBooleanProvider,
    Task,
    http_provider,
    load_provider_config,
    request_digest,
)
from semql.models.http import parse_bool_answer


def filt(prompt, model="m"):
    return ModelRequest(Task.FILTER_BOOL, model, prompt)


def record(prompt, response, task="FilterBool", model="m", labels=None):
    return {"task": task, "model": model, "digest": request_digest(prompt, labels), "response": response}


class TestRequests:
    def test_empty_prompt_rejected(self):
        with pytest.raises(ValueError):
            ModelRequest(Task.COMPLETE, "m", "")

    def test_labels_only_for_classify(self):
        with pytest.raises(ValueError):
            ModelRequest(Task.CLASSIFY_MULTI, "m", "p")
        with pytest.raises(ValueError):
            ModelRequest(Task.COMPLETE, "m", "p", labels=("a",))

    def test_digest_ignores_label_order(self):
        a = ModelRequest(Task.CLASSIFY_MULTI, "m", "p", labels=("x", "y"))
        b = ModelRequest(Task.CLASSIFY_MULTI, "m", "p", labels=("y", "x"))
        assert a.digest == b.digest

    def test_confidence_range(self):
        with pytest.raises(ValueError):
            ModelResponse(confidence=1.5)


class TestScripted:
    def test_lookup(self):
        p = ScriptedProvider.from_records([record("is it?", {"bool_value": True, "confidence": 0.92})])
        r = p.invoke(filt("is it?"))
        assert r.bool_value is True and r.confidence == 0.92
        assert p.stats.call_count == 1

    def test_empty_fixture_errors(self):
        p = ScriptedProvider.from_lines([])
        with pytest.raises(ProviderError) as exc:
            p.invoke(filt("anything"))
        assert not exc.value.retryable

    def test_model_and_task_are_part_of_key(self):
        p = ScriptedProvider.from_records([record("q", {"bool_value": True, "confidence": 1.0})])
        with pytest.raises(ProviderError):
            p.invoke(filt("q", model="other"))
        with pytest.raises(ProviderError):
            p.invoke(ModelRequest(Task.COMPLETE, "m", "q"))

    def test_duplicate_last_wins_with_warning(self):
        lines = [
            json.dumps(record("q", {"bool_value": True, "confidence": 0.6})),
            json.dumps(record("q", {"bool_value": False, "confidence": 0.7})),
        ]
        with pytest.warns(UserWarning, match="duplicate"):
            p = ScriptedProvider.from_lines(lines)
        assert p.invoke(filt("q")).bool_value is False

    @pytest.mark.parametrize(
        "bad,line",
        [
            (["{not json"], 1),
            ([json.dumps(record("q", {})), json.dumps({"task": "FilterBool"})], 2),
            (["", json.dumps(record("q", {}, task="Nope"))], 2),
            ([json.dumps(record("q", {"colour": 1}))], 1),
        ],
    )
    def test_parse_errors_carry_line(self, bad, line):
        with pytest.raises(FixtureParseError) as exc:
            ScriptedProvider.from_lines(bad)
        assert exc.value.line == line

    def test_file_roundtrip(self, tmp_path):
        path = tmp_path / "f.jsonl"
        path.write_text(json.dumps(record("hello", {"text": "hi"}, task="Complete")) + "\n")
        p = ScriptedProvider.from_file(path)
        assert p.invoke(ModelRequest(Task.COMPLETE, "m", "hello")).text == "hi"


class TestRecordReplay:
    def test_roundtrip(self, tmp_path):
        inner = CallableProvider(lambda req: ModelResponse(text=req.prompt.upper()))
        rec = RecordingProvider(inner, tmp_path / "rec.jsonl")
        reqs = [ModelRequest(Task.COMPLETE, "m", f"p{i}") for i in range(5)]
        live = [rec.invoke(r) for r in reqs]
        replay = ScriptedProvider.from_file(tmp_path / "rec.jsonl")
        assert [replay.invoke(r) for r in reqs] == live
        assert rec.replay().stats.call_count == 0

    def test_exec_stats_identical_on_replay(self):
        from semql import scenarios as S
        from semql.exec import execute
        from semql.planner import plan_query

        sc = S.review_join()
        _, plan = plan_query(sc.sql, sc.tables)
        live = sc.providers()
        rec = RecordingProvider(live.providers["default"], name="default")
        t1, s1 = execute(plan, sc.tables, ProviderRegistry({"default": rec}))
        t2, s2 = execute(plan, sc.tables, ProviderRegistry({"default": rec.replay()}))
        assert t1.rows == t2.rows
        assert s1.to_dict(timing=False) == s2.to_dict(timing=False)


class TestHallucination:
    def test_foreign_labels_dropped_and_counted(self):
        p = CallableProvider(lambda req: ModelResponse(labels=("a", "zzz", "b", "a")))
        r = p.invoke(ModelRequest(Task.CLASSIFY_MULTI, "m", "p", labels=("a", "b")))
        assert r.labels == ("a", "b")
        assert p.stats.label_hallucination == 1


class TestSynthetic:
    truth = {f"row {i}": i % 2 == 0 for i in range(400)}

    def answers(self, profile, seed):
        p = SyntheticBooleanProvider(self.truth, profile, seed)
        return [(r.bool_value, r.confidence) for r in (p.invoke(filt(k)) for k in self.truth)]

    def test_oracle_always_right(self):
        out = self.answers(ORACLE, 0)
        assert all(b == self.truth[k] and c == 1.0 for (b, c), k in zip(out, self.truth))

    def test_deterministic_under_seed(self):
        prof = AccuracyProfile(0.8, noise=0.1)
        assert self.answers(prof, 7) == self.answers(prof, 7)
        assert self.answers(prof, 7) != self.answers(prof, 8)

    def test_perfect_proxy_matches_oracle(self):
        assert [b for b, _ in self.answers(AccuracyProfile(1.0), 3)] == [b for b, _ in self.answers(ORACLE, 3)]

    def test_coin_flip_proxy_f1_near_half(self):
        f1s = []
        for seed in range(10):
            out = self.answers(AccuracyProfile(0.5), seed)
            tp = sum(1 for (b, _), k in zip(out, self.truth) if b and self.truth[k])
            fp = sum(1 for (b, _), k in zip(out, self.truth) if b and not self.truth[k])
            fn = sum(1 for (b, _), k in zip(out, self.truth) if not b and self.truth[k])
            f1s.append(2 * tp / (2 * tp + fp + fn))
        assert abs(sum(f1s) / len(f1s) - 0.5) <= 0.05

    def test_peaked_confidence(self):
        out = self.answers(AccuracyProfile(0.8), 1)
        right = [c for (b, c), k in zip(out, self.truth) if b == self.truth[k]]
        wrong = [c for (b, c), k in zip(out, self.truth) if b != self.truth[k]]
        assert sum(right) / len(right) > 0.9
        assert max(wrong) <= 0.6

    def test_calibrated_confidence_matches_accuracy(self):
        truth = {f"r{i}": True for i in range(4000)}
        p = SyntheticBooleanProvider(truth, AccuracyProfile(0.8, "calibrated"), 2)
        out = [p.invoke(filt(k)) for k in truth]
        acc = sum(r.bool_value for r in out) / len(out)
        mean_conf = sum(r.confidence for r in out) / len(out)
        assert acc == pytest.approx(0.8, abs=0.03)
        assert mean_conf == pytest.approx(acc, abs=0.03)

    def test_missing_truth_errors(self):
        with pytest.raises(ProviderError):
            SyntheticBooleanProvider({}, ORACLE).invoke(filt("unknown"))


def test_consistent_provider_agrees():
    truth = lambda v: (len(v[0]) + len(v[1])) % 3 == 0
    p = ConsistentProvider("Review {0} is mapped to category {1}", truth, label_index=1)
    labels = ("aa", "bbb", "c", "dddd")
    for review in ("x", "yy", "zzz"):
        want = [l for l in labels if p.invoke(filt(f"Review {review} is mapped to category {l}")).bool_value]
        got = p.invoke(ModelRequest(Task.CLASSIFY_MULTI, "m", f"Instr\nReview {review} is mapped to category <label>", labels=labels))
        assert list(got.labels) == want


class TestStatsConcurrency:
    def test_call_count_under_threads(self):
        p = CallableProvider(lambda req: ModelResponse(text="ok"))
        seen = []
        lock = threading.Lock()

        def work(k):
            for i in range(200):
                p.invoke(ModelRequest(Task.COMPLETE, f"m{k % 2}", f"{k}-{i}"))
                with lock:
                    seen.append(1)

        threads = [threading.Thread(target=work, args=(k,)) for k in range(8)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert p.stats.call_count == len(seen) == 1600
        assert p.stats.snapshot()["models"]["m0"]["call_count"] == 800


class TestWrappers:
    def test_retry_then_success(self):
        attempts = []

        def fn(req):
            attempts.append(1)
            if len(attempts) < 3:
                raise ProviderError("busy", retryable=True)
            return ModelResponse(text="ok")

        sleeps = []
        p = RetryingProvider(CallableProvider(fn), sleep=sleeps.append)
        assert p.invoke(ModelRequest(Task.COMPLETE, "m", "x")).text == "ok"
        assert len(sleeps) == 2
        assert 0.1 <= sleeps[0] < 0.2 and 0.2 <= sleeps[1] < 0.4

    def test_gives_up_after_three_retries(self):
        calls = []

        def fn(req):
            calls.append(1)
            raise ProviderError("busy", retryable=True)

        p = RetryingProvider(CallableProvider(fn), sleep=lambda s: None)
        with pytest.raises(ProviderError):
            p.invoke(ModelRequest(Task.COMPLETE, "m", "x"))
        assert len(calls) == 4

    def test_non_retryable_not_retried(self):
        calls = []

        def fn(req):
            calls.append(1)
            raise ProviderError("bad", retryable=False)

        with pytest.raises(ProviderError):
            RetryingProvider(CallableProvider(fn), sleep=lambda s: None).invoke(ModelRequest(Task.COMPLETE, "m", "x"))
        assert len(calls) == 1

    def test_concurrency_cap(self):
        gate = threading.Event()
        active = []
        lock = threading.Lock()
        peak = [0]

        def fn(req):
            with lock:
                active.append(1)
                peak[0] = max(peak[0], len(active))
            gate.wait(0.05)
            with lock:
                active.pop()
            return ModelResponse(text="ok")

        p = ConcurrencyLimiter(CallableProvider(fn), cap=3)
        threads = [threading.Thread(target=p.invoke, args=(ModelRequest(Task.COMPLETE, "m", str(i)),)) for i in range(12)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert peak[0] <= 3 and p.max_observed <= 3


class TestHttp:
    @pytest.fixture(autouse=True)
    def key(self, monkeypatch):
        monkeypatch.setenv("SEMQL_API_KEY", "secret")

    def client(self, handler):
        return httpx.Client(transport=httpx.MockTransport(handler))

    @staticmethod
    def reply(text, status=200):
        return httpx.Response(status, json={"choices": [{"message": {"content": text}}], "usage": {"prompt_tokens": 5, "completion_tokens": 2}})

    def test_wire_format_and_bool(self):
        seen = {}

        def handler(request):
            seen["url"] = str(request.url)
            seen["auth"] = request.headers["authorization"]
            seen["body"] = json.loads(request.content)
            return self.reply("true 0.9")

        p = HttpProvider("http://stub", client=self.client(handler))
        r = p.invoke(filt("Is it?"))
        assert r.bool_value is True and r.confidence == 0.9
        assert seen["url"] == "http://stub/v1/chat/completions"
        assert seen["auth"] == "Bearer secret"
        assert seen["body"]["model"] == "m"
        assert seen["body"]["messages"][0]["role"] == "user"
        assert seen["body"]["messages"][0]["content"].startswith("Is it?")
        assert "true" in seen["body"]["messages"][0]["content"][len("Is it?"):]
        assert r.usage == (5, 2)

    def test_503_then_200_retries_once(self):
        calls = []

        def handler(request):
            calls.append(1)
            return httpx.Response(503) if len(calls) == 1 else self.reply("false 0.7")

        p = http_provider("http://stub", client=self.client(handler), sleep=lambda s: None)
        r = p.invoke(filt("q"))
        assert r.bool_value is False and len(calls) == 2

    def test_maybe_is_non_retryable(self):
        calls = []

        def handler(request):
            calls.append(1)
            return self.reply("maybe")

        p = http_provider("http://stub", client=self.client(handler), sleep=lambda s: None)
        with pytest.raises(ProviderError) as exc:
            p.invoke(filt("q"))
        assert not exc.value.retryable and len(calls) == 1

    def test_4xx_not_retried(self):
        calls = []

        def handler(request):
            calls.append(1)
            return httpx.Response(401, text="nope")

        p = http_provider("http://stub", client=self.client(handler), sleep=lambda s: None)
        with pytest.raises(ProviderError):
            p.invoke(filt("q"))
        assert len(calls) == 1

    def test_timeout_is_retryable(self):
        def handler(request):
            raise httpx.ReadTimeout("slow", request=request)

        with pytest.raises(ProviderError) as exc:
            HttpProvider("http://stub", client=self.client(handler)).invoke(filt("q"))
        assert exc.value.retryable

    def test_missing_key(self, monkeypatch):
        monkeypatch.delenv("SEMQL_API_KEY")
        with pytest.raises(ProviderError):
            HttpProvider("http://stub", client=self.client(lambda r: self.reply("x"))).invoke(filt("q"))

    def test_classify_labels(self):
        p = HttpProvider("http://stub", client=self.client(lambda r: self.reply('["a", "q"]')))
        r = p.invoke(ModelRequest(Task.CLASSIFY_MULTI, "m", "p", labels=("a", "b")))
        assert r.labels == ("a",)
        assert p.stats.label_hallucination == 1

    @pytest.mark.parametrize("text,value", [("true 0.85", (True, 0.85)), ("FALSE 1", (False, 1.0)), ("true .5", (True, 0.5))])
    def test_parse_bool(self, text, value):
        assert parse_bool_answer(text) == value

    @pytest.mark.parametrize("text", ["yes", "true", "true 1.5", "0.9 true"])
    def test_parse_bool_rejects(self, text):
        with pytest.raises(ProviderError):
            parse_bool_answer(text)


class TestRegistry:
    def test_resolve_and_default(self):
        a, b = CallableProvider(lambda r: None, "a"), CallableProvider(lambda r: None, "b")
        reg = ProviderRegistry({"a": a, "b": b}, default="a")
        assert reg.resolve("b") == ("b", b)
        assert reg.resolve("llama") == ("llama", a)
        assert reg.resolve(None) == ("a", a)

    def test_config_file(self, tmp_path):
        (tmp_path / "f.jsonl").write_text(json.dumps(record("q", {"bool_value": True, "confidence": 1.0})) + "\n")
        (tmp_path / "truth.json").write_text(json.dumps({"x": True}))
        cfg = {
            "providers": [
                {"name": "m", "kind": "scripted", "params": {"fixture": "f.jsonl"}},
                {"name": "syn", "kind": "synthetic", "params": {"ground_truth": "truth.json", "seed": 3}},
            ],
            "default": "m",
        }
        (tmp_path / "p.json").write_text(json.dumps(cfg))
        reg = load_provider_config(tmp_path / "p.json")
        assert reg.resolve("m")[1].invoke(filt("q")).bool_value
        assert reg.resolve("syn")[1].invoke(filt("x", "syn")).bool_value
