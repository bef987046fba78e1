import json
from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from actantial.cache import FileCache, content_key
from actantial.chat import ChatConfig, ChatClient, EndpointError, StubChatClient, greedy_payload
from actantial.corpus import Article, Corpus
from actantial.extraction import (
    ROLE_PAIRS,
    ROLES,
    ActantialModel,
    ActantParseError,
    ActantRole,
    ExtractionRecord,
    detect_syncretisms,
    extract_corpus,
    pair_name,
    parse_actants,
    read_records,
    render_prompt,
    truncate_body,
    write_records,
)

from conftest import chat_reply

GOLDEN = (Path(__file__).parent / "data" / "prompt_golden.txt").read_text(encoding="utf-8")
R = ActantRole


# --- prompt -------------------------------------------------------------------------


def test_prompt_golden_byte_exact():
    body = "X attacked Y."
    head, tail = GOLDEN.split("{{ article }}")
    assert render_prompt(body) == head + body + tail
    assert render_prompt(body).endswith("Answer:")


def test_prompt_contains_article_line_and_format():
    p = render_prompt("X attacked Y.")
    assert "\nArticle: X attacked Y.\n" in p
    assert '{"Actant Label": ["Actant Name"]}' in p
    assert '{"Actant Label": []}' in p


def test_prompts_differ_only_in_article():
    a, b = render_prompt("first body"), render_prompt("the second one")
    head, tail = GOLDEN.split("{{ article }}")
    assert a[len(head):len(a) - len(tail)] == "first body"
    assert b[len(head):len(b) - len(tail)] == "the second one"


def test_prompt_rejects_empty():
    with pytest.raises(ValueError):
        render_prompt("   ")


# --- parsing --------------------------------------------------------------------------


def test_parse_worked_example():
    raw = ('{"Subject": ["Israel"], "Object": ["Gaza"], "Sender": ["Israel"], '
           '"Receiver": ["Gaza"], "Helper": ["United States"], "Opponent": ["Hamas"]}')
    m = parse_actants(raw)
    assert m.primary(R.SUBJECT) == "Israel"
    assert m.primary(R.HELPER) == "United States"
    assert detect_syncretisms(m) == {(R.SUBJECT, R.SENDER), (R.OBJECT, R.RECEIVER)}


def test_parse_all_empty():
    m = parse_actants('{"Subject": [], "Object": [], "Sender": [], "Receiver": [], "Helper": [], "Opponent": []}')
    assert all(m.primary(r) is None for r in ROLES)


def test_parse_fenced_string_values():
    raw = '```json\n{"Subject":"A", "Object": "B", "Helper": ["C", "D"],}\n```'
    m = parse_actants(raw)
    # hand-parsed expectation
    expected = ActantialModel({R.SUBJECT: ("A",), R.OBJECT: ("B",), R.HELPER: ("C", "D")})
    assert m == expected
    assert m.actors[R.SENDER] == ()


def test_parse_prose_wrapper_and_key_case():
    raw = 'Sure! Here you go:\n{"subject": ["  Joe   Biden "], "OPPONENT": ["Hamas"]}\nHope this helps {'
    m = parse_actants(raw)
    assert m.primary(R.SUBJECT) == "Joe Biden"
    assert m.primary(R.OPPONENT) == "Hamas"


def test_parse_braces_inside_strings():
    m = parse_actants('{"Subject": ["the {odd} name"], "Object": ["}"]}')
    assert m.primary(R.SUBJECT) == "the {odd} name"
    assert m.primary(R.OBJECT) == "}"


@pytest.mark.parametrize("raw", ["", "no json at all", "{broken", "[1, 2]", '{"Subject": [}'])
def test_parse_errors_carry_raw(raw):
    with pytest.raises(ActantParseError) as exc:
        parse_actants(raw)
    assert exc.value.raw == raw


@settings(max_examples=300, deadline=None)
@given(st.text(alphabet=st.sampled_from('{}[]",:` \nabcSubjectHelper\\'), max_size=80) | st.text(max_size=60))
def test_parse_is_total(raw):
    try:
        m = parse_actants(raw)
    except ActantParseError:
        return
    assert isinstance(m, ActantialModel)


# --- syncretisms ---------------------------------------------------------------------


def test_syncretism_examples():
    assert detect_syncretisms(ActantialModel.from_primaries(subject="Israel", sender="Israel")) == {
        (R.SUBJECT, R.SENDER)
    }
    assert detect_syncretisms(ActantialModel.from_primaries(subject="israel", sender="Israel ")) == {
        (R.SUBJECT, R.SENDER)
    }
    distinct = ActantialModel.from_primaries(
        subject="a", object="b", sender="c", receiver="d", helper="e", opponent="f"
    )
    assert detect_syncretisms(distinct) == set()


def test_syncretism_uses_primary_only():
    m = ActantialModel({R.SUBJECT: ("A", "B"), R.OPPONENT: ("B",)})
    assert detect_syncretisms(m) == set()


def test_syncretism_case_sensitive_mode():
    m = ActantialModel.from_primaries(subject="israel", sender="Israel")
    assert detect_syncretisms(m, case_sensitive=True) == set()


def test_role_pairs_and_names():
    assert len(ROLE_PAIRS) == 15
    assert pair_name((R.SUBJECT, R.SENDER)) == "Subject-Sender"
    assert [r.code for r in ROLES] == ["Su", "Ob", "Se", "Re", "He", "Op"]


actor = st.sampled_from(["Israel", "israel", "ISRAEL ", "Hamas", "Gaza", "  gaza", "Qatar"])
models = st.fixed_dictionaries({r: st.one_of(st.none(), actor) for r in ROLES}).map(
    lambda d: ActantialModel({r: () if v is None else (v,) for r, v in d.items()})
)


@settings(max_examples=200, deadline=None)
@given(models)
def test_syncretisms_symmetric_and_case_invariant(m):
    pairs = detect_syncretisms(m)
    assert all(a != b for a, b in pairs)
    # equality relation: symmetric and transitive over present roles
    linked = {frozenset(p) for p in pairs}
    for a, b in ROLE_PAIRS:
        if frozenset((a, b)) in linked:
            assert m.primary(a).strip().casefold() == m.primary(b).strip().casefold()
    upper = ActantialModel({r: tuple(x.upper() for x in m.actors[r]) for r in ROLES})
    assert detect_syncretisms(upper) == pairs


# --- records and extraction ----------------------------------------------------------------


def _corpus(n=3):
    return Corpus([Article(f"a{i}", "s", f"Body number {i} about Gaza.") for i in range(n)])


VALID = json.dumps({"Subject": ["Israel"], "Object": ["Gaza"], "Sender": [], "Receiver": [],
                    "Helper": [], "Opponent": ["Hamas"]})


def test_greedy_payload():
    p = greedy_payload("m", "hello", 100)
    assert p["temperature"] == 0 and p["top_p"] == 1
    assert p["messages"] == [{"role": "user", "content": "hello"}]


def test_extract_with_stub_endpoint_echoing_fixed_answer(fake_endpoint, tmp_path):
    srv = fake_endpoint(lambda path, body: (200, chat_reply(VALID)))
    client = ChatClient(ChatConfig(base_url=srv.url, model="m", backoff=0))
    recs = extract_corpus(_corpus(4), client, FileCache(tmp_path / "cache"), concurrency=2)
    assert [r.article_id for r in recs] == ["a0", "a1", "a2", "a3"]
    assert all(r.ok for r in recs)
    assert len({r.model for r in recs}) == 1
    path, body = srv.requests[0]
    assert path == "/v1/chat/completions"
    assert body["temperature"] == 0 and body["model"] == "m"


def test_second_run_makes_no_calls(fake_endpoint, tmp_path):
    srv = fake_endpoint(lambda path, body: (200, chat_reply(VALID)))
    cache = FileCache(tmp_path / "cache")
    client = ChatClient(ChatConfig(base_url=srv.url, model="m", backoff=0))
    first = extract_corpus(_corpus(), client, cache)
    n = len(srv.requests)
    second = extract_corpus(_corpus(), client, FileCache(tmp_path / "cache"))
    assert len(srv.requests) == n == 3
    assert all(r.cached for r in second)
    assert [r.to_json() for r in first] == [r.to_json() for r in second]


def test_cache_key_is_prompt_and_model(fake_endpoint, tmp_path):
    srv = fake_endpoint(lambda path, body: (200, chat_reply(VALID)))
    cache = FileCache(tmp_path / "cache")
    client = ChatClient(ChatConfig(base_url=srv.url, model="m", backoff=0))
    extract_corpus(_corpus(1), client, cache)
    key = content_key(render_prompt("Body number 0 about Gaza."), "m")
    assert cache.get(key)["response"] == VALID
    # different model id → cache miss
    other = ChatClient(ChatConfig(base_url=srv.url, model="m2", backoff=0))
    extract_corpus(_corpus(1), other, cache)
    assert len(srv.requests) == 2


def test_server_error_isolated_to_one_article(fake_endpoint):
    def handler(path, body):
        if "Body number 1 " in body["messages"][0]["content"]:
            return 500, {"error": "boom"}
        return 200, chat_reply(VALID)

    srv = fake_endpoint(handler)
    client = ChatClient(ChatConfig(base_url=srv.url, max_retries=3, backoff=0))
    recs = extract_corpus(_corpus(), client, None, concurrency=1)
    assert [r.status for r in recs] == ["ok", "endpoint_error", "ok"]
    assert recs[1].attempts == 3
    failing = [b for _, b in srv.requests if "Body number 1 " in b["messages"][0]["content"]]
    assert len(failing) == 3


def test_client_error_not_retried(fake_endpoint):
    srv = fake_endpoint(lambda path, body: (401, {"error": "unauthorized"}))
    client = ChatClient(ChatConfig(base_url=srv.url, max_retries=3, backoff=0))
    with pytest.raises(EndpointError, match="401"):
        client.complete("hi")
    assert len(srv.requests) == 1


def test_api_key_from_environment(fake_endpoint, monkeypatch):
    srv = fake_endpoint(lambda path, body: (200, chat_reply(VALID)))
    monkeypatch.setenv("ACTANTIAL_CHAT_API_KEY", "sekret")
    ChatClient(ChatConfig(base_url=srv.url)).complete("hi")
    assert srv.headers[0]["Authorization"] == "Bearer sekret"


def test_parse_error_is_a_record(tmp_path):
    stub = tmp_path / "r.jsonl"
    stub.write_text(json.dumps({"id": "a0", "response": "I cannot"}) + "\n"
                    + json.dumps({"id": "a1", "response": VALID}) + "\n")
    recs = extract_corpus(_corpus(2), StubChatClient(stub), None)
    assert [r.status for r in recs] == ["parse_error", "ok"]
    assert recs[0].raw_response == "I cannot"


def test_stub_unknown_id_is_endpoint_error(tmp_path):
    stub = tmp_path / "r.jsonl"
    stub.write_text(json.dumps({"id": "a0", "response": VALID}) + "\n")
    recs = extract_corpus(_corpus(2), StubChatClient(stub), None)
    assert [r.status for r in recs] == ["ok", "endpoint_error"]


def test_extraction_is_deterministic(tmp_path):
    stub = tmp_path / "r.jsonl"
    stub.write_text("".join(json.dumps({"id": f"a{i}", "response": VALID}) + "\n" for i in range(5)))
    a = extract_corpus(_corpus(5), StubChatClient(stub), None, concurrency=4)
    b = extract_corpus(_corpus(5), StubChatClient(stub), None, concurrency=1)
    assert a == b


def test_truncation_flag():
    assert truncate_body("abcdef", 3) == ("abc", True)
    assert truncate_body("abc", 3) == ("abc", False)
    assert truncate_body("abc", None) == ("abc", False)


def test_records_roundtrip(tmp_path):
    recs = [
        ExtractionRecord("a", VALID, "ok", model=parse_actants(VALID), attempts=1),
        ExtractionRecord("b", "junk", "parse_error", attempts=1, error="no json"),
        ExtractionRecord("c", "", "endpoint_error", attempts=3, truncated=True, error="down"),
    ]
    write_records(recs, tmp_path / "x.jsonl")
    assert read_records(tmp_path / "x.jsonl") == recs


def test_record_invariant():
    with pytest.raises(ValueError):
        ExtractionRecord("a", "junk", "parse_error", model=parse_actants(VALID))
    with pytest.raises(ValueError):
        ExtractionRecord("a", VALID, "ok")


def test_model_json_roundtrip():
    m = ActantialModel({R.SUBJECT: ("A", "B"), R.HELPER: ("C",)})
    assert ActantialModel.from_json(m.to_json()) == m
    assert m.to_json()["Object"] == []
