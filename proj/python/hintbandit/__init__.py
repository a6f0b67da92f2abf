"""Adaptive hint selection for feature listing."""

import json

from . import _core
from ._core import (
    ArmUnavailable,
    Exp3Bandit,
    HintbanditError,
    IoError,
    ParseError,
    Rng,
    SchemaError,
    SessionExpired,
    StateError,
    UnknownWord,
    WordStore,
    binomial_test_greater,
    build_prompt,
    derive_seed,
    normalize_phrase,
    paired_t_test,
    parse_llm_reply,
    pearson,
    porter_stem,
    welch_t_test,
)

__all__ = [
    "ArmUnavailable", "Exp3Bandit", "HintbanditError", "IoError", "ParseError", "Rng",
    "SchemaError", "Session", "SessionExpired", "StateError", "UnknownWord", "WordStore",
    "binomial_test_greater", "build_prompt", "derive_seed", "export_csv", "normalize_phrase",
    "paired_t_test", "parse_llm_reply", "pearson", "porter_stem", "read_corpus",
    "replay_record", "run_chat_session", "run_mock_session", "session_metrics", "welch_t_test",
]


def _line(record):
    return record if isinstance(record, str) else json.dumps(record)


class Session:
    """One feature-listing session. Events and records come back as dicts."""

    def __init__(self, store, participant_id, concept, condition, **options):
        self._s = _core.Session(store, participant_id, concept, condition, **options)

    def submit_feature(self, phrase, now_ms):
        return json.loads(self._s.submit_feature(phrase, now_ms))

    def request_hint(self, now_ms):
        return json.loads(self._s.request_hint(now_ms))

    def finalize(self, now_ms, reason="finished"):
        return json.loads(self._s.finalize(now_ms, reason))

    @property
    def is_open(self):
        return self._s.is_open

    def is_expired(self, now_ms):
        return self._s.is_expired(now_ms)


def read_corpus(path):
    """Records from a JSONL corpus, validated against the schema."""
    with open(path, encoding="utf-8") as f:
        return [json.loads(_core.validate_record(l)) for l in f if l.strip()]


def replay_record(record, store):
    return json.loads(_core.replay_record(_line(record), store))


def session_metrics(record):
    return _core.session_metrics(_line(record))


def export_csv(records):
    """Per-session CSV export of the complete, non-practice records."""
    return _core.export_csv([_line(r) for r in records])


def run_mock_session(world, concept, condition, seed, profile_seed, participant_id="mock"):
    return json.loads(
        _core.run_mock_session(world, concept, condition, seed, profile_seed, participant_id))


def run_chat_session(reply, store, concept, condition, seed=0, max_turns=30,
                     participant_id="llm"):
    """Drives a session with `reply(messages, turn) -> str` standing in for the model."""
    return json.loads(
        _core.run_chat_session(reply, store, concept, condition, seed, max_turns,
                               participant_id))
