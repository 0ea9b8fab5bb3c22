"""Runner for the shared prediction-protocol conformance vectors.

Deliberately a sibling of the runner in the primary package's tests:
the vectors file is the cross-component contract, the runner is not,
so each side interprets the vectors with its own copy and neither
package imports the other.
"""

import json
from pathlib import Path

VECTORS_PATH = Path(__file__).resolve().parents[2] / "docs" / "protocol_vectors.json"


def load_vectors() -> dict:
    return json.loads(VECTORS_PATH.read_text(encoding="utf-8"))


def _check_handshake(doc: dict, hs: dict) -> list[str]:
    problems = []
    for key in doc["handshake"]["required_keys"]:
        if key not in hs:
            problems.append(f"handshake missing {key!r}")
    if not problems:
        if not isinstance(hs["mask_token"], str) or not hs["mask_token"]:
            problems.append("mask_token must be a non-empty string")
        if not isinstance(hs["max_input_tokens"], int) or hs["max_input_tokens"] < 1:
            problems.append("max_input_tokens must be a positive integer")
        if not isinstance(hs["model_id"], str) or not hs["model_id"]:
            problems.append("model_id must be a non-empty string")
    return problems


def _check_predictions(expect: dict, top_k: int, preds: list[dict]) -> list[str]:
    problems = []
    if len(preds) > top_k:
        problems.append(f"{len(preds)} predictions for top_k={top_k}")
    for p in preds:
        if not isinstance(p.get("token"), str) or not isinstance(p.get("score"), (int, float)):
            problems.append(f"malformed prediction entry: {p!r}")
            return problems
    if expect.get("scores_in_unit_interval"):
        for p in preds:
            if not 0.0 <= p["score"] <= 1.0:
                problems.append(f"score out of range: {p!r}")
    if expect.get("sorted"):
        for a, b in zip(preds, preds[1:]):
            if a["score"] < b["score"]:
                problems.append(f"scores not descending: {a!r} before {b!r}")
            elif a["score"] == b["score"] and a["token"] >= b["token"]:
                problems.append(f"tie not broken by token: {a!r} before {b!r}")
    if expect.get("unique_tokens"):
        tokens = [p["token"] for p in preds]
        if len(set(tokens)) != len(tokens):
            problems.append(f"duplicate tokens in response: {tokens}")
    return problems


def run_vectors(adapter, doc: dict | None = None) -> list[str]:
    """All failures across the vector set, empty when conformant."""
    doc = doc if doc is not None else load_vectors()
    failures = []
    hs = adapter.handshake()
    mask_token = hs.get("mask_token", "")
    for case in doc["cases"]:
        name = case["name"]
        if case["kind"] == "handshake":
            failures.extend(f"{name}: {p}" for p in _check_handshake(doc, hs))
            continue
        text = case["request"]["text"].replace("{MASK}", mask_token)
        top_k = case["request"]["top_k"]
        expect = case["expect"]
        status, preds = adapter.predict(text, top_k)
        if "error" in expect:
            if status != expect["error"]:
                failures.append(f"{name}: expected {expect['error']}, got {status}")
            continue
        if status != "ok":
            failures.append(f"{name}: expected ok, got {status}")
            continue
        failures.extend(f"{name}: {p}" for p in _check_predictions(expect, top_k, preds))
        if expect.get("deterministic_repeat"):
            status2, preds2 = adapter.predict(text, top_k)
            if status2 != "ok" or preds2 != preds:
                failures.append(f"{name}: repeated request returned a different response")
    return failures
