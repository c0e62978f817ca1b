import json

import numpy as np
import pytest

from atclab.corpus.audio import AudioBuffer, write_wav
from atclab.corpus.manifest import MANIFEST_KEYS, build_manifest, load_manifest
from atclab.errors import MissingAudio


def make_corpus(root, transcript_text, seconds=60, stem="tape1"):
    tx = root / "tx"
    au = root / "au"
    tx.mkdir(exist_ok=True)
    au.mkdir(exist_ok=True)
    (tx / f"{stem}.txt").write_text(transcript_text)
    n = seconds * 8000
    tone = 0.2 * np.sin(2 * np.pi * 400 * np.arange(n) / 8000)
    write_wav(au / f"{stem}.wav", AudioBuffer(tone, 8000))
    return tx, au


def test_unintelligible_dropped(tmp_path):
    tx, au = make_corpus(tmp_path, "\n".join([
        "((TIMES 0.0 6.0) (TEXT contact tower))",
        "((TIMES 10.0 16.0) (TEXT UNINTELLIGIBLE))",
    ]))
    summary = build_manifest(tx, au, tmp_path / "manifest.jsonl")
    assert summary.kept == 1
    assert summary.dropped_unintelligible == 1
    assert summary.parsed == 2


def test_empty_directory(tmp_path):
    (tmp_path / "tx").mkdir()
    (tmp_path / "au").mkdir()
    summary = build_manifest(tmp_path / "tx", tmp_path / "au",
                             tmp_path / "manifest.jsonl")
    assert (summary.parsed, summary.kept) == (0, 0)
    assert (tmp_path / "manifest.jsonl").read_text() == ""


def test_deterministic_bytes(tmp_path):
    text = "\n".join([
        "((TIMES 0.0 6.0) (TEXT runway 22 cleared))",
        "((TIMES 10.0 13.0) (TEXT short one))",
        "((TIMES 20.0 55.0) (TEXT way too long transmission))",
    ])
    out = []
    for run in ("a", "b"):
        root = tmp_path / run
        root.mkdir()
        tx, au = make_corpus(root, text)
        build_manifest(tx, au, root / "manifest.jsonl")
        out.append((root / "manifest.jsonl").read_bytes())
    assert out[0] == out[1]


def test_counts_invariant_and_schema(tmp_path):
    text = "\n".join([
        "((TIMES 0.0 6.0) (TEXT taxi to runway 220))",      # kept
        "((TIMES 10.0 16.0) (TEXT UNINTELLIGIBLE here))",   # dropped
        "((TIMES 20.0 55.0) (TEXT very long one))",         # too long
        "((TIMES 56.0 62.0) (TEXT ......))",                # empty after norm
        "((TIMES 95.0 99.0) (TEXT past the end))",          # out of bounds
    ])
    tx, au = make_corpus(tmp_path, text)
    summary = build_manifest(tx, au, tmp_path / "manifest.jsonl")
    assert summary.parsed == 5
    assert summary.parsed == (summary.kept + summary.dropped_unintelligible
                              + summary.dropped_length + summary.errors)
    assert summary.errors == 2

    entries = load_manifest(tmp_path / "manifest.jsonl")
    assert len(entries) == summary.kept == 1
    line = (tmp_path / "manifest.jsonl").read_text().splitlines()[0]
    assert tuple(json.loads(line).keys()) == MANIFEST_KEYS
    e = entries[0]
    assert e.text_norm == "taxi to runway two hundred and twenty"
    assert e.sample_rate_hz == 16000
    assert 5.0 <= e.duration_s <= 30.0
    assert (tmp_path / e.audio_path).exists()


def test_entry_invariants_hold_for_padded_segments(tmp_path):
    text = "((TIMES 2.0 4.0) (TEXT brief call))"
    tx, au = make_corpus(tmp_path, text)
    build_manifest(tx, au, tmp_path / "manifest.jsonl")
    [e] = load_manifest(tmp_path / "manifest.jsonl")
    assert e.duration_s == pytest.approx(5.0)
    assert e.start_s == 2.0 and e.end_s == 4.0


def test_short_policy_drop(tmp_path):
    text = "((TIMES 2.0 4.0) (TEXT brief call))"
    tx, au = make_corpus(tmp_path, text)
    summary = build_manifest(tx, au, tmp_path / "manifest.jsonl",
                             short_policy="drop")
    assert summary.kept == 0
    assert summary.dropped_length == 1


def test_missing_audio(tmp_path):
    tx = tmp_path / "tx"
    tx.mkdir()
    (tx / "lonely.txt").write_text("((TIMES 0 6) (TEXT a))")
    (tmp_path / "au").mkdir()
    with pytest.raises(MissingAudio):
        build_manifest(tx, tmp_path / "au", tmp_path / "manifest.jsonl")


def test_parse_errors_collected_not_fatal(tmp_path):
    text = "\n".join([
        "((TIMES 0.0 6.0) (TEXT fine))",
        "((TIMES 9.0 8.0) (TEXT backwards))",
    ])
    tx, au = make_corpus(tmp_path, text)
    summary = build_manifest(tx, au, tmp_path / "manifest.jsonl")
    assert summary.parsed == 1
    assert len(summary.parse_errors) == 1
