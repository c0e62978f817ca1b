"""Manifest assembly: transcripts + audio in, curated JSONL out.

Every kept entry is a 5-30 s mono segment at 16 kHz with normalized
text. Rows containing UNINTELLIGIBLE are dropped, as are spans the
cutter skips; rows whose text normalizes to nothing count as errors.
"""

import json
from dataclasses import dataclass, field
from pathlib import Path

from .. import textnorm
from ..errors import EmptyAfterNormalization, MissingAudio, OutOfBounds
from .audio import Skipped, cut_segment, read_wav, resample_8k_to_16k, write_wav
from .transcripts import parse_transcript

MANIFEST_KEYS = ("id", "audio_path", "start_s", "end_s", "duration_s",
                 "sample_rate_hz", "text_raw", "text_norm")


@dataclass(frozen=True)
class ManifestEntry:
    id: str
    audio_path: str
    start_s: float
    end_s: float
    duration_s: float
    sample_rate_hz: int
    text_raw: str
    text_norm: str

    def to_json(self) -> str:
        return json.dumps({k: getattr(self, k) for k in MANIFEST_KEYS},
                          ensure_ascii=False)


@dataclass
class ManifestSummary:
    parsed: int = 0
    kept: int = 0
    dropped_unintelligible: int = 0
    dropped_length: int = 0
    errors: int = 0
    error_messages: list = field(default_factory=list)
    parse_errors: list = field(default_factory=list)


def _process_record(idx, record, source_audio, segments_dir, out_dir,
                    short_policy, digit_serial, summary, entries):
    if textnorm.is_unintelligible(record.text_raw):
        summary.dropped_unintelligible += 1
        return
    min_s = 5.0
    if short_policy == "drop" and record.end_s - record.start_s < min_s:
        summary.dropped_length += 1
        return
    try:
        segment = cut_segment(source_audio, record)
    except OutOfBounds as exc:
        summary.errors += 1
        summary.error_messages.append(f"{record.source_file}: {exc}")
        return
    if isinstance(segment, Skipped):
        summary.dropped_length += 1
        return
    try:
        text_norm = textnorm.normalize(record.text_raw, digit_serial=digit_serial)
    except EmptyAfterNormalization as exc:
        summary.errors += 1
        summary.error_messages.append(f"{record.source_file}: {exc}")
        return
    if segment.sample_rate_hz == 8000:
        segment = resample_8k_to_16k(segment)

    entry_id = f"{Path(record.source_file).stem}-{idx:04d}"
    rel_path = f"segments/{entry_id}.wav"
    write_wav(out_dir / rel_path, segment)
    entries.append(ManifestEntry(
        id=entry_id,
        audio_path=rel_path,
        start_s=record.start_s,
        end_s=record.end_s,
        duration_s=segment.duration_s,
        sample_rate_hz=segment.sample_rate_hz,
        text_raw=record.text_raw,
        text_norm=text_norm,
    ))
    summary.kept += 1


def build_manifest(transcript_dir: str, audio_dir: str, out_path: str,
                   short_policy: str = "pad",
                   digit_serial: bool = False) -> ManifestSummary:
    """Build the curated manifest at `out_path` (JSON lines); cut segments
    are written next to it under segments/. Deterministic for fixed
    inputs: transcript files process in sorted order."""
    if short_policy not in ("pad", "drop"):
        raise ValueError(f"short_policy must be pad or drop, got {short_policy!r}")
    transcript_dir = Path(transcript_dir)
    audio_dir = Path(audio_dir)
    out_path = Path(out_path)
    out_dir = out_path.parent
    (out_dir / "segments").mkdir(parents=True, exist_ok=True)

    summary = ManifestSummary()
    entries: list[ManifestEntry] = []
    for tx_path in sorted(transcript_dir.glob("*.txt")):
        wav_path = audio_dir / (tx_path.stem + ".wav")
        if not wav_path.exists():
            raise MissingAudio(f"no audio for transcript {tx_path.name}")
        source_audio = read_wav(wav_path)
        records, parse_errors = parse_transcript(tx_path.read_text(), tx_path.name)
        summary.parse_errors.extend(parse_errors)
        summary.parsed += len(records)
        for idx, record in enumerate(records):
            _process_record(idx, record, source_audio, out_dir / "segments",
                            out_dir, short_policy, digit_serial, summary, entries)

    with open(out_path, "w") as f:
        for entry in entries:
            f.write(entry.to_json() + "\n")
    return summary


def load_manifest(path: str) -> list[ManifestEntry]:
    entries = []
    with open(path) as f:
        for line in f:
            if line.strip():
                entries.append(ManifestEntry(**json.loads(line)))
    return entries
