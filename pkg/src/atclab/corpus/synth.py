"""Synthetic ATC-phraseology corpus.

Each utterance is a callsign (airline word + digit words) followed by one
of six instruction templates; numbers are already in word form. Alongside
the transcript, every utterance gets a pseudo-acoustic stream: each word
maps through a fixed spelling-hash dictionary to 2-4 symbols out of 64,
and a ChannelProfile corrupts the stream with per-symbol substitution,
insertion and deletion. Everything is a pure function of
(seed, n_utterances, channel).
"""

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .transcripts import TransmissionRecord, serialize_record

N_SYMBOLS = 64

AIRLINES = (
    "american", "united", "delta", "southwest", "skywest", "jetblue",
    "alaska", "frontier", "spirit", "envoy", "republic", "cactus",
)

DIGITS = ("zero", "one", "two", "three", "four", "five", "six", "seven",
          "eight", "nine")

_NATO = ("alpha", "bravo", "charlie", "foxtrot", "golf", "hotel", "juliet",
         "kilo", "mike", "november", "papa", "quebec", "romeo", "sierra",
         "tango", "uniform", "victor", "whiskey", "xray", "yankee", "zulu")

_FACILITIES = ("tower", "ground", "departure", "approach", "center",
               "arrival", "clearance", "radio")

_WAYPOINTS = ("acton", "bonham", "cedar", "dumas", "eldon", "fargo",
              "gilmer", "hobart", "irving", "jasper", "keller", "lamesa",
              "marfa", "nocona", "odessa", "pampa", "quanah", "rankin",
              "sonora", "tulia", "uvalde", "vernon", "waskom", "yantis")


def _sample_digits(rng, lo, hi):
    return [DIGITS[d] for d in rng.integers(0, 10, rng.integers(lo, hi + 1))]


# The six instruction templates: heading, altitude, frequency change,
# runway clearance, hold short, readback.

def _t_heading(rng):
    roll = rng.random()
    if roll < 0.35:
        return ["fly", "heading"] + _sample_digits(rng, 3, 3)
    if roll < 0.7:
        return ["turn", "left" if rng.random() < 0.5 else "right",
                "heading"] + _sample_digits(rng, 3, 3)
    return ["proceed", "direct", _WAYPOINTS[rng.integers(0, len(_WAYPOINTS))]]

def _t_altitude(rng):
    if rng.random() < 0.3:
        return ["maintain", "flight", "level"] + _sample_digits(rng, 3, 3)
    verb = "climb" if rng.random() < 0.5 else "descend"
    words = [verb, "and", "maintain", DIGITS[rng.integers(1, 10)], "thousand"]
    if rng.random() < 0.3:
        words += [DIGITS[rng.integers(1, 10)], "hundred"]
    return words

def _t_frequency(rng):
    fac = _FACILITIES[rng.integers(0, len(_FACILITIES))]
    return ["contact", fac] + _sample_digits(rng, 3, 3) + ["point"] + \
        _sample_digits(rng, 1, 2)

def _t_runway(rng):
    words = ["runway"] + _sample_digits(rng, 2, 2)
    if rng.random() < 0.5:
        words.append(("left", "right", "center")[rng.integers(0, 3)])
    roll = rng.random()
    if roll < 0.4:
        words += ["cleared", "to", "land"]
    elif roll < 0.8:
        words += ["cleared", "for", "takeoff"]
    else:
        words += ["cleared", "low", "approach"]
    if rng.random() < 0.2:
        words += ["caution", "wake", "turbulence"]
    return words

def _t_hold_short(rng):
    words = ["hold", "short", "of", "runway"] + _sample_digits(rng, 2, 2)
    if rng.random() < 0.4:
        words += ["at", _NATO[rng.integers(0, len(_NATO))]]
    if rng.random() < 0.25:
        words += ["traffic", "on", "final"]
    return words

def _t_readback(rng):
    opener = ("roger", "wilco", "affirmative")[rng.integers(0, 3)]
    words = [opener, "readback", "correct"]
    roll = rng.random()
    if roll < 0.25:
        words += ["good", "day"]
    elif roll < 0.4:
        words += ["so", "long"]
    return words


_TEMPLATES = (_t_heading, _t_altitude, _t_frequency, _t_runway,
              _t_hold_short, _t_readback)


def grammar_vocabulary() -> tuple[str, ...]:
    """Every word the generator can emit, sorted."""
    words = set(AIRLINES) | set(DIGITS) | set(_NATO) | set(_FACILITIES) | \
        set(_WAYPOINTS) | {
            "fly", "heading", "turn", "left", "right", "proceed", "direct",
            "climb", "descend", "and", "maintain", "thousand", "hundred",
            "flight", "level", "contact", "point", "runway", "center",
            "cleared", "to", "land", "for", "takeoff", "low", "approach",
            "caution", "wake", "turbulence", "hold", "short", "of", "at",
            "traffic", "on", "final", "roger", "wilco", "affirmative",
            "readback", "correct", "good", "day", "so", "long",
        }
    return tuple(sorted(words))


def _hash_symbols(word: str, salt: int) -> tuple[int, ...]:
    tag = word if salt == 0 else f"{word}#{salt}"
    digest = hashlib.blake2b(tag.encode(), digest_size=8).digest()
    count = 2 + digest[0] % 3
    return tuple(digest[1 + i] % N_SYMBOLS for i in range(count))


def word_symbol_table() -> dict[str, tuple[int, ...]]:
    """Fixed word-to-symbols dictionary over the grammar vocabulary;
    collisions between words resolve by deterministic re-salting."""
    table: dict[str, tuple[int, ...]] = {}
    used: set[tuple[int, ...]] = set()
    for word in grammar_vocabulary():
        salt = 0
        symbols = _hash_symbols(word, salt)
        while symbols in used:
            salt += 1
            symbols = _hash_symbols(word, salt)
        table[word] = symbols
        used.add(symbols)
    return table


_SYMBOL_TABLE = word_symbol_table()


def _confusion_permutation(seed: int, support: int) -> np.ndarray:
    """Seeded permutation of the symbol alphabet that moves exactly
    `support` symbols (no fixed points among them) and fixes the rest."""
    rng = np.random.default_rng(seed)
    moved = np.sort(rng.permutation(N_SYMBOLS)[:support])
    perm = np.arange(N_SYMBOLS)
    while True:
        shuffled = rng.permutation(moved)
        if not np.any(shuffled == moved):
            perm[moved] = shuffled
            return perm


@dataclass(frozen=True)
class ChannelProfile:
    """Per-symbol corruption: substitution through a fixed confusion
    permutation, random insertion after a symbol, and deletion.
    `confusion_support` limits how many symbols the permutation moves.
    The optional mixture weights skew which templates/airlines a domain
    favors; together with the confusion permutation they define the
    domain shift between the two built-in channels."""
    name: str
    p_sub: float
    p_ins: float
    p_del: float
    confusion_seed: int
    confusion_support: int = N_SYMBOLS
    template_weights: tuple = (1, 1, 1, 1, 1, 1)
    airline_weights: tuple = tuple(1 for _ in AIRLINES)

    def __post_init__(self):
        for p in (self.p_sub, self.p_ins, self.p_del):
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"probability {p} outside [0, 1]")
        if not 2 <= self.confusion_support <= N_SYMBOLS:
            raise ValueError("confusion_support must be in [2, 64]")
        if len(self.template_weights) != len(_TEMPLATES):
            raise ValueError("need one weight per template")
        if len(self.airline_weights) != len(AIRLINES):
            raise ValueError("need one weight per airline")

    @property
    def confusion(self) -> np.ndarray:
        return _confusion_permutation(self.confusion_seed,
                                      self.confusion_support)

    def corrupt(self, symbols, rng) -> list[int]:
        perm = self.confusion
        out = []
        for s in symbols:
            if rng.random() < self.p_del:
                continue
            if rng.random() < self.p_sub:
                s = int(perm[s])
            out.append(int(s))
            if rng.random() < self.p_ins:
                out.append(int(rng.integers(0, N_SYMBOLS)))
        return out


def base_channel() -> ChannelProfile:
    return ChannelProfile("base", p_sub=0.05, p_ins=0.02, p_del=0.02,
                          confusion_seed=101)


def atc_channel() -> ChannelProfile:
    # The shifted domain: a third of the symbol alphabet is consistently
    # remapped (every occurrence passes through the confusion permutation,
    # which moves 24 of 64 symbols), plus a different phrase mixture.
    return ChannelProfile("atc", p_sub=1.0, p_ins=0.02, p_del=0.02,
                          confusion_seed=202, confusion_support=24,
                          template_weights=(1, 1, 2, 3, 3, 2),
                          airline_weights=(1, 1, 1, 1, 2, 2, 2, 2, 3, 3, 3, 3))


CHANNELS = {"base": base_channel, "atc": atc_channel}


@dataclass(frozen=True)
class StreamRecord:
    id: str
    symbols: tuple[int, ...]
    text: str


def generate(seed: int, n_utterances: int, channel: ChannelProfile):
    """Yield (StreamRecord, clean_symbols) pairs; pure in (seed, n, channel)."""
    if n_utterances < 1:
        raise ValueError("n_utterances must be >= 1")
    rng = np.random.default_rng(seed)
    t_w = np.asarray(channel.template_weights, dtype=np.float64)
    t_w = t_w / t_w.sum()
    a_w = np.asarray(channel.airline_weights, dtype=np.float64)
    a_w = a_w / a_w.sum()
    for i in range(n_utterances):
        airline = AIRLINES[rng.choice(len(AIRLINES), p=a_w)]
        callsign = [airline] + _sample_digits(rng, 2, 4)
        template = _TEMPLATES[rng.choice(len(_TEMPLATES), p=t_w)]
        words = callsign + template(rng)
        clean = [s for w in words for s in _SYMBOL_TABLE[w]]
        noisy = channel.corrupt(clean, rng)
        yield StreamRecord(f"utt{i:05d}", tuple(noisy), " ".join(words)), clean


def synth_corpus(seed: int, n_utterances: int, channel: ChannelProfile,
                 out_dir: str, shard_size: int = 200) -> dict:
    """Write a corpus directory: transcripts/*.txt in the record grammar and
    streams/*.jsonl with one {id, symbols, text} object per utterance."""
    out = Path(out_dir)
    (out / "transcripts").mkdir(parents=True, exist_ok=True)
    (out / "streams").mkdir(parents=True, exist_ok=True)

    tx_lines: list[str] = []
    st_lines: list[str] = []
    shard = 0
    written = 0
    for rec, _clean in generate(seed, n_utterances, channel):
        words = rec.text.split()
        t0 = 8.0 * (written % shard_size)
        tx_lines.append(serialize_record(TransmissionRecord(
            from_tag=f"{words[0][:3].upper()}{written % 1000:03d}",
            to_tag="", start_s=t0, end_s=t0 + 6.0, text_raw=rec.text,
            source_file="")))
        st_lines.append(json.dumps(
            {"id": rec.id, "symbols": list(rec.symbols), "text": rec.text}))
        written += 1
        if written % shard_size == 0 or written == n_utterances:
            (out / "transcripts" / f"tx_{shard:04d}.txt").write_text(
                "\n".join(tx_lines) + "\n")
            (out / "streams" / f"st_{shard:04d}.jsonl").write_text(
                "\n".join(st_lines) + "\n")
            tx_lines, st_lines = [], []
            shard += 1
    return {"utterances": written, "shards": shard, "channel": channel.name}


def load_streams(path: str) -> list[StreamRecord]:
    """Load stream records from a corpus directory (streams/*.jsonl merged
    in sorted order) or a single JSONL file."""
    p = Path(path)
    if p.is_dir():
        files = sorted((p / "streams").glob("*.jsonl")) if (p / "streams").is_dir() \
            else sorted(p.glob("*.jsonl"))
    else:
        files = [p]
    records = []
    for f in files:
        for line in f.read_text().splitlines():
            if line.strip():
                obj = json.loads(line)
                records.append(StreamRecord(obj["id"], tuple(obj["symbols"]),
                                            obj["text"]))
    return records
