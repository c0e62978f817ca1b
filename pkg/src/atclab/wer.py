"""Word-level alignment and word error rate.

WER = (S + D + I) / N over a minimum edit-distance alignment of
hypothesis words against reference words. Corpus-level scores are
pooled: summed error counts over summed reference lengths.
"""

from dataclasses import dataclass
from typing import Iterable, Sequence

from . import _kernels
from ._kernels import DEL, INS, MATCH, SUB
from .errors import EmptyCorpus, EmptyReference, MismatchedInputs

OP_NAMES = {MATCH: "match", SUB: "sub", DEL: "del", INS: "ins"}


@dataclass(frozen=True)
class Alignment:
    s_count: int
    d_count: int
    i_count: int
    n_ref: int
    # (op_kind, ref_index or None, hyp_index or None) in reference order
    ops: tuple

    @property
    def distance(self) -> int:
        return self.s_count + self.d_count + self.i_count


@dataclass(frozen=True)
class WerReport:
    wer: float
    alignment: Alignment


def _intern(ref_words: Sequence[str], hyp_words: Sequence[str]):
    ids: dict[str, int] = {}
    ref = [ids.setdefault(w, len(ids)) for w in ref_words]
    hyp = [ids.setdefault(w, len(ids)) for w in hyp_words]
    return ref, hyp


def align(ref_words: Sequence[str], hyp_words: Sequence[str]) -> Alignment:
    """Align hypothesis words to reference words by minimum edit distance
    with unit costs; ties break match > substitution > deletion > insertion."""
    ref_ids, hyp_ids = _intern(ref_words, hyp_words)
    raw = _kernels.align_ops(ref_ids, hyp_ids)
    ops = []
    s = d = i = 0
    for kind, ri, hi in raw:
        if kind == SUB:
            s += 1
        elif kind == DEL:
            d += 1
        elif kind == INS:
            i += 1
        ops.append((int(kind), None if ri < 0 else int(ri), None if hi < 0 else int(hi)))
    return Alignment(s, d, i, len(ref_words), tuple(ops))


def wer(ref: str, hyp: str) -> WerReport:
    """Score one normalized hypothesis against one normalized reference.

    Tokenization is on single spaces. An empty reference scores 0 against
    an empty hypothesis and raises EmptyReference otherwise (the ratio is
    undefined when N = 0).
    """
    ref_words = ref.split() if ref else []
    hyp_words = hyp.split() if hyp else []
    a = align(ref_words, hyp_words)
    if a.n_ref == 0:
        if hyp_words:
            raise EmptyReference("empty reference against non-empty hypothesis")
        return WerReport(0.0, a)
    return WerReport(a.distance / a.n_ref, a)


def corpus_wer(pairs: Iterable[tuple[str, str]]) -> tuple[float, list[WerReport]]:
    """Pooled WER over (reference, hypothesis) pairs: summed S+D+I over
    summed N. Per-utterance reports are returned alongside."""
    reports = [wer(r, h) for r, h in pairs]
    if not reports:
        raise EmptyCorpus("no pairs to score")
    errors = sum(r.alignment.distance for r in reports)
    n = sum(r.alignment.n_ref for r in reports)
    pooled = errors / n if n else 0.0
    return pooled, reports


def mean_utterance_wer(reports: Sequence[WerReport]) -> float:
    """Arithmetic mean of per-utterance WERs, reported alongside the pooled
    figure for comparison."""
    if not reports:
        raise EmptyCorpus("no reports")
    return sum(r.wer for r in reports) / len(reports)


def render_alignment(alignment: Alignment, ref_words: Sequence[str],
                     hyp_words: Sequence[str]) -> str:
    """Three fixed-width rows (REF / HYP / OP) marking S, D, I per column."""
    ref_row, hyp_row, op_row = [], [], []
    for kind, ri, hi in alignment.ops:
        if ri is not None and ri >= len(ref_words):
            raise MismatchedInputs("alignment does not fit the reference")
        if hi is not None and hi >= len(hyp_words):
            raise MismatchedInputs("alignment does not fit the hypothesis")
        r = ref_words[ri] if ri is not None else "-"
        h = hyp_words[hi] if hi is not None else "-"
        marks = {MATCH: "", SUB: "S", DEL: "D", INS: "I"}
        w = max(len(r), len(h), 1)
        ref_row.append(r.ljust(w))
        hyp_row.append(h.ljust(w))
        op_row.append(marks[kind].ljust(w))
    n_ops = (alignment.s_count + alignment.d_count + alignment.i_count
             + sum(1 for k, _, _ in alignment.ops if k == MATCH))
    if n_ops != len(alignment.ops):
        raise MismatchedInputs("inconsistent alignment")
    return "\n".join((
        "REF: " + " ".join(ref_row).rstrip(),
        "HYP: " + " ".join(hyp_row).rstrip(),
        "OP:  " + " ".join(op_row).rstrip(),
    ))


def replay(alignment: Alignment, ref_words: Sequence[str],
           hyp_words: Sequence[str]) -> list[str]:
    """Apply the alignment ops to the reference; the result must equal the
    hypothesis (used by property tests and sanity checks)."""
    out = []
    for kind, ri, hi in alignment.ops:
        if kind == MATCH:
            out.append(ref_words[ri])
        elif kind in (SUB, INS):
            out.append(hyp_words[hi])
        # deletions contribute nothing
    return out
