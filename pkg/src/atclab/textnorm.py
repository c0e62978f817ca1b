"""Transcript text normalization.

Pipeline: lowercase, digits to cardinal words, punctuation stripped,
whitespace collapsed. Applied to both references and hypotheses before
any WER scoring so that formatting differences never count as errors.
"""

import re

from .errors import EmptyAfterNormalization, NotANumeral, TooLarge

_ONES = [
    "zero", "one", "two", "three", "four", "five", "six", "seven", "eight",
    "nine", "ten", "eleven", "twelve", "thirteen", "fourteen", "fifteen",
    "sixteen", "seventeen", "eighteen", "nineteen",
]

_TENS = [
    "", "", "twenty", "thirty", "forty", "fifty", "sixty", "seventy",
    "eighty", "ninety",
]

_DIGIT_RUN = re.compile(r"[0-9]+")
_NON_ALPHABET = re.compile(r"[^a-z' \-]")
_TOKEN_SPLIT = re.compile(r"[^A-Za-z]+")


def _two_digits(n: int) -> str:
    if n < 20:
        return _ONES[n]
    t, o = divmod(n, 10)
    return _TENS[t] + (" " + _ONES[o] if o else "")


def _three_digits(n: int) -> str:
    h, rem = divmod(n, 100)
    if h == 0:
        return _two_digits(rem)
    s = _ONES[h] + " hundred"
    if rem:
        s += " and " + _two_digits(rem)
    return s


def number_to_words(numeral: str) -> str:
    """Spell a digit string as a British-style cardinal ("220" -> "two
    hundred and twenty"). Accepts values below one million."""
    if not numeral or not numeral.isascii() or not numeral.isdigit():
        raise NotANumeral(f"not a digit string: {numeral!r}")
    if len(numeral) > 6:
        raise TooLarge(f"numeral has {len(numeral)} digits, limit is 6")
    n = int(numeral)
    if n >= 1_000_000:
        raise TooLarge(f"{n} is not below one million")
    thousands, rem = divmod(n, 1000)
    if thousands == 0:
        return _three_digits(rem)
    s = _three_digits(thousands) + " thousand"
    if rem == 0:
        return s
    if rem < 100:
        # "one thousand and twenty", British style
        return s + " and " + _two_digits(rem)
    return s + " " + _three_digits(rem)


def digits_serial(numeral: str) -> str:
    """Spell each digit individually ("737" -> "seven three seven")."""
    if not numeral or not numeral.isascii() or not numeral.isdigit():
        raise NotANumeral(f"not a digit string: {numeral!r}")
    return " ".join(_ONES[int(d)] for d in numeral)


def is_unintelligible(text_raw: str) -> bool:
    """True when the text contains UNINTELLIGIBLE as a standalone token,
    case-insensitively."""
    return any(
        tok.lower() == "unintelligible"
        for tok in _TOKEN_SPLIT.split(text_raw)
    )


def _expand_run(run: str, digit_serial: bool) -> str:
    if digit_serial or len(run) > 6:
        # Runs too long for a cardinal reading fall back to serial digits.
        return digits_serial(run)
    return number_to_words(run)


def normalize(text_raw: str, digit_serial: bool = False) -> str:
    """Normalize one transcript line.

    Steps, in order: lowercase; replace each maximal digit run with its
    word form; delete characters other than letters, apostrophe, hyphen
    and space; collapse whitespace runs and trim. Raises
    EmptyAfterNormalization when nothing survives.
    """
    s = text_raw.lower()
    s = _DIGIT_RUN.sub(lambda m: " %s " % _expand_run(m.group(), digit_serial), s)
    s = re.sub(r"\s", " ", s)
    s = _NON_ALPHABET.sub("", s)
    s = re.sub(r" +", " ", s).strip()
    if not s:
        raise EmptyAfterNormalization(f"nothing left of {text_raw!r}")
    return s


def is_normalized(text: str) -> bool:
    """Check the normalized-text contract: lowercase letters, apostrophe,
    hyphen and single spaces only, no leading/trailing space."""
    if text != text.strip() or "  " in text:
        return False
    return re.fullmatch(r"[a-z' \-]*", text) is not None
