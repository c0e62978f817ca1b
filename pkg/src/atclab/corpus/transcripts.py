"""Parser for parenthesized ATC transcript files.

One record per transmission:

    ( (FROM <token>) (TO <token>) (TIMES <start> <end>) (TEXT <word>+) )

FROM/TO are optional, TIMES and TEXT are required, any other tagged
group is skipped so files with extra annotation layers parse
best-effort. `#` starts a comment running to end of line. Malformed
records are collected with their line number and parsing continues.
"""

from dataclasses import dataclass


@dataclass(frozen=True)
class TransmissionRecord:
    from_tag: str
    to_tag: str
    start_s: float
    end_s: float
    text_raw: str
    source_file: str


@dataclass(frozen=True)
class ParseError:
    line: int
    message: str
    source_file: str


def _tokenize(text: str):
    """Yield (token, line) where token is '(', ')' or an atom."""
    out = []
    line = 1
    i = 0
    n = len(text)
    while i < n:
        c = text[i]
        if c == "\n":
            line += 1
            i += 1
        elif c.isspace():
            i += 1
        elif c == "#":
            while i < n and text[i] != "\n":
                i += 1
        elif c in "()":
            out.append((c, line))
            i += 1
        else:
            start = i
            while i < n and not text[i].isspace() and text[i] not in "()#":
                i += 1
            out.append((text[start:i], line))
    return out


class _Malformed(Exception):
    def __init__(self, line: int, message: str):
        self.line = line
        self.message = message


class _Cursor:
    def __init__(self, tokens):
        self.tokens = tokens
        self.pos = 0

    def peek(self):
        return self.tokens[self.pos] if self.pos < len(self.tokens) else (None, -1)

    def next(self):
        tok = self.peek()
        self.pos += 1
        return tok

    def skip_to_depth_zero(self, depth: int):
        while depth > 0:
            tok, _ = self.next()
            if tok is None:
                return
            if tok == "(":
                depth += 1
            elif tok == ")":
                depth -= 1


def _parse_group(cur: _Cursor):
    """Parse one '(TAG atoms...)' group; cursor sits after its '('."""
    tag_tok, tag_line = cur.next()
    if tag_tok in (None, "(", ")"):
        raise _Malformed(tag_line, "group does not start with a tag")
    atoms = []
    while True:
        tok, line = cur.peek()
        if tok is None:
            raise _Malformed(line, "unbalanced parentheses (unexpected end of file)")
        if tok == "(":
            raise _Malformed(line, "nested group inside a tagged group")
        cur.next()
        if tok == ")":
            return tag_tok, atoms, tag_line
        atoms.append(tok)


def _parse_record(cur: _Cursor, open_line: int, source_file: str) -> TransmissionRecord:
    """Parse one record; cursor sits after the record's '('."""
    from_tag = ""
    to_tag = ""
    times = None
    words = None
    while True:
        tok, line = cur.next()
        if tok is None:
            raise _Malformed(line, "unbalanced parentheses (unexpected end of file)")
        if tok == ")":
            break
        if tok != "(":
            raise _Malformed(line, f"expected a tagged group, got {tok!r}")
        tag, atoms, tag_line = _parse_group(cur)
        tag_upper = tag.upper()
        if tag_upper == "FROM":
            from_tag = atoms[0] if atoms else ""
        elif tag_upper == "TO":
            to_tag = atoms[0] if atoms else ""
        elif tag_upper == "TIMES":
            if len(atoms) != 2:
                raise _Malformed(tag_line, "TIMES needs exactly two values")
            try:
                times = (float(atoms[0]), float(atoms[1]))
            except ValueError:
                raise _Malformed(tag_line, f"non-numeric TIMES {atoms!r}") from None
        elif tag_upper == "TEXT":
            words = atoms
        # any other tag is ignored

    if times is None:
        raise _Malformed(open_line, "record has no TIMES group")
    if words is None or not words:
        raise _Malformed(open_line, "record has no TEXT words")
    start_s, end_s = times
    if start_s < 0:
        raise _Malformed(open_line, f"negative start time {start_s}")
    if end_s <= start_s:
        raise _Malformed(open_line, f"end {end_s} not after start {start_s}")
    return TransmissionRecord(from_tag, to_tag, start_s, end_s,
                              " ".join(words), source_file)


def parse_transcript(text: str, source_file: str):
    """Parse every record in `text`, in file order.

    Returns (records, errors); errors carry line numbers and never abort
    the parse.
    """
    records: list[TransmissionRecord] = []
    errors: list[ParseError] = []
    cur = _Cursor(_tokenize(text))
    while True:
        tok, line = cur.next()
        if tok is None:
            return records, errors
        if tok != "(":
            errors.append(ParseError(line, f"expected '(' at top level, got {tok!r}",
                                     source_file))
            continue
        before = cur.pos
        try:
            records.append(_parse_record(cur, line, source_file))
        except _Malformed as exc:
            errors.append(ParseError(exc.line, exc.message, source_file))
            cur.pos = before
            cur.skip_to_depth_zero(1)


def serialize_record(record: TransmissionRecord) -> str:
    """Inverse of parsing: fields round-trip exactly (times via repr)."""
    parts = []
    if record.from_tag:
        parts.append(f"(FROM {record.from_tag})")
    if record.to_tag:
        parts.append(f"(TO {record.to_tag})")
    parts.append(f"(TIMES {record.start_s!r} {record.end_s!r})")
    parts.append(f"(TEXT {record.text_raw})")
    return "(" + " ".join(parts) + ")"
