"""Append-only evaluation journal.

Every evaluated word is recorded exactly once as one tab-separated line:

    stage  status  word  b  p  s  topology  seed  duration_ms  newick

``stage`` uses the pipeline coding (1 systematic, 2 random, 3 optimization).
Failed evaluations keep the word and gene rate but carry ``-`` in the tree
fields.  Records are never mutated; a resumed run replays the file into the
evaluation cache so no journaled word ever hits the backend twice.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import IO, Iterable, Optional

FIELD_COUNT = 10
STAGE_SYSTEMATIC = 1
STAGE_RANDOM = 2
STAGE_OPTIMIZATION = 3
_STAGES = (STAGE_SYSTEMATIC, STAGE_RANDOM, STAGE_OPTIMIZATION)


class JournalError(ValueError):
    def __init__(self, message: str, line: Optional[int] = None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


@dataclass(frozen=True)
class JournalRecord:
    stage: int
    status: str  # "ok" | "failed"
    word: str  # '0'/'1' bitstring
    b: Optional[int]
    p: float
    s: Optional[float]
    topology: Optional[str]  # hex digest
    seed: int
    duration_ms: int
    newick: Optional[str]

    @property
    def ok(self) -> bool:
        return self.status == "ok"


def format_record(rec: JournalRecord) -> str:
    fields = (
        str(rec.stage),
        rec.status,
        rec.word,
        "-" if rec.b is None else str(rec.b),
        f"{rec.p:.4f}",
        "-" if rec.s is None else f"{rec.s:.4f}",
        rec.topology or "-",
        str(rec.seed),
        str(rec.duration_ms),
        rec.newick or "-",
    )
    return "\t".join(fields) + "\n"


def _parse_int(text: str, what: str, line: int) -> int:
    try:
        return int(text)
    except ValueError:
        raise JournalError(f"bad {what}: {text!r}", line)


def parse_record(line_text: str, line: int) -> JournalRecord:
    fields = line_text.split("\t")
    if len(fields) != FIELD_COUNT:
        raise JournalError(f"expected {FIELD_COUNT} fields, found {len(fields)}", line)
    raw_stage, status, word, raw_b, raw_p, raw_s, topology, raw_seed, raw_dur, newick = fields

    stage = _parse_int(raw_stage, "stage code", line)
    if stage not in _STAGES:
        raise JournalError(f"unknown stage code {stage}", line)
    if status not in ("ok", "failed"):
        raise JournalError(f"unknown status {status!r}", line)
    if not word or set(word) - {"0", "1"} or "1" not in word:
        raise JournalError(f"bad word {word!r}", line)
    try:
        p = float(raw_p)
    except ValueError:
        raise JournalError(f"bad gene rate {raw_p!r}", line)
    if not 0 < p <= 100:
        raise JournalError(f"gene rate out of range: {p}", line)
    seed = _parse_int(raw_seed, "seed", line)
    duration_ms = _parse_int(raw_dur, "duration", line)
    if duration_ms < 0:
        raise JournalError(f"negative duration {duration_ms}", line)

    if status == "ok":
        b = _parse_int(raw_b, "bootstrap", line)
        if not 0 <= b <= 100:
            raise JournalError(f"bootstrap out of range: {b}", line)
        try:
            s = float(raw_s)
        except ValueError:
            raise JournalError(f"bad score {raw_s!r}", line)
        if not (s >= 0):
            raise JournalError(f"bad score {s}", line)
        if topology == "-" or not topology or set(topology) - set("0123456789abcdef"):
            raise JournalError(f"bad topology digest {topology!r}", line)
        if newick == "-" or not newick.endswith(";"):
            raise JournalError(f"bad newick {newick!r}", line)
        return JournalRecord(stage, status, word, b, p, s, topology, seed, duration_ms, newick)

    for name, value in (("bootstrap", raw_b), ("score", raw_s), ("topology", topology), ("newick", newick)):
        if value != "-":
            raise JournalError(f"failed record must carry '-' for {name}, found {value!r}", line)
    return JournalRecord(stage, status, word, None, p, None, None, seed, duration_ms, None)


class EvaluationJournal:
    """In-memory view of the journal plus, optionally, its single writer."""

    def __init__(self, records: Optional[list[JournalRecord]] = None, handle: Optional[IO[str]] = None):
        self.records: list[JournalRecord] = []
        self._handle = handle
        self._ok_words: set[str] = set()
        for rec in records or []:
            self._admit(rec, line=len(self.records) + 1)

    def _admit(self, rec: JournalRecord, line: Optional[int] = None) -> None:
        if rec.ok:
            if rec.word in self._ok_words:
                raise JournalError(f"duplicate ok record for word {rec.word}", line)
            self._ok_words.add(rec.word)
        self.records.append(rec)

    def append(self, rec: JournalRecord) -> None:
        """Admit and persist one record; the line is written in a single call
        so a crash can only ever truncate the file at a record boundary or
        leave one final torn line, which load() rejects."""
        self._admit(rec)
        if self._handle is not None:
            self._handle.write(format_record(rec))
            self._handle.flush()

    @property
    def ok_records(self) -> list[JournalRecord]:
        return [r for r in self.records if r.ok]

    def __len__(self) -> int:
        return len(self.records)

    def close(self) -> None:
        if self._handle is not None:
            self._handle.close()
            self._handle = None

    @classmethod
    def load(cls, path: str | Path) -> "EvaluationJournal":
        """Strictly validate and load every record; the first corrupt line
        (including a torn, unterminated final line) raises JournalError."""
        text = Path(path).read_text(encoding="utf-8")
        if text and not text.endswith("\n"):
            raise JournalError("truncated record (missing newline)", text.count("\n") + 1)
        journal = cls()
        for lineno, line_text in enumerate(text.splitlines(), start=1):
            journal._admit(parse_record(line_text, lineno), line=lineno)
        return journal

    @classmethod
    def open(cls, path: str | Path, resume: bool = False) -> "EvaluationJournal":
        """Open for appending.  A fresh run refuses to clobber an existing
        non-empty journal unless ``resume`` replays it first."""
        path = Path(path)
        if path.exists() and path.stat().st_size > 0:
            if not resume:
                raise JournalError(
                    f"journal {path} already exists; resume it or remove the file"
                )
            journal = cls.load(path)
            journal._handle = path.open("a", encoding="utf-8", newline="")
            return journal
        path.parent.mkdir(parents=True, exist_ok=True)
        return cls(handle=path.open("a", encoding="utf-8", newline=""))


def load_records(path: str | Path) -> list[JournalRecord]:
    return EvaluationJournal.load(path).records


def write_records(path: str | Path, records: Iterable[JournalRecord]) -> None:
    journal = EvaluationJournal.open(path)
    try:
        for rec in records:
            journal.append(rec)
    finally:
        journal.close()
