"""Corpus loading, token preprocessing, and criterion-frequency mining.

Reports are plain-text files listed in a CSV manifest together with their
industry sector and language. Mining counts, per report and per criterion,
the non-overlapping occurrences of any of the criterion's phrase
alternatives in the preprocessed token stream. Two interchangeable search
strategies are provided: a sequential scan (:func:`mine_linear`) and a
lookup against a sorted ``<keyword, file>`` record file (:func:`mine_binary`).
Both must produce identical frequency tables on identical inputs.
"""

from __future__ import annotations

import csv
import re
from bisect import bisect_left, bisect_right
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources
from pathlib import Path
from typing import Iterable, NamedTuple, Sequence, TYPE_CHECKING

from .errors import IngestionError, PreconditionError, ValidationError

if TYPE_CHECKING:  # pragma: no cover
    from .scoring import Criterion


class Sector(str, Enum):
    PRIMARY = "primary"
    SECONDARY = "secondary"
    TERTIARY = "tertiary"


SECTOR_ORDER = (Sector.PRIMARY, Sector.SECONDARY, Sector.TERTIARY)


@dataclass(frozen=True)
class Document:
    report_id: str
    sector: Sector
    language_tag: str
    text: str


Corpus = list[Document]


@dataclass(frozen=True)
class TokenSequence:
    tokens: tuple[str, ...]
    source_id: str


class KeywordRecord(NamedTuple):
    keyword: str
    file_name: str


@dataclass
class KeywordFile:
    """Sorted ``<keyword, file>`` records plus the preprocessing that built them.

    The stop list and stemming flag are carried along so that binary mining
    can reconstruct token order for adjacency checks without re-specifying
    the settings.
    """

    records: list[KeywordRecord]
    sorted_flag: bool
    stoplist: frozenset[str] = frozenset()
    stemming: bool = False


# Tokens are maximal alphanumeric runs; hyphens, apostrophes, underscores and
# all other punctuation act as separators.
_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)

# Suffix-stripping rules, applied once per token, first match wins. A rule
# fires only when the remaining stem keeps at least 3 characters.
_STEM_RULES = (("ies", "y"), ("es", ""), ("s", ""), ("ing", ""), ("ed", ""))


def stem_token(token: str) -> str:
    for suffix, replacement in _STEM_RULES:
        if token.endswith(suffix) and len(token) - len(suffix) >= 3:
            return token[: -len(suffix)] + replacement
    return token


def tokenize(text: str) -> list[str]:
    return _TOKEN_RE.findall(text.lower())


def preprocess_text(
    text: str, stoplist: Iterable[str] = frozenset(), stemming: bool = False
) -> list[str]:
    """Lowercase, tokenize, drop stop-list tokens, then optionally stem."""
    stopset = stoplist if isinstance(stoplist, (set, frozenset)) else frozenset(stoplist)
    tokens = [t for t in tokenize(text) if t not in stopset]
    if stemming:
        tokens = [stem_token(t) for t in tokens]
    return tokens


def preprocess(
    doc: Document, stoplist: Iterable[str] = frozenset(), stemming: bool = False
) -> TokenSequence:
    return TokenSequence(
        tokens=tuple(preprocess_text(doc.text, stoplist, stemming)),
        source_id=doc.report_id,
    )


def default_stoplist() -> frozenset[str]:
    """Shipped stop list: articles, prepositions, conjunctions, pronouns, common verbs."""
    text = resources.files("cera.data").joinpath("stopwords.txt").read_text("utf-8")
    return _parse_stoplist(text)


def load_stoplist(path) -> frozenset[str]:
    try:
        text = Path(path).read_text("utf-8")
    except OSError as exc:
        raise IngestionError(f"cannot read stop list {path}: {exc}") from exc
    return _parse_stoplist(text)


def _parse_stoplist(text: str) -> frozenset[str]:
    words = set()
    for line in text.splitlines():
        word = line.split("#", 1)[0].strip().lower()
        if word:
            if any(ch.isspace() for ch in word):
                raise ValidationError(f"stop-list entries must be single words: {word!r}")
            words.add(word)
    return frozenset(words)


def load_corpus(root_path, manifest) -> Corpus:
    """Read a corpus from ``manifest`` (CSV: report_id,sector,language,path).

    Relative paths resolve against ``root_path``. Text is read as UTF-8 with
    invalid byte sequences replaced.
    """
    root = Path(root_path)
    manifest = Path(manifest)
    try:
        with open(manifest, newline="", encoding="utf-8") as fh:
            rows = list(csv.DictReader(fh))
    except OSError as exc:
        raise IngestionError(f"cannot read manifest {manifest}: {exc}") from exc

    corpus: Corpus = []
    seen: set[str] = set()
    for row in rows:
        try:
            report_id = row["report_id"].strip()
            sector_label = row["sector"].strip()
            language = row["language"].strip()
            rel_path = row["path"].strip()
        except (KeyError, AttributeError):
            raise ValidationError(
                "manifest needs columns report_id,sector,language,path"
            ) from None
        if not report_id:
            raise ValidationError("manifest row has an empty report_id")
        if report_id in seen:
            raise ValidationError(f"duplicate report_id {report_id!r} in manifest")
        seen.add(report_id)
        try:
            sector = Sector(sector_label.lower())
        except ValueError:
            raise ValidationError(
                f"unknown sector {sector_label!r} for report {report_id!r}; "
                f"expected one of {[s.value for s in SECTOR_ORDER]}"
            ) from None
        path = Path(rel_path)
        if not path.is_absolute():
            path = root / path
        if not path.is_file():
            raise IngestionError(f"report file not found: {path}")
        text = path.read_text(encoding="utf-8", errors="replace")
        corpus.append(Document(report_id, sector, language, text))
    return corpus


@dataclass
class FrequencyTable:
    """Complete (report, criterion) -> count mapping over a corpus."""

    report_ids: list[str]
    criterion_ids: list[str]
    counts: dict[tuple[str, str], int] = field(default_factory=dict)

    def __post_init__(self):
        for rid in self.report_ids:
            for cid in self.criterion_ids:
                value = self.counts.get((rid, cid))
                if value is None:
                    raise ValidationError(f"missing count for ({rid}, {cid})")
                if value < 0:
                    raise ValidationError(f"negative count for ({rid}, {cid})")

    def get(self, report_id: str, criterion_id: str) -> int:
        return self.counts[(report_id, criterion_id)]

    def row(self, report_id: str) -> dict[str, int]:
        return {cid: self.counts[(report_id, cid)] for cid in self.criterion_ids}


def build_sorted_keyword_file(
    corpus: Corpus, stoplist: Iterable[str] = frozenset(), stemming: bool = False
) -> KeywordFile:
    """One record per surviving token occurrence, sorted by (keyword, file)."""
    stopset = frozenset(stoplist)
    records = [
        KeywordRecord(token, doc.report_id)
        for doc in corpus
        for token in preprocess_text(doc.text, stopset, stemming)
    ]
    records.sort()
    return KeywordFile(records=records, sorted_flag=True, stoplist=stopset, stemming=stemming)


def write_keyword_file(kwfile: KeywordFile, path) -> None:
    """External format: one ``keyword<TAB>report_id`` line per record, LF endings."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for rec in kwfile.records:
            fh.write(f"{rec.keyword}\t{rec.file_name}\n")


def read_keyword_file(path, stoplist: Iterable[str] = frozenset(), stemming: bool = False) -> KeywordFile:
    records = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line:
                continue
            keyword, _, file_name = line.partition("\t")
            records.append(KeywordRecord(keyword, file_name))
    sorted_flag = all(records[i] <= records[i + 1] for i in range(len(records) - 1))
    return KeywordFile(records, sorted_flag, frozenset(stoplist), stemming)


def _compile_criteria(
    criteria: Sequence["Criterion"], stoplist: frozenset[str], stemming: bool
) -> dict[str, dict[str, list[tuple[str, ...]]]]:
    """Preprocess each criterion's phrases and index them by first token.

    Alternatives are kept longest-first within each first-token bucket so the
    greedy scan always prefers the longest match at a position.
    """
    compiled: dict[str, dict[str, list[tuple[str, ...]]]] = {}
    for crit in criteria:
        seen: set[tuple[str, ...]] = set()
        alternatives: list[tuple[str, ...]] = []
        for phrase in crit.alternatives:
            toks = tuple(preprocess_text(phrase, stoplist, stemming))
            if toks and toks not in seen:
                seen.add(toks)
                alternatives.append(toks)
        alternatives.sort(key=lambda alt: (-len(alt), alt))
        by_first: dict[str, list[tuple[str, ...]]] = {}
        for alt in alternatives:
            by_first.setdefault(alt[0], []).append(alt)
        compiled[crit.criterion_id] = by_first
    return compiled


def _count_hits(tokens: Sequence[str], by_first: dict[str, list[tuple[str, ...]]]) -> int:
    """Greedy left-to-right count of non-overlapping phrase occurrences."""
    count = 0
    i = 0
    n = len(tokens)
    while i < n:
        candidates = by_first.get(tokens[i])
        if candidates:
            for alt in candidates:
                k = len(alt)
                if i + k <= n and tuple(tokens[i : i + k]) == alt:
                    count += 1
                    i += k
                    break
            else:
                i += 1
        else:
            i += 1
    return count


def mine_linear(
    corpus: Corpus,
    criteria: Sequence["Criterion"],
    stoplist: Iterable[str] = frozenset(),
    stemming: bool = False,
) -> FrequencyTable:
    """Sequential scan: preprocess each report and count criterion phrases."""
    if not criteria:
        raise ValidationError("criteria set is empty")
    stopset = frozenset(stoplist)
    compiled = _compile_criteria(criteria, stopset, stemming)
    counts: dict[tuple[str, str], int] = {}
    for doc in corpus:
        tokens = preprocess_text(doc.text, stopset, stemming)
        for cid, by_first in compiled.items():
            counts[(doc.report_id, cid)] = _count_hits(tokens, by_first)
    return FrequencyTable(
        report_ids=[doc.report_id for doc in corpus],
        criterion_ids=[crit.criterion_id for crit in criteria],
        counts=counts,
    )


def mine_binary(
    kwfile: KeywordFile, corpus: Corpus, criteria: Sequence["Criterion"]
) -> FrequencyTable:
    """Keyword-file strategy; must agree exactly with :func:`mine_linear`.

    Single keywords are counted by binary search over the sorted records.
    Phrase alternatives are screened by locating their first word in the
    records, then confirmed against the report's token sequence, which is
    rebuilt with the preprocessing settings the keyword file carries.
    """
    if not kwfile.sorted_flag:
        raise PreconditionError("keyword file is not sorted")
    if not criteria:
        raise ValidationError("criteria set is empty")
    keys = kwfile.records
    compiled = _compile_criteria(criteria, kwfile.stoplist, kwfile.stemming)

    def occurrences(word: str, report_id: str) -> int:
        rec = KeywordRecord(word, report_id)
        return bisect_right(keys, rec) - bisect_left(keys, rec)

    counts: dict[tuple[str, str], int] = {}
    for doc in corpus:
        doc_tokens: Sequence[str] | None = None
        for cid, by_first in compiled.items():
            alive = {
                first: alts
                for first, alts in by_first.items()
                if occurrences(first, doc.report_id) > 0
            }
            if not alive:
                counts[(doc.report_id, cid)] = 0
                continue
            alternatives = [alt for alts in alive.values() for alt in alts]
            if len(alternatives) == 1 and len(alternatives[0]) == 1:
                # Single keyword: the record count is already the frequency.
                counts[(doc.report_id, cid)] = occurrences(
                    alternatives[0][0], doc.report_id
                )
                continue
            if doc_tokens is None:
                doc_tokens = preprocess_text(doc.text, kwfile.stoplist, kwfile.stemming)
            counts[(doc.report_id, cid)] = _count_hits(doc_tokens, alive)
    return FrequencyTable(
        report_ids=[doc.report_id for doc in corpus],
        criterion_ids=[crit.criterion_id for crit in criteria],
        counts=counts,
    )


def write_frequency_csv(table: FrequencyTable, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["report_id", *table.criterion_ids])
        for rid in table.report_ids:
            writer.writerow([rid, *(table.counts[(rid, cid)] for cid in table.criterion_ids)])


def read_frequency_csv(path) -> FrequencyTable:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValidationError("frequency file has no header row") from None
        criterion_ids = header[1:]
        report_ids = []
        counts = {}
        for row in reader:
            if not row:
                continue
            rid = row[0]
            report_ids.append(rid)
            for cid, value in zip(criterion_ids, row[1:]):
                try:
                    counts[(rid, cid)] = int(value)
                except ValueError:
                    raise ValidationError(
                        f"non-integer count {value!r} for ({rid}, {cid})"
                    ) from None
    return FrequencyTable(report_ids, criterion_ids, counts)
