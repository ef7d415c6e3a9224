"""Search criteria, frequency-to-score rating, scorecards, and sample filtering.

Ten shipped criteria (v1..v10) each carry a set of phrase alternatives and a
10-point ceiling. Raw keyword frequencies are rated on a banded scale:
75 or more occurrences earn 10, 50..74 earn 7, 20..49 earn 5, 5..19 earn 3,
1..4 earn 1, and zero earns 0.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, NamedTuple, Sequence

from .errors import IngestionError, ValidationError
from .miner import Corpus, FrequencyTable, Sector, SECTOR_ORDER


@dataclass(frozen=True)
class Criterion:
    criterion_id: str
    label: str
    alternatives: tuple[str, ...]
    max_score: int = 10

    def __post_init__(self):
        if not self.criterion_id:
            raise ValidationError("criterion_id must be nonempty")
        if not self.alternatives:
            raise ValidationError(f"criterion {self.criterion_id} has no phrase alternatives")
        if self.max_score <= 0:
            raise ValidationError(f"criterion {self.criterion_id} max_score must be positive")


CriteriaSet = list[Criterion]


class RatingBand(NamedTuple):
    lower_bound: int  # inclusive
    score: int
    label: str


@dataclass(frozen=True)
class RatingScale:
    """Ordered frequency bands; together with the implicit zero band they
    partition the nonnegative integers."""

    bands: tuple[RatingBand, ...]

    def __post_init__(self):
        if not self.bands:
            raise ValidationError("rating scale needs at least one band")
        bounds = [b.lower_bound for b in self.bands]
        scores = [b.score for b in self.bands]
        if sorted(bounds, reverse=True) != bounds or len(set(bounds)) != len(bounds):
            raise ValidationError("band lower bounds must strictly decrease")
        if bounds[-1] != 1:
            raise ValidationError("lowest band must start at frequency 1")
        if sorted(scores, reverse=True) != scores or len(set(scores)) != len(scores):
            raise ValidationError("band scores must strictly decrease")

    def rate(self, freq: int) -> int:
        if freq < 0:
            raise ValidationError(f"frequency must be nonnegative, got {freq}")
        for band in self.bands:
            if freq >= band.lower_bound:
                return band.score
        return 0

    @property
    def top_score(self) -> int:
        return self.bands[0].score


DEFAULT_SCALE = RatingScale(
    bands=(
        RatingBand(75, 10, "Very strong"),
        RatingBand(50, 7, "Strong"),
        RatingBand(20, 5, "Moderate"),
        RatingBand(5, 3, "Weak"),
        RatingBand(1, 1, "Very weak"),
    )
)


def rate_frequency(freq: int, scale: RatingScale = DEFAULT_SCALE) -> int:
    """Map a keyword frequency to its band score; zero frequency scores 0."""
    return scale.rate(freq)


@dataclass(frozen=True)
class ScoreCard:
    report_id: str
    sector: Sector
    language_tag: str
    frequencies: dict[str, int]
    scores: dict[str, int]

    @property
    def criterion_ids(self) -> list[str]:
        return list(self.scores.keys())

    def all_zero(self) -> bool:
        return all(v == 0 for v in self.frequencies.values())


class ReportMeta(NamedTuple):
    sector: Sector
    language_tag: str


def report_metadata(corpus: Corpus) -> dict[str, ReportMeta]:
    return {doc.report_id: ReportMeta(doc.sector, doc.language_tag) for doc in corpus}


def build_scorecards(
    freq: FrequencyTable,
    corpus_meta: Mapping[str, ReportMeta],
    criteria: CriteriaSet,
    scale: RatingScale = DEFAULT_SCALE,
) -> list[ScoreCard]:
    """One scorecard per report in the frequency table, rating every criterion."""
    by_id = {c.criterion_id: c for c in criteria}
    for cid in freq.criterion_ids:
        crit = by_id.get(cid)
        if crit is None:
            raise ValidationError(f"frequency table column {cid!r} is not a known criterion")
        if scale.top_score > crit.max_score:
            raise ValidationError(
                f"criterion {cid} max_score {crit.max_score} is below the "
                f"scale's top score {scale.top_score}"
            )
    cards = []
    for rid in freq.report_ids:
        meta = corpus_meta.get(rid)
        if meta is None:
            raise ValidationError(f"report {rid!r} missing from corpus metadata")
        frequencies = freq.row(rid)
        scores = {cid: scale.rate(n) for cid, n in frequencies.items()}
        cards.append(ScoreCard(rid, meta.sector, meta.language_tag, frequencies, scores))
    return cards


def filter_sample(
    cards: Sequence[ScoreCard],
    analysis_language: str = "en",
    rule: str = "conjunction",
) -> list[ScoreCard]:
    """Drop reports excluded from analysis; input order is preserved.

    Under the default ``conjunction`` rule a card is removed only when its
    frequencies are zero for every criterion AND its language differs from
    ``analysis_language``. The ``disjunction`` rule removes a card when
    either condition holds on its own.
    """
    if rule not in ("conjunction", "disjunction"):
        raise ValidationError(f"unknown elimination rule {rule!r}")
    kept = []
    for card in cards:
        foreign = card.language_tag != analysis_language
        zero = card.all_zero()
        eliminated = (foreign and zero) if rule == "conjunction" else (foreign or zero)
        if not eliminated:
            kept.append(card)
    return kept


def sector_composition(cards: Sequence[ScoreCard]) -> dict[Sector, tuple[int, float]]:
    """Count and percentage (2 decimals) per sector; percentages total ~100."""
    if not cards:
        raise ValidationError("cannot compute composition of an empty sample")
    total = len(cards)
    out = {}
    for sector in SECTOR_ORDER:
        count = sum(1 for c in cards if c.sector is sector)
        out[sector] = (count, round(100.0 * count / total, 2))
    return out


def default_criteria() -> CriteriaSet:
    """Shipped transcription of the ten search criteria."""
    text = resources.files("cera.data").joinpath("criteria.txt").read_text("utf-8")
    return parse_criteria(text)


def load_criteria(path) -> CriteriaSet:
    try:
        text = Path(path).read_text("utf-8")
    except OSError as exc:
        raise IngestionError(f"cannot read criteria config {path}: {exc}") from exc
    return parse_criteria(text)


def parse_criteria(text: str) -> CriteriaSet:
    """Parse the criteria config format.

    Each criterion starts with ``[id]`` on its own line, followed by
    ``label:`` and optional ``max_score:`` lines, then one phrase alternative
    per line. ``#`` starts a comment.
    """
    criteria: CriteriaSet = []
    current_id = None
    label = ""
    max_score = 10
    alternatives: list[str] = []

    def flush():
        if current_id is not None:
            criteria.append(Criterion(current_id, label, tuple(alternatives), max_score))

    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            flush()
            current_id = line[1:-1].strip()
            if not current_id:
                raise ValidationError("empty criterion id in config")
            label, max_score, alternatives = "", 10, []
        elif current_id is None:
            raise ValidationError(f"content before first criterion header: {line!r}")
        elif line.lower().startswith("label:"):
            label = line.split(":", 1)[1].strip()
        elif line.lower().startswith("max_score:"):
            try:
                max_score = int(line.split(":", 1)[1].strip())
            except ValueError:
                raise ValidationError(f"bad max_score line: {line!r}") from None
        else:
            alternatives.append(line)
    flush()
    if not criteria:
        raise ValidationError("criteria config defines no criteria")
    ids = [c.criterion_id for c in criteria]
    if len(set(ids)) != len(ids):
        raise ValidationError("duplicate criterion ids in config")
    return criteria


def write_scorecards_csv(cards: Sequence[ScoreCard], path) -> None:
    """CSV with frequency columns, score columns, then the language tag."""
    if not cards:
        raise ValidationError("no scorecards to write")
    cids = cards[0].criterion_ids
    header = (
        ["report_id", "sector"]
        + [f"{cid}_freq" for cid in cids]
        + [f"{cid}_score" for cid in cids]
        + ["language"]
    )
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for card in cards:
            writer.writerow(
                [card.report_id, card.sector.value]
                + [card.frequencies[cid] for cid in cids]
                + [card.scores[cid] for cid in cids]
                + [card.language_tag]
            )


def read_scorecards_csv(path) -> list[ScoreCard]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValidationError("scorecard file has no header row") from None
        freq_cols = [(i, h[: -len("_freq")]) for i, h in enumerate(header) if h.endswith("_freq")]
        score_cols = [(i, h[: -len("_score")]) for i, h in enumerate(header) if h.endswith("_score")]
        lang_idx = header.index("language") if "language" in header else None
        cards = []
        for line, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                frequencies = {cid: int(row[i]) for i, cid in freq_cols}
                scores = {cid: int(row[i]) for i, cid in score_cols}
                language = row[lang_idx] if lang_idx is not None else ""
                card = ScoreCard(row[0], Sector(row[1]), language, frequencies, scores)
            except (ValueError, IndexError) as exc:
                raise ValidationError(f"scorecard row at line {line}: {exc}") from None
            cards.append(card)
    return cards
