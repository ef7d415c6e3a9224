"""One-way analysis of variance of criterion scores across industry sectors."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Hashable, Sequence

import numpy as np

from . import numcore
from .errors import DegenerateVarianceError, ValidationError
from .miner import Sector, SECTOR_ORDER
from .scoring import ScoreCard


@dataclass(frozen=True)
class GroupedSample:
    values: tuple[float, ...]
    group_labels: tuple[Hashable, ...]

    def __post_init__(self):
        if len(self.values) != len(self.group_labels):
            raise ValidationError("values and group_labels differ in length")


@dataclass(frozen=True)
class AnovaRow:
    variable_id: str
    group_means: dict[Hashable, float]
    grand_mean: float
    F: float
    p: float
    significant_at_05: bool
    degenerate: bool = False


def one_way_anova(sample: GroupedSample, variable_id: str = "") -> AnovaRow:
    """F test of equal group means.

    F = [SSB/(g-1)] / [SSW/(N-g)] with SSB the size-weighted squared
    deviations of group means from the grand mean and SSW the pooled
    within-group squared deviations. Raises
    :class:`DegenerateVarianceError` when SSW is zero.
    """
    groups: dict[Hashable, list[float]] = {}
    for value, label in zip(sample.values, sample.group_labels):
        groups.setdefault(label, []).append(float(value))
    if len(groups) < 2:
        raise ValidationError("need at least 2 groups")
    if any(len(v) < 2 for v in groups.values()):
        raise ValidationError("every group needs at least 2 observations")

    n_total = len(sample.values)
    g = len(groups)
    grand_mean = float(np.mean(sample.values))
    group_means = {label: float(np.mean(vals)) for label, vals in groups.items()}
    ssb = sum(len(vals) * (group_means[label] - grand_mean) ** 2 for label, vals in groups.items())
    ssw = sum(
        (v - group_means[label]) ** 2 for label, vals in groups.items() for v in vals
    )
    if ssw <= 0.0:
        raise DegenerateVarianceError(
            "zero within-group variance; F ratio is undefined"
        )
    f_stat = (ssb / (g - 1)) / (ssw / (n_total - g))
    p = numcore.f_sf(f_stat, g - 1, n_total - g)
    return AnovaRow(
        variable_id=variable_id,
        group_means=group_means,
        grand_mean=grand_mean,
        F=f_stat,
        p=p,
        significant_at_05=p < 0.05,
    )


def anova_table(cards: Sequence[ScoreCard]) -> list[AnovaRow]:
    """One row per criterion, testing score means across the three sectors.

    A criterion whose scores are constant within every sector has no defined
    F ratio; its row is marked degenerate (F and p are NaN) so the remaining
    criteria still report.
    """
    if not cards:
        raise ValidationError("no scorecards")
    present = {card.sector for card in cards}
    missing = [s.value for s in SECTOR_ORDER if s not in present]
    if missing:
        raise ValidationError(f"sector(s) missing from sample: {', '.join(missing)}")
    rows = []
    for cid in cards[0].criterion_ids:
        sample = GroupedSample(
            values=tuple(card.scores[cid] for card in cards),
            group_labels=tuple(card.sector for card in cards),
        )
        try:
            row = one_way_anova(sample, variable_id=cid)
        except DegenerateVarianceError:
            group_means = {
                sector: float(np.mean([c.scores[cid] for c in cards if c.sector is sector]))
                for sector in SECTOR_ORDER
            }
            row = AnovaRow(
                variable_id=cid,
                group_means=group_means,
                grand_mean=float(np.mean([c.scores[cid] for c in cards])),
                F=math.nan,
                p=math.nan,
                significant_at_05=False,
                degenerate=True,
            )
        rows.append(row)
    return rows


def write_anova_csv(rows: Sequence[AnovaRow], path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(
            ["variable", "mean_primary", "mean_secondary", "mean_tertiary",
             "grand_mean", "F", "p", "sig"]
        )
        for row in rows:
            f_text = "NA" if row.degenerate else repr(row.F)
            p_text = "NA" if row.degenerate else repr(row.p)
            writer.writerow(
                [
                    row.variable_id,
                    repr(row.group_means[Sector.PRIMARY]),
                    repr(row.group_means[Sector.SECONDARY]),
                    repr(row.group_means[Sector.TERTIARY]),
                    repr(row.grand_mean),
                    f_text,
                    p_text,
                    "*" if row.significant_at_05 else "",
                ]
            )
