"""Multivariate discriminant analysis of sector membership from criterion scores.

Pipeline: pooled within-group and between-group scatter matrices, canonical
discriminant functions from the generalized eigenproblem B v = lambda W v,
Wilks' Lambda with Bartlett's chi-square approximation, Box's M test of
equal group covariance matrices, nearest-centroid classification in
canonical space, and per-case canonical scores.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Hashable, Sequence

import numpy as np

from . import numcore
from .errors import ConditioningError, ValidationError
from .miner import SECTOR_ORDER
from .scoring import ScoreCard


@dataclass(frozen=True)
class ScatterPair:
    W: np.ndarray  # pooled within-group scatter, p x p
    B: np.ndarray  # between-group scatter, p x p
    group_sizes: dict[Hashable, int]
    group_means: dict[Hashable, np.ndarray]
    grand_mean: np.ndarray
    group_order: tuple[Hashable, ...]

    @property
    def n_total(self) -> int:
        return sum(self.group_sizes.values())

    @property
    def n_variables(self) -> int:
        return int(self.W.shape[0])

    @property
    def n_groups(self) -> int:
        return len(self.group_order)


@dataclass(frozen=True)
class CanonicalFunction:
    index: int  # 1-based
    eigenvalue: float
    coefficients: np.ndarray
    group_centroids: dict[Hashable, float]


@dataclass(frozen=True)
class WilksTest:
    function_range: str  # "1 through 2", "2", ...
    wilks_lambda: float
    chi_square: float
    df: int
    p: float


@dataclass(frozen=True)
class BoxMResult:
    M: float
    F_approx: float
    df1: int
    df2: float
    p: float


@dataclass(frozen=True)
class ClassificationMatrix:
    group_order: tuple[Hashable, ...]
    counts: np.ndarray  # g x g, rows = actual, columns = predicted
    row_percentages: np.ndarray  # rounded to 1 decimal
    hit_rate: float  # percent

    @classmethod
    def from_counts(cls, counts, group_order: Sequence[Hashable]) -> "ClassificationMatrix":
        counts = np.asarray(counts, dtype=int)
        g = len(group_order)
        if counts.shape != (g, g):
            raise ValidationError(f"counts must be {g}x{g}, got {counts.shape}")
        row_sums = counts.sum(axis=1)
        if np.any(row_sums == 0):
            raise ValidationError("classification matrix has an empty actual group")
        percentages = np.round(100.0 * counts / row_sums[:, None], 1)
        hit_rate = 100.0 * np.trace(counts) / counts.sum()
        return cls(tuple(group_order), counts, percentages, float(hit_rate))


@dataclass(frozen=True)
class MdaModel:
    criterion_ids: tuple[str, ...]
    scatter: ScatterPair
    functions: tuple[CanonicalFunction, ...]

    @property
    def eigenvalues(self) -> list[float]:
        return [f.eigenvalue for f in self.functions]


@dataclass(frozen=True)
class CaseProjection:
    report_id: str
    group: Hashable
    scores: tuple[float, ...]


@dataclass(frozen=True)
class CaseProjections:
    cases: list[CaseProjection]
    centroids: dict[Hashable, tuple[float, ...]]
    n_functions: int


def _group_name(g) -> str:
    return g.value if hasattr(g, "value") else str(g)


def data_matrix(cards: Sequence[ScoreCard]) -> tuple[np.ndarray, list, list[str]]:
    """Stack scorecards into an (n, p) array plus sector labels."""
    if not cards:
        raise ValidationError("no scorecards")
    cids = cards[0].criterion_ids
    x = np.array([[card.scores[cid] for cid in cids] for card in cards], dtype=float)
    labels = [card.sector for card in cards]
    return x, labels, cids


def scatter_from_data(
    x: np.ndarray, labels: Sequence[Hashable], group_order: Sequence[Hashable] | None = None
) -> ScatterPair:
    """Within/between scatter of raw (unnormalized) squared deviations.

    W sums (x - group mean) outer products over all cases; B sums
    n_g * (group mean - grand mean) outer products over groups, so
    W + B equals the total scatter about the grand mean.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 2:
        raise ValidationError("data must be a 2-D array")
    n, p = x.shape
    if len(labels) != n:
        raise ValidationError("labels length does not match data rows")
    if group_order is None:
        group_order = sorted(set(labels), key=str)
    group_order = tuple(group_order)
    if len(group_order) < 2:
        raise ValidationError("need at least 2 groups")
    indices = {g: [i for i, lab in enumerate(labels) if lab == g] for g in group_order}
    for g, idx in indices.items():
        if len(idx) < p + 1:
            raise ValidationError(
                f"group {_group_name(g)} has {len(idx)} cases; needs at least {p + 1} "
                f"for a nonsingular within-group scatter"
            )
    grand_mean = x.mean(axis=0)
    w = np.zeros((p, p))
    b = np.zeros((p, p))
    group_sizes = {}
    group_means = {}
    for g in group_order:
        rows = x[indices[g]]
        mean_g = rows.mean(axis=0)
        centered = rows - mean_g
        w += centered.T @ centered
        diff = mean_g - grand_mean
        b += len(rows) * np.outer(diff, diff)
        group_sizes[g] = len(rows)
        group_means[g] = mean_g
    w = 0.5 * (w + w.T)
    b = 0.5 * (b + b.T)
    return ScatterPair(w, b, group_sizes, group_means, grand_mean, group_order)


def scatter_matrices(cards: Sequence[ScoreCard]) -> ScatterPair:
    x, labels, _ = data_matrix(cards)
    order = tuple(s for s in SECTOR_ORDER if s in set(labels))
    return scatter_from_data(x, labels, order)


def canonical_functions(sp: ScatterPair) -> list[CanonicalFunction]:
    """Top min(p, g-1) discriminant functions of the pencil (B, W).

    Coefficients satisfy v' W v = 1 with the first nonzero component
    positive; centroids are the projected group means (grand-mean centered).
    """
    try:
        pairs = numcore.generalized_eigen(sp.B, sp.W)
    except ConditioningError:
        raise ConditioningError(
            "within-group scatter is not positive definite; consider removing "
            "collinear or constant variables"
        ) from None
    n_funcs = min(sp.n_variables, sp.n_groups - 1)
    functions = []
    for i, (value, vector) in enumerate(pairs[:n_funcs], start=1):
        # Rank deficiency of B shows up as tiny negative roundoff.
        eigenvalue = 0.0 if -1e-10 < value < 0 else float(value)
        centroids = {
            g: float(vector @ (sp.group_means[g] - sp.grand_mean))
            for g in sp.group_order
        }
        functions.append(CanonicalFunction(i, eigenvalue, vector, centroids))
    return functions


def fit_mda(cards: Sequence[ScoreCard]) -> MdaModel:
    x, labels, cids = data_matrix(cards)
    order = tuple(s for s in SECTOR_ORDER if s in set(labels))
    return fit_mda_data(x, labels, order, criterion_ids=cids)


def fit_mda_data(
    x: np.ndarray,
    labels: Sequence[Hashable],
    group_order: Sequence[Hashable] | None = None,
    criterion_ids: Sequence[str] | None = None,
) -> MdaModel:
    sp = scatter_from_data(x, labels, group_order)
    functions = canonical_functions(sp)
    if criterion_ids is None:
        criterion_ids = [f"x{i+1}" for i in range(sp.n_variables)]
    return MdaModel(tuple(criterion_ids), sp, tuple(functions))


def bartlett_chi_square(wilks_lambda: float, n_total: int, p: int, g: int) -> float:
    """Bartlett's approximation −(N − 1 − (p+g)/2) · ln(Λ)."""
    if not 0.0 < wilks_lambda <= 1.0:
        raise ValidationError(f"Wilks' Lambda must be in (0, 1], got {wilks_lambda}")
    return -(n_total - 1 - (p + g) / 2.0) * math.log(wilks_lambda)


def wilks_tests(functions, n_total: int, p: int, g: int) -> list[WilksTest]:
    """Peel-off tests: for each k, Lambda_k multiplies 1/(1+lambda_i) over i >= k.

    ``functions`` may be CanonicalFunction objects or bare eigenvalues.
    """
    if n_total <= p + g:
        raise ValidationError(f"sample size {n_total} must exceed p + g = {p + g}")
    eigenvalues = [
        f.eigenvalue if isinstance(f, CanonicalFunction) else float(f) for f in functions
    ]
    r = len(eigenvalues)
    tests = []
    for k in range(1, r + 1):
        lam = 1.0
        for value in eigenvalues[k - 1 :]:
            lam *= 1.0 / (1.0 + value)
        chi2 = bartlett_chi_square(lam, n_total, p, g)
        df = (p - k + 1) * (g - k)
        label = f"{k} through {r}" if k < r else f"{k}"
        tests.append(WilksTest(label, lam, chi2, df, numcore.chisq_sf(chi2, df)))
    return tests


def _log_det_cov(cov: np.ndarray, what: str) -> float:
    sign, logdet = np.linalg.slogdet(cov)
    if sign <= 0 or not np.isfinite(logdet):
        raise ConditioningError(f"{what} covariance matrix is singular")
    return float(logdet)


def box_m_approximation(m_stat: float, group_sizes: Sequence[int], p: int) -> BoxMResult:
    """Map a Box's M statistic to its two-moment F approximation.

    Box's scaling constants c1 and c2 fix df1 = (g-1)p(p+1)/2 and the
    real-valued df2; the c2 > c1^2 and c2 < c1^2 regimes use different
    rescalings of M into the F statistic.
    """
    if m_stat < 0:
        raise ValidationError(f"M must be nonnegative, got {m_stat}")
    g = len(group_sizes)
    if g < 2:
        raise ValidationError("need at least 2 groups")
    n = sum(group_sizes)
    inv_dfs = [1.0 / (size - 1) for size in group_sizes]
    c1 = (sum(inv_dfs) - 1.0 / (n - g)) * (2 * p * p + 3 * p - 1) / (6.0 * (p + 1) * (g - 1))
    c2 = (sum(v * v for v in inv_dfs) - 1.0 / (n - g) ** 2) * (p - 1) * (p + 2) / (
        6.0 * (g - 1)
    )
    df1 = (g - 1) * p * (p + 1) // 2
    if c2 > c1 * c1:
        df2 = (df1 + 2) / (c2 - c1 * c1)
        scale = df1 / (1.0 - c1 - df1 / df2)
        f_approx = m_stat / scale
    else:
        df2 = (df1 + 2) / (c1 * c1 - c2)
        scale = df2 / (1.0 - c1 + 2.0 / df2)
        if m_stat >= scale:
            raise ConditioningError("Box's M exceeds its F-approximation range")
        f_approx = df2 * m_stat / (df1 * (scale - m_stat))
    p_value = numcore.f_sf(f_approx, df1, df2)
    return BoxMResult(float(m_stat), float(f_approx), int(df1), float(df2), p_value)


def box_m_from_data(
    x: np.ndarray, labels: Sequence[Hashable], group_order: Sequence[Hashable] | None = None
) -> BoxMResult:
    """Box's M over unbiased group covariances, with the F approximation.

    M = (N-g) * ln|S_pooled| - sum (n_i - 1) * ln|S_i|.
    """
    x = np.asarray(x, dtype=float)
    n, p = x.shape
    if group_order is None:
        group_order = sorted(set(labels), key=str)
    group_order = tuple(group_order)
    if len(group_order) < 2:
        raise ValidationError("need at least 2 groups")
    labels = list(labels)
    covs = {}
    sizes = {}
    for grp in group_order:
        rows = x[[i for i, lab in enumerate(labels) if lab == grp]]
        if len(rows) <= p:
            raise ValidationError(
                f"group {_group_name(grp)} has {len(rows)} cases; needs more than {p} "
                f"for a nonsingular covariance"
            )
        sizes[grp] = len(rows)
        covs[grp] = np.cov(rows, rowvar=False, ddof=1)
    pooled = sum((sizes[grp] - 1) * covs[grp] for grp in group_order) / (n - len(group_order))
    m_stat = (n - len(group_order)) * _log_det_cov(pooled, "pooled")
    for grp in group_order:
        try:
            m_stat -= (sizes[grp] - 1) * _log_det_cov(covs[grp], f"group {_group_name(grp)}")
        except ConditioningError:
            raise ConditioningError(
                f"group {_group_name(grp)} covariance matrix is singular"
            ) from None
    m_stat = max(m_stat, 0.0)
    return box_m_approximation(m_stat, [sizes[grp] for grp in group_order], p)


def box_m(cards: Sequence[ScoreCard]) -> BoxMResult:
    x, labels, _ = data_matrix(cards)
    order = tuple(s for s in SECTOR_ORDER if s in set(labels))
    return box_m_from_data(x, labels, order)


def _project(x: np.ndarray, model: MdaModel) -> np.ndarray:
    vectors = np.column_stack([f.coefficients for f in model.functions])
    return (np.asarray(x, dtype=float) - model.scatter.grand_mean) @ vectors


def _centroid_matrix(model: MdaModel) -> np.ndarray:
    return np.array(
        [[f.group_centroids[g] for f in model.functions] for g in model.scatter.group_order]
    )


def classify_data(
    x: np.ndarray, labels: Sequence[Hashable], model: MdaModel
) -> ClassificationMatrix:
    """Resubstitution-style confusion matrix: nearest centroid in canonical space."""
    order = model.scatter.group_order
    index = {g: i for i, g in enumerate(order)}
    unknown = set(labels) - set(order)
    if unknown:
        raise ValidationError(
            f"labels not in fitted model: {sorted(map(_group_name, unknown))}"
        )
    scores = _project(x, model)
    centroids = _centroid_matrix(model)
    counts = np.zeros((len(order), len(order)), dtype=int)
    for row, actual in zip(scores, labels):
        distances = np.linalg.norm(centroids - row, axis=1)
        counts[index[actual], int(np.argmin(distances))] += 1
    return ClassificationMatrix.from_counts(counts, order)


def classify(cards: Sequence[ScoreCard], model: MdaModel) -> ClassificationMatrix:
    x, labels, cids = data_matrix(cards)
    if tuple(cids) != model.criterion_ids:
        raise ValidationError("scorecards and model use different criteria")
    return classify_data(x, labels, model)


def project_cases(cards: Sequence[ScoreCard], model: MdaModel) -> CaseProjections:
    centroids = {
        g: tuple(float(f.group_centroids[g]) for f in model.functions)
        for g in model.scatter.group_order
    }
    if not cards:
        return CaseProjections([], centroids, len(model.functions))
    x, labels, cids = data_matrix(cards)
    if tuple(cids) != model.criterion_ids:
        raise ValidationError("scorecards and model use different criteria")
    scores = _project(x, model)
    cases = [
        CaseProjection(card.report_id, label, tuple(float(s) for s in row))
        for card, label, row in zip(cards, labels, scores)
    ]
    return CaseProjections(cases, centroids, len(model.functions))


def write_case_scores_csv(projections: CaseProjections, path) -> None:
    header = ["report_id", "group"] + [f"score_f{i+1}" for i in range(projections.n_functions)]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for case in projections.cases:
            group = case.group.value if hasattr(case.group, "value") else str(case.group)
            writer.writerow([case.report_id, group, *map(repr, case.scores)])


@dataclass(frozen=True)
class MdaResult:
    model: MdaModel
    wilks: list[WilksTest]
    box: BoxMResult
    classification: ClassificationMatrix
    projections: CaseProjections


def run_mda(cards: Sequence[ScoreCard]) -> MdaResult:
    model = fit_mda(cards)
    sp = model.scatter
    wilks = wilks_tests(list(model.functions), sp.n_total, sp.n_variables, sp.n_groups)
    box = box_m(cards)
    classification = classify(cards, model)
    projections = project_cases(cards, model)
    return MdaResult(model, wilks, box, classification, projections)


def mda_result_to_dict(result: MdaResult) -> dict:
    model = result.model
    order = [_group_name(g) for g in model.scatter.group_order]
    return {
        "criteria": list(model.criterion_ids),
        "groups": order,
        "group_sizes": {
            _group_name(g): model.scatter.group_sizes[g] for g in model.scatter.group_order
        },
        "functions": [
            {
                "index": f.index,
                "eigenvalue": f.eigenvalue,
                "coefficients": [float(c) for c in f.coefficients],
                "centroids": {
                    _group_name(g): f.group_centroids[g] for g in model.scatter.group_order
                },
            }
            for f in model.functions
        ],
        "wilks_tests": [
            {
                "functions": t.function_range,
                "wilks_lambda": t.wilks_lambda,
                "chi_square": t.chi_square,
                "df": t.df,
                "p": t.p,
            }
            for t in result.wilks
        ],
        "box_m": {
            "M": result.box.M,
            "F_approx": result.box.F_approx,
            "df1": result.box.df1,
            "df2": result.box.df2,
            "p": result.box.p,
            "equal_covariance_rejected_at_05": result.box.p < 0.05,
        },
        "classification": {
            "counts": result.classification.counts.tolist(),
            "row_percentages": result.classification.row_percentages.tolist(),
            "hit_rate_percent": result.classification.hit_rate,
        },
    }
