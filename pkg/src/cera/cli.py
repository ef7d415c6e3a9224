"""Command-line front end: mine -> score -> analyze.

Subcommands: mine, score, anova, mda, sem, pipeline, report. A JSON file
passed with --config supplies defaults for any flag; flags given on the
command line win. Exit codes: 0 success, 1 runtime or analysis error,
2 usage error.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass
from pathlib import Path

from . import anova as anova_mod
from . import mda as mda_mod
from . import miner, scoring, sem as sem_mod
from .errors import CeraError
from .report import ResultsBundle, emit_report

STRATEGIES = ("linear", "binary")
ELIMINATION_RULES = ("conjunction", "disjunction")

FREQUENCIES_NAME = "frequencies.csv"
KEYWORD_FILE_NAME = "keyword_file.tsv"
SCORECARDS_NAME = "scorecards.csv"
ANOVA_NAME = "anova.csv"
MDA_NAME = "mda.json"
CASE_SCORES_NAME = "case_scores.csv"
SEM_NAME = "sem_fit.json"
REPORT_NAME = "report.txt"

# Config keys that hold paths, resolved relative to the config file location.
_PATH_KEYS = ("manifest", "root", "criteria", "stoplist", "sem_model", "out_dir")


@dataclass
class RunConfig:
    manifest: Path | None = None
    root: Path | None = None  # defaults to the manifest's directory
    criteria: Path | None = None  # None = packaged defaults
    stoplist: Path | None = None  # None = packaged defaults
    use_stoplist: bool = True
    stemming: bool = False
    strategy: str = "linear"
    out_dir: Path = Path("out")
    elimination: str = "conjunction"
    language: str = "en"
    sem_model: Path | None = None  # None = packaged example model
    seed: int | None = None

    def validate(self) -> None:
        if self.strategy not in STRATEGIES:
            raise ValueError(f"strategy must be one of {STRATEGIES}, got {self.strategy!r}")
        if self.elimination not in ELIMINATION_RULES:
            raise ValueError(
                f"elimination must be one of {ELIMINATION_RULES}, got {self.elimination!r}"
            )
        for label, path in (
            ("manifest", self.manifest),
            ("criteria", self.criteria),
            ("stoplist", self.stoplist),
            ("sem model", self.sem_model),
        ):
            if path is not None and not Path(path).is_file():
                raise ValueError(f"{label} file not found: {path}")


class StageFailure(Exception):
    """A pipeline stage raised; carries the stage name for the diagnostic line."""

    def __init__(self, stage: str, error: Exception):
        super().__init__(f"{stage}: {error}")
        self.stage = stage
        self.error = error


def _load_config_file(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ValueError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ValueError(f"config {path} must hold a JSON object")
    base = Path(path).parent
    resolved = {}
    for key, value in raw.items():
        if key in _PATH_KEYS and value is not None:
            value = str((base / value)) if not Path(value).is_absolute() else value
        resolved[key] = value
    return resolved


def _build_config(args: argparse.Namespace) -> RunConfig:
    file_values = _load_config_file(args.config) if getattr(args, "config", None) else {}
    config = RunConfig()

    def pick(flag_name: str, key: str, default):
        value = getattr(args, flag_name, None)
        if value is not None:
            return value
        if key in file_values and file_values[key] is not None:
            return file_values[key]
        return default

    config.manifest = _opt_path(pick("manifest", "manifest", None))
    config.root = _opt_path(pick("root", "root", None))
    config.criteria = _opt_path(pick("criteria", "criteria", None))
    config.stoplist = _opt_path(pick("stoplist", "stoplist", None))
    config.use_stoplist = bool(pick("use_stoplist", "use_stoplist", True))
    config.stemming = bool(pick("stemming", "stemming", False))
    config.strategy = str(pick("strategy", "strategy", "linear"))
    config.out_dir = Path(pick("out_dir", "out_dir", "out"))
    config.elimination = str(pick("elimination", "elimination", "conjunction"))
    config.language = str(pick("language", "language", "en"))
    config.sem_model = _opt_path(pick("sem_model", "sem_model", None))
    seed = pick("seed", "seed", None)
    config.seed = int(seed) if seed is not None else None
    config.validate()
    return config


def _opt_path(value) -> Path | None:
    return None if value is None else Path(value)


def _stoplist(config: RunConfig) -> frozenset[str]:
    if not config.use_stoplist:
        return frozenset()
    if config.stoplist is not None:
        return miner.load_stoplist(config.stoplist)
    return miner.default_stoplist()


def _criteria(config: RunConfig) -> scoring.CriteriaSet:
    if config.criteria is not None:
        return scoring.load_criteria(config.criteria)
    return scoring.default_criteria()


def _sem_model(config: RunConfig) -> sem_mod.SemModelSpec:
    if config.sem_model is not None:
        return sem_mod.load_model(config.sem_model)
    return sem_mod.default_model()


def _load_corpus(config: RunConfig) -> miner.Corpus:
    if config.manifest is None:
        raise StageFailure("mine", ValueError("a corpus manifest is required (--manifest)"))
    root = config.root if config.root is not None else Path(config.manifest).parent
    return miner.load_corpus(root, config.manifest)


def _stage(name: str, func, *args, **kwargs):
    try:
        return func(*args, **kwargs)
    except CeraError as exc:
        raise StageFailure(name, exc) from exc


def _mine(config: RunConfig, out_dir: Path) -> miner.FrequencyTable:
    corpus = _stage("mine", _load_corpus, config)
    criteria = _stage("mine", _criteria, config)
    stoplist = _stage("mine", _stoplist, config)
    if config.strategy == "binary":
        kwfile = _stage(
            "mine", miner.build_sorted_keyword_file, corpus, stoplist, config.stemming
        )
        miner.write_keyword_file(kwfile, out_dir / KEYWORD_FILE_NAME)
        table = _stage("mine", miner.mine_binary, kwfile, corpus, criteria)
    else:
        table = _stage("mine", miner.mine_linear, corpus, criteria, stoplist, config.stemming)
    miner.write_frequency_csv(table, out_dir / FREQUENCIES_NAME)
    return table


def _score(
    config: RunConfig, table: miner.FrequencyTable, out_dir: Path
) -> list[scoring.ScoreCard]:
    corpus = _stage("score", _load_corpus, config)
    criteria = _stage("score", _criteria, config)
    meta = scoring.report_metadata(corpus)
    cards = _stage("score", scoring.build_scorecards, table, meta, criteria)
    sample = _stage(
        "score", scoring.filter_sample, cards, config.language, config.elimination
    )
    scoring.write_scorecards_csv(sample, out_dir / SCORECARDS_NAME)
    return sample


def _write_error_json(path: Path, stage: str, error: Exception) -> None:
    payload = {
        "status": "error",
        "stage": stage,
        "error_class": type(error).__name__,
        "message": str(error),
    }
    with open(path, "w", encoding="utf-8", newline="") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")


def _write_json(path: Path, payload: dict) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")


def _cmd_mine(config: RunConfig) -> int:
    out_dir = _ensure_out_dir(config)
    _mine(config, out_dir)
    return 0


def _cmd_score(config: RunConfig, frequencies: str | None) -> int:
    out_dir = _ensure_out_dir(config)
    freq_path = Path(frequencies) if frequencies else out_dir / FREQUENCIES_NAME
    table = _stage("score", miner.read_frequency_csv, freq_path)
    _score(config, table, out_dir)
    return 0


def _read_cards(path: Path, stage: str) -> list[scoring.ScoreCard]:
    return _stage(stage, scoring.read_scorecards_csv, path)


def _cmd_anova(config: RunConfig, scorecards: str | None) -> int:
    out_dir = _ensure_out_dir(config)
    cards = _read_cards(_cards_path(scorecards, out_dir), "anova")
    rows = _stage("anova", anova_mod.anova_table, cards)
    anova_mod.write_anova_csv(rows, out_dir / ANOVA_NAME)
    return 0


def _cmd_mda(config: RunConfig, scorecards: str | None) -> int:
    out_dir = _ensure_out_dir(config)
    cards = _read_cards(_cards_path(scorecards, out_dir), "mda")
    result = _stage("mda", mda_mod.run_mda, cards)
    _write_json(out_dir / MDA_NAME, mda_mod.mda_result_to_dict(result))
    mda_mod.write_case_scores_csv(result.projections, out_dir / CASE_SCORES_NAME)
    return 0


def _cmd_sem(config: RunConfig, scorecards: str | None) -> int:
    out_dir = _ensure_out_dir(config)
    cards = _read_cards(_cards_path(scorecards, out_dir), "sem")
    model = _stage("sem", _sem_model, config)
    s, n = _stage("sem", sem_mod.covariance_from_cards, cards, model.observed_vars)
    fit = _stage("sem", sem_mod.fit_model, model, s, n)
    sem_mod.write_fit_json(fit, out_dir / SEM_NAME)
    return 0


def _cmd_pipeline(config: RunConfig) -> int:
    """Chain every stage; analysis failures leave diagnostic artifacts."""
    out_dir = _ensure_out_dir(config)
    table = _mine(config, out_dir)
    sample = _score(config, table, out_dir)

    try:
        rows = anova_mod.anova_table(sample)
        anova_mod.write_anova_csv(rows, out_dir / ANOVA_NAME)
    except CeraError as exc:
        anova_mod.write_anova_csv([], out_dir / ANOVA_NAME)
        print(f"anova: {exc}", file=sys.stderr)

    try:
        result = mda_mod.run_mda(sample)
        _write_json(out_dir / MDA_NAME, mda_mod.mda_result_to_dict(result))
        mda_mod.write_case_scores_csv(result.projections, out_dir / CASE_SCORES_NAME)
    except CeraError as exc:
        _write_error_json(out_dir / MDA_NAME, "mda", exc)
        print(f"mda: {exc}", file=sys.stderr)

    try:
        model = _sem_model(config)
        s, n = sem_mod.covariance_from_cards(sample, model.observed_vars)
        fit = sem_mod.fit_model(model, s, n)
        sem_mod.write_fit_json(fit, out_dir / SEM_NAME)
    except CeraError as exc:
        _write_error_json(out_dir / SEM_NAME, "sem", exc)
        print(f"sem: {exc}", file=sys.stderr)
    return 0


def _cmd_report(config: RunConfig, scorecards: str | None, out: str | None) -> int:
    out_dir = _ensure_out_dir(config)
    cards = _read_cards(_cards_path(scorecards, out_dir), "report")
    composition = _stage("report", scoring.sector_composition, cards)

    anova_rows = None
    try:
        anova_rows = anova_mod.anova_table(cards)
    except CeraError as exc:
        print(f"anova: {exc}", file=sys.stderr)
    mda_result = None
    try:
        mda_result = mda_mod.run_mda(cards)
    except CeraError as exc:
        print(f"mda: {exc}", file=sys.stderr)
    sem_fit = None
    try:
        model = _sem_model(config)
        s, n = sem_mod.covariance_from_cards(cards, model.observed_vars)
        sem_fit = sem_mod.fit_model(model, s, n)
    except CeraError as exc:
        print(f"sem: {exc}", file=sys.stderr)

    bundle = ResultsBundle(composition, anova_rows, mda_result, sem_fit)
    text = _stage("report", emit_report, bundle)
    target = Path(out) if out else out_dir / REPORT_NAME
    with open(target, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    return 0


def _cards_path(scorecards: str | None, out_dir: Path) -> Path:
    return Path(scorecards) if scorecards else out_dir / SCORECARDS_NAME


def _ensure_out_dir(config: RunConfig) -> Path:
    config.out_dir.mkdir(parents=True, exist_ok=True)
    return config.out_dir


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON file with default option values")
    parser.add_argument("--out-dir", dest="out_dir", help="output directory (default: out)")
    parser.add_argument(
        "--seed",
        type=int,
        help="seed for any randomized tooling; the analyses themselves are deterministic",
    )


def _add_corpus_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--manifest", help="corpus manifest CSV (report_id,sector,language,path)")
    parser.add_argument("--root", help="base directory for relative report paths")
    parser.add_argument("--criteria", help="criteria config file (default: packaged set)")
    parser.add_argument("--stoplist", help="stop-word list file (default: packaged list)")
    parser.add_argument(
        "--no-stoplist",
        action="store_false",
        dest="use_stoplist",
        default=None,
        help="disable stop-word removal",
    )
    parser.add_argument(
        "--stemming",
        action="store_true",
        default=None,
        help="enable suffix stemming (off by default)",
    )
    parser.add_argument(
        "--strategy", choices=STRATEGIES, help="mining strategy (default: linear)"
    )


def _add_filter_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--elimination",
        choices=ELIMINATION_RULES,
        help="drop a report when it is foreign-language AND all-zero (conjunction, "
        "the default) or when EITHER holds (disjunction)",
    )
    parser.add_argument("--language", help="analysis language tag (default: en)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cera",
        description="Score disclosure criteria over a report corpus and analyze "
        "the scorecards by sector.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_mine = sub.add_parser("mine", help="count criterion keyword frequencies")
    _add_common(p_mine)
    _add_corpus_flags(p_mine)

    p_score = sub.add_parser("score", help="rate frequencies and filter the sample")
    _add_common(p_score)
    _add_corpus_flags(p_score)
    _add_filter_flags(p_score)
    p_score.add_argument("--frequencies", help="frequency CSV (default: OUT_DIR/frequencies.csv)")

    for name, help_text in (
        ("anova", "one-way ANOVA of each criterion across sectors"),
        ("mda", "discriminant analysis of sector membership"),
        ("sem", "fit the latent-construct covariance model"),
    ):
        p_sub = sub.add_parser(name, help=help_text)
        _add_common(p_sub)
        p_sub.add_argument(
            "--scorecards", help="scorecard CSV (default: OUT_DIR/scorecards.csv)"
        )
        if name == "sem":
            p_sub.add_argument("--sem-model", dest="sem_model", help="model config file")

    p_pipe = sub.add_parser("pipeline", help="run mine, score, anova, mda, and sem")
    _add_common(p_pipe)
    _add_corpus_flags(p_pipe)
    _add_filter_flags(p_pipe)
    p_pipe.add_argument("--sem-model", dest="sem_model", help="model config file")

    p_report = sub.add_parser("report", help="write a combined human-readable summary")
    _add_common(p_report)
    p_report.add_argument("--scorecards", help="scorecard CSV (default: OUT_DIR/scorecards.csv)")
    p_report.add_argument("--sem-model", dest="sem_model", help="model config file")
    p_report.add_argument("--out", help="report path (default: OUT_DIR/report.txt)")
    return parser


def run_subcommand(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = _build_config(args)
    except ValueError as exc:
        parser.error(str(exc))  # exits 2
    try:
        if args.command == "mine":
            return _cmd_mine(config)
        if args.command == "score":
            return _cmd_score(config, args.frequencies)
        if args.command == "anova":
            return _cmd_anova(config, args.scorecards)
        if args.command == "mda":
            return _cmd_mda(config, args.scorecards)
        if args.command == "sem":
            return _cmd_sem(config, args.scorecards)
        if args.command == "pipeline":
            return _cmd_pipeline(config)
        if args.command == "report":
            return _cmd_report(config, args.scorecards, args.out)
    except StageFailure as exc:
        print(exc, file=sys.stderr)
        return 1
    except CeraError as exc:
        print(f"{args.command}: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"{args.command}: {exc}", file=sys.stderr)
        return 1
    raise AssertionError(f"unhandled command {args.command!r}")


def main() -> None:
    sys.exit(run_subcommand())


if __name__ == "__main__":
    main()
