import json
import os

import pytest

from cera.cli import run_subcommand
from cera.scoring import read_scorecards_csv

from conftest import FIXTURE_DIR, FIXTURE_SCORES, MANIFEST

OUTPUT_FILES = ("frequencies.csv", "scorecards.csv", "anova.csv", "mda.json", "sem_fit.json")


def run_pipeline(out_dir, *extra):
    return run_subcommand(
        ["pipeline", "--manifest", str(MANIFEST), "--out-dir", str(out_dir), *extra]
    )


class TestPipeline:
    def test_fixture_run(self, tmp_path, capsys):
        out = tmp_path / "out"
        assert run_pipeline(out) == 0
        for name in OUTPUT_FILES:
            assert (out / name).is_file(), name
        err = capsys.readouterr().err
        # 6 reports cannot support the multivariate stages; those degrade.
        assert "mda:" in err
        assert "sem:" in err
        assert "Sector." not in err

    def test_scorecards_match_hand_ratings(self, tmp_path):
        out = tmp_path / "out"
        run_pipeline(out)
        cards = {c.report_id: c for c in read_scorecards_csv(out / "scorecards.csv")}
        assert set(cards) == set(FIXTURE_SCORES)
        for rid, expected in FIXTURE_SCORES.items():
            got = [cards[rid].scores[f"v{i + 1}"] for i in range(10)]
            assert got == expected, rid

    def test_analysis_stage_error_artifacts(self, tmp_path):
        out = tmp_path / "out"
        run_pipeline(out)
        for name in ("mda.json", "sem_fit.json"):
            payload = json.loads((out / name).read_text(encoding="utf-8"))
            assert payload["status"] == "error"
            assert payload["stage"] == name.split(".")[0].replace("_fit", "")
            assert payload["message"]
        anova_lines = (out / "anova.csv").read_text(encoding="utf-8").splitlines()
        assert len(anova_lines) == 11  # header + one row per criterion

    def test_deterministic_outputs(self, tmp_path):
        first, second = tmp_path / "a", tmp_path / "b"
        run_pipeline(first)
        run_pipeline(second)
        for name in OUTPUT_FILES:
            assert (first / name).read_bytes() == (second / name).read_bytes(), name

    def test_lf_only(self, tmp_path):
        out = tmp_path / "out"
        run_pipeline(out)
        for name in OUTPUT_FILES:
            assert b"\r" not in (out / name).read_bytes(), name


class TestMine:
    def test_strategies_agree_byte_for_byte(self, tmp_path):
        linear, binary = tmp_path / "lin", tmp_path / "bin"
        assert run_subcommand(
            ["mine", "--manifest", str(MANIFEST), "--out-dir", str(linear)]
        ) == 0
        assert run_subcommand(
            ["mine", "--manifest", str(MANIFEST), "--out-dir", str(binary),
             "--strategy", "binary"]
        ) == 0
        assert (linear / "frequencies.csv").read_bytes() == (
            binary / "frequencies.csv"
        ).read_bytes()
        # Only the binary strategy materializes its sorted keyword file.
        assert not (linear / "keyword_file.tsv").exists()
        assert (binary / "keyword_file.tsv").is_file()

    def test_missing_manifest_flag(self, tmp_path, capsys):
        code = run_subcommand(["mine", "--out-dir", str(tmp_path / "out")])
        assert code == 1
        assert capsys.readouterr().err.startswith("mine:")

    def test_manifest_referencing_absent_file(self, tmp_path, capsys):
        manifest = tmp_path / "manifest.csv"
        manifest.write_text(
            "report_id,sector,language,path\nR1,primary,en,ghost.txt\n",
            encoding="utf-8",
        )
        code = run_subcommand(
            ["mine", "--manifest", str(manifest), "--out-dir", str(tmp_path / "out")]
        )
        assert code == 1
        err = capsys.readouterr().err
        assert err.startswith("mine:")
        assert "ghost.txt" in err


class TestScore:
    def test_explicit_frequencies_path(self, tmp_path):
        out = tmp_path / "out"
        run_subcommand(["mine", "--manifest", str(MANIFEST), "--out-dir", str(out)])
        moved = tmp_path / "freqs.csv"
        moved.write_bytes((out / "frequencies.csv").read_bytes())
        code = run_subcommand(
            ["score", "--manifest", str(MANIFEST), "--out-dir", str(out),
             "--frequencies", str(moved)]
        )
        assert code == 0
        assert (out / "scorecards.csv").is_file()

    def test_score_before_mine(self, tmp_path, capsys):
        code = run_subcommand(
            ["score", "--manifest", str(MANIFEST), "--out-dir", str(tmp_path / "out")]
        )
        assert code == 1
        assert capsys.readouterr().err.startswith("score:")


class TestAnalysisCommands:
    @pytest.fixture()
    def scored(self, tmp_path):
        out = tmp_path / "out"
        run_subcommand(["mine", "--manifest", str(MANIFEST), "--out-dir", str(out)])
        run_subcommand(["score", "--manifest", str(MANIFEST), "--out-dir", str(out)])
        return out

    def test_anova_succeeds_on_fixture(self, scored):
        assert run_subcommand(["anova", "--out-dir", str(scored)]) == 0
        lines = (scored / "anova.csv").read_text(encoding="utf-8").splitlines()
        assert len(lines) == 11

    def test_mda_rejects_tiny_sample(self, scored, capsys):
        assert run_subcommand(["mda", "--out-dir", str(scored)]) == 1
        assert capsys.readouterr().err.startswith("mda:")
        assert not (scored / "mda.json").exists()

    def test_sem_rejects_tiny_sample(self, scored, capsys):
        assert run_subcommand(["sem", "--out-dir", str(scored)]) == 1
        assert capsys.readouterr().err.startswith("sem:")

    def test_missing_scorecards(self, tmp_path, capsys):
        code = run_subcommand(["anova", "--out-dir", str(tmp_path / "nothing")])
        assert code == 1
        assert capsys.readouterr().err.startswith("anova:")

    def test_corrupt_scorecards_reported_cleanly(self, scored, capsys):
        # A hand-edited scorecard file must fail as a stage diagnostic,
        # not an unhandled parser exception.
        path = scored / "scorecards.csv"
        text = path.read_text(encoding="utf-8").replace(",10,", ",ten,", 1)
        path.write_text(text, encoding="utf-8")
        assert run_subcommand(["anova", "--out-dir", str(scored)]) == 1
        err = capsys.readouterr().err
        assert err.startswith("anova:")
        assert "line" in err


class TestReport:
    def test_partial_report_on_fixture(self, tmp_path, capsys):
        out = tmp_path / "out"
        run_pipeline(out)
        capsys.readouterr()
        assert run_subcommand(["report", "--out-dir", str(out)]) == 0
        text = (out / "report.txt").read_text(encoding="utf-8")
        assert "SECTOR COMPOSITION" in text
        assert "ONE-WAY ANOVA BY SECTOR" in text
        assert "DISCRIMINANT ANALYSIS" not in text
        assert "STRUCTURAL EQUATION MODEL" not in text
        err = capsys.readouterr().err
        assert "mda:" in err and "sem:" in err

    def test_custom_target(self, tmp_path):
        out = tmp_path / "out"
        run_pipeline(out)
        target = tmp_path / "summary.txt"
        assert run_subcommand(["report", "--out-dir", str(out), "--out", str(target)]) == 0
        assert target.is_file()


class TestUsageErrors:
    def test_no_arguments(self):
        with pytest.raises(SystemExit) as excinfo:
            run_subcommand([])
        assert excinfo.value.code == 2

    def test_unknown_subcommand(self):
        with pytest.raises(SystemExit) as excinfo:
            run_subcommand(["transmogrify"])
        assert excinfo.value.code == 2

    def test_bad_strategy_value(self):
        with pytest.raises(SystemExit) as excinfo:
            run_subcommand(
                ["mine", "--manifest", str(MANIFEST), "--strategy", "quadratic"]
            )
        assert excinfo.value.code == 2

    def test_nonexistent_manifest_path(self, tmp_path):
        with pytest.raises(SystemExit) as excinfo:
            run_subcommand(
                ["mine", "--manifest", str(tmp_path / "absent.csv"),
                 "--out-dir", str(tmp_path / "out")]
            )
        assert excinfo.value.code == 2


class TestConfigFile:
    def test_relative_paths_resolve_against_config(self, tmp_path):
        config_path = tmp_path / "config.json"
        rel_manifest = os.path.relpath(MANIFEST, tmp_path)
        config_path.write_text(
            json.dumps({"manifest": rel_manifest, "out_dir": "results"}),
            encoding="utf-8",
        )
        assert run_subcommand(["pipeline", "--config", str(config_path)]) == 0
        assert (tmp_path / "results" / "frequencies.csv").is_file()

    def test_flag_overrides_config(self, tmp_path):
        config_path = tmp_path / "config.json"
        config_path.write_text(
            json.dumps({"manifest": str(MANIFEST), "strategy": "binary"}),
            encoding="utf-8",
        )
        out = tmp_path / "out"
        assert run_subcommand(
            ["mine", "--config", str(config_path), "--out-dir", str(out),
             "--strategy", "linear"]
        ) == 0
        assert not (out / "keyword_file.tsv").exists()

    def test_config_strategy_used_without_flag(self, tmp_path):
        config_path = tmp_path / "config.json"
        config_path.write_text(
            json.dumps({"manifest": str(MANIFEST), "strategy": "binary"}),
            encoding="utf-8",
        )
        out = tmp_path / "out"
        assert run_subcommand(["mine", "--config", str(config_path), "--out-dir", str(out)]) == 0
        assert (out / "keyword_file.tsv").is_file()

    def test_malformed_config(self, tmp_path):
        config_path = tmp_path / "config.json"
        config_path.write_text("[1, 2, 3]", encoding="utf-8")
        with pytest.raises(SystemExit) as excinfo:
            run_subcommand(["mine", "--config", str(config_path)])
        assert excinfo.value.code == 2

    def test_seed_flag_accepted(self, tmp_path):
        out = tmp_path / "out"
        assert run_subcommand(
            ["mine", "--manifest", str(MANIFEST), "--out-dir", str(out), "--seed", "7"]
        ) == 0
