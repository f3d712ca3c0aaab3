import json

import numpy as np
import pytest

from confjudge.cli import main

REFERENCE_LOGITS = (-12.69, -9.06, -5.06, -1.06, -0.44)


def run(*argv):
    return main(list(argv))


@pytest.fixture()
def synth_file(tmp_path):
    path = tmp_path / "samples.jsonl"
    code = run("synth", "--noise", "homoscedastic", "--sigma", "0.5", "--n", "400",
               "--seed", "3", "-o", str(path))
    assert code == 0
    return path


def write_transcripts(path, rows):
    with open(path, "w") as fh:
        for rec in rows:
            fh.write(json.dumps(rec) + "\n")


def reference_transcript(rid="93_10_COT2", label=14 / 3):
    alts = [{"text": str(r + 1), "logprob": REFERENCE_LOGITS[r]} for r in range(5)]
    return {
        "id": rid,
        "tokens": [
            {"text": "Rating", "logprob": -0.3},
            {"text": ":", "logprob": -0.2},
            {"text": "5", "logprob": -0.44, "alternatives": alts},
        ],
        "declared_score": 5,
        "label": label,
        "meta": {"dimension": "consistency"},
    }


class TestSynthCommand:
    def test_writes_samples_and_oracle(self, tmp_path):
        out = tmp_path / "d.jsonl"
        assert run("synth", "--n", "1000", "--seed", "1", "-o", str(out)) == 0
        assert len(out.read_text().splitlines()) == 1000
        oracle = json.loads((tmp_path / "d.oracle.json").read_text())
        assert oracle["noise"] == "homoscedastic"

    def test_deterministic(self, tmp_path):
        a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        run("synth", "--n", "50", "--seed", "9", "-o", str(a))
        run("synth", "--n", "50", "--seed", "9", "-o", str(b))
        assert a.read_bytes() == b.read_bytes()


class TestExtractCommand:
    def test_reference_logits_roundtrip(self, tmp_path):
        transcripts = tmp_path / "t.jsonl"
        write_transcripts(transcripts, [reference_transcript()])
        out = tmp_path / "s.jsonl"
        code = run("extract", str(transcripts), "-o", str(out),
                   "--scale-step", str(1 / 3))
        assert code == 0
        rec = json.loads(out.read_text().splitlines()[0])
        np.testing.assert_allclose(rec["logits"], REFERENCE_LOGITS, atol=1e-9)
        assert rec["raw_score"] == 5.0

    def test_empty_input_exits_nonzero(self, tmp_path, capsys):
        transcripts = tmp_path / "t.jsonl"
        transcripts.write_text("")
        out = tmp_path / "s.jsonl"
        code = run("extract", str(transcripts), "-o", str(out))
        assert code == 2
        assert "no samples" in capsys.readouterr().err

    def test_exclusions_report(self, tmp_path):
        transcripts = tmp_path / "t.jsonl"
        rows = [
            reference_transcript("a", label=5.0),
            reference_transcript("b", label=4.0),
            {"id": "c", "tokens": [{"text": "nothing", "logprob": -0.1}], "label": 3.0},
        ]
        write_transcripts(transcripts, rows)
        out = tmp_path / "s.jsonl"
        code = run("extract", str(transcripts), "-o", str(out))
        assert code == 0
        assert len(out.read_text().splitlines()) == 2
        excl = json.loads((tmp_path / "s.exclusions.json").read_text())
        assert excl == [{"id": "c", "reason": "unlocatable"}]

    def test_malformed_line_reports_number(self, tmp_path, capsys):
        transcripts = tmp_path / "t.jsonl"
        transcripts.write_text("{bad json\n")
        code = run("extract", str(transcripts), "-o", str(tmp_path / "s.jsonl"))
        assert code == 2
        assert "line 1" in capsys.readouterr().err


class TestEvaluateCommand:
    def test_single_method_single_seed(self, synth_file, tmp_path):
        out = tmp_path / "run"
        code = run("evaluate", str(synth_file), "--methods", "split_abs", "--seeds", "1",
                   "--alpha", "0.1", "--out-dir", str(out), "--jobs", "1")
        assert code == 0
        lines = (out / "eval.csv").read_text().splitlines()
        assert lines[0] == "method,seed,policy,mean_width,coverage"
        assert len(lines) == 2
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["runs"][0]["command"] == "evaluate"
        assert list(manifest["runs"][0]["inputs"].values())[0]

    def test_ten_row_file_single_cell(self, tmp_path):
        samples = tmp_path / "ten.jsonl"
        assert run("synth", "--n", "10", "--seed", "2", "-o", str(samples)) == 0
        out = tmp_path / "run"
        code = run("evaluate", str(samples), "--methods", "split_abs", "--seeds", "1",
                   "--alpha", "0.1", "--out-dir", str(out), "--jobs", "1")
        assert code == 0
        lines = (out / "eval.csv").read_text().splitlines()
        assert len(lines) == 2 and lines[1].startswith("split_abs,1,none,")

    def test_rerun_byte_identical(self, synth_file, tmp_path):
        out1, out2 = tmp_path / "r1", tmp_path / "r2"
        args = ("evaluate", str(synth_file), "--methods", "split_abs,ordinal_aps",
                "--seeds", "1..3", "--jobs", "1")
        assert run(*args, "--out-dir", str(out1)) == 0
        assert run(*args, "--out-dir", str(out2)) == 0
        assert (out1 / "eval.csv").read_bytes() == (out2 / "eval.csv").read_bytes()

    def test_adjusted_rows_dominate_continuous(self, synth_file, tmp_path):
        args = ("evaluate", str(synth_file), "--methods", "split_abs,ordinal_rc",
                "--seeds", "1..4", "--jobs", "1")
        assert run(*args, "--adjust", "none", "--out-dir", str(tmp_path / "plain")) == 0
        assert run(*args, "--adjust", "nearest", "--lambda", "full",
                   "--out-dir", str(tmp_path / "adj")) == 0

        def rows(p):
            out = {}
            for line in (p / "eval.csv").read_text().splitlines()[1:]:
                method, seed, _, width, cov = line.split(",")
                out[(method, seed)] = float(cov)
            return out

        plain = rows(tmp_path / "plain")
        adjusted = rows(tmp_path / "adj")
        assert plain.keys() == adjusted.keys()
        for key, cov in plain.items():
            assert adjusted[key] >= cov

    def test_unknown_method_is_usage_error(self, synth_file, tmp_path, capsys):
        code = run("evaluate", str(synth_file), "--methods", "bogus",
                   "--out-dir", str(tmp_path))
        assert code == 1
        err = capsys.readouterr().err
        assert "split_abs" in err and "r2ccp" in err

    def test_missing_file_is_data_error(self, tmp_path):
        assert run("evaluate", str(tmp_path / "nope.jsonl"), "--out-dir", str(tmp_path)) == 2


class TestOtherCommands:
    def test_sweep_row_count(self, synth_file, tmp_path):
        out = tmp_path / "run"
        code = run("sweep", str(synth_file), "--method", "split_abs",
                   "--fractions", "0.25,0.5,0.75,1.0", "--seeds", "1..3",
                   "--out-dir", str(out))
        assert code == 0
        lines = (out / "sweep.csv").read_text().splitlines()
        assert lines[0] == "fraction,mean_coverage,std_coverage"
        assert len(lines) == 5

    def test_het_groups_by_dimension(self, synth_file, tmp_path):
        out = tmp_path / "run"
        assert run("het", str(synth_file), "--out-dir", str(out)) == 0
        lines = (out / "het.csv").read_text().splitlines()
        assert lines[0] == "dimension,test,lm_stat,lm_p,f_stat,f_p"
        assert {ln.split(",")[1] for ln in lines[1:]} == {"bp", "white"}

    def test_midpoints(self, synth_file, tmp_path):
        out = tmp_path / "run"
        assert run("midpoints", str(synth_file), "--seeds", "1", "--out-dir", str(out)) == 0
        lines = (out / "midpoints.csv").read_text().splitlines()
        assert len(lines) == 5

    def test_human_baseline(self, tmp_path):
        ann = tmp_path / "ann.jsonl"
        with open(ann, "w") as fh:
            rng = np.random.default_rng(0)
            for i in range(60):
                base = rng.integers(1, 5)
                fh.write(json.dumps({"id": f"h{i}", "annotations": [int(base), int(base), int(base) + 1]}) + "\n")
        out = tmp_path / "run"
        assert run("human-baseline", str(ann), "--seeds", "1..3", "--out-dir", str(out)) == 0
        lines = (out / "human.csv").read_text().splitlines()
        assert len(lines) == 4

    def test_manifest_appends(self, synth_file, tmp_path):
        out = tmp_path / "run"
        run("evaluate", str(synth_file), "--methods", "split_abs", "--seeds", "1",
            "--out-dir", str(out), "--jobs", "1")
        run("het", str(synth_file), "--out-dir", str(out))
        manifest = json.loads((out / "manifest.json").read_text())
        assert [r["command"] for r in manifest["runs"]] == ["evaluate", "het"]

    def test_usage_error_on_bad_seeds(self, synth_file, tmp_path):
        assert run("evaluate", str(synth_file), "--seeds", "", "--out-dir", str(tmp_path)) == 1

    def test_jobs_env_override(self, monkeypatch):
        from confjudge.cli import _default_jobs

        monkeypatch.setenv("CONFJUDGE_JOBS", "3")
        assert _default_jobs() == 3
        monkeypatch.delenv("CONFJUDGE_JOBS")
        assert _default_jobs() >= 1

    def test_extraction_exclusions_flow_into_reports(self, tmp_path):
        transcripts = tmp_path / "t.jsonl"
        rows = [reference_transcript(f"t{i}", label=float(1 + i % 5)) for i in range(12)]
        rows.append({"id": "broken", "tokens": [{"text": "nothing", "logprob": -0.1}], "label": 3.0})
        write_transcripts(transcripts, rows)
        samples = tmp_path / "s.jsonl"
        assert run("extract", str(transcripts), "-o", str(samples)) == 0
        out = tmp_path / "run"
        assert run("evaluate", str(samples), "--methods", "ordinal_aps", "--seeds", "1",
                   "--out-dir", str(out), "--jobs", "1") == 0
        manifest = json.loads((out / "manifest.json").read_text())
        entry = next(r for r in manifest["runs"] if r["command"] == "evaluate")
        assert entry["excluded"] == 1
