import json

import numpy as np
import pytest

from atclab.cli import main
from atclab.corpus.audio import AudioBuffer, write_wav

FOX_REF = "The quick brown fox jumps over the lazy dog\n"
FOX_HYP = "The quick brown dog jumps over the lazy\n"


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


class TestWerCommand:
    def test_worked_example_summary(self, tmp_path, capsys):
        ref = tmp_path / "ref.txt"
        hyp = tmp_path / "hyp.txt"
        ref.write_text(FOX_REF)
        hyp.write_text(FOX_HYP)
        code, out, _ = run(capsys, "wer", "--ref", str(ref), "--hyp", str(hyp))
        assert code == 0
        assert "S=1 D=1 I=0 N=9 WER=0.2222" in out

    def test_per_utterance_csv(self, tmp_path, capsys):
        ref = tmp_path / "ref.txt"
        hyp = tmp_path / "hyp.txt"
        ref.write_text(FOX_REF + "hold short\n")
        hyp.write_text(FOX_HYP + "hold short\n")
        code, out, _ = run(capsys, "wer", "--ref", str(ref), "--hyp", str(hyp),
                           "--per-utterance")
        assert code == 0
        lines = out.splitlines()
        assert lines[0] == "id,S,D,I,N,wer"
        assert lines[1] == "0,1,1,0,9,0.2222"
        assert lines[2] == "1,0,0,0,2,0.0000"

    def test_show_alignment(self, tmp_path, capsys):
        ref = tmp_path / "r.txt"
        hyp = tmp_path / "h.txt"
        ref.write_text(FOX_REF)
        hyp.write_text(FOX_HYP)
        code, out, _ = run(capsys, "wer", "--ref", str(ref), "--hyp", str(hyp),
                           "--show-alignment")
        assert code == 0
        assert "REF:" in out and "HYP:" in out and "OP:" in out

    def test_missing_ref_flag(self, tmp_path, capsys):
        code, _, err = run(capsys, "wer", "--hyp", str(tmp_path / "h.txt"))
        assert code == 1
        assert "ref" in err

    def test_missing_file(self, tmp_path, capsys):
        code, _, err = run(capsys, "wer", "--ref", str(tmp_path / "nope.txt"),
                           "--hyp", str(tmp_path / "nope.txt"))
        assert code == 1

    def test_unknown_flag_rejected(self, tmp_path, capsys):
        code, _, err = run(capsys, "wer", "--ref", "a", "--hyp", "b",
                           "--bogus")
        assert code == 1


class TestHelp:
    @pytest.mark.parametrize("argv", [
        ["--help"], ["wer", "--help"], ["synth", "--help"],
        ["train", "--help"], ["grid", "--help"], ["report", "--help"],
        ["corpus", "prepare", "--help"],
    ])
    def test_help_exits_zero(self, argv, capsys):
        with pytest.raises(SystemExit) as exc:
            main(argv)
        assert exc.value.code == 0
        assert "usage" in capsys.readouterr().out


class TestSynthCommand:
    def test_deterministic_and_counted(self, tmp_path, capsys):
        for name in ("a", "b"):
            code, out, _ = run(capsys, "synth", "--seed", "5", "--n", "40",
                               "--channel", "atc", "--out",
                               str(tmp_path / name))
            assert code == 0
            assert "utterances=40" in out
        files_a = sorted((tmp_path / "a").rglob("*.jsonl"))
        files_b = sorted((tmp_path / "b").rglob("*.jsonl"))
        assert [f.read_bytes() for f in files_a] == \
            [f.read_bytes() for f in files_b]

    def test_env_seed_default(self, tmp_path, capsys, monkeypatch):
        monkeypatch.setenv("ATCLAB_SEED", "77")
        code, out, _ = run(capsys, "synth", "--n", "5", "--out",
                           str(tmp_path / "c"))
        assert code == 0
        assert "seed=77" in out


class TestCorpusPrepare:
    def test_prepare_summary(self, tmp_path, capsys):
        tx = tmp_path / "tx"
        au = tmp_path / "au"
        tx.mkdir()
        au.mkdir()
        (tx / "t1.txt").write_text(
            "((TIMES 0.0 6.0) (TEXT runway 22 cleared to land))\n"
            "((TIMES 10.0 16.0) (TEXT UNINTELLIGIBLE))\n")
        tone = 0.1 * np.sin(2 * np.pi * 300 * np.arange(30 * 8000) / 8000)
        write_wav(au / "t1.wav", AudioBuffer(tone, 8000))
        code, out, _ = run(capsys, "corpus", "prepare", "--transcripts",
                           str(tx), "--audio", str(au), "--out",
                           str(tmp_path / "manifest.jsonl"))
        assert code == 0
        assert "parsed=2 kept=1 dropped_unintelligible=1" in out
        entry = json.loads((tmp_path / "manifest.jsonl").read_text())
        assert entry["text_norm"] == "runway twenty two cleared to land"


class TestTrainAndGridCommands:
    def make_corpus(self, tmp_path, capsys, n=30, channel="atc", seed=9):
        out = tmp_path / "corpus"
        code, _, _ = run(capsys, "synth", "--seed", str(seed), "--n", str(n),
                         "--channel", channel, "--out", str(out))
        assert code == 0
        return out

    def test_train_writes_artifacts(self, tmp_path, capsys):
        corpus = self.make_corpus(tmp_path, capsys, n=12)
        config = tmp_path / "train.json"
        config.write_text(json.dumps({
            "batch_size": 6, "learning_rate": 5e-4, "epochs": 1, "seed": 3,
            "model": {"d_model": 32, "d_ff": 64, "n_enc_layers": 1,
                      "n_dec_layers": 1},
        }))
        out = tmp_path / "run"
        code, text, _ = run(capsys, "train", "--manifest", str(corpus),
                            "--config", str(config), "--out", str(out))
        assert code == 0
        assert (out / "checkpoint.ckpt").exists()
        metrics = [json.loads(l) for l in
                   (out / "metrics.jsonl").read_text().splitlines()]
        assert {"task_id", "fold", "batch", "lr", "epochs_total", "epoch",
                "train_loss", "eval_loss", "eval_wer",
                "wall_clock_s"} == set(metrics[0])
        assert "train_loss=" in text

    def test_grid_and_report_flow(self, tmp_path, capsys):
        corpus = self.make_corpus(tmp_path, capsys, n=24)
        manifest = tmp_path / "campaign.json"
        manifest.write_text(json.dumps({
            "grids": {"lrs": [5e-4], "batches": [12], "epochs": [1]},
        }))
        out = tmp_path / "grid"
        code, text, _ = run(capsys, "grid", "--manifest", str(corpus),
                            "--campaign", "base", "--k", "2", "--seed", "4",
                            "--workers", "2", "--out", str(out),
                            "--config", str(manifest))
        assert code == 0
        lines = (out / "results.jsonl").read_text().splitlines()
        assert len(lines) == 2  # one lr x one batch x one epochs x 2 folds
        assert "trials=2 ok=2" in text

        rep = tmp_path / "rep"
        code, text, _ = run(capsys, "report", "--results",
                            str(out / "results.jsonl"), "--out", str(rep))
        assert code == 0
        for name in ("table1.csv", "table2.csv", "table3.csv", "table4.csv"):
            assert (rep / name).exists()

    def test_grid_base_campaign_yields_sixty_lines(self, tmp_path, capsys):
        corpus = self.make_corpus(tmp_path, capsys, n=15, seed=13)
        out = tmp_path / "grid60"
        code, text, _ = run(capsys, "grid", "--manifest", str(corpus),
                            "--campaign", "base", "--k", "5", "--seed", "13",
                            "--workers", "4", "--out", str(out))
        assert code == 0
        lines = (out / "results.jsonl").read_text().splitlines()
        assert len(lines) == 60
        assert "trials=60" in text

    def test_report_missing_file(self, tmp_path, capsys):
        code, _, err = run(capsys, "report", "--results",
                           str(tmp_path / "none.jsonl"), "--out",
                           str(tmp_path / "rep"))
        assert code == 1
        assert "not found" in err
