import json

import pytest

from gramattack import cli
from gramattack.attack import AttackConfig, run_campaign, write_campaign
from gramattack.confusion import ErrorType, default_sets
from gramattack.morphology import default_lexicon
from gramattack.oracle import ToyClassifier
from gramattack.textmodel import load_dataset

from helpers import toy_campaign_fixture


def write_jsonl(path, records):
    path.write_text("".join(json.dumps(r) + "\n" for r in records))


@pytest.fixture
def pair_file(tmp_path):
    path = tmp_path / "pairs.jsonl"
    records = []
    for i, bad_tok in enumerate(["these", "these", "the"]):
        records.append(
            {
                "id": f"p{i}",
                "bad": ["we", "saw", bad_tok, "cat"],
                "good": ["we", "saw", "this", "cat"],
                "edits": [{"bad_span": [2, 3], "good_span": [2, 3],
                           "tag": "ArtOrDet"}],
            }
        )
    write_jsonl(path, records)
    return path


@pytest.fixture
def toy_setup(tmp_path):
    instances, victim = toy_campaign_fixture(20)
    data = tmp_path / "data.jsonl"
    from gramattack.textmodel import save_dataset

    save_dataset(instances, data)
    weights = tmp_path / "weights.json"
    victim.save(weights)
    return instances, victim, data, weights


class TestEstimate:
    def test_matches_hand_counts(self, pair_file, tmp_path):
        out = tmp_path / "conf.json"
        assert cli.main(["estimate", "--pairs", str(pair_file),
                         "--out", str(out)]) == 0
        doc = json.loads(out.read_text())
        weights = doc["sets"]["ArtOrDet"]["weights"]["this"]
        assert abs(weights["these"] - 2 / 3) < 1e-9
        assert abs(weights["the"] - 1 / 3) < 1e-9
        assert (tmp_path / "conf.json.config.json").exists()

    def test_missing_file_exit_2(self, tmp_path):
        code = cli.main(
            ["estimate", "--pairs", str(tmp_path / "nope.jsonl"),
             "--out", str(tmp_path / "o.json")]
        )
        assert code == 2

    def test_empty_pairs_exit_2(self, tmp_path, capsys):
        path = tmp_path / "empty.jsonl"
        path.write_text("")
        code = cli.main(
            ["estimate", "--pairs", str(path), "--out", str(tmp_path / "o.json")]
        )
        assert code == 2
        assert "no supported edits" in capsys.readouterr().err


class TestPerturb:
    def test_byte_identical_rerun(self, toy_setup, tmp_path):
        _, _, data, _ = toy_setup
        outs = []
        for name in ("o1.jsonl", "o2.jsonl"):
            out = tmp_path / name
            assert cli.main(
                ["perturb", "--data", str(data), "--seed", "9",
                 "--out", str(out)]
            ) == 0
            outs.append(out.read_bytes())
        assert outs[0] == outs[1]

    def test_seed_changes_output(self, toy_setup, tmp_path):
        _, _, data, _ = toy_setup
        o1, o2 = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        cli.main(["perturb", "--data", str(data), "--seed", "1", "--out", str(o1)])
        cli.main(["perturb", "--data", str(data), "--seed", "2", "--out", str(o2)])
        assert o1.read_bytes() != o2.read_bytes()

    def test_env_seed_used(self, toy_setup, tmp_path, monkeypatch):
        _, _, data, _ = toy_setup
        monkeypatch.setenv("GRAMATTACK_SEED", "9")
        env_out = tmp_path / "env.jsonl"
        cli.main(["perturb", "--data", str(data), "--out", str(env_out)])
        flag_out = tmp_path / "flag.jsonl"
        monkeypatch.delenv("GRAMATTACK_SEED")
        cli.main(["perturb", "--data", str(data), "--seed", "9",
                  "--out", str(flag_out)])
        assert env_out.read_bytes() == flag_out.read_bytes()


class TestProbeData:
    def test_half_split(self, tmp_path):
        words = ["the", "cat", "sleeps", "on", "a", "mat", "dog", "group"]
        records = [
            {"id": f"c{i}", "text": " ".join(words[j % len(words)]
                                             for j in range(i, i + 24)),
             "label": "x"}
            for i in range(10)
        ]
        data = tmp_path / "clean.jsonl"
        write_jsonl(data, records)
        out = tmp_path / "probe.jsonl"
        assert cli.main(
            ["probe-data", "--data", str(data), "--target-type", "Nn",
             "--seed", "3", "--out", str(out)]
        ) == 0
        rows = [json.loads(l) for l in out.read_text().splitlines()]
        corrupted = [r for r in rows if r["label"] == "unacceptable"]
        assert len(corrupted) == 5
        for row in corrupted:
            assert row["error_positions"]

    def test_unknown_type_exit_2(self, tmp_path):
        data = tmp_path / "d.jsonl"
        write_jsonl(data, [{"id": "a", "text": "cat", "label": "x"}])
        code = cli.main(
            ["probe-data", "--data", str(data), "--target-type", "Nope",
             "--out", str(tmp_path / "o.jsonl")]
        )
        assert code == 2


class TestAttack:
    def test_end_to_end_matches_module(self, toy_setup, tmp_path):
        instances, victim, data, weights = toy_setup
        out = tmp_path / "campaign.jsonl"
        assert cli.main(
            ["attack", "--data", str(data), "--oracle", f"builtin:{weights}",
             "--algorithm", "greedy", "--seed", "0", "--out", str(out)]
        ) == 0
        expected_path = tmp_path / "expected.jsonl"
        results, summary = run_campaign(
            load_dataset(data), ToyClassifier.from_file(weights),
            default_sets(), default_lexicon(), AttackConfig(seed=0),
        )
        write_campaign(results, summary, expected_path)
        assert out.read_bytes() == expected_path.read_bytes()

    def test_beam_size_one_records_equal_greedy(self, toy_setup, tmp_path):
        _, _, data, weights = toy_setup
        outputs = {}
        for algo, extra in (
            ("greedy", []),
            ("beam", ["--beam-size", "1"]),
        ):
            out = tmp_path / f"{algo}.jsonl"
            assert cli.main(
                ["attack", "--data", str(data), "--oracle", f"builtin:{weights}",
                 "--algorithm", algo, "--seed", "0", "--out", str(out), *extra]
            ) == 0
            lines = out.read_text().splitlines()
            outputs[algo] = [l for l in lines if '"summary"' not in l]
        assert outputs["greedy"] == outputs["beam"]

    def test_remote_unreachable_exit_3(self, toy_setup, tmp_path):
        _, _, data, _ = toy_setup
        code = cli.main(
            ["attack", "--data", str(data),
             "--oracle", "remote:http://127.0.0.1:1/doesnotexist",
             "--out", str(tmp_path / "o.jsonl")]
        )
        assert code == 3

    def test_bad_oracle_spec_exit_2(self, toy_setup, tmp_path):
        _, _, data, _ = toy_setup
        code = cli.main(
            ["attack", "--data", str(data), "--oracle", "magic:nope",
             "--out", str(tmp_path / "o.jsonl")]
        )
        assert code == 2


class TestSweepCmd:
    def test_monotone_csv(self, toy_setup, tmp_path):
        _, _, data, weights = toy_setup
        prefix = tmp_path / "sweep"
        assert cli.main(
            ["sweep", "--data", str(data), "--oracle", f"builtin:{weights}",
             "--fractions", "0.15,0.30,0.45", "--out", str(prefix)]
        ) == 0
        rows = (tmp_path / "sweep.csv").read_text().splitlines()[1:]
        rates = [float(r.split(",")[1]) for r in rows]
        assert rates == sorted(rates)
        assert (tmp_path / "sweep-0.15.jsonl").exists()


class TestClozeCmd:
    def test_table_written(self, tmp_path):
        pairs = tmp_path / "pairs.jsonl"
        write_jsonl(
            pairs,
            [{"id": "m", "bad": ["a", "x", "c"], "good": ["a", "b", "c"],
              "edits": [{"bad_span": [1, 2], "good_span": [1, 2],
                         "tag": "Prep"}]}],
        )
        corpus = tmp_path / "corpus.txt"
        corpus.write_text("a b c\na b c\nb c\n")
        out = tmp_path / "cloze.tsv"
        assert cli.main(
            ["cloze", "--pairs", str(pairs), "--mlm", f"bigram:{corpus}",
             "--out", str(out)]
        ) == 0
        lines = out.read_text().splitlines()
        assert lines[0].split("\t")[0] == "error_type"
        assert len(lines) == 1 + len(ErrorType)


class TestAugmentCmd:
    def test_output_counts(self, toy_setup, tmp_path):
        instances, _, data, weights = toy_setup
        out = tmp_path / "aug.jsonl"
        assert cli.main(
            ["augment", "--data", str(data), "--oracle", f"builtin:{weights}",
             "--proportion", "0.5", "--seed", "0", "--out", str(out)]
        ) == 0
        rows = out.read_text().splitlines()
        assert len(rows) == len(instances) + len(instances) // 2

    def test_zero_proportion_exit_2(self, toy_setup, tmp_path):
        _, _, data, weights = toy_setup
        code = cli.main(
            ["augment", "--data", str(data), "--oracle", f"builtin:{weights}",
             "--proportion", "0", "--out", str(tmp_path / "o.jsonl")]
        )
        assert code == 2


class TestReport:
    def test_merging_additive(self, toy_setup, tmp_path):
        _, _, data, weights = toy_setup
        c1 = tmp_path / "c1.jsonl"
        cli.main(
            ["attack", "--data", str(data), "--oracle", f"builtin:{weights}",
             "--seed", "0", "--out", str(c1)]
        )
        prefix_single = tmp_path / "single"
        cli.main(["report", str(c1), "--out", str(prefix_single)])
        single = json.loads((tmp_path / "single.summary.json").read_text())

        prefix_double = tmp_path / "double"
        cli.main(["report", str(c1), str(c1), "--out", str(prefix_double)])
        double = json.loads((tmp_path / "double.summary.json").read_text())
        assert double["attacked"] == 2 * single["attacked"]
        assert double["successes"] == 2 * single["successes"]
        for etype in ErrorType:
            assert (
                double["harm_counts"][etype.value]
                == 2 * single["harm_counts"][etype.value]
            )

    def test_harm_csv_column_order(self, toy_setup, tmp_path):
        _, _, data, weights = toy_setup
        c1 = tmp_path / "c1.jsonl"
        cli.main(
            ["attack", "--data", str(data), "--oracle", f"builtin:{weights}",
             "--seed", "0", "--out", str(c1)]
        )
        cli.main(["report", str(c1), "--out", str(tmp_path / "rep")])
        rows = (tmp_path / "rep.harm.csv").read_text().splitlines()
        assert [r.split(",")[0] for r in rows[1:]] == [
            t.value for t in ErrorType
        ]

    def test_empty_campaign_na(self, tmp_path, capsys):
        empty = tmp_path / "empty.jsonl"
        empty.write_text(
            json.dumps({"summary": {"budget_fraction": 0.15,
                                    "success_rate": None}}) + "\n"
        )
        assert cli.main(["report", str(empty), "--out",
                         str(tmp_path / "rep")]) == 0
        assert "n/a" in capsys.readouterr().out
