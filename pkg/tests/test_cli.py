import json
import subprocess
import sys
from pathlib import Path

import pytest

from capivara.cli import main

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="module")
def simulated(tmp_path_factory):
    """One simulate run shared by the read-only CLI tests."""
    out = tmp_path_factory.mktemp("cli")
    chain_path = out / "chain.jsonl"
    metrics_dir = out / "metrics"
    code = main(
        [
            "simulate",
            "--timeline", str(FIXTURES / "timeline.jsonl"),
            "--config", str(FIXTURES / "sim_config.json"),
            "--seed", "42",
            "--out", str(chain_path),
            "--metrics", str(metrics_dir),
        ]
    )
    assert code == 0
    return chain_path, metrics_dir


class TestIngest:
    def test_fixture_counts(self, tmp_path, capsys):
        out = tmp_path / "timeline.jsonl"
        code = main(["ingest", "--events", str(FIXTURES / "timeline.jsonl"), "--out", str(out)])
        assert code == 0
        assert "500 events, 0 skipped" in capsys.readouterr().out

    def test_missing_file(self, tmp_path):
        code = main(["ingest", "--events", str(tmp_path / "nope.jsonl"), "--out", str(tmp_path / "o")])
        assert code == 1

    def test_corrupt_line_skipped_not_fatal(self, tmp_path, capsys):
        events = tmp_path / "events.jsonl"
        good = {"ts": 5, "action": "add", "path": "p", "author": "a",
                "text": "pkgname=x\npkgver=1\n"}
        events.write_text(json.dumps(good) + "\nBROKEN LINE\n")
        code = main(["ingest", "--events", str(events), "--out", str(tmp_path / "out.jsonl")])
        assert code == 0
        assert "1 events, 1 skipped" in capsys.readouterr().out

    def test_unparseable_recipe_counted(self, tmp_path, capsys):
        events = tmp_path / "events.jsonl"
        bad = {"ts": 5, "action": "add", "path": "p", "author": "a", "text": "not a recipe"}
        events.write_text(json.dumps(bad) + "\n")
        code = main(["ingest", "--events", str(events), "--out", str(tmp_path / "out.jsonl")])
        assert code == 0
        assert "0 events, 1 skipped" in capsys.readouterr().out


class TestSimulate:
    def test_prints_head_and_blocks(self, simulated, capsys):
        chain_path, metrics_dir = simulated
        assert chain_path.exists()
        assert (metrics_dir / "blocks.csv").exists()

    def test_seed_changes_digest(self, tmp_path, capsys):
        heads = {}
        for seed in ("1", "2"):
            out = tmp_path / f"chain{seed}.jsonl"
            code = main(
                [
                    "simulate",
                    "--timeline", str(FIXTURES / "timeline.jsonl"),
                    "--config", str(FIXTURES / "sim_config.json"),
                    "--seed", seed,
                    "--out", str(out),
                ]
            )
            assert code == 0
            heads[seed] = capsys.readouterr().out.strip()
        assert heads["1"] != heads["2"]

    def test_empty_timeline_single_block(self, tmp_path, capsys):
        timeline = tmp_path / "empty.jsonl"
        timeline.write_text("")
        out = tmp_path / "chain.jsonl"
        code = main(["simulate", "--timeline", str(timeline), "--seed", "1", "--out", str(out)])
        assert code == 0
        assert "blocks=1 " in capsys.readouterr().out

    def test_invalid_config_usage_error(self, tmp_path):
        config = tmp_path / "config.json"
        config.write_text(json.dumps({"vouch_offsets": {"1": 0.5}}))
        code = main(
            [
                "simulate",
                "--timeline", str(FIXTURES / "timeline.jsonl"),
                "--config", str(config),
                "--seed", "1",
                "--out", str(tmp_path / "chain.jsonl"),
            ]
        )
        assert code == 2


class TestValidate:
    def test_simulator_output_validates(self, simulated, capsys):
        chain_path, _ = simulated
        assert main(["validate", "--chain", str(chain_path)]) == 0
        assert "valid" in capsys.readouterr().out

    def test_mutated_byte_names_height(self, simulated, tmp_path, capsys):
        chain_path, _ = simulated
        lines = chain_path.read_text().splitlines()
        target = 3
        line = lines[target]
        marker = '"timestamp": ' if '"timestamp": ' in line else '"timestamp":'
        position = line.index(marker) + len(marker)
        mutated = line[:position] + ("9" if line[position] != "9" else "8") + line[position + 1 :]
        tampered = tmp_path / "tampered.jsonl"
        tampered.write_text("\n".join(lines[:target] + [mutated] + lines[target + 1 :]) + "\n")
        code = main(["validate", "--chain", str(tampered)])
        out = capsys.readouterr().out
        assert code == 1
        assert f"height={target}" in out

    def test_empty_file(self, tmp_path):
        empty = tmp_path / "chain.jsonl"
        empty.write_text("")
        assert main(["validate", "--chain", str(empty)]) == 1


class TestInspect:
    def test_block_by_height(self, simulated, capsys):
        chain_path, _ = simulated
        assert main(["inspect", "--chain", str(chain_path), "--block", "0"]) == 0
        obj = json.loads(capsys.readouterr().out)
        assert obj["number"] == 0
        assert obj["previous_hash"] == "0" * 64

    def test_block_by_hash_matches_height_lookup(self, simulated, capsys):
        chain_path, _ = simulated
        assert main(["inspect", "--chain", str(chain_path), "--block", "2"]) == 0
        by_height = capsys.readouterr().out
        digest = json.loads(by_height)["hash"]
        assert main(["inspect", "--chain", str(chain_path), "--hash", digest]) == 0
        assert capsys.readouterr().out == by_height

    def test_out_of_range_height(self, simulated):
        chain_path, _ = simulated
        assert main(["inspect", "--chain", str(chain_path), "--block", "100000"]) == 1

    def test_trails_summary(self, simulated, capsys):
        chain_path, _ = simulated
        assert main(["inspect", "--chain", str(chain_path), "--trails"]) == 0
        out = capsys.readouterr().out
        assert "archlinux active" in out
        assert "fal active" in out

    def test_usage_error_exit_2(self):
        with pytest.raises(SystemExit) as excinfo:
            main(["inspect", "--chain", "x"])  # no selector
        assert excinfo.value.code == 2


def test_console_entry_point_runs():
    proc = subprocess.run(
        [sys.executable, "-m", "capivara.cli", "--help"], capture_output=True, text=True
    )
    assert proc.returncode == 0
    assert "simulate" in proc.stdout
