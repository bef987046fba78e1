import csv
import hashlib
import json
import shutil
from pathlib import Path

import pytest

from actantial import cli
from actantial.config import ConfigError, load_config
from actantial.synthetic import FIXTURE_CONFIG, fixture_corpus, write_fixture

BUNDLED = Path(cli.__file__).parent / "data" / "fixture"

REPORT_FILES = [
    "labels", "actor_table", "syncretism", "missing_actants", "source_shares", "timeline", "weekly_counts",
]


@pytest.fixture
def fixture_dir(tmp_path):
    dst = tmp_path / "fx"
    shutil.copytree(BUNDLED, dst)
    return dst


def run(*args):
    return cli.main([str(a) for a in args])


def test_bundled_fixture_matches_generator(tmp_path):
    write_fixture(tmp_path / "gen")
    for name in ("corpus.jsonl", "responses.jsonl", "config.toml"):
        assert (tmp_path / "gen" / name).read_bytes() == (BUNDLED / name).read_bytes()


def test_fixture_shape():
    records, answers = fixture_corpus()
    assert len(records) == 60 and len(answers) == 57
    assert sum(r["title"] == "Sports roundup" for r in records) == 3


def test_full_run_produces_reports(fixture_dir, capsys):
    cfg = fixture_dir / "config.toml"
    assert run("run", "-c", cfg) == 0
    out = fixture_dir / "out"
    for name in REPORT_FILES:
        assert (out / "reports" / f"{name}.csv").exists()
        assert (out / "reports" / f"{name}.json").exists()
    assert (out / "reports" / "scatter.svg").read_text().startswith("<svg")
    for role in ("Subject", "Object", "Sender", "Receiver", "Helper", "Opponent"):
        assert (out / "reducers" / f"{role}.json").exists()
    with open(out / "projection.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["article_id", "x", "y"] and len(rows) == 57  # 56 parsed articles
    with open(out / "clusters.csv") as fh:
        assert next(csv.reader(fh)) == ["article_id", "cluster_id"]
    with open(out / "selection.csv") as fh:
        assert next(csv.reader(fh)) == ["k", "silhouette"]
    assert (out / "reports" / "labels.csv").read_text().startswith("# umap: n_neighbors=10")
    text = capsys.readouterr().out
    assert "kept 57 of 60" in text and "parse_error 1" in text

    assert run("baseline", "-c", cfg) == 0
    assert (out / "baseline" / "comparison.csv").exists()
    assert run("dimstudy", "-c", cfg) == 0
    assert (out / "reports" / "dimstudy.csv").exists()


def test_extract_twice_reports_full_cache_hits(fixture_dir, capsys):
    cfg = fixture_dir / "config.toml"
    assert run("ingest", "-c", cfg) == 0
    assert run("extract", "-c", cfg) == 0
    assert "cache hits 0/57 (0%)" in capsys.readouterr().out
    assert run("extract", "-c", cfg) == 0
    assert "cache hits 57/57 (100%)" in capsys.readouterr().out


def test_missing_prerequisite_names_command(fixture_dir, capsys):
    cfg = fixture_dir / "config.toml"
    for cmd in ("ingest", "extract", "embed", "build", "project"):
        assert run(cmd, "-c", cfg) == 0
    capsys.readouterr()
    assert run("report", "-c", cfg) == 1
    assert "actantial cluster" in capsys.readouterr().err
    assert run("embed", "-c", cfg, "-o", fixture_dir / "elsewhere") == 1
    assert "actantial extract" in capsys.readouterr().err


def test_config_errors_listed_together(tmp_path, capsys):
    bad = tmp_path / "bad.toml"
    bad.write_text('corpus = "nope.jsonl"\nk_min = 1\nbogus = 3\n[umap]\nn_neighbors = "x"\n')
    assert run("ingest", "-c", bad) == 1
    err = capsys.readouterr().err
    for fragment in ("n_neighbors", "bogus", "nope.jsonl", "k range"):
        assert fragment in err
    with pytest.raises(ConfigError) as exc:
        load_config(bad)
    assert len(exc.value.problems) == 4


def test_unparseable_config(tmp_path):
    bad = tmp_path / "bad.toml"
    bad.write_text("this is = = not toml")
    assert run("ingest", "-c", bad) == 1
    assert run("ingest", "-c", tmp_path / "missing.toml") == 1


def test_json_config_and_relative_paths(fixture_dir, tmp_path):
    cfg, base = load_config(fixture_dir / "config.toml")
    data = cfg.to_json()
    data["chat"]["stub_path"] = str(fixture_dir / "responses.jsonl")
    data["corpus"] = "../fx/corpus.jsonl"
    for key in ("components", "baseline_pairs", "dimstudy_dims", "dimstudy_methods", "dimstudy_max_vectors"):
        data.pop(key)
    other = tmp_path / "cfgdir"
    other.mkdir()
    (other / "c.json").write_text(json.dumps(data))
    cfg2, base2 = load_config(other / "c.json")
    assert base2 == other.resolve()
    assert cfg2.svd_dim == 16 and cfg2.embedder.mode == "hash"
    assert run("ingest", "-c", other / "c.json") == 0
    assert (other / "out" / "corpus.jsonl").exists()


def test_seed_override_recorded(fixture_dir):
    cfg = fixture_dir / "config.toml"
    assert run("ingest", "-c", cfg, "--seed", "5") == 0
    manifest = json.loads((fixture_dir / "out" / "manifest.json").read_text())
    assert manifest["entries"][-1]["seed"] == 5


def test_manifest_hash_chain_and_short_circuit(fixture_dir):
    cfg = fixture_dir / "config.toml"
    assert run("run", "-c", cfg) == 0
    assert run("run", "-c", cfg) == 0
    entries = json.loads((fixture_dir / "out" / "manifest.json").read_text())["entries"]
    prev = None
    for e in entries:
        assert e["prev"] == prev
        body = {k: v for k, v in e.items() if k != "entry_hash"}
        digest = hashlib.sha256(json.dumps(body, sort_keys=True, default=str).encode()).hexdigest()
        assert digest == e["entry_hash"]
        prev = e["entry_hash"]
    second = {e["command"]: e["skipped"] for e in entries[len(entries) // 2:]}
    assert second["ingest"] and second["build"] and second["project"] and second["cluster"]
    # every output file is accounted for by its latest manifest entry
    latest = {}
    for e in entries:
        latest.update(e["outputs"])
    for name, digest in latest.items():
        assert cli.sha256_file(fixture_dir / "out" / name) == digest


def test_changed_parameters_rerun(fixture_dir):
    cfg = fixture_dir / "config.toml"
    assert run("run", "-c", cfg) == 0
    text = cfg.read_text().replace("n_epochs = 300", "n_epochs = 200")
    cfg.write_text(text)
    assert run("project", "-c", cfg) == 0
    entries = json.loads((fixture_dir / "out" / "manifest.json").read_text())["entries"]
    assert entries[-1]["command"] == "project" and not entries[-1]["skipped"]


def test_post_drop_and_merge(fixture_dir, capsys):
    cfg = fixture_dir / "config.toml"
    assert run("run", "-c", cfg) == 0
    model = json.loads((fixture_dir / "out" / "cluster_model.json").read_text())
    k = model["k"]
    assert run("post", "drop", k - 1, "-c", cfg) == 0
    assert run("post", "merge", 0, 1, "-c", cfg) == 0
    model = json.loads((fixture_dir / "out" / "cluster_model.json").read_text())
    assert model["k"] == k - 2
    assert [op["op"] for op in model["post_ops"]] == ["drop", "merge"]
    with open(fixture_dir / "out" / "clusters.csv") as fh:
        labels = [int(r["cluster_id"]) for r in csv.DictReader(fh)]
    assert -1 in labels
    dropped = {r["article_id"] for r in csv.DictReader(open(fixture_dir / "out" / "clusters.csv"))
               if r["cluster_id"] == "-1"}
    assert run("report", "-c", cfg) == 0
    summary = json.loads((fixture_dir / "out" / "reports" / "summary.json").read_text())
    assert summary["dropped"] == len(dropped) and summary["k"] == k - 2
    labels_json = json.loads((fixture_dir / "out" / "reports" / "labels.json").read_text())
    assert sum(r["size"] for r in labels_json["rows"]) == 56 - len(dropped)
    assert run("post", "merge", 0, "-c", cfg) == 1
    assert run("post", "drop", 99, "-c", cfg) == 1


def test_fixture_command(tmp_path):
    assert run("fixture", tmp_path / "new") == 0
    assert (tmp_path / "new" / "config.toml").read_text() == FIXTURE_CONFIG


def test_internal_error_exit_code(fixture_dir, monkeypatch):
    def boom(ctx, args):
        raise RuntimeError("unexpected")

    monkeypatch.setitem(cli.COMMANDS, "ingest", boom)
    assert run("ingest", "-c", fixture_dir / "config.toml") == 2
