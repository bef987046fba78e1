"""Command-line pipeline: ingest -> extract -> embed -> build -> project -> cluster -> post -> report.

Every command takes ``--config``, ``--out`` and ``--seed``. Stage outputs are written
to the output directory and each run appends an entry to ``manifest.json``.
Exit codes: 0 success, 1 user error, 2 internal error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import sys
import traceback
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

from . import analysis
from .cache import FileCache
from .chat import make_chat_client
from .clustering import ClusterModel, drop_cluster, merge_clusters, select_k
from .config import ConfigError, RunConfig, load_config
from .corpus import Corpus, filter_by_keywords, load_corpus, source_word_counts, weekly_counts, write_corpus
from .embedder import load_vectors, make_embedder, save_vectors
from .extraction import ROLES, extract_corpus, read_records, write_records
from .narrative_embedding import dim_study, narrative_matrix
from .pipeline import actant_rows, embed_actants
from .projection import umap

logger = logging.getLogger("actantial")

# stage outputs, relative to the output directory
CORPUS = "corpus.jsonl"
EXTRACTIONS = "extractions.jsonl"
VECTORS = "actant_vectors.npz"
NARRATIVE = "narrative.npy"
NARRATIVE_IDS = "narrative_ids.json"
PROJECTION = "projection.csv"
CLUSTERS = "clusters.csv"
SELECTION = "selection.csv"
CLUSTER_MODEL = "cluster_model.json"
MANIFEST = "manifest.json"

PRODUCER = {
    CORPUS: "ingest",
    EXTRACTIONS: "extract",
    VECTORS: "embed",
    NARRATIVE: "build",
    NARRATIVE_IDS: "build",
    PROJECTION: "project",
    CLUSTER_MODEL: "cluster",
}


class UserError(Exception):
    pass


def sha256_file(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


class Context:
    def __init__(self, cfg: RunConfig, base: Path, out: Path):
        self.cfg = cfg
        self.base = base
        self.out = out
        out.mkdir(parents=True, exist_ok=True)

    def path(self, name: str) -> Path:
        return self.out / name

    def require(self, *names: str) -> None:
        for name in names:
            if not self.path(name).exists():
                cmd = PRODUCER.get(name, "the upstream command")
                raise UserError(f"missing {self.path(name)}; run `actantial {cmd}` first")

    def resolve(self, value: str) -> Path:
        p = Path(value)
        return p if p.is_absolute() else self.base / p

    # manifest ---------------------------------------------------------------

    def _manifest(self) -> dict:
        path = self.path(MANIFEST)
        if path.exists():
            return json.loads(path.read_text(encoding="utf-8"))
        return {"version": 1, "entries": []}

    def fingerprint(self, command: str, inputs: list[Path], params: dict) -> str:
        h = hashlib.sha256(command.encode())
        for p in inputs:
            h.update(p.name.encode() + b"\x00" + sha256_file(p).encode())
        h.update(json.dumps(params, sort_keys=True, default=str).encode())
        return h.hexdigest()

    def up_to_date(self, command: str, fingerprint: str) -> bool:
        for entry in reversed(self._manifest()["entries"]):
            if entry["command"] != command:
                continue
            if entry["fingerprint"] != fingerprint:
                return False
            return all(
                self.path(name).exists() and sha256_file(self.path(name)) == digest
                for name, digest in entry["outputs"].items()
            )
        return False

    def record(self, command: str, fingerprint: str, inputs, outputs, params, skipped=False) -> None:
        manifest = self._manifest()
        prev = manifest["entries"][-1]["entry_hash"] if manifest["entries"] else None
        entry = {
            "command": command,
            "fingerprint": fingerprint,
            "seed": self.cfg.seed,
            "skipped": skipped,
            "params": params,
            "inputs": {p.name: sha256_file(p) for p in inputs},
            "outputs": {n: sha256_file(self.path(n)) for n in outputs},
            "prev": prev,
        }
        entry["entry_hash"] = hashlib.sha256(
            json.dumps(entry, sort_keys=True, default=str).encode()
        ).hexdigest()
        manifest["entries"].append(entry)
        self.path(MANIFEST).write_text(
            json.dumps(manifest, indent=1, sort_keys=True, default=str), encoding="utf-8"
        )


def _run_cached(ctx: Context, command: str, inputs: list[Path], params: dict, outputs_fn) -> None:
    """Run ``outputs_fn`` unless the manifest shows identical inputs and intact outputs."""
    fp = ctx.fingerprint(command, inputs, params)
    if ctx.up_to_date(command, fp):
        logger.info("%s: inputs unchanged, outputs up to date", command)
        last = [e for e in ctx._manifest()["entries"] if e["command"] == command][-1]
        ctx.record(command, fp, inputs, list(last["outputs"]), params, skipped=True)
        return
    outputs = outputs_fn()
    ctx.record(command, fp, inputs, outputs, params)


# helpers -------------------------------------------------------------------------


def _load_ok_models(ctx: Context) -> dict:
    records = read_records(ctx.path(EXTRACTIONS))
    return {r.article_id: r.model for r in records if r.ok}


def _read_projection(ctx: Context) -> tuple[list[str], np.ndarray]:
    ids, coords = [], []
    with open(ctx.path(PROJECTION), newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            ids.append(row["article_id"])
            coords.append([float(v) for k, v in row.items() if k != "article_id"])
    return ids, np.asarray(coords)


def _write_csv(path: Path, header: list[str], rows, comment: str | None = None) -> None:
    buf = io.StringIO()
    if comment:
        buf.write(f"# {comment}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(buf.getvalue(), encoding="utf-8")


def _write_json(path: Path, data) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(data, indent=1, sort_keys=True, ensure_ascii=False) + "\n", encoding="utf-8")


def _write_table(ctx: "Context", name: str, header: list[str], rows, comment: str | None = None) -> list[str]:
    """Write ``reports/<name>.csv`` and a matching ``.json`` (list of row objects)."""
    rows = [list(r) for r in rows]
    _write_csv(ctx.path(f"{name}.csv"), header, rows, comment)
    doc = {"rows": [dict(zip(header, r)) for r in rows]}
    if comment:
        doc["note"] = comment
    _write_json(ctx.path(f"{name}.json"), doc)
    return [f"{name}.csv", f"{name}.json"]


def _f(x: float) -> str:
    return f"{x:.4f}"


def _assignment(ctx: Context) -> tuple[list[str], ClusterModel, dict[str, int]]:
    ids, _ = _read_projection(ctx)
    model = ClusterModel.load(ctx.path(CLUSTER_MODEL))
    return ids, model, dict(zip(ids, model.labels.tolist()))


def _write_clusters(ctx: Context, ids: list[str], model: ClusterModel) -> None:
    _write_csv(ctx.path(CLUSTERS), ["article_id", "cluster_id"], zip(ids, model.labels.tolist()))
    model.save(ctx.path(CLUSTER_MODEL))


# commands ------------------------------------------------------------------------


def cmd_ingest(ctx: Context, args) -> None:
    src = ctx.resolve(ctx.cfg.corpus)
    params = {"keywords": ctx.cfg.keywords}

    def run():
        corpus = load_corpus(src)
        for err in corpus.errors:
            print(f"warning: {src.name} {err}", file=sys.stderr)
        filtered = filter_by_keywords(corpus, ctx.cfg.keywords)
        write_corpus(filtered, ctx.path(CORPUS))
        _write_json(ctx.path("ingest_errors.json"), [{"line": e.line, "message": e.message} for e in corpus.errors])
        dated = [a for a in filtered if a.published_at is not None]
        weekly = weekly_counts(dated, group_by_source=True)
        _write_table(ctx, "reports/weekly_counts", ["week", "source", "count"],
                     [(w, s, c) for (w, s), c in weekly.items()])
        _write_json(ctx.path("reports/corpus_stats.json"), {
            "loaded": len(corpus), "kept": len(filtered), "errors": len(corpus.errors),
            "undated": len(filtered) - len(dated),
            "mean_word_count": source_word_counts(filtered),
            "articles_per_source": {s: sum(a.source == s for a in filtered)
                                    for s in sorted({a.source for a in filtered})},
        })
        print(f"ingest: kept {len(filtered)} of {len(corpus)} articles ({len(corpus.errors)} bad lines)")
        return [CORPUS, "ingest_errors.json", "reports/weekly_counts.csv", "reports/weekly_counts.json",
                "reports/corpus_stats.json"]

    _run_cached(ctx, "ingest", [src], params, run)


def cmd_extract(ctx: Context, args) -> None:
    ctx.require(CORPUS)
    cfg = ctx.cfg.chat
    if cfg.mode == "stub":
        cfg.stub_path = str(ctx.resolve(cfg.stub_path))
    corpus = load_corpus(ctx.path(CORPUS))
    client = make_chat_client(cfg)
    cache = FileCache(ctx.path("cache/chat"))
    try:
        records = extract_corpus(
            corpus, client, cache, max_body_chars=cfg.max_body_chars,
            concurrency=cfg.concurrency, retries=cfg.max_retries,
        )
    finally:
        client.close()
    write_records(records, ctx.path(EXTRACTIONS))
    n = len(records)
    hits = sum(r.cached for r in records)
    status = {s: sum(r.status == s for r in records) for s in ("ok", "parse_error", "endpoint_error")}
    print(
        f"extract: {n} articles, ok {status['ok']}, parse_error {status['parse_error']}, "
        f"endpoint_error {status['endpoint_error']}, truncated {sum(r.truncated for r in records)}; "
        f"cache hits {hits}/{n} ({100.0 * hits / n if n else 100.0:.0f}%)"
    )
    params = {"model": client.model, "max_body_chars": cfg.max_body_chars}
    ctx.record("extract", ctx.fingerprint("extract", [ctx.path(CORPUS)], params),
               [ctx.path(CORPUS)], [EXTRACTIONS], params)


def cmd_embed(ctx: Context, args) -> None:
    ctx.require(EXTRACTIONS)
    embedder = make_embedder(ctx.cfg.embedder)
    models = list(_load_ok_models(ctx).values())
    cache = FileCache(ctx.path("cache/embed"))
    vectors = embed_actants(models, embedder, cache)
    keys = sorted(vectors)
    matrix = np.array([vectors[k] for k in keys]).reshape(len(keys), embedder.dimension)
    save_vectors(ctx.path(VECTORS), keys, matrix, embedder.model_id)
    print(f"embed: {len(keys)} unique actant strings, cache hits {cache.hits}/{cache.hits + cache.misses}")
    params = {"model": embedder.model_id, "dimension": embedder.dimension, "prefix": embedder.prefix}
    ctx.record("embed", ctx.fingerprint("embed", [ctx.path(EXTRACTIONS)], params),
               [ctx.path(EXTRACTIONS)], [VECTORS], params)


def cmd_build(ctx: Context, args) -> None:
    ctx.require(EXTRACTIONS, VECTORS)
    params = {"svd_dim": ctx.cfg.svd_dim, "fit_scope": ctx.cfg.fit_scope}
    inputs = [ctx.path(EXTRACTIONS), ctx.path(VECTORS)]

    def run():
        models = _load_ok_models(ctx)
        vectors, _ = load_vectors(ctx.path(VECTORS))
        ids = list(models)
        try:
            matrix, reducers = narrative_matrix(
                actant_rows([models[i] for i in ids], vectors), ctx.cfg.svd_dim, ctx.cfg.fit_scope
            )
        except KeyError as exc:
            raise UserError(f"actant {exc} has no vector; re-run `actantial embed`") from None
        except ValueError as exc:
            raise UserError(str(exc)) from None
        outputs = [NARRATIVE, NARRATIVE_IDS]
        for role in ROLES:
            name = f"reducers/{role.value}.json"
            ctx.path("reducers").mkdir(exist_ok=True)
            reducers[role].save(ctx.path(name))
            outputs.append(name)
        np.save(ctx.path(NARRATIVE), matrix)
        _write_json(ctx.path(NARRATIVE_IDS), ids)
        print(f"build: {matrix.shape[0]} narrative embeddings of dimension {matrix.shape[1]}")
        return outputs

    _run_cached(ctx, "build", inputs, params, run)


def cmd_project(ctx: Context, args) -> None:
    ctx.require(NARRATIVE, NARRATIVE_IDS)
    params = {"umap": ctx.cfg.umap_params.describe()}
    inputs = [ctx.path(NARRATIVE), ctx.path(NARRATIVE_IDS)]

    def run():
        matrix = np.load(ctx.path(NARRATIVE))
        ids = json.loads(ctx.path(NARRATIVE_IDS).read_text(encoding="utf-8"))
        try:
            coords = umap(matrix, ctx.cfg.umap_params)
        except ValueError as exc:
            raise UserError(str(exc)) from None
        dims = ["x", "y", "z"][: coords.shape[1]] if coords.shape[1] <= 3 else [
            f"c{i}" for i in range(coords.shape[1])]
        _write_csv(ctx.path(PROJECTION), ["article_id", *dims],
                   ([aid, *map(repr, row.tolist())] for aid, row in zip(ids, coords)))
        print(f"project: {len(ids)} points -> {coords.shape[1]}D ({ctx.cfg.umap_params.describe()})")
        return [PROJECTION]

    _run_cached(ctx, "project", inputs, params, run)


def cmd_cluster(ctx: Context, args) -> None:
    ctx.require(PROJECTION)
    params = {"k_min": ctx.cfg.k_min, "k_max": ctx.cfg.k_max}

    def run():
        ids, coords = _read_projection(ctx)
        k_max = min(ctx.cfg.k_max, len(ids) - 1)
        if k_max < ctx.cfg.k_min:
            raise UserError(f"only {len(ids)} articles; cannot search k >= {ctx.cfg.k_min}")
        k, model = select_k(coords, ctx.cfg.k_min, k_max)
        _write_clusters(ctx, ids, model)
        _write_csv(ctx.path(SELECTION), ["k", "silhouette"],
                   ((kk, repr(s)) for kk, s in sorted(model.scores.items())))
        print(f"cluster: best k={k} (silhouette {model.silhouette:.4f}) over k in [{ctx.cfg.k_min}, {k_max}]")
        return [CLUSTERS, SELECTION, CLUSTER_MODEL]

    _run_cached(ctx, "cluster", [ctx.path(PROJECTION)], params, run)


def cmd_post(ctx: Context, args) -> None:
    ctx.require(PROJECTION, CLUSTER_MODEL)
    ids, coords = _read_projection(ctx)
    model = ClusterModel.load(ctx.path(CLUSTER_MODEL))
    try:
        if args.op == "drop":
            model = drop_cluster(model, args.clusters[0], coords)
        else:
            if len(args.clusters) != 2:
                raise UserError("merge needs exactly two cluster ids")
            model = merge_clusters(model, args.clusters[0], args.clusters[1], coords)
    except ValueError as exc:
        raise UserError(str(exc)) from None
    _write_clusters(ctx, ids, model)
    sil = "n/a" if model.silhouette is None else f"{model.silhouette:.4f}"
    print(f"post: {args.op} {args.clusters} -> {model.k} clusters, silhouette {sil}")
    params = {"op": args.op, "clusters": args.clusters}
    ctx.record("post", ctx.fingerprint("post", [ctx.path(PROJECTION)], params),
               [ctx.path(PROJECTION)], [CLUSTERS, CLUSTER_MODEL], params)


PALETTE = (
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf", "#393b79", "#637939", "#8c6d31", "#843c39", "#7b4173", "#3182bd",
    "#e6550d", "#31a354", "#756bb1", "#636363",
)


def scatter_svg(coords: np.ndarray, labels: np.ndarray, names: dict[int, str], size: int = 800) -> str:
    pad = 40
    lo, hi = coords.min(axis=0), coords.max(axis=0)
    span = np.where(hi - lo > 0, hi - lo, 1.0)
    xy = pad + (coords[:, :2] - lo[:2]) / span[:2] * (size - 2 * pad)
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
           f'viewBox="0 0 {size} {size}">', '<rect width="100%" height="100%" fill="white"/>']
    for (x, y), lab in zip(xy, labels):
        color = "#cccccc" if lab < 0 else PALETTE[lab % len(PALETTE)]
        out.append(f'<circle cx="{x:.2f}" cy="{size - y:.2f}" r="3" fill="{color}" fill-opacity="0.8"/>')
    for c, name in sorted(names.items()):
        centre = xy[labels == c].mean(axis=0)
        text = escape(f"{c}: {name}" if name else str(c))
        out.append(f'<text x="{centre[0]:.2f}" y="{size - centre[1]:.2f}" font-size="11" '
                   f'font-family="sans-serif">{text}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def cmd_report(ctx: Context, args) -> None:
    ctx.require(CORPUS, EXTRACTIONS, PROJECTION, CLUSTER_MODEL)
    cfg = ctx.cfg
    corpus = load_corpus(ctx.path(CORPUS))
    models = _load_ok_models(ctx)
    ids, coords = _read_projection(ctx)
    _, model, assignment = _assignment(ctx)
    note = f"umap: {cfg.umap_params.describe()}"
    kept = {i: models[i] for i in ids if assignment[i] >= 0}
    outputs = []

    specs = analysis.label_clusters(models, assignment, cfg.label_threshold)
    names = {s.cluster_id: s.label for s in specs}
    outputs += _write_table(ctx, "reports/labels", ["cluster", "size", "label"],
                            ((s.cluster_id, s.size, s.label) for s in specs), note)

    rows = analysis.actor_table(models, assignment, cfg.table_threshold)
    outputs += _write_table(ctx, "reports/actor_table", ["cluster", "role", "actor", "share", "count"],
                            ((r.cluster, r.role.value, r.actor, _f(r.share), r.count) for r in rows), note)

    sync = analysis.syncretism_report(list(kept.values()))
    outputs += _write_table(
        ctx, "reports/syncretism", ["syncretism", "share", "count", "top_actors"],
        ((r.name, _f(r.share), r.count, "; ".join(f"{a} ({_f(s)})" for a, s in r.top_actors)) for r in sync),
        note,
    )

    missing = analysis.missing_actant_stats(kept, assignment)
    miss_rows = [("all", *(_f(missing.overall[r]) for r in ROLES))]
    miss_rows += [(c, *(_f(v[r]) for r in ROLES)) for c, v in missing.per_cluster.items()]
    outputs += _write_table(ctx, "reports/missing_actants", ["cluster", *(r.value for r in ROLES)],
                            miss_rows, note)

    shares = analysis.source_shares(assignment, corpus)
    sources = sorted({a.source for a in corpus})
    outputs += _write_table(ctx, "reports/source_shares", ["cluster", *sources],
                            ((c, *(_f(v.get(s, 0.0)) for s in sources)) for c, v in shares.items()), note)

    if all(corpus[i].published_at is not None for i in ids):
        components = cfg.components or {f"cluster {c}": [c] for c in range(model.k)}
        timeline = analysis.component_timeline(assignment, corpus, components, group_by_source=True)
        outputs += _write_table(
            ctx, "reports/timeline", ["component", "week", "source", "count"],
            ((name, w, s, n) for name, series in timeline.items() for (w, s), n in series.items()), note,
        )
    else:
        logger.warning("some articles have no publication date; timeline skipped")

    ctx.path("reports/scatter.svg").write_text(scatter_svg(coords, model.labels, names), encoding="utf-8")
    outputs.append("reports/scatter.svg")
    _write_json(ctx.path("reports/summary.json"), {
        "umap": cfg.umap_params.describe(),
        "k": model.k,
        "silhouette": model.silhouette,
        "post_ops": model.post_ops,
        "n_articles": len(ids),
        "dropped": int((model.labels < 0).sum()),
    })
    outputs.append("reports/summary.json")
    print(f"report: {len(specs)} clusters written to {ctx.path('reports')}")
    inputs = [ctx.path(n) for n in (CORPUS, EXTRACTIONS, PROJECTION, CLUSTER_MODEL)]
    params = {"umap": cfg.umap_params.describe(), "label_threshold": cfg.label_threshold,
              "table_threshold": cfg.table_threshold, "components": cfg.components}
    ctx.record("report", ctx.fingerprint("report", inputs, params), inputs, outputs, params)


def cmd_baseline(ctx: Context, args) -> None:
    ctx.require(CORPUS)
    cfg = ctx.cfg
    corpus = load_corpus(ctx.path(CORPUS))
    labels = None
    if ctx.path(CLUSTER_MODEL).exists() and ctx.path(PROJECTION).exists():
        ids, model, _ = _assignment(ctx)
        corpus = corpus.subset(ids)
        order = {aid: i for i, aid in enumerate(ids)}
        labels = np.array([model.labels[order[a.id]] for a in corpus])
    embedder = make_embedder(cfg.embedder)
    result = analysis.baseline_whole_text(
        corpus, embedder, cfg.umap_params, cfg.k_min, cfg.k_max, labels, cfg.baseline_pairs,
        cache=FileCache(ctx.path("cache/embed")),
    )
    out = Path("baseline")
    _write_csv(ctx.path(out / "clusters.csv"), ["article_id", "cluster_id"],
               zip(corpus.ids, result.labels.tolist()))
    _write_csv(ctx.path(out / "projection.csv"), ["article_id", "x", "y"],
               ([aid, *map(repr, row.tolist())] for aid, row in zip(corpus.ids, result.coords)))
    _write_table(ctx, "baseline/comparison", ["clusters", "n_articles", "ari"],
                 ((" ".join(map(str, c.clusters)), c.n_articles, _f(c.ari)) for c in result.comparisons),
                 f"umap: {cfg.umap_params.describe()}")
    print(f"baseline: whole-text pipeline chose k={result.k}; "
          + ", ".join(f"clusters {c.clusters}: ARI {c.ari:.3f}" for c in result.comparisons))
    ctx.record("baseline", ctx.fingerprint("baseline", [ctx.path(CORPUS)], {}), [ctx.path(CORPUS)],
               [str(out / n) for n in ("clusters.csv", "projection.csv", "comparison.csv", "comparison.json")],
               {"umap": cfg.umap_params.describe(), "cluster_pairs": cfg.baseline_pairs})


def cmd_dimstudy(ctx: Context, args) -> None:
    ctx.require(EXTRACTIONS, VECTORS)
    cfg = ctx.cfg
    params = {"dims": cfg.dimstudy_dims, "methods": cfg.dimstudy_methods,
              "max_vectors": cfg.dimstudy_max_vectors, "umap": cfg.umap_params.describe()}
    inputs = [ctx.path(EXTRACTIONS), ctx.path(VECTORS)]

    def run():
        models = _load_ok_models(ctx)
        vectors, _ = load_vectors(ctx.path(VECTORS))
        # non-unique pool: one row per actant occurrence
        pool = [vectors[p] for m in models.values() for p in m.primaries.values() if p is not None]
        x = np.asarray(pool)
        if len(x) > cfg.dimstudy_max_vectors:
            rng = np.random.default_rng(cfg.seed)
            x = x[np.sort(rng.choice(len(x), cfg.dimstudy_max_vectors, replace=False))]
        result = dim_study(x, cfg.dimstudy_dims, cfg.dimstudy_methods, cfg.umap_params)
        rows = [("full", x.shape[1], _f(result.baseline))]
        rows += [(m, k, "unavailable" if v is None else _f(v)) for m, k, v in result.rows()]
        outputs = _write_table(ctx, "reports/dimstudy", ["method", "dim", "avg_similarity"], rows,
                               f"umap: {cfg.umap_params.describe()}; n_vectors={len(x)}")
        print(f"dimstudy: {len(x)} actant vectors, {len(rows) - 1} reductions")
        return outputs

    _run_cached(ctx, "dimstudy", inputs, params, run)


PIPELINE = ("ingest", "extract", "embed", "build", "project", "cluster", "report")

COMMANDS = {
    "ingest": cmd_ingest,
    "extract": cmd_extract,
    "embed": cmd_embed,
    "build": cmd_build,
    "project": cmd_project,
    "cluster": cmd_cluster,
    "post": cmd_post,
    "report": cmd_report,
    "baseline": cmd_baseline,
    "dimstudy": cmd_dimstudy,
}


def cmd_run(ctx: Context, args) -> None:
    for name in PIPELINE:
        COMMANDS[name](ctx, args)


def cmd_fixture(ctx: Context, args) -> None:
    from .synthetic import write_fixture

    path = write_fixture(args.directory)
    print(f"fixture written to {path}")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", "-c", help="TOML or JSON run configuration")
    common.add_argument("--out", "-o", help="output directory (default: config 'out')")
    common.add_argument("--seed", type=int, help="override the configured seed")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="actantial", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "ingest": "load, validate and keyword-filter the corpus",
        "extract": "extract actantial models with the chat endpoint",
        "embed": "embed the primary actor of every actant",
        "build": "fit per-actant SVD reducers and build narrative embeddings",
        "project": "UMAP projection of the narrative embeddings",
        "cluster": "Ward clustering with silhouette-based choice of k",
        "report": "label clusters and write report tables",
        "baseline": "whole-text embedding baseline and comparison",
        "dimstudy": "average similarity under SVD / PCA / UMAP reduction",
        "run": "ingest through report in one go",
    }
    for name, text in helps.items():
        sub.add_parser(name, parents=[common], help=text)
    post = sub.add_parser("post", parents=[common], help="drop or merge clusters (audited)")
    post.add_argument("op", choices=["drop", "merge"])
    post.add_argument("clusters", type=int, nargs="+")
    fixture = sub.add_parser("fixture", parents=[common], help="write the bundled offline fixture")
    fixture.add_argument("directory")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        if args.command == "fixture":
            cmd_fixture(None, args)
            return 0
        cfg, base = load_config(args.config)
        if args.seed is not None:
            cfg.seed = args.seed
        if args.config is None:
            problems = cfg.problems()
            if problems:
                raise ConfigError(problems)
        out = Path(args.out) if args.out else base / cfg.out
        ctx = Context(cfg, base, out)
        handler = cmd_run if args.command == "run" else COMMANDS[args.command]
        handler(ctx, args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (UserError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception:
        traceback.print_exc()
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
