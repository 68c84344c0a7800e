"""Stage orchestration: ingest, features, train, evaluate, report, cluster.

Stages write their artifacts under the output directory and are resumable:
the feature store embeds the semantic config hash, and later stages rebuild
it only when the hash changes. All artifacts are deterministic for a given
config and inputs, independent of the worker count; sharded ingestion
repairs cross-shard duplicate ids by re-reading only the losing rows and
subtracting their contributions.
"""

from __future__ import annotations

import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from datetime import date
from pathlib import Path

import numpy as np

from . import cluster as cluster_mod
from .config import PipelineConfig
from .errors import DataError
from .evaluation import (
    ACCURACY,
    MSE,
    classification_metrics,
    cross_validated_grid_search,
    regression_metrics,
    roc_curve_auc,
)
from .features import (
    FEATURE_COLUMNS,
    USER_FEATURE_COLUMNS,
    DailyAggregator,
    SENTIMENT_INDEX,
    UserAggregator,
    apply_scaler,
    assemble_design_matrix,
    chronological_split,
    fit_scaler,
    join_prices_and_label,
    read_feature_store,
    write_feature_store,
)
from .ingest import CorpusStats, load_price_series, plan_shards, read_shard, write_price_series
from .models import get_spec, selected_models
from .modelio import load_model, load_scaler, save_model, save_scaler
from .nlp import clean_and_tokenize, detect_language, load_lexicon, score_sentiment


@dataclass
class ModelReportRow:
    name: str
    best_params: dict
    metrics: dict
    confusion: tuple | None = None
    roc_points: tuple | None = None
    auc: float | None = None


@dataclass
class EvalReport:
    task: str
    rows: list
    metadata: dict = field(default_factory=dict)

    def to_json(self) -> str:
        payload = {
            "task": self.task,
            "rows": [asdict(r) for r in self.rows],
            "metadata": self.metadata,
        }
        return json.dumps(payload, sort_keys=True, indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "EvalReport":
        payload = json.loads(text)
        rows = [
            ModelReportRow(
                r["name"],
                r["best_params"],
                r["metrics"],
                tuple(r["confusion"]) if r.get("confusion") else None,
                tuple(tuple(p) for p in r["roc_points"]) if r.get("roc_points") else None,
                r.get("auc"),
            )
            for r in payload["rows"]
        ]
        return cls(payload["task"], rows, payload.get("metadata", {}))


# --- per-shard featurization --------------------------------------------------


def _shard_task(args):
    (path, byte_range, columns, delimiter, ts_format, window_iso, tau,
     accept_threshold, stopword_weight, lexicon_path, use_nlp, collect_users) = args
    from .ingest import TweetSchema  # re-import friendly for process pools

    schema = TweetSchema(dict(columns), delimiter, ts_format)
    window = (date.fromisoformat(window_iso[0]), date.fromisoformat(window_iso[1]))
    lexicon = load_lexicon(lexicon_path or None) if use_nlp else None
    daily = DailyAggregator()
    users = UserAggregator() if collect_users else None
    kept_ids = set()
    lang_rejected = 0
    neutral_index = SENTIMENT_INDEX["neutral"]
    reader = read_shard(path, byte_range, schema, window)
    for tweet in reader:
        kept_ids.add(tweet.id)
        if users is not None:
            users.add(tweet)
        if use_nlp:
            verdict = detect_language(tweet.text, accept_threshold, stopword_weight)
            if verdict.lang != "en":
                lang_rejected += 1
                continue
            label = score_sentiment(clean_and_tokenize(tweet.text), lexicon, tau).label
            daily.add(tweet, SENTIMENT_INDEX[label])
        else:
            daily.add(tweet, neutral_index)
    return daily.days, users.users if users is not None else None, kept_ids, reader.stats, lang_rejected


def _shard_args(cfg: PipelineConfig, byte_range, use_nlp, collect_users):
    return (
        str(cfg.tweets_path), byte_range, dict(cfg.columns), cfg.delimiter, cfg.timestamp_format,
        (cfg.window_start.isoformat(), cfg.window_end.isoformat()), cfg.neutral_tau,
        cfg.language_accept_threshold, cfg.stopword_weight, cfg.lexicon_path, use_nlp, collect_users,
    )


def aggregate_corpus(cfg: PipelineConfig, use_nlp: bool = True, collect_users: bool = False):
    """Stream the corpus (sharded when workers > 1) into merged aggregates.

    Returns ``(daily, users, stats, lang_rejected)``. Cross-shard duplicate
    ids are repaired by re-reading just the affected shard ranges and
    subtracting the duplicate rows' contributions, so the merged result is
    byte-for-byte the single-shard result.
    """
    shards = plan_shards(cfg.tweets_path, cfg.workers, cfg.delimiter)
    args = [_shard_args(cfg, shard, use_nlp, collect_users) for shard in shards]
    if cfg.workers > 1 and len(shards) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(_shard_task, args))
    else:
        results = [_shard_task(a) for a in args]

    daily = DailyAggregator()
    users = UserAggregator() if collect_users else None
    stats = CorpusStats()
    lang_rejected = 0
    lexicon = load_lexicon(cfg.lexicon_path or None) if use_nlp else None
    seen: set = set()
    for shard, (days, shard_users, kept_ids, shard_stats, shard_rejected) in zip(shards, results):
        part = DailyAggregator()
        part.days = days
        daily.merge(part)
        if users is not None and shard_users is not None:
            upart = UserAggregator()
            upart.users = shard_users
            users.merge(upart)
        stats = stats.merge(shard_stats)
        lang_rejected += shard_rejected
        losers = kept_ids & seen
        seen |= kept_ids
        if not losers:
            continue
        schema = cfg.schema()
        for tweet in read_shard(cfg.tweets_path, shard, schema, cfg.window):
            if tweet.id not in losers:
                continue
            if users is not None:
                users.subtract(tweet)
            if use_nlp:
                verdict = detect_language(tweet.text, cfg.language_accept_threshold, cfg.stopword_weight)
                if verdict.lang != "en":
                    lang_rejected -= 1
                else:
                    label = score_sentiment(clean_and_tokenize(tweet.text), lexicon, cfg.neutral_tau).label
                    daily.subtract(tweet, SENTIMENT_INDEX[label])
            else:
                daily.subtract(tweet, SENTIMENT_INDEX["neutral"])
        stats.rows_duplicate += len(losers)
        stats.rows_kept -= len(losers)
    return daily, users, stats, lang_rejected


# --- stages --------------------------------------------------------------------


def _out(cfg: PipelineConfig) -> Path:
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def stage_ingest(cfg: PipelineConfig) -> dict:
    """Validate both inputs, write corpus stats and the filled price series."""
    out = _out(cfg)
    daily, _, stats, _ = aggregate_corpus(cfg, use_nlp=False)
    if not stats.identity_holds():
        raise DataError("corpus stats identity violated")
    bars = load_price_series(cfg.prices_path, cfg.fill_policy)
    write_price_series(bars, out / "prices_filled.csv")
    payload = {
        "config_hash": cfg.config_hash(),
        "corpus": stats.as_dict(),
        "days_with_tweets": len(daily.days),
        "price_range": [bars[0].date.isoformat(), bars[-1].date.isoformat()],
    }
    (out / "corpus_stats.json").write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n")
    return payload


def build_feature_store(cfg: PipelineConfig, use_nlp: bool = True):
    """Aggregate, join prices, label, and persist the day-level store."""
    out = _out(cfg)
    daily, _, stats, lang_rejected = aggregate_corpus(cfg, use_nlp=use_nlp)
    if not stats.identity_holds():
        raise DataError("corpus stats identity violated")
    bars = load_price_series(cfg.prices_path, cfg.fill_policy)
    labeled = join_prices_and_label(daily.rows(), bars)
    write_feature_store(labeled, out / "features.csv", cfg.config_hash())
    info = {
        "config_hash": cfg.config_hash(),
        "corpus": stats.as_dict(),
        "lang_rejected": lang_rejected,
        "n_days": len(labeled),
        "date_range": [labeled[0].date.isoformat(), labeled[-1].date.isoformat()] if labeled else [],
    }
    (out / "corpus_stats.json").write_text(json.dumps(info, sort_keys=True, indent=2) + "\n")
    return labeled, info


def load_or_build_features(cfg: PipelineConfig, rebuild: bool = False):
    store = _out(cfg) / "features.csv"
    if store.exists() and not rebuild:
        rows, stored_hash = read_feature_store(store)
        if stored_hash == cfg.config_hash():
            return rows, {"resumed": True, "config_hash": stored_hash}
    return build_feature_store(cfg)


def _matrices(cfg: PipelineConfig, rows, task):
    raw, _ = assemble_design_matrix(rows, task, scale=False)
    train_raw, test_raw = chronological_split(raw, cfg.test_fraction)
    scaler = fit_scaler(train_raw.X, FEATURE_COLUMNS)
    return apply_scaler(train_raw, scaler), apply_scaler(test_raw, scaler), scaler


def stage_train(cfg: PipelineConfig, rows) -> dict:
    """Grid-search, fit, and persist every selected model for the task."""
    out = _out(cfg)
    models_dir = out / "models"
    models_dir.mkdir(exist_ok=True)
    cv_dir = out / "cv"
    cv_dir.mkdir(exist_ok=True)
    train, test, scaler = _matrices(cfg, rows, cfg.task)
    save_scaler(scaler, models_dir / "scaler.txt", cfg.config_hash())
    metric = MSE if cfg.task == "regression" else ACCURACY
    chosen = {}
    for name in selected_models(cfg.task, cfg.model):
        spec = get_spec(cfg.task, name)
        grid = cfg.grids.get(name, spec.default_grid)
        result = cross_validated_grid_search(
            lambda params: spec.make(params, cfg.seed),
            grid,
            train.X,
            train.y,
            k=cfg.cv_folds,
            metric=metric,
            shuffle=cfg.cv_shuffle,
            seed=cfg.seed,
        )
        save_model(result.model.model, models_dir / f"{name}.model", FEATURE_COLUMNS, cfg.config_hash())
        with open(cv_dir / f"{name}_cv.csv", "w", encoding="utf-8", newline="") as fh:
            fh.write(f"# config_hash: {cfg.config_hash()}\n")
            fh.write("params,mean_score," + ",".join(f"fold_{i}" for i in range(cfg.cv_folds)) + "\n")
            for cell in result.cv_table:
                params = " ".join(f"{k}={v}" for k, v in sorted(cell.params.items()))
                scores = ",".join(repr(s) for s in cell.fold_scores)
                fh.write(f"{params or 'default'},{repr(cell.mean_score)},{scores}\n")
        chosen[name] = result.best_params
    info = {"best_params": chosen, "n_train": train.n, "n_test": test.n}
    (out / "train_info.json").write_text(json.dumps(info, sort_keys=True, indent=2) + "\n")
    return info


def stage_evaluate(cfg: PipelineConfig, rows) -> EvalReport:
    """Score persisted models on the chronological test split."""
    out = _out(cfg)
    models_dir = out / "models"
    expect_hash = cfg.config_hash()
    scaler = load_scaler(models_dir / "scaler.txt", FEATURE_COLUMNS, expect_hash)
    raw, _ = assemble_design_matrix(rows, cfg.task, scale=False)
    train_raw, test_raw = chronological_split(raw, cfg.test_fraction)
    test = apply_scaler(test_raw, scaler)
    report_rows = []
    for name in selected_models(cfg.task, cfg.model):
        spec = get_spec(cfg.task, name)
        model, _, _ = load_model(models_dir / f"{name}.model", FEATURE_COLUMNS, expect_hash)
        estimator = spec.make({}, cfg.seed)
        estimator.model = model
        pred = estimator.predict(test.X)
        if cfg.task == "regression":
            metrics = regression_metrics(test.y, pred)
            report_rows.append(ModelReportRow(name, _load_best_params(out, name), metrics))
        else:
            cm = classification_metrics(test.y.astype(int), pred)
            roc = roc_curve_auc(test.y.astype(int), estimator.decision_scores(test.X))
            report_rows.append(
                ModelReportRow(
                    name,
                    _load_best_params(out, name),
                    {
                        "accuracy": cm.accuracy,
                        "precision": cm.precision,
                        "recall": cm.recall,
                        "f1": cm.f1,
                    },
                    (cm.confusion.tp, cm.confusion.fp, cm.confusion.tn, cm.confusion.fn),
                    roc.points,
                    roc.auc,
                )
            )
    stats_path = out / "corpus_stats.json"
    corpus_meta = json.loads(stats_path.read_text()) if stats_path.exists() else {}
    report = EvalReport(
        cfg.task,
        report_rows,
        {
            "config_hash": expect_hash,
            "seed": cfg.seed,
            "n_test": test.n,
            "test_dates": [test.dates[0].isoformat(), test.dates[-1].isoformat()],
            "corpus": corpus_meta.get("corpus", {}),
        },
    )
    (out / "report.json").write_text(report.to_json())
    return report


def _load_best_params(out: Path, name: str) -> dict:
    train_info = out / "train_info.json"
    if train_info.exists():
        payload = json.loads(train_info.read_text())
        return payload.get("best_params", {}).get(name, {})
    return {}


# --- report emission ------------------------------------------------------------

REGRESSION_HEADERS = ("model", "mse")
CLASSIFICATION_HEADERS = ("model", "accuracy", "precision", "recall", "f1", "auc")


def emit_reports(report: EvalReport, out_dir, formats=("table-text", "delimited", "plot-data"),
                 render: bool = False) -> list:
    """Write the metric table, delimited metrics, and plot data files."""
    if not report.rows:
        raise DataError("empty report")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    is_cls = report.task == "classification"
    headers = CLASSIFICATION_HEADERS if is_cls else REGRESSION_HEADERS

    def cell(row: ModelReportRow, col: str) -> str:
        if col == "model":
            return row.name
        if col == "auc":
            return "" if row.auc is None else f"{row.auc:.4f}"
        value = row.metrics.get(col)
        return "" if value is None else f"{value:.4f}"

    if "table-text" in formats:
        table = [[cell(r, c) for c in headers] for r in report.rows]
        widths = [max(len(h), *(len(row[i]) for row in table)) for i, h in enumerate(headers)]
        lines = [
            "  ".join(h.ljust(widths[i]) for i, h in enumerate(headers)),
            "  ".join("-" * widths[i] for i in range(len(headers))),
        ]
        lines.extend("  ".join(row[i].ljust(widths[i]) for i in range(len(headers))) for row in table)
        lines.append("")
        lines.append(f"config_hash: {report.metadata.get('config_hash', '')}")
        path = out / "report.txt"
        path.write_text("\n".join(lines) + "\n")
        written.append(path)

    if "delimited" in formats:
        path = out / "metrics.csv"
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(f"# config_hash: {report.metadata.get('config_hash', '')}\n")
            fh.write(",".join(headers) + "\n")
            for r in report.rows:
                fh.write(",".join(cell(r, c) for c in headers) + "\n")
        written.append(path)

    if "plot-data" in formats:
        if is_cls:
            for r in report.rows:
                if not r.roc_points:
                    continue
                path = out / f"roc_{r.name}.csv"
                with open(path, "w", encoding="utf-8", newline="") as fh:
                    fh.write(f"# config_hash: {report.metadata.get('config_hash', '')}\n")
                    fh.write(f"# auc: {repr(r.auc)}\n")
                    fh.write("fpr,tpr\n")
                    for fpr, tpr in r.roc_points:
                        fh.write(f"{repr(float(fpr))},{repr(float(tpr))}\n")
                written.append(path)
        else:
            path = out / "mse_comparison.csv"
            with open(path, "w", encoding="utf-8", newline="") as fh:
                fh.write(f"# config_hash: {report.metadata.get('config_hash', '')}\n")
                fh.write("model,mse\n")
                for r in report.rows:
                    fh.write(f"{r.name},{repr(r.metrics['mse'])}\n")
            written.append(path)

    if render:
        if is_cls:
            series = [
                (r.name, list(r.roc_points)) for r in report.rows if r.roc_points
            ]
            if series:
                path = out / "roc.svg"
                _render_svg_curves(path, "ROC curves", series, "false positive rate", "true positive rate")
                written.append(path)
        else:
            series = [("mse", [(i, r.metrics["mse"]) for i, r in enumerate(report.rows)])]
            path = out / "mse.svg"
            _render_svg_curves(path, "Test MSE by model", series, "model index", "mse")
            written.append(path)
    return written


_SVG_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#7f7f7f")


def _render_svg_curves(path, title, series, xlabel, ylabel, size=(640, 480)) -> None:
    """Minimal deterministic polyline plot (no plotting dependency)."""
    width, height = size
    margin = 60
    xs = [x for _, pts in series for x, _ in pts]
    ys = [y for _, pts in series for _, y in pts]
    x_lo, x_hi = min(xs), max(xs)
    y_lo, y_hi = min(ys), max(ys)
    x_span = (x_hi - x_lo) or 1.0
    y_span = (y_hi - y_lo) or 1.0

    def px(x):
        return margin + (x - x_lo) / x_span * (width - 2 * margin)

    def py(y):
        return height - margin - (y - y_lo) / y_span * (height - 2 * margin)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width / 2:.1f}" y="24" text-anchor="middle" font-size="16">{title}</text>',
        f'<line x1="{margin}" y1="{height - margin}" x2="{width - margin}" y2="{height - margin}" stroke="black"/>',
        f'<line x1="{margin}" y1="{margin}" x2="{margin}" y2="{height - margin}" stroke="black"/>',
        f'<text x="{width / 2:.1f}" y="{height - 16}" text-anchor="middle" font-size="12">{xlabel}</text>',
        f'<text x="18" y="{height / 2:.1f}" text-anchor="middle" font-size="12" transform="rotate(-90 18 {height / 2:.1f})">{ylabel}</text>',
    ]
    for i, (label, pts) in enumerate(series):
        color = _SVG_COLORS[i % len(_SVG_COLORS)]
        coords = " ".join(f"{px(x):.2f},{py(y):.2f}" for x, y in pts)
        parts.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{coords}"/>')
        parts.append(
            f'<text x="{width - margin + 4}" y="{margin + 16 * i}" font-size="11" fill="{color}">{label}</text>'
        )
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts) + "\n")


# --- clustering stage -------------------------------------------------------------


def stage_cluster(cfg: PipelineConfig) -> dict:
    """User-level aggregation and the three clustering analyses."""
    out = _out(cfg)
    cdir = out / "cluster"
    cdir.mkdir(exist_ok=True)
    _, users, stats, _ = aggregate_corpus(cfg, use_nlp=False, collect_users=True)
    if users is None:
        raise DataError("user aggregation failed")
    user_rows = users.rows()
    if len(user_rows) < 3:
        raise DataError("need at least 3 users to cluster")
    hash_line = f"# config_hash: {cfg.config_hash()}\n"

    with open(cdir / "users.csv", "w", encoding="utf-8", newline="") as fh:
        fh.write(hash_line)
        fh.write("username," + ",".join(USER_FEATURE_COLUMNS) + "\n")
        for u in user_rows:
            fh.write(f"{u.username},{u.tweet_count},{u.likes_sum},{u.replies_sum},{u.retweets_sum}\n")

    X = np.array(
        [[u.tweet_count, u.likes_sum, u.replies_sum, u.retweets_sum] for u in user_rows], dtype=float
    )
    scaler = fit_scaler(X, USER_FEATURE_COLUMNS)
    Xs = scaler.transform(X)

    k_max = min(cfg.cluster_k_max, len(user_rows))
    elbow = cluster_mod.elbow_scan(Xs, range(1, k_max + 1), seed=cfg.seed)
    with open(cdir / "elbow.csv", "w", encoding="utf-8", newline="") as fh:
        fh.write(hash_line)
        fh.write("k,inertia,distortion\n")
        for k, inertia, distortion in zip(elbow.k_values, elbow.inertias, elbow.distortions):
            fh.write(f"{k},{repr(inertia)},{repr(distortion)}\n")
    chosen_k = max(elbow.knee, 1)
    km = cluster_mod.fit_kmeans(Xs, chosen_k, seed=cfg.seed)
    with open(cdir / "user_clusters.csv", "w", encoding="utf-8", newline="") as fh:
        fh.write(hash_line)
        fh.write("username,cluster\n")
        for u, label in zip(user_rows, km.labels):
            fh.write(f"{u.username},{int(label)}\n")

    rng = np.random.default_rng(cfg.seed)
    if len(user_rows) > cfg.cluster_sample_cap:
        sample_idx = np.sort(rng.choice(len(user_rows), cfg.cluster_sample_cap, replace=False))
    else:
        sample_idx = np.arange(len(user_rows))
    Xsub = Xs[sample_idx]

    merges = cluster_mod.fit_agglomerative(Xsub, sample_cap=cfg.cluster_sample_cap)
    with open(cdir / "dendrogram.csv", "w", encoding="utf-8", newline="") as fh:
        fh.write(hash_line)
        fh.write("cluster_a,cluster_b,distance,new_size\n")
        for m in merges:
            fh.write(f"{m.cluster_a},{m.cluster_b},{repr(m.distance)},{m.size}\n")

    curve, knee_idx, eps = cluster_mod.k_distance_curve(Xsub, cfg.cluster_min_pts)
    with open(cdir / "kdistance.csv", "w", encoding="utf-8", newline="") as fh:
        fh.write(hash_line)
        fh.write("rank,distance\n")
        for i, v in enumerate(curve):
            fh.write(f"{i},{repr(float(v))}\n")
    db = cluster_mod.fit_dbscan(Xsub, eps, cfg.cluster_min_pts, sample_cap=cfg.cluster_sample_cap)

    summary = {
        "config_hash": cfg.config_hash(),
        "n_users": len(user_rows),
        "corpus": stats.as_dict(),
        "kmeans": {
            "knee": elbow.knee,
            "confident": elbow.confident,
            "chosen_k": chosen_k,
            "inertia": km.inertia,
            "distortion": km.distortion,
        },
        "hierarchical": {"n_sampled": int(len(sample_idx)), "n_merges": len(merges)},
        "dbscan": {
            "eps": eps,
            "min_pts": cfg.cluster_min_pts,
            "n_clusters": db.n_clusters,
            "n_noise": int(np.sum(db.labels == cluster_mod.NOISE)),
        },
    }
    (cdir / "summary.json").write_text(json.dumps(summary, sort_keys=True, indent=2) + "\n")
    return summary


# --- full pipeline ------------------------------------------------------------------


def run_pipeline(cfg: PipelineConfig, rebuild: bool = False, render: bool = False):
    """Run every stage for the configured task; returns the report or summary."""
    cfg.validate()
    out = _out(cfg)
    if cfg.task == "cluster":
        return stage_cluster(cfg)
    rows, _ = load_or_build_features(cfg, rebuild=rebuild)
    stage_train(cfg, rows)
    report = stage_evaluate(cfg, rows)
    emit_reports(report, out, render=render)
    return report
