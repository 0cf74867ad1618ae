"""``scclust`` command line.

Exit codes: 0 success, 2 configuration error, 3 input error, 4 resource
cap exceeded.  Settings resolve as flags > ``--config`` JSON file >
defaults, and the resolved values (minus worker count and output path)
are hashed into the config digest stamped on every artifact.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import io as sio
from .baselines import (
    DpMeansParams,
    dp_means_cost,
    run_affinity,
    run_dp_means_pp,
    run_serial_dp_means,
)
from .core import LinkageSpec, Metric, ThresholdSchedule
from .evaluation import (
    dendrogram_purity,
    metrics_report,
    pairwise_f1,
    round_sse,
    select_round_by_dp_cost,
    select_round_by_k,
)
from .hac import merges_to_csv, run_hac, step_partitions
from .neighbors import WORKERS_ENV, NeighborGraph, build_knn_graph, default_workers
from .scc import SCC, RoundLimitExceeded

EXIT_OK, EXIT_CONFIG, EXIT_INPUT, EXIT_RESOURCE = 0, 2, 3, 4

LAMBDA_GRID = (0.001, 0.005, 0.01, 0.05, 0.1, 0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 1.75, 2.0)
ALGORITHMS = ("scc", "affinity", "hac", "serialdp", "dpmeanspp")

# keys left out of the digest: they must not change any output
_UNHASHED = ("workers", "out", "config")

COMMON = {"metric": "sqeuclidean", "workers": None, "out": None}
SCC_KEYS = {"linkage": "average", "schedule": "geometric", "tau0": None, "tau_max": None,
            "rounds": 200, "mode": "fixpoint", "k": 25, "dense": False, "graph": None,
            "missing_value": None, "max_rounds": None}
DEFAULTS = {
    "knn": {**COMMON, "k": 25},
    "cluster": {**COMMON, **SCC_KEYS, "algorithm": "scc", "lambda": None, "seed": 0,
                "max_iter": 100, "n_clusters": None, "assign_rounds": "last",
                "memory_cap_mb": 4096},
    "sweep": {**COMMON, **SCC_KEYS, "algorithms": "scc,serialdp,dpmeanspp",
              "lambda": ",".join(repr(v) for v in LAMBDA_GRID), "seed": "0,1,2,3,4",
              "max_iter": 100},
    "eval": {"tree": None, "assignment": None, "labels": None, "metrics": None,
             "purity_mode": "exact", "sample_size": 4_000_000, "seed": 0, "out": None},
    "generate": {"kind": None, "k": 10, "n": 1000, "n_per_cluster": 50, "dim": 10,
                 "delta": 30.0, "radius": 1.0, "spread": 5.0, "cluster_std": 1.0,
                 "center_scale": 5.0, "normalize": False, "seed": 0, "metric": "sqeuclidean",
                 "format": "csv", "out": None},
    "bench": {**COMMON, **SCC_KEYS, "sizes": "1000,2000,4000", "algorithms": "scc,hac",
              "dim": 16, "clusters": 20, "seed": 0, "normalize": True,
              "memory_cap_mb": 4096},
}


class ConfigError(ValueError):
    pass


class ResourceCapExceeded(RuntimeError):
    pass


# --------------------------------------------------------------------------
# config resolution


def _floats(text) -> list[float]:
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    try:
        return [float(v) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"expected a comma-separated list of numbers, got {text!r}") from None


def _ints(text) -> list[int]:
    if isinstance(text, (list, tuple)):
        return [int(v) for v in text]
    try:
        return [int(v) for v in str(text).split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"expected a comma-separated list of integers, got {text!r}") from None


def resolve_config(command: str, args: argparse.Namespace) -> dict:
    cfg = dict(DEFAULTS[command])
    if getattr(args, "config", None):
        try:
            loaded = json.loads(Path(args.config).read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read config file: {exc.strerror}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file is not valid JSON: {exc.msg}") from None
        if not isinstance(loaded, dict):
            raise ConfigError("config file must hold a JSON object")
        unknown = sorted(set(loaded) - set(cfg))
        if unknown:
            raise ConfigError(f"unknown config keys for {command}: {', '.join(unknown)}")
        cfg.update(loaded)
    for key in cfg:
        value = getattr(args, key, None)
        if value is not None:
            cfg[key] = value
    return cfg


def digest_of(cfg: dict) -> str:
    return sio.config_digest({k: v for k, v in cfg.items() if k not in _UNHASHED})


def _workers(cfg) -> int:
    if cfg.get("workers") is not None:
        if int(cfg["workers"]) < 1:
            raise ConfigError("--workers must be >= 1")
        return int(cfg["workers"])
    try:
        return default_workers()
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _metric(cfg):
    if cfg["metric"] == "precomputed":
        return "precomputed"
    try:
        return Metric.coerce(cfg["metric"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _out_dir(cfg) -> Path:
    if not cfg.get("out"):
        raise ConfigError("--out is required")
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load(cfg, path) -> tuple[sio.Dataset, str]:
    d = sio.read_dataset(path)
    cfg["input_sha256"] = sio.file_digest(path)
    return d, Path(path).name


def _write_config(cfg, digest, out):
    # worker count and output path are left out so reruns compare byte-for-byte
    resolved = {k: v for k, v in cfg.items() if k not in _UNHASHED}
    sio.write_json({**resolved, "config_digest": digest}, out / "config.json")


def _echo(msg: str):
    print(msg, flush=True)


# --------------------------------------------------------------------------
# SCC setup shared by cluster / sweep / bench


def default_schedule(metric, cfg) -> ThresholdSchedule | str:
    """CLI default ramps for the common metrics.

    Squared euclidean: 0.001 to 4 geometric.  Euclidean: 0.001 to 2 (the
    square root of the same range).  Cosine: similarities 1.0 down to 0.001
    converted to dissimilarity 1 - s.  Explicit ``--tau0``/``--tau-max``
    or a non-default ``--schedule`` override these.
    """
    L = int(cfg["rounds"])
    kind, tau0, tau_max = cfg["schedule"], cfg["tau0"], cfg["tau_max"]
    if kind not in ("geometric", "linear", "doubling"):
        raise ConfigError(f"unknown schedule {kind!r}")
    if L < 1:
        raise ConfigError("--rounds must be >= 1")
    if metric == "precomputed":
        return kind
    if metric is Metric.COSINE and kind == "geometric" and tau0 is None and tau_max is None:
        return ThresholdSchedule.from_similarities(0.001, 1.0, L)
    default_max = {Metric.SQEUCLIDEAN: 4.0, Metric.EUCLIDEAN: 2.0, Metric.COSINE: 1.0}[metric]
    tau0 = 0.001 if tau0 is None else float(tau0)
    try:
        if kind == "doubling":
            return ThresholdSchedule.geometric(tau0, L)
        tau_max = default_max if tau_max is None else float(tau_max)
        if kind == "geometric":
            return ThresholdSchedule.geometric(tau0, L, tau_max=tau_max)
        return ThresholdSchedule.linear(tau0, tau_max, L)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _graph(cfg, X, metric, workers):
    n = X.shape[0]
    if n < 2 or cfg["dense"] or metric == "precomputed":
        return None
    if cfg.get("graph"):
        g = NeighborGraph.from_jsonl(cfg["graph"], metric=metric)
        if g.n != n:
            raise sio.InputError(f"graph has {g.n} points, dataset has {n}")
        cfg["graph_sha256"] = sio.file_digest(cfg["graph"])
        return g
    k = int(cfg["k"])
    if k < 1:
        raise ConfigError("--k must be >= 1")
    cfg["k_resolved"] = min(k, n - 1)
    return build_knn_graph(X, cfg["k_resolved"], metric, n_jobs=workers)


def _scc_estimator(cfg, metric, graph):
    if cfg["mode"] not in ("fixpoint", "one-round", "fixpoint-per-threshold",
                           "one-round-per-threshold"):
        raise ConfigError(f"unknown mode {cfg['mode']!r}")
    if cfg["linkage"] not in ("average", "single", "complete"):
        raise ConfigError(f"unknown linkage {cfg['linkage']!r}")
    sched = default_schedule(metric, cfg)
    return SCC(metric="precomputed" if metric == "precomputed" else metric.value,
               linkage=cfg["linkage"], n_neighbors=None,
               missing_edge_value=cfg["missing_value"], schedule=sched,
               tau0=cfg["tau0"] if isinstance(sched, str) else None,
               tau_max=cfg["tau_max"] if isinstance(sched, str) else None,
               n_thresholds=int(cfg["rounds"]), mode=cfg["mode"],
               max_rounds=cfg["max_rounds"])


def _fit_scc(cfg, X, metric, workers):
    t0 = time.perf_counter()
    graph = _graph(cfg, X, metric, workers)
    t1 = time.perf_counter()
    est = _scc_estimator(cfg, metric, graph)
    est.fit(X, graph=graph)
    t2 = time.perf_counter()
    return est, (t1 - t0) * 1e3, (t2 - t1) * 1e3


def _check_points(X, metric):
    if metric == "precomputed":
        if X.shape[0] != X.shape[1]:
            raise sio.InputError("precomputed input must be a square dissimilarity table")
    elif metric is Metric.COSINE and np.any(np.linalg.norm(X, axis=1) == 0):
        raise sio.InputError("cosine dissimilarity is undefined for zero vectors")


def _hac_cap(cfg, n):
    need = n * n * 8 / 2**20
    if need > float(cfg["memory_cap_mb"]):
        raise ResourceCapExceeded(
            f"HAC needs a {need:.0f} MB dissimilarity matrix, above the {cfg['memory_cap_mb']} MB cap")


# --------------------------------------------------------------------------
# commands


def cmd_knn(args) -> int:
    cfg = resolve_config("knn", args)
    d, name = _load(cfg, args.input)
    metric = _metric(cfg)
    if metric == "precomputed":
        raise ConfigError("knn needs point vectors, not a precomputed table")
    _check_points(d.points, metric)
    k = int(cfg["k"])
    if not 1 <= k <= d.n - 1:
        raise ConfigError(f"--k must be in [1, {d.n - 1}] for {d.n} points, got {k}")
    if not cfg.get("out"):
        raise ConfigError("--out is required")
    workers = _workers(cfg)
    t0 = time.perf_counter()
    g = build_knn_graph(d.points, k, metric, n_jobs=workers)
    wall = (time.perf_counter() - t0) * 1e3
    digest = digest_of(cfg)
    out = Path(cfg["out"])
    out.parent.mkdir(parents=True, exist_ok=True)
    g.to_jsonl(out, header={"config_digest": digest, "dataset": name})
    _echo(f"N={d.n} D={d.dim} k={k} wall_ms={wall:.1f}")
    return EXIT_OK


def _write_tree_run(out, cfg, digest, name, algorithm, partitions, dendrogram, d, wall_ms,
                    lam=None, selected=None):
    meta = {"config_digest": digest, "algorithm": algorithm, "dataset": name}
    sio.rounds_to_jsonl(partitions, out / "rounds.jsonl", meta)
    if dendrogram is not None:
        sio.dendrogram_to_jsonl(dendrogram, out / "dendrogram.jsonl", meta)
    chosen = selected if selected is not None else partitions[-1]
    sio.assignment_to_csv(chosen, out / "assignment.csv", digest)
    if cfg.get("assign_rounds") == "all":
        sub = out / "assignments"
        sub.mkdir(exist_ok=True)
        for i, p in enumerate(partitions):
            sio.assignment_to_csv(p, sub / f"round_{i:04d}.csv", digest)
    X = d.points if cfg["metric"] != "precomputed" else None
    report = metrics_report(name, algorithm, digest, partitions, X, d.labels, lam,
                            dendrogram, round(wall_ms, 3))
    sio.write_json(report, out / "metrics.json")
    return chosen


def cmd_cluster(args) -> int:
    cfg = resolve_config("cluster", args)
    algorithm = cfg["algorithm"]
    if algorithm not in ALGORITHMS:
        raise ConfigError(f"unknown algorithm {algorithm!r}")
    lam = cfg["lambda"]
    if algorithm in ("serialdp", "dpmeanspp"):
        if lam is None:
            raise ConfigError(f"{algorithm} requires --lambda")
        lam = float(lam)
        if not lam > 0:
            raise ConfigError("--lambda must be positive")
    elif lam is not None:
        raise ConfigError(f"--lambda does not apply to {algorithm}; use the sweep command")
    d, name = _load(cfg, args.input)
    metric = _metric(cfg)
    X = d.points
    _check_points(X, metric)
    if metric == "precomputed" and algorithm in ("serialdp", "dpmeanspp"):
        raise ConfigError(f"{algorithm} needs point vectors")
    workers = _workers(cfg)
    out = _out_dir(cfg)
    n = d.n
    t0 = time.perf_counter()
    if algorithm == "scc":
        est, _, _ = _fit_scc(cfg, X, metric, workers)
        digest = digest_of(cfg)
        selected = None
        if cfg["n_clusters"] is not None:
            selected = select_round_by_k(est.partitions_, int(cfg["n_clusters"]))
        wall = (time.perf_counter() - t0) * 1e3
        chosen = _write_tree_run(out, cfg, digest, name, algorithm, est.partitions_,
                                 est.dendrogram_, d, wall, selected=selected)
    elif algorithm == "affinity":
        graph = _graph(cfg, X, metric, workers)
        spec = LinkageSpec(cfg["linkage"], "sparse-graph" if graph is not None else "dense",
                           cfg["missing_value"])
        cap = int(cfg["max_rounds"]) if cfg["max_rounds"] is not None else 100
        traces, tree = run_affinity(X, graph, spec, cap, metric)
        from .scc import rounds_to_partitions

        parts = rounds_to_partitions(traces, n)
        digest = digest_of(cfg)
        wall = (time.perf_counter() - t0) * 1e3
        chosen = _write_tree_run(out, cfg, digest, name, algorithm, parts, tree, d, wall)
    elif algorithm == "hac":
        _hac_cap(cfg, n)
        steps, tree = run_hac(X, cfg["linkage"], metric, algorithm="nn-chain")
        digest = digest_of(cfg)
        k = 1 if cfg["n_clusters"] is None else int(cfg["n_clusters"])
        parts = step_partitions(steps, n)
        wall = (time.perf_counter() - t0) * 1e3
        text = f"# config_digest={digest}\n" + merges_to_csv(steps)
        (out / "merges.csv").write_text(text)
        chosen = _write_tree_run(out, cfg, digest, name, algorithm, parts, tree, d, wall,
                                 selected=parts[max(0, n - max(k, 1))])
    else:
        if metric not in (Metric.SQEUCLIDEAN,):
            raise ConfigError(f"{algorithm} optimizes squared euclidean cost; use --metric sqeuclidean")
        params = DpMeansParams(lam, int(cfg["max_iter"]), int(cfg["seed"]))
        runner = run_serial_dp_means if algorithm == "serialdp" else run_dp_means_pp
        part, _ = runner(X, params)
        digest = digest_of(cfg)
        wall = (time.perf_counter() - t0) * 1e3
        chosen = _write_tree_run(out, cfg, digest, name, algorithm, [part], None, d, wall, lam=lam)
    _write_config(cfg, digest, out)
    _echo(f"algorithm={algorithm} N={n} K={chosen.num_clusters} wall_ms={wall:.1f}")
    return EXIT_OK


def _summary_rows(rows):
    cells = {}
    for r in rows:
        cells.setdefault((r["algorithm"], r["lambda"]), []).append(r)
    out = []
    for (alg, lam), rs in cells.items():
        rec = {"algorithm": alg, "lambda": lam, "runs": len(rs)}
        for key in ("K", "dp_means_cost", "f1", "runtime_ms"):
            vals = [float(r[key]) for r in rs if r[key] != ""]
            for stat, fn in (("min", min), ("max", max), ("avg", lambda v: sum(v) / len(v))):
                rec[f"{key}_{stat}"] = repr(float(fn(vals))) if vals else ""
        out.append(rec)
    return out


def _csv_text(rows, fields, digest) -> str:
    buf = io.StringIO()
    buf.write(f"# config_digest={digest}\n")
    w = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow(r)
    return buf.getvalue()


def cmd_sweep(args) -> int:
    cfg = resolve_config("sweep", args)
    algorithms = [a.strip() for a in str(cfg["algorithms"]).split(",") if a.strip()]
    lambdas = _floats(cfg["lambda"])
    seeds = _ints(cfg["seed"])
    if not algorithms or not lambdas or not seeds:
        raise ConfigError("sweep needs at least one algorithm, lambda and seed")
    bad = [a for a in algorithms if a not in ("scc", "serialdp", "dpmeanspp")]
    if bad:
        raise ConfigError(f"sweep supports scc, serialdp, dpmeanspp; got {', '.join(bad)}")
    if any(not lam > 0 for lam in lambdas):
        raise ConfigError("lambda values must be positive")
    d, name = _load(cfg, args.input)
    metric = _metric(cfg)
    if metric is not Metric.SQEUCLIDEAN:
        raise ConfigError("the DP-Means sweep needs --metric sqeuclidean")
    X = d.points
    workers = _workers(cfg)
    out = _out_dir(cfg)
    rows = []

    def f1_of(p):
        return repr(pairwise_f1(p, d.labels)[2]) if d.labels is not None else ""

    for alg in algorithms:
        if alg == "scc":
            t0 = time.perf_counter()
            est, _, _ = _fit_scc(cfg, X, metric, workers)
            sse = round_sse(est.partitions_, X)
            fit_ms = (time.perf_counter() - t0) * 1e3
            for lam in lambdas:
                t1 = time.perf_counter()
                p, cost = select_round_by_dp_cost(est.partitions_, X, lam, sse)
                ms = fit_ms + (time.perf_counter() - t1) * 1e3
                for seed in seeds:
                    rows.append({"algorithm": alg, "lambda": repr(lam), "seed": seed,
                                 "K": p.num_clusters, "dp_means_cost": repr(cost),
                                 "f1": f1_of(p), "runtime_ms": f"{ms:.3f}"})
            continue
        runner = run_serial_dp_means if alg == "serialdp" else run_dp_means_pp
        for lam in lambdas:
            for seed in seeds:
                t1 = time.perf_counter()
                p, _ = runner(X, DpMeansParams(lam, int(cfg["max_iter"]), seed))
                ms = (time.perf_counter() - t1) * 1e3
                rows.append({"algorithm": alg, "lambda": repr(lam), "seed": seed,
                             "K": p.num_clusters, "dp_means_cost": repr(dp_means_cost(X, p, lam)),
                             "f1": f1_of(p), "runtime_ms": f"{ms:.3f}"})
    digest = digest_of(cfg)
    fields = ["algorithm", "lambda", "seed", "K", "dp_means_cost", "f1", "runtime_ms"]
    (out / "sweep.csv").write_text(_csv_text(rows, fields, digest))
    summary = _summary_rows(rows)
    sfields = ["algorithm", "lambda", "runs"] + [f"{k}_{s}" for k in
                                                 ("K", "dp_means_cost", "f1", "runtime_ms")
                                                 for s in ("min", "max", "avg")]
    (out / "sweep_summary.csv").write_text(_csv_text(summary, sfields, digest))
    _write_config(cfg, digest, out)
    _echo(f"rows={len(rows)} algorithms={','.join(algorithms)} lambdas={len(lambdas)} "
          f"seeds={len(seeds)}")
    return EXIT_OK


def _labels_from(path) -> np.ndarray:
    p = Path(path)
    try:
        head = p.read_bytes()[:4096]
    except OSError as exc:
        raise sio.InputError(f"cannot read {path}: {exc.strerror}") from None
    text_head = head.decode("utf8", "replace")
    if head[:4] != sio.MAGIC and ("id,cluster" in text_head or "id,label" in text_head):
        ids, vals = sio.read_assignment_csv(path)
        return _aligned(ids, vals, path)
    d = sio.read_dataset(path)
    if d.labels is None:
        raise sio.InputError(f"{path} has no label column")
    return d.labels


def _aligned(ids, vals, path) -> np.ndarray:
    if sorted(ids.tolist()) != list(range(len(ids))):
        raise sio.InputError(f"{path}: ids must be 0..N-1 without gaps or repeats")
    out = np.empty(len(ids), dtype=np.int64)
    out[ids] = vals
    return out


def cmd_eval(args) -> int:
    cfg = resolve_config("eval", args)
    if not cfg["labels"]:
        raise ConfigError("--labels is required")
    if not cfg["tree"] and not cfg["assignment"]:
        raise ConfigError("give --tree and/or --assignment")
    wanted = cfg["metrics"]
    if wanted is None:
        wanted = [m for m, src in (("purity", cfg["tree"]), ("f1", cfg["assignment"])) if src]
    elif isinstance(wanted, str):
        wanted = [m.strip() for m in wanted.split(",") if m.strip()]
    bad = [m for m in wanted if m not in ("purity", "f1")]
    if bad:
        raise ConfigError(f"unknown metrics: {', '.join(bad)}")
    if "purity" in wanted and not cfg["tree"]:
        raise ConfigError("purity needs --tree")
    if "f1" in wanted and not cfg["assignment"]:
        raise ConfigError("f1 needs --assignment")
    if cfg["purity_mode"] not in ("exact", "sampled"):
        raise ConfigError("--purity-mode must be exact or sampled")
    labels = _labels_from(cfg["labels"])
    cfg["labels_sha256"] = sio.file_digest(cfg["labels"])
    report = {}
    t0 = time.perf_counter()
    if "purity" in wanted:
        tree = sio.read_dendrogram_jsonl(cfg["tree"])
        if tree.n_leaves != len(labels):
            raise sio.InputError(f"tree has {tree.n_leaves} leaves but {len(labels)} labels")
        try:
            est = dendrogram_purity(tree, labels, cfg["purity_mode"], int(cfg["seed"]),
                                    int(cfg["sample_size"]))
        except ValueError as exc:
            raise sio.InputError(str(exc)) from None
        report["dendrogram_purity"] = est.value
        report["purity_mode"] = est.mode
        report["purity_pairs"] = est.num_pairs_evaluated
    if "f1" in wanted:
        ids, vals = sio.read_assignment_csv(cfg["assignment"])
        pred = _aligned(ids, vals, cfg["assignment"])
        if len(pred) != len(labels):
            raise sio.InputError(f"assignment has {len(pred)} ids but {len(labels)} labels")
        p, r, f = pairwise_f1(pred, labels)
        report.update(precision=p, recall=r, f1=f, K=int(len(np.unique(pred))))
    digest = digest_of(cfg)
    report.update(config_digest=digest, wall_ms=round((time.perf_counter() - t0) * 1e3, 3))
    text = sio.write_json(report)
    if cfg["out"]:
        Path(cfg["out"]).parent.mkdir(parents=True, exist_ok=True)
        Path(cfg["out"]).write_text(text)
    _echo(" ".join(f"{k}={report[k]}" for k in ("dendrogram_purity", "f1") if k in report))
    return EXIT_OK


def cmd_generate(args) -> int:
    from .synthesis import (
        InfeasibleSpec,
        SeparationSpec,
        check_model_separation,
        generate_mixture,
        generate_model_separated,
        generate_separated,
    )

    cfg = resolve_config("generate", args)
    kind = cfg["kind"]
    out = _out_dir(cfg)
    fmt = cfg["format"]
    if fmt not in ("csv", "bin"):
        raise ConfigError("--format must be csv or bin")
    seed = int(cfg["seed"])
    try:
        if kind == "separated":
            spec = SeparationSpec(int(cfg["k"]), int(cfg["n_per_cluster"]), int(cfg["dim"]),
                                  float(cfg["delta"]), seed, cfg["metric"], float(cfg["radius"]))
            d, R, gap = generate_separated(spec)
            side = {"kind": kind, "delta": spec.delta, "realized_R": R,
                    "min_gap": None if not np.isfinite(gap) else gap,
                    "ratio": None if not np.isfinite(gap) or R == 0 else gap / R,
                    "seed": seed, "metric": spec.metric.value}
        elif kind == "mixture":
            d = generate_mixture(int(cfg["k"]), int(cfg["n"]), int(cfg["dim"]),
                                 float(cfg["spread"]), seed, float(cfg["cluster_std"]),
                                 float(cfg["center_scale"]), bool(cfg["normalize"]))
            side = {"kind": kind, "spread": float(cfg["spread"]),
                    "cluster_std": float(cfg["cluster_std"]),
                    "center_scale": float(cfg["center_scale"]),
                    "normalize": bool(cfg["normalize"]), "seed": seed,
                    "num_clusters": int(len(np.unique(d.labels)))}
        elif kind == "model-separated":
            inst = generate_model_separated(int(cfg["k"]), int(cfg["n"]), seed)
            d = sio.Dataset(inst.table, inst.target.assignment)
            side = {"kind": kind, "seed": seed, "metric": "precomputed",
                    "edges": inst.edges.tolist(),
                    "separation_checked": inst.n <= 12,
                    "separation_holds": check_model_separation(inst) if inst.n <= 12 else None}
        else:
            raise ConfigError("kind must be separated, mixture or model-separated")
    except InfeasibleSpec as exc:
        raise ConfigError(str(exc)) from None
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from None
    digest = digest_of(cfg)
    path = out / f"data.{fmt}"
    sio.write_dataset(d, path, fmt)
    side["config_digest"] = digest
    side["dataset_sha256"] = sio.file_digest(path)
    sio.write_json(side, out / "data.json")
    _echo(f"kind={kind} N={d.n} D={d.dim} out={path}")
    return EXIT_OK


def cmd_bench(args) -> int:
    from .synthesis import generate_mixture

    cfg = resolve_config("bench", args)
    sizes = _ints(cfg["sizes"])
    algorithms = [a.strip() for a in str(cfg["algorithms"]).split(",") if a.strip()]
    if not sizes or any(s < 2 for s in sizes):
        raise ConfigError("--sizes needs integers >= 2")
    bad = [a for a in algorithms if a not in ("scc", "hac")]
    if bad:
        raise ConfigError(f"bench supports scc and hac; got {', '.join(bad)}")
    metric = _metric(cfg)
    if metric == "precomputed":
        raise ConfigError("bench generates vectors; precomputed is not supported")
    workers = _workers(cfg)
    out = _out_dir(cfg)
    rows = []
    for n in sizes:
        d = generate_mixture(int(cfg["clusters"]), n, int(cfg["dim"]), seed=int(cfg["seed"]),
                             normalize=bool(cfg["normalize"]))
        if "scc" in algorithms:
            est, knn_ms, fit_ms = _fit_scc(cfg, d.points, metric, workers)
            pur = dendrogram_purity(est.dendrogram_, d.labels).value
            rows.append({"N": n, "algorithm": "scc", "wall_ms": f"{fit_ms:.3f}",
                         "knn_ms": f"{knn_ms:.3f}", "purity": repr(pur)})
            _echo(f"N={n} scc wall_ms={fit_ms:.1f} knn_ms={knn_ms:.1f} purity={pur:.4f}")
        if "hac" in algorithms:
            _hac_cap(cfg, n)
            t0 = time.perf_counter()
            _, tree = run_hac(d.points, cfg["linkage"], metric, algorithm="nn-chain")
            ms = (time.perf_counter() - t0) * 1e3
            pur = dendrogram_purity(tree, d.labels).value
            rows.append({"N": n, "algorithm": "hac", "wall_ms": f"{ms:.3f}", "knn_ms": "",
                         "purity": repr(pur)})
            _echo(f"N={n} hac wall_ms={ms:.1f} purity={pur:.4f}")
    digest = digest_of(cfg)
    (out / "bench.csv").write_text(
        _csv_text(rows, ["N", "algorithm", "wall_ms", "knn_ms", "purity"], digest))
    _write_config(cfg, digest, out)
    return EXIT_OK


# --------------------------------------------------------------------------
# parser


def _scc_flags(p):
    p.add_argument("--linkage", choices=["average", "single", "complete"])
    p.add_argument("--schedule", choices=["geometric", "linear", "doubling"])
    p.add_argument("--tau0", type=float, help="first threshold")
    p.add_argument("--tau-max", dest="tau_max", type=float, help="last threshold")
    p.add_argument("--rounds", type=int, help="number of thresholds (default 200)")
    p.add_argument("--mode", choices=["fixpoint", "one-round"])
    p.add_argument("--k", type=int, help="kNN graph size (default 25)")
    p.add_argument("--dense", action="store_const", const=True,
                   help="evaluate linkage over all pairs instead of a kNN graph")
    p.add_argument("--graph", help="cached kNN graph (JSON lines) to reuse")
    p.add_argument("--missing-value", dest="missing_value", type=float,
                   help="dissimilarity charged for pairs missing from the graph")
    p.add_argument("--max-rounds", dest="max_rounds", type=int,
                   help="cap on evaluated rounds (exit 4 when hit)")


def _common(p, metric=True):
    if metric:
        p.add_argument("--metric", choices=["sqeuclidean", "euclidean", "cosine", "precomputed"])
        p.add_argument("--workers", type=int,
                       help=f"worker threads (default ${WORKERS_ENV} or 1)")
    p.add_argument("--out")
    p.add_argument("--config", help="JSON file of settings; flags take precedence")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="scclust", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("knn", help="build an exact kNN graph")
    p.add_argument("input")
    p.add_argument("--k", type=int)
    _common(p)

    p = sub.add_parser("cluster", help="run one clustering algorithm")
    p.add_argument("input")
    p.add_argument("--algorithm", choices=list(ALGORITHMS))
    _scc_flags(p)
    p.add_argument("--lambda", dest="lambda", type=float, help="DP-Means penalty")
    p.add_argument("--seed", type=int)
    p.add_argument("--max-iter", dest="max_iter", type=int)
    p.add_argument("--n-clusters", dest="n_clusters", type=int,
                   help="write the round (or HAC cut) closest to this many clusters")
    p.add_argument("--assign-rounds", dest="assign_rounds", choices=["last", "all"])
    p.add_argument("--memory-cap-mb", dest="memory_cap_mb", type=float)
    _common(p)

    p = sub.add_parser("sweep", help="DP-Means cost sweep over lambda and seeds")
    p.add_argument("input")
    p.add_argument("--algorithms", help="comma list (default scc,serialdp,dpmeanspp)")
    _scc_flags(p)
    p.add_argument("--lambda", dest="lambda", help="comma list of lambda values")
    p.add_argument("--seed", help="comma list of seeds (default 0,1,2,3,4)")
    p.add_argument("--max-iter", dest="max_iter", type=int)
    _common(p)

    p = sub.add_parser("eval", help="score a tree or flat assignment against labels")
    p.add_argument("--tree")
    p.add_argument("--assignment")
    p.add_argument("--labels")
    p.add_argument("--metrics", help="comma list of purity,f1")
    p.add_argument("--purity-mode", dest="purity_mode", choices=["exact", "sampled"])
    p.add_argument("--sample-size", dest="sample_size", type=int)
    p.add_argument("--seed", type=int)
    _common(p, metric=False)

    p = sub.add_parser("generate", help="write a synthetic dataset and sidecar")
    p.add_argument("kind", choices=["separated", "mixture", "model-separated"])
    p.add_argument("--k", type=int)
    p.add_argument("--n", type=int)
    p.add_argument("--n-per-cluster", dest="n_per_cluster", type=int)
    p.add_argument("--dim", type=int)
    p.add_argument("--delta", type=float)
    p.add_argument("--radius", type=float)
    p.add_argument("--spread", type=float)
    p.add_argument("--cluster-std", dest="cluster_std", type=float)
    p.add_argument("--center-scale", dest="center_scale", type=float)
    p.add_argument("--normalize", action="store_const", const=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--metric", choices=["sqeuclidean", "euclidean"])
    p.add_argument("--format", choices=["csv", "bin"])
    _common(p, metric=False)

    p = sub.add_parser("bench", help="time SCC against HAC on growing mixtures")
    p.add_argument("--sizes", help="comma list of N")
    p.add_argument("--algorithms", help="comma list of scc,hac")
    _scc_flags(p)
    p.add_argument("--dim", type=int)
    p.add_argument("--clusters", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--memory-cap-mb", dest="memory_cap_mb", type=float)
    _common(p)
    return parser


COMMANDS = {"knn": cmd_knn, "cluster": cmd_cluster, "sweep": cmd_sweep, "eval": cmd_eval,
            "generate": cmd_generate, "bench": cmd_bench}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"scclust: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except sio.InputError as exc:
        print(f"scclust: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (RoundLimitExceeded, ResourceCapExceeded, MemoryError) as exc:
        print(f"scclust: resource cap exceeded: {exc or 'out of memory'}", file=sys.stderr)
        return EXIT_RESOURCE
    except (ValueError, TypeError) as exc:
        print(f"scclust: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
