"""Command-line pipeline orchestration.

Subcommands: prepare, run, sweep-seen, diagnose, expand, embed.
Exit codes: 0 success, 2 config error, 3 data error, 4 numeric error,
1 anything unexpected.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
from pathlib import Path

from . import kernels, matio
from .config import RunConfig, build_config, config_hash, file_digest, parse_config_file
from .errors import ConfigError, DataError, NumericError
from .evaluation import (
    VARIANTS,
    EvalReport,
    diagnose_variant,
    evaluate_zero_shot,
    prepare_inputs,
    VariantPipeline,
)
from .expansion import write_expanded_labels
from .graph import Dataset, PropagationMatrix, load_dataset, make_zero_shot_split
from .linalg import ReducedFeatures

logger = logging.getLogger("zge")

_SINGLE_MODEL_VARIANTS = ("rect-l", "sl", "sul", "sul-star")


def _atomic_write_text(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


def _write_json(path: Path, payload: dict) -> None:
    _atomic_write_text(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _write_csv(path: Path, header: str, rows) -> None:
    lines = [header]
    for row in rows:
        lines.append(",".join(repr(v) if isinstance(v, float) else str(v) for v in row))
    _atomic_write_text(path, "\n".join(lines) + "\n")


def _load_config(args: argparse.Namespace) -> RunConfig:
    file_values = parse_config_file(args.config) if args.config else {}
    overrides = {}
    if getattr(args, "dataset", None):
        root = Path(args.dataset)
        overrides.update(
            edges=str(root / "edges.txt"),
            features=str(root / "features.txt"),
            labels=str(root / "labels.txt"),
            dataset_name=root.name,
        )
    flag_map = {
        "label_rate": "label_rates",
        "unseen": "n_unseen",
        "variants": "variants",
        "seeds": "seeds",
        "epochs": "epochs",
        "lr": "lr",
        "rank": "rank",
        "hidden": "hidden",
        "out": "out",
        "threads": "threads",
        "seen_counts": "seen_counts",
    }
    for flag, key in flag_map.items():
        value = getattr(args, flag, None)
        if value is not None:
            overrides[key] = value
    return build_config(file_values, overrides)


def _load_dataset(cfg: RunConfig) -> Dataset:
    for p in (cfg.edges, cfg.features, cfg.labels):
        if not Path(p).is_file():
            raise DataError(f"dataset file not found: {p}")
    return load_dataset(cfg.edges, cfg.features, cfg.labels)


def _cache_dir(cfg: RunConfig) -> Path:
    return Path(cfg.out) / "cache" / cfg.dataset_name


def _prepare_hash(cfg: RunConfig) -> str:
    """Cache key: only the inputs the cached matrices depend on, so runs that
    differ in variants/seeds/rates still reuse the SVD and propagation caches."""
    digests = {name: file_digest(getattr(cfg, name)) for name in ("edges", "features", "labels")}
    subset = {"stage": "prepare", "rank": cfg.rank, "svd_seed": cfg.svd_seed, "files": digests}
    blob = json.dumps(subset, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def cmd_prepare(cfg: RunConfig) -> tuple[PropagationMatrix, ReducedFeatures]:
    """Compute and cache the propagation matrix and reduced features.

    Idempotent: when the cache manifest hash matches the current config and
    input files, the cached matrices are loaded instead of recomputed.
    """
    cache = _cache_dir(cfg)
    cache.mkdir(parents=True, exist_ok=True)
    manifest_path = cache / "manifest.json"
    want = _prepare_hash(cfg)
    if manifest_path.is_file():
        stored = json.loads(manifest_path.read_text(encoding="utf-8"))
        if stored.get("prepare_hash") == want:
            logger.info("prepare: cache hit (%s)", cache)
            X = ReducedFeatures(matrix=matio.read_matrix(cache / "reduced.zgem"), rank=stored["rank"])
            prop = PropagationMatrix.from_csr(matio.read_csr(cache / "prop"))
            return prop, X
    ds = _load_dataset(cfg)
    rank = min(cfg.rank, min(ds.n, ds.n_features))
    prop, X = prepare_inputs(ds, cfg.pipeline_params())
    matio.write_matrix(cache / "reduced.zgem", X.matrix)
    matio.write_csr(cache / "prop", prop.matrix)
    _write_json(
        manifest_path,
        {"prepare_hash": want, "rank": rank, "rows": ds.n, "config_hash": config_hash(cfg)},
    )
    logger.info("prepare: cached %dx%d reduced features in %s", ds.n, rank, cache)
    return prop, X


def _cached_inputs(cfg: RunConfig, ds: Dataset):
    """Reuse prepare caches when valid; otherwise compute in memory."""
    cache = _cache_dir(cfg)
    manifest_path = cache / "manifest.json"
    if manifest_path.is_file():
        stored = json.loads(manifest_path.read_text(encoding="utf-8"))
        if stored.get("prepare_hash") == _prepare_hash(cfg):
            logger.info("using prepared cache %s", cache)
            X = ReducedFeatures(matrix=matio.read_matrix(cache / "reduced.zgem"), rank=stored["rank"])
            prop = PropagationMatrix.from_csr(matio.read_csr(cache / "prop"))
            return prop, X
    return prepare_inputs(ds, cfg.pipeline_params())


def cmd_run(cfg: RunConfig) -> Path:
    ds = _load_dataset(cfg)
    prop, X = _cached_inputs(cfg, ds)
    chash = config_hash(cfg)
    cells = []
    csv_rows = []
    for rate in cfg.label_rates:
        report: EvalReport = evaluate_zero_shot(
            ds,
            rate,
            cfg.n_unseen,
            cfg.variants,
            cfg.pipeline_params(),
            cfg.seeds,
            prop=prop,
            X=X,
            dataset_name=cfg.dataset_name,
            threads=cfg.threads,
        )
        for variant in cfg.variants:
            scores = report.variants[variant]
            cells.append(
                {
                    "dataset": cfg.dataset_name,
                    "label_rate": rate,
                    "n_unseen": cfg.n_unseen,
                    "variant": variant,
                    **scores.to_dict(),
                }
            )
        csv_rows.extend(report.csv_rows())
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "report.json", {"config": cfg.to_dict(), "config_hash": chash, "cells": cells})
    _write_csv(
        out / "report.csv",
        "variant,dataset,label_rate,seed,micro_f1,macro_f1",
        csv_rows,
    )
    logger.info("run: wrote %d aggregate cells to %s", len(cells), out / "report.json")
    return out / "report.json"


def cmd_sweep_seen(cfg: RunConfig) -> Path:
    ds = _load_dataset(cfg)
    if not cfg.seen_counts:
        raise ConfigError("sweep-seen requires seen_counts (e.g. --seen-counts 2,3,4)")
    for count in cfg.seen_counts:
        if not 1 <= count <= ds.n_classes - 1:
            raise ConfigError(
                f"seen count {count} outside [1, {ds.n_classes - 1}] for {ds.n_classes} classes"
            )
    prop, X = _cached_inputs(cfg, ds)
    rate = cfg.label_rates[0]
    curve = []
    csv_rows = []
    for count in cfg.seen_counts:
        n_unseen = ds.n_classes - count
        report = evaluate_zero_shot(
            ds,
            rate,
            n_unseen,
            cfg.variants,
            cfg.pipeline_params(),
            cfg.seeds,
            prop=prop,
            X=X,
            dataset_name=cfg.dataset_name,
            threads=cfg.threads,
        )
        for variant in cfg.variants:
            scores = report.variants[variant]
            curve.append(
                {
                    "seen_count": count,
                    "n_unseen": n_unseen,
                    "label_rate": rate,
                    "variant": variant,
                    **scores.to_dict(),
                }
            )
            for rec in scores.per_seed:
                csv_rows.append(
                    (count, variant, cfg.dataset_name, rate, rec["seed"], rec["micro_f1"], rec["macro_f1"])
                )
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_json(
        out / "sweep_seen.json",
        {"config": cfg.to_dict(), "config_hash": config_hash(cfg), "curve": curve},
    )
    _write_csv(
        out / "sweep_seen.csv",
        "seen_count,variant,dataset,label_rate,seed,micro_f1,macro_f1",
        csv_rows,
    )
    return out / "sweep_seen.json"


def cmd_diagnose(cfg: RunConfig) -> Path:
    ds = _load_dataset(cfg)
    prop, X = _cached_inputs(cfg, ds)
    variants = [v for v in cfg.variants if v in _SINGLE_MODEL_VARIANTS]
    if not variants:
        variants = ["rect-l", "sl"]
    rate = cfg.label_rates[0]
    cells = []
    for variant in variants:
        for seed in cfg.seeds:
            diag = diagnose_variant(
                ds, rate, cfg.n_unseen, variant, cfg.pipeline_params(), seed, prop=prop, X=X
            )
            cells.append({"variant": variant, "seed": seed, "label_rate": rate, **diag.to_dict()})
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_json(
        out / "diagnostics.json",
        {"config": cfg.to_dict(), "config_hash": config_hash(cfg), "cells": cells},
    )
    return out / "diagnostics.json"


def _pipeline_for(cfg: RunConfig, seed: int):
    ds = _load_dataset(cfg)
    prop, X = _cached_inputs(cfg, ds)
    split = make_zero_shot_split(ds, cfg.label_rates[0], cfg.n_unseen, seed)
    return VariantPipeline(ds, prop, X, split, cfg.pipeline_params(), seed)


def cmd_expand(cfg: RunConfig, strategy: str) -> Path:
    if strategy not in ("sl", "sul", "sul-star"):
        raise ConfigError(f"expand strategy must be sl, sul, or sul-star, got {strategy!r}")
    pipeline = _pipeline_for(cfg, cfg.seeds[0])
    expanded = pipeline.expanded_labels(strategy)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"expanded_{strategy}.txt"
    tmp = path.with_name(path.name + ".tmp")
    write_expanded_labels(expanded, tmp, header=f"config_hash={config_hash(cfg)}")
    os.replace(tmp, path)
    logger.info("expand: wrote %d labels to %s", len(expanded), path)
    return path


def cmd_embed(cfg: RunConfig, variant: str) -> Path:
    if variant not in VARIANTS:
        raise ConfigError(f"unknown variant {variant!r}; expected one of {VARIANTS}")
    pipeline = _pipeline_for(cfg, cfg.seeds[0])
    emb = pipeline.embedding(variant)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"embedding_{variant}.zgem"
    tmp = path.with_name(path.name + ".tmp")
    matio.write_matrix(tmp, emb.matrix)
    os.replace(tmp, path)
    # the binary container has no hash field; drop a sidecar next to it
    _write_json(
        path.with_name(path.name + ".meta.json"),
        {
            "config_hash": config_hash(cfg),
            "variant": variant,
            "provenance": emb.provenance,
            "rows": emb.matrix.shape[0],
            "cols": emb.matrix.shape[1],
        },
    )
    logger.info("embed: wrote %s embedding %s to %s", variant, emb.matrix.shape, path)
    return path


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="zge",
        description="Zero-shot graph embedding: prototypical GCN with label expansion",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser):
        p.add_argument("--config", help="key=value config file")
        p.add_argument("--dataset", help="directory with edges.txt/features.txt/labels.txt")
        p.add_argument("--label-rate", dest="label_rate", help="comma-separated label rates")
        p.add_argument("--unseen", type=int, help="number of unseen classes")
        p.add_argument("--variants", help="comma-separated variant list")
        p.add_argument("--seeds", help="comma-separated seed list")
        p.add_argument("--epochs", type=int)
        p.add_argument("--lr", type=float)
        p.add_argument("--rank", type=int)
        p.add_argument("--hidden", type=int)
        p.add_argument("--out", help="output directory")
        p.add_argument("--threads", type=int)

    common(sub.add_parser("prepare", help="cache reduced features and propagation matrix"))
    common(sub.add_parser("run", help="evaluate the variant grid, write JSON/CSV reports"))
    sweep = sub.add_parser("sweep-seen", help="micro-F1 curves vs number of seen classes")
    common(sweep)
    sweep.add_argument("--seen-counts", dest="seen_counts", help="comma-separated counts")
    common(sub.add_parser("diagnose", help="empirical risk diagnostics"))
    expand = sub.add_parser("expand", help="dump an expanded label set")
    common(expand)
    expand.add_argument("--strategy", required=True, help="sl | sul | sul-star")
    embed_p = sub.add_parser("embed", help="dump a variant's embedding matrix")
    common(embed_p)
    embed_p.add_argument("--variant", required=True)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(
        level=logging.INFO, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr
    )
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _load_config(args)
        logger.info("kernels backend: %s", kernels.BACKEND)
        if args.command == "prepare":
            cmd_prepare(cfg)
        elif args.command == "run":
            cmd_run(cfg)
        elif args.command == "sweep-seen":
            cmd_sweep_seen(cfg)
        elif args.command == "diagnose":
            cmd_diagnose(cfg)
        elif args.command == "expand":
            cmd_expand(cfg, args.strategy)
        elif args.command == "embed":
            cmd_embed(cfg, args.variant)
        return 0
    except (ConfigError, ValueError) as exc:
        logger.error("config error: %s", exc)
        return 2
    except DataError as exc:
        logger.error("data error: %s", exc)
        return 3
    except NumericError as exc:
        logger.error("numeric error: %s", exc)
        return 4
    except Exception as exc:  # pragma: no cover
        logger.error("unexpected failure: %s", exc, exc_info=True)
        return 1


if __name__ == "__main__":
    sys.exit(main())
