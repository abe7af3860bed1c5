"""Batch-mode command line: segment, extract, train, predict, evaluate,
synth, serve.

Machine-readable JSON goes to stdout (JSON-lines where there are many
records); human-readable progress goes to stderr.  Exit codes: 0 success,
1 operational error, 2 invalid user input.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import classifier as C
from . import datastore as D
from . import features as F
from . import imaging as I
from . import segmentation as S
from .errors import (
    DecodeError,
    DimensionMismatch,
    FlowerIdError,
    InvalidMarkers,
)

EXIT_OK = 0
EXIT_OPERATIONAL = 1
EXIT_INVALID_INPUT = 2


def _log(msg: str) -> None:
    print(msg, file=sys.stderr)


def _emit(obj) -> None:
    print(json.dumps(obj), file=sys.stdout)


def cmd_synth(args) -> int:
    D.generate_synthetic_corpus(
        args.out,
        n_classes=args.classes,
        per_class=args.per_class,
        seed=args.seed,
        size=(args.size, args.size),
        holdout_per_class=args.holdout_per_class,
    )
    _log(f"wrote {args.classes}x{args.per_class} synthetic images to {args.out}")
    return EXIT_OK


def cmd_segment(args) -> int:
    img = I.resize_to_limit(I.load_image(args.image))
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    regions = S.oversegment(img, args.min_region)
    markers = S.read_marker_png(args.flower_markers, img.shape[:2])
    flower = S.msrm_merge(img, regions, markers, args.morph_radius)
    I.save_mask(flower, out / "mask.flower.png")
    masked = S.apply_mask(img, flower)
    I.save_image(masked, out / "object.flower.png")
    if args.lip_markers:
        lip_regions = S.oversegment(masked, args.min_region)
        lip_markers = S.read_marker_png(args.lip_markers, img.shape[:2])
        lip = S.msrm_merge(masked, lip_regions, lip_markers, args.morph_radius) & flower
        I.save_mask(lip, out / "mask.lip.png")
        I.save_image(S.apply_mask(img, lip), out / "object.lip.png")
    else:
        _log("no lip markers given; flower-only outputs written")
    _emit({"out_dir": str(out), "flower_pixels": int(flower.sum())})
    return EXIT_OK


def _masks_for_entry(entry: D.DatasetEntry, img, args):
    """Ground-truth masks when present, else marker-driven segmentation."""
    if entry.flower_mask_path:
        flower = I.load_mask(entry.flower_mask_path)
    elif entry.flower_marker_path:
        regions = S.oversegment(img, args.min_region)
        markers = S.read_marker_png(entry.flower_marker_path, img.shape[:2])
        flower = S.msrm_merge(img, regions, markers, args.morph_radius)
    else:
        raise FlowerIdError("no flower mask or markers")
    if entry.lip_mask_path:
        lip = I.load_mask(entry.lip_mask_path)
    elif entry.lip_marker_path:
        masked = S.apply_mask(img, flower)
        regions = S.oversegment(masked, args.min_region)
        markers = S.read_marker_png(entry.lip_marker_path, img.shape[:2])
        lip = S.msrm_merge(masked, regions, markers, args.morph_radius) & flower
    else:
        raise FlowerIdError("no lip mask or markers")
    if not lip.any():
        raise FlowerIdError("empty lip mask")
    return flower, lip


def cmd_extract(args) -> int:
    if args.image:
        img = I.resize_to_limit(I.load_image(args.image))
        flower = I.load_mask(args.flower_mask)
        lip = I.load_mask(args.lip_mask)
        vec = F.extract_image_features(img, flower, lip)
        table = D.FeatureTable([Path(args.image).stem], ["?"], ["?"],
                               vec[None, :])
        D.save_features(table, args.out)
        _log(f"wrote 1 row to {args.out}")
        return EXIT_OK
    entries = D.ingest(args.dataset)
    entries.sort(key=lambda e: e.image_id)
    ids, genera, species, rows = [], [], [], []
    failures = 0
    for e in entries:
        try:
            img = I.resize_to_limit(I.load_image(e.image_path))
            flower, lip = _masks_for_entry(e, img, args)
            vec = F.extract_image_features(img, flower, lip)
        except FlowerIdError as exc:
            failures += 1
            _log(f"skipping {e.image_id}: {exc}")
            if args.strict:
                raise
            continue
        ids.append(e.image_id)
        genera.append(e.genus)
        species.append(e.species)
        rows.append(vec)
    D.save_features(
        D.FeatureTable(ids, genera, species, np.asarray(rows)), args.out
    )
    _log(f"wrote {len(ids)} rows to {args.out} ({failures} failures)")
    return EXIT_OK if failures == 0 else EXIT_OPERATIONAL


def _subset_from_args(args, n_features: int):
    if getattr(args, "subset", None):
        return sorted(int(t) for t in args.subset.split(","))
    if getattr(args, "group", None):
        return D.resolve_group(args.group)
    return list(range(1, n_features + 1))


def cmd_train(args) -> int:
    table = D.load_features(args.features)
    subset = _subset_from_args(args, table.rows.shape[1])
    class_genus = dict(zip(table.species, table.genera))
    if args.grid:
        ranked = C.grid_search(table.rows, table.species, None, subset,
                               args.k, args.seed)
        params, best_acc = ranked[0]
        _log(f"grid winner: {params} mean accuracy {best_acc:.4f}")
    else:
        params = C.SvmParams(args.kernel, args.c, args.g, args.r, args.d)
    report = C.kfold_cv(table.rows, table.species, params, subset,
                        args.k, args.seed)
    model = C.train_ovo(table.rows, table.species, params, subset, class_genus)
    C.save_model(model, args.out)
    _emit({
        "model": str(args.out),
        "params": {"kernel": params.kernel, "c": params.c, "g": params.g,
                   "r": params.r, "d": params.d},
        "subset_size": len(subset),
        "cv": report.to_dict(),
    })
    return EXIT_OK


def cmd_predict(args) -> int:
    model = C.load_model(args.model)
    if args.image:
        img = I.resize_to_limit(I.load_image(args.image))
        flower = I.load_mask(args.flower_mask)
        lip = I.load_mask(args.lip_mask)
        t0 = time.perf_counter()
        vec = F.extract_image_features(img, flower, lip)
        species, tally = C.predict_ovo(model, vec)
        dt = time.perf_counter() - t0
        _emit({"image_id": Path(args.image).stem, "species": species,
               "votes": tally, "seconds": dt})
        return EXIT_OK
    table = D.load_features(args.features)
    good = 0
    labeled = 0
    for i, iid in enumerate(table.image_ids):
        species, tally = C.predict_ovo(model, table.rows[i])
        _emit({"image_id": iid, "species": species, "votes": tally})
        if table.species[i] not in ("", "?"):
            labeled += 1
            if species == table.species[i]:
                good += 1
    if labeled:
        _log(f"accuracy {good}/{labeled} = {good / labeled:.4f}")
    return EXIT_OK


DEFAULT_EVAL_GROUPS = [
    "All", "Group1", "Group2", "Group3", "Group4", "Group5", "Group6",
    "FlowerOnly", "LipOnly",
]


def cmd_evaluate(args) -> int:
    table = D.load_features(args.features)
    groups = args.groups or DEFAULT_EVAL_GROUPS
    params = C.SvmParams(args.kernel, args.c, args.g, args.r, args.d)
    results = []
    for name in groups:
        subset = D.resolve_group(name)
        report = C.kfold_cv(table.rows, table.species, params, subset,
                            args.k, args.seed)
        results.append({
            "group": name,
            "n_features": len(subset),
            "mean_accuracy": report.mean_accuracy,
            "fold_accuracies": report.fold_accuracies,
            "seconds_per_image": report.seconds_per_image,
        })
    results.sort(key=lambda r: -r["mean_accuracy"])
    for row in results:
        _emit(row)
    return EXIT_OK


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    app = create_app(models_dir=args.models_dir,
                     session_capacity=args.session_capacity)
    uvicorn.run(app, host=args.host, port=args.port)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="flowerid")
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("synth", help="generate the synthetic corpus")
    sp.add_argument("--out", required=True)
    sp.add_argument("--classes", type=int, default=30)
    sp.add_argument("--per-class", type=int, default=10)
    sp.add_argument("--seed", type=int, default=7)
    sp.add_argument("--size", type=int, default=160)
    sp.add_argument("--holdout-per-class", type=int, default=1)
    sp.set_defaults(fn=cmd_synth)

    sp = sub.add_parser("segment", help="two-stage marker segmentation")
    sp.add_argument("--image", required=True)
    sp.add_argument("--flower-markers", required=True)
    sp.add_argument("--lip-markers")
    sp.add_argument("--out-dir", required=True)
    sp.add_argument("--morph-radius", type=int, default=1)
    sp.add_argument("--min-region", type=int, default=20)
    sp.set_defaults(fn=cmd_segment)

    sp = sub.add_parser("extract", help="feature extraction to CSV")
    sp.add_argument("--dataset")
    sp.add_argument("--image")
    sp.add_argument("--flower-mask")
    sp.add_argument("--lip-mask")
    sp.add_argument("--out", required=True)
    sp.add_argument("--strict", action="store_true")
    sp.add_argument("--morph-radius", type=int, default=1)
    sp.add_argument("--min-region", type=int, default=20)
    sp.set_defaults(fn=cmd_extract)

    sp = sub.add_parser("train", help="train an SVM model from features")
    sp.add_argument("--features", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--kernel", choices=C.KERNELS, default="rbf")
    sp.add_argument("--c", type=float, default=30.0)
    sp.add_argument("--g", type=float, default=0.009)
    sp.add_argument("--r", type=float, default=0.0)
    sp.add_argument("--d", type=int, default=3)
    sp.add_argument("--grid", action="store_true")
    sp.add_argument("--group")
    sp.add_argument("--subset")
    sp.add_argument("--k", type=int, default=5)
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(fn=cmd_train)

    sp = sub.add_parser("predict", help="predict species from features or image")
    sp.add_argument("--model", required=True)
    sp.add_argument("--features")
    sp.add_argument("--image")
    sp.add_argument("--flower-mask")
    sp.add_argument("--lip-mask")
    sp.set_defaults(fn=cmd_predict)

    sp = sub.add_parser("evaluate", help="feature-group ablation via CV")
    sp.add_argument("--features", required=True)
    sp.add_argument("--groups", "--ablate", nargs="*", dest="groups")
    sp.add_argument("--kernel", choices=C.KERNELS, default="rbf")
    sp.add_argument("--c", type=float, default=30.0)
    sp.add_argument("--g", type=float, default=0.009)
    sp.add_argument("--r", type=float, default=0.0)
    sp.add_argument("--d", type=int, default=3)
    sp.add_argument("--k", type=int, default=5)
    sp.add_argument("--seed", type=int, default=0)
    sp.set_defaults(fn=cmd_evaluate)

    sp = sub.add_parser("serve", help="run the interactive HTTP service")
    sp.add_argument("--host", default="127.0.0.1")
    sp.add_argument("--port", type=int, default=8000)
    sp.add_argument("--models-dir")
    sp.add_argument("--session-capacity", type=int, default=64)
    sp.set_defaults(fn=cmd_serve)
    return p


# UnknownGroup deliberately maps to the operational exit code (1)
INVALID_INPUT_ERRORS = (InvalidMarkers, DecodeError, DimensionMismatch)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except INVALID_INPUT_ERRORS as exc:
        _log(f"error: {exc}")
        return EXIT_INVALID_INPUT
    except (FlowerIdError, OSError) as exc:
        _log(f"error: {exc}")
        return EXIT_OPERATIONAL


if __name__ == "__main__":
    sys.exit(main())
