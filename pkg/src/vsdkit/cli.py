"""Command-line surface: reproducible pipelines over the documented formats.

Every subcommand writes its outputs plus a JSON run manifest (inputs with
content hashes, parameters, seed, versions). Outputs contain no timestamps,
so reruns with identical inputs are byte-identical. Diagnostics go to stderr
as `warning:` lines; hard failures exit non-zero with an `error:` line.

Compressed image formats are accepted wherever the imaging library can decode
them; the documented interchange format for pixels is the portable pixmap
(PPM/PGM). Convert exotic formats externally, e.g. `magick in.png out.ppm`.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import xml.etree.ElementTree as ElementTree
from pathlib import Path

import numpy as np

from . import annotations as anno
from . import baselines as bl
from . import manifest as mf
from . import mil
from . import regression as reg
from . import selftrain as st
from .errors import ConfigError, ParseError, VsdkitError
from .feature_store import l2_normalize_rows, read_features
from .metrics import kendall_tau, mse, pair_accuracy
from .splits import CLASS_DISJOINT, RANDOM_50_25_25, SplitSpec, make_splits

DEFAULT_THREADS_ENV = "VSDKIT_THREADS"


def _warn(messages) -> None:
    for message in messages:
        print(f"warning: {message}", file=sys.stderr)


def _manifest_path(out: Path, override: str | None) -> Path:
    return Path(override) if override else out.with_name(out.name + ".manifest.json")


def _apply_threads(threads: int | None) -> int:
    value = threads if threads is not None else int(
        os.environ.get(DEFAULT_THREADS_ENV, "1")
    )
    try:
        import numba

        numba.set_num_threads(max(1, value))
    except Exception:
        pass
    return value


def _read_scores(path: str) -> dict[str, float]:
    records = anno.scores_from_csv(Path(path).read_text())
    return {r.image_id: r.score for r in records}


def _write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def cmd_process_annotations(args) -> int:
    out = Path(args.out)
    with open(args.log, newline="") as fh:
        records, diags = anno.parse_annotation_log(fh)
    _warn(diags)
    config = anno.PipelineConfig(
        max_time=args.max_time,
        min_count=args.min_count,
        slow_mean=args.slow_mean,
        slow_count=args.slow_count,
        min_accuracy=args.min_accuracy,
        penalty_weight=args.penalty,
    )
    result = anno.score_annotation_log(records, config)
    _warn(result.diagnostics)
    _write_text(out, anno.scores_to_csv(result.scores))
    mf.write_keyvalues(
        out.with_name(out.name + ".meta"),
        {
            "shift": repr(result.shift),
            "penalty_weight": repr(config.penalty_weight),
            "max_time": repr(config.max_time),
            "min_count": config.min_count,
            "slow_mean": repr(config.slow_mean),
            "slow_count": config.slow_count,
            "min_accuracy": repr(config.min_accuracy),
            "n_scores": len(result.scores),
            "n_retained_annotators": len(result.retained_annotators),
        },
    )
    mf.write_run_manifest(
        _manifest_path(out, args.manifest),
        "process-annotations",
        {"log": args.log},
        vars_for_manifest(args, ["max_time", "min_count", "slow_mean", "slow_count", "min_accuracy", "penalty"]),
    )
    return 0


def cmd_compute_properties(args) -> int:
    out = Path(args.out)
    with open(args.boxes, newline="") as fh:
        boxes, diags = anno.parse_box_metadata(fh)
    _warn(diags)
    with open(args.sizes, newline="") as fh:
        sizes = anno.parse_size_table(fh)
    properties, diags = anno.image_properties(boxes, sizes)
    _warn(diags)
    ids, vectors = anno.property_scores(properties)
    lines = ["image_id," + ",".join(anno.PROPERTY_NAMES)]
    for i, image_id in enumerate(ids):
        values = ",".join(repr(float(vectors[name][i])) for name in anno.PROPERTY_NAMES)
        lines.append(f"{image_id},{values}")
    _write_text(out, "\n".join(lines) + "\n")
    inputs = {"boxes": args.boxes, "sizes": args.sizes}
    if args.tau_against:
        scores = _read_scores(args.tau_against)
        common = [i for i in ids if i in scores]
        if len(common) < 2:
            raise ConfigError("fewer than 2 images shared with the score file")
        index = {image_id: i for i, image_id in enumerate(ids)}
        gt = [scores[i] for i in common]
        report = {}
        for name in anno.PROPERTY_NAMES:
            column = [float(vectors[name][index[i]]) for i in common]
            try:
                report[name] = kendall_tau(column, gt).tau
            except ConfigError as exc:
                report[name] = None
                _warn([f"property {name}: {exc}"])
        report_path = out.with_name(out.stem + "_tau.json")
        _write_text(report_path, json.dumps(report, indent=2, sort_keys=True) + "\n")
        inputs["scores"] = args.tau_against
    mf.write_run_manifest(
        _manifest_path(out, args.manifest), "compute-properties", inputs, {}
    )
    return 0


def _collect_images(spec: str) -> list[Path]:
    path = Path(spec)
    if path.is_dir():
        files = sorted(
            p for p in path.iterdir()
            if p.suffix.lower() in (".ppm", ".pgm", ".pnm", ".png", ".jpg", ".jpeg")
        )
        if not files:
            raise ConfigError(f"no images found in {path}")
        return files
    if path.is_file() and path.suffix.lower() == ".txt":
        return [Path(line.strip()) for line in path.read_text().splitlines() if line.strip()]
    return [path]


def cmd_baselines(args) -> int:
    out = Path(args.out)
    rows = []
    for image_path in _collect_images(args.images):
        rows.append(
            bl.baseline_scores(
                image_path,
                k=args.k,
                min_size=args.min_size,
                sigma=args.sigma,
                normalize_edges=args.normalize_edges,
            )
        )
    _write_text(out, bl.baselines_to_csv(rows))
    mf.write_run_manifest(
        _manifest_path(out, args.manifest),
        "baselines",
        {},
        vars_for_manifest(args, ["images", "k", "min_size", "sigma", "normalize_edges"]),
    )
    return 0


def _read_image_classes(path: str) -> dict[str, list[str]]:
    mapping: dict[str, list[str]] = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(h.strip() for h in header) != ("image_id", "class"):
            raise ParseError("image-class map needs header image_id,class")
        for row in reader:
            if not row:
                continue
            mapping.setdefault(row[0].strip(), []).append(row[1].strip())
    return mapping


def _split_spec_from_args(args) -> SplitSpec:
    if args.split == CLASS_DISJOINT:
        if not args.train_classes or not args.test_classes:
            raise ConfigError("class_disjoint needs --train-classes and --test-classes")
        return SplitSpec(
            kind=CLASS_DISJOINT,
            seed=args.seed,
            train_classes=tuple(args.train_classes.split(",")),
            test_classes=tuple(args.test_classes.split(",")),
        )
    return SplitSpec(kind=RANDOM_50_25_25, seed=args.seed)


def cmd_train(args) -> int:
    out = Path(args.out)
    features = read_features(args.features)
    scores = _read_scores(args.scores)
    ids = [i for i in features.ids if i in scores]
    missing = len(features.ids) - len(ids)
    if missing:
        _warn([f"{missing} feature rows have no score and are ignored"])
    if len(ids) < 4:
        raise ConfigError("need at least 4 scored images to split and train")
    image_classes = _read_image_classes(args.image_classes) if args.image_classes else None
    spec = _split_spec_from_args(args)
    split = make_splits(ids, spec, image_classes)
    _warn(split.diagnostics)

    def dataset(id_list):
        x = np.vstack([features.row(i) for i in id_list]).astype(np.float64)
        if args.l2_normalize:
            x = l2_normalize_rows(x)
        y = np.array([scores[i] for i in id_list])
        return reg.Dataset(ids=tuple(id_list), x=x, y=y)

    train_set = dataset(split.train)
    val_set = dataset(split.val)
    test_set = dataset(split.test)
    report, model = reg.grid_search(train_set, val_set, args.model_kind, seed=args.seed)
    model.l2_normalized_inputs = bool(args.l2_normalize)
    reg.save_model(model, out)
    test_pred = reg.predict(model, test_set.x)
    summary = {
        "selected": report.selected,
        "grid": [
            {"params": p.params, "tau": p.tau, "mse": p.mse} for p in report.points
        ],
        "test_tau": kendall_tau(test_pred, test_set.y).tau,
        "test_mse": mse(test_pred, test_set.y),
        "split_sizes": {
            "train": len(split.train),
            "val": len(split.val),
            "test": len(split.test),
            "excluded": len(split.excluded),
        },
    }
    report_path = Path(args.report) if args.report else out.with_name(out.stem + "_report.json")
    _write_text(report_path, json.dumps(summary, indent=2, sort_keys=True) + "\n")
    inputs = {"features": args.features, "scores": args.scores}
    if args.image_classes:
        inputs["image_classes"] = args.image_classes
    mf.write_run_manifest(
        _manifest_path(out, args.manifest),
        "train",
        inputs,
        vars_for_manifest(args, ["model_kind", "split", "l2_normalize", "train_classes", "test_classes"]),
        seed=args.seed,
    )
    return 0


def cmd_predict(args) -> int:
    out = Path(args.out)
    model = reg.load_model(args.model)
    features = read_features(args.features)
    x = features.rows.astype(np.float64)
    if model.l2_normalized_inputs:
        x = l2_normalize_rows(x)
    values = reg.predict(model, x)
    lines = ["image_id,score"]
    for image_id, value in zip(features.ids, values):
        lines.append(f"{image_id},{float(value)!r}")
    _write_text(out, "\n".join(lines) + "\n")
    mf.write_run_manifest(
        _manifest_path(out, args.manifest),
        "predict",
        {"model": args.model, "features": args.features},
        {},
    )
    return 0


def _read_two_column_scores(path: str) -> dict[str, float]:
    """Score file with at least image_id,score columns (extra columns allowed)."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header[:2]] != ["image_id", "score"]:
            raise ParseError(f"{path}: expected header starting image_id,score")
        out = {}
        for row in reader:
            if row:
                out[row[0].strip()] = float(row[1])
    return out


def cmd_evaluate(args) -> int:
    out = Path(args.out)
    pred = _read_two_column_scores(args.pred)
    gt = _read_two_column_scores(args.gt)
    common = sorted(set(pred) & set(gt))
    skipped = (set(pred) | set(gt)) - set(common)
    if skipped:
        _warn([f"{len(skipped)} ids present in only one file are ignored"])
    if len(common) < 2:
        raise ConfigError("fewer than 2 shared ids to evaluate")
    p = [pred[i] for i in common]
    g = [gt[i] for i in common]
    summary = kendall_tau(p, g)
    report = {
        "n": len(common),
        "tau": summary.tau,
        "pair_accuracy": pair_accuracy(summary.tau),
        "mse": mse(p, g),
        "n_concordant": summary.n_concordant,
        "n_discordant": summary.n_discordant,
    }
    _write_text(out, json.dumps(report, indent=2, sort_keys=True) + "\n")
    csv_path = out.with_suffix(".csv")
    _write_text(
        csv_path,
        "metric,value\n"
        + "".join(f"{k},{report[k]!r}\n" for k in ("tau", "pair_accuracy", "mse", "n")),
    )
    mf.write_run_manifest(
        _manifest_path(out, args.manifest),
        "evaluate",
        {"pred": args.pred, "gt": args.gt},
        {},
    )
    return 0


def _read_window_boxes(path: str) -> dict[tuple[str, int], mil.Box]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        expected = ("image_id", "window_index", "xmin", "ymin", "xmax", "ymax")
        if header is None or tuple(h.strip() for h in header) != expected:
            raise ParseError(f"window box file needs header {','.join(expected)}")
        out = {}
        for row in reader:
            if not row:
                continue
            out[(row[0].strip(), int(row[1]))] = mil.Box(
                float(row[2]), float(row[3]), float(row[4]), float(row[5])
            )
    return out


def cmd_mil(args) -> int:
    out = Path(args.out)
    with open(args.bags, newline="") as fh:
        manifest_rows = mil.parse_bag_manifest(fh)
    features = read_features(args.features)
    window_boxes = _read_window_boxes(args.window_boxes) if args.window_boxes else None
    gt_boxes = None
    if args.gt_boxes:
        with open(args.gt_boxes, newline="") as fh:
            parsed, diags = anno.parse_box_metadata(fh)
        _warn(diags)
        gt_boxes = {}
        for ob in parsed:
            if args.target_class and ob.class_name != args.target_class:
                continue
            gt_boxes.setdefault(ob.image_id, []).append(ob.box)
    positives, negatives = mil.load_bags(manifest_rows, features, window_boxes, gt_boxes)
    result = mil.run_mil(
        positives,
        negatives,
        schedule=args.schedule,
        iterations=args.iterations,
        k_batches=args.batches,
        c=args.svm_c,
    )
    _warn(result.diagnostics)
    lines = ["iteration,corloc"]
    for i, value in enumerate(result.corloc_per_iteration, start=1):
        lines.append(f"{i},{value!r}")
    _write_text(out, "\n".join(lines) + "\n")
    if args.selections:
        sel_lines = ["image_id,window_index,xmin,ymin,xmax,ymax"]
        for bag in positives:
            index = result.state.selections.get(bag.image_id)
            if index is None:
                index = int(np.argmax([inst.score for inst in bag.instances]))
            box = bag.instances[index].box
            coords = (
                f"{box.xmin!r},{box.ymin!r},{box.xmax!r},{box.ymax!r}"
                if box is not None
                else ",,,"
            )
            sel_lines.append(f"{bag.image_id},{index},{coords}")
        _write_text(Path(args.selections), "\n".join(sel_lines) + "\n")
    inputs = {"bags": args.bags, "features": args.features}
    if args.window_boxes:
        inputs["window_boxes"] = args.window_boxes
    if args.gt_boxes:
        inputs["gt_boxes"] = args.gt_boxes
    mf.write_run_manifest(
        _manifest_path(out, args.manifest),
        "mil",
        inputs,
        vars_for_manifest(args, ["schedule", "iterations", "batches", "svm_c", "target_class"]),
        seed=args.seed,
    )
    return 0


def cmd_selftrain(args) -> int:
    out = Path(args.out)
    config = json.loads(Path(args.config).read_text())
    features = read_features(config["features"])
    table = {i: features.row(i).astype(np.float64) for i in features.ids}
    labels = _read_two_column_scores(config["labels"])  # +1 / -1 per image
    difficulty_pred = (
        _read_two_column_scores(config["predicted_difficulty"])
        if "predicted_difficulty" in config
        else None
    )
    difficulty_gt = (
        _read_two_column_scores(config["ground_truth_difficulty"])
        if "ground_truth_difficulty" in config
        else None
    )
    split = st.SampleSplit(
        labeled={i: int(labels[i]) for i in config["labeled_ids"]},
        unlabeled=list(config["unlabeled_ids"]),
        test={i: int(labels[i]) for i in config["test_ids"]},
    )
    lines = ["heuristic,seed,iteration,ap"]
    for kind in config.get("heuristics", ["RAND"]):
        for seed in config.get("seeds", [0]):
            spec = st.HeuristicSpec(
                kind=kind,
                k=config.get("k", 50),
                big_k=config.get("K", 2000),
                seed=seed,
            )
            result = st.selftrain_run(
                split,
                spec,
                table,
                difficulty_gt=difficulty_gt,
                difficulty_pred=difficulty_pred,
                stop_multiple=config.get("stop_multiple", 3),
            )
            _warn(result.diagnostics)
            for i, ap in enumerate(result.ap_per_iteration):
                lines.append(f"{kind},{seed},{i},{ap!r}")
    _write_text(out, "\n".join(lines) + "\n")
    mf.write_run_manifest(
        _manifest_path(out, args.manifest), "selftrain", {"config": args.config}, {}
    )
    return 0


def cmd_synth_bench(args) -> int:
    out = Path(args.out)
    seeds = list(range(args.seeds))
    if args.benchmark == "mil":
        config = mil.SyntheticBagConfig(
            n_positive=args.bags,
            n_negative=args.bags,
            instances_per_bag=args.instances,
            dim=args.dim,
        )
        result = mil.run_curriculum_benchmark(config, seeds)
        lines = ["seed,schedule,iteration,corloc"]
        for seed, std_t, e2h_t in zip(
            result.seeds, result.standard_trajectories, result.easy_to_hard_trajectories
        ):
            for i, value in enumerate(std_t, start=1):
                lines.append(f"{seed},standard,{i},{value!r}")
            for i, value in enumerate(e2h_t, start=1):
                lines.append(f"{seed},easy_to_hard,{i},{value!r}")
        summary = (
            f"win_fraction={result.win_fraction!r} "
            f"mean_improvement={result.mean_improvement!r}"
        )
    else:
        config = st.SyntheticSelfTrainConfig()
        result = st.run_selftrain_benchmark(
            config, seeds, kinds=("RAND", "PRdifficulty", "GTdifficulty")
        )
        lines = ["seed,heuristic,final_ap"]
        for kind, values in sorted(result.final_map.items()):
            for seed, value in zip(result.seeds, values):
                lines.append(f"{seed},{kind},{value!r}")
        for seed, value in zip(result.seeds, result.baseline):
            lines.append(f"{seed},BASIC,{value!r}")
        summary = " ".join(
            f"{kind}={result.mean_final(kind)!r}" for kind in sorted(result.final_map)
        )
    _write_text(out, "\n".join(lines) + "\n")
    print(summary)
    mf.write_run_manifest(
        _manifest_path(out, args.manifest),
        f"synth-bench {args.benchmark}",
        {},
        vars_for_manifest(args, ["benchmark", "seeds", "bags", "instances", "dim"]),
    )
    return 0


def cmd_convert_metadata(args) -> int:
    out_boxes = Path(args.out_boxes)
    out_sizes = Path(args.out_sizes)
    xml_files = sorted(Path(args.voc_dir).glob("*.xml"))
    if not xml_files:
        raise ConfigError(f"no .xml annotation files in {args.voc_dir}")
    box_lines = [",".join(anno.BOX_HEADER)]
    size_lines = [",".join(anno.SIZE_HEADER)]
    for xml_path in xml_files:
        root = ElementTree.parse(xml_path).getroot()
        image_id = xml_path.stem
        size = root.find("size")
        if size is None:
            _warn([f"{xml_path.name}: missing <size>, skipped"])
            continue
        size_lines.append(
            f"{image_id},{int(size.findtext('width'))},{int(size.findtext('height'))}"
        )
        for obj in root.findall("object"):
            bnd = obj.find("bndbox")
            if bnd is None:
                continue
            box_lines.append(
                ",".join(
                    [
                        image_id,
                        obj.findtext("name", "unknown"),
                        bnd.findtext("xmin"),
                        bnd.findtext("ymin"),
                        bnd.findtext("xmax"),
                        bnd.findtext("ymax"),
                        obj.findtext("truncated", "0").strip() or "0",
                        obj.findtext("occluded", "0").strip() or "0",
                        obj.findtext("difficult", "0").strip() or "0",
                    ]
                )
            )
    _write_text(out_boxes, "\n".join(box_lines) + "\n")
    _write_text(out_sizes, "\n".join(size_lines) + "\n")
    mf.write_run_manifest(
        _manifest_path(out_boxes, args.manifest),
        "convert-metadata",
        {},
        {"voc_dir": args.voc_dir},
    )
    return 0


def cmd_make_splits(args) -> int:
    out = Path(args.out)
    ids = [line.strip() for line in Path(args.ids).read_text().splitlines() if line.strip()]
    image_classes = _read_image_classes(args.image_classes) if args.image_classes else None
    spec = _split_spec_from_args(args)
    result = make_splits(ids, spec, image_classes)
    _warn(result.diagnostics)
    lines = ["image_id,split"]
    for name, part in (
        ("train", result.train),
        ("val", result.val),
        ("test", result.test),
        ("excluded", result.excluded),
    ):
        for image_id in part:
            lines.append(f"{image_id},{name}")
    _write_text(out, "\n".join(lines) + "\n")
    mf.write_run_manifest(
        _manifest_path(out, args.manifest),
        "make-splits",
        {"ids": args.ids},
        vars_for_manifest(args, ["split", "train_classes", "test_classes"]),
        seed=args.seed,
    )
    return 0


def vars_for_manifest(args, names: list[str]) -> dict:
    return {name: getattr(args, name, None) for name in names}


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--threads", type=int, default=None)
    parser.add_argument("--out-dir", default=None, help="prepended to relative outputs")
    parser.add_argument("--manifest", default=None, help="run manifest path override")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vsdkit", description="visual search difficulty toolkit"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("process-annotations", help="annotation log -> difficulty scores")
    p.add_argument("--log", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--max-time", type=float, default=20.0)
    p.add_argument("--min-count", type=int, default=3)
    p.add_argument("--slow-mean", type=float, default=10.0)
    p.add_argument("--slow-count", type=int, default=10)
    p.add_argument("--min-accuracy", type=float, default=0.90)
    p.add_argument("--penalty", type=float, default=0.5)
    _add_common(p)
    p.set_defaults(func=cmd_process_annotations)

    p = sub.add_parser("compute-properties", help="box metadata -> property score vectors")
    p.add_argument("--boxes", required=True)
    p.add_argument("--sizes", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--tau-against", default=None, help="score CSV for per-property tau")
    _add_common(p)
    p.set_defaults(func=cmd_compute_properties)

    p = sub.add_parser("baselines", help="pixel/file baselines per image")
    p.add_argument("--images", required=True, help="directory, .txt list, or one image")
    p.add_argument("--out", required=True)
    p.add_argument("--k", type=float, default=500.0)
    p.add_argument("--min-size", type=int, default=20)
    p.add_argument("--sigma", type=float, default=0.5)
    p.add_argument("--normalize-edges", action="store_true")
    _add_common(p)
    p.set_defaults(func=cmd_baselines)

    p = sub.add_parser("train", help="grid-searched difficulty regressor")
    p.add_argument("--features", required=True)
    p.add_argument("--scores", required=True)
    p.add_argument("--model-kind", choices=[reg.KIND_KRR, reg.KIND_NU_SVR], default=reg.KIND_NU_SVR)
    p.add_argument("--out", required=True)
    p.add_argument("--report", default=None)
    p.add_argument("--split", choices=[RANDOM_50_25_25, CLASS_DISJOINT], default=RANDOM_50_25_25)
    p.add_argument("--image-classes", default=None, help="CSV image_id,class")
    p.add_argument("--train-classes", default=None, help="comma separated")
    p.add_argument("--test-classes", default=None)
    p.add_argument("--l2-normalize", action="store_true")
    _add_common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="apply a saved model to a feature file")
    p.add_argument("--model", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--out", required=True)
    _add_common(p)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate", help="tau / pair accuracy / MSE between score files")
    p.add_argument("--pred", required=True)
    p.add_argument("--gt", required=True)
    p.add_argument("--out", required=True)
    _add_common(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("mil", help="multiple-instance localization run")
    p.add_argument("--bags", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--window-boxes", default=None)
    p.add_argument("--gt-boxes", default=None)
    p.add_argument("--target-class", default=None)
    p.add_argument("--schedule", choices=["standard", "easy_to_hard"], default="easy_to_hard")
    p.add_argument("--iterations", type=int, default=9)
    p.add_argument("--batches", type=int, default=3)
    p.add_argument("--svm-c", type=float, default=1.0)
    p.add_argument("--out", required=True)
    p.add_argument("--selections", default=None)
    _add_common(p)
    p.set_defaults(func=cmd_mil)

    p = sub.add_parser("selftrain", help="self-training run from a JSON run spec")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    _add_common(p)
    p.set_defaults(func=cmd_selftrain)

    p = sub.add_parser("synth-bench", help="seeded synthetic benchmarks")
    p.add_argument("benchmark", choices=["mil", "selftrain"])
    p.add_argument("--seeds", type=int, default=20)
    p.add_argument("--bags", type=int, default=200)
    p.add_argument("--instances", type=int, default=50)
    p.add_argument("--dim", type=int, default=64)
    p.add_argument("--out", required=True)
    _add_common(p)
    p.set_defaults(func=cmd_synth_bench)

    p = sub.add_parser("convert-metadata", help="VOC-style XML -> box/size tables")
    p.add_argument("--voc-dir", required=True)
    p.add_argument("--out-boxes", required=True)
    p.add_argument("--out-sizes", required=True)
    _add_common(p)
    p.set_defaults(func=cmd_convert_metadata)

    p = sub.add_parser("make-splits", help="train/val/test id assignment")
    p.add_argument("--ids", required=True, help="text file, one id per line")
    p.add_argument("--split", choices=[RANDOM_50_25_25, CLASS_DISJOINT], default=RANDOM_50_25_25)
    p.add_argument("--image-classes", default=None)
    p.add_argument("--train-classes", default=None)
    p.add_argument("--test-classes", default=None)
    p.add_argument("--out", required=True)
    _add_common(p)
    p.set_defaults(func=cmd_make_splits)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    _apply_threads(args.threads)
    if args.out_dir:
        for attr in ("out", "selections", "report", "out_boxes", "out_sizes"):
            value = getattr(args, attr, None)
            if value is not None and not os.path.isabs(value):
                setattr(args, attr, os.path.join(args.out_dir, value))
    try:
        return args.func(args)
    except VsdkitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
