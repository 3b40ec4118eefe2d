import os
import sys
import argparse
import logging
import logging.handlers
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

if __name__ == "__main__" and __package__ is None:
    script_dir = os.path.dirname(os.path.abspath(__file__))
    sys.path.insert(0, os.path.dirname(script_dir))
    __package__ = "fruit_disease"

from .constants import (
    DEFAULT_IMAGE_SIZE,
    DEFAULT_NOISE,
    DEFAULT_PER_CLASS,
    DEFAULT_THREADS,
    __version__,
)
from .errors import ConfigError, FruitDiseaseError

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'
DECODING_CHOICES = {"literal": "literal", "ignore-zeros": "ignore_zeros"}


def configure_logging(level: str = "WARNING", log_file: Optional[str] = None) -> None:
    """Console logging plus an optional rotating log file (1MB per file, 5 backups)."""
    handlers: List[logging.Handler] = [logging.StreamHandler()]
    if log_file:
        Path(log_file).parent.mkdir(parents=True, exist_ok=True)
        handlers.append(logging.handlers.RotatingFileHandler(log_file, maxBytes=1024*1024, backupCount=5))
    logging.basicConfig(level=getattr(logging, level.upper(), logging.WARNING), format=LOG_FORMAT,
                        handlers=handlers, force=True)


def _int_list(text: str) -> List[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got '{text}'") from e


def _name_list(text: str) -> List[str]:
    return [v.strip().lower() for v in text.split(",") if v.strip()]


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML pipeline configuration file")
    common.add_argument("--seed", type=int, help="master seed; every stage seed derives from it")
    common.add_argument("--threads", type=int, default=DEFAULT_THREADS, help="worker threads (default: all cores)")
    common.add_argument("--log-level", default="WARNING", choices=["DEBUG", "INFO", "WARNING", "ERROR"])
    common.add_argument("--log-file", help="also log to this rotating file")
    common.add_argument("--version", action="version", version=f"%(prog)s {__version__}")

    parser = argparse.ArgumentParser(prog="fruit_disease",
                                     description="Fruit disease identification: K-means defect segmentation, "
                                                 "colour/texture descriptors and one-vs-one multi-class SVM.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    sub.required = True

    p = sub.add_parser("segment", parents=[common], help="segment an image and select the defect cluster")
    p.add_argument("--image", required=True)
    p.add_argument("--k", type=int)
    p.add_argument("--policy", help="darkest, outlier or manual:<i>")
    p.add_argument("--mask-out", help="write the defect mask as a 1-bit PNG")
    p.add_argument("--clusters-out", help="directory for one PNG per cluster")
    p.add_argument("--labels-out", help="write the cluster label map as a gray PNG")
    p.add_argument("--planes-out", help="directory for 8-bit dumps of the L*a*b* planes")
    p.set_defaults(handler=cmd_segment)

    p = sub.add_parser("extract", parents=[common], help="extract descriptors to a feature CSV")
    source = p.add_mutually_exclusive_group(required=True)
    source.add_argument("--image", action="append", help="image file (repeatable)")
    source.add_argument("--data", help="dataset directory with one subdirectory per class")
    p.add_argument("--feature", choices=["gch", "ccv", "lbp", "clbp"])
    p.add_argument("--colorspace", choices=["rgb", "hsv"])
    p.add_argument("--mask", help="mask PNG for a single --image")
    p.add_argument("--no-segment", action="store_true", help="use the whole image instead of the defect mask")
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_extract)

    p = sub.add_parser("train", parents=[common], help="train a one-vs-one multi-class SVM")
    p.add_argument("--features", required=True, help="feature CSV")
    p.add_argument("--C", type=float, dest="C")
    p.add_argument("--model-out", required=True)
    p.set_defaults(handler=cmd_train)

    p = sub.add_parser("predict", parents=[common], help="classify an image or feature rows")
    p.add_argument("--model", required=True)
    source = p.add_mutually_exclusive_group(required=True)
    source.add_argument("--image")
    source.add_argument("--features", help="feature CSV")
    p.add_argument("--decoding", choices=sorted(DECODING_CHOICES))
    p.add_argument("--no-segment", action="store_true")
    p.set_defaults(handler=cmd_predict)

    p = sub.add_parser("evaluate", parents=[common], help="run the accuracy sweep and write a report CSV")
    p.add_argument("--data", required=True)
    p.add_argument("--features", type=_name_list, help="comma list of gch,ccv,lbp,clbp")
    p.add_argument("--colorspaces", type=_name_list, help="comma list of rgb,hsv")
    p.add_argument("--train-per-class", type=_int_list, help="comma list of M values")
    p.add_argument("--trials", type=int)
    p.add_argument("--C", type=float, dest="C")
    p.add_argument("--decoding", choices=sorted(DECODING_CHOICES))
    p.add_argument("--no-segment", action="store_true")
    p.add_argument("--report", required=True)
    p.set_defaults(handler=cmd_evaluate)

    p = sub.add_parser("gen-dataset", parents=[common], help="write a synthetic 4-class fruit dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--per-class", type=int, default=DEFAULT_PER_CLASS)
    p.add_argument("--size", type=int, default=DEFAULT_IMAGE_SIZE)
    p.add_argument("--noise", type=float, default=DEFAULT_NOISE)
    p.set_defaults(handler=cmd_gen_dataset)
    return parser


def _config(args: argparse.Namespace, overrides: Dict[str, Any]):
    from .settings import apply_overrides, load_config
    overrides = dict(overrides)
    overrides["seed"] = args.seed
    if getattr(args, "no_segment", False):
        overrides["segmentation.enabled"] = False
    return apply_overrides(load_config(args.config), overrides)


def _decoding(args: argparse.Namespace) -> Optional[str]:
    return DECODING_CHOICES[args.decoding] if getattr(args, "decoding", None) else None


def _image_mask(img, path: str, config) -> Optional[Any]:
    from .evaluation import image_seed
    from .segmentation import segment_image
    if not config.segmentation.enabled:
        return None
    seed = image_seed(config.seed, path, Path(path).parent.name)
    return segment_image(img, config.segmentation.kmeans(seed), config.segmentation.selection()).defect_mask


def cmd_segment(args: argparse.Namespace) -> int:
    from .evaluation import image_seed
    from .image_io import ChannelPlane, load_image, rgb_to_lab, save_image, save_mask_png, save_plane_png, split_channels
    from .segmentation import cluster_images, kmeans_ab, label_map, select_defect_cluster

    config = _config(args, {"segmentation.k": args.k, "segmentation.policy": args.policy})
    img = load_image(args.image)
    lab = rgb_to_lab(img)
    seed = image_seed(config.seed, args.image, Path(args.image).parent.name)
    seg = kmeans_ab(lab, config.segmentation.kmeans(seed))
    seg = select_defect_cluster(seg, lab, config.segmentation.selection())

    if args.mask_out:
        save_mask_png(seg.defect_mask, args.mask_out)
    if args.clusters_out:
        for c, cluster in enumerate(cluster_images(img, seg)):
            save_image(cluster, Path(args.clusters_out) / f"cluster_{c}.png")
    if args.labels_out:
        save_plane_png(ChannelPlane.from_array(label_map(seg).astype(float)), args.labels_out)
    if args.planes_out:
        for name, plane in zip(("L", "a", "b"), split_channels(lab)):
            save_plane_png(plane, Path(args.planes_out) / f"lab_{name}.png")

    counts = seg.counts()
    print(f"selected cluster: {seg.selected[0]} ({config.segmentation.policy})")
    for c in range(seg.k):
        a, b = seg.centroids[c]
        print(f"cluster {c}: {counts[c]} pixels, centroid a*={a:.3f} b*={b:.3f}")
    print(f"objective: {seg.objective:.6f} after {seg.iterations} iterations")
    return 0


def cmd_extract(args: argparse.Namespace) -> int:
    from .exporter import FeatureRecord, write_feature_csv
    from .evaluation import ingest
    from .features import FeatureSpec, extract_dataset
    from .image_io import load_image, load_mask
    from .runtime import parallel_map

    config = _config(args, {"feature": args.feature, "colorspace": args.colorspace})
    spec = FeatureSpec(config.descriptors.descriptor(config.feature), config.colorspace)
    if args.data:
        items = list(ingest(args.data).items)
    else:
        items = [(path, Path(path).parent.name) for path in args.image]
    if args.mask and len(items) != 1:
        raise ConfigError("--mask applies to a single --image")

    images = parallel_map(load_image, [path for path, _ in items], args.threads)
    if args.mask:
        masks = [load_mask(args.mask)]
    else:
        masks = parallel_map(lambda pair: _image_mask(pair[0], pair[1][0], config),
                             list(zip(images, items)), args.threads)
    vectors = extract_dataset(images, spec, masks, args.threads)
    records = [FeatureRecord(path, label, spec, vector) for (path, label), vector in zip(items, vectors)]
    write_feature_csv(args.out, records)
    print(f"wrote {len(records)} {spec.token()} rows to {args.out}")
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    from .classify import save_model, train_multiclass
    from .exporter import read_feature_csv, records_matrix

    config = _config(args, {"svm.C": args.C})
    X, labels, spec = records_matrix(read_feature_csv(args.features))
    model = train_multiclass(X, labels, config.svm.C, config.seed, feature_spec=spec, threads=args.threads)
    if model.capped_learners:
        logging.warning("%d of %d learners stopped at the epoch cap before reaching the tolerance",
                        model.capped_learners, len(model.learners))
    save_model(model, args.model_out)
    print(f"trained {len(model.learners)} learners for classes: {', '.join(model.class_names)}")
    return 0


def _print_prediction(model, name: str, prediction) -> None:
    print(f"{name}: {model.class_names[prediction.class_id]}")
    for class_name, distance in zip(model.class_names, prediction.distances):
        print(f"  {class_name}: {distance:.6f}")


def cmd_predict(args: argparse.Namespace) -> int:
    from .classify import load_model, predict
    from .exporter import read_feature_csv
    from .features import extract_dataset
    from .image_io import load_image

    config = _config(args, {"svm.decoding": _decoding(args)})
    model = load_model(args.model)
    decoding = config.svm.decoding
    if args.image:
        if model.feature_spec is None:
            raise ConfigError(f"Model {args.model} records no feature spec; predict from --features instead")
        img = load_image(args.image)
        mask = _image_mask(img, args.image, config)
        vector = extract_dataset([img], model.feature_spec, [mask])[0]
        _print_prediction(model, args.image, predict(model, vector, decoding))
        return 0

    for record in read_feature_csv(args.features):
        if model.feature_spec is not None and record.spec != model.feature_spec:
            raise ConfigError(f"{record.path} uses {record.spec.token()}, model expects {model.feature_spec.token()}")
        _print_prediction(model, record.path, predict(model, record.vector, decoding))
    return 0


def cmd_evaluate(args: argparse.Namespace) -> int:
    from .evaluation import SweepSettings, ingest, run_experiment, summarize
    from .exporter import write_report_csv
    from .settings import config_hash

    config = _config(args, {
        "evaluation.features": args.features,
        "evaluation.colorspaces": args.colorspaces,
        "evaluation.train_per_class": args.train_per_class,
        "evaluation.trials": args.trials,
        "svm.C": args.C,
        "svm.decoding": _decoding(args),
    })
    ds = ingest(args.data)
    settings = SweepSettings(seed=config.seed, kmeans=config.segmentation.kmeans(), policy=config.segmentation.selection(),
                             segment=config.segmentation.enabled, C=config.svm.C, decoding=config.svm.decoding)
    ev = config.evaluation
    report = run_experiment(ds, [config.descriptors.descriptor(kind) for kind in ev.features], list(ev.colorspaces),
                            list(ev.train_per_class), ev.trials, settings, threads=args.threads,
                            metadata={"config_hash": config_hash(config)})
    write_report_csv(args.report, report)
    for line in summarize(report):
        print(line)
    print(f"wrote {len(report.rows)} mean rows and {len(report.trials)} trial rows to {args.report}")
    return 0


def cmd_gen_dataset(args: argparse.Namespace) -> int:
    from .synthetic import generate_dataset

    config = _config(args, {})
    manifest = generate_dataset(args.out, args.per_class, args.size, args.noise, config.seed, threads=args.threads)
    total = sum(manifest["classes"].values())
    print(f"generated {total} images in {len(manifest['classes'])} classes under {args.out}")
    return 0


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Main entry point; returns the process exit code."""
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging(args.log_level, args.log_file)
    if args.threads < 1:
        parser.error("--threads must be at least 1")
    try:
        return args.handler(args)
    except FruitDiseaseError as e:
        logging.debug("Command failed", exc_info=True)
        print(f"error: {e}", file=sys.stderr)
        return e.exit_code


if __name__ == "__main__":
    sys.exit(main())
