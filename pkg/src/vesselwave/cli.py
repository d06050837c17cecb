"""Command line front end: train, segment, evaluate, loo, synth.

Options may also be supplied through a TOML file (``--config``); explicit
command line flags override file values, which override the defaults.
Dataset images must be PNG/PPM/PGM; convert JPEG/TIFF/GIF datasets first,
for example with ImageMagick: ``magick input.tif output.png``.
"""

import argparse
import sys

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .classify import load_model
from .errors import ParameterError, PipelineError
from .pipeline import RunConfig, evaluate_split, leave_one_out, segment, train
from .synth import generate_dataset

CONFIG_KEYS = (
    "root",
    "scales",
    "epsilon",
    "k0",
    "angle_step",
    "classifier",
    "k",
    "samples",
    "seed",
    "threshold",
    "border_iters",
)


def _float_list(text):
    try:
        return tuple(float(x) for x in str(text).split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _add_config_flags(parser, with_root=True):
    if with_root:
        parser.add_argument("--root", help="dataset root (images/, masks/, labels1/, labels2/)")
    parser.add_argument("--config", help="TOML file with option defaults")
    parser.add_argument("--scales", type=_float_list, help="wavelet scales, e.g. 2,3,4,6")
    parser.add_argument("--epsilon", type=float, help="envelope anisotropy (default 8)")
    parser.add_argument("--k0", type=_float_list, help="carrier frequency vector, e.g. 0,3")
    parser.add_argument("--angle-step", type=float, dest="angle_step",
                        help="orientation sweep step in degrees (default 10)")
    parser.add_argument("--classifier", choices=("gmm", "lmse"), help="classifier kind")
    parser.add_argument("--k", type=int, help="Gaussian components per class (default 20)")
    parser.add_argument("--samples", type=int, help="training pixel samples (default 1000000)")
    parser.add_argument("--seed", type=int, help="RNG seed (default 0)")
    parser.add_argument("--threshold", type=float,
                        help="decision threshold (default: 0.5 posterior / 0 score)")
    parser.add_argument("--border-iters", type=int, dest="border_iters",
                        help="border extension iterations (default 24)")


def build_parser():
    parser = argparse.ArgumentParser(prog="vesselwave", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train a classifier on a labeled split")
    _add_config_flags(p_train)
    p_train.add_argument("--model", required=True, help="output model JSON path")

    p_segment = sub.add_parser("segment", help="segment images with a trained model")
    _add_config_flags(p_segment, with_root=False)
    p_segment.add_argument("--model", required=True, help="model JSON to load")
    p_segment.add_argument("--out", required=True, help="output directory")
    p_segment.add_argument("images", nargs="+", help="image files to segment")

    p_eval = sub.add_parser("evaluate", help="ROC/accuracy over a labeled split")
    _add_config_flags(p_eval)
    p_eval.add_argument("--model", required=True, help="model JSON to load")
    p_eval.add_argument("--out", required=True, help="output directory for CSV files")

    p_loo = sub.add_parser("loo", help="leave-one-out train/test over a split")
    _add_config_flags(p_loo)
    p_loo.add_argument("--out", required=True, help="output directory for CSV files")

    p_synth = sub.add_parser("synth", help="generate a synthetic labeled dataset")
    p_synth.add_argument("--out", required=True, help="dataset root to create")
    p_synth.add_argument("--count", type=int, default=8, help="number of images")
    p_synth.add_argument("--size", type=int, default=256, help="image side in pixels")
    p_synth.add_argument("--seed", type=int, default=0, help="RNG seed")

    return parser


def _load_toml(path):
    with open(path, "rb") as fh:
        doc = tomllib.load(fh)
    unknown = set(doc) - set(CONFIG_KEYS)
    if unknown:
        raise ParameterError(f"unknown config keys in {path}: {sorted(unknown)}")
    for key in ("scales", "k0"):
        if key in doc and isinstance(doc[key], str):
            doc[key] = _float_list(doc[key])
    return doc


def make_config(args):
    values = {}
    if getattr(args, "config", None):
        values.update(_load_toml(args.config))
    for key in CONFIG_KEYS:
        arg = getattr(args, key, None)
        if arg is not None:
            values[key] = arg
    return RunConfig(**values)


def _require_root(config):
    if config.root is None:
        raise ParameterError("--root is required (or set root in the config file)")


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.command == "synth":
            stems = generate_dataset(args.out, count=args.count, size=args.size, seed=args.seed)
            print(f"wrote {len(stems)} image/label/mask triples under {args.out}")
            return 0
        config = make_config(args)
        if args.command == "train":
            _require_root(config)
            train(config, args.model)
            print(f"model written to {args.model}")
        elif args.command == "segment":
            bundle = load_model(args.model)
            written = segment(config, bundle, args.images, args.out)
            for pgm, png in written:
                print(f"{pgm}  {png}")
        elif args.command == "evaluate":
            _require_root(config)
            bundle = load_model(args.model)
            metrics = evaluate_split(config, bundle, args.out)
            for name, value in metrics.items():
                print(f"{name} = {value}")
        elif args.command == "loo":
            _require_root(config)
            metrics = leave_one_out(config, args.out)
            for name, value in metrics.items():
                print(f"{name} = {value}")
        return 0
    except PipelineError as exc:
        print(f"error [{exc.category}]: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error [io]: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
