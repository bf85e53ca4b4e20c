"""
Command-line front door: synth, train, infer, eval and bench.

Every command accepts ``--config FILE`` with flat key=value lines using the
option names of that command (dashes or underscores). Flags given on the
command line override file values; unknown keys are rejected.

Exit codes: 0 success, 1 diagnostics at error severity, 2 usage or
configuration errors.
"""

import argparse
import logging
from dataclasses import replace
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Set, Tuple

import pandas as pd

from .classic import BaselineKind
from .config import (ConfigError, DataConfig, Settings, _bool, load_config_file, load_settings, parse_resolutions,
                     print_environment_summary, train_config_from, validate_settings)
from .dataset import (ArchiveError, DatasetError, build_patch_set, pair_frames, read_archive, split_dataset,
                      write_archive)
from .frames import Frame, interlace
from .metrics import (QualityReport, bench, diff_image, evaluate_sequence, frames_table, quality_table,
                      timing_table)
from .model import WeightsFileError, build_net, flop_count, load_weights, save_weights, unshared
from .pipeline import METHODS, NET_METHOD, PipelineError, deinterlace_sequence, make_deinterlacer, verify_known_rows
from .tensor import ContractViolation
from .train import TrainingError, train, write_loss_log
from .utils.frame_validator import FrameValidator, frames_or_none, validate_sequence
from .utils.image_io import ImageImportError, list_frames, write_frame
from .utils.procedural import frame_name, write_corpus
from .utils.system_info import system_snapshot

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2

BENCH_METHODS = (NET_METHOD, "net_unshared") + tuple(k.value for k in BaselineKind)

_UNSET = object()


# ----------------------------------------------------------------------
# Option types
# ----------------------------------------------------------------------

def _csv_list(text: str) -> List[str]:
    return [item.strip() for item in text.split(",") if item.strip()]


def _resolutions(text: str) -> List[Tuple[int, int]]:
    try:
        return parse_resolutions(text)
    except ConfigError as e:
        raise argparse.ArgumentTypeError(str(e))


def _resolution_text(resolutions: Sequence[Tuple[int, int]]) -> str:
    return ",".join(f"{w}x{h}" for w, h in resolutions)


def _methods(allowed: Sequence[str]) -> Callable[[str], List[str]]:
    def parse(text: str) -> List[str]:
        methods = _csv_list(text)
        unknown = [m for m in methods if m not in allowed]
        if unknown:
            raise argparse.ArgumentTypeError(f"Unknown method(s) {', '.join(unknown)}; choose from {', '.join(allowed)}")
        return methods
    return parse


# ----------------------------------------------------------------------
# Parsers
# ----------------------------------------------------------------------

class DefaultsHelpFormatter(argparse.ArgumentDefaultsHelpFormatter):
    """Appends "(default: ...)" to every option unless its help already states one."""

    def _get_help_string(self, action: argparse.Action) -> str:
        text = action.help or ""
        if not action.option_strings or action.default is argparse.SUPPRESS:
            return text
        if "%(default)" in text or "(default:" in text:
            return text
        return f"{text} (default: %(default)s)".lstrip()


def _common(parser: argparse.ArgumentParser, settings: Settings) -> None:
    parser.add_argument("--config", default=None, help="key=value file with defaults for this command")
    parser.add_argument("--threads", type=int, default=settings.threads,
                        help="worker threads, from DINW_THREADS or the CPU count")


def _add_synth(parser: argparse.ArgumentParser, settings: Settings) -> None:
    data = settings.data
    parser.add_argument("in_dir", help="progressive frames, or one subdirectory of frames per clip")
    parser.add_argument("out_dir", help="interlaced frames and ground-truth pairs are written here")
    parser.add_argument("--generate", type=int, default=0, help="first write this many procedural clips into in_dir")
    parser.add_argument("--size", type=int, default=64, help="frame size of generated clips")
    parser.add_argument("--clip-frames", type=int, default=6, help="frames per generated clip")
    parser.add_argument("--color", action="store_true", help="generate RGB clips")
    parser.add_argument("--patches", default=None, help="also write a patch archive to this path")
    parser.add_argument("--rescale", type=int, default=data.rescale,
                        help="square size frames are rescaled to before patch extraction (0 keeps the size)")
    parser.add_argument("--patch-size", type=int, default=data.patch_size, help="square patch size in pixels")
    parser.add_argument("--stride", type=int, default=data.patch_stride, help="step between patch origins")
    parser.add_argument("--bitdepth", type=int, choices=(8, 16), default=8, help="bits per sample of written PNGs")
    parser.add_argument("--seed", type=int, default=settings.seed, help="seed of the procedural clips")


def _add_train(parser: argparse.ArgumentParser, settings: Settings) -> None:
    train_defaults = settings.train
    parser.add_argument("archive", help="patch archive written by synth --patches")
    parser.add_argument("out_weights", help="weights file to write")
    parser.add_argument("--lr", dest="learning_rate", type=float, default=train_defaults.learning_rate,
                        help="ADAM learning rate")
    parser.add_argument("--lambda-tv", type=float, default=train_defaults.lambda_tv,
                        help="weight of the total-variation term")
    parser.add_argument("--epochs", type=int, default=train_defaults.epochs, help="passes over the training set")
    parser.add_argument("--batch-size", type=int, default=train_defaults.batch_size, help="triplets per ADAM step")
    parser.add_argument("--seed", type=int, default=train_defaults.seed,
                        help="seed of the initialization, split and shuffles")
    parser.add_argument("--val-fraction", type=float, default=round(1.0 - train_defaults.train_fraction, 9),
                        help="share of triplets held out for validation")
    parser.add_argument("--checkpoint", default=None, help="checkpoint file; an existing one is resumed")
    parser.add_argument("--checkpoint-every", type=int, default=train_defaults.checkpoint_every,
                        help="epochs between checkpoints")
    parser.add_argument("--loss-log", default=None, help="CSV loss log (default: <out_weights>.loss.csv)")
    parser.add_argument("--no-shared", action="store_true", help="train two separate networks instead of a shared trunk")
    parser.add_argument("--padding", choices=("replicate", "zero"), default=settings.architecture.padding,
                        help="border handling of every convolution")


def _add_infer(parser: argparse.ArgumentParser, settings: Settings) -> None:
    parser.add_argument("in_frames", help="interlaced frame or directory of frames")
    parser.add_argument("out_dir", help="reconstructed frames are written here as NNNNNN_t / NNNNNN_t1")
    parser.add_argument("--weights", default=None, help="weights file (required for --method net)")
    parser.add_argument("--method", choices=METHODS, default=NET_METHOD, help="deinterlacing method")
    parser.add_argument("--verify", action="store_true", help="check the retained fields are bit-exact")
    parser.add_argument("--bitdepth", type=int, choices=(8, 16), default=8, help="bits per sample of written PNGs")


def _add_eval(parser: argparse.ArgumentParser, settings: Settings) -> None:
    parser.add_argument("pred_dir", help="predicted frames, flat or laid out as <method>/<sequence>/")
    parser.add_argument("truth_dir", help="ground-truth frames, flat or laid out as <sequence>/")
    parser.add_argument("--method", default=None, help="method label for a flat pred_dir (default: its name)")
    parser.add_argument("--diff-dir", default=None, help="write |prediction - truth| images here")
    parser.add_argument("--csv", default=None, help="per-sequence CSV report")
    parser.add_argument("--frames-csv", default=None, help="per-frame CSV report")


def _add_bench(parser: argparse.ArgumentParser, settings: Settings) -> None:
    bench_defaults = settings.bench
    parser.add_argument("--weights", default=None, help="weights file (default: a seeded random network)")
    parser.add_argument("--resolutions", type=_resolutions, default=_resolution_text(bench_defaults.resolutions),
                        help="comma-separated WIDTHxHEIGHT list")
    parser.add_argument("--methods", type=_methods(BENCH_METHODS), default=",".join(BENCH_METHODS),
                        help="comma-separated methods to time")
    parser.add_argument("--frames", type=int, default=bench_defaults.frames, help="timed frames per resolution")
    parser.add_argument("--warmup", type=int, default=bench_defaults.warmup, help="untimed frames before timing")
    parser.add_argument("--csv", default=None, help="timing CSV report")
    parser.add_argument("--seed", type=int, default=settings.seed, help="seed of the random network and frames")


COMMANDS: Dict[str, Tuple[str, Callable[[argparse.ArgumentParser, Settings], None]]] = {
    "synth": ("synthesize interlaced frames and patch archives", _add_synth),
    "train": ("train the network on a patch archive", _add_train),
    "infer": ("deinterlace frames", _add_infer),
    "eval": ("score predictions against ground truth", _add_eval),
    "bench": ("time every method per resolution", _add_bench),
}


def command_parser(command: str, parser: Optional[argparse.ArgumentParser] = None,
                   settings: Optional[Settings] = None) -> argparse.ArgumentParser:
    """Options of one command, with defaults taken from ``settings`` (the environment when omitted)."""
    help_text, add_arguments = COMMANDS[command]
    settings = settings or load_settings()
    parser = parser or argparse.ArgumentParser(prog=f"deint {command}", description=help_text,
                                               formatter_class=DefaultsHelpFormatter)
    add_arguments(parser, settings)
    _common(parser, settings)
    return parser


def build_parser(settings: Optional[Settings] = None) -> argparse.ArgumentParser:
    settings = settings or load_settings()
    parser = argparse.ArgumentParser(prog="deint", description="Deep field deinterlacer")
    subparsers = parser.add_subparsers(dest="command", required=True)
    for name, (help_text, _) in COMMANDS.items():
        command_parser(name, subparsers.add_parser(name, help=help_text, description=help_text,
                                                   formatter_class=DefaultsHelpFormatter), settings)
    return parser


def _option_actions(command: str, settings: Optional[Settings] = None) -> Dict[str, argparse.Action]:
    """Actions keyed by destination and by every long option name (dashes as underscores)."""
    actions = {}
    for action in command_parser(command, settings=settings)._actions:
        if action.dest == "help":
            continue
        actions[action.dest] = action
        for option in action.option_strings:
            if option.startswith("--"):
                actions[option[2:].replace("-", "_")] = action
    return actions


def explicit_options(command: str, argv: Sequence[str], settings: Optional[Settings] = None) -> Set[str]:
    """Destinations set on the command line (argparse only fills defaults for absent attributes)."""
    parser = command_parser(command, settings=settings)
    dests = {a.dest for a in _option_actions(command, settings).values()}
    namespace = argparse.Namespace(**{dest: _UNSET for dest in dests})
    parser.parse_args(list(argv), namespace=namespace)
    return {dest for dest, value in vars(namespace).items() if value is not _UNSET}


def _coerce(action: argparse.Action, raw: str):
    if action.nargs == 0 and action.const is True:
        return _bool(raw, False)
    value = action.type(raw) if action.type else raw
    if action.choices is not None and value not in action.choices:
        raise ConfigError(f"{action.dest}={raw!r} is not one of {list(action.choices)}")
    return value


def resolve_run_config(command: str, args: argparse.Namespace, argv: Sequence[str],
                       settings: Optional[Settings] = None) -> argparse.Namespace:
    """
    Merge a --config file under the parsed flags.

    Raises:
        ConfigError: For unknown keys or values that do not parse
    """
    if not args.config:
        return args
    file_values = load_config_file(args.config)
    actions = _option_actions(command, settings)
    unknown = sorted(k for k in file_values if k not in actions or k == "config")
    if unknown:
        raise ConfigError(f"Unknown key(s) for {command} in {args.config}: {', '.join(unknown)}")

    explicit = explicit_options(command, argv, settings)
    merged = vars(args).copy()
    for key, raw in file_values.items():
        action = actions[key]
        if action.dest in explicit:
            continue
        try:
            merged[action.dest] = _coerce(action, raw)
        except (ValueError, argparse.ArgumentTypeError) as e:
            raise ConfigError(f"{args.config}: bad value for {key}: {e}")
    return argparse.Namespace(**merged)


# ----------------------------------------------------------------------
# Helpers
# ----------------------------------------------------------------------

def collect_sequences(directory: Path) -> Dict[str, List[Path]]:
    """Frames directly in ``directory`` form one sequence; otherwise each frame-holding subdirectory does."""
    frames = list_frames(directory)
    if frames:
        return {directory.name: frames}
    sequences = {}
    for sub in sorted(p for p in directory.iterdir() if p.is_dir()):
        sub_frames = list_frames(sub)
        if sub_frames:
            sequences[sub.name] = sub_frames
    return sequences


def _load_validated(paths: List[Path], label: str) -> Optional[List[Frame]]:
    batch = validate_sequence(paths)
    frames = frames_or_none(batch)
    if frames is None:
        print(f"❌ {label}:")
        print(FrameValidator.get_validation_summary(batch))
    return frames


# ----------------------------------------------------------------------
# Commands
# ----------------------------------------------------------------------

def cmd_synth(args: argparse.Namespace, settings: Settings) -> int:
    in_dir, out_dir = Path(args.in_dir), Path(args.out_dir)
    if args.generate:
        write_corpus(in_dir, clips=args.generate, size=(args.size, args.size), frames=args.clip_frames,
                     seed=args.seed, color=args.color)
        print(f"🎨 Generated {args.generate} procedural clips in {in_dir}")
    if not in_dir.is_dir():
        logger.error(f"Input directory {in_dir} does not exist")
        return EXIT_FAILURE

    sequences = collect_sequences(in_dir)
    if not sequences:
        logger.error(f"No frames found in {in_dir}")
        return EXIT_FAILURE

    loaded, failed = {}, False
    for name, paths in sequences.items():
        frames = _load_validated(paths, f"sequence {name}")
        failed |= frames is None
        loaded[name] = frames
    if failed:
        return EXIT_FAILURE

    all_pairs = []
    for name, frames in loaded.items():
        pairs = pair_frames(frames)
        base = out_dir / name
        for index, (frame_t, frame_t1) in enumerate(pairs):
            write_frame(base / "interlaced" / frame_name(index), interlace(frame_t, frame_t1), args.bitdepth)
            write_frame(base / "truth" / frame_name(index, "_t"), frame_t, args.bitdepth)
            write_frame(base / "truth" / frame_name(index, "_t1"), frame_t1, args.bitdepth)
        all_pairs.extend(pairs)
        logger.info(f"{name}: {len(frames)} frames -> {len(pairs)} interlaced frames")

    print(f"✅ {len(all_pairs)} interlaced frames + {len(all_pairs)} ground-truth pairs from "
          f"{len(loaded)} sequence(s) written to {out_dir}")

    if args.patches:
        data = DataConfig(patch_size=args.patch_size, patch_stride=args.stride, rescale=args.rescale)
        triplets = build_patch_set(all_pairs, data, args.threads or settings.threads)
        write_archive(args.patches, triplets)
        print(f"🧩 {len(triplets)} patch triplets written to {args.patches}")
    return EXIT_OK


def cmd_train(args: argparse.Namespace, settings: Settings) -> int:
    values = vars(args).copy()
    values["train_fraction"] = 1.0 - args.val_fraction
    config = train_config_from(values, settings.train)
    arch = replace(settings.architecture, padding=args.padding, shared=not args.no_shared)
    print_environment_summary(settings, config, arch)

    triplets = read_archive(args.archive)
    train_set, val_set = split_dataset(triplets, config.train_fraction, config.seed)
    print(f"📦 {len(triplets)} patch triplets: {len(train_set)} training, {len(val_set)} validation")

    net, report = train(train_set, val_set, config, arch, checkpoint_path=args.checkpoint,
                        resume=bool(args.checkpoint))
    save_weights(net, args.out_weights)
    loss_log = Path(args.loss_log) if args.loss_log else Path(f"{args.out_weights}.loss.csv")
    write_loss_log(report, loss_log)

    print(f"✅ Trained {net.epochs_completed} epochs, final loss {net.final_loss:.6g}")
    print(f"💾 Weights: {args.out_weights}  Loss log: {loss_log}")
    return EXIT_OK


def _load_net(path: Optional[str], settings: Settings):
    if path is None:
        return None
    return load_weights(path, settings.architecture)


def cmd_infer(args: argparse.Namespace, settings: Settings) -> int:
    if args.method == NET_METHOD and not args.weights:
        logger.error("--method net needs --weights")
        return EXIT_USAGE
    deinterlacer = make_deinterlacer(args.method, _load_net(args.weights, settings))

    source = Path(args.in_frames)
    paths = list_frames(source) if source.is_dir() else [source]
    if not paths:
        logger.error(f"No frames found in {source}")
        return EXIT_FAILURE
    frames = _load_validated(paths, f"input {source}")
    if frames is None:
        return EXIT_FAILURE

    outputs = deinterlace_sequence(frames, deinterlacer, args.threads or settings.threads)
    out_dir = Path(args.out_dir)
    violations = 0
    for index, (interlaced, (frame_t, frame_t1)) in enumerate(zip(frames, outputs)):
        if args.verify:
            for problem in verify_known_rows(interlaced, frame_t, frame_t1):
                logger.error(f"{paths[index].name}: {problem}")
                violations += 1
        write_frame(out_dir / frame_name(index, "_t"), frame_t, args.bitdepth)
        write_frame(out_dir / frame_name(index, "_t1"), frame_t1, args.bitdepth)

    print(f"✅ {len(frames)} interlaced frames -> {2 * len(frames)} frames in {out_dir} ({args.method})")
    if args.verify:
        if violations:
            print(f"❌ Retained-field check failed with {violations} problem(s)")
            return EXIT_FAILURE
        print("✅ Retained fields are bit-exact")
    return EXIT_OK


def _eval_layout(pred_dir: Path, truth_dir: Path, label: Optional[str]) -> List[Tuple[str, str, List[Path], List[Path]]]:
    """(method, sequence, predicted paths, truth paths) for a flat or nested layout."""
    flat = list_frames(pred_dir)
    if flat:
        return [(label or pred_dir.name, truth_dir.name, flat, list_frames(truth_dir))]

    jobs = []
    for method_dir in sorted(p for p in pred_dir.iterdir() if p.is_dir()):
        for seq_dir in sorted(p for p in method_dir.iterdir() if p.is_dir()):
            truth_seq = truth_dir / seq_dir.name
            if (truth_seq / "truth").is_dir():
                truth_seq = truth_seq / "truth"
            truth = list_frames(truth_seq) if truth_seq.is_dir() else []
            jobs.append((method_dir.name, seq_dir.name, list_frames(seq_dir), truth))
    return jobs


def cmd_eval(args: argparse.Namespace, settings: Settings) -> int:
    pred_dir, truth_dir = Path(args.pred_dir), Path(args.truth_dir)
    jobs = _eval_layout(pred_dir, truth_dir, args.method)
    if not jobs:
        logger.error(f"No predictions found in {pred_dir}")
        return EXIT_FAILURE

    reports: List[QualityReport] = []
    failed = False
    for method, sequence, pred_paths, truth_paths in jobs:
        if len(pred_paths) != len(truth_paths) or not pred_paths:
            logger.error(f"{method}/{sequence}: {len(pred_paths)} predicted frames vs {len(truth_paths)} ground truth")
            failed = True
            continue
        predictions = _load_validated(pred_paths, f"{method}/{sequence} predictions")
        truths = _load_validated(truth_paths, f"{sequence} ground truth")
        if predictions is None or truths is None:
            failed = True
            continue
        try:
            reports.append(evaluate_sequence(predictions, truths, method, sequence, args.threads or settings.threads))
        except ContractViolation as e:
            logger.error(f"{method}/{sequence}: {e}")
            failed = True
            continue
        if args.diff_dir:
            for path, pred, truth in zip(pred_paths, predictions, truths):
                write_frame(Path(args.diff_dir) / method / sequence / path.name, diff_image(pred, truth))

    text, rows = quality_table(reports)
    print(text)
    if args.csv:
        Path(args.csv).parent.mkdir(parents=True, exist_ok=True)
        rows.to_csv(args.csv, index=False)
        print(f"📄 Report: {args.csv}")
    if args.frames_csv:
        Path(args.frames_csv).parent.mkdir(parents=True, exist_ok=True)
        frames_table(reports).to_csv(args.frames_csv, index=False)
    return EXIT_FAILURE if failed else EXIT_OK


def cmd_bench(args: argparse.Namespace, settings: Settings) -> int:
    net = _load_net(args.weights, settings)
    if net is None and any(m.startswith(NET_METHOD) for m in args.methods):
        net = build_net(settings.architecture, seed=args.seed)
        print("ℹ️  No weights given, timing a randomly initialized network")

    nets = {}
    if net is not None:
        shared_net = net if net.shared else None
        nets = {NET_METHOD: shared_net, "net_unshared": unshared(net) if net.shared else net}

    snapshot = system_snapshot()
    logger.info(f"Machine snapshot: {snapshot}")
    print(f"🖥️  {snapshot.get('processor', 'unknown CPU')}, {snapshot.get('logical_cores', '?')} logical cores, "
          f"{snapshot.get('memory_total_gb', '?')} GB memory")

    reports = []
    for resolution in args.resolutions:
        width, height = resolution
        for method in args.methods:
            if method in nets:
                if nets[method] is None:
                    logger.warning(f"Skipping {method}: the weights file holds an unshared network")
                    continue
                run, macs = make_deinterlacer(NET_METHOD, nets[method]), flop_count(nets[method], height, width)
            else:
                run, macs = make_deinterlacer(method), None
            reports.append(bench(method, run, resolution, args.frames, args.warmup, macs, args.seed))

    text, rows = timing_table(reports)
    print(text)
    if args.csv:
        csv_path = Path(args.csv)
        csv_path.parent.mkdir(parents=True, exist_ok=True)
        rows.to_csv(csv_path, index=False)
        system_path = csv_path.with_name(f"{csv_path.stem}.system.csv")
        pd.DataFrame([{**snapshot, "pinned": all(r.pinned for r in reports)}]).to_csv(system_path, index=False)
        print(f"📄 Report: {args.csv}  Machine: {system_path}")
    return EXIT_OK


HANDLERS: Dict[str, Callable[[argparse.Namespace, Settings], int]] = {
    "synth": cmd_synth,
    "train": cmd_train,
    "infer": cmd_infer,
    "eval": cmd_eval,
    "bench": cmd_bench,
}


def run(argv: Sequence[str], settings: Optional[Settings] = None) -> int:
    """Parse ``argv`` (without the program name), run the command and return its exit code."""
    settings = settings or load_settings()
    problems = validate_settings(settings)
    if problems:
        for problem in problems:
            logger.error(f"Configuration: {problem}")
        return EXIT_USAGE

    parser = build_parser(settings)
    try:
        args = parser.parse_args(list(argv))
    except SystemExit as e:
        return EXIT_OK if e.code == 0 else EXIT_USAGE

    argv = list(argv)
    try:
        args = resolve_run_config(args.command, args, argv[argv.index(args.command) + 1:], settings)
        return HANDLERS[args.command](args, settings)
    except ConfigError as e:
        logger.error(f"Configuration error: {e}")
        return EXIT_USAGE
    except PipelineError as e:
        logger.error(str(e))
        return EXIT_USAGE
    except (ArchiveError, DatasetError, WeightsFileError, TrainingError, ImageImportError, ContractViolation) as e:
        logger.error(f"{args.command} failed: {e}")
        return EXIT_FAILURE
