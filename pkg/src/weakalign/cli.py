"""Command-line entry point: ``weakalign <command> [options]``.

Every command resolves its configuration as built-in defaults, then the
``--config`` JSON file, then explicit flags. The resolved configuration is
echoed to stderr as one JSON line and saved as ``<command>_config.json`` in
the output directory. Exit codes: 0 success, 1 usage or input error,
2 numeric failure, 3 failed gradient check.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import math
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable

import numpy as np

from . import matio
from .augment import STRATEGIES, distribution_from_self_distances
from .dtw import dtw_path
from .errors import NumericError, TrainingDivergedError, WeakAlignError
from .gradcheck import run_gradcheck
from .loss import LOSS_FORMS
from .s2dtw import MERGE_FIRST, SMOOTH_FIRST, S2dtwParams, path_matrix, s2dtw_backward, s2dtw_forward_delta
from .seqcore import DistanceMeasure, FeatureSequence, distance_array, self_similarity
from .synth import KINDS, ScenarioSpec, load_corpus, make_corpus, mixed_specs, save_corpus
from .trainer import (
    ABLATION_BASE,
    ABLATION_CORPUS,
    EncoderParams,
    TrainConfig,
    ablation_corpus,
    ablation_csv,
    collapse_metric,
    evaluate_retrieval,
    run_ablation,
    train,
    video_embeddings,
)

log = logging.getLogger("weakalign")

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC, EXIT_CHECK = 0, 1, 2, 3
MEASURES = tuple(m.value for m in DistanceMeasure)
ORDERS = (SMOOTH_FIRST, MERGE_FIRST)


class UsageError(Exception):
    pass


# -- typed, range-checked values (used for flags and config-file entries alike) --


def _num(kind, lo=None, hi=None, open_lo=False):
    def parse(v):
        if isinstance(v, bool):
            raise ValueError(f"expected a number, got {v!r}")
        x = kind(v)
        if kind is float and not math.isfinite(x):
            raise ValueError(f"{v!r} is not finite")
        if kind is int and isinstance(v, float) and v != int(v):
            raise ValueError(f"{v!r} is not an integer")
        if lo is not None and (x < lo or (open_lo and x == lo)):
            raise ValueError(f"{v!r} must be {'>' if open_lo else '>='} {lo}")
        if hi is not None and x > hi:
            raise ValueError(f"{v!r} must be <= {hi}")
        return x

    parse.__name__ = kind.__name__
    return parse


def _choice(options):
    def parse(v):
        if v not in options:
            raise ValueError(f"{v!r} is not one of {', '.join(options)}")
        return v

    parse.__name__ = "choice"
    return parse


def _bool(v):
    if isinstance(v, bool):
        return v
    s = str(v).lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"{v!r} is not a boolean")


def _floats(v):
    items = v if isinstance(v, list) else str(v).split(",")
    out = [_num(float, 0.0, open_lo=True)(x) for x in items]
    if not out:
        raise ValueError("empty list")
    return out


def _path(v):
    if v is None:
        return None
    return str(v)


@dataclass(frozen=True)
class Opt:
    name: str
    parse: Callable[[Any], Any]
    default: Any
    help: str = ""
    positional: bool = False


def _argparse_type(fn):
    def wrapped(s):
        try:
            return fn(s)
        except (TypeError, ValueError) as e:
            raise argparse.ArgumentTypeError(str(e)) from None

    wrapped.__name__ = fn.__name__
    return wrapped


S2DTW_OPTS = [
    Opt("gamma", _num(float, 0.0, open_lo=True), 0.1, "soft-min temperature"),
    Opt("dummy_cost", _num(float), 0.5, "cost of matching through a dummy element"),
    Opt("measure", _choice(MEASURES), MEASURES[0], "item distance"),
    Opt("order", _choice(ORDERS), SMOOTH_FIRST, "stage order inside the alignment"),
]

COMMANDS: dict[str, tuple[str, list[Opt]]] = {
    "align": (
        "align two sequences and write every intermediate matrix",
        [
            Opt("x", _path, None, "clip sequence CSV", positional=True),
            Opt("y", _path, None, "caption sequence CSV", positional=True),
            Opt("delta", _path, None, "precomputed distance matrix CSV instead of x and y"),
            Opt("variant", _choice(("s2dtw", "softdtw", "dtw")), "s2dtw", "alignment algorithm"),
            *S2DTW_OPTS,
        ],
    ),
    "gradcheck": (
        "compare analytic gradients with central finite differences",
        [
            Opt("trials", _num(int, 0), 100, "number of random instances"),
            Opt("max_side", _num(int, 1, 12), 5, "largest sequence length"),
            Opt("d", _num(int, 1), 3, "item dimension"),
            Opt("gammas", _floats, [0.1, 1.0], "comma-separated temperatures"),
            Opt("dummy_cost", _num(float), 0.5, "cost of matching through a dummy element"),
            Opt("measure", _choice(MEASURES), MEASURES[0], "item distance"),
            Opt("fault", _bool, False, "flip the sign of the analytic gradient (checker self-test)"),
        ],
    ),
    "perms": (
        "enumerate windowed permutations and their sampling probabilities",
        [
            Opt("n", _num(int, 1), 3, "sequence length"),
            Opt("w", _num(int, 0), 1, "largest displacement"),
            Opt("tau", _num(float, 0.0, open_lo=True), 0.1, "temperature"),
            Opt("strategy", _choice(STRATEGIES), "ours", "probability rule"),
            Opt("input", _path, None, "sequence CSV; random Gaussian items when absent"),
            Opt("d", _num(int, 1), 3, "item dimension of the random sequence"),
            Opt("measure", _choice(MEASURES), MEASURES[0], "item distance"),
            Opt("guard", _num(int, 1), 10_000, "enumeration limit"),
        ],
    ),
    "synth": (
        "generate a synthetic train/test corpus",
        [
            Opt("kind", _choice((*KINDS, "mixed")), "sequential", "scenario, or 'mixed' for equal shares"),
            Opt("n", _num(int, 1), 4, "clips per pair"),
            Opt("m", _num(int, 1), 4, "captions per pair"),
            Opt("d_raw", _num(int, 1), 16, "raw feature dimension"),
            Opt("latent_dim", _num(int, 1), 8, "topic dimension"),
            Opt("noise", _num(float, 0.0), 0.0, "feature noise std"),
            Opt("shift_window", _num(int, 0), 1, "displacement window of non-sequential pairs"),
            Opt("irrelevant_rate", _num(float, 0.0, 1.0), 0.25, "share of unrelated captions"),
            Opt("min_irrelevant_distance", _num(float, 0.0, 2.0), 0.0, "latent cosine margin of unrelated topics"),
            Opt("train", _num(int, 0), 32, "training pairs per scenario"),
            Opt("test", _num(int, 0), 16, "test pairs per scenario"),
        ],
    ),
    "train": (
        "train the two encoders on a corpus",
        [
            Opt("corpus", _path, None, "corpus directory or manifest"),
            Opt("ta", _bool, True, "temporal augmentation"),
            Opt("wa", _bool, True, "weak alignment"),
            Opt("ls", _bool, True, "local smoothing"),
            Opt("ta_strategy", _choice(STRATEGIES), "ours", "augmentation probability rule"),
            *S2DTW_OPTS,
            Opt("aug_w", _num(int, 0), 1, "augmentation window"),
            Opt("aug_tau", _num(float, 0.0, open_lo=True), 0.1, "augmentation temperature"),
            Opt("loss_form", _choice(LOSS_FORMS), "log_of_sum", "contrastive loss form"),
            Opt("negatives", _choice(("all", "none")), "all", "negative policy"),
            Opt("lr", _num(float, 0.0), 0.05, "learning rate"),
            Opt("steps", _num(int, 0), 500, "gradient steps"),
            Opt("batch_size", _num(int, 1), 8, "pairs per step"),
            Opt("d_emb", _num(int, 1), 8, "embedding dimension"),
            Opt("eval_every", _num(int, 0), 0, "evaluation interval, 0 for start and end only"),
        ],
    ),
    "eval": (
        "retrieval metrics and collapse for given encoders",
        [
            Opt("corpus", _path, None, "corpus directory or manifest"),
            Opt("encoders", _path, "random", "encoder directory from 'train', 'oracle' or 'random'"),
            Opt("split", _choice(("test", "train")), "test", "corpus split"),
            Opt("smoothing", _bool, True, "local smoothing"),
            Opt("weak", _bool, True, "weak alignment"),
            *S2DTW_OPTS,
            Opt("d_emb", _num(int, 1), 8, "embedding dimension of random encoders"),
        ],
    ),
    "ablate": (
        "six-row ablation over temporal augmentation, weak alignment and smoothing",
        [
            Opt("seeds", _num(int, 1), 5, "number of seeds, starting at --seed"),
            Opt("steps", _num(int, 0), ABLATION_BASE.steps, "gradient steps per run"),
            Opt("lr", _num(float, 0.0), ABLATION_BASE.lr, "learning rate"),
            Opt("gamma", _num(float, 0.0, open_lo=True), ABLATION_BASE.gamma, "temperature of rows (5)-(6)"),
            Opt("baseline_gamma", _num(float, 0.0, open_lo=True), 0.01, "temperature of rows (1)-(4)"),
            Opt("dummy_cost", _num(float), ABLATION_BASE.dummy_cost, "cost of matching through a dummy element"),
            Opt("n", _num(int, 1), ABLATION_CORPUS["n"], "sequence length"),
            Opt("noise", _num(float, 0.0), ABLATION_CORPUS["noise"], "feature noise std"),
            Opt("train_per_kind", _num(int, 1), ABLATION_CORPUS["train_per_kind"], "training pairs per scenario"),
            Opt("test_per_kind", _num(int, 1), ABLATION_CORPUS["test_per_kind"], "test pairs per scenario"),
        ],
    ),
}

GLOBAL_KEYS = ("seed", "output_dir")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="weakalign", description="Weak temporal alignment toolkit.")
    glob = _Parser(add_help=False)
    glob.add_argument("--seed", type=_argparse_type(_num(int, 0)), default=None, help="random seed (default 0)")
    glob.add_argument("--output-dir", default=None, help="directory for all outputs (default .)")
    glob.add_argument("-v", "--verbose", action="count", default=0)
    glob.add_argument("--config", default=None, help="JSON file with option values")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, (help_text, opts) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text, description=help_text, parents=[glob])
        for o in opts:
            if o.positional:
                p.add_argument(o.name, nargs="?", default=None, type=_argparse_type(o.parse), help=o.help)
            else:
                flag = "--" + o.name.replace("_", "-")
                p.add_argument(flag, dest=o.name, default=None, type=_argparse_type(o.parse), help=f"{o.help} (default {o.default})")
    return parser


def resolve_config(args: argparse.Namespace) -> dict:
    """Defaults, then the config file, then flags. Unknown file keys are rejected."""
    opts = COMMANDS[args.command][1]
    cfg: dict[str, Any] = {"seed": 0, "output_dir": "."}
    cfg.update({o.name: o.default for o in opts})
    if args.config:
        try:
            data = json.loads(Path(args.config).read_text())
        except json.JSONDecodeError as e:
            raise UsageError(f"{args.config}:{e.lineno}: invalid JSON: {e.msg}") from None
        if not isinstance(data, dict):
            raise UsageError(f"{args.config}: top level must be an object")
        parsers = {o.name: o.parse for o in opts}
        parsers["seed"] = _num(int, 0)
        parsers["output_dir"] = str
        for key, value in data.items():
            if key not in parsers:
                raise UsageError(f"{args.config}: unknown key {key!r} for command {args.command!r}")
            try:
                cfg[key] = parsers[key](value)
            except (TypeError, ValueError) as e:
                raise UsageError(f"{args.config}: bad value for {key!r}: {e}") from None
    for key in (*GLOBAL_KEYS, *(o.name for o in opts)):
        value = getattr(args, key, None)
        if value is not None:
            cfg[key] = value
    return cfg


def _s2dtw_params(cfg: dict, smoothing=True, weak=True) -> S2dtwParams:
    return S2dtwParams(
        gamma=cfg["gamma"],
        dummy_cost=cfg["dummy_cost"],
        measure=cfg["measure"],
        smoothing=smoothing,
        weak=weak,
        order=cfg["order"],
    )


def _write_json(path: Path, obj) -> None:
    matio.atomic_write_text(path, json.dumps(obj, indent=2) + "\n")


def _check_finite(name: str, a: np.ndarray) -> None:
    bad = np.argwhere(~np.isfinite(a))
    if bad.size:
        raise NumericError(f"{name}: non-finite value at {tuple(int(v) + 1 for v in bad[0])}")


# -- commands ------------------------------------------------------------------


def cmd_align(cfg: dict, out: Path) -> int:
    if cfg["delta"]:
        if cfg["x"] or cfg["y"]:
            raise UsageError("give either --delta or two sequence files, not both")
        delta = matio.read_matrix(cfg["delta"])
    else:
        if not (cfg["x"] and cfg["y"]):
            raise UsageError("align needs two sequence files or --delta")
        X = matio.read_matrix(cfg["x"])
        Y = matio.read_matrix(cfg["y"])
        if X.shape[1] != Y.shape[1]:
            raise UsageError(f"item dimensions differ: {X.shape[1]} vs {Y.shape[1]}")
        delta = distance_array(X, Y, cfg["measure"])
    _check_finite("delta", delta)
    variant = cfg["variant"]
    if variant == "dtw":
        cost, path = dtw_path(delta)
        delta_hat = delta_phi = delta
        m_hat = path.as_matrix(*delta.shape)
        heat = m_hat
        extra = {"path": [list(s) for s in path.steps]}
    else:
        params = _s2dtw_params(cfg) if variant == "s2dtw" else S2dtwParams.softdtw(cfg["gamma"], cfg["measure"])
        res = s2dtw_backward(s2dtw_forward_delta(delta, params))
        cost, delta_hat, delta_phi, m_hat = res.cost, res.delta_hat, res.dp_input, res.grad_delta
        heat = path_matrix(res)
        extra = {"params": dataclasses.asdict(params)}
    for name, a in (("delta_hat", delta_hat), ("delta_phi", delta_phi), ("m_hat", m_hat)):
        _check_finite(name, a)
    if not math.isfinite(cost):
        raise NumericError("alignment cost is not finite")
    matio.write_matrix(out / "delta.csv", delta)
    matio.write_matrix(out / "delta_hat.csv", delta_hat)
    matio.write_matrix(out / "delta_phi.csv", delta_phi)
    matio.write_matrix(out / "m_hat.csv", m_hat)
    matio.write_pgm(out / "m_hat.pgm", heat)
    result = {"variant": variant, "cost": cost, "n": int(delta.shape[0]), "m": int(delta.shape[1]), **extra}
    _write_json(out / "cost.json", result)
    print(json.dumps({"variant": variant, "cost": cost}))
    return EXIT_OK


def cmd_gradcheck(cfg: dict, out: Path) -> int:
    rep = run_gradcheck(
        trials=cfg["trials"],
        max_side=cfg["max_side"],
        d=cfg["d"],
        gammas=tuple(cfg["gammas"]),
        dummy_cost=cfg["dummy_cost"],
        measure=cfg["measure"],
        seed=cfg["seed"],
        fault=cfg["fault"],
    )
    _write_json(out / "gradcheck.json", rep.to_json())
    print(
        f"max relative error: M_hat {rep.max_delta_error:.3e}, embeddings {rep.max_embedding_error:.3e} "
        f"(tolerance {rep.tolerance:g}) -> {'PASS' if rep.passed else 'FAIL'}"
    )
    return EXIT_OK if rep.passed else EXIT_CHECK


def cmd_perms(cfg: dict, out: Path) -> int:
    if cfg["input"]:
        X = matio.read_matrix(cfg["input"])
    else:
        X = np.random.default_rng(cfg["seed"]).standard_normal((cfg["n"], cfg["d"]))
    S = self_similarity(FeatureSequence(X), cfg["measure"]).values
    dist = distribution_from_self_distances(S, cfg["w"], cfg["tau"], cfg["strategy"], cfg["guard"])
    result = {
        "n": dist.n,
        "w": dist.w,
        "tau": dist.tau,
        "perms": [list(p) for p in dist.perms],
        "probs": dist.probs.tolist(),
    }
    _write_json(out / "perms.json", result)
    print(json.dumps(result))
    return EXIT_OK


def cmd_synth(cfg: dict, out: Path) -> int:
    base = ScenarioSpec(
        kind="sequential" if cfg["kind"] == "mixed" else cfg["kind"],
        n=cfg["n"],
        m=cfg["m"],
        d_raw=cfg["d_raw"],
        latent_dim=cfg["latent_dim"],
        noise=cfg["noise"],
        shift_window=cfg["shift_window"],
        irrelevant_rate=cfg["irrelevant_rate"],
        min_irrelevant_distance=cfg["min_irrelevant_distance"],
    )
    specs = mixed_specs(base) if cfg["kind"] == "mixed" else [base]
    corpus = make_corpus(specs, [cfg["train"]] * len(specs), [cfg["test"]] * len(specs), seed=cfg["seed"])
    manifest = save_corpus(corpus, out)
    print(json.dumps({"manifest": str(manifest), "train": len(corpus.train), "test": len(corpus.test)}))
    return EXIT_OK


def _need_corpus(cfg: dict):
    if not cfg["corpus"]:
        raise UsageError("--corpus is required")
    return load_corpus(cfg["corpus"])


ENCODER_FILES = ("clip_W", "clip_b", "caption_W", "caption_b")


def save_encoders(enc: EncoderParams, out: Path) -> None:
    for name, a in zip(ENCODER_FILES, enc.arrays()):
        matio.write_matrix(out / f"{name}.csv", a)


def load_encoders(path) -> EncoderParams:
    path = Path(path)
    arrays = [matio.read_matrix(path / f"{name}.csv") for name in ENCODER_FILES]
    return EncoderParams(arrays[0], arrays[1].ravel(), arrays[2], arrays[3].ravel())


def cmd_train(cfg: dict, out: Path) -> int:
    corpus = _need_corpus(cfg)
    fields = {f.name for f in dataclasses.fields(TrainConfig)}
    config = TrainConfig(**{k: v for k, v in cfg.items() if k in fields})
    report = train(corpus, config)
    save_encoders(report.encoders, out / "encoders")
    _write_json(out / "report.json", report.to_json())
    summary = {"steps": config.steps, "initial": report.initial}
    if report.losses:
        summary["final"] = report.final
        summary["final_loss"] = report.losses[-1]
    print(json.dumps(summary))
    return EXIT_OK


def cmd_eval(cfg: dict, out: Path) -> int:
    corpus = _need_corpus(cfg)
    pairs = corpus.test if cfg["split"] == "test" else corpus.train
    if cfg["encoders"] == "oracle":
        enc = EncoderParams.oracle(corpus.maps)
    elif cfg["encoders"] == "random":
        enc = EncoderParams.init(corpus.d_raw, cfg["d_emb"], cfg["seed"])
    else:
        enc = load_encoders(cfg["encoders"])
    params = _s2dtw_params(cfg, cfg["smoothing"], cfg["weak"])
    result = evaluate_retrieval(enc, pairs, params)
    result["collapse"] = collapse_metric(video_embeddings(enc, pairs))
    result["pairs"] = len(pairs)
    _write_json(out / "eval.json", result)
    print(json.dumps(result))
    return EXIT_OK


def cmd_ablate(cfg: dict, out: Path) -> int:
    seeds = tuple(range(cfg["seed"], cfg["seed"] + cfg["seeds"]))
    base = dataclasses.replace(
        ABLATION_BASE, steps=cfg["steps"], lr=cfg["lr"], gamma=cfg["gamma"], dummy_cost=cfg["dummy_cost"]
    )

    def corpus_fn(seed):
        return ablation_corpus(seed, cfg["n"], cfg["noise"], cfg["train_per_kind"], cfg["test_per_kind"])

    rows = run_ablation(corpus_fn, base, seeds, cfg["baseline_gamma"])
    text = ablation_csv(rows)
    matio.atomic_write_text(out / "ablation.csv", text)
    _write_json(
        out / "ablation.json",
        [{k: v for k, v in r.items() if k != "reports"} for r in rows],
    )
    sys.stdout.write(text)
    return EXIT_OK


HANDLERS = {
    "align": cmd_align,
    "gradcheck": cmd_gradcheck,
    "perms": cmd_perms,
    "synth": cmd_synth,
    "train": cmd_train,
    "eval": cmd_eval,
    "ablate": cmd_ablate,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args)
        out = Path(cfg["output_dir"])
        out.mkdir(parents=True, exist_ok=True)
        echo = {"command": args.command, "config": cfg}
        sys.stderr.write(json.dumps(echo) + "\n")
        _write_json(out / f"{args.command}_config.json", echo)
        return HANDLERS[args.command](cfg, out)
    except UsageError as e:
        print(f"weakalign {args.command}: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (NumericError, TrainingDivergedError, FloatingPointError) as e:
        print(f"weakalign {args.command}: numeric failure: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    except (WeakAlignError, OSError, ValueError) as e:
        print(f"weakalign {args.command}: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
