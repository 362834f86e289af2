"""Command-line entry point: generate | select | evaluate | report.

Settings come from an optional JSON config file with one section per
subcommand; command-line flags override file values. Unknown sections or
keys are rejected rather than ignored.

Exit codes: 0 success, 1 config or validation error, 2 I/O error,
3 training failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
import time

from . import reports
from .baseline_ksg import KsgConfig, ksg_scores
from .data import read_csv, read_sidecar, write_csv, write_sidecar, dataset_hash
from .errors import ConfigError, DataError, MinervaError, TrainingError
from .evaluate import EvalConfig, knn_r2
from .selector import TrainConfig, classify_selection, select_features
from .statnet import NetworkSpec
from .synth import ExpASpec, ExpBSpec, gen_experiment_a, gen_experiment_b

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_IO = 2
EXIT_TRAINING = 3


class _CliExit(Exception):
    def __init__(self, code: int):
        self.code = code


class _IoFailure(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad flags; our contract reserves 2 for I/O
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise _CliExit(EXIT_CONFIG)


_SECTION_KEYS = {
    "generate": {"experiment", "out", "seed", "d", "m", "n", "k0", "k1",
                 "d1", "d2", "alphas", "j_idx", "betas", "i_idx"},
    "select": {"dataset", "method", "out", "seeds",
               "learning_rate", "c1", "c2", "drift_target", "threshold",
               "batch_size", "stage1_max_steps", "stage2_max_steps",
               "patience", "eval_interval", "eval_batches", "improvement_tol",
               "clip_norm", "val_fraction",
               "hidden_width", "n_residual_blocks", "clamp_bound",
               "ksg_k", "ksg_threshold", "jitter_scale"},
    "evaluate": {"dataset", "selected", "out", "knn_k", "train_fraction", "seed"},
    "report": {"inputs", "out_csv"},
}


def _load_config(path: str | None, command: str) -> dict:
    if path is None:
        return {}
    if not os.path.exists(path):
        raise _IoFailure(f"config file not found: {path}")
    with open(path, "r", encoding="utf-8") as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: not valid JSON: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be an object")
    for section, body in raw.items():
        if section not in _SECTION_KEYS:
            raise ConfigError(f"{path}: unknown section {section!r}")
        if not isinstance(body, dict):
            raise ConfigError(f"{path}: section {section!r} must be an object")
        unknown = set(body) - _SECTION_KEYS[section]
        if unknown:
            raise ConfigError(
                f"{path}: unknown keys in section {section!r}: "
                f"{', '.join(sorted(unknown))}")
    return raw.get(command, {})


def _merge(section: dict, args: argparse.Namespace, key: str, default=None):
    """Flag beats config file beats default; flags left at None don't count."""
    flag = getattr(args, key, None)
    if flag is not None:
        return flag
    return section.get(key, default)


def _require(value, key: str):
    if value is None:
        raise ConfigError(f"missing required setting {key!r}")
    return value


def _parse_int_list(text: str, what: str) -> list[int]:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise ConfigError(f"{what}: expected comma-separated integers, got {text!r}")


def _parse_float_list(text: str, what: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise ConfigError(f"{what}: expected comma-separated numbers, got {text!r}")


def _parse_seeds(text: str) -> list[int]:
    """Accepts '4', '0,3,7', or an inclusive range '0..9'."""
    if ".." in text:
        lo_s, _, hi_s = text.partition("..")
        try:
            lo, hi = int(lo_s), int(hi_s)
        except ValueError:
            raise ConfigError(f"bad seed range {text!r}")
        if hi < lo:
            raise ConfigError(f"empty seed range {text!r}")
        return list(range(lo, hi + 1))
    return _parse_int_list(text, "seeds")


def _open_dataset(path: str):
    if not os.path.exists(path):
        raise _IoFailure(f"dataset not found: {path}")
    return read_csv(path)


# --- generate ---------------------------------------------------------------

def cmd_generate(args: argparse.Namespace) -> None:
    section = _load_config(args.config, "generate")
    experiment = _require(_merge(section, args, "experiment"), "experiment")
    experiment = experiment.upper()
    out = _require(_merge(section, args, "out"), "out")
    seed = _merge(section, args, "seed", 0)

    a_keys = {"d"}
    b_keys = {"d1", "d2", "alphas", "j_idx", "betas", "i_idx"}
    given = {k for k in a_keys | b_keys
             if getattr(args, k, None) is not None or k in section}

    if experiment == "A":
        stray = given & b_keys
        if stray:
            raise ConfigError(
                f"keys {sorted(stray)} do not apply to experiment A")
        spec = ExpASpec(
            d=_require(_merge(section, args, "d"), "d"),
            m=_require(_merge(section, args, "m"), "m"),
            n=_require(_merge(section, args, "n"), "n"),
            k0=_require(_merge(section, args, "k0"), "k0"),
            k1=_require(_merge(section, args, "k1"), "k1"),
            seed=seed)
        ds, truth = gen_experiment_a(spec)
    elif experiment == "B":
        stray = given & a_keys
        if stray:
            raise ConfigError(
                f"keys {sorted(stray)} do not apply to experiment B")
        alphas = _merge(section, args, "alphas")
        betas = _merge(section, args, "betas")
        j_idx = _merge(section, args, "j_idx")
        i_idx = _merge(section, args, "i_idx")
        if isinstance(alphas, str):
            alphas = _parse_float_list(alphas, "alphas")
        if isinstance(betas, str):
            betas = _parse_float_list(betas, "betas")
        if isinstance(j_idx, str):
            j_idx = _parse_int_list(j_idx, "j_idx")
        if isinstance(i_idx, str):
            i_idx = _parse_int_list(i_idx, "i_idx")
        spec = ExpBSpec(
            d1=_require(_merge(section, args, "d1"), "d1"),
            d2=_require(_merge(section, args, "d2"), "d2"),
            m=_require(_merge(section, args, "m"), "m"),
            n=_require(_merge(section, args, "n"), "n"),
            k0=_require(_merge(section, args, "k0"), "k0"),
            k1=_require(_merge(section, args, "k1"), "k1"),
            alphas=_require(alphas, "alphas"),
            j_idx=_require(j_idx, "j_idx"),
            betas=_require(betas, "betas"),
            i_idx=_require(i_idx, "i_idx"),
            seed=seed)
        ds, truth = gen_experiment_b(spec)
    else:
        raise ConfigError(f"experiment must be A or B, got {experiment!r}")

    digest = dataset_hash(ds)
    try:
        write_csv(ds, out)
        write_sidecar(out, {"schema_version": reports.SCHEMA_VERSION,
                            "spec": spec.to_dict(), "truth": truth,
                            "dataset_hash": digest})
    except OSError as exc:
        raise _IoFailure(f"cannot write {out}: {exc}")
    print(f"wrote {out}: {ds.n_rows} rows, {ds.n_features} features, "
          f"truth {truth}")
    print(f"dataset hash {digest}")


# --- select -----------------------------------------------------------------

def _resolve_seeds(section: dict, args: argparse.Namespace) -> list[int]:
    if args.seed is not None and args.seeds is not None:
        raise ConfigError("give either --seed or --seeds, not both")
    if args.seeds is not None:
        seeds = _parse_seeds(args.seeds)
    elif args.seed is not None:
        seeds = [args.seed]
    else:
        seeds = section.get("seeds", [0])
    if not isinstance(seeds, list) or not seeds:
        raise ConfigError("seeds must be a nonempty list")
    if any(not isinstance(s, int) or isinstance(s, bool) for s in seeds):
        raise ConfigError("seeds must be integers")
    if len(set(seeds)) != len(seeds):
        raise ConfigError("seeds must be distinct")
    return sorted(seeds)


def _select_minerva(ds, section, args, seeds):
    train_kwargs = {}
    for key in ("learning_rate", "c1", "c2", "drift_target", "threshold",
                "batch_size", "stage1_max_steps", "stage2_max_steps",
                "patience", "eval_interval", "eval_batches", "improvement_tol",
                "clip_norm", "val_fraction"):
        val = _merge(section, args, key)
        if val is not None:
            train_kwargs[key] = val
    net_kwargs = {}
    for key in ("hidden_width", "n_residual_blocks", "clamp_bound"):
        val = _merge(section, args, key)
        if val is not None:
            net_kwargs[key] = val
    spec = NetworkSpec.from_dataset(ds, **net_kwargs)

    runs, walls = [], {}
    for seed in seeds:
        config = TrainConfig(seed=seed, **train_kwargs)
        t0 = time.perf_counter()
        result = select_features(ds, spec, config)
        walls[str(seed)] = round(time.perf_counter() - t0, 3)
        runs.append({
            "seed": seed,
            "selected": result.selected,
            "weights": [float(v) for v in result.final_p],
            "mi_trace": [{"step": t.step, "mi_nats": float(t.mi_nats)}
                         for t in result.mi_trace],
            "stage1_steps": result.stage1_steps,
            "stage2_steps": result.stage2_steps,
        })
    echo = dict(train_kwargs)
    echo.pop("seed", None)
    config_echo = {"train": echo, "network": net_kwargs}
    return runs, walls, config_echo


def _select_ksg(ds, section, args, seeds):
    kwargs = {}
    for key, field in (("ksg_k", "k"), ("ksg_threshold", "threshold"),
                       ("jitter_scale", "jitter_scale")):
        val = _merge(section, args, key)
        if val is not None:
            kwargs[field] = val
    config = KsgConfig(**kwargs)

    runs, walls = [], {}
    for seed in seeds:
        t0 = time.perf_counter()
        scores = ksg_scores(ds, config, seed=seed)
        walls[str(seed)] = round(time.perf_counter() - t0, 3)
        selected = [j + 1 for j in range(ds.n_features)
                    if scores[j] > config.threshold]
        runs.append({
            "seed": seed,
            "selected": selected,
            "weights": [float(s) for s in scores],
            "mi_trace": [],
            "stage1_steps": 0,
            "stage2_steps": 0,
        })
    return runs, walls, {"ksg": dataclasses.asdict(config)}


def cmd_select(args: argparse.Namespace) -> None:
    section = _load_config(args.config, "select")
    path = _require(_merge(section, args, "dataset"), "dataset")
    method = _merge(section, args, "method", "minerva")
    out = _require(_merge(section, args, "out"), "out")
    if method not in ("minerva", "ksg"):
        raise ConfigError(f"method must be minerva or ksg, got {method!r}")
    seeds = _resolve_seeds(section, args)

    ds = _open_dataset(path)
    sidecar = read_sidecar(path)
    truth = sidecar.get("truth") if sidecar else None

    if method == "minerva":
        runs, walls, config_echo = _select_minerva(ds, section, args, seeds)
    else:
        runs, walls, config_echo = _select_ksg(ds, section, args, seeds)

    for run in runs:
        run["classification"] = (
            classify_selection(run["selected"], truth).value
            if truth is not None else None)

    report = {
        "schema_version": reports.SCHEMA_VERSION,
        "kind": "selection-report",
        "method": method,
        "dataset": reports.dataset_block(ds, path),
        "truth": truth,
        "seeds": seeds,
        "config": config_echo,
        "runs": runs,
        "meta": {"created_at": reports.now_iso(), "wall_time_s": walls},
    }
    try:
        reports.write_report(report, out)
    except OSError as exc:
        raise _IoFailure(f"cannot write {out}: {exc}")

    for run in runs:
        tag = f" {run['classification']}" if run["classification"] else ""
        mi = (f" mi={run['mi_trace'][-1]['mi_nats']:.4f}"
              if run["mi_trace"] else "")
        print(f"seed {run['seed']}: selected {run['selected']}{tag}{mi} "
              f"({walls[str(run['seed'])]:.1f}s)")
    print(f"wrote {out}")


# --- evaluate ---------------------------------------------------------------

def cmd_evaluate(args: argparse.Namespace) -> None:
    section = _load_config(args.config, "evaluate")
    path = _require(_merge(section, args, "dataset"), "dataset")
    selected = _merge(section, args, "selected")
    selected = _require(selected, "selected")
    if isinstance(selected, str):
        selected = _parse_int_list(selected, "selected")
    out = _require(_merge(section, args, "out"), "out")

    config = EvalConfig(k=_merge(section, args, "knn_k", 10),
                        train_fraction=_merge(section, args, "train_fraction", 0.8),
                        seed=_merge(section, args, "seed", 0))
    ds = _open_dataset(path)
    result = knn_r2(ds, selected, config)

    report = {
        "schema_version": reports.SCHEMA_VERSION,
        "kind": "metrics-report",
        "dataset": reports.dataset_block(ds, path),
        "selected": sorted(selected),
        "regressor": {"kind": "knn", "k": config.k,
                      "train_fraction": config.train_fraction,
                      "seed": config.seed},
        "r2_in_sample": float(result.r2_in_sample),
        "r2_out_of_sample": float(result.r2_out_of_sample),
        "n_train": result.n_train,
        "n_test": result.n_test,
        "meta": {"created_at": reports.now_iso()},
    }
    try:
        reports.write_report(report, out)
    except OSError as exc:
        raise _IoFailure(f"cannot write {out}: {exc}")
    print(f"r2 in-sample {result.r2_in_sample:.4f}, "
          f"out-of-sample {result.r2_out_of_sample:.4f} "
          f"({result.n_train} train / {result.n_test} test rows)")
    print(f"wrote {out}")


# --- report -----------------------------------------------------------------

def cmd_report(args: argparse.Namespace) -> None:
    section = _load_config(args.config, "report")
    inputs = args.inputs if args.inputs else section.get("inputs")
    if not inputs:
        raise ConfigError("no input reports given")
    out_csv = _merge(section, args, "out_csv")

    loaded = []
    for p in inputs:
        if not os.path.exists(p):
            raise _IoFailure(f"report not found: {p}")
        loaded.append(reports.read_report(p))
    rows = reports.collate(loaded)
    if out_csv:
        try:
            reports.rows_to_csv(rows, out_csv)
        except OSError as exc:
            raise _IoFailure(f"cannot write {out_csv}: {exc}")
        print(f"wrote {out_csv}")
    print(reports.rows_to_text(rows))


# --- wiring -----------------------------------------------------------------

def build_parser() -> _Parser:
    parser = _Parser(prog="minerva",
                     description="Feature selection by neural mutual information")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", help="JSON config file with per-command sections")

    g = sub.add_parser("generate", help="sample a synthetic dataset")
    add_common(g)
    g.add_argument("--experiment", choices=["A", "B", "a", "b"])
    g.add_argument("--out")
    g.add_argument("--seed", type=int)
    g.add_argument("--d", type=int)
    g.add_argument("--m", type=int)
    g.add_argument("--n", type=int)
    g.add_argument("--k0", type=int)
    g.add_argument("--k1", type=int)
    g.add_argument("--d1", type=int)
    g.add_argument("--d2", type=int)
    g.add_argument("--alphas")
    g.add_argument("--j-idx", dest="j_idx")
    g.add_argument("--betas")
    g.add_argument("--i-idx", dest="i_idx")
    g.set_defaults(func=cmd_generate)

    s = sub.add_parser("select", help="run feature selection on a dataset")
    add_common(s)
    s.add_argument("--dataset")
    s.add_argument("--method", choices=["minerva", "ksg"])
    s.add_argument("--out")
    s.add_argument("--seed", type=int)
    s.add_argument("--seeds", help="comma list or inclusive range like 0..9")
    s.add_argument("--learning-rate", dest="learning_rate", type=float)
    s.add_argument("--c1", type=float)
    s.add_argument("--c2", type=float)
    s.add_argument("--drift-target", dest="drift_target", type=float)
    s.add_argument("--threshold", type=float)
    s.add_argument("--batch-size", dest="batch_size", type=int)
    s.add_argument("--stage1-max-steps", dest="stage1_max_steps", type=int)
    s.add_argument("--stage2-max-steps", dest="stage2_max_steps", type=int)
    s.add_argument("--patience", type=int)
    s.add_argument("--eval-interval", dest="eval_interval", type=int)
    s.add_argument("--eval-batches", dest="eval_batches", type=int)
    s.add_argument("--improvement-tol", dest="improvement_tol", type=float)
    s.add_argument("--clip-norm", dest="clip_norm", type=float)
    s.add_argument("--val-fraction", dest="val_fraction", type=float)
    s.add_argument("--hidden-width", dest="hidden_width", type=int)
    s.add_argument("--n-residual-blocks", dest="n_residual_blocks", type=int)
    s.add_argument("--clamp-bound", dest="clamp_bound", type=float)
    s.add_argument("--ksg-k", dest="ksg_k", type=int)
    s.add_argument("--ksg-threshold", dest="ksg_threshold", type=float)
    s.add_argument("--jitter-scale", dest="jitter_scale", type=float)
    s.set_defaults(func=cmd_select)

    e = sub.add_parser("evaluate", help="k-NN regression quality of a feature set")
    add_common(e)
    e.add_argument("--dataset")
    e.add_argument("--selected", help="comma-separated 1-based feature indices")
    e.add_argument("--out")
    e.add_argument("--knn-k", dest="knn_k", type=int)
    e.add_argument("--train-fraction", dest="train_fraction", type=float)
    e.add_argument("--seed", type=int)
    e.set_defaults(func=cmd_evaluate)

    r = sub.add_parser("report", help="collate run reports into a table")
    add_common(r)
    r.add_argument("--inputs", nargs="+")
    r.add_argument("--out-csv", dest="out_csv")
    r.set_defaults(func=cmd_report)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        args.func(args)
        return EXIT_OK
    except _CliExit as exc:
        return exc.code
    except _IoFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except TrainingError as exc:
        print(f"training failure: {exc}", file=sys.stderr)
        return EXIT_TRAINING
    except (ConfigError, DataError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except MinervaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
