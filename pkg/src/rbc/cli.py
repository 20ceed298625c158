"""Command-line entry point.

Every subcommand prints line-delimited JSON records. When ``--out`` names a
file, the records go there and a manifest ``<out>.manifest.json`` is written
next to it; ``rbc replay <manifest>`` reruns the recorded command and checks
that the output is byte-identical.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .bounds import (BoundsError, QDGeometry, qd_theta_min, rays_2d, rays_nd,
                     rays_qd)
from .classify import (ClassifyError, MLPModel, TrainConfig, TrainingError, evaluate,
                       nearest_centroid, repeat_runs, stratified_split, train)
from .fingerprint import Fingerprint, fingerprint, hit_report
from .geometry import ConvexPolytope, GeometryError
from .metrics import ClassParams, MetricsError, class_membership, compute_metrics
from .qd import Dataset, QDError, binary_view, gen_dataset
from .reconstruct import ReconstructionError, reconstruct_2d
from .sphere import (DirectionSet, PlacementError, SphereError, place_greedy,
                     place_uniform_circle)
from .verify import SHAPE_FAMILIES, verify_qd, verify_theorem1, verify_theorem2

# exit codes per error category
EXIT_CODES = {"check_failed": 1, "usage": 2, "io": 3, "schema": 4, "domain": 5,
              "numerical": 6}

SCHEMAS = """file formats:
  polytope     {"dim": N, "halfspaces": [{"normal": [..], "offset": r}, ...]}
  directions   {"dim": N, "phi": r|null, "seed": s|null, "directions": [[..], ...]}
  fingerprint  {"x_o": [..], "T": r, "directions_ref": {..}|path,
                "t": [r|"inf", ...], "hit_facets": [[..], ...]}
  dataset      header {"M", "T", "noise", "seed", "classes"} then one
               {"features": [..], "label": name} per line
  model        {"layer_sizes": [..], "activation": s, "weights": [..],
                "biases": [..], "seed": s}
  manifest     {"subcommand", "argv", "seeds", "inputs", "outputs", "version",
                "wall_clock"}
infinite values are written as the string "inf"."""


class CLIError(Exception):
    def __init__(self, category: str, message: str):
        super().__init__(message)
        self.category = category


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CLIError("usage", message)


def _finite(obj):
    """JSON-safe copy: non-finite floats become strings, arrays become lists."""
    if isinstance(obj, dict):
        return {str(k): _finite(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_finite(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _finite(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else ("inf" if x > 0 else "-inf" if x < 0 else "nan")
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _dumps(record) -> str:
    return json.dumps(_finite(record), sort_keys=True)


def _read_text(path: str) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise CLIError("io", f"cannot read {path}: {exc.strerror}") from None


def _read_json(path: str) -> dict:
    text = _read_text(path)
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise CLIError("schema", f"{path} is not valid JSON: {exc}") from None


def _load(path: str, loader, what: str):
    data = _read_json(path)
    try:
        return loader(data)
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, CLIError):
            raise
        raise CLIError("schema", f"{path} is not a valid {what} file: {exc}") from None


def _angle(args, value):
    return None if value is None else (math.radians(value) if args.degrees else value)


def _vector(text: str) -> np.ndarray:
    try:
        return np.array([float(v) for v in text.split(",")])
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


def _class_params(args) -> ClassParams:
    if None in (args.d, args.l, args.alpha):
        raise CLIError("usage", "--d, --l and --alpha are required")
    return ClassParams(args.dim, args.d, args.l, _angle(args, args.alpha))


# ------------------------------------------------------------ subcommands

def cmd_bounds(args):
    if args.qd_curve:
        for k in range(args.steps + 1):
            ratio = 0.5 * k / args.steps
            b = rays_qd(QDGeometry(ratio, 1.0))
            yield {"a_over_w": ratio, "theta_min": b.theta_min, "M": b.M,
                   "raw_bound": b.raw_bound}
        return
    if args.qd:
        if args.a is None or args.w is None:
            raise CLIError("usage", "--qd needs --a and --w")
        g = QDGeometry(args.a, args.w)
        b = rays_qd(g, args.aperture_detectable)
        yield {"a": args.a, "w": args.w, "a_over_w": g.ratio,
               "theta_min": qd_theta_min(g.ratio), "M": b.M, "guarantee": b.guarantee.value,
               "aperture_detectable": args.aperture_detectable}
        return
    params = _class_params(args)
    b = rays_2d(params) if params.dim == 2 else rays_nd(params)
    yield {"dim": params.dim, "theta_min": b.theta_min, "M": b.M, "phi": b.phi,
           "raw_bound": b.raw_bound, "guarantee": b.guarantee.value,
           "provenance": b.provenance}


def cmd_place(args):
    if args.uniform is not None:
        if args.dim != 2:
            raise CLIError("usage", "--uniform places rays on the circle (dim 2)")
        P = place_uniform_circle(args.uniform, _angle(args, args.offset))
        yield P.to_dict()
        return
    if args.phi is None:
        raise CLIError("usage", "place needs --phi or --uniform")
    P = place_greedy(args.dim, _angle(args, args.phi), args.seed,
                     density_probes=args.probes)
    out = P.to_dict()
    c = P.certificate
    out["certificate"] = {"probes": c.probes, "seed": c.seed, "n_uncovered": c.n_uncovered,
                          "max_observed_gap": c.max_observed_gap, "pass": c.passed}
    yield out


def cmd_metrics(args):
    P = _load(args.polytope, ConvexPolytope.from_dict, "polytope")
    m = compute_metrics(P)
    out = m.to_dict()
    if args.alpha is not None:
        params = ClassParams(P.dim, args.d, args.l, _angle(args, args.alpha))
        rep = class_membership(P, params, args.angle_rule, metrics=m)
        out["membership"] = {"member": rep.member, "criteria": rep.criteria}
    yield out


def _directions(args, dim: int) -> DirectionSet:
    if args.directions:
        return _load(args.directions, DirectionSet.from_dict, "directions")
    if args.uniform is None or dim != 2:
        raise CLIError("usage", "give --directions, or --uniform M for a planar fan")
    return place_uniform_circle(args.uniform, _angle(args, args.offset))


def cmd_fingerprint(args):
    P = _load(args.polytope, ConvexPolytope.from_dict, "polytope")
    D = _directions(args, P.dim)
    if args.x_o.size != P.dim:
        raise CLIError("usage", "--x-o dimension does not match the polytope")
    f = fingerprint(P, args.x_o, D, args.T)
    out = f.to_dict(args.directions)
    if args.report:
        rep = hit_report(f, P, args.threshold)
        out["hit_report"] = {"counts": rep.counts, "min_count": rep.min_count,
                             "facets_below": list(rep.facets_below)}
    yield out


def cmd_reconstruct(args):
    data = _read_json(args.fingerprint)
    ref = data.get("directions_ref")
    D = None
    if isinstance(ref, str):
        D = _load(args.directions or ref, DirectionSet.from_dict, "directions")
    try:
        f = Fingerprint.from_dict(data, D)
    except (KeyError, TypeError) as exc:
        raise CLIError("schema", f"bad fingerprint record: {exc}") from None
    yield reconstruct_2d(f).to_dict()


def cmd_verify(args):
    if args.check == "thm1":
        args.dim = 2
        rep = verify_theorem1(args.trials, _class_params(args), args.seed,
                              args.points, args.rays, args.workers, args.angle_rule)
    elif args.check == "thm2":
        D = _load(args.directions, DirectionSet.from_dict, "directions") \
            if args.directions else None
        rep = verify_theorem2(args.trials, args.family, args.seed, D, args.workers)
    else:
        rep = verify_qd(args.trials, args.seed, args.workers)
    args._timings = rep.timings
    args._failed = not rep.passed
    yield rep.to_dict()


def cmd_gen_qd(args):
    data = gen_dataset(args.n_per_class, args.M, args.T, args.noise,
                       args.aperture_detectable, args.seed, args.workers)
    for line in data.to_jsonl().splitlines():
        yield json.loads(line)


def _dataset(args) -> Dataset:
    data = Dataset.from_jsonl(_read_text(args.data))
    return binary_view(data) if args.view == "binary" else data


def _config(args) -> TrainConfig:
    return TrainConfig(args.epochs, args.batch_size, args.lr, args.momentum, args.seed,
                       args.train_fraction, tuple(args.hidden), args.activation)


def cmd_train(args):
    data = _dataset(args)
    cfg = _config(args)
    if args.runs > 1:
        rep = repeat_runs(args.runs, data, cfg, args.seed, args.workers)
        yield {"record": "repeat_runs", **rep.to_dict()}
        return
    tr, te = stratified_split(data.labels, cfg.train_fraction, cfg.seed)
    result = train(data.subset(tr), cfg)
    for epoch, loss in enumerate(result.loss_trace):
        yield {"record": "epoch", "epoch": epoch, "loss": loss}
    test = evaluate(result.model, data.subset(te))
    base = nearest_centroid(data.subset(tr), data.subset(te))
    yield {"record": "result", "test_accuracy": test.accuracy,
           "baseline_accuracy": base.accuracy, "confusion": test.confusion,
           "classes": test.classes, "config": cfg.to_dict()}
    if args.model_out:
        text = json.dumps(result.model.to_dict()) + "\n"
        try:
            Path(args.model_out).write_text(text)
        except OSError as exc:
            raise CLIError("io", f"cannot write {args.model_out}: {exc.strerror}") from None
        args._extra_outputs = {args.model_out: text}


def cmd_eval(args):
    m = _load(args.model, MLPModel.from_dict, "model")
    yield evaluate(m, _dataset(args)).to_dict()


def cmd_replay(args):
    man = _read_json(args.manifest)
    try:
        argv = list(man["argv"])
        expected = man["outputs"]
    except (KeyError, TypeError):
        raise CLIError("schema", "manifest lacks argv/outputs") from None
    if args.out:
        i = argv.index("--out")
        argv[i + 1] = args.out
        expected = {args.out: next(iter(expected.values()))}
    code = main(argv)
    if code not in (0, EXIT_CODES["check_failed"]):
        raise CLIError("domain", f"replayed command exited with {code}")
    for path, digest in expected.items():
        got = hashlib.sha256(Path(path).read_bytes()).hexdigest()
        yield {"path": path, "expected": digest, "actual": got, "identical": got == digest}


# ------------------------------------------------------------ parser

def _angle_flag(p):
    p.add_argument("--degrees", action="store_true", help="angles are given in degrees")


def _class_flags(p, dim=True):
    if dim:
        p.add_argument("--dim", type=int, default=2)
    p.add_argument("--d", type=float, help="diameter bound")
    p.add_argument("--l", type=float, help="face inscription bound")
    p.add_argument("--alpha", type=float, help="exterior angle bound")
    _angle_flag(p)


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="rbc", description=__doc__,
                 formatter_class=argparse.RawDescriptionHelpFormatter, epilog=SCHEMAS)
    ap.add_argument("--version", action="version", version=f"rbc {__version__}")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, fn, help_):
        p = sub.add_parser(name, help=help_, epilog=SCHEMAS,
                           formatter_class=argparse.RawDescriptionHelpFormatter)
        p.set_defaults(fn=fn)
        p.add_argument("--out", help="write records here (plus a manifest) instead of stdout")
        return p

    p = add("bounds", cmd_bounds, "ray-count bounds for a class or a QD cell")
    _class_flags(p)
    p.add_argument("--qd", action="store_true", help="quantum-dot cell bound")
    p.add_argument("--a", type=float, help="aperture (short edge length)")
    p.add_argument("--w", type=float, help="cell width")
    p.add_argument("--aperture-detectable", action="store_true")
    p.add_argument("--qd-curve", action="store_true", help="M against a/w in [0, 0.5]")
    p.add_argument("--steps", type=_positive_int, default=5)

    p = add("place", cmd_place, "greedy or evenly spaced direction sets")
    p.add_argument("--dim", type=int, default=2)
    p.add_argument("--phi", type=float, help="density radius")
    p.add_argument("--uniform", type=_positive_int, help="M evenly spaced planar rays")
    p.add_argument("--offset", type=float, default=0.0)
    p.add_argument("--seed", type=int)
    p.add_argument("--probes", type=_positive_int, default=100_000)
    _angle_flag(p)

    p = add("metrics", cmd_metrics, "diameter, face sizes, exterior angles")
    p.add_argument("--polytope", required=True)
    _class_flags(p, dim=False)
    p.add_argument("--angle-rule", choices=("sine", "max"), default="sine")

    p = add("fingerprint", cmd_fingerprint, "exit distances from one point")
    p.add_argument("--polytope", required=True)
    p.add_argument("--directions")
    p.add_argument("--uniform", type=_positive_int)
    p.add_argument("--offset", type=float, default=0.0)
    p.add_argument("--x-o", type=_vector, required=True, help="comma-separated point")
    p.add_argument("--T", type=float, default=math.inf, help="cutoff distance")
    p.add_argument("--report", action="store_true", help="add per-facet hit counts")
    p.add_argument("--threshold", type=int, default=0)
    _angle_flag(p)

    p = add("reconstruct", cmd_reconstruct, "recover a polygon from a planar fingerprint")
    p.add_argument("--fingerprint", required=True)
    p.add_argument("--directions", help="overrides a path-valued directions_ref")

    p = add("verify", cmd_verify, "randomized hit-guarantee checks")
    p.add_argument("check", choices=("thm1", "thm2", "qd"))
    p.add_argument("--trials", type=_positive_int, default=100)
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=_positive_int, default=1)
    _class_flags(p, dim=False)
    p.add_argument("--points", type=_positive_int, default=10, help="points per polygon")
    p.add_argument("--rays", type=_positive_int, help="override the ray count")
    p.add_argument("--angle-rule", choices=("sine", "max"), default="sine")
    p.add_argument("--family", choices=sorted(SHAPE_FAMILIES), default="cube3")
    p.add_argument("--directions", help="reuse a direction file for thm2")

    p = add("gen-qd", cmd_gen_qd, "synthetic QD fingerprint dataset")
    p.add_argument("--n-per-class", type=_positive_int, default=1000)
    p.add_argument("--M", type=_positive_int, default=6)
    p.add_argument("--T", type=float, default=3.0)
    p.add_argument("--noise", type=float, default=0.03)
    p.add_argument("--aperture-detectable", action="store_true")
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=_positive_int, default=1)

    for name, fn, help_ in (("train", cmd_train, "train the classifier"),
                            ("eval", cmd_eval, "score a saved model")):
        p = add(name, fn, help_)
        p.add_argument("--data", required=True)
        p.add_argument("--view", choices=("all", "binary"), default="binary",
                       help="binary: hexagon vs strip, open cells dropped")
        if name == "eval":
            p.add_argument("--model", required=True)
            continue
        p.add_argument("--model-out")
        p.add_argument("--seed", type=int)
        p.add_argument("--epochs", type=_positive_int, default=200)
        p.add_argument("--batch-size", type=_positive_int, default=32)
        p.add_argument("--lr", type=float, default=0.01)
        p.add_argument("--momentum", type=float, default=0.9)
        p.add_argument("--train-fraction", type=float, default=0.8)
        p.add_argument("--hidden", type=_positive_int, nargs="+", default=[128, 64, 32])
        p.add_argument("--activation", choices=("relu", "tanh"), default="relu")
        p.add_argument("--runs", type=_positive_int, default=1)
        p.add_argument("--workers", type=_positive_int, default=1)

    p = add("replay", cmd_replay, "rerun a manifest and compare outputs")
    p.add_argument("manifest")
    return ap


RANDOMIZED = {"verify", "gen-qd", "train"}

ERRORS = (
    (CLIError, None),
    (TrainingError, "numerical"),
    (PlacementError, "numerical"),
    ((GeometryError, MetricsError, SphereError, BoundsError, QDError, ClassifyError,
      ReconstructionError), "domain"),
)


def _manifest(args, argv, outputs, started, wall) -> dict:
    seeds = {k: getattr(args, k) for k in ("seed",) if getattr(args, k, None) is not None}
    inputs = [getattr(args, k) for k in ("polytope", "directions", "fingerprint", "data",
                                         "model", "manifest")
              if isinstance(getattr(args, k, None), str)]
    return {"subcommand": args.command, "argv": argv, "flags": _finite(
        {k: v for k, v in vars(args).items() if not k.startswith("_") and k != "fn"}),
        "seeds": seeds, "inputs": inputs,
        "outputs": {p: hashlib.sha256(t.encode()).hexdigest() for p, t in outputs.items()},
        "version": __version__, "started": started, "wall_clock": wall,
        "timings": getattr(args, "_timings", {})}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = build_parser().parse_args(argv)
        needs_seed = args.command in RANDOMIZED or (args.command == "place"
                                                    and args.uniform is None)
        if needs_seed and getattr(args, "seed", None) is None:
            raise CLIError("usage", f"{args.command} is randomized: pass --seed")
        started = time.time()
        t0 = time.perf_counter()
        lines = [_dumps(r) for r in args.fn(args)]
        text = "".join(line + "\n" for line in lines)
        if args.out:
            try:
                Path(args.out).write_text(text)
            except OSError as exc:
                raise CLIError("io", f"cannot write {args.out}: {exc.strerror}") from None
            outputs = {args.out: text, **getattr(args, "_extra_outputs", {})}
            man = _manifest(args, argv, outputs, started, time.perf_counter() - t0)
            Path(args.out + ".manifest.json").write_text(json.dumps(man, indent=1) + "\n")
        else:
            sys.stdout.write(text)
        return EXIT_CODES["check_failed"] if getattr(args, "_failed", False) else 0
    except Exception as exc:  # noqa: BLE001 - every failure becomes an error record
        category = "internal"
        for types, cat in ERRORS:
            if isinstance(exc, types):
                category = cat or exc.category
                break
        sys.stderr.write(json.dumps({"error": category, "message": str(exc)}) + "\n")
        return EXIT_CODES.get(category, 70)


if __name__ == "__main__":
    sys.exit(main())
