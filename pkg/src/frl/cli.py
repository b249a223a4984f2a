"""
Command-line entry point: ``frl {mine,train,sample,predict,cv,simulate}``.

Exit codes: 0 success, 2 usage error, 3 data error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .annealing import AnnealingConfig, anneal_chains
from .datasets import MAMMOGRAPHIC_CONFIG, MAMMOGRAPHIC_LABEL, mammographic_path
from .evaluation import (DEFAULT_SEGMENT_PROBS, SimulationSpec, cross_validate, edit_distance,
                         predict_proba_batch, simulate_data)
from .io import (BinarizationConfig, DataError, FittedBinarizer, ModelDocument, hyperparameters_to_dict,
                 ingest_csv, read_json, render_list, universe_from_dict, universe_to_dict, write_json)
from .mining import mine_rules
from .model import Hyperparameters
from .sampler import run_chain

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4


class UsageError(Exception):
    pass


def _csv_list(s):
    return tuple(x.strip() for x in s.split(",") if x.strip()) if s else ()


def _thresholds(s):
    """``"age:45,60;density:2"`` -> ``{"age": (45.0, 60.0), "density": (2.0,)}``."""
    out = {}
    if not s:
        return out
    for part in s.split(";"):
        name, _, vals = part.partition(":")
        if not vals:
            raise UsageError(f"bad --thresholds entry {part!r}; expected col:t1,t2")
        try:
            out[name.strip()] = tuple(float(v) for v in vals.split(","))
        except ValueError:
            raise UsageError(f"bad --thresholds entry {part!r}") from None
    return out


def parse_temperature(s: str) -> tuple[str, float, float]:
    """``const:T`` or ``geom:T0,Tf`` -> ``(schedule, t0, t_final)``."""
    kind, _, vals = s.partition(":")
    try:
        nums = [float(v) for v in vals.split(",")]
    except ValueError:
        raise UsageError(f"bad --temperature {s!r}") from None
    if kind == "const" and len(nums) == 1 and nums[0] > 0:
        return "constant", nums[0], nums[0]
    if kind == "geom" and len(nums) == 2 and all(t > 0 for t in nums):
        return "geometric", nums[0], nums[1]
    raise UsageError(f"bad --temperature {s!r}; expected const:T or geom:T0,Tf")


# --- shared argument groups -----------------------------------------------------------

def _add_data_args(p, label_required=True):
    g = p.add_argument_group("data")
    g.add_argument("--data", help="input CSV with a header row")
    g.add_argument("--label", help="binary label column" + ("" if label_required else " (optional)"))
    g.add_argument("--preset", choices=["mammographic"],
                   help="bundled dataset; supplies --data, --label and binarization")
    g.add_argument("--binarize", choices=["auto", "passthrough"], default="auto")
    g.add_argument("--categorical", default="", help="comma-separated columns to one-hot encode")
    g.add_argument("--numeric", default="", help="comma-separated columns to threshold")
    g.add_argument("--drop", default="", help="comma-separated columns to ignore")
    g.add_argument("--thresholds", default="", help="explicit thresholds, e.g. 'age:45,60;density:2'")


def _add_prior_args(p):
    g = p.add_argument_group("prior")
    d = Hyperparameters()
    g.add_argument("--lambda", dest="lambda_len", type=float, default=d.lambda_len)
    g.add_argument("--alpha-gamma", type=float, default=d.alpha_gamma)
    g.add_argument("--beta-gamma", type=float, default=d.beta_gamma)
    g.add_argument("--alpha-k", type=float, default=d.alpha_k)
    g.add_argument("--beta-k", type=float, default=d.beta_k)
    g.add_argument("--min-support", type=float, default=d.min_support)
    g.add_argument("--max-cardinality", type=int, default=d.max_cardinality)
    g.add_argument("--universe", help="rule universe file from 'mine' (overrides mining flags)")


def _add_search_args(p):
    g = p.add_argument_group("search")
    g.add_argument("--steps", type=int, default=5000)
    g.add_argument("--temperature", default="const:1", help="const:T or geom:T0,Tf")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--chains", type=int, default=1)


def _hyper(a) -> Hyperparameters:
    try:
        return Hyperparameters(a.lambda_len, a.alpha_gamma, a.beta_gamma, a.alpha_k, a.beta_k,
                               a.min_support, a.max_cardinality)
    except ValueError as e:
        raise UsageError(str(e)) from None


def _sa_config(a) -> AnnealingConfig:
    if a.steps < 0:
        raise UsageError("--steps must be >= 0")
    if a.chains < 1:
        raise UsageError("--chains must be >= 1")
    schedule, t0, tf = parse_temperature(a.temperature)
    return AnnealingConfig(a.steps, schedule, t0, tf, a.seed)


def _load_data(a, label_required=True):
    if a.preset == "mammographic":
        if a.data:
            raise UsageError("--preset and --data are mutually exclusive")
        label = a.label or MAMMOGRAPHIC_LABEL
        return ingest_csv(mammographic_path(), label, MAMMOGRAPHIC_CONFIG) + (label,)
    if not a.data:
        raise UsageError("--data is required unless --preset is given")
    if label_required and not a.label:
        raise UsageError("--label is required")
    config = BinarizationConfig(a.binarize, _csv_list(a.categorical), _csv_list(a.numeric),
                                _csv_list(a.drop), _thresholds(a.thresholds))
    return ingest_csv(a.data, a.label, config) + (a.label,)


def _universe(a, data, H):
    if a.universe:
        universe, names = universe_from_dict(read_json(a.universe))
        if tuple(names) != tuple(data.feature_names):
            raise DataError("universe feature names do not match the binarized data")
        return universe
    return mine_rules(data, H.min_support, H.max_cardinality)


def _emit(text, out):
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


# --- commands ---------------------------------------------------------------------

def cmd_mine(a):
    data, _, _ = _load_data(a)
    H = _hyper(a)
    universe = mine_rules(data, H.min_support, H.max_cardinality)
    doc = universe_to_dict(universe, data.feature_names)
    doc.update(min_support=H.min_support, max_cardinality=H.max_cardinality, n=data.n)
    _emit(json.dumps(doc, indent=2) + "\n", a.out)
    print(f"mined {len(universe)} rules from {data.n} rows", file=sys.stderr)


def cmd_train(a):
    data, binarizer, label = _load_data(a)
    H = _hyper(a)
    cfg = _sa_config(a)
    universe = _universe(a, data, H)
    res = anneal_chains(data, universe, H, cfg, a.chains)
    doc = ModelDocument.build(res.model, universe, data, H, a.seed, a.steps, res.objective, binarizer, label)
    _emit(doc.dumps(), a.out)
    print(render_list(doc), end="", file=sys.stderr if not a.out else sys.stdout)
    if a.true_model:
        truth = read_json(a.true_model)
        d = edit_distance(res.rule_indices, truth["rule_indices"])
        print(f"edit distance to true list: {d}")


def cmd_sample(a):
    data, binarizer, label = _load_data(a)
    H = _hyper(a)
    universe = _universe(a, data, H)
    if a.iters < 1 or a.thin < 1 or (a.burn_in is not None and not 0 <= a.burn_in < a.iters):
        raise UsageError("need --iters >= 1, --thin >= 1 and 0 <= --burn-in < --iters")
    res = run_chain(data, universe, H, a.iters, burn_in=a.burn_in, thin=a.thin, seed=a.seed)
    doc = {
        "format": "frl-samples", "format_version": 1,
        "universe": universe_to_dict(universe, data.feature_names),
        "hyperparameters": hyperparameters_to_dict(H),
        "seed": a.seed, "iters": a.iters, "burn_in": a.burn_in, "thin": a.thin,
        "accept_rate": res.accept_rate,
        "binarizer": binarizer.to_dict(), "label_column": label,
        "samples": [{"rule_indices": list(m.rule_indices), "gamma": list(m.gamma), "k_default": m.k_default}
                    for m in res.samples],
    }
    _emit(json.dumps(doc, indent=2) + "\n", a.out)
    print(f"{len(res.samples)} samples, MH acceptance {res.accept_rate:.3f}", file=sys.stderr)


def cmd_predict(a):
    doc = ModelDocument.from_dict(read_json(a.model))
    if doc.binarizer is None:
        raise DataError("model file has no binarizer; cannot read raw CSV")
    binarizer = FittedBinarizer.from_dict(doc.binarizer)
    from .io import read_csv_table
    header, _, _ = read_csv_table(a.data)
    label = doc.label_column if doc.label_column in header else None
    data, _ = ingest_csv(a.data, label, binarizer=binarizer)
    model, universe = doc.model()
    p = predict_proba_batch(model, universe, data.features)
    from .model import assign_segments
    from .mining import build_rule_matrix
    seg = assign_segments(build_rule_matrix(data, universe).columns, model.rule_indices)
    fh = open(a.out, "w", newline="", encoding="utf-8") if a.out else sys.stdout
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["row", "segment", "probability"])
        for i, (s, q) in enumerate(zip(seg, p)):
            w.writerow([i, int(s), repr(float(q))])
    finally:
        if a.out:
            fh.close()


def cmd_cv(a):
    data, _, _ = _load_data(a)
    H = _hyper(a)
    cfg = _sa_config(a)
    if a.k < 2 or a.k > min(int(data.labels.sum()), int((~data.labels).sum())):
        raise UsageError("--k must be at least 2 and at most the minority class count")
    report = cross_validate(data, H, a.k, cfg, seed=a.seed, chains=a.chains)
    _emit(json.dumps(report.to_dict(), indent=2) + "\n", a.out)
    print(f"AUROC {report.mean:.4f} +/- {report.std:.4f} over {a.k} folds", file=sys.stderr)


def cmd_simulate(a):
    probs = DEFAULT_SEGMENT_PROBS if a.probs is None else tuple(float(x) for x in a.probs.split(","))
    try:
        spec = SimulationSpec(a.n, a.num_rules, a.density, a.list_size, probs, a.seed)
    except ValueError as e:
        raise UsageError(str(e)) from None
    inst = simulate_data(spec)
    out = Path(a.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    names = list(inst.data.feature_names)
    with open(out / "data.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(names + ["y"])
        for row, y in zip(inst.data.features.astype(np.int8), inst.data.labels.astype(np.int8)):
            w.writerow(row.tolist() + [int(y)])
    m = inst.true_model
    write_json(out / "true_model.json", {
        "format": "frl-true-model", "format_version": 1,
        "rule_indices": list(m.rule_indices), "rules": [names[j] for j in m.rule_indices],
        "gamma": list(m.gamma), "k_default": m.k_default, "segment_probs": list(spec.segment_probs),
        "seed": a.seed,
    })
    write_json(out / "universe.json", universe_to_dict(inst.universe, names))
    print(f"wrote {out / 'data.csv'}, {out / 'true_model.json'}, {out / 'universe.json'}", file=sys.stderr)


# --- parser -------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="frl", description="Falling rule lists from binary data.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("mine", help="mine the candidate rule universe")
    _add_data_args(s)
    _add_prior_args(s)
    s.add_argument("--out", help="universe file (default stdout)")
    s.set_defaults(func=cmd_mine)

    s = sub.add_parser("train", help="MAP rule list by simulated annealing")
    _add_data_args(s)
    _add_prior_args(s)
    _add_search_args(s)
    s.add_argument("--out", help="model file (default stdout)")
    s.add_argument("--true-model", help="true_model.json from 'simulate'; prints the edit distance")
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("sample", help="posterior samples by Gibbs / Metropolis-Hastings")
    _add_data_args(s)
    _add_prior_args(s)
    s.add_argument("--iters", type=int, default=10000)
    s.add_argument("--burn-in", type=int, default=None, help="default: 20%% of --iters")
    s.add_argument("--thin", type=int, default=10)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", help="sample file (default stdout)")
    s.set_defaults(func=cmd_sample)

    s = sub.add_parser("predict", help="per-row probabilities from a model file")
    s.add_argument("--model", required=True)
    s.add_argument("--data", required=True)
    s.add_argument("--out", help="output CSV (default stdout)")
    s.set_defaults(func=cmd_predict)

    s = sub.add_parser("cv", help="stratified k-fold AUROC")
    _add_data_args(s)
    _add_prior_args(s)
    _add_search_args(s)
    s.add_argument("--k", type=int, default=5)
    s.add_argument("--out", help="report file (default stdout)")
    s.set_defaults(func=cmd_cv)

    s = sub.add_parser("simulate", help="synthetic rule matrix with a planted list")
    s.add_argument("--n", type=int, default=1000)
    s.add_argument("--num-rules", type=int, default=100)
    s.add_argument("--density", type=float, default=0.25)
    s.add_argument("--list-size", type=int, default=5)
    s.add_argument("--probs", help="comma-separated decreasing segment probabilities")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out-dir", required=True)
    s.set_defaults(func=cmd_simulate)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        a = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code) if e.code is not None else EXIT_OK
    try:
        a.func(a)
    except UsageError as e:
        print(f"frl {a.command}: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, FileNotFoundError, IndexError) as e:
        print(f"frl {a.command}: data error: {e}", file=sys.stderr)
        return EXIT_DATA
    except BrokenPipeError:
        sys.stderr.close()
        return EXIT_OK
    except (FloatingPointError, ArithmeticError) as e:
        print(f"frl {a.command}: numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
