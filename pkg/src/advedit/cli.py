"""Command line interface: ``advedit <command> ...``.

Commands
--------
dist A B        tree edit distance between the trees in files A and B
script A B      a shortest edit script turning A into B
synth           write a synthetic motif dataset
train           fit one classifier on a dataset and save it
attack          attack every correctly classified point of a dataset
eval            nested crossvalidation plus attacks, written as a CSV report
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .attacks import (
    AttackResult,
    NoReferenceError,
    ReferencePool,
    backtracing_attack,
    evaluate,
    random_attack,
    select_reference,
)
from .edits import format_script
from .harness import (
    DEFAULT_GRIDS,
    ExperimentConfig,
    SynthSpec,
    load_dataset,
    run_experiment,
    save_dataset,
    synth_generate,
)
from .models import KINDS, ClassifierHandle, RecNetClassifier, TESClassifier, fit_kernel_svm
from .models.persist import load_model, save_model
from .ted import pairwise_ted, ted
from .trees import parse

EVAL_HELP = """\
The config file is a JSON object with these keys (all optional):

  dataset       path to a JSON-lines dataset ({"tree": ..., "label": k} per line)
  synthetic     synthetic dataset fields, used when no dataset is given:
                n_examples (60), alphabet_size (6), max_depth (2),
                motif ("d(e,f)"), max_children (3), alphabet, root ("a")
  classifiers   subset of %(kinds)s (default: all)
  grids         overrides for C, sigma_factors, lam, tes_scale, tes_dim, rec_dim
                (defaults: %(grids)s)
  folds         outer crossvalidation folds (5)
  inner_folds   inner folds for hyperparameter selection (3)
  seed          master seed (0); every random draw derives from it
  attacks       {"methods": ["random", "backtrace"], "cap": 100, "targeted": false}
  normalize     normalise tree kernels to unit self-similarity (false)
  tes_ridge     ridge penalty of the echo state readout (1e-8)
  rec_max_iter  iteration cap for recursive net training (20000)

The report is CSV with header
  classifier,attack,accuracy_mean,accuracy_std,success_mean,success_std,ratio_mean,ratio_std
and a sidecar <out>.meta.json holding the seed, grids, normalisation flag,
selected hyperparameters and the aggregation conventions.
""" % {"kinds": ", ".join(KINDS), "grids": json.dumps(DEFAULT_GRIDS)}


def _read_tree(path: str):
    return parse(Path(path).read_text())


def cmd_dist(args) -> int:
    print(ted(_read_tree(args.a), _read_tree(args.b)))
    return 0


def cmd_script(args) -> int:
    from .ted import backtrace

    print(format_script(backtrace(_read_tree(args.a), _read_tree(args.b))))
    return 0


def cmd_synth(args) -> int:
    spec = SynthSpec(n_examples=args.n, alphabet_size=args.alphabet_size, max_depth=args.max_depth,
                     motif=args.motif, max_children=args.max_children, root=args.root or None)
    ds = synth_generate(spec, np.random.default_rng(args.seed))
    save_dataset(ds, args.out)
    return 0


def cmd_train(args) -> int:
    ds = load_dataset(args.data)
    rng = np.random.default_rng(args.seed)
    trees, labels = ds.trees, ds.labels
    if args.kind == "rec":
        model = RecNetClassifier.fit(trees, labels, n=args.n, rng=rng, n_classes=ds.n_classes,
                                     alphabet=ds.alphabet)
    elif args.kind == "tes":
        model = TESClassifier.fit(trees, labels, n=args.n, scale=args.scale, ridge=args.ridge,
                                  rng=rng, n_classes=ds.n_classes)
    else:
        params = {"C": args.C, "normalize": args.normalize}
        if args.kind == "rbf":
            sigma = args.sigma
            if sigma is None:
                D = pairwise_ted(trees)
                n = len(trees)
                sigma = float(D.sum() / (n * (n - 1)))
            params["sigma"] = sigma
        elif args.kind in ("st", "sst", "pt"):
            params["lam"] = args.lam
        model = fit_kernel_svm(args.kind, trees, labels, params, alphabet=ds.alphabet)
    save_model(model, args.out)
    acc = float(np.mean(model.predict_many(trees) == labels))
    print(f"training accuracy {acc:.4f}", file=sys.stderr)
    return 0


def cmd_attack(args) -> int:
    model = load_model(args.model)
    ds = load_dataset(args.data)
    pred = model.predict_many(ds.trees)
    if args.pool:
        pool_ds = load_dataset(args.pool)
        pool = ReferencePool.from_predictions(pool_ds.trees, pool_ds.labels, model.predict_many(pool_ds.trees))
    else:
        pool = ReferencePool.from_predictions(ds.trees, ds.labels, pred)
    out = open(args.out, "w") if args.out else sys.stdout
    try:
        for i, (x, y, p) in enumerate(zip(ds.trees, ds.labels, pred)):
            y = int(y)
            if int(p) != y:
                continue
            rng = np.random.default_rng(np.random.SeedSequence(args.seed, spawn_key=(i,)))
            f = ClassifierHandle(model)
            if args.method == "random":
                res = random_attack(x, f, model.alphabet, rng, cap=args.cap, label=y)
            else:
                try:
                    k = select_reference(x, y, pool)
                except NoReferenceError:
                    res = AttackResult(origin=x, method="backtrace", note="no-reference")
                else:
                    res = backtracing_attack(x, f, pool.trees[k], target=pool.labels[k])
            evaluate(res, pool, y)
            out.write(json.dumps(res.record(i)) + "\n")
    finally:
        if out is not sys.stdout:
            out.close()
    return 0


def cmd_eval(args) -> int:
    config = ExperimentConfig.from_file(args.config)
    result = run_experiment(config)
    text = result.csv()
    if args.out:
        Path(args.out).write_text(text)
        Path(args.out + ".meta.json").write_text(json.dumps(result.metadata, indent=1, sort_keys=True) + "\n")
    else:
        sys.stdout.write(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="advedit", description="Adversarial edit attacks on tree classifiers.")
    sub = p.add_subparsers(dest="command", required=True)

    for name, fn, desc in (("dist", cmd_dist, "print the tree edit distance"),
                           ("script", cmd_script, "print a shortest edit script from A to B")):
        s = sub.add_parser(name, help=desc, description=desc)
        s.add_argument("a", help="file holding the first tree")
        s.add_argument("b", help="file holding the second tree")
        s.set_defaults(func=fn)

    s = sub.add_parser("synth", help="write a synthetic motif dataset")
    s.add_argument("--out", required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--n", type=int, default=60)
    s.add_argument("--alphabet-size", type=int, default=6)
    s.add_argument("--max-depth", type=int, default=2)
    s.add_argument("--max-children", type=int, default=3)
    s.add_argument("--motif", default="d(e,f)")
    s.add_argument("--root", default="a", help="fixed root symbol; empty string for random roots")
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("train", help="fit one classifier and save it as JSON")
    s.add_argument("--kind", choices=KINDS, required=True)
    s.add_argument("--data", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--C", type=float, default=1.0)
    s.add_argument("--sigma", type=float, default=None, help="rbf bandwidth (default: mean pairwise TED)")
    s.add_argument("--lam", type=float, default=0.1)
    s.add_argument("--normalize", action="store_true")
    s.add_argument("--n", type=int, default=10, help="embedding or reservoir dimension")
    s.add_argument("--scale", type=float, default=1.0)
    s.add_argument("--ridge", type=float, default=1e-8)
    s.set_defaults(func=cmd_train)

    s = sub.add_parser(
        "attack", help="attack the correctly classified points of a dataset",
        description="Writes one JSON record per attacked point with keys origin, method, success, "
                    "prefix_length, queries, d_zx, d_zy, ratio, z, script and note.")
    s.add_argument("--method", choices=("random", "backtrace"), required=True)
    s.add_argument("--model", required=True)
    s.add_argument("--data", required=True)
    s.add_argument("--pool", default=None,
                   help="dataset of reference trees (default: the attacked dataset itself)")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--cap", type=int, default=100)
    s.add_argument("--out", default=None)
    s.set_defaults(func=cmd_attack)

    s = sub.add_parser("eval", help="run the evaluation protocol from a config file",
                       description=EVAL_HELP, formatter_class=argparse.RawDescriptionHelpFormatter)
    s.add_argument("--config", required=True)
    s.add_argument("--out", default=None, help="CSV path (default: stdout, no sidecar)")
    s.set_defaults(func=cmd_eval)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as err:
        print(f"advedit: error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
