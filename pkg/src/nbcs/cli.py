"""Command-line interface.

Subcommands: ``train``, ``predict``, ``approx``, ``generate``, ``bench``.
All commands are deterministic given --seed (timing columns excepted).
Exit codes: 0 success, 2 usage error, 3 data error, 4 numerical failure.
``NBCS_THREADS`` sets the work-pool width for independent trials.
"""
from __future__ import annotations

import argparse
import csv
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import approx as approx_mod
from . import dataio, learner, model_io, svg
from .backend import available_backends
from .errors import DataFormatError, NbcsError
from .geometry import regular_simplex_volume
from .svm import SparseDataset, SvmConfig
from .svm import train as svm_train
from .system import NestedSystem


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("NBCS_THREADS", "1")))
    except ValueError:
        return 1


def _run_pool(tasks):
    """Run zero-argument callables, preserving order; a thread pool is used
    when NBCS_THREADS > 1 (the hot kernels release the GIL)."""
    t = _threads()
    if t == 1 or len(tasks) <= 1:
        return [task() for task in tasks]
    with ThreadPoolExecutor(max_workers=t) as pool:
        return list(pool.map(lambda f: f(), tasks))


# ---------------------------------------------------------------------------
# train

def _split_indices(n: int, frac: float, rng) -> tuple:
    perm = rng.permutation(n)
    cut = int(round(frac * n))
    return perm[:cut], perm[cut:]


def _fit_kw(args) -> dict:
    kw = {"epochs": args.epochs, "seed": args.seed}
    if args.strategy == "adaptive" and args.min_misclassified is not None:
        kw["min_misclassified"] = args.min_misclassified
    return kw


def _one_trial(args, data, test_data, trial):
    rng = np.random.default_rng(args.seed + trial)
    if test_data is not None:
        train_set, test_set = data, test_data
    else:
        tr_idx, te_idx = _split_indices(data.n, args.splits, rng)
        train_set, test_set = data.subset(tr_idx), data.subset(te_idx)
    t0 = time.perf_counter()
    C, q = args.C, args.q
    if args.cv:
        cv = learner.cross_validate(
            train_set,
            learner.CvConfig(seed=args.seed + trial),
            args.strategy,
            **_fit_kw(args),
        )
        C, q = cv.C, cv.q
    model = learner.fit(train_set, args.strategy, q, C, **_fit_kw(args))
    wall = time.perf_counter() - t0
    train_acc = learner.accuracy(model, train_set)
    test_acc = learner.accuracy(model, test_set) if test_set.n else float("nan")
    mb, vcb = learner.model_bounds(model, train_set)
    return {
        "trial": trial,
        "C": C,
        "q": q,
        "train_accuracy": train_acc,
        "test_accuracy": test_acc,
        "wall_seconds": wall,
        "margin_bound": mb,
        "vc_bound": vcb,
        "model": model,
        "n_train": train_set.n,
    }


def cmd_train(args) -> int:
    data = dataio.load_dataset(args.input, args.format)
    test_data = (
        dataio.load_dataset(args.test_input, args.format)
        if args.test_input
        else None
    )
    trials = 1 if test_data is not None else args.trials
    results = _run_pool(
        [
            (lambda t=t: _one_trial(args, data, test_data, t))
            for t in range(trials)
        ]
    )
    model_io.save_model(
        args.model_out,
        results[-1]["model"],
        meta={"dataset": os.path.basename(args.input), "seed": args.seed},
    )
    fields = [
        "dataset", "n", "d", "strategy", "C", "q", "trial", "seed",
        "train_accuracy", "test_accuracy", "wall_seconds",
        "margin_bound", "vc_bound",
    ]
    with open(args.report_out, "w", newline="") as fh:
        wr = csv.DictWriter(fh, fieldnames=fields)
        wr.writeheader()
        for r in results:
            wr.writerow({
                "dataset": os.path.basename(args.input),
                "n": r["n_train"],
                "d": data.dim,
                "strategy": args.strategy,
                "C": repr(r["C"]),
                "q": r["q"],
                "trial": r["trial"],
                "seed": args.seed,
                "train_accuracy": repr(r["train_accuracy"]),
                "test_accuracy": repr(r["test_accuracy"]),
                "wall_seconds": f"{r['wall_seconds']:.6f}",
                "margin_bound": "" if r["margin_bound"] is None else repr(r["margin_bound"]),
                "vc_bound": repr(r["vc_bound"]),
            })
        mean_test = float(np.mean([r["test_accuracy"] for r in results]))
        mean_train = float(np.mean([r["train_accuracy"] for r in results]))
        wr.writerow({
            "dataset": os.path.basename(args.input),
            "n": results[-1]["n_train"],
            "d": data.dim,
            "strategy": args.strategy,
            "C": "",
            "q": "",
            "trial": "mean",
            "seed": args.seed,
            "train_accuracy": repr(mean_train),
            "test_accuracy": repr(mean_test),
            "wall_seconds": "",
            "margin_bound": "",
            "vc_bound": "",
        })
    print(
        f"trained {args.strategy} on {args.input}: mean test accuracy "
        f"{mean_test:.4f} over {trials} trial(s); model -> {args.model_out}, "
        f"report -> {args.report_out}"
    )
    return 0


# ---------------------------------------------------------------------------
# predict

def cmd_predict(args) -> int:
    if not os.path.exists(args.model):
        raise DataFormatError(f"model file not found: {args.model}")
    model = model_io.load_model(args.model)
    data = dataio.load_dataset(args.input, args.format)
    if data.n and data.dim != model.system.dim:
        raise DataFormatError(
            f"input dimension {data.dim} does not match model dimension "
            f"{model.system.dim}"
        )
    pred = learner.predict(model, data.points) if data.n else np.empty(0, dtype=np.int64)
    with open(args.output, "w") as fh:
        for p in pred:
            fh.write(f"{int(p)}\n")
    if data.n:
        acc = float((pred == data.labels).mean())
        print(f"accuracy {repr(acc)} on {data.n} points")
    else:
        print("empty input; wrote empty predictions file")
    return 0


# ---------------------------------------------------------------------------
# approx

def cmd_approx(args) -> int:
    if args.polygon:
        poly = np.loadtxt(args.polygon, delimiter=",", ndmin=2)
    else:
        poly = approx_mod.default_pentagon()
    cfg = approx_mod.ApproxConfig(
        poly,
        stages=args.stages,
        epsilon=args.epsilon,
        max_stages=args.max_stages,
    )
    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    root_area = regular_simplex_volume(2)
    rows = []

    def on_stage(system, weights, m):
        doc = svg.render_stage(system, weights, cfg.polygon, m.stage)
        (outdir / f"stage_{m.stage:02d}.svg").write_text(doc)
        rows.append(m)

    approx_mod.approximate(cfg, on_stage=on_stage)
    with open(outdir / "metrics.csv", "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["stage", "leaves", "max_diameter", "area_ratio"])
        if not rows:
            # stage 0: nothing assigned yet, the represented region is empty
            wr.writerow([0, 1, 1.0, 0.0])
        for m in rows:
            wr.writerow([
                m.stage, m.leaves, repr(m.max_diameter),
                repr(m.excess_ratio(root_area)),
            ])
    last = rows[-1].excess_ratio(root_area) if rows else 0.0
    print(
        f"approximated polygon over {len(rows)} stage(s); final "
        f"area ratio {last:.5f}; output -> {outdir}"
    )
    return 0


# ---------------------------------------------------------------------------
# generate

def cmd_generate(args) -> int:
    data, _ = learner.generate_polytope_dataset(
        args.n, args.d, args.halfspaces, args.margin, args.seed
    )
    dataio.write_libsvm(args.output, data)
    counts = {int(c): int((data.labels == c).sum()) for c in data.classes()}
    print(f"wrote {data.n} points to {args.output} (labels: {counts})")
    return 0


# ---------------------------------------------------------------------------
# bench

def _bench_once(n, d, q, C, epochs, seed, kernels_mod):
    data, _ = learner.generate_polytope_dataset(n, d, 5, 0.0, seed)
    transform = learner.fit_transform_to_simplex(data.points)
    Xt = transform.apply(data.points)
    system = NestedSystem.regular(d)
    system._kernels = kernels_mod
    t0 = time.perf_counter()
    for _ in range(q):
        _, _, leaf = system.embed_batch(Xt)
        for node_id in np.unique(leaf):
            s = system.node_simplex(int(node_id))
            system.split(int(node_id), s.coords.mean(axis=0))
    idx, val, _ = system.embed_batch(Xt)
    t_embed = time.perf_counter() - t0
    y = np.where(data.labels > 0, 1.0, -1.0)
    ds = SparseDataset(idx, val, y, system.n_vertices)
    t1 = time.perf_counter()
    svm_train(
        ds,
        SvmConfig(C=C, epochs=epochs, seed=seed, tolerance=0.0),
        kernels=kernels_mod,
    )
    t_train = time.perf_counter() - t1
    return t_embed, t_train


def cmd_bench(args) -> int:
    ns = [int(s) for s in args.n_list.split(",")]
    backends = available_backends()
    if not args.compare_backends:
        from .backend import BACKEND_NAME

        backends = {BACKEND_NAME: backends[BACKEND_NAME]}
    rows = []
    for name, mod in backends.items():
        for n in ns:
            best = None
            for _ in range(args.repeats):
                te, tt = _bench_once(
                    n, args.d, args.q, args.C, args.epochs, args.seed, mod
                )
                tot = te + tt
                if best is None or tot < best[2]:
                    best = (te, tt, tot)
            rows.append([name, n, args.d, args.q, best[0], best[1], best[2]])
            print(
                f"{name:>7} n={n:>8} embed {best[0]:.4f}s train {best[1]:.4f}s "
                f"total {best[2]:.4f}s"
            )
    with open(args.output, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["backend", "n", "d", "q", "embed_seconds", "train_seconds", "total_seconds"])
        for r in rows:
            wr.writerow(r[:4] + [f"{v:.6f}" for v in r[4:]])
    print(f"timings -> {args.output}")
    return 0


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="nbcs", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="fit a classifier and write model + report")
    t.add_argument("--input", required=True)
    t.add_argument("--test-input", default=None,
                   help="explicit held-out set (disables internal splitting)")
    t.add_argument("--format", choices=("libsvm", "csv"), default="libsvm")
    t.add_argument("--strategy", choices=("uniform", "adaptive"), default="uniform")
    t.add_argument("--q", type=int, default=3)
    t.add_argument("--C", type=float, default=1.0)
    t.add_argument("--cv", action="store_true",
                   help="cross-validate C and q instead of using --C/--q")
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--splits", type=float, default=0.7,
                   help="train fraction for internal random splits")
    t.add_argument("--trials", type=int, default=1)
    t.add_argument("--epochs", type=int, default=50)
    t.add_argument("--min-misclassified", type=int, default=None)
    t.add_argument("--model-out", default="model.json")
    t.add_argument("--report-out", default="report.csv")
    t.set_defaults(func=cmd_train)

    pr = sub.add_parser("predict", help="predict labels with a saved model")
    pr.add_argument("--model", required=True)
    pr.add_argument("--input", required=True)
    pr.add_argument("--format", choices=("libsvm", "csv"), default="libsvm")
    pr.add_argument("--output", default="predictions.txt")
    pr.set_defaults(func=cmd_predict)

    a = sub.add_parser("approx", help="polygon approximation: SVGs + metrics")
    a.add_argument("--stages", type=int, default=4)
    a.add_argument("--epsilon", type=float, default=None,
                   help="run until area ratio < epsilon (bounded by --max-stages)")
    a.add_argument("--max-stages", type=int, default=8)
    a.add_argument("--polygon", default=None,
                   help="CSV of x,y vertices; built-in pentagon if omitted")
    a.add_argument("--outdir", default="approx_out")
    a.set_defaults(func=cmd_approx)

    g = sub.add_parser("generate", help="synthetic polytope dataset (LibSVM)")
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--d", type=int, required=True)
    g.add_argument("--halfspaces", type=int, default=5)
    g.add_argument("--margin", type=float, default=0.05)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--output", required=True)
    g.set_defaults(func=cmd_generate)

    b = sub.add_parser("bench", help="training wall-time scaling")
    b.add_argument("--n-list", default="10000,20000,40000")
    b.add_argument("--d", type=int, default=3)
    b.add_argument("--q", type=int, default=2)
    b.add_argument("--C", type=float, default=1.0)
    b.add_argument("--epochs", type=int, default=50)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--repeats", type=int, default=3)
    b.add_argument("--compare-backends", action="store_true",
                   help="time every available kernel backend")
    b.add_argument("--output", default="bench.csv")
    b.set_defaults(func=cmd_bench)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (DataFormatError, FileNotFoundError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 3
    except (NbcsError, np.linalg.LinAlgError) as e:
        print(f"numerical error: {e}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
