"""Command line entry point: simulate, corrupt, learn, evaluate, benchmark."""

from __future__ import annotations

import argparse
import configparser
import csv
import hashlib
import logging
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .baselines import hc_listwise, structural_em
from .dataset import load_csv
from .graph import Dag, dag_to_cpdag, parse_edge_list, to_edge_list
from .metrics import compare_dags
from .missingness import MissingnessModel
from .search import SearchConfig, Variant, learn
from .synth import (
    GroundTruth,
    Mechanism,
    forward_sample,
    inject_missing,
    make_missingness_spec,
    random_network,
)

log = logging.getLogger("hcmiss")

ALGORITHMS = ("hc", "hc-pairwise", "hc-ipw", "hc-aipw", "hc-listwise", "sem")
METRIC_HEADER = ("f1", "precision", "recall", "shd_normalized")
RESULT_HEADER = (
    "network", "n_rows", "mechanism", "algorithm", "repeat", "seed",
    "f1", "precision", "recall", "shd", "shd_normalized", "error",
)
TIMING_HEADER = ("network", "n_rows", "mechanism", "algorithm", "repeat", "seconds")
SUMMARY_HEADER = ("n_rows", "mechanism", "algorithm", "count", "failed", "f1_mean", "f1_sd", "shd_mean", "shd_sd")


class ConfigError(ValueError):
    pass


def derive_seed(master: int, *coords) -> int:
    """Stable 63-bit seed for a grid cell."""
    h = hashlib.blake2b(repr((int(master), *coords)).encode(), digest_size=8)
    return int.from_bytes(h.digest(), "little") >> 1


def _fmt(x) -> str:
    if isinstance(x, float):
        return "nan" if math.isnan(x) else f"{x:.6f}"
    return str(x)


def _out_dir(args) -> Path:
    p = Path(args.out_dir)
    p.mkdir(parents=True, exist_ok=True)
    return p


def _search_config(args, variant: str) -> SearchConfig:
    v = variant if variant in {x.value for x in Variant} else Variant.HC
    return SearchConfig(
        variant=v,
        alpha=args.alpha,
        max_sepset=args.max_sepset,
        max_indegree=args.max_indegree,
        seed=args.seed,
    )


def run_algorithm(d, algorithm: str, cfg: SearchConfig, model: MissingnessModel | None = None):
    """Returns (dag, trace or None)."""
    if algorithm == "hc-listwise":
        return hc_listwise(d, cfg), None
    if algorithm == "sem":
        return structural_em(d, cfg), None
    return learn(d, cfg, model)


# ---------------------------------------------------------------- simulate


def _read_config(path, section: str) -> configparser.SectionProxy | dict:
    if path is None:
        return {}
    cp = configparser.ConfigParser()
    if not cp.read(path):
        raise ConfigError(f"cannot read config {path}")
    if section not in cp:
        raise ConfigError(f"config {path} has no [{section}] section")
    return cp[section]


def cmd_simulate(args) -> int:
    conf = _read_config(args.config, "network")
    try:
        n = int(args.nodes if args.nodes is not None else conf.get("nodes", 20))
        density = args.density or conf.get("density", "sparse")
        rows = int(args.rows if args.rows is not None else conf.get("rows", 1000))
        lo = int(conf.get("card_low", 2)) if args.card_low is None else args.card_low
        hi = int(conf.get("card_high", 6)) if args.card_high is None else args.card_high
        seed = args.seed if args.seed is not None else int(conf.get("seed", 0))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    if n < 2:
        raise ConfigError("a network needs at least two nodes")
    if rows < 1:
        raise ConfigError("rows must be positive")
    if density not in ("sparse", "dense"):
        raise ConfigError(f"unknown density {density!r}")
    if not 2 <= lo <= hi:
        raise ConfigError("cardinality range must satisfy 2 <= low <= high")
    gt = random_network(n, density, seed=derive_seed(seed, "network"), card_range=(lo, hi))
    gt.meta.update({"master_seed": seed, "rows": rows})
    d = forward_sample(gt, rows, seed=derive_seed(seed, "sample"))
    out = _out_dir(args)
    (out / "truth.txt").write_text(gt.to_text())
    (out / "truth.edges").write_text(to_edge_list(gt.dag))
    d.to_csv(out / "data.csv", args.missing_token)
    print(f"seed={seed} nodes={n} edges={len(gt.dag.edges)} rows={rows} out={out}")
    return 0


# ---------------------------------------------------------------- corrupt


def cmd_corrupt(args) -> int:
    d = load_csv(args.csv, args.missing_token)
    seed = args.seed if args.seed is not None else 0
    spec = make_missingness_spec(
        d, args.mechanism, seed=derive_seed(seed, "spec"), fraction=args.fraction,
        p_high=args.p_high, p_low=args.p_low,
    )
    spec.seed = seed
    dm = inject_missing(d, spec, seed=derive_seed(seed, "inject"))
    out = _out_dir(args)
    dm.to_csv(out / "corrupted.csv", args.missing_token)
    (out / "missingness.json").write_text(spec.to_json(d.names))
    rate = float(dm.missing.mean())
    print(f"seed={seed} mechanism={spec.mechanism.value} partially_observed={len(spec.partially_observed)} missing_rate={rate:.4f}")
    return 0


# ---------------------------------------------------------------- learn


def cmd_learn(args) -> int:
    d = load_csv(args.csv, args.missing_token)
    cfg = _search_config(args, args.algorithm)
    model = None
    if args.indicator_parents:
        model = MissingnessModel.from_text(Path(args.indicator_parents).read_text(), d.names)
    t0 = time.perf_counter()
    g, trace = run_algorithm(d, args.algorithm, cfg, model)
    elapsed = time.perf_counter() - t0
    out = _out_dir(args)
    (out / "dag.txt").write_text(to_edge_list(g))
    (out / "cpdag.txt").write_text(str(dag_to_cpdag(g)) + "\n")
    (out / "trace.csv").write_text(trace.to_csv() if trace is not None else "iteration,op,delta,view_size,weighted\n")
    if trace is not None and trace.model is not None:
        (out / "missingness.txt").write_text(trace.model.to_text())
        print("indicator parents:\n" + trace.model.to_text().rstrip(), file=sys.stderr)
    print(f"algorithm={args.algorithm} edges={len(g.edges)} seconds={elapsed:.2f} out={out}")
    return 0


# ---------------------------------------------------------------- evaluate


def read_dag(path, names=None) -> Dag:
    """Edge-list file, or a ground-truth file written by ``simulate``."""
    text = Path(path).read_text()
    if text.lstrip().startswith("[meta]"):
        return GroundTruth.from_text(text).dag
    return parse_edge_list(text, names)


def cmd_evaluate(args) -> int:
    truth = read_dag(args.truth)
    learned = read_dag(args.learned, truth.names)
    if set(learned.names) != set(truth.names):
        raise ValueError("learned and true DAGs are over different node sets")
    if learned.names != truth.names:
        pos = {nm: i for i, nm in enumerate(truth.names)}
        learned = Dag.from_edges(truth.names, [(pos[learned.names[a]], pos[learned.names[b]]) for a, b in learned.edges])
    m = compare_dags(learned, truth)
    w = csv.writer(sys.stdout, lineterminator="\n")
    w.writerow(METRIC_HEADER)
    w.writerow([_fmt(float(m[k])) for k in METRIC_HEADER])
    return 0


# ---------------------------------------------------------------- benchmark


@dataclass
class BenchmarkConfig:
    seed: int = 0
    nodes: int = 20
    density: str = "sparse"
    networks: int = 1
    sample_sizes: tuple[int, ...] = (1000,)
    mechanisms: tuple[str, ...] = ("mcar",)
    algorithms: tuple[str, ...] = ("hc-pairwise",)
    repeats: int = 1
    card_low: int = 2
    card_high: int = 6
    alpha: float = 0.05
    max_sepset: int = 3
    max_indegree: int | None = None
    extra: dict = field(default_factory=dict)

    @classmethod
    def from_file(cls, path) -> "BenchmarkConfig":
        sec = _read_config(path, "benchmark")
        split = lambda s: tuple(x.strip() for x in s.split(",") if x.strip())
        try:
            c = cls(
                seed=int(sec.get("seed", 0)),
                nodes=int(sec.get("nodes", 20)),
                density=sec.get("density", "sparse"),
                networks=int(sec.get("networks", 1)),
                sample_sizes=tuple(int(x) for x in split(sec.get("sample_sizes", "1000"))),
                mechanisms=split(sec.get("mechanisms", "mcar")),
                algorithms=split(sec.get("algorithms", "hc-pairwise")),
                repeats=int(sec.get("repeats", 1)),
                card_low=int(sec.get("card_low", 2)),
                card_high=int(sec.get("card_high", 6)),
                alpha=float(sec.get("alpha", 0.05)),
                max_sepset=int(sec.get("max_sepset", 3)),
                max_indegree=int(sec["max_indegree"]) if sec.get("max_indegree") else None,
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        c.validate()
        return c

    def validate(self):
        if self.nodes < 2 or self.networks < 1 or self.repeats < 1:
            raise ConfigError("nodes >= 2, networks >= 1 and repeats >= 1 are required")
        if not self.sample_sizes or min(self.sample_sizes) < 1:
            raise ConfigError("sample_sizes must be positive integers")
        for m in self.mechanisms:
            if m != "complete" and m not in {x.value for x in Mechanism}:
                raise ConfigError(f"unknown mechanism {m!r}")
        for a in self.algorithms:
            if a not in ALGORITHMS:
                raise ConfigError(f"unknown algorithm {a!r}")
        if self.density not in ("sparse", "dense"):
            raise ConfigError(f"unknown density {self.density!r}")

    def cells(self):
        for k in range(self.networks):
            for n_rows in self.sample_sizes:
                for rep in range(self.repeats):
                    for mech in self.mechanisms:
                        yield k, n_rows, rep, mech


def _run_cell(bc: BenchmarkConfig, k: int, n_rows: int, rep: int, mech: str):
    """All algorithms on one corrupted dataset; returns (result rows, timing rows)."""
    net_seed = derive_seed(bc.seed, "network", k)
    gt = random_network(bc.nodes, bc.density, seed=net_seed, card_range=(bc.card_low, bc.card_high))
    data_seed = derive_seed(bc.seed, "sample", k, n_rows, rep)
    d = forward_sample(gt, n_rows, seed=data_seed)
    seed = data_seed
    if mech != "complete":
        seed = derive_seed(bc.seed, "missing", k, n_rows, rep, mech)
        spec = make_missingness_spec(d, mech, seed=seed)
        d = inject_missing(d, spec, seed=seed)
    rows, timings = [], []
    for alg in bc.algorithms:
        cfg = SearchConfig(
            variant=alg if alg in {x.value for x in Variant} else Variant.HC,
            alpha=bc.alpha, max_sepset=bc.max_sepset, max_indegree=bc.max_indegree, seed=seed,
        )
        key = (k, n_rows, mech, alg, rep)
        t0 = time.perf_counter()
        try:
            g, _ = run_algorithm(d, alg, cfg)
            m = compare_dags(g, gt.dag)
            rows.append((*key, seed, m["f1"], m["precision"], m["recall"], m["shd"], m["shd_normalized"], ""))
        except Exception as exc:  # recorded per row, the grid keeps going
            log.warning("cell %s failed: %s", key, exc)
            nan = float("nan")
            rows.append((*key, seed, nan, nan, nan, "", nan, f"{type(exc).__name__}: {exc}"))
        timings.append((*key, time.perf_counter() - t0))
    return rows, timings


def _summarize(rows):
    groups: dict[tuple, list] = {}
    for r in rows:
        groups.setdefault((r[1], r[2], r[3]), []).append(r)
    out = []
    for (n_rows, mech, alg), rs in sorted(groups.items(), key=lambda kv: (kv[0][0], kv[0][1], ALGORITHMS.index(kv[0][2]))):
        ok = [r for r in rs if not r[11]]
        f1 = np.array([r[6] for r in ok], dtype=float)
        shd = np.array([r[10] for r in ok], dtype=float)
        sd = lambda a: float(a.std(ddof=1)) if len(a) > 1 else float("nan")
        mean = lambda a: float(a.mean()) if len(a) else float("nan")
        out.append((n_rows, mech, alg, len(rs), len(rs) - len(ok), mean(f1), sd(f1), mean(shd), sd(shd)))
    return out


def run_benchmark(bc: BenchmarkConfig, out: Path, workers: int = 1):
    cells = list(bc.cells())
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            futures = [ex.submit(_run_cell, bc, *c) for c in cells]
            results = [f.result() for f in futures]
    else:
        results = []
        for i, c in enumerate(cells):
            results.append(_run_cell(bc, *c))
            log.info("cell %d/%d done", i + 1, len(cells))
    rows = [r for res, _ in results for r in res]
    timings = [t for _, ts in results for t in ts]
    # single writer, in grid order, so output does not depend on scheduling
    with open(out / "results.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RESULT_HEADER)
        w.writerows([[_fmt(x) for x in r] for r in rows])
    with open(out / "timings.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TIMING_HEADER)
        w.writerows([[_fmt(x) for x in r] for r in timings])
    summary = _summarize(rows)
    with open(out / "summary.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SUMMARY_HEADER)
        w.writerows([[_fmt(x) for x in r] for r in summary])
    return rows, summary


def cmd_benchmark(args) -> int:
    bc = BenchmarkConfig.from_file(args.config)
    if args.seed is not None:
        bc.seed = args.seed
    out = _out_dir(args)
    rows, summary = run_benchmark(bc, out, args.workers)
    failed = sum(1 for r in rows if r[11])
    for s in summary:
        print(f"N={s[0]} {s[1]:<8} {s[2]:<12} f1={_fmt(s[5])} shd={_fmt(s[7])} (n={s[3]})")
    print(f"{len(rows)} rows, {failed} failed, written to {out}")
    return 0


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="master seed")
    common.add_argument("--missing-token", default="?", help="CSV token for a missing cell (empty cells are always missing)")
    common.add_argument("--out-dir", default=".", help="directory for output files")
    common.add_argument("-v", "--verbose", action="store_true")

    search = argparse.ArgumentParser(add_help=False)
    search.add_argument("--alpha", type=float, default=0.05, help="significance level of the indicator-parent tests")
    search.add_argument("--max-sepset", type=int, default=3)
    search.add_argument("--max-indegree", type=int, default=None)

    p = argparse.ArgumentParser(prog="hcmiss", description="Structure learning from data with missing values.")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", parents=[common], help="random network and a complete sample")
    s.add_argument("--config", help="INI file with a [network] section")
    s.add_argument("--nodes", type=int)
    s.add_argument("--density", choices=("sparse", "dense"))
    s.add_argument("--rows", type=int)
    s.add_argument("--card-low", type=int)
    s.add_argument("--card-high", type=int)
    s.set_defaults(func=cmd_simulate)

    c = sub.add_parser("corrupt", parents=[common], help="inject missing values")
    c.add_argument("csv")
    c.add_argument("--mechanism", required=True, choices=[m.value for m in Mechanism])
    c.add_argument("--fraction", type=float, default=0.5, help="share of variables made partially observed")
    c.add_argument("--p-high", type=float, default=0.6)
    c.add_argument("--p-low", type=float, default=0.1)
    c.set_defaults(func=cmd_corrupt)

    lr = sub.add_parser("learn", parents=[common, search], help="learn a DAG from a CSV")
    lr.add_argument("csv")
    lr.add_argument("--algorithm", required=True, choices=ALGORITHMS)
    lr.add_argument("--indicator-parents", help="known indicator parents (skips detection for hc-ipw/hc-aipw)")
    lr.set_defaults(func=cmd_learn)

    e = sub.add_parser("evaluate", parents=[common], help="compare a learned DAG with the truth")
    e.add_argument("learned")
    e.add_argument("truth")
    e.set_defaults(func=cmd_evaluate)

    b = sub.add_parser("benchmark", parents=[common], help="run a grid of experiments from an INI file")
    b.add_argument("config")
    b.add_argument("--workers", type=int, default=1)
    b.set_defaults(func=cmd_benchmark)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    if getattr(args, "workers", 1) < 1:
        parser.error("--workers must be at least 1")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"hcmiss {args.command}: config error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError, KeyError) as exc:
        print(f"hcmiss {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
