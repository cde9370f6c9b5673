"""Experiment execution behind the command-line subcommands.

Every output file is written to a temporary name in the target directory and
moved into place, so a crashed or parallel run never leaves half a file.
Result CSVs hold only deterministic quantities; wall-clock timings go to
separate ``timings`` files.
"""

import csv
import io
import json
import os
import statistics
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Callable, Dict, Iterable, List, Optional, Sequence

import numpy as np

from fedseca import gradvec
from fedseca.aggregator import AggregatorConfig, make_aggregator
from fedseca.attacks import AttackConfig, OmniscientView
from fedseca.bench import oracles
from fedseca.bench.config import ExperimentSpec, federation_for
from fedseca.sim import AggregationError, Federation, FederationConfig, run_experiment, summarize

COLLAPSE_FRACTION = 0.2
FAILED = "FAILED"


def fmt(v) -> str:
    """Shortest round-trip text for floats, so reruns diff byte for byte."""
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_atomic(path: str, text: str) -> None:
    d = os.path.dirname(path) or "."
    os.makedirs(d, exist_ok=True)
    tmp = f"{path}.tmp{os.getpid()}"
    with open(tmp, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)


def csv_text(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    return buf.getvalue()


def json_text(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2) + "\n"


# --- single runs -------------------------------------------------------------------


def rounds_csv(records, n_clients: int, cadence: int = 1) -> str:
    has_rho = any(r.rho is not None for r in records)
    header = ["round", "accuracy", "macro_f1", "agg_norm", "agg_digest"]
    if has_rho:
        header += [f"rho_{k + 1}" for k in range(n_clients)]
    rows = []
    for r in records:
        if r.round % cadence and r.round != len(records):
            continue
        row = [r.round, r.accuracy, r.macro_f1, r.agg_norm, r.agg_digest]
        if has_rho:
            row += list(r.rho)
        rows.append(row)
    return csv_text(header, rows)


def timings_csv(records) -> str:
    return csv_text(["round", "train_ms", "attack_ms", "agg_ms", "eval_ms"],
                    ([r.round, r.train_ms, r.attack_ms, r.agg_ms, r.eval_ms] for r in records))


def run_single(spec: ExperimentSpec, out_dir: str, log: Callable[[str], None] = print) -> int:
    """The ``run`` subcommand; returns the process exit code."""
    summary = {"seeds": list(spec.seeds), "runs": {}}
    for seed in spec.seeds:
        cfg = federation_for(spec, seed)
        try:
            records = run_experiment(cfg)
            final = summarize(records)
        except AggregationError as exc:
            log(f"error: seed {seed}: aggregation aborted in round {exc.round}: {exc.cause}")
            return 2
        except ValueError as exc:
            log(f"error: seed {seed}: {exc}")
            return 2
        write_atomic(os.path.join(out_dir, f"rounds_seed{seed}.csv"),
                     rounds_csv(records, cfg.n_clients, spec.metric_cadence))
        write_atomic(os.path.join(out_dir, f"timings_seed{seed}.csv"), timings_csv(records))
        summary["runs"][str(seed)] = final
        log(f"seed {seed}: final accuracy {final['final_accuracy']:.4f}, macro-F1 {final['final_f1']:.4f}")
    summary["defense"] = spec.federation.defense.kind
    summary["attack"] = spec.federation.attack.kind
    summary["n_clients"] = spec.federation.n_clients
    summary["n_byzantine"] = spec.federation.n_byzantine
    write_atomic(os.path.join(out_dir, "summary.json"), json_text(summary))
    return 0


# --- matrix and sweep cells -------------------------------------------------------------


@dataclass(frozen=True)
class Cell:
    defense: str
    attack: str
    seed: int
    n_byzantine: int
    cfg: FederationConfig

    @property
    def stem(self) -> str:
        return f"{self.defense}__{self.attack}__B{self.n_byzantine}__s{self.seed}"


@dataclass(frozen=True)
class CellResult:
    cell_stem: str
    final_accuracy: float
    final_f1: float
    status: str


def run_cell(cell: Cell, out_dir: str, cadence: int) -> CellResult:
    try:
        records = run_experiment(cell.cfg)
        final = summarize(records)
    except (AggregationError, ValueError, FloatingPointError) as exc:
        return CellResult(cell.stem, float("nan"), float("nan"), f"error: {exc}".replace("\n", " "))
    write_atomic(os.path.join(out_dir, "cells", cell.stem + ".csv"),
                 rounds_csv(records, cell.cfg.n_clients, cadence))
    return CellResult(cell.stem, final["final_accuracy"], final["final_f1"], "ok")


def _run_cell_args(args):
    return run_cell(*args)


def run_cells(cells: List[Cell], out_dir: str, cadence: int, jobs: int) -> List[CellResult]:
    args = [(c, out_dir, cadence) for c in cells]
    if jobs <= 1 or len(cells) <= 1:
        return [_run_cell_args(a) for a in args]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_run_cell_args, args))


def _score(res: CellResult):
    return FAILED if res.status != "ok" else res.final_f1


def matrix_cells(spec: ExperimentSpec) -> List[Cell]:
    cells = []
    base_b = spec.federation.n_byzantine
    for seed in spec.seeds:
        if spec.honest_baseline:
            cells.append(Cell("Honest", "None", seed, 0,
                              federation_for(spec, seed, defense=AggregatorConfig("FedAvg"),
                                             attack=AttackConfig("None"), n_byzantine=0)))
        for d in spec.matrix_defenses:
            for a in spec.attacks:
                b = 0 if a.kind == "None" else base_b
                cells.append(Cell(d.label, a.kind, seed, b,
                                  federation_for(spec, seed, defense=d.config, attack=a, n_byzantine=b)))
    return cells


def run_matrix(spec: ExperimentSpec, out_dir: str, jobs: int = 1, log: Callable[[str], None] = print) -> int:
    """The ``matrix`` subcommand. Failed cells get the sentinel and the run continues."""
    cells = matrix_cells(spec)
    results = run_cells(cells, out_dir, spec.metric_cadence, jobs)
    honest = {c.seed: r.final_f1 for c, r in zip(cells, results) if c.defense == "Honest" and r.status == "ok"}

    long_rows = []
    for c, r in zip(cells, results):
        ref = honest.get(c.seed)
        collapsed = "" if ref is None or r.status != "ok" else int(r.final_f1 < COLLAPSE_FRACTION * ref)
        acc = FAILED if r.status != "ok" else r.final_accuracy
        long_rows.append([c.defense, c.attack, c.seed, c.n_byzantine, acc, _score(r), collapsed, r.status,
                          f"cells/{c.stem}.csv"])
        if r.status != "ok":
            log(f"cell {c.stem}: {r.status}")
    write_atomic(os.path.join(out_dir, "results.csv"), csv_text(
        ["defense", "attack", "seed", "n_byzantine", "final_accuracy", "final_f1", "collapsed", "status",
         "rounds_csv"], long_rows))

    attacks = [a.kind for a in spec.attacks]
    wide = []
    for d in spec.matrix_defenses:
        row = [d.label]
        for a in attacks:
            vals = [r for c, r in zip(cells, results) if c.defense == d.label and c.attack == a]
            row.append(FAILED if any(v.status != "ok" for v in vals)
                       else float(np.mean([v.final_f1 for v in vals])))
        wide.append(row)
    write_atomic(os.path.join(out_dir, "matrix.csv"), csv_text(["defense"] + attacks, wide))
    write_atomic(os.path.join(out_dir, "summary.json"), json_text({
        "seeds": list(spec.seeds),
        "honest_f1": {str(k): v for k, v in sorted(honest.items())},
        "cells": len(cells),
        "failed_cells": sum(r.status != "ok" for r in results),
    }))
    log(f"matrix: {len(cells)} cells, {sum(r.status != 'ok' for r in results)} failed")
    return 0


def sweep_cells(spec: ExperimentSpec) -> List[Cell]:
    attack = spec.sweep_attack or spec.federation.attack
    return [Cell(d.label, attack.kind, seed, b,
                 federation_for(spec, seed, defense=d.config, attack=attack, n_byzantine=b))
            for b in spec.sweep_byzantine for d in spec.sweep_defenses for seed in spec.seeds]


def run_sweep(spec: ExperimentSpec, out_dir: str, jobs: int = 1, log: Callable[[str], None] = print) -> int:
    """The ``sweep-byz`` subcommand: one experiment per B, defense and seed."""
    if not spec.sweep_byzantine:
        log("error: config has no sweep.byzantine list")
        return 1
    cells = sweep_cells(spec)
    results = run_cells(cells, out_dir, spec.metric_cadence, jobs)
    write_atomic(os.path.join(out_dir, "sweep.csv"), csv_text(
        ["n_byzantine", "defense", "seed", "final_f1", "status"],
        ([c.n_byzantine, c.defense, c.seed, _score(r), r.status] for c, r in zip(cells, results))))
    labels = [d.label for d in spec.sweep_defenses]
    wide = []
    for b in spec.sweep_byzantine:
        row = [b]
        for lab in labels:
            vals = [r for c, r in zip(cells, results) if c.n_byzantine == b and c.defense == lab]
            row.append(FAILED if any(v.status != "ok" for v in vals)
                       else float(np.mean([v.final_f1 for v in vals])))
        wide.append(row)
    write_atomic(os.path.join(out_dir, "sweep_wide.csv"), csv_text(["n_byzantine"] + labels, wide))
    log(f"sweep: {len(cells)} cells, {sum(r.status != 'ok' for r in results)} failed")
    return 0


# --- timing ----------------------------------------------------------------------------


@dataclass(frozen=True)
class TimingRow:
    defense: str
    n_clients: int
    dim: int
    repeats: int
    mean_s: float
    sd_s: float
    pair_evaluations: Optional[int]


def time_aggregator(cfg, k: int, dim: int, repeats: int, seed: int) -> TimingRow:
    """Wall time of one aggregation call on a random (k, dim) input; fresh instance per repeat."""
    x = np.random.default_rng([seed, k, dim]).standard_normal((k, dim))
    times, pairs = [], None
    for _ in range(repeats):
        agg = make_aggregator(cfg, n_byzantine=max(0, (k - 3) // 2), seed=seed)
        t0 = time.perf_counter()
        agg(x)
        times.append(time.perf_counter() - t0)
        if "pair_evaluations" in agg.last_info:
            pairs = int(agg.last_info["pair_evaluations"])
    sd = statistics.stdev(times) if len(times) > 1 else 0.0
    return TimingRow(cfg.kind, k, dim, repeats, statistics.fmean(times), sd, pairs)


def run_bench(spec: ExperimentSpec, out_dir: str, log: Callable[[str], None] = print) -> Dict[str, List[TimingRow]]:
    """The ``bench`` subcommand; returns rows keyed by defense label."""
    seed = spec.seeds[0]
    rows: Dict[str, List[TimingRow]] = {}
    out = []
    for d in spec.bench_defenses:
        for k in spec.bench_k_values:
            r = time_aggregator(d.config, k, spec.bench_dim, spec.bench_repeats, seed)
            rows.setdefault(d.label, []).append(r)
            out.append([d.label, k, r.dim, r.repeats, r.mean_s, r.sd_s,
                        "" if r.pair_evaluations is None else r.pair_evaluations])
            log(f"{d.label:>14} K={k:<4} D={r.dim}: {r.mean_s * 1e3:9.2f} ms +/- {r.sd_s * 1e3:.2f}")
    write_atomic(os.path.join(out_dir, "bench.csv"), csv_text(
        ["defense", "n_clients", "dim", "repeats", "mean_s", "sd_s", "pair_evaluations"], out))
    ratio_rows = []
    for label, rs in rows.items():
        for a, b in zip(rs, rs[1:]):
            ratio_rows.append([label, a.n_clients, b.n_clients, b.mean_s / a.mean_s])
    write_atomic(os.path.join(out_dir, "bench_ratios.csv"),
                 csv_text(["defense", "k_small", "k_large", "time_ratio"], ratio_rows))
    return rows


# --- diagnostics -----------------------------------------------------------------------


DIAG_HEADER = ["subject", "CS", "PCr", "KTau", "omega", "L2H", "L2B"]


def diag_rows(cfg: FederationConfig, warmup_rounds: int = 0) -> List[list]:
    """Similarity of every Byzantine update, and of every honest update, to the honest mean."""
    fed = Federation(cfg)
    for _ in range(warmup_rounds):
        fed.run_round()
    w = fed.weights
    honest = np.stack([fed.client_update(k, w) for k in range(fed.n_honest)])
    if cfg.n_byzantine == 0 or fed.attack.kind == "None":
        byz = np.zeros((0, honest.shape[1]))
    elif fed.attack.crafts:
        view = OmniscientView(honest_grads=honest, prev_global_weights=w, prev_aggregate=fed.prev_aggregate,
                              round=fed.round + 1, defense=cfg.defense, rng=fed.attack_rng)
        byz = fed.attack.craft(view, cfg.n_byzantine)
    else:
        byz = np.stack([fed.client_update(k, w) for k in range(fed.n_honest, cfg.n_clients)])
    mu = honest.mean(axis=0)
    rows = []
    for name, group in (("byzantine", byz), ("honest", honest)):
        for i, g in enumerate(group):
            m = gradvec.pairwise_metrics(mu, g)
            rows.append([f"{name}_{i}", m.cosine, m.pearson, m.kendall_tau, m.sign_concordance, m.l2_a, m.l2_b])
    return rows


def run_diag(spec: ExperimentSpec, out_dir: str, log: Callable[[str], None] = print) -> int:
    seed = spec.seeds[0]
    rows = diag_rows(federation_for(spec, seed), spec.diag_warmup_rounds)
    write_atomic(os.path.join(out_dir, "diag.csv"), csv_text(DIAG_HEADER, rows))
    for r in rows:
        log(f"{r[0]:>12}  CS {r[1]:+.3f}  omega {r[4]:+.3f}  L2B/L2H {r[6] / r[5] if r[5] else float('nan'):.3f}")
    return 0


# --- oracle self-check -----------------------------------------------------------------


def run_oracle_check(seed: int, out_dir: Optional[str], log: Callable[[str], None] = print) -> int:
    results = oracles.run_all(seed=seed)
    for r in results:
        status = "PASS" if r.ok else "FAIL"
        log(f"{status} {r.name:<16} {r.passed}/{r.instances}  worst error {r.worst_error:.3g}"
            + ("" if r.ok else f"  first failure: {r.first_failure}"))
    if out_dir:
        write_atomic(os.path.join(out_dir, "oracle_check.csv"), csv_text(
            ["suite", "instances", "passed", "worst_error", "ok"],
            ([r.name, r.instances, r.passed, r.worst_error, int(r.ok)] for r in results)))
    return 0 if all(r.ok for r in results) else 2
