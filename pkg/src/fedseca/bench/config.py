"""Experiment configuration files.

A config is a YAML mapping with these top-level sections, all optional::

    seeds: [0, 1, 2]
    output: {dir: results}
    task: {feature_dim: 20, n_classes: 4, margin: 4.0, noise: 1.0, ...}
    federation: {n_clients: 10, n_byzantine: 4, rounds: 100, ...}
    attack: {kind: IPM, params: {epsilon: 1.3}, jitter: true}
    defense: {kind: FedSECA, params: {gamma: 0.9}}
    matrix: {defenses: [...], attacks: [...]}
    sweep: {byzantine: [2, 6, 12], defenses: [...], attack: {kind: Fang}}
    bench: {k_values: [32, 64], dim: 100000, repeats: 5, defenses: [...]}
    diag: {warmup_rounds: 0}

Defense entries in lists are either a kind name or a mapping with ``kind``,
optional ``params`` and an optional display ``label``. Any key not listed in
the tables below is rejected, and the error names the offending field and
its line.
"""

import dataclasses
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

import yaml

from fedseca.aggregator import AGGREGATOR_KINDS, AggregatorConfig
from fedseca.attacks import ATTACK_KINDS, AttackConfig
from fedseca.sim import FederationConfig, SyntheticTask


class ConfigError(ValueError):
    """Invalid configuration; ``field`` is a dotted path, ``line`` is 1-based or None."""

    def __init__(self, message: str, field: str = "", line: Optional[int] = None):
        where = field or "<root>"
        if line is not None:
            where += f" (line {line})"
        super().__init__(f"{where}: {message}")
        self.field = field
        self.line = line


TASK_KEYS = {f.name for f in dataclasses.fields(SyntheticTask)}
FEDERATION_KEYS = {f.name for f in dataclasses.fields(FederationConfig)} - {"attack", "defense", "task", "seed"}
SECTION_KEYS = {
    "seeds", "output", "task", "federation", "attack", "defense", "matrix", "sweep", "bench", "diag",
}
OUTPUT_KEYS = {"dir", "metric_cadence"}
ATTACK_KEYS = {"kind", "params", "jitter"}
DEFENSE_KEYS = {"kind", "params", "label"}
MATRIX_KEYS = {"defenses", "attacks", "honest_baseline"}
SWEEP_KEYS = {"byzantine", "defenses", "attack"}
BENCH_KEYS = {"k_values", "dim", "repeats", "defenses"}
DIAG_KEYS = {"warmup_rounds"}


@dataclass(frozen=True)
class DefenseSpec:
    label: str
    config: AggregatorConfig


@dataclass
class ExperimentSpec:
    federation: FederationConfig
    seeds: List[int] = field(default_factory=lambda: [0])
    out_dir: str = "results"
    metric_cadence: int = 1
    matrix_defenses: List[DefenseSpec] = field(default_factory=list)
    sweep_defenses: List[DefenseSpec] = field(default_factory=list)
    bench_defenses: List[DefenseSpec] = field(default_factory=list)
    attacks: List[AttackConfig] = field(default_factory=list)
    honest_baseline: bool = True
    sweep_byzantine: List[int] = field(default_factory=list)
    sweep_attack: Optional[AttackConfig] = None
    bench_k_values: List[int] = field(default_factory=lambda: [16, 32])
    bench_dim: int = 10_000
    bench_repeats: int = 5
    diag_warmup_rounds: int = 0

    def with_seed(self, seed: int) -> "ExperimentSpec":
        return dataclasses.replace(self, seeds=[seed])


# --- YAML plumbing -----------------------------------------------------------------


def _line_table(node, path: str = "", table: Optional[Dict[str, int]] = None) -> Dict[str, int]:
    """Map every dotted key path (list items as ``[i]``) to its 1-based line."""
    if table is None:
        table = {}
    table.setdefault(path, node.start_mark.line + 1)
    if isinstance(node, yaml.MappingNode):
        for key_node, value_node in node.value:
            sub = f"{path}.{key_node.value}" if path else str(key_node.value)
            table[sub] = key_node.start_mark.line + 1
            _line_table(value_node, sub, table)
    elif isinstance(node, yaml.SequenceNode):
        for i, item in enumerate(node.value):
            _line_table(item, f"{path}[{i}]", table)
    return table


class _Reader:
    def __init__(self, lines: Dict[str, int]):
        self.lines = lines

    def error(self, message: str, path: str) -> ConfigError:
        probe = path
        # shorthand values (``defense: foo``) have no node for the implied subkey
        while probe and probe not in self.lines:
            probe = probe.rsplit(".", 1)[0] if "." in probe else ""
        return ConfigError(message, path, self.lines.get(probe))

    def mapping(self, value, path: str, allowed: set) -> dict:
        if value is None:
            return {}
        if not isinstance(value, dict):
            raise self.error(f"expected a mapping, got {type(value).__name__}", path)
        for key in value:
            if key not in allowed:
                sub = f"{path}.{key}" if path else str(key)
                raise self.error(f"unknown key {key!r}; allowed: {', '.join(sorted(allowed))}", sub)
        return value

    def int_list(self, value, path: str) -> List[int]:
        if not isinstance(value, list) or not value:
            raise self.error("expected a non-empty list of integers", path)
        for i, v in enumerate(value):
            if not isinstance(v, int) or isinstance(v, bool):
                raise self.error(f"expected an integer, got {v!r}", f"{path}[{i}]")
        return list(value)

    def positive_int(self, value, path: str) -> int:
        if not isinstance(value, int) or isinstance(value, bool) or value < 1:
            raise self.error(f"expected a positive integer, got {value!r}", path)
        return value

    def build(self, factory, kwargs: dict, path: str):
        try:
            return factory(**kwargs)
        except (TypeError, ValueError) as exc:
            raise self.error(str(exc), path) from None

    def attack(self, value, path: str) -> AttackConfig:
        if isinstance(value, str):
            value = {"kind": value}
        m = self.mapping(value, path, ATTACK_KEYS)
        kind = m.get("kind", "None")
        if kind not in ATTACK_KINDS:
            raise self.error(f"unknown attack kind {kind!r}; expected one of {', '.join(ATTACK_KINDS)}",
                             f"{path}.kind")
        params = self.mapping(m.get("params"), f"{path}.params", set(m.get("params") or {}))
        return self.build(AttackConfig, {"kind": kind, "params": dict(params),
                                         "jitter": bool(m.get("jitter", True))}, path)

    def defense(self, value, path: str) -> DefenseSpec:
        if isinstance(value, str):
            value = {"kind": value}
        m = self.mapping(value, path, DEFENSE_KEYS)
        kind = m.get("kind", "FedAvg")
        if kind not in AGGREGATOR_KINDS:
            raise self.error(
                f"unknown defense kind {kind!r}; expected one of {', '.join(AGGREGATOR_KINDS)}", f"{path}.kind"
            )
        params = dict(self.mapping(m.get("params"), f"{path}.params", set(m.get("params") or {})))
        cfg = self.build(AggregatorConfig, {"kind": kind, "params": params}, path)
        # instantiate once so bad parameter names fail at parse time
        from fedseca.aggregator import make_aggregator

        try:
            make_aggregator(cfg)
        except (TypeError, ValueError) as exc:
            raise self.error(str(exc), f"{path}.params") from None
        return DefenseSpec(str(m.get("label", kind)), cfg)

    def defense_list(self, value, path: str) -> List[DefenseSpec]:
        if not isinstance(value, list) or not value:
            raise self.error("expected a non-empty list of defenses", path)
        out = [self.defense(v, f"{path}[{i}]") for i, v in enumerate(value)]
        labels = [d.label for d in out]
        for i, lab in enumerate(labels):
            if labels.index(lab) != i:
                raise self.error(f"duplicate defense label {lab!r}", f"{path}[{i}]")
        return out


def parse_config_text(text: str) -> ExperimentSpec:
    try:
        node = yaml.compose(text)
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ConfigError(f"YAML syntax error: {getattr(exc, 'problem', exc)}", "",
                          None if mark is None else mark.line + 1) from None
    r = _Reader(_line_table(node) if node is not None else {})
    top = r.mapping(raw, "", SECTION_KEYS)

    task_kw = dict(r.mapping(top.get("task"), "task", TASK_KEYS))
    task = r.build(SyntheticTask, task_kw, "task")
    fed_kw = dict(r.mapping(top.get("federation"), "federation", FEDERATION_KEYS))
    attack = r.attack(top.get("attack", "None"), "attack")
    defense = r.defense(top.get("defense", "FedAvg"), "defense")
    federation = r.build(
        FederationConfig, {**fed_kw, "task": task, "attack": attack, "defense": defense.config}, "federation"
    )

    spec = ExperimentSpec(federation=federation)
    if "seeds" in top:
        spec.seeds = r.int_list(top["seeds"], "seeds")

    out = r.mapping(top.get("output"), "output", OUTPUT_KEYS)
    if "dir" in out:
        spec.out_dir = str(out["dir"])
    if "metric_cadence" in out:
        spec.metric_cadence = r.positive_int(out["metric_cadence"], "output.metric_cadence")

    if "matrix" in top:
        m = r.mapping(top["matrix"], "matrix", MATRIX_KEYS)
        spec.matrix_defenses = r.defense_list(m.get("defenses", ["FedAvg", "FedSECA"]), "matrix.defenses")
        atk = m.get("attacks", list(ATTACK_KINDS))
        if not isinstance(atk, list) or not atk:
            raise r.error("expected a non-empty list of attacks", "matrix.attacks")
        spec.attacks = [r.attack(a, f"matrix.attacks[{i}]") for i, a in enumerate(atk)]
        spec.honest_baseline = bool(m.get("honest_baseline", True))

    if "sweep" in top:
        s = r.mapping(top["sweep"], "sweep", SWEEP_KEYS)
        spec.sweep_byzantine = r.int_list(s.get("byzantine"), "sweep.byzantine")
        for i, b in enumerate(spec.sweep_byzantine):
            if not 0 <= b < federation.n_clients:
                raise r.error(f"need 0 <= B < n_clients={federation.n_clients}, got {b}", f"sweep.byzantine[{i}]")
        spec.sweep_defenses = r.defense_list(s.get("defenses", ["FedSECA"]), "sweep.defenses")
        spec.sweep_attack = r.attack(s.get("attack", attack.kind), "sweep.attack")

    if "bench" in top:
        b = r.mapping(top["bench"], "bench", BENCH_KEYS)
        if "k_values" in b:
            spec.bench_k_values = [r.positive_int(v, f"bench.k_values[{i}]")
                                   for i, v in enumerate(r.int_list(b["k_values"], "bench.k_values"))]
        if "dim" in b:
            spec.bench_dim = r.positive_int(b["dim"], "bench.dim")
        if "repeats" in b:
            spec.bench_repeats = r.positive_int(b["repeats"], "bench.repeats")
        spec.bench_defenses = r.defense_list(b.get("defenses", ["FedAvg", "FedSECA"]), "bench.defenses")

    if "diag" in top:
        d = r.mapping(top["diag"], "diag", DIAG_KEYS)
        w = d.get("warmup_rounds", 0)
        if not isinstance(w, int) or isinstance(w, bool) or w < 0:
            raise r.error(f"expected a non-negative integer, got {w!r}", "diag.warmup_rounds")
        spec.diag_warmup_rounds = w

    for name in ("matrix_defenses", "sweep_defenses", "bench_defenses"):
        if not getattr(spec, name):
            setattr(spec, name, [defense])
    return spec


def load_config(path: str) -> ExperimentSpec:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc.strerror}", str(path)) from None
    return parse_config_text(text)


def federation_for(spec: ExperimentSpec, seed: int, defense: Optional[AggregatorConfig] = None,
                   attack: Optional[AttackConfig] = None, n_byzantine: Optional[int] = None) -> FederationConfig:
    """The base federation with one cell's overrides applied."""
    base = spec.federation
    return dataclasses.replace(
        base,
        seed=seed,
        defense=base.defense if defense is None else defense,
        attack=base.attack if attack is None else attack,
        n_byzantine=base.n_byzantine if n_byzantine is None else n_byzantine,
    )


def describe(spec: ExperimentSpec) -> Dict[str, Any]:
    """Plain-data echo of the effective configuration for summary files."""
    fed = dataclasses.asdict(spec.federation)
    fed.pop("seed")
    return {"federation": fed, "seeds": list(spec.seeds)}

