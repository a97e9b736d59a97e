"""Experiment configuration: an INI file read with ``configparser``.

Sections and keys::

    [run]
    policy = certified_global_ucb     ; see openmab.policy.POLICIES
    replications = 4                  ; >= 1
    seed = 12345                      ; master seed, split per replication
    output = runs/example             ; relative to the config file
    conventions = r_round, rbar_round ; regret labels to report
    check_lemmas = true               ; runtime lemma assertions
    check_partitions = false          ; per-round snapshot partition checks
    coverage = false                  ; confidence-coverage tally
    jobs = 1                          ; >1 runs replications in worker processes
    K = 2                             ; optional echo, must match the instance
    T = 500                           ; optional echo, must match the instance

    [instance]
    file = instance.json              ; a saved InstanceSpec, or instead:
    kind = tabular                    ; a generator from openmab.instances.GENERATORS
    K = 2                             ; ... followed by that generator's parameters

    [policy]
    C1 = 2.0                          ; parameters of the chosen policy

    [bounds]
    gap = 0.1                         ; Delta used for N_stab, N_id and the good event
    confidence = 0.05                 ; delta
"""

import configparser
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from ..exceptions import ConfigError, OpenMABError
from ..instances import GENERATORS, InstanceSpec, generate
from ..metrics import CONVENTIONS
from ..policy import POLICIES, Policy, make_policy

RUN_KEYS = {
    "policy": "str", "replications": "int", "seed": "int", "output": "str", "conventions": "list",
    "check_lemmas": "bool", "check_partitions": "bool", "coverage": "bool", "jobs": "int",
    "k": "int", "t": "int",
}
POLICY_KEYS = {
    "certified_global_ucb": {"C1": "float", "beta": "float", "eps_comm": "float", "max_neighbors": "int"},
    "clustered_ucb": {"C1": "float", "beta": "float", "burn_in": "int"},
    "oracle": {},
    "uniform_random": {},
    "round_robin": {},
    "commit_after_burnin": {"tau": "int", "explorer": "str", "gap": "float", "confidence": "float"},
}
POLICY_DEFAULTS = {
    "certified_global_ucb": {"C1": 2.0, "beta": 0.5, "eps_comm": 0.0},
    "clustered_ucb": {"C1": 2.0, "beta": 0.5},
}
BOUND_KEYS = {"gap": "float", "confidence": "float"}
SECTIONS = ("run", "instance", "policy", "bounds")


@dataclass
class SimConfig:
    instance: InstanceSpec
    policy: str = "certified_global_ucb"
    policy_params: dict = field(default_factory=dict)
    replications: int = 1
    seed: int = 0
    output: Path = Path("runs")
    conventions: tuple = CONVENTIONS
    check_lemmas: bool = True
    check_partitions: bool = False
    coverage: bool = False
    jobs: int = 1
    gap: float = 0.1
    confidence: float = 0.05
    source: Optional[Path] = None

    def __post_init__(self):
        if self.replications < 1:
            raise ConfigError("run.replications", f"must be >= 1, got {self.replications}")
        if self.jobs < 1:
            raise ConfigError("run.jobs", f"must be >= 1, got {self.jobs}")
        if self.policy not in POLICIES:
            raise ConfigError("run.policy", f"unknown policy {self.policy!r}; choose from {sorted(POLICIES)}")
        bad = [c for c in self.conventions if c not in CONVENTIONS]
        if bad or not self.conventions:
            raise ConfigError("run.conventions", f"unknown labels {bad}; choose from {list(CONVENTIONS)}")
        if not 0 < self.gap <= 1:
            raise ConfigError("bounds.gap", f"must lie in (0,1], got {self.gap}")
        if not 0 < self.confidence < 1:
            raise ConfigError("bounds.confidence", f"must lie in (0,1), got {self.confidence}")

    @property
    def K(self) -> int:
        return self.instance.K

    @property
    def T(self) -> int:
        return self.instance.T

    def make_policy(self) -> Policy:
        try:
            return make_policy(self.policy, **self.policy_params)
        except OpenMABError as e:
            raise ConfigError(f"policy ({self.policy})", str(e)) from e


def _convert(section: str, key: str, tag: str, text: str):
    try:
        if tag == "int":
            return int(text)
        if tag == "float":
            return float(text)
        if tag == "bool":
            low = text.strip().lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(text)
        if tag == "list":
            return tuple(p.strip() for p in text.split(",") if p.strip())
        return text
    except ValueError:
        raise ConfigError(f"{section}.{key}", f"expected {tag}, got {text!r}") from None


def _typed(parser: configparser.ConfigParser, section: str, schema: dict) -> dict:
    if not parser.has_section(section):
        return {}
    lookup = {k.lower(): (k, tag) for k, tag in schema.items()}
    out = {}
    for key, text in parser.items(section):
        if key not in lookup:
            raise ConfigError(f"{section}.{key}", "unknown key")
        name, tag = lookup[key]
        out[name] = _convert(section, key, tag, text)
    return out


def _instance(parser: configparser.ConfigParser, base: Path) -> InstanceSpec:
    if not parser.has_section("instance"):
        raise ConfigError("instance", "missing section")
    items = dict(parser.items("instance"))
    if "file" in items:
        if len(items) > 1:
            extra = sorted(set(items) - {"file"})[0]
            raise ConfigError(f"instance.{extra}", "cannot be combined with instance.file")
        path = Path(items["file"])
        if not path.is_absolute():
            path = base / path
        if not path.exists():
            raise ConfigError("instance.file", f"no such file: {path}")
        try:
            return InstanceSpec.load(path)
        except (OpenMABError, ValueError, KeyError) as e:
            raise ConfigError("instance.file", f"unreadable instance: {e}") from e
    kind = items.pop("kind", None)
    if kind is None:
        raise ConfigError("instance.kind", "need instance.file or instance.kind")
    # configparser lowercases keys; restore generator spelling
    if kind not in GENERATORS:
        raise ConfigError("instance.kind", f"unknown kind {kind!r}; choose from {sorted(GENERATORS)}")
    spelled = {k.lower(): k for k in GENERATORS[kind][1]}
    spelled.update(noise="noise", sigma="sigma")
    params = {}
    for key, text in items.items():
        if key not in spelled:
            raise ConfigError(f"instance.{key}", f"unknown parameter for kind {kind!r}")
        params[spelled[key]] = text
    try:
        return generate(kind, params)
    except OpenMABError as e:
        raise ConfigError("instance", str(e)) from e


def parse_config(text: str, base: Path = Path(".")) -> SimConfig:
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        parser.read_string(text)
    except configparser.Error as e:
        raise ConfigError("<file>", f"malformed config: {e}") from None
    for section in parser.sections():
        if section not in SECTIONS:
            raise ConfigError(section, "unknown section")
    run = _typed(parser, "run", RUN_KEYS)
    spec = _instance(parser, base)
    for key in ("k", "t"):
        echoed = run.pop(key, None)
        actual = getattr(spec, key.upper())
        if echoed is not None and echoed != actual:
            raise ConfigError(f"run.{key.upper()}", f"config says {echoed} but the instance has {actual}")
    policy = run.pop("policy", "certified_global_ucb")
    if policy not in POLICY_KEYS:
        raise ConfigError("run.policy", f"unknown policy {policy!r}; choose from {sorted(POLICY_KEYS)}")
    params = dict(POLICY_DEFAULTS.get(policy, {}))
    params.update(_typed(parser, "policy", POLICY_KEYS[policy]))
    bounds = _typed(parser, "bounds", BOUND_KEYS)
    output = Path(run.pop("output", "runs"))
    if not output.is_absolute():
        output = base / output
    cfg = SimConfig(instance=spec, policy=policy, policy_params=params, output=output, **run, **bounds)
    cfg.make_policy()  # surface bad policy parameters at load time
    return cfg


def load_config(path) -> SimConfig:
    path = Path(path)
    text = path.read_text()
    cfg = parse_config(text, path.parent)
    cfg.source = path
    return cfg
