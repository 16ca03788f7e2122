"""Configuration-driven experiments: replicas, algorithm sweeps, transient-time sweeps."""

from __future__ import annotations

import copy
import csv
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from . import algorithms as alg
from .exceptions import ConfigError, DegenerateSpectrumError
from .metrics import transient_time
from .mixing import beta_shift, lazy_metropolis, spectral
from .problems import (load_mnist, logistic_problem, mnist_binary_partition, quadratic_problem,
                       synthetic_logistic)
from .topology import grid, read_edge_list, ring

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
DEFAULT_HORIZON_CAP = 1 << 20

_ALG = {
    "type": "object",
    "properties": {
        "tag": {"enum": list(alg.METHODS)},
        "label": {"type": "string", "pattern": "^[A-Za-z0-9_.-]+$"},
        "variant": {"enum": list(alg.DSGD_VARIANTS)},
    },
    "required": ["tag"],
    "additionalProperties": False,
}

CONFIG_SCHEMA = {
    "type": "object",
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "topology": {
            "type": "object",
            "properties": {
                "kind": {"enum": ["ring", "grid", "edge-list"]},
                "n": {"type": "integer", "minimum": 3},
                "side": {"type": "integer", "minimum": 2},
                "path": {"type": "string"},
                "beta": {"type": ["number", "null"], "exclusiveMinimum": 0.5, "exclusiveMaximum": 1},
            },
            "required": ["kind"],
            "additionalProperties": False,
        },
        "problem": {
            "type": "object",
            "properties": {
                "kind": {"enum": ["quadratic", "logistic-synthetic", "logistic-mnist"]},
                "p": {"type": "integer", "minimum": 1},
                "noise_sigma": {"type": "number", "minimum": 0},
                "rho": {"type": "number", "exclusiveMinimum": 0},
                "minibatch": {"type": "integer", "minimum": 1},
                "per_agent": {"type": "integer", "minimum": 1},
                "data_seed": {"type": "integer", "minimum": 0},
                "w_scale": {"type": "number"},
                "overlap": {"type": "boolean"},
                "digits": {"type": "array", "items": {"type": "integer", "minimum": 0, "maximum": 9},
                           "minItems": 2, "maxItems": 2},
                "data_dir": {"type": ["string", "null"]},
            },
            "required": ["kind"],
            "additionalProperties": False,
        },
        "algorithms": {"type": "array", "items": _ALG, "minItems": 1},
        "stepsize": {
            "type": "object",
            "properties": {"numerator": {"type": "number", "exclusiveMinimum": 0},
                           "offset": {"type": "number", "exclusiveMinimum": 0}},
            "required": ["numerator", "offset"],
            "additionalProperties": False,
        },
        "iterations": {"type": "integer", "minimum": 1},
        "replicas": {"type": "integer", "minimum": 1},
        "seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
        "record": {"type": "array", "items": {"enum": list(alg.RECORD_KINDS)}, "minItems": 1,
                   "uniqueItems": True},
        "threads": {"type": "integer", "minimum": 1},
        "chunk_size": {"type": "integer", "minimum": 1},
        "output": {"type": "string"},
        "x0": {"type": ["number", "null"]},
        "transient": {
            "type": "object",
            "properties": {
                "sizes": {"type": "array", "items": {"type": "integer", "minimum": 3}, "minItems": 1},
                "multiplier": {"type": "number", "exclusiveMinimum": 0},
                "horizon_cap": {"type": "integer", "minimum": 1},
                "target": {"enum": ["edas", "edas3", "dsgd", "dsgt"]},
            },
            "additionalProperties": False,
        },
        "description": {"type": "string"},
    },
    "required": ["topology", "problem", "algorithms", "stepsize", "iterations"],
    "additionalProperties": False,
}

_DEFAULTS = {
    "schema_version": SCHEMA_VERSION,
    "replicas": 1,
    "seed": 0,
    "record": ["mse"],
    "threads": 1,
    "chunk_size": 50,
    "output": "edas_out",
    "x0": None,
}
_PROBLEM_DEFAULTS = {
    "quadratic": {"p": 1, "noise_sigma": 0.1},
    "logistic-synthetic": {"p": 10, "per_agent": 100, "rho": 1.0, "minibatch": 1, "data_seed": 0,
                           "w_scale": 1.0, "overlap": False},
    "logistic-mnist": {"digits": [1, 2], "per_agent": 100, "rho": 1.0, "minibatch": 1, "data_seed": 0,
                       "overlap": False, "data_dir": None},
}
_TRANSIENT_DEFAULTS = {"multiplier": 6.0, "horizon_cap": DEFAULT_HORIZON_CAP, "target": "edas"}


def _path(parts) -> str:
    return "config" + "".join(f"[{p}]" if isinstance(p, int) else f".{p}" for p in parts)


def normalize_config(raw: dict) -> dict:
    """Validate ``raw`` and return a copy with every default filled in."""
    if not isinstance(raw, dict):
        raise ConfigError("config: top level must be a JSON object")
    try:
        jsonschema.validate(raw, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        raise ConfigError(f"{_path(exc.absolute_path)}: {exc.message}") from None
    cfg = {**copy.deepcopy(_DEFAULTS), **copy.deepcopy(raw)}
    topo = cfg["topology"]
    topo.setdefault("beta", None)
    need = {"ring": "n", "grid": "side", "edge-list": "path"}[topo["kind"]]
    if need not in topo:
        raise ConfigError(f"config.topology.{need}: required for kind {topo['kind']!r}")
    prob = cfg["problem"]
    for key, val in _PROBLEM_DEFAULTS[prob["kind"]].items():
        prob.setdefault(key, val)
    labels = []
    for i, entry in enumerate(cfg["algorithms"]):
        if "variant" in entry and entry["tag"] != "dsgd":
            raise ConfigError(f"config.algorithms[{i}].variant: only meaningful for dsgd")
        if entry["tag"] == "dsgd":
            entry.setdefault("variant", "atc")
        entry.setdefault("label", entry["tag"])
        if entry["label"] in labels:
            raise ConfigError(f"config.algorithms[{i}].label: duplicate label {entry['label']!r}")
        labels.append(entry["label"])
    if "transient" in cfg:
        for key, val in _TRANSIENT_DEFAULTS.items():
            cfg["transient"].setdefault(key, val)
        if topo["kind"] == "grid":
            for j, s in enumerate(cfg["transient"].get("sizes", [])):
                if math.isqrt(s) ** 2 != s:
                    raise ConfigError(f"config.transient.sizes[{j}]: grid sizes must be perfect squares, got {s}")
    return cfg


def canonical_json(cfg: dict) -> str:
    return json.dumps(cfg, sort_keys=True, indent=2, ensure_ascii=True) + "\n"


def shipped_config_dir() -> Path:
    return Path(str(resources.files("edas") / "configs"))


def load_config(path) -> dict:
    """Read and normalise a JSON config; bare names fall back to the shipped configs."""
    p = Path(path)
    if not p.exists() and not p.is_absolute():
        alt = shipped_config_dir() / p.name
        if alt.exists():
            p = alt
    text = p.read_bytes().decode("utf-8")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        offset = len(text[:exc.pos].encode("utf-8"))
        raise ConfigError(f"{p}: malformed JSON at byte offset {offset} (line {exc.lineno}, column {exc.colno}): "
                          f"{exc.msg}") from None
    return normalize_config(data)


def apply_override(cfg: dict, assignment: str) -> dict:
    """Apply one ``dotted.key=value`` override; ``value`` is parsed as JSON when possible."""
    if "=" not in assignment:
        raise ConfigError(f"override {assignment!r}: expected key=value")
    key, text = assignment.split("=", 1)
    try:
        value = json.loads(text)
    except json.JSONDecodeError:
        value = text
    out = copy.deepcopy(cfg)
    node = out
    parts = key.split(".")
    for depth, part in enumerate(parts[:-1]):
        node = _descend(node, part, parts[:depth + 1], create=True)
    last = parts[-1]
    if isinstance(node, list):
        node[_index(node, last, parts)] = value
    else:
        node[last] = value
    return out


def _index(node, part, parts):
    if not part.isdigit() or int(part) >= len(node):
        raise ConfigError(f"override {'.'.join(parts)}: bad list index {part!r}")
    return int(part)


def _descend(node, part, parts, create):
    if isinstance(node, list):
        return node[_index(node, part, parts)]
    if not isinstance(node, dict):
        raise ConfigError(f"override {'.'.join(parts)}: cannot descend into a scalar")
    if part not in node and create:
        node[part] = {}
    return node[part]


# ---------------------------------------------------------------- building


def build_graph(topo: dict, size: int | None = None):
    kind = topo["kind"]
    if kind == "ring":
        return ring(size or topo["n"])
    if kind == "grid":
        return grid(math.isqrt(size) if size else topo["side"])
    return read_edge_list(topo["path"])


def build_mixing(topo: dict, size: int | None = None):
    W = lazy_metropolis(build_graph(topo, size))
    if topo.get("beta") is not None:
        W = beta_shift(W, topo["beta"])
    return spectral(W)


def build_problem(prob: dict, mixing):
    kind = prob["kind"]
    n = mixing.n
    if kind == "quadratic":
        return quadratic_problem(mixing, p=prob["p"], noise_sigma=prob["noise_sigma"])
    if kind == "logistic-synthetic":
        parts = synthetic_logistic(n, prob["per_agent"], prob["p"], seed=prob["data_seed"],
                                   w_scale=prob["w_scale"], overlap=prob["overlap"])
    else:
        images, labels = load_mnist(prob.get("data_dir"))
        parts = mnist_binary_partition(images, labels, tuple(prob["digits"]), prob["per_agent"], n,
                                       seed=prob["data_seed"], overlap=prob["overlap"])
    return logistic_problem(parts, rho=prob["rho"], minibatch=prob["minibatch"])


# ---------------------------------------------------------------- running


@dataclass
class ExperimentResult:
    """Replica-averaged trajectories keyed by algorithm label then metric kind."""

    config: dict
    trajectories: dict[str, dict[str, np.ndarray]]
    transient: dict[str, int | None]
    metadata: dict
    skipped: dict[str, dict[str, str]] = field(default_factory=dict)

    @property
    def labels(self):
        return list(self.trajectories)

    def final(self, label: str, kind: str = "mse") -> float:
        return float(self.trajectories[label][kind][-1])


def _chunks(replicas: int, size: int):
    return [range(s, min(s + size, replicas)) for s in range(0, replicas, size)]


def run_replicas(tag, problem, mixing, schedule, iterations, *, seed, replicas, record, variant="atc",
                 x0=None, chunk_size=50, threads=1):
    """Run ``replicas`` replicas in fixed chunks and return replica-averaged metrics.

    Chunk boundaries depend only on ``chunk_size``; per-chunk sums are added
    in chunk order, so the result does not depend on ``threads``.
    """
    chunks = _chunks(replicas, chunk_size)

    def work(ids):
        return alg.run(tag, problem, mixing, schedule, iterations, seed=seed, replicas=ids, x0=x0,
                       record=record, variant=variant)

    if threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            recs = list(pool.map(work, chunks))
    else:
        recs = [work(ids) for ids in chunks]
    sums = {}
    for rec in recs:
        for kind, vals in rec.metrics.items():
            s = vals.sum(axis=1)
            sums[kind] = s if kind not in sums else sums[kind] + s
    return {kind: s / replicas for kind, s in sums.items()}, recs[0].skipped


def _metadata(cfg, mixing, problem):
    meta = {
        "n": mixing.n,
        "lambda2": float(mixing.lambda2),
        "lambda_n": float(mixing.lambda_n),
        "spectral_gap": float(mixing.gap),
        "n_over_gap": float(mixing.n / mixing.gap),
        "problem": problem.describe(),
        "rng": alg.RNG_NAME,
        "rng_draw_block": alg.DRAW_BLOCK,
        "decisions": {
            "dsgd_default_variant": "adapt-then-combine",
            "dsgt_tracker_init": "Y0 = G(X0, xi_0)",
            "edas_three_term_reuses_previous_sample": True,
            "x0": "zeros" if cfg.get("x0") is None else f"constant {cfg['x0']}",
            "averaging": "fixed-order sum over replica chunks",
        },
    }
    if cfg["problem"]["kind"] == "logistic-mnist":
        meta["decisions"].update(pixel_scaling="divide by 255", bias_coordinate="appended constant 1",
                                 partition="overlapping draws" if cfg["problem"]["overlap"] else "disjoint blocks")
    return meta


def run_experiment(cfg: dict, *, mixing=None, problem=None) -> ExperimentResult:
    cfg = normalize_config(cfg)
    mixing = mixing or build_mixing(cfg["topology"])
    problem = problem or build_problem(cfg["problem"], mixing)
    schedule = alg.StepsizeSchedule(cfg["stepsize"]["numerator"], cfg["stepsize"]["offset"])
    record = list(cfg["record"])
    internal = record if "mse" in record else ["mse", *record]
    x0 = None if cfg["x0"] is None else np.full((mixing.n, problem.p), float(cfg["x0"]))
    traj, skipped, full_mse = {}, {}, {}
    for entry in cfg["algorithms"]:
        label = entry["label"]
        logger.info("running %s (%d replicas, %d iterations)", label, cfg["replicas"], cfg["iterations"])
        means, skip = run_replicas(entry["tag"], problem, mixing, schedule, cfg["iterations"], seed=cfg["seed"],
                                   replicas=cfg["replicas"], record=internal, variant=entry.get("variant", "atc"),
                                   x0=x0, chunk_size=cfg["chunk_size"], threads=cfg["threads"])
        full_mse[label] = means["mse"]
        traj[label] = {k: means[k] for k in record if k in means}
        if skip:
            skipped[label] = skip
    transient = {}
    sgd_labels = [e["label"] for e in cfg["algorithms"] if e["tag"] == "sgd"]
    if sgd_labels:
        ref = full_mse[sgd_labels[0]]
        for entry in cfg["algorithms"]:
            if entry["tag"] != "sgd":
                transient[entry["label"]] = transient_time(full_mse[entry["label"]], ref)
    return ExperimentResult(cfg, traj, transient, _metadata(cfg, mixing, problem), skipped)


def transient_sweep(cfg: dict, sizes=None, multiplier=None, horizon_cap=None, progress=None) -> list[dict]:
    """Measure the transient time of the target method for each network size.

    The horizon starts at ``iterations`` and doubles (capped) until the
    transient criterion is met.  Sample paths are horizon-independent, so a
    longer run extends the shorter one.
    """
    cfg = normalize_config(cfg)
    tr = {**_TRANSIENT_DEFAULTS, **cfg.get("transient", {})}
    sizes = list(sizes if sizes is not None else tr.get("sizes", []))
    if not sizes:
        raise ConfigError("config.transient.sizes: no network sizes given")
    multiplier = tr["multiplier"] if multiplier is None else multiplier
    cap = tr["horizon_cap"] if horizon_cap is None else horizon_cap
    if cfg["topology"]["kind"] == "edge-list":
        raise ConfigError("config.topology.kind: transient sweeps need a ring or grid generator")
    rows = []
    for size in sizes:
        if cfg["topology"]["kind"] == "grid" and math.isqrt(size) ** 2 != size:
            raise ConfigError(f"transient sweep: grid size {size} is not a perfect square")
        mixing = build_mixing(cfg["topology"], size)
        problem = build_problem(cfg["problem"], mixing)
        sub = copy.deepcopy(cfg)
        sub["algorithms"] = [{"tag": tr["target"]}, {"tag": "sgd"}]
        sub["record"] = ["mse"]
        horizon = min(cfg["iterations"], cap)
        while True:
            sub["iterations"] = horizon
            res = run_experiment(sub, mixing=mixing, problem=problem)
            kt = res.transient[tr["target"]]
            if kt is not None or horizon >= cap:
                break
            horizon = min(2 * horizon, cap)
        theory = mixing.n / mixing.gap
        row = {"n": mixing.n, "lambda2": float(mixing.lambda2), "transient": kt, "reached": kt is not None,
               "horizon": horizon, "n_over_gap": theory, "scaled_theory": multiplier * theory}
        rows.append(row)
        if progress:
            progress(row)
    return rows


# ---------------------------------------------------------------- output


def csv_columns(result: ExperimentResult) -> list[tuple[str, str]]:
    return [(label, kind) for label in result.trajectories for kind in result.config["record"]
            if kind in result.trajectories[label]]


def emit_csv(result: ExperimentResult, path) -> Path:
    """``k,<label>_<kind>,...`` with shortest round-trip float text and LF endings."""
    path = Path(path)
    cols = csv_columns(result)
    data = [result.trajectories[label][kind] for label, kind in cols]
    length = len(data[0]) if data else 0
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["k"] + [f"{label}_{kind}" for label, kind in cols])
        for k in range(length):
            writer.writerow([k] + [repr(float(col[k])) for col in data])
    return path


def read_csv(path) -> dict[str, np.ndarray]:
    with Path(path).open(newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    return {name: np.array([float(r[j]) for r in body]) for j, name in enumerate(header)}


def result_document(result: ExperimentResult) -> dict:
    return {
        "config": result.config,
        "transient": result.transient,
        "final": {label: {k: float(v[-1]) for k, v in kinds.items()} for label, kinds in result.trajectories.items()},
        "skipped": result.skipped,
        "metadata": result.metadata,
        "trajectories": {label: {k: [float(x) for x in v] for k, v in kinds.items()}
                         for label, kinds in result.trajectories.items()},
    }


def emit_json(result: ExperimentResult, path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(result_document(result), sort_keys=True, indent=1) + "\n")
    return path


def emit_sweep_csv(rows, path) -> Path:
    path = Path(path)
    fields = ["n", "lambda2", "transient", "reached", "horizon", "n_over_gap", "scaled_theory"]
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(fields)
        for row in rows:
            writer.writerow(["" if row[f] is None else repr(row[f]) if isinstance(row[f], float) else row[f]
                             for f in fields])
    return path


def bounds_report(cfg: dict) -> dict:
    """Theory constants and the order-level transient report, without simulating."""
    from .metrics import theoretical_constants, transient_bound
    from .mixing import b_decomposition

    cfg = normalize_config(cfg)
    mixing = build_mixing(cfg["topology"])
    problem = build_problem(cfg["problem"], mixing)
    theta = cfg["stepsize"]["numerator"] * problem.mu
    m = cfg["stepsize"]["offset"]
    out = {"theta": theta, "m": m, "transient_bound": transient_bound(mixing, problem).as_dict()}
    try:
        consts = theoretical_constants(mixing, b_decomposition(mixing), problem, theta, m)
        out["constants"] = {k: (list(v) if isinstance(v, tuple) else v) for k, v in consts.as_dict().items()}
    except DegenerateSpectrumError as exc:
        out["constants"] = None
        out["constants_skipped"] = f"{exc} (set topology.beta to shift the spectrum)"
    return out
