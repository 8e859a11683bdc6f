"""Experiment configs, reports, provenance and deterministic output.

A config is a JSON object validated against ``schemas/config.schema.json``.
A report holds one CSV row per measurement (columns fixed per experiment by
``schemas/report_columns.json``), summary statistics and tolerance checks
evaluated when the report is built.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Callable, Iterable, Sequence

import jsonschema
import numpy as np

from . import __version__, kernels

log = logging.getLogger(__name__)


class ConfigError(ValueError):
    """Config does not validate against the experiment schema."""


class NumericalError(ArithmeticError):
    """Non-finite values appeared in a computation."""


def _load_schema(name: str) -> dict:
    return json.loads(resources.files("lacuna").joinpath("schemas", name).read_text())


CONFIG_SCHEMA = _load_schema("config.schema.json")
REPORT_COLUMNS = _load_schema("report_columns.json")
_VALIDATOR = jsonschema.Draft202012Validator(CONFIG_SCHEMA)
PROVENANCE_COLUMNS = ("config_hash", "code_version")


def default_config_path(experiment: str) -> Path:
    return Path(str(resources.files("lacuna").joinpath("configs", f"{experiment}.json")))


# --------------------------------------------------------------------------
# config


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated experiment parameters; ``raw`` is the canonical JSON object."""

    raw: dict

    @classmethod
    def from_dict(cls, data: Any) -> "ExperimentConfig":
        errors = sorted(_VALIDATOR.iter_errors(data), key=lambda e: (list(map(str, e.absolute_path)), e.message))
        if errors:
            raise ConfigError("; ".join(
                f"{'/'.join(str(p) for p in e.absolute_path) or '<root>'}: {e.message}" for e in errors))
        return cls(json.loads(json.dumps(data)))

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from None
        return cls.from_dict(data)

    @classmethod
    def from_file(cls, path: str | Path) -> "ExperimentConfig":
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        return cls.from_json(text)

    @classmethod
    def default(cls, experiment: str) -> "ExperimentConfig":
        return cls.from_file(default_config_path(experiment))

    def with_seed(self, seed: int) -> "ExperimentConfig":
        return ExperimentConfig.from_dict({**self.raw, "seed": int(seed)})

    def with_updates(self, **updates) -> "ExperimentConfig":
        return ExperimentConfig.from_dict({**self.raw, **updates})

    @property
    def experiment(self) -> str:
        return self.raw["experiment"]

    @property
    def seed(self) -> int:
        return int(self.raw["seed"])

    @property
    def grid(self) -> dict:
        return self.raw.get("grid", {})

    @property
    def profile(self) -> str:
        return self.raw.get("profile", "hilbert_sign")

    @property
    def profile_scale(self) -> float:
        return float(self.raw.get("profile_scale", 1.0))

    @property
    def sweep(self) -> list[int]:
        return list(self.raw.get("sweep", []))

    @property
    def params(self) -> dict:
        return self.raw.get("params", {})

    def tolerance(self, name: str, default: float) -> float:
        return float(self.raw.get("tolerances", {}).get(name, default))

    def canonical(self) -> str:
        return json.dumps(self.raw, sort_keys=True, separators=(",", ":"))

    def hash(self) -> str:
        return hashlib.sha256(self.canonical().encode()).hexdigest()[:16]


# --------------------------------------------------------------------------
# report


@dataclass(frozen=True)
class Check:
    """One declared tolerance: ``value <op> bound``; flagged checks are reported but never fail."""

    name: str
    value: float
    bound: float
    op: str
    passed: bool
    flag_only: bool = False

    def as_dict(self) -> dict:
        return {"name": self.name, "value": _jsonable(self.value), "bound": _jsonable(self.bound),
                "op": self.op, "passed": self.passed, "flag_only": self.flag_only}


_OPS: dict[str, Callable[[float, float], bool]] = {
    "<=": lambda a, b: a <= b,
    "<": lambda a, b: a < b,
    ">=": lambda a, b: a >= b,
    ">": lambda a, b: a > b,
    "==": lambda a, b: a == b,
}


@dataclass
class ExperimentReport:
    experiment: str
    config: ExperimentConfig
    threads: int = 1
    rows: list[dict] = field(default_factory=list)
    summary: dict = field(default_factory=dict)
    checks: list[Check] = field(default_factory=list)

    @property
    def columns(self) -> list[str]:
        return list(REPORT_COLUMNS[self.experiment]["columns"]) + list(PROVENANCE_COLUMNS)

    def add_row(self, **values) -> None:
        expected = REPORT_COLUMNS[self.experiment]["columns"]
        if set(values) != set(expected):
            missing = sorted(set(expected) - set(values))
            extra = sorted(set(values) - set(expected))
            raise KeyError(f"{self.experiment} row mismatch: missing {missing}, extra {extra}")
        self.rows.append(values)

    def check(self, name: str, value, op: str, bound, flag_only: bool = False) -> bool:
        value, bound = float(value), float(bound)
        ok = bool(_OPS[op](value, bound)) and math.isfinite(value)
        self.checks.append(Check(name, value, bound, op, ok, flag_only))
        log.info("%s: %s = %r %s %r -> %s", self.experiment, name, value, op, bound,
                 "pass" if ok else ("flag" if flag_only else "FAIL"))
        return ok

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks if not c.flag_only)

    @property
    def provenance(self) -> dict:
        return {"config_hash": self.config.hash(), "code_version": __version__,
                "threads": self.threads, "backend": kernels.BACKEND}

    def failed_checks(self) -> list[Check]:
        return [c for c in self.checks if not c.passed and not c.flag_only]

    def summary_line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        bits = [f"{c.name}={_fmt(c.value)}" for c in self.checks[:4]]
        detail = f"{len(self.rows)} rows" + (f"; {', '.join(bits)}" if bits else "")
        return f"{self.experiment}: {status} ({detail})"

    # -- serialization ----------------------------------------------------

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.columns)
        prov = self.provenance
        for row in self.rows:
            values = [row[c] for c in REPORT_COLUMNS[self.experiment]["columns"]]
            values += [prov[c] for c in PROVENANCE_COLUMNS]
            writer.writerow([_fmt(v) for v in values])
        return buf.getvalue()

    def to_json(self) -> str:
        doc = {
            "experiment": self.experiment,
            "passed": self.passed,
            "checks": [c.as_dict() for c in self.checks],
            "summary": _jsonable(self.summary),
            "provenance": self.provenance,
            "config": self.config.raw,
        }
        return json.dumps(doc, sort_keys=True, indent=2) + "\n"

    def write(self, out_dir: str | Path) -> tuple[Path, Path]:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        paths = (out_dir / f"{self.experiment}.csv", out_dir / f"{self.experiment}.json")
        for path, text in zip(paths, (self.to_csv(), self.to_json())):
            tmp = path.with_suffix(path.suffix + ".tmp")
            tmp.write_text(text)
            os.replace(tmp, path)
        return paths


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (tuple, list, np.ndarray)):
        return " ".join(_fmt(x) for x in v)
    return str(v)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else repr(x)
    return obj


# --------------------------------------------------------------------------
# helpers shared by experiments


def ensure_finite(arr, what: str) -> np.ndarray:
    arr = np.asarray(arr)
    if not np.all(np.isfinite(arr)):
        raise NumericalError(f"non-finite values in {what}")
    return arr


def ordered_map(func: Callable, items: Sequence, threads: int = 1) -> list:
    """``[func(x) for x in items]``, optionally on a thread pool; results keep input order."""
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [func(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(func, items))


def spawn_rngs(seed: int, count: int) -> list[np.random.Generator]:
    """Independent generators keyed by trial index, so results do not depend on scheduling."""
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(count)]


def fit_growth_models(Ns: Iterable[int], r: Iterable[float]) -> dict:
    """Least-squares fits of ``a``, ``a + c sqrt(log N)`` and ``a + c log N``; returns coefficients and RSS."""
    Ns = np.asarray(list(Ns), dtype=float)
    r = np.asarray(list(r), dtype=float)
    L = np.log(Ns)
    one = np.ones_like(L)
    out = {}
    for name, X in (("constant", one[:, None]), ("sqrt_log", np.stack([one, np.sqrt(L)], 1)),
                    ("log", np.stack([one, L], 1))):
        coef = np.linalg.lstsq(X, r, rcond=None)[0]
        out[name] = {"coef": [float(c) for c in coef], "rss": float(np.sum((X @ coef - r) ** 2))}
    return out
