"""File formats and run configuration.

Time series CSV::

    voxel_id,t0001,t0002,...,tNNNN

Parcellation CSV::

    voxel_id,region

Result files (written by ``clacorr estimate``)::

    clusters.csv          region,voxel_id,cluster_id
    estimates.csv         region_a,region_b,estimator,value
    cla_distribution.csv  region_a,region_b,cluster_a,cluster_b,value
    heights.csv           region,h_used,h_max,n_clusters

Floats are written with 17 significant digits so every value round-trips.
The configuration file is flat ``key = value`` text; ``#`` starts a comment.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from clacorr.core_stats import TimeSeriesMatrix
from clacorr.errors import ConfigError, ConsistencyError, ParseError
from clacorr.synthetic import ScenarioSpec

log = logging.getLogger(__name__)

CLUSTERS_HEADER = ("region", "voxel_id", "cluster_id")
ESTIMATES_HEADER = ("region_a", "region_b", "estimator", "value")
DISTRIBUTION_HEADER = ("region_a", "region_b", "cluster_a", "cluster_b", "value")
HEIGHTS_HEADER = ("region", "h_used", "h_max", "n_clusters")
PARCELLATION_HEADER = ("voxel_id", "region")


def fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_csv(path, header, rows) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])


def _read_rows(path, header=None) -> tuple[list[str], list[list[str]]]:
    path = Path(path)
    if not path.is_file():
        raise ParseError(f"{path}: no such file")
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ParseError(f"{path}: empty file", row=1)
    head = [h.strip() for h in rows[0]]
    if header is not None and tuple(head) != tuple(header):
        raise ParseError(f"{path}: expected header {','.join(header)}, got {','.join(head)}", row=1)
    return head, rows[1:]


# -- time series --------------------------------------------------------------

def read_timeseries_csv(path) -> tuple[list[str], np.ndarray]:
    """Voxel ids and the ``(N, n)`` value matrix of a time-series CSV."""
    head, rows = _read_rows(path)
    if len(head) < 4 or head[0] != "voxel_id":
        raise ParseError(f"{path}: header must be voxel_id,t0001,... with at least 3 time points", row=1)
    n = len(head) - 1
    ids, values, seen = [], np.empty((len(rows), n)), set()
    for r, row in enumerate(rows):
        line = r + 2
        if len(row) != n + 1:
            raise ParseError(f"{path}:{line}: expected {n + 1} fields, got {len(row)}", row=line)
        vid = row[0].strip()
        if vid in seen:
            raise ConsistencyError(f"{path}:{line}: duplicated voxel_id {vid!r}")
        seen.add(vid)
        ids.append(vid)
        for c, cell in enumerate(row[1:], start=2):
            try:
                v = float(cell)
            except ValueError:
                raise ParseError(f"{path}:{line}: column {c} ({head[c - 1]}) is not a number: {cell!r}",
                                 row=line, column=c) from None
            if not math.isfinite(v):
                raise ParseError(f"{path}:{line}: column {c} ({head[c - 1]}) is not finite: {cell!r}",
                                 row=line, column=c)
            values[r, c - 2] = v
    return ids, values


def read_parcellation(path) -> dict[str, str]:
    _, rows = _read_rows(path, PARCELLATION_HEADER)
    out = {}
    for r, row in enumerate(rows):
        if len(row) != 2:
            raise ParseError(f"{path}:{r + 2}: expected 2 fields", row=r + 2)
        vid, region = row[0].strip(), row[1].strip()
        if vid in out:
            raise ConsistencyError(f"{path}:{r + 2}: duplicated voxel_id {vid!r} in parcellation")
        out[vid] = region
    if not out:
        raise ConsistencyError(f"{path}: parcellation defines no region")
    return out


def load_timeseries(path, parcellation_path) -> dict[str, TimeSeriesMatrix]:
    """Split a time-series CSV into one ``TimeSeriesMatrix`` per region.

    Regions are returned in sorted label order; voxels keep file order.
    """
    ids, values = read_timeseries_csv(path)
    parcel = read_parcellation(parcellation_path)
    missing = [v for v in ids if v not in parcel]
    if missing:
        raise ConsistencyError(f"voxel {missing[0]!r} is not in the parcellation ({len(missing)} missing)")
    extra = sorted(set(parcel) - set(ids))
    if extra:
        raise ConsistencyError(f"parcellation voxel {extra[0]!r} has no time series ({len(extra)} extra)")
    regions = {}
    for label in sorted(set(parcel.values())):
        rows = [i for i, v in enumerate(ids) if parcel[v] == label]
        regions[label] = TimeSeriesMatrix(label, tuple(ids[i] for i in rows), values[rows])
    return regions


def save_timeseries(path, regions, parcellation_path=None) -> None:
    """Write regions (a mapping or sequence of ``TimeSeriesMatrix``) to CSV."""
    regs = list(regions.values()) if isinstance(regions, dict) else list(regions)
    n = regs[0].n_times
    header = ["voxel_id"] + [f"t{t + 1:04d}" for t in range(n)]
    rows = []
    for ts in regs:
        for vid, vals in zip(ts.voxel_ids, ts.values):
            rows.append([vid] + [fmt(v) for v in vals])
    write_csv(path, header, rows)
    if parcellation_path is not None:
        write_csv(parcellation_path, PARCELLATION_HEADER,
                  [(vid, ts.region_id) for ts in regs for vid in ts.voxel_ids])


def read_estimates(path) -> dict[tuple[str, str, str], float]:
    _, rows = _read_rows(path, ESTIMATES_HEADER)
    out = {}
    for r, row in enumerate(rows):
        try:
            out[(row[0], row[1], row[2])] = float(row[3])
        except (IndexError, ValueError):
            raise ParseError(f"{path}:{r + 2}: malformed estimates row", row=r + 2) from None
    return out


def read_table(path, header) -> list[dict[str, str]]:
    """Rows of any emitted result file as dicts (header is checked)."""
    _, rows = _read_rows(path, header)
    return [dict(zip(header, row)) for row in rows]


def read_coordinates(path) -> tuple:
    """Voxel coordinates from a CSV with one coordinate per column, header row first."""
    _, rows = _read_rows(path)
    try:
        return tuple(tuple(float(v) for v in row) for row in rows if row)
    except ValueError:
        raise ParseError(f"{path}: coordinates must be numeric") from None


# -- configuration ------------------------------------------------------------

def parse_config_text(text: str, source: str = "<config>") -> dict[str, str]:
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected key=value, got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError(f"{source}:{lineno}: empty key")
        if key in out:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def read_config(path) -> dict[str, str]:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file {path} not found")
    return parse_config_text(path.read_text(), str(path))


def _split_list(value: str) -> tuple[str, ...]:
    return tuple(s.strip() for s in value.split(",") if s.strip())


# keys setting the same field on both regions
_BOTH = {"eta_minus": ("eta_minus_a", "eta_minus_b"), "phi": ("phi_a", "phi_b"),
         "sigma2": ("sigma2_a", "sigma2_b"), "gamma2": ("gamma2_a", "gamma2_b"),
         "n_voxels": ("n_a", "n_b")}
_SCENARIO_FIELDS = {f.name: f for f in fields(ScenarioSpec)}
_SCENARIO_ALIASES = {"n": "n_times"}


def _coerce(name: str, value: str, kind):
    try:
        return kind(value)
    except ValueError:
        raise ConfigError(f"config key {name}: cannot parse {value!r} as {kind.__name__}") from None


def scenario_overrides(raw: dict[str, str], base_dir: Path | None = None) -> dict:
    """ScenarioSpec keyword arguments from flat config entries."""
    kw = {}
    for key, value in raw.items():
        key = _SCENARIO_ALIASES.get(key, key)
        if key in _BOTH:
            for name in _BOTH[key]:
                kw[name] = value
        elif key in ("coords_a", "coords_b"):
            p = Path(value)
            kw[key] = read_coordinates(p if p.is_absolute() or base_dir is None else base_dir / p)
        elif key in _SCENARIO_FIELDS:
            kw[key] = value
    for name, value in list(kw.items()):
        if isinstance(value, str):
            kind = {"model": str, "n_a": int, "n_b": int, "n_times": int, "seed": int,
                    "replicates": int}.get(name, float)
            kw[name] = _coerce(name, value, kind)
    return kw


@dataclass
class RunConfig:
    """Validated run configuration for every CLI subcommand."""

    timeseries: Path | None = None
    parcellation: Path | None = None
    height_rule: str = "maxu"
    estimators: tuple[str, ...] = ("ac", "ca", "cla")
    out: Path = Path("out")
    seed: int = 0
    threads: int = 1
    scenario: ScenarioSpec = field(default_factory=ScenarioSpec)
    replicate: int = 0
    height_rules: tuple[str, ...] = ("maxu",)
    clusterings: tuple[str, ...] = ("ward",)
    sweep: dict = field(default_factory=dict)
    region_a: str | None = None
    region_b: str | None = None
    rho: float | None = None
    n_grid: int = 25

    KEYS = ("timeseries", "parcellation", "height", "estimators", "out", "seed", "threads",
            "replicate", "height_rules", "clusterings", "region_a", "region_b", "rho_true",
            "n_grid")

    @classmethod
    def from_mapping(cls, raw: dict[str, str], base_dir=None, **cli) -> RunConfig:
        """Build from parsed config entries; non-None ``cli`` values win."""
        from clacorr.evaluation import CLUSTERINGS, ESTIMATORS, parse_height_rule

        base_dir = Path(base_dir) if base_dir is not None else Path(".")
        known = set(cls.KEYS) | set(_SCENARIO_FIELDS) | set(_BOTH) | set(_SCENARIO_ALIASES)
        for key in raw:
            if key not in known and not key.startswith("sweep."):
                raise ConfigError(f"unknown config key {key!r}")
        raw = dict(raw)
        for key, value in cli.items():
            if value is not None:
                raw[key] = str(value)

        def get(key, default, kind=str):
            if key in raw:
                return _coerce(key, raw[key], kind)
            log.info("config: %s not set, using default %r", key, default)
            return default

        def path(key):
            return None if key not in raw else (base_dir / raw[key] if not Path(raw[key]).is_absolute()
                                                else Path(raw[key]))

        cfg = cls()
        cfg.timeseries = path("timeseries")
        cfg.parcellation = path("parcellation")
        cfg.height_rule = get("height", "maxu")
        parse_height_rule(cfg.height_rule)
        cfg.estimators = tuple(e.lower() for e in _split_list(get("estimators", "ac,ca,cla")))
        bad = [e for e in cfg.estimators if e not in ESTIMATORS]
        if bad or not cfg.estimators:
            raise ConfigError(f"unknown estimators {bad}; choose from {ESTIMATORS}")
        cfg.out = Path(raw["out"]) if "out" in raw else Path("out")
        cfg.seed = get("seed", 0, int)
        cfg.threads = get("threads", 1, int)
        if cfg.threads < 1:
            raise ConfigError("threads must be >= 1")
        cfg.replicate = get("replicate", 0, int)
        cfg.height_rules = _split_list(get("height_rules", cfg.height_rule))
        for rule in cfg.height_rules:
            parse_height_rule(rule)
        cfg.clusterings = _split_list(get("clusterings", "ward"))
        bad = [c for c in cfg.clusterings if c not in CLUSTERINGS]
        if bad or not cfg.clusterings:
            raise ConfigError(f"unknown clusterings {bad}; choose from {CLUSTERINGS}")
        cfg.region_a = raw.get("region_a")
        cfg.region_b = raw.get("region_b")
        cfg.rho = get("rho_true", None, float)
        cfg.n_grid = get("n_grid", 25, int)
        if cfg.n_grid < 1:
            raise ConfigError("n_grid must be >= 1")

        scenario_kw = scenario_overrides(raw, base_dir)
        scenario_kw["seed"] = cfg.seed
        cfg.scenario = ScenarioSpec(**scenario_kw)
        sweep = {k[len("sweep."):]: _split_list(v) for k, v in raw.items() if k.startswith("sweep.")}
        for key in sweep:
            if _SCENARIO_ALIASES.get(key, key) not in set(_SCENARIO_FIELDS) | set(_BOTH):
                raise ConfigError(f"sweep.{key} is not a scenario parameter")
        lengths = {len(v) for v in sweep.values()}
        if len(lengths) > 1:
            raise ConfigError("all sweep.* keys must list the same number of values")
        cfg.sweep = sweep
        return cfg

    def sweep_scenarios(self) -> list[ScenarioSpec]:
        """One scenario per sweep position (just the base scenario without a sweep)."""
        if not self.sweep:
            return [self.scenario]
        n = len(next(iter(self.sweep.values())))
        specs = []
        for i in range(n):
            kw = scenario_overrides({k: v[i] for k, v in self.sweep.items()})
            specs.append(self.scenario.with_(**kw))
        return specs
