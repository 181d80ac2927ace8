"""Run configuration, spectrum ingestion and result export.

Configs are JSON objects; dimensioned values may be plain numbers (Hz) or
strings with a unit suffix such as ``"40 MHz"``. Numeric output uses 12
significant digits so that identical runs produce identical bytes. The
schema and every CSV header are documented in ``docs/formats.md``.
"""

from __future__ import annotations

import csv
import io
import json
import math
import re
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .eigen import Branch
from .errors import ConfigError, SpectrumFileError
from .estimation import PARAM_NAMES, FitResult, SpectrumData
from .model import CouplingMode, CouplingSpec, ModeParams, SystemModel, build_system
from .scattering import SpectrumMap

__all__ = [
    "TASKS",
    "Grid",
    "RunSpec",
    "Table",
    "parse_quantity",
    "parse_config",
    "load_config",
    "load_spectrum",
    "export_results",
    "render_results",
    "fmt",
]

TASKS = ("spectrum", "map", "dispersion", "eps", "oracle", "geff-map", "electrodynamic", "twotone", "fit")
UNITS = {"hz": 1.0, "khz": 1e3, "mhz": 1e6, "ghz": 1e9}
_QUANTITY = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*([A-Za-z]*)\s*$")
SPECTRUM_HEADERS = (
    ("frequency_hz", "magnitude_db"),
    ("frequency_hz", "magnitude_db", "phase_rad"),
    ("frequency_hz", "magnitude_db", "sigma_db"),
    ("frequency_hz", "magnitude_db", "phase_rad", "sigma_db"),
)


def fmt(x) -> str:
    """Serialize a number with 12 significant digits."""
    if isinstance(x, str):
        return x
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    out = format(x, ".12g")
    return "0" if out == "-0" else out


def _round12(x):
    if isinstance(x, (bool, np.bool_, str)) or x is None:
        return x
    if isinstance(x, (int, np.integer)):
        return int(x)
    x = float(x)
    if not math.isfinite(x):
        return fmt(x)
    return float(fmt(x))


def parse_quantity(value, where: str, unit: str = "Hz") -> float:
    """Number (taken as Hz) or string with suffix Hz, kHz, MHz or GHz."""
    if isinstance(value, bool):
        raise ConfigError(f"{where}: expected a frequency, got a boolean")
    if isinstance(value, (int, float)):
        return float(value)
    if not isinstance(value, str):
        raise ConfigError(f"{where}: expected a number or a string like '40 MHz'")
    m = _QUANTITY.match(value)
    if not m:
        raise ConfigError(f"{where}: cannot parse quantity {value!r}")
    number, suffix = m.groups()
    if not suffix:
        return float(number)
    scale = UNITS.get(suffix.lower())
    if scale is None or suffix not in ("Hz", "kHz", "MHz", "GHz"):
        raise ConfigError(f"{where}: unknown unit suffix {suffix!r} (accepted: Hz, kHz, MHz, GHz)")
    return float(number) * scale


def _number(value, where):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{where}: expected a plain number, got {value!r}")
    return float(value)


def _check_keys(obj, allowed, where):
    if not isinstance(obj, dict):
        raise ConfigError(f"{where}: expected an object")
    for key in obj:
        if key not in allowed:
            raise ConfigError(f"unknown key {key!r} in {where}")


@dataclass(frozen=True)
class Grid:
    start: float
    stop: float
    count: int = 1001

    def __post_init__(self):
        if not self.count >= 2:
            raise ConfigError(f"grid count must be >= 2, got {self.count}")
        if not self.start < self.stop:
            raise ConfigError(f"grid needs start < stop, got {self.start} >= {self.stop}")

    def values(self) -> np.ndarray:
        return np.linspace(self.start, self.stop, self.count)


def _grid(obj, where, quantity=True):
    _check_keys(obj, ("start", "stop", "count"), where)
    for key in ("start", "stop"):
        if key not in obj:
            raise ConfigError(f"{where}: missing {key!r}")
    conv = parse_quantity if quantity else _number
    count = obj.get("count", 1001)
    if isinstance(count, bool) or not isinstance(count, int):
        raise ConfigError(f"{where}.count: expected an integer")
    return Grid(conv(obj["start"], f"{where}.start"), conv(obj["stop"], f"{where}.stop"), count)


def _quantities(obj, allowed, where, required=(), plain=()):
    _check_keys(obj, allowed, where)
    for key in required:
        if key not in obj:
            raise ConfigError(f"{where}: missing required key {key!r}")
    out = {}
    for key, value in obj.items():
        if key in plain:
            out[key] = _number(value, f"{where}.{key}")
        else:
            out[key] = parse_quantity(value, f"{where}.{key}")
    return out


@dataclass
class RunSpec:
    """Validated run configuration; all frequencies in Hz."""

    task: str
    cavity: dict | None = None
    magnon: dict | None = None
    coupling: dict | None = None
    delta_m: float | None = None
    f_grid: Grid | None = None
    delta_m_grid: Grid | None = None
    sigma: int = 1
    directional: bool = False
    db_offset: float = 0.0
    snr_db: float | None = None
    seed: int | None = None
    output_path: str | None = None
    output_format: str = "csv"
    oracle: dict = field(default_factory=dict)
    aux: dict = field(default_factory=dict)
    electrodynamic: dict = field(default_factory=dict)
    twotone: dict = field(default_factory=dict)
    fit: dict = field(default_factory=dict)
    base_dir: str = "."

    def build_model(self, delta_m: float | None = None) -> SystemModel:
        """Two-mode model (cavity drive port) with optional magnon detuning override."""
        if self.cavity is None or self.magnon is None:
            raise ConfigError(f"task {self.task!r} needs 'cavity' and 'magnon' blocks")
        cav = ModeParams("cavity", self.cavity["f"], self.cavity.get("beta", 0.0), self.cavity.get("kappa", 0.0))
        dm = self.delta_m if delta_m is None else delta_m
        if dm is not None:
            f_m = cav.f + dm
        elif "f" in self.magnon:
            f_m = self.magnon["f"]
        else:
            raise ConfigError("magnon frequency missing: give magnon.f or delta_m")
        mag = ModeParams("magnon", f_m, self.magnon.get("alpha", 0.0), self.magnon.get("gamma", 0.0))
        c = self.coupling or {}
        if c.get("mode", "explicit") == "from_bath":
            spec = CouplingSpec(j=c.get("J", 0.0), theta=c.get("theta", 0.0), mode=CouplingMode.FROM_BATH)
        else:
            spec = CouplingSpec(j=c.get("J", 0.0), gamma_d=c.get("Gamma", 0.0), theta=c.get("theta", 0.0))
        return build_system([cav, mag], [(0, 1, spec)])


TOP_KEYS = (
    "task", "cavity", "magnon", "coupling", "delta_m", "f_grid", "delta_m_grid", "sigma", "directional",
    "db_offset", "noise", "seed", "output", "oracle", "aux", "electrodynamic", "twotone", "fit",
)
REQUIRED = {
    "spectrum": ("cavity", "magnon", "f_grid"),
    "map": ("cavity", "magnon", "f_grid", "delta_m_grid"),
    "dispersion": ("cavity", "magnon", "delta_m_grid"),
    "eps": ("cavity", "magnon", "delta_m_grid"),
    "oracle": ("cavity", "magnon"),
    "geff-map": ("aux",),
    "electrodynamic": ("electrodynamic",),
    "twotone": ("twotone",),
    "fit": ("fit",),
}


def parse_config(source, task: str | None = None, base_dir: str | None = None) -> RunSpec:
    """Validate a config (path or already-loaded dict) into a :class:`RunSpec`.

    ``task`` (from the command line) takes precedence over the file's
    ``"task"`` entry; the two must agree when both are present.
    """
    if isinstance(source, dict):
        raw = source
        base = base_dir or "."
    else:
        path = Path(source)
        text = path.read_text()
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
        base = base_dir or str(path.parent)
    _check_keys(raw, TOP_KEYS, "config")
    file_task = raw.get("task")
    if task is not None and file_task is not None and task != file_task:
        raise ConfigError(f"command-line task {task!r} does not match config task {file_task!r}")
    task = task or file_task
    if task not in TASKS:
        raise ConfigError(f"task must be one of {', '.join(TASKS)}; got {task!r}")
    for key in REQUIRED[task]:
        if key not in raw:
            raise ConfigError(f"task {task!r} requires key {key!r}")

    spec = RunSpec(task=task, base_dir=base)
    if "cavity" in raw:
        spec.cavity = _quantities(raw["cavity"], ("f", "kappa", "beta"), "cavity", required=("f",))
    if "magnon" in raw:
        spec.magnon = _quantities(raw["magnon"], ("f", "alpha", "gamma"), "magnon")
    if "coupling" in raw:
        c = raw["coupling"]
        _check_keys(c, ("J", "Gamma", "theta", "mode"), "coupling")
        mode = c.get("mode", "explicit")
        if mode not in ("explicit", "from_bath"):
            raise ConfigError(f"coupling.mode must be 'explicit' or 'from_bath', got {mode!r}")
        if mode == "from_bath" and "Gamma" in c:
            raise ConfigError("coupling.Gamma is derived in from_bath mode; remove it")
        spec.coupling = {"mode": mode}
        for key in ("J", "Gamma"):
            if key in c:
                spec.coupling[key] = parse_quantity(c[key], f"coupling.{key}")
        if "theta" in c:
            spec.coupling["theta"] = _number(c["theta"], "coupling.theta")
    if "delta_m" in raw:
        spec.delta_m = parse_quantity(raw["delta_m"], "delta_m")
    if "f_grid" in raw:
        spec.f_grid = _grid(raw["f_grid"], "f_grid")
    if "delta_m_grid" in raw:
        spec.delta_m_grid = _grid(raw["delta_m_grid"], "delta_m_grid")
    if "sigma" in raw:
        if raw["sigma"] not in (1, -1) or isinstance(raw["sigma"], bool):
            raise ConfigError(f"sigma must be +1 or -1, got {raw['sigma']!r}")
        spec.sigma = int(raw["sigma"])
    if "directional" in raw:
        if not isinstance(raw["directional"], bool):
            raise ConfigError("directional must be true or false")
        spec.directional = raw["directional"]
    if "db_offset" in raw:
        spec.db_offset = _number(raw["db_offset"], "db_offset")
    if "noise" in raw:
        _check_keys(raw["noise"], ("snr_db",), "noise")
        spec.snr_db = _number(raw["noise"].get("snr_db"), "noise.snr_db")
    if "seed" in raw:
        if isinstance(raw["seed"], bool) or not isinstance(raw["seed"], int) or raw["seed"] < 0:
            raise ConfigError("seed must be a non-negative integer")
        spec.seed = raw["seed"]
    if "output" in raw:
        out = raw["output"]
        _check_keys(out, ("path", "format"), "output")
        spec.output_path = out.get("path")
        spec.output_format = out.get("format", "csv")
        if spec.output_format not in ("csv", "json"):
            raise ConfigError(f"output.format must be 'csv' or 'json', got {spec.output_format!r}")
    if "oracle" in raw:
        o = raw["oracle"]
        _check_keys(o, ("cutoff", "amplitude_a", "amplitude_b", "periods", "dt", "samples", "frame"), "oracle")
        parsed = {}
        for key in ("cutoff", "samples"):
            if key in o:
                if isinstance(o[key], bool) or not isinstance(o[key], int):
                    raise ConfigError(f"oracle.{key}: expected an integer")
                parsed[key] = o[key]
        for key in ("amplitude_a", "amplitude_b", "periods", "dt"):
            if key in o:
                parsed[key] = _number(o[key], f"oracle.{key}")
        if "frame" in o:
            parsed["frame"] = parse_quantity(o["frame"], "oracle.frame")
        spec.oracle = parsed
    if "aux" in raw:
        a = raw["aux"]
        _check_keys(a, ("g", "delta_grid", "kappa_grid", "window"), "aux")
        for key in ("g", "delta_grid", "kappa_grid"):
            if task == "geff-map" and key not in a:
                raise ConfigError(f"aux: missing required key {key!r}")
        spec.aux = {"g": parse_quantity(a["g"], "aux.g")}
        if "delta_grid" in a:
            spec.aux["delta_grid"] = _grid(a["delta_grid"], "aux.delta_grid")
        if "kappa_grid" in a:
            spec.aux["kappa_grid"] = _grid(a["kappa_grid"], "aux.kappa_grid")
        if "window" in a:
            spec.aux["window"] = _number(a["window"], "aux.window")
    if "electrodynamic" in raw:
        spec.electrodynamic = _quantities(
            raw["electrodynamic"],
            ("k_a", "k_f", "k_l", "f_c", "f_m", "alpha", "beta", "f_0", "gamma_e", "m_0"),
            "electrodynamic",
            required=("k_a", "k_f", "k_l", "f_c", "f_m"),
            plain=("k_a", "k_f", "k_l", "alpha", "beta", "gamma_e", "m_0"),
        )
    if "twotone" in raw:
        t = raw["twotone"]
        _check_keys(t, ("k", "delta", "phi_grid"), "twotone")
        for key in ("k", "delta", "phi_grid"):
            if key not in t:
                raise ConfigError(f"twotone: missing required key {key!r}")
        spec.twotone = {
            "k": parse_quantity(t["k"], "twotone.k"),
            "delta": _number(t["delta"], "twotone.delta"),
            "phi_grid": _grid(t["phi_grid"], "twotone.phi_grid", quantity=False),
        }
    if "fit" in raw:
        fi = raw["fit"]
        _check_keys(fi, ("data", "parameterization", "frozen", "seed_params", "multistart", "use_phase"), "fit")
        if "data" not in fi:
            raise ConfigError("fit: missing required key 'data'")
        parsed = {"data": str(fi["data"])}
        par = fi.get("parameterization", "explicit")
        if par not in ("explicit", "from_bath"):
            raise ConfigError(f"fit.parameterization must be 'explicit' or 'from_bath', got {par!r}")
        parsed["parameterization"] = par
        frozen = fi.get("frozen", [])
        if not isinstance(frozen, list) or any(name not in PARAM_NAMES for name in frozen):
            raise ConfigError(f"fit.frozen must list parameter names from {PARAM_NAMES}")
        parsed["frozen"] = list(frozen)
        if "seed_params" in fi:
            parsed["seed_params"] = _quantities(fi["seed_params"], PARAM_NAMES, "fit.seed_params")
        if "multistart" in fi:
            if isinstance(fi["multistart"], bool) or not isinstance(fi["multistart"], int) or fi["multistart"] < 0:
                raise ConfigError("fit.multistart must be a non-negative integer")
            parsed["multistart"] = fi["multistart"]
        if "use_phase" in fi:
            if not isinstance(fi["use_phase"], bool):
                raise ConfigError("fit.use_phase must be true or false")
            parsed["use_phase"] = fi["use_phase"]
        spec.fit = parsed
    return spec


load_config = parse_config


def load_spectrum(path) -> SpectrumData:
    """Read a spectrum CSV (header ``frequency_hz,magnitude_db[,phase_rad][,sigma_db]``).

    Blank lines and lines starting with ``#`` are ignored. Rows are numbered
    from 1 after the header. Out-of-order rows are sorted with a warning;
    repeated frequencies are rejected.
    """
    path = Path(path)
    with path.open(newline="") as fh:
        lines = [(k + 1, line) for k, line in enumerate(fh) if line.strip() and not line.lstrip().startswith("#")]
    if not lines:
        raise SpectrumFileError(f"{path}: empty file")
    header_line, header = lines[0]
    cols = tuple(c.strip() for c in next(csv.reader([header])))
    if cols not in SPECTRUM_HEADERS:
        raise SpectrumFileError(
            f"{path}: header {','.join(cols)!r} is not frequency_hz,magnitude_db[,phase_rad][,sigma_db]"
        )
    data = np.empty((len(lines) - 1, len(cols)))
    for row, (line_no, line) in enumerate(lines[1:], start=1):
        cells = next(csv.reader([line]))
        if len(cells) != len(cols):
            raise SpectrumFileError(f"{path}: row {row} (line {line_no}) has {len(cells)} cells, expected {len(cols)}")
        for c, cell in enumerate(cells):
            try:
                value = float(cell)
            except ValueError:
                raise SpectrumFileError(
                    f"{path}: row {row} (line {line_no}), column {c + 1} ({cols[c]}): non-numeric cell {cell.strip()!r}"
                ) from None
            if not math.isfinite(value):
                raise SpectrumFileError(f"{path}: row {row} (line {line_no}), column {c + 1} ({cols[c]}): non-finite value")
            data[row - 1, c] = value
    if data.shape[0] == 0:
        raise SpectrumFileError(f"{path}: no data rows")
    f = data[:, 0]
    if np.any(np.diff(f) < 0):
        warnings.warn(f"{path}: frequencies out of order; rows sorted", stacklevel=2)
        data = data[np.argsort(f, kind="stable")]
        f = data[:, 0]
    if np.any(np.diff(f) == 0):
        dup = f[1:][np.diff(f) == 0][0]
        raise SpectrumFileError(f"{path}: repeated frequency {fmt(dup)} Hz (frequencies must be strictly increasing)")
    columns = dict(zip(cols, data.T))
    return SpectrumData(f, columns["magnitude_db"], columns.get("phase_rad"), columns.get("sigma_db"))


@dataclass
class Table:
    """Plain columnar result: ``rows`` are sequences matching ``columns``."""

    columns: tuple
    rows: list
    meta: dict = field(default_factory=dict)


def _as_table(result, db_offset: float = 0.0) -> Table:
    if isinstance(result, Table):
        return result
    if isinstance(result, SpectrumData):
        cols = ["frequency_hz", "magnitude_db"]
        arrays = [result.frequencies, result.magnitudes + db_offset]
        if result.phase is not None:
            cols.append("phase_rad")
            arrays.append(result.phase)
        if result.sigma is not None:
            cols.append("sigma_db")
            arrays.append(result.sigma)
        return Table(tuple(cols), [list(r) for r in zip(*arrays)])
    if isinstance(result, SpectrumMap):
        rows = []
        for k, dm in enumerate(result.delta_m):
            for l, f in enumerate(result.frequencies):
                rows.append([f, dm, result.s_db[k, l] + db_offset])
        return Table(("f_hz", "delta_m_hz", "s_db"), rows, {"skipped": [list(p) for p in result.skipped]})
    if isinstance(result, (list, tuple)) and result and all(isinstance(b, Branch) for b in result):
        rows = []
        grid = result[0].detuning
        for k, dm in enumerate(grid):
            for b in result:
                rows.append([dm, b.label, b.values[k].real, b.values[k].imag])
        return Table(("delta_m_hz", "branch", "re_hz", "im_hz"), rows)
    if isinstance(result, FitResult):
        rows = [["param", name, result.values[name], result.stderr.get(name, 0.0)] for name in PARAM_NAMES]
        rows += [["history", str(k), v, ""] for k, v in enumerate(result.history)]
        rows += [
            ["info", "status", result.status, ""],
            ["info", "converged", result.converged, ""],
            ["info", "parameterization", result.parameterization, ""],
            ["info", "free", " ".join(result.free), ""],
            ["info", "n_iter", result.n_iter, ""],
            ["info", "attempts", result.attempts, ""],
            ["info", "residual_norm", result.residual_norm, ""],
        ]
        for k, alt in enumerate(result.alternates):
            rows += [[f"alternate{k}", name, alt[name], ""] for name in PARAM_NAMES]
        return Table(("section", "key", "value", "stderr"), rows)
    raise TypeError(f"cannot export results of type {type(result).__name__}")


def _fit_json(result: FitResult) -> dict:
    return {
        "parameters": {n: {"value": _round12(result.values[n]), "stderr": _round12(result.stderr.get(n, 0.0))} for n in PARAM_NAMES},
        "residual_history": [_round12(v) for v in result.history],
        "status": result.status,
        "converged": result.converged,
        "parameterization": result.parameterization,
        "free": list(result.free),
        "n_iter": result.n_iter,
        "attempts": result.attempts,
        "residual_norm": _round12(result.residual_norm),
        "alternates": [{n: _round12(alt[n]) for n in PARAM_NAMES} for alt in result.alternates],
    }


def render_results(result, fmt_name: str = "csv", db_offset: float = 0.0) -> str:
    """Serialized text of a result in ``csv`` or ``json``."""
    if fmt_name == "json":
        if isinstance(result, FitResult):
            obj = _fit_json(result)
        else:
            table = _as_table(result, db_offset)
            obj = {col: [_round12(r[i]) for r in table.rows] for i, col in enumerate(table.columns)}
            if table.meta:
                obj["meta"] = _jsonable(table.meta)
        return json.dumps(obj, indent=1) + "\n"
    if fmt_name != "csv":
        raise ConfigError(f"unknown output format {fmt_name!r}")
    table = _as_table(result, db_offset)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(table.columns)
    for row in table.rows:
        writer.writerow([fmt(x) for x in row])
    return buf.getvalue()


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    return _round12(obj)


def export_results(result, path, fmt_name: str = "csv", db_offset: float = 0.0) -> None:
    """Write ``result`` to ``path``. ``db_offset`` shifts dB columns (display only)."""
    text = render_results(result, fmt_name, db_offset)
    with open(path, "w", newline="") as fh:
        fh.write(text)
