"""Command-line front end.

Every artifact written here embeds the fully resolved run configuration, its
SHA-256 and the random seed, so any output can be regenerated bit-for-bit.
Configuration is layered: built-in defaults, then a JSON file given with
``--config``, then explicit command-line flags.
"""

import argparse
import csv
import hashlib
import io
import json
import math
import sys
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import List, Optional

import jsonschema
import numpy as np

from . import __version__, kernels
from .binned import (BinningConfig, DetectorConfig, Measurement, Outcome, PROTOCOL_LABELS, Protocol,
                     measurement_for)
from .errors import ConfigError, HomFisherError, ParameterError
from .estimate import estimate as run_estimate
from .information import (ParameterSet, cfi_delta, fim_analysis, fim_numeric, optimal_delta, qfi,
                          qfi_two_photon, relative_information)
from .model import PARAMETER_NAMES, PhysicalParams
from .simulate import RandomSeed, from_mapping, sample_generative, sample_outcomes

SCHEMA_VERSION = 1
EXIT_OK, EXIT_CONFIG, EXIT_BOUNDARY, EXIT_DEGENERATE, EXIT_BENCHMARK = 0, 2, 3, 4, 5
SI_DEFAULT_SIGMA = 4.6e12  # 4.6 ps^-1 in s^-1
BENCHMARK_SIGMA_PS = 4.6

_NUM = {"type": "number"}
_POS = {"type": "number", "exclusiveMinimum": 0}
_NAMES = {"type": "array", "items": {"enum": list(PARAMETER_NAMES)}, "minItems": 1, "uniqueItems": True}

CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["schema_version"],
    "properties": {
        "schema_version": {"const": SCHEMA_VERSION},
        "delta": _NUM,
        "alpha": {"type": "number", "minimum": 0, "maximum": 1},
        "sigma": _POS,
        "gamma": {"type": "number", "minimum": 0, "maximum": 1},
        "sample_delay": _NUM,
        "adjustable_delay": _NUM,
        "bin_width": {"type": ["number", "null"], "exclusiveMinimum": 0},
        "tail_mass_tolerance": {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1e-3},
        "max_bins": {"type": ["integer", "null"], "minimum": 1},
        "detector": {"enum": ["bucket", "nr"]},
        "timing": {"enum": ["tr", "notr"]},
        "protocol": {"enum": ["hom", "nohom"]},
        "units": {"enum": ["natural", "si"]},
        "seed": {"type": "integer", "minimum": 0, "maximum": 2 ** 64 - 1},
        "stream_id": {"type": "integer", "minimum": 0, "maximum": 2 ** 64 - 1},
        "n_trials": {"type": "integer", "minimum": 1},
        "sampler": {"enum": ["generative", "categorical"]},
        "parameter_set": _NAMES,
        "optimal_delta": {"type": "boolean"},
        "workers": {"type": "integer", "minimum": 1},
        "scan": {
            "type": "object",
            "additionalProperties": False,
            "required": ["parameter", "start", "stop", "steps"],
            "properties": {
                "parameter": {"enum": ["delta", "alpha", "sigma", "gamma", "bin_width"]},
                "start": _NUM,
                "stop": _NUM,
                "steps": {"type": "integer", "minimum": 1},
                "protocols": {"type": "array", "items": {"enum": list(PROTOCOL_LABELS)}, "minItems": 1},
                "fim_params": _NAMES,
            },
        },
    },
}

DEFAULTS = {
    "schema_version": SCHEMA_VERSION,
    "alpha": 1.0,
    "gamma": 0.0,
    "bin_width": None,
    "tail_mass_tolerance": 1e-12,
    "max_bins": None,
    "detector": "bucket",
    "timing": "notr",
    "protocol": "hom",
    "units": "natural",
    "seed": 0,
    "stream_id": 0,
    "n_trials": 100000,
    "sampler": "generative",
    "parameter_set": ["delta"],
    "optimal_delta": False,
    "workers": 1,
}

_MEASUREMENT_KEYS = ("detector", "timing", "protocol", "bin_width", "tail_mass_tolerance", "max_bins", "units")


@dataclass(frozen=True)
class DelayGeometry:
    """Sample-induced delay and the experimenter's adjustable compensating delay."""

    sample_delay: float = 0.0
    adjustable_delay: float = 0.0

    @property
    def delta(self) -> float:
        return self.sample_delay - self.adjustable_delay


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

def validate_config(cfg: dict) -> None:
    try:
        jsonschema.validate(cfg, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(x) for x in exc.absolute_path) or "<root>"
        raise ConfigError(f"config error at {where}: {exc.message}") from None


def load_config_file(path: str) -> dict:
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    validate_config(cfg)
    return cfg


def _flag_layer(args) -> dict:
    layer = {}
    for key in ("delta", "alpha", "sigma", "gamma", "sample_delay", "adjustable_delay", "bin_width",
                "tail_mass_tolerance", "max_bins", "detector", "timing", "protocol", "units", "seed",
                "stream_id", "n_trials", "sampler", "workers"):
        value = getattr(args, key, None)
        if value is not None:
            layer[key] = value
    if getattr(args, "params", None):
        layer["parameter_set"] = list(ParameterSet(args.params))
    if getattr(args, "optimal_delta", False):
        layer["optimal_delta"] = True
    scan_flags = {k: getattr(args, "scan_" + k, None) for k in ("parameter", "start", "stop", "steps")}
    if any(v is not None for v in scan_flags.values()):
        layer["scan"] = {k: v for k, v in scan_flags.items() if v is not None}
    if getattr(args, "protocols", None):
        layer.setdefault("scan", {})["protocols"] = [s.strip() for s in args.protocols.split(",") if s.strip()]
    if getattr(args, "fim_params", None):
        layer.setdefault("scan", {})["fim_params"] = list(ParameterSet(args.fim_params))
    return layer


def resolve_config(*layers: dict) -> dict:
    """Merge layers over the defaults and derive the effective delay and width."""
    cfg = dict(DEFAULTS)
    for layer in layers:
        for key, value in layer.items():
            if key == "scan" and isinstance(cfg.get("scan"), dict):
                cfg["scan"] = {**cfg["scan"], **value}
            else:
                cfg[key] = value
    geometry = [k for k in ("sample_delay", "adjustable_delay") if k in cfg]
    if geometry:
        g = DelayGeometry(float(cfg.get("sample_delay", 0.0)), float(cfg.get("adjustable_delay", 0.0)))
        # a resolved config carries both; they only conflict when they disagree
        if "delta" in cfg and cfg["delta"] != g.delta:
            raise ConfigError("give either delta or the delay geometry (sample/adjustable delay), not both")
        cfg["sample_delay"], cfg["adjustable_delay"] = g.sample_delay, g.adjustable_delay
        cfg["delta"] = g.delta
    cfg.setdefault("delta", 0.0)
    if cfg["units"] == "natural":
        if "sigma" in cfg and cfg["sigma"] != 1.0:
            raise ConfigError("natural units measure time in 1/sigma, so sigma is fixed at 1; use --units si")
        cfg["sigma"] = 1.0
    else:
        cfg.setdefault("sigma", SI_DEFAULT_SIGMA)
    if cfg["timing"] == "tr" and cfg["bin_width"] is None:
        raise ConfigError("time-resolved detection needs --bin-width")
    validate_config(cfg)
    return cfg


def config_hash(cfg: dict) -> str:
    return hashlib.sha256(json.dumps(cfg, sort_keys=True).encode()).hexdigest()


def params_from(cfg: dict) -> PhysicalParams:
    return PhysicalParams(cfg["delta"], cfg["alpha"], cfg["sigma"], cfg["gamma"])


def measurement_from(cfg: dict) -> Measurement:
    timed = cfg["timing"] == "tr"
    detector = DetectorConfig(cfg["detector"] == "nr", timed)
    binning = BinningConfig(cfg["bin_width"], cfg["tail_mass_tolerance"], cfg["max_bins"]) if timed else None
    return Measurement(detector, Protocol(cfg["protocol"]), binning)


# ---------------------------------------------------------------------------
# output helpers
# ---------------------------------------------------------------------------

def fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def metadata_lines(command: str, cfg: dict, extra: Optional[dict] = None) -> List[str]:
    lines = [f"homfisher {command}", f"version: {__version__}", f"backend: {kernels.BACKEND}",
             f"seed: {cfg['seed']}", f"stream_id: {cfg['stream_id']}", f"units: {cfg['units']}"]
    for k, v in (extra or {}).items():
        lines.append(f"{k}: {v}")
    lines.append("config: " + json.dumps(cfg, sort_keys=True))
    lines.append(f"config_sha256: {config_hash(cfg)}")
    return ["# " + line for line in lines]


def write_csv(path: Optional[str], meta: List[str], header: List[str], rows) -> None:
    buf = io.StringIO()
    for line in meta:
        buf.write(line + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([fmt(v) if not isinstance(v, str) else v for v in row])
    _emit(path, buf.getvalue())


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def write_json(path: Optional[str], payload: dict) -> None:
    _emit(path, json.dumps(_jsonable(payload), indent=2) + "\n")


def _emit(path, text):
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


def read_csv(path: str):
    """Return ``(metadata dict, header, rows)`` from a file written by :func:`write_csv`."""
    meta, body = {}, []
    try:
        with open(path) as fh:
            for line in fh:
                if line.startswith("#"):
                    key, _, value = line[1:].strip().partition(": ")
                    meta[key] = value
                elif line.strip():
                    body.append(line)
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    rows = list(csv.reader(body))
    if not rows:
        raise ConfigError(f"{path} has no header row")
    return meta, rows[0], rows[1:]


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_dist(cfg: dict, out: Optional[str]) -> int:
    p, m = params_from(cfg), measurement_from(cfg)
    dist = m.distribution(p)
    rows = [(o.kind, "" if o.index is None else str(o.index), pr) for o, pr in zip(dist.outcomes, dist.probabilities)]
    write_csv(out, metadata_lines("dist", cfg, {"n_bins": fmt(dist.n_bins), "label": m.label}),
              ["outcome_kind", "bin_index", "probability"], rows)
    return EXIT_OK


def fisher_report(cfg: dict) -> dict:
    p, m = params_from(cfg), measurement_from(cfg)
    if cfg["optimal_delta"]:
        p = p.replace(delta=optimal_delta(m, p)[0])
    names = ParameterSet(cfg["parameter_set"])
    F = fim_numeric(m, p, names)
    analysis = fim_analysis(F)
    f_delta = cfi_delta(m, p)
    report = {
        "label": m.label,
        "params": p.as_dict(),
        "fim": {"params": list(names), "matrix": F.matrix},
        "rank": analysis.rank,
        "determinant": analysis.determinant,
        "eigenvalues": analysis.eigenvalues,
        "crb_per_trial": analysis.crb,
        "cfi_delta": f_delta,
        "qfi": qfi(p.sigma),
        "qfi_two_photon": qfi_two_photon(p.sigma, p.gamma),
        "relative_information": relative_information(f_delta, p.sigma, p.gamma) if p.gamma < 1 else None,
    }
    return report


def cmd_fisher(cfg: dict, out: Optional[str]) -> int:
    report = fisher_report(cfg)
    report.update(config=cfg, config_sha256=config_hash(cfg), seed=cfg["seed"], version=__version__)
    write_json(out, report)
    return EXIT_OK


def _scan_labels(cfg) -> List[str]:
    labels = cfg["scan"].get("protocols") or list(PROTOCOL_LABELS)
    timed = [lab for lab in labels if lab in ("TR-HOM", "NRTR-HOM", "no-HOM")]
    if timed and cfg["bin_width"] is None and cfg["scan"]["parameter"] != "bin_width":
        raise ConfigError(f"protocols {timed} need --bin-width")
    return labels


def _scan_row(task):
    value, label, cfg = task
    axis = cfg["scan"]["parameter"]
    T = value if axis == "bin_width" else cfg["bin_width"]
    p = params_from(cfg)
    if axis != "bin_width":
        p = p.replace(**{axis: value})
    kw = {"tail_mass_tolerance": cfg["tail_mass_tolerance"], "max_bins": cfg["max_bins"]}
    m = measurement_for(label, T, **kw)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        f = cfi_delta(m, p)
        row = [value, label, f, relative_information(f, p.sigma, p.gamma) if p.gamma < 1 else math.nan]
        fim_params = cfg["scan"].get("fim_params")
        if fim_params:
            a = fim_analysis(fim_numeric(m, p, fim_params))
            row += [a.determinant] + list(a.eigenvalues)
    return row


def scan_rows(cfg: dict) -> List[list]:
    """Rows ordered by grid index then protocol, independent of worker scheduling."""
    if "scan" not in cfg:
        raise ConfigError("scan needs --scan-param/--start/--stop/--steps (or a scan block in the config)")
    spec = cfg["scan"]
    if spec["parameter"] == "sigma" and cfg["units"] == "natural":
        raise ConfigError("sigma cannot be scanned in natural units")
    labels = _scan_labels(cfg)
    grid = np.linspace(spec["start"], spec["stop"], spec["steps"])
    tasks = [(float(v), lab, cfg) for v in grid for lab in labels]
    workers = int(cfg["workers"])
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_scan_row, tasks, chunksize=max(1, len(tasks) // (4 * workers))))
    return [_scan_row(t) for t in tasks]


def cmd_scan(cfg: dict, out: Optional[str]) -> int:
    rows = scan_rows(cfg)
    header = [cfg["scan"]["parameter"], "protocol", "F_delta", "I_rel"]
    fim_params = cfg["scan"].get("fim_params")
    if fim_params:
        header += ["det"] + [f"eig_{i + 1}" for i in range(len(fim_params))]
    write_csv(out, metadata_lines("scan", cfg), header, rows)
    return EXIT_OK


def simulate_counts(cfg: dict):
    p, m = params_from(cfg), measurement_from(cfg)
    sampler = sample_generative if cfg["sampler"] == "generative" else sample_outcomes
    return sampler(p, m, cfg["n_trials"], RandomSeed(cfg["seed"], cfg["stream_id"]))


def cmd_simulate(cfg: dict, out: Optional[str]) -> int:
    hist = simulate_counts(cfg)
    rows = [(o.kind, "" if o.index is None else str(o.index), int(c))
            for o, c in zip(hist.outcomes, hist.counts) if c > 0]
    extra = {"n_trials": hist.n_trials, "n_bins": fmt(hist.n_bins), "label": hist.measurement.label,
             "sampler": cfg["sampler"]}
    if "acceptance_rate" in hist.diagnostics:
        extra["acceptance_rate"] = fmt(hist.diagnostics["acceptance_rate"])
    write_csv(out, metadata_lines("simulate", cfg, extra), ["outcome_kind", "bin_index", "count"], rows)
    return EXIT_OK


def load_counts(path: str):
    """Read a counts CSV back into ``(config, CountsHistogram)``."""
    meta, header, rows = read_csv(path)
    if header != ["outcome_kind", "bin_index", "count"] or "config" not in meta:
        raise ConfigError(f"{path} is not a counts file written by the simulate command")
    try:
        cfg = json.loads(meta["config"])
    except json.JSONDecodeError:
        raise ConfigError(f"{path} carries a corrupt config line") from None
    validate_config(cfg)
    m = measurement_from(cfg)
    mapping = {}
    for kind, index, count in rows:
        o = Outcome(kind, int(index) if index else None)
        mapping[o] = mapping.get(o, 0) + int(count)
    n_bins = int(meta["n_bins"]) if meta.get("n_bins") else None
    hist = from_mapping(m, mapping, n_bins, params_from(cfg), RandomSeed(cfg["seed"], cfg["stream_id"]))
    declared = int(meta.get("n_trials", hist.n_trials))
    if declared != hist.n_trials:
        raise ConfigError(f"{path}: counts sum to {hist.n_trials}, header declares {declared}")
    return cfg, hist


def cmd_estimate(cfg_layers, paths: List[str], out: Optional[str]) -> int:
    file_cfg, hist = load_counts(paths[0])
    base = {k: v for k, v in file_cfg.items() if k not in ("delta", "sample_delay", "adjustable_delay")}
    cfg = resolve_config(base, *cfg_layers)
    for k in _MEASUREMENT_KEYS:
        if cfg.get(k) != file_cfg.get(k):
            raise ConfigError(f"{k}={cfg.get(k)!r} disagrees with the counts file ({file_cfg.get(k)!r})")
    known = params_from(cfg)
    names = cfg["parameter_set"]
    results = [run_estimate(hist, names, known)]
    if len(paths) == 2:
        ref_cfg, ref = load_counts(paths[1])
        if measurement_from(ref_cfg) != hist.measurement:
            raise ConfigError("the two counts files were recorded with different measurements")
        results.append(run_estimate(ref, names, known))
    payload = {"config": cfg, "config_sha256": config_hash(cfg), "seed": file_cfg["seed"],
               "version": __version__, "files": list(paths)}
    payload.update(results[0].as_dict())
    if len(results) == 2:
        payload["reference"] = results[1].as_dict()
        if "delta" in results[0].estimates:
            d1, d2 = results[0].estimates["delta"], results[1].estimates["delta"]
            payload["sample_delay_estimate"] = d1 - d2
            crb = [r.crb_variance for r in results]
            if all(c is not None for c in crb):
                payload["sample_delay_std"] = math.sqrt(crb[0]["delta"] + crb[1]["delta"])
    write_json(out, payload)
    return EXIT_OK


@dataclass(frozen=True)
class BenchmarkResult:
    name: str
    computed: float
    expected: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return abs(self.computed - self.expected) <= self.tolerance


def run_benchmarks(sigma_ps: float = BENCHMARK_SIGMA_PS, alpha: float = 0.9, gamma: float = 0.4):
    """Percentage gains over plain HOM at the optimal delay of each protocol (times in ps)."""
    p = PhysicalParams(0.0, alpha, sigma_ps, gamma)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        best = lambda label, T=None: optimal_delta(measurement_for(label, T), p)[1]  # noqa: E731
        hom = best("HOM")
        gain = lambda label, T=None: 100.0 * (best(label, T) / hom - 1.0)  # noqa: E731
        return [
            BenchmarkResult("NR-HOM vs HOM, no timing", gain("NR-HOM"), 9.9, 0.2),
            BenchmarkResult("TR-HOM vs HOM, T=1 ps", gain("TR-HOM", 1.0), 1.3, 0.5),
            BenchmarkResult("NRTR-HOM vs HOM, T=1 ps", gain("NRTR-HOM", 1.0), 14.0, 2.0),
            BenchmarkResult("no-HOM vs HOM, T=0.2 ps", gain("no-HOM", 0.2), 36.0, 4.0),
            BenchmarkResult("NRTR-HOM vs HOM, T=0.2 ps", gain("NRTR-HOM", 0.2), 50.0, 4.0),
            BenchmarkResult("NRTR-HOM vs HOM, T=0.1 ps", gain("NRTR-HOM", 0.1), 95.0, 5.0),
        ]


def cmd_benchmarks(sigma_ps: float, as_json: bool, out: Optional[str]) -> int:
    results = run_benchmarks(sigma_ps)
    if as_json:
        write_json(out, {"sigma_per_ps": sigma_ps, "alpha": 0.9, "gamma": 0.4, "results": [
            {"name": r.name, "computed_percent": r.computed, "expected_percent": r.expected,
             "tolerance_pp": r.tolerance, "passed": r.passed} for r in results]})
    else:
        lines = [f"benchmarks at sigma={sigma_ps} ps^-1, alpha=0.9, gamma=0.4, optimal delay per protocol"]
        for r in results:
            lines.append(f"{'PASS' if r.passed else 'FAIL'}  {r.name:<28} computed {r.computed:+8.3f}%  "
                         f"expected {r.expected:+.1f}% +- {r.tolerance} pp")
        _emit(out, "\n".join(lines) + "\n")
    return EXIT_OK if all(r.passed for r in results) else EXIT_BENCHMARK


def selftest_checks():
    """Fast oracle checks: ``[(name, passed, detail)]``."""
    from . import verify
    from .information import closed_form_fim_bucket, closed_form_fim_nr

    out = []
    v, _ = verify.quad_integrate(lambda x: np.exp(-x * x), 0.0, math.inf)
    out.append(("gaussian half-line integral", abs(v - math.sqrt(math.pi) / 2) < 1e-10, f"{v:.15f}"))

    p = PhysicalParams(0.37, 0.83, 1.3, 0.25)
    tot = verify.oracle_total(verify.literal_coincidence_density, p) + \
        verify.oracle_total(verify.literal_bunching_density, p)
    out.append(("density normalization", abs(tot - 1.0) < 1e-9, f"{tot:.15f}"))

    worst = 0.0
    for label in ("TR-HOM", "NRTR-HOM", "no-HOM"):
        m = measurement_for(label, 0.45)
        worst = max(worst, float(np.max(np.abs(m.probabilities(p) - verify.oracle_probabilities(m, p)))))
    out.append(("binned probabilities vs quadrature", worst < 1e-10, f"max abs diff {worst:.2e}"))

    f = verify.score_integral_cfi(verify.literal_nohom_density, p)
    out.append(("continuous no-HOM information", abs(f / qfi(p.sigma) - 1) < 1e-3, f"{f:.10f}"))

    names = PARAMETER_NAMES
    rel = 0.0
    for label, closed in (("HOM", closed_form_fim_bucket), ("NR-HOM", closed_form_fim_nr)):
        Fc = closed(p).matrix
        Fn = fim_numeric(measurement_for(label), p, names).matrix
        # entries that vanish identically are compared against the matrix scale
        floor = 1e-3 * np.max(np.abs(Fc))
        rel = max(rel, float(np.max(np.abs(Fn - Fc) / np.maximum(np.abs(Fc), floor))))
    out.append(("closed-form Fisher matrices", rel < 1e-5, f"max rel diff {rel:.2e}"))

    mu = np.linspace(-3, 3, 7)
    a = kernels.np_folded_tent_mass_grid(mu, 0.4, 0.7, 12)
    b = kernels.folded_tent_mass_grid(mu, 0.4, 0.7, 12)
    d = float(np.max(np.abs(a - b)))
    out.append((f"kernel backends ({kernels.BACKEND} vs numpy)", d < 1e-14, f"max abs diff {d:.2e}"))
    out.append(("quantum limits", qfi(1.0) == 4.0 and abs(qfi_two_photon(1.0, 0.4) - 1.44) < 1e-15,
                f"{qfi(1.0)}, {qfi_two_photon(1.0, 0.4)}"))
    return out


def cmd_selftest(out: Optional[str]) -> int:
    checks = selftest_checks()
    lines = [f"{'PASS' if ok else 'FAIL'}  {name}: {detail}" for name, ok, detail in checks]
    _emit(out, "\n".join(lines) + "\n")
    return EXIT_OK if all(ok for _, ok, _ in checks) else 1


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def _u64(text):
    value = int(text, 0)
    if not 0 <= value < 2 ** 64:
        raise argparse.ArgumentTypeError("must be an unsigned 64-bit integer")
    return value


def _common_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("physical parameters")
    g.add_argument("--delta", type=float, help="relative delay (1/sigma in natural units, seconds in si)")
    g.add_argument("--alpha", type=float, help="visibility in [0, 1]")
    g.add_argument("--sigma", type=float, help="spectral width (only with --units si)")
    g.add_argument("--gamma", type=float, help="per-photon loss in [0, 1]")
    g.add_argument("--sample-delay", type=float, help="delay induced by the sample")
    g.add_argument("--adjustable-delay", type=float, help="compensating delay; delta = sample - adjustable")
    g = common.add_argument_group("measurement")
    g.add_argument("--bin-width", type=float, help="detector time-bin width T")
    g.add_argument("--tail-mass-tolerance", type=float, help="mass allowed beyond the enumerated bins")
    g.add_argument("--max-bins", type=int, help="hard cap on the number of enumerated bin separations")
    g.add_argument("--detector", choices=["bucket", "nr"])
    g.add_argument("--timing", choices=["tr", "notr"])
    g.add_argument("--protocol", choices=["hom", "nohom"])
    g.add_argument("--units", choices=["natural", "si"])
    g = common.add_argument_group("run")
    g.add_argument("--config", help="JSON run configuration (schema_version 1)")
    g.add_argument("--out", help="output path (default stdout)")
    g.add_argument("--seed", type=_u64)
    g.add_argument("--stream-id", type=_u64)
    g.add_argument("--workers", type=int)
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common_parser()
    parser = argparse.ArgumentParser(prog="homfisher",
                                     description="Fisher information and estimation for HOM delay sensing.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("dist", parents=[common], help="tabulate the outcome distribution as CSV")

    sp = sub.add_parser("fisher", parents=[common], help="Fisher matrix and derived quantities as JSON")
    sp.add_argument("--params", help="comma-separated parameters (default delta)")
    sp.add_argument("--optimal-delta", action="store_true", help="evaluate at the information-optimal delay")

    sp = sub.add_parser("scan", parents=[common], help="delay information over a parameter grid as CSV")
    sp.add_argument("--scan-param", dest="scan_parameter", choices=["delta", "alpha", "sigma", "gamma", "bin_width"])
    sp.add_argument("--start", dest="scan_start", type=float)
    sp.add_argument("--stop", dest="scan_stop", type=float)
    sp.add_argument("--steps", dest="scan_steps", type=int)
    sp.add_argument("--protocols", help=f"comma-separated subset of {','.join(PROTOCOL_LABELS)}")
    sp.add_argument("--fim-params", help="also report determinant and eigenvalues for these parameters")

    sp = sub.add_parser("simulate", parents=[common], help="simulate detection counts as CSV")
    sp.add_argument("--n-trials", type=int)
    sp.add_argument("--sampler", choices=["generative", "categorical"])

    sp = sub.add_parser("estimate", parents=[common], help="maximum-likelihood estimates from counts CSV")
    sp.add_argument("counts", nargs="+", help="counts file; a second file (no sample) yields the sample delay")
    sp.add_argument("--params", help="comma-separated parameters to estimate (default delta)")

    sp = sub.add_parser("benchmarks", help="percentage gains over HOM at physical bin widths")
    sp.add_argument("--sigma", type=float, default=BENCHMARK_SIGMA_PS, help="spectral width in ps^-1")
    sp.add_argument("--json", action="store_true")
    sp.add_argument("--out")

    sp = sub.add_parser("selftest", help="run the quadrature and differentiation oracles")
    sp.add_argument("--out")
    return parser


def _layers(args) -> list:
    layers = []
    if getattr(args, "config", None):
        layers.append(load_config_file(args.config))
    layers.append(_flag_layer(args))
    return layers


def run(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "benchmarks":
            return cmd_benchmarks(args.sigma, args.json, args.out)
        if args.command == "selftest":
            return cmd_selftest(args.out)
        layers = _layers(args)
        if args.command == "estimate":
            if len(args.counts) > 2:
                raise ConfigError("estimate takes one counts file, or two for the sample-delay difference")
            return cmd_estimate(layers, args.counts, args.out)
        cfg = resolve_config(*layers)
        handler = {"dist": cmd_dist, "fisher": cmd_fisher, "scan": cmd_scan, "simulate": cmd_simulate}
        return handler[args.command](cfg, args.out)
    except HomFisherError as exc:
        print(f"homfisher: error: {exc}", file=sys.stderr)
        return exc.exit_code


def main(argv=None) -> None:
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
