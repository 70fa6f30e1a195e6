"""Experiment configuration, orchestration, persistence and plot-script emission."""

import copy
import datetime as _dt
import hashlib
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from . import __version__, csvio
from .classical import (
    DEFAULT_MAPS, PhaseMap, classical_cost_curve, divergence_growth, tangent_lyapunov,
)
from .costmeter import cost_exponent, prediction_cost_curve, ritz_spectrum_cost
from .errors import FormatError, ValidationError
from .ledger import HARDWARE_BITS
from .evolution import overlap_series
from .horizon import horizon_report, predict_horizon_theory, write_reports
from .perturbation import ErrorDistribution, ErrorKind, energy_dispersion, sample_perturbed
from .ritz import ModelHamiltonian, convergence_study
from .spectral_core import SpectralModel

EXPERIMENTS = ("evolve", "horizon", "amplitude", "ritz", "cost_scan", "classical", "fig1")
STOCHASTIC = {"evolve", "horizon", "amplitude", "fig1"}

DEFAULTS = {
    "evolve": {"dim": 200, "dE": 1e-3, "hbar": 1.0, "distribution": "uniform",
               "dE_coeff": 0.0, "residual_eps": None, "mode": "diagonal",
               "t_max_tp": 20.0, "samples": 4001},
    "horizon": {"dim": 200, "dE": [1e-2, 1e-3, 1e-4], "seeds": 8, "hbar": 1.0,
                "threshold": 0.1, "window": 16, "samples_per_tp": 200},
    "amplitude": {"dims": [50, 200, 800], "dE": 1e-3, "seeds": 8, "hbar": 1.0,
                  "tail": [10.0, 100.0], "tail_samples": 4000},
    "ritz": {"model": "coupled_quartic_2d", "lambda": 0.1, "omega": 1.0, "hbar": 1.0,
             "dims": [6, 8, 10, 12, 14], "levels": 10, "reference_D": 24},
    "cost_scan": {"T_min": 1e2, "T_max": 1e12, "points": 11, "hbar": 1.0,
                  "systems": ["integrable", "nonintegrable"], "n_levels": 100,
                  "lambda": 0.1, "dims": [6, 8, 10, 12, 14], "levels": 10,
                  "reference_D": 24, "beta_dims": [8, 16, 32]},
    "classical": {"K": 7.0, "delta0": 1e-60, "n_bits": 256, "rotor_steps": 200,
                  "T_min": 1e3, "T_max": 1e30, "points": 28, "delta": 1e-3,
                  "alpha_model": 2.0},
    "fig1": {"dim": 200, "dE": 1e-3, "hbar": 1.0, "distribution": "gaussian",
             "dE_coeff": 1e-3, "overlap_tp": 20.0, "overlap_samples": 4001,
             "deviation_tp": 200.0, "deviation_samples": 20001},
}


def _coerce(value):
    # YAML 1.1 reads exponent literals without a dot (1e-3) as strings
    if isinstance(value, str):
        try:
            return float(value)
        except ValueError:
            return value
    if isinstance(value, list):
        return [_coerce(v) for v in value]
    if isinstance(value, dict):
        return {k: _coerce(v) for k, v in value.items()}
    return value


@dataclass
class ExperimentConfig:
    experiment: str
    parameters: dict = field(default_factory=dict)
    output_dir: str = "results"

    def validate(self):
        if self.experiment not in EXPERIMENTS:
            raise ValidationError(
                f"unknown experiment {self.experiment!r}; choose one of {', '.join(EXPERIMENTS)}",
                key="experiment")
        allowed = set(DEFAULTS[self.experiment]) | {"seed"}
        for key in self.parameters:
            if key not in allowed:
                raise ValidationError(
                    f"unknown parameter {key!r} for experiment {self.experiment!r}", key=key)
        if self.experiment in STOCHASTIC and self.parameters.get("seed") is None:
            raise ValidationError(f"experiment {self.experiment!r} needs a seed", key="seed")
        return self

    def resolved(self):
        params = copy.deepcopy(DEFAULTS[self.experiment])
        params.update(copy.deepcopy(self.parameters))
        return params

    def to_dict(self):
        return {"experiment": self.experiment, "parameters": copy.deepcopy(self.parameters),
                "output_dir": str(self.output_dir)}

    @classmethod
    def from_dict(cls, data):
        if not isinstance(data, dict):
            raise ValidationError("config must be a mapping")
        unknown = set(data) - {"experiment", "parameters", "output_dir"}
        if unknown:
            key = sorted(unknown)[0]
            raise ValidationError(f"unknown config key {key!r}", key=key)
        return cls(data.get("experiment", ""), _coerce(dict(data.get("parameters") or {})),
                   str(data.get("output_dir", "results")))

    def dumps(self):
        return yaml.safe_dump(self.to_dict(), sort_keys=True)

    @classmethod
    def loads(cls, text):
        return cls.from_dict(yaml.safe_load(text) or {})

    @classmethod
    def load(cls, path):
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ValidationError(f"cannot read config {path}: {exc}", key="config") from exc
        return cls.loads(text)


def parse_override(item):
    """``key=value`` with the value parsed as YAML (numbers, lists, null)."""
    if "=" not in item:
        raise ValidationError(f"override {item!r} is not key=value", key=item)
    key, raw = item.split("=", 1)
    return key.strip(), _coerce(yaml.safe_load(raw))


@dataclass
class RunManifest:
    config: dict
    tool_version: str
    started: str
    finished: str
    files: dict

    def to_dict(self):
        return {"config": self.config, "tool_version": self.tool_version,
                "started": self.started, "finished": self.finished, "files": self.files}

    def verify(self, root):
        return all(sha256_file(Path(root) / name) == digest
                   for name, digest in self.files.items())


def sha256_file(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


# -- spectrum cache ----------------------------------------------------------

def default_cache_dir():
    env = os.environ.get("HORIZONLAB_CACHE")
    if env:
        return Path(env)
    return Path.home() / ".cache" / "horizonlab"


class SpectrumCache:
    """Content-addressed store of Ritz spectra and their operation counts.

    Each entry is a spectrum CSV (coefficient columns are zero: only the
    energies are cached) plus a JSON sidecar with the key and the counters.
    """

    def __init__(self, directory=None):
        self.directory = Path(directory) if directory is not None else default_cache_dir()

    @staticmethod
    def digest(key):
        blob = json.dumps(key, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    def _paths(self, key):
        d = self.digest(key)
        base = self.directory / d[:2] / d
        return base.with_suffix(".csv"), base.with_suffix(".json")

    def get(self, key):
        csv_path, meta_path = self._paths(key)
        if not (csv_path.exists() and meta_path.exists()):
            return None
        meta = json.loads(meta_path.read_text(encoding="utf-8"))
        if meta.get("key") != json.loads(json.dumps(key)):
            return None
        cols = csvio.read_csv(csv_path, csvio.SPECTRUM_HEADER)
        return csvio.float_column(cols, "energy"), meta["counts"]

    def put(self, key, values, counts):
        csv_path, meta_path = self._paths(key)
        csvio.write_csv(csv_path, csvio.SPECTRUM_HEADER,
                        [(mu, e, 0.0, 0.0) for mu, e in enumerate(values)])
        meta_path.write_text(json.dumps({"key": key, "counts": counts}, sort_keys=True),
                             encoding="utf-8")


# -- experiments -------------------------------------------------------------

def _model(dim, hbar):
    return SpectralModel.oscillator_ladder(int(dim), hbar=hbar)


def _dist(params, seed, dispersion):
    kind = ErrorKind(params.get("distribution", "uniform"))
    if kind is ErrorKind.UNIFORM:
        return ErrorDistribution.uniform_with_dispersion(dispersion, seed)
    return ErrorDistribution(kind, dispersion, seed)


def _map(threads, fn, items):
    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def _seed_list(params):
    seeds = params["seeds"]
    base = int(params["seed"])
    if isinstance(seeds, int):
        return [base + k for k in range(seeds)]
    return [int(s) for s in seeds]


def _exp_evolve(p, out, ctx):
    model = _model(p["dim"], p["hbar"])
    pert = sample_perturbed(model, _dist(p, int(p["seed"]), p["dE"]), p["dE_coeff"],
                            p["residual_eps"])
    tp = predict_horizon_theory(energy_dispersion(model, pert), model.hbar)
    t_max = p["t_max_tp"] * (tp if math.isfinite(tp) else 1.0)
    series = overlap_series(model, pert, np.linspace(0.0, t_max, int(p["samples"])), p["mode"])
    return [model.to_csv(out / "spectrum.csv"),
            pert.to_csv(out / "perturbed_spectrum.csv", model),
            series.to_csv(out / "evolve_series.csv")]


def _exp_horizon(p, out, ctx):
    dEs = p["dE"] if isinstance(p["dE"], list) else [p["dE"]]
    model = _model(p["dim"], p["hbar"])
    points = [(float(dE), s) for dE in dEs for s in _seed_list(p)]

    def one(point):
        dE, seed = point
        pert = sample_perturbed(model, ErrorDistribution.uniform_with_dispersion(dE, seed))
        return horizon_report(model, pert, p["threshold"], int(p["window"]),
                              int(p["samples_per_tp"]), tail=(10.0, 100.0))

    reports = _map(ctx["threads"], one, points)
    return [write_reports(out / "horizon_report.csv", reports)]


def _exp_amplitude(p, out, ctx):
    points = [(int(dim), s) for dim in p["dims"] for s in _seed_list(p)]
    tail = tuple(p["tail"])

    def one(point):
        dim, seed = point
        model = _model(dim, p["hbar"])
        pert = sample_perturbed(model, ErrorDistribution.uniform_with_dispersion(p["dE"], seed))
        return horizon_report(model, pert, tail=tail, tail_samples=int(p["tail_samples"]))

    reports = _map(ctx["threads"], one, points)
    return [write_reports(out / "amplitude_report.csv", reports)]


def _hamiltonian(p):
    if p["model"] == "harmonic_1d":
        return ModelHamiltonian.harmonic(p["omega"], p["hbar"])
    if p["model"] == "coupled_quartic_2d":
        return ModelHamiltonian.coupled_quartic(p["lambda"], p["omega"], p["hbar"])
    raise ValidationError(f"unknown model {p['model']!r}", key="model")


def _exp_ritz(p, out, ctx):
    h = _hamiltonian(p)
    study = convergence_study(h, p["dims"], int(p["levels"]), int(p["reference_D"]),
                              cache=ctx["cache"])
    return [csvio.write_csv(out / "convergence.csv", csvio.CONVERGENCE_HEADER, study.rows()),
            csvio.write_csv(out / "study_summary.csv", csvio.STUDY_SUMMARY_HEADER,
                            [study.summary_row()])]


def _exp_cost_scan(p, out, ctx):
    T = np.geomspace(float(p["T_min"]), float(p["T_max"]), int(p["points"]))
    h = ModelHamiltonian.coupled_quartic(p["lambda"], hbar=p["hbar"])
    paths, summary = [], []
    study = None
    for system in p["systems"]:
        if system == "nonintegrable" and study is None:
            study = convergence_study(h, p["dims"], int(p["levels"]), int(p["reference_D"]),
                                      cache=ctx["cache"])
        curve = prediction_cost_curve(system, T, hbar=p["hbar"], n_levels=int(p["n_levels"]),
                                      study=study, cache=ctx["cache"])
        paths.append(curve.write(out / f"cost_scan_{system}.csv"))
        summary.append(curve.fit.summary_row(system))
    beta, r2, _ = cost_exponent(h, p["beta_dims"], cache=ctx["cache"])
    # fixed hardware precision, no accuracy target: dE column is zero
    beta_rows = []
    for D in p["beta_dims"]:
        led = ritz_spectrum_cost(h, int(D), n_bits=HARDWARE_BITS, cache=ctx["cache"])
        beta_rows.append((float(D), 0.0, HARDWARE_BITS, int(D), led.adds, led.muls, led.divs,
                          led.model_cost))
    paths.append(csvio.write_csv(out / "ritz_cost_vs_D.csv", csvio.COST_SCAN_HEADER, beta_rows))
    summary.append(("ritz_cost_vs_D", "power_law", beta, r2, "n/a"))
    paths.append(csvio.write_csv(out / "fit_summary.csv", csvio.FIT_SUMMARY_HEADER, summary))
    return paths


def _exp_classical(p, out, ctx):
    chaotic = PhaseMap("standard", p["K"], DEFAULT_MAPS["chaotic"].theta,
                       DEFAULT_MAPS["chaotic"].p)
    lam = tangent_lyapunov(chaotic, steps=5000)
    steps = int(math.log(0.1 / p["delta0"]) / max(lam, 0.5) * 1.2)
    growth = {
        "chaotic": divergence_growth(chaotic, p["delta0"], steps, int(p["n_bits"])),
        "integrable": divergence_growth(DEFAULT_MAPS["integrable"], p["delta0"],
                                        int(p["rotor_steps"]), int(p["n_bits"])),
    }
    maps = {"chaotic": chaotic, "integrable": DEFAULT_MAPS["integrable"]}
    T = np.geomspace(float(p["T_min"]), float(p["T_max"]), int(p["points"]))
    paths, summary = [], []
    for name in ("chaotic", "integrable"):
        g = growth[name]
        paths.append(g.to_csv(out / f"divergence_{name}.csv"))
        res = classical_cost_curve(maps[name], T, p["delta"], p["alpha_model"], growth=g,
                                   delta0=p["delta0"])
        paths.append(res.write(out / f"classical_cost_{name}.csv"))
        summary.append(res.mantissa_model.summary_row(f"{name}/mantissa_model"))
        summary.append(res.measured.summary_row(f"{name}/measured"))
    paths.append(csvio.write_csv(out / "classical_fit_summary.csv", csvio.FIT_SUMMARY_HEADER,
                                 summary))
    return paths


def _exp_fig1(p, out, ctx):
    model = _model(p["dim"], p["hbar"])
    pert = sample_perturbed(model, _dist(p, int(p["seed"]), p["dE"]), p["dE_coeff"])
    tp = predict_horizon_theory(energy_dispersion(model, pert), model.hbar)
    short = overlap_series(model, pert,
                           np.linspace(0.0, p["overlap_tp"] * tp, int(p["overlap_samples"])))
    long = overlap_series(model, pert,
                          np.linspace(0.0, p["deviation_tp"] * tp, int(p["deviation_samples"])))
    return [short.to_csv(out / "fig1_overlap.csv"), long.to_csv(out / "fig1_deviation.csv")]


RUNNERS = {
    "evolve": _exp_evolve, "horizon": _exp_horizon, "amplitude": _exp_amplitude,
    "ritz": _exp_ritz, "cost_scan": _exp_cost_scan, "classical": _exp_classical,
    "fig1": _exp_fig1,
}

EXPECTED_HEADERS = {
    "spectrum.csv": csvio.SPECTRUM_HEADER,
    "perturbed_spectrum.csv": csvio.PERTURBED_HEADER,
    "evolve_series.csv": csvio.SERIES_HEADER,
    "fig1_overlap.csv": csvio.SERIES_HEADER,
    "fig1_deviation.csv": csvio.SERIES_HEADER,
    "horizon_report.csv": csvio.HORIZON_HEADER,
    "amplitude_report.csv": csvio.HORIZON_HEADER,
    "convergence.csv": csvio.CONVERGENCE_HEADER,
    "study_summary.csv": csvio.STUDY_SUMMARY_HEADER,
    "fit_summary.csv": csvio.FIT_SUMMARY_HEADER,
    "classical_fit_summary.csv": csvio.FIT_SUMMARY_HEADER,
    "ritz_cost_vs_D.csv": csvio.COST_SCAN_HEADER,
}


def expected_header(name):
    if name in EXPECTED_HEADERS:
        return EXPECTED_HEADERS[name]
    if name.startswith("cost_scan_"):
        return csvio.COST_SCAN_HEADER
    if name.startswith("classical_cost_"):
        return csvio.CLASSICAL_COST_HEADER
    if name.startswith("divergence_"):
        return csvio.DIVERGENCE_HEADER
    return None


def _check_header(path):
    want = expected_header(path.name)
    with open(path, encoding="utf-8") as fh:
        got = tuple(fh.readline().rstrip("\n").split(","))
    if want is not None and got != tuple(want):
        raise FormatError(f"{path}: header {got} does not match {tuple(want)}")


def _now():
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


def run(config, threads=1, plot=False, cache=None):
    """Execute one experiment; write its CSVs, optional plot scripts and a manifest."""
    config.validate()
    params = config.resolved()
    out = Path(config.output_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc}") from exc
    started = _now()
    ctx = {"threads": int(threads or 1),
           "cache": cache if cache is not None else SpectrumCache()}
    paths = [Path(p) for p in RUNNERS[config.experiment](params, out, ctx)]
    for path in paths:
        _check_header(path)
    if plot:
        paths.extend(emit_plots(config.experiment, paths, out))
    files = {str(p.relative_to(out)): sha256_file(p) for p in sorted(paths)}
    manifest = RunManifest(config.to_dict(), __version__, started, _now(), files)
    (out / "manifest.json").write_text(json.dumps(manifest.to_dict(), indent=2, sort_keys=True),
                                       encoding="utf-8")
    return manifest


# -- plot scripts ------------------------------------------------------------

PLOT_COLUMNS = {
    "overlap": ("time", "overlap_re"),
    "deviation": ("time", "deviation"),
    "cost_scan": ("T", "model_cost"),
    "convergence": ("D", "level", "error"),
    "divergence": ("step", "separation"),
}


def emit_plot_script(csv_paths, kind, script_path=None):
    """Write a gnuplot script for ``kind`` reading the given CSV files.

    ``deviation`` plots carry a ``y = sqrt(2)`` guide; ``cost_scan`` plots are
    log-log with both fitted scaling curves overlaid.
    """
    if kind not in PLOT_COLUMNS:
        raise ValueError(f"unknown plot kind {kind!r}")
    if isinstance(csv_paths, (str, Path)):
        csv_paths = [csv_paths]
    csv_paths = [Path(p) for p in csv_paths]
    if not csv_paths:
        raise FormatError("no CSV files given")
    data = [csvio.read_csv(p, PLOT_COLUMNS[kind]) for p in csv_paths]
    if script_path is None:
        script_path = csv_paths[0].with_name(f"{csv_paths[0].stem}_{kind}.gp")
    script_path = Path(script_path)

    lines = ["set datafile separator ','", "set key top right",
             "set terminal pngcairo size 900,600",
             f"set output '{script_path.with_suffix('.png').name}'"]
    files = [p.name for p in csv_paths]
    if kind == "overlap":
        lines += ["set xlabel 'T'", "set ylabel 'Re <psi(T)|psi~(T)>'",
                  "plot " + ", ".join(f"'{f}' using 1:2 skip 1 with lines title '{f}'"
                                      for f in files)]
    elif kind == "deviation":
        lines += ["set xlabel 'T'", "set ylabel '||delta psi(T)||'", "set yrange [0:2.1]",
                  "plot " + ", ".join(f"'{f}' using 1:4 skip 1 with lines title '{f}'"
                                      for f in files)
                  + ", sqrt(2) with lines dashtype 2 title 'sqrt(2)'"]
    elif kind == "cost_scan":
        from .costmeter import linear_fit
        lines += ["set logscale xy", "set xlabel 'T'", "set ylabel 'model bit operations'"]
        plots = []
        for k, (f, cols) in enumerate(zip(files, data)):
            T = csvio.float_column(cols, "T")
            cost = csvio.float_column(cols, "model_cost")
            p, a, _ = linear_fit(np.log(T), np.log(cost))
            q, b, _ = linear_fit(np.log(np.log2(T)), np.log(cost))
            lines += [f"pow{k}(x) = exp({a!r}) * x**{p!r}",
                      f"plg{k}(x) = exp({b!r}) * (log(x)/log(2))**{q!r}"]
            plots += [f"'{f}' using 1:8 skip 1 with points title '{f}'",
                      f"pow{k}(x) title 'a T^{p:.3g}'",
                      f"plg{k}(x) dashtype 2 title 'a (log2 T)^{q:.3g}'"]
        lines.append("plot " + ", ".join(plots))
    elif kind == "convergence":
        lines += ["set logscale xy", "set xlabel 'D'", "set ylabel '|E(D) - E_ref|'",
                  "plot " + ", ".join(f"'{f}' using 1:3:2 skip 1 with points palette title '{f}'"
                                      for f in files)]
    else:
        lines += ["set logscale y", "set xlabel 'step'", "set ylabel 'separation'",
                  "plot " + ", ".join(f"'{f}' using 1:2 skip 1 with lines title '{f}'"
                                      for f in files)]
    script_path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return script_path


def emit_plots(experiment, paths, out):
    names = {p.name: p for p in paths}
    scripts = []
    if experiment == "fig1":
        scripts.append(emit_plot_script(names["fig1_overlap.csv"], "overlap",
                                        out / "fig1_overlap.gp"))
        scripts.append(emit_plot_script(names["fig1_deviation.csv"], "deviation",
                                        out / "fig1_deviation.gp"))
    elif experiment == "evolve":
        scripts.append(emit_plot_script(names["evolve_series.csv"], "overlap"))
        scripts.append(emit_plot_script(names["evolve_series.csv"], "deviation"))
    elif experiment == "cost_scan":
        scans = [p for n, p in sorted(names.items()) if n.startswith("cost_scan_")]
        scripts.append(emit_plot_script(scans, "cost_scan", out / "cost_scan.gp"))
    elif experiment == "ritz":
        scripts.append(emit_plot_script(names["convergence.csv"], "convergence"))
    elif experiment == "classical":
        divs = [p for n, p in sorted(names.items()) if n.startswith("divergence_")]
        scripts.append(emit_plot_script(divs, "divergence", out / "divergence.gp"))
    return scripts
