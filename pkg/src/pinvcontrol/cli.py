"""Configuration-driven experiment runner.

::

    pinvcontrol run --config run.json [--out DIR]
    pinvcontrol reproduce {fig3,fig5,fig6} --out DIR
    pinvcontrol basis export --config run.json [--out basis.csv]

Every run writes, under its output directory, the optimized control
(``control.csv``: t, u), the energy trace (``energy.csv``), the iteration
history (``history.csv``), a spectrogram of the control (``spectrogram.csv``)
and ``report.json``. When several strategies are compared, each artifact is
prefixed with the lower-case strategy name. Ensemble evaluations use up to
``$PINVCONTROL_WORKERS`` threads.

Exit status is 0 on success, 2 for configuration errors and 3 for numerical
failures.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
import traceback
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__, config as config_mod, io
from .analysis import SpectrogramSpec, spectrogram
from .dynamics import OscillatorControlProblem, OscillatorModel
from .errors import ConfigError, PinvControlError
from .langevin import BathModel, EnsembleConfig, LangevinEnsembleProblem
from .optimize import OptimizerConfig, ProjectionStrategy, Strategy, optimize, post_truncate
from .subspace import load_basis_csv, projector
from .waveforms import BasisSpec, EnvelopeSpec, TimeGrid, build_basis

log = logging.getLogger("pinvcontrol")

#: Figure name -> preset configurations it runs.
FIGURES = {"fig3": ("fig3a", "fig3c"), "fig5": ("fig5",), "fig6": ("fig6",)}

POST_TRUNCATED = "POST_TRUNCATED"
WARM_START = "WARM_START"


@dataclass(frozen=True)
class RunSummary:
    final_objective: float
    iterations: int
    termination_reason: str
    n_evaluations: int


@dataclass
class RunReport:
    """Outcome of :func:`run`. ``results`` is keyed by strategy name."""

    name: str
    results: dict
    artifacts: dict
    config: dict
    version: str = __version__
    output_dir: str = field(default="", compare=False)

    @property
    def final_objective(self):
        return next(iter(self.results.values())).final_objective

    @property
    def iterations(self):
        return next(iter(self.results.values())).iterations

    @property
    def termination_reason(self):
        return next(iter(self.results.values())).termination_reason

    def to_dict(self):
        return {
            "name": self.name,
            "version": self.version,
            "results": {k: asdict(v) for k, v in self.results.items()},
            "artifacts": self.artifacts,
            "config": self.config,
        }

    def write(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")
        return Path(path)

    @classmethod
    def read(cls, path):
        data = json.loads(Path(path).read_text())
        results = {k: RunSummary(**v) for k, v in data["results"].items()}
        return cls(data["name"], results, data["artifacts"], data["config"], data["version"],
                   str(Path(path).parent))


def grid_of(cfg):
    return TimeGrid(float(cfg.grid.tau), cfg.grid.N)


def basis_of(cfg):
    """Basis matrix described by ``cfg.basis`` (``None`` when absent)."""
    sec = cfg.basis
    if sec is None:
        return None
    grid = grid_of(cfg)
    if sec.csv is not None:
        try:
            B = load_basis_csv(cfg.resolve(sec.csv))
        except ValueError as exc:
            raise ConfigError("basis.csv", str(exc)) from None
        if B.shape[1] != grid.N:
            raise ConfigError("basis.csv", f"basis has {B.shape[1]} columns but grid.N = {grid.N}")
        return B
    spec = BasisSpec(sec.n, grid, EnvelopeSpec(sec.t0, sec.eta, grid.tau), sec.normalize)
    return build_basis(spec)


def problem_of(cfg):
    grid = grid_of(cfg)
    m = cfg.model
    model = OscillatorModel(m.m, m.omega0)
    if cfg.system == "deterministic":
        return OscillatorControlProblem(model, grid, z0=cfg.initial_state)
    bath = BathModel(m.gamma0, m.omega_c, m.kT)
    ens = EnsembleConfig(cfg.ensemble.M, cfg.ensemble.base_seed)
    return LangevinEnsembleProblem(model, bath, grid, ens)


def initial_guess_of(cfg):
    N = cfg.grid.N
    if cfg.initial_guess == "zero":
        return np.zeros(N)
    path = cfg.resolve(cfg.initial_guess["csv"])
    cols = io.read_columns(path)
    u = cols.get("u")
    if not isinstance(u, np.ndarray) or u.size != N or not np.all(np.isfinite(u)):
        raise ConfigError("initial_guess.csv", f"{path} needs a finite numeric column 'u' of length {N}")
    return u


def optimizer_config_of(cfg):
    o = cfg.optimizer
    return OptimizerConfig(algorithm=o.algorithm, epsilon=float(o.epsilon), max_iters=o.max_iters,
                           memory=o.memory, initial_step=float(o.initial_step))


def spectrogram_spec_of(cfg):
    sec = cfg.spectrogram
    default = SpectrogramSpec.default(cfg.grid.N)
    L = sec.window_length or default.window_length
    hop = sec.hop or max(1, L // 4)
    try:
        spec = SpectrogramSpec(L, hop, sec.window)
    except ValueError as exc:
        raise ConfigError("spectrogram", str(exc)) from None
    if L > cfg.grid.N:
        raise ConfigError("spectrogram.window_length", f"exceeds grid.N = {cfg.grid.N}")
    return spec


def _write_control_artifacts(cfg, problem, u, out, prefix, artifacts):
    grid = grid_of(cfg)
    key = prefix.rstrip("_")
    names = {
        "control": f"{prefix}control.csv",
        "energy": f"{prefix}energy.csv",
        "spectrogram": f"{prefix}spectrogram.csv",
    }
    io.write_columns(out / names["control"], {"t": grid.times, "u": u})
    if cfg.system == "deterministic":
        problem.trajectory(u).to_csv(out / names["energy"], problem.model)
    else:
        problem.energy_summary(u).to_csv(out / names["energy"])
    spectrogram(u, spectrogram_spec_of(cfg), grid.dt).to_csv(out / names["spectrogram"])
    for kind, name in names.items():
        artifacts[f"{key}.{kind}" if key else kind] = name


def run(cfg, out=None):
    """Execute one configuration and write its artifacts.

    Parameters
    ----------
    cfg : RunConfig
    out : path, optional
        Output directory; defaults to ``cfg.output_dir``.

    Returns
    -------
    RunReport
    """
    out = Path(out if out is not None else cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    B = basis_of(cfg)
    problem = problem_of(cfg)
    u0 = initial_guess_of(cfg)
    opt = optimizer_config_of(cfg)
    spectrogram_spec_of(cfg)  # validate before the expensive part

    results, artifacts, histories = {}, {}, []
    warm = {}
    if cfg.warm_start is not None:
        w = cfg.warm_start
        log.info("%s: full-space warm start (%s)", cfg.name, w.algorithm)
        wcfg = OptimizerConfig(algorithm=w.algorithm, epsilon=float(w.epsilon),
                               max_iters=w.max_iters, memory=w.memory)
        full = optimize(problem, ProjectionStrategy.none(), wcfg, u0=u0, callback=_progress(WARM_START))
        u0 = post_truncate(full.final_control, projector(B))
        warm[WARM_START] = RunSummary(full.final_objective, full.iterations,
                                      full.termination_reason.value, full.n_evaluations)
        warm[f"{WARM_START}_{POST_TRUNCATED}"] = RunSummary(float(problem.cost(u0)), 0, "post_truncated", 1)
        _write_control_artifacts(cfg, problem, full.final_control, out, "warm_start_", artifacts)
        _write_control_artifacts(cfg, problem, u0, out, "warm_start_truncated_", artifacts)
        full.history_to_csv(out / "warm_start_history.csv")
        artifacts["warm_start.history"] = "warm_start_history.csv"

    strategies = cfg.optimizer.strategies
    multi = len(strategies) > 1
    for name in strategies:
        kind = Strategy(name)
        strategy = ProjectionStrategy(kind, None if kind is Strategy.NONE else B)
        log.info("%s: optimizing with %s (%s)", cfg.name, name, opt.algorithm)
        result = optimize(problem, strategy, opt, u0=u0, callback=_progress(name))
        results[name] = RunSummary(result.final_objective, result.iterations,
                                   result.termination_reason.value, result.n_evaluations)
        histories.append(result.history_columns())
        prefix = f"{name.lower()}_" if multi else ""
        _write_control_artifacts(cfg, problem, result.final_control, out, prefix, artifacts)
        if cfg.post_truncate:
            u_t = post_truncate(result.final_control, projector(B))
            results[POST_TRUNCATED] = RunSummary(float(problem.cost(u_t)), 0, "post_truncated", 1)
            _write_control_artifacts(cfg, problem, u_t, out, "post_truncated_", artifacts)

    results.update(warm)
    merged = {k: [v for h in histories for v in h[k]] for k in histories[0]}
    io.write_columns(out / "history.csv", merged)
    artifacts["history"] = "history.csv"
    artifacts["report"] = "report.json"
    report = RunReport(cfg.name, results, artifacts, cfg.to_dict(), output_dir=str(out))
    report.write(out / "report.json")
    return report


def _progress(name):
    def callback(it, u, f):
        log.info("  %s iteration %d: J = %.10g", name, it, f)
    return callback


def preset(name):
    """Load a shipped preset configuration by name (e.g. ``"fig3c"``)."""
    path = resources.files("pinvcontrol") / "presets" / f"{name}.json"
    if not path.is_file():
        raise ConfigError("preset", f"unknown preset {name!r}")
    return config_mod.from_dict(json.loads(path.read_text()))


def reproduce(figure, out):
    """Run every preset of ``figure`` into ``out/<preset>`` and write ``out/summary.csv``."""
    if figure not in FIGURES:
        raise ConfigError("figure", f"unknown figure {figure!r}; choose from {sorted(FIGURES)}")
    out = Path(out)
    reports = []
    for name in FIGURES[figure]:
        reports.append(run(preset(name), out / name))
    rows = [(r.name, label, s) for r in reports for label, s in r.results.items()]
    io.write_columns(out / "summary.csv", {
        "run": [r for r, _, _ in rows],
        "label": [label for _, label, _ in rows],
        "final_objective": [s.final_objective for _, _, s in rows],
        "iterations": [s.iterations for _, _, s in rows],
        "termination_reason": [s.termination_reason for _, _, s in rows],
    })
    return reports


def _failing_module(exc):
    frames = traceback.extract_tb(exc.__traceback__)
    for frame in reversed(frames):
        path = Path(frame.filename)
        if path.parent.name == "pinvcontrol":
            return path.stem.lstrip("_")
    return "pinvcontrol"


def _parser():
    p = argparse.ArgumentParser(prog="pinvcontrol", description=__doc__.split("\n\n")[0])
    p.add_argument("-v", "--verbose", action="store_true", help="log optimizer progress")
    p.add_argument("--version", action="version", version=f"pinvcontrol {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run one configuration file")
    r.add_argument("--config", required=True)
    r.add_argument("--out", help="output directory (overrides output_dir)")

    rep = sub.add_parser("reproduce", help="run the shipped presets of a figure")
    rep.add_argument("figure", choices=sorted(FIGURES))
    rep.add_argument("--out", required=True)

    b = sub.add_parser("basis", help="basis utilities")
    bsub = b.add_subparsers(dest="basis_command", required=True)
    e = bsub.add_parser("export", help="write the configured basis as CSV")
    e.add_argument("--config", required=True)
    e.add_argument("--out", help="CSV path (default: <output_dir>/basis.csv)")
    return p


def main(argv=None):
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(message)s", stream=sys.stderr)
    try:
        if args.command == "run":
            report = run(config_mod.load(args.config), args.out)
            print(json.dumps({k: asdict(v) for k, v in report.results.items()}, indent=2))
        elif args.command == "reproduce":
            reproduce(args.figure, args.out)
            print((Path(args.out) / "summary.csv").read_text(), end="")
        else:
            cfg = config_mod.load(args.config)
            B = basis_of(cfg)
            if B is None:
                raise ConfigError("basis", "configuration has no basis")
            path = Path(args.out) if args.out else Path(cfg.output_dir) / "basis.csv"
            path.parent.mkdir(parents=True, exist_ok=True)
            io.write_matrix(path, B)
            print(path)
    except ConfigError as exc:
        print(f"pinvcontrol: configuration error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"pinvcontrol: invalid input: {exc}", file=sys.stderr)
        return 2
    except PinvControlError as exc:
        print(f"pinvcontrol: numerical failure in {_failing_module(exc)}: {exc}", file=sys.stderr)
        return 3
    return 0
