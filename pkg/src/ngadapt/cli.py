"""Command-line front end: config files, run artifacts, sweeps, validation.

Configs are plain text in sections of `key = value` lines. Numbers are
serialized with 17 significant digits so a parsed config echoes back byte
for byte; unknown sections or keys are rejected rather than ignored.

A run directory contains:

    config.txt        canonical echo of the configuration
    steps.csv         one row per accepted step, certificate inputs in the
                      comment header so the file validates on its own
    snapshots/*.csv   solution profiles (x, u) at requested times and at the
                      end of the run
    summary.json      termination, cumulative bound, counters, wall time
    trajectory.npz    every accepted frame, for oracle comparison

Exit codes: 0 ok, 1 failed validation, 2 bad config or unreadable input,
3 step-size underflow, 4 infeasible initial datum, 5 safety valve.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

from .controller import ControllerConfig, RunResult, Tolerances, initial_mesh, run
from .errors import (
    ConfigError,
    InitialDatumError,
    SafetyValveExceeded,
    TimeStepUnderflow,
)
from .problems import ProblemSpec, make_problem
from .reference import (
    FourierOracle,
    TrajectoryInterpolant,
    VaryingMeshInterpolant,
    efficiency_index,
    reference_solve,
    true_error_series,
)

_EXIT_CODES = {
    ConfigError: 2,
    TimeStepUnderflow: 3,
    InitialDatumError: 4,
    SafetyValveExceeded: 5,
}


def _fmt(x: float) -> str:
    return f"{x:.17g}"


# ---------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class RunConfig:
    """Everything a single run needs, as read from a config file."""

    problem: str
    eps: float
    t_final: Optional[float] = None          # None: problem default
    overrides: dict = field(default_factory=dict)

    eps0: float = 1e-3
    # either the three local tolerances or a total budget to split
    eta_loc: Optional[float] = None
    theta_loc: Optional[float] = None
    upsilon_loc: Optional[float] = None
    eps_total: Optional[float] = None

    k0: float = 0.1
    k_min: float = 1e-12
    kappa: float = 2.0
    sigma: float = 0.5
    max_newton: int = 50
    max_refinements: int = 30

    m0: int = 8
    init_tol: Optional[float] = None         # None: use eps0
    theta_mark: float = 0.5
    coarsen_factor: float = 0.1

    out_dir: str = "out"
    snapshots: tuple = ()
    trajectory: bool = True
    deterministic: bool = True               # fixed on; rejected if false


# section -> key -> (attribute, type); "problem overrides" handled separately
_FLOAT, _INT, _BOOL, _STR, _LIST = "float", "int", "bool", "str", "list"

_SCHEMA = {
    "problem": {
        "name": ("problem", _STR),
        "eps": ("eps", _FLOAT),
        "t_final": ("t_final", _FLOAT),
        "beta": (None, _FLOAT),
        "amp": (None, _FLOAT),
        "width": (None, _FLOAT),
    },
    "tolerances": {
        "eps0": ("eps0", _FLOAT),
        "eta_loc": ("eta_loc", _FLOAT),
        "theta_loc": ("theta_loc", _FLOAT),
        "upsilon_loc": ("upsilon_loc", _FLOAT),
        "eps_total": ("eps_total", _FLOAT),
    },
    "stepping": {
        "k0": ("k0", _FLOAT),
        "k_min": ("k_min", _FLOAT),
        "kappa": ("kappa", _FLOAT),
        "sigma": ("sigma", _FLOAT),
        "max_newton": ("max_newton", _INT),
        "max_refinements": ("max_refinements", _INT),
    },
    "space": {
        "m0": ("m0", _INT),
        "init_tol": ("init_tol", _FLOAT),
        "theta_mark": ("theta_mark", _FLOAT),
        "coarsen_factor": ("coarsen_factor", _FLOAT),
    },
    "output": {
        "dir": ("out_dir", _STR),
        "snapshots": ("snapshots", _LIST),
        "trajectory": ("trajectory", _BOOL),
        "deterministic": ("deterministic", _BOOL),
    },
}


def _convert(section: str, key: str, kind: str, raw: str):
    try:
        if kind == _FLOAT:
            return float(raw)
        if kind == _INT:
            return int(raw)
        if kind == _BOOL:
            if raw in ("true", "false"):
                return raw == "true"
            raise ValueError
        if kind == _LIST:
            return tuple(float(tok) for tok in raw.split(",") if tok.strip())
        return raw
    except ValueError:
        raise ConfigError(
            f"[{section}] {key}: cannot read {kind} from '{raw}'") from None


def parse_config(text: str) -> RunConfig:
    """Parse config text; unknown sections/keys and duplicates are errors."""
    values: dict = {}
    overrides: dict = {}
    seen: set = set()
    section = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            if section not in _SCHEMA:
                raise ConfigError(f"line {lineno}: unknown section [{section}]")
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got '{line}'")
        if section is None:
            raise ConfigError(f"line {lineno}: key outside any [section]")
        key, _, raw = line.partition("=")
        key, raw = key.strip(), raw.strip()
        if key not in _SCHEMA[section]:
            raise ConfigError(f"line {lineno}: unknown key '{key}' in [{section}]")
        if (section, key) in seen:
            raise ConfigError(f"line {lineno}: duplicate key '{key}' in [{section}]")
        seen.add((section, key))
        attr, kind = _SCHEMA[section][key]
        val = _convert(section, key, kind, raw)
        if attr is None:
            overrides[key] = val
        else:
            values[attr] = val

    for required in ("problem", "eps"):
        if required not in values:
            raise ConfigError(f"missing required key: [problem] {required}")
    if "eps0" not in values:
        raise ConfigError("missing required key: [tolerances] eps0")
    if "k0" not in values:
        raise ConfigError("missing required key: [stepping] k0")

    locs = [values.get(k) for k in ("eta_loc", "theta_loc", "upsilon_loc")]
    if values.get("eps_total") is not None:
        if any(v is not None for v in locs):
            raise ConfigError(
                "give either eps_total or the three local tolerances, not both")
    elif any(v is None for v in locs):
        raise ConfigError(
            "tolerances need eta_loc, theta_loc and upsilon_loc, or eps_total")

    cfg = RunConfig(overrides=overrides, **values)
    if not cfg.deterministic:
        raise ConfigError("deterministic = false is not supported")
    return cfg


def serialize_config(cfg: RunConfig) -> str:
    """Canonical text form; parse(serialize(c)) reproduces c exactly."""
    out = []

    def line(key, val, kind):
        if kind == _FLOAT:
            out.append(f"{key} = {_fmt(val)}")
        elif kind == _INT:
            out.append(f"{key} = {val}")
        elif kind == _BOOL:
            out.append(f"{key} = {'true' if val else 'false'}")
        elif kind == _LIST:
            out.append(f"{key} = {', '.join(_fmt(v) for v in val)}")
        else:
            out.append(f"{key} = {val}")

    out.append("[problem]")
    line("name", cfg.problem, _STR)
    line("eps", cfg.eps, _FLOAT)
    if cfg.t_final is not None:
        line("t_final", cfg.t_final, _FLOAT)
    for key in sorted(cfg.overrides):
        line(key, cfg.overrides[key], _FLOAT)

    out.append("")
    out.append("[tolerances]")
    line("eps0", cfg.eps0, _FLOAT)
    if cfg.eps_total is not None:
        line("eps_total", cfg.eps_total, _FLOAT)
    else:
        line("eta_loc", cfg.eta_loc, _FLOAT)
        line("theta_loc", cfg.theta_loc, _FLOAT)
        line("upsilon_loc", cfg.upsilon_loc, _FLOAT)

    out.append("")
    out.append("[stepping]")
    line("k0", cfg.k0, _FLOAT)
    line("k_min", cfg.k_min, _FLOAT)
    line("kappa", cfg.kappa, _FLOAT)
    line("sigma", cfg.sigma, _FLOAT)
    line("max_newton", cfg.max_newton, _INT)
    line("max_refinements", cfg.max_refinements, _INT)

    out.append("")
    out.append("[space]")
    line("m0", cfg.m0, _INT)
    if cfg.init_tol is not None:
        line("init_tol", cfg.init_tol, _FLOAT)
    line("theta_mark", cfg.theta_mark, _FLOAT)
    line("coarsen_factor", cfg.coarsen_factor, _FLOAT)

    out.append("")
    out.append("[output]")
    line("dir", cfg.out_dir, _STR)
    if cfg.snapshots:
        line("snapshots", cfg.snapshots, _LIST)
    line("trajectory", cfg.trajectory, _BOOL)
    line("deterministic", cfg.deterministic, _BOOL)
    out.append("")
    return "\n".join(out)


def load_config(path: str) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text)


def build_problem(cfg: RunConfig) -> ProblemSpec:
    kwargs = dict(cfg.overrides)
    if cfg.t_final is not None:
        kwargs["t_final"] = cfg.t_final
    try:
        return make_problem(cfg.problem, eps=cfg.eps, **kwargs)
    except TypeError:
        raise ConfigError(
            f"problem '{cfg.problem}' does not accept "
            f"{sorted(cfg.overrides)}") from None
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def build_tolerances(cfg: RunConfig, t_final: float) -> Tolerances:
    try:
        if cfg.eps_total is not None:
            rem = cfg.eps_total ** 2 - cfg.eps0 ** 2
            if rem <= 0.0:
                raise ConfigError("eps_total must exceed eps0")
            part = float(np.sqrt(rem / 3.0))
            return Tolerances.from_total(cfg.eps0, part, part, part, t_final)
        return Tolerances(cfg.eps0, cfg.eta_loc, cfg.theta_loc, cfg.upsilon_loc)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def build_controller(cfg: RunConfig, t_final: float) -> ControllerConfig:
    try:
        return ControllerConfig(
            t_final=t_final, k0=cfg.k0, kappa=cfg.kappa, sigma=cfg.sigma,
            k_min=cfg.k_min, theta_mark=cfg.theta_mark,
            coarsen_factor=cfg.coarsen_factor, max_newton=cfg.max_newton,
            max_refinements=cfg.max_refinements)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def execute(cfg: RunConfig) -> RunResult:
    """Build everything from a config and run to completion."""
    problem = build_problem(cfg)
    tol = build_tolerances(cfg, problem.t_final)
    ctrl = build_controller(cfg, problem.t_final)
    mesh0 = initial_mesh(problem, cfg.init_tol if cfg.init_tol is not None
                         else cfg.eps0, m0=cfg.m0, theta_mark=cfg.theta_mark)
    return run(problem, tol, ctrl, mesh0=mesh0)


# ---------------------------------------------------------------------------
# artifacts


def write_steps_csv(path: Path, result: RunResult) -> None:
    tol = result.tolerances
    lines = [
        f"# eps0 = {_fmt(tol.eps0)}",
        f"# eta_loc = {_fmt(tol.eta)}",
        f"# theta_loc = {_fmt(tol.theta)}",
        f"# upsilon_loc = {_fmt(tol.upsilon)}",
        f"# t_final = {_fmt(result.config.t_final)}",
        f"# eta0 = {_fmt(result.eta0)}",
        "n,t_n,k_n,newton_iters,refinements,elements,eta,theta,upsilon,E_sqrt",
    ]
    for s in result.steps:
        lines.append(",".join([
            str(s.index), _fmt(s.t), _fmt(s.k), str(s.newton_iters),
            str(s.refinements), str(s.n_elements),
            _fmt(float(np.sqrt(s.eta_sq))), _fmt(float(np.sqrt(s.theta_sq))),
            _fmt(float(np.sqrt(s.upsilon_sq))),
            _fmt(float(np.sqrt(s.bound_sq))),
        ]))
    path.write_text("\n".join(lines) + "\n")


def _write_profile(path: Path, nodes: np.ndarray, values: np.ndarray) -> None:
    lines = ["x,u"]
    lines.extend(f"{_fmt(float(x))},{_fmt(float(u))}"
                 for x, u in zip(nodes, values))
    path.write_text("\n".join(lines) + "\n")


def write_artifacts(run_dir: Path, cfg: RunConfig, result: RunResult,
                    wall_time: float) -> None:
    run_dir.mkdir(parents=True, exist_ok=True)
    (run_dir / "config.txt").write_text(serialize_config(cfg))
    write_steps_csv(run_dir / "steps.csv", result)

    snap_dir = run_dir / "snapshots"
    snap_dir.mkdir(exist_ok=True)
    frames = result.trajectory
    times = np.array([t for t, _, _ in frames])
    for t_req in cfg.snapshots:
        t, nodes, values = frames[int(np.argmin(np.abs(times - t_req)))]
        _write_profile(snap_dir / f"t_{t_req:g}.csv", nodes, values)
    t, nodes, values = frames[-1]
    _write_profile(snap_dir / "final.csv", nodes, values)

    if cfg.trajectory:
        offsets = np.zeros(len(frames) + 1, dtype=np.int64)
        for j, (_, nodes, _) in enumerate(frames):
            offsets[j + 1] = offsets[j] + nodes.size
        nodes_flat = np.concatenate([nodes for _, nodes, _ in frames])
        values_flat = np.concatenate([vals for _, _, vals in frames])
        np.savez(run_dir / "trajectory.npz", times=times, offsets=offsets,
                 nodes=nodes_flat, values=values_flat)

    tol = result.tolerances
    summary = {
        "problem": result.problem.name,
        "eps": result.problem.eps,
        "t_final": result.config.t_final,
        "t_end": result.t_end,
        "termination": result.termination,
        "steps": len(result.steps),
        "elements_final": result.mesh.num_elements,
        "eta0": result.eta0,
        "bound_sqrt": result.bound_sqrt,
        "total_budget": tol.total_bound(result.config.t_final),
        "tolerances": {"eps0": tol.eps0, "eta_loc": tol.eta,
                       "theta_loc": tol.theta, "upsilon_loc": tol.upsilon},
        "total_newton": result.total_newton,
        "total_refinements": result.total_refinements,
        "coarsen_rollbacks": result.coarsen_rollbacks,
        "wall_time_s": wall_time,
    }
    (run_dir / "summary.json").write_text(
        json.dumps(summary, indent=2, sort_keys=True) + "\n")


def read_steps_csv(path: Path):
    """Header values and column arrays of a steps.csv file."""
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    header: dict = {}
    rows = []
    columns = None
    for line in text.splitlines():
        if not line.strip():
            continue
        if line.startswith("#"):
            key, _, raw = line[1:].partition("=")
            header[key.strip()] = float(raw.strip())
            continue
        if columns is None:
            columns = line.split(",")
            continue
        rows.append(line.split(","))
    expected = "n,t_n,k_n,newton_iters,refinements,elements,eta,theta,upsilon,E_sqrt"
    if columns != expected.split(","):
        raise ConfigError(f"{path}: unexpected columns {columns}")
    for key in ("eps0", "eta_loc", "theta_loc", "upsilon_loc", "t_final", "eta0"):
        if key not in header:
            raise ConfigError(f"{path}: missing header value '{key}'")
    try:
        data = np.array([[float(v) for v in row] for row in rows], dtype=float)
    except ValueError:
        raise ConfigError(f"{path}: malformed data row") from None
    if data.size == 0:
        data = np.empty((0, len(columns)))
    return header, {name: data[:, j] for j, name in enumerate(columns)}


def load_trajectory(run_dir: Path):
    path = run_dir / "trajectory.npz"
    try:
        with np.load(path) as npz:
            times = npz["times"]
            offsets = npz["offsets"]
            nodes = npz["nodes"]
            values = npz["values"]
    except (OSError, KeyError) as exc:
        raise ConfigError(f"cannot read trajectory {path}: {exc}") from None
    return [(float(times[j]), nodes[offsets[j]:offsets[j + 1]],
             values[offsets[j]:offsets[j + 1]]) for j in range(times.size)]


# ---------------------------------------------------------------------------
# commands


def cmd_run(config_path: str, out: Optional[str] = None) -> int:
    cfg = load_config(config_path)
    if out is not None:
        cfg = replace(cfg, out_dir=out)
    started = time.perf_counter()
    result = execute(cfg)
    wall = time.perf_counter() - started
    run_dir = Path(cfg.out_dir)
    write_artifacts(run_dir, cfg, result, wall)
    print(f"{result.termination}: t_end={result.t_end:g} "
          f"steps={len(result.steps)} elements={result.mesh.num_elements} "
          f"sqrt(E)={result.bound_sqrt:.6g} -> {run_dir}")
    if result.termination == "step-underflow":
        raise TimeStepUnderflow(
            f"step size fell below {result.config.k_min:g} at t={result.t_end:g}")
    return 0


def _efficiency_rows(result: RunResult, oracle, n_sub: int = 2):
    """(t, index or None) for each accepted step against the given oracle."""
    times, l2z_sq, linf_sq = true_error_series(
        result.triples(), oracle, result.problem.eps, n_sub=n_sub)
    bound = result.ledger.bound_sq_history()
    return [(float(t), efficiency_index(float(b), float(z) + float(m)))
            for t, b, z, m in zip(times, bound, l2z_sq, linf_sq)]


def cmd_sweep(config_path: str, eps_tokens: list, out: Optional[str] = None) -> int:
    cfg = load_config(config_path)
    if not eps_tokens:
        raise ConfigError("sweep needs at least one eps value")
    try:
        eps_values = [float(tok) for tok in eps_tokens]
    except ValueError:
        raise ConfigError(f"bad eps list: {eps_tokens}") from None
    base = Path(out if out is not None else cfg.out_dir)
    worst = 0
    table = []
    for tok, eps in zip(eps_tokens, eps_values):
        sub = replace(cfg, eps=eps, out_dir=str(base / f"eps_{tok}"))
        started = time.perf_counter()
        result = execute(sub)
        wall = time.perf_counter() - started
        write_artifacts(Path(sub.out_dir), sub, result, wall)
        print(f"eps={tok}: {result.termination} steps={len(result.steps)} "
              f"elements={result.mesh.num_elements} "
              f"sqrt(E)={result.bound_sqrt:.6g}")
        if result.termination == "step-underflow":
            worst = max(worst, 3)
        if result.problem.exact is not None:
            for t, index in _efficiency_rows(result, result.problem.exact):
                table.append((eps, t, index))
        del result
    if table:
        lines = ["# oracle = exact", "eps,t_n,index"]
        lines.extend(
            f"{_fmt(eps)},{_fmt(t)},{'' if index is None else _fmt(index)}"
            for eps, t, index in table)
        base.mkdir(parents=True, exist_ok=True)
        (base / "efficiency.csv").write_text("\n".join(lines) + "\n")
        print(f"efficiency table -> {base / 'efficiency.csv'}")
    if worst:
        raise TimeStepUnderflow("at least one sweep run hit the step floor")
    return 0


def _result_from_run_dir(run_dir: Path):
    """Rebuild the pieces of a finished run that compare needs."""
    cfg = parse_config((run_dir / "config.txt").read_text()) \
        if (run_dir / "config.txt").exists() else None
    if cfg is None:
        raise ConfigError(f"{run_dir}: missing config.txt")
    problem = build_problem(cfg)
    header, cols = read_steps_csv(run_dir / "steps.csv")
    triples = load_trajectory(run_dir)
    if len(triples) != cols["n"].size + 1:
        raise ConfigError(
            f"{run_dir}: trajectory frames do not match steps.csv rows")
    return cfg, problem, header, cols, triples


def _build_oracle(spec: str, problem: ProblemSpec, triples):
    if spec == "exact":
        if problem.exact is None:
            raise ConfigError(
                f"problem '{problem.name}' has no attached exact solution")
        return problem.exact
    if spec == "fourier":
        if problem.name != "linear_exp_source":
            raise ConfigError("the series oracle only fits linear_exp_source")
        return FourierOracle(problem.eps)
    if spec == "self":
        return VaryingMeshInterpolant(triples)
    if spec.startswith("reference:"):
        try:
            m_elem, m_steps = (int(v) for v in spec.split(":", 1)[1].split(","))
        except ValueError:
            raise ConfigError(
                f"bad oracle '{spec}', expected reference:ELEMENTS,STEPS") from None
        traj = reference_solve(problem, m_elements=m_elem, m_steps=m_steps)
        return TrajectoryInterpolant(traj)
    raise ConfigError(
        f"unknown oracle '{spec}'; use exact, fourier, reference:M,S or self")


def cmd_compare(run_dir_path: str, oracle_spec: str) -> int:
    run_dir = Path(run_dir_path)
    cfg, problem, header, cols, triples = _result_from_run_dir(run_dir)
    oracle = _build_oracle(oracle_spec, problem, triples)
    times, l2z_sq, linf_sq = true_error_series(triples, oracle, problem.eps,
                                               n_sub=2)
    bound_sq = cols["E_sqrt"] ** 2
    lines = [f"# oracle = {oracle_spec}", "t_n,index"]
    absent = 0
    for t, b, z, m in zip(times, bound_sq, l2z_sq, linf_sq):
        index = efficiency_index(float(b), float(z) + float(m))
        lines.append(f"{_fmt(float(t))},{'' if index is None else _fmt(index)}")
        absent += index is None
    (run_dir / "efficiency.csv").write_text("\n".join(lines) + "\n")
    defined = len(times) - absent
    print(f"efficiency vs {oracle_spec}: {defined} defined, {absent} absent "
          f"-> {run_dir / 'efficiency.csv'}")
    return 0


def cmd_validate(path_str: str) -> int:
    path = Path(path_str)
    csv_path = path / "steps.csv" if path.is_dir() else path
    header, cols = read_steps_csv(csv_path)
    slack = 1.0 + 1e-12

    budget_sq = (header["eta_loc"] ** 2 + header["theta_loc"] ** 2
                 + header["upsilon_loc"] ** 2)
    eps_total = np.sqrt(header["eps0"] ** 2 + header["t_final"] * budget_sq)

    problems = []
    if header["eta0"] > header["eps0"] * slack:
        problems.append(f"eta0 {header['eta0']:g} exceeds eps0 {header['eps0']:g}")

    t = cols["t_n"]
    k = cols["k_n"]
    cert = cols["eta"] ** 2 + cols["theta"] ** 2 + cols["upsilon"] ** 2
    bad = np.flatnonzero(cert > budget_sq * slack)
    for j in bad:
        problems.append(
            f"row {int(cols['n'][j])}: certificate {cert[j]:.6g} exceeds "
            f"budget {budget_sq:.6g}")

    if t.size:
        if np.any(np.diff(t) <= 0.0):
            problems.append("t_n not strictly increasing")
        t_prev = np.concatenate(([0.0], t[:-1]))
        drift = np.abs(t - (t_prev + k))
        if np.any(drift > 1e-9 * max(1.0, header["t_final"])):
            problems.append("t_n does not accumulate k_n")

        bound_sq = header["eta0"] ** 2 + np.cumsum(k * cert)
        stored_sq = cols["E_sqrt"] ** 2
        scale = np.maximum(bound_sq, header["eta0"] ** 2) + 1e-300
        if np.any(np.abs(stored_sq - bound_sq) > 1e-10 * scale):
            problems.append("E_sqrt column does not accumulate the indicators")
        if stored_sq[-1] > eps_total ** 2 * slack:
            problems.append(
                f"final bound {np.sqrt(stored_sq[-1]):.6g} exceeds "
                f"budget {eps_total:.6g}")

    if problems:
        for msg in problems:
            print(f"INVALID: {msg}", file=sys.stderr)
        return 1
    print(f"valid: {csv_path} ({t.size} steps, certificate and "
          f"accumulation verified)")
    return 0


def cmd_report(path_str: str, out: Optional[str] = None) -> int:
    from . import report
    made = report.render(Path(path_str), Path(out) if out else None)
    for p in made:
        print(f"wrote {p}")
    return 0


# ---------------------------------------------------------------------------
# entry point


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ngadapt",
        description="Adaptive Newton-Galerkin solver for 1d semilinear "
                    "parabolic problems")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run one config and write artifacts")
    p.add_argument("config")
    p.add_argument("--out", help="override the output directory")

    p = sub.add_parser("sweep", help="run a config across several eps values")
    p.add_argument("config")
    p.add_argument("--eps", required=True,
                   help="comma-separated eps values, e.g. 1e-1,1e-2")
    p.add_argument("--out", help="override the output directory")

    p = sub.add_parser("compare", help="efficiency indices against an oracle")
    p.add_argument("run_dir")
    p.add_argument("--oracle", default="exact",
                   help="exact | fourier | reference:ELEMENTS,STEPS | self")

    p = sub.add_parser("validate", help="re-check a steps.csv certificate")
    p.add_argument("path", help="run directory or steps.csv file")

    p = sub.add_parser("report", help="render figures for a finished run")
    p.add_argument("path", help="run or sweep directory")
    p.add_argument("--out", help="directory for the figures")
    return parser


def main(argv: Optional[list] = None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.command == "run":
            return cmd_run(args.config, args.out)
        if args.command == "sweep":
            tokens = [tok.strip() for tok in args.eps.split(",") if tok.strip()]
            return cmd_sweep(args.config, tokens, args.out)
        if args.command == "compare":
            return cmd_compare(args.run_dir, args.oracle)
        if args.command == "validate":
            return cmd_validate(args.path)
        return cmd_report(args.path, args.out)
    except tuple(_EXIT_CODES) as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return _EXIT_CODES[type(exc)]
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
