"""Command-line front end: JSON configs in, deterministic CSV/JSON out.

Every subcommand reads one JSON document (from a file or passed inline),
writes its bulk output atomically (temp file + rename), and emits a JSON run
manifest carrying the config hash, library versions, wall time, and any
command-specific summary. Numeric fields are printed with 17 significant
digits so identical configs produce byte-identical data files; wall time
lives only in the manifest.

Exit codes: 0 success, 1 validation/usage failure, 2 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import os
import sys
import tempfile
import time
from pathlib import Path

import numpy as np

from . import __version__
from .core import CouplingMenu, Filling, SimplifiedModel
from .errors import DomainError, NumericalError, ScramblerError
from .greens import greens_matrix, quasiparticle_rate, retarded_greens
from .scramblon import (ScramblonParams, continuum_distribution,
                        late_time_generating)
from .sizeflow import (Phase, closed_form_P, closed_form_Z,
                       integrate_generating_function, lyapunov_exponent,
                       size_distribution_from_series, transition_boundary,
                       transition_boundary_bisect)
from .oracle import OracleConfig, disorder_average

SUBCOMMANDS = ("greens", "phase-diagram", "size-evolve", "closed-form",
               "scramblon", "oracle", "validate")


# ---------------------------------------------------------------------------
# Config ingestion and output plumbing
# ---------------------------------------------------------------------------

def _fmt(x) -> str:
    return f"{float(x):.17g}"


def load_config(raw: str | None) -> dict:
    """Parse --config: inline JSON if it looks like a document, else a path."""
    if raw is None:
        return {}
    text = raw.strip()
    if not text.startswith("{"):
        path = Path(raw)
        if not path.exists():
            raise DomainError(f"config file not found: {raw}")
        text = path.read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DomainError(f"malformed config JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise DomainError("config document must be a JSON object")
    return doc


def parse_grid(spec, what: str) -> np.ndarray:
    """Accept either an explicit array or {start, stop, num}."""
    if isinstance(spec, dict):
        try:
            return np.linspace(float(spec["start"]), float(spec["stop"]),
                               int(spec["num"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise DomainError(f"malformed {what} grid: {exc}") from exc
    try:
        grid = np.asarray(spec, dtype=float)
    except (TypeError, ValueError) as exc:
        raise DomainError(f"malformed {what} grid: {exc}") from exc
    if grid.ndim != 1 or grid.size == 0:
        raise DomainError(f"{what} grid must be a non-empty 1-D array")
    return grid


def parse_filling(cfg: dict) -> Filling:
    if "n" in cfg and "mu" in cfg:
        raise DomainError("give either n or mu, not both")
    if "n" in cfg:
        return Filling.from_density(float(cfg["n"]))
    if "mu" in cfg:
        return Filling.from_mu(float(cfg["mu"]))
    raise DomainError("config must set a filling via n or mu")


def parse_menu(cfg: dict) -> CouplingMenu:
    if "menu" not in cfg:
        raise DomainError("config must contain a menu")
    return CouplingMenu.from_json_dict(cfg["menu"]).require_valid()


def write_atomic(path: Path, data: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", newline="") as handle:
            handle.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


class Emitter:
    """Collects one table plus a manifest; writes both on finish."""

    def __init__(self, out: str, fmt: str, subcommand: str, config_doc: dict,
                 seed=None):
        self.out = out
        self.fmt = fmt
        self.columns: list[str] = []
        self.rows: list[list[float]] = []
        self.manifest: dict = {
            "subcommand": subcommand,
            "package_version": __version__,
            "python_version": ".".join(map(str, sys.version_info[:3])),
            "numpy_version": np.__version__,
            "config_sha256": hashlib.sha256(
                json.dumps(config_doc, sort_keys=True).encode()).hexdigest(),
        }
        if seed is not None:
            self.manifest["seed"] = int(seed)
        self._t0 = time.perf_counter()

    def table(self, columns: list[str], rows):
        self.columns = list(columns)
        self.rows = [list(map(float, row)) for row in rows]

    def render(self) -> str:
        if self.fmt == "json":
            records = [dict(zip(self.columns, map(_fmt, row)))
                       for row in self.rows]
            return json.dumps(records, indent=2) + "\n"
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.columns)
        for row in self.rows:
            writer.writerow([_fmt(v) for v in row])
        return buf.getvalue()

    def finish(self) -> int:
        self.manifest["wall_time_s"] = round(time.perf_counter() - self._t0, 6)
        body = self.render()
        manifest_text = json.dumps(self.manifest, indent=2, sort_keys=True,
                                   default=str) + "\n"
        if self.out == "-":
            sys.stdout.write(body)
            sys.stderr.write(manifest_text)
        else:
            path = Path(self.out)
            write_atomic(path, body)
            write_atomic(path.with_name(path.name + ".manifest.json"),
                         manifest_text)
        return 0


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_greens(cfg: dict, emitter: Emitter) -> int:
    menu = parse_menu(cfg)
    filling = parse_filling(cfg)
    t_grid = parse_grid(cfg.get("t_grid", {"start": 0.0, "stop": 5.0,
                                           "num": 51}), "t")
    rows = []
    for t in t_grid:
        g = greens_matrix(menu, filling, float(t),
                          side=+1 if t == 0.0 else None)
        gr = retarded_greens(menu, filling, float(t))
        rows.append([t, g.guu, g.gud, g.gdu, g.gdd, gr.real, gr.imag])
    emitter.table(["t", "Guu", "Gud", "Gdu", "Gdd", "ReGR", "ImGR"], rows)
    emitter.manifest["gamma"] = quasiparticle_rate(menu, filling).gamma
    return emitter.finish()


def cmd_phase_diagram(cfg: dict, emitter: Emitter) -> int:
    u3 = float(cfg.get("u3", 1.0))
    n_grid = parse_grid(cfg.get("n_grid", {"start": 0.02, "stop": 0.98,
                                           "num": 49}), "n")
    if cfg.get("bisect", False):
        boundary = transition_boundary_bisect(u3, n_grid)
    else:
        boundary = transition_boundary(u3, n_grid)
    emitter.table(["n", "u1_critical"], boundary)

    summary = []
    for n, u1c in boundary:
        filling = Filling.from_density(float(n))
        u1 = float(cfg["u1"]) if "u1" in cfg else float(u1c)
        model = SimplifiedModel(u1=u1, u3=u3, filling=filling)
        growth = lyapunov_exponent(model.menu(), filling)
        summary.append({"n": float(n), "u1_critical": float(u1c),
                        "kappa": growth.kappa, "r": model.r,
                        "classification": growth.classification.value})
    emitter.manifest["points"] = summary
    return emitter.finish()


def _model_from_config(cfg: dict) -> SimplifiedModel:
    filling = parse_filling(cfg)
    try:
        return SimplifiedModel(u1=float(cfg["u1"]), u3=float(cfg["u3"]),
                               filling=filling)
    except KeyError as exc:
        raise DomainError(f"simplified model config needs {exc}") from exc


def cmd_size_evolve(cfg: dict, emitter: Emitter) -> int:
    if "menu" in cfg:
        menu = parse_menu(cfg)
    else:
        menu = _model_from_config(cfg).menu()
    filling = parse_filling(cfg)
    t_grid = parse_grid(cfg.get("t_grid", {"start": 0.0, "stop": 10.0,
                                           "num": 21}), "t")
    s_max = int(cfg.get("s_max", 64))
    tail_budget = float(cfg.get("tail_budget", 1e-6))
    dists = size_distribution_from_series(menu, filling, t_grid, s_max=s_max,
                                          tail_budget=tail_budget,
                                          rel_tol=float(cfg.get("rel_tol", 1e-10)))
    rows = [[d.t, s, d.probs[s]] for d in dists for s in range(s_max + 1)]
    emitter.table(["t", "s", "P"], rows)
    kappa = lyapunov_exponent(menu, filling).kappa
    emitter.manifest["kappa"] = kappa
    emitter.manifest["tail_mass"] = [d.tail_mass for d in dists]
    emitter.manifest["truncation_warning"] = any(d.truncation_warning
                                                 for d in dists)
    if "N" in cfg:
        # Mean-field validity indicator: the description degrades once
        # e^{kappa t} becomes comparable to the mode count.
        n_modes = float(cfg["N"])
        emitter.manifest["growth_over_modes_max"] = float(
            math.exp(kappa * t_grid[-1]) / n_modes)
    return emitter.finish()


def cmd_closed_form(cfg: dict, emitter: Emitter) -> int:
    if "r" in cfg and "kappa" in cfg:
        r, kappa = float(cfg["r"]), float(cfg["kappa"])
        rate_scale = float(cfg["rate_scale"]) if "rate_scale" in cfg else None
    else:
        model = _model_from_config(cfg)
        r, kappa, rate_scale = model.r, model.kappa, model.growth_scale
    t_grid = parse_grid(cfg.get("t_grid", {"start": 0.0, "stop": 10.0,
                                           "num": 21}), "t")
    emitter.manifest.update({"r": r, "kappa": kappa})
    if "x_points" in cfg:
        x_points = parse_grid(cfg["x_points"], "x")
        rows = [[t, x, closed_form_Z(r, kappa, float(x), float(t), rate_scale)]
                for t in t_grid for x in x_points]
        emitter.table(["t", "x", "Z"], rows)
    else:
        s_max = int(cfg.get("s_max", 64))
        rows = [[t, s, closed_form_P(r, kappa, s, float(t), rate_scale)]
                for t in t_grid for s in range(s_max + 1)]
        emitter.table(["t", "s", "P"], rows)
    return emitter.finish()


def cmd_scramblon(cfg: dict, emitter: Emitter) -> int:
    try:
        params = ScramblonParams(r=float(cfg["r"]), n=float(cfg["n"]),
                                 n_modes=int(cfg.get("n_modes",
                                                     cfg.get("N", 0))),
                                 kappa=float(cfg.get("kappa", 1.0)))
    except KeyError as exc:
        raise DomainError(f"scramblon config needs {exc}") from exc
    lam = float(cfg["lambda"]) if "lambda" in cfg else None
    t = float(cfg["t"]) if "t" in cfg else None
    if lam is None and t is None:
        raise DomainError("scramblon config needs t or lambda")
    if "sigma_grid" in cfg:
        sigma = parse_grid(cfg["sigma_grid"], "sigma")
    else:
        sigma = np.linspace(0.0, params.s_sc, int(cfg.get("num_sigma", 201)))
    dist = continuum_distribution(params, sigma, t=t, lam=lam)
    emitter.table(["sigma", "density"],
                  np.column_stack([dist.sigma, dist.density]))
    emitter.manifest.update({
        "r": params.r, "n": params.n, "lambda": dist.lam,
        "s_sc": params.s_sc, "singular_weight": dist.singular_weight,
    })
    if "v_points" in cfg:
        v_points = parse_grid(cfg["v_points"], "v")
        emitter.manifest["generating"] = {
            _fmt(v): late_time_generating(params, float(v), lam=dist.lam)
            for v in v_points}
    return emitter.finish()


def cmd_oracle(cfg: dict, emitter: Emitter, seed_override=None) -> int:
    menu = parse_menu(cfg)
    filling = parse_filling(cfg)
    try:
        config = OracleConfig(
            n_sys=int(cfg["n_sys"]), n_env=int(cfg["n_env"]), menu=menu,
            filling=filling, dt=float(cfg["dt"]),
            t_final=float(cfg["t_final"]),
            realizations=int(cfg["realizations"]),
            seed=int(seed_override if seed_override is not None
                     else cfg.get("seed", 0)),
            times=tuple(cfg["times"]) if "times" in cfg else None,
            initial_operator=cfg.get("initial_operator", "c1"),
            charge_sector=bool(cfg.get("charge_sector", False)))
    except KeyError as exc:
        raise DomainError(f"oracle config needs {exc}") from exc
    result = disorder_average(config)
    s_count = result.p_mean.shape[1]
    rows = [[t, s, result.p_mean[i, s], result.p_stderr[i, s]]
            for i, t in enumerate(result.times) for s in range(s_count)]
    emitter.table(["t", "s", "P_mean", "P_stderr"], rows)
    emitter.manifest.update({
        "seed": config.seed,
        "dt": config.dt,
        "realizations": config.realizations,
        "unitarity_max_dev": result.unitarity_max_dev,
        "mean_size": [float(v) for v in result.mean_size],
        "mean_size_stderr": [float(v) for v in result.mean_size_stderr],
    })
    return emitter.finish()


# ---------------------------------------------------------------------------
# validate: cross-module consistency suites
# ---------------------------------------------------------------------------

def _suite_results() -> list[tuple[str, bool, str]]:
    from .oracle import (OperatorState, build_mode_operators,
                         build_size_spectrum, evolve_operator_state,
                         HamiltonianSampler, initial_operator_matrix,
                         reference_state, size_distribution_oracle,
                         size_operator_matrix, state_from_operator,
                         total_charge_matrix)
    from .scramblon import continuum_normalization, f_function, h_function
    from scipy.integrate import quad

    half = Filling.from_mu(0.0)
    checks: list[tuple[str, bool, str]] = []

    def add(name, ok, detail):
        checks.append((name, bool(ok), detail))

    # core: filling round trip and normalization identity
    mus = np.linspace(-8.0, 8.0, 33)
    worst = max(abs(Filling.from_density(Filling.from_mu(m).n).mu - m)
                for m in mus)
    add("core.filling-roundtrip", worst < 1e-10, f"max |mu - mu'| = {worst:.2e}")
    worst = max(abs(Filling.from_mu(m).a_mu - math.sqrt(Filling.from_mu(m).weight))
                for m in mus)
    add("core.normalization-identity", worst < 1e-12, f"max dev = {worst:.2e}")

    # greens: assembled rate and anticommutator sum rule
    menu = CouplingMenu(cross={(1, 0, 0, 1): 0.5, (2, 1, 0, 1): 2.0})
    gamma = quasiparticle_rate(menu, half).gamma
    add("greens.rate-assembly", abs(gamma - 1.0) < 1e-12, f"Gamma = {gamma!r}")
    g = greens_matrix(menu, half, 0.0, side=+1)
    add("greens.sum-rule", abs(g.gdu - g.gud - 1.0) < 1e-12,
        f"G_du - G_ud = {g.gdu - g.gud!r}")

    # sizeflow: exact fixed point, ODE vs closed form, boundary
    model = SimplifiedModel.from_ratio(0.5, 1.0, half)
    t_grid = np.linspace(0.0, 40.0, 21)
    z_one = integrate_generating_function(model.menu(), half, [1.0], t_grid,
                                          1e-9)
    add("sizeflow.fixed-point", bool(np.all(z_one == 1.0)),
        "Z(x=1) preserved exactly")
    x_points = [0.0, 0.5, 0.99]
    z = integrate_generating_function(model.menu(), half, x_points, t_grid,
                                      1e-9)
    ref = np.array([[closed_form_Z(model.r, model.kappa, x, t)
                     for t in t_grid] for x in x_points])
    dev = float(np.abs(z - ref).max())
    add("sizeflow.ode-vs-closed-form", dev < 1e-6, f"sup dev = {dev:.2e}")
    dists = size_distribution_from_series(model.menu(), half,
                                          [8.0 * math.log(2.0)], s_max=200)
    dev = max(abs(dists[0].probs[s] - closed_form_P(model.r, model.kappa, s,
                                                    dists[0].t))
              for s in range(20))
    add("sizeflow.series-vs-closed-form", dev < 1e-8, f"max dev = {dev:.2e}")
    grid = np.linspace(0.1, 0.9, 9)
    dev = float(np.abs(transition_boundary_bisect(1.0, grid)[:, 1]
                       - transition_boundary(1.0, grid)[:, 1]).max())
    add("sizeflow.phase-boundary", dev < 1e-9, f"max dev = {dev:.2e}")

    # scramblon: Laplace pair and continuum normalization
    params = ScramblonParams(r=0.5, n=0.3, n_modes=10 ** 6, kappa=1.0)
    worst = 0.0
    for x in (0.0, 0.5, 1.0, 10.0):
        integral, _ = quad(lambda y, xx=x: h_function(params, y)[0]
                           * math.exp(-xx * y), 0.0, np.inf)
        worst = max(worst, abs(integral + h_function(params, 0.0)[1]
                               - f_function(params, x)))
    add("scramblon.laplace-pair", worst < 1e-10, f"max dev = {worst:.2e}")
    total = continuum_normalization(params, lam=1e3)
    add("scramblon.normalization", abs(total - 1.0) < 1e-8,
        f"weight = {total!r}")
    s_model = late_time_generating(params, 2.0, lam=1e3)
    transform, _ = quad(lambda sig: continuum_distribution(
        params, [sig], lam=1e3).density[0] * math.exp(-2.0 * sig),
        0.0, params.s_sc, limit=200)
    dev = abs(params.r + transform - s_model)
    add("scramblon.duality", dev < 1e-6, f"dev = {dev:.2e}")

    # oracle: algebra and dynamics gates at N=2, M=1
    ops = build_mode_operators(2, 1)
    eye = np.eye(ops.dim)
    dev = max(
        float(np.abs((ops.annihilation(m) @ ops.creation(mp)
                      + ops.creation(mp) @ ops.annihilation(m)).toarray()
                     - (eye if m == mp else 0.0)).max())
        for m in range(6) for mp in range(6))
    add("oracle.car-exactness", dev < 1e-12, f"max dev = {dev:.2e}")
    filling = Filling.from_mu(0.9)
    psi = reference_state(2, 1, filling)
    spectrum = build_size_spectrum(2, 1, filling)
    probs = size_distribution_oracle(
        OperatorState(amplitudes=psi, n_sys=2, n_env=1), spectrum).probs
    add("oracle.reference-size-zero", abs(probs[0] - 1.0) < 1e-12,
        f"P(0) = {probs[0]!r}")
    psi_c, _ = state_from_operator(initial_operator_matrix("c", 1, 2, 1),
                                   2, 1, filling)
    probs = size_distribution_oracle(
        OperatorState(amplitudes=psi_c, n_sys=2, n_env=1), spectrum).probs
    add("oracle.initial-size-one", abs(probs[1] - 1.0) < 1e-12,
        f"P(1) = {probs[1]!r}")
    menu = CouplingMenu(cross={(2, 1, 0, 1): 1.0, (1, 0, 0, 1): 0.25})
    sampler = HamiltonianSampler(menu, 2, 1)
    rng = np.random.default_rng(123)
    q = total_charge_matrix(2, 1)
    dev = max(float(np.abs(h @ q - q @ h).max())
              for h in (sampler.sample(rng, 1e-3) for _ in range(5)))
    add("oracle.charge-conservation", dev < 1e-12, f"max dev = {dev:.2e}")
    cfg = OracleConfig(n_sys=2, n_env=1, menu=menu, filling=half, dt=2e-3,
                       t_final=0.1, realizations=1, seed=3, times=(0.1,))
    evolution = evolve_operator_state(cfg)
    norm_dev = abs(evolution.states[0].norm_sq - 1.0)
    add("oracle.norm-preservation", norm_dev < 1e-10,
        f"|norm^2 - 1| = {norm_dev:.2e}")
    eigs = np.linalg.eigvalsh(size_operator_matrix(2, 1, filling).toarray())
    dev = float(np.abs(eigs - np.round(eigs)).max())
    add("oracle.size-spectrum-integrality", dev < 1e-12, f"max dev = {dev:.2e}")
    return checks


def cmd_validate(cfg: dict, emitter: Emitter) -> int:
    del cfg
    checks = _suite_results()
    lines = []
    for name, ok, detail in checks:
        lines.append(f"{'PASS' if ok else 'FAIL'}  {name}  ({detail})")
    report = "\n".join(lines) + "\n"
    passed = sum(ok for _, ok, _ in checks)
    report += f"{passed}/{len(checks)} invariant suites passed\n"
    emitter.manifest["suites"] = [
        {"name": name, "ok": ok, "detail": detail}
        for name, ok, detail in checks]
    if emitter.out == "-":
        sys.stdout.write(report)
        emitter.manifest["wall_time_s"] = None
        sys.stderr.write(json.dumps(emitter.manifest, indent=2,
                                    sort_keys=True) + "\n")
    else:
        write_atomic(Path(emitter.out), report)
    return 0 if passed == len(checks) else 1


# ---------------------------------------------------------------------------
# Dispatch
# ---------------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"error: {message}\n")
        raise SystemExit(1)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="scrambler",
        description=("Operator-size dynamics of an open charge-conserving "
                     "Brownian model: analytics plus an exact small-system "
                     "oracle."))
    parser.add_argument("subcommand", choices=SUBCOMMANDS)
    parser.add_argument("--config", help="path to a JSON config, or inline JSON")
    parser.add_argument("--out", default="-",
                        help="output path (default: stdout)")
    parser.add_argument("--format", choices=("csv", "json"), default="csv")
    parser.add_argument("--seed", type=int, default=None,
                        help="override the config seed (oracle runs)")
    return parser


_HANDLERS = {
    "greens": cmd_greens,
    "phase-diagram": cmd_phase_diagram,
    "size-evolve": cmd_size_evolve,
    "closed-form": cmd_closed_form,
    "scramblon": cmd_scramblon,
    "validate": cmd_validate,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = load_config(args.config)
        emitter = Emitter(args.out, args.format, args.subcommand, cfg,
                          seed=args.seed)
        if args.subcommand == "oracle":
            return cmd_oracle(cfg, emitter, seed_override=args.seed)
        return _HANDLERS[args.subcommand](cfg, emitter)
    except DomainError as exc:
        sys.stderr.write(f"validation error: {exc}\n")
        return 1
    except NumericalError as exc:
        sys.stderr.write(f"numerical error: {exc}\n")
        return 2
    except ScramblerError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
