"""Command-line front end: reproducible experiment runs with manifest echoes.

Subcommands: solve, kappa-scan, greenkubo, highdim, montecarlo, selftest.
Every run resolves its configuration from an optional config file plus flag
overrides, validates it fully before computing, writes its outputs atomically
into a fresh directory (refusing to overwrite without --force) and echoes the
resolved configuration into manifest.json so the run can be reproduced
byte-identically.

Exit codes: 0 success, 1 internal or numerical failure, 2 validation error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
from pathlib import Path

# Honor the thread cap before the numeric stack spins up its pools; this only
# takes effect when the interpreter has not imported numpy yet.
_threads = os.environ.get("CRYSTAL_HEAT_THREADS")
if _threads and _threads.isdigit():
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ.setdefault(_var, _threads)

import numpy as np

from . import __version__
from .covariance import TemperatureProfile, covariance_closed_form
from .greenkubo import green_kubo_report
from .highdim import asymptotic_check, kappa_highdim_integral
from .model import ChainParams, CouplingProfile
from .montecarlo import SimulationConfig, estimate_stationary, step_matrices
from .selfconsistency import kinetic_map, solve_profile
from .transport import (
    epsilon_and_bounds,
    kappa_closed_form,
    nonuniform_transport,
    richardson_extrapolate,
    steady_state_report,
)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2


class ConfigError(ValueError):
    """Invalid configuration or flags; maps to exit status 2."""


def _parse_bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


def _parse_int_list(text: str) -> list[int]:
    try:
        return [int(tok) for tok in str(text).replace(" ", "").split(",") if tok]
    except ValueError as exc:
        raise ConfigError(f"bad integer list {text!r}") from exc


# key -> (parser, default); None default means "required by the command schema".
_COMMON_SCHEMA = {
    "omega": (float, 1.0),
    "gamma": (float, 1.0),
    "lambda": (float, 1.0),
    "seed": (int, 0),
}

_SCHEMAS: dict[str, dict] = {
    "solve": {
        **_COMMON_SCHEMA,
        "n": (int, 64),
        "tl": (float, 2.0),
        "tr": (float, 1.0),
        "couplings": (str, ""),
        "write_covariance": (_parse_bool, False),
    },
    "kappa-scan": {
        **_COMMON_SCHEMA,
        "n_list": (_parse_int_list, [16, 32, 64]),
        "tl": (float, 2.0),
        "tr": (float, 1.0),
    },
    "greenkubo": {
        **_COMMON_SCHEMA,
        "n": (int, 64),
        "n_list": (_parse_int_list, [32, 64, 128]),
        "samples": (int, 200),
    },
    "highdim": {
        **_COMMON_SCHEMA,
        "dmax": (int, 32),
        "kappa_dmax": (int, 8),
    },
    "montecarlo": {
        **_COMMON_SCHEMA,
        "n": (int, 4),
        "tl": (float, 1.0),
        "tr": (float, 1.0),
        "step": (float, 0.25),
        "total_time": (float, 1000.0),
        "burn_in": (float, -1.0),  # negative means automatic
        "trajectories": (int, 1),
        "dump_trajectory": (_parse_bool, False),
    },
    "selftest": {**_COMMON_SCHEMA},
}


def _read_config_file(path: Path) -> dict[str, str]:
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    stripped = text.lstrip()
    if stripped.startswith("{"):
        try:
            payload = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"bad JSON config {path}: {exc}") from exc
        data = payload.get("config", payload)
        if not isinstance(data, dict):
            raise ConfigError(f"JSON config {path} must hold an object")
        return {str(k): str(v) for k, v in data.items()}
    values: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key = value")
        key, _, val = line.partition("=")
        values[key.strip()] = val.strip()
    return values


def resolve_config(command: str, args: argparse.Namespace) -> dict:
    """Merge schema defaults, config file values and flag overrides; validate."""
    schema = _SCHEMAS[command]
    raw: dict[str, str] = {}
    if args.config:
        raw.update(_read_config_file(Path(args.config)))
    unknown = sorted(set(raw) - set(schema))
    if unknown:
        raise ConfigError(f"unknown config keys for {command}: {', '.join(unknown)}")

    flag_map = {
        "n": args.n,
        "tl": args.tl,
        "tr": args.tr,
        "omega": args.omega,
        "gamma": args.gamma,
        "lambda": getattr(args, "lam"),
        "couplings": args.couplings,
        "seed": args.seed,
    }
    for key, val in flag_map.items():
        if val is not None:
            if key not in schema:
                raise ConfigError(f"flag --{key} is not accepted by {command}")
            raw[key] = str(val)

    resolved = {}
    for key, (parse, default) in schema.items():
        if key in raw:
            try:
                resolved[key] = parse(raw[key])
            except ConfigError:
                raise
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"bad value for {key}: {raw[key]!r}") from exc
        else:
            resolved[key] = default
    return resolved


def _chain_from_config(cfg: dict, n: int) -> ChainParams:
    try:
        return ChainParams(cfg["omega"], cfg["gamma"], cfg["lambda"], n)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def parse_couplings(spec: str, lam: float, n: int) -> CouplingProfile:
    """Parse a coupling pattern: uniform:x | every-m:x,m | list:file."""
    if not spec:
        return CouplingProfile.uniform(lam, n)
    kind, _, rest = spec.partition(":")
    try:
        if kind == "uniform":
            return CouplingProfile.uniform(float(rest), n)
        if kind == "every-m":
            value, m = rest.split(",")
            return CouplingProfile.every_mth(float(value), int(m), n)
        if kind == "list":
            values = [float(tok) for tok in Path(rest).read_text().split()]
            if len(values) != n:
                raise ConfigError(
                    f"coupling file has {len(values)} entries, expected {n}"
                )
            return CouplingProfile(np.array(values))
    except ConfigError:
        raise
    except (ValueError, OSError) as exc:
        raise ConfigError(f"bad couplings spec {spec!r}: {exc}") from exc
    raise ConfigError(f"unknown couplings kind {kind!r}")


def _atomic_write(path: Path, text: str):
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _fmt(value: float) -> str:
    return format(float(value), ".17g")


def write_csv(path: Path, header: list[str], rows) -> None:
    lines = [",".join(header)]
    for row in rows:
        cells = [
            str(cell) if isinstance(cell, (int, str)) else _fmt(cell) for cell in row
        ]
        lines.append(",".join(cells))
    _atomic_write(path, "\n".join(lines) + "\n")


def write_json(path: Path, payload: dict) -> None:
    _atomic_write(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")


class OutputDir:
    """Output directory that refuses to clobber existing artifacts without --force."""

    def __init__(self, root: str, force: bool):
        self.root = Path(root)
        self.force = force
        self.root.mkdir(parents=True, exist_ok=True)

    def target(self, name: str) -> Path:
        path = self.root / name
        if path.exists() and not self.force:
            raise ConfigError(f"{path} exists; pass --force to overwrite")
        return path


def _write_manifest(out: OutputDir, command: str, cfg: dict):
    payload = {
        "artifact": "crystalheat",
        "version": __version__,
        "command": command,
        "config": {k: (v if not isinstance(v, list) else ",".join(map(str, v))) for k, v in cfg.items()},
    }
    write_json(out.target("manifest.json"), payload)


def cmd_solve(cfg: dict, out: OutputDir) -> dict:
    chain = _chain_from_config(cfg, cfg["n"])
    couplings = parse_couplings(cfg["couplings"], cfg["lambda"], cfg["n"])
    if couplings.is_uniform and couplings.lambdas[0] == cfg["lambda"]:
        sol = solve_profile(chain, cfg["tl"], cfg["tr"], method="direct")
        report = steady_state_report(chain, sol)
        coupled = np.ones(chain.n, dtype=bool)
        blocks = covariance_closed_form(chain, sol.profile)
    else:
        nt = nonuniform_transport(chain, couplings, cfg["tl"], cfg["tr"])
        sol = nt.solution
        coupled = sol.coupled
        from .covariance import lyapunov_dense_blocks
        from .transport import (
            TransportReport,
            currents_from_covariance,
            reservoir_fluxes,
        )

        blocks = lyapunov_dense_blocks(chain, couplings, sol.profile)
        linear = np.linspace(cfg["tl"], cfg["tr"], chain.n)
        report = TransportReport(
            currents=currents_from_covariance(blocks, chain, couplings=couplings),
            reservoir_fluxes=reservoir_fluxes(blocks, sol.profile, couplings),
            j_n=nt.j_n,
            current_spread=nt.current_spread,
            epsilon_n=sol.profile.max_jump(),
            kappa_estimate=nt.kappa_estimate,
            linearity_residual=float(np.max(np.abs(sol.profile.temps - linear))),
        )
    write_csv(
        out.target("profile.csv"),
        ["i", "T_i", "coupled"],
        [
            (i + 1, sol.profile.temps[i], int(coupled[i]))
            for i in range(chain.n)
        ],
    )
    write_json(out.target("transport.json"), report.as_dict())
    site_rows = []
    for i in range(chain.n):
        j_cell = _fmt(report.currents[i]) if i < chain.n - 1 else ""
        site_rows.append(
            (i + 1, j_cell, report.reservoir_fluxes[i], sol.profile.temps[i])
        )
    write_csv(out.target("transport.csv"), ["i", "J_i", "R_i", "T_i"], site_rows)
    if cfg["write_covariance"]:
        rows = []
        for i in range(chain.n):
            for j in range(chain.n):
                rows.append((i + 1, j + 1, blocks.u[i, j], blocks.v[i, j], blocks.z[i, j]))
        write_csv(out.target("covariance.csv"), ["i", "j", "U", "V", "Z"], rows)
    return {"j_n": report.j_n, "kappa_estimate": report.kappa_estimate}


def cmd_kappa_scan(cfg: dict, out: OutputDir) -> dict:
    rows = []
    estimates = []
    for n in cfg["n_list"]:
        chain = _chain_from_config(cfg, n)
        sol = solve_profile(chain, cfg["tl"], cfg["tr"], method="direct")
        kmap = kinetic_map(chain)
        eps_n, bound, ratio = epsilon_and_bounds(sol, kmap, chain)
        report = steady_state_report(chain, sol)
        rows.append((n, report.kappa_estimate, eps_n, ratio))
        estimates.append(report.kappa_estimate)
    write_csv(out.target("kappa_scan.csv"), ["N", "kappa_est", "eps_N", "bound_ratio"], rows)
    chain = _chain_from_config(cfg, max(cfg["n_list"]))
    summary = {
        "n_values": list(cfg["n_list"]),
        "kappa_estimates": estimates,
        "kappa_extrapolated": richardson_extrapolate(cfg["n_list"], estimates),
        "kappa_target": kappa_closed_form(chain).kappa,
    }
    write_json(out.target("summary.json"), summary)
    return summary


def cmd_greenkubo(cfg: dict, out: OutputDir) -> dict:
    chain = _chain_from_config(cfg, cfg["n"])
    report = green_kubo_report(
        chain, extrapolation_sizes=tuple(cfg["n_list"]), n_samples=cfg["samples"]
    )
    write_csv(out.target("g.csv"), ["t", "g"], report.g_samples)
    write_json(out.target("report.json"), report.as_dict())
    return report.as_dict()


def cmd_highdim(cfg: dict, out: OutputDir) -> dict:
    chain = _chain_from_config(cfg, 2)
    d_values = []
    d = 2
    while d <= cfg["dmax"]:
        d_values.append(d)
        d *= 2
    rows = asymptotic_check(chain, d_values)
    write_csv(out.target("dI.csv"), ["d", "dI", "err"], rows)
    kappa_rows = [
        (d, kappa_highdim_integral(chain, d, prefer_tensor=False).kappa)
        for d in range(1, cfg["kappa_dmax"] + 1)
    ]
    write_csv(out.target("kappa_d.csv"), ["d", "kappa"], kappa_rows)
    summary = {
        "d_values": [r[0] for r in rows],
        "dI": [r[1] for r in rows],
        "dI_err": [r[2] for r in rows],
        "kappa_d": {str(d): k for d, k in kappa_rows},
    }
    write_json(out.target("report.json"), summary)
    return summary


def cmd_montecarlo(cfg: dict, out: OutputDir) -> dict:
    chain = _chain_from_config(cfg, cfg["n"])
    couplings = CouplingProfile.uniform(cfg["lambda"], cfg["n"])
    if cfg["tl"] == cfg["tr"]:
        temps = TemperatureProfile.uniform(cfg["tl"], cfg["n"])
    else:
        temps = TemperatureProfile.linear(cfg["tl"], cfg["tr"], cfg["n"])
    config = SimulationConfig(
        seed=cfg["seed"],
        step=cfg["step"],
        total_time=cfg["total_time"],
        burn_in=None if cfg["burn_in"] < 0 else cfg["burn_in"],
        trajectories=cfg["trajectories"],
    )
    moments = estimate_stationary(config, chain, couplings, temps)
    exact = covariance_closed_form(chain, temps).full()
    rows = []
    dim = exact.shape[0]
    n_within = 0
    n_entries = 0
    for i in range(dim):
        for j in range(i, dim):
            stderr = moments.cov_stderr[i, j]
            z = (moments.cov[i, j] - exact[i, j]) / stderr if stderr > 0 else 0.0
            rows.append((i + 1, j + 1, moments.cov[i, j], exact[i, j], stderr, z))
            n_entries += 1
            if abs(z) <= 4.0:
                n_within += 1
    write_csv(
        out.target("moments.csv"),
        ["i", "j", "estimate", "exact", "stderr", "zscore"],
        rows,
    )
    if cfg["dump_trajectory"]:
        rng = np.random.Generator(np.random.Philox(key=np.array([np.uint64(cfg["seed"]), np.uint64(0)])))
        e_h, g = step_matrices(chain, couplings, temps, cfg["step"])
        x = np.zeros(2 * chain.n)
        dump = []
        for step_i in range(min(moments.n_samples, 2000)):
            x = e_h @ x + g @ rng.standard_normal(2 * chain.n)
            t = (step_i + 1) * cfg["step"]
            for site in range(chain.n):
                dump.append((t, site + 1, x[site], x[chain.n + site]))
        write_csv(out.target("trajectory.csv"), ["t", "i", "q", "p"], dump)
    summary = {
        "n_entries": n_entries,
        "fraction_within_4_sigma": n_within / n_entries,
        "effective_samples": moments.effective_samples,
        "n_samples": moments.n_samples,
        "current_estimates": [float(x) for x in moments.current_estimates],
        "current_stderr": [float(x) for x in moments.current_stderr],
    }
    write_json(out.target("report.json"), summary)
    return summary


def _selftest_checks(cfg: dict):
    chain = ChainParams(cfg["omega"], cfg["gamma"], cfg["lambda"], 16)
    from .covariance import lyapunov_dense_blocks
    from .model import build_phi, spectral_data
    from .transport import kappa_integral

    sd = spectral_data(chain)
    yield (
        "spectral basis orthogonal",
        float(np.max(np.abs(sd.f.T @ sd.f - np.eye(chain.n)))) < 1e-12,
    )
    yield (
        "spectral basis diagonalizes force matrix",
        float(np.max(np.abs(sd.f @ np.diag(sd.mu) @ sd.f.T - build_phi(chain)))) < 1e-10,
    )
    sol = solve_profile(chain, 2.0, 1.0)
    yield ("self-consistent profile bracketed", bool(np.all((sol.profile.temps >= 1.0) & (sol.profile.temps <= 2.0))))
    kmap = kinetic_map(chain)
    yield ("kinetic map doubly stochastic", float(np.max(np.abs(kmap.m.sum(axis=0) - 1.0))) < 1e-10)
    yield ("interior contraction", kmap.q_norm < 1.0)
    blocks = covariance_closed_form(chain, sol.profile)
    couplings = CouplingProfile.uniform(chain.lam, chain.n)
    dense = lyapunov_dense_blocks(chain, couplings, sol.profile)
    yield (
        "closed form matches dense Lyapunov",
        float(np.linalg.norm(blocks.full() - dense.full(), 2)) < 1e-8,
    )
    report = steady_state_report(chain, sol)
    yield ("constant steady current", report.current_spread <= 1e-10 * max(abs(report.j_n), 1e-30))
    yield ("energy balance", abs(float(np.sum(report.reservoir_fluxes))) < 1e-9)
    kappa_i = kappa_integral(chain).kappa
    yield ("kappa closed form vs integral", abs(kappa_i - kappa_closed_form(chain).kappa) < 1e-10)
    from .greenkubo import kappa_gk_lyapunov, kappa_gk_spectral

    yield (
        "Green-Kubo route agreement",
        abs(kappa_gk_lyapunov(chain) - kappa_gk_spectral(chain)) < 1e-9,
    )


def cmd_selftest(cfg: dict, out: OutputDir) -> dict:
    results = []
    for name, ok in _selftest_checks(cfg):
        results.append({"check": name, "pass": bool(ok)})
        print(f"{'PASS' if ok else 'FAIL'}  {name}")
    n_fail = sum(0 if r["pass"] else 1 for r in results)
    summary = {"checks": results, "failures": n_fail}
    write_json(out.target("selftest.json"), summary)
    if n_fail:
        raise RuntimeError(f"{n_fail} selftest checks failed")
    return summary


_COMMANDS = {
    "solve": cmd_solve,
    "kappa-scan": cmd_kappa_scan,
    "greenkubo": cmd_greenkubo,
    "highdim": cmd_highdim,
    "montecarlo": cmd_montecarlo,
    "selftest": cmd_selftest,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="crystalheat",
        description="Self-consistent harmonic-lattice heat transport laboratory",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        cmd = sub.add_parser(name)
        cmd.add_argument("--config", default=None, help="config file (key = value, or a manifest)")
        cmd.add_argument("--out", default="out", help="output directory")
        cmd.add_argument("--n", type=int, default=None)
        cmd.add_argument("--tl", type=float, default=None)
        cmd.add_argument("--tr", type=float, default=None)
        cmd.add_argument("--omega", type=float, default=None)
        cmd.add_argument("--gamma", type=float, default=None)
        cmd.add_argument("--lambda", dest="lam", type=float, default=None)
        cmd.add_argument("--couplings", default=None, help="uniform:x | every-m:x,m | list:file")
        cmd.add_argument("--seed", type=int, default=None)
        cmd.add_argument("--force", action="store_true")
        cmd.add_argument("--json", action="store_true", help="print result summary as JSON")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else 0
    try:
        cfg = resolve_config(args.command, args)
        out = OutputDir(args.out, args.force)
        _write_manifest(out, args.command, cfg)
        summary = _COMMANDS[args.command](cfg, out)
        if args.json:
            print(json.dumps(summary, sort_keys=True, default=float))
        return EXIT_OK
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # numerical/internal failures
        payload = {"error": type(exc).__name__, "message": str(exc)}
        print(json.dumps(payload), file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
