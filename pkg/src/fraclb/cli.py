"""Experiment runner.

Verbs::

    fraclb run <config>       cross-validate methods over a parameter sweep
    fraclb check <name|all>   run one acceptance check (or all of them)
    fraclb list [--module M]  list the registered checks

Exit codes: 0 success, 1 validation error, 2 acceptance failure.

Configs are flat ``key = value`` files with one ``[experiment]`` section::

    [experiment]
    manifold = sphere          ; sphere, torus1 or torus2
    s = 0.25, 0.5
    resolutions = 32, 64
    epsilon_multiple = 4
    methods = spectral, heat, pv
    band_limit = 8
    seed = 0
    z = -1                     ; parametrix only
    depth = 0                  ; parametrix only
    checks = contour_scalar    ; optional acceptance checks for the summary
"""

from __future__ import annotations

import argparse
import configparser
import csv
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .checks import REGISTRY, list_checks
from .errors import ConvergenceError, DomainError
from .geometry import Field, ManifoldGeometry, build_grid, eigenbasis
from .heat import fractional_apply_heat
from .inequalities import EnsembleSpec, sample_ensemble
from .parametrix import ResolventParametrix, apply_parametrix, remainder_probe, write_remainder_csv
from .pvkernel import KernelSpec, PVScheme, c_ns_constant, diagonal_asymptotics_check, pv_apply, riesz_apply
from .spectral import fractional_apply_spectral, resolvent_apply

METHODS = ("spectral", "heat", "pv", "riesz", "parametrix")


class ConfigError(ValueError):
    """Invalid experiment configuration."""

    def __init__(self, key: str, message: str):
        super().__init__(f"{key}: {message}")
        self.key = key
        self.message = message


@dataclass
class ExperimentConfig:
    manifold: ManifoldGeometry
    s_values: list[float]
    resolutions: list[int]
    epsilon_multiple: float = 4.0
    methods: list[str] = field(default_factory=list)
    band_limit: int = 8
    seed: int = 0
    output: Path = Path("out")
    z: complex = -1.0
    depth: int = 0
    checks: list[str] = field(default_factory=list)

    def validate(self) -> None:
        """Reject configs whose methods cannot run on the listed parameters."""
        M = self.manifold
        for m in self.methods:
            if m not in METHODS:
                raise ConfigError("methods", f"unknown method {m!r}")
        for name in self.checks:
            if name not in REGISTRY:
                raise ConfigError("checks", f"unknown check {name!r}")
        if not self.methods:
            return
        if not self.resolutions:
            raise ConfigError("resolutions", "at least one resolution is needed")
        for s in self.s_values:
            if not (-1 < s < 1) or s == 0:
                raise ConfigError("s", f"{s} outside (-1, 1) without 0")
        if self.epsilon_multiple < 2:
            raise ConfigError("epsilon_multiple", "epsilon must be at least 2 x grid spacing")
        for res in self.resolutions:
            if res < 4:
                raise ConfigError("resolutions", f"{res} below the minimum of 4")
            nyq = res - 1 if M.is_sphere else (res - 1) // 2
            if self.band_limit > nyq:
                raise ConfigError("band_limit", f"{self.band_limit} exceeds the Nyquist limit {nyq} at resolution {res}")
        need = {"heat": lambda s: s > 0, "pv": lambda s: s > 0, "riesz": lambda s: s < 0}
        for m, ok in need.items():
            if m in self.methods and not any(ok(s) for s in self.s_values):
                raise ConfigError("s", f"method {m} needs {'positive' if m != 'riesz' else 'negative'} s")
        if "riesz" in self.methods or "pv" in self.methods:
            for s in self.s_values:
                try:
                    c_ns_constant(M.dim, s)
                except DomainError as exc:
                    raise ConfigError("s", str(exc)) from None
        if "parametrix" in self.methods:
            if complex(self.z).imag == 0 and complex(self.z).real >= 0:
                raise ConfigError("z", "z must avoid the nonnegative real axis")
            if not (0 <= self.depth <= (1 if M.is_sphere else 2)):
                raise ConfigError("depth", "depth out of range for this manifold")


def _floats(text: str) -> list[float]:
    return [float(t) for t in text.replace(";", ",").split(",") if t.strip()]


def _names(text: str) -> list[str]:
    return [t.strip() for t in text.split(",") if t.strip()]


def parse_manifold(text: str) -> ManifoldGeometry:
    key = text.strip().lower()
    if key in ("sphere", "s2"):
        return ManifoldGeometry.sphere()
    if key in ("torus1", "t1"):
        return ManifoldGeometry.torus(1)
    if key in ("torus2", "t2"):
        return ManifoldGeometry.torus(2)
    raise ConfigError("manifold", f"unknown manifold {text!r}")


def load_config(path, seed: int | None = None, out: str | None = None) -> ExperimentConfig:
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    if not parser.read(path):
        raise ConfigError("path", f"cannot read {path}")
    if "experiment" not in parser:
        raise ConfigError("experiment", "missing [experiment] section")
    sec = parser["experiment"]
    try:
        cfg = ExperimentConfig(
            manifold=parse_manifold(sec.get("manifold", "sphere")),
            s_values=_floats(sec.get("s", "")),
            resolutions=[int(v) for v in _floats(sec.get("resolutions", ""))],
            epsilon_multiple=sec.getfloat("epsilon_multiple", 4.0),
            methods=_names(sec.get("methods", "")),
            band_limit=sec.getint("band_limit", 8),
            seed=sec.getint("seed", 0),
            output=Path(sec.get("output", "out")),
            z=complex(sec.get("z", "-1").replace(" ", "")),
            depth=sec.getint("depth", 0),
            checks=_names(sec.get("checks", "")),
        )
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError("value", str(exc)) from None
    if seed is not None:
        cfg.seed = seed
    if out is not None:
        cfg.output = Path(out)
    cfg.validate()
    return cfg


def _rel(a, b):
    a, b = np.asarray(a), np.asarray(b)
    den = np.linalg.norm(b)
    return float(np.linalg.norm(a - b) / den), float(np.max(np.abs(a - b)) / np.max(np.abs(b)))


def _input_field(cfg: ExperimentConfig, grid) -> Field:
    f = sample_ensemble(EnsembleSpec(1, cfg.band_limit, cfg.seed), grid)[0]
    if cfg.band_limit >= 1:
        # mean-zero so every method, including negative powers, accepts it
        f = f.with_values(f.values - f.mean(), mean_zero=True)
    return f


def _run_row(cfg: ExperimentConfig, res: int, s: float, method: str, timing: bool):
    M = cfg.manifold
    grid = build_grid(M, res)
    f = _input_field(cfg, grid)
    basis = eigenbasis(M, cfg.band_limit, grid)
    truth = fractional_apply_spectral(f, s, basis).values
    t0 = time.perf_counter()
    flag = "ok"
    kind = "heat" if method in ("spectral", "heat") else "kernel"
    try:
        if method == "spectral":
            vals = truth
        elif method == "heat":
            vals = fractional_apply_heat(f, s, basis=basis).values
        else:
            spec = KernelSpec.default(M, s)
            scheme = PVScheme.from_spacing(grid, cfg.epsilon_multiple)
            vals = (pv_apply if method == "pv" else riesz_apply)(f, spec, scheme).values
        l2, linf = _rel(vals, truth)
    except ConvergenceError as exc:
        l2 = linf = float("nan")
        flag = f"nonconvergence: {exc}"
    runtime = time.perf_counter() - t0
    if kind == "heat":
        return kind, [repr(s), cfg.band_limit, method, repr(l2), repr(linf), repr(runtime) if timing else "", res, flag]
    eps = cfg.epsilon_multiple * grid.spacing
    lim = tgt = slope = ""
    if method == "pv" and M.dim == 2:
        rep = diagonal_asymptotics_check(M, s)
        lim, tgt, slope = repr(float(rep.limit)), repr(float(rep.target)), repr(float(rep.slope))
    return kind, [str(M), M.dim, repr(s), res, repr(float(eps)), method, repr(l2), repr(linf), lim, tgt, slope, flag]


HEAT_HEADER = ["s", "band_limit", "method", "L2_error", "Linf_error", "runtime_seconds", "resolution", "flag"]
KERNEL_HEADER = ["manifold", "n", "s", "resolution", "epsilon", "mode", "L2_rel_error", "Linf_rel_error",
                 "kernel_limit_estimate", "kernel_limit_target", "slope", "flag"]


def _write(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def run_experiment(cfg: ExperimentConfig, threads: int = 1, timing: bool = False) -> int:
    """Run the sweep and write CSVs into ``cfg.output``. Returns the exit status."""
    cfg.validate()
    out = Path(cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    valid = {"spectral": lambda s: True, "heat": lambda s: s > 0, "pv": lambda s: s > 0, "riesz": lambda s: s < 0}
    tasks = [(res, s, m) for res in cfg.resolutions for s in cfg.s_values for m in cfg.methods
             if m in valid and valid[m](s)]
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        results = list(pool.map(lambda t: _run_row(cfg, *t, timing), tasks))
    heat_rows = [r for k, r in results if k == "heat"]
    kernel_rows = [r for k, r in results if k == "kernel"]
    if heat_rows:
        _write(out / "heat_vs_spectral.csv", HEAT_HEADER, heat_rows)
    if kernel_rows:
        _write(out / "kernel_methods.csv", KERNEL_HEADER, kernel_rows)
    if "parametrix" in cfg.methods:
        rows = []
        for res in cfg.resolutions:
            grid = build_grid(cfg.manifold, res)
            f = _input_field(cfg, grid)
            for N in range(cfg.depth + 1):
                pr = ResolventParametrix(cfg.manifold, N)
                rows.append((N, cfg.z, remainder_probe(pr, cfg.z, f)[1]))
        write_remainder_csv(rows, out / "parametrix_remainder.csv")
        err_rows = []
        for res in cfg.resolutions:
            grid = build_grid(cfg.manifold, res)
            f = _input_field(cfg, grid)
            pr = ResolventParametrix(cfg.manifold, cfg.depth)
            l2, linf = _rel(apply_parametrix(f, pr, cfg.z).values, resolvent_apply(f, cfg.z).values)
            err_rows.append([str(cfg.manifold), res, cfg.depth, repr(complex(cfg.z).real), repr(complex(cfg.z).imag), repr(l2), repr(linf)])
        _write(out / "parametrix_vs_resolvent.csv", ["manifold", "resolution", "N", "z_re", "z_im", "L2_rel_error", "Linf_rel_error"], err_rows)
    summary = []
    status = 0
    for name in cfg.checks:
        res = REGISTRY[name].run()
        summary.append([REGISTRY[name].criterion, name, "pass" if res.passed else "fail", res.detail])
        if not res.passed:
            status = 2
    _write(out / "summary.csv", ["criterion", "check", "result", "detail"], summary)
    return status


def _cmd_run(args) -> int:
    try:
        cfg = load_config(args.config, seed=args.seed, out=args.out)
    except ConfigError as exc:
        print(f"error\tkey={exc.key}\t{exc.message}", file=sys.stderr)
        return 1
    return run_experiment(cfg, threads=args.threads, timing=args.timing)


def _cmd_check(args) -> int:
    names = [c.name for c in list_checks()] if args.name == "all" else [args.name]
    if any(n not in REGISTRY for n in names):
        print(f"error\tkey=name\tunknown check {args.name!r}", file=sys.stderr)
        return 1
    status = 0
    rows = []
    for n in names:
        res = REGISTRY[n].run()
        print(res.line())
        rows.append([REGISTRY[n].criterion, n, "pass" if res.passed else "fail", res.detail])
        if not res.passed:
            status = 2
    if args.out:
        Path(args.out).mkdir(parents=True, exist_ok=True)
        _write(Path(args.out) / "summary.csv", ["criterion", "check", "result", "detail"], rows)
    return status


def _cmd_list(args) -> int:
    for c in list_checks(args.module):
        print(f"{c.name}\t{c.module}\t{c.criterion}\t{c.description}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fraclb", description="Fractional Laplace-Beltrami experiment runner")
    p.add_argument("--threads", type=int, default=1, help="worker threads for independent rows")
    p.add_argument("--out", default=None, help="output directory (overrides the config)")
    p.add_argument("--seed", type=int, default=None, help="random seed (overrides the config)")
    sub = p.add_subparsers(dest="verb", required=True)
    r = sub.add_parser("run", help="run an experiment config")
    r.add_argument("config")
    r.add_argument("--timing", action="store_true", help="fill runtime_seconds (breaks bit-exact reruns)")
    c = sub.add_parser("check", help="run an acceptance check by name, or 'all'")
    c.add_argument("name")
    li = sub.add_parser("list", help="list acceptance checks")
    li.add_argument("--module", default=None)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.verb == "run":
        return _cmd_run(args)
    if args.verb == "check":
        return _cmd_check(args)
    return _cmd_list(args)


if __name__ == "__main__":
    sys.exit(main())
