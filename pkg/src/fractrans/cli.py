"""Command-line interface: one config file per run, reports as artifacts.

The config is an INI file whose values are expression strings or
numbers::

    [domain]
    a = 0
    b = 1
    ux = -sqrt(x2*(1-x2))
    ox = sqrt(x2*(1-x2))

    [velocity]
    u = 1

    [data]
    H = 1
    sigma_in = 0

    [params]
    s = 0.45
    p = 5
    N = 64
    M = 64
    h_min = 1e-6
    q = 0.5
    seed = 1234

Commands: solve, norm, flatness, residual, verify, sweep.  Every command
writes a JSON report embedding the fully resolved config; repeated runs
of the same config produce byte-identical artifacts.  Exit codes: 0
success, 2 config/expression parse error, 3 assumption violation
(velocity bound, ill-posed domain, parameter regime), 4 numeric failure.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import json
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .expr import EvalError, ParseError, parse
from .fields import AssumptionError, certify_velocity, write_field_csv
from .geometry import (
    GeometryError,
    build_domain,
    detect_singularities,
    estimate_flatness,
)
from .harness import (
    estimate_constant,
    random_family,
    sharpness_sweep,
    term_integrals,
)
from .norms import FracParams, QuadratureConfig, norm_full, norm_star
from .solver import solve, weak_residual

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_ASSUMPTION = 3
EXIT_NUMERIC = 4


class ConfigError(Exception):
    """Missing or malformed config content."""


@dataclass(frozen=True)
class RunConfig:
    dom: object
    u_text: str
    H_text: str
    sigma_in_text: str
    fp: FracParams
    quad: QuadratureConfig
    N: int
    M: int
    seed: int
    raw: dict

    @classmethod
    def load(cls, path, overrides=()):
        parser = configparser.ConfigParser()
        read = parser.read(path)
        if not read:
            raise ConfigError(f"config file not found: {path}")
        for item in overrides:
            try:
                key, value = item.split("=", 1)
                section, option = key.strip().split(".", 1)
            except ValueError:
                raise ConfigError(f"override must look like section.key=value: {item!r}")
            if not parser.has_section(section):
                parser.add_section(section)
            parser.set(section, option.strip(), value.strip())
        return cls.from_parser(parser)

    @classmethod
    def from_parser(cls, parser):
        def need(section, key):
            try:
                return parser.get(section, key)
            except (configparser.NoSectionError, configparser.NoOptionError):
                raise ConfigError(f"missing config key [{section}] {key}")

        def opt(section, key, default):
            try:
                return parser.get(section, key)
            except (configparser.NoSectionError, configparser.NoOptionError):
                return default

        def floats_list(text):
            return tuple(float(v) for v in text.replace(",", " ").split())

        try:
            a = float(need("domain", "a"))
            b = float(need("domain", "b"))
        except ValueError as exc:
            raise ConfigError(f"domain endpoints must be numbers: {exc}")
        ux = need("domain", "ux")
        ox = need("domain", "ox")
        tang_in = floats_list(opt("domain", "tangency_in", ""))
        tang_out = floats_list(opt("domain", "tangency_out", ""))
        # expression syntax is validated here so malformed input is a
        # config-stage failure, not a numeric one
        for text in (ux, ox, need("velocity", "u"), need("data", "H"), need("data", "sigma_in")):
            parse(text)
        dom = build_domain(a, b, ux, ox, tangency_in=tang_in, tangency_out=tang_out)

        try:
            fp = FracParams(float(need("params", "s")), float(need("params", "p")))
            N = int(opt("params", "N", "64"))
            M = int(opt("params", "M", "64"))
            if N < 4 or M < 4:
                raise ValueError("need N >= 4 and M >= 4")
            h_max_text = opt("params", "h_max", "")
            quad = QuadratureConfig(
                N=N,
                M=M,
                h_min=float(opt("params", "h_min", "1e-6")),
                h_max=float(h_max_text) if h_max_text else None,
                q=float(opt("params", "q", "0.5")),
            )
            seed = int(opt("params", "seed", "1234"))
        except ValueError as exc:
            raise ConfigError(f"bad params section: {exc}")

        raw = {s: dict(parser.items(s)) for s in parser.sections()}
        return cls(
            dom=dom,
            u_text=need("velocity", "u"),
            H_text=need("data", "H"),
            sigma_in_text=need("data", "sigma_in"),
            fp=fp,
            quad=quad,
            N=N,
            M=M,
            seed=seed,
            raw=raw,
        )

    def option(self, section, key, default):
        return self.raw.get(section, {}).get(key, default)


def _write_json(path, payload):
    with open(path, "w") as fh:
        json.dump(payload, fh, sort_keys=True, indent=2)
        fh.write("\n")


def _report(cfg, command, body):
    return {"command": command, "config": cfg.raw, "result": body}


def cmd_solve(cfg, out_dir):
    u = certify_velocity(cfg.u_text, cfg.dom)
    res = solve(cfg.H_text, cfg.sigma_in_text, u, cfg.dom, N=cfg.N, M=cfg.M)
    sigma_path = out_dir / "sigma.csv"
    write_field_csv(res.sigma, sigma_path)
    residual = weak_residual(res, cfg.H_text, cfg.sigma_in_text, u, cfg.dom)
    body = res.to_dict()
    body["weak_residual"] = residual
    body["velocity_lower_bound"] = u.lower
    body["sigma_csv"] = sigma_path.name
    _write_json(out_dir / "solve_report.json", _report(cfg, "solve", body))
    print(f"solve: residual={residual:.3e}, sigma -> {sigma_path}")
    return EXIT_OK


def cmd_norm(cfg, out_dir):
    f_text = cfg.option("norm", "f", cfg.H_text)
    kind = cfg.option("norm", "kind", "star")
    parse(f_text)
    if kind == "star":
        report = norm_star(f_text, cfg.dom, cfg.fp, cfg.quad)
    elif kind == "full":
        report = norm_full(f_text, cfg.dom, cfg.fp, cfg.quad)
    else:
        raise ConfigError(f"[norm] kind must be star or full, got {kind!r}")
    body = {"f": f_text, "kind": kind, "report": report.to_dict()}
    _write_json(out_dir / "norm_report.json", _report(cfg, "norm", body))
    value = report.norm_star if kind == "star" else report.norm_full
    print(f"norm ({kind}): {value:.6g}")
    return EXIT_OK


def cmd_flatness(cfg, out_dir):
    window = float(cfg.option("flatness", "window", "1e-2"))
    points = detect_singularities(cfg.dom)
    fitted = []
    for pt in points:
        curve = cfg.dom.inflow if pt.side == "inflow" else cfg.dom.outflow
        fp = estimate_flatness(curve, pt, window=window)
        fitted.append(
            {
                "location": list(fp.location),
                "side": fp.side,
                "param": fp.param,
                "r": fp.flatness_r,
                "C": fp.flatness_C,
                "fit_quality": fp.fit_quality,
                "certified": fp.flat_certified,
            }
        )
    body = {"window": window, "singularities": fitted}
    _write_json(out_dir / "flatness_report.json", _report(cfg, "flatness", body))
    rs = ", ".join(f"{d['r']:.3f}" for d in fitted) or "none"
    print(f"flatness: {len(fitted)} tangency point(s), r = {rs}")
    return EXIT_OK


def cmd_residual(cfg, out_dir):
    u = certify_velocity(cfg.u_text, cfg.dom)
    res = solve(cfg.H_text, cfg.sigma_in_text, u, cfg.dom, N=cfg.N, M=cfg.M)
    coarse = weak_residual(res, cfg.H_text, cfg.sigma_in_text, u, cfg.dom)
    fine_res = solve(cfg.H_text, cfg.sigma_in_text, u, cfg.dom, N=2 * cfg.N, M=2 * cfg.M)
    fine = weak_residual(fine_res, cfg.H_text, cfg.sigma_in_text, u, cfg.dom)
    body = {"residual": coarse, "residual_refined": fine, "decreases": bool(fine < coarse)}
    _write_json(out_dir / "residual_report.json", _report(cfg, "residual", body))
    print(f"residual: {coarse:.3e} -> {fine:.3e} under refinement")
    return EXIT_OK


def cmd_verify(cfg, out_dir):
    u = certify_velocity(cfg.u_text, cfg.dom)
    count = int(cfg.option("verify", "nsamples", "20"))
    override = cfg.option("verify", "override", "false").lower() == "true"
    family = random_family(cfg.seed, count)
    report = estimate_constant(
        cfg.dom, u, cfg.fp, family, N=cfg.N, M=cfg.M, quad=cfg.quad, override=override
    )
    terms = term_integrals(cfg.H_text, cfg.sigma_in_text, cfg.dom, cfg.fp, cfg.quad)
    body = {"estimate": report.to_dict(), "term_integrals": terms, "family_size": count}
    _write_json(out_dir / "verify_report.json", _report(cfg, "verify", body))
    with open(out_dir / "verify_ratios.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["sample", "ratio"])
        for i, rho in enumerate(report.ratios):
            w.writerow([i, repr(rho)])
    print(
        f"verify: C_emp={report.C_emp:.4f} (refined {report.C_emp_refined:.4f}, "
        f"drift {report.stability:.2%})"
    )
    return EXIT_OK


def cmd_sweep(cfg, out_dir):
    s_grid = [float(v) for v in cfg.option("sweep", "s_grid", "0.45 0.6").replace(",", " ").split()]
    h_grid = [
        float(v)
        for v in cfg.option("sweep", "h_min_grid", "1e-6 1e-5 1e-4 1e-3").replace(",", " ").split()
    ]
    report = sharpness_sweep(cfg.dom, cfg.fp, s_grid, h_grid, quad=cfg.quad)
    _write_json(out_dir / "sweep_report.json", _report(cfg, "sweep", report.to_dict()))
    with open(out_dir / "sweep.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["s", "h_min", "K", "fitted_slope"])
        for i, s in enumerate(report.s_values):
            for j, h in enumerate(report.h_min_values):
                w.writerow([repr(s), repr(h), repr(report.K[i][j]), repr(report.fitted_slopes[i])])
    verdicts = ", ".join(
        f"s={s}: {v}" for s, v in zip(report.s_values, report.verdicts)
    )
    print(f"sweep: eps=1/r={report.epsilon:.4f}; {verdicts}")
    return EXIT_OK


COMMANDS = {
    "solve": cmd_solve,
    "norm": cmd_norm,
    "flatness": cmd_flatness,
    "residual": cmd_residual,
    "verify": cmd_verify,
    "sweep": cmd_sweep,
}


def main(argv=None):
    ap = argparse.ArgumentParser(
        prog="fractrans",
        description="Steady transport solves and fractional-norm experiments from a config file.",
    )
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("config", help="INI config file (see repo README for the format)")
    ap.add_argument("--out", default=".", help="output directory for reports and CSV artifacts")
    ap.add_argument(
        "--set",
        dest="overrides",
        action="append",
        default=[],
        metavar="SECTION.KEY=VALUE",
        help="override a config value (repeatable)",
    )
    args = ap.parse_args(argv)

    try:
        cfg = RunConfig.load(args.config, args.overrides)
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        return COMMANDS[args.command](cfg, out_dir)
    except (ConfigError, ParseError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (AssumptionError, GeometryError) as exc:
        print(f"assumption violation: {exc}", file=sys.stderr)
        return EXIT_ASSUMPTION
    except (EvalError, FloatingPointError, np.linalg.LinAlgError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
