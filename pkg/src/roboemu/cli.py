"""``roboemu`` command line.

    roboemu simulate  --config scn.json [--out trace.csv] [--seed N]
    roboemu analyze   --config scn.json [--out freq.csv] [--values 1,2,4,4.9]
    roboemu sweep     --config scn.json --axis inertia_ratio --values 1,2,4,6 [--jobs 4]
    roboemu casestudy [--out DIR]

Relative output paths are resolved against ``$ROBOEMU_OUTPUT_DIR`` when set.
Exit codes: 0 success, 2 configuration error, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import io
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from . import freq
from .casestudy import configs as casestudy_configs
from .config import ScenarioConfig
from .errors import ConfigError, EmulationError
from .sim import AXES, SimTrace, inertia_ratio_eigs, run, summarize, sweep

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3
OUTPUT_ENV = "ROBOEMU_OUTPUT_DIR"


def _resolve(path: str) -> Path:
    p = Path(path)
    base = os.environ.get(OUTPUT_ENV)
    if base and not p.is_absolute():
        p = Path(base) / p
    return p


def _fmt(v: float) -> str:
    return "" if v != v else f"{v:.12g}"


def _header(cfg: ScenarioConfig, **extra) -> str:
    lines = [f"# roboemu {__version__}", f"# config_hash {cfg.digest()}"]
    lines += [f"# {k} {v}" for k, v in extra.items()]
    return "\n".join(lines) + "\n"


def trace_csv(trace: SimTrace, cfg: ScenarioConfig) -> str:
    """Fixed-schema trace CSV; channels a scheme does not produce are left empty."""
    buf = io.StringIO()
    buf.write(_header(cfg, scheme=trace.scheme))
    buf.write(",".join(trace.columns()) + "\n")
    for row in trace.rows().tolist():
        buf.write(",".join(map(_fmt, row)) + "\n")
    return buf.getvalue()


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def _load(args) -> ScenarioConfig:
    cfg = ScenarioConfig.load(args.config)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    return cfg


def _values(text: str | None, what: str) -> list[float]:
    if not text:
        return []
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(what, f"expected comma-separated numbers, got {text!r}") from None


def cmd_simulate(args) -> int:
    cfg = _load(args)
    scn = cfg.build()
    trace = run(scn)
    out = _resolve(args.out or cfg.output)
    _write(out, trace_csv(trace, cfg))
    row = summarize(trace, 0.0)
    print(f"scheme {trace.scheme}  steps {scn.steps}  wrote {out}")
    phi = trace.norm("phi")
    print(f"final |Phi|        {_fmt(phi[-1]) or 'n/a'}")
    print(f"peak |f_a|         {trace.norm('f_a').max():.6g}")
    if trace.scheme != "oracle":
        print(f"peak |e_f|         {trace.norm('e_f').max():.6g}")
        settled = trace.t >= 5.0 / scn.gains.omega_p
        lam_max = trace.norm("lambda").max()
        if settled.any() and lam_max > 0:
            diff = np.linalg.norm(trace["f_a"][settled] - trace["lambda"][settled], axis=1)
            print(f"|f_a - lambda| / max|lambda| after {5.0 / scn.gains.omega_p:g} s  {diff.max() / lam_max:.3e}")
    print(f"verdict            {row.verdict} (peak force {row.peak_force_ratio:.4g} x reference)")
    return EXIT_OK


def cmd_analyze(args) -> int:
    cfg = _load(args)
    scn = cfg.build()
    lams = _values(args.values, "values") or [float(v) for v in inertia_ratio_eigs(scn)]
    gains, omega_a = scn.gains, scn.actuator.omega_a
    gate = freq.stability_gate(lams, omega_a, gains)
    curves = freq.transmissivity_curves([e.lam for e in gate.entries], omega_a, gains)
    omega = freq.BODE_GRID
    dyn_r = scn.rigid.evaluate(*scn.initial_rigid())
    from .constrained import cartesian_inertia

    Mc_r = cartesian_inertia(dyn_r.M, dyn_r.J)
    sigma_q = max(abs(v) for v in lams)
    extra = {
        "sens_A": freq.disturbance_sensitivity([[sigma_q]], gains, "A", omega).gain,
        "sens_B": freq.disturbance_sensitivity(None, gains, "B", omega, Mc_r=Mc_r).gain,
    }
    text = freq.format_bode_csv(
        curves, gate, {"roboemu": __version__, "config_hash": cfg.digest(), "omega_a": omega_a,
                       "omega_p": gains.omega_p}, extra
    )
    out = _resolve(args.out or "analysis.csv")
    _write(out, text)
    print(f"bound 2*omega_a/omega_p = {gate.bound:.6g}  wrote {out}")
    for e, c in zip(gate.entries, curves):
        peak = "inf" if not c.stable else f"{c.peak:.6g}"
        print(f"lambda_q {e.lam:<8g} {e.verdict:<9} margin {e.margin:+.4g}  peak |T| {peak}")
    return EXIT_OK


SWEEP_COLUMNS = ("value", "verdict", "steady_phi", "steady_ef", "peak_force_ratio", "peak_T", "dominant_omega")


def cmd_sweep(args) -> int:
    cfg = _load(args)
    if args.axis not in AXES:
        raise ConfigError("axis", f"unknown axis {args.axis!r}; expected one of {', '.join(AXES)}")
    values = _values(args.values, "values")
    if not values:
        raise ConfigError("values", "at least one value is required")
    rows = sweep(cfg.build(), args.axis, values, jobs=args.jobs)
    buf = io.StringIO()
    buf.write(_header(cfg, axis=args.axis))
    buf.write(",".join(SWEEP_COLUMNS) + "\n")
    for r in rows:
        buf.write(",".join([_fmt(r.value), r.verdict] + [_fmt(getattr(r, c)) for c in SWEEP_COLUMNS[2:]]) + "\n")
    out = _resolve(args.out or "sweep.csv")
    _write(out, buf.getvalue())
    print(f"{args.axis:>12} {'verdict':>10} {'peak f/ref':>11} {'omega_dom':>10}")
    for r in rows:
        print(f"{r.value:>12g} {r.verdict:>10} {r.peak_force_ratio:>11.4g} {r.dominant_omega:>10.4g}"
              + (f"  {r.message}" if r.message else ""))
    print(f"wrote {out}")
    return EXIT_OK


CASESTUDY_README = """\
1-DOF flexible-joint case study
===============================

casestudy_free_space.json   open-loop sinusoidal drive, no wall
casestudy_1dof.json         resolved-rate approach and press against a wall (FMA on)
casestudy_disturbance.json  sinusoidal force disturbance at 3 omega_p, free space
casestudy_sweep.json        pressed at rest with a lagging actuator, for sweeps

    roboemu simulate --config casestudy_1dof.json
    roboemu analyze  --config casestudy_sweep.json --values 1,2,4,4.9
    roboemu sweep    --config casestudy_sweep.json --axis inertia_ratio --values 1,2,4,6
"""


def cmd_casestudy(args) -> int:
    out = _resolve(args.out or "casestudy")
    out.mkdir(parents=True, exist_ok=True)
    for name, cfg in casestudy_configs().items():
        cfg.build()
        cfg.save(out / name)
        print(out / name)
    (out / "README.txt").write_text(CASESTUDY_README)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="roboemu", description="Robot emulation by hybrid simulation.")
    parser.add_argument("--version", action="version", version=f"roboemu {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config=True):
        if config:
            p.add_argument("--config", required=True, help="scenario JSON")
        p.add_argument("--out", help="output path")
        p.add_argument("--seed", type=int, help="override the config seed")
        return p

    common(sub.add_parser("simulate", help="run the configured scheme and write a trace CSV"))
    p = common(sub.add_parser("analyze", help="transmissivity and stability report"))
    p.add_argument("--values", help="inertia-ratio eigenvalues to analyze (default: from the models)")
    p = common(sub.add_parser("sweep", help="run one scenario per parameter value"))
    p.add_argument("--axis", required=True, help=f"one of {', '.join(AXES)}")
    p.add_argument("--values", required=True, help="comma-separated values")
    p.add_argument("--jobs", type=int, default=1, help="parallel runs")
    common(sub.add_parser("casestudy", help="write the case-study configs"), config=False)
    return parser


COMMANDS = {"simulate": cmd_simulate, "analyze": cmd_analyze, "sweep": cmd_sweep, "casestudy": cmd_casestudy}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (EmulationError, OSError, np.linalg.LinAlgError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
