"""Command-line front end: every analysis as a subcommand with reference-run defaults.

Exit codes: 0 success (escapes only warn), 2 usage, 3 domain/argument error,
4 I/O failure. All commands are deterministic; there is no seed anywhere.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from . import analysis, emit
from .dynamics import Orbit, iterate, sensitivity_experiment
from .errors import ArgumentError, DomainError, EscapeError, EscapeWarning
from .model import TrafficParams, diagram_samples

PROG = "greenberg-dyn"

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DOMAIN = 3
EXIT_IO = 4

# The eight single-orbit experiments reproduced by `repro`, as
# (name, v0, k0) with n=300 iterations each.
REPRO_EXPERIMENTS = (
    ("free_flow_sink", 0.25, 0.25),
    ("congested_sink", 1.25, 0.1),
    ("damped_cycle", 1.75, 0.1),
    ("two_cycle", 2.25, 0.35),
    ("four_cycle", 2.405, 0.275),
    ("eight_cycle", 2.48, 0.23),
    ("chaotic_a", 2.585, 0.1),
    ("chaotic_b", 2.585, 0.101),
)


@dataclass(frozen=True)
class RunConfig:
    """Validated invocation: one subcommand plus the flags it consumes."""

    command: str
    v0: float | None = None
    v0_min: float | None = None
    v0_max: float | None = None
    steps: int | None = None
    k0: float | None = None
    kj: float = 1.0
    n: int | None = None
    transient: int | None = None
    keep: int | None = None
    tolerance: float | None = None
    delta: float | None = None
    fmt: str = "all"
    out: str = "."


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be a positive integer, got {text}")
    return value


def _positive_float(text: str) -> float:
    value = float(text)
    if not (value > 0.0 and math.isfinite(value)):
        raise argparse.ArgumentTypeError(f"must be a positive number, got {text}")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog=PROG,
        description=(
            "Discrete dynamics of the normalized Greenberg traffic model: "
            "orbits, cobweb plots, stability reports, bifurcation scans and "
            "Lyapunov sweeps."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_out(p, formats, default_fmt="all"):
        choices = list(formats) + (["all"] if default_fmt == "all" else [])
        p.add_argument("--format", dest="fmt", choices=choices, default=default_fmt)
        p.add_argument("--out", default=".", help="output directory (created if absent)")

    p = sub.add_parser("diagram", help="fundamental diagram profiles")
    p.add_argument("--v0", type=float, default=1.0)
    p.add_argument("--kj", type=_positive_float, default=1.0)
    p.add_argument("--n", type=_positive_int, default=400, help="sample count")
    add_out(p, ("csv", "json", "svg"))

    p = sub.add_parser("orbit", help="iterate the map and emit the orbit")
    p.add_argument("--v0", type=float, required=True)
    p.add_argument("--k0", type=float, default=0.25)
    p.add_argument("--kj", type=_positive_float, default=1.0)
    p.add_argument("--n", type=_positive_int, default=300)
    add_out(p, ("csv", "json"))

    p = sub.add_parser("cobweb", help="orbit iteration drawn over the three diagrams")
    p.add_argument("--v0", type=float, required=True)
    p.add_argument("--k0", type=float, default=0.25)
    p.add_argument("--kj", type=_positive_float, default=1.0)
    p.add_argument("--n", type=_positive_int, default=300)
    add_out(p, ("svg",), default_fmt="svg")

    p = sub.add_parser("classify", help="fixed point, multiplier and stability")
    p.add_argument("--v0", type=float, required=True)
    p.add_argument("--kj", type=_positive_float, default=1.0)
    p.add_argument("--format", dest="fmt", choices=["text", "json"], default="text")

    p = sub.add_parser("bifurcation", help="attractor samples over a v0 grid")
    p.add_argument("--v0-min", type=_positive_float, default=0.05)
    p.add_argument("--v0-max", type=_positive_float, default=2.7)
    p.add_argument("--steps", type=_positive_int, default=1000)
    p.add_argument("--k0", type=float, default=0.25)
    p.add_argument("--n", type=_positive_int, default=300, help="iterations per point")
    p.add_argument("--keep", type=_positive_int, default=60)
    p.add_argument("--tolerance", type=_positive_float, default=1e-6)
    add_out(p, ("csv", "json", "svg"))

    p = sub.add_parser("lyapunov", help="Lyapunov exponent over a v0 grid")
    p.add_argument("--v0-min", type=_positive_float, default=0.05)
    p.add_argument("--v0-max", type=_positive_float, default=2.7)
    p.add_argument("--steps", type=_positive_int, default=200)
    p.add_argument("--k0", type=float, default=0.25)
    p.add_argument("--n", type=_positive_int, default=10_000)
    p.add_argument("--transient", type=_positive_int, default=1_000)
    add_out(p, ("csv", "json", "svg"))

    p = sub.add_parser("sensitivity", help="two nearby orbits and their separation")
    p.add_argument("--v0", type=float, required=True)
    p.add_argument("--k0", type=float, default=0.1)
    p.add_argument("--delta", type=float, default=1e-3)
    p.add_argument("--kj", type=_positive_float, default=1.0)
    p.add_argument("--n", type=_positive_int, default=300)
    p.add_argument(
        "--tolerance",
        type=_positive_float,
        default=0.1,
        help="separation threshold marking divergence",
    )
    add_out(p, ("csv", "json", "svg"))

    p = sub.add_parser("repro", help="run the full set of reference experiments")
    p.add_argument("--out", default="greenberg-repro")

    return parser


def _config_from_args(args: argparse.Namespace) -> RunConfig:
    fields = {
        key: value
        for key, value in vars(args).items()
        if key in RunConfig.__dataclass_fields__ and value is not None
    }
    return RunConfig(**fields)


def _out_dir(config: RunConfig) -> Path:
    path = Path(config.out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _formats(config: RunConfig, supported: Sequence[str]) -> list[str]:
    if config.fmt == "all":
        return list(supported)
    return [config.fmt]


def _emit(payload, out: Path, stem: str, formats: Sequence[str]) -> list[Path]:
    written = []
    if "csv" in formats:
        path = out / f"{stem}.csv"
        emit.write_csv(payload, path)
        written.append(path)
    if "json" in formats:
        path = out / f"{stem}.json"
        emit.write_json(payload, path)
        written.append(path)
    for path in written:
        print(f"wrote {path}")
    return written


def _write_svg(spec: emit.PlotSpec, payload, path: Path) -> Path:
    path.write_text(emit.render_svg(spec, payload), encoding="utf-8")
    print(f"wrote {path}")
    return path


def _quiet_orbit(k0: float, p: TrafficParams, n: int) -> Orbit:
    # The CLI reports escapes itself; silence the library warning.
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", EscapeWarning)
        return iterate(k0, p, n)


def _warn_escape(orbit: Orbit) -> None:
    if orbit.escaped is not None:
        print(
            f"warning: orbit left (0, {orbit.params.kj}] at iterate {orbit.escaped}; "
            f"emitted {len(orbit.states)} states",
            file=sys.stderr,
        )


def _cmd_diagram(config: RunConfig) -> int:
    p = TrafficParams(v0=config.v0, kj=config.kj)
    payload = emit.DiagramPayload(params=p, samples=tuple(diagram_samples(p, config.n)))
    out = _out_dir(config)
    formats = _formats(config, ("csv", "json", "svg"))
    _emit(payload, out, "diagram", formats)
    if "svg" in formats:
        spec = emit.PlotSpec(
            kind=emit.KIND_DIAGRAMS, title=f"Greenberg diagrams, v0={p.v0:g}"
        )
        _write_svg(spec, payload, out / "diagram.svg")
    return EXIT_OK


def _cmd_orbit(config: RunConfig) -> int:
    p = TrafficParams(v0=config.v0, kj=config.kj)
    orbit = _quiet_orbit(config.k0, p, config.n)
    _warn_escape(orbit)
    final = orbit.states[-1]
    print(
        f"final state: i={len(orbit.states) - 1} k={final.k:.6g} "
        f"q={final.q:.6g} v={final.v:.6g}"
    )
    _emit(orbit, _out_dir(config), "orbit", _formats(config, ("csv", "json")))
    return EXIT_OK


def _cmd_cobweb(config: RunConfig) -> int:
    p = TrafficParams(v0=config.v0, kj=config.kj)
    orbit = _quiet_orbit(config.k0, p, config.n)
    _warn_escape(orbit)
    spec = emit.PlotSpec(
        kind=emit.KIND_COBWEB,
        title=f"Iteration on the Greenberg diagrams, v0={p.v0:g}, k0={config.k0:g}",
    )
    _write_svg(spec, orbit, _out_dir(config) / "cobweb.svg")
    return EXIT_OK


def _cmd_classify(config: RunConfig) -> int:
    p = TrafficParams(v0=config.v0, kj=config.kj)
    report = analysis.classify_fixed_point(p)
    if config.fmt == "json":
        doc = {
            "schema_version": emit.SCHEMA_VERSION,
            "kind": "fixed-point-report",
            "settings": {"v0": p.v0, "kj": p.kj},
            "data": {
                "k_star": report.k_star,
                "multiplier": report.multiplier,
                "classification": report.classification,
                "exponentially_stable": report.exponentially_stable,
            },
        }
        print(json.dumps(doc, indent=2))
    else:
        print(f"fixed point k*      = {report.k_star:.12g}")
        print(f"multiplier          = {report.multiplier:.12g}")
        print(f"classification      = {report.classification}")
        print(f"exponentially stable = {'yes' if report.exponentially_stable else 'no'}")
    return EXIT_OK


def _cmd_bifurcation(config: RunConfig) -> int:
    scan = analysis.bifurcation_scan(
        config.v0_min,
        config.v0_max,
        config.steps,
        k0=config.k0,
        n_total=config.n,
        n_keep=config.keep,
        tolerance=config.tolerance,
    )
    escaped = sum(scan.escaped)
    if escaped:
        print(f"warning: {escaped} grid points escaped (0, 1]", file=sys.stderr)
    out = _out_dir(config)
    formats = _formats(config, ("csv", "json", "svg"))
    _emit(scan, out, "bifurcation", formats)
    if "svg" in formats:
        for field in ("k", "v"):
            spec = emit.PlotSpec(
                kind=emit.KIND_BIFURCATION,
                title=f"{field} vs v0 bifurcation diagram",
                y_field=field,
            )
            _write_svg(spec, scan, out / f"bifurcation_{field}.svg")
    return EXIT_OK


def _cmd_lyapunov(config: RunConfig) -> int:
    curve = analysis.lyapunov_curve(
        config.v0_min,
        config.v0_max,
        config.steps,
        k0=config.k0,
        n=config.n,
        n_transient=config.transient,
    )
    missing = sum(1 for lam in curve.lambdas if lam is None)
    if missing:
        print(
            f"warning: {missing} grid points have no finite estimate "
            "(escaped or superstable orbit)",
            file=sys.stderr,
        )
    out = _out_dir(config)
    formats = _formats(config, ("csv", "json", "svg"))
    _emit(curve, out, "lyapunov", formats)
    if "svg" in formats:
        spec = emit.PlotSpec(kind=emit.KIND_LYAPUNOV, title="Lyapunov exponent vs v0")
        _write_svg(spec, curve, out / "lyapunov.svg")
    return EXIT_OK


def _cmd_sensitivity(config: RunConfig) -> int:
    p = TrafficParams(v0=config.v0, kj=config.kj)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", EscapeWarning)
        result = sensitivity_experiment(
            config.k0, config.delta, p, n=config.n, threshold=config.tolerance
        )
    for orbit in (result.orbit_a, result.orbit_b):
        _warn_escape(orbit)
    if result.first_divergence_index is None:
        print(f"no divergence beyond {result.threshold:g} within {config.n} iterations")
    else:
        print(
            f"separation exceeded {result.threshold:g} at iterate "
            f"{result.first_divergence_index}"
        )
    out = _out_dir(config)
    formats = _formats(config, ("csv", "json", "svg"))
    _emit(result, out, "sensitivity", formats)
    if "svg" in formats:
        spec = emit.PlotSpec(
            kind=emit.KIND_SENSITIVITY,
            title=f"Nearby orbits, v0={p.v0:g}, k0={config.k0:g}, delta={config.delta:g}",
        )
        _write_svg(spec, result, out / "sensitivity.svg")
    return EXIT_OK


def _cmd_repro(config: RunConfig) -> int:
    out = _out_dir(config)
    manifest: list[dict] = []

    for name, v0, k0 in REPRO_EXPERIMENTS:
        p = TrafficParams(v0=v0)
        orbit = _quiet_orbit(k0, p, 300)
        _warn_escape(orbit)
        files = [str(f) for f in _emit(orbit, out, f"{name}_orbit", ("csv", "json"))]
        spec = emit.PlotSpec(
            kind=emit.KIND_COBWEB,
            title=f"Iteration on the Greenberg diagrams, v0={v0:g}, k0={k0:g}",
        )
        files.append(str(_write_svg(spec, orbit, out / f"{name}_cobweb.svg")))
        manifest.append(
            {
                "name": name,
                "settings": {"v0": v0, "kj": 1.0, "k0": k0, "n": 300},
                "files": files,
            }
        )

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", EscapeWarning)
        result = sensitivity_experiment(0.1, 1e-3, TrafficParams(v0=2.585), n=300)
    files = [str(f) for f in _emit(result, out, "sensitivity", ("csv", "json"))]
    spec = emit.PlotSpec(
        kind=emit.KIND_SENSITIVITY, title="Nearby orbits, v0=2.585, k0=0.1, delta=0.001"
    )
    files.append(str(_write_svg(spec, result, out / "sensitivity.svg")))
    manifest.append(
        {
            "name": "sensitivity",
            "settings": {"v0": 2.585, "kj": 1.0, "k0": 0.1, "delta": 1e-3, "n": 300,
                         "threshold": 0.1},
            "files": files,
        }
    )

    scan = analysis.bifurcation_scan(0.05, 2.7, 1000)
    files = [str(f) for f in _emit(scan, out, "bifurcation", ("csv", "json"))]
    for field in ("k", "v"):
        spec = emit.PlotSpec(
            kind=emit.KIND_BIFURCATION,
            title=f"{field} vs v0 bifurcation diagram",
            y_field=field,
        )
        files.append(str(_write_svg(spec, scan, out / f"bifurcation_{field}.svg")))
    manifest.append(
        {
            "name": "bifurcation_scan",
            "settings": {"v0_min": 0.05, "v0_max": 2.7, "steps": 1000, "k0": 0.25,
                         "n_total": 300, "n_keep": 60, "tolerance": 1e-6},
            "files": files,
        }
    )

    curve = analysis.lyapunov_curve(0.05, 2.7, 200)
    files = [str(f) for f in _emit(curve, out, "lyapunov", ("csv", "json"))]
    spec = emit.PlotSpec(kind=emit.KIND_LYAPUNOV, title="Lyapunov exponent vs v0")
    files.append(str(_write_svg(spec, curve, out / "lyapunov.svg")))
    manifest.append(
        {
            "name": "lyapunov_curve",
            "settings": {"v0_min": 0.05, "v0_max": 2.7, "steps": 200, "k0": 0.25,
                         "n": 10_000, "n_transient": 1_000},
            "files": files,
        }
    )

    manifest_doc = {
        "schema_version": emit.SCHEMA_VERSION,
        "kind": "repro-manifest",
        "experiments": manifest,
    }
    manifest_path = out / "manifest.json"
    manifest_path.write_text(json.dumps(manifest_doc, indent=2) + "\n", encoding="utf-8")
    print(f"wrote {manifest_path}")
    return EXIT_OK


_HANDLERS = {
    "diagram": _cmd_diagram,
    "orbit": _cmd_orbit,
    "cobweb": _cmd_cobweb,
    "classify": _cmd_classify,
    "bifurcation": _cmd_bifurcation,
    "lyapunov": _cmd_lyapunov,
    "sensitivity": _cmd_sensitivity,
    "repro": _cmd_repro,
}


def run(config: RunConfig) -> int:
    """Execute one validated invocation; returns the process exit status."""
    return _HANDLERS[config.command](config)


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    config = _config_from_args(args)
    try:
        return run(config)
    except (DomainError, ArgumentError, EscapeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
