"""Command line: ``simulate``, ``reproduce``, ``compare``, ``validate-config``.

Exit codes: 0 success, 2 config or argument error, 3 I/O error,
4 a ``reproduce`` verdict failed.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .channel import simulate as simulate_channel
from .config import (
    ConfigError,
    ScenarioConfig,
    build_scenes,
    config_hash,
    parse_scenario,
    validate,
)
from .mobility import PRESET_NAMES
from .stats import (
    CorrelationCurve,
    CurveParseError,
    analytic_acf,
    analytic_ccf,
    coherence_time,
    compare_curves,
    ingest_reference_curve,
    mc_acf,
    mc_ccf,
    write_curve,
)

EXIT_OK, EXIT_CONFIG, EXIT_IO, EXIT_CHECK = 0, 2, 3, 4

FIGURES = {
    # name: (kind, component)
    "fig3": ("ACF", "los"),
    "fig4": ("ACF", "nlos"),
    "fig5": ("CCF", "los"),
    "fig6": ("CCF", "nlos"),
}
# Lag grids fine enough to resolve the half-decay crossing of each component.
FIGURE_LAGS = {"los": (2e-3, 1e-6), "nlos": (30e-3, 1e-5)}
FIGURE_SPACINGS = (2.0, 0.01)
MC_STRIDE = 10
ANCHORS = (0.0, 1.0, 2.0)
T0_TOL = 1e-9
CCF_TOL = 0.1
MC_TOL = 0.05


# Helpers ---------------------------------------------------------------------------


def _grid(stop: float, step: float) -> np.ndarray:
    n = int(math.floor(stop / step + 1e-9))
    return np.arange(n + 1) * step


def _tag(t: float) -> str:
    return f"{t:g}".replace(".", "p")


def _dump_json(obj, path: Path) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _coherence_part(component: str) -> str:
    # A lone LoS phasor never loses magnitude; its decorrelation is in the real part.
    return "real" if component == "los" else "abs"


def load_config(source: str) -> ScenarioConfig:
    """A scenario file path, or a bare preset name."""
    if source in PRESET_NAMES and not Path(source).exists():
        return validate(ScenarioConfig(preset=source))
    return parse_scenario(source)


def _check_window(cfg: ScenarioConfig, scene, anchors, max_lag: float) -> None:
    for t in anchors:
        if t + max_lag > scene.duration + 1e-12:
            raise ConfigError("output.anchor_times",
                              f"anchor {t} s plus max lag {max_lag} s exceeds the {scene.duration} s window")


def write_cir(realization, path: Path, fmt: str) -> Path:
    """Dump CIRs; columns ``t, tau_los, tau_1..tau_N, re/im of H[q, p]`` row-major in ``(q, p)``."""
    h = realization.H
    n_t, nq, np_ = h.shape
    cols = [realization.times[:, None], realization.los_delay[:, None], realization.cluster_delays]
    cols.append(np.stack([h.real, h.imag], axis=-1).reshape(n_t, nq * np_ * 2))
    table = np.concatenate(cols, axis=1)
    names = ["t", "tau_los"] + [f"tau_{n + 1}" for n in range(realization.cluster_delays.shape[1])]
    names += [f"{part}_q{q}p{p}" for q in range(nq) for p in range(np_) for part in ("re", "im")]
    if fmt == "bin":
        path = path.with_suffix(".bin")
        path.write_bytes(table.astype("<f8").tobytes())
        path.with_suffix(".columns").write_text("\n".join(names) + "\n", encoding="utf-8")
        return path
    path = path.with_suffix(".csv")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(names) + "\n")
        for row in table:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")
    return path


# simulate ---------------------------------------------------------------------------


def run(cfg: ScenarioConfig, out_dir: Path, outputs: set[str], workers: int = 1, fmt: str = "csv",
        anchors=None, compare_path: str | None = None) -> dict:
    """Write the selected outputs for ``cfg``; returns the summary dictionary."""
    out_dir.mkdir(parents=True, exist_ok=True)
    o = cfg.output
    anchors = tuple(o.anchor_times if anchors is None else anchors)
    scenes_on = build_scenes(cfg, posture=True)
    scenes_off = [s.with_posture(False) for s in scenes_on]
    summary: dict = {
        "seed": cfg.seed,
        "config_hash": config_hash(cfg),
        "preset": cfg.preset,
        "component": o.component,
        "n_realizations": o.n_realizations,
        "n_scenes": o.n_scenes,
    }
    part = _coherence_part(o.component)

    if "cir" in outputs:
        scene = scenes_on[0] if cfg.simulation.posture else scenes_off[0]
        times = _grid(scene.duration, cfg.simulation.cir_step)
        real = simulate_channel(scene, times, seed=cfg.seed)
        summary["cir_file"] = write_cir(real, out_dir / "cir", fmt).name

    if "acf" in outputs or "summary" in outputs:
        _check_window(cfg, scenes_on[0], anchors, o.max_lag)
        lags = _grid(o.max_lag, o.lag_step)
        coh, dev = {}, {}
        for t in anchors:
            on = analytic_acf(scenes_on, t, lags, component=o.component)
            off = analytic_acf(scenes_off, t, lags, component=o.component)
            sim = mc_acf(scenes_on, t, lags, o.n_realizations, cfg.seed, component=o.component,
                         workers=workers)
            key = f"{t:g}"
            coh[key] = {"posture": coherence_time(on, part=part), "reference": coherence_time(off, part=part)}
            dev[key] = compare_curves(on, sim).max_complex_deviation
            if "acf" in outputs:
                write_curve(on, out_dir / f"acf_t{_tag(t)}_analytic_posture.csv")
                write_curve(off, out_dir / f"acf_t{_tag(t)}_analytic_reference.csv")
                write_curve(sim, out_dir / f"acf_t{_tag(t)}_simulated_posture.csv")
        summary["coherence_time"] = coh
        summary["max_deviation_acf"] = dev

    if "ccf" in outputs:
        spacings = _grid(o.max_spacing, o.spacing_step)
        dev = {}
        for t in anchors:
            if t > scenes_on[0].duration:
                raise ConfigError("output.anchor_times", f"anchor {t} s outside the window")
            on = analytic_ccf(scenes_on, t, spacings, component=o.component)
            off = analytic_ccf(scenes_off, t, spacings, component=o.component)
            sim = mc_ccf(scenes_on, t, spacings, o.n_realizations, cfg.seed, component=o.component,
                         workers=workers)
            dev[f"{t:g}"] = compare_curves(on, sim).max_complex_deviation
            write_curve(on, out_dir / f"ccf_t{_tag(t)}_analytic_posture.csv")
            write_curve(off, out_dir / f"ccf_t{_tag(t)}_analytic_reference.csv")
            write_curve(sim, out_dir / f"ccf_t{_tag(t)}_simulated_posture.csv")
        summary["max_deviation_ccf"] = dev

    if compare_path is not None:
        ref = ingest_reference_curve(compare_path)
        t = anchors[0]
        _check_window(cfg, scenes_on[0], [t], float(ref.lags[-1]))
        model = analytic_acf(scenes_on, t, ref.lags, component=o.component)
        summary["comparison"] = {"reference": Path(compare_path).name, "anchor_time": t,
                                 **compare_curves(ref, model).as_dict()}

    _dump_json(summary, out_dir / "summary.json")
    return summary


# reproduce --------------------------------------------------------------------------


def reproduce_figure(name: str, cfg: ScenarioConfig, out_dir: Path | None = None, workers: int = 1,
                     n_realizations: int | None = None) -> dict:
    """Posture-on/off curve pairs, coherence times and direction verdicts for one figure."""
    if name not in FIGURES:
        raise KeyError(f"unknown figure {name!r}; choose from {', '.join(FIGURES)}")
    kind, component = FIGURES[name]
    n_real = cfg.output.n_realizations if n_realizations is None else n_realizations
    on_scenes = build_scenes(cfg, posture=True)
    off_scenes = [s.with_posture(False) for s in on_scenes]
    report: dict = {"figure": name, "kind": kind, "component": component, "seed": cfg.seed,
                    "config_hash": config_hash(cfg), "anchors": {}, "verdicts": {}}
    curves: dict[str, CorrelationCurve] = {}
    for t in ANCHORS:
        key = f"{t:g}"
        if kind == "ACF":
            lags = _grid(*FIGURE_LAGS[component])
            on = analytic_acf(on_scenes, t, lags, component=component)
            off = analytic_acf(off_scenes, t, lags, component=component)
            sim = mc_acf(on_scenes, t, lags[::MC_STRIDE], n_real, cfg.seed, component=component,
                         workers=workers)
            part = _coherence_part(component)
            entry = {"coherence_time_posture": coherence_time(on, part=part),
                     "coherence_time_reference": coherence_time(off, part=part)}
        else:
            spacings = _grid(*FIGURE_SPACINGS)
            on = analytic_ccf(on_scenes, t, spacings, component=component)
            off = analytic_ccf(off_scenes, t, spacings, component=component)
            sim = mc_ccf(on_scenes, t, spacings[::MC_STRIDE], n_real, cfg.seed, component=component,
                         workers=workers)
            entry = {}
        entry["max_abs_difference"] = float(np.max(np.abs(np.abs(on.values) - np.abs(off.values))))
        entry["max_complex_difference"] = float(np.max(np.abs(on.values - off.values)))
        entry["max_deviation_simulated"] = compare_curves(on, sim).max_complex_deviation
        report["anchors"][key] = entry
        curves.update({f"{key}_analytic_posture": on, f"{key}_analytic_reference": off,
                       f"{key}_simulated_posture": sim})

    v = report["verdicts"]
    a = report["anchors"]
    v["t0_identical"] = a["0"]["max_complex_difference"] <= T0_TOL
    v["simulation_matches_analytic"] = all(e["max_deviation_simulated"] <= MC_TOL for e in a.values())
    if kind == "ACF":
        for key in ("1", "2"):
            on_t, off_t = a[key]["coherence_time_posture"], a[key]["coherence_time_reference"]
            ok = on_t is not None and off_t is not None
            if component == "los":
                v[f"coherence_decreases_t{key}"] = bool(ok and on_t < off_t)
            else:
                v[f"coherence_increases_t{key}"] = bool(ok and on_t > off_t)
    elif component == "los":
        v["ccf_difference_small"] = all(e["max_abs_difference"] <= CCF_TOL for e in a.values())
    report["passed"] = all(v.values())

    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        prefix = kind.lower()
        for key, curve in curves.items():
            write_curve(curve, out_dir / f"{name}_{prefix}_t{key.replace('.', 'p')}.csv")
        _dump_json(report, out_dir / f"{name}_summary.json")
    return report


# argparse ---------------------------------------------------------------------------


def _parse_times(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated seconds, got {text!r}") from None


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="u2vchan", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--seed", type=int, default=None, help="override the scenario seed")
        p.add_argument("--out-dir", type=Path, default=Path("out"))
        p.add_argument("--workers", type=_positive_int, default=1, help="Monte Carlo worker threads")

    p = sub.add_parser("simulate", help="run a scenario file or preset")
    p.add_argument("config", help="scenario TOML file or preset name")
    common(p)
    p.add_argument("--format", choices=("csv", "bin"), default="csv", help="CIR dump format")
    p.add_argument("--cir", action="store_true", help="dump CIR matrices")
    p.add_argument("--acf", action="store_true", help="write ACF curves")
    p.add_argument("--ccf", action="store_true", help="write CCF curves")
    p.add_argument("--summary", action="store_true", help="write summary.json only")
    p.add_argument("--anchor-times", type=_parse_times, default=None, help="e.g. 0,1,2")
    p.add_argument("--compare", default=None, help="reference ACF curve CSV")

    p = sub.add_parser("reproduce", help="posture-on/off figure reproduction with verdicts")
    p.add_argument("figure", choices=sorted(FIGURES) + ["all"])
    common(p)
    p.add_argument("--config", default="paper-fig3", help="scenario file or preset (default paper-fig3)")
    p.add_argument("--realizations", type=int, default=None)

    p = sub.add_parser("compare", help="compare two curve CSV files")
    p.add_argument("reference")
    p.add_argument("candidate")
    p.add_argument("--kind", choices=("ACF", "CCF"), default="ACF")

    p = sub.add_parser("validate-config", help="parse and validate a scenario file")
    p.add_argument("config")
    return parser


def _with_seed(cfg: ScenarioConfig, seed: int | None) -> ScenarioConfig:
    return cfg if seed is None else validate(replace(cfg, seed=seed))


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "validate-config":
            cfg = load_config(args.config)
            print(f"ok {config_hash(cfg)}")
            return EXIT_OK
        if args.command == "compare":
            ref = ingest_reference_curve(args.reference, kind=args.kind)
            cand = ingest_reference_curve(args.candidate, kind=args.kind)
            print(json.dumps(compare_curves(ref, cand).as_dict(), indent=2, sort_keys=True))
            return EXIT_OK
        if args.command == "simulate":
            cfg = _with_seed(load_config(args.config), args.seed)
            outputs = {name for name in ("cir", "acf", "ccf", "summary") if getattr(args, name)}
            summary = run(cfg, args.out_dir, outputs or {"acf"}, args.workers, args.format,
                          args.anchor_times, args.compare)
            print(json.dumps(summary, indent=2, sort_keys=True))
            return EXIT_OK
        if args.command == "reproduce":
            cfg = _with_seed(load_config(args.config), args.seed)
            names = sorted(FIGURES) if args.figure == "all" else [args.figure]
            ok = True
            for name in names:
                report = reproduce_figure(name, cfg, args.out_dir, args.workers, args.realizations)
                for verdict, passed in report["verdicts"].items():
                    print(f"{name} {verdict}: {'PASS' if passed else 'FAIL'}")
                ok &= report["passed"]
            return EXIT_OK if ok else EXIT_CHECK
    except (ConfigError, CurveParseError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
