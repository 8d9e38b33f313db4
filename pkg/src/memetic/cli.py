"""
``memetic`` command line: simulate, pde, gillespie, score, fit, rtrack.

Each subcommand reads a JSON scenario (``--config``), writes its artifacts
into ``--out`` and adds ``run_meta.json`` holding the package version, the
SHA-256 of the canonical scenario, the seed and the output file names.
Outputs contain no timestamps, so the same scenario and seed reproduce
them byte for byte.

Exit status: 0 success, 1 domain error, 2 I/O error, 64 usage error.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
from pathlib import Path
from typing import Optional

from . import __version__
from .calibrate import ObservedSeries, fit, metric_panel, panel_csv, r_derivatives, render_panel
from .errors import DomainError
from .memes import ingest, score_report
from .models import ModelKind, ModelParams
from .ode import IntegratorConfig, integrate
from .pde import (PdeConfig, front_speed, reference_speeds, run_pde, snapshots_to_csv)
from .stochastic import EnsembleConfig, RNG_ALGORITHM, ensemble_report, run_ensemble

log = logging.getLogger("memetic")

DEFAULT_SEED = 20140808
EXIT_OK, EXIT_DOMAIN, EXIT_IO, EXIT_USAGE = 0, 1, 2, 64
SUBCOMMANDS = ("simulate", "pde", "gillespie", "score", "fit", "rtrack")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _params(spec: dict) -> ModelParams:
    return ModelParams(**spec)


def _write(out: Path, name: str, text: str, written: list) -> None:
    out.mkdir(parents=True, exist_ok=True)
    with open(out / name, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    written.append(name)


def _resolve(base: Optional[Path], path: str) -> Path:
    p = Path(path)
    if not p.is_absolute() and base is not None:
        p = base / p
    return p


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_simulate(sc: dict, args, out: Path, written: list, base: Optional[Path]):
    kind = ModelKind.parse(sc["model"])
    params = _params(sc["params"])
    icfg = dict(sc.get("integrator", {}))
    icfg["t_span"] = tuple(icfg["t_span"])
    traj = integrate(kind, params, sc["initial"], IntegratorConfig(**icfg))
    if args.format == "json":
        _write(out, "trajectory.json", traj.to_json() + "\n", written)
    else:
        _write(out, "trajectory.csv", traj.to_csv(), written)
    return {}


def cmd_pde(sc: dict, args, out: Path, written: list, base: Optional[Path]):
    spec = dict(sc["pde"])
    spec["t_span"] = tuple(spec.get("t_span", (0.0, 1.0)))
    cfg = PdeConfig(**spec)
    snaps = run_pde(cfg, sc["initial_profile"], n_snapshots=int(sc.get("n_snapshots", 11)))
    if args.format == "json":
        _write(out, "snapshots.json", _dump({
            "x": cfg.x.tolist(),
            "snapshots": [{"t": s.time, "values": s.values.tolist()} for s in snaps]}), written)
    else:
        _write(out, "snapshots.csv", snapshots_to_csv(snaps, cfg), written)
    if sc.get("front_speed", True):
        level = float(sc.get("front_level", 0.5))
        speed = front_speed(snaps, cfg, level)
        report = {"level": level, "speed": speed,
                  "reference": reference_speeds(cfg.d_diff, cfg.beta, cfg.n_total)}
        _write(out, "front_speed.json", _dump(report), written)
    return {}


def cmd_gillespie(sc: dict, args, out: Path, written: list, base: Optional[Path]):
    kind = ModelKind.parse(sc["model"])
    params = _params(sc["params"])
    ens = dict(sc["ensemble"])
    n_list = [int(n) for n in ens.pop("N_list")]
    labels = kind.compartments
    initial = sc["initial"]
    fractions = [float(initial.get(k, 0.0)) for k in labels] if isinstance(initial, dict) else initial
    cfg = EnsembleConfig(n_total=n_list[0], n_replicas=int(ens["n_replicas"]), seed=args.seed,
                         t_span=tuple(ens["t_span"]), sample_times=ens.get("sample_times"),
                         n_samples=int(ens.get("n_samples", 51)))
    results = [run_ensemble(kind, params, fractions, cfg.with_n(n)) for n in n_list]
    _write(out, "ensemble.json", _dump(ensemble_report(results, args.seed)), written)
    return {"rng_algorithm": RNG_ALGORITHM}


def cmd_score(sc: dict, args, out: Path, written: list, base: Optional[Path]):
    corpus_path = args.corpus or sc.get("corpus")
    root = args.root or sc.get("root")
    n = args.n if args.n is not None else sc.get("n")
    if not corpus_path or not root or n is None:
        raise UsageError("score needs a corpus, a root term and n (config or --corpus/--root/--n)")
    base_dir = base if not args.corpus else None
    corpus = ingest(_resolve(base_dir, corpus_path), sc.get("format"))
    country = sc.get("country")
    if country:
        corpus = corpus.filter_country(country)
    baseline = args.baseline or sc.get("baseline", "meme")
    report = score_report(corpus, root, int(n), baseline, sc.get("top"))
    report["corpus_size"] = len(corpus)
    report["dangling_retweets"] = corpus.dangling_count
    report["malformed_rows"] = [{"line": e.line, "message": e.message} for e in corpus.row_errors]
    _write(out, "memes.json", _dump(report), written)
    return {}


def cmd_fit(sc: dict, args, out: Path, written: list, base: Optional[Path]):
    kind = ModelKind.parse(sc["model"])
    observed_spec = sc["observed"]
    if isinstance(observed_spec, str):
        observed = ObservedSeries.from_csv(_resolve(base, observed_spec))
    else:
        observed = ObservedSeries(observed_spec["t"],
                                  {k: v for k, v in observed_spec.items() if k != "t"})
    window = sc.get("window")
    if window:
        observed = observed.window(float(window["start"]), float(window["length"]))
    bounds = {k: tuple(v) for k, v in sc.get("bounds", {}).items()}
    result = fit(kind, observed, sc["free_params"], base_params=_params(sc["params"]),
                 initial=sc["initial"], init_guess=sc.get("init_guess"), bounds=bounds or None,
                 budget=int(sc.get("budget", 4000)), loss=sc.get("loss", "absolute"))
    _write(out, "fit.json", result.to_json() + "\n", written)
    label = sc.get("label", "fit")
    panel = {label: metric_panel(kind, result, require_converged=False)}
    _write(out, "panel.csv", panel_csv(panel), written)
    _write(out, "panel.txt", render_panel(panel, "SEIZ" if kind is ModelKind.SEIZ else kind.value),
           written)
    return {}


def _parse_series(text: str) -> list[tuple[float, float]]:
    pairs = []
    for item in text.split(","):
        t, r = item.split(":")
        pairs.append((float(t), float(r)))
    return pairs


def cmd_rtrack(sc: dict, args, out: Path, written: list, base: Optional[Path]):
    if args.series:
        try:
            series = _parse_series(args.series)
        except ValueError as exc:
            raise UsageError(f"--series must look like 0:1.0,30:1.036 ({exc})")
    elif "series" in sc:
        series = [tuple(p) for p in sc["series"]]
    else:
        raise UsageError("rtrack needs a series (config 'series' or --series)")
    res = r_derivatives(series, spacing=sc.get("spacing"), nonuniform=bool(sc.get("nonuniform", False)))
    report = {"series": [list(p) for p in series], "dR_dt": res.first, "d2R_dt2": res.second,
              "units": {"dR_dt": "1/day", "d2R_dt2": "1/day^2"}}
    if args.format == "csv":
        text = "quantity,value\n" + f"dR_dt,{res.first!r}\n" + \
               f"d2R_dt2,{'' if res.second is None else repr(res.second)}\n"
        _write(out, "rtrack.csv", text, written)
    else:
        _write(out, "rtrack.json", _dump(report), written)
    return {}


COMMANDS = {
    "simulate": cmd_simulate,
    "pde": cmd_pde,
    "gillespie": cmd_gillespie,
    "score": cmd_score,
    "fit": cmd_fit,
    "rtrack": cmd_rtrack,
}


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="memetic", description="Information-diffusion models of tweet memes.")
    parser.add_argument("--version", action="version", version=f"memetic {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="{" + ",".join(SUBCOMMANDS) + "}")
    helps = {
        "simulate": "integrate a compartmental model to CSV",
        "pde": "run the reaction-diffusion model and measure front speed",
        "gillespie": "stochastic ensembles vs the fluid-limit ODE",
        "score": "meme scores for root-anchored n-grams",
        "fit": "fit model parameters to an observed series",
        "rtrack": "rates of change of the reproduction number",
    }
    for name in SUBCOMMANDS:
        p = sub.add_parser(name, help=helps[name])
        p.add_argument("--config", help="scenario JSON")
        p.add_argument("--out", default=".", help="output directory (default: .)")
        p.add_argument("--seed", type=int, default=None,
                       help=f"unsigned 64-bit seed (default: scenario seed or {DEFAULT_SEED})")
        p.add_argument("--format", choices=("csv", "json"), default=None,
                       help="output format (default: csv for simulate/pde, json otherwise)")
        if name == "score":
            p.add_argument("--corpus")
            p.add_argument("--root")
            p.add_argument("--n", type=int)
            p.add_argument("--baseline", choices=("meme", "global"))
        if name == "rtrack":
            p.add_argument("--series", help="comma-separated time:R pairs")
    return parser


def _configure_logging():
    level = os.environ.get("MEMETIC_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


def main(argv=None) -> int:
    _configure_logging()
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("missing subcommand")
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"memetic: {exc}", file=sys.stderr)
        return EXIT_USAGE

    out = Path(args.out)
    written: list[str] = []
    try:
        if args.config:
            raw = Path(args.config).read_text(encoding="utf-8")
            scenario = json.loads(raw)
            base = Path(args.config).resolve().parent
        else:
            if args.command not in ("score", "rtrack"):
                raise UsageError(f"{args.command} needs --config")
            scenario, base = {}, None
        if args.format is None:
            args.format = "csv" if args.command in ("simulate", "pde") else "json"
        if args.seed is None:
            args.seed = int(scenario.get("seed", DEFAULT_SEED))
        if not 0 <= args.seed < 2 ** 64:
            raise UsageError("--seed must be an unsigned 64-bit integer")
        extra = COMMANDS[args.command](scenario, args, out, written, base)
        canonical = json.dumps(scenario, sort_keys=True, separators=(",", ":"))
        meta = {
            "version": __version__,
            "subcommand": args.command,
            "config_sha256": hashlib.sha256(canonical.encode("utf-8")).hexdigest(),
            "seed": args.seed,
            "format": args.format,
            "outputs": list(written),
        }
        meta.update(extra)
        _write(out, "run_meta.json", _dump(meta), [])
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"memetic: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DomainError as exc:
        log.error("%s", exc)
        print(f"memetic: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except (KeyError, TypeError) as exc:
        print(f"memetic: invalid scenario: {exc!r}", file=sys.stderr)
        return EXIT_DOMAIN
    except (OSError, json.JSONDecodeError) as exc:
        print(f"memetic: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
