"""Command line entry point: ``mdlseg {segment,simulate,diff,diagnose}``.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import re
import sys
from pathlib import Path

import numpy as np

from . import diagnostics
from .core import (
    EmptySeries,
    InadmissibleSegmentation,
    MdlsegError,
    NonFinite,
    NotFullCycles,
    PeriodicSeries,
    Segmentation,
)
from .ga import GaConfig, GeneticSearch, default_workers, fast_profile
from .mdl import MdlVariant
from .regression import cochrane_orcutt
from .report import build_report, format_result, format_text, parse_result
from .simulate import parse_spec_text, run_study
from .stations import (
    AlignmentError,
    GapError,
    ParseError,
    StationSeries,
    calendar_index,
    difference_stations,
    format_station_csv,
    read_station_file,
)

log = logging.getLogger("mdlseg")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4
DATA_ERRORS = (ParseError, GapError, NotFullCycles, AlignmentError, NonFinite, EmptySeries,
               FileNotFoundError)


class ConfigError(Exception):
    pass


def _load(path, T: int, refs=(), replacements=()) -> StationSeries:
    st = read_station_file(path, T)
    if refs:
        st = difference_stations(st, [read_station_file(r, T) for r in refs])
    if replacements:
        st = StationSeries(_apply_replacements(st, replacements), st.start_year)
    return st


def _apply_replacements(st: StationSeries, items) -> PeriodicSeries:
    """Apply ``t=VALUE`` or ``YEAR-SEASON=VALUE`` manual corrections."""
    x = np.array(st.series.values)
    T = st.period
    for item in items:
        m = re.fullmatch(r"\s*(\d+)(?:-(\d+))?\s*=\s*(\S+)\s*", item)
        if not m:
            raise ConfigError(f"bad --replace {item!r}; use t=VALUE or YEAR-SEASON=VALUE")
        if m.group(2) is None:
            t = int(m.group(1))
        else:
            t = calendar_index(int(m.group(1)), int(m.group(2)), T, st.start_year)
        if not 1 <= t <= x.size:
            raise ConfigError(f"--replace index {t} outside 1..{x.size}")
        x[t - 1] = float(m.group(3))
    return PeriodicSeries(x, T)


def _write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def _emit_diagnostics(fit, out: Path | None, lags: int) -> str:
    innov = (fit.mean.mean_path(fit.residuals.size, fit.segmentation) + fit.residuals
             - fit.xhat) / np.sqrt(fit.v)
    lags = min(lags, innov.size - 1)
    acf = diagnostics.sample_acf(innov, lags)
    pgram = diagnostics.periodogram(innov)
    if out is not None:
        _write(out / "acf.csv", acf.to_csv())
        _write(out / "periodogram.csv", pgram.to_csv())
    return (f"standardized innovations: {acf.exceedances} of {lags} sample autocorrelations "
            f"outside +/-{acf.bound:.4f}\n")


def cmd_segment(args) -> int:
    st = _load(args.input, args.period, args.ref, args.replace)
    cfg = GaConfig(
        seed=args.seed, min_cycles=args.mlmin, p_max=args.pmax, n_islands=args.islands,
        n_p=args.pop, variant=MdlVariant.parse(args.variant).value,
        workers=args.workers or default_workers(),
    )
    if args.fast:
        cfg = fast_profile(cfg).with_(n_islands=args.islands if args.islands != 40 else 8)
    if args.mstar:
        cfg = cfg.with_(max_migrations=args.mstar)
    progress = (lambda line: print(line, file=sys.stderr, flush=True)) if args.trace else None
    search = GeneticSearch(st.series, cfg, progress=progress)
    fit = search.run()
    if fit.degenerate or not np.isfinite(fit.mdl):
        print("no segmentation with a finite MDL score was found", file=sys.stderr)
        return EXIT_NUMERIC
    rep = build_report(st.series, fit, st.start_year, cfg.variant)
    text = format_text(rep)
    out = Path(args.out) if args.out else None
    if args.diagnostics:
        text += _emit_diagnostics(fit, out, args.lags)
    sys.stdout.write(text)
    if out is not None:
        _write(out / "report.txt", text)
        _write(out / "result.txt", format_result(rep))
        if args.trace:
            _write(out / "trace.txt", "\n".join(search.trace) + "\n")
    return EXIT_OK


def cmd_simulate(args) -> int:
    try:
        spec = parse_spec_text(Path(args.spec).read_text())
    except (ValueError, KeyError) as exc:
        raise ConfigError(f"{args.spec}: {exc}") from exc
    if args.replicates:
        spec = spec.with_(replicates=args.replicates)
    if args.seed is not None:
        spec = spec.with_(seed=args.seed)
    if args.fast:
        spec = spec.with_(ga_cfg=fast_profile(spec.ga_cfg))

    def progress(r):
        if args.verbose:
            print(f"replicate={r.index} m={r.m} p={r.p} taus={','.join(map(str, r.taus))}",
                  file=sys.stderr, flush=True)

    result = run_study(spec, workers=args.workers or default_workers(), progress=progress)
    text = result.to_text()
    sys.stdout.write(text)
    if args.out:
        out = Path(args.out)
        _write(out / "study.txt", text)
        _write(out / "replicates.csv", result.replicates_csv())
    return EXIT_OK


def cmd_diff(args) -> int:
    st = _load(args.target, args.period, args.ref)
    text = format_station_csv(st.series, st.start_year)
    if args.out:
        _write(Path(args.out), text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_diagnose(args) -> int:
    st = _load(args.input, args.period, args.ref, args.replace)
    if args.result:
        res = parse_result(Path(args.result).read_text())
        taus = [int(t) for t in res["taus"].split(",") if t]
        p = int(res["p"])
        variant = res.get("variant", "standard")
    else:
        if args.p is None:
            raise ConfigError("diagnose needs --result or --p (with optional --taus)")
        taus = [int(t) for t in (args.taus or "").split(",") if t.strip()]
        p = args.p
        variant = args.variant
    seg = Segmentation.of(p, taus)
    seg.check(st.series.N, st.period, min_cycles=0)
    fit = cochrane_orcutt(st.series, seg, variant=variant)
    if fit.degenerate:
        return EXIT_NUMERIC
    out = Path(args.out) if args.out else None
    sys.stdout.write(_emit_diagnostics(fit, out, args.lags))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mdlseg", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    seg = sub.add_parser("segment", help="estimate changepoints in a station series")
    seg.add_argument("--input", required=True)
    seg.add_argument("--period", type=int, required=True)
    seg.add_argument("--ref", action="append", default=[], help="reference series (repeatable)")
    seg.add_argument("--mlmin", type=int, default=1, help="minimum cycles per regime")
    seg.add_argument("--pmax", type=int, default=3)
    seg.add_argument("--seed", type=int, default=0)
    seg.add_argument("--variant", choices=[v.value for v in MdlVariant], default="standard")
    seg.add_argument("--islands", type=int, default=40)
    seg.add_argument("--pop", type=int, default=30)
    seg.add_argument("--mstar", type=int, default=None, help="maximum number of migrations")
    seg.add_argument("--fast", action="store_true", help="8 islands, 15 migrations")
    seg.add_argument("--workers", type=int, default=None)
    seg.add_argument("--replace", action="append", default=[], metavar="t=VALUE")
    seg.add_argument("--diagnostics", action="store_true", help="also write acf/periodogram CSVs")
    seg.add_argument("--lags", type=int, default=60)
    seg.add_argument("--out", default=None)
    seg.add_argument("--trace", action="store_true")
    seg.set_defaults(func=cmd_segment)

    sim = sub.add_parser("simulate", help="run a replicated simulation study")
    sim.add_argument("--spec", required=True)
    sim.add_argument("--replicates", type=int, default=None)
    sim.add_argument("--seed", type=int, default=None)
    sim.add_argument("--fast", action="store_true")
    sim.add_argument("--workers", type=int, default=None)
    sim.add_argument("--out", default=None)
    sim.set_defaults(func=cmd_simulate)

    diff = sub.add_parser("diff", help="target minus mean of reference series")
    diff.add_argument("--target", required=True)
    diff.add_argument("--ref", action="append", required=True)
    diff.add_argument("--period", type=int, required=True)
    diff.add_argument("--out", default=None)
    diff.set_defaults(func=cmd_diff)

    dg = sub.add_parser("diagnose", help="residual ACF and periodogram for a segmentation")
    dg.add_argument("--input", required=True)
    dg.add_argument("--period", type=int, required=True)
    dg.add_argument("--ref", action="append", default=[])
    dg.add_argument("--result", default=None, help="result.txt written by segment")
    dg.add_argument("--taus", default=None)
    dg.add_argument("--p", type=int, default=None)
    dg.add_argument("--variant", choices=[v.value for v in MdlVariant], default="standard")
    dg.add_argument("--replace", action="append", default=[], metavar="t=VALUE")
    dg.add_argument("--lags", type=int, default=60)
    dg.add_argument("--out", default=None)
    dg.set_defaults(func=cmd_diagnose)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ConfigError, InadmissibleSegmentation) as exc:
        print(f"mdlseg: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DATA_ERRORS as exc:
        print(f"mdlseg: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except MdlsegError as exc:
        print(f"mdlseg: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"mdlseg: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
