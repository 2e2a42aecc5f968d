"""Run one replicated simulation study and store its tables under results/.

Examples::

    python3 scripts/run_study.py table2 --kappa 2.0 --replicates 200 --profile fast
    python3 scripts/run_study.py table3 --kappa 3.0 --replicates 200

Completed replicates are appended to ``<name>.replicates.csv`` as they finish,
so an interrupted run resumes where it stopped.
"""

from __future__ import annotations

import argparse
import fcntl
import sys
import time
from pathlib import Path

from mdlseg.ga import GaConfig, fast_profile
from mdlseg.simulate import (ReplicateResult, StudyResult, run_replicate, table2_spec,
                             table3_spec)

RESULTS = Path(__file__).resolve().parents[1] / "results"


def study_name(design: str, kappa: float, replicates: int, profile: str, seed: int,
               p_b: float | None = None, spg: int = 1) -> str:
    tag = "" if p_b is None else f"_pb{p_b:g}"
    tag += "" if spg == 1 else f"_spg{spg}"
    return f"{design}_k{kappa:g}_r{replicates}_{profile}_s{seed}{tag}"


def build_spec(design: str, kappa: float, replicates: int, profile: str, seed: int,
               p_b: float | None = None, spg: int = 1):
    cfg = GaConfig(p_b=p_b, steps_per_generation=spg)
    if profile == "fast":
        cfg = fast_profile(cfg)
    make = table2_spec if design == "table2" else table3_spec
    return make(kappa, replicates=replicates, seed=seed, ga_cfg=cfg)


def _read_done(path: Path) -> dict[int, ReplicateResult]:
    done = {}
    if not path.exists():
        return done
    for line in path.read_text().splitlines()[1:]:
        idx, m, p, taus, mdl, failed = line.split(",")
        done[int(idx)] = ReplicateResult(int(idx), int(m), int(p),
                                         tuple(int(t) for t in taus.split()),
                                         float(mdl), bool(int(failed)))
    return done


def run(design: str, kappa: float, replicates: int, profile: str = "fast", seed: int = 0,
        out: Path = RESULTS, verbose: bool = True, p_b: float | None = None, spg: int = 1,
        limit: int | None = None) -> StudyResult:
    """Run (or resume) a study; ``limit`` stops after that many replicates."""
    spec = build_spec(design, kappa, replicates, profile, seed, p_b, spg)
    name = study_name(design, kappa, replicates, profile, seed, p_b, spg)
    out.mkdir(parents=True, exist_ok=True)
    # one writer per study; a second caller waits, then finds the work done
    with (out / f"{name}.lock").open("w") as lock:
        fcntl.flock(lock, fcntl.LOCK_EX)
        return _run_locked(spec, name, out, replicates, verbose, limit)


def _run_locked(spec, name: str, out: Path, replicates: int, verbose: bool,
                limit: int | None) -> StudyResult:
    rep_path = out / f"{name}.replicates.csv"
    done = _read_done(rep_path)
    if not rep_path.exists():
        rep_path.write_text("replicate,m,p,taus,mdl,failed\n")
    start = time.time()
    todo = range(replicates if limit is None else min(limit, replicates))
    for i in todo:
        if i in done:
            continue
        r = run_replicate(spec, i)
        done[i] = r
        with rep_path.open("a") as fh:
            fh.write(f"{r.index},{r.m},{r.p},{' '.join(map(str, r.taus))},{r.mdl!r},"
                     f"{int(r.failed)}\n")
        if verbose:
            print(f"[{name}] replicate {i} m={r.m} p={r.p} taus={r.taus} "
                  f"({time.time() - start:.0f}s)", file=sys.stderr, flush=True)
    result = StudyResult(spec.N, [done[i] for i in sorted(done)])
    if len(done) >= replicates:
        (out / f"{name}.study.txt").write_text(result.to_text())
    return result


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("design", choices=["table2", "table3"])
    ap.add_argument("--kappa", type=float, required=True, help="kappa (table2) or a (table3)")
    ap.add_argument("--replicates", type=int, default=200)
    ap.add_argument("--profile", choices=["fast", "paper"], default="fast")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", type=Path, default=RESULTS)
    ap.add_argument("--pb", type=float, default=None,
                    help="per-slot birth probability (default: calibrated)")
    ap.add_argument("--spg", type=int, default=1,
                    help="steady-state steps per generation (sensitivity runs)")
    ap.add_argument("--limit", type=int, default=None,
                    help="stop after the first LIMIT replicates (partial study)")
    args = ap.parse_args(argv)
    res = run(args.design, args.kappa, args.replicates, args.profile, args.seed, args.out,
              p_b=args.pb, spg=args.spg, limit=args.limit)
    sys.stdout.write(res.to_text())


if __name__ == "__main__":
    main()
