"""Write a synthetic monthly station and three reference stations as CSV.

The target has a seasonal cycle, a small warming trend, PAR(1) noise and two
downward mean shifts (at 1920-01 and 1935-01 for the default start year). The
references share the climate signal but not the shifts, so ``mdlseg diff``
isolates them.

    python3 scripts/make_lookalike.py --out demo
"""

from __future__ import annotations

import argparse
from pathlib import Path

import numpy as np

from mdlseg.core import validate_series
from mdlseg.stations import write_station_file


def climate(rng, N, T):
    t = np.arange(1, N + 1)
    e = np.zeros(N)
    z = rng.standard_normal(N) * 0.8
    for i in range(N):
        e[i] = 0.3 * (e[i - 1] if i else 0.0) + z[i]
    return 10 * np.sin(2 * np.pi * t / T) + 0.004 * t + e


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", type=Path, default=Path("demo"))
    ap.add_argument("--years", type=int, default=50)
    ap.add_argument("--start", type=int, default=1900)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    T, N = 12, 12 * args.years
    rng = np.random.default_rng(args.seed)
    regional = climate(rng, N, T)
    t = np.arange(1, N + 1)
    shifts = np.where(t >= 241, -1.5, 0.0) + np.where(t >= 421, -2.5, 0.0)
    args.out.mkdir(parents=True, exist_ok=True)
    target = regional + shifts + rng.standard_normal(N) * 0.5
    write_station_file(args.out / "target.csv", validate_series(target, T), args.start)
    for k in range(3):
        ref = regional + rng.standard_normal(N) * 0.5
        write_station_file(args.out / f"ref{k + 1}.csv", validate_series(ref, T), args.start)
    print(f"wrote {args.out}/target.csv and ref1..ref3.csv ({args.years} years, T={T})")


if __name__ == "__main__":
    main()
