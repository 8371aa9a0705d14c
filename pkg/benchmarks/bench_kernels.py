"""Time each hot kernel in its numba and numpy flavours.

    python3 benchmarks/bench_kernels.py [--repeat 5]

Numba timings exclude the first (compiling) call. Both flavours must agree on
every input; the script exits nonzero if they do not.
"""
from __future__ import annotations

import argparse
import sys
import time

import numpy as np

from evacuscope import kernels


def _inputs(rng):
    n = 200_000
    lat = rng.uniform(26, 29, n)
    lon = rng.uniform(-84, -80, n)
    starts = np.flatnonzero(np.r_[True, rng.random(n - 1) < 0.01]).astype(np.int64)
    night_lat = np.concatenate([27.0 + rng.normal(0, 4e-4, 600), rng.uniform(26.9, 27.1, 200)])
    night_lon = np.concatenate([-82.0 + rng.normal(0, 4e-4, 600), rng.uniform(-82.1, -81.9, 200)])
    pts = np.unique(rng.normal(0, 1, (5000, 2)), axis=0)
    ang = np.sort(rng.uniform(0, 2 * np.pi, 60))
    rx = np.r_[np.cos(ang), np.cos(ang[0])]
    ry = np.r_[np.sin(ang), np.sin(ang[0])]
    px, py = rng.uniform(-1.2, 1.2, (2, 20_000))
    ts = np.cumsum(rng.integers(60, 600, 5000)).astype(np.int64)
    walk_lat = 27 + np.cumsum(rng.normal(0, 2e-4, 5000))
    walk_lon = -82 + np.cumsum(rng.normal(0, 2e-4, 5000))
    return {
        "haversine_pairs": (lat, lon, lat[::-1].copy(), lon[::-1].copy()),
        "group_min": (lat, starts),
        "dbscan_labels": (night_lat, night_lon, 150.0, 5),
        "monotone_chain": (pts[:, 0].copy(), pts[:, 1].copy()),
        "points_in_rings": (px, py, rx, ry, np.array([0], dtype=np.int64), 1e-12),
        "staypoints": (ts, walk_lat, walk_lon, 300.0, 300.0),
    }


def _same(a, b) -> bool:
    if isinstance(a, tuple):
        return all(_same(x, y) for x, y in zip(a, b))
    return np.allclose(a, b, rtol=1e-12, atol=1e-9)


def _best(fn, args, repeat):
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn(*args)
        times.append(time.perf_counter() - t)
    return min(times), out


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)
    rng = np.random.default_rng(0)
    ok = True
    print(f"{'kernel':<18}{'numba ms':>12}{'numpy ms':>12}{'speedup':>10}  agree")
    for name, inputs in _inputs(rng).items():
        nb = getattr(kernels, f"{name}_nb")
        np_ = getattr(kernels, f"{name}_np")
        nb(*inputs)  # compile
        t_nb, out_nb = _best(nb, inputs, args.repeat)
        t_np, out_np = _best(np_, inputs, max(1, args.repeat // 2))
        same = _same(out_nb, out_np)
        ok &= same
        print(f"{name:<18}{t_nb * 1e3:>12.2f}{t_np * 1e3:>12.2f}{t_np / t_nb:>9.1f}x  {'yes' if same else 'NO'}")
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
