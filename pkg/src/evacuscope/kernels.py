"""Hot numeric kernels, each in a numba flavour and a pure-numpy flavour.

Public names (``haversine_to_point``, ``dbscan_labels`` ...) dispatch to one
flavour, picked once at import time by :mod:`evacuscope._accel`. Both flavours
stay importable under ``*_nb`` / ``*_np`` so tests and the benchmark can run
them side by side.

Loop-shaped kernels with no useful vectorised form (monotone chain, staypoint
scan) use the same source for both flavours: compiled for numba, plain Python
for the fallback.
"""
from __future__ import annotations

import math

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from ._accel import USE_NUMBA, njit

EARTH_RADIUS_M = 6_371_000.0
_DEG = math.pi / 180.0


# --------------------------------------------------------------------------
# great-circle distance


@njit
def _hav(lat1, lon1, lat2, lon2):
    p1 = lat1 * _DEG
    p2 = lat2 * _DEG
    s_lat = math.sin((p2 - p1) * 0.5)
    s_lon = math.sin((lon2 - lon1) * _DEG * 0.5)
    a = s_lat * s_lat + math.cos(p1) * math.cos(p2) * s_lon * s_lon
    if a > 1.0:
        a = 1.0
    return 2.0 * EARTH_RADIUS_M * math.asin(math.sqrt(a))


@njit
def haversine_to_point_nb(lat, lon, lat0, lon0):
    out = np.empty(lat.shape[0])
    for i in range(lat.shape[0]):
        out[i] = _hav(lat[i], lon[i], lat0, lon0)
    return out


def haversine_to_point_np(lat, lon, lat0, lon0):
    p1 = np.radians(lat)
    p0 = math.radians(lat0)
    s_lat = np.sin((p1 - p0) * 0.5)
    s_lon = np.sin(np.radians(lon - lon0) * 0.5)
    a = s_lat * s_lat + np.cos(p1) * math.cos(p0) * s_lon * s_lon
    return 2.0 * EARTH_RADIUS_M * np.arcsin(np.sqrt(np.minimum(a, 1.0)))


@njit
def haversine_pairs_nb(lat1, lon1, lat2, lon2):
    out = np.empty(lat1.shape[0])
    for i in range(lat1.shape[0]):
        out[i] = _hav(lat1[i], lon1[i], lat2[i], lon2[i])
    return out


def haversine_pairs_np(lat1, lon1, lat2, lon2):
    p1 = np.radians(lat1)
    p2 = np.radians(lat2)
    s_lat = np.sin((p2 - p1) * 0.5)
    s_lon = np.sin(np.radians(np.asarray(lon2) - np.asarray(lon1)) * 0.5)
    a = s_lat * s_lat + np.cos(p1) * np.cos(p2) * s_lon * s_lon
    return 2.0 * EARTH_RADIUS_M * np.arcsin(np.sqrt(np.minimum(a, 1.0)))


# --------------------------------------------------------------------------
# per-group minimum over contiguous runs


@njit
def group_min_nb(values, starts):
    n_groups = starts.shape[0]
    out = np.empty(n_groups)
    for g in range(n_groups):
        stop = starts[g + 1] if g + 1 < n_groups else values.shape[0]
        best = np.inf
        for i in range(starts[g], stop):
            if values[i] < best:
                best = values[i]
        out[g] = best
    return out


def group_min_np(values, starts):
    if starts.shape[0] == 0:
        return np.empty(0)
    return np.minimum.reduceat(values, starts).astype(np.float64)


# --------------------------------------------------------------------------
# DBSCAN (haversine metric, self counted as a neighbour)


def _lat_windows(lat, eps_m):
    order = np.argsort(lat, kind="stable")
    slat = lat[order]
    # meridian arc is a lower bound on great-circle distance
    dlat = eps_m / EARTH_RADIUS_M / _DEG * (1.0 + 1e-9) + 1e-12
    lo = np.searchsorted(slat, lat - dlat, side="left")
    hi = np.searchsorted(slat, lat + dlat, side="right")
    return order, lo, hi


@njit
def _dbscan_nb(lat, lon, order, lo, hi, eps_m, min_pts):
    n = lat.shape[0]
    counts = np.zeros(n, dtype=np.int64)
    for i in range(n):
        c = 0
        for s in range(lo[i], hi[i]):
            j = order[s]
            if _hav(lat[i], lon[i], lat[j], lon[j]) <= eps_m:
                c += 1
        counts[i] = c
    labels = np.full(n, -1, dtype=np.int64)
    stack = np.empty(n, dtype=np.int64)
    cluster = 0
    for i in range(n):
        if labels[i] != -1 or counts[i] < min_pts:
            continue
        labels[i] = cluster
        top = 0
        stack[top] = i
        top += 1
        while top > 0:
            top -= 1
            p = stack[top]
            for s in range(lo[p], hi[p]):
                q = order[s]
                if labels[q] != -1:
                    continue
                if _hav(lat[p], lon[p], lat[q], lon[q]) <= eps_m:
                    labels[q] = cluster
                    if counts[q] >= min_pts:
                        stack[top] = q
                        top += 1
        cluster += 1
    return labels


def dbscan_labels_nb(lat, lon, eps_m, min_pts):
    lat = np.ascontiguousarray(lat, dtype=np.float64)
    lon = np.ascontiguousarray(lon, dtype=np.float64)
    if lat.shape[0] == 0:
        return np.empty(0, dtype=np.int64)
    order, lo, hi = _lat_windows(lat, eps_m)
    return _dbscan_nb(lat, lon, order, lo, hi, float(eps_m), int(min_pts))


def _row_chunks(n, budget=2_000_000):
    step = max(1, budget // max(n, 1))
    for start in range(0, n, step):
        yield start, min(n, start + step)


def dbscan_labels_np(lat, lon, eps_m, min_pts):
    lat = np.asarray(lat, dtype=np.float64)
    lon = np.asarray(lon, dtype=np.float64)
    n = lat.shape[0]
    if n == 0:
        return np.empty(0, dtype=np.int64)
    counts = np.zeros(n, dtype=np.int64)
    for a, b in _row_chunks(n):
        d = haversine_pairs_np(lat[a:b, None], lon[a:b, None], lat[None, :], lon[None, :])
        counts[a:b] = (d <= eps_m).sum(axis=1)
    core = counts >= min_pts
    labels = np.full(n, -1, dtype=np.int64)
    core_idx = np.flatnonzero(core)
    if core_idx.size == 0:
        return labels

    rows, cols = [], []
    border_hits = []  # (border point, core point) pairs
    for a, b in _row_chunks(n):
        d = haversine_pairs_np(lat[a:b, None], lon[a:b, None], lat[None, core_idx], lon[None, core_idx])
        r, c = np.nonzero(d <= eps_m)
        r = r + a
        c = core_idx[c]
        is_core_row = core[r]
        rows.append(r[is_core_row])
        cols.append(c[is_core_row])
        border_hits.append(np.stack([r[~is_core_row], c[~is_core_row]]))
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    graph = coo_matrix((np.ones(rows.size, dtype=np.int8), (rows, cols)), shape=(n, n)).tocsr()
    _, comp = connected_components(graph, directed=False)

    # clusters are numbered by their lowest core index, as in the sequential scan
    core_comp = comp[core_idx]
    _, first = np.unique(core_comp, return_index=True)
    rank = np.empty(comp.max() + 1, dtype=np.int64)
    rank[core_comp[np.sort(first)]] = np.arange(first.size)
    labels[core_idx] = rank[core_comp]

    hits = np.concatenate(border_hits, axis=1)
    if hits.shape[1]:
        cand = labels[hits[1]]
        best = np.full(n, np.iinfo(np.int64).max, dtype=np.int64)
        np.minimum.at(best, hits[0], cand)
        touched = best != np.iinfo(np.int64).max
        labels[touched] = best[touched]
    return labels


# --------------------------------------------------------------------------
# monotone-chain convex hull over lexicographically sorted unique points


def _monotone_chain_impl(x, y):
    n = x.shape[0]
    if n < 3:
        return np.arange(n)
    hull = np.empty(2 * n, dtype=np.int64)
    k = 0
    for i in range(n):
        while k >= 2:
            o = hull[k - 2]
            a = hull[k - 1]
            cross = (x[a] - x[o]) * (y[i] - y[o]) - (y[a] - y[o]) * (x[i] - x[o])
            if cross <= 0.0:
                k -= 1
            else:
                break
        hull[k] = i
        k += 1
    lower = k + 1
    for i in range(n - 2, -1, -1):
        while k >= lower:
            o = hull[k - 2]
            a = hull[k - 1]
            cross = (x[a] - x[o]) * (y[i] - y[o]) - (y[a] - y[o]) * (x[i] - x[o])
            if cross <= 0.0:
                k -= 1
            else:
                break
        hull[k] = i
        k += 1
    return hull[: k - 1].copy()


monotone_chain_nb = njit(_monotone_chain_impl)
monotone_chain_np = _monotone_chain_impl


# --------------------------------------------------------------------------
# even-odd point-in-polygon, boundary inclusive; rings are packed end to end


@njit
def points_in_rings_nb(px, py, rx, ry, ring_starts, tol):
    n = px.shape[0]
    out = np.zeros(n, dtype=np.bool_)
    n_rings = ring_starts.shape[0]
    for p in range(n):
        x = px[p]
        y = py[p]
        inside = False
        on_edge = False
        for r in range(n_rings):
            s = ring_starts[r]
            e = ring_starts[r + 1] if r + 1 < n_rings else rx.shape[0]
            for i in range(s, e - 1):
                x1 = rx[i]
                y1 = ry[i]
                x2 = rx[i + 1]
                y2 = ry[i + 1]
                cross = (x2 - x1) * (y - y1) - (y2 - y1) * (x - x1)
                if (abs(cross) <= tol and min(x1, x2) - tol <= x <= max(x1, x2) + tol
                        and min(y1, y2) - tol <= y <= max(y1, y2) + tol):
                    on_edge = True
                    break
                if (y1 > y) != (y2 > y):
                    xint = x1 + (y - y1) * (x2 - x1) / (y2 - y1)
                    if x < xint:
                        inside = not inside
            if on_edge:
                break
        out[p] = inside or on_edge
    return out


def points_in_rings_np(px, py, rx, ry, ring_starts, tol):
    px = np.asarray(px, dtype=np.float64)
    py = np.asarray(py, dtype=np.float64)
    ends = np.append(ring_starts[1:], rx.shape[0])
    # edge i joins vertex i to i+1 unless i is the last vertex of its ring
    last = np.zeros(rx.shape[0], dtype=bool)
    last[ends - 1] = True
    e = np.flatnonzero(~last)
    x1, y1, x2, y2 = rx[e], ry[e], rx[e + 1], ry[e + 1]
    out = np.zeros(px.shape[0], dtype=bool)
    for a, b in _row_chunks(px.shape[0], budget=4_000_000 // 8):
        x = px[a:b, None]
        y = py[a:b, None]
        cross = (x2 - x1) * (y - y1) - (y2 - y1) * (x - x1)
        on_edge = ((np.abs(cross) <= tol)
                   & (np.minimum(x1, x2) - tol <= x) & (x <= np.maximum(x1, x2) + tol)
                   & (np.minimum(y1, y2) - tol <= y) & (y <= np.maximum(y1, y2) + tol))
        straddle = (y1 > y) != (y2 > y)
        with np.errstate(divide="ignore", invalid="ignore"):
            xint = x1 + (y - y1) * (x2 - x1) / (y2 - y1)
        crossings = (straddle & (x < xint)).sum(axis=1)
        out[a:b] = (crossings % 2 == 1) | on_edge.any(axis=1)
    return out


# --------------------------------------------------------------------------
# staypoint scan: maximal runs within roam_m of the run's first sighting


def _staypoints_impl(ts, lat, lon, roam_m, dwell_s):
    n = ts.shape[0]
    starts = np.empty(n, dtype=np.int64)
    stops = np.empty(n, dtype=np.int64)
    m = 0
    i = 0
    while i < n:
        j = i + 1
        while j < n and _hav(lat[i], lon[i], lat[j], lon[j]) <= roam_m:
            j += 1
        if ts[j - 1] - ts[i] >= dwell_s:
            starts[m] = i
            stops[m] = j
            m += 1
            i = j
        else:
            i += 1
    return starts[:m].copy(), stops[:m].copy()


staypoints_nb = njit(_staypoints_impl)
# the uncompiled flavour must call the uncompiled distance helper
_hav_py = getattr(_hav, "py_func", _hav)


def _staypoints_py(ts, lat, lon, roam_m, dwell_s):
    n = ts.shape[0]
    starts, stops = [], []
    i = 0
    while i < n:
        j = i + 1
        while j < n and _hav_py(lat[i], lon[i], lat[j], lon[j]) <= roam_m:
            j += 1
        if ts[j - 1] - ts[i] >= dwell_s:
            starts.append(i)
            stops.append(j)
            i = j
        else:
            i += 1
    return np.asarray(starts, dtype=np.int64), np.asarray(stops, dtype=np.int64)


staypoints_np = _staypoints_py


# --------------------------------------------------------------------------
# dispatch

if USE_NUMBA:
    haversine_to_point = haversine_to_point_nb
    haversine_pairs = haversine_pairs_nb
    group_min = group_min_nb
    dbscan_labels = dbscan_labels_nb
    monotone_chain = monotone_chain_nb
    points_in_rings = points_in_rings_nb
    staypoints = staypoints_nb
else:
    haversine_to_point = haversine_to_point_np
    haversine_pairs = haversine_pairs_np
    group_min = group_min_np
    dbscan_labels = dbscan_labels_np
    monotone_chain = monotone_chain_np
    points_in_rings = points_in_rings_np
    staypoints = staypoints_np
