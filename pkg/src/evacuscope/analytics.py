"""Aggregate tables over evacuation profiles and device contexts.

Every table comes back as a long-format DataFrame ready for plotting. All
percentages are unrounded; columns or rows close to 100.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
import pandas as pd

from .enrich import ELEVATION_BINS

GROUPS = ("none", "voluntary", "mandatory")
DEFAULT_DISTANCE_EDGES = (1.0, 20.0, 40.0, 60.0, 80.0, 100.0)


def _pct(counts, total):
    counts = np.asarray(counts, dtype=np.float64)
    if total == 0:
        return np.zeros_like(counts)
    return 100.0 * counts / total


def join(profiles: pd.DataFrame, contexts: pd.DataFrame) -> pd.DataFrame:
    """Active devices with their contexts, in device_id order."""
    act = profiles[profiles["active"].astype(bool)]
    df = act.merge(contexts, on="device_id", how="left", validate="one_to_one")
    df["order_type"] = df["order_type"].fillna("none")
    df["evacuated"] = df["evacuated"].astype(bool)
    return df.sort_values("device_id", kind="stable").reset_index(drop=True)


# --------------------------------------------------------------------------
# decision by order


@dataclass
class CrossTab:
    rows: tuple[str, ...]
    columns: tuple[str, ...]
    counts: np.ndarray          # rows x columns
    empty: tuple[str, ...] = ()  # columns with no devices

    @property
    def percent(self) -> np.ndarray:
        tot = self.counts.sum(axis=0)
        out = np.zeros(self.counts.shape)
        nz = tot > 0
        out[:, nz] = 100.0 * self.counts[:, nz] / tot[nz]
        return out

    def to_frame(self) -> pd.DataFrame:
        pct = self.percent
        recs = []
        for j, col in enumerate(self.columns):
            for i, row in enumerate(self.rows):
                recs.append({"decision": row, "group": col, "count": int(self.counts[i, j]),
                             "percent": pct[i, j], "empty": col in self.empty})
            recs.append({"decision": "total", "group": col, "count": int(self.counts[:, j].sum()),
                         "percent": 100.0 if self.counts[:, j].sum() else 0.0, "empty": col in self.empty})
        return pd.DataFrame.from_records(recs)


def crosstab_from_counts(counts: Mapping[str, tuple[int, int]]) -> CrossTab:
    """Cross-tab from per-group (evacuated, not evacuated) counts; adds a total column."""
    groups = tuple(counts)
    mat = np.array([[counts[g][0] for g in groups], [counts[g][1] for g in groups]], dtype=np.int64)
    mat = np.column_stack([mat, mat.sum(axis=1)])
    cols = groups + ("total",)
    empty = tuple(c for j, c in enumerate(cols) if mat[:, j].sum() == 0)
    return CrossTab(("evacuated", "not_evacuated"), cols, mat, empty)


def decision_by_order(profiles: pd.DataFrame, contexts: pd.DataFrame) -> CrossTab:
    df = join(profiles, contexts)
    counts = {}
    for g in GROUPS:
        sub = df[df["order_type"] == g]
        counts[g] = (int(sub["evacuated"].sum()), int((~sub["evacuated"]).sum()))
    return crosstab_from_counts(counts)


# --------------------------------------------------------------------------
# departure / reentry dates


def date_distribution(profiles: pd.DataFrame, field: str = "departure_date") -> pd.DataFrame:
    """Share of evacuees per calendar day; missing dates land in one bucket
    ('censored' for reentry, 'absent' for departure)."""
    if field not in ("departure_date", "reentry_date"):
        raise ValueError(field)
    ev = profiles[profiles["active"].astype(bool) & profiles["evacuated"].astype(bool)]
    vals = ev[field]
    missing = vals.isna() | (vals.astype(str) == "")
    day_counts = vals[~missing].astype(str).value_counts().sort_index()
    bucket = "censored" if field == "reentry_date" else "absent"
    labels = list(day_counts.index) + [bucket]
    counts = list(day_counts.to_numpy()) + [int(missing.sum())]
    return pd.DataFrame({"day": labels, "count": np.asarray(counts, dtype=np.int64),
                         "percent": _pct(counts, len(ev))})


def departure_by_order_date(profiles: pd.DataFrame, contexts: pd.DataFrame) -> pd.DataFrame:
    """Row-normalised matrix of order issue date x departure date, long format."""
    df = join(profiles, contexts)
    df = df[df["evacuated"] & (df["order_type"] != "none") & df["order_date"].notna()]
    dep = df["departure_date"].where(df["departure_date"].notna(), "absent").astype(str)
    tab = pd.crosstab(df["order_date"].astype(str), dep)
    recs = []
    for od, row in tab.iterrows():
        tot = int(row.sum())
        for dd, c in row.items():
            if c:
                recs.append({"order_date": od, "departure_date": dd, "count": int(c), "percent": 100.0 * c / tot})
    return pd.DataFrame.from_records(recs, columns=["order_date", "departure_date", "count", "percent"])


# --------------------------------------------------------------------------
# shelter distance, duration


def distance_bin_labels(edges: Sequence[float]) -> list[str]:
    labels = [f"{edges[i]:g}-{edges[i + 1]:g}" for i in range(len(edges) - 1)]
    return labels + [f">{edges[-1]:g}"]


def distance_bin(d, edges: Sequence[float] = DEFAULT_DISTANCE_EDGES) -> np.ndarray:
    """Right-closed bin index: (.., e1], (e1, e2], ..., (e_last, inf)."""
    return np.searchsorted(np.asarray(edges[1:], dtype=np.float64), np.asarray(d, dtype=np.float64), side="left")


def _by_group(df: pd.DataFrame):
    for g in GROUPS + ("all",):
        yield g, (df if g == "all" else df[df["order_type"] == g])


def shelter_distance_distribution(profiles: pd.DataFrame, contexts: pd.DataFrame,
                                  edges: Sequence[float] = DEFAULT_DISTANCE_EDGES) -> pd.DataFrame:
    df = join(profiles, contexts)
    df = df[df["evacuated"]]
    labels = distance_bin_labels(edges)
    recs = []
    for g, sub in _by_group(df):
        d = sub["shelter_distance_mi"].astype(float).dropna().to_numpy()
        counts = np.bincount(distance_bin(d, edges), minlength=len(labels))
        for lab, c, p in zip(labels, counts, _pct(counts, d.shape[0])):
            recs.append({"group": g, "bin_mi": lab, "count": int(c), "percent": p})
    return pd.DataFrame.from_records(recs)


def duration_distribution(profiles: pd.DataFrame, contexts: pd.DataFrame) -> pd.DataFrame:
    """Histogram of whole-day durations per group; censored spells get their own
    row (percent NaN) and do not enter the percentages."""
    df = join(profiles, contexts)
    df = df[df["evacuated"]]
    recs = []
    for g, sub in _by_group(df):
        dur = pd.to_numeric(sub["duration_days"], errors="coerce")
        known = dur.dropna().astype(int)
        vc = known.value_counts().sort_index()
        for days, c in vc.items():
            recs.append({"group": g, "duration_days": str(days), "count": int(c),
                         "percent": 100.0 * c / len(known)})
        recs.append({"group": g, "duration_days": "censored", "count": int(dur.isna().sum()),
                     "percent": np.nan})
    return pd.DataFrame.from_records(recs, columns=["group", "duration_days", "count", "percent"])


def county_aggregates(profiles: pd.DataFrame, contexts: pd.DataFrame) -> pd.DataFrame:
    df = join(profiles, contexts)
    df["county"] = df["county"].fillna("unassigned")
    recs = []
    for county, sub in df.groupby("county", sort=True):
        ev = sub[sub["evacuated"]]
        dist = ev["shelter_distance_mi"].astype(float).dropna()
        dur = pd.to_numeric(ev["duration_days"], errors="coerce").dropna()
        recs.append({"county": county, "devices": len(sub), "evacuees": len(ev),
                     "median_shelter_distance_mi": float(dist.median()) if len(dist) else np.nan,
                     "mean_duration_days": float(dur.mean()) if len(dur) else np.nan,
                     "censored": int(len(ev) - len(dur))})
    return pd.DataFrame.from_records(
        recs, columns=["county", "devices", "evacuees", "median_shelter_distance_mi", "mean_duration_days",
                       "censored"])


def elevation_by_order_rates(profiles: pd.DataFrame, contexts: pd.DataFrame) -> pd.DataFrame:
    """Evacuation percent for each elevation bin x order group."""
    df = join(profiles, contexts)
    df = df[df["elevation_bin"].notna()]
    recs = []
    for b, label in enumerate(ELEVATION_BINS):
        for g in GROUPS:
            sub = df[(df["elevation_bin"].astype(int) == b) & (df["order_type"] == g)]
            n = len(sub)
            e = int(sub["evacuated"].sum())
            recs.append({"elevation_bin": label, "group": g, "devices": n, "evacuated": e,
                         "percent": 100.0 * e / n if n else 0.0})
    return pd.DataFrame.from_records(recs)


# table -> column whose groups must each sum to 100 percent ("" = whole table)
CLOSURE_GROUPS = {
    "table2_crosstab.csv": "group",
    "fig4_departure.csv": "",
    "fig4_reentry.csv": "",
    "fig5_matrix.csv": "order_date",
    "fig6_distance.csv": "group",
    "fig8_duration.csv": "group",
}


def closure_check(name: str, table: pd.DataFrame, tol: float = 0.01) -> dict | None:
    """Largest deviation from 100 over the non-empty groups of a percentage table."""
    if name not in CLOSURE_GROUPS:
        return None
    t = table
    if "decision" in t:
        t = t[t["decision"] != "total"]
    t = t[t["percent"].notna()]
    key = CLOSURE_GROUPS[name]
    groups = t.groupby(key, sort=True) if key else [("", t)]
    worst = 0.0
    for _, sub in groups:
        if sub["count"].sum() == 0:
            continue
        worst = max(worst, abs(float(sub["percent"].sum()) - 100.0))
    return {"max_deviation": worst, "closes": worst <= tol}


REPORTS = {
    "table2_crosstab.csv": lambda p, c: decision_by_order(p, c).to_frame(),
    "fig4_departure.csv": lambda p, c: date_distribution(p, "departure_date"),
    "fig4_reentry.csv": lambda p, c: date_distribution(p, "reentry_date"),
    "fig5_matrix.csv": departure_by_order_date,
    "fig6_distance.csv": shelter_distance_distribution,
    "fig8_duration.csv": duration_distribution,
    "fig7_fig9_county.csv": county_aggregates,
    "fig10_elevation.csv": elevation_by_order_rates,
}
