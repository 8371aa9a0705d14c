"""Binary logistic evacuation-decision models fitted by Newton/IRLS.

Inference is Wald-based (standard errors from the inverse observed
information). Model comparison is a likelihood-ratio chi-square test.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import pandas as pd
from scipy import special, stats

from .errors import EmptyDesign, NotNested, RankDeficient

log = logging.getLogger(__name__)

# predictor name -> column in the joined device table
PREDICTOR_COLUMNS = {
    "evacuation_order": "order_code",
    "elevation": "elevation_m",
    "median_age": "median_age",
    "median_income": "median_income",
    "vehicle_availability": "vehicle_availability_pct",
    "race_white": "race_white_frac",
    "avg_trips": "avg_daily_trips",
    "avg_hull_area": "avg_daily_hull_area_km2",
}


@dataclass
class ModelSpec:
    name: str
    predictors: tuple[str, ...]
    response: str = "evacuated"
    order_encoding: str = "numeric"   # or "dummies": voluntary and mandatory indicators

    def __post_init__(self):
        if len(set(self.predictors)) != len(self.predictors):
            raise ValueError("predictors must be distinct")
        if self.order_encoding not in ("numeric", "dummies"):
            raise ValueError(f"unknown order encoding {self.order_encoding!r}")

    def columns(self) -> list[str]:
        names = []
        for p in self.predictors:
            if p == "evacuation_order" and self.order_encoding == "dummies":
                names += ["order_voluntary", "order_mandatory"]
            else:
                names.append(p)
        return names


MODEL_1 = ModelSpec("model_1", ("evacuation_order", "elevation", "median_age", "median_income",
                                "vehicle_availability", "race_white"))
MODEL_2 = ModelSpec("model_2", MODEL_1.predictors + ("avg_trips", "avg_hull_area"))


@dataclass
class LogisticFit:
    names: list[str]              # intercept first
    coef: np.ndarray
    se: np.ndarray
    log_likelihood: float
    ll_null: float
    n: int
    converged: bool = True
    n_iter: int = 0
    ll_history: list[float] = field(default_factory=list)

    @property
    def k(self) -> int:
        return self.coef.shape[0]

    @property
    def z(self) -> np.ndarray:
        return self.coef / self.se

    @property
    def p_values(self) -> np.ndarray:
        return 2.0 * stats.norm.sf(np.abs(self.z))

    @property
    def aic(self) -> float:
        return aic(self.log_likelihood, self.k)

    @property
    def mcfadden(self) -> float:
        return 1.0 - self.log_likelihood / self.ll_null if self.ll_null != 0 else float("nan")

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        return special.expit(self.coef[0] + X @ self.coef[1:])

    def to_dict(self) -> dict:
        return {
            "coefficients": [
                {"name": n, "estimate": float(b), "std_error": float(s), "z": float(z), "p_value": float(p)}
                for n, b, s, z, p in zip(self.names, self.coef, self.se, self.z, self.p_values)
            ],
            "n": self.n, "k": self.k, "log_likelihood": self.log_likelihood, "ll_null": self.ll_null,
            "aic": self.aic, "mcfadden_r2": self.mcfadden, "converged": self.converged, "iterations": self.n_iter,
        }


def aic(log_likelihood: float, k: int) -> float:
    return 2.0 * k - 2.0 * log_likelihood


def log_likelihood(beta, X, y) -> float:
    eta = X @ beta
    return float(np.sum(y * eta - np.logaddexp(0.0, eta)))


def score(beta, X, y) -> np.ndarray:
    return X.T @ (y - special.expit(X @ beta))


def hessian(beta, X, y) -> np.ndarray:
    p = special.expit(X @ beta)
    w = p * (1.0 - p)
    return -(X.T @ (X * w[:, None]))


def _check_rank(Xs: np.ndarray, names: Sequence[str]) -> None:
    gram = Xs.T @ Xs
    norms = np.sqrt(np.diag(gram))
    for j, name in enumerate(names):
        if norms[j] == 0:
            raise RankDeficient(name)
        sub = gram[: j + 1, : j + 1] / np.outer(norms[: j + 1], norms[: j + 1])
        if np.linalg.eigvalsh(sub)[0] < 1e-10:
            raise RankDeficient(name)


def null_log_likelihood(y) -> float:
    """Maximised log-likelihood of the intercept-only model."""
    y = np.asarray(y, dtype=np.float64)
    n = y.shape[0]
    s = y.sum()
    out = 0.0
    if s > 0:
        out += s * math.log(s / n)
    if n - s > 0:
        out += (n - s) * math.log((n - s) / n)
    return out


def fit_logistic(X, y, names: Sequence[str] | None = None, tol: float = 1e-8, max_iter: int = 50,
                 add_intercept: bool = True) -> LogisticFit:
    """Maximum-likelihood logistic regression by Newton steps with step halving.

    Columns are rescaled internally for conditioning; estimates and standard
    errors are reported on the original scale.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    y = np.asarray(y, dtype=np.float64)
    if not np.all((y == 0) | (y == 1)):
        raise ValueError("response must be binary 0/1")
    names = list(names) if names is not None else [f"x{j + 1}" for j in range(X.shape[1])]
    if add_intercept:
        X = np.column_stack([np.ones(X.shape[0]), X])
        names = ["intercept"] + names
    n, k = X.shape
    if n <= k:
        raise EmptyDesign(f"n={n} rows for k={k} parameters")
    scale = np.abs(X).max(axis=0)
    scale[scale == 0] = 1.0
    Xs = X / scale
    _check_rank(Xs, names)

    beta = np.zeros(k)
    ll = log_likelihood(beta, Xs, y)
    history = [ll]
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        g = score(beta, Xs, y)
        H = hessian(beta, Xs, y)
        step = np.linalg.solve(-H, g)
        t = 1.0
        for _ in range(40):
            cand = beta + t * step
            ll_new = log_likelihood(cand, Xs, y)
            if ll_new >= ll:
                break
            t *= 0.5
        else:
            cand, ll_new = beta, ll
        rel = abs(ll_new - ll) / max(1.0, abs(ll))
        beta, ll = cand, ll_new
        history.append(ll)
        if np.max(np.abs(score(beta, Xs, y))) < tol or rel < tol:
            converged = True
            break
    if not converged:
        log.warning("logistic fit did not converge in %d iterations", max_iter)
    cov_s = np.linalg.inv(-hessian(beta, Xs, y))
    coef = beta / scale
    se = np.sqrt(np.diag(cov_s)) / scale
    return LogisticFit(names, coef, se, ll, null_log_likelihood(y), n, converged, it, history)


def lr_test(ll_small: float, ll_big: float, df: int) -> tuple[float, int, float]:
    chi2 = 2.0 * (ll_big - ll_small)
    p = float(stats.chi2.sf(chi2, df)) if df > 0 else 1.0
    if chi2 <= 0:
        p = 1.0
    return chi2, df, p


def compare_models(fit_small: LogisticFit, fit_big: LogisticFit) -> tuple[float, int, float]:
    """Likelihood-ratio test of nested fits on identical rows: (chi2, df, p)."""
    if fit_small.n != fit_big.n:
        raise NotNested(f"row counts differ: {fit_small.n} vs {fit_big.n}")
    return lr_test(fit_small.log_likelihood, fit_big.log_likelihood, fit_big.k - fit_small.k)


# --------------------------------------------------------------------------
# design assembly


def join_device_table(profiles: pd.DataFrame, contexts: pd.DataFrame,
                      baselines: pd.DataFrame | None = None) -> pd.DataFrame:
    """Active devices with their context (and mobility baseline) columns."""
    act = profiles[profiles["active"].astype(bool)][["device_id", "evacuated"]]
    df = act.merge(contexts, on="device_id", how="left")
    if baselines is not None:
        df = df.merge(baselines, on="device_id", how="left")
    return df.sort_values("device_id", kind="stable").reset_index(drop=True)


def _column(df: pd.DataFrame, name: str) -> np.ndarray:
    if name == "order_voluntary":
        return (df["order_code"] == 1).astype(float).to_numpy()
    if name == "order_mandatory":
        return (df["order_code"] == 2).astype(float).to_numpy()
    col = PREDICTOR_COLUMNS[name]
    if col not in df:
        return np.full(len(df), np.nan)
    return pd.to_numeric(df[col], errors="coerce").to_numpy(dtype=np.float64, na_value=np.nan)


def assemble_design(table: pd.DataFrame, spec: ModelSpec,
                    require: Sequence[str] = ()) -> tuple[np.ndarray, np.ndarray, int, np.ndarray]:
    """(X, y, dropped, device_ids) over rows complete for the spec's predictors.

    ``require`` names extra predictors whose completeness also gates a row,
    so nested models can share identical rows.
    """
    cols = spec.columns()
    X = np.column_stack([_column(table, c) for c in cols]) if cols else np.empty((len(table), 0))
    extra = [_column(table, c) for c in require]
    ok = ~np.isnan(X).any(axis=1)
    for e in extra:
        ok &= ~np.isnan(e)
    y = table[spec.response].astype(float).to_numpy()
    if not ok.any():
        raise EmptyDesign("no device has every predictor")
    return X[ok], y[ok], int((~ok).sum()), table["device_id"].to_numpy()[ok]


def fit_models(table: pd.DataFrame, small: ModelSpec = MODEL_1, big: ModelSpec = MODEL_2,
               tol: float = 1e-8, max_iter: int = 50) -> dict:
    """Fit both models on the rows complete for the larger one and compare them."""
    X1, y, dropped, _ = assemble_design(table, small, require=big.predictors)
    X2, y2, _, _ = assemble_design(table, big)
    f1 = fit_logistic(X1, y, small.columns(), tol, max_iter)
    f2 = fit_logistic(X2, y2, big.columns(), tol, max_iter)
    chi2, df, p = compare_models(f1, f2)
    return {"dropped": dropped, "fits": {small.name: f1, big.name: f2},
            "lr_test": {"chi2": chi2, "df": df, "p_value": p}}


def _stars(p: float) -> str:
    return "***" if p < 0.001 else "**" if p < 0.01 else "*" if p < 0.05 else ""


def _fmt_p(p: float) -> str:
    return "<0.001" if p < 0.001 else f"{p:.3f}"


def summary_table(result: dict) -> str:
    """Plain-text side-by-side summary of the two fits."""
    fits = list(result["fits"].values())
    names: list[str] = []
    for f in fits:
        names += [n for n in f.names if n not in names]
    w = 22
    lines = [f"{'Variable':<24}" + "".join(f"{name:>{2 * w}}" for name in result["fits"]),
             f"{'':<24}" + "".join(f"{'estimate':>{w}}{'p-value':>{w}}" for _ in fits)]
    for nm in names:
        row = f"{nm:<24}"
        for f in fits:
            if nm in f.names:
                j = f.names.index(nm)
                p = f.p_values[j]
                row += f"{f.coef[j]:>{w}.3E}{_fmt_p(p) + ' ' + _stars(p):>{w}}"
            else:
                row += f"{'-':>{w}}{'-':>{w}}"
        lines.append(row)
    lines.append(f"{'Number of observation':<24}" + "".join(f"{f.n:>{w}}{'':>{w}}" for f in fits))
    lines.append(f"{'Log Likelihood':<24}" + "".join(f"{f'{f.log_likelihood:.1f} (df={f.k})':>{w}}{'':>{w}}"
                                                     for f in fits))
    lines.append(f"{'AIC':<24}" + "".join(f"{f.aic:>{w}.0f}{'':>{w}}" for f in fits))
    lines.append(f"{'McFadden R2':<24}" + "".join(f"{f.mcfadden:>{w}.3f}{'':>{w}}" for f in fits))
    lr = result["lr_test"]
    lines.append(f"{'Models comparison':<24}chi2 = {lr['chi2']:.1f}, df = {lr['df']}, "
                 f"p = {_fmt_p(lr['p_value'])} {_stars(lr['p_value'])}")
    return "\n".join(lines) + "\n"
