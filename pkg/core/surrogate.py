"""
core/surrogate.py
Processus gaussien (noyau de Matérn 5/2) et échantillonnage de Thompson
sur un ensemble discret de candidats
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, Iterable, Optional, Sequence, Tuple

import numpy as np
from scipy import linalg
from scipy.spatial.distance import cdist

from .errors import ConfigInvalid, SingularCovariance, SpaceExhausted

logger = logging.getLogger(__name__)

SQRT5 = math.sqrt(5.0)
LENGTH_GRID = (0.05, 0.1, 0.2, 0.5, 1.0, 2.0)
SIGNAL_GRID = (0.1, 0.5, 1.0, 2.0, 4.0)
NOISE_GRID = (1e-4, 1e-3, 1e-2, 0.05, 0.25)
THOMPSON_JITTER = 1e-9


@dataclass
class GPHyper:
    """Hyperparamètres exprimés dans l'espace normalisé des sorties"""
    length_scales: np.ndarray
    signal_var: float = 1.0
    noise_var: float = 1e-3

    def __post_init__(self):
        self.length_scales = np.atleast_1d(np.asarray(self.length_scales, dtype=float))
        if np.any(self.length_scales <= 0) or self.signal_var <= 0 or self.noise_var < 0:
            raise ConfigInvalid(f"Hyperparamètres invalides: {self}")

    def to_dict(self) -> Dict[str, Any]:
        return {
            "length_scales": [float(v) for v in self.length_scales],
            "signal_var": self.signal_var,
            "noise_var": self.noise_var,
        }


@dataclass
class HyperPolicy:
    """Recherche sur grille (défaut) ou hyperparamètres fixés par la configuration"""
    fixed: Optional[GPHyper] = None
    length_grid: Sequence[float] = LENGTH_GRID
    signal_grid: Sequence[float] = SIGNAL_GRID
    noise_grid: Sequence[float] = NOISE_GRID
    normalize_y: bool = True

    @classmethod
    def from_dict(cls, data: Optional[Dict[str, Any]]) -> 'HyperPolicy':
        data = data or {}
        fixed = None
        if data.get("fixed"):
            f = data["fixed"]
            fixed = GPHyper(
                length_scales=f.get("length_scale", 0.2),
                signal_var=float(f.get("signal_var", 1.0)),
                noise_var=float(f.get("noise_var", 1e-3)),
            )
        return cls(
            fixed=fixed,
            length_grid=tuple(data.get("length_grid", LENGTH_GRID)),
            signal_grid=tuple(data.get("signal_grid", SIGNAL_GRID)),
            noise_grid=tuple(data.get("noise_grid", NOISE_GRID)),
            normalize_y=bool(data.get("normalize_y", True)),
        )


@dataclass
class GPState:
    """Processus gaussien conditionné ; immuable après gp_fit"""
    hyper: GPHyper
    mean: float
    y_scale: float
    X: np.ndarray
    y: np.ndarray
    chol: Optional[np.ndarray] = field(default=None, repr=False)
    alpha: Optional[np.ndarray] = field(default=None, repr=False)
    log_marginal_likelihood: float = 0.0

    @property
    def n(self) -> int:
        return len(self.y)


def matern52(X1: np.ndarray, X2: np.ndarray, length_scales: Any, signal_var: float = 1.0) -> np.ndarray:
    """k(r) = σf²·(1 + √5 r + 5r²/3)·exp(−√5 r), r distance pondérée par ℓ (ARD)"""
    ls = np.atleast_1d(np.asarray(length_scales, dtype=float))
    r = cdist(np.atleast_2d(X1) / ls, np.atleast_2d(X2) / ls)
    return signal_var * _matern_unit(r)


def _matern_unit(r: np.ndarray) -> np.ndarray:
    sr = SQRT5 * r
    return (1.0 + sr + sr * sr / 3.0) * np.exp(-sr)


def _factor(K: np.ndarray, yn: np.ndarray) -> Tuple[np.ndarray, np.ndarray, float]:
    L = linalg.cholesky(K, lower=True)
    alpha = linalg.cho_solve((L, True), yn)
    lml = -0.5 * float(yn @ alpha) - float(np.log(np.diag(L)).sum()) - 0.5 * len(yn) * math.log(2 * math.pi)
    return L, alpha, lml


def gp_fit(
    X: Any,
    y: Any,
    policy: Optional[HyperPolicy] = None,
    prior_mean: float = 0.0
) -> GPState:
    """Conditionne le GP : moyenne constante = moyenne des y, hyperparamètres par
    maximum de vraisemblance marginale sur grille log (ℓ isotrope) ou fixés"""
    policy = policy or HyperPolicy()
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    if X.ndim == 1:
        X = X.reshape(-1, 1) if len(y) else X.reshape(0, 1)

    if len(y) == 0:
        hyper = policy.fixed or GPHyper(length_scales=[0.2] * max(X.shape[1], 1), signal_var=1.0)
        return GPState(hyper=hyper, mean=prior_mean, y_scale=1.0, X=X, y=y)
    if len(X) != len(y):
        raise ConfigInvalid(f"X ({len(X)}) et y ({len(y)}) de tailles différentes")

    mean = float(y.mean())
    scale = float(y.std()) if policy.normalize_y and len(y) > 1 else 1.0
    if not math.isfinite(scale) or scale < 1e-12:
        scale = 1.0
    yn = (y - mean) / scale

    if policy.fixed is not None:
        hyper = policy.fixed
        K = matern52(X, X, hyper.length_scales, hyper.signal_var) + hyper.noise_var * np.eye(len(y))
        try:
            L, alpha, lml = _factor(K, yn)
        except linalg.LinAlgError as e:
            raise SingularCovariance("Covariance non définie positive (X dupliqués sans bruit ?)") from e
        return GPState(hyper, mean, scale, X, y, L, alpha, lml)

    dist = cdist(X, X)
    eye = np.eye(len(y))
    best = None
    for ls in policy.length_grid:
        unit = _matern_unit(dist / ls)
        for sf in policy.signal_grid:
            for sn in policy.noise_grid:
                try:
                    L, alpha, lml = _factor(sf * unit + sn * eye, yn)
                except linalg.LinAlgError:
                    continue
                if best is None or lml > best[0]:
                    best = (lml, ls, sf, sn, L, alpha)
    if best is None:
        raise SingularCovariance("Aucune combinaison d'hyperparamètres factorisable")

    lml, ls, sf, sn, L, alpha = best
    hyper = GPHyper(length_scales=[ls] * X.shape[1], signal_var=sf, noise_var=sn)
    logger.debug("GP : n=%d ℓ=%.3g σf²=%.3g σn²=%.3g lml=%.3f", len(y), ls, sf, sn, lml)
    return GPState(hyper, mean, scale, X, y, L, alpha, lml)


def gp_posterior(gp: GPState, Xq: Any, full_cov: bool = True) -> Tuple[np.ndarray, np.ndarray]:
    """Moyenne et covariance (ou variance si full_cov=False) de f aux points Xq, en unités de y"""
    Xq = np.atleast_2d(np.asarray(Xq, dtype=float))
    h = gp.hyper
    if gp.n == 0:
        mean = np.full(len(Xq), gp.mean)
        if full_cov:
            return mean, matern52(Xq, Xq, h.length_scales, h.signal_var)
        return mean, np.full(len(Xq), h.signal_var)

    Ks = matern52(gp.X, Xq, h.length_scales, h.signal_var)
    mean = gp.mean + gp.y_scale * (Ks.T @ gp.alpha)
    V = linalg.solve_triangular(gp.chol, Ks, lower=True)
    if full_cov:
        cov = matern52(Xq, Xq, h.length_scales, h.signal_var) - V.T @ V
        return mean, gp.y_scale ** 2 * cov
    var = h.signal_var - np.einsum("ij,ij->j", V, V)
    return mean, gp.y_scale ** 2 * np.maximum(var, 0.0)


def sample_argmax(mean: np.ndarray, cov: np.ndarray, rng: np.random.Generator,
                  jitter: float = THOMPSON_JITTER) -> int:
    """Tire une trajectoire conjointe N(mean, cov + jitter·I) et renvoie son argmax (premier en cas d'égalité)"""
    m = len(mean)
    C = cov + jitter * np.eye(m)
    try:
        L = linalg.cholesky(C, lower=True)
    except linalg.LinAlgError:
        w, V = linalg.eigh(C)
        L = V * np.sqrt(np.clip(w, 0.0, None))
    draw = mean + L @ rng.standard_normal(m)
    return int(np.argmax(draw))


def thompson_recommend(gp: GPState, space: Any, rng: np.random.Generator) -> int:
    """Indice du candidat non mesuré qui maximise une fonction tirée du postérieur"""
    pool = space.unmeasured()
    if len(pool) == 0:
        raise SpaceExhausted("Tous les candidats ont été mesurés")
    mean, cov = gp_posterior(gp, space.to_unit(pool), full_cov=True)
    return int(pool[sample_argmax(mean, cov, rng)])


def posterior_summary(gp: GPState, Xq: Iterable) -> Dict[str, list]:
    """Moyenne et écart-type a posteriori (pour les rapports)"""
    mean, var = gp_posterior(gp, np.asarray(list(Xq)), full_cov=False)
    return {"mean": mean.tolist(), "sd": np.sqrt(var).tolist()}
