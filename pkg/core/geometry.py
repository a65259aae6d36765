"""
core/geometry.py
Profils de goutte posée (équations de Bashforth-Adams), cercle d'initialisation,
correction d'inclinaison et ajustement du profil aux contours détectés

Convention : coordonnées image (x vers la droite, y vers le bas). Le profil
adimensionnel est exprimé en rayons de courbure à l'apex b : apex à l'origine,
z positif vers la ligne de base.
"""

import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Any, Dict, Optional, Tuple, Union

import numpy as np
from scipy.optimize import minimize
from scipy.spatial import cKDTree

from .errors import (
    CollinearPoints,
    DegenerateArc,
    ExcessiveTilt,
    FitDiverged,
    GeometryError,
    StepTooLarge,
)

logger = logging.getLogger(__name__)

MAX_STEP_DPHI = math.radians(5.0)
MAX_TILT_DEG = 15.0
MIN_ARC_POINTS = 10
MAX_BOND = 5.0
PENALTY = 1e12
DENSE_STEP = 1e-3
DENSE_BASE_STEP = 1e-2
BETA_QUANTUM = 1e-3


# =============================================================================
# INTÉGRATION DU PROFIL
# =============================================================================

@dataclass
class BAProfile:
    """Profil adimensionnel échantillonné le long de l'abscisse curviligne s"""
    bond_number: float
    s: np.ndarray
    x: np.ndarray
    z: np.ndarray
    phi: np.ndarray  # radians

    @property
    def points(self) -> np.ndarray:
        """Tableau (n, 3) des triplets (x, z, φ)"""
        return np.column_stack([self.x, self.z, self.phi])

    def phi_at_z(self, z_value: float) -> float:
        """φ (radians) par interpolation linéaire en z ; NaN hors du profil"""
        if not (0.0 <= z_value <= self.z[-1]):
            return float("nan")
        return float(np.interp(z_value, self.z, self.phi))

    def z_at_phi(self, phi_deg: float) -> float:
        return float(np.interp(math.radians(phi_deg), self.phi, self.z))

    def __len__(self) -> int:
        return len(self.s)


def _curvature_term(beta: float, x: float, z: float, phi: float) -> float:
    if x < 1e-12:
        # limite à l'apex : sin φ / x -> 1
        return 2.0 + beta * z - 1.0
    return 2.0 + beta * z - math.sin(phi) / x


def integrate_profile(
    beta: float,
    phi_max: float = 180.0,
    step: float = DENSE_BASE_STEP,
    s_max: float = 50.0
) -> BAProfile:
    """Intègre dx/ds = cos φ, dz/ds = sin φ, dφ/ds = 2 + βz − sin φ / x
    par Runge-Kutta 4 à pas fixe, de l'apex jusqu'à φ ≥ phi_max (degrés).
    """
    if beta < 0 or not math.isfinite(beta):
        raise GeometryError(f"Nombre de Bond invalide: {beta}")
    if not (0 < phi_max <= 180):
        raise GeometryError(f"phi_max hors de ]0, 180]: {phi_max}")
    if step <= 0:
        raise GeometryError(f"Pas d'intégration invalide: {step}")

    target = math.radians(phi_max)
    h = float(step)
    x = z = phi = 0.0
    xs, zs, phis = [0.0], [0.0], [0.0]
    n = 0
    cos, sin = math.cos, math.sin

    while phi < target:
        if n * h > s_max:
            logger.warning("Profil β=%.4f interrompu à s=%.2f (φ=%.1f°)", beta, n * h, math.degrees(phi))
            break

        k1x, k1z, k1p = cos(phi), sin(phi), _curvature_term(beta, x, z, phi)

        x2, z2, p2 = x + 0.5 * h * k1x, z + 0.5 * h * k1z, phi + 0.5 * h * k1p
        k2x, k2z, k2p = cos(p2), sin(p2), _curvature_term(beta, x2, z2, p2)

        x3, z3, p3 = x + 0.5 * h * k2x, z + 0.5 * h * k2z, phi + 0.5 * h * k2p
        k3x, k3z, k3p = cos(p3), sin(p3), _curvature_term(beta, x3, z3, p3)

        x4, z4, p4 = x + h * k3x, z + h * k3z, phi + h * k3p
        k4x, k4z, k4p = cos(p4), sin(p4), _curvature_term(beta, x4, z4, p4)

        dphi = h / 6.0 * (k1p + 2 * k2p + 2 * k3p + k4p)
        if dphi > MAX_STEP_DPHI:
            raise StepTooLarge(
                f"Δφ = {math.degrees(dphi):.2f}° par pas (max 5°) ; réduire le pas ({h})"
            )

        x += h / 6.0 * (k1x + 2 * k2x + 2 * k3x + k4x)
        z += h / 6.0 * (k1z + 2 * k2z + 2 * k3z + k4z)
        phi += dphi
        n += 1

        xs.append(x)
        zs.append(z)
        phis.append(phi)

    return BAProfile(
        bond_number=float(beta),
        s=np.arange(len(xs)) * h,
        x=np.asarray(xs),
        z=np.asarray(zs),
        phi=np.asarray(phis),
    )


def _densify(profile: BAProfile, step: float) -> BAProfile:
    """Rééchantillonnage d'Hermite cubique (dérivées exactes de l'EDO)"""
    beta = profile.bond_number
    s, x, z, phi = profile.s, profile.x, profile.z, profile.phi
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(x > 1e-12, np.sin(phi) / np.where(x > 1e-12, x, 1.0), 1.0)
    dx, dz, dp = np.cos(phi), np.sin(phi), 2.0 + beta * z - ratio

    s_new = np.arange(0.0, s[-1] + 0.5 * step, step)
    s_new = s_new[s_new <= s[-1]]
    h = s[1] - s[0]
    idx = np.minimum((s_new / h).astype(int), len(s) - 2)
    t = (s_new - s[idx]) / h
    h00 = 2 * t ** 3 - 3 * t ** 2 + 1
    h10 = t ** 3 - 2 * t ** 2 + t
    h01 = -2 * t ** 3 + 3 * t ** 2
    h11 = t ** 3 - t ** 2

    def hermite(values, derivs):
        return h00 * values[idx] + h10 * h * derivs[idx] + h01 * values[idx + 1] + h11 * h * derivs[idx + 1]

    return BAProfile(
        bond_number=beta,
        s=s_new,
        x=np.abs(hermite(x, dx)),
        z=hermite(z, dz),
        phi=hermite(phi, dp),
    )


@dataclass
class DenseProfile:
    """Profil dense + arbre KD sur (x, z) pour les recherches de plus proche voisin"""
    profile: BAProfile
    tree: cKDTree = field(repr=False)

    @property
    def bond_number(self) -> float:
        return self.profile.bond_number


def quantize_beta(beta: float) -> float:
    return round(abs(float(beta)) / BETA_QUANTUM) * BETA_QUANTUM


@lru_cache(maxsize=512)
def _dense_profile_cached(beta_q: float) -> DenseProfile:
    base = integrate_profile(beta_q, phi_max=180.0, step=DENSE_BASE_STEP)
    dense = _densify(base, DENSE_STEP)
    # z n'est monotone que jusqu'à φ = 180°
    keep = dense.phi <= math.pi
    dense = BAProfile(beta_q, dense.s[keep], dense.x[keep], dense.z[keep], dense.phi[keep])
    return DenseProfile(profile=dense, tree=cKDTree(np.column_stack([dense.x, dense.z])))


def dense_profile(beta: float) -> DenseProfile:
    """Profil jusqu'à 180°, pas 1e-3, mis en cache par pas de 1e-3 en β.

    Le cache est partagé et ne doit pas être modifié par l'appelant.
    """
    return _dense_profile_cached(round(quantize_beta(beta), 6))


def profile_height_at(beta: float, phi_deg: float) -> float:
    """Hauteur adimensionnelle z du profil à l'angle φ"""
    return dense_profile(beta).profile.z_at_phi(phi_deg)


# =============================================================================
# CERCLE, INCLINAISON, RMSE
# =============================================================================

@dataclass
class CircleFit:
    center: Tuple[float, float]
    radius: float
    theta_deg: float
    baseline_y: float


def circle_fit(points: Any, baseline_y: Optional[float] = None, y_down: bool = True) -> CircleFit:
    """Cercle algébrique aux moindres carrés (Kåsa) et angle au niveau de la ligne de base.

    y_down=True : coordonnées image, la goutte est au-dessus (y plus petits) de la base.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    if len(pts) < 3:
        raise CollinearPoints(f"{len(pts)} points : au moins 3 requis")

    mean = pts.mean(axis=0)
    u, v = pts[:, 0] - mean[0], pts[:, 1] - mean[1]
    A = np.column_stack([u, v, np.ones_like(u)])
    rhs = -(u ** 2 + v ** 2)
    sol, _, rank, sv = np.linalg.lstsq(A, rhs, rcond=None)
    if rank < 3 or sv[-1] <= 1e-10 * sv[0]:
        raise CollinearPoints("Points alignés : cercle indéterminé")

    cu, cv = -sol[0] / 2.0, -sol[1] / 2.0
    r2 = cu ** 2 + cv ** 2 - sol[2]
    if r2 <= 0:
        raise CollinearPoints("Rayon imaginaire")
    radius = math.sqrt(r2)
    cx, cy = cu + mean[0], cv + mean[1]

    if baseline_y is None:
        baseline_y = float(pts[:, 1].max() if y_down else pts[:, 1].min())
    offset = (cy - baseline_y) if y_down else (baseline_y - cy)
    cos_theta = float(np.clip(offset / radius, -1.0, 1.0))

    return CircleFit(
        center=(float(cx), float(cy)),
        radius=radius,
        theta_deg=math.degrees(math.acos(cos_theta)),
        baseline_y=float(baseline_y),
    )


def rotate_points(points: Any, angle_deg: float, center: Tuple[float, float]) -> np.ndarray:
    """Rotation d'angle angle_deg (sens trigonométrique dans le repère (x, y)) autour de center"""
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    a = math.radians(angle_deg)
    c, s = math.cos(a), math.sin(a)
    dx, dy = pts[:, 0] - center[0], pts[:, 1] - center[1]
    return np.column_stack([center[0] + c * dx - s * dy, center[1] + s * dx + c * dy])


def tilt_correct(
    contour: Any,
    left_cp: Tuple[float, float],
    right_cp: Tuple[float, float],
    max_tilt_deg: float = MAX_TILT_DEG
) -> Tuple[np.ndarray, float]:
    """Tourne le contour autour du milieu des points de contact pour les mettre à la même hauteur.

    Retourne (contour tourné, rotation appliquée en degrés) ; la rotation vaut
    l'opposé de l'angle du segment de contact.
    """
    (xl, yl), (xr, yr) = left_cp, right_cp
    if xl == xr and yl == yr:
        raise GeometryError("Points de contact confondus")
    segment_deg = math.degrees(math.atan2(yr - yl, xr - xl))
    if abs(segment_deg) > max_tilt_deg:
        raise ExcessiveTilt(f"Inclinaison {segment_deg:.2f}° > {max_tilt_deg}°")

    rotation = -segment_deg
    midpoint = ((xl + xr) / 2.0, (yl + yr) / 2.0)
    return rotate_points(contour, rotation, midpoint), rotation


@dataclass
class ProfileTransform:
    """Passage du profil adimensionnel aux pixels : X = apex_x ± b·x, Y = apex_y + b·z"""
    scale_b: float
    apex_x: float
    apex_y: float

    def to_image(self, profile: BAProfile, phi_max_deg: float = 180.0) -> np.ndarray:
        """Polyligne complète (côté gauche puis côté droit) jusqu'à phi_max"""
        keep = profile.phi <= math.radians(phi_max_deg) + 1e-12
        x, z = profile.x[keep], profile.z[keep]
        left = np.column_stack([self.apex_x - self.scale_b * x[::-1], self.apex_y + self.scale_b * z[::-1]])
        right = np.column_stack([self.apex_x + self.scale_b * x[1:], self.apex_y + self.scale_b * z[1:]])
        return np.vstack([left, right])


def _segment_distance(p: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    ab = b - a
    denom = np.einsum("ij,ij->i", ab, ab)
    t = np.where(denom > 0, np.einsum("ij,ij->i", p - a, ab) / np.where(denom > 0, denom, 1.0), 0.0)
    t = np.clip(t, 0.0, 1.0)
    proj = a + t[:, None] * ab
    return np.hypot(*(p - proj).T)


def rmse(arc: Any, profile: Union[BAProfile, DenseProfile], transform: ProfileTransform) -> float:
    """Erreur quadratique moyenne (px) des distances point -> polyligne du profil transformé"""
    pts = np.asarray(arc, dtype=float).reshape(-1, 2)
    if len(pts) == 0:
        raise DegenerateArc("Arc vide")

    if isinstance(profile, DenseProfile):
        prof, tree = profile.profile, profile.tree
    else:
        prof = profile
        tree = cKDTree(np.column_stack([prof.x, prof.z]))

    b = transform.scale_b
    local = np.column_stack([
        np.abs(pts[:, 0] - transform.apex_x) / b,
        (pts[:, 1] - transform.apex_y) / b,
    ])
    _, k = tree.query(local)
    vertices = np.column_stack([prof.x, prof.z])
    last = len(vertices) - 1
    prev_k = np.maximum(k - 1, 0)
    next_k = np.minimum(k + 1, last)
    d = np.minimum(
        _segment_distance(local, vertices[prev_k], vertices[k]),
        _segment_distance(local, vertices[k], vertices[next_k]),
    )
    return float(b * math.sqrt(float(np.mean(d ** 2))))


# =============================================================================
# AJUSTEMENT BASHFORTH-ADAMS
# =============================================================================

@dataclass
class BAFit:
    """Résultat d'ajustement du profil"""
    bond_number: float
    scale_b: float
    apex: Tuple[float, float]
    theta_deg: float
    rmse_px: float
    iterations: int
    converged: bool
    evaluations: int = 0

    @property
    def transform(self) -> ProfileTransform:
        return ProfileTransform(self.scale_b, self.apex[0], self.apex[1])

    def to_dict(self) -> Dict[str, Any]:
        return {
            "bond_number": self.bond_number,
            "scale_b": self.scale_b,
            "apex": list(self.apex),
            "theta_deg": self.theta_deg,
            "rmse_px": self.rmse_px,
            "iterations": self.iterations,
            "converged": self.converged,
        }


def theta_at_baseline(beta: float, transform: ProfileTransform, baseline_y: float) -> float:
    """Angle φ (degrés) du profil à la hauteur de la ligne de base"""
    z_base = (baseline_y - transform.apex_y) / transform.scale_b
    phi = dense_profile(beta).profile.phi_at_z(z_base)
    return math.degrees(phi) if math.isfinite(phi) else float("nan")


def fit_bashforth_adams(
    droplet_arc: Any,
    baseline_y: float,
    max_fev: int = 2000,
    xatol: float = 1e-7
) -> BAFit:
    """Ajuste (β, b, apex_x, apex_y) par simplexe de Nelder-Mead en coordonnées normalisées.

    Initialisation par le cercle (β=0, b=R, apex au sommet du cercle).
    """
    arc = np.asarray(droplet_arc, dtype=float).reshape(-1, 2)
    if len(arc) < MIN_ARC_POINTS:
        raise DegenerateArc(f"{len(arc)} points (minimum {MIN_ARC_POINTS})")
    if not np.all(np.isfinite(arc)):
        raise DegenerateArc("Arc contenant des valeurs non finies")

    circle = circle_fit(arc, baseline_y)
    b0 = circle.radius
    ax0, ay0 = circle.center[0], circle.center[1] - circle.radius

    def unpack(p: np.ndarray) -> Tuple[float, ProfileTransform]:
        return quantize_beta(p[0]), ProfileTransform(p[1] * b0, ax0 + p[2] * b0, ay0 + p[3] * b0)

    def objective(p: np.ndarray) -> float:
        if not np.all(np.isfinite(p)) or p[1] <= 1e-3 or abs(p[0]) > MAX_BOND:
            return PENALTY
        beta, transform = unpack(p)
        try:
            return rmse(arc, dense_profile(beta), transform)
        except GeometryError as e:
            # StepTooLarge (β trop fort pour le pas d'intégration) : sommet rejeté
            logger.debug("Objectif pénalisé en β=%.3f : %s", beta, e)
            return PENALTY

    p0 = np.array([0.0, 1.0, 0.0, 0.0])
    simplex = np.vstack([
        p0,
        p0 + [0.1, 0.0, 0.0, 0.0],
        p0 + [0.0, 0.05, 0.0, 0.0],
        p0 + [0.0, 0.0, 0.02, 0.0],
        p0 + [0.0, 0.0, 0.0, 0.02],
    ])
    result = minimize(
        objective,
        p0,
        method="Nelder-Mead",
        options={
            "initial_simplex": simplex,
            "xatol": xatol,
            "fatol": 1e-10,
            "maxfev": max_fev,
            "maxiter": 100 * max_fev,
        },
    )

    final = result.final_simplex[0]
    diameter = float(np.max(np.abs(final[1:] - final[0])))
    converged = bool(diameter < 1e-6 and result.nfev <= max_fev)

    if not np.all(np.isfinite(result.x)) or not math.isfinite(result.fun) or result.fun >= PENALTY:
        raise FitDiverged("Ajustement non fini")

    beta, transform = unpack(result.x)
    try:
        theta = theta_at_baseline(beta, transform, baseline_y)
    except GeometryError as e:
        raise FitDiverged(f"Profil non intégrable en β={beta:.3f}: {e}") from e
    if not math.isfinite(theta) or not (0.0 < theta < 180.0):
        raise FitDiverged(f"Angle non extractible (β={beta:.3f}, b={transform.scale_b:.1f})")

    if not converged:
        logger.warning("Ajustement non convergé (diamètre %.2e, %d évaluations)", diameter, result.nfev)

    return BAFit(
        bond_number=beta,
        scale_b=transform.scale_b,
        apex=(transform.apex_x, transform.apex_y),
        theta_deg=theta,
        rmse_px=rmse(arc, dense_profile(beta), transform),
        iterations=int(result.nit),
        converged=converged,
        evaluations=int(result.nfev),
    )
