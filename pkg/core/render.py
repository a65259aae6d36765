"""
core/render.py
Rendu synthétique d'une goutte posée rétroéclairée : silhouette Bashforth-Adams,
reflet sous la ligne de base, fenêtre réfléchissante encadrée par deux platines
sombres, inclinaison, flou et bruit
"""

import math
from dataclasses import dataclass
from typing import Any, Dict, Optional

import numpy as np
from scipy import ndimage

from .errors import ConfigInvalid, DropletOutOfFrame, LabError
from .geometry import dense_profile

SUBROWS = (-0.375, -0.125, 0.125, 0.375)


@dataclass
class RenderParams:
    """Scène de rendu (pixels, niveaux de gris)"""
    width: int = 800
    height: int = 700
    scale_px: float = 120.0          # rayon de courbure à l'apex b
    baseline_row: int = 400
    center_x: Optional[float] = None
    tilt_deg: float = 0.0
    reflection: float = 0.8          # contraste du reflet, 0 = pas de reflet
    noise_sigma: float = 0.0
    blur_sigma: float = 0.8
    bond_number: float = 0.0
    background: float = 215.0
    droplet_level: float = 25.0
    stage_level: float = 35.0

    def __post_init__(self):
        if not (0 <= self.baseline_row < self.height):
            raise ConfigInvalid(f"Ligne de base {self.baseline_row} hors de l'image")
        if self.scale_px < 30:
            raise ConfigInvalid(f"Échelle {self.scale_px} px < 30 px")
        if not (0.0 <= self.reflection <= 1.0):
            raise ConfigInvalid("Contraste du reflet hors de [0, 1]")

    @classmethod
    def from_dict(cls, data: Optional[Dict[str, Any]]) -> 'RenderParams':
        data = data or {}
        known = {k: v for k, v in data.items() if k in cls.__dataclass_fields__}
        try:
            return cls(**known)
        except TypeError as e:
            raise ConfigInvalid(f"Section render invalide: {e}") from e

    def replace(self, **changes) -> 'RenderParams':
        data = dict(self.__dict__)
        data.update(changes)
        return RenderParams(**data)


def _coverage(columns: np.ndarray, left: np.ndarray, right: np.ndarray) -> np.ndarray:
    """Recouvrement de chaque pixel [c−0.5, c+0.5] par l'intervalle [left, right]"""
    lo = np.maximum(columns[None, :] - 0.5, left[:, None])
    hi = np.minimum(columns[None, :] + 0.5, right[:, None])
    return np.clip(hi - lo, 0.0, 1.0)


def render_droplet(theta: float, rp: RenderParams, rng: Optional[np.random.Generator] = None) -> np.ndarray:
    """Image 8 bits d'une goutte d'angle `theta` (degrés) selon les paramètres rp"""
    if not (10.0 < theta < 170.0):
        raise LabError(f"Angle de rendu hors de ]10, 170[: {theta}")

    profile = dense_profile(rp.bond_number).profile
    phi_t = math.radians(theta)
    keep = profile.phi < phi_t
    z_prof = np.append(profile.z[keep], np.interp(phi_t, profile.phi, profile.z))
    x_prof = np.append(profile.x[keep], np.interp(phi_t, profile.phi, profile.x))

    b = rp.scale_px
    H, W = rp.height, rp.width
    cx = (W - 1) / 2.0 if rp.center_x is None else float(rp.center_x)
    y0 = rp.baseline_row - 0.5
    drop_h = b * z_prof[-1]
    y_apex = y0 - drop_h
    max_hw = b * x_prof.max()

    gap = 0.08 * max_hw + 6.0
    band = 0.5 * max_hw + 10.0
    depth = 0.15 * max_hw + 8.0
    lobe_h = drop_h if rp.reflection > 0 else 0.0
    _check_frame(rp, cx, y_apex, y0 + max(lobe_h, depth), max_hw + gap + band)

    rows = np.arange(H, dtype=float)
    columns = np.arange(W, dtype=float)
    ys = (rows[:, None] + np.asarray(SUBROWS)[None, :]).ravel()

    # demi-largeur de la goutte et de son reflet par sous-ligne
    depth_from_apex = np.where(ys < y0, ys - y_apex, (2 * y0 - ys) - y_apex)
    inside = (depth_from_apex >= 0) & (depth_from_apex <= drop_h)
    hw = np.where(inside, b * np.interp(depth_from_apex / b, z_prof, x_prof), 0.0)
    cov = _coverage(columns, cx - hw, cx + hw)
    cov[~inside] = 0.0
    is_drop = (ys < y0)[:, None]
    n_sub = len(SUBROWS)
    drop_cov = np.where(is_drop, cov, 0.0).reshape(H, n_sub, W).mean(axis=1)
    lobe_cov = np.where(is_drop, 0.0, cov).reshape(H, n_sub, W).mean(axis=1)

    # platines : rectangles finis de part et d'autre de la fenêtre
    row_cov = np.clip(np.minimum(rows + 0.5, y0 + depth) - np.maximum(rows - 0.5, y0), 0.0, 1.0)
    inner, outer = max_hw + gap, max_hw + gap + band
    col_cov = (
        _coverage(columns, np.array([cx - outer]), np.array([cx - inner]))[0]
        + _coverage(columns, np.array([cx + inner]), np.array([cx + outer]))[0]
    )
    stage_cov = row_cov[:, None] * col_cov[None, :]

    contrast = rp.background - rp.droplet_level
    image = (
        rp.background
        - contrast * drop_cov
        - rp.reflection * contrast * lobe_cov
        - (rp.background - rp.stage_level) * stage_cov
    )

    if rp.tilt_deg:
        a = math.radians(rp.tilt_deg)
        matrix = np.array([[math.cos(a), -math.sin(a)], [math.sin(a), math.cos(a)]])
        centre = np.array([(H - 1) / 2.0, (W - 1) / 2.0])
        image = ndimage.affine_transform(
            image, matrix, offset=centre - matrix @ centre, order=1, mode="nearest"
        )
    if rp.blur_sigma > 0:
        image = ndimage.gaussian_filter(image, sigma=rp.blur_sigma, truncate=3.0)
    if rp.noise_sigma > 0:
        rng = rng if rng is not None else np.random.default_rng(0)
        image = image + rng.normal(0.0, rp.noise_sigma, size=image.shape)

    return np.clip(np.rint(image), 0, 255).astype(np.uint8)


def _check_frame(rp: RenderParams, cx: float, top: float, bottom: float, half_width: float):
    """La scène (goutte, reflet, platines), une fois inclinée, doit rester dans l'image"""
    H, W = rp.height, rp.width
    centre = np.array([(W - 1) / 2.0, (H - 1) / 2.0])
    corners = np.array([
        [cx - half_width, top], [cx + half_width, top],
        [cx - half_width, bottom], [cx + half_width, bottom],
    ])
    a = math.radians(rp.tilt_deg)
    rot = np.array([[math.cos(a), -math.sin(a)], [math.sin(a), math.cos(a)]])
    moved = (corners - centre) @ rot.T + centre
    margin = 3.0 + 3.0 * rp.blur_sigma
    if (moved[:, 0].min() < margin or moved[:, 0].max() > W - 1 - margin
            or moved[:, 1].min() < margin or moved[:, 1].max() > H - 1 - margin):
        raise DropletOutOfFrame(
            f"Scène hors cadre (x {moved[:, 0].min():.0f}..{moved[:, 0].max():.0f}, "
            f"y {moved[:, 1].min():.0f}..{moved[:, 1].max():.0f}) pour une image {W}x{H}"
        )
