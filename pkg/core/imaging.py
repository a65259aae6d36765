"""
core/imaging.py
Chaîne de traitement d'image : niveaux de gris, filtre gaussien, Sobel,
recadrage 1000x1000, Otsu, contours, ligne de base, points de contact,
puis ajustement Bashforth-Adams (core/geometry.py)
"""

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Set, Tuple

import cv2
import numpy as np
from PIL import Image
from scipy import ndimage

from .errors import (
    AmbiguousContact,
    ConfigInvalid,
    DegenerateHistogram,
    EmptyImage,
    ImageTooSmall,
    ImagingError,
    InvertedImage,
    NoBaselineFound,
    NoForeground,
    RoiOutOfBounds,
)
from .geometry import MIN_ARC_POINTS, BAFit, fit_bashforth_adams, rotate_points, tilt_correct

logger = logging.getLogger(__name__)

LUMA = np.array([0.299, 0.587, 0.114])
FOREGROUND = 255


@dataclass
class PipelineParams:
    """Paramètres de la chaîne (section `image` de config.yaml)"""
    sigma: float = 2.0
    gradient_fraction: float = 0.25
    roi_margin: float = 0.10
    resize: int = 1000
    baseline_min_support: float = 0.20
    baseline_min_count: int = 20
    max_tilt_deg: float = 15.0
    contact_tolerance_px: float = 2.0
    contact_band_px: float = 3.0     # px natifs, zone floutée au contact exclue de l'ajustement
    hysteresis_px: float = 2.0
    smoothing: int = 5
    max_fev: int = 2000

    @classmethod
    def from_dict(cls, data: Optional[Dict[str, Any]]) -> 'PipelineParams':
        data = data or {}
        known = {k: v for k, v in data.items() if k in cls.__dataclass_fields__}
        try:
            params = cls(**known)
        except TypeError as e:
            raise ConfigInvalid(f"Section image invalide: {e}") from e
        if params.sigma <= 0 or params.resize < 16:
            raise ConfigInvalid("image.sigma > 0 et image.resize >= 16 requis")
        return params


# =============================================================================
# TYPES
# =============================================================================

@dataclass
class Roi:
    x: int
    y: int
    w: int
    h: int

    def to_native(self, x: float, y: float, size: int) -> Tuple[float, float]:
        """Coordonnées de l'image redimensionnée -> image d'origine (centres de pixels)"""
        return (
            self.x + (x + 0.5) * self.w / size - 0.5,
            self.y + (y + 0.5) * self.h / size - 0.5,
        )


@dataclass
class Contour:
    """Contour ordonné (x, y) ; fermé pour les bords extérieurs"""
    points: np.ndarray
    closed: bool = True

    def __len__(self) -> int:
        return len(self.points)

    @property
    def area(self) -> float:
        return float(cv2.contourArea(self.points.astype(np.float32).reshape(-1, 1, 2)))

    def length(self) -> float:
        """Longueur de la chaîne de Freeman, pas droits 0.948 et diagonaux 1.343 (Kulpa)"""
        pts = self.points
        if self.closed:
            pts = np.vstack([pts, pts[:1]])
        steps = np.abs(np.diff(pts, axis=0))
        diagonal = (steps[:, 0] > 0) & (steps[:, 1] > 0)
        return float(np.where(diagonal, 1.343, 0.948).sum())


@dataclass
class BaselineEstimate:
    """Ligne de base y = y_row + pente·(x − x_ref)"""
    y_row: float
    tilt_deg: float
    x_ref: float = 0.0
    support_px: float = 0.0
    inliers: int = 0

    @property
    def slope(self) -> float:
        return math.tan(math.radians(self.tilt_deg))

    def row_at(self, x: float) -> float:
        return self.y_row + self.slope * (x - self.x_ref)


@dataclass
class ContactPoints:
    left: Tuple[float, float]
    right: Tuple[float, float]
    arc: np.ndarray
    changes_left: List[Tuple[float, float]] = field(default_factory=list)
    changes_right: List[Tuple[float, float]] = field(default_factory=list)
    super_90: bool = False
    flags: Set[str] = field(default_factory=set)


@dataclass
class MeasurementResult:
    """Observation renvoyée par la chaîne (ou par le mode numérique du labo virtuel)"""
    contact_angle_deg: float
    rmse_px: float
    left_cp: Optional[Tuple[float, float]] = None
    right_cp: Optional[Tuple[float, float]] = None
    bond_number: float = 0.0
    apex: Optional[Tuple[float, float]] = None
    quality_flags: Set[str] = field(default_factory=set)
    fit: Optional[BAFit] = None
    replicate: int = 0
    slot: Optional[str] = None

    def __post_init__(self):
        if not (0 < self.contact_angle_deg < 180):
            raise ImagingError(f"Angle hors de ]0, 180[: {self.contact_angle_deg}")
        if self.rmse_px < 0:
            raise ImagingError("RMSE négative")

    def to_dict(self) -> Dict[str, Any]:
        return {
            "angle_deg": self.contact_angle_deg,
            "rmse_px": self.rmse_px,
            "left_cp": list(self.left_cp) if self.left_cp is not None else None,
            "right_cp": list(self.right_cp) if self.right_cp is not None else None,
            "bond_number": self.bond_number,
            "flags": sorted(self.quality_flags),
        }


# =============================================================================
# E/S
# =============================================================================

def load_image(path: Path) -> np.ndarray:
    """Lit un PNG 8 bits (gris ou couleur)"""
    if not path.exists():
        raise ImagingError(f"Image non trouvée: {path}")
    with Image.open(path) as img:
        if img.mode not in ("L", "RGB"):
            img = img.convert("RGB")
        return np.asarray(img).copy()


def save_image(path: Path, image: np.ndarray):
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(np.asarray(image, dtype=np.uint8)).save(path)


# =============================================================================
# ÉTAPES
# =============================================================================

def to_gray(raw: Any) -> np.ndarray:
    """Luminance (poids 0.299/0.587/0.114) en flottants ; canal alpha ignoré"""
    img = np.asarray(raw)
    if img.size == 0:
        raise EmptyImage("Image vide")
    if img.ndim == 3:
        if img.shape[2] < 3:
            img = img[:, :, 0]
        else:
            return img[:, :, :3].astype(np.float64) @ LUMA
    if img.ndim != 2:
        raise ImagingError(f"Dimensions d'image non supportées: {img.shape}")
    return img.astype(np.float64)


def preprocess(raw: Any, sigma: float) -> np.ndarray:
    """Niveaux de gris + filtre gaussien tronqué à 3σ (flottants, dimensions inchangées)"""
    if sigma <= 0:
        raise ImagingError(f"sigma doit être > 0 ({sigma})")
    return ndimage.gaussian_filter(to_gray(raw), sigma=sigma, truncate=3.0)


def sobel_magnitude(g: np.ndarray) -> np.ndarray:
    """Norme du gradient de Sobel 3x3, bords par réplication"""
    g = np.asarray(g, dtype=np.float64)
    if g.ndim != 2 or g.shape[0] < 3 or g.shape[1] < 3:
        raise ImageTooSmall(f"Image {g.shape} : 3x3 minimum")
    gx = ndimage.sobel(g, axis=1, mode="nearest")
    gy = ndimage.sobel(g, axis=0, mode="nearest")
    return np.hypot(gx, gy)


def check_backlight(gray: np.ndarray):
    """Le haut de l'image doit être du fond clair (rétroéclairage)"""
    h = gray.shape[0]
    border = np.concatenate([gray[0, :], gray[: max(h // 2, 1), 0], gray[: max(h // 2, 1), -1]])
    low, high = np.percentile(gray, [1, 99])
    if high - low > 0 and border.mean() < (low + high) / 2.0:
        raise InvertedImage("Bord supérieur sombre : image inversée ?")


def locate_droplet_roi(
    gradient: np.ndarray,
    fraction: float = 0.25,
    margin: float = 0.10
) -> Tuple[Roi, bool]:
    """Carré autour de la plus grande région de fort gradient ne touchant pas le bord.

    Retourne (roi, repli) ; repli=True si toutes les régions touchent le bord.
    """
    peak = float(gradient.max()) if gradient.size else 0.0
    if peak <= 0:
        raise NoForeground("Aucun gradient : image uniforme")
    H, W = gradient.shape
    labels, count = ndimage.label(gradient >= fraction * peak, structure=np.ones((3, 3)))
    sizes = np.bincount(labels.ravel(), minlength=count + 1)
    boxes = ndimage.find_objects(labels)

    best, best_size, fallback = None, -1, False
    for idx, box in enumerate(boxes, start=1):
        rows, cols = box
        touches = rows.start == 0 or cols.start == 0 or rows.stop == H or cols.stop == W
        if not touches and sizes[idx] > best_size:
            best, best_size = box, sizes[idx]
    if best is None:
        fallback = True
        idx = int(np.argmax(sizes[1:])) + 1
        best = boxes[idx - 1]
        logger.warning("ROI : toutes les régions touchent le bord, repli sur la plus grande")

    rows, cols = best
    w, h = cols.stop - cols.start, rows.stop - rows.start
    side = int(math.ceil(max(w, h) * (1 + 2 * margin)))
    side = max(2, min(side, W, H))
    cx, cy = (cols.start + cols.stop) / 2.0, (rows.start + rows.stop) / 2.0
    x = int(min(max(math.floor(cx - side / 2.0), 0), W - side))
    y = int(min(max(math.floor(cy - side / 2.0), 0), H - side))
    return Roi(x, y, side, side), fallback


def crop_and_resize(g: np.ndarray, roi: Roi, size: int = 1000) -> np.ndarray:
    """Recadre la ROI et la rééchantillonne (bilinéaire) en size x size, 8 bits"""
    H, W = g.shape[:2]
    if (roi.x < 0 or roi.y < 0 or roi.w < 1 or roi.h < 1
            or roi.x + roi.w > W or roi.y + roi.h > H or roi.w * roi.h < 4):
        raise RoiOutOfBounds(f"ROI {roi} hors de l'image {W}x{H}")
    crop = np.asarray(g[roi.y:roi.y + roi.h, roi.x:roi.x + roi.w], dtype=np.float32)
    resized = cv2.resize(crop, (size, size), interpolation=cv2.INTER_LINEAR)
    return np.clip(np.rint(resized), 0, 255).astype(np.uint8)


def otsu_threshold(g: np.ndarray) -> Tuple[int, np.ndarray]:
    """Seuil d'Otsu exact (arithmétique entière) ; pixel <= seuil -> premier plan (255)"""
    img = np.asarray(g)
    if img.size == 0:
        raise EmptyImage("Image vide")
    if img.dtype != np.uint8:
        img = np.clip(np.rint(img), 0, 255).astype(np.uint8)

    hist = np.bincount(img.ravel(), minlength=256).astype(np.int64)
    if np.count_nonzero(hist) < 2:
        raise DegenerateHistogram("Un seul niveau de gris")

    total = int(hist.sum())
    total_sum = int(np.dot(np.arange(256, dtype=np.int64), hist))
    best_t, best_num, best_den = 0, -1, 1
    n0 = s0 = 0
    for t in range(256):
        n0 += int(hist[t])
        s0 += t * int(hist[t])
        n1 = total - n0
        if n0 == 0 or n1 == 0:
            continue
        # variance inter-classes ∝ (N·S0 − n0·S)² / (n0·n1)
        num = (total * s0 - n0 * total_sum) ** 2
        den = n0 * n1
        if num * best_den > best_num * den:
            best_t, best_num, best_den = t, num, den

    binary = np.where(img <= best_t, FOREGROUND, 0).astype(np.uint8)
    return best_t, binary


def extract_contours(b: np.ndarray) -> List[Contour]:
    """Bords extérieurs des composantes de premier plan, la plus grande aire en premier"""
    binary = (np.asarray(b) > 0).astype(np.uint8)
    if not binary.any():
        raise NoForeground("Image binaire sans premier plan")
    found = cv2.findContours(binary, cv2.RETR_EXTERNAL, cv2.CHAIN_APPROX_NONE)
    raw = found[0] if len(found) == 2 else found[1]
    contours = [
        Contour(points=c.reshape(-1, 2).astype(np.float64))
        for c in raw if len(c) >= 3
    ]
    if not contours:
        raise NoForeground("Aucun contour exploitable")
    contours.sort(key=lambda c: c.area, reverse=True)
    return contours


def detect_baseline(
    b: np.ndarray,
    min_support: float = 0.20,
    max_tilt_deg: float = 15.0,
    min_count: int = 20,
    angle_step: float = 0.1
) -> BaselineEstimate:
    """Ligne de base : segment quasi horizontal de bords supérieurs le plus étendu.

    Recherche de Hough sur les pixels de bord supérieur (±15°, pas 0.1°, casiers
    de 1 px), puis moindres carrés sur les pixels à ±1.5 px de la ligne retenue.
    """
    fg = np.asarray(b) > 0
    H, W = fg.shape
    top = np.zeros_like(fg)
    top[1:] = fg[1:] & ~fg[:-1]
    ys, xs = np.nonzero(top)
    if len(xs) < 2:
        raise NoBaselineFound("Aucun bord horizontal")

    angles = np.radians(np.arange(-max_tilt_deg, max_tilt_deg + 1e-9, angle_step))
    r = ys[None, :] * np.cos(angles)[:, None] - xs[None, :] * np.sin(angles)[:, None]
    bins = np.floor(r).astype(np.int64)
    offset = bins.min()
    width = int(bins.max() - offset + 1)
    keys = (np.arange(len(angles))[:, None] * width + (bins - offset)).ravel()
    xs_rep = np.broadcast_to(xs, bins.shape).ravel()

    n_keys = len(angles) * width
    counts = np.bincount(keys, minlength=n_keys)
    xmin = np.full(n_keys, np.iinfo(np.int64).max)
    xmax = np.full(n_keys, -1)
    np.minimum.at(xmin, keys, xs_rep)
    np.maximum.at(xmax, keys, xs_rep)

    span = np.where(counts >= min_count, xmax - xmin, -1)
    if span.max() < 0:
        raise NoBaselineFound(f"Aucun alignement d'au moins {min_count} pixels")
    # plus grande étendue, puis plus grand effectif, puis angle le plus faible
    angle_idx = np.arange(n_keys) // width
    tilt_rank = -np.abs(np.degrees(angles))[angle_idx]
    best = int(np.lexsort((tilt_rank, counts, span))[-1])
    a_idx, bin_idx = divmod(best, width)

    centre = bin_idx + offset + 0.5
    inl = np.abs(r[a_idx] - centre) <= 1.5
    x_in, y_in = xs[inl].astype(float), ys[inl].astype(float) - 0.5
    support = float(x_in.max() - x_in.min()) if len(x_in) else 0.0
    if support < min_support * W:
        raise NoBaselineFound(f"Ligne de base supportée par {support:.0f} px < {min_support:.0%} de {W}")

    slope, intercept = np.polyfit(x_in, y_in, 1)
    tilt = math.degrees(math.atan(slope))
    if abs(tilt) >= max_tilt_deg:
        raise NoBaselineFound(f"Inclinaison {tilt:.2f}° hors limite")

    x_ref = (W - 1) / 2.0
    y_row = float(slope * x_ref + intercept)
    if not (0 <= y_row < H):
        raise NoBaselineFound(f"Ligne de base hors image (y={y_row:.1f})")
    return BaselineEstimate(y_row=y_row, tilt_deg=tilt, x_ref=x_ref, support_px=support, inliers=int(inl.sum()))


# =============================================================================
# POINTS DE CONTACT
# =============================================================================

def _direction_changes(values: np.ndarray, hysteresis: float) -> List[Tuple[int, int]]:
    """Plateaux (début, fin) des extrema d'un zigzag avec hystérésis (à 0.5 px près)"""
    changes: List[Tuple[int, int]] = []
    direction = 0
    ext_val, ext_idx = values[0], 0
    for i in range(1, len(values)):
        v = values[i]
        if direction == 0:
            if v - values[0] >= hysteresis:
                direction, ext_val, ext_idx = 1, v, i
            elif values[0] - v >= hysteresis:
                direction, ext_val, ext_idx = -1, v, i
            continue
        if (direction > 0 and v > ext_val) or (direction < 0 and v < ext_val):
            ext_val, ext_idx = v, i
        elif abs(v - ext_val) >= hysteresis:
            lo = hi = ext_idx
            while lo > 0 and abs(values[lo - 1] - ext_val) <= 0.5:
                lo -= 1
            while hi < i and abs(values[hi + 1] - ext_val) <= 0.5:
                hi += 1
            changes.append((lo, hi))
            direction = -direction
            ext_val, ext_idx = v, i
    return changes


def _side_path(level: np.ndarray, apex: int, step: int, y_stop: float) -> np.ndarray:
    """Indices parcourus depuis l'apex dans un sens jusqu'à y > y_stop"""
    n = len(level)
    out = []
    for k in range(n):
        idx = (apex + step * k) % n
        if level[idx, 1] > y_stop:
            break
        out.append(idx)
    return np.asarray(out, dtype=int)


def row_widths(level: np.ndarray, y_max: float) -> Tuple[np.ndarray, np.ndarray]:
    """(lignes, largeurs) du contour nivelé, lignes arrondies <= y_max"""
    rows = np.round(level[:, 1]).astype(int)
    keep = rows <= y_max
    rows, xs = rows[keep], level[keep, 0]
    if len(rows) == 0:
        return np.zeros(0, dtype=int), np.zeros(0)
    order = np.argsort(rows, kind="stable")
    rows_sorted, xs_sorted = rows[order], xs[order]
    uniq, first = np.unique(rows_sorted, return_index=True)
    widths = np.maximum.reduceat(xs_sorted, first) - np.minimum.reduceat(xs_sorted, first)
    return uniq, widths


def is_super_90(level: np.ndarray, y_trust: float, hysteresis: float) -> bool:
    """Largeur maximale strictement au-dessus de la ligne de base (> 90°).

    Seules les lignes au-dessus de y_trust comptent (ni reflet ni bande floue) ;
    la goutte est > 90° si la largeur maximale dépasse de plus de 2·hystérésis
    celle de la dernière ligne retenue.
    """
    rows, widths = row_widths(level, y_trust)
    if len(rows) == 0:
        return False
    return bool(widths.max() - widths[-1] > 2.0 * hysteresis)


def find_contact_points(
    c: Contour,
    base: BaselineEstimate,
    tolerance: float = 2.0,
    hysteresis: float = 2.0,
    smoothing: int = 5,
    band: float = 0.0
) -> ContactPoints:
    """Points de contact par changements de direction de x depuis l'apex vers chaque bord.

    Goutte < 90° : 1er changement ; goutte > 90° : 2e (le 1er étant l'équateur).
    Seuls comptent les changements dont le plateau atteint la ligne de base à
    max(tolerance, band) près ; le point retenu est projeté sur la ligne de base.
    `band` (px) est la hauteur de la zone floutée au contact, ignorée pour le
    classement > 90°.
    """
    pts = np.asarray(c.points, dtype=float)
    if len(pts) < 3:
        raise AmbiguousContact("Contour trop court")
    # repère nivelé : ligne de base horizontale à y_row
    centre = (base.x_ref, base.y_row)
    level = rotate_points(pts, -base.tilt_deg, centre)
    y_row = base.y_row

    y_min = level[:, 1].min()
    if y_min >= y_row:
        raise AmbiguousContact("Aucune goutte au-dessus de la ligne de base")
    on_top = level[:, 1] <= y_min + 0.5
    starts = np.nonzero(on_top & ~np.roll(on_top, 1))[0]
    if len(starts) == 0:
        raise AmbiguousContact("Sommet indéterminé")
    start = int(starts[0])
    run = 0
    while run < len(level) and on_top[(start + run) % len(level)]:
        run += 1
    apex = (start + run // 2) % len(level)

    height = y_row - y_min
    window = max(tolerance, band)
    y_stop = y_row + max(0.25 * height, 4.0 * hysteresis + window)
    super_90 = is_super_90(level, y_row - max(band, hysteresis), hysteresis)
    rank = 1 if super_90 else 0

    flags: Set[str] = set()
    sides = {}
    for step in (1, -1):
        path = _side_path(level, apex, step, y_stop)
        if len(path) < 3:
            raise AmbiguousContact("Contour trop court sous l'apex")
        ys = level[path, 1]
        xs = ndimage.uniform_filter1d(level[path, 0], size=smoothing, mode="nearest")
        # changements côté goutte uniquement : le reflet est plus bas
        changes = [(lo, hi) for lo, hi in _direction_changes(xs, hysteresis)
                   if ys[lo:hi + 1].min() <= y_row + window]

        # point de chaque plateau le plus proche de la ligne de base
        near = [lo + int(np.argmin(np.abs(ys[lo:hi + 1] - y_row))) for lo, hi in changes]
        touching = [j for j, k in enumerate(near) if abs(ys[k] - y_row) <= window]
        if rank in touching:
            chosen = near[rank]
        elif touching:
            chosen = min((near[j] for j in touching), key=lambda k: abs(ys[k] - y_row))
            flags.add("contact_fallback")
        else:
            crossing = np.nonzero(ys >= y_row)[0]
            if len(crossing) == 0:
                raise AmbiguousContact("Aucun changement de direction près de la ligne de base")
            chosen = int(crossing[0])
            flags.add("reflection_missing")
        marks = [tuple(pts[path[(lo + hi) // 2]]) for lo, hi in changes]
        sides[step] = (path, chosen, marks)

    # côté gauche = x final le plus petit
    x_end = {step: level[sides[step][0][sides[step][1]], 0] for step in sides}
    left_step = 1 if x_end[1] < x_end[-1] else -1
    right_step = -left_step
    lp, lk, lchanges = sides[left_step]
    rp, rk, rchanges = sides[right_step]

    # projection des contacts sur la ligne de base, puis retour au repère image
    on_base = np.array([[x_end[left_step], y_row], [x_end[right_step], y_row]])
    left, right = rotate_points(on_base, base.tilt_deg, centre)

    arc_idx = np.concatenate([lp[:lk + 1][::-1], rp[1:rk + 1]])
    return ContactPoints(
        left=(float(left[0]), float(left[1])),
        right=(float(right[0]), float(right[1])),
        arc=pts[arc_idx],
        changes_left=lchanges,
        changes_right=rchanges,
        super_90=super_90,
        flags=flags,
    )


# =============================================================================
# COMPOSITION
# =============================================================================

def measure_contact_angle(raw: Any, params: Optional[PipelineParams] = None) -> MeasurementResult:
    """Image brute -> angle de contact statique"""
    params = params or PipelineParams()
    gray = to_gray(raw)
    check_backlight(gray)

    gradient = sobel_magnitude(preprocess(gray, params.sigma))
    roi, roi_fallback = locate_droplet_roi(gradient, params.gradient_fraction, params.roi_margin)

    gray8 = np.clip(np.rint(gray), 0, 255).astype(np.uint8)
    resized = crop_and_resize(gray8, roi, params.resize)
    threshold, binary = otsu_threshold(resized)
    contours = extract_contours(binary)
    base = detect_baseline(
        binary,
        min_support=params.baseline_min_support,
        max_tilt_deg=params.max_tilt_deg,
        min_count=params.baseline_min_count,
    )
    band = params.contact_band_px * params.resize / roi.w
    cps = find_contact_points(
        contours[0], base,
        tolerance=params.contact_tolerance_px,
        hysteresis=params.hysteresis_px,
        smoothing=params.smoothing,
        band=band,
    )

    arc, rotation = tilt_correct(cps.arc, cps.left, cps.right, params.max_tilt_deg)
    midpoint = ((cps.left[0] + cps.right[0]) / 2.0, (cps.left[1] + cps.right[1]) / 2.0)
    level_cps = rotate_points([cps.left, cps.right], rotation, midpoint)
    baseline_y = float(level_cps[:, 1].mean())
    # la bande floutée au contact (pointe arrondie, col comblé) n'entre pas dans l'ajustement
    trimmed = arc[arc[:, 1] <= baseline_y - band]
    if len(trimmed) >= MIN_ARC_POINTS:
        arc = trimmed
    fit = fit_bashforth_adams(arc, baseline_y, max_fev=params.max_fev)

    flags = set(cps.flags)
    if roi_fallback:
        flags.add("roi_fallback")
    if not fit.converged:
        flags.add("fit_not_converged")

    apex_native = rotate_points([fit.apex], -rotation, midpoint)[0]
    logger.debug(
        "Mesure : θ=%.2f° β=%.3f RMSE=%.3f px seuil=%d ROI=%s", fit.theta_deg, fit.bond_number,
        fit.rmse_px, threshold, roi,
    )
    return MeasurementResult(
        contact_angle_deg=fit.theta_deg,
        rmse_px=fit.rmse_px,
        left_cp=roi.to_native(*cps.left, params.resize),
        right_cp=roi.to_native(*cps.right, params.resize),
        bond_number=fit.bond_number,
        apex=roi.to_native(float(apex_native[0]), float(apex_native[1]), params.resize),
        quality_flags=flags,
        fit=fit,
    )
