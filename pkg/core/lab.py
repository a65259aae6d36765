"""
core/lab.py
Laboratoire virtuel : modèles formulation -> angle de contact calibrés,
expériences simulées (mode numérique ou photoréaliste) et modèle de cadence
"""

import logging
import math
import queue
import threading
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from .errors import ConfigInvalid, GoniolabError, LabError, LabFault, UnknownComponent
from .formulation import Formulation, StageMap
from .imaging import MeasurementResult, PipelineParams, measure_contact_angle
from .render import RenderParams, render_droplet

logger = logging.getLogger(__name__)

THETA_MIN, THETA_MAX = 5.0, 175.0
MODES = ("numeric", "photorealistic")

# Moyennes par niveau du porte-échantillons moins la moyenne générale (eau, 45 gouttes)
TABLE_S2_LEVEL_BIAS = {"A": -0.333, "B": -0.482, "C": -0.463, "D": 0.166, "E": 1.113}


def calibrate_ethanol(
    theta_water: float,
    anchor_high: Tuple[float, float] = (99.6, 32.0),
    anchor_mid: Tuple[float, float] = (32.5, 87.5)
) -> Tuple[float, float]:
    """Résout (θ_plancher, p) de θ(c) = θ_eau − (θ_eau − θ_plancher)·(c/100)^p sur deux points"""
    (c_hi, t_hi), (c_mid, t_mid) = anchor_high, anchor_mid
    drop_hi, drop_mid = theta_water - t_hi, theta_water - t_mid
    if drop_hi <= 0 or drop_mid <= 0 or c_hi == c_mid:
        raise ConfigInvalid("Points d'ancrage éthanol incohérents")
    p = math.log(drop_hi / drop_mid) / math.log(c_hi / c_mid)
    amplitude = drop_hi / (c_hi / 100.0) ** p
    return theta_water - amplitude, p


@dataclass
class SurfactantParams:
    """Terme de pression de surface π(c) = A·(1 − exp(−c/c0)) en cos θ"""
    amplitude: float
    c0: float
    plateau_deg: Optional[float] = None

    def pressure(self, c: float) -> float:
        return self.amplitude * (1.0 - math.exp(-c / self.c0)) if c > 0 else 0.0

    @classmethod
    def from_dict(cls, data: Dict[str, Any], theta_water: float) -> 'SurfactantParams':
        try:
            c0 = float(data["c0"])
            if "amplitude" in data:
                amplitude = float(data["amplitude"])
                plateau = None
            else:
                plateau = float(data["plateau_deg"])
                amplitude = math.cos(math.radians(plateau)) - math.cos(math.radians(theta_water))
        except (KeyError, TypeError, ValueError) as e:
            raise ConfigInvalid(f"Tensioactif mal décrit: {data!r}") from e
        if c0 <= 0 or amplitude < 0:
            raise ConfigInvalid(f"Tensioactif : c0 > 0 et amplitude >= 0 requis ({data!r})")
        return cls(amplitude=amplitude, c0=c0, plateau_deg=plateau)


def default_surfactants(theta_water: float = 104.0) -> Dict[str, SurfactantParams]:
    specs = {
        "SDS99": {"plateau_deg": 72.0, "c0": 0.08},
        "SDS94": {"plateau_deg": 86.0, "c0": 0.012},
        "Tween20": {"amplitude": 0.23926, "c0": 0.03764},
        "Tween20HP": {"amplitude": 0.23926, "c0": 0.03764},
        "TritonX100": {"plateau_deg": 48.0, "c0": 0.01},
        "DGO": {"plateau_deg": 40.0, "c0": 0.008},
    }
    return {name: SurfactantParams.from_dict(spec, theta_water) for name, spec in specs.items()}


@dataclass
class ResponseModel:
    """Réponse simulée : additivité des tensioactifs en cos θ avec saturation,
    combinée à l'éthanol par un maximum doux (exact sur chaque axe pur)"""
    theta_water: float = 104.0
    ethanol_name: str = "ethanol"
    theta_floor: Optional[float] = None
    exponent: Optional[float] = None
    surfactants: Dict[str, SurfactantParams] = field(default_factory=default_surfactants)
    mixing_tau: float = 0.15
    noise_sd: float = 0.805

    def __post_init__(self):
        if self.theta_floor is None or self.exponent is None:
            self.theta_floor, self.exponent = calibrate_ethanol(self.theta_water)
        if self.noise_sd < 0 or self.mixing_tau <= 0:
            raise ConfigInvalid("noise_sd >= 0 et mixing_tau > 0 requis")

    @property
    def components(self) -> List[str]:
        return [self.ethanol_name] + list(self.surfactants)

    def ethanol_theta(self, c: float) -> float:
        c = min(max(c, 0.0), 100.0)
        return self.theta_water - (self.theta_water - self.theta_floor) * (c / 100.0) ** self.exponent

    def theta(self, f: Formulation) -> float:
        """Angle de contact sans bruit (degrés)"""
        cos_w = math.cos(math.radians(self.theta_water))
        pi_surf = 0.0
        pi_eth = 0.0
        for name, c in f.components.items():
            if name == self.ethanol_name:
                pi_eth = math.cos(math.radians(self.ethanol_theta(c))) - cos_w
            elif name in self.surfactants:
                pi_surf += self.surfactants[name].pressure(c)
            elif name != "water":
                raise UnknownComponent(f"Composant sans modèle de réponse: {name}")

        shift = _soft_max(pi_eth, pi_surf, self.mixing_tau)
        cos_t = min(max(cos_w + shift, math.cos(math.radians(THETA_MAX))), math.cos(math.radians(THETA_MIN)))
        return math.degrees(math.acos(cos_t))

    @classmethod
    def from_dict(cls, data: Optional[Dict[str, Any]]) -> 'ResponseModel':
        data = data or {}
        theta_water = float(data.get("theta_water", 104.0))
        surfactants = default_surfactants(theta_water)
        for name, spec in (data.get("surfactants") or {}).items():
            surfactants[name] = SurfactantParams.from_dict(spec, theta_water)
        ethanol = data.get("ethanol") or {}
        theta_floor = exponent = None
        if ethanol.get("anchor_high") or ethanol.get("anchor_mid"):
            theta_floor, exponent = calibrate_ethanol(
                theta_water,
                tuple(ethanol.get("anchor_high", (99.6, 32.0))),
                tuple(ethanol.get("anchor_mid", (32.5, 87.5))),
            )
        return cls(
            theta_water=theta_water,
            ethanol_name=ethanol.get("name", "ethanol"),
            theta_floor=theta_floor,
            exponent=exponent,
            surfactants=surfactants,
            mixing_tau=float(data.get("mixing_tau", 0.15)),
            noise_sd=float(data.get("noise_sd", 0.805)),
        )


def _soft_max(a: float, b: float, tau: float) -> float:
    """τ·ln(e^(a/τ) + e^(b/τ) − 1) : vaut a si b = 0 et b si a = 0, croissant en a et b"""
    if a == 0.0:
        return b
    if b == 0.0:
        return a
    m = max(a, b)
    return m + tau * math.log(math.exp((a - m) / tau) + math.exp((b - m) / tau) - math.exp(-m / tau))


def response_theta(model: ResponseModel, f: Formulation) -> float:
    return model.theta(f)


@dataclass
class SimulatedEnvironment:
    """Capteur de température / humidité de l'enceinte"""
    temperature_c: float = 22.5
    humidity_pct: float = 40.0
    drift_sd: float = 0.1

    def sample(self, rng: np.random.Generator) -> Dict[str, float]:
        return {
            "temperature_c": round(self.temperature_c + rng.normal(0.0, self.drift_sd), 2),
            "humidity_pct": round(self.humidity_pct + rng.normal(0.0, 5 * self.drift_sd), 1),
        }


@dataclass
class TimingModel:
    """Durées (s) : mélange et déplacement caméra par expérience, dépôt et capture par goutte,
    analyse par image (recouverte par la préparation suivante)"""
    mix: float = 75.0
    deposit: float = 18.0
    camera_move: float = 25.0
    capture: float = 9.0
    analyze: float = 6.0

    def __post_init__(self):
        for name in ("mix", "deposit", "camera_move", "capture"):
            if getattr(self, name) <= 0:
                raise ConfigInvalid(f"Durée '{name}' doit être > 0")
        if self.analyze < 0:
            raise ConfigInvalid("Durée 'analyze' doit être >= 0")

    def preparation(self, replicates: int) -> float:
        return self.mix + self.camera_move + replicates * (self.deposit + self.capture)

    @classmethod
    def from_dict(cls, data: Optional[Dict[str, Any]]) -> 'TimingModel':
        data = data or {}
        known = {k: float(v) for k, v in data.items() if k in cls.__dataclass_fields__}
        return cls(**known)


def simulate_throughput(tm: TimingModel, experiments: int, replicates: int) -> float:
    """Durée totale (s) d'une série : l'analyse de k chevauche la préparation de k+1"""
    prepared = analysed = 0.0
    for _ in range(experiments):
        prepared += tm.preparation(replicates)
        analysed = max(analysed, prepared) + replicates * tm.analyze
    return analysed


class VirtualLab:
    """Service d'expériences simulées"""

    def __init__(
        self,
        model: Optional[ResponseModel] = None,
        mode: str = "numeric",
        render_params: Optional[RenderParams] = None,
        pipeline_params: Optional[PipelineParams] = None,
        stage: Optional[StageMap] = None,
        stage_bias: Optional[Dict[str, float]] = None,
        environment: Optional[SimulatedEnvironment] = None,
        timing: Optional[TimingModel] = None
    ):
        if mode not in MODES:
            raise ConfigInvalid(f"Mode de laboratoire inconnu: {mode}")
        self.model = model or ResponseModel()
        self.mode = mode
        self.render_params = render_params or RenderParams()
        self.pipeline_params = pipeline_params or PipelineParams()
        self.stage = stage
        self.stage_bias = stage_bias or {}
        self.environment = environment or SimulatedEnvironment()
        self.timing = timing or TimingModel()

    @classmethod
    def from_config(cls, config: Dict[str, Any], mode: Optional[str] = None,
                    stage: Optional[StageMap] = None) -> 'VirtualLab':
        lab_cfg = config.get("lab") or {}
        bias = TABLE_S2_LEVEL_BIAS if lab_cfg.get("stage_bias") else {}
        env = lab_cfg.get("environment") or {}
        return cls(
            model=ResponseModel.from_dict(lab_cfg.get("response")),
            mode=mode or lab_cfg.get("mode", "numeric"),
            render_params=RenderParams.from_dict(config.get("render")),
            pipeline_params=PipelineParams.from_dict(config.get("image")),
            stage=stage,
            stage_bias=bias,
            environment=SimulatedEnvironment(**env),
            timing=TimingModel.from_dict(config.get("timing")),
        )

    def _true_angles(self, f: Formulation, n: int, rng: np.random.Generator,
                     slots: List[Optional[str]]) -> List[float]:
        theta = self.model.theta(f)
        angles = []
        for slot in slots[:n]:
            value = theta + rng.normal(0.0, self.model.noise_sd) if self.model.noise_sd > 0 else theta
            if slot and self.stage_bias and self.stage is not None:
                value += self.stage_bias.get(self.stage.level_of(slot), 0.0)
            angles.append(value)
        return angles

    def run_experiment(
        self,
        f: Formulation,
        n: int,
        rng: np.random.Generator,
        slots: Optional[List[str]] = None,
        mode: Optional[str] = None
    ) -> List[MeasurementResult]:
        """n gouttes de la formulation f ; les emplacements sont réservés si un porte-échantillons est attaché"""
        if n < 1:
            raise LabError("Au moins un réplicat")
        mode = mode or self.mode
        if mode not in MODES:
            raise ConfigInvalid(f"Mode de laboratoire inconnu: {mode}")
        if slots is None:
            slots = self.stage.allocate_many(n) if self.stage is not None else [None] * n
        angles = self._true_angles(f, n, rng, list(slots))

        if mode == "numeric":
            return [
                MeasurementResult(
                    contact_angle_deg=float(min(max(a, 1.0), 179.0)),
                    rmse_px=0.0,
                    quality_flags={"numeric"},
                    replicate=i,
                    slot=slots[i],
                )
                for i, a in enumerate(angles)
            ]
        return self._photorealistic(angles, rng, list(slots))

    def _photorealistic(self, angles: List[float], rng: np.random.Generator,
                        slots: List[Optional[str]]) -> List[MeasurementResult]:
        """Rendu dans le fil principal, analyse dans un fil de travail alimenté par une file"""
        images: "queue.Queue[Optional[Tuple[int, np.ndarray]]]" = queue.Queue(maxsize=2)
        results: Dict[int, MeasurementResult] = {}
        errors: List[BaseException] = []

        def analyse():
            while True:
                item = images.get()
                if item is None:
                    return
                index, image = item
                try:
                    results[index] = measure_contact_angle(image, self.pipeline_params)
                except GoniolabError as e:
                    errors.append(e)

        worker = threading.Thread(target=analyse, name="analyse-images", daemon=True)
        worker.start()
        try:
            for i, angle in enumerate(angles):
                seed = int(rng.integers(0, 2 ** 31 - 1))
                theta = float(min(max(angle, 10.5), 169.5))
                images.put((i, render_droplet(theta, self.render_params, np.random.default_rng(seed))))
        finally:
            images.put(None)
            worker.join()

        if errors:
            raise LabFault(f"Analyse d'image en échec: {errors[0]}") from errors[0]
        out = []
        for i in range(len(angles)):
            res = results[i]
            res.replicate = i
            res.slot = slots[i]
            out.append(res)
        return out


def run_virtual_experiment(
    f: Formulation,
    n: int,
    mode: str,
    rng: np.random.Generator,
    lab: Optional[VirtualLab] = None
) -> List[MeasurementResult]:
    lab = lab or VirtualLab()
    return lab.run_experiment(f, n, rng, mode=mode)
