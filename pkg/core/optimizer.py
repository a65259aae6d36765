"""
core/optimizer.py
Optimisation bayésienne sur espace discret : espace de recherche, cibles
normalisées, score de désirabilité, état de campagne et recommandations
"""

import itertools
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import (
    ConfigInvalid,
    DuplicateResult,
    EmptySpace,
    LengthMismatch,
    SpaceExhausted,
    SpaceTooLarge,
    UnknownFormulation,
)
from .formulation import Formulation, total_surfactant
from .stats import aggregate_replicates
from .surrogate import HyperPolicy, gp_fit, thompson_recommend

logger = logging.getLogger(__name__)

MAX_CANDIDATES = 1_000_000
MODES = ("match", "min", "max")
TRANSFORMATIONS = ("triangular", "bell", "linear")
OBJECTIVES = ("multi", "single")

# Critère "formulation optimale"
OPTIMAL_DESIRABILITY = 0.90
MEASUREMENT_SD = 0.805
OPTIMAL_TOLERANCE = 2 * MEASUREMENT_SD


# =============================================================================
# ESPACE DE RECHERCHE
# =============================================================================

@dataclass
class ParameterRange:
    """Plage [start, stop] échantillonnée au pas `step`"""
    name: str
    start: float
    stop: float
    step: float

    def __post_init__(self):
        if not self.name:
            raise ConfigInvalid("Paramètre sans nom")
        if not (self.step > 0) or not all(map(math.isfinite, (self.start, self.stop, self.step))):
            raise ConfigInvalid(f"{self.name}: pas {self.step} invalide")

    @property
    def count(self) -> int:
        if self.stop < self.start:
            return 0
        return int(math.floor((self.stop - self.start) / self.step + 1e-9)) + 1

    def values(self) -> List[float]:
        return [round(self.start + i * self.step, 10) for i in range(self.count)]

    def to_dict(self) -> Dict[str, Any]:
        return {"name": self.name, "start": self.start, "stop": self.stop, "step": self.step}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'ParameterRange':
        try:
            return cls(str(data["name"]), float(data["start"]), float(data["stop"]), float(data["step"]))
        except (KeyError, TypeError, ValueError) as e:
            raise ConfigInvalid(f"Plage mal formée: {data!r} ({e})") from e


class SearchSpace:
    """Grille cartésienne des formulations candidates (ordre lexicographique)"""

    def __init__(self, parameters: List[ParameterRange], candidates: np.ndarray):
        self.parameters = parameters
        self.candidates = candidates
        self.measured: set = set()
        self._lows = candidates.min(axis=0)
        spans = candidates.max(axis=0) - self._lows
        self._spans = np.where(spans > 0, spans, 1.0)
        self._index = {self.formulation(i).key(): i for i in range(len(candidates))}

    def __len__(self) -> int:
        return len(self.candidates)

    @property
    def names(self) -> List[str]:
        return [p.name for p in self.parameters]

    def formulation(self, index: int) -> Formulation:
        row = self.candidates[index]
        return Formulation({name: float(value) for name, value in zip(self.names, row)})

    def index_of(self, f: Formulation) -> Optional[int]:
        return self._index.get(f.key())

    def to_unit(self, indices: Any) -> np.ndarray:
        """Coordonnées normalisées dans le cube unité"""
        return (self.candidates[np.asarray(indices, dtype=int)] - self._lows) / self._spans

    def unmeasured(self) -> np.ndarray:
        if not self.measured:
            return np.arange(len(self.candidates))
        mask = np.ones(len(self.candidates), dtype=bool)
        mask[list(self.measured)] = False
        return np.flatnonzero(mask)

    def mark_measured(self, index: int):
        self.measured.add(int(index))


def build_search_space(specs: Sequence[Any], max_candidates: int = MAX_CANDIDATES) -> SearchSpace:
    """Énumère le produit cartésien des plages (dernier paramètre variant le plus vite)"""
    parameters = [s if isinstance(s, ParameterRange) else ParameterRange.from_dict(s) for s in specs]
    if not parameters:
        raise EmptySpace("Aucun paramètre")
    if len({p.name for p in parameters}) != len(parameters):
        raise ConfigInvalid("Noms de paramètres dupliqués")

    total = 1
    for p in parameters:
        if p.count == 0:
            raise EmptySpace(f"{p.name}: plage vide [{p.start}, {p.stop}]")
        total *= p.count
    if total > max_candidates:
        raise SpaceTooLarge(f"{total} candidats > {max_candidates}")

    grid = np.array(list(itertools.product(*(p.values() for p in parameters))), dtype=float)
    logger.debug("Espace de recherche : %d candidats", total)
    return SearchSpace(parameters, grid.reshape(total, len(parameters)))


# =============================================================================
# CIBLES ET DÉSIRABILITÉ
# =============================================================================

@dataclass
class TargetSpec:
    """Cible normalisée : mode, bornes, transformation et poids"""
    name: str
    mode: str = "match"
    value: Optional[float] = None
    bounds: Tuple[float, float] = (0.0, 1.0)
    transformation: Optional[str] = None
    weight: float = 1.0
    bell_k: float = 0.5

    def __post_init__(self):
        self.mode = self.mode.lower()
        if self.mode not in MODES:
            raise ConfigInvalid(f"{self.name}: mode '{self.mode}' inconnu")
        lower, upper = float(self.bounds[0]), float(self.bounds[1])
        self.bounds = (lower, upper)
        if not lower < upper:
            raise ConfigInvalid(f"{self.name}: bornes {self.bounds} invalides")
        if self.transformation is None:
            self.transformation = "triangular" if self.mode == "match" else "linear"
        if self.transformation not in TRANSFORMATIONS:
            raise ConfigInvalid(f"{self.name}: transformation '{self.transformation}' inconnue")
        if self.mode == "match":
            if self.value is None or not (lower <= self.value <= upper):
                raise ConfigInvalid(f"{self.name}: cible {self.value} hors des bornes {self.bounds}")
            if self.transformation == "linear":
                raise ConfigInvalid(f"{self.name}: transformation linéaire réservée à min/max")
        elif self.transformation != "linear":
            raise ConfigInvalid(f"{self.name}: {self.mode} exige une transformation linéaire")
        if not (self.weight > 0 and math.isfinite(self.weight)):
            raise ConfigInvalid(f"{self.name}: poids {self.weight} invalide")
        if not self.bell_k > 0:
            raise ConfigInvalid(f"{self.name}: bell_k doit être > 0")

    @property
    def half_width(self) -> float:
        return (self.bounds[1] - self.bounds[0]) / 2.0

    def to_dict(self) -> Dict[str, Any]:
        data = {
            "name": self.name,
            "mode": self.mode,
            "bounds": list(self.bounds),
            "transformation": self.transformation,
            "weight": self.weight,
        }
        if self.value is not None:
            data["value"] = self.value
        if self.transformation == "bell":
            data["bell_k"] = self.bell_k
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'TargetSpec':
        try:
            return cls(
                name=str(data["name"]),
                mode=str(data.get("mode", "match")),
                value=float(data["value"]) if data.get("value") is not None else None,
                bounds=tuple(data["bounds"]),
                transformation=data.get("transformation"),
                weight=float(data.get("weight", 1.0)),
                bell_k=float(data.get("bell_k", 0.5)),
            )
        except (KeyError, TypeError, ValueError) as e:
            raise ConfigInvalid(f"Cible mal formée: {data!r} ({e})") from e


def normalize_target(y: float, spec: TargetSpec) -> float:
    """Valeur brute -> t dans [0, 1]"""
    lower, upper = spec.bounds
    if spec.mode == "min":
        return min(max((upper - y) / (upper - lower), 0.0), 1.0)
    if spec.mode == "max":
        return min(max((y - lower) / (upper - lower), 0.0), 1.0)

    delta = spec.half_width
    distance = abs(y - spec.value)
    if spec.transformation == "triangular":
        return max(0.0, 1.0 - distance / delta)
    # cloche : t = 1/2 à k·Δ de la cible
    return math.exp(-math.log(2.0) * (distance / (spec.bell_k * delta)) ** 2)


def desirability(t: Sequence[float], w: Sequence[float]) -> float:
    """Moyenne géométrique pondérée D = (Π t_i^w_i)^(1/Σw_i)"""
    if len(t) != len(w) or len(t) == 0:
        raise LengthMismatch(f"{len(t)} cibles normalisées pour {len(w)} poids")
    if any(wi <= 0 for wi in w):
        raise LengthMismatch("Poids strictement positifs requis")
    if any(ti <= 0 for ti in t):
        return 0.0
    total = math.fsum(w)
    return math.exp(math.fsum(wi * math.log(min(ti, 1.0)) for ti, wi in zip(t, w)) / total)


class DesirabilityObjective:
    """Objectif multi-cibles ; la réduction mono-objectif garde la première cible `match`"""

    def __init__(self, targets: List[TargetSpec]):
        if not targets:
            raise ConfigInvalid("Aucune cible")
        if len({t.name for t in targets}) != len(targets):
            raise ConfigInvalid("Cibles dupliquées")
        self.targets = targets

    @property
    def weights(self) -> List[float]:
        return [t.weight for t in self.targets]

    @property
    def match_target(self) -> Optional[TargetSpec]:
        return next((t for t in self.targets if t.mode == "match"), None)

    def match_index(self) -> int:
        for i, t in enumerate(self.targets):
            if t.mode == "match":
                return i
        return 0

    def evaluate(self, measurements: Dict[str, float]) -> Tuple[List[float], float]:
        values = []
        for target in self.targets:
            if target.name not in measurements:
                raise ConfigInvalid(f"Mesure '{target.name}' absente")
            values.append(normalize_target(float(measurements[target.name]), target))
        return values, desirability(values, self.weights)

    def single_objective(self) -> 'DesirabilityObjective':
        return DesirabilityObjective([self.targets[self.match_index()]])


# =============================================================================
# CAMPAGNE
# =============================================================================

@dataclass
class HistoryRow:
    """Une expérience acceptée"""
    iteration: int
    experiment_id: int
    index: int
    formulation: Dict[str, float]
    angles: List[float]
    mean: float
    sd: float
    measurements: Dict[str, float]
    t: List[float]
    desirability: float

    def to_dict(self) -> Dict[str, Any]:
        return dict(self.__dict__)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'HistoryRow':
        return cls(**{k: data[k] for k in cls.__dataclass_fields__})


@dataclass
class CampaignRecord:
    """État complet et sérialisable d'une campagne"""
    id: str
    seed: int
    space: SearchSpace
    targets: List[TargetSpec]
    surfactants: List[str] = field(default_factory=list)
    objective: str = "multi"
    replicates: int = 3
    history: List[HistoryRow] = field(default_factory=list)
    status: str = "running"
    pending: Optional[Dict[str, int]] = None
    failed: List[Dict[str, Any]] = field(default_factory=list)
    next_experiment_id: int = 1
    hyper: HyperPolicy = field(default_factory=HyperPolicy)

    def __post_init__(self):
        if self.objective not in OBJECTIVES:
            raise ConfigInvalid(f"Objectif '{self.objective}' inconnu")
        self.desirability_objective = DesirabilityObjective(self.targets)

    @property
    def iteration(self) -> int:
        return len(self.history)

    def training_values(self) -> List[float]:
        if self.objective == "multi":
            return [row.desirability for row in self.history]
        k = self.desirability_objective.match_index()
        return [row.t[k] for row in self.history]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "id": self.id,
            "seed": self.seed,
            "objective": self.objective,
            "replicates": self.replicates,
            "space": [p.to_dict() for p in self.space.parameters],
            "targets": [t.to_dict() for t in self.targets],
            "surfactants": list(self.surfactants),
            "status": self.status,
            "pending": self.pending,
            "next_experiment_id": self.next_experiment_id,
            "failed": list(self.failed),
            "history": [row.to_dict() for row in self.history],
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any], max_candidates: int = MAX_CANDIDATES,
                  hyper: Optional[HyperPolicy] = None) -> 'CampaignRecord':
        space = build_search_space(data["space"], max_candidates)
        record = cls(
            id=str(data["id"]),
            seed=int(data["seed"]),
            space=space,
            targets=[TargetSpec.from_dict(t) for t in data["targets"]],
            surfactants=list(data.get("surfactants", [])),
            objective=data.get("objective", "multi"),
            replicates=int(data.get("replicates", 3)),
            history=[HistoryRow.from_dict(r) for r in data.get("history", [])],
            status=data.get("status", "running"),
            pending=data.get("pending"),
            failed=list(data.get("failed", [])),
            next_experiment_id=int(data.get("next_experiment_id", 1)),
            hyper=hyper or HyperPolicy(),
        )
        for row in record.history:
            space.mark_measured(row.index)
        return record


def campaign_from_config(
    config: Dict[str, Any],
    seed: int,
    objective: Optional[str] = None,
    max_candidates: Optional[int] = None,
    hyper: Optional[HyperPolicy] = None
) -> CampaignRecord:
    """Nouvelle campagne à partir du JSON de campagne (réactifs, réplicats, espace, cibles)"""
    max_candidates = int(max_candidates or config.get("max_candidates") or MAX_CANDIDATES)
    if not config.get("space"):
        raise ConfigInvalid("Section 'space' vide")
    if not config.get("targets"):
        raise ConfigInvalid("Section 'targets' vide")
    return CampaignRecord(
        id=str(config.get("id", "campaign")),
        seed=int(seed),
        space=build_search_space(config["space"], max_candidates),
        targets=[TargetSpec.from_dict(t) for t in config["targets"]],
        surfactants=list(config.get("surfactants", [])),
        objective=objective or config.get("objective", "multi"),
        replicates=int(config.get("replicates", 3)),
        hyper=hyper or HyperPolicy.from_dict(config.get("hyper")),
    )


def experiment_rng(seed: int, experiment_id: int) -> np.random.Generator:
    """Générateur propre à chaque expérience : la trajectoire se rejoue à l'identique"""
    return np.random.default_rng([int(seed), int(experiment_id)])


def recommend_next(campaign: CampaignRecord, rng: Optional[np.random.Generator] = None) -> Formulation:
    """Première recommandation aléatoire, puis échantillonnage de Thompson sur le GP"""
    if campaign.pending is not None:
        return campaign.space.formulation(campaign.pending["index"])

    pool = campaign.space.unmeasured()
    if len(pool) == 0:
        campaign.status = "exhausted"
        raise SpaceExhausted(f"Campagne {campaign.id}: tous les candidats sont mesurés")

    experiment_id = campaign.next_experiment_id
    rng = rng if rng is not None else experiment_rng(campaign.seed, experiment_id)
    if not campaign.history:
        index = int(pool[rng.integers(len(pool))])
    else:
        X = campaign.space.to_unit([row.index for row in campaign.history])
        gp = gp_fit(X, campaign.training_values(), campaign.hyper)
        index = thompson_recommend(gp, campaign.space, rng)

    campaign.pending = {"experiment_id": experiment_id, "index": index}
    campaign.next_experiment_id = experiment_id + 1
    return campaign.space.formulation(index)


def record_result(campaign: CampaignRecord, formulation: Formulation,
                  measurements: Dict[str, Any]) -> CampaignRecord:
    """Intègre le résultat de la recommandation en attente.

    `measurements` contient `angles_deg` (un angle par réplicat) et toute autre
    grandeur nommée par une cible (ex. `cost`).
    """
    index = campaign.space.index_of(formulation)
    if index is not None and index in campaign.space.measured:
        raise DuplicateResult(f"{formulation.label()} déjà mesurée")
    if campaign.pending is None or index != campaign.pending["index"]:
        raise UnknownFormulation(f"{formulation.label()} n'est pas la recommandation en attente")

    angles = [float(a) for a in measurements["angles_deg"]]
    mean, sd = aggregate_replicates(angles)
    values = {k: float(v) for k, v in measurements.items() if k != "angles_deg" and _is_number(v)}
    values["contact_angle"] = mean
    values["total_surfactant"] = total_surfactant(formulation, campaign.surfactants)
    t, D = campaign.desirability_objective.evaluate(values)

    row = HistoryRow(
        iteration=campaign.iteration + 1,
        experiment_id=campaign.pending["experiment_id"],
        index=index,
        formulation=formulation.to_dict(),
        angles=angles,
        mean=mean,
        sd=sd,
        measurements=values,
        t=t,
        desirability=D,
    )
    campaign.history.append(row)
    campaign.space.mark_measured(index)
    campaign.pending = None
    if len(campaign.space.unmeasured()) == 0:
        campaign.status = "exhausted"
    return campaign


def fail_pending(campaign: CampaignRecord, reason: str) -> Optional[Dict[str, Any]]:
    """Abandonne la recommandation en attente ; le candidat retourne dans le lot non mesuré"""
    if campaign.pending is None:
        return None
    entry = dict(campaign.pending, reason=reason)
    campaign.failed.append(entry)
    campaign.pending = None
    logger.warning("Expérience %s en échec : %s", entry["experiment_id"], reason)
    return entry


def is_optimal(row: HistoryRow, objective: DesirabilityObjective,
               threshold: float = OPTIMAL_DESIRABILITY, tolerance: float = OPTIMAL_TOLERANCE) -> bool:
    """D ≥ seuil et angle à moins de deux écarts-types de mesure de la cible"""
    target = objective.match_target
    if target is None:
        return row.desirability >= threshold
    return row.desirability >= threshold and abs(row.mean - target.value) <= tolerance


def in_band(row: HistoryRow, band: Tuple[float, float]) -> bool:
    return band[0] <= row.mean <= band[1]


def first_iteration(history: List[HistoryRow], predicate) -> Optional[int]:
    return next((row.iteration for row in history if predicate(row)), None)


def _is_number(value: Any) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool)
