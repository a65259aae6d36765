"""
core/formulation.py
Modèle de domaine : réactifs, formulations, deck, porte-échantillons,
calcul des volumes de travail et coût des formulations
"""

import logging
import math
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Tuple

from .errors import (
    ConcentrationExceedsStock,
    ConfigInvalid,
    MissingPrice,
    StageFull,
    SubPipettableVolume,
    UnknownReagent,
    VolumeOverflow,
)
from .utils import read_json

logger = logging.getLogger(__name__)

UNITS = ("%w/v", "vol%")
SLOT_FREE = "free"
SLOT_OCCUPIED = "occupied"
SLOT_SPENT = "spent"


@dataclass
class ReagentStock:
    """Solution mère posée sur le deck"""
    name: str
    stock_concentration: float
    unit: str = "%w/v"
    price_per_gram: Optional[float] = None
    grade: str = ""

    def __post_init__(self):
        if not self.name:
            raise ConfigInvalid("Réactif sans nom")
        if not (0 < self.stock_concentration <= 100):
            raise ConfigInvalid(
                f"{self.name}: concentration mère {self.stock_concentration} hors de ]0, 100]"
            )
        if self.unit not in UNITS:
            raise ConfigInvalid(f"{self.name}: unité inconnue '{self.unit}'")

    def to_dict(self) -> Dict[str, Any]:
        data = {"name": self.name, "stock": self.stock_concentration, "unit": self.unit}
        if self.price_per_gram is not None:
            data["price_per_g"] = self.price_per_gram
        if self.grade:
            data["grade"] = self.grade
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'ReagentStock':
        try:
            return cls(
                name=str(data["name"]),
                stock_concentration=float(data["stock"]),
                unit=data.get("unit", "%w/v"),
                price_per_gram=(
                    float(data["price_per_g"]) if data.get("price_per_g") is not None else None
                ),
                grade=str(data.get("grade", "")),
            )
        except (KeyError, TypeError, ValueError) as e:
            raise ConfigInvalid(f"Réactif mal formé: {data!r} ({e})") from e


@dataclass
class Formulation:
    """Mélange : réactif -> concentration (mêmes unités que la solution mère), complété à l'eau"""
    components: Dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        for name, value in self.components.items():
            if value < 0 or not math.isfinite(value):
                raise ConcentrationExceedsStock(f"{name}: concentration invalide {value}")

    def get(self, name: str, default: float = 0.0) -> float:
        return self.components.get(name, default)

    def key(self) -> Tuple[Tuple[str, float], ...]:
        """Clé canonique (ordre alphabétique), utilisable comme clé de dictionnaire"""
        return tuple(sorted((k, round(float(v), 10)) for k, v in self.components.items()))

    def to_dict(self) -> Dict[str, float]:
        return dict(self.components)

    @classmethod
    def from_dict(cls, data: Dict[str, float]) -> 'Formulation':
        return cls(components={str(k): float(v) for k, v in data.items()})

    def label(self) -> str:
        if not self.components:
            return "eau"
        return " + ".join(f"{name} {value:g}" for name, value in self.components.items())


class StageMap:
    """Porte-échantillons multi-niveaux (A-E x 9 positions par défaut).

    Toute mutation passe par un verrou : un seul écrivain à la fois.
    """

    def __init__(self, levels: Any = 5, positions_per_level: int = 9):
        if isinstance(levels, int):
            if not (1 <= levels <= 26):
                raise ConfigInvalid(f"Nombre de niveaux invalide: {levels}")
            labels = [chr(ord("A") + i) for i in range(levels)]
        else:
            labels = [str(label) for label in levels]
        if not labels or len(set(labels)) != len(labels):
            raise ConfigInvalid("Niveaux du porte-échantillons vides ou dupliqués")
        if positions_per_level < 1:
            raise ConfigInvalid(f"Positions par niveau invalides: {positions_per_level}")

        self.levels: List[str] = labels
        self.positions_per_level = positions_per_level
        self.occupancy: Dict[str, str] = {slot: SLOT_FREE for slot in self.slots()}
        self.resets = 0
        self._lock = threading.Lock()

    def slots(self) -> List[str]:
        """Emplacements dans l'ordre d'allocation (niveau puis position)"""
        return [
            f"{level}{pos}"
            for level in self.levels
            for pos in range(1, self.positions_per_level + 1)
        ]

    @property
    def capacity(self) -> int:
        return len(self.levels) * self.positions_per_level

    def free_count(self) -> int:
        return sum(1 for state in self.occupancy.values() if state == SLOT_FREE)

    def allocate(self) -> str:
        """Réserve le prochain emplacement libre"""
        with self._lock:
            for slot, state in self.occupancy.items():
                if state == SLOT_FREE:
                    self.occupancy[slot] = SLOT_OCCUPIED
                    return slot
        raise StageFull(f"Porte-échantillons plein ({self.capacity} emplacements)")

    def allocate_many(self, n: int) -> List[str]:
        """Réserve n emplacements d'un coup, ou aucun"""
        with self._lock:
            free = [slot for slot, state in self.occupancy.items() if state == SLOT_FREE]
            if len(free) < n:
                raise StageFull(f"{n} emplacements demandés, {len(free)} libres")
            for slot in free[:n]:
                self.occupancy[slot] = SLOT_OCCUPIED
            return free[:n]

    def mark_spent(self, slot: str):
        """Goutte mesurée : l'emplacement reste sale jusqu'au prochain reset"""
        with self._lock:
            self._check(slot)
            self.occupancy[slot] = SLOT_SPENT

    def release(self, slot: str):
        with self._lock:
            self._check(slot)
            self.occupancy[slot] = SLOT_FREE

    def reset(self):
        """Nettoyage / remplacement des substrats"""
        with self._lock:
            for slot in self.occupancy:
                self.occupancy[slot] = SLOT_FREE
            self.resets += 1
        logger.info("Porte-échantillons réinitialisé (reset n°%d)", self.resets)

    def level_of(self, slot: str) -> str:
        self._check(slot)
        return slot.rstrip("0123456789")

    def _check(self, slot: str):
        if slot not in self.occupancy:
            raise ConfigInvalid(f"Emplacement inconnu: {slot}")

    def to_dict(self) -> Dict[str, Any]:
        return {"levels": list(self.levels), "positions": self.positions_per_level}


@dataclass
class WorkingVolumes:
    """Volumes à pipeter (µL) pour préparer un mélange"""
    volumes: Dict[str, float]
    diluent: float

    @property
    def total(self) -> float:
        return math.fsum(self.volumes.values()) + self.diluent


@dataclass
class DeckConfig:
    """Disposition du deck OT-2 et paramètres de préparation"""
    reagents: List[ReagentStock]
    stage: StageMap = field(default_factory=StageMap)
    labware_layout: Dict[str, str] = field(default_factory=dict)
    total_mix_volume: float = 1000.0
    droplet_volume: float = 3.0
    replicates_per_experiment: int = 3
    min_pipettable: float = 1.0

    def __post_init__(self):
        names = [r.name for r in self.reagents]
        if len(set(names)) != len(names):
            raise ConfigInvalid(f"Réactifs dupliqués sur le deck: {names}")
        if self.replicates_per_experiment < 1:
            raise ConfigInvalid("Au moins un réplicat par expérience")
        if self.total_mix_volume <= 0 or self.droplet_volume <= 0:
            raise ConfigInvalid("Volumes de mélange et de goutte strictement positifs")
        if self.droplet_volume > self.total_mix_volume / self.replicates_per_experiment:
            raise ConfigInvalid(
                f"Goutte de {self.droplet_volume} µL x {self.replicates_per_experiment} "
                f"> volume de mélange {self.total_mix_volume} µL"
            )

    def reagent(self, name: str) -> ReagentStock:
        for stock in self.reagents:
            if stock.name == name:
                return stock
        raise UnknownReagent(f"Réactif absent du deck: {name}")

    @property
    def reagent_names(self) -> List[str]:
        return [r.name for r in self.reagents]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "reagents": [r.to_dict() for r in self.reagents],
            "stage": self.stage.to_dict(),
            "labware": dict(self.labware_layout),
            "total_mix_volume_ul": self.total_mix_volume,
            "droplet_volume_ul": self.droplet_volume,
            "replicates": self.replicates_per_experiment,
            "min_pipettable_ul": self.min_pipettable,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'DeckConfig':
        if not isinstance(data, dict) or "reagents" not in data:
            raise ConfigInvalid("Configuration du deck : champ 'reagents' manquant")
        stage_data = data.get("stage", {}) or {}
        try:
            return cls(
                reagents=[ReagentStock.from_dict(r) for r in data["reagents"]],
                stage=StageMap(
                    levels=stage_data.get("levels", 5),
                    positions_per_level=int(stage_data.get("positions", 9)),
                ),
                labware_layout={str(k): str(v) for k, v in (data.get("labware") or {}).items()},
                total_mix_volume=float(data.get("total_mix_volume_ul", 1000.0)),
                droplet_volume=float(data.get("droplet_volume_ul", 3.0)),
                replicates_per_experiment=int(data.get("replicates", 3)),
                min_pipettable=float(data.get("min_pipettable_ul", 1.0)),
            )
        except (TypeError, ValueError) as e:
            raise ConfigInvalid(f"Configuration du deck invalide: {e}") from e


def load_deck(path: Path) -> DeckConfig:
    """Charge la configuration du deck depuis un fichier JSON"""
    return DeckConfig.from_dict(read_json(path))


def validate_formulation(f: Formulation, deck: DeckConfig):
    """Vérifie que chaque composant existe sur le deck et reste sous la concentration mère"""
    for name, value in f.components.items():
        stock = deck.reagent(name)
        if value > stock.stock_concentration:
            raise ConcentrationExceedsStock(
                f"{name}: {value} {stock.unit} > solution mère {stock.stock_concentration} {stock.unit}"
            )


def compute_working_volumes(f: Formulation, deck: DeckConfig) -> WorkingVolumes:
    """Volume de chaque solution mère et d'eau pour atteindre les concentrations visées"""
    validate_formulation(f, deck)
    total = deck.total_mix_volume

    volumes: Dict[str, float] = {}
    for name, value in f.components.items():
        stock = deck.reagent(name)
        volumes[name] = value / stock.stock_concentration * total

    used = math.fsum(volumes.values())
    if used > total * (1 + 1e-12):
        raise VolumeOverflow(f"{used:.3f} µL de réactifs > {total:.3f} µL de mélange")
    diluent = max(total - used, 0.0)

    for name, volume in list(volumes.items()) + [("eau", diluent)]:
        if 0 < volume < deck.min_pipettable:
            raise SubPipettableVolume(
                f"{name}: {volume:.3f} µL < minimum pipetable {deck.min_pipettable} µL"
            )

    return WorkingVolumes(volumes=volumes, diluent=diluent)


def total_surfactant(f: Formulation, surfactant_names: Iterable[str]) -> float:
    """Somme des concentrations des tensioactifs listés (les autres composants sont ignorés)"""
    names = set(surfactant_names)
    return math.fsum(value for name, value in f.components.items() if name in names)


def formulation_cost(f: Formulation, deck: DeckConfig, batch_volume: float) -> float:
    """Coût d'un lot de `batch_volume` litres.

    % w/v = grammes pour 100 mL ; pour un solvant en vol% le prix est lu par mL.
    """
    batch_ml = batch_volume * 1000.0
    cost = 0.0
    for name, value in f.components.items():
        stock = deck.reagent(name)
        if value == 0:
            continue
        if stock.price_per_gram is None:
            raise MissingPrice(f"Prix manquant pour {name}")
        cost += value / 100.0 * batch_ml * stock.price_per_gram
    return cost
