"""
core/messages.py
Messages échangés entre le client d'optimisation et le laboratoire
(recommandation, résultat, échec) et leur format JSON canonique
"""

import json
import math
from dataclasses import dataclass, field, fields
from typing import Any, Dict, List, Optional, Union

from .errors import SchemaViolation
from .stats import aggregate_replicates

CONSISTENCY_TOL = 1e-9


def recommendation_topic(campaign_id: str) -> str:
    return f"campaign/{campaign_id}/recommendation"


def result_topic(campaign_id: str) -> str:
    return f"campaign/{campaign_id}/result"


@dataclass
class RecommendationMsg:
    campaign_id: str
    experiment_id: int
    formulation: Dict[str, float]
    replicates: int
    kind: str = field(default="recommendation", init=False)

    def validate(self):
        _check_id(self.campaign_id, self.experiment_id)
        if not isinstance(self.formulation, dict):
            raise SchemaViolation("formulation", "objet attendu")
        for name, value in self.formulation.items():
            if not _is_number(value) or value < 0:
                raise SchemaViolation(f"formulation.{name}", "concentration invalide")
        if not _is_int(self.replicates) or self.replicates < 1:
            raise SchemaViolation("replicates", "entier ≥ 1 attendu")


@dataclass
class ResultMsg:
    campaign_id: str
    experiment_id: int
    replicates: int
    angles_deg: List[float]
    mean_deg: float
    sd_deg: float
    rmse_px: List[float]
    timestamps: List[float]
    env: Optional[Dict[str, float]] = None
    kind: str = field(default="result", init=False)

    @classmethod
    def from_angles(cls, campaign_id: str, experiment_id: int, angles: List[float],
                    rmse_px: List[float], timestamps: List[float],
                    env: Optional[Dict[str, float]] = None) -> 'ResultMsg':
        mean, sd = aggregate_replicates(angles)
        return cls(campaign_id, experiment_id, len(angles), list(angles), mean, sd,
                   list(rmse_px), list(timestamps), env)

    def validate(self):
        _check_id(self.campaign_id, self.experiment_id)
        if not _is_int(self.replicates) or self.replicates < 1:
            raise SchemaViolation("replicates", "entier ≥ 1 attendu")
        if not isinstance(self.angles_deg, list) or len(self.angles_deg) != self.replicates:
            raise SchemaViolation("angles", f"{self.replicates} angles attendus")
        if not all(_is_number(a) and math.isfinite(a) for a in self.angles_deg):
            raise SchemaViolation("angles", "valeurs non numériques")
        if not isinstance(self.rmse_px, list) or len(self.rmse_px) != self.replicates:
            raise SchemaViolation("rmse_px", f"{self.replicates} valeurs attendues")
        if not isinstance(self.timestamps, list):
            raise SchemaViolation("timestamps", "liste attendue")
        mean, sd = aggregate_replicates(self.angles_deg)
        if not _is_number(self.mean_deg) or abs(self.mean_deg - mean) > CONSISTENCY_TOL:
            raise SchemaViolation("mean_deg", f"incohérent avec les angles ({mean})")
        if not _is_number(self.sd_deg) or abs(self.sd_deg - sd) > CONSISTENCY_TOL:
            raise SchemaViolation("sd_deg", f"incohérent avec les angles ({sd})")
        if self.env is not None and not isinstance(self.env, dict):
            raise SchemaViolation("env", "objet attendu")


@dataclass
class FaultMsg:
    campaign_id: str
    experiment_id: int
    reason: str
    kind: str = field(default="fault", init=False)

    def validate(self):
        _check_id(self.campaign_id, self.experiment_id)
        if not isinstance(self.reason, str):
            raise SchemaViolation("reason", "texte attendu")


Message = Union[RecommendationMsg, ResultMsg, FaultMsg]
KINDS = {"recommendation": RecommendationMsg, "result": ResultMsg, "fault": FaultMsg}


def encode_msg(msg: Message) -> bytes:
    """JSON canonique UTF-8 : `kind` en tête puis les champs dans l'ordre de déclaration"""
    msg.validate()
    payload: Dict[str, Any] = {"kind": msg.kind}
    for f in fields(msg):
        if f.name != "kind":
            payload[f.name] = getattr(msg, f.name)
    return json.dumps(payload, ensure_ascii=False, separators=(",", ":")).encode("utf-8")


def decode_msg(data: bytes) -> Message:
    try:
        payload = json.loads(data.decode("utf-8") if isinstance(data, (bytes, bytearray)) else data)
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise SchemaViolation("$", f"JSON invalide ({e})") from e
    if not isinstance(payload, dict):
        raise SchemaViolation("$", "objet attendu")

    cls = KINDS.get(payload.get("kind"))
    if cls is None:
        raise SchemaViolation("kind", f"type inconnu {payload.get('kind')!r}")

    kwargs = {}
    for f in fields(cls):
        if not f.init:
            continue
        if f.name in payload:
            kwargs[f.name] = payload[f.name]
        elif f.default is None:
            kwargs[f.name] = None
        else:
            raise SchemaViolation(f.name, "champ manquant")
    msg = cls(**kwargs)
    msg.validate()
    return msg


def _check_id(campaign_id: Any, experiment_id: Any):
    if not isinstance(campaign_id, str) or not campaign_id:
        raise SchemaViolation("campaign_id", "identifiant de campagne manquant")
    if not _is_int(experiment_id) or experiment_id < 1:
        raise SchemaViolation("experiment_id", "entier ≥ 1 attendu")


def _is_int(value: Any) -> bool:
    return isinstance(value, int) and not isinstance(value, bool)


def _is_number(value: Any) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool)
