"""
core/orchestrator.py
Boucle fermée recommandation -> expérience -> résultat, service de laboratoire
côté bus, reprise sur journal, balayages de grille et comparaisons de campagnes
"""

import logging
import statistics
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from .bus import InProcessBus
from .errors import (
    ConfigInvalid,
    EmptySpace,
    GoniolabError,
    LabFault,
    SpaceExhausted,
    StageFull,
)
from .formulation import (
    DeckConfig,
    Formulation,
    compute_working_volumes,
    formulation_cost,
    validate_formulation,
)
from .lab import VirtualLab
from .memory import CampaignStore, EventLog
from .messages import (
    FaultMsg,
    RecommendationMsg,
    ResultMsg,
    decode_msg,
    encode_msg,
    recommendation_topic,
    result_topic,
)
from .optimizer import (
    MAX_CANDIDATES,
    CampaignRecord,
    HistoryRow,
    build_search_space,
    campaign_from_config,
    fail_pending,
    first_iteration,
    in_band,
    is_optimal,
    record_result,
    recommend_next,
)
from .surrogate import HyperPolicy

logger = logging.getLogger(__name__)

LAB_STREAM = 1


def lab_rng(seed: int, experiment_id: int) -> np.random.Generator:
    """Flux aléatoire du laboratoire, distinct de celui de l'optimiseur"""
    return np.random.default_rng([int(seed), int(experiment_id), LAB_STREAM])


def deck_from_config(config: Dict[str, Any]) -> DeckConfig:
    """Deck décrit dans le JSON de campagne : `reagents` en liste ou en mapping nom -> stock"""
    reagents = config.get("reagents")
    if not reagents:
        raise ConfigInvalid("Section 'reagents' vide")
    if isinstance(reagents, dict):
        reagents = [
            {"name": name, **(spec if isinstance(spec, dict) else {"stock": spec})}
            for name, spec in reagents.items()
        ]
    data = {
        "reagents": reagents,
        "stage": config.get("stage") or {},
        "labware": config.get("labware") or {},
        "total_mix_volume_ul": config.get("total_mix_volume_ul", 1000.0),
        "droplet_volume_ul": config.get("droplet_volume_ul", 3.0),
        "replicates": config.get("replicates", 3),
        "min_pipettable_ul": config.get("min_pipettable_ul", 1.0),
    }
    return DeckConfig.from_dict(data)


# =============================================================================
# SERVICE DE LABORATOIRE
# =============================================================================

class LabService:
    """Exécute les recommandations reçues sur le bus et publie résultat ou échec"""

    def __init__(
        self,
        bus: Any,
        lab: VirtualLab,
        deck: DeckConfig,
        campaign_id: str,
        seed: int,
        auto_reset: bool = True,
        on_event: Optional[Callable[..., Any]] = None
    ):
        self.bus = bus
        self.lab = lab
        self.deck = deck
        self.campaign_id = campaign_id
        self.seed = seed
        self.auto_reset = auto_reset
        self.on_event = on_event or (lambda event, **data: None)
        if self.lab.stage is None:
            self.lab.stage = deck.stage
        self.stage = self.lab.stage

    def attach(self):
        self.bus.subscribe(recommendation_topic(self.campaign_id), self._handle)

    def _handle(self, topic: str, payload: bytes):
        msg = decode_msg(payload)
        if not isinstance(msg, RecommendationMsg):
            return
        reply = self.execute(msg)
        self.bus.publish(result_topic(self.campaign_id), encode_msg(reply))

    def _allocate(self, n: int, experiment_id: int) -> List[str]:
        try:
            return self.stage.allocate_many(n)
        except StageFull:
            if not self.auto_reset:
                raise LabFault("Porte-échantillons plein, remplacement des substrats requis")
            self.stage.reset()
            self.on_event("stage_reset", experiment_id=experiment_id, resets=self.stage.resets)
            return self.stage.allocate_many(n)

    def execute(self, msg: RecommendationMsg):
        """ResultMsg en cas de succès, FaultMsg sinon"""
        f = Formulation.from_dict(msg.formulation)
        rng = lab_rng(self.seed, msg.experiment_id)
        try:
            validate_formulation(f, self.deck)
            compute_working_volumes(f, self.deck)
            slots = self._allocate(msg.replicates, msg.experiment_id)
            self.on_event("slots", experiment_id=msg.experiment_id, slots=slots)
            results = self.lab.run_experiment(f, msg.replicates, rng, slots=slots)
            for slot in slots:
                self.stage.mark_spent(slot)
        except GoniolabError as e:
            logger.warning("Expérience %d en échec : %s", msg.experiment_id, e)
            return FaultMsg(self.campaign_id, msg.experiment_id, f"{type(e).__name__}: {e}")

        timing = self.lab.timing
        start = (msg.experiment_id - 1) * timing.preparation(msg.replicates)
        offset = timing.mix + timing.camera_move
        stamps = [start + offset + (i + 1) * (timing.deposit + timing.capture) for i in range(len(results))]
        return ResultMsg.from_angles(
            self.campaign_id,
            msg.experiment_id,
            [r.contact_angle_deg for r in results],
            [r.rmse_px for r in results],
            stamps,
            env=self.lab.environment.sample(rng),
        )


# =============================================================================
# BOUCLE DE CAMPAGNE
# =============================================================================

@dataclass
class CampaignSettings:
    max_consecutive_failures: int = 5
    wait_rounds: int = 30
    cost_batch_l: float = 1.0
    auto_reset_stage: bool = True

    @classmethod
    def from_dict(cls, data: Optional[Dict[str, Any]]) -> 'CampaignSettings':
        data = data or {}
        known = {k: v for k, v in data.items() if k in cls.__dataclass_fields__}
        return cls(**known)


class Orchestrator:
    """Conduit une campagne : un seul fil de contrôle, messages traités en série"""

    def __init__(
        self,
        campaign: CampaignRecord,
        deck: DeckConfig,
        bus: Any,
        events: EventLog,
        settings: Optional[CampaignSettings] = None
    ):
        self.campaign = campaign
        self.deck = deck
        self.bus = bus
        self.events = events
        self.settings = settings or CampaignSettings()
        self._reply = None
        self.bus.subscribe(result_topic(campaign.id), self._on_result)

    def _on_result(self, topic: str, payload: bytes):
        msg = decode_msg(payload)
        pending = self.campaign.pending
        if pending is None or msg.experiment_id != pending["experiment_id"]:
            # livraison au moins une fois : doublons et identifiants inconnus ignorés
            logger.warning("Message ignoré pour l'expérience %s", msg.experiment_id)
            return
        self._reply = msg

    def _measurements(self, f: Formulation, msg: ResultMsg) -> Dict[str, Any]:
        data: Dict[str, Any] = {"angles_deg": msg.angles_deg}
        if any(t.name == "cost" for t in self.campaign.targets):
            data["cost"] = formulation_cost(f, self.deck, self.settings.cost_batch_l)
        return data

    def _dispatch(self, f: Formulation) -> Any:
        experiment_id = self.campaign.pending["experiment_id"]
        msg = RecommendationMsg(self.campaign.id, experiment_id, f.to_dict(), self.campaign.replicates)
        self._reply = None
        self.bus.publish(recommendation_topic(self.campaign.id), encode_msg(msg))
        for _ in range(self.settings.wait_rounds):
            self.bus.pump()
            if self._reply is not None:
                return self._reply
        raise LabFault(f"Aucune réponse du laboratoire pour l'expérience {experiment_id}")

    def step(self) -> Optional[HistoryRow]:
        """Une expérience ; None si elle a échoué"""
        campaign = self.campaign
        if campaign.pending is None:
            f = recommend_next(campaign)
            self.events.append(
                "recommendation",
                experiment_id=campaign.pending["experiment_id"],
                formulation=f.to_dict(),
            )
        else:
            f = campaign.space.formulation(campaign.pending["index"])

        reply = self._dispatch(f)
        if isinstance(reply, FaultMsg):
            self.events.append("fault", experiment_id=reply.experiment_id, reason=reply.reason)
            fail_pending(campaign, reply.reason)
            return None

        record_result(campaign, f, self._measurements(f, reply))
        row = campaign.history[-1]
        self.events.append(
            "result",
            experiment_id=reply.experiment_id,
            iteration=row.iteration,
            message=_message_dict(reply),
        )
        logger.info("🧪 #%d %s -> %.2f° (D=%.3f)", row.iteration, f.label(), row.mean, row.desirability)
        return row

    def run(self, budget: int, stop_when: Optional[Callable[[HistoryRow], bool]] = None) -> CampaignRecord:
        campaign = self.campaign
        failures = 0
        while campaign.iteration < budget:
            try:
                row = self.step()
            except SpaceExhausted:
                break
            if row is None:
                failures += 1
                if failures >= self.settings.max_consecutive_failures:
                    campaign.status = "failed"
                    raise LabFault(f"{failures} échecs consécutifs, campagne interrompue")
                continue
            failures = 0
            if stop_when is not None and stop_when(row):
                campaign.status = "stopped"
                break
        if campaign.status in ("running", "exhausted"):
            campaign.status = "completed" if campaign.iteration >= budget else "exhausted"
        self.events.append("campaign_end", iteration=campaign.iteration, status=campaign.status)
        return campaign


def _message_dict(msg: ResultMsg) -> Dict[str, Any]:
    return {
        "angles_deg": msg.angles_deg,
        "mean_deg": msg.mean_deg,
        "sd_deg": msg.sd_deg,
        "rmse_px": msg.rmse_px,
        "timestamps": msg.timestamps,
        "env": msg.env,
    }


def replay_events(campaign: CampaignRecord, events: EventLog, deck: DeckConfig,
                  cost_batch_l: float = 1.0) -> CampaignRecord:
    """Reconstruit l'état d'une campagne à partir du journal (rejeu idempotent par experiment_id)"""
    done = set()
    allotted: Dict[int, List[str]] = {}
    for entry in events.entries:
        if entry.event == "recommendation":
            eid = entry["experiment_id"]
            f = recommend_next(campaign)
            if campaign.pending["experiment_id"] != eid or f.key() != Formulation.from_dict(entry["formulation"]).key():
                raise ConfigInvalid(f"Journal incohérent avec la configuration (expérience {eid})")
        elif entry.event == "stage_reset":
            deck.stage.reset()
            allotted.clear()
        elif entry.event == "slots":
            allotted[entry["experiment_id"]] = list(entry["slots"])
            for slot in entry["slots"]:
                deck.stage.mark_spent(slot)
        elif entry.event == "result":
            eid = entry["experiment_id"]
            allotted.pop(eid, None)
            if eid in done or campaign.pending is None:
                continue
            f = campaign.space.formulation(campaign.pending["index"])
            measurements: Dict[str, Any] = {"angles_deg": entry["message"]["angles_deg"]}
            if any(t.name == "cost" for t in campaign.targets):
                measurements["cost"] = formulation_cost(f, deck, cost_batch_l)
            record_result(campaign, f, measurements)
            done.add(eid)
        elif entry.event == "fault":
            allotted.pop(entry["experiment_id"], None)
            fail_pending(campaign, entry["reason"])

    # expérience interrompue entre allocation et résultat : ses emplacements sont rendus pour la relance
    for eid, slots in allotted.items():
        for slot in slots:
            deck.stage.release(slot)
        logger.info("Reprise : %d emplacements de l'expérience %d libérés", len(slots), eid)
    campaign.status = "running"
    return campaign


def run_campaign(
    config: Dict[str, Any],
    lab: Optional[VirtualLab] = None,
    budget: Optional[int] = None,
    seed: Optional[int] = None,
    run_dir: Optional[Path] = None,
    bus: Any = None,
    objective: Optional[str] = None,
    resume: bool = True,
    stop_when: Optional[Callable[[HistoryRow], bool]] = None,
    hyper: Optional[HyperPolicy] = None,
    attach_lab: bool = True
) -> CampaignRecord:
    """Campagne complète ; reprend depuis run_dir/events.jsonl si un journal existe.

    attach_lab=False : le laboratoire est un service distant joint par le bus.
    """
    seed = int(config.get("seed", 0) if seed is None else seed)
    campaign = campaign_from_config(config, seed, objective=objective, hyper=hyper)
    budget = int(budget if budget is not None else config.get("budget", len(campaign.space)))
    if budget < 1:
        raise ConfigInvalid(f"Budget {budget} < 1")
    deck = deck_from_config(config)
    settings = CampaignSettings.from_dict(config.get("settings"))
    lab = lab or VirtualLab.from_config(config, stage=deck.stage)
    if lab.stage is not None:
        deck.stage = lab.stage

    store = CampaignStore(run_dir) if run_dir is not None else None
    events = store.events if store else EventLog()
    if events and resume:
        start = events.of_kind("campaign_start")
        if start and (start[0]["seed"] != seed or start[0]["campaign_id"] != campaign.id):
            raise ConfigInvalid("Le journal existant appartient à une autre campagne")
        replay_events(campaign, events, deck, settings.cost_batch_l)
        events.append("resume", iteration=campaign.iteration, pending=campaign.pending)
    else:
        events.append("campaign_start", campaign_id=campaign.id, seed=seed, objective=campaign.objective,
                      budget=budget)

    bus = bus or InProcessBus()
    if attach_lab:
        service = LabService(bus, lab, deck, campaign.id, seed, settings.auto_reset_stage, events.append)
        service.attach()
    orchestrator = Orchestrator(campaign, deck, bus, events, settings)
    try:
        orchestrator.run(budget, stop_when)
    finally:
        if store:
            store.save(campaign)
    return campaign


def serve_lab(config: Dict[str, Any], bus: Any, lab: Optional[VirtualLab] = None,
              seed: Optional[int] = None, max_rounds: Optional[int] = None) -> LabService:
    """Laboratoire autonome à l'écoute du bus (mode broker) jusqu'à interruption"""
    seed = int(config.get("seed", 0) if seed is None else seed)
    deck = deck_from_config(config)
    lab = lab or VirtualLab.from_config(config, stage=deck.stage)
    settings = CampaignSettings.from_dict(config.get("settings"))
    service = LabService(bus, lab, deck, str(config.get("id", "campaign")), seed, settings.auto_reset_stage)
    service.attach()
    rounds = 0
    try:
        while max_rounds is None or rounds < max_rounds:
            bus.pump()
            rounds += 1
    except KeyboardInterrupt:
        logger.info("Service de laboratoire arrêté")
    return service


# =============================================================================
# BALAYAGES ET COMPARAISONS
# =============================================================================

def run_sweep(config: Dict[str, Any], lab: Optional[VirtualLab] = None,
              out: Optional[Path] = None) -> pd.DataFrame:
    """Exécution exhaustive de la grille, sans optimisation, dans l'ordre des candidats"""
    if not config.get("space"):
        raise ConfigInvalid("Grille vide")
    try:
        space = build_search_space(config["space"], int(config.get("max_candidates") or MAX_CANDIDATES))
    except EmptySpace as e:
        raise ConfigInvalid(f"Grille vide: {e}") from e
    lab = lab or VirtualLab()
    seed = int(config.get("seed", 0))
    replicates = int(config.get("replicates", 3))

    rows = []
    for i in range(len(space)):
        f = space.formulation(i)
        results = lab.run_experiment(f, replicates, lab_rng(seed, i + 1))
        angles = [r.contact_angle_deg for r in results]
        mean = float(np.mean(angles))
        sd = float(np.std(angles, ddof=1)) if len(angles) > 1 else 0.0
        rows.append({**f.to_dict(), "mean_deg": mean, "sd_deg": sd, "n": len(angles)})
    frame = pd.DataFrame.from_records(rows, columns=space.names + ["mean_deg", "sd_deg", "n"])
    if out is not None:
        out.parent.mkdir(parents=True, exist_ok=True)
        frame.to_csv(out, index=False, float_format="%.10g", lineterminator="\n")
    return frame


LabFactory = Callable[[], VirtualLab]


def _default_lab_factory(config: Dict[str, Any]) -> LabFactory:
    return lambda: VirtualLab.from_config(config)


def _first_optimal(record: CampaignRecord, objective) -> Optional[int]:
    return first_iteration(record.history, lambda row: is_optimal(row, objective))


def compare_campaign_modes(
    config: Dict[str, Any],
    seeds: Sequence[int],
    lab_factory: Optional[LabFactory] = None,
    budget: Optional[int] = None,
    out: Optional[Path] = None
) -> Tuple[pd.DataFrame, Dict[str, Any]]:
    """Première itération optimale, multi-objectif contre mono-objectif, graine par graine.

    L'optimalité est toujours jugée sur l'objectif complet ; une campagne sans
    formulation optimale est censurée à budget + 1.
    """
    if not seeds:
        raise ConfigInvalid("Aucune graine")
    factory = lab_factory or _default_lab_factory(config)
    reference = campaign_from_config(config, 0)
    if reference.desirability_objective.match_target is None:
        raise ConfigInvalid("Comparaison impossible sans cible 'match'")
    objective = reference.desirability_objective
    budget = int(budget or config.get("budget") or len(reference.space))

    rows = []
    for seed in seeds:
        row: Dict[str, Any] = {"seed": seed}
        for mode in ("multi", "single"):
            record = run_campaign(
                config, factory(), budget=budget, seed=seed, objective=mode,
                stop_when=lambda r: is_optimal(r, objective),
            )
            first = _first_optimal(record, objective)
            row[f"{mode}_first_optimal"] = first if first is not None else budget + 1
            row[f"{mode}_found"] = first is not None
        rows.append(row)
        logger.info("Graine %s : multi=%s, mono=%s", seed, row["multi_first_optimal"], row["single_first_optimal"])

    frame = pd.DataFrame.from_records(rows)
    summary = {
        "seeds": len(seeds),
        "budget": budget,
        "multi_median": float(statistics.median(frame["multi_first_optimal"])),
        "single_median": float(statistics.median(frame["single_first_optimal"])),
        "multi_found": int(frame["multi_found"].sum()),
        "single_found": int(frame["single_found"].sum()),
    }
    if out is not None:
        out.parent.mkdir(parents=True, exist_ok=True)
        frame.to_csv(out, index=False, lineterminator="\n")
    return frame, summary


def _with_targets(config: Dict[str, Any], update: Callable[[List[Dict[str, Any]]], None]) -> Dict[str, Any]:
    variant = dict(config)
    variant["targets"] = [dict(t) for t in config["targets"]]
    update(variant["targets"])
    return variant


def _robustness_rows(variants: Dict[str, Dict[str, Any]], seeds: Sequence[int], budget: int,
                     lab_factory: Optional[LabFactory]) -> pd.DataFrame:
    rows = []
    for label, variant in variants.items():
        factory = lab_factory or _default_lab_factory(variant)
        for seed in seeds:
            record = run_campaign(variant, factory(), budget=budget, seed=seed)
            objective = record.desirability_objective
            optimal = [r for r in record.history if is_optimal(r, objective)]
            rows.append({
                "setting": label,
                "seed": seed,
                "first_optimal": optimal[0].iteration if optimal else budget + 1,
                "optimal_count": len(optimal),
                "best_D": max((r.desirability for r in record.history), default=0.0),
            })
    return pd.DataFrame.from_records(rows)


def weight_ratio_sweep(config: Dict[str, Any], ratios: Sequence[Sequence[float]], seeds: Sequence[int],
                       budget: int = 60, lab_factory: Optional[LabFactory] = None) -> pd.DataFrame:
    """Influence du rapport des poids des cibles (un poids par cible, dans l'ordre)"""
    variants = {}
    for ratio in ratios:
        if len(ratio) != len(config["targets"]):
            raise ConfigInvalid(f"Rapport {ratio} : {len(config['targets'])} poids attendus")

        def update(targets, ratio=ratio):
            for target, weight in zip(targets, ratio):
                target["weight"] = float(weight)

        variants[":".join(f"{w:g}" for w in ratio)] = _with_targets(config, update)
    return _robustness_rows(variants, seeds, budget, lab_factory)


def bound_width_sweep(config: Dict[str, Any], half_widths: Sequence[float], seeds: Sequence[int],
                      budget: int = 60, lab_factory: Optional[LabFactory] = None) -> pd.DataFrame:
    """Influence de la largeur des bornes de la cible d'angle (± autour de la valeur visée)"""
    variants = {}
    for width in half_widths:
        def update(targets, width=width):
            for target in targets:
                if target.get("mode", "match") == "match":
                    value = float(target["value"])
                    target["bounds"] = [value - width, value + width]

        variants[f"±{width:g}"] = _with_targets(config, update)
    return _robustness_rows(variants, seeds, budget, lab_factory)


def seed_sweep(config: Dict[str, Any], seeds: Sequence[int], budget: int = 60,
               lab_factory: Optional[LabFactory] = None) -> pd.DataFrame:
    return _robustness_rows({"base": config}, seeds, budget, lab_factory)


def band_hits(record: CampaignRecord, band: Tuple[float, float]) -> List[HistoryRow]:
    """Expériences dont l'angle moyen tombe dans la bande visée"""
    return [row for row in record.history if in_band(row, band)]
