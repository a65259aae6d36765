"""
Module core - Goniolab, laboratoire autonome de formulation par angle de contact

Ce module contient tous les composants principaux de l'application :
- formulation.py : Réactifs, formulations, deck, volumes de travail et coûts
- imaging.py : Chaîne de mesure d'angle de contact sur image
- geometry.py : Profils Bashforth-Adams, ajustements de cercle et de profil
- render.py : Rendu synthétique de gouttes posées
- surrogate.py : Processus gaussien et échantillonnage de Thompson
- optimizer.py : Espace de recherche, désirabilité, recommandations de campagne
- lab.py : Laboratoire virtuel (modèles de réponse, expériences simulées)
- messages.py : Messages du protocole et format JSON canonique
- bus.py : Bus publication/abonnement (en processus ou MQTT)
- memory.py : Journal d'événements et persistance des campagnes
- orchestrator.py : Boucle fermée, balayages et comparaisons
- stats.py : Statistiques des réplicats
- report.py : Rapports CSV et plotly
- utils.py : Fonctions utilitaires
"""

__version__ = "1.0.0"
__author__ = "Goniolab Team"

from .errors import GoniolabError, ConfigInvalid
from .formulation import (
    ReagentStock,
    Formulation,
    DeckConfig,
    StageMap,
    load_deck,
    compute_working_volumes,
    total_surfactant,
    formulation_cost,
)
from .geometry import integrate_profile, circle_fit, tilt_correct, fit_bashforth_adams
from .imaging import PipelineParams, MeasurementResult, measure_contact_angle, otsu_threshold
from .render import RenderParams, render_droplet
from .surrogate import GPState, HyperPolicy, gp_fit, gp_posterior, thompson_recommend
from .optimizer import (
    SearchSpace,
    TargetSpec,
    CampaignRecord,
    DesirabilityObjective,
    build_search_space,
    normalize_target,
    desirability,
    recommend_next,
    record_result,
)
from .lab import VirtualLab, ResponseModel, TimingModel, run_virtual_experiment, simulate_throughput
from .messages import RecommendationMsg, ResultMsg, FaultMsg, encode_msg, decode_msg
from .bus import InProcessBus, MqttBus
from .memory import EventLog, CampaignStore
from .orchestrator import run_campaign, run_sweep, compare_campaign_modes
from .stats import aggregate_replicates, f_test_variances
from .utils import load_config, setup_logging, ColorScheme

__all__ = [
    # Erreurs
    "GoniolabError",
    "ConfigInvalid",
    # Formulation
    "ReagentStock",
    "Formulation",
    "DeckConfig",
    "StageMap",
    "load_deck",
    "compute_working_volumes",
    "total_surfactant",
    "formulation_cost",
    # Géométrie / images
    "integrate_profile",
    "circle_fit",
    "tilt_correct",
    "fit_bashforth_adams",
    "PipelineParams",
    "MeasurementResult",
    "measure_contact_angle",
    "otsu_threshold",
    "RenderParams",
    "render_droplet",
    # Optimisation
    "GPState",
    "HyperPolicy",
    "gp_fit",
    "gp_posterior",
    "thompson_recommend",
    "SearchSpace",
    "TargetSpec",
    "CampaignRecord",
    "DesirabilityObjective",
    "build_search_space",
    "normalize_target",
    "desirability",
    "recommend_next",
    "record_result",
    # Laboratoire
    "VirtualLab",
    "ResponseModel",
    "TimingModel",
    "run_virtual_experiment",
    "simulate_throughput",
    # Orchestration
    "RecommendationMsg",
    "ResultMsg",
    "FaultMsg",
    "encode_msg",
    "decode_msg",
    "InProcessBus",
    "MqttBus",
    "EventLog",
    "CampaignStore",
    "run_campaign",
    "run_sweep",
    "compare_campaign_modes",
    "aggregate_replicates",
    "f_test_variances",
    # Utils
    "load_config",
    "setup_logging",
    "ColorScheme",
]
