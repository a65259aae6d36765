"""
app.py
Interface en ligne de commande - Goniolab

Usage :
    python app.py measure goutte.png [--json]
    python app.py render --theta 104 --beta 0.2 --noise 8 [--out goutte.png]
    python app.py sweep --config configs/sds99_sweep.json --out runs/sds99.csv
    python app.py campaign run --config configs/ethanol_campaign.json --seed 7 --budget 101 [--out runs/ethanol]
    python app.py campaign compare --config configs/surfactant_campaign.json --seeds 20
    python app.py lab serve --config configs/surfactant_campaign.json --broker localhost
    python app.py report --in runs/ethanol --out runs/ethanol/report.csv [--html]
    python app.py throughput --experiments 30 --replicates 3
"""

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional

# Ajouter le répertoire parent au path pour les imports
sys.path.insert(0, str(Path(__file__).parent))

import numpy as np

from core.bus import MqttBus
from core.errors import GoniolabError
from core.imaging import PipelineParams, load_image, measure_contact_angle, save_image
from core.lab import TimingModel, VirtualLab, simulate_throughput
from core.orchestrator import band_hits, compare_campaign_modes, run_campaign, run_sweep, serve_lab
from core.render import RenderParams, render_droplet
from core.report import build_report
from core.surrogate import HyperPolicy
from core.utils import format_duration, load_config, read_json, section, setup_logging, write_json

DEFAULT_CONFIG = Path(__file__).parent / "config.yaml"

logger = logging.getLogger("goniolab")


# =============================================================================
# COMMANDES
# =============================================================================

def _default_path(config: Dict[str, Any], key: str, name: str) -> Path:
    """Chemin sous un répertoire de `paths` (répertoire courant si absent)"""
    return Path(section(config, "paths").get(key, ".")) / name


def cmd_measure(args, config: Dict[str, Any]) -> int:
    params = PipelineParams.from_dict(section(config, "image"))
    result = measure_contact_angle(load_image(Path(args.image)), params)
    if args.json:
        print(json.dumps(result.to_dict(), ensure_ascii=False))
        return 0
    print(f"🔬 Angle de contact : {result.contact_angle_deg:.2f}°")
    print(f"   RMSE : {result.rmse_px:.3f} px, Bond : {result.bond_number:.3f}")
    if result.quality_flags:
        print(f"⚠️ Indicateurs : {', '.join(sorted(result.quality_flags))}")
    return 0


def cmd_render(args, config: Dict[str, Any]) -> int:
    params = RenderParams.from_dict(section(config, "render")).replace(
        bond_number=args.beta, noise_sigma=args.noise, tilt_deg=args.tilt
    )
    image = render_droplet(args.theta, params, np.random.default_rng(args.seed))
    out = Path(args.out) if args.out else _default_path(config, "images_dir", f"goutte_{args.theta:g}_{args.beta:g}.png")
    save_image(out, image)
    print(f"✅ Goutte θ={args.theta}° β={args.beta} écrite dans {out}")
    return 0


def cmd_sweep(args, config: Dict[str, Any]) -> int:
    sweep = _read_campaign(Path(args.config), config)
    lab = VirtualLab.from_config({**config, **sweep}, mode=args.mode)
    frame = run_sweep(sweep, lab, Path(args.out))
    print(f"🧪 {len(frame)} formulations mesurées -> {args.out}")
    return 0


def _read_campaign(path: Path, config: Dict[str, Any]) -> Dict[str, Any]:
    """JSON de campagne ; max_candidates de config.yaml si la campagne ne le fixe pas"""
    campaign = read_json(path)
    limit = section(config, "optimizer").get("max_candidates")
    if limit and "max_candidates" not in campaign:
        campaign["max_candidates"] = int(limit)
    return campaign


def _hyper(config: Dict[str, Any], campaign: Dict[str, Any]) -> HyperPolicy:
    return HyperPolicy.from_dict(campaign.get("hyper") or section(config, "optimizer").get("hyper"))


def cmd_campaign_run(args, config: Dict[str, Any]) -> int:
    campaign_cfg = _read_campaign(Path(args.config), config)
    merged = {**config, **campaign_cfg}
    lab = VirtualLab.from_config(merged, mode=args.mode)
    run_dir = Path(args.out) if args.out else _default_path(config, "runs_dir", str(campaign_cfg.get("id", "campaign")))
    bus = None
    if args.lab == "broker":
        bus = MqttBus(host=args.broker, port=args.port, client_id=f"orchestrateur-{campaign_cfg.get('id')}")
        bus.connect()
    try:
        record = run_campaign(
            campaign_cfg,
            lab,
            budget=args.budget,
            seed=args.seed,
            run_dir=run_dir,
            bus=bus,
            objective=args.objective,
            hyper=_hyper(config, campaign_cfg),
            attach_lab=args.lab == "virtual",
        )
    finally:
        if bus is not None:
            bus.close()

    best = max(record.history, key=lambda r: r.desirability, default=None)
    print(f"✅ Campagne {record.id} : {record.iteration} expériences ({record.status})")
    if best is not None:
        print(f"   Meilleure : #{best.iteration} {best.formulation} θ={best.mean:.2f}° D={best.desirability:.3f}")
    band = campaign_cfg.get("band")
    if band:
        hits = band_hits(record, tuple(band))
        first = hits[0].iteration if hits else "-"
        print(f"   Dans la bande {band[0]}-{band[1]}° : {len(hits)} (première à l'itération {first})")
    print(f"📊 Historique : {run_dir / 'history.csv'}")
    return 0


def cmd_campaign_compare(args, config: Dict[str, Any]) -> int:
    campaign_cfg = _read_campaign(Path(args.config), config)
    seeds = list(range(args.first_seed, args.first_seed + args.seeds))
    merged = {**config, **campaign_cfg}
    frame, summary = compare_campaign_modes(
        campaign_cfg,
        seeds,
        lab_factory=lambda: VirtualLab.from_config(merged),
        budget=args.budget,
        out=Path(args.out) if args.out else None,
    )
    print(frame.to_string(index=False))
    print(f"📊 Médiane première formulation optimale : multi {summary['multi_median']:g}, "
          f"mono {summary['single_median']:g} ({summary['seeds']} graines)")
    if args.out:
        write_json(Path(args.out).with_suffix(".json"), summary)
    return 0


def cmd_lab_serve(args, config: Dict[str, Any]) -> int:
    campaign_cfg = read_json(Path(args.config))
    bus = MqttBus(host=args.broker, port=args.port, client_id=f"labo-{campaign_cfg.get('id')}")
    bus.connect()
    print(f"🧪 Laboratoire virtuel à l'écoute sur {args.broker}:{args.port} (Ctrl+C pour arrêter)")
    try:
        serve_lab({**config, **campaign_cfg}, bus, seed=args.seed)
    finally:
        bus.close()
    return 0


def cmd_report(args, config: Dict[str, Any]) -> int:
    source = Path(getattr(args, "in"))
    out_html = Path(args.out).with_suffix(".html") if args.html else None
    summary = build_report(source, Path(args.out), out_html, tuple(args.band) if args.band else None)
    print(f"📊 {len(summary)} lignes -> {args.out}")
    if out_html:
        print(f"📊 Figures -> {out_html}")
    return 0


def cmd_throughput(args, config: Dict[str, Any]) -> int:
    timing = TimingModel.from_dict(section(config, "timing"))
    seconds = simulate_throughput(timing, args.experiments, args.replicates)
    measurements = args.experiments * args.replicates
    print(f"⏱️ {args.experiments} formulations x {args.replicates} réplicats : {format_duration(seconds)}")
    print(f"   soit {measurements / (seconds / 60):.2f} mesure(s) par minute")
    return 0


# =============================================================================
# ARGUMENTS
# =============================================================================

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Goniolab - laboratoire autonome d'angle de contact")
    parser.add_argument("--settings", default=str(DEFAULT_CONFIG), help="Fichier config.yaml")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("measure", help="Mesure l'angle de contact d'une image")
    p.add_argument("image")
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_measure)

    p = sub.add_parser("render", help="Rend une goutte synthétique")
    p.add_argument("--theta", type=float, required=True)
    p.add_argument("--beta", type=float, default=0.0)
    p.add_argument("--noise", type=float, default=0.0)
    p.add_argument("--tilt", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None, help="PNG (défaut : paths.images_dir)")
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("sweep", help="Balayage exhaustif d'une grille")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--mode", choices=["numeric", "photorealistic"], default=None)
    p.set_defaults(func=cmd_sweep)

    campaign = sub.add_parser("campaign", help="Campagnes d'optimisation")
    csub = campaign.add_subparsers(dest="action", required=True)

    p = csub.add_parser("run")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--budget", type=int, default=None)
    p.add_argument("--lab", choices=["virtual", "broker"], default="virtual")
    p.add_argument("--mode", choices=["numeric", "photorealistic"], default=None)
    p.add_argument("--objective", choices=["multi", "single"], default=None)
    p.add_argument("--broker", default="localhost")
    p.add_argument("--port", type=int, default=1883)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_campaign_run)

    p = csub.add_parser("compare")
    p.add_argument("--config", required=True)
    p.add_argument("--seeds", type=int, default=20)
    p.add_argument("--first-seed", type=int, default=0)
    p.add_argument("--budget", type=int, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_campaign_compare)

    lab = sub.add_parser("lab", help="Laboratoire virtuel derrière un broker MQTT")
    lsub = lab.add_subparsers(dest="action", required=True)
    p = lsub.add_parser("serve")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--broker", default="localhost")
    p.add_argument("--port", type=int, default=1883)
    p.set_defaults(func=cmd_lab_serve)

    p = sub.add_parser("report", help="Résumé CSV (et HTML) d'une campagne")
    p.add_argument("--in", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--html", action="store_true")
    p.add_argument("--band", type=float, nargs=2, default=None)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("throughput", help="Durée simulée d'une série d'expériences")
    p.add_argument("--experiments", type=int, default=30)
    p.add_argument("--replicates", type=int, default=3)
    p.set_defaults(func=cmd_throughput)

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = load_config(Path(args.settings))
    except FileNotFoundError as e:
        print(f"❌ {e}")
        return 1
    setup_logging(config)
    try:
        return args.func(args, config)
    except GoniolabError as e:
        print(f"❌ {e}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
