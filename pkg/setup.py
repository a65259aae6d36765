"""
setup.py
Script d'installation et de vérification initiale
"""

import subprocess
import sys
from pathlib import Path

ROOT = Path(__file__).parent


def print_header(text):
    """Affiche un header stylisé"""
    print("\n" + "="*60)
    print(f"  {text}")
    print("="*60 + "\n")


def check_python_version():
    """Vérifie la version de Python"""
    print("🔍 Vérification de Python...")

    if sys.version_info < (3, 9):
        print("❌ Python 3.9+ requis!")
        print(f"   Version actuelle: {sys.version}")
        return False

    print(f"✅ Python {sys.version_info.major}.{sys.version_info.minor} détecté")
    return True


def install_dependencies():
    """Installe les dépendances"""
    print("\n📦 Installation des dépendances...")

    requirements_path = ROOT / "requirements.txt"
    if not requirements_path.exists():
        print("   ❌ requirements.txt non trouvé!")
        return False

    try:
        subprocess.run(
            [sys.executable, "-m", "pip", "install", "-r", str(requirements_path)],
            check=True
        )
        print("   ✅ Dépendances installées")
        return True
    except subprocess.CalledProcessError as e:
        print(f"   ❌ Erreur lors de l'installation: {e}")
        return False


def check_broker():
    """Le broker MQTT n'est utile que pour le mode --lab broker"""
    print("\n🔍 Vérification du broker MQTT...")
    try:
        result = subprocess.run(["mosquitto", "-h"], capture_output=True, text=True, timeout=5)
    except FileNotFoundError:
        print("⚠️  mosquitto non trouvé : seul le bus en processus sera disponible")
        return False
    except subprocess.TimeoutExpired:
        print("⚠️  mosquitto ne répond pas")
        return False
    first_line = (result.stdout or result.stderr).splitlines()[:1]
    print(f"✅ {first_line[0] if first_line else 'mosquitto'}")
    return True


def create_directories():
    """Crée les répertoires déclarés dans config.yaml"""
    from core.utils import create_directory_structure, load_config

    print("\n📁 Création de la structure de répertoires...")
    config = load_config(ROOT / "config.yaml")
    paths = config["paths"]
    create_directory_structure(paths["base_dir"], [paths[k] for k in ("runs_dir", "images_dir") if k in paths])
    for key in ("runs_dir", "images_dir"):
        if key in paths:
            print(f"   ✅ {paths[key]}")
    return config


def check_measurement(config):
    """Rend une goutte d'eau (104°) et la mesure"""
    import numpy as np

    from core.imaging import PipelineParams, measure_contact_angle
    from core.render import RenderParams, render_droplet

    print("\n🔬 Vérification de la chaîne de mesure...")
    image = render_droplet(104.0, RenderParams.from_dict(config.get("render")), np.random.default_rng(0))
    result = measure_contact_angle(image, PipelineParams.from_dict(config.get("image")))
    error = abs(result.contact_angle_deg - 104.0)
    status = "✅" if error <= 1.0 else "⚠️ "
    print(f"   {status} θ mesuré {result.contact_angle_deg:.2f}° (écart {error:.2f}°, RMSE {result.rmse_px:.2f} px)")
    return error <= 1.0


def main():
    """Fonction principale"""
    print_header("🔬 INSTALLATION - GONIOLAB")

    if not check_python_version():
        return

    install_deps = input("   Installer les dépendances Python? (O/n): ").strip()
    if install_deps.lower() != 'n':
        if not install_dependencies():
            return

    sys.path.insert(0, str(ROOT))
    config = create_directories()
    has_broker = check_broker()
    check_measurement(config)

    print_header("✅ INSTALLATION TERMINÉE")
    print("📋 Prochaines étapes:")
    print("   1. Tests : pytest (ajouter -m 'not slow' pour la série rapide)")
    print("   2. Campagne : python app.py campaign run --config configs/ethanol_campaign.json")
    if not has_broker:
        print("\n⚠️  Pour le mode broker, installer mosquitto (ou tout broker MQTT 3.1.1)")


if __name__ == "__main__":
    try:
        main()
    except KeyboardInterrupt:
        print("\n\n⚠️  Installation annulée")
    except Exception as e:
        print(f"\n\n❌ Erreur inattendue: {e}")
        import traceback
        traceback.print_exc()
