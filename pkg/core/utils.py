"""
core/utils.py
Fonctions utilitaires diverses (configuration, logs, fichiers JSON)
"""

import json
import logging
from pathlib import Path
from typing import List, Dict, Any

import yaml

from .errors import ConfigInvalid

PATH_KEYS = ['configs_dir', 'runs_dir', 'images_dir']


def load_config(config_path: Path) -> Dict[str, Any]:
    """Charge la configuration depuis un fichier YAML"""
    if not config_path.exists():
        raise FileNotFoundError(f"Fichier de configuration non trouvé: {config_path}")

    with open(config_path, 'r', encoding='utf-8') as f:
        config = yaml.safe_load(f) or {}

    if not isinstance(config, dict):
        raise ConfigInvalid(f"{config_path}: la racine doit être un mapping")

    config.setdefault('paths', {})
    base_dir_str = str(config['paths'].get('base_dir', '.'))

    # base_dir relatif = relatif au répertoire du config.yaml
    app_dir = config_path.parent.absolute()
    if base_dir_str == ".":
        base_dir = app_dir
    elif not Path(base_dir_str).is_absolute():
        base_dir = app_dir / base_dir_str
    else:
        base_dir = Path(base_dir_str).expanduser()

    config['paths']['base_dir'] = base_dir.absolute()

    for key in PATH_KEYS:
        if key in config['paths']:
            path = Path(config['paths'][key])
            config['paths'][key] = path if path.is_absolute() else (base_dir / path).absolute()

    return config


def setup_logging(config: Dict[str, Any]) -> None:
    """Configure le logger racine à partir de la section `logging`"""
    section = config.get('logging', {}) or {}
    level = str(section.get('level', 'INFO')).upper()
    fmt = section.get('format', "%(asctime)s %(levelname)s %(name)s: %(message)s")
    logging.basicConfig(level=getattr(logging, level, logging.INFO), format=fmt)


def read_json(path: Path) -> Any:
    """Lit un fichier JSON (UTF-8)"""
    if not path.exists():
        raise ConfigInvalid(f"Fichier introuvable: {path}")
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ConfigInvalid(f"{path}: JSON invalide ({e})") from e


def write_json(path: Path, data: Any) -> None:
    """Écrit un fichier JSON lisible (indenté, non-ASCII conservé)"""
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(data, ensure_ascii=False, indent=2), encoding="utf-8")


def create_directory_structure(base_dir: Path, subdirs: List[str]):
    """Crée une structure de répertoires"""
    base_dir.mkdir(parents=True, exist_ok=True)
    for subdir in subdirs:
        (base_dir / subdir).mkdir(parents=True, exist_ok=True)


def format_duration(seconds: float) -> str:
    """Formate une durée en h/min/s lisibles"""
    seconds = int(round(seconds))
    hours, rest = divmod(seconds, 3600)
    minutes, secs = divmod(rest, 60)
    if hours:
        return f"{hours} h {minutes:02d} min {secs:02d} s"
    if minutes:
        return f"{minutes} min {secs:02d} s"
    return f"{secs} s"


def section(config: Dict[str, Any], name: str) -> Dict[str, Any]:
    """Retourne une section de configuration (dict vide si absente)"""
    value = config.get(name) or {}
    if not isinstance(value, dict):
        raise ConfigInvalid(f"Section '{name}' : mapping attendu")
    return value


class ColorScheme:
    """Couleurs des rapports plotly"""

    PRIMARY = "#1F4E79"     # Bleu acier
    SECONDARY = "#DAA520"   # Or
    SUCCESS = "#228B22"
    WARNING = "#FF8C00"
    DANGER = "#DC143C"
    INFO = "#4682B4"

    @classmethod
    def band(cls) -> Dict[str, str]:
        """Couleurs par statut d'expérience"""
        return {
            "optimal": cls.SUCCESS,
            "dans la bande": cls.SECONDARY,
            "hors cible": cls.INFO,
            "échec": cls.DANGER,
        }
