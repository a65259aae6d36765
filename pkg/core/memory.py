"""
core/memory.py
Persistance des campagnes : journal d'événements (JSONL, ajout seul)
et répertoire de campagne (record.json, history.csv)
"""

import json
import logging
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, List, Optional

import pandas as pd

from .optimizer import CampaignRecord, is_optimal

logger = logging.getLogger(__name__)

EVENTS_FILE = "events.jsonl"
RECORD_FILE = "record.json"
HISTORY_FILE = "history.csv"


class EventEntry:
    """Un événement du protocole"""

    def __init__(self, seq: int, event: str, data: Dict[str, Any], timestamp: Optional[str] = None):
        self.seq = seq
        self.event = event
        self.data = data
        self.timestamp = timestamp or datetime.now().isoformat()

    def to_dict(self) -> Dict[str, Any]:
        return {"seq": self.seq, "event": self.event, "timestamp": self.timestamp, **self.data}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'EventEntry':
        payload = {k: v for k, v in data.items() if k not in ("seq", "event", "timestamp")}
        return cls(int(data["seq"]), str(data["event"]), payload, data.get("timestamp"))

    def __getitem__(self, key: str) -> Any:
        return self.data[key]

    def get(self, key: str, default: Any = None) -> Any:
        return self.data.get(key, default)


def _encode(entry: EventEntry) -> str:
    return json.dumps(entry.to_dict(), ensure_ascii=False, separators=(",", ":")) + "\n"


class EventLog:
    """Journal en ajout seul ; un seul écrivain"""

    def __init__(self, path: Optional[Path] = None):
        self.path = path
        self.entries: List[EventEntry] = []
        if path and path.exists():
            self.load()

    def append(self, event: str, **data) -> EventEntry:
        entry = EventEntry(len(self.entries) + 1, event, data)
        self.entries.append(entry)
        if self.path:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with open(self.path, "a", encoding="utf-8") as f:
                f.write(_encode(entry))
        logger.info("[%s] %s", event, {k: v for k, v in data.items() if k in ("experiment_id", "iteration")})
        return entry

    def load(self):
        """Relit le journal ; une dernière ligne tronquée (arrêt brutal) est retirée du fichier"""
        self.entries = []
        lines = self.path.read_text(encoding="utf-8").splitlines()
        for number, line in enumerate(lines, start=1):
            if not line.strip():
                continue
            try:
                self.entries.append(EventEntry.from_dict(json.loads(line)))
            except (json.JSONDecodeError, KeyError, ValueError):
                if number == len(lines):
                    logger.warning("Dernière ligne du journal tronquée, supprimée")
                    self._rewrite()
                    break
                raise

    def _rewrite(self):
        self.path.write_text("".join(_encode(e) for e in self.entries), encoding="utf-8")

    def of_kind(self, event: str) -> List[EventEntry]:
        return [e for e in self.entries if e.event == event]

    def __len__(self) -> int:
        return len(self.entries)

    def __bool__(self) -> bool:
        return len(self.entries) > 0


def history_frame(record: CampaignRecord) -> pd.DataFrame:
    """Historique tabulaire : itération, formulation, moyenne/SD, t_i, D, optimalité"""
    names = record.space.names
    rows = []
    for row in record.history:
        data: Dict[str, Any] = {"iteration": row.iteration, "experiment_id": row.experiment_id}
        for name in names:
            data[name] = row.formulation.get(name, 0.0)
        data["mean_deg"] = row.mean
        data["sd_deg"] = row.sd
        for target, t in zip(record.targets, row.t):
            data[f"t_{target.name}"] = t
        data["D"] = row.desirability
        data["optimal"] = is_optimal(row, record.desirability_objective)
        rows.append(data)
    columns = (["iteration", "experiment_id"] + names + ["mean_deg", "sd_deg"]
               + [f"t_{t.name}" for t in record.targets] + ["D", "optimal"])
    return pd.DataFrame.from_records(rows, columns=columns)


class CampaignStore:
    """Répertoire d'une campagne"""

    def __init__(self, run_dir: Path):
        self.run_dir = run_dir
        self.run_dir.mkdir(parents=True, exist_ok=True)
        self.events = EventLog(run_dir / EVENTS_FILE)

    @property
    def history_path(self) -> Path:
        return self.run_dir / HISTORY_FILE

    def save_record(self, record: CampaignRecord):
        (self.run_dir / RECORD_FILE).write_text(
            json.dumps(record.to_dict(), ensure_ascii=False, indent=2),
            encoding="utf-8"
        )

    def load_record(self) -> Optional[Dict[str, Any]]:
        path = self.run_dir / RECORD_FILE
        if not path.exists():
            return None
        return json.loads(path.read_text(encoding="utf-8"))

    def save_history(self, record: CampaignRecord) -> Path:
        history_frame(record).to_csv(self.history_path, index=False, float_format="%.10g", lineterminator="\n")
        return self.history_path

    def save(self, record: CampaignRecord):
        self.save_record(record)
        self.save_history(record)
