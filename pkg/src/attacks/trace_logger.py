"""
Attack trace logging: one JSON record per attacked bag
"""

import json
import threading
from pathlib import Path
from typing import Any, Dict, List

from loguru import logger

from ..errors import TraceError
from .config import AttackConfig, AttackResult


class AttackTraceLogger:
    """Appends attack outcomes to a line-delimited trace file per method"""

    def __init__(self, log_dir: str = "runs/traces"):
        self.log_dir = Path(log_dir)
        self.log_dir.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()

    def trace_file(self, config: AttackConfig) -> Path:
        return self.log_dir / f"{config.slug}.jsonl"

    def start(self, config: AttackConfig) -> Path:
        """Truncate the method's trace file before a fresh batch"""
        path = self.trace_file(config)
        try:
            path.write_text("", encoding="utf-8")
        except OSError as e:
            logger.error(f"Failed to start attack trace {path}: {e}")
            raise TraceError(f"Cannot write attack trace {path}: {e}") from e
        return path

    def log_result(self, index: int, result: AttackResult, config: AttackConfig) -> None:
        record = {
            "index": index,
            "outcome": result.outcome.value,
            "true_label": result.true_label,
            "original_paths": result.original_paths,
            "adversarial_paths": result.adversarial_paths,
            "iterations_used": result.iterations_used,
            "epsilon_used": result.epsilon_used,
            "losses": result.losses,
            "dropped_instances": result.dropped_instances,
            "config": config.model_dump(mode="json"),
        }
        try:
            with self._lock, open(self.trace_file(config), "a", encoding="utf-8", newline="\n") as f:
                f.write(json.dumps(record, ensure_ascii=False) + "\n")
        except OSError as e:
            logger.error(f"Failed to write attack trace: {e}")
            raise TraceError(f"Lost trace record {index} of {config.label}: {e}") from e

    def read_traces(self, config: AttackConfig) -> List[Dict[str, Any]]:
        path = self.trace_file(config)
        if not path.exists():
            return []
        try:
            with open(path, "r", encoding="utf-8") as f:
                return [json.loads(line) for line in f if line.strip()]
        except (OSError, json.JSONDecodeError) as e:
            raise TraceError(f"Cannot read attack trace {path}: {e}") from e

    def get_stats(self, config: AttackConfig) -> Dict[str, Any]:
        """Outcome counts for one method's trace"""
        records = self.read_traces(config)
        outcomes: Dict[str, int] = {}
        for record in records:
            outcomes[record["outcome"]] = outcomes.get(record["outcome"], 0) + 1
        return {"total": len(records), "outcomes": outcomes}

    def check_complete(self, config: AttackConfig, expected: int) -> Dict[str, Any]:
        """Stats of a finished trace; raises TraceError unless it holds `expected` records"""
        stats = self.get_stats(config)
        if stats["total"] != expected:
            raise TraceError(f"{self.trace_file(config)} holds {stats['total']} records, expected {expected}")
        logger.debug(f"Trace {self.trace_file(config).name}: {stats['outcomes']}")
        return stats
