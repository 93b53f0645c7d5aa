"""
Self-describing checkpoint container shared by the codec and the classifier.

A checkpoint is a zip of .npy members: one little-endian float64 array per
parameter plus a `__meta__` member holding JSON with the format version, the
model kind and every hyperparameter. Member timestamps are fixed so that the
same parameters always produce the same bytes.
"""

import json
import zipfile
from pathlib import Path
from typing import Any, Dict, Tuple

import numpy as np
from loguru import logger

from ..errors import CheckpointError

FORMAT_VERSION = 1
META_KEY = "__meta__"
_FIXED_DATE = (1980, 1, 1, 0, 0, 0)


def _write_member(zf: zipfile.ZipFile, name: str, array: np.ndarray) -> None:
    info = zipfile.ZipInfo(f"{name}.npy", date_time=_FIXED_DATE)
    info.compress_type = zipfile.ZIP_STORED
    with zf.open(info, "w") as f:
        np.lib.format.write_array(f, array, allow_pickle=False)


def save_checkpoint(path, model_kind: str, hyperparameters: Dict[str, Any],
                    state: Dict[str, np.ndarray]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    meta = {"format_version": FORMAT_VERSION, "model_kind": model_kind,
            "hyperparameters": hyperparameters, "parameters": sorted(state)}
    with zipfile.ZipFile(path, "w") as zf:
        _write_member(zf, META_KEY, np.array(json.dumps(meta, sort_keys=True)))
        for name in sorted(state):
            _write_member(zf, name, np.ascontiguousarray(state[name], dtype="<f8"))
    logger.info(f"Saved {model_kind} checkpoint with {len(state)} tensors to {path}")
    return path


def load_checkpoint(path, expected_kind: str = None) -> Tuple[Dict[str, Any], Dict[str, np.ndarray]]:
    """Return (meta, state); raises CheckpointError on anything unexpected"""
    path = Path(path)
    if not path.exists():
        raise CheckpointError(f"Checkpoint not found: {path}")
    try:
        with np.load(path, allow_pickle=False) as npz:
            if META_KEY not in npz.files:
                raise CheckpointError(f"{path} has no metadata member")
            meta = json.loads(str(npz[META_KEY]))
            state = {name: npz[name] for name in npz.files if name != META_KEY}
    except CheckpointError:
        raise
    except (OSError, ValueError, zipfile.BadZipFile) as e:
        raise CheckpointError(f"Cannot read checkpoint {path}: {e}") from None

    if meta.get("format_version") != FORMAT_VERSION:
        raise CheckpointError(f"{path}: unsupported format version {meta.get('format_version')}")
    if expected_kind and meta.get("model_kind") != expected_kind:
        raise CheckpointError(f"{path} holds a '{meta.get('model_kind')}' model, expected '{expected_kind}'")
    logger.debug(f"Loaded {meta.get('model_kind')} checkpoint {path}")
    return meta, state
