"""
Bag records and the line-delimited dataset file format
"""

import json
from pathlib import Path
from typing import Iterable, List, Literal, Optional, Tuple

from loguru import logger
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from ..errors import DatasetError

BENIGN = 0
MALICIOUS = 1


class Bag(BaseModel):
    """A labelled set of filepaths; one classification example"""

    model_config = ConfigDict(extra="forbid", frozen=True)

    label: Literal[0, 1]
    timestamp: int = 0
    paths: List[str] = Field(min_length=1)
    split: Optional[Literal["train", "test"]] = None

    @field_validator("paths")
    @classmethod
    def _byte_strings(cls, paths: List[str]) -> List[str]:
        for path in paths:
            if not path:
                raise ValueError("paths must be non-empty strings")
            if any(ord(c) > 255 for c in path):
                raise ValueError(f"path is not a byte string: {path!r}")
        return paths

    @property
    def size(self) -> int:
        return len(self.paths)


class DatasetFile:
    """One JSON object per line: {label, timestamp, paths}"""

    def __init__(self, bags: Iterable[Bag]):
        self.bags: List[Bag] = list(bags)

    def __len__(self) -> int:
        return len(self.bags)

    def __iter__(self):
        return iter(self.bags)

    def to_lines(self) -> List[str]:
        return [json.dumps(bag.model_dump(exclude_none=True), ensure_ascii=False) for bag in self.bags]

    @classmethod
    def from_lines(cls, lines: Iterable[str], source: str = "<memory>") -> "DatasetFile":
        bags = []
        for number, line in enumerate(lines, start=1):
            if not line.strip():
                continue
            try:
                bags.append(Bag.model_validate_json(line))
            except ValidationError as e:
                raise DatasetError(f"{source}:{number}: invalid bag record: {e.errors()[0]['msg']}") from None
        return cls(bags)

    def write(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            for line in self.to_lines():
                f.write(line + "\n")
        logger.info(f"Wrote {len(self.bags)} bags to {path}")
        return path

    @classmethod
    def read(cls, path) -> "DatasetFile":
        path = Path(path)
        if not path.exists():
            raise DatasetError(f"Dataset file not found: {path}")
        with open(path, "r", encoding="utf-8") as f:
            dataset = cls.from_lines(f, source=str(path))
        logger.info(f"Read {len(dataset)} bags from {path}")
        return dataset

    def labels(self) -> List[int]:
        return [bag.label for bag in self.bags]

    def all_paths(self) -> List[str]:
        return [p for bag in self.bags for p in bag.paths]


def temporal_split(bags: Iterable[Bag], cutoff: int, allow_empty: bool = False) -> Tuple[List[Bag], List[Bag]]:
    """Train gets timestamps strictly before the cutoff, test gets the rest"""
    bags = list(bags)
    train = [b.model_copy(update={"split": "train"}) for b in bags if b.timestamp < cutoff]
    test = [b.model_copy(update={"split": "test"}) for b in bags if b.timestamp >= cutoff]
    if not allow_empty and (not train or not test):
        lo = min((b.timestamp for b in bags), default=None)
        hi = max((b.timestamp for b in bags), default=None)
        raise DatasetError(f"Cutoff {cutoff} leaves an empty side (timestamps span {lo}..{hi}, "
                           f"train={len(train)}, test={len(test)})")
    logger.info(f"Temporal split at {cutoff}: {len(train)} train / {len(test)} test bags")
    return train, test
