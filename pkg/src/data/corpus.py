"""
Synthetic filepath-bag corpus.

Benign bags are drawn from system and application paths. Malicious bags mix
benign paths with dropper-style paths that carry randomised filename stems in
temp-like directories. Past the drift timestamp, malicious bags switch to
mutated templates so a temporal split sees unseen variants at test time.
"""

import string
from typing import Dict, List, Optional

import numpy as np
from loguru import logger
from pydantic import BaseModel, ConfigDict, Field, model_validator

from ..errors import DatasetError
from .dataset import BENIGN, MALICIOUS, Bag, DatasetFile

DEFAULT_BENIGN_TEMPLATES = [
    "C:\\WINDOWS\\system32\\{sysfile}.dll",
    "C:\\WINDOWS\\system32\\{sysfile}.exe",
    "C:\\Program Files\\{vendor}\\{appfile}",
    "C:\\Program Files\\{vendor}\\{app}\\{appfile}",
    "C:\\Documents and Settings\\{user}\\Application Data\\{vendor}\\{appfile}",
    "C:\\WINDOWS\\Temp\\GUM{hex}.tmp\\goopdateres_{lang}.dll",
    "C:\\WINDOWS\\Prefetch\\{app}.EXE-{hex8}.pf",
    "C:\\WINDOWS\\Fonts\\{font}.ttf",
]

DEFAULT_CONFUSABLE_TEMPLATES = [
    "C:\\WINDOWS\\Temp\\~DF{hex}.tmp",
    "C:\\WINDOWS\\Temp\\nsu{hex}.tmp\\System.dll",
]

DEFAULT_MALICIOUS_TEMPLATES = [
    "C:\\WINDOWS\\Temp\\{stem}.{mext}",
    "C:\\WINDOWS\\Temp\\ns{stem}.tmp\\{plugin}.dll",
    "C:\\Documents and Settings\\{user}\\Local Settings\\Temp\\{stem}.exe",
    "C:\\Documents and Settings\\{user}\\Application Data\\{stem}\\{stem}.exe",
    "C:\\WINDOWS\\system32\\{stem}.{mext}",
]

DEFAULT_DRIFT_TEMPLATES = [
    "C:\\WINDOWS\\Temp\\{stem}{hex}.{dext}",
    "C:\\Users\\{user}\\AppData\\Local\\Temp\\{stem}.{mext}",
    "C:\\ProgramData\\{stem}\\{stem}.{dext}",
    "C:\\WINDOWS\\Temp\\ns{stem}.tmp\\{stem}.dll",
]

DEFAULT_SLOTS: Dict[str, List[str]] = {
    "sysfile": ["kernel32", "user32", "advapi32", "shell32", "ole32", "gdi32", "ntdll", "msvcrt",
                "comctl32", "ws2_32", "wininet", "crypt32", "rpcrt4", "svchost", "explorer"],
    "vendor": ["Mozilla", "Google", "Adobe", "Yandex", "Opera", "Oracle", "Skype", "VideoLAN"],
    "app": ["Firefox", "Chrome", "Reader", "Browser", "Update", "Java", "VLC", "Acrobat"],
    "appfile": ["ui", "config.ini", "update.exe", "prefs.js", "cache.db", "setup.log", "app.exe",
                "plugin.dll", "settings.xml", "uninst.exe"],
    "user": ["Admin", "User", "Owner", "John", "Office", "Guest"],
    "lang": ["en", "uk", "de", "fr", "zh-TW", "en-GB", "pt-BR", "ja"],
    "font": ["arial", "tahoma", "verdana", "cour", "times", "segoeui"],
    "plugin": ["UAC", "System", "nsExec", "InstallOptions", "StartMenu"],
    "mext": ["exe", "dll", "ini", "tmp", "bat", "scr"],
    "dext": ["dat", "bin", "pif", "cpl", "vbs", "com"],
}

STEM_ALPHABET = string.ascii_letters + string.digits
HEX_ALPHABET = "0123456789ABCDEF"
HEX_WIDTHS = {"hex": 4, "hex8": 8}
_FORMATTER = string.Formatter()


class CorpusSpec(BaseModel):
    """Parameters of the synthetic corpus"""

    model_config = ConfigDict(extra="forbid")

    seed: int = 0
    bag_count: int = Field(default=4000, ge=1)
    bag_size_min: int = Field(default=2, ge=1)
    bag_size_max: int = Field(default=10, ge=1)
    class_balance: float = Field(default=0.5, gt=0, lt=1)
    benign_templates: List[str] = Field(default_factory=lambda: list(DEFAULT_BENIGN_TEMPLATES))
    confusable_templates: List[str] = Field(default_factory=lambda: list(DEFAULT_CONFUSABLE_TEMPLATES))
    malicious_templates: List[str] = Field(default_factory=lambda: list(DEFAULT_MALICIOUS_TEMPLATES))
    drift_templates: List[str] = Field(default_factory=lambda: list(DEFAULT_DRIFT_TEMPLATES))
    slots: Dict[str, List[str]] = Field(default_factory=lambda: {k: list(v) for k, v in DEFAULT_SLOTS.items()})
    stem_length_min: int = Field(default=3, ge=1)
    stem_length_max: int = Field(default=8, ge=1)
    malicious_fraction_min: float = Field(default=0.2, gt=0, le=1)
    malicious_fraction_max: float = Field(default=0.6, gt=0, le=1)
    confusable_probability: float = Field(default=0.3, ge=0, le=1)
    noise_probability: float = Field(default=0.05, ge=0, le=1)
    timestamp_min: int = 0
    timestamp_max: int = 10000
    drift_timestamp: Optional[int] = 8000
    max_path_length: int = Field(default=64, ge=8)

    @model_validator(mode="after")
    def _check_ranges(self) -> "CorpusSpec":
        if self.bag_size_min > self.bag_size_max:
            raise ValueError("bag_size_min must not exceed bag_size_max")
        if self.stem_length_min > self.stem_length_max:
            raise ValueError("stem_length_min must not exceed stem_length_max")
        if self.malicious_fraction_min > self.malicious_fraction_max:
            raise ValueError("malicious_fraction_min must not exceed malicious_fraction_max")
        if self.timestamp_min > self.timestamp_max:
            raise ValueError("timestamp_min must not exceed timestamp_max")
        return self

    def split_timestamp(self) -> int:
        """Default temporal cutoff: the drift point, else the middle of the range"""
        if self.drift_timestamp is not None:
            return self.drift_timestamp
        return (self.timestamp_min + self.timestamp_max + 1) // 2


class PathSampler:
    """Fills path templates from the corpus slot vocabularies"""

    def __init__(self, spec: CorpusSpec, rng: np.random.Generator):
        self.spec = spec
        self.rng = rng

    def _pick(self, options: List[str]) -> str:
        return options[int(self.rng.integers(len(options)))]

    def _stem(self) -> str:
        n = int(self.rng.integers(self.spec.stem_length_min, self.spec.stem_length_max + 1))
        return "".join(self._pick(STEM_ALPHABET) for _ in range(n))

    def _hex(self, width: int) -> str:
        return "".join(self._pick(HEX_ALPHABET) for _ in range(width))

    def _draw(self, name: str) -> str:
        if name == "stem":
            return self._stem()
        if name in HEX_WIDTHS:
            return self._hex(HEX_WIDTHS[name])
        if name in self.spec.slots:
            return self._pick(self.spec.slots[name])
        raise KeyError(name)

    def fill(self, template: str) -> str:
        """Draw each placeholder the template names once, in sorted name order.

        The draw order depends only on the template, never on how the slot
        mapping happens to be ordered.
        """
        try:
            names = sorted({field for _, field, _, _ in _FORMATTER.parse(template) if field})
            return template.format(**{name: self._draw(name) for name in names})
        except KeyError as e:
            raise DatasetError(f"Template {template!r} uses unknown slot {e}") from None
        except (ValueError, IndexError) as e:
            raise DatasetError(f"Malformed template {template!r}: {e}") from None

    def sample(self, templates: List[str]) -> str:
        limit = self.spec.max_path_length
        for _ in range(20):
            path = self.fill(self._pick(templates))
            if len(path) <= limit:
                return path
        return path[:limit]


def generate(spec: CorpusSpec) -> DatasetFile:
    """Deterministic corpus for a given spec; classes are exactly stratified"""
    if not spec.benign_templates or not spec.malicious_templates:
        raise DatasetError("Corpus spec needs non-empty benign and malicious template pools")
    if spec.drift_timestamp is not None and not spec.drift_templates:
        raise DatasetError("Corpus spec sets a drift timestamp but has no drift templates")

    rng = np.random.default_rng(spec.seed)
    sampler = PathSampler(spec, rng)
    n_malicious = int(round(spec.bag_count * spec.class_balance))
    labels = rng.permutation([MALICIOUS] * n_malicious + [BENIGN] * (spec.bag_count - n_malicious))
    timestamps = rng.integers(spec.timestamp_min, spec.timestamp_max + 1, size=spec.bag_count)

    bags = []
    for label, timestamp in zip(labels, timestamps):
        size = int(rng.integers(spec.bag_size_min, spec.bag_size_max + 1))
        drifted = spec.drift_timestamp is not None and timestamp >= spec.drift_timestamp
        bad_pool = spec.drift_templates if drifted else spec.malicious_templates
        # Noisy bags carry the other class's content under their true label.
        noisy = rng.random() < spec.noise_probability
        carries_signal = (label == MALICIOUS) != noisy

        paths = [sampler.sample(spec.benign_templates) for _ in range(size)]
        if spec.confusable_templates and rng.random() < spec.confusable_probability:
            paths[int(rng.integers(size))] = sampler.sample(spec.confusable_templates)
        if carries_signal:
            fraction = rng.uniform(spec.malicious_fraction_min, spec.malicious_fraction_max)
            n_bad = min(size, max(1, int(round(size * fraction))))
            for slot in rng.choice(size, size=n_bad, replace=False):
                paths[int(slot)] = sampler.sample(bad_pool)
        bags.append(Bag(label=int(label), timestamp=int(timestamp), paths=paths))

    order = sorted(range(len(bags)), key=lambda i: bags[i].timestamp)
    dataset = DatasetFile(bags[i] for i in order)
    logger.info(f"Generated {len(dataset)} bags ({n_malicious} malicious) from seed {spec.seed}")
    return dataset
