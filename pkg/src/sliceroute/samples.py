"""Routing-query data model and the line-oriented dataset file format.

A dataset file holds one JSON record per line; the first line is a header
record carrying the format version so files are self-describing.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError

DATASET_FORMAT_VERSION = 1


@dataclass
class QuerySignals:
    utterance_tokens: list[int]
    device_type: int
    shared_context: list[int] = field(default_factory=list)

    def validate(self, vocab_size: int | None = None) -> None:
        if not self.utterance_tokens:
            raise ConfigError("query must contain at least one utterance token")
        if vocab_size is not None and any(t >= vocab_size or t < 0 for t in self.utterance_tokens):
            raise ConfigError("utterance token id outside vocabulary")


@dataclass
class Hypothesis:
    intent: str
    skill: int
    interpretation_features: list[int] = field(default_factory=list)

    def validate(self, num_skills: int | None = None) -> None:
        if not self.intent:
            raise ConfigError("hypothesis intent must be non-empty")
        if num_skills is not None and not (0 <= self.skill < num_skills):
            raise ConfigError(f"skill id {self.skill} outside inventory of size {num_skills}")


@dataclass
class Sample:
    id: str
    signals: QuerySignals
    hypotheses: list[Hypothesis]
    ground_truth_index: int
    ground_truth_intent: str

    def validate(self) -> None:
        self.signals.validate()
        if not self.hypotheses:
            raise ConfigError(f"sample {self.id}: empty hypothesis list")
        if not (0 <= self.ground_truth_index < len(self.hypotheses)):
            raise ConfigError(f"sample {self.id}: ground-truth index out of range")
        if self.ground_truth_intent != self.hypotheses[self.ground_truth_index].intent:
            raise ConfigError(f"sample {self.id}: ground-truth intent does not match the indexed hypothesis")

    def to_record(self) -> dict:
        return {
            "id": self.id,
            "utterance_tokens": self.signals.utterance_tokens,
            "device_type": self.signals.device_type,
            "shared_context": self.signals.shared_context,
            "intent": self.ground_truth_intent,
            "hypotheses": [
                {"intent": h.intent, "skill": h.skill, "interpretation_features": h.interpretation_features}
                for h in self.hypotheses
            ],
            "ground_truth_index": self.ground_truth_index,
        }

    @classmethod
    def from_record(cls, record: dict) -> "Sample":
        return cls(
            id=record["id"],
            signals=QuerySignals(
                utterance_tokens=list(record["utterance_tokens"]),
                device_type=int(record["device_type"]),
                shared_context=list(record.get("shared_context", [])),
            ),
            hypotheses=[
                Hypothesis(
                    intent=h["intent"],
                    skill=int(h["skill"]),
                    interpretation_features=list(h.get("interpretation_features", [])),
                )
                for h in record["hypotheses"]
            ],
            ground_truth_index=int(record["ground_truth_index"]),
            ground_truth_intent=record["intent"],
        )


def dumps_record(obj: dict) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def write_dataset(path: str | Path, samples: list[Sample]) -> None:
    path = Path(path)
    header = {"format_version": DATASET_FORMAT_VERSION, "kind": "routing-dataset"}
    with path.open("w", encoding="utf-8") as fh:
        fh.write(dumps_record(header) + "\n")
        for s in samples:
            fh.write(dumps_record(s.to_record()) + "\n")


def read_dataset(path: str | Path) -> list[Sample]:
    path = Path(path)
    samples: list[Sample] = []
    with path.open("r", encoding="utf-8") as fh:
        header_line = fh.readline()
        if not header_line:
            raise ConfigError(f"{path}: empty dataset file")
        header = json.loads(header_line)
        if header.get("format_version") != DATASET_FORMAT_VERSION:
            raise ConfigError(f"{path}: unsupported dataset format version {header.get('format_version')}")
        for line in fh:
            line = line.strip()
            if line:
                samples.append(Sample.from_record(json.loads(line)))
    return samples


def dataset_hash(path: str | Path) -> str:
    digest = hashlib.sha256()
    with Path(path).open("rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()
