"""
Pipeline reports: a self-contained JSON record of one run.

Top-level keys are fixed: pipeline, inputs, outputs, certificates, version,
elapsed_seconds. Two runs with equal inputs have equal reports apart from
``elapsed_seconds``.
"""
import json
import logging
import os
import time
from dataclasses import dataclass, field
from typing import Any, Dict, Optional

from config.settings import LEX_ORDER_TAG, REPORT_DIR, TOOLKIT_VERSION
from utils.helpers import render_frame, render_table, save_report, size_multiset_frame

logger = logging.getLogger(__name__)


@dataclass
class PipelineReport:
    pipeline: str
    inputs: Dict[str, Any] = field(default_factory=dict)
    outputs: Dict[str, Any] = field(default_factory=dict)
    certificates: Dict[str, Any] = field(default_factory=dict)
    version: str = TOOLKIT_VERSION
    elapsed_seconds: float = 0.0
    _started: float = field(default_factory=time.perf_counter, repr=False, compare=False)

    def __post_init__(self):
        self.inputs.setdefault("lexorder", LEX_ORDER_TAG)

    @property
    def holds(self) -> bool:
        """False when the run refuted its claim (a failed filter or a non-design)."""
        return bool(self.outputs.get("holds", True))

    def finish(self) -> "PipelineReport":
        self.elapsed_seconds = round(time.perf_counter() - self._started, 3)
        return self

    def to_dict(self) -> Dict[str, Any]:
        return {
            "pipeline": self.pipeline,
            "inputs": self.inputs,
            "outputs": self.outputs,
            "certificates": self.certificates,
            "version": self.version,
            "elapsed_seconds": self.elapsed_seconds,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def save(self, directory: Optional[str] = None) -> str:
        path = os.path.join(directory or REPORT_DIR, f"{self.pipeline}.json")
        save_report(self.to_dict(), path)
        logger.info(f"Report written to {path}")
        return path

    def render(self) -> str:
        """Plain-text rendering: scalar fields as a table, nested values as JSON, then any orbit size table."""
        rows = []
        for section in ("inputs", "outputs", "certificates"):
            for key, value in getattr(self, section).items():
                shown = value if isinstance(value, (int, str, bool, float)) or value is None else json.dumps(value)
                rows.append({"section": section, "key": key, "value": shown})
        header = f"{self.pipeline} (v{self.version}, {self.elapsed_seconds:.3f}s)"
        text = header + "\n" + render_table(rows)
        sizes = self.outputs.get("size_multiset")
        if sizes:
            text += "\n\n" + render_frame(size_multiset_frame({int(s): n for s, n in sizes.items()}))
        return text
