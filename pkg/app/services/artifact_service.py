import json
import logging
from pathlib import Path

import numpy as np

from app.core.errors import DataError
from app.learning.qka import write_trace

logger = logging.getLogger(__name__)

REPORT_NAME = "report.json"
FAILED_MARKER = "FAILED"


class ArtifactService:
    """Writes run artifacts under one output directory owned by a single run."""

    def __init__(self, output_dir):
        self.output_dir = Path(output_dir)

    def prepare(self):
        self.output_dir.mkdir(parents=True, exist_ok=True)
        marker = self.output_dir / FAILED_MARKER
        if marker.exists():
            marker.unlink()
        logger.info(f"Writing artifacts to {self.output_dir}")

    def path(self, name):
        return self.output_dir / name

    def save_text(self, name, text):
        path = self.path(name)
        path.write_text(text, encoding="utf-8", newline="\n")
        logger.info(f"Saved {path}")
        return name

    def save_matrix_csv(self, name, matrix):
        path = self.path(name)
        # 17 significant digits
        np.savetxt(path, np.asarray(matrix, dtype=np.float64), fmt="%.16e", delimiter=",")
        logger.info(f"Saved {path} {np.shape(matrix)}")
        return name

    def save_trace(self, name, trace):
        write_trace(trace, self.path(name))
        logger.info(f"Saved SPSA trace ({len(trace)} records) to {self.path(name)}")
        return name

    def save_report(self, report):
        path = self.path(REPORT_NAME)
        path.write_text(report.model_dump_json(indent=2) + "\n", encoding="utf-8", newline="\n")
        logger.info(f"Saved report to {path}")
        return path

    def mark_failed(self, stage, error):
        self.path(FAILED_MARKER).write_text(f"{stage}: {error}\n", encoding="utf-8")

    @staticmethod
    def load_report(run_dir):
        path = Path(run_dir) / REPORT_NAME
        if not path.exists():
            raise DataError(f"no report found in {run_dir}")
        return json.loads(path.read_text(encoding="utf-8"))


def load_matrix_csv(path):
    return np.loadtxt(path, delimiter=",", ndmin=2)
