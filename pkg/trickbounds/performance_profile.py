import csv
import json
import logging
import os
import threading
import time
from datetime import datetime
from typing import Iterable, List, Optional

logger = logging.getLogger(__name__)


class PerformanceProfiler:
    """
    PerformanceProfiler measures and records, for one experiment run:
      - Total wall-clock latency
      - Per-chunk trial timings
      - Trial throughput (trials per second)
    It also provides methods to export these metrics to CSV and JSON files.
    """
    def __init__(self):
        self.start_time = None
        self.chunk_times = []
        self.trial_count = 0
        self.total_latency = 0.0
        self.lock = threading.Lock()

    def start(self):
        self.start_time = time.perf_counter()
        self.chunk_times = []
        self.trial_count = 0
        logger.debug("Performance profiling started.")

    def record_chunk(self, trials: int, chunk_time: float):
        # called from worker threads
        with self.lock:
            self.chunk_times.append(chunk_time)
            self.trial_count += trials
            chunk = len(self.chunk_times)
        logger.debug(f"Recorded chunk {chunk}: {trials} trials in {chunk_time:.4f} sec")

    def finish(self) -> float:
        if self.start_time is not None:
            self.total_latency = time.perf_counter() - self.start_time
        logger.debug(f"Profiling finished. Total latency: {self.total_latency:.4f} sec")
        return self.total_latency

    def average_trial_time(self) -> float:
        if self.trial_count > 0:
            return sum(self.chunk_times) / self.trial_count
        return 0.0

    def throughput(self) -> float:
        if self.total_latency > 0:
            return self.trial_count / self.total_latency
        return 0.0

    def metrics(self) -> dict:
        return {
            "total_latency": self.total_latency,
            "trials": self.trial_count,
            "throughput": self.throughput(),
            "avg_trial_time": self.average_trial_time(),
            "chunks": len(self.chunk_times),
        }

    def export_metrics(self, experiment: str, output_dir: str = ".", filename_prefix: Optional[str] = None) -> List[str]:
        timestamp = datetime.now().strftime("%Y%m%d_%H%M%S")
        prefix = filename_prefix or experiment
        csv_filename = os.path.join(output_dir, f"{prefix}_performance_{timestamp}.csv")
        json_filename = os.path.join(output_dir, f"{prefix}_performance_{timestamp}.json")
        metrics = self.metrics()
        written = []

        try:
            with open(csv_filename, "w", newline="") as csvfile:
                writer = csv.writer(csvfile)
                writer.writerow(["total_latency", "trials", "throughput", "avg_trial_time", "chunks"])
                writer.writerow([
                    f"{metrics['total_latency']:.6f}",
                    metrics["trials"],
                    f"{metrics['throughput']:.6f}",
                    f"{metrics['avg_trial_time']:.6f}",
                    metrics["chunks"],
                ])
            logger.info(f"Performance metrics saved to CSV: {csv_filename}")
            written.append(csv_filename)
        except OSError as e:
            logger.error(f"Failed to save CSV metrics: {e}")

        try:
            with open(json_filename, "w") as jsonfile:
                json.dump({**metrics, "experiment": experiment, "per_chunk_times": self.chunk_times}, jsonfile, indent=2)
            logger.info(f"Performance metrics saved to JSON: {json_filename}")
            written.append(json_filename)
        except OSError as e:
            logger.error(f"Failed to save JSON metrics: {e}")
        return written


def _flatten(record: dict, prefix: str = "") -> dict:
    flat = {}
    for key, value in record.items():
        name = f"{prefix}{key}"
        if isinstance(value, dict):
            flat.update(_flatten(value, f"{name}."))
        elif isinstance(value, (list, tuple)):
            flat[name] = json.dumps(value, sort_keys=True)
        else:
            flat[name] = value
    return flat


def save_records(records: Iterable[dict], file_prefix: str):
    """
    Append records to <file_prefix>.csv (header written when the file is new) and
    rewrite <file_prefix>.json with the latest batch.
    """
    records = list(records)
    if not records:
        return
    csv_path = f"{file_prefix}.csv"
    json_path = f"{file_prefix}.json"
    try:
        rows = [_flatten(r) for r in records]
        header = sorted({key for row in rows for key in row})
        write_header = not os.path.exists(csv_path)
        with open(csv_path, "a", newline="") as cf:
            writer = csv.DictWriter(cf, fieldnames=header, extrasaction="ignore")
            if write_header:
                writer.writeheader()
            writer.writerows(rows)
        with open(json_path, "w") as jf:
            json.dump(records, jf, indent=2, sort_keys=True)
        logger.info(f"Records appended to {csv_path} (snapshot {json_path})")
    except OSError as e:
        logger.error(f"Failed to save records: {e}")
