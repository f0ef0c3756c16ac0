"""
RunService
==========

In-memory bookkeeping for pipeline invocations. Every call to one of the
reconstruction pipelines is recorded as a run with a unique ID, the
method name and parameters, timestamps, an overall status and a plan of
named steps. Steps move ``pending`` → ``running`` → ``success`` or
``failed``; when a step fails the remaining pending steps are marked
``cancelled`` and the run is ``failed``.

Each transition is appended to the run's event list, so the CLI and the
benchmark can read per-step timings back, and steps may attach
intermediate images to the run for later inspection.
"""

from __future__ import annotations

import datetime as dt
import time
import uuid
from contextlib import contextmanager
from typing import Any, Dict, Iterator, Mapping, Optional, Sequence

from loguru import logger

from .grid import PeriodicImage


def _now() -> str:
    return dt.datetime.now(dt.timezone.utc).isoformat()


class RunService:
    """A lightweight manager for pipeline runs with a basic state machine."""

    def __init__(self) -> None:
        self._runs: Dict[str, Dict[str, Any]] = {}

    def start(self, method: str, plan: Sequence[str], params: Optional[Mapping[str, Any]] = None) -> str:
        run_id = str(uuid.uuid4())
        self._runs[run_id] = {
            "runId": run_id,
            "method": method,
            "params": dict(params or {}),
            "startedAt": _now(),
            "finishedAt": None,
            # Overall status: created → running → completed/failed
            "status": "created",
            "plan": [{"name": name, "status": "pending", "seconds": None} for name in plan],
            "events": [],
            "intermediates": {},
        }
        self._emit(run_id, "stateChanged", status="created")
        logger.debug("run {} created for {} with plan {}", run_id, method, list(plan))
        return run_id

    def _get(self, run_id: str) -> Dict[str, Any]:
        run = self._runs.get(run_id)
        if run is None:
            raise KeyError(f"run {run_id} not found")
        return run

    def _emit(self, run_id: str, kind: str, **data: Any) -> None:
        self._get(run_id)["events"].append({"type": kind, "at": _now(), "data": data})

    def _step(self, run: Dict[str, Any], name: str) -> Dict[str, Any]:
        for step in run["plan"]:
            if step["name"] == name:
                return step
        raise KeyError(f"run {run['runId']} has no step {name!r}")

    @contextmanager
    def step(self, run_id: str, name: str) -> Iterator[None]:
        """Execute the body of a ``with`` block as plan step ``name``."""
        run = self._get(run_id)
        step = self._step(run, name)
        if run["status"] == "created":
            run["status"] = "running"
            self._emit(run_id, "stateChanged", status="running")
        step["status"] = "running"
        self._emit(run_id, "stepChanged", step=name, status="running")
        started = time.perf_counter()
        try:
            yield
        except Exception as e:
            step["seconds"] = time.perf_counter() - started
            step["status"] = "failed"
            self._emit(run_id, "stepChanged", step=name, status="failed", error=str(e))
            self._fail(run)
            logger.warning("run {} failed in step {}: {}", run_id, name, e)
            raise
        step["seconds"] = time.perf_counter() - started
        step["status"] = "success"
        self._emit(run_id, "stepChanged", step=name, status="success", seconds=step["seconds"])
        logger.info("{} · {} done in {:.2f}s", run["method"], name, step["seconds"])

    def _fail(self, run: Dict[str, Any]) -> None:
        for s in run["plan"]:
            if s["status"] == "pending":
                s["status"] = "cancelled"
        run["status"] = "failed"
        run["finishedAt"] = _now()
        self._emit(run["runId"], "finished", status="failed")

    def skip(self, run_id: str, name: str) -> None:
        """Mark a step as not needed for this input (for example no BAD pixels)."""
        step = self._step(self._get(run_id), name)
        step["status"] = "skipped"
        self._emit(run_id, "stepChanged", step=name, status="skipped")

    def log(self, run_id: str, message: str, **data: Any) -> None:
        self._emit(run_id, "log", message=message, **data)

    def record(self, run_id: str, key: str, image: PeriodicImage) -> None:
        self._get(run_id)["intermediates"][key] = image

    def finish(self, run_id: str) -> None:
        run = self._get(run_id)
        if run["status"] == "failed":
            return
        run["status"] = "completed"
        run["finishedAt"] = _now()
        self._emit(run_id, "finished", status="completed")

    def describe(self, run_id: str) -> Dict[str, Any]:
        # Return a copy to avoid accidental mutation
        return dict(self._get(run_id))

    def timings(self, run_id: str) -> Dict[str, float]:
        return {s["name"]: s["seconds"] for s in self._get(run_id)["plan"] if s["seconds"] is not None}

    def total_seconds(self, run_id: str) -> float:
        return float(sum(self.timings(run_id).values()))


run_service = RunService()
