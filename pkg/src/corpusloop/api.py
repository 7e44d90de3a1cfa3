"""Read-mostly HTTP API over a project directory, plus the async debug-cycle
trigger. This is the surface the studio UI consumes; GET endpoints never
mutate the project, and at most one debug cycle runs at a time.
"""

from __future__ import annotations

import threading
from pathlib import Path
from typing import Optional

from fastapi import FastAPI, HTTPException, Query
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles

from . import ioutils
from .errors import CorpusLoopError
from .project import Project

MAX_PAGE_SIZE = 500

DEBUG_CYCLE_STAGES = ("diagnose", "patch", "mix")


class DebugCycleRunner:
    """Serializes debug cycles and exposes their progress for polling."""

    def __init__(self, project: Project):
        self.project = project
        self._lock = threading.Lock()
        self._thread: Optional[threading.Thread] = None
        self.state = {"running": False, "stage": "", "progress": 0.0, "round": None, "error": ""}

    def snapshot(self) -> dict:
        with self._lock:
            state = dict(self.state)
        state["round"] = self.project.manifest.round
        return state

    def start(self) -> bool:
        with self._lock:
            if self.state["running"]:
                return False
            self.state = {"running": True, "stage": "starting", "progress": 0.0, "round": None, "error": ""}
            self._thread = threading.Thread(target=self._run, daemon=True)
            self._thread.start()
            return True

    def _run(self) -> None:
        try:
            for n, stage in enumerate(DEBUG_CYCLE_STAGES):
                with self._lock:
                    self.state["stage"] = stage
                    self.state["progress"] = n / len(DEBUG_CYCLE_STAGES)
                self.project.run_stage(stage)
            with self._lock:
                self.state.update(running=False, stage="done", progress=1.0)
        except BaseException as exc:
            with self._lock:
                self.state.update(running=False, stage="failed", progress=1.0, error=str(exc))

    def join(self, timeout: Optional[float] = None) -> None:
        if self._thread is not None:
            self._thread.join(timeout)


def _paginate(rows: list, page: int, page_size: int) -> dict:
    start = (page - 1) * page_size
    return {
        "total": len(rows),
        "page": page,
        "page_size": page_size,
        "items": rows[start : start + page_size],
    }


def _read_jsonl_or_404(path: Path) -> list:
    if not path.exists():
        raise HTTPException(status_code=404, detail=f"artifact not ready: {path.name}")
    return list(ioutils.read_jsonl(path))


def create_app(project_root: str | Path, frontend_dir: Optional[str | Path] = None) -> FastAPI:
    project = Project(project_root)
    runner = DebugCycleRunner(project)
    app = FastAPI(title="corpusloop", version="0.1.0")
    app.state.runner = runner

    def knowledge_path(name: str) -> Path:
        return project.round_dir(1) / "knowledge" / name

    @app.get("/status")
    def status() -> dict:
        try:
            manifest = project.manifest
        except FileNotFoundError:
            raise HTTPException(status_code=404, detail="project not initialized")
        return {
            "round": manifest.round,
            "seed": manifest.seed,
            "config_hash": manifest.config_hash,
            "stages": manifest.stages,
            "hash_mismatches": manifest.hash_mismatches,
        }

    @app.get("/knowledge/chains")
    def chains(
        cid: Optional[str] = None,
        page: int = Query(1, ge=1),
        page_size: int = Query(50, ge=1, le=MAX_PAGE_SIZE),
    ) -> dict:
        rows = _read_jsonl_or_404(knowledge_path("chains.jsonl"))
        if cid:
            rows = [r for r in rows if r.get("cid") == cid]
        return _paginate(rows, page, page_size)

    @app.get("/knowledge/statements")
    def statements(
        cid: Optional[str] = None,
        chain_id: Optional[str] = None,
        page: int = Query(1, ge=1),
        page_size: int = Query(50, ge=1, le=MAX_PAGE_SIZE),
    ) -> dict:
        rows = _read_jsonl_or_404(knowledge_path("statements.jsonl"))
        if chain_id:
            rows = [r for r in rows if r.get("parent_chain_id") == chain_id]
        if cid:
            chain_rows = _read_jsonl_or_404(knowledge_path("chains.jsonl"))
            wanted = {r["chain_id"] for r in chain_rows if r.get("cid") == cid}
            rows = [r for r in rows if r.get("parent_chain_id") in wanted]
        return _paginate(rows, page, page_size)

    @app.get("/knowledge/concepts")
    def concepts(
        cid: Optional[str] = None,
        statement_id: Optional[str] = None,
        page: int = Query(1, ge=1),
        page_size: int = Query(50, ge=1, le=MAX_PAGE_SIZE),
    ) -> dict:
        rows = _read_jsonl_or_404(knowledge_path("concepts.jsonl"))
        if cid:
            rows = [r for r in rows if cid in r.get("cids", [])]
        if statement_id:
            rows = [r for r in rows if statement_id in r.get("parent_statement_ids", [])]
        return _paginate(rows, page, page_size)

    @app.get("/samples")
    def samples(
        origin: Optional[str] = None,
        question_type: Optional[str] = None,
        cid: Optional[str] = None,
        round: int = Query(1, ge=1),
        page: int = Query(1, ge=1),
        page_size: int = Query(50, ge=1, le=MAX_PAGE_SIZE),
    ) -> dict:
        rows = _read_jsonl_or_404(project.round_dir(round) / "corpus.jsonl")
        if origin:
            rows = [r for r in rows if r.get("origin") == origin]
        if question_type:
            rows = [r for r in rows if r.get("question_type") == question_type]
        if cid:
            rows = [r for r in rows if r.get("cid") == cid]
        return _paginate(rows, page, page_size)

    @app.get("/benchmark/items")
    def benchmark_items(
        cid: Optional[str] = None,
        page: int = Query(1, ge=1),
        page_size: int = Query(50, ge=1, le=MAX_PAGE_SIZE),
    ) -> dict:
        rows = _read_jsonl_or_404(project.round_dir(1) / "benchmark.jsonl")
        if cid:
            rows = [r for r in rows if r.get("cid") == cid]
        return _paginate(rows, page, page_size)

    @app.get("/evaluation/report")
    def evaluation_report(round: Optional[int] = None) -> dict:
        rnd = round
        if rnd is None:
            manifest = project.manifest
            rnd = manifest.round
            # after a mix, the fresh round has no report yet; fall back
            while rnd > 1 and not (project.round_dir(rnd) / "eval_report.json").exists():
                rnd -= 1
        path = project.round_dir(rnd) / "eval_report.json"
        if not path.exists():
            raise HTTPException(status_code=404, detail="no evaluation report yet")
        record = ioutils.read_json(path)
        record["round"] = rnd
        patterns_path = project.round_dir(rnd) / "error_patterns.json"
        record["error_patterns"] = ioutils.read_json(patterns_path) if patterns_path.exists() else None
        return record

    @app.post("/debug/run")
    def debug_run() -> JSONResponse:
        manifest = project.manifest
        if manifest.stages["eval"]["status"] != "done":
            raise HTTPException(status_code=409, detail="evaluation must complete before a debug cycle")
        if not runner.start():
            raise HTTPException(status_code=409, detail="a debug cycle is already running")
        return JSONResponse(status_code=202, content={"started": True})

    @app.get("/debug/progress")
    def debug_progress() -> dict:
        return runner.snapshot()

    @app.exception_handler(CorpusLoopError)
    def engine_error(_, exc: CorpusLoopError):
        return JSONResponse(status_code=500, content={"detail": str(exc)})

    if frontend_dir and Path(frontend_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(frontend_dir), html=True), name="studio")
    return app
