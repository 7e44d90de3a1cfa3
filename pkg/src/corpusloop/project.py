"""Project lifecycle: configuration, the stage state machine, and artifact
layout.

A project directory holds an immutable inputs/ area, one round-N/ directory
per cycle, and a manifest tracking stage status with content hashes for
provenance. Stage execution is atomic at the manifest level
(write-temp-then-rename) and guarded by a single-writer lock file.
"""

from __future__ import annotations

import hashlib
import os
import time
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

from . import ioutils
from .backend import Backend, BackendConfig, FixtureBackend, HttpBackend
from .benchmark import BenchmarkItem, check_orthogonality, generate_item
from .curation import Chunk, curate_corpus
from .errors import ConfigError, CorpusLoopError, PredecessorIncomplete, StageFailed
from .evaluation import EvaluationReport, Prediction, score
from .extraction import ExtractionConfig, run_extraction
from .knowledge import KnowledgeStructure
from .repair import (
    Diagnosis,
    aggregate_patterns,
    build_patch_context,
    diagnose_all,
    generate_patch,
    render_diagnostic_report,
    run_debug_cycle,
)
from .synthesis import FormatMix, TrainingSample, coverage_report, synthesize_discipline

STAGES = ("curate", "extract", "bench", "synth", "eval", "diagnose", "patch", "mix", "report")
# Stages re-run every debug round; the rest build shared round-1 artifacts.
CYCLE_STAGES = ("eval", "diagnose", "patch", "mix")

STAGE_STATUSES = ("pending", "running", "done", "failed")

MANIFEST_FILE = "manifest.json"
CONFIG_FILE = "config.txt"
LOCK_FILE = ".corpusloop.lock"

DEFAULT_CONFIG = {
    "seed": "42",
    "backend_mode": "replay",
    "fixture_path": "inputs/fixtures.json",
    "endpoint_url": "",
    "model_name": "external",
    "timeout": "60",
    "max_retries": "3",
    "requests_per_minute": "60",
    "corpus_path": "inputs/docs.jsonl",
    "predictions_path": "predictions/round-{round}.jsonl",
    "tau": "3.5",
    "chunk_tokens": "1200",
    "min_steps": "3",
    "statement_floor": "0.6",
    "balance_max_share": "0.2",
    "balance_top3_share": "0.5",
    "window": "8",
    "stride": "8",
    "mix_open": "0.6",
    "mix_choice": "0.3",
    "mix_tf": "0.1",
    "single_choice_ratio": "0.77",
    "true_ratio": "0.6",
    "per_cid_quota": "120",
    "ngram": "13",
    "multi_select_share": "0.8",
    "strict_replay": "true",
}


@dataclass
class Config:
    values: dict[str, str] = field(default_factory=lambda: dict(DEFAULT_CONFIG))
    raw_text: str = ""

    def __getitem__(self, key: str) -> str:
        try:
            return self.values[key]
        except KeyError:
            raise ConfigError(f"missing config key {key!r}") from None

    def get_int(self, key: str) -> int:
        try:
            return int(self[key])
        except ValueError:
            raise ConfigError(f"config key {key!r} must be an integer, got {self[key]!r}") from None

    def get_float(self, key: str) -> float:
        try:
            return float(self[key])
        except ValueError:
            raise ConfigError(f"config key {key!r} must be a number, got {self[key]!r}") from None

    def get_bool(self, key: str) -> bool:
        value = self[key].strip().lower()
        if value in ("true", "yes", "1"):
            return True
        if value in ("false", "no", "0"):
            return False
        raise ConfigError(f"config key {key!r} must be true/false, got {self[key]!r}")

    @property
    def seed(self) -> int:
        return self.get_int("seed")

    @property
    def replay(self) -> bool:
        mode = self["backend_mode"]
        if mode not in ("replay", "live"):
            raise ConfigError(f"backend_mode must be replay or live, got {mode!r}")
        return mode == "replay"

    def config_hash(self) -> str:
        return ioutils.sha256_text(self.raw_text)

    @classmethod
    def parse(cls, text: str) -> "Config":
        values = dict(DEFAULT_CONFIG)
        for n, line in enumerate(text.splitlines(), start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            if "=" not in stripped:
                raise ConfigError(f"config line {n}: expected 'key = value', got {stripped!r}")
            key, _, value = stripped.partition("=")
            values[key.strip()] = value.strip()
        return cls(values=values, raw_text=text)

    @classmethod
    def load(cls, path: str | Path) -> "Config":
        return cls.parse(Path(path).read_text(encoding="utf-8"))

    def render(self) -> str:
        return "\n".join(f"{k} = {v}" for k, v in self.values.items()) + "\n"


def _now() -> str:
    return time.strftime("%Y%m%d_%H%M%S")


@dataclass
class ProjectManifest:
    project_root: str
    round: int = 1
    seed: int = 42
    config_hash: str = ""
    stages: dict[str, dict] = field(default_factory=dict)
    hash_mismatches: list[str] = field(default_factory=list)

    def __post_init__(self):
        for name in STAGES:
            self.stages.setdefault(name, {
                "status": "pending",
                "artifact_paths": [],
                "content_hash": "",
                "started": "",
                "finished": "",
            })

    def status(self, stage: str) -> str:
        return self.stages[stage]["status"]

    def to_record(self) -> dict:
        return {
            "round": self.round,
            "seed": self.seed,
            "config_hash": self.config_hash,
            "stages": self.stages,
        }

    def save(self, root: str | Path) -> None:
        ioutils.write_json(Path(root) / MANIFEST_FILE, self.to_record())

    @classmethod
    def load(cls, root: str | Path) -> "ProjectManifest":
        root = Path(root)
        rec = ioutils.read_json(root / MANIFEST_FILE)
        manifest = cls(
            project_root=str(root),
            round=rec["round"],
            seed=rec["seed"],
            config_hash=rec.get("config_hash", ""),
            stages=rec.get("stages", {}),
        )
        for name, stage in manifest.stages.items():
            # a stage caught mid-run by a crash is failed, never half-done
            if stage.get("status") == "running":
                stage["status"] = "failed"
            if stage.get("status") == "done":
                recomputed = _artifact_hash(root, stage.get("artifact_paths", []))
                if recomputed != stage.get("content_hash", ""):
                    manifest.hash_mismatches.append(name)
        return manifest


def _artifact_hash(root: Path, rel_paths: list[str]) -> str:
    h = hashlib.sha256()
    for rel in sorted(rel_paths):
        path = root / rel
        h.update(rel.encode("utf-8"))
        if path.exists():
            h.update(bytes.fromhex(ioutils.sha256_file(path)))
        else:
            h.update(b"missing")
    return h.hexdigest()


@contextmanager
def project_lock(root: str | Path):
    """Single-writer exclusivity per project directory."""
    lock_path = Path(root) / LOCK_FILE
    try:
        fd = os.open(lock_path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise CorpusLoopError(f"project is locked by another writer ({lock_path})") from None
    try:
        os.write(fd, str(os.getpid()).encode())
        os.close(fd)
        yield
    finally:
        try:
            lock_path.unlink()
        except FileNotFoundError:
            pass


def derive_seed(seed: int, *parts: object) -> int:
    digest = hashlib.sha256(":".join([str(seed), *map(str, parts)]).encode("utf-8")).hexdigest()
    return int(digest[:16], 16)


class Project:
    def __init__(self, root: str | Path):
        self.root = Path(root)

    # --- setup ---------------------------------------------------------

    @classmethod
    def init(cls, root: str | Path, config_text: Optional[str] = None, seed: Optional[int] = None) -> "Project":
        root = Path(root)
        if (root / MANIFEST_FILE).exists():
            raise CorpusLoopError(f"project already initialized at {root}")
        root.mkdir(parents=True, exist_ok=True)
        config = Config.parse(config_text) if config_text is not None else Config()
        if seed is not None:
            config.values["seed"] = str(seed)
        if not config.raw_text:
            config.raw_text = config.render()
        ioutils.atomic_write_text(root / CONFIG_FILE, config.raw_text)
        manifest = ProjectManifest(
            project_root=str(root),
            seed=config.seed,
            config_hash=config.config_hash(),
        )
        manifest.save(root)
        return cls(root)

    @property
    def config(self) -> Config:
        return Config.load(self.root / CONFIG_FILE)

    @property
    def manifest(self) -> ProjectManifest:
        return ProjectManifest.load(self.root)

    def round_dir(self, round_number: int) -> Path:
        return self.root / f"round-{round_number}"

    def backend(self, config: Optional[Config] = None) -> Backend:
        config = config or self.config
        if config.replay:
            return FixtureBackend.load(self.root / config["fixture_path"])
        return HttpBackend(BackendConfig(
            endpoint_url=config["endpoint_url"],
            model_name=config["model_name"],
            timeout=config.get_float("timeout"),
            max_retries=config.get_int("max_retries"),
            requests_per_minute=config.get_int("requests_per_minute"),
        ))

    # --- artifact accessors ---------------------------------------------

    def load_chunks(self, round_number: int = 1) -> list[Chunk]:
        path = self.round_dir(round_number) / "chunks.jsonl"
        return [Chunk.from_record(r) for r in ioutils.read_jsonl(path)]

    def load_knowledge(self, round_number: int = 1) -> KnowledgeStructure:
        return KnowledgeStructure.load(self.round_dir(round_number) / "knowledge")

    def load_benchmark(self, round_number: int = 1) -> list[BenchmarkItem]:
        path = self.round_dir(round_number) / "benchmark.jsonl"
        return [BenchmarkItem.from_record(r) for r in ioutils.read_jsonl(path)]

    def load_corpus(self, round_number: int) -> list[TrainingSample]:
        path = self.round_dir(round_number) / "corpus.jsonl"
        return [TrainingSample.from_record(r) for r in ioutils.read_jsonl(path)]

    def load_eval_report(self, round_number: int) -> EvaluationReport:
        return EvaluationReport.from_record(
            ioutils.read_json(self.round_dir(round_number) / "eval_report.json")
        )

    def load_diagnoses(self, round_number: int) -> list[Diagnosis]:
        path = self.round_dir(round_number) / "diagnoses.jsonl"
        return [Diagnosis.from_record(r) for r in ioutils.read_jsonl(path)]

    def load_patches(self, round_number: int) -> dict[str, list[TrainingSample]]:
        path = self.round_dir(round_number) / "patches.jsonl"
        out: dict[str, list[TrainingSample]] = {}
        for rec in ioutils.read_jsonl(path):
            out[rec["item_id"]] = [TrainingSample.from_record(s) for s in rec["samples"]]
        return out

    # --- stage machine ---------------------------------------------------

    def _check_predecessors(self, name: str, manifest: ProjectManifest) -> None:
        if name == "report":
            # reports cover the last completed cycle; running mix bumps the
            # round and resets the cycle stages, so either signal suffices
            if manifest.stages["mix"]["status"] != "done" and manifest.round == 1:
                raise PredecessorIncomplete("report requires a completed mix stage")
            return
        idx = STAGES.index(name)
        for prior in STAGES[:idx]:
            if manifest.stages[prior]["status"] != "done":
                raise PredecessorIncomplete(f"stage {name!r} requires {prior!r} to be done")

    def run_stage(self, name: str, config: Optional[Config] = None, backend: Optional[Backend] = None) -> ProjectManifest:
        if name not in STAGES:
            raise ValueError(f"unknown stage {name!r}; valid: {STAGES}")
        config = config or self.config
        manifest = self.manifest
        self._check_predecessors(name, manifest)

        with project_lock(self.root):
            manifest.stages[name].update(status="running", started=_now(), finished="")
            manifest.save(self.root)
            try:
                artifacts = _STAGE_RUNNERS[name](self, manifest, config, backend)
            except BaseException as exc:
                manifest.stages[name].update(status="failed", finished=_now())
                manifest.save(self.root)
                if isinstance(exc, (KeyboardInterrupt, SystemExit)):
                    raise
                raise StageFailed(name, exc) from exc
            rel_paths = sorted(str(Path(p).relative_to(self.root)) for p in artifacts)
            manifest.stages[name].update(
                status="done",
                finished=_now(),
                artifact_paths=rel_paths,
                content_hash=_artifact_hash(self.root, rel_paths),
            )
            if name == "mix":
                manifest.round += 1
                for stage in CYCLE_STAGES:
                    manifest.stages[stage] = {
                        "status": "pending",
                        "artifact_paths": [],
                        "content_hash": "",
                        "started": "",
                        "finished": "",
                    }
            manifest.save(self.root)
        return manifest


# --- stage implementations ---------------------------------------------

def _stage_curate(project: Project, manifest: ProjectManifest, config: Config, backend: Optional[Backend]) -> list[Path]:
    backend = backend or project.backend(config)
    docs = list(ioutils.read_jsonl(project.root / config["corpus_path"]))
    chunks, triages, scores, stages = curate_corpus(
        docs, backend, tau=config.get_float("tau"), target_tokens=config.get_int("chunk_tokens")
    )
    from .curation import retention_stats
    out = project.round_dir(1)
    paths = [
        out / "chunks.jsonl",
        out / "triage.jsonl",
        out / "chunk_scores.jsonl",
        out / "curation_stats.json",
    ]
    ioutils.write_jsonl(paths[0], (c.to_record() for c in chunks))
    ioutils.write_jsonl(paths[1], (
        {"doc_id": doc["doc_id"], **{
            "domains": list(t.domains), "level": t.level, "reasoning_type": t.reasoning_type,
            "keep": t.keep, "confidence": t.confidence,
        }}
        for doc, t in zip(docs, triages)
    ))
    ioutils.write_jsonl(paths[2], ({"chunk_id": cid, **s.to_record()} for cid, s in scores))
    ioutils.write_json(paths[3], {"stages": [[n, c] for n, c in stages], "retention": retention_stats(stages)})
    return paths


def _stage_extract(project: Project, manifest: ProjectManifest, config: Config, backend: Optional[Backend]) -> list[Path]:
    backend = backend or project.backend(config)
    chunks = project.load_chunks()
    cfg = ExtractionConfig(
        min_steps=config.get_int("min_steps"),
        statement_floor_fraction=config.get_float("statement_floor"),
        balance_max_share=config.get_float("balance_max_share"),
        balance_top3_share=config.get_float("balance_top3_share"),
    )
    log_entries: list[dict] = []
    started = time.perf_counter()
    structure = run_extraction(chunks, backend, cfg, extraction_log=log_entries)
    elapsed_ms = (time.perf_counter() - started) * 1000
    # wall-clock timings would break byte-stable replay artifacts
    per_chunk = 0.0 if config.replay else round(elapsed_ms / max(1, len(chunks)), 3)
    for entry in log_entries:
        entry["duration_ms"] = per_chunk

    out = project.round_dir(1)
    paths = structure.save(out / "knowledge")
    log_path = out / "extraction_log.jsonl"
    ioutils.write_jsonl(log_path, log_entries)
    return [*paths, log_path]


def _stage_bench(project: Project, manifest: ProjectManifest, config: Config, backend: Optional[Backend]) -> list[Path]:
    backend = backend or project.backend(config)
    k = project.load_knowledge()
    share = config.get_float("multi_select_share")
    items = []
    for chain_id in sorted(k.chains):
        items.append(generate_item(
            k.chains[chain_id], k, backend,
            rng_seed=derive_seed(config.seed, "bench", chain_id),
            multi_select_share=share,
        ))
    path = project.round_dir(1) / "benchmark.jsonl"
    ioutils.write_jsonl(path, (i.to_record() for i in items))
    return [path]


def _stage_synth(project: Project, manifest: ProjectManifest, config: Config, backend: Optional[Backend]) -> list[Path]:
    backend = backend or project.backend(config)
    k = project.load_knowledge()
    mix = FormatMix(
        open_ended=config.get_float("mix_open"),
        choice=config.get_float("mix_choice"),
        true_false=config.get_float("mix_tf"),
    )
    quota = config.get_int("per_cid_quota")

    by_cid: dict[str, list] = {}
    for sid in sorted(k.statements):
        stmt = k.statements[sid]
        chain = k.chains.get(stmt.parent_chain_id)
        if chain:
            by_cid.setdefault(chain.cid, []).append(stmt)

    samples: list[TrainingSample] = []
    coverage: dict[str, dict] = {}
    for cid in sorted(by_cid):
        statements = by_cid[cid]
        cid_samples = synthesize_discipline(
            cid, statements, k, quota, mix,
            config.get_int("window"), config.get_int("stride"), backend,
            single_choice_ratio=config.get_float("single_choice_ratio"),
            true_ratio=config.get_float("true_ratio"),
        )
        samples.extend(cid_samples)
        coverage[cid] = coverage_report(cid_samples, statements)

    benchmark = project.load_benchmark()
    collisions = check_orthogonality(benchmark, [s.to_record() for s in samples], n=config.get_int("ngram"))

    out = project.round_dir(1)
    paths = [out / "corpus.jsonl", out / "coverage.json", out / "orthogonality.json", out / "train_export.jsonl"]
    ioutils.write_jsonl(paths[0], (s.to_record() for s in samples))
    ioutils.write_json(paths[1], coverage)
    ioutils.write_json(paths[2], {"ngram": config.get_int("ngram"), "collisions": collisions})
    ioutils.write_jsonl(paths[3], (s.to_instruction_record() for s in samples))
    return paths


def _deterministic_stamp(config: Config, round_number: int) -> str:
    return f"{config.seed % 10**8:08d}_{round_number:06d}"


def _stage_eval(project: Project, manifest: ProjectManifest, config: Config, backend: Optional[Backend]) -> list[Path]:
    rnd = manifest.round
    benchmark = project.load_benchmark()
    pred_path = project.root / config["predictions_path"].format(round=rnd)
    predictions = [Prediction.from_record(r) for r in ioutils.read_jsonl(pred_path)]
    timestamp = _deterministic_stamp(config, rnd) if config.replay else None
    report = score(benchmark, predictions, model_name=config["model_name"], timestamp=timestamp)
    path = project.round_dir(rnd) / "eval_report.json"
    ioutils.write_json(path, report.to_record())
    return [path]


def _stage_diagnose(project: Project, manifest: ProjectManifest, config: Config, backend: Optional[Backend]) -> list[Path]:
    backend = backend or project.backend(config)
    rnd = manifest.round
    report = project.load_eval_report(rnd)
    diagnoses = diagnose_all(report.error_samples, backend)
    patterns = aggregate_patterns(diagnoses, report.error_samples)
    out = project.round_dir(rnd)
    paths = [out / "diagnoses.jsonl", out / "error_patterns.json"]
    ioutils.write_jsonl(paths[0], (d.to_record() for d in diagnoses))
    ioutils.write_json(paths[1], patterns)
    return paths


def _stage_patch(project: Project, manifest: ProjectManifest, config: Config, backend: Optional[Backend]) -> list[Path]:
    backend = backend or project.backend(config)
    rnd = manifest.round
    report = project.load_eval_report(rnd)
    diagnoses = project.load_diagnoses(rnd)
    k = project.load_knowledge()
    errors_by_id = {e["item_id"]: e for e in report.error_samples}

    records = []
    for diagnosis in diagnoses:
        context = build_patch_context(diagnosis, errors_by_id[diagnosis.item_id], k)
        batch = generate_patch(diagnosis, context, backend)
        records.append({"item_id": diagnosis.item_id, "samples": [s.to_record() for s in batch]})
    path = project.round_dir(rnd) / "patches.jsonl"
    ioutils.write_jsonl(path, records)
    return [path]


def _stage_mix(project: Project, manifest: ProjectManifest, config: Config, backend: Optional[Backend]) -> list[Path]:
    backend = backend or project.backend(config)
    rnd = manifest.round
    report = project.load_eval_report(rnd)
    v1 = project.load_corpus(rnd)
    k = project.load_knowledge()
    diagnoses = project.load_diagnoses(rnd)
    patch_batches = project.load_patches(rnd)

    result = run_debug_cycle(
        report, v1, k, backend,
        corpus_total=len(v1),  # round volume always matches the prior corpus
        seed=derive_seed(config.seed, "mix", rnd),
        round_number=rnd + 1,
        strict_replay=config.get_bool("strict_replay"),
        diagnoses=diagnoses,
        patch_batches=patch_batches,
    )
    out = project.round_dir(rnd + 1)
    paths = [out / "corpus.jsonl", out / "mix_manifest.json", out / "repair_plan.json"]
    ioutils.write_jsonl(paths[0], (s.to_record() for s in result.corpus))
    ioutils.write_json(paths[1], result.manifest)
    ioutils.write_json(paths[2], result.plan.manifest())
    return paths


def _stage_report(project: Project, manifest: ProjectManifest, config: Config, backend: Optional[Backend]) -> list[Path]:
    rnd = manifest.round - 1 if manifest.round > 1 else manifest.round
    report = project.load_eval_report(rnd)
    diagnoses = project.load_diagnoses(rnd)
    patterns = ioutils.read_json(project.round_dir(rnd) / "error_patterns.json")
    text = render_diagnostic_report(report, patterns, diagnoses)
    path = project.round_dir(rnd) / "diagnostic_report.txt"
    ioutils.atomic_write_text(path, text)
    return [path]


_STAGE_RUNNERS: dict[str, Callable[[Project, ProjectManifest, Config, Optional[Backend]], list[Path]]] = {
    "curate": _stage_curate,
    "extract": _stage_extract,
    "bench": _stage_bench,
    "synth": _stage_synth,
    "eval": _stage_eval,
    "diagnose": _stage_diagnose,
    "patch": _stage_patch,
    "mix": _stage_mix,
    "report": _stage_report,
}
