"""
Staged pipeline orchestration: sharding, per-stage execution, ledger
bookkeeping, and resume.

Documents are hashed by doc_id into shards, so shard membership is
stable under inventory reordering. Every stage reads the previous
stage's shards and writes its own; records that already hit a terminal
outcome are carried forward untouched, which keeps the whole funnel
reconstructable from any stage's output. The ledger records a content
hash per (shard, stage); a completed pair whose output still hashes the
same is skipped on re-run, which is all resume is.
"""

from __future__ import annotations

import hashlib
import json
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .analytics import FeatureSampleSpec, sample_frame_features, stats_report
from .dialogue import extract_dialogues
from .ingest import InventorySource, build_inventory
from .lid import LanguageIdResult, filter_by_language
from .manifest import CorpusManifest, read_shard, write_shard
from .model import (
    STAGES,
    AudioDocument,
    Dialogue,
    DiarizationTurn,
    LidConfig,
    SegmentationConfig,
    sort_turns,
)
from .packaging import SplitSpec, cleanse, package
from .workers.pool import WorkerPool

log = logging.getLogger(__name__)

WORKER_STAGES = {"lid": "lid", "diarize": "diarize", "cleanse": "enhance", "features": "features"}

RUNNABLE_STAGES = ("collect", "lid", "diarize", "segment", "cleanse", "package", "stats", "features")


class ConfigError(Exception):
    """Invalid pipeline configuration; the run must not start."""


@dataclass
class PipelineConfig:
    inventory: Path
    workdir: Path
    output_dir: Path
    num_shards: int = 4
    shard_size: int = 100_000
    jobs: int = 1
    lid: LidConfig = field(default_factory=LidConfig)
    segmentation: SegmentationConfig = field(default_factory=SegmentationConfig)
    split: SplitSpec = field(default_factory=lambda: SplitSpec(seed=0, fractions=(0.8, 0.1, 0.1)))
    features: FeatureSampleSpec = field(default_factory=FeatureSampleSpec)
    worker_commands: dict[str, list[str]] = field(default_factory=dict)
    worker_pool_sizes: dict[str, int] = field(default_factory=dict)
    worker_timeout_s: float = 600.0
    output_sample_rate: int = 16000

    def __post_init__(self):
        if self.num_shards < 1:
            raise ConfigError("num_shards must be >= 1")
        if self.shard_size < 1:
            raise ConfigError("shard_size must be >= 1")
        paths = {str(self.workdir), str(self.output_dir)}
        if len(paths) != 2:
            raise ConfigError("workdir and output_dir must be distinct")

    @classmethod
    def from_toml(cls, path: str | Path) -> PipelineConfig:
        try:
            import tomllib
        except ModuleNotFoundError:
            import tomli as tomllib

        try:
            with open(path, "rb") as f:
                raw = tomllib.load(f)
        except OSError as e:
            raise ConfigError(f"cannot read config {path}: {e}") from e
        except tomllib.TOMLDecodeError as e:
            raise ConfigError(f"invalid TOML in {path}: {e}") from e
        return cls.from_dict(raw, base_dir=Path(path).parent)

    @classmethod
    def from_dict(cls, raw: dict, base_dir: Path = Path(".")) -> PipelineConfig:
        try:
            paths = raw["paths"]
            pipeline = raw.get("pipeline", {})
            seeds = raw.get("seeds", {})
            split_raw = raw.get("split", {})
            if "split" not in seeds:
                raise ConfigError("seeds.split is required (no wall-clock defaults)")
            if "counts" in split_raw:
                split = SplitSpec(seed=int(seeds["split"]),
                                  counts=tuple(int(c) for c in split_raw["counts"]))
            else:
                fracs = split_raw.get("fractions", [0.8, 0.1, 0.1])
                split = SplitSpec(seed=int(seeds["split"]),
                                  fractions=tuple(float(f) for f in fracs))
            workers = raw.get("workers", {})
            commands = {}
            pool_sizes = {}
            for task, wcfg in workers.items():
                commands[task] = [str(a) for a in wcfg["command"]]
                pool_sizes[task] = int(wcfg.get("pool_size", 1))
            features_raw = raw.get("features", {})
            return cls(
                inventory=(base_dir / paths["inventory"]).resolve(),
                workdir=(base_dir / paths["workdir"]).resolve(),
                output_dir=(base_dir / paths["output_dir"]).resolve(),
                num_shards=int(pipeline.get("num_shards", 4)),
                shard_size=int(pipeline.get("shard_size", 100_000)),
                jobs=int(pipeline.get("jobs", 1)),
                lid=LidConfig(**raw.get("lid", {})),
                segmentation=SegmentationConfig(**raw.get("segmentation", {})),
                split=split,
                features=FeatureSampleSpec(
                    n_samples=int(features_raw.get("n_samples", 1000)),
                    window_s=float(features_raw.get("window_s", 5.0)),
                    seed=int(seeds.get("features", 0)),
                ),
                worker_commands=commands,
                worker_pool_sizes=pool_sizes,
                worker_timeout_s=float(pipeline.get("worker_timeout_s", 600.0)),
                output_sample_rate=int(pipeline.get("output_sample_rate", 16000)),
            )
        except (KeyError, TypeError, ValueError) as e:
            raise ConfigError(f"invalid configuration: {e}") from e


# --- ledger ---------------------------------------------------------------

class StageLedger:
    """Append-only JSONL record of (shard, stage) completion and output hashes."""

    def __init__(self, path: Path):
        self.path = path
        self._entries: dict[tuple[str, str], dict] = {}
        if path.exists():
            for line in path.read_text().splitlines():
                if line.strip():
                    e = json.loads(line)
                    self._entries[(e["shard"], e["stage"])] = e

    def is_done(self, shard: str, stage: str, current_hash: str | None) -> bool:
        e = self._entries.get((shard, stage))
        return bool(e and e["status"] == "done" and e["hash"] == current_hash)

    def recorded(self, shard: str, stage: str) -> dict | None:
        return self._entries.get((shard, stage))

    def mark_done(self, shard: str, stage: str, output_hash: str):
        entry = {"shard": shard, "stage": stage, "status": "done", "hash": output_hash}
        self._entries[(shard, stage)] = entry
        self.path.parent.mkdir(parents=True, exist_ok=True)
        with open(self.path, "a") as f:
            f.write(json.dumps(entry, sort_keys=True) + "\n")


def _file_hash(path: Path) -> str | None:
    if not path.exists():
        return None
    return hashlib.sha256(path.read_bytes()).hexdigest()


def tree_hash(root: Path) -> str:
    """Order-stable hash of a directory tree's relative paths and contents."""
    h = hashlib.sha256()
    if root.exists():
        for p in sorted(root.rglob("*")):
            if p.is_file():
                h.update(str(p.relative_to(root)).encode())
                h.update(p.read_bytes())
    return h.hexdigest()


# --- pipeline -------------------------------------------------------------

class Pipeline:
    def __init__(self, config: PipelineConfig):
        self.config = config
        self.workdir = config.workdir
        self.ledger = StageLedger(self.workdir / "ledger.jsonl")
        self._pool: WorkerPool | None = None

    # Shard helpers

    def shard_names(self) -> list[str]:
        return [f"{i:04d}" for i in range(self.config.num_shards)]

    def stage_dir(self, stage: str) -> Path:
        return self.workdir / "stages" / stage

    def shard_path(self, stage: str, shard: str) -> Path:
        return self.stage_dir(stage) / f"shard-{shard}.jsonl"

    def _shard_of(self, doc_id: str) -> str:
        n = int(hashlib.sha1(doc_id.encode()).hexdigest(), 16) % self.config.num_shards
        return f"{n:04d}"

    # Worker pool

    def pool(self) -> WorkerPool:
        if self._pool is None:
            self._pool = WorkerPool(
                self.config.worker_commands,
                self.config.worker_pool_sizes,
                timeout_s=self.config.worker_timeout_s,
            )
        return self._pool

    def close(self):
        if self._pool is not None:
            self._pool.close()
            self._pool = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    # Stage execution

    def run(self, stages: list[str] | None = None) -> dict:
        """Execute the requested stages in canonical order, resuming from the ledger."""
        requested = list(stages) if stages else list(RUNNABLE_STAGES[:-1])  # features on demand
        for s in requested:
            if s not in RUNNABLE_STAGES:
                raise ConfigError(f"unknown stage {s!r}")
        ordered = [s for s in RUNNABLE_STAGES if s in requested]
        for stage in ordered:
            self._run_stage(stage)
        return self.report()

    def _run_stage(self, stage: str):
        if stage in ("package", "stats", "features"):
            self._run_corpus_stage(stage)
            return
        shard_runner = {
            "collect": self._collect_shard,
            "lid": self._lid_shard,
            "diarize": self._diarize_shard,
            "segment": self._segment_shard,
            "cleanse": self._cleanse_shard,
        }[stage]

        def run_one(shard: str):
            out_path = self.shard_path(stage, shard)
            if self.ledger.is_done(shard, stage, _file_hash(out_path)):
                log.info("skip %s shard %s (done)", stage, shard)
                return
            digest = shard_runner(shard)
            self.ledger.mark_done(shard, stage, digest)

        if self.config.jobs > 1:
            # The ledger is the only shared state; serialize its updates.
            import threading
            lock = threading.Lock()
            digests = {}

            def run_parallel(shard: str):
                out_path = self.shard_path(stage, shard)
                with lock:
                    done = self.ledger.is_done(shard, stage, _file_hash(out_path))
                if done:
                    return
                digests[shard] = shard_runner(shard)

            with ThreadPoolExecutor(max_workers=self.config.jobs) as ex:
                list(ex.map(run_parallel, self.shard_names()))
            for shard in self.shard_names():
                if shard in digests:
                    self.ledger.mark_done(shard, stage, digests[shard])
        else:
            for shard in self.shard_names():
                run_one(shard)

    # Per-shard stage bodies. Each returns the output shard's content hash.

    def _read_inventory(self) -> list[InventorySource]:
        sources = []
        for line in Path(self.config.inventory).read_text().splitlines():
            if line.strip():
                obj = json.loads(line)
                sources.append(InventorySource(uri=obj["uri"], source=obj.get("source", "local")))
        return sources

    def _collect_shard(self, shard: str) -> str:
        docs = build_inventory(self._read_inventory())
        mine = sorted((d for d in docs if self._shard_of(d.doc_id) == shard),
                      key=lambda d: d.doc_id)
        return write_shard(self.shard_path("collect", shard), mine)

    def _lid_shard(self, shard: str) -> str:
        records = read_shard(self.shard_path("collect", shard))
        docs = [r for r in records if isinstance(r, AudioDocument)]
        eligible = [d for d in docs if d.stage_status.get("collect") == "done"]
        results: dict[str, LanguageIdResult] = {}
        ok_docs = []
        for doc in eligible:
            resp = self.pool().request("lid", doc.uri, {
                "target_language": self.config.lid.target_language,
                "max_window_s": 30.0,
            })
            if resp.status != "ok":
                doc.stage_status["lid"] = "failed"
                doc.failure_reason = resp.error_message
                continue
            results[doc.doc_id] = LanguageIdResult(
                doc_id=doc.doc_id,
                probabilities={k: float(v) for k, v in resp.payload["probabilities"].items()},
                target_language=self.config.lid.target_language,
            )
            ok_docs.append(doc)
        filter_by_language(ok_docs, results, self.config.lid)
        return write_shard(self.shard_path("lid", shard), records)

    def _diarize_shard(self, shard: str) -> str:
        records = read_shard(self.shard_path("lid", shard))
        for doc in (r for r in records if isinstance(r, AudioDocument)):
            if doc.stage_status.get("lid") != "done":
                continue
            resp = self.pool().request("diarize", doc.uri, {})
            if resp.status != "ok":
                doc.stage_status["diarize"] = "failed"
                doc.failure_reason = resp.error_message
                continue
            doc.turns = sort_turns(
                [DiarizationTurn.from_record(t) for t in resp.payload["turns"]])
            doc.stage_status["diarize"] = "done"
        return write_shard(self.shard_path("diarize", shard), records)

    def _segment_shard(self, shard: str) -> str:
        records = read_shard(self.shard_path("diarize", shard))
        out: list[AudioDocument | Dialogue] = []
        for rec in records:
            out.append(rec)
            if not isinstance(rec, AudioDocument):
                continue
            if rec.stage_status.get("diarize") != "done":
                continue
            retained, rejected = extract_dialogues(rec, rec.turns or [],
                                                   self.config.segmentation)
            out.extend(retained)
            out.extend(r.dialogue for r in rejected)
        return write_shard(self.shard_path("segment", shard), out)

    def _cleanse_shard(self, shard: str) -> str:
        records = read_shard(self.shard_path("segment", shard))
        docs = {r.doc_id: r for r in records if isinstance(r, AudioDocument)}
        audio_dir = self.workdir / "cleanse-audio"
        for d in (r for r in records if isinstance(r, Dialogue)):
            if d.stage_status.get("segment") != "done":
                continue
            cleanse(d, docs[d.doc_id].uri, self.pool(), audio_dir)
        return write_shard(self.shard_path("cleanse", shard), records)

    # Corpus-level stages

    def _all_records(self, stage: str):
        manifest = CorpusManifest(
            shard_paths=[self.shard_path(stage, s) for s in self.shard_names()])
        return manifest.records()

    def _run_corpus_stage(self, stage: str):
        if stage == "package":
            if self.config.output_dir.exists() and self.ledger.is_done(
                    "all", stage, tree_hash(self.config.output_dir)):
                return
            records = self._all_records("cleanse")
            dialogues = [r for r in records if isinstance(r, Dialogue)]
            package(dialogues, self.config.split, self.config.output_dir,
                    sample_rate_out=self.config.output_sample_rate)
            # Persist package status on the records.
            by_shard: dict[str, list] = {s: [] for s in self.shard_names()}
            for rec in records:
                by_shard[self._shard_of(rec.doc_id)].append(rec)
            for s in self.shard_names():
                write_shard(self.shard_path("package", s), by_shard[s])
            self.ledger.mark_done("all", stage, tree_hash(self.config.output_dir))
        elif stage == "stats":
            out_path = self.workdir / "reports" / "stats.json"
            if self.ledger.is_done("all", stage, _file_hash(out_path)):
                return
            source_stage = "package" if self.shard_path("package", "0000").exists() else "cleanse"
            dialogues = [r for r in self._all_records(source_stage) if isinstance(r, Dialogue)]
            packaged = [d for d in dialogues if d.stage_status.get("cleanse") == "done"]
            report = stats_report(packaged, subsets=["youtube", "podcast", "local"])
            out_path.parent.mkdir(parents=True, exist_ok=True)
            out_path.write_text(json.dumps(report, sort_keys=True, indent=2) + "\n")
            if self.config.output_dir.exists():
                (self.config.output_dir / "stats.json").write_text(
                    json.dumps(report, sort_keys=True, indent=2) + "\n")
            self.ledger.mark_done("all", stage, _file_hash(out_path))
        elif stage == "features":
            out_path = self.workdir / "reports" / "features.f32"
            if self.ledger.is_done("all", stage, _file_hash(out_path)):
                return
            dialogues = [r for r in self._all_records("cleanse") if isinstance(r, Dialogue)]
            sample_frame_features(
                [d for d in dialogues if d.stage_status.get("cleanse") == "done"],
                self.config.features, self.pool(), out_path, self.workdir / "tmp")
            self.ledger.mark_done("all", stage, _file_hash(out_path))

    # Reporting

    def report(self) -> dict:
        """Per-stage, per-source funnel: counts and retention percentages."""
        funnel: dict[str, dict] = {}
        last_records = None
        for stage in ("collect", "lid", "diarize", "segment", "cleanse", "package"):
            if not self.shard_path(stage, self.shard_names()[0]).exists():
                funnel[stage] = {"status": "pending"}
                continue
            records = self._all_records(stage)
            last_records = records
            per_source: dict[str, dict[str, int]] = {}
            for rec in records:
                if stage in ("cleanse", "package") and not isinstance(rec, Dialogue):
                    continue
                status = rec.stage_status.get(stage)
                if status is None:
                    continue
                entry = per_source.setdefault(rec.source, {"done": 0, "rejected": 0, "failed": 0})
                if status in entry:
                    entry[status] += 1
            stage_report = {"status": "done", "by_source": {}}
            for source, counts in sorted(per_source.items()):
                total = sum(counts.values())
                pct = (f"{100 * counts['done'] / total:.1f}%" if total else "n/a")
                stage_report["by_source"][source] = {**counts, "total": total, "retained_pct": pct}
            funnel[stage] = stage_report
        report = {"stages": funnel}
        if last_records is not None:
            report["num_records"] = len(last_records)
        return report


def format_report_table(report: dict) -> str:
    lines = [f"{'stage':<10} {'source':<10} {'done':>6} {'rejected':>9} {'failed':>7} {'total':>6} {'retained':>9}"]
    lines.append("-" * len(lines[0]))
    for stage, info in report["stages"].items():
        if info.get("status") == "pending":
            lines.append(f"{stage:<10} {'-':<10} {'pending':>6}")
            continue
        for source, c in info.get("by_source", {}).items():
            lines.append(
                f"{stage:<10} {source:<10} {c['done']:>6} {c['rejected']:>9} "
                f"{c['failed']:>7} {c['total']:>6} {c['retained_pct']:>9}")
    return "\n".join(lines)
