"""JSON persistence of run records and suite manifests."""
from __future__ import annotations

import hashlib
import json
from importlib import resources
from pathlib import Path

from . import __version__
from .problem import EvaluationResult
from .protocol import TERMINATION_REASONS, RunRecord

RECORD_FORMAT = 1


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


def config_hash(problem: dict, algorithm: str, algorithm_config: dict, rule: dict) -> str:
    payload = {"problem": problem, "algorithm": algorithm,
               "algorithm_config": algorithm_config, "termination": rule}
    return hashlib.sha256(canonical_json(payload).encode()).hexdigest()


def record_to_dict(rec: RunRecord, *, run_index: int, problem: dict,
                   algorithm_config: dict, rule: dict) -> dict:
    final = None
    if rec.final is not None:
        final = {"y": [float(v) for v in rec.final_y], "f": rec.final.f, "nu": rec.final.nu}
    return {
        "format": RECORD_FORMAT,
        "header": {
            "algorithm": rec.algorithm,
            "N": rec.dimension,
            "seed": rec.seed,
            "run_index": int(run_index),
            "config_hash": config_hash(problem, rec.algorithm, algorithm_config, rule),
            "harness_version": __version__,
        },
        "problem": problem,
        "algorithm_config": algorithm_config,
        "termination": rule,
        "final": final,
        "evaluations_used": rec.evaluations_used,
        "termination_reason": rec.termination_reason,
        "trajectory": [[int(e), float(f), float(nu)] for e, f, nu in rec.trajectory],
        "error": rec.error,
    }


def dumps_record(doc: dict) -> str:
    # repr-based floats round-trip exactly
    return json.dumps(doc, indent=1, allow_nan=False) + "\n"


class CorruptRecordError(ValueError):
    pass


def record_from_dict(doc: dict) -> RunRecord:
    try:
        h = doc["header"]
        fin = doc["final"]
        reason = doc["termination_reason"]
        if reason not in TERMINATION_REASONS:
            raise CorruptRecordError(f"unknown termination reason {reason!r}")
        return RunRecord(
            algorithm=str(h["algorithm"]),
            dimension=int(h["N"]),
            seed=int(h["seed"]),
            final_y=None if fin is None else [float(v) for v in fin["y"]],
            final=None if fin is None else EvaluationResult(float(fin["f"]), float(fin["nu"])),
            evaluations_used=int(doc["evaluations_used"]),
            termination_reason=reason,
            trajectory=[(int(e), float(f), float(nu)) for e, f, nu in doc["trajectory"]],
            error=doc.get("error"),
        )
    except CorruptRecordError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise CorruptRecordError(f"malformed record: {exc!r}") from exc


def load_record(path: Path) -> tuple[dict, RunRecord]:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise CorruptRecordError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(doc, dict):
        raise CorruptRecordError(f"{path}: top level is not an object")
    return doc, record_from_dict(doc)


def load_schema(name: str) -> dict:
    """Shipped JSON schema by file stem: ``run_record`` or ``manifest``."""
    text = resources.files("kleeminty_bench").joinpath("schemas", f"{name}.schema.json").read_text()
    return json.loads(text)
