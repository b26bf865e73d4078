"""MUSHRA / MUSHIRA listening-study service.

Studies are created from a config, persisted on disk, and administered over
HTTP with blinded stimuli: raters only ever see opaque slot and audio tokens.
MUSHRA submissions must rate the hidden reference 100 (rejections never say
which slot that is); MUSHIRA presents an imperfect hidden reference and
accepts any complete rating set.

Storage is one directory per study: ``study.json`` (server-side only, holds
system identities and audio tokens) plus an append-only ``ratings.log`` of
one JSON submission per line, rewritten atomically per accepted submission.

HTTP API (paths are contractual):
    POST /studies
    GET  /studies/{id}/sessions/{sid}/next
    POST /studies/{id}/sessions/{sid}/trials/{tid}/ratings
    GET  /studies/{id}/export
    GET  /audio/{token}
"""
from __future__ import annotations

import hashlib
import json
import os
import threading
import time
import uuid
from dataclasses import dataclass, asdict
from pathlib import Path

import numpy as np
from fastapi import FastAPI, HTTPException, Request, Response

from .errors import StudyConfigError

RATING_SCALE = (0, 100)
DEFAULT_RATINGS_PER_ITEM = 5
PROTOCOLS = ("MUSHRA", "MUSHIRA")


@dataclass(frozen=True)
class RatingRecord:
    study_id: str
    trial_id: str
    session_id: str
    system_id: str
    rating: int
    timestamp: int      # UTC seconds


def _token(*parts) -> str:
    return hashlib.sha256("|".join(str(p) for p in parts).encode()).hexdigest()[:24]


def _shuffle_seed(*parts) -> int:
    digest = hashlib.sha256("|".join(str(p) for p in parts).encode()).digest()
    return int.from_bytes(digest[:8], "big")


class Study:
    """In-memory view of a persisted study."""

    def __init__(self, data: dict, directory: Path):
        self.data = data
        self.directory = directory
        self.study_id = data["id"]
        self.protocol = data["protocol"]
        self.prompt = data.get("prompt", "")
        self.trials = data["trials"]
        self.ratings_per_item = data.get("ratings_per_item", DEFAULT_RATINGS_PER_ITEM)
        self.audio_tokens = data["audio_tokens"]     # token -> path

    @property
    def log_path(self) -> Path:
        return self.directory / "ratings.log"

    def trial_by_id(self, trial_id: str) -> dict | None:
        for trial in self.trials:
            if trial["id"] == trial_id:
                return trial
        return None

    def stimulus_order(self, session_id: str, trial_id: str) -> list:
        """Deterministic per-(session, trial) permutation of stimulus indices."""
        trial = self.trial_by_id(trial_id)
        rng = np.random.default_rng(
            _shuffle_seed(self.study_id, session_id, trial_id))
        return [int(i) for i in rng.permutation(len(trial["stimuli"]))]

    def slot_map(self, session_id: str, trial_id: str) -> dict:
        """slot token -> stimulus dict for one session's view of a trial."""
        trial = self.trial_by_id(trial_id)
        order = self.stimulus_order(session_id, trial_id)
        return {f"slot_{k}": trial["stimuli"][idx] for k, idx in enumerate(order)}


def validate_study_config(config: dict) -> None:
    if "id" not in config or not str(config["id"]).strip():
        raise StudyConfigError("study config needs a non-empty 'id'")
    protocol = config.get("protocol")
    if protocol not in PROTOCOLS:
        raise StudyConfigError(f"protocol must be one of {PROTOCOLS}, got {protocol!r}")
    if int(config.get("ratings_per_item", DEFAULT_RATINGS_PER_ITEM)) < 1:
        raise StudyConfigError("ratings_per_item must be >= 1")
    trials = config.get("trials")
    if not trials:
        raise StudyConfigError("study config needs at least one trial")
    seen = set()
    for trial in trials:
        tid = trial.get("id")
        if not tid or tid in seen:
            raise StudyConfigError(f"missing or duplicate trial id {tid!r}")
        seen.add(tid)
        stimuli = trial.get("stimuli", [])
        if len(stimuli) < 2:
            raise StudyConfigError(f"trial {tid}: needs at least 2 stimuli")
        systems = [s["system"] for s in stimuli]
        if len(set(systems)) != len(systems):
            raise StudyConfigError(f"trial {tid}: duplicate system ids")
        hidden = trial.get("hidden_reference")
        if hidden is None or hidden not in systems:
            kind = "hidden" if protocol == "MUSHRA" else "imperfect"
            raise StudyConfigError(
                f"trial {tid}: {kind} reference must be designated among stimuli")
        if "reference" not in trial:
            raise StudyConfigError(f"trial {tid}: missing open reference stimulus")
        for path in [trial["reference"]] + [s["path"] for s in stimuli]:
            if not Path(path).exists():
                raise StudyConfigError(f"trial {tid}: missing audio file {path}")


class StudyStore:
    """Filesystem-backed study registry with per-study submission locks."""

    def __init__(self, root):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self._studies = {}
        self._locks = {}
        self._registry_lock = threading.Lock()

    def create_study(self, config: dict) -> str:
        validate_study_config(config)
        study_id = str(config["id"])
        directory = self.root / study_id
        if directory.exists():
            raise StudyConfigError(f"duplicate study id {study_id!r}")
        salt = uuid.uuid4().hex
        tokens = {}
        data = json.loads(json.dumps(config))    # deep copy
        data["salt"] = salt
        data["ratings_per_item"] = int(
            config.get("ratings_per_item", DEFAULT_RATINGS_PER_ITEM))
        for trial in data["trials"]:
            ref_token = _token(salt, trial["id"], "open_reference")
            tokens[ref_token] = str(Path(trial["reference"]).resolve())
            trial["reference_token"] = ref_token
            for stim in trial["stimuli"]:
                tok = _token(salt, trial["id"], stim["system"])
                tokens[tok] = str(Path(stim["path"]).resolve())
                stim["token"] = tok
        data["audio_tokens"] = tokens
        directory.mkdir()
        tmp = directory / "study.json.tmp"
        tmp.write_text(json.dumps(data, indent=1, sort_keys=True))
        os.replace(tmp, directory / "study.json")
        return study_id

    def get(self, study_id: str) -> Study | None:
        with self._registry_lock:
            if study_id not in self._studies:
                path = self.root / study_id / "study.json"
                if not path.exists():
                    return None
                self._studies[study_id] = Study(
                    json.loads(path.read_text()), self.root / study_id)
            return self._studies[study_id]

    def lock(self, study_id: str) -> threading.Lock:
        with self._registry_lock:
            return self._locks.setdefault(study_id, threading.Lock())

    def audio_path(self, token: str) -> str | None:
        with self._registry_lock:
            known = list(self._studies.values())
        for study in known:
            if token in study.audio_tokens:
                return study.audio_tokens[token]
        # fall back to scanning studies not yet cached
        for path in self.root.glob("*/study.json"):
            study = self.get(path.parent.name)
            if study and token in study.audio_tokens:
                return study.audio_tokens[token]
        return None

    # -- submissions ------------------------------------------------------

    def _read_submissions(self, study: Study) -> list:
        if not study.log_path.exists():
            return []
        lines = study.log_path.read_text().splitlines()
        return [json.loads(line) for line in lines if line.strip()]

    def completed_trials(self, study: Study, session_id: str) -> set:
        return {s["trial_id"] for s in self._read_submissions(study)
                if s["session_id"] == session_id}

    def next_trial_view(self, study: Study, session_id: str) -> dict | None:
        """Blinded view of the lowest-index incomplete trial, or None if done."""
        done = self.completed_trials(study, session_id)
        for index, trial in enumerate(study.trials):
            if trial["id"] in done:
                continue
            slots = study.slot_map(session_id, trial["id"])
            return {
                "trial_id": trial["id"],
                "index": index,
                "total": len(study.trials),
                "protocol": study.protocol,
                "prompt": trial.get("prompt", study.prompt),
                "reference": {"audio": f"/audio/{trial['reference_token']}"},
                "stimuli": [{"slot": slot, "audio": f"/audio/{stim['token']}"}
                            for slot, stim in sorted(slots.items())],
            }
        return None

    def submit_ratings(self, study: Study, session_id: str, trial_id: str,
                       ratings: dict) -> tuple:
        """Validate and persist one submission. Returns (ok, reason, status)."""
        trial = study.trial_by_id(trial_id)
        if trial is None:
            return False, "unknown trial", 404
        slots = study.slot_map(session_id, trial_id)
        expected = set(slots)
        got = set(ratings)
        if got != expected:
            return False, "every stimulus must be rated exactly once", 422
        clean = {}
        for slot, value in ratings.items():
            if not isinstance(value, int) or isinstance(value, bool) \
                    or not RATING_SCALE[0] <= value <= RATING_SCALE[1]:
                return False, "ratings must be integers in [0, 100]", 422
            clean[slot] = value
        with self.lock(study.study_id):
            if trial_id in self.completed_trials(study, session_id):
                return False, "trial already submitted for this session", 409
            if study.protocol == "MUSHRA":
                hidden_slot = next(s for s, stim in slots.items()
                                   if stim["system"] == trial["hidden_reference"])
                if clean[hidden_slot] != 100:
                    # never reveal which slot is the reference
                    return False, "rate the reference 100", 422
            submission = {
                "session_id": session_id,
                "trial_id": trial_id,
                "timestamp": int(time.time()),
                "ratings": {slots[slot]["system"]: value
                            for slot, value in clean.items()},
            }
            existing = study.log_path.read_text() if study.log_path.exists() else ""
            tmp = study.directory / "ratings.log.tmp"
            tmp.write_text(existing + json.dumps(submission, sort_keys=True) + "\n")
            os.replace(tmp, study.log_path)
        return True, "accepted", 200

    def export_ratings(self, study: Study) -> list:
        """Unblinded RatingRecords ordered by (trial, session, stimulus order)."""
        submissions = self._read_submissions(study)
        trial_index = {t["id"]: i for i, t in enumerate(study.trials)}
        system_order = {t["id"]: [s["system"] for s in t["stimuli"]]
                        for t in study.trials}
        records = []
        for sub in sorted(submissions,
                          key=lambda s: (trial_index[s["trial_id"]], s["session_id"])):
            order = system_order[sub["trial_id"]]
            for system in order:
                records.append(RatingRecord(
                    study.study_id, sub["trial_id"], sub["session_id"],
                    system, sub["ratings"][system], sub["timestamp"]))
        return records


# ---------------------------------------------------------------------------
# HTTP layer
# ---------------------------------------------------------------------------

def create_app(store_root):
    """FastAPI app over a StudyStore. Audio is served with Range support."""
    from fastapi.middleware.cors import CORSMiddleware

    store = StudyStore(store_root)
    app = FastAPI(title="sepkit listening service")
    # the rater UI is static files on another origin
    app.add_middleware(CORSMiddleware, allow_origins=["*"],
                       allow_methods=["*"], allow_headers=["*"])
    app.state.store = store

    def _get_study(study_id: str) -> Study:
        study = store.get(study_id)
        if study is None:
            raise HTTPException(404, detail={"error": "unknown_study"})
        return study

    @app.post("/studies", status_code=201)
    def create_study(config: dict):
        try:
            study_id = store.create_study(config)
        except StudyConfigError as exc:
            status = 409 if "duplicate study id" in str(exc) else 400
            raise HTTPException(status, detail={"error": str(exc)})
        return {"study_id": study_id}

    @app.get("/studies/{study_id}/sessions/{session_id}/next")
    def next_trial(study_id: str, session_id: str):
        study = _get_study(study_id)
        view = store.next_trial_view(study, session_id)
        if view is None:
            raise HTTPException(404, detail={"error": "study_complete"})
        return view

    @app.post("/studies/{study_id}/sessions/{session_id}/trials/{trial_id}/ratings")
    def submit(study_id: str, session_id: str, trial_id: str, body: dict):
        study = _get_study(study_id)
        ratings = body.get("ratings")
        if not isinstance(ratings, dict):
            raise HTTPException(422, detail={"error": "body must carry a 'ratings' map"})
        ok, reason, status = store.submit_ratings(study, session_id, trial_id, ratings)
        if not ok:
            raise HTTPException(status, detail={"error": reason})
        return {"status": "accepted"}

    @app.get("/studies/{study_id}/export")
    def export(study_id: str):
        study = _get_study(study_id)
        return {"study_id": study_id,
                "records": [asdict(r) for r in store.export_ratings(study)]}

    @app.get("/audio/{token}")
    def audio(token: str, request: Request):
        path = store.audio_path(token)
        if path is None or not Path(path).exists():
            raise HTTPException(404, detail={"error": "unknown_audio_token"})
        blob = Path(path).read_bytes()
        range_header = request.headers.get("range")
        headers = {"Accept-Ranges": "bytes"}
        if range_header:
            try:
                unit, _, spec = range_header.partition("=")
                start_s, _, end_s = spec.partition("-")
                if unit.strip() != "bytes":
                    raise ValueError
                start = int(start_s) if start_s else 0
                end = int(end_s) if end_s else len(blob) - 1
                if start > end or start >= len(blob):
                    raise ValueError
            except ValueError:
                raise HTTPException(416, detail={"error": "bad_range"})
            end = min(end, len(blob) - 1)
            headers["Content-Range"] = f"bytes {start}-{end}/{len(blob)}"
            return Response(blob[start:end + 1], status_code=206,
                            media_type="audio/wav", headers=headers)
        return Response(blob, media_type="audio/wav", headers=headers)

    return app
