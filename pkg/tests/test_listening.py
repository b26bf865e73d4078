import itertools
import json

import numpy as np
import pytest
from fastapi.testclient import TestClient
from scipy.stats import chisquare

from oracles import oracle_rating_stats
from sepkit.dsp import Waveform, write_wav
from sepkit.errors import StudyConfigError
from sepkit.listening import StudyStore, create_app, validate_study_config
from sepkit.metrics import aggregate_all

SYSTEMS = ["SECRET_headset", "SECRET_anchor_fh", "SECRET_anchor_distant",
           "SECRET_model_a"]


@pytest.fixture()
def audio_dir(tmp_path):
    rng = np.random.default_rng(0)
    d = tmp_path / "audio"
    d.mkdir()
    for name in ["ref0", "ref1", "a0", "b0", "c0", "d0", "a1", "b1", "c1", "d1"]:
        write_wav(Waveform(rng.standard_normal(800) * 0.1, 16000),
                  d / f"{name}.wav", "pcm16")
    return d


def study_config(audio_dir, study_id="study1", protocol="MUSHRA", n_trials=2):
    trials = []
    for t in range(n_trials):
        stimuli = [{"system": system, "path": str(audio_dir / f"{chr(97 + k)}{t}.wav")}
                   for k, system in enumerate(SYSTEMS)]
        trials.append({
            "id": f"t{t}",
            "reference": str(audio_dir / f"ref{t}.wav"),
            "hidden_reference": "SECRET_headset",
            "stimuli": stimuli,
        })
    return {"id": study_id, "protocol": protocol, "ratings_per_item": 5,
            "prompt": "rate the foreground speech", "trials": trials}


@pytest.fixture()
def client(tmp_path, audio_dir):
    return TestClient(create_app(tmp_path / "store"))


def create(client, config):
    response = client.post("/studies", json=config)
    assert response.status_code == 201, response.text
    return response.json()["study_id"]


def get_next(client, study, session):
    return client.get(f"/studies/{study}/sessions/{session}/next")


def submit(client, study, session, trial_id, ratings):
    return client.post(
        f"/studies/{study}/sessions/{session}/trials/{trial_id}/ratings",
        json={"ratings": ratings})


def rate_all(view, value=50, hidden_value=None, flat=None):
    """Ratings map covering every slot; optionally pin one slot by audio url."""
    ratings = {s["slot"]: value for s in view["stimuli"]}
    if flat:
        ratings.update(flat)
    return ratings


def find_hidden_slot(client, store_dir, view, study_id, session):
    """Test-side unblinding: recompute the shuffle from the persisted study."""
    store = StudyStore(store_dir)
    study = store.get(study_id)
    slots = study.slot_map(session, view["trial_id"])
    hidden = study.trial_by_id(view["trial_id"])["hidden_reference"]
    return next(slot for slot, stim in slots.items() if stim["system"] == hidden)


# -- creation -----------------------------------------------------------------

def test_create_and_fetch_trials(client, audio_dir):
    study = create(client, study_config(audio_dir))
    view = get_next(client, study, "sess1").json()
    assert view["trial_id"] == "t0"
    assert view["index"] == 0
    assert view["total"] == 2
    assert len(view["stimuli"]) == 4


def test_mushra_requires_hidden_reference(audio_dir):
    config = study_config(audio_dir)
    del config["trials"][0]["hidden_reference"]
    with pytest.raises(StudyConfigError):
        validate_study_config(config)


def test_duplicate_study_rejected(client, audio_dir):
    create(client, study_config(audio_dir))
    response = client.post("/studies", json=study_config(audio_dir))
    assert response.status_code == 409


def test_missing_audio_rejected(client, audio_dir):
    config = study_config(audio_dir)
    config["trials"][0]["stimuli"][0]["path"] = str(audio_dir / "nope.wav")
    response = client.post("/studies", json=config)
    assert response.status_code == 400


# -- next_trial ------------------------------------------------------------------

def test_fresh_session_gets_trial_zero_idempotently(client, audio_dir):
    study = create(client, study_config(audio_dir))
    first = get_next(client, study, "s1").json()
    second = get_next(client, study, "s1").json()
    assert first == second


def test_sessions_get_independent_shuffles(tmp_path, audio_dir):
    store = StudyStore(tmp_path / "store2")
    store.create_study(study_config(audio_dir, study_id="shuf", n_trials=1))
    study = store.get("shuf")
    # drop one stimulus so permutations of 3 are cheap to count
    study.trials[0]["stimuli"] = study.trials[0]["stimuli"][:3]
    counts = {p: 0 for p in itertools.permutations(range(3))}
    for k in range(10_000):
        order = tuple(study.stimulus_order(f"sess{k}", "t0"))
        counts[order] += 1
    result = chisquare(list(counts.values()))
    assert result.pvalue > 0.001


def test_complete_session_reports_done(client, audio_dir):
    study = create(client, study_config(audio_dir, n_trials=1))
    view = get_next(client, study, "s1").json()
    ratings = rate_all(view, 50)
    hidden = find_hidden_slot(client, client.app.state.store.root, view, study, "s1")
    ratings[hidden] = 100
    assert submit(client, study, "s1", view["trial_id"], ratings).status_code == 200
    response = get_next(client, study, "s1")
    assert response.status_code == 404
    assert response.json()["detail"]["error"] == "study_complete"


def test_unknown_study_404(client):
    assert get_next(client, "nope", "s1").status_code == 404


# -- submission rules ---------------------------------------------------------------

def test_mushra_hidden_reference_must_be_100(client, audio_dir):
    study = create(client, study_config(audio_dir, n_trials=1))
    view = get_next(client, study, "s1").json()
    hidden = find_hidden_slot(client, client.app.state.store.root, view, study, "s1")

    ratings = rate_all(view, 60)
    ratings[hidden] = 95
    response = submit(client, study, "s1", view["trial_id"], ratings)
    assert response.status_code == 422
    detail = response.json()["detail"]["error"]
    assert detail == "rate the reference 100"
    assert hidden not in json.dumps(response.json())    # no slot leak

    ratings[hidden] = 100
    assert submit(client, study, "s1", view["trial_id"], ratings).status_code == 200


def test_mushira_accepts_any_reference_rating(client, audio_dir):
    study = create(client, study_config(audio_dir, study_id="mushira",
                                        protocol="MUSHIRA", n_trials=1))
    view = get_next(client, study, "s1").json()
    hidden = find_hidden_slot(client, client.app.state.store.root, view, study, "s1")
    ratings = rate_all(view, 60)
    ratings[hidden] = 72
    assert submit(client, study, "s1", view["trial_id"], ratings).status_code == 200


def test_incomplete_and_out_of_range_rejected(client, audio_dir):
    study = create(client, study_config(audio_dir, n_trials=1))
    view = get_next(client, study, "s1").json()
    ratings = rate_all(view, 50)
    removed = view["stimuli"][0]["slot"]
    partial = {k: v for k, v in ratings.items() if k != removed}
    assert submit(client, study, "s1", view["trial_id"], partial).status_code == 422
    bad = dict(ratings)
    bad[removed] = 101
    assert submit(client, study, "s1", view["trial_id"], bad).status_code == 422
    bad[removed] = 50.5
    assert submit(client, study, "s1", view["trial_id"], bad).status_code == 422


def test_duplicate_submission_rejected(client, audio_dir):
    study = create(client, study_config(audio_dir, n_trials=1))
    view = get_next(client, study, "s1").json()
    hidden = find_hidden_slot(client, client.app.state.store.root, view, study, "s1")
    ratings = rate_all(view, 30)
    ratings[hidden] = 100
    assert submit(client, study, "s1", view["trial_id"], ratings).status_code == 200
    assert submit(client, study, "s1", view["trial_id"], ratings).status_code == 409


# -- export + blinding ----------------------------------------------------------------

def run_session(client, study, session, store_root, value_for=lambda sys_id: 50):
    responses = []
    while True:
        response = get_next(client, study, session)
        responses.append(response)
        if response.status_code == 404:
            break
        view = response.json()
        store = StudyStore(store_root)
        slots = store.get(study).slot_map(session, view["trial_id"])
        ratings = {slot: value_for(stim["system"]) for slot, stim in slots.items()}
        responses.append(submit(client, study, session, view["trial_id"], ratings))
    return responses


def test_export_counts_and_aggregation(client, audio_dir):
    study = create(client, study_config(audio_dir, n_trials=2))
    store_root = client.app.state.store.root
    values = {"SECRET_headset": 100, "SECRET_anchor_fh": 70,
              "SECRET_anchor_distant": 30, "SECRET_model_a": 55}

    empty = client.get(f"/studies/{study}/export").json()
    assert empty["records"] == []

    rater_responses = []
    for k in range(5):
        rater_responses += run_session(client, study, f"rater{k}", store_root,
                                       lambda s: values[s])
    export = client.get(f"/studies/{study}/export").json()
    records = export["records"]
    assert len(records) == 5 * 2 * 4          # sessions x trials x stimuli

    # blinding: no system id ever reaches a rater-facing response
    for response in rater_responses:
        assert "SECRET" not in response.text

    # aggregation against the independent statistics pass
    for agg in aggregate_all(records):
        ratings = [r["rating"] for r in records if r["system_id"] == agg.system_id]
        mean, half = oracle_rating_stats(ratings)
        assert abs(agg.mean - mean) < 1e-9
        assert abs(agg.ci95_halfwidth - half) < 1e-9
        assert agg.mean == values[agg.system_id]

    # MUSHRA acceptance implies the hidden reference is stored as exactly 100
    assert all(r["rating"] == 100 for r in records
               if r["system_id"] == "SECRET_headset")


def test_export_is_stable(client, audio_dir):
    study = create(client, study_config(audio_dir, n_trials=1))
    store_root = client.app.state.store.root
    run_session(client, study, "r0", store_root,
                lambda s: 100 if s == "SECRET_headset" else 40)
    first = client.get(f"/studies/{study}/export").text
    second = client.get(f"/studies/{study}/export").text
    assert first == second


def test_audio_serving_with_ranges(client, audio_dir):
    study = create(client, study_config(audio_dir, n_trials=1))
    view = get_next(client, study, "s1").json()
    url = view["stimuli"][0]["audio"]
    full = client.get(url)
    assert full.status_code == 200
    assert full.headers["content-type"] == "audio/wav"
    assert full.content[:4] == b"RIFF"

    part = client.get(url, headers={"Range": "bytes=0-3"})
    assert part.status_code == 206
    assert part.content == b"RIFF"
    assert part.headers["Content-Range"] == f"bytes 0-3/{len(full.content)}"

    tail = client.get(url, headers={"Range": "bytes=4-"})
    assert tail.status_code == 206
    assert part.content + tail.content == full.content

    bad = client.get(url, headers={"Range": f"bytes={len(full.content)}-"})
    assert bad.status_code == 416

    assert client.get("/audio/deadbeef").status_code == 404
