# Run a MUSHRA study headlessly: create it, simulate five raters over the
# blinded HTTP API, export the unblinded records, and aggregate.
#
#   python3 demos/06_listening_study.py

import tempfile
from pathlib import Path

import numpy as np
from fastapi.testclient import TestClient

from sepkit.dsp import Waveform, write_wav
from sepkit.listening import StudyStore, create_app
from sepkit.metrics import aggregate_all

workdir = Path(tempfile.mkdtemp(prefix="sepkit_study_"))
rng = np.random.default_rng(0)

# stimuli on disk: a hidden reference, two anchors, one "model" per trial
systems = ["headset_ref", "anchor_filtered_headset", "anchor_distant_mic",
           "model_tdcn"]
trials = []
for t in range(3):
    stimuli = []
    for system in systems:
        path = workdir / f"{system}_{t}.wav"
        write_wav(Waveform(rng.standard_normal(8000) * 0.1, 16000), path, "pcm16")
        stimuli.append({"system": system, "path": str(path)})
    trials.append({"id": f"trial{t}", "reference": stimuli[0]["path"],
                   "hidden_reference": "headset_ref", "stimuli": stimuli})

config = {"id": "demo_study", "protocol": "MUSHRA", "ratings_per_item": 5,
          "prompt": "Rate the most prominent single speaker.",
          "trials": trials}

client = TestClient(create_app(workdir / "store"))
print("create:", client.post("/studies", json=config).json())

# what a rater actually sees: slot tokens and audio URLs, no system names
view = client.get("/studies/demo_study/sessions/rater0/next").json()
print("blinded trial view:", {k: view[k] for k in ("trial_id", "stimuli")})

# simulate raters with system-dependent opinions (the server cannot tell,
# but we can, because we hold the study store)
store = StudyStore(workdir / "store")
opinions = {"headset_ref": 100, "anchor_filtered_headset": 62,
            "anchor_distant_mic": 36, "model_tdcn": 47}
for k in range(5):
    session = f"rater{k}"
    while True:
        response = client.get(f"/studies/demo_study/sessions/{session}/next")
        if response.status_code == 404:
            break
        view = response.json()
        slots = store.get("demo_study").slot_map(session, view["trial_id"])
        jitter = int(rng.integers(-3, 4))
        ratings = {slot: int(np.clip(opinions[stim["system"]] + jitter, 0, 100))
                   if stim["system"] != "headset_ref" else 100
                   for slot, stim in slots.items()}
        client.post(f"/studies/demo_study/sessions/{session}/trials/"
                    f"{view['trial_id']}/ratings", json={"ratings": ratings})

export = client.get("/studies/demo_study/export").json()
print(f"\nexported {len(export['records'])} rating records "
      "(5 raters x 3 trials x 4 stimuli)")
print(f"{'system':<26} {'mean':>6} {'ci95':>6} {'n':>4}")
for agg in aggregate_all(export["records"]):
    print(f"{agg.system_id:<26} {agg.mean:>6.1f} {agg.ci95_halfwidth:>6.1f} "
          f"{agg.n:>4d}")
