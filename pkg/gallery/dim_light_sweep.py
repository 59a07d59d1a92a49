"""Dim-light sweep.

Detection probability scales with light below the sensor's light floor.
This sweeps the light level, counts detections over every pose of the
kitchen, and then runs a short matrix at a few light levels.
"""

# %%
from __future__ import annotations

from dataclasses import replace

import numpy as np

from disturbsim import load_corpus, load_scene
from disturbsim.agents import AgentProfile
from disturbsim.disturbance import DimLight
from disturbsim.evaluation import Condition, MatrixConfig, aggregate, run_matrix
from disturbsim.scene import HEADINGS, AgentPose
from disturbsim.sensors import DrawStream, SensorConfig, candidate_visible, sense_vision
from disturbsim.tasks import data_dir

kitchen = load_scene(data_dir() / "scenes" / "kitchen.scene")
cfg = SensorConfig()
poses = [AgentPose(c, h) for c in kitchen.cells() for h in HEADINGS]

# %%
levels = np.array([0.0, 0.05, 0.1, 0.15, 0.2, 0.25, 0.5, 1.0])
total = sum(len(candidate_visible(kitchen, p, cfg)) for p in poses)
for light in levels:
    scene = replace(kitchen, light_level=float(light))
    seen = sum(len(sense_vision(scene, p, cfg, DrawStream(1).at(i))) for i, p in enumerate(poses))
    print(f"light {light:4.2f}: {seen:5d} of {total} candidate detections ({seen / total:6.1%})")

# %% [markdown]
# A small matrix shows how each profile copes as the room darkens.

# %%
conditions = [Condition("baseline")] + [
    Condition(f"light{light}", (DimLight(light),)) for light in (0.1, 0.0)
]
profiles = [AgentProfile(k) for k in ("visiononly", "mapdepth", "mapgtdepth")]
logs = run_matrix(MatrixConfig(load_corpus(), conditions, profiles, master_seed=7, starts=2))
print(aggregate(logs).table())
