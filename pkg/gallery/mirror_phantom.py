"""Mirror phantom.

The pantry wall becomes a mirror. A vision-only agent sees the bottle's
reflection behind the mirror and heads for it; an agent with depth sees a
wall there instead.
"""

# %%
from __future__ import annotations

from disturbsim import compose, load_corpus, load_disturbances, load_scene
from disturbsim.agents import AgentProfile
from disturbsim.evaluation import episode_seed, render_map, run_episode
from disturbsim.scene import AgentPose, Heading
from disturbsim.sensors import DrawStream, SensorConfig, sense_vision
from disturbsim.tasks import data_dir

DATA = data_dir()
kitchen = load_scene(DATA / "scenes" / "kitchen.scene")
mirror = compose(kitchen, load_disturbances(DATA / "disturbances" / "mirror.dist"))
task = next(t for t in load_corpus() if t.id == "bottle_in_fridge")

# %% [markdown]
# From the task's first start pose the agent faces the mirror. Every vision
# detection is listed with its apparent cell; phantoms are reflections.

# %%
pose = task.starts[0]
print("start pose:", pose, " true bottle cell:", mirror.object("bottle1").cell)
for d in sense_vision(mirror, pose, SensorConfig(), DrawStream(0)):
    tag = "phantom" if d.phantom else "direct"
    print(f"  {d.object_class:10s} range={d.apparent_range:5.2f} "
          f"bearing={d.apparent_bearing:6.1f} cell={d.apparent_cell} {tag}")

# %%
for name in ("visiononly", "mapdepth"):
    seed = episode_seed(7, task.id, 0, 0, "mirror", name)
    log = run_episode(mirror, task, 0, 0, "mirror", AgentProfile(name), seed)
    first = log.steps[0]
    print(f"\n{name}: {log.outcome} in {log.total_steps} steps, {log.bumps} bumps")
    print("  first navigation target:", first.target, " phantoms seen:", first.phantoms)
    print(render_map(log).ascii)
