"""Grid-world household simulator with sensor disturbances."""

from .disturbance import (
    DimLight,
    DisturbanceError,
    GlassWall,
    MirrorWall,
    apply,
    compose,
    load_disturbances,
    parse_disturbances,
    serialize_disturbances,
)
from .scene import (
    AgentPose,
    Appliance,
    ApplianceKind,
    EdgeWall,
    Heading,
    Material,
    ObjectInstance,
    Scene,
    SceneError,
    SceneSemanticError,
    SceneSyntaxError,
    Violation,
    load_scene,
    parse_scene,
    serialize_scene,
    validate_scene,
)
from .sensors import (
    DrawStream,
    Mode,
    ObservationBundle,
    SensorConfig,
    cast_ray,
    observe,
    sense_depth,
    sense_gt_depth,
    sense_vision,
)
from .tasks import (
    ExaminedInLight,
    ObjectIn,
    ObjectState,
    TaskSpec,
    TwoObjectsIn,
    check_goal,
    generate_start_positions,
    load_corpus,
    load_task,
    parse_task,
    serialize_task,
    subgoal_progress,
    validate_task,
)

__version__ = "0.1.0"
