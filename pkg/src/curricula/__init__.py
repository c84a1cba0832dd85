"""curricula: closed-loop indoor-scene curriculum simulation.

Scenes are editable 2D scene graphs; agents navigate them; trajectory
analysis drives single-object edits (via collision-aware placement) that
make the environment progressively harder while staying valid and solvable.
"""

__version__ = "0.1.0"

from .analysis import Analysis, AnalysisConfig, Concern, Suggestion, analyze_heuristic
from .generator import (
    GenerationConfig,
    GenerationSession,
    MoveInstruction,
    apply_edit,
    generate,
    move_instruction_schema,
    propose_heuristic,
    verify_edit,
)
from .navigation import (
    AgentProfile,
    OccupancyGrid,
    Outcome,
    Task,
    Trajectory,
    plan_shortest_path,
    rasterize,
    run_episode,
    solvable,
)
from .placement import (
    PlacementRequest,
    PlacementResult,
    min_clearance,
    overlaps,
    place_with_collision_awareness,
)
from .scene import (
    Doorway,
    Relation,
    SceneGraph,
    SceneObject,
    ValidationReport,
    infer_relations,
    load_scene,
    save_scene,
    validate,
)

__all__ = [
    "Analysis",
    "AnalysisConfig",
    "AgentProfile",
    "Concern",
    "Doorway",
    "GenerationConfig",
    "GenerationSession",
    "MoveInstruction",
    "OccupancyGrid",
    "Outcome",
    "PlacementRequest",
    "PlacementResult",
    "Relation",
    "SceneGraph",
    "SceneObject",
    "Suggestion",
    "Task",
    "Trajectory",
    "ValidationReport",
    "analyze_heuristic",
    "apply_edit",
    "generate",
    "infer_relations",
    "load_scene",
    "min_clearance",
    "move_instruction_schema",
    "overlaps",
    "place_with_collision_awareness",
    "plan_shortest_path",
    "propose_heuristic",
    "rasterize",
    "run_episode",
    "save_scene",
    "solvable",
    "validate",
    "verify_edit",
]
