from pathlib import Path

import pytest

from curricula.geometry import Rect
from curricula.navigation import Task
from curricula.scene import Doorway, SceneGraph, SceneObject, load_scene_file

DATA = Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def data_dir() -> Path:
    return DATA


@pytest.fixture()
def golden_scene() -> SceneGraph:
    return load_scene_file(DATA / "apartment_a.json")


@pytest.fixture()
def golden_task() -> Task:
    return Task(start=(1.0, 1.0), heading=0.0,
                target_object_id="fridge_1", success_radius=0.8)


@pytest.fixture()
def empty_room() -> SceneGraph:
    return SceneGraph(scene_id="empty", bounds=Rect((0.0, 0.0), (10.0, 10.0)))


def make_room(objects=(), doorways=(), scene_id="room", size=10.0) -> SceneGraph:
    return SceneGraph(
        scene_id=scene_id,
        bounds=Rect((0.0, 0.0), (size, size)),
        objects=tuple(objects),
        doorways=tuple(doorways),
    )


def box(oid, x, y, hw, hd, rotation=0.0, movable=True, target=False,
        category="box") -> SceneObject:
    return SceneObject(oid, category, (x, y), rotation, (hw, hd),
                       material="wood", movable=movable, is_target_candidate=target)


def south_door(x0=4.4, x1=5.6, width=1.2) -> Doorway:
    return Doorway("door_s", ((x0, 0.0), (x1, 0.0)), width)
