"""Label schemas for the classification tasks."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class LabelSchema:
    task: str
    classes: tuple[str, ...]

    @property
    def num_classes(self) -> int:
        return len(self.classes)

    def index_of(self, name: str) -> int:
        try:
            return self.classes.index(name)
        except ValueError:
            raise KeyError(f"unknown class {name!r} for task {self.task}") from None

    def name_of(self, index: int) -> str:
        if not 0 <= index < len(self.classes):
            raise IndexError(f"class index {index} outside [0, {len(self.classes)}) for {self.task}")
        return self.classes[index]


ROOF_TYPE_SCHEMA = LabelSchema("roof_type", ("Gable", "Hip", "Flat", "NoRoof"))
ROOF_MATERIAL_SCHEMA = LabelSchema(
    "roof_material",
    ("HealthyMetal", "IrregularMetal", "ConcreteCement", "BlueTarpaulin", "Incomplete"),
)

# Combined task used by synthetic fusion experiments: the height channel
# carries flat-vs-gable, the RGB channel carries concrete-vs-tarpaulin, so
# no single modality can recover the full label.
JOINT_SCHEMA = LabelSchema(
    "joint", ("FlatConcrete", "FlatTarpaulin", "GableConcrete", "GableTarpaulin")
)

_SCHEMAS = {s.task: s for s in (ROOF_TYPE_SCHEMA, ROOF_MATERIAL_SCHEMA, JOINT_SCHEMA)}


def schema_for(task: str) -> LabelSchema:
    try:
        return _SCHEMAS[task]
    except KeyError:
        raise KeyError(f"unknown task {task!r}; expected one of {sorted(_SCHEMAS)}") from None


def joint_label(roof_type: int, roof_material: int) -> int:
    """Combine a roof-type and roof-material label into the joint index."""
    type_bit = {ROOF_TYPE_SCHEMA.index_of("Flat"): 0, ROOF_TYPE_SCHEMA.index_of("Gable"): 1}
    color_bit = {
        ROOF_MATERIAL_SCHEMA.index_of("ConcreteCement"): 0,
        ROOF_MATERIAL_SCHEMA.index_of("BlueTarpaulin"): 1,
    }
    if roof_type not in type_bit or roof_material not in color_bit:
        raise ValueError(
            "joint task only covers Flat/Gable types with ConcreteCement/BlueTarpaulin materials"
        )
    return 2 * type_bit[roof_type] + color_bit[roof_material]


def resolve_labels(samples, task: str) -> np.ndarray:
    """Class indices of `samples` for the given task; raises on unlabeled ones."""
    out = []
    for s in samples:
        if task == "roof_type":
            label = s.roof_type
        elif task == "roof_material":
            label = s.roof_material
        elif task == "joint":
            if s.roof_type is None or s.roof_material is None:
                label = None
            else:
                label = joint_label(s.roof_type, s.roof_material)
        else:
            raise KeyError(f"unknown task {task!r}")
        if label is None:
            raise ValueError(f"sample {s.building_id} is not labeled for task {task}")
        out.append(label)
    return np.asarray(out, dtype=np.int64)
