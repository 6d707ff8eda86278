"""Named model configurations (scene variant, budget, materials, frequency)."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Union

from ..materials import Material, MaterialLibrary, default_library
from ..paths.model import InteractionBudget
from ..scenario import SceneVariant

ENVELOPE_ID = "envelope"

MaterialRef = Union[str, Material]


class HarnessError(ValueError):
    pass


@dataclass(frozen=True)
class ModelSpec:
    """One propagation model of the comparison study.

    ``material_overrides`` maps a scene material id to either the name of a
    library material or a :class:`Material` instance.
    """

    name: str
    variant: SceneVariant
    budget: InteractionBudget
    frequency: float = 2e9
    material_overrides: Mapping[str, MaterialRef] = field(default_factory=dict)
    tx_power_dbm: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "variant", SceneVariant(self.variant))
        if isinstance(self.budget, str):
            object.__setattr__(self, "budget", InteractionBudget.parse(self.budget))
        self.budget.check_supported()
        if not self.frequency > 0:
            raise HarnessError("frequency must be positive")
        object.__setattr__(self, "material_overrides", dict(self.material_overrides))

    def library(self, base: MaterialLibrary | None = None) -> MaterialLibrary:
        lib = MaterialLibrary(base if base is not None else default_library())
        for mid, ref in self.material_overrides.items():
            lib[mid] = lib.resolve(ref) if isinstance(ref, str) else ref
        return lib

    def with_envelope(self, material: MaterialRef) -> "ModelSpec":
        overrides = dict(self.material_overrides)
        overrides[ENVELOPE_ID] = material
        return ModelSpec(self.name, self.variant, self.budget, self.frequency, overrides, self.tx_power_dbm)

    def describe(self) -> dict:
        return {
            "name": self.name,
            "variant": self.variant.value,
            "budget": str(self.budget),
            "frequency": self.frequency,
            "tx_power_dbm": self.tx_power_dbm,
            "material_overrides": {k: (v if isinstance(v, str) else {"name": v.name, **v.to_json()})
                                   for k, v in self.material_overrides.items()},
        }


PRESET_NAMES = ("reference", "model2", "model3", "model4")


def paper_models(frequency: float = 2e9, envelope: MaterialRef = "envelope_default",
                 tx_power_dbm: float = 0.0) -> dict[str, ModelSpec]:
    """The four study models: detailed 3R1D/2R1D/1R1D and simplified 3R1D."""
    env = {ENVELOPE_ID: envelope}
    specs = [
        ModelSpec("reference", SceneVariant.DETAILED, InteractionBudget(3, 1), frequency, env, tx_power_dbm),
        ModelSpec("model2", SceneVariant.DETAILED, InteractionBudget(2, 1), frequency, env, tx_power_dbm),
        ModelSpec("model3", SceneVariant.DETAILED, InteractionBudget(1, 1), frequency, env, tx_power_dbm),
        ModelSpec("model4", SceneVariant.SIMPLIFIED, InteractionBudget(3, 1), frequency, env, tx_power_dbm),
    ]
    return {s.name: s for s in specs}
