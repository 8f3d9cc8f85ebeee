"""The unified coarse label set and the by-volume sentinel."""
from __future__ import annotations

import enum


class CoarseLabel(enum.Enum):
    """One of the five unified classes every harmonized box carries."""

    SMALL_VEHICLE = "SmallVehicle"
    MEDIUM_VEHICLE = "MediumVehicle"
    LARGE_VEHICLE = "LargeVehicle"
    TWO_WHEELS = "TwoWheels"
    PEDESTRIAN = "Pedestrian"


# Descriptor label-map sentinel: the raw class is a vehicle whose coarse
# label is decided by volume clustering, not by a direct mapping.
VEHICLE_BY_VOLUME = "VEHICLE_BY_VOLUME"

# Ascending size order; index doubles as the rank used by the volume
# clustering (sorted centers map onto this order).
VEHICLE_LABELS = (
    CoarseLabel.SMALL_VEHICLE,
    CoarseLabel.MEDIUM_VEHICLE,
    CoarseLabel.LARGE_VEHICLE,
)

ALL_LABELS = tuple(CoarseLabel)


def is_coarse(name: str) -> bool:
    return any(name == label.value for label in CoarseLabel)


def vehicle_rank(label: CoarseLabel) -> int:
    """0 for SmallVehicle, 1 for MediumVehicle, 2 for LargeVehicle."""
    return VEHICLE_LABELS.index(label)
