"""Detector presets for household object classes, grouped by room type.

Rates were measured for an off-the-shelf vision detector: ``tp``/``fp`` are
true/false-positive rates (here as fractions of 1), ``r`` is the average
distance in meters at which true positives were detected.  Target classes
are generally hard to detect; landmark classes are reliable, which is what
makes them useful as correlational anchors.
"""

from __future__ import annotations

from .sensing import DetectorParams

TARGET_DETECTORS: dict[str, DetectorParams] = {
    "bathroom/Faucet": DetectorParams(0.561, 0.080, 2.16),
    "bathroom/Candle": DetectorParams(0.294, 0.024, 1.81),
    "bathroom/ScrubBrush": DetectorParams(0.643, 0.099, 1.71),
    "bedroom/AlarmClock": DetectorParams(0.796, 0.074, 2.77),
    "bedroom/Book": DetectorParams(0.626, 0.049, 2.05),
    "bedroom/CellPhone": DetectorParams(0.500, 0.039, 1.69),
    "kitchen/Bowl": DetectorParams(0.606, 0.115, 1.75),
    "kitchen/Knife": DetectorParams(0.377, 0.087, 1.68),
    "kitchen/PepperShaker": DetectorParams(0.381, 0.094, 1.43),
    "livingroom/Television": DetectorParams(0.853, 0.052, 2.59),
    "livingroom/RemoteControl": DetectorParams(0.696, 0.045, 1.93),
    "livingroom/CreditCard": DetectorParams(0.429, 0.043, 1.48),
}

LANDMARK_DETECTORS: dict[str, DetectorParams] = {
    "bathroom/Mirror": DetectorParams(0.769, 0.037, 2.10),
    "bathroom/ToiletPaperHanger": DetectorParams(0.844, 0.015, 1.96),
    "bathroom/Towel": DetectorParams(0.794, 0.027, 1.88),
    "bathroom/Toilet": DetectorParams(0.863, 0.035, 1.81),
    "bathroom/SoapBar": DetectorParams(0.732, 0.018, 1.53),
    "bedroom/DeskLamp": DetectorParams(0.895, 0.026, 2.41),
    "bedroom/Bed": DetectorParams(0.635, 0.006, 2.39),
    "bedroom/Mirror": DetectorParams(0.860, 0.006, 2.27),
    "bedroom/LightSwitch": DetectorParams(0.763, 0.028, 2.26),
    "bedroom/Laptop": DetectorParams(0.759, 0.012, 2.19),
    "kitchen/LightSwitch": DetectorParams(0.900, 0.039, 2.57),
    "kitchen/Microwave": DetectorParams(0.753, 0.056, 2.31),
    "kitchen/StoveKnob": DetectorParams(0.828, 0.056, 2.00),
    "kitchen/Lettuce": DetectorParams(0.986, 0.003, 1.98),
    "kitchen/Plate": DetectorParams(0.606, 0.032, 1.90),
    "livingroom/FloorLamp": DetectorParams(0.717, 0.051, 3.44),
    "livingroom/Painting": DetectorParams(0.852, 0.040, 3.18),
    "livingroom/LightSwitch": DetectorParams(0.806, 0.015, 3.10),
    "livingroom/HousePlant": DetectorParams(0.829, 0.039, 3.00),
    "livingroom/Pillow": DetectorParams(0.674, 0.028, 2.84),
    "livingroom/Laptop": DetectorParams(0.663, 0.026, 2.24),
}

ALL_DETECTORS = {**TARGET_DETECTORS, **LANDMARK_DETECTORS}


def detector(name: str) -> DetectorParams:
    """Look up a preset by 'room/Class', or by bare class name when that is
    unambiguous across rooms."""
    if name in ALL_DETECTORS:
        return ALL_DETECTORS[name]
    matches = {k: v for k, v in ALL_DETECTORS.items() if k.split("/", 1)[1] == name}
    if len(matches) == 1:
        return next(iter(matches.values()))
    if matches:
        raise KeyError(
            f"'{name}' is ambiguous; qualify with a room: {sorted(matches)}"
        )
    raise KeyError(f"no detector preset named '{name}'")
