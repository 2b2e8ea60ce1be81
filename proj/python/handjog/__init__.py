"""Gesture-driven jogging of a simulated UR5: data, training, int8 models, sim."""

from ._core import (  # noqa: F401
    GESTURE_COUNT,
    Dataset,
    Error,
    FloatModel,
    QuantizedModel,
    RuntimeFailure,
    ValidationError,
    agreement,
    forward_kinematics,
    generate_dataset,
    gesture_names,
    home_joints,
    jacobian,
    normalize_frame,
    quantize,
    run_scenario,
    split_dataset,
    template_points,
    train,
)
