"""Home health care routing and scheduling: instances, decoder, and a BRKGA solver."""

from hhcrsp.instance import (
    Caregiver,
    GenSpec,
    Instance,
    InstanceError,
    Patient,
    euclidean_travel,
    generate_instance,
    parse_instance,
    serialize_instance,
)
from hhcrsp.evaluation import (
    DEFAULT_WEIGHTS,
    CostComponents,
    DecodedSolution,
    Route,
    Violation,
    Visit,
    evaluate,
    validate,
)
from hhcrsp.decoder import DecoderConfig, decode, sort_tasks

__all__ = [
    "Caregiver",
    "CostComponents",
    "DEFAULT_WEIGHTS",
    "DecodedSolution",
    "DecoderConfig",
    "GenSpec",
    "Instance",
    "InstanceError",
    "Patient",
    "Route",
    "Violation",
    "Visit",
    "decode",
    "euclidean_travel",
    "evaluate",
    "generate_instance",
    "parse_instance",
    "serialize_instance",
    "sort_tasks",
    "validate",
]
