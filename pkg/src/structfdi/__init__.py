"""structfdi: structural fault detectability / isolability analysis with a
hydraulic pitch-system benchmark and nonlinear fault-injection simulator."""

__version__ = "0.1.0"

from .structmodel import (  # noqa: F401
    Constraint,
    ModelError,
    ModelFormatError,
    RegionGate,
    SensorSpec,
    StructuralModel,
    Switch,
    ValidationReport,
    Variable,
    add_sensor,
    condense_gates,
    expand_differential,
    load_model,
    parse_model,
    serialize_model,
    specialize_region,
    validate,
)
from .graphcore import (  # noqa: F401
    Bipartite,
    DmDecomposition,
    Matching,
    dm_decompose,
    dot_export,
    equivalence_classes,
    from_model,
    incidence_csv,
    max_matching,
)
from .pitchbench import (  # noqa: F401
    PlantParameters,
    build_pitch_model,
    default_parameters,
    validate_parameters,
)
