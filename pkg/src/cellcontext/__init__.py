"""Multi-class cell layout descriptors, configuration loss and layout synthesis."""

__version__ = "0.1.0"

from .config import AnalysisConfig, load_defaults
from .errors import CellContextError, DegenerateInputError, FormatError, ValidationError
from .layout import (
    BandwidthSet,
    CellLayout,
    RadiusGrid,
    UnitTransform,
    load_layout,
    normalize_to_unit,
    save_layout,
)
from .matching import (
    HoleMatching,
    MetricReport,
    cell_configuration_loss,
    cross_k_error,
    metric_report,
    optimal_match,
    pd_ccmd,
    pd_emd,
)
from .spatial import KFunctionVector, cross_k, cross_k_matrix, k_distance, location_k, multiscale_density
from .synthesis import SynthesisConfig, SynthesisTrace, init_layout, objective, remove_overlaps, synthesize
from .topology import (
    DistanceField,
    EnrichedPersistenceDiagram,
    PersistencePoint,
    distance_transform,
    enrich_diagram,
    per_class_diagrams,
    persistence_h1,
    union_diagram,
    vectorize_diagram,
)
