from .grid import (
    Frame,
    GridSet,
    PerimeterEstimate,
    PeriCheck,
    ResolutionError,
    check_key,
    check_peri,
    dilate,
    iso_lower,
    p0_estimate,
    p_estimate,
    random_box_union,
)
from .properties import (
    BallUnion,
    KConditionReport,
    PropertyFamily,
    PropertyReport,
    assemble_property_family,
    check_k_conditions,
    check_properties,
    k_law,
)
