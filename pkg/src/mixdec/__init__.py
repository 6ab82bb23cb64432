"""mixdec: recurrent-dynamics decomposition and pseudo-orbit surgery.

Decomposes the recurrent dynamics of user-defined smooth maps on boxes
and tori into transitive classes and their cyclic mixing pieces,
computes homoclinic-class periods from manifold intersections, and
implements shortcut surgery on pseudo-orbits in tiled perturbation
domains, closing near-returns into genuine periodic orbits with
period control.
"""

from .decomposition import (
    CyclicDecomposition,
    MixingCertificate,
    RecurrentClass,
    class_period,
    cyclic_classes,
    period_oracle,
    recurrent_classes,
    strongly_connected_components,
    trapping_regions,
)
from .manifolds import (
    CycleReport,
    IntersectionTimeSet,
    ManifoldCurve,
    detect_crossings,
    detect_cycle,
    grow_manifold,
    intersection_times,
    pointwise_class,
)
from .orbits import (
    PeriodicOrbit,
    ResonanceReport,
    classify,
    find_periodic_orbits,
    k_set,
)
from .surgery import (
    Bump,
    Chart,
    ConnectingSequence,
    PerturbationDomain,
    PerturbedMap,
    PseudoOrbit,
    ShortcutEvent,
    SurgeryResult,
    Tile,
    close_orbit,
    condition3_requestable,
    connect,
    make_domain,
    make_pseudo_orbit,
    paper_eta,
    perturbation_size,
    primary_shortcuts,
    run_surgery,
    secondary_shortcuts,
    validate_domain,
    validate_sequence,
)
from .systems import (
    MapSystem,
    OrbitSegment,
    evaluate,
    iterate,
    jacobian,
    system_from_config,
    system_from_file,
    system_from_text,
)
from .transition import BoxCovering, TransitionGraph, build_graph

__version__ = "0.1.0"
