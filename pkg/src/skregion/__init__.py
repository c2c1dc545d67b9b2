"""Secret-key / secret-message rate trade-off regions and protocol simulation.

A library and CLI for computing achievable (R_SK, R_SM) regions of
correlated sources combined with an independent broadcast channel, and for
validating achievability at desk scale with a Monte Carlo of the
separation protocol (secret/public bit pipes, key agreement by binning,
one-time-pad combining).
"""

from .degradation import (
    DegradationOrder,
    DegradationVerdict,
    classify_component,
    classify_source_leg,
    find_degrading_map,
)
from .errors import (
    ArgumentError,
    CellLimitError,
    CodebookLimitError,
    CompositionError,
    DistributionError,
    InfeasibleCouplingError,
    PreconditionError,
    ScenarioError,
    SkregionError,
    UnknownVariableError,
)
from .gaussian import (
    GaussianScenario,
    gaussian_boundary,
    gaussian_max_sk,
    gaussian_max_sm,
)
from .prob import (
    AuxiliaryCoupling,
    Channel,
    JointDistribution,
    assemble_coupling,
    binary_symmetric_channel,
    conditional_mutual_information,
    constant_channel,
    entropy,
    erasure_channel,
    identity_channel,
    mutual_information,
    product_channel,
)
from .protocol import (
    KeyAgreementScheme,
    PipeRates,
    SimulationReport,
    WiretapCodebooks,
    build_key_agreement,
    build_virtual_wiretap_code,
    build_wiretap_code,
    estimate_leakage,
    one_time_pad,
    run_end_to_end,
    transmit_and_decode,
    wiretap_private_law,
)
from .regions import (
    RegionPolygon,
    SearchConfig,
    channel_only_region,
    inner_bound_region,
    inner_bound_search,
    parallel_degraded_region,
    point_in_region,
    region_for_coupling,
)
from .scenario import Scenario, load_scenario, parse_scenario, scenario_to_dict

__version__ = "0.1.0"
