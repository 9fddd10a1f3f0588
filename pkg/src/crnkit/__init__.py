"""crnkit: chemical reaction networks as a programming language.

Discrete, stochastic and continuous semantics for abstract reaction
networks, exact reachability analysis, decider/computer verdicts, predicate
compilation, a counter-automaton compiler with an error-reducing clock, and
a domain-level strand-displacement compiler.
"""

__version__ = "0.1.0"

from .core import (
    Crn,
    CrnDocument,
    CrnError,
    DiscreteState,
    NotApplicableError,
    ParseError,
    Reaction,
    Species,
    StoichMatrix,
    applicable,
    apply_reaction,
    conservation_vector,
    parse_crn,
    parse_state,
    render_crn,
    split_catalysts,
    stoichiometry,
)
from .reach import (
    ReachResult,
    SpeedFaultReport,
    is_terminal,
    post,
    post_kfast,
    pre_within,
    speed_fault_witness,
)
from .decide import (
    And,
    Crc,
    Crd,
    CrcOutcome,
    ModAtom,
    Not,
    Or,
    ThresholdAtom,
    Verdict,
    VerdictKind,
    compile_mod_atom,
    compile_threshold_atom,
    crc_output_verdict,
    decide_many,
    eval_predicate,
    halting_verdict,
    output_of,
    stable_verdict,
)
from .stochastic import (
    Distribution,
    StochasticConfig,
    TimeEstimate,
    Trajectory,
    empirical_distribution,
    estimate_time_to,
    propensity,
    simulate,
    total_rate,
)
from .counter import (
    CaRun,
    CompiledCa,
    CounterAutomaton,
    Dec,
    ErrorEstimate,
    Inc,
    compile_ca,
    error_probability,
    initial_state,
    parse_ca,
    run_ca,
)
from .continuous import (
    ContinuousTrajectory,
    DualRailCrc,
    DualRailValue,
    FluxVector,
    IntegrationError,
    SegmentSearchResult,
    dual_rail_eval,
    dual_rail_max,
    dual_rail_min,
    integrate,
    ode_rhs,
    segment_reach,
    straight_line_reach,
)
from .dsd import (
    CosimReport,
    DsdProgram,
    FuelAudit,
    compile_dsd,
    cosimulate_check,
    fuel_audit,
)
