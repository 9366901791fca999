"""Which traffic participants must a highway automated vehicle perceive?

Pairwise worst-case kinematics decide whether an object can constrain the
ego's behaviour within its reaction time; such objects are *relevant*.
"""

from .baselines import BaselineThresholds, baseline_flags, headway_distance, time_to_collision
from .certify import CertificationReport, certify_conservative
from .ecdf import Ecdf, ecdf_build
from .errors import (
    DataError,
    DegenerateGeometry,
    DuplicateId,
    EmptySample,
    FormatError,
    InvalidParams,
    InvalidProfile,
    InvalidSpec,
    NotApplicable,
    RelevanceError,
    UnknownEgoId,
)
from .geometry import LaneFrame, Vector2
from .ingest import (
    ALL_ORDERED,
    FixtureSpec,
    RecordingMeta,
    SingleEgo,
    TrackRecord,
    frames,
    pairs,
    parse_meta,
    parse_tracks,
    synth_fixture,
    to_object_state,
    write_tracks,
)
from .oracle import PhaseProfile, RolloutResult, rollout, worst_case_profile
from .relevance import (
    PAPER_PARAMS,
    CapabilityParams,
    FormulaFidelity,
    HypothesisResult,
    RelevanceVerdict,
    evaluate_pair,
    min_distance_raa,
    min_distance_rat_minus,
    min_distance_rat_plus,
    min_distance_rta,
    min_distance_rtt,
    min_distance_txt,
)
from .report import RunConfig, analyze
from .scenarios import FunctionalScenario, ObjectState, PairState, enumerate_hypotheses
from .svgplot import plot_ecdf_svg

__version__ = "0.1.0"
