"""Indicator of a finite-measure set with a density-zero spectrum, built stage by stage."""

from .construction import (
    ConstructionState,
    SchedulerPolicy,
    SpectralPlan,
    choose_k,
    initial_state,
    iterate,
    load_state,
    make_f0,
    plan_schedule,
    run,
    save_state,
    support_estimate,
)
from .intervals import FreqInterval, FreqIntervalSet
from .signal import Grid, SampledSignal
from .verifier import ToleranceConfig, VerificationReport, full_report

__version__ = "0.1.0"
