"""Numerical and exact checks of every identity the construction relies on.

Each ``check_*`` function is pure in ``(state, config)`` and returns a list
of :class:`CheckRecord`.  Data dependencies are kept narrow so that a
corrupted quantity trips the check that owns it and nothing else:

* mass, range and containment of ``F_n`` read the samples of ``F_n``;
* telescoping and the energy budget read the stored scalars ``I_n``,
  ``int G_n^2`` and ``C``;
* moment, half-energy, orthogonality and indicator checks read the retained
  ``G_n`` samples next to ``F_{n-1}``;
* bookkeeping and density checks are exact integer arithmetic.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import List, Optional

import numpy as np

from . import intervals as iv
from .construction import ConstructionState, SchedulerPolicy, SpectralPlan, Q0
from .errors import MissingHistoryError, NyquistError
from .intervals import FreqIntervalSet
from .signal import (
    SampledSignal,
    inner_product,
    integral,
    l2_norm_sq,
    out_of_band_energy,
)


@dataclass(frozen=True)
class ToleranceConfig:
    rel_quad: float = 1e-4
    rel_ortho: float = 1e-6
    rel_leak: float = 1e-5
    guard_bins: int = 4
    range_slack: float = 1e-9

    def __post_init__(self) -> None:
        for name in ("rel_quad", "rel_ortho", "rel_leak", "guard_bins", "range_slack"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")


@dataclass(frozen=True)
class CheckRecord:
    name: str
    stage: int
    residual: float
    tol: float
    passed: bool
    label: str = ""

    def to_dict(self) -> dict:
        out = {
            "name": self.name,
            "stage": self.stage,
            "residual": self.residual,
            "tol": self.tol,
            "pass": self.passed,
        }
        if self.label:
            out["label"] = self.label
        return out


@dataclass
class VerificationReport:
    checks: List[CheckRecord]
    meta: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def failures(self) -> List[CheckRecord]:
        return [c for c in self.checks if not c.passed]

    def by_name(self, name: str) -> List[CheckRecord]:
        return [c for c in self.checks if c.name == name]

    def to_dict(self) -> dict:
        return {
            "checks": [c.to_dict() for c in self.checks],
            "pass": self.passed,
            "meta": self.meta,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def _rel(value: float, scale: float) -> float:
    return abs(value) / scale if scale > 0 else abs(value)


def _record(name, stage, residual, tol, label="") -> CheckRecord:
    residual = float(residual)
    return CheckRecord(name, stage, residual, float(tol), bool(residual <= tol), label)


def _need_history(state: ConstructionState, check: str) -> None:
    if state.stage and not state.retains_history:
        raise MissingHistoryError(f"{check} needs retained G_n samples (retain_G)")


def _prev_and_G(state: ConstructionState, n: int):
    return state.signal_at(n - 1), state.G_history[n - 1]


def _available_stages(state: ConstructionState) -> List[int]:
    return [n for n in range(state.stage + 1) if state.signal_at(n) is not None]


# --------------------------------------------------------------------------


def check_mass(state: ConstructionState, tol: ToleranceConfig = ToleranceConfig()) -> List[CheckRecord]:
    """``|int F_n - C| / C`` for every stage whose samples are available."""
    records = []
    for n in _available_stages(state):
        # at stage 0 this is 0 by definition of C, unless C was tampered with
        residual = _rel(integral(state.signal_at(n)) - state.C, state.C)
        records.append(_record("mass", n, residual, tol.rel_quad))
    return records


def check_telescoping(
    state: ConstructionState, tol: ToleranceConfig = ToleranceConfig()
) -> List[CheckRecord]:
    """``I_n = I_{n-1} - int G_n^2``, strict decrease, and the energy budget."""
    I, g = state.I_seq, state.g_energy
    I0 = I[0]
    records = []
    for n in range(1, state.stage + 1):
        drop = I[n - 1] - I[n]
        records.append(_record("telescoping", n, _rel(drop - g[n - 1], I0), tol.rel_quad))
        # strict decrease is only claimed when the stage carries energy
        if g[n - 1] > 0:
            ok = I[n] < I[n - 1]
        else:
            ok = I[n] <= I[n - 1]
        records.append(
            CheckRecord("monotone_I", n, float(I[n] - I[n - 1]), 0.0, bool(ok))
        )
    if state.stage:
        budget = math.fsum(g)
        excess = max(
            (budget - I0) / I0 if I0 > 0 else budget,
            (I0 - state.C) / state.C if state.C > 0 else I0 - state.C,
        )
        records.append(_record("energy_budget", state.stage, excess, tol.rel_quad))
    return records


def check_half_energy(
    state: ConstructionState, tol: ToleranceConfig = ToleranceConfig()
) -> List[CheckRecord]:
    """``int G_n^2 = (1/2) int [F_{n-1}(1 - F_{n-1})]^2``."""
    _need_history(state, "check_half_energy")
    records = []
    for n in range(1, state.stage + 1):
        F, G = _prev_and_G(state, n)
        P = F.values * (1.0 - F.values)
        lhs = l2_norm_sq(G)
        rhs = 0.5 * l2_norm_sq(SampledSignal(F.grid, P))
        records.append(_record("half_energy", n, _rel(lhs - rhs, max(lhs, rhs)), tol.rel_quad))
    return records


def check_moments(
    state: ConstructionState, tol: ToleranceConfig = ToleranceConfig()
) -> List[CheckRecord]:
    """``int G_n = 0`` and ``int F_{n-1} G_n = 0``, both relative to ``C``."""
    _need_history(state, "check_moments")
    records = []
    for n in range(1, state.stage + 1):
        F, G = _prev_and_G(state, n)
        records.append(_record("moment_G", n, _rel(integral(G), state.C), tol.rel_quad))
        records.append(_record("moment_FG", n, _rel(inner_product(F, G), state.C), tol.rel_quad))
    return records


def check_orthogonality(
    state: ConstructionState, tol: ToleranceConfig = ToleranceConfig()
) -> List[CheckRecord]:
    """Normalized inner products of all pairs among ``F_0, G_1, ..., G_N``."""
    _need_history(state, "check_orthogonality")
    terms = [("F0", state.F0)] + [(f"G{n}", G) for n, G in enumerate(state.G_history, start=1)]
    norms = [math.sqrt(l2_norm_sq(s)) for _, s in terms]
    records = []
    for j in range(1, len(terms)):
        for i in range(j):
            denom = norms[i] * norms[j]
            ip = inner_product(terms[i][1], terms[j][1])
            residual = _rel(ip, denom) if denom > 0 else 0.0
            records.append(
                _record("orthogonality", j, residual, tol.rel_ortho, f"{terms[i][0]},{terms[j][0]}")
            )
    return records


def check_spectral_containment(
    state: ConstructionState, tol: ToleranceConfig = ToleranceConfig()
) -> List[CheckRecord]:
    """DFT energy of ``G_n`` outside its pieces and of ``F_n`` outside ``Q_n``."""
    if state.plan.radius > state.grid.nyquist:
        raise NyquistError(
            f"final hull radius {state.plan.radius} exceeds Nyquist {state.grid.nyquist:.6g}"
        )
    g = tol.guard_bins
    records = []
    for n in _available_stages(state):
        hull_n = FreqIntervalSet((state.Q_hulls[n],))
        leak = out_of_band_energy(state.signal_at(n), hull_n, g)
        records.append(_record("containment_F", n, leak, tol.rel_leak))
    if state.retains_history:
        for n, G in enumerate(state.G_history, start=1):
            leak = out_of_band_energy(G, state.plan.pieces(n), g)
            records.append(_record("containment_G", n, leak, tol.rel_leak))
    return records


def check_pointwise_bounds(
    state: ConstructionState, tol: ToleranceConfig = ToleranceConfig()
) -> List[CheckRecord]:
    """``0 <= F_n <= 1`` and ``|G_n| <= max(F_{n-1}, 1 - F_{n-1})`` samplewise."""
    records = []
    for n in _available_stages(state):
        v = state.signal_at(n).values
        excursion = max(0.0, float(-v.min()), float(v.max() - 1.0))
        records.append(_record("range_F", n, excursion, tol.range_slack))
    if state.retains_history:
        for n in range(1, state.stage + 1):
            F, G = _prev_and_G(state, n)
            bound = np.maximum(F.values, 1.0 - F.values)
            excess = max(0.0, float(np.max(np.abs(G.values) - bound)))
            records.append(_record("bound_G", n, excess, tol.range_slack))
    return records


def check_spectral_bookkeeping(state: ConstructionState) -> List[CheckRecord]:
    """Exact recheck of hulls, pieces and pairwise disjointness (zero tolerance)."""
    return bookkeeping_records(state.plan)


def bookkeeping_records(plan: SpectralPlan) -> List[CheckRecord]:
    records = []
    ok = plan.Q_hulls[0] == Q0
    seen = FreqIntervalSet((Q0,))
    for n in range(1, plan.stage + 1):
        pieces = plan.pieces(n)
        ok = ok and plan.Q_hulls[n] == iv.next_hull(plan.Q_hulls[n - 1], plan.k_seq[n - 1])
        disjoint = iv.are_disjoint(seen, pieces)
        records.append(CheckRecord("disjointness", n, 0.0 if disjoint else 1.0, 0.0, disjoint))
        seen = iv.union_normalized(seen, pieces)
    ok = ok and seen == plan.Q_pieces
    records.append(CheckRecord("spectral_bookkeeping", plan.stage, 0.0 if ok else 1.0, 0.0, ok))
    return records


def indicator_distance(F: SampledSignal) -> float:
    """``int min(F, 1 - F)^2``: zero exactly for indicator functions."""
    return integral(SampledSignal(F.grid, np.minimum(F.values, 1.0 - F.values) ** 2))


def check_indicator_trend(
    state: ConstructionState, tol: ToleranceConfig = ToleranceConfig()
) -> List[CheckRecord]:
    """``int [F_n(1 - F_n)]^2 = 2 int G_{n+1}^2`` with the left side from samples.

    The right side uses the stored ``int G^2`` scalars, so this is an
    independent route to the half-energy identity.  The distance to an
    indicator is reported by :func:`indicator_trend`, not gated.
    """
    records = []
    for n in range(state.stage):
        F = state.signal_at(n)
        if F is None:
            continue
        P = F.values * (1.0 - F.values)
        lhs = l2_norm_sq(SampledSignal(F.grid, P))
        rhs = 2.0 * state.g_energy[n]
        records.append(_record("indicator_identity", n, _rel(lhs - rhs, max(lhs, rhs)), tol.rel_quad))
    return records


def indicator_trend(state: ConstructionState) -> dict:
    stages = _available_stages(state)
    D = [indicator_distance(state.signal_at(n)) for n in stages]
    return {
        "stages": stages,
        "D": D,
        "nonincreasing": all(b <= a for a, b in zip(D, D[1:])),
    }


def density_records(plan: SpectralPlan, policy: SchedulerPolicy) -> List[CheckRecord]:
    """Exact ``h(r_n) / r_n <= 1 / g(n)`` at every hull radius (slow_density only)."""
    if policy.mode != "slow_density":
        return []
    records = []
    for n in range(1, plan.stage + 1):
        r = plan.Q_hulls[n].radius
        ratio = iv.density(plan.Q_pieces, r) / r
        bound = Fraction(1, policy.growth_index(n))
        records.append(CheckRecord("density", n, float(ratio - bound), 0.0, ratio <= bound))
    return records


def density_profile(plan: SpectralPlan) -> List[dict]:
    radii = [h.radius for h in plan.Q_hulls]
    rows = iv.density_profile(plan.Q_pieces, radii)
    return [
        {"R": int(R), "h": str(h), "ratio": str(ratio), "ratio_float": float(ratio)}
        for R, h, ratio in rows
    ]


def check_density(state: ConstructionState, policy: Optional[SchedulerPolicy] = None) -> List[CheckRecord]:
    return density_records(state.plan, policy or state.policy)


def full_report(
    state: ConstructionState,
    policy: Optional[SchedulerPolicy] = None,
    tol: Optional[ToleranceConfig] = None,
) -> VerificationReport:
    policy = policy or state.policy
    tol = tol or ToleranceConfig()
    checks: List[CheckRecord] = []
    checks += check_spectral_bookkeeping(state)
    checks += check_mass(state, tol)
    checks += check_pointwise_bounds(state, tol)
    checks += check_telescoping(state, tol)
    if state.retains_history:
        checks += check_moments(state, tol)
        checks += check_half_energy(state, tol)
        checks += check_orthogonality(state, tol)
    checks += check_spectral_containment(state, tol)
    checks += check_indicator_trend(state, tol)
    checks += check_density(state, policy)
    meta = {
        "grid": state.grid.to_dict(),
        "k_seq": list(state.k_seq),
        "policy": policy.to_dict(),
        "tolerances": asdict(tol),
        "history_retained": state.retains_history,
        "indicator_distance": indicator_trend(state),
        "density_profile": density_profile(state.plan),
    }
    return VerificationReport(checks, meta)
