"""Iterative construction ``F_n = F_{n-1} + F_{n-1}(1 - F_{n-1}) cos(k_n t)``.

The spectral bookkeeping (modulation frequencies, hulls, spectrum pieces) is
pure integer arithmetic held in :class:`SpectralPlan`; the samples only ever
*verify* what the plan certifies.
"""
from __future__ import annotations

import dataclasses
import json
import logging
import math
import re
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from . import intervals as iv
from .errors import (
    AdmissibilityError,
    CapacityError,
    DisjointnessError,
    NyquistError,
)
from .intervals import FreqInterval, FreqIntervalSet
from .signal import (
    Grid,
    SampledSignal,
    integral,
    l2_norm_sq,
    next_pow2,
    read_signal_csv,
    write_signal_csv,
)

logger = logging.getLogger(__name__)

STATE_VERSION = 1
DEFAULT_HALF_WIDTH = 128.0
DEFAULT_OVERSAMPLE = 4.0
DEFAULT_SAMPLE_CAP = 1 << 24
RETAIN_HISTORY_MAX_STAGES = 8
# cos(k t) is evaluated in float64; beyond 2**53 integer frequencies stop being exact
MAX_FREQUENCY = 1 << 53

Q0 = FreqInterval(-1, 1)


# --------------------------------------------------------------------------
# scheduler policy
# --------------------------------------------------------------------------

_GROWTH_PATTERNS = [
    (re.compile(r"^(\d+)$"), lambda m: (lambda n, c=int(m[1]): c)),
    (re.compile(r"^n$"), lambda m: (lambda n: n)),
    (re.compile(r"^(\d+)\*?n$"), lambda m: (lambda n, c=int(m[1]): c * n)),
    (re.compile(r"^n\^(\d+)$"), lambda m: (lambda n, p=int(m[1]): n**p)),
    (re.compile(r"^log$"), lambda m: (lambda n: n.bit_length())),
]


def parse_growth(spec: str) -> Callable[[int], int]:
    """Parse a growth-index spec.

    Accepted forms: ``"n"``, ``"3n"`` / ``"3*n"``, ``"n^2"``, a constant such
    as ``"2"``, and ``"log"`` (``1 + floor(log2 n)``, for a slowly growing
    density bound).
    """
    text = spec.replace(" ", "").lower()
    for pattern, build in _GROWTH_PATTERNS:
        m = pattern.match(text)
        if m:
            fn = build(m)
            if fn(1) < 1:
                raise ValueError(f"growth index must be positive, got {spec!r}")
            return fn
    raise ValueError(f"unrecognised growth index {spec!r}")


@dataclass(frozen=True)
class SchedulerPolicy:
    """Rule for picking ``k_n``.

    ``minimal`` takes the smallest admissible integer.  ``slow_density``
    additionally pushes ``k_n`` out far enough that the exact density ratio at
    the new hull radius is at most ``1 / growth_index(n)``.
    """

    mode: str = "minimal"
    margin: int = 1
    growth: str = "n"

    def __post_init__(self) -> None:
        if self.mode not in ("minimal", "slow_density"):
            raise ValueError(f"unknown scheduler mode {self.mode!r}")
        if isinstance(self.margin, bool) or not isinstance(self.margin, int) or self.margin < 1:
            raise ValueError("margin must be an integer >= 1")
        parse_growth(self.growth)

    def growth_index(self, n: int) -> int:
        value = parse_growth(self.growth)(n)
        if value < 1:
            raise ValueError(f"growth index at stage {n} is {value}, must be >= 1")
        return value

    def to_dict(self) -> dict:
        return {"mode": self.mode, "margin": self.margin, "growth": self.growth}

    @classmethod
    def from_dict(cls, data: dict) -> "SchedulerPolicy":
        return cls(data.get("mode", "minimal"), int(data.get("margin", 1)), str(data.get("growth", "n")))


def admissible_floor(r_prev: int) -> int:
    """Smallest ``k`` whose modulated pieces keep every moment identity exact.

    ``F(1-F)``, ``F^2(1-F)`` and ``F^2(1-F)^2`` have spectra inside the hulls
    ``2Q``, ``3Q`` and ``4Q``; ``k > 3r`` separates all of them from 0.
    """
    return 3 * r_prev + 1


def choose_k(r_prev: int, state, policy: SchedulerPolicy) -> int:
    """Pick ``k_n`` for the next stage.

    ``state`` is anything exposing ``stage`` and ``Q_pieces`` (a
    :class:`SpectralPlan` or a :class:`ConstructionState`).
    """
    n = state.stage + 1
    k = 3 * r_prev + policy.margin
    if policy.mode == "slow_density":
        # h(r_n) = |Q_prev| + 8 r_prev and r_n = k + 2 r_prev, so
        # h(r_n) / r_n <= 1/g  iff  k >= g (|Q_prev| + 8 r_prev) - 2 r_prev
        g = policy.growth_index(n)
        k = max(k, g * (iv.measure(state.Q_pieces) + 8 * r_prev) - 2 * r_prev)
    if k + 2 * r_prev > MAX_FREQUENCY:
        raise CapacityError(
            f"stage {n} needs frequencies near {k + 2 * r_prev}, beyond the exact "
            f"range 2**53; lower the stage count"
        )
    return k


# --------------------------------------------------------------------------
# exact spectral layer
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class SpectralPlan:
    k_seq: Tuple[int, ...] = ()
    Q_hulls: Tuple[FreqInterval, ...] = (Q0,)
    Q_pieces: FreqIntervalSet = FreqIntervalSet((Q0,))
    certified: bool = True

    @property
    def stage(self) -> int:
        return len(self.k_seq)

    @property
    def radius(self) -> int:
        return self.Q_hulls[-1].radius

    def pieces(self, n: int) -> FreqIntervalSet:
        """Spectrum pieces of ``G_n`` (``n >= 1``)."""
        return iv.spectrum_pieces(self.Q_hulls[n - 1], self.k_seq[n - 1])

    def extend(self, k: int, force: bool = False) -> "SpectralPlan":
        """Append stage ``k``; refuse inadmissible or overlapping pieces unless forced."""
        r_prev = self.radius
        if not force and k < admissible_floor(r_prev):
            raise AdmissibilityError(
                f"k={k} below admissible floor {admissible_floor(r_prev)} at stage {self.stage + 1}"
            )
        new_pieces = iv.spectrum_pieces(self.Q_hulls[-1], k)
        disjoint = iv.are_disjoint(self.Q_pieces, new_pieces)
        if not disjoint and not force:
            raise DisjointnessError(
                f"pieces {new_pieces!r} overlap existing support {self.Q_pieces!r}"
            )
        return SpectralPlan(
            self.k_seq + (k,),
            self.Q_hulls + (iv.next_hull(self.Q_hulls[-1], k),),
            iv.union_normalized(self.Q_pieces, new_pieces),
            self.certified and disjoint,
        )


def plan_schedule(
    iters: int,
    policy: Optional[SchedulerPolicy] = None,
    k_seq: Optional[Sequence[int]] = None,
    force: bool = False,
) -> SpectralPlan:
    """Run the integer recurrence alone; no samples are touched."""
    if iters < 0:
        raise ValueError("iters must be >= 0")
    policy = policy or SchedulerPolicy()
    if k_seq is not None and len(k_seq) != iters:
        raise ValueError("explicit k_seq must have one entry per stage")
    plan = SpectralPlan()
    for n in range(iters):
        k = k_seq[n] if k_seq is not None else choose_k(plan.radius, plan, policy)
        plan = plan.extend(int(k), force=force)
    return plan


# --------------------------------------------------------------------------
# sampled layer
# --------------------------------------------------------------------------


def f0_values(t: np.ndarray) -> np.ndarray:
    """``(1 / 8pi) * sinc(t/4)^4`` with ``sinc x = sin x / x``.

    Its transform is the self-convolution of the triangle
    ``max(0, 1 - 2|xi|)``: positive on ``(-1, 1)``, zero outside.
    """
    return np.sinc(t / (4 * np.pi)) ** 4 / (8 * np.pi)


def f0_transform(xi: np.ndarray) -> np.ndarray:
    """Closed form of the transform of :func:`f0_values`.

    Piecewise cubic: ``(1/3)(1 - 6x^2 + 6|x|^3)`` for ``|x| <= 1/2`` and
    ``(2/3)(1 - |x|)^3`` for ``1/2 <= |x| <= 1``.
    """
    a = np.abs(np.asarray(xi, dtype=float))
    inner = (1 - 6 * a**2 + 6 * a**3) / 3
    outer = 2 * (1 - a) ** 3 / 3
    return np.where(a <= 0.5, inner, np.where(a <= 1, outer, 0.0))


def make_f0(grid: Grid) -> SampledSignal:
    if grid.nyquist < 1:
        raise NyquistError("grid Nyquist frequency must be >= 1 to carry F_0")
    return SampledSignal(grid, f0_values(grid.times))


@dataclass(frozen=True, eq=False)
class ConstructionState:
    grid: Grid
    F0: SampledSignal
    F: SampledSignal
    plan: SpectralPlan = field(default_factory=SpectralPlan)
    C: float = 0.0
    I_seq: Tuple[float, ...] = ()
    g_energy: Tuple[float, ...] = ()
    F_history: Optional[Tuple[SampledSignal, ...]] = None
    G_history: Optional[Tuple[SampledSignal, ...]] = None
    policy: SchedulerPolicy = field(default_factory=SchedulerPolicy)

    @property
    def stage(self) -> int:
        return self.plan.stage

    @property
    def k_seq(self) -> Tuple[int, ...]:
        return self.plan.k_seq

    @property
    def Q_hulls(self) -> Tuple[FreqInterval, ...]:
        return self.plan.Q_hulls

    @property
    def Q_pieces(self) -> FreqIntervalSet:
        return self.plan.Q_pieces

    @property
    def retains_history(self) -> bool:
        return self.G_history is not None

    def signal_at(self, n: int) -> Optional[SampledSignal]:
        """``F_n`` if it is available, else ``None``."""
        if n == 0:
            return self.F0
        if n == self.stage:
            return self.F
        if self.F_history is not None:
            return self.F_history[n]
        return None


def initial_state(
    grid: Grid,
    F0: Optional[SampledSignal] = None,
    policy: Optional[SchedulerPolicy] = None,
    retain_history: bool = True,
) -> ConstructionState:
    """Stage-0 state; ``F0`` defaults to :func:`make_f0` and may be any synthetic start."""
    F0 = F0 if F0 is not None else make_f0(grid)
    P = F0.values * (1.0 - F0.values)
    return ConstructionState(
        grid=grid,
        F0=F0,
        F=F0,
        C=integral(F0),
        I_seq=(integral(SampledSignal(grid, P)),),
        F_history=(F0,) if retain_history else None,
        G_history=() if retain_history else None,
        policy=policy or SchedulerPolicy(),
    )


def iterate(
    state: ConstructionState,
    policy: Optional[SchedulerPolicy] = None,
    k: Optional[int] = None,
    force: bool = False,
) -> ConstructionState:
    """Advance one stage.

    ``k`` overrides the scheduler.  ``force`` lets an inadmissible ``k``
    through so that verifiers can be shown to catch it.
    """
    policy = policy or state.policy
    r_prev = state.plan.radius
    if k is None:
        k = choose_k(r_prev, state.plan, policy)
    r_next = k + 2 * r_prev
    if r_next > state.grid.nyquist:
        raise NyquistError(
            f"stage {state.stage + 1} reaches frequency {r_next}, grid Nyquist is "
            f"{state.grid.nyquist:.6g}"
        )
    plan = state.plan.extend(int(k), force=force)

    t = state.grid.times
    F = state.F.values
    G = F * (1.0 - F) * np.cos(k * t)
    F_next = F + G
    G_sig = SampledSignal(state.grid, G)
    F_sig = SampledSignal(state.grid, F_next)
    I_next = integral(SampledSignal(state.grid, F_next * (1.0 - F_next)))

    return dataclasses.replace(
        state,
        F=F_sig,
        plan=plan,
        I_seq=state.I_seq + (I_next,),
        g_energy=state.g_energy + (l2_norm_sq(G_sig),),
        F_history=None if state.F_history is None else state.F_history + (F_sig,),
        G_history=None if state.G_history is None else state.G_history + (G_sig,),
        policy=policy,
    )


def grid_for_plan(
    plan: SpectralPlan,
    half_width: float = DEFAULT_HALF_WIDTH,
    oversample: float = DEFAULT_OVERSAMPLE,
    sample_cap: int = DEFAULT_SAMPLE_CAP,
) -> Grid:
    if oversample < 2:
        raise ValueError("oversample must be >= 2")
    if half_width <= 0:
        raise ValueError("half width T must be positive")
    r = plan.radius
    needed = next_pow2(2 * half_width * oversample * r / math.pi - 1e-9)
    if needed > sample_cap:
        raise CapacityError(
            f"{plan.stage} stages reach frequency {r}; a grid with T={half_width:g} and "
            f"oversample {oversample:g} needs {needed} samples, above the cap of "
            f"{sample_cap}. Lower the stage count, T or the oversampling factor."
        )
    return Grid.for_bandwidth(half_width, r, oversample)


def run(
    iters: int,
    half_width: float = DEFAULT_HALF_WIDTH,
    oversample: float = DEFAULT_OVERSAMPLE,
    policy: Optional[SchedulerPolicy] = None,
    retain_G: Optional[bool] = None,
    sample_cap: int = DEFAULT_SAMPLE_CAP,
    k_seq: Optional[Sequence[int]] = None,
    force: bool = False,
) -> ConstructionState:
    """Plan the whole schedule exactly, size one grid for it, then iterate."""
    if iters < 1:
        raise ValueError("iters must be >= 1")
    policy = policy or SchedulerPolicy()
    plan = plan_schedule(iters, policy, k_seq=k_seq, force=force)
    grid = grid_for_plan(plan, half_width, oversample, sample_cap)
    if retain_G is None:
        retain_G = iters <= RETAIN_HISTORY_MAX_STAGES
    logger.info("k_seq=%s final radius=%d grid M=%d", list(plan.k_seq), plan.radius, grid.count)
    state = initial_state(grid, policy=policy, retain_history=retain_G)
    for k in plan.k_seq:
        state = iterate(state, policy, k=k, force=force)
    return state


def support_estimate(
    F: SampledSignal, threshold: float = 0.5
) -> Tuple[List[Tuple[float, float]], float]:
    """Time intervals where ``F > threshold``; each sample owns one step of length."""
    if not 0 < threshold < 1:
        raise ValueError("threshold must lie in (0, 1)")
    above = np.concatenate(([False], F.values > threshold, [False]))
    edges = np.flatnonzero(np.diff(above.astype(np.int8)))
    starts, stops = edges[::2], edges[1::2]
    t0, step = -F.grid.half_width, F.grid.step
    spans = [(t0 + s * step, t0 + e * step) for s, e in zip(starts, stops)]
    return spans, float(step * int((stops - starts).sum()))


# --------------------------------------------------------------------------
# persistence
# --------------------------------------------------------------------------


def state_to_dict(state: ConstructionState, files: Optional[dict] = None) -> dict:
    doc = {
        "version": STATE_VERSION,
        "grid": state.grid.to_dict(),
        "stage": state.stage,
        "k_seq": list(state.k_seq),
        "Q_hulls": [h.to_list() for h in state.Q_hulls],
        "Q_pieces": state.Q_pieces.to_list(),
        "C": state.C,
        "I_seq": list(state.I_seq),
        "g_energy": list(state.g_energy),
        "policy": state.policy.to_dict(),
        "certified": state.plan.certified,
    }
    if files is not None:
        doc["files"] = files
    return doc


def save_state(state: ConstructionState, out_dir) -> Path:
    """Write ``state.json`` plus one CSV per retained signal; returns the JSON path."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = {"F0": "f_0.csv", "F": f"f_{state.stage}.csv"}
    write_signal_csv(out / files["F0"], state.F0)
    if state.stage:
        write_signal_csv(out / files["F"], state.F)
    if state.retains_history:
        files["F_history"] = [f"f_{n}.csv" for n in range(state.stage + 1)]
        files["G_history"] = [f"g_{n}.csv" for n in range(1, state.stage + 1)]
        for n in range(1, state.stage):
            write_signal_csv(out / files["F_history"][n], state.F_history[n])
        for n, G in enumerate(state.G_history, start=1):
            write_signal_csv(out / files["G_history"][n - 1], G)
    path = out / "state.json"
    path.write_text(json.dumps(state_to_dict(state, files), indent=2) + "\n")
    return path


def _require(doc: dict, key: str):
    if key not in doc:
        raise ValueError(f"state file is missing field {key!r}")
    return doc[key]


def load_state(path) -> ConstructionState:
    """Read a state written by :func:`save_state` (directory or ``state.json``)."""
    path = Path(path)
    if path.is_dir():
        path = path / "state.json"
    try:
        doc = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ValueError(f"{path}: not valid JSON ({exc.msg} at line {exc.lineno}, column {exc.colno})") from exc
    if not isinstance(doc, dict):
        raise ValueError(f"{path}: expected a JSON object")
    if _require(doc, "version") != STATE_VERSION:
        raise ValueError(f"{path}: unsupported state version {doc['version']!r}")
    g = _require(doc, "grid")
    grid = Grid(float(g["T"]), float(g["delta"]), int(g["M"]))
    k_seq = tuple(int(k) for k in _require(doc, "k_seq"))
    hulls = tuple(FreqInterval(*h) for h in _require(doc, "Q_hulls"))
    pieces = FreqIntervalSet.of(tuple(p) for p in _require(doc, "Q_pieces"))
    if len(hulls) != len(k_seq) + 1:
        raise ValueError(f"{path}: expected {len(k_seq) + 1} hulls, found {len(hulls)}")
    plan = SpectralPlan(k_seq, hulls, pieces, bool(doc.get("certified", True)))
    files = _require(doc, "files")
    base = path.parent
    F0 = read_signal_csv(base / files["F0"], grid)
    F = read_signal_csv(base / files["F"], grid) if k_seq else F0
    F_hist = G_hist = None
    if "G_history" in files:
        F_hist = tuple(
            F0 if n == 0 else F if n == len(k_seq) else read_signal_csv(base / name, grid)
            for n, name in enumerate(files["F_history"])
        )
        G_hist = tuple(read_signal_csv(base / name, grid) for name in files["G_history"])
    I_seq = tuple(float(x) for x in _require(doc, "I_seq"))
    g_energy = tuple(float(x) for x in _require(doc, "g_energy"))
    if len(I_seq) != len(k_seq) + 1 or len(g_energy) != len(k_seq):
        raise ValueError(f"{path}: I_seq/g_energy lengths do not match {len(k_seq)} stages")
    return ConstructionState(
        grid=grid,
        F0=F0,
        F=F,
        plan=plan,
        C=float(_require(doc, "C")),
        I_seq=I_seq,
        g_energy=g_energy,
        F_history=F_hist,
        G_history=G_hist,
        policy=SchedulerPolicy.from_dict(doc.get("policy", {})),
    )
