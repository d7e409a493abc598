"""Optimal conditional reachability probabilities by bisection over the threshold.

Every probe decides the sign of ``V(lam)`` and so tells whether ``lam`` is a
lower or an upper bound on the optimum.  Variants:

``std``
    plain bisection on ``[lower, upper]``.
``adv``
    additionally tightens both bounds with ``lam + V(lam) / Pr(<>E)``.
``pt-std`` / ``pt-adv``
    policy tracking: when the witnesses at both bounds coincide, that
    policy's own conditional value is tried next (it is optimal on the
    whole interval if the witness is).
``stern-brocot``
    always prefers the simplest rational in the interval.

With ``epsilon == 0`` every variant picks candidates by the simplest-rational
rule, which terminates on the exact rational optimum; with ``epsilon > 0``
all but ``stern-brocot`` use midpoints and stop once ``(upper - lower) / 2``
is at most ``epsilon``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

from .conditional import (
    ConditionalPolicy,
    ThresholdOutcome,
    TransformArtifacts,
    build_transform,
    evaluate_policy,
    policies_agree,
    probe,
    slack_value,
)
from .model import Mdp, Query
from .solver import reach_prob

__all__ = [
    "VARIANTS",
    "BisectionConfig",
    "BisectionState",
    "OptimizeResult",
    "candidate_midpoint",
    "candidate_min_denominator",
    "simplest_between",
    "update_bounds_advanced",
    "policy_tracking_check",
    "optimize",
    "iteration_bound",
]

VARIANTS = ("std", "adv", "pt-std", "pt-adv", "stern-brocot")
DEFAULT_EPSILON = Fraction(1, 10**6)


def iteration_bound(epsilon: Fraction) -> int:
    """Worst-case probe count of plain bisection to precision ``epsilon``."""
    return max(0, math.ceil(math.log2(1 / (2 * epsilon))))


def candidate_midpoint(lower: Fraction, upper: Fraction) -> Fraction:
    if not lower < upper:
        raise ValueError("empty interval")
    return (lower + upper) / 2


def simplest_between(lo: Fraction, hi: Fraction, lo_open: bool = False, hi_open: bool = False) -> Fraction:
    """Rational of least denominator (then least numerator) in the interval.

    Works by continued-fraction descent, i.e. along the Stern-Brocot tree.
    """
    lo, hi = Fraction(lo), Fraction(hi)
    if lo > hi or (lo == hi and (lo_open or hi_open)):
        raise ValueError("empty interval")
    fl = math.floor(lo)
    n = fl if (fl == lo and not lo_open) else fl + 1
    if n < hi or (n == hi and not hi_open):
        return Fraction(n)
    a, b = lo - fl, hi - fl
    if a == 0:
        # lo is an excluded integer: look for the least integer z >= 1/b
        z = 1 / b
        k = math.ceil(z)
        if k == z and hi_open:
            k += 1
        return fl + Fraction(1, k)
    return fl + 1 / simplest_between(1 / b, 1 / a, hi_open, lo_open)


def candidate_min_denominator(lower: Fraction, upper: Fraction) -> Fraction:
    """The rational with minimal denominator in the closed interval."""
    return simplest_between(lower, upper)


@dataclass(frozen=True)
class BisectionConfig:
    variant: str = "pt-std"
    epsilon: Fraction | None = None  # None: 0 in exact mode, 1e-6 otherwise
    mode: str = "exact"

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}")
        if self.epsilon is not None and not 0 <= self.epsilon <= 1:
            raise ValueError("epsilon must lie in [0, 1]")
        if self.mode == "float" and self.epsilon == 0:
            raise ValueError("epsilon = 0 requires exact arithmetic")

    @property
    def eps(self) -> Fraction:
        if self.epsilon is not None:
            return Fraction(self.epsilon)
        return Fraction(0) if self.mode == "exact" else DEFAULT_EPSILON

    @property
    def tracking(self) -> bool:
        return self.variant.startswith("pt-")

    @property
    def advanced(self) -> bool:
        return self.variant.endswith("adv")


@dataclass
class BisectionState:
    lower: Fraction = Fraction(0)
    upper: Fraction = Fraction(1)
    lower_witness: ConditionalPolicy | None = None
    upper_witness: ConditionalPolicy | None = None
    iterations: int = 0
    evidence_min: Fraction | None = None
    evidence_max: Fraction | None = None
    probed: set = field(default_factory=set)
    last_was_greedy: bool = False

    @property
    def width(self) -> Fraction:
        return self.upper - self.lower


@dataclass
class OptimizeResult:
    """``value`` is exact when ``exact`` is set, else the interval midpoint."""

    value: Fraction | float
    lower: Fraction
    upper: Fraction
    exact: bool
    witness: ConditionalPolicy | None
    iterations: int
    reason: str
    history: list[tuple[Fraction, int, object]] = field(default_factory=list)

    @property
    def error_bound(self) -> Fraction:
        return (self.upper - self.lower) / 2


def update_bounds_advanced(state: BisectionState, lam: Fraction, value, direction: str = "max") -> BisectionState:
    """Tighten ``state`` from ``V(lam) = value``.

    With ``p+ = Pr^max(<>E)`` and ``p- = Pr^min(<>E)``, the optimum lies
    between ``lam + V/p+`` and ``lam + V/p-`` (ordered by the sign of V).
    Bounds through ``p- = 0`` are skipped.  ``value`` must be the exact
    ``V(lam)``; callers only pass it when it is known to be.
    """
    value = Fraction(value)
    pmax, pmin = state.evidence_max, state.evidence_min
    cands_lo, cands_hi = [], []
    a = lam + value / pmax
    b = lam + value / pmin if pmin else None
    if value >= 0:
        cands_lo.append(a)
        if b is not None:
            cands_hi.append(b)
    if value <= 0:
        cands_hi.append(a)
        if b is not None:
            cands_lo.append(b)
    for c in cands_lo:
        c = min(max(c, Fraction(0)), Fraction(1))
        if c > state.lower:
            state.lower = c
            state.lower_witness = None
    for c in cands_hi:
        c = min(max(c, Fraction(0)), Fraction(1))
        if c < state.upper:
            state.upper = c
            state.upper_witness = None
    return state


def policy_tracking_check(m: Mdp, state: BisectionState, q: Query) -> Fraction | float | None:
    """Conditional value of the common witness, if both bounds share one."""
    lw, uw = state.lower_witness, state.upper_witness
    if lw is None or uw is None or not policies_agree(m, lw, uw, q):
        return None
    return evaluate_policy(m, lw, q)


def _next_candidate(state: BisectionState, eps: Fraction, variant: str) -> Fraction:
    lo, hi = state.lower, state.upper
    if lo == hi:
        return lo
    if eps > 0 and variant != "stern-brocot":
        return candidate_midpoint(lo, hi)
    greedy_before, state.last_was_greedy = state.last_was_greedy, False
    open_pick = simplest_between(lo, hi, True, True)
    quarter = (hi - lo) / 4
    if lo + quarter <= open_pick <= hi - quarter:
        return open_pick
    # otherwise alternate a greedy pick with a midpoint: the greedy step
    # catches an optimum that hugs a bound (or is 0, 1, or a bound from the
    # advanced update), the midpoint step keeps the interval shrinking
    if greedy_before:
        return candidate_midpoint(lo, hi)
    ends = [e for e in (lo, hi) if e not in state.probed]
    state.last_was_greedy = True
    return min(ends + [open_pick], key=lambda e: (e.denominator, e))


def optimize(m: Mdp, q: Query, cfg: BisectionConfig | None = None, artifacts: TransformArtifacts | None = None) -> OptimizeResult:
    """Optimal ``Pr^dir(<>G | <>E)`` (exactly, or within ``epsilon``)."""
    cfg = cfg or BisectionConfig(mode=q.mode)
    t = artifacts or build_transform(m, q)
    work = t.model
    if t.forced_one:
        one = Fraction(1)
        out = probe(t, one)
        return OptimizeResult(one, one, one, True, t.original_policy(out.witness), 0, "forced")

    eps = cfg.eps
    state = BisectionState()
    if cfg.advanced:
        mode = "exact" if t.exact else "float"
        state.evidence_max = Fraction(reach_prob(work, t.query.evidence, "max", mode).values[work.initial])
        state.evidence_min = Fraction(reach_prob(work, t.query.evidence, "min", mode).values[work.initial])
    history: list = []

    def finish(value, exact, witness, reason):
        return OptimizeResult(
            value,
            state.lower,
            state.upper,
            exact,
            t.original_policy(witness) if witness is not None else None,
            state.iterations,
            reason,
            history,
        )

    while True:
        if eps > 0 and state.width / 2 <= eps:
            mid = (state.lower + state.upper) / 2
            witness = state.lower_witness or state.upper_witness
            return finish(mid, state.width == 0, witness, "interval")
        lam = _next_candidate(state, eps, cfg.variant)
        if lam in state.probed:
            # only reachable with float noise: the interval cannot shrink further
            return finish(lam, False, state.lower_witness, "stalled")
        out = _probe(t, lam, state, history)
        if out.sign == 0:
            state.lower = state.upper = lam
            return finish(lam if t.exact else float(lam), t.exact, out.witness, "exact-hit")
        _standard_update(state, lam, out)
        if cfg.advanced:
            _advanced_update(t, state, lam, out)
        if cfg.tracking:
            guess = policy_tracking_check(work, state, t.query)
            if guess is not None:
                guess = Fraction(guess)
                if state.lower < guess < state.upper and guess not in state.probed:
                    out = _probe(t, guess, state, history)
                    if out.sign == 0:
                        state.lower = state.upper = guess
                        value = guess if t.exact else float(guess)
                        return finish(value, t.exact, out.witness, "tracking")
                    _standard_update(state, guess, out)


def _probe(t: TransformArtifacts, lam: Fraction, state: BisectionState, history: list) -> ThresholdOutcome:
    out = probe(t, lam)
    state.iterations += 1
    state.probed.add(lam)
    history.append((lam, out.sign, out.value))
    return out


def _standard_update(state: BisectionState, lam: Fraction, out: ThresholdOutcome) -> None:
    if out.sign > 0 and lam > state.lower:
        state.lower, state.lower_witness = lam, out.witness
    elif out.sign < 0 and lam < state.upper:
        state.upper, state.upper_witness = lam, out.witness


def _advanced_update(t: TransformArtifacts, state: BisectionState, lam: Fraction, out: ThresholdOutcome) -> None:
    # the slack value over all policies equals V(lam) on the side where
    # giving up (reward 0) is not the optimum; elsewhere keep the plain update
    favourable = out.sign > 0 if t.query.direction == "max" else out.sign < 0
    if not favourable:
        return
    update_bounds_advanced(state, lam, slack_value(t, lam), t.query.direction)
