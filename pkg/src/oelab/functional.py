"""ell^p gradients, base-point transport, induced functions, and profiles.

The transport lemma: pushing f along an orbit map lambda -> lambda . x0
preserves the ell^p norm, and changing the base point costs at most the
Schreier distance times the right gradient:

    || f_x0 - f_x1 ||_p  <=  d(x0, x1) || grad^r f ||_p.

On a coupling, a finitely supported f on one group induces functions f^x on
the other whose left gradients are controlled on average by the cocycle
moments; induced_gradient_check measures both sides.

The isoperimetric machinery is exhaustive and exact over connected supports:
sets-only mode maximizes |A| / ||grad 1_A||_1, integer mode maximizes
||f||_1 / ||grad f||_1 over bounded integer values on the same supports.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterable

from ._rng import derive
from .coupling import CouplingPoint, IntegrabilityGauge, MatchedCoupling, mc_integrability
from .errors import DepthExhausted, ResourceExhausted, TruncationError, UsageError
from .groups import Group


@dataclass
class FiniteSupportFunction:
    """A finitely supported real function on a group (zeros never stored)."""

    group: Group
    entries: dict

    def __post_init__(self):
        self.entries = {g: v for g, v in self.entries.items() if v != 0}
        for g in self.entries:
            self.group.check_element(g)

    @property
    def support(self):
        return set(self.entries)

    def __call__(self, g):
        return self.entries.get(g, 0.0)

    def norm(self, p: float) -> float:
        if p <= 0:
            raise UsageError("norm needs p > 0")
        return sum(abs(v) ** p for v in self.entries.values()) ** (1.0 / p)

    def gradient_power_sum(self, side: str, p: float) -> float:
        """sum over generators s and group elements of |f(g) - f(translate)|^p.

        side "left": translate is f(s^-1 g); side "right": f(g s).
        Only the finitely many nonzero terms are visited.
        """
        if p <= 0:
            raise UsageError("gradient needs p > 0")
        grp = self.group
        total = 0.0
        for s in grp.generators:
            sinv = grp.inverse(s)
            pts = set(self.entries)
            if side == "left":
                pts |= {grp.multiply(s, g) for g in self.entries}
            elif side == "right":
                pts |= {grp.multiply(g, sinv) for g in self.entries}
            else:
                raise UsageError(f"side must be left|right, got {side!r}")
            for g in pts:
                if side == "left":
                    other = self.entries.get(grp.multiply(sinv, g), 0.0)
                else:
                    other = self.entries.get(grp.multiply(g, s), 0.0)
                total += abs(self.entries.get(g, 0.0) - other) ** p
        return total

    def gradient_norm(self, side: str, p: float) -> float:
        return self.gradient_power_sum(side, p) ** (1.0 / p)


class TransitiveAction:
    """A transitive action of a group on finitely many states.

    ``apply(g, state)`` returns the image state, or None when the action is a
    truncation and the image falls outside (surfaced as TruncationError by
    the operations that cannot tolerate it).
    """

    def __init__(self, group: Group, states: Iterable, apply: Callable):
        self.group = group
        self.states = list(states)
        self._apply = apply

    def apply(self, g, state):
        return self._apply(g, state)

    def schreier_distance(self, x0, x1) -> int:
        if x0 == x1:
            return 0
        seen = {x0: 0}
        frontier = [x0]
        while frontier:
            new = []
            for u in frontier:
                for s in self.group.generators:
                    v = self._apply(s, u)
                    if v is None or v in seen:
                        continue
                    seen[v] = seen[u] + 1
                    if v == x1:
                        return seen[v]
                    new.append(v)
            frontier = new
        raise TruncationError(f"{x1} unreachable from {x0} in the realized orbit")


@dataclass
class PushReport:
    lhs: float
    rhs: float
    distance: int
    norm_in: float
    norm_pushed: float

    @property
    def holds(self) -> bool:
        return self.lhs <= self.rhs + 1e-9


def push_to_orbit(
    f: FiniteSupportFunction,
    orbit: TransitiveAction,
    x0,
    x1,
    p: float,
) -> PushReport:
    """Both sides of the base-point transport inequality at (x0, x1).

    f_x(y) = (sum of |f(lambda)|^p over lambda with lambda.x = y)^(1/p);
    checks ||f_x0 - f_x1||_p <= d(x0, x1) ||grad^r f||_p and that the push
    preserves the p-norm.
    """
    if p < 1:
        raise UsageError("transport inequality needs p >= 1")

    def pushed(x):
        acc: dict = {}
        for lam, v in f.entries.items():
            y = orbit.apply(lam, x)
            if y is None:
                raise TruncationError("support image leaves the realized orbit")
            acc[y] = acc.get(y, 0.0) + abs(v) ** p
        return {y: w ** (1.0 / p) for y, w in acc.items()}

    f0, f1 = pushed(x0), pushed(x1)
    lhs = sum(
        abs(f0.get(y, 0.0) - f1.get(y, 0.0)) ** p for y in set(f0) | set(f1)
    ) ** (1.0 / p)
    d = orbit.schreier_distance(x0, x1)
    rhs = d * f.gradient_norm("right", p)
    norm_pushed = sum(v**p for v in f0.values()) ** (1.0 / p)
    return PushReport(lhs, rhs, d, f.norm(p), norm_pushed)


@dataclass
class InducedGradientReport:
    lhs: float
    lhs_stderr: float
    rhs: float
    rhs_stderr: float
    constant: float
    samples: int
    exhausted_fraction: float
    deterministic: bool

    def holds_within(self, sigmas: float) -> bool:
        spread = sigmas * math.hypot(self.lhs_stderr, self.rhs_stderr)
        return self.lhs <= self.rhs + spread + 1e-9


def induced_gradient_check(
    coupling: MatchedCoupling,
    which: str,
    f: FiniteSupportFunction,
    p: float,
    samples: int,
    seed: int,
    gauge: IntegrabilityGauge | None = None,
) -> InducedGradientReport:
    """Measure the induced-gradient inequality on an orbit coupling.

    ``which`` names the side whose group the induced functions f^x live on;
    f is a finitely supported function on the partner group.  With
    gauge=None this is the L^p inequality

        mean_x ||grad^l f^x||_p^p  <=  |S| max_s E[d(x, s.x)^p] ||grad^r f||_p^p,

    where f^x(gamma) = |f(alpha(gamma, x)^-1)| is evaluated through transfer
    cocycles.  With a gauge phi it is the phi-variant

        mean_x ||grad^l f^x||_1 / ||f||_1  <=  2 C / phi(||f||_1),

    with C = |S| max_s E[phi(d(x, s.x))], for f normalized to unit right
    gradient.
    """
    if p < 1:
        raise UsageError("induced gradient check needs p >= 1")
    side = coupling.side(which)
    partner = coupling.partner(which).tiling
    if f.group is not partner.group and f.group.name != partner.group.name:
        raise UsageError("f must live on the partner group")
    grp = side.group
    pgrp = partner.group
    sup_inv = {pgrp.inverse(lam): abs(v) for lam, v in f.entries.items()}
    partner_side = "right" if which == "left" else "left"

    total = 0.0
    total_sq = 0.0
    used = 0
    exhausted = 0
    identical = side.tiling.name == partner.name
    n_samples = 1 if identical else samples
    for i in range(n_samples):
        x = CouplingPoint((), derive(seed, 1, i))
        try:
            fx = {}
            for lam, v in sup_inv.items():
                gamma, _, _ = coupling.transfer_cocycle(partner_side, lam, x)
                fx[gamma] = v
            val = 0.0
            for s in grp.generators:
                sinv = grp.inverse(s)
                keys = set(fx) | {grp.multiply(s, g) for g in fx}
                for g in keys:
                    val += abs(fx.get(g, 0.0) - fx.get(grp.multiply(sinv, g), 0.0)) ** p
        except DepthExhausted:
            exhausted += 1
            continue
        total += val
        total_sq += val * val
        used += 1
    if used == 0:
        raise DepthExhausted(coupling.max_depth)
    mean = total / used
    var = max(0.0, (total_sq - used * mean * mean) / max(1, used - 1))
    lhs_stderr = math.sqrt(var / used) if used > 1 else 0.0

    # cocycle-moment constant over the generators of the acting side
    moment_gauge = gauge if gauge is not None else IntegrabilityGauge.power(p)
    best = None
    best_stderr = 0.0
    for s in grp.generators:
        rep = mc_integrability(coupling, which, s, moment_gauge, n_samples, derive(seed, 2))
        if best is None or rep.estimate > best:
            best = rep.estimate
            best_stderr = rep.stderr
    C = len(grp.generators) * best
    C_stderr = len(grp.generators) * best_stderr

    if gauge is None:
        rhs = C * f.gradient_power_sum("right", p)
        rhs_stderr = C_stderr * f.gradient_power_sum("right", p)
    else:
        norm1 = sum(abs(v) for v in f.entries.values())
        mean = mean / norm1
        lhs_stderr = lhs_stderr / norm1
        rhs = 2 * C / gauge(norm1)
        rhs_stderr = 2 * C_stderr / gauge(norm1)
    return InducedGradientReport(
        lhs=mean,
        lhs_stderr=lhs_stderr,
        rhs=rhs,
        rhs_stderr=rhs_stderr,
        constant=C,
        samples=n_samples,
        exhausted_fraction=exhausted / n_samples,
        deterministic=identical,
    )


# ---------------------------------------------------------------------------
# isoperimetry
# ---------------------------------------------------------------------------


@dataclass
class ProfileResult:
    n: int
    mode: str
    value: Fraction
    witness: tuple
    witness_values: tuple | None
    convention: str
    subsets_searched: int


def _connected_supports(group: Group, max_size: int, budget: int):
    """All connected subsets of the Cayley graph containing e, up to max_size.

    Enumeration is canonical: a subset is grown only through its sorted
    frontier, deduplicated by frozenset.  Search restricted to supports
    containing the identity (translation invariance).
    """
    e = group.identity
    seen = {frozenset([e])}
    stack = [frozenset([e])]
    count = 0
    while stack:
        A = stack.pop()
        count += 1
        if count > budget:
            raise ResourceExhausted(
                f"support enumeration exceeded {budget} subsets", progress=count
            )
        yield A
        if len(A) == max_size:
            continue
        frontier = set()
        for g in A:
            for s in group.generators:
                h = group.multiply(s, g)
                if h not in A:
                    frontier.add(h)
        for h in frontier:
            B = frozenset(A | {h})
            if B not in seen:
                seen.add(B)
                stack.append(B)


def isoperimetric_profile(
    group: Group,
    n: int,
    mode: str = "sets",
    max_value: int = 1,
    budget: int = 200_000,
) -> ProfileResult:
    """Exact profile lower bound over connected supports containing e.

    sets mode: max |A| / ||grad^l 1_A||_1 over connected A with |A| <= n
    (the denominator counts each generator's displacement separately, i.e.
    it is the ell^1 left gradient of the indicator).
    int mode: max ||f||_1 / ||grad^l f||_1 over f with values in 1..max_value
    on such supports.  Both return exact rationals within the searched class.
    """
    if mode not in ("sets", "int"):
        raise UsageError(f"profile mode must be sets|int, got {mode!r}")
    if n < 0:
        raise UsageError("profile needs n >= 0")
    best = Fraction(0)
    witness: tuple = ()
    witness_values = None
    searched = 0
    if n > 0:
        try:
            for A in _connected_supports(group, n, budget):
                searched += 1
                if mode == "sets":
                    denom = _indicator_gradient(group, A)
                    val = Fraction(len(A), denom)
                    if val > best:
                        best, witness = val, tuple(sorted(A))
                else:
                    sup = tuple(sorted(A))
                    for values in itertools.product(range(1, max_value + 1), repeat=len(sup)):
                        fmap = dict(zip(sup, values))
                        num = sum(values)
                        denom = _integer_gradient(group, fmap)
                        val = Fraction(num, denom)
                        if val > best:
                            best, witness, witness_values = val, sup, values
        except ResourceExhausted as exc:
            raise ResourceExhausted(
                f"profile search budget hit after {searched} supports",
                progress={"best": best, "witness": witness},
            ) from exc
    convention = (
        "denominator = ell^1 left gradient of the function "
        "(sum over generators s of sum_g |f(g) - f(s^-1 g)|); "
        "supports restricted to connected sets containing the identity"
    )
    return ProfileResult(n, mode, best, witness, witness_values, convention, searched)


def _indicator_gradient(group: Group, A) -> int:
    total = 0
    for s in group.generators:
        sA = {group.multiply(s, g) for g in A}
        total += len(sA.symmetric_difference(A))
    return total


def _integer_gradient(group: Group, fmap: dict) -> int:
    total = 0
    for s in group.generators:
        sinv = group.inverse(s)
        pts = set(fmap) | {group.multiply(s, g) for g in fmap}
        for g in pts:
            total += abs(fmap.get(g, 0) - fmap.get(group.multiply(sinv, g), 0))
    return total


@dataclass
class SetQualityReport:
    size: int
    boundary_size: int
    quality: Fraction
    convention: str


def folner_set_quality(group: Group, A: Iterable, side: str = "left") -> SetQualityReport:
    """Exact |dA| / |A| with dA = S A symmetric-difference A (left side).

    Applied to a tile T_k this upper-bounds the Folner function at the
    reciprocal quality.  The boundary convention is the set-difference one
    (each boundary point counted once, not per generator); side "right"
    measures A S instead, which is the convention matching right-oriented
    tilings.
    """
    Aset = set(A)
    if not Aset:
        raise UsageError("folner_set_quality needs a nonempty finite set")
    if side not in ("left", "right"):
        raise UsageError(f"side must be left|right, got {side!r}")
    for g in Aset:
        group.check_element(g)
    if side == "left":
        SA = {group.multiply(s, g) for s in group.generators for g in Aset}
    else:
        SA = {group.multiply(g, s) for s in group.generators for g in Aset}
    boundary = SA.symmetric_difference(Aset)
    return SetQualityReport(
        size=len(Aset),
        boundary_size=len(boundary),
        quality=Fraction(len(boundary), len(Aset)),
        convention=f"dA = {'S A' if side == 'left' else 'A S'} symmetric-difference A (set, not multiset)",
    )
