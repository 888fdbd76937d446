"""Dirichlet ground energies on shrinking neighbourhoods of a compact set.

For a compact planar set K and radii r_1 > r_2 > ..., the neighbourhoods
U_j = {dist(., K) < r_j} decrease to K. Growth of lambda(U_j) without bound
signals property (P) for K; a finite limit signals that K carries a Dirichlet
eigenfunction of its own. Everything here is resolved only down to the grid
scale, and the verdict labels say so.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

from .assembly import assemble_nonmagnetic
from .eigensolve import SolverOpts, ground_state
from .errors import InvalidSpec, ResolutionTooCoarse
from .grid import CompactSetSpec, GridDomain, area, neighborhood_grid
from .semiclassical import DIVERGE_RATIO, TAIL_RATIO, Verdict, _map, classify_values
from .weights import make_weight

LABELS = {
    "diverging": "consistent with property (P)",
    "bounded": "property (P) fails (fine interior nonempty at grid scale)",
    "inconclusive": "inconclusive at grid scale",
}


def default_h_policy(r: float) -> float:
    return r / 8


@dataclass(frozen=True)
class NeighborhoodFamily:
    K: CompactSetSpec
    radii: tuple[float, ...]
    lambdas: tuple[float, ...]
    h_used: tuple[float, ...]
    areas: tuple[float, ...]
    residuals: tuple[float, ...]
    converged: tuple[bool, ...]

    def poincare_bounds(self) -> tuple[float, ...]:
        return tuple(math.pi / a for a in self.areas)

    def __len__(self) -> int:
        return len(self.radii)


def lambda_shrinking(K: CompactSetSpec, radii: Sequence[float],
                     h_policy: Callable[[float], float] = default_h_policy,
                     opts: SolverOpts = SolverOpts(), workers: int | None = None) -> NeighborhoodFamily:
    """``lambda(U_j)`` for ``U_j = {dist(., K) < r_j}``, each level at spacing ``h_policy(r_j)``.

    The sets are nested because the radii decrease; each mask is built
    independently at its own resolution.
    """
    rs = [float(r) for r in radii]
    if not rs or any(r <= 0 for r in rs) or any(b >= a for a, b in zip(rs, rs[1:])):
        raise InvalidSpec(f"radii must be positive and strictly decreasing, got {rs}")
    hs = [float(h_policy(r)) for r in rs]
    for r, h in zip(rs, hs):
        if h > r / 4:
            raise ResolutionTooCoarse(f"h_policy({r}) = {h} exceeds r/4")
    zero = make_weight("zero")

    def level(rh):
        r, h = rh
        g = neighborhood_grid(K, r, h)
        res = ground_state(assemble_nonmagnetic(g, zero, 0.0), opts)
        return res.lam, area(g), res.residual, res.converged

    out = _map(level, list(zip(rs, hs)), workers)
    lams, areas, resid, conv = zip(*out)
    return NeighborhoodFamily(K, tuple(rs), tuple(lams), tuple(hs), tuple(areas),
                              tuple(resid), tuple(conv))


def poincare_bound(g: GridDomain) -> float:
    """Lower bound ``pi / |D|`` for the Dirichlet ground energy."""
    return math.pi / area(g)


def property_p_verdict(f: NeighborhoodFamily, *, ratio: float = DIVERGE_RATIO,
                       tail: float = TAIL_RATIO) -> Verdict:
    v = classify_values(f.lambdas, [1.0 / r for r in f.radii], ratio=ratio, tail=tail)
    return Verdict(v.kind, v.growth_ratio, v.tail_ratio, v.growth_exponent, v.bound, v.values,
                   LABELS[v.kind])
