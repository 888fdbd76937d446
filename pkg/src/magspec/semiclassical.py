"""Semi-classical sweeps ``n -> (lambda_{n phi}, lambda^0_{n phi})`` and the
comparison experiments built on them.

Verdicts from :func:`classify_limit` are heuristics on finite sweeps. They
always ship with the raw values, so a threshold never hides data.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .assembly import assemble_magnetic, assemble_nonmagnetic
from .eigensolve import EigenResult, SolverOpts, ground_state
from .errors import NoConvergence, SupportViolation, TooFewRecords, WrongWeightTag
from .grid import GridDomain
from .weights import Weight, make_weight

DIVERGE_RATIO = 5.0
TAIL_RATIO = 1.05


def _solve(S, opts) -> EigenResult:
    try:
        return ground_state(S, opts)
    except NoConvergence as exc:
        return exc.result


def _map(fn, items, workers: int | None):
    if workers and workers > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, items))
    return [fn(it) for it in items]


@dataclass
class SweepRecord:
    n: float
    lambda_mag: float
    lambda_nonmag: float
    gap: float
    residual_mag: float
    residual_nonmag: float
    h: float
    converged: bool
    wall_time: float = field(default=0.0, compare=False)


def _check_n_list(n_list: Sequence[float]) -> list[float]:
    ns = [float(n) for n in n_list]
    if not ns:
        raise ValueError("n_list is empty")
    if any(not math.isfinite(n) or n < 0 for n in ns):
        raise ValueError(f"n_list entries must be finite and >= 0, got {ns}")
    if any(b <= a for a, b in zip(ns, ns[1:])):
        raise ValueError(f"n_list must be strictly increasing, got {ns}")
    return ns


def sweep_record(g: GridDomain, w: Weight, n: float, opts: SolverOpts = SolverOpts()) -> SweepRecord:
    t0 = time.perf_counter()
    mag = _solve(assemble_magnetic(g, w, n), opts)
    non = _solve(assemble_nonmagnetic(g, w, n), opts)
    return SweepRecord(
        n=float(n),
        lambda_mag=mag.lam,
        lambda_nonmag=non.lam,
        gap=mag.lam - non.lam,
        residual_mag=mag.residual,
        residual_nonmag=non.residual,
        h=g.h,
        converged=bool(mag.converged and non.converged),
        wall_time=time.perf_counter() - t0,
    )


def sweep(g: GridDomain, w: Weight, n_list: Sequence[float], opts: SolverOpts = SolverOpts(),
          workers: int | None = None) -> list[SweepRecord]:
    """One record per ``n``, both operators on the same grid.

    A record whose solve did not converge is kept with ``converged=False``.
    """
    ns = _check_n_list(n_list)
    return _map(lambda n: sweep_record(g, w, n, opts), ns, workers)


@dataclass(frozen=True)
class Verdict:
    """Outcome of a limit classification.

    ``kind`` is ``diverging``, ``bounded`` or ``inconclusive``. ``growth_ratio``
    is last/first, ``tail_ratio`` last/second-to-last, ``growth_exponent`` the
    log-log slope over the last three points (``nan`` without positive keys).
    """

    kind: str
    growth_ratio: float
    tail_ratio: float
    growth_exponent: float
    bound: float | None
    values: tuple[float, ...]
    label: str = ""


def _loglog_slope(x, y) -> float:
    x = np.asarray(x, dtype=float)[-3:]
    y = np.asarray(y, dtype=float)[-3:]
    ok = (x > 0) & (y > 0)
    if ok.sum() < 2:
        return float("nan")
    return float(np.polyfit(np.log(x[ok]), np.log(y[ok]), 1)[0])


def classify_values(values: Sequence[float], keys: Sequence[float] | None = None, *,
                    ratio: float = DIVERGE_RATIO, tail: float = TAIL_RATIO,
                    bound: float | None = None) -> Verdict:
    """Classify a finite, increasing-key sequence.

    ``diverging``: the last value exceeds ``ratio`` times the first and the last
    three values increase. ``bounded``: otherwise, if every value is at most the
    exhibited bound (``bound`` if given, else the largest value) and the last
    step grew by a factor below ``tail``.
    """
    v = [float(x) for x in values]
    if len(v) < 4:
        raise TooFewRecords(f"need at least 4 values, got {len(v)}")
    keys = list(range(1, len(v) + 1)) if keys is None else list(keys)
    growth = v[-1] / v[0] if v[0] > 0 else math.inf
    tail_ratio = v[-1] / v[-2] if v[-2] > 0 else math.inf
    exponent = _loglog_slope(keys, v)
    cap = max(v) if bound is None else float(bound)
    if v[-1] > ratio * v[0] and v[-3] < v[-2] < v[-1]:
        return Verdict("diverging", growth, tail_ratio, exponent, None, tuple(v))
    if all(x <= cap for x in v) and tail_ratio < tail:
        return Verdict("bounded", growth, tail_ratio, exponent, cap, tuple(v))
    return Verdict("inconclusive", growth, tail_ratio, exponent, None, tuple(v))


def classify_limit(records: Sequence[SweepRecord], column: str = "lambda_nonmag", **kw) -> Verdict:
    """Classify one column of a sweep; see :func:`classify_values`."""
    if len(records) < 4:
        raise TooFewRecords(f"need at least 4 records, got {len(records)}")
    return classify_values([getattr(r, column) for r in records], [r.n for r in records], **kw)


@dataclass(frozen=True)
class KatoReport:
    lambda_mag: float
    lambda_nonmag: float
    gap: float
    residual_mag: float
    residual_nonmag: float


def kato_report(g: GridDomain, w: Weight, n: float, opts: SolverOpts = SolverOpts()) -> KatoReport:
    mag = ground_state(assemble_magnetic(g, w, n), opts)
    non = ground_state(assemble_nonmagnetic(g, w, n), opts)
    return KatoReport(mag.lam, non.lam, mag.lam - non.lam, mag.residual, non.residual)


@dataclass(frozen=True)
class FluxPoint:
    t: float
    flux: float
    lambda_mag: float
    residual: float
    converged: bool


def flux_scan(g: GridDomain, w: Weight | float, t_list: Sequence[float],
              opts: SolverOpts = SolverOpts(), workers: int | None = None) -> list[FluxPoint]:
    """Magnetic ground energy of ``t * beta * log|z|`` along ``t_list``.

    ``w`` is a ``harmonic_log`` weight or just its ``beta``. The flux through the
    hole is ``t * beta``; ``t_list`` must span at least one period ``1/|beta|``.
    """
    if not isinstance(w, Weight):
        w = make_weight("harmonic_log", beta=float(w))
    if w.tag != "harmonic_log":
        raise WrongWeightTag(f"flux_scan needs a harmonic_log weight, got {w.tag!r}")
    beta = w.params["beta"]
    ts = sorted(float(t) for t in t_list)
    if beta == 0 or not ts or ts[-1] - ts[0] < 1 / abs(beta) - 1e-12:
        raise ValueError("t_list must cover at least one period 1/|beta|")

    def point(t):
        r = _solve(assemble_magnetic(g, w, t), opts)
        return FluxPoint(t, t * beta, r.lam, r.residual, r.converged)

    return _map(point, ts, workers)


@dataclass(frozen=True)
class ParamagneticReport:
    lambda_mag_phi: float
    lambda_nonmag_2phi: float
    satisfied: bool


def paramagnetic_check(g: GridDomain, w: Weight, opts: SolverOpts = SolverOpts(),
                       rel_tol: float = 1e-6) -> ParamagneticReport:
    """Compare ``lambda_phi`` with ``lambda^0_{2 phi}`` for ``phi = sum |h_j|^2``."""
    if w.tag != "hol_squares":
        raise WrongWeightTag(f"paramagnetic_check needs a hol_squares weight, got {w.tag!r}")
    mag = ground_state(assemble_magnetic(g, w, 1.0), opts).lam
    non = ground_state(assemble_nonmagnetic(g, w, 2.0), opts).lam
    return ParamagneticReport(mag, non, mag <= non + rel_tol * abs(non))


@dataclass(frozen=True)
class IdentityResidual:
    residual: float
    lhs: float
    rhs: float
    lambda0: float


def lavine_ocarroll_residual(g: GridDomain, w: Weight, n: float,
                             test_u: np.ndarray | Callable[[np.ndarray, np.ndarray], np.ndarray],
                             opts: SolverOpts = SolverOpts(), delta: float = 1e-3) -> IdentityResidual:
    """Discrete check of the ground-state substitution identity

        4||L u||^2 - lambda0 ||u||^2
            = ||(dx + i n phi_y - u0_x/u0) u||^2 + ||(dy - i n phi_x - u0_y/u0) u||^2

    with ``u0`` the non-magnetic ground state. The left side uses the assembled
    magnetic matrix; the right side uses forward differences and nodal
    quadrature, so the two agree only up to discretisation error. For
    ``test_u = u0`` and ``n = 0`` both sides vanish. ``delta`` guards against test
    functions reaching where ``u0`` is tiny; pass ``0`` to allow any support. Returns
    ``|lhs - rhs| / (|lhs| + |rhs| + lambda0)`` for ``u`` normalised in L^2.
    """
    h = g.h
    pts = g.points()
    u = test_u(pts[:, 0], pts[:, 1]) if callable(test_u) else test_u
    u = np.asarray(u, dtype=complex).ravel()
    if u.shape != (g.N,):
        raise ValueError(f"test function has {u.size} values, grid has {g.N} nodes")

    ground = ground_state(assemble_nonmagnetic(g, w, n), opts)
    u0 = np.real(ground.vector)
    u0 = u0 if u0.sum() >= 0 else -u0
    lam0 = ground.lam

    support = np.abs(u) > 0
    if not np.any(support):
        raise SupportViolation("test function vanishes identically")
    if np.any(u0[support] <= delta * u0.max()) or np.any(u0[support] <= 0):
        raise SupportViolation(f"test function touches nodes where u0 <= {delta} * max(u0)")
    u = u / math.sqrt(h * h * float(np.sum(np.abs(u) ** 2)))

    S = assemble_magnetic(g, w, n).matrix
    lhs = h * h * float(np.real(np.vdot(u, S @ u))) - lam0

    gx, gy = w.grad(pts[:, 0], pts[:, 1])
    gx, gy = n * np.asarray(gx, dtype=float), n * np.asarray(gy, dtype=float)
    rhs = 0.0
    for (di, dj), a_mag in (((1, 0), 1j * gy), ((0, 1), -1j * gx)):
        q = g.neighbor(di, dj)
        has = q >= 0
        uq = np.where(has, u[np.where(has, q, 0)], 0.0)
        u0q = np.where(has, u0[np.where(has, q, 0)], 0.0)
        log_der = np.zeros(g.N)
        log_der[support] = (u0q[support] - u0[support]) / (h * u0[support])
        term = (uq - u) / h + a_mag * u - log_der * u
        # Links leaving the mask contribute nothing: u/u0 is extended past the
        # boundary with zero gradient, as the substitution u = u0 * f suggests.
        rhs += h * h * float(np.sum(np.abs(term) ** 2))
    denom = abs(lhs) + abs(rhs) + lam0
    return IdentityResidual(abs(lhs - rhs) / denom, lhs, rhs, lam0)
