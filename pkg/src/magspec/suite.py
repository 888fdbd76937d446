"""The shipped validation suite and the invariant checks behind ``magspec verify``."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .assembly import assemble_magnetic, assemble_nonmagnetic
from .eigensolve import SolverOpts, dense_oracle, ground_state
from .grid import DomainSpec, build_grid
from .semiclassical import flux_scan
from .weights import make_weight

SUITE_DOMAINS = {
    "square": DomainSpec.rectangle(0, 1, 0, 1),
    "disc": DomainSpec.disc((0, 0), 1),
    "rectangle": DomainSpec.rectangle(0, 2, 0, 1),
    "annulus": DomainSpec.annulus((0, 0), 0.5, 2),
}

# Weights paired with the domains they are used on. harmonic_log is singular at
# its centre, so it only runs on the annulus.
SUITE_WEIGHTS = {
    "zero": (make_weight("zero"), ("square", "disc", "rectangle", "annulus")),
    "abs2": (make_weight("abs2"), ("square", "disc", "rectangle", "annulus")),
    "abs4": (make_weight("abs4"), ("square", "disc", "annulus")),
    "flat_disc": (make_weight("flat_disc", r0=0.25), ("disc", "square")),
    "hol_z2": (make_weight("hol_squares", coeffs=[[0, 0, 1]]), ("disc", "square")),
    "harmonic_log": (make_weight("harmonic_log", beta=1.0), ("annulus",)),
}
SUITE_N = (1.0, 4.0)


def suite_combinations():
    """``(domain_name, weight_name, n)`` triples of the Kato suite."""
    for wname, (_, domains) in SUITE_WEIGHTS.items():
        for dname in domains:
            for n in SUITE_N:
                yield dname, wname, n


def suite_h(domain_name: str, base: float) -> float:
    """Grid spacing for a suite domain; the large annulus runs twice as coarse."""
    return 2 * base if domain_name == "annulus" else base


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


def check_kato(h: float = 1 / 16, opts: SolverOpts = SolverOpts()) -> CheckResult:
    worst = math.inf
    count = 0
    for dname, wname, n in suite_combinations():
        g = build_grid(SUITE_DOMAINS[dname], suite_h(dname, h))
        w = SUITE_WEIGHTS[wname][0]
        lm = ground_state(assemble_magnetic(g, w, n), opts).lam
        ln = ground_state(assemble_nonmagnetic(g, w, n), opts).lam
        worst = min(worst, (lm - ln) / max(1.0, ln))
        count += 1
    return CheckResult("kato", worst >= -1e-6 and count >= 12,
                       f"{count} combinations, min normalised gap {worst:.3e}")


def check_monotonicity(h: float = 1 / 16, opts: SolverOpts = SolverOpts()) -> CheckResult:
    g = build_grid(SUITE_DOMAINS["disc"], h)
    w = SUITE_WEIGHTS["abs4"][0]
    lams = [ground_state(assemble_nonmagnetic(g, w, n), opts).lam for n in (0, 1, 4, 16, 64)]
    ok = all(b >= a - 1e-9 * abs(a) for a, b in zip(lams, lams[1:]))
    return CheckResult("monotonicity", ok, "nonmagnetic lambda over n = 0,1,4,16,64: "
                       + ", ".join(f"{x:.6g}" for x in lams))


def check_periodicity(h: float = 1 / 12, opts: SolverOpts = SolverOpts()) -> CheckResult:
    g = build_grid(SUITE_DOMAINS["annulus"], h)
    pts = flux_scan(g, 1.0, [0.0, 0.25, 0.5, 1.0, 1.25, 1.5, 2.0], opts)
    lam = {p.t: p.lambda_mag for p in pts}
    rel = max(abs(lam[t] - lam[t + 1]) / lam[t] for t in (0.0, 0.25, 0.5, 1.0))
    gap = lam[0.5] - lam[0.0]
    ok = rel <= 1e-6 and gap > 1e3 * 1e-6 * lam[0.0]
    return CheckResult("periodicity", ok, f"max period mismatch {rel:.2e}, half-flux gap {gap:.4g}")


def check_poincare(h: float = 1 / 64, opts: SolverOpts = SolverOpts()) -> CheckResult:
    zero = make_weight("zero")
    worst = math.inf
    for name, dom in SUITE_DOMAINS.items():
        g = build_grid(dom, h)
        lam = ground_state(assemble_nonmagnetic(g, zero, 0), opts).lam
        worst = min(worst, lam / (math.pi / dom.area()))
    return CheckResult("poincare", worst >= 1.0, f"min lambda / (pi/|D|) = {worst:.4g}")


def random_instance(rng: np.random.Generator):
    """A small random (grid, weight, n, kind) with at most 400 unknowns."""
    kind = ["square", "disc", "annulus"][rng.integers(3)]
    if kind == "square":
        dom, h = SUITE_DOMAINS["square"], 1 / int(rng.integers(8, 21))
    elif kind == "disc":
        dom, h = SUITE_DOMAINS["disc"], 1 / int(rng.integers(5, 11))
    else:
        dom, h = SUITE_DOMAINS["annulus"], 1 / int(rng.integers(3, 6))
    tags = ["abs2", "abs4", "flat_disc", "hol_squares"] + (["harmonic_log"] if kind == "annulus" else [])
    tag = tags[rng.integers(len(tags))]
    params = {"abs2": {"scale": float(rng.uniform(0.5, 2))},
              "abs4": {"scale": float(rng.uniform(0.5, 2))},
              "flat_disc": {"r0": float(rng.uniform(0.1, 0.5))},
              "hol_squares": {"coeffs": [[complex(*rng.normal(size=2)) for _ in range(3)]]},
              "harmonic_log": {"beta": float(rng.uniform(-2, 2))}}[tag]
    w = make_weight(tag, **params)
    n = float(rng.uniform(0, 8))
    g = build_grid(dom, h)
    return g, w, n, bool(rng.integers(2))


def check_oracle(count: int = 10, seed: int = 12345, opts: SolverOpts = SolverOpts()) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    done = 0
    while done < count:
        g, w, n, magnetic = random_instance(rng)
        if not 3 <= g.N <= 400:
            continue
        S = assemble_magnetic(g, w, n) if magnetic else assemble_nonmagnetic(g, w, n)
        lam = ground_state(S, opts).lam
        ref = dense_oracle(S)[0]
        worst = max(worst, abs(lam - ref) / abs(ref))
        done += 1
    return CheckResult("oracle", worst <= 1e-9, f"{count} instances, max relative deviation {worst:.2e}")


def check_hermitian(h: float = 1 / 16) -> CheckResult:
    worst = 0.0
    for dname, wname, n in suite_combinations():
        g = build_grid(SUITE_DOMAINS[dname], suite_h(dname, h))
        A = assemble_magnetic(g, SUITE_WEIGHTS[wname][0], n).matrix
        worst = max(worst, float(abs(A - A.conj().T).max()) if sp.issparse(A) else 0.0)
    return CheckResult("hermitian", worst == 0.0, f"max |A - A*| = {worst:.2e}")


CHECKS = (check_hermitian, check_kato, check_monotonicity, check_periodicity, check_poincare, check_oracle)


def run_checks(opts: SolverOpts = SolverOpts()) -> list[CheckResult]:
    out = []
    for chk in CHECKS:
        try:
            out.append(chk(opts=opts) if "opts" in chk.__code__.co_varnames else chk())
        except Exception as exc:  # a crash is a violation, reported rather than raised
            out.append(CheckResult(chk.__name__.removeprefix("check_"), False, f"{type(exc).__name__}: {exc}"))
    return out
