"""Acceptance criteria 1-12, one test each, at the stated tolerances.

Every test records a single PASS/FAIL line (shown in the terminal summary)
before asserting, so the full scorecard appears even when some fail.
"""

import math

import numpy as np
import pytest

from magspec import (CompactSetSpec, DomainSpec, SolverOpts, assemble_magnetic, assemble_nonmagnetic,
                     build_grid, classify_limit, dense_oracle, flux_scan, ground_state,
                     lambda_shrinking, lavine_ocarroll_residual, make_weight, paramagnetic_check,
                     property_p_verdict, subharmonicity_check, sweep)
from magspec.cli import main, run
from magspec.config import parse_config
from magspec.suite import SUITE_DOMAINS, SUITE_WEIGHTS, random_instance, suite_combinations, suite_h

from acceptance_log import record
from oracles import J01_SQ, SQUARE_CONT, SQUARE_H4

ZERO = make_weight("zero")
DISC = DomainSpec.disc()
N_LIST = [1, 4, 16, 64, 256]


def _lam(S, opts=SolverOpts()):
    return ground_state(S, opts).lam


def _dirichlet(spec, h):
    return _lam(assemble_nonmagnetic(build_grid(spec, h), ZERO, 0.0))


def test_criterion_01_square_benchmark():
    sq = DomainSpec.rectangle(0, 1, 0, 1)
    fine = _dirichlet(sq, 1 / 64)
    coarse = _dirichlet(sq, 1 / 4)
    rel = abs(fine - SQUARE_CONT) / SQUARE_CONT
    ok = rel <= 1e-3 and abs(coarse - SQUARE_H4) <= 1e-8
    record(1, ok, f"h=1/64 rel err {rel:.2e} (<=1e-3); h=1/4 |lam - 128 sin^2(pi/8)| = {abs(coarse - SQUARE_H4):.1e} (<=1e-8)")
    assert ok


def test_criterion_02_disc_benchmark():
    l64 = _dirichlet(DISC, 1 / 64)
    l128 = _dirichlet(DISC, 1 / 128)
    e64, e128 = abs(l64 - J01_SQ) / J01_SQ, abs(l128 - J01_SQ) / J01_SQ
    ok = e128 <= 0.03 and e128 < e64
    record(2, ok, f"rel err h=1/64 {e64:.4f}, h=1/128 {e128:.4f} (<=0.03, decreasing)")
    assert ok


def test_criterion_03_kato_over_suite():
    worst, count = math.inf, 0
    for dname, wname, n in suite_combinations():
        g = build_grid(SUITE_DOMAINS[dname], suite_h(dname, 1 / 32))
        w = SUITE_WEIGHTS[wname][0]
        lm = _lam(assemble_magnetic(g, w, n))
        ln = _lam(assemble_nonmagnetic(g, w, n))
        worst = min(worst, (lm - ln) / max(1.0, ln))
        count += 1
    ok = count >= 12 and worst >= -1e-6
    record(3, ok, f"{count} (domain, weight, n) combinations, min gap/max(1, lam0) = {worst:.2e} (>= -1e-6)")
    assert ok


def test_criterion_04_integer_flux_and_periodicity():
    g = build_grid(DomainSpec.annulus((0, 0), 0.5, 2), 1 / 24)
    ts = [0, 0.25, 0.5, 0.75, 1, 1.25, 1.5, 1.75, 2]
    pts = flux_scan(g, 1.0, ts)
    lam = {p.t: p.lambda_mag for p in pts}
    ints = [lam[0], lam[1], lam[2]]
    pair = max(abs(a - b) / max(a, b) for a in ints for b in ints)
    tol = 1e-6
    gap = lam[0.5] - max(ints)
    period = max(abs(lam[t] - lam[t + 1]) / lam[t] for t in ts if t + 1 in lam)
    ok = pair <= tol and gap > 1e3 * tol * lam[0] and period <= tol
    record(4, ok, f"integer-flux spread {pair:.1e}, half-flux gap {gap:.4f} (> {1e3 * tol * lam[0]:.4f}), "
                  f"period mismatch {period:.1e}")
    assert ok


def test_criterion_05_paramagnetic_inequality():
    g = build_grid(DISC, 1 / 32)
    lam_d = _dirichlet(DISC, 1 / 32)
    r1 = paramagnetic_check(g, make_weight("hol_squares", coeffs=[[0, 1]]), rel_tol=1e-6)
    r2 = paramagnetic_check(g, make_weight("hol_squares", coeffs=[[0, 0, 1]]), rel_tol=1e-6)
    shift = abs(r1.lambda_nonmag_2phi - (lam_d + 8)) / (lam_d + 8)
    ok = r1.satisfied and r2.satisfied and shift <= 1e-7
    record(5, ok, f"|z|^2: {r1.lambda_mag_phi:.4f} <= {r1.lambda_nonmag_2phi:.4f}; |z^2|^2: "
                  f"{r2.lambda_mag_phi:.4f} <= {r2.lambda_nonmag_2phi:.4f}; shift identity rel err {shift:.1e}")
    assert ok


@pytest.fixture(scope="module")
def disc128():
    return build_grid(DISC, 1 / 128)


def test_criterion_06_semiclassical_divergence(disc128):
    recs = sweep(disc128, make_weight("abs4"), N_LIST)
    non = [r.lambda_nonmag for r in recs]
    mono = all(b >= a for a, b in zip(non, non[1:]))
    osc = non[-1] / math.sqrt(256)
    kato = all(r.lambda_mag >= r.lambda_nonmag for r in recs)
    kinds = {c: classify_limit(recs, c).kind for c in ("lambda_mag", "lambda_nonmag")}
    ok = mono and abs(osc - 8) <= 0.8 and kato and set(kinds.values()) == {"diverging"}
    record(6, ok, f"nondecreasing={mono}, lam0/sqrt(256) = {osc:.3f} (8 +- 10%), mag>=nonmag={kato}, verdicts {kinds}")
    assert ok


def test_criterion_07_semiclassical_boundedness(disc128):
    recs = sweep(disc128, make_weight("flat_disc", r0=0.25), N_LIST)
    cap = 1.03 * 16 * J01_SQ
    mags = [r.lambda_mag for r in recs]
    below = all(m <= cap for m in mags)
    verdicts = {c: classify_limit(recs, c) for c in ("lambda_mag", "lambda_nonmag")}
    kinds = {c: v.kind for c, v in verdicts.items()}
    ok = below and set(kinds.values()) == {"bounded"}
    record(7, ok, f"max lam_mag {max(mags):.3f} <= {cap:.2f}: {below}; verdicts {kinds} "
                  f"(lam_mag tail ratio {verdicts['lambda_mag'].tail_ratio:.3f}); "
                  f"lam_mag = {', '.join(f'{m:.2f}' for m in mags)}")
    assert below, "upper bound violated"
    assert set(kinds.values()) == {"bounded"}, f"classify_limit returned {kinds}"


def test_criterion_08_property_p_diagnostics():
    pf = lambda_shrinking(CompactSetSpec.point((0, 0)), [2.0 ** -j for j in range(1, 6)], lambda r: r / 32)
    pdev = max(abs(lam * r * r - J01_SQ) / J01_SQ for r, lam in zip(pf.radii, pf.lambdas))
    pv = property_p_verdict(pf).kind
    df = lambda_shrinking(CompactSetSpec.closed_disc((0, 0), 0.25), [2.0 ** -j for j in range(5, 10)],
                          lambda r: r / 4)
    ddev = abs(df.lambdas[-1] - 16 * J01_SQ) / (16 * J01_SQ)
    dv = property_p_verdict(df).kind
    sf = lambda_shrinking(CompactSetSpec.segment((-0.5, 0), (0.5, 0)), [2.0 ** -j for j in range(1, 6)])
    smin = min(lam / (math.pi ** 2 / (4 * r * r)) for r, lam in zip(sf.radii, sf.lambdas))
    ok = pdev <= 0.05 and pv == "diverging" and ddev <= 0.03 and dv == "bounded" and smin >= 0.9
    record(8, ok, f"point: max dev {pdev:.3f}, {pv}; closed disc: last dev {ddev:.4f}, {dv}; "
                  f"segment: min lam/(pi^2/4r^2) {smin:.3f}")
    assert ok


def _bump(center, rho):
    def u(x, y):
        return np.maximum(1 - ((x - center[0]) ** 2 + (y - center[1]) ** 2) / rho ** 2, 0) ** 3
    return u


def test_criterion_09_ground_state_substitution_identity():
    hs = (1 / 32, 1 / 64, 1 / 128)
    zero = [lavine_ocarroll_residual(build_grid(DomainSpec.rectangle(0, 1, 0, 1), h), ZERO, 0.0,
                                     _bump((0.5, 0.5), 0.3)).residual for h in hs]
    mag = [lavine_ocarroll_residual(build_grid(DISC, h), make_weight("abs2"), 1.0,
                                    _bump((0, 0), 0.5)).residual for h in hs]
    ok = all(s[-1] <= 0.02 and s[0] > s[1] > s[2] for s in (zero, mag))
    record(9, ok, "zero weight " + ", ".join(f"{r:.1e}" for r in zero)
           + "; |z|^2 n=1 " + ", ".join(f"{r:.1e}" for r in mag) + " (h = 1/32, 1/64, 1/128)")
    assert ok


def test_criterion_10_oracle_equivalence():
    rng = np.random.default_rng(2024)
    worst, kinds, done = 0.0, set(), 0
    while done < 10:
        g, w, n, magnetic = random_instance(rng)
        if not 3 <= g.N <= 400 or (done >= 8 and len(kinds) < 2 and magnetic in kinds):
            continue
        S = assemble_magnetic(g, w, n) if magnetic else assemble_nonmagnetic(g, w, n)
        ref = dense_oracle(S)[0]
        worst = max(worst, abs(_lam(S) - ref) / abs(ref))
        kinds.add(magnetic)
        done += 1
    ok = worst <= 1e-9 and kinds == {True, False}
    record(10, ok, f"10 instances (magnetic and nonmagnetic), max rel deviation {worst:.1e} (<=1e-9)")
    assert ok


def test_criterion_11_subharmonic_floor_and_poincare():
    worst_floor = math.inf
    for wname, (w, domains) in SUITE_WEIGHTS.items():
        for dname in domains:
            g = build_grid(SUITE_DOMAINS[dname], suite_h(dname, 1 / 32))
            if not subharmonicity_check(w, g).is_subharmonic:
                continue
            base = _lam(assemble_nonmagnetic(g, ZERO, 0.0))
            for n in (0.5, 1, 4, 16, 64):
                lam = _lam(assemble_nonmagnetic(g, w, n))
                worst_floor = min(worst_floor, (lam - base) / base)
    worst_p = min(_dirichlet(spec, 1 / 64) / (math.pi / spec.area()) for spec in SUITE_DOMAINS.values())
    ok = worst_floor >= -1e-8 and worst_p >= 1.0
    record(11, ok, f"min (lam0 - lam(D))/lam(D) = {worst_floor:.1e} (>= -1e-8); "
                   f"min lam(D)/(pi/|D|) = {worst_p:.3f} (>= 1)")
    assert ok


def test_criterion_12_determinism_and_verify(tmp_path, capsys):
    text = f"""
domain: {{kind: disc, radius: 1}}
weight: {{tag: abs4}}
grid: {{h: 0.03125}}
solver: {{seed: 3}}
sweep: {{n_list: [1, 4, 16, 64]}}
output: {{csv: {tmp_path}/out.csv}}
"""
    cfg = parse_config(text)
    run(cfg)
    first = (tmp_path / "out.csv").read_bytes()
    run(cfg)
    same = (tmp_path / "out.csv").read_bytes() == first
    code = main(["verify"])
    out = capsys.readouterr().out
    ok = same and code == 0
    record(12, ok, f"identical CSV bytes: {same}; verify exit code {code}")
    assert ok, out
