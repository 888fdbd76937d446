import io

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st

from magspec import (DomainSpec, assemble_magnetic, assemble_nonmagnetic, assemble_weighted_form,
                     build_grid, dense_oracle, ground_state, ground_state_generalized, link_phase,
                     make_weight, plaquette_holonomy)
from magspec.assembly import _all_links, link_phases
from magspec.errors import NegativeScale, NonAdjacent, WeightOverflow

SQUARE = DomainSpec.rectangle(0, 1, 0, 1)
DISC = DomainSpec.disc()
ANNULUS = DomainSpec.annulus((0, 0), 0.5, 2)
WEIGHTS = {
    "abs2": make_weight("abs2"),
    "abs4": make_weight("abs4"),
    "flat_disc": make_weight("flat_disc", r0=0.25),
    "hol": make_weight("hol_squares", coeffs=[[0.3, 1, 0.5j]]),
}


def test_square_quarter_spacing_entries():
    S = assemble_nonmagnetic(build_grid(SQUARE, 1 / 4), make_weight("zero"), 1.0)
    A = S.toarray()
    assert S.dim == 9
    assert np.all(np.diag(A) == 64)
    off = A[~np.eye(9, dtype=bool)]
    assert set(off[off != 0]) == {-16.0}
    assert np.count_nonzero(off) == 24


def test_abs2_diagonal_shift():
    g = build_grid(DISC, 1 / 16)
    S = assemble_nonmagnetic(g, make_weight("abs2"), 1.0)
    assert np.allclose(S.matrix.diagonal(), 4 / g.h ** 2 + 4, rtol=0, atol=1e-12)


@pytest.mark.parametrize("name", sorted(WEIGHTS))
def test_zero_scale_collapses_potential(name):
    g = build_grid(DISC, 1 / 16)
    ref = assemble_nonmagnetic(g, make_weight("zero"), 0.0).matrix
    for asm in (assemble_nonmagnetic, assemble_magnetic):
        M = asm(g, WEIGHTS[name], 0.0).matrix
        assert abs(M - ref).max() == 0


def test_link_phase_examples():
    h = 1 / 16
    assert link_phase(make_weight("zero"), (0.5, 0.5), (0.5 + h, 0.5), 1.0) == 0.0
    assert link_phase(make_weight("harmonic_log", beta=1.0), (1, 0), (1 + h, 0), 1.0) == 0.0
    theta = link_phase(make_weight("abs2"), (0, 1), (h, 1), 1.0)
    assert theta == pytest.approx(-2 * h, rel=1e-15)


def test_link_phase_rejects_non_adjacent():
    with pytest.raises(NonAdjacent):
        link_phase(make_weight("abs2"), (0, 0), (0.1, 0.1), 1.0)
    with pytest.raises(NonAdjacent):
        link_phase(make_weight("abs2"), (0, 0), (0.2, 0), 1.0, h=0.1)


def test_link_phases_exactly_antisymmetric():
    rng = np.random.default_rng(3)
    p = rng.uniform(-1, 1, size=(200, 2))
    q = p + rng.choice([-1, 1], size=(200, 1)) * np.array([[1 / 32, 0]])
    for w in WEIGHTS.values():
        assert np.array_equal(link_phases(w, p, q, 3.0), -link_phases(w, q, p, 3.0))


def test_magnetic_zero_weight_equals_nonmagnetic():
    g = build_grid(DISC, 1 / 16)
    z = make_weight("zero")
    assert abs(assemble_magnetic(g, z, 5.0).matrix - assemble_nonmagnetic(g, z, 5.0).matrix).max() == 0


def test_harmonic_holonomy_vanishes():
    g = build_grid(ANNULUS, 1 / 16)
    _, hol = plaquette_holonomy(g, make_weight("harmonic_log", beta=1.0), 1.0)
    assert len(hol) > 0
    assert np.max(np.abs(hol)) <= 1e-12


def test_abs2_holonomy_is_enclosed_flux():
    g = build_grid(DISC, 1 / 16)
    _, hol = plaquette_holonomy(g, make_weight("abs2"), 1.0)
    assert np.allclose(hol, 4 * g.h ** 2, rtol=1e-12, atol=0)


@pytest.mark.parametrize("kind", ["magnetic", "nonmagnetic"])
@pytest.mark.parametrize("name", sorted(WEIGHTS))
def test_operator_invariants(kind, name):
    g = build_grid(DISC, 1 / 16)
    w = WEIGHTS[name]
    n = 3.0
    S = (assemble_magnetic if kind == "magnetic" else assemble_nonmagnetic)(g, w, n)
    A = S.matrix
    # Hermitian bit for bit.
    assert (A != A.conj().T).nnz == 0
    pts = g.points()
    assert np.allclose(A.diagonal().real, 4 / g.h ** 2 + n * w.lap(pts[:, 0], pts[:, 1]), rtol=1e-15)
    assert np.all(A.diagonal().imag == 0)
    if kind == "nonmagnetic":
        off = A - sp.diags(A.diagonal())
        assert np.all(off.data[off.data != 0] == -1 / g.h ** 2)
    rng = np.random.default_rng(1)
    V = rng.standard_normal((g.N, 100)) + 1j * rng.standard_normal((g.N, 100))
    q = np.real(np.einsum("ij,ij->j", V.conj(), A @ V)) / np.einsum("ij,ij->j", V.conj(), V).real
    assert q.min() >= -1e-10 * S.scale


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1), n=st.floats(0, 50), name=st.sampled_from(sorted(WEIGHTS)))
def test_diamagnetic_inequality_for_random_vectors(seed, n, name):
    g = build_grid(DISC, 1 / 8)
    w = WEIGHTS[name]
    rng = np.random.default_rng(seed)
    u = rng.standard_normal(g.N) + 1j * rng.standard_normal(g.N)
    mag = np.vdot(u, assemble_magnetic(g, w, n).matrix @ u).real
    a = np.abs(u)
    non = a @ (assemble_nonmagnetic(g, w, n).matrix @ a)
    assert mag >= non - 1e-12 * abs(non)


def test_diamagnetic_ground_values():
    g = build_grid(DISC, 1 / 12)
    for w in WEIGHTS.values():
        lm = dense_oracle(assemble_magnetic(g, w, 4.0))[0]
        ln = dense_oracle(assemble_nonmagnetic(g, w, 4.0))[0]
        assert lm >= ln - 1e-8 * 4 / g.h ** 2


@settings(max_examples=10, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1))
def test_gauge_covariance(seed):
    g = build_grid(DISC, 1 / 16)
    S = assemble_magnetic(g, WEIGHTS["abs4"], 5.0)
    chi = np.random.default_rng(seed).uniform(-np.pi, np.pi, g.N)
    p, q = _all_links(g)
    theta = link_phases(WEIGHTS["abs4"], g.points()[p], g.points()[q], 5.0) + chi[q] - chi[p]
    vals = -np.exp(-1j * theta) / g.h ** 2
    off = sp.coo_matrix((vals, (p, q)), shape=(g.N, g.N))
    S2 = (sp.diags(S.matrix.diagonal()) + off + off.conj().T).tocsr()
    l1 = ground_state(S).lam
    l2 = ground_state(S2).lam
    assert abs(l1 - l2) <= 1e-8 * l1


@pytest.mark.parametrize("name", ["abs2", "abs4", "flat_disc", "hol"])
def test_nonmagnetic_monotone_in_scale_and_floor(name):
    g = build_grid(DISC, 1 / 16)
    base = dense_oracle(assemble_nonmagnetic(g, make_weight("zero"), 0.0))[0]
    lams = [dense_oracle(assemble_nonmagnetic(g, WEIGHTS[name], n))[0] for n in (0, 0.5, 2, 8, 32)]
    assert all(b >= a for a, b in zip(lams, lams[1:]))
    assert min(lams) >= base - 1e-8 * base


def test_weighted_form_zero_weight():
    g = build_grid(SQUARE, 1 / 64)
    z = make_weight("zero")
    P = assemble_weighted_form(g, z, 1.0)
    assert np.all(P.mass == g.h ** 2)
    lam = ground_state_generalized(P).lam
    ref = ground_state(assemble_nonmagnetic(g, z, 0.0)).lam
    assert abs(lam - ref) / ref < 0.02
    # The split-triangle stiffness is exactly the 5-point Laplacian times h^2.
    A5 = assemble_nonmagnetic(g, z, 0.0).matrix * g.h ** 2
    assert abs(P.stiffness - A5).max() < 1e-12


def test_weighted_form_matches_magnetic():
    g = build_grid(DISC, 1 / 64)
    w = make_weight("abs2")
    lam_w = ground_state_generalized(assemble_weighted_form(g, w, 1.0)).lam
    lam_m = ground_state(assemble_magnetic(g, w, 1.0)).lam
    assert abs(lam_w - lam_m) / lam_m < 0.03


def test_weighted_form_structure():
    g = build_grid(DISC, 1 / 16)
    P = assemble_weighted_form(g, make_weight("abs4"), 2.0)
    A = P.stiffness
    assert abs(A - A.conj().T).max() == 0
    assert np.all(P.mass > 0) and P.mass.max() <= g.h ** 2
    assert P.shift == pytest.approx(max(make_weight("abs4").phi(*g.points().T)), rel=0.2)


def test_weighted_form_overflow_guard():
    g = build_grid(DISC, 1 / 8)
    with pytest.raises(WeightOverflow):
        assemble_weighted_form(g, make_weight("abs2"), 1000.0)


def test_negative_scale_rejected():
    g = build_grid(DISC, 1 / 8)
    for asm in (assemble_magnetic, assemble_nonmagnetic, assemble_weighted_form):
        with pytest.raises(NegativeScale):
            asm(g, make_weight("abs2"), -1.0)


def test_triplet_dump_is_sorted_and_round_trips():
    g = build_grid(DISC, 1 / 4)
    S = assemble_magnetic(g, make_weight("abs2"), 1.0)
    text = S.dump()
    rows = [line.split() for line in text.splitlines()]
    keys = [(int(r[0]), int(r[1])) for r in rows]
    assert keys == sorted(keys)
    rebuilt = sp.coo_matrix(([float(r[2]) + 1j * float(r[3]) for r in rows],
                             ([k[0] for k in keys], [k[1] for k in keys])), shape=S.matrix.shape)
    assert abs(rebuilt - S.matrix).max() == 0
    buf = io.StringIO()
    S.dump(buf)
    assert buf.getvalue() == text
