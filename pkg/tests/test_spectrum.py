"""Characteristic roots and Jordan chains.

Oracles: kernels engineered so the root set is known in closed form
(gaussian symbols give d(nu) = 1 + c exp(nu^2/4) whose roots solve an
explicit equation), and the chain conditions are closed by verifying
T phi = 0 through the exact convolution — a route independent of the
linear-algebra used to build the chains.
"""

import numpy as np
import pytest

from cmnl import kernel as kr
from cmnl import spectrum as sp
from cmnl.quasipoly import QuasiPolynomial


def scaled_gaussian(c):
    """K = c exp(-x^2), so Khat(nu) = c sqrt(pi) exp(nu^2/4)."""
    return kr.GaussianMixture.single(c, 1.0)


def double_root_at_zero():
    # Khat = -exp(nu^2/4): d = 1 - exp(nu^2/4), double root at 0.
    return scaled_gaussian(-1.0 / np.sqrt(np.pi))


def real_pair_kernel():
    # Khat = -exp((nu^2-1)/4): d has simple roots at nu = +-1 (real!).
    return scaled_gaussian(-np.exp(-0.25) / np.sqrt(np.pi))


def critical_pair_kernel():
    """Two-gaussian kernel with double roots at exactly +-i.

    Khat(i l) = -4/3 e^{(1-l^2)/4} + 1/3 e^{1-l^2} has value -1, slope 0 at
    l = 1, and stays above -1 elsewhere.
    """
    c1 = -(4.0 / 3.0) * np.exp(0.25) / np.sqrt(np.pi)
    c2 = np.exp(1.0) / (6.0 * np.sqrt(np.pi))
    return kr.GaussianMixture([(np.array([[[c1]]]), 1.0, 0.0), (np.array([[[c2]]]), 0.25, 0.0)])


def test_char_value_closed_form():
    K = double_root_at_zero()
    for nu in [0.3, 1j, 0.2 - 0.7j]:
        expected = 1 - np.exp(nu**2 / 4)
        assert abs(sp.char_value(K, nu) - expected) < 1e-13 * (1 + abs(expected))


def test_char_log_derivative():
    K = real_pair_kernel()
    nu = 0.4 + 0.2j
    h = 1e-6
    fd = (sp.char_value(K, nu + h) - sp.char_value(K, nu - h)) / (2 * h)
    ld = sp.char_log_derivative(K, nu) * sp.char_value(K, nu)
    assert abs(fd - ld) < 1e-8


def test_winding_counts_known_roots():
    K = real_pair_kernel()
    f = lambda nu: sp.char_value(K, nu)
    assert sp.count_in_rectangle(K, 0.5, 1.5, -0.5, 0.5) == 1
    assert sp.count_in_rectangle(K, -1.5, 1.5, -0.5, 0.5) == 2
    assert sp.count_in_rectangle(K, -0.4, 0.4, -0.4, 0.4) == 0
    assert sp.count_on_circle(K, 1.0, 0.3) == 1


def test_winding_double_root():
    K = double_root_at_zero()
    assert sp.count_on_circle(K, 0.0, 0.5) == 2


def test_contour_through_root_raises():
    K = real_pair_kernel()
    with pytest.raises(sp.ContourError):
        sp.winding_number(
            lambda nu: sp.char_value(K, nu),
            [1.0 + 0j, 1.0 + 1j, 2.0 + 1j, 2.0 + 0j],  # corner hits the root
        )


def test_locate_double_root_at_zero():
    K = double_root_at_zero()
    res = sp.locate_roots(K)
    assert len(res.roots) == 1
    r = res.roots[0]
    assert r.multiplicity == 2
    assert abs(r.nu) < 1e-10
    assert r.snap_distance < 1e-10
    assert res.total_multiplicity == 2


def test_locate_conjugate_pair():
    K = critical_pair_kernel()
    res = sp.locate_roots(K)
    assert res.total_multiplicity == 4
    ims = sorted(r.nu.imag for r in res.roots)
    assert np.allclose(ims, [-1.0, 1.0], atol=1e-9)
    assert all(r.multiplicity == 2 for r in res.roots)
    assert all(r.nu.real == 0.0 for r in res.roots)
    groups = res.pair_groups()
    assert len(groups) == 1
    plus, minus = groups[0]
    assert res.roots[plus].nu.imag > 0 > res.roots[minus].nu.imag
    # exact conjugate symmetrization
    assert res.roots[plus].nu == -res.roots[minus].nu


def test_offaxis_roots_shrink_strip():
    # Roots at nu = +-1 average onto the axis; the unresolved-cluster check
    # must force strip shrinking rather than reporting a fake axis root.
    K = real_pair_kernel()
    res = sp.locate_roots(K)
    assert res.roots == []
    assert res.strip <= 0.51
    assert res.diagnostics["strip_shrinks"] >= 1


def test_isolated_offaxis_root_excluded():
    # Khat = -exp(nu^2/4 - nu/2 + 0.1275): simple real roots at 0.3 and 1.7;
    # only 0.3 is in the initial strip and must be excluded explicitly.
    c = -np.exp(0.1275) / np.sqrt(np.pi)
    K = kr.GaussianMixture.single(c, 1.0, b=0.5)
    assert abs(sp.char_value(K, 0.3)) < 1e-13
    res = sp.locate_roots(K)
    assert res.roots == []
    assert res.strip < 0.3
    ex = res.diagnostics["excluded_offaxis"]
    assert any(abs(z - 0.3) < 1e-8 for z in ex)


# -- Jordan chains ------------------------------------------------------------


def check_T_annihilates(K, nu, chains):
    for fn in [f for ch in chains for f in sp.chain_functions(nu, ch)]:
        resid = kr.apply_T(K, fn)
        assert resid.max_coeff() < 1e-7 * (1 + fn.max_coeff())


def test_scalar_double_root_chain():
    K = double_root_at_zero()
    chains = sp.jordan_chains(K, 0.0, 2)
    assert len(chains) == 1
    e0, e1 = chains[0]
    assert np.allclose(e0, [1.0])
    assert np.allclose(e1, [0.0])  # minimum-norm generalized vector
    fns = sp.chain_functions(0.0, chains[0])
    # phi_0 = 1, phi_1 = x
    assert np.allclose(fns[0].evaluate(0.7), [1.0])
    assert np.allclose(fns[1].evaluate(0.7), [0.7])
    check_T_annihilates(K, 0.0, chains)


def test_critical_pair_chains():
    K = critical_pair_kernel()
    chains = sp.jordan_chains(K, 1j, 2)
    assert len(chains) == 1 and len(chains[0]) == 2
    check_T_annihilates(K, 1j, chains)
    conj = sp.conjugate_chains(chains)
    check_T_annihilates(K, -1j, conj)


def test_matrix_length_four_chain():
    """K(x) = (N - I) e^{-x^2}/sqrt(pi), N the 2x2 nilpotent shift.

    Then That(nu) = (1-g) I + g N with g = exp(nu^2/4): det = (1-g)^2 has a
    multiplicity-4 root at 0 carried by a single chain, worked by hand:
    e0 = (1,0), e1 = 0, e2 = (0, 1/2), e3 = 0.
    """
    N = np.array([[0.0, 1.0], [0.0, 0.0]])
    C = (N - np.eye(2)) / np.sqrt(np.pi)
    K = kr.GaussianMixture([(C[None, :, :], 1.0, 0.0)], n=2)
    res = sp.locate_roots(K)
    assert res.total_multiplicity == 4
    assert len(res.roots) == 1 and res.roots[0].multiplicity == 4
    chains = sp.jordan_chains(K, 0.0, 4)
    assert len(chains) == 1
    e0, e1, e2, e3 = chains[0]
    assert np.allclose(e0, [1.0, 0.0], atol=1e-10)
    assert np.allclose(e1, [0.0, 0.0], atol=1e-10)
    assert np.allclose(e2, [0.0, 0.5], atol=1e-10)
    assert np.allclose(e3, [0.0, 0.0], atol=1e-10)
    check_T_annihilates(K, 0.0, chains)


def test_two_singleton_chains():
    # Diagonal kernel, each entry with a simple root at 0: two chains of length 1.
    a = -1.0 / np.sqrt(np.pi)
    coeffs = np.zeros((2, 2, 2))
    coeffs[0] = a * np.eye(2)
    coeffs[1] = np.diag([1.0, -0.7])
    K = kr.GaussianMixture([(coeffs, 1.0, 0.0)], n=2)
    chains = sp.jordan_chains(K, 0.0, 2)
    assert sorted(len(c) for c in chains) == [1, 1]
    heads = sorted(np.argmax(np.abs(c[0])) for c in chains)
    assert heads == [0, 1]
    check_T_annihilates(K, 0.0, chains)


def test_chain_functions_shape():
    fns = sp.chain_functions(2j, [np.array([1.0]), np.array([0.5])])
    # phi_1 = (0.5 + x) e^{2ix}
    coeffs = fns[1].term_for(2j)
    assert np.allclose(coeffs[:, 0], [0.5, 1.0])
