"""Bordered linear solver: u + K*u + g = 0 with prescribed kernel coordinates.

On quasi-polynomials the operator T(u) = u + K*u acts frequency by frequency:
T(x^j e^{nu x} c) = e^{nu x} sum_r C(j,r) That^(r)(nu) c x^{j-r}, so each
frequency of the right-hand side yields an upper-triangular block system with
That(nu) on the diagonal.  At a characteristic root the diagonal is singular
and the ansatz degree is raised by the root's algebraic multiplicity; the
system is then solved in the minimum-norm sense with the singular directions
truncated, and the remaining kernel freedom is fixed afterwards so that the
projection of the solution equals the requested coordinates.
"""

from dataclasses import dataclass
from math import comb

import numpy as np

from .kernel import apply_T
from .quasipoly import QuasiPolynomial
from .spectrum import _min_norm_solve, t_hat

ROOT_MATCH_TOL = 1e-7
RESIDUAL_REL = 1e-9


@dataclass
class BorderedProblem:
    """Data of one bordered solve.

    ``target_coords`` defaults to zero (solution orthogonal to the kernel in
    the projection's sense).
    """

    K: object
    projection: object
    g: QuasiPolynomial
    target_coords: np.ndarray | None = None

    def __post_init__(self):
        m = self.projection.basis.size
        if self.target_coords is None:
            self.target_coords = np.zeros(m, dtype=complex)
        else:
            self.target_coords = np.asarray(self.target_coords, dtype=complex)
            if self.target_coords.shape != (m,):
                raise ValueError(f"expected {m} target coordinates")


def _root_multiplicities(basis):
    """Representative root frequencies with algebraic multiplicities."""
    roots = []
    for el in basis.elements:
        for k, (nu, alpha) in enumerate(roots):
            if abs(el.nu - nu) <= ROOT_MATCH_TOL:
                roots[k] = (nu, alpha + 1)
                break
        else:
            roots.append((el.nu, 1))
    return roots


def _solve_frequency(K, nu, coeffs, alpha, tol):
    """Solve the block system for one frequency of g.

    ``coeffs`` is the (q+1, n) polynomial part of g at nu; the ansatz carries
    degree q + alpha.  Returns the (q+alpha+1, n) coefficients of u at nu.
    """
    n = K.n
    q = coeffs.shape[0] - 1
    D = q + alpha
    derivs = [t_hat(K, nu, r) for r in range(D + 1)]
    A = np.zeros(((D + 1) * n, (D + 1) * n), dtype=complex)
    for s in range(D + 1):
        for j in range(s, D + 1):
            A[s * n : (s + 1) * n, j * n : (j + 1) * n] = comb(j, j - s) * derivs[j - s]
    b = np.zeros((D + 1) * n, dtype=complex)
    for s in range(q + 1):
        b[s * n : (s + 1) * n] = -coeffs[s]
    c = _min_norm_solve(A, b, tol)
    if np.linalg.norm(A @ c - b) > 10 * tol * (1 + np.linalg.norm(b)):
        raise RuntimeError(
            f"inconsistent compatibility condition at frequency {nu}: the "
            "multiplicity data does not match the kernel"
        )
    return c.reshape(D + 1, n)


def solve(problem, tol=1e-9):
    """Unique quasi-polynomial u with u + K*u + g = 0 and Q(u) = target."""
    K, P, g = problem.K, problem.projection, problem.g
    basis = P.basis
    if g.n != K.n:
        raise ValueError("right-hand side dimension does not match the kernel")
    strip = basis.strip
    roots = _root_multiplicities(basis)
    terms = []
    for nu, coeffs in g.terms:
        if strip is not None and abs(nu.real) > strip + 1e-12:
            raise ValueError(
                f"frequency {nu} lies outside the certified strip |Re| <= {strip}"
            )
        alpha = 0
        for nu_r, a in roots:
            if abs(nu - nu_r) <= ROOT_MATCH_TOL:
                nu, alpha = nu_r, a
                break
        terms.append((nu, _solve_frequency(K, nu, coeffs, alpha, tol)))
    u = QuasiPolynomial(K.n, terms)
    coords, _ = P.project(u)
    for k, el in enumerate(basis.elements):
        delta = problem.target_coords[k] - coords[k]
        if delta != 0:
            u = u + el.function.scale(delta)
    residual = apply_T(K, u) + g
    if residual.max_coeff() > RESIDUAL_REL * (1 + g.max_coeff()):
        raise RuntimeError(
            f"solver residual {residual.max_coeff():.3e} exceeds tolerance; "
            "upstream spectrum data is likely corrupted"
        )
    return u
