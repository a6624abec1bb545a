"""One-dimensional diagonal-norm SBP operators on the reference line [-1, 1].

Two families are provided: Legendre-Gauss-Lobatto collocation operators of
degree ``n1 - 1``, and classical second-order finite-difference operators on
uniform nodes, which stay degree 1 however many nodes are used. Both are
diagonal-E operators: the boundary operator is ``diag(-1, 0, ..., 0, +1)``
and extrapolation to the interval ends is a plain endpoint pick.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .checks import VerificationReport

__all__ = [
    "ConstructionError",
    "Operator1D",
    "lgl_nodes_weights",
    "build_lgl_operator",
    "build_csbp_operator",
    "exactness_degree",
    "verify_operator_1d",
]

_NEWTON_TOL = 1e-15
_NEWTON_MAX_ITER = 100


class ConstructionError(RuntimeError):
    """Operator construction failed for the requested parameters."""


@dataclass(frozen=True)
class Operator1D:
    """First-derivative SBP operator bundle on [-1, 1].

    Attributes
    ----------
    family : str
        ``"lgl"`` or ``"csbp"``.
    n1 : int
        Node count.
    degree : int
        Polynomial exactness degree of ``D``; the quadrature in ``H`` is
        exact to degree ``2 * degree - 1``.
    nodes : ndarray, shape (n1,)
        Strictly increasing, endpoints -1 and +1.
    H : ndarray, shape (n1,)
        Positive quadrature weights (diagonal norm matrix), summing to 2.
    Q : ndarray, shape (n1, n1)
        ``H @ D``; satisfies ``Q + Q.T == diag(E)``.
    D : ndarray, shape (n1, n1)
        Differentiation matrix.
    E : ndarray, shape (n1,)
        Diagonal of the boundary operator: ``(-1, 0, ..., 0, +1)``.
    tL, tR : ndarray, shape (n1,)
        Extrapolation vectors, unit at the first / last node.
    """

    family: str
    n1: int
    degree: int
    nodes: np.ndarray
    H: np.ndarray
    Q: np.ndarray
    D: np.ndarray
    E: np.ndarray
    tL: np.ndarray
    tR: np.ndarray


def _legendre(n: int, x: np.ndarray) -> np.ndarray:
    """Evaluate P_n by the three-term recurrence."""
    p_prev = np.ones_like(x)
    if n == 0:
        return p_prev
    p = x.copy()
    for k in range(1, n):
        p, p_prev = ((2 * k + 1) * x * p - k * p_prev) / (k + 1), p
    return p


def _legendre_with_derivative(n: int, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Evaluate P_n and P_n' by the three-term recurrence (|x| < 1 only)."""
    p_prev = np.ones_like(x)
    if n == 0:
        return p_prev, np.zeros_like(x)
    p = x.copy()
    for k in range(1, n):
        p, p_prev = ((2 * k + 1) * x * p - k * p_prev) / (k + 1), p
    dp = n * (x * p - p_prev) / (x * x - 1.0)
    return p, dp


def lgl_nodes_weights(n1: int) -> tuple[np.ndarray, np.ndarray]:
    """Legendre-Gauss-Lobatto nodes and weights on [-1, 1].

    Nodes are the roots of ``(1 - x^2) P'_{n1-1}(x)``; the interior roots
    are found by Newton iteration seeded with Chebyshev-Gauss-Lobatto
    points. Weights come from the closed form
    ``2 / (n1 (n1 - 1) P_{n1-1}(x)^2)``.
    """
    if n1 < 2:
        raise ConstructionError(f"LGL operator needs at least 2 nodes, got {n1}")
    n = n1 - 1
    x = -np.cos(np.pi * np.arange(n1) / n)
    if n1 > 2:
        xi = x[1:-1].copy()
        for _ in range(_NEWTON_MAX_ITER):
            # Newton step for P'_n: P''_n from the Legendre ODE,
            # (1-x^2) P'' = 2 x P' - n(n+1) P.
            p, dp = _legendre_with_derivative(n, xi)
            d2p = (2.0 * xi * dp - n * (n + 1) * p) / (1.0 - xi * xi)
            step = dp / d2p
            xi -= step
            if np.max(np.abs(step)) < _NEWTON_TOL:
                break
        else:
            raise ConstructionError(
                f"LGL node iteration did not converge for n1={n1}"
            )
        x[1:-1] = xi
    x[0], x[-1] = -1.0, 1.0
    p = _legendre(n, x)
    w = 2.0 / (n1 * n * p * p)
    return x, w


def _lagrange_diff_matrix(x: np.ndarray) -> np.ndarray:
    """Differentiation matrix of the Lagrange interpolant on nodes ``x``."""
    n = x.size
    diff = x[:, None] - x[None, :]
    np.fill_diagonal(diff, 1.0)
    # barycentric weights
    lam = 1.0 / np.prod(diff, axis=1)
    d = (lam[None, :] / lam[:, None]) / diff
    np.fill_diagonal(d, 0.0)
    np.fill_diagonal(d, -d.sum(axis=1))
    return d


def _boundary_diag(n1: int) -> np.ndarray:
    e = np.zeros(n1)
    e[0], e[-1] = -1.0, 1.0
    return e


def _selector(n1: int, last: bool) -> np.ndarray:
    t = np.zeros(n1)
    t[-1 if last else 0] = 1.0
    return t


def build_lgl_operator(n1: int) -> Operator1D:
    """Collocation SBP operator on the ``n1`` LGL nodes (degree ``n1 - 1``)."""
    x, w = lgl_nodes_weights(n1)
    d = _lagrange_diff_matrix(x)
    q = w[:, None] * d
    return Operator1D(
        family="lgl",
        n1=n1,
        degree=n1 - 1,
        nodes=x,
        H=w,
        Q=q,
        D=d,
        E=_boundary_diag(n1),
        tL=_selector(n1, last=False),
        tR=_selector(n1, last=True),
    )


def build_csbp_operator(n1: int) -> Operator1D:
    """Classical second-order SBP operator on ``n1`` uniform nodes.

    Interior rows are central differences, boundary rows one-sided first
    order, and the norm is the trapezoid rule; the operator is degree 1
    regardless of ``n1``, so node count acts as a refinement knob.
    """
    if n1 < 3:
        raise ConstructionError(f"CSBP operator needs at least 3 nodes, got {n1}")
    dx = 2.0 / (n1 - 1)
    x = -1.0 + dx * np.arange(n1)
    x[-1] = 1.0
    w = np.full(n1, dx)
    w[0] = w[-1] = dx / 2.0
    d = np.zeros((n1, n1))
    d[0, 0], d[0, 1] = -1.0 / dx, 1.0 / dx
    d[-1, -2], d[-1, -1] = -1.0 / dx, 1.0 / dx
    rows = np.arange(1, n1 - 1)
    d[rows, rows - 1] = -0.5 / dx
    d[rows, rows + 1] = 0.5 / dx
    q = w[:, None] * d
    return Operator1D(
        family="csbp",
        n1=n1,
        degree=1,
        nodes=x,
        H=w,
        Q=q,
        D=d,
        E=_boundary_diag(n1),
        tL=_selector(n1, last=False),
        tR=_selector(n1, last=True),
    )


def exactness_degree(op: Operator1D, tol: float = 1e-10) -> int:
    """Largest k with ``D x^j`` exact at all nodes for every ``j <= k``."""
    k = -1
    for j in range(op.n1 + 2):
        exact = j * op.nodes ** (j - 1) if j > 0 else np.zeros(op.n1)
        err = np.max(np.abs(op.D @ op.nodes**j - exact))
        if err > tol:
            break
        k = j
    return k


def verify_operator_1d(op: Operator1D) -> VerificationReport:
    """Check every defining property of a 1D operator; report residuals."""
    rep = VerificationReport(subject=f"{op.family} n1={op.n1}")
    rep.add("H positive", max(0.0, -np.min(op.H)), 0.0)
    rep.add("sum(H) = 2", abs(np.sum(op.H) - 2.0), 1e-13)
    rep.add("nodes increasing, endpoints -1/+1",
            max(abs(op.nodes[0] + 1.0), abs(op.nodes[-1] - 1.0),
                max(0.0, -np.min(np.diff(op.nodes)))), 1e-14)
    e = np.diag(op.E)
    rep.add("Q + Q^T = E", np.max(np.abs(op.Q + op.Q.T - e)), 1e-13)
    rep.add("D = inv(H) Q", np.max(np.abs(op.H[:, None] * op.D - op.Q)), 1e-13)
    derr = 0.0
    for k in range(op.degree + 1):
        exact = k * op.nodes ** (k - 1) if k > 0 else np.zeros(op.n1)
        derr = max(derr, np.max(np.abs(op.D @ op.nodes**k - exact)))
    rep.add(f"D exact to degree {op.degree}", derr, 1e-10)
    qerr = 0.0
    for k in range(2 * op.degree):
        exact_int = 2.0 / (k + 1) if k % 2 == 0 else 0.0
        qerr = max(qerr, abs(np.dot(op.H, op.nodes**k) - exact_int))
    rep.add(f"quadrature exact to degree {2 * op.degree - 1}", qerr, 1e-12)
    rep.add("tL, tR pick the endpoints",
            max(abs(np.dot(op.tL, op.nodes) + 1.0),
                abs(np.dot(op.tR, op.nodes) - 1.0)), 1e-14)
    rep.notes["exactness_degree"] = exactness_degree(op)
    return rep
