"""Two-qubit states in the real Pauli-coefficient basis.

A joint state of Alice's and Bob's qubits is stored as the 4x4 real matrix
``r[i, j] = Tr(rho sigma_i (x) sigma_j)`` with ``i`` (Alice) and ``j`` (Bob)
running over ``I, X, Y, Z`` in that order.  Most helpers accept either a
:class:`TwoQubitState` or a raw ``(..., 4, 4)`` coefficient array and
broadcast over the leading axes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .linalg3 import dot3, matvec3, norm3

__all__ = [
    "LABELS",
    "PAULI",
    "PAULI_BASIS",
    "StateValidationError",
    "TwoQubitState",
    "ProjectiveOutcome",
    "coefficients",
    "coefficients_from_density",
    "from_density_matrix",
    "to_density_matrix",
    "density_from_coefficients",
    "reduced_bloch",
    "purity",
    "correlation_matrix",
    "hermitian_eigvalsh",
    "min_eigenvalue",
    "validate",
    "preset",
    "PRESETS",
    "expected_bob_purity",
    "projective_measure",
    "coefficient_name",
]

LABELS = "IXYZ"
DEFAULT_POS_TOL = 1e-9
ROUNDING_TOL = 1e-12  # slack for r_II and |r_ij| <= 1 against float round-off

PAULI = np.array(
    [
        [[1, 0], [0, 1]],
        [[0, 1], [1, 0]],
        [[0, -1j], [1j, 0]],
        [[1, 0], [0, -1]],
    ],
    dtype=complex,
)
# PAULI_BASIS[i, j] = sigma_i (x) sigma_j
PAULI_BASIS = np.array([[np.kron(PAULI[i], PAULI[j]) for j in range(4)] for i in range(4)])


class StateValidationError(ValueError):
    """A state or density matrix violates a physical or range constraint."""


def coefficient_name(i, j):
    return f"r_{LABELS[i]}{LABELS[j]}"


@dataclass(frozen=True)
class TwoQubitState:
    """Joint two-qubit state as a read-only 4x4 Pauli coefficient matrix.

    Rows index Alice's Pauli operator and columns Bob's.  Construction does
    not check physicality; call :func:`validate` (or :meth:`check`) for that.
    """

    r: np.ndarray

    def __post_init__(self):
        arr = np.array(self.r, dtype=float)
        if arr.shape != (4, 4):
            raise StateValidationError(f"coefficient matrix must be 4x4, got shape {arr.shape}")
        arr.setflags(write=False)
        object.__setattr__(self, "r", arr)

    def __getitem__(self, key):
        """Look up a coefficient by label, e.g. ``state["XZ"]``."""
        if isinstance(key, str):
            return float(self.r[LABELS.index(key[0]), LABELS.index(key[1])])
        return self.r[key]

    def __eq__(self, other):
        return isinstance(other, TwoQubitState) and np.array_equal(self.r, other.r)

    def __hash__(self):
        return hash(self.r.tobytes())

    @property
    def alice(self):
        return reduced_bloch(self, "alice")

    @property
    def bob(self):
        return reduced_bloch(self, "bob")

    def check(self, pos_tol=DEFAULT_POS_TOL):
        problems = validate(self, pos_tol=pos_tol)
        if problems:
            raise StateValidationError("; ".join(problems))
        return self

    def to_json(self):
        return {"r": self.r.tolist()}

    @classmethod
    def from_json(cls, obj):
        if not isinstance(obj, dict) or "r" not in obj:
            raise StateValidationError('state JSON must be an object with key "r"')
        return cls(np.asarray(obj["r"], dtype=float))


def coefficients(state):
    """Raw coefficient array of a state or array-like."""
    if isinstance(state, TwoQubitState):
        return state.r
    arr = np.asarray(state, dtype=float)
    if arr.shape[-2:] != (4, 4):
        raise StateValidationError(f"expected (..., 4, 4) coefficients, got shape {arr.shape}")
    return arr


def coefficients_from_density(rho):
    """Batched ``Re Tr(rho sigma_i (x) sigma_j)`` without input checks."""
    rho = np.asarray(rho, dtype=complex)
    # Tr(rho B) = sum_ab rho[a, b] B[b, a]
    return np.einsum("...ab,ijba->...ij", rho, PAULI_BASIS).real


def density_from_coefficients(r):
    """Batched ``(1/4) sum r_ij sigma_i (x) sigma_j``."""
    r = np.asarray(r, dtype=float)
    return 0.25 * np.einsum("...ij,ijab->...ab", r.astype(complex), PAULI_BASIS)


def from_density_matrix(rho, tol=1e-10):
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (4, 4):
        raise StateValidationError(f"density matrix must be 4x4, got shape {rho.shape}")
    herm = np.max(np.abs(rho - rho.conj().T))
    if herm > tol:
        raise StateValidationError(f"density matrix not Hermitian: max|rho - rho^dag| = {herm:.3g} > {tol:g}")
    tr = np.trace(rho)
    if abs(tr - 1.0) > tol:
        raise StateValidationError(f"density matrix trace {tr.real:.12g} violates |Tr(rho) - 1| <= {tol:g}")
    return TwoQubitState(coefficients_from_density(rho))


def to_density_matrix(state):
    return density_from_coefficients(coefficients(state))


def reduced_bloch(state, party):
    """Bloch vector of Alice's (``r_iI``) or Bob's (``r_Ij``) reduced state."""
    r = coefficients(state)
    party = party.lower()
    if party in ("alice", "a"):
        return r[..., 1:, 0].copy()
    if party in ("bob", "b"):
        return r[..., 0, 1:].copy()
    raise ValueError(f"party must be 'alice' or 'bob', not {party!r}")


def purity(state, subsystem):
    """``Tr(rho^2)`` of Alice's, Bob's, or the joint state."""
    subsystem = subsystem.lower()
    if subsystem in ("joint", "ab"):
        r = coefficients(state)
        return 0.25 * np.sum(r * r, axis=(-1, -2))
    b = reduced_bloch(state, subsystem)
    return 0.5 * (1.0 + dot3(b, b))


def correlation_matrix(state):
    """The 3x3 map taking Alice's measurement axis to the drift of Bob's Bloch vector.

    Entry ``[j, i]`` is ``r_ij - r_iI r_Ij`` (``i`` Alice, ``j`` Bob), so
    ``C @ n`` gives ``r_nj - r_nI r_Ij``.
    """
    r = coefficients(state)
    cov = r[..., 1:, 1:] - r[..., 1:, 0:1] * r[..., 0:1, 1:]
    return np.swapaxes(cov, -1, -2).copy()


def hermitian_eigvalsh(h, max_sweeps=50):
    """Eigenvalues (ascending) of a small Hermitian matrix by cyclic Jacobi.

    The n x n Hermitian ``A + iB`` is embedded as the real symmetric
    ``[[A, -B], [B, A]]``, whose spectrum is that of ``h`` with every
    eigenvalue doubled.
    """
    h = np.asarray(h, dtype=complex)
    n = h.shape[0]
    a = np.block([[h.real, -h.imag], [h.imag, h.real]])
    a = 0.5 * (a + a.T)
    m = 2 * n
    scale = math.sqrt(float(np.sum(a * a)))
    thresh = 1e-15 * scale
    for _ in range(max_sweeps):
        off = math.sqrt(max(float(np.sum(a * a) - np.sum(np.diag(a) ** 2)), 0.0))
        if off <= thresh:
            break
        for p in range(m - 1):
            for q in range(p + 1, m):
                apq = a[p, q]
                if abs(apq) <= thresh * 1e-3:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                cp = a[:, p].copy()
                cq = a[:, q].copy()
                a[:, p] = c * cp - s * cq
                a[:, q] = s * cp + c * cq
                rp = a[p, :].copy()
                rq = a[q, :].copy()
                a[p, :] = c * rp - s * rq
                a[q, :] = s * rp + c * rq
                a[p, q] = a[q, p] = 0.0
    w = np.sort(np.diag(a))
    return w[::2].copy()


def min_eigenvalue(state):
    return float(hermitian_eigvalsh(to_density_matrix(state))[0])


def validate(state, pos_tol=DEFAULT_POS_TOL):
    """List every violated state invariant; an empty list means the state is valid."""
    try:
        r = coefficients(state)
    except StateValidationError as exc:
        return [str(exc)]
    if r.shape != (4, 4):
        return [f"expected a single 4x4 state, got shape {r.shape}"]
    if not np.all(np.isfinite(r)):
        return ["coefficients must be finite"]
    problems = []
    if abs(r[0, 0] - 1.0) > ROUNDING_TOL:
        problems.append(f"r_II = 1 (got {r[0, 0]!r})")
    for i in range(4):
        for j in range(4):
            if abs(r[i, j]) > 1.0 + ROUNDING_TOL:
                problems.append(f"|{coefficient_name(i, j)}| ≤ 1 (got {r[i, j]:.12g})")
    lam = min_eigenvalue(r)
    if lam < -pos_tol:
        problems.append(f"positivity: min eigenvalue {lam:.12g} < -{pos_tol:g}")
    joint = float(purity(r, "joint"))
    if not (0.25 - 1e-12 <= joint <= 1.0 + 4 * pos_tol):
        problems.append(f"joint purity {joint:.12g} outside [1/4, 1 + 4*pos_tol]")
    return problems


# --- preset states ---------------------------------------------------------

def _product_coeffs(ra, rb):
    a = np.concatenate([[1.0], np.asarray(ra, dtype=float)])
    b = np.concatenate([[1.0], np.asarray(rb, dtype=float)])
    return np.outer(a, b)


def _check_beta(beta):
    if not -1.0 <= beta <= 1.0:
        raise StateValidationError(f"-1 ≤ beta ≤ 1 violated (beta = {beta})")


def _bell(beta=0.0):
    _check_beta(beta)
    return _dephased(beta, 0.0)


def _dephased(beta=0.5, delta=0.01):
    _check_beta(beta)
    bound = math.sqrt(1.0 - beta * beta)
    if not 0.0 <= delta <= bound:
        raise StateValidationError(f"0 ≤ delta ≤ sqrt(1 - beta^2) = {bound:.12g} violated (delta = {delta})")
    gamma = bound - delta
    r = np.zeros((4, 4))
    r[0, 0] = 1.0
    r[3, 3] = 1.0
    r[3, 0] = beta
    r[0, 3] = beta
    r[1, 1] = gamma
    r[2, 2] = -gamma
    return r


def _jacobs_counterexample():
    s = 1.0 / math.sqrt(5.0)
    r = np.zeros((4, 4))
    r[0, 0] = 1.0
    r[1, 0] = s  # XI
    r[1, 3] = s  # XZ
    r[3, 3] = s  # ZZ
    return r


def _product(r_a=(0.0, 0.0, 0.0), r_b=(0.0, 0.0, 0.0)):
    for name, v in (("r_A", r_a), ("r_B", r_b)):
        v = np.asarray(v, dtype=float)
        if v.shape != (3,):
            raise StateValidationError(f"{name} must be a 3-vector")
        if float(norm3(v)) > 1.0 + DEFAULT_POS_TOL:
            raise StateValidationError(f"|{name}| ≤ 1 violated (|{name}| = {float(norm3(v)):.12g})")
    return _product_coeffs(r_a, r_b)


def _maximally_mixed():
    return _product_coeffs((0, 0, 0), (0, 0, 0))


PRESETS = {
    "bell": _bell,
    "dephased": _dephased,
    "jacobs_counterexample": _jacobs_counterexample,
    "product": _product,
    "maximally_mixed": _maximally_mixed,
}


def preset(name, **params):
    """Build a named example state.

    ``bell(beta)`` is ``sqrt((1+beta)/2)|00> + sqrt((1-beta)/2)|11>``,
    ``dephased(beta, delta)`` its dephased mixture with off-diagonal weight
    ``gamma = sqrt(1 - beta^2) - delta``, ``jacobs_counterexample`` the
    state ``(II + (XI + XZ + ZZ)/sqrt(5))/4``, ``product(r_a, r_b)`` an
    uncorrelated state and ``maximally_mixed`` the identity over four.
    """
    try:
        builder = PRESETS[name]
    except KeyError:
        raise StateValidationError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
    try:
        r = builder(**params)
    except TypeError as exc:
        raise StateValidationError(f"bad parameters for preset {name!r}: {exc}") from None
    return TwoQubitState(r).check()


# --- projective measurement on Alice's qubit -------------------------------

@dataclass(frozen=True)
class ProjectiveOutcome:
    """Result of an ideal projective measurement of Alice's qubit along an axis.

    Bloch vectors of dropped (probability < 1e-12) branches are NaN.
    """

    axis: np.ndarray
    prob_plus: float
    prob_minus: float
    bob_bloch_plus: np.ndarray
    bob_bloch_minus: np.ndarray
    expected_bob_purity: float

    def conditional_state(self, sign):
        """Post-measurement joint state for outcome ``+1`` or ``-1``."""
        if sign not in (1, -1):
            raise ValueError("sign must be +1 or -1")
        b = self.bob_bloch_plus if sign == 1 else self.bob_bloch_minus
        if np.any(np.isnan(b)):
            raise ValueError("branch has zero probability")
        return TwoQubitState(_product_coeffs(sign * self.axis, b))


def expected_bob_purity(state, axes, min_prob=1e-12):
    """Vectorised ``projective_measure(state, n).expected_bob_purity`` over unit ``axes``."""
    r = coefficients(state)
    n = np.asarray(axes, dtype=float)
    r_ni = dot3(n, r[1:, 0])
    r_nj = np.einsum("...i,ij->...j", n, r[1:, 1:])
    r_b = r[0, 1:]
    total = np.zeros(r_ni.shape)
    kept = np.zeros(r_ni.shape)
    for sign in (1.0, -1.0):
        p = 0.5 * (1.0 + sign * r_ni)
        ok = p >= min_prob
        b = (r_b + sign * r_nj) / np.where(ok, 1.0 + sign * r_ni, 1.0)[..., None]
        total += np.where(ok, p * 0.5 * (1.0 + dot3(b, b)), 0.0)
        kept += np.where(ok, p, 0.0)
    return total / kept


def projective_measure(state, axis: Sequence[float], min_prob=1e-12):
    r = coefficients(state)
    n = np.asarray(axis, dtype=float)
    if n.shape != (3,) or abs(float(norm3(n)) - 1.0) > 1e-12:
        raise ValueError(f"measurement axis must be a unit 3-vector, got {axis!r}")
    r_ni = float(dot3(n, r[1:, 0]))
    r_nj = matvec3(r[1:, 1:].T, n)  # (r_nX, r_nY, r_nZ)
    r_ij = r[0, 1:]
    probs = {1: 0.5 * (1.0 + r_ni), -1: 0.5 * (1.0 - r_ni)}
    blochs = {}
    expected = 0.0
    for sign, p in probs.items():
        if p < min_prob:
            blochs[sign] = np.full(3, np.nan)
            continue
        b = (r_ij + sign * r_nj) / (1.0 + sign * r_ni)
        blochs[sign] = b
        expected += p * 0.5 * (1.0 + float(dot3(b, b)))
    # renormalise in case a branch was dropped
    kept = sum(p for s, p in probs.items() if p >= min_prob)
    expected /= kept
    return ProjectiveOutcome(
        axis=n.copy(),
        prob_plus=probs[1],
        prob_minus=probs[-1],
        bob_bloch_plus=blochs[1],
        bob_bloch_minus=blochs[-1],
        expected_bob_purity=expected,
    )

