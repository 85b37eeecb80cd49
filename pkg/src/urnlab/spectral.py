"""Structural classification of replacement matrices.

A validated matrix is matched, up to relabeling of colors, against the
block-triangular shapes this package has closed-form limit theory for.
Classification fills in the data the scaling laws need: block scale and
eigenvalues, normalized eigenvectors, stationary distributions of the 2x2
blocks, and a Jordan basis when the matrix is not diagonalizable.

All 2x2 spectra are in closed form: for a stochastic block
[[1-a, a], [b, 1-b]] the non-principal eigenvalue is 1-a-b, its right
eigenvector is proportional to (a, -b), and the stationary distribution is
(b, a)/(a+b).  No general eigensolver is involved.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .core import ReplacementSpec

__all__ = [
    "ZERO_TOL",
    "REPEAT_TOL",
    "EIG_TOL",
    "Family",
    "StructureClass",
    "normalize_eigvec",
    "eigenpair_2x2",
    "stationary_2x2",
    "classify",
    "jordan_basis",
]

# Entries at or below this count as structural zeros.
ZERO_TOL = 1e-12
# Eigenvalue coincidence and open-interval margins for scale parameters.
REPEAT_TOL = 1e-9
# Max residual allowed in stored eigenpair / Jordan identities.
EIG_TOL = 1e-10


class Family(Enum):
    """Matrix shapes with known limit behavior, up to color relabeling.

    identity: no mixing at all; shares converge to a random vector.
    two-irreducible: 2 colors, both off-diagonal entries positive.
    two-triangular: 2 colors, one self-feeding minor color, one absorbing.
    three-one-dominant: 2-color sub-block feeding a single absorbing color.
    three-two-dominant-*: one minor color feeding an irreducible 2x2 block,
        split by whether the matrix is diagonalizable.
    four-block-*: 2-color sub-block feeding an irreducible 2x2 block,
        split the same way.
    """

    IDENTITY = "identity"
    TWO_IRREDUCIBLE = "two-irreducible"
    TWO_TRIANGULAR = "two-triangular"
    THREE_ONE_DOMINANT = "three-one-dominant"
    THREE_TWO_DOMINANT_DIAG = "three-two-dominant-diag"
    THREE_TWO_DOMINANT_JORDAN = "three-two-dominant-jordan"
    FOUR_BLOCK_DIAG = "four-block-diag"
    FOUR_BLOCK_JORDAN = "four-block-jordan"
    UNSUPPORTED = "unsupported"


@dataclass(frozen=True, eq=False)
class StructureClass:
    """Classification result plus the spectral data the laws consume.

    permutation maps canonical position j to the original color
    permutation[j]; canonical order puts non-dominant colors first.  A
    canonical-coordinate vector v maps back via orig[permutation[j]] = v[j].

    scale is the row mass s of the non-dominant block, lam the non-principal
    eigenvalue driving the fluctuation track (of the whole matrix for two
    colors, of the sub-block otherwise, of the dominant block for the
    three-color two-dominant shape), beta the dominant-block non-principal
    eigenvalue in the four-color shape.  Stationary vectors and eigvec_*
    are 2-vectors in canonical block order.  vectors lists (label, vector,
    eigenvalue) with vectors in original coordinates; eigenvalue is None
    for generalized-eigenvector tracks.
    """

    family: Family
    spec: ReplacementSpec
    permutation: tuple[int, ...]
    scale: float | None = None
    lam: float | None = None
    beta: float | None = None
    stationary_whole: np.ndarray | None = None
    stationary_sub: np.ndarray | None = None
    stationary_dom: np.ndarray | None = None
    eigvec_lam: np.ndarray | None = None
    eigvec_beta: np.ndarray | None = None
    coupling_row: np.ndarray | None = None
    jordan_basis_matrix: np.ndarray | None = None
    jordan_form: np.ndarray | None = None
    vectors: tuple[tuple[str, np.ndarray, float | None], ...] = ()
    warnings: tuple[str, ...] = ()

    @property
    def supported(self) -> bool:
        return self.family is not Family.UNSUPPORTED

    def vector(self, label: str) -> np.ndarray:
        for name, vec, _ in self.vectors:
            if name == label:
                return vec
        raise KeyError(label)


class _NoMatch(Exception):
    """One candidate relabeling failed; reason kept only when informative."""

    def __init__(self, reason: str = ""):
        super().__init__(reason)
        self.reason = reason


def normalize_eigvec(v) -> np.ndarray:
    """Scale so max|v_i| = 1 with the first nonzero coordinate positive."""
    v = np.asarray(v, dtype=float)
    peak = np.abs(v).max() if v.size else 0.0
    if peak <= 0.0:
        raise ValueError("cannot normalize a zero vector")
    out = v / peak
    lead = np.flatnonzero(np.abs(out) > ZERO_TOL)
    if lead.size and out[lead[0]] < 0:
        out = -out
    return out


def _offdiag(m: np.ndarray) -> tuple[float, float]:
    return float(m[0, 1]), float(m[1, 0])


def eigenpair_2x2(m) -> tuple[float, np.ndarray]:
    """Non-principal eigenpair of a 2x2 stochastic matrix, closed form.

    The eigenvalue is trace - 1; the eigenvector is normalize((a, -b)) for
    off-diagonals a, b.  The identity matrix has no non-principal pair.
    """
    m = np.asarray(m, dtype=float)
    if m.shape != (2, 2):
        raise ValueError(f"expected a 2x2 matrix, got shape {m.shape}")
    if np.abs(m.sum(axis=1) - 1.0).max() > REPEAT_TOL:
        raise ValueError("matrix rows must sum to 1")
    a, b = _offdiag(m)
    if a <= ZERO_TOL and b <= ZERO_TOL:
        raise ValueError("identity matrix has no non-principal eigenpair")
    lam = float(m[0, 0] + m[1, 1] - 1.0)
    return lam, normalize_eigvec(np.array([a, -b]))


def stationary_2x2(m) -> tuple[np.ndarray, bool]:
    """Stationary distribution (b, a)/(a+b) and an aperiodicity flag.

    The flag is False exactly when the chain alternates deterministically
    (non-principal eigenvalue -1), in which case the stationary vector is
    still returned but time averages, not laws, converge to it.
    """
    m = np.asarray(m, dtype=float)
    if m.shape != (2, 2):
        raise ValueError(f"expected a 2x2 matrix, got shape {m.shape}")
    a, b = _offdiag(m)
    if a <= ZERO_TOL and b <= ZERO_TOL:
        raise ValueError("identity matrix has no unique stationary distribution")
    if a <= ZERO_TOL or b <= ZERO_TOL:
        raise ValueError("matrix is reducible; stationary distribution is degenerate")
    pi = np.array([b, a]) / (a + b)
    lam = m[0, 0] + m[1, 1] - 1.0
    return pi, bool(lam > -1.0 + REPEAT_TOL)


def _permute(matrix: np.ndarray, perm: tuple[int, ...]) -> np.ndarray:
    idx = np.array(perm)
    return matrix[np.ix_(idx, idx)]


def _to_original(v_canonical, perm: tuple[int, ...], k: int) -> np.ndarray:
    out = np.zeros(k)
    out[list(perm)] = np.asarray(v_canonical, dtype=float)
    return out


def _check_eigenpairs(spec: ReplacementSpec, klass: StructureClass) -> None:
    r = spec.matrix
    for label, vec, eig in klass.vectors:
        if eig is None:
            continue
        residual = float(np.abs(r @ vec - eig * vec).max())
        if residual > EIG_TOL:
            raise RuntimeError(
                f"internal: stored pair for {label!r} has residual {residual!r}"
            )
    if klass.jordan_basis_matrix is not None:
        t, j = klass.jordan_basis_matrix, klass.jordan_form
        residual = float(np.abs(r @ t - t @ j).max())
        if residual > EIG_TOL:
            raise RuntimeError(
                f"internal: Jordan identity residual {residual!r}"
            )


def _identity_class(spec: ReplacementSpec) -> StructureClass:
    k = spec.colors
    vectors = [("mass", np.ones(k), 1.0)]
    for i in range(k - 1):
        e = np.zeros(k)
        e[i] = 1.0
        vectors.append((f"share_{i}", e, 1.0))
    return StructureClass(
        family=Family.IDENTITY,
        spec=spec,
        permutation=tuple(range(k)),
        vectors=tuple(vectors),
    )


def _classify_two(spec: ReplacementSpec) -> StructureClass:
    r = spec.matrix
    a, b = _offdiag(r)
    if a > ZERO_TOL and b > ZERO_TOL:
        lam = float(r[0, 0] + r[1, 1] - 1.0)
        if lam <= -1.0 + REPEAT_TOL:
            return StructureClass(
                family=Family.UNSUPPORTED,
                spec=spec,
                permutation=(0, 1),
                warnings=(
                    "the two colors alternate deterministically "
                    "(non-principal eigenvalue -1); scaled limit laws do not apply",
                ),
            )
        _, xi = eigenpair_2x2(r)
        pi_r, _ = stationary_2x2(r)
        klass = StructureClass(
            family=Family.TWO_IRREDUCIBLE,
            spec=spec,
            permutation=(0, 1),
            lam=lam,
            stationary_whole=pi_r,
            eigvec_lam=xi,
            vectors=(
                ("mass", np.ones(2), 1.0),
                ("fluct", xi.copy(), lam),
            ),
        )
        _check_eigenpairs(spec, klass)
        return klass
    reasons: list[str] = []
    for perm in ((0, 1), (1, 0)):
        rp = _permute(r, perm)
        if rp[1, 0] > ZERO_TOL:
            continue
        s = float(rp[0, 0])
        if not (REPEAT_TOL < s < 1.0 - REPEAT_TOL):
            reasons.append(
                "triangular shape found but the minor color's self-replacement "
                "is 0 or 1; scaled limits need it strictly inside (0, 1)"
            )
            continue
        if spec.initial[perm[0]] <= 0.0:
            raise ValueError(
                f"initial composition puts no mass on the minor color "
                f"(original color {perm[0]}); its scaled track is degenerate"
            )
        minor = _to_original([1.0, 0.0], perm, 2)
        klass = StructureClass(
            family=Family.TWO_TRIANGULAR,
            spec=spec,
            permutation=perm,
            scale=s,
            vectors=(
                ("mass", np.ones(2), 1.0),
                ("minor", minor, s),
            ),
        )
        _check_eigenpairs(spec, klass)
        return klass
    return _unsupported(spec, 2, reasons)


def _sub_block(rp: np.ndarray, dom_cols: slice) -> tuple[float, np.ndarray]:
    """Common row mass s of the leading 2x2 block and the block divided by s."""
    s0 = float(rp[0, :2].sum())
    s1 = float(rp[1, :2].sum())
    if abs(s0 - s1) > REPEAT_TOL:
        raise _NoMatch()
    s = 0.5 * (s0 + s1)
    if not (REPEAT_TOL < s < 1.0 - REPEAT_TOL):
        raise _NoMatch(
            "block-triangular shape found but the non-dominant block's row "
            "mass is 0 or 1; scaled limits need it strictly inside (0, 1)"
        )
    return s, rp[:2, :2] / s


def _require_irreducible(block: np.ndarray) -> None:
    if block[0, 1] <= ZERO_TOL or block[1, 0] <= ZERO_TOL:
        raise _NoMatch()


def _match_one_dominant(spec: ReplacementSpec, perm: tuple[int, ...]) -> StructureClass:
    rp = _permute(spec.matrix, perm)
    if rp[2, 0] > ZERO_TOL or rp[2, 1] > ZERO_TOL:
        raise _NoMatch()
    s, q = _sub_block(rp, slice(2, 3))
    _require_irreducible(q)
    lam = float(q[0, 0] + q[1, 1] - 1.0)
    if lam <= -1.0 + REPEAT_TOL:
        raise _NoMatch(
            "non-dominant block alternates deterministically "
            "(non-principal eigenvalue -1); its embedded chain has no limit law"
        )
    if spec.initial[perm[0]] + spec.initial[perm[1]] <= 0.0:
        raise ValueError(
            "initial composition puts no mass on the non-dominant colors "
            f"(original colors {perm[0]} and {perm[1]}); "
            "their scaled tracks are degenerate"
        )
    _, xi = eigenpair_2x2(q)
    pi_q, _ = stationary_2x2(q)
    klass = StructureClass(
        family=Family.THREE_ONE_DOMINANT,
        spec=spec,
        permutation=perm,
        scale=s,
        lam=lam,
        stationary_sub=pi_q,
        eigvec_lam=xi,
        vectors=(
            ("mass", np.ones(3), 1.0),
            ("sub_total", _to_original([1.0, 1.0, 0.0], perm, 3), s),
            ("sub_fluct", _to_original([xi[0], xi[1], 0.0], perm, 3), s * lam),
        ),
    )
    _check_eigenpairs(spec, klass)
    return klass


def _jordan_three(s: float, xi_pinned: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Canonical-coordinate Jordan basis for the three-color repeated case.

    Columns: the minor eigenvector, the generalized vector (0, xi_pinned),
    and the all-ones vector.  xi_pinned must already satisfy
    (1-s) * coupling_row . xi_pinned = 1 so that R t2 = t1 + s t2.
    """
    t = np.zeros((3, 3))
    t[:, 0] = (1.0, 0.0, 0.0)
    t[1:, 1] = xi_pinned
    t[:, 2] = 1.0
    j = np.array([[s, 1.0, 0.0], [0.0, s, 0.0], [0.0, 0.0, 1.0]])
    return t, j


def _match_two_dominant(spec: ReplacementSpec, perm: tuple[int, ...]) -> StructureClass:
    rp = _permute(spec.matrix, perm)
    if rp[1, 0] > ZERO_TOL or rp[2, 0] > ZERO_TOL:
        raise _NoMatch()
    s = float(rp[0, 0])
    if not (REPEAT_TOL < s < 1.0 - REPEAT_TOL):
        raise _NoMatch(
            "triangular shape found but the minor color's self-replacement "
            "is 0 or 1; scaled limits need it strictly inside (0, 1)"
        )
    p_block = rp[1:, 1:]
    _require_irreducible(p_block)
    coupling = rp[0, 1:] / (1.0 - s)
    lam = float(p_block[0, 0] + p_block[1, 1] - 1.0)
    warnings: list[str] = []
    if lam <= -1.0 + REPEAT_TOL:
        warnings.append(
            "dominant block alternates deterministically; predictions built "
            "from its stationary distribution are unverified"
        )
    if spec.initial[perm[0]] <= 0.0:
        raise ValueError(
            f"initial composition puts no mass on the minor color "
            f"(original color {perm[0]}); its scaled track is degenerate"
        )
    _, xi = eigenpair_2x2(p_block)
    pi_p, _ = stationary_2x2(p_block)
    minor = _to_original([1.0, 0.0, 0.0], perm, 3)
    common = dict(
        spec=spec,
        permutation=perm,
        scale=s,
        lam=lam,
        stationary_dom=pi_p,
        eigvec_lam=xi,
        coupling_row=coupling.copy(),
    )
    if abs(lam - s) <= REPEAT_TOL:
        pxi = float(coupling @ xi)
        if abs(pxi) <= REPEAT_TOL:
            # Repeated eigenvalue with a full eigenspace: the coupling row is
            # orthogonal to xi, which forces it to equal the stationary
            # distribution of the dominant block.
            if float(np.abs(coupling - pi_p).max()) > REPEAT_TOL:
                warnings.append(
                    "coupling row is orthogonal to the dominant eigenvector yet "
                    "differs from the stationary distribution; numerical edge"
                )
            v2 = _to_original([0.0, xi[0], xi[1]], perm, 3)
            klass = StructureClass(
                family=Family.THREE_TWO_DOMINANT_DIAG,
                warnings=tuple(warnings),
                vectors=(
                    ("mass", np.ones(3), 1.0),
                    ("minor", minor, s),
                    ("dom_fluct", v2, lam),
                ),
                **common,
            )
            _check_eigenpairs(spec, klass)
            return klass
        # Deficient eigenspace: pin the generalized vector's scale so that
        # R t2 = t1 + s t2 holds exactly.
        xi_pinned = xi / ((1.0 - s) * pxi)
        t_canon, j = _jordan_three(s, xi_pinned)
        t = np.zeros((3, 3))
        for col in range(3):
            t[:, col] = _to_original(t_canon[:, col], perm, 3)
        t2 = t[:, 1].copy()
        klass = StructureClass(
            family=Family.THREE_TWO_DOMINANT_JORDAN,
            warnings=tuple(warnings),
            jordan_basis_matrix=t,
            jordan_form=j,
            vectors=(
                ("mass", np.ones(3), 1.0),
                ("minor", minor, s),
                ("dom_fluct", t2, None),
            ),
            **common,
        )
        _check_eigenpairs(spec, klass)
        return klass
    c = (1.0 - s) * float(coupling @ xi) / (lam - s)
    v2 = _to_original([c, xi[0], xi[1]], perm, 3)
    klass = StructureClass(
        family=Family.THREE_TWO_DOMINANT_DIAG,
        warnings=tuple(warnings),
        vectors=(
            ("mass", np.ones(3), 1.0),
            ("minor", minor, s),
            ("dom_fluct", v2, lam),
        ),
        **common,
    )
    _check_eigenpairs(spec, klass)
    return klass


def _match_four_block(spec: ReplacementSpec, perm: tuple[int, ...]) -> StructureClass:
    rp = _permute(spec.matrix, perm)
    if float(np.abs(rp[2:, :2]).max()) > ZERO_TOL:
        raise _NoMatch()
    s, q = _sub_block(rp, slice(2, 4))
    _require_irreducible(q)
    lam = float(q[0, 0] + q[1, 1] - 1.0)
    if lam <= -1.0 + REPEAT_TOL:
        raise _NoMatch(
            "non-dominant block alternates deterministically "
            "(non-principal eigenvalue -1); its embedded chain has no limit law"
        )
    p_block = rp[2:, 2:]
    _require_irreducible(p_block)
    beta = float(p_block[0, 0] + p_block[1, 1] - 1.0)
    warnings: list[str] = []
    if beta <= -1.0 + REPEAT_TOL:
        warnings.append(
            "dominant block alternates deterministically; predictions built "
            "from its stationary distribution are unverified"
        )
    if spec.initial[perm[0]] + spec.initial[perm[1]] <= 0.0:
        raise ValueError(
            "initial composition puts no mass on the non-dominant colors "
            f"(original colors {perm[0]} and {perm[1]}); "
            "their scaled tracks are degenerate"
        )
    coupling_block = rp[:2, 2:]
    _, xi = eigenpair_2x2(q)
    pi_q, _ = stationary_2x2(q)
    _, nu_hat = eigenpair_2x2(p_block)
    pi_p, _ = stationary_2x2(p_block)
    v1 = _to_original([1.0, 1.0, 0.0, 0.0], perm, 4)
    v2 = _to_original([xi[0], xi[1], 0.0, 0.0], perm, 4)
    # Resolve the coupling image of the dominant eigenvector in the basis
    # {ones, xi} of the sub-block plane: E nu_hat = a * ones + b * xi.
    e_nu = coupling_block @ nu_hat
    a_coef = float(pi_q @ e_nu)
    b_coef = float((e_nu[0] - e_nu[1]) / (xi[0] - xi[1]))
    common = dict(
        spec=spec,
        permutation=perm,
        scale=s,
        lam=lam,
        beta=beta,
        stationary_sub=pi_q,
        stationary_dom=pi_p,
        eigvec_lam=xi,
        eigvec_beta=nu_hat,
    )
    base_rows = (
        ("mass", np.ones(4), 1.0),
        ("sub_total", v1, s),
        ("sub_fluct", v2, s * lam),
    )
    repeated_s = abs(beta - s) <= REPEAT_TOL
    repeated_slam = abs(beta - s * lam) <= REPEAT_TOL
    if repeated_s or repeated_slam:
        if repeated_s:
            deficient = abs(a_coef) > REPEAT_TOL
        else:
            deficient = abs(b_coef) > REPEAT_TOL
        if not deficient:
            raise _NoMatch(
                "dominant-block eigenvalue repeats one of the non-dominant "
                "eigenvalues with a full eigenspace; no covered limit law"
            )
        if repeated_s:
            # Generalized vector above the sub-total eigenvector: solve
            # s(Q - I)u = -(b/a) xi, so u is a multiple of xi.
            nu = nu_hat / a_coef
            u = (b_coef / a_coef) / (s * (1.0 - lam)) * xi
            t_cols = [v2, v1]
            alpha = s * lam
        else:
            # Generalized vector above the sub-fluct eigenvector: solve
            # s(Q - lam I)u = -(a/b) ones, so u is a multiple of ones.
            nu = nu_hat / b_coef
            u = -(a_coef / b_coef) / (s * (1.0 - lam)) * np.ones(2)
            t_cols = [v1, v2]
            alpha = s
        t3 = _to_original([u[0], u[1], nu[0], nu[1]], perm, 4)
        t = np.column_stack([t_cols[0], t_cols[1], t3, np.ones(4)])
        j = np.array(
            [
                [alpha, 0.0, 0.0, 0.0],
                [0.0, beta, 1.0, 0.0],
                [0.0, 0.0, beta, 0.0],
                [0.0, 0.0, 0.0, 1.0],
            ]
        )
        klass = StructureClass(
            family=Family.FOUR_BLOCK_JORDAN,
            warnings=tuple(warnings),
            jordan_basis_matrix=t,
            jordan_form=j,
            vectors=base_rows + (("dom_fluct", t3, None),),
            **common,
        )
        _check_eigenpairs(spec, klass)
        return klass
    u = np.linalg.solve(beta * np.eye(2) - s * q, e_nu)
    v3 = _to_original([u[0], u[1], nu_hat[0], nu_hat[1]], perm, 4)
    klass = StructureClass(
        family=Family.FOUR_BLOCK_DIAG,
        warnings=tuple(warnings),
        vectors=base_rows + (("dom_fluct", v3, beta),),
        **common,
    )
    _check_eigenpairs(spec, klass)
    return klass


def _unsupported(spec: ReplacementSpec, k: int, reasons: list[str]) -> StructureClass:
    seen: list[str] = []
    for r in reasons:
        if r and r not in seen:
            seen.append(r)
    if not seen:
        seen.append(
            "no supported block-triangular structure found under any "
            "relabeling of colors"
        )
    return StructureClass(
        family=Family.UNSUPPORTED,
        spec=spec,
        permutation=tuple(range(k)),
        warnings=tuple(seen),
    )


def classify(spec: ReplacementSpec) -> StructureClass:
    """Match the matrix to a supported family and compute its spectral data.

    The search tries color relabelings in lexicographic order and returns
    the first match, so the canonical permutation is deterministic.  Raises
    ValueError when the matrix fits a family but the initial composition
    puts zero mass on every non-dominant color (the scaled tracks of such
    models are degenerate), and for color counts outside 2..4.
    """
    k = spec.colors
    if k not in (2, 3, 4):
        raise ValueError(f"classification supports 2 to 4 colors, got {k}")
    if float(np.abs(spec.matrix - np.eye(k)).max()) <= ZERO_TOL:
        return _identity_class(spec)
    if k == 2:
        return _classify_two(spec)
    reasons: list[str] = []
    if k == 3:
        matchers = (_match_one_dominant, _match_two_dominant)
    else:
        matchers = (_match_four_block,)
    for matcher in matchers:
        for perm in itertools.permutations(range(k)):
            try:
                return matcher(spec, perm)
            except _NoMatch as miss:
                if miss.reason:
                    reasons.append(miss.reason)
    return _unsupported(spec, k, reasons)


def jordan_basis(spec: ReplacementSpec, klass: StructureClass) -> tuple[np.ndarray, np.ndarray]:
    """Return (T, J) with R T = T J verified to EIG_TOL.

    Only valid for the two Jordan families; the basis columns are the ones
    the classifier pinned (scales matter: downstream variance formulas are
    stated for exactly these columns).
    """
    if klass.family not in (
        Family.THREE_TWO_DOMINANT_JORDAN,
        Family.FOUR_BLOCK_JORDAN,
    ):
        raise ValueError(f"{klass.family.value} is not a Jordan family")
    t = klass.jordan_basis_matrix
    j = klass.jordan_form
    if t is None or j is None:
        raise ValueError("classification is missing its Jordan data")
    residual = float(np.abs(spec.matrix @ t - t @ j).max())
    if residual > EIG_TOL:
        raise ValueError(
            f"generalized-eigenvector identity fails (residual {residual!r}); "
            "the classification does not describe this matrix"
        )
    return t.copy(), j.copy()
