"""Scaling laws: normalizing sequences and limit predictions per track.

Every classified matrix gets exactly K predictions, one per combination
vector, each naming a normalization and a limit kind with its parameters.
The split points sit at eigenvalue 1/2: below it a combination is
asymptotically normal (possibly with a random mixture variance), at it the
same normal laws pick up a log factor, above it the scaled combination
itself converges almost surely.

The product pi_n(a) = prod_{j<n} (1 + a/(j+1)) is the exact mean growth
factor of any eigen-combination with eigenvalue a and doubles as the
martingale normalization; pi_n(a) * Gamma(a+1) / n^a -> 1.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .spectral import Family, StructureClass, ZERO_TOL, REPEAT_TOL

__all__ = [
    "pi_n",
    "euler_ratio",
    "Normalization",
    "LimitKind",
    "LawPrediction",
    "predict",
]

# Below this length the product is accumulated term by term, which keeps the
# one-step recurrence pi_{n+1} = pi_n * (1 + a/(n+1)) bit-exact; longer
# products go through a log1p sum to avoid drift.
_PRODUCT_LIMIT = 1000


def pi_n(a: float, n: int) -> float:
    """prod_{j=0}^{n-1} (1 + a/(j+1)) for a > -1, n >= 0."""
    a = float(a)
    n = int(n)
    if n < 0:
        raise ValueError(f"n must be non-negative, got {n}")
    if a <= -1.0:
        raise ValueError(f"requires eigenvalue > -1, got {a!r}")
    if a == 0.0:
        return 1.0
    if n <= _PRODUCT_LIMIT:
        out = 1.0
        for j in range(n):
            out *= 1.0 + a / (j + 1.0)
        return out
    j = np.arange(n, dtype=float)
    return float(np.exp(np.log1p(a / (j + 1.0)).sum()))


def euler_ratio(a: float, n: int) -> float:
    """pi_n(a) * Gamma(a+1) / n^a; tends to 1 as n grows."""
    n = int(n)
    if n < 1:
        raise ValueError(f"n must be positive, got {n}")
    return pi_n(a, n) * math.gamma(float(a) + 1.0) / float(n) ** float(a)


class LimitKind(Enum):
    """What the normalized track does in the long run."""

    DETERMINISTIC_CONSTANT = "deterministic-constant"
    AS_CONSTANT_VECTOR = "as-constant-vector"
    AS_RANDOM_VARIABLE = "as-random-variable"
    NORMAL = "normal"
    NORMAL_MIXTURE = "normal-mixture"
    EXACTLY_CONSTANT_TRACK = "exactly-constant-track"


@dataclass(frozen=True)
class Normalization:
    """A normalizing sequence; at(n) evaluates it, str() names it.

    Kinds: "mass" (n+1), "power" (n^a), "sqrt_n_log_n", "power_sqrt_log"
    (sqrt(n^a log n)), "power_log" (n^a log n), "exact_product" (pi_n(a)).
    at() returns NaN where the sequence is zero or undefined (n = 0 for
    powers, n < 2 whenever a log factor is involved).
    """

    kind: str
    exponent: float | None = None

    @classmethod
    def mass(cls) -> "Normalization":
        return cls("mass")

    @classmethod
    def power(cls, a: float) -> "Normalization":
        return cls("power", float(a))

    @classmethod
    def sqrt_n_log_n(cls) -> "Normalization":
        return cls("sqrt_n_log_n")

    @classmethod
    def power_sqrt_log(cls, a: float) -> "Normalization":
        return cls("power_sqrt_log", float(a))

    @classmethod
    def power_log(cls, a: float) -> "Normalization":
        return cls("power_log", float(a))

    @classmethod
    def exact_product(cls, a: float) -> "Normalization":
        return cls("exact_product", float(a))

    def at(self, n):
        """Evaluate at integer times n (scalar or array) as float."""
        x = np.asarray(n, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            if self.kind == "mass":
                out = x + 1.0
            elif self.kind == "power":
                out = np.where(x >= 1.0, x, np.nan) ** self.exponent
            elif self.kind == "sqrt_n_log_n":
                safe = np.where(x >= 2.0, x, np.nan)
                out = np.sqrt(safe * np.log(safe))
            elif self.kind == "power_sqrt_log":
                safe = np.where(x >= 2.0, x, np.nan)
                out = np.sqrt(safe**self.exponent * np.log(safe))
            elif self.kind == "power_log":
                safe = np.where(x >= 2.0, x, np.nan)
                out = safe**self.exponent * np.log(safe)
            elif self.kind == "exact_product":
                flat = np.array(
                    [
                        pi_n(self.exponent, int(v)) if v >= 0 else np.nan
                        for v in np.atleast_1d(x)
                    ]
                )
                out = flat.reshape(np.shape(x))
            else:
                raise ValueError(f"unknown normalization kind {self.kind!r}")
        if np.isscalar(n) or np.ndim(n) == 0:
            return float(out)
        return out

    def __str__(self) -> str:
        a = self.exponent
        return {
            "mass": "n+1",
            "power": f"n^{a:g}" if a is not None else "n^?",
            "sqrt_n_log_n": "sqrt(n log n)",
            "power_sqrt_log": f"sqrt(n^{a:g} log n)" if a is not None else "?",
            "power_log": f"n^{a:g} log n" if a is not None else "?",
            "exact_product": f"Pi_n({a:g})" if a is not None else "?",
        }[self.kind]


@dataclass(frozen=True, eq=False)
class LawPrediction:
    """One combination vector with its normalization and limit claim.

    variance: limit variance for NORMAL tracks.
    mixture_coefficient / mixing_label: for NORMAL_MIXTURE tracks the limit
        is N(0, coefficient * U) where U is the almost-sure limit of the
        track named by mixing_label.
    martingale_eigenvalue: when set, E[track at n] = pi_n(a) * initial_value
        exactly, for every n.
    co_limit_label: for generalized-eigenvector tracks above the threshold,
        the track whose almost-sure limit this one shares.
    limit_mean / limit_variance: moments of the limit distribution when
        known in closed form (identity-family shares).
    """

    label: str
    vector: np.ndarray
    normalization: Normalization
    limit_kind: LimitKind
    variance: float | None = None
    mixture_coefficient: float | None = None
    mixing_label: str | None = None
    initial_value: float = 0.0
    positive_limit: bool = False
    martingale_eigenvalue: float | None = None
    co_limit_label: str | None = None
    limit_mean: float | None = None
    limit_variance: float | None = None
    notes: str = ""


def _mass_row(spec) -> LawPrediction:
    k = spec.colors
    return LawPrediction(
        label="mass",
        vector=np.ones(k),
        normalization=Normalization.mass(),
        limit_kind=LimitKind.DETERMINISTIC_CONSTANT,
        initial_value=float(spec.initial.sum()),
        positive_limit=True,
        martingale_eigenvalue=1.0,
        limit_mean=1.0,
        notes="total mass equals n+1 exactly on every path",
    )


def _constant_row(label: str, vector: np.ndarray, initial: float) -> LawPrediction:
    return LawPrediction(
        label=label,
        vector=vector,
        normalization=Normalization.exact_product(0.0),
        limit_kind=LimitKind.EXACTLY_CONSTANT_TRACK,
        initial_value=initial,
        martingale_eigenvalue=0.0,
        limit_mean=initial,
        notes="every replacement row is orthogonal to this combination; "
        "the track never moves",
    )


def _pi_weighted_square(pi: np.ndarray, xi: np.ndarray) -> float:
    return float(pi @ (np.asarray(xi) ** 2))


def _direct_fluct_row(
    label: str,
    vector: np.ndarray,
    lam: float,
    pi2: float,
    initial: float,
    periodic_note: str = "",
) -> LawPrediction:
    """Fluctuation track of an irreducible block at overall scale sqrt(n).

    lam below 1/2 is asymptotically normal, at 1/2 normal with a log
    correction, above 1/2 the power-normalized track converges on its own.
    """
    if abs(lam) <= ZERO_TOL:
        return _constant_row(label, vector, initial)
    if lam < 0.5 - REPEAT_TOL:
        return LawPrediction(
            label=label,
            vector=vector,
            normalization=Normalization.power(0.5),
            limit_kind=LimitKind.NORMAL,
            variance=lam * lam / (1.0 - 2.0 * lam) * pi2,
            initial_value=initial,
            martingale_eigenvalue=lam,
            notes=periodic_note,
        )
    if abs(lam - 0.5) <= REPEAT_TOL:
        return LawPrediction(
            label=label,
            vector=vector,
            normalization=Normalization.sqrt_n_log_n(),
            limit_kind=LimitKind.NORMAL,
            variance=lam * lam * pi2,
            initial_value=initial,
            martingale_eigenvalue=lam,
            notes=periodic_note,
        )
    return LawPrediction(
        label=label,
        vector=vector,
        normalization=Normalization.power(lam),
        limit_kind=LimitKind.AS_RANDOM_VARIABLE,
        initial_value=initial,
        martingale_eigenvalue=lam,
        notes="power-normalized martingale track; the limit is non-degenerate "
        "but its sign is not pinned",
    )


def _mixture_fluct_row(
    label: str,
    vector: np.ndarray,
    s: float,
    lam: float,
    pi2: float,
    initial: float,
    mixing_label: str,
) -> LawPrediction:
    """Sub-block fluctuation track; variance mixes over the sub-mass limit."""
    if abs(lam) <= ZERO_TOL:
        return _constant_row(label, vector, initial)
    if lam < 0.5 - REPEAT_TOL:
        return LawPrediction(
            label=label,
            vector=vector,
            normalization=Normalization.power(s / 2.0),
            limit_kind=LimitKind.NORMAL_MIXTURE,
            mixture_coefficient=s * lam * lam / (1.0 - 2.0 * lam) * pi2,
            mixing_label=mixing_label,
            initial_value=initial,
            martingale_eigenvalue=s * lam,
            notes="normal with variance proportional to the sub-block mass limit",
        )
    if abs(lam - 0.5) <= REPEAT_TOL:
        return LawPrediction(
            label=label,
            vector=vector,
            normalization=Normalization.power_sqrt_log(s),
            limit_kind=LimitKind.NORMAL_MIXTURE,
            mixture_coefficient=s * s * lam * lam * pi2,
            mixing_label=mixing_label,
            initial_value=initial,
            martingale_eigenvalue=s * lam,
            notes="normal with variance proportional to the sub-block mass limit",
        )
    return LawPrediction(
        label=label,
        vector=vector,
        normalization=Normalization.power(s * lam),
        limit_kind=LimitKind.AS_RANDOM_VARIABLE,
        initial_value=initial,
        martingale_eigenvalue=s * lam,
        notes="power-normalized martingale track; the limit is non-degenerate "
        "but its sign is not pinned",
    )


def _positive_as_row(
    label: str, vector: np.ndarray, s: float, initial: float, what: str
) -> LawPrediction:
    return LawPrediction(
        label=label,
        vector=vector,
        normalization=Normalization.power(s),
        limit_kind=LimitKind.AS_RANDOM_VARIABLE,
        initial_value=initial,
        positive_limit=True,
        martingale_eigenvalue=s,
        notes=f"{what} divided by n^{s:g} settles to a strictly positive "
        "random level",
    )


def _identity_rows(klass: StructureClass) -> list[LawPrediction]:
    spec = klass.spec
    rows = [_mass_row(spec)]
    for label, vector, _ in klass.vectors[1:]:
        share = float(spec.initial @ vector)
        if share <= 0.0:
            rows.append(
                LawPrediction(
                    label=label,
                    vector=vector,
                    normalization=Normalization.mass(),
                    limit_kind=LimitKind.EXACTLY_CONSTANT_TRACK,
                    initial_value=0.0,
                    martingale_eigenvalue=1.0,
                    limit_mean=0.0,
                    notes="no starting mass and no inflow from other colors; "
                    "the count stays at zero",
                )
            )
            continue
        rows.append(
            LawPrediction(
                label=label,
                vector=vector,
                normalization=Normalization.mass(),
                limit_kind=LimitKind.AS_RANDOM_VARIABLE,
                initial_value=share,
                positive_limit=True,
                martingale_eigenvalue=1.0,
                limit_mean=share,
                limit_variance=share * (1.0 - share) / 2.0,
                notes="share settles to a random level whose mean is the "
                "starting share",
            )
        )
    return rows


def predict(klass: StructureClass) -> list[LawPrediction]:
    """Exactly K predictions, one per combination vector, spanning R^K."""
    if klass.family is Family.UNSUPPORTED:
        raise ValueError("no predictions for an unsupported class")
    spec = klass.spec
    initial = {label: float(spec.initial @ vec) for label, vec, _ in klass.vectors}
    vec = {label: v for label, v, _ in klass.vectors}
    fam = klass.family

    if fam is Family.IDENTITY:
        rows = _identity_rows(klass)
    elif fam is Family.TWO_IRREDUCIBLE:
        pi2 = _pi_weighted_square(klass.stationary_whole, klass.eigvec_lam)
        rows = [
            _mass_row(spec),
            _direct_fluct_row(
                "fluct", vec["fluct"], klass.lam, pi2, initial["fluct"]
            ),
        ]
    elif fam is Family.TWO_TRIANGULAR:
        rows = [
            _mass_row(spec),
            _positive_as_row(
                "minor", vec["minor"], klass.scale, initial["minor"],
                "the minor color's count",
            ),
        ]
    elif fam is Family.THREE_ONE_DOMINANT:
        pi2 = _pi_weighted_square(klass.stationary_sub, klass.eigvec_lam)
        rows = [
            _mass_row(spec),
            _positive_as_row(
                "sub_total", vec["sub_total"], klass.scale,
                initial["sub_total"], "the non-dominant block's mass",
            ),
            _mixture_fluct_row(
                "sub_fluct", vec["sub_fluct"], klass.scale, klass.lam, pi2,
                initial["sub_fluct"], "sub_total",
            ),
        ]
    elif fam is Family.THREE_TWO_DOMINANT_DIAG:
        periodic = any("alternates" in w for w in klass.warnings)
        note = (
            "dominant block is periodic; this normal claim is unverified"
            if periodic
            else ""
        )
        pi2 = _pi_weighted_square(klass.stationary_dom, klass.eigvec_lam)
        rows = [
            _mass_row(spec),
            _positive_as_row(
                "minor", vec["minor"], klass.scale, initial["minor"],
                "the minor color's count",
            ),
            _direct_fluct_row(
                "dom_fluct", vec["dom_fluct"], klass.lam, pi2,
                initial["dom_fluct"], note,
            ),
        ]
    elif fam is Family.THREE_TWO_DOMINANT_JORDAN:
        s = klass.scale
        t2 = vec["dom_fluct"]
        xi_pinned = t2[list(klass.permutation)][1:]
        pi2 = _pi_weighted_square(klass.stationary_dom, xi_pinned)
        rows = [
            _mass_row(spec),
            _positive_as_row(
                "minor", vec["minor"], s, initial["minor"],
                "the minor color's count",
            ),
        ]
        if s < 0.5 - REPEAT_TOL:
            rows.append(
                LawPrediction(
                    label="dom_fluct",
                    vector=t2,
                    normalization=Normalization.power(0.5),
                    limit_kind=LimitKind.NORMAL,
                    variance=s * s / (1.0 - 2.0 * s) * pi2,
                    initial_value=initial["dom_fluct"],
                    notes="generalized-eigenvector track at the repeated "
                    "eigenvalue, still normal below the 1/2 threshold",
                )
            )
        else:
            rows.append(
                LawPrediction(
                    label="dom_fluct",
                    vector=t2,
                    normalization=Normalization.power_log(s),
                    limit_kind=LimitKind.AS_RANDOM_VARIABLE,
                    initial_value=initial["dom_fluct"],
                    positive_limit=True,
                    co_limit_label="minor",
                    notes="log-slowed track sharing the minor track's limit; "
                    "the gap between the two closes like 1/log n",
                )
            )
    elif fam is Family.FOUR_BLOCK_DIAG:
        periodic = any("alternates" in w for w in klass.warnings)
        note = (
            "dominant block is periodic; this normal claim is unverified"
            if periodic
            else ""
        )
        pi2_sub = _pi_weighted_square(klass.stationary_sub, klass.eigvec_lam)
        pi2_dom = _pi_weighted_square(klass.stationary_dom, klass.eigvec_beta)
        rows = [
            _mass_row(spec),
            _positive_as_row(
                "sub_total", vec["sub_total"], klass.scale,
                initial["sub_total"], "the non-dominant block's mass",
            ),
            _mixture_fluct_row(
                "sub_fluct", vec["sub_fluct"], klass.scale, klass.lam,
                pi2_sub, initial["sub_fluct"], "sub_total",
            ),
            _direct_fluct_row(
                "dom_fluct", vec["dom_fluct"], klass.beta, pi2_dom,
                initial["dom_fluct"], note,
            ),
        ]
    elif fam is Family.FOUR_BLOCK_JORDAN:
        s, lam, beta = klass.scale, klass.lam, klass.beta
        pi2_sub = _pi_weighted_square(klass.stationary_sub, klass.eigvec_lam)
        t3 = vec["dom_fluct"]
        nu_pinned = t3[list(klass.permutation)][2:]
        pi2_dom = _pi_weighted_square(klass.stationary_dom, nu_pinned)
        rows = [
            _mass_row(spec),
            _positive_as_row(
                "sub_total", vec["sub_total"], s, initial["sub_total"],
                "the non-dominant block's mass",
            ),
            _mixture_fluct_row(
                "sub_fluct", vec["sub_fluct"], s, lam, pi2_sub,
                initial["sub_fluct"], "sub_total",
            ),
        ]
        if abs(beta) <= ZERO_TOL:
            xi = klass.eigvec_lam
            rows.append(
                LawPrediction(
                    label="dom_fluct",
                    vector=t3,
                    normalization=Normalization.power(s / 2.0),
                    limit_kind=LimitKind.NORMAL_MIXTURE,
                    mixture_coefficient=_pi_weighted_square(
                        klass.stationary_sub, xi
                    )
                    / s,
                    mixing_label="sub_total",
                    initial_value=initial["dom_fluct"],
                    notes="replacement maps this track's vector onto the "
                    "sub-block fluctuation vector; normal with variance "
                    "proportional to the sub-block mass limit",
                )
            )
        elif beta < 0.5 - REPEAT_TOL:
            rows.append(
                LawPrediction(
                    label="dom_fluct",
                    vector=t3,
                    normalization=Normalization.power(0.5),
                    limit_kind=LimitKind.NORMAL,
                    variance=beta * beta / (1.0 - 2.0 * beta) * pi2_dom,
                    initial_value=initial["dom_fluct"],
                    notes="generalized-eigenvector track at the repeated "
                    "eigenvalue, still normal below the 1/2 threshold",
                )
            )
        else:
            co = "sub_total" if abs(beta - s) <= REPEAT_TOL else "sub_fluct"
            rows.append(
                LawPrediction(
                    label="dom_fluct",
                    vector=t3,
                    normalization=Normalization.power_log(beta),
                    limit_kind=LimitKind.AS_RANDOM_VARIABLE,
                    initial_value=initial["dom_fluct"],
                    positive_limit=(co == "sub_total"),
                    co_limit_label=co,
                    notes=f"log-slowed track sharing the {co} track's limit",
                )
            )
    else:  # pragma: no cover
        raise ValueError(f"unhandled family {fam!r}")

    matrix = np.column_stack([row.vector for row in rows])
    if abs(np.linalg.det(matrix)) <= 1e-10:
        raise RuntimeError("internal: prediction vectors do not span R^K")
    return rows
