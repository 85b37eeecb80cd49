"""Urn dynamics with row-stochastic replacement.

A model is a validated pair (replacement matrix, initial composition).  The
initial composition has total mass 1 and every trial adds one unit of mass:
at trial n the urn holds total mass n, one color is drawn with probability
proportional to its current count, and the drawn color's replacement row is
added to the composition.  Counts are non-negative reals in double precision.

Trajectories are deterministic functions of (seed, stream).  Each stream is
an independent substream of a counter-based generator, so ensembles can be
simulated in any batch arrangement and still reproduce bit-identical values.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

__all__ = [
    "ReplacementSpec",
    "UrnState",
    "Trajectory",
    "EnsemblePaths",
    "new_spec",
    "initial_state",
    "color_from_uniform",
    "draw",
    "step",
    "default_checkpoints",
    "trajectory_rng",
    "simulate",
    "simulate_many",
]

# Row sums of a validated matrix (and the initial composition) vs 1.
ROW_SUM_TOL = 1e-12
# Raw input rows must agree with each other on a common sum this tightly.
ROW_AGREEMENT_TOL = 1e-9
# |total mass - (n + 1)| <= MASS_DRIFT_PER_TRIAL * max(n, 1) at checkpoints.
MASS_DRIFT_PER_TRIAL = 1e-9
# Uniform variates pre-generated per trajectory chunk in the batched runner.
DEFAULT_BATCH_STEPS = 2048


def _readonly(a: np.ndarray) -> np.ndarray:
    out = np.array(a, dtype=float)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class ReplacementSpec:
    """Validated urn model.

    colors: number of colors K.
    matrix: (K, K) replacement matrix, every row sums to 1.
    initial: (K,) starting composition, sums to 1.
    """

    colors: int
    matrix: np.ndarray
    initial: np.ndarray


@dataclass(frozen=True)
class UrnState:
    """Composition after a given number of completed trials."""

    counts: np.ndarray
    trials: int


@dataclass(frozen=True)
class Trajectory:
    """One simulated path, recorded on a checkpoint grid.

    states[i] is the composition after checkpoints[i] trials and
    tracks[p, i] == states[i] . track_vectors[p].
    """

    seed: int
    stream: int
    checkpoints: np.ndarray
    states: np.ndarray
    track_vectors: np.ndarray
    tracks: np.ndarray


@dataclass(frozen=True)
class EnsemblePaths:
    """Checkpointed states and linear tracks for a batch of trajectories.

    states has shape (M, C, K); tracks has shape (M, C, P) where P is the
    number of registered track vectors.  Trajectory m uses stream streams[m].
    """

    seed: int
    streams: np.ndarray
    checkpoints: np.ndarray
    states: np.ndarray
    track_vectors: np.ndarray
    tracks: np.ndarray


def new_spec(matrix, initial) -> ReplacementSpec:
    """Validate a replacement matrix and initial composition.

    All rows must share a common sum.  A common sum c != 1 is divided out,
    since only the row direction matters to the dynamics once mass growth
    is uniform.  The initial composition must be a probability vector.
    """
    r = np.array(matrix, dtype=float)
    c0 = np.array(initial, dtype=float)
    if r.ndim != 2 or r.shape[0] != r.shape[1]:
        raise ValueError(f"replacement matrix must be square, got shape {r.shape}")
    k = int(r.shape[0])
    if k < 2:
        raise ValueError("need at least two colors")
    if c0.shape != (k,):
        raise ValueError(
            f"initial composition has shape {c0.shape}, expected ({k},)"
        )
    if not np.all(np.isfinite(r)):
        raise ValueError("replacement matrix has non-finite entries")
    if not np.all(np.isfinite(c0)):
        raise ValueError("initial composition has non-finite entries")
    neg = np.argwhere(r < 0)
    if neg.size:
        i, j = neg[0]
        raise ValueError(
            f"replacement_matrix[{i}][{j}]: negative entry {float(r[i, j])!r}"
        )
    neg0 = np.flatnonzero(c0 < 0)
    if neg0.size:
        i = neg0[0]
        raise ValueError(
            f"initial_composition[{i}]: negative entry {float(c0[i])!r}"
        )
    sums = r.sum(axis=1)
    common = float(sums.mean())
    spread = float(np.abs(sums - common).max())
    if spread > ROW_AGREEMENT_TOL:
        raise ValueError(
            f"replacement rows must share a common sum; sums range over "
            f"[{sums.min()!r}, {sums.max()!r}]"
        )
    if common <= ROW_AGREEMENT_TOL:
        raise ValueError("replacement rows sum to zero")
    if abs(common - 1.0) > ROW_SUM_TOL:
        r = r / common
    total0 = float(c0.sum())
    if abs(total0 - 1.0) > ROW_SUM_TOL:
        raise ValueError(
            f"initial composition must sum to 1, got {total0!r}"
        )
    return ReplacementSpec(colors=k, matrix=_readonly(r), initial=_readonly(c0))


def initial_state(spec: ReplacementSpec) -> UrnState:
    return UrnState(counts=spec.initial.copy(), trials=0)


def color_from_uniform(counts: np.ndarray, u: float) -> int:
    """Map one uniform variate to a color by cumulative-sum inversion.

    Color i is selected iff cum[i-1] <= u * total < cum[i], scanning colors
    in index order.  Zero-count colors have zero-width intervals and are
    never selected.
    """
    cum = np.cumsum(counts)
    scaled = u * cum[-1]
    return int(np.count_nonzero(cum[:-1] <= scaled))


def draw(state: UrnState, rng: np.random.Generator) -> int:
    """Draw one color; consumes exactly one uniform variate from rng."""
    if float(state.counts.sum()) <= 0.0:
        raise RuntimeError("cannot draw from an empty urn")
    return color_from_uniform(state.counts, rng.random())


def step(spec: ReplacementSpec, state: UrnState, color: int) -> UrnState:
    """Add the drawn color's replacement row to the composition."""
    if not 0 <= color < spec.colors:
        raise ValueError(f"color {color} out of range for {spec.colors} colors")
    return UrnState(counts=state.counts + spec.matrix[color], trials=state.trials + 1)


def default_checkpoints(horizon: int) -> np.ndarray:
    """0, the powers of two below the horizon, and the horizon itself."""
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    cps = [0]
    p = 1
    while p < horizon:
        cps.append(p)
        p *= 2
    cps.append(horizon)
    return np.array(cps, dtype=np.int64)


def trajectory_rng(seed: int, stream: int) -> np.random.Generator:
    """Independent reproducible stream keyed by (seed, stream).

    Uses a counter-based bit generator under a seed sequence spawn key, so
    streams never overlap and the mapping is stable across platforms.
    """
    if seed < 0 or stream < 0:
        raise ValueError("seed and stream must be non-negative")
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(stream),))
    return np.random.Generator(np.random.Philox(ss))


def _validated_checkpoints(checkpoints, horizon: int) -> np.ndarray:
    if checkpoints is None:
        return default_checkpoints(horizon)
    cps = np.asarray(checkpoints, dtype=np.int64)
    if cps.ndim != 1 or cps.size == 0:
        raise ValueError("checkpoints must be a non-empty 1-d integer sequence")
    if np.any(np.diff(cps) <= 0):
        raise ValueError("checkpoints must be strictly increasing")
    if cps[0] < 0 or cps[-1] > horizon:
        raise ValueError("checkpoints must lie within [0, horizon]")
    return cps


def simulate_many(
    spec: ReplacementSpec,
    horizon: int,
    seed: int,
    streams: int | Sequence[int],
    *,
    checkpoints=None,
    track_vectors=None,
    batch_steps: int = DEFAULT_BATCH_STEPS,
) -> EnsemblePaths:
    """Simulate a batch of independent trajectories on a checkpoint grid.

    streams may be a count M (streams 0..M-1) or an explicit sequence of
    stream indices.  The result is a pure function of (spec, horizon, seed,
    streams, checkpoints, track_vectors); batch_steps only controls memory.
    """
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    if isinstance(streams, (int, np.integer)):
        stream_ids = np.arange(int(streams), dtype=np.int64)
    else:
        stream_ids = np.asarray(list(streams), dtype=np.int64)
    if stream_ids.size == 0:
        raise ValueError("need at least one stream")
    m = stream_ids.size
    cps = _validated_checkpoints(checkpoints, horizon)
    if track_vectors is None:
        vt = np.zeros((0, spec.colors))
    else:
        vt = np.atleast_2d(np.asarray(track_vectors, dtype=float))
        if vt.shape[1] != spec.colors:
            raise ValueError(
                f"track vectors have length {vt.shape[1]}, expected {spec.colors}"
            )
    n_cp = cps.size
    counts = np.repeat(spec.initial[None, :], m, axis=0)
    states = np.empty((m, n_cp, spec.colors))
    tracks = np.empty((m, n_cp, vt.shape[0]))
    cp_index = {int(n): i for i, n in enumerate(cps)}

    def record(n: int) -> None:
        i = cp_index[n]
        total = counts.sum(axis=1)
        drift = np.abs(total - (n + 1.0)).max()
        if drift > MASS_DRIFT_PER_TRIAL * max(n, 1):
            raise RuntimeError(
                f"mass law violated at n={n}: max drift {drift!r}"
            )
        states[:, i, :] = counts
        if vt.shape[0]:
            tracks[:, i, :] = counts @ vt.T

    gens = [trajectory_rng(seed, int(s)) for s in stream_ids]
    if 0 in cp_index:
        record(0)
    rows = spec.matrix
    n = 0
    while n < horizon:
        block = min(batch_steps, horizon - n)
        u = np.empty((m, block))
        for i, g in enumerate(gens):
            u[i] = g.random(block)
        for t in range(block):
            cum = np.cumsum(counts, axis=1)
            scaled = u[:, t] * cum[:, -1]
            colors = np.count_nonzero(cum[:, :-1] <= scaled[:, None], axis=1)
            counts += rows[colors]
            n += 1
            if n in cp_index:
                record(n)
    return EnsemblePaths(
        seed=int(seed),
        streams=stream_ids,
        checkpoints=cps,
        states=states,
        track_vectors=vt,
        tracks=tracks,
    )


def simulate(
    spec: ReplacementSpec,
    horizon: int,
    seed: int,
    stream: int = 0,
    *,
    checkpoints=None,
    track_vectors=None,
) -> Trajectory:
    """Simulate one trajectory; deterministic given (seed, stream)."""
    paths = simulate_many(
        spec,
        horizon,
        seed,
        [stream],
        checkpoints=checkpoints,
        track_vectors=track_vectors,
    )
    return Trajectory(
        seed=int(seed),
        stream=int(stream),
        checkpoints=paths.checkpoints,
        states=paths.states[0],
        track_vectors=paths.track_vectors,
        tracks=paths.tracks[0].T.copy(),
    )
