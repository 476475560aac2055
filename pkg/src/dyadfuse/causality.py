"""Segmental projection-weighted CCA and causality gating.

For each aligned speaker/listener segment pair, a scalar coupling weight in
[0, 1] is computed: the canonical correlations of the two segments, averaged
with weights proportional to how much each canonical direction of the speaker
segment accounts for its raw feature columns. Speaker frames in segment ``i``
are then scaled by that weight, emphasizing segments the listener demonstrably
responded to.

Segments typically have far fewer frames than speaker feature columns
(e.g. 100 x 412), where plain CCA is degenerate: any listener direction can be
matched perfectly. Both matrices are therefore column-centered and projected
onto the smallest set of principal directions explaining ``variance_keep`` of
their squared singular value mass (capped at T-1) before correlating, and a
small ridge keeps the whitening stable.
"""

from dataclasses import dataclass

import numpy as np

from .data import SegmentPlan
from .errors import DegenerateSegmentError, InputShapeError, IoError, NumericalError

RIDGE = 1e-10

MIN_SEGMENT_FRAMES = 3


@dataclass(frozen=True)
class CcaResult:
    """Canonical correlations and the canonical variates of the first matrix.

    Attributes
    ----------
    correlations : (k,) array, descending, clipped to [0, 1].
    x_variates : (T, k) array; column i is the i-th canonical variate of X.
    kept_rank_x, kept_rank_y : principal directions retained per side;
        k == min(kept_rank_x, kept_rank_y).
    """

    correlations: np.ndarray
    x_variates: np.ndarray
    kept_rank_x: int
    kept_rank_y: int


@dataclass(frozen=True)
class SegmentWeights:
    """Per-segment coupling weights w_i in [0, 1], aligned with a SegmentPlan."""

    weights: np.ndarray
    plan: SegmentPlan

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        if w.ndim != 1 or w.shape[0] != self.plan.n:
            raise InputShapeError(
                f"expected {self.plan.n} weights, got shape {w.shape}"
            )
        object.__setattr__(self, "weights", w)


def _check_segment_input(x: np.ndarray, name: str) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2:
        raise InputShapeError(f"{name}: expected 2-D matrix, got ndim={x.ndim}")
    if not np.isfinite(x).all():
        raise NumericalError(f"{name}: input contains NaN or Inf")
    return x


def _reduce(centered: np.ndarray, variance_keep: float):
    """Thin SVD of a centered matrix, truncated to the leading principal
    directions covering ``variance_keep`` of squared singular value mass.

    Returns (U_k, s_k); the reduced, whitening-ready coordinates are
    U_k * s_k. Numerically zero directions are always dropped, and at most
    T - 1 directions are kept (one is lost to centering).
    """
    t = centered.shape[0]
    u, s, _ = np.linalg.svd(centered, full_matrices=False)
    if s.size == 0 or s[0] <= 0.0:
        return u[:, :0], s[:0]
    tol = max(centered.shape) * np.finfo(np.float64).eps * s[0]
    nonzero = int(np.sum(s > tol))
    energy = np.cumsum(s**2) / np.sum(s**2)
    k = int(np.searchsorted(energy, variance_keep - 1e-12) + 1)
    k = min(k, nonzero, t - 1)
    return u[:, :k], s[:k]


def cca(x: np.ndarray, y: np.ndarray, variance_keep: float = 0.99) -> CcaResult:
    """Canonical correlations of two column-centered, rank-reduced matrices.

    Parameters
    ----------
    x, y : (T, D_x), (T, D_y) matrices with the same number of rows T >= 3.
    variance_keep : fraction of squared singular value mass retained per side
        before correlating.

    Returns
    -------
    CcaResult with correlations sorted descending and clipped to [0, 1].

    Raises
    ------
    DegenerateSegmentError : T < 3.
    InputShapeError : row counts differ.
    NumericalError : non-finite input.
    """
    x = _check_segment_input(x, "X")
    y = _check_segment_input(y, "Y")
    if x.shape[0] != y.shape[0]:
        raise InputShapeError(f"row counts differ: {x.shape[0]} vs {y.shape[0]}")
    if x.shape[0] < MIN_SEGMENT_FRAMES:
        raise DegenerateSegmentError(
            f"need at least {MIN_SEGMENT_FRAMES} rows for CCA, got {x.shape[0]}"
        )
    if not 0.0 < variance_keep <= 1.0:
        raise InputShapeError(f"variance_keep must be in (0, 1], got {variance_keep}")

    xc = x - x.mean(axis=0)
    yc = y - y.mean(axis=0)
    ux, sx = _reduce(xc, variance_keep)
    uy, sy = _reduce(yc, variance_keep)
    kx, ky = sx.size, sy.size
    if kx == 0 or ky == 0:
        return CcaResult(
            correlations=np.zeros(0),
            x_variates=np.zeros((x.shape[0], 0)),
            kept_rank_x=kx,
            kept_rank_y=ky,
        )

    # In the reduced coordinates P = U * s the covariance is diagonal, so the
    # whitened cross-correlation matrix collapses to a scaled U_x^T U_y.
    dx = sx / np.sqrt(sx**2 + RIDGE)
    dy = sy / np.sqrt(sy**2 + RIDGE)
    m = dx[:, None] * (ux.T @ uy) * dy[None, :]
    u_m, rho, _ = np.linalg.svd(m, full_matrices=False)
    rho = np.clip(rho, 0.0, 1.0)
    variates = ux @ (dx[:, None] * u_m)
    return CcaResult(
        correlations=rho,
        x_variates=variates,
        kept_rank_x=kx,
        kept_rank_y=ky,
    )


def pwcca(x: np.ndarray, y: np.ndarray, variance_keep: float = 0.99) -> float:
    """Projection-weighted similarity between X and Y in [0, 1].

    Canonical correlations are averaged with weights alpha_i proportional to
    sum_j |<h_i, x_j>| over the centered columns x_j of X, where h_i is the
    i-th canonical variate of X. Directions that account for more of the
    speaker segment therefore dominate the score.
    """
    result = cca(x, y, variance_keep)
    if result.correlations.size == 0:
        return 0.0
    x = np.asarray(x, dtype=np.float64)
    xc = x - x.mean(axis=0)
    alpha = np.abs(result.x_variates.T @ xc).sum(axis=1)
    total = alpha.sum()
    if total <= 0.0:
        return 0.0
    return float(np.clip((alpha / total) @ result.correlations, 0.0, 1.0))


def segmental_weights(
    speaker: np.ndarray,
    listener: np.ndarray,
    plan: SegmentPlan,
    variance_keep: float = 0.99,
) -> SegmentWeights:
    """Compute one PWCCA weight per segment pair, in segment order."""
    speaker = _check_segment_input(speaker, "speaker")
    listener = _check_segment_input(listener, "listener")
    if speaker.shape[0] != listener.shape[0]:
        raise InputShapeError(
            f"speaker has {speaker.shape[0]} frames, listener has {listener.shape[0]}"
        )
    if plan.total_frames != speaker.shape[0]:
        raise InputShapeError(
            f"plan covers {plan.total_frames} frames, features have {speaker.shape[0]}"
        )
    weights = np.empty(plan.n)
    for i, (start, end) in enumerate(plan.boundaries):
        try:
            weights[i] = pwcca(speaker[start:end], listener[start:end], variance_keep)
        except DegenerateSegmentError as exc:
            raise DegenerateSegmentError(f"segment {i} [{start}, {end}): {exc}") from exc
    return SegmentWeights(weights=weights, plan=plan)


def gate(speaker: np.ndarray, weights: SegmentWeights) -> np.ndarray:
    """Scale every speaker frame in segment i by the scalar weight w_i."""
    speaker = np.asarray(speaker, dtype=np.float64)
    if speaker.ndim != 2 or weights.plan.total_frames != speaker.shape[0]:
        raise InputShapeError(
            f"weights cover {weights.plan.total_frames} frames, "
            f"speaker has shape {speaker.shape}"
        )
    gated = speaker.copy()
    for w, (start, end) in zip(weights.weights, weights.plan.boundaries):
        gated[start:end] *= w
    return gated


def pwcca_null(
    t_seg: int,
    d_x: int,
    d_y: int,
    n_seeds: int = 20,
    variance_keep: float = 0.99,
    seed: int = 0,
) -> np.ndarray:
    """Monte-Carlo null distribution: PWCCA of independent Gaussian matrices.

    Returns one value per seed; useful as the no-coupling reference level for
    a given segment shape.
    """
    values = np.empty(n_seeds)
    for i in range(n_seeds):
        rng = np.random.default_rng(seed + i)
        values[i] = pwcca(
            rng.standard_normal((t_seg, d_x)),
            rng.standard_normal((t_seg, d_y)),
            variance_keep,
        )
    return values


def write_weights_csv(weights: SegmentWeights, path: str) -> None:
    """Write `segment,start,end,weight` rows, weights at 9 significant digits."""
    lines = ["segment,start,end,weight"]
    for i, ((start, end), w) in enumerate(zip(weights.plan.boundaries, weights.weights)):
        lines.append(f"{i},{start},{end},{format(w, '.9g')}")
    try:
        with open(path, "w") as fh:
            fh.write("\n".join(lines) + "\n")
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc
