"""Classical and integral-back-transform estimators for mean and covariance.

The classical estimators average observed values pointwise (0/0 = NaN).
Their back-transformed counterparts estimate derivative means/covariances,
which stay unbiased when the missing mechanism depends only on low-order
polynomial components, and integrate them back from an anchor region where
the full sample is observed.

All estimators are pure functions of the sample; undefined cells propagate
as NaN and cumulative integrals stop at the first undefined cell in each
direction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import FunctionalSample, Grid, summarize_observation
from .errors import ArgumentError


@dataclass(frozen=True)
class MeanEstimate:
    """Gridded mean estimate; NaN marks cells with no observed curve."""

    grid: Grid
    values: np.ndarray
    order: int
    anchor: float | None = None


@dataclass(frozen=True)
class CovEstimate:
    """Gridded covariance estimate; NaN marks cells with no observed pair."""

    grid: Grid
    values: np.ndarray
    orders: tuple[int, int]
    anchor: float | None = None


def differentiate(sample: FunctionalSample) -> FunctionalSample:
    """Finite-difference first derivative per curve, mask preserved.

    Central differences at interior observed points, 3-point one-sided
    stencils at the two ends of each curve's observed run (exact on
    quadratics). Each observed set must be a contiguous grid interval
    with at least 3 points.
    """
    mask = sample.mask
    n, p = mask.shape
    counts = mask.sum(axis=1)
    first = np.argmax(mask, axis=1)
    last = p - 1 - np.argmax(mask[:, ::-1], axis=1)
    if np.any(last - first + 1 != counts):
        raise ArgumentError("observed set of each curve must be contiguous")
    if np.any(counts < 3):
        raise ArgumentError("each curve needs >= 3 observed points to differentiate")
    h = sample.grid.h
    v = sample.values
    d = np.full_like(v, np.nan)
    d[:, 1:-1] = (v[:, 2:] - v[:, :-2]) / (2.0 * h)
    rows = np.arange(n)
    d[rows, first] = (
        -3.0 * v[rows, first] + 4.0 * v[rows, first + 1] - v[rows, first + 2]
    ) / (2.0 * h)
    d[rows, last] = (
        3.0 * v[rows, last] - 4.0 * v[rows, last - 1] + v[rows, last - 2]
    ) / (2.0 * h)
    return FunctionalSample(sample.grid, np.where(mask, d, np.nan), mask)


def _derivative_chain(sample, K, supplied=None):
    """Samples of derivative orders 0..K; supplied[k-1] overrides order k."""
    chain = [sample]
    for k in range(1, K + 1):
        if supplied is not None and len(supplied) >= k and supplied[k - 1] is not None:
            ds = supplied[k - 1]
            if ds.mask.shape != sample.mask.shape or not np.array_equal(
                ds.mask, sample.mask
            ):
                raise ArgumentError("supplied derivative sample must share the mask")
            chain.append(ds)
        else:
            chain.append(differentiate(chain[-1]))
    return chain


def _mean_vec(sample: FunctionalSample) -> np.ndarray:
    mask = sample.mask
    counts = mask.sum(axis=0)
    total = np.where(mask, sample.values, 0.0).sum(axis=0)
    with np.errstate(invalid="ignore"):
        return np.where(counts > 0, total / np.maximum(counts, 1), np.nan)


def mean_est(sample: FunctionalSample, k: int = 0, derivatives=None) -> MeanEstimate:
    """Pointwise average of order-k derivative values over observed curves."""
    if k < 0:
        raise ArgumentError("derivative order must be >= 0")
    chain = _derivative_chain(sample, k, derivatives)
    return MeanEstimate(sample.grid, _mean_vec(chain[k]), order=k)


def _centered(sample: FunctionalSample, mu: np.ndarray) -> np.ndarray:
    with np.errstate(invalid="ignore"):
        return np.where(sample.mask, sample.values - mu, 0.0)


def _cov_mat(sample_l, sample_k, mu_l, mu_k) -> np.ndarray:
    a = _centered(sample_l, mu_l)
    b = _centered(sample_k, mu_k)
    maskf = sample_l.mask.astype(float)
    counts = maskf.T @ maskf
    with np.errstate(invalid="ignore"):
        return np.where(counts > 0, (a.T @ b) / np.maximum(counts, 1.0), np.nan)


def cov_est(sample: FunctionalSample, l: int = 0, k: int = 0, derivatives=None) -> CovEstimate:
    """Pairwise-complete covariance of order-(l, k) derivative values.

    Centering uses the observed-subset means of matching orders; the
    divisor is the pair count (n under full observation), 0/0 = NaN.
    """
    if l < 0 or k < 0:
        raise ArgumentError("derivative orders must be >= 0")
    chain = _derivative_chain(sample, max(l, k), derivatives)
    mu = [_mean_vec(s) for s in chain]
    return CovEstimate(
        sample.grid, _cov_mat(chain[l], chain[k], mu[l], mu[k]), orders=(l, k)
    )


def cum_int(values, grid: Grid, anchor: int) -> np.ndarray:
    """Signed trapezoidal cumulative integral from the anchor grid index.

    F[j] approximates the integral of `values` from t_anchor to t_j, so
    F[anchor] = 0 and F is negative-signed below the anchor when the
    integrand is positive. Integration stops at the first NaN in each
    direction (NaN beyond).
    """
    v = np.asarray(values, dtype=float)
    p = v.size
    if not 0 <= anchor < p:
        raise ArgumentError(f"anchor index {anchor} out of range")
    if np.isnan(v[anchor]):
        raise ArgumentError("anchor cell is undefined")
    h = grid.h
    out = np.full(p, np.nan)
    out[anchor] = 0.0
    if anchor < p - 1:
        out[anchor + 1:] = np.cumsum(0.5 * h * (v[anchor:-1] + v[anchor + 1:]))
    if anchor > 0:
        seg = 0.5 * h * (v[:anchor] + v[1: anchor + 1])
        out[:anchor] = -np.cumsum(seg[::-1])[::-1]
    return out


def _cum_int_axis1(m: np.ndarray, grid: Grid, anchor: int) -> np.ndarray:
    """cum_int applied to each row of a matrix (no anchor-cell check)."""
    p = m.shape[1]
    h = grid.h
    out = np.full_like(m, np.nan)
    out[:, anchor] = np.where(np.isnan(m[:, anchor]), np.nan, 0.0)
    if anchor < p - 1:
        out[:, anchor + 1:] = np.cumsum(
            0.5 * h * (m[:, anchor:-1] + m[:, anchor + 1:]), axis=1
        )
    if anchor > 0:
        seg = 0.5 * h * (m[:, :anchor] + m[:, 1: anchor + 1])
        out[:, :anchor] = -np.cumsum(seg[:, ::-1], axis=1)[:, ::-1]
    return out


def _cum_int_axis0(m: np.ndarray, grid: Grid, anchor: int) -> np.ndarray:
    return _cum_int_axis1(m.T, grid, anchor).T


def _anchor_run(sample: FunctionalSample, j_f: int) -> tuple[int, int]:
    """Maximal contiguous block of fully observed columns containing j_f."""
    full = sample.mask.all(axis=0)
    if not full[j_f]:
        raise ArgumentError(
            f"grid point {sample.grid.points[j_f]} is not observed for the full sample"
        )
    l = j_f
    while l > 0 and full[l - 1]:
        l -= 1
    u = j_f
    while u < full.size - 1 and full[u + 1]:
        u += 1
    return l, u


def _require_interval(sample: FunctionalSample):
    summ = summarize_observation(sample)
    if not summ.interval_pattern:
        raise ArgumentError(
            "sample does not have the interval observation pattern; "
            "use the *_general estimators with an explicit anchor"
        )
    if summ.d_f_candidates.size == 0:
        raise ArgumentError("no grid point is observed for the full sample")
    return summ


def _mean_levels(chain, grid: Grid, K: int, l: int, u: int) -> np.ndarray:
    """Back-transform the order-K derivative mean down to order 0.

    On the fully observed block [l, u] each level uses the classical mean
    of the matching order; outside, the previous level is integrated from
    the block edge with the classical mean there as boundary value.
    """
    p = grid.p
    mu = [_mean_vec(s) for s in chain]
    cur = mu[K]
    for k in range(K, 0, -1):
        nxt = np.full(p, np.nan)
        nxt[l: u + 1] = mu[k - 1][l: u + 1]
        if u < p - 1:
            nxt[u + 1:] = cum_int(cur, grid, u)[u + 1:] + mu[k - 1][u]
        if l > 0:
            nxt[:l] = cum_int(cur, grid, l)[:l] + mu[k - 1][l]
        cur = nxt
    return cur


def ftc_mean(sample: FunctionalSample, derivatives=None) -> MeanEstimate:
    """Integral-back-transform mean estimator for interval-pattern samples.

    Equals the classical mean on the fully observed block [t_1, d_min];
    beyond d_min it integrates the derivative mean from the anchor.
    """
    summ = _require_interval(sample)
    u = int(summ.d_f_candidates[-1])
    chain = _derivative_chain(sample, 1, derivatives)
    values = _mean_levels(chain, sample.grid, 1, 0, u)
    return MeanEstimate(sample.grid, values, order=0, anchor=float(sample.grid.points[u]))


def ftc_mean_general(sample: FunctionalSample, d_f: float, derivatives=None) -> MeanEstimate:
    """Back-transform mean anchored at any fully observed grid point d_f.

    d_f is snapped to the nearest grid point; the anchor block is grown to
    the maximal fully observed run around it, so interval-pattern samples
    with d_f = d_min reproduce ftc_mean bit for bit.
    """
    j_f = sample.grid.index_of(d_f)
    l, u = _anchor_run(sample, j_f)
    chain = _derivative_chain(sample, 1, derivatives)
    values = _mean_levels(chain, sample.grid, 1, l, u)
    return MeanEstimate(sample.grid, values, order=0, anchor=float(sample.grid.points[j_f]))


def ftc_mean_recursive(
    sample: FunctionalSample, K: int, d_f: float, derivatives=None
) -> MeanEstimate:
    """K-fold back-transform for missingness tied to the first K monomials."""
    if K < 1:
        raise ArgumentError("K must be >= 1")
    if int(sample.mask.sum(axis=1).min()) < K + 2:
        raise ArgumentError(
            f"order-{K} stencils need >= {K + 2} observed points per curve"
        )
    j_f = sample.grid.index_of(d_f)
    l, u = _anchor_run(sample, j_f)
    chain = _derivative_chain(sample, K, derivatives)
    values = _mean_levels(chain, sample.grid, K, l, u)
    return MeanEstimate(sample.grid, values, order=0, anchor=float(sample.grid.points[j_f]))


def _assemble_cov(s11, s10, s01, s00, grid: Grid, l: int, u: int) -> np.ndarray:
    """One back-transform level of the covariance surface.

    With a_s = clip(s, [l, u]) and a_t likewise, assembles

        out(s,t) = double integral of s11 over [a_s,s] x [a_t,t]
                 + integral of s10(., a_t) over [a_s,s]
                 + integral of s01(a_s, .) over [a_t,t]
                 + s00(a_s, a_t),

    which collapses to s00 on the fully observed block and to the
    four-case anchored formula elsewhere.
    """
    p = grid.p
    clip = np.clip(np.arange(p), l, u)
    out = s00[np.ix_(clip, clip)].copy()

    if u < p - 1:
        cu = _cum_int_axis1(s01, grid, u)
        out[:, u + 1:] += cu[clip, u + 1:]
        du = _cum_int_axis0(s10, grid, u)
        out[u + 1:, :] += du[u + 1:, :][:, clip]
        inner = _cum_int_axis1(s11, grid, u)
        out[u + 1:, u + 1:] += _cum_int_axis0(inner, grid, u)[u + 1:, u + 1:]
    if l > 0:
        cl = _cum_int_axis1(s01, grid, l)
        out[:, :l] += cl[clip, :l]
        dl = _cum_int_axis0(s10, grid, l)
        out[:l, :] += dl[:l, :][:, clip]
        inner = _cum_int_axis1(s11, grid, l)
        out[:l, :l] += _cum_int_axis0(inner, grid, l)[:l, :l]
        if u < p - 1:
            inner_u = _cum_int_axis1(s11, grid, u)
            out[:l, u + 1:] += _cum_int_axis0(inner_u, grid, l)[:l, u + 1:]
            inner_l = _cum_int_axis1(s11, grid, l)
            out[u + 1:, :l] += _cum_int_axis0(inner_l, grid, u)[u + 1:, :l]
    return out


def _backtransform_axis0(mats, grid: Grid, l: int, u: int) -> np.ndarray:
    """Back-transform the first (row) index of a derivative-order ladder.

    mats[i] estimates the order-(k+i, j) surface; the last entry is the
    highest order and is integrated down level by level, keeping the
    classical values on the fully observed row block [l, u] and anchoring
    each integral at the block edges.
    """
    p = mats[-1].shape[0]
    cur = mats[-1]
    for m in reversed(mats[:-1]):
        nxt = np.full_like(cur, np.nan)
        nxt[l: u + 1, :] = m[l: u + 1, :]
        if u < p - 1:
            nxt[u + 1:, :] = _cum_int_axis0(cur, grid, u)[u + 1:, :] + m[u, :]
        if l > 0:
            nxt[:l, :] = _cum_int_axis0(cur, grid, l)[:l, :] + m[l, :]
        cur = nxt
    return cur


def _cov_levels(chain, grid: Grid, K: int, l: int, u: int) -> np.ndarray:
    """Back-transform the order-(K, K) covariance down to order (0, 0).

    One anchored four-term assembly per level. The boundary cross terms of
    level k are themselves back-transformed in their off-anchor argument
    from order K down to k: an off-anchor factor of order below K still
    carries selection-dependent components, so using the classical
    order-(k, k-1) estimate directly would leave an O(1) bias for K >= 2.
    """
    mu = [_mean_vec(s) for s in chain]
    cache = {}

    def cmat(a, b):
        if (a, b) not in cache:
            cache[(a, b)] = _cov_mat(chain[a], chain[b], mu[a], mu[b])
        return cache[(a, b)]

    cur = cmat(K, K)
    for k in range(K, 0, -1):
        s10 = _backtransform_axis0(
            [cmat(j, k - 1) for j in range(k, K + 1)], grid, l, u
        )
        cur = _assemble_cov(cur, s10, s10.T, cmat(k - 1, k - 1), grid, l, u)
    return cur


def ftc_cov(sample: FunctionalSample, derivatives=None) -> CovEstimate:
    """Integral-back-transform covariance for interval-pattern samples."""
    summ = _require_interval(sample)
    u = int(summ.d_f_candidates[-1])
    chain = _derivative_chain(sample, 1, derivatives)
    values = _cov_levels(chain, sample.grid, 1, 0, u)
    return CovEstimate(sample.grid, values, orders=(0, 0), anchor=float(sample.grid.points[u]))


def ftc_cov_general(sample: FunctionalSample, d_f: float, derivatives=None) -> CovEstimate:
    """Back-transform covariance anchored at any fully observed grid point."""
    j_f = sample.grid.index_of(d_f)
    l, u = _anchor_run(sample, j_f)
    chain = _derivative_chain(sample, 1, derivatives)
    values = _cov_levels(chain, sample.grid, 1, l, u)
    return CovEstimate(sample.grid, values, orders=(0, 0), anchor=float(sample.grid.points[j_f]))


def ftc_cov_recursive(
    sample: FunctionalSample, K: int, d_f: float, derivatives=None
) -> CovEstimate:
    """K-fold covariance back-transform; one anchored level per order."""
    if K < 1:
        raise ArgumentError("K must be >= 1")
    if int(sample.mask.sum(axis=1).min()) < K + 2:
        raise ArgumentError(
            f"order-{K} stencils need >= {K + 2} observed points per curve"
        )
    j_f = sample.grid.index_of(d_f)
    l, u = _anchor_run(sample, j_f)
    chain = _derivative_chain(sample, K, derivatives)
    values = _cov_levels(chain, sample.grid, K, l, u)
    return CovEstimate(sample.grid, values, orders=(0, 0), anchor=float(sample.grid.points[j_f]))


def fpca_scores(sample: FunctionalSample, subdomain) -> tuple[np.ndarray, np.ndarray]:
    """Principal component scores on a fully observed subdomain.

    Eigendecomposes the classical covariance restricted to the subdomain,
    scaled by the grid spacing for the integral inner product. Returns
    (scores, explained) with explained fractions non-increasing and
    summing to 1 over the retained positive eigenvalues.
    """
    lo, hi = subdomain
    pts = sample.grid.points
    tol = 1e-12 * max(abs(pts[0]), abs(pts[-1]), 1.0)
    idx = np.flatnonzero((pts >= lo - tol) & (pts <= hi + tol))
    if idx.size < 2:
        raise ArgumentError("subdomain contains fewer than 2 grid points")
    if not sample.mask[:, idx].all():
        raise ArgumentError("subdomain must be fully observed")
    h = sample.grid.h
    vals = sample.values[:, idx]
    mu = vals.mean(axis=0)
    cov = cov_est(sample, 0, 0).values[np.ix_(idx, idx)]
    eigvals, eigvecs = np.linalg.eigh(h * cov)
    order = np.argsort(eigvals)[::-1]
    eigvals, eigvecs = eigvals[order], eigvecs[:, order]
    # Relative cut within the spectrum plus an absolute cut against the data
    # scale, so identical curves (variance at round-off level) yield no
    # components instead of one spurious component.
    keep = eigvals > max(eigvals[0], 0.0) * 1e-12
    keep &= eigvals > 1e-12 * max(float(np.abs(vals).max()) ** 2, 1e-300)
    eigvals, eigvecs = eigvals[keep], eigvecs[:, keep]
    if eigvals.size == 0:
        # Degenerate sample (all curves identical on the subdomain).
        return np.zeros((sample.n, 0)), np.zeros(0)
    # Eigenfunctions phi = v / sqrt(h) are L2-normalized on the subdomain.
    scores = np.sqrt(h) * (vals - mu) @ eigvecs
    explained = eigvals / eigvals.sum()
    return scores, explained
