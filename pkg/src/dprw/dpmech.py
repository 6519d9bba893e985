"""Privacy core: l1 clipping, Laplace noise calibration and sampling, and
an empirical audit of the local-DP log-density bound.

The mechanism privatizes a latent vector v by clipping it into the l1 ball
of radius C and adding i.i.d. Laplace(0, b) noise per coordinate. Any two
clipped inputs are at l1 distance at most 2C, so b = 2C / epsilon bounds
the log-density ratio of the outputs by epsilon. The 2C constant is a
derivation from that worst-case distance, validated empirically by
``verify_dp_bound`` rather than taken on faith.

epsilon = math.inf encodes the non-private setting: the scale is exactly 0
and ``privatize`` degenerates to clipping alone, bit for bit. The noise
scale itself is a plain float where 0 means "no noise".
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .numcore import Array, Rng, as_f64

#: Absolute tolerance for clip-norm and bound checks; covers float64 rounding.
BOUND_TOL = 1e-9


@dataclass(frozen=True)
class PrivacyParams:
    """Privacy budget epsilon (finite positive or math.inf) and clip radius."""

    epsilon: float
    clip_c: float

    def __post_init__(self):
        if math.isnan(self.epsilon) or self.epsilon <= 0:
            raise ValueError("epsilon must be positive or infinite")
        if not math.isfinite(self.clip_c) or self.clip_c <= 0:
            raise ValueError("clip_c must be a positive finite float")

    @property
    def non_private(self) -> bool:
        return math.isinf(self.epsilon)


def clip_l1(v: Array, clip_c: float) -> Array:
    """Rescale v into the l1 ball of radius clip_c.

    Returns v * min(1, clip_c / ||v||_1): direction is preserved, vectors
    already inside the ball come back bit-identical, and the operation is
    idempotent up to rounding.
    """
    if clip_c <= 0:
        raise ValueError("clip_c must be positive")
    v = as_f64(v)
    if not np.all(np.isfinite(v)):
        raise ValueError("clip_l1 requires finite input")
    norm = float(np.abs(v).sum())
    if norm <= clip_c:
        return v.copy()
    return v * (clip_c / norm)


def calibrate_scale(params: PrivacyParams) -> float:
    """Noise scale b for the clipped-input Laplace mechanism.

    b = 2 * clip_c / epsilon for finite epsilon (two clipped vectors are at
    l1 distance at most 2 * clip_c); b = 0 for the non-private setting.
    """
    if params.non_private:
        return 0.0
    return 2.0 * params.clip_c / params.epsilon


def sample_laplace(b: float, dim: int, rng: Rng) -> Array:
    """dim i.i.d. Laplace(0, b) draws via the inverse CDF.

    x = -b * sgn(u) * ln(1 - 2|u|) for u uniform in (-1/2, 1/2). b = 0
    returns the zero vector without consuming randomness.
    """
    if dim < 1:
        raise ValueError("dim must be at least 1")
    if b < 0:
        raise ValueError("noise scale must be non-negative")
    if b == 0.0:
        return np.zeros(dim)
    u = rng.random(dim) - 0.5
    # u = -0.5 has probability 2**-53; keep the log argument positive.
    inner = np.maximum(1.0 - 2.0 * np.abs(u), np.finfo(np.float64).tiny)
    return -b * np.sign(u) * np.log(inner)


def privatize(latent: Array, params: PrivacyParams, rng: Rng) -> Array:
    """Clip, then add calibrated Laplace noise.

    With epsilon = inf this is clip_l1 exactly (no addition is performed,
    so even signed zeros survive).
    """
    clipped = clip_l1(latent, params.clip_c)
    b = calibrate_scale(params)
    if b == 0.0:
        return clipped
    return clipped + sample_laplace(b, clipped.shape[0], rng)


def log_density(y: Array, center: Array, b: float) -> float:
    """Log density of the product Laplace(center_i, b) distribution at y."""
    if b <= 0:
        raise ValueError("log_density requires b > 0")
    y = as_f64(y)
    center = as_f64(center)
    if y.shape != center.shape:
        raise ValueError("log_density: shape mismatch")
    return float(np.sum(-np.log(2.0 * b) - np.abs(y - center) / b))


@dataclass(frozen=True)
class BoundCheck:
    log_ratio: float
    ok: bool


def verify_dp_bound(u: Array, v: Array, y: Array, params: PrivacyParams) -> BoundCheck:
    """Check |ln p(y | u) - ln p(y | v)| <= epsilon for one probe point.

    u and v must already be clipped; unclipped inputs are rejected so the
    check cannot silently test a weaker mechanism. An infinite epsilon is
    vacuously ok.
    """
    if params.non_private:
        return BoundCheck(log_ratio=0.0, ok=True)
    u = as_f64(u)
    v = as_f64(v)
    limit = params.clip_c + BOUND_TOL
    if np.abs(u).sum() > limit or np.abs(v).sum() > limit:
        raise ValueError("verify_dp_bound requires inputs clipped to clip_c")
    b = calibrate_scale(params)
    ratio = log_density(y, u, b) - log_density(y, v, b)
    return BoundCheck(log_ratio=ratio, ok=abs(ratio) <= params.epsilon + BOUND_TOL)


@dataclass
class BoundSuiteReport:
    epsilon: float
    trials: int
    max_abs_log_ratio: float
    violations: int
    tightness: float  # best sampled |log_ratio| / epsilon over antipodal pairs
    ok: bool


def _clip_rows(x: Array, clip_c: float) -> Array:
    """Row-wise clip_l1 over a matrix; same math as the vector version."""
    norms = np.abs(x).sum(axis=1)
    scale = np.ones_like(norms)
    over = norms > clip_c
    scale[over] = clip_c / norms[over]
    return x * scale[:, None]


def _random_clipped_batch(rng: Rng, n: int, dim: int, clip_c: float) -> Array:
    """Random vectors inside (or on) the l1 ball, biased toward the surface."""
    raw = rng.derive("dir").normal(0.0, 1.0, (n, dim))
    norms = np.maximum(np.abs(raw).sum(axis=1), 1e-12)
    radius = clip_c * (0.5 + 0.75 * rng.derive("radius").random(n))  # up to 1.25C, then clipped
    return _clip_rows(raw * (radius / norms)[:, None], clip_c)


def run_bound_suite(
    params: PrivacyParams,
    dim: int,
    trials: int,
    rng: Rng,
    noise_scale: float | None = None,
) -> BoundSuiteReport:
    """Randomized audit of the DP bound over ``trials`` (u, v, y) triples.

    Probes y are drawn on-distribution around u or v, uniformly over a box,
    and far out along antipodal directions where the ratio is extremal.
    The bulk runs vectorized; a 100-triple slice is replayed through the
    public ``verify_dp_bound`` so the suite cannot drift from its
    semantics. ``noise_scale`` overrides the calibrated b (test hook for
    demonstrating what a miscalibrated mechanism does to the bound); the
    report's ok flag is violations == 0.
    """
    if params.non_private:
        raise ValueError("nothing to verify for epsilon = inf")
    if trials < 1:
        raise ValueError("trials must be at least 1")
    b = calibrate_scale(params) if noise_scale is None else float(noise_scale)
    c = params.clip_c
    eps = params.epsilon

    # one in eight trials stresses antipodal surface pairs with far probes
    n_antipodal = max(1, trials // 8)
    n_random = trials - n_antipodal

    g = rng.derive("suite")
    ratios_parts = []

    if n_random:
        u = _random_clipped_batch(g.derive("u"), n_random, dim, c)
        v = _random_clipped_batch(g.derive("v"), n_random, dim, c)
        noise = sample_laplace(b, n_random * dim, g.derive("noise")).reshape(n_random, dim)
        box = g.derive("box").uniform(-3.0 * c, 3.0 * c, (n_random, dim))
        style = np.arange(n_random) % 3
        y = np.where((style == 0)[:, None], u + noise, np.where((style == 1)[:, None], v + noise, box))
        ratios_parts.append((np.abs(y - v).sum(axis=1) - np.abs(y - u).sum(axis=1)) / b)

    ga = g.derive("antipodal")
    axes = ga.derive("axis").integers(0, dim, n_antipodal)
    signs = np.where(ga.derive("signs").random((n_antipodal, dim)) < 0.5, -1.0, 1.0)
    ua = np.zeros((n_antipodal, dim))
    on_axis = np.arange(n_antipodal) % 2 == 0
    ua[on_axis, axes[on_axis]] = c
    ua[~on_axis] = signs[~on_axis] * (c / dim)
    reach = 1.0 + 9.0 * ga.derive("reach").random(n_antipodal)  # probe beyond the ball
    ya = ua * reach[:, None]
    anti_ratios = (np.abs(ya + ua).sum(axis=1) - np.abs(ya - ua).sum(axis=1)) / b
    ratios_parts.append(anti_ratios)

    ratios = np.abs(np.concatenate(ratios_parts))
    max_ratio = float(ratios.max())
    violations = int((ratios > eps + BOUND_TOL).sum())
    tight = float(np.abs(anti_ratios).max() / eps)

    if noise_scale is None:
        audit = PrivacyParams(epsilon=eps, clip_c=c)
        spot = g.derive("spot")
        n_spot = min(100, trials)
        su = _random_clipped_batch(spot.derive("u"), n_spot, dim, c)
        sv = _random_clipped_batch(spot.derive("v"), n_spot, dim, c)
        sy = su + sample_laplace(b, n_spot * dim, spot.derive("noise")).reshape(n_spot, dim)
        for i in range(n_spot):
            check = verify_dp_bound(su[i], sv[i], sy[i], audit)
            if not check.ok:
                violations += 1
            max_ratio = max(max_ratio, abs(check.log_ratio))

    return BoundSuiteReport(
        epsilon=eps,
        trials=trials,
        max_abs_log_ratio=max_ratio,
        violations=violations,
        tightness=tight,
        ok=violations == 0,
    )
