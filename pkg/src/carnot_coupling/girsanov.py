"""Change-of-probability coupling: shift vector, density, and the semigroup
identities it yields (transfer, integration by parts, functional inequalities).

For a trajectory driven by coefficients xi under P, an almost-sure endpoint
coupling with the trajectory from another start point g~ is obtained by
shifting finitely many coefficients: indices {0} union {3k : 1 <= k <= K}.
The shifted index-0 coefficient moves by (x - x~)/sqrt(T) along the
displacement direction; the index-3k shifts solve the skew mismatch through
the rescaled T-Sylvester particular solution (probe columns v_k / beta_k,
beta_k = 1/(T sqrt(alpha_{3k}^2 + alpha_{3k-1}^2))).  The shift u reads only
coefficients outside its own support plus the components of xi_0 orthogonal
to x - x~, which is what makes the Gaussian change of density

    R(u) = exp(-<omega, u> - |u|^2 / 2)

a martingale weight: E[R] = 1, E[R ln R] = E[|u|^2]/2, and
P_T f(g~) = E[f(endpoint from g) R(u)].

Differentiating the same construction in the direction h = (h_x, h_z) gives
the integration-by-parts weight -sum_k <xi_{3k}, u_k(h)> for d_g P_T f(h),
from which the reverse Poincare and weak log-Sobolev checks follow.

All estimators evaluate the Legendre-truncated semigroup (coefficients up to
index 3K+1 unless a longer path is requested): every identity and inequality
implemented here holds exactly for the truncated process as well, because the
derivations only use the Gaussian shift structure and the pathwise endpoint
identity, both of which survive truncation beyond the shift support.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .catalog import TestFunction
from .groups import (
    CarnotElement,
    SkewMatrix,
    odot,
    odot_packed,
    triu_pairs,
    zeta,
)
from .legendre import CoefficientStream, alpha, carnot_endpoint, endpoint_packed
from .mc import (
    ComparisonReport,
    MCEstimate,
    run_vector_estimator,
    split_seed,
    two_sample_compare,
)
from .special_constants import carnot_constants, gaussian_abs_moment, heisenberg_constants
from .sylvester import COND_LIMIT, SingularGramError, tsylvester_batch

__all__ = [
    "ShiftVector",
    "default_support_count",
    "build_shift",
    "density_R",
    "WeightedSample",
    "weighted_sample",
    "GirsanovReport",
    "girsanov_normalization_check",
    "TransferReport",
    "semigroup_transfer_check",
    "bismut_gradient",
    "finite_diff_gradient",
    "InequalityCheck",
    "InequalityReport",
    "inequality_suite",
    "entropy_bound_constant",
    "reverse_poincare_constant",
    "GradientSpotCheck",
    "gradient_sup_spotcheck",
    "horizontal_direction",
    "vertical_direction",
]


def default_support_count(n: int) -> int:
    """Default number K of modified blocks: 2n+1 (minimum allowed is n+2)."""
    return 2 * n + 1


@dataclass(frozen=True)
class ShiftVector:
    """Finitely supported coefficient shift with support {0} u {3k : k <= K}."""

    n: int
    K: int
    T: float
    u0: np.ndarray          # shape (n,), collinear with x - x~
    blocks: np.ndarray      # shape (K, n), row k-1 is the shift of index 3k

    @property
    def support(self) -> list[int]:
        return [0] + [3 * k for k in range(1, self.K + 1)]

    @property
    def norm_sq(self) -> float:
        return float(self.u0 @ self.u0 + np.sum(self.blocks * self.blocks))

    def component(self, index: int) -> np.ndarray:
        if index == 0:
            return self.u0
        if index % 3 == 0 and 1 <= index // 3 <= self.K:
            return self.blocks[index // 3 - 1]
        return np.zeros(self.n)


@dataclass(frozen=True)
class WeightedSample:
    """Endpoint with its change-of-probability weight."""

    endpoint: CarnotElement
    weight: float
    logweight: float


def weighted_sample(g: CarnotElement, gt: CarnotElement, T: float, K: int,
                    stream: CoefficientStream) -> WeightedSample:
    """Endpoint from g with the weight retargeting its law to the one from gt.

    Averaging f(endpoint) * weight over fresh streams estimates the semigroup
    at gt; the weights themselves average to one.
    """
    u = build_shift(g, gt, T, K, stream)
    logw = float(_log_density(u.u0, u.blocks[None], stream.xi[None])[0])
    return WeightedSample(carnot_endpoint(g, stream), math.exp(logw), logw)


def _probe_scale(k: int) -> float:
    return math.hypot(alpha(3 * k), alpha(3 * k - 1))


def _shift_arrays(gc: CarnotElement, gct: CarnotElement, T: float, K: int,
                  xi: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Batched shift construction; xi has shape (B, L, n) with L >= 3K+2.

    Returns (u0 (n,), blocks (B, K, n), cond (B,)).
    """
    n = gc.n
    iu, ju = triu_pairs(n)
    sqrtT = math.sqrt(T)
    d = np.asarray(gc.x, float) - np.asarray(gct.x, float)
    zeta_packed = zeta(gc, gct).upper

    hat = (sqrtT / 2.0) * xi[:, 0] - sqrtT * alpha(0) * xi[:, 1]
    w_packed = -zeta_packed + odot_packed(np.broadcast_to(d, hat.shape), hat, iu, ju)
    w_full = np.zeros(xi.shape[:1] + (n, n))
    w_full[:, iu, ju] = w_packed
    w_full[:, ju, iu] = -w_packed

    # rescaled probe columns v_k / beta_k = v_k * T * scale_k
    cols = []
    for k in range(1, K + 1):
        s = _probe_scale(k)
        vk = (alpha(3 * k) * xi[:, 3 * k + 1] - alpha(3 * k - 1) * xi[:, 3 * k - 1]) / s
        cols.append(vk * (T * s))
    vhat = np.stack(cols, axis=2)  # (B, n, K)
    blocks, cond = tsylvester_batch(vhat, w_full)
    bad = cond > COND_LIMIT
    if bad.any():
        # measure-zero event; fail loudly rather than use an ill-conditioned solve
        raise SingularGramError(f"{int(bad.sum())} singular Gram draws, reseed the run")
    return d / sqrtT, np.swapaxes(blocks, 1, 2), cond


def build_shift(g: CarnotElement, gt: CarnotElement, T: float, K: int,
                stream: CoefficientStream) -> ShiftVector:
    """Shift vector coupling the endpoint from g to the one from gt."""
    n = g.n
    if K < n + 2:
        raise ValueError("need K >= n + 2 modified blocks")
    if stream.k_path < 3 * K + 1:
        raise ValueError("stream must supply indices up to 3K+1")
    u0, blocks, cond = _shift_arrays(g, gt, T, K, stream.xi[None])
    if cond[0] > COND_LIMIT:
        raise SingularGramError(f"Gram condition {cond[0]:.3e}")
    return ShiftVector(n, K, T, u0, blocks[0])


def _log_density(u0: np.ndarray, blocks: np.ndarray, xi: np.ndarray) -> np.ndarray:
    K = blocks.shape[1]
    mods = xi[:, 3:3 * K + 1:3, :]
    dot = xi[:, 0] @ u0 + np.einsum("bkn,bkn->b", mods, blocks)
    norm2 = float(u0 @ u0) + np.einsum("bkn,bkn->b", blocks, blocks)
    return -dot - 0.5 * norm2


def density_R(u: ShiftVector, stream: CoefficientStream) -> float:
    """Radon-Nikodym weight exp(-<omega, u> - |u|^2/2) over the finite support."""
    if stream.k_path < 3 * u.K:
        raise ValueError("stream does not cover the shift support")
    logw = float(_log_density(u.u0, u.blocks[None], stream.xi[None])[0])
    return math.exp(logw)


def _f_on_endpoints(f: TestFunction, gc: CarnotElement, xi: np.ndarray, T: float):
    iu, ju = triu_pairs(gc.n)
    xT, zT = endpoint_packed(gc.x, gc.z.upper, xi, T, iu, ju)
    return f(xT, zT)


def _path_len(K: int, k_path: int | None) -> int:
    base = 3 * K + 2
    return base if k_path is None else max(base, k_path + 1)


@dataclass(frozen=True)
class GirsanovReport:
    """Normalization and entropy diagnostics of the weight R(u)."""

    mean_R: MCEstimate
    entropy_gap: MCEstimate        # R ln R - |u|^2/2, zero in expectation
    mean_entropy: MCEstimate       # E[R ln R]
    mean_half_norm_sq: MCEstimate  # E[|u|^2]/2
    entropy_bound: float
    normalization: ComparisonReport
    entropy_identity: ComparisonReport
    entropy_bounded: bool


def entropy_bound_constant(gc: CarnotElement, gct: CarnotElement, T: float) -> float:
    """Closed-form bound for E[|u|^2]/2 at K = 2n+1."""
    n = gc.n
    dx2 = float(np.sum((gc.x - gct.x) ** 2))
    zeta_sq = zeta(gc, gct).hs_norm() ** 2
    c = (6.0 * math.sqrt(n) + 4.0 / math.sqrt(n)) ** 2
    return dx2 / (2.0 * T) + c * (zeta_sq / T ** 2 + 2.0 * (n - 1) * dx2 / (3.0 * T))


def girsanov_normalization_check(
    g: CarnotElement, gt: CarnotElement, T: float, K: int, N: int, seed: int,
    workers: int = 1,
) -> GirsanovReport:
    """Check E[R] = 1 and the entropy identity E[R ln R] = E[|u|^2]/2 at 3 sigma."""

    def sampler(rng: np.random.Generator, count: int) -> np.ndarray:
        xi = rng.standard_normal((count, 3 * K + 2, g.n))
        u0, blocks, _ = _shift_arrays(g, gt, T, K, xi)
        logw = _log_density(u0, blocks, xi)
        w = np.exp(logw)
        half_u2 = 0.5 * (float(u0 @ u0) + np.einsum("bkn,bkn->b", blocks, blocks))
        rlnr = w * logw
        return np.stack([w, rlnr - half_u2, rlnr, half_u2], axis=1)

    mean_R, gap, rlnr, half = run_vector_estimator(sampler, N, seed, workers)
    bound = entropy_bound_constant(g, gt, T)
    return GirsanovReport(
        mean_R=mean_R,
        entropy_gap=gap,
        mean_entropy=rlnr,
        mean_half_norm_sq=half,
        entropy_bound=bound,
        normalization=two_sample_compare(mean_R, 1.0),
        entropy_identity=two_sample_compare(gap, 0.0),
        entropy_bounded=half.mean <= bound + 3.0 * half.stderr,
    )


@dataclass(frozen=True)
class TransferReport:
    """Weighted estimate from g against an independent unweighted run from g~."""

    weighted: MCEstimate
    direct: MCEstimate
    comparison: ComparisonReport


def semigroup_transfer_check(
    f: TestFunction, g: CarnotElement, gt: CarnotElement, T: float, K: int,
    N: int, seed: int, workers: int = 1, k_path: int | None = None,
) -> TransferReport:
    """Verify P_T f(g~) = E[f(endpoint from g) R(u)] end to end.

    The two sides use independent substreams so the pooled sigma is honest.
    """
    L = _path_len(K, k_path)

    def weighted_sampler(rng: np.random.Generator, count: int) -> np.ndarray:
        xi = rng.standard_normal((count, L, g.n))
        u0, blocks, _ = _shift_arrays(g, gt, T, K, xi)
        w = np.exp(_log_density(u0, blocks, xi))
        return _f_on_endpoints(f, g, xi, T) * w

    def direct_sampler(rng: np.random.Generator, count: int) -> np.ndarray:
        xi = rng.standard_normal((count, L, g.n))
        return _f_on_endpoints(f, gt, xi, T)

    lhs = run_vector_estimator(weighted_sampler, N, split_seed(seed, 1), workers)[0]
    rhs = run_vector_estimator(direct_sampler, N, split_seed(seed, 2), workers)[0]
    return TransferReport(lhs, rhs, two_sample_compare(lhs, rhs))


def _direction_pair(g: CarnotElement, h: CarnotElement) -> CarnotElement:
    return CarnotElement(g.x + h.x, g.z + h.z)


def bismut_gradient(
    f: TestFunction, g: CarnotElement, h: CarnotElement, T: float, K: int,
    N: int, seed: int, workers: int = 1, k_path: int | None = None,
) -> MCEstimate:
    """Integration-by-parts estimator of d_g P_T f(h).

    The weight is -sum_{k} <xi_{3k}, u_k(h)> with the shift built from the
    direction matrix of the displacement h (linear in h); h = 0 gives
    exactly zero.
    """
    if h.n != g.n:
        raise ValueError("dimension mismatch")
    L = _path_len(K, k_path)
    gth = _direction_pair(g, h)

    def sampler(rng: np.random.Generator, count: int) -> np.ndarray:
        xi = rng.standard_normal((count, L, g.n))
        u0, blocks, _ = _shift_arrays(g, gth, T, K, xi)
        mods = xi[:, 3:3 * K + 1:3, :]
        weight = -(xi[:, 0] @ u0 + np.einsum("bkn,bkn->b", mods, blocks))
        return _f_on_endpoints(f, g, xi, T) * weight

    return run_vector_estimator(sampler, N, seed, workers)[0]


def finite_diff_gradient(
    f: TestFunction, g: CarnotElement, h: CarnotElement, T: float, eps: float,
    N: int, seed: int, workers: int = 1, K: int | None = None,
    k_path: int | None = None,
) -> MCEstimate:
    """Central-difference oracle (P_T f(g + eps h) - P_T f(g - eps h)) / (2 eps).

    Shares the coefficient streams across the two evaluations (common random
    numbers); pass the same K / k_path as the integration-by-parts run so both
    differentiate the same truncated semigroup.
    """
    if eps <= 0:
        raise ValueError("step must be positive")
    L = _path_len(K if K is not None else default_support_count(g.n), k_path)
    g_plus = CarnotElement(g.x + eps * h.x, g.z + h.z.scaled(eps))
    g_minus = CarnotElement(g.x - eps * h.x, g.z + h.z.scaled(-eps))

    def sampler(rng: np.random.Generator, count: int) -> np.ndarray:
        xi = rng.standard_normal((count, L, g.n))
        fp = _f_on_endpoints(f, g_plus, xi, T)
        fm = _f_on_endpoints(f, g_minus, xi, T)
        return (fp - fm) / (2.0 * eps)

    return run_vector_estimator(sampler, N, seed, workers)[0]


def reverse_poincare_constant(g: CarnotElement, h: CarnotElement, T: float) -> float:
    """Closed-form factor in |d_g P_T f(h)|^2 <= P_T|f|^2 * factor (K = 2n+1)."""
    n = g.n
    hx2 = float(np.sum(h.x ** 2))
    vert = zeta(g, _direction_pair(g, h)).hs_norm() ** 2  # |h_z - x odot h_x / 2|^2
    c = (6.0 * math.sqrt(2.0 * n) + 4.0 * math.sqrt(2.0) / math.sqrt(n)) ** 2
    return hx2 / T + c * (vert / T ** 2 + 2.0 * (n - 1) * hx2 / (3.0 * T))


@dataclass(frozen=True)
class InequalityCheck:
    name: str
    lhs: float
    rhs: float
    sigma: float
    passed: bool


@dataclass(frozen=True)
class InequalityReport:
    checks: list[InequalityCheck]

    @property
    def all_passed(self) -> bool:
        return all(c.passed for c in self.checks)


def inequality_suite(
    f: TestFunction, g: CarnotElement, gt: CarnotElement, h: CarnotElement,
    T: float, N: int, seed: int, K: int | None = None, workers: int = 1,
    p_values: tuple[float, ...] = (),
) -> InequalityReport:
    """Monte Carlo verification of the semigroup inequalities at 3 sigma.

    Runs the log-Harnack comparison between g~ and g, the reverse Poincare
    and weak log-Sobolev checks in the direction h, all with the default
    support count K = 2n+1 unless overridden.  Extra exponents in `p_values`
    add the general Holder variant |d P_T f(h)| <= (P_T|f|^p)^{1/p} m_q
    E[|u|^q]^{1/q}; its shift-norm moment needs K > n + 3q/2 - 1 to be
    square-integrable, so pass a larger K alongside.

    Log-based checks need inf f > 0; for functions without a positive
    infimum they are omitted and the report lists only the checks that ran.
    """
    n = g.n
    K = default_support_count(n) if K is None else K
    L = _path_len(K, None)
    gth = _direction_pair(g, h)
    checks: list[InequalityCheck] = []
    extra_q = [p / (p - 1.0) for p in p_values]

    def base_sampler(rng: np.random.Generator, count: int) -> np.ndarray:
        xi = rng.standard_normal((count, L, n))
        vals = _f_on_endpoints(f, g, xi, T)
        u0, blocks, _ = _shift_arrays(g, gth, T, K, xi)
        mods = xi[:, 3:3 * K + 1:3, :]
        weight = -(xi[:, 0] @ u0 + np.einsum("bkn,bkn->b", mods, blocks))
        u_sq = float(u0 @ u0) + np.einsum("bkn,bkn->b", blocks, blocks)
        cols = [vals, vals ** 2, vals * weight, vals * u_sq]
        for p, q in zip(p_values, extra_q):
            cols.extend([np.abs(vals) ** p, u_sq ** (q / 2.0)])
        return np.stack(cols, axis=1)

    base = run_vector_estimator(base_sampler, N, split_seed(seed, 3), workers)
    mean_f, mean_f2, grad, f_usq = base[:4]

    if f.min_value > 0:
        def tilde_sampler(rng: np.random.Generator, count: int) -> np.ndarray:
            xi = rng.standard_normal((count, L, n))
            return np.log(_f_on_endpoints(f, gt, xi, T))

        lhs_lh = run_vector_estimator(tilde_sampler, N, split_seed(seed, 4), workers)[0]
        rhs_lh = math.log(mean_f.mean) + entropy_bound_constant(g, gt, T)
        sigma_lh = lhs_lh.stderr + mean_f.stderr / mean_f.mean
        checks.append(InequalityCheck(
            "log-harnack", lhs_lh.mean, rhs_lh, sigma_lh,
            lhs_lh.mean <= rhs_lh + 3.0 * sigma_lh,
        ))

    rp_factor = reverse_poincare_constant(g, h, T)
    lhs_rp = grad.mean ** 2
    rhs_rp = mean_f2.mean * rp_factor
    sigma_rp = 2.0 * abs(grad.mean) * grad.stderr + mean_f2.stderr * rp_factor
    checks.append(InequalityCheck(
        "reverse-poincare", lhs_rp, rhs_rp, sigma_rp, lhs_rp <= rhs_rp + 3.0 * sigma_rp,
    ))

    for i, (p, q) in enumerate(zip(p_values, extra_q)):
        fp, uq = base[4 + 2 * i], base[5 + 2 * i]
        m_q = gaussian_abs_moment(q)
        rhs_p = fp.mean ** (1.0 / p) * m_q * uq.mean ** (1.0 / q)
        sigma_p = rhs_p * (fp.stderr / (p * fp.mean) + uq.stderr / (q * max(uq.mean, 1e-300)))
        lhs_p = abs(grad.mean)
        checks.append(InequalityCheck(
            f"reverse-poincare-p{p:g}", lhs_p, rhs_p, grad.stderr + sigma_p,
            lhs_p <= rhs_p + 3.0 * (grad.stderr + sigma_p),
        ))

    if f.min_value > 0:
        def flnf_sampler(rng: np.random.Generator, count: int) -> np.ndarray:
            xi = rng.standard_normal((count, L, n))
            vals = _f_on_endpoints(f, g, xi, T)
            return vals * np.log(vals)

        flnf = run_vector_estimator(flnf_sampler, N, split_seed(seed, 5), workers)[0]
        ent = max(flnf.mean - mean_f.mean * math.log(mean_f.mean), 0.0)
        rhs_ls = math.sqrt(2.0 * ent * max(f_usq.mean, 0.0))
        sigma_ent = flnf.stderr + mean_f.stderr * abs(1.0 + math.log(mean_f.mean))
        if rhs_ls > 0:
            sigma_ls = (ent * f_usq.stderr + max(f_usq.mean, 0.0) * sigma_ent) / rhs_ls
        else:
            sigma_ls = math.sqrt(f_usq.stderr + sigma_ent)
        lhs_ls = abs(grad.mean)
        checks.append(InequalityCheck(
            "weak-log-sobolev", lhs_ls, rhs_ls,
            grad.stderr + sigma_ls,
            lhs_ls <= rhs_ls + 3.0 * (grad.stderr + sigma_ls) + 1e-12,
        ))

    return InequalityReport(checks)


def horizontal_direction(g: CarnotElement, i: int) -> CarnotElement:
    """Left-invariant horizontal direction: h = (e_i, odot(x, e_i)/2) at g."""
    e = np.zeros(g.n)
    e[i] = 1.0
    return CarnotElement(e, SkewMatrix(g.n, odot(g.x, e).upper / 2.0))


def vertical_direction(n: int, pair_index: int) -> CarnotElement:
    """Left-invariant vertical direction: unit packed entry, zero horizontal."""
    zp = np.zeros(n * (n - 1) // 2)
    zp[pair_index] = 1.0
    return CarnotElement(np.zeros(n), SkewMatrix(n, zp))


@dataclass(frozen=True)
class GradientSpotCheck:
    point: CarnotElement
    horizontal_norm: float
    horizontal_sigma: float
    horizontal_bound: float
    vertical_norm: float
    vertical_sigma: float
    vertical_bound: float
    passed: bool


def gradient_sup_spotcheck(
    f: TestFunction, points: list[CarnotElement], T: float, N: int, seed: int,
    workers: int = 1, K: int | None = None,
) -> list[GradientSpotCheck]:
    """Check the sup-norm gradient bounds at sample points.

    Horizontal: |grad_h P_T f| <= 2 C1(n)/sqrt(T) |f|_inf;
    vertical:   |grad_v P_T f| <= 2 sqrt(2) C2(n)/T |f|_inf.
    """
    out = []
    for idx, g in enumerate(points):
        n = g.n
        # rank 2 is the Heisenberg group, where the sharper constants apply
        c1, c2 = heisenberg_constants("improved") if n == 2 else carnot_constants(n)
        Kn = default_support_count(n) if K is None else K
        h_ests = [
            bismut_gradient(f, g, horizontal_direction(g, i), T, Kn, N,
                            split_seed(seed, 16 * idx + i), workers)
            for i in range(n)
        ]
        v_ests = [
            bismut_gradient(f, g, vertical_direction(n, p), T, Kn, N,
                            split_seed(seed, 16 * idx + n + p), workers)
            for p in range(n * (n - 1) // 2)
        ]

        def norm_and_sigma(ests):
            vec = np.array([e.mean for e in ests])
            ses = np.array([e.stderr for e in ests])
            nrm = float(np.linalg.norm(vec))
            if nrm > 0:
                sig = float(np.sqrt(np.sum((vec * ses) ** 2)) / nrm)
            else:
                sig = float(np.sqrt(np.sum(ses ** 2)))
            return nrm, sig

        h_norm, h_sig = norm_and_sigma(h_ests)
        v_norm, v_sig = norm_and_sigma(v_ests)
        h_bound = 2.0 * c1 / math.sqrt(T) * f.sup
        v_bound = 2.0 * math.sqrt(2.0) * c2 / T * f.sup
        passed = (h_norm <= h_bound + 3 * h_sig) and (v_norm <= v_bound + 3 * v_sig)
        out.append(GradientSpotCheck(g, h_norm, h_sig, h_bound, v_norm, v_sig, v_bound, passed))
    return out
