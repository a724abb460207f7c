"""Extraction mathematics: calibration fits, force-gradient recovery, statistics.

Sign conventions: lock-in readings are stored signed in amplitude convention
(the calibration channels are negative for attractive electrostatics).  The
extracted force gradients follow the measurement definition

    total:   (1/R) dF/dd   = -(eps0 pi / kappa) S_w2_I / Delta_d
    Casimir: (1/R) dF_C/dd = (eps0 pi / kappa) [ S_2w1/(d0-d_pz) - S_w2_I/Delta_d ]

which are positive for attractive interactions; theory tables carry the
matching parallel-plate quantity ``2 pi P`` with the opposite sign (pressure
negative), so comparisons use magnitudes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .constants import EPS0
from .errors import DomainError, FitError

__all__ = [
    "DemodRecord",
    "CalibrationFit",
    "GradientCurve",
    "SpringFit",
    "alpha_of",
    "fit_calibration",
    "total_gradient",
    "casimir_gradient",
    "hydro_force_over_R",
    "spring_fit",
    "gradient_difference_check",
    "smooth_trend",
    "residual_stats",
]


@dataclass(frozen=True)
class DemodRecord:
    """Settled lock-in readings for one piezo set point."""

    d_pz: float      # m
    V_AC: float      # V
    V_DC: float      # V
    S0: float
    S_w1: float
    S_2w1: float
    S_4w1: float
    S_w2_I: float
    S_w2_Q: float
    noise_ac: float = 0.0   # per-channel rms noise estimate, V
    noise_dc: float = 0.0
    t_unix: float = 0.0


@dataclass(frozen=True)
class CalibrationFit:
    d0: float
    d0_err: float
    kappa: float
    kappa_err: float
    chi2_reduced: float

    @property
    def kappa_err_rel(self) -> float:
        return self.kappa_err / self.kappa


@dataclass
class GradientCurve:
    """(d, gradient, sigma) samples of one run, d monotone."""

    d: np.ndarray
    grad_over_R: np.ndarray
    sigma: np.ndarray
    run_id: int = 0
    t_unix: float = 0.0

    def __post_init__(self):
        d = np.asarray(self.d, dtype=float)
        steps = np.diff(d)
        if d.size >= 2 and not (np.all(steps > 0) or np.all(steps < 0)):
            raise DomainError("gradient curve separations must be monotone")
        self.d = d
        self.grad_over_R = np.asarray(self.grad_over_R, dtype=float)
        self.sigma = np.asarray(self.sigma, dtype=float)


@dataclass(frozen=True)
class SpringFit:
    k_over_R: float
    k_over_R_err: float
    gamma: float
    gamma_err: float
    chi2_reduced: float
    n_used: int
    bending_term_rel: float   # largest neglected second-order term, diagnostic


# ---------------------------------------------------------------------------
# alpha and the two-parameter calibration fit


def alpha_of(record: DemodRecord) -> tuple[float, float]:
    """Electrostatic curvature alpha = 2 |S_2w1| / V_AC^2 and its noise."""
    if record.V_AC <= 0:
        raise DomainError("alpha needs V_AC > 0")
    alpha = 2.0 * abs(record.S_2w1) / record.V_AC**2
    sigma = 2.0 * record.noise_ac / record.V_AC**2
    return alpha, sigma


def _lm_fit(residuals, jacobian, p0, max_iter=100, ftol=1e-12, lam0=1e-3):
    """Small damped least-squares engine with analytic Jacobian.

    residuals(p) -> r (weighted), jacobian(p) -> J (weighted).  Returns
    (p, covariance, chi2).
    """
    p = np.asarray(p0, dtype=float)
    lam = lam0
    r = residuals(p)
    chi2 = float(r @ r)
    for _ in range(max_iter):
        jac = jacobian(p)
        grad = jac.T @ r
        hess = jac.T @ jac
        improved = False
        for _ in range(25):
            try:
                step = np.linalg.solve(hess + lam * np.diag(np.diag(hess)), -grad)
            except np.linalg.LinAlgError:
                raise FitError("singular normal equations")
            p_try = p + step
            r_try = residuals(p_try)
            chi2_try = float(r_try @ r_try)
            if np.isfinite(chi2_try) and chi2_try <= chi2:
                improved = True
                break
            lam *= 8.0
        if not improved:
            break
        converged = chi2 - chi2_try < ftol * (1.0 + chi2)
        p, r, chi2 = p_try, r_try, chi2_try
        lam = max(lam / 8.0, 1e-12)
        if converged:
            break
    else:
        raise FitError("calibration fit did not converge")
    jac = jacobian(p)
    try:
        cov = np.linalg.inv(jac.T @ jac)
    except np.linalg.LinAlgError:
        raise FitError("singular covariance at the optimum")
    return p, cov, chi2


def fit_calibration(d_pz, alpha, sigma_alpha) -> CalibrationFit:
    """Weighted least squares of alpha = kappa / (d0 - d_pz) over (d0, kappa).

    Initial guess: kappa from the two extreme points, d0 from inverting the
    model at the closest approach.  Errors from the fit covariance scaled to
    the given sigma_alpha (chi2_reduced reported as a diagnostic).
    """
    d_pz = np.asarray(d_pz, dtype=float)
    alpha = np.asarray(alpha, dtype=float)
    sigma = np.asarray(sigma_alpha, dtype=float)
    if d_pz.size < 5:
        raise FitError("need at least 5 calibration records")
    if np.any(alpha <= 0) or np.any(sigma <= 0):
        raise FitError("alpha and sigma_alpha must be > 0")
    if alpha.max() / alpha.min() < 3.0:
        raise FitError("alpha must span at least a factor 3 for a stable fit")

    i_far = int(np.argmin(alpha))
    i_near = int(np.argmax(alpha))
    a1, a2 = alpha[i_far], alpha[i_near]
    z1, z2 = d_pz[i_far], d_pz[i_near]
    d0_guess = (a1 * z1 - a2 * z2) / (a1 - a2)
    kappa_guess = a2 * (d0_guess - z2)
    if not np.isfinite(d0_guess) or d0_guess <= d_pz.max() or kappa_guess <= 0:
        raise FitError("degenerate initial guess; alpha data inconsistent with the model")

    w = 1.0 / sigma

    def residuals(p):
        d0, kappa = p
        gap = d0 - d_pz
        if np.any(gap <= 0):
            return np.full(d_pz.size, 1e30)
        return (kappa / gap - alpha) * w

    def jacobian(p):
        d0, kappa = p
        gap = d0 - d_pz
        jac = np.empty((d_pz.size, 2))
        jac[:, 0] = -kappa / gap**2 * w
        jac[:, 1] = 1.0 / gap * w
        return jac

    p, cov, chi2 = _lm_fit(residuals, jacobian, [d0_guess, kappa_guess])
    d0, kappa = p
    if d0 <= d_pz.max():
        raise FitError("fitted d0 does not exceed the largest piezo extension")
    dof = max(d_pz.size - 2, 1)
    return CalibrationFit(
        d0=float(d0),
        d0_err=float(math.sqrt(cov[0, 0])),
        kappa=float(kappa),
        kappa_err=float(math.sqrt(cov[1, 1])),
        chi2_reduced=chi2 / dof,
    )


# ---------------------------------------------------------------------------
# gradient and hydrodynamic extraction


def _separation(record: DemodRecord, fit: CalibrationFit) -> float:
    return fit.d0 - record.d_pz


def total_gradient(record: DemodRecord, fit: CalibrationFit, delta_d: float) -> tuple[float, float]:
    """Total force gradient (1/R) dF/dd = -(eps0 pi / kappa) S_w2_I / Delta_d."""
    if delta_d <= 0:
        raise DomainError("Delta_d must be > 0")
    scale = EPS0 * math.pi / fit.kappa
    value = -scale * record.S_w2_I / delta_d
    sigma = math.hypot(scale * record.noise_ac / delta_d, fit.kappa_err_rel * value)
    return value, sigma


def electrostatic_gradient(record: DemodRecord, fit: CalibrationFit) -> tuple[float, float]:
    """Calibration-channel prediction (1/R) dF_E/dd = -(eps0 pi/kappa) S_2w1/(d0-d_pz)."""
    gap = _separation(record, fit)
    scale = EPS0 * math.pi / fit.kappa
    value = -scale * record.S_2w1 / gap
    sigma = abs(scale / gap) * record.noise_ac
    return value, sigma


def casimir_gradient(record: DemodRecord, fit: CalibrationFit, delta_d: float) -> tuple[float, float]:
    """Casimir force gradient: the total with the electrostatic part subtracted."""
    if delta_d <= 0:
        raise DomainError("Delta_d must be > 0")
    gap = _separation(record, fit)
    scale = EPS0 * math.pi / fit.kappa
    value = scale * (record.S_2w1 / gap - record.S_w2_I / delta_d)
    sigma_s = scale * record.noise_ac * math.hypot(1.0 / gap, 1.0 / delta_d)
    sigma = math.hypot(sigma_s, fit.kappa_err_rel * value)
    return value, sigma


def hydro_force_over_R(record: DemodRecord, fit: CalibrationFit,
                       radius_R: float | None = None):
    """RMS hydrodynamic force per radius from the quadrature channel.

    F/R (amplitude) = (eps0 pi / kappa) S_w2_Q; the RMS value of the sinusoidal
    force is |amplitude| / sqrt(2).  With ``radius_R`` the absolute RMS force is
    returned as a third element.
    """
    scale = EPS0 * math.pi / fit.kappa
    rms_over_r = abs(scale * record.S_w2_Q) / math.sqrt(2.0)
    sigma = scale * record.noise_ac / math.sqrt(2.0)
    if radius_R is None:
        return rms_over_r, sigma
    return rms_over_r, sigma, rms_over_r * radius_R


# ---------------------------------------------------------------------------
# spring constant and deflection sensitivity


def spring_fit(records: list[DemodRecord], fit: CalibrationFit,
               noise_floor_factor: float = 3.0) -> SpringFit:
    """k/R and gamma from the high-drive 2w1/4w1 ratio line.

    y = V_AC sqrt(S_2w1 / S_4w1) is linear in d_pz with slope
    -2 sqrt((k/R) / (eps0 pi)); gamma follows from kappa of the simultaneous
    calibration.  Records with S_4w1 under the noise floor or an invalid signal
    ratio are rejected.
    """
    xs, ys, sigmas, bend = [], [], [], 0.0
    for rec in records:
        ratio = rec.S_2w1 / rec.S_4w1 if rec.S_4w1 != 0.0 else -1.0
        if ratio <= 0.0 or abs(rec.S_4w1) < noise_floor_factor * rec.noise_ac:
            continue
        y = rec.V_AC * math.sqrt(ratio)
        rel = 0.5 * rec.noise_ac * math.sqrt(1.0 / rec.S_2w1**2 + 1.0 / rec.S_4w1**2)
        xs.append(rec.d_pz)
        ys.append(y)
        sigmas.append(max(y * rel, 1e-12))
        # size of the dropped bending term of the 2w1 channel
        bend = max(bend, 4.0 * abs(rec.S_4w1 / rec.S_2w1))
    if len(xs) < 5:
        raise FitError(f"only {len(xs)} usable high-drive records (need >= 5)")
    x = np.asarray(xs)
    y = np.asarray(ys)
    w = 1.0 / np.asarray(sigmas) ** 2

    sw = w.sum()
    sx = (w * x).sum()
    sy = (w * y).sum()
    sxx = (w * x * x).sum()
    sxy = (w * x * y).sum()
    det = sw * sxx - sx * sx
    if det <= 0:
        raise FitError("degenerate straight-line fit")
    slope = (sw * sxy - sx * sy) / det
    intercept = (sxx * sy - sx * sxy) / det
    slope_var = sw / det
    if slope >= 0:
        raise FitError("spring-fit slope must be negative (gap shrinks with d_pz)")
    resid = (y - slope * x - intercept) / np.asarray(sigmas)
    chi2_red = float(resid @ resid) / max(len(xs) - 2, 1)

    k_over_r = EPS0 * math.pi * slope**2 / 4.0
    k_over_r_err = EPS0 * math.pi * abs(slope) * math.sqrt(slope_var) / 2.0
    gamma = fit.kappa * k_over_r / (EPS0 * math.pi)
    gamma_err = gamma * math.hypot(k_over_r_err / k_over_r, fit.kappa_err_rel)
    return SpringFit(
        k_over_R=float(k_over_r),
        k_over_R_err=float(k_over_r_err),
        gamma=float(gamma),
        gamma_err=float(gamma_err),
        chi2_reduced=chi2_red,
        n_used=len(xs),
        bending_term_rel=float(bend),
    )


# ---------------------------------------------------------------------------
# high/low drive difference check


def gradient_difference_check(high_total: GradientCurve, low_total: GradientCurve,
                              high_elec: GradientCurve, low_elec: GradientCurve):
    """Measured vs predicted electrostatic force-gradient difference, per separation.

    Returns (d, measured_diff, predicted_diff, ratio) on the overlapping range,
    with the low-drive curves resampled by log-log interpolation.
    """
    d_hi = high_total.d
    lo_min, lo_max = low_total.d.min(), low_total.d.max()
    mask = (d_hi >= lo_min) & (d_hi <= lo_max)
    if not np.any(mask):
        raise DomainError("high- and low-drive runs do not overlap in separation")
    d = d_hi[mask]

    def resample(curve: GradientCurve):
        order = np.argsort(curve.d)
        return np.interp(np.log(d), np.log(curve.d[order]), curve.grad_over_R[order])

    measured = high_total.grad_over_R[mask] - resample(low_total)
    predicted = high_elec.grad_over_R[mask] - resample(low_elec)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(predicted != 0.0, measured / predicted, np.nan)
    return d, measured, predicted, ratio


# ---------------------------------------------------------------------------
# trend smoothing and residual statistics


def smooth_trend(series, window: int, order: int = 2) -> np.ndarray:
    """Savitzky-Golay local-polynomial smoothing with window truncation at the ends.

    Reproduces polynomials up to ``order`` exactly; each output point is the
    value at the centre of a least-squares polynomial over the (clipped) window.
    """
    y = np.asarray(series, dtype=float)
    if window % 2 != 1 or window < order + 1:
        raise DomainError("window must be odd and exceed the polynomial order")
    if window > y.size:
        raise DomainError("window longer than the series")
    half = window // 2
    out = np.empty_like(y)
    for i in range(y.size):
        lo = max(i - half, 0)
        hi = min(i + half + 1, y.size)
        xs = np.arange(lo, hi, dtype=float) - i
        coeffs = np.polynomial.polynomial.polyfit(xs, y[lo:hi], order)
        out[i] = coeffs[0]
    return out


@dataclass(frozen=True)
class ResidualStats:
    mean: float
    std: float              # sample standard deviation
    gauss_sigma: float      # sigma of the best-fit Gaussian to the histogram
    gauss_mean: float


def residual_stats(series, trend=None, bins: int | None = None) -> ResidualStats:
    """Sample statistics plus a Gaussian fit to the residual histogram."""
    y = np.asarray(series, dtype=float)
    if trend is not None:
        y = y - np.asarray(trend, dtype=float)
    if y.size < 30:
        raise DomainError("need at least 30 points for residual statistics")
    mean = float(y.mean())
    std = float(y.std(ddof=1))
    if bins is None:
        bins = max(int(round(math.sqrt(y.size))), 8)
    counts, edges = np.histogram(y, bins=bins)
    centers = 0.5 * (edges[1:] + edges[:-1])
    keep = counts > 0
    xc, yc = centers[keep], counts[keep].astype(float)

    def model(p):
        a, mu, sig = p
        return a * np.exp(-0.5 * ((xc - mu) / sig) ** 2)

    def residuals(p):
        return model(p) - yc

    def jacobian(p):
        a, mu, sig = p
        g = np.exp(-0.5 * ((xc - mu) / sig) ** 2)
        jac = np.empty((xc.size, 3))
        jac[:, 0] = g
        jac[:, 1] = a * g * (xc - mu) / sig**2
        jac[:, 2] = a * g * (xc - mu) ** 2 / sig**3
        return jac

    p0 = [counts.max(), mean, max(std, 1e-30)]
    try:
        p, _, _ = _lm_fit(residuals, jacobian, p0)
        gauss_mean, gauss_sigma = float(p[1]), abs(float(p[2]))
    except FitError:
        gauss_mean, gauss_sigma = mean, std
    return ResidualStats(mean=mean, std=std, gauss_sigma=gauss_sigma, gauss_mean=gauss_mean)
