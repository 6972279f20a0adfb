"""Closed-form kinetics of the two-hit cancer model and the fits run on simulated N3(t).

X0 normal, X1 one hit, X3 cancer; t in minutes throughout except where a
function says seconds.
"""
from dataclasses import dataclass

import numpy as np
from scipy.optimize import curve_fit
from scipy.stats import linregress

from ddq_helper.errors import DegenerateRateError, FitError, InsufficientDataError


U1 = 0.13  # min^-1
REGIMES = ('small', 'intermediate', 'large')
SMALL_POPULATION = 290
LARGE_POPULATION = 620

# reference second-hit rates (min^-1) against the initial normal population
REFERENCE_U2 = {128: 1.79e-3, 144: 2.70e-3, 157: 3.12e-3}
REFERENCE_U2_CIN_DELETED = 1.18e-5


@dataclass(frozen=True)
class CancerParams:
    u1: float
    u2: float
    x0_0: float

    def __post_init__(self):
        if self.u1 <= 0 or self.u2 <= 0 or self.x0_0 <= 0:
            raise ValueError('Rates and population must be positive, got {}'.format(self))

    @property
    def neff(self):
        return 2. * self.x0_0

    @property
    def k(self):
        return self.neff * self.u2


def cancer_closed_form(params, t):
    """(X0, X1, X3) at times t (minutes); arrays when t is an array"""
    t = np.asarray(t, dtype=np.float64)
    if np.any(t < 0):
        raise ValueError('Times must be non-negative, got min {}'.format(t.min()))
    u1, k, x = params.u1, params.k, params.x0_0
    if abs(k - u1) <= 1e-12 * max(k, u1):
        raise DegenerateRateError('Neff*u2 = {} equals u1 = {}; closed form is singular'.format(
            k, u1))
    # 1 - exp(-rt) through expm1 so that X1 and X3 keep full precision as t -> 0
    g1, gk = -np.expm1(-u1 * t), -np.expm1(-k * t)
    x0 = x * np.exp(-u1 * t)
    x1 = x * u1 * (gk - g1) / (k - u1)
    x3 = x * (k * g1 - u1 * gk) / (k - u1)
    return x0, x1, x3


def n3_asymptote(params, t, regime):
    """Leading-order X3 growth in the small, intermediate or large population limit"""
    t = np.asarray(t, dtype=np.float64)
    base = params.x0_0 * params.neff * params.u1
    if regime in ('small', 'large'):
        return base * params.u2 * t ** 2 / 2.
    if regime == 'intermediate':
        return base * np.sqrt(params.u2 * t)
    raise ValueError('Unknown regime {!r}, expected one of {}'.format(regime, REGIMES))


def population_regime(n):
    if n < SMALL_POPULATION:
        return 'small'
    if n <= LARGE_POPULATION:
        return 'intermediate'
    return 'large'


def effective_normal_cells(ring_s1, encoded_s1):
    """X0(0): half of the S1 on the ring plus the S1 encoded afterwards"""
    return (ring_s1 + encoded_s1) / 2.


@dataclass
class KineticsFit:
    c: float
    p: float
    r2: float
    t_half: float = None  # seconds
    points: int = 0

    def to_dict(self):
        return dict(self.__dict__)


def doubling_time(series, times):
    """Seconds from the first nonzero sample until the series doubles, or None"""
    series = np.asarray(series, dtype=np.float64)
    times = np.asarray(times, dtype=np.float64)
    nonzero = np.flatnonzero(series > 0)
    if len(nonzero) == 0:
        return None
    i0 = nonzero[0]
    target = 2. * series[i0]
    for j in range(i0 + 1, len(series)):
        if series[j] >= target:
            a, b = series[j - 1], series[j]
            frac = (target - a) / (b - a) if b != a else 1.
            t = times[j - 1] + frac * (times[j] - times[j - 1])
            return float(t - times[i0])
    return None


def kinetics_fit(series, times):
    """N3 = c t^p in log-log space; times in seconds, fit in minutes"""
    series = np.asarray(series, dtype=np.float64)
    times = np.asarray(times, dtype=np.float64)
    if series.shape != times.shape:
        raise ValueError('series and times differ in length: {} vs {}'.format(
            len(series), len(times)))
    keep = (series > 0) & (times > 0)
    if keep.sum() < 4:
        raise InsufficientDataError('Kinetics fit needs >= 4 nonzero samples, got {}'.format(
            int(keep.sum())))
    logt, logn = np.log(times[keep] / 60.), np.log(series[keep])
    if np.ptp(logn) == 0:
        return KineticsFit(float(series[keep][0]), 0., 0., doubling_time(series, times),
                           int(keep.sum()))
    res = linregress(logt, logn)
    return KineticsFit(float(np.exp(res.intercept)), float(res.slope), float(res.rvalue ** 2),
                       doubling_time(series, times), int(keep.sum()))


def fit_u2(series, times, x0_0, u1=U1):
    """Second-hit rate that best matches the closed-form X3 to N3; times in seconds"""
    series = np.asarray(series, dtype=np.float64)
    t = np.asarray(times, dtype=np.float64) / 60.
    if len(series) < 3 or not np.any(series > 0):
        raise InsufficientDataError('u2 fit needs >= 3 samples with some S3, got {}'.format(
            len(series)))

    def model(t, log_u2):
        u2 = np.exp(log_u2)
        params = CancerParams(u1, u2, x0_0)
        if abs(params.k - u1) <= 1e-9 * u1:
            params = CancerParams(u1, u2 * (1. + 1e-6), x0_0)
        return cancer_closed_form(params, t)[2]

    last = np.flatnonzero(series > 0)[-1]
    guess = 2. * series[last] / (x0_0 * 2. * x0_0 * u1 * t[last] ** 2)
    try:
        popt, _ = curve_fit(model, t, series, p0=(np.log(guess),), maxfev=5000)
    except RuntimeError as e:
        raise FitError('u2 fit did not converge: {}'.format(e))
    return float(np.exp(popt[0]))


def cin_ratio(u2_intact, u2_deleted):
    """How much faster the second hit is with the CIN gene intact"""
    if u2_deleted <= 0:
        raise DegenerateRateError('u2 with CIN deleted must be positive, got {}'.format(u2_deleted))
    return u2_intact / u2_deleted


def half_life_by_population(results):
    """{N: [t_half, ...]} -> {N: (mean, std, runs)}, ignoring runs that never doubled"""
    summary = {}
    for n, values in sorted(results.items()):
        values = np.array([v for v in values if v is not None], dtype=np.float64)
        if len(values) == 0:
            summary[n] = (None, None, 0)
        else:
            summary[n] = (float(values.mean()), float(values.std()), len(values))
    return summary
