"""Renyi-DP accounting for DP-SGD: subsampled Gaussian mechanism at integer
orders, additive composition, conversion to (epsilon, delta), and noise
calibration by bisection."""

import math
from dataclasses import dataclass, field
from typing import List

import numpy as np
from scipy.special import gammaln, logsumexp

DEFAULT_ORDERS = tuple(range(2, 65))


class AccountantError(ValueError):
    pass


@dataclass
class DpBudget:
    epsilon: float
    delta: float
    order: int = 0  # minimizing RDP order, for diagnostics


@dataclass
class RdpLedger:
    q: float
    sigma: float
    steps: int = 0
    orders: tuple = DEFAULT_ORDERS
    eps_rdp: np.ndarray = field(default=None)

    def __post_init__(self):
        if not (0 <= self.q <= 1):
            raise AccountantError("sampling rate q must lie in [0, 1]")
        if self.sigma <= 0:
            raise AccountantError("noise multiplier must be positive")
        if self.eps_rdp is None:
            self.eps_rdp = np.zeros(len(self.orders))


def gaussian_delta_bound(sigma, eps):
    """Smallest delta certified for the plain Gaussian mechanism."""
    return 0.8 * math.exp(-0.5 * (sigma * eps) ** 2)


def sgm_rdp(q, sigma, order):
    """RDP of one subsampled Gaussian step at an integer order alpha >= 2.

    Binomial expansion over the mixture, evaluated in log space:
    (1/(a-1)) log sum_k C(a,k) (1-q)^(a-k) q^k exp(k(k-1)/(2 sigma^2)).
    """
    if not (0 <= q <= 1):
        raise AccountantError("q must lie in [0, 1]")
    if sigma <= 0:
        raise AccountantError("sigma must be positive")
    a = int(order)
    if a < 2 or a != order:
        raise AccountantError("order must be an integer >= 2")
    if q == 0:
        return 0.0
    log_terms = []
    for k in range(a + 1):
        if q < 1:
            lt = (gammaln(a + 1) - gammaln(k + 1) - gammaln(a - k + 1)
                  + (a - k) * math.log1p(-q))
        elif k < a:
            continue  # q == 1: only the k == a term survives
        else:
            lt = 0.0
        if k > 0:
            lt += k * math.log(q)
        lt += k * (k - 1) / (2.0 * sigma * sigma)
        log_terms.append(lt)
    total = logsumexp(log_terms)
    if not np.isfinite(total):
        raise AccountantError(
            "overflow in subsampled-Gaussian RDP at order %d" % a)
    return float(total) / (a - 1)


def compose(ledger, steps):
    """Ledger after `steps` additive compositions of the per-step RDP."""
    if steps < 0:
        raise AccountantError("steps must be nonnegative")
    per_step = np.array([sgm_rdp(ledger.q, ledger.sigma, a)
                         for a in ledger.orders])
    return RdpLedger(ledger.q, ledger.sigma, steps, ledger.orders,
                     steps * per_step)


def to_dp(ledger, delta):
    """Convert the ledger to (epsilon, delta)-DP, minimizing over orders."""
    if not (0 < delta < 1):
        raise AccountantError("delta must lie in (0, 1)")
    candidates = ledger.eps_rdp + math.log(1.0 / delta) / (
        np.array(ledger.orders) - 1.0)
    j = int(candidates.argmin())
    return DpBudget(float(candidates[j]), delta, order=int(ledger.orders[j]))


SIGMA_BRACKET = (0.3, 100.0)


def calibrate_noise(target_eps, delta, q, steps, tol=1e-3,
                    bracket=SIGMA_BRACKET, orders=DEFAULT_ORDERS):
    """Smallest sigma in the bracket whose composed budget meets target_eps."""
    if target_eps <= 0:
        raise AccountantError("target epsilon must be positive")
    lo, hi = bracket

    def eps_at(sigma):
        return to_dp(compose(RdpLedger(q, sigma, orders=orders), steps),
                     delta).epsilon

    if eps_at(lo) <= target_eps:
        return lo
    if eps_at(hi) > target_eps:
        raise AccountantError(
            "target epsilon %g unattainable for sigma in [%g, %g]"
            % (target_eps, lo, hi))
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if eps_at(mid) <= target_eps:
            hi = mid
        else:
            lo = mid
    return hi


def ledger_to_dict(ledger):
    return {
        "q": ledger.q,
        "sigma": ledger.sigma,
        "steps": ledger.steps,
        "orders": list(ledger.orders),
        "eps_rdp": ledger.eps_rdp.tolist(),
    }
