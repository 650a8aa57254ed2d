"""Exogenous input generation and the regression model the twin uses.

Real episodes draw disturbances from environment-specific generators (an
Ornstein-Uhlenbeck wind, slow gust factors, a daily heat-load profile).
The twin never sees those generators: after each episode it fits a mean
regression to the recorded signal and models what is left as a smooth
Gaussian-process fluctuation, so virtual episodes can replay plausible
disturbances without touching the real system.
"""

import numpy as np
from scipy.interpolate import CubicSpline


class OUProcess:
    """Mean-reverting Gaussian process, sampled by exact discretization.

    u_{k+1} = mu + (u_k - mu) e^{-dt/tc} + sigma sqrt(1 - e^{-2 dt/tc}) xi_k
    so the marginal variance is sigma^2 at every step regardless of dt.
    """

    def __init__(self, mu, sigma, t_corr, clip_lo=None):
        self.mu = mu
        self.sigma = sigma
        self.t_corr = t_corr
        self.clip_lo = clip_lo

    def sample(self, t, rng, u0=None):
        n = len(t)
        dt = t[1] - t[0]
        rho = np.exp(-dt / self.t_corr)
        s = self.sigma * np.sqrt(1.0 - rho * rho)
        u = np.empty(n)
        u[0] = rng.normal(self.mu, self.sigma) if u0 is None else u0
        xi = rng.standard_normal(n - 1)
        for k in range(n - 1):
            u[k + 1] = self.mu + (u[k] - self.mu) * rho + s * xi[k]
        if self.clip_lo is not None:
            np.maximum(u, self.clip_lo, out=u)
        return u


def gp_sample_smooth(t, sigma_a, ell, rng, dt_coarse=None):
    """Zero-mean draw from a squared-exponential GP, k = sa^2 exp(-tau^2/2l^2).

    Sampled on a coarse grid (default l/4 spacing) and cubic-interpolated
    to t; exact sampling at fine grids is both singular and pointless for
    a process this smooth.
    """
    t = np.asarray(t, dtype=float)
    if dt_coarse is None:
        dt_coarse = ell / 4.0
    n_c = max(int(np.ceil((t[-1] - t[0]) / dt_coarse)) + 1, 4)
    tc = np.linspace(t[0], t[-1], n_c)
    d = tc[:, None] - tc[None, :]
    K = sigma_a ** 2 * np.exp(-0.5 * (d / ell) ** 2)
    K[np.diag_indices_from(K)] += 1e-10 * max(sigma_a ** 2, 1e-12)
    L = np.linalg.cholesky(K)
    yc = L @ rng.standard_normal(n_c)
    if n_c == len(t) and np.allclose(tc, t):
        return yc
    return CubicSpline(tc, yc)(t)


class ExoModel:
    """Mean fit plus fluctuation model of one episode's disturbance record.

    The mean is kernel ridge regression on at most ``n_inducing`` evenly
    subsampled points; the fluctuation is a smooth GP whose amplitude is
    the per-component residual standard deviation. Querying beyond the
    fitted horizon is refused rather than extrapolated.
    """

    def __init__(self, n_inducing=400, lam=1e-6, gamma=None, ell_factor=None):
        self.n_inducing = n_inducing
        self.lam = lam
        self.gamma = gamma          # kernel exponent; default (20/T)^2
        self.ell_factor = ell_factor
        self.t_end = None

    def fit(self, t, z):
        t = np.asarray(t, dtype=float)
        z = np.asarray(z, dtype=float)
        if z.ndim == 1:
            z = z[:, None]
        self.t_end = t[-1]
        T = t[-1] - t[0]
        gamma = self.gamma if self.gamma is not None else (20.0 / T) ** 2
        self._gamma = gamma
        m = min(self.n_inducing, len(t))
        sel = np.linspace(0, len(t) - 1, m).round().astype(int)
        ti = t[sel]
        d = ti[:, None] - ti[None, :]
        K = np.exp(-gamma * d * d)
        K[np.diag_indices_from(K)] += self.lam
        self._ti = ti
        self._alpha = np.linalg.solve(K, z[sel])
        resid = z - self._mean(t)
        self._sigma_r = resid.std(axis=0)
        # fluctuation length scale tied to the kernel width unless overridden
        ell = 1.0 / np.sqrt(2.0 * gamma)
        if self.ell_factor is not None:
            ell *= self.ell_factor
        self._ell = ell
        return self

    def _check_t(self, t):
        if self.t_end is None:
            raise RuntimeError("model not fitted")
        t = np.asarray(t, dtype=float)
        if t.max() > self.t_end * (1 + 1e-12) + 1e-12:
            raise ValueError(
                f"query at t={t.max():.6g} beyond fitted horizon {self.t_end:.6g}")
        return t

    def _mean(self, t):
        d = t[:, None] - self._ti[None, :]
        return np.exp(-self._gamma * d * d) @ self._alpha

    def eval_mean(self, t):
        return self._mean(self._check_t(t))

    def sample(self, t, rng):
        """Mean plus a fresh fluctuation draw, shape (n_t, n_z)."""
        t = self._check_t(t)
        out = self._mean(t)
        for j in range(out.shape[1]):
            if self._sigma_r[j] > 0:
                out[:, j] += gp_sample_smooth(t, self._sigma_r[j], self._ell, rng)
        return out
