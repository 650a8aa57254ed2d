"""Variable-speed wind turbine with a parametric power-coefficient closure.

The real system is a single-inertia drivetrain driven by aerodynamic
torque; what the twin has to learn is the C_p(lambda, beta) surface,
parameterized by the twelve constants of a standard exponential
correlation. The controller state (measurement filters and a leaky error
integral) is integrated alongside the rotor so the feedback law stays a
pure function of the state vector.
"""

import numpy as np
from numba import njit

from ..simcore import Environment, clip_smooth, d_clip_smooth
from ..exomodels import OUProcess

RHO = 1.225
R_ROT = 63.0
J_ROT = 115926.0
N_G = 97.0
OMEGA_R_RATED = 1.27
OMEGA_G_RATED = N_G * OMEGA_R_RATED          # 123.19
TAU_MAX = 43093.0
BETA_MAX = 30.0                              # deg
P_NOM = 5.0e6
LAM_STAR = 7.55
CP_MAX = 0.46
K_G = np.pi * RHO * R_ROT ** 5 * CP_MAX / (2.0 * LAM_STAR ** 3 * N_G ** 3)
K_FILT = -np.log(0.98) * 4.0                 # 2 percent decay per 4 Hz sample
T_WIN = 2.0 * np.pi / OMEGA_R_RATED
U_FLOOR = 0.5
OMEGA_FLOOR = 0.05
OMEGA_C = 0.35

# correlation constants of the real surface; the scale puts the peak at
# CP_MAX (lambda ~ 6.91, beta = 0)
CP_TRUTH = np.array([0.7611071416, 151.0, 0.58, 0.0, 0.002, 13.2, 18.4,
                     0.0, -0.02, 0.003, 0.0, 2.14])


def _phi(om):
    """Bounded torque factor replacing 1/omega below OMEGA_C.

    The tau_a = P/omega law is only trusted above OMEGA_C; below it the
    factor ramps C1-smoothly to zero at standstill (and stays zero for
    negative speed), so a deep-stalled rotor parks instead of blowing
    through the state box inside one substep. Exact 1/omega above the
    cut, so operating trajectories never see the difference.
    """
    om = np.asarray(om, dtype=float)
    hi = om >= OMEGA_C
    x = np.clip(om / OMEGA_C, 0.0, 1.0)
    out = (4.0 - 3.0 * x) * x * x / OMEGA_C
    np.divide(1.0, om, out=out, where=hi)
    return out


def _dphi(om):
    om = np.asarray(om, dtype=float)
    hi = om >= OMEGA_C
    x = np.clip(om / OMEGA_C, 0.0, 1.0)
    out = (8.0 - 9.0 * x) * x / OMEGA_C ** 2
    np.divide(-1.0, om * om, out=out, where=hi)
    return out


DCP_CAP = 100.0


def cp_surface(lam, beta, c, grads=()):
    """C_p and requested derivatives, batched.

    grads may contain 'lam', 'beta', 'c'. The surface is hard-clipped to
    [-0.5, 0.6]; derivatives vanish on the clipped set and saturate at
    +-DCP_CAP. The correlation is an operating-band fit: near the
    singular ridges of the rational terms its raw slopes reach 1e9-1e21
    over lambda windows too narrow to matter, and one such node would
    otherwise drown every healthy node in an ensemble gradient.
    """
    lam = np.asarray(lam, dtype=float)
    beta = np.asarray(beta, dtype=float)
    D = lam + c[8] * beta
    D = np.where(D >= 0, np.maximum(D, 1e-3), np.minimum(D, -1e-3))
    B3 = beta ** 3 + 1.0
    y = 1.0 / D - c[9] / B3
    ys = np.where(y >= 0, np.maximum(y, 1e-4), np.minimum(y, -1e-4))
    xi = 1.0 / ys
    E = np.exp(np.clip(-c[6] * y, -50.0, 50.0))
    bpow = np.where(beta > 0, beta, 1.0) ** c[11] * (beta > 0)
    inner = c[1] * y - c[2] * beta - c[3] * xi * beta - c[4] * bpow - c[5]
    raw = c[0] * inner * E + c[7] * xi
    cp = np.clip(raw, -0.5, 0.6)
    if not grads:
        return cp
    live = ((raw > -0.5) & (raw < 0.6)).astype(float)
    dinner_dy = c[1] + c[3] * beta * xi * xi
    dcp_dy = (c[0] * (dinner_dy - c[6] * inner) * E - c[7] * xi * xi) * live
    out = {"cp": cp}
    if "lam" in grads:
        dy_dlam = -1.0 / (D * D)
        out["lam"] = np.clip(dcp_dy * dy_dlam, -DCP_CAP, DCP_CAP)
    if "beta" in grads:
        dy_dbeta = -c[8] / (D * D) + 3.0 * c[9] * beta * beta / (B3 * B3)
        dinner_dbeta = -c[2] - c[3] * xi - c[4] * c[11] * np.where(
            beta > 0, beta, 1.0) ** (c[11] - 1.0) * (beta > 0)
        out["beta"] = np.clip(dcp_dy * dy_dbeta + c[0] * dinner_dbeta * E * live,
                              -DCP_CAP, DCP_CAP)
    if "c" in grads:
        g = np.zeros(lam.shape + (12,))
        g[..., 0] = inner * E
        g[..., 1] = c[0] * y * E
        g[..., 2] = -c[0] * beta * E
        g[..., 3] = -c[0] * xi * beta * E
        g[..., 4] = -c[0] * bpow * E
        g[..., 5] = -c[0] * E
        g[..., 6] = -c[0] * inner * y * E
        g[..., 7] = xi
        dy_dc9 = -beta / (D * D)
        dy_dc10 = -1.0 / B3
        g[..., 8] = dcp_dy * dy_dc9
        g[..., 9] = dcp_dy * dy_dc10
        lnb = np.where(beta > 0, np.log(np.where(beta > 0, beta, 1.0)), 0.0)
        g[..., 11] = -c[0] * c[4] * bpow * lnb * E
        g *= live[..., None]
        out["c"] = np.clip(g, -DCP_CAP, DCP_CAP)
    return out


# ---------------------------------------------------------------------------
# jitted flow kernels; the rotor mode is ~0.03 s stiff against the 0.5 s
# control step, so episodes integrate with 25 substeps and the inner loop
# has to be compiled. Formulas mirror cp_surface / WindTurbine.f exactly.

@njit(cache=True)
def _cp_nb(lam, beta, c):
    D = lam + c[8] * beta
    if D >= 0.0:
        if D < 1e-3:
            D = 1e-3
    elif D > -1e-3:
        D = -1e-3
    B3 = beta ** 3 + 1.0
    y = 1.0 / D - c[9] / B3
    ys = y
    if ys >= 0.0:
        if ys < 1e-4:
            ys = 1e-4
    elif ys > -1e-4:
        ys = -1e-4
    xi = 1.0 / ys
    arg = -c[6] * y
    if arg > 50.0:
        arg = 50.0
    elif arg < -50.0:
        arg = -50.0
    E = np.exp(arg)
    bpow = beta ** c[11] if beta > 0.0 else 0.0
    inner = c[1] * y - c[2] * beta - c[3] * xi * beta - c[4] * bpow - c[5]
    raw = c[0] * inner * E + c[7] * xi
    if raw < -0.5:
        raw = -0.5
    elif raw > 0.6:
        raw = 0.6
    return raw


@njit(cache=True)
def _omega_sched_nb(u_hat):
    raw = N_G * LAM_STAR * u_hat / R_ROT
    lo = 0.35 * OMEGA_G_RATED
    if raw < lo:
        return lo
    if raw > OMEGA_G_RATED:
        return OMEGA_G_RATED
    return raw


@njit(cache=True)
def _turbine_f(t, S, A, Z, wp):
    B = S.shape[0]
    out = np.empty((B, 4))
    for b in range(B):
        om_r = S[b, 0]
        om = om_r if om_r > OMEGA_FLOOR else OMEGA_FLOOR
        u = Z[b, 0] if Z[b, 0] > U_FLOOR else U_FLOOR
        cp = _cp_nb(om * R_ROT / u, A[b, 1], wp)
        if om_r >= OMEGA_C:
            phi = 1.0 / om_r
        elif om_r > 0.0:
            x = om_r / OMEGA_C
            phi = (4.0 - 3.0 * x) * x * x / OMEGA_C
        else:
            phi = 0.0
        tau_a = 0.5 * RHO * np.pi * R_ROT ** 2 * cp * u ** 3 * phi
        acc = (tau_a - N_G * A[b, 0]) / J_ROT
        # ratchet: the rotor cannot be driven backward through standstill
        if om_r <= 0.0 and acc < 0.0:
            acc = 0.0
        out[b, 0] = acc
        out[b, 1] = K_FILT * (u - S[b, 1])
        out[b, 2] = K_FILT * (N_G * om_r - S[b, 2])
        out[b, 3] = (S[b, 2] - _omega_sched_nb(S[b, 1])) / OMEGA_G_RATED \
            - S[b, 3] / T_WIN
    return out


@njit(cache=True)
def _turbine_fc(t, S, Z, wp, wa):
    B = S.shape[0]
    A = np.empty((B, 2))
    for b in range(B):
        e1 = (S[b, 2] - _omega_sched_nb(S[b, 1])) / OMEGA_G_RATED
        e2 = S[b, 3] / T_WIN
        x1 = wa[0] * e1 + wa[1] * e2
        x2 = wa[2] * e1 + wa[3] * e2
        A[b, 0] = 0.5 * (np.tanh(x1) + 1.0) * TAU_MAX
        A[b, 1] = 0.5 * (np.tanh(x2) + 1.0) * BETA_MAX
    return _turbine_f(t, S, A, Z, wp)


class WindTurbine(Environment):
    """State [omega_r, u_hat, omega_g_hat, I]; actions [tau_g, beta]."""

    name = "turbine"
    n_s = 4
    n_a = 2
    n_z = 1
    n_p = 1
    n_err = 2
    n_wp = 12
    n_wa = 4

    dt = 0.5
    t_horizon = 600.0
    n_substeps = 25

    fast_f = staticmethod(_turbine_f)
    fast_fc = staticmethod(_turbine_fc)

    action_lo = np.array([0.0, 0.0])
    action_hi = np.array([TAU_MAX, BETA_MAX])
    action_rate = np.array([15000.0, 8.0])
    # speed floor admits a parked rotor (and a little reverse drift) so a
    # stalled twin holds a finite misfit instead of truncating the member
    state_lo = np.array([-1.0, 0.0, -110.0, -50.0])
    state_hi = np.array([5.0, 40.0, 600.0, 50.0])

    wp_truth = CP_TRUTH.copy()
    wp_scale = np.where(np.abs(CP_TRUTH) > 0, np.abs(CP_TRUTH), 0.01)
    err_scale = np.array([1.0, 1.0])
    jp_scale = 1.0
    ja_scale = 1.0 / 600.0

    gamma_1 = OMEGA_G_RATED
    gamma_2 = T_WIN
    alpha_1 = 1.0 / OMEGA_G_RATED ** 2
    alpha_2 = 1.0 / P_NOM ** 2

    wind = OUProcess(mu=11.0, sigma=0.16 * 11.0, t_corr=10.0, clip_lo=0.0)

    # ---- setpoint schedules against the filtered wind ------------------
    def _omega_sched(self, u_hat):
        raw = N_G * LAM_STAR * u_hat / R_ROT
        return np.clip(raw, 0.35 * OMEGA_G_RATED, OMEGA_G_RATED)

    def _domega_sched(self, u_hat):
        raw = N_G * LAM_STAR * u_hat / R_ROT
        live = (raw > 0.35 * OMEGA_G_RATED) & (raw < OMEGA_G_RATED)
        return np.where(live, N_G * LAM_STAR / R_ROT, 0.0)

    def _power_sched(self, u_hat):
        om = self._omega_sched(u_hat)
        return np.minimum(K_G * om ** 3, P_NOM)

    def _dpower_sched(self, u_hat):
        om = self._omega_sched(u_hat)
        live = (K_G * om ** 3 < P_NOM).astype(float)
        return live * 3.0 * K_G * om * om * self._domega_sched(u_hat)

    # ---- dynamics ------------------------------------------------------
    def _tau_a(self, s, z, p):
        u = np.maximum(z[:, 0], U_FLOOR)
        return 0.5 * RHO * np.pi * R_ROT ** 2 * p[:, 0] * u ** 3 * _phi(s[:, 0])

    def f(self, t, s, a, z, p):
        om_r, u_hat, om_gh, I = s.T
        u = np.maximum(z[:, 0], U_FLOOR)
        e1 = (om_gh - self._omega_sched(u_hat)) / self.gamma_1
        out = np.empty_like(s)
        acc = (self._tau_a(s, z, p) - N_G * a[:, 0]) / J_ROT
        out[:, 0] = np.where((om_r <= 0.0) & (acc < 0.0), 0.0, acc)
        out[:, 1] = K_FILT * (u - u_hat)
        out[:, 2] = K_FILT * (N_G * om_r - om_gh)
        out[:, 3] = e1 - I / T_WIN
        return out

    def _ratchet_live(self, s, a, z, p):
        acc = (self._tau_a(s, z, p) - N_G * a[:, 0]) / J_ROT
        return np.where((s[:, 0] <= 0.0) & (acc < 0.0), 0.0, 1.0)

    def dfds(self, t, s, a, z, p):
        B = s.shape[0]
        u = np.maximum(z[:, 0], U_FLOOR)
        J = np.zeros((B, 4, 4))
        J[:, 0, 0] = (0.5 * RHO * np.pi * R_ROT ** 2 * p[:, 0] * u ** 3
                      * _dphi(s[:, 0]) / J_ROT) * self._ratchet_live(s, a, z, p)
        J[:, 1, 1] = -K_FILT
        J[:, 2, 0] = K_FILT * N_G
        J[:, 2, 2] = -K_FILT
        J[:, 3, 1] = -self._domega_sched(s[:, 1]) / self.gamma_1
        J[:, 3, 2] = 1.0 / self.gamma_1
        J[:, 3, 3] = -1.0 / T_WIN
        return J

    def dfda(self, t, s, a, z, p):
        B = s.shape[0]
        J = np.zeros((B, 4, 2))
        J[:, 0, 0] = -N_G / J_ROT * self._ratchet_live(s, a, z, p)
        return J

    def dfdp(self, t, s, a, z, p):
        B = s.shape[0]
        u = np.maximum(z[:, 0], U_FLOOR)
        J = np.zeros((B, 4, 1))
        J[:, 0, 0] = (0.5 * RHO * np.pi * R_ROT ** 2 * u ** 3
                      * _phi(s[:, 0]) / J_ROT) * self._ratchet_live(s, a, z, p)
        return J

    # ---- closure -------------------------------------------------------
    def _lam(self, s, z):
        om = np.maximum(s[:, 0], OMEGA_FLOOR)
        u = np.maximum(z[:, 0], U_FLOOR)
        return om * R_ROT / u

    def g(self, t, s, a, z, wp):
        return cp_surface(self._lam(s, z), a[:, 1], wp)[:, None]

    def dgds(self, t, s, a, z, wp):
        B = s.shape[0]
        u = np.maximum(z[:, 0], U_FLOOR)
        live = (s[:, 0] > OMEGA_FLOOR).astype(float)
        d = cp_surface(self._lam(s, z), a[:, 1], wp, grads=("lam",))
        J = np.zeros((B, 1, 4))
        J[:, 0, 0] = d["lam"] * R_ROT / u * live
        return J

    def dgda(self, t, s, a, z, wp):
        B = s.shape[0]
        d = cp_surface(self._lam(s, z), a[:, 1], wp, grads=("beta",))
        J = np.zeros((B, 1, 2))
        J[:, 0, 1] = d["beta"]
        return J

    def dgdwp(self, t, s, a, z, wp):
        d = cp_surface(self._lam(s, z), a[:, 1], wp, grads=("c",))
        return d["c"][:, None, :]

    # ---- controller interface ------------------------------------------
    def error(self, t, s):
        e1 = (s[:, 2] - self._omega_sched(s[:, 1])) / self.gamma_1
        e2 = s[:, 3] / self.gamma_2
        return np.stack([e1, e2], axis=1)

    def derror_ds(self, t, s):
        B = s.shape[0]
        J = np.zeros((B, 2, 4))
        J[:, 0, 1] = -self._domega_sched(s[:, 1]) / self.gamma_1
        J[:, 0, 2] = 1.0 / self.gamma_1
        J[:, 1, 3] = 1.0 / self.gamma_2
        return J

    def policy(self, e, wa):
        x1 = wa[0] * e[:, 0] + wa[1] * e[:, 1]
        x2 = wa[2] * e[:, 0] + wa[3] * e[:, 1]
        return np.stack([clip_smooth(x1, 0.0, TAU_MAX),
                         clip_smooth(x2, 0.0, BETA_MAX)], axis=1)

    def dpolicy_de(self, e, wa):
        B = e.shape[0]
        x1 = wa[0] * e[:, 0] + wa[1] * e[:, 1]
        x2 = wa[2] * e[:, 0] + wa[3] * e[:, 1]
        d1 = d_clip_smooth(x1, 0.0, TAU_MAX)
        d2 = d_clip_smooth(x2, 0.0, BETA_MAX)
        J = np.empty((B, 2, 2))
        J[:, 0, 0] = d1 * wa[0]
        J[:, 0, 1] = d1 * wa[1]
        J[:, 1, 0] = d2 * wa[2]
        J[:, 1, 1] = d2 * wa[3]
        return J

    def dpolicy_dwa(self, e, wa):
        B = e.shape[0]
        x1 = wa[0] * e[:, 0] + wa[1] * e[:, 1]
        x2 = wa[2] * e[:, 0] + wa[3] * e[:, 1]
        d1 = d_clip_smooth(x1, 0.0, TAU_MAX)
        d2 = d_clip_smooth(x2, 0.0, BETA_MAX)
        J = np.zeros((B, 2, 4))
        J[:, 0, 0] = d1 * e[:, 0]
        J[:, 0, 1] = d1 * e[:, 1]
        J[:, 1, 2] = d2 * e[:, 0]
        J[:, 1, 3] = d2 * e[:, 1]
        return J

    # ---- costs ---------------------------------------------------------
    def _track_errors(self, s, a):
        eps_om = s[:, 2] - self._omega_sched(s[:, 1])
        eps_P = a[:, 0] * N_G * s[:, 0] - self._power_sched(s[:, 1])
        return eps_om, eps_P

    def La(self, t, s, a):
        eps_om, eps_P = self._track_errors(s, a)
        return 0.5 * (self.alpha_1 * eps_om ** 2 + self.alpha_2 * eps_P ** 2)

    def dLa_ds(self, t, s, a):
        B = s.shape[0]
        eps_om, eps_P = self._track_errors(s, a)
        J = np.zeros((B, 4))
        J[:, 0] = self.alpha_2 * eps_P * a[:, 0] * N_G
        J[:, 1] = (-self.alpha_1 * eps_om * self._domega_sched(s[:, 1])
                   - self.alpha_2 * eps_P * self._dpower_sched(s[:, 1]))
        J[:, 2] = self.alpha_1 * eps_om
        return J

    def dLa_da(self, t, s, a):
        B = s.shape[0]
        _, eps_P = self._track_errors(s, a)
        J = np.zeros((B, 2))
        J[:, 0] = self.alpha_2 * eps_P * N_G * s[:, 0]
        return J

    def Lp(self, t, s, s_ref):
        d = N_G * (s[:, 0] - s_ref[0])
        return 0.5 * d * d

    def dLp_ds(self, t, s, s_ref):
        out = np.zeros_like(s)
        out[:, 0] = N_G * N_G * (s[:, 0] - s_ref[0])
        return out

    def reward(self, t, s, a, z):
        return -self.dt * self.La(t, s, a)

    # ---- episode setup -------------------------------------------------
    def nominal_s0(self):
        # closed-loop steady state at u = 11 m/s under wa_init: rotor
        # freewheeling near-feathered (beta ~ 30 deg, tau_g ~ 0). This is
        # the only operating point the untrained policy holds through
        # lulls: anywhere the blades are loaded, a drop in wind makes the
        # commanded torque exceed what the rotor can supply at any speed,
        # and the stall runs away faster than the filtered sensors move.
        return np.array([0.8930123, 11.0, 86.622190, -1.4685869])

    def sample_s0(self, rng):
        # keep the filter memory consistent with the perturbed physical
        # state: an independently jittered speed estimate acts like a
        # large sensor fault and can stall the rotor in one control step
        s0 = self.nominal_s0()
        s0[0] *= 1.0 + 0.05 * rng.uniform(-1, 1)
        s0[1] *= 1.0 + 0.05 * rng.uniform(-1, 1)
        s0[2] = N_G * s0[0] * (1.0 + 0.01 * rng.uniform(-1, 1))
        e1 = (s0[2] - self._omega_sched(s0[1])) / OMEGA_G_RATED
        s0[3] = T_WIN * e1
        return s0

    def sample_exo(self, t, rng):
        # episodes begin at the mean wind (resumed operation), not from a
        # stationary draw: a 2-sigma low start while the filters still
        # read 11 m/s is lethal before the feedback can react
        return self.wind.sample(t, rng, u0=self.wind.mu)[:, None]

    def wp_init(self, rng=None):
        w = self.wp_truth.copy()
        if rng is not None:
            w *= 1.0 + 0.3 * rng.uniform(-1, 1, self.n_wp)
        else:
            w *= 0.7
        return w

    def wa_init(self):
        # conservative lead-lag start. Zero weights would hold mid-box
        # actions (beta 15 deg), where the rotor cannot carry the
        # commanded torque below ~12 m/s and stalls; pure proportional
        # gains on e1 die within minutes because the sensor filters lag
        # the stall timescale. Weighting e2 (a trailing window of e1)
        # negatively against e1 adds phase lead, and the surviving
        # operating point is a feathered freewheel. Survival checked over
        # 50 wind seeds with action noise and jittered starts.
        return np.array([20.0, 0.0, 10.0, -20.0])
