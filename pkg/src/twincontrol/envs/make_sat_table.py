"""Generate the parahydrogen saturation-property table.

Writes the CSV consumed by the tank environment: values and pressure
derivatives of the saturated liquid/vapour state on a uniform kPa grid.
Uses CoolProp when importable; otherwise falls back to built-in anchored
correlations (ancillary-style fits through triple-point, normal-boiling
and mid-range reference states, with the vapour density derived from the
Clausius-Clapeyron relation so that latent heat, slope of the vapour
pressure curve and the phase densities stay mutually consistent).

    python -m twincontrol.envs.make_sat_table out.csv
    python -m twincontrol.envs.make_sat_table dense.csv --pmin 480 --pmax 520 --step 0.25

Units: p in kPa, T in K, densities kg/m^3, enthalpies J/kg, cp J/(kg K);
H_l, H_v are the volumetric enthalpies rho*h in J/m^3; all derivative
columns are per kPa.
"""

import argparse

import numpy as np

T_C = 32.938         # K, critical
P_C = 1285.8         # kPa
RHO_C = 31.32        # kg/m^3
T_TRIPLE = 13.803
P_TRIPLE = 7.042
T_NBP = 20.271       # K at 101.325 kPa

COLUMNS = ("p_kPa", "T_sat", "rho_l", "rho_v", "h_l", "h_v", "cp_l",
           "drho_l_dp", "drho_v_dp", "dH_l_dp", "dH_v_dp")


def _fit_anchors():
    """Solve the correlation coefficients from the anchor states."""
    th = lambda T: 1.0 - T / T_C

    # vapour pressure: ln(p/pc) = (Tc/T) * (n1 th + n2 th^1.5 + n3 th^2.85)
    Ts = np.array([T_TRIPLE, T_NBP, 27.1])
    ps = np.array([P_TRIPLE, 101.325, 500.0])
    A = np.column_stack([th(Ts), th(Ts) ** 1.5, th(Ts) ** 2.85])
    b = np.log(ps / P_C) * (Ts / T_C)
    n_vp = np.linalg.solve(A, b)

    # liquid density: rho_c * (1 + d1 th^0.35 + d2 th + d3 th^1.5)
    rhos = np.array([77.03, 70.85, 62.8])
    A = np.column_stack([th(Ts) ** 0.35, th(Ts), th(Ts) ** 1.5])
    d_rl = np.linalg.solve(A, rhos / RHO_C - 1.0)

    # latent heat: h0 * th^0.38 * (1 + a th), anchored at triple and NBP
    T2 = np.array([T_TRIPLE, T_NBP])
    dh = np.array([449.2e3, 445.5e3])
    y = dh / th(T2) ** 0.38
    a_lh = (y[1] - y[0]) / (y[0] * th(T2[1]) - y[1] * th(T2[0]))
    h0_lh = y[0] / (1.0 + a_lh * th(T2[0]))

    # saturated-liquid heat capacity: a + b/th (diverges toward critical)
    cps = np.array([9.69e3, 13.2e3])
    Tc2 = np.array([T_NBP, 27.1])
    b_cp = (cps[1] - cps[0]) / (1.0 / th(Tc2[1]) - 1.0 / th(Tc2[0]))
    a_cp = cps[0] - b_cp / th(Tc2[0])
    return n_vp, d_rl, (h0_lh, a_lh), (a_cp, b_cp)


class _Correlations:
    """Closed-form parahydrogen saturation model over [100, 1000] kPa."""

    def __init__(self):
        self.n_vp, self.d_rl, self.lh, self.cp = _fit_anchors()

    def p_sat(self, T):
        th = 1.0 - T / T_C
        n1, n2, n3 = self.n_vp
        return P_C * np.exp((T_C / T) * (n1 * th + n2 * th ** 1.5
                                         + n3 * th ** 2.85))

    def dp_dT(self, T):
        h = 1e-5
        return (self.p_sat(T + h) - self.p_sat(T - h)) / (2 * h)

    def T_sat(self, p):
        T = np.full_like(np.asarray(p, dtype=float), 25.0)
        for _ in range(60):
            T = T - (self.p_sat(T) - p) / self.dp_dT(T)
            T = np.clip(T, T_TRIPLE, T_C - 0.05)  # keep Newton on the curve
        return T

    def rho_l(self, T):
        th = 1.0 - T / T_C
        d1, d2, d3 = self.d_rl
        return RHO_C * (1.0 + d1 * th ** 0.35 + d2 * th + d3 * th ** 1.5)

    def dh_vap(self, T):
        th = 1.0 - T / T_C
        h0, a = self.lh
        return h0 * th ** 0.38 * (1.0 + a * th)

    def rho_v(self, T):
        # Clausius-Clapeyron: 1/rho_v = 1/rho_l + dh/(T dp/dT); the vapour
        # branch then meets the liquid one at the critical point for free
        dpdT = self.dp_dT(T) * 1e3  # Pa/K
        return 1.0 / (1.0 / self.rho_l(T) + self.dh_vap(T) / (T * dpdT))

    def cp_l(self, T):
        a, b = self.cp
        return a + b / (1.0 - T / T_C)

    def h_l(self, T):
        # integral of cp_l from the normal boiling point (reference h=0)
        a, b = self.cp
        th0 = 1.0 - T_NBP / T_C
        th = 1.0 - T / T_C
        return a * (T - T_NBP) - b * T_C * (np.log(th) - np.log(th0))

    def h_v(self, T):
        return self.h_l(T) + self.dh_vap(T)

    def row(self, p):
        T = self.T_sat(p)
        hp = 1e-3  # kPa step for the derivative columns
        Tp, Tm = self.T_sat(p + hp), self.T_sat(p - hp)

        def d(fun):
            return (fun(Tp) - fun(Tm)) / (2 * hp)

        H_l = lambda T_: self.rho_l(T_) * self.h_l(T_)
        H_v = lambda T_: self.rho_v(T_) * self.h_v(T_)
        return (p, T, self.rho_l(T), self.rho_v(T), self.h_l(T),
                self.h_v(T), self.cp_l(T), d(self.rho_l), d(self.rho_v),
                d(H_l), d(H_v))


def _coolprop_row(p):
    import CoolProp.CoolProp as CP

    fluid = "ParaHydrogen"
    pa = p * 1e3
    T = CP.PropsSI("T", "P", pa, "Q", 0, fluid)
    out = [p, T]
    vals = {}
    for q, key in ((0, "l"), (1, "v")):
        vals["rho_" + key] = CP.PropsSI("D", "P", pa, "Q", q, fluid)
        vals["h_" + key] = CP.PropsSI("H", "P", pa, "Q", q, fluid)
    out += [vals["rho_l"], vals["rho_v"], vals["h_l"], vals["h_v"],
            CP.PropsSI("C", "P", pa, "Q", 0, fluid)]
    hp = 1e-3 * 1e3

    def d(key, q):
        a = CP.PropsSI(key, "P", pa + hp, "Q", q, fluid)
        b = CP.PropsSI(key, "P", pa - hp, "Q", q, fluid)
        return (a - b) / (2e-3)

    def dH(q):
        a = (CP.PropsSI("D", "P", pa + hp, "Q", q, fluid)
             * CP.PropsSI("H", "P", pa + hp, "Q", q, fluid))
        b = (CP.PropsSI("D", "P", pa - hp, "Q", q, fluid)
             * CP.PropsSI("H", "P", pa - hp, "Q", q, fluid))
        return (a - b) / (2e-3)

    out += [d("D", 0), d("D", 1), dH(0), dH(1)]
    return tuple(out)


def build_rows(p_grid):
    try:
        import CoolProp  # noqa: F401
        return [_coolprop_row(p) for p in p_grid], "CoolProp"
    except ImportError:
        corr = _Correlations()
        return [corr.row(p) for p in p_grid], "anchored correlations"


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("out")
    ap.add_argument("--pmin", type=float, default=100.0)
    ap.add_argument("--pmax", type=float, default=1000.0)
    ap.add_argument("--step", type=float, default=2.0)
    args = ap.parse_args(argv)

    n = int(round((args.pmax - args.pmin) / args.step)) + 1
    p_grid = args.pmin + args.step * np.arange(n)
    rows, source = build_rows(p_grid)

    arr = np.asarray(rows)
    T, rl, rv, hl, hv = arr[:, 1], arr[:, 2], arr[:, 3], arr[:, 4], arr[:, 5]
    assert np.all(np.diff(T) > 0), "T_sat must increase with p"
    assert np.all(rl > rv), "liquid must stay denser than vapour"
    assert np.all(hv > hl), "latent heat must stay positive"

    with open(args.out, "w") as f:
        f.write(",".join(COLUMNS) + "\n")
        for r in rows:
            f.write(",".join(f"{v:.9g}" for v in r) + "\n")
    print(f"wrote {len(rows)} rows [{args.pmin}, {args.pmax}] kPa "
          f"(source: {source})")
    i0, i1 = 0, len(rows) - 1
    print(f"  T({p_grid[i0]:.0f})={T[i0]:.3f} K  T({p_grid[i1]:.0f})="
          f"{T[i1]:.3f} K  rho_v span [{rv[i0]:.3f}, {rv[i1]:.3f}]")


if __name__ == "__main__":
    main()
