"""High-precision recomputation of the closed-form values frozen in
tests/test_analytic.cpp. Run: python3 tests/oracle/analytic_oracle.py"""

from mpmath import mp, mpf, log, power

mp.dps = 50


def H(q):
    q = mpf(q)
    if q in (0, 1):
        return mpf(0)
    return -q * log(q, 2) - (1 - q) * log(1 - q, 2)


def case(mu, t, tb, eta, pd, f):
    mu, t, tb, eta, pd, f = map(mpf, (mu, t, tb, eta, pd, f))
    T = t * tb * eta
    rb = (mu * T + (1 - mu * T) * pd) * (1 - f)
    q = mpf(1) / 2 * (1 - mu * T) * pd * (1 - f) / rb
    iab = rb * (1 - H(q))
    qp = mpf(1) / 2 * (1 - tb * eta) * pd / (tb * eta + (1 - tb * eta) * pd)
    rbp = rb - (1 - mu * t) * pd * (1 - f)
    return dict(T=T, rb=rb, q=q, iab=iab, qp=qp, rbp=rbp)


def rx(mu, t, tb, eta, pd, v):
    mu, t, tb, eta, pd, v = map(mpf, (mu, t, tb, eta, pd, v))
    tt = t * (1 - tb) * eta
    s1 = mu * tt * (1 + v) / 2
    s2 = mu * tt * (1 - v) / 2
    return s1 + (1 - s1) * pd, s2 + (1 - s2) * pd


def show(name, x):
    print(f"{name:28s} {mp.nstr(x, 17)}")


show("t(0.2,50)", power(10, -mpf("0.2") * 50 / 10))
show("t(0.25,100)", power(10, -mpf("0.25") * 100 / 10))
show("H(0.11)", H(mpf("0.11")))

c = case("0.5", "0.1", "0.9", "0.1", "1e-5", "0.1")
for k in ("rb", "q", "iab", "qp", "rbp"):
    show(f"t=0.1 {k}", c[k])

m1, m2 = rx("0.5", "0.1", "0.9", "0.1", "1e-5", "0.98")
show("Rx_M1 V=0.98", m1)
show("Rx_M2 V=0.98", m2)

# I(B:E) at t=0.1 defaults with p_IR=0.2, p_2c=0
mu, t = mpf("0.5"), mpf("0.1")
ibe = mu * (1 - t) * c["iab"] + mpf("0.2") * c["rbp"] * (1 - H(c["qp"]))
show("I_BE p_ir=0.2", ibe)
show("R p_ir=0.2", c["iab"] - ibe)

# Defaults at 25 km (t = 10^-0.5).
t25 = power(10, -mpf("0.5"))
d = case("0.5", t25, "0.9", "0.1", "1e-5", "0.1")
ibe25 = mpf("0.5") * (1 - t25) * d["iab"]
show("25km rb", d["rb"])
show("25km q", d["q"])
show("25km iab", d["iab"])
show("25km ibe", ibe25)
show("25km R", d["iab"] - ibe25)

# R_opt and BB84
for tv in ("0.1", "0.01", "0.5"):
    tv = mpf(tv)
    ropt = tv * mpf("0.9") * mpf("0.1") * mpf("0.9") / (4 * (1 - tv))
    show(f"R_opt t={mp.nstr(tv,3)}", ropt)
    show(f"R_bb84 t={mp.nstr(tv,3)}", mpf("0.1") * tv * tv / 4)
    show(f"ratio t={mp.nstr(tv,3)}", ropt / (mpf("0.1") * tv * tv / 4))
