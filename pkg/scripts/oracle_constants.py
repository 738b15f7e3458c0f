"""Independent high-precision evaluation of the regression constants frozen in the tests.

Nothing here calls the package's schedule, planner or stats code: coefficients,
step counts and thresholds are recomputed from their closed forms in 50-digit
arithmetic.  Run it and compare against the literals in tests/.
"""

import mpmath as mp

mp.mp.dps = 50


def odd_schedule(p, k):
    e = mp.mpf(2) ** (mp.mpf(k + 1) / (2 * p + k + 1))
    r = e / (4 * (2 - e))
    return r, (2 * r) ** (mp.mpf(1) / (k + 1)), (mp.mpf(1) / 4 + r) ** (mp.mpf(1) / (k + 1))


def even_schedule(p, k):
    e = mp.mpf(4) ** (mp.mpf(k + 1) / (2 * p + k + 1))
    s = e / (4 * (4 - e))
    return s, (4 * s) ** (mp.mpf(1) / (k + 1)), (mp.mpf(1) / 4 + s) ** (mp.mpf(1) / (k + 1))


def odd_k1_abs_sum(p):
    """Sum of |coefficients| of the odd k=1 recursion, tracked through the six copies."""
    s = mp.mpf(4)
    for q in range(1, p):
        _, b, g = odd_schedule(q, 1)
        s = 4 * g * s + 2 * b * s
    return s


def steps(n, q, lam, t, eps, p2, k):
    nu = p2 + k + 1
    x = mp.e * n * q * lam * t / mp.mpf(nu) ** (mp.mpf(1) / (k + 1))
    return int(mp.ceil(x ** (k + 1 + mp.mpf((k + 1) ** 2) / p2) / mp.mpf(eps) ** (mp.mpf(k + 1) / p2)))


def threshold(n, q, lam, t, p2, k):
    nu = p2 + k + 1
    return (mp.e / mp.mpf(nu) ** (mp.mpf(1) / (k + 1))) ** nu * mp.log(2) ** p2 * (n * q * lam * t) ** (k + 1)


def main():
    r, b, g = odd_schedule(1, 1)
    print("odd p=1 k=1", mp.nstr(r, 17), mp.nstr(b, 17), mp.nstr(g, 17))
    s, mu, nu = even_schedule(1, 2)
    print("even p=1 k=2", mp.nstr(s, 17), mp.nstr(mu, 17), mp.nstr(nu, 17))
    print("xi_2", mp.nstr(mp.mpf(2) ** (-mp.mpf(1) / 3), 17))

    # canonical instance: the 24-term k=1 formula, order 5 (p2 = 3)
    n = 24
    q = odd_k1_abs_sum(2) / n
    print("canonical Q", mp.nstr(q, 17))
    print("canonical r", steps(n, q, 2, 1, mp.mpf("1e-6"), 3, 1))
    print("canonical r at eps=1e-3", steps(n, q, 2, 1, mp.mpf("1e-3"), 3, 1))
    print("canonical threshold", mp.nstr(threshold(n, q, 2, 1, 3, 1), 17))

    # symmetrized k=1 formulas: Q equals that of the unsymmetrized one divided by sqrt 2
    best = None
    for p in range(1, 6):
        nn = 8 * 6 ** (p - 1)
        qq = odd_k1_abs_sum(p) / (4 * 6 ** (p - 1)) / mp.sqrt(2)
        rr = steps(nn, qq, 2, 1, mp.mpf("1e-6"), 2 * p, 1)
        cost = nn * rr
        print(f"nestf p={p} N={nn} r={rr} n_exp={cost}")
        if best is None or cost < best[1]:
            best = (2 * p, cost)
    print("canonical optimal (p2, n_exp)", best)


if __name__ == "__main__":
    main()
