"""Independent scalar oracles for the S2 test instance.

Every quantity is recomputed from the scalar formulas with exact rational
arithmetic (sympy) or high-precision bisection (mpmath). Values printed here
are frozen into the C++ unit tests.
"""
import mpmath as mp
import sympy as sp

mp.mp.dps = 40

# S2: n1 = n2 = k = 1
A11, A12, A21, A22 = 0, 1, 1, -1
B1, B2 = 1, 1
C11, C12, C21, C22 = sp.Rational(1, 5), sp.Rational(1, 10), sp.Rational(1, 10), sp.Rational(1, 2)
D1, D2 = sp.Rational(1, 10), sp.Rational(1, 5)
Q11, Q12, Q22, R = 1, 0, 1, 1

ia = sp.Rational(1, A22)
As = A11 - A12 * ia * A21
Bs = B1 - A12 * ia * B2
C1s = C11 - C12 * ia * A21
C2s = C21 - C22 * ia * A21
D1s = D1 - C12 * ia * B2
D2s = D2 - C22 * ia * B2
Qs = Q11 - Q12 * ia * A21 - A21 * ia * Q12 + A21 * ia * Q22 * ia * A21
Ls = B2 * ia * (Q22 * ia * A21 - Q12)
Rs = R + B2 * ia * Q22 * ia * B2
print("reduced:", dict(As=As, Bs=Bs, C1s=C1s, C2s=C2s, D1s=D1s, D2s=D2s, Qs=Qs, Ls=Ls, Rs=Rs))


def are_residual(p, p11):
    p = mp.mpf(p)
    num = B2 * p + D2 * p * C22 + D1 * p11 * C12
    den = R + D1**2 * p11 + D2**2 * p
    return 2 * A22 * p + C22**2 * p + C12**2 * p11 + Q22 - num**2 / den


def bisect(p11):
    lo, hi = mp.mpf(0), mp.mpf(10)
    assert are_residual(lo, p11) > 0 > are_residual(hi, p11)
    for _ in range(200):
        mid = (lo + hi) / 2
        if are_residual(mid, p11) > 0:
            lo = mid
        else:
            hi = mid
    return (lo + hi) / 2


for p11 in (0, mp.mpf("0.5"), 1):
    print("h2 S2 P11=", p11, mp.nstr(bisect(p11), 20))

print("h2' S2 P11=0:", mp.nstr(mp.mpf(1) / mp.mpf("1.75"), 20))

s1 = mp.sqrt(mp.mpf("0.75")) * mp.tanh(mp.sqrt(3))
print("S1 Pbar11(0):", mp.nstr(s1, 20))
r = mp.sqrt(2)
print("S1 Pbar12(0):", mp.nstr((s1 * (2 - r) + (r - 1)) / r, 20))
print("S1 Pbar12(T):", mp.nstr((r - 1) / r, 20))
print("S1 F1bar(0):", mp.nstr(-(s1 + (s1 * (2 - r) + (r - 1)) / r), 20))
