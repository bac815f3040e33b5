"""Independent brute-force oracles used by the test suite.

Everything here is written from scratch against the definitions only (no
imports from the package) so that agreement is meaningful.
"""

import math


def det_exact(rows):
    n = len(rows)
    if n == 1:
        return rows[0][0]
    total = 0
    for j in range(n):
        if rows[0][j] == 0:
            continue
        minor = [r[:j] + r[j + 1 :] for r in rows[1:]]
        sign = 1 if j % 2 == 0 else -1
        total += sign * rows[0][j] * det_exact(minor)
    return total


def strict_threshold(T):
    tt = T * T
    k = math.floor(tt)
    if float(k) == tt:
        k -= 1
    return k


def brute_elements(n, T, q=1):
    """All nxn integer matrices with det 1, squared entry sum < T*T,
    congruent to the identity mod q; returned as sorted flat tuples."""
    ksq = strict_threshold(T)
    out = []
    flat = [0] * (n * n)

    def rec(i, acc):
        if i == n * n:
            rows = [flat[r * n : (r + 1) * n] for r in range(n)]
            if det_exact(rows) != 1:
                return
            if q > 1:
                for r in range(n):
                    for c in range(n):
                        want = 1 if r == c else 0
                        if (rows[r][c] - want) % q != 0:
                            return
            out.append(tuple(flat))
            return
        b = math.isqrt(ksq - acc)
        for v in range(-b, b + 1):
            flat[i] = v
            rec(i + 1, acc + v * v)

    if ksq >= n:
        rec(0, 0)
    out.sort()
    return out
