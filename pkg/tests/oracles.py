"""Independent reference implementations used to freeze expected values.

Nothing here imports the package's construction code; each oracle rebuilds the
object from its definition in the most direct (slow) way.
"""

import itertools
import math

import numpy as np
from scipy import integrate


# ---------------------------------------------------------------- Fock space

def fock_states(M_a, M_f, cap):
    """All (boson occupations, fermion bits) pairs with total boson number <= cap."""
    bos = [occ for occ in itertools.product(range(cap + 1), repeat=M_a) if sum(occ) <= cap]
    return [(b, f) for b in bos for f in range(2 ** M_f)]


def ladder_matrices(M_a, M_f, cap, index):
    """Dense a_j and b_i by acting on each labelled state.

    `index(bosons, bits)` maps a label to the position used by the caller, so the
    result can be compared against any basis ordering.
    """
    states = fock_states(M_a, M_f, cap)
    dim = len(states)
    a = [np.zeros((dim, dim)) for _ in range(M_a)]
    b = [np.zeros((dim, dim)) for _ in range(M_f)]
    for bos, bits in states:
        col = index(bos, bits)
        for j in range(M_a):
            n = bos[j]
            if n:
                lowered = bos[:j] + (n - 1,) + bos[j + 1:]
                a[j][index(lowered, bits), col] = math.sqrt(n)
        for i in range(M_f):
            if bits >> i & 1:
                sign = (-1) ** sum(bits >> m & 1 for m in range(i))
                b[i][index(bos, bits ^ (1 << i)), col] = sign
    return a, b


# ---------------------------------------------------------------- admissible words

N_OP = {1: 1, 2: 1, 3: 2, 4: 2, 5: 2, 6: 3, 7: 3}
VARIANTS = {1: 2, 2: 2, 3: 1, 4: 1, 5: 2, 6: 2, 7: 2}
NU_MU = {1: (0, 0.75), 2: (0.75, 0), 3: (0, 0.5), 4: (0.5, 0), 5: (0.25, 0.25), 6: (0, 0.25), 7: (0.25, 0)}
FORBIDDEN_THEOREM = {(1, 2), (1, 4), (3, 2)}
FORBIDDEN_ALTERNATIVE = {(1, 2), (1, 4), (4, 2)}


def brute_force_count(k, forbidden=FORBIDDEN_THEOREM):
    """Generate every set-index word of length <= k and keep the admissible ones of weight k."""
    if k == 0:
        return 1
    total = 0
    for length in range(1, k + 1):
        for word in itertools.product(range(1, 8), repeat=length):
            if sum(N_OP[j] for j in word) != k:
                continue
            pairs = list(zip(word, word[1:]))
            if any(p in forbidden for p in pairs):
                continue
            if any(NU_MU[a][1] + NU_MU[b][0] > 1 for a, b in pairs):
                continue
            total += math.prod(VARIANTS[j] for j in word)
    return total


# ---------------------------------------------------------------- counterterm

def e2_dblquad_1d(Lambda, p=0.5, n=1, m_b=1.0, m_f=1.0, coupling=1.0):
    """Continuum counterterm in d=1 with ball-indicator f and indicator chi, by nested adaptive quadrature.

    g(x) = n/2 on |x| <= 1/n, so |G2(k,q)|^2 = (n/2)^2 / omega_a(q)^(2p) on the strip |k+q| <= 1/n.
    """
    wa = lambda q: math.sqrt(q * q + m_b * m_b)
    wb = lambda k: math.sqrt(k * k + m_f * m_f)
    amp = (coupling * n / 2.0) ** 2

    def inner(q):
        lo, hi = max(-Lambda, -q - 1.0 / n), min(Lambda, -q + 1.0 / n)
        if hi <= lo:
            return 0.0
        val, _ = integrate.quad(lambda k: 1.0 / (wb(k) + wa(q)), lo, hi, epsabs=1e-13, epsrel=1e-12)
        return amp * val / wa(q) ** (2 * p)

    pts = [-Lambda + 1.0 / n, Lambda - 1.0 / n, 0.0]
    val, _ = integrate.quad(inner, -Lambda, Lambda, points=pts, epsabs=1e-12, epsrel=1e-11, limit=400)
    return -val


# ---------------------------------------------------------------- small closed forms

def two_by_two_ground(coupling_entry, omega):
    """Lowest eigenvalue of [[0, c], [conj c, omega]]."""
    return float(np.linalg.eigvalsh(np.array([[0.0, coupling_entry], [np.conj(coupling_entry), omega]]))[0])
