"""Neumann resolvent series: raw expansion, the G-set catalog, admissible words and regrouping."""

from __future__ import annotations

import itertools
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Callable, Iterable, Sequence

import numpy as np

from .counterterm import k1_constant, k2_constant, k3_constant
from .hamiltonian import HamiltonianParts, block, c_lambda
from .linalg import operator_norm

DEFAULT_MAX_WEIGHT = 12
DEFAULT_MAX_ORDER = 24
RULES = ("theorem", "alternative")
READINGS = ("corrected", "literal")

# forbidden successor pairs (j, next j)
FORBIDDEN = {
    "theorem": frozenset({(1, 2), (1, 4), (3, 2)}),
    "alternative": frozenset({(1, 2), (1, 4), (4, 2)}),
}

# raw letters of -(H_I - E2): index -> (sign, block tag, kernel); letter 5 is +E2
RAW_LETTERS = {1: (-1, "ab", 2), 2: (-1, "a*b*", 2), 3: (-1, "ab*", 1), 4: (-1, "a*b", 1)}
RAW_WEIGHT = {1: 1, 2: 1, 3: 1, 4: 1, 5: 2}
_LETTER_OF = {(tag, sharp): j for j, (_, tag, sharp) in RAW_LETTERS.items()}


@dataclass(frozen=True)
class Variant:
    """sign * op_1 R0 op_2 R0 ... op_m, plus E2 * 1 when `plus_e2`."""
    sign: int
    ops: tuple[tuple[str, int], ...]
    plus_e2: bool = False

    @property
    def label(self) -> str:
        core = " R0 ".join(f"H^{{{tag}}}(G{sharp})" for tag, sharp in self.ops)
        text = ("-" if self.sign < 0 else "") + core
        return text + (" + E2" if self.plus_e2 else "")

    def raw_expansion(self) -> Counter:
        """Coefficients on words over the raw letters; foreign blocks become ('X', tag, sharp)."""
        word = []
        coeff = self.sign
        for op in self.ops:
            if op in _LETTER_OF:
                j = _LETTER_OF[op]
                word.append(j)
                coeff *= RAW_LETTERS[j][0]
            else:
                word.append(("X",) + op)
        out = Counter({tuple(word): coeff})
        if self.plus_e2:
            out[(5,)] += 1
        return out


@dataclass(frozen=True)
class GSet:
    j: int
    variants: tuple[Variant, ...]
    nu: Fraction
    mu: Fraction
    n_op: int


@dataclass(frozen=True)
class GSetCatalog:
    sets: dict
    reading: str

    def __getitem__(self, j: int) -> GSet:
        return self.sets[j]

    def n_Op(self, j: int) -> int:
        return self.sets[j].n_op

    def exponents(self, j: int) -> tuple[Fraction, Fraction]:
        return self.sets[j].nu, self.sets[j].mu

    def variant_count(self) -> int:
        return sum(len(s.variants) for s in self.sets.values())

    def letters(self) -> list[tuple[int, int]]:
        return [(j, v) for j in sorted(self.sets) for v in range(len(self.sets[j].variants))]


@lru_cache(maxsize=None)
def catalog(reading: str = "corrected") -> GSetCatalog:
    """The seven block sets with their resolvent exponents and kernel counts.

    `reading="literal"` reproduces the kernel labels exactly as printed, where the
    second words of G6 carry G2 on the first ab* block and G1 on the a*b* block.
    """
    if reading not in READINGS:
        raise ValueError(f"reading must be one of {READINGS}")
    F = Fraction
    g6b = ((("ab*", 2), ("ab*", 1), ("a*b*", 1)) if reading == "literal"
           else (("ab*", 1), ("ab*", 1), ("a*b*", 2)))
    sets = {
        1: GSet(1, (Variant(-1, (("ab", 2),)), Variant(-1, (("ab*", 1),))), F(0), F(3, 4), 1),
        2: GSet(2, (Variant(-1, (("a*b*", 2),)), Variant(-1, (("a*b", 1),))), F(3, 4), F(0), 1),
        3: GSet(3, (Variant(1, (("ab", 2), ("a*b", 1))),), F(0), F(1, 2), 2),
        4: GSet(4, (Variant(1, (("ab*", 1), ("a*b*", 2))),), F(1, 2), F(0), 2),
        5: GSet(5, (Variant(1, (("ab", 2), ("a*b*", 2)), plus_e2=True),
                    Variant(1, (("ab*", 1), ("a*b", 1)))), F(1, 4), F(1, 4), 2),
        6: GSet(6, (Variant(-1, (("ab", 2), ("ab*", 1), ("a*b*", 2))),
                    Variant(-1, g6b)), F(0), F(1, 4), 3),
        7: GSet(7, (Variant(-1, (("ab", 2), ("a*b", 1), ("a*b*", 2))),
                    Variant(-1, (("ab", 2), ("a*b", 1), ("a*b", 1)))), F(1, 4), F(0), 3),
    }
    return GSetCatalog(sets, reading)


Letter = tuple[int, int]  # (set index j, variant index)


@dataclass(frozen=True)
class AdmissibleSequence:
    terms: tuple[Letter, ...]

    @property
    def js(self) -> tuple[int, ...]:
        return tuple(j for j, _ in self.terms)

    def total_weight(self, cat: GSetCatalog | None = None) -> int:
        cat = cat or catalog()
        return sum(cat.n_Op(j) for j, _ in self.terms)


def allowed_pair(i: int, j: int, rule: str = "theorem", cat: GSetCatalog | None = None) -> bool:
    """Adjacency rule plus exponent compatibility mu_i + nu_j <= 1."""
    if rule not in RULES:
        raise ValueError(f"rule must be one of {RULES}")
    cat = cat or catalog()
    if (i, j) in FORBIDDEN[rule]:
        return False
    return cat[i].mu + cat[j].nu <= 1


def is_admissible(js: Sequence[int], rule: str = "theorem", cat: GSetCatalog | None = None) -> bool:
    cat = cat or catalog()
    if js and (cat[js[0]].nu > 1 or cat[js[-1]].mu > 1):
        return False
    return all(allowed_pair(a, b, rule, cat) for a, b in zip(js, js[1:]))


def enumerate_sequences(k: int, rule: str = "theorem", reading: str = "corrected",
                        max_weight: int = DEFAULT_MAX_WEIGHT) -> list[AdmissibleSequence]:
    """All admissible words of total weight exactly k, in lexicographic order of (j, variant)."""
    if k < 0:
        raise ValueError("k must be nonnegative")
    if k > max_weight:
        raise ValueError(f"k={k} exceeds the depth limit {max_weight}")
    cat = catalog(reading)
    letters = cat.letters()
    out: list[AdmissibleSequence] = []

    def grow(prefix: list[Letter], remaining: int):
        if remaining == 0:
            out.append(AdmissibleSequence(tuple(prefix)))
            return
        for j, v in letters:
            w = cat.n_Op(j)
            if w > remaining:
                continue
            if prefix and not allowed_pair(prefix[-1][0], j, rule, cat):
                continue
            if not prefix and cat[j].nu > 1:
                continue
            prefix.append((j, v))
            grow(prefix, remaining - w)
            prefix.pop()

    grow([], k)
    return out


def count_sequences(k: int, rule: str = "theorem", reading: str = "corrected") -> int:
    """Number of admissible words of weight k via a transfer recursion (no listing)."""
    cat = catalog(reading)
    js = sorted(cat.sets)
    # ending[w][j]: words of weight w ending in set j
    ending = [dict.fromkeys(js, 0) for _ in range(k + 1)]
    for w in range(1, k + 1):
        for j in js:
            n = cat.n_Op(j)
            if n > w:
                continue
            mult = len(cat[j].variants)
            prev = 1 if w == n else sum(ending[w - n][i] for i in js if allowed_pair(i, j, rule, cat))
            ending[w][j] = mult * prev
    return 1 if k == 0 else sum(ending[k].values())


# ---------------------------------------------------------------- matrix evaluation

@dataclass(eq=False)
class SeriesContext:
    """Dense blocks and free resolvent powers at one z, shared by all terms."""
    parts: HamiltonianParts
    z: complex
    e2: float
    energies: np.ndarray
    blocks: dict = field(default_factory=dict)

    def r0(self, alpha) -> np.ndarray:
        return np.power(self.energies - self.z, -float(alpha))

    def op(self, tag: str, sharp: int) -> np.ndarray:
        key = (tag, sharp)
        if key not in self.blocks:
            self.blocks[key] = block(tag, self.parts.km.side(sharp), self.parts.basis).toarray()
        return self.blocks[key]

    def variant(self, var: Variant) -> np.ndarray:
        r0 = self.r0(1)
        out = None
        for tag, sharp in var.ops:
            m = self.op(tag, sharp)
            out = m.copy() if out is None else (out * r0[None, :]) @ m
        out = var.sign * out
        if var.plus_e2:
            out = out + self.e2 * np.eye(len(r0))
        return out


def make_context(z: complex, parts: HamiltonianParts, e2: float) -> SeriesContext:
    if complex(z).real >= 0:
        raise ValueError("H0 - z is not invertible for Re z >= 0")
    return SeriesContext(parts, complex(z), float(e2), parts.energies.astype(complex))


def term_matrix(seq: AdmissibleSequence, z: complex, parts: HamiltonianParts, e2: float,
                reading: str = "corrected", ctx: SeriesContext | None = None,
                factor_norms: list | None = None) -> np.ndarray:
    """R0^(1-nu_1) prod_i [(R0^nu_i T_i R0^mu_i) R0^(1 - nu_{i+1} - mu_i)] with nu_{l+1} = 0.

    When `factor_norms` is a list, the norms of the bracketed factors are appended.
    """
    ctx = ctx or make_context(z, parts, e2)
    cat = catalog(reading)
    if not seq.terms:
        return np.diag(ctx.r0(1))
    js = seq.js
    out = np.diag(ctx.r0(1 - cat[js[0]].nu))
    for idx, (j, v) in enumerate(seq.terms):
        nu, mu = cat.exponents(j)
        nxt = cat[js[idx + 1]].nu if idx + 1 < len(js) else Fraction(0)
        T = ctx.variant(cat[j].variants[v])
        factor = ctx.r0(nu)[:, None] * T * ctx.r0(mu)[None, :]
        if factor_norms is not None:
            factor_norms.append(operator_norm(factor))
        out = (out @ factor) * ctx.r0(1 - nxt - mu)[None, :]
    return out


@dataclass
class SeriesResult:
    matrix: np.ndarray
    term_norms: list[float]
    diverged: bool

    @property
    def converged(self) -> bool:
        return not self.diverged


def _divergence(norms: Sequence[float], window: int = 5) -> bool:
    if len(norms) < window:
        return False
    tail = norms[-window:]
    return all(b >= a for a, b in zip(tail, tail[1:])) and tail[-1] > 0


def region_bound(parts: HamiltonianParts) -> float:
    """-25 C_Lambda^2: the series are guaranteed to converge for Re z below this."""
    return -25.0 * c_lambda(parts.km, parts.params) ** 2


def _check_region(z, parts, check_region):
    if check_region and complex(z).real >= region_bound(parts):
        raise ValueError(f"Re z = {complex(z).real} is not below -25 C^2 = {region_bound(parts)}")


def raw_series_partial(z: complex, N: int, parts: HamiltonianParts, e2: float,
                       check_region: bool = True, max_order: int = DEFAULT_MAX_ORDER) -> SeriesResult:
    """R0 sum_{k<=N} [-(H_I - E2) R0]^k."""
    if N < 0 or N > max_order:
        raise ValueError(f"order N={N} outside [0, {max_order}]")
    _check_region(z, parts, check_region)
    ctx = make_context(z, parts, e2)
    r0 = ctx.r0(1)
    V = parts.H_I.toarray() - e2 * np.eye(len(r0))
    step = -(V * r0[None, :])
    term = np.diag(r0)
    total = term.copy()
    norms = [operator_norm(term)]
    for _ in range(N):
        term = term @ step
        total += term
        norms.append(operator_norm(term))
    return SeriesResult(total, norms, _divergence(norms))


def _transfer_terms(ctx: SeriesContext, K: int, rule: str, reading: str) -> list[np.ndarray]:
    """Per-weight sums over admissible words of prod (T R0), grouped by last set."""
    cat = catalog(reading)
    r0 = ctx.r0(1)
    js = sorted(cat.sets)
    P = {j: sum(ctx.variant(v) for v in cat[j].variants) * r0[None, :] for j in js}
    ending: list[dict] = [dict() for _ in range(K + 1)]
    per_weight = []
    for w in range(1, K + 1):
        total = None
        for j in js:
            n = cat.n_Op(j)
            if n > w:
                continue
            if w == n:
                acc = P[j].copy()
            else:
                prev = [ending[w - n][i] for i in js if i in ending[w - n] and allowed_pair(i, j, rule, cat)]
                if not prev:
                    continue
                acc = sum(prev) @ P[j]
            ending[w][j] = acc
            total = acc if total is None else total + acc
        per_weight.append(r0[:, None] * total if total is not None else np.zeros_like(P[1]))
    return per_weight


def reordered_series_partial(z: complex, K: int, parts: HamiltonianParts, e2: float,
                             rule: str = "theorem", reading: str = "corrected", method: str = "transfer",
                             check_region: bool = True, max_weight: int = DEFAULT_MAX_WEIGHT,
                             threads: int = 1) -> SeriesResult:
    """Sum over weights k <= K of the regrouped words.

    `method="transfer"` sums words through a last-set recursion; `method="enumerate"`
    lists every word and evaluates it in split form, in parallel when threads > 1.
    Both give the same matrix; the reduction order is the enumeration order.
    """
    if K < 0 or K > max_weight:
        raise ValueError(f"weight K={K} outside [0, {max_weight}]")
    _check_region(z, parts, check_region)
    ctx = make_context(z, parts, e2)
    total = np.diag(ctx.r0(1))
    norms = [operator_norm(total)]
    if method == "transfer":
        terms = _transfer_terms(ctx, K, rule, reading)
    elif method == "enumerate":
        # fill the block cache before sharing the context across threads
        for tag, sharp in itertools.product(("ab", "a*b*", "a*b", "ab*"), (1, 2)):
            ctx.op(tag, sharp)
        terms = []
        with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
            for k in range(1, K + 1):
                seqs = enumerate_sequences(k, rule, reading, max_weight)
                acc = np.zeros_like(total)
                for m in pool.map(lambda s: term_matrix(s, z, parts, e2, reading, ctx), seqs):
                    acc += m
                terms.append(acc)
    else:
        raise ValueError("method must be 'transfer' or 'enumerate'")
    for t in terms:
        total = total + t
        norms.append(operator_norm(t))
    return SeriesResult(total, norms, _divergence(norms))


def direct_resolvent(z: complex, parts: HamiltonianParts, e2: float) -> np.ndarray:
    """(H - E2 - z)^(-1) by a dense solve."""
    H = parts.H_full.toarray()
    n = H.shape[0]
    return np.linalg.solve(H - (e2 + z) * np.eye(n), np.eye(n, dtype=complex))


def geometric_rate(z: complex, parts: HamiltonianParts) -> tuple[float, float]:
    """(12 M_z ||R0||^(1/4), ||R0||) with M_z the largest of the K-constants at the split exponents."""
    km, params = parts.km, parts.params
    sides = (km.G1, km.G2)
    vals = [k1_constant(z, 0.75, F, params) for F in sides]
    vals += [k2_constant(z, 0.5, F, G, params) for F in sides for G in sides]
    vals += [k3_constant(z, 0.25, F1, F2, F3, params)
             for F1, F2, F3 in itertools.product(sides, repeat=3)]
    r0 = float(np.max(np.abs(1.0 / (parts.energies - z))))
    return 12.0 * max(vals) * r0 ** 0.25, r0


# ---------------------------------------------------------------- regrouping identity

def _concat(a: Counter, b: Counter) -> Counter:
    out: Counter = Counter()
    for wa, ca in a.items():
        for wb, cb in b.items():
            out[wa + wb] += ca * cb
    return out


def raw_words(k: int) -> Counter:
    """Every word over the raw letters 1..5 of weight k, each with coefficient 1."""
    out: Counter = Counter()
    if k == 0:
        out[()] = 1
        return out
    for j, w in RAW_WEIGHT.items():
        if w <= k:
            for word in raw_words(k - w):
                out[(j,) + word] += 1
    return out


def reordered_words(k: int, rule: str = "theorem", reading: str = "corrected") -> Counter:
    """Expansion of all admissible words of weight k back into raw words."""
    cat = catalog(reading)
    total: Counter = Counter()
    for seq in enumerate_sequences(k, rule, reading):
        acc = Counter({(): 1})
        for j, v in seq.terms:
            acc = _concat(acc, cat[j].variants[v].raw_expansion())
        total.update(acc)
    return Counter({w: c for w, c in total.items() if c != 0})


Monomial = tuple[int, ...]


def _shadow(words: Counter, nvars: int = 5) -> Counter:
    """Commutative image: each raw letter becomes its own indeterminate, foreign blocks a sixth."""
    out: Counter = Counter()
    for word, c in words.items():
        exps = [0] * (nvars + 1)
        for letter in word:
            exps[letter - 1 if isinstance(letter, int) else nvars] += 1
        out[tuple(exps)] += c
    return Counter({m: c for m, c in out.items() if c != 0})


def raw_shadow_polynomial(K: int) -> dict[int, Counter]:
    """Coefficients of sum_m (t1+t2+t3+t4+t5)^m by repeated polynomial multiplication, graded by weight."""
    weights = (1, 1, 1, 1, 2)
    unit = tuple([0] * 6)
    power = Counter({unit: 1})
    graded: dict[int, Counter] = {k: Counter() for k in range(K + 1)}
    graded[0][unit] += 1
    for _ in range(K):
        nxt: Counter = Counter()
        for mono, c in power.items():
            for v in range(5):
                m = list(mono)
                m[v] += 1
                if sum(e * w for e, w in zip(m, weights)) <= K:
                    nxt[tuple(m)] += c
        power = nxt
        for mono, c in power.items():
            graded[sum(e * w for e, w in zip(mono, weights))][mono] += c
    return graded


def shadow_check(K: int, rule: str = "theorem", reading: str = "corrected") -> dict[int, bool]:
    """Per weight k <= K: does the regrouped sum reproduce the raw polynomial exactly?"""
    raw = raw_shadow_polynomial(K)
    return {k: _shadow(reordered_words(k, rule, reading)) == +raw[k] for k in range(K + 1)}


def word_check(K: int, rule: str = "theorem", reading: str = "corrected") -> dict[int, bool]:
    """Non-commutative version: each raw word appears exactly once after expansion."""
    return {k: reordered_words(k, rule, reading) == raw_words(k) for k in range(K + 1)}


# ---------------------------------------------------------------- resolvent family

@dataclass
class FamilyReport:
    adjoint_deviation: float
    identity_deviation: float
    approach_deviations: list[float]
    schedule: list[complex]

    @property
    def approach_decreasing(self) -> bool:
        d = self.approach_deviations
        return all(b < a for a, b in zip(d, d[1:]))


def resolvent_family_check(z1: complex, z2: complex, R_provider: Callable[[complex], np.ndarray],
                           probes: Iterable[np.ndarray] | None = None,
                           schedule: Sequence[float] = (1.0, 10.0, 100.0)) -> FamilyReport:
    """Resolvent axioms for R(z) = (z - H')^(-1), where R_provider returns (H' - z)^(-1)."""
    R = lambda z: -np.asarray(R_provider(complex(z)))
    R1, R2 = R(z1), R(z2)
    n = R1.shape[0]
    adj = operator_norm(R1.conj().T - R(np.conj(z1)))
    ident = operator_norm(R1 - R2 - (z2 - z1) * (R1 @ R2))
    if probes is None:
        rng = np.random.default_rng(0)
        vac = np.zeros(n, dtype=complex)
        vac[0] = 1.0
        rand = rng.standard_normal(n) + 1j * rng.standard_normal(n)
        probes = [np.ones(n) / np.sqrt(n), vac, rand / np.linalg.norm(rand)]
    probes = list(probes)
    zs = [complex(s * complex(z1).real, complex(z1).imag) for s in schedule]
    approach = []
    for z in zs:
        Rz = R(z)
        approach.append(max(float(np.linalg.norm(z * (Rz @ psi) - psi)) for psi in probes))
    return FamilyReport(adj, ident, approach, zs)
