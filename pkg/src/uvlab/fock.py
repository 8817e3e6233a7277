"""Truncated boson x fermion Fock spaces and their canonical operators."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

DEFAULT_DIM_LIMIT = 200_000
ANNIHILATE = "annihilate"
CREATE = "create"


def _graded_lex(M: int, cap: int) -> list[tuple[int, ...]]:
    """Occupation tuples with total <= cap, by total then lexicographically descending."""
    out: list[tuple[int, ...]] = []
    for total in range(cap + 1):
        level = []
        for bars in itertools.combinations(range(total + M - 1), M - 1):
            # stars-and-bars: gaps between bars are the occupations
            edges = (-1,) + bars + (total + M - 1,)
            level.append(tuple(edges[i + 1] - edges[i] - 1 for i in range(M)))
        level.sort(reverse=True)
        out.extend(level)
    return out


@dataclass(frozen=True, eq=False)
class FockBasis:
    """Product basis: boson multi-index (outer) x fermion bitset (inner).

    State s has boson part `bosons[s // 2**M_f]` and fermion bitset `s % 2**M_f`,
    where bit i is the occupation of fermion mode i.
    """
    M_a: int
    M_f: int
    boson_cap: int
    boson_states: np.ndarray
    boson_index: dict = field(repr=False)

    @property
    def n_fermion_states(self) -> int:
        return 1 << self.M_f

    @property
    def dim(self) -> int:
        return len(self.boson_states) * self.n_fermion_states

    @property
    def tag(self) -> tuple[int, int, int]:
        return (self.M_a, self.M_f, self.boson_cap)

    @property
    def states(self) -> list[tuple[tuple[int, ...], int]]:
        F = self.n_fermion_states
        return [(tuple(int(x) for x in b), f) for b in self.boson_states for f in range(F)]

    def index(self, bosons, bits: int) -> int:
        return self.boson_index[tuple(bosons)] * self.n_fermion_states + int(bits)

    def occupations(self) -> tuple[np.ndarray, np.ndarray]:
        """Per-state boson occupations (dim, M_a) and fermion occupations (dim, M_f)."""
        F = self.n_fermion_states
        bos = np.repeat(self.boson_states, F, axis=0)
        bits = np.tile(np.arange(F), len(self.boson_states))
        ferm = (bits[:, None] >> np.arange(self.M_f)[None, :]) & 1
        return bos, ferm

    def boson_totals(self) -> np.ndarray:
        return np.repeat(self.boson_states.sum(axis=1), self.n_fermion_states)


def basis_dimension(M_a: int, M_f: int, boson_cap: int) -> int:
    return math.comb(M_a + boson_cap, boson_cap) * (1 << M_f)


def enumerate_basis(M_a: int, M_f: int, boson_cap: int, dim_limit: int = DEFAULT_DIM_LIMIT) -> FockBasis:
    if min(M_a, M_f, boson_cap) < 0:
        raise ValueError("mode counts and cap must be nonnegative")
    dim = basis_dimension(M_a, M_f, boson_cap)
    if dim > dim_limit:
        raise ValueError(f"basis dimension {dim} exceeds limit {dim_limit}")
    if M_a == 0:
        bos = [()]
    else:
        bos = _graded_lex(M_a, boson_cap)
    arr = np.array(bos, dtype=np.int64).reshape(len(bos), M_a)
    arr.setflags(write=False)
    return FockBasis(M_a, M_f, boson_cap, arr, {b: i for i, b in enumerate(bos)})


class SparseOperator:
    """Complex CSR matrix tied to one basis, with a conservatively tracked Hermitian flag."""

    __slots__ = ("matrix", "hermitian", "tag")

    def __init__(self, matrix, hermitian: bool = False, tag=None):
        m = sp.csr_matrix(matrix, dtype=complex)
        if m.shape[0] != m.shape[1]:
            raise ValueError("operators must be square")
        m.sum_duplicates()
        m.eliminate_zeros()
        self.matrix = m
        self.tag = tag
        if hermitian and hermitian_deviation(m) != 0.0:
            raise ValueError("matrix flagged Hermitian is not exactly Hermitian")
        self.hermitian = bool(hermitian)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def entries(self) -> sp.csr_matrix:
        return self.matrix

    def _check(self, other: "SparseOperator"):
        if not isinstance(other, SparseOperator):
            raise TypeError("operand is not a SparseOperator")
        if other.dim != self.dim or (self.tag is not None and other.tag is not None and self.tag != other.tag):
            raise ValueError(f"basis mismatch: {self.tag}/{self.dim} vs {other.tag}/{other.dim}")
        return self.tag if self.tag is not None else other.tag

    def __add__(self, other):
        tag = self._check(other)
        return SparseOperator(self.matrix + other.matrix, self.hermitian and other.hermitian, tag)

    def __sub__(self, other):
        tag = self._check(other)
        return SparseOperator(self.matrix - other.matrix, self.hermitian and other.hermitian, tag)

    def __neg__(self):
        return SparseOperator(-self.matrix, self.hermitian, self.tag)

    def scale(self, c) -> "SparseOperator":
        c = complex(c)
        return SparseOperator(c * self.matrix, self.hermitian and c.imag == 0, self.tag)

    def __mul__(self, c):
        if isinstance(c, SparseOperator):
            raise TypeError("use @ for operator products")
        return self.scale(c)

    __rmul__ = __mul__

    def __matmul__(self, other):
        tag = self._check(other)
        return SparseOperator(self.matrix @ other.matrix, False, tag)

    def adjoint(self) -> "SparseOperator":
        return SparseOperator(self.matrix.conj().T, self.hermitian, self.tag)

    @property
    def H(self) -> "SparseOperator":
        return self.adjoint()

    def commutator(self, other) -> "SparseOperator":
        tag = self._check(other)
        return SparseOperator(self.matrix @ other.matrix - other.matrix @ self.matrix, False, tag)

    def anticommutator(self, other) -> "SparseOperator":
        tag = self._check(other)
        herm = self.hermitian and other.hermitian
        return SparseOperator(self.matrix @ other.matrix + other.matrix @ self.matrix, herm, tag)

    def toarray(self) -> np.ndarray:
        return self.matrix.toarray()

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.matrix.data), initial=0.0))

    def nnz(self) -> int:
        return self.matrix.nnz

    def __repr__(self):
        return f"SparseOperator(dim={self.dim}, nnz={self.nnz()}, hermitian={self.hermitian})"


def hermitian_deviation(m) -> float:
    diff = sp.csr_matrix(m - m.conj().T)
    return float(np.max(np.abs(diff.data), initial=0.0))


def identity(basis: FockBasis) -> SparseOperator:
    return SparseOperator(sp.identity(basis.dim, dtype=complex, format="csr"), True, basis.tag)


def zero(basis: FockBasis) -> SparseOperator:
    return SparseOperator(sp.csr_matrix((basis.dim, basis.dim), dtype=complex), True, basis.tag)


def diagonal(values, basis: FockBasis) -> SparseOperator:
    values = np.asarray(values)
    return SparseOperator(sp.diags(values.astype(complex), format="csr"), bool(np.all(np.isreal(values))),
                          basis.tag)


def boson_op(j: int, kind: str, basis: FockBasis) -> SparseOperator:
    """a_j or a_j^* with sqrt(n) matrix elements; a_j^* sends cap states to zero."""
    if not 0 <= j < basis.M_a:
        raise ValueError(f"boson mode {j} out of range")
    F = basis.n_fermion_states
    rows, cols, vals = [], [], []
    for b, occ in enumerate(basis.boson_states):
        n = int(occ[j])
        if n == 0:
            continue
        lowered = list(occ)
        lowered[j] -= 1
        target = basis.boson_index[tuple(int(x) for x in lowered)]
        rows.append(target)
        cols.append(b)
        vals.append(math.sqrt(n))
    nb = len(basis.boson_states)
    small = sp.csr_matrix((vals, (rows, cols)), shape=(nb, nb), dtype=complex)
    lower = sp.kron(small, sp.identity(F, format="csr"), format="csr")
    op = SparseOperator(lower, False, basis.tag)
    if kind == ANNIHILATE:
        return op
    if kind == CREATE:
        return op.adjoint()
    raise ValueError(f"unknown kind {kind!r}")


def fermion_op(i: int, kind: str, basis: FockBasis) -> SparseOperator:
    """b_i or b_i^* with Jordan-Wigner sign (-1)^(number of occupied modes below i)."""
    if not 0 <= i < basis.M_f:
        raise ValueError(f"fermion mode {i} out of range")
    F = basis.n_fermion_states
    bits = np.arange(F)
    occupied = (bits >> i) & 1 == 1
    src = bits[occupied]
    below = src & ((1 << i) - 1)
    parity = np.array([bin(int(x)).count("1") & 1 for x in below], dtype=int)
    small = sp.csr_matrix(((1.0 - 2.0 * parity), (src ^ (1 << i), src)), shape=(F, F), dtype=complex)
    nb = len(basis.boson_states)
    lower = sp.kron(sp.identity(nb, format="csr"), small, format="csr")
    op = SparseOperator(lower, False, basis.tag)
    if kind == ANNIHILATE:
        return op
    if kind == CREATE:
        return op.adjoint()
    raise ValueError(f"unknown kind {kind!r}")


def number_operator(basis: FockBasis) -> SparseOperator:
    bos, _ = basis.occupations()
    return diagonal(bos.sum(axis=1).astype(float), basis)


@dataclass
class AlgebraReport:
    dim: int
    car_max: float
    ccr_max_below_cap: float
    mixed_max: float
    boundary_violation_states: list[int]
    boundary_only: bool

    @property
    def ok(self) -> bool:
        return self.car_max <= 1e-12 and self.ccr_max_below_cap <= 1e-12 and self.mixed_max <= 1e-12 \
            and self.boundary_only


def algebra_report(basis: FockBasis) -> AlgebraReport:
    """Exhaustive CAR/CCR/mixed check; CCR is restricted to states below the cap."""
    if basis.dim > 10_000:
        raise ValueError("algebra_report is limited to dim <= 1e4")
    I = identity(basis)
    b = [fermion_op(i, ANNIHILATE, basis) for i in range(basis.M_f)]
    bs = [x.adjoint() for x in b]
    a = [boson_op(j, ANNIHILATE, basis) for j in range(basis.M_a)]
    ast = [x.adjoint() for x in a]

    car = 0.0
    for i in range(basis.M_f):
        for k in range(basis.M_f):
            delta = I if i == k else zero(basis)
            car = max(car, (b[i].anticommutator(bs[k]) - delta).max_abs())
            car = max(car, b[i].anticommutator(b[k]).max_abs())
            car = max(car, bs[i].anticommutator(bs[k]).max_abs())

    below = sp.diags((basis.boson_totals() < basis.boson_cap).astype(complex), format="csr")
    ccr = 0.0
    bad_states: set[int] = set()
    for j in range(basis.M_a):
        for l in range(basis.M_a):
            delta = I if j == l else zero(basis)
            c = a[j].commutator(ast[l]) - delta
            ccr = max(ccr, SparseOperator(c.matrix @ below).max_abs())
            coo = c.matrix.tocoo()
            bad_states.update(int(s) for s in coo.col[np.abs(coo.data) > 1e-12])
            ccr = max(ccr, a[j].commutator(a[l]).max_abs())
            ccr = max(ccr, ast[j].commutator(ast[l]).max_abs())

    mixed = 0.0
    for x in a + ast:
        for y in b + bs:
            mixed = max(mixed, x.commutator(y).max_abs())

    totals = basis.boson_totals()
    boundary_only = all(totals[s] == basis.boson_cap for s in bad_states)
    return AlgebraReport(basis.dim, car, ccr, mixed, sorted(bad_states), boundary_only)
