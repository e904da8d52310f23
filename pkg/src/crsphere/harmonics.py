"""Bigraded spherical harmonics on S^{2n+1} with exact arithmetic.

Functions are ambient polynomials in z_1..z_{n+1}, zbar_1..zbar_{n+1}
restricted to the unit sphere (m = n + 1 complex variables; no t variable).
The normalized surface measure integrates monomials exactly:

    int z^A zbar^B dsigma = delta_AB * n! A! / (n + |A|)!

H_{p,q} is the space of ambient-harmonic polynomials of bidegree (p, q);
its restriction blocks give the joint eigenspaces of the sphere operators.
Blocks are built as the exact nullspace of the ambient Laplacian
sum_j d^2/dz_j dzbar_j on bidegree-(p, q) monomials, then orthogonalized by
classical Gram-Schmidt (exact arithmetic makes the classical variant fine).

Basis elements are stored unnormalized with their exact squared norm; the
normalized element is poly / sqrt(norm2).  Coefficients stay Gaussian
rational: blocks with p > q are rational, the mirror blocks are their
conjugates, and the diagonal blocks p = q are built from real-valued
combinations so that conjugation fixes the chosen basis elementwise.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

from .errors import CapExceededError, ConfigError
from .poly import Poly
from .scalars import QI, qi

BASIS_CACHE_VERSION = 1


# ---------------------------------------------------------------------------
# exact sphere integrals
# ---------------------------------------------------------------------------


@lru_cache(maxsize=None)
def _integral_equal_exponents(n: int, exps: tuple) -> Fraction:
    total = sum(exps)
    num = math.factorial(n)
    for e in exps:
        num *= math.factorial(e)
    return Fraction(num, math.factorial(n + total))


def integral_monomial(n: int, beta: tuple, gamma: tuple) -> Fraction:
    """Exact normalized average of z^beta zbar^gamma over S^{2n+1}."""
    if beta != gamma:
        return Fraction(0)
    return _integral_equal_exponents(n, tuple(beta))


def sphere_integral(f: Poly, n: int):
    """Exact (QI) or floating integral of an ambient polynomial over the sphere.

    Returns QI iff every coefficient is exact, complex otherwise.
    """
    exact = all(isinstance(c, QI) for c in f.terms.values())
    if exact:
        total = QI(0)
        for (a, b, g), c in f.terms.items():
            if a:
                raise ValueError("sphere integrand must be t-free")
            if b == g:
                total = total + c * qi(_integral_equal_exponents(n, tuple(b)))
        return total
    total = 0j
    for (a, b, g), c in f.terms.items():
        if a:
            raise ValueError("sphere integrand must be t-free")
        if b == g:
            total += complex(c) * float(_integral_equal_exponents(n, tuple(b)))
    return total


def inner_sphere(f: Poly, g: Poly, n: int):
    """L2(dsigma) inner product <f, g> = int f conj(g)."""
    return sphere_integral(f * g.conj_fn(), n)


def amb_laplacian(f: Poly) -> Poly:
    """Ambient Laplacian sum_j d/dz_j d/dzbar_j (the 1/4 factor is immaterial)."""
    out = Poly.zero(f.m)
    for j in range(f.m):
        out = out + f.diff_z(j).diff_zbar(j)
    return out


# ---------------------------------------------------------------------------
# block construction
# ---------------------------------------------------------------------------


def monomials_homogeneous(m: int, d: int):
    """Sorted exponent tuples of total degree d in m variables."""
    if m == 1:
        return [(d,)]
    out = []
    for first in range(d, -1, -1):
        for rest in monomials_homogeneous(m - 1, d - first):
            out.append((first,) + rest)
    return sorted(out)


def dim_hpq(n: int, p: int, q: int) -> int:
    """dim H_{p,q} on S^{2n+1}: binom(p+n-1,p) binom(q+n-1,q) (p+q+n)/n."""
    val = Fraction(math.comb(p + n - 1, p) * math.comb(q + n - 1, q) * (p + q + n), n)
    assert val.denominator == 1
    return int(val)


def _nullspace_fractions(matrix, ncols):
    """Exact nullspace basis of a dense Fraction matrix (rows x ncols)."""
    rows = [list(r) for r in matrix]
    nrows = len(rows)
    pivot_cols = []
    r = 0
    for c in range(ncols):
        pivot = None
        for rr in range(r, nrows):
            if rows[rr][c] != 0:
                pivot = rr
                break
        if pivot is None:
            continue
        rows[r], rows[pivot] = rows[pivot], rows[r]
        inv = Fraction(1) / rows[r][c]
        rows[r] = [x * inv for x in rows[r]]
        for rr in range(nrows):
            if rr != r and rows[rr][c] != 0:
                factor = rows[rr][c]
                rows[rr] = [x - factor * y for x, y in zip(rows[rr], rows[r])]
        pivot_cols.append(c)
        r += 1
        if r == nrows:
            break
    free_cols = [c for c in range(ncols) if c not in pivot_cols]
    basis = []
    for fc in free_cols:
        vec = [Fraction(0)] * ncols
        vec[fc] = Fraction(1)
        for i, pc in enumerate(pivot_cols):
            vec[pc] = -rows[i][fc]
        basis.append(vec)
    return basis


def harmonic_block_polys(n: int, p: int, q: int):
    """Rational basis of harmonic bidegree-(p, q) polynomials (unorthogonalized)."""
    m = n + 1
    src = [(b, g) for b in monomials_homogeneous(m, p) for g in monomials_homogeneous(m, q)]
    if p == 0 or q == 0:
        # the Laplacian target is empty; every monomial is harmonic
        return [Poly.monomial(m, 0, b, g) for (b, g) in src]
    tgt = [(b, g) for b in monomials_homogeneous(m, p - 1) for g in monomials_homogeneous(m, q - 1)]
    tgt_index = {key: i for i, key in enumerate(tgt)}
    matrix = [[Fraction(0)] * len(src) for _ in range(len(tgt))]
    for col, (b, g) in enumerate(src):
        for j in range(m):
            if b[j] and g[j]:
                nb = list(b)
                ng = list(g)
                nb[j] -= 1
                ng[j] -= 1
                row = tgt_index[(tuple(nb), tuple(ng))]
                matrix[row][col] += Fraction(b[j] * g[j])
    null = _nullspace_fractions(matrix, len(src))
    polys = []
    for vec in null:
        terms = {}
        for coeff, (b, g) in zip(vec, src):
            if coeff:
                terms[(0, b, g)] = QI(coeff)
        polys.append(Poly(m, terms))
    return polys


def _conj_swap(f: Poly) -> Poly:
    """Swap z and zbar exponents without conjugating coefficients."""
    return Poly(f.m, {(a, g, b): c for (a, b, g), c in f.terms.items()})


def _real_valued_block_basis(polys, n):
    """Rebase a conjugation-stable block (p = q) on real-valued functions.

    Each rational v splits into the real functions (v + sigma v)/2 and
    (v - sigma v)/(2i) where sigma is function conjugation.  The combined
    family spans the block; exact row reduction picks an independent subset.
    """
    m = n + 1
    candidates = []
    for v in polys:
        sv = _conj_swap(v)  # coefficients are rational, so conj(v) = sigma-swap
        sym = (v + sv).scale(QI(Fraction(1, 2)))
        anti = (v - sv).scale(QI(0, Fraction(-1, 2)))
        for cand in (sym, anti):
            if not cand.is_zero():
                candidates.append(cand)
    # independence over Q: coefficients are rational or purely imaginary rational
    keys = sorted({k for cand in candidates for k in cand.terms})
    key_index = {k: i for i, k in enumerate(keys)}
    chosen = []
    rows = []  # reduced rational rows, with leading-entry bookkeeping

    def reduce_vector(vec):
        for row, lead in rows:
            if vec[lead]:
                factor = vec[lead]
                for i in range(len(vec)):
                    vec[i] -= factor * row[i]
        for i, x in enumerate(vec):
            if x:
                inv = Fraction(1) / x
                return [y * inv for y in vec], i
        return None, None

    target = len(polys)
    for cand in candidates:
        vec = [Fraction(0)] * len(keys)
        for k, c in cand.terms.items():
            # components are either purely real or purely imaginary rationals
            vec[key_index[k]] = c.re if c.re else c.im
        red, lead = reduce_vector(vec)
        if red is not None:
            rows.append((red, lead))
            chosen.append(cand)
            if len(chosen) == target:
                break
    if len(chosen) != target:
        raise ConfigError("real rebasing of a diagonal block failed to span")
    return chosen


def gram_schmidt_exact(polys, n):
    """Classical Gram-Schmidt; returns (orthogonal poly, exact squared norm) pairs."""
    out = []
    for v in polys:
        u = v
        for w, w_norm2 in out:
            coeff = inner_sphere(u, w, n) / qi(w_norm2)
            u = u - w.scale(coeff)
        norm2 = inner_sphere(u, u, n)
        assert norm2.im == 0 and norm2.re > 0
        out.append((u, norm2.re))
    return out


@dataclass
class BasisElement:
    poly: Poly
    norm2: Fraction

    def float_coeffs(self):
        scale = 1.0 / math.sqrt(float(self.norm2))
        return {key: complex(c) * scale for key, c in self.poly.terms.items()}


class HarmonicBasis:
    """Orthogonal bases of every H_{p,q}, p + q <= N, with exact Gram data."""

    def __init__(self, n, N, blocks):
        self.n = n
        self.N = N
        self.blocks = blocks
        self.block_order = sorted(blocks, key=lambda pq: (pq[0] + pq[1], pq[0]))
        self.offsets = {}
        off = 0
        for key in self.block_order:
            self.offsets[key] = off
            off += len(blocks[key])
        self.total_dim = off

    @property
    def m(self):
        return self.n + 1

    def block_dim(self, p, q):
        return len(self.blocks[(p, q)])

    def global_index(self, p, q, i):
        return self.offsets[(p, q)] + i

    def index_blocks(self):
        """Yield (p, q, i, global_index) over the whole truncation."""
        for (p, q) in self.block_order:
            off = self.offsets[(p, q)]
            for i in range(len(self.blocks[(p, q)])):
                yield p, q, i, off + i

    def conjugate_permutation(self):
        """Global index permutation realizing function conjugation."""
        perm = [0] * self.total_dim
        for p, q, i, g in self.index_blocks():
            perm[g] = self.global_index(q, p, i)
        return perm

    def degree_mask(self, max_degree):
        mask = []
        for p, q, _, _ in self.index_blocks():
            mask.append(p + q <= max_degree)
        return mask

    # -- construction --------------------------------------------------------

    @classmethod
    def build(cls, n, N, cap=40000, validate=True):
        if n < 1 or N < 0:
            raise ConfigError("need n >= 1 and N >= 0")
        total = sum(dim_hpq(n, p, q) for d in range(N + 1) for p in range(d + 1) for q in [d - p])
        if total > cap:
            raise CapExceededError(f"truncated basis dimension {total} exceeds cap {cap}")
        blocks = {}
        for d in range(N + 1):
            for p in range(d, (d - 1) // 2, -1):
                q = d - p
                raw = harmonic_block_polys(n, p, q)
                if validate and len(raw) != dim_hpq(n, p, q):
                    raise ConfigError(f"block ({p},{q}) dimension {len(raw)} != formula")
                if p == q:
                    raw = _real_valued_block_basis(raw, n)
                ortho = gram_schmidt_exact(raw, n)
                blocks[(p, q)] = [BasisElement(u, n2) for u, n2 in ortho]
                if p != q:
                    blocks[(q, p)] = [
                        BasisElement(el.poly.conj_fn(), el.norm2) for el in blocks[(p, q)]
                    ]
        return cls(n, N, blocks)

    def restrict(self, N):
        """The truncation at a smaller degree, sharing block data."""
        if N > self.N:
            raise ConfigError("restrict only lowers the truncation degree")
        return HarmonicBasis(
            self.n, N, {pq: els for pq, els in self.blocks.items() if pq[0] + pq[1] <= N}
        )

    # -- cache ----------------------------------------------------------------

    @staticmethod
    def cache_filename(n, N):
        return f"basis_n{n}_N{N}_v{BASIS_CACHE_VERSION}_exact.json"

    def save(self, cache_dir):
        os.makedirs(cache_dir, exist_ok=True)
        path = os.path.join(cache_dir, self.cache_filename(self.n, self.N))
        payload = {
            "version": BASIS_CACHE_VERSION,
            "n": self.n,
            "N": self.N,
            "blocks": [
                {
                    "p": p,
                    "q": q,
                    "elements": [
                        {"poly": el.poly.to_jsonable(), "norm2": str(el.norm2)}
                        for el in self.blocks[(p, q)]
                    ],
                }
                for (p, q) in self.block_order
            ],
        }
        with open(path, "w") as fh:
            json.dump(payload, fh, sort_keys=True)
        return path

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            payload = json.load(fh)
        if payload.get("version") != BASIS_CACHE_VERSION:
            raise ConfigError("basis cache version mismatch")
        blocks = {}
        for blk in payload["blocks"]:
            blocks[(blk["p"], blk["q"])] = [
                BasisElement(Poly.from_jsonable(el["poly"]), Fraction(el["norm2"]))
                for el in blk["elements"]
            ]
        return cls(payload["n"], payload["N"], blocks)

    @classmethod
    def load_or_build(cls, n, N, cache_dir=None, cap=40000):
        """Build with disk cache; returns (basis, cache_hit)."""
        if cache_dir:
            path = os.path.join(cache_dir, cls.cache_filename(n, N))
            if os.path.exists(path):
                return cls.load(path), True
        basis = cls.build(n, N, cap=cap)
        if cache_dir:
            basis.save(cache_dir)
        return basis, False


# ---------------------------------------------------------------------------
# harmonic decomposition of ambient polynomials
# ---------------------------------------------------------------------------


def _norm_poly(m):
    out = Poly.zero(m)
    for j in range(m):
        out = out + Poly.var_z(m, j) * Poly.var_zbar(m, j)
    return out


def _scalar_like(poly, frac: Fraction):
    for c in poly.terms.values():
        if isinstance(c, QI):
            return qi(frac)
        return complex(float(frac))
    return qi(frac)


def decompose_bihomogeneous(g: Poly, m: int, a: int, b: int):
    """Write a bidegree-(a, b) polynomial as sum_k |z|^{2k} h_k, h_k harmonic.

    Returns {k: h_k}.  Uses Delta(|z|^{2k} h) = k (m + deg h + k - 1) |z|^{2k-2} h
    for harmonic h, so the expansion of Delta g determines h_k for k >= 1 and
    h_0 comes out by subtraction.
    """
    if g.is_zero():
        return {}
    if a == 0 or b == 0:
        return {0: g}
    lap = amb_laplacian(g)
    inner = decompose_bihomogeneous(lap, m, a - 1, b - 1)
    r2 = _norm_poly(m)
    parts = {}
    remainder = g
    for j, w in inner.items():
        k = j + 1
        c = Fraction(k * (m + a + b - k - 1))
        h = w.scale(_scalar_like(w, Fraction(1) / c))
        parts[k] = h
        remainder = remainder - (r2**k) * h
    if not remainder.is_zero():
        parts[0] = remainder
    return parts


def sphere_reduce(f: Poly):
    """Harmonic components of the sphere restriction of f.

    On the sphere |z|^2 = 1, so every |z|^{2k} h_k contributes h_k to the
    block of its own bidegree.  Returns {(p, q): harmonic poly}.
    """
    m = f.m
    out = {}
    for (a, b), comp in f.bidegree_components().items():
        for k, h in decompose_bihomogeneous(comp, m, a, b).items():
            key = (a - k, b - k)
            cur = out.get(key)
            out[key] = h if cur is None else cur + h
    return {k: v for k, v in out.items() if not v.is_zero()}


def expand_in_basis(f: Poly, basis: HarmonicBasis, drop_excess=True):
    """Exact expansion data of f over the basis.

    Returns {(p, q): [coefficient of the unnormalized element v_i]} where the
    coefficient is <h, v_i> / norm2_i; the normalized coefficient is that
    times sqrt(norm2_i).  Blocks beyond the truncation are dropped when
    drop_excess, else reported as an error.
    """
    n = basis.n
    comps = sphere_reduce(f)
    out = {}
    for (p, q), h in comps.items():
        if (p, q) not in basis.blocks:
            if drop_excess:
                continue
            raise ConfigError(f"component ({p},{q}) beyond truncation N={basis.N}")
        coeffs = []
        for el in basis.blocks[(p, q)]:
            val = inner_sphere(h, el.poly, n)
            coeffs.append(val / qi(el.norm2) if isinstance(val, QI) else val / float(el.norm2))
        out[(p, q)] = coeffs
    return out
