"""Zero Q-curvature solver on conformal perturbations of the sphere.

The standard contact form is pseudo-Einstein, so its Q-curvature vanishes
and the transformation law at the critical weight reduces to

    Q_hat = e^{-(n+1) Upsilon} P Upsilon        (theta_hat = e^Upsilon theta).

Everything downstream follows from three facts realized exactly on the
truncation: P kills the pluriharmonic blocks, P is self-adjoint, and the
hatted volume density is e^{(n+1) Upsilon}.  Consequently the total
Q-curvature integral telescopes to the constant-block coefficient of
P Upsilon (zero), a generated Q_hat is always orthogonal to the kernel in
the hatted inner product, and the zero-Q solve is Upsilon = -G Q_hat with
the partial inverse from the parametrix engine.

The conformal factors e^{+-(n+1) Upsilon} are degree-K Taylor polynomials
projected to the truncation; the recorded tail bound quantifies the only
approximation in the pipeline.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import ConfigError, ObstructionError
from .galerkin import (
    GalerkinContext,
    InnerProductWeight,
    full_context,
    taylor_exp_apply,
    taylor_exp_matrix,
)
from .harmonics import HarmonicBasis
from .parametrix import min_nonzero_abs_eigenvalue, spectrum_matrix
from .scalars import QI, parse_qi
from .spectral import SpectralFunction, critical_gjms

DEFAULT_TAYLOR_DEPTH = 12
DEFAULT_OBSTRUCTION_TOL = 1e-8


def kernel_mask(basis: HarmonicBasis):
    return np.array([p * q == 0 for p, q, _, _ in basis.index_blocks()])


def interior_mask(basis: HarmonicBasis, margin=4):
    return np.array([p + q <= basis.N - margin for p, q, _, _ in basis.index_blocks()])


class ContactPerturbation:
    """Conformal exponent Upsilon with its truncation and Taylor depth.

    Upsilon must be real valued; a perturbation built from terms is
    symmetrized ((f + conj f)/2) before validation.
    """

    def __init__(self, basis: HarmonicBasis, upsilon: SpectralFunction,
                 taylor_depth=DEFAULT_TAYLOR_DEPTH, label=""):
        if taylor_depth < 1:
            raise ConfigError("taylor depth must be >= 1")
        if not upsilon.is_real(tol=1e-12):
            raise ConfigError("perturbation exponent must be real valued")
        self.basis = basis
        self.upsilon = upsilon
        self.K = taylor_depth
        self.label = label or "upsilon"
        self._sup = None
        self._mult = None
        self._weight = None

    @classmethod
    def zero(cls, basis, taylor_depth=DEFAULT_TAYLOR_DEPTH):
        return cls(basis, SpectralFunction.zero(basis), taylor_depth, label="0")

    @classmethod
    def from_terms(cls, basis, terms, epsilon=1.0, taylor_depth=DEFAULT_TAYLOR_DEPTH,
                   normalize_sup=False, label=""):
        f = SpectralFunction.from_terms(basis, terms).realized()
        if normalize_sup:
            sup = f.sup_norm_estimate()
            if sup > 0:
                f = f.scale(1.0 / sup)
        return cls(basis, f.scale(epsilon), taylor_depth, label=label)

    @classmethod
    def from_dict(cls, basis, data):
        """Perturbation file: {"terms": [{"p","q","index","coeff"}], "epsilon", ...}."""
        terms = []
        for item in data.get("terms", []):
            c = item["coeff"]
            if isinstance(c, str):
                c = parse_qi(c)
            elif isinstance(c, (list, tuple)):
                c = complex(c[0], c[1])
            elif isinstance(c, (int, float)):
                c = complex(c)
            terms.append((item["p"], item["q"], item.get("index", 0), c))
        return cls.from_terms(
            basis,
            terms,
            epsilon=data.get("epsilon", 1.0),
            taylor_depth=data.get("taylor_depth", DEFAULT_TAYLOR_DEPTH),
            normalize_sup=data.get("normalize_sup", False),
            label=data.get("label", "perturbation"),
        )

    @property
    def n(self):
        return self.basis.n

    @property
    def N(self):
        return self.basis.N

    def is_zero(self):
        return not self.upsilon.coeffs

    def sup_estimate(self):
        if self._sup is None:
            self._sup = self.upsilon.sup_norm_estimate()
        return self._sup

    def exp_tail_bound(self):
        """Taylor tail of e^x at x = (n+1) sup|Upsilon|, |x|^{K+1}/(K+1)! e^|x|."""
        x = (self.n + 1) * self.sup_estimate()
        return x ** (self.K + 1) / math.factorial(self.K + 1) * math.exp(x)

    def multiplier_matrix(self, ctx: GalerkinContext):
        """Galerkin matrix of multiplication by (n+1) Upsilon."""
        if self._mult is None:
            poly = self.upsilon.to_poly_float().scale(float(self.n + 1))
            self._mult = ctx.mult_matrix(poly)
        return self._mult

    def weight(self, ctx: GalerkinContext) -> InnerProductWeight:
        """Gram matrix of the basis under e^{(n+1) Upsilon} dsigma (Taylor depth K)."""
        if self._weight is None:
            M = self.multiplier_matrix(ctx)
            self._weight = InnerProductWeight(
                taylor_exp_matrix(M, self.K),
                taylor_depth=self.K,
                upsilon_label=self.label,
                tail_bound=self.exp_tail_bound(),
            )
        return self._weight


@dataclass
class QData:
    """Q-curvature data of a frame: Q_hat as a truncated spectral function."""

    qhat: SpectralFunction
    frame: ContactPerturbation
    exact: bool
    taylor_depth: int
    tail_bound: float

    def vector(self):
        return self.qhat.to_vector()


def qhat(pert: ContactPerturbation, ctx: GalerkinContext | None = None) -> QData:
    """Q_hat = e^{-(n+1) Upsilon} P Upsilon on the truncation.

    Exact in rational mode whenever P Upsilon vanishes identically (Upsilon
    pluriharmonic or zero); otherwise the conformal factor acts through its
    degree-K Taylor matrix and the result is floating.
    """
    basis = pert.basis
    P = critical_gjms(basis)
    p_ups = pert.upsilon.apply_diagonal(P)
    if p_ups.is_exact and not p_ups.coeffs:
        return QData(SpectralFunction.zero(basis), pert, True, pert.K, 0.0)
    if ctx is None:
        raise ConfigError("a GalerkinContext is required for a non-pluriharmonic exponent")
    M = pert.multiplier_matrix(ctx)
    qvec = taylor_exp_apply(-M, pert.K, p_ups.to_vector())
    return QData(
        SpectralFunction.from_vector(basis, qvec),
        pert,
        False,
        pert.K,
        pert.exp_tail_bound(),
    )


def total_q(qdata: QData, ctx: GalerkinContext | None = None, tol=1e-8):
    """Total Q-curvature integral int Q_hat e^{(n+1) Upsilon} dsigma.

    Computed up to the fixed positive volume constant of theta ^ (dtheta)^n
    (the measure is normalized to mass one).  Returns (value, passed).
    """
    if qdata.exact and not qdata.qhat.coeffs:
        return 0.0, True
    M = qdata.frame.multiplier_matrix(ctx)
    vec = taylor_exp_apply(M, qdata.frame.K, qdata.vector())
    value = float(vec[0].real)
    return value, abs(value) <= tol


@dataclass
class SolveReport:
    solvable: bool
    obstruction_norm: float
    obstruction_norm_interior: float
    kernel_dim: int
    pairings_std: list
    obstruction_norm2_exact: str | None = None
    upsilon_sol: SpectralFunction | None = None
    residual: float | None = None
    condition: float | None = None
    final_q_norm: float | None = None
    notes: dict = field(default_factory=dict)

    def to_jsonable(self):
        out = {
            "solvable": self.solvable,
            "obstruction_norm": self.obstruction_norm,
            "obstruction_norm_interior": self.obstruction_norm_interior,
            "kernel_dim": self.kernel_dim,
            "obstruction_norm2_exact": self.obstruction_norm2_exact,
            "residual": self.residual,
            "condition": self.condition,
            "final_q_norm": self.final_q_norm,
            "notes": self.notes,
        }
        if self.upsilon_sol is not None:
            out["upsilon_sol"] = [
                {"p": p, "q": q, "index": i, "re": complex(c).real, "im": complex(c).imag}
                for p, q, i, c in self.upsilon_sol.terms()
            ]
        return out


def _exact_kernel_norm2(q: SpectralFunction):
    total = QI(0)
    for (p, qq), vals in q.coeffs.items():
        if p * qq == 0:
            for v in vals:
                total = total + v * v.conjugate()
    return total.re


def solvability_check(qdata: QData, ctx: GalerkinContext | None = None,
                      tol=DEFAULT_OBSTRUCTION_TOL, extra_kernel_vectors=None) -> SolveReport:
    """Obstruction of the zero-Q problem: projection of Q_hat onto Ker P.

    The kernel basis is the pluriharmonic coordinate block (the kernel of
    the truncated operator in every frame, since P_hat = e^{-(n+1)Upsilon} P)
    plus any supplied numerically detected kernel vectors.  The obstruction
    norm is measured in the hatted inner product; the solvable flag uses the
    interior blocks so truncation-boundary leakage is not misread as a
    genuine obstruction.  pairings_std records the frame-independent
    pairings against the standard-orthonormal kernel basis.
    """
    basis = qdata.frame.basis
    ker = kernel_mask(basis)
    inter = interior_mask(basis)
    qvec = qdata.vector()

    exact_norm2 = None
    if qdata.exact and qdata.frame.is_zero():
        exact_norm2 = _exact_kernel_norm2(qdata.qhat)

    if qdata.frame.is_zero():
        W = None
        wq = qvec
    else:
        weight = qdata.frame.weight(ctx)
        W = weight.matrix
        wq = W @ qvec

    pairings = wq[ker]
    if W is None:
        obstruction = float(np.linalg.norm(pairings))
        obstruction_int = float(np.linalg.norm(wq[ker & inter]))
    else:
        G = W[np.ix_(ker, ker)]
        sol = scipy.linalg.solve(G, pairings, assume_a="her")
        obstruction = float(math.sqrt(max(np.vdot(pairings, sol).real, 0.0)))
        ki = ker & inter
        Gi = W[np.ix_(ki, ki)]
        pi = wq[ki]
        soli = scipy.linalg.solve(Gi, pi, assume_a="her")
        obstruction_int = float(math.sqrt(max(np.vdot(pi, soli).real, 0.0)))

    kernel_dim = int(ker.sum())
    notes = {"kernel_basis": "pluriharmonic blocks"}
    if extra_kernel_vectors is not None and len(extra_kernel_vectors):
        notes["extra_kernel_vectors"] = int(len(extra_kernel_vectors))
        for v in extra_kernel_vectors:
            extra = abs(np.vdot(v, wq))
            obstruction = math.hypot(obstruction, extra)
        kernel_dim += int(len(extra_kernel_vectors))

    return SolveReport(
        solvable=obstruction_int <= tol,
        obstruction_norm=obstruction,
        obstruction_norm_interior=obstruction_int,
        kernel_dim=kernel_dim,
        pairings_std=[complex(x) for x in pairings],
        obstruction_norm2_exact=None if exact_norm2 is None else str(exact_norm2),
        notes=notes,
    )


def solve_zero_q(qdata: QData, ctx: GalerkinContext | None = None,
                 tol=DEFAULT_OBSTRUCTION_TOL, verify_final=True) -> SolveReport:
    """Upsilon_sol = -G Q_hat, making the final frame e^{Upsilon_sol} theta_hat
    have zero Q-curvature up to the reported residual.

    Raises ObstructionError when the solvability check fails.  In the
    standard frame with exact data the solve is exact on the eigentable; in
    a perturbed frame the partial inverse comes from the weighted spectral
    decomposition of the truncated operator.
    """
    report = solvability_check(qdata, ctx, tol=tol)
    if not report.solvable:
        raise ObstructionError(
            f"Q-datum is obstructed (interior obstruction {report.obstruction_norm_interior:.3e})",
            obstruction_norm=report.obstruction_norm,
        )
    basis = qdata.frame.basis
    P = critical_gjms(basis)

    if qdata.frame.is_zero() and qdata.qhat.is_exact:
        G = P.partial_inverse()
        ups = qdata.qhat.apply_diagonal(G).scale(QI(-1))
        resid_fn = ups.apply_diagonal(P) + qdata.qhat
        # exact residual: nonzero only if Q had kernel components (excluded above)
        resid = resid_fn.norm()
        report.upsilon_sol = ups
        report.residual = float(resid)
        nonzero = [abs(float(v)) for v in P.table.values() if v]
        report.condition = max(nonzero) / min(nonzero) if nonzero else None
        report.notes["mode"] = "exact_diagonal"
    else:
        weight = qdata.frame.weight(ctx)
        P_d = P.to_diag_vector(basis)
        spec = spectrum_matrix(P_d, weight)
        lam, V = spec.eigenvalues, spec.eigenvectors
        ker = np.abs(lam) <= spec.kernel_tol
        inv_lam = np.where(ker, 0.0, 1.0 / np.where(ker, 1.0, lam))
        qvec = qdata.vector()
        coords = V.conj().T @ (weight.matrix @ qvec)
        ups_vec = -(V @ (inv_lam * coords))
        # drop coefficients at relative machine noise; everything downstream
        # (residual, final verification) is recomputed from the pruned solution
        noise = 1e-15 * max(1.0, float(np.max(np.abs(ups_vec), initial=0.0)))
        ups_vec[np.abs(ups_vec) < noise] = 0.0
        # P_hat upsilon + qhat, measured in the hatted norm
        resid_vec = weight.solve(P_d * ups_vec) + qvec
        report.residual = weight.norm(resid_vec)
        mn = min_nonzero_abs_eigenvalue(spec)
        report.condition = float(np.max(np.abs(lam)) / mn) if mn else None
        ups = SpectralFunction.from_vector(basis, ups_vec, prune=0.0).realized()
        report.upsilon_sol = ups
        report.notes["mode"] = "weighted_spectral"
        report.notes["numerical_kernel_dim"] = spec.kernel_dim

    if verify_final and report.upsilon_sol is not None:
        report.final_q_norm = recompute_final_q_norm(qdata, report.upsilon_sol, ctx)
    return report


def recompute_final_q_norm(qdata: QData, upsilon_sol: SpectralFunction,
                           ctx: GalerkinContext | None = None):
    """Norm of the Q-curvature of the final frame e^{Upsilon_sol} theta_hat.

    The transformation law applied to the input Q-datum gives
    Q_final = e^{-(n+1) Upsilon_sol} (Q_hat + P_hat Upsilon_sol); the
    conformal factor needs the full-degree multiplication context because
    the solution can carry components up to the truncation degree.
    """
    basis = qdata.frame.basis
    P = critical_gjms(basis)
    if qdata.frame.is_zero() and qdata.qhat.is_exact and upsilon_sol.is_exact:
        resid = upsilon_sol.apply_diagonal(P) + qdata.qhat
        if not resid.coeffs:
            return 0.0
        resid_vec = resid.to_vector()
    else:
        P_d = P.to_diag_vector(basis)
        p_ups = P_d * upsilon_sol.to_vector()
        if not qdata.frame.is_zero():
            p_ups = qdata.frame.weight(ctx).solve(p_ups)
        resid_vec = p_ups + qdata.vector()
    big = full_context(basis)
    M_sol = big.mult_matrix(upsilon_sol.to_poly_float().scale(float(basis.n + 1)))
    out = taylor_exp_apply(-M_sol, qdata.frame.K, resid_vec)
    return float(np.linalg.norm(out))
