"""Dirichlet-based uncertainty quantities with closed-form gradients.

All entropies are in nats. A model's logits are mapped to Dirichlet
concentration parameters, whose differential entropy serves as the
distributional-uncertainty measure; the Dirichlet mean is the predicted
class distribution.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import special as sp

ALPHA_FLOOR = 1e-12


def lgamma(x: float) -> float:
    """ln Gamma(x) for x > 0."""
    if not np.isfinite(x) or x <= 0:
        raise ValueError(f"lgamma requires finite x > 0, got {x}")
    return float(sp.gammaln(x))


def digamma(x: float) -> float:
    """psi(x) for x > 0."""
    if not np.isfinite(x) or x <= 0:
        raise ValueError(f"digamma requires finite x > 0, got {x}")
    return float(sp.digamma(x))


def trigamma(x: float) -> float:
    """psi_1(x) for x > 0."""
    if not np.isfinite(x) or x <= 0:
        raise ValueError(f"trigamma requires finite x > 0, got {x}")
    return float(sp.polygamma(1, x))


@dataclass(frozen=True)
class DirichletParams:
    """Concentration vector alpha (all entries > 0) and its sum alpha0."""

    alpha: np.ndarray
    alpha0: float = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        alpha = np.asarray(self.alpha, dtype=float)
        if alpha.ndim != 1 or alpha.size < 2:
            raise ValueError("alpha must be a 1-D vector with K >= 2")
        if not np.all(np.isfinite(alpha)) or np.any(alpha <= 0):
            raise ValueError("alpha entries must be finite and positive")
        alpha = np.maximum(alpha, ALPHA_FLOOR)
        object.__setattr__(self, "alpha", alpha)
        total = float(alpha.sum())
        if self.alpha0 is None:
            object.__setattr__(self, "alpha0", total)
        elif abs(self.alpha0 - total) > 1e-12 * max(1.0, abs(total)):
            raise ValueError("alpha0 must equal sum(alpha)")

    @property
    def k(self) -> int:
        return self.alpha.size


@dataclass(frozen=True)
class SimplexVector:
    """Probability vector: nonnegative entries summing to one."""

    p: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.p, dtype=float)
        if p.ndim != 1 or p.size < 1:
            raise ValueError("p must be a nonempty 1-D vector")
        if np.any(p < 0) or np.any(p > 1):
            raise ValueError("entries must lie in [0, 1]")
        if abs(p.sum() - 1.0) > 1e-12 * p.size:
            raise ValueError("entries must sum to 1")
        object.__setattr__(self, "p", p)

    @property
    def k(self) -> int:
        return self.p.size


def alpha_from_logits(logits, mapping: str = "relu_plus_one") -> DirichletParams:
    """Map raw logits to Dirichlet concentrations.

    relu_plus_one: alpha_k = max(0, f_k) + 1
    exp_relu:      alpha_k = exp(max(0, f_k))
    """
    f = np.asarray(logits, dtype=float)
    if f.ndim != 1 or f.size < 2:
        raise ValueError("logits must be a 1-D vector with K >= 2")
    if not np.all(np.isfinite(f)):
        raise ValueError("logits must be finite")
    if mapping == "relu_plus_one":
        alpha = np.maximum(f, 0.0) + 1.0
    elif mapping == "exp_relu":
        alpha = np.exp(np.maximum(f, 0.0))
    else:
        raise ValueError(f"unknown alpha mapping: {mapping}")
    return DirichletParams(alpha)


def alpha_mapping_jacobian_diag(logits, mapping: str = "relu_plus_one") -> np.ndarray:
    """d alpha_k / d f_k (the mapping is elementwise, so the Jacobian is diagonal)."""
    f = np.asarray(logits, dtype=float)
    active = (f > 0).astype(float)
    if mapping == "relu_plus_one":
        return active
    if mapping == "exp_relu":
        return active * np.exp(np.maximum(f, 0.0))
    raise ValueError(f"unknown alpha mapping: {mapping}")


def diff_entropy(d: DirichletParams) -> float:
    """Differential entropy of Dir(alpha); higher means flatter."""
    a, a0 = d.alpha, d.alpha0
    return float(
        np.sum(sp.gammaln(a))
        - sp.gammaln(a0)
        - np.sum((a - 1.0) * (sp.digamma(a) - sp.digamma(a0)))
    )


def diff_entropy_grad(d: DirichletParams) -> np.ndarray:
    """d h / d alpha_k = -(alpha_k - 1) psi_1(alpha_k) + (alpha0 - K) psi_1(alpha0)."""
    a, a0 = d.alpha, d.alpha0
    return -(a - 1.0) * sp.polygamma(1, a) + (a0 - d.k) * sp.polygamma(1, a0)


def expected_categorical(d: DirichletParams) -> SimplexVector:
    """Mean of the Dirichlet: p_k = alpha_k / alpha0."""
    return SimplexVector(d.alpha / d.alpha0)


def expected_data_entropy(d: DirichletParams) -> float:
    """E_mu[H(Cat(mu))] = -sum_k (alpha_k/alpha0) (psi(alpha_k+1) - psi(alpha0+1))."""
    a, a0 = d.alpha, d.alpha0
    return float(-np.sum((a / a0) * (sp.digamma(a + 1.0) - sp.digamma(a0 + 1.0))))


def total_uncertainty(d: DirichletParams) -> float:
    """Entropy of the expected categorical."""
    return categorical_entropy(expected_categorical(d))


def mutual_information(d: DirichletParams) -> float:
    """Distributional spread: total uncertainty minus expected data entropy."""
    return total_uncertainty(d) - expected_data_entropy(d)


def categorical_entropy(p: SimplexVector) -> float:
    """-sum p_k ln p_k with 0 ln 0 := 0."""
    q = p.p
    nz = q > 0
    return float(-np.sum(q[nz] * np.log(q[nz])))


def kl_categorical(p: SimplexVector, q: SimplexVector) -> float:
    """KL(p || q) in nats; requires q > 0 on the support of p."""
    if p.k != q.k:
        raise ValueError("length mismatch")
    sup = p.p > 0
    if np.any(q.p[sup] <= 0):
        raise ValueError("q must be positive wherever p is")
    return float(np.sum(p.p[sup] * (np.log(p.p[sup]) - np.log(q.p[sup]))))


def kl_dirichlet(a: DirichletParams, b: DirichletParams) -> float:
    """KL(Dir(a) || Dir(b))."""
    if a.k != b.k:
        raise ValueError("dimension mismatch")
    aa, bb = a.alpha, b.alpha
    return float(
        sp.gammaln(a.alpha0)
        - np.sum(sp.gammaln(aa))
        - sp.gammaln(b.alpha0)
        + np.sum(sp.gammaln(bb))
        + np.sum((aa - bb) * (sp.digamma(aa) - sp.digamma(a.alpha0)))
    )


def kl_dirichlet_grad_first(a: DirichletParams, b: DirichletParams) -> np.ndarray:
    """Gradient of kl_dirichlet with respect to the first argument's alpha."""
    if a.k != b.k:
        raise ValueError("dimension mismatch")
    diff = a.alpha - b.alpha
    return diff * sp.polygamma(1, a.alpha) - diff.sum() * sp.polygamma(1, a.alpha0)


def kl_dirichlet_grad_second(a: DirichletParams, b: DirichletParams) -> np.ndarray:
    """Gradient of kl_dirichlet with respect to the second argument's alpha."""
    if a.k != b.k:
        raise ValueError("dimension mismatch")
    return sp.digamma(b.alpha) - sp.digamma(b.alpha0) - (
        sp.digamma(a.alpha) - sp.digamma(a.alpha0)
    )
