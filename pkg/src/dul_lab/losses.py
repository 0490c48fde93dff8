"""Training objectives: ID cross-entropy, outlier exposure, energy margin,
Dirichlet prior matching, and decoupled uncertainty learning.

Every loss returns its scalar value together with the exact gradient with
respect to the logits it consumed, so the network backward pass can be
composed from any of them. Composite objectives (the finetuning methods)
are assembled by loss_backward from a LossSpec.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp, softmax

from . import dirichlet as dmath
from .dirichlet import DirichletParams, SimplexVector
from .nn import Batch, Mlp, grads_zeros_like

LOSS_KINDS = ("ce", "oe", "energy_margin", "dpn", "dul")


@dataclass(frozen=True)
class LossSpec:
    kind: str
    lam: float = 0.3
    gamma: float = 2.0
    m_in: float = -25.0
    m_out: float = -7.0
    tau: int = 1
    target_alpha0: float = 15.0
    smoothing: float = 0.01
    alpha_mapping: str = "relu_plus_one"
    constant_h0: float | None = None

    def __post_init__(self):
        if self.kind not in LOSS_KINDS:
            raise ValueError(f"kind must be one of {LOSS_KINDS}")
        if self.lam < 0 or self.gamma < 0:
            raise ValueError("lam and gamma must be nonnegative")
        if self.tau not in (1, 2):
            raise ValueError("tau must be 1 or 2")
        if not 0.0 <= self.smoothing < 0.5:
            raise ValueError("smoothing must be in [0, 0.5)")


def ce_loss(logits, labels, dirichlet_mode: bool = False,
            alpha_mapping: str = "relu_plus_one"):
    """Mean -ln p_y. In dirichlet mode p is the Dirichlet mean of the mapped
    logits instead of the softmax."""
    f = np.asarray(logits, dtype=float)
    y = np.asarray(labels, dtype=int)
    n, k = f.shape
    if np.any(y < 0) or np.any(y >= k):
        raise ValueError("label out of range")
    if not dirichlet_mode:
        logp = f - logsumexp(f, axis=1, keepdims=True)
        value = float(-logp[np.arange(n), y].mean())
        grad = np.exp(logp)
        grad[np.arange(n), y] -= 1.0
        return value, grad / n
    value = 0.0
    grad = np.zeros_like(f)
    for i in range(n):
        d = dmath.alpha_from_logits(f[i], alpha_mapping)
        a, a0 = d.alpha, d.alpha0
        value += -np.log(a[y[i]] / a0)
        galpha = np.full(k, 1.0 / a0)
        galpha[y[i]] -= 1.0 / a[y[i]]
        grad[i] = galpha * dmath.alpha_mapping_jacobian_diag(f[i], alpha_mapping)
    return float(value / n), grad / n


def oe_per_sample(logits) -> np.ndarray:
    """Cross-entropy between uniform and the softmax prediction, per row."""
    f = np.asarray(logits, dtype=float)
    return logsumexp(f, axis=1) - f.mean(axis=1)


def oe_loss(logits):
    """Mean uniform cross-entropy; minimized (value ln K) at uniform softmax."""
    f = np.asarray(logits, dtype=float)
    n, k = f.shape
    value = float(oe_per_sample(f).mean())
    grad = (softmax(f, axis=1) - 1.0 / k) / n
    return value, grad


def energy_score(logits) -> float:
    """-log sum exp of one logit vector, computed with a max shift."""
    f = np.asarray(logits, dtype=float)
    return float(-logsumexp(f))


def energy_scores(logits) -> np.ndarray:
    return -logsumexp(np.asarray(logits, dtype=float), axis=1)


def energy_grad_weights(logits) -> SimplexVector:
    """Per-class softmax factor in the energy-margin gradient (diagnostic)."""
    return SimplexVector(softmax(np.asarray(logits, dtype=float)))


def energy_margin_loss(id_logits, ood_logits, m_in: float, m_out: float):
    """Squared hinge on energies: ID pushed below m_in, outliers above m_out."""
    fi = np.asarray(id_logits, dtype=float)
    fo = np.asarray(ood_logits, dtype=float)
    if fi.shape[0] == 0 or fo.shape[0] == 0:
        raise ValueError("batches must be nonempty")
    ei = energy_scores(fi)
    eo = energy_scores(fo)
    hi = np.maximum(ei - m_in, 0.0)
    ho = np.maximum(m_out - eo, 0.0)
    value = float((hi**2).mean() + (ho**2).mean())
    # dE/df = -softmax(f)
    gi = (2.0 * hi / fi.shape[0])[:, None] * (-softmax(fi, axis=1))
    go = (2.0 * ho / fo.shape[0])[:, None] * softmax(fo, axis=1)
    return value, (gi, go)


def _smoothed_onehot(y: int, k: int, smoothing: float) -> np.ndarray:
    t = np.full(k, smoothing / k)
    t[y] += 1.0 - smoothing
    return t


def dpn_loss(id_logits, id_labels, ood_logits, target_alpha0: float,
             smoothing: float, alpha_mapping: str = "relu_plus_one"):
    """Dirichlet prior matching: the ID prediction is pulled toward a sharp
    target Dirichlet at the label, the outlier prediction toward the flat
    Dirichlet."""
    fi = np.asarray(id_logits, dtype=float)
    fo = np.asarray(ood_logits, dtype=float)
    y = np.asarray(id_labels, dtype=int)
    n, k = fi.shape
    if target_alpha0 <= k:
        raise ValueError("target_alpha0 must exceed K")
    flat = DirichletParams(np.ones(k))
    value = 0.0
    gi = np.zeros_like(fi)
    for i in range(n):
        pred = dmath.alpha_from_logits(fi[i], alpha_mapping)
        target = DirichletParams(target_alpha0 * _smoothed_onehot(y[i], k, smoothing))
        value += dmath.kl_dirichlet(target, pred)
        galpha = dmath.kl_dirichlet_grad_second(target, pred)
        gi[i] = galpha * dmath.alpha_mapping_jacobian_diag(fi[i], alpha_mapping)
    value /= n
    gi /= n
    go = np.zeros_like(fo)
    ood_value = 0.0
    for j in range(fo.shape[0]):
        pred = dmath.alpha_from_logits(fo[j], alpha_mapping)
        ood_value += dmath.kl_dirichlet(pred, flat)
        galpha = dmath.kl_dirichlet_grad_first(pred, flat)
        go[j] = galpha * dmath.alpha_mapping_jacobian_diag(fo[j], alpha_mapping)
    value += ood_value / fo.shape[0]
    go /= fo.shape[0]
    return float(value), (gi, go)


def dul_loss(id_logits, id_labels, ood_logits, frozen_ood_logits,
             lam: float, gamma: float, m_out: float, tau: int,
             alpha_mapping: str = "relu_plus_one",
             constant_h0: float | None = None):
    """Dirichlet-mean ID cross-entropy plus a hinge that raises differential
    entropy on outliers above its frozen-model value by a margin, plus a KL
    anchor keeping the predicted class distribution at its frozen value.

    Gradients flow only through the current model; frozen quantities are
    treated as constants.
    """
    fo = np.asarray(ood_logits, dtype=float)
    f0 = np.asarray(frozen_ood_logits, dtype=float)
    if fo.shape != f0.shape:
        raise ValueError("current and frozen outlier logits must share a shape")
    if tau not in (1, 2):
        raise ValueError("tau must be 1 or 2")
    value, gi = ce_loss(id_logits, id_labels, dirichlet_mode=True,
                        alpha_mapping=alpha_mapping)
    m = fo.shape[0]
    go = np.zeros_like(fo)
    det_value = 0.0
    kl_value = 0.0
    for j in range(m):
        d = dmath.alpha_from_logits(fo[j], alpha_mapping)
        d0 = dmath.alpha_from_logits(f0[j], alpha_mapping)
        jac = dmath.alpha_mapping_jacobian_diag(fo[j], alpha_mapping)
        h = dmath.diff_entropy(d)
        h0 = dmath.diff_entropy(d0) if constant_h0 is None else constant_h0
        hinge = max(0.0, (h0 + m_out) - h)
        det_value += hinge**tau
        if hinge > 0:
            galpha = -tau * hinge ** (tau - 1) * dmath.diff_entropy_grad(d)
            go[j] += lam * (galpha * jac) / m
        p = dmath.expected_categorical(d)
        p0 = dmath.expected_categorical(d0)
        kl_value += dmath.kl_categorical(p, p0)
        # d KL(p||p0) / d alpha_j = (ln(p_j/p0_j) - KL) / alpha0
        lr = np.log(p.p) - np.log(p0.p)
        galpha = (lr - float(np.sum(p.p * lr))) / d.alpha0
        go[j] += gamma * (galpha * jac) / m
    value += lam * det_value / m + gamma * kl_value / m
    return float(value), (gi, go)


def dul_detection_term(logits, frozen_logits, m_out: float, tau: int,
                       alpha_mapping: str = "relu_plus_one",
                       constant_h0: float | None = None) -> float:
    """Mean hinge value of the detection term alone (for loss traces)."""
    fo = np.asarray(logits, dtype=float)
    f0 = np.asarray(frozen_logits, dtype=float)
    total = 0.0
    for j in range(fo.shape[0]):
        h = dmath.diff_entropy(dmath.alpha_from_logits(fo[j], alpha_mapping))
        h0 = (dmath.diff_entropy(dmath.alpha_from_logits(f0[j], alpha_mapping))
              if constant_h0 is None else constant_h0)
        total += max(0.0, (h0 + m_out) - h) ** tau
    return total / fo.shape[0]


def loss_backward(m: Mlp, id_batch: Batch, spec: LossSpec,
                  ood_batch: Batch | None = None,
                  frozen: Mlp | None = None):
    """Value and exact parameter gradients of the full training objective.

    ce needs a labeled ID batch only; oe/energy_margin/dpn/dul additionally
    need an outlier batch, and dul a frozen reference model.
    """
    if id_batch.labels is None:
        raise ValueError("ID batch must be labeled")
    id_logits, id_cache = m.forward_cache(id_batch.inputs)
    if spec.kind == "ce":
        value, gi = ce_loss(id_logits, id_batch.labels)
        return value, m.backward(id_cache, gi)
    if ood_batch is None:
        raise ValueError(f"loss kind {spec.kind!r} needs an outlier batch")
    ood_logits, ood_cache = m.forward_cache(ood_batch.inputs)

    if spec.kind == "oe":
        ce_val, gi = ce_loss(id_logits, id_batch.labels)
        oe_val, go = oe_loss(ood_logits)
        value = ce_val + spec.lam * oe_val
        go = spec.lam * go
    elif spec.kind == "energy_margin":
        ce_val, gi = ce_loss(id_logits, id_batch.labels)
        em_val, (gi_e, go) = energy_margin_loss(id_logits, ood_logits,
                                                spec.m_in, spec.m_out)
        value = ce_val + spec.lam * em_val
        gi = gi + spec.lam * gi_e
        go = spec.lam * go
    elif spec.kind == "dpn":
        dpn_val, (gi, go) = dpn_loss(id_logits, id_batch.labels, ood_logits,
                                     spec.target_alpha0, spec.smoothing,
                                     spec.alpha_mapping)
        value = dpn_val
    elif spec.kind == "dul":
        if frozen is None:
            raise ValueError("dul needs the frozen pretrained model")
        frozen_logits = frozen.forward(ood_batch)
        value, (gi, go) = dul_loss(id_logits, id_batch.labels, ood_logits,
                                   frozen_logits, spec.lam, spec.gamma,
                                   spec.m_out, spec.tau, spec.alpha_mapping,
                                   spec.constant_h0)
    else:  # pragma: no cover - guarded by LossSpec
        raise ValueError(f"unknown loss kind {spec.kind!r}")

    grads = m.backward(id_cache, gi)
    ood_grads = m.backward(ood_cache, go)
    total = grads_zeros_like(m)
    for i in range(len(total)):
        total[i] = (grads[i][0] + ood_grads[i][0], grads[i][1] + ood_grads[i][1])
    return value, total
