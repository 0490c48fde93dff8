"""Training, evaluation, sweeps, and the verification suite."""

from __future__ import annotations

import numpy as np

from . import config as cfgmod
from . import data as datamod
from . import dirichlet as dmath
from . import losses as lossmod
from . import metrics as metmod
from . import theory as thmod
from .config import TrainConfig, substream
from .data import LabeledDataset
from .losses import LossSpec
from .metrics import EvalReport, ScoreSet
from .nn import Batch, Mlp, cosine_lr, mlp_init, sgd_step

# each method's natural detector
NATURAL_SCORE = {
    "none": "msp",
    "oe": "strength",
    "energy": "energy",
    "dpn": "diffent",
    "dul": "diffent",
}


def make_datasets(cfg: TrainConfig):
    """Training datasets: labeled ID blobs and the semantic outlier pool."""
    id_train = datamod.make_id_blobs(
        cfg.k, cfg.n_per_class, cfg.radius, cfg.sigma,
        seed=cfg.seed * 256 + cfgmod.STREAM_ID_DATA)
    sem_train = datamod.make_semantic_ood(
        "train", cfg.n_sem_train, seed=cfg.seed * 256 + cfgmod.STREAM_SEM_TRAIN,
        k=cfg.k, sigma=cfg.sigma)
    return id_train, sem_train

def make_eval_datasets(cfg: TrainConfig):
    """Held-out ID, covariate-shifted copies at each eps, and test outliers.

    The COV sets reuse one noise draw scaled per eps so method comparisons
    are paired.
    """
    id_eval = datamod.make_id_blobs(
        cfg.k, cfg.n_eval_id // cfg.k, cfg.radius, cfg.sigma,
        seed=cfg.seed * 256 + cfgmod.STREAM_EVAL_ID)
    cov = {eps: datamod.perturb_covariate(id_eval, eps,
                                          seed=cfg.seed * 256 + cfgmod.STREAM_COV)
           for eps in cfg.eps_grid}
    sem_test = datamod.make_semantic_ood(
        "test", cfg.n_sem_test, seed=cfg.seed * 256 + cfgmod.STREAM_SEM_TEST,
        k=cfg.k, sigma=cfg.sigma)
    return id_eval, cov, sem_test


def _loss_spec(cfg: TrainConfig) -> LossSpec:
    kind = {"oe": "oe", "energy": "energy_margin", "dpn": "dpn", "dul": "dul"}[cfg.method]
    # the energy hinge and the dul entropy hinge use margins on different
    # scales, so the dul margin has its own config knob
    m_out = cfg.dul_margin if kind == "dul" else cfg.m_out
    return LossSpec(kind=kind, lam=cfg.lam, gamma=cfg.gamma, m_in=cfg.m_in,
                    m_out=m_out, tau=cfg.tau, target_alpha0=cfg.target_alpha0,
                    smoothing=cfg.smoothing, alpha_mapping=cfg.alpha_mapping)


def _epoch_lr(cfg: TrainConfig, epoch: int, total: int, lr0: float) -> float:
    return lr0 if cfg.schedule == "constant" else cosine_lr(epoch, total, lr0)


def _train_loop(model: Mlp, cfg: TrainConfig, id_data: LabeledDataset,
                spec: LossSpec, epochs: int, lr0: float,
                sem_data: LabeledDataset | None = None,
                frozen: Mlp | None = None, trace: list | None = None) -> Mlp:
    rng = substream(cfg.seed, cfgmod.STREAM_BATCH)
    velocity = None
    n = id_data.n
    for epoch in range(epochs):
        lr = _epoch_lr(cfg, epoch, epochs, lr0)
        order = rng.permutation(n)
        epoch_loss = 0.0
        n_steps = 0
        for start in range(0, n, cfg.batch_id):
            idx = order[start:start + cfg.batch_id]
            batch = Batch(id_data.points[idx], id_data.labels[idx])
            ood_batch = None
            if sem_data is not None:
                oidx = rng.integers(0, sem_data.n, size=cfg.batch_ood)
                ood_batch = Batch(sem_data.points[oidx])
            value, grads = lossmod.loss_backward(model, batch, spec,
                                                 ood_batch=ood_batch,
                                                 frozen=frozen)
            if not np.isfinite(value):
                raise FloatingPointError(
                    f"non-finite loss {value} at epoch {epoch}")
            model, velocity = sgd_step(model, grads, velocity, lr, cfg.momentum)
            epoch_loss += value
            n_steps += 1
        if trace is not None:
            trace.append(epoch_loss / n_steps)
    return model


def pretrain(cfg: TrainConfig) -> Mlp:
    """Cross-entropy training on ID blobs."""
    id_train, _ = make_datasets(cfg)
    model = mlp_init(cfg.arch, cfg.activation,
                     seed=cfg.seed * 256 + cfgmod.STREAM_INIT)
    return _train_loop(model, cfg, id_train, LossSpec(kind="ce"),
                       cfg.pretrain_epochs, cfg.lr0)


def finetune(cfg: TrainConfig, pretrained: Mlp, trace: list | None = None) -> Mlp:
    """Finetune with the configured method's objective; the pretrained model
    stays frozen as the reference for dul."""
    if cfg.method == "none":
        raise ValueError("finetune requires a method other than 'none'")
    id_train, sem_train = make_datasets(cfg)
    spec = _loss_spec(cfg)
    frozen = pretrained.copy() if cfg.method == "dul" else None
    return _train_loop(pretrained.copy(), cfg, id_train, spec,
                       cfg.finetune_epochs, cfg.finetune_lr0,
                       sem_data=sem_train, frozen=frozen, trace=trace)


def evaluate(cfg: TrainConfig, model: Mlp) -> EvalReport:
    """Detection metrics for every scoring method on held-out data, plus
    ID/COV accuracy and mean uncertainty statistics."""
    id_eval, cov, sem_test = make_eval_datasets(cfg)
    id_logits = model.forward(Batch(id_eval.points))
    sem_logits = model.forward(Batch(sem_test.points))
    report = EvalReport()
    for method in metmod.SCORE_METHODS:
        s = ScoreSet(metmod.score_logits(id_logits, method, cfg.alpha_mapping),
                     metmod.score_logits(sem_logits, method, cfg.alpha_mapping),
                     method)
        report.detection[method] = (metmod.fpr_at_95tpr(s), metmod.auroc(s),
                                    metmod.aupr(s))
    report.id_acc = metmod.accuracy(model, id_eval)
    report.cov_acc = metmod.accuracy(model, cov[_nearest_eps(cfg)])
    for tag, pts in (("ID", id_eval.points),
                     ("COV", cov[_nearest_eps(cfg)].points),
                     ("SEM_TEST", sem_test.points)):
        report.uncertainty[tag] = metmod.uncertainty_stats(
            model, pts, cfg.alpha_mapping)
    return report


def _nearest_eps(cfg: TrainConfig) -> float:
    grid = np.asarray(cfg.eps_grid)
    return float(grid[np.argmin(np.abs(grid - cfg.cov_eval_eps))])


def noise_sweep(cfg: TrainConfig, model: Mlp):
    """Per-eps covariate accuracy and mean uncertainties. The reported
    distributional uncertainty is shifted by its value on the clean ID set.
    Returns a list of dict rows."""
    _, cov, _ = make_eval_datasets(cfg)
    base_du = None
    rows = []
    for eps in cfg.eps_grid:
        d = cov[eps]
        du, tu = metmod.uncertainty_stats(model, d.points, cfg.alpha_mapping)
        if base_du is None:
            base_du = du  # first grid entry is eps = 0, i.e. the ID set
        rows.append({
            "eps": eps,
            "cov_acc": metmod.accuracy(model, d),
            "shifted_du": du - base_du,
            "mean_du": du,
            "mean_total": tu,
        })
    return rows


def sweep_csv(rows) -> str:
    out = ["eps,cov_acc,shifted_du,mean_du,mean_total"]
    for r in rows:
        out.append(",".join(f"{r[c]:.6f}" for c in
                            ("eps", "cov_acc", "shifted_du", "mean_du",
                             "mean_total")))
    return "\n".join(out) + "\n"


def dilemma_table(cfg: TrainConfig):
    """Pretrain, finetune each method, and report each method's natural
    detector metrics next to its covariate accuracy."""
    base = pretrain(cfg)
    models = {"none": base}
    for method in ("oe", "energy", "dpn", "dul"):
        models[method] = finetune(cfg.with_(method=method), base)
    rows = []
    for method in ("none", "oe", "energy", "dpn", "dul"):
        report = evaluate(cfg, models[method])
        fpr95, roc, pr = report.detection[NATURAL_SCORE[method]]
        rows.append({
            "method": method,
            "score": NATURAL_SCORE[method],
            "fpr95": fpr95,
            "auroc": roc,
            "aupr": pr,
            "id_acc": report.id_acc,
            "cov_acc": report.cov_acc,
        })
    return rows, models


def dilemma_csv(rows) -> str:
    out = ["method,score,fpr95,auroc,aupr,id_acc,cov_acc"]
    for r in rows:
        out.append(",".join([r["method"], r["score"]] + [
            f"{r[c]:.6f}" for c in ("fpr95", "auroc", "aupr", "id_acc",
                                    "cov_acc")]))
    return "\n".join(out) + "\n"


def verify(cfg: TrainConfig, fuzz: int = 10_000, quick: bool = False):
    """Run the inequality and identity suites. Returns a list of
    (name, lhs, rhs, passed) tuples; a failed row means an implementation
    bug, not a modeling artifact."""
    rng = substream(cfg.seed, cfgmod.STREAM_POOL)
    checks = []

    # digamma/trigamma recurrences
    xs = rng.uniform(1e-6, 100.0, size=1000)
    dig = max(abs(dmath.digamma(x + 1.0) - dmath.digamma(x) - 1.0 / x)
              / max(1.0, 1.0 / x) for x in xs)
    tri = max(abs(dmath.trigamma(x + 1.0) - dmath.trigamma(x) + 1.0 / x**2)
              / max(1.0, 1.0 / x**2) for x in xs)
    checks.append(("digamma_recurrence", dig, 1e-12, dig <= 1e-12))
    checks.append(("trigamma_recurrence", tri, 1e-12, tri <= 1e-12))

    # Pinsker / Bretagnolle-Huber / Lemma 2 / uncertainty decomposition
    n_pinsker = n_bh = n_lemma2 = n_decomp = n_mi = 0
    for _ in range(fuzz):
        k = int(rng.integers(2, 6))
        p = dmath.SimplexVector(rng.dirichlet(np.ones(k)))
        q = dmath.SimplexVector(rng.dirichlet(np.ones(k)))
        if not thmod.pinsker_check(p, q)["holds"]:
            n_pinsker += 1
        if not thmod.bretagnolle_huber_check(p, q)["holds"]:
            n_bh += 1
        alpha = dmath.DirichletParams(rng.uniform(0.05, 50.0, size=k))
        tu = dmath.total_uncertainty(alpha)
        au = dmath.expected_data_entropy(alpha)
        mi = dmath.mutual_information(alpha)
        if abs(tu - (au + mi)) > 1e-12:
            n_decomp += 1
        if mi < -1e-12:
            n_mi += 1
    logits = rng.normal(0.0, 5.0, size=(fuzz, 4))
    if not thmod.lemma2_check(logits)["holds"]:
        n_lemma2 += 1
    per_row_ok = all(thmod.lemma2_check(logits[i:i + 1])["holds"]
                     for i in range(0, len(logits), max(1, len(logits) // 1000)))
    checks.append(("pinsker", n_pinsker, 0, n_pinsker == 0))
    checks.append(("bretagnolle_huber", n_bh, 0, n_bh == 0))
    checks.append(("lemma2", n_lemma2, 0, n_lemma2 == 0 and per_row_ok))
    checks.append(("uncertainty_decomposition", n_decomp, 0, n_decomp == 0))
    checks.append(("mutual_information_nonneg", n_mi, 0, n_mi == 0))

    # Theorem-1 bound on trained models
    run_cfg = cfg.with_(pretrain_epochs=min(cfg.pretrain_epochs, 30),
                        finetune_epochs=min(cfg.finetune_epochs, 5)) \
        if quick else cfg
    base = pretrain(run_cfg)
    candidates = [base]
    for method in ("oe", "dul") if quick else ("oe", "energy", "dpn", "dul"):
        candidates.append(finetune(run_cfg.with_(method=method), base))
    pool = thmod.perturbed_pool(candidates, n_perturbed=8, seed=cfg.seed)
    _, cov, sem_test = make_eval_datasets(run_cfg)
    n_thm = 0
    for model in candidates:
        for eps in (run_cfg.eps_grid[0], run_cfg.eps_grid[-1]):
            rep = thmod.theorem1_bound(cov[eps], sem_test, model, pool)
            if not rep.holds:
                n_thm += 1
    checks.append(("theorem1_lower_bound", n_thm, 0, n_thm == 0))
    return checks


def verify_csv(checks) -> str:
    out = ["check,lhs,rhs,pass"]
    for name, lhs, rhs, ok in checks:
        out.append(f"{name},{lhs},{rhs},{int(ok)}")
    return "\n".join(out) + "\n"
