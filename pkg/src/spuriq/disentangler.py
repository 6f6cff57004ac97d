"""Discretize feature vectors into cluster labels.

Two routes: a PCA + k-means baseline, and a joint autoencoder/clustering
model that minimizes reconstruction error plus a weighted KL clustering loss
over Student-t soft assignments. The autoencoder is a small dense network
with hand-written reverse-mode gradients so training has no framework
dependency and gradient checks stay exact.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "AutoencoderParams",
    "DisentanglerModel",
    "KMeansModel",
    "PcaModel",
    "SoftAssignment",
    "TrainSchedule",
    "TrainingDivergedError",
    "fit_kmeans",
    "fit_pca",
    "hard_labels",
    "loss_and_gradients",
    "soft_assign",
    "target_distribution",
    "train_disentangler",
]

_LN2 = np.log(2.0)


class TrainingDivergedError(RuntimeError):
    """Raised when activations or losses stop being finite; carries the last
    finite loss seen."""

    def __init__(self, last_loss: float):
        super().__init__(f"training diverged (last finite loss {last_loss:.6g})")
        self.last_loss = last_loss


# ---------------------------------------------------------------------------
# PCA + k-means baseline
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class PcaModel:
    mean: np.ndarray
    components: np.ndarray  # (k, d), orthonormal rows
    explained_variance_ratio: np.ndarray

    def transform(self, x: np.ndarray) -> np.ndarray:
        return (np.asarray(x, dtype=float) - self.mean) @ self.components.T

    def inverse_transform(self, z: np.ndarray) -> np.ndarray:
        return np.asarray(z, dtype=float) @ self.components + self.mean


def fit_pca(data: np.ndarray, components: int) -> PcaModel:
    """Leading principal components of the centered data."""
    x = np.asarray(data, dtype=float)
    n, d = x.shape
    if n < 2:
        raise ValueError("need at least two samples")
    if not 1 <= components <= min(n, d):
        raise ValueError(f"components must be in [1, {min(n, d)}]")
    mean = x.mean(axis=0)
    xc = x - mean
    _, svals, vt = np.linalg.svd(xc, full_matrices=False)
    comps = vt[:components].copy()
    # deterministic sign: largest-magnitude entry of每 component positive
    flip = comps[np.arange(components), np.abs(comps).argmax(axis=1)] < 0
    comps[flip] *= -1.0
    total = float((svals**2).sum())
    if total <= 0:
        ratios = np.zeros(components)
    else:
        ratios = (svals[:components] ** 2) / total
    return PcaModel(mean, comps, ratios)


@dataclass(frozen=True, eq=False)
class KMeansModel:
    centers: np.ndarray  # (k, m)
    inertia: float

    def predict(self, x: np.ndarray) -> np.ndarray:
        d2 = ((np.asarray(x, dtype=float)[:, None, :] - self.centers[None]) ** 2).sum(axis=2)
        return d2.argmin(axis=1)


def _sq_dists(x: np.ndarray, centers: np.ndarray) -> np.ndarray:
    return ((x[:, None, :] - centers[None]) ** 2).sum(axis=2)


def fit_kmeans(data: np.ndarray, k: int, seed: int) -> KMeansModel:
    """Lloyd iterations from k-means++ seeding until the assignment fixpoint
    or 300 iterations."""
    x = np.asarray(data, dtype=float)
    n = x.shape[0]
    if k < 1:
        raise ValueError("k must be >= 1")
    if n < k:
        raise ValueError(f"need at least k={k} samples, got {n}")
    rng = np.random.default_rng(seed)

    centers = np.empty((k, x.shape[1]))
    centers[0] = x[rng.integers(n)]
    d2 = ((x - centers[0]) ** 2).sum(axis=1)
    for i in range(1, k):
        total = d2.sum()
        if total <= 0:
            idx = int(rng.integers(n))
        else:
            idx = int(rng.choice(n, p=d2 / total))
        centers[i] = x[idx]
        d2 = np.minimum(d2, ((x - centers[i]) ** 2).sum(axis=1))

    labels = np.full(n, -1)
    for _ in range(300):
        new_labels = _sq_dists(x, centers).argmin(axis=1)
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels
        for j in range(k):
            members = x[labels == j]
            if len(members):
                centers[j] = members.mean(axis=0)
    inertia = float(_sq_dists(x, centers).min(axis=1).sum())
    return KMeansModel(centers, inertia)


# ---------------------------------------------------------------------------
# Soft assignments and the sharpened target
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SoftAssignment:
    """Row-stochastic membership probabilities, one row per sample."""

    q: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.q, dtype=float)
        if arr.ndim != 2:
            raise ValueError("q must be a 2-D matrix")
        if np.any(arr <= 0) or np.any(arr > 1):
            raise ValueError("q entries must lie in (0, 1]")
        if np.any(np.abs(arr.sum(axis=1) - 1.0) > 1e-10):
            raise ValueError("q rows must sum to 1")
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "q", arr)


def _student_t(z: np.ndarray, centers: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    u = 1.0 / (1.0 + _sq_dists(z, centers))
    return u / u.sum(axis=1, keepdims=True), u


def soft_assign(z: np.ndarray, centers: np.ndarray) -> SoftAssignment:
    """Student-t kernel memberships of each embedding to each center."""
    z = np.asarray(z, dtype=float)
    centers = np.asarray(centers, dtype=float)
    if z.shape[1] != centers.shape[1]:
        raise ValueError("embedding and center dimensions differ")
    q, _ = _student_t(z, centers)
    return SoftAssignment(q)


def _as_q(q) -> np.ndarray:
    return q.q if isinstance(q, SoftAssignment) else np.asarray(q, dtype=float)


def target_distribution(q) -> np.ndarray:
    """Sharpened target: square memberships, normalize by cluster frequency."""
    qm = _as_q(q)
    freq = qm.sum(axis=0)
    w = qm**2 / freq
    return w / w.sum(axis=1, keepdims=True)


def hard_labels(q) -> np.ndarray:
    """Argmax cluster per sample; ties resolve to the lowest index."""
    return _as_q(q).argmax(axis=1)


# ---------------------------------------------------------------------------
# Dense autoencoder with manual gradients
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class AutoencoderParams:
    """Dense encoder/decoder stack; the embedding layer and the output layer
    are linear, every other layer applies the leaky rectifier."""

    weights: tuple[np.ndarray, ...]
    biases: tuple[np.ndarray, ...]
    embed_layer: int
    slope: float = 0.01

    def __post_init__(self) -> None:
        if len(self.weights) != len(self.biases):
            raise ValueError("weights and biases length mismatch")
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.shape[1] != b.shape[0]:
                raise ValueError(f"layer {i}: bias shape does not match weight")
            if i and self.weights[i - 1].shape[1] != w.shape[0]:
                raise ValueError(f"layer {i}: input dim does not match previous layer")
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
                raise ValueError(f"layer {i}: non-finite parameters")
        if not 0 <= self.embed_layer < len(self.weights) - 1:
            raise ValueError("embed_layer out of range")

    @property
    def layer_sizes(self) -> tuple[int, ...]:
        return (self.weights[0].shape[0],) + tuple(w.shape[1] for w in self.weights)

    def activated(self, layer: int) -> bool:
        return layer != self.embed_layer and layer != len(self.weights) - 1


@dataclass(frozen=True, eq=False)
class DisentanglerModel:
    params: AutoencoderParams
    centers: np.ndarray  # (k, m)
    gamma: float
    learning_rate: float
    label_change_tol: float

    def __post_init__(self) -> None:
        if self.centers.ndim != 2 or self.centers.shape[0] < 1:
            raise ValueError("need at least one cluster center")
        m = self.params.layer_sizes[self.params.embed_layer + 1]
        if self.centers.shape[1] != m:
            raise ValueError("center dimension does not match the embedding")
        if self.gamma < 0:
            raise ValueError("gamma must be nonnegative")


@dataclass(frozen=True)
class TrainSchedule:
    pretrain_epochs: int = 100
    finetune_epochs: int = 50
    learning_rate: float = 0.02
    batch_size: int = 8
    label_change_tol: float = 1e-3


@dataclass(frozen=True, eq=False)
class LossGrads:
    loss: float
    recon_loss: float
    cluster_loss: float
    weight_grads: tuple[np.ndarray, ...]
    bias_grads: tuple[np.ndarray, ...]
    center_grads: np.ndarray
    q: np.ndarray


def _leaky(s: np.ndarray, slope: float) -> np.ndarray:
    return np.where(s > 0, s, slope * s)


def _forward(params: AutoencoderParams, x: np.ndarray):
    acts = [x]
    pres = []
    h = x
    for layer, (w, b) in enumerate(zip(params.weights, params.biases)):
        s = h @ w + b
        pres.append(s)
        h = _leaky(s, params.slope) if params.activated(layer) else s
        acts.append(h)
    return acts, pres


def encode(params: AutoencoderParams, x: np.ndarray) -> np.ndarray:
    acts, _ = _forward(params, np.asarray(x, dtype=float))
    return acts[params.embed_layer + 1]


def reconstruct(params: AutoencoderParams, x: np.ndarray) -> np.ndarray:
    acts, _ = _forward(params, np.asarray(x, dtype=float))
    return acts[-1]


def _loss_grads(params: AutoencoderParams, centers, gamma, batch, target) -> LossGrads:
    x = np.asarray(batch, dtype=float)
    n = x.shape[0]
    acts, pres = _forward(params, x)
    if not np.all(np.isfinite(acts[-1])):
        raise TrainingDivergedError(np.nan)
    diff = acts[-1] - x
    recon = float((diff**2).sum() / n)

    z = acts[params.embed_layer + 1]
    q, u = _student_t(z, centers)
    p = target_distribution(q) if target is None else np.asarray(target, dtype=float)
    cluster = float((p * (np.log2(p) - np.log2(q))).sum() / n)
    loss = recon + gamma * cluster

    # cluster-loss gradients through the Student-t kernel
    coef = (2.0 / (n * _LN2)) * u * (p - q)  # (n, k)
    zdiff = z[:, None, :] - centers[None]  # (n, k, m)
    dz_c = (coef[:, :, None] * zdiff).sum(axis=1)
    dmu = -(coef[:, :, None] * zdiff).sum(axis=0)

    n_layers = len(params.weights)
    weight_grads: list[np.ndarray] = [None] * n_layers  # type: ignore[list-item]
    bias_grads: list[np.ndarray] = [None] * n_layers  # type: ignore[list-item]
    g = 2.0 * diff / n
    for layer in reversed(range(n_layers)):
        if layer == params.embed_layer:
            g = g + gamma * dz_c
        if params.activated(layer):
            g = g * np.where(pres[layer] > 0, 1.0, params.slope)
        weight_grads[layer] = acts[layer].T @ g
        bias_grads[layer] = g.sum(axis=0)
        g = g @ params.weights[layer].T

    return LossGrads(
        loss=loss,
        recon_loss=recon,
        cluster_loss=cluster,
        weight_grads=tuple(weight_grads),
        bias_grads=tuple(bias_grads),
        center_grads=gamma * dmu,
        q=q,
    )


def loss_and_gradients(model: DisentanglerModel, batch: np.ndarray, target=None) -> LossGrads:
    """Loss and analytic gradients on one batch.

    The clustering target is held constant: pass the rows matching the batch,
    or leave None to derive it from the batch's own soft assignment.
    """
    return _loss_grads(model.params, model.centers, model.gamma, batch, target)


def _init_params(sizes, rng: np.random.Generator) -> tuple[list, list]:
    weights = []
    biases = []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        weights.append(rng.normal(0.0, np.sqrt(2.0 / fan_in), size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return weights, biases


def _cosine(lr: float, epoch: int, total: int) -> float:
    if total <= 1:
        return lr
    return lr * 0.5 * (1.0 + np.cos(np.pi * epoch / (total - 1)))


def train_disentangler(
    data: np.ndarray,
    k: int,
    gamma: float = 0.1,
    seed: int = 0,
    schedule: TrainSchedule | None = None,
    embed_dim: int = 10,
    hidden_dim: int = 64,
) -> tuple[DisentanglerModel, np.ndarray]:
    """Reconstruction-only pretraining, k-means center init, then joint
    minimization with the label-change stopping rule. Returns the trained
    model and the argmax cluster labels."""
    x = np.asarray(data, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError("data must be finite")
    n, d = x.shape
    if n < k:
        raise ValueError(f"need at least k={k} samples")
    sched = schedule or TrainSchedule()
    rng = np.random.default_rng(seed)

    sizes = (d, hidden_dim, embed_dim, hidden_dim, d)
    weights, biases = _init_params(sizes, rng)
    dummy_centers = np.zeros((1, embed_dim))

    def current_params() -> AutoencoderParams:
        return AutoencoderParams(tuple(w.copy() for w in weights), tuple(b.copy() for b in biases), 1)

    last_loss = np.inf

    def sgd_epoch(order, lr, centers, phase_gamma, targets):
        nonlocal last_loss
        params = AutoencoderParams(tuple(weights), tuple(biases), 1)
        for start in range(0, n, sched.batch_size):
            idx = order[start : start + sched.batch_size]
            sub_target = None if targets is None else targets[idx]
            try:
                out = _loss_grads(params, centers, phase_gamma, x[idx], sub_target)
            except TrainingDivergedError:
                raise TrainingDivergedError(last_loss) from None
            if not np.isfinite(out.loss):
                raise TrainingDivergedError(last_loss)
            last_loss = out.loss
            for layer in range(len(weights)):
                weights[layer] -= lr * out.weight_grads[layer]
                biases[layer] -= lr * out.bias_grads[layer]
            if phase_gamma > 0:
                centers -= lr * out.center_grads

    # phase 1: reconstruction only
    for epoch in range(sched.pretrain_epochs):
        lr = _cosine(sched.learning_rate, epoch, sched.pretrain_epochs)
        sgd_epoch(rng.permutation(n), lr, dummy_centers, 0.0, None)

    # phase 2: joint loss with centers from k-means on the embeddings
    km_seed = int(rng.integers(2**31 - 1))
    centers = fit_kmeans(encode(current_params(), x), k, km_seed).centers.copy()

    prev_labels: np.ndarray | None = None
    for epoch in range(sched.finetune_epochs):
        q_full, _ = _student_t(encode(current_params(), x), centers)
        labels = q_full.argmax(axis=1)
        if prev_labels is not None:
            if float((labels != prev_labels).mean()) < sched.label_change_tol:
                break
        prev_labels = labels
        targets = target_distribution(q_full)
        lr = _cosine(sched.learning_rate, epoch, sched.finetune_epochs)
        sgd_epoch(rng.permutation(n), lr, centers, gamma, targets)

    model = DisentanglerModel(
        current_params(), centers, gamma, sched.learning_rate, sched.label_change_tol
    )
    q_final, _ = _student_t(encode(model.params, x), centers)
    return model, q_final.argmax(axis=1)
