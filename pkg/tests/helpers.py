"""Shared distribution builders for the test suite."""

from __future__ import annotations

import numpy as np

from spuriq.dist_core import JointPMF3


def motivational_joint() -> JointPMF3:
    """Three uniform bits Z, one noise bit N; F = (Z1, Z2, Z3 xor N), B = (Z2, N).

    Y ranges over 8 symbols, F over 8, B over 4. Known decomposition:
    Uni(Y;F|B) = 1, Uni(Y;B|F) = 0, redundancy = 1, synergy = 1, total = 3 bits.
    """
    mass = np.zeros((8, 8, 4))
    for z1 in (0, 1):
        for z2 in (0, 1):
            for z3 in (0, 1):
                for n in (0, 1):
                    y = 4 * z1 + 2 * z2 + z3
                    f = 4 * z1 + 2 * z2 + (z3 ^ n)
                    b = 2 * z2 + n
                    mass[y, f, b] += 1.0 / 16.0
    return JointPMF3(mass)


def and_gate() -> JointPMF3:
    """Y = F and B with F, B iid Bern(1/2)."""
    mass = np.zeros((2, 2, 2))
    for f in (0, 1):
        for b in (0, 1):
            mass[f & b, f, b] = 0.25
    return JointPMF3(mass)


def xor_gate() -> JointPMF3:
    """Y = F xor B with F, B iid Bern(1/2)."""
    mass = np.zeros((2, 2, 2))
    for f in (0, 1):
        for b in (0, 1):
            mass[f ^ b, f, b] = 0.25
    return JointPMF3(mass)


def copy_gate() -> JointPMF3:
    """F = B = Y with Y uniform binary."""
    mass = np.zeros((2, 2, 2))
    mass[0, 0, 0] = 0.5
    mass[1, 1, 1] = 0.5
    return JointPMF3(mass)


def random_joint(rng: np.random.Generator, dims=(2, 2, 2), sparsity: float = 0.0) -> JointPMF3:
    """Random dense joint; ``sparsity`` is the probability of zeroing a cell."""
    mass = rng.random(dims) ** 2
    if sparsity > 0:
        mass *= rng.random(dims) > sparsity
    total = mass.sum()
    if total <= 0:
        mass = np.ones(dims)
        total = mass.sum()
    return JointPMF3(mass / total)


def random_binary_joint(rng: np.random.Generator, sparsity: float = 0.0) -> JointPMF3:
    return random_joint(rng, (2, 2, 2), sparsity)


def random_joint4(rng: np.random.Generator, dims=(2, 2, 2, 2)) -> JointPMF3:
    """Random joint over (Y, F, B, B2) returned as raw mass wrapped later by callers."""
    mass = rng.random(dims) ** 2
    mass /= mass.sum()
    return mass


def gradient_check_configs(n_configs: int = 20, seed: int = 0):
    """Random small autoencoder/center/batch setups with analytic-vs-numeric
    gradient comparison; returns the worst relative error seen."""
    from spuriq.disentangler import (
        AutoencoderParams,
        DisentanglerModel,
        encode,
        loss_and_gradients,
        soft_assign,
        target_distribution,
    )

    rng = np.random.default_rng(seed)
    worst = 0.0

    def numeric(model, batch, target, arr, eps=1e-5):
        grad = np.zeros_like(arr)
        it = np.nditer(arr, flags=["multi_index"])
        while not it.finished:
            i = it.multi_index
            orig = arr[i]
            arr[i] = orig + eps
            up = loss_and_gradients(model, batch, target).loss
            arr[i] = orig - eps
            down = loss_and_gradients(model, batch, target).loss
            arr[i] = orig
            grad[i] = (up - down) / (2 * eps)
            it.iternext()
        return grad

    def rel_err(a, b):
        return float((np.abs(a - b) / np.maximum(1e-6, np.maximum(np.abs(a), np.abs(b)))).max())

    for _ in range(n_configs):
        d = int(rng.integers(2, 9))
        m = int(rng.integers(2, 5))
        k = int(rng.integers(2, 4))
        h = int(rng.integers(3, 7))
        n = int(rng.integers(2, 6))
        sizes = (d, h, m, h, d)
        ws = [rng.normal(0, 0.6, size=(a, b)) for a, b in zip(sizes[:-1], sizes[1:])]
        bs = [rng.normal(0, 0.1, size=b) for b in sizes[1:]]
        centers = rng.normal(0, 1.0, size=(k, m))
        batch = rng.normal(0, 1.0, size=(n, d))
        model = DisentanglerModel(
            AutoencoderParams(tuple(ws), tuple(bs), 1),
            centers,
            gamma=float(rng.uniform(0.05, 0.5)),
            learning_rate=0.01,
            label_change_tol=1e-3,
        )
        target = target_distribution(soft_assign(encode(model.params, batch), centers))
        out = loss_and_gradients(model, batch, target)
        for li in range(4):
            worst = max(worst, rel_err(out.weight_grads[li], numeric(model, batch, target, ws[li])))
            worst = max(worst, rel_err(out.bias_grads[li], numeric(model, batch, target, bs[li])))
        worst = max(worst, rel_err(out.center_grads, numeric(model, batch, target, centers)))
    return worst


def markov_chain_joint(rng: np.random.Generator, ny=2, nf=3, nb=2) -> JointPMF3:
    """B - F - Y Markov chain, so I(Y;B|F) = 0 exactly."""
    p_f = rng.dirichlet(np.ones(nf))
    p_y_given_f = rng.dirichlet(np.ones(ny), size=nf)
    p_b_given_f = rng.dirichlet(np.ones(nb), size=nf)
    mass = np.einsum("f,fy,fb->yfb", p_f, p_y_given_f, p_b_given_f)
    return JointPMF3(mass)
