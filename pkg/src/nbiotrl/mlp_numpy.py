"""Reference MLP kernels (pure numpy).

Semantics authority for the value-network math: fully connected layers with
ReLU hidden activations and a linear head, squared temporal-difference loss
on the taken actions only, RMSProp updates. The compiled extension
(`_mlpkern`) mirrors these routines operation for operation; tests compare
the two paths numerically.

Conventions: float64 throughout; weight ``W[l]`` has shape (fan_in,
fan_out); activations are row batches (B, features); gradients of the loss
mean over the batch.
"""

import numpy as np


def init_params(sizes, init_scale: float, rng: np.random.Generator):
    """Uniform fan-in scaled init: W ~ U(+-init_scale/sqrt(fan_in)), b = 0."""
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        bound = init_scale / np.sqrt(fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return weights, biases


def forward(weights, biases, x: np.ndarray) -> np.ndarray:
    """Batch forward pass; returns the (B, n_actions) value matrix."""
    h = x
    last = len(weights) - 1
    for l, (w, b) in enumerate(zip(weights, biases)):
        h = h @ w + b
        if l != last:
            np.maximum(h, 0.0, out=h)
    return h


def loss_and_grads(weights, biases, x: np.ndarray, a_idx: np.ndarray, y: np.ndarray):
    """Mean squared TD error on the taken actions, with its gradients.

    Returns ``(loss, grad_weights, grad_biases)``. Only the output unit
    a_idx[i] of sample i receives error signal; its gradient is
    2 (q - y) / B.
    """
    n_layers = len(weights)
    acts = [x]
    h = x
    for l in range(n_layers):
        h = h @ weights[l] + biases[l]
        if l != n_layers - 1:
            np.maximum(h, 0.0, out=h)
        acts.append(h)
    q = acts[-1]
    batch = x.shape[0]
    rows = np.arange(batch)
    err = q[rows, a_idx] - y
    loss = float(np.mean(err * err))

    delta = np.zeros_like(q)
    delta[rows, a_idx] = 2.0 * err / batch
    grad_w = [None] * n_layers
    grad_b = [None] * n_layers
    for l in range(n_layers - 1, -1, -1):
        grad_w[l] = acts[l].T @ delta
        grad_b[l] = delta.sum(axis=0)
        if l > 0:
            delta = delta @ weights[l].T
            delta *= acts[l] > 0.0
    return loss, grad_w, grad_b


def rmsprop_update(params, grads, accum, lr: float, decay: float, eps: float):
    """In-place RMSProp step on one parameter list."""
    for p, g, v in zip(params, grads, accum):
        v *= decay
        v += (1.0 - decay) * g * g
        p -= lr * g / (np.sqrt(v) + eps)


def train_step(weights, biases, rms_w, rms_b, x, a_idx, y,
               lr: float, decay: float, eps: float) -> float:
    """One fused optimization step, mutating parameters and accumulators.

    Returns the pre-update loss.
    """
    loss, gw, gb = loss_and_grads(weights, biases, x, a_idx, y)
    rmsprop_update(weights, gw, rms_w, lr, decay, eps)
    rmsprop_update(biases, gb, rms_b, lr, decay, eps)
    return loss
