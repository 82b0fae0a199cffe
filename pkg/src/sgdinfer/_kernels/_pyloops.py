"""Pure-numpy fallback implementing the same contract as the compiled kernel.

One call advances the chain through a block of iterations whose minibatch
indices and Gaussian draws were pre-generated by the driver, so both backends
consume identical random streams. ``theta`` is updated in place; recorded
iterates are written into ``out`` starting at ``n_recorded``. Returns
``(new_n_recorded, diverged_iteration)`` with -1 when the block stayed below
the divergence threshold.
"""

import numpy as np
from scipy.special import expit

MODEL_IDENTITY = 0
MODEL_LINEAR = 1
MODEL_LOGISTIC = 2
MODEL_SOFTMAX = 3


def run_chain_block(
    model_kind,
    X,
    y_real,
    y_class,
    n_classes,
    lam_over_n,
    theta,
    grad_mat,
    noise_mat,
    batch_idx,
    noise,
    t_start,
    burn_in,
    thin,
    out,
    n_recorded,
    div_threshold,
):
    block_len, S = batch_idx.shape
    cap = out.shape[0]
    for i in range(block_len):
        if model_kind == MODEL_IDENTITY:
            g = theta.copy()
        else:
            idx = batch_idx[i]
            xb = X[idx]
            if model_kind == MODEL_LINEAR:
                g = xb.T @ (xb @ theta - y_real[idx]) / S
            elif model_kind == MODEL_LOGISTIC:
                g = xb.T @ (expit(xb @ theta) - y_class[idx]) / S
            else:
                logits = xb @ theta.reshape(X.shape[1], n_classes)
                logits -= logits.max(axis=1, keepdims=True)
                np.exp(logits, out=logits)
                logits /= logits.sum(axis=1, keepdims=True)
                logits[np.arange(S), y_class[idx]] -= 1.0
                g = (xb.T @ logits).reshape(-1) / S
            g += lam_over_n * theta
        theta -= grad_mat @ g
        if noise_mat is not None:
            theta += noise_mat @ noise[i]
        peak = np.abs(theta).max()
        if not peak <= div_threshold:
            return n_recorded, t_start + i
        t = t_start + i
        if t >= burn_in and (t - burn_in) % thin == 0 and n_recorded < cap:
            out[n_recorded] = theta
            n_recorded += 1
    return n_recorded, -1
