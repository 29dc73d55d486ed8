"""Hot inner loops: blank-augmented forward-backward and LSTM time recursions.

Each kernel is a plain NumPy loop, JIT-compiled with numba when available.
Set CTCFUSE_NUMBA=0 to force the interpreted NumPy path; the jitted kernels
keep their original Python body on `.py_func`, which is what
benchmarks/bench_kernels.py times against the compiled path.
"""

import math
import os

import numpy as np

NEG_INF = float("-inf")


def _numba_wanted() -> bool:
    flag = os.environ.get("CTCFUSE_NUMBA", "1").strip().lower()
    return flag not in ("0", "false", "off", "no")


JIT_ENABLED = False
if _numba_wanted():
    try:
        from numba import njit
    except ImportError:
        njit = None
    if njit is not None:
        JIT_ENABLED = True


def _jit(fn):
    if JIT_ENABLED:
        return njit(cache=True)(fn)
    return fn


@_jit
def ctc_forward_backward(logp, skip_ok):
    """Log-domain alpha/beta lattices over a blank-augmented label sequence.

    logp:    (T, S) pre-gathered log emission probabilities, S = 2U+1;
             logp[t, s] = log y_t[aug_label_s].
    skip_ok: (S,) bool; True where the two-position skip into s is legal
             (augmented label at s is a unit differing from the one at s-2).

    Returns (log_alpha, log_beta, log_likelihood), both lattices (T, S).
    Alpha and beta each include the emission term of their own frame, so
    sum_s exp(alpha[t,s] + beta[t,s] - logp[t,s]) equals the likelihood
    at every t.
    """
    T, S = logp.shape
    log_alpha = np.full((T, S), NEG_INF)
    log_beta = np.full((T, S), NEG_INF)

    log_alpha[0, 0] = logp[0, 0]
    if S > 1:
        log_alpha[0, 1] = logp[0, 1]
    for t in range(1, T):
        for s in range(S):
            a = log_alpha[t - 1, s]
            b = log_alpha[t - 1, s - 1] if s >= 1 else NEG_INF
            c = log_alpha[t - 1, s - 2] if (s >= 2 and skip_ok[s]) else NEG_INF
            m = max(a, b, c)
            if m == NEG_INF:
                log_alpha[t, s] = NEG_INF
            else:
                log_alpha[t, s] = (
                    m
                    + math.log(math.exp(a - m) + math.exp(b - m) + math.exp(c - m))
                    + logp[t, s]
                )

    log_beta[T - 1, S - 1] = logp[T - 1, S - 1]
    if S > 1:
        log_beta[T - 1, S - 2] = logp[T - 1, S - 2]
    for t in range(T - 2, -1, -1):
        for s in range(S):
            a = log_beta[t + 1, s]
            b = log_beta[t + 1, s + 1] if s + 1 < S else NEG_INF
            c = log_beta[t + 1, s + 2] if (s + 2 < S and skip_ok[s + 2]) else NEG_INF
            m = max(a, b, c)
            if m == NEG_INF:
                log_beta[t, s] = NEG_INF
            else:
                log_beta[t, s] = (
                    m
                    + math.log(math.exp(a - m) + math.exp(b - m) + math.exp(c - m))
                    + logp[t, s]
                )

    a = log_alpha[T - 1, S - 1]
    b = log_alpha[T - 1, S - 2] if S > 1 else NEG_INF
    m = max(a, b)
    if m == NEG_INF:
        loglik = NEG_INF
    else:
        loglik = m + math.log(math.exp(a - m) + math.exp(b - m))
    return log_alpha, log_beta, loglik


@_jit
def lstm_forward(zx, rec):
    """Run one LSTM direction over time.

    zx:  (T, 4H) input pre-activations, x_t . Wx^T + b, gate blocks ordered
         [input, forget, candidate, output].
    rec: (4H, H) recurrent weights.

    Returns (hidden (T, H), cells (T, H), gates (T, 4H)); gates are stored
    post-activation for reuse in the backward pass.
    """
    T = zx.shape[0]
    H = rec.shape[1]
    hidden = np.empty((T, H))
    cells = np.empty((T, H))
    gates = np.empty((T, 4 * H))
    h_prev = np.zeros(H)
    c_prev = np.zeros(H)
    for t in range(T):
        z = zx[t] + np.dot(rec, h_prev)
        i = 1.0 / (1.0 + np.exp(-z[:H]))
        f = 1.0 / (1.0 + np.exp(-z[H : 2 * H]))
        g = np.tanh(z[2 * H : 3 * H])
        o = 1.0 / (1.0 + np.exp(-z[3 * H :]))
        c = f * c_prev + i * g
        h = o * np.tanh(c)
        gates[t, :H] = i
        gates[t, H : 2 * H] = f
        gates[t, 2 * H : 3 * H] = g
        gates[t, 3 * H :] = o
        cells[t] = c
        hidden[t] = h
        h_prev = h
        c_prev = c
    return hidden, cells, gates


@_jit
def lstm_backward(d_hidden, gates, cells, rec_t):
    """Backpropagate one LSTM direction through time.

    d_hidden: (T, H) upstream gradient on the hidden outputs.
    gates, cells: caches from lstm_forward (same time order).
    rec_t: (H, 4H) transposed recurrent weights, C-contiguous.

    Returns dz (T, 4H): gradients on the gate pre-activations. Weight and
    bias gradients follow outside as dz^T . inputs, dz^T . h_prev, dz.sum(0).
    """
    T, H = d_hidden.shape
    dz = np.empty((T, 4 * H))
    dh_carry = np.zeros(H)
    dc_carry = np.zeros(H)
    zero = np.zeros(H)
    for t in range(T - 1, -1, -1):
        i = gates[t, :H]
        f = gates[t, H : 2 * H]
        g = gates[t, 2 * H : 3 * H]
        o = gates[t, 3 * H :]
        tc = np.tanh(cells[t])
        dh = d_hidden[t] + dh_carry
        dc = dh * o * (1.0 - tc * tc) + dc_carry
        c_prev = cells[t - 1] if t > 0 else zero
        dz[t, :H] = dc * g * i * (1.0 - i)
        dz[t, H : 2 * H] = dc * c_prev * f * (1.0 - f)
        dz[t, 2 * H : 3 * H] = dc * i * (1.0 - g * g)
        dz[t, 3 * H :] = dh * tc * o * (1.0 - o)
        dh_carry = np.dot(rec_t, dz[t])
        dc_carry = dc * f
    return dz
