"""Blank-marginalized sequence loss: forward-backward likelihood, its
gradient with respect to pre-softmax logits, and a brute-force enumeration
cross-check.

All recursions run in the log domain. A frame labeling p of length T over
{0..K} (0 = blank) "collapses" to a label sequence by merging adjacent
repeats and then deleting blanks; the loss marginalizes over every p that
collapses to the target.
"""

import itertools
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    CacheMismatch,
    InfeasibleLabelSequence,
    InstanceTooLarge,
    LengthMismatch,
)
from .kernels import ctc_forward_backward
from .units import BLANK_ID, LabelSequence

ENUMERATION_GUARD = 10**7


def _probs(y) -> np.ndarray:
    """Accept a Posteriorgram or a raw (T, K+1) row-stochastic array."""
    arr = np.asarray(getattr(y, "probs", y), dtype=np.float64)
    if arr.ndim != 2:
        raise LengthMismatch(f"expected (T, K+1) matrix, got shape {arr.shape}")
    return arr


@dataclass(frozen=True)
class AugmentedLabels:
    """Target interleaved with blanks: (b, z_1, b, z_2, ..., b), length 2U+1."""

    ids: tuple[int, ...]

    @classmethod
    def from_labels(cls, z: LabelSequence | tuple[int, ...]) -> "AugmentedLabels":
        ids = z.ids if isinstance(z, LabelSequence) else tuple(z)
        aug = [BLANK_ID]
        for u in ids:
            aug.append(int(u))
            aug.append(BLANK_ID)
        return cls(tuple(aug))

    def __len__(self) -> int:
        return len(self.ids)

    def skip_mask(self) -> np.ndarray:
        """True at positions reachable by the two-step skip transition."""
        ids = self.ids
        mask = np.zeros(len(ids), dtype=np.bool_)
        for s in range(2, len(ids)):
            mask[s] = ids[s] != BLANK_ID and ids[s] != ids[s - 2]
        return mask


@dataclass
class ForwardBackwardTable:
    """Log-domain alpha/beta lattices, one row per augmented position."""

    log_alpha: np.ndarray  # (2U+1, T)
    log_beta: np.ndarray  # (2U+1, T)
    log_likelihood: float
    augmented: AugmentedLabels
    _source: np.ndarray = field(repr=False, default=None)


def min_frames(ids: tuple[int, ...]) -> int:
    """Fewest frames that can carry this target: U plus one per adjacent repeat."""
    repeats = sum(1 for a, b in itertools.pairwise(ids) if a == b)
    return len(ids) + repeats


def collapse(path) -> tuple[int, ...]:
    """Merge adjacent repeats, then delete blanks."""
    out = []
    prev = None
    for p in path:
        p = int(p)
        if p != prev and p != BLANK_ID:
            out.append(p)
        prev = p
    return tuple(out)


def path_probability(y, path) -> float:
    """Probability of one frame labeling: the product of its per-frame scores."""
    probs = _probs(y)
    path = tuple(int(p) for p in path)
    if len(path) != probs.shape[0]:
        raise LengthMismatch(f"path length {len(path)} != T {probs.shape[0]}")
    with np.errstate(divide="ignore"):
        logs = np.log(probs[np.arange(len(path)), list(path)])
    total = logs.sum()
    return float(np.exp(total)) if np.isfinite(total) else 0.0


def _target_ids(z) -> tuple[int, ...]:
    return z.ids if isinstance(z, LabelSequence) else tuple(int(i) for i in z)


def ctc_loss(y, z) -> tuple[float, ForwardBackwardTable]:
    """Negative log likelihood of the target given per-frame posteriors.

    Raises InfeasibleLabelSequence when the target cannot fit in T frames.
    """
    probs = _probs(y)
    ids = _target_ids(z)
    T = probs.shape[0]
    need = min_frames(ids)
    if T < need:
        raise InfeasibleLabelSequence(
            f"target of {len(ids)} units needs >= {need} frames, got {T}"
        )
    aug = AugmentedLabels.from_labels(ids)
    with np.errstate(divide="ignore"):
        logp = np.log(probs[:, list(aug.ids)])
    logp = np.ascontiguousarray(logp, dtype=np.float64)
    la, lb, loglik = ctc_forward_backward(logp, aug.skip_mask())
    table = ForwardBackwardTable(
        log_alpha=la.T.copy(),
        log_beta=lb.T.copy(),
        log_likelihood=float(loglik),
        augmented=aug,
        _source=probs,
    )
    return -float(loglik), table


def softmax(logits: np.ndarray) -> np.ndarray:
    z = np.asarray(logits, dtype=np.float64)
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def ctc_grad(logits, z) -> np.ndarray:
    """Gradient of the negative log likelihood w.r.t. pre-softmax logits."""
    return ctc_logits_loss_grad(logits, z)[1]


def ctc_logits_loss_grad(logits, z) -> tuple[float, np.ndarray]:
    """(loss, gradient) in one pass; the training loop wants both."""
    y = softmax(logits)
    nll, table = ctc_loss(y, z)
    gamma = unit_posteriors(y, z, table)  # (2U+1, T)
    occ = np.zeros_like(y)
    aug_ids = np.asarray(table.augmented.ids)
    np.add.at(occ.T, aug_ids, gamma)
    return nll, y - occ


def unit_posteriors(y, z, table: ForwardBackwardTable) -> np.ndarray:
    """Per-frame occupation probabilities over augmented positions, (2U+1, T).

    Columns sum to one: every frame is emitted from exactly one position.
    """
    probs = _probs(y)
    ids = _target_ids(z)
    if table._source is not probs and not (
        table._source is not None
        and table._source.shape == probs.shape
        and np.array_equal(table._source, probs)
    ):
        raise CacheMismatch("table was computed from different posteriors")
    if table.augmented.ids != AugmentedLabels.from_labels(ids).ids:
        raise CacheMismatch("table was computed for a different target")
    with np.errstate(divide="ignore"):
        logp = np.log(probs[:, list(table.augmented.ids)]).T  # (2U+1, T)
    log_gamma = table.log_alpha + table.log_beta - logp - table.log_likelihood
    with np.errstate(invalid="ignore"):
        gamma = np.exp(log_gamma)
    gamma[~np.isfinite(log_gamma)] = 0.0
    return gamma


def brute_force_likelihood(y, z) -> float:
    """Total probability of the target by explicit path enumeration.

    Independent of the forward-backward recursion; guards at 10^7 paths.
    """
    probs = _probs(y)
    ids = _target_ids(z)
    T, K1 = probs.shape
    if K1**T > ENUMERATION_GUARD:
        raise InstanceTooLarge(f"{K1}^{T} paths exceed enumeration guard")
    total = 0.0
    for path in itertools.product(range(K1), repeat=T):
        if collapse(path) == ids:
            p = 1.0
            for t, lab in enumerate(path):
                p *= probs[t, lab]
            total += p
    return total
