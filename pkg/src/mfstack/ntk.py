"""Neural-tangent-kernel diagonal weighting for operator-network losses.

The diagonal entry for a scalar loss-term operator T_k is the squared
parameter-gradient norm H_kk = ||dT_k/dtheta||^2; term weights follow

    lambda_k = (max_k H_kk / H_kk) ** 0.5

so every weight is >= 1 and the dominant term keeps weight 1.  Because
collocation batches are redrawn every iteration, the trainer reduces the
subsampled per-point diagonal to one weight per loss-term group
(residual, boundary) and refreshes those on a fixed period.
"""

from __future__ import annotations

import warnings

import numpy as np

from . import autodiff as ad

__all__ = [
    "ntk_diagonal",
    "ntk_matrix",
    "ntk_loss_weights",
    "NtkState",
    "LAMBDA_MAX",
]

LAMBDA_MAX = 1e4


def _term_gradient_flat(term, params):
    grads = ad.gradient(term, params)
    return np.concatenate([grads[p].ravel() for p in params])


def ntk_diagonal(loss_terms, params):
    """Squared gradient norms of each scalar term, one backward per term."""
    loss_terms = list(loss_terms)
    if not loss_terms:
        raise ValueError("empty loss-term list")
    params = list(params)
    H = np.empty(len(loss_terms))
    for k, term in enumerate(loss_terms):
        grads = ad.gradient(term, params)
        H[k] = sum(float(np.sum(g * g)) for g in grads.values())
    return H


def ntk_matrix(loss_terms, params):
    """Full kernel <dT_i/dtheta, dT_j/dtheta>; debug-scale only (<= 64 terms)."""
    loss_terms = list(loss_terms)
    if not loss_terms:
        raise ValueError("empty loss-term list")
    if len(loss_terms) > 64:
        raise ValueError("full NTK assembly is limited to 64 terms")
    G = np.stack([_term_gradient_flat(t, list(params)) for t in loss_terms])
    return G @ G.T


def ntk_loss_weights(H, exponent=0.5, lam_max=LAMBDA_MAX):
    """Weights (max H / H_k) ** exponent, clamped at ``lam_max``.

    Zero diagonal entries (a term with vanishing gradient) get the clamp
    value with a warning rather than a division error.
    """
    H = np.asarray(H, dtype=np.float64)
    if H.size == 0:
        raise ValueError("empty diagonal")
    hmax = float(np.max(H))
    lam = np.empty_like(H)
    zero = H <= 0.0
    if np.any(zero):
        warnings.warn("zero NTK diagonal entry; weight clamped", RuntimeWarning)
    lam[~zero] = (hmax / H[~zero]) ** exponent
    lam[zero] = lam_max
    return np.minimum(lam, lam_max)


class NtkState:
    """Periodically refreshed per-group NTK weights for the trainer.

    Recomputation draws a subsample of residual and boundary points,
    builds the per-point operator values, measures the diagonal, and
    collapses it to one multiplier per loss-term group via the group
    means.  Between refreshes the multipliers are fixed factors on the
    configured loss weights.
    """

    def __init__(self, period=1000, subsample=200, exponent=0.5):
        self.period = int(period)
        self.subsample = int(subsample)
        self.exponent = float(exponent)
        self.group_lambda = {}
        self._last_pointwise = None

    def recompute(self, chain, level_index, trainable, rng):
        from . import stacking as st  # local import to avoid a cycle

        problem = chain.problem
        batch = problem.sample_batch(
            rng, {"residual": self.subsample, "bc": self.subsample, "ic": 1})
        predictor = st.make_predictor(chain, level_index, trainable)
        eq_params = chain.equation_params_at(level_index)
        groups = problem.point_terms(predictor, batch, eq_params)
        params = _flatten_trainable(trainable)
        group_H = {}
        pointwise = []
        for name, vec in groups.items():
            terms = [ad.pick(vec, k) for k in range(ad.value_of(vec).shape[0])]
            H = ntk_diagonal(terms, params)
            group_H[name] = float(np.mean(H))
            pointwise.append(H)
        names = list(group_H)
        lam = ntk_loss_weights(np.array([group_H[n] for n in names]),
                               exponent=self.exponent)
        self.group_lambda = dict(zip(names, lam))
        all_H = np.concatenate(pointwise)
        self._last_pointwise = ntk_loss_weights(all_H, exponent=self.exponent)

    def apply(self, weights):
        out = dict(weights)
        for name, lam in self.group_lambda.items():
            out[name] = out.get(name, 1.0) * lam
        return out

    def summary(self):
        """(min, max, median) of the last pointwise weight vector."""
        lam = self._last_pointwise
        if lam is None:
            return (1.0, 1.0, 1.0)
        return (float(np.min(lam)), float(np.max(lam)), float(np.median(lam)))


def _flatten_trainable(trainable):
    flat = []
    for key in ("net", "nl", "lin"):
        flat.extend(trainable.get(key, []))
    if "alpha" in trainable:
        flat.append(trainable["alpha"])
    return flat
