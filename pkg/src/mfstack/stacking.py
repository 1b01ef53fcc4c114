"""Multifidelity composition and the sequential stacking chain.

A chain starts from a single-fidelity network (level 0).  Every further
level holds a nonlinear correction net, an affine correction net and a
trainable blending scalar alpha; its output is

    |alpha| * F_nl(coords, lowfi) + (1 - |alpha|) * F_l(lowfi)

where ``lowfi`` is the frozen composite prediction of the previous
level.  Only the newest level is ever trainable; freezing is enforced
structurally (frozen levels are evaluated with their stored float64
parameters, which nothing mutates).
"""

from __future__ import annotations

import os

import numpy as np

from . import autodiff as ad
from . import networks as nets

__all__ = [
    "StackingError",
    "MultifidelityLevel",
    "StackingChain",
    "mf_output",
    "chain_predict",
    "make_predictor",
    "level_loss",
    "ALPHA_INIT",
]

ALPHA_INIT = 0.1


class StackingError(ValueError):
    pass


class MultifidelityLevel:
    """One stacking step: correction nets, blending alpha, freeze flag."""

    def __init__(self, nonlinear, linear, alpha=ALPHA_INIT, equation_params=None):
        self.nonlinear = nonlinear
        self.linear = linear
        self.alpha = float(alpha)
        self.frozen = False
        self.equation_params = dict(equation_params or {})


class StackingChain:
    """Level-0 network plus an ordered list of multifidelity levels.

    ``mf_template`` describes how correction networks are built:
    for PINN problems {"nl_sizes", "lin_sizes", "activation"}, for
    operator problems {"nl_branch", "nl_trunk", "lin_branch",
    "lin_trunk", "activation"}.
    """

    def __init__(self, problem, level0, mf_template=None, seed=0):
        self.problem = problem
        self.level0 = level0
        self.level0_frozen = False
        self.level0_equation_params = dict(problem.default_eq_params)
        self.levels = []
        self.mf_template = dict(mf_template or {})
        self.seed = int(seed)

    @property
    def n_levels(self):
        """Total trained stages including level 0."""
        return 1 + len(self.levels)

    def equation_params_at(self, level_index):
        if level_index == 0:
            return self.level0_equation_params
        return self.levels[level_index - 1].equation_params

    def _build_mf_networks(self, level_index):
        t = self.mf_template
        seed_nl = np.random.default_rng([self.seed, 17, level_index]).integers(2 ** 31)
        seed_lin = np.random.default_rng([self.seed, 23, level_index]).integers(2 ** 31)
        if self.problem.kind == "pinn":
            nl = nets.DenseNetwork(t["nl_sizes"], t["activation"], seed=seed_nl)
            lin = nets.DenseNetwork(t["lin_sizes"], "none", seed=seed_lin)
        else:
            nl = nets.ModifiedDeepONet(t["nl_branch"], t["nl_trunk"],
                                       t["activation"], seed=seed_nl)
            lin = nets.ModifiedDeepONet(t["lin_branch"], t["lin_trunk"],
                                        "none", seed=seed_lin)
        return nl, lin

    def add_level(self, transfer_from_previous=True, equation_params=None):
        """Append a fresh unfrozen level.

        Level 1 is always freshly initialized (level 0 has an
        incompatible manifest); deeper levels copy parameters and alpha
        from the previous level when ``transfer_from_previous`` is set.
        """
        if not self.level0_frozen:
            raise StackingError("level 0 must be trained and frozen first")
        for i, lvl in enumerate(self.levels):
            if not lvl.frozen:
                raise StackingError(f"level {i + 1} is not frozen yet")
        index = len(self.levels) + 1
        nl, lin = self._build_mf_networks(index)
        alpha = ALPHA_INIT
        if transfer_from_previous and index > 1:
            prev = self.levels[-1]
            nl.load_flat_params(prev.nonlinear.flat_params())
            lin.load_flat_params(prev.linear.flat_params())
            alpha = prev.alpha
        params = equation_params if equation_params is not None \
            else self.problem.default_eq_params
        level = MultifidelityLevel(nl, lin, alpha=alpha, equation_params=params)
        self.levels.append(level)
        return level

    def save(self, out_dir):
        os.makedirs(out_dir, exist_ok=True)
        nets.save_checkpoint(os.path.join(out_dir, "level_000.ckpt"), self.level0)
        for i, lvl in enumerate(self.levels, start=1):
            nets.save_checkpoint(
                os.path.join(out_dir, f"level_{i:03d}_nl.ckpt"),
                lvl.nonlinear, alpha=lvl.alpha)
            nets.save_checkpoint(
                os.path.join(out_dir, f"level_{i:03d}_lin.ckpt"), lvl.linear)


def mf_output(level, coords, lowfi, trainable=None):
    """Composite output of one multifidelity level (PINN form).

    ``coords`` and ``lowfi`` are payloads of shape (batch, coord_dim)
    and (batch, output_dim).  When ``trainable`` is given it supplies
    {"nl", "lin", "alpha"} parameter overrides for the level.
    """
    nl_params = lin_params = None
    alpha = level.alpha
    if trainable is not None:
        nl_params = trainable["nl"]
        lin_params = trainable["lin"]
        alpha = trainable["alpha"]
    f_nl = level.nonlinear.forward(ad.concat([coords, lowfi], axis=1),
                                   params=nl_params)
    f_l = level.linear.forward(lowfi, params=lin_params)
    gate = ad.absolute(alpha)
    return ad.add(ad.mul(gate, f_nl), ad.mul(ad.sub(1.0, gate), f_l))


def _mf_output_deeponet(level, u, coords, lowfi, trainable=None):
    nl_params = lin_params = None
    alpha = level.alpha
    if trainable is not None:
        nl_params = trainable["nl"]
        lin_params = trainable["lin"]
        alpha = trainable["alpha"]
    lowfi_col = ad.reshape(lowfi, (-1, 1))
    g_nl = level.nonlinear.forward(ad.concat([u, lowfi_col], axis=1), coords,
                                   params=nl_params)
    g_l = level.linear.forward(lowfi_col, coords, params=lin_params)
    gate = ad.absolute(alpha)
    return ad.add(ad.mul(gate, g_nl), ad.mul(ad.sub(1.0, gate), g_l))


def chain_predict(chain, *inputs, up_to_level=None, trainable=None):
    """Composite prediction through levels 0..up_to_level.

    PINN chains take a single (batch, coord_dim) payload; operator
    chains take (u_sensors, coords).  ``trainable`` overrides the
    parameters of the topmost requested level only.
    """
    upto = chain.n_levels - 1 if up_to_level is None else int(up_to_level)
    if upto >= chain.n_levels:
        raise StackingError(
            f"level {upto} has not been trained (chain has {chain.n_levels} levels)")
    top = trainable if trainable is not None and upto == 0 else None
    if chain.problem.kind == "pinn":
        (coords,) = inputs
        out = chain.level0.forward(coords, params=top["net"] if top else None)
        for i in range(1, upto + 1):
            lvl_train = trainable if i == upto else None
            out = mf_output(chain.levels[i - 1], coords, out, lvl_train)
        return out
    u, coords = inputs
    out = chain.level0.forward(u, coords, params=top["net"] if top else None)
    for i in range(1, upto + 1):
        lvl_train = trainable if i == upto else None
        out = _mf_output_deeponet(chain.levels[i - 1], u, coords, out, lvl_train)
    return out


def make_predictor(chain, level_index, trainable=None):
    """Callable predictor for problem loss evaluation at one level."""
    if chain.problem.kind == "pinn":
        return lambda coords: chain_predict(
            chain, coords, up_to_level=level_index, trainable=trainable)
    return lambda u, coords: chain_predict(
        chain, u, coords, up_to_level=level_index, trainable=trainable)


def level_loss(chain, level_index, batch, weights, trainable=None):
    """Weighted physics loss for one level, plus alpha^4 beyond level 0.

    Returns (total, terms) where terms maps {"ic", "bc", "r", "alpha"}
    to scalar graph nodes / values actually present for this problem.
    """
    problem = chain.problem
    eq_params = chain.equation_params_at(level_index)
    predictor = make_predictor(chain, level_index, trainable)
    terms = problem.loss_terms(predictor, batch, eq_params)
    total = None
    for name, term in terms.items():
        w = float(weights.get(name, 1.0))
        piece = ad.mul(w, term)
        total = piece if total is None else ad.add(total, piece)
    if level_index > 0:
        alpha = trainable["alpha"] if trainable is not None \
            else chain.levels[level_index - 1].alpha
        total = ad.add(total, ad.power(alpha, 4))
    return total, terms
