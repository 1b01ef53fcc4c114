"""Per-level Adam training and the sequential stacking driver.

Levels are trained strictly one at a time.  The trainable set for a
level is its parameter arrays wrapped as tape leaves (sharing storage
with the network, so optimizer updates are visible immediately) plus the
blending alpha for multifidelity levels.  Lower levels stay plain
float64 arrays that nothing writes to, which is what makes the frozen
bit-invariance guarantee structural rather than aspirational.
"""

from __future__ import annotations

import os
import time
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from . import networks as nets
from . import ntk as ntk_mod
from . import stacking as st

__all__ = [
    "TrainingDivergence",
    "LrSchedule",
    "lr_at",
    "AnnealSchedule",
    "Adam",
    "TrainRecord",
    "StackResult",
    "relative_l2",
    "train_level",
    "run_stack",
]


class TrainingDivergence(RuntimeError):
    def __init__(self, iteration, last_finite_loss):
        self.iteration = iteration
        self.last_finite_loss = last_finite_loss
        super().__init__(
            f"loss became non-finite at iteration {iteration} "
            f"(last finite loss {last_finite_loss})")


@dataclass(frozen=True)
class LrSchedule:
    """Continuous exponential decay: lr(s) = base * rate ** (s / steps)."""

    base: float
    decay_steps: float
    decay_rate: float

    def at(self, step):
        return self.base * self.decay_rate ** (step / self.decay_steps)


def lr_at(schedule, step):
    return schedule.at(step)


@dataclass(frozen=True)
class AnnealSchedule:
    """Per-level equation parameters; the last entry repeats forever."""

    entries: tuple

    def __post_init__(self):
        if len(self.entries) < 1:
            raise ValueError("anneal schedule needs at least one entry")

    def at(self, level_index):
        i = min(level_index, len(self.entries) - 1)
        return dict(self.entries[i])


class Adam:
    """Adam over a list of tape leaves; updates their arrays in place."""

    def __init__(self, trainables, beta1=0.9, beta2=0.999, eps=1e-8):
        self.trainables = list(trainables)
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step_count = 0
        self.m = [np.zeros_like(p.val) for p in self.trainables]
        self.v = [np.zeros_like(p.val) for p in self.trainables]

    def step(self, grads, lr):
        self.step_count += 1
        t = self.step_count
        c1 = 1.0 - self.beta1 ** t
        c2 = 1.0 - self.beta2 ** t
        for i, p in enumerate(self.trainables):
            g = grads[p]
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g
            update = lr * (self.m[i] / c1) / (np.sqrt(self.v[i] / c2) + self.eps)
            p.val -= update


@dataclass
class TrainRecord:
    """Loss trace for one level, sampled every ``record_every`` steps."""

    level_index: int
    iterations: list = field(default_factory=list)
    total_loss: list = field(default_factory=list)
    loss_ic: list = field(default_factory=list)
    loss_bc: list = field(default_factory=list)
    loss_r: list = field(default_factory=list)
    alpha: list = field(default_factory=list)
    ntk_log: list = field(default_factory=list)  # (iteration, min, max, median)

    def append(self, iteration, total, terms, alpha):
        self.iterations.append(iteration)
        self.total_loss.append(total)
        self.loss_ic.append(terms.get("ic"))
        self.loss_bc.append(terms.get("bc"))
        self.loss_r.append(terms.get("r"))
        self.alpha.append(alpha)


@dataclass
class StackResult:
    chain: object
    errors: list
    records: list
    param_counts: list
    wall_seconds: list


def relative_l2(pred, ref):
    """||pred - ref||_2 / ||ref||_2 over flattened arrays."""
    pred = np.asarray(pred, dtype=np.float64).ravel()
    ref = np.asarray(ref, dtype=np.float64).ravel()
    return float(np.linalg.norm(pred - ref) / np.linalg.norm(ref))


def _wrap_trainable(chain, level_index):
    """Tape leaves sharing storage with the level's parameter arrays."""
    if level_index == 0:
        wrapped = {"net": [ad.Var(p) for p in chain.level0.params]}
        flat = list(wrapped["net"])
    else:
        lvl = chain.levels[level_index - 1]
        wrapped = {
            "nl": [ad.Var(p) for p in lvl.nonlinear.params],
            "lin": [ad.Var(p) for p in lvl.linear.params],
            "alpha": ad.Var(lvl.alpha),
        }
        flat = wrapped["nl"] + wrapped["lin"] + [wrapped["alpha"]]
    return wrapped, flat


def train_level(chain, level_index, *, iterations, batch_sizes, weights,
                lr_schedule, seed, record_every=100, ntk_config=None):
    """Adam-train one level, freeze it, and return its TrainRecord.

    All lower levels must already be frozen.  A non-finite loss aborts
    with TrainingDivergence carrying the iteration index and the last
    finite loss (an expected failure mode of single-fidelity training).
    """
    problem = chain.problem
    if level_index > 0 and not chain.level0_frozen:
        raise st.StackingError("level 0 must be frozen before training level 1")
    for i in range(1, level_index):
        if not chain.levels[i - 1].frozen:
            raise st.StackingError(f"level {i} must be frozen first")

    record = TrainRecord(level_index=level_index)
    wrapped, trainables = _wrap_trainable(chain, level_index)
    rng = np.random.default_rng([int(seed), 1000 + level_index])
    optimizer = Adam(trainables)
    ntk_state = ntk_mod.NtkState(**ntk_config) if ntk_config else None
    last_finite = None

    for step in range(int(iterations)):
        batch = problem.sample_batch(rng, batch_sizes)
        eff_weights = dict(weights)
        if ntk_state is not None:
            if step % ntk_state.period == 0:
                ntk_state.recompute(chain, level_index, wrapped, rng)
                record.ntk_log.append((step,) + ntk_state.summary())
            eff_weights = ntk_state.apply(eff_weights)
        total, terms = st.level_loss(chain, level_index, batch, eff_weights,
                                     trainable=wrapped)
        loss_val = ad.evaluate(total)
        if not np.isfinite(loss_val):
            raise TrainingDivergence(step, last_finite)
        last_finite = loss_val
        if step % record_every == 0:
            alpha_val = ad.evaluate(wrapped["alpha"]) if level_index > 0 else None
            record.append(step, loss_val,
                          {k: ad.evaluate(v) for k, v in terms.items()}, alpha_val)
        grads = ad.gradient(total, trainables)
        optimizer.step(grads, lr_schedule.at(step))

    if level_index == 0:
        chain.level0_frozen = True
    else:
        lvl = chain.levels[level_index - 1]
        lvl.alpha = float(ad.evaluate(wrapped["alpha"]))
        lvl.frozen = True
    return record


def _level_error(chain, level_index):
    """Relative l2 error of the composite prediction at one level."""
    problem = chain.problem
    eq_params = chain.equation_params_at(level_index)
    predict = st.make_predictor(chain, level_index)
    if problem.kind == "pinn":
        ref = problem.eval_reference(eq_params)
        pred = problem.eval_predictions(predict, eq_params)
        return relative_l2(pred, ref)
    # operator problem: mean relative error over held-out samples at the
    # run's target viscosity
    u_test = chain.eval_test_u
    refs = problem.test_references(u_test, chain.eval_target_params["nu"])
    errs = []
    for i, u in enumerate(u_test):
        pred = problem.eval_predictions_for(predict, u)
        errs.append(relative_l2(pred, refs[i]))
    return float(np.mean(errs))


def _level_param_count(chain, level_index):
    if level_index == 0:
        return chain.level0.param_count
    lvl = chain.levels[level_index - 1]
    return lvl.nonlinear.param_count + lvl.linear.param_count + 1


def run_stack(problem, config, out_dir=None, progress=None):
    """Train level 0 then the configured stacking levels sequentially.

    Returns a StackResult with the chain, per-level relative l2 errors,
    loss traces, parameter counts and wall-clock seconds.  When
    ``out_dir`` is given, checkpoints, traces, the error table and the
    chain manifest are written there.
    """
    anneal = AnnealSchedule(tuple(config.anneal_entries()))
    chain = _build_chain(problem, config)
    chain.level0_equation_params = anneal.at(0)

    result = StackResult(chain=chain, errors=[], records=[],
                         param_counts=[], wall_seconds=[])
    ntk_config = config.ntk_dict() if getattr(config, "ntk", False) else None
    for level in range(config.levels + 1):
        if level > 0:
            chain.add_level(transfer_from_previous=config.transfer,
                            equation_params=anneal.at(level))
        t0 = time.perf_counter()
        record = train_level(
            chain, level,
            iterations=config.sf_iterations if level == 0 else config.mf_iterations,
            batch_sizes=config.batch_sizes(),
            weights=config.weights(level),
            lr_schedule=config.lr_schedule(level),
            seed=config.seed,
            ntk_config=ntk_config if level >= 0 and problem.kind == "deeponet" else None,
        )
        wall = time.perf_counter() - t0
        err = _level_error(chain, level)
        result.records.append(record)
        result.errors.append(err)
        result.param_counts.append(_level_param_count(chain, level))
        result.wall_seconds.append(wall)
        if progress:
            progress(level, err, wall)
    if out_dir:
        write_result_bundle(out_dir, problem, config, result)
    return result


def _build_chain(problem, config):
    seed_net = np.random.default_rng([config.seed, 17, 0]).integers(2 ** 31)
    if problem.kind == "pinn":
        level0 = nets.DenseNetwork(config.sf_network, config.activation,
                                   seed=seed_net)
        template = {"nl_sizes": config.nl_network,
                    "lin_sizes": config.lin_network,
                    "activation": config.activation}
    else:
        level0 = nets.ModifiedDeepONet(config.sf_branch, config.sf_trunk,
                                       config.activation, seed=seed_net)
        template = {"nl_branch": config.nl_branch, "nl_trunk": config.nl_trunk,
                    "lin_branch": config.lin_branch, "lin_trunk": config.lin_trunk,
                    "activation": config.activation}
        data_rng = np.random.default_rng([config.seed, 4242])
        problem.set_training_data(problem.make_inputs(data_rng, config.n_train))
    chain = st.StackingChain(problem, level0, mf_template=template,
                             seed=config.seed)
    if problem.kind == "deeponet":
        chain.eval_test_u = problem.test_set(config.seed, config.n_test)
        chain.eval_target_params = AnnealSchedule(
            tuple(config.anneal_entries())).at(config.levels)
    return chain


# ---------------------------------------------------------------------------
# result bundle writing


def write_result_bundle(out_dir, problem, config, result):
    os.makedirs(out_dir, exist_ok=True)
    result.chain.save(out_dir)
    with open(os.path.join(out_dir, "errors.csv"), "w") as fh:
        fh.write("level,rel_l2_error,param_count,wall_seconds\n")
        for i, err in enumerate(result.errors):
            fh.write(f"{i},{err!r},{result.param_counts[i]},"
                     f"{result.wall_seconds[i]:.3f}\n")
    for record in result.records:
        path = os.path.join(out_dir, f"trace_level_{record.level_index:03d}.csv")
        with open(path, "w") as fh:
            fh.write("iteration,total_loss,loss_ic,loss_bc,loss_r,alpha\n")
            for j, it in enumerate(record.iterations):
                row = [str(it), repr(record.total_loss[j])]
                for col in (record.loss_ic, record.loss_bc, record.loss_r,
                            record.alpha):
                    row.append("" if col[j] is None else repr(col[j]))
                fh.write(",".join(row) + "\n")
        if record.ntk_log:
            npath = os.path.join(out_dir,
                                 f"ntk_level_{record.level_index:03d}.csv")
            with open(npath, "w") as fh:
                fh.write("iteration,min_lambda,max_lambda,median_lambda\n")
                for row in record.ntk_log:
                    fh.write(",".join(repr(v) for v in row) + "\n")
    with open(os.path.join(out_dir, "chain.txt"), "w") as fh:
        fh.write(f"problem = {problem.id}\n")
        fh.write(f"levels = {config.levels}\n")
        fh.write(f"seed = {config.seed}\n")
        for i in range(len(result.errors)):
            eq = result.chain.equation_params_at(i)
            eq_str = ";".join(f"{k}={v!r}" for k, v in sorted(eq.items()))
            final_loss = result.records[i].total_loss[-1] \
                if result.records[i].total_loss else None
            fh.write(f"level {i}: eq_params [{eq_str}] "
                     f"final_loss {final_loss!r} rel_l2 {result.errors[i]!r}\n")
    config.save_snapshot(os.path.join(out_dir, "config_snapshot.cfg"))
