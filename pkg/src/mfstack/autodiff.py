"""Define-by-run reverse-mode differentiation over float64 arrays.

Two cooperating layers:

* ``Var`` nodes form a tape built eagerly as arithmetic executes.  A
  backward sweep from a scalar root yields exact gradients with respect
  to any leaf.
* ``Jet`` values carry first and second directional derivatives
  (truncated Taylor coefficients) through the same operations.  Because
  every Taylor component is itself a tape node, expressions containing
  input derivatives (PDE residuals) remain differentiable with respect
  to parameters by the ordinary backward sweep.

Every operation also records enough structure to be re-executed with
jet-valued leaves (``second_input_derivative``), which is how second
derivatives of an already-built graph are obtained.

All arithmetic is float64.  Graphs are rebuilt per batch; a node is
garbage-collected once nothing references it.
"""

from __future__ import annotations

import itertools

import numpy as np

__all__ = [
    "AutodiffError",
    "Var",
    "Jet",
    "evaluate",
    "gradient",
    "input_derivative",
    "second_input_derivative",
    "add",
    "sub",
    "mul",
    "div",
    "neg",
    "matmul",
    "power",
    "tanh",
    "sigmoid",
    "swish",
    "sin",
    "cos",
    "exp",
    "absolute",
    "affine",
    "asum",
    "amean",
    "concat",
    "column",
    "rows",
    "reshape",
    "pick",
    "value_of",
]

_IDS = itertools.count()


class AutodiffError(ValueError):
    """Structural misuse of the tape: non-scalar roots, bad leaf values."""


def _f64(x):
    a = np.asarray(x, dtype=np.float64)
    return a


class Var:
    """One tape node: a float64 array value plus backward wiring.

    Construct leaves directly with ``Var(value)``; interior nodes are
    produced by the module-level operations.
    """

    __slots__ = ("val", "parents", "vjp", "op", "opfn", "operands", "kwargs", "oid")
    __array_ufunc__ = None  # keep numpy from hijacking mixed expressions

    def __init__(self, value):
        try:
            self.val = _f64(value)
        except (TypeError, ValueError) as err:
            raise AutodiffError(f"leaf value is not numeric: {value!r}") from err
        if self.val.dtype != np.float64:
            raise AutodiffError(f"leaf value is not numeric: {value!r}")
        self.parents = ()
        self.vjp = None
        self.op = "leaf"
        self.opfn = None
        self.operands = ()
        self.kwargs = None
        self.oid = next(_IDS)

    @classmethod
    def _node(cls, val, parents, vjp, op, opfn, operands, kwargs=None):
        v = cls.__new__(cls)
        v.val = val
        v.parents = parents
        v.vjp = vjp
        v.op = op
        v.opfn = opfn
        v.operands = operands
        v.kwargs = kwargs
        v.oid = next(_IDS)
        return v

    @property
    def shape(self):
        return self.val.shape

    def __repr__(self):
        return f"Var(op={self.op}, shape={self.val.shape}, oid={self.oid})"

    def __add__(self, o):
        return add(self, o)

    def __radd__(self, o):
        return add(o, self)

    def __sub__(self, o):
        return sub(self, o)

    def __rsub__(self, o):
        return sub(o, self)

    def __mul__(self, o):
        return mul(self, o)

    def __rmul__(self, o):
        return mul(o, self)

    def __truediv__(self, o):
        return div(self, o)

    def __rtruediv__(self, o):
        return div(o, self)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, o):
        return matmul(self, o)

    def __rmatmul__(self, o):
        return matmul(o, self)

    def __pow__(self, e):
        return power(self, e)


def value_of(x):
    """Plain float64 array behind a Var, Jet, or raw value."""
    if isinstance(x, Var):
        return x.val
    if isinstance(x, Jet):
        return value_of(x.f)
    return _f64(x)


def evaluate(x):
    """Primal value of a graph node: a float for scalars, array otherwise."""
    v = value_of(x)
    if v.size == 1:
        return v.item()
    return np.array(v)


def _val(x):
    return x.val if isinstance(x, Var) else _f64(x)


def _shape_of(x):
    if isinstance(x, Var):
        return x.val.shape
    if isinstance(x, Jet):
        return _shape_of(x.f)
    return np.shape(x)


def _unb(g, shape):
    """Reduce a broadcast adjoint back to ``shape``."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g.reshape(shape)


def _wire(out, op, opfn, operands, pairs, kwargs=None):
    """Build an interior node.  ``pairs`` is [(operand, adjoint_fn), ...]
    covering every operand that might be a Var."""
    parents = []
    fns = []
    for p, f in pairs:
        if isinstance(p, Var):
            parents.append(p)
            fns.append(f)
    if not parents:
        return Var._node(_f64(out), (), None, op, opfn, operands, kwargs)
    if len(fns) == 1:
        f0 = fns[0]
        vjp = lambda g: (f0(g),)
    elif len(fns) == 2:
        f0, f1 = fns
        vjp = lambda g: (f0(g), f1(g))
    else:
        fns_t = tuple(fns)
        vjp = lambda g: tuple(f(g) for f in fns_t)
    return Var._node(_f64(out), tuple(parents), vjp, op, opfn, operands, kwargs)


# ---------------------------------------------------------------------------
# dispatchers: each works on Jet, Var, or plain numpy values


def add(a, b):
    if isinstance(a, Jet) or isinstance(b, Jet):
        return _jet_add(a, b)
    if isinstance(a, Var) or isinstance(b, Var):
        av, bv = _val(a), _val(b)
        return _wire(av + bv, "add", add, (a, b),
                     [(a, lambda g: _unb(g, av.shape)),
                      (b, lambda g: _unb(g, bv.shape))])
    return a + b


def sub(a, b):
    if isinstance(a, Jet) or isinstance(b, Jet):
        return _jet_add(a, _jet_neg(b))
    if isinstance(a, Var) or isinstance(b, Var):
        av, bv = _val(a), _val(b)
        return _wire(av - bv, "sub", sub, (a, b),
                     [(a, lambda g: _unb(g, av.shape)),
                      (b, lambda g: _unb(-g, bv.shape))])
    return a - b


def mul(a, b):
    if isinstance(a, Jet) or isinstance(b, Jet):
        return _jet_mul(a, b)
    if isinstance(a, Var) or isinstance(b, Var):
        av, bv = _val(a), _val(b)
        return _wire(av * bv, "mul", mul, (a, b),
                     [(a, lambda g: _unb(g * bv, av.shape)),
                      (b, lambda g: _unb(g * av, bv.shape))])
    return a * b


def div(a, b):
    if isinstance(a, Jet) or isinstance(b, Jet):
        return _jet_mul(a, _jet_unary(b, "pow", -1.0))
    if isinstance(a, Var) or isinstance(b, Var):
        av, bv = _val(a), _val(b)
        out = av / bv
        return _wire(out, "div", div, (a, b),
                     [(a, lambda g: _unb(g / bv, av.shape)),
                      (b, lambda g: _unb(-g * out / bv, bv.shape))])
    return a / b


def neg(a):
    if isinstance(a, Jet):
        return _jet_neg(a)
    if isinstance(a, Var):
        return _wire(-a.val, "neg", neg, (a,), [(a, lambda g: -g)])
    return -a


def matmul(a, b):
    if isinstance(b, Jet):
        raise AutodiffError("matmul with a jet-valued right operand is unsupported")
    if isinstance(a, Jet):
        return _jet_matmul(a, b)
    if isinstance(a, Var) or isinstance(b, Var):
        av, bv = _val(a), _val(b)
        return _wire(av @ bv, "matmul", matmul, (a, b),
                     [(a, lambda g: g @ bv.T),
                      (b, lambda g: av.T @ g)])
    return a @ b


def affine(x, W, b):
    """Fused x @ W + b (bias broadcast over rows)."""
    if isinstance(W, Jet) or isinstance(b, Jet):
        raise AutodiffError("affine parameters cannot be jets")
    if isinstance(x, Jet):
        f = affine(x.f, W, b)
        return Jet(f,
                   {k: matmul(v, W) for k, v in x.d1.items()},
                   {k: matmul(v, W) for k, v in x.d2.items()},
                   x.order2)
    if isinstance(x, Var) or isinstance(W, Var) or isinstance(b, Var):
        xv, Wv, bv = _val(x), _val(W), _val(b)
        return _wire(xv @ Wv + bv, "affine", affine, (x, W, b),
                     [(x, lambda g: g @ Wv.T),
                      (W, lambda g: xv.T @ g),
                      (b, lambda g: g.sum(axis=0))])
    return x @ W + b


def power(a, e):
    e = float(e)
    if isinstance(a, Jet):
        return _jet_unary(a, "pow", e)
    if isinstance(a, Var):
        av = a.val
        return _wire(av ** e, "pow", power, (a, e),
                     [(a, lambda g: g * e * av ** (e - 1.0))])
    return a ** e


def _unary(a, op, fval, dfn):
    """Elementwise unary op.  ``dfn(primal_in, primal_out)`` gives d(out)/d(in)."""
    if isinstance(a, Jet):
        return _jet_unary(a, op)
    if isinstance(a, Var):
        av = a.val
        out = fval(av)
        return _wire(out, op, _UNARY_DISPATCH[op], (a,),
                     [(a, lambda g: g * dfn(av, out))])
    return fval(a)


def tanh(a):
    return _unary(a, "tanh", np.tanh, lambda x, y: 1.0 - y * y)


def sigmoid(a):
    return _unary(a, "sigmoid", _sigmoid_np, lambda x, y: y * (1.0 - y))


def sin(a):
    return _unary(a, "sin", np.sin, lambda x, y: np.cos(x))


def cos(a):
    return _unary(a, "cos", np.cos, lambda x, y: -np.sin(x))


def exp(a):
    return _unary(a, "exp", np.exp, lambda x, y: y)


def absolute(a):
    return _unary(a, "abs", np.abs, lambda x, y: np.sign(x))


def swish(a):
    """x * sigmoid(x) as one fused kernel."""
    if isinstance(a, Jet):
        return _jet_unary(a, "swish")
    if isinstance(a, Var):
        av = a.val
        s = _sigmoid_np(av)
        return _wire(av * s, "swish", swish, (a,),
                     [(a, lambda g: g * (s + av * s * (1.0 - s)))])
    return a * _sigmoid_np(a)


def _sigmoid_np(x):
    return 0.5 * (np.tanh(0.5 * x) + 1.0)


_UNARY_DISPATCH = {}


def asum(a, axis=None):
    if isinstance(a, Jet):
        return _jet_map(a, lambda p: asum(p, axis=axis))
    if isinstance(a, Var):
        av = a.val
        out = av.sum(axis=axis)

        def back(g):
            if axis is not None:
                g = np.expand_dims(g, axis)
            return np.broadcast_to(g, av.shape).astype(np.float64)

        return _wire(out, "sum", asum, (a,), [(a, back)], kwargs={"axis": axis})
    return np.sum(a, axis=axis)


def amean(a, axis=None):
    if isinstance(a, Jet):
        return _jet_map(a, lambda p: amean(p, axis=axis))
    if isinstance(a, Var):
        av = a.val
        out = av.mean(axis=axis)
        n = av.size if axis is None else av.shape[axis]

        def back(g):
            if axis is not None:
                g = np.expand_dims(g, axis)
            return (np.broadcast_to(g, av.shape) / n).astype(np.float64)

        return _wire(out, "mean", amean, (a,), [(a, back)], kwargs={"axis": axis})
    return np.mean(a, axis=axis)


def pick(a, index):
    """Scalar entry of a 1-D value; keeps the graph intact."""
    index = int(index)
    if isinstance(a, Jet):
        return _jet_map(a, lambda p: pick(p, index))
    if isinstance(a, Var):
        av = a.val

        def back(g):
            out = np.zeros_like(av)
            out[index] = g
            return out

        return _wire(av[index], "pick", pick, (a, index), [(a, back)])
    return a[index]


def reshape(a, shape):
    if isinstance(a, Jet):
        return _jet_map(a, lambda p: reshape(p, shape))
    if isinstance(a, Var):
        av = a.val
        return _wire(av.reshape(shape), "reshape", reshape, (a, shape),
                     [(a, lambda g: g.reshape(av.shape))])
    return np.reshape(a, shape)


def rows(a, start, stop):
    """Contiguous row slice along axis 0, keeping the graph intact."""
    start, stop = int(start), int(stop)
    if isinstance(a, Jet):
        return _jet_map(a, lambda p: rows(p, start, stop))
    if isinstance(a, Var):
        av = a.val

        def back(g):
            out = np.zeros_like(av)
            out[start:stop] = g
            return out

        return _wire(av[start:stop], "rows", rows, (a, start, stop), [(a, back)])
    return a[start:stop]


def column(a, index):
    """Single column of a 2-D value as shape (batch, 1)."""
    index = int(index)
    if isinstance(a, Jet):
        return _jet_map(a, lambda p: column(p, index))
    if isinstance(a, Var):
        av = a.val

        def back(g):
            out = np.zeros_like(av)
            out[:, index:index + 1] = g
            return out

        return _wire(av[:, index:index + 1], "column", column, (a, index), [(a, back)])
    return a[:, index:index + 1]


def concat(parts, axis=1):
    parts = list(parts)
    if any(isinstance(p, Jet) for p in parts):
        return _jet_concat(parts, axis)
    if any(isinstance(p, Var) for p in parts):
        vals = [_val(p) for p in parts]
        out = np.concatenate(vals, axis=axis)
        splits = np.cumsum([v.shape[axis] for v in vals])[:-1]

        def adj_fn(i):
            return lambda g: np.split(g, splits, axis=axis)[i]

        return _wire(out, "concat", concat, (tuple(parts),),
                     [(p, adj_fn(i)) for i, p in enumerate(parts)],
                     kwargs={"axis": axis})
    return np.concatenate(parts, axis=axis)


def _concat_replay(parts, axis=1):
    return concat(parts, axis=axis)


# ---------------------------------------------------------------------------
# backward sweep


def _reachable(root):
    seen = {root.oid: root}
    stack = [root]
    while stack:
        n = stack.pop()
        for p in n.parents:
            if p.oid not in seen:
                seen[p.oid] = p
                stack.append(p)
    return seen


def backward(root):
    """Adjoints of every node reachable from a scalar root, keyed by oid."""
    if not isinstance(root, Var):
        raise AutodiffError("backward root must be a Var")
    if root.val.size != 1:
        raise AutodiffError(
            f"backward root must be scalar, got shape {root.val.shape}")
    nodes = sorted(_reachable(root).values(), key=lambda n: n.oid, reverse=True)
    adj = {root.oid: np.ones_like(root.val)}
    for n in nodes:
        if n.vjp is None:
            continue  # leaves keep their adjoints
        g = adj.pop(n.oid, None)
        if g is None:
            continue
        for p, contrib in zip(n.parents, n.vjp(g)):
            cur = adj.get(p.oid)
            adj[p.oid] = contrib if cur is None else cur + contrib
    return adj


def gradient(root, wrt):
    """Exact reverse-mode derivatives of a scalar root.

    Returns ``{leaf: ndarray}``; leaves the root does not depend on map
    to zeros.
    """
    wrt = list(wrt)
    adj = backward(root)
    return {v: adj.get(v.oid, np.zeros_like(v.val)) for v in wrt}


# ---------------------------------------------------------------------------
# jets: first/second directional derivatives through the same ops


class Jet:
    """Order-<=2 truncated Taylor value along named directions.

    ``f`` is the primal payload (Var or ndarray).  ``d1[tag]`` and
    ``d2[tag]`` hold directional coefficients; a missing key means zero.
    ``order2`` lists directions tracked to second order.
    """

    __slots__ = ("f", "d1", "d2", "order2")

    def __init__(self, f, d1=None, d2=None, order2=frozenset()):
        self.f = f
        self.d1 = d1 if d1 is not None else {}
        self.d2 = d2 if d2 is not None else {}
        self.order2 = order2

    @staticmethod
    def seed(value, tag, order=1):
        """Leaf jet for an input direction: unit first derivative."""
        one = np.ones(_shape_of(value), dtype=np.float64)
        if order == 1:
            return Jet(value, {tag: one})
        if order == 2:
            return Jet(value, {tag: one}, {}, frozenset({tag}))
        raise AutodiffError(f"jet order must be 1 or 2, got {order}")

    def first(self, tag):
        d = self.d1.get(tag)
        return np.zeros(_shape_of(self.f)) if d is None else d

    def second(self, tag):
        d = self.d2.get(tag)
        return np.zeros(_shape_of(self.f)) if d is None else d

    def __repr__(self):
        return f"Jet(d1={sorted(self.d1)}, order2={sorted(self.order2)})"

    def __add__(self, o):
        return add(self, o)

    def __radd__(self, o):
        return add(o, self)

    def __sub__(self, o):
        return sub(self, o)

    def __rsub__(self, o):
        return sub(o, self)

    def __mul__(self, o):
        return mul(self, o)

    def __rmul__(self, o):
        return mul(o, self)

    def __truediv__(self, o):
        return div(self, o)

    def __neg__(self):
        return _jet_neg(self)

    def __matmul__(self, o):
        return matmul(self, o)

    def __pow__(self, e):
        return power(self, e)


def _as_jet(x):
    return x if isinstance(x, Jet) else Jet(x)


def _jet_add(a, b):
    a, b = _as_jet(a), _as_jet(b)
    d1 = {}
    for k in a.d1.keys() | b.d1.keys():
        if k in a.d1 and k in b.d1:
            d1[k] = add(a.d1[k], b.d1[k])
        else:
            d1[k] = a.d1.get(k, b.d1.get(k))
    d2 = {}
    for k in a.d2.keys() | b.d2.keys():
        if k in a.d2 and k in b.d2:
            d2[k] = add(a.d2[k], b.d2[k])
        else:
            d2[k] = a.d2.get(k, b.d2.get(k))
    return Jet(add(a.f, b.f), d1, d2, a.order2 | b.order2)


def _jet_neg(x):
    if not isinstance(x, Jet):
        return neg(x)
    return Jet(neg(x.f),
               {k: neg(v) for k, v in x.d1.items()},
               {k: neg(v) for k, v in x.d2.items()},
               x.order2)


def _jet_mul(a, b):
    a, b = _as_jet(a), _as_jet(b)
    f = mul(a.f, b.f)
    d1 = {}
    for k in a.d1.keys() | b.d1.keys():
        terms = []
        if k in a.d1:
            terms.append(mul(a.d1[k], b.f))
        if k in b.d1:
            terms.append(mul(a.f, b.d1[k]))
        d1[k] = terms[0] if len(terms) == 1 else add(terms[0], terms[1])
    order2 = a.order2 | b.order2
    d2 = {}
    for k in order2:
        terms = []
        if k in a.d2:
            terms.append(mul(a.d2[k], b.f))
        if k in b.d2:
            terms.append(mul(a.f, b.d2[k]))
        if k in a.d1 and k in b.d1:
            terms.append(mul(2.0, mul(a.d1[k], b.d1[k])))
        total = None
        for t in terms:
            total = t if total is None else add(total, t)
        if total is not None:
            d2[k] = total
    return Jet(f, d1, d2, order2)


def _jet_matmul(a, w):
    return Jet(matmul(a.f, w),
               {k: matmul(v, w) for k, v in a.d1.items()},
               {k: matmul(v, w) for k, v in a.d2.items()},
               a.order2)


def _jet_map(a, fn):
    """Apply a linear map componentwise (sum/mean/pick/concat pieces)."""
    return Jet(fn(a.f),
               {k: fn(v) for k, v in a.d1.items()},
               {k: fn(v) for k, v in a.d2.items()},
               a.order2)


def _jet_concat(parts, axis):
    jets = [_as_jet(p) for p in parts]
    keys1 = set().union(*(j.d1.keys() for j in jets))
    order2 = frozenset().union(*(j.order2 for j in jets))
    f = concat([j.f for j in jets], axis=axis)

    def gather(which, k):
        out = []
        for j in jets:
            comp = which(j).get(k)
            out.append(np.zeros(_shape_of(j.f)) if comp is None else comp)
        return concat(out, axis=axis)

    d1 = {k: gather(lambda j: j.d1, k) for k in keys1}
    d2 = {}
    for k in order2:
        if any(k in j.d2 for j in jets):
            d2[k] = gather(lambda j: j.d2, k)
    return Jet(f, d1, d2, order2)


def _jet_unary(x, op, e=None):
    """Unary op on a jet via the chain rule: y' = g x', y'' = h x'^2 + g x''."""
    x = _as_jet(x)
    f = x.f
    if op == "tanh":
        y = tanh(f)
        g = sub(1.0, mul(y, y))
        hfn = lambda: mul(-2.0, mul(y, g))
    elif op == "sigmoid":
        y = sigmoid(f)
        g = mul(y, sub(1.0, y))
        hfn = lambda: mul(g, sub(1.0, mul(2.0, y)))
    elif op == "sin":
        y = sin(f)
        g = cos(f)
        hfn = lambda: neg(y)
    elif op == "cos":
        y = cos(f)
        g = neg(sin(f))
        hfn = lambda: neg(y)
    elif op == "exp":
        y = exp(f)
        g = y
        hfn = lambda: y
    elif op == "swish":
        s = sigmoid(f)
        sp = mul(s, sub(1.0, s))
        y = mul(f, s)
        g = add(s, mul(f, sp))
        hfn = lambda: add(mul(2.0, sp),
                          mul(f, mul(sp, sub(1.0, mul(2.0, s)))))
    elif op == "abs":
        y = absolute(f)
        g = np.sign(value_of(f))
        hfn = lambda: None
    elif op == "pow":
        y = power(f, e)
        g = mul(e, power(f, e - 1.0))
        hfn = lambda: mul(e * (e - 1.0), power(f, e - 2.0))
    else:
        raise AutodiffError(f"no jet rule for op '{op}'")
    d1 = {k: mul(g, v) for k, v in x.d1.items()}
    d2 = {}
    need_h = [k for k in x.order2 if k in x.d1]
    h = hfn() if need_h else None
    for k in x.order2:
        terms = []
        if h is not None and k in x.d1:
            terms.append(mul(h, mul(x.d1[k], x.d1[k])))
        if k in x.d2:
            terms.append(mul(g, x.d2[k]))
        if terms:
            d2[k] = terms[0] if len(terms) == 1 else add(terms[0], terms[1])
    return Jet(y, d1, d2, x.order2)


_UNARY_DISPATCH.update({
    "tanh": tanh, "sigmoid": sigmoid, "sin": sin, "cos": cos,
    "exp": exp, "abs": absolute,
})


# ---------------------------------------------------------------------------
# graph replay with jet-valued leaves


def _replay(root, seeds):
    """Re-execute the subgraph under ``root`` with some leaves replaced by
    jets.  Nodes untouched by any seed are reused as-is."""
    payload = {leaf.oid: jet for leaf, jet in seeds.items()}
    nodes = sorted(_reachable(root).values(), key=lambda n: n.oid)
    for n in nodes:
        if n.oid in payload:
            continue
        if n.opfn is None:
            continue  # uninvolved leaf: used directly
        touched = False
        args = []
        for o in n.operands:
            if isinstance(o, Var):
                rep = payload.get(o.oid, o)
                touched = touched or rep is not o
                args.append(rep)
            elif isinstance(o, tuple):  # concat stores its part list
                rep_parts = []
                for q in o:
                    if isinstance(q, Var):
                        r = payload.get(q.oid, q)
                        touched = touched or r is not q
                        rep_parts.append(r)
                    else:
                        rep_parts.append(q)
                args.append(rep_parts)
            else:
                args.append(o)
        if not touched:
            payload[n.oid] = n
            continue
        if n.opfn is None:
            raise AutodiffError(f"op '{n.op}' cannot be replayed with jets")
        payload[n.oid] = n.opfn(*args, **(n.kwargs or {}))
    return payload[root.oid]


def input_derivative(root, leaf, order=1):
    """Derivative of ``root`` with respect to the values of ``leaf``.

    The graph is re-executed with ``leaf`` carrying a unit tangent; the
    requested Taylor coefficient is returned as a plain array (scalar
    shapes collapse to float).  Derivatives are per-entry directional:
    for batched leaves this is the diagonal d(root_entries)/d(leaf_entries).
    """
    if not isinstance(root, Var) or not isinstance(leaf, Var):
        raise AutodiffError("input_derivative expects Var root and leaf")
    tag = "_dir"
    out = _replay(root, {leaf: Jet.seed(leaf, tag, order=order)})
    if not isinstance(out, Jet):
        return evaluate(np.zeros(root.val.shape))
    comp = out.d1.get(tag) if order == 1 else out.d2.get(tag)
    if comp is None:
        return evaluate(np.zeros(root.val.shape))
    return evaluate(comp)


def second_input_derivative(root, leaf):
    """d^2(root)/d(leaf)^2 along the leaf's entries."""
    return input_derivative(root, leaf, order=2)
