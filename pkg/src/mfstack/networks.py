"""Network families: dense MLPs, modified DeepONets, checkpoints.

Forward passes are generic over the value kind flowing through them:
plain float64 arrays (frozen evaluation), ``Var`` tape nodes (parameter
training), or ``Jet`` values (input derivatives).  Parameters live as a
flat list of float64 arrays in a fixed layout so that checkpointing and
optimizer state stay aligned.
"""

from __future__ import annotations

import os

import numpy as np

from . import autodiff as ad

__all__ = [
    "NetworkError",
    "DenseNetwork",
    "ModifiedDeepONet",
    "save_checkpoint",
    "load_checkpoint",
    "network_from_checkpoint",
    "transfer_parameters",
]

_ACTIVATIONS = {"tanh": ad.tanh, "swish": ad.swish, "none": None}


class NetworkError(ValueError):
    pass


def _glorot(rng, n_in, n_out):
    limit = np.sqrt(6.0 / (n_in + n_out))
    return rng.uniform(-limit, limit, size=(n_in, n_out))


def _check_sizes(sizes, what):
    if len(sizes) < 2 or any(int(s) <= 0 for s in sizes):
        raise NetworkError(f"{what} must have >=2 positive entries, got {sizes}")
    return [int(s) for s in sizes]


def _width(x):
    shape = ad._shape_of(x)
    if len(shape) != 2:
        raise NetworkError(f"network input must be 2-D (batch, features), got shape {shape}")
    return shape[1]


def _affine(x, W, b):
    return ad.affine(x, W, b)


class DenseNetwork:
    """Fully connected network over a flat parameter list.

    Layout: [W0, b0, W1, b1, ...] with W of shape (n_in, n_out) and b of
    shape (n_out,).  ``activation="none"`` composes affine maps only, so
    the realized function is affine regardless of depth.
    """

    kind = "dense"

    def __init__(self, layer_sizes, activation="tanh", seed=0, init=True):
        self.layer_sizes = _check_sizes(layer_sizes, "layer_sizes")
        if activation not in _ACTIVATIONS:
            raise NetworkError(f"unknown activation '{activation}'")
        self.activation = activation
        self.params = []
        rng = np.random.default_rng(seed)
        for n_in, n_out in zip(self.layer_sizes[:-1], self.layer_sizes[1:]):
            W = _glorot(rng, n_in, n_out) if init else np.zeros((n_in, n_out))
            self.params.append(W)
            self.params.append(np.zeros(n_out))

    @property
    def param_count(self):
        return sum(p.size for p in self.params)

    def manifest(self):
        return {"kind": self.kind,
                "layer_sizes": list(self.layer_sizes),
                "activation": self.activation}

    def flat_params(self):
        return np.concatenate([p.ravel() for p in self.params])

    def load_flat_params(self, vec):
        vec = np.asarray(vec, dtype=np.float64)
        if vec.size != self.param_count:
            raise NetworkError(
                f"flat vector has {vec.size} entries, network needs {self.param_count}")
        pos = 0
        for i, p in enumerate(self.params):
            self.params[i] = vec[pos:pos + p.size].reshape(p.shape).copy()
            pos += p.size

    def forward(self, x, params=None):
        """Evaluate the network on a (batch, n_in) value of any kind."""
        params = self.params if params is None else params
        got = _width(x)
        if got != self.layer_sizes[0]:
            raise NetworkError(
                f"input width {got} does not match expected {self.layer_sizes[0]}")
        act = _ACTIVATIONS[self.activation]
        n_layers = len(self.layer_sizes) - 1
        h = x
        for i in range(n_layers):
            h = _affine(h, params[2 * i], params[2 * i + 1])
            if act is not None and i < n_layers - 1:
                h = act(h)
        return h


class ModifiedDeepONet:
    """Branch/trunk operator network with encoder-mixed hidden layers.

    The output is dot(branch(u), trunk(x)) over the shared latent width.
    When the network has hidden layers and an activation, one encoder per
    input (branch and trunk) embeds it to the hidden width and every
    hidden state is updated as (1 - z) * E_u + z * E_x where z is the
    layer's activated affine map.  Single-layer towers (the affine
    correlation nets) have no encoders.

    Parameter layout: branch [W, b] pairs, trunk [W, b] pairs, then, if
    encoders are present, encoder_u [W, b] and encoder_x [W, b].
    """

    kind = "deeponet"

    def __init__(self, branch_sizes, trunk_sizes, activation="tanh", seed=0):
        self.branch_sizes = _check_sizes(branch_sizes, "branch_sizes")
        self.trunk_sizes = _check_sizes(trunk_sizes, "trunk_sizes")
        if activation not in _ACTIVATIONS:
            raise NetworkError(f"unknown activation '{activation}'")
        if self.branch_sizes[-1] != self.trunk_sizes[-1]:
            raise NetworkError(
                "branch and trunk must share the latent width, got "
                f"{self.branch_sizes[-1]} vs {self.trunk_sizes[-1]}")
        self.activation = activation
        self.use_encoders = (activation != "none"
                             and len(self.branch_sizes) > 2
                             and len(self.trunk_sizes) > 2)
        if self.use_encoders and self.branch_sizes[1] != self.trunk_sizes[1]:
            raise NetworkError("encoder mixing requires equal hidden widths")

        rng = np.random.default_rng(seed)
        self.params = []
        self._branch_slice = self._append_tower(rng, self.branch_sizes)
        self._trunk_slice = self._append_tower(rng, self.trunk_sizes)
        if self.use_encoders:
            hidden = self.branch_sizes[1]
            start = len(self.params)
            self.params.append(_glorot(rng, self.branch_sizes[0], hidden))
            self.params.append(np.zeros(hidden))
            self.params.append(_glorot(rng, self.trunk_sizes[0], hidden))
            self.params.append(np.zeros(hidden))
            self._encoder_slice = slice(start, start + 4)
        else:
            self._encoder_slice = slice(0, 0)

    def _append_tower(self, rng, sizes):
        start = len(self.params)
        for n_in, n_out in zip(sizes[:-1], sizes[1:]):
            self.params.append(_glorot(rng, n_in, n_out))
            self.params.append(np.zeros(n_out))
        return slice(start, start + 2 * (len(sizes) - 1))

    @property
    def param_count(self):
        return sum(p.size for p in self.params)

    def manifest(self):
        return {"kind": self.kind,
                "branch_sizes": list(self.branch_sizes),
                "trunk_sizes": list(self.trunk_sizes),
                "activation": self.activation}

    def flat_params(self):
        return np.concatenate([p.ravel() for p in self.params])

    def load_flat_params(self, vec):
        vec = np.asarray(vec, dtype=np.float64)
        if vec.size != self.param_count:
            raise NetworkError(
                f"flat vector has {vec.size} entries, network needs {self.param_count}")
        pos = 0
        for i, p in enumerate(self.params):
            self.params[i] = vec[pos:pos + p.size].reshape(p.shape).copy()
            pos += p.size

    def _tower(self, x, pairs, act, enc_u, enc_x):
        n = len(pairs) // 2
        if n == 1:
            return _affine(x, pairs[0], pairs[1])
        h = _affine(x, pairs[0], pairs[1])
        if act is not None:
            h = act(h)
        for i in range(1, n - 1):
            z = _affine(h, pairs[2 * i], pairs[2 * i + 1])
            if act is not None:
                z = act(z)
            if enc_u is not None:
                h = ad.add(ad.mul(ad.sub(1.0, z), enc_u), ad.mul(z, enc_x))
            else:
                h = z
        return _affine(h, pairs[2 * (n - 1)], pairs[2 * (n - 1) + 1])

    def forward(self, u, coords, params=None):
        """Operator output at query coordinates: (batch,) value.

        ``u`` holds sensor readings per row, ``coords`` the matching
        query points.
        """
        params = self.params if params is None else params
        if _width(u) != self.branch_sizes[0]:
            raise NetworkError(
                f"sensor count {_width(u)} does not match branch input "
                f"{self.branch_sizes[0]}")
        if _width(coords) != self.trunk_sizes[0]:
            raise NetworkError(
                f"coordinate width {_width(coords)} does not match trunk input "
                f"{self.trunk_sizes[0]}")
        act = _ACTIVATIONS[self.activation]
        enc_u = enc_x = None
        if self.use_encoders:
            eu_W, eu_b, ex_W, ex_b = params[self._encoder_slice]
            enc_u = act(_affine(u, eu_W, eu_b))
            enc_x = act(_affine(coords, ex_W, ex_b))
        b_out = self._tower(u, params[self._branch_slice], act, enc_u, enc_x)
        t_out = self._tower(coords, params[self._trunk_slice], act, enc_u, enc_x)
        return ad.asum(ad.mul(b_out, t_out), axis=1)


# ---------------------------------------------------------------------------
# checkpoints: text manifest header + raw little-endian doubles


def save_checkpoint(path, net, alpha=None):
    payload = net.flat_params().astype("<f8")
    lines = []
    man = net.manifest()
    lines.append(f"kind = {man['kind']}")
    if man["kind"] == "dense":
        lines.append("layer_sizes = " + ",".join(str(s) for s in man["layer_sizes"]))
    else:
        lines.append("branch_sizes = " + ",".join(str(s) for s in man["branch_sizes"]))
        lines.append("trunk_sizes = " + ",".join(str(s) for s in man["trunk_sizes"]))
    lines.append(f"activation = {man['activation']}")
    if alpha is not None:
        lines.append(f"alpha = {float(alpha)!r}")
    lines.append(f"doubles = {payload.size}")
    header = "\n".join(lines) + "\n---\n"
    with open(path, "wb") as fh:
        fh.write(header.encode("ascii"))
        fh.write(payload.tobytes())


def load_checkpoint(path):
    """Returns (manifest dict, payload vector, alpha or None)."""
    if not os.path.exists(path):
        raise FileNotFoundError(f"checkpoint not found: {path}")
    with open(path, "rb") as fh:
        raw = fh.read()
    sep = b"\n---\n"
    idx = raw.find(sep)
    if idx < 0:
        raise NetworkError(f"corrupt checkpoint (no header terminator): {path}")
    manifest = {}
    for line in raw[:idx].decode("ascii").splitlines():
        key, _, val = line.partition("=")
        manifest[key.strip()] = val.strip()
    count = int(manifest.pop("doubles"))
    alpha = float(manifest.pop("alpha")) if "alpha" in manifest else None
    payload = np.frombuffer(raw[idx + len(sep):], dtype="<f8")
    if payload.size != count:
        raise NetworkError(
            f"corrupt checkpoint {path}: expected {count} doubles, found {payload.size}")
    for key in ("layer_sizes", "branch_sizes", "trunk_sizes"):
        if key in manifest:
            manifest[key] = [int(s) for s in manifest[key].split(",")]
    return manifest, payload.astype(np.float64), alpha


def network_from_checkpoint(path):
    """Rebuild the stored network; returns (net, alpha or None)."""
    manifest, payload, alpha = load_checkpoint(path)
    if manifest["kind"] == "dense":
        net = DenseNetwork(manifest["layer_sizes"], manifest["activation"], init=False)
    elif manifest["kind"] == "deeponet":
        net = ModifiedDeepONet(manifest["branch_sizes"], manifest["trunk_sizes"],
                               manifest["activation"])
    else:
        raise NetworkError(f"unknown checkpoint kind '{manifest['kind']}'")
    net.load_flat_params(payload)
    return net, alpha


def transfer_parameters(src, dst_net):
    """Copy parameters from a checkpoint path or network into ``dst_net``.

    Manifests must match exactly; returns the stored alpha when present.
    """
    if isinstance(src, str):
        manifest, payload, alpha = load_checkpoint(src)
    else:
        manifest, payload, alpha = src.manifest(), src.flat_params(), None
    dst_man = dst_net.manifest()
    diffs = [k for k in set(manifest) | set(dst_man)
             if manifest.get(k) != dst_man.get(k)]
    if diffs:
        raise NetworkError(
            "manifest mismatch on transfer: " + ", ".join(
                f"{k} ({manifest.get(k)} vs {dst_man.get(k)})" for k in sorted(diffs)))
    dst_net.load_flat_params(payload)
    return alpha
