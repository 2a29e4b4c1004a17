"""Action Schema Network: parameters, forward/backward pass, Adam, weights I/O.

Parameters are keyed by ``(layer, kind, name)`` where ``kind`` is ``"act"``
(one entry per action schema, layers ``1..n+1``) or ``"prop"`` (one entry per
predicate, layers ``1..n``).  Their shapes depend on the domain only, so one
:class:`Weights` object drives networks for every problem of the domain.

A network instance for a problem is a thin wrapper around its
:class:`~asnets.grounder.NetworkSpec`; all per-problem structure lives in the
spec's index arrays and every batch is processed with dense gathers.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainMismatch, FormatError, NoEnabledAction
from .grounder import NetworkSpec, domain_fingerprint
from .ppddl import Domain

Key = tuple[int, str, str]

MAGIC = b"ASNETW1"
LOG_FLOOR = 1e-12
DROPOUT = 0.25


def param_shapes(fingerprint: dict, n_layers: int, hidden_size: int) -> dict[Key, tuple[int, int]]:
    """Weight-matrix shapes for a domain; biases have ``shape[0]`` entries."""
    shapes = {}
    for l in range(1, n_layers + 2):
        d_out = 1 if l == n_layers + 1 else hidden_size
        for name, M in fingerprint["schemas"]:
            d_in = 2 * M + 3 if l == 1 else hidden_size * M
            shapes[(l, "act", name)] = (d_out, d_in)
    for l in range(1, n_layers + 1):
        for name, L in fingerprint["predicates"]:
            shapes[(l, "prop", name)] = (hidden_size, hidden_size * L)
    return shapes


@dataclass
class Weights:
    n_layers: int
    hidden_size: int
    fingerprint: dict
    W: dict[Key, np.ndarray]
    b: dict[Key, np.ndarray]
    meta: dict = field(default_factory=dict)

    def keys(self) -> list[Key]:
        return sorted(self.W)

    def arrays(self):
        """``(tag, key, array)`` for every tensor in canonical order."""
        for k in self.keys():
            yield "W", k, self.W[k]
            yield "b", k, self.b[k]

    def copy(self) -> "Weights":
        return Weights(self.n_layers, self.hidden_size, json.loads(json.dumps(self.fingerprint)),
                       {k: v.copy() for k, v in self.W.items()},
                       {k: v.copy() for k, v in self.b.items()}, dict(self.meta))

    @property
    def n_params(self) -> int:
        return sum(a.size for _, _, a in self.arrays())

    def flat(self) -> np.ndarray:
        return np.concatenate([a.ravel() for _, _, a in self.arrays()])


def init_weights(domain: Domain | dict, n_layers: int = 2, hidden_size: int = 16,
                 rng: np.random.Generator | int = 0) -> Weights:
    """Glorot-uniform matrices and zero biases."""
    fp = domain if isinstance(domain, dict) else domain_fingerprint(domain)
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    W, b = {}, {}
    for key, (d_out, d_in) in sorted(param_shapes(fp, n_layers, hidden_size).items()):
        r = np.sqrt(6.0 / (d_in + d_out))
        W[key] = rng.uniform(-r, r, size=(d_out, d_in))
        b[key] = np.zeros(d_out)
    return Weights(n_layers, hidden_size, fp, W, b)


# ---------------------------------------------------------------------------
# batches of network inputs


@dataclass
class Inputs:
    """Per-state network inputs for one problem, stacked along axis 0."""
    bits: np.ndarray   # (B, n_props) 0/1 truth values
    flags: np.ndarray  # (B, n_actions, 3) landmark flags (zeros when disabled)
    mask: np.ndarray   # (B, n_actions) bool, enabled actions

    def __len__(self) -> int:
        return self.bits.shape[0]

    @staticmethod
    def stack(items: list["Inputs"]) -> "Inputs":
        return Inputs(np.concatenate([x.bits for x in items]),
                      np.concatenate([x.flags for x in items]),
                      np.concatenate([x.mask for x in items]))

    def take(self, idx) -> "Inputs":
        return Inputs(self.bits[idx], self.flags[idx], self.mask[idx])


def _elu(z: np.ndarray) -> np.ndarray:
    return np.where(z > 0, z, np.expm1(np.minimum(z, 0)))


def _elu_grad(z: np.ndarray, out: np.ndarray) -> np.ndarray:
    return np.where(z > 0, 1.0, out + 1.0)


def masked_softmax(logits: np.ndarray, mask: np.ndarray) -> np.ndarray:
    if not mask.any(axis=-1).all():
        raise NoEnabledAction("a state in the batch has no enabled action")
    z = np.where(mask, logits, -np.inf)
    z = z - z.max(axis=-1, keepdims=True)
    e = np.where(mask, np.exp(z), 0.0)
    # correctly rounded row sums make the result independent of action order
    total = np.array([math.fsum(row) for row in e.reshape(-1, e.shape[-1])])
    return e / total.reshape(e.shape[:-1] + (1,))


class ASNet:
    """One network instance: shared weights applied to one problem's wiring."""

    def __init__(self, spec: NetworkSpec, weights: Weights):
        if spec.n_layers != weights.n_layers or spec.hidden_size != weights.hidden_size:
            raise DomainMismatch("network spec and weights disagree on depth or width")
        self.spec = spec
        self.weights = weights

    # -- forward -----------------------------------------------------------

    def forward(self, x: Inputs, train: bool = False, rng: np.random.Generator | None = None,
                dropout: float = DROPOUT, return_cache: bool = False):
        """Action probabilities ``(B, n_actions)``; disabled actions get exactly 0."""
        spec, Wt = self.spec, self.weights
        n, dh = spec.n_layers, spec.hidden_size
        B = len(x)
        A, P = spec.n_actions, spec.n_props
        use_dropout = train and dropout > 0
        if use_dropout and rng is None:
            raise ValueError("dropout needs an rng")
        cache = {"x": x, "layers": []}

        H = None  # prop-layer output (B, P, dh)
        for l in range(1, n + 2):
            out_layer = l == n + 1
            layer = {"kind": "act", "l": l, "mods": []}
            outs = []
            for s, name in enumerate(spec.schema_names):
                lo, hi = spec.schema_ranges[s]
                rel = spec.rel[s]
                if l == 1:
                    goal = np.broadcast_to(spec.goal_rel[s], (B,) + rel.shape)
                    inp = np.concatenate([x.flags[:, lo:hi], x.bits[:, rel], goal], axis=2)
                else:
                    inp = H[:, rel].reshape(B, hi - lo, -1)
                key = (l, "act", name)
                if out_layer:
                    # BLAS matrix-vector rounding depends on row position; einsum does not
                    z = np.einsum("bnd,od->bno", inp, Wt.W[key]) + Wt.b[key]
                else:
                    z = inp @ Wt.W[key].T + Wt.b[key]
                if out_layer:
                    outs.append(z[..., 0])
                    layer["mods"].append((s, key, inp, z, None, None))
                    continue
                u = _elu(z)
                drop = None
                if use_dropout:
                    drop = (rng.random(u.shape) >= dropout) / (1.0 - dropout)
                    out = u * drop
                else:
                    out = u
                outs.append(out)
                layer["mods"].append((s, key, inp, z, u, drop))
            cache["layers"].append(layer)
            if out_layer:
                logits = np.concatenate(outs, axis=1) if outs else np.zeros((B, 0))
                break
            U = np.concatenate(outs, axis=1) if outs else np.zeros((B, 0, dh))
            Uext = np.concatenate([U, np.full((B, 1, dh), -np.inf)], axis=1)

            layer = {"kind": "prop", "l": l, "mods": []}
            hs = []
            for f, name in enumerate(spec.pred_names):
                lo, hi = spec.pred_ranges[f]
                pooled, routes = [], []
                for pool_idx in spec.pool[f]:
                    n_f, K = pool_idx.shape
                    if K == 1:
                        mx = Uext[:, pool_idx[:, 0]]
                        route = np.broadcast_to(pool_idx[None, :, 0, None], mx.shape)
                    else:
                        G = Uext[:, pool_idx]  # (B, n_f, K, dh)
                        am = G.argmax(axis=2)  # first maximum, i.e. lowest action index
                        mx = G.max(axis=2)
                        route = pool_idx[np.arange(n_f)[None, :, None], am]
                    # empty slots pool to zero; their gradient lands on the sentinel row
                    pooled.append(np.where(mx == -np.inf, 0.0, mx))
                    routes.append(route)
                if pooled:
                    inp = np.concatenate(pooled, axis=2)
                else:
                    inp = np.zeros((B, hi - lo, 0))
                key = (l, "prop", name)
                z = inp @ Wt.W[key].T + Wt.b[key]
                u = _elu(z)
                drop = None
                if use_dropout:
                    drop = (rng.random(u.shape) >= dropout) / (1.0 - dropout)
                    out = u * drop
                else:
                    out = u
                hs.append(out)
                layer["mods"].append((f, key, inp, z, u, drop, routes))
            cache["layers"].append(layer)
            H = np.concatenate(hs, axis=1) if hs else np.zeros((B, 0, dh))
            assert H.shape[1] == P

        if logits.shape[1] != A:
            raise AssertionError("output layer does not cover every action")
        probs = masked_softmax(logits, x.mask)
        cache["logits"] = logits
        cache["probs"] = probs
        if return_cache:
            return probs, cache
        return probs

    # -- backward ----------------------------------------------------------

    def backward(self, cache, dlogits: np.ndarray) -> dict[tuple[str, Key], np.ndarray]:
        """Gradients of a scalar w.r.t. every parameter, given d(scalar)/d(logits)."""
        spec, Wt = self.spec, self.weights
        dh = spec.hidden_size
        B = dlogits.shape[0]
        A, P = spec.n_actions, spec.n_props
        grads = {("W", k): np.zeros_like(v) for k, v in Wt.W.items()}
        grads.update({("b", k): np.zeros_like(v) for k, v in Wt.b.items()})

        d_act_out = None   # dL/d(action-layer output) (B, A, dh)
        layers = cache["layers"]
        for layer in reversed(layers):
            if layer["kind"] == "act":
                out_layer = layer["l"] == spec.n_layers + 1
                dH = np.zeros((B, P, dh)) if layer["l"] > 1 else None
                for s, key, inp, z, u, drop in layer["mods"]:
                    lo, hi = spec.schema_ranges[s]
                    if out_layer:
                        dz = dlogits[:, lo:hi, None]
                    else:
                        dout = d_act_out[:, lo:hi]
                        if drop is not None:
                            dout = dout * drop
                        dz = dout * _elu_grad(z, u)
                    d_out, d_in = Wt.W[key].shape
                    grads[("W", key)] += dz.reshape(-1, d_out).T @ inp.reshape(-1, d_in)
                    grads[("b", key)] += dz.reshape(-1, d_out).sum(axis=0)
                    if dH is not None and hi > lo:
                        dinp = (dz @ Wt.W[key]).reshape(B, hi - lo, -1, dh)
                        _scatter_add(dH, spec.rel[s], dinp)
                d_prop_out = dH
            else:
                dU = np.zeros((B, A + 1, dh))
                for f, key, inp, z, u, drop, routes in layer["mods"]:
                    lo, hi = spec.pred_ranges[f]
                    dout = d_prop_out[:, lo:hi]
                    if drop is not None:
                        dout = dout * drop
                    dz = dout * _elu_grad(z, u)
                    d_out, d_in = Wt.W[key].shape
                    grads[("W", key)] += dz.reshape(-1, d_out).T @ inp.reshape(-1, d_in)
                    grads[("b", key)] += dz.reshape(-1, d_out).sum(axis=0)
                    if d_in == 0:
                        continue
                    dinp = dz @ Wt.W[key]  # (B, n_f, L*dh)
                    for k, route in enumerate(routes):
                        seg = dinp[:, :, k * dh:(k + 1) * dh]
                        b_idx = np.arange(B)[:, None, None]
                        d_idx = np.arange(dh)[None, None, :]
                        lin = ((b_idx * (A + 1) + route) * dh + d_idx).ravel()
                        dU += np.bincount(lin, weights=seg.ravel(),
                                          minlength=B * (A + 1) * dh).reshape(B, A + 1, dh)
                d_act_out = dU[:, :A]
        return grads

    # -- loss --------------------------------------------------------------

    def loss_and_grad(self, x: Inputs, y: np.ndarray, l2: float = 0.0, train: bool = False,
                      rng: np.random.Generator | None = None, dropout: float = DROPOUT):
        """Cross-entropy over enabled actions (summed over the batch) plus ``l2 * sum ||W||^2``.

        Returns ``(total_loss, data_loss, grads)``.
        """
        probs, cache = self.forward(x, train=train, rng=rng, dropout=dropout, return_cache=True)
        data_loss, dprobs = cross_entropy(probs, y, x.mask)
        dlogits = softmax_backward(probs, dprobs, x.mask)
        grads = self.backward(cache, dlogits)
        reg = 0.0
        if l2:
            for k, W in self.weights.W.items():
                reg += l2 * float(np.sum(W * W))
                grads[("W", k)] += 2.0 * l2 * W
        return data_loss + reg, data_loss, grads


def cross_entropy(probs: np.ndarray, y: np.ndarray, mask: np.ndarray):
    """Loss and d(loss)/d(probs); only enabled actions contribute."""
    pos = mask & (y > 0.5)
    neg = mask & ~(y > 0.5)
    p_pos = np.where(pos, probs, 1.0)
    q_neg = np.where(neg, 1.0 - probs, 1.0)
    loss = -np.sum(np.log(np.maximum(p_pos, LOG_FLOOR))) - np.sum(np.log(np.maximum(q_neg, LOG_FLOOR)))
    grad = np.zeros_like(probs)
    ok_pos = pos & (p_pos > LOG_FLOOR)
    ok_neg = neg & (q_neg > LOG_FLOOR)
    grad[ok_pos] = -1.0 / p_pos[ok_pos]
    grad[ok_neg] = 1.0 / q_neg[ok_neg]
    return float(loss), grad


def softmax_backward(probs: np.ndarray, dprobs: np.ndarray, mask: np.ndarray) -> np.ndarray:
    inner = np.sum(probs * dprobs, axis=-1, keepdims=True)
    return np.where(mask, probs * (dprobs - inner), 0.0)


def _scatter_add(target: np.ndarray, index: np.ndarray, values: np.ndarray) -> None:
    """``target[b, index[i, j], :] += values[b, i, j, :]`` with repeated indices summed."""
    B, P, dh = target.shape
    b_idx = np.arange(B)[:, None, None, None]
    d_idx = np.arange(dh)[None, None, None, :]
    lin = ((b_idx * P + index[None, :, :, None]) * dh + d_idx)
    lin = np.broadcast_to(lin, values.shape).ravel()
    target += np.bincount(lin, weights=values.ravel(), minlength=B * P * dh).reshape(B, P, dh)


# ---------------------------------------------------------------------------
# optimiser


class Adam:
    def __init__(self, lr: float = 5e-4, beta1: float = 0.9, beta2: float = 0.999,
                 eps: float = 1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.t = 0
        self.m: dict = {}
        self.v: dict = {}

    def step(self, weights: Weights, grads: dict[tuple[str, Key], np.ndarray]) -> None:
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for tag, key, param in weights.arrays():
            g = grads.get((tag, key))
            if g is None:
                continue
            m = self.m.get((tag, key))
            if m is None:
                m = self.m[(tag, key)] = np.zeros_like(param)
                self.v[(tag, key)] = np.zeros_like(param)
            v = self.v[(tag, key)]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            param -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


def add_grads(total: dict, more: dict) -> dict:
    for k, g in more.items():
        if k in total:
            total[k] = total[k] + g
        else:
            total[k] = g.copy()
    return total


# ---------------------------------------------------------------------------
# serialisation


def _key_str(key: Key) -> str:
    return f"{key[0]}/{key[1]}/{key[2]}"


def save_weights(weights: Weights, path, meta: dict | None = None) -> None:
    """Write ``MAGIC``, a length-prefixed JSON header, then float64 LE tensors."""
    header = {
        "fingerprint": weights.fingerprint,
        "n_layers": weights.n_layers,
        "hidden_size": weights.hidden_size,
        "meta": {**weights.meta, **(meta or {})},
        "tensors": [[tag, _key_str(k), list(a.shape)] for tag, k, a in weights.arrays()],
    }
    blob = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<Q", len(blob)))
        fh.write(blob)
        for _, _, a in weights.arrays():
            fh.write(np.ascontiguousarray(a, dtype="<f8").tobytes(order="C"))


def read_header(path) -> dict:
    with open(path, "rb") as fh:
        return _read_header(fh)


def _read_header(fh) -> dict:
    if fh.read(len(MAGIC)) != MAGIC:
        raise FormatError("not an ASNet weights file (bad magic)")
    raw = fh.read(8)
    if len(raw) != 8:
        raise FormatError("truncated header")
    (n,) = struct.unpack("<Q", raw)
    blob = fh.read(n)
    if len(blob) != n:
        raise FormatError("truncated header")
    try:
        return json.loads(blob.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"corrupt header: {exc}") from None


def check_fingerprint(found: dict, domain: Domain) -> None:
    expected = domain_fingerprint(domain)
    if found != expected:
        raise DomainMismatch(f"weights were trained for a different domain structure "
                             f"({found.get('domain')!r} vs {expected['domain']!r})")


def load_weights(path, domain: Domain | None = None) -> Weights:
    with open(path, "rb") as fh:
        header = _read_header(fh)
        try:
            fp = header["fingerprint"]
            n_layers, hidden = int(header["n_layers"]), int(header["hidden_size"])
            tensors = header["tensors"]
        except (KeyError, TypeError, ValueError) as exc:
            raise FormatError(f"incomplete header: {exc}") from None
        if domain is not None:
            check_fingerprint(fp, domain)
        W, b = {}, {}
        for tag, ks, shape in tensors:
            layer, kind, name = ks.split("/", 2)
            key = (int(layer), kind, name)
            count = int(np.prod(shape)) if shape else 1
            raw = fh.read(8 * count)
            if len(raw) != 8 * count:
                raise FormatError("truncated tensor data")
            arr = np.frombuffer(raw, dtype="<f8").astype(np.float64).reshape(shape)
            (W if tag == "W" else b)[key] = arr
        if fh.read(1):
            raise FormatError("trailing bytes after tensor data")
    weights = Weights(n_layers, hidden, fp, W, b, header.get("meta", {}))
    expected = param_shapes(fp, n_layers, hidden)
    if set(expected) != set(W) or any(W[k].shape != s for k, s in expected.items()):
        raise FormatError("tensor shapes do not match the recorded domain fingerprint")
    return weights
