"""Dense float64 tensors with reverse-mode differentiation.

The graph is built eagerly: each operation returns a new :class:`Tensor`
holding its value, its parents and a closure that routes output
gradients into the parents' ``grad`` buffers.  Graphs are single-writer
while being built and differentiated; finished tensors are treated as
immutable and may be shared freely across threads.  A graph is good for
one backward pass; rebuild it for the next step.

Every operation checks its result for NaN/Inf and raises
:class:`~scanpathlab.errors.NumericFault` naming the offending node, so
numeric corruption surfaces where it is produced.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractViolation, NumericFault

MAX_RANK = 4


class Tensor:
    __slots__ = ("data", "parents", "_backward", "grad", "op", "param")

    def __init__(self, data, parents=(), backward=None, op="const", param=None):
        self.data = np.asarray(data, dtype=np.float64)
        if self.data.ndim > MAX_RANK:
            raise ContractViolation(f"rank {self.data.ndim} exceeds max rank {MAX_RANK}")
        self.parents = parents
        self._backward = backward
        self.grad = None
        self.op = op
        self.param = param

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    def __repr__(self):
        return f"Tensor(op={self.op!r}, shape={self.data.shape})"


class Parameter:
    """Named learnable array with a persistent gradient buffer."""

    __slots__ = ("name", "value", "grad")

    def __init__(self, name: str, value):
        self.name = name
        self.value = np.asarray(value, dtype=np.float64)
        if self.value.ndim > MAX_RANK:
            raise ContractViolation(f"parameter {name!r}: rank > {MAX_RANK}")
        if not np.isfinite(self.value).all():
            raise NumericFault(f"parameter {name!r}: non-finite initial value")
        self.grad = np.zeros_like(self.value)

    def leaf(self) -> Tensor:
        """Fresh graph leaf reading the current value."""
        return Tensor(self.value, op=f"param:{self.name}", param=self)

    def __repr__(self):
        return f"Parameter({self.name!r}, shape={self.value.shape})"


def constant(data) -> Tensor:
    t = Tensor(data, op="const")
    if not np.isfinite(t.data).all():
        raise NumericFault("non-finite constant")
    return t


def _node(data, parents, backward, op) -> Tensor:
    t = Tensor(data, parents, backward, op)
    if not np.isfinite(t.data).all():
        raise NumericFault(f"non-finite values produced by node '{op}'")
    return t


def _grad_buf(t: Tensor) -> np.ndarray:
    if t.grad is None:
        t.grad = np.zeros_like(t.data)
    return t.grad


# ---------------------------------------------------------------------------
# elementwise and reduction nodes
# ---------------------------------------------------------------------------


def add(a: Tensor, b: Tensor) -> Tensor:
    if a.data.shape != b.data.shape:
        raise ContractViolation(f"add: shape mismatch {a.data.shape} vs {b.data.shape}")

    def bw(g):
        _grad_buf(a)[...] += g
        _grad_buf(b)[...] += g

    return _node(a.data + b.data, (a, b), bw, "add")


def sub(a: Tensor, b: Tensor) -> Tensor:
    if a.data.shape != b.data.shape:
        raise ContractViolation(f"sub: shape mismatch {a.data.shape} vs {b.data.shape}")

    def bw(g):
        _grad_buf(a)[...] += g
        _grad_buf(b)[...] -= g

    return _node(a.data - b.data, (a, b), bw, "sub")


def mul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.shape != b.data.shape:
        raise ContractViolation(f"mul: shape mismatch {a.data.shape} vs {b.data.shape}")

    def bw(g):
        _grad_buf(a)[...] += g * b.data
        _grad_buf(b)[...] += g * a.data

    return _node(a.data * b.data, (a, b), bw, "mul")


def scale(a: Tensor, c: float) -> Tensor:
    c = float(c)

    def bw(g):
        _grad_buf(a)[...] += c * g

    return _node(a.data * c, (a,), bw, "scale")


def add_many(ts: list[Tensor]) -> Tensor:
    if not ts:
        raise ContractViolation("add_many on an empty list")
    shape = ts[0].data.shape
    for t in ts:
        if t.data.shape != shape:
            raise ContractViolation("add_many: shape mismatch")
    total = ts[0].data.copy()
    for t in ts[1:]:
        total += t.data

    def bw(g):
        for t in ts:
            _grad_buf(t)[...] += g

    return _node(total, tuple(ts), bw, "add_many")


def smul(vec: Tensor, s: Tensor) -> Tensor:
    """Scalar-tensor product: s * vec with s a scalar node."""
    if s.data.shape != ():
        raise ContractViolation("smul: second argument must be a scalar node")

    def bw(g):
        _grad_buf(vec)[...] += float(s.data) * g
        _grad_buf(s)[...] += np.sum(g * vec.data)

    return _node(vec.data * float(s.data), (vec, s), bw, "smul")


def sum_all(a: Tensor) -> Tensor:
    def bw(g):
        _grad_buf(a)[...] += g

    return _node(a.data.sum(), (a,), bw, "sum")


def mean_all(a: Tensor) -> Tensor:
    n = a.data.size

    def bw(g):
        _grad_buf(a)[...] += g / n

    return _node(a.data.mean(), (a,), bw, "mean")


def mean_spatial(a: Tensor) -> Tensor:
    """(C, H, W) -> (C,) per-channel spatial mean."""
    if a.data.ndim != 3:
        raise ContractViolation(f"mean_spatial expects rank 3, got {a.data.ndim}")
    _, h, w = a.data.shape
    n = h * w

    def bw(g):
        _grad_buf(a)[...] += g[:, None, None] / n

    return _node(a.data.mean(axis=(1, 2)), (a,), bw, "mean_spatial")


# ---------------------------------------------------------------------------
# nonlinearities
# ---------------------------------------------------------------------------


def tanh(a: Tensor) -> Tensor:
    out = np.tanh(a.data)

    def bw(g):
        _grad_buf(a)[...] += g * (1.0 - out * out)

    return _node(out, (a,), bw, "tanh")


def sigmoid(a: Tensor) -> Tensor:
    x = a.data
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)

    def bw(g):
        _grad_buf(a)[...] += g * out * (1.0 - out)

    return _node(out, (a,), bw, "sigmoid")


def softmax(v: np.ndarray) -> np.ndarray:
    """Stable softmax of a 1-D vector (plain array version)."""
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1 or v.size == 0:
        raise ContractViolation("softmax expects a non-empty 1-D vector")
    if not np.isfinite(v).all():
        raise ContractViolation("softmax input must be finite")
    e = np.exp(v - v.max())
    return e / e.sum()


def softmax_node(a: Tensor) -> Tensor:
    out = softmax(a.data)

    def bw(g):
        _grad_buf(a)[...] += out * (g - np.dot(out, g))

    return _node(out, (a,), bw, "softmax")


def log_clamped(a: Tensor, eps: float = 1e-12) -> Tensor:
    """log(max(a, eps)); faults on inputs <= 0, zero gradient where clamped."""
    d = a.data
    if np.any(d <= 0.0):
        raise NumericFault(f"log of non-positive value at node '{a.op}'")
    clamped = np.maximum(d, eps)

    def bw(g):
        _grad_buf(a)[...] += np.where(d >= eps, g / d, 0.0)

    return _node(np.log(clamped), (a,), bw, "log_clamped")


def clip(a: Tensor, lo: float, hi: float) -> Tensor:
    """Clamp values into [lo, hi]; gradient passes only strictly inside."""
    d = a.data
    inside = (d > lo) & (d < hi)

    def bw(g):
        _grad_buf(a)[...] += np.where(inside, g, 0.0)

    return _node(np.clip(d, lo, hi), (a,), bw, "clip")


# ---------------------------------------------------------------------------
# shape and linear-algebra nodes
# ---------------------------------------------------------------------------


def concat(ts: list[Tensor]) -> Tensor:
    for t in ts:
        if t.data.ndim != 1:
            raise ContractViolation("concat expects 1-D tensors")
    sizes = [t.data.size for t in ts]
    offs = np.cumsum([0] + sizes)

    def bw(g):
        for t, o, n in zip(ts, offs[:-1], sizes):
            _grad_buf(t)[...] += g[o : o + n]

    return _node(np.concatenate([t.data for t in ts]), tuple(ts), bw, "concat")


def take(a: Tensor, idx) -> Tensor:
    """Basic-indexing slice; gradient scatters back into the source."""
    out = np.array(a.data[idx], dtype=np.float64)

    def bw(g):
        _grad_buf(a)[idx] += g

    return _node(out, (a,), bw, f"take{idx!r}")


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """(m, n) @ (n,) -> (m,) or (m, n) @ (n, k) -> (m, k)."""
    if a.data.ndim != 2 or b.data.ndim not in (1, 2):
        raise ContractViolation("matmul expects a 2-D left operand and 1/2-D right operand")
    if a.data.shape[1] != b.data.shape[0]:
        raise ContractViolation(f"matmul: inner dims {a.data.shape} vs {b.data.shape}")

    def bw(g):
        if b.data.ndim == 1:
            _grad_buf(a)[...] += np.outer(g, b.data)
            _grad_buf(b)[...] += a.data.T @ g
        else:
            _grad_buf(a)[...] += g @ b.data.T
            _grad_buf(b)[...] += a.data.T @ g

    return _node(a.data @ b.data, (a, b), bw, "matmul")


def affine(w: Tensor, x: Tensor, b: Tensor) -> Tensor:
    """w @ x + b for 1-D x; fused to keep graphs small."""
    if w.data.ndim != 2 or x.data.ndim != 1 or b.data.ndim != 1:
        raise ContractViolation("affine expects w (m,n), x (n,), b (m,)")
    m, n = w.data.shape
    if x.data.shape[0] != n or b.data.shape[0] != m:
        raise ContractViolation(
            f"affine: shapes w{w.data.shape} x{x.data.shape} b{b.data.shape} do not agree"
        )

    def bw(g):
        _grad_buf(w)[...] += np.outer(g, x.data)
        _grad_buf(x)[...] += w.data.T @ g
        _grad_buf(b)[...] += g

    return _node(w.data @ x.data + b.data, (w, x, b), bw, "affine")


def dot(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim != 1 or a.data.shape != b.data.shape:
        raise ContractViolation("dot expects equal-length 1-D tensors")

    def bw(g):
        _grad_buf(a)[...] += g * b.data
        _grad_buf(b)[...] += g * a.data

    return _node(np.dot(a.data, b.data), (a, b), bw, "dot")


def dot_each(q: Tensor, mems: list[Tensor]) -> Tensor:
    """out[i] = q . mems[i]; one node for a whole bank of dot products."""
    if not mems:
        raise ContractViolation("dot_each needs at least one memory vector")
    for m in mems:
        if m.data.shape != q.data.shape:
            raise ContractViolation("dot_each: shape mismatch")
    out = np.array([np.dot(q.data, m.data) for m in mems])

    def bw(g):
        acc = _grad_buf(q)
        for gi, m in zip(g, mems):
            acc += gi * m.data
            _grad_buf(m)[...] += gi * q.data

    return _node(out, (q, *mems), bw, "dot_each")


def weighted_sum(vecs: list[Tensor], w: Tensor) -> Tensor:
    """sum_i w[i] * vecs[i] for 1-D vectors and a (k,) weight node."""
    if w.data.ndim != 1 or w.data.shape[0] != len(vecs):
        raise ContractViolation("weighted_sum: weight length must match vector count")
    out = np.zeros_like(vecs[0].data)
    for wi, v in zip(w.data, vecs):
        out += wi * v.data

    def bw(g):
        gw = _grad_buf(w)
        for i, v in enumerate(vecs):
            _grad_buf(v)[...] += w.data[i] * g
            gw[i] += np.dot(v.data, g)

    return _node(out, (w, *vecs), bw, "weighted_sum")


# ---------------------------------------------------------------------------
# convolution and interpolation nodes
# ---------------------------------------------------------------------------


def _im2col(xp: np.ndarray, kh: int, kw: int, stride: int, ho: int, wo: int) -> np.ndarray:
    cin = xp.shape[0]
    cols = np.empty((cin * kh * kw, ho * wo), dtype=np.float64)
    r = 0
    for c in range(cin):
        for ki in range(kh):
            for kj in range(kw):
                block = xp[c, ki : ki + stride * ho : stride, kj : kj + stride * wo : stride]
                cols[r] = block.reshape(-1)
                r += 1
    return cols


def conv2d(x: Tensor, w: Tensor, b: Tensor, stride: int = 2, pad: int = 1) -> Tensor:
    """2-D convolution, x (Cin,H,W), w (Cout,Cin,kh,kw), b (Cout,)."""
    if x.data.ndim != 3 or w.data.ndim != 4 or b.data.ndim != 1:
        raise ContractViolation("conv2d expects x (Cin,H,W), w (Cout,Cin,kh,kw), b (Cout,)")
    cin, h, wdt = x.data.shape
    cout, cin_w, kh, kw = w.data.shape
    if cin_w != cin or b.data.shape[0] != cout:
        raise ContractViolation("conv2d: channel dims do not agree")
    hp, wp = h + 2 * pad, wdt + 2 * pad
    ho = (hp - kh) // stride + 1
    wo = (wp - kw) // stride + 1
    if ho < 1 or wo < 1:
        raise ContractViolation("conv2d: output would be empty")
    xp = np.zeros((cin, hp, wp), dtype=np.float64)
    xp[:, pad : pad + h, pad : pad + wdt] = x.data
    cols = _im2col(xp, kh, kw, stride, ho, wo)
    wmat = w.data.reshape(cout, -1)
    out = (wmat @ cols + b.data[:, None]).reshape(cout, ho, wo)

    def bw(g):
        gmat = g.reshape(cout, -1)
        _grad_buf(w)[...] += (gmat @ cols.T).reshape(w.data.shape)
        _grad_buf(b)[...] += gmat.sum(axis=1)
        dcols = wmat.T @ gmat
        dxp = np.zeros_like(xp)
        r = 0
        for c in range(cin):
            for ki in range(kh):
                for kj in range(kw):
                    dxp[c, ki : ki + stride * ho : stride, kj : kj + stride * wo : stride] += (
                        dcols[r].reshape(ho, wo)
                    )
                    r += 1
        _grad_buf(x)[...] += dxp[:, pad : pad + h, pad : pad + wdt]

    return _node(out, (x, w, b), bw, "conv2d")


def interp_matrix(n_in: int, n_out: int) -> np.ndarray:
    """Row-stochastic 1-D linear interpolation matrix (n_out, n_in).

    Sample centers follow the half-pixel convention
    ``p = (i + 0.5) * n_in / n_out - 0.5``; positions past the ends
    extrapolate linearly from the outermost cell pair, which keeps affine
    ramps exact everywhere.
    """
    m = np.zeros((n_out, n_in), dtype=np.float64)
    if n_in == 1:
        m[:, 0] = 1.0
        return m
    r = n_in / n_out
    for i in range(n_out):
        p = (i + 0.5) * r - 0.5
        i0 = min(max(int(np.floor(p)), 0), n_in - 2)
        w1 = p - i0
        m[i, i0] = 1.0 - w1
        m[i, i0 + 1] = w1
    return m


def upscale2x(a: Tensor) -> Tensor:
    """Per-channel bilinear 2x upscale of a (C, H, W) tensor."""
    if a.data.ndim != 3:
        raise ContractViolation(f"upscale2x expects rank 3, got {a.data.ndim}")
    _, h, w = a.data.shape
    mr = interp_matrix(h, 2 * h)
    mc = interp_matrix(w, 2 * w)
    out = np.matmul(mr[None, :, :], np.matmul(a.data, mc.T))

    def bw(g):
        _grad_buf(a)[...] += np.matmul(mr.T[None, :, :], np.matmul(g, mc))

    return _node(out, (a,), bw, "upscale2x")


# ---------------------------------------------------------------------------
# backward pass, gradients and checks
# ---------------------------------------------------------------------------


def _topo(root: Tensor) -> list[Tensor]:
    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, done = stack.pop()
        if done:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node.parents:
            if id(p) not in seen:
                stack.append((p, False))
    return order


def reverse_grad(loss: Tensor, params) -> None:
    """Write d(loss)/d(param) into each Parameter.grad.

    Parameters that do not participate in the graph get exactly zero
    gradient.  Parameters outside ``params`` are left untouched.
    """
    if loss.data.shape != ():
        raise ContractViolation(f"loss must be a scalar node, got shape {loss.data.shape}")
    params = list(params)
    wanted = {id(p) for p in params}
    for p in params:
        p.grad[...] = 0.0
    order = _topo(loss)
    loss.grad = np.ones((), dtype=np.float64)
    for node in reversed(order):
        g = node.grad
        if g is None:
            continue
        if not np.isfinite(g).all():
            raise NumericFault(f"non-finite gradient at node '{node.op}'")
        if node._backward is not None:
            node._backward(g)
        if node.param is not None and id(node.param) in wanted:
            node.param.grad += g


@dataclass
class ParamCheck:
    name: str
    max_rel_err: float
    worst_index: tuple
    analytic: float
    numeric: float


@dataclass
class FiniteDiffReport:
    checks: list[ParamCheck]
    eps: float
    tol: float

    @property
    def ok(self) -> bool:
        return all(c.max_rel_err < self.tol for c in self.checks)

    @property
    def worst(self) -> ParamCheck:
        return max(self.checks, key=lambda c: c.max_rel_err)

    def __str__(self):
        lines = [
            f"{c.name}: max rel err {c.max_rel_err:.3e} at {c.worst_index} "
            f"(analytic {c.analytic:.6e}, numeric {c.numeric:.6e})"
            for c in self.checks
        ]
        return "\n".join(lines)


def finite_diff_check(f, params, eps: float = 1e-5, tol: float = 1e-4) -> FiniteDiffReport:
    """Compare reverse-mode gradients of f(params) with central differences.

    ``f`` must rebuild its graph from the current parameter values on
    every call and return a scalar Tensor.
    """
    if eps <= 0:
        raise ContractViolation(f"finite_diff_check needs eps > 0, got {eps}")
    params = list(params)
    reverse_grad(f(params), params)
    analytic = {p.name: p.grad.copy() for p in params}
    checks = []
    for p in params:
        worst = ParamCheck(p.name, 0.0, (), 0.0, 0.0)
        it = np.ndindex(p.value.shape) if p.value.shape else [()]
        for idx in it:
            v0 = p.value[idx]
            p.value[idx] = v0 + eps
            fp = float(f(params).data)
            p.value[idx] = v0 - eps
            fm = float(f(params).data)
            p.value[idx] = v0
            num = (fp - fm) / (2.0 * eps)
            ana = float(analytic[p.name][idx])
            rel = abs(ana - num) / max(abs(ana), abs(num), 1e-6)
            if rel >= worst.max_rel_err:
                worst = ParamCheck(p.name, rel, idx, ana, num)
        checks.append(worst)
        p.grad[...] = analytic[p.name]
    return FiniteDiffReport(checks, eps, tol)
