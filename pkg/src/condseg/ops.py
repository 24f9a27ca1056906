"""Differentiable operations over batched tensors.

Graph tensors carry a leading batch axis: images are [B,3,H,W], features
[B,Cf,H,W], per-pixel class maps [B,C,H,W], per-class centers/kernels
[B,C,Cf]. Every op validates shapes at construction, computes its forward
value eagerly, and captures whatever activations its hand-derived backward
rule needs inside the ``grad_fn`` closure.

The 1x1-style ops (``channel_linear``, ``cond_classify``, ``group_linear``,
``class_aggregate``) route each sample through the same einsum kernels as
the single-sample reference functions in ``heads``, so the two paths agree
bit for bit. ``conv2d`` is the one hot spot and uses an im2col + BLAS
matmul kernel instead (single-threaded, deterministic per build).

Every op registered here must appear in the gradient-check suite at the
bottom of the module; a test enumerates the registry against the cases.
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from . import tensor
from .autodiff import GradCheckReport, Var, backward, grad_check, leaf
from .errors import DimensionError, NumericError, RangeError
from .rng import Rng

REGISTERED_OPS: set[str] = set()


def _register(name: str):
    def wrap(fn):
        REGISTERED_OPS.add(name)
        fn.op_name = name
        return fn
    return wrap


def _require(cond: bool, msg: str) -> None:
    if not cond:
        raise DimensionError(msg)


# -- elementwise and reductions ---------------------------------------------

@_register("add")
def add(a: Var, b: Var) -> Var:
    _require(a.data.shape == b.data.shape,
             f"add shapes differ: {a.data.shape} vs {b.data.shape}")
    return Var(a.data + b.data, (a, b), lambda g: (g, g), op="add")


@_register("mul")
def mul(a: Var, b: Var) -> Var:
    _require(a.data.shape == b.data.shape,
             f"mul shapes differ: {a.data.shape} vs {b.data.shape}")
    ad, bd = a.data, b.data
    return Var(ad * bd, (a, b), lambda g: (g * bd, g * ad), op="mul")


@_register("scale")
def scale(x: Var, factor: float) -> Var:
    c = float(factor)
    return Var(x.data * c, (x,), lambda g: (g * c,), op="scale")


@_register("relu")
def relu(x: Var) -> Var:
    mask = x.data > 0  # subgradient at 0 is defined as 0
    return Var(np.where(mask, x.data, 0), (x,),
               lambda g: (g * mask.astype(g.dtype),), op="relu")


@_register("sum_all")
def sum_all(x: Var) -> Var:
    return Var(np.asarray(x.data.sum()), (x,),
               lambda g: (np.full_like(x.data, float(g)),), op="sum_all")


@_register("mean_all")
def mean_all(x: Var) -> Var:
    size = float(x.data.size)
    return Var(np.asarray(x.data.mean()), (x,),
               lambda g: (np.full_like(x.data, float(g) / size),), op="mean_all")


@_register("detach")
def detach(x: Var) -> Var:
    """Pass the value through, block the gradient."""
    return Var(x.data, (x,), lambda g: (None,), op="detach")


# -- linear algebra ----------------------------------------------------------

@_register("matmul")
def matmul(a: Var, b: Var) -> Var:
    out = tensor.matmul(a.data, b.data)

    def grad_fn(g):
        return (tensor.matmul(g, b.data.T), tensor.matmul(a.data.T, g))

    return Var(out, (a, b), grad_fn, op="matmul")


# -- convolution -------------------------------------------------------------

def _im2col(xpad: np.ndarray, kh: int, kw: int, stride: int,
            out_h: int, out_w: int) -> np.ndarray:
    b, c = xpad.shape[:2]
    cols = np.empty((b, c, kh, kw, out_h, out_w), dtype=xpad.dtype)
    for i in range(kh):
        for j in range(kw):
            cols[:, :, i, j] = xpad[:, :, i:i + stride * out_h:stride,
                                    j:j + stride * out_w:stride]
    return cols.reshape(b, c * kh * kw, out_h * out_w)


@_register("conv2d")
def conv2d(x: Var, w: Var, b: Var | None, stride: int = 1, padding: int = 1) -> Var:
    """Cross-correlation of [B,Cin,H,W] with [Cout,Cin,kh,kw] plus bias."""
    _require(x.data.ndim == 4, f"conv2d input must be [B,C,H,W], got {x.data.shape}")
    _require(w.data.ndim == 4, f"conv2d weight must be rank 4, got {w.data.shape}")
    bsz, cin, h, wdt = x.data.shape
    cout, cin_w, kh, kw = w.data.shape
    _require(cin == cin_w, f"conv2d channels differ: input {cin}, weight {cin_w}")
    _require(kh in (1, 3) and kw in (1, 3), f"conv2d kernel must be 1 or 3, got {kh}x{kw}")
    if b is not None:
        _require(b.data.shape == (cout,), f"conv2d bias must be [{cout}], got {b.data.shape}")
    out_h = (h + 2 * padding - kh) // stride + 1
    out_w = (wdt + 2 * padding - kw) // stride + 1
    _require(out_h >= 1 and out_w >= 1, "conv2d output would be empty")

    xpad = np.pad(x.data, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    cols = _im2col(xpad, kh, kw, stride, out_h, out_w)  # [B, Cin*kh*kw, N]
    wf = w.data.reshape(cout, cin * kh * kw)
    y = np.matmul(wf[None], cols)  # [B, Cout, N]
    if b is not None:
        y = y + b.data[None, :, None]
    out = y.reshape(bsz, cout, out_h, out_w)

    def grad_fn(g):
        gf = g.reshape(bsz, cout, out_h * out_w)
        gw = np.matmul(gf, cols.transpose(0, 2, 1)).sum(axis=0).reshape(w.data.shape)
        gcols = np.matmul(wf.T[None], gf).reshape(bsz, cin, kh, kw, out_h, out_w)
        gxpad = np.zeros_like(xpad)
        for i in range(kh):
            for j in range(kw):
                gxpad[:, :, i:i + stride * out_h:stride,
                      j:j + stride * out_w:stride] += gcols[:, :, i, j]
        if padding:
            gx = gxpad[:, :, padding:padding + h, padding:padding + wdt]
        else:
            gx = gxpad
        gb = gf.sum(axis=(0, 2)) if b is not None else None
        return (np.ascontiguousarray(gx), gw, gb)

    parents = (x, w, b) if b is not None else (x, w)
    if b is None:
        return Var(out, parents, lambda g: grad_fn(g)[:2], op="conv2d")
    return Var(out, parents, grad_fn, op="conv2d")


# -- per-channel classifiers --------------------------------------------------

@_register("channel_linear")
def channel_linear(x: Var, w: Var, b: Var | None = None) -> Var:
    """1x1 convolution: [B,Cin,H,W] x [Cout,Cin] (+bias) -> [B,Cout,H,W]."""
    _require(x.data.ndim == 4, f"channel_linear input must be [B,C,H,W], got {x.data.shape}")
    bsz, cin, h, wdt = x.data.shape
    _require(w.data.ndim == 2 and w.data.shape[1] == cin,
             f"channel_linear weight {w.data.shape} does not match {cin} channels")
    cout = w.data.shape[0]
    if b is not None:
        _require(b.data.shape == (cout,), f"bias must be [{cout}], got {b.data.shape}")
    n = h * wdt
    xf = x.data.reshape(bsz, cin, n)
    planes = []
    for s in range(bsz):
        y = tensor.matmul(w.data, xf[s])
        if b is not None:
            y = y + b.data[:, None]
        planes.append(y)
    out = np.stack(planes).reshape(bsz, cout, h, wdt)

    def grad_fn(g):
        gf = g.reshape(bsz, cout, n)
        gw = np.zeros_like(w.data)
        gx = np.empty_like(xf)
        for s in range(bsz):
            gw += tensor.matmul(gf[s], xf[s].T)
            gx[s] = tensor.matmul(w.data.T, gf[s])
        gb = gf.sum(axis=(0, 2)) if b is not None else None
        gxr = gx.reshape(x.data.shape)
        return (gxr, gw, gb) if b is not None else (gxr, gw)

    parents = (x, w, b) if b is not None else (x, w)
    return Var(out, parents, grad_fn, op="channel_linear")


@_register("softmax_channels")
def softmax_channels(x: Var) -> Var:
    _require(x.data.ndim == 4, f"softmax_channels expects [B,C,H,W], got {x.data.shape}")
    shifted = x.data - x.data.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    s = e / e.sum(axis=1, keepdims=True)

    def grad_fn(g):
        inner = (g * s).sum(axis=1, keepdims=True)
        return (s * (g - inner),)

    return Var(s, (x,), grad_fn, op="softmax_channels")


@_register("sigmoid_channels")
def sigmoid_channels(x: Var) -> Var:
    d = x.data
    s = np.where(d >= 0, 1.0 / (1.0 + np.exp(-np.abs(d))),
                 np.exp(-np.abs(d)) / (1.0 + np.exp(-np.abs(d)))).astype(d.dtype)

    def grad_fn(g):
        return (g * s * (1.0 - s),)

    return Var(s, (x,), grad_fn, op="sigmoid_channels")


# -- the conditional-classifier ops -------------------------------------------

@_register("class_aggregate")
def class_aggregate(f: Var, p: Var, divisor: str = "N") -> Var:
    """Per-class centers from probability-weighted feature pooling.

    E[b,s] = sum_j P[b,s,j] * F[b,:,j] / N   (divisor "N", the default)
    E[b,s] = sum_j P[b,s,j] * F[b,:,j] / sum_j P[b,s,j]   (divisor "mass")
    """
    _require(f.data.ndim == 4 and p.data.ndim == 4,
             f"class_aggregate expects [B,*,H,W] pairs, got {f.data.shape}, {p.data.shape}")
    _require(f.data.shape[0] == p.data.shape[0] and f.data.shape[2:] == p.data.shape[2:],
             f"class_aggregate spatial/batch mismatch: {f.data.shape} vs {p.data.shape}")
    if divisor not in ("N", "mass"):
        raise DimensionError(f"unknown class_aggregate divisor {divisor!r}")
    bsz, cf, h, w = f.data.shape
    c = p.data.shape[1]
    n = h * w
    ff = f.data.reshape(bsz, cf, n)
    pf = p.data.reshape(bsz, c, n)
    raw = np.stack([tensor.matmul(pf[s], ff[s].T) for s in range(bsz)])  # [B,C,Cf]

    if divisor == "N":
        out = raw * (1.0 / n)

        def grad_fn(g):
            gp = np.empty_like(pf)
            gf = np.empty_like(ff)
            for s in range(bsz):
                gp[s] = tensor.matmul(g[s], ff[s]) * (1.0 / n)
                gf[s] = tensor.matmul(g[s].T, pf[s]) * (1.0 / n)
            return (gf.reshape(f.data.shape), gp.reshape(p.data.shape))

        return Var(out, (f, p), grad_fn, op="class_aggregate")

    mass = np.maximum(pf.sum(axis=2), 1e-12)  # [B,C]; clamp keeps empties finite
    out = raw / mass[:, :, None]

    def grad_fn_mass(g):
        gp = np.empty_like(pf)
        gf = np.empty_like(ff)
        for s in range(bsz):
            ge = g[s] / mass[s][:, None]            # [C,Cf]
            dot = (g[s] * out[s]).sum(axis=1)       # [C]
            gp[s] = tensor.matmul(ge, ff[s]) - (dot / mass[s])[:, None]
            gf[s] = tensor.matmul(ge.T, pf[s])
        return (gf.reshape(f.data.shape), gp.reshape(p.data.shape))

    return Var(out, (f, p), grad_fn_mass, op="class_aggregate")


@_register("group_linear")
def group_linear(e: Var, w: Var, b: Var) -> Var:
    """Per-class affine map: out[b,s] = W[s] @ E[b,s] + bias[s].

    Strictly groupwise: class s never mixes with class t != s.
    """
    _require(e.data.ndim == 3, f"group_linear input must be [B,C,D], got {e.data.shape}")
    bsz, c, d = e.data.shape
    _require(w.data.ndim == 3 and w.data.shape[0] == c and w.data.shape[2] == d,
             f"group_linear weight {w.data.shape} incompatible with input {e.data.shape}")
    dout = w.data.shape[1]
    _require(b.data.shape == (c, dout),
             f"group_linear bias must be [{c},{dout}], got {b.data.shape}")
    out = np.stack([_apply_group_linear(e.data[s], w.data, b.data) for s in range(bsz)])

    def grad_fn(g):
        gw = np.einsum("bso,bsd->sod", g, e.data)
        ge = np.einsum("sod,bso->bsd", w.data, g)
        gb = g.sum(axis=0)
        return (ge, gw, gb)

    return Var(out, (e, w, b), grad_fn, op="group_linear")


def _apply_group_linear(e2: np.ndarray, w3: np.ndarray, b2: np.ndarray) -> np.ndarray:
    rows = [tensor.matmul(w3[s], e2[s][:, None])[:, 0] + b2[s] for s in range(w3.shape[0])]
    return np.stack(rows)


@_register("cond_classify")
def cond_classify(f: Var, kernels: Var) -> Var:
    """Correlate per-sample kernels with features: Y[b,s,j] = K[b,s] . F[b,:,j].

    No bias term: the prediction is the kernel response alone.
    """
    _require(f.data.ndim == 4, f"cond_classify features must be [B,Cf,H,W], got {f.data.shape}")
    bsz, cf, h, w = f.data.shape
    _require(kernels.data.ndim == 3 and kernels.data.shape[0] == bsz
             and kernels.data.shape[2] == cf,
             f"cond_classify kernels {kernels.data.shape} incompatible with features "
             f"{f.data.shape}")
    n = h * w
    ff = f.data.reshape(bsz, cf, n)
    out = np.stack([tensor.matmul(kernels.data[s], ff[s]) for s in range(bsz)])
    out = out.reshape(bsz, kernels.data.shape[1], h, w)

    def grad_fn(g):
        gf = g.reshape(bsz, kernels.data.shape[1], n)
        gk = np.empty_like(kernels.data)
        gx = np.empty_like(ff)
        for s in range(bsz):
            gk[s] = tensor.matmul(gf[s], ff[s].T)
            gx[s] = tensor.matmul(kernels.data[s].T, gf[s])
        return (gx.reshape(f.data.shape), gk)

    return Var(out, (f, kernels), grad_fn, op="cond_classify")


# -- losses -------------------------------------------------------------------

def _check_labels(labels: np.ndarray, num_classes: int, ignore: int) -> None:
    present = labels[labels != ignore]
    if present.size and int(present.max()) >= num_classes:
        raise RangeError(
            f"label {int(present.max())} out of range for {num_classes} classes")


@_register("cross_entropy")
def cross_entropy(y: Var, labels: np.ndarray, ignore: int = 255) -> Var:
    """Mean over non-ignored pixels of -log softmax(Y)[label].

    Computed through log-sum-exp, so large logit margins are safe. Labels
    are constants: no gradient flows into them.
    """
    data = y.data
    _require(data.ndim == 4, f"cross_entropy logits must be [B,C,H,W], got {data.shape}")
    _require(labels.shape == (data.shape[0],) + data.shape[2:],
             f"labels {labels.shape} do not match logits {data.shape}")
    num_classes = data.shape[1]
    _check_labels(labels, num_classes, ignore)
    valid = labels != ignore
    count = int(valid.sum())
    if count == 0:
        raise NumericError("cross_entropy: every pixel is ignored, mean undefined")

    m = data.max(axis=1, keepdims=True)
    lse = np.log(np.exp(data - m).sum(axis=1, keepdims=True)) + m  # [B,1,H,W]
    safe_labels = np.where(valid, labels, 0).astype(np.int64)
    picked = np.take_along_axis(data, safe_labels[:, None], axis=1)[:, 0]
    pixel_losses = lse[:, 0] - picked
    total = pixel_losses[valid].sum() / count

    def grad_fn(g):
        gy = np.exp(data - lse)  # softmax
        bi, hi, wi = np.nonzero(valid)
        gy[bi, safe_labels[bi, hi, wi], hi, wi] -= 1.0
        gy *= valid[:, None].astype(data.dtype) * (float(g) / count)
        return (gy,)

    return Var(np.asarray(total, dtype=data.dtype), (y,), grad_fn, op="cross_entropy")


@_register("soft_dice")
def soft_dice(p: Var, onehot: np.ndarray, valid: np.ndarray, eps: float = 1e-5) -> Var:
    """Overlap loss 1 - 2*sum(pq) / (sum(p^2) + sum(q^2) + eps).

    Computed per class over one sample's valid pixels, averaged over the
    classes with truth or prediction mass, then averaged over the batch.
    Ignored pixels are excluded from every sum and receive zero gradient.
    """
    P = p.data
    _require(P.ndim == 4, f"soft_dice probabilities must be [B,C,H,W], got {P.shape}")
    _require(onehot.shape == P.shape,
             f"one-hot mask {onehot.shape} does not match probabilities {P.shape}")
    _require(valid.shape == (P.shape[0],) + P.shape[2:],
             f"valid mask {valid.shape} does not match {P.shape}")
    if int(valid.sum()) == 0:
        raise NumericError("soft_dice: every pixel is ignored, mean undefined")
    eps = float(eps)

    vm = valid[:, None].astype(P.dtype)
    pv = P * vm
    q = onehot.astype(P.dtype, copy=False)
    s_pq = (pv * q).sum(axis=(2, 3))
    s_pp = (pv * pv).sum(axis=(2, 3))
    s_qq = (q * q).sum(axis=(2, 3))
    num = 2.0 * s_pq
    den = s_pp + s_qq + eps
    loss_bc = 1.0 - num / den
    include = ((s_qq > 0) | (s_pp > 0)).astype(P.dtype)
    n_inc = include.sum(axis=1)
    if (n_inc == 0).any():
        raise NumericError("soft_dice: a sample has no classes to average")
    total = ((loss_bc * include).sum(axis=1) / n_inc).mean()

    def grad_fn(g):
        # d loss_bc / d p_i = (2*num*p_i - 2*q_i*den) / den^2 at valid pixels
        weight = include / n_inc[:, None] / P.shape[0] * float(g)
        gnum = 2.0 * num[:, :, None, None] * pv
        gden = 2.0 * q * den[:, :, None, None]
        gp = (gnum - gden) / (den * den)[:, :, None, None]
        gp *= weight[:, :, None, None] * vm
        return (gp.astype(P.dtype, copy=False),)

    return Var(np.asarray(total, dtype=P.dtype), (p,), grad_fn, op="soft_dice")


@_register("bce_probmap")
def bce_probmap(p: Var, onehot: np.ndarray, valid: np.ndarray) -> Var:
    """Per-class binary cross entropy against the one-hot truth.

    Mean over classes and non-ignored pixels; probabilities are clamped to
    [1e-7, 1-1e-7] and the clamp blocks the gradient outside that range.
    """
    P = p.data
    _require(P.ndim == 4, f"bce_probmap expects [B,C,H,W], got {P.shape}")
    _require(onehot.shape == P.shape,
             f"one-hot mask {onehot.shape} does not match probabilities {P.shape}")
    _require(valid.shape == (P.shape[0],) + P.shape[2:],
             f"valid mask {valid.shape} does not match {P.shape}")
    n_valid = int(valid.sum())
    if n_valid == 0:
        raise NumericError("bce_probmap: every pixel is ignored, mean undefined")
    lo, hi = 1e-7, 1.0 - 1e-7

    vm = valid[:, None].astype(P.dtype)
    q = onehot.astype(P.dtype, copy=False)
    pc = np.clip(P, lo, hi)
    count = float(n_valid * P.shape[1])
    pixel = -(q * np.log(pc) + (1.0 - q) * np.log1p(-pc))
    total = (pixel * vm).sum() / count

    def grad_fn(g):
        inside = ((P > lo) & (P < hi)).astype(P.dtype)
        gp = (-q / pc + (1.0 - q) / (1.0 - pc)) * vm * inside * (float(g) / count)
        return (gp.astype(P.dtype, copy=False),)

    return Var(np.asarray(total, dtype=P.dtype), (p,), grad_fn, op="bce_probmap")


# -- gradient-check suite ------------------------------------------------------
# One entry per registered op (some ops get extra composites). Each case is
# (case_name, ops_covered, builder); builders draw their own inputs from the
# supplied rng and return a GradCheckReport.

def _proj(rng: Rng, tag: str, shape) -> np.ndarray:
    return rng.stream(f"proj/{tag}").normal_array(shape)


def _away_from_kink(arr: np.ndarray, margin: float = 0.1) -> np.ndarray:
    return arr + np.sign(arr) * margin + (arr == 0) * margin


def _interior_probs(arr: np.ndarray) -> np.ndarray:
    return 0.1 + 0.8 / (1.0 + np.exp(-arr))


def _labels_for(rng: Rng, tag: str, shape, num_classes: int,
                n_ignored: int = 2) -> np.ndarray:
    r = rng.stream(f"labels/{tag}")
    labels = np.empty(shape, dtype=np.int64)
    flat = labels.reshape(-1)
    for i in range(flat.size):
        flat[i] = r.randint(num_classes)
    for _ in range(n_ignored):
        flat[r.randint(flat.size)] = 255
    return labels


def _case_detach(rng: Rng) -> GradCheckReport:
    # Finite differences see through a detach, so the oracle is the identity:
    # d/dx sum(x * stop(x)) must equal stop(x) exactly.
    x = rng.stream("gradcheck/detach/x").normal_array((3, 4))
    v = leaf(x.copy(), name="x")
    loss = sum_all(mul(v, detach(v)))
    backward(loss)
    ok = v.grad is not None and np.array_equal(v.grad, x)
    return GradCheckReport(name="detach", tolerance=0.0,
                           max_rel_err=0.0 if ok else float("inf"), passed=ok)


def build_gradcheck_cases() -> list[tuple[str, tuple[str, ...], Callable[[Rng], GradCheckReport]]]:
    def case(name, ops_covered, fn, shapes, tolerance=1e-5, transforms=None):
        def run(rng: Rng) -> GradCheckReport:
            return grad_check(name, fn, shapes, rng, tolerance=tolerance,
                              transforms=transforms)
        return (name, ops_covered, run)

    fixed = Rng(0xC0FFEE)

    r_add = _proj(fixed, "add", (3, 4))
    r_relu = _proj(fixed, "relu", (4, 5))
    r_mm = _proj(fixed, "matmul", (3, 2))
    r_conv = _proj(fixed, "conv2d", (2, 3, 5, 5))
    r_cl = _proj(fixed, "channel_linear", (2, 2, 4, 4))
    r_sm = _proj(fixed, "softmax", (1, 3, 4, 4))
    r_sg = _proj(fixed, "sigmoid", (1, 2, 3, 3))
    r_agg = _proj(fixed, "aggregate", (2, 2, 3))
    r_aggm = _proj(fixed, "aggregate_mass", (2, 2, 3))
    r_gl = _proj(fixed, "group_linear", (2, 3, 4))
    r_cc = _proj(fixed, "cond_classify", (2, 2, 4, 4))

    ce_labels = _labels_for(fixed, "xent", (1, 4, 4), num_classes=3)
    dice_labels = _labels_for(fixed, "dice", (1, 3, 3), num_classes=3, n_ignored=1)
    from .losses import one_hot_mask  # local import avoids a cycle
    dice_q, dice_valid = one_hot_mask(dice_labels, 3)

    cases = [
        case("add", ("add", "sum_all"),
             lambda a, b: sum_all(mul(add(a, b), leaf(r_add))),
             {"a": (3, 4), "b": (3, 4)}),
        case("mul", ("mul",),
             lambda a, b: sum_all(mul(a, b)),
             {"a": (3, 4), "b": (3, 4)}),
        case("scale", ("scale", "mean_all"),
             lambda x: mean_all(scale(x, 1.7)),
             {"x": (3, 4)}),
        case("relu", ("relu",),
             lambda x: sum_all(mul(relu(x), leaf(r_relu))),
             {"x": (4, 5)}, tolerance=1e-6,
             transforms={"x": _away_from_kink}),
        case("matmul", ("matmul",),
             lambda a, b: sum_all(mul(matmul(a, b), leaf(r_mm))),
             {"a": (3, 4), "b": (4, 2)}),
        case("matmul_chain", ("matmul",),
             lambda a, b, c: sum_all(matmul(matmul(a, b), c)),
             {"a": (2, 3), "b": (3, 4), "c": (4, 2)}, tolerance=1e-7),
        case("conv2d", ("conv2d",),
             lambda x, w, b: sum_all(mul(conv2d(x, w, b, stride=1, padding=1),
                                         leaf(r_conv))),
             {"x": (2, 2, 5, 5), "w": (3, 2, 3, 3), "b": (3,)}),
        case("channel_linear", ("channel_linear",),
             lambda x, w, b: sum_all(mul(channel_linear(x, w, b), leaf(r_cl))),
             {"x": (2, 3, 4, 4), "w": (2, 3), "b": (2,)}),
        case("softmax_channels", ("softmax_channels",),
             lambda x: sum_all(mul(softmax_channels(x), leaf(r_sm))),
             {"x": (1, 3, 4, 4)}),
        case("sigmoid_channels", ("sigmoid_channels",),
             lambda x: sum_all(mul(sigmoid_channels(x), leaf(r_sg))),
             {"x": (1, 2, 3, 3)}),
        case("class_aggregate", ("class_aggregate",),
             lambda f, p: sum_all(mul(class_aggregate(f, p, divisor="N"), leaf(r_agg))),
             {"f": (2, 3, 4, 4), "p": (2, 2, 4, 4)}),
        case("class_aggregate_mass", ("class_aggregate",),
             lambda f, p: sum_all(mul(class_aggregate(f, p, divisor="mass"),
                                      leaf(r_aggm))),
             {"f": (2, 3, 4, 4), "p": (2, 2, 4, 4)},
             transforms={"p": lambda a: np.abs(a) + 0.3}),
        case("group_linear", ("group_linear",),
             lambda e, w, b: sum_all(mul(group_linear(e, w, b), leaf(r_gl))),
             {"e": (2, 3, 4), "w": (3, 4, 4), "b": (3, 4)}),
        case("cond_classify", ("cond_classify",),
             lambda f, k: sum_all(mul(cond_classify(f, k), leaf(r_cc))),
             {"f": (2, 3, 4, 4), "k": (2, 2, 3)}),
        case("cross_entropy", ("cross_entropy",),
             lambda y: cross_entropy(y, ce_labels),
             {"y": (1, 3, 4, 4)}, tolerance=1e-6),
        case("soft_dice", ("soft_dice",),
             lambda p: soft_dice(p, dice_q, dice_valid, eps=1e-5),
             {"p": (1, 3, 3, 3)},
             transforms={"p": _interior_probs}),
        case("bce_probmap", ("bce_probmap",),
             lambda p: bce_probmap(p, dice_q, dice_valid),
             {"p": (1, 3, 3, 3)},
             transforms={"p": _interior_probs}),
    ]
    cases.append(("detach", ("detach",), _case_detach))
    return cases


def run_all_gradchecks(rng: Rng) -> list[GradCheckReport]:
    return [build(rng) for _, _, build in build_gradcheck_cases()]
