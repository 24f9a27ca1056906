"""Reverse-mode differentiation over the package's fixed op set.

Each ``Var`` wraps one ndarray and records how it was produced: the parent
``Var``s plus a closure mapping the output adjoint to parent adjoints (any
forward activations a rule needs are captured by that closure). The
resulting tape is a DAG in creation order; ``backward`` seeds the scalar
loss with 1 and accumulates adjoints in reverse topological order, so a
parameter used through several paths receives the sum of all path
contributions.

A tape is single-owner while it is being built and differentiated;
independent tapes can run on different threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from .errors import DimensionError
from .rng import Rng
from .tensor import finite_diff_gradient


class Var:
    """One tape node: a value plus the rule to push an adjoint to its parents."""

    __slots__ = ("data", "parents", "grad_fn", "op", "name", "grad")

    def __init__(self, data: np.ndarray, parents: tuple = (),
                 grad_fn: Callable | None = None, op: str = "leaf",
                 name: str | None = None):
        self.data = data
        self.parents = parents
        self.grad_fn = grad_fn
        self.op = op
        self.name = name
        self.grad: np.ndarray | None = None


def leaf(data: np.ndarray, name: str | None = None) -> Var:
    return Var(np.asarray(data), name=name)


class GradientStore:
    """Gradients keyed by parameter name; an absent entry means zero."""

    def __init__(self, grads: dict[str, np.ndarray]):
        self._grads = grads

    def __getitem__(self, name: str) -> np.ndarray:
        return self._grads[name]

    def __contains__(self, name: str) -> bool:
        return name in self._grads

    def __len__(self) -> int:
        return len(self._grads)

    def get(self, name: str) -> np.ndarray | None:
        return self._grads.get(name)

    def items(self):
        return self._grads.items()


def _topo_order(root: Var) -> list[Var]:
    order: list[Var] = []
    seen: set[int] = set()
    stack: list[tuple[Var, bool]] = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent in node.parents:
            if id(parent) not in seen:
                stack.append((parent, False))
    return order


def backward(loss: Var) -> GradientStore:
    """Accumulate adjoints of a scalar loss over the whole tape.

    Returns gradients for every *named* node; ``.grad`` is also set on each
    reachable node (None where no gradient path exists, e.g. behind a
    detach). Gradients from previous calls are overwritten, never mixed.
    """
    if loss.data.size != 1:
        raise DimensionError(
            f"backward seed must be scalar, got shape {loss.data.shape}")
    order = _topo_order(loss)
    adjoints: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    for node in reversed(order):
        g = adjoints.pop(id(node), None)
        node.grad = g
        if g is None or node.grad_fn is None:
            continue
        parent_grads = node.grad_fn(g)
        for parent, pg in zip(node.parents, parent_grads):
            if pg is None:
                continue
            if pg.shape != parent.data.shape:
                raise DimensionError(
                    f"op {node.op}: adjoint shape {pg.shape} does not match "
                    f"parent shape {parent.data.shape}")
            key = id(parent)
            if key in adjoints:
                adjoints[key] = adjoints[key] + pg
            else:
                adjoints[key] = pg
    named = {n.name: n.grad for n in order if n.name is not None and n.grad is not None}
    return GradientStore(named)


# -- gradient checking -------------------------------------------------------

@dataclass
class GradCheckFailure:
    input_name: str
    flat_index: int
    analytic: float
    numeric: float
    rel_err: float


@dataclass
class GradCheckReport:
    name: str
    tolerance: float
    max_rel_err: float
    passed: bool
    failures: list[GradCheckFailure] = field(default_factory=list)

    def summary(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return (f"{status} {self.name}: max rel err {self.max_rel_err:.3e} "
                f"(tol {self.tolerance:.1e}, {len(self.failures)} failing coords)")


_MAX_REPORTED_FAILURES = 20


def grad_check(name: str, fn: Callable[..., Var],
               input_shapes: Mapping[str, tuple[int, ...]], rng: Rng,
               tolerance: float = 1e-5, step: float = 1e-5,
               transforms: Mapping[str, Callable[[np.ndarray], np.ndarray]] | None = None,
               ) -> GradCheckReport:
    """Compare analytic gradients of ``fn`` against the central-difference oracle.

    ``fn`` maps keyword ``Var`` arguments (one per entry of ``input_shapes``)
    to a scalar ``Var``. Inputs are drawn float64 standard-normal from a
    substream per input name; ``transforms`` may massage a draw (e.g. push
    values away from a kink). The error metric per coordinate is
    ``|analytic - numeric| / max(1, |numeric|)``; the check passes iff the
    max over all coordinates of all inputs is below ``tolerance``. A
    mismatch is reported, never raised.
    """
    arrays = {}
    for key, shape in input_shapes.items():
        draw = rng.stream(f"gradcheck/{name}/{key}").normal_array(shape)
        if transforms and key in transforms:
            draw = transforms[key](draw)
        arrays[key] = draw

    variables = {key: leaf(arr, name=key) for key, arr in arrays.items()}
    loss = fn(**variables)
    backward(loss)

    max_rel = 0.0
    failures: list[GradCheckFailure] = []
    for key in input_shapes:
        analytic = variables[key].grad
        if analytic is None:
            analytic = np.zeros_like(arrays[key])

        def scalar_f(perturbed: np.ndarray, _key=key) -> float:
            rebuilt = {k: leaf(perturbed if k == _key else arrays[k]) for k in arrays}
            return float(fn(**rebuilt).data)

        numeric = finite_diff_gradient(scalar_f, arrays[key].copy(), h=step)
        a = analytic.reshape(-1)
        n = numeric.reshape(-1)
        rel = np.abs(a - n) / np.maximum(1.0, np.abs(n))
        max_rel = max(max_rel, float(rel.max()) if rel.size else 0.0)
        for idx in np.flatnonzero(rel >= tolerance):
            if len(failures) < _MAX_REPORTED_FAILURES:
                failures.append(GradCheckFailure(key, int(idx), float(a[idx]),
                                                 float(n[idx]), float(rel[idx])))
    return GradCheckReport(name=name, tolerance=tolerance, max_rel_err=max_rel,
                           passed=max_rel < tolerance, failures=failures)
