"""Running programs on a fresh tape, and finite-difference gradient checks."""

from __future__ import annotations

from typing import Callable, Mapping

import numpy as np

from .params import ParamStore
from .tape import ContractError, Tape, Var
from .tensor import NonFiniteError, Tensor

# A program maps (input vars, parameter vars) to an output var.
Program = Callable[[dict, dict], Var]


def forward(program: Program, inputs: Mapping[str, object] | None,
            params: ParamStore | None) -> tuple[Var, Tape]:
    """Evaluate ``program`` while recording a tape.

    Inputs and parameters both become gradient-tracking leaves, so that
    :func:`backward` also returns gradients with respect to the inputs.
    """
    tape = Tape()
    ivars = {k: tape.leaf(v.data if isinstance(v, Tensor) else v, name=k)
             for k, v in (inputs or {}).items()}
    pvars = params.to_vars(tape) if params is not None else {}
    out = program(ivars, pvars)
    if not isinstance(out, Var):
        raise ContractError("program must return a tape variable")
    tape.inputs = ivars
    tape.params = pvars
    return out, tape


def backward(tape: Tape, output: Var) -> dict[int, np.ndarray]:
    return tape.backward(output)


def value_and_grad(fn: Callable[[dict], Var], params: ParamStore,
                   store_grads: bool = False) -> tuple[float, dict[str, np.ndarray]]:
    """Evaluate scalar ``fn(param_vars)`` and its gradient by name."""
    tape = Tape()
    pvars = params.to_vars(tape)
    out = fn(pvars)
    grads = tape.backward(out)
    named = {n: tape.grad(grads, v) for n, v in pvars.items()}
    if store_grads:
        for n, g in named.items():
            params.set_grad(n, g)
    return out.item(), named


def _scalar_value(fn, params: ParamStore, where: str) -> float:
    tape = Tape()
    try:
        out = fn(params.to_vars(tape))
    except NonFiniteError as exc:
        raise NonFiniteError(f"non-finite function value at {where}: {exc}") from exc
    val = out.item()
    if not np.isfinite(val):
        raise NonFiniteError(f"non-finite function value at {where}")
    return val


def finite_diff_check(fn: Callable[[dict], Var], params: ParamStore, h: float = 1e-5,
                      names=None, max_coords: int | None = None, rng=None) -> float:
    """Max over coordinates of |analytic - central| / max(1, |analytic|).

    ``fn`` takes a dict of parameter vars and returns a scalar var. Parameter
    values are restored afterwards. With ``max_coords`` only that many
    randomly chosen entries of each parameter are probed (needs ``rng``).
    """
    if not h > 0:
        raise ValueError("finite_diff_check: h must be positive")
    _scalar_value(fn, params, "the unperturbed point")
    _, grads = value_and_grad(fn, params)
    names = params.names() if names is None else list(names)
    worst = 0.0
    for n in names:
        base = params.value(n).copy()
        an = grads[n]
        coords = list(np.ndindex(base.shape))
        if max_coords is not None and len(coords) > max_coords:
            if rng is None:
                raise ValueError("finite_diff_check: max_coords needs an rng")
            coords = [coords[i] for i in rng.choice(len(coords), size=max_coords, replace=False)]
        for idx in coords:
            x = base.copy()
            x[idx] = base[idx] + h
            params.set_value(n, x)
            try:
                fp = _scalar_value(fn, params, f"parameter '{n}' index {idx} (+h)")
                x[idx] = base[idx] - h
                params.set_value(n, x)
                fm = _scalar_value(fn, params, f"parameter '{n}' index {idx} (-h)")
            finally:
                params.set_value(n, base)
            num = (fp - fm) / (2.0 * h)
            err = abs(an[idx] - num) / max(1.0, abs(an[idx]))
            worst = max(worst, err)
    return worst
