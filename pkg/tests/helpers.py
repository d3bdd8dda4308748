"""Shared test utilities: finite-difference gradient checking."""

import numpy as np

from physretinex import engine as E

FD_STEP = 1e-5
FD_REL_TOL = 1e-4


def numeric_grad(f, arrays, h=FD_STEP):
    """Central finite differences of a scalar function of numpy arrays."""
    grads = []
    for a in arrays:
        g = np.zeros_like(a)
        flat, gflat = a.reshape(-1), g.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            fp = f(arrays)
            flat[i] = orig - h
            fm = f(arrays)
            flat[i] = orig
            gflat[i] = (fp - fm) / (2.0 * h)
        grads.append(g)
    return grads


def relative_error(analytic, numeric):
    scale = max(np.abs(analytic).max(), np.abs(numeric).max(), 1e-8)
    return np.abs(analytic - numeric).max() / scale


def check_grad(build, shapes, seeds=range(5), rel_tol=FD_REL_TOL, sampler=None):
    """Compare autodiff gradients of ``build`` against central differences.

    ``build`` maps a list of Tensors to a scalar Tensor; ``sampler``
    maps (rng, shape) to an initial array (default: standard normal).
    Returns the worst relative error across all seeds and inputs.
    """
    worst = 0.0
    for seed in seeds:
        rng = np.random.default_rng(seed)
        if sampler is None:
            arrays = [rng.standard_normal(s) for s in shapes]
        else:
            arrays = [sampler(rng, s) for s in shapes]
        tensors = [E.Tensor(a.copy(), requires_grad=True) for a in arrays]
        loss = build(tensors)
        assert loss.data.size == 1, "gradient checks need a scalar loss"
        E.backward(loss)

        def f(arrs):
            with E.no_grad():
                return build([E.Tensor(a) for a in arrs]).item()

        numeric = numeric_grad(f, [a.copy() for a in arrays])
        for t, n in zip(tensors, numeric):
            err = relative_error(t.grad, n)
            worst = max(worst, err)
            assert err < rel_tol, f"seed {seed}: relative error {err:.3e} >= {rel_tol}"
    return worst


def away_from(rng, shape, margin=0.1, scale=1.0):
    """Standard normal samples pushed ``margin`` away from zero."""
    x = rng.standard_normal(shape) * scale
    return x + np.sign(x) * margin
