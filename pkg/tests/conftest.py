import numpy as np
import pytest


def finite_difference_gradient(build_loss, param, step=1e-5, entries=None):
    """Central-difference gradient of a scalar loss wrt one parameter tensor.

    Independent of the reverse-mode engine: it only re-evaluates the forward
    function with perturbed entries. With `entries` given, only those flat
    indices are evaluated (the rest stay NaN).
    """
    numeric = np.full(param.values.shape, np.nan)
    flat = param.values.reshape(-1)
    out = numeric.reshape(-1)
    indices = range(flat.size) if entries is None else entries
    for i in indices:
        orig = flat[i]
        flat[i] = orig + step
        up = float(build_loss().values)
        flat[i] = orig - step
        down = float(build_loss().values)
        flat[i] = orig
        out[i] = (up - down) / (2.0 * step)
    return numeric


def max_relative_gradient_error(build_loss, params, step=1e-5, max_entries=None):
    """Worst relative disagreement between backprop and finite differences.

    Relative error uses the standard two-sided denominator
    max(|analytic|, |numeric|, 1e-6), so entries with negligible gradient are
    compared absolutely at the 1e-6 scale. For large tensors pass
    `max_entries` to spot-check a seeded sample of entries per tensor.
    """
    loss = build_loss()
    loss.backward()
    worst = 0.0
    for k, p in enumerate(params):
        analytic = p.grad.copy()
        entries = None
        if max_entries is not None and p.values.size > max_entries:
            rng = np.random.default_rng(10_000 + k)
            entries = rng.choice(p.values.size, size=max_entries, replace=False)
        numeric = finite_difference_gradient(build_loss, p, step, entries=entries)
        mask = ~np.isnan(numeric)
        denom = np.maximum(np.maximum(np.abs(analytic[mask]), np.abs(numeric[mask])), 1e-6)
        worst = max(worst, float(np.max(np.abs(analytic[mask] - numeric[mask]) / denom)))
        p.grad[...] = 0.0
    return worst


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
