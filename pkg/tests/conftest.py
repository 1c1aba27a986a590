import numpy as np

from hsgp import autodiff as ad


def finite_diff_params(tensors, objective, step=1e-6):
    """Central-difference gradient of objective() w.r.t. each tensor's value."""
    grads = []
    for t in tensors:
        g = np.zeros_like(t.value)
        flat = t.value.ravel()
        gflat = g.ravel()
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            with ad.no_grad():
                hi = objective()
            flat[i] = orig - step
            with ad.no_grad():
                lo = objective()
            flat[i] = orig
            gflat[i] = (hi - lo) / (2.0 * step)
        grads.append(g)
    return grads


def max_rel_error(analytic, numeric):
    """Scaled relative error: |a - n| / max(1, |a|, |n|), worst coordinate.

    The unit floor keeps near-zero coordinates from amplifying the inherent
    ~1e-9 noise of central differences into spurious failures.
    """
    worst = 0.0
    for a, n in zip(analytic, numeric):
        a = np.zeros_like(n) if a is None else a
        denom = np.maximum(1.0, np.maximum(np.abs(a), np.abs(n)))
        worst = max(worst, float(np.max(np.abs(a - n) / denom)))
    return worst


def gradcheck(tensors, build_loss, step=1e-6):
    """Backward-pass gradients vs central differences; returns worst error."""
    for t in tensors:
        t.zero_grad()
    loss = build_loss()
    loss.backward()
    analytic = [t.grad for t in tensors]
    numeric = finite_diff_params(tensors, lambda: float(build_loss().value), step)
    return max_rel_error(analytic, numeric)
