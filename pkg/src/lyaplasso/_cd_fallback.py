"""Pure-Python coordinate-descent sweep (reference for the compiled kernel)."""


def cd_sweep(gamma, v, grad, lam, coords):
    """Visit ``coords`` in order, minimizing exactly along each coordinate.

    ``grad`` must hold ``gamma @ v - g`` on entry and is kept in sync.
    Returns the largest absolute coordinate change.
    """
    dmax = 0.0
    diag = gamma.diagonal()
    for k in coords:
        gkk = float(diag[k])
        old = float(v[k])
        w = gkk * old - float(grad[k])
        if w > lam:
            new = (w - lam) / gkk
        elif w < -lam:
            new = (w + lam) / gkk
        else:
            new = 0.0
        d = new - old
        if d != 0.0:
            v[k] = new
            grad += d * gamma[k]
            if abs(d) > dmax:
                dmax = abs(d)
    return dmax


__all__ = ["cd_sweep"]
