"""Pure numpy implementations of the velocity-space kernels.

Both functions work on a batch of spatial cells at once: arrays are shaped
``(n_cells, n_nodes)``. The compiled module ``_core`` exposes the same two
functions with identical signatures.
"""

import numpy as np

_IU, _JU = np.triu_indices(5)


def _features(nodes):
    return np.column_stack([np.ones(len(nodes)), nodes, np.einsum("ij,ij->i", nodes, nodes)])


def velocity_moments(F, nodes, weights):
    """Return ``sum_j w_j F_j (1, v_j, |v_j|^2)`` for every cell."""
    F = np.ascontiguousarray(F, dtype=float)
    phi_w = _features(nodes) * weights[:, None]
    return F @ phi_w


def _gram(G, pair_w, n_cells):
    upper = G @ pair_w
    gram = np.empty((n_cells, 5, 5))
    gram[:, _IU, _JU] = upper
    gram[:, _JU, _IU] = upper
    return gram


def expquad_solve(targets, params0, nodes, weights, tol=1e-12, maxiter=100):
    """Fit ``G = exp(p . (1, v, |v|^2))`` per cell so its discrete moments hit ``targets``.

    Damped Newton on the 5 parameters. The Jacobian of the moment map is the
    Gram matrix of the features under the weight ``w G``. Once a cell meets
    ``tol`` one extra polishing step is taken (kept only if it does not
    increase the residual).

    Returns ``(params, values, iterations, converged)``.
    """
    with np.errstate(over="ignore", invalid="ignore"):
        return _newton(targets, params0, nodes, weights, tol, maxiter)


def _newton(targets, params0, nodes, weights, tol, maxiter):
    targets = np.atleast_2d(np.asarray(targets, dtype=float))
    p = np.array(np.atleast_2d(params0), dtype=float)
    n_cells = targets.shape[0]
    phi = _features(nodes)
    pair_w = (phi[:, _IU] * phi[:, _JU]) * weights[:, None]

    n = targets[:, 0]
    e = targets[:, 4]
    c = np.sqrt(np.abs(e) / (3.0 * n))
    scale = np.column_stack([n, n * c, n * c, n * c, e])

    G, gram, r = _evaluate(p, phi, pair_w, targets, scale)
    rn = np.linalg.norm(r, axis=1)
    rn[~np.isfinite(rn)] = np.inf
    met = np.max(np.abs(r), axis=1) <= tol
    done = np.zeros(n_cells, dtype=bool)
    iters = np.zeros(n_cells, dtype=np.int64)

    for _ in range(maxiter):
        act = np.flatnonzero(~done)
        if act.size == 0:
            break
        iters[act] += 1
        resid = gram[act, 0, :] - targets[act]
        try:
            delta = -np.linalg.solve(gram[act], resid[..., None])[..., 0]
        except np.linalg.LinAlgError:
            break
        lam = np.ones(act.size)
        pending = np.ones(act.size, dtype=bool)
        new_p = p[act].copy()
        new_G = G[act].copy()
        new_gram = gram[act].copy()
        new_r = r[act].copy()
        new_rn = np.full(act.size, np.inf)
        for _halving in range(30):
            idx = np.flatnonzero(pending)
            trial = p[act[idx]] + lam[idx, None] * delta[idx]
            tG, tgram, tr = _evaluate(trial, phi, pair_w, targets[act[idx]], scale[act[idx]])
            trn = np.linalg.norm(tr, axis=1)
            trn[~np.isfinite(trn)] = np.inf
            ok = trn <= rn[act[idx]]
            take = idx[ok]
            new_p[take] = trial[ok]
            new_G[take] = tG[ok]
            new_gram[take] = tgram[ok]
            new_r[take] = tr[ok]
            new_rn[take] = trn[ok]
            pending[take] = False
            # a polishing step is never damped
            stop = met[act[idx]] & ~ok
            pending[idx[stop]] = False
            lam[idx] *= 0.5
            if not pending.any():
                break
        moved = np.isfinite(new_rn)
        rows = act[moved]
        p[rows] = new_p[moved]
        G[rows] = new_G[moved]
        gram[rows] = new_gram[moved]
        r[rows] = new_r[moved]
        rn[rows] = new_rn[moved]
        was_met = met[act]
        done[act[was_met]] = True
        stalled = act[~moved & ~was_met]
        done[stalled] = True
        met = np.max(np.abs(r), axis=1) <= tol
    converged = met & np.all(np.isfinite(p), axis=1)
    return p, G, iters, converged


def _evaluate(params, phi, pair_w, targets, scale):
    G = np.exp(params @ phi.T)
    gram = _gram(G, pair_w, len(params))
    r = (gram[:, 0, :] - targets) / scale
    return G, gram, r
