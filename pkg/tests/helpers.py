"""Shared oracles for the test suite."""

import numpy as np

TIE_TOL = 1e-9


def _close(a, b, tol):
    if np.isneginf(a) and np.isneginf(b):
        return True
    return abs(a - b) <= tol * max(1.0, abs(a), abs(b))


def near_tie_on_path(model, obs, trellis, path, tol=TIE_TOL):
    """True when a cell on ``path`` has a runner-up candidate within ``tol`` of its winner.

    Only such cells can make two correct decoders return different optimal
    paths: a competing path first leaves ``path`` (reading backwards) at one.
    """
    obs = np.asarray(obs)
    cells = [trellis.final]
    log_tt = model.log_transition.T
    for i in range(1, len(path)):
        v = trellis.log_q[i - 1] + model.log_emission[:, obs[i - 1]]
        cells.append(log_tt[path[i]] + v)
    for scores in cells:
        top = np.sort(scores)[::-1]
        if top.size > 1 and _close(top[0], top[1], tol):
            return True
    return False
