"""Two-dimensional linear projection by power iteration with deflation."""
from dataclasses import dataclass

import numpy as np


@dataclass
class Projection:
    coords: np.ndarray
    components: np.ndarray
    variances: np.ndarray
    degenerate: bool


def top_eigenvectors(cov, k=2, iters=1000, tol=1e-12, rng=None):
    """Leading ``k`` eigenpairs of a symmetric PSD matrix, largest first."""
    rng = np.random.default_rng(0 if rng is None else rng)
    a = np.array(cov, dtype=np.float64)
    vecs, vals = [], []
    for _ in range(k):
        v = _orthogonalise(rng.standard_normal(a.shape[0]), vecs)
        for _ in range(iters):
            # re-orthogonalising keeps later vectors clean when the deflated matrix is ~0
            w = _orthogonalise(a @ v, vecs, normalise=False)
            norm = np.linalg.norm(w)
            if norm == 0.0:
                break
            w /= norm
            done = np.linalg.norm(w - v) < tol
            v = w
            if done:
                break
        lam = float(v @ cov @ v)
        vecs.append(v)
        vals.append(lam)
        a = a - lam * np.outer(v, v)
    return np.array(vecs), np.array(vals)


def _orthogonalise(v, basis, normalise=True):
    for b in basis:
        v = v - (v @ b) * b
    return v / np.linalg.norm(v) if normalise else v


def project_2d(vectors, rng=None):
    x = np.asarray(vectors, dtype=np.float64)
    if x.ndim != 2 or len(x) < 2:
        raise ValueError("project_2d needs at least two vectors")
    centred = x - x.mean(axis=0)
    cov = centred.T @ centred / (len(x) - 1)
    if not np.any(np.abs(cov) > 1e-300):
        return Projection(np.zeros((len(x), 2)), np.zeros((2, x.shape[1])), np.zeros(2), True)
    comps, vals = top_eigenvectors(cov, 2, rng=rng)
    vals = np.maximum(vals, 0.0)
    return Projection(centred @ comps.T, comps, vals, False)
