"""Numpy implementations of the compiled kernels in ``_kernels.pyx``."""
import numpy as np


def logistic_margin(m):
    m = np.asarray(m, dtype=np.float64)
    return np.log1p(np.exp(-np.abs(m))) + np.maximum(-m, 0.0)


def confdiff_terms_rows(s, sp, c, prior):
    s = np.asarray(s, dtype=np.float64)
    sp = np.asarray(sp, dtype=np.float64)
    c = np.asarray(c, dtype=np.float64)
    n = s.shape[1]
    pp, pn = prior, 1.0 - prior
    soft_x = np.log1p(np.exp(-np.abs(s)))
    soft_xp = np.log1p(np.exp(-np.abs(sp)))
    out = np.empty((s.shape[0], 4))
    out[:, 0] = ((pp - c) * (soft_x + np.maximum(-s, 0.0))).sum(axis=1)
    out[:, 1] = ((pn - c) * (soft_xp + np.maximum(sp, 0.0))).sum(axis=1)
    out[:, 2] = ((pp + c) * (soft_xp + np.maximum(-sp, 0.0))).sum(axis=1)
    out[:, 3] = ((pn + c) * (soft_x + np.maximum(s, 0.0))).sum(axis=1)
    out *= 1.0 / (2.0 * n)
    return out


def _sigmoid(z):
    e = np.exp(-np.abs(z))
    return np.where(z >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def confdiff_score_grad(s, sp, c, prior, wa, wb, wc, wd):
    s = np.asarray(s, dtype=np.float64)
    sp = np.asarray(sp, dtype=np.float64)
    c = np.asarray(c, dtype=np.float64)
    inv = 1.0 / (2.0 * s.shape[0])
    pp, pn = prior, 1.0 - prior
    sig_x = _sigmoid(s)
    sig_xp = _sigmoid(sp)
    gs = (wa * (pp - c) * (sig_x - 1.0) + wd * (pn + c) * sig_x) * inv
    gsp = (wb * (pn - c) * sig_xp + wc * (pp + c) * (sig_xp - 1.0)) * inv
    return gs, gsp
