"""Sparse recovery from compressive measurements.

Three solvers, in increasing order of practicality:

* :func:`l0_bruteforce` -- exhaustive sparsest-fit search, only usable on
  toy problems and kept as a reference oracle;
* :func:`basis_pursuit` -- l1 minimisation under ``Az = y`` (ADMM);
* :func:`tv_reconstruct` -- total-variation minimisation of an image under
  ``||Ax - y||_2 <= eps`` (first-order primal-dual method).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import asdict, dataclass
from typing import Optional, Tuple

import numpy as np

from .imaging import SignalVector
from .sensing import FeatureVector, MeasurementMatrix, ResourceLimitError

ISOTROPIC = "isotropic"
ANISOTROPIC = "anisotropic"


@dataclass(frozen=True, eq=False)
class ReconstructionResult:
    x_hat: np.ndarray
    residual: float
    objective: float
    iterations: int
    converged: bool
    variant: Optional[str] = None

    def report(self) -> dict:
        """JSON-ready summary (without the signal itself)."""
        return {
            "residual": float(self.residual),
            "objective": float(self.objective),
            "iterations": int(self.iterations),
            "converged": bool(self.converged),
            "variant": self.variant,
        }


@dataclass(frozen=True)
class BpParams:
    """Basis pursuit settings.

    ``tolerance`` bounds the relative ADMM primal and dual residuals;
    ``feas_tol`` is the accepted ``||Az - y|| / (1 + ||y||)``.
    """

    tolerance: float = 1e-7
    feas_tol: float = 1e-6
    max_iterations: int = 5000
    rho: float = 1.0


@dataclass(frozen=True)
class TvParams:
    """Total-variation reconstruction settings.

    ``epsilon=None`` means ``1e-3 * ||y||``.  The solver stops once the TV
    value changes by less than ``tolerance`` (relative) across ``window``
    iterations while the residual sits within ``epsilon`` plus slack.
    """

    epsilon: Optional[float] = None
    max_iterations: int = 5000
    tolerance: float = 1e-8
    variant: str = ISOTROPIC
    window: int = 50
    feas_tol: float = 1e-6
    step_ratio: float = 10.0

    def __post_init__(self):
        if self.epsilon is not None and self.epsilon < 0:
            raise ValueError("epsilon must be non-negative")
        if self.tolerance <= 0:
            raise ValueError("tolerance must be positive")
        if self.step_ratio <= 0:
            raise ValueError("step_ratio must be positive")
        if self.variant not in (ISOTROPIC, ANISOTROPIC):
            raise ValueError(f"unknown TV variant {self.variant!r}")

    def as_dict(self):
        return asdict(self)


def _matrix(A) -> np.ndarray:
    return A.entries if isinstance(A, MeasurementMatrix) else np.asarray(A, float)


def _vector(y) -> np.ndarray:
    if isinstance(y, (FeatureVector, SignalVector)):
        return y.values
    return np.asarray(y, dtype=float).ravel()


# --- l0 oracle --------------------------------------------------------------

def l0_bruteforce(A, y, s_max: int, fit_tol: float = 1e-9,
                  max_supports: int = 200_000) -> ReconstructionResult:
    """Find the sparsest ``z`` with ``||Az - y|| <= fit_tol`` by enumeration.

    Supports are tried by increasing size and, within a size, in
    lexicographic order; the first fit wins.  If nothing fits, the
    smallest-residual candidate is returned with ``converged=False``.
    """
    Am, yv = _matrix(A), _vector(y)
    m, N = Am.shape
    if yv.size != m:
        raise ValueError(f"measurement length {yv.size} != matrix rows {m}")
    if fit_tol <= 0:
        raise ValueError("fit_tol must be positive")
    s_max = min(s_max, N)
    budget = sum(math.comb(N, s) for s in range(s_max + 1))
    if budget > max_supports:
        raise ResourceLimitError(
            f"{budget} supports up to size {s_max} exceeds budget {max_supports}")

    best = (np.inf, np.zeros(N))
    tried = 0
    for s in range(s_max + 1):
        for support in itertools.combinations(range(N), s):
            tried += 1
            z = np.zeros(N)
            if s:
                idx = list(support)
                coef, *_ = np.linalg.lstsq(Am[:, idx], yv, rcond=None)
                z[idx] = coef
            res = float(np.linalg.norm(Am @ z - yv))
            if res <= fit_tol:
                return ReconstructionResult(z, res, float(np.abs(z).sum()),
                                            tried, True)
            if res < best[0]:
                best = (res, z)
    res, z = best
    return ReconstructionResult(z, res, float(np.abs(z).sum()), tried, False)


# --- basis pursuit ------------------------------------------------------------

def _soft(v, t):
    return np.sign(v) * np.maximum(np.abs(v) - t, 0.0)


# rho is frozen after this many iterations so ADMM can settle
_BP_ADAPT_ITERATIONS = 200
# iterations between attempts at a certified vertex refit
_BP_POLISH_EVERY = 50


def _bp_vertex(Am, yv, z, feas):
    """Least-squares refit of the support of ``z``.

    Returns ``(x, certified)``.  ``certified`` means the LP optimality
    conditions hold: some ``nu`` has ``A_S^T nu = sign(x_S)`` and
    ``|A^T nu| <= 1`` everywhere, so ``x`` is an l1 minimiser.
    """
    m = Am.shape[0]
    mag = np.abs(z)
    top = mag.max(initial=0.0)
    if top == 0.0:
        return None, False
    support = np.flatnonzero(mag > 1e-6 * top)
    if support.size > m:
        support = np.sort(np.argsort(-mag, kind="stable")[:m])
    sub = Am[:, support]
    coef, *_ = np.linalg.lstsq(sub, yv, rcond=None)
    x = np.zeros(Am.shape[1])
    x[support] = coef
    if np.linalg.norm(Am @ x - yv) > feas:
        return None, False
    keep = np.abs(coef) > 1e-12 * np.abs(coef).max()
    sign = np.sign(coef[keep])
    nu, *_ = np.linalg.lstsq(sub[:, keep].T, sign, rcond=None)
    certified = (np.linalg.norm(sub[:, keep].T @ nu - sign) <= 1e-9
                 and np.abs(Am.T @ nu).max() <= 1.0 + 1e-9)
    return x, bool(certified)


def basis_pursuit(A, y, params: BpParams = BpParams()) -> ReconstructionResult:
    """Minimise ``||z||_1`` subject to ``Az = y``.

    ADMM on the split ``x = z`` with ``x`` confined to the affine set
    ``{Ax = y}`` (exact projection) and ``z`` updated by soft
    thresholding.  The penalty is rebalanced from the residuals during a
    warm-up.  Every few iterations the support of ``z`` is refitted by
    least squares; the solver stops early when the refit carries an LP
    dual certificate.  Otherwise the refit replaces the final ADMM
    iterate only if it is feasible and has no larger l1 norm.
    """
    Am, yv = _matrix(A), _vector(y)
    m, N = Am.shape
    if yv.size != m:
        raise ValueError(f"measurement length {yv.size} != matrix rows {m}")
    ynorm = float(np.linalg.norm(yv))
    feas = params.feas_tol * (1 + ynorm)
    if ynorm == 0.0:
        return ReconstructionResult(np.zeros(N), 0.0, 0.0, 0, True)
    pinv = np.linalg.pinv(Am)

    def project(v):
        return v - pinv @ (Am @ v - yv)

    x = pinv @ yv
    z = x.copy()
    u = np.zeros(N)
    rho = params.rho / max(np.abs(x).max(initial=0.0), 1e-12)
    converged = False
    it = 0
    tiny = 1e-14 * (1.0 + np.linalg.norm(x))
    for it in range(1, params.max_iterations + 1):
        x = project(z - u)
        z_old = z
        z = _soft(x + u, 1.0 / rho)
        u = u + x - z
        r = np.linalg.norm(x - z)
        s = rho * np.linalg.norm(z - z_old)
        if (r <= params.tolerance * max(np.linalg.norm(x), np.linalg.norm(z)) + tiny
                and s <= params.tolerance * rho * np.linalg.norm(u) + tiny):
            converged = True
            break
        if it % _BP_POLISH_EVERY == 0:
            cand, certified = _bp_vertex(Am, yv, z, feas)
            if certified:
                x, converged = cand, True
                break
        if it > _BP_ADAPT_ITERATIONS:
            continue
        if r > 10 * s:
            rho *= 2.0
            u /= 2.0
        elif s > 10 * r:
            rho /= 2.0
            u *= 2.0

    cand, _ = _bp_vertex(Am, yv, z, feas)
    if cand is not None and np.abs(cand).sum() <= np.abs(x).sum() * (1 + 1e-12):
        x = cand
    residual = float(np.linalg.norm(Am @ x - yv))
    converged = converged and residual <= feas
    return ReconstructionResult(x, residual, float(np.abs(x).sum()), it,
                                converged)


# --- total variation ----------------------------------------------------------

def gradient(u: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Forward differences; zero in the last column / last row."""
    gh = np.zeros_like(u)
    gv = np.zeros_like(u)
    gh[:, :-1] = u[:, 1:] - u[:, :-1]
    gv[:-1, :] = u[1:, :] - u[:-1, :]
    return gh, gv


def gradient_adjoint(ph: np.ndarray, pv: np.ndarray) -> np.ndarray:
    """Adjoint of :func:`gradient` (negative divergence)."""
    out = np.zeros_like(ph)
    out[:, :-1] -= ph[:, :-1]
    out[:, 1:] += ph[:, :-1]
    out[:-1, :] -= pv[:-1, :]
    out[1:, :] += pv[:-1, :]
    return out


def _tv_of(img: np.ndarray, variant: str) -> float:
    gh, gv = gradient(img)
    if variant == ISOTROPIC:
        return float(np.hypot(gh, gv).sum())
    if variant == ANISOTROPIC:
        return float(np.abs(gh).sum() + np.abs(gv).sum())
    raise ValueError(f"unknown TV variant {variant!r}")


def tv(x, variant: str = ISOTROPIC, dims: Optional[Tuple[int, int]] = None) -> float:
    """Total variation of an image given as a SignalVector or 2-D array."""
    if isinstance(x, SignalVector):
        img = x.as_image()
    else:
        img = np.asarray(x, dtype=float)
        if dims is not None:
            img = img.reshape(dims)
    if img.ndim != 2:
        raise ValueError("tv needs a 2-D image or explicit dims")
    return _tv_of(img, variant)


def _project_dual(ph, pv, variant):
    if variant == ISOTROPIC:
        scale = np.maximum(1.0, np.hypot(ph, pv))
        return ph / scale, pv / scale
    return np.clip(ph, -1.0, 1.0), np.clip(pv, -1.0, 1.0)


def tv_reconstruct(A, y, dims: Tuple[int, int],
                   params: TvParams = TvParams()) -> ReconstructionResult:
    """Minimise ``TV(x)`` subject to ``||Ax - y||_2 <= eps``.

    Chambolle-Pock iterations on ``min_x ||grad x||_1 + I_ball(Ax)`` with
    the measurement operator rescaled to unit spectral norm.  A final
    minimum-norm correction along the row space of ``A`` pulls the
    residual onto the ball if the iterate is still slightly outside.
    """
    Am, yv = _matrix(A), _vector(y)
    m, N = Am.shape
    rows, cols = dims
    if rows * cols != N:
        raise ValueError(f"dims {dims} do not match matrix width {N}")
    if yv.size != m:
        raise ValueError(f"measurement length {yv.size} != matrix rows {m}")
    ynorm = float(np.linalg.norm(yv))
    eps = 1e-3 * ynorm if params.epsilon is None else float(params.epsilon)
    variant = params.variant

    scale = float(np.linalg.norm(Am, 2))
    As, ys, eps_s = Am / scale, yv / scale, eps / scale
    # tau * sigma * ||K||^2 < 1 with ||K||^2 <= ||grad||^2 + ||As||^2 <= 9;
    # the dual step is favoured, which converges much faster here
    tau = 0.99 / 3.0 / params.step_ratio
    sigma = 0.99 / 3.0 * params.step_ratio
    slack = params.feas_tol * (1.0 + ynorm)

    x = np.zeros(dims)
    x_bar = x.copy()
    ph = np.zeros(dims)
    pv = np.zeros(dims)
    q = np.zeros(m)
    history = []
    converged = False
    it = 0
    for it in range(1, params.max_iterations + 1):
        gh, gv = gradient(x_bar)
        ph, pv = _project_dual(ph + sigma * gh, pv + sigma * gv, variant)
        w = q + sigma * (As @ x_bar.ravel()) - sigma * ys
        wn = np.linalg.norm(w)
        q = w * max(0.0, 1.0 - sigma * eps_s / wn) if wn > 0 else w
        x_new = x - tau * (gradient_adjoint(ph, pv) + (As.T @ q).reshape(dims))
        x_bar = 2.0 * x_new - x
        x = x_new

        history.append(_tv_of(x, variant))
        if it > params.window:
            cur, past = history[-1], history[-1 - params.window]
            change = abs(cur - past) / max(cur, 1e-12)
            res = np.linalg.norm(Am @ x.ravel() - yv)
            if change < params.tolerance and res <= eps * (1 + 1e-3) + slack:
                converged = True
                break

    x_hat = x.ravel()
    r = Am @ x_hat - yv
    rn = float(np.linalg.norm(r))
    if rn > eps:
        x_hat = x_hat - np.linalg.pinv(Am) @ (r * (1.0 - eps / rn))
    residual = float(np.linalg.norm(Am @ x_hat - yv))
    if residual > eps + slack:
        converged = False
    return ReconstructionResult(x_hat, residual, tv(x_hat, variant, dims), it,
                                converged, variant=variant)


def rmse(a, b) -> float:
    a, b = _vector(a), _vector(b)
    return float(np.sqrt(np.mean((a - b) ** 2)))
