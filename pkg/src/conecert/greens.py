"""The discrete solution operator K, the boundary lift gamma and the principal eigenpair."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse.linalg as spla

from .errors import GridMismatch, NoConvergence, NotPositiveOperator, SolverDiverged, ZeroInput
from .operator import DiscreteOperator

log = logging.getLogger(__name__)

E_FLOOR = 1e-14


@dataclass(frozen=True)
class SolverConfig:
    method: str = "auto"  # auto | direct | cg | bicgstab
    tol: float = 1e-10
    max_iter: int = 20000
    direct_limit: int = 40000


@dataclass(frozen=True)
class Spectral:
    r: float
    phi: np.ndarray
    iterations: int
    residual: float  # ||K phi - r phi||_inf / r
    lower: float  # Collatz-Wielandt bracket
    upper: float

    @property
    def mu(self):
        return 1.0 / self.r


class SolutionOperator:
    """K g = u with L u = g in the domain and B u = 0 on the boundary.

    The factorisation (or preconditioner), e = K(1), gamma and the spectral
    pair are computed on first use and cached; after that the object is
    read-only.
    """

    def __init__(self, op: DiscreteOperator, config: SolverConfig = SolverConfig()):
        self.op = op
        self.config = config
        self._lu = None
        self._ilu = None
        self._e = None
        self._gamma = None
        self._spectral: Optional[Spectral] = None
        method = config.method
        if method == "auto":
            if op.size <= config.direct_limit:
                method = "direct"
            else:
                method = "cg" if op.symmetric else "bicgstab"
        self.method = method

    @property
    def grid(self):
        return self.op.grid

    @property
    def size(self):
        return self.op.size

    # -------------------------------------------------------------- solves

    def _solve(self, rhs):
        A = self.op.matrix
        if self.method == "direct":
            if self._lu is None:
                self._lu = spla.splu(A.tocsc())
            return self._lu.solve(rhs)
        if self._ilu is None:
            self._ilu = spla.spilu(A.tocsc(), drop_tol=1e-5, fill_factor=10)
        M = spla.LinearOperator(A.shape, self._ilu.solve)
        trace = []

        def cb(xk):
            trace.append(float(np.linalg.norm(rhs - A @ xk)))

        solver = spla.cg if self.method == "cg" else spla.bicgstab
        x, info = solver(A, rhs, rtol=self.config.tol, atol=0.0, maxiter=self.config.max_iter, M=M, callback=cb)
        if info != 0:
            raise SolverDiverged(f"{self.method} failed with info={info}", trace)
        return x

    def solve_raw(self, rhs):
        """Solve A u = rhs and check the relative residual."""
        rhs = np.asarray(rhs, dtype=float)
        if rhs.shape != (self.size,):
            raise GridMismatch(f"field of shape {rhs.shape} on a grid with {self.size} nodes")
        if not np.all(np.isfinite(rhs)):
            raise ValueError("right-hand side is not finite")
        u = self._solve(rhs)
        bnorm = np.linalg.norm(rhs)
        res = np.linalg.norm(rhs - self.op.matrix @ u)
        if bnorm > 0 and res > 10 * max(self.config.tol, 1e-12) * bnorm:
            raise SolverDiverged(f"residual {res / bnorm:.3e} above tolerance", [res])
        return u

    def apply(self, g) -> np.ndarray:
        """K(g): solution with source ``g`` and homogeneous boundary data."""
        g = np.asarray(g, dtype=float)
        if g.ndim == 0:
            g = np.full(self.size, float(g))
        return self.solve_raw(g)

    __call__ = apply

    # -------------------------------------------------------------- derived

    @property
    def e(self) -> np.ndarray:
        if self._e is None:
            self._e = self.apply(np.ones(self.size))
            self._e.setflags(write=False)
        return self._e

    def norm_K1(self) -> float:
        """sup-norm of K(1) over the nodes."""
        return float(np.max(np.abs(self.e)))

    def compute_gamma(self) -> np.ndarray:
        """gamma: L gamma = 0 inside, B gamma = 1 on the boundary."""
        if self._gamma is None:
            q = np.ones(self.grid.n_boundary)
            self._gamma = self.solve_raw(self.op.boundary_rhs_map @ q)
            self._gamma.setflags(write=False)
        return self._gamma

    @property
    def gamma(self) -> np.ndarray:
        return self.compute_gamma()

    def norm_gamma(self) -> float:
        return float(np.max(np.abs(self.gamma)))

    def spectral_radius(self, tol: float = 1e-10, max_iter: int = 5000) -> Spectral:
        """Power iteration from phi = 1, normalised in the sup-norm.

        Stops when ||K phi - r phi||_inf <= tol * r with r = ||K phi||_inf.
        """
        if self._spectral is not None and self._spectral.residual <= tol:
            return self._spectral
        if not self.op.m_matrix_certified:
            log.warning("spectral_radius on an operator without M-matrix certificate")
        eps = 10 * self.config.tol
        phi = np.ones(self.size)
        for it in range(1, max_iter + 1):
            psi = self.apply(phi)
            top = float(np.max(np.abs(psi)))
            if psi.min() < -eps * top:
                raise NotPositiveOperator(f"K produced {psi.min():.3e} from a positive input")
            r = top
            res = float(np.max(np.abs(psi - r * phi)))
            if res <= tol * r:
                pos = phi > 1e-8
                ratio = psi[pos] / phi[pos]
                spec = Spectral(r, phi.copy(), it, res / r, float(ratio.min()), float(ratio.max()))
                spec.phi.setflags(write=False)
                self._spectral = spec
                return spec
            phi = np.clip(psi / top, 0.0, None)
        raise NoConvergence(f"power iteration did not converge in {max_iter} steps")

    def e_positivity_report(self, g):
        """(alpha_g, beta_g) with alpha_g e <= K g <= beta_g e at the nodes."""
        g = np.asarray(g, dtype=float)
        if not np.any(g != 0):
            raise ZeroInput("e-positivity needs a nonzero g")
        if g.min() < 0:
            raise ValueError("e-positivity needs g >= 0")
        kg = self.apply(g)
        mask = self.e > E_FLOOR
        q = kg[mask] / self.e[mask]
        alpha, beta = float(q.min()), float(q.max())
        if self.op.m_matrix_certified and not alpha > 0:
            raise NotPositiveOperator(f"alpha_g = {alpha:.3e} for a nonnegative nonzero g")
        return alpha, beta


def richardson(coarse: float, fine: float, order: int = 2) -> float:
    """Extrapolate a quantity computed at h and h/2."""
    f = 2.0**order
    return (f * fine - coarse) / (f - 1.0)
