"""Analysis matrices for the tracking recursion and the eigenvalue-margin scan.

The stacked per-round error state (next iterates, current iterates, shifted
trackers, tracker-flow differences) evolves linearly through a block matrix
``R`` driven through ``P``; a symmetric block matrix ``S`` collects the
quadratic form whose partial sums certify the averaged convergence rate.  The
scan probes, over a grid of complex frequencies ``z`` and penalties ``beta``,
whether 1 stays safely away from the spectrum of the associated resolvent
operator; that margin is what the boundedness argument needs near ``z = 0``.
The scan is a numerical diagnostic on a finite grid, not a proof.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .mixing import GossipPair

__all__ = [
    "CertificateMatrices",
    "ScanPoint",
    "EigenvalueMarginReport",
    "ScanSingularError",
    "build_certificates",
    "build_F",
    "eigenvalue_margin_scan",
    "default_z_grid",
    "export_scan_csv",
]

# Exclude a grid point from the eigenvalue scan when the resolvent matrix is
# this close to singular (smallest/largest singular value).
_SINGULAR_RATIO = 1e-10


@dataclass(frozen=True)
class CertificateMatrices:
    """The block matrices ``R`` (4M x 4M), ``P`` (4M x M), ``S`` (4M x 4M).

    Block order of the stacked state: next iterates, current iterates,
    shifted trackers, tracker-flow differences (each block M rows).
    """

    R: np.ndarray
    P: np.ndarray
    S: np.ndarray
    mu: float
    rho: float
    alpha: float
    smoothness: float
    eta: float
    node_count: int


def build_certificates(
    gossip: GossipPair,
    mu: float,
    rho: float,
    alpha: float,
    smoothness: float,
    eta: float = 0.5,
) -> CertificateMatrices:
    """Assemble the transition, input, and quadratic-form block matrices.

    ``smoothness`` is the largest per-node gradient-Lipschitz bound and
    ``eta`` the (arbitrary positive) disagreement weight in the quadratic
    form.
    """
    for name, v in (("mu", mu), ("rho", rho), ("alpha", alpha), ("eta", eta)):
        if not v > 0:
            raise ValueError(f"{name} must be > 0, got {v}")
    if smoothness <= 0:
        raise ValueError("smoothness bound must be > 0")
    w, q = gossip.W, gossip.Q
    m = w.shape[0]
    eye = np.eye(m)
    zero = np.zeros((m, m))
    k = rho / mu

    r = np.block(
        [
            [zero, zero, zero, zero],
            [eye, zero, zero, zero],
            [-k * eye, k * (eye - w), eye, alpha * eye],
            [k * eye, -k * (eye - w), zero, (1.0 - alpha) * eye - q],
        ]
    )
    p = np.vstack([eye, zero, zero, zero])

    lm = smoothness * mu / 2.0
    centering = eye - np.full((m, m), 1.0 / m)
    s11 = (1.0 - lm) * eye - m * eta * centering
    s12 = -0.5 * (eye - w) + lm * eye
    s = np.block(
        [
            [s11, s12, -(mu / 2.0) * eye, zero],
            [s12.T, -lm * eye, zero, zero],
            [-(mu / 2.0) * eye, zero, zero, zero],
            [zero, zero, zero, zero],
        ]
    )
    return CertificateMatrices(
        R=r, P=p, S=s, mu=mu, rho=rho, alpha=alpha, smoothness=smoothness, eta=eta, node_count=m
    )


def build_F(cert: CertificateMatrices, z: complex, beta: float) -> np.ndarray:
    """The (9M x 9M) complex resolvent system matrix at frequency ``z``.

    Layout::

        [ S        1/z I - R^T   O      ]
        [ z I - R  O             -P     ]
        [ O        -P^T          -beta I]
    """
    if z == 0:
        raise ValueError("z must be nonzero")
    m4 = cert.R.shape[0]
    m = cert.node_count
    eye4 = np.eye(m4)
    f = np.zeros((2 * m4 + m, 2 * m4 + m), dtype=complex)
    f[:m4, :m4] = cert.S
    f[:m4, m4 : 2 * m4] = eye4 / z - cert.R.T
    f[m4 : 2 * m4, :m4] = z * eye4 - cert.R
    f[m4 : 2 * m4, 2 * m4 :] = -cert.P
    f[2 * m4 :, m4 : 2 * m4] = -cert.P.T
    f[2 * m4 :, 2 * m4 :] = -beta * np.eye(m)
    return f


@dataclass(frozen=True)
class ScanPoint:
    z: complex
    beta: float
    C: float
    min_eig_dist: float
    singular: bool


@dataclass(frozen=True)
class EigenvalueMarginReport:
    """Grid scan of the distance from 1 to the resolvent operator's spectrum.

    Passes when every non-singular grid point keeps that distance at least
    ``epsilon``; near-singular points are excluded and counted instead of
    polluting the margin.
    """

    points: list[ScanPoint]
    C: float
    epsilon: float

    @property
    def singular_count(self) -> int:
        return sum(1 for p in self.points if p.singular)

    @property
    def min_distance(self) -> float:
        dists = [p.min_eig_dist for p in self.points if not p.singular]
        return min(dists) if dists else float("nan")

    @property
    def passed(self) -> bool:
        dists = [p.min_eig_dist for p in self.points if not p.singular]
        return bool(dists) and min(dists) >= self.epsilon


class ScanSingularError(RuntimeError):
    """Every grid point was numerically singular; the scan says nothing."""


def default_z_grid(radii=(1e-2, 1e-3, 1e-4), phases: int = 8) -> list[complex]:
    """Small complex frequencies: the given radii times evenly spaced phases."""
    grid = []
    for r in radii:
        for k in range(phases):
            theta = 2.0 * np.pi * k / phases
            grid.append(complex(r * np.cos(theta), r * np.sin(theta)))
    return grid


def _min_eig_distance_to_one(t: np.ndarray) -> float:
    eigs = np.linalg.eigvals(t)
    return float(np.min(np.abs(eigs - 1.0)))


def eigenvalue_margin_scan(
    cert: CertificateMatrices,
    C: float,
    beta_grid=(0.1, 1.0, 10.0),
    z_grid=None,
    epsilon: float = 1e-6,
) -> EigenvalueMarginReport:
    """Probe the eigenvalue margin over a grid of ``(z, beta)`` points.

    At each point solves the resolvent system for the operator mapping the
    initial stacked state to itself and records how far its spectrum stays
    from 1.  Deterministic for a fixed grid.
    """
    if C < 0:
        raise ValueError("C must be >= 0")
    if z_grid is None:
        z_grid = default_z_grid()
    if any(z == 0 for z in z_grid):
        raise ValueError("z grid must avoid 0")
    if any(b <= 0 for b in beta_grid):
        raise ValueError("beta grid must be positive")

    m4 = cert.R.shape[0]
    m = cert.node_count
    rhs = np.zeros((2 * m4 + m, m4), dtype=complex)
    rhs[m4 : 2 * m4] = np.eye(m4)

    points: list[ScanPoint] = []
    for beta in beta_grid:
        for z in z_grid:
            f = build_F(cert, z, beta)
            rhs_top = rhs.copy()
            rhs_top[:m4] = -(C + beta) * np.eye(m4)
            svals = np.linalg.svd(f, compute_uv=False)
            if svals[-1] < _SINGULAR_RATIO * svals[0]:
                points.append(ScanPoint(z, float(beta), C, float("nan"), True))
                continue
            sol = np.linalg.solve(f, rhs_top)
            t = sol[:m4, :]
            points.append(
                ScanPoint(z, float(beta), C, _min_eig_distance_to_one(t), False)
            )
    report = EigenvalueMarginReport(points=points, C=C, epsilon=epsilon)
    if report.singular_count == len(points):
        raise ScanSingularError("all grid points were numerically singular")
    return report


def export_scan_csv(reports, path: str | Path) -> None:
    """Write one or more scan reports as ``re_z,im_z,beta,C,min_eig_dist,singular_flag``."""
    if isinstance(reports, EigenvalueMarginReport):
        reports = [reports]
    lines = ["re_z,im_z,beta,C,min_eig_dist,singular_flag"]
    for report in reports:
        for p in report.points:
            lines.append(
                "%.17g,%.17g,%.17g,%.17g,%s,%d"
                % (p.z.real, p.z.imag, p.beta, p.C, "%.17g" % p.min_eig_dist, int(p.singular))
            )
    Path(path).write_text("\n".join(lines) + "\n")
