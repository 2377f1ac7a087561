"""Derived spectral quantities: boundary-integral coefficients, pressure sweeps,
localization maps and radial decay profiles, and the quadratic-form identities
tying eigenvalues to volume norms of the extended eigenfunctions.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .geometry import Domain
from .mesh import Mesh
from .fem import FemMatrices, factor_interior
from .dtn import BoundaryPartition, Spectrum, attach_extensions, build_dtn, eigensolve
from .conjecture import effective_angle_sequence


class AnalysisError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# boundary-integral coefficients
# ---------------------------------------------------------------------------

def ak_coefficients(spectrum: Spectrum, matrices: FemMatrices) -> np.ndarray:
    """A_k = (1^T M_b v_k) / sqrt(1^T M_b 1): weight of mode k in the expansion
    of a constant over the boundary eigenbasis. With the sign convention of the
    eigensolver these are >= 0 up to quadrature noise."""
    mb = matrices.boundary_mass
    local = spectrum.steklov_nodes - matrices.n_interior
    mb_s = mb[local][:, local]
    weights = np.asarray(mb_s.sum(axis=0)).ravel()
    measure = weights.sum()
    return (weights @ spectrum.vectors) / math.sqrt(measure)


def ak_via_volume(spectrum: Spectrum, matrices: FemMatrices, p: float) -> np.ndarray:
    """Volume route to the same coefficients: p/(mu_k sqrt(|dOmega|)) int V_k."""
    if p <= 0:
        raise AnalysisError("the volume formula degenerates at p = 0")
    if spectrum.extensions is None:
        raise AnalysisError("spectrum has no interior extensions attached")
    measure = float(matrices.boundary_mass.sum())
    vol = np.asarray(matrices.mass.sum(axis=0)).ravel() @ spectrum.extensions
    return p * vol / (spectrum.eigenvalues * math.sqrt(measure))


@dataclass
class SymmetryAudit:
    threshold: float
    survivors: list[int]
    cancelled: list[int]
    magnitudes: np.ndarray


def symmetry_audit(ak: np.ndarray, threshold: float = 1e-3) -> SymmetryAudit:
    """Split coefficient indices into survivors (|A_k| > threshold) and the
    symmetry-cancelled rest."""
    mags = np.abs(np.asarray(ak))
    surv = np.flatnonzero(mags > threshold)
    gone = np.flatnonzero(mags <= threshold)
    return SymmetryAudit(threshold, surv.tolist(), gone.tolist(), mags)


def numerical_groups(eigenvalues: np.ndarray, tol: float) -> list[list[int]]:
    """Chain-linked clusters of eigenvalues closer than tol * max(1, mu).

    Wider than the exact-multiplicity tolerance: meant for multiplets whose
    true splitting is below the discretization error, where eigenvectors mix
    arbitrarily."""
    groups: list[list[int]] = []
    for k, mu in enumerate(eigenvalues):
        if groups and mu - eigenvalues[groups[-1][-1]] <= tol * max(1.0, abs(mu)):
            groups[-1].append(k)
        else:
            groups.append([k])
    return groups


def concentrate_degenerate_ak(
    spectrum: Spectrum, matrices: FemMatrices, group_tol: float = 1e-3
) -> np.ndarray:
    """Boundary-integral coefficients with each numerically degenerate group
    rotated so its weight sits on a single member.

    Within a degenerate eigenspace the coefficients are defined only up to an
    orthogonal rotation; the rotation-invariant content is the root sum of
    squares, which is placed on the group's last (highest) index, the
    convention that matches how symmetric benchmark domains order the
    boundary-coupled member. Modes whose group extends past the computed
    window are handled by computing a few extra modes upstream."""
    ak = ak_coefficients(spectrum, matrices)
    out = ak.copy()
    for group in numerical_groups(spectrum.eigenvalues, group_tol):
        if len(group) > 1:
            weight = float(np.sqrt(np.sum(ak[group] ** 2)))
            out[group] = 0.0
            out[group[-1]] = weight
    return out


def bk_group_max(
    spectrum: Spectrum,
    k: int,
    mesh: Mesh,
    domain: Domain,
    group_tol: float = 1e-3,
) -> float:
    """Peak amplified value over all unit combinations within the numerically
    degenerate group containing mode k.

    The maximum of |sum_i c_i V_i(x)| over unit coefficient vectors is the
    pointwise root sum of squares, so the group version is closed-form. For a
    well-separated eigenvalue this reduces to the single-mode peak."""
    if spectrum.extensions is None:
        raise AnalysisError("spectrum has no interior extensions attached")
    group = next(
        g for g in numerical_groups(spectrum.eigenvalues, group_tol) if k in g
    )
    if group[-1] == spectrum.count - 1:
        raise AnalysisError(
            "the group containing this mode touches the end of the computed "
            "window, so it may be truncated; compute more modes"
        )
    V = spectrum.extensions[:, group]
    dist = domain.distance_to_boundary(mesh.nodes)
    mu = float(spectrum.eigenvalues[k])
    amp = math.sqrt(domain.perimeter) * np.sqrt((V**2).sum(axis=1)) * np.exp(mu * dist)
    return float(amp.max())


# ---------------------------------------------------------------------------
# localization diagnostics
# ---------------------------------------------------------------------------

@dataclass
class LocalizationMap:
    k: int
    mu: float
    values: np.ndarray        # V_k at every node
    amplified: np.ndarray     # B_k = |sqrt(|dOmega|) V_k exp(mu * dist)|
    distances: np.ndarray
    floor: float = 1e-4       # display mask only, never used in computations

    def max_amplified(self) -> float:
        return float(self.amplified.max())

    def masked_log10(self) -> np.ndarray:
        out = np.full_like(self.values, np.nan)
        big = np.abs(self.values) >= self.floor
        out[big] = np.log10(np.abs(self.values[big]))
        return out


def bk_map(spectrum: Spectrum, k: int, mesh: Mesh, domain: Domain, floor: float = 1e-4) -> LocalizationMap:
    """Exponentially amplified eigenfunction map; flat only where the decay
    rate equals mu_k exactly, so its peaks locate slower-than-expected decay."""
    if spectrum.extensions is None:
        raise AnalysisError("spectrum has no interior extensions attached")
    v = spectrum.extensions[:, k]
    dist = domain.distance_to_boundary(mesh.nodes)
    mu = spectrum.eigenvalues[k]
    sqrt_per = math.sqrt(domain.perimeter)
    return LocalizationMap(
        k=k,
        mu=float(mu),
        values=v,
        amplified=np.abs(sqrt_per * v * np.exp(mu * dist)),
        distances=dist,
        floor=floor,
    )


@dataclass
class RadialProfile:
    k: int
    mu: float
    bin_centers: np.ndarray
    values: np.ndarray        # U_k per band: sqrt(|dOmega|) max |V_k|
    half_width: float

    def guide(self) -> np.ndarray:
        """U(0) exp(-mu delta) reference decay."""
        return self.values[0] * np.exp(-self.mu * self.bin_centers)


def uk_profile(
    spectrum: Spectrum, k: int, mesh: Mesh, domain: Domain, bin_width: float | None = None
) -> RadialProfile:
    """Max |V_k| over bands of distance-to-boundary (binned stand-in for the
    exact contour-line maximum; band width defaults to 2h)."""
    if spectrum.extensions is None:
        raise AnalysisError("spectrum has no interior extensions attached")
    w = 2.0 * mesh.h_max if bin_width is None else bin_width
    v = np.abs(spectrum.extensions[:, k])
    dist = domain.distance_to_boundary(mesh.nodes)
    nbin = int(dist.max() / w) + 1
    idx = np.minimum((dist / w).astype(int), nbin - 1)
    sqrt_per = math.sqrt(domain.perimeter)
    centers, values = [], []
    for b in range(nbin):
        mask = idx == b
        if mask.any():
            centers.append(b * w)  # band [b*w, (b+1)*w); label by inner edge + w/2
            values.append(sqrt_per * v[mask].max())
    centers = np.asarray(centers) + w / 2
    centers[0] = 0.0  # the first band contains the boundary nodes themselves
    return RadialProfile(
        k=k,
        mu=float(spectrum.eigenvalues[k]),
        bin_centers=centers,
        values=np.asarray(values),
        half_width=w / 2,
    )


# ---------------------------------------------------------------------------
# norm identities
# ---------------------------------------------------------------------------

def match_branches(ref: Spectrum, other: Spectrum, matrices: FemMatrices) -> np.ndarray:
    """For each mode of ``ref``, the index of the matching mode of ``other``
    by maximal |M_b inner product| (sorted indices swap at crossings)."""
    local = ref.steklov_nodes - matrices.n_interior
    mb = matrices.boundary_mass[local][:, local]
    overlap = np.abs(ref.vectors.T @ (mb @ other.vectors))
    rows, cols = linear_sum_assignment(-overlap)
    out = np.empty(ref.count, dtype=int)
    out[rows] = cols
    return out


def norm_identities(
    mesh: Mesh,
    matrices: FemMatrices,
    p: float,
    count: int,
    dp: float | None = None,
    partition: BoundaryPartition | None = None,
) -> list[dict]:
    """Residuals of the three quadratic-form identities per mode:

    (a) V^T (pM + K) V = mu  (exact Schur algebra, solver-precision check);
    (b) V^T M V = d(mu)/dp   (central difference, branch-tracked);
    (c) V^T K V = mu - p d(mu)/dp.
    """
    if dp is None:
        dp = max(1e-3, 1e-2 * p)
    if p - dp < 0:
        raise AnalysisError("need p - dp >= 0 for the central difference")

    def solve(pp: float, n: int) -> Spectrum:
        roles = None if partition is None else partition.roles
        fac = factor_interior(matrices, pp, roles)
        op = build_dtn(matrices, fac, pp, partition)
        spec = eigensolve(op, n)
        attach_extensions(spec, matrices, fac)
        return spec

    spec0 = solve(p, count)
    lo = solve(p - dp, min(count + 4, matrices.n_boundary))
    hi = solve(p + dp, min(count + 4, matrices.n_boundary))
    i_lo = match_branches(spec0, lo, matrices)
    i_hi = match_branches(spec0, hi, matrices)

    A = (p * matrices.mass + matrices.stiffness).tocsr()
    K = matrices.stiffness
    M = matrices.mass
    rows = []
    for k in range(count):
        V = spec0.extensions[:, k]
        mu = spec0.eigenvalues[k]
        energy = float(V @ (A @ V))
        l2 = float(V @ (M @ V))
        grad = float(V @ (K @ V))
        dmu = (hi.eigenvalues[i_hi[k]] - lo.eigenvalues[i_lo[k]]) / (2 * dp)
        local = spec0.steklov_nodes - matrices.n_interior
        mb = matrices.boundary_mass[local][:, local]
        o_lo = abs(spec0.vectors[:, k] @ (mb @ lo.vectors[:, i_lo[k]]))
        o_hi = abs(spec0.vectors[:, k] @ (mb @ hi.vectors[:, i_hi[k]]))
        rows.append(
            {
                "k": k,
                "mu": mu,
                "energy_residual_rel": abs(energy - mu) / max(abs(mu), 1e-300),
                "l2_volume": l2,
                "dmu_dp": dmu,
                "l2_residual_rel": abs(l2 - dmu) / max(abs(l2), 1e-300),
                "grad_sq": grad,
                "grad_residual_rel": abs(grad - (mu - p * dmu)) / max(abs(grad), 1e-300),
                "tracked": bool(min(o_lo, o_hi) > 0.5),
            }
        )
    return rows


# ---------------------------------------------------------------------------
# pressure sweep
# ---------------------------------------------------------------------------

@dataclass
class PSweep:
    p_grid: np.ndarray
    eigenvalues: np.ndarray      # (len(grid), count), each row ascending
    small_p_slope: float         # area / perimeter
    conjecture_c: np.ndarray | None  # per-k large-p prefactors for polygons

    def sqrt_reference(self) -> np.ndarray:
        return np.sqrt(self.p_grid)

    def small_p_reference(self) -> np.ndarray:
        return self.small_p_slope * self.p_grid


def p_sweep(
    domain: Domain,
    mesh: Mesh,
    matrices: FemMatrices,
    p_grid,
    count: int,
    partition: BoundaryPartition | None = None,
) -> PSweep:
    """Spectra over an increasing pressure grid (sorted-index bookkeeping)."""
    p_grid = np.asarray(p_grid, dtype=float)
    if np.any(np.diff(p_grid) <= 0) or np.any(p_grid < 0):
        raise AnalysisError("pressure grid must be nonnegative and strictly increasing")
    rows = np.empty((len(p_grid), count))
    roles = None if partition is None else partition.roles
    for i, p in enumerate(p_grid):
        fac = factor_interior(matrices, p, roles)
        op = build_dtn(matrices, fac, p, partition)
        rows[i] = eigensolve(op, count).eigenvalues
    conj = None
    if domain.is_polygon:
        conj = effective_angle_sequence(domain.angle_sequence(), count).coefficients
    return PSweep(
        p_grid=p_grid,
        eigenvalues=rows,
        small_p_slope=domain.area / domain.perimeter,
        conjecture_c=conj,
    )


# ---------------------------------------------------------------------------
# CSV / JSON export
# ---------------------------------------------------------------------------

def sweep_to_csv(sweep: PSweep, path) -> None:
    with open(path, "w") as f:
        f.write("p,k,mu\n")
        for i, p in enumerate(sweep.p_grid):
            for k, mu in enumerate(sweep.eigenvalues[i]):
                f.write(f"{p:.17g},{k},{mu:.17g}\n")


def ak_to_csv(rows: list[tuple[float, np.ndarray]], path) -> None:
    """rows: list of (p, A_k array)."""
    with open(path, "w") as f:
        f.write("p,k,abs_ak\n")
        for p, ak in rows:
            for k, a in enumerate(ak):
                f.write(f"{p:.17g},{k},{abs(a):.17g}\n")


def profile_to_csv(profile: RadialProfile, path) -> None:
    with open(path, "w") as f:
        f.write("k,delta,U\n")
        for d, u in zip(profile.bin_centers, profile.values):
            f.write(f"{profile.k},{d:.17g},{u:.17g}\n")


def bkmap_to_csv(loc: LocalizationMap, mesh: Mesh, path) -> None:
    with open(path, "w") as f:
        f.write("node,x,y,dist,V,B\n")
        for i in range(mesh.n_nodes):
            f.write(
                f"{i},{mesh.nodes[i,0]:.17g},{mesh.nodes[i,1]:.17g},"
                f"{loc.distances[i]:.17g},{loc.values[i]:.17g},{loc.amplified[i]:.17g}\n"
            )


def summary_to_json(path, **payload) -> None:
    def default(o):
        if isinstance(o, np.ndarray):
            return o.tolist()
        if isinstance(o, (np.floating, np.integer)):
            return o.item()
        raise TypeError(f"not JSON-serializable: {type(o)}")

    with open(path, "w") as f:
        json.dump(payload, f, indent=2, default=default, sort_keys=True)
        f.write("\n")
