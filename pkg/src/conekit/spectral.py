"""Spectral measures and the mode-wise expansion transform pair.

A spectral measure is a set of atoms ``(lam_j, w_j)`` plus a sampled
density ``r(lam)`` on ``[0, cutoff]``.  The forward transform integrates
a sampled function against the normalized mode functions ``v~_lam``; the
inverse integrates a transform table against the measure.  Closed-form
densities are provided for the square-root metric (Gamma-function
formula) and the constant metric (half-line cosine expansion); general
profiles go through the truncated-interval spectrum.

Density quadrature works in the variable ``s = sqrt(lam - origin)``:
the grid is geometric in ``lam`` below the knee (resolving integrable
endpoint singularities such as ``lam^{-1/4}``) and uniform in ``s``
beyond it (so oscillatory integrands ``cos(s x)`` are sampled at fixed
phase per step), integrated by overlapping local parabolas.
"""

import math
import os
import tempfile
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad, simpson
from scipy.interpolate import PchipInterpolator

from . import specfun
from .errors import ConfigError, NumericsError
from .sl_engine import (
    DiscreteSpectrum,
    SLProblem,
    _cumquad,
    eigenfunction_table,
    truncated_spectrum,
)

__all__ = [
    "SpectralMeasure",
    "TransformTable",
    "conehalf_spectral_density",
    "flat_spectral_density",
    "conehalf_measure",
    "flat_measure",
    "truncated_measure",
    "forward_transform",
    "inverse_transform",
    "plancherel_defect",
    "snap_edges_to_atoms",
    "binned_mass_ratios",
    "richardson_mass_ratios",
    "write_density_csv",
    "write_transform_csv",
]

_PROVENANCES = ("closed_form", "truncated_interval")


# ---------------------------------------------------------------------------
# Types
# ---------------------------------------------------------------------------


@dataclass
class SpectralMeasure:
    """Atoms plus a sampled density on ``[0, cutoff]``.

    ``atoms`` is a list of ``(lam_j, w_j)`` with ``w_j > 0``;
    ``density_grid`` / ``density_values`` sample ``r(lam) >= 0`` on an
    increasing grid; ``density_origin`` marks where the integrable
    density singularity sits (the continuous-spectrum floor), used by
    the quadrature substitution.
    """

    atoms: list
    density_grid: np.ndarray
    density_values: np.ndarray
    cutoff: float
    provenance: str
    density_origin: float = 0.0

    def __post_init__(self):
        self.density_grid = np.asarray(self.density_grid, dtype=float)
        self.density_values = np.asarray(self.density_values, dtype=float)
        if self.provenance not in _PROVENANCES:
            raise ConfigError(f"unknown provenance {self.provenance!r}")
        if self.cutoff <= 0 or not math.isfinite(self.cutoff):
            raise ConfigError(f"cutoff must be positive and finite, got {self.cutoff}")
        for lam_j, w_j in self.atoms:
            if lam_j < 0 or w_j <= 0:
                raise ConfigError(f"atom ({lam_j}, {w_j}) needs lam >= 0 and w > 0")
        if self.density_grid.size:
            if self.density_grid.ndim != 1 or (
                self.density_grid.shape != self.density_values.shape
            ):
                raise ConfigError("density grid and values must be matching 1-D arrays")
            if np.any(np.diff(self.density_grid) <= 0):
                raise ConfigError("density grid must be strictly increasing")
            if not np.all(np.isfinite(self.density_values)):
                raise ConfigError("density values must be finite")
            if np.any(self.density_values < 0):
                raise ConfigError("density values must be nonnegative")
            if self.density_grid[0] < self.density_origin:
                raise ConfigError("density grid starts before its origin")
            if self.density_grid[-1] > self.cutoff * (1 + 1e-12):
                raise ConfigError("density grid exceeds the cutoff")

    # -- integration against the density part -----------------------------

    def _s_nodes(self):
        return np.sqrt(self.density_grid - self.density_origin)

    def density_integral(self, g_values):
        """``int g(lam) r(lam) dlam`` over the sampled density, where
        ``g_values`` holds ``g`` on ``density_grid`` (batched along the
        last axis)."""
        if self.density_grid.size == 0:
            return np.zeros(np.shape(g_values)[:-1])
        s = self._s_nodes()
        integrand = 2.0 * s * self.density_values * np.asarray(g_values)
        total = _cumquad(s, integrand)[..., -1]
        # close the sliver [origin, lam_1] by linear extrapolation in s
        if s[0] > 0:
            y0 = integrand[..., 0] - s[0] * (
                (integrand[..., 1] - integrand[..., 0]) / (s[1] - s[0])
            )
            total = total + 0.5 * s[0] * (y0 + integrand[..., 0])
        return total

    def window_mass(self, lo: float, hi: float) -> float:
        """Measure mass of the window ``[lo, hi)`` (atoms + density)."""
        if hi <= lo:
            raise ConfigError(f"empty window [{lo}, {hi})")
        mass = sum(w for lam_j, w in self.atoms if lo <= lam_j < hi)
        grid = self.density_grid
        if grid.size:
            a = max(lo, float(grid[0]))
            b = min(hi, float(grid[-1]))
            if b > a:
                # monotone-cubic antiderivative of the transformed
                # integrand g(s) = 2 s r, exact for constant g
                s = self._s_nodes()
                g = 2.0 * s * self.density_values
                anti = PchipInterpolator(s, g).antiderivative()
                s_a = math.sqrt(a - self.density_origin)
                s_b = math.sqrt(b - self.density_origin)
                mass += float(anti(s_b) - anti(s_a))
            if lo < float(grid[0]) and hi > self.density_origin:
                # sliver below the first sample: linear extrapolation to s=0
                s = self._s_nodes()
                g = 2.0 * s * self.density_values
                g0 = g[0] - s[0] * (g[1] - g[0]) / (s[1] - s[0])
                mass += 0.5 * s[0] * (g0 + g[0])
        return float(mass)

    def total_mass_upto(self, lam_top: float) -> float:
        return self.window_mass(0.0, lam_top)


@dataclass
class TransformTable:
    """Samples of a mode-``k`` expansion transform.

    ``values[i]`` corresponds to ``lam_grid[i]``; the first
    ``len(measure.atoms)`` entries align with the atoms of the measure
    the table was computed against, the rest with its density grid.
    """

    k: int
    lam_grid: np.ndarray
    values: np.ndarray
    n_atoms: int = 0

    def __post_init__(self):
        self.lam_grid = np.asarray(self.lam_grid, dtype=float)
        self.values = np.asarray(self.values, dtype=complex)
        if self.lam_grid.shape != self.values.shape or self.lam_grid.ndim != 1:
            raise ConfigError("transform table needs matching 1-D grids")
        if not (0 <= self.n_atoms <= len(self.lam_grid)):
            raise ConfigError("n_atoms out of range")

    @property
    def atom_values(self):
        return self.values[: self.n_atoms]

    @property
    def density_values(self):
        return self.values[self.n_atoms:]

    def max_increment(self) -> float:
        """Largest jump between consecutive density samples (continuity
        surrogate)."""
        dv = self.density_values
        if dv.size < 2:
            return 0.0
        return float(np.max(np.abs(np.diff(dv))))


# ---------------------------------------------------------------------------
# Closed-form densities
# ---------------------------------------------------------------------------


def conehalf_spectral_density(k: int, lam: float) -> float:
    """Spectral density of mode ``k`` for the square-root metric:
    ``2^{-3/2} pi^{-2} lam^{-1/4} exp(-2 k^2 pi^3 / sqrt(lam))
    |Gamma(1/4 - 2 (k pi)^2 i / sqrt(lam))|^2``.
    """
    if lam <= 0:
        raise ConfigError(f"density needs lam > 0, got {lam}")
    root = math.sqrt(lam)
    g = specfun.gamma(0.25 - 2j * (k * math.pi) ** 2 / root)
    mod2 = (g * np.conj(g)).real
    expo = math.exp(max(-2.0 * k * k * math.pi ** 3 / root, -745.0))
    if 2.0 * k * k * math.pi ** 3 / root > 745.0:
        expo = 0.0
    return float(2.0 ** -1.5 * math.pi ** -2 * lam ** -0.25 * expo * mod2)


def flat_spectral_density(k: int, lam: float) -> float:
    """Spectral density of mode ``k`` for the constant metric:
    ``1 / (pi sqrt(lam - kappa^2))`` on ``(kappa^2, inf)``,
    ``kappa = 2 pi k``."""
    kap2 = (2.0 * math.pi * k) ** 2
    if lam <= kap2:
        raise ConfigError(f"density needs lam > kappa^2 = {kap2}, got {lam}")
    return 1.0 / (math.pi * math.sqrt(lam - kap2))


# ---------------------------------------------------------------------------
# Measure factories
# ---------------------------------------------------------------------------


def _density_lambda_grid(origin: float, cutoff: float, n_low: int, n_high: int):
    """Geometric in ``lam - origin`` below the knee, uniform in
    ``s = sqrt(lam - origin)`` beyond it."""
    span = cutoff - origin
    if span <= 0:
        raise ConfigError("cutoff must exceed the density origin")
    # the knee sits low so the uniform-phase region starts before the
    # integrand oscillates faster than the geometric spacing resolves
    knee = min(0.1, 0.5 * span)
    low = np.geomspace(1e-12, knee, n_low)
    s_high = np.linspace(math.sqrt(knee), math.sqrt(span), n_high + 1)[1:]
    grid = origin + np.unique(np.concatenate([low, s_high * s_high]))
    return grid


def conehalf_measure(k: int, cutoff: float, n_low: int = 300,
                     n_high: int = 3000) -> SpectralMeasure:
    """Closed-form spectral measure of mode ``k`` for the square-root
    metric (purely continuous; no atoms)."""
    grid = _density_lambda_grid(0.0, cutoff, n_low, n_high)
    vals = np.array([conehalf_spectral_density(k, l) for l in grid])
    return SpectralMeasure([], grid, vals, cutoff, "closed_form")


def flat_measure(k: int, cutoff: float, n_low: int = 300,
                 n_high: int = 3000) -> SpectralMeasure:
    """Closed-form spectral measure of mode ``k`` for the constant
    metric: density ``1/(pi sqrt(lam - kappa^2))`` above ``kappa^2``."""
    origin = (2.0 * math.pi * k) ** 2
    if cutoff <= origin:
        raise ConfigError("cutoff must exceed the continuous-spectrum floor")
    grid = _density_lambda_grid(origin, cutoff, n_low, n_high)
    vals = np.array([flat_spectral_density(k, l) for l in grid])
    return SpectralMeasure([], grid, vals, cutoff, "closed_form",
                           density_origin=origin)


def truncated_measure(problem: SLProblem, L: float, n_max: int,
                      lam_cap: float = None) -> SpectralMeasure:
    """Spectral measure from the truncated-interval Neumann spectrum:
    all mass in atoms, no density part."""
    spec = truncated_spectrum(problem, L, n_max, lam_cap=lam_cap)
    atoms = list(zip(spec.eigenvalues.tolist(), spec.weights.tolist()))
    cutoff = float(spec.eigenvalues[-1])
    return SpectralMeasure(atoms, np.empty(0), np.empty(0), max(cutoff, 1e-300),
                           "truncated_interval")


# ---------------------------------------------------------------------------
# Transform pair
# ---------------------------------------------------------------------------


def _measure_lambda_points(measure: SpectralMeasure):
    atom_lams = np.array([a[0] for a in measure.atoms], dtype=float)
    return np.concatenate([atom_lams, measure.density_grid]), len(measure.atoms)


def forward_transform(f, problem: SLProblem, measure: SpectralMeasure,
                      support_tol: float = 1e-8) -> TransformTable:
    """Transform a sampled function: ``phi(lam) = int f(x) v~_lam(x) r(x) dx``.

    ``f`` is a pair ``(x_grid, values)`` sampling a compactly supported
    function; the integral uses the sampled grid, so the grid must
    resolve both ``f`` and the oscillation of the highest ``lam`` in the
    measure.  Warns if ``|f|`` has not decayed at the window end.
    """
    x, fx = f
    x = np.asarray(x, dtype=float)
    fx = np.asarray(fx)
    if x.ndim != 1 or x.shape != fx.shape:
        raise ConfigError("sampled function needs matching 1-D arrays")
    if np.any(np.diff(x) <= 0):
        raise ConfigError("sample grid must be strictly increasing")
    peak = float(np.max(np.abs(fx))) if fx.size else 0.0
    if peak > 0 and abs(fx[-1]) > support_tol * peak:
        warnings.warn(
            "sampled function has not decayed at the window end; "
            "transform values include support-truncation error",
            stacklevel=2,
        )
    lams, n_atoms = _measure_lambda_points(measure)
    V, _ = eigenfunction_table(problem, lams, x)
    weight_x = problem.r(x)
    vals = simpson(fx * V * weight_x, x=x, axis=1)
    return TransformTable(problem.k or 0, lams, vals, n_atoms=n_atoms)


def inverse_transform(table: TransformTable, measure: SpectralMeasure,
                      x_grid, problem: SLProblem, tail_tol: float = 1e-4):
    """Invert a transform table: ``f(x) = int phi(lam) v~_lam(x) rho(dlam)``.

    Returns ``(x_grid, values)``.  Raises :class:`NumericsError` when
    ``phi`` has not decayed at the cutoff (relative tail above
    ``tail_tol``), since the truncated tail mass would silently bias the
    result.
    """
    x_grid = np.asarray(x_grid, dtype=float)
    lams, n_atoms = _measure_lambda_points(measure)
    if len(lams) != len(table.lam_grid) or np.max(
        np.abs(lams - table.lam_grid)
    ) > 1e-9 * (1.0 + np.max(lams, initial=0.0)):
        raise ConfigError("transform table does not match the measure grid")
    phi = table.values
    peak = float(np.max(np.abs(phi))) if phi.size else 0.0
    dens_phi = phi[n_atoms:]
    if dens_phi.size >= 3 and peak > 0:
        tail = float(np.max(np.abs(dens_phi[-3:])))
        if tail > tail_tol * peak:
            raise NumericsError(
                f"transform tail {tail:.3e} above {tail_tol:.1e} x peak at the "
                "cutoff; raise the cutoff or widen the measure"
            )
    V, _ = eigenfunction_table(problem, lams, x_grid)
    out = np.zeros(len(x_grid), dtype=complex)
    for j in range(n_atoms):
        out += measure.atoms[j][1] * phi[j] * V[j]
    if measure.density_grid.size:
        integrand = dens_phi[:, None] * V[n_atoms:]
        out += measure.density_integral(integrand.T)
    if np.max(np.abs(out.imag), initial=0.0) <= 1e-12 * np.max(
        np.abs(out.real), initial=0.0
    ):
        out = out.real
    return x_grid, out


def plancherel_defect(f, problem: SLProblem, measure: SpectralMeasure) -> float:
    """``| ||f||^2_{L2(r)} - ||phi||^2_{L2(rho)} | / ||f||^2`` for a
    sampled function ``f = (x, values)``; zero for ``f = 0``."""
    x, fx = np.asarray(f[0], dtype=float), np.asarray(f[1])
    norm_f = float(simpson(np.abs(fx) ** 2 * problem.r(x), x=x))
    if norm_f == 0.0:
        return 0.0
    table = forward_transform(f, problem, measure)
    phi = table.values
    n_atoms = table.n_atoms
    norm_phi = sum(
        measure.atoms[j][1] * abs(phi[j]) ** 2 for j in range(n_atoms)
    )
    if measure.density_grid.size:
        norm_phi += float(measure.density_integral(np.abs(phi[n_atoms:]) ** 2))
    return abs(norm_f - norm_phi) / norm_f


# ---------------------------------------------------------------------------
# Binned comparison of truncated spectra against densities
# ---------------------------------------------------------------------------


def snap_edges_to_atoms(edges, eigenvalues):
    """Snap window edges to sqrt-arithmetic midpoints between adjacent
    eigenvalues, so each window boundary falls halfway between atoms.
    Edges below the lowest midpoint are kept as given."""
    edges = np.asarray(edges, dtype=float)
    lam = np.asarray(eigenvalues, dtype=float)
    if len(lam) < 2:
        raise ConfigError("need at least two eigenvalues to snap edges")
    root = np.sqrt(np.maximum(lam, 0.0))
    mids = (0.5 * (root[1:] + root[:-1])) ** 2
    out = []
    for e in edges:
        if e < mids[0]:
            out.append(float(e))
        else:
            out.append(float(mids[np.argmin(np.abs(mids - e))]))
    out = np.array(out)
    if np.any(np.diff(out) <= 0):
        raise NumericsError("snapped edges collapsed; spectrum too sparse for bins")
    return out


def binned_mass_ratios(spectrum: DiscreteSpectrum, density_fn, edges):
    """Per-bin ratio (sum of truncated weights) / (integral of the
    density) over snapped windows.  Returns ``(snapped_edges, ratios)``.
    """
    snapped = snap_edges_to_atoms(edges, spectrum.eigenvalues)
    lam = spectrum.eigenvalues
    ratios = []
    for lo, hi in zip(snapped[:-1], snapped[1:]):
        sel = (lam >= lo) & (lam < hi)
        mass = float(np.sum(spectrum.weights[sel]))
        ref, _ = quad(density_fn, lo, hi, limit=200)
        if ref <= 0:
            raise NumericsError(f"density integral vanished on [{lo}, {hi})")
        ratios.append(mass / ref)
    return snapped, np.array(ratios)


def richardson_mass_ratios(spec_half: DiscreteSpectrum,
                           spec_full: DiscreteSpectrum, density_fn, edges):
    """Richardson-extrapolated per-bin mass ratios from two truncation
    lengths ``L`` and ``2L``: ``(4 r_{2L} - r_L) / 3`` removes the
    leading ``1/L^2`` truncation bias."""
    if not spec_full.L > spec_half.L:
        raise ConfigError("spec_full must use the larger truncation length")
    _, r_half = binned_mass_ratios(spec_half, density_fn, edges)
    _, r_full = binned_mass_ratios(spec_full, density_fn, edges)
    return (4.0 * r_full - r_half) / 3.0


# ---------------------------------------------------------------------------
# CSV emitters
# ---------------------------------------------------------------------------


def _atomic_write_text(path, text: str):
    path = os.fspath(path)
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_density_csv(path, measure: SpectralMeasure):
    """Write the density part as ``lambda,density`` rows (17 significant
    digits, header included)."""
    lines = ["lambda,density"]
    for lam, r_val in zip(measure.density_grid, measure.density_values):
        lines.append(f"{lam:.17g},{r_val:.17g}")
    _atomic_write_text(path, "\n".join(lines) + "\n")


def write_transform_csv(path, table: TransformTable):
    """Write a transform table as ``lambda,re,im`` rows (17 significant
    digits, header included)."""
    lines = ["lambda,re,im"]
    for lam, val in zip(table.lam_grid, table.values):
        lines.append(f"{lam:.17g},{val.real:.17g},{val.imag:.17g}")
    _atomic_write_text(path, "\n".join(lines) + "\n")
