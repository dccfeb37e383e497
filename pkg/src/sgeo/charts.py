"""Chart machinery: fiber projections, the conditional expectation onto
the algebra, orientation densities, cover verification, and localized
(frame) derivations with the Jacobian test.

Orientation conventions.  With the shipped Clifford frames the bracket of
a Hermitian element h decomposes as [D,h] = sum_j delta_j(h) * gtilde_j,
gtilde_j = -i sigma_j (scalar 1 when spinor_dim = 1).  The alternating
product of the gtilde_j against the grading contracts to a constant: the
chart density rho equals that constant times the Jacobian determinant of
the chart coordinates.  The constants are 1 (p=1), -2 (p=2, both Pauli
and wedge representations), 6 (p=3); they follow from the Pauli algebra
(sigma_1 sigma_2 = i sigma_3 and cyclic).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import permutations, product

import numpy as np

from .operators import AlgebraElement, MatrixOperator, eigendecompose
from .report import CheckReport
from .triple import TruncatedTriple, circulant_extract, module_inner

__all__ = [
    "ChartCandidate",
    "fiber_projections",
    "conditional_expectation",
    "rho_alpha",
    "cover_check",
    "localized_derivation",
    "frame_derivations",
    "jacobian_test",
    "default_charts",
    "frame_constant",
]

_FRAME_CONSTANT = {1: 1.0, 2: -2.0, 3: 6.0}


def frame_constant(p: int) -> float:
    return _FRAME_CONSTANT[p]


@dataclass
class ChartCandidate:
    name: str
    a0: AlgebraElement
    coords: list
    rho: AlgebraElement = None
    support_mask: np.ndarray = field(default=None)


def fiber_projections(tau, n: int, *, tol: float = 1e-6) -> list:
    """Spectral projections of an integer-spectrum element via Lagrange
    interpolation on {0, ..., n}."""
    T = tau.matrix(1) if isinstance(tau, AlgebraElement) else MatrixOperator(tau)
    w, v = eigendecompose(T)
    if np.abs(w - np.rint(w)).max() > tol or w.min() < -tol or w.max() > n + tol:
        raise ValueError("spectrum is not within tolerance of {0..n}")
    pts = np.arange(n + 1, dtype=float)
    projs = []
    for j in range(n + 1):
        vals = np.ones_like(w)
        for k in range(n + 1):
            if k != j:
                vals *= (w - pts[k]) / (pts[j] - pts[k])
        projs.append(MatrixOperator(v @ (vals[:, None] * v.conj().T)))
    return projs


def conditional_expectation(T, t: TruncatedTriple, *, depth: int = 1,
                            endo_tol: float = 1e-8) -> AlgebraElement:
    """Normalized spinor trace plus diagonal averaging, i.e. the
    projection of a module endomorphism back onto the algebra.

    Rejects operators that fail to commute with the generators (inner
    band) at ``endo_tol`` -- the expectation is only defined on
    endomorphisms."""
    T = MatrixOperator(T)
    worst = max(t.inner_norm(T.commutator(g), depth + 1)
                for g in t.generators.values())
    scale = max(T.fro() / np.sqrt(T.dim), 1.0)
    if worst > endo_tol * scale:
        raise ValueError(f"not a module endomorphism: commutator {worst:.3e}")
    return circulant_extract(T, t, depth)


def rho_alpha(t: TruncatedTriple, coords, *, depth: int | None = None) -> AlgebraElement:
    """Orientation density of a chart tuple.

    i^{p(p+1)/2} E_A(grading * alternating product of the [D, coord_j]),
    with the grading omitted in odd dimension.  Hermitian by construction
    for Hermitian coordinates; the imaginary residue is checked.
    """
    p = t.p
    if len(coords) != p:
        raise ValueError(f"need exactly {p} coordinates")
    if depth is None:
        depth = p + 1
    brackets = [t.bracket(c) for c in coords]
    acc = None
    for perm in permutations(range(p)):
        sign = _perm_sign(perm)
        term = brackets[perm[0]]
        for i in perm[1:]:
            term = term @ brackets[i]
        acc = term * sign if acc is None else acc + term * sign
    if t.grading is not None:
        acc = t.grading @ acc
    elif p % 2 == 0:
        raise ValueError("even p requires a grading")
    pref = 1j ** (p * (p + 1) // 2)
    el = circulant_extract(acc * pref, t, depth)
    herm_defect = float(np.abs(el.symbol.imag).max())
    if herm_defect > 1e-8 * max(el.sup_norm(), 1.0):
        raise ValueError(f"density not Hermitian: residue {herm_defect:.3e}")
    return AlgebraElement(t.lattice, el.symbol.real)


def _perm_sign(perm) -> int:
    sign = 1
    p = list(perm)
    for i in range(len(p)):
        for j in range(i + 1, len(p)):
            if p[i] > p[j]:
                sign = -sign
    return sign


def default_charts(t: TruncatedTriple) -> list:
    """The standard trigonometric chart family covering the shipped
    periodic geometries: per axis the pair (sin, -cos)/(2 pi), partition
    pieces proportional to the product of the complementary derivatives."""
    p = t.p
    lat = t.lattice
    x = lat.grid_points()
    two_pi = 2.0 * np.pi
    # energy of the first lattice mode sets the derivative normalization
    mode1 = t.band_edge_energy / t.band.cutoff
    c0 = 1j ** (p * (p + 1) // 2) / frame_constant(p)
    charts = []
    for combo in product(range(2), repeat=p):
        coords, dervs, label = [], [], []
        for axis, which in enumerate(combo):
            ang = two_pi * x[:, axis].reshape(lat.shape)
            if which == 0:
                coords.append(AlgebraElement(lat, np.sin(ang) / mode1))
                dervs.append(np.cos(ang))
                label.append(f"s{axis}")
            else:
                coords.append(AlgebraElement(lat, -np.cos(ang) / mode1))
                dervs.append(np.sin(ang))
                label.append(f"c{axis}")
        weight = np.ones(lat.shape)
        for d in dervs:
            weight = weight * d
        a0 = AlgebraElement(lat, c0 * weight)
        rho = rho_alpha(t, coords)
        mask = np.abs(rho.symbol) > 0.1 * max(rho.sup_norm(), 1e-300)
        charts.append(ChartCandidate("-".join(label), a0, coords, rho, mask))
    return charts


def cover_check(t: TruncatedTriple, charts, *, tol: float = 1e-6) -> CheckReport:
    """Partition identity sum_a a0_a rho_a = i^{p(p+1)/2} and pointwise
    non-degeneracy of the densities."""
    p = t.p
    total = np.zeros(t.lattice.shape, dtype=complex)
    minmax = np.zeros(t.lattice.shape)
    for ch in charts:
        rho = ch.rho if ch.rho is not None else rho_alpha(t, ch.coords)
        total += ch.a0.symbol * rho.symbol
        minmax = np.maximum(minmax, np.abs(rho.symbol))
    resid = float(np.abs(1j ** (-p * (p + 1) // 2) * total - 1.0).max())
    floor = float(minmax.min())
    verdict = "pass" if (resid <= tol and floor > 0.0) else "fail"
    return CheckReport("cover", verdict,
                       {"identity_residual": resid},
                       {"identity_residual": tol},
                       {"min_over_grid_of_max_density": floor,
                        "n_charts": len(charts)})


def localized_derivation(xi, a, t: TruncatedTriple) -> AlgebraElement:
    """i (xi | [D,a] xi) as a grid symbol."""
    el = t.element(a) if isinstance(a, (str, AlgebraElement)) else a
    T = t.bracket(el)
    xi = np.asarray(xi, dtype=complex)
    return 1j * module_inner(xi, T @ xi, t)


def frame_derivations(t: TruncatedTriple) -> list:
    """The p coordinate derivations recovered from the constant spinor
    frame by polarization of the diagonal forms (xi | [D,a] xi).

    Inverts [D,a] = sum_j delta_j(a) * (-i sigma_j) through the trace
    pairing of the Pauli matrices; for spinor_dim 1 the single derivation
    is i (eta | [D,a] eta) directly.
    """
    lat = t.lattice
    ns = t.spinor_dim
    frames = []
    zero_mode = lat.flat_index(np.zeros((1, lat.p_axes), dtype=int))[0]
    for s in range(ns):
        v = np.zeros(t.hilbert_dim, dtype=complex)
        v[zero_mode * ns + s] = 1.0
        frames.append(v)
    if ns == 1:
        return [lambda a, _t=t: localized_derivation(frames[0], a, _t)]
    from .geometries import PAULI
    sigmas = [PAULI[mu + 1] for mu in range(t.p)]

    def make(mu):
        sig = sigmas[mu]

        def deriv(a, _t=t):
            T = _t.bracket(_t.element(a) if isinstance(a, (str, AlgebraElement)) else a)
            acc = np.zeros(lat.shape, dtype=complex)
            from .triple import module_matrix_element
            for k in range(ns):
                for l in range(ns):
                    if sig[l, k] == 0:
                        continue
                    akl = module_matrix_element(frames[k], frames[l], T, _t)
                    acc += sig[l, k] * akl.symbol
            return AlgebraElement(lat, 0.5j * acc)

        return deriv

    # a_kl = -i sum_j d_j(a) (sigma_j)_{kl}; tr(sigma_j sigma_m) = 2 delta
    return [make(mu) for mu in range(t.p)]


def _eval_at(el: AlgebraElement, x) -> complex:
    """Band-limited interpolation of a grid symbol at an off-grid point."""
    lat = el.lattice
    c = el.coeffs
    x = np.asarray(x, dtype=float)
    phase = np.ones(lat.shape, dtype=complex)
    reps = lat.axis_reps
    for axis in range(lat.p_axes):
        ax_phase = np.exp(2j * np.pi * reps * x[axis])
        shape = [1] * lat.p_axes
        shape[axis] = lat.M
        phase = phase * ax_phase.reshape(shape)
    return complex(np.sum(c * phase))


def jacobian_test(t: TruncatedTriple, coords, derivations, x, *,
                  threshold_factor: float = 1e-3) -> CheckReport:
    """Non-degeneracy of the p x p matrix of derivation symbols at x,
    cross-checked against the alternating-product density."""
    p = t.p
    mat = np.zeros((p, p), dtype=complex)
    scale = 1.0
    for j, dv in enumerate(derivations):
        row_scale = 0.0
        for k, c in enumerate(coords):
            el = dv(c)
            mat[j, k] = _eval_at(el, x)
            row_scale = max(row_scale, el.sup_norm())
        scale *= max(row_scale, 1e-300)
    det = complex(np.linalg.det(mat))
    threshold = threshold_factor * scale
    rho = rho_alpha(t, coords)
    det_from_rho = _eval_at(rho, x) / frame_constant(p)
    cross = abs(det - det_from_rho) / max(scale, 1e-300)
    verdict = "pass" if abs(det) >= threshold else "fail"
    return CheckReport(
        "jacobian", verdict,
        {"det_magnitude_deficit": max(threshold - abs(det), 0.0),
         "cross_check_gap": cross},
        {"det_magnitude_deficit": 0.0, "cross_check_gap": 1e-6},
        {"det": {"re": det.real, "im": det.imag}, "threshold": threshold,
         "det_from_density": float(np.real(det_from_rho))})
