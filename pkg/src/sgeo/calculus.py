"""Commutator calculus: derivations, smoothness towers, and the
order-one / max-principle / symbol-commutation diagnostics.

The two derivations in play are delta(T) = [|D|, T] (kernel-shifted |D|)
and delta1(T) = [D^2, T](1 + D^2)^{-1/2}.  On a finite model every
operator is trivially "smooth", so boundedness of a tower is always read
off a refinement sweep: norms that stay put when the cutoff doubles count
as bounded, norms that grow by more than a configurable factor fail.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import combinations_with_replacement, permutations
from math import comb, factorial

import numpy as np

from .operators import AlgebraElement, MatrixOperator, operator_norm
from .report import CheckReport
from .triple import BandExhausted, TruncatedTriple

__all__ = [
    "bracket_d",
    "delta",
    "delta1",
    "delta_tower",
    "regularity_probe",
    "RegularityProfile",
    "multicommutator",
    "order_one_check",
    "max_principle_check",
    "symbol_commutation_check",
    "geodesic_flow_derivative_check",
    "pk_norm",
    "rho_k_matrix",
]


def bracket_d(a, t: TruncatedTriple) -> MatrixOperator:
    """[D, a].  Band restriction is the caller's business."""
    return t.bracket(a)


def delta(T, t: TruncatedTriple) -> MatrixOperator:
    """[|D|, T] with the kernel-shifted absolute value."""
    return t.abs_d().commutator(t.as_operator(T) if isinstance(T, (str, AlgebraElement)) else MatrixOperator(T))


def delta1(T, t: TruncatedTriple) -> MatrixOperator:
    """[D^2, T] (1 + D^2)^{-1/2}."""
    T = t.as_operator(T) if isinstance(T, (str, AlgebraElement)) else MatrixOperator(T)
    D2 = t.D @ t.D
    damp = t.calculus(lambda x: (1.0 + x * x) ** -0.5)
    return D2.commutator(T) @ damp


def delta_tower(a, t: TruncatedTriple, m_max: int, *, kind: str = "delta",
                depth: int = 1) -> list:
    """Inner-band norms of the iterated derivation, orders 1..m_max."""
    step = {"delta": delta, "delta1": delta1}[kind]
    T = t.as_operator(a) if isinstance(a, (str, AlgebraElement)) else MatrixOperator(a)
    norms = []
    for _ in range(m_max):
        T = step(T, t)
        norms.append(t.inner_norm(T, depth))
    return norms


@dataclass
class RegularityProfile:
    verdict: str                      # pass | fail | inconclusive
    norms_delta: list = field(default_factory=list)
    norms_delta1: list = field(default_factory=list)
    refined_norms_delta: list = field(default_factory=list)
    refined_norms_delta1: list = field(default_factory=list)
    growth_ratios: list = field(default_factory=list)
    reason: str = ""

    @property
    def ok(self) -> bool:
        return self.verdict == "pass"


def regularity_probe(a, t: TruncatedTriple, m_max: int = 3, *,
                     refined=None, pass_factor: float = 1.5,
                     fail_factor: float = 1.8) -> RegularityProfile:
    """Boundedness of the delta / delta1 towers under one cutoff doubling.

    ``refined`` is an (element, triple) pair at doubled cutoff; when the
    probed element was passed by name and the model is a shipped geometry
    the refined pair is rebuilt automatically.
    """
    if m_max < 2:
        raise ValueError("m_max must be at least 2")
    try:
        nd = delta_tower(a, t, m_max, kind="delta")
        nd1 = delta_tower(a, t, m_max, kind="delta1")
    except BandExhausted as e:
        return RegularityProfile("inconclusive", reason=str(e))

    scale = max(max(nd), max(nd1), 0.0)
    if scale <= 1e-12:
        return RegularityProfile("pass", nd, nd1, reason="tower is null")

    if refined is None:
        refined = _auto_refine(a, t)
    if refined is None:
        return RegularityProfile("inconclusive", nd, nd1,
                                 reason="no refinement available")
    a2, t2 = refined
    try:
        rd = delta_tower(a2, t2, m_max, kind="delta")
        rd1 = delta_tower(a2, t2, m_max, kind="delta1")
    except BandExhausted as e:
        return RegularityProfile("inconclusive", nd, nd1, reason=str(e))

    ratios = []
    for coarse, fine in ((nd, rd), (nd1, rd1)):
        for c, f in zip(coarse, fine):
            if max(c, f) > 1e-12 * scale:
                ratios.append(f / max(c, 1e-300))
    worst = max(ratios) if ratios else 1.0
    if worst <= pass_factor:
        verdict = "pass"
    elif worst > fail_factor:
        verdict = "fail"
    else:
        verdict = "inconclusive"
    return RegularityProfile(verdict, nd, nd1, rd, rd1, ratios,
                             reason=f"worst growth ratio {worst:.3f} per doubling")


def _auto_refine(a, t: TruncatedTriple):
    if not isinstance(a, str):
        return None
    from . import geometries
    kind = t.kind
    try:
        if kind == "circle":
            t2 = geometries.circle(2 * t.band.cutoff, kernel_shift=t.kernel_shift)
        elif kind.startswith("torus2d"):
            t2 = geometries.torus(2 * t.band.cutoff, 2,
                                  operator=kind.split("-")[1],
                                  kernel_shift=t.kernel_shift)
        elif kind.startswith("torus3d"):
            t2 = geometries.torus(2 * t.band.cutoff, 3,
                                  kernel_shift=t.kernel_shift)
        elif kind == "interval":
            t2 = geometries.interval(2 * t.band.cutoff,
                                     kernel_shift=t.kernel_shift)
        else:
            return None
    except Exception:
        return None
    if a not in t2.algebra:
        return None
    return a, t2


def multicommutator(ops: list) -> MatrixOperator:
    """Fully alternating sum over orderings of the operator product."""
    n = len(ops)
    if not 1 <= n <= 6:
        raise ValueError("multicommutator supports 1..6 factors")
    ops = [MatrixOperator(o) for o in ops]
    acc = None
    for perm in permutations(range(n)):
        sign = _perm_sign(perm)
        term = ops[perm[0]]
        for i in perm[1:]:
            term = term @ ops[i]
        acc = term * sign if acc is None else acc + term * sign
    return acc


def _perm_sign(perm) -> int:
    sign = 1
    p = list(perm)
    for i in range(len(p)):
        for j in range(i + 1, len(p)):
            if p[i] > p[j]:
                sign = -sign
    return sign


def order_one_check(t: TruncatedTriple, *, pairs=None, tol: float = 1e-10,
                    depth: int = 3) -> CheckReport:
    """max over generator pairs of the inner-band norm of [[D,a],b]."""
    names = sorted(t.generators) if pairs is None else None
    if pairs is None:
        pairs = [(a, b) for i, a in enumerate(names) for b in names[i:]]
    worst, worst_pair = 0.0, None
    try:
        for a, b in pairs:
            X = t.bracket(a).commutator(t.as_operator(b))
            r = t.inner_norm(X, depth)
            if r > worst:
                worst, worst_pair = r, (str(a), str(b))
    except BandExhausted as e:
        return CheckReport("order_one", "inconclusive", reason=str(e))
    return CheckReport.from_residuals(
        "order_one", {"max_double_commutator": worst},
        {"max_double_commutator": tol},
        diagnostics={"worst_pair": worst_pair, "depth": depth})


def max_principle_check(h, t: TruncatedTriple, concentration_scales=None, *,
                        decrease_factor: float = 0.6,
                        depth_margin: int = 2) -> CheckReport:
    """Does [D,h] die on bump functions concentrating at the maximum of h?

    Bumps are grid Gaussians centered at the argmax of the symbol of h,
    band-projected and sup-normalized, with widths from
    ``concentration_scales`` (defaults to four halvings of 1/8 of the
    cell).  Pass iff each halving shrinks ||[D,h] b_n|| by at least
    ``decrease_factor``.
    """
    el = t.element(h)
    if not el.is_real(1e-9):
        raise ValueError("max-principle probe needs a Hermitian element")
    if concentration_scales is None:
        concentration_scales = [0.125 / 2 ** j for j in range(3)]
    lat = t.lattice
    # a bump narrower than the grid spacing probes nothing
    concentration_scales = [s for s in concentration_scales if s >= 1.0 / lat.M]
    if len(concentration_scales) < 2:
        return CheckReport("max_principle", "inconclusive",
                           reason="grid too coarse for the requested scales")
    sym = el.symbol.ravel().real
    argmax = int(np.argmax(sym))
    x0 = lat.grid_points()[argmax]

    Dh = t.bracket(el)
    mask = t.band_mask(depth_margin)
    spinor = np.ones(t.spinor_dim) / np.sqrt(t.spinor_dim)
    seq = []
    for scale in concentration_scales:
        b = _grid_bump(t, x0, scale, depth_margin)
        vec = np.kron(b, spinor)
        out = Dh @ vec
        out[~mask] = 0.0  # wrap rows at the truncation edge are artifacts
        seq.append(float(np.linalg.norm(out)))
    seq = np.asarray(seq)
    ref = seq.max()
    if ref <= 1e-12 * max(1.0, el.sup_norm()):
        return CheckReport("max_principle", "pass",
                           {"sequence_tail": 0.0}, {"sequence_tail": 1.0},
                           {"sequence": seq.tolist(), "argmax": x0.tolist()},
                           reason="commutator annihilates all bumps")
    ratios = seq[1:] / np.maximum(seq[:-1], 1e-300)
    worst = float(ratios.max())
    verdict = "pass" if worst <= decrease_factor else "fail"
    return CheckReport(
        "max_principle", verdict,
        {"worst_halving_ratio": worst},
        {"worst_halving_ratio": decrease_factor},
        {"sequence": seq.tolist(), "argmax": x0.tolist(),
         "scales": list(concentration_scales)},
        reason="bump norms must shrink while concentrating at the maximum")


def _grid_bump(t: TruncatedTriple, x0, scale: float, depth: int) -> np.ndarray:
    """Mode coefficients of a band-projected, sup-normalized periodic
    Gaussian centered at x0."""
    lat = t.lattice
    x = lat.grid_points()
    d2 = np.zeros(lat.n_modes)
    for a in range(lat.p_axes):
        da = np.abs(x[:, a] - x0[a])
        da = np.minimum(da, 1.0 - da)
        d2 += da * da
    g = np.exp(-d2 / (2.0 * scale ** 2))
    c = np.fft.fftn(g.reshape(lat.shape)) / lat.n_modes
    c = c.ravel()
    c[lat.inf_norms > t.band.lambda_in(depth)] = 0.0
    grid = np.fft.ifftn(c.reshape(lat.shape)) * lat.n_modes
    return c / np.abs(grid).max()


def symbol_commutation_check(h, a, t: TruncatedTriple, *, tol: float = 1e-6,
                             depth: int = 3) -> CheckReport:
    """Residuals for [ |[D,h]| , [D,a] ] = 0 and [D,h]^2 in the algebra.

    |[D,h]| is realized as the multiplication operator of the square root
    of the extracted symbol of -[D,h]^2 -- the form in which the commutant
    property is actually equivalent to membership of [D,h]^2 in A.  A
    global matrix absolute value would smear band-edge artifacts into the
    bulk and obscure the property being tested.
    """
    from .triple import circulant_extract
    el_h, el_a = t.element(h), t.element(a)
    Dh, Da = t.bracket(el_h), t.bracket(el_a)
    Dh2 = Dh @ Dh
    q = circulant_extract(Dh2 * (-1.0), t, depth=1)
    abs_el = AlgebraElement(t.lattice,
                            np.sqrt(np.clip(q.symbol.real, 0.0, None)))
    r1 = t.inner_norm(abs_el.matrix(t.spinor_dim).commutator(Da), depth)
    r2 = _distance_to_algebra_span(Dh2, t, depth)
    return CheckReport.from_residuals(
        "symbol_commutation",
        {"abs_commutator": r1, "square_outside_algebra": r2},
        {"abs_commutator": tol, "square_outside_algebra": tol},
        diagnostics={"depth": depth})


def _distance_to_algebra_span(X: MatrixOperator, t: TruncatedTriple,
                              depth: int) -> float:
    """Frobenius distance (relative) from the inner-band compression of X
    to the span of multiplication operators of generator products."""
    basis_els = [t.algebra["one"]] if "one" in t.algebra else []
    gens = [t.element(g) for g in sorted(t.generators)]
    basis_els += gens
    for e1, e2 in combinations_with_replacement(gens, 2):
        basis_els.append(e1 * e2)
    mask = t.band_mask(depth)
    cols = []
    for el in basis_els:
        cols.append(el.matrix(t.spinor_dim).submatrix(mask).dense().ravel())
    A = np.stack(cols, axis=1)
    y = X.submatrix(mask).dense().ravel()
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = np.linalg.norm(y - A @ coef)
    return float(resid / max(np.linalg.norm(y), 1e-300))


def geodesic_flow_derivative_check(T, t: TruncatedTriple, step_grid=None, *,
                                   order_tol: float = 0.9,
                                   depth: int = 1) -> CheckReport:
    """First-order Taylor check of the modulus flow e^{it|D|} T e^{-it|D|}."""
    if step_grid is None:
        step_grid = [0.1 / 2 ** j for j in range(5)]
    T = t.as_operator(T) if isinstance(T, (str, AlgebraElement)) else MatrixOperator(T)
    dT = delta(T, t)
    scale = max(operator_norm(T), 1e-300)
    resid = []
    for s in step_grid:
        U = t.calculus(lambda x, s=s: np.exp(1j * s * x))
        flowed = U @ T @ U.H
        R = (flowed - T) * (1.0 / s) - 1j * dT
        resid.append(t.inner_norm(R, depth))
    resid = np.asarray(resid)
    if resid.max() <= 1e-12 * scale:
        return CheckReport("geodesic_flow", "pass",
                           {"fitted_order": 1.0}, {"fitted_order": order_tol},
                           {"residuals": resid.tolist(), "steps": list(step_grid)},
                           reason="flow acts trivially on this operator")
    live = resid > 1e-14 * scale
    slope = np.polyfit(np.log(np.asarray(step_grid)[live]),
                       np.log(resid[live]), 1)[0]
    verdict = "pass" if slope >= order_tol else "fail"
    return CheckReport("geodesic_flow", verdict,
                       {"fitted_order": float(slope)},
                       {"fitted_order": order_tol},
                       {"residuals": resid.tolist(), "steps": list(step_grid)})


def rho_k_matrix(x, t: TruncatedTriple, k: int) -> np.ndarray:
    """Block upper-triangular representation with delta^j(x)/j! on the
    j-th superdiagonal; a representation because delta is a derivation."""
    X = t.as_operator(x) if isinstance(x, (str, AlgebraElement)) else MatrixOperator(x)
    n = t.hilbert_dim
    powers = [X.dense()]
    for _ in range(k):
        X = delta(X, t)
        powers.append(X.dense())
    out = np.zeros(((k + 1) * n, (k + 1) * n), dtype=complex)
    for i in range(k + 1):
        for j in range(i, k + 1):
            out[i * n:(i + 1) * n, j * n:(j + 1) * n] = \
                powers[j - i] / factorial(j - i)
    return out


def pk_norm(x, t: TruncatedTriple, k: int) -> float:
    """Sobolev-style norm: spectral norm of the rho_k representation."""
    return float(np.linalg.svd(rho_k_matrix(x, t, k), compute_uv=False)[0])


def leibniz_ladder_residual(T, t: TruncatedTriple, *, m: int = 2) -> float:
    """|D|^m T = sum_k C(m,k) delta^k(T) |D|^{m-k}, exact matrix identity."""
    T = t.as_operator(T) if isinstance(T, (str, AlgebraElement)) else MatrixOperator(T)
    absd = t.abs_d()
    lhs = T
    for _ in range(m):
        lhs = absd @ lhs
    rhs = None
    dk = T
    for k_ in range(m + 1):
        pw = MatrixOperator.identity(t.hilbert_dim)
        for _ in range(m - k_):
            pw = pw @ absd
        term = dk @ pw * comb(m, k_)
        rhs = term if rhs is None else rhs + term
        dk = delta(dk, t)
    scale = max(operator_norm(lhs), 1e-300)
    return operator_norm(lhs - rhs) / scale


def double_identity_residual(h, t: TruncatedTriple, *, depth: int = 3) -> float:
    """[[D^2, h], h] - 2 [D,h]^2 on the inner band."""
    H = t.as_operator(h) if isinstance(h, (str, AlgebraElement)) else MatrixOperator(h)
    D2 = t.D @ t.D
    lhs = D2.commutator(H).commutator(H)
    Dh = t.D.commutator(H)
    return t.inner_norm(lhs - (Dh @ Dh) * 2.0, depth)
