"""Shipped model geometries: circle, flat tori, and a reflection interval.

Each constructor returns a :class:`TruncatedTriple` with analytic spectral
data for D (no dense diagonalization), a named generating set realized as
exact circulants, and -- where one exists -- a default orientation chain.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .hochschild import HochschildChain
from .operators import AlgebraElement, MatrixOperator, ModeLattice
from .triple import BandPolicy, TruncatedTriple

__all__ = ["circle", "torus", "interval", "build", "PAULI",
           "product_triple", "corrupt", "CORRUPTION_MODES", "GeometrySpec"]

PAULI = {
    1: np.array([[0, 1], [1, 0]], dtype=complex),
    2: np.array([[0, -1j], [1j, 0]], dtype=complex),
    3: np.array([[1, 0], [0, -1]], dtype=complex),
}


def _wedge_clifford_2d():
    """Real Clifford action v -> (v wedge .) - (contraction by v) on
    Lambda* R^2, basis ordered (1, e1, e2, e1^e2)."""
    c1 = np.zeros((4, 4))
    c2 = np.zeros((4, 4))
    # images of (1, e1, e2, e12) under c(e1)
    c1[1, 0], c1[0, 1], c1[3, 2], c1[2, 3] = 1, -1, 1, -1
    # ... and under c(e2)
    c2[2, 0], c2[0, 2], c2[3, 1], c2[1, 3] = 1, -1, -1, 1
    return c1, c2


def circle(cutoff: int, *, kernel_shift: float = 1.0) -> TruncatedTriple:
    """Unit circle with D = diag(n), modes |n| <= cutoff."""
    M = 2 * cutoff + 1
    lat = ModeLattice(M, 1)
    reps = lat.reps[:, 0].astype(float)
    D = MatrixOperator.diag(reps)
    theta = 2 * np.pi * np.arange(M) / M

    u = AlgebraElement(lat, np.exp(1j * theta), "u")
    elements = {
        "u": u,
        "u_star": u.conj(),
        "cos": AlgebraElement(lat, np.cos(theta), "cos"),
        "sin": AlgebraElement(lat, np.sin(theta), "sin"),
        "one": AlgebraElement(lat, np.ones(M), "one"),
    }
    gens = {k: elements[k].matrix(1) for k in ("u", "u_star", "cos", "sin")}
    cycle = HochschildChain(1, [(1.0, (elements["u_star"], elements["u"]))])
    return TruncatedTriple(
        D=D, generators=gens, grading=None, p=1, spinor_dim=1,
        band=BandPolicy(cutoff, 1), lattice=lat, kernel_shift=kernel_shift,
        algebra=elements, cycle=cycle, kind="circle",
        band_edge_energy=float(cutoff),
        d_spectrum=reps, d_basis=MatrixOperator.identity(M))


def torus(cutoff: int, p: int = 2, *, operator: str = "dirac",
          kernel_shift: float = 1.0) -> TruncatedTriple:
    """Flat p-torus (p = 2 or 3), Dirac or (p=2) signature-type operator.

    D acts on mode k as 2*pi * k_mu gamma^mu with gamma a Pauli (Dirac)
    or wedge/contraction Clifford (signature) representation.
    """
    if p not in (2, 3):
        raise ValueError("torus dimension must be 2 or 3")
    if operator not in ("dirac", "signature"):
        raise ValueError(f"unknown operator variant {operator!r}")
    if operator == "signature" and p != 2:
        raise ValueError("signature variant only shipped for p = 2")
    M = 2 * cutoff + 1
    lat = ModeLattice(M, p)
    if operator == "dirac":
        cs = [PAULI[mu + 1] for mu in range(p)]
        grading_block = PAULI[3] if p == 2 else None
    else:
        c1, c2 = _wedge_clifford_2d()
        cs = [1j * c1, 1j * c2]   # hermitian Clifford factors
        grading_block = 1j * (c1 @ c2)
    ns = cs[0].shape[0]

    blocks = np.zeros((lat.n_modes, ns, ns), dtype=complex)
    for mu in range(p):
        blocks += 2 * np.pi * lat.reps[:, mu, None, None] * cs[mu]
    w, v = np.linalg.eigh(blocks)          # vectorized per-mode eigh
    d_spectrum = w.ravel()
    d_basis = MatrixOperator(sp.block_diag([v[i] for i in range(lat.n_modes)],
                                           format="csr"))
    D = MatrixOperator(sp.block_diag([blocks[i] for i in range(lat.n_modes)],
                                     format="csr"))
    grading = None
    if grading_block is not None:
        grading = MatrixOperator(
            sp.kron(sp.identity(lat.n_modes), grading_block, format="csr"))

    x = lat.grid_points()
    names = "xyz"[:p]
    elements = {"one": AlgebraElement(lat, np.ones(lat.shape), "one")}
    for mu in range(p):
        ph = np.exp(2j * np.pi * x[:, mu]).reshape(lat.shape)
        u = AlgebraElement(lat, ph, f"u{mu + 1}")
        elements[f"u{mu + 1}"] = u
        elements[f"u{mu + 1}_star"] = u.conj()
        elements[f"cos_{names[mu]}"] = AlgebraElement(
            lat, np.cos(2 * np.pi * x[:, mu]).reshape(lat.shape), f"cos_{names[mu]}")
        elements[f"sin_{names[mu]}"] = AlgebraElement(
            lat, np.sin(2 * np.pi * x[:, mu]).reshape(lat.shape), f"sin_{names[mu]}")
    gen_names = [f"u{mu + 1}" for mu in range(p)]
    gen_names += [f"u{mu + 1}_star" for mu in range(p)]
    gen_names += [f"cos_{names[mu]}" for mu in range(p)]
    gen_names += [f"sin_{names[mu]}" for mu in range(p)]
    gens = {k: elements[k].matrix(ns) for k in gen_names}

    cycle = _torus_cycle(elements, p)
    return TruncatedTriple(
        D=D, generators=gens, grading=grading, p=p, spinor_dim=ns,
        band=BandPolicy(cutoff, 1), lattice=lat, kernel_shift=kernel_shift,
        algebra=elements, cycle=cycle, kind=f"torus{p}d-{operator}",
        band_edge_energy=2 * np.pi * cutoff,
        d_spectrum=d_spectrum, d_basis=d_basis)


def _torus_cycle(elements, p: int) -> HochschildChain:
    """Antisymmetric volume chain normalized so its representation equals
    the grading (p even) or the identity (p odd) on the inner band."""
    us = [elements[f"u{mu + 1}"] for mu in range(p)]
    a0 = elements["u1_star"]
    for mu in range(1, p):
        a0 = a0 * elements[f"u{mu + 1}_star"]
    from itertools import permutations
    kappa = {2: -1j / (8 * np.pi ** 2), 3: -1j / (48 * np.pi ** 3)}[p]
    terms = []
    for perm in permutations(range(p)):
        sign = _perm_sign(perm)
        terms.append((kappa * sign, (a0,) + tuple(us[i] for i in perm)))
    return HochschildChain(p, terms)


def _perm_sign(perm) -> int:
    sign, seen = 1, list(perm)
    for i in range(len(seen)):
        for j in range(i + 1, len(seen)):
            if seen[i] > seen[j]:
                sign = -sign
    return sign


def interval(n_half: int, *, kernel_shift: float = 1.0) -> TruncatedTriple:
    """Unit interval with reflecting boundary, modeled on its orientation
    double cover: D = diag((k + 1/2) pi), even-extension multiplication
    algebra on the doubled coordinate.

    The coordinate function ``x`` is shipped as a cosine series truncated
    at n_half // 2, so its effective bandwidth grows under refinement --
    which is exactly what the smoothness diagnostics are meant to detect.
    """
    M = 2 * n_half
    lat = ModeLattice(M, 1)
    reps = lat.reps[:, 0].astype(float)
    D = MatrixOperator.diag((reps + 0.5) * np.pi)
    xt = 2.0 * np.arange(M) / M   # doubled coordinate in [0, 2)

    elements = {"one": AlgebraElement(lat, np.ones(M), "one")}
    for m in range(1, 5):
        elements[f"cos{m}"] = AlgebraElement(lat, np.cos(np.pi * m * xt), f"cos{m}")
    bw = max(1, n_half // 2)
    coeffs = np.zeros(M, dtype=complex)
    coeffs[0] = 0.5
    for m in range(1, bw + 1, 2):
        coeffs[m % M] = -2.0 / (np.pi ** 2 * m ** 2)
        coeffs[-m % M] = -2.0 / (np.pi ** 2 * m ** 2)
    x_symbol = np.fft.ifft(coeffs) * M
    elements["x"] = AlgebraElement(lat, x_symbol.real, "x")
    gens = {k: elements[k].matrix(1) for k in ("cos1", "cos2", "cos3", "cos4")}
    return TruncatedTriple(
        D=D, generators=gens, grading=None, p=1, spinor_dim=1,
        band=BandPolicy(n_half, 4), lattice=lat, kernel_shift=kernel_shift,
        algebra=elements, cycle=None, kind="interval",
        band_edge_energy=(n_half - 0.5) * np.pi,
        d_spectrum=(reps + 0.5) * np.pi, d_basis=MatrixOperator.identity(M))


def build(kind: str, cutoff: int, **opts) -> TruncatedTriple:
    """Dispatch by name; ``torus3`` selects the 3-torus."""
    if kind == "circle":
        return circle(cutoff, **opts)
    if kind == "torus":
        return torus(cutoff, 2, **opts)
    if kind == "torus3":
        return torus(cutoff, 3, **opts)
    if kind == "interval":
        return interval(cutoff, **opts)
    raise ValueError(f"unknown geometry {kind!r}")


def product_triple(t: TruncatedTriple, dprime_spectrum) -> TruncatedTriple:
    """Tensor a graded triple with a finite energy ladder: the new
    operator is D x 1 + grading x D', acting on H x C^L.

    Squares add, so the singular values are sqrt(lambda^2 + mu^2) over
    all pairs; a long ladder inflates every Weyl count by its length,
    which is what the dimension diagnostics are expected to flag.
    """
    if t.grading is None:
        raise ValueError("product construction needs a grading")
    ladder = np.asarray(dprime_spectrum, dtype=float)
    L = ladder.size
    if L == 0:
        raise ValueError("empty ladder")
    eyeL = sp.identity(L, format="csr")
    Dnew = sp.kron(t.D.mat, eyeL) + sp.kron(t.grading.mat, sp.diags(ladder))
    gens = {k: MatrixOperator(sp.kron(g.mat, eyeL))
            for k, g in t.generators.items()}
    # D and the grading are block diagonal over modes, so the product
    # operator diagonalizes mode by mode
    n_modes, ns = t.lattice.n_modes, t.spinor_dim
    Dblocks = t.D.dense().reshape(n_modes, ns, n_modes, ns)
    Gblocks = t.grading.dense().reshape(n_modes, ns, n_modes, ns)
    idx = np.arange(n_modes)
    small = (np.einsum("kab,cd->kacbd", Dblocks[idx, :, idx, :], np.eye(L))
             + np.einsum("kab,cd->kacbd", Gblocks[idx, :, idx, :], np.diag(ladder))
             ).reshape(n_modes, ns * L, ns * L)
    ws, vs = np.linalg.eigh(small)
    w = ws.reshape(-1)
    v = sp.block_diag([vs[k] for k in range(n_modes)], format="csr")
    return TruncatedTriple(
        D=MatrixOperator(Dnew), generators=gens, grading=None, p=t.p,
        spinor_dim=t.spinor_dim * L, band=t.band, lattice=t.lattice,
        kernel_shift=t.kernel_shift, algebra=t.algebra, cycle=None,
        kind=f"product-{t.kind}",
        band_edge_energy=float(np.sqrt(t.band_edge_energy ** 2 + ladder.max() ** 2)),
        d_spectrum=w, d_basis=MatrixOperator(v),
        provenance={**t.provenance, "product_ladder": ladder.tolist()})


CORRUPTION_MODES = ("order_one_break", "grading_break", "cycle_scale", "dense_D")


def corrupt(t: TruncatedTriple, mode: str, *, amplitude: float = 1e-2,
            seed: int = 7) -> TruncatedTriple:
    """Deterministic negative-test fixtures.

    Each mode perturbs one structural ingredient so that one verifier
    fails while the bulk spectral estimates (dimension, traces) stay
    intact; operator perturbations are kept at ``amplitude`` so only
    residual-level checks react.
    """
    import dataclasses

    from .operators import eigendecompose

    prov = {**t.provenance, "corruption": mode, "seed": seed,
            "amplitude": amplitude}
    if mode == "cycle_scale":
        if t.cycle is None:
            raise ValueError("geometry ships no cycle to corrupt")
        return dataclasses.replace(t, cycle=t.cycle * 2.0, provenance=prov)
    if mode == "grading_break":
        if t.grading is None:
            raise ValueError("geometry has no grading")
        bump = sp.kron(sp.identity(t.lattice.n_modes, format="csr"),
                       sp.csr_matrix(PAULI[1][:t.spinor_dim, :t.spinor_dim]))
        return dataclasses.replace(
            t, grading=MatrixOperator(t.grading.mat + 0.1 * bump),
            provenance=prov)
    if mode in ("order_one_break", "dense_D"):
        n = t.hilbert_dim
        if mode == "dense_D":
            rng = np.random.default_rng(seed)
            E = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
            E = (E + E.conj().T) / 2.0
        else:
            # a sign-of-D-modulated generator: Hermitian, bounded, and
            # second commutators with the algebra no longer vanish
            V = t.d_basis.mat
            S = (V @ sp.diags(np.sign(t.d_spectrum)) @ V.conj().T).toarray() \
                if sp.issparse(V) else V @ np.diag(np.sign(t.d_spectrum)) @ V.conj().T
            name = next(k for k in sorted(t.generators) if k.startswith("cos"))
            C = t.generators[name].dense()
            E = (S @ C + C @ S) / 2.0
        if t.grading is not None:
            # keep the grading anticommutation intact: only the odd part
            g = t.grading.dense()
            E = (E - g @ E @ g) / 2.0
        E *= amplitude / max(np.linalg.norm(E, 2), 1e-300)
        Dnew = MatrixOperator(t.D.dense() + E)
        w, v = eigendecompose(Dnew)
        return dataclasses.replace(t, D=Dnew, d_spectrum=w,
                                   d_basis=MatrixOperator(v), provenance=prov)
    raise ValueError(f"unknown corruption mode {mode!r}")


interval_counterexample = interval


@dataclass(frozen=True)
class GeometrySpec:
    """Declarative handle for a shipped geometry, the unit of CLI configs.

    ``options`` passes straight through to the constructor (for the torus:
    ``operator``, ``kernel_shift``); ``corruption`` applies a named
    negative-test perturbation after construction; ``ladder`` tensors the
    result with a finite energy ladder.
    """

    kind: str
    cutoff: int
    p: int = 1
    options: dict = field(default_factory=dict)
    corruption: str | None = None
    ladder: tuple = ()

    def __post_init__(self):
        if self.kind not in ("circle", "torus", "interval"):
            raise ValueError(f"unknown geometry kind {self.kind!r}")
        if self.p not in (1, 2, 3):
            raise ValueError("dimension p must be 1, 2 or 3")
        if self.cutoff < 8:
            raise ValueError("cutoff must be at least 8")
        if self.corruption is not None and self.corruption not in CORRUPTION_MODES:
            raise ValueError(f"unknown corruption mode {self.corruption!r}")

    @classmethod
    def from_dict(cls, d: dict) -> "GeometrySpec":
        known = {"kind", "cutoff", "p", "options", "corruption", "ladder"}
        extra = set(d) - known
        if extra:
            raise ValueError(f"unknown geometry fields {sorted(extra)}")
        return cls(kind=d["kind"], cutoff=int(d["cutoff"]),
                   p=int(d.get("p", 2 if d["kind"] == "torus" else 1)),
                   options=dict(d.get("options", {})),
                   corruption=d.get("corruption"),
                   ladder=tuple(d.get("ladder", ())))

    def realize(self) -> TruncatedTriple:
        name = self.kind
        if self.kind == "torus":
            name = "torus3" if self.p == 3 else "torus"
        t = build(name, self.cutoff, **self.options)
        if self.ladder:
            t = product_triple(t, list(self.ladder))
        if self.corruption is not None:
            t = corrupt(t, self.corruption)
        return t
