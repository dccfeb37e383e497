"""Hochschild chains over the commutative grid algebra.

Chains are finite sums c = sum_i coeff_i * (a_i^0 tensor a_i^1 ... a_i^k)
whose slots are grid symbols.  Products of slots are pointwise symbol
products, so boundary cancellations that hold algebraically hold here to
the last bit, and canonicalization can merge terms by exact content.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import permutations
from typing import List, Tuple

import numpy as np

from .operators import AlgebraElement, MatrixOperator

__all__ = [
    "HochschildChain",
    "boundary",
    "antisymmetrize",
    "pi_d",
    "orientability_check",
]


@dataclass
class HochschildChain:
    degree: int
    terms: List[Tuple[complex, Tuple[AlgebraElement, ...]]]

    def __post_init__(self):
        for _, slots in self.terms:
            if len(slots) != self.degree + 1:
                raise ValueError("slot count must be degree + 1")

    def scale(self) -> float:
        """Sum over terms of |coeff| * prod of slot sup norms."""
        out = 0.0
        for c, slots in self.terms:
            prod = abs(c)
            for s in slots:
                prod *= s.sup_norm()
            out += prod
        return out

    def canonical(self, tol: float = 1e-13) -> "HochschildChain":
        """Merge terms with identical slot content, drop negligible ones.

        Exact content hashes do the first pass; a tolerance pass then
        merges terms whose slots agree to near machine precision (the
        residue of non-associative floating products).
        """
        merged = {}
        for c, slots in self.terms:
            k = tuple(s.key() for s in slots)
            if k in merged:
                merged[k] = (merged[k][0] + c, slots)
            else:
                merged[k] = (c, slots)
        groups = []  # (coeff, slots)
        for c, slots in merged.values():
            for i, (gc, gs) in enumerate(groups):
                if all(_close(a.symbol, b.symbol) for a, b in zip(slots, gs)):
                    groups[i] = (gc + c, gs)
                    break
            else:
                groups.append((c, slots))
        ref = max((abs(c) * np.prod([s.sup_norm() or 1.0 for s in slots])
                   for c, slots in groups), default=0.0)
        terms = [(c, slots) for c, slots in groups
                 if abs(c) * np.prod([s.sup_norm() or 1.0 for s in slots])
                 > tol * max(ref, 1e-300)]
        return HochschildChain(self.degree, terms)

    def as_dict(self) -> dict:
        """JSON-ready form: slot symbols stored as [re, im] grid values."""
        terms = []
        for c, slots in self.terms:
            terms.append({
                "coeff": [float(np.real(c)), float(np.imag(c))],
                "slots": [np.stack([s.symbol.real, s.symbol.imag]).tolist()
                          for s in slots],
            })
        return {"degree": self.degree, "terms": terms}

    @classmethod
    def from_dict(cls, d: dict, lattice) -> "HochschildChain":
        terms = []
        for term in d["terms"]:
            c = complex(term["coeff"][0], term["coeff"][1])
            slots = tuple(
                AlgebraElement(lattice, np.asarray(s[0]) + 1j * np.asarray(s[1]))
                for s in term["slots"])
            terms.append((c, slots))
        return cls(d["degree"], terms)

    def __add__(self, other: "HochschildChain") -> "HochschildChain":
        if other.degree != self.degree:
            raise ValueError("degree mismatch")
        return HochschildChain(self.degree, self.terms + other.terms)

    def __mul__(self, scalar) -> "HochschildChain":
        return HochschildChain(self.degree,
                               [(c * scalar, s) for c, s in self.terms])

    __rmul__ = __mul__


def _close(a: np.ndarray, b: np.ndarray, tol: float = 1e-12) -> bool:
    scale = max(np.abs(a).max(), np.abs(b).max(), 1.0)
    return np.abs(a - b).max() <= tol * scale


def boundary(c: HochschildChain) -> HochschildChain:
    """Hochschild boundary b, with the cyclic last-to-first term."""
    k = c.degree
    if k == 0:
        return HochschildChain(0, [])
    out = []
    for coeff, slots in c.terms:
        for j in range(k):
            contracted = slots[:j] + (slots[j] * slots[j + 1],) + slots[j + 2:]
            out.append((coeff * (-1) ** j, contracted))
        wrapped = (slots[-1] * slots[0],) + slots[1:-1]
        out.append((coeff * (-1) ** k, wrapped))
    return HochschildChain(k - 1, out).canonical()


def antisymmetrize(c: HochschildChain) -> HochschildChain:
    """Average over signed permutations of the slots 1..k (slot 0 fixed)."""
    import math
    k = c.degree
    out = []
    norm = 1.0 / math.factorial(k)
    for coeff, slots in c.terms:
        for perm in permutations(range(1, k + 1)):
            sign = _perm_sign(perm)
            out.append((coeff * sign * norm,
                        (slots[0],) + tuple(slots[i] for i in perm)))
    return HochschildChain(k, out).canonical()


def _perm_sign(perm) -> int:
    sign = 1
    p = list(perm)
    for i in range(len(p)):
        for j in range(i + 1, len(p)):
            if p[i] > p[j]:
                sign = -sign
    return sign


def antisymmetry_defect(c: HochschildChain) -> float:
    """Coefficient-level distance between c and its antisymmetrization,
    relative to the chain scale."""
    diff = (c + (-1.0) * antisymmetrize(c)).canonical()
    s = c.scale()
    return diff.scale() / s if s > 0 else diff.scale()


def pi_d(c: HochschildChain, t) -> MatrixOperator:
    """Operator representation a0 [D, a1] ... [D, ak] summed over terms."""
    import scipy.sparse as sp
    n = t.hilbert_dim
    acc = sp.csr_matrix((n, n), dtype=complex)
    for coeff, slots in c.terms:
        term = slots[0].matrix(t.spinor_dim).mat
        for a in slots[1:]:
            term = term @ t.bracket(a).mat
        acc = acc + coeff * term
    return MatrixOperator(acc)


def orientability_check(t, c: HochschildChain | None = None, *,
                        cycle_tol: float = 1e-12, rep_tol: float = 1e-10,
                        depth: int | None = None) -> dict:
    """Is the chain a cycle, antisymmetric, and represented as the volume
    element (grading if present, identity otherwise) on the inner band?

    Returns named residuals plus ``ok``.
    """
    if c is None:
        c = t.cycle
    if c is None:
        raise ValueError("no orientation chain supplied or shipped")
    if depth is None:
        depth = c.degree + 1
    res = {}
    s = max(c.scale(), 1e-300)
    res["boundary"] = boundary(c).scale() / s
    res["antisymmetry"] = antisymmetry_defect(c)
    rep = pi_d(c, t)
    target = t.grading if t.grading is not None else MatrixOperator.identity(t.hilbert_dim)
    res["representation"] = t.inner_norm(rep - target, depth)
    res["ok"] = (res["boundary"] <= cycle_tol
                 and res["antisymmetry"] <= cycle_tol
                 and res["representation"] <= rep_tol)
    return res
