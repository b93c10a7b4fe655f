"""Operators in ensemble (sum of weighted ket-bra pairs) form."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fockspace import FockSpace, SectorState


@dataclass(frozen=True, eq=False)
class KetBraOperator:
    """``sum_i coef_i |ket_i><bra_i|`` over the flattened vectors of ``space``.

    ``order`` tags each term with its power of the coupling so that
    perturbative truncation can drop terms term-by-term.
    """

    space: FockSpace
    coefs: np.ndarray
    kets: np.ndarray
    bras: np.ndarray
    order: np.ndarray

    @classmethod
    def from_terms(cls, space: FockSpace, terms) -> "KetBraOperator":
        """``terms`` is an iterable of ``(coef, ket, bra[, order])`` with states or vectors."""
        coefs, kets, bras, orders = [], [], [], []
        for term in terms:
            c, k, b = term[:3]
            kets.append(_vec(space, k))
            bras.append(_vec(space, b))
            coefs.append(complex(c))
            orders.append(int(term[3]) if len(term) > 3 else 0)
        if not coefs:
            return cls.zero(space)
        return cls(space, np.array(coefs), np.array(kets), np.array(bras), np.array(orders, dtype=int))

    @classmethod
    def zero(cls, space: FockSpace) -> "KetBraOperator":
        e = np.zeros((0, space.dim), dtype=complex)
        return cls(space, np.zeros(0, dtype=complex), e, e.copy(), np.zeros(0, dtype=int))

    @classmethod
    def projector(cls, state: SectorState, weight: float = 1.0) -> "KetBraOperator":
        return cls.from_terms(state.space, [(weight, state, state)])

    def __len__(self) -> int:
        return len(self.coefs)

    def dense(self) -> np.ndarray:
        return (self.kets.T * self.coefs) @ self.bras.conj()

    def apply(self, state: SectorState | np.ndarray):
        v = _vec(self.space, state)
        out = (self.kets.T * self.coefs) @ (self.bras.conj() @ v)
        return self.space.from_vector(out) if isinstance(state, SectorState) else out

    def sandwich(self, a, b) -> complex:
        """<a| op |b>."""
        va, vb = _vec(self.space, a), _vec(self.space, b)
        return complex(np.sum(self.coefs * (self.kets.conj() @ va).conj() * (self.bras.conj() @ vb)))

    def trace(self) -> complex:
        return complex(np.sum(self.coefs * np.einsum("ij,ij->i", self.bras.conj(), self.kets)))

    def adjoint(self) -> "KetBraOperator":
        return KetBraOperator(self.space, self.coefs.conj(), self.bras, self.kets, self.order)

    def truncate(self, max_order: int) -> "KetBraOperator":
        keep = self.order <= max_order
        return KetBraOperator(self.space, self.coefs[keep], self.kets[keep], self.bras[keep], self.order[keep])

    def simplify(self, atol: float = 0.0) -> "KetBraOperator":
        """Merge terms with identical ket, bra and order; drop vanishing coefficients."""
        merged: dict = {}
        for c, k, b, o in zip(self.coefs, self.kets, self.bras, self.order):
            key = (k.tobytes(), b.tobytes(), int(o))
            if key in merged:
                merged[key][0] += c
            else:
                merged[key] = [c, k, b, o]
        terms = [v for v in merged.values() if abs(v[0]) > atol]
        if not terms:
            return KetBraOperator.zero(self.space)
        c, k, b, o = zip(*terms)
        return KetBraOperator(self.space, np.array(c), np.array(k), np.array(b), np.array(o, dtype=int))

    def __add__(self, other: "KetBraOperator") -> "KetBraOperator":
        if not self.space.compatible(other.space):
            raise ValueError("operators are bound to different grids")
        return KetBraOperator(
            self.space,
            np.concatenate([self.coefs, other.coefs]),
            np.concatenate([self.kets, other.kets]),
            np.concatenate([self.bras, other.bras]),
            np.concatenate([self.order, other.order]),
        )

    def __mul__(self, c: complex) -> "KetBraOperator":
        return KetBraOperator(self.space, self.coefs * c, self.kets, self.bras, self.order)

    __rmul__ = __mul__

    def __sub__(self, other: "KetBraOperator") -> "KetBraOperator":
        return self + other * -1.0

    def map_vectors(self, fn, space: FockSpace | None = None) -> "KetBraOperator":
        """Apply a linear map ``fn`` (on states) to kets and bras: ``U op U^dagger``."""
        space = space or self.space
        kets = np.array([fn(self.space.from_vector(k)).vector() for k in self.kets]).reshape(-1, space.dim)
        bras = np.array([fn(self.space.from_vector(b)).vector() for b in self.bras]).reshape(-1, space.dim)
        return KetBraOperator(space, self.coefs, kets, bras, self.order)


@dataclass(frozen=True, eq=False)
class DensityOperator:
    """Weighted ensemble ``sum_i w_i |psi_i><psi_i|`` kept in ket-bra form."""

    op: KetBraOperator
    order_lambda_truncated: bool = False

    @property
    def space(self) -> FockSpace:
        return self.op.space

    @classmethod
    def ensemble(cls, members, truncate: bool = False) -> "DensityOperator":
        """``members`` are ``(weight, state)`` pairs; weights must be non-negative."""
        members = list(members)
        if not members:
            raise ValueError("empty ensemble")
        if any(w < 0 for w, _ in members):
            raise ValueError("ensemble weights must be non-negative")
        space = members[0][1].space
        return cls(KetBraOperator.from_terms(space, [(w, s, s) for w, s in members]), truncate)

    def dense(self) -> np.ndarray:
        return self.op.dense()

    def trace(self) -> float:
        return self.op.trace().real

    def expectation(self, state) -> complex:
        return self.op.sandwich(state, state)

    def __sub__(self, other: "DensityOperator") -> KetBraOperator:
        return self.op - other.op


def _vec(space: FockSpace, x) -> np.ndarray:
    if isinstance(x, SectorState):
        if not space.compatible(x.space):
            raise ValueError("state is bound to different grids")
        return x.vector()
    x = np.asarray(x, dtype=complex)
    if x.shape != (space.dim,):
        raise ValueError("vector does not match the space dimension")
    return x
