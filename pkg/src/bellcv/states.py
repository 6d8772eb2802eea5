"""Few-photon multimode states on the {0, 1} occupation space.

Pure states are sums of basis products; density operators are stored as
sums of *product operators*: each term is a complex weight times a tensor
product of per-mode 2x2 matrices.  A basis outer product ``|k><b|`` is the
special case where every factor is a matrix unit.  Per-mode channels
(loss, dephasing) act factor by factor, so the term count never grows with
the mode count.
"""

from __future__ import annotations

import itertools
import json
import logging
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

logger = logging.getLogger(__name__)

NORM_TOL = 1e-12


def basis_product(occupations: Iterable[int], modes: int | None = None) -> tuple[int, ...]:
    """Validate an occupation vector and return it as a tuple of 0/1 ints."""
    occ = tuple(int(v) for v in occupations)
    if not occ:
        raise ValueError("a basis product needs at least one mode")
    if any(v not in (0, 1) for v in occ):
        raise ValueError(f"occupations must be 0 or 1, got {occ}")
    if modes is not None and len(occ) != modes:
        raise ValueError(f"expected {modes} modes, got {len(occ)}")
    return occ


@dataclass(frozen=True)
class PureState:
    """Normalized superposition of distinct basis products."""

    terms: tuple[tuple[complex, tuple[int, ...]], ...]
    mode_count: int

    @classmethod
    def from_terms(cls, terms: Iterable[tuple[complex, Sequence[int]]],
                   normalize: bool = True) -> "PureState":
        merged: dict[tuple[int, ...], complex] = {}
        modes = None
        for amp, occ in terms:
            occ = basis_product(occ, modes)
            modes = len(occ)
            merged[occ] = merged.get(occ, 0j) + complex(amp)
        if modes is None:
            raise ValueError("empty state")
        items = [(a, occ) for occ, a in merged.items() if a != 0]
        norm = math.sqrt(sum(abs(a) ** 2 for a, _ in items))
        if norm == 0:
            raise ValueError("state has zero norm")
        if abs(norm - 1) > NORM_TOL:
            if not normalize:
                raise ValueError(f"state norm is {norm}, not 1")
            logger.warning("renormalizing state with norm %.15g", norm)
            items = [(a / norm, occ) for a, occ in items]
        return cls(tuple(items), modes)

    def amplitude(self, occ: Sequence[int]) -> complex:
        occ = tuple(occ)
        for a, o in self.terms:
            if o == occ:
                return a
        return 0j

    def permute(self, order: Sequence[int]) -> "PureState":
        """Relabel modes: new mode ``i`` is old mode ``order[i]``."""
        return PureState.from_terms(
            [(a, tuple(o[j] for j in order)) for a, o in self.terms])

    def to_json(self) -> dict:
        return {
            "modes": self.mode_count,
            "terms": [{"amp": [a.real, a.imag], "occ": list(o)} for a, o in self.terms],
        }

    @classmethod
    def from_json(cls, doc: dict) -> "PureState":
        try:
            modes = int(doc["modes"])
            terms = [(complex(*t["amp"]), t["occ"]) for t in doc["terms"]]
        except (KeyError, TypeError) as exc:
            raise ValueError(f"malformed state document: {exc}") from exc
        state = cls.from_terms(terms)
        if state.mode_count != modes:
            raise ValueError(f"declared {modes} modes but terms have {state.mode_count}")
        return state


def load_state(path) -> PureState:
    with open(path) as fh:
        return PureState.from_json(json.load(fh))


def make_ghz(N: int, r: int, c1: complex = 1 / math.sqrt(2),
             c2: complex = 1 / math.sqrt(2)) -> PureState:
    """``c1|0..0 1..1> + c2|1..1 0..0>`` with ``r`` leading modes flipped."""
    if N < 1:
        raise ValueError("N must be at least 1")
    if not 0 <= r <= N:
        raise ValueError(f"r must lie in [0, {N}], got {r}")
    if c1 == 0 and c2 == 0:
        raise ValueError("c1 and c2 cannot both vanish")
    first = (0,) * r + (1,) * (N - r)
    second = (1,) * r + (0,) * (N - r)
    return PureState.from_terms([(c1, first), (c2, second)])


def _photon_modes(pol: str) -> tuple[int, int]:
    # |H> = |1>_H |0>_V, |V> = |0>_H |1>_V
    return (1, 0) if pol == "H" else (0, 1)


def _polarization_term(pols: str) -> tuple[int, ...]:
    return tuple(itertools.chain.from_iterable(_photon_modes(p) for p in pols))


def make_named_state(kind: str, N: int | None = None) -> PureState:
    """Named states: ``cluster4``, ``cluster4_merged``, ``w4``,
    ``extended_cluster`` (``N`` photons in ``2N`` modes) and
    ``extended_superposition`` (``N`` modes).
    """
    h = 0.5
    if kind == "cluster4":
        return PureState.from_terms([
            (h, (1, 1, 1, 1)), (h, (1, 1, 0, 0)), (h, (0, 0, 1, 1)), (-h, (0, 0, 0, 0))])
    if kind == "cluster4_merged":
        # |1100> listed twice; the copies merge before normalization
        return PureState.from_terms([
            (h, (1, 1, 1, 1)), (h, (1, 1, 0, 0)), (h, (1, 1, 0, 0)), (-h, (0, 0, 0, 0))])
    if kind == "w4":
        return PureState.from_terms([
            (h, (1, 0, 0, 0)), (h, (0, 1, 0, 0)), (h, (0, 0, 1, 0)), (h, (0, 0, 0, 1))])
    if kind in ("extended_cluster", "extended_superposition"):
        if N is None or N < 2 or N % 2:
            raise ValueError(f"{kind} needs an even N >= 2, got {N}")
        half = N // 2
        if kind == "extended_cluster":
            pols = ["H" * N, "H" * half + "V" * half, "V" * half + "H" * half, "V" * N]
            occs = [_polarization_term(p) for p in pols]
        else:
            occs = [(1,) * N, (0,) * half + (1,) * half, (1,) * half + (0,) * half, (0,) * N]
        return PureState.from_terms(list(zip((h, h, h, -h), occs)))
    raise ValueError(f"unknown state kind {kind!r}")


def parse_state(text: str) -> PureState:
    """Parse the CLI state grammar.

    ``ghz:N,r`` or ``ghz:N,r,c1,c2``; ``cluster4``; ``w4``;
    ``extcluster:N``; ``extsup:N``; ``product:0110``.
    """
    name, _, args = text.partition(":")
    name = name.strip().lower()
    vals = [a.strip() for a in args.split(",")] if args else []
    try:
        if name == "ghz":
            if len(vals) == 2:
                return make_ghz(int(vals[0]), int(vals[1]))
            if len(vals) == 4:
                return make_ghz(int(vals[0]), int(vals[1]), complex(vals[2]), complex(vals[3]))
            raise ValueError("ghz takes N,r or N,r,c1,c2")
        if name in ("cluster4", "cluster4_merged", "w4") and not vals:
            return make_named_state(name)
        if name in ("extcluster", "extended_cluster") and len(vals) == 1:
            return make_named_state("extended_cluster", int(vals[0]))
        if name in ("extsup", "extended_superposition") and len(vals) == 1:
            return make_named_state("extended_superposition", int(vals[0]))
        if name == "product" and len(vals) == 1:
            return PureState.from_terms([(1.0, [int(c) for c in vals[0]])])
    except ValueError as exc:
        raise ValueError(f"bad state {text!r}: {exc}") from exc
    raise ValueError(f"unknown state {text!r}")


# -- density operators -------------------------------------------------------

_UNIT = np.zeros((2, 2, 2, 2))
for _k in range(2):
    for _b in range(2):
        _UNIT[_k, _b, _k, _b] = 1.0


@dataclass(frozen=True, eq=False)
class DensityOperator:
    """Sum of weighted product operators on ``mode_count`` modes.

    ``factors[t, n, k, b]`` is the coefficient of ``|k><b|`` on mode ``n`` in
    term ``t``; the operator is ``sum_t weights[t] * kron_n factors[t, n]``.
    """

    weights: np.ndarray
    factors: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=complex).reshape(-1)
        f = np.asarray(self.factors, dtype=complex)
        if f.ndim != 4 or f.shape[2:] != (2, 2) or f.shape[0] != w.shape[0]:
            raise ValueError(f"bad factor shape {f.shape} for {w.shape[0]} weights")
        w.setflags(write=False)
        f.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "factors", f)

    @property
    def mode_count(self) -> int:
        return self.factors.shape[1]

    @property
    def n_terms(self) -> int:
        return self.weights.shape[0]

    @classmethod
    def from_basis_terms(cls, terms: Iterable[tuple[Sequence[int], Sequence[int], complex]]
                         ) -> "DensityOperator":
        """Build from ``(bra, ket, weight)`` triples meaning ``weight |ket><bra|``."""
        ws, fs = [], []
        for bra, ket, w in terms:
            bra, ket = basis_product(bra), basis_product(ket)
            if len(bra) != len(ket):
                raise ValueError("bra and ket differ in length")
            ws.append(w)
            fs.append(_UNIT[list(ket), list(bra)])
        if not ws:
            raise ValueError("no terms")
        return cls(np.array(ws), np.array(fs)).merged()

    @classmethod
    def product(cls, blocks: Sequence[np.ndarray]) -> "DensityOperator":
        """Single-term product operator ``kron(blocks)``."""
        f = np.asarray(blocks, dtype=complex)[None]
        return cls(np.ones(1), f)

    def merged(self, tol: float = 0.0) -> "DensityOperator":
        """Combine terms with identical factors and drop zero weights."""
        acc: dict[bytes, list] = {}
        for w, f in zip(self.weights, self.factors):
            key = f.tobytes()
            if key in acc:
                acc[key][0] += w
            else:
                acc[key] = [w, f]
        keep = [(w, f) for w, f in acc.values() if abs(w) > tol]
        if not keep:
            n = self.mode_count
            return DensityOperator(np.zeros(1), np.zeros((1, n, 2, 2)))
        return DensityOperator(np.array([w for w, _ in keep]), np.array([f for _, f in keep]))

    def trace(self) -> complex:
        tr = np.einsum("tnkk->tn", self.factors)
        return complex(np.sum(self.weights * np.prod(tr, axis=1)))

    def diagonal_part(self) -> "DensityOperator":
        f = self.factors * np.eye(2)
        return DensityOperator(self.weights, f)

    def adjoint(self) -> "DensityOperator":
        return DensityOperator(self.weights.conj(), np.conj(np.swapaxes(self.factors, 2, 3)))

    def __add__(self, other: "DensityOperator") -> "DensityOperator":
        if other.mode_count != self.mode_count:
            raise ValueError("mode-count mismatch")
        return DensityOperator(np.concatenate([self.weights, other.weights]),
                               np.concatenate([self.factors, other.factors]))

    def scaled(self, c: complex) -> "DensityOperator":
        return DensityOperator(self.weights * c, self.factors)

    def tensor(self, other: "DensityOperator") -> "DensityOperator":
        """``self (x) other`` with ``other``'s modes appended."""
        ta, tb = self.n_terms, other.n_terms
        w = np.outer(self.weights, other.weights).reshape(-1)
        fa = np.repeat(self.factors, tb, axis=0)
        fb = np.tile(other.factors, (ta, 1, 1, 1))
        return DensityOperator(w, np.concatenate([fa, fb], axis=1))

    def basis_terms(self, tol: float = 1e-15) -> dict[tuple[tuple[int, ...], tuple[int, ...]], complex]:
        """Expand into ``{(bra, ket): weight}``; exponential in the mode count."""
        out: dict = {}
        n = self.mode_count
        for w, f in zip(self.weights, self.factors):
            per_mode = [[(k, b, f[m, k, b]) for k in range(2) for b in range(2) if f[m, k, b] != 0]
                        for m in range(n)]
            for combo in itertools.product(*per_mode):
                val = w
                for _, _, c in combo:
                    val = val * c
                key = (tuple(c[1] for c in combo), tuple(c[0] for c in combo))
                out[key] = out.get(key, 0j) + val
        return {k: v for k, v in out.items() if abs(v) > tol}

    def terms(self) -> list[tuple[tuple[int, ...], tuple[int, ...], complex]]:
        """``(bra, ket, weight)`` triples, sorted."""
        return sorted((b, k, w) for (b, k), w in self.basis_terms().items())

    def to_dense(self) -> np.ndarray:
        n = self.mode_count
        if n > 12:
            raise ValueError("dense form limited to 12 modes")
        out = np.zeros((2 ** n, 2 ** n), dtype=complex)
        for w, f in zip(self.weights, self.factors):
            m = np.ones((1, 1))
            for blk in f:
                m = np.kron(m, blk)
            out += w * m
        return out

    def allclose(self, other: "DensityOperator", atol: float = 1e-12) -> bool:
        if other.mode_count != self.mode_count:
            return False
        a, b = self.basis_terms(), other.basis_terms()
        return all(abs(a.get(k, 0) - b.get(k, 0)) <= atol for k in set(a) | set(b))

    def validate(self, tol: float = 1e-12) -> None:
        """Raise ``ValueError`` unless Hermitian, unit-trace and with non-negative diagonal."""
        tr = self.trace()
        if abs(tr - 1) > tol:
            raise ValueError(f"trace is {tr}, not 1")
        terms = self.basis_terms()
        for (bra, ket), w in terms.items():
            if abs(terms.get((ket, bra), 0) - np.conj(w)) > tol:
                raise ValueError(f"not Hermitian at bra={bra}, ket={ket}")
            if bra == ket and (abs(w.imag) > tol or w.real < -1e-14):
                raise ValueError(f"bad diagonal weight {w} at {ket}")


def to_density(state: PureState) -> DensityOperator:
    """``|psi><psi|`` as basis outer products."""
    return DensityOperator.from_basis_terms(
        (bra, ket, ai * np.conj(aj)) for ai, ket in state.terms for aj, bra in state.terms)


def vacuum(N: int) -> DensityOperator:
    return to_density(PureState.from_terms([(1.0, (0,) * N)]))
