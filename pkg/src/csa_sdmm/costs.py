"""Uplink and downlink cost calculus in exact rational arithmetic.

Costs are normalized symbol counts: K_UL divides all uploaded symbols by
|A| + |B| = n(m + p), K_DL divides the downloaded symbols by |AB| = mp.  Only the
ratio x = m/p matters for K_UL.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

from .errors import InfeasibleSchemeError
from .schemes import SchemeSpec, recovery_threshold

Number = int | float | Fraction


def as_fraction(x: Number) -> Fraction:
    """Exact rational for ints and Fractions; floats go through their decimal repr."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    return Fraction(str(x))


def cost_dl(spec: SchemeSpec) -> Fraction:
    """Q observations of size |AB|/P each, normalized by |AB|: Q / P."""
    return Fraction(recovery_threshold(spec), spec.num_desired)


def cost_ul_branch(spec: SchemeSpec, m_over_p: Number, b: int) -> Fraction:
    """K_UL of the orientation ``b`` of ``spec``'s family."""
    x = as_fraction(m_over_p)
    if x <= 0:
        raise ValueError("m/p must be positive")
    N = spec.N
    if spec.kind == "SCSA":
        r = spec.r
        num = 1 + x * r if b == 1 else x + r
        return N * num / (1 + x)
    g, gb = spec.g, spec.gbar
    if spec.kind == "USCSA":
        ratio = Fraction(gb, g)
        num = 1 + x * ratio if b == 0 else ratio + x
        return N * num / (1 + x)
    f, q = spec.f, spec.q
    num = gb * f + x * Fraction(gb, q) if b == 0 else Fraction(gb, q) + x * gb * f
    return Fraction(N, f) * num / (1 + x)


def best_orientation(spec: SchemeSpec, m_over_p: Number) -> int:
    """Orientation with the lower uplink cost (first branch on ties)."""
    first = 1 if spec.kind == "SCSA" else 0
    a = cost_ul_branch(spec, m_over_p, first)
    c = cost_ul_branch(spec, m_over_p, 1 - first)
    return first if a <= c else 1 - first


def cost_ul(spec: SchemeSpec, m_over_p: Number) -> Fraction:
    """Minimum of the two orientation branches."""
    return min(cost_ul_branch(spec, m_over_p, b) for b in (0, 1))


def ul_lower_bound(N: int, ell: int) -> Fraction:
    """Converse bound N/(N - ell) on K_UL for any ell-secure scheme."""
    if ell < 0 or ell >= N:
        raise ValueError(f"need 0 <= ell < N, got ell={ell}, N={N}")
    return Fraction(N, N - ell)


@dataclass(frozen=True)
class GapBound:
    """Upper bounds on 1/K*_UL - 1/K_UL.

    Attributes:
        bound: the parameter-specific bound.
        coarse: the same bound with (g, gbar) replaced by (min, max) of (f, q).
        envelope: the bound maximized over all feasible parameters.
    """

    bound: Fraction
    coarse: Fraction
    envelope: Fraction


def gap_bound(kind: str, N: int, ell: int, f: int, q: int, g: int) -> GapBound:
    kind = kind.upper()
    spec = SchemeSpec(kind, N, ell, 0, f, q, g)
    gb = spec.gbar
    u, lo = max(f, q), min(f, q)
    base = 1 - Fraction(ell, N)
    if kind == "USCSA":
        bound = base - Fraction(2) / (N * (1 + Fraction(gb, g)))
        coarse = base - Fraction(2) / (N * (1 + Fraction(u, lo)))
    elif kind == "GSCSA":
        bound = base - Fraction(2) / (N * (gb + Fraction(1, g)))
        coarse = base - Fraction(2) / (N * (u + Fraction(1, lo)))
    else:
        raise ValueError("gap bounds exist for USCSA and GSCSA only")
    return GapBound(bound, coarse, gap_envelope(N, ell))


def gap_envelope(N: int, ell: int) -> Fraction:
    return 1 - Fraction(ell, N) - Fraction(2, N * (N - 2 * ell + 1))


GSCSA_BETTER = "GSCSA-better"
USCSA_BETTER = "USCSA-better"


def regime_compare(f: int, q: int, m_over_p: Number) -> str:
    """Which of GSCSA(f,q,g) and USCSA(f,q,g) has the lower uplink cost.

    GSCSA wins on (0, 1/u] and (u, inf), USCSA on (1/u, u], u = max(f, q).
    Both costs coincide at the two boundaries, so the closed side is reported.
    """
    if min(f, q) <= 1:
        raise ValueError("the regime statement needs both factors above 1")
    x = as_fraction(m_over_p)
    if x <= 0:
        raise ValueError("m/p must be positive")
    u = max(f, q)
    return USCSA_BETTER if Fraction(1, u) < x <= u else GSCSA_BETTER


@dataclass(frozen=True)
class CostReport:
    scheme: SchemeSpec
    m_over_p: Fraction
    k_ul: Fraction
    k_dl: Fraction
    q: int
    ul_lower_bound: Fraction
    b_ul: int
    gap: GapBound | None = None

    @property
    def inv_kul(self) -> Fraction:
        return 1 / self.k_ul

    @property
    def inv_kdl(self) -> Fraction:
        return 1 / self.k_dl

    def as_dict(self) -> dict:
        d = {
            "scheme": self.scheme.label,
            "m_over_p": float(self.m_over_p),
            "k_ul": float(self.k_ul),
            "k_dl": float(self.k_dl),
            "inv_kul": float(self.inv_kul),
            "inv_kdl": float(self.inv_kdl),
            "q_threshold": self.q,
            "ul_lower_bound": float(self.ul_lower_bound),
            "best_b": self.b_ul,
        }
        if self.gap is not None:
            d["gap_bound"] = float(self.gap.bound)
            d["gap_envelope"] = float(self.gap.envelope)
        return d


def cost_report(spec: SchemeSpec, m_over_p: Number) -> CostReport:
    x = as_fraction(m_over_p)
    gap = None
    if spec.kind != "SCSA":
        gap = gap_bound(spec.kind, spec.N, spec.ell, spec.f, spec.q, spec.g)
    return CostReport(spec, x, cost_ul(spec, x), cost_dl(spec), recovery_threshold(spec),
                      ul_lower_bound(spec.N, spec.ell), best_orientation(spec, x), gap)


# -- tradeoff sweep -------------------------------------------------------------------


@dataclass(frozen=True)
class TradeoffPoint:
    scheme: str
    f: int | None
    q: int | None
    g: int | None
    b: int
    inv_kul: Fraction
    inv_kdl: Fraction
    q_threshold: int


def feasible_parameters(N: int, ell: int) -> list[tuple[int, int, int]]:
    """Every (f, q, g) with g in {f, q} and fq + g + 2*ell - 1 <= N."""
    out = []
    budget = N - 2 * ell + 1
    for f in range(1, budget + 1):
        for q in range(1, budget // f + 1):
            for g in sorted({f, q}):
                if f * q + g <= budget:
                    out.append((f, q, g))
    return out


def _dominated(a: TradeoffPoint, b: TradeoffPoint) -> bool:
    return (b.inv_kul >= a.inv_kul and b.inv_kdl >= a.inv_kdl
            and (b.inv_kul > a.inv_kul or b.inv_kdl > a.inv_kdl))


def tradeoff_sweep(N: int, ell: int, m_over_p: Number, frontier_only: bool = False) -> list[TradeoffPoint]:
    """Reciprocal (UL, DL) cost pairs of SCSA and every feasible USCSA/GSCSA.

    Raises:
        InfeasibleSchemeError: if N <= 2*ell.
        AssertionError: if any point violates the uplink converse (cannot happen).
    """
    if N <= 2 * ell:
        raise InfeasibleSchemeError(f"need N > 2*ell, got N={N}, ell={ell}")
    x = as_fraction(m_over_p)
    bound = 1 / ul_lower_bound(N, ell)
    points = []
    scsa = SchemeSpec.scsa(N, ell)
    b = best_orientation(scsa, x)
    points.append(TradeoffPoint("SCSA", None, None, None, b, 1 / cost_ul(scsa, x), 1 / cost_dl(scsa), scsa.Q))
    for kind in ("USCSA", "GSCSA"):
        for f, q, g in feasible_parameters(N, ell):
            spec = SchemeSpec(kind, N, ell, 0, f, q, g)
            b = best_orientation(spec, x)
            points.append(TradeoffPoint(kind, f, q, g, b, 1 / cost_ul(spec, x), 1 / cost_dl(spec), spec.Q))
    for pt in points:
        assert pt.inv_kul <= bound, f"converse violated by {pt}"
    if frontier_only:
        points = [a for a in points if not any(_dominated(a, c) for c in points)]
    return points


TRADEOFF_HEADER = ["scheme", "f", "q", "g", "b", "inv_kul", "inv_kdl", "q_threshold"]


def _blank(v):
    return "" if v is None else v


def tradeoff_csv(points: Iterable[TradeoffPoint], N: int, ell: int, comment: str | None = None) -> str:
    """CSV text with one row per point and a closing BOUND row at (N - ell)/N."""
    buf = io.StringIO()
    if comment:
        buf.write(f"# {comment}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TRADEOFF_HEADER)
    for pt in points:
        w.writerow([pt.scheme, _blank(pt.f), _blank(pt.q), _blank(pt.g), pt.b,
                    f"{float(pt.inv_kul):.10g}", f"{float(pt.inv_kdl):.10g}", pt.q_threshold])
    bound = float(1 / ul_lower_bound(N, ell))
    w.writerow(["BOUND", "", "", "", "", f"{bound:.10g}", f"{bound:.10g}", ""])
    return buf.getvalue()


# -- payload consistency ------------------------------------------------------------


def ul_ratio_from_symbols(symbols: int, m: int, n: int, p: int) -> Fraction:
    return Fraction(symbols, n * (m + p))


def dl_ratio_from_symbols(symbols: int, m: int, p: int) -> Fraction:
    return Fraction(symbols, m * p)


def ul_ratio_from_shares(shares: Sequence, m: int, n: int, p: int) -> Fraction:
    """Uploaded symbols of concrete shares over n(m + p)."""
    return ul_ratio_from_symbols(sum(s.symbols for s in shares), m, n, p)
