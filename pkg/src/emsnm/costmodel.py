"""Closed-form management cost model.

All arithmetic is exact (ints and Fractions). Symbols:

* ``f[h][j]``: link-cost sum from mother ``h`` to its ``j``-th child domain;
  ``L = len(f)``, and mother ``h`` has ``M_h = len(f[h])`` children.
* ``k0``: per-device link coefficients from each EMS host to its devices,
  one list per child domain in ``f`` order, or a single list applied to every
  domain (the uniform-domain reading that multiplies by ``M * L``).
* ``rq``, ``kq``: node count and uniform link coefficient of each
  flat-bed domain.

Setup:      C_SETUP  = C_MSNLM + C_EMS
            C_MSNLM  = sum_h sum_j F_hj * MA_size
            C_EMS    = sum_domains sum_i K0_i * (S_req + S_res)
Polling:    CQ       = MDA_size * (RQ + 1) * KQ
            flat     = sum_h sum_j F_hj * MA_res + sum_Q CQ
            hybrid   = sum_h sum_j F_hj * MA_res
Total:      C_TOTAL  = C_SETUP + C_MGMTTR  (or C_MGMTTR alone when setup is amortised)

Index convention ``"per_child"`` (default) gives every child one F term in
both setup and polling sums. ``"strict"`` follows the literal summation
bounds: the setup sum skips each mother's first child (j = 1..M-1) while the
polling sum covers all of them (j = 0..M-1).
"""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass, field, fields, replace
from fractions import Fraction
from typing import Literal

from emsnm._format import fmt_number
from emsnm.errors import DimensionMismatch
from emsnm.topology import as_fraction

Convention = Literal["per_child", "strict"]
SIZE_FIELDS = ("ma_size", "mda_size", "ma_res", "s_req", "s_res")


def _fr_matrix(rows) -> tuple[tuple[Fraction, ...], ...]:
    return tuple(tuple(as_fraction(x) for x in row) for row in rows)


@dataclass(frozen=True)
class CostParams:
    ma_size: Fraction = Fraction(5000)
    mda_size: Fraction = Fraction(2000)
    ma_res: Fraction = Fraction(200)
    s_req: Fraction = Fraction(100)
    s_res: Fraction = Fraction(100)
    f: tuple[tuple[Fraction, ...], ...] = ()
    k0: tuple[tuple[Fraction, ...], ...] = ()
    rq: tuple[int, ...] | None = None
    kq: tuple[Fraction, ...] | None = None
    convention: Convention = "per_child"

    def __post_init__(self) -> None:
        for name in SIZE_FIELDS:
            value = as_fraction(getattr(self, name))
            if value <= 0:
                raise ValueError(f"{name} must be > 0, got {value}")
            object.__setattr__(self, name, value)
        object.__setattr__(self, "f", _fr_matrix(self.f))
        object.__setattr__(self, "k0", _fr_matrix(self.k0))
        if self.rq is not None:
            object.__setattr__(self, "rq", tuple(int(r) for r in self.rq))
        if self.kq is not None:
            object.__setattr__(self, "kq", tuple(as_fraction(k) for k in self.kq))
        coeffs = [c for row in self.f for c in row] + [c for row in self.k0 for c in row] + list(self.kq or ())
        if any(c < 0 for c in coeffs):
            raise ValueError("link coefficients must be >= 0")
        if any(r < 0 for r in self.rq or ()):
            raise ValueError("RQ must be >= 0")
        if self.convention not in ("per_child", "strict"):
            raise ValueError(f"unknown index convention {self.convention!r}")

    @property
    def L(self) -> int:
        return len(self.f)

    @property
    def M(self) -> tuple[int, ...]:
        return tuple(len(row) for row in self.f)

    @property
    def child_count(self) -> int:
        return sum(self.M)

    def scaled(self, factor) -> CostParams:
        """Same parameters with every size multiplied by ``factor``."""
        factor = as_fraction(factor)
        return replace(self, **{name: getattr(self, name) * factor for name in SIZE_FIELDS})


@dataclass(frozen=True)
class CostBreakdown:
    strategy: str
    include_setup: bool
    c_msnlm: Fraction
    c_ems: Fraction
    c_setup: Fraction
    c_mgmttr_flat: Fraction | None
    c_mgmttr_hybrid: Fraction
    c_mgmttr: Fraction
    c_total: Fraction
    per_domain_cq: tuple[Fraction, ...] = ()
    c_sync: Fraction | None = field(default=None)

    def to_record(self) -> dict[str, str]:
        """Flat key -> value mapping; list fields are ``;``-joined."""
        out = {}
        for f in fields(self):
            value = getattr(self, f.name)
            if isinstance(value, tuple):
                out[f.name] = ";".join(fmt_number(v) for v in value)
            else:
                out[f.name] = fmt_number(value)
        return out


def _setup_terms(row: Sequence[Fraction], convention: Convention) -> Sequence[Fraction]:
    return row[1:] if convention == "strict" else row


def c_msnlm(params: CostParams) -> Fraction:
    """Cost of dispatching the child managers: sum of F_hj * MA_size."""
    return sum(
        (F * params.ma_size for row in params.f for F in _setup_terms(row, params.convention)),
        Fraction(0),
    )


def c_ems(params: CostParams) -> Fraction:
    """Cost of EMS discovery: one request/response per device, per domain.

    Raises:
        DimensionMismatch: ``k0`` is neither one list nor one list per child domain.
    """
    exchange = params.s_req + params.s_res
    if not params.k0:
        return Fraction(0)
    if len(params.k0) == 1:
        if len(set(params.M)) > 1:
            raise DimensionMismatch("a single k0 list needs the same child count under every mother")
        m = params.M[0] if params.M else 0
        return sum((k * exchange for k in params.k0[0]), Fraction(0)) * m * params.L
    if len(params.k0) != params.child_count:
        raise DimensionMismatch(f"k0 has {len(params.k0)} domain lists for {params.child_count} child domains")
    return sum((k * exchange for row in params.k0 for k in row), Fraction(0))


def c_setup(params: CostParams) -> Fraction:
    return c_msnlm(params) + c_ems(params)


def cq_flatbed(mda_size, rq: int, kq) -> Fraction:
    """Flat-bed cost of one domain: ``mda_size * (rq + 1) * kq``."""
    if rq < 0:
        raise ValueError("rq must be >= 0")
    kq = as_fraction(kq)
    if kq < 0:
        raise ValueError("kq must be >= 0")
    return as_fraction(mda_size) * (rq + 1) * kq


def _report_term(params: CostParams) -> Fraction:
    # both conventions cover j = 0..M-1 here
    return sum((F * params.ma_res for row in params.f for F in row), Fraction(0))


def per_domain_cq(params: CostParams) -> tuple[Fraction, ...]:
    if params.rq is None or params.kq is None:
        raise DimensionMismatch("flat-bed cost needs per-domain rq and kq")
    if len(params.rq) != len(params.kq):
        raise DimensionMismatch(f"{len(params.rq)} rq values but {len(params.kq)} kq values")
    return tuple(cq_flatbed(params.mda_size, r, k) for r, k in zip(params.rq, params.kq))


def c_mgmttr_flat(params: CostParams) -> Fraction:
    """Child reports plus one flat-bed tour per domain."""
    return _report_term(params) + sum(per_domain_cq(params), Fraction(0))


def c_mgmttr_hybrid(params: CostParams) -> Fraction:
    """Child reports only; each domain is answered from its local store."""
    return _report_term(params)


def c_total(params: CostParams, strategy: str = "hybrid", include_setup: bool = True) -> CostBreakdown:
    """Full breakdown for ``strategy`` in {"flat", "hybrid"}.

    With ``include_setup`` off the one-time setup cost is left out and
    ``c_total == c_mgmttr``. The flat-bed term is filled in whenever rq/kq are
    available, even for the hybrid strategy, so both can be compared.
    """
    if strategy in ("flat", "flatbed"):
        strategy = "flat"
    elif strategy != "hybrid":
        raise ValueError(f"unknown strategy {strategy!r}")
    msnlm, ems = c_msnlm(params), c_ems(params)
    setup = msnlm + ems
    hybrid = c_mgmttr_hybrid(params)
    if strategy == "flat" or (params.rq is not None and params.kq is not None):
        cqs = per_domain_cq(params)
        flat = hybrid + sum(cqs, Fraction(0))
    else:
        cqs, flat = (), None
    mgmt = flat if strategy == "flat" else hybrid
    return CostBreakdown(
        strategy=strategy,
        include_setup=include_setup,
        c_msnlm=msnlm,
        c_ems=ems,
        c_setup=setup,
        c_mgmttr_flat=flat,
        c_mgmttr_hybrid=hybrid,
        c_mgmttr=mgmt,
        c_total=setup + mgmt if include_setup else mgmt,
        per_domain_cq=cqs,
    )
