"""Riesz products of flat Walsh polynomials with positive partial sums.

The measure is the finite product

    Pi_k = (1 + X_1)(1 + X_2) ... (1 + X_k),
    X_i  = a_i * phi_(l_i)((r_j), j in J_i),   a_i = (1/2C) 2^(-l_i/2)

over pairwise disjoint, increasing coordinate blocks J_i, with C the
flatness constant 2 + sqrt2.  Each factor then has

    ||X_i||_2 = 1/2C,  ||X_i||_U < 1/2,
    ||X_i||_A = (1/2C) 2^(l_i/2),  ||X_i||_PM = (1/2C) 2^(-l_i/2).

A level l_(k+1) is admitted when

  (5)  (1/2C) 2^(-l_(k+1)/2) ||Pi_k||_A  <=  (1/4) inf Pi_k
  (6)  ||Pi_k||_A^2 * eps_bar((1/2C) 2^(-l_(k+1)/2))  <=  budget term k+1

where eps_bar is the monotone envelope of psi(x)/x^2.  Condition (5)
forces every partial sum whose order falls in stage k+1's range to stay
above (1/4) Pi_k pointwise, hence positivity; condition (6) caps the
stage contributions to sum_n psi(|c_n|).

Because disjoint blocks make all XOR index products distinct, the
spectrum of Pi_k stays sparse and every norm factors across stages.

Verification within `exhaustive_cap` used coordinates checks every
prefix order on every atom; partial sums only change at the (sparse)
support, so scanning support points is exhaustive in the order, not a
sample.  Past the cap the certificate degrades to a documented, seeded
subsample and says so.
"""

from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .rudin_shapiro import FLATNESS_CONSTANT, BlockSpec, build_flat, substitute_sparse
from .walsh import (
    InvariantViolation,
    WalshSeries,
    atom_patterns,
    butterfly,
    sign_vector,
)

__all__ = [
    "PsiHypothesisError",
    "LevelSelectionError",
    "BlockOverlapError",
    "CoordinateBudgetError",
    "PsiSpec",
    "SummabilityBudget",
    "Factor",
    "RieszProductState",
    "PositivityCertificate",
    "PsiSumReport",
    "empty_state",
    "choose_next_level",
    "add_factor",
    "build_measure",
    "state_series",
    "factor_values",
    "product_values",
    "verify_all_partial_sums",
    "psi_sum_report",
    "export_measure",
    "load_spectrum_csv",
    "state_manifest",
    "state_from_manifest",
    "thread_cap",
]


class PsiHypothesisError(ValueError):
    """psi fails the gauge hypothesis: psi(x)/x^2 must tend to 0 at 0."""


class LevelSelectionError(RuntimeError):
    """No admissible level within the cap."""


class BlockOverlapError(ValueError):
    """A factor block touches coordinates already in use."""


class CoordinateBudgetError(ValueError):
    """Adding the factor would exceed the hard coordinate budget."""


def thread_cap() -> int:
    """Worker cap for data-parallel sweeps, from WALSH_HELSON_THREADS."""
    raw = os.environ.get("WALSH_HELSON_THREADS", "")
    try:
        value = int(raw)
    except ValueError:
        return 1
    return max(1, value)


# ---------------------------------------------------------------------------
# the gauge psi and its monotone envelope
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PsiSpec:
    """An increasing gauge psi with the monotone envelope of psi(x)/x^2.

    `envelope_decays` records whether eps_bar(x) -> 0 as x -> 0 (known
    analytically for the presets, probed on the grid for tables); the
    product construction is only possible when it does.
    """

    descriptor: str
    psi: callable
    epsilon_bar: callable
    envelope_decays: bool

    def validate(self) -> "PsiSpec":
        if not self.envelope_decays:
            raise PsiHypothesisError(
                f"psi {self.descriptor!r} violates the hypothesis"
                " lim_(x->0) psi(x)/x^2 = 0: the envelope does not decay"
            )
        return self

    # -- presets ------------------------------------------------------------

    @classmethod
    def logpow(cls, p: float = 1.0) -> "PsiSpec":
        """psi(x) = x^2 / (1 + ln(1/x))^p on (0, 1], extended by x^2 (1 + ln x)^p."""
        if p < 1:
            raise ValueError("logpow preset needs p >= 1")

        def psi(x):
            x = float(x)
            if x <= 0.0:
                return 0.0
            if x >= 1.0:
                return x * x * (1.0 + math.log(x)) ** p
            return x * x / (1.0 + math.log(1.0 / x)) ** p

        def envelope(x):
            x = float(x)
            if x <= 0.0:
                return 0.0
            if x >= 1.0:
                return (1.0 + math.log(x)) ** p
            return 1.0 / (1.0 + math.log(1.0 / x)) ** p

        return cls(f"preset:logpow,p={p:g}", psi, envelope, True)

    @classmethod
    def power(cls, delta: float = 1.0) -> "PsiSpec":
        """psi(x) = x^(2 + delta); the envelope is x^delta."""
        if delta < 0:
            raise ValueError("power preset needs delta >= 0")

        def psi(x):
            x = float(x)
            return 0.0 if x <= 0.0 else x ** (2.0 + delta)

        def envelope(x):
            x = float(x)
            return 0.0 if x <= 0.0 else x ** delta

        return cls(f"preset:power,delta={delta:g}", psi, envelope, delta > 0)

    @classmethod
    def quadratic(cls) -> "PsiSpec":
        """psi(x) = x^2: envelope identically 1, hypothesis violated."""
        spec = cls.power(0.0)
        return cls("preset:quadratic", spec.psi, spec.epsilon_bar, False)

    @classmethod
    def from_table(cls, xs, ys, descriptor: str = "table") -> "PsiSpec":
        """Tabulated psi on an increasing sample grid.

        The envelope at x is the running sup of ys/xs^2 over samples <= x
        (clamped to the first sample below the grid); decay is probed by
        comparing the envelope at the grid ends.  Refine the grid for a
        sharper envelope.
        """
        xs = np.asarray(xs, dtype=np.float64)
        ys = np.asarray(ys, dtype=np.float64)
        if xs.ndim != 1 or xs.shape != ys.shape or xs.size < 2:
            raise ValueError("need matching 1-d sample arrays with >= 2 points")
        if np.any(xs <= 0) or np.any(np.diff(xs) <= 0):
            raise ValueError("sample grid must be positive and increasing")
        if np.any(ys < 0) or np.any(np.diff(ys) < 0):
            raise ValueError("psi samples must be nonnegative and nondecreasing")
        ratio = ys / (xs * xs)
        env = np.maximum.accumulate(ratio)

        def psi(x):
            x = float(x)
            if x <= 0.0:
                return 0.0
            return float(np.interp(x, xs, ys))

        def envelope(x):
            x = float(x)
            if x <= 0.0:
                return 0.0
            i = int(np.searchsorted(xs, x, side="right")) - 1
            return float(env[max(i, 0)])

        decays = env[0] <= 0.5 * env[-1]
        return cls(descriptor, psi, envelope, bool(decays))

    @classmethod
    def parse(cls, text: str) -> "PsiSpec":
        """Parse 'preset:name[,key=value...]' descriptors."""
        if not text.startswith("preset:"):
            raise ValueError(f"unknown psi descriptor {text!r}")
        body = text[len("preset:") :]
        parts = body.split(",")
        name, args = parts[0], parts[1:]
        kwargs = {}
        for item in args:
            key, _, value = item.partition("=")
            if not _:
                raise ValueError(f"bad psi parameter {item!r}")
            kwargs[key.strip()] = float(value)
        if name == "logpow":
            return cls.logpow(**kwargs)
        if name == "power":
            return cls.power(**kwargs)
        if name == "quadratic":
            if kwargs:
                raise ValueError("quadratic preset takes no parameters")
            return cls.quadratic()
        raise ValueError(f"unknown psi preset {name!r}")


@dataclass(frozen=True)
class SummabilityBudget:
    """Per-stage caps scale * 2^-k for the envelope terms of condition (6)."""

    scale: float = 1.0

    def term_bound(self, k: int) -> float:
        if k < 1:
            raise ValueError("stage index is 1-based")
        return self.scale * 2.0 ** (-k)

    def total(self, stages: int) -> float:
        return sum(self.term_bound(k) for k in range(1, stages + 1))


# ---------------------------------------------------------------------------
# product state
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Factor:
    """One factor X = amplitude * phi_level on the given block."""

    level: int
    block: tuple[int, ...]
    amplitude: float
    indices: np.ndarray
    coeffs: np.ndarray

    @property
    def norm_a(self) -> float:
        return float(np.sum(np.abs(self.coeffs)))

    @property
    def norm_2(self) -> float:
        return float(np.sqrt(np.sum(self.coeffs * self.coeffs)))


@dataclass(frozen=True)
class RieszProductState:
    """Sparse spectrum of Pi_k plus the caches the level rule needs."""

    factors: tuple[Factor, ...]
    spectrum: dict[int, float]
    norm_a: float
    inf_value: float
    inf_exact: bool
    used_coordinates: int
    exhaustive_cap: int = 14
    max_coordinates: int = 30

    @property
    def stages(self) -> int:
        return len(self.factors)

    def block_boundaries(self) -> list[int]:
        """Orders 2^(sup J_k) splitting the spectrum into stage ranges."""
        return [1 << f.block[-1] for f in self.factors]


def empty_state(exhaustive_cap: int = 14, max_coordinates: int = 30) -> RieszProductState:
    return RieszProductState(
        factors=(),
        spectrum={0: 1.0},
        norm_a=1.0,
        inf_value=1.0,
        inf_exact=True,
        used_coordinates=0,
        exhaustive_cap=exhaustive_cap,
        max_coordinates=max_coordinates,
    )


def factor_values(factor: Factor, m: int) -> np.ndarray:
    """X evaluated on all 2^m atoms (from its sparse spectrum)."""
    patterns = atom_patterns(m)
    out = np.zeros(patterns.size)
    for idx, c in zip(factor.indices, factor.coeffs):
        out += c * sign_vector(int(idx), patterns)
    return out


def product_values(factors, m: int) -> np.ndarray:
    """prod (1 + X_i) evaluated pointwise on all 2^m atoms.

    Works for any factor list, overlapping blocks included, because the
    product is taken pointwise, not through the XOR spectrum.
    """
    out = np.ones(1 << m)
    for f in factors:
        out *= 1.0 + factor_values(f, m)
    return out


def _factor_sup(factor: Factor) -> float:
    """Exact sup |X| via a full transform on the factor's own block atoms.

    The factor's spectrum lives on its block, so its indices remap
    injectively to block-relative positions; the value set is unchanged.
    """
    width = len(factor.block)
    rel = np.zeros(factor.indices.size, dtype=np.int64)
    for i, coord in enumerate(factor.block):
        rel |= ((factor.indices >> (coord - 1)) & 1) << i
    dense = np.zeros(1 << width)
    dense[rel] = factor.coeffs
    return float(np.max(np.abs(butterfly(dense))))


def make_factor(level: int, block: BlockSpec, c: float = FLATNESS_CONSTANT) -> Factor:
    amplitude = (0.5 / c) * 2.0 ** (-level / 2)
    flat = build_flat(level)
    idx, signs = substitute_sparse(flat, block)
    return Factor(
        level=level,
        block=block.coordinates,
        amplitude=amplitude,
        indices=idx,
        coeffs=amplitude * signs.astype(np.float64),
    )


def choose_next_level(
    state: RieszProductState,
    psi: PsiSpec,
    budget: SummabilityBudget,
    level_cap: int = 64,
    c: float = FLATNESS_CONSTANT,
) -> int:
    """Smallest level passing (5) and the budgeted envelope condition (6).

    Both left-hand sides decrease in the level, so the linear scan stops
    at the first admissible value.  inf Pi_k enters as a lower bound when
    the exact sweep was out of reach, which only makes (5) stricter.
    """
    k_next = state.stages + 1
    bound = budget.term_bound(k_next)
    for level in range(level_cap + 1):
        amp = (0.5 / c) * 2.0 ** (-level / 2)
        cond5 = amp * state.norm_a <= 0.25 * state.inf_value
        cond6 = state.norm_a**2 * psi.epsilon_bar(amp) <= bound
        if cond5 and cond6:
            return level
    raise LevelSelectionError(
        f"no admissible level <= {level_cap} for stage {k_next}"
        f" (psi {psi.descriptor!r}; slowly decaying envelopes force"
        " very large levels)"
    )


def add_factor(
    state: RieszProductState,
    level: int,
    block: BlockSpec | None = None,
    c: float = FLATNESS_CONSTANT,
) -> RieszProductState:
    """Append a factor on the next free coordinates (or an explicit block).

    The caller is responsible for level admissibility; structural rules
    are enforced here: the block must sit strictly to the right of all
    used coordinates, and the XOR products of the sparse spectra must not
    collide (they cannot, for disjoint blocks; asserted anyway).
    """
    if block is None:
        lo = state.used_coordinates + 1
        block = BlockSpec(tuple(range(lo, lo + level + 1)))
    if len(block) != level + 1:
        raise ValueError(f"block size {len(block)} != level + 1 = {level + 1}")
    if block.coordinates[0] <= state.used_coordinates:
        raise BlockOverlapError(
            f"block {block.coordinates} overlaps coordinates <= {state.used_coordinates}"
        )
    if block.sup > state.max_coordinates:
        raise CoordinateBudgetError(
            f"block {block.coordinates} exceeds the coordinate budget"
            f" {state.max_coordinates}"
        )

    factor = make_factor(level, block, c)
    merged, new_terms = _merge_spectrum(state.spectrum, factor)
    used = block.sup
    factors = state.factors + (factor,)

    if used <= state.exhaustive_cap:
        vals = product_values(factors, used)
        inf_value = float(vals.min())
        inf_exact = True
    else:
        inf_value = state.inf_value * (1.0 - _factor_sup(factor))
        inf_exact = False

    return RieszProductState(
        factors=factors,
        spectrum=merged,
        norm_a=state.norm_a * (1.0 + factor.norm_a),
        inf_value=inf_value,
        inf_exact=inf_exact,
        used_coordinates=used,
        exhaustive_cap=state.exhaustive_cap,
        max_coordinates=state.max_coordinates,
    )


def _merge_spectrum(spectrum: dict[int, float], factor: Factor):
    """Spectrum of Pi * (1 + X); the new stage terms are returned separately."""
    new_terms: dict[int, float] = {}
    for j, cj in spectrum.items():
        for s, xs in zip(factor.indices, factor.coeffs):
            new_terms[j ^ int(s)] = cj * float(xs)
    if len(new_terms) != len(spectrum) * factor.indices.size:
        raise InvariantViolation("XOR products collided within the stage")
    if set(new_terms) & set(spectrum):
        raise InvariantViolation("stage spectrum collides with existing indices")
    merged = dict(spectrum)
    merged.update(new_terms)
    return merged, new_terms


def build_measure(
    psi: PsiSpec,
    stages: int,
    budget: SummabilityBudget = SummabilityBudget(),
    exhaustive_cap: int = 14,
    max_coordinates: int = 30,
    level_cap: int = 64,
) -> RieszProductState:
    """Run the level rule for the requested number of stages."""
    psi.validate()
    state = empty_state(exhaustive_cap, max_coordinates)
    for _ in range(stages):
        level = choose_next_level(state, psi, budget, level_cap)
        state = add_factor(state, level)
    return state


def state_series(state: RieszProductState) -> WalshSeries:
    """Dense Walsh series of the current product (desk scale only)."""
    depth = max(state.used_coordinates, 0)
    if depth > 20:
        raise ValueError(f"refusing to densify a depth-{depth} spectrum")
    coeffs = np.zeros(1 << depth)
    for n, c in state.spectrum.items():
        coeffs[n] = c
    return WalshSeries(depth, coeffs)


# ---------------------------------------------------------------------------
# positivity certificate
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PositivityCertificate:
    """Minima of the partial sums of the product's series.

    `global_min` is over orders p >= 1 (the empty sum is 0 by
    definition).  `stage_margins[j]` is the pointwise minimum of
    S_p - (1/4) Pi_j over orders in stage j's range; the construction
    promises it stays nonnegative.  When `exhaustive` is false the sweep
    ran on the documented sample recorded in `sampling`.
    """

    exhaustive: bool
    depth: int
    support_size: int
    band_edges: tuple[int, ...]
    global_min: float
    stage_margins: tuple[float, ...]
    passed: bool
    sampling: dict | None = None


def _scan_support_quarter(sup_idx, sup_coeff, patterns, edges, order_total, quarter_refs):
    """Stream prefix sums over the support on the given atoms.

    The value after adding support index n covers every order in
    (n, next support index]; bands are the half-open ranges between
    consecutive edges (last one closed).  Returns the global minimum over
    orders >= 1 and, per band, the pointwise minimum of S - ref.
    """
    acc = np.zeros(patterns.size)
    gmin = math.inf
    margins = [math.inf] * (len(edges) - 1)

    def visit(lo, hi, values):
        nonlocal gmin
        low = float(np.min(values))
        if low < gmin:
            gmin = low
        for b in range(len(edges) - 1):
            b_hi = edges[b + 1]
            upper = b_hi if b == len(edges) - 2 else b_hi - 1
            if lo <= upper and hi >= edges[b]:
                margin = float(np.min(values - quarter_refs[b]))
                if margin < margins[b]:
                    margins[b] = margin

    first = int(sup_idx[0]) if len(sup_idx) else order_total
    if first >= 1:
        visit(1, first, np.zeros(patterns.size))
    for pos, (n, cval) in enumerate(zip(sup_idx, sup_coeff)):
        acc = acc + cval * sign_vector(int(n), patterns)
        lo = int(n) + 1
        hi = int(sup_idx[pos + 1]) if pos + 1 < len(sup_idx) else order_total
        visit(lo, hi, acc)
    return gmin, margins


def verify_all_partial_sums(
    state: RieszProductState,
    seed: int = 1729,
    sample_atoms: int = 4096,
) -> PositivityCertificate:
    """Certify S_p >= 0 and the stagewise S_p >= (1/4) Pi_j bound.

    Within the cap this is exhaustive over every order p <= 2^depth and
    every atom: partial sums are constant between support indices, so
    visiting the support visits every order.  Past the cap a seeded
    sample of atoms (plus the all-plus and all-minus patterns) is used
    instead; orders stay support-complete on those atoms, and the
    certificate is flagged non-exhaustive with the sample recorded.
    """
    if state.stages == 0:
        return PositivityCertificate(
            exhaustive=True,
            depth=0,
            support_size=1,
            band_edges=(1,),
            global_min=1.0,
            stage_margins=(),
            passed=True,
        )
    depth = state.used_coordinates
    order_total = 1 << depth
    sup_idx = np.array(sorted(state.spectrum), dtype=np.int64)
    sup_coeff = np.array([state.spectrum[int(n)] for n in sup_idx])
    edges = tuple([1] + state.block_boundaries())

    sampling = None
    if depth <= state.exhaustive_cap:
        patterns = atom_patterns(depth)
        exhaustive = True
    else:
        rng = np.random.default_rng(seed)
        count = min(sample_atoms, 1 << 16)
        draws = rng.integers(0, 1 << depth, size=count, dtype=np.uint64)
        special = np.array([0, (1 << depth) - 1], dtype=np.uint64)
        patterns = np.unique(np.concatenate([special, draws]))
        exhaustive = False
        sampling = {
            "seed": int(seed),
            "atoms": int(patterns.size),
            "orders": "support-complete (every distinct partial sum)",
        }

    workers = thread_cap()
    if workers > 1 and patterns.size >= 2 * workers:
        chunks = np.array_split(patterns, workers)
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(
                pool.map(
                    lambda ch: _scan_support_quarter(
                        sup_idx,
                        sup_coeff,
                        ch,
                        edges,
                        order_total,
                        [0.25 * _product_on(state.factors[:j], ch) for j in range(state.stages)],
                    ),
                    chunks,
                )
            )
        gmin = min(p[0] for p in parts)
        margins = [min(p[1][b] for p in parts) for b in range(state.stages)]
    else:
        quarter_refs = [
            0.25 * _product_on(state.factors[:j], patterns)
            for j in range(state.stages)
        ]
        gmin, margins = _scan_support_quarter(
            sup_idx, sup_coeff, patterns, edges, order_total, quarter_refs
        )

    passed = gmin >= 0.0 and all(m >= 0.0 for m in margins)
    return PositivityCertificate(
        exhaustive=exhaustive,
        depth=depth,
        support_size=int(sup_idx.size),
        band_edges=edges,
        global_min=float(gmin),
        stage_margins=tuple(float(m) for m in margins),
        passed=passed,
        sampling=sampling,
    )


def _product_on(factors, patterns: np.ndarray) -> np.ndarray:
    out = np.ones(patterns.size)
    for f in factors:
        vals = np.zeros(patterns.size)
        for idx, c in zip(f.indices, f.coeffs):
            vals += c * sign_vector(int(idx), patterns)
        out *= 1.0 + vals
    return out


# ---------------------------------------------------------------------------
# psi summability
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PsiSumReport:
    """Exact sum_n>=1 psi(|c_n|) against the stagewise envelope bounds.

    stage_bounds[k] = ||X_k||_2^2 ||Pi_(k-1)||_A^2 eps_bar(PM of stage k);
    ||X_k||_2 = 1/2C for construction factors, so this is the familiar
    (1/4C^2) ||Pi_(k-1)||_A^2 eps_bar(a_k).
    """

    stage_exact: tuple[float, ...]
    stage_bounds: tuple[float, ...]
    budget_terms: tuple[float, ...] | None
    exact_total: float
    bound_total: float
    c0_term: float
    ok: bool


def psi_sum_report(
    state: RieszProductState,
    psi: PsiSpec,
    budget: SummabilityBudget | None = None,
) -> PsiSumReport:
    spectrum: dict[int, float] = {0: 1.0}
    norm_a = 1.0
    pm = 1.0
    stage_exact = []
    stage_bounds = []
    for factor in state.factors:
        bound = (
            factor.norm_2**2
            * norm_a**2
            * psi.epsilon_bar(pm * factor.amplitude)
        )
        spectrum, new_terms = _merge_spectrum(spectrum, factor)
        exact = float(sum(psi.psi(abs(c)) for c in new_terms.values()))
        if exact > bound * (1.0 + 1e-12) + 1e-300:
            raise InvariantViolation(
                f"stage psi sum {exact} exceeds its bound {bound}"
            )
        stage_exact.append(exact)
        stage_bounds.append(float(bound))
        norm_a *= 1.0 + factor.norm_a
        pm = max(abs(c) for c in spectrum.values())
    budget_terms = None
    if budget is not None:
        budget_terms = tuple(
            budget.term_bound(k) for k in range(1, state.stages + 1)
        )
    exact_total = float(sum(stage_exact))
    bound_total = float(sum(stage_bounds))
    # equality is attainable (single-coefficient stages), so allow the
    # one-ulp slack float summation order can introduce
    return PsiSumReport(
        stage_exact=tuple(stage_exact),
        stage_bounds=tuple(stage_bounds),
        budget_terms=budget_terms,
        exact_total=exact_total,
        bound_total=bound_total,
        c0_term=float(psi.psi(abs(state.spectrum.get(0, 0.0)))),
        ok=exact_total <= bound_total * (1.0 + 1e-12),
    )


# ---------------------------------------------------------------------------
# export / import
# ---------------------------------------------------------------------------

def export_measure(state: RieszProductState, path) -> None:
    """Sparse spectrum as CSV `n,coeff`, ascending n, repr-formatted floats."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["n", "coeff"])
        for n in sorted(state.spectrum):
            writer.writerow([n, repr(float(state.spectrum[n]))])


def load_spectrum_csv(path) -> dict[int, float]:
    from .walsh import read_coeff_rows

    return {n: c for n, c in read_coeff_rows(path)}


def state_manifest(state: RieszProductState) -> dict:
    """The reproducible description of the product: constant plus stages."""
    return {
        "flatness_constant": FLATNESS_CONSTANT,
        "exhaustive_cap": state.exhaustive_cap,
        "max_coordinates": state.max_coordinates,
        "stages": [
            {
                "level": f.level,
                "block": list(f.block),
                "amplitude": f.amplitude,
            }
            for f in state.factors
        ],
    }


def state_from_manifest(data: dict) -> RieszProductState:
    state = empty_state(
        exhaustive_cap=int(data.get("exhaustive_cap", 14)),
        max_coordinates=int(data.get("max_coordinates", 30)),
    )
    for stage in data["stages"]:
        block = BlockSpec(tuple(int(j) for j in stage["block"]))
        state = add_factor(state, int(stage["level"]), block)
        rebuilt = state.factors[-1].amplitude
        if not math.isclose(rebuilt, float(stage["amplitude"]), rel_tol=1e-15):
            raise ValueError(
                f"amplitude mismatch rebuilding stage: {rebuilt} vs {stage['amplitude']}"
            )
    return state
