"""Relief allocation game and its projected Euler solvers.

The game: ``m`` relief organizations ship items to ``n`` demand locations.
Organization k shipping q_kl items to location l pays cost
``(a_kl q_kl + b_kl)^2``, gains monetized utility ``omega_k gamma_kl q_kl``,
and shares location visibility funds ``vis_l sqrt(sum_i q_il)`` in proportion
``beta_k``.  Supply caps ``sum_l q_kl <= s_k`` and common demand corridors
``d_lo_l <= sum_k q_kl <= d_hi_l`` couple the players; the equilibrium is the
minimizer of

    - sum_l P_l(q) - sum_kl (omega_k gamma_kl / beta_k) q_kl
    + sum_kl (1/beta_k) (a_kl q_kl + b_kl)^2

over the coupled feasible set.  The ``simplified`` variant drops the
visibility term, whose gradient is orders of magnitude below the rest.

Both solvers run the same diagonal-step fixed-point iteration with
projection on the nonnegative orthant and diminishing steps ``a_t``:

    q_kl   <- max(0, q_kl + a_t (omega_k gamma_kl / beta_k
                   - (2 a_kl^2 q_kl + 2 a_kl b_kl)/beta_k
                   - lam_k + lam1_l - lam2_l [+ visibility]))
    lam_k  <- max(0, lam_k + a_t (-s_k + sum_l q_kl))
    lam1_l <- max(0, lam1_l + a_t (-sum_k q_kl + d_lo_l))
    lam2_l <- max(0, lam2_l + a_t (-d_hi_l + sum_k q_kl))

all four families evaluated on the time-t state (Jacobi style).

The quantized solver mirrors, bit for bit, the integer arithmetic of the
generated membrane system at scale P = 10^p: values live as object counts,
division by the beta denominator rounds half-up, the step factor a_t is
realized as w floor-halvings followed by a half-up division by ten, and the
projection is pairwise cancellation with surplus deletion.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

SIMPLIFIED = "simplified"
FULL = "full"
QUANTIZED = "quantized"

#: Step denominator guard for the visibility derivative at sum_i q_il == 0;
#: the derivative is capped at vis_l/2 * VISIBILITY_FLOOR**-0.5.
VISIBILITY_FLOOR = 1e-6


def _exact(x) -> Fraction:
    """Decimal-exact fraction of a parameter (str() recovers the shortest
    decimal literal of a float, which is the intended value of JSON inputs)."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, (int, np.integer)):
        return Fraction(int(x))
    return Fraction(str(float(x)))


# ---------------------------------------------------------------------------
# Instance
# ---------------------------------------------------------------------------


@dataclass
class ReliefInstance:
    m: int
    n: int
    s: np.ndarray          # (m,) supply caps
    d_lo: np.ndarray       # (n,) lower demand bounds
    d_hi: np.ndarray       # (n,) upper demand bounds
    gamma: np.ndarray      # (m, n) utility factors
    omega: np.ndarray      # (m,) monetization weights
    beta: np.ndarray       # (m,) donation shares
    cost_a: np.ndarray     # (m, n) cost slope coefficients
    cost_b: np.ndarray     # (m, n) cost offset coefficients
    vis_k: np.ndarray      # (n,) visibility coefficients per location

    def __post_init__(self):
        self.s = np.asarray(self.s, dtype=float)
        self.d_lo = np.asarray(self.d_lo, dtype=float)
        self.d_hi = np.asarray(self.d_hi, dtype=float)
        self.gamma = np.asarray(self.gamma, dtype=float)
        self.omega = np.asarray(self.omega, dtype=float)
        self.beta = np.asarray(self.beta, dtype=float)
        self.cost_a = np.asarray(self.cost_a, dtype=float)
        self.cost_b = np.asarray(self.cost_b, dtype=float)
        self.vis_k = np.asarray(self.vis_k, dtype=float)

    def to_dict(self) -> dict:
        return {
            "m": self.m,
            "n": self.n,
            "s": self.s.tolist(),
            "d_lo": self.d_lo.tolist(),
            "d_hi": self.d_hi.tolist(),
            "gamma": self.gamma.tolist(),
            "omega": self.omega.tolist(),
            "beta": self.beta.tolist(),
            "cost_a": self.cost_a.tolist(),
            "cost_b": self.cost_b.tolist(),
            "vis_k": self.vis_k.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ReliefInstance":
        return cls(**{k: data[k] for k in (
            "m", "n", "s", "d_lo", "d_hi", "gamma", "omega", "beta",
            "cost_a", "cost_b", "vis_k")})


def validate(inst: ReliefInstance) -> list[str]:
    """All invariant violations of the instance (empty list means valid)."""
    out: list[str] = []
    m, n = inst.m, inst.n
    if m < 1 or n < 1:
        out.append(f"m and n must be at least 1, got m={m} n={n}")
        return out
    shapes = {
        "s": (inst.s, (m,)), "d_lo": (inst.d_lo, (n,)), "d_hi": (inst.d_hi, (n,)),
        "gamma": (inst.gamma, (m, n)), "omega": (inst.omega, (m,)),
        "beta": (inst.beta, (m,)), "cost_a": (inst.cost_a, (m, n)),
        "cost_b": (inst.cost_b, (m, n)), "vis_k": (inst.vis_k, (n,)),
    }
    for name, (arr, want) in shapes.items():
        if arr.shape != want:
            out.append(f"{name} has shape {arr.shape}, expected {want}")
    if out:
        return out
    if np.any(inst.s < 0):
        out.append("supply s must be non-negative")
    if np.any(inst.d_lo < 0):
        out.append("lower demand bounds d_lo must be non-negative")
    for name, arr in (("gamma", inst.gamma), ("omega", inst.omega), ("beta", inst.beta),
                      ("cost_a", inst.cost_a), ("vis_k", inst.vis_k)):
        if np.any(arr <= 0):
            out.append(f"{name} entries must be strictly positive")
    if np.any(inst.cost_b < 0):
        out.append("cost_b entries must be non-negative")
    bad = np.nonzero(inst.d_lo > inst.d_hi)[0]
    for j in bad:
        out.append(f"d_lo[{j}]={inst.d_lo[j]} exceeds d_hi[{j}]={inst.d_hi[j]}")
    total_s, total_lo = float(inst.s.sum()), float(inst.d_lo.sum())
    if total_s < total_lo:
        out.append(
            f"infeasible: total supply {total_s} is below total lower demand {total_lo}"
        )
    return out


# ---------------------------------------------------------------------------
# Diminishing step schedule
# ---------------------------------------------------------------------------


def schedule_exponent(t: int) -> int:
    """Block exponent w of a_t = 0.1 / 2**w: blocks of max(1024, 2**w) copies."""
    if t < 0:
        raise ValueError("t must be non-negative")
    if t < 11264:  # 11 blocks of 1024 cover w = 0..10
        return t // 1024
    w = 11
    lo = 11264
    while True:
        if t < lo + (1 << w):
            return w
        lo += 1 << w
        w += 1


def step_size(t: int) -> float:
    return 0.1 / (1 << schedule_exponent(t))


def quantized_halvings(t: int) -> int:
    """Halving count applied by the integer solver at iteration t.

    The counter machinery of the generated system emits one halving token per
    1024 iterations for the first ten tokens and then doubles the block
    length starting at 2048, so it deviates from ``schedule_exponent`` only
    beyond iteration 10240.
    """
    if t < 0:
        raise ValueError("t must be non-negative")
    if t < 10240:
        return t // 1024
    r = t - 10240
    w = 10
    block = 2048
    while r >= block:
        r -= block
        block <<= 1
        w += 1
    return w


# ---------------------------------------------------------------------------
# Floating point solver
# ---------------------------------------------------------------------------


@dataclass
class SolverState:
    q: np.ndarray      # (m, n) item flows
    lam: np.ndarray    # (m,) supply multipliers
    lam1: np.ndarray   # (n,) lower demand multipliers
    lam2: np.ndarray   # (n,) upper demand multipliers
    t: int = 0

    @classmethod
    def initial(cls, inst: ReliefInstance) -> "SolverState":
        return cls(
            q=np.ones((inst.m, inst.n)),
            lam=np.zeros(inst.m),
            lam1=np.zeros(inst.n),
            lam2=np.zeros(inst.n),
        )


def visibility_term(inst: ReliefInstance, q: np.ndarray, k: int, l: int) -> float:
    """Derivative of location l's visibility funds with respect to q_kl:
    vis_l / (2 sqrt(sum_i q_il)); locations other than l contribute zero.
    The singular point sum_i q_il == 0 returns a finite cap."""
    col = float(np.sum(q[:, l]))
    if col <= 0.0:
        col = VISIBILITY_FLOOR
    return float(inst.vis_k[l]) / (2.0 * math.sqrt(col))


def _gradient_pack(inst: ReliefInstance, state: SolverState, variant: str):
    """Parenthesized drift of each update family, before scaling by a_t."""
    q = state.q
    g = (
        inst.omega[:, None] * inst.gamma / inst.beta[:, None]
        - (2.0 * inst.cost_a**2 * q + 2.0 * inst.cost_a * inst.cost_b) / inst.beta[:, None]
        - state.lam[:, None]
        + state.lam1[None, :]
        - state.lam2[None, :]
    )
    capped = 0
    if variant == FULL:
        cols = q.sum(axis=0)
        safe = np.where(cols > 0.0, cols, VISIBILITY_FLOOR)
        capped = int(np.count_nonzero(cols <= 0.0))
        g = g + (inst.vis_k / (2.0 * np.sqrt(safe)))[None, :]
    dl = -inst.s + q.sum(axis=1)
    d1 = -q.sum(axis=0) + inst.d_lo
    d2 = -inst.d_hi + q.sum(axis=0)
    return g, dl, d1, d2, capped


def euler_step(state: SolverState, inst: ReliefInstance, variant: str = SIMPLIFIED) -> SolverState:
    """One projected step; every family reads only the time-t state, so the
    result is independent of evaluation order."""
    if variant not in (SIMPLIFIED, FULL):
        raise ValueError(f"unknown variant {variant!r}")
    a = step_size(state.t)
    g, dl, d1, d2, _ = _gradient_pack(inst, state, variant)
    return SolverState(
        q=np.maximum(0.0, state.q + a * g),
        lam=np.maximum(0.0, state.lam + a * dl),
        lam1=np.maximum(0.0, state.lam1 + a * d1),
        lam2=np.maximum(0.0, state.lam2 + a * d2),
        t=state.t + 1,
    )


def objective(inst: ReliefInstance, q: np.ndarray, variant: str = SIMPLIFIED) -> float:
    q = np.asarray(q, dtype=float)
    value = float(
        -np.sum(inst.omega[:, None] * inst.gamma / inst.beta[:, None] * q)
        + np.sum((inst.cost_a * q + inst.cost_b) ** 2 / inst.beta[:, None])
    )
    if variant == FULL:
        value -= float(np.sum(inst.vis_k * np.sqrt(q.sum(axis=0))))
    return value


# ---------------------------------------------------------------------------
# Integer-quantized solver
# ---------------------------------------------------------------------------


@dataclass
class FixedPointConstants:
    """Integer constants of the quantized iteration at scale P = 10^p.

    All floors and ceilings are taken over exact decimal fractions of the
    instance parameters, so the same numbers parameterize both this solver
    and the generated membrane system.
    """

    p: int
    P: int
    k0: list[list[int]]      # floor(P omega_k gamma_kl / beta_k)
    k1: list[list[int]]      # floor(2 P a_kl b_kl / beta_k)
    slope: list[list[int]]   # floor(2 P a_kl^2)
    den: list[int]           # floor(P beta_k)
    half: list[int]          # ceil(P beta_k / 2)
    supply: list[int]        # floor(s_k P)
    dlo: list[int]           # floor(d_lo_l P)
    dhi: list[int]           # floor(d_hi_l P)


def fixed_point_constants(inst: ReliefInstance, p: int) -> FixedPointConstants:
    if p < 1:
        raise ValueError("precision exponent p must be at least 1")
    P = 10**p
    om = [_exact(x) for x in inst.omega]
    be = [_exact(x) for x in inst.beta]
    ga = [[_exact(x) for x in row] for row in inst.gamma]
    ca = [[_exact(x) for x in row] for row in inst.cost_a]
    cb = [[_exact(x) for x in row] for row in inst.cost_b]
    k0 = [[math.floor(P * om[k] * ga[k][l] / be[k]) for l in range(inst.n)] for k in range(inst.m)]
    k1 = [[math.floor(2 * P * ca[k][l] * cb[k][l] / be[k]) for l in range(inst.n)] for k in range(inst.m)]
    slope = [[math.floor(2 * P * ca[k][l] ** 2) for l in range(inst.n)] for k in range(inst.m)]
    den = [math.floor(P * be[k]) for k in range(inst.m)]
    half = [math.ceil(P * be[k] / 2) for k in range(inst.m)]
    supply = [math.floor(_exact(x) * P) for x in inst.s]
    dlo = [math.floor(_exact(x) * P) for x in inst.d_lo]
    dhi = [math.floor(_exact(x) * P) for x in inst.d_hi]
    return FixedPointConstants(
        p=p, P=P, k0=k0, k1=k1, slope=slope, den=den, half=half,
        supply=supply, dlo=dlo, dhi=dhi,
    )


def div_round_half(raw: int, den: int, half: int) -> int:
    """floor(raw/den), plus one when the remainder reaches the half mark."""
    if den <= 0:
        raise ValueError("division constant must be positive")
    return raw // den + (1 if raw % den >= half else 0)


def scaled_emission(magnitude: int, w: int) -> int:
    """Apply the step factor a_t = 0.1/2^w to a count: w floor-halvings, then
    division by ten rounding half up."""
    for _ in range(w):
        magnitude //= 2
    return magnitude // 10 + (1 if magnitude % 10 >= 5 else 0)


@dataclass
class QuantizedState:
    """Counts at scale 10^p; value = count / 10^p."""

    q: list[list[int]]
    lam: list[int]
    lam1: list[int]
    lam2: list[int]
    t: int
    p: int

    @classmethod
    def initial(cls, inst: ReliefInstance, p: int) -> "QuantizedState":
        P = 10**p
        return cls(
            q=[[P] * inst.n for _ in range(inst.m)],
            lam=[0] * inst.m,
            lam1=[0] * inst.n,
            lam2=[0] * inst.n,
            t=0,
            p=p,
        )

    def q_matrix(self) -> np.ndarray:
        P = 10**self.p
        return np.array([[c / P for c in row] for row in self.q])


def _project(retained: int, drift: int, w: int) -> int:
    """New count from a retained count and a signed drift (both in raw scale):
    emit the scaled magnitude, then cancel against the retained objects."""
    delta = scaled_emission(abs(drift), w)
    if drift >= 0:
        return retained + delta
    return max(0, retained - delta)


def quantized_euler_step(
    state: QuantizedState,
    inst: ReliefInstance,
    p: int | None = None,
    constants: FixedPointConstants | None = None,
) -> QuantizedState:
    """One integer iteration, bit-exact against the generated membrane system."""
    if p is None:
        p = state.p
    if p != state.p:
        raise ValueError("precision of state and call disagree")
    k = constants if constants is not None else fixed_point_constants(inst, p)
    m, n = inst.m, inst.n
    w = quantized_halvings(state.t)
    rows = [sum(state.q[i]) for i in range(m)]
    cols = [sum(state.q[i][j] for i in range(m)) for j in range(n)]
    new_q = [
        [
            _project(
                state.q[i][j],
                (k.k0[i][j] + state.lam1[j])
                - (
                    k.k1[i][j]
                    + state.lam[i]
                    + state.lam2[j]
                    + div_round_half(state.q[i][j] * k.slope[i][j], k.den[i], k.half[i])
                ),
                w,
            )
            for j in range(n)
        ]
        for i in range(m)
    ]
    new_lam = [_project(state.lam[i], rows[i] - k.supply[i], w) for i in range(m)]
    new_lam1 = [_project(state.lam1[j], k.dlo[j] - cols[j], w) for j in range(n)]
    new_lam2 = [_project(state.lam2[j], cols[j] - k.dhi[j], w) for j in range(n)]
    return QuantizedState(q=new_q, lam=new_lam, lam1=new_lam1, lam2=new_lam2, t=state.t + 1, p=p)


def quantized_trajectory(
    inst: ReliefInstance, p: int, max_iter: int
) -> tuple[list[list[list[int]]], bool]:
    """Per-iteration q counts starting from the all-ones state, stopping at
    exact q equality between consecutive iterations (the halting condition of
    the membrane system) or at max_iter.  Returns (trajectory, converged);
    the trajectory includes the initial counts."""
    constants = fixed_point_constants(inst, p)
    state = QuantizedState.initial(inst, p)
    traj = [[row[:] for row in state.q]]
    converged = False
    for _ in range(max_iter):
        nxt = quantized_euler_step(state, inst, p, constants)
        traj.append([row[:] for row in nxt.q])
        if nxt.q == state.q:
            converged = True
            state = nxt
            break
        state = nxt
    return traj, converged


# ---------------------------------------------------------------------------
# Driver and diagnostics
# ---------------------------------------------------------------------------


@dataclass
class EquilibriumReport:
    q_star: np.ndarray
    lam: np.ndarray
    lam1: np.ndarray
    lam2: np.ndarray
    iterations: int
    converged: bool
    variant: str
    tol: float
    feasibility_residuals: dict[str, np.ndarray] = field(default_factory=dict)
    stationarity_residuals: np.ndarray | None = None
    p: int | None = None
    visibility_cap_events: int = 0

    @property
    def multipliers(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return self.lam, self.lam1, self.lam2


def feasibility_residuals(inst: ReliefInstance, q: np.ndarray) -> dict[str, np.ndarray]:
    rows = q.sum(axis=1)
    cols = q.sum(axis=0)
    return {
        "supply": np.maximum(0.0, rows - inst.s),
        "demand_lo": np.maximum(0.0, inst.d_lo - cols),
        "demand_hi": np.maximum(0.0, cols - inst.d_hi),
    }


def stationarity_residual(
    inst: ReliefInstance, report: EquilibriumReport, variant: str | None = None
) -> np.ndarray:
    """Drift of the q update at the reported point.  At an exact equilibrium
    the drift vanishes wherever q_kl > 0 and is non-positive on the boundary
    q_kl = 0."""
    variant = variant or (SIMPLIFIED if report.variant == QUANTIZED else report.variant)
    state = SolverState(q=report.q_star, lam=report.lam, lam1=report.lam1, lam2=report.lam2, t=0)
    g, _, _, _, _ = _gradient_pack(inst, state, variant)
    return g


def solve(
    inst: ReliefInstance,
    variant: str = SIMPLIFIED,
    tol: float = 1e-5,
    max_iter: int = 100_000,
    p: int | None = None,
) -> EquilibriumReport:
    """Iterate the chosen step until convergence or the iteration budget.

    Convergence is measured on q only: max |q^{t+1} - q^t| < tol for the
    float variants, exact count equality for the quantized variant.  The
    start point mirrors the membrane system: every flow at 1.0, every
    multiplier at 0.
    """
    violations = validate(inst)
    if violations:
        raise ValueError("invalid instance: " + "; ".join(violations))
    if tol <= 0:
        raise ValueError("tol must be positive")

    if variant == QUANTIZED:
        if p is None:
            raise ValueError("quantized variant needs a precision exponent p")
        constants = fixed_point_constants(inst, p)
        state = QuantizedState.initial(inst, p)
        converged = False
        iterations = 0
        for _ in range(max_iter):
            nxt = quantized_euler_step(state, inst, p, constants)
            iterations += 1
            if nxt.q == state.q:
                state = nxt
                converged = True
                break
            state = nxt
        P = 10**p
        report = EquilibriumReport(
            q_star=np.array([[c / P for c in row] for row in state.q]),
            lam=np.array([c / P for c in state.lam]),
            lam1=np.array([c / P for c in state.lam1]),
            lam2=np.array([c / P for c in state.lam2]),
            iterations=iterations,
            converged=converged,
            variant=QUANTIZED,
            tol=1.0 / P,
            p=p,
        )
    elif variant in (SIMPLIFIED, FULL):
        state = SolverState.initial(inst)
        converged = False
        caps = 0
        for _ in range(max_iter):
            _, _, _, _, capped = _gradient_pack(inst, state, variant)
            caps += capped
            nxt = euler_step(state, inst, variant)
            delta = float(np.max(np.abs(nxt.q - state.q)))
            state = nxt
            if delta < tol:
                converged = True
                break
        report = EquilibriumReport(
            q_star=state.q,
            lam=state.lam,
            lam1=state.lam1,
            lam2=state.lam2,
            iterations=state.t,
            converged=converged,
            variant=variant,
            tol=tol,
            visibility_cap_events=caps,
        )
    else:
        raise ValueError(f"unknown variant {variant!r}")

    report.feasibility_residuals = feasibility_residuals(inst, report.q_star)
    report.stationarity_residuals = stationarity_residual(inst, report)
    return report
