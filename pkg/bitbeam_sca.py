# bitbeam_sca.py
"""
Joint quantization-bit / beam-selection optimization for fixed (u, Theta).

Variables of every convex subproblem, in this order:

    w (S*M) | w_hat (S*M) | r (S*M) | rho (K) | t (K) | omega (K) | s (K) | b | zeta

w is the column-major vectorization of W, i.e. w[m*S + s] = W[s, m]. For user k:

    rho_k <= 2 t_bar/omega_bar t_k - t_bar^2/omega_bar^2 omega_k     (Taylor bound of t^2/omega)
    t_k^2 <= zeta s_k                                                 (2x2 Schur block)
    s_k   <= zeta_bar (2 Re(conj(c_bar) <w, a_k>) - |c_bar|^2)        (tangent of |<w, a_k>|^2)
    omega_k >= w^T Q_k w                                              (interference + noise + AQNM)

so rho_k never exceeds the SINR of w. s_k and omega_k are held in units of ScaState.scale[k]
(t_k in its square root), which keeps every user's block O(1). Binarity is promoted with
the AGM-linearized constraint w(1 - w_hat) <= r^2 and a -mu * sum r^2 term in the objective.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy.optimize import linear_sum_assignment

from conic_core import Affine, ConicProgram, SolveStatus, schur_2x2_to_hyperbolic, solve
from logger import logger
from quantizer import CombinerState, aqnm_pair, effective_channel, selection_from_beams, sum_rate
from scenario import PAPER_FAITHFUL

LN4 = math.log(4.0)


class SelectionError(ValueError):
    pass


class OracleCapError(RuntimeError):
    pass


@dataclass(frozen=True)
class ScaOptions:
    tol: float = 1e-4
    max_iter: int = 20
    binarity_weight: float = 0.1
    delta: float = 0.5
    literal_17: bool = False
    bit_coupling: str = "enumerate"          # enumerate | linearized
    solver_tol: float = 1e-7
    solver_max_iter: int = 200
    eta_max: float = 1e6
    blend: float = 0.1                       # share of the uniform selection mixed into a boundary start


@dataclass
class RateLinearForms:
    A: np.ndarray                # (K, K, S*M); <w, A[k, l]> = u_k^H F_a F^H G Theta h_l
    gain: float
    dist: float
    beam_gains: np.ndarray       # D^H Heff, (S, K)
    decoders: np.ndarray         # (M, K)
    gram: np.ndarray             # D^H D, (S, S)
    n_beams: int
    n_rf: int
    bits: float
    mode: str

    @property
    def n_users(self) -> int:
        return self.A.shape[0]

    def unit(self, k: int, l: int) -> np.ndarray:
        return self.A[k, l] / self.gain


def vec_selection(W: np.ndarray) -> np.ndarray:
    return np.asarray(W, dtype=float).reshape(-1, order="F")


def unvec_selection(w: np.ndarray, n_beams: int, n_rf: int) -> np.ndarray:
    return np.asarray(w, dtype=float).reshape((n_beams, n_rf), order="F")


def build_linear_forms(chan, comb: CombinerState, theta, decoders, mode: str = PAPER_FAITHFUL) -> RateLinearForms:
    d = comb.codebook
    c = d.conj().T @ effective_channel(chan, theta)          # (S, K)
    u = np.asarray(decoders)
    gain, dist = aqnm_pair(comb.bits, mode)
    S, M, K = d.shape[1], comb.n_rf, u.shape[1]
    # A[k, l, m*S + s] = gain * conj(u[m, k]) * c[s, l]
    A = gain * np.einsum("mk,sl->klms", u.conj(), c).reshape(K, K, M * S)
    return RateLinearForms(A=A, gain=gain, dist=dist, beam_gains=c, decoders=u,
                           gram=d.conj().T @ d, n_beams=S, n_rf=M, bits=comb.bits, mode=mode)


def _quadratic_parts(forms: RateLinearForms, sigma2: float, k: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Unit-gain (interference, noise, AQNM) matrices of user k, each (S*M, S*M) real PSD."""
    K = forms.n_users
    u_k = forms.decoders[:, k]
    interf = np.zeros((forms.A.shape[2],) * 2)
    for l in range(K):
        if l != k:
            a = forms.unit(k, l)
            interf += np.real(np.outer(a, a.conj()))
    noise = sigma2 * np.real(np.kron(np.outer(u_k.conj(), u_k), forms.gram))
    per_chain = np.real(forms.beam_gains @ forms.beam_gains.conj().T) + sigma2 * np.real(forms.gram)
    quant = np.kron(np.diag(np.abs(u_k) ** 2), per_chain)
    return interf, noise, quant


# ---------------- bounding gadgets ----------------
def agm_point(w_hat_prev, w_prev, eta_max: float = 1e6):
    """eta = sqrt((1 - w_hat) / w), clamped to [1/eta_max, eta_max]."""
    w_prev = np.asarray(w_prev, dtype=float)
    w_hat_prev = np.asarray(w_hat_prev, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        eta = np.sqrt(np.maximum(1.0 - w_hat_prev, 0.0) / w_prev)
    eta = np.where(w_prev > 0, eta, eta_max)
    return np.clip(eta, 1.0 / eta_max, eta_max)


def agm_bound(w, w_hat, eta):
    return 0.5 * ((w * eta) ** 2 + ((1.0 - w_hat) / eta) ** 2)


def taylor_bound(t, omega, t_bar, omega_bar):
    """Affine minorant of t^2/omega, tight at (t_bar, omega_bar)."""
    return 2.0 * t_bar / omega_bar * t - t_bar ** 2 / omega_bar ** 2 * omega


def relaxed_violation(W: np.ndarray) -> float:
    cols = np.abs(W.sum(axis=0) - 1.0)
    rows = np.maximum(W.sum(axis=1) - 1.0, 0.0)
    return float(max(cols.max(initial=0.0), rows.max(initial=0.0), np.maximum(-W, 0.0).max(initial=0.0)))


# ---------------- state ----------------
class _Layout:
    def __init__(self, S: int, M: int, K: int):
        sm = S * M
        self.S, self.M, self.K, self.sm = S, M, K, sm
        self.w = slice(0, sm)
        self.w_hat = slice(sm, 2 * sm)
        self.r = slice(2 * sm, 3 * sm)
        self.rho = slice(3 * sm, 3 * sm + K)
        self.t = slice(3 * sm + K, 3 * sm + 2 * K)
        self.omega = slice(3 * sm + 2 * K, 3 * sm + 3 * K)
        self.s = slice(3 * sm + 3 * K, 3 * sm + 4 * K)
        self.b = 3 * sm + 4 * K
        self.zeta = self.b + 1
        self.n = self.b + 2

    def index(self, block: slice, i: int) -> int:
        return block.start + i


@dataclass
class ScaState:
    w: np.ndarray
    w_hat: np.ndarray
    r: np.ndarray
    rho: np.ndarray
    t: np.ndarray
    omega: np.ndarray
    s: np.ndarray
    b: float
    zeta: float
    # linearization points
    eta: np.ndarray
    r_bar: np.ndarray
    t_bar: np.ndarray
    omega_bar: np.ndarray
    c_bar: np.ndarray
    zeta_bar: float
    b_bar: float
    dist_bar: float
    active: np.ndarray
    b_bounds: Tuple[int, int]
    scale: np.ndarray                # per-user unit of s, omega (and sqrt of it for t)
    pin_bits: bool = True
    iteration: int = 0

    def vector(self, lay: _Layout) -> np.ndarray:
        x = np.zeros(lay.n)
        x[lay.w], x[lay.w_hat], x[lay.r] = self.w, self.w_hat, self.r
        x[lay.rho], x[lay.t], x[lay.omega], x[lay.s] = self.rho, self.t, self.omega, self.s
        x[lay.b], x[lay.zeta] = self.b, self.zeta
        return x


@dataclass
class ScaIterate:
    n: int
    objective: float
    b: float
    violation: float


@dataclass
class ScaResult:
    bits: float
    selection: np.ndarray            # relaxed (S, M)
    objective: float
    status: str                      # ok | stalled
    trace: List[ScaIterate] = field(default_factory=list)
    solver: List[SolveStatus] = field(default_factory=list)
    rate: float = float("nan")       # true sum rate at (bits, selection)
    per_bits: Dict[int, float] = field(default_factory=dict)

    @property
    def objective_trace(self) -> List[float]:
        return [it.objective for it in self.trace]


def _signal_values(forms: RateLinearForms, w: np.ndarray) -> np.ndarray:
    return np.array([w @ forms.unit(k, k) for k in range(forms.n_users)])


def _user_quadratic(forms, sigma2, k, gain, dist) -> np.ndarray:
    interf, noise, quant = _quadratic_parts(forms, sigma2, k)
    return gain ** 2 * (interf + noise) + dist * quant


def interior_start(W: np.ndarray, blend: float) -> np.ndarray:
    """Mix a boundary selection with the uniform one so every entry is strictly inside (0, 1)."""
    S, M = W.shape
    if S == 1:
        return np.ones((1, M))
    if np.min(W) > 1e-6 and np.max(W) < 1.0 - 1e-6:
        return W.copy()
    return (1.0 - blend) * W + blend * np.full((S, M), 1.0 / S)


def initial_state(forms: RateLinearForms, sigma2: float, W_start: np.ndarray, b: float,
                  b_bounds: Tuple[int, int], options: ScaOptions, pin_bits: bool = True) -> ScaState:
    S, M, K = forms.n_beams, forms.n_rf, forms.n_users
    w = vec_selection(interior_start(W_start, options.blend))
    lo, hi = b_bounds
    if not pin_bits and lo < hi:
        b = float(np.clip(b, lo + 1e-6, hi - 1e-6))
    zeta_bar, dist_bar = aqnm_pair(b, forms.mode)

    if S > 1 and options.binarity_weight > 0:
        r_bar = np.sqrt(w * (1.0 - w)) * (1.0 + 1e-3) + 1e-9
        r = r_bar.copy()
    else:
        r_bar = np.zeros_like(w)
        r = np.zeros_like(w)

    c_bar = _signal_values(forms, w)
    active = np.abs(c_bar) ** 2 > 1e-300
    rho, t, omega, s = np.zeros(K), np.zeros(K), np.ones(K), np.zeros(K)
    scale = np.ones(K)
    for k in range(K):
        if not active[k]:
            continue
        q = float(w @ _user_quadratic(forms, sigma2, k, zeta_bar, dist_bar) @ w)
        if q > 0.0 and np.isfinite(q):
            scale[k] = q
        s[k] = 0.9 * zeta_bar * abs(c_bar[k]) ** 2 / scale[k]
        t[k] = 0.9 * math.sqrt(zeta_bar * s[k])
        omega[k] = 1.1 * q / scale[k] + 1e-30
        rho[k] = 0.5 * t[k] ** 2 / omega[k]
    return ScaState(
        w=w, w_hat=w.copy(), r=r, rho=rho, t=t, omega=omega, s=s, b=float(b), zeta=zeta_bar,
        eta=agm_point(w, w, options.eta_max), r_bar=r_bar, t_bar=t.copy(), omega_bar=omega.copy(),
        c_bar=c_bar, zeta_bar=zeta_bar, b_bar=float(b), dist_bar=dist_bar, active=active,
        b_bounds=b_bounds, scale=scale, pin_bits=pin_bits,
    )


# ---------------- subproblem ----------------
def _objective(lay: _Layout, active: np.ndarray, mu: float):
    rho_idx = np.arange(lay.rho.start, lay.rho.stop)[active]
    r_idx = np.arange(lay.r.start, lay.r.stop)

    def f(x):
        rho = x[rho_idx]
        val = float(np.sum(np.log2(1.0 + rho)))
        g = np.zeros(lay.n)
        hdiag = np.zeros(lay.n)
        g[rho_idx] = 1.0 / ((1.0 + rho) * math.log(2.0))
        hdiag[rho_idx] = -1.0 / ((1.0 + rho) ** 2 * math.log(2.0))
        if mu > 0:
            r = x[r_idx]
            val -= mu * float(r @ r)
            g[r_idx] = -2.0 * mu * r
            hdiag[r_idx] = -2.0 * mu
        return val, g, np.diag(hdiag)

    return f


def assemble_subproblem(state: ScaState, forms: RateLinearForms, sigma2: float,
                        options: ScaOptions) -> Tuple[ConicProgram, np.ndarray]:
    S, M, K = forms.n_beams, forms.n_rf, forms.n_users
    lay = _Layout(S, M, K)
    n = lay.n
    mu = options.binarity_weight if S > 1 else 0.0
    prog = ConicProgram(n, _objective(lay, state.active, mu))

    def e(i: int, v: float = 1.0) -> np.ndarray:
        row = np.zeros(n)
        row[i] = v
        return row

    # selection structure: column sums, w_hat = w, row sums
    for m in range(M):
        row = np.zeros(n)
        row[m * S:(m + 1) * S] = 1.0
        prog.add_eq(row, 1.0, "column-sum")
    for i in range(lay.sm):
        prog.add_eq(e(i) - e(lay.sm + i), 0.0, "w-hat")
    row_sums = []
    for s_ in range(S):
        row = np.zeros(n)
        row[[m * S + s_ for m in range(M)]] = 1.0
        row_sums.append(row)
    if S > M:
        for row in row_sums:
            prog.add_ineq(row, 1.0, "row-sum")
    elif S > 1:
        for row in row_sums[:-1]:
            prog.add_eq(row, 1.0, "row-sum")
    if S > 1:
        prog.set_bounds(lay.w, 0.0, 1.0)

    # binarity gadgets
    for i in range(lay.sm):
        wi, whi, ri = i, lay.sm + i, 2 * lay.sm + i
        if S == 1:
            prog.add_eq(e(ri), 0.0, "r-pinned")
        elif mu > 0:
            eta = state.eta[i]
            rb = state.r_bar[i]
            if options.literal_17:
                coef_r, const_r = rb, -2.0 * rb ** 2
            else:
                coef_r, const_r = -2.0 * rb, rb ** 2
            Q = np.diag([0.5 * eta ** 2, 0.5 / eta ** 2, 0.0])
            q = np.array([0.0, -1.0 / eta ** 2, coef_r])
            prog.add_quadratic(Q, q, 0.5 / eta ** 2 + const_r, index=[wi, whi, ri], group="agm-binarity")
        else:
            prog.add_hyperbolic(schur_2x2_to_hyperbolic(
                Affine.var(n, wi), Affine.var(n, whi, -1.0, 1.0), Affine.var(n, ri), group="schur-binarity"))

    # bits and the AQNM gain
    if state.pin_bits or state.b_bounds[0] == state.b_bounds[1]:
        prog.add_eq(e(lay.b), state.b_bar, "bits")
        prog.add_eq(e(lay.zeta), state.zeta_bar, "zeta")
    else:
        # zeta = alpha(b_bar) (1 - ln4 (b - b_bar))
        row = e(lay.zeta) + e(lay.b, state.zeta_bar * LN4)
        prog.add_eq(row, state.zeta_bar * (1.0 + LN4 * state.b_bar), "zeta-coupling")
        lo = max(state.b_bounds[0], state.b_bar - 1.0)
        hi = min(state.b_bounds[1], state.b_bar + 1.0)
        prog.set_bounds(lay.b, lo, hi)

    # per-user rate gadgets
    w_idx = np.arange(lay.sm)
    for k in range(K):
        irho, it, iom, is_ = (lay.index(lay.rho, k), lay.index(lay.t, k),
                              lay.index(lay.omega, k), lay.index(lay.s, k))
        if not state.active[k]:
            for i, v in ((irho, 0.0), (it, 0.0), (iom, 1.0), (is_, 0.0)):
                prog.add_eq(e(i), v, "inactive-user")
            continue
        prog.add_hyperbolic(schur_2x2_to_hyperbolic(
            Affine.var(n, lay.zeta), Affine.var(n, is_), Affine.var(n, it), group="signal-schur"))
        # s, omega in units of scale[k]; t in units of sqrt(scale[k])
        ck = state.scale[k]
        a = forms.unit(k, k)
        cb = state.c_bar[k]
        row = e(is_)
        row[:lay.sm] = -state.zeta_bar * 2.0 * (cb.real * a.real + cb.imag * a.imag) / ck
        prog.add_ineq(row, -state.zeta_bar * abs(cb) ** 2 / ck, "signal-tangent")

        Qk = _user_quadratic(forms, sigma2, k, state.zeta_bar, state.dist_bar) / ck
        Q = np.zeros((lay.sm + 1, lay.sm + 1))
        Q[:lay.sm, :lay.sm] = Qk
        q = np.zeros(lay.sm + 1)
        q[-1] = -1.0
        prog.add_quadratic(Q, q, 0.0, index=np.append(w_idx, iom), group="interference-epigraph")

        tb, ob = state.t_bar[k], state.omega_bar[k]
        row = e(irho) + e(it, -2.0 * tb / ob) + e(iom, tb ** 2 / ob ** 2)
        prog.add_ineq(row, 0.0, "taylor")
        prog.set_bounds(irho, lo=0.0)

    return prog, state.vector(lay)


def _advance(state: ScaState, x: np.ndarray, forms: RateLinearForms, options: ScaOptions) -> ScaState:
    lay = _Layout(forms.n_beams, forms.n_rf, forms.n_users)
    w = x[lay.w].copy()
    w_hat = x[lay.w_hat].copy()
    b = float(x[lay.b])
    zeta_bar, dist_bar = (state.zeta_bar, state.dist_bar) if state.pin_bits else aqnm_pair(b, forms.mode)
    return replace(
        state, w=w, w_hat=w_hat, r=x[lay.r].copy(), rho=x[lay.rho].copy(), t=x[lay.t].copy(),
        omega=x[lay.omega].copy(), s=x[lay.s].copy(), b=b, zeta=float(x[lay.zeta]),
        eta=agm_point(w_hat, w, options.eta_max), r_bar=x[lay.r].copy(), t_bar=x[lay.t].copy(),
        omega_bar=x[lay.omega].copy(), c_bar=_signal_values(forms, w), zeta_bar=zeta_bar,
        b_bar=b, dist_bar=dist_bar, iteration=state.iteration + 1,
    )


def sca_loop(state0: ScaState, forms: RateLinearForms, sigma2: float, options: ScaOptions) -> ScaResult:
    """Successive convex approximation; the surrogate objective trace never decreases."""
    S, M = forms.n_beams, forms.n_rf
    state = state0
    prog, x0 = assemble_subproblem(state, forms, sigma2, options)
    prev = prog.objective(x0)[0]
    trace: List[ScaIterate] = []
    solver: List[SolveStatus] = []
    status = "ok"
    for n in range(options.max_iter):
        if n > 0:
            prog, x0 = assemble_subproblem(state, forms, sigma2, options)
        x, st = solve(prog, x0, tol=options.solver_tol, max_iter=options.solver_max_iter)
        solver.append(st)
        if st.status == "infeasible":
            logger.warning("[SCA] subproblem %d infeasible (%s); keeping previous iterate", n, st.failed_group)
            status = "stalled"
            break
        obj = st.objective
        if st.status == "stalled":
            # a strictly feasible, improving point is still a valid iterate; stop after taking it
            logger.warning("[SCA] subproblem %d stalled (stat=%.2e after %d Newton steps)", n, st.stationarity,
                           st.iterations)
            status = "stalled"
            if obj >= prev:
                state = _advance(state, x, forms, options)
                trace.append(ScaIterate(n, obj, state.b, relaxed_violation(unvec_selection(state.w, S, M))))
                prev = obj
            break
        if obj < prev:
            if prev - obj > options.tol:
                logger.warning("[SCA] subproblem %d lowered the surrogate (%.6g < %.6g); keeping previous iterate",
                               n, obj, prev)
                status = "stalled"
            break
        state = _advance(state, x, forms, options)
        W = unvec_selection(state.w, S, M)
        trace.append(ScaIterate(n, obj, state.b, relaxed_violation(W)))
        logger.debug("[SCA] it=%d obj=%.6f b=%.4f solver=%s", n, obj, state.b, st.status)
        done = abs(obj - prev) < options.tol
        prev = obj
        if done:
            break
    W = unvec_selection(state.w, S, M)
    return ScaResult(bits=state.b, selection=W, objective=prev, status=status, trace=trace, solver=solver)


# ---------------- bit/beam driver ----------------
def optimize_bits_and_beams(chan, comb: CombinerState, theta, decoders, sigma2: float,
                            b_bounds: Tuple[int, int], mode: str = PAPER_FAITHFUL,
                            options: ScaOptions = ScaOptions()) -> ScaResult:
    """Relaxed (b*, W*) for fixed decoders and phases, starting from comb.selection."""
    lo, hi = b_bounds
    coupling = options.bit_coupling
    if coupling == "linearized" and mode != PAPER_FAITHFUL:
        logger.warning("[SCA] linearized bit coupling needs paper-faithful AQNM; enumerating bits instead")
        coupling = "enumerate"

    if coupling == "linearized" and lo < hi:
        start = CombinerState(comb.codebook, comb.selection, float(np.clip(comb.bits, lo, hi)))
        forms = build_linear_forms(chan, start, theta, decoders, mode)
        state0 = initial_state(forms, sigma2, comb.selection, start.bits, b_bounds, options, pin_bits=False)
        res = sca_loop(state0, forms, sigma2, options)
        res.rate = sum_rate(chan, CombinerState(comb.codebook, res.selection, res.bits), theta, decoders, sigma2, mode)
        return res

    best: Optional[ScaResult] = None
    per_bits: Dict[int, float] = {}
    for b in range(lo, hi + 1):
        comb_b = CombinerState(comb.codebook, comb.selection, b)
        forms = build_linear_forms(chan, comb_b, theta, decoders, mode)
        state0 = initial_state(forms, sigma2, comb.selection, b, (b, b), options, pin_bits=True)
        res = sca_loop(state0, forms, sigma2, options)
        res.rate = sum_rate(chan, CombinerState(comb.codebook, res.selection, b), theta, decoders, sigma2, mode)
        per_bits[b] = res.rate
        if best is None or res.rate > best.rate:
            best = res
    best.per_bits = per_bits
    logger.debug("[SCA] per-bit relaxed rates %s -> b=%s", per_bits, best.bits)
    return best


def first_subproblem(chan, comb: CombinerState, theta, decoders, sigma2: float,
                     mode: str = PAPER_FAITHFUL, options: ScaOptions = ScaOptions()) -> ConicProgram:
    """The convex program of the first iteration at b = comb.bits, for --dump-subproblem."""
    b = int(round(comb.bits))
    forms = build_linear_forms(chan, CombinerState(comb.codebook, comb.selection, b), theta, decoders, mode)
    state0 = initial_state(forms, sigma2, comb.selection, b, (b, b), options, pin_bits=True)
    prog, _ = assemble_subproblem(state0, forms, sigma2, options)
    return prog


# ---------------- rounding / projection / oracle ----------------
def round_bits(b_star: float, delta: float = 0.5, b_min: Optional[int] = None, b_max: Optional[int] = None) -> int:
    lo = math.floor(b_star)
    b = lo if b_star - lo <= delta else math.ceil(b_star)
    if b_min is not None:
        b = max(b, b_min)
    if b_max is not None:
        b = min(b, b_max)
    return int(b)


def project_selection(w_relaxed: np.ndarray, n_beams: Optional[int] = None) -> np.ndarray:
    """Maximum-weight assignment of RF chains to distinct beams; ties go to the lowest beam index."""
    W = np.asarray(w_relaxed, dtype=float)
    if W.ndim == 1:
        if n_beams is None:
            raise SelectionError("a vectorized selection needs n_beams")
        W = unvec_selection(W, n_beams, W.size // n_beams)
    S, M = W.shape
    if S < M:
        raise SelectionError(f"cannot assign {M} RF chains to {S} distinct beams")
    eps = 1e-9 * max(1.0, float(np.max(np.abs(W))))
    s_idx = np.arange(S)[:, None]
    m_idx = np.arange(M)[None, :]
    rows, cols = linear_sum_assignment(W - eps * s_idx * (M - m_idx), maximize=True)
    out = np.zeros((S, M))
    out[rows, cols] = 1.0
    return out


@dataclass
class OracleResult:
    bits: int
    selection: np.ndarray
    value: float
    evaluations: int


def enumerate_oracle(chan, comb: CombinerState, theta, decoders, sigma2: float, b_bounds: Tuple[int, int],
                     mode: str = PAPER_FAITHFUL, cap: int = 100_000) -> OracleResult:
    """Exhaustive argmax of the sum rate over integer b and ordered beam assignments."""
    S, M = comb.n_beams, comb.n_rf
    count = math.perm(S, M)
    if count > cap:
        raise OracleCapError(
            f"{count} assignments exceed the cap of {cap}; use random restarts of the SCA instead"
        )
    best = OracleResult(b_bounds[0], np.zeros((S, M)), -np.inf, 0)
    evals = 0
    for beams in itertools.permutations(range(S), M):
        W = np.zeros((S, M))
        W[list(beams), list(range(M))] = 1.0
        for b in range(b_bounds[0], b_bounds[1] + 1):
            value = sum_rate(chan, CombinerState(comb.codebook, W, b), theta, decoders, sigma2, mode)
            evals += 1
            if value > best.value:
                best = OracleResult(b, W, value, 0)
    best.evaluations = evals
    return best


def _neighbours(beams: Tuple[int, ...], n_beams: int):
    used = set(beams)
    for m in range(len(beams)):
        for s in range(n_beams):
            if s not in used:
                yield beams[:m] + (s,) + beams[m + 1:]
    for m1, m2 in itertools.combinations(range(len(beams)), 2):
        swapped = list(beams)
        swapped[m1], swapped[m2] = swapped[m2], swapped[m1]
        yield tuple(swapped)


def local_search(chan, comb: CombinerState, theta, decoders, sigma2: float, b_bounds: Tuple[int, int],
                 starts: List[np.ndarray], mode: str = PAPER_FAITHFUL, max_evals: int = 20_000) -> OracleResult:
    """
    First-improvement search over binary selections from each start.

    Moves re-point one RF chain to an unused beam or swap two chains; every candidate is
    scored by the true sum rate at its best integer b. Returns the best point over all starts.
    """
    lo, hi = b_bounds
    S = comb.n_beams
    evals = 0

    def score(beams: Tuple[int, ...]) -> Tuple[float, int]:
        nonlocal evals
        W = selection_from_beams(beams, S)
        best_v, best_b = -np.inf, lo
        for b in range(lo, hi + 1):
            v = sum_rate(chan, CombinerState(comb.codebook, W, b), theta, decoders, sigma2, mode)
            evals += 1
            if v > best_v:
                best_v, best_b = v, b
        return best_v, best_b

    best: Optional[OracleResult] = None
    seen = set()
    for W0 in starts:
        beams = tuple(int(s) for s in np.argmax(project_selection(W0), axis=0))
        if beams in seen:
            continue
        seen.add(beams)
        value, b = score(beams)
        improved = True
        while improved and evals < max_evals:
            improved = False
            for cand in _neighbours(beams, S):
                v, bb = score(cand)
                if v > value + 1e-12 * max(1.0, abs(value)):
                    beams, value, b, improved = cand, v, bb, True
                    break
        if best is None or value > best.value:
            best = OracleResult(b, selection_from_beams(beams, S), value, 0)
    if best is None:
        raise SelectionError("local search needs at least one start")
    best.evaluations = evals
    logger.debug("[SCA] local search: %d evaluations, rate %.6f at b=%d", evals, best.value, best.bits)
    return best
