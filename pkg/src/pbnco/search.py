"""Population search: memory-guided improvement with constructive restarts.

Individuals move in lock-step. Within a step every individual reads the same
memory snapshot; memory writes and best-so-far updates happen afterwards in
individual order, which keeps runs reproducible.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import cnc
from . import problems as pr
from .cni import policy_moves
from .memory import DEFAULT_CAPACITY, DEFAULT_EPS, DEFAULT_K, LAST, SharedMemory, select_k
from .trace import AnytimeTrace, population_diversity

PBNCO = "pbnco"
CNI_ONLY = "cni-only"
LEVEL1_MEM = "level1-mem"
RANDOM_RESTARTS = "random-restarts"
CNC_POP = "cnc-pop"
MODES = (PBNCO, CNI_ONLY, LEVEL1_MEM, RANDOM_RESTARTS, CNC_POP)

INIT_RANDOM = "random"
INIT_CONSTRUCTIVE = "constructive"


class IncompatibleCheckpoint(ValueError):
    pass


@dataclass
class SearchConfig:
    problem: str = pr.MC
    mode: str = PBNCO
    population: int = 20
    steps: int = 1000              # population steps (T_max)
    time_budget: float = 0.0       # seconds; > 0 switches to wall-clock mode
    patience: str = "500"          # integer, "auto" (= |V|) or "inf"
    omega_start: float = 1.0
    phi: float = 1.0
    select_k: str = LAST
    k_select: int = 0              # 0 -> K_max of the constructive net
    init: str = INIT_RANDOM
    knn_k: int = DEFAULT_K
    eps: float = DEFAULT_EPS
    memory_capacity: int = DEFAULT_CAPACITY
    cni_mode: str = "sample"
    cnc_mode: str = "sample"
    target: float = math.nan       # stop once the best objective reaches this
    deterministic: bool = False    # blank wall-clock fields in written traces
    seed: int = 0

    def __post_init__(self):
        if self.population < 1:
            raise ValueError("population must be at least 1")
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}; expected one of {MODES}")
        if self.init not in (INIT_RANDOM, INIT_CONSTRUCTIVE):
            raise ValueError(f"init must be 'random' or 'constructive', got {self.init!r}")
        if self.steps < 0 or self.time_budget < 0:
            raise ValueError("budget must be non-negative")
        self.patience_for(1)

    def patience_for(self, n):
        return resolve_patience(self.patience, n)


def resolve_patience(value, n):
    text = str(value).strip().lower()
    if text == "auto":
        return n
    if text in ("inf", "infinity", "none"):
        return math.inf
    try:
        p = int(text)
    except ValueError:
        raise ValueError(f"patience must be an integer, 'auto' or 'inf', got {value!r}") from None
    if p < 1:
        raise ValueError("patience must be at least 1")
    return p


@dataclass
class PopulationState:
    S: np.ndarray                  # current solutions (P, n)
    f: np.ndarray                  # current objectives
    best: np.ndarray               # B^(i), best value ever reached by individual i
    best_bits: np.ndarray          # argmax of B^(i)
    current_best: np.ndarray       # best value since the last restart
    current_best_bits: np.ndarray
    patience: np.ndarray           # c^(i)
    restarts: np.ndarray
    star_bits: np.ndarray
    star: float
    t: int = 0


@dataclass
class SearchResult:
    bits: np.ndarray
    objective: float
    trace: AnytimeTrace
    state: PopulationState
    restart_events: list = field(default_factory=list)   # (step, individual)
    cnc_calls: int = 0
    history: list = field(default_factory=list)          # every produced solution, if kept

    @property
    def solution(self):
        return self.bits


def check_compatible(net, kind, problem):
    if net is None:
        return
    meta = getattr(net, "meta", None) or {}
    if meta.get("kind") not in (None, kind):
        raise IncompatibleCheckpoint(f"expected a {kind} checkpoint, got {meta.get('kind')}")
    if meta.get("problem") not in (None, problem):
        raise IncompatibleCheckpoint(f"checkpoint was trained for {meta.get('problem')}, not {problem}")
    want = 2 if kind == "cni" else None
    if want is not None and net.cfg.node_in != want:
        raise IncompatibleCheckpoint(f"cni checkpoints take {want} node features, got {net.cfg.node_in}")
    if kind == "cnc" and net.cfg.anchor != (problem == pr.MC):
        raise IncompatibleCheckpoint("constructive checkpoint anchor setting does not match the problem")


def _needs_cnc(cfg):
    return cfg.mode in (PBNCO, LEVEL1_MEM, CNC_POP) or cfg.init == INIT_CONSTRUCTIVE


class _Search:
    def __init__(self, g, cni_net, cnc_net, cfg, rng, keep_history):
        if cfg.problem not in pr.PROBLEMS:
            raise ValueError(f"unknown problem {cfg.problem!r}")
        if cfg.mode != CNC_POP and cni_net is None:
            raise ValueError(f"mode {cfg.mode} needs an improvement checkpoint")
        if _needs_cnc(cfg) and cnc_net is None:
            raise ValueError(f"mode {cfg.mode} with init {cfg.init} needs a constructive checkpoint")
        check_compatible(cni_net, "cni", cfg.problem)
        check_compatible(cnc_net, "cnc", cfg.problem)
        self.g, self.cni, self.cnc_net, self.cfg, self.rng = g, cni_net, cnc_net, cfg, rng
        self.problem = cfg.problem
        self.P = cfg.population
        self.n_pat = cfg.patience_for(g.n)
        self.k_sel = cfg.k_select or (cnc.k_max_of(cnc_net) if cnc_net is not None else DEFAULT_K)
        self.cnc_calls = 0
        self.events = []
        self.history = [] if keep_history else None
        if cfg.mode == LEVEL1_MEM:
            self.mems = [SharedMemory(g.n, cfg.memory_capacity) for _ in range(self.P)]
        else:
            self.mems = [SharedMemory(g.n, cfg.memory_capacity)]
        self.trace = None
        self.t0 = time.perf_counter()

    # -- helpers ---------------------------------------------------------------
    def construct(self, cond, omega, count):
        self.cnc_calls += count
        return cnc.cnc_construct(self.cnc_net, self.g, cond, omega, self.rng, self.problem,
                                 self.cfg.cnc_mode, count=count)[0]

    def write(self, i, s, f):
        mem = self.mems[i] if len(self.mems) > 1 else self.mems[0]
        mem.insert(s, f)
        if self.history is not None:
            self.history.append(s.copy())

    def omega(self, t):
        cfg = self.cfg
        if cfg.time_budget > 0:
            return cnc.omega_schedule(self.elapsed(), cfg.time_budget, cfg.omega_start, cfg.phi)
        return cnc.omega_schedule(t, max(cfg.steps, 1), cfg.omega_start, cfg.phi)

    def elapsed(self):
        return time.perf_counter() - self.t0

    def record(self, st):
        self.trace.record(st.t, self.elapsed(), st.star, float(st.f.mean()),
                          population_diversity(st.S))

    # -- phases ----------------------------------------------------------------
    def initialize(self):
        g, cfg, P = self.g, self.cfg, self.P
        if cfg.init == INIT_RANDOM:
            S = pr.random_solutions(g, self.problem, self.rng, P)
        else:
            made = []
            k_max = cnc.k_max_of(self.cnc_net)
            for i in range(P):
                omega = 0.5 * i / (P - 1) if P > 1 else 0.0
                cond = np.array(made[-k_max:], dtype=np.uint8).reshape(-1, g.n)
                made.append(self.construct(cond, omega, 1)[0])
            S = np.stack(made)
        f = pr.objective(g, S, self.problem).astype(np.float64)
        for i in range(P):
            self.write(i, S[i], f[i])
        top = int(np.argmax(f))
        return PopulationState(
            S=S, f=f, best=f.copy(), best_bits=S.copy(), current_best=f.copy(),
            current_best_bits=S.copy(), patience=np.zeros(P, dtype=np.int64),
            restarts=np.zeros(P, dtype=np.int64), star_bits=S[top].copy(), star=float(f[top]))

    def improve(self, st, idx):
        """Improvement moves for individuals ``idx`` against the snapshot."""
        cfg = self.cfg
        if len(self.mems) == 1:
            Z = self.mems[0].knn(st.S[idx], cfg.knn_k, cfg.eps)[0]
        else:
            Z = np.stack([self.mems[i].knn(st.S[i][None], cfg.knn_k, cfg.eps)[0][0] for i in idx])
        return policy_moves(self.cni, self.g, st.S[idx], Z, self.problem, self.rng, cfg.cni_mode)[0]

    def restart(self, st, idx, t):
        cfg, g = self.cfg, self.g
        if cfg.mode == RANDOM_RESTARTS:
            return pr.random_solutions(g, self.problem, self.rng, len(idx))
        omega = self.omega(t)
        if cfg.mode == LEVEL1_MEM:
            out = []
            for i in idx:
                cond = select_k(self.mems[i], cfg.select_k, self.k_sel,
                                st.best_bits[i][None], st.current_best_bits[i][None])
                out.append(self.construct(cond, omega, 1)[0])
            return np.stack(out)
        cond = select_k(self.mems[0], cfg.select_k, self.k_sel, st.best_bits, st.current_best_bits)
        cond = cond[-cnc.k_max_of(self.cnc_net):]
        return self.construct(cond, omega, len(idx))

    def step(self, st, t):
        P = self.P
        new = st.S.copy()
        if self.cfg.mode == CNC_POP:
            cond = st.S[-cnc.k_max_of(self.cnc_net):]
            new = self.construct(cond, self.omega(t), P)
            restart = np.ones(P, dtype=bool)
        else:
            restart = st.patience >= self.n_pat
            if self.cfg.mode == CNI_ONLY:
                restart[:] = False
            imp = np.flatnonzero(~restart)
            rs = np.flatnonzero(restart)
            if len(imp):
                new[imp] = self.improve(st, imp)
            if len(rs):
                new[rs] = self.restart(st, rs, t)
                for i in rs:
                    self.events.append((t, int(i)))
        f_new = pr.objective(self.g, new, self.problem).astype(np.float64)
        # barrier: bookkeeping, memory writes and s* in individual order
        for i in range(P):
            if restart[i] and self.cfg.mode != CNC_POP:
                st.restarts[i] += 1
                st.patience[i] = 0
                st.current_best[i] = f_new[i]
                st.current_best_bits[i] = new[i]
                if f_new[i] > st.best[i]:
                    st.best[i] = f_new[i]
                    st.best_bits[i] = new[i]
            else:
                if f_new[i] > st.best[i]:
                    st.best[i] = f_new[i]
                    st.best_bits[i] = new[i]
                    st.patience[i] = 0
                else:
                    st.patience[i] += 1
                if f_new[i] > st.current_best[i]:
                    st.current_best[i] = f_new[i]
                    st.current_best_bits[i] = new[i]
            self.write(i, new[i], f_new[i])
            if f_new[i] > st.star:
                st.star = float(f_new[i])
                st.star_bits = new[i].copy()
        st.S = new
        st.f = f_new
        st.t = t + 1

    def run(self, reference=None):
        cfg = self.cfg
        self.trace = AnytimeTrace(reference)
        st = self.initialize()
        self.record(st)
        t = 0
        while True:
            if cfg.time_budget > 0:
                if self.elapsed() >= cfg.time_budget or (cfg.steps and t >= cfg.steps):
                    break
            elif t >= cfg.steps:
                break
            if not math.isnan(cfg.target) and st.star >= cfg.target - 1e-9:
                break
            self.step(st, t)
            self.record(st)
            t += 1
        return SearchResult(bits=st.star_bits.copy(), objective=st.star, trace=self.trace,
                            state=st, restart_events=self.events, cnc_calls=self.cnc_calls,
                            history=self.history or [])


def pbnco_run(g, cni_net, cnc_net, config=None, rng=None, reference=None, keep_history=False):
    """Run the population search; returns a :class:`SearchResult`.

    ``result.bits`` is the best solution ever produced and ``result.trace`` the
    best-so-far curve, one row per population step plus the initial row.
    """
    cfg = config or SearchConfig()
    rng = np.random.default_rng(cfg.seed) if rng is None else rng
    return _Search(g, cni_net, cnc_net, cfg, rng, keep_history).run(reference)
