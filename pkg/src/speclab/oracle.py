"""Ground-truth computations at tiny scale.

Everything here is an independent re-implementation of the verification
semantics: the event tree walks the verifier's control flow symbolically,
integrating over the uniform draws with closed-form branch probabilities and
over draft tuples by exhaustive enumeration. It shares only the probability
primitives with the rest of the package, never the verifier code, so
agreement between the two is evidence rather than tautology.

The reports check three closed forms against the enumerated tree:

* the block-level acceptance-mass identity per sub-block,
* the expected-acceptance-length bound (equality claimed for the verifier),
* preservation of the target chain by the full output (block, extra token,
  modified-target completion), over one or two decoding iterations.
"""

from __future__ import annotations

import itertools
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .models import ModelPair
from .probability import LOG_ZERO

MAX_ENUM = 1_000_000
PRUNE = 1e-15


class TooLarge(ValueError):
    """Instance exceeds the exhaustive-enumeration guard."""


Cond = Callable[[tuple[int, ...]], np.ndarray]


class _RawChain:
    """Conditional provider for a Markov model from a fixed base context."""

    def __init__(self, model, temperature: float, context: tuple[int, ...]):
        self.model = model
        self.temperature = temperature
        self.context = tuple(context)
        self._memo: dict[tuple[int, ...], np.ndarray] = {}

    def cond(self, ctx: tuple[int, ...]) -> np.ndarray:
        hit = self._memo.get(ctx)
        if hit is None:
            hit = self.model.conditional(self.context + ctx, self.temperature).mass
            self._memo[ctx] = hit
        return hit


class _ModChain:
    """Modified target chain: surplus-weighted conditionals for the first
    ``horizon`` positions after ``prefix``, base conditionals beyond."""

    def __init__(self, base_q, base_p, K: int, prefix: tuple[int, ...], horizon: int):
        self.base_q = base_q
        self.base_p = base_p
        self.K = K
        self.prefix = tuple(prefix)
        self.horizon = max(horizon, 0)
        self._memo: dict[tuple[int, ...], np.ndarray] = {}
        self._joints: dict[tuple[int, ...], tuple[float, float]] = {}
        self.fallbacks = 0

    def _joint(self, ctx: tuple[int, ...]) -> tuple[float, float]:
        if ctx in self._joints:
            return self._joints[ctx]
        if not ctx:
            lp = _log_chain_joint(self.base_p.cond, self.prefix)
            lq = _log_chain_joint(self.base_q.cond, self.prefix)
        else:
            lp, lq = self._joint(ctx[:-1])
            tok = ctx[-1]
            pv = float(self.base_p.cond(self.prefix + ctx[:-1])[tok])
            qv = float(self.base_q.cond(self.prefix + ctx[:-1])[tok])
            lp = lp + math.log(pv) if lp != LOG_ZERO and pv > 0 else LOG_ZERO
            lq = lq + math.log(qv) if lq != LOG_ZERO and qv > 0 else LOG_ZERO
        self._joints[ctx] = (lp, lq)
        return lp, lq

    def cond(self, ctx: tuple[int, ...]) -> np.ndarray:
        hit = self._memo.get(ctx)
        if hit is not None:
            return hit
        qn = self.base_q.cond(self.prefix + ctx)
        if len(ctx) + 1 > self.horizon:
            self._memo[ctx] = qn
            return qn
        lp, lq = self._joint(ctx)
        if lq == LOG_ZERO:
            self.fallbacks += 1
            self._memo[ctx] = qn
            return qn
        pn = self.base_p.cond(self.prefix + ctx)
        r = 0.0 if lp == LOG_ZERO else math.exp(min(lp - lq, 700.0))
        w = _surplus_weights(r, pn, qn, self.K)
        s = float(w.sum())
        if s <= 0.0:
            self.fallbacks += 1
            self._memo[ctx] = qn
            return qn
        out = w / s
        self._memo[ctx] = out
        return out


def _log_chain_joint(cond: Cond, seq: Sequence[int]) -> float:
    lp = 0.0
    ctx: tuple[int, ...] = ()
    for tok in seq:
        v = float(cond(ctx)[tok])
        if v <= 0.0:
            return LOG_ZERO
        lp += math.log(v)
        ctx = ctx + (int(tok),)
    return lp


def _surplus_weights(ratio: float, pn: np.ndarray, qn: np.ndarray, K: int) -> np.ndarray:
    """Weights q(.|ctx) * (1 - min(joint ratio extended by the next token, 1))^K."""
    m = np.where(qn > 0.0, np.minimum(ratio * pn / np.where(qn > 0.0, qn, 1.0), 1.0), 1.0)
    return qn * (1.0 - m) ** K


@dataclass
class _Instance:
    """Joint tables and acceptance probabilities for one (p-chain, q-chain, L, K)."""

    pchain: object
    qchain: object
    V: int
    L: int
    K: int
    pj: dict = field(default_factory=dict)
    qj: dict = field(default_factory=dict)
    h_part: dict = field(default_factory=dict)
    h_full: dict = field(default_factory=dict)

    def joints(self, blk: tuple[int, ...]) -> tuple[float, float]:
        if blk in self.pj:
            return self.pj[blk], self.qj[blk]
        if not blk:
            self.pj[blk], self.qj[blk] = 1.0, 1.0
            return 1.0, 1.0
        pp, qp = self.joints(blk[:-1])
        tok = blk[-1]
        p = pp * float(self.pchain.cond(blk[:-1])[tok])
        q = qp * float(self.qchain.cond(blk[:-1])[tok])
        self.pj[blk], self.qj[blk] = p, q
        return p, q

    def accept_mass(self, blk: tuple[int, ...]) -> float:
        """q(blk) * (1 - (1 - min(p/q, 1))^K): the claimed acceptance mass."""
        p, q = self.joints(blk)
        if q <= 0.0:
            return 0.0
        s = min(p / q, 1.0)
        return q * (1.0 - (1.0 - s) ** self.K)

    def h_partial(self, blk: tuple[int, ...]) -> float:
        if blk in self.h_part:
            return self.h_part[blk]
        pj, qj = self.joints(blk)
        pn = self.pchain.cond(blk)
        qn = self.qchain.cond(blk)
        pe = pj * pn
        qe = qj * qn
        m = np.where(qe > 0.0, np.minimum(pe / np.where(qe > 0.0, qe, 1.0), 1.0), 1.0)
        S = float((qe * (1.0 - m) ** self.K).sum())
        mi = min(pj / qj, 1.0) if qj > 0.0 else 1.0
        num = S - qj * (1.0 - mi) ** self.K
        den = 1.0 - (1.0 - pj) ** self.K - qj + S
        if abs(den) < 1e-15:
            h = 1.0 if qj > pj else 0.0
        else:
            h = min(1.0, max(0.0, num / den))
        self.h_part[blk] = h
        return h

    def h_fullblock(self, blk: tuple[int, ...]) -> float:
        if blk in self.h_full:
            return self.h_full[blk]
        pj, qj = self.joints(blk)
        den = 1.0 - (1.0 - pj) ** self.K
        if den < 1e-15 or qj <= 0.0:
            h = 0.0
        else:
            s = min(pj / qj, 1.0)
            h = min(1.0, qj * (1.0 - (1.0 - s) ** self.K) / den)
        self.h_full[blk] = h
        return h

    def residual(self, blk: tuple[int, ...]) -> np.ndarray | None:
        """Replacement-token law at a stopped prefix, or None when the
        surplus is empty and the raw conditional fallback applies."""
        pj, qj = self.joints(blk)
        qn = self.qchain.cond(blk)
        if qj <= 0.0:
            return None
        pn = self.pchain.cond(blk)
        w = _surplus_weights(pj / qj, pn, qn, self.K)
        s = float(w.sum())
        if s <= 0.0:
            return None
        return w / s


def _walk_tuple(inst: _Instance, rows: tuple[tuple[int, ...], ...]) -> tuple[dict, float, float]:
    """Integrate the verifier's control flow over its uniform draws for one
    draft tuple. Returns leaf masses keyed by (tau, accepted block), the
    pruned probability mass, and the leaf-mass total."""
    K, L = inst.K, inst.L
    leaves: dict[tuple[int, tuple[int, ...]], float] = {}
    dropped = 0.0
    total = 0.0
    # state: (row index, next length to test, tau, winning row, rejected set, prob)
    stack = [(0, 1, 0, 0, frozenset(), 1.0)]
    while stack:
        k, i, tau, f, H, pr = stack.pop()
        if pr < PRUNE:
            dropped += pr
            continue
        if k == K:
            key = (tau, rows[f][:tau])
            leaves[key] = leaves.get(key, 0.0) + pr
            total += pr
            continue
        row = rows[k]
        if i <= L - 1:
            sub = row[:i]
            if sub in H:
                stack.append((k, i + 1, tau, f, H, pr))
                continue
            h = inst.h_partial(sub)
            if h > 0.0:
                stack.append((k, i + 1, i, k, H, pr * h))
            if h < 1.0:
                stack.append((k, i + 1, tau, f, H | {sub}, pr * (1.0 - h)))
            continue
        if row in H:
            stack.append((k + 1, tau + 1, tau, f, H, pr))
            continue
        h = inst.h_fullblock(row)
        if h > 0.0:
            key = (L, row)
            leaves[key] = leaves.get(key, 0.0) + pr * h
            total += pr * h
        if h < 1.0:
            stack.append((k + 1, tau + 1, tau, f, H | {row}, pr * (1.0 - h)))
    return leaves, dropped, total


def _enumerate_leaves(inst: _Instance) -> tuple[dict, dict]:
    """Leaf masses over all draft tuples, weighted by the draft product law."""
    V, L, K = inst.V, inst.L, inst.K
    if V ** (K * L) > MAX_ENUM:
        raise TooLarge(f"V^(K*L) = {V ** (K * L)} exceeds {MAX_ENUM}")
    blocks = list(itertools.product(range(V), repeat=L))
    weights = {}
    for b in blocks:
        weights[b] = inst.joints(b)[0]
    leaves: dict[tuple[int, tuple[int, ...]], float] = {}
    max_leafsum_err = 0.0
    dropped_total = 0.0
    tuples_seen = 0
    for rows in itertools.product(blocks, repeat=K):
        w = 1.0
        for r in rows:
            w *= weights[r]
        if w <= 0.0:
            continue
        tuples_seen += 1
        tuple_leaves, dropped, total = _walk_tuple(inst, rows)
        max_leafsum_err = max(max_leafsum_err, abs(total + dropped - 1.0))
        dropped_total += w * dropped
        for key, pr in tuple_leaves.items():
            leaves[key] = leaves.get(key, 0.0) + w * pr
    diag = {
        "tuples": tuples_seen,
        "leaf_states": len(leaves),
        "max_leafsum_err": max_leafsum_err,
        "dropped_mass": dropped_total,
    }
    return leaves, diag


def _gbv_alpha(inst: _Instance, blk: tuple[int, ...]) -> float:
    """Single-draft whole-block acceptance from the likelihood-ratio chain."""
    pj, qj = inst.joints(blk)
    nu = float("inf") if pj <= 0.0 else qj / pj
    if len(blk) == inst.L:
        return min(1.0, nu)
    pn = inst.pchain.cond(blk)
    qn = inst.qchain.cond(blk)
    if math.isinf(nu):
        return 1.0
    num = float(np.maximum(nu * qn - pn, 0.0).sum())
    den = float(np.maximum(pn - nu * qn, 0.0).sum())
    if den < 1e-15:
        return 1.0 if nu > 1.0 else 0.0
    return min(1.0, max(0.0, num / den))


def _enumerate_gbv_leaves(inst: _Instance) -> dict:
    """Independent-draw single-row block verification, enumerated exactly."""
    V, L = inst.V, inst.L
    if V**L > MAX_ENUM:
        raise TooLarge(f"V^L = {V ** L} exceeds {MAX_ENUM}")
    leaves: dict[tuple[int, tuple[int, ...]], float] = {}
    for row in itertools.product(range(V), repeat=L):
        w = inst.joints(row)[0]
        if w <= 0.0:
            continue
        # branch over the L independent accept draws; tau = longest accepted
        states = {0: 1.0}
        for i in range(1, L + 1):
            a = _gbv_alpha(inst, row[:i])
            new: dict[int, float] = {}
            for tau, pr in states.items():
                if a > 0.0:
                    new[i] = new.get(i, 0.0) + pr * a
                if a < 1.0:
                    new[tau] = new.get(tau, 0.0) + pr * (1.0 - a)
            states = new
        for tau, pr in states.items():
            key = (tau, row[:tau])
            leaves[key] = leaves.get(key, 0.0) + w * pr
    return leaves


def _output_joint(
    inst: _Instance, leaves: dict, depth: int
) -> tuple[dict[tuple[int, ...], float], float]:
    """Exact law of the completed output prefix at ``depth`` tokens.

    Each leaf contributes its block, then the extra token, then tokens from
    the modified target chain. Returns the joint table and the probability
    mass that flowed through raw-conditional fallbacks.
    """
    out: dict[tuple[int, ...], float] = {}
    fallback_mass = 0.0
    for (tau, t), mass in leaves.items():
        if mass <= 0.0:
            continue
        if tau == inst.L:
            prefix = t[:depth]
            if len(t) >= depth:
                out[prefix] = out.get(prefix, 0.0) + mass
                continue
            ydist = inst.qchain.cond(t)
            start_need = depth - len(t) - 1
        else:
            ydist = inst.residual(t)
            if ydist is None:
                ydist = inst.qchain.cond(t)
                fallback_mass += mass
            start_need = depth - len(t) - 1
        for y, py in enumerate(ydist):
            if py <= 0.0:
                continue
            m0 = mass * float(py)
            base = t + (int(y),)
            if start_need <= 0:
                key = base[:depth]
                out[key] = out.get(key, 0.0) + m0
                continue
            mod = _ModChain(inst.qchain, inst.pchain, inst.K, base, inst.L - tau - 1)
            frontier = [((), m0)]
            for _ in range(start_need):
                nxt = []
                for ctx, m in frontier:
                    before = mod.fallbacks
                    c = mod.cond(ctx)
                    if mod.fallbacks > before:
                        fallback_mass += m
                    for x, px in enumerate(c):
                        if px > 0.0:
                            nxt.append((ctx + (x,), m * float(px)))
                frontier = nxt
            for ctx, m in frontier:
                key = base + ctx
                out[key] = out.get(key, 0.0) + m
    return out, fallback_mass


@dataclass
class ExactReport:
    """Everything the exact enumeration learned about one instance."""

    vocab_size: int
    L: int
    K: int
    iterations: int
    expected_tau: float
    bound: float
    max_marginal_dev: float
    lemma_max_dev: float
    max_marginal_dev_two_iter: float | None
    marginal_sums_max_err: float
    leaf_states: int
    tuples: int
    max_leafsum_err: float
    dropped_mass: float
    fallback_mass: float
    runtime_s: float
    subblock_marginals: dict = field(repr=False, default_factory=dict)
    lemma_masses: dict = field(repr=False, default_factory=dict)
    leaves: dict = field(repr=False, default_factory=dict)

    def to_jsonable(self) -> dict:
        return {
            "vocab_size": self.vocab_size,
            "L": self.L,
            "K": self.K,
            "iterations": self.iterations,
            "expected_tau": self.expected_tau,
            "bound": self.bound,
            "max_marginal_dev": self.max_marginal_dev,
            "lemma_max_dev": self.lemma_max_dev,
            "max_marginal_dev_two_iter": self.max_marginal_dev_two_iter,
            "marginal_sums_max_err": self.marginal_sums_max_err,
            "leaf_states": self.leaf_states,
            "tuples": self.tuples,
            "max_leafsum_err": self.max_leafsum_err,
            "dropped_mass": self.dropped_mass,
            "fallback_mass": self.fallback_mass,
            "runtime_s": self.runtime_s,
        }


def _instance(pair: ModelPair, L: int, K: int, context: tuple[int, ...] = ()) -> _Instance:
    p = _RawChain(pair.draft, pair.temperature, context)
    q = _RawChain(pair.target, pair.temperature, context)
    return _Instance(p, q, pair.vocab_size, L, K)


def bound_K(pair: ModelPair, L: int, K: int, context: tuple[int, ...] = ()) -> float:
    """Sum of claimed acceptance masses over all sub-blocks up to length L."""
    V = pair.vocab_size
    if V**L > MAX_ENUM:
        raise TooLarge(f"V^L = {V ** L} exceeds {MAX_ENUM}")
    inst = _instance(pair, L, K, context)
    total = 0.0
    for i in range(1, L + 1):
        total += sum(inst.accept_mass(blk) for blk in itertools.product(range(V), repeat=i))
    return total


def gbv_block_sum(pair: ModelPair, L: int, context: tuple[int, ...] = ()) -> float:
    """Sum over sub-blocks of min(draft joint, target joint); the K = 1 bound."""
    V = pair.vocab_size
    if V**L > MAX_ENUM:
        raise TooLarge(f"V^L = {V ** L} exceeds {MAX_ENUM}")
    inst = _instance(pair, L, 1, context)
    total = 0.0
    for i in range(1, L + 1):
        for blk in itertools.product(range(V), repeat=i):
            p, q = inst.joints(blk)
            total += min(p, q)
    return total


def bound_properties(pair: ModelPair, L: int, K_list: Sequence[int], context: tuple[int, ...] = ()) -> dict:
    """Bound values along K_list with monotonicity and convergence checks."""
    values = [bound_K(pair, L, K, context) for K in K_list]
    # strict in exact arithmetic whenever the models differ; in float64 the
    # bound saturates at L once the gap drops below machine resolution
    strict = all(b > a or L - a < 1e-12 for a, b in zip(values, values[1:]))
    return {
        "K_list": list(K_list),
        "bounds": values,
        "strictly_increasing": strict,
        "final_gap_to_L": L - values[-1],
        "gaps_decreasing": all(
            (L - b) <= (L - a) + 1e-15 for a, b in zip(values, values[1:])
        ),
        "all_below_L": all(v <= L + 1e-12 for v in values),
    }


def exact_expected_tau(pair: ModelPair, L: int, K: int, context: tuple[int, ...] = ()) -> float:
    """E[tau] integrated exactly over draft tuples and uniform draws."""
    inst = _instance(pair, L, K, context)
    leaves, _ = _enumerate_leaves(inst)
    return sum(tau * m for (tau, _t), m in leaves.items())


def _lemma_table(inst: _Instance, leaves: dict) -> tuple[dict, float]:
    """Accepted-prefix masses from the tree against the closed form."""
    acc: dict[tuple[int, ...], float] = {}
    for (tau, t), m in leaves.items():
        for i in range(1, tau + 1):
            acc[t[:i]] = acc.get(t[:i], 0.0) + m
    max_dev = 0.0
    table = {}
    for i in range(1, inst.L + 1):
        for blk in itertools.product(range(inst.V), repeat=i):
            claimed = inst.accept_mass(blk)
            got = acc.get(blk, 0.0)
            table[blk] = (got, claimed)
            max_dev = max(max_dev, abs(got - claimed))
    return table, max_dev


def _marginal_devs(inst: _Instance, out: dict, depth: int, qchain) -> tuple[dict, float, float]:
    """Prefix marginals of the output law against the target chain."""
    marg: dict[tuple[int, ...], float] = {}
    for seq, m in out.items():
        for i in range(1, depth + 1):
            marg[seq[:i]] = marg.get(seq[:i], 0.0) + m
    max_dev = 0.0
    sums_err = 0.0
    for i in range(1, depth + 1):
        level = 0.0
        for blk in itertools.product(range(inst.V), repeat=i):
            qv = math.exp(_log_chain_joint(qchain.cond, blk))
            got = marg.get(blk, 0.0)
            max_dev = max(max_dev, abs(got - qv))
            level += got
        sums_err = max(sums_err, abs(level - 1.0))
    return marg, max_dev, sums_err


def exact_output_distribution(
    pair: ModelPair, L: int, K: int, iterations: int = 1, context: tuple[int, ...] = ()
) -> ExactReport:
    """Full exact report for one instance; iterations=2 also threads the
    modified target through a second drafting/verification round."""
    if iterations not in (1, 2):
        raise ValueError("iterations must be 1 or 2")
    t0 = time.perf_counter()
    inst = _instance(pair, L, K, context)
    leaves, diag = _enumerate_leaves(inst)
    expected_tau = sum(tau * m for (tau, _t), m in leaves.items())
    bound = bound_K(pair, L, K, context)
    lemma_masses, lemma_dev = _lemma_table(inst, leaves)
    out, fallback_mass = _output_joint(inst, leaves, L)
    marg, max_dev, sums_err = _marginal_devs(inst, out, L, inst.qchain)
    two_iter_dev = None
    if iterations == 2:
        two_iter_dev, fb2 = _two_iteration_dev(pair, L, K, context)
        fallback_mass += fb2
    return ExactReport(
        vocab_size=pair.vocab_size,
        L=L,
        K=K,
        iterations=iterations,
        expected_tau=expected_tau,
        bound=bound,
        max_marginal_dev=max_dev,
        lemma_max_dev=lemma_dev,
        max_marginal_dev_two_iter=two_iter_dev,
        marginal_sums_max_err=sums_err,
        leaf_states=diag["leaf_states"],
        tuples=diag["tuples"],
        max_leafsum_err=diag["max_leafsum_err"],
        dropped_mass=diag["dropped_mass"],
        fallback_mass=fallback_mass,
        runtime_s=time.perf_counter() - t0,
        subblock_marginals=marg,
        lemma_masses=lemma_masses,
        leaves=leaves,
    )


def _two_iteration_dev(
    pair: ModelPair, L: int, K: int, context: tuple[int, ...]
) -> tuple[float, float]:
    """Max deviation of the two-iteration completed output from the target
    chain at depth 2(L+1)."""
    depth = 2 * (L + 1)
    V = pair.vocab_size
    if V**depth > MAX_ENUM or (V ** (K * L)) ** 1 > MAX_ENUM:
        raise TooLarge("two-iteration enumeration exceeds the guard")
    p1 = _RawChain(pair.draft, pair.temperature, context)
    q1 = _RawChain(pair.target, pair.temperature, context)
    inst1 = _Instance(p1, q1, V, L, K)
    leaves1, _ = _enumerate_leaves(inst1)
    out: dict[tuple[int, ...], float] = {}
    fallback = 0.0
    for (tau1, t1), m1 in leaves1.items():
        if m1 <= 0.0:
            continue
        if tau1 == L:
            ydist = inst1.qchain.cond(t1)
        else:
            yd = inst1.residual(t1)
            if yd is None:
                ydist = inst1.qchain.cond(t1)
                fallback += m1
            else:
                ydist = yd
        for y1, py1 in enumerate(ydist):
            if py1 <= 0.0:
                continue
            prefix1 = t1 + (int(y1),)
            q2 = _ModChain(q1, p1, K, prefix1, L - tau1 - 1)
            p2 = _RawChain(pair.draft, pair.temperature, tuple(context) + prefix1)
            inst2 = _Instance(p2, q2, V, L, K)
            leaves2, _ = _enumerate_leaves(inst2)
            for (tau2, t2), m2 in leaves2.items():
                if m2 <= 0.0:
                    continue
                if tau2 == L:
                    y2dist = inst2.qchain.cond(t2)
                else:
                    y2d = inst2.residual(t2)
                    if y2d is None:
                        y2dist = inst2.qchain.cond(t2)
                        fallback += m1 * float(py1) * m2
                    else:
                        y2dist = y2d
                for y2, py2 in enumerate(y2dist):
                    if py2 <= 0.0:
                        continue
                    base = prefix1 + t2 + (int(y2),)
                    mass = m1 * float(py1) * m2 * float(py2)
                    need = depth - len(base)
                    if need <= 0:
                        key = base[:depth]
                        out[key] = out.get(key, 0.0) + mass
                        continue
                    q3 = _ModChain(q2, p2, K, t2 + (int(y2),), L - tau2 - 1)
                    frontier = [((), mass)]
                    for _ in range(need):
                        nxt = []
                        for ctx, m in frontier:
                            before = q3.fallbacks
                            c = q3.cond(ctx)
                            if q3.fallbacks > before:
                                fallback += m
                            for x, px in enumerate(c):
                                if px > 0.0:
                                    nxt.append((ctx + (x,), m * float(px)))
                        frontier = nxt
                    for ctx, m in frontier:
                        key = base + ctx
                        out[key] = out.get(key, 0.0) + m
    qref = _RawChain(pair.target, pair.temperature, context)
    max_dev = 0.0
    for blk in itertools.product(range(V), repeat=depth):
        qv = math.exp(_log_chain_joint(qref.cond, blk))
        max_dev = max(max_dev, abs(out.get(blk, 0.0) - qv))
    return max_dev, fallback


def gbv_exact_report(pair: ModelPair, L: int, context: tuple[int, ...] = ()) -> ExactReport:
    """Exact report for single-draft block verification (the K = 1 tree)."""
    t0 = time.perf_counter()
    inst = _instance(pair, L, 1, context)
    leaves = _enumerate_gbv_leaves(inst)
    expected_tau = sum(tau * m for (tau, _t), m in leaves.items())
    bound = bound_K(pair, L, 1, context)
    lemma_masses, lemma_dev = _lemma_table(inst, leaves)
    out, fallback_mass = _output_joint(inst, leaves, L)
    marg, max_dev, sums_err = _marginal_devs(inst, out, L, inst.qchain)
    return ExactReport(
        vocab_size=pair.vocab_size,
        L=L,
        K=1,
        iterations=1,
        expected_tau=expected_tau,
        bound=bound,
        max_marginal_dev=max_dev,
        lemma_max_dev=lemma_dev,
        max_marginal_dev_two_iter=None,
        marginal_sums_max_err=sums_err,
        leaf_states=len(leaves),
        tuples=pair.vocab_size**L,
        max_leafsum_err=0.0,
        dropped_mass=0.0,
        fallback_mass=fallback_mass,
        runtime_s=time.perf_counter() - t0,
        subblock_marginals=marg,
        lemma_masses=lemma_masses,
        leaves=leaves,
    )
