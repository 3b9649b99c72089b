"""Discrete HMMs: scaled forward, Viterbi, Baum-Welch and catalog-built model banks."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from gahmm.ontology import Catalog

STOCHASTIC_TOL = 1e-9
DEFAULT_ALPHA = 0.1
DEFAULT_BETA = 0.6


@dataclass(frozen=True, eq=False)
class HmmModel:
    """(A, B, pi) over `M` symbols with `N` hidden states."""

    A: np.ndarray
    B: np.ndarray
    pi: np.ndarray
    state_labels: tuple[str, ...] = ()

    def __post_init__(self):
        A = np.array(self.A, dtype=float)
        B = np.array(self.B, dtype=float)
        pi = np.array(self.pi, dtype=float)
        n = pi.shape[0] if pi.ndim == 1 else -1
        if n < 1 or A.shape != (n, n) or B.ndim != 2 or B.shape[0] != n:
            raise ValueError(f"inconsistent shapes A{A.shape} B{B.shape} pi{pi.shape}")
        if B.shape[1] < 2:
            raise ValueError("emission alphabet needs at least two symbols")
        for name, m in (("A", A), ("B", B), ("pi", pi[None, :])):
            if (m < 0).any() or not np.allclose(m.sum(axis=1), 1.0, rtol=0, atol=STOCHASTIC_TOL):
                raise ValueError(f"{name} is not row-stochastic")
        labels = tuple(self.state_labels) or tuple(str(i) for i in range(n))
        if len(labels) != n:
            raise ValueError(f"{len(labels)} state labels for {n} states")
        for m in (A, B, pi):
            m.setflags(write=False)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "pi", pi)
        object.__setattr__(self, "state_labels", labels)

    @property
    def N(self) -> int:
        return self.A.shape[0]

    @property
    def M(self) -> int:
        return self.B.shape[1]

    def allclose(self, other: "HmmModel", atol: float = 1e-9) -> bool:
        return all(np.allclose(x, y, rtol=0, atol=atol)
                   for x, y in ((self.A, other.A), (self.B, other.B), (self.pi, other.pi)))


def _check_codes(model: HmmModel, codes: Sequence[int]) -> np.ndarray:
    obs = np.asarray(codes, dtype=np.int64)
    if obs.ndim != 1 or obs.size == 0:
        raise ValueError("observation sequence must be a nonempty list of codes")
    if obs.min() < 0 or obs.max() >= model.M:
        raise ValueError(f"observation code outside 0..{model.M - 1}")
    return obs


def _forward_scaled(model: HmmModel, obs: np.ndarray):
    """Scaled forward pass. Returns (alpha_hat, scales); a zero scale means P = 0."""
    T = obs.size
    alpha = np.zeros((T, model.N))
    scales = np.zeros(T)
    a = model.pi * model.B[:, obs[0]]
    for t in range(T):
        if t:
            a = (alpha[t - 1] @ model.A) * model.B[:, obs[t]]
        c = a.sum()
        scales[t] = c
        if c == 0.0:
            return alpha, scales
        alpha[t] = a / c
    return alpha, scales


def forward_log_likelihood(model: HmmModel, codes: Sequence[int]) -> float:
    obs = _check_codes(model, codes)
    _, scales = _forward_scaled(model, obs)
    if (scales == 0.0).any():
        return -math.inf
    return float(np.log(scales).sum())


def _log(x: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return np.log(x)


def viterbi(model: HmmModel, codes: Sequence[int]) -> tuple[list[int], float]:
    """Most likely state path and its joint log probability.

    Ties go to the lower state index, both for the final state and for
    back-pointers.
    """
    obs = _check_codes(model, codes)
    logA, logB = _log(model.A), _log(model.B)
    T, N = obs.size, model.N
    delta = _log(model.pi) + logB[:, obs[0]]
    back = np.zeros((T, N), dtype=np.int64)
    for t in range(1, T):
        cand = delta[:, None] + logA
        back[t] = np.argmax(cand, axis=0)
        delta = cand[back[t], np.arange(N)] + logB[:, obs[t]]
    last = int(np.argmax(delta))
    score = float(delta[last])
    path = [last]
    for t in range(T - 1, 0, -1):
        path.append(int(back[t][path[-1]]))
    path.reverse()
    return path, score


def best_possible_log_likelihood(model: HmmModel, length: int) -> float:
    """max over state paths and symbol sequences of log P(path, sequence)."""
    logA = _log(model.A)
    best_emit = _log(model.B.max(axis=1))
    delta = _log(model.pi) + best_emit
    for _ in range(1, length):
        delta = (delta[:, None] + logA).max(axis=0) + best_emit
    return float(delta.max())


def uniform_floor(M: int, length: int) -> float:
    """Log-likelihood of a length-`length` window under uniform emissions over M symbols."""
    return -length * math.log(M)


def _backward_scaled(model: HmmModel, obs: np.ndarray, scales: np.ndarray) -> np.ndarray:
    T = obs.size
    beta = np.zeros((T, model.N))
    beta[-1] = 1.0
    for t in range(T - 2, -1, -1):
        beta[t] = model.A @ (model.B[:, obs[t + 1]] * beta[t + 1]) / scales[t + 1]
    return beta


def _reestimate(model: HmmModel, seqs: list[np.ndarray]) -> tuple[HmmModel, float]:
    N, M = model.N, model.M
    pi_acc = np.zeros(N)
    xi_acc = np.zeros((N, N))
    gamma_acc = np.zeros(N)
    emit_acc = np.zeros((N, M))
    total = 0.0
    for obs in seqs:
        alpha, scales = _forward_scaled(model, obs)
        if (scales == 0.0).any():
            raise ValueError("a training sequence has zero probability under the model")
        total += float(np.log(scales).sum())
        beta = _backward_scaled(model, obs, scales)
        gamma = alpha * beta
        pi_acc += gamma[0]
        for t in range(obs.size - 1):
            xi = alpha[t][:, None] * model.A * (model.B[:, obs[t + 1]] * beta[t + 1])[None, :]
            xi_acc += xi / scales[t + 1]
        gamma_acc += gamma[:-1].sum(axis=0)
        np.add.at(emit_acc.T, obs, gamma)

    pi = pi_acc / pi_acc.sum()
    A = np.array(model.A)
    rows = gamma_acc > 0
    A[rows] = xi_acc[rows] / xi_acc[rows].sum(axis=1, keepdims=True)
    B = np.array(model.B)
    emit_rows = emit_acc.sum(axis=1) > 0
    B[emit_rows] = emit_acc[emit_rows] / emit_acc[emit_rows].sum(axis=1, keepdims=True)
    return HmmModel(A, B, pi, model.state_labels), total


def total_log_likelihood(model: HmmModel, sequences: Sequence[Sequence[int]]) -> float:
    return sum(forward_log_likelihood(model, s) for s in sequences)


def baum_welch(model: HmmModel, sequences: Sequence[Sequence[int]], max_iter: int = 100,
               tol: float = 1e-6, history: list[float] | None = None) -> HmmModel:
    """EM refinement of all of A, B and pi.

    Runs at most `max_iter` re-estimation steps, stopping early once a step
    improves the total log-likelihood by less than `tol`. If `history` is
    given, the total log-likelihood before each step and after the last one
    is appended to it.
    """
    if not sequences:
        raise ValueError("need at least one training sequence")
    if max_iter < 1 or tol <= 0:
        raise ValueError("max_iter must be >= 1 and tol > 0")
    seqs = [_check_codes(model, s) for s in sequences]
    current = model
    prev_ll = None
    for _ in range(max_iter):
        updated, ll = _reestimate(current, seqs)
        if history is not None:
            history.append(ll)
        if prev_ll is not None and ll - prev_ll < tol:
            break
        prev_ll = ll
        current = updated
    else:
        if history is not None:
            history.append(total_log_likelihood(current, sequences))
    return current


@dataclass(frozen=True, eq=False)
class ModelBank:
    per_class: dict[str, HmmModel]
    label_state: HmmModel
    alpha: float
    beta: float = DEFAULT_BETA
    vocab_names: tuple[str, ...] = field(default=())

    @property
    def labels(self) -> list[str]:
        return list(self.per_class)


def _smoothed_rows(counts: np.ndarray, alpha: float) -> np.ndarray:
    M = counts.shape[1]
    return (counts + alpha) / (counts.sum(axis=1, keepdims=True) + alpha * M)


def build_model_bank(catalog: Catalog, alpha: float = DEFAULT_ALPHA,
                     beta: float = DEFAULT_BETA) -> ModelBank:
    """Count-based construction with add-alpha emission smoothing.

    Each label gets a left-to-right model with one stage per pattern position;
    interior stages advance with probability 1 and the last stage loops on
    itself. The label-state model has one state per label, emissions pooled
    over that label's patterns and a self-transition probability `beta`.
    """
    if alpha <= 0:
        raise ValueError("smoothing alpha must be positive")
    if not 0.0 <= beta <= 1.0:
        raise ValueError("self-loop bias beta must lie in [0, 1]")
    if not catalog.entries:
        raise ValueError("empty catalog")
    M, L = catalog.vocab.size, catalog.window
    labels = catalog.labels

    A_chain = np.zeros((L, L))
    for i in range(L - 1):
        A_chain[i, i + 1] = 1.0
    A_chain[L - 1, L - 1] = 1.0
    pi_chain = np.zeros(L)
    pi_chain[0] = 1.0

    per_class: dict[str, HmmModel] = {}
    pooled = np.zeros((len(labels), M))
    for k, label in enumerate(labels):
        counts = np.zeros((L, M))
        for entry in catalog.entries:
            if entry.label == label:
                for stage, code in enumerate(catalog.encode_pattern(entry)):
                    counts[stage, code] += 1
        pooled[k] = counts.sum(axis=0)
        stages = tuple(f"{label}#{i}" for i in range(L))
        per_class[label] = HmmModel(A_chain, _smoothed_rows(counts, alpha), pi_chain, stages)

    K = len(labels)
    if K == 1:
        A_ls = np.ones((1, 1))
    else:
        A_ls = np.full((K, K), (1.0 - beta) / (K - 1))
        np.fill_diagonal(A_ls, beta)
    label_state = HmmModel(A_ls, _smoothed_rows(pooled, alpha), np.full(K, 1.0 / K), tuple(labels))
    return ModelBank(per_class, label_state, alpha, beta, catalog.vocab.names)


def score_all(bank: ModelBank, codes: Sequence[int]) -> dict[str, float]:
    """Per-class forward log-likelihoods, in catalog label order."""
    return {label: forward_log_likelihood(model, codes) for label, model in bank.per_class.items()}
