"""Monte Carlo simulation of HARQ cycles under arbitrary rate policies."""

import csv
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .analysis import Method, RateSchedule, ThroughputReport
from .channel import TIE_EPS, sample_mi
from .exceptions import ConfigurationError, ContractViolation, SolverError

__all__ = [
    "FixedSchedulePolicy", "CycleTrace", "SimResult", "run_cycle", "estimate_throughput",
    "empirical_failure_probs", "write_trace_csv", "block_rng",
]

log = logging.getLogger(__name__)

BLOCK_SIZE = 65536
ROUND_LIMIT = 10_000
ABORT_FLAG_FRACTION = 1e-6


@dataclass(frozen=True)
class FixedSchedulePolicy:
    """Plays ``R_k`` of a fixed schedule regardless of the channel history."""

    schedule: RateSchedule

    kind = "fixed_schedule"

    def __post_init__(self):
        if not isinstance(self.schedule, RateSchedule):
            object.__setattr__(self, "schedule", RateSchedule(self.schedule))

    @classmethod
    def ir(cls, r, k_max):
        return cls(RateSchedule.ir(r, k_max))

    @property
    def k_max(self):
        return self.schedule.k_max

    def rates(self, k, isig, rsig):
        return np.full(np.shape(isig), self.schedule.rates[k - 1])


def block_rng(seed, block):
    """Counter-based stream for cycle block ``block``; independent of scheduling."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(block,))))


@dataclass
class CycleTrace:
    bits: float
    rounds: int
    success_round: int
    aborted: bool
    trace: list

    @property
    def final_isig(self):
        return self.trace[-1]["isig"] if self.trace else 0.0

    @property
    def final_rsig(self):
        return self.trace[-1]["rsig"] if self.trace else 0.0


def _policy_rates(policy, k, isig, rsig):
    rates = np.asarray(policy.rates(k, isig, rsig), dtype=float)
    rates = np.broadcast_to(rates, np.shape(isig))
    if not np.all(np.isfinite(rates)) or np.any(rates < 0):
        raise ContractViolation(f"policy {getattr(policy, 'kind', policy)} produced an invalid rate in round {k}")
    if k == 1 and np.any(rates <= 0):
        raise ContractViolation("first-round rate must be > 0")
    return rates


def _round_cap(policy, round_limit):
    k_max = getattr(policy, "k_max", None)
    if k_max is None or math.isinf(k_max):
        return round_limit, True
    return int(k_max), False


def run_cycle(policy, source, rng, round_limit=ROUND_LIMIT):
    """Simulate one HARQ cycle with exact MI draws from ``source``.

    Returns a :class:`CycleTrace`; each trace entry holds the round, rate,
    MI drawn, accumulated ``isig``/``rsig`` and the ACK flag.
    """
    cap, persistent = _round_cap(policy, round_limit)
    isig = rsig = 0.0
    trace = []
    for k in range(1, cap + 1):
        rate = float(_policy_rates(policy, k, np.array([isig]), np.array([rsig]))[0])
        i = float(np.asarray(sample_mi(source, rng, 1))[0])
        isig += i
        rsig += rate
        ack = isig >= rsig - TIE_EPS
        if ack and k > 1 and not i >= rate - 2 * TIE_EPS:
            raise AssertionError("joint decoding without the per-packet condition I_k >= R_k")
        trace.append({"round": k, "rate": rate, "mi": i, "isig": isig, "rsig": rsig, "ack": ack})
        if ack:
            return CycleTrace(rsig, k, k, False, trace)
    return CycleTrace(0.0, cap, 0, persistent, trace)


def _simulate_block(policy, source, n, rng, round_limit):
    cap, persistent = _round_cap(policy, round_limit)
    isig = np.zeros(n)
    rsig = np.zeros(n)
    bits = np.zeros(n)
    rounds = np.zeros(n, dtype=np.int64)
    success_round = np.zeros(n, dtype=np.int64)
    active = np.arange(n)
    k = 1
    while active.size and k <= cap:
        rates = _policy_rates(policy, k, isig[active], rsig[active])
        draws = np.asarray(sample_mi(source, rng, active.size), dtype=float)
        isig[active] += draws
        rsig[active] += rates
        rounds[active] = k
        ok = isig[active] >= rsig[active] - TIE_EPS
        done = active[ok]
        bits[done] = rsig[done]
        success_round[done] = k
        active = active[~ok]
        k += 1
    aborted = np.zeros(n, dtype=bool)
    if persistent:
        aborted[active] = True
    return {"bits": bits, "rounds": rounds, "success_round": success_round,
            "isig": isig, "rsig": rsig, "aborted": aborted}


@dataclass
class SimResult:
    eta_hat: float
    std_err: float
    n_cycles: int
    mean_rounds: float
    empirical_f: tuple
    seed: int
    n_aborted: int = 0
    flags: tuple = ()
    cycles: dict = field(default=None, repr=False)

    def to_dict(self):
        return {
            "eta_hat": self.eta_hat,
            "std_err": self.std_err,
            "n_cycles": self.n_cycles,
            "mean_rounds": self.mean_rounds,
            "empirical_f": list(self.empirical_f),
            "seed": self.seed,
            "n_aborted": self.n_aborted,
            "flags": list(self.flags),
        }

    def to_report(self, z=1.96):
        return ThroughputReport(self.eta_hat, self.empirical_f, Method.MONTE_CARLO, self.mean_rounds,
                                ci_halfwidth=z * self.std_err, n_cycles=self.n_cycles, flags=self.flags)


def _failure_freq(success_round, k_max):
    never = success_round == 0
    return tuple(float(np.mean(never | (success_round > k))) for k in range(1, k_max + 1))


def estimate_throughput(policy, source, n_cycles, seed, threads=1, round_limit=ROUND_LIMIT,
                        keep_cycles=False):
    """Renewal-reward throughput estimate ``sum(bits) / sum(rounds)``.

    Cycles are simulated in blocks of ``BLOCK_SIZE``; block ``b`` draws from
    :func:`block_rng` ``(seed, b)``, so the result is bit-identical for any
    ``threads``.  The standard error uses the delta method for ratio estimators.
    Aborted persistent cycles (round limit hit) are excluded and counted.
    """
    n_cycles = int(n_cycles)
    if n_cycles < 1000:
        raise ConfigurationError("n_cycles must be >= 1000")
    if not isinstance(seed, (int, np.integer)) or seed < 0:
        raise ConfigurationError("seed must be a non-negative integer")
    sizes = [min(BLOCK_SIZE, n_cycles - s) for s in range(0, n_cycles, BLOCK_SIZE)]

    def work(b):
        return _simulate_block(policy, source, sizes[b], block_rng(int(seed), b), round_limit)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            blocks = list(pool.map(work, range(len(sizes))))
    else:
        blocks = [work(b) for b in range(len(sizes))]
    cyc = {name: np.concatenate([blk[name] for blk in blocks]) for name in blocks[0]}

    kept = ~cyc["aborted"]
    n_aborted = int(cyc["aborted"].sum())
    flags = []
    if n_aborted / n_cycles >= ABORT_FLAG_FRACTION:
        flags.append("round_limit_aborts")
        log.warning("%d of %d cycles hit the round limit %d", n_aborted, n_cycles, round_limit)
    x = cyc["bits"][kept]
    t = cyc["rounds"][kept].astype(float)
    n = x.size
    if n < 2:
        raise SolverError(f"{n_aborted} of {n_cycles} cycles hit the round limit {round_limit}; "
                          "the policy does not return to the restart state")
    eta = float(x.sum() / t.sum())
    mean_t = float(t.mean())
    std_err = float(np.sqrt(np.var(x - eta * t, ddof=1) / n) / mean_t)

    cap, persistent = _round_cap(policy, round_limit)
    k_f = int(cyc["rounds"].max()) if persistent else cap
    f = _failure_freq(cyc["success_round"], k_f)
    return SimResult(eta, std_err, n_cycles, mean_t, f, int(seed), n_aborted, tuple(flags),
                     cyc if keep_cycles else None)


def empirical_failure_probs(traces, k_max=None):
    """Fraction of cycles still undecoded after round ``k``, ``k = 1..k_max``.

    ``traces`` is a :class:`SimResult` simulated with ``keep_cycles=True`` or a
    sequence of :class:`CycleTrace`.
    """
    if isinstance(traces, SimResult):
        if traces.cycles is None:
            return traces.empirical_f
        success_round = traces.cycles["success_round"]
        rounds = traces.cycles["rounds"]
    else:
        success_round = np.array([t.success_round for t in traces])
        rounds = np.array([t.rounds for t in traces])
    if k_max is None:
        k_max = int(rounds.max())
    return _failure_freq(success_round, k_max)


def write_trace_csv(result, path):
    """Per-cycle CSV: ``cycle, rounds, bits, final_isig, final_rsig``."""
    if result.cycles is None:
        raise ConfigurationError("simulate with keep_cycles=True to write a trace")
    c = result.cycles
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["cycle", "rounds", "bits", "final_isig", "final_rsig"])
        for i in range(c["bits"].size):
            w.writerow([i, int(c["rounds"][i]), repr(float(c["bits"][i])),
                        repr(float(c["isig"][i])), repr(float(c["rsig"][i]))])
