"""Pulse-level simulation of the Alice-channel-Eve-Bob chain.

This is the independent cross-check for every closed-form expression in the
package: photons are drawn per pulse, split, blocked, lost, and detected,
and the tallies are compared against the analytic expectations with
binomial z-scores.

Determinism contract: every random decision is one uniform draw from a
counter-based stream indexed by (seed, decision column, pulse index), so a
run is bit-for-bit reproducible regardless of batch size or worker count.
Philox counters move in blocks of four 64-bit words, hence batch
boundaries are kept at multiples of four pulses.
"""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import strategy_a
from .config import ConfigError, SystemConfig
from .core_stats import BasisMode, poisson_pmf_array
from .keyrate import EveModel
from .strategy_b import BeamsplitAttack

PHOTON_CAP = 20

# Decision columns; each owns an independent counter-based stream.
_COL_N = 0
_COL_ALICE_BASIS = 1
_COL_ALICE_BIT = 2
_COL_EVE_SPLIT = 3
_COL_EVE_AUX = 4
_COL_EVE_USE = 5
_COL_EVE_ERR = 6
_COL_CHANNEL = 7
_COL_BOB_BASIS = 8
_COL_BOB_DETECT = 9
_COL_BOB_SPLIT = 10
_COL_QBER_FLIP = 11
_COL_DARK_0 = 12
_COL_DARK_1 = 13
_COL_EVE_INTERCEPT = 14


def _column_uniforms(seed: int, column: int, start: int, count: int) -> np.ndarray:
    """Uniforms for one decision column over pulses [start, start + count)."""
    if start % 4:
        raise ValueError("column streams must start on a 4-pulse boundary")
    bitgen = np.random.Philox(key=seed, counter=[start // 4, 0, column, 0])
    return np.random.Generator(bitgen).random(count)


def _binomial_cdf_table(p: float) -> np.ndarray:
    """Rows n = 0..PHOTON_CAP of the Binomial(n, p) CDF."""
    table = np.ones((PHOTON_CAP + 1, PHOTON_CAP + 1))
    for n in range(PHOTON_CAP + 1):
        probs = [
            math.comb(n, k) * p**k * (1.0 - p) ** (n - k) for k in range(n + 1)
        ]
        table[n, : n + 1] = np.cumsum(probs)
        table[n, n + 1 :] = 1.0
    return table


def _binomial_from_u(
    n: np.ndarray, u: np.ndarray, cdf_table: np.ndarray
) -> np.ndarray:
    """Inverse-CDF binomial: one uniform per draw, vectorized over n groups."""
    out = np.zeros(n.shape, dtype=np.int64)
    for nv in np.unique(n):
        if nv == 0:
            continue
        mask = n == nv
        k = np.searchsorted(cdf_table[nv], u[mask], side="right")
        out[mask] = np.minimum(k, nv)
    return out


@dataclass
class SimConfig:
    """One simulation run: system, eavesdropper, size, and seeding."""

    system: SystemConfig
    eve_model: EveModel = EveModel.NONE
    attack: BeamsplitAttack | None = None
    distance_km: float | None = None
    attack_fraction: float = 1.0
    strategy_a_blind_fill: bool = True
    n_pulses: int = 10**6
    seed: int = 42
    batch_size: int = 2**20
    workers: int = 1

    def __post_init__(self) -> None:
        self.validate()

    @property
    def distance(self) -> float:
        if self.distance_km is not None:
            return self.distance_km
        return self.system.channel.length_ab

    def validate(self) -> None:
        if self.n_pulses < 1:
            raise ConfigError(f"n_pulses must be >= 1, got {self.n_pulses}")
        if self.batch_size < 4:
            raise ConfigError(f"batch_size must be >= 4, got {self.batch_size}")
        if self.workers < 1:
            raise ConfigError(f"workers must be >= 1, got {self.workers}")
        if self.system.basis_mode is not BasisMode.ACTIVE:
            raise ConfigError("the simulation models active basis choice only")
        if self.eve_model in (EveModel.STRATEGY_B, EveModel.STRATEGY_B_STORAGE):
            if self.attack is None:
                raise ConfigError("strategy-b simulation needs attack parameters")
        if self.eve_model is EveModel.UNLIMITED:
            raise ConfigError("the unlimited model is analytic only; nothing to simulate")
        if self.eve_model is EveModel.STRATEGY_A:
            if not 0 <= self.attack_fraction <= 1:
                raise ConfigError(
                    f"attack_fraction must be in [0, 1], got {self.attack_fraction}"
                )
            mix = strategy_a.allocate(
                self.system.source.mu, self.system.t_ab(self.distance)
            )
            if mix.deficit and not self.strategy_a_blind_fill:
                raise ConfigError(
                    "strategy-a allocation has a supply deficit at this distance "
                    "and blind filling is disabled"
                )


@dataclass
class SimResult:
    """Tallies of one run, with binomial standard errors on the estimates."""

    n_pulses: int = 0
    singles: int = 0
    coincidences: int = 0  # wrong-basis double clicks (the monitored alarm)
    coincidences_all: int = 0  # any double click, either basis
    sifted: int = 0
    errors: int = 0
    eve_known: int = 0

    def __add__(self, other: "SimResult") -> "SimResult":
        return SimResult(
            n_pulses=self.n_pulses + other.n_pulses,
            singles=self.singles + other.singles,
            coincidences=self.coincidences + other.coincidences,
            coincidences_all=self.coincidences_all + other.coincidences_all,
            sifted=self.sifted + other.sifted,
            errors=self.errors + other.errors,
            eve_known=self.eve_known + other.eve_known,
        )

    @staticmethod
    def _estimate(count: int, n: int) -> tuple[float, float]:
        if n == 0:
            return 0.0, 0.0
        p = count / n
        return p, math.sqrt(p * (1.0 - p) / n)

    @property
    def p_single_hat(self) -> tuple[float, float]:
        return self._estimate(self.singles, self.n_pulses)

    @property
    def p_coinc_hat(self) -> tuple[float, float]:
        return self._estimate(self.coincidences, self.n_pulses)

    @property
    def sifted_fraction_hat(self) -> tuple[float, float]:
        return self._estimate(self.sifted, self.n_pulses)

    @property
    def qber_hat(self) -> tuple[float, float]:
        return self._estimate(self.errors, self.sifted)

    @property
    def eve_fraction_hat(self) -> tuple[float, float]:
        return self._estimate(self.eve_known, self.sifted)

    def csv_lines(self) -> list[str]:
        rows = [
            ("n_pulses", self.n_pulses, 1.0, 0.0),
            ("singles", self.singles, *self.p_single_hat),
            ("coincidences", self.coincidences, *self.p_coinc_hat),
            ("coincidences_all", self.coincidences_all,
             *self._estimate(self.coincidences_all, self.n_pulses)),
            ("sifted", self.sifted, *self.sifted_fraction_hat),
            ("errors", self.errors, *self.qber_hat),
            ("eve_known", self.eve_known, *self.eve_fraction_hat),
        ]
        lines = ["quantity,count,estimate,sigma"]
        for name, count, est, sig in rows:
            lines.append(f"{name},{count},{est!r},{sig!r}")
        return lines

    def summary(self) -> str:
        ps, dps = self.p_single_hat
        q, dq = self.qber_hat
        ek, dek = self.eve_fraction_hat
        return (
            f"pulses {self.n_pulses}: singles {self.singles} "
            f"(p={ps:.4e}+-{dps:.1e}), coincidences {self.coincidences}, "
            f"sifted {self.sifted}, QBER {q:.4e}+-{dq:.1e}, "
            f"eve fraction {ek:.4e}+-{dek:.1e}"
        )


@dataclass(frozen=True)
class _StrategyAPolicy:
    """Per-case resend probabilities realized by the simulated eavesdropper."""

    resend_prob: tuple[float, float, float, float]  # A, B, C, D
    blind_prob: float
    attack_fraction: float


def _strategy_a_policy(cfg: SimConfig) -> _StrategyAPolicy:
    mu = cfg.system.source.mu
    mix = strategy_a.allocate(mu, cfg.system.t_ab(cfg.distance))
    probs = []
    for label in strategy_a.CASE_LABELS:
        supply = mix.supply[label]
        probs.append(mix.usage[label] / supply if supply > 0 else 0.0)
    blind_prob = 0.0
    if mix.blind > 0 and cfg.strategy_a_blind_fill:
        blind_prob = min(1.0, mix.blind / math.exp(-mu))
    return _StrategyAPolicy(tuple(probs), blind_prob, cfg.attack_fraction)


def _chunk_ranges(n_pulses: int, batch_size: int) -> list[tuple[int, int]]:
    # Keep starts on 4-pulse boundaries for the Philox block counter.
    batch = max(4, batch_size - batch_size % 4)
    return [(s, min(s + batch, n_pulses)) for s in range(0, n_pulses, batch)]


def _simulate_chunk(args: tuple) -> SimResult:
    cfg, policy, start, stop = args
    count = stop - start
    system: SystemConfig = cfg.system
    mu = system.source.mu
    eta = system.detector.eta_b
    p_dark = system.detector.p_dark
    qber_opt = system.qber_opt
    seed = cfg.seed

    def uniforms(column: int) -> np.ndarray:
        return _column_uniforms(seed, column, start, count)

    # Photon number per pulse, capped; the tail above the cap is < 1e-19
    # for mu <= 1.
    pmf = poisson_pmf_array(mu, PHOTON_CAP)
    cdf = np.cumsum(pmf)
    n = np.minimum(
        np.searchsorted(cdf, uniforms(_COL_N), side="right"), PHOTON_CAP
    ).astype(np.int64)

    alice_basis = uniforms(_COL_ALICE_BASIS) < 0.5
    alice_bit = uniforms(_COL_ALICE_BIT) < 0.5

    eve_knows = np.zeros(count, dtype=bool)
    # Per-pulse probability that the sifted bit (if any) disagrees with
    # Alice before the optical-misalignment flip; realized by one uniform.
    resend_error = np.zeros(count, dtype=bool)

    if cfg.eve_model is EveModel.STRATEGY_A:
        p = policy
        half_cdf = _binomial_cdf_table(0.5)
        k_right = _binomial_from_u(n, uniforms(_COL_EVE_SPLIT), half_cdf)
        n_wrong = n - k_right
        k_w0 = _binomial_from_u(n_wrong, uniforms(_COL_EVE_AUX), half_cdf)

        case_a = n == 1
        both_bases = (k_right >= 1) & (n_wrong >= 1) & (n >= 2)
        all_right = (k_right >= 1) & (n_wrong == 0) & (n >= 2)
        wrong_same = (k_right == 0) & (n_wrong >= 1) & (n >= 2) & (
            (k_w0 == 0) | (k_w0 == n_wrong)
        )
        wrong_both = (k_right == 0) & (n_wrong >= 2) & (n >= 2) & (
            (k_w0 >= 1) & (k_w0 < n_wrong)
        )

        resend_p = np.zeros(count)
        resend_p[case_a] = p.resend_prob[0]
        resend_p[both_bases] = p.resend_prob[1]
        resend_p[all_right | wrong_same] = p.resend_prob[2]
        resend_p[wrong_both] = p.resend_prob[3]
        resend_p[n == 0] = p.blind_prob

        if p.attack_fraction < 1.0:
            intercepted = uniforms(_COL_EVE_INTERCEPT) < p.attack_fraction
        else:
            intercepted = np.ones(count, dtype=bool)
        resend = intercepted & (uniforms(_COL_EVE_USE) < resend_p)

        err_p = np.zeros(count)
        err_p[both_bases] = strategy_a.INTERMEDIATE_STATE_QBER
        err_p[case_a & (k_right == 0)] = 0.5
        err_p[wrong_same] = 0.5
        err_p[wrong_both] = 0.5
        err_p[n == 0] = 0.5

        # Resent pulses carry one fresh photon straight into the receiver;
        # pulses she left alone travel the installed fiber.
        arrivals = resend.astype(np.int64)
        if p.attack_fraction < 1.0:
            passthrough_cdf = _binomial_cdf_table(system.t_ab(cfg.distance))
            passed = _binomial_from_u(n, uniforms(_COL_CHANNEL), passthrough_cdf)
            arrivals = np.where(intercepted, arrivals, passed)
        resend_error = resend & (uniforms(_COL_EVE_ERR) < err_p)
        eve_knows = resend & (both_bases | (case_a & (k_right == 1)) | all_right)
    elif cfg.eve_model in (EveModel.STRATEGY_B, EveModel.STRATEGY_B_STORAGE):
        attack = cfg.attack
        tap_cdf = _binomial_cdf_table(attack.lam)
        k_e = _binomial_from_u(n, uniforms(_COL_EVE_SPLIT), tap_cdf)
        eve_detected = k_e >= 1
        eve_basis_match = uniforms(_COL_EVE_AUX) < 0.5
        shutter_open = eve_detected | (uniforms(_COL_EVE_USE) < attack.gamma)
        survive_cdf = _binomial_cdf_table(attack.t_e)
        arrivals = _binomial_from_u(n - k_e, uniforms(_COL_CHANNEL), survive_cdf)
        arrivals[~shutter_open] = 0
        eve_knows = eve_detected & eve_basis_match
    else:
        survive_cdf = _binomial_cdf_table(system.t_ab(cfg.distance))
        arrivals = _binomial_from_u(n, uniforms(_COL_CHANNEL), survive_cdf)

    # Receiver: active basis choice, per-photon detection, dark counts on
    # the two gated detectors.
    bob_right = uniforms(_COL_BOB_BASIS) < 0.5  # his basis equals Alice's
    det_cdf = _binomial_cdf_table(eta)
    k_det = _binomial_from_u(arrivals, uniforms(_COL_BOB_DETECT), det_cdf)
    half_cdf_b = _binomial_cdf_table(0.5)
    k_split0 = _binomial_from_u(k_det, uniforms(_COL_BOB_SPLIT), half_cdf_b)

    received_bit = alice_bit ^ resend_error

    # Signal photons per detector of the chosen basis.
    sig0 = np.where(bob_right, np.where(received_bit, 0, k_det), k_split0)
    sig1 = np.where(bob_right, np.where(received_bit, k_det, 0), k_det - k_split0)

    if p_dark > 0:
        dark0 = uniforms(_COL_DARK_0) < p_dark
        dark1 = uniforms(_COL_DARK_1) < p_dark
    else:
        dark0 = np.zeros(count, dtype=bool)
        dark1 = np.zeros(count, dtype=bool)

    click0 = (sig0 > 0) | dark0
    click1 = (sig1 > 0) | dark1
    any_click = click0 | click1
    double = click0 & click1

    sifted = bob_right & any_click & ~double
    bob_bit = click1  # exactly one detector clicked on sifted pulses
    if qber_opt > 0:
        bob_bit = bob_bit ^ (uniforms(_COL_QBER_FLIP) < qber_opt)
    errors = sifted & (bob_bit != alice_bit)

    return SimResult(
        n_pulses=count,
        singles=int(np.count_nonzero(any_click)),
        coincidences=int(np.count_nonzero(double & ~bob_right)),
        coincidences_all=int(np.count_nonzero(double)),
        sifted=int(np.count_nonzero(sifted)),
        errors=int(np.count_nonzero(errors)),
        eve_known=int(np.count_nonzero(sifted & eve_knows)),
    )


def simulate(cfg: SimConfig) -> SimResult:
    """Run the pulse-level simulation described by ``cfg``.

    The tallies are independent of ``batch_size`` and ``workers``; both only
    trade memory against parallelism.
    """
    cfg.validate()
    policy = _strategy_a_policy(cfg) if cfg.eve_model is EveModel.STRATEGY_A else None
    jobs = [(cfg, policy, start, stop) for start, stop in
            _chunk_ranges(cfg.n_pulses, cfg.batch_size)]
    total = SimResult()
    if cfg.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            for part in pool.map(_simulate_chunk, jobs):
                total = total + part
    else:
        for job in jobs:
            total = total + _simulate_chunk(job)
    return total


@dataclass(frozen=True)
class CheckResult:
    """One analytic-versus-simulation comparison."""

    name: str
    quantity: str
    observed: int
    trials: int
    expected: float
    z: float

    @property
    def passed(self) -> bool:
        return abs(self.z) <= 3.0

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        est = self.observed / self.trials if self.trials else 0.0
        return (
            f"{status} {self.name}/{self.quantity}: observed {est:.6e} "
            f"({self.observed}/{self.trials}), expected {self.expected:.6e}, "
            f"z={self.z:+.2f}"
        )


@dataclass
class Report:
    """Machine-readable outcome of a batch of oracle comparisons."""

    checks: list[CheckResult] = field(default_factory=list)

    @property
    def all_pass(self) -> bool:
        return all(c.passed for c in self.checks)

    def lines(self) -> list[str]:
        out = [c.line() for c in self.checks]
        n_fail = sum(not c.passed for c in self.checks)
        out.append(
            f"{'PASS' if n_fail == 0 else 'FAIL'}: "
            f"{len(self.checks) - n_fail}/{len(self.checks)} checks within 3 sigma"
        )
        return out

    def csv_lines(self) -> list[str]:
        lines = ["check,quantity,observed,trials,expected,z,passed"]
        for c in self.checks:
            lines.append(
                f"{c.name},{c.quantity},{c.observed},{c.trials},"
                f"{c.expected!r},{c.z!r},{int(c.passed)}"
            )
        return lines


def _z_score(observed: int, trials: int, expected: float) -> float:
    if trials == 0:
        return math.inf
    if expected <= 0.0 or expected >= 1.0:
        return 0.0 if observed / trials == expected else math.inf
    sigma = math.sqrt(expected * (1.0 - expected) * trials)
    return (observed - trials * expected) / sigma


_QUANTITIES = {
    "p_single": lambda r: (r.singles, r.n_pulses),
    "p_coinc": lambda r: (r.coincidences, r.n_pulses),
    "sifted_fraction": lambda r: (r.sifted, r.n_pulses),
    "qber": lambda r: (r.errors, r.sifted),
    "eve_fraction": lambda r: (r.eve_known, r.sifted),
}


def compare(name: str, sim: SimResult, expectations: dict[str, float]) -> Report:
    """z-score each expected quantity against the simulated tallies."""
    report = Report()
    for quantity, expected in expectations.items():
        try:
            observed, trials = _QUANTITIES[quantity](sim)
        except KeyError:
            raise ValueError(
                f"unknown quantity {quantity!r}; valid: {sorted(_QUANTITIES)}"
            ) from None
        z = _z_score(observed, trials, expected)
        report.checks.append(
            CheckResult(name, quantity, observed, trials, expected, z)
        )
    return report
