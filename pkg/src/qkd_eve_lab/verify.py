"""Analytic-versus-simulation oracle suite.

Each entry builds one simulation configuration whose closed-form
expectations are known, runs the pulse-level model, and requires every
tallied quantity to sit within 3 sigma of the prediction.  Optical error
and dark counts are switched off except where they are the quantity under
test, so each check isolates one mechanism.
"""
from __future__ import annotations

import math
from dataclasses import replace

from .config import SystemConfig
from .core_stats import ChannelParams, DetectorParams, SourceParams
from .keyrate import EveModel
from .montecarlo import Report, SimConfig, compare, simulate
from .strategy_a import INTERMEDIATE_STATE_QBER
from .strategy_b import (
    BeamsplitAttack,
    model_click_probs,
    sifted_info_model,
    solve_gamma,
)


def _system(
    mu: float = 0.1,
    length: float = 60.0,
    eta: float = 0.1,
    p_dark: float = 0.0,
    qber_opt: float = 0.0,
) -> SystemConfig:
    return SystemConfig(
        source=SourceParams(mu=mu),
        channel=ChannelParams(alpha_ab=0.25, length_ab=max(length, 1e-9)),
        detector=DetectorParams(eta_b=eta, p_dark=p_dark),
        qber_opt=qber_opt,
    )


def _clean_channel_checks(n_pulses: int, seed: int, workers: int, batch: int) -> list:
    checks = []

    system = _system(qber_opt=0.005)
    t = system.t_ab(60.0)
    x = 0.1 * t * 0.1
    sim = simulate(
        SimConfig(system=system, eve_model=EveModel.NONE, distance_km=60.0,
                  n_pulses=n_pulses, seed=seed, workers=workers, batch_size=batch)
    )
    checks.append(
        compare("clean_60km", sim, {
            "p_single": -math.expm1(-x),
            "p_coinc": 0.5 * math.expm1(-x / 2.0) ** 2,
            "sifted_fraction": -math.expm1(-x) / 2.0,
            "qber": 0.005,
        })
    )

    system = _system(length=1e-9, eta=1.0)
    sim = simulate(
        SimConfig(system=system, eve_model=EveModel.NONE, distance_km=0.0,
                  n_pulses=n_pulses, seed=seed + 1, workers=workers, batch_size=batch)
    )
    checks.append(
        compare("zero_length_perfect_detector", sim, {
            "p_single": -math.expm1(-0.1),
            "sifted_fraction": -math.expm1(-0.1) / 2.0,
            "qber": 0.0,
        })
    )

    system = _system(p_dark=1e-6)
    ps = -math.expm1(-x)
    dark = 2 * 1e-6
    sim = simulate(
        SimConfig(system=system, eve_model=EveModel.NONE, distance_km=60.0,
                  n_pulses=n_pulses, seed=seed + 2, workers=workers, batch_size=batch)
    )
    checks.append(
        compare("dark_counts_60km", sim, {
            "p_single": 1.0 - (1.0 - ps) * (1.0 - 1e-6) ** 2,
            "qber": (dark / 2.0) / (ps + dark),
        })
    )
    return checks


def _strategy_a_checks(n_pulses: int, seed: int, workers: int, batch: int) -> list:
    # 80 km sits well inside the pure class-B regime (threshold ~65 km).
    system = _system(length=80.0)
    t = system.t_ab(80.0)
    sim = simulate(
        SimConfig(system=system, eve_model=EveModel.STRATEGY_A, distance_km=80.0,
                  n_pulses=n_pulses, seed=seed + 3, workers=workers, batch_size=batch)
    )
    return [
        compare("strategy_a_pure_b_80km", sim, {
            "p_single": 0.1 * t * 0.1,
            "qber": INTERMEDIATE_STATE_QBER,
            "eve_fraction": 1.0,
        })
    ]


def _strategy_b_checks(n_pulses: int, seed: int, workers: int, batch: int) -> list:
    checks = []
    mu, eta = 0.1, 0.1

    # Pure beam splitting: statistics identical to the clean channel.
    system = _system(qber_opt=0.005)
    t_ab = system.t_ab(60.0)
    attack = BeamsplitAttack(lam=0.5, gamma=1.0, t_e=2.0 * t_ab)
    x = mu * t_ab * eta
    sim = simulate(
        SimConfig(system=system, eve_model=EveModel.STRATEGY_B, attack=attack,
                  distance_km=60.0, n_pulses=n_pulses, seed=seed + 4,
                  workers=workers, batch_size=batch)
    )
    checks.append(
        compare("strategy_b_pure_bsa_60km", sim, {
            "p_single": -math.expm1(-x),
            "p_coinc": 0.5 * math.expm1(-x / 2.0) ** 2,
            "qber": 0.005,
            "eve_fraction": sifted_info_model(attack, mu),
        })
    )

    # Mild shutter at 20 km with the straight-line gain of 2 dB.
    system = _system(length=20.0, qber_opt=0.005)
    t_ab = system.t_ab(20.0)
    t_e = 10.0 ** (-0.15 * 20.0 / 10.0)
    gamma = solve_gamma(mu, t_ab, 0.2, t_e)
    attack = BeamsplitAttack(lam=0.2, gamma=gamma, t_e=t_e)
    p_click, p_coinc = model_click_probs(attack, mu, eta)
    sim = simulate(
        SimConfig(system=system, eve_model=EveModel.STRATEGY_B, attack=attack,
                  distance_km=20.0, n_pulses=n_pulses, seed=seed + 5,
                  workers=workers, batch_size=batch)
    )
    checks.append(
        compare("strategy_b_shutter_20km", sim, {
            "p_single": p_click,
            "p_coinc": p_coinc,
            "qber": 0.005,
            "eve_fraction": sifted_info_model(attack, mu),
        })
    )

    # Aggressive blocking at 80 km over a lossy-but-better replacement link.
    system = _system(length=80.0)
    t_ab = system.t_ab(80.0)
    t_e = 0.5
    gamma = solve_gamma(mu, t_ab, 0.8, t_e)
    attack = BeamsplitAttack(lam=0.8, gamma=gamma, t_e=t_e)
    p_click, p_coinc = model_click_probs(attack, mu, eta)
    sim = simulate(
        SimConfig(system=system, eve_model=EveModel.STRATEGY_B, attack=attack,
                  distance_km=80.0, n_pulses=n_pulses, seed=seed + 6,
                  workers=workers, batch_size=batch)
    )
    checks.append(
        compare("strategy_b_blocking_80km", sim, {
            "p_single": p_click,
            "qber": 0.0,
            "eve_fraction": sifted_info_model(attack, mu),
        })
    )
    return checks


def oracle_suite(
    n_pulses: int = 10**8,
    seed: int = 42,
    workers: int = 1,
    batch_size: int = 2**20,
) -> Report:
    """Run every oracle comparison and merge the results into one report."""
    if n_pulses < 10**4:
        raise ValueError("the oracle suite needs at least 1e4 pulses")
    reports = []
    reports += _clean_channel_checks(n_pulses, seed, workers, batch_size)
    reports += _strategy_a_checks(n_pulses, seed, workers, batch_size)
    reports += _strategy_b_checks(n_pulses, seed, workers, batch_size)
    merged = Report()
    for rep in reports:
        merged.checks.extend(rep.checks)
    return merged
