"""Shared fixtures: synthetic recordings and fitted models.

Everything derives from the bundled synthetic-walker generator so the
suite needs no external data. Expensive fits are session-scoped.
"""

import numpy as np
import pytest

from scomo.demo import WalkerConfig, synth_walker
from scomo.ingest import (
    detect_gait_events,
    lowpass_filter,
    remove_grf_offset,
    segment_cycles,
)
from scomo.model import fit_normative_model, fit_participant_model


def ingest_walker(config: WalkerConfig, n_cycles: int = 8):
    """(filtered trajectory, merged events, cycle set) for one walker."""
    traj, grf_r, grf_c = synth_walker(config)
    events_r = detect_gait_events(
        remove_grf_offset(grf_r), kinematics_rate_hz=traj.rate_hz
    )
    events_c = detect_gait_events(
        remove_grf_offset(grf_c), kinematics_rate_hz=traj.rate_hz
    )
    events = events_r.merged_with(events_c)
    filtered = lowpass_filter(traj)
    cycles = segment_cycles(filtered, events, n=n_cycles, side="robotic")
    return filtered, events, cycles


def normative_pool_cycles(n_subjects: int = 8, seed: int = 42):
    rng = np.random.default_rng(seed)
    subjects = []
    for s in range(n_subjects):
        config = WalkerConfig(
            cycle_samples=96 + 2 * (s % 11),
            h1_scale=float(np.clip(rng.normal(1.0, 0.07), 0.85, 1.15)),
            h2_scale=float(np.clip(rng.normal(1.0, 0.07), 0.85, 1.15)),
            noise_m=0.0008,
            noise_seed=(seed, s),
        )
        subjects.append(ingest_walker(config)[2])
    return subjects


DEVIANT_CONFIG = WalkerConfig(
    right_ap_gain=1.12,
    right_delay=3,
    pattern_jitter=0.8,
    jitter_key=7,
    noise_m=0.001,
    noise_seed=(9,),
)


@pytest.fixture(scope="session")
def symmetric_recording():
    return ingest_walker(WalkerConfig())


@pytest.fixture(scope="session")
def deviant_recording():
    return ingest_walker(DEVIANT_CONFIG)


@pytest.fixture(scope="session")
def participant_model(deviant_recording):
    return fit_participant_model(deviant_recording[2])


@pytest.fixture(scope="session")
def normative_model():
    return fit_normative_model(normative_pool_cycles())
