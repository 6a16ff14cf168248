from pathlib import Path

import pytest

from ofdma_cac import build_transition_matrix, load_config, reference_config, solve_stationary

ROOT = Path(__file__).resolve().parents[1]
CONFIGS = ROOT / "configs"

ACCEPTANCE_LINES = []


def tiny_config(**overrides):
    """24-state chain: L=3, C=2, A=2, S=1, fast connection dynamics."""
    cfg = reference_config(
        queue_size=3, cac_threshold=2, truncation_level=2, max_arrivals=2, subchannels=1,
        connection_rate=20000.0, mean_holding=1e-4, q01=0.3, q10=0.5, lambda0=0.5, lambda1=1.5,
        mean_snr_db=8.0, nakagami_m=1.5, amc_thresholds_db=(3.0, 10.0), amc_packets=(1, 2),
        solver_tol=1e-13,
    )
    return cfg.replace(**overrides) if overrides else cfg


def fast_config(**overrides):
    cfg = load_config(CONFIGS / "fast_desk.cfg")
    return cfg.replace(**overrides) if overrides else cfg


@pytest.fixture(scope="session")
def tiny():
    return tiny_config()


@pytest.fixture(scope="session")
def fast():
    return fast_config()


@pytest.fixture(scope="session")
def reference():
    return reference_config()


@pytest.fixture(scope="session")
def reference_solved(reference):
    P = build_transition_matrix(reference)
    return P, solve_stationary(P)


@pytest.fixture(scope="session")
def reference_no_cac_solved(reference):
    P = build_transition_matrix(reference, mode="no_cac")
    return P, solve_stationary(P)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
