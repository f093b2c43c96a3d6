import numpy as np
import pytest
from hypothesis import settings

from countyrisk.synth import grid_graph

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")


def moran_oracle(y, W):
    """Moran's I by explicit double loop over all pairs."""
    y = [float(v) for v in y]
    n = len(y)
    ybar = sum(y) / n
    num = s0 = 0.0
    for i in range(n):
        for j in range(n):
            s0 += W[i][j]
            num += W[i][j] * (y[i] - ybar) * (y[j] - ybar)
    return n / s0 * num / sum((v - ybar) ** 2 for v in y)


def random_graph_matrix(rng, n, p=0.2):
    """Symmetric 0/1 matrix with every node of degree >= 1."""
    A = np.triu(rng.random((n, n)) < p, 1)
    A = A | A.T
    for i in np.flatnonzero(A.sum(axis=1) == 0):
        j = (i + 1 + rng.integers(n - 1)) % n
        A[i, j] = A[j, i] = True
    return A


@pytest.fixture
def queen10():
    return grid_graph(10, 10, queen=True)


GOLDEN = __import__("pathlib").Path(__file__).parent / "golden"


@pytest.fixture(scope="session")
def fixture_dir(tmp_path_factory):
    from countyrisk.cli import write_fixture

    d = tmp_path_factory.mktemp("fixture")
    write_fixture(d, 42)
    return d


@pytest.fixture(scope="session")
def pipeline_runs(fixture_dir, tmp_path_factory):
    """The seed-42 fixture run twice with one worker and once with four."""
    from countyrisk.pipeline import load_config, run_pipeline

    runs = {}
    for tag, workers in (("w1", 1), ("w1_again", 1), ("w4", 4)):
        cfg = load_config(fixture_dir / "pipeline.toml")
        cfg.workers = workers
        cfg.output_dir = str(tmp_path_factory.mktemp(tag))
        runs[tag] = run_pipeline(cfg)
    return runs


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for k in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[k])
