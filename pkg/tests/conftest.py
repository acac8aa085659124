import pytest

CRITERIA = {
    1: "worst-case exactness of D*_is, D*_knn, D*_kmeans",
    2: "NND protocol reversal on the noisy-memorizer grid",
    3: "monotonicity probe: fixed NND decreases, D*_knn recall saturates",
    4: "numeric oracles (backprop, Frechet, matrix sqrt, PRD)",
    5: "path length vs s_max for sigmoid and linear generators, identity COMP",
    6: "GAN variant orderings on two-moons",
    7: "byte-identical reruns",
}
RESULTS = pytest.StashKey[dict]()


def pytest_configure(config):
    config.stash[RESULTS] = {}


@pytest.fixture
def record(request):
    """``record(n, checks)`` stores the outcome of criterion ``n``.

    ``checks`` is a list of (description, ok) pairs; the criterion passes
    when every check does.  Returns the failing descriptions.
    """
    results = request.config.stash[RESULTS]

    def _record(number, checks):
        failed = [d for d, ok in checks if not ok]
        results[number] = (not failed, [d for d, _ in checks], failed)
        return failed

    return _record


def pytest_terminal_summary(terminalreporter, config):
    results = config.stash[RESULTS]
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for n, title in CRITERIA.items():
        if n not in results:
            terminalreporter.write_line(f"criterion {n}: NOT RUN  {title}")
            continue
        ok, details, failed = results[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {title}")
        for d in details:
            mark = "fail" if d in failed else "ok"
            terminalreporter.write_line(f"    [{mark}] {d}")
