import pytest

from supremal.scores import ScoreKind, build_score, loss_for

PRESET_SCORES = {
    "identity": {},
    "quantile_step": {"alpha": 0.3},
    "huber": {"c": 1.0},
    "smoothed_median": {"c": 1.0},
    "normal_cdf_shift": {},
    "cauchy_cdf_shift": {},
    "rational_sqrt": {},
}


@pytest.fixture(params=sorted(PRESET_SCORES))
def preset_score(request):
    return build_score(request.param, **PRESET_SCORES[request.param])


def all_preset_losses():
    return [loss_for(build_score(k, **p)) for k, p in sorted(PRESET_SCORES.items())]


def continuous(score):
    return score.kind is not ScoreKind.QUANTILE_STEP


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE):
            terminalreporter.write_line(line)
