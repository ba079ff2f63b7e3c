"""Acceptance checks 1-10 at their stated tolerances and time limits.

Each check prints one ``PASS``/``FAIL`` line; under pytest the lines are
repeated in the terminal summary.  Run directly with
``python3 tests/test_acceptance.py`` for the lines alone.
"""
import json
import sys

import pytest

from fermitube import config, experiments

LINES = {}


def _line(res):
    state = "PASS" if res.passed and res.runtime <= res.limit else "FAIL"
    return "criterion %-2s %s  %-46s %.1fs (limit %gs)" % (res.key, state, res.title, res.runtime,
                                                           res.limit)


def run_criterion(key, cfg=None):
    cfg = cfg or config.ExperimentConfig()
    fn = experiments.CRITERIA[key]
    res = fn(cfg, workers=1) if key in ("7", "8") else fn(cfg)
    LINES[int(key)] = _line(res)
    print(LINES[int(key)])
    return res


@pytest.mark.parametrize("key", [str(k) for k in range(1, 11)])
def test_acceptance_criterion(key):
    res = run_criterion(key)
    detail = json.dumps(experiments.Result.summary(res), default=str)[:2000]
    assert res.passed, detail
    assert res.runtime <= res.limit, "took %.1fs, limit %gs" % (res.runtime, res.limit)


if __name__ == "__main__":
    failed = 0
    for k in range(1, 11):
        failed += not run_criterion(str(k)).passed
    sys.exit(1 if failed else 0)
