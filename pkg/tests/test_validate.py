import numpy as np

from openmab.harness.validate import ValidationReport, validate
from openmab.policy import update_and_broadcast


def test_every_property_passes():
    report = validate(quick=True)
    assert report.ok, "\n".join(r.line() for r in report.failed())
    assert {r.module for r in report.results} == {"population", "rewards", "transfer", "policy", "metrics",
                                                  "instances", "harness"}
    assert str(report).count("[PASS]") == len(report.results)


def corrupted(stats, selected, rewards, t, C1=2.0, beta=0.5):
    # overwrite the radius with the fresh candidate instead of taking the minimum
    update_and_broadcast(stats, selected, rewards, t, C1, beta)
    n = stats.n[selected]
    seen = n > 0
    if t > 1:
        stats.rho[selected, seen] = (C1 * np.log(t) / n[seen]) ** beta


def test_negative_control_is_caught():
    report = validate(update_rule=corrupted, quick=True)
    failed = {r.name for r in report.failed()}
    assert any("radius" in name for name in failed), failed
    assert isinstance(report, ValidationReport) and not report.ok
