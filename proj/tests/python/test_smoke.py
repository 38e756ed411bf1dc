import json
import math
import os
import subprocess

import pytest

import iupm

C1_IUPM = 0.04519474535715617
C1_LOWER = 0.016968996762062188


def c1_without_sequencing():
    levels = [
        iupm.DilutionLevel(u=2.5, M=36, MN=32, m=0, Y=[0]),
        iupm.DilutionLevel(u=0.5, M=6, MN=6, m=0, Y=[0]),
        iupm.DilutionLevel(u=0.1, M=6, MN=6, m=0, Y=[0]),
    ]
    return iupm.Assay(levels)


def test_fit_matches_reference():
    a = c1_without_sequencing()
    assert a.validate() == []
    fit = iupm.fit_mle(a)
    assert fit.converged
    assert fit.iupm == pytest.approx(C1_IUPM, rel=1e-8)
    assert fit.ci.lower == pytest.approx(C1_LOWER, rel=1e-6)
    assert fit.extreme == "regular"
    assert fit.se > 0


def test_json_round_trip():
    a = c1_without_sequencing()
    text = iupm.to_summary_json(a)
    back = iupm.parse_summary_json(text)
    assert iupm.to_summary_json(back) == text
    assert iupm.fit_mle(back).iupm == pytest.approx(C1_IUPM, rel=1e-8)


def test_helpers():
    assert iupm.nint(2.5) == 2
    assert iupm.nint(3.5) == 4
    assert iupm.chi2_1_upper_tail(3.841459) == pytest.approx(0.05, abs=1e-7)
    assert iupm.lrt_p_value(0.0) == 1.0
    assert round(iupm.lrt_p_value(7.469), 3) == 0.003
    lo, hi = iupm.wald_ci(1.0, 0.1)
    assert lo < 1.0 < hi
    assert math.log(lo) + math.log(hi) == pytest.approx(0.0, abs=1e-12)


def test_well_probability():
    p = iupm.well_joint_prob([0.2, 0.3], 1, [1, 0])
    want = (1 - math.exp(-0.2)) * math.exp(-0.3)
    assert p == pytest.approx(want, rel=1e-13)
    assert iupm.well_joint_prob([0.2, 0.3], 1, [0, 0]) == 0.0


def test_errors():
    bad = iupm.Assay([iupm.DilutionLevel(u=1, M=4, MN=2, m=3, Y=[3])])
    assert "m>MP" in bad.validate()
    with pytest.raises(iupm.InvalidAssay):
        iupm.fit_mle(bad)
    with pytest.raises(iupm.ParseError):
        iupm.parse_summary_json("{")
    one = iupm.Assay([iupm.DilutionLevel(u=1, M=12, MN=6, m=6, Y=[4, 3])])
    with pytest.raises(iupm.NotIdentifiable):
        iupm.lrt_overdispersion(one)


def test_simulate():
    scenario = {
        "name": "py",
        "T": 1,
        "n_prime": 3,
        "levels": [{"u": 1, "M": 12, "q": 0.5}],
        "reps": 20,
        "seed": 3,
        "estimators": ["mle", "mle-no-udsa"],
    }
    a = iupm.simulate(json.dumps(scenario), threads=1)
    b = iupm.simulate(json.dumps(scenario), threads=3)
    assert a == b
    lines = a.strip().splitlines()
    assert lines[0].startswith("scenario,estimator,")
    assert len(lines) == 3


@pytest.mark.skipif("IUPM_CLI" not in os.environ, reason="command-line tool not built")
def test_cli_fit():
    text = iupm.to_summary_json(c1_without_sequencing())
    out = subprocess.run(
        [os.environ["IUPM_CLI"], "fit", "-i", "-"],
        input=text,
        capture_output=True,
        text=True,
        check=True,
    )
    assert json.loads(out.stdout)["mle"]["iupm"] == pytest.approx(C1_IUPM, rel=1e-8)
