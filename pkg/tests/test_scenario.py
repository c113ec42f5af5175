"""Scenario parsing, validation reporting, canonical round-trip."""

import numpy as np
import pytest

from ferrosolve import ParseError, ValidationError, parse_scenario, serialize_scenario

MINIMAL = """
[grid]
dim = 1
cells = 4

[potential.f]
family = quadratic
H = 1.0

[potential.g]
family = power_law
"""


REFERENCE = """
[grid]
dim = 1
cells = 16
lengths = 1.0

[tensors]
elastic = 2.0
dielectric = 1.0
coupling = 0.5
hardening = 0.2

[potential.f]
family = quadratic
H = 1.0

[potential.g]
family = power_law
c = 1.0
p = 2.0

[time]
T = 1.0
level = 6
levels = 4 7

[loads]
row = 0.0 0.0 0.0
row = 1.0 0.8 0.4

[initial]
z = 0.0 0.0

[checkpoints]
times = 0.5 1.0

[tolerances]
step_tol = 1e-8
"""


def test_minimal_scenario_default_fill():
    scn = parse_scenario(MINIMAL, is_text=True)
    assert scn.dim == 1
    assert scn.T == 1.0
    assert scn.level == 4
    assert scn.tolerances.step_tol == 1e-6
    assert scn.tolerances.tol_energy == 1e-8
    assert scn.tolerances.tol_mvs == 1e-5
    assert scn.tolerances.linear_tol == 1e-10
    # zero loads filled in, covering [0, T]
    assert scn.load_times[0] == 0.0 and scn.load_times[-1] == scn.T
    assert np.abs(scn.load_b).max() == 0.0


def test_reference_scenario_builds_objects():
    scn = parse_scenario(REFERENCE, is_text=True)
    grid = scn.build_grid()
    assert grid.n_cells == 16
    sys_ = scn.build_system(grid)
    prob = scn.build_problem(level=3, system=sys_)
    assert prob.time_grid.n_steps == 8
    sched = scn.build_schedule(grid)
    assert sched.b.shape == (2, 16, 1)


def test_round_trip_identity():
    scn = parse_scenario(REFERENCE, is_text=True)
    text1 = serialize_scenario(scn)
    scn2 = parse_scenario(text1, is_text=True)
    text2 = serialize_scenario(scn2)
    assert text1 == text2


def test_missing_g_section():
    text = MINIMAL.replace("[potential.g]\nfamily = power_law", "")
    with pytest.raises(ValidationError) as exc:
        parse_scenario(text, is_text=True)
    assert any("potential.g required" in v for v in exc.value.violations)


def test_initial_state_outside_domain_names_cell():
    text = """
[grid]
dim = 1
cells = 4

[potential.f]
family = log_saturation_radial
P_s = 1.0

[potential.g]
family = ball_indicator
kappa = 0.5

[initial]
row = 2 0.0 1.5
"""
    with pytest.raises(ValidationError) as exc:
        parse_scenario(text, is_text=True)
    assert any("cell 2" in v for v in exc.value.violations)


def test_all_violations_reported_at_once():
    text = """
[grid]
dim = 1
cells = 4

[potential.f]
family = nosuch

[potential.g]
family = power_law
p = 1.5

[time]
T = -2.0
"""
    with pytest.raises(ValidationError) as exc:
        parse_scenario(text, is_text=True)
    msgs = exc.value.violations
    assert len(msgs) >= 3
    assert any("unknown family" in v for v in msgs)
    assert any("p must be >= 2" in v for v in msgs)
    assert any("T must be positive" in v for v in msgs)


def test_parse_error_reports_line():
    text = "[grid]\ndim = 1\nthis line has no equals sign\n"
    with pytest.raises(ParseError) as exc:
        parse_scenario(text, is_text=True)
    assert exc.value.line == 3


def test_unknown_section_rejected():
    with pytest.raises(ParseError):
        parse_scenario("[nonsense]\nkey = 1\n", is_text=True)


def test_non_nesting_levels_rejected():
    text = MINIMAL + "\n[time]\nlevels = 5 3\n"
    with pytest.raises(ValidationError) as exc:
        parse_scenario(text, is_text=True)
    assert any("levels" in v for v in exc.value.violations)


def test_load_table_must_cover_horizon():
    text = MINIMAL + "\n[time]\nT = 2.0\n\n[loads]\nrow = 0.0 0.0 0.0\nrow = 1.0 1.0 0.0\n"
    with pytest.raises(ValidationError) as exc:
        parse_scenario(text, is_text=True)
    assert any("cover" in v for v in exc.value.violations)


def test_comments_and_blank_lines_ignored():
    text = "# leading comment\n\n" + MINIMAL + "\n# trailing\n"
    scn = parse_scenario(text, is_text=True)
    assert scn.dim == 1
