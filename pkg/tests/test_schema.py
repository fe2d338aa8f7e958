from pathlib import Path

from gxpo import schema
from gxpo.suites import SUITES
from gxpo.update import StepDiagnostics

ROOT = Path(__file__).resolve().parents[1]


def test_schema_file_is_current():
    assert (ROOT / "CSV_SCHEMA.md").read_text() == schema.render_markdown()


def test_every_suite_has_columns():
    assert set(schema.VERIFY) == set(SUITES)


def test_diagnostics_columns_match_dataclass():
    assert tuple(StepDiagnostics(step=0, phase="active", passes_this_step=3, norm_g0=1.0).as_row()) == \
        schema.DIAGNOSTICS


def test_value_formatting(tmp_path):
    p = schema.write_csv(tmp_path / "x.csv", ("a", "b", "c", "d", "e"),
                         [{"a": None, "b": True, "c": 0.1, "d": float("inf"), "e": 3}])
    assert p.read_text() == "a,b,c,d,e\n,true,0.1,inf,3\n"
