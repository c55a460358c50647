import pytest
from hypothesis import given, settings, strategies as st

from radcotrain.errors import ConfigError, ReportParseError
from radcotrain.sections import (
    DEFAULT_LAYOUT,
    SectionLayout,
    detect_headings,
    format_report,
    parse_report,
    segment,
)
from report_fixtures import HANDCRAFTED


@pytest.mark.parametrize("name,raw,expected", HANDCRAFTED, ids=[h[0] for h in HANDCRAFTED])
def test_handcrafted(name, raw, expected):
    if expected is None:
        with pytest.raises(ReportParseError):
            parse_report(raw)
    else:
        assert dict(parse_report(raw).sections) == expected


def test_detect_headings_offsets():
    raw = "History: x\nFINDINGS: y\nIMPRESSION: z"
    assert detect_headings(raw) == [("HISTORY", 0), ("FINDINGS", 11), ("IMPRESSION", 23)]


def test_no_headings():
    assert detect_headings("plain text with no structure") == []
    with pytest.raises(ReportParseError):
        parse_report("plain text with no structure")


def test_empty_and_duplicate_sections():
    with pytest.raises(ReportParseError):
        parse_report("")
    with pytest.raises(ReportParseError):
        parse_report("FINDINGS:\nIMPRESSION: y")
    with pytest.raises(ReportParseError):
        parse_report("FINDINGS: a\nFINDINGS: b\nIMPRESSION: c")


def test_layout_from_file(tmp_path):
    path = tmp_path / "layout.yaml"
    path.write_text("aliases:\n  SUMMARY: IMPRESSION\n")
    layout = SectionLayout.from_file(path)
    r = parse_report("FINDINGS: a\nSummary: b\n", layout)
    assert r.imp_text == "b"
    # built-in aliases survive
    assert layout.canonical("conclusion") == "IMPRESSION"


def test_alias_to_unknown_heading():
    with pytest.raises(ConfigError):
        DEFAULT_LAYOUT.with_aliases({"SUMMARY": "NOTES"})


_body = st.text(alphabet="abcdefghij .,\n0123456789", min_size=1, max_size=40).filter(
    lambda s: s.strip() and all(
        not DEFAULT_LAYOUT.pattern.match(line) for line in s.splitlines()
    )
)


@settings(max_examples=100, deadline=None)
@given(st.text(alphabet="abc:\n FINDINGSIMPRESON", max_size=80))
def test_segment_is_lossless(raw):
    assert "".join(s.heading + s.body for s in segment(raw)) == raw


@settings(max_examples=100, deadline=None)
@given(fnd=_body, imp=_body)
def test_format_parse_roundtrip(fnd, imp):
    sections = {"FINDINGS": fnd.strip(), "IMPRESSION": imp.strip()}
    assert dict(parse_report(format_report(sections)).sections) == sections
