"""Figure-rendering tests for the benchmark report module."""

import io

from n3compose import benchmark, report
from n3compose.benchmark import ChainSpec


def test_render_from_timing_records(tmp_path):
    records = benchmark.run_benchmark(
        [ChainSpec(n=2), ChainSpec(n=4), ChainSpec(n=2, dummies=3)], trials=1)
    written = report.render_figures(records, str(tmp_path))
    names = sorted(p.rsplit("/", 1)[-1] for p in written)
    assert names == ["reasoning_vs_dummies.png", "reasoning_vs_n.png"]
    for path in written:
        with open(path, "rb") as fh:
            assert fh.read(8).startswith(b"\x89PNG")


def test_render_from_csv_rows(tmp_path):
    records = benchmark.run_benchmark([ChainSpec(n=2), ChainSpec(n=4)], trials=1)
    buf = io.StringIO()
    benchmark.write_csv(records, buf)
    buf.seek(0)
    rows = benchmark.read_csv(buf)
    written = report.render_figures(rows, str(tmp_path))
    assert [p.rsplit("/", 1)[-1] for p in written] == ["reasoning_vs_n.png"]


def test_no_data_renders_nothing(tmp_path):
    assert report.render_figures([], str(tmp_path)) == []
