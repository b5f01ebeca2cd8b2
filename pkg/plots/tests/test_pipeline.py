"""End-to-end check against a real harness run, driven through the CLI and
the CSV file format only."""

import shutil
import subprocess
import sys

import pytest

from regretplots import render as rp


@pytest.mark.skipif(shutil.which("cobo") is None, reason="benchmark CLI not installed")
def test_renders_real_aggregate(tmp_path):
    out = tmp_path / "bench"
    cmd = ["cobo", "bench", "--problem", "langermann", "--method", "random,random_cf",
           "--reps", "2", "--budget", "2", "--seed", "9", "--hyper-samples", "2",
           "--out", str(out)]
    proc = subprocess.run(cmd, capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    rendered = rp.render(out / "aggregate.csv", tmp_path / "figs", "png")
    assert len(rendered) == 1
    series = rendered[0]["series"]
    assert sorted(s["method"] for s in series) == ["random", "random_cf"]
    assert all(s["points"] == 3 for s in series)
    assert rendered[0]["path"].exists()
