"""Smoke test for the riccilab Python bindings.

Build and install first:
    pip install -e crates/python --no-build-isolation
then run:
    python python/smoke_test.py
"""

import os
import tempfile

import riccilab_py as rl

FLAT = """
domain = "torus"
n = 3
resolution = 8
t_end = 0.01
steps = 20
grading = 2.0
[initial]
preset = "flat"
[diagnostics]
curvature_every = 10
"""

ROUND = """
domain = "rotsym_sphere"
n = 3
resolution = 64
t_end = 0.02
dt = 1e-4
[initial]
preset = "round"
"""


def main():
    assert rl.version() == rl.__version__
    assert "torus" in rl.info()

    flat = rl.run(FLAT)
    assert flat["failure"] is None
    assert len(flat["rows"]) == 21
    assert all(r["drift"] < 1e-10 for r in flat["rows"])
    assert all(abs(r["min_scal"]) < 1e-12 for r in flat["rows"] if r["min_scal"] is not None)

    sphere = rl.run(ROUND)
    for r in sphere["rows"]:
        assert abs(r["c2"] / (1.0 - 4.0 * r["t"]) - 1.0) < 1e-3

    pic, pic1, pic2 = rl.pic_margins(4, rl.constant_curvature(4, 1.0))
    assert abs(pic - 4.0) < 1e-8 and pic2 > 0.0

    with tempfile.TemporaryDirectory() as d:
        rl.run(FLAT, out=d)
        report = rl.check(os.path.join(d, "final.rlmf"))
        assert "lambda_parabolicity: 1.000000" in report

    try:
        rl.run(FLAT.replace("n = 3", "n = 9"))
    except ValueError:
        pass
    else:
        raise AssertionError("invalid config accepted")

    print("riccilab_py", rl.__version__, "smoke test passed")


if __name__ == "__main__":
    main()
