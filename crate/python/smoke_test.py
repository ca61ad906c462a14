"""Build the extension with cargo, import it and check a handful of values.

Usage: python3 python/smoke_test.py
"""

import math
import pathlib
import shutil
import subprocess
import sys
import tempfile

ROOT = pathlib.Path(__file__).resolve().parents[1]


def build():
    subprocess.run(
        ["cargo", "build", "--release", "-p", "exposure-py", "--features", "extension-module"],
        cwd=ROOT,
        check=True,
    )
    lib = ROOT / "target" / "release" / "libexposure_engine.so"
    dest = pathlib.Path(tempfile.mkdtemp()) / "exposure_engine.so"
    shutil.copy(lib, dest)
    sys.path.insert(0, str(dest.parent))


def close(a, b, tol=1e-9):
    assert math.isclose(a, b, rel_tol=tol, abs_tol=tol), (a, b)


def main():
    build()
    import exposure_engine as ee

    a = ee.Quad.from_rect(0, 0, 10, 10)
    b = ee.Quad.from_rect(5, 0, 15, 10)
    close(a.area, 100.0)
    close(ee.iou(a, b), 1 / 3)
    close(a.iou(a), 1.0)
    close(ee.polygon_area(a.intersection(b)), 50.0)
    close(ee.polygon_area(b.clip_to_frame(12, 12)), 70.0)

    r = ee.Quad.rotated_rect(50, 50, 40, 10, 30)
    close(r.orientation_deg(), 30.0, 1e-7)
    close(r.tightness_ratio(), ee.tr_rect(40, 10, 30), 1e-9)
    close(ee.tr_rect(40, 10, 0), 1.0)
    assert ee.Quad([(0, 0), (1, 1), (1, 0), (0, 1)]).degeneracy == "self-intersecting"

    close(ee.bce(0.5, 1.0), math.log(2))
    close(ee.focal_loss(0.5, True, gamma=0.0), math.log(2))
    close(ee.vfl(0.5, False, 0.0), 0.75 * 0.25 * math.log(2))
    close(ee.cls_loss([0.5], [False], [0.0], 1, 1), 0.75 * 0.25 * math.log(2))
    close(ee.total_loss(1.0, 2.0, 3.0), 6.0)
    ok, failed, grad_err = ee.losscheck()
    assert ok and not failed and grad_err < 1e-6, (failed, grad_err)
    ok, failed, _ = ee.losscheck(alpha=0.5)
    assert not ok and failed

    close(ee.frame_coverage([a, b], 20, 10), 1.0)
    m = ee.brand_metrics([0.0, 0.5, 0.25, 0.0], fps=2.0)
    assert m["frames_present"] == 2
    close(m["exposure_s"], 1.0)
    close(m["avg_cov_present_pct"], 37.5)
    assert ee.temporal_filter([True, False, True, False, False, True], 2, 1) == [
        True, True, True, False, False, False,
    ]

    res = ee.evaluate([([(0, a, 0.9), (0, b, 0.8)], [(0, a)])])
    close(res["map"], 1.0)
    assert res["num_true_positives"] == 1 and res["num_predictions"] == 2

    cls, q = ee.parse_label_line("3 0.1 0.1 0.5 0.1 0.5 0.4 0.1 0.4", 100, 200)
    assert cls == 3
    close(q.area, 40 * 60)
    assert ee.format_label_line(cls, q, 100, 200).split()[0] == "3"

    try:
        ee.parse_label_line("3 0.1 0.1", 100, 100)
    except ValueError:
        pass
    else:
        raise AssertionError("short label line accepted")

    print("python smoke test: ok")


if __name__ == "__main__":
    main()
