"""Smoke test for the pymarkerforge extension.

Build and run:
    cargo build --release -p markerforge-py --features extension-module
    cp target/release/libpymarkerforge.so python/pymarkerforge.so
    python3 python/smoke_test.py
"""
import json
import math
import sys
import tempfile
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent))
import pymarkerforge as mf


def main():
    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)
        (tmp / "markers").mkdir()
        (tmp / "backgrounds").mkdir()
        for i in range(2):
            mf.Image.texture(320, 240, i).save(str(tmp / "markers" / f"m{i}.png"))
            mf.Image.texture(640, 480, 10 + i).save(str(tmp / "backgrounds" / f"b{i}.png"))

        n = mf.generate_dataset(str(tmp / "markers"), str(tmp / "backgrounds"), str(tmp / "ds"), count=3, seed=5)
        assert n == 3, n
        sample = tmp / "ds" / "samples" / "000000"
        t = mf.Transform.from_json((sample / "transform.json").read_text())
        gt = t.flow()
        assert mf.l_syn(gt, t) < 1e-9
        checked, failures = mf.gradcheck_syn(gt.offset(0.3, -0.7), t)
        assert checked > 0 and failures == 0, (checked, failures)

        flo = mf.FlowField.read_flo(str(sample / "flow.flo"))
        assert mf.pck(flo, gt, 1.0) == 1.0
        assert mf.epe(gt.offset(3.0, 4.0), gt) == 5.0

        marker = mf.Image.load(str(sample / "marker.png"))
        reference = mf.Image.load(str(sample / "reference.png"))
        s, p = mf.alignment(marker, gt, reference)
        assert s > 0.99 and p > 40, (s, p)
        assert mf.ssim(marker, marker) == 1.0

        try:
            est = mf.match_homography(marker, reference)
            print(f"homography baseline PCK-3 {mf.pck(est, gt, 3.0):.3f}")
        except mf.MarkerforgeError as e:
            print(f"homography baseline failed: {e}")

        report = json.loads(mf.run_benchmark(str(tmp / "ds" / "benchmark.json"), method="oracle"))
        pck_row = report["subsets"][0]["pck"]
        assert math.isclose(pck_row["pck1"], 1.0), pck_row

    print("pymarkerforge smoke test: ok")


if __name__ == "__main__":
    main()
