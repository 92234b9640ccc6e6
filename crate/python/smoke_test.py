"""Smoke test for the tunnel_ipm extension module.

Run after `maturin develop -m crates/python/Cargo.toml`, or with the built
library on PYTHONPATH.
"""

import json

import tunnel_ipm as t


def close(a, b, tol=1e-9):
    return abs(a - b) <= tol


def main():
    h = t.Homography.from_points(
        [(0, 0), (1, 0), (1, 1), (0, 1)],
        [(0, 0), (1, 0), (0.8, 0.6), (0.2, 0.6)],
    )
    x, y = h.apply(1, 1)
    assert close(x, 0.8) and close(y, 0.6)
    bx, by = h.inverse().apply(x, y)
    assert close(bx, 1) and close(by, 1)
    assert h.coefficients()[8] == 1.0

    assert t.iou((0, 0, 2, 2), (1, 0, 3, 2)) == 1 / 3
    assert close(t.average_precision([0.9, 0.8, 0.7], [True, False, True], 2), 5 / 6, 1e-12)

    cam = t.CameraModel()
    roi = cam.roi()
    to_world = roi.image_to_world()
    u, v = cam.project_point(3.6, 125.0, 0.0)
    assert t.assign_section((u - 2, v - 1, u + 2, v + 1), to_world) == 2
    w, hgt = roi.default_output_size()
    warp_h = roi.warp_homography(w, hgt)
    assert t.transform_bbox(warp_h, (u - 2, v - 1, u + 2, v + 1), w, hgt) is not None

    img = bytes(range(256)) * 4
    out = t.warp_image(img, 32, 32, 1, t.Homography.identity(), 32, 32)
    assert out == img

    try:
        t.Homography.from_points([(0, 0), (1, 0), (2, 0), (0, 1)], [(0, 0), (1, 0), (1, 1), (0, 1)])
    except t.TunnelIpmError as e:
        assert "collinear" in str(e) or "degenerate" in str(e)
    else:
        raise AssertionError("collinear corners were accepted")

    gt = t.generate_manifest(20, seed=7)
    assert len(json.loads(gt)["images"]) == 20
    dets = t.simulate_detections(gt, seed=7)
    aps, overall = t.evaluate(gt, dets)
    assert len(aps) == 4 and all(0.0 <= a <= 1.0 for a in aps) and 0.0 <= overall <= 1.0
    print("section AP", [round(a, 4) for a in aps], "overall", round(overall, 4))
    print("smoke test passed")


if __name__ == "__main__":
    main()
