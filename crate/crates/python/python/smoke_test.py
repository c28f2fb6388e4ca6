"""Smoke test for the cloi_instance_py extension module."""

import os
import tempfile

import cloi_instance_py as ci


def main():
    # two cylinder lines 10 cm apart; a valve line continues the second one
    positions = [(i * 0.01, 0.0, 0.0) for i in range(30)]
    positions += [(i * 0.01, 0.1, 0.0) for i in range(30)]
    positions += [(0.305 + i * 0.01, 0.1, 0.0) for i in range(30)]
    classes = ["cylinder"] * 60 + ["valve"] * 30
    gt = [0] * 30 + [1] * 30 + [2] * 30
    cloud = ci.PointCloud(positions, classes, gt)
    assert len(cloud) == 90

    flags = ci.class_boundaries(cloud, radius=0.04)
    assert [i for i, f in enumerate(flags) if f] == [57, 58, 59, 60, 61, 62]

    labels = ci.segment(cloud, epsilon=0.04, mu=5)
    assert labels == [0] * 30 + [1] * 30 + [2] * 30

    report = ci.score(cloud.with_predictions(labels))
    assert report["0.5"]["mprec"] == 1.0 and report["0.5"]["mrec"] == 1.0

    scene = ci.synth_profile("dense", seed=7)
    pred = ci.segment(scene)
    assert ci.score(scene.with_predictions(pred), [0.75])["0.75"]["mrec"] == 1.0

    with tempfile.TemporaryDirectory() as d:
        path = os.path.join(d, "scene.pts")
        scene.with_predictions(pred).save(path, predictions=True)
        back = ci.PointCloud.load(path)
        assert back.positions() == scene.positions()
        assert back.predictions() == pred
        try:
            ci.PointCloud.load(os.path.join(d, "missing.pts"))
        except OSError:
            pass
        else:
            raise AssertionError("missing file must raise")

    idx = ci.farthest_points([(0, 0, 0), (1, 0, 0), (0.5, 0, 0), (0.9, 0, 0)], 2, seed=3)
    assert len(set(idx)) == 2 and idx[1] in (0, 1)

    try:
        ci.segment(cloud, epsilon=-1.0)
    except ValueError:
        pass
    else:
        raise AssertionError("negative epsilon must raise")
    print("python smoke test: ok")


if __name__ == "__main__":
    main()
