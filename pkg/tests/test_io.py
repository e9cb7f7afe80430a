"""File formats, the report path, and the command-line surface."""

import json
import logging

import numpy as np
import pytest

from stmc import cli
from stmc.config import TrackerConfig
from stmc.core import Detection
from stmc.io import (
    FormatError,
    TrackWriter,
    read_calibrations,
    read_detections,
    read_track_files,
    run_tracking,
    write_calibrations,
    write_detections,
    write_ground_truth,
)
from stmc.report import evaluate_scene, render_figures, report_csv, report_table, write_report
from stmc.simulator import ScenarioSpec, generate
from stmc.tracker import FrameResult, TrackOutput


def _det(cam, frame, bbox, embedding, conf=1.0):
    return Detection(
        camera_id=cam,
        frame=frame,
        bbox=np.asarray(bbox, dtype=float),
        confidence=conf,
        embedding=np.asarray(embedding, dtype=float),
    )


# -- calibration files ---------------------------------------------------


def test_calibration_roundtrip(tmp_path):
    path = tmp_path / "calibration.json"
    matrices = [np.eye(3), np.array([[2.0, 0, 1], [0, 3.0, -1], [0, 0, 1]])]
    write_calibrations(path, ["north", "south"], matrices)
    ids, loaded = read_calibrations(path)
    assert ids == ["north", "south"]
    for original, back in zip(matrices, loaded):
        assert np.array_equal(original, back)


@pytest.mark.parametrize(
    "payload, message",
    [
        ("{not json", "invalid JSON"),
        ("[]", "non-empty JSON array"),
        ('[{"camera_id": "a"}]', "missing"),
        (
            '[{"camera_id": "a", "homography": [1,0,0,0,1,0,0,0,1]},'
            ' {"camera_id": "a", "homography": [1,0,0,0,1,0,0,0,1]}]',
            "duplicate camera_id",
        ),
        ('[{"camera_id": "a", "homography": [1,0,0,0,1,0,0,0]}]', "9 numbers"),
        ('[{"camera_id": "a", "homography": [1,0,0,2,0,0,0,0,1]}]', "singular"),
    ],
)
def test_calibration_rejects_malformed_files(tmp_path, payload, message):
    path = tmp_path / "calibration.json"
    path.write_text(payload, encoding="utf-8")
    with pytest.raises(FormatError, match=message):
        read_calibrations(path)


# -- detection files -----------------------------------------------------


def test_detections_roundtrip_in_frame_batches(tmp_path):
    path = tmp_path / "detections.jsonl"
    dets = [
        _det(0, 1, [0, 0, 10, 10], [1.0, 0.0], conf=0.9),
        _det(1, 1, [5, 5, 10, 10], [0.0, 1.0]),
        _det(0, 2, [1, 1, 10, 10], [1.0, 0.0]),
    ]
    write_detections(path, dets, ids=["a", "b"])
    batches = list(read_detections(path, ids=["a", "b"]))
    assert [(frame, len(batch)) for frame, batch in batches] == [(1, 2), (2, 1)]
    first = batches[0][1][0]
    assert first.camera_id == 0 and first.confidence == 0.9
    np.testing.assert_allclose(first.bbox, [0, 0, 10, 10])
    np.testing.assert_allclose(first.embedding, [1.0, 0.0], atol=1e-12)


def test_detections_blank_lines_are_skipped(tmp_path):
    path = tmp_path / "detections.jsonl"
    write_detections(path, [_det(0, 1, [0, 0, 1, 1], [1.0, 0.0])], ids=["a"])
    path.write_text(path.read_text(encoding="utf-8") + "\n\n", encoding="utf-8")
    assert [frame for frame, _ in read_detections(path, ids=["a"])] == [1]


def _detection_lines(*records):
    return "\n".join(json.dumps(r) for r in records) + "\n"


def _record(**overrides):
    base = {
        "camera_id": "a",
        "frame": 1,
        "bbox": [0.0, 0.0, 5.0, 5.0],
        "confidence": 1.0,
        "embedding": [1.0, 0.0],
    }
    base.update(overrides)
    return base


def test_detections_malformed_line_reports_its_number(tmp_path):
    path = tmp_path / "detections.jsonl"
    path.write_text(json.dumps(_record()) + "\n{broken\n", encoding="utf-8")
    with pytest.raises(FormatError, match=":2:"):
        list(read_detections(path, ids=["a"]))


def test_detections_unknown_camera_and_bad_shapes(tmp_path):
    path = tmp_path / "detections.jsonl"
    path.write_text(_detection_lines(_record(camera_id="zz")), encoding="utf-8")
    with pytest.raises(FormatError, match="unknown camera_id 'zz'"):
        list(read_detections(path, ids=["a"]))
    path.write_text(_detection_lines(_record(bbox=[1, 2, 3])), encoding="utf-8")
    with pytest.raises(FormatError, match="bbox must have 4 entries"):
        list(read_detections(path, ids=["a"]))
    path.write_text(
        _detection_lines(_record(), _record(embedding=[1.0, 0.0, 0.0])), encoding="utf-8"
    )
    with pytest.raises(FormatError, match="dimension 3 differs from 2"):
        list(read_detections(path, ids=["a"]))
    path.write_text(_detection_lines(_record(embedding=[0.0, 0.0])), encoding="utf-8")
    with pytest.raises(FormatError, match="zero norm"):
        list(read_detections(path, ids=["a"]))


def test_detections_renormalize_with_one_warning(tmp_path, caplog):
    path = tmp_path / "detections.jsonl"
    path.write_text(
        _detection_lines(_record(embedding=[2.0, 0.0]), _record(embedding=[0.0, 3.0])),
        encoding="utf-8",
    )
    with caplog.at_level(logging.WARNING, logger="stmc.io"):
        batches = list(read_detections(path, ids=["a"]))
    warnings = [r for r in caplog.records if "renormalizing" in r.message]
    assert len(warnings) == 1
    (_, batch), = batches
    np.testing.assert_allclose(batch[0].embedding, [1.0, 0.0])
    np.testing.assert_allclose(batch[1].embedding, [0.0, 1.0])


def test_detections_out_of_order_fall_back_to_sorted(tmp_path, caplog):
    path = tmp_path / "detections.jsonl"
    path.write_text(
        _detection_lines(_record(frame=3), _record(frame=1), _record(frame=2)),
        encoding="utf-8",
    )
    with caplog.at_level(logging.WARNING, logger="stmc.io"):
        frames = [frame for frame, _ in read_detections(path, ids=["a"])]
    assert frames == [1, 2, 3]
    assert any("not sorted" in r.message for r in caplog.records)


# -- track output files --------------------------------------------------


def test_track_writer_file_formats(tmp_path):
    result = FrameResult(
        frame=4,
        assignments=[7],
        outputs=[
            TrackOutput(
                identity=7,
                ground=np.array([1.5, -2.0]),
                boxes=[(0, np.array([10.0, 20.0, 30.0, 40.0]), 0.9)],
            )
        ],
        born=[7],
        merged=[(5, 7)],
    )
    with TrackWriter(tmp_path, ids=["a", "b"]) as writer:
        writer.write(result)
    cam_a = (tmp_path / "cam_a.txt").read_text(encoding="utf-8")
    assert cam_a == "4,7,10.000000,20.000000,30.000000,40.000000,0.900000,1.500000,-2.000000,-1\n"
    assert (tmp_path / "cam_b.txt").read_text(encoding="utf-8") == ""
    assert (tmp_path / "ground.txt").read_text(encoding="utf-8") == "4,7,1.500000,-2.000000\n"
    events = (tmp_path / "events.jsonl").read_text(encoding="utf-8").splitlines()
    assert events == ['{"born":7,"frame":4}', '{"frame":4,"merged":[5,7]}']


def test_track_files_roundtrip(tmp_path):
    result = FrameResult(
        frame=2,
        outputs=[
            TrackOutput(
                identity=3,
                ground=np.array([0.25, 0.75]),
                boxes=[
                    (0, np.array([1.0, 2.0, 3.0, 4.0]), 1.0),
                    (1, np.array([5.0, 6.0, 7.0, 8.0]), 0.5),
                ],
            )
        ],
    )
    with TrackWriter(tmp_path, ids=["x", "y"]) as writer:
        writer.write(result)
    image, ground = read_track_files(tmp_path, ids=["x", "y"])
    np.testing.assert_allclose(image[3][(0, 2)], [1, 2, 3, 4])
    np.testing.assert_allclose(image[3][(1, 2)], [5, 6, 7, 8])
    np.testing.assert_allclose(ground[3][2], [0.25, 0.75])


def test_track_files_reject_short_rows(tmp_path):
    (tmp_path / "cam_x.txt").write_text("1,2,3\n", encoding="utf-8")
    with pytest.raises(FormatError, match="at least 6"):
        read_track_files(tmp_path, ids=["x"])
    (tmp_path / "cam_x.txt").unlink()
    (tmp_path / "ground.txt").write_text("1,2,3\n", encoding="utf-8")
    with pytest.raises(FormatError, match="frame,id,x,y"):
        read_track_files(tmp_path, ids=["x"])


def test_ground_truth_export_roundtrip(tmp_path):
    data = generate(ScenarioSpec(seed=1, num_cameras=2, num_vehicles=2, num_frames=8))
    ids = ["0", "1"]
    write_ground_truth(tmp_path, data.gt_image, data.gt_ground, ids)
    image, ground = read_track_files(tmp_path, ids)
    assert set(image) == set(data.gt_image)
    for vid, slots in data.gt_image.items():
        assert set(image[vid]) == set(slots)
        for key, box in slots.items():
            np.testing.assert_allclose(image[vid][key], box, atol=1e-5)
    for vid, track in data.gt_ground.items():
        for frame, point in track.items():
            np.testing.assert_allclose(ground[vid][frame], point, atol=1e-5)


def test_run_tracking_steps_through_empty_frames(tmp_path):
    ids = ["a"]
    write_calibrations(tmp_path / "calibration.json", ids, [np.eye(3)])
    dets = [
        _det(0, 0, [-1, -2, 2, 2], [1.0, 0.0]),
        _det(0, 3, [-1, -2, 2, 2], [1.0, 0.0]),
    ]
    write_detections(tmp_path / "detections.jsonl", dets, ids)
    summary = run_tracking(
        tmp_path / "detections.jsonl",
        tmp_path / "calibration.json",
        TrackerConfig(alpha_proj=1.0),
        tmp_path / "tracks",
    )
    assert summary == {"frames": 4, "detections": 2, "identities": 1}
    ground = (tmp_path / "tracks" / "ground.txt").read_text(encoding="utf-8").splitlines()
    assert [line.split(",")[0] for line in ground] == ["0", "3"]
    assert all(line.split(",")[1] == "1" for line in ground)


# -- reports -------------------------------------------------------------


def _tiny_scene():
    gt_ground = {1: {t: np.array([float(t), 0.0]) for t in range(5)}}
    gt_image = {1: {(0, t): np.array([10.0 * t, 5.0, 20.0, 40.0]) for t in range(5)}}
    return gt_image, gt_ground


def test_evaluate_scene_perfect_prediction_scores_one():
    gt_image, gt_ground = _tiny_scene()
    report = evaluate_scene(gt_image, gt_ground, gt_image, gt_ground)
    for plane in ("image", "ground"):
        assert report[plane]["idf1"] == 1.0
        assert report[plane]["mota"] == 1.0
        assert report[plane]["idsw"] == 0


def test_report_csv_and_table_formats():
    gt_image, gt_ground = _tiny_scene()
    report = evaluate_scene(gt_image, gt_ground, gt_image, gt_ground)
    csv_text = report_csv(report)
    lines = csv_text.splitlines()
    assert lines[0] == "plane,idf1,idp,idr,idtp,idfp,idfn,mota,fn,fp,idsw,gt_total"
    assert lines[1].startswith("ground,1.000000,")
    assert lines[2].startswith("image,1.000000,")
    table = report_table(report)
    assert "IDF1" in table and "ground" in table and "image" in table


def test_write_report_figures_toggle(tmp_path):
    gt_image, gt_ground = _tiny_scene()
    report = evaluate_scene(gt_image, gt_ground, gt_image, gt_ground)
    csv_path = write_report(tmp_path / "with", report, gt_ground, gt_ground, figures=True)
    assert csv_path.name == "metrics.csv" and csv_path.exists()
    assert (tmp_path / "with" / "metrics.png").exists()
    assert (tmp_path / "with" / "trajectories.png").exists()
    write_report(tmp_path / "without", report, figures=False)
    assert (tmp_path / "without" / "metrics.csv").exists()
    assert not (tmp_path / "without" / "metrics.png").exists()


def test_rendered_figures_are_byte_deterministic(tmp_path):
    gt_image, gt_ground = _tiny_scene()
    report = evaluate_scene(gt_image, gt_ground, gt_image, gt_ground)
    first = render_figures(tmp_path / "one", report, gt_ground, gt_ground)
    second = render_figures(tmp_path / "two", report, gt_ground, gt_ground)
    for a, b in zip(first, second):
        assert a.read_bytes() == b.read_bytes()


# -- command line --------------------------------------------------------


def test_cli_solve_prints_labels(tmp_path, capsys):
    graph = tmp_path / "graph.txt"
    graph.write_text("3 2\n0 1 1.0\n1 2 -0.5\n", encoding="utf-8")
    assert cli.main(["solve", str(graph)]) == 0
    assert capsys.readouterr().out.strip() == "0 0 1"
    assert cli.main(["solve", str(graph), "--exact"]) == 0
    assert capsys.readouterr().out.strip() == "0 0 1"
    graph.write_text("3 2\n1 0 1.0\n2 1 -0.5\n", encoding="utf-8")  # reversed endpoints
    assert cli.main(["solve", str(graph)]) == 0
    assert capsys.readouterr().out.strip() == "0 0 1"


def test_cli_solve_rejects_wrong_edge_count(tmp_path, capsys):
    graph = tmp_path / "graph.txt"
    graph.write_text("2 2\n0 1 1.0\n", encoding="utf-8")
    assert cli.main(["solve", str(graph)]) == 1
    assert capsys.readouterr().err.startswith("error:")


def test_cli_track_rejects_bad_overrides(tmp_path, capsys):
    write_calibrations(tmp_path / "calibration.json", ["a"], [np.eye(3)])
    write_detections(tmp_path / "detections.jsonl", [], ["a"])
    args = [
        "track",
        "--detections", str(tmp_path / "detections.jsonl"),
        "--calibration", str(tmp_path / "calibration.json"),
        "--out", str(tmp_path / "tracks"),
    ]
    assert cli.main(args + ["--set", "lambda=1.5"]) == 1
    assert "error:" in capsys.readouterr().err
    assert cli.main(args + ["--profile", "nope"]) == 1
    assert "error:" in capsys.readouterr().err


def test_cli_requires_a_subcommand():
    with pytest.raises(SystemExit):
        cli.main([])
    with pytest.raises(SystemExit):
        cli.main(["frobnicate"])


def test_cli_pipeline_simulate_track_evaluate(tmp_path, capsys):
    dataset = tmp_path / "dataset"
    tracks = tmp_path / "tracks"
    reports = tmp_path / "report"
    assert cli.main([
        "simulate", "--seed", "5", "--cameras", "2", "--vehicles", "3",
        "--frames", "30", "--out", str(dataset),
    ]) == 0
    assert "simulate:" in capsys.readouterr().out
    for name in ("scenario.json", "calibration.json", "detections.jsonl", "gt/ground.txt",
                 "gt/cam_0.txt", "gt/cam_1.txt"):
        assert (dataset / name).exists(), name
    assert cli.main([
        "track",
        "--detections", str(dataset / "detections.jsonl"),
        "--calibration", str(dataset / "calibration.json"),
        "--out", str(tracks),
        "--profile", "synthehicle",
    ]) == 0
    assert "track:" in capsys.readouterr().out
    assert cli.main([
        "evaluate", "--tracks", str(tracks), "--gt", str(dataset / "gt"),
        "--out", str(reports),
    ]) == 0
    assert "IDF1" in capsys.readouterr().out
    csv_lines = (reports / "metrics.csv").read_text(encoding="utf-8").splitlines()
    scores = {line.split(",")[0]: float(line.split(",")[1]) for line in csv_lines[1:]}
    assert scores["image"] >= 0.99
    assert scores["ground"] >= 0.99
    assert (reports / "metrics.png").exists()
    assert (reports / "trajectories.png").exists()
