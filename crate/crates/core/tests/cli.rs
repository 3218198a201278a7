use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use fe_contours::io::{read_mask, read_snapshot, write_mask, write_pnm, Image};
use fe_contours::metrics::SegmentationMask;
use fe_contours::synthetic::{color_scene, disk_image};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_fe-contours"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Writes the synthetic colour scene, its trimap and truth into `dir`.
fn scene(dir: &Path, n: usize) -> (PathBuf, PathBuf, PathBuf) {
    let (image, trimap, truth) = color_scene(n, 2, 3).unwrap();
    let (img, tri, gt) = (dir.join("scene.ppm"), dir.join("trimap.pgm"), dir.join("gt.pgm"));
    write_pnm(&img, &image).unwrap();
    write_pnm(&tri, &Image::gray(n, n, trimap.codes().to_vec()).unwrap()).unwrap();
    write_mask(&gt, &truth, Some(fe_contours::graph::GridShape { rows: n, cols: n })).unwrap();
    (img, tri, gt)
}

#[test]
fn metrics_on_identical_masks() {
    let dir = tempfile::tempdir().unwrap();
    let (_, tri, gt) = scene(dir.path(), 20);
    let out = run(&["metrics", "--seg", p(&gt), "--gt", p(&gt), "--trimap", p(&tri)]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("Err 0.000"), "{text}");
    assert!(text.contains("ari=1"), "{text}");
}

#[test]
fn metrics_rejects_size_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.pgm");
    let b = dir.path().join("b.pgm");
    write_mask(&a, &SegmentationMask::new(vec![true; 6]), None).unwrap();
    write_mask(&b, &SegmentationMask::new(vec![true; 5]), None).unwrap();
    let out = run(&["metrics", "--seg", p(&a), "--gt", p(&b)]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn exit_codes() {
    assert_eq!(run(&["segment-image", "--bogus"]).status.code(), Some(1));
    assert_eq!(run(&[]).status.code(), Some(1));
    assert_eq!(run(&["--version"]).status.code(), Some(0));
    let out = run(&["evolve", "--graph", "/nonexistent/g.txt", "--output", "/tmp/x"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("/nonexistent/g.txt"));
    let out = bin().env("GC_THREADS", "zero").args(["scaling-bench", "--sizes", "4", "--steps", "1"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn segment_image_recovers_scene() {
    let dir = tempfile::tempdir().unwrap();
    let (img, tri, gt) = scene(dir.path(), 40);
    let mask = dir.path().join("mask.pgm");
    let contour = dir.path().join("contour.csv");
    let out = run(&[
        "segment-image",
        "--image",
        p(&img),
        "--trimap",
        p(&tri),
        "--gt",
        p(&gt),
        "--output",
        p(&mask),
        "--contour",
        p(&contour),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let (seg, _) = read_mask(&mask).unwrap();
    let (truth, _) = read_mask(&gt).unwrap();
    assert!(seg.agreement(&truth) >= 0.98);
    let text = std::fs::read_to_string(&contour).unwrap();
    assert!(text.lines().filter(|l| !l.is_empty()).all(|l| l.split(',').count() == 2));
}

#[test]
fn segment_image_is_thread_count_independent() {
    let dir = tempfile::tempdir().unwrap();
    let (img, tri, _) = scene(dir.path(), 32);
    let mut masks = Vec::new();
    for threads in ["1", "4"] {
        let mask = dir.path().join(format!("mask{threads}.pgm"));
        let out = bin()
            .env("GC_THREADS", threads)
            .args(["segment-image", "--image", p(&img), "--trimap", p(&tri), "--output", p(&mask)])
            .output()
            .unwrap();
        assert!(out.status.success());
        masks.push(std::fs::read(&mask).unwrap());
    }
    assert_eq!(masks[0], masks[1]);
}

#[test]
fn segment_image_without_trimap_needs_another_model() {
    let dir = tempfile::tempdir().unwrap();
    let img = dir.path().join("disk.pgm");
    write_pnm(&img, &disk_image(24, 0.25).unwrap()).unwrap();
    let mask = dir.path().join("mask.pgm");
    assert_eq!(run(&["segment-image", "--image", p(&img), "--output", p(&mask)]).status.code(), Some(1));
    let out = run(&[
        "segment-image",
        "--image",
        p(&img),
        "--output",
        p(&mask),
        "--model",
        "geodesic",
        "--narrowband",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let (seg, _) = read_mask(&mask).unwrap();
    let truth = SegmentationMask::new(fe_contours::synthetic::disk_truth(24, 0.25));
    assert!(seg.agreement(&truth) >= 0.95);
}

#[test]
fn evolve_zero_steps_round_trips_state() {
    let dir = tempfile::tempdir().unwrap();
    let img = dir.path().join("disk.pgm");
    write_pnm(&img, &disk_image(16, 0.3).unwrap()).unwrap();
    let poly = dir.path().join("poly.txt");
    std::fs::write(&poly, "0.2 0.2\n0.8 0.2\n0.8 0.8\n0.2 0.8\n").unwrap();
    let first = dir.path().join("s0.txt");
    let second = dir.path().join("s1.txt");
    let out = run(&["evolve", "--image", p(&img), "--polygon", p(&poly), "--steps", "0", "--output", p(&first)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let out = run(&["evolve", "--image", p(&img), "--init", p(&first), "--steps", "0", "--output", p(&second)]);
    assert!(out.status.success());
    assert_eq!(read_snapshot(&first).unwrap().c, read_snapshot(&second).unwrap().c);
}

#[test]
fn evolve_writes_trajectory() {
    let dir = tempfile::tempdir().unwrap();
    let img = dir.path().join("disk.pgm");
    write_pnm(&img, &disk_image(16, 0.3).unwrap()).unwrap();
    let snaps = dir.path().join("snaps");
    let state = dir.path().join("state.txt");
    let mask = dir.path().join("mask.pgm");
    let out = run(&[
        "evolve",
        "--image",
        p(&img),
        "--stepper",
        "explicit",
        "--steps",
        "6",
        "--snapshots",
        p(&snaps),
        "--snapshot-every",
        "2",
        "--output",
        p(&state),
        "--mask",
        p(&mask),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let mut names: Vec<String> = std::fs::read_dir(&snaps)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    assert_eq!(names, ["snapshot_000000.txt", "snapshot_000002.txt", "snapshot_000004.txt", "snapshot_000006.txt"]);
    let last = read_snapshot(&snaps.join("snapshot_000006.txt")).unwrap();
    assert_eq!(last.c, read_snapshot(&state).unwrap().c);
    assert_eq!(read_mask(&mask).unwrap().0.len(), 256);
}

#[test]
fn segment_graph_from_file() {
    let dir = tempfile::tempdir().unwrap();
    // A 21x21 lattice with a bright 7x7 block in the middle; triangulated on load.
    let mut text = String::from("graph 441 0\n");
    for y in 0..21 {
        for x in 0..21 {
            let bright = (7..=13).contains(&x) && (7..=13).contains(&y);
            text.push_str(&format!("v {} {} {}\n", x as f64 / 20.0, y as f64 / 20.0, if bright { 0.9 } else { 0.1 }));
        }
    }
    let graph = dir.path().join("g.txt");
    std::fs::write(&graph, text).unwrap();
    let poly = dir.path().join("poly.txt");
    std::fs::write(&poly, "0.1,0.1\n0.9,0.1\n0.9,0.9\n0.1,0.9\n").unwrap();
    let mask = dir.path().join("mask.pgm");
    let out = run(&[
        "segment-graph",
        "--graph",
        p(&graph),
        "--polygon",
        p(&poly),
        "--output",
        p(&mask),
        "--narrowband",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let (seg, img) = read_mask(&mask).unwrap();
    assert_eq!(img.num_pixels(), 441);
    assert!((40..=70).contains(&seg.foreground_count()), "{}", seg.foreground_count());
    assert!(stdout(&out).contains("converged"));
}

#[test]
fn config_file_and_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let img = dir.path().join("disk.pgm");
    write_pnm(&img, &disk_image(12, 0.3).unwrap()).unwrap();
    let conf = dir.path().join("run.conf");
    std::fs::write(&conf, "model = erosion\nstepper = explicit\nmax_steps = 3\n").unwrap();
    let state = dir.path().join("state.txt");
    let out = run(&["evolve", "--image", p(&img), "--config", p(&conf), "--output", p(&state)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(read_snapshot(&state).unwrap().step, 3);
    let out = run(&["evolve", "--image", p(&img), "--config", p(&conf), "--set", "max_steps=1", "--output", p(&state)]);
    assert!(out.status.success());
    assert_eq!(read_snapshot(&state).unwrap().step, 1);
    std::fs::write(&conf, "model = nonsense\n").unwrap();
    let out = run(&["evolve", "--image", p(&img), "--config", p(&conf), "--output", p(&state)]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn subsample_bench_is_deterministic() {
    let args = ["subsample-bench", "--size", "24", "--factor", "4", "--factor", "1", "--seed", "5", "--set", "max_outer=2"];
    let a = run(&args);
    let b = run(&args);
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(stdout(&a), stdout(&b));
    let text = stdout(&a);
    assert!(text.starts_with("factor 4 vertices"));
    assert_eq!(text.lines().count(), 2);
}

#[test]
fn scaling_bench_reports_slopes() {
    let out = run(&["scaling-bench", "--sizes", "8,12", "--steps", "1"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("slope_full") && text.contains("slope_narrow"));
    assert_eq!(run(&["scaling-bench", "--sizes", "1"]).status.code(), Some(1));
}
