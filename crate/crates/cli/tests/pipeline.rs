use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use logdist_core::learn::Labeling;
use logdist_core::synth::intro_traces;
use logdist_core::trace::Trace;

fn write_traces(dir: &Path, traces: &[Trace]) {
    std::fs::create_dir_all(dir).unwrap();
    for t in traces {
        let f = std::fs::File::create(dir.join(format!("{}.csv", t.id()))).unwrap();
        t.write_csv(f).unwrap();
    }
}

fn logdist(work: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_logdist"))
        .current_dir(work)
        .args(["--traces", "traces", "--out-dir", "out"])
        .args(args)
        .output()
        .unwrap()
}

fn ok(work: &Path, args: &[&str]) -> String {
    let o = logdist(work, args);
    assert!(
        o.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&o.stderr)
    );
    String::from_utf8(o.stdout).unwrap()
}

fn intro_workspace() -> (tempfile::TempDir, PathBuf) {
    let dir = tempfile::tempdir().unwrap();
    let work = dir.path().to_path_buf();
    write_traces(&work.join("traces"), &intro_traces());
    (dir, work)
}

fn distmat_rows(path: &Path) -> Vec<(String, String, f64, f64)> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[0].into(), f[1].into(), f[2].parse().unwrap(), f[3].parse().unwrap())
        })
        .collect()
}

#[test]
fn toy_pipeline_end_to_end() {
    let (_guard, work) = intro_workspace();
    ok(&work, &["distmat"]);
    ok(&work, &["cluster"]);
    let labels =
        Labeling::read_csv(std::fs::File::open(work.join("out/labels.csv")).unwrap()).unwrap();
    assert_eq!(labels.k(), 3);
    let mut groups: Vec<Vec<&str>> = labels
        .groups()
        .iter()
        .map(|g| g.iter().map(|&i| labels.ids()[i].as_str()).collect())
        .collect();
    groups.sort();
    assert_eq!(groups, vec![vec!["0", "1"], vec!["2", "3", "4"], vec!["5"]]);

    ok(&work, &["project"]);
    let extracted = ok(&work, &["extract"]);
    assert_eq!(extracted.lines().count(), 3);
    for k in 0..3 {
        let text = std::fs::read_to_string(work.join(format!("out/specs/label_{k}.psl"))).unwrap();
        assert!(text.lines().any(|l| l.starts_with("spec ")), "{text}");
    }
}

#[test]
fn distmat_is_complete_ordered_and_reproducible() {
    let (_guard, work) = intro_workspace();
    ok(&work, &["distmat"]);
    let path = work.join("out/distmat.csv");
    let first = std::fs::read(&path).unwrap();
    let rows = distmat_rows(&path);
    assert_eq!(rows.len(), 15);
    for (_, _, lo, hi) in &rows {
        assert!(0.0 <= *lo && lo <= hi);
    }
    let find = |a: &str, b: &str| {
        rows.iter()
            .find(|r| (r.0 == a && r.1 == b) || (r.0 == b && r.1 == a))
            .unwrap()
            .clone()
    };
    assert!(find("0", "1").3 < find("0", "5").2);

    ok(&work, &["distmat"]);
    assert_eq!(std::fs::read(&path).unwrap(), first);
}

#[test]
fn missing_input_exits_with_two() {
    let (_guard, work) = intro_workspace();
    let o = logdist(&work, &["boundary", "--trace", "nope"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("nope.csv"));

    let o = logdist(&work, &["cluster"]);
    assert_eq!(o.status.code(), Some(2), "cluster without a distance matrix");

    let o = logdist(&work, &["--config", "absent.toml", "distmat"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn bad_config_exits_with_two() {
    let (_guard, work) = intro_workspace();
    std::fs::write(work.join("bad.toml"), "delta = -1\n").unwrap();
    let o = logdist(&work, &["--config", "bad.toml", "distmat"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn all_true_trace_writes_sentinel() {
    let (_guard, work) = intro_workspace();
    let negative = Trace::new("neg", &[(0.0, -1.0), (0.5, -1.0), (1.0, -1.0)]).unwrap();
    write_traces(&work.join("traces"), &[negative]);
    let printed = ok(&work, &["boundary", "--trace", "neg"]);
    let bnd = std::fs::read_to_string(work.join(printed.trim())).unwrap();
    assert!(bnd.contains("degenerate = all_true"), "{bnd}");
}

#[test]
fn boundary_meets_requested_precision() {
    let (_guard, work) = intro_workspace();
    let printed = ok(&work, &["boundary", "--trace", "0", "--precision", "0.01"]);
    let file = std::fs::File::open(work.join(printed.trim())).unwrap();
    let b = logdist_core::boundary::BoundaryApprox::read(std::io::BufReader::new(file)).unwrap();
    assert!(b.degenerate.is_none());
    assert!(b.max_edge() <= 0.01);
}

#[test]
fn dimred_of_noisy_copies_has_three_modes() {
    let (_guard, work) = intro_workspace();
    std::fs::write(
        work.join("dimred.toml"),
        "trace_dir = \"traces\"\noutput_dir = \"out\"\n[dimred]\nnoise_copies = 100\nnoise_std = 0.3\n",
    )
    .unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_logdist"))
        .current_dir(&work)
        .args(["--config", "dimred.toml", "dimred"])
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let text = std::fs::read_to_string(work.join("out/dimred_points.csv")).unwrap();
    let mut ts: Vec<f64> = text
        .lines()
        .skip(1)
        .filter_map(|l| l.split(',').nth(1).and_then(|f| f.parse().ok()))
        .collect();
    assert_eq!(ts.len(), 600);
    ts.sort_by(f64::total_cmp);
    // modes are the runs left after cutting at gaps wider than 0.1
    let modes = 1 + ts.windows(2).filter(|w| w[1] - w[0] > 0.1).count();
    assert_eq!(modes, 3, "{ts:?}");

    let hist = std::fs::read_to_string(work.join("out/dimred_hist.csv")).unwrap();
    let total: usize = hist
        .lines()
        .skip(1)
        .map(|l| l.rsplit(',').next().unwrap().parse::<usize>().unwrap())
        .sum();
    assert_eq!(total, 600);
}
