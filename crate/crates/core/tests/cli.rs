use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn marsm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_marsm"))
        .args(args)
        .output()
        .expect("spawn marsm")
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

const SMALL: &str = "[run]\nname = small\nsteps = 10\nseed = 3\n\
                     [problem]\nname = quadratic\nm = 4\nn = 3\n\
                     [optimizer]\nname = mars_m\nmode = approximate\n";

fn run_small(dir: &TempDir, text: &str) -> Output {
    let cfg = write(dir.path(), "c.ini", text);
    marsm(&["run", "--quiet", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()])
}

#[test]
fn run_writes_one_row_per_step_plus_initial() {
    let dir = TempDir::new().unwrap();
    let o = run_small(&dir, SMALL);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).is_empty());
    let csv = fs::read_to_string(dir.path().join("small_seed3.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next(),
        Some("step,loss,grad_norm_fro,true_grad_norm,update_rms,eta,elapsed_ns")
    );
    let steps: Vec<u64> = lines.map(|l| l.split(',').next().unwrap().parse().unwrap()).collect();
    assert_eq!(steps, (0..=10).collect::<Vec<_>>());
    assert!(csv.ends_with('\n') && !csv.contains('"') && !csv.contains('\r'));
    assert!(dir.path().join("small_seed3.summary.txt").exists());
}

#[test]
fn seed_flag_overrides_config() {
    let dir = TempDir::new().unwrap();
    let cfg = write(dir.path(), "c.ini", SMALL);
    let o = marsm(&["run", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap(), "--seed", "9"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(dir.path().join("small_seed9.csv").exists());
    assert!(stdout(&o).contains("small_seed9.csv"));
}

#[test]
fn unknown_key_exits_2_and_names_it() {
    let dir = TempDir::new().unwrap();
    let o = run_small(&dir, &format!("{SMALL}nesterovv = true\n"));
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("nesterovv"), "{}", stderr(&o));

    let o = run_small(&dir, &SMALL.replace("[problem]", "[problme]"));
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("problme"));
}

#[test]
fn missing_config_file_exits_2() {
    let o = marsm(&["run", "--config", "/nonexistent/marsm.ini"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn divergence_exits_3_with_step() {
    let dir = TempDir::new().unwrap();
    let text = "[run]\nname = boom\nsteps = 50\n\
                [problem]\nname = quadratic\nm = 4\nn = 4\ncoupling = 2\n\
                [optimizer]\nname = adamw\nschedule = constant\nlr = 1e300\n";
    let o = run_small(&dir, text);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    assert!(stderr(&o).contains("step"));
}

#[test]
fn rerun_from_summary_is_identical() {
    let dir = TempDir::new().unwrap();
    let text = "[run]\nname = replay\nsteps = 60\nseed = 11\nstride = 7\n\
                [problem]\nname = lowrank\nm = 6\nn = 5\nrank = 2\n\
                [optimizer]\nname = mars_m\nmode = exact\ngamma = 0.1\nschedule = cosine\n\
                max_lr = 0.05\nmin_lr = 0.001\nwarmup_steps = 10\ntotal_steps = 60\n";
    let first = dir.path().join("first");
    let second = dir.path().join("second");
    let cfg = write(dir.path(), "c.ini", text);
    let o = marsm(&["run", "--quiet", "--config", cfg.to_str().unwrap(), "--out", first.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let sidecar = first.join("replay_seed11.summary.txt");
    let o = marsm(&["run", "--quiet", "--config", sidecar.to_str().unwrap(), "--out", second.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let strip = |p: PathBuf| -> String {
        fs::read_to_string(p)
            .unwrap()
            .lines()
            .map(|l| l.rsplit_once(',').unwrap().0.to_string())
            .collect::<Vec<_>>()
            .join("\n")
    };
    assert_eq!(strip(first.join("replay_seed11.csv")), strip(second.join("replay_seed11.csv")));
    let summary = fs::read_to_string(&sidecar).unwrap();
    assert!(summary.contains(&format!("version = {}", env!("CARGO_PKG_VERSION"))));
    assert!(summary.contains("mode = exact"));
}

#[test]
fn noiseless_identity_quadratic_descends() {
    let dir = TempDir::new().unwrap();
    for opt in ["muon", "moonlight\nlambda = 0", "mars_m\ngamma = 0\nlambda = 0", "clipped_ema\nlambda = 0"] {
        let text = format!(
            "[run]\nname = descent\nsteps = 200\n\
             [problem]\nname = quadratic\nm = 8\nn = 8\nsigma = 0\ncoupling = 0\n\
             [optimizer]\nname = {opt}\nschedule = constant\nlr = 0.01\n"
        );
        let o = run_small(&dir, &text);
        assert!(o.status.success(), "{opt}: {}", stderr(&o));
        let csv = fs::read_to_string(dir.path().join("descent_seed0.csv")).unwrap();
        let losses: Vec<f64> = csv
            .lines()
            .skip(2)
            .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
            .collect();
        for w in losses.windows(2) {
            assert!(w[1] <= w[0], "{opt}: loss rose from {} to {}", w[0], w[1]);
        }
        assert!(losses.last().unwrap() < &losses[0]);
    }
}

#[test]
fn fit_slope_prints_the_slope() {
    let dir = TempDir::new().unwrap();
    let mut csv = String::from("step,value\n");
    for t in 0..=400u32 {
        let t = f64::from(t);
        // running mean of these increments is exactly t^(-1/3)
        let v = if t == 0.0 { 0.0 } else { t.powf(2.0 / 3.0) - (t - 1.0).powf(2.0 / 3.0) };
        csv.push_str(&format!("{t},{v}\n"));
    }
    let path = write(dir.path(), "s.csv", &csv);
    let o = marsm(&["fit-slope", path.to_str().unwrap(), "--column", "value", "--quiet"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let slope: f64 = stdout(&o).trim().parse().unwrap();
    assert!((slope + 1.0 / 3.0).abs() < 1e-6, "{slope}");

    let o = marsm(&["fit-slope", path.to_str().unwrap(), "--column", "missing"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("missing"));
}

fn check_line<'a>(out: &'a str, name: &str) -> &'a str {
    out.lines()
        .find(|l| l.split_whitespace().nth(1) == Some(name))
        .unwrap_or_else(|| panic!("no line for {name} in\n{out}"))
}

#[test]
fn verify_reports_every_check_and_fault_injection_bites() {
    let o = marsm(&["verify"]);
    let out = stdout(&o);
    let failing: Vec<&str> = out.lines().filter(|l| l.starts_with("FAIL")).collect();
    assert_eq!(o.status.code(), Some(if failing.is_empty() { 0 } else { 1 }));
    assert!(check_line(&out, "optim.clip_norm_bound").starts_with("PASS"));
    assert!(check_line(&out, "polar.quintic_sv_min").starts_with("PASS"));
    assert!(check_line(&out, "polar.cubic_agreement").starts_with("PASS"));

    let o = marsm(&["verify", "--ns-steps", "1"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(check_line(&stdout(&o), "polar.quintic_sv_min").starts_with("FAIL"));

    let o = marsm(&["verify", "--clip-threshold", "2"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(check_line(&stdout(&o), "optim.clip_norm_bound").starts_with("FAIL"));
}

#[test]
fn compare_duplicate_config_gives_identical_rows() {
    let dir = TempDir::new().unwrap();
    let body = "steps = 80\nstride = 5\n[problem]\nname = mlp\ninput = 6\nhidden = 8\nclasses = 3\n\
                batch = 16\ndataset_size = 128\n[optimizer]\nname = moonlight\nschedule = constant\nlr = 0.02\n";
    let a = write(dir.path(), "a.ini", &format!("[run]\nname = left\n{body}"));
    let b = write(dir.path(), "b.ini", &format!("[run]\nname = right\n{body}"));
    let out = dir.path().join("cmp");
    let o = marsm(&[
        "compare",
        "--quiet",
        "--config",
        a.to_str().unwrap(),
        "--config",
        b.to_str().unwrap(),
        "--seeds",
        "1,2,3",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let table = fs::read_to_string(out.join("compare.csv")).unwrap();
    let rows: Vec<Vec<&str>> = table.lines().skip(1).map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 2);
    // every statistic matches; rank breaks the tie by position
    assert_eq!(rows[0][1..6], rows[1][1..6]);
    for seed in 1..=3 {
        assert!(out.join(format!("left_seed{seed}.csv")).exists());
        assert!(out.join(format!("right_seed{seed}.csv")).exists());
    }
}

#[test]
fn compare_rejects_single_config_and_reports_failing_run() {
    let dir = TempDir::new().unwrap();
    let good = write(dir.path(), "g.ini", SMALL);
    let o = marsm(&["compare", "--config", good.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));

    let bad = write(
        dir.path(),
        "b.ini",
        "[run]\nname = boom\nsteps = 50\n[problem]\nname = quadratic\nm = 4\nn = 4\ncoupling = 2\n\
         [optimizer]\nname = adamw\nschedule = constant\nlr = 1e300\n",
    );
    let o = marsm(&[
        "compare",
        "--config",
        good.to_str().unwrap(),
        "--config",
        bad.to_str().unwrap(),
        "--seed",
        "4",
        "--out",
        dir.path().join("cmp").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(3));
    let err = stderr(&o);
    assert!(err.contains("boom") && err.contains("seed 4"), "{err}");
}
