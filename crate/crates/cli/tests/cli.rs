use std::path::Path;
use std::process::{Command, Output};

use polardual::certificate::{tamper, CertificateFile};
use polardual::ConvexBody;
use rand::SeedableRng;

fn polardual(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_polardual"))
        .args(args)
        .env_remove("POLARDUAL_SEED")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn square_file(dir: &Path) -> String {
    let path = dir.join("square2.json");
    std::fs::write(&path, ConvexBody::cube(2, 1.0).unwrap().to_json()).unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn selftest_exits_zero() {
    let o = polardual(&["selftest"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(!stdout(&o).contains("FAIL"));
}

#[test]
fn cover_of_square_by_itself() {
    let dir = tempfile::tempdir().unwrap();
    let square = square_file(dir.path());
    let o = polardual(&["cover", "--K", &square, "--T", &square]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stderr(&o).contains("[1, 1]"));
    assert_eq!(stdout(&o), "rho,restricted,lo,hi,flags\n1,false,1,1,\n");
}

#[test]
fn tampered_certificate_is_refuted_with_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let good = dir.path().join("good.json");
    let o = polardual(&["cover", "--K", "ball:2:1.5", "--T", "linf:2", "--certificate", good.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(polardual(&["verify", good.to_str().unwrap()]).status.code(), Some(0));

    let file = CertificateFile::read(&good).unwrap();
    let (bad, what) = tamper(&file, &mut rand_chacha::ChaCha8Rng::seed_from_u64(3)).unwrap();
    let bad_path = dir.path().join("tampered-certificate.json");
    bad.write(&bad_path).unwrap();
    let o = polardual(&["verify", bad_path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1), "{what}");
    assert!(stderr(&o).contains("refuted"), "{}", stderr(&o));
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(polardual(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(polardual(&[]).status.code(), Some(2));
    let o = polardual(&["--bisect-tol", "-1", "selftest"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("bisect-tol"));
    assert_eq!(polardual(&["cover", "--K", "cube:2", "--T", "linf:2"]).status.code(), Some(2));
    assert_eq!(polardual(&["duality-scan", "--family", "spheres"]).status.code(), Some(2));
}

#[test]
fn config_file_sits_below_flags_and_rejects_unknown_keys() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "format = \"json\"\nseed = 5\n").unwrap();
    let args = ["cover", "--K", "linf:1:2", "--T", "linf:1", "--config", cfg.to_str().unwrap()];
    let o = polardual(&args);
    assert!(stdout(&o).trim_start().starts_with('{'), "{}", stdout(&o));
    let mut with_flag = args.to_vec();
    with_flag.extend(["--format", "csv"]);
    assert!(stdout(&polardual(&with_flag)).starts_with("rho,"));

    std::fs::write(&cfg, "seeds = 5\n").unwrap();
    let o = polardual(&args);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("seeds"), "{}", stderr(&o));
}

#[test]
fn environment_mirrors_flags() {
    let o = Command::new(env!("CARGO_BIN_EXE_polardual"))
        .args(["cover", "--K", "linf:1:2", "--T", "linf:1"])
        .env("POLARDUAL_FORMAT", "json")
        .output()
        .unwrap();
    assert!(stdout(&o).trim_start().starts_with('{'));
}

#[test]
fn outputs_are_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("scan.toml");
    std::fs::write(&spec, "family = \"ellipsoid\"\na_grid = [1.0]\n[params]\ncount = 1\n").unwrap();
    let args = ["duality-scan", "--spec", spec.to_str().unwrap(), "--seed", "4"];
    let (a, b) = (polardual(&args), polardual(&args));
    assert_eq!(a.status.code(), Some(0), "{}", stderr(&a));
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(stdout(&a).lines().count(), 3);
}

#[test]
fn output_flag_writes_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("e.csv");
    let o = polardual(&["entropy", "--K", "linf:1:4", "--T", "linf:1", "--k-max", "3", "-o", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = std::fs::read_to_string(out).unwrap();
    assert!(text.starts_with("pair_id,k,e_lo,e_hi,cover_lo,cover_hi,flags\n"));
    assert_eq!(text.lines().count(), 5);
}

#[test]
fn help_lists_every_flag() {
    let top = stdout(&polardual(&["cover", "--help"]));
    for flag in [
        "--K", "--T", "--rho", "--restricted", "--certificate", "--config", "--seed", "--bisect-tol", "--eta",
        "--grid-budget", "--threads", "--format", "--output", "--convention",
    ] {
        assert!(top.contains(flag), "cover help misses {flag}");
    }
    for cmd in ["entropy", "separation", "gamma", "duality-scan", "gamma-duality", "verify", "selftest"] {
        let help = polardual(&[cmd, "--help"]);
        assert_eq!(help.status.code(), Some(0));
        assert!(stdout(&help).contains("--seed"), "{cmd} help misses --seed");
    }
}
