use std::path::Path;
use std::process::{Command, Output};

fn stressnet(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stressnet"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn text(bytes: &[u8]) -> String {
    String::from_utf8_lossy(bytes).into_owned()
}

const SMALL: &str = "
[zone1]
nx = 12
ny = 12
[zone2]
nx = 12
ny = 12
[numerics]
t_end = 20
[output]
record_interval = 5
snapshot_times = 0, 10, 20
";

const UNIFORM: &str = "
[zone1]
nx = 8
ny = 8
v_P_max = 0
v_N_max = 0
initial = uniform
[zone2]
nx = 8
ny = 8
initial = uniform
[coupling]
kernels = uniform
[control]
mode = both
[numerics]
t_end = 25
[output]
snapshot_times = none
";

fn write(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn missing_config_exits_2() {
    let out = stressnet(&[
        "simulate",
        "--config",
        "/nonexistent/x.cfg",
        "--out",
        "/tmp/never",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(text(&out.stderr).contains("cannot read config"));
}

#[test]
fn bad_config_reports_line_and_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.cfg", "[zone1]\nd_P = 0.1\nd_P = 0.2\n");
    let out = stressnet(&[
        "simulate",
        "--config",
        &cfg,
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let err = text(&out.stderr);
    assert!(
        err.contains("d_P") && err.contains('2') && err.contains('3'),
        "{err}"
    );

    let cfg = write(dir.path(), "neg.cfg", "[zone1]\nd_P = -1\n");
    let out = stressnet(&["compare", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(text(&out.stderr).contains("zone1.d_P"));
}

#[test]
fn too_few_levels_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "a.cfg", SMALL);
    let out = stressnet(&["convergence", "--config", &cfg, "--levels", "2"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn simulate_writes_observables_and_snapshots() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "a.cfg", SMALL);
    let run = dir.path().join("run");
    let out = stressnet(&[
        "simulate",
        "--config",
        &cfg,
        "--scenario",
        "sc1",
        "--out",
        run.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", text(&out.stderr));
    let csv = std::fs::read_to_string(run.join("observables.csv")).unwrap();
    assert!(csv.starts_with("t,M_P1,M_N1,M_P2,M_N2,M_P,M_N,V,min_val,dt_used\n"));
    assert_eq!(csv.lines().count(), 1 + 5);
    for t in ["0", "10", "20"] {
        for z in ["1", "2"] {
            assert!(run.join(format!("zone{z}_t{t}.vtk")).is_file());
        }
    }
}

#[test]
fn compare_prints_verdicts_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "a.cfg", SMALL);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for d in [&a, &b] {
        let out = stressnet(&["compare", "--config", &cfg, "--out", d.to_str().unwrap()]);
        assert!(out.status.success(), "{}", text(&out.stderr));
        let stdout = text(&out.stdout);
        assert_eq!(
            stdout
                .lines()
                .filter(|l| l.starts_with("PASS") || l.starts_with("FAIL"))
                .count(),
            4
        );
    }
    for f in ["comparison.csv", "wc/observables.csv", "sc2/zone2_t20.vtk"] {
        assert_eq!(
            std::fs::read(a.join(f)).unwrap(),
            std::fs::read(b.join(f)).unwrap(),
            "{f}"
        );
    }
}

#[test]
fn oracle_passes_on_uniform_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "u.cfg", UNIFORM);
    let out = stressnet(&["oracle", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}{}",
        text(&out.stdout),
        text(&out.stderr)
    );
    assert!(text(&out.stdout).contains("PASS"));
    let csv = std::fs::read_to_string(dir.path().join("oracle.csv")).unwrap();
    assert!(csv.starts_with("t,P1,N1,P2,N2\n"));
}

#[test]
fn oracle_rejects_localized_kernels() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "g.cfg", SMALL);
    let out = stressnet(&["oracle", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
    assert!(text(&out.stderr).contains("coupling.kernels"));
}

#[test]
fn oracle_zero_horizon_passes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "u.cfg", &UNIFORM.replace("t_end = 25", "t_end = 0"));
    let out = stressnet(&["oracle", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
}

#[test]
fn invariant_violation_exits_3_with_cell_report() {
    // The local arrival integrand drains u_P2 at the reception peak faster
    // than diffusion can refill it.
    let dir = tempfile::tempdir().unwrap();
    let body = "[zone1]\nnx = 16\nny = 16\nmass = 0\n\
                [zone2]\nnx = 16\nny = 16\ninitial = uniform\nstressed_fraction = 1\nmass = 1\n\
                a = 0\nb = 0\nalpha_P = 0\nalpha_N = 0\nd_P = 0.01\nv_P_max = 0\nv_N_max = 0\n\
                [coupling]\nm_1to2 = 1\n[numerics]\nt_end = 20\n[output]\nsnapshot_times = none\n\
                [control]\nu2_integrand = local\nT0_2 = 0\nT1_2 = 0.1\n";
    let cfg = write(dir.path(), "l.cfg", body);
    let out = stressnet(&[
        "simulate",
        "--config",
        &cfg,
        "--scenario",
        "sc2",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    let err = text(&out.stderr);
    assert_eq!(out.status.code(), Some(3), "{err}");
    assert!(err.contains("at cell") && err.contains("rhs terms"), "{err}");
}

#[test]
fn convergence_reports_orders() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "d.cfg",
        "[zone1]\nnx = 8\nny = 8\nv_P_max = 0\nv_N_max = 0\na = 0\nb = 0\nalpha_P = 0\nalpha_N = 0\ninitial = cosine\nmass = 1\n\
         [zone2]\nnx = 8\nny = 8\nmass = 0\n[coupling]\nm_1to2 = 0\n[numerics]\nt_end = 0.05\n[output]\nsnapshot_times = none\n",
    );
    let out = stressnet(&["convergence", "--config", &cfg, "--levels", "3"]);
    let stdout = text(&out.stdout);
    assert_eq!(out.status.code(), Some(0), "{stdout}{}", text(&out.stderr));
    assert!(stdout.contains("observed order"));
}
