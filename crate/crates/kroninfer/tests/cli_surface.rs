//! Binary-level checks of the command surface: exit codes, file round trips,
//! and golden-run determinism.

use std::fs;
use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_kroninfer"))
}

fn write_config(dir: &Path, body: &str) -> std::path::PathBuf {
    let path = dir.join("config.json");
    fs::write(&path, body).unwrap();
    path
}

const SMALL: &str = r#"{
    "m": 2, "l": 1, "p": 0.8, "x": [-5.5, 5.5, -1.5, 1.5],
    "seed": 42, "permutation_s": 0,
    "sizes": [16, 64], "seeds": [1, 2], "jobs": 1
}"#;

#[test]
fn usage_errors_exit_64() {
    // missing K entirely
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), SMALL);
    let out = bin()
        .args(["gen", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(tmp.path().join("out"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(64), "{}", String::from_utf8_lossy(&out.stderr));

    // unknown flag
    let out = bin().args(["gen", "--bogus"]).output().unwrap();
    assert_eq!(out.status.code(), Some(64));

    // no subcommand
    let out = bin().output().unwrap();
    assert_eq!(out.status.code(), Some(64));

    // help exits 0
    let out = bin().arg("--help").output().unwrap();
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn malformed_config_exits_4() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), "{this is not json");
    let out = bin()
        .args(["infer", "--config"])
        .arg(&config)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(4), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn malformed_edge_list_exits_4() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), SMALL);
    let edges = tmp.path().join("bad_edges.txt");
    fs::write(&edges, "#kron d=16 m=2 l=1 K=4 seed=1\n1 2 3\n").unwrap();
    let out = bin()
        .args(["infer", "-K", "4", "--config"])
        .arg(&config)
        .arg("--input")
        .arg(&edges)
        .arg("--out")
        .arg(tmp.path().join("out"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(4), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn unwritable_output_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), SMALL);
    // a file where the output directory should go
    let blocker = tmp.path().join("blocked");
    fs::write(&blocker, "file in the way").unwrap();
    let out = bin()
        .args(["gen", "-K", "4", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(blocker.join("sub"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn gen_infer_round_trip_with_exit_0() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), SMALL);
    let out_dir = tmp.path().join("out");
    let out = bin()
        .args(["gen", "-K", "4", "--dense", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("d=16"), "summary line: {stdout}");
    assert!(stdout.contains("density="), "summary line: {stdout}");

    // infer from the generated edge list (sidecar present -> metrics)
    let out = bin()
        .args(["infer", "--config"])
        .arg(&config)
        .arg("--input")
        .arg(out_dir.join("graph_edges.txt"))
        .arg("--out")
        .arg(&out_dir)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let json: serde_json::Value =
        serde_json::from_slice(&fs::read(out_dir.join("inference.json")).unwrap()).unwrap();
    assert_eq!(json["k"], 4);
    assert!(json["metrics"]["x_rel_error"].is_f64());

    // the dense KTEN1 adjacency written by gen matches the edge list
    let dense =
        kroninfer::tensor::io::read_kten1_file(out_dir.join("graph_adjacency.kten1")).unwrap();
    let file = fs::File::open(out_dir.join("graph_edges.txt")).unwrap();
    let (_, adj) = kroninfer::graph::io::read_edge_list(std::io::BufReader::new(file)).unwrap();
    assert_eq!(dense.data(), adj.data());
}

#[test]
fn golden_run_is_byte_identical() {
    // fixed seed 42: rerunning infer overwrites an identical file
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), SMALL);
    let out_dir = tmp.path().join("out");
    let run = || {
        let out = bin()
            .args(["infer", "-K", "6", "--config"])
            .arg(&config)
            .arg("--out")
            .arg(&out_dir)
            .output()
            .unwrap();
        assert_eq!(out.status.code(), Some(0));
        fs::read(out_dir.join("inference.json")).unwrap()
    };
    let first = run();
    let second = run();
    assert_eq!(first, second);
}

#[test]
fn fig_commands_write_expected_headers() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), SMALL);
    let out_dir = tmp.path().join("figs");
    for (cmd, file, header) in [
        ("fig-shrinkage", "fig_shrinkage.csv", "d,seed,empirical_error,theory_error"),
        ("fig-opnorm", "fig_opnorm.csv", "d,seed,opnorm_residual"),
        ("fig-spectrum", "fig_spectrum.csv", "singular_value_normalized"),
    ] {
        let out = bin()
            .args([cmd, "--config"])
            .arg(&config)
            .arg("--out")
            .arg(&out_dir)
            .output()
            .unwrap();
        assert_eq!(out.status.code(), Some(0), "{cmd}: {}", String::from_utf8_lossy(&out.stderr));
        let text = fs::read_to_string(out_dir.join(file)).unwrap();
        assert_eq!(text.lines().next().unwrap(), header, "{cmd}");
        // 17 significant digits: a mantissa dot plus 16 digits and an exponent
        let second = text.lines().nth(1).unwrap();
        let field = second.split(',').last().unwrap();
        assert!(field.contains('e') && field.contains('.'), "{cmd}: {field}");
        let mantissa = field.split('e').next().unwrap();
        let digits = mantissa.chars().filter(|c| c.is_ascii_digit()).count();
        assert_eq!(digits, 17, "{cmd}: {field}");
    }
    assert!(out_dir.join("fig_spectrum_law.csv").is_file());
    assert!(out_dir.join("fig_spectrum_spikes.csv").is_file());
}
