mod common;

use common::zoomlab;

fn stdout(args: &[&str]) -> String {
    let o = zoomlab(args, 2);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    String::from_utf8(o.stdout).unwrap()
}

fn field<'a>(text: &'a str, key: &str) -> &'a str {
    text.lines()
        .find_map(|l| l.strip_prefix(key).and_then(|r| r.strip_prefix('\t')))
        .unwrap_or_else(|| panic!("no {key} in\n{text}"))
}

#[test]
fn measure_build_counts_cantor_cylinders() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.txt");
    let out = stdout(&[
        "measure-build",
        "--spec",
        "cantor3",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(field(&out, "leaves"), "1024");
    assert_eq!(field(&out, "total"), "1.000000000000");
    let tree =
        zoomlab::TreeMeasure::from_columnar(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(tree.len(), 1024);
}

#[test]
fn measure_build_lebesgue_square() {
    let out = stdout(&["measure-build", "--spec", "lebesgue2", "--depth", "5"]);
    assert_eq!(field(&out, "leaves"), "1024");
}

#[test]
fn header_echoes_defaults_and_seed() {
    let out = stdout(&["dimension", "--spec", "nu10", "--depth", "8"]);
    for line in [
        "# zoomlab dimension",
        "# seed = 0",
        "# spec = nu10",
        "# n_min = 4",
        "# depth = 8",
        "# samples = 16",
    ] {
        assert!(out.contains(line), "{line} missing from\n{out}");
    }
}

#[test]
fn dimension_table_values() {
    let value = |spec: &str| -> f64 {
        let out = stdout(&["dimension", "--spec", spec]);
        field(&out, "entropy")
            .split('\t')
            .next()
            .unwrap()
            .parse()
            .unwrap()
    };
    assert!((value("cantor3") - 0.6309).abs() < 0.05);
    assert!((value("nu10") - 0.3010).abs() < 0.01);
    assert!((value("lebesgue2") - 2.0).abs() < 1e-9);
}

#[test]
fn invalid_probabilities_fail_validation() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(
        &path,
        "kind = \"digit\"\n[[axes]]\norder = \"iid\"\nbase = 2\nprobs = [0.7, 0.7]\n",
    )
    .unwrap();
    let o = zoomlab(&["measure-build", "--spec", path.to_str().unwrap()], 1);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("[0.7, 0.7]"));
}

#[test]
fn toml_errors_carry_a_location() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("broken.toml");
    std::fs::write(&path, "kind = \"digit\"\naxes = [\n").unwrap();
    let o = zoomlab(&["dimension", "--spec", path.to_str().unwrap()], 1);
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("broken.toml") && err.contains("line"), "{err}");
}

#[test]
fn numerical_failures_exit_with_two() {
    // base-3 keys overflow past depth 33
    let o = zoomlab(&["measure-build", "--spec", "cantor3", "--depth", "40"], 1);
    assert_eq!(
        o.status.code(),
        Some(2),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
}

#[test]
fn scenery_of_lebesgue_is_flat_and_half_line_is_not_palm() {
    let out = stdout(&["scenery", "--spec", "lebesgue1"]);
    let csv = out.split("t,distance_to_final\n").nth(1).unwrap();
    for line in csv.lines() {
        let d: f64 = line.split(',').nth(1).unwrap().parse().unwrap();
        assert!(d < 1e-12, "{line}");
    }
    let out = stdout(&["scenery", "--spec", "halfline"]);
    let palm: f64 = field(&out, "quasi_palm").parse().unwrap();
    assert!(palm > 0.0);
}

#[test]
fn conserve_cantor_square() {
    let out = stdout(&["conserve", "--spec", "cantor3x3"]);
    assert!(
        out.contains("verdict=consistent with conservation"),
        "{out}"
    );
}

#[test]
fn counterexample_default_report() {
    let out = stdout(&["counterexample"]);
    assert!(out.contains("distinct=true"), "{out}");
    assert!(out.contains("dim_C = 0.575717"), "{out}");
}

#[test]
fn cp_on_cantor_has_constant_marginal() {
    let out = stdout(&["cp", "--samples", "256", "--center-atoms", "0"]);
    assert_eq!(field(&out, "marginal_constant"), "true");
}

#[test]
fn cp_rejects_mixed_axes() {
    let o = zoomlab(&["cp", "--spec", "lebesgue1"], 1);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn unknown_flag_is_a_validation_error() {
    let o = zoomlab(&["dimension", "--no-such-flag"], 1);
    assert_eq!(o.status.code(), Some(1));
}
