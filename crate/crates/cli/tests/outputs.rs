use std::fs;
use std::path::Path;
use std::process::Command;

use ddebif::continuation::default_measures;
use ddebif::branch_measure;
use ddebif_cli::dto::BranchDto;
use ddebif_cli::plan::RunPlan;
use ddebif_cli::run::{run, RunOptions};
use serde_json::Value;

const PLAN: &str = include_str!("../plans/hom_neural.toml");
const SCHEMA: &str = include_str!("../schema/branch.schema.json");

fn quiet(dir: &Path) -> RunOptions {
    RunOptions { out: Some(dir.to_path_buf()), verbose: Some(0), seed_tolerance: None }
}

fn branch_files(dir: &Path) -> Vec<std::path::PathBuf> {
    let mut v: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| {
            let n = p.file_name().unwrap().to_str().unwrap();
            n.ends_with(".json") && n.as_bytes()[0].is_ascii_digit()
        })
        .collect();
    v.sort();
    v
}

#[test]
fn branch_files_validate_and_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let plan = RunPlan::parse(PLAN).unwrap();
    let report = run(&plan, &quiet(dir.path())).unwrap();
    assert!(report.failure.is_none());
    let schema: Value = serde_json::from_str(SCHEMA).unwrap();
    let validator = jsonschema::validator_for(&schema).unwrap();
    let files = branch_files(dir.path());
    assert_eq!(files.len(), plan.stages.len());
    let mut kinds = Vec::new();
    for f in &files {
        let text = fs::read_to_string(f).unwrap();
        let v: Value = serde_json::from_str(&text).unwrap();
        let errors: Vec<String> = validator.iter_errors(&v).map(|e| e.to_string()).collect();
        assert!(errors.is_empty(), "{}: {:?}", f.display(), errors);
        let dto: BranchDto = serde_json::from_value(v).unwrap();
        kinds.push(dto.kind.clone());
        let points = dto.points().unwrap();
        let again: Vec<_> = points.iter().map(ddebif_cli::dto::PointDto::from).collect();
        assert_eq!(again, dto.points, "{}", f.display());
        if dto.methods.is_some() {
            let b = dto.to_branch().unwrap();
            let back = BranchDto::from_branch(&b, &dto.parameter_names);
            assert_eq!(serde_json::to_string_pretty(&back).unwrap() + "\n", text);
        }
    }
    assert!(kinds.iter().any(|k| k == "hcli") && kinds.iter().any(|k| k == "psol"));

    let bad: Value = serde_json::json!({"kind": "stst", "parameter_names": [], "points": [{"kind": "stst", "parameter": [1.0]}]});
    assert!(!validator.is_valid(&bad));
}

/// Measures CSV: one row per point, cells equal to the measure values,
/// shorter rows padded with empty cells.
#[test]
fn measure_tables_follow_branch_points() {
    let dir = tempfile::tempdir().unwrap();
    let plan = RunPlan::parse(PLAN).unwrap();
    let report = run(&plan, &quiet(dir.path())).unwrap();
    let mut checked = 0;
    for (k, r) in report.records.iter().enumerate() {
        let Some(b) = r.output.branch() else { continue };
        let path = dir.path().join(format!("{:02}_{}_measures.csv", k + 1, r.name));
        let text = fs::read_to_string(&path).unwrap();
        let rows: Vec<Vec<&str>> = text.lines().skip(1).map(|l| l.split(',').collect()).collect();
        assert_eq!(rows.len(), b.points.len());
        let (xm, ym) = default_measures(false, b).unwrap();
        let (xs, _) = branch_measure(b, &xm).unwrap();
        let (ys, _) = branch_measure(b, &ym).unwrap();
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row[0], (i + 1).to_string());
            assert_eq!(row[1].parse::<f64>().unwrap(), xs[i][0]);
            assert_eq!(row[2].parse::<f64>().unwrap(), ys[i][0]);
        }
        if r.name == "stst" {
            let (_, sm) = default_measures(true, b).unwrap();
            let (vals, lens) = branch_measure(b, &sm).unwrap();
            let width = *lens.iter().max().unwrap();
            for (i, row) in rows.iter().enumerate() {
                assert_eq!(row.len(), 3 + width.max(1));
                for kk in 0..width {
                    let cell = row[3 + kk];
                    match vals[i].get(kk) {
                        Some(v) => assert_eq!(cell.parse::<f64>().unwrap(), *v),
                        None => assert_eq!(cell, ""),
                    }
                }
            }
        }
        checked += 1;
    }
    assert!(checked >= 2);
}

#[test]
fn runs_are_byte_identical() {
    let plan = RunPlan::parse(PLAN).unwrap();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run(&plan, &quiet(a.path())).unwrap();
    run(&plan, &quiet(b.path())).unwrap();
    let mut names: Vec<_> = fs::read_dir(a.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert!(names.len() > 10);
    for n in names {
        assert_eq!(fs::read(a.path().join(&n)).unwrap(), fs::read(b.path().join(&n)).unwrap(), "{:?}", n);
    }
}

#[test]
fn empty_plan_writes_only_the_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let plan = RunPlan::parse("system = \"neuron\"\n").unwrap();
    let report = run(&plan, &quiet(dir.path())).unwrap();
    assert_eq!(report.exit_code(), 0);
    let mut names: Vec<_> =
        fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    names.sort();
    assert_eq!(names, ["events.jsonl", "manifest.json"]);
    let m: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["stages"].as_array().unwrap().len(), 0);
    assert!(m.get("failure").is_none());
}

#[test]
fn plan_errors_are_rejected_before_running() {
    let dangling = "system = \"neuron\"\n[[stage]]\nname = \"h\"\nkind = \"to_hopf\"\nfrom = \"missing\"\n";
    assert!(matches!(RunPlan::parse(dangling), Err(ddebif::Error::Config(_))));
    let unknown = "system = \"neuron\"\n[[stage]]\nname = \"s\"\nkind = \"stst_branch\"\nbogus = 1\n";
    assert!(RunPlan::parse(unknown).is_err());
    let dup = "system = \"neuron\"\n[[stage]]\nname = \"s\"\nkind = \"stst_branch\"\nparameter = [1.0]\nx = [0.0]\nfree = [4]\n\
               [[stage]]\nname = \"s\"\nkind = \"stability\"\nfrom = \"s\"\n";
    assert!(RunPlan::parse(dup).is_err());
}

fn ddebif(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_ddebif")).args(args).output().unwrap()
}

#[test]
fn binary_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let plan = dir.path().join("p.toml");
    let out = dir.path().join("out");
    let out_s = out.to_str().unwrap();

    fs::write(&plan, "system = \"neuron\"\n[[stage]]\nname = \"h\"\nkind = \"to_hopf\"\nfrom = \"missing\"\n").unwrap();
    let o = ddebif(&["run", plan.to_str().unwrap(), "--out", out_s, "--verbose", "0"]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));

    fs::write(&plan, "system = \"nosuch\"\n").unwrap();
    assert_eq!(ddebif(&["run", plan.to_str().unwrap(), "--out", out_s]).status.code(), Some(2));

    // the point index lies outside the source branch
    fs::write(
        &plan,
        "system = \"hom_neural\"\n\
         [[stage]]\nname = \"stst\"\nkind = \"stst_branch\"\nparameter = [2.6, 1.3428, 1, -1.3398, -0.5, 1]\n\
         x = [0.5, 0.5]\nfree = [4]\nseed_step = [[4, 1e-4]]\nmax_tries = 0\n\
         method.point = { newton_max_iterations = 10 }\n\
         [[stage]]\nname = \"hopf\"\nkind = \"to_hopf\"\nfrom = \"stst\"\npoint = 7\nfree = [4]\n",
    )
    .unwrap();
    let o = ddebif(&["run", plan.to_str().unwrap(), "--out", out_s, "--verbose", "0"]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
    let err: Value = serde_json::from_str(&fs::read_to_string(out.join("error.json")).unwrap()).unwrap();
    assert_eq!(err["stage"], "hopf");

    fs::write(&plan, "system = \"neuron\"\n").unwrap();
    assert_eq!(ddebif(&["run", plan.to_str().unwrap(), "--out", out_s]).status.code(), Some(0));
    assert!(!out.join("error.json").exists());

    let o = ddebif(&["list-systems"]);
    assert!(o.status.success());
    assert_eq!(String::from_utf8_lossy(&o.stdout).lines().count(), 3);
    assert_eq!(ddebif(&["describe", "nosuch"]).status.code(), Some(2));
}
