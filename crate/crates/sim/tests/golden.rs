//! Every bundled scenario runs through the binary, finishes within the time
//! budget and reproduces its golden file.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

const BUDGET: Duration = Duration::from_secs(120);

fn scenario_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios")
}

fn close(actual: f64, expected: f64, rel: f64) -> bool {
    (actual - expected).abs() <= rel * expected.abs().max(1e-12)
}

fn csv_column(path: &Path, name: &str) -> Vec<f64> {
    let mut r = csv::Reader::from_path(path).unwrap();
    let k = r
        .headers()
        .unwrap()
        .iter()
        .position(|h| h == name)
        .unwrap_or_else(|| panic!("no column {name}"));
    r.records()
        .map(|rec| rec.unwrap()[k].parse().unwrap())
        .collect()
}

fn check(golden_path: &Path) -> Vec<String> {
    let golden: toml::Table = toml::from_str(&fs::read_to_string(golden_path).unwrap()).unwrap();
    let scenario = golden_path.with_extension("scenario");
    let out = tempfile::tempdir().unwrap();
    let start = Instant::now();
    let status = Command::new(env!("CARGO_BIN_EXE_sim"))
        .arg(golden["command"].as_str().unwrap())
        .arg("--scenario")
        .arg(&scenario)
        .arg("--out")
        .arg(out.path())
        .output()
        .unwrap();
    let elapsed = start.elapsed();
    let name = scenario.file_name().unwrap().to_string_lossy().to_string();
    let mut problems = Vec::new();
    if elapsed > BUDGET {
        problems.push(format!("{name}: took {elapsed:?}"));
    }
    let expected_ok = golden["status"].as_str() == Some("ok");
    if status.status.success() != expected_ok {
        problems.push(format!(
            "{name}: exit {:?}, stderr {}",
            status.status.code(),
            String::from_utf8_lossy(&status.stderr)
        ));
        return problems;
    }
    let summary: toml::Table =
        toml::from_str(&fs::read_to_string(out.path().join("summary.toml")).unwrap()).unwrap();
    if summary["status"] != golden["status"] {
        problems.push(format!("{name}: status {}", summary["status"]));
    }
    if summary["outputs"] != golden["outputs"] {
        problems.push(format!("{name}: outputs {}", summary["outputs"]));
    }
    let rel = golden["rel_tol"].as_float().unwrap();
    let results = summary["results"].as_table().unwrap();
    for (key, want) in golden["results"].as_table().unwrap() {
        let Some(got) = results.get(key) else {
            problems.push(format!("{name}: missing result {key}"));
            continue;
        };
        let ok = match (got, want) {
            (toml::Value::Float(g), toml::Value::Float(w)) => close(*g, *w, rel),
            (g, w) => g == w,
        };
        if !ok {
            problems.push(format!("{name}: {key} = {got}, golden {want}"));
        }
    }
    if let Some(tables) = golden.get("tables").and_then(|t| t.as_table()) {
        for (file, columns) in tables {
            for (column, want) in columns.as_table().unwrap() {
                let got = csv_column(&out.path().join(file), column);
                let want: Vec<f64> = want
                    .as_array()
                    .unwrap()
                    .iter()
                    .map(|v| v.as_float().unwrap())
                    .collect();
                if got.len() != want.len()
                    || got.iter().zip(&want).any(|(g, w)| !close(*g, *w, rel))
                {
                    problems.push(format!(
                        "{name}: {file}:{column} = {got:?}, golden {want:?}"
                    ));
                }
            }
        }
    }
    problems
}

#[test]
fn bundled_scenarios_match_goldens() {
    let mut goldens: Vec<PathBuf> = fs::read_dir(scenario_dir())
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "golden"))
        .collect();
    goldens.sort();
    assert!(goldens.len() >= 8, "{goldens:?}");
    let problems: Vec<String> = goldens.iter().flat_map(|g| check(g)).collect();
    assert!(problems.is_empty(), "{}", problems.join("\n"));
}

#[test]
fn every_scenario_has_a_golden() {
    for e in fs::read_dir(scenario_dir()).unwrap() {
        let p = e.unwrap().path();
        if p.extension().is_some_and(|e| e == "scenario") {
            assert!(p.with_extension("golden").exists(), "{}", p.display());
        }
    }
}
