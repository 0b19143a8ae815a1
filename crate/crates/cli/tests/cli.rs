use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hetfront"))
}

#[test]
fn speeds_prints_three_roots() {
    let out = bin().args(["speeds", "--alpha", "2.5", "--gamma", "0.2"]).output().unwrap();
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["roots"].as_array().unwrap().len(), 3);
    assert_eq!(v["regime"], "triple");
}

#[test]
fn background_csv_header_and_rows() {
    let out = bin()
        .args(["background", "--example", "ex1", "--x-min", "-2", "--x-max", "2", "--dx", "0.5"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "x,f2,vbm_plus_1,qbm");
    assert_eq!(lines.len(), 10);
}

#[test]
fn stationary_fronts_json() {
    let out = bin().args(["stationary-fronts", "--example", "ex1"]).output().unwrap();
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let xs: Vec<f64> = v["positions"].as_array().unwrap().iter().map(|p| p["x0"].as_f64().unwrap()).collect();
    assert!(xs.iter().any(|x| (x - 0.38).abs() < 0.01));
    assert!(xs.iter().any(|x| (x - 0.90).abs() < 0.01));
}

#[test]
fn compare_identical_files_and_unknown_example() {
    let dir = std::env::temp_dir().join(format!("hetfront-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("t.csv");
    let mut s = String::from("s,z,dz_ds\n");
    for i in 0..50 {
        let t = 0.1 * i as f64;
        s.push_str(&format!("{t},{},{}\n", 0.7 * t, 0.7));
    }
    std::fs::write(&path, s).unwrap();
    let out = bin().arg("compare").arg(&path).arg(&path).args(["--anchor", "0.5,0"]).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["position_sup"].as_f64(), Some(0.0));

    let bad = bin().args(["example", "ex9"]).env("HETFRONT_OUT", &dir).output().unwrap();
    assert_eq!(bad.status.code(), Some(2));
    std::fs::remove_dir_all(&dir).ok();
}
