mod common;

use common::*;
use frc_cli::report::{EvaluationReport, FitReport};
use frc_cli::{evaluate, fit, stability, CliError, ModelName};
use frc_core::testing::oracle_fit;
use frc_core::{Criterion, ModelKind, Partition, TopSetRule};
use frc_ingest::load_snapshot;

#[test]
fn fetch_without_token_is_auth_failure() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("snap.json");
    let output = binary()
        .env_remove("TBA_AUTH_KEY")
        .args(["fetch", "--event", "2018carv", "--out", s(&out)])
        .output()
        .unwrap();
    assert_eq!(
        output.status.code(),
        Some(2),
        "{}",
        String::from_utf8_lossy(&output.stderr)
    );
    assert!(!out.exists());
}

#[test]
fn fetch_refuses_to_overwrite_without_force() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("snap.json");
    std::fs::write(&out, "keep me").unwrap();
    let fx = fixtures();
    let args = ["fetch", "--event", "2018demo", "--fixtures", s(&fx), "--out", s(&out)];
    let output = run(&args);
    assert_eq!(output.status.code(), Some(3));
    assert_eq!(std::fs::read_to_string(&out).unwrap(), "keep me");

    let mut forced = args.to_vec();
    forced.push("--force");
    let output = run(&forced);
    assert_eq!(
        output.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&output.stderr)
    );
    assert_eq!(
        std::fs::read(&out).unwrap(),
        std::fs::read(fixtures().join("expected_snapshot.json")).unwrap()
    );
}

#[test]
fn fetch_records_then_replays() {
    let dir = tempfile::tempdir().unwrap();
    let record = dir.path().join("recorded");
    std::fs::create_dir(&record).unwrap();
    let first = dir.path().join("a.json");
    let second = dir.path().join("b.json");
    let fx = fixtures();
    assert!(run(&[
        "fetch",
        "--event",
        "2018demo",
        "--fixtures",
        s(&fx),
        "--record",
        s(&record),
        "--out",
        s(&first)
    ])
    .status
    .success());
    assert!(run(&[
        "fetch",
        "--event",
        "2018demo",
        "--fixtures",
        s(&record),
        "--out",
        s(&second)
    ])
    .status
    .success());
    assert_eq!(std::fs::read(first).unwrap(), std::fs::read(second).unwrap());
}

#[test]
fn usage_errors_and_help() {
    assert_eq!(run(&["fit", "--model", "nope"]).status.code(), Some(64));
    assert_eq!(run(&[]).status.code(), Some(64));
    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn import_builds_a_loadable_snapshot() {
    let dir = tempfile::tempdir().unwrap();
    let matches = dir.path().join("matches.csv");
    let rankings = dir.path().join("rankings.csv");
    let mut rows = String::from("match_no,stage,blue1,blue2,blue3,red1,red2,red3,blue_score,red_score\n");
    let teams: Vec<String> = (1..=6).map(|t| format!("frc{t}")).collect();
    for no in 1..=4 {
        let mut order = teams.clone();
        order.rotate_left(no);
        rows += &format!("{no},qual,{},{},{}\n", order.join(","), 10 * no, 5 * no);
    }
    std::fs::write(&matches, rows).unwrap();
    std::fs::write(
        &rankings,
        format!(
            "team,rank\n{}\n",
            teams
                .iter()
                .enumerate()
                .map(|(i, t)| format!("{t},{}", i + 1))
                .collect::<Vec<_>>()
                .join("\n")
        ),
    )
    .unwrap();
    let out = dir.path().join("snap.json");
    let args = [
        "import",
        "--matches",
        s(&matches),
        "--rankings",
        s(&rankings),
        "--division",
        "csvdiv",
        "--out",
        s(&out),
    ];
    let output = run(&args);
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));
    let snap = load_snapshot(&out).unwrap();
    assert_eq!(snap.num_robots(), 6);
    assert_eq!(snap.qual_matches.len(), 4);
    assert_eq!(read_json(&out)["fetched_at"], "1970-01-01T00:00:00Z");
    // deterministic: the same inputs give the same bytes
    let again = dir.path().join("again.json");
    let mut args2 = args.to_vec();
    *args2.last_mut().unwrap() = s(&again);
    assert!(run(&args2).status.success());
    assert_eq!(std::fs::read(&out).unwrap(), std::fs::read(&again).unwrap());
}

#[test]
fn fit_wmprc1_finds_two_clusters() {
    let dir = tempfile::tempdir().unwrap();
    let (snapshot, truth) = clustered_division(12, &[10.0, 0.0], 10, 0.0, 0, 3);
    let snap = write_snapshot(dir.path(), "snap.json", &snapshot);
    let out = dir.path().join("fit.json");
    let output = run(&["fit", "--snapshot", s(&snap), "--model", "wmprc1", "--out", s(&out)]);
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));
    let report = FitReport::read(&out).unwrap();
    assert_eq!(report.schema_version, 1);
    assert_eq!(report.chosen_c, 2);
    assert_eq!(report.partition, truth_canonical(&truth));
    assert_eq!(report.strengths.len(), 12);
    assert!(report.strengths.windows(2).all(|w| w[0].beta >= w[1].beta));
    assert_eq!(report.cv_table.len(), 12);
}

fn truth_canonical(p: &Partition) -> Partition {
    Partition::new(p.labels())
}

#[test]
fn fit_opr_is_the_plain_least_squares_fit() {
    let (snapshot, _) = clustered_division(14, &[30.0, 20.0, 5.0], 8, 6.0, 0, 11);
    let report = fit(&snapshot, ModelName::Opr, Criterion::Pr).unwrap();
    assert_eq!(report.chosen_c, 14);
    let oracle = oracle_fit(ModelKind::Opr, &snapshot.qual_matches, &Partition::singletons(14)).unwrap();
    for row in &report.strengths {
        let i = snapshot.index_of(&row.robot).unwrap();
        assert!(
            (row.beta - oracle[i]).abs() <= 1e-8 * (1.0 + oracle[i].abs()),
            "{} vs {}",
            row.beta,
            oracle[i]
        );
    }
    let mut ranks: Vec<usize> = report.strengths.iter().map(|r| r.frc_rank).collect();
    ranks.sort_unstable();
    assert_eq!(ranks, (1..=14).collect::<Vec<_>>());
}

#[test]
fn mspe_choice_is_the_table_minimum() {
    for seed in 0..4 {
        let (snapshot, _) = clustered_division(12, &[25.0, 10.0], 8, 5.0, 0, seed);
        for model in [ModelName::Oprc1, ModelName::Wmprc2] {
            let report = fit(&snapshot, model, Criterion::Mspe).unwrap();
            let mspes: Vec<f64> = report.cv_table.iter().filter_map(|r| r.mspe).collect();
            let min = mspes.iter().cloned().fold(f64::INFINITY, f64::min);
            let scale = mspes.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let chosen = report.cv_table.iter().find(|r| r.clusters == report.chosen_c).unwrap();
            assert!(chosen.mspe.unwrap() - min <= 1e-9 * scale);
            assert_eq!(report.chosen_by_mspe, Some(report.chosen_c));
            assert_eq!(report.cv.mspe, chosen.mspe);
        }
    }
}

#[test]
fn rank_deficient_fit_names_robots_and_exits_4() {
    // frc1 and frc2 always share an alliance, so their columns coincide
    let roster: Vec<String> = (1..=8).map(|t| format!("frc{t}")).collect();
    let schedule = [
        [1, 2, 3, 4, 5, 6],
        [1, 2, 7, 3, 8, 4],
        [5, 6, 8, 1, 2, 7],
        [3, 5, 7, 4, 6, 8],
        [4, 7, 8, 1, 2, 5],
        [3, 6, 8, 1, 2, 4],
    ];
    let raw = frc_core::RawSnapshot {
        division_key: "dup".into(),
        qual_matches: schedule
            .iter()
            .enumerate()
            .map(|(i, t)| frc_core::RawMatch {
                match_no: i as u32 + 1,
                blue: t[..3].iter().map(|n| format!("frc{n}")).collect(),
                red: t[3..].iter().map(|n| format!("frc{n}")).collect(),
                blue_score: 10 + i as i64,
                red_score: 20 - i as i64,
            })
            .collect(),
        playoff_matches: vec![],
        frc_ratings: roster
            .iter()
            .enumerate()
            .map(|(i, k)| (k.clone(), -(i as f64)))
            .collect(),
        playoff_roster: vec![],
        roster,
    };
    let dir = tempfile::tempdir().unwrap();
    let snap = write_snapshot(dir.path(), "dup.json", &reparse(&raw));
    let out = dir.path().join("fit.json");
    let output = run(&["fit", "--snapshot", s(&snap), "--model", "opr", "--out", s(&out)]);
    assert_eq!(output.status.code(), Some(4));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("frc1") && stderr.contains("frc2"), "{stderr}");
    assert!(!out.exists());
}

#[test]
fn evaluate_matches_official_order_exactly() {
    let (mut snapshot, _) = clustered_division(
        16,
        &(0..16).map(|i| 40.0 - 2.0 * i as f64).collect::<Vec<_>>(),
        8,
        0.0,
        6,
        5,
    );
    // Make the official ratings and playoff captains follow the model order.
    let first = fit(&snapshot, ModelName::Opr, Criterion::Pr).unwrap();
    for (pos, row) in first.strengths.iter().enumerate() {
        let i = snapshot.index_of(&row.robot).unwrap();
        snapshot.frc_ratings[i] = -(pos as f64 + 1.0);
    }
    snapshot.playoff_roster = first
        .strengths
        .iter()
        .map(|r| snapshot.index_of(&r.robot).unwrap())
        .collect();
    let snapshot = reparse(&snapshot.to_raw());

    let dir = tempfile::tempdir().unwrap();
    let snap = write_snapshot(dir.path(), "snap.json", &snapshot);
    let fit_path = dir.path().join("fit.json");
    let eval_path = dir.path().join("eval.json");
    assert!(
        run(&["fit", "--snapshot", s(&snap), "--model", "opr", "--out", s(&fit_path)])
            .status
            .success()
    );
    let output = run(&[
        "evaluate",
        "--snapshot",
        s(&snap),
        "--fit",
        s(&fit_path),
        "--out",
        s(&eval_path),
    ]);
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));
    let report: EvaluationReport = serde_json::from_value(read_json(&eval_path)).unwrap();
    assert_eq!(report.schema_version, 1);
    assert_eq!(report.agreement.rc_all, 1.0);
    assert_eq!(report.agreement.rc_playoff, Some(1.0));
    assert_eq!(report.agreement.rc_top8, Some(1.0));
    assert_eq!(report.agreement.precision_at[&8], 1.0);
    assert_eq!(report.agreement.recall_at[&8], 1.0);
    // sixteen picks contain all eight captains: Re = 1, Pr = 8/16
    assert_eq!(report.agreement.recall_at[&16], 1.0);
    assert_eq!(report.agreement.precision_at[&16], 0.5);
    assert_eq!(report.playoff.unwrap().matches, 6);
}

#[test]
fn evaluate_rejects_a_fit_from_other_data() {
    let dir = tempfile::tempdir().unwrap();
    let (a, _) = clustered_division(12, &[10.0, 0.0], 8, 2.0, 0, 1);
    let (b, _) = clustered_division(12, &[10.0, 0.0], 8, 2.0, 0, 2);
    let fit_a = fit(&a, ModelName::Opr, Criterion::Pr).unwrap();
    assert!(matches!(evaluate(&b, &fit_a), Err(CliError::RosterMismatch(_))));

    let snap_b = write_snapshot(dir.path(), "b.json", &b);
    let fit_path = dir.path().join("fit.json");
    std::fs::write(&fit_path, frc_cli::report::to_json_bytes(&fit_a)).unwrap();
    let out = dir.path().join("eval.json");
    let output = run(&[
        "evaluate",
        "--snapshot",
        s(&snap_b),
        "--fit",
        s(&fit_path),
        "--out",
        s(&out),
    ]);
    assert_eq!(output.status.code(), Some(1));
    assert!(!out.exists());
}

#[test]
fn evaluate_without_playoffs_omits_playoff_metrics() {
    let (snapshot, _) = clustered_division(12, &[10.0, 0.0], 8, 2.0, 0, 4);
    let report = evaluate(&snapshot, &fit(&snapshot, ModelName::Wmpr, Criterion::Pr).unwrap()).unwrap();
    assert!(report.playoff.is_none());
}

#[test]
fn playoff_rate_tracks_cross_validated_rate() {
    // Playoff matches drawn like the qualification ones: the held-out rates
    // should agree within 0.1 on average.
    let mut gaps = Vec::new();
    for seed in 0..6 {
        let levels: Vec<f64> = (0..24).map(|i| 3.0 * i as f64).collect();
        let (snapshot, _) = clustered_division(24, &levels, 12, 12.0, 300, 100 + seed);
        let report = evaluate(&snapshot, &fit(&snapshot, ModelName::Opr, Criterion::Pr).unwrap()).unwrap();
        gaps.push(report.playoff.unwrap().prediction_rate - report.qualification_prediction_rate);
    }
    let mean = gaps.iter().sum::<f64>() / gaps.len() as f64;
    assert!(mean.abs() <= 0.1, "mean gap {mean}, gaps {gaps:?}");
}

#[test]
fn stability_rows_and_final_row_match_fit() {
    // K = 24 with ten plays each: 40 matches, rows for 6..=10 plays.
    let (snapshot, _) = clustered_division(24, &[30.0, 15.0, 0.0], 10, 4.0, 0, 9);
    assert_eq!(snapshot.qual_matches.len(), 40);
    let dir = tempfile::tempdir().unwrap();
    let snap = write_snapshot(dir.path(), "snap.json", &snapshot);
    let out = dir.path().join("stab.json");
    let output = run(&[
        "stability",
        "--snapshot",
        s(&snap),
        "--model",
        "oprc1",
        "--out",
        s(&out),
    ]);
    assert!(output.status.success(), "{}", String::from_utf8_lossy(&output.stderr));
    let json = read_json(&out);
    assert_eq!(json["schema_version"], 1);
    assert_eq!(json["rows"].as_array().unwrap().len(), 5);
    assert_eq!(json["rc_consecutive"].as_array().unwrap().len(), 4);

    let report = fit(&snapshot, ModelName::Oprc1, Criterion::Pr).unwrap();
    let last = json["rows"].as_array().unwrap().last().unwrap();
    assert_eq!(last["plays"], 10);
    assert_eq!(last["prediction_rate"].as_f64(), Some(report.cv.prediction_rate));
    assert_eq!(last["mspe"].as_f64(), report.cv.mspe);
    let strengths: Vec<f64> = serde_json::from_value(last["strengths"].clone()).unwrap();
    for row in &report.strengths {
        assert_eq!(strengths[snapshot.index_of(&row.robot).unwrap()], row.beta);
    }
}

#[test]
fn stability_on_noiseless_data_is_perfectly_stable() {
    let levels: Vec<f64> = (0..12).map(|i| 5.0 * i as f64).collect();
    let (snapshot, _) = clustered_division(12, &levels, 10, 0.0, 0, 21);
    let report = stability(&snapshot, ModelName::Opr, Criterion::Pr, TopSetRule::FullFit).unwrap();
    assert!(
        report.report.rc_consecutive.iter().all(|rc| *rc == Some(1.0)),
        "{:?}",
        report.report.rc_consecutive
    );
}

#[test]
fn stability_needs_six_plays() {
    let (snapshot, _) = clustered_division(12, &[10.0, 0.0], 5, 1.0, 0, 2);
    let err = stability(&snapshot, ModelName::Opr, Criterion::Pr, TopSetRule::FullFit).unwrap_err();
    assert!(
        matches!(
            err,
            CliError::Core(frc_core::Error::InsufficientMatches { needed: 12, .. })
        ),
        "{err}"
    );
}
