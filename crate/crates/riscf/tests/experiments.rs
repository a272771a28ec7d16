use riscf::asymptotics::ScalingMode;
use riscf::experiments::*;
use riscf::optimizer::AscentOptions;

fn small_scenario() -> ScenarioSpec {
    ScenarioSpec { l: Some(2), s: Some(2), k: Some(3), b: Some(4), r: Some(16), ..Default::default() }
}

fn spec(figure: Figure, grid: Vec<f64>, variants: Vec<VariantSpec>) -> SweepSpec {
    SweepSpec {
        figure,
        grid,
        variants,
        seed: 3,
        mc_trials: 0,
        starts: 1,
        random_draws: 5,
        scenario: small_scenario(),
        optimizer: AscentOptions { max_iter: 50, ..Default::default() },
    }
}

fn csv_string(rows: &[ResultRow]) -> String {
    let mut buf = Vec::new();
    write_csv(rows, &mut buf).unwrap();
    String::from_utf8(buf).unwrap()
}

#[test]
fn csv_has_header_and_one_row_per_point_variant_and_source() {
    let mut s = spec(
        Figure::TermsVsR,
        vec![4.0, 16.0],
        vec![VariantSpec::new(PhaseDesign::RandomPhase), VariantSpec::new(PhaseDesign::RisFree)],
    );
    s.mc_trials = 2000;
    s.random_draws = 1;
    let rows = run_sweep(&s).unwrap();
    assert_eq!(rows.len(), 2 * 2 * 2);
    let text = csv_string(&rows);
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "figure,sweep_value,variant,source,sum_rate,min_rate,mc_half_width,rates,signal,interference,hwi,noise"
    );
    let body: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(body.len(), 8);
    for (row, fields) in rows.iter().zip(&body) {
        assert_eq!(fields.len(), 12);
        assert_eq!(fields[0], "terms_vs_R");
        assert_eq!(fields[4], format!("{:.11e}", row.sum_rate));
        assert_eq!(fields[7].split(';').count(), 3);
        assert_eq!(fields[6].is_empty(), row.source == Source::ClosedForm);
    }
    assert_eq!(body[0][3], "closed_form");
    assert_eq!(body[1][3], "monte_carlo");
    assert_eq!(body[2][2], "ris_free");
}

#[test]
fn sum_rate_is_the_sum_of_user_rates() {
    let s = spec(
        Figure::RateVsPower,
        vec![0.0, 20.0],
        vec![VariantSpec::new(PhaseDesign::OptimizedSum), VariantSpec::new(PhaseDesign::OptimizedMin)],
    );
    for row in run_sweep(&s).unwrap() {
        let total: f64 = row.per_user_rates.iter().sum();
        assert!((row.sum_rate - total).abs() < 1e-10);
        let min = row.per_user_rates.iter().copied().fold(f64::INFINITY, f64::min);
        assert_eq!(row.min_rate, min);
    }
}

#[test]
fn output_is_identical_across_thread_counts() {
    let mut s = spec(
        Figure::RateVsR,
        vec![4.0, 9.0],
        vec![VariantSpec::new(PhaseDesign::OptimizedSum), VariantSpec::new(PhaseDesign::RandomPhase)],
    );
    s.mc_trials = 3000;
    let run = |threads: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        pool.install(|| csv_string(&run_sweep(&s).unwrap()))
    };
    assert_eq!(run(1), run(3));
}

#[test]
fn empty_variants_fail_without_output() {
    let s = spec(Figure::RateVsR, vec![16.0], vec![]);
    let dir = std::env::temp_dir().join(format!("riscf-empty-{}", std::process::id()));
    assert!(run_sweep_to_dir(&s, &dir).is_err());
    assert!(!dir.join("rate_vs_R.csv").exists());
}

#[test]
fn invalid_grids_are_config_errors() {
    let v = vec![VariantSpec::new(PhaseDesign::ZeroPhase)];
    assert!(matches!(spec(Figure::RateVsR, vec![], v.clone()).validate(), Err(riscf::Error::Config(_))));
    assert!(matches!(spec(Figure::RateVsB, vec![10.0], v.clone()).validate(), Err(riscf::Error::Config(_))));
    assert!(matches!(spec(Figure::RateVsBits, vec![1.5], v.clone()).validate(), Err(riscf::Error::Config(_))));
    let dup = vec![VariantSpec::new(PhaseDesign::ZeroPhase), VariantSpec::new(PhaseDesign::ZeroPhase)];
    assert!(spec(Figure::RateVsR, vec![16.0], dup).validate().is_err());
}

#[test]
fn sweep_files_parse_from_toml_and_json() {
    let dir = std::env::temp_dir().join(format!("riscf-parse-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let toml_path = dir.join("s.toml");
    std::fs::write(
        &toml_path,
        "figure = \"scaling_R\"\ngrid = [16, 64]\n[scenario]\ndelta = 0.0\n[[variants]]\ndesign = \"zero_phase\"\nscaling = \"per_r2\"\n",
    )
    .unwrap();
    let s = SweepSpec::from_file(&toml_path).unwrap();
    assert_eq!(s.figure, Figure::ScalingR);
    assert_eq!(s.variants[0].scaling, Some(ScalingMode::PerR2));
    assert_eq!(s.variants[0].label(), "zero_phase/per_r2");
    assert_eq!(s.starts, 4);
    let json_path = dir.join("s.json");
    std::fs::write(&json_path, serde_json::to_string(&s).unwrap()).unwrap();
    assert_eq!(SweepSpec::from_file(&json_path).unwrap(), s);
    std::fs::write(&toml_path, "figure = \"rate_vs_R\"\ngrid = [16]\nbogus = 1\n[[variants]]\ndesign = \"zero_phase\"\n").unwrap();
    assert!(matches!(SweepSpec::from_file(&toml_path), Err(riscf::Error::Config(_))));
}

#[test]
fn power_scaled_rates_saturate_or_decay() {
    let mut s = spec(
        Figure::ScalingR,
        vec![16.0, 64.0, 256.0],
        vec![
            VariantSpec { scaling: Some(ScalingMode::PerR), ..VariantSpec::new(PhaseDesign::ZeroPhase) },
            VariantSpec { scaling: Some(ScalingMode::PerR2), ..VariantSpec::new(PhaseDesign::ZeroPhase) },
        ],
    );
    s.scenario.delta = Some(0.0);
    s.scenario.b = Some(16);
    let rows = run_sweep(&s).unwrap();
    let curve = |label: &str| -> Vec<f64> { rows.iter().filter(|r| r.variant == label).map(|r| r.sum_rate).collect() };
    let per_r = curve("zero_phase/per_r");
    let per_r2 = curve("zero_phase/per_r2");
    assert!(per_r2.windows(2).all(|w| w[1] < w[0]), "{per_r2:?}");
    assert!(per_r[2] > 0.9 * per_r[0], "{per_r:?}");
    let sinr = |label: &str, g: usize| -> Vec<f64> {
        rows.iter().filter(|r| r.variant == label).nth(g).unwrap().per_user_rates.iter().map(|r| r.exp2() - 1.0).collect()
    };
    let points: Vec<Vec<f64>> = (0..3).map(|g| sinr("zero_phase/per_r2", g)).collect();
    for k in 0..3 {
        assert!(points[1][k] < points[0][k] && points[2][k] < points[1][k], "{points:?}");
    }
}

#[test]
fn ideal_hardware_dominates_at_high_power() {
    let s = spec(
        Figure::RateVsPower,
        vec![20.0, 40.0],
        vec![
            VariantSpec::new(PhaseDesign::RandomPhase),
            VariantSpec { hwi: false, ..VariantSpec::new(PhaseDesign::RandomPhase) },
        ],
    );
    let rows = run_sweep(&s).unwrap();
    for pair in rows.chunks(2) {
        assert!(pair[1].sum_rate > pair[0].sum_rate);
    }
}

#[test]
fn optimized_phases_beat_random_phases() {
    let s = spec(
        Figure::RateVsR,
        vec![16.0],
        vec![VariantSpec::new(PhaseDesign::OptimizedSum), VariantSpec::new(PhaseDesign::RandomPhase)],
    );
    let rows = run_sweep(&s).unwrap();
    assert!(rows[0].sum_rate > rows[1].sum_rate);
}

#[test]
fn scenario_overrides_reach_the_configuration() {
    let sc = ScenarioSpec { k: Some(2), b: Some(16), p_dbm: Some(20.0), kappa_u: Some(0.1), ideal_phases: true, ..Default::default() }
        .build()
        .unwrap();
    assert_eq!(sc.config.k, 2);
    assert_eq!(sc.config.b, 16);
    assert!((sc.config.p - 0.1).abs() < 1e-12);
    assert_eq!(sc.hwi.kappa_u, 0.1);
    assert_eq!(sc.hwi.quant_bits, None);
    assert_eq!(sc.stats.n_users(), 2);
    assert!(ScenarioSpec { r: Some(10), ..Default::default() }.build().is_err());
}

#[test]
fn fast_verification_passes() {
    let results = verify(VerifyLevel::Fast).unwrap();
    assert_eq!(results.len(), 9);
    for r in &results {
        assert!(r.passed, "{}: {} (threshold {})", r.name, r.measured, r.threshold);
    }
}
