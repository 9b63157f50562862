//! Cross-module flows: spec files through benchmarks, oracles, operators, games and certification.

use std::io::BufReader;

use num_complex::Complex64;
use qbench::benchmarks::{benchmark, evaluate_formula, EnsembleSpec, FormulaId};
use qbench::certify::{certify, parse_experiment, parse_spec_file, ExperimentRecord, InputParams, Run, SampledTag, SpecFile};
use qbench::ensembles::{sample_prior, StateFamily, Widths};
use qbench::game_sim::{optimal_mp_strategy, run_game, srm_strategy_qubit};
use qbench::operators::{a_operator, operator_norm, read_text, write_text};
use qbench::oracle::{cft_numeric, QuadratureConfig};
use qbench::srm::srm_optimize;

fn catalog() -> Vec<EnsembleSpec> {
    vec![
        EnsembleSpec::new(StateFamily::qudit(3).unwrap(), 2, 1, Widths::beta(1.5)).unwrap(),
        EnsembleSpec::new(StateFamily::spin(1.5, 1.0).unwrap(), 1, 2, Widths::beta(0.5)).unwrap(),
        EnsembleSpec::new(StateFamily::coherent(Complex64::new(0.8, -0.6)).unwrap(), 3, 2, Widths::lambda(2.0)).unwrap(),
        EnsembleSpec::new(StateFamily::SqueezedVacuum, 2, 2, Widths::beta(1.0)).unwrap(),
        EnsembleSpec::new(StateFamily::GaussianOneMode, 1, 2, Widths::both(0.5, 3.0)).unwrap(),
        EnsembleSpec::new(StateFamily::perelomov(1.0, 2.0).unwrap(), 2, 1, Widths::beta(2.0)).unwrap(),
    ]
}

#[test]
fn spec_files_round_trip_through_json() {
    let files: Vec<SpecFile> = catalog().iter().map(SpecFile::from_spec).collect();
    let text = serde_json::to_string_pretty(&files).unwrap();
    let back = parse_spec_file(&text).unwrap();
    assert_eq!(back, files);
    for (f, s) in back.iter().zip(catalog()) {
        assert_eq!(f.to_spec().unwrap(), s);
    }
}

#[test]
fn closed_forms_match_monte_carlo_oracle() {
    let cfg = QuadratureConfig::monte_carlo(200_000, 99);
    for s in catalog() {
        let closed = benchmark(&s).unwrap();
        let mc = cft_numeric(&s, &cfg).unwrap();
        let dev = (mc.value.fidelity_threshold - closed.fidelity_threshold).abs();
        assert!(dev <= 4.0 * mc.fidelity_error, "{}: Δ {dev} vs σ {}", s.family, mc.fidelity_error);
    }
}

#[test]
fn formula_ids_name_their_own_closed_form() {
    for s in catalog() {
        let v = benchmark(&s).unwrap();
        let again = evaluate_formula(&v.formula_id, &s).unwrap();
        assert_eq!(again.fidelity_threshold, v.fidelity_threshold);
        let id: FormulaId = v.formula_id.to_string().parse().unwrap();
        assert_eq!(id, v.formula_id);
    }
}

#[test]
fn operator_dump_preserves_the_norm() {
    let s = EnsembleSpec::new(StateFamily::qudit(3).unwrap(), 2, 2, Widths::beta(1.0)).unwrap();
    let a = a_operator(&s, 0).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("a.txt");
    write_text(&a, std::fs::File::create(&path).unwrap()).unwrap();
    let back = read_text(BufReader::new(std::fs::File::open(&path).unwrap())).unwrap();
    assert_eq!(back.dim(), a.dim());
    let (n0, n1) = (operator_norm(&a).unwrap(), operator_norm(&back).unwrap());
    assert!((n0 - n1).abs() < 1e-14);
    assert!((n0 - benchmark(&s).unwrap().fidelity_threshold).abs() < 1e-9);
}

#[test]
fn game_records_certify_consistently() {
    // the deterministic SRM sits below the probabilistic threshold
    let s = EnsembleSpec::new(StateFamily::qudit(2).unwrap(), 1, 1, Widths::beta(2.0)).unwrap();
    let eta = srm_optimize(2.0).unwrap().eta_opt;
    let b = run_game(&s, &srm_strategy_qubit(eta).unwrap(), 50_000, 5).unwrap();
    let rec = ExperimentRecord::new(
        SpecFile::from_spec(&s),
        vec![Run::Counts {
            input_params: InputParams::Sampled(SampledTag::Sampled),
            passed: b.test_passes,
            tested: b.successes,
        }],
    );
    let text = serde_json::to_string(&rec).unwrap();
    let parsed = parse_experiment(&text).unwrap();
    assert_eq!(parsed, rec);
    let v = certify(&parsed, 3.0).unwrap();
    assert!(!v.certified_quantum);
    assert!(v.z_score < 0.0, "SRM sits below F_c: z = {}", v.z_score);
}

#[test]
fn optimal_strategy_pass_rate_matches_threshold_on_catalog() {
    for (i, s) in catalog().iter().enumerate() {
        let b = run_game(s, &optimal_mp_strategy(s).unwrap(), 100_000, i as u64).unwrap();
        let f = benchmark(s).unwrap().fidelity_threshold;
        assert!((b.test_pass_rate - f).abs() < 4.0 * b.test_stderr, "{}: {} vs {f}", s.family, b.test_pass_rate);
    }
}

#[test]
fn prior_samples_are_reproducible_across_calls() {
    for s in catalog() {
        let a = sample_prior(&s.prior(), 17, 64).unwrap();
        let b = sample_prior(&s.prior(), 17, 64).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, sample_prior(&s.prior(), 18, 64).unwrap());
    }
}
