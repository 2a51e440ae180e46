use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use regioncert::certificates::any_certified;
use regioncert::geometry::{connected_components, grid_scan};
use regioncert::synthesis::{
    fuzz_campaign, gen_certified, gen_counterexample, lemma_campaign, CounterexampleKind, FuzzConfig, LemmaKind,
    SynthError, SynthSpec,
};
use regioncert::{certify, certify_all, Activation64, CertifyOptions, GridSpec, TheoremId, Verdict};

fn activation_for(rng: &mut impl Rng, theorem: TheoremId) -> Activation64 {
    match theorem {
        TheoremId::SurjectiveBijective => Activation64::leaky_relu(rng.gen_range(0.01..0.99)).unwrap(),
        TheoremId::HalfBounded => match rng.gen_range(0..2) {
            0 => Activation64::Softplus,
            _ => Activation64::elu(rng.gen_range(0.1..3.0)).unwrap(),
        },
        TheoremId::Bounded => match rng.gen_range(0..2) {
            0 => Activation64::Sigmoid,
            _ => Activation64::Tanh,
        },
        TheoremId::ReluDeep | TheoremId::ReluOneLayer => Activation64::Relu,
    }
}

/// A request the target theorem can satisfy: pyramidal hidden widths, and
/// for the rectangle theorems an output no wider than the last hidden layer.
fn feasible_spec(rng: &mut impl Rng, seed: u64) -> SynthSpec {
    let theorem = TheoremId::ALL[rng.gen_range(0..TheoremId::ALL.len())];
    let d = rng.gen_range(1..=6);
    let mut widths = vec![d];
    if theorem == TheoremId::ReluOneLayer {
        widths.push(rng.gen_range(1..=d));
        widths.push(rng.gen_range(1..=5));
    } else {
        let hidden = if theorem == TheoremId::SurjectiveBijective { rng.gen_range(0..=3) } else { rng.gen_range(1..=3) };
        for _ in 0..hidden {
            let prev = *widths.last().unwrap();
            widths.push(rng.gen_range(1..=prev));
        }
        let last = *widths.last().unwrap();
        let out_max = if matches!(theorem, TheoremId::HalfBounded | TheoremId::Bounded) { last } else { 5 };
        widths.push(rng.gen_range(1..=out_max));
    }
    let mut spec = SynthSpec::new(widths, activation_for(rng, theorem), theorem, seed);
    spec.weight_scale = rng.gen_range(0.25..4.0);
    spec.nonzero_rest = theorem != TheoremId::Bounded && rng.gen_bool(0.5);
    spec
}

#[test]
fn generated_networks_pass_their_checker() {
    let mut rng = ChaCha8Rng::seed_from_u64(437);
    let opts = CertifyOptions::default();
    for seed in 0..1000 {
        let spec = feasible_spec(&mut rng, seed);
        let net = gen_certified(&spec).unwrap_or_else(|e| panic!("{spec:?}: {e}"));
        assert_eq!(net.widths(), spec.widths);
        let report = certify(&net, spec.target_theorem, &opts);
        assert_eq!(report.verdict, Verdict::Certified, "{spec:?}: {report:?}");
    }
}

#[test]
fn generation_is_deterministic() {
    let spec = SynthSpec::new(vec![3, 3, 2, 2], Activation64::Sigmoid, TheoremId::Bounded, 460);
    assert_eq!(gen_certified(&spec).unwrap(), gen_certified(&spec).unwrap());
    let other = SynthSpec { seed: 461, ..spec.clone() };
    assert_ne!(gen_certified(&spec).unwrap(), gen_certified(&other).unwrap());
}

#[test]
fn widening_requests_are_infeasible() {
    let leaky = Activation64::leaky_relu(0.1).unwrap();
    let spec = SynthSpec::new(vec![2, 3, 2], leaky, TheoremId::SurjectiveBijective, 0);
    assert!(matches!(gen_certified(&spec), Err(SynthError::Infeasible(_))));
    let spec = SynthSpec::new(vec![2, 2, 2], Activation64::Sigmoid, TheoremId::ReluDeep, 0);
    assert!(matches!(gen_certified(&spec), Err(SynthError::Infeasible(_))));
}

#[test]
fn counterexamples_are_split_and_uncertified() {
    for seed in 0..10 {
        for (kind, d) in [(CounterexampleKind::ReluAbsolute, 1), (CounterexampleKind::WideXor, 2)] {
            let net = gen_counterexample(kind, seed);
            let reports = certify_all(&net, &CertifyOptions::default());
            assert!(!any_certified(&reports), "{kind}");
            assert!(reports.iter().all(|r| matches!(r.verdict, Verdict::Refuted | Verdict::Inapplicable)));
            let map = grid_scan(&net, &GridSpec::cube(d, 3.0, 256).unwrap()).unwrap();
            assert!((0..net.classes()).any(|m| connected_components(&map, m) >= 2), "{kind}");
        }
    }
}

#[test]
fn fuzz_campaign_with_seed_seven_has_no_violations() {
    let report = fuzz_campaign(100, 7, &FuzzConfig::default());
    assert_eq!(report.trials, 100);
    assert_eq!(report.certified + report.refuted, 100);
    assert!(report.violations.is_empty(), "{}", report.to_json());
    let counterexamples: u64 = report
        .sources
        .iter()
        .filter(|(k, _)| k.starts_with("counterexample"))
        .map(|(_, v)| v)
        .sum();
    assert!(counterexamples > 0);
    assert!(report.refuted >= counterexamples);
}

#[test]
fn fuzz_reports_are_reproducible() {
    let cfg = FuzzConfig { resolution: 48, box_factor: 4.0 };
    let a = fuzz_campaign(40, 11, &cfg);
    let b = fuzz_campaign(40, 11, &cfg);
    assert_eq!(a.to_json(), b.to_json());
    assert_ne!(a.to_json(), fuzz_campaign(40, 12, &cfg).to_json());
}

#[test]
fn lemma_campaigns_pass() {
    for which in LemmaKind::ALL {
        let r = lemma_campaign(which, 2000, 553);
        assert!(r.passed(), "{r}");
        assert!(r.max_residual <= 1e-9, "{r}");
    }
}
