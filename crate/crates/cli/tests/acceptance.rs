//! Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any
//! criterion fails.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tempfile::TempDir;

use regioncert::geometry::{connected_components, grid_scan, output_space_scan};
use regioncert::linalg::{column_split, invert, is_monomial, SplitMode};
use regioncert::synthesis::{fuzz_campaign, gen_counterexample, gen_monomial, lemma_campaign, CounterexampleKind, FuzzConfig, LemmaKind};
use regioncert::{certify_all, Activation64, GridSpec, Layer64, Matrix64, Network64, Verdict};

/// Grid resolution per axis for the soundness fuzz.
const FUZZ_RESOLUTION: usize = 256;
/// Scan box half-width as a multiple of the weight scale.
const FUZZ_BOX_FACTOR: f64 = 4.0;
const FUZZ_TRIALS: u64 = 500;
const FUZZ_SEED: u64 = 1;
const FUZZ_TIME_LIMIT: Duration = Duration::from_secs(300);
/// Forward residual bound for the constructive preimages.
const PREIMAGE_TOL: f64 = 1e-9;
const LEMMA_TRIALS: u64 = 1000;
const SEGMENT_TRIALS: u64 = 100_000;
/// Bound on `|V W1 - I|` and `|W1 U - W2|`.
const SPLIT_TOL: f64 = 1e-8;
const LINALG_CASES: usize = 1000;
const CROSS_CHECK_NETS: usize = 50;
const CROSS_CHECK_RESOLUTION: usize = 128;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn soundness_fuzz() -> Outcome {
    let start = Instant::now();
    let config = FuzzConfig { resolution: FUZZ_RESOLUTION, box_factor: FUZZ_BOX_FACTOR };
    let r = fuzz_campaign(FUZZ_TRIALS, FUZZ_SEED, &config);
    let elapsed = start.elapsed();
    outcome(
        r.violations.is_empty() && elapsed <= FUZZ_TIME_LIMIT,
        format!(
            "{} trials, {} certified, {} refuted, {} window-resolved, {} violations in {:.0?}",
            r.trials,
            r.certified,
            r.refuted,
            r.window_resolved.len(),
            r.violations.len(),
            elapsed
        ),
    )
}

fn counterexample_reproduction() -> Outcome {
    let net = gen_counterexample(CounterexampleKind::ReluAbsolute, 0);
    let counts: Vec<usize> = [256, 1024, 4096]
        .into_iter()
        .map(|res| connected_components(&grid_scan(&net, &GridSpec::cube(1, 3.0, res).unwrap()).unwrap(), 1))
        .collect();
    let verdicts: Vec<Verdict> = certify_all(&net, &Default::default()).iter().map(|r| r.verdict).collect();
    let none_certified = verdicts.iter().all(|v| matches!(v, Verdict::Refuted | Verdict::Inapplicable));
    outcome(
        counts.iter().all(|&c| c == 2) && none_certified,
        format!("class 1 components at 256/1024/4096: {counts:?}, verdicts {verdicts:?}"),
    )
}

fn constructive_preimages() -> Outcome {
    let reports: Vec<_> = [LemmaKind::RectHalfopen, LemmaKind::RectBounded, LemmaKind::ReluPreimage]
        .into_iter()
        .map(|k| lemma_campaign(k, LEMMA_TRIALS, 3))
        .collect();
    let pass = reports.iter().all(|r| r.passed() && r.failures == 0 && r.max_residual <= PREIMAGE_TOL);
    let detail = reports
        .iter()
        .map(|r| format!("{} max residual {:.2e} failures {}", r.which, r.max_residual, r.failures))
        .collect::<Vec<_>>()
        .join("; ");
    outcome(pass, detail)
}

fn segment_identity() -> Outcome {
    let r = lemma_campaign(LemmaKind::ReluSegment, SEGMENT_TRIALS, 4);
    outcome(
        r.failures == 0 && r.max_residual == 0.0,
        format!("{} trials, {} failures, max residual {:e}", r.trials, r.failures, r.max_residual),
    )
}

fn linalg_contracts() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    for _ in 0..LINALG_CASES {
        let n = rng.gen_range(1..=12);
        let m = rng.gen_range(n..=12);
        let data = (0..n * m).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let w = Matrix64::new(n, m, data).unwrap();
        let set = column_split(&w, 1e-9, SplitMode::Greedy).unwrap();
        worst = set.splits.iter().map(|s| s.residual()).fold(worst, f64::max);
    }
    let mut disagreements = 0;
    for i in 0..LINALG_CASES {
        let n = rng.gen_range(1..=6);
        let m: Matrix64 = if i % 2 == 0 {
            gen_monomial(n, i as u64, 3.0)
        } else {
            let mut m: Matrix64 = gen_monomial(n, i as u64, 3.0);
            let (r, c) = (rng.gen_range(0..n), rng.gen_range(0..n));
            match rng.gen_range(0..4) {
                0 => m[(r, c)] = -m[(r, c)],
                1 => m[(r, c)] += rng.gen_range(0.1..1.0),
                2 => (0..n).for_each(|j| m[(r, j)] = 0.0),
                _ => {
                    let data = (0..n * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
                    m = Matrix64::new(n, n, data).unwrap();
                }
            }
            m
        };
        let one_per_line = (0..n).all(|r| (0..n).filter(|&c| m[(r, c)] != 0.0).count() == 1)
            && (0..n).all(|c| (0..n).filter(|&r| m[(r, c)] != 0.0).count() == 1);
        let inverse_nonneg = invert(&m, 1e-12).is_ok_and(|inv| inv.as_slice().iter().all(|&x| x >= 0.0));
        if is_monomial(&m, 0.0).is_some() != (one_per_line && inverse_nonneg) {
            disagreements += 1;
        }
    }
    outcome(
        worst <= SPLIT_TOL && disagreements == 0,
        format!("worst split residual {worst:.2e}, monomial disagreements {disagreements}/{LINALG_CASES}"),
    )
}

/// Two inputs, one hidden layer of width 2, two classes, bijective
/// activation, random full-rank weights.
fn cross_check_net(rng: &mut impl Rng) -> Network64 {
    let act = match rng.gen_range(0..5) {
        0 => Activation64::Sigmoid,
        1 => Activation64::Tanh,
        2 => Activation64::leaky_relu(rng.gen_range(0.05..0.5)).unwrap(),
        3 => Activation64::Softplus,
        _ => Activation64::elu(rng.gen_range(0.5..2.0)).unwrap(),
    };
    let mut matrix = || loop {
        let data: Vec<f64> = (0..4).map(|_| rng.gen_range(-2.0..2.0)).collect();
        if (data[0] * data[3] - data[1] * data[2]).abs() > 0.1 {
            return Matrix64::new(2, 2, data).unwrap();
        }
    };
    let (w1, w2) = (matrix(), matrix());
    let b1 = vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
    let b2 = vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
    Network64::new(2, 2, vec![Layer64::new(w1, b1, Some(act)), Layer64::new(w2, b2, None)]).unwrap()
}

fn output_space_cross_check() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let spec = GridSpec::cube(2, 4.0, CROSS_CHECK_RESOLUTION).unwrap();
    let (mut compared, mut agreed, mut open_mismatch, mut closed_mismatch) = (0, 0, 0, 0);
    for _ in 0..CROSS_CHECK_NETS {
        let net = cross_check_net(&mut rng);
        let map = grid_scan(&net, &spec).unwrap();
        for m in 0..2 {
            let input = connected_components(&map, m);
            let output = output_space_scan(&net, &spec, m).unwrap().components;
            if input == 0 || output == 0 {
                continue;
            }
            compared += 1;
            if input == output {
                agreed += 1;
            } else if map.components_of_class(m).any(|c| c.touches_boundary) {
                open_mismatch += 1;
            } else {
                closed_mismatch += 1;
            }
        }
    }
    outcome(
        closed_mismatch == 0,
        format!(
            "{agreed}/{compared} class counts agree, {open_mismatch} mismatches at the window edge (reported), {closed_mismatch} interior mismatches"
        ),
    )
}

fn cli(dir: &Path, args: &[&str]) -> bool {
    Command::new(env!("CARGO_BIN_EXE_regioncert"))
        .current_dir(dir)
        .args(args)
        .output()
        .map(|o| o.status.code().is_some_and(|c| c <= 1))
        .unwrap_or(false)
}

fn pipeline_run(dir: &Path) -> Option<Vec<(String, Vec<u8>)>> {
    let steps: [&[&str]; 6] = [
        &["synth", "--theorem", "bounded", "--widths", "2,2,2", "--activation", "tanh", "--seed", "71", "--out", "net.json"],
        &["check", "net.json", "--out", "check.txt"],
        &["check", "net.json", "--format", "json", "--out", "check.json"],
        &["scan", "net.json", "--box", "-4:4,-4:4", "--res", "128", "--out", "map.pgm", "--summary", "summary.json"],
        &["scan", "net.json", "--box", "-4:4,-4:4", "--res", "128", "--out", "map.svg"],
        &["fuzz", "--trials", "8", "--seed", "71", "--res", "32", "--out", "fuzz.json"],
    ];
    for args in steps {
        if !cli(dir, args) {
            return None;
        }
    }
    ["net.json", "check.txt", "check.json", "map.pgm", "summary.json", "map.svg", "fuzz.json"]
        .into_iter()
        .map(|f| std::fs::read(dir.join(f)).ok().map(|b| (f.to_owned(), b)))
        .collect()
}

fn pipeline_determinism() -> Outcome {
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    match (pipeline_run(a.path()), pipeline_run(b.path())) {
        (Some(x), Some(y)) => {
            let differing: Vec<&str> = x.iter().zip(&y).filter(|(p, q)| p.1 != q.1).map(|(p, _)| p.0.as_str()).collect();
            outcome(
                differing.is_empty(),
                format!("{} report files compared, differing: {differing:?}", x.len()),
            )
        }
        _ => outcome(false, "a pipeline step failed".into()),
    }
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 7] = [
        ("soundness fuzz", soundness_fuzz),
        ("counterexample reproduction", counterexample_reproduction),
        ("constructive preimages", constructive_preimages),
        ("relu segment identity", segment_identity),
        ("linalg contracts", linalg_contracts),
        ("output-space cross-check", output_space_cross_check),
        ("pipeline determinism", pipeline_determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.into_iter().enumerate() {
        let o = check();
        println!("{} criterion {} ({name}): {}", if o.pass { "PASS" } else { "FAIL" }, i + 1, o.detail);
        failed += usize::from(!o.pass);
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
