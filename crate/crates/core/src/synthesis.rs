//! Generators for certified networks, monomial matrices and hand-built
//! counterexamples, plus the seeded campaigns that cross-check certificates
//! against the grid oracle and the constructive rectangle results.
//!
//! All randomness comes from `ChaCha8Rng` (the `rand_chacha` crate), whose
//! output stream is fixed by its seed on every platform. Campaign trial `i`
//! (0-based) uses the seed [`trial_seed`]`(seed, i)`, the `(i + 1)`-th output
//! of a SplitMix64 generator started at `seed`, so trials are independent and
//! the report does not depend on how trials are scheduled across threads.

use std::collections::BTreeMap;
use std::fmt;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::certificates::{certify, certify_all, CertifyOptions, TheoremId, Verdict};
use crate::format::NetworkFile;
use crate::geometry::{
    grid_scan, rect_image_bounded, rect_image_halfopen, relu_preimage, relu_segment_identity,
    relu_segment_point, Affine, GridSpec, RegionMap,
};
use crate::linalg::{self, ColumnSplit, Matrix};
use crate::network::{strict_argmax, ActivationKind, Layer, Network, Scratch};
use crate::scalar::Scalar;

#[derive(Debug, Error, PartialEq)]
pub enum SynthError {
    /// No network with the requested shape can satisfy the target theorem.
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, SynthError>;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 output function.
pub fn splitmix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of trial `trial` in a campaign seeded with `seed`.
pub fn trial_seed(seed: u64, trial: u64) -> u64 {
    splitmix64(seed.wrapping_add(trial.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA)))
}

fn rng_for(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn monomial_with(rng: &mut impl Rng, n: usize, scale: f64) -> Matrix<f64> {
    let hi = scale.max(1.0);
    let d: Vec<f64> = (0..n).map(|_| rng.gen_range(0.5..hi)).collect();
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(rng);
    let mut m = Matrix::zeros(n, n);
    for (i, &p) in perm.iter().enumerate() {
        m[(i, p)] = d[i];
    }
    m
}

/// `D P` with diagonal entries of `D` drawn from `U(0.5, max(scale, 1))` and
/// `P` a uniformly random permutation.
pub fn gen_monomial<T: Scalar>(n: usize, seed: u64, scale: f64) -> Matrix<T> {
    assert!(n >= 1, "monomial matrices need n >= 1");
    monomial_with(&mut rng_for(seed), n, scale).map(T::lit)
}

fn uniform_matrix(rng: &mut impl Rng, rows: usize, cols: usize, lo: f64, hi: f64) -> Matrix<f64> {
    let data = (0..rows * cols).map(|_| rng.gen_range(lo..hi)).collect();
    Matrix::new(rows, cols, data).expect("finite entries")
}

fn uniform_vec(rng: &mut impl Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(lo..hi)).collect()
}

/// Entries from `U(-scale, scale)`, redrawn until the matrix has full rank.
fn full_rank_matrix(rng: &mut impl Rng, rows: usize, cols: usize, scale: f64) -> Matrix<f64> {
    loop {
        let m = uniform_matrix(rng, rows, cols, -scale, scale);
        if linalg::rank(&m, 1e-6).ok() == Some(rows.min(cols)) {
            return m;
        }
    }
}

/// `[monomial | rest]` with the monomial block in the leading columns.
fn monomial_block(
    rng: &mut impl Rng,
    rows: usize,
    cols: usize,
    scale: f64,
    rest: impl Fn(&mut dyn rand::RngCore) -> f64,
) -> Matrix<f64> {
    let mono = monomial_with(rng, rows, scale);
    let mut m = Matrix::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            m[(i, j)] = if j < rows { mono[(i, j)] } else { rest(rng) };
        }
    }
    m
}

/// Request for [`gen_certified`].
#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    /// `n_0 = d, n_1, ..., n_L = M`.
    pub widths: Vec<usize>,
    pub activation: ActivationKind<f64>,
    pub target_theorem: TheoremId,
    pub seed: u64,
    pub weight_scale: f64,
    /// Fill the rest columns of split layers with random valid entries
    /// instead of zeros.
    pub nonzero_rest: bool,
}

impl SynthSpec {
    pub fn new(widths: Vec<usize>, activation: ActivationKind<f64>, target_theorem: TheoremId, seed: u64) -> Self {
        Self {
            widths,
            activation,
            target_theorem,
            seed,
            weight_scale: 1.0,
            nonzero_rest: false,
        }
    }
}

fn check_spec(spec: &SynthSpec) -> Result<()> {
    let w = &spec.widths;
    if w.len() < 2 || w.contains(&0) {
        return Err(SynthError::InvalidInput(format!(
            "widths {w:?} need at least an input and an output width, all positive"
        )));
    }
    if !(spec.weight_scale.is_finite() && spec.weight_scale > 0.0) {
        return Err(SynthError::InvalidInput(format!(
            "weight scale must be positive, got {}",
            spec.weight_scale
        )));
    }
    spec.activation
        .validate()
        .map_err(|e| SynthError::InvalidInput(e.to_string()))?;
    let t = spec.target_theorem;
    let hidden = &w[..w.len() - 1];
    if !t.admits(&spec.activation) {
        return Err(SynthError::Infeasible(format!(
            "activation-class: {} is outside the {t} class",
            spec.activation
        )));
    }
    if t == TheoremId::ReluOneLayer {
        if w.len() != 3 {
            return Err(SynthError::Infeasible(format!(
                "one-hidden-layer: widths {w:?} have {} hidden layers",
                w.len() - 2
            )));
        }
        if w[0] < w[1] {
            return Err(SynthError::Infeasible(format!("width: d = {} < n_1 = {}", w[0], w[1])));
        }
        return Ok(());
    }
    if let Some(k) = hidden.windows(2).position(|p| p[0] < p[1]) {
        return Err(SynthError::Infeasible(format!(
            "pyramidal: n_{k} = {} < n_{} = {}",
            hidden[k],
            k + 1,
            hidden[k + 1]
        )));
    }
    if t != TheoremId::SurjectiveBijective && w.len() < 3 {
        return Err(SynthError::Infeasible(
            "activation-class: no hidden layers".into(),
        ));
    }
    if matches!(t, TheoremId::HalfBounded | TheoremId::Bounded) {
        let l = w.len() - 1;
        if w[l] > w[l - 1] {
            return Err(SynthError::Infeasible(format!(
                "layer-{}:split: output width {} exceeds n_{} = {}",
                l,
                w[l],
                l - 1,
                w[l - 1]
            )));
        }
        let has_rest = w[1..].windows(2).any(|p| p[0] > p[1]);
        if t == TheoremId::Bounded && spec.nonzero_rest && has_rest {
            return Err(SynthError::Infeasible(
                "rest columns: with W >= 0 and V >= 0, U du_rest <= 0 forces zero rest columns".into(),
            ));
        }
    }
    Ok(())
}

/// A network the target theorem's checker certifies (with default
/// [`CertifyOptions`]).
///
/// * surjective-bijective, relu-one-layer: random full-rank weights.
/// * half-bounded, bounded: random full-rank `W_1`; `W_l = [monomial | rest]`
///   for `l >= 2` (output layer included), rest zero or, for half-bounded,
///   random non-negative.
/// * relu-deep: `W_l = [monomial | rest]` with `b_l <= 0` for hidden layers,
///   rest zero or random of either sign.
pub fn gen_certified(spec: &SynthSpec) -> Result<Network<f64>> {
    check_spec(spec)?;
    let w = &spec.widths;
    let s = spec.weight_scale;
    let depth = w.len() - 1;
    let mut rng = rng_for(spec.seed);
    let mut layers = Vec::with_capacity(depth);
    for l in 1..=depth {
        let (rows, cols) = (w[l], w[l - 1]);
        let is_output = l == depth;
        let (weights, bias) = match spec.target_theorem {
            TheoremId::SurjectiveBijective | TheoremId::ReluOneLayer => (
                full_rank_matrix(&mut rng, rows, cols, s),
                uniform_vec(&mut rng, rows, -s, s),
            ),
            TheoremId::HalfBounded | TheoremId::Bounded if l == 1 => (
                full_rank_matrix(&mut rng, rows, cols, s),
                uniform_vec(&mut rng, rows, -s, s),
            ),
            TheoremId::HalfBounded | TheoremId::Bounded => {
                let nonzero = spec.nonzero_rest;
                let m = monomial_block(&mut rng, rows, cols, s, |r| {
                    if nonzero {
                        r.gen_range(0.0..s)
                    } else {
                        0.0
                    }
                });
                (m, uniform_vec(&mut rng, rows, -s, s))
            }
            TheoremId::ReluDeep if is_output => (
                uniform_matrix(&mut rng, rows, cols, -s, s),
                uniform_vec(&mut rng, rows, -s, s),
            ),
            TheoremId::ReluDeep => {
                let nonzero = spec.nonzero_rest;
                let m = monomial_block(&mut rng, rows, cols, s, |r| {
                    if nonzero {
                        r.gen_range(-s..s)
                    } else {
                        0.0
                    }
                });
                (m, uniform_vec(&mut rng, rows, -s, 0.0))
            }
        };
        let activation = (!is_output).then_some(spec.activation);
        layers.push(Layer::new(weights, bias, activation));
    }
    let net = Network::new(w[0], w[depth], layers).map_err(|e| SynthError::InvalidInput(e.to_string()))?;
    let report = certify(&net, spec.target_theorem, &CertifyOptions::default());
    if report.verdict != Verdict::Certified {
        let why = report
            .failed_clauses()
            .map(|c| format!("{}: {}", c.name, c.witness.as_deref().unwrap_or("")))
            .collect::<Vec<_>>()
            .join("; ");
        return Err(SynthError::Infeasible(why));
    }
    Ok(net)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CounterexampleKind {
    /// `d = 1`: class 1 is `{|x| > 1.5}`, two rays.
    ReluAbsolute,
    /// `d = 2`: class 1 is the open first and third quadrants.
    WideXor,
}

impl CounterexampleKind {
    pub const ALL: [CounterexampleKind; 2] = [CounterexampleKind::ReluAbsolute, CounterexampleKind::WideXor];

    pub fn name(&self) -> &'static str {
        match self {
            CounterexampleKind::ReluAbsolute => "relu-absolute",
            CounterexampleKind::WideXor => "wide-xor",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == name)
    }
}

impl fmt::Display for CounterexampleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Hand-built network with a disconnected decision region. The seed only
/// draws a positive output scale `c` in `[1, 2)`, which leaves the regions
/// unchanged.
///
/// * relu-absolute: `h = (relu(x - 1), relu(-x - 1))`, `o_1 = c (h_1 + h_2)`,
///   `o_0 = 0.5 c`.
/// * wide-xor: `h = relu(+-(x_1 + x_2)), relu(+-(x_1 - x_2))`,
///   `o_1 = c |x_1 + x_2|`, `o_0 = c |x_1 - x_2|`.
pub fn gen_counterexample(kind: CounterexampleKind, seed: u64) -> Network<f64> {
    let c: f64 = rng_for(seed).gen_range(1.0..2.0);
    let m = |rows: &[&[f64]]| Matrix::from_rows(rows).expect("constant matrix");
    let relu = Some(ActivationKind::Relu);
    let layers = match kind {
        CounterexampleKind::ReluAbsolute => vec![
            Layer::new(m(&[&[1.0], &[-1.0]]), vec![-1.0, -1.0], relu),
            Layer::new(m(&[&[0.0, 0.0], &[c, c]]), vec![0.5 * c, 0.0], None),
        ],
        CounterexampleKind::WideXor => vec![
            Layer::new(
                m(&[&[1.0, 1.0], &[-1.0, -1.0], &[1.0, -1.0], &[-1.0, 1.0]]),
                vec![0.0; 4],
                relu,
            ),
            Layer::new(m(&[&[0.0, 0.0, c, c], &[c, c, 0.0, 0.0]]), vec![0.0; 2], None),
        ],
    };
    let d = layers[0].in_dim();
    Network::new(d, 2, layers).expect("counterexample is well formed")
}

/// Scan settings for [`fuzz_campaign`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FuzzConfig {
    /// Cells per axis.
    pub resolution: usize,
    /// The scan box is `[-box_factor * weight_scale, box_factor * weight_scale]^d`.
    pub box_factor: f64,
}

impl Default for FuzzConfig {
    fn default() -> Self {
        Self {
            resolution: 256,
            box_factor: 4.0,
        }
    }
}

/// A certified network whose split region was reconnected in a larger window:
/// every extra component touched the scan window's edge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowResolved {
    pub trial: u64,
    pub source: String,
    pub components: Vec<usize>,
    /// Enlargement of the scan window at which the pieces joined.
    pub window_factor: f64,
}

/// A certified network whose oracle shows a class with several components
/// that no larger window reconnects.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub trial: u64,
    pub trial_seed: u64,
    pub source: String,
    pub certified_by: Vec<TheoremId>,
    pub components: Vec<usize>,
    pub touches_boundary: Vec<bool>,
    pub network: NetworkFile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FuzzReport {
    pub seed: u64,
    pub config: FuzzConfig,
    pub trials: u64,
    /// Trials with at least one certified verdict.
    pub certified: u64,
    /// Trials with no certified verdict.
    pub refuted: u64,
    /// Certified verdicts per theorem.
    pub certified_by_theorem: BTreeMap<TheoremId, u64>,
    /// Trials per network source (`certified:<theorem>`, `random`,
    /// `counterexample:<kind>`).
    pub sources: BTreeMap<String, u64>,
    /// Split regions explained by the finite scan window.
    pub window_resolved: Vec<WindowResolved>,
    pub violations: Vec<Violation>,
}

impl FuzzReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

struct TrialOutcome {
    source: String,
    certified_by: Vec<TheoremId>,
    violation: Option<Violation>,
    window_resolved: Option<WindowResolved>,
}

/// Largest window enlargement tried before a split region counts as a
/// violation.
const MAX_WINDOW_FACTOR: f64 = 256.0;

/// Rescans over `[-f * half, f * half]^d` for `f = 2, 4, 8, ...` up to
/// [`MAX_WINDOW_FACTOR`] and returns the first `f` at which every class in
/// `classes` has all its tracked points joined.
///
/// The tracked points start as the interior points of the class's components
/// in `map`. After each rescan the points are grouped by the component they
/// landed in and each group is replaced by that component's interior point,
/// so a thin piece is followed outward one doubling at a time. Every such
/// replacement must be backed by a rescan path from the old point to the new
/// one along which the network, sampled at the original cell size, stays in
/// the class (see [`verified_reach`]). Coarse rescans therefore cannot bridge
/// gaps narrower than their cells. A point landing on another class or an
/// unverified path ends the search. Grids of dimension 1 and 2 are rescanned at twice the resolution.
fn confirm_in_larger_window(
    net: &Network<f64>,
    map: &RegionMap,
    classes: &[usize],
    half: f64,
    config: &FuzzConfig,
) -> Option<f64> {
    let d = net.input_dim();
    let res = if d <= 2 { config.resolution * 2 } else { config.resolution };
    let step = (0..d).map(|a| map.spec().cell_size(a)).fold(f64::INFINITY, f64::min);
    let mut tracked: Vec<(usize, Vec<Vec<f64>>)> = classes
        .iter()
        .map(|&m| (m, map.interior_points(m).into_iter().map(|(_, p)| p).collect()))
        .collect();
    let mut f = 2.0;
    while f <= MAX_WINDOW_FACTOR {
        let spec = GridSpec::cube(d, half * f, res).expect("valid rescan grid");
        let wide = grid_scan(net, &spec).expect("dimensions match");
        let mut joined = true;
        for (m, pts) in &mut tracked {
            let interior: BTreeMap<usize, Vec<f64>> = wide.interior_points(*m).into_iter().collect();
            let mut groups: BTreeMap<usize, Vec<&Vec<f64>>> = BTreeMap::new();
            for p in pts.iter() {
                let cell = spec.cell_of(p)?;
                if wide.label(cell) != Some(*m) {
                    return None;
                }
                groups.entry(wide.component(cell)?).or_default().push(p);
            }
            for (c, members) in &groups {
                if !verified_reach(net, &wide, *m, &interior[c], members, step) {
                    return None;
                }
            }
            joined &= groups.len() == 1;
            *pts = groups.keys().map(|c| interior[c].clone()).collect();
        }
        if joined {
            return Some(f);
        }
        f *= 2.0;
    }
    None
}

/// Whether every point in `points` is reachable from `source` through cells
/// of class `m`, moving only between face-adjacent cells whose connecting
/// segment the network classifies as `m` at every sample spaced at most
/// `step` apart. The first and last legs join the points to their cell
/// centers the same way.
fn verified_reach(
    net: &Network<f64>,
    map: &RegionMap,
    m: usize,
    source: &[f64],
    points: &[&Vec<f64>],
    step: f64,
) -> bool {
    let spec = map.spec();
    let center = |idx: usize| spec.to_input(&spec.cell_center(idx));
    let mut scratch = Scratch::default();
    let mut x = vec![0.0; net.input_dim()];
    let mut segment_ok = |a: &[f64], b: &[f64]| {
        let len = a.iter().zip(b).map(|(p, q)| (q - p) * (q - p)).sum::<f64>().sqrt();
        let n = (len / step).ceil().max(1.0) as usize;
        (0..=n).all(|i| {
            let t = i as f64 / n as f64;
            for (k, xk) in x.iter_mut().enumerate() {
                *xk = a[k] + t * (b[k] - a[k]);
            }
            strict_argmax(net.forward_scratch(&x, &mut scratch), 0.0) == Some(m)
        })
    };
    let Some(start) = spec.cell_of(source) else {
        return false;
    };
    if !segment_ok(source, &center(start)) {
        return false;
    }
    let mut seen = vec![false; spec.cell_count()];
    seen[start] = true;
    let mut queue = std::collections::VecDeque::from([start]);
    while let Some(cur) = queue.pop_front() {
        let here = center(cur);
        for nb in spec.neighbors(cur) {
            if !seen[nb] && map.label(nb) == Some(m) && segment_ok(&here, &center(nb)) {
                seen[nb] = true;
                queue.push_back(nb);
            }
        }
    }
    points.iter().all(|p| {
        spec.cell_of(p)
            .is_some_and(|cell| seen[cell] && segment_ok(&center(cell), p))
    })
}

fn sample_dim(rng: &mut impl Rng) -> usize {
    match rng.gen_range(0..20) {
        0..=5 => 1,
        6..=17 => 2,
        _ => 3,
    }
}

/// Shape and activation for a certified trial, within widths `(3, 3, 2, 2)`.
fn sample_certified_spec(rng: &mut impl Rng, seed: u64) -> SynthSpec {
    let theorem = TheoremId::ALL[rng.gen_range(0..TheoremId::ALL.len())];
    let needs_two = matches!(theorem, TheoremId::HalfBounded | TheoremId::Bounded);
    let d = if needs_two { rng.gen_range(2..=3) } else { sample_dim(rng) };
    let mut widths = vec![d];
    let n1 = rng.gen_range(if needs_two { 2 } else { 1 }..=d);
    widths.push(n1);
    let two_hidden = theorem != TheoremId::ReluOneLayer && rng.gen_bool(0.5);
    if two_hidden {
        let lo = if needs_two { 2 } else { 1 };
        widths.push(rng.gen_range(lo..=n1.min(2)));
    }
    widths.push(2);
    let activation = match theorem {
        TheoremId::SurjectiveBijective => ActivationKind::LeakyRelu {
            alpha: rng.gen_range(0.05..0.5),
        },
        TheoremId::HalfBounded => {
            if rng.gen_bool(0.5) {
                ActivationKind::Softplus
            } else {
                ActivationKind::Elu {
                    alpha: rng.gen_range(0.5..2.0),
                }
            }
        }
        TheoremId::Bounded => {
            if rng.gen_bool(0.5) {
                ActivationKind::Sigmoid
            } else {
                ActivationKind::Tanh
            }
        }
        TheoremId::ReluDeep | TheoremId::ReluOneLayer => ActivationKind::Relu,
    };
    SynthSpec {
        widths,
        activation,
        target_theorem: theorem,
        seed,
        weight_scale: rng.gen_range(0.5..2.0),
        nonzero_rest: theorem != TheoremId::Bounded && rng.gen_bool(0.5),
    }
}

fn random_activation(rng: &mut impl Rng) -> ActivationKind<f64> {
    match rng.gen_range(0..6) {
        0 => ActivationKind::Sigmoid,
        1 => ActivationKind::Tanh,
        2 => ActivationKind::Relu,
        3 => ActivationKind::LeakyRelu {
            alpha: rng.gen_range(0.05..0.5),
        },
        4 => ActivationKind::Softplus,
        _ => ActivationKind::Elu {
            alpha: rng.gen_range(0.5..2.0),
        },
    }
}

/// Unconstrained network: any widths up to 4, any activation, uniform weights.
fn random_network(rng: &mut impl Rng) -> (Network<f64>, f64) {
    let scale = rng.gen_range(0.5..2.0);
    let d = sample_dim(rng);
    let hidden = rng.gen_range(1..=2);
    let mut widths = vec![d];
    widths.extend((0..hidden).map(|_| rng.gen_range(1..=4)));
    widths.push(rng.gen_range(2..=3));
    let act = random_activation(rng);
    let depth = widths.len() - 1;
    let layers = (1..=depth)
        .map(|l| {
            Layer::new(
                uniform_matrix(rng, widths[l], widths[l - 1], -scale, scale),
                uniform_vec(rng, widths[l], -scale, scale),
                (l < depth).then_some(act),
            )
        })
        .collect();
    (
        Network::new(d, widths[depth], layers).expect("random network is well formed"),
        scale,
    )
}

fn run_trial(seed: u64, trial: u64, config: &FuzzConfig) -> TrialOutcome {
    let tseed = trial_seed(seed, trial);
    let mut rng = rng_for(tseed);
    let roll = rng.gen_range(0..100);
    let (source, net, scale) = if roll < 70 {
        let spec = sample_certified_spec(&mut rng, tseed);
        let net = gen_certified(&spec).expect("sampled certified spec is feasible");
        (format!("certified:{}", spec.target_theorem), net, spec.weight_scale)
    } else if roll < 75 {
        let kind = CounterexampleKind::ALL[rng.gen_range(0..2)];
        (format!("counterexample:{kind}"), gen_counterexample(kind, tseed), 1.0)
    } else {
        let (net, scale) = random_network(&mut rng);
        ("random".to_string(), net, scale)
    };
    let reports = certify_all(&net, &CertifyOptions::default());
    let certified_by: Vec<TheoremId> = reports
        .iter()
        .filter(|r| r.is_certified())
        .map(|r| r.theorem)
        .collect();
    let mut violation = None;
    let mut window_resolved = None;
    if !certified_by.is_empty() {
        let half = config.box_factor * scale;
        let spec = GridSpec::cube(net.input_dim(), half, config.resolution).expect("valid fuzz grid");
        let map = grid_scan(&net, &spec).expect("dimensions match");
        let summary = map.summary();
        let split: Vec<usize> = summary.iter().filter(|c| c.components >= 2).map(|c| c.class).collect();
        if !split.is_empty() {
            let clipped = split
                .iter()
                .all(|&m| map.components_of_class(m).all(|c| c.touches_boundary));
            let factor = if clipped {
                confirm_in_larger_window(&net, &map, &split, half, config)
            } else {
                None
            };
            match factor {
                Some(factor) => {
                    window_resolved = Some(WindowResolved {
                        trial,
                        source: source.clone(),
                        components: summary.iter().map(|c| c.components).collect(),
                        window_factor: factor,
                    })
                }
                None => {
                    violation = Some(Violation {
                        trial,
                        trial_seed: tseed,
                        source: source.clone(),
                        certified_by: certified_by.clone(),
                        components: summary.iter().map(|c| c.components).collect(),
                        touches_boundary: summary.iter().map(|c| c.touches_boundary).collect(),
                        network: NetworkFile::from_network(&net),
                    })
                }
            }
        }
    }
    TrialOutcome {
        source,
        certified_by,
        violation,
        window_resolved,
    }
}

/// Soundness campaign: each trial draws a certified network (70%), a
/// counterexample (5%) or an unconstrained random network (25%), runs every
/// checker, and grid-scans the certified ones. A certified network with a
/// class of two or more oracle components is a violation unless all those
/// components touch the window edge and a larger window joins them.
pub fn fuzz_campaign(trials: u64, seed: u64, config: &FuzzConfig) -> FuzzReport {
    let outcomes: Vec<TrialOutcome> = (0..trials)
        .into_par_iter()
        .map(|t| run_trial(seed, t, config))
        .collect();
    let mut report = FuzzReport {
        seed,
        config: *config,
        trials,
        certified: 0,
        refuted: 0,
        certified_by_theorem: BTreeMap::new(),
        sources: BTreeMap::new(),
        window_resolved: Vec::new(),
        violations: Vec::new(),
    };
    for o in outcomes {
        *report.sources.entry(o.source).or_default() += 1;
        if o.certified_by.is_empty() {
            report.refuted += 1;
        } else {
            report.certified += 1;
        }
        for t in o.certified_by {
            *report.certified_by_theorem.entry(t).or_default() += 1;
        }
        report.violations.extend(o.violation);
        report.window_resolved.extend(o.window_resolved);
    }
    report
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LemmaKind {
    RectHalfopen,
    RectBounded,
    ReluPreimage,
    ReluSegment,
}

impl LemmaKind {
    pub const ALL: [LemmaKind; 4] = [
        LemmaKind::RectHalfopen,
        LemmaKind::RectBounded,
        LemmaKind::ReluPreimage,
        LemmaKind::ReluSegment,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            LemmaKind::RectHalfopen => "rect-halfopen",
            LemmaKind::RectBounded => "rect-bounded",
            LemmaKind::ReluPreimage => "relu-preimage",
            LemmaKind::ReluSegment => "relu-segment",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == name)
    }
}

impl fmt::Display for LemmaKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Forward-residual tolerance of the constructive campaigns.
pub const LEMMA_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaReport {
    pub which: LemmaKind,
    pub trials: u64,
    pub seed: u64,
    /// Largest `max_i |h(x)_i - y_i|` (for the segment identity, the largest
    /// coordinate gap between the two sides).
    pub max_residual: f64,
    /// Trials whose construction errored, left the box, or missed the
    /// tolerance.
    pub failures: u64,
    pub first_failure: Option<String>,
}

impl LemmaReport {
    pub fn passed(&self) -> bool {
        self.failures == 0 && self.max_residual <= LEMMA_TOL
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

impl fmt::Display for LemmaReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "lemma: {}", self.which)?;
        writeln!(f, "trials: {}", self.trials)?;
        writeln!(f, "max residual: {:e}", self.max_residual)?;
        writeln!(f, "failures: {}", self.failures)?;
        if let Some(why) = &self.first_failure {
            writeln!(f, "first failure: {why}")?;
        }
        write!(f, "result: {}", if self.passed() { "pass" } else { "fail" })
    }
}

fn max_gap(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Random column order of `[block | rest]`: returns the shuffled matrix, the
/// positions of the block's columns, and the original index of every column.
fn scatter_columns(rng: &mut impl Rng, m: &Matrix<f64>) -> (Matrix<f64>, Vec<usize>, Vec<usize>) {
    let (n, cols) = m.shape();
    let mut order: Vec<usize> = (0..cols).collect();
    order.shuffle(rng);
    let shuffled = m.select_columns(&order);
    let mut basis: Vec<usize> = (0..cols).filter(|&j| order[j] < n).collect();
    basis.sort_by_key(|&j| order[j]);
    (shuffled, basis, order)
}

type TrialResult = std::result::Result<f64, String>;

fn halfopen_trial(rng: &mut impl Rng) -> TrialResult {
    let n = rng.gen_range(1..=6);
    let m = rng.gen_range(n..=10);
    let s = rng.gen_range(0.5..3.0);
    let block = monomial_block(rng, n, m, s, |r| if r.gen_bool(0.5) { r.gen_range(0.0..s) } else { 0.0 });
    let (w, basis, _) = scatter_columns(rng, &block);
    let b = uniform_vec(rng, n, -s, s);
    let u = uniform_vec(rng, m, -s, s);
    let split = ColumnSplit::from_basis(&w, &basis, 1e-12).map_err(|e| e.to_string())?;
    let img = rect_image_halfopen(Affine::new(&w, &b), &split, &u, 0.0).map_err(|e| e.to_string())?;
    let y: Vec<f64> = img.corner().iter().map(|&v| v + rng.gen_range(0.0..5.0)).collect();
    let x = img.preimage(&y).map_err(|e| e.to_string())?;
    if let Some(j) = (0..m).find(|&j| x[j] < u[j]) {
        return Err(format!("x[{j}] = {} < u[{j}] = {}", x[j], u[j]));
    }
    Ok(max_gap(&img.map().apply(&x), &y))
}

fn bounded_trial(rng: &mut impl Rng) -> TrialResult {
    let n = rng.gen_range(1..=6);
    let m = rng.gen_range(n..=10);
    let s = rng.gen_range(0.5..3.0);
    // Rest columns are non-zero only where the box is flat, which keeps
    // `U du_rest = 0`.
    let flat: Vec<bool> = (0..m).map(|j| j >= n && rng.gen_bool(0.5)).collect();
    let mut block = monomial_block(rng, n, m, s, |_| 0.0);
    for j in (n..m).filter(|&j| flat[j]) {
        for i in 0..n {
            block[(i, j)] = rng.gen_range(0.0..s);
        }
    }
    let (w, basis, order) = scatter_columns(rng, &block);
    let flat: Vec<bool> = order.iter().map(|&old| flat[old]).collect();
    let b = uniform_vec(rng, n, -s, s);
    let u1 = uniform_vec(rng, m, -s, s);
    let u2: Vec<f64> = u1
        .iter()
        .zip(&flat)
        .map(|(&a, &f)| if f { a } else { a + rng.gen_range(0.0..2.0 * s) })
        .collect();
    let split = ColumnSplit::from_basis(&w, &basis, 1e-12).map_err(|e| e.to_string())?;
    let img = rect_image_bounded(Affine::new(&w, &b), &split, &u1, &u2, 0.0).map_err(|e| e.to_string())?;
    let (v1, v2) = (&img.rect.lower, &img.rect.upper);
    let y: Vec<f64> = v1
        .iter()
        .zip(v2)
        .map(|(&lo, &hi)| match rng.gen_range(0..10) {
            0 => lo,
            1 => hi,
            _ => lo + (hi - lo) * rng.gen_range(0.0..1.0),
        })
        .collect();
    let x = img.preimage(&y).map_err(|e| e.to_string())?;
    if let Some(j) = (0..m).find(|&j| !(u1[j] <= x[j] && x[j] <= u2[j])) {
        return Err(format!("x[{j}] = {} outside [{}, {}]", x[j], u1[j], u2[j]));
    }
    Ok(max_gap(&img.map().apply(&x), &y))
}

fn relu_preimage_trial(rng: &mut impl Rng) -> TrialResult {
    let n = rng.gen_range(1..=6);
    let m = rng.gen_range(n..=10);
    let s = rng.gen_range(0.5..3.0);
    let w1 = if rng.gen_bool(0.5) {
        monomial_with(rng, n, s)
    } else {
        // Inverse of a positive, diagonally dominant matrix: V >= 0 with
        // entries of both signs in W^1.
        let mut v0 = uniform_matrix(rng, n, n, 0.0, 0.3);
        for i in 0..n {
            v0[(i, i)] += rng.gen_range(1.0..2.0);
        }
        linalg::invert(&v0, 1e-12).map_err(|e| e.to_string())?
    };
    let mut block = uniform_matrix(rng, n, m, -s, s);
    for i in 0..n {
        for j in 0..n {
            block[(i, j)] = w1[(i, j)];
        }
    }
    let (w, basis, _) = scatter_columns(rng, &block);
    let r = uniform_vec(rng, n, 0.01, s);
    let b: Vec<f64> = w1.mul_vec(&r).expect("square").into_iter().map(|x| -x).collect();
    let v: Vec<f64> = match rng.gen_range(0..10) {
        0 => vec![0.0; n],
        _ => (0..n)
            .map(|_| if rng.gen_bool(0.2) { 0.0 } else { rng.gen_range(0.0..5.0) })
            .collect(),
    };
    let split = ColumnSplit::from_basis(&w, &basis, 1e-12).map_err(|e| e.to_string())?;
    let h = Affine::new(&w, &b);
    let x = relu_preimage(h, &split, &v, 1e-12).map_err(|e| e.to_string())?;
    if let Some(j) = (0..m).find(|&j| x[j] < 0.0) {
        return Err(format!("x[{j}] = {} < 0", x[j]));
    }
    Ok(max_gap(&h.apply(&x), &v))
}

fn segment_trial(rng: &mut impl Rng) -> TrialResult {
    let n = rng.gen_range(1..=8);
    let u: Vec<f64> = (0..n)
        .map(|_| match rng.gen_range(0..10) {
            0 => 0.0,
            1 => rng.gen_range(-1e300..1e300),
            2 => rng.gen_range(-1e-300..1e-300),
            _ => rng.gen_range(-10.0..10.0),
        })
        .collect();
    let lambda = match rng.gen_range(0..10) {
        0 => 0.0,
        1 => 1.0,
        _ => rng.gen_range(0.0..1.0),
    };
    let relu = |t: f64| t.max(0.0);
    let lhs: Vec<f64> = relu_segment_point(&u, lambda).into_iter().map(relu).collect();
    let rhs: Vec<f64> = u.iter().map(|&t| relu(t)).collect();
    if !relu_segment_identity(&u, lambda) {
        return Err(format!("identity fails at u = {u:?}, lambda = {lambda}"));
    }
    Ok(max_gap(&lhs, &rhs))
}

/// Seeded property campaign for one constructive result (dimensions
/// `n <= 6`, `m <= 10`).
pub fn lemma_campaign(which: LemmaKind, trials: u64, seed: u64) -> LemmaReport {
    let results: Vec<TrialResult> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let mut rng = rng_for(trial_seed(seed, t));
            match which {
                LemmaKind::RectHalfopen => halfopen_trial(&mut rng),
                LemmaKind::RectBounded => bounded_trial(&mut rng),
                LemmaKind::ReluPreimage => relu_preimage_trial(&mut rng),
                LemmaKind::ReluSegment => segment_trial(&mut rng),
            }
        })
        .collect();
    let mut report = LemmaReport {
        which,
        trials,
        seed,
        max_residual: 0.0,
        failures: 0,
        first_failure: None,
    };
    for (t, r) in results.into_iter().enumerate() {
        match r {
            Ok(res) if res <= LEMMA_TOL => report.max_residual = report.max_residual.max(res),
            Ok(res) => {
                report.max_residual = report.max_residual.max(res);
                report.failures += 1;
                report
                    .first_failure
                    .get_or_insert_with(|| format!("trial {t}: residual {res:e}"));
            }
            Err(why) => {
                report.failures += 1;
                report.first_failure.get_or_insert_with(|| format!("trial {t}: {why}"));
            }
        }
    }
    report
}
