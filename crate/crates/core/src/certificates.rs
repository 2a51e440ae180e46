//! Hypothesis checkers for the connectivity theorems.
//!
//! Each checker inspects a [`Network`] and produces a [`CertificateReport`]
//! listing every clause it evaluated. A `Certified` verdict means every
//! clause passed, so every decision region of the network is path-connected.
//! `Inapplicable` means the hidden activations fall outside the theorem's
//! activation class; `Refuted` means they fit but some other clause failed.

use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};

use crate::linalg::{self, column_split, first_negative, is_monomial, ColumnSplit, Matrix, SplitMode};
use crate::network::{apply_hat, ActivationKind, Network};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TheoremId {
    /// Pyramidal, full rank, `sigma(R) = R` (leaky ReLU).
    SurjectiveBijective,
    /// Finite lower limit, unbounded above (softplus, ELU), non-negative splits.
    HalfBounded,
    /// Bounded activations (sigmoid, tanh), non-negative splits and the
    /// rest-column bound `U du_rest <= 0`.
    Bounded,
    /// Deep ReLU: `V_l >= 0` and `V_l b_l <= 0` for every hidden layer.
    ReluDeep,
    /// One hidden ReLU layer with `d >= n_1` and full-rank `W_1`.
    ReluOneLayer,
}

impl TheoremId {
    pub const ALL: [TheoremId; 5] = [
        TheoremId::SurjectiveBijective,
        TheoremId::HalfBounded,
        TheoremId::Bounded,
        TheoremId::ReluDeep,
        TheoremId::ReluOneLayer,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            TheoremId::SurjectiveBijective => "surjective-bijective",
            TheoremId::HalfBounded => "half-bounded",
            TheoremId::Bounded => "bounded",
            TheoremId::ReluDeep => "relu-deep",
            TheoremId::ReluOneLayer => "relu-one-layer",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|t| t.name() == name)
    }

    /// Whether a hidden activation belongs to the theorem's class.
    pub fn admits(&self, a: &ActivationKind<impl Scalar>) -> bool {
        let tr = a.traits();
        match self {
            TheoremId::SurjectiveBijective => tr.bijective_onto_range && tr.surjective_onto_reals,
            TheoremId::HalfBounded => tr.bijective_onto_range && tr.is_half_bounded(),
            TheoremId::Bounded => tr.bijective_onto_range && tr.is_bounded(),
            TheoremId::ReluDeep | TheoremId::ReluOneLayer => matches!(a, ActivationKind::Relu),
        }
    }
}

impl fmt::Display for TheoremId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Certified,
    Refuted,
    Inapplicable,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Certified => "certified",
            Verdict::Refuted => "refuted",
            Verdict::Inapplicable => "inapplicable",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Clause {
    pub name: String,
    pub pass: bool,
    pub witness: Option<String>,
}

impl Clause {
    pub fn pass(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            pass: true,
            witness: None,
        }
    }

    pub fn fail(name: impl Into<String>, witness: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            pass: false,
            witness: Some(witness.into()),
        }
    }
}

/// Column selection that satisfied a layer's split clause.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSplit {
    pub layer: usize,
    pub basis_cols: Vec<usize>,
    pub rest_cols: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CertificateReport {
    pub theorem: TheoremId,
    pub verdict: Verdict,
    pub clauses: Vec<Clause>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub split_choices: Vec<LayerSplit>,
}

impl CertificateReport {
    fn inapplicable(theorem: TheoremId, clause: Clause) -> Self {
        Self {
            theorem,
            verdict: Verdict::Inapplicable,
            clauses: vec![clause],
            split_choices: Vec::new(),
        }
    }

    fn decide(theorem: TheoremId, clauses: Vec<Clause>, split_choices: Vec<LayerSplit>) -> Self {
        let verdict = if clauses.iter().all(|c| c.pass) {
            Verdict::Certified
        } else {
            Verdict::Refuted
        };
        Self {
            theorem,
            verdict,
            clauses,
            split_choices,
        }
    }

    pub fn is_certified(&self) -> bool {
        self.verdict == Verdict::Certified
    }

    pub fn failed_clauses(&self) -> impl Iterator<Item = &Clause> {
        self.clauses.iter().filter(|c| !c.pass)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CertifyOptions<T: Scalar = f64> {
    /// Relative pivot tolerance for rank, inversion and column selection.
    pub tol: T,
    pub split_mode: SplitMode,
    /// Apply the split clauses of the bounded-activation theorems to the
    /// output layer `W_L` as well as to layers `2..L-1`.
    pub include_output_layer: bool,
    /// Slack for the theorem inequalities (`x >= -slack`, `x <= slack`).
    pub slack: T,
    /// Require only `W^1 >= 0` instead of all of `W >= 0`.
    pub basis_nonneg_only: bool,
}

impl<T: Scalar> Default for CertifyOptions<T> {
    fn default() -> Self {
        Self {
            tol: T::lit(1e-9),
            split_mode: SplitMode::Greedy,
            include_output_layer: true,
            slack: T::zero(),
            basis_nonneg_only: false,
        }
    }
}

/// `d = n_0 >= n_1 >= ... >= n_{L-1}`; the output width is unconstrained.
pub fn check_pyramidal<T: Scalar>(net: &Network<T>) -> Clause {
    let widths = net.widths();
    let hidden = &widths[..widths.len() - 1];
    match hidden.windows(2).position(|w| w[0] < w[1]) {
        None => Clause::pass("pyramidal"),
        Some(k) => Clause::fail(
            "pyramidal",
            format!("n_{k} = {} < n_{} = {}", hidden[k], k + 1, hidden[k + 1]),
        ),
    }
}

/// `rank(W_l) == min(n_l, n_{l-1})` for every `l` in `layers`.
pub fn check_full_rank<T: Scalar>(
    net: &Network<T>,
    layers: impl IntoIterator<Item = usize>,
    tol: T,
) -> Clause {
    for l in layers {
        let w = &net.layer(l).weights;
        let want = w.rows().min(w.cols());
        let got = linalg::rank(w, tol).unwrap_or(0);
        if got != want {
            return Clause::fail("full-rank", format!("layer {l}: rank {got} < {want}"));
        }
    }
    Clause::pass("full-rank")
}

fn hidden_layers<T: Scalar>(net: &Network<T>) -> std::ops::Range<usize> {
    1..net.depth()
}

fn activation_clause<T: Scalar>(net: &Network<T>, theorem: TheoremId) -> Clause {
    if net.depth() == 1 && theorem != TheoremId::SurjectiveBijective {
        return Clause::fail("activation-class", "no hidden layers");
    }
    for l in hidden_layers(net) {
        let a = net.layer(l).activation.as_ref().expect("hidden layer activation");
        if !theorem.admits(a) {
            return Clause::fail(
                "activation-class",
                format!("layer {l}: {a} is outside the {theorem} class"),
            );
        }
    }
    Clause::pass("activation-class")
}

/// Outcome of searching the candidate splits of one weight matrix.
enum SplitSearch<T: Scalar> {
    Found(ColumnSplit<T>),
    Failed(String),
}

/// Tries the greedy split first, then (in exhaustive mode) every invertible
/// column subset, returning the first one `accept` admits.
fn search_split<T: Scalar>(
    w: &Matrix<T>,
    opts: &CertifyOptions<T>,
    accept: impl Fn(&ColumnSplit<T>) -> Result<(), String>,
) -> SplitSearch<T> {
    if w.rows() > w.cols() {
        return SplitSearch::Failed(format!(
            "{}x{} matrix has fewer columns than rows",
            w.rows(),
            w.cols()
        ));
    }
    let greedy = match column_split(w, opts.tol, SplitMode::Greedy) {
        Ok(mut set) => set.splits.remove(0),
        Err(e) => return SplitSearch::Failed(e.to_string()),
    };
    let first_failure = match accept(&greedy) {
        Ok(()) => return SplitSearch::Found(greedy),
        Err(why) => format!("basis {:?}: {why}", greedy.basis_cols),
    };
    let SplitMode::Exhaustive { .. } = opts.split_mode else {
        return SplitSearch::Failed(first_failure);
    };
    match column_split(w, opts.tol, opts.split_mode) {
        Ok(set) => {
            let examined = set.splits.len();
            for split in set.splits {
                if split.basis_cols != greedy.basis_cols && accept(&split).is_ok() {
                    return SplitSearch::Found(split);
                }
            }
            let trunc = if set.truncated { ", budget exhausted" } else { "" };
            SplitSearch::Failed(format!(
                "{first_failure} (no valid split among {examined} invertible candidates{trunc})"
            ))
        }
        Err(e) => SplitSearch::Failed(e.to_string()),
    }
}

/// `V = (W^1)^-1 >= 0`, through the monomial fast path when it applies.
fn inverse_nonneg<T: Scalar>(split: &ColumnSplit<T>, slack: T) -> Result<(), String> {
    if is_monomial(&split.w1, T::zero()).is_some() {
        return Ok(());
    }
    match first_negative(&split.v, slack) {
        None => Ok(()),
        Some((i, j, x)) => Err(format!("V({i},{j}) = {x} < 0")),
    }
}

fn weights_nonneg_clause<T: Scalar>(l: usize, w: &Matrix<T>, slack: T) -> Clause {
    let name = format!("layer-{l}:weights-nonneg");
    match first_negative(w, slack) {
        None => Clause::pass(name),
        Some((i, j, x)) => Clause::fail(name, format!("layer {l}: W({i},{j}) = {x} < 0")),
    }
}

fn record(l: usize, split: &ColumnSplit<impl Scalar>) -> LayerSplit {
    LayerSplit {
        layer: l,
        basis_cols: split.basis_cols.clone(),
        rest_cols: split.rest_cols.clone(),
    }
}

fn split_clause<T: Scalar>(
    l: usize,
    w: &Matrix<T>,
    opts: &CertifyOptions<T>,
    accept: impl Fn(&ColumnSplit<T>) -> Result<(), String>,
    choices: &mut Vec<LayerSplit>,
) -> Clause {
    let name = format!("layer-{l}:split");
    match search_split(w, opts, accept) {
        SplitSearch::Found(split) => {
            choices.push(record(l, &split));
            Clause::pass(name)
        }
        SplitSearch::Failed(why) => Clause::fail(name, format!("layer {l}: {why}")),
    }
}

/// Layers `2..=L` (or `2..L` without the output layer) carrying split clauses.
fn split_layers<T: Scalar>(net: &Network<T>, include_output: bool) -> std::ops::Range<usize> {
    let end = if include_output { net.depth() + 1 } else { net.depth() };
    2..end
}

fn basis_nonneg<T: Scalar>(split: &ColumnSplit<T>, slack: T) -> Result<(), String> {
    match first_negative(&split.w1, slack) {
        None => Ok(()),
        Some((i, j, x)) => Err(format!("W1({i},{j}) = {x} < 0")),
    }
}

pub fn certify_surjective_bijective<T: Scalar>(net: &Network<T>, tol: T) -> CertificateReport {
    let theorem = TheoremId::SurjectiveBijective;
    let class = activation_clause(net, theorem);
    if !class.pass {
        return CertificateReport::inapplicable(theorem, class);
    }
    let clauses = vec![
        class,
        check_pyramidal(net),
        check_full_rank(net, hidden_layers(net), tol),
    ];
    CertificateReport::decide(theorem, clauses, Vec::new())
}

pub fn certify_half_bounded<T: Scalar>(net: &Network<T>, opts: &CertifyOptions<T>) -> CertificateReport {
    let theorem = TheoremId::HalfBounded;
    let class = activation_clause(net, theorem);
    if !class.pass {
        return CertificateReport::inapplicable(theorem, class);
    }
    let mut clauses = vec![
        class,
        check_pyramidal(net),
        check_full_rank(net, hidden_layers(net), opts.tol),
    ];
    let mut choices = Vec::new();
    for l in split_layers(net, opts.include_output_layer) {
        let w = &net.layer(l).weights;
        if !opts.basis_nonneg_only {
            clauses.push(weights_nonneg_clause(l, w, opts.slack));
        }
        let accept = |s: &ColumnSplit<T>| {
            if opts.basis_nonneg_only {
                basis_nonneg(s, opts.slack)?;
            }
            inverse_nonneg(s, opts.slack)
        };
        clauses.push(split_clause(l, w, opts, accept, &mut choices));
    }
    CertificateReport::decide(theorem, clauses, choices)
}

/// Lower/upper corner images pushed through the hidden layers, starting from
/// `u_1^1 = [a_1]`, `u_2^1 = [a_2]` of the first activation.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundRecursion<T: Scalar = f64> {
    /// `lower[l - 1] = u_1^l` for hidden layers `l = 1..L-1`.
    pub lower: Vec<Vec<T>>,
    pub upper: Vec<Vec<T>>,
}

impl<T: Scalar> BoundRecursion<T> {
    /// `None` unless the network has hidden layers and the first activation
    /// has finite limits on both sides.
    pub fn compute(net: &Network<T>) -> Option<Self> {
        if net.depth() < 2 {
            return None;
        }
        let first = net.layer(1);
        let tr = first.activation.as_ref()?.traits();
        if !tr.is_bounded() {
            return None;
        }
        let n1 = first.out_dim();
        let mut lower = vec![vec![tr.lower_limit; n1]];
        let mut upper = vec![vec![tr.upper_limit; n1]];
        for l in 2..net.depth() {
            let layer = net.layer(l);
            let act = layer.activation.as_ref()?;
            let next = |u: &[T]| apply_hat(act, &layer.affine(u));
            lower.push(next(lower.last().unwrap()));
            upper.push(next(upper.last().unwrap()));
        }
        Some(Self { lower, upper })
    }

    /// `du^l = u_2^l - u_1^l` for hidden layer `l`.
    pub fn delta(&self, l: usize) -> Vec<T> {
        self.upper[l - 1]
            .iter()
            .zip(&self.lower[l - 1])
            .map(|(&b, &a)| b - a)
            .collect()
    }

    pub fn is_ordered(&self) -> bool {
        self.lower
            .iter()
            .zip(&self.upper)
            .all(|(a, b)| a.iter().zip(b).all(|(x, y)| x <= y))
    }
}

/// `U (du)_rest <= slack`, where `du` lives in the input space of the layer.
fn rest_bound<T: Scalar>(split: &ColumnSplit<T>, du: &[T], slack: T) -> Result<(), String> {
    let rest = split.rest_of(du);
    let prod = split.u.mul_vec(&rest).map_err(|e| e.to_string())?;
    match prod.iter().position(|&x| x > slack) {
        None => Ok(()),
        Some(i) => Err(format!("(U du_rest)[{i}] = {} > 0", prod[i])),
    }
}

pub fn certify_bounded<T: Scalar>(net: &Network<T>, opts: &CertifyOptions<T>) -> CertificateReport {
    let theorem = TheoremId::Bounded;
    let class = activation_clause(net, theorem);
    if !class.pass {
        return CertificateReport::inapplicable(theorem, class);
    }
    let recursion = BoundRecursion::compute(net).expect("bounded activations checked");
    let mut clauses = vec![
        class,
        check_pyramidal(net),
        check_full_rank(net, hidden_layers(net), opts.tol),
    ];
    let mut choices = Vec::new();
    for l in split_layers(net, opts.include_output_layer) {
        let w = &net.layer(l).weights;
        if !opts.basis_nonneg_only {
            clauses.push(weights_nonneg_clause(l, w, opts.slack));
        }
        let du = recursion.delta(l - 1);
        let accept = |s: &ColumnSplit<T>| {
            if opts.basis_nonneg_only {
                basis_nonneg(s, opts.slack)?;
            }
            inverse_nonneg(s, opts.slack)?;
            rest_bound(s, &du, opts.slack)
        };
        clauses.push(split_clause(l, w, opts, accept, &mut choices));
    }
    CertificateReport::decide(theorem, clauses, choices)
}

pub fn certify_relu_deep<T: Scalar>(net: &Network<T>, opts: &CertifyOptions<T>) -> CertificateReport {
    let theorem = TheoremId::ReluDeep;
    let class = activation_clause(net, theorem);
    if !class.pass {
        return CertificateReport::inapplicable(theorem, class);
    }
    let mut clauses = vec![
        class,
        check_pyramidal(net),
        check_full_rank(net, hidden_layers(net), opts.tol),
    ];
    let mut choices = Vec::new();
    for l in hidden_layers(net) {
        let layer = net.layer(l);
        let accept = |s: &ColumnSplit<T>| {
            inverse_nonneg(s, opts.slack)?;
            let vb = s.v.mul_vec(&layer.bias).map_err(|e| e.to_string())?;
            match vb.iter().position(|&x| x > opts.slack) {
                None => Ok(()),
                Some(i) => Err(format!("(V b)[{i}] = {} > 0", vb[i])),
            }
        };
        clauses.push(split_clause(l, &layer.weights, opts, accept, &mut choices));
    }
    CertificateReport::decide(theorem, clauses, choices)
}

pub fn certify_relu_one_layer<T: Scalar>(net: &Network<T>, tol: T) -> CertificateReport {
    let theorem = TheoremId::ReluOneLayer;
    if net.depth() != 2 {
        return CertificateReport::inapplicable(
            theorem,
            Clause::fail(
                "one-hidden-layer",
                format!("network has {} hidden layers", net.depth() - 1),
            ),
        );
    }
    let class = activation_clause(net, theorem);
    if !class.pass {
        return CertificateReport::inapplicable(theorem, class);
    }
    let w1 = &net.layer(1).weights;
    let (n1, d) = w1.shape();
    let width = if d >= n1 {
        Clause::pass("width")
    } else {
        Clause::fail("width", format!("d = {d} < n_1 = {n1}"))
    };
    let rank = match linalg::rank(w1, tol) {
        Ok(r) if r == n1 => Clause::pass("full-rank"),
        Ok(r) => Clause::fail("full-rank", format!("layer 1: rank {r} < {n1}")),
        Err(e) => Clause::fail("full-rank", e.to_string()),
    };
    CertificateReport::decide(
        theorem,
        vec![Clause::pass("one-hidden-layer"), class, width, rank],
        Vec::new(),
    )
}

pub fn certify<T: Scalar>(net: &Network<T>, theorem: TheoremId, opts: &CertifyOptions<T>) -> CertificateReport {
    match theorem {
        TheoremId::SurjectiveBijective => certify_surjective_bijective(net, opts.tol),
        TheoremId::HalfBounded => certify_half_bounded(net, opts),
        TheoremId::Bounded => certify_bounded(net, opts),
        TheoremId::ReluDeep => certify_relu_deep(net, opts),
        TheoremId::ReluOneLayer => certify_relu_one_layer(net, opts.tol),
    }
}

/// Every checker, in [`TheoremId::ALL`] order.
pub fn certify_all<T: Scalar>(net: &Network<T>, opts: &CertifyOptions<T>) -> Vec<CertificateReport> {
    TheoremId::ALL
        .iter()
        .map(|&t| certify(net, t, opts))
        .collect()
}

pub fn any_certified(reports: &[CertificateReport]) -> bool {
    reports.iter().any(CertificateReport::is_certified)
}

/// Plain-text table, one row per theorem followed by its failed clauses.
pub fn render_table(reports: &[CertificateReport]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{:<22} {:<13} failed clause", "theorem", "verdict");
    for r in reports {
        let mut failed = r.failed_clauses();
        match failed.next() {
            None => {
                let _ = writeln!(out, "{:<22} {:<13} -", r.theorem.name(), r.verdict.to_string());
            }
            Some(c) => {
                let _ = writeln!(
                    out,
                    "{:<22} {:<13} {}: {}",
                    r.theorem.name(),
                    r.verdict.to_string(),
                    c.name,
                    c.witness.as_deref().unwrap_or("")
                );
                for c in failed {
                    let _ = writeln!(
                        out,
                        "{:<36} {}: {}",
                        "",
                        c.name,
                        c.witness.as_deref().unwrap_or("")
                    );
                }
            }
        }
    }
    out
}

pub fn reports_to_json(reports: &[CertificateReport]) -> String {
    let mut s = serde_json::to_string_pretty(reports).expect("reports serialize");
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::Layer;

    fn m(rows: &[&[f64]]) -> Matrix<f64> {
        Matrix::from_rows(rows).unwrap()
    }

    fn net(d: usize, layers: Vec<(Matrix<f64>, Vec<f64>, Option<ActivationKind<f64>>)>) -> Network<f64> {
        let classes = layers.last().unwrap().0.rows();
        Network::new(
            d,
            classes,
            layers
                .into_iter()
                .map(|(w, b, a)| Layer::new(w, b, a))
                .collect(),
        )
        .unwrap()
    }

    /// Hidden widths given, all weights the leading identity block.
    fn identity_net(widths: &[usize], act: ActivationKind<f64>) -> Network<f64> {
        let layers = widths
            .windows(2)
            .enumerate()
            .map(|(i, w)| {
                let mut mat = Matrix::zeros(w[1], w[0]);
                for k in 0..w[1].min(w[0]) {
                    mat[(k, k)] = 1.0;
                }
                let last = i + 2 == widths.len();
                (mat, vec![0.0; w[1]], (!last).then_some(act))
            })
            .collect();
        net(widths[0], layers)
    }

    #[test]
    fn pyramidal_examples() {
        let a = ActivationKind::LeakyRelu { alpha: 0.1 };
        assert!(check_pyramidal(&identity_net(&[4, 3, 3, 2], a)).pass);
        let c = check_pyramidal(&identity_net(&[2, 3, 2], a));
        assert!(!c.pass);
        assert_eq!(c.witness.as_deref(), Some("n_0 = 2 < n_1 = 3"));
        assert!(check_pyramidal(&identity_net(&[3, 3, 3, 10], a)).pass);
    }

    #[test]
    fn full_rank_examples() {
        let a = ActivationKind::LeakyRelu { alpha: 0.1 };
        let n = identity_net(&[2, 2, 2], a);
        assert!(check_full_rank(&n, 1..2, 1e-9).pass);

        let zero = net(
            2,
            vec![
                (Matrix::zeros(2, 2), vec![0.0; 2], Some(a)),
                (Matrix::identity(2), vec![0.0; 2], None),
            ],
        );
        let c = check_full_rank(&zero, 1..2, 1e-9);
        assert_eq!(c.witness.as_deref(), Some("layer 1: rank 0 < 2"));

        let dup = net(
            4,
            vec![
                (
                    m(&[&[1.0, 2.0, 3.0, 4.0], &[1.0, 2.0, 3.0, 4.0], &[0.0, 1.0, 0.0, 1.0]]),
                    vec![0.0; 3],
                    Some(a),
                ),
                (Matrix::identity(3), vec![0.0; 3], None),
            ],
        );
        assert!(!check_full_rank(&dup, 1..2, 1e-9).pass);
    }

    #[test]
    fn surjective_bijective_examples() {
        let leaky = ActivationKind::LeakyRelu { alpha: 0.1 };
        let r = certify_surjective_bijective(&identity_net(&[3, 2, 2], leaky), 1e-9);
        assert_eq!(r.verdict, Verdict::Certified);

        let r = certify_surjective_bijective(&identity_net(&[3, 2, 2], ActivationKind::Sigmoid), 1e-9);
        assert_eq!(r.verdict, Verdict::Inapplicable);

        let r = certify_surjective_bijective(&identity_net(&[2, 3, 2], leaky), 1e-9);
        assert_eq!(r.verdict, Verdict::Refuted);
        assert_eq!(r.failed_clauses().next().unwrap().name, "pyramidal");
    }

    #[test]
    fn affine_only_network_is_vacuously_certified() {
        let n = net(2, vec![(m(&[&[1.0, 2.0], &[3.0, -1.0]]), vec![0.0, 1.0], None)]);
        let reports = certify_all(&n, &CertifyOptions::default());
        assert_eq!(reports[0].verdict, Verdict::Certified);
        assert!(reports[1..].iter().all(|r| r.verdict == Verdict::Inapplicable));
    }

    #[test]
    fn half_bounded_negative_entry_in_layer_three() {
        let elu = ActivationKind::Elu { alpha: 1.0 };
        let mut n = identity_net(&[3, 3, 2, 2], elu);
        let mut layers = n.layers().to_vec();
        layers[2].weights[(1, 0)] = -0.5;
        n = Network::new(3, 2, layers).unwrap();
        let r = certify_half_bounded(&n, &CertifyOptions::default());
        assert_eq!(r.verdict, Verdict::Refuted);
        let c = r.failed_clauses().next().unwrap();
        assert_eq!(c.name, "layer-3:weights-nonneg");
        assert_eq!(c.witness.as_deref(), Some("layer 3: W(1,0) = -0.5 < 0"));
    }

    #[test]
    fn half_bounded_upper_triangular_basis_refuted_then_rescued() {
        // W_2 = [[1,1],[0,1]] has inverse [[1,-1],[0,1]]; no other split.
        let sp = ActivationKind::Softplus;
        let n = net(
            2,
            vec![
                (Matrix::identity(2), vec![0.0; 2], Some(sp)),
                (m(&[&[1.0, 1.0], &[0.0, 1.0]]), vec![0.0; 2], None),
            ],
        );
        let r = certify_half_bounded(&n, &CertifyOptions::default());
        assert_eq!(r.verdict, Verdict::Refuted);
        let w = r.failed_clauses().next().unwrap().witness.clone().unwrap();
        assert!(w.contains("V(0,1) = -1"), "{w}");

        // With an extra identity column the exhaustive search finds {1, 2}.
        let n = net(
            3,
            vec![
                (Matrix::identity(3), vec![0.0; 3], Some(sp)),
                (m(&[&[1.0, 1.0, 0.0], &[0.0, 1.0, 1.0]]), vec![0.0; 2], None),
            ],
        );
        let greedy = certify_half_bounded(&n, &CertifyOptions::default());
        assert_eq!(greedy.verdict, Verdict::Refuted);
        let opts = CertifyOptions {
            split_mode: SplitMode::exhaustive(),
            ..CertifyOptions::default()
        };
        let ex = certify_half_bounded(&n, &opts);
        assert_eq!(ex.verdict, Verdict::Certified);
        assert_eq!(ex.split_choices[0].basis_cols, vec![0, 2]);
    }

    #[test]
    fn output_layer_flag() {
        let sp = ActivationKind::Softplus;
        let n = net(
            2,
            vec![
                (Matrix::identity(2), vec![0.0; 2], Some(sp)),
                (m(&[&[1.0, -1.0], &[-1.0, 1.0]]), vec![0.0; 2], None),
            ],
        );
        assert_eq!(certify_half_bounded(&n, &CertifyOptions::default()).verdict, Verdict::Refuted);
        let opts = CertifyOptions {
            include_output_layer: false,
            ..CertifyOptions::default()
        };
        assert_eq!(certify_half_bounded(&n, &opts).verdict, Verdict::Certified);
    }

    #[test]
    fn bounded_square_monomial_is_vacuous_on_rest() {
        let n = net(
            3,
            vec![
                (m(&[&[1.0, 2.0, 0.0], &[0.0, 1.0, -1.0]]), vec![0.3, -0.2], Some(ActivationKind::Sigmoid)),
                (m(&[&[0.0, 2.0], &[1.5, 0.0]]), vec![0.1, 0.0], Some(ActivationKind::Sigmoid)),
                (m(&[&[3.0, 0.0], &[0.0, 0.5]]), vec![0.0, 0.0], None),
            ],
        );
        let r = certify_bounded(&n, &CertifyOptions::default());
        assert_eq!(r.verdict, Verdict::Certified, "{r:?}");
        assert_eq!(r.split_choices.len(), 2);
    }

    #[test]
    fn bounded_positive_rest_column_refuted() {
        // W_2 = [I | (1,0)^T]: U = (1,0)^T, du^1 = (1,1,1) for sigmoid, so
        // (U du_rest)[0] = 1 > 0.
        let n = net(
            3,
            vec![
                (Matrix::identity(3), vec![0.0; 3], Some(ActivationKind::Sigmoid)),
                (m(&[&[1.0, 0.0, 1.0], &[0.0, 1.0, 0.0]]), vec![0.0; 2], None),
            ],
        );
        let r = certify_bounded(&n, &CertifyOptions::default());
        assert_eq!(r.verdict, Verdict::Refuted);
        let c = r.failed_clauses().next().unwrap();
        assert_eq!(c.name, "layer-2:split");
        assert!(c.witness.as_deref().unwrap().contains("(U du_rest)[0] = 1 > 0"));
    }

    #[test]
    fn tanh_recursion_starts_at_limits() {
        let n = identity_net(&[2, 2, 2, 2], ActivationKind::Tanh);
        let rec = BoundRecursion::compute(&n).unwrap();
        assert_eq!(rec.lower[0], vec![-1.0, -1.0]);
        assert_eq!(rec.upper[0], vec![1.0, 1.0]);
        assert_eq!(rec.lower[1], vec![(-1.0f64).tanh(); 2]);
        assert_eq!(rec.delta(1), vec![2.0, 2.0]);
        assert!(rec.is_ordered());
    }

    #[test]
    fn relu_deep_examples() {
        let n = net(
            3,
            vec![
                (m(&[&[0.0, 2.0, -5.0], &[1.0, 0.0, 7.0]]), vec![-1.0, 0.0], Some(ActivationKind::Relu)),
                (m(&[&[1.0, -1.0], &[2.0, 3.0]]), vec![0.0, 0.0], None),
            ],
        );
        let r = certify_relu_deep(&n, &CertifyOptions::default());
        assert_eq!(r.verdict, Verdict::Certified, "{r:?}");

        let mut layers = n.layers().to_vec();
        layers[0].bias = vec![-1.0, 0.5];
        let bad = Network::new(3, 2, layers).unwrap();
        let r = certify_relu_deep(&bad, &CertifyOptions::default());
        assert_eq!(r.verdict, Verdict::Refuted);
        let w = r.failed_clauses().next().unwrap().witness.clone().unwrap();
        assert!(w.contains("(V b)[0] = 0.5 > 0"), "{w}");

        let sig = identity_net(&[2, 2, 2], ActivationKind::Sigmoid);
        assert_eq!(certify_relu_deep(&sig, &CertifyOptions::default()).verdict, Verdict::Inapplicable);
    }

    #[test]
    fn relu_one_layer_examples() {
        let relu = ActivationKind::Relu;
        let ok = net(
            3,
            vec![
                (m(&[&[0.3, -1.0, 2.0], &[1.0, 0.5, -0.7]]), vec![4.0, -2.0], Some(relu)),
                (m(&[&[1.0, -1.0], &[0.2, 0.3]]), vec![0.0, 0.0], None),
            ],
        );
        assert_eq!(certify_relu_one_layer(&ok, 1e-9).verdict, Verdict::Certified);

        let wide = identity_net(&[1, 2, 2], relu);
        let r = certify_relu_one_layer(&wide, 1e-9);
        assert_eq!(r.verdict, Verdict::Refuted);
        assert_eq!(r.failed_clauses().next().unwrap().name, "width");

        let deep = identity_net(&[2, 2, 2, 2], relu);
        assert_eq!(certify_relu_one_layer(&deep, 1e-9).verdict, Verdict::Inapplicable);
    }

    #[test]
    fn certify_all_leaky_pyramidal() {
        let leaky = ActivationKind::LeakyRelu { alpha: 0.1 };
        let reports = certify_all(&identity_net(&[3, 3, 2, 2], leaky), &CertifyOptions::default());
        let certified: Vec<_> = reports.iter().filter(|r| r.is_certified()).map(|r| r.theorem).collect();
        assert_eq!(certified, vec![TheoremId::SurjectiveBijective]);
        assert_eq!(
            reports.iter().map(|r| r.theorem).collect::<Vec<_>>(),
            TheoremId::ALL.to_vec()
        );
    }

    #[test]
    fn report_json_field_names() {
        let r = certify_relu_one_layer(&identity_net(&[1, 2, 2], ActivationKind::Relu), 1e-9);
        let v: serde_json::Value = serde_json::from_str(&reports_to_json(&[r])).unwrap();
        assert_eq!(v[0]["theorem"], "relu-one-layer");
        assert_eq!(v[0]["verdict"], "refuted");
        assert_eq!(v[0]["clauses"][2]["name"], "width");
        assert_eq!(v[0]["clauses"][2]["pass"], false);
        assert_eq!(v[0]["clauses"][2]["witness"], "d = 1 < n_1 = 2");
    }
}
