//! Axis-aligned rectangles and the constructive rectangle-image results:
//! images of orthant-like boxes under affine maps with non-negative inverse
//! bases, together with explicit preimages of every point in the image.

use crate::linalg::{first_negative, ColumnSplit, Matrix};
use crate::network::Layer;
use crate::scalar::Scalar;

use super::{GeometryError, Result};

/// Box between `lower` and `upper`; infinite bounds encode unbounded sides.
#[derive(Debug, Clone, PartialEq)]
pub struct Rect<T: Scalar = f64> {
    pub lower: Vec<T>,
    pub upper: Vec<T>,
    pub closed: bool,
}

impl<T: Scalar> Rect<T> {
    /// Box between the element-wise min and max of `u` and `v`.
    pub fn between(u: &[T], v: &[T], closed: bool) -> Self {
        Self {
            lower: u.iter().zip(v).map(|(&a, &b)| a.min(b)).collect(),
            upper: u.iter().zip(v).map(|(&a, &b)| a.max(b)).collect(),
            closed,
        }
    }

    /// `{x | x > u}` (open) or `{x | x >= u}` (closed).
    pub fn above(u: &[T], closed: bool) -> Self {
        Self {
            lower: u.to_vec(),
            upper: vec![T::infinity(); u.len()],
            closed,
        }
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn is_bounded(&self) -> bool {
        self.lower.iter().chain(&self.upper).all(|x| x.is_finite())
    }

    pub fn contains(&self, x: &[T]) -> bool {
        x.len() == self.dim()
            && x.iter().zip(&self.lower).zip(&self.upper).all(|((&x, &lo), &hi)| {
                if self.closed {
                    lo <= x && x <= hi
                } else {
                    lo < x && x < hi
                }
            })
    }
}

/// `h(x) = W x + b`.
#[derive(Debug, Clone, Copy)]
pub struct Affine<'a, T: Scalar = f64> {
    pub weights: &'a Matrix<T>,
    pub bias: &'a [T],
}

impl<'a, T: Scalar> Affine<'a, T> {
    pub fn new(weights: &'a Matrix<T>, bias: &'a [T]) -> Self {
        Self { weights, bias }
    }

    pub fn apply(&self, x: &[T]) -> Vec<T> {
        self.weights
            .mul_vec(x)
            .expect("affine input dimension")
            .into_iter()
            .zip(self.bias)
            .map(|(a, &b)| a + b)
            .collect()
    }

    fn check(&self, split: &ColumnSplit<T>) -> Result<()> {
        let (n, m) = self.weights.shape();
        if split.n() != n || split.m() != m || self.bias.len() != n {
            return Err(GeometryError::InvalidInput(format!(
                "split is {}x{} but map is {n}x{m} with bias of length {}",
                split.n(),
                split.m(),
                self.bias.len()
            )));
        }
        Ok(())
    }
}

impl<'a, T: Scalar> From<&'a Layer<T>> for Affine<'a, T> {
    fn from(l: &'a Layer<T>) -> Self {
        Self::new(&l.weights, &l.bias)
    }
}

fn require_len<T>(name: &str, x: &[T], len: usize) -> Result<()> {
    if x.len() == len {
        Ok(())
    } else {
        Err(GeometryError::InvalidInput(format!(
            "{name} has length {}, expected {len}",
            x.len()
        )))
    }
}

fn require_nonneg<T: Scalar>(clause: &str, m: &Matrix<T>, slack: T) -> Result<()> {
    match first_negative(m, slack) {
        None => Ok(()),
        Some((i, j, x)) => Err(GeometryError::Precondition(format!(
            "{clause}: entry ({i},{j}) = {x} < 0"
        ))),
    }
}

fn sub<T: Scalar>(a: &[T], b: &[T]) -> Vec<T> {
    a.iter().zip(b).map(|(&x, &y)| x - y).collect()
}

/// Image of the closed orthant-box `{x >= u}` under `h`, valid when `W >= 0`
/// and `V = (W^1)^-1 >= 0`.
#[derive(Debug, Clone)]
pub struct HalfOpenImage<'a, T: Scalar = f64> {
    h: Affine<'a, T>,
    split: &'a ColumnSplit<T>,
    u: Vec<T>,
    /// `{y >= h(u)}`.
    pub rect: Rect<T>,
}

pub fn rect_image_halfopen<'a, T: Scalar>(
    h: Affine<'a, T>,
    split: &'a ColumnSplit<T>,
    u: &[T],
    slack: T,
) -> Result<HalfOpenImage<'a, T>> {
    h.check(split)?;
    require_len("u", u, split.m())?;
    require_nonneg("W >= 0", h.weights, slack)?;
    require_nonneg("V >= 0", &split.v, slack)?;
    let v = h.apply(u);
    Ok(HalfOpenImage {
        h,
        split,
        u: u.to_vec(),
        rect: Rect::above(&v, true),
    })
}

impl<'a, T: Scalar> HalfOpenImage<'a, T> {
    pub fn corner(&self) -> &[T] {
        &self.rect.lower
    }

    /// `x = u + [V (y - v); 0]` (placed at the basis columns), with `x >= u`
    /// and `h(x) = y`.
    pub fn preimage(&self, y: &[T]) -> Result<Vec<T>> {
        let v = self.corner();
        require_len("y", y, v.len())?;
        if let Some(i) = (0..v.len()).find(|&i| y[i] < v[i]) {
            return Err(GeometryError::Precondition(format!(
                "y is outside the image: y[{i}] = {} < v[{i}] = {}",
                y[i], v[i]
            )));
        }
        let a1 = self.split.v.mul_vec(&sub(y, v)).expect("square V");
        let a = self.split.embed(&a1, &[]);
        Ok(self.u.iter().zip(a).map(|(&u, a)| u + a).collect())
    }

    pub fn map(&self) -> Affine<'a, T> {
        self.h
    }
}

/// Image of the closed box `[u1, u2]` under `h`, valid when `W >= 0`,
/// `V >= 0` and `U du_rest <= 0`.
#[derive(Debug, Clone)]
pub struct BoundedImage<'a, T: Scalar = f64> {
    h: Affine<'a, T>,
    split: &'a ColumnSplit<T>,
    u1: Vec<T>,
    u2: Vec<T>,
    /// `[h(u1), h(u2)]`.
    pub rect: Rect<T>,
}

pub fn rect_image_bounded<'a, T: Scalar>(
    h: Affine<'a, T>,
    split: &'a ColumnSplit<T>,
    u1: &[T],
    u2: &[T],
    slack: T,
) -> Result<BoundedImage<'a, T>> {
    h.check(split)?;
    require_len("u1", u1, split.m())?;
    require_len("u2", u2, split.m())?;
    if let Some(i) = (0..u1.len()).find(|&i| u1[i] > u2[i]) {
        return Err(GeometryError::Precondition(format!(
            "u1 <= u2: u1[{i}] = {} > u2[{i}] = {}",
            u1[i], u2[i]
        )));
    }
    require_nonneg("W >= 0", h.weights, slack)?;
    require_nonneg("V >= 0", &split.v, slack)?;
    let du_rest = split.rest_of(&sub(u2, u1));
    let prod = split.u.mul_vec(&du_rest).expect("U shape");
    if let Some(i) = prod.iter().position(|&x| x > slack) {
        return Err(GeometryError::Precondition(format!(
            "U du_rest <= 0: entry {i} = {}",
            prod[i]
        )));
    }
    let v1 = h.apply(u1);
    let v2 = h.apply(u2);
    Ok(BoundedImage {
        h,
        split,
        u1: u1.to_vec(),
        u2: u2.to_vec(),
        rect: Rect {
            lower: v1,
            upper: v2,
            closed: true,
        },
    })
}

impl<'a, T: Scalar> BoundedImage<'a, T> {
    /// Preimage of `y` in `[u1, u2]`:
    /// `x = u1 + [sum_i V_col(i) (W_row(i) du) lambda_i; 0]`, with
    /// `lambda_i = (y_i - v1_i) / (v2_i - v1_i)` and `lambda_i = 0` on
    /// degenerate axes. Coordinates that overshoot the box by rounding alone
    /// are snapped back onto it.
    pub fn preimage(&self, y: &[T]) -> Result<Vec<T>> {
        let (v1, v2) = (&self.rect.lower, &self.rect.upper);
        require_len("y", y, v1.len())?;
        if let Some(i) = (0..y.len()).find(|&i| y[i] < v1[i] || y[i] > v2[i]) {
            return Err(GeometryError::Precondition(format!(
                "y is outside the image on axis {i}: {} not in [{}, {}]",
                y[i], v1[i], v2[i]
            )));
        }
        let n = self.split.n();
        let du = sub(&self.u2, &self.u1);
        let w = self.h.weights;
        let mut a1 = vec![T::zero(); n];
        for i in 0..n {
            let span = v2[i] - v1[i];
            let lambda = if span > T::zero() {
                ((y[i] - v1[i]) / span).max(T::zero()).min(T::one())
            } else {
                T::zero()
            };
            let coeff = crate::linalg::dot(w.row(i), &du) * lambda;
            for (j, a) in a1.iter_mut().enumerate() {
                *a = *a + self.split.v[(j, i)] * coeff;
            }
        }
        let a = self.split.embed(&a1, &[]);
        let eps = T::epsilon() * T::lit(64.0);
        let mut x = Vec::with_capacity(a.len());
        for (j, a) in a.into_iter().enumerate() {
            let (lo, hi) = (self.u1[j], self.u2[j]);
            let mut xj = lo + a;
            let tol = eps * (T::one() + lo.abs() + hi.abs() + a.abs());
            if xj > hi {
                if xj - hi > tol {
                    return Err(GeometryError::Precondition(format!(
                        "construction left the box on axis {j}: {xj} > {hi}"
                    )));
                }
                xj = hi;
            }
            if xj < lo {
                if lo - xj > tol {
                    return Err(GeometryError::Precondition(format!(
                        "construction left the box on axis {j}: {xj} < {lo}"
                    )));
                }
                xj = lo;
            }
            x.push(xj);
        }
        Ok(x)
    }

    pub fn map(&self) -> Affine<'a, T> {
        self.h
    }
}

/// Preimage in the non-negative orthant of a point `v >= 0` under a ReLU
/// layer's affine map, valid when `V >= 0` and `V b <= 0`.
///
/// For `v = 0` this is `[-V b; 0]`; otherwise
/// `x = sum_i v_i [V (e_i - b / sum(v)); 0]`.
pub fn relu_preimage<T: Scalar>(
    h: Affine<'_, T>,
    split: &ColumnSplit<T>,
    v: &[T],
    slack: T,
) -> Result<Vec<T>> {
    h.check(split)?;
    require_len("v", v, split.n())?;
    require_nonneg("V >= 0", &split.v, slack)?;
    let vb = split.v.mul_vec(h.bias).expect("V shape");
    if let Some(i) = vb.iter().position(|&x| x > slack) {
        return Err(GeometryError::Precondition(format!(
            "V b <= 0: entry {i} = {}",
            vb[i]
        )));
    }
    if let Some(i) = v.iter().position(|&x| x < T::zero()) {
        return Err(GeometryError::Precondition(format!(
            "v >= 0: v[{i}] = {}",
            v[i]
        )));
    }
    let total = v.iter().fold(T::zero(), |acc, &x| acc + x);
    if total == T::zero() {
        let neg: Vec<T> = vb.iter().map(|&x| -x).collect();
        return Ok(split.embed(&neg, &[]));
    }
    let n = split.n();
    let mut basis_part = vec![T::zero(); n];
    for (i, &vi) in v.iter().enumerate() {
        if vi == T::zero() {
            continue;
        }
        for (j, acc) in basis_part.iter_mut().enumerate() {
            let term = split.v[(j, i)] - vb[j] / total;
            *acc = *acc + vi * term;
        }
    }
    Ok(split.embed(&basis_part, &[]))
}

fn relu<T: Scalar>(t: T) -> T {
    if t > T::zero() {
        t
    } else {
        T::zero()
    }
}

/// The point `lambda u + (1 - lambda) relu(u)`, evaluated as
/// `relu(u) + lambda (u - relu(u))` so that non-negative coordinates are
/// reproduced exactly.
pub fn relu_segment_point<T: Scalar>(u: &[T], lambda: T) -> Vec<T> {
    u.iter()
        .map(|&x| {
            let r = relu(x);
            r + lambda * (x - r)
        })
        .collect()
}

/// `relu(lambda u + (1 - lambda) relu(u)) == relu(u)`, compared exactly.
pub fn relu_segment_identity<T: Scalar>(u: &[T], lambda: T) -> bool {
    let p = relu_segment_point(u, lambda);
    p.iter().zip(u).all(|(&a, &b)| relu(a) == relu(b))
}
