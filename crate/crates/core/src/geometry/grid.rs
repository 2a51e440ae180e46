//! Grid rasterization of decision regions and face-adjacency component
//! analysis: the empirical oracle for connectivity.
//!
//! Cells are indexed with axis 0 varying fastest. Each cell is labeled by
//! classifying its center with tie tolerance 0; exact ties become boundary
//! cells. Components use face adjacency (`2 * dim` neighbors), so regions
//! that only touch at a corner count as separate.

use std::collections::{BTreeMap, HashMap, VecDeque};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::linalg::Matrix;
use crate::network::{strict_argmax, Network, Scratch};
use crate::scalar::Scalar;

use super::union_find::UnionFind;
use super::{GeometryError, Result};

/// Label of cells whose center is an exact tie between classes.
pub const BOUNDARY: u32 = u32::MAX;
const NO_COMPONENT: u32 = u32::MAX;

/// Affine 2-plane `origin + s * directions[0] + t * directions[1]` through
/// input space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Slice {
    pub origin: Vec<f64>,
    pub directions: [Vec<f64>; 2],
}

/// Scan window, per-axis resolution, and an optional 2-D slice for inputs of
/// higher dimension. Box coordinates are slice coordinates when a slice is
/// present.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    lower: Vec<f64>,
    upper: Vec<f64>,
    resolution: Vec<usize>,
    slice: Option<Slice>,
}

impl GridSpec {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>, resolution: Vec<usize>) -> Result<Self> {
        let dim = lower.len();
        if dim == 0 || dim > 3 {
            return Err(GeometryError::InvalidInput(format!(
                "scan dimension must be 1, 2 or 3, got {dim}"
            )));
        }
        if upper.len() != dim || resolution.len() != dim {
            return Err(GeometryError::InvalidInput(format!(
                "box has {dim} lower bounds, {} upper bounds and {} resolutions",
                upper.len(),
                resolution.len()
            )));
        }
        for a in 0..dim {
            if !(lower[a].is_finite() && upper[a].is_finite() && lower[a] < upper[a]) {
                return Err(GeometryError::InvalidInput(format!(
                    "axis {a}: box bounds {}:{} must be finite with lower < upper",
                    lower[a], upper[a]
                )));
            }
            if resolution[a] < 2 {
                return Err(GeometryError::InvalidInput(format!(
                    "axis {a}: resolution must be at least 2, got {}",
                    resolution[a]
                )));
            }
        }
        let cells = resolution.iter().try_fold(1usize, |acc, &r| acc.checked_mul(r));
        if cells.is_none_or(|c| c >= u32::MAX as usize) {
            return Err(GeometryError::InvalidInput("grid has too many cells".into()));
        }
        Ok(Self {
            lower,
            upper,
            resolution,
            slice: None,
        })
    }

    /// `[-half_width, half_width]^dim` with `res` cells per axis.
    pub fn cube(dim: usize, half_width: f64, res: usize) -> Result<Self> {
        Self::new(vec![-half_width; dim], vec![half_width; dim], vec![res; dim])
    }

    pub fn with_slice(mut self, slice: Slice) -> Result<Self> {
        if self.dim() != 2 {
            return Err(GeometryError::InvalidInput(
                "a slice needs a 2-dimensional scan box".into(),
            ));
        }
        let d = slice.origin.len();
        if slice.directions.iter().any(|v| v.len() != d) {
            return Err(GeometryError::InvalidInput(
                "slice directions must match the origin's dimension".into(),
            ));
        }
        let all_finite = slice
            .origin
            .iter()
            .chain(slice.directions.iter().flatten())
            .all(|x| x.is_finite());
        let dirs = Matrix::from_rows(&slice.directions)
            .map_err(|e| GeometryError::InvalidInput(e.to_string()))?;
        if !all_finite || crate::linalg::rank(&dirs, 1e-12).unwrap_or(0) < 2 {
            return Err(GeometryError::InvalidInput(
                "slice directions must be finite and linearly independent".into(),
            ));
        }
        self.slice = Some(slice);
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn resolution(&self) -> &[usize] {
        &self.resolution
    }

    pub fn slice(&self) -> Option<&Slice> {
        self.slice.as_ref()
    }

    /// Dimension of the network input this grid feeds.
    pub fn input_dim(&self) -> usize {
        self.slice.as_ref().map_or(self.dim(), |s| s.origin.len())
    }

    pub fn cell_count(&self) -> usize {
        self.resolution.iter().product()
    }

    pub fn cell_size(&self, axis: usize) -> f64 {
        (self.upper[axis] - self.lower[axis]) / self.resolution[axis] as f64
    }

    fn stride(&self, axis: usize) -> usize {
        self.resolution[..axis].iter().product()
    }

    pub fn cell_coords(&self, mut idx: usize) -> Vec<usize> {
        self.resolution
            .iter()
            .map(|&r| {
                let i = idx % r;
                idx /= r;
                i
            })
            .collect()
    }

    pub fn cell_index(&self, coords: &[usize]) -> usize {
        coords
            .iter()
            .zip(&self.resolution)
            .rev()
            .fold(0, |acc, (&i, &r)| acc * r + i)
    }

    /// Cell center in scan (box) coordinates.
    pub fn cell_center(&self, idx: usize) -> Vec<f64> {
        self.cell_coords(idx)
            .into_iter()
            .enumerate()
            .map(|(a, i)| self.lower[a] + (i as f64 + 0.5) * self.cell_size(a))
            .collect()
    }

    /// Maps scan coordinates into input space (identity without a slice).
    pub fn to_input(&self, p: &[f64]) -> Vec<f64> {
        match &self.slice {
            None => p.to_vec(),
            Some(s) => s
                .origin
                .iter()
                .enumerate()
                .map(|(k, &o)| o + p[0] * s.directions[0][k] + p[1] * s.directions[1][k])
                .collect(),
        }
    }

    /// Cell containing a point given in scan coordinates; the upper box face
    /// belongs to the last cell.
    pub fn cell_of(&self, p: &[f64]) -> Option<usize> {
        if p.len() != self.dim() {
            return None;
        }
        let mut coords = Vec::with_capacity(p.len());
        for a in 0..self.dim() {
            if !(p[a] >= self.lower[a] && p[a] <= self.upper[a]) {
                return None;
            }
            let i = ((p[a] - self.lower[a]) / self.cell_size(a)).floor() as usize;
            coords.push(i.min(self.resolution[a] - 1));
        }
        Some(self.cell_index(&coords))
    }

    /// Face neighbors of `idx`, in a fixed order (axis-major, `-` before `+`).
    pub fn neighbors(&self, idx: usize) -> impl Iterator<Item = usize> + '_ {
        let coords = self.cell_coords(idx);
        (0..self.dim()).flat_map(move |a| {
            let stride = self.stride(a);
            let i = coords[a];
            let r = self.resolution[a];
            let down = (i > 0).then(|| idx - stride);
            let up = (i + 1 < r).then(|| idx + stride);
            down.into_iter().chain(up)
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Component {
    /// Class index of every cell in the component.
    pub label: u32,
    pub cells: usize,
    /// Some cell lies on the edge of the scan window, so the component may
    /// merge with others outside it.
    pub touches_boundary: bool,
}

/// Labeled grid with its face-adjacency components.
#[derive(Debug, Clone)]
pub struct RegionMap {
    spec: GridSpec,
    classes: usize,
    labels: Vec<u32>,
    component_of: Vec<u32>,
    components: Vec<Component>,
}

/// Per-class summary line of a [`RegionMap`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassSummary {
    pub class: usize,
    pub components: usize,
    pub cells: usize,
    pub touches_boundary: bool,
}

impl RegionMap {
    /// Builds the map from precomputed labels (class index or [`BOUNDARY`]).
    pub fn from_labels(spec: GridSpec, classes: usize, labels: Vec<u32>) -> Result<Self> {
        if labels.len() != spec.cell_count() {
            return Err(GeometryError::InvalidInput(format!(
                "{} labels for {} cells",
                labels.len(),
                spec.cell_count()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l != BOUNDARY && l as usize >= classes) {
            return Err(GeometryError::InvalidInput(format!(
                "label {bad} out of range for {classes} classes"
            )));
        }
        let (component_of, components) = label_components(&spec, &labels);
        Ok(Self {
            spec,
            classes,
            labels,
            component_of,
            components,
        })
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    /// Class of a cell, `None` for boundary cells.
    pub fn label(&self, idx: usize) -> Option<usize> {
        let l = self.labels[idx];
        (l != BOUNDARY).then_some(l as usize)
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn component(&self, idx: usize) -> Option<usize> {
        let c = self.component_of[idx];
        (c != NO_COMPONENT).then_some(c as usize)
    }

    /// All components, numbered by their lowest cell index.
    pub fn components(&self) -> &[Component] {
        &self.components
    }

    pub fn components_of_class(&self, m: usize) -> impl Iterator<Item = &Component> + '_ {
        self.components.iter().filter(move |c| c.label as usize == m)
    }

    pub fn boundary_cells(&self) -> usize {
        self.labels.iter().filter(|&&l| l == BOUNDARY).count()
    }

    pub fn summary(&self) -> Vec<ClassSummary> {
        (0..self.classes)
            .map(|m| {
                let comps: Vec<_> = self.components_of_class(m).collect();
                ClassSummary {
                    class: m,
                    components: comps.len(),
                    cells: comps.iter().map(|c| c.cells).sum(),
                    touches_boundary: comps.iter().any(|c| c.touches_boundary),
                }
            })
            .collect()
    }

    /// Largest component count over all classes.
    pub fn max_components(&self) -> usize {
        (0..self.classes)
            .map(|m| connected_components(self, m))
            .max()
            .unwrap_or(0)
    }

    /// For every component of class `m`, in component order, the component
    /// index and the center of one of its cells farthest, in face steps, from
    /// any cell not labeled `m` and from the space beyond the window edge, in
    /// input coordinates.
    pub fn interior_points(&self, m: usize) -> Vec<(usize, Vec<f64>)> {
        let n = self.labels.len();
        let m = m as u32;
        let res = self.spec.resolution();
        let mut dist = vec![u32::MAX; n];
        let mut queue = VecDeque::new();
        for (idx, d) in dist.iter_mut().enumerate() {
            if self.labels[idx] != m {
                *d = 0;
                queue.push_back(idx);
            }
        }
        for (idx, d) in dist.iter_mut().enumerate() {
            let on_edge = || self.spec.cell_coords(idx).iter().zip(res).any(|(&i, &r)| i == 0 || i + 1 == r);
            if *d == u32::MAX && on_edge() {
                *d = 1;
                queue.push_back(idx);
            }
        }
        while let Some(cur) = queue.pop_front() {
            for nb in self.spec.neighbors(cur) {
                if dist[nb] == u32::MAX {
                    dist[nb] = dist[cur] + 1;
                    queue.push_back(nb);
                }
            }
        }
        let mut best: BTreeMap<u32, (u32, usize)> = BTreeMap::new();
        for idx in 0..n {
            if self.labels[idx] == m {
                let c = self.component_of[idx];
                let e = best.entry(c).or_insert((dist[idx], idx));
                if dist[idx] > e.0 {
                    *e = (dist[idx], idx);
                }
            }
        }
        best.into_iter()
            .map(|(c, (_, idx))| (c as usize, self.spec.to_input(&self.spec.cell_center(idx))))
            .collect()
    }
}

/// Advances per-axis cell coordinates to the next cell index.
fn step(coords: &mut [usize], res: &[usize]) {
    for (c, &r) in coords.iter_mut().zip(res) {
        *c += 1;
        if *c < r {
            return;
        }
        *c = 0;
    }
}

fn label_components(spec: &GridSpec, labels: &[u32]) -> (Vec<u32>, Vec<Component>) {
    let n = labels.len();
    let res = spec.resolution();
    let strides: Vec<usize> = (0..spec.dim()).map(|a| spec.stride(a)).collect();
    let mut uf = UnionFind::new(n);
    let mut coords = vec![0usize; spec.dim()];
    for idx in 0..n {
        let l = labels[idx];
        if l != BOUNDARY {
            for a in 0..coords.len() {
                if coords[a] + 1 < res[a] && labels[idx + strides[a]] == l {
                    uf.union(idx, idx + strides[a]);
                }
            }
        }
        step(&mut coords, res);
    }
    // Components are numbered in order of their lowest cell index, which
    // makes the numbering independent of how the unions were performed.
    let mut root_id: HashMap<usize, u32> = HashMap::new();
    let mut component_of = vec![NO_COMPONENT; n];
    let mut components: Vec<Component> = Vec::new();
    coords.fill(0);
    for idx in 0..n {
        if labels[idx] != BOUNDARY {
            let root = uf.find(idx);
            let id = *root_id.entry(root).or_insert_with(|| {
                components.push(Component {
                    label: labels[idx],
                    cells: 0,
                    touches_boundary: false,
                });
                (components.len() - 1) as u32
            });
            component_of[idx] = id;
            let c = &mut components[id as usize];
            c.cells += 1;
            if !c.touches_boundary {
                c.touches_boundary = coords.iter().zip(res).any(|(&i, &r)| i == 0 || i + 1 == r);
            }
        }
        step(&mut coords, res);
    }
    (component_of, components)
}

fn check_input_dim<T: Scalar>(net: &Network<T>, spec: &GridSpec) -> Result<()> {
    if net.input_dim() != spec.input_dim() {
        return Err(GeometryError::InvalidInput(format!(
            "network expects {}-dimensional inputs but the scan produces {}-dimensional points",
            net.input_dim(),
            spec.input_dim()
        )));
    }
    Ok(())
}

/// Evaluates `f` on the network output at every cell center, in parallel,
/// preserving cell order.
fn map_cells<T: Scalar, R: Send>(
    net: &Network<T>,
    spec: &GridSpec,
    f: impl Fn(&[T]) -> R + Sync + Send,
) -> Vec<R> {
    let dim = spec.dim();
    let res = spec.resolution();
    let centers: Vec<Vec<f64>> = (0..dim)
        .map(|a| {
            let h = spec.cell_size(a);
            (0..res[a])
                .map(|i| spec.lower[a] + (i as f64 + 0.5) * h)
                .collect()
        })
        .collect();
    let (origin, dirs) = match &spec.slice {
        Some(s) => (s.origin.clone(), Some(s.directions.clone())),
        None => (Vec::new(), None),
    };
    (0..spec.cell_count())
        .into_par_iter()
        .with_min_len(4096)
        .map_init(
            || (Scratch::default(), vec![T::zero(); net.input_dim()]),
            |(scratch, x), idx| {
                let mut rem = idx;
                let mut p = [0.0f64; 3];
                for a in 0..dim {
                    p[a] = centers[a][rem % res[a]];
                    rem /= res[a];
                }
                match &dirs {
                    None => {
                        for (xi, &pi) in x.iter_mut().zip(&p) {
                            *xi = T::lit(pi);
                        }
                    }
                    Some([d0, d1]) => {
                        for k in 0..x.len() {
                            x[k] = T::lit(origin[k] + p[0] * d0[k] + p[1] * d1[k]);
                        }
                    }
                }
                f(net.forward_scratch(x, scratch))
            },
        )
        .collect()
}

/// Classifies every cell center and computes the face-adjacency components.
pub fn grid_scan<T: Scalar>(net: &Network<T>, spec: &GridSpec) -> Result<RegionMap> {
    check_input_dim(net, spec)?;
    let labels = map_cells(net, spec, |o| {
        strict_argmax(o, T::zero()).map_or(BOUNDARY, |m| m as u32)
    });
    RegionMap::from_labels(spec.clone(), net.classes(), labels)
}

/// Number of components labeled `m`.
pub fn connected_components(map: &RegionMap, m: usize) -> usize {
    map.components_of_class(m).count()
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathResult {
    pub class: usize,
    pub cells: Vec<usize>,
    /// Cell centers in input coordinates; consecutive cells share a face.
    pub waypoints: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum PathOutcome {
    Found(PathResult),
    /// The endpoints' cells carry different labels (or one is a boundary cell).
    DifferentClasses,
    /// Same class, different components.
    Disconnected,
}

/// Shortest face-adjacent cell path between the cells containing `a` and `b`
/// (scan coordinates) through cells of their common class.
pub fn find_path(map: &RegionMap, a: &[f64], b: &[f64]) -> Result<PathOutcome> {
    let spec = map.spec();
    let locate = |p: &[f64], name: &str| {
        spec.cell_of(p).ok_or_else(|| {
            GeometryError::InvalidInput(format!("{name} point {p:?} lies outside the scan box"))
        })
    };
    let start = locate(a, "start")?;
    let goal = locate(b, "end")?;
    let class = match (map.label(start), map.label(goal)) {
        (Some(x), Some(y)) if x == y => x,
        _ => return Ok(PathOutcome::DifferentClasses),
    };
    let comp = map.component(start);
    if comp != map.component(goal) {
        return Ok(PathOutcome::Disconnected);
    }
    let mut prev = vec![u32::MAX; spec.cell_count()];
    prev[start] = start as u32;
    let mut queue = VecDeque::from([start]);
    while let Some(cur) = queue.pop_front() {
        if cur == goal {
            break;
        }
        for nb in spec.neighbors(cur) {
            if prev[nb] == u32::MAX && map.component(nb) == comp {
                prev[nb] = cur as u32;
                queue.push_back(nb);
            }
        }
    }
    let mut cells = vec![goal];
    let mut cur = goal;
    while cur != start {
        cur = prev[cur] as usize;
        cells.push(cur);
    }
    cells.reverse();
    let waypoints = cells
        .iter()
        .map(|&c| spec.to_input(&spec.cell_center(c)))
        .collect();
    Ok(PathOutcome::Found(PathResult {
        class,
        cells,
        waypoints,
    }))
}

/// Result of bucketing the image of the scan grid in output space.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputScan {
    pub class: usize,
    /// Components of occupied buckets inside the class's dominance cone.
    pub components: usize,
    pub occupied_buckets: usize,
    /// Output coordinates the buckets span.
    pub axes: Vec<usize>,
}

/// Heuristic estimate of the connectivity of `f_L(box) ∩ D_m`.
///
/// Every cell center is pushed through the network; images in `D_m` mark
/// their bucket in a grid over the bounding box of all images (up to three
/// output coordinates, `m` first when `M > 3`). The images of face-adjacent
/// class-`m` cells are joined by an axis-by-axis bucket walk, so a connected
/// input region maps to a connected bucket set unless the image folds onto
/// itself. Bucket resolution equals the largest input resolution.
pub fn output_space_scan<T: Scalar>(net: &Network<T>, spec: &GridSpec, m: usize) -> Result<OutputScan> {
    check_input_dim(net, spec)?;
    let classes = net.classes();
    if m >= classes {
        return Err(GeometryError::InvalidInput(format!(
            "class {m} out of range for {classes} classes"
        )));
    }
    let axes: Vec<usize> = if classes <= 3 {
        (0..classes).collect()
    } else {
        std::iter::once(m)
            .chain((0..classes).filter(|&j| j != m).take(2))
            .collect()
    };
    let k = axes.len();
    let samples: Vec<(bool, [f64; 3])> = map_cells(net, spec, |o| {
        let mut p = [0.0; 3];
        for (slot, &a) in p.iter_mut().zip(&axes) {
            *slot = o[a].to_f64_lossy();
        }
        (strict_argmax(o, T::zero()) == Some(m), p)
    });

    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for (_, p) in &samples {
        for a in 0..k {
            lo[a] = lo[a].min(p[a]);
            hi[a] = hi[a].max(p[a]);
        }
    }
    let r = *spec.resolution().iter().max().expect("non-empty resolution");
    let out_spec = GridSpec {
        lower: lo[..k].to_vec(),
        upper: hi[..k].to_vec(),
        resolution: vec![r; k],
        slice: None,
    };
    let bucket = |p: &[f64; 3]| -> Vec<usize> {
        (0..k)
            .map(|a| {
                let span = hi[a] - lo[a];
                if span > 0.0 {
                    (((p[a] - lo[a]) / span * r as f64).floor() as usize).min(r - 1)
                } else {
                    0
                }
            })
            .collect()
    };
    let mut marks = vec![BOUNDARY; out_spec.cell_count()];
    for (hit, p) in &samples {
        if *hit {
            marks[out_spec.cell_index(&bucket(p))] = 0;
        }
    }
    for idx in 0..samples.len() {
        if !samples[idx].0 {
            continue;
        }
        let from = bucket(&samples[idx].1);
        for nb in spec.neighbors(idx).filter(|&nb| nb > idx) {
            if !samples[nb].0 {
                continue;
            }
            let to = bucket(&samples[nb].1);
            let mut cur = from.clone();
            for a in 0..k {
                while cur[a] != to[a] {
                    if cur[a] < to[a] {
                        cur[a] += 1;
                    } else {
                        cur[a] -= 1;
                    }
                    marks[out_spec.cell_index(&cur)] = 0;
                }
            }
        }
    }
    let occupied = marks.iter().filter(|&&l| l == 0).count();
    let (_, comps) = label_components(&out_spec, &marks);
    Ok(OutputScan {
        class: m,
        components: comps.len(),
        occupied_buckets: occupied,
        axes,
    })
}
