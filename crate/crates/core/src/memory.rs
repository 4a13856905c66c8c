//! Selection of the update direction `c` for the rank-one Jacobian update.
//!
//! Broyden's method uses the step itself. The multipoint secant methods keep a
//! set of past steps and project them out of the new step, so the updated
//! matrix keeps reproducing the stored secant pairs. The interpolation method
//! keeps past iterates instead, and projects the new iterate onto the affine
//! manifold through the retained ones.
//!
//! Every direction returned from this module satisfies `cᵀs = ‖c‖²`.

use thiserror::Error;

use crate::linalg::{
    gram_determinant, qr_nonneg_diag, remove_span, DenseMatrix, DenseVector, LinalgError,
    ZERO_NORM,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MemoryError {
    #[error("step is zero")]
    ZeroStep,
    #[error("points {0} and {1} coincide")]
    DuplicatePoints(usize, usize),
    #[error("at least two points are needed, got {0}")]
    InsufficientPoints(usize),
    #[error("expected the newest stored index to be {expected}, found {found:?}")]
    IndexOrder {
        expected: usize,
        found: Option<usize>,
    },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Direction for Broyden's update: the step itself.
pub fn broyden_direction(s: &DenseVector) -> Result<DenseVector, MemoryError> {
    if s.norm() <= ZERO_NORM {
        return Err(MemoryError::ZeroStep);
    }
    Ok(s.clone())
}

/// `s - P s` where `P` is the orthogonal projector onto `span(basis)`.
fn orthogonal_remainder(basis: &[DenseVector], s: &DenseVector) -> Result<DenseVector, MemoryError> {
    Ok(remove_span(basis, s)?)
}

/// How a secant memory restores linear independence when a new step does not
/// fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SecantVariant {
    /// Drop everything but the new step (Gay and Schnabel).
    Restart,
    /// Drop the stored steps that contribute least to independence.
    Pruning,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SecantPair {
    pub index: usize,
    pub s: DenseVector,
    pub y: DenseVector,
}

/// The retained set of secant pairs `(s_i, y_i)`.
#[derive(Debug, Clone)]
pub struct SecantMemory {
    dim: usize,
    sigma: f64,
    depth: usize,
    variant: SecantVariant,
    pairs: Vec<SecantPair>,
    restarts: usize,
}

impl SecantMemory {
    pub fn new(dim: usize, sigma: f64, depth: usize, variant: SecantVariant) -> Self {
        SecantMemory {
            dim,
            sigma,
            depth,
            variant,
            pairs: Vec::new(),
            restarts: 0,
        }
    }

    pub fn variant(&self) -> SecantVariant {
        self.variant
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn pairs(&self) -> &[SecantPair] {
        &self.pairs
    }

    pub fn indices(&self) -> Vec<usize> {
        self.pairs.iter().map(|p| p.index).collect()
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Number of times the restart variant discarded its history.
    pub fn restarts(&self) -> usize {
        self.restarts
    }

    pub fn clear(&mut self) {
        self.pairs.clear();
    }

    /// Seeds the memory directly. Indices must be strictly increasing.
    pub fn with_pairs(mut self, pairs: Vec<SecantPair>) -> Self {
        assert!(pairs.windows(2).all(|w| w[0].index < w[1].index));
        self.pairs = pairs;
        self
    }

    /// Drops pairs older than the depth limit and the one that would make the
    /// set exceed the dimension.
    fn evict(&mut self, k: usize) {
        let (n, m) = (self.dim, self.depth);
        self.pairs.retain(|p| p.index < k && p.index + n > k && p.index + m >= k);
    }

    /// Computes the direction for step `k` and admits `(k, s, y)`.
    pub fn update_direction(
        &mut self,
        k: usize,
        s: &DenseVector,
        y: &DenseVector,
    ) -> Result<DenseVector, MemoryError> {
        if s.norm() <= ZERO_NORM {
            return Err(MemoryError::ZeroStep);
        }
        self.evict(k);
        let c = match self.variant {
            SecantVariant::Restart => self.restart_direction(s)?,
            SecantVariant::Pruning => self.pruning_direction(s)?,
        };
        self.pairs.push(SecantPair {
            index: k,
            s: s.clone(),
            y: y.clone(),
        });
        Ok(c)
    }

    fn restart_direction(&mut self, s: &DenseVector) -> Result<DenseVector, MemoryError> {
        let basis: Vec<DenseVector> = self.pairs.iter().map(|p| p.s.clone()).collect();
        let c = orthogonal_remainder(&basis, s)?;
        if c.norm() > self.sigma * s.norm() {
            Ok(c)
        } else {
            if !self.pairs.is_empty() {
                self.restarts += 1;
            }
            self.pairs.clear();
            Ok(s.clone())
        }
    }

    fn pruning_direction(&mut self, s: &DenseVector) -> Result<DenseVector, MemoryError> {
        if !self.pairs.is_empty() {
            let diag = self.normalized_r_diagonal(s)?;
            // diag[j] belongs to self.pairs[j]; the new step has R = 1.
            let mut keep = vec![true; self.pairs.len()];
            let threshold = self.sigma * self.sigma;
            let product = |keep: &[bool]| -> f64 {
                diag.iter()
                    .zip(keep)
                    .filter(|(_, &k)| k)
                    .map(|(r, _)| r * r)
                    .product()
            };
            let mut d = product(&keep);
            while d < threshold {
                // Smallest R wins; among equal values the oldest index goes
                // first, so `<` on an ascending scan keeps the earliest.
                let mut drop: Option<usize> = None;
                for (j, r) in diag.iter().enumerate() {
                    if keep[j] && drop.is_none_or(|best| *r < diag[best]) {
                        drop = Some(j);
                    }
                }
                let Some(j) = drop else { break };
                keep[j] = false;
                d = product(&keep);
            }
            let mut flags = keep.into_iter();
            self.pairs.retain(|_| flags.next().unwrap_or(false));
        }
        let basis: Vec<DenseVector> = self.pairs.iter().map(|p| p.s.clone()).collect();
        orthogonal_remainder(&basis, s)
    }

    /// Diagonal of `R` for the unit-normalized columns `[s, s_newest, ...,
    /// s_oldest]`, returned in stored (ascending index) order without the
    /// entry for `s`.
    fn normalized_r_diagonal(&self, s: &DenseVector) -> Result<Vec<f64>, MemoryError> {
        let mut columns = Vec::with_capacity(self.pairs.len() + 1);
        columns.push(s.normalized().ok_or(MemoryError::ZeroStep)?);
        for p in self.pairs.iter().rev() {
            columns.push(p.s.normalized().ok_or(MemoryError::ZeroStep)?);
        }
        let qr = qr_nonneg_diag(&DenseMatrix::from_columns(&columns)?)?;
        let mut diag = qr.r_diagonal();
        diag.remove(0);
        diag.reverse();
        Ok(diag)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InterpolationPoint {
    pub index: usize,
    pub x: DenseVector,
    pub f: DenseVector,
}

/// The retained set of interpolation points `(x_i, F_i)`.
#[derive(Debug, Clone)]
pub struct InterpolationMemory {
    dim: usize,
    sigma: f64,
    depth: usize,
    points: Vec<InterpolationPoint>,
}

impl InterpolationMemory {
    /// Starts a memory holding only the point `(index, x, f)`.
    pub fn new(dim: usize, sigma: f64, depth: usize, index: usize, x: DenseVector, f: DenseVector) -> Self {
        InterpolationMemory {
            dim,
            sigma,
            depth,
            points: vec![InterpolationPoint { index, x, f }],
        }
    }

    /// Seeds the memory directly. Indices must be strictly increasing.
    pub fn from_points(dim: usize, sigma: f64, depth: usize, points: Vec<InterpolationPoint>) -> Self {
        assert!(!points.is_empty());
        assert!(points.windows(2).all(|w| w[0].index < w[1].index));
        InterpolationMemory {
            dim,
            sigma,
            depth,
            points,
        }
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn points(&self) -> &[InterpolationPoint] {
        &self.points
    }

    pub fn indices(&self) -> Vec<usize> {
        self.points.iter().map(|p| p.index).collect()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Forgets all points except the newest.
    pub fn reset(&mut self) {
        let keep = self.points.len().saturating_sub(1);
        self.points.drain(..keep);
    }

    /// Computes the direction for the step to iterate `next` (from iterate
    /// `next - 1`, which must be the newest stored point) and admits the new
    /// point.
    pub fn update_direction(
        &mut self,
        next: usize,
        x_new: &DenseVector,
        f_new: &DenseVector,
    ) -> Result<DenseVector, MemoryError> {
        let newest = self.points.last().map(|p| p.index);
        if next == 0 || newest != Some(next - 1) {
            return Err(MemoryError::IndexOrder {
                expected: next.wrapping_sub(1),
                found: newest,
            });
        }
        let k = next - 1;
        let anchor = self.points.last().expect("checked above").x.clone();
        let s = x_new.sub(&anchor);
        if s.norm() <= ZERO_NORM {
            return Err(MemoryError::ZeroStep);
        }

        // Remove index k - n and everything beyond the depth limit; the
        // previous iterate always stays.
        let (n, m) = (self.dim, self.depth.max(1));
        self.points.retain(|p| p.index == k || (p.index + n > k && p.index + m >= next));

        // Greedily drop the oldest point until the set, including the new
        // one, is in stable general position.
        loop {
            if self.points.len() <= 1 {
                break;
            }
            let mut xs: Vec<DenseVector> = self.points.iter().map(|p| p.x.clone()).collect();
            xs.push(x_new.clone());
            match stable_general_position(&xs, self.sigma) {
                Ok(gp) if gp.ok => break,
                _ => {
                    self.points.remove(0);
                }
            }
        }

        let basis: Vec<DenseVector> = self
            .points
            .iter()
            .filter(|p| p.index != k)
            .map(|p| p.x.sub(&anchor))
            .collect();
        let c = orthogonal_remainder(&basis, &s)?;
        self.points.push(InterpolationPoint {
            index: next,
            x: x_new.clone(),
            f: f_new.clone(),
        });
        Ok(c)
    }
}

/// Outcome of [`stable_general_position`].
#[derive(Debug, Clone)]
pub struct GeneralPosition {
    pub ok: bool,
    /// Normalized Gram determinant of `deltas`.
    pub determinant: f64,
    /// Edge vectors `x_child - x_parent` of the minimum spanning tree.
    pub deltas: Vec<DenseVector>,
}

/// Edges `(parent, child)` of a Euclidean minimum spanning tree over
/// `points`, grown from node 0. Ties break towards the smaller index pair.
pub fn minimum_spanning_tree(points: &[DenseVector]) -> Vec<(usize, usize)> {
    let p = points.len();
    if p < 2 {
        return Vec::new();
    }
    let dist = |a: usize, b: usize| points[a].sub(&points[b]).norm();
    let pair = |a: usize, b: usize| (a.min(b), a.max(b));

    let mut in_tree = vec![false; p];
    // best[v] = (distance to tree, parent in tree)
    let mut best: Vec<(f64, usize)> = vec![(f64::INFINITY, usize::MAX); p];
    in_tree[0] = true;
    for v in 1..p {
        best[v] = (dist(0, v), 0);
    }
    let mut edges = Vec::with_capacity(p - 1);
    for _ in 1..p {
        let mut chosen: Option<usize> = None;
        for v in 0..p {
            if in_tree[v] {
                continue;
            }
            chosen = match chosen {
                None => Some(v),
                Some(u) => {
                    let (du, pu) = best[u];
                    let (dv, pv) = best[v];
                    if dv < du || (dv == du && pair(pv, v) < pair(pu, u)) {
                        Some(v)
                    } else {
                        Some(u)
                    }
                }
            };
        }
        let v = chosen.expect("a node outside the tree remains");
        in_tree[v] = true;
        edges.push((best[v].1, v));
        for w in 0..p {
            if in_tree[w] {
                continue;
            }
            let d = dist(v, w);
            let (dw, pw) = best[w];
            if d < dw || (d == dw && pair(v, w) < pair(pw, w)) {
                best[w] = (d, v);
            }
        }
    }
    edges
}

/// Checks whether `points` are in σ-stable general position, using the edges
/// of a Euclidean minimum spanning tree as the difference vectors.
pub fn stable_general_position(points: &[DenseVector], sigma: f64) -> Result<GeneralPosition, MemoryError> {
    if points.len() < 2 {
        return Err(MemoryError::InsufficientPoints(points.len()));
    }
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            if points[i].sub(&points[j]).norm() <= ZERO_NORM {
                return Err(MemoryError::DuplicatePoints(i, j));
            }
        }
    }
    let deltas: Vec<DenseVector> = minimum_spanning_tree(points)
        .into_iter()
        .map(|(parent, child)| points[child].sub(&points[parent]))
        .collect();
    let determinant = gram_determinant(&deltas)?;
    Ok(GeneralPosition {
        ok: determinant >= sigma * sigma,
        determinant,
        deltas,
    })
}
