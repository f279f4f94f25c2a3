//! Contraction interpretations and the graph-directed IFS engine.
//!
//! Action labels are interpreted as affine contractions on R^d (d <= 3,
//! which covers everything we draw and keeps singular values in closed
//! form). A finite productive LTS paired with such an interpretation
//! determines a unique vector of nonempty compact sets, one per state,
//! fixed by the system operator `K_x = union over x -a-> y of
//! sigma_a(K_y)`. The solver iterates that operator from a seed point;
//! the Banach a-priori bound turns the iteration count into a certified
//! Hausdorff-distance guarantee.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rayon::prelude::*;
use thiserror::Error;

use crate::semantics::Lts;
use crate::syntax::ActionLabel;
use crate::trace::Word;

/// Maximum supported dimension.
pub const MAX_DIM: usize = 3;

/// A point in R^d, stored with three coordinates; components beyond the
/// active dimension are zero.
pub type Point = [f64; 3];

pub fn origin() -> Point {
    [0.0; 3]
}

pub fn distance(p: Point, q: Point) -> f64 {
    let dx = p[0] - q[0];
    let dy = p[1] - q[1];
    let dz = p[2] - q[2];
    (dx * dx + dy * dy + dz * dz).sqrt()
}

fn distance_sq(p: Point, q: Point) -> f64 {
    let dx = p[0] - q[0];
    let dy = p[1] - q[1];
    let dz = p[2] - q[2];
    dx * dx + dy * dy + dz * dz
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FractalError {
    #[error("linear part is not a contraction (largest singular value {0})")]
    NotAContraction(f64),
    #[error("action `{0}` has no interpretation")]
    UnknownAction(ActionLabel),
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
}

/// An affine map `p -> linear * p + offset` together with a certified
/// contraction coefficient (an upper bound on the operator 2-norm of the
/// linear part, strictly below 1).
#[derive(Debug, Clone)]
pub struct AffineContraction {
    dim: usize,
    linear: [[f64; 3]; 3],
    offset: Point,
    coeff: f64,
}

impl AffineContraction {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn coeff(&self) -> f64 {
        self.coeff
    }

    pub fn offset(&self) -> Point {
        self.offset
    }

    pub fn apply(&self, p: Point) -> Point {
        let mut out = [0.0; 3];
        for (i, row) in self.linear.iter().enumerate().take(self.dim) {
            let mut acc = self.offset[i];
            for (j, m) in row.iter().enumerate().take(self.dim) {
                acc += m * p[j];
            }
            out[i] = acc;
        }
        out
    }

    /// The unique fixed point `(I - A)^-1 b`, computed by iteration (the
    /// map contracts, so this converges geometrically).
    pub fn fixed_point(&self) -> Point {
        let mut p = origin();
        for _ in 0..2048 {
            let next = self.apply(p);
            if distance(next, p) < 1e-15 {
                return next;
            }
            p = next;
        }
        p
    }
}

/// Builds a certified contraction from a row-major `dim x dim` linear
/// part and a `dim`-vector offset. The largest singular value is
/// computed in closed form from the eigenvalues of `A^T A` (accurate to
/// well below 1e-12 for these dimensions) and padded by 1e-12 before the
/// `< 1` check, so `coeff` really bounds the operator norm. Maps with
/// a singular value at or above `1 - 1e-9` are rejected.
pub fn certify_contraction(
    dim: usize,
    linear: &[f64],
    offset: &[f64],
) -> Result<AffineContraction, FractalError> {
    assert!((1..=MAX_DIM).contains(&dim), "dimension must be 1..=3");
    assert_eq!(linear.len(), dim * dim, "linear part must be dim*dim");
    assert_eq!(offset.len(), dim, "offset must have length dim");
    let mut a = [[0.0; 3]; 3];
    for i in 0..dim {
        for j in 0..dim {
            a[i][j] = linear[i * dim + j];
        }
    }
    let sigma = largest_singular_value(&a, dim);
    if !(sigma < 1.0 - 1e-9) {
        return Err(FractalError::NotAContraction(sigma));
    }
    let mut off = [0.0; 3];
    off[..dim].copy_from_slice(offset);
    Ok(AffineContraction {
        dim,
        linear: a,
        offset: off,
        coeff: (sigma + 1e-12).min(1.0 - 1e-10),
    })
}

fn largest_singular_value(a: &[[f64; 3]; 3], dim: usize) -> f64 {
    // B = A^T A is symmetric positive semidefinite.
    let mut b = [[0.0; 3]; 3];
    for i in 0..dim {
        for j in 0..dim {
            let mut acc = 0.0;
            for k in 0..dim {
                acc += a[k][i] * a[k][j];
            }
            b[i][j] = acc;
        }
    }
    let lambda = match dim {
        1 => b[0][0],
        2 => {
            let (p, q, r) = (b[0][0], b[0][1], b[1][1]);
            0.5 * ((p + r) + ((p - r) * (p - r) + 4.0 * q * q).sqrt())
        }
        3 => sym3_max_eigenvalue(&b),
        _ => unreachable!(),
    };
    lambda.max(0.0).sqrt()
}

/// Largest eigenvalue of a symmetric 3x3 matrix via the trigonometric
/// closed form for the characteristic cubic.
fn sym3_max_eigenvalue(b: &[[f64; 3]; 3]) -> f64 {
    let p1 = b[0][1] * b[0][1] + b[0][2] * b[0][2] + b[1][2] * b[1][2];
    if p1 == 0.0 {
        return b[0][0].max(b[1][1]).max(b[2][2]);
    }
    let q = (b[0][0] + b[1][1] + b[2][2]) / 3.0;
    let p2 = (b[0][0] - q).powi(2) + (b[1][1] - q).powi(2) + (b[2][2] - q).powi(2) + 2.0 * p1;
    let p = (p2 / 6.0).sqrt();
    if p == 0.0 {
        return q;
    }
    let mut c = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let delta = if i == j { q } else { 0.0 };
            c[i][j] = (b[i][j] - delta) / p;
        }
    }
    let det = c[0][0] * (c[1][1] * c[2][2] - c[1][2] * c[2][1])
        - c[0][1] * (c[1][0] * c[2][2] - c[1][2] * c[2][0])
        + c[0][2] * (c[1][0] * c[2][1] - c[1][1] * c[2][0]);
    let r = (det / 2.0).clamp(-1.0, 1.0);
    let phi = r.acos() / 3.0;
    q + 2.0 * p * phi.cos()
}

/// Assigns an affine contraction to every action label of a program.
#[derive(Debug, Clone)]
pub struct Interpretation {
    dim: usize,
    maps: BTreeMap<ActionLabel, AffineContraction>,
}

impl Interpretation {
    pub fn new(
        dim: usize,
        maps: impl IntoIterator<Item = (ActionLabel, AffineContraction)>,
    ) -> Result<Self, FractalError> {
        let maps: BTreeMap<_, _> = maps.into_iter().collect();
        for c in maps.values() {
            if c.dim != dim {
                return Err(FractalError::DimensionMismatch(dim, c.dim));
            }
        }
        Ok(Interpretation { dim, maps })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, a: &ActionLabel) -> Result<&AffineContraction, FractalError> {
        self.maps
            .get(a)
            .ok_or_else(|| FractalError::UnknownAction(a.clone()))
    }

    pub fn actions(&self) -> impl Iterator<Item = &ActionLabel> {
        self.maps.keys()
    }

    /// Maximum certified coefficient over the alphabet; the system
    /// operator contracts at least this fast.
    pub fn max_coeff(&self) -> f64 {
        self.maps.values().map(|c| c.coeff).fold(0.0, f64::max)
    }

    fn check_covers(&self, lts: &Lts) -> Result<(), FractalError> {
        for a in lts.alphabet() {
            self.get(a)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum InterpParseError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: map `{action}` is not a contraction (sigma = {sigma})")]
    NotAContraction {
        line: usize,
        action: String,
        sigma: String,
    },
}

/// Parses the line-based interpretation format:
///
/// ```text
/// dim 2
/// map a : 0.5 0 0 0.5 | 0.25 0.4330127018922193
/// ```
///
/// The linear part is row-major, followed by `|` and the offset.
/// Comments run from `#` to end of line.
pub fn parse_interpretation(text: &str) -> Result<Interpretation, InterpParseError> {
    let mut dim: Option<usize> = None;
    let mut maps = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let err = |message: String| InterpParseError::Parse {
            line: line_no,
            message,
        };
        if let Some(rest) = line.strip_prefix("dim") {
            let d: usize = rest
                .trim()
                .parse()
                .map_err(|_| err(format!("bad dimension `{}`", rest.trim())))?;
            if !(1..=MAX_DIM).contains(&d) {
                return Err(err(format!("dimension {d} not in 1..=3")));
            }
            dim = Some(d);
        } else if let Some(rest) = line.strip_prefix("map") {
            let d = dim.ok_or_else(|| err("`map` before `dim`".into()))?;
            let (name, spec) = rest
                .split_once(':')
                .ok_or_else(|| err("expected `map <action> : ...`".into()))?;
            let name = name.trim();
            if !crate::syntax::is_valid_ident(name) {
                return Err(err(format!("invalid action name `{name}`")));
            }
            let (lin_text, off_text) = spec
                .split_once('|')
                .ok_or_else(|| err("expected `<linear> | <offset>`".into()))?;
            let parse_floats = |s: &str| -> Result<Vec<f64>, InterpParseError> {
                s.split_whitespace()
                    .map(|tok| {
                        tok.parse::<f64>()
                            .map_err(|_| err(format!("bad number `{tok}`")))
                    })
                    .collect()
            };
            let linear = parse_floats(lin_text)?;
            let offset = parse_floats(off_text)?;
            if linear.len() != d * d {
                return Err(err(format!(
                    "expected {} linear entries, found {}",
                    d * d,
                    linear.len()
                )));
            }
            if offset.len() != d {
                return Err(err(format!(
                    "expected {d} offset entries, found {}",
                    offset.len()
                )));
            }
            let contraction = certify_contraction(d, &linear, &offset).map_err(|e| match e {
                FractalError::NotAContraction(sigma) => InterpParseError::NotAContraction {
                    line: line_no,
                    action: name.to_string(),
                    sigma: format!("{sigma}"),
                },
                other => err(other.to_string()),
            })?;
            maps.push((ActionLabel::new(name), contraction));
        } else {
            return Err(err(format!("unrecognized directive `{line}`")));
        }
    }
    let dim = dim.ok_or(InterpParseError::Parse {
        line: 1,
        message: "missing `dim` line".into(),
    })?;
    Interpretation::new(dim, maps).map_err(|e| InterpParseError::Parse {
        line: 1,
        message: e.to_string(),
    })
}

/// Applies the interpreted prefix `a1 ... an` to `base` in reverse order
/// (`sigma_an` first), the truncation of stream evaluation. For a prefix
/// of length n this lands within `c^n * d(base, S)` of the limit point of
/// any stream extending the prefix.
pub fn eval_stream(
    interp: &Interpretation,
    prefix: &[ActionLabel],
    base: Point,
) -> Result<Point, FractalError> {
    let mut p = base;
    for a in prefix.iter().rev() {
        p = interp.get(a)?.apply(p);
    }
    Ok(p)
}

/// A finite point-cloud approximation of a nonempty compact set, with an
/// upper bound on the Hausdorff distance to the set it approximates.
#[derive(Debug, Clone)]
pub struct CompactApprox {
    dim: usize,
    points: Vec<Point>,
    guarantee: f64,
}

impl CompactApprox {
    /// Sorts lexicographically and removes exact duplicates. Panics on an
    /// empty cloud (compact sets here are nonempty by construction).
    pub fn new(dim: usize, mut points: Vec<Point>, guarantee: f64) -> Self {
        assert!(!points.is_empty(), "compact approximations are nonempty");
        sort_dedup(&mut points);
        CompactApprox {
            dim,
            points,
            guarantee,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Upper bound on the Hausdorff distance to the approximated set.
    pub fn guarantee(&self) -> f64 {
        self.guarantee
    }
}

fn sort_dedup(points: &mut Vec<Point>) {
    points.sort_unstable_by(|p, q| {
        p[0].total_cmp(&q[0])
            .then(p[1].total_cmp(&q[1]))
            .then(p[2].total_cmp(&q[2]))
    });
    points.dedup();
}

fn snap_point(p: Point, pitch: f64) -> Point {
    [
        (p[0] / pitch).round() * pitch,
        (p[1] / pitch).round() * pitch,
        (p[2] / pitch).round() * pitch,
    ]
}

/// One compact approximation per LTS state.
#[derive(Debug, Clone)]
pub struct SolutionVector {
    components: Vec<CompactApprox>,
}

impl SolutionVector {
    pub fn new(components: Vec<CompactApprox>) -> Self {
        SolutionVector { components }
    }

    pub fn component(&self, state: usize) -> &CompactApprox {
        &self.components[state]
    }

    pub fn components(&self) -> &[CompactApprox] {
        &self.components
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }
}

/// Product Hausdorff distance: the maximum over components.
pub fn product_hausdorff(a: &SolutionVector, b: &SolutionVector) -> Result<f64, FractalError> {
    if a.len() != b.len() {
        return Err(FractalError::DimensionMismatch(a.len(), b.len()));
    }
    let mut worst = 0.0f64;
    for (ka, kb) in a.components.iter().zip(&b.components) {
        worst = worst.max(hausdorff(ka, kb)?);
    }
    Ok(worst)
}

/// One application of the system operator: component `x` becomes the
/// union over edges `x -a-> y` of `sigma_a` applied to component `y`.
/// Guarantees scale by the maximum contraction coefficient.
pub fn apply_system(
    lts: &Lts,
    interp: &Interpretation,
    sv: &SolutionVector,
) -> Result<SolutionVector, FractalError> {
    interp.check_covers(lts)?;
    assert_eq!(sv.len(), lts.num_states(), "solution vector shape mismatch");
    let clouds: Vec<Vec<Point>> = sv.components.iter().map(|k| k.points.clone()).collect();
    let next = apply_clouds(lts, interp, &clouds, None);
    let in_guarantee = sv
        .components
        .iter()
        .map(|k| k.guarantee)
        .fold(0.0, f64::max);
    let g = interp.max_coeff() * in_guarantee;
    Ok(SolutionVector::new(
        next.into_iter()
            .map(|pts| CompactApprox::new(interp.dim, pts, g))
            .collect(),
    ))
}

fn apply_clouds(
    lts: &Lts,
    interp: &Interpretation,
    clouds: &[Vec<Point>],
    snap: Option<f64>,
) -> Vec<Vec<Point>> {
    (0..lts.num_states())
        .into_par_iter()
        .map(|x| {
            let mut out = Vec::new();
            for (a, y) in lts.successors(x) {
                let sigma = interp.get(a).expect("coverage checked by caller");
                out.extend(clouds[*y].iter().map(|&p| sigma.apply(p)));
            }
            if let Some(pitch) = snap {
                for p in &mut out {
                    *p = snap_point(*p, pitch);
                }
            }
            sort_dedup(&mut out);
            out
        })
        .collect()
}

/// Iterates the system operator `depth` times from the constant seed
/// vector `{p0}`. The returned guarantee is the Banach a-priori bound
/// `c^depth * D / (1 - c)` with `D` the product distance between the
/// seed vector and its first iterate (plus accumulated snap slack when a
/// snap grid is active).
pub fn solve(
    lts: &Lts,
    interp: &Interpretation,
    depth: usize,
    seed_point: Point,
) -> Result<SolutionVector, FractalError> {
    solve_with_snap(lts, interp, depth, seed_point, None)
}

pub fn solve_with_snap(
    lts: &Lts,
    interp: &Interpretation,
    depth: usize,
    seed_point: Point,
    snap: Option<f64>,
) -> Result<SolutionVector, FractalError> {
    interp.check_covers(lts)?;
    let n = lts.num_states();
    let c = interp.max_coeff();
    let k0: Vec<Vec<Point>> = vec![vec![seed_point]; n];
    let k1 = apply_clouds(lts, interp, &k0, snap);
    let d0 = cloud_product_distance(&k0, &k1);
    let mut current = k0;
    for _ in 0..depth {
        current = apply_clouds(lts, interp, &current, snap);
    }
    let snap_slack = snap.map_or(0.0, |pitch| {
        pitch * (interp.dim as f64).sqrt() / 2.0 / (1.0 - c)
    });
    let guarantee = c.powi(depth as i32) * d0 / (1.0 - c) + snap_slack;
    Ok(SolutionVector::new(
        current
            .into_iter()
            .map(|pts| CompactApprox::new(interp.dim, pts, guarantee))
            .collect(),
    ))
}

fn cloud_product_distance(a: &[Vec<Point>], b: &[Vec<Point>]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(ka, kb)| hausdorff_points(ka, kb))
        .fold(0.0, f64::max)
}

/// Product distance between the constant seed vector `{p}` and its first
/// iterate. Divided by `1 - c` it bounds the radius of every iterate
/// around the seed, which sizes snap grids before solving.
pub fn seed_spread(
    lts: &Lts,
    interp: &Interpretation,
    seed_point: Point,
) -> Result<f64, FractalError> {
    interp.check_covers(lts)?;
    let k0: Vec<Vec<Point>> = vec![vec![seed_point]; lts.num_states()];
    let k1 = apply_clouds(lts, interp, &k0, None);
    Ok(cloud_product_distance(&k0, &k1))
}

/// Residual of a candidate solution: the product Hausdorff distance
/// between `sv` and one application of the system operator. A valid
/// depth-n solver output has residual at most `(1 + c) * guarantee`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolutionCheck {
    pub residual: f64,
    pub within_tol: bool,
}

pub fn check_solution(
    lts: &Lts,
    interp: &Interpretation,
    sv: &SolutionVector,
    tol: f64,
) -> Result<SolutionCheck, FractalError> {
    let applied = apply_system(lts, interp, sv)?;
    let residual = product_hausdorff(sv, &applied)?;
    Ok(SolutionCheck {
        residual,
        within_tol: residual <= tol,
    })
}

/// Exact Hausdorff distance between two finite point clouds (max of the
/// two directed sup-inf distances). Small inputs take the O(n*m) brute
/// force; larger ones a grid-bucketed exact nearest-neighbour search
/// that returns the same value (same distance arithmetic).
pub fn hausdorff(k1: &CompactApprox, k2: &CompactApprox) -> Result<f64, FractalError> {
    if k1.dim != k2.dim {
        return Err(FractalError::DimensionMismatch(k1.dim, k2.dim));
    }
    Ok(hausdorff_points(&k1.points, &k2.points))
}

const BRUTE_FORCE_LIMIT: usize = 250_000;

fn hausdorff_points(a: &[Point], b: &[Point]) -> f64 {
    if a.len().saturating_mul(b.len()) <= BRUTE_FORCE_LIMIT {
        hausdorff_brute(a, b)
    } else {
        hausdorff_grid(a, b)
    }
}

/// Brute-force reference path.
pub fn hausdorff_brute(a: &[Point], b: &[Point]) -> f64 {
    directed_brute(a, b).max(directed_brute(b, a))
}

fn directed_brute(a: &[Point], b: &[Point]) -> f64 {
    let mut worst = 0.0f64;
    for &p in a {
        let mut best = f64::INFINITY;
        for &q in b {
            let d = distance_sq(p, q);
            if d < best {
                best = d;
            }
        }
        worst = worst.max(best);
    }
    worst.sqrt()
}

/// Grid-accelerated path: exact nearest neighbours via expanding ring
/// search over uniform buckets.
pub fn hausdorff_grid(a: &[Point], b: &[Point]) -> f64 {
    let ga = CellGrid::build(a);
    let gb = CellGrid::build(b);
    directed_grid(a, &gb).max(directed_grid(b, &ga))
}

fn directed_grid(a: &[Point], grid: &CellGrid) -> f64 {
    a.par_iter()
        .map(|&p| grid.nearest_distance_sq(p))
        .reduce(|| 0.0, f64::max)
        .sqrt()
}

struct CellGrid<'a> {
    points: &'a [Point],
    cell: f64,
    buckets: HashMap<[i64; 3], Vec<u32>>,
    lo: [i64; 3],
    hi: [i64; 3],
}

impl<'a> CellGrid<'a> {
    fn build(points: &'a [Point]) -> Self {
        assert!(!points.is_empty());
        let mut min = [f64::INFINITY; 3];
        let mut max = [f64::NEG_INFINITY; 3];
        for p in points {
            for k in 0..3 {
                min[k] = min[k].min(p[k]);
                max[k] = max[k].max(p[k]);
            }
        }
        let extent = (0..3).map(|k| max[k] - min[k]).fold(0.0, f64::max);
        let active = (0..3).filter(|&k| max[k] > min[k]).count().max(1);
        let per_axis = (points.len() as f64).powf(1.0 / active as f64).ceil();
        let cell = if extent > 0.0 { extent / per_axis } else { 1.0 };
        let mut grid = CellGrid {
            points,
            cell,
            buckets: HashMap::new(),
            lo: [i64::MAX; 3],
            hi: [i64::MIN; 3],
        };
        for (i, &p) in points.iter().enumerate() {
            let c = grid.cell_of(p);
            for k in 0..3 {
                grid.lo[k] = grid.lo[k].min(c[k]);
                grid.hi[k] = grid.hi[k].max(c[k]);
            }
            grid.buckets.entry(c).or_default().push(i as u32);
        }
        grid
    }

    fn cell_of(&self, p: Point) -> [i64; 3] {
        let mut c = [0i64; 3];
        for k in 0..3 {
            c[k] = (p[k] / self.cell).floor() as i64;
        }
        c
    }

    fn nearest_distance_sq(&self, p: Point) -> f64 {
        let home = self.cell_of(p);
        let max_ring = (0..3)
            .map(|k| (home[k] - self.lo[k]).abs().max((self.hi[k] - home[k]).abs()))
            .max()
            .unwrap_or(0);
        let mut best = f64::INFINITY;
        for ring in 0..=max_ring {
            // After ring r is scanned, every unscanned cell sits at
            // Chebyshev distance > r, hence at least r * cell away from
            // p; once best is within (r-1) * cell before scanning ring
            // r, no remaining cell can improve it.
            if best.is_finite() && best.sqrt() <= (ring - 1) as f64 * self.cell {
                break;
            }
            self.scan_ring(p, home, ring, &mut best);
        }
        best
    }

    fn scan_ring(&self, p: Point, home: [i64; 3], ring: i64, best: &mut f64) {
        let lo = [home[0] - ring, home[1] - ring, home[2] - ring];
        let hi = [home[0] + ring, home[1] + ring, home[2] + ring];
        for x in lo[0]..=hi[0] {
            for y in lo[1]..=hi[1] {
                for z in lo[2]..=hi[2] {
                    let cheb = (x - home[0])
                        .abs()
                        .max((y - home[1]).abs())
                        .max((z - home[2]).abs());
                    if cheb != ring {
                        continue;
                    }
                    if let Some(bucket) = self.buckets.get(&[x, y, z]) {
                        for &i in bucket {
                            let d = distance_sq(p, self.points[i as usize]);
                            if d < *best {
                                *best = d;
                            }
                        }
                    }
                }
            }
        }
    }
}

/// The universal distinguishing interpretation: actions prepend their
/// symbol to streams over the alphabet. Under it, the solver's component
/// at a state specializes to the set of fixed-length trace prefixes, so
/// any trace difference shows up as a fractal difference. (The paper's
/// coefficient-product metric on streams makes this a genuine
/// contraction interpretation; we only ever compute the prefix sets.)
#[derive(Debug, Clone)]
pub struct CantorInterpretation {
    alphabet: BTreeSet<ActionLabel>,
}

/// Builds the symbolic interpretation for a given alphabet.
pub fn cantor_interpretation(
    alphabet: impl IntoIterator<Item = ActionLabel>,
) -> CantorInterpretation {
    let alphabet: BTreeSet<_> = alphabet.into_iter().collect();
    assert!(!alphabet.is_empty(), "alphabet must be nonempty");
    CantorInterpretation { alphabet }
}

impl CantorInterpretation {
    pub fn alphabet(&self) -> &BTreeSet<ActionLabel> {
        &self.alphabet
    }

    /// Iterates the prefix-set analogue of the system operator: the
    /// component at a state after `depth` iterations is exactly the set
    /// of length-`depth` words labelling paths from it.
    pub fn solve(&self, lts: &Lts, depth: usize) -> Result<Vec<BTreeSet<Word>>, FractalError> {
        for a in lts.alphabet() {
            if !self.alphabet.contains(a) {
                return Err(FractalError::UnknownAction(a.clone()));
            }
        }
        let n = lts.num_states();
        let mut current: Vec<BTreeSet<Word>> = vec![BTreeSet::from([Word::new()]); n];
        for _ in 0..depth {
            let mut next: Vec<BTreeSet<Word>> = vec![BTreeSet::new(); n];
            for (x, out) in next.iter_mut().enumerate() {
                for (a, y) in lts.successors(x) {
                    for suffix in &current[*y] {
                        let mut w = Word::with_capacity(suffix.len() + 1);
                        w.push(a.clone());
                        w.extend(suffix.iter().cloned());
                        out.insert(w);
                    }
                }
            }
            current = next;
        }
        Ok(current)
    }
}
