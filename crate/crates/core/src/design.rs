//! Initial experimental designs.
//!
//! All designs are feasible by construction: integer coordinates are
//! stratified over the half-unit-extended interval `[lo − ½, up + ½]` and then
//! rounded, so every integer level is equally likely and rows stay inside the
//! box. Draws whose rows collide (within the problem's duplicate radius) or
//! that do not affinely span the space are redrawn up to 100 times.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng as _;

use crate::error::{Error, Result};
use crate::linalg::{affine_full_rank, dist2, min_pairwise_dist};
use crate::problem::ProblemSpec;
use crate::surrogate::SurrogateKind;
use crate::Rng;

/// Best-of-K draws for the maximin Latin hypercube.
pub const DEFAULT_LHD_DRAWS: usize = 20;
const MAX_REDRAWS: usize = 100;
/// Largest corner set enumerated exhaustively; bigger cubes are sampled.
const MAX_CORNER_POOL: usize = 1 << 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DesignKind {
    Lhd,
    Slhd,
    Corner,
}

impl DesignKind {
    pub const ALL: [DesignKind; 3] = [DesignKind::Corner, DesignKind::Slhd, DesignKind::Lhd];

    pub fn tag(self) -> &'static str {
        match self {
            DesignKind::Corner => "CORNER",
            DesignKind::Slhd => "SLHD",
            DesignKind::Lhd => "lhd",
        }
    }
}

impl fmt::Display for DesignKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for DesignKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        DesignKind::ALL
            .into_iter()
            .find(|k| k.tag() == s)
            .ok_or_else(|| Error::config(format!("unknown design `{s}`; valid: CORNER, SLHD, lhd")))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DesignMatrix {
    pub kind: DesignKind,
    pub points: Vec<Vec<f64>>,
    /// Extra rows supplied by the user, already included in `points`.
    pub user_points: Vec<Vec<f64>>,
}

/// Fewest design points for a well-posed fit of `surrogate` in dimension `d`.
pub fn min_design_size(surrogate: SurrogateKind, d: usize) -> usize {
    surrogate.min_points(d)
}

/// Design size used when none is given.
pub fn default_design_size(surrogate: SurrogateKind, d: usize) -> usize {
    (2 * (d + 1)).max(min_design_size(surrogate, d))
}

fn lattice_size(spec: &ProblemSpec) -> Option<f64> {
    if spec.d1() > 0 {
        return None;
    }
    Some((0..spec.dim()).map(|i| spec.side(i) + 1.0).product())
}

fn check_size(n: usize, spec: &ProblemSpec) -> Result<()> {
    if n < 2 {
        return Err(Error::Design(format!("a design needs at least 2 points, got {n}")));
    }
    if let Some(levels) = lattice_size(spec) {
        if n as f64 > levels {
            return Err(Error::Design(format!(
                "{n} distinct points requested but the integer lattice has only {levels}"
            )));
        }
    }
    Ok(())
}

/// Maps a position `s ∈ [0, 1]` along coordinate `i` to a feasible value.
fn place(spec: &ProblemSpec, i: usize, s: f64, n: usize) -> f64 {
    let (lo, up) = (spec.lower()[i], spec.upper()[i]);
    if spec.is_integer(i) {
        let levels = up - lo + 1.0;
        let v = if levels >= n as f64 {
            lo - 0.5 + s * levels
        } else {
            lo + s * (up - lo)
        };
        v.round().clamp(lo, up)
    } else {
        lo + s * (up - lo)
    }
}

fn unit(spec: &ProblemSpec, x: &[f64]) -> Vec<f64> {
    x.iter()
        .enumerate()
        .map(|(i, v)| (v - spec.lower()[i]) / spec.side(i))
        .collect()
}

fn has_duplicates(points: &[Vec<f64>], tol: f64) -> bool {
    let t2 = tol * tol;
    for i in 0..points.len() {
        for j in i + 1..points.len() {
            if dist2(&points[i], &points[j]) <= t2 {
                return true;
            }
        }
    }
    false
}

/// Drops rows that duplicate an earlier row (within `tol`).
pub fn dedup_rows(points: Vec<Vec<f64>>, tol: f64) -> Vec<Vec<f64>> {
    let t2 = tol * tol;
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(points.len());
    for p in points {
        if out.iter().all(|q| dist2(q, &p) > t2) {
            out.push(p);
        }
    }
    out
}

fn acceptable(points: &[Vec<f64>], spec: &ProblemSpec) -> bool {
    let d = spec.dim();
    !has_duplicates(points, spec.dedup_tol()) && (points.len() < d + 1 || affine_full_rank(points, d))
}

fn with_redraws<F>(spec: &ProblemSpec, rng: &mut Rng, mut draw: F) -> Vec<Vec<f64>>
where
    F: FnMut(&mut Rng) -> Vec<Vec<f64>>,
{
    let mut pts = draw(rng);
    for _ in 1..MAX_REDRAWS {
        if acceptable(&pts, spec) {
            return pts;
        }
        pts = draw(rng);
    }
    if has_duplicates(&pts, spec.dedup_tol()) {
        let n = pts.len();
        pts = dedup_rows(pts, spec.dedup_tol());
        log::warn!("design: duplicate rows after {MAX_REDRAWS} draws, kept {} of {n}", pts.len());
    }
    pts
}

/// One random Latin hypercube: each column visits every one of the `n`
/// strata exactly once, with a uniform position inside the stratum.
pub fn lhd_draw(n: usize, spec: &ProblemSpec, rng: &mut Rng) -> Vec<Vec<f64>> {
    let d = spec.dim();
    let mut pts = vec![vec![0.0; d]; n];
    let mut perm: Vec<usize> = (0..n).collect();
    for i in 0..d {
        perm.shuffle(rng);
        for (row, &k) in perm.iter().enumerate() {
            let s = (k as f64 + rng.random::<f64>()) / n as f64;
            pts[row][i] = place(spec, i, s, n);
        }
    }
    pts
}

/// Maximin Latin hypercube: the best of `draws` random hypercubes by
/// smallest pairwise distance (in unit-box coordinates).
pub fn latin_hypercube(n: usize, spec: &ProblemSpec, rng: &mut Rng, draws: usize) -> Result<DesignMatrix> {
    check_size(n, spec)?;
    let draws = draws.max(1);
    let points = with_redraws(spec, rng, |rng| {
        let mut best: Option<(f64, Vec<Vec<f64>>)> = None;
        for _ in 0..draws {
            let pts = lhd_draw(n, spec, rng);
            let scaled: Vec<Vec<f64>> = pts.iter().map(|p| unit(spec, p)).collect();
            let score = min_pairwise_dist(&scaled);
            if best.as_ref().is_none_or(|(b, _)| score > *b) {
                best = Some((score, pts));
            }
        }
        best.expect("at least one draw").1
    });
    Ok(DesignMatrix { kind: DesignKind::Lhd, points, user_points: vec![] })
}

/// Stratum indices (1-based) of a symmetric Latin hypercube: row `i` and row
/// `n − 1 − i` satisfy `k + k' = n + 1` in every column; for odd `n` the
/// middle row sits in the middle stratum.
pub fn slhd_strata(n: usize, d: usize, rng: &mut Rng) -> Vec<Vec<usize>> {
    let m = n / 2;
    let mut strata = vec![vec![0usize; d]; n];
    let mut half: Vec<usize> = (1..=m).collect();
    for j in 0..d {
        half.shuffle(rng);
        for (i, &k) in half.iter().enumerate() {
            let k = if rng.random::<bool>() { k } else { n + 1 - k };
            strata[i][j] = k;
            strata[n - 1 - i][j] = n + 1 - k;
        }
        if n % 2 == 1 {
            strata[m][j] = m + 1;
        }
    }
    strata
}

/// Symmetric Latin hypercube: stratum midpoints, point set symmetric about
/// the box center (before integer rounding).
pub fn symmetric_lhd(n: usize, spec: &ProblemSpec, rng: &mut Rng) -> Result<DesignMatrix> {
    check_size(n, spec)?;
    let d = spec.dim();
    let points = with_redraws(spec, rng, |rng| {
        slhd_strata(n, d, rng)
            .into_iter()
            .map(|row| {
                row.iter()
                    .enumerate()
                    .map(|(i, &k)| place(spec, i, (k as f64 - 0.5) / n as f64, n))
                    .collect()
            })
            .collect()
    });
    Ok(DesignMatrix { kind: DesignKind::Slhd, points, user_points: vec![] })
}

fn corner(spec: &ProblemSpec, bits: u64) -> Vec<f64> {
    (0..spec.dim())
        .map(|i| if bits >> i & 1 == 1 { spec.upper()[i] } else { spec.lower()[i] })
        .collect()
}

/// Greedy maximin order over corner bitmasks: start at `first`, then
/// repeatedly take the corner farthest from those already chosen (ties go to
/// the earliest candidate).
pub fn greedy_corners(spec: &ProblemSpec, pool: &[u64], first: usize, count: usize) -> Vec<u64> {
    let pts: Vec<Vec<f64>> = pool.iter().map(|&b| corner(spec, b)).collect();
    let mut chosen = vec![first];
    let mut mind: Vec<f64> = pts.iter().map(|p| dist2(p, &pts[first])).collect();
    while chosen.len() < count.min(pool.len()) {
        let mut best = None;
        for (k, &dk) in mind.iter().enumerate() {
            if chosen.contains(&k) {
                continue;
            }
            if best.is_none_or(|(_, bd)| dk > bd) {
                best = Some((k, dk));
            }
        }
        let (k, _) = best.expect("pool not exhausted");
        chosen.push(k);
        for (j, p) in pts.iter().enumerate() {
            mind[j] = mind[j].min(dist2(p, &pts[k]));
        }
    }
    chosen.into_iter().map(|k| pool[k]).collect()
}

/// Box center plus `n − 1` corners chosen by greedy maximin from a random
/// starting corner.
pub fn corner_design(n: usize, spec: &ProblemSpec, rng: &mut Rng) -> Result<DesignMatrix> {
    let d = spec.dim();
    let max = if d < 63 { (1u64 << d) + 1 } else { u64::MAX };
    if n as u64 > max || n == 0 {
        return Err(Error::Design(format!(
            "corner design in {d} dimensions holds 1..={max} points, {n} requested"
        )));
    }
    let pool: Vec<u64> = if d < 63 && (1u64 << d) as usize <= MAX_CORNER_POOL {
        (0..1u64 << d).collect()
    } else {
        let mut seen = std::collections::BTreeSet::new();
        while seen.len() < MAX_CORNER_POOL.min(n.saturating_mul(64)) {
            let bits = if d >= 64 { rng.random::<u64>() } else { rng.random::<u64>() & ((1u64 << d) - 1) };
            seen.insert(bits);
        }
        seen.into_iter().collect()
    };
    let first = rng.random_range(0..pool.len());
    let mut points: Vec<Vec<f64>> = greedy_corners(spec, &pool, first, n - 1)
        .into_iter()
        .map(|b| corner(spec, b))
        .collect();
    let mut center = spec.center();
    spec.project(&mut center);
    points.push(center);
    let n0 = points.len();
    let points = dedup_rows(points, spec.dedup_tol());
    if points.len() < n0 {
        log::warn!("corner design: rounded center coincides with a corner");
    }
    Ok(DesignMatrix { kind: DesignKind::Corner, points, user_points: vec![] })
}

/// Builds a design of the requested kind and appends user-supplied rows.
pub fn build_design(
    kind: DesignKind,
    n: usize,
    spec: &ProblemSpec,
    rng: &mut Rng,
    user_points: &[Vec<f64>],
) -> Result<DesignMatrix> {
    for p in user_points {
        spec.check_feasible(p)?;
    }
    let mut design = match kind {
        DesignKind::Lhd => latin_hypercube(n, spec, rng, DEFAULT_LHD_DRAWS)?,
        DesignKind::Slhd => symmetric_lhd(n, spec, rng)?,
        DesignKind::Corner => corner_design(n, spec, rng)?,
    };
    if !user_points.is_empty() {
        let mut all = user_points.to_vec();
        all.append(&mut design.points);
        design.points = dedup_rows(all, spec.dedup_tol());
        design.user_points = user_points.to_vec();
    }
    Ok(design)
}

/// Reads user start points: one point per line, coordinates separated by
/// whitespace or commas; blank lines and `#` comments are skipped.
pub fn read_start_points(path: impl AsRef<Path>, spec: &ProblemSpec) -> Result<Vec<Vec<f64>>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_start_points(&text, spec)
}

pub fn parse_start_points(text: &str, spec: &ProblemSpec) -> Result<Vec<Vec<f64>>> {
    let mut out = vec![];
    for (ln, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let p: Vec<f64> = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .map(|s| s.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::config(format!("start points line {}: {e}", ln + 1)))?;
        if p.len() != spec.dim() {
            return Err(Error::config(format!(
                "start points line {}: expected {} coordinates, got {}",
                ln + 1,
                spec.dim(),
                p.len()
            )));
        }
        spec.check_feasible(&p)?;
        out.push(p);
    }
    Ok(out)
}
