//! Zero sets of scalar fields on a grid: sign-change edges refined by
//! bisection, plus isolated (non-crossing) zeros found by Newton's method on
//! the gradient from local minima of `|f|`.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::fields::{ScalarExpr, Tape};
use crate::geometry::grid_points;
use crate::tractor::SecondJet;

/// Grid points are capped at this many nodes, shrinking the per-axis count in
/// higher dimensions.
const MAX_NODES: usize = 250_000;

pub fn effective_grid(n: usize, dim: usize) -> usize {
    let cap = (MAX_NODES as f64).powf(1.0 / dim as f64).floor() as usize;
    n.min(cap).max(3)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SingularityKind {
    Empty,
    IsolatedPoints,
    Hypersurface,
}

#[derive(Debug, Clone, Serialize)]
pub struct SingularitySet {
    pub kind: SingularityKind,
    /// Refined zeros on sign-changing grid edges.
    pub crossings: Vec<Vec<f64>>,
    /// Zeros at which the field does not change sign.
    pub isolated: Vec<Vec<f64>>,
    pub grid: usize,
}

impl SingularitySet {
    pub fn points(&self) -> impl Iterator<Item = &Vec<f64>> {
        self.crossings.iter().chain(&self.isolated)
    }

    pub fn len(&self) -> usize {
        self.crossings.len() + self.isolated.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn neighbors(ix: &[usize], n: usize, out: &mut Vec<Vec<usize>>) {
    out.clear();
    let d = ix.len();
    let total = 3usize.pow(d as u32);
    'outer: for code in 0..total {
        if code == total / 2 {
            continue; // the node itself
        }
        let mut c = code;
        let mut j = vec![0; d];
        for a in 0..d {
            let off = (c % 3) as isize - 1;
            c /= 3;
            let v = ix[a] as isize + off;
            if v < 0 || v >= n as isize {
                continue 'outer;
            }
            j[a] = v as usize;
        }
        out.push(j);
    }
}

fn flat_index(ix: &[usize], n: usize) -> usize {
    ix.iter().fold(0, |acc, &i| acc * n + i)
}

fn unflatten(mut k: usize, n: usize, d: usize) -> Vec<usize> {
    let mut ix = vec![0; d];
    for a in (0..d).rev() {
        ix[a] = k % n;
        k /= n;
    }
    ix
}

fn bisect(tape: &Tape, a: &[f64], b: &[f64], fa: f64) -> Result<Vec<f64>> {
    let mut lo = 0.0f64;
    let mut hi = 1.0f64;
    let len = a.iter().zip(b).map(|(p, q)| (q - p).powi(2)).sum::<f64>().sqrt();
    let at = |t: f64| -> Vec<f64> { a.iter().zip(b).map(|(p, q)| p + t * (q - p)).collect() };
    while (hi - lo) * len > 1e-12 {
        let mid = 0.5 * (lo + hi);
        let fm = tape.eval(&at(mid))?[0];
        if fm == 0.0 {
            return Ok(at(mid));
        }
        if fm.signum() == fa.signum() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let candidates = [lo, 0.5 * (lo + hi), hi];
    let mut best = (f64::INFINITY, 0.0);
    for t in candidates {
        let v = tape.eval(&at(t))?[0].abs();
        if v < best.0 {
            best = (v, t);
        }
    }
    Ok(at(best.1))
}

/// Newton iteration for a critical point of `f` starting at `x`.
fn critical_point(jet: &SecondJet, x: &[f64], bounds: &[(f64, f64)]) -> Option<Vec<f64>> {
    let d = x.len();
    let mut x = x.to_vec();
    for _ in 0..60 {
        let (_, g, h) = jet.eval(&x).ok()?;
        let hm = DMatrix::from_fn(d, d, |i, j| h[[i, j]]);
        let step = hm.lu().solve(&DVector::from_vec(g))?;
        for a in 0..d {
            x[a] -= step[a];
        }
        if x.iter().zip(bounds).any(|(&v, &(lo, hi))| v < lo || v > hi) {
            return None;
        }
        if step.amax() < 1e-15 {
            break;
        }
    }
    Some(x)
}

/// Extracts the zero set of `f` on an `n`-per-axis grid over `bounds`.
pub fn extract_zeros(f: &ScalarExpr, bounds: &[(f64, f64)], n: usize) -> Result<SingularitySet> {
    let d = bounds.len();
    let n = effective_grid(n, d);
    let tape = Tape::compile(std::slice::from_ref(f));
    let nodes = grid_points(bounds, n);
    let values: Vec<f64> = nodes.iter().map(|x| tape.eval(x).map(|v| v[0])).collect::<Result<_, _>>()?;

    let mut crossings = Vec::new();
    let mut crossing_nodes = vec![false; nodes.len()];
    let mut stride = vec![1usize; d];
    for a in (0..d.saturating_sub(1)).rev() {
        stride[a] = stride[a + 1] * n;
    }
    for (k, x) in nodes.iter().enumerate() {
        let ix = unflatten(k, n, d);
        let fk = values[k];
        for a in 0..d {
            if ix[a] + 1 >= n {
                continue;
            }
            let j = k + stride[a];
            let fj = values[j];
            if fk * fj < 0.0 {
                crossings.push(bisect(&tape, x, &nodes[j], fk)?);
                crossing_nodes[k] = true;
                crossing_nodes[j] = true;
            }
            // a face whose corners alternate in sign cannot be resolved at this spacing
            for b in a + 1..d {
                if ix[b] + 1 >= n {
                    continue;
                }
                let c = [fk, values[j], values[j + stride[b]], values[k + stride[b]]];
                if c.iter().all(|v| *v != 0.0)
                    && c[0].signum() == c[2].signum()
                    && c[1].signum() == c[3].signum()
                    && c[0].signum() != c[1].signum()
                {
                    return Err(Error::GridTooCoarse(format!(
                        "saddle-type sign pattern on the grid face at {x:?} (axes {}, {})",
                        a + 1,
                        b + 1
                    )));
                }
            }
        }
    }
    // nodes that are exactly zero but sit between opposite signs belong to a crossing
    let mut nb = Vec::new();
    for (k, x) in nodes.iter().enumerate() {
        if values[k] == 0.0 {
            neighbors(&unflatten(k, n, d), n, &mut nb);
            let (mut pos, mut neg) = (false, false);
            for j in &nb {
                let v = values[flat_index(j, n)];
                pos |= v > 0.0;
                neg |= v < 0.0;
            }
            if pos && neg {
                crossings.push(x.clone());
                crossing_nodes[k] = true;
            }
        }
    }

    // isolated zeros: local minima of |f| away from crossings, polished by Newton on ∇f
    let mut minima: Vec<(f64, usize)> = Vec::new();
    for k in 0..nodes.len() {
        if crossing_nodes[k] {
            continue;
        }
        neighbors(&unflatten(k, n, d), n, &mut nb);
        let v = values[k].abs();
        let is_min = nb.iter().all(|j| {
            let jj = flat_index(j, n);
            !crossing_nodes[jj] && values[jj].abs() >= v
        });
        if is_min {
            minima.push((v, k));
        }
    }
    minima.sort_by(|a, b| a.0.total_cmp(&b.0));
    minima.truncate(64);
    let jet = SecondJet::new(f, d);
    let spacing = bounds.iter().map(|(lo, hi)| (hi - lo) / (n - 1) as f64).fold(f64::INFINITY, f64::min);
    let mut isolated: Vec<Vec<f64>> = Vec::new();
    for (_, k) in minima {
        let Some(x) = critical_point(&jet, &nodes[k], bounds) else { continue };
        let v = tape.eval(&x).map(|v| v[0].abs()).unwrap_or(f64::INFINITY);
        let dup = isolated.iter().any(|y| y.iter().zip(&x).all(|(p, q)| (p - q).abs() < 0.5 * spacing));
        if v < 1e-10 && !dup {
            isolated.push(x);
        }
    }

    let kind = if !crossings.is_empty() {
        SingularityKind::Hypersurface
    } else if !isolated.is_empty() {
        SingularityKind::IsolatedPoints
    } else {
        SingularityKind::Empty
    };
    Ok(SingularitySet { kind, crossings, isolated, grid: n })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::parse_chart_expr;

    #[test]
    fn sphere_is_a_hypersurface() {
        let f = parse_chart_expr("(1 - x1^2 - x2^2 - x3^2)/2", 3).unwrap();
        let z = extract_zeros(&f, &[(-1.5, 1.5); 3], 17).unwrap();
        assert_eq!(z.kind, SingularityKind::Hypersurface);
        for p in &z.crossings {
            let r: f64 = p.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!((r - 1.0).abs() < 1e-10);
            assert!(f.eval(p).unwrap().abs() < 1e-10);
        }
    }

    #[test]
    fn touching_zero_is_isolated() {
        let f = parse_chart_expr("((x1-0.13)^2 + (x2+0.07)^2 + x3^2)/2", 3).unwrap();
        let z = extract_zeros(&f, &[(-1.0, 1.0); 3], 9).unwrap();
        assert_eq!(z.kind, SingularityKind::IsolatedPoints);
        assert_eq!(z.isolated.len(), 1);
        assert!((z.isolated[0][0] - 0.13).abs() < 1e-12);
    }

    #[test]
    fn positive_field_has_no_zeros() {
        let f = parse_chart_expr("(1 + x1^2 + x2^2)/2", 2).unwrap();
        assert_eq!(extract_zeros(&f, &[(-1.0, 1.0); 2], 9).unwrap().kind, SingularityKind::Empty);
    }

    #[test]
    fn saddle_faces_are_flagged() {
        let f = parse_chart_expr("x1*x2 - 0.001", 2).unwrap();
        assert!(matches!(extract_zeros(&f, &[(-1.0, 1.0); 2], 4), Err(Error::GridTooCoarse(_))));
    }
}
