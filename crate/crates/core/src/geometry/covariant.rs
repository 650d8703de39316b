use super::chart::Chart;
use super::curvature::LocalGeometry;
use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::fields::ScalarExpr;

/// Tensor field with `up` contravariant then `down` covariant indices.
#[derive(Debug, Clone)]
pub struct TensorField {
    pub dim: usize,
    pub up: usize,
    pub down: usize,
    /// Row-major over the index tuple, contravariant indices first.
    pub components: Vec<ScalarExpr>,
}

impl TensorField {
    pub fn new(dim: usize, up: usize, down: usize, components: Vec<ScalarExpr>) -> Result<Self> {
        if components.len() != dim.pow((up + down) as u32) {
            return Err(Error::Invalid(format!(
                "valence ({up},{down}) in dimension {dim} needs {} components, got {}",
                dim.pow((up + down) as u32),
                components.len()
            )));
        }
        Ok(TensorField { dim, up, down, components })
    }

    pub fn scalar(dim: usize, f: ScalarExpr) -> Self {
        TensorField { dim, up: 0, down: 0, components: vec![f] }
    }

    pub fn vector(components: Vec<ScalarExpr>) -> Self {
        TensorField { dim: components.len(), up: 1, down: 0, components }
    }

    pub fn covector(components: Vec<ScalarExpr>) -> Self {
        TensorField { dim: components.len(), up: 0, down: 1, components }
    }

    /// The metric of a chart as a (0,2) field.
    pub fn metric(chart: &Chart) -> Self {
        let d = chart.dim();
        let components = (0..d * d).map(|k| chart.metric_entry(k / d, k % d)).collect();
        TensorField { dim: d, up: 0, down: 2, components }
    }

    pub fn rank(&self) -> usize {
        self.up + self.down
    }
}

/// `∇_a T^{...}_{...}` at `x`, with the derivative index first.
pub fn covariant_derivative(chart: &Chart, field: &TensorField, x: &[f64]) -> Result<Tensor<f64>> {
    if field.up > 1 || field.down > 2 {
        return Err(Error::UnsupportedValence { up: field.up, down: field.down });
    }
    if field.dim != chart.dim() {
        return Err(Error::Invalid("field and chart dimensions differ".into()));
    }
    chart.check_point(x)?;
    let d = chart.dim();
    let rank = field.rank();
    let geo = LocalGeometry::at(chart, x)?;
    let vals: Vec<f64> = field.components.iter().map(|c| c.eval(x)).collect::<Result<_, _>>()?;
    let len = d.pow(rank as u32);
    let mut out = Tensor::zeros(d, rank + 1);
    let mut ix = vec![0usize; rank];
    for flat in 0..len {
        decode(flat, d, &mut ix);
        for a in 0..d {
            let mut s = field.components[flat].diff(a).eval(x)?;
            for slot in 0..rank {
                let mut jx = ix.clone();
                for e in 0..d {
                    jx[slot] = e;
                    let t = vals[encode(&jx, d)];
                    if slot < field.up {
                        s += geo.gamma[[ix[slot], a, e]] * t;
                    } else {
                        s -= geo.gamma[[e, a, ix[slot]]] * t;
                    }
                }
            }
            out.data[a * len + flat] = s;
        }
    }
    Ok(out)
}

fn decode(mut flat: usize, d: usize, ix: &mut [usize]) {
    for slot in (0..ix.len()).rev() {
        ix[slot] = flat % d;
        flat /= d;
    }
}

fn encode(ix: &[usize], d: usize) -> usize {
    ix.iter().fold(0, |acc, &i| acc * d + i)
}
