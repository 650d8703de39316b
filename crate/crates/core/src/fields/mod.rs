//! Closed-form scalar fields: the expression tree, its parser and a compiled
//! evaluator.

mod expr;
mod parse;
mod tape;

pub use expr::{norm_squared, Func, Node, ScalarExpr};
pub use parse::{parse, Vars};
pub use tape::Tape;

use serde::{Deserialize, Serialize};

use crate::error::{Error, FieldError, Result};

/// Parses a field over chart coordinates `x1..x{dim}`.
pub fn parse_chart_expr(src: &str, dim: usize) -> Result<ScalarExpr, FieldError> {
    parse(src, &Vars::Chart { dim })
}

pub fn differentiate(f: &ScalarExpr, axis: usize) -> ScalarExpr {
    f.diff(axis)
}

/// A location in a named chart.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub coords: Vec<f64>,
    pub chart: String,
}

impl Point {
    pub fn new(chart: impl Into<String>, coords: Vec<f64>) -> Self {
        Point { coords, chart: chart.into() }
    }

    /// Parses `"x1,x2,..."`.
    pub fn parse_coords(s: &str) -> Result<Vec<f64>> {
        s.split(',')
            .map(|c| {
                c.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Invalid(format!("bad coordinate '{c}' in point '{s}'")))
            })
            .collect()
    }
}

pub fn evaluate(f: &ScalarExpr, p: &Point) -> Result<f64, FieldError> {
    f.eval(&p.coords)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Small random expression: polynomial in three coordinates times transcendentals.
    fn random_field(c: &[f64]) -> ScalarExpr {
        let x = |i| ScalarExpr::var(i);
        let poly = c[0] + c[1] * x(0) + c[2] * x(1) * x(2) + c[3] * x(0).powi(2) * x(1)
            + c[4] * x(2).powi(3);
        let trans = (c[5] * x(0) - c[6] * x(1)).sin()
            + (c[7] * x(2)).exp() / (2.0 + (c[8] * x(0)).cos())
            + (c[9] * x(1)).cosh() * (c[9] * x(2)).sinh();
        poly * trans + (1.5 + x(0).powi(2)).ln() * (2.0 + x(1).powi(2)).sqrt()
    }

    fn richardson(f: &ScalarExpr, p: &[f64], axis: usize) -> f64 {
        let h = 1e-5;
        let cd = |h: f64| {
            let mut a = p.to_vec();
            let mut b = p.to_vec();
            a[axis] += h;
            b[axis] -= h;
            (f.eval(&a).unwrap() - f.eval(&b).unwrap()) / (2.0 * h)
        };
        (4.0 * cd(h / 2.0) - cd(h)) / 3.0
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn mixed_partials_commute(
            c in proptest::collection::vec(-1.0f64..1.0, 10),
            p in proptest::collection::vec(-0.8f64..0.8, 3),
            i in 0usize..3, j in 0usize..3,
        ) {
            let f = random_field(&c);
            let a = f.diff(i).diff(j).eval(&p).unwrap();
            let b = f.diff(j).diff(i).eval(&p).unwrap();
            prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0));
        }

        #[test]
        fn derivative_matches_richardson_differences(
            c in proptest::collection::vec(-1.0f64..1.0, 10),
            p in proptest::collection::vec(-0.8f64..0.8, 3),
            axis in 0usize..3,
        ) {
            let f = random_field(&c);
            let exact = f.diff(axis).eval(&p).unwrap();
            let fd = richardson(&f, &p, axis);
            prop_assert!((exact - fd).abs() <= 1e-7 * exact.abs().max(1.0), "{exact} vs {fd}");
        }
    }

    #[test]
    fn point_parsing() {
        assert_eq!(Point::parse_coords("1, -2.5,3e-1").unwrap(), vec![1.0, -2.5, 0.3]);
        assert!(Point::parse_coords("1,a").is_err());
    }
}
