// SPDX-License-Identifier: Apache-2.0

//! Polynomial least-squares fits of bounds over a loop parameter.

use std::collections::BTreeSet;

use num_traits::{One, Zero};
use serde::Serialize;

use crate::analysis::analyze_isa;
use crate::annotations::parse_annotations;
use crate::energy_model::EnergyModel;
use crate::error::{Error, Result};
use crate::exec::{collect_results, par_map};
use crate::ir::parse_ir;
use crate::isa::parse_isa;
use crate::mapping::{ir_level_ecsa, IrAnalysisOptions};
use crate::num::{format_sig, to_f64, to_f64_sig, Energy, Q};

#[derive(Clone, Debug, PartialEq)]
pub struct Fit {
    /// Highest degree first.
    pub coeffs: Vec<Q>,
    pub r2: Q,
}

#[derive(Clone, Debug, Serialize)]
pub struct FitJson {
    pub degree: usize,
    pub coeffs: Vec<f64>,
    pub r2: f64,
    pub equation: String,
}

impl Fit {
    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn eval(&self, x: &Q) -> Q {
        self.coeffs.iter().fold(Q::zero(), |acc, c| acc * x + c)
    }

    /// `f(x) = 12.20x^3 + 17.50x^2 + ...` with 4 significant digits.
    pub fn equation(&self) -> String {
        let d = self.degree();
        let mut s = String::from("f(x) =");
        for (k, c) in self.coeffs.iter().enumerate() {
            let p = d - k;
            let mag = format_sig(&num_traits::Signed::abs(c), 4);
            let sign = if num_traits::Signed::is_negative(c) { "-" } else { "+" };
            if k == 0 {
                s.push(' ');
                if sign == "-" {
                    s.push('-');
                }
            } else {
                s.push_str(&format!(" {sign} "));
            }
            s.push_str(&mag);
            match p {
                0 => {}
                1 => s.push('x'),
                _ => s.push_str(&format!("x^{p}")),
            }
        }
        s
    }

    pub fn to_json(&self) -> FitJson {
        FitJson {
            degree: self.degree(),
            coeffs: self.coeffs.iter().map(|c| to_f64_sig(c, 4)).collect(),
            r2: to_f64_sig(&self.r2, 6),
            equation: self.equation(),
        }
    }
}

/// Least-squares polynomial of the given degree through `points`, solved
/// exactly from the normal equations.
pub fn fit_polynomial(points: &[(Q, Q)], degree: usize) -> Result<Fit> {
    if !(1..=3).contains(&degree) {
        return Err(Error::Argument(format!("degree must be 1..3, got {degree}")));
    }
    if points.len() < degree + 2 {
        return Err(Error::Argument(format!(
            "degree {degree} needs at least {} points, got {}",
            degree + 2,
            points.len()
        )));
    }
    let distinct: BTreeSet<&Q> = points.iter().map(|(x, _)| x).collect();
    if distinct.len() != points.len() {
        return Err(Error::Argument("x values must be distinct".into()));
    }
    let n = degree + 1;
    // Columns ordered by ascending power; reversed at the end.
    let mut a = vec![vec![Q::zero(); n + 1]; n];
    for (x, y) in points {
        let mut pw = vec![Q::one(); 2 * n - 1];
        for k in 1..pw.len() {
            pw[k] = &pw[k - 1] * x;
        }
        for i in 0..n {
            for j in 0..n {
                a[i][j] += &pw[i + j];
            }
            a[i][n] += &pw[i] * y;
        }
    }
    let sol = solve_dense(a).ok_or_else(|| Error::Analysis("rank-deficient normal equations".into()))?;
    let coeffs: Vec<Q> = sol.into_iter().rev().collect();
    let mut fit = Fit { coeffs, r2: Q::zero() };
    let mean = points.iter().map(|(_, y)| y).sum::<Q>() / Q::from_integer((points.len() as i64).into());
    let mut ss_res = Q::zero();
    let mut ss_tot = Q::zero();
    for (x, y) in points {
        let r = y - fit.eval(x);
        ss_res += &r * &r;
        let t = y - &mean;
        ss_tot += &t * &t;
    }
    fit.r2 = if ss_tot.is_zero() {
        if ss_res.is_zero() { Q::one() } else { Q::zero() }
    } else {
        Q::one() - ss_res / ss_tot
    };
    Ok(fit)
}

fn solve_dense(mut a: Vec<Vec<Q>>) -> Option<Vec<Q>> {
    let n = a.len();
    for col in 0..n {
        let pivot = (col..n).find(|&r| !a[r][col].is_zero())?;
        a.swap(col, pivot);
        let p = a[col][col].clone();
        for v in a[col].iter_mut() {
            *v /= &p;
        }
        for r in 0..n {
            if r != col && !a[r][col].is_zero() {
                let f = a[r][col].clone();
                for c in col..=n {
                    let d = &f * &a[col][c];
                    a[r][c] -= d;
                }
            }
        }
    }
    Some(a.into_iter().map(|row| row[n].clone()).collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProgramKind {
    Isa,
    Ir,
}

impl ProgramKind {
    pub fn from_path(path: &str) -> Option<ProgramKind> {
        if path.ends_with(".isa") {
            Some(ProgramKind::Isa)
        } else if path.ends_with(".mir") {
            Some(ProgramKind::Ir)
        } else {
            None
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepPoint {
    pub x: i64,
    pub upper: Energy,
    pub lower: Energy,
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepPointJson {
    pub x: i64,
    pub upper_nj: f64,
    pub lower_nj: f64,
}

impl SweepPoint {
    pub fn to_json(&self) -> SweepPointJson {
        SweepPointJson {
            x: self.x,
            upper_nj: to_f64(&self.upper.nanojoules()),
            lower_nj: to_f64(&self.lower.nanojoules()),
        }
    }
}

pub fn instantiate(template: &str, x: i64) -> String {
    template.replace("{x}", &x.to_string())
}

/// One single-threaded bound of `main` per parameter value; `{x}` in the
/// program and annotation templates is replaced by the value.
pub fn parametric_sweep(
    program: &str,
    kind: ProgramKind,
    annotations: &str,
    xs: &[i64],
    model: &EnergyModel,
) -> Result<Vec<SweepPoint>> {
    collect_results(par_map(xs, |&x| {
        let file = format!("sweep[x={x}]");
        let text = instantiate(program, x);
        let ann = parse_annotations(&instantiate(annotations, x), &file)?;
        let (upper, lower) = match kind {
            ProgramKind::Isa => {
                let a = analyze_isa(&parse_isa(&text, &file)?, &ann, model, "main", 1)?;
                (a.upper.bound, a.lower.bound)
            }
            ProgramKind::Ir => {
                let a = ir_level_ecsa(&parse_ir(&text, &file)?, &ann, model, 1, IrAnalysisOptions::default())?;
                (a.upper.bound, a.lower.bound)
            }
        };
        Ok(SweepPoint { x, upper, lower })
    }))
}

/// Upper bounds of a sweep as fit points in nanojoules.
pub fn upper_points(sweep: &[SweepPoint]) -> Vec<(Q, Q)> {
    sweep
        .iter()
        .map(|p| (Q::from_integer(p.x.into()), p.upper.nanojoules()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::num::{q, q_frac};
    use proptest::prelude::*;

    fn pts(f: impl Fn(i64) -> Q, xs: std::ops::RangeInclusive<i64>) -> Vec<(Q, Q)> {
        xs.map(|x| (q(x), f(x))).collect()
    }

    #[test]
    fn recovers_linear_generator() {
        let f = fit_polynomial(&pts(|x| q(19) * q(x) + q_frac(942, 10), 1..=8), 1).unwrap();
        assert_eq!(f.coeffs, vec![q(19), q_frac(942, 10)]);
        assert_eq!(f.r2, q(1));
        assert_eq!(f.to_json().coeffs, vec![19.0, 94.2]);
        assert_eq!(f.equation(), "f(x) = 19.00x + 94.20");
    }

    #[test]
    fn constant_data_has_zero_slope() {
        let f = fit_polynomial(&pts(|_| q(5), 0..=4), 1).unwrap();
        assert_eq!(f.coeffs, vec![q(0), q(5)]);
        assert_eq!(f.r2, q(1));
    }

    #[test]
    fn preconditions() {
        assert!(fit_polynomial(&pts(|x| q(x), 0..=1), 1).is_err());
        assert!(fit_polynomial(&[(q(1), q(1)), (q(1), q(2)), (q(2), q(3))], 1).is_err());
        assert!(fit_polynomial(&pts(|x| q(x), 0..=9), 4).is_err());
    }

    #[test]
    fn noisy_line_has_r2_below_one() {
        let data = vec![(q(0), q(0)), (q(1), q(2)), (q(2), q(1)), (q(3), q(4))];
        let f = fit_polynomial(&data, 1).unwrap();
        assert!(f.r2 < q(1) && f.r2 > q(0));
        // By hand: Sxy = 11/2, Sxx = 5, means (3/2, 7/4).
        assert_eq!(f.coeffs, vec![q_frac(11, 10), q_frac(1, 10)]);
    }

    proptest! {
        #[test]
        fn exact_cubic_is_recovered(a in -20i64..20, b in -20i64..20, c in -20i64..20, d in -20i64..20) {
            let f = fit_polynomial(&pts(|x| q(a * x * x * x + b * x * x + c * x + d), -3..=5), 3).unwrap();
            prop_assert_eq!(f.coeffs, vec![q(a), q(b), q(c), q(d)]);
            prop_assert_eq!(f.r2, q(1));
        }
    }

    #[test]
    fn sweep_of_counted_loop_is_linear_and_monotone() {
        let prog = "func main:\n  ldc r1, {x}\nloop:\n  bf r1, done\n  sub r1, r1, 1\n  bu loop\ndone:\n  ret\n";
        let ann = "loopbound func=main header=loop max={x} min={x}\n";
        let m = EnergyModel::fixture();
        let s = parametric_sweep(prog, ProgramKind::Isa, ann, &[0, 1, 2, 3, 4, 5], &m).unwrap();
        for w in s.windows(2) {
            assert!(w[0].upper < w[1].upper);
        }
        let f = fit_polynomial(&upper_points(&s), 1).unwrap();
        assert_eq!(f.r2, q(1));
    }
}
