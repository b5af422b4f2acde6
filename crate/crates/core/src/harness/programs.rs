//! Fixture programs and generators for the experiments.

use std::fmt::Write;

pub const FIG1: &str = include_str!("../../fixtures/fig1.lfppl");
pub const GMM: &str = include_str!("../../fixtures/gmm.lfppl");
pub const HEAVYTAIL_1D: &str = include_str!("../../fixtures/heavytail.lfppl");
pub const TWO_LEVEL: &str = include_str!("../../fixtures/twolevel.lfppl");

pub const GMM_DATA: [f64; 10] = [-2.0, -2.5, -1.7, -1.9, -2.2, 1.5, 2.2, 3.0, 1.2, 2.8];

/// Hyperbolic target `exp(-sqrt(xᵀAx))` on `[-6, 6]^dims`, lowered by a
/// factor `e` outside `[-3, 3]^dims`.
///
/// The sup-norm test is written as one pair of nested `if`s per
/// coordinate. `a` defaults to the identity.
pub fn heavytail_source(dims: usize, a: Option<&[Vec<f64>]>) -> Result<String, String> {
    if dims == 0 {
        return Err("dims must be at least 1".into());
    }
    if let Some(a) = a {
        if a.len() != dims || a.iter().any(|r| r.len() != dims) {
            return Err(format!("A must be {dims}x{dims}"));
        }
    }
    let x = |i: usize| format!("x{}", i + 1);
    let mut terms = Vec::new();
    for i in 0..dims {
        for j in 0..dims {
            let aij = match a {
                Some(a) => a[i][j],
                None if i == j => 1.0,
                None => 0.0,
            };
            if aij == 0.0 {
                continue;
            }
            let prod = format!("(* {} {})", x(i), x(j));
            terms.push(if aij == 1.0 { prod } else { format!("(* {aij:?} {prod})") });
        }
    }
    let quad = match terms.len() {
        0 => "0".to_string(),
        1 => terms.pop().unwrap_or_default(),
        _ => format!("(+ {})", terms.join(" ")),
    };

    let mut s = String::from("(let [");
    for i in 0..dims {
        let _ = writeln!(s, "{} (sample (uniform -6 6))", x(i));
    }
    let _ = writeln!(s, "z (- (sqrt {quad}))]");
    let outside = "(observe (factor (- z 1)) 0)";
    let mut body = "(observe (factor z) 0)".to_string();
    for i in (0..dims).rev() {
        body = format!(
            "(if (< (- {xi} 3) 0)\n(if (< (- -3 {xi}) 0)\n{body}\n{outside})\n{outside})",
            xi = x(i)
        );
    }
    let _ = write!(s, "{body}\nx1)");
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::Model;
    use std::collections::BTreeMap;

    #[test]
    fn generated_heavytail_matches_closed_form() {
        let src = heavytail_source(3, None).unwrap();
        let c = crate::compile_source(&src, "ht3", &BTreeMap::new()).unwrap();
        let m = Model::new(&c.quadruple).unwrap();
        assert_eq!(m.dim(), 3);
        assert_eq!(m.discontinuous().len(), 3);
        let log_z = (12.0f64).powi(3).ln();
        for (x, extra) in [([1.0f64, -2.0, 0.5], 0.0f64), ([1.0, -4.0, 0.5], -1.0), ([5.9, 0.0, -5.9], -1.0)] {
            let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
            let lp = m.log_density_at(&x).unwrap();
            assert!((lp - (-r + extra - log_z)).abs() < 1e-12, "{x:?}: {lp}");
        }
        assert_eq!(m.log_density_at(&[6.5, 0.0, 0.0]).unwrap(), f64::NEG_INFINITY);
    }

    #[test]
    fn general_quadratic_form() {
        let a = vec![vec![2.0, 0.5], vec![0.5, 1.0]];
        let src = heavytail_source(2, Some(&a)).unwrap();
        let c = crate::compile_source(&src, "ht2", &BTreeMap::new()).unwrap();
        let m = Model::new(&c.quadruple).unwrap();
        let x = [1.0, 2.0];
        let q: f64 = 2.0 + 0.5 * 2.0 * 2.0 + 4.0;
        let lp = m.log_density_at(&x).unwrap();
        assert!((lp - (-q.sqrt() - 144f64.ln())).abs() < 1e-12);
        assert!(heavytail_source(2, Some(&a[..1])).is_err());
    }
}
