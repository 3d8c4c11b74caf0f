//! Aberth–Ehrlich simultaneous root iteration with Newton polishing.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::poly::Polynomial;

const MAX_ITERATIONS: usize = 500;
const POLISH_STEPS: usize = 4;

/// All roots of `p`, repeated according to multiplicity.
///
/// Exact zero low-order coefficients are deflated as roots at the origin.
/// The remaining roots must satisfy
/// `|p(r)| <= 1e-9 * max|c_k| * (1 + |r|)^deg`, otherwise the call fails.
pub fn find_roots(p: &Polynomial) -> Result<Vec<Complex64>> {
    let degree = match p.degree() {
        Some(d) if d >= 1 => d,
        _ => {
            return Err(Error::InvalidArgument(
                "root finding needs degree >= 1".into(),
            ))
        }
    };
    let zeros = p.coeffs().iter().take_while(|c| c.norm() == 0.0).count();
    let mut roots = vec![Complex64::new(0.0, 0.0); zeros];
    let reduced = Polynomial::new(p.coeffs()[zeros..].to_vec());
    if reduced.degree() == Some(0) {
        return Ok(roots);
    }
    roots.extend(aberth(&reduced)?);

    let scale = p.max_abs_coeff();
    for r in &roots {
        let bound = 1e-9 * scale * (1.0 + r.norm()).powi(degree as i32);
        if !(p.eval(*r).norm() <= bound) {
            return Err(Error::NoConvergence {
                what: "Aberth root iteration",
                iterations: MAX_ITERATIONS,
            });
        }
    }
    Ok(roots)
}

fn aberth(p: &Polynomial) -> Result<Vec<Complex64>> {
    let degree = p.degree().expect("nonzero");
    let lead = p.coeff(degree);
    let monic = Polynomial::new(p.coeffs().iter().map(|c| c / lead).collect());
    if degree == 1 {
        return Ok(vec![-monic.coeff(0)]);
    }

    // Guesses on a circle around the root centroid.
    let center = -monic.coeff(degree - 1) / degree as f64;
    let mut radius = monic.eval(center).norm().powf(1.0 / degree as f64);
    if !radius.is_finite() || radius == 0.0 {
        radius = 1.0;
    }
    let mut z: Vec<Complex64> = (0..degree)
        .map(|k| center + Complex64::from_polar(radius, 2.0 * PI * k as f64 / degree as f64 + 0.4))
        .collect();

    let mut converged = false;
    for _ in 0..MAX_ITERATIONS {
        let mut max_step: f64 = 0.0;
        for k in 0..degree {
            let (value, slope) = monic.eval_with_derivative(z[k]);
            if value.norm() == 0.0 {
                continue;
            }
            let ratio = value / slope;
            let repulsion: Complex64 = (0..degree)
                .filter(|&j| j != k)
                .map(|j| (z[k] - z[j]).inv())
                .sum();
            let step = ratio / (Complex64::new(1.0, 0.0) - ratio * repulsion);
            if !step.is_finite() {
                continue;
            }
            z[k] -= step;
            max_step = max_step.max(step.norm() / (1.0 + z[k].norm()));
        }
        if z.iter().any(|v| !v.is_finite()) {
            break;
        }
        if max_step < 1e-15 {
            converged = true;
            break;
        }
    }
    if !converged && z.iter().any(|v| !v.is_finite()) {
        return Err(Error::NoConvergence {
            what: "Aberth root iteration",
            iterations: MAX_ITERATIONS,
        });
    }

    for root in z.iter_mut() {
        polish(&monic, root);
    }
    Ok(z)
}

/// Newton steps accepted only while they reduce the residual.
fn polish(p: &Polynomial, root: &mut Complex64) {
    let mut residual = p.eval(*root).norm();
    for _ in 0..POLISH_STEPS {
        let (value, slope) = p.eval_with_derivative(*root);
        if slope.norm() == 0.0 {
            return;
        }
        let candidate = *root - value / slope;
        let r = p.eval(candidate).norm();
        if r < residual {
            *root = candidate;
            residual = r;
        } else {
            return;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::build_simple;

    fn sorted(mut v: Vec<Complex64>) -> Vec<Complex64> {
        v.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
        v
    }

    #[test]
    fn difference_of_squares() {
        let r = sorted(find_roots(&Polynomial::from_real(&[-1.0, 0.0, 1.0])).unwrap());
        assert!((r[0] - Complex64::new(-1.0, 0.0)).norm() < 1e-12);
        assert!((r[1] - Complex64::new(1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn double_root() {
        let r = find_roots(&build_simple(2)).unwrap();
        assert_eq!(r.len(), 2);
        for v in r {
            assert!((v + 1.0).norm() < 1e-7, "{v}");
        }
    }

    #[test]
    fn zero_roots_deflated() {
        let r = find_roots(&Polynomial::from_real(&[0.0, 0.0, -2.0, 1.0])).unwrap();
        assert_eq!(r.iter().filter(|v| v.norm() == 0.0).count(), 2);
        assert!(r.iter().any(|v| (v - 2.0).norm() < 1e-12));
    }

    #[test]
    fn constant_rejected() {
        assert!(find_roots(&Polynomial::one()).is_err());
    }
}
