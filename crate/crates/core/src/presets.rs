//! Named offspring laws used by examples, tests and the command line.

use std::f64::consts::LN_2;

use crate::error::{Error, Result};
use crate::law::{bisect_increasing, Atom, OffspringLaw};

/// Two children with `log A ~ N(-2 ln 2, 2 ln 2)`: `psi(1) = psi'(1) = 0`,
/// `sigma^2 = 2 ln 2`.
pub fn critical_lognormal() -> OffspringLaw {
    OffspringLaw::LogNormal { n_children: 2, mu: -2.0 * LN_2, s2: 2.0 * LN_2 }
}

/// Two children with `log A ~ N(-4 ln 2, 8 ln 2)`: `psi(1/2) = psi'(1/2) = 0`.
pub fn boundary_lognormal() -> OffspringLaw {
    OffspringLaw::LogNormal { n_children: 2, mu: -4.0 * LN_2, s2: 8.0 * LN_2 }
}

/// One child with `A = 1`: the walk is simple random walk on a half-line.
pub fn unary() -> OffspringLaw {
    OffspringLaw::DiscreteTable { atoms: vec![Atom { prob: 1.0, a_values: vec![1.0] }] }
}

/// Two children with `A = 1/2`.
pub fn binary_half() -> OffspringLaw {
    OffspringLaw::DiscreteTable { atoms: vec![Atom { prob: 1.0, a_values: vec![0.5, 0.5] }] }
}

/// Two children that both carry mark `a` with probability `p` and mark `b`
/// otherwise, with `p` and `b` chosen so that `psi(1) = psi'(1) = 0`.
/// Requires `a > 1`.
pub fn critical_binary_table(a: f64) -> Result<OffspringLaw> {
    if !(a > 1.0 && a.is_finite()) {
        return Err(Error::InvalidArgument(format!("mark a = {a} must exceed 1")));
    }
    // With x = (1 - p) b = 1/2 - p a, criticality reads p a ln a + x ln(x / (1 - p)) = 0.
    let g = |p: f64| {
        let x = 0.5 - p * a;
        p * a * a.ln() + x * (x / (1.0 - p)).ln()
    };
    let hi = (0.5 / a).min(1.0) * (1.0 - 1e-12);
    if g(hi) <= 0.0 {
        return Err(Error::InvalidArgument(format!("no critical table with mark a = {a}")));
    }
    let p = bisect_increasing(g, 1e-12, hi, 1e-15);
    let b = (0.5 - p * a) / (1.0 - p);
    Ok(OffspringLaw::DiscreteTable {
        atoms: vec![Atom { prob: p, a_values: vec![a, a] }, Atom { prob: 1.0 - p, a_values: vec![b, b] }],
    })
}

/// The table above with `a = 3/2`.
pub fn critical_binary() -> OffspringLaw {
    critical_binary_table(1.5).expect("a = 3/2 admits a critical table")
}

/// Looks a preset up by name.
pub fn by_name(name: &str) -> Option<OffspringLaw> {
    match name {
        "critical_lognormal" => Some(critical_lognormal()),
        "boundary_lognormal" => Some(boundary_lognormal()),
        "unary" => Some(unary()),
        "binary_half" => Some(binary_half()),
        "critical_binary" => Some(critical_binary()),
        _ => None,
    }
}

pub const NAMES: [&str; 5] = ["critical_lognormal", "boundary_lognormal", "unary", "binary_half", "critical_binary"];

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn critical_presets_are_critical() {
        for law in [critical_lognormal(), critical_binary()] {
            assert!(law.psi(1.0).unwrap().abs() < 1e-9);
            assert!(law.psi_prime(1.0).unwrap().abs() < 1e-9);
        }
        let law = boundary_lognormal();
        assert!(law.psi(0.5).unwrap().abs() < 1e-12);
        assert!(law.psi_prime(0.5).unwrap().abs() < 1e-12);
    }

    #[test]
    fn names_resolve() {
        assert!(NAMES.iter().all(|n| by_name(n).is_some()));
        assert!(by_name("nope").is_none());
    }
}
