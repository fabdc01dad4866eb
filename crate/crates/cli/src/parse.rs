//! Value parsers for probabilities and grids.

use ruin_core::scalar::{parse_rational, rational_to_f64};
use ruin_core::Rational;

/// Longest grid a range expression may expand to.
const MAX_GRID: usize = 1_000_000;

pub fn probability(s: &str) -> Result<Rational, String> {
    let p = parse_rational(s).map_err(|e| e.to_string())?;
    if p < Rational::from_integer(0.into()) || p > Rational::from_integer(1.into()) {
        return Err(format!("{s} is not in [0, 1]"));
    }
    Ok(p)
}

pub fn number(s: &str) -> Result<f64, String> {
    let x: f64 = s.trim().parse().map_err(|_| format!("{s:?} is not a number"))?;
    if !x.is_finite() {
        return Err(format!("{s} is not finite"));
    }
    Ok(x)
}

/// `a:b:step` (inclusive, exact stepping) or a comma-separated list.
pub fn rational_grid(s: &str) -> Result<Vec<Rational>, String> {
    let parse = |x: &str| parse_rational(x).map_err(|e| e.to_string());
    let parts: Vec<&str> = s.split(':').collect();
    match parts.as_slice() {
        [single] => single.split(',').map(|x| parse(x)).collect(),
        [a, b, step] => {
            let (a, b, step) = (parse(a)?, parse(b)?, parse(step)?);
            if step <= Rational::from_integer(0.into()) {
                return Err(format!("grid step in {s:?} must be positive"));
            }
            if a > b {
                return Err(format!("grid {s:?} runs backwards"));
            }
            let mut out = Vec::new();
            let mut x = a;
            while x <= b {
                if out.len() == MAX_GRID {
                    return Err(format!("grid {s:?} has more than {MAX_GRID} points"));
                }
                out.push(x.clone());
                x += &step;
            }
            Ok(out)
        }
        _ => Err(format!("grid {s:?} is neither a:b:step nor a comma list")),
    }
}

pub fn probability_grid(s: &str) -> Result<Vec<Rational>, String> {
    let grid = rational_grid(s)?;
    let (zero, one) = (Rational::from_integer(0.into()), Rational::from_integer(1.into()));
    if let Some(bad) = grid.iter().find(|p| **p < zero || **p > one) {
        return Err(format!("grid point {bad} is not in [0, 1]"));
    }
    Ok(grid)
}

pub fn float_grid(s: &str) -> Result<Vec<f64>, String> {
    Ok(rational_grid(s)?.iter().map(rational_to_f64).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Horizon {
    Auto,
    Fixed(u64),
}

pub fn horizon(s: &str) -> Result<Horizon, String> {
    if s.trim() == "auto" {
        return Ok(Horizon::Auto);
    }
    s.trim()
        .parse()
        .map(Horizon::Fixed)
        .map_err(|_| format!("{s:?} is neither a step count nor \"auto\""))
}
