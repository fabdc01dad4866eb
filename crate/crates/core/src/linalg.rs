use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Thomas algorithm for `A x = rhs`, `A` tridiagonal with `sub[i] = A[i][i-1]`,
/// `diag[i] = A[i][i]`, `sup[i] = A[i][i+1]` (`sub[0]` and `sup[n-1]` unused).
///
/// No pivoting; intended for the diagonally dominant systems of absorbing
/// birth-death chains. Exact when `S` is exact.
pub fn solve_tridiagonal<S: Scalar>(sub: &[S], diag: &[S], sup: &[S], rhs: &[S]) -> Result<Vec<S>> {
    let n = diag.len();
    if sub.len() != n || sup.len() != n || rhs.len() != n {
        return Err(Error::invalid("tridiagonal bands have mismatched lengths"));
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut c = vec![S::zero(); n];
    let mut d = vec![S::zero(); n];
    for i in 0..n {
        let mut pivot = diag[i].clone();
        let mut value = rhs[i].clone();
        if i > 0 {
            pivot -= sub[i].clone() * &c[i - 1];
            value -= sub[i].clone() * &d[i - 1];
        }
        if pivot.is_zero() {
            return Err(Error::invalid(format!("singular tridiagonal system at row {i}")));
        }
        if i + 1 < n {
            c[i] = sup[i].clone() / pivot.clone();
        }
        d[i] = value / pivot;
    }
    for i in (0..n - 1).rev() {
        let next = d[i + 1].clone();
        d[i] -= c[i].clone() * next;
    }
    Ok(d)
}

/// `P_i(hit top before 0)` for a walk on `{0, ..., top}` stepping up with
/// probability `up`, for `i = 0..=top`.
pub fn upper_exit_probabilities<S: Scalar>(up: &S, top: usize) -> Result<Vec<S>> {
    if top == 0 {
        return Err(Error::invalid("interval must contain an interior point"));
    }
    let down = S::one() - up.clone();
    let interior = top - 1;
    let mut out = vec![S::zero(); top + 1];
    out[top] = S::one();
    if interior == 0 {
        return Ok(out);
    }
    // h(i) - up h(i+1) - down h(i-1) = 0, with h(0) = 0, h(top) = 1.
    let sub = vec![S::zero() - down.clone(); interior];
    let diag = vec![S::one(); interior];
    let sup = vec![S::zero() - up.clone(); interior];
    let mut rhs = vec![S::zero(); interior];
    rhs[interior - 1] = up.clone();
    let h = solve_tridiagonal(&sub, &diag, &sup, &rhs)?;
    out[1..top].clone_from_slice(&h);
    Ok(out)
}
