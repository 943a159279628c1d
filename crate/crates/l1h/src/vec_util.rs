//! Small dense-vector helpers shared across modules.

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm_sq(v: &[f64]) -> f64 {
    dot(v, v)
}

pub(crate) fn norm(v: &[f64]) -> f64 {
    norm_sq(v).sqrt()
}

pub(crate) fn l1_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}

pub(crate) fn linf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |acc, x| acc.max(x.abs()))
}

pub(crate) fn nnz(v: &[f64]) -> usize {
    v.iter().filter(|&&x| x != 0.0).count()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basics() {
        assert_eq!(dot(&[1.0, 2.0], &[3.0, 4.0]), 11.0);
        assert_eq!(norm_sq(&[3.0, 4.0]), 25.0);
        assert_eq!(norm(&[3.0, 4.0]), 5.0);
        assert_eq!(l1_norm(&[1.0, -2.0, 0.5]), 3.5);
        assert_eq!(linf_norm(&[1.0, -2.0, 0.5]), 2.0);
        assert_eq!(linf_norm(&[]), 0.0);
        assert_eq!(nnz(&[0.0, -0.0, 1.0, 1e-300]), 2);
    }
}
