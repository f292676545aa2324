//! Small helpers for points and covectors stored as `&[f64]`.

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn scale(a: &[f64], s: f64) -> Vec<f64> {
    a.iter().map(|x| x * s).collect()
}

/// `a + s * b`
pub fn axpy(a: &[f64], s: f64, b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + s * y).collect()
}

pub fn zeros(n: usize) -> Vec<f64> {
    vec![0.0; n]
}

/// Distance from `p` to the segment `[a, b]`, plus the closest point.
pub fn project_segment(p: &[f64], a: &[f64], b: &[f64]) -> (f64, Vec<f64>) {
    let ab = sub(b, a);
    let len2 = dot(&ab, &ab);
    let s = if len2 == 0.0 {
        0.0
    } else {
        (dot(&sub(p, a), &ab) / len2).clamp(0.0, 1.0)
    };
    let q = axpy(a, s, &ab);
    (dist(p, &q), q)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn segment_projection() {
        let (d, q) = project_segment(&[2.0], &[0.0], &[-1.0]);
        assert_eq!(d, 2.0);
        assert_eq!(q, vec![0.0]);
        let (d, _) = project_segment(&[0.0, 1.0], &[-1.0, 0.0], &[1.0, 0.0]);
        assert!((d - 1.0).abs() < 1e-15);
    }
}
