//! Euclidean projections onto the simplex and the ℓ1 ball.

/// Projection of `v` onto `{x ≥ 0, Σx = radius}` by sorting.
pub fn project_simplex(v: &[f64], radius: f64) -> Vec<f64> {
    assert!(radius >= 0.0);
    if v.is_empty() {
        return Vec::new();
    }
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (j, &uj) in u.iter().enumerate() {
        cum += uj;
        let t = (cum - radius) / (j + 1) as f64;
        if uj - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|&x| (x - theta).max(0.0)).collect()
}

/// Projection of `v` onto `{‖x‖₁ ≤ radius}`.
pub fn project_l1_ball(v: &[f64], radius: f64) -> Vec<f64> {
    assert!(radius >= 0.0);
    let l1: f64 = v.iter().map(|x| x.abs()).sum();
    if l1 <= radius {
        return v.to_vec();
    }
    if radius == 0.0 {
        return vec![0.0; v.len()];
    }
    let mag: Vec<f64> = v.iter().map(|x| x.abs()).collect();
    let p = project_simplex(&mag, radius);
    v.iter()
        .zip(p)
        .map(|(&x, m)| if x < 0.0 { -m } else { m })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn simplex_hand_case() {
        let p = project_simplex(&[0.5, 0.5, 2.0], 1.0);
        assert_eq!(p, vec![0.0, 0.0, 1.0]);
        let p = project_simplex(&[0.3, 0.3], 1.0);
        assert!((p[0] - 0.5).abs() < 1e-15 && (p[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn inside_ball_untouched() {
        assert_eq!(project_l1_ball(&[0.2, -0.3], 1.0), vec![0.2, -0.3]);
        assert_eq!(project_l1_ball(&[2.0, -3.0], 0.0), vec![0.0, 0.0]);
    }

    proptest! {
        #[test]
        fn l1_projection_is_optimal(v in proptest::collection::vec(-5.0f64..5.0, 1..12), r in 0.01f64..4.0) {
            let p = project_l1_ball(&v, r);
            let l1: f64 = p.iter().map(|x| x.abs()).sum();
            prop_assert!(l1 <= r * (1.0 + 1e-12) + 1e-14);
            // variational inequality ⟨v − p, q − p⟩ ≤ 0 at the vertices q = ±r e_i
            for i in 0..v.len() {
                for s in [-1.0, 1.0] {
                    let mut ip = 0.0;
                    for j in 0..v.len() {
                        let q = if j == i { s * r } else { 0.0 };
                        ip += (v[j] - p[j]) * (q - p[j]);
                    }
                    prop_assert!(ip <= 1e-9);
                }
            }
        }
    }
}
