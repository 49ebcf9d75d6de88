use maxmin_lab::smoothing::{smooth_min, smooth_min_gap, smooth_min_gradient, SmoothingParam};
use proptest::prelude::*;

fn p(e: f64) -> SmoothingParam {
    SmoothingParam::new(e).unwrap()
}

fn phi(u: &[f64], e: f64) -> f64 {
    smooth_min(u, p(e)).unwrap()
}

fn grad(u: &[f64], e: f64) -> Vec<f64> {
    smooth_min_gradient(u, p(e)).unwrap()
}

fn loads_and_unit(max_n: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>, Vec<f64>)> {
    (1..=max_n).prop_flat_map(|n| {
        (
            prop::collection::vec(-50.0f64..50.0, n),
            prop::collection::vec(0.0f64..=1.0, n),
            prop::collection::vec(0.0f64..=1.0, n),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    // |u| <= 150 keeps ε·spread below the f64 underflow point of exp
    fn sandwich(u in prop::collection::vec(-150.0f64..150.0, 1..16), e in 0.01f64..=2.0) {
        let min = u.iter().copied().fold(f64::INFINITY, f64::min);
        let v = phi(&u, e);
        if u.len() == 1 {
            prop_assert_eq!(v, u[0]);
        } else {
            let gap = smooth_min_gap(&u, p(e)).unwrap();
            let slack = (u.len() as f64).ln() / e;
            prop_assert!(gap > 0.0 && gap <= slack);
            prop_assert!(v <= min && v >= min - slack);
        }
    }

    #[test]
    fn translation(u in prop::collection::vec(-100.0f64..100.0, 1..16), c in -1e3f64..1e3, e in 0.01f64..=2.0) {
        let shifted: Vec<f64> = u.iter().map(|x| x + c).collect();
        prop_assert!((phi(&shifted, e) - phi(&u, e) - c).abs() <= 1e-9);
    }

    #[test]
    fn gradient_stability((u, v, _) in loads_and_unit(16), e in 0.01f64..=2.0) {
        let g = grad(&u, e);
        let moved: Vec<f64> = u.iter().zip(&v).map(|(a, b)| a + b).collect();
        let h = grad(&moved, e);
        for (a, b) in g.iter().zip(&h) {
            prop_assert!(*b >= (-e).exp() * a * (1.0 - 1e-12));
            prop_assert!(*b <= e.exp() * a * (1.0 + 1e-12));
        }
    }

    #[test]
    fn superadditivity((base, v, _) in loads_and_unit(16), e in 0.01f64..=2.0) {
        let u: Vec<f64> = base.iter().zip(&v).map(|(b, x)| x + b.abs()).collect();
        let diff: Vec<f64> = u.iter().zip(&v).map(|(a, b)| a - b).collect();
        prop_assert!(phi(&diff, e) <= phi(&u, e) - phi(&v, e) + 1e-9);
    }

    #[test]
    fn gradient_comparison((u, v, w) in loads_and_unit(16), e in 0.01f64..=2.0) {
        let after = |x: &[f64]| -> f64 {
            let s: Vec<f64> = u.iter().zip(x).map(|(a, b)| a + b).collect();
            phi(&s, e)
        };
        let (better, worse) = if after(&v) >= after(&w) { (&v, &w) } else { (&w, &v) };
        let g = grad(&u, e);
        let dot = |x: &[f64]| -> f64 { g.iter().zip(x).map(|(a, b)| a * b).sum() };
        prop_assert!(dot(better) >= (-2.0 * e).exp() * dot(worse) - 1e-12);
    }

    #[test]
    fn concavity((u, _, _) in loads_and_unit(16), shift in prop::collection::vec(-20.0f64..20.0, 16), l in 0.0f64..=1.0, e in 0.01f64..=2.0) {
        let u2: Vec<f64> = u.iter().zip(&shift).map(|(a, b)| a + b).collect();
        let mix: Vec<f64> = u.iter().zip(&u2).map(|(a, b)| l * a + (1.0 - l) * b).collect();
        prop_assert!(phi(&mix, e) >= l * phi(&u, e) + (1.0 - l) * phi(&u2, e) - 1e-9);
    }

    #[test]
    fn finite_differences(u in prop::collection::vec(-10.0f64..10.0, 1..16), e in 0.01f64..=2.0) {
        let g = grad(&u, e);
        let h = 1e-5;
        for i in 0..u.len() {
            let (mut up, mut dn) = (u.clone(), u.clone());
            up[i] += h;
            dn[i] -= h;
            let fd = (phi(&up, e) - phi(&dn, e)) / (2.0 * h);
            prop_assert!((fd - g[i]).abs() <= 1e-5);
        }
    }
}
