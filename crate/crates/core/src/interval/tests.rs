use super::*;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn iv(lo: f64, hi: f64) -> Interval {
    Interval::new(lo, hi).unwrap()
}

fn ivec(pairs: &[(f64, f64)]) -> IntervalVector {
    IntervalVector::new(pairs.iter().map(|&(l, h)| iv(l, h)).collect()).unwrap()
}

/// Every vertex of `{b : lo <= b <= hi, sum b = 1}`: all coordinates but one
/// sit at a bound, the free one absorbs the rest.
fn simplex_vertices(b: &IntervalVector) -> Vec<Vec<f64>> {
    let n = b.len();
    let mut out = Vec::new();
    for free in 0..n {
        for mask in 0..(1u32 << (n - 1)) {
            let mut p = vec![0.0; n];
            let mut bit = 0;
            let mut acc = 0.0;
            for (i, slot) in p.iter_mut().enumerate() {
                if i == free {
                    continue;
                }
                *slot = if mask & (1 << bit) != 0 { b[i].hi() } else { b[i].lo() };
                acc += *slot;
                bit += 1;
            }
            let rest = 1.0 - acc;
            if rest >= b[free].lo() - 1e-12 && rest <= b[free].hi() + 1e-12 {
                p[free] = rest;
                out.push(p);
            }
        }
    }
    out
}

fn brute_force_dot(a: &IntervalVector, b: &IntervalVector) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for v in simplex_vertices(b) {
        let l: f64 = a.iter().zip(&v).map(|(x, w)| x.lo() * w).sum();
        let h: f64 = a.iter().zip(&v).map(|(x, w)| x.hi() * w).sum();
        lo = lo.min(l);
        hi = hi.max(h);
    }
    (lo, hi)
}

fn random_box(rng: &mut impl Rng, n: usize) -> IntervalVector {
    IntervalVector::new(
        (0..n)
            .map(|_| {
                let x: f64 = rng.random();
                let y: f64 = rng.random();
                iv(x.min(y), x.max(y))
            })
            .collect(),
    )
    .unwrap()
}

/// Coherent box around a random distribution.
fn random_coherent(rng: &mut impl Rng, n: usize) -> IntervalVector {
    let raw: Vec<f64> = (0..n).map(|_| rng.random::<f64>() + 1e-3).collect();
    let s: f64 = raw.iter().sum();
    IntervalVector::new(
        raw.iter()
            .map(|x| {
                let p = x / s;
                let lo = (p - rng.random::<f64>() * 0.5).max(0.0);
                let hi = (p + rng.random::<f64>() * 0.5).min(1.0);
                iv(lo, hi)
            })
            .collect(),
    )
    .unwrap()
}

#[test]
fn add_examples() {
    let s = iv(0.1, 0.2) + iv(0.3, 0.5);
    assert!((s.lo() - 0.4).abs() < 1e-15 && (s.hi() - 0.7).abs() < 1e-15);
    assert!(s.contains(0.1 + 0.3) && s.contains(0.2 + 0.5));
    assert_eq!(Interval::ZERO + iv(0.3, 0.6), iv(0.3, 0.6));
    assert_eq!(iv(0.25, 0.25) + iv(0.25, 0.25), iv(0.5, 0.5));
}

#[test]
fn mul_examples() {
    assert_eq!(Interval::ONE.checked_mul(iv(0.3, 0.6)).unwrap(), iv(0.3, 0.6));
    assert_eq!(Interval::UNIT.checked_mul(iv(0.3, 0.6)).unwrap(), iv(0.0, 0.6));
    // Corner products of [0.2,0.4]x[0.5,0.5]: 0.1, 0.1, 0.2, 0.2.
    let p = iv(0.2, 0.4).checked_mul(iv(0.5, 0.5)).unwrap();
    assert_eq!(p, iv(0.2 * 0.5, 0.4 * 0.5));
}

#[test]
fn mul_rejects_negative_bounds() {
    let neg = Interval::new(-0.1, 0.2).unwrap();
    assert!(matches!(neg.checked_mul(Interval::UNIT), Err(IntervalError::NegativeBound { .. })));
}

#[test]
fn invalid_bounds_rejected() {
    assert!(Interval::new(0.5, 0.4).is_err());
    assert!(Interval::new(f64::NAN, 0.4).is_err());
}

#[test]
fn ar_dot_point_inputs_reduce_to_dot_product() {
    let a = ivec(&[(0.2, 0.2), (0.8, 0.8)]);
    let b = ivec(&[(0.5, 0.5), (0.5, 0.5)]);
    let r = ar_dot(&a, &b).unwrap();
    assert!(r.contains(0.5));
    assert!(r.width() < 1e-15);
}

#[test]
fn ar_dot_against_vacuous_is_min_max() {
    let a = ivec(&[(0.1, 0.2), (0.6, 0.7)]);
    let r = ar_dot(&a, &vacuous(2).unwrap()).unwrap();
    assert_eq!(r, iv(0.1, 0.7));
}

#[test]
fn ar_dot_boxed_example() {
    // Vertices of the feasible b set: (0.2,0.8), (0.5,0.5).
    // Lower: min(0.1*0.2+0.5*0.8, 0.1*0.5+0.5*0.5) = 0.30
    // Upper: max(0.3*0.2+0.9*0.8, 0.3*0.5+0.9*0.5) = 0.78
    let a = ivec(&[(0.1, 0.3), (0.5, 0.9)]);
    let b = ivec(&[(0.2, 0.6), (0.5, 0.8)]);
    let (blo, bhi) = brute_force_dot(&a, &b);
    assert!((blo - 0.30).abs() < 1e-12 && (bhi - 0.78).abs() < 1e-12);
    let r = ar_dot(&a, &b).unwrap();
    assert!((r.lo() - 0.30).abs() < 1e-12, "{r:?}");
    assert!((r.hi() - 0.78).abs() < 1e-12, "{r:?}");
}

#[test]
fn ar_dot_rejects_incoherent_b() {
    let a = ivec(&[(0.1, 0.2), (0.3, 0.4)]);
    let short = ivec(&[(0.1, 0.2), (0.1, 0.3)]);
    let over = ivec(&[(0.6, 0.7), (0.6, 0.7)]);
    assert!(matches!(ar_dot(&a, &short), Err(IntervalError::Incoherent { .. })));
    assert!(matches!(ar_dot(&a, &over), Err(IntervalError::Incoherent { .. })));
    assert!(matches!(
        ar_dot(&a, &vacuous(3).unwrap()),
        Err(IntervalError::LengthMismatch(2, 3))
    ));
}

#[test]
fn ar_dot_matches_brute_force_on_small_vectors() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..2000 {
        let n = rng.random_range(1..=4);
        let a = random_box(&mut rng, n);
        let b = random_coherent(&mut rng, n);
        let (lo, hi) = brute_force_dot(&a, &b);
        let r = ar_dot(&a, &b).unwrap();
        assert!((r.lo() - lo).abs() <= 1e-9, "lo {r:?} vs {lo} for a={a:?} b={b:?}");
        assert!((r.hi() - hi).abs() <= 1e-9, "hi {r:?} vs {hi} for a={a:?} b={b:?}");
    }
}

#[test]
fn ar_dot_contains_random_point_selections() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..200 {
        let n = rng.random_range(2..=4);
        let a = random_box(&mut rng, n);
        let b = random_coherent(&mut rng, n);
        let r = ar_dot(&a, &b).unwrap();
        let vertices = simplex_vertices(&b);
        for _ in 0..1000 {
            // Random convex combination of feasible vertices.
            let w: Vec<f64> = vertices.iter().map(|_| rng.random::<f64>()).collect();
            let ws: f64 = w.iter().sum();
            let bstar: Vec<f64> = (0..n)
                .map(|i| vertices.iter().zip(&w).map(|(v, wi)| v[i] * wi / ws).sum())
                .collect();
            let astar: Vec<f64> =
                a.iter().map(|x| x.lo() + rng.random::<f64>() * x.width()).collect();
            let x: f64 = astar.iter().zip(&bstar).map(|(p, q)| p * q).sum();
            assert!(r.contains_with_slack(x, 1e-12), "{x} not in {r:?}");
        }
    }
}

#[test]
fn normalize_examples() {
    let v = ivec(&[(0.2, 0.4), (0.3, 0.5)]).normalize().unwrap();
    let want = [(0.2 / 0.7, 0.4 / 0.7), (0.3 / 0.7, 0.5 / 0.7)];
    for (got, (lo, hi)) in v.iter().zip(want) {
        assert!((got.lo() - lo).abs() < 1e-12 && (got.hi() - hi).abs() < 1e-12, "{v:?}");
    }
    assert!(v.is_coherent());

    let p = ivec(&[(0.3, 0.3), (0.7, 0.7)]).normalize().unwrap();
    assert!(p.contains_point(&[0.3, 0.7], 0.0));
    assert!(p.width() < 1e-15);

    assert_eq!(vacuous(2).unwrap().normalize().unwrap(), vacuous(2).unwrap());
}

#[test]
fn normalize_all_zero_is_an_error() {
    let z = ivec(&[(0.0, 0.0), (0.0, 0.0)]);
    assert_eq!(z.normalize(), Err(IntervalError::Degenerate));
}

#[test]
fn normalize_single_possible_state() {
    // Only the first entry can be nonzero, so it must carry all the mass.
    let v = ivec(&[(0.0, 0.3), (0.0, 0.0)]).normalize().unwrap();
    assert_eq!(v, ivec(&[(1.0, 1.0), (0.0, 0.0)]));
}

#[test]
fn vacuous_examples() {
    assert_eq!(vacuous(2).unwrap(), ivec(&[(0.0, 1.0), (0.0, 1.0)]));
    assert_eq!(vacuous(1).unwrap(), ivec(&[(0.0, 1.0)]));
    let v4 = vacuous(4).unwrap();
    assert_eq!(v4.len(), 4);
    assert!(v4.is_coherent() && v4.is_vacuous());
    assert_eq!(vacuous(0), Err(IntervalError::Empty));
}

#[test]
fn coherence_tolerance() {
    assert!(ivec(&[(0.5, 0.5), (0.5 + 5e-10, 0.6)]).is_coherent());
    assert!(!ivec(&[(0.5, 0.5), (0.5 + 1e-8, 0.6)]).is_coherent());
}

#[test]
fn product_of_coherent_factors_is_coherent() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..500 {
        let (nx, ny) = (rng.random_range(2..=4), rng.random_range(2..=4));
        let x = random_coherent(&mut rng, nx);
        let y = random_coherent(&mut rng, ny);
        let joint: Vec<Interval> =
            x.iter().flat_map(|p| y.iter().map(move |q| p.checked_mul(*q).unwrap())).collect();
        assert!(IntervalVector::new(joint).unwrap().is_coherent());
    }
}

fn coherent_strategy() -> impl Strategy<Value = IntervalVector> {
    (2usize..=4, any::<u64>()).prop_map(|(n, seed)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        random_coherent(&mut rng, n)
    })
}

proptest! {
    #[test]
    fn ar_dot_mm_identity(los in prop::collection::vec(0.0f64..1.0, 1..6), extra in prop::collection::vec(0.0f64..1.0, 6)) {
        let a = IntervalVector::new(
            los.iter().zip(&extra).map(|(&l, &e)| iv(l, l + e)).collect()
        ).unwrap();
        let r = ar_dot(&a, &vacuous(a.len()).unwrap()).unwrap();
        let min_lo = a.iter().map(|x| x.lo()).fold(f64::INFINITY, f64::min);
        let max_hi = a.iter().map(|x| x.hi()).fold(0.0, f64::max);
        prop_assert_eq!(r, iv(min_lo, max_hi));
    }

    #[test]
    fn ar_dot_narrows_monotonically(b in coherent_strategy(), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = b.len();
        let a = random_box(&mut rng, n);
        // Shrink both towards a point inside them; b' must stay coherent.
        let centre = simplex_vertices(&b)[0].clone();
        let t: f64 = rng.random();
        let b2 = IntervalVector::new(b.iter().zip(&centre).map(|(x, &c)| {
            iv(x.lo() + (c - x.lo()) * t, x.hi() - (x.hi() - c) * t)
        }).collect()).unwrap();
        let a2 = IntervalVector::new(a.iter().map(|x| {
            let m = x.midpoint();
            iv(x.lo() + (m - x.lo()) * t, x.hi() - (x.hi() - m) * t)
        }).collect()).unwrap();
        prop_assume!(b2.is_coherent());
        let wide = ar_dot(&a, &b).unwrap();
        let narrow = ar_dot(&a2, &b2).unwrap();
        prop_assert!(narrow.lo() >= wide.lo() - 1e-12 && narrow.hi() <= wide.hi() + 1e-12,
            "{:?} not within {:?}", narrow, wide);
    }

    #[test]
    fn normalize_contains_point_normalizations(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = rng.random_range(1..=5);
        let v = random_box(&mut rng, n);
        prop_assume!(v.sum_hi() > 0.0);
        let nv = v.normalize().unwrap();
        prop_assert!(nv.is_coherent());
        for _ in 0..200 {
            let p: Vec<f64> = v.iter().map(|x| x.lo() + rng.random::<f64>() * x.width()).collect();
            let s: f64 = p.iter().sum();
            if s <= 0.0 { continue; }
            let q: Vec<f64> = p.iter().map(|x| x / s).collect();
            prop_assert!(nv.contains_point(&q, 1e-12), "{:?} not in {:?}", q, nv);
        }
    }
}
