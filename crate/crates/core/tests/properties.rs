//! Property-based checks plus a brute-force finite-field cross-check of the
//! point-count oracle.

use num_traits::One;
use proptest::prelude::*;

use quiverdt::dt::{
    integer_from_rational_dt, rational_from_integer_dt, DTTable, TableKind,
};
use quiverdt::oracle::{stable_point_count, Poly};
use quiverdt::quiver::{divisibility, DimVector, Quiver, StabilityPoint};
use quiverdt::rational::rat;
use quiverdt::trees::f_coefficient;
use quiverdt::{Int, Rat, RunConfig};

fn arb_quiver(max_d: usize) -> impl Strategy<Value = Quiver> {
    (2..=max_d).prop_flat_map(|d| {
        proptest::collection::vec(proptest::collection::vec(0i64..=3, d), d)
            .prop_map(|arrows| Quiver::new(arrows).unwrap())
    })
}

proptest! {
    #[test]
    fn skew_form_is_antisymmetric_and_bilinear(q in arb_quiver(4), seed in 0u64..1000) {
        let d = q.vertex_count();
        let mut rng_vals = seed;
        let mut next = || {
            rng_vals = rng_vals.wrapping_mul(6364136223846793005).wrapping_add(1);
            ((rng_vals >> 33) % 7) as i64
        };
        let x = DimVector((0..d).map(|_| next()).collect());
        let y = DimVector((0..d).map(|_| next()).collect());
        let z = DimVector((0..d).map(|_| next()).collect());
        let s = |a: &DimVector, b: &DimVector| q.skew_form(a, b).unwrap();
        prop_assert_eq!(s(&x, &y), -s(&y, &x));
        prop_assert_eq!(s(&x, &x), 0);
        prop_assert_eq!(s(&x.add(&y), &z), s(&x, &z) + s(&y, &z));
        prop_assert_eq!(s(&x, &y.add(&z)), s(&x, &y) + s(&x, &z));
    }

    #[test]
    fn skew_form_is_commutator_of_euler_form(q in arb_quiver(4), xs in proptest::collection::vec(0i64..=5, 4), ys in proptest::collection::vec(0i64..=5, 4)) {
        let d = q.vertex_count();
        let x = DimVector(xs[..d].to_vec());
        let y = DimVector(ys[..d].to_vec());
        let chi_xy = q.euler_form(&x, &y).unwrap();
        let chi_yx = q.euler_form(&y, &x).unwrap();
        // sign convention: <e_i, e_j> = a_ij - a_ji = chi(y,x) - chi(x,y)
        prop_assert_eq!(q.skew_form(&x, &y).unwrap(), chi_yx - chi_xy);
    }

    #[test]
    fn divisibility_scales(coords in proptest::collection::vec(0i64..=5, 2..=4), k in 1i64..=5) {
        let g = DimVector(coords);
        prop_assume!(!g.is_zero());
        let base = divisibility(&g).unwrap();
        prop_assert_eq!(divisibility(&g.scale(k)).unwrap(), k * base);
    }

    #[test]
    fn dt_round_trip_on_one_ray(
        base in proptest::collection::vec(0i64..=3, 2..=3),
        div in 1i64..=4,
        values in proptest::collection::vec(-9i64..=9, 4),
    ) {
        let g = DimVector(base);
        prop_assume!(!g.is_zero());
        let prim = g.div_exact(divisibility(&g).unwrap()).unwrap();
        let mut integer = DTTable::new(TableKind::IntegerOmega);
        for k in 1..=div {
            integer.insert(prim.scale(k), rat(values[(k - 1) as usize])).unwrap();
        }
        let mut rational = DTTable::new(TableKind::RationalOmega);
        let support: Vec<DimVector> = integer.support().cloned().collect();
        for v in &support {
            let obar = rational_from_integer_dt(&integer, v).unwrap();
            rational.insert(v.clone(), obar).unwrap();
        }
        for v in &support {
            let (value, integral) = integer_from_rational_dt(&rational, v).unwrap();
            prop_assert!(integral);
            prop_assert_eq!(value, integer.get(v));
        }
    }

    #[test]
    fn rational_dt_on_primitive_ray_is_identity(v in -20i64..=20, coords in proptest::collection::vec(0i64..=4, 2..=3)) {
        let g = DimVector(coords);
        prop_assume!(!g.is_zero() && divisibility(&g) == Ok(1));
        let mut table = DTTable::new(TableKind::IntegerOmega);
        table.insert(g.clone(), rat(v)).unwrap();
        // no multicovers below a primitive vector
        prop_assert_eq!(rational_from_integer_dt(&table, &g).unwrap(), rat(v));
    }
}

#[test]
fn f_coefficient_is_symmetric_in_the_parts() {
    let q = Quiver::kronecker(3);
    let theta = StabilityPoint::from_integers(&[2, -1]);
    let e1 = DimVector::unit(2, 0);
    let e2 = DimVector::unit(2, 1);
    let cfg = RunConfig::default();
    let orders = [
        vec![e1.clone(), e2.clone(), e2.clone()],
        vec![e2.clone(), e1.clone(), e2.clone()],
        vec![e2.clone(), e2.clone(), e1.clone()],
    ];
    let values: Vec<Int> = orders
        .iter()
        .map(|parts| f_coefficient(&q, parts, &theta, &cfg).unwrap())
        .collect();
    assert_eq!(values[0], values[1]);
    assert_eq!(values[1], values[2]);
}

// ---------------------------------------------------------------------------
// Brute-force oracle cross-check
// ---------------------------------------------------------------------------

/// All vectors of F_q^2 as coordinate pairs.
fn plane(q: i64) -> Vec<(i64, i64)> {
    let mut v = Vec::new();
    for a in 0..q {
        for b in 0..q {
            v.push((a, b));
        }
    }
    v
}

/// The q + 1 lines of F_q^2 as point sets.
fn lines(q: i64) -> Vec<Vec<(i64, i64)>> {
    let mut dirs = vec![(1i64, 0)];
    for s in 0..q {
        dirs.push((s, 1));
    }
    dirs.into_iter()
        .map(|(a, b)| (0..q).map(|t| (t * a % q, t * b % q)).collect())
        .collect()
}

/// Brute-force count of theta-stable representations of the 3-Kronecker
/// quiver with dimension vector (1, 2) over F_q, theta = (2, -1): a
/// representation is a triple of vectors in F_q^2; destabilizing subreps are
/// (1, 0) (all vectors zero) and (1, 1) (all vectors on a common line).
fn brute_force_stable_reps(q: i64) -> i64 {
    let pts = plane(q);
    let ls = lines(q);
    let mut stable = 0i64;
    for v1 in &pts {
        for v2 in &pts {
            for v3 in &pts {
                let destabilized = ls
                    .iter()
                    .any(|l| l.contains(v1) && l.contains(v2) && l.contains(v3));
                if !destabilized {
                    stable += 1;
                }
            }
        }
    }
    stable
}

fn gl_order(q: i64, n: i64) -> i64 {
    let mut o = 1i64;
    for k in 0..n {
        o *= q.pow(n as u32) - q.pow(k as u32);
    }
    o
}

#[test]
fn oracle_matches_brute_force_finite_field_count() {
    let quiver = Quiver::kronecker(3);
    let g = DimVector(vec![1, 2]);
    let theta = StabilityPoint::from_integers(&[2, -1]);
    let s = stable_point_count(&quiver, &g, &theta).unwrap();
    assert_eq!(
        s,
        Poly::from_coeffs(vec![Rat::one(), Rat::one(), Rat::one()]),
        "3-Kronecker (1,2) stable count should be q^2 + q + 1"
    );
    for q in [2i64, 3] {
        let reps = brute_force_stable_reps(q);
        // moduli points = (q - 1) * #stable / |GL_1 x GL_2|
        let expected = Rat::new(
            Int::from((q - 1) * reps),
            Int::from(gl_order(q, 1) * gl_order(q, 2)),
        );
        let got = s.eval(&Rat::from_integer(Int::from(q)));
        assert_eq!(got, expected, "q = {q}: oracle {got} vs brute force {expected}");
        assert!(expected.denom().is_one());
    }
}
