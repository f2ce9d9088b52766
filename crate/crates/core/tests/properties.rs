use std::f64::consts::PI;

use faer::{c64, Mat};
use proptest::prelude::*;

use dirac_vacuum::lattice::{build_lattice, coulomb_inner, CurrentDensity, FourierField, LatticeParams};
use dirac_vacuum::pv::{self, EMPotential};
use dirac_vacuum::renorm;
use dirac_vacuum::vacuum::{self, VacuumState};
use dirac_vacuum::{linalg, profiles};

fn params() -> impl Strategy<Value = LatticeParams> {
    (1.0f64..10.0, 1i32..=3, 0.5f64..4.0).prop_map(|(l, n, c)| LatticeParams::new(l, n, c).unwrap())
}

/// Real field (f_-q = conj f_q) with coefficients drawn from `vals`.
fn real_field(p: LatticeParams, vals: &[(f64, f64)]) -> FourierField {
    let mut i = 0;
    FourierField::from_fn(p, |_, _| {
        let (a, b) = vals[i % vals.len()];
        i += 1;
        c64::new(a, b)
    })
    .symmetrize()
}

fn coefficients() -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 1..40)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn lattice_is_closed_under_negation(l in 1.0f64..10.0, n in 0i32..=3, c in 0.1f64..5.0) {
        let lat = build_lattice(l, n, c).unwrap();
        prop_assert!(lat.is_symmetric());
        let neg = lat.negation_map().unwrap();
        for (i, &j) in neg.iter().enumerate() {
            prop_assert_eq!(neg[j], i);
            let (a, b) = (lat.mode(i), lat.mode(j));
            prop_assert_eq!(a, [-b[0], -b[1], -b[2]]);
        }
        for i in 0..lat.num_modes() {
            let k = lat.momentum(i);
            prop_assert!((k[0] * k[0] + k[1] * k[1] + k[2] * k[2]).sqrt() <= c + 1e-12);
        }
    }

    #[test]
    fn coulomb_form_is_symmetric_and_positive(p in params(), a in coefficients(), b in coefficients()) {
        let f = real_field(p, &a);
        let g = real_field(p, &b);
        let fg = coulomb_inner(&f, &g);
        let gf = coulomb_inner(&g, &f);
        prop_assert!((fg - gf).abs() <= 1e-12 * (1.0 + fg.abs()));
        prop_assert!(coulomb_inner(&f, &f) >= 0.0);
        // Cauchy-Schwarz
        prop_assert!(fg * fg <= coulomb_inner(&f, &f) * coulomb_inner(&g, &g) * (1.0 + 1e-10) + 1e-300);
    }

    #[test]
    fn density_json_round_trip_is_exact(p in params(), a in coefficients()) {
        let f = real_field(p, &a);
        let back = FourierField::from_json(&f.to_json()).unwrap();
        prop_assert_eq!(back, f);
    }

    #[test]
    fn transverse_projection_is_idempotent(p in params(), a in coefficients(), b in coefficients(), c in coefficients()) {
        let v = CurrentDensity { components: [real_field(p, &a), real_field(p, &b), real_field(p, &c)] };
        let t = pv::transverse_project(&v);
        let tt = pv::transverse_project(&t);
        for k in 0..3 {
            for (x, y) in t.components[k].coeffs().iter().zip(tt.components[k].coeffs()) {
                prop_assert!((x - y).norm() <= 1e-13);
            }
        }
        for i in 0..t.components[0].len() {
            let q = p.momentum(t.components[0].grid_point(i));
            let div: c64 = (0..3).map(|k| t.components[k].coeffs()[i] * q[k]).sum();
            prop_assert!(div.norm() <= 1e-12 * (1.0 + q.iter().map(|x| x.abs()).sum::<f64>()));
        }
        // gradients are purely longitudinal
        let g = pv::transverse_project(&pv::gradient_field(&real_field(p, &a)));
        prop_assert!(g.max_abs() <= 1e-12);
    }

    #[test]
    fn potential_json_round_trip(p in params(), a in coefficients(), b in coefficients()) {
        let mut cur = CurrentDensity::zeros(p);
        cur.components[2] = real_field(p, &b);
        let pot = EMPotential::new(real_field(p, &a), cur).unwrap();
        prop_assert_eq!(EMPotential::from_json(&pot.to_json()).unwrap(), pot);
    }

    #[test]
    fn coupling_round_trip(alpha in 0.0f64..2.0, ratio in 1.01f64..1e6) {
        let b = renorm::b_constant(ratio).unwrap();
        let ph = renorm::renormalize_coupling(alpha, b).unwrap();
        prop_assert!(ph <= alpha);
        prop_assert!(ph * b < 1.0);
        let back = renorm::bare_coupling(ph, b).unwrap();
        prop_assert!((back - alpha).abs() <= 1e-13 * (1.0 + alpha));
    }

    #[test]
    fn b_constant_is_increasing(r in 0.01f64..1e5, f in 1.001f64..10.0) {
        let b1 = renorm::b_constant(r).unwrap();
        let b2 = renorm::b_constant(r * f).unwrap();
        prop_assert!(b1 > 0.0 && b2 > b1);
    }

    #[test]
    fn pv_sum_rules(m in 0.1f64..3.0, d1 in 0.1f64..5.0, d2 in 0.1f64..5.0) {
        prop_assume!((d1 - d2).abs() > 1e-3);
        let s = pv::PVSetup::new(m, m + d1, m + d2).unwrap();
        let (s0, s2) = s.sum_rules();
        let scale = (m + d1.max(d2)).powi(2) * s.coefficients.iter().map(|c| c.abs()).sum::<f64>();
        prop_assert!(s0.abs() <= 1e-12 * scale);
        prop_assert!(s2.abs() <= 1e-12 * scale);
    }

    #[test]
    fn gaussian_profile_is_real_with_total_charge(p in params(), z in -3.0f64..3.0, w in 0.2f64..3.0) {
        let nu = profiles::gaussian(p, z, w);
        prop_assert!(nu.is_real(0.0));
        prop_assert!((nu.total().re - z).abs() <= 1e-12 * (1.0 + z.abs()));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn projectors_satisfy_constraint(seed in prop::collection::vec(-1.0f64..1.0, 64), frac in 0.0f64..=1.0, mass in 0.3f64..2.0) {
        let lat = build_lattice(2.0 * PI, 1, 1.2).unwrap();
        let n = lat.dim();
        let h = Mat::<c64>::from_fn(n, n, |i, j| c64::new(seed[(3 * i + j) % 64], seed[(5 * i + 7 * j + 1) % 64]));
        let h = linalg::hermitize(h.as_ref());
        let evd = linalg::eigh(h.as_ref()).unwrap();
        let rank = (frac * n as f64).round() as usize;
        let p = linalg::column_projector(evd.vectors.as_ref(), 0, rank);
        let s = VacuumState::from_projector(&p, lat, mass).unwrap();
        prop_assert!(vacuum::check_constraint(&s, 1e-10));
        prop_assert!(vacuum::relative_trace(&s) >= -1e-10);
        let blocks = vacuum::block_decompose(&s);
        let back = blocks.reassemble();
        let diff = &back - &s.matrix().to_owned();
        prop_assert!(linalg::max_abs(diff.as_ref()) <= 1e-12);
    }

    #[test]
    fn fit_recovers_synthetic_series(c1 in -2.0f64..2.0, c2 in -2.0f64..2.0, c3 in -2.0f64..2.0) {
        let p = LatticeParams::new(2.0 * PI, 1, 1.0).unwrap();
        let couplings = [0.02, 0.04, 0.06, 0.08, 0.1];
        let mut one = FourierField::zeros(p);
        one.set([1, 0, 0], c64::new(1.0, 0.0)).unwrap();
        let data: Vec<FourierField> = couplings
            .iter()
            .map(|&a| one.scale(c1 * a + c2 * a * a + c3 * a * a * a))
            .collect();
        let fit = renorm::fit_series(&data, &couplings, &couplings, 2, 0.0).unwrap();
        let got = [fit.leading.get([1, 0, 0]).re, fit.coefficients[0].get([1, 0, 0]).re, fit.coefficients[1].get([1, 0, 0]).re];
        prop_assert!((got[0] - c1).abs() <= 1e-9);
        prop_assert!((got[1] - c2).abs() <= 1e-7);
        prop_assert!((got[2] - c3).abs() <= 1e-5);
        prop_assert!(fit.residual_norm <= 1e-12);
    }
}
