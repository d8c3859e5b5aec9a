//! Cross-checks of the library against independent computations.

use approx::assert_relative_eq;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sparsespec::bounds::{gronwall_envelope, divergence_sequence};
use sparsespec::logspace::{LogMat2, LogReal, LogVec2};
use sparsespec::spectral::form::{flambda, flambda_form_closed, negative_form_threshold, quadratic_form};
use sparsespec::spectral::{shoot_negative_eigenvalue, BoundaryCondition, DenseProblem};
use sparsespec::transfer::{bump_propagator, propagate, vop_coordinates};
use sparsespec::{example_potential, Bump, Profile, SparsePotential};

/// `m · 2^e` with `m` in `[0.5, 1)`, enough range for `e^{±600}` products.
#[derive(Clone, Copy, Debug)]
struct Ext {
    m: f64,
    e: i64,
}

impl Ext {
    fn norm(m: f64, e: i64) -> Ext {
        if m == 0.0 {
            return Ext { m: 0.0, e: 0 };
        }
        let bits = m.abs().to_bits();
        let raw = ((bits >> 52) & 0x7ff) as i64;
        let shift = raw - 1022;
        let mant = f64::from_bits((bits & !(0x7ffu64 << 52)) | (1022u64 << 52));
        Ext {
            m: mant.copysign(m),
            e: e + shift,
        }
    }

    fn mul(self, o: Ext) -> Ext {
        Ext::norm(self.m * o.m, self.e + o.e)
    }

    fn add(self, o: Ext) -> Ext {
        if self.m == 0.0 {
            return o;
        }
        if o.m == 0.0 {
            return self;
        }
        let top = self.e.max(o.e);
        let scale = |x: Ext| x.m * 2f64.powi((x.e - top).max(-1100) as i32);
        Ext::norm(scale(self) + scale(o), top)
    }

    fn ln_abs(self) -> f64 {
        self.m.abs().ln() + self.e as f64 * std::f64::consts::LN_2
    }

    fn to_log(self) -> LogReal {
        LogReal::from_log(self.ln_abs()).scale(self.m.signum())
    }
}

fn random_ext(rng: &mut ChaCha8Rng) -> Ext {
    let e = rng.gen_range(-432i64..=432);
    let m: f64 = rng.gen_range(0.5..1.0);
    let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
    Ext::norm(sign * m, e)
}

#[test]
fn log_matrix_apply_matches_extended_exponent_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut checked = 0;
    for _ in 0..20_000 {
        let m: Vec<Ext> = (0..4).map(|_| random_ext(&mut rng)).collect();
        let v: Vec<Ext> = (0..2).map(|_| random_ext(&mut rng)).collect();
        let lm = LogMat2([[m[0].to_log(), m[1].to_log()], [m[2].to_log(), m[3].to_log()]]);
        let lv = LogVec2::new(v[0].to_log(), v[1].to_log());
        let got = lm.apply(lv).value;
        for row in 0..2 {
            let a = m[2 * row].mul(v[0]);
            let b = m[2 * row + 1].mul(v[1]);
            let exact = a.add(b);
            // skip rows whose two terms nearly cancel
            if exact.ln_abs() < a.ln_abs().max(b.ln_abs()) - 1.0 {
                continue;
            }
            let g = got.0[row];
            assert_eq!(g.to_real().signum(), exact.m.signum());
            assert!(
                (g.logmag() - exact.ln_abs()).abs() < 1e-12,
                "row {row}: {} vs {}",
                g.logmag(),
                exact.ln_abs()
            );
            checked += 1;
        }
    }
    assert!(checked > 20_000);
}

/// Direct RK4 on `f'' = V f` over `[0, end]` with steps aligned to `breaks`.
fn direct_rk4(p: &SparsePotential, theta: f64, breaks: &[f64], per_piece: usize) -> (f64, f64) {
    let (s, c) = theta.sin_cos();
    let (mut f, mut g) = (c, s);
    for w in breaks.windows(2) {
        let h = (w[1] - w[0]) / per_piece as f64;
        let mid = 0.5 * (w[0] + w[1]);
        let v = p.evaluate_real(mid);
        for _ in 0..per_piece {
            let k1 = (g, v * f);
            let k2 = (g + 0.5 * h * k1.1, v * (f + 0.5 * h * k1.0));
            let k3 = (g + 0.5 * h * k2.1, v * (f + 0.5 * h * k2.0));
            let k4 = (g + h * k3.1, v * (f + h * k3.0));
            f += h / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0);
            g += h / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1);
        }
    }
    (f, g)
}

#[test]
fn propagated_data_matches_direct_integration() {
    let p = SparsePotential::new("one", vec![Bump::constant(10.0, 0.5, 1.0).unwrap()]).unwrap();
    for theta in [0.0, 0.4, 1.2, std::f64::consts::FRAC_PI_2] {
        let states = propagate(&p, theta, 0.0, 1, None).unwrap();
        let c1 = states[1].coeffs.to_reals();
        let (f, g) = direct_rk4(&p, theta, &[0.0, 9.5, 10.5], 4000);
        let scale = f.abs().max(g.abs());
        assert!((c1[0] - f).abs() < 1e-8 * scale);
        assert!((c1[1] - g).abs() < 1e-8 * scale);
    }
}

#[test]
fn sampled_profile_matches_direct_integration() {
    let bump = Bump::new(LogReal::from_real(4.0), 0.5, 3.0, Profile::Samples(vec![1.0, 3.0, 0.5, 2.0])).unwrap();
    let p = SparsePotential::new("steps", vec![bump]).unwrap();
    let states = propagate(&p, 0.7, 0.0, 1, None).unwrap();
    let c1 = states[1].coeffs.to_reals();
    let (f, g) = direct_rk4(&p, 0.7, &[0.0, 3.5, 3.75, 4.0, 4.25, 4.5], 2000);
    assert_relative_eq!(c1[0], f, max_relative = 1e-8);
    assert_relative_eq!(c1[1], g, max_relative = 1e-8);
}

fn desk_potential(rng: &mut ChaCha8Rng, n: usize) -> SparsePotential {
    let mut pos = 0.0;
    let bumps = (0..n)
        .map(|_| {
            let gap: f64 = rng.gen_range(5.0..50.0);
            let alpha: f64 = rng.gen_range(0.1..1.0);
            let h: f64 = rng.gen_range(0.0..3.0);
            let center = pos + gap + alpha;
            pos = center + alpha;
            Bump::constant(center, alpha, h).unwrap()
        })
        .collect();
    SparsePotential::new("desk", bumps).unwrap()
}

#[test]
fn divergence_sequence_matches_plain_float_evaluation() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..200 {
        let n_bumps = rng.gen_range(2..=6);
        let p = desk_potential(&mut rng, n_bumps);
        for n in 0..n_bumps {
            let mut denom = 4f64.powi(n as i32);
            for m in 0..n {
                let l = p.gap(m).unwrap().to_real();
                let b = &p.bumps()[m];
                let a = b.half_width();
                let big_b = b.height_bound() * (4.0 * a.powi(3) + 3.0 * a);
                denom *= (l * l + 2.0) * (2.0 * a * a + 1.0) * (2.0 * big_b / 3.0).exp();
            }
            let naive = (p.gap(n).unwrap().to_real() / denom).ln();
            let got = divergence_sequence(&p, n).unwrap().logmag();
            assert!((got - naive).abs() <= 1e-10 * naive.abs().max(1.0), "{got} vs {naive}");
        }
    }
}

#[test]
fn vop_coordinates_stay_inside_gronwall_envelope() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..100 {
        let alpha: f64 = rng.gen_range(0.1..1.0);
        let h: f64 = rng.gen_range(0.0..3.0);
        let b = Bump::constant(10.0, alpha, h).unwrap();
        for s in vop_coordinates(&b, 0.0, 400).unwrap() {
            let env = gronwall_envelope(&b, s.offset) * (1.0 + 1e-12);
            assert!(s.u.v1.powi(2) + s.u.v2.powi(2) <= env);
            assert!(s.v.v1.powi(2) + s.v.v2.powi(2) <= env);
        }
    }
}

#[test]
fn quadrature_form_sign_matches_closed_form() {
    let p = example_potential(4).unwrap();
    let star = negative_form_threshold().lambda;
    for i in 0..=48 {
        let lambda = 0.6 + 0.05 * i as f64;
        if (lambda - star).abs() < 1e-3 {
            continue;
        }
        let f = flambda(lambda, 4097).unwrap();
        let q = quadratic_form(&p, &f, BoundaryCondition::robin(lambda)).unwrap();
        let exact = flambda_form_closed(lambda);
        assert_eq!(q > 0.0, exact > 0.0, "λ = {lambda}: {q} vs {exact}");
        assert!((q - exact).abs() < 1e-6, "λ = {lambda}");
    }
}

#[test]
fn form_agrees_with_integration_by_parts() {
    // f = e^{−κx}: the boundary term cancels after integrating by parts,
    // leaving −∫ f f'' = −κ² ∫ f² = −κ/2.
    let kappa = 0.8;
    let xs: Vec<f64> = (0..=20_000).map(|i| 60.0 * i as f64 / 20_000.0).collect();
    let f = sparsespec::spectral::form::TestFunction::from_fn(
        xs,
        |x| (-kappa * x).exp(),
        |x| -kappa * (-kappa * x).exp(),
    )
    .unwrap();
    let q = quadratic_form(&SparsePotential::free(), &f, BoundaryCondition::robin(kappa)).unwrap();
    assert_relative_eq!(q, -kappa / 2.0, max_relative = 1e-9);
}

#[test]
fn shooting_angle_matches_dense_eigenproblem() {
    let p = SparsePotential::new("one", vec![Bump::constant(5.0, 0.5, 1.0).unwrap()]).unwrap();
    let energy = -0.25;
    let shot = shoot_negative_eigenvalue(&p, energy, 1, None).unwrap();
    assert!(shot.decay_witness);
    let dense = DenseProblem::for_energy(&p, shot.boundary, energy, 1 << 14);
    assert_eq!(dense.negative_count(), 1);
    assert!((dense.eigenvalue(0) - energy).abs() < 1e-3);
}

#[test]
fn shooting_angle_is_continuous_in_energy() {
    let p = example_potential(2).unwrap();
    let mut prev = shoot_negative_eigenvalue(&p, -1.0, 2, None).unwrap().boundary.theta();
    for i in 1..=40 {
        let e = -1.0 + 0.005 * i as f64;
        let t = shoot_negative_eigenvalue(&p, e, 2, None).unwrap().boundary.theta();
        // compare as lines through the origin
        assert!((t - prev).sin().abs() < 0.05, "jump at E = {e}");
        prev = t;
    }
}

#[test]
fn bump_propagator_has_unit_determinant_away_from_zero_energy() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..100 {
        let b = Bump::constant(3.0, rng.gen_range(0.1..1.0), rng.gen_range(0.0..3.0)).unwrap();
        let e: f64 = rng.gen_range(-5.0..5.0);
        let r = bump_propagator(&b, e, 256).unwrap();
        assert_relative_eq!(r.det().value.to_real(), 1.0, max_relative = 1e-10);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn growth_bound_never_exceeds_propagated_norm(seed in any::<u64>(), theta in 0.0..std::f64::consts::PI) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n_bumps = rng.gen_range(1..=6);
        let p = desk_potential(&mut rng, n_bumps);
        let states = propagate(&p, theta, 0.0, n_bumps, None).unwrap();
        for (n, s) in states.iter().enumerate() {
            let bound = sparsespec::bounds::cn_lower_bound(&p, n).unwrap().logmag();
            let exact = s.coeffs.norm().logmag();
            prop_assert!(bound <= exact + 1e-9 * exact.abs().max(1.0));
        }
    }
}
