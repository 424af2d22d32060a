use nalgebra::DMatrix;
use shaping_filter::operators::*;
use shaping_filter::*;

const T: f64 = 5.0;

fn leading(m: &DMatrix<f64>) -> DMatrix<f64> {
    m.view((0, 0), (4, 4)).into_owned()
}

/// `f(L)` should shrink at least by `factor` every time `L` doubles.
fn assert_rate(name: &str, factor: f64, f: impl Fn(usize) -> f64) {
    let errs: Vec<f64> = [16, 32, 64, 128].iter().map(|&l| f(l)).collect();
    for w in errs.windows(2) {
        assert!(w[0] / w[1] > factor, "{name}: {errs:?}");
    }
}

#[test]
fn derivative_and_integral_blocks_are_inverse_in_the_limit() {
    let eye = DMatrix::<f64>::identity(4, 4);
    assert_rate("P P^-1", 1.8, |l| {
        let p = differentiation_matrix(T, l).unwrap().into_matrix();
        let pi = integration_matrix(T, l).unwrap().into_matrix();
        (leading(&(&p * &pi)) - &eye).amax()
    });
    assert_rate("inv(P)", 3.5, |l| {
        let p = differentiation_matrix(T, l).unwrap().into_matrix();
        let pi = integration_matrix(T, l).unwrap().into_matrix();
        (leading(&p.try_inverse().unwrap()) - leading(&pi)).amax()
    });
}

#[test]
fn aperiodic_blocks_match_rational_expressions_in_the_limit() {
    let b = BlockParameters::aperiodic(4.0).unwrap();
    assert_rate("A A vs A2", 7.0, |l| {
        let a = aperiodic_matrix(&b, T, l).unwrap().into_matrix();
        let a2 = aperiodic2_matrix(&b, T, l).unwrap().into_matrix();
        leading(&(&a * &a - a2)).amax()
    });
    assert_rate("(4P + E)^-1 vs A", 3.5, |l| {
        let a = aperiodic_matrix(&b, T, l).unwrap().into_matrix();
        let h = RationalTransferFunction::new(vec![1.0], vec![1.0, 4.0]).unwrap();
        let r = compose_rational(&h, T, l, Composition::Polynomial).unwrap().into_matrix();
        leading(&(r - a)).amax()
    });
}

#[test]
fn closed_forms_match_general_projection() {
    for preset in Preset::ALL {
        let tf = preset.transfer_function();
        let k = ModalImpulseResponse::from_fractions(&tf.partial_fractions().unwrap());
        for l in [5, 64] {
            let blocks = exact_projection(&tf, T, l).unwrap();
            let general = modal_projection(&k, T, l).unwrap();
            assert!((blocks.matrix() - general.matrix()).amax() < 1e-12, "{preset} L={l}");
        }
    }
}

#[test]
fn every_preset_matches_quadrature() {
    let basis = CosineBasis::new(T).unwrap();
    for preset in Preset::ALL {
        let tf = preset.transfer_function();
        let k = ModalImpulseResponse::from_fractions(&tf.partial_fractions().unwrap());
        let oracle = project_kernel(&basis, &k, 16).unwrap();
        let w = exact_projection(&tf, T, 16).unwrap();
        assert!((w.matrix() - oracle).amax() < 1e-8, "{preset}");
        assert_eq!(w.provenance(), Provenance::ClosedForm);
    }
}

#[test]
fn parity_symmetry_of_blocks() {
    let a = aperiodic_matrix(&BlockParameters::aperiodic(3.0).unwrap(), T, 12).unwrap();
    let a2 = aperiodic2_matrix(&BlockParameters::aperiodic(4.0).unwrap(), T, 12).unwrap();
    let k = oscillatory_matrix(&BlockParameters::oscillatory(2.0, 0.5).unwrap(), T, 12).unwrap();
    for m in [a.matrix(), a2.matrix(), k.matrix()] {
        for i in 0..12 {
            for j in 0..12 {
                let s = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
                assert!((m[(i, j)] - s * m[(j, i)]).abs() < 1e-15);
            }
        }
    }
}

#[test]
fn first_order_whitening_filter() {
    // inverse of Ŵ for α/(γs + 1) is (γP̃ + Ẽ)/α
    let tf = RationalTransferFunction::new(vec![2.0], vec![1.0, 3.0]).unwrap();
    let w = compose_rational(&tf, T, 32, Composition::Auto).unwrap();
    let inv = whitening_operator(&w).unwrap();
    let p = differentiation_matrix(T, 32).unwrap().into_matrix();
    let expect = (p * 3.0 + DMatrix::<f64>::identity(32, 32)) / 2.0;
    assert!((inv.matrix() - expect).amax() < 1e-10);
    assert_eq!(inv.provenance(), Provenance::RationalInP);
}

#[test]
fn exact_minus_rational_is_epsilon2() {
    let tf = Preset::Dryden1.transfer_function();
    let exact = exact_projection(&tf, T, 8).unwrap();
    let rational = compose_rational(&tf, T, 8, Composition::Auto).unwrap();
    let report = error_decomposition(&tf, T, 8).unwrap();
    assert!((exact.distance_squared(&rational) - report.epsilon2).abs() < 1e-15);
}

#[test]
fn oscillatory_block_rejects_bad_parameters() {
    assert!(BlockParameters::oscillatory(2.0, 1.0).is_err());
    assert!(BlockParameters::oscillatory(0.0, 0.5).is_err());
    let resonant = BlockParameters::oscillatory(T / (3.0 * std::f64::consts::PI), 0.0).unwrap();
    assert!(matches!(
        oscillatory_matrix(&resonant, T, 8),
        Err(FilterError::ResonantParameters { index: 3 })
    ));
    // the same block is fine while the truncation stays below the resonance
    assert!(oscillatory_matrix(&resonant, T, 3).is_ok());
}

#[test]
fn basis_orthonormality() {
    let basis = CosineBasis::new(T).unwrap();
    let rule = shaping_filter::quadrature::GaussLegendre::standard();
    for i in 0..10 {
        for j in 0..10 {
            let v = rule.integrate(0.0, T, 8, |t| basis.eval_unchecked(i, t) * basis.eval_unchecked(j, t));
            let expect = if i == j { 1.0 } else { 0.0 };
            assert!((v - expect).abs() < 1e-13, "{i},{j}: {v}");
        }
    }
}
