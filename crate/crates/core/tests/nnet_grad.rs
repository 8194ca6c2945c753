//! Finite-difference verification of every parameter block's gradient, for
//! both extractors and both heads, plus the input-gradient path the
//! collaborative update relies on.

use taskdenoise_core::mat::Mat;
use taskdenoise_core::nnet::{
    self, cross_entropy, cross_entropy_backward, extractor_forward, head_backward, ArchKind,
    ArchShape, BlockMask, Gradients, ModelParams,
};
use taskdenoise_core::signal::RngSeed;

fn rel_close(fd: f64, analytic: f64, tol: f64) -> bool {
    let diff = (fd - analytic).abs();
    diff <= tol * fd.abs().max(analytic.abs()) || diff < 1e-9
}

fn test_input(shape: &ArchShape, seed: u64) -> Mat<f64> {
    use rand::Rng;
    let mut rng = RngSeed::new(seed).rng();
    Mat::from_fn(shape.channels, shape.samples, |r, c| {
        let f = 3.0 + 2.5 * r as f64;
        (std::f64::consts::TAU * f * c as f64 / shape.fs).sin() + 0.4 * rng.gen_range(-1.0..1.0)
    })
}

fn model(arch: ArchKind, shape: &ArchShape, seed: u64) -> ModelParams<f64> {
    let mut p = nnet::init_params(arch, shape, RngSeed::new(seed)).unwrap();
    nnet::init_selector_head(&mut p, RngSeed::new(seed).derive(7));
    p
}

/// Proxy-classification loss for the current parameters.
fn classify_loss(p: &ModelParams<f64>, x: &Mat<f64>, label: usize) -> f64 {
    let (feat, _) = extractor_forward(p, x).unwrap();
    let logits = nnet::classifier_forward(p, &feat);
    cross_entropy(&logits, label).unwrap()
}

/// Selector probability used as a scalar objective for the selector path.
fn selector_loss(p: &ModelParams<f64>, x: &Mat<f64>) -> f64 {
    let (feat, _) = extractor_forward(p, x).unwrap();
    nnet::selector_forward(p, &feat)
}

fn classify_grads(p: &ModelParams<f64>, x: &Mat<f64>, label: usize) -> Gradients<f64> {
    let (feat, cache) = extractor_forward(p, x).unwrap();
    let logits = nnet::classifier_forward(p, &feat);
    let dlogits = cross_entropy_backward(&logits, label);
    let mut grads = Gradients::zeros(p, BlockMask::PROXY);
    let dfeat = head_backward(&p.classifier, &feat, &dlogits, grads.classifier.as_mut());
    nnet::extractor::backward(
        &p.extractor,
        &cache,
        &dfeat,
        grads.extractor.as_mut(),
        false,
    );
    grads
}

fn selector_grads(p: &ModelParams<f64>, x: &Mat<f64>) -> Gradients<f64> {
    let (feat, cache) = extractor_forward(p, x).unwrap();
    let prob = nnet::selector_forward(p, &feat);
    // d prob / d logit = p (1 - p).
    let dlogit = vec![prob * (1.0 - prob)];
    let mut grads = Gradients::zeros(
        p,
        BlockMask {
            extractor: true,
            selector: true,
            classifier: false,
        },
    );
    let dfeat = head_backward(&p.selector, &feat, &dlogit, grads.selector.as_mut());
    nnet::extractor::backward(
        &p.extractor,
        &cache,
        &dfeat,
        grads.extractor.as_mut(),
        false,
    );
    grads
}

/// Checks `analytic` against central differences of `loss` for every entry
/// of every tensor selected by `mask`.
fn check_blocks(
    p: &ModelParams<f64>,
    mask: BlockMask,
    analytic: &Gradients<f64>,
    loss: impl Fn(&ModelParams<f64>) -> f64,
    context: &str,
) {
    let h = 1e-5;
    let grad_tensors: Vec<Vec<f64>> = analytic.tensors().iter().map(|t| t.to_vec()).collect();
    let mut work = p.clone();
    let n_tensors = nnet::masked_tensors(&work, mask).len();
    assert_eq!(n_tensors, grad_tensors.len(), "{context}: tensor count");
    let mut checked = 0usize;
    for ti in 0..n_tensors {
        let len = nnet::masked_tensors(&work, mask)[ti].len();
        // Probe a spread of entries to keep runtime sane on the CNN.
        let stride = (len / 25).max(1);
        for i in (0..len).step_by(stride) {
            let orig = nnet::masked_tensors(&work, mask)[ti][i];
            nnet::masked_tensors_mut(&mut work, mask)[ti][i] = orig + h;
            let up = loss(&work);
            nnet::masked_tensors_mut(&mut work, mask)[ti][i] = orig - h;
            let down = loss(&work);
            nnet::masked_tensors_mut(&mut work, mask)[ti][i] = orig;
            let fd = (up - down) / (2.0 * h);
            let an = grad_tensors[ti][i];
            assert!(
                rel_close(fd, an, 1e-4),
                "{context}: tensor {ti} entry {i}: fd {fd:e} vs analytic {an:e}"
            );
            checked += 1;
        }
    }
    assert!(checked > 20, "{context}: only {checked} entries probed");
}

#[test]
fn mlp_classifier_gradients_match_finite_differences() {
    let shape = ArchShape {
        channels: 4,
        samples: 64,
        fs: 32.0,
        num_classes: 3,
    };
    let p = model(ArchKind::BandPowerMlp, &shape, 21);
    let x = test_input(&shape, 22);
    let grads = classify_grads(&p, &x, 1);
    check_blocks(
        &p,
        BlockMask::PROXY,
        &grads,
        |m| classify_loss(m, &x, 1),
        "mlp/classifier",
    );
}

#[test]
fn mlp_selector_gradients_match_finite_differences() {
    let shape = ArchShape {
        channels: 4,
        samples: 64,
        fs: 32.0,
        num_classes: 3,
    };
    let p = model(ArchKind::BandPowerMlp, &shape, 31);
    let x = test_input(&shape, 32);
    let grads = selector_grads(&p, &x);
    let mask = BlockMask {
        extractor: true,
        selector: true,
        classifier: false,
    };
    check_blocks(&p, mask, &grads, |m| selector_loss(m, &x), "mlp/selector");
}

#[test]
fn cnn_classifier_gradients_match_finite_differences() {
    let shape = ArchShape {
        channels: 4,
        samples: 64,
        fs: 32.0,
        num_classes: 3,
    };
    let p = model(ArchKind::CompactCnn, &shape, 41);
    let x = test_input(&shape, 42);
    let grads = classify_grads(&p, &x, 2);
    check_blocks(
        &p,
        BlockMask::PROXY,
        &grads,
        |m| classify_loss(m, &x, 2),
        "cnn/classifier",
    );
}

#[test]
fn cnn_selector_gradients_match_finite_differences() {
    let shape = ArchShape {
        channels: 4,
        samples: 64,
        fs: 32.0,
        num_classes: 3,
    };
    let p = model(ArchKind::CompactCnn, &shape, 51);
    let x = test_input(&shape, 52);
    let grads = selector_grads(&p, &x);
    let mask = BlockMask {
        extractor: true,
        selector: true,
        classifier: false,
    };
    check_blocks(&p, mask, &grads, |m| selector_loss(m, &x), "cnn/selector");
}

#[test]
fn input_gradients_match_finite_differences_both_archs() {
    let shape = ArchShape {
        channels: 3,
        samples: 64,
        fs: 32.0,
        num_classes: 2,
    };
    for (arch, seed) in [(ArchKind::BandPowerMlp, 61), (ArchKind::CompactCnn, 62)] {
        let p = model(arch, &shape, seed);
        let mut x = test_input(&shape, seed + 1);
        let label = 1;

        let (feat, cache) = extractor_forward(&p, &x).unwrap();
        let logits = nnet::classifier_forward(&p, &feat);
        let dlogits = cross_entropy_backward(&logits, label);
        let dfeat = head_backward(&p.classifier, &feat, &dlogits, None);
        let dx = nnet::extractor::backward(&p.extractor, &cache, &dfeat, None, true)
            .expect("input gradient");

        let h = 1e-5;
        for idx in (0..shape.channels * shape.samples).step_by(17) {
            let (r, c) = (idx / shape.samples, idx % shape.samples);
            let orig = x[(r, c)];
            x[(r, c)] = orig + h;
            let up = classify_loss(&p, &x, label);
            x[(r, c)] = orig - h;
            let down = classify_loss(&p, &x, label);
            x[(r, c)] = orig;
            let fd = (up - down) / (2.0 * h);
            assert!(
                rel_close(fd, dx[(r, c)], 1e-4),
                "{arch:?} input grad at ({r},{c}): fd {fd:e} vs {:e}",
                dx[(r, c)]
            );
        }
    }
}

#[test]
fn frozen_extractor_gets_no_gradient_but_signal_flows() {
    let shape = ArchShape {
        channels: 3,
        samples: 64,
        fs: 32.0,
        num_classes: 2,
    };
    let p = model(ArchKind::BandPowerMlp, &shape, 71);
    let x = test_input(&shape, 72);
    let (feat, cache) = extractor_forward(&p, &x).unwrap();
    let logits = nnet::classifier_forward(&p, &feat);
    let dlogits = cross_entropy_backward(&logits, 0);

    // Freeze everything except the classifier head.
    let mut grads = Gradients::zeros(
        &p,
        BlockMask {
            extractor: false,
            selector: false,
            classifier: true,
        },
    );
    let dfeat = head_backward(&p.classifier, &feat, &dlogits, grads.classifier.as_mut());
    assert!(grads.extractor.is_none());
    let classifier_norm = grads.global_norm();
    assert!(classifier_norm > 0.0, "head gradient should be nonzero");

    // The frozen extractor still propagates chain-rule signal to its input.
    let dx = nnet::extractor::backward(&p.extractor, &cache, &dfeat, None, true).unwrap();
    assert!(dx.frobenius_norm() > 0.0);
}

#[test]
fn disconnected_unit_has_exactly_zero_gradient() {
    let shape = ArchShape {
        channels: 3,
        samples: 64,
        fs: 32.0,
        num_classes: 2,
    };
    let mut p = model(ArchKind::BandPowerMlp, &shape, 81);
    // Cut hidden unit 5 off from the feature layer: column 5 of w2 zeroed.
    if let nnet::ExtractorParams::BandPowerMlp(mlp) = &mut p.extractor {
        for r in 0..mlp.w2.rows() {
            mlp.w2[(r, 5)] = 0.0;
        }
    }
    let x = test_input(&shape, 82);
    let grads = classify_grads(&p, &x, 1);
    if let Some(nnet::ExtractorParams::BandPowerMlp(g)) = &grads.extractor {
        for v in g.w1.row(5) {
            assert_eq!(*v, 0.0, "disconnected unit must have zero gradient");
        }
        assert_eq!(g.b1[5], 0.0);
    } else {
        panic!("missing extractor gradients");
    }
}
