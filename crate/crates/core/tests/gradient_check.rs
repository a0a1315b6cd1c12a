//! Every analytic gradient against central finite differences at 64-bit
//! precision, for all three variants, with and without dropout masks.

use inn_core::nn::{
    backward, bce_loss, forward_with_masks, sample_masks, Architecture, BankSpec, DropoutMasks, DropoutSchedule, Input,
    ModelParams, Variant,
};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const STEP: f64 = 1e-5;
const TOLERANCE: f64 = 1e-4;

fn tiny_arch() -> Architecture {
    Architecture {
        text_banks: [3, 4, 5].map(|height| BankSpec { height, filters: 2 }).to_vec(),
        knowledge_bank: BankSpec { height: 3, filters: 2 },
        hidden: 4,
        embedding_dim: 6,
        seq_len: 8,
        keywords: 4,
    }
}

fn random_params(variant: Variant, seed: u64) -> ModelParams<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut p = ModelParams::zeros(&tiny_arch(), variant, 10).unwrap();
    for g in p.groups_mut() {
        for v in g.values.iter_mut() {
            *v = rng.random_range(-0.8..0.8);
        }
    }
    if variant.uses_text() {
        p.embedding.row_mut(0).fill(0.0);
    }
    // Keep dense pre-activations clear of the ReLU kink.
    p.dense_b.mapv_inplace(|b: f64| if b.abs() < 0.1 { b + 0.3 } else { b });
    p
}

fn loss(p: &ModelParams<f64>, input: Input<'_, f64>, masks: Option<&DropoutMasks<f64>>, y: u8) -> f64 {
    bce_loss(forward_with_masks(p, input, masks).unwrap().prob, y)
}

/// Largest relative error over every parameter.
fn check(variant: Variant, with_masks: bool, y: u8, seed: u64) -> (f64, String) {
    let params = random_params(variant, seed);
    let ids = [2usize, 5, 9, 1, 3, 7];
    let mut rng = ChaCha8Rng::seed_from_u64(seed + 100);
    let eik = Array2::from_shape_fn((4, 4), |_| rng.random_range(0.0..2.0));
    let input =
        Input { text: variant.uses_text().then_some(&ids[..]), eik: variant.uses_knowledge().then(|| eik.view()) };
    let masks = with_masks.then(|| {
        let schedule = DropoutSchedule { input: 0.3, text_banks: vec![0.3; 3], knowledge: 0.3, dense: 0.2 };
        sample_masks(&params, ids.len(), &schedule, &mut rng).unwrap()
    });
    let trace = forward_with_masks(&params, input, masks.as_ref()).unwrap();
    let grad = backward(&params, &trace, y).unwrap();

    let mut worst = (0.0, String::new());
    let names: Vec<(String, usize)> = params.groups().iter().map(|g| (g.name.clone(), g.values.len())).collect();
    let analytic: Vec<Vec<f64>> = grad.groups().iter().map(|g| g.values.to_vec()).collect();
    for (gi, (name, len)) in names.iter().enumerate() {
        for (i, &a) in analytic[gi].iter().enumerate().take(*len) {
            let mut plus = params.clone();
            plus.groups_mut()[gi].values[i] += STEP;
            let mut minus = params.clone();
            minus.groups_mut()[gi].values[i] -= STEP;
            let numeric =
                (loss(&plus, input, masks.as_ref(), y) - loss(&minus, input, masks.as_ref(), y)) / (2.0 * STEP);
            let scale = a.abs().max(numeric.abs());
            let err = if scale < 1e-7 { (a - numeric).abs() } else { (a - numeric).abs() / scale };
            if err > worst.0 {
                worst = (err, format!("{name}[{i}]: analytic {a:e}, numeric {numeric:e}"));
            }
        }
    }
    worst
}

#[test]
fn gradients_match_finite_differences() {
    for variant in [Variant::Inn, Variant::Ikom, Variant::TextOnly] {
        for with_masks in [false, true] {
            for (y, seed) in [(1, 1), (0, 2), (1, 3)] {
                let (err, at) = check(variant, with_masks, y, seed);
                assert!(err <= TOLERANCE, "{variant} masks={with_masks} y={y}: relative error {err:e} at {at}");
            }
        }
    }
}

#[test]
fn padding_row_gets_no_gradient() {
    let params = random_params(Variant::Inn, 4);
    let ids = [0usize, 2, 0, 3];
    let eik = Array2::from_elem((4, 4), 0.5);
    let trace = forward_with_masks(&params, Input { text: Some(&ids), eik: Some(eik.view()) }, None).unwrap();
    let grad = backward(&params, &trace, 1).unwrap();
    assert!(grad.embedding.row(0).iter().all(|&g| g == 0.0));
}
