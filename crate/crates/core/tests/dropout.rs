//! Inverted dropout keeps every activation's expectation unchanged.

use inn_core::nn::{sample_masks, Architecture, DropoutSchedule, ModelParams, Variant};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const DRAWS: usize = 10_000;

#[test]
fn masks_have_unit_expectation() {
    let arch = Architecture::standard(4, 6, 5);
    let params = ModelParams::<f64>::zeros(&arch, Variant::Inn, 3).unwrap();
    let schedule = DropoutSchedule::default();
    let mut rng = ChaCha8Rng::seed_from_u64(9);

    // (sum, zeros, count) per layer: input, text banks, knowledge, dense.
    let mut acc = vec![(0.0, 0usize, 0usize); 3 + schedule.text_banks.len()];
    for _ in 0..DRAWS {
        let m = sample_masks(&params, 6, &schedule, &mut rng).unwrap();
        let layers = std::iter::once(m.input.unwrap().into_raw_vec_and_offset().0)
            .chain(m.text_banks.into_iter().map(|b| b.to_vec()))
            .chain([m.knowledge.unwrap().to_vec(), m.dense.to_vec()]);
        for (slot, values) in acc.iter_mut().zip(layers) {
            slot.0 += values.iter().sum::<f64>();
            slot.1 += values.iter().filter(|&&v| v == 0.0).count();
            slot.2 += values.len();
        }
    }
    let rates = [schedule.input]
        .into_iter()
        .chain(schedule.text_banks.iter().copied())
        .chain([schedule.knowledge, schedule.dense]);
    for ((sum, zeros, count), p) in acc.into_iter().zip(rates) {
        let mean = sum / count as f64;
        assert!((mean - 1.0).abs() <= 0.02, "rate {p}: mean mask {mean}");
        let dropped = zeros as f64 / count as f64;
        assert!((dropped - p).abs() <= 0.02, "rate {p}: dropped fraction {dropped}");
    }
}

#[test]
fn padding_rows_stay_zero() {
    let arch = Architecture::standard(4, 10, 5);
    let params = ModelParams::<f64>::zeros(&arch, Variant::Inn, 3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let m = sample_masks(&params, 7, &DropoutSchedule::default(), &mut rng).unwrap();
    let input = m.input.unwrap();
    assert!(input.slice(ndarray::s![7.., ..]).iter().all(|&v| v == 0.0));
}
