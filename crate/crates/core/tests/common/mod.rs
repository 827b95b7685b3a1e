//! Finite-difference gradient checking shared by the integration tests and
//! the acceptance runner.

#![allow(dead_code)]

use amc_core::tensorcore::{GradRequest, LayerSpec, Mode, Network, Tensor};
use amc_core::zoo::ArchitectureId;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const FD_STEP: f64 = 1e-4;
pub const REL_TOLERANCE: f64 = 1e-3;
/// Gradients below this magnitude are compared absolutely against it.
pub const REL_FLOOR: f64 = 1e-6;
const DROPOUT_SEED: u64 = 99;

#[derive(Debug, Default)]
pub struct GradCheck {
    pub checked: usize,
    /// Coordinates where the one-sided slopes disagree (a ReLU kink lies
    /// within one step); these are excluded from `max_rel`.
    pub kinks: usize,
    pub max_rel: f64,
    pub worst: String,
}

impl GradCheck {
    fn record(&mut self, what: String, analytic: f64, plus: f64, minus: f64, centre: f64) {
        let h = FD_STEP;
        let numeric = (plus - minus) / (2.0 * h);
        let fwd = (plus - centre) / h;
        let bwd = (centre - minus) / h;
        if (fwd - bwd).abs() > 0.5 * fwd.abs().max(bwd.abs()).max(1e-3) {
            self.kinks += 1;
            return;
        }
        self.checked += 1;
        let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR);
        if rel > self.max_rel {
            self.max_rel = rel;
            self.worst = format!("{what}: analytic {analytic:e}, numeric {numeric:e}");
        }
    }
}

fn loss(net: &Network<f64>, x: &Tensor<f64>, labels: &[usize], mode: Mode) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(DROPOUT_SEED);
    net.backprop(x, labels, mode, Some(&mut rng), GradRequest::PARAMS)
        .expect("forward pass")
        .loss
}

/// Compares analytic parameter and input gradients of `specs` against
/// central differences on a random batch. Train mode fixes the dropout mask
/// by reseeding before every pass.
pub fn check_stack(specs: &[LayerSpec], frame_len: usize, batch: usize, seed: u64, mode: Mode) -> GradCheck {
    let mut net = Network::<f64>::from_specs(specs, &[frame_len, 2], seed).expect("valid stack");
    let classes = net.classes();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let data: Vec<f64> = (0..batch * frame_len * 2)
        .map(|_| rng.random_range(-1.0..1.0))
        .collect();
    let mut x = Tensor::new(vec![batch, frame_len, 2], data).unwrap();
    let labels: Vec<usize> = (0..batch).map(|i| i % classes).collect();

    let mut drop_rng = ChaCha8Rng::seed_from_u64(DROPOUT_SEED);
    let bp = net
        .backprop(&x, &labels, mode, Some(&mut drop_rng), GradRequest::ALL)
        .expect("backprop");
    let centre = bp.loss;
    let mut out = GradCheck::default();

    let mut flat = net.flat_params();
    let analytic: Vec<f64> = bp.param_grads.iter().flatten().copied().collect();
    for i in 0..flat.len() {
        let orig = flat[i];
        flat[i] = orig + FD_STEP;
        net.set_flat_params(&flat).unwrap();
        let plus = loss(&net, &x, &labels, mode);
        flat[i] = orig - FD_STEP;
        net.set_flat_params(&flat).unwrap();
        let minus = loss(&net, &x, &labels, mode);
        flat[i] = orig;
        out.record(format!("param {i}"), analytic[i], plus, minus, centre);
    }
    net.set_flat_params(&flat).unwrap();

    let dx = bp.input_grad.expect("input gradient").into_data();
    for (i, &analytic) in dx.iter().enumerate() {
        let orig = x.data()[i];
        x.data_mut()[i] = orig + FD_STEP;
        let plus = loss(&net, &x, &labels, mode);
        x.data_mut()[i] = orig - FD_STEP;
        let minus = loss(&net, &x, &labels, mode);
        x.data_mut()[i] = orig;
        out.record(format!("input {i}"), analytic, plus, minus, centre);
    }
    out
}

/// One small stack per layer kind, each closed by a dense head and softmax.
pub fn layer_kind_stacks() -> Vec<(&'static str, Vec<LayerSpec>, Mode)> {
    use LayerSpec::*;
    vec![
        ("dense", vec![Flatten, Dense { units: 4 }, Softmax], Mode::Eval),
        ("relu", vec![Flatten, Dense { units: 6 }, Relu, Dense { units: 4 }, Softmax], Mode::Eval),
        (
            "dropout",
            vec![Flatten, Dense { units: 6 }, Dropout { rate: 0.3 }, Dense { units: 4 }, Softmax],
            Mode::Train,
        ),
        (
            "conv2d",
            vec![
                FrameToImage,
                Conv2d { feature_maps: 3, kernel_h: 2, kernel_w: 3 },
                Flatten,
                Dense { units: 4 },
                Softmax,
            ],
            Mode::Eval,
        ),
        ("lstm", vec![Lstm { units: 5 }, LastStep, Dense { units: 4 }, Softmax], Mode::Eval),
        (
            "maps_to_sequence",
            vec![
                FrameToImage,
                Conv2d { feature_maps: 3, kernel_h: 2, kernel_w: 3 },
                MapsToSequence,
                Lstm { units: 4 },
                LastStep,
                Dense { units: 4 },
                Softmax,
            ],
            Mode::Eval,
        ),
    ]
}

/// The four architectures at one eighth width, in train mode so dropout
/// masks are exercised.
pub fn architecture_stacks() -> Vec<(&'static str, Vec<LayerSpec>, Mode)> {
    ArchitectureId::all()
        .into_iter()
        .map(|a| (a.name(), a.scaled_layer_specs(4, 8), Mode::Train))
        .collect()
}
