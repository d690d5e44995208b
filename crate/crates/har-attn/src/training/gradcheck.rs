//! Finite-difference verification harness.
//!
//! Every layer and both full model variants are rebuilt at tiny dimensions
//! and their analytic gradients compared against central finite differences
//! (h = 1e-5). Relative error uses the guarded denominator
//! `max(|fd| + |analytic|, 1e-6)`; central differences cannot resolve below
//! roughly 1e-11 absolute, so near-zero gradients are effectively compared
//! absolutely.
//!
//! Purely linear targets (the linear and conv layers, and dropout under a
//! pinned mask) are held to [`LINEAR_TOLERANCE`]; nonlinear targets use the
//! caller's tolerance (default 1e-4).

use std::cell::RefCell;
use std::fmt::Write as _;

use crate::attention::{attend_backward, attend_forward, AttentionParams};
use crate::error::{Error, Result};
use crate::layers::{ConvLayer, Dropout, LinearLayer, LstmLayer, Mode};
use crate::layers::{lstm_backward, lstm_forward};
use crate::model::{cross_entropy_loss, ArchConfig, ModelParams, Variant};
use crate::ndcore::{Rng, Tensor};

/// Tolerance for targets whose loss is linear in the checked values.
pub const LINEAR_TOLERANCE: f64 = 1e-6;

const FD_STEP: f64 = 1e-5;

#[derive(Debug, Clone)]
pub struct GradCheckEntry {
    /// What was checked (layer or model variant).
    pub target: String,
    /// Parameter group or "input".
    pub group: String,
    pub max_rel_error: f64,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub tolerance: f64,
    pub entries: Vec<GradCheckEntry>,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.entries.iter().all(|e| e.passed)
    }

    /// Plain-text table, one line per parameter group.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{:<18} {:<22} {:>14} {:>10} result", "target", "group", "max rel err", "tol");
        for e in &self.entries {
            let _ = writeln!(
                out,
                "{:<18} {:<22} {:>14.3e} {:>10.0e} {}",
                e.target,
                e.group,
                e.max_rel_error,
                e.tolerance,
                if e.passed { "pass" } else { "FAIL" }
            );
        }
        let _ = writeln!(out, "overall: {}", if self.passed() { "pass" } else { "FAIL" });
        out
    }
}

fn fd_sweep(
    analytic: &Tensor,
    get: &dyn Fn(usize) -> f64,
    set: &dyn Fn(usize, f64),
    loss: &dyn Fn() -> f64,
) -> f64 {
    let mut worst = 0.0f64;
    for idx in 0..analytic.numel() {
        let orig = get(idx);
        set(idx, orig + FD_STEP);
        let up = loss();
        set(idx, orig - FD_STEP);
        let down = loss();
        set(idx, orig);
        let fd = (up - down) / (2.0 * FD_STEP);
        let an = analytic.data()[idx];
        let rel = (fd - an).abs() / (fd.abs() + an.abs()).max(1e-6);
        worst = worst.max(rel);
    }
    worst
}

fn push(entries: &mut Vec<GradCheckEntry>, target: &str, group: &str, err: f64, tol: f64) {
    entries.push(GradCheckEntry {
        target: target.into(),
        group: group.into(),
        max_rel_error: err,
        tolerance: tol,
        passed: err <= tol,
    });
}

fn random_vec(rng: &mut Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.uniform(-1.0, 1.0)).collect()
}

fn projection_loss(values: &[f64], proj: &[f64]) -> f64 {
    values.iter().zip(proj).map(|(a, b)| a * b).sum()
}

fn check_linear(entries: &mut Vec<GradCheckEntry>) -> Result<()> {
    let mut rng = Rng::new(0x11);
    let layer = RefCell::new(LinearLayer::init(5, 3, &mut rng)?);
    let x = RefCell::new(Tensor::vector(&random_vec(&mut rng, 5))?);
    let proj = random_vec(&mut rng, 3);

    let loss = || {
        let (y, _) = layer.borrow().forward(&x.borrow()).expect("forward");
        projection_loss(y.data(), &proj)
    };
    let (gx, gp) = {
        let l = layer.borrow();
        let (_, cache) = l.forward(&x.borrow())?;
        l.backward(&cache, &Tensor::vector(&proj)?)?
    };

    let err = fd_sweep(
        &gp.weight,
        &|i| layer.borrow().weight.data()[i],
        &|i, v| layer.borrow_mut().weight.data_mut()[i] = v,
        &loss,
    );
    push(entries, "linear", "weight", err, LINEAR_TOLERANCE);
    let err = fd_sweep(
        &gp.bias,
        &|i| layer.borrow().bias.data()[i],
        &|i, v| layer.borrow_mut().bias.data_mut()[i] = v,
        &loss,
    );
    push(entries, "linear", "bias", err, LINEAR_TOLERANCE);
    let err = fd_sweep(
        &gx,
        &|i| x.borrow().data()[i],
        &|i, v| x.borrow_mut().data_mut()[i] = v,
        &loss,
    );
    push(entries, "linear", "input", err, LINEAR_TOLERANCE);
    Ok(())
}

fn check_conv(entries: &mut Vec<GradCheckEntry>) -> Result<()> {
    let mut rng = Rng::new(0x22);
    for (mode_name, maps_in) in [("expand", 1usize), ("depthwise", 3usize)] {
        let layer = RefCell::new(ConvLayer::init(3, 3, &mut rng)?);
        let x = RefCell::new(Tensor::new(&[7, maps_in], random_vec(&mut rng, 7 * maps_in))?);
        let proj = random_vec(&mut rng, 5 * 3);

        let loss = || {
            let (y, _) = layer.borrow().forward(&x.borrow()).expect("forward");
            projection_loss(y.data(), &proj)
        };
        let (gx, gp) = {
            let l = layer.borrow();
            let (y, cache) = l.forward(&x.borrow())?;
            l.backward(&cache, &Tensor::new(y.shape(), proj.clone())?)?
        };

        let err = fd_sweep(
            &gp.kernels,
            &|i| layer.borrow().kernels.data()[i],
            &|i, v| layer.borrow_mut().kernels.data_mut()[i] = v,
            &loss,
        );
        push(entries, "conv", &format!("kernels[{mode_name}]"), err, LINEAR_TOLERANCE);
        let err = fd_sweep(
            &gp.bias,
            &|i| layer.borrow().bias.data()[i],
            &|i, v| layer.borrow_mut().bias.data_mut()[i] = v,
            &loss,
        );
        push(entries, "conv", &format!("bias[{mode_name}]"), err, LINEAR_TOLERANCE);
        let err = fd_sweep(
            &gx,
            &|i| x.borrow().data()[i],
            &|i, v| x.borrow_mut().data_mut()[i] = v,
            &loss,
        );
        push(entries, "conv", &format!("input[{mode_name}]"), err, LINEAR_TOLERANCE);
    }
    Ok(())
}

fn check_dropout(entries: &mut Vec<GradCheckEntry>) -> Result<()> {
    // Pin the mask by reseeding the generator before every evaluation; the
    // masked map is then a fixed linear function of the input.
    let mut rng = Rng::new(0x33);
    let dropout = Dropout::new(0.4)?;
    let x = RefCell::new(random_vec(&mut rng, 16));
    let proj = random_vec(&mut rng, 16);
    let mask_seed = 0x34;

    let loss = || {
        let mut v = x.borrow().clone();
        dropout.forward(&mut v, Mode::Train, &mut Rng::new(mask_seed));
        projection_loss(&v, &proj)
    };
    let analytic = {
        let mut v = x.borrow().clone();
        let mask = dropout.forward(&mut v, Mode::Train, &mut Rng::new(mask_seed));
        let mut g = proj.clone();
        Dropout::backward(&mask, &mut g);
        Tensor::vector(&g)?
    };

    let err = fd_sweep(
        &analytic,
        &|i| x.borrow()[i],
        &|i, v| x.borrow_mut()[i] = v,
        &loss,
    );
    push(entries, "dropout", "input", err, LINEAR_TOLERANCE);
    Ok(())
}

fn check_lstm(entries: &mut Vec<GradCheckEntry>, tolerance: f64) -> Result<()> {
    let mut rng = Rng::new(0x44);
    let stack = RefCell::new(vec![
        LstmLayer::init(3, 4, &mut rng)?,
        LstmLayer::init(4, 4, &mut rng)?,
    ]);
    let xs = RefCell::new(
        (0..3)
            .map(|_| Tensor::vector(&random_vec(&mut rng, 3)))
            .collect::<Result<Vec<_>>>()?,
    );
    let proj: Vec<Vec<f64>> = (0..3).map(|_| random_vec(&mut rng, 4)).collect();

    let loss = || {
        let (hs, _) = lstm_forward(&stack.borrow(), &xs.borrow()).expect("forward");
        hs.iter()
            .zip(&proj)
            .map(|(h, p)| projection_loss(h.data(), p))
            .sum()
    };
    let (grad_xs, layer_grads) = {
        let s = stack.borrow();
        let (_, caches) = lstm_forward(&s, &xs.borrow())?;
        let grads: Vec<Tensor> = proj.iter().map(|p| Tensor::vector(p)).collect::<Result<_>>()?;
        lstm_backward(&s, &caches, &grads)?
    };

    for (l, grads_l) in layer_grads.iter().enumerate() {
        for (group, analytic, which) in [
            ("w_ih", &grads_l.w_ih, 0usize),
            ("w_hh", &grads_l.w_hh, 1),
            ("bias", &grads_l.bias, 2),
        ] {
            let err = fd_sweep(
                analytic,
                &|i| {
                    let s = stack.borrow();
                    match which {
                        0 => s[l].w_ih.data()[i],
                        1 => s[l].w_hh.data()[i],
                        _ => s[l].bias.data()[i],
                    }
                },
                &|i, v| {
                    let mut s = stack.borrow_mut();
                    match which {
                        0 => s[l].w_ih.data_mut()[i] = v,
                        1 => s[l].w_hh.data_mut()[i] = v,
                        _ => s[l].bias.data_mut()[i] = v,
                    }
                },
                &loss,
            );
            push(entries, "lstm", &format!("layer{}.{group}", l + 1), err, tolerance);
        }
    }
    let mut worst = 0.0f64;
    for (t, gx) in grad_xs.iter().enumerate() {
        let err = fd_sweep(
            gx,
            &|i| xs.borrow()[t].data()[i],
            &|i, v| xs.borrow_mut()[t].data_mut()[i] = v,
            &loss,
        );
        worst = worst.max(err);
    }
    push(entries, "lstm", "input", worst, tolerance);
    Ok(())
}

fn check_attention(entries: &mut Vec<GradCheckEntry>, tolerance: f64) -> Result<()> {
    let mut rng = Rng::new(0x55);
    let params = RefCell::new(AttentionParams::init(5, None, &mut rng)?);
    let states = RefCell::new(
        (0..8)
            .map(|_| Tensor::vector(&random_vec(&mut rng, 5)))
            .collect::<Result<Vec<_>>>()?,
    );
    let proj = random_vec(&mut rng, 5);

    let loss = || {
        let (f, _, _) = attend_forward(&params.borrow(), &states.borrow()).expect("forward");
        projection_loss(f.data(), &proj)
    };
    let (grad_h, grads) = {
        let p = params.borrow();
        let (_, _, cache) = attend_forward(&p, &states.borrow())?;
        attend_backward(&p, &cache, &Tensor::vector(&proj)?)?
    };

    for (group, analytic, which) in [
        ("w1", &grads.w1, 0usize),
        ("b1", &grads.b1, 1),
        ("w2", &grads.w2, 2),
        ("b2", &grads.b2, 3),
    ] {
        let err = fd_sweep(
            analytic,
            &|i| {
                let p = params.borrow();
                match which {
                    0 => p.w1.data()[i],
                    1 => p.b1.data()[i],
                    2 => p.w2.data()[i],
                    _ => p.b2.data()[i],
                }
            },
            &|i, v| {
                let mut p = params.borrow_mut();
                match which {
                    0 => p.w1.data_mut()[i] = v,
                    1 => p.b1.data_mut()[i] = v,
                    2 => p.w2.data_mut()[i] = v,
                    _ => p.b2.data_mut()[i] = v,
                }
            },
            &loss,
        );
        push(entries, "attention", group, err, tolerance);
    }
    let mut worst = 0.0f64;
    for (t, gh) in grad_h.iter().enumerate() {
        let err = fd_sweep(
            gh,
            &|i| states.borrow()[t].data()[i],
            &|i, v| states.borrow_mut()[t].data_mut()[i] = v,
            &loss,
        );
        worst = worst.max(err);
    }
    push(entries, "attention", "hidden_states", worst, tolerance);
    Ok(())
}

/// Smallest |pre-activation| across the conv stack for one frame. Finite
/// differences are undefined at the ReLU kink, so probe frames must keep a
/// healthy margin from it.
fn relu_kink_margin(params: &ModelParams, frame: &Tensor) -> Result<f64> {
    let cfg = &params.config;
    let mut margin = f64::INFINITY;
    for c in 0..cfg.channels {
        let col: Vec<f64> = (0..cfg.window).map(|t| frame.at2(t, c)).collect();
        let mut x = Tensor::new(&[cfg.window, 1], col)?;
        for layer in &params.conv {
            let (z, _) = layer.forward(&x)?;
            for &v in z.data() {
                margin = margin.min(v.abs());
            }
            x = z.relu()?;
        }
    }
    Ok(margin)
}

/// Checks one full model configuration end to end (cross-entropy loss
/// against every parameter group) and appends per-group entries.
pub fn gradcheck_model(
    arch: &ArchConfig,
    tolerance: f64,
    entries: &mut Vec<GradCheckEntry>,
) -> Result<()> {
    arch.validate()?;
    let target = match arch.variant {
        Variant::Baseline => "model_baseline",
        Variant::Attention => "model_attention",
    };
    let mut rng = Rng::new(0x66);
    let params = RefCell::new(ModelParams::init(arch, &mut rng)?);
    // Deterministically pick the first probe frame whose ReLU
    // pre-activations all clear the kink by two orders of magnitude more
    // than the finite-difference step.
    let frame = {
        let mut frame = None;
        for _ in 0..64 {
            let mut t = Tensor::zeros(&[arch.window, arch.channels])?;
            for v in t.data_mut() {
                *v = rng.uniform(-1.0, 1.0);
            }
            if relu_kink_margin(&params.borrow(), &t)? > 100.0 * FD_STEP {
                frame = Some(t);
                break;
            }
        }
        frame.ok_or_else(|| Error::Config("no kink-free probe frame found".into()))?
    };
    let label = 1usize;
    let mask_seed = 0x67;

    let loss = || {
        let (pred, _) = params
            .borrow()
            .forward(&frame, Mode::Train, Some(&mut Rng::new(mask_seed)))
            .expect("forward");
        cross_entropy_loss(&pred, label).expect("loss").0
    };
    let analytic: Vec<(String, Tensor)> = {
        let p = params.borrow();
        let (pred, cache) = p.forward(&frame, Mode::Train, Some(&mut Rng::new(mask_seed)))?;
        let (_, seed) = cross_entropy_loss(&pred, label)?;
        let grads = p.backward(&cache, &seed)?;
        grads
            .named_tensors()
            .into_iter()
            .map(|(n, t)| (n, t.clone()))
            .collect()
    };

    for (group, an) in &analytic {
        let err = fd_sweep(
            an,
            &|i| {
                let p = params.borrow();
                p.named_tensors()
                    .into_iter()
                    .find(|(n, _)| n == group)
                    .expect("group exists")
                    .1
                    .data()[i]
            },
            &|i, v| {
                let mut p = params.borrow_mut();
                p.named_tensors_mut()
                    .into_iter()
                    .find(|(n, _)| n == group)
                    .expect("group exists")
                    .1
                    .data_mut()[i] = v;
            },
            &loss,
        );
        push(entries, target, group, err, tolerance);
    }
    Ok(())
}

/// Architecture used for the standard model-level checks: every structural
/// feature present at the smallest useful size.
pub fn tiny_arch(variant: Variant) -> ArchConfig {
    ArchConfig {
        window: 24,
        channels: 2,
        classes: 2,
        filters: 3,
        kernel_len: 5,
        conv_layers: 4,
        hidden: 4,
        dropout_p: 0.25,
        variant,
        attention_score_hidden: None,
    }
}

/// Runs the whole verification suite: every layer plus both model variants.
pub fn gradcheck(tolerance: f64) -> Result<GradCheckReport> {
    if tolerance <= 0.0 || !tolerance.is_finite() {
        return Err(Error::Config(format!(
            "gradcheck tolerance must be positive and finite, got {tolerance}"
        )));
    }
    let mut entries = Vec::new();
    check_linear(&mut entries)?;
    check_conv(&mut entries)?;
    check_dropout(&mut entries)?;
    check_lstm(&mut entries, tolerance)?;
    check_attention(&mut entries, tolerance)?;
    gradcheck_model(&tiny_arch(Variant::Baseline), tolerance, &mut entries)?;
    gradcheck_model(&tiny_arch(Variant::Attention), tolerance, &mut entries)?;
    Ok(GradCheckReport { tolerance, entries })
}
