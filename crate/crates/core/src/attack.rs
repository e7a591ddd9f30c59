//! Constrained sign-gradient attacks.
//!
//! The haze attacks optimise atmospheric light and scattering coefficient,
//! either as one scalar pair ([`attack_hadvhaze`]) or as Gaussian-smoothed
//! per-pixel fields ([`attack_iadvhaze`]). Both use the momentum update of
//! MI-FGSM and project parameters back into an l-infinity box after every
//! step. The pixel-space baselines perturb the image directly.

use serde::{Deserialize, Serialize};

use crate::classifier::DifferentiableClassifier;
use crate::error::{Error, Result};
use crate::haze::{
    grad_haze_params, grad_haze_scalars, haze_forward, haze_homogeneous, HazeFields, HazeForward, HazeScalars,
};
use crate::imagecore::{ensure_same_dims, gaussian_kernel, DepthMap, Image, ScalarField};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AttackConfig {
    pub eps_a: f64,
    pub eps_b: f64,
    pub a0: f64,
    pub b0: f64,
    pub alpha_a: f64,
    pub alpha_b: f64,
    pub n: usize,
    pub mu: f64,
    pub sigma_a: f64,
    pub sigma_b: f64,
    /// Stop as soon as the prediction flips. Off by default.
    pub early_stop: bool,
}

impl Default for AttackConfig {
    fn default() -> Self {
        Self {
            eps_a: 0.1,
            eps_b: 0.1,
            a0: 0.9,
            b0: 0.1,
            alpha_a: 0.01,
            alpha_b: 0.01,
            n: 10,
            mu: 1.0,
            sigma_a: 3.0,
            sigma_b: 3.0,
            early_stop: false,
        }
    }
}

impl AttackConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("eps_a", self.eps_a),
            ("eps_b", self.eps_b),
            ("alpha_a", self.alpha_a),
            ("alpha_b", self.alpha_b),
            ("sigma_a", self.sigma_a),
            ("sigma_b", self.sigma_b),
        ];
        for (name, v) in positive {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::Config(format!("{name} must be > 0, got {v}")));
            }
        }
        if !(0.0..=1.0).contains(&self.a0) {
            return Err(Error::Config(format!("a0 must lie in [0, 1], got {}", self.a0)));
        }
        if !self.b0.is_finite() || self.b0 < 0.0 {
            return Err(Error::Config(format!("b0 must be >= 0, got {}", self.b0)));
        }
        if !self.mu.is_finite() || self.mu < 0.0 {
            return Err(Error::Config(format!("mu must be >= 0, got {}", self.mu)));
        }
        self.a_bounds()?;
        self.beta_bounds()?;
        Ok(())
    }

    /// Feasible interval for atmospheric light.
    pub fn a_bounds(&self) -> Result<(f64, f64)> {
        box_bounds(self.a0, self.eps_a, 0.0, 1.0)
    }

    /// Feasible interval for the scattering coefficient.
    pub fn beta_bounds(&self) -> Result<(f64, f64)> {
        box_bounds(self.b0, self.eps_b, 0.0, f64::INFINITY)
    }
}

/// Settings shared by the pixel-space baselines.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PixelAttackConfig {
    pub eps: f64,
    pub n: usize,
    pub mu: f64,
}

impl Default for PixelAttackConfig {
    fn default() -> Self {
        Self {
            eps: 10.0 / 255.0,
            n: 10,
            mu: 1.0,
        }
    }
}

impl PixelAttackConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.eps.is_finite() || self.eps < 0.0 {
            return Err(Error::Config(format!("eps must be >= 0, got {}", self.eps)));
        }
        if self.n == 0 {
            return Err(Error::Config("n must be >= 1".into()));
        }
        if !self.mu.is_finite() || self.mu < 0.0 {
            return Err(Error::Config(format!("mu must be >= 0, got {}", self.mu)));
        }
        Ok(())
    }
}

/// Final parameters found by an attack.
#[derive(Debug, Clone, PartialEq)]
pub enum AttackParams {
    Homogeneous(HazeScalars),
    Fields(HazeFields),
    Pixel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttackResult {
    pub adversarial: Image,
    pub params: AttackParams,
    pub pred_clean: usize,
    pub pred_adv: usize,
    pub true_label: usize,
    pub success: bool,
    /// Loss at every iterate including the initial and the final one.
    pub loss_trace: Vec<f64>,
    pub iterations_run: usize,
}

/// `[max(center - eps, lo), min(center + eps, hi)]`, or an error when empty.
pub fn box_bounds(center: f64, eps: f64, lo: f64, hi: f64) -> Result<(f64, f64)> {
    let (l, h) = ((center - eps).max(lo), (center + eps).min(hi));
    if l.is_nan() || h.is_nan() || l > h {
        return Err(Error::Config(format!(
            "empty feasible interval: [{center} - {eps}, {center} + {eps}] and [{lo}, {hi}] do not intersect"
        )));
    }
    Ok((l, h))
}

/// Clamps every value into the feasible box around `center`.
pub fn project_box(values: &mut [f64], center: f64, eps: f64, lo: f64, hi: f64) -> Result<()> {
    let (l, h) = box_bounds(center, eps, lo, hi)?;
    for v in values {
        *v = v.clamp(l, h);
    }
    Ok(())
}

/// `g <- mu * g + grad / ||grad||_1`; the gradient term is dropped when its
/// norm is zero.
pub fn momentum_update(g: &mut [f64], grad: &[f64], mu: f64) -> Result<()> {
    if g.len() != grad.len() {
        return Err(Error::shape(g.len(), grad.len()));
    }
    let norm: f64 = grad.iter().map(|v| v.abs()).sum();
    if !norm.is_finite() {
        let index = grad.iter().position(|v| !v.is_finite()).unwrap_or(0);
        return Err(Error::NonFinite { index });
    }
    if norm > 0.0 {
        for (gi, &di) in g.iter_mut().zip(grad) {
            *gi = mu * *gi + di / norm;
        }
    } else {
        for gi in g.iter_mut() {
            *gi *= mu;
        }
    }
    Ok(())
}

/// Sign with `sign(0) = 0`.
fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn check_label(clf: &dyn DifferentiableClassifier, y: usize) -> Result<()> {
    if y >= clf.num_classes() {
        return Err(Error::invalid(format!(
            "label {y} out of range for {} classes",
            clf.num_classes()
        )));
    }
    Ok(())
}

fn finish(
    clf: &dyn DifferentiableClassifier,
    clean: &Image,
    y: usize,
    adversarial: Image,
    params: AttackParams,
    loss_trace: Vec<f64>,
    pred_adv: usize,
) -> Result<AttackResult> {
    let pred_clean = clf.predict(clean)?;
    Ok(AttackResult {
        adversarial,
        params,
        pred_clean,
        pred_adv,
        true_label: y,
        success: pred_adv != y,
        iterations_run: loss_trace.len() - 1,
        loss_trace,
    })
}

/// Homogeneous haze attack on one `(A, beta)` pair.
pub fn attack_hadvhaze(
    i: &Image,
    d: &DepthMap,
    clf: &dyn DifferentiableClassifier,
    y: usize,
    cfg: &AttackConfig,
) -> Result<AttackResult> {
    attack_hadvhaze_observed(i, d, clf, y, cfg, |_, _| {})
}

/// [`attack_hadvhaze`], calling `observe(k, params)` on every iterate
/// `k = 0..=iterations_run`.
pub fn attack_hadvhaze_observed(
    i: &Image,
    d: &DepthMap,
    clf: &dyn DifferentiableClassifier,
    y: usize,
    cfg: &AttackConfig,
    mut observe: impl FnMut(usize, HazeScalars),
) -> Result<AttackResult> {
    cfg.validate()?;
    check_label(clf, y)?;
    ensure_same_dims(i.dims(), d.dims())?;
    let (a_lo, a_hi) = cfg.a_bounds()?;
    let (b_lo, b_hi) = cfg.beta_bounds()?;
    let mut s = HazeScalars::new(cfg.a0, cfg.b0)?;
    let (mut g_a, mut g_b) = (0.0, 0.0);
    let mut trace = Vec::with_capacity(cfg.n + 1);
    for k in 0..=cfg.n {
        observe(k, s);
        let hazy = haze_homogeneous(i, d, s)?;
        let lg = clf.loss_and_grad(&hazy, y)?;
        trace.push(lg.loss);
        let pred = lg.logits.argmax();
        if k == cfg.n || (cfg.early_stop && pred != y) {
            return finish(clf, i, y, hazy, AttackParams::Homogeneous(s), trace, pred);
        }
        let (da, db) = grad_haze_scalars(&lg.grad, i, d, s)?;
        let mut ga = [g_a];
        let mut gb = [g_b];
        momentum_update(&mut ga, &[da], cfg.mu)?;
        momentum_update(&mut gb, &[db], cfg.mu)?;
        (g_a, g_b) = (ga[0], gb[0]);
        s = HazeScalars::new(
            (s.a + cfg.alpha_a * sign(g_a)).clamp(a_lo, a_hi),
            (s.beta + cfg.alpha_b * sign(g_b)).clamp(b_lo, b_hi),
        )?;
    }
    unreachable!("loop returns on its last iteration")
}

/// Inhomogeneous haze attack on smoothed per-pixel fields.
pub fn attack_iadvhaze(
    i: &Image,
    d: &DepthMap,
    clf: &dyn DifferentiableClassifier,
    y: usize,
    cfg: &AttackConfig,
) -> Result<AttackResult> {
    attack_iadvhaze_observed(i, d, clf, y, cfg, |_, _, _| {})
}

/// [`attack_iadvhaze`], calling `observe(k, raw_fields, forward)` on every
/// iterate `k = 0..=iterations_run`.
pub fn attack_iadvhaze_observed(
    i: &Image,
    d: &DepthMap,
    clf: &dyn DifferentiableClassifier,
    y: usize,
    cfg: &AttackConfig,
    mut observe: impl FnMut(usize, &HazeFields, &HazeForward),
) -> Result<AttackResult> {
    cfg.validate()?;
    check_label(clf, y)?;
    ensure_same_dims(i.dims(), d.dims())?;
    let (h, w) = i.dims();
    let k_a = gaussian_kernel(cfg.sigma_a)?;
    let k_b = gaussian_kernel(cfg.sigma_b)?;
    let mut p = HazeFields::constant(h, w, HazeScalars::new(cfg.a0, cfg.b0)?);
    let mut g_a = vec![0.0; h * w];
    let mut g_b = vec![0.0; h * w];
    let mut trace = Vec::with_capacity(cfg.n + 1);
    for k in 0..=cfg.n {
        let fwd = haze_forward(i, d, &p, &k_a, &k_b)?;
        observe(k, &p, &fwd);
        let lg = clf.loss_and_grad(&fwd.hazy, y)?;
        trace.push(lg.loss);
        let pred = lg.logits.argmax();
        if k == cfg.n || (cfg.early_stop && pred != y) {
            return finish(clf, i, y, fwd.hazy, AttackParams::Fields(p), trace, pred);
        }
        let (da, db) = grad_haze_params(&lg.grad, i, d, &fwd.a, &fwd.t, &k_a, &k_b)?;
        momentum_update(&mut g_a, da.data(), cfg.mu)?;
        momentum_update(&mut g_b, db.data(), cfg.mu)?;
        let mut a_raw = p.a_raw.into_data();
        let mut b_raw = p.beta_raw.into_data();
        for (v, g) in a_raw.iter_mut().zip(&g_a) {
            *v += cfg.alpha_a * sign(*g);
        }
        for (v, g) in b_raw.iter_mut().zip(&g_b) {
            *v += cfg.alpha_b * sign(*g);
        }
        project_box(&mut a_raw, cfg.a0, cfg.eps_a, 0.0, 1.0)?;
        project_box(&mut b_raw, cfg.b0, cfg.eps_b, 0.0, f64::INFINITY)?;
        p = HazeFields::new(ScalarField::new(h, w, a_raw)?, ScalarField::new(h, w, b_raw)?)?;
    }
    unreachable!("loop returns on its last iteration")
}

/// Iterated sign steps of size `eps / n` in pixel space, optionally with
/// momentum, projected onto the `eps`-ball around `i` and then onto `[0, 1]`.
fn pixel_attack(
    i: &Image,
    clf: &dyn DifferentiableClassifier,
    y: usize,
    eps: f64,
    n: usize,
    mu: Option<f64>,
) -> Result<AttackResult> {
    check_label(clf, y)?;
    let (h, w) = i.dims();
    let step = eps / n as f64;
    let mut x = i.clone();
    let mut g = vec![0.0; i.data().len()];
    let mut trace = Vec::with_capacity(n + 1);
    for k in 0..=n {
        let lg = clf.loss_and_grad(&x, y)?;
        trace.push(lg.loss);
        if k == n {
            let pred = lg.logits.argmax();
            return finish(clf, i, y, x, AttackParams::Pixel, trace, pred);
        }
        match mu {
            Some(mu) => momentum_update(&mut g, lg.grad.data(), mu)?,
            None => g.copy_from_slice(lg.grad.data()),
        }
        let data: Vec<f64> = x
            .data()
            .iter()
            .zip(i.data())
            .zip(&g)
            .map(|((&xv, &iv), &gv)| (xv + step * sign(gv)).clamp(iv - eps, iv + eps).clamp(0.0, 1.0))
            .collect();
        x = Image::new(h, w, data)?;
    }
    unreachable!("loop returns on its last iteration")
}

/// One sign step of size `eps`.
pub fn baseline_fgsm(
    i: &Image,
    clf: &dyn DifferentiableClassifier,
    y: usize,
    eps: f64,
) -> Result<AttackResult> {
    PixelAttackConfig { eps, n: 1, mu: 0.0 }.validate()?;
    pixel_attack(i, clf, y, eps, 1, None)
}

pub fn baseline_ifgsm(
    i: &Image,
    clf: &dyn DifferentiableClassifier,
    y: usize,
    cfg: &PixelAttackConfig,
) -> Result<AttackResult> {
    cfg.validate()?;
    pixel_attack(i, clf, y, cfg.eps, cfg.n, None)
}

pub fn baseline_mifgsm(
    i: &Image,
    clf: &dyn DifferentiableClassifier,
    y: usize,
    cfg: &PixelAttackConfig,
) -> Result<AttackResult> {
    cfg.validate()?;
    pixel_attack(i, clf, y, cfg.eps, cfg.n, Some(cfg.mu))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classifier::{ReferenceClassifier, ReferenceCnnWeights};
    use crate::imagecore::{synthetic_depth, SyntheticDepth};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn setup(seed: u64, side: usize) -> (ReferenceClassifier, Image, DepthMap, usize) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut w = ReferenceCnnWeights::init(8, 4, &mut rng).unwrap();
        for b in w.conv1_b.iter_mut().chain(w.conv2_b.iter_mut()) {
            *b = rng.gen_range(0.0..0.1);
        }
        let img = Image::from_fn(side, side, |_, _, _| rng.gen_range(0.0..=1.0)).unwrap();
        let d = synthetic_depth(SyntheticDepth::VRamp, side, side).unwrap();
        let clf = ReferenceClassifier::new(w).unwrap();
        let y = clf_label(&clf, &img);
        (clf, img, d, y)
    }

    fn clf_label(clf: &ReferenceClassifier, img: &Image) -> usize {
        use crate::classifier::Classifier;
        clf.predict(img).unwrap()
    }

    #[test]
    fn momentum_examples() {
        let mut g = [0.0; 3];
        momentum_update(&mut g, &[1.0, -2.0, 1.0], 1.0).unwrap();
        assert_eq!(g, [0.25, -0.5, 0.25]);

        let mut g = [5.0, 5.0];
        momentum_update(&mut g, &[3.0, -1.0], 0.0).unwrap();
        assert_eq!(g, [0.75, -0.25]);

        let u = [0.5, -0.25, 0.25];
        let mut g = [0.0; 3];
        momentum_update(&mut g, &u, 1.0).unwrap();
        momentum_update(&mut g, &u, 1.0).unwrap();
        assert_eq!(g, [1.0, -0.5, 0.5]);

        let mut g = [0.4, -0.2];
        momentum_update(&mut g, &[0.0, 0.0], 0.5).unwrap();
        assert_eq!(g, [0.2, -0.1]);

        assert!(momentum_update(&mut [0.0], &[f64::NAN], 1.0).is_err());
    }

    #[test]
    fn projection_examples() {
        let mut v = [0.95];
        project_box(&mut v, 0.9, 0.1, 0.0, 1.0).unwrap();
        assert_eq!(v, [0.95]);
        let mut v = [1.3];
        project_box(&mut v, 0.9, 0.1, 0.0, 1.0).unwrap();
        assert_eq!(v, [1.0]);
        let mut v = [-0.5];
        project_box(&mut v, 0.1, 0.1, 0.0, f64::INFINITY).unwrap();
        assert_eq!(v, [0.0]);
        assert!(project_box(&mut v, 1.5, 0.1, 0.0, 1.0).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(AttackConfig::default().validate().is_ok());
        let bad = AttackConfig {
            a0: 1.2,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = AttackConfig {
            eps_a: 0.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = AttackConfig {
            sigma_b: -1.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        assert_eq!(AttackConfig::default().a_bounds().unwrap().1, 1.0);
        assert_eq!(AttackConfig::default().beta_bounds().unwrap().0, 0.0);
    }

    #[test]
    fn zero_iterations_render_the_initial_haze() {
        let (clf, img, d, y) = setup(1, 12);
        let cfg = AttackConfig {
            n: 0,
            ..Default::default()
        };
        let r = attack_hadvhaze(&img, &d, &clf, y, &cfg).unwrap();
        let want = haze_homogeneous(&img, &d, HazeScalars::new(0.9, 0.1).unwrap()).unwrap();
        assert_eq!(r.adversarial, want);
        assert_eq!(r.loss_trace.len(), 1);
        assert_eq!(r.iterations_run, 0);
    }

    #[test]
    fn traces_have_n_plus_one_entries_and_success_matches_prediction() {
        let (clf, img, d, y) = setup(2, 12);
        let cfg = AttackConfig::default();
        for r in [
            attack_hadvhaze(&img, &d, &clf, y, &cfg).unwrap(),
            attack_iadvhaze(&img, &d, &clf, y, &cfg).unwrap(),
        ] {
            assert_eq!(r.loss_trace.len(), 11);
            assert_eq!(r.iterations_run, 10);
            assert_eq!(r.success, r.pred_adv != r.true_label);
            assert_eq!(r.pred_adv, clf_label(&clf, &r.adversarial));
        }
    }

    #[test]
    fn iterates_stay_in_their_boxes() {
        let (clf, img, d, y) = setup(3, 16);
        let cfg = AttackConfig::default();
        let mut seen = 0;
        attack_iadvhaze_observed(&img, &d, &clf, y, &cfg, |_, p, fwd| {
            seen += 1;
            for f in [&p.a_raw, &fwd.a] {
                assert!(f.min() >= 0.8 - 1e-15 && f.max() <= 1.0);
            }
            for f in [&p.beta_raw, &fwd.beta] {
                assert!(f.min() >= 0.0 && f.max() <= 0.2 + 1e-15);
            }
        })
        .unwrap();
        assert_eq!(seen, 11);
        attack_hadvhaze_observed(&img, &d, &clf, y, &cfg, |_, s| {
            assert!((0.8 - 1e-15..=1.0).contains(&s.a));
            assert!((0.0..=0.2 + 1e-15).contains(&s.beta));
        })
        .unwrap();
    }

    #[test]
    fn single_pixel_inhomogeneous_matches_homogeneous() {
        let (clf, _, _, _) = setup(4, 1);
        let img = Image::from_fn(1, 1, |_, _, c| 0.2 + 0.3 * c as f64).unwrap();
        let d = DepthMap::new(ScalarField::filled(1, 1, 0.7)).unwrap();
        let y = clf_label(&clf, &img);
        let cfg = AttackConfig::default();
        let hom = attack_hadvhaze(&img, &d, &clf, y, &cfg).unwrap();
        let inh = attack_iadvhaze(&img, &d, &clf, y, &cfg).unwrap();
        for (a, b) in hom.loss_trace.iter().zip(&inh.loss_trace) {
            assert!((a - b).abs() < 1e-12);
        }
        for (a, b) in hom.adversarial.data().iter().zip(inh.adversarial.data()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn tiny_ball_barely_moves() {
        let (clf, img, d, y) = setup(5, 12);
        let cfg = AttackConfig {
            eps_a: 1e-9,
            eps_b: 1e-9,
            ..Default::default()
        };
        let r = attack_iadvhaze(&img, &d, &clf, y, &cfg).unwrap();
        let init = haze_homogeneous(&img, &d, HazeScalars::new(0.9, 0.1).unwrap()).unwrap();
        for (a, b) in r.adversarial.data().iter().zip(init.data()) {
            assert!((a - b).abs() < 1e-8);
        }
        assert!((r.loss_trace[10] - r.loss_trace[0]).abs() < 1e-6);
    }

    #[test]
    fn attacks_are_deterministic() {
        let (clf, img, d, y) = setup(6, 12);
        let cfg = AttackConfig::default();
        assert_eq!(
            attack_iadvhaze(&img, &d, &clf, y, &cfg).unwrap(),
            attack_iadvhaze(&img, &d, &clf, y, &cfg).unwrap()
        );
    }

    #[test]
    fn early_stop_truncates_trace() {
        let (clf, img, d, _) = setup(7, 12);
        let init = haze_homogeneous(&img, &d, HazeScalars::new(0.9, 0.1).unwrap()).unwrap();
        let other = (clf_label(&clf, &init) + 1) % 4;
        let cfg = AttackConfig {
            early_stop: true,
            ..Default::default()
        };
        let r = attack_hadvhaze(&img, &d, &clf, other, &cfg).unwrap();
        assert_eq!(r.iterations_run, 0);
        assert_eq!(r.loss_trace.len(), 1);
        assert!(r.success);
    }

    #[test]
    fn fgsm_with_zero_eps_returns_clean_image() {
        let (clf, img, _, y) = setup(8, 12);
        let r = baseline_fgsm(&img, &clf, y, 0.0).unwrap();
        assert_eq!(r.adversarial, img);
        assert!(!r.success);
        let r = baseline_fgsm(&img, &clf, (y + 1) % 4, 0.0).unwrap();
        assert!(r.success);
    }

    #[test]
    fn mifgsm_without_momentum_is_fgsm() {
        for seed in 0..5 {
            let (clf, img, _, y) = setup(seed, 12);
            let eps = 10.0 / 255.0;
            let f = baseline_fgsm(&img, &clf, y, eps).unwrap();
            let m = baseline_mifgsm(&img, &clf, y, &PixelAttackConfig { eps, n: 1, mu: 0.0 }).unwrap();
            let bits = |r: &AttackResult| {
                r.adversarial
                    .data()
                    .iter()
                    .map(|v| v.to_bits())
                    .collect::<Vec<_>>()
            };
            assert_eq!(bits(&f), bits(&m));
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn pixel_attacks_respect_the_ball(seed in 0u64..1000, eps in 0.0f64..0.2) {
            let (clf, img, _, y) = setup(seed, 8);
            let cfg = PixelAttackConfig { eps, ..Default::default() };
            for r in [
                baseline_fgsm(&img, &clf, y, eps).unwrap(),
                baseline_ifgsm(&img, &clf, y, &cfg).unwrap(),
                baseline_mifgsm(&img, &clf, y, &cfg).unwrap(),
            ] {
                for (a, b) in r.adversarial.data().iter().zip(img.data()) {
                    prop_assert!((a - b).abs() <= eps + 1e-12);
                }
            }
        }
    }
}
