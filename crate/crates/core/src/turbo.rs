//! Turbo reconstruction: alternating soft support recovery (AMP) and soft
//! support decoding (HMT), with parameter learning in between.
//!
//! A round runs AMP under the current activity priors `lambda`, turns its
//! extrinsic LLRs into state likelihoods, re-learns the model parameters, and
//! decodes the quad-trees; the extrinsic tree messages become the next round's
//! `lambda`. AMP is warm-started from the previous round.

use std::time::Instant;

use log::{debug, info, warn};
use ndarray::{Array1, Array2, ArrayView2};

use crate::amp::{amp_run, AmpConfig, AmpState};
use crate::denoiser::{Priors, SignalModel};
use crate::error::{Error, Result};
use crate::hmt::{hmt_decode, llr_to_pmf_clamped, HmtParams, StateMessages, LLR_CLAMP};
use crate::learning::{
    extract_support, level_slot, update_gm_variances, update_noise, update_precisions,
    update_transitions, BetaPrior, GammaPrior, HyperParams,
};
use crate::measurement::{MeasurementOperator, Observation, SystemOperator};
use crate::wavelet::QuadTreeIndex;

#[derive(Debug, Clone, PartialEq)]
pub struct TurboConfig {
    pub model: SignalModel,
    pub max_turbo: usize,
    pub turbo_tol: f64,
    pub max_amp: usize,
    pub amp_tol: f64,
    /// `None` selects [`HyperParams::defaults`] for the geometry.
    pub hyper: Option<HyperParams>,
    /// Recorded in reports; reconstruction itself is deterministic.
    pub seed: u64,
    pub c_init_factor: f64,
    pub llr_clamp: f64,
    /// Re-estimate parameters every round; when off they stay at prior means.
    pub learn: bool,
    /// Which LLR is thresholded at zero to estimate the support for learning.
    pub support: SupportRule,
    /// Measurements are divided by this before reconstruction and the estimate
    /// multiplied back, so hyperparameters refer to the rescaled signal. The
    /// default hyperparameters suit unit-range pixels: use 255 for 8-bit images.
    /// Learned parameters are reported in rescaled units.
    pub signal_scale: f64,
}

/// The LLR on `s_n` whose sign marks a coefficient active during learning.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SupportRule {
    /// AMP's output LLR alone, without the prior used in that AMP run.
    Extrinsic,
    /// AMP's output LLR plus the logit of that prior: the posterior on `s_n`.
    Posterior,
}

impl Default for TurboConfig {
    fn default() -> Self {
        Self {
            model: SignalModel::BernoulliGaussian,
            max_turbo: 10,
            turbo_tol: 1e-5,
            max_amp: 10,
            amp_tol: 1e-5,
            hyper: None,
            seed: 0,
            c_init_factor: 100.0,
            llr_clamp: LLR_CLAMP,
            learn: true,
            support: SupportRule::Posterior,
            signal_scale: 1.0,
        }
    }
}

impl TurboConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_turbo == 0 || self.max_amp == 0 {
            return Err(Error::Config("iteration caps must be at least 1".into()));
        }
        if !(self.turbo_tol > 0.0 && self.amp_tol > 0.0) {
            return Err(Error::Config("tolerances must be positive".into()));
        }
        if !(self.signal_scale > 0.0 && self.signal_scale.is_finite()) {
            return Err(Error::Config(format!("signal_scale {} must be positive", self.signal_scale)));
        }
        if !(self.c_init_factor > 0.0 && self.llr_clamp > 0.0) {
            return Err(Error::Config("c_init_factor and llr_clamp must be positive".into()));
        }
        Ok(())
    }

    pub fn hyper_for(&self, tree: &QuadTreeIndex) -> Result<HyperParams> {
        let h = match &self.hyper {
            Some(h) => h.clone(),
            None => HyperParams::defaults(tree),
        };
        h.validate(tree.depth())?;
        Ok(h)
    }

    fn amp(&self) -> AmpConfig {
        AmpConfig {
            max_iter: self.max_amp,
            tol: self.amp_tol,
            c_init_factor: self.c_init_factor,
            ..AmpConfig::default()
        }
    }
}

/// Parameters in force after a round.
#[derive(Debug, Clone, PartialEq)]
pub struct LearnedParams {
    pub hmt: HmtParams,
    /// Active (BG) or large (GM) variance per level `-1..J-1`.
    pub level_variances: Vec<f64>,
    /// GM small variances per level, empty for BG.
    pub small_variances: Vec<f64>,
    pub sigma2: f64,
}

/// Per-round trace record.
#[derive(Debug, Clone, PartialEq)]
pub struct TurboRound {
    pub round: usize,
    pub amp_iters: usize,
    /// `||mu^(t) - mu^(t-1)||_2`.
    pub delta_mu: f64,
    /// AMP's final effective noise variance.
    pub c: f64,
    /// NMSE of this round's estimate when the truth is known.
    pub nmse_db: Option<f64>,
    pub params: LearnedParams,
}

#[derive(Debug, Clone)]
pub struct ReconstructionReport {
    pub theta_hat: Array1<f64>,
    pub image_hat: Array2<f64>,
    pub nmse_db: Option<f64>,
    pub turbo_iters: usize,
    pub amp_iters_per_turbo: Vec<usize>,
    /// Parameters after the last round.
    pub learned_params: LearnedParams,
    pub sigma2_trajectory: Vec<f64>,
    pub wall_time_s: f64,
    pub trace: Vec<TurboRound>,
    /// Round whose AMP run diverged; the estimate then comes from the round before.
    pub amp_diverged_at: Option<usize>,
}

impl ReconstructionReport {
    pub fn total_amp_iters(&self) -> usize {
        self.amp_iters_per_turbo.iter().sum()
    }
}

/// `10 log10(||x - x_hat||^2 / ||x||^2)`.
pub fn nmse_db(truth: ArrayView2<f64>, estimate: ArrayView2<f64>) -> f64 {
    let err: f64 = truth
        .iter()
        .zip(estimate.iter())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    let energy: f64 = truth.iter().map(|a| a * a).sum();
    10.0 * (err / energy).log10()
}

/// Activity priors for the first round: Beta means at the approximation band
/// and level 0, then the chain marginal
/// `lambda_{j+1} = lambda_j E[pi11_j] + (1 - lambda_j)(1 - E[pi00_j])`.
pub fn set_initial_priors(hyper: &HyperParams, tree: &QuadTreeIndex) -> Vec<f64> {
    let mut per_level = vec![hyper.beta_approx.mean(), hyper.beta_root.mean()];
    for j in 0..tree.depth().saturating_sub(1) {
        let l = per_level[j + 1];
        let p11 = hyper.beta_trans11[j].mean();
        let p00 = hyper.beta_trans00[j].mean();
        per_level.push(l * p11 + (1.0 - l) * (1.0 - p00));
    }
    (0..tree.n_total())
        .map(|n| per_level[level_slot(tree.level(n))])
        .collect()
}

/// Soft support decoding stage, swappable for testing.
pub trait SupportDecoder: Sync {
    fn decode(
        &self,
        tree: &QuadTreeIndex,
        params: &HmtParams,
        msgs: &StateMessages,
    ) -> Result<StateMessages>;
}

/// Exact sum-product on the quad-trees.
#[derive(Debug, Clone, Copy, Default)]
pub struct HmtDecoder;

impl SupportDecoder for HmtDecoder {
    fn decode(
        &self,
        tree: &QuadTreeIndex,
        params: &HmtParams,
        msgs: &StateMessages,
    ) -> Result<StateMessages> {
        hmt_decode(tree, params, msgs)
    }
}

fn per_coefficient(tree: &QuadTreeIndex, per_level: &[f64]) -> Vec<f64> {
    tree.levels().iter().map(|&l| per_level[level_slot(l)]).collect()
}

fn check_inputs(obs: &Observation, op: &MeasurementOperator, tree: &QuadTreeIndex) -> Result<()> {
    if op.n() != tree.n_total() {
        return Err(Error::DimensionMismatch {
            expected: tree.n_total(),
            actual: op.n(),
            context: "operator columns vs coefficient count",
        });
    }
    if obs.y.len() != op.m() {
        return Err(Error::DimensionMismatch {
            expected: op.m(),
            actual: obs.y.len(),
            context: "measurement count",
        });
    }
    Ok(())
}

/// How the priors are refreshed between AMP runs.
enum Stage<'a> {
    Tree(&'a dyn SupportDecoder),
    Flat,
}

struct Engine<'a> {
    /// Measurements divided by `cfg.signal_scale`.
    y: Array1<f64>,
    a: SystemOperator<'a>,
    tree: &'a QuadTreeIndex,
    cfg: &'a TurboConfig,
    hyper: HyperParams,
    model: SignalModel,
}

impl Engine<'_> {
    fn priors(&self, lambda: &[f64], p: &LearnedParams) -> Result<Priors> {
        let large = per_coefficient(self.tree, &p.level_variances);
        match self.model {
            SignalModel::BernoulliGaussian => Priors::bernoulli_gaussian(lambda.to_vec(), large),
            SignalModel::GaussianMixture => {
                // keep the mixture ordered when a level has few active coefficients
                let small: Vec<f64> = per_coefficient(self.tree, &p.small_variances)
                    .iter()
                    .zip(&large)
                    .map(|(s, l)| s.min(*l))
                    .collect();
                Priors::gaussian_mixture(lambda.to_vec(), large, small)
            }
        }
    }

    fn noise(&self, mu: &Array1<f64>) -> Result<f64> {
        match self.model {
            SignalModel::BernoulliGaussian => {
                update_noise(&self.hyper.gamma_noise, self.y.view(), &self.a, mu.view())
            }
            SignalModel::GaussianMixture => Ok(0.0),
        }
    }

    fn run(
        &self,
        stage: Stage<'_>,
        lambda0: Vec<f64>,
        params0: LearnedParams,
        truth: Option<ArrayView2<f64>>,
    ) -> Result<ReconstructionReport> {
        let start = Instant::now();
        let n = self.tree.n_total();
        let amp_cfg = self.cfg.amp();
        let mut lambda = lambda0;
        let mut params = params0;
        let mut sigma2_traj = vec![params.sigma2];
        let mut state: Option<AmpState> = None;
        let mut mu_prev = Array1::<f64>::zeros(n);
        let mut trace = Vec::new();
        let mut amp_iters = Vec::new();
        let mut diverged = None;

        for t in 1..=self.cfg.max_turbo {
            let priors = self.priors(&lambda, &params)?;
            let run = amp_run(
                &self.a,
                self.y.view(),
                params.sigma2,
                &priors,
                &amp_cfg,
                state.as_ref(),
            );
            let next = match run {
                Ok(s) => s,
                Err(Error::AmpDiverged { iter, ratio, .. }) if state.is_some() => {
                    warn!("AMP diverged in turbo round {t} (iter {iter}, ratio {ratio:.2e}); keeping round {}", t - 1);
                    diverged = Some(t);
                    break;
                }
                Err(e) => return Err(e),
            };
            amp_iters.push(next.iter);
            let delta = (&next.mu - &mu_prev).mapv(|v| v * v).sum().sqrt();
            let clamp = self.cfg.llr_clamp;
            let llr: Vec<f64> = next.llr.iter().map(|l| l.clamp(-clamp, clamp)).collect();

            if self.cfg.learn {
                let support_llr: Vec<f64> = match self.cfg.support {
                    SupportRule::Extrinsic => llr.clone(),
                    SupportRule::Posterior => llr
                        .iter()
                        .zip(&lambda)
                        .map(|(l, p)| (l + (p / (1.0 - p)).ln()).clamp(-clamp, clamp))
                        .collect(),
                };
                params = self.learn(&stage, &support_llr, &next.mu, &params)?;
            }
            lambda = match &stage {
                Stage::Tree(decoder) => {
                    let msgs = StateMessages::from_likelihoods(llr_to_pmf_clamped(&llr, clamp)?);
                    decoder.decode(self.tree, &params.hmt, &msgs)?.activity()
                }
                Stage::Flat => vec![params.hmt.pi_root; n],
            };
            sigma2_traj.push(params.sigma2);
            debug!(
                "turbo round {t}: {} AMP iters, delta {delta:.3e}, c {:.3e}, sigma2 {:.3e}",
                next.iter, next.c, params.sigma2
            );
            trace.push(TurboRound {
                round: t,
                amp_iters: next.iter,
                delta_mu: delta,
                c: next.c,
                nmse_db: match truth {
                    Some(x) => {
                        let est = self.a.haar().inverse(next.mu.view())? * self.cfg.signal_scale;
                        Some(nmse_db(x, est.view()))
                    }
                    None => None,
                },
                params: params.clone(),
            });
            mu_prev = next.mu.clone();
            state = Some(next);
            if delta < self.cfg.turbo_tol {
                break;
            }
        }

        let theta_hat = state.expect("first round completed").mu * self.cfg.signal_scale;
        let image_hat = self.a.haar().inverse(theta_hat.view())?;
        let nmse = truth.map(|x| nmse_db(x, image_hat.view()));
        let report = ReconstructionReport {
            theta_hat,
            image_hat,
            nmse_db: nmse,
            turbo_iters: trace.len(),
            amp_iters_per_turbo: amp_iters,
            learned_params: params,
            sigma2_trajectory: sigma2_traj,
            wall_time_s: start.elapsed().as_secs_f64(),
            trace,
            amp_diverged_at: diverged,
        };
        info!(
            "reconstruction done: {} rounds, {} AMP iterations, {:.2}s",
            report.turbo_iters,
            report.total_amp_iters(),
            report.wall_time_s
        );
        Ok(report)
    }

    fn learn(
        &self,
        stage: &Stage<'_>,
        llr: &[f64],
        mu: &Array1<f64>,
        prev: &LearnedParams,
    ) -> Result<LearnedParams> {
        let sigma2 = self.noise(mu)?;
        match stage {
            Stage::Tree(_) => {
                let support = extract_support(llr, self.tree)?;
                let hmt = update_transitions(&self.hyper, &support);
                let (level_variances, small_variances) = match self.model {
                    SignalModel::BernoulliGaussian => {
                        (update_precisions(&self.hyper, &support, mu.view()), Vec::new())
                    }
                    SignalModel::GaussianMixture => update_gm_variances(&self.hyper, llr, mu.view(), self.tree)
                        .into_iter()
                        .unzip(),
                };
                Ok(LearnedParams {
                    hmt,
                    level_variances,
                    small_variances,
                    sigma2,
                })
            }
            Stage::Flat => {
                let active: Vec<usize> = (0..llr.len()).filter(|&k| llr[k] > 0.0).collect();
                let ss: f64 = active.iter().map(|&k| mu[k] * mu[k]).sum();
                let var = FLAT_GAMMA.posterior(active.len(), ss).variance();
                let pi = flat_beta(llr.len()).posterior(llr.len(), active.len()).mean();
                Ok(LearnedParams {
                    hmt: HmtParams {
                        pi_root: pi,
                        ..prev.hmt.clone()
                    },
                    level_variances: vec![var; prev.level_variances.len()],
                    small_variances: Vec::new(),
                    sigma2,
                })
            }
        }
    }
}

/// Turbo reconstruction of the wavelet coefficients behind `obs`.
pub fn reconstruct(
    obs: &Observation,
    op: &MeasurementOperator,
    tree: &QuadTreeIndex,
    cfg: &TurboConfig,
    truth: Option<ArrayView2<f64>>,
) -> Result<ReconstructionReport> {
    reconstruct_with(obs, op, tree, cfg, truth, &HmtDecoder)
}

/// [`reconstruct`] with a caller-supplied support decoder.
pub fn reconstruct_with(
    obs: &Observation,
    op: &MeasurementOperator,
    tree: &QuadTreeIndex,
    cfg: &TurboConfig,
    truth: Option<ArrayView2<f64>>,
    decoder: &dyn SupportDecoder,
) -> Result<ReconstructionReport> {
    cfg.validate()?;
    check_inputs(obs, op, tree)?;
    let hyper = cfg.hyper_for(tree)?;
    let lambda0 = set_initial_priors(&hyper, tree);
    let level_variances: Vec<f64> = hyper.gamma_level.iter().map(GammaPrior::variance).collect();
    let small_variances = match cfg.model {
        SignalModel::BernoulliGaussian => Vec::new(),
        SignalModel::GaussianMixture => hyper.gamma_small.iter().map(GammaPrior::variance).collect(),
    };
    let sigma2 = match cfg.model {
        SignalModel::BernoulliGaussian => hyper.gamma_noise.variance(),
        SignalModel::GaussianMixture => 0.0,
    };
    let params0 = LearnedParams {
        hmt: hyper.prior_hmt(),
        level_variances,
        small_variances,
        sigma2,
    };
    let engine = Engine {
        y: &obs.y / cfg.signal_scale,
        a: SystemOperator::new(op, tree.depth())?,
        tree,
        cfg,
        hyper,
        model: cfg.model,
    };
    engine.run(Stage::Tree(decoder), lambda0, params0, truth)
}

/// Flat-prior hyperprior on the common signal precision.
pub const FLAT_GAMMA: GammaPrior = GammaPrior { a: 1e-10, b: 1e-10 };

/// Flat-prior hyperprior on the common activity rate, `(0.1 N, 0.9 N)`.
pub fn flat_beta(n: usize) -> BetaPrior {
    BetaPrior::with_mean(0.1, n as f64)
}

/// BG-AMP baseline without tree structure: one activity rate and one variance
/// shared by all coefficients, learned between AMP runs with the same schedule
/// as [`reconstruct`]. `cfg.model` is ignored.
pub fn reconstruct_flat_bg(
    obs: &Observation,
    op: &MeasurementOperator,
    tree: &QuadTreeIndex,
    cfg: &TurboConfig,
    truth: Option<ArrayView2<f64>>,
) -> Result<ReconstructionReport> {
    cfg.validate()?;
    check_inputs(obs, op, tree)?;
    let hyper = cfg.hyper_for(tree)?;
    let n = tree.n_total();
    let pi = flat_beta(n).mean();
    let params0 = LearnedParams {
        hmt: HmtParams::uninformative(pi, pi, tree.depth()),
        level_variances: vec![FLAT_GAMMA.variance(); tree.depth() + 1],
        small_variances: Vec::new(),
        sigma2: hyper.gamma_noise.variance(),
    };
    let engine = Engine {
        y: &obs.y / cfg.signal_scale,
        a: SystemOperator::new(op, tree.depth())?,
        tree,
        cfg,
        hyper,
        model: SignalModel::BernoulliGaussian,
    };
    engine.run(Stage::Flat, vec![pi; n], params0, truth)
}
