//! Entropy-form dual of the age minimization problem and its distributed
//! projected gradient ascent.
//!
//! For dual variables `λ_e > 0` and neighbor aggregates
//! `θ_e = Σ_{e': e ∈ N_e'} λ_e'`, the dual objective is
//!
//! ```text
//! G(λ) = Σ_e (λ_e + θ_e) H(λ_e / (λ_e + θ_e)) + Σ_e λ_e [1 + ln(w_e / (γ_e λ_e))]
//! ```
//!
//! with `H` the binary entropy in nats. `G` is concave, its maximizer `λ*`
//! equals the optimal weighted ages `w_e A*_e`, and the optimal attempt
//! probabilities are `p*_e = λ*_e / (λ*_e + θ*_e)`.
//!
//! The `γ_e` inside the logarithm follows from the stationarity condition
//! `λ_e = (w_e/γ_e) e^{-h_e}` of the log-transformed primal. Setting
//! `gamma_corrected = false` drops it, which reproduces the form that is
//! exact only for perfect channels; with some `γ_e < 1` that variant has a
//! nonzero duality gap.

use std::io::Write;

use crate::analytics::{closed_form_age, fixed_point_residual, max_abs};
use crate::error::{Error, Result};
use crate::network::{validate, Intent, Network};
use crate::sim::Policy;

/// Binary entropy in nats, `H(0) = H(1) = 0`.
pub fn entropy(x: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::OutOfRange {
            what: "entropy argument",
            range: "[0, 1]",
            value: x,
            link: 0,
        });
    }
    let term = |p: f64| if p == 0.0 { 0.0 } else { -p * p.ln() };
    Ok(term(x) + term(1.0 - x))
}

fn check_lambda(net: &Network, lambda: &[f64]) -> Result<()> {
    if lambda.len() != net.len() {
        return Err(Error::SizeMismatch {
            expected: net.len(),
            got: lambda.len(),
        });
    }
    match lambda.iter().position(|&l| !(l > 0.0 && l.is_finite())) {
        Some(link) => Err(Error::NonPositiveLambda {
            link,
            value: lambda[link],
        }),
        None => Ok(()),
    }
}

/// `θ_e = Σ_{e': e ∈ N_e'} λ_e'`.
pub fn neighbor_aggregate(net: &Network, lambda: &[f64]) -> Vec<f64> {
    (0..net.len())
        .map(|e| net.reverse_neighbors(e).iter().map(|&k| lambda[k]).sum())
        .collect()
}

fn log_term(net: &Network, e: usize, lambda: f64, gamma_corrected: bool) -> f64 {
    let scale = if gamma_corrected {
        net.weight(e) / net.gamma(e)
    } else {
        net.weight(e)
    };
    (scale / lambda).ln()
}

/// `(λ+θ) H(λ/(λ+θ))`, written as `λ ln(1+θ/λ) + θ ln(1+λ/θ)` to keep
/// precision when one side dominates.
fn mixing_term(lambda: f64, theta: f64) -> f64 {
    if theta == 0.0 {
        return 0.0;
    }
    lambda * (theta / lambda).ln_1p() + theta * (lambda / theta).ln_1p()
}

pub fn dual_objective(net: &Network, lambda: &[f64], gamma_corrected: bool) -> Result<f64> {
    check_lambda(net, lambda)?;
    let theta = neighbor_aggregate(net, lambda);
    Ok((0..net.len())
        .map(|e| mixing_term(lambda[e], theta[e]) + lambda[e] * (1.0 + log_term(net, e, lambda[e], gamma_corrected)))
        .sum())
}

/// `∂G/∂λ_e = ln(w_e/(γ_e λ_e)) + ln(1 + θ_e/λ_e) + Σ_{e' ∈ N_e} ln(1 + λ_e'/θ_e')`.
///
/// The last sum runs over the links whose aggregate `θ_e'` contains `λ_e`;
/// for symmetric interference that is the reverse set as well.
pub fn dual_gradient(net: &Network, lambda: &[f64], gamma_corrected: bool) -> Result<Vec<f64>> {
    check_lambda(net, lambda)?;
    let theta = neighbor_aggregate(net, lambda);
    Ok((0..net.len())
        .map(|e| {
            let spill: f64 = net.neighbors(e).iter().map(|&k| (lambda[k] / theta[k]).ln_1p()).sum();
            log_term(net, e, lambda[e], gamma_corrected) + (theta[e] / lambda[e]).ln_1p() + spill
        })
        .collect())
}

/// `p_e = λ_e / (λ_e + Σ_{e': e ∈ N_e'} λ_e')`; 1 for links nobody hears.
pub fn recover_policy(net: &Network, lambda: &[f64]) -> Result<Policy> {
    check_lambda(net, lambda)?;
    let theta = neighbor_aggregate(net, lambda);
    Policy::new(lambda.iter().zip(&theta).map(|(&l, &t)| l / (l + t)).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepSchedule {
    /// `η_m = η_0`.
    Constant,
    /// `η_m = η_0 / √(m+1)`.
    Diminishing,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerConfig {
    /// Projection floor: `λ ← max(λ, ε)`.
    pub epsilon: f64,
    /// Initial step size; `None` means `min_e w_e`.
    pub eta0: Option<f64>,
    pub schedule: StepSchedule,
    pub max_frames: usize,
    /// Stop once `‖λ(m+1) − λ(m)‖_∞` drops below this.
    pub tolerance: f64,
    pub gamma_corrected: bool,
    /// Slots per frame. Recorded only; optimization and simulation are
    /// separate phases here.
    pub slots_per_frame: u32,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            epsilon: 1e-8,
            eta0: None,
            schedule: StepSchedule::Constant,
            max_frames: 100_000,
            tolerance: 1e-9,
            gamma_corrected: true,
            slots_per_frame: 1,
        }
    }
}

impl OptimizerConfig {
    pub fn check(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Parameter(msg));
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return bad(format!("epsilon must be positive, got {}", self.epsilon));
        }
        if let Some(eta) = self.eta0 {
            if !(eta > 0.0 && eta.is_finite()) {
                return bad(format!("eta0 must be positive, got {eta}"));
            }
        }
        if self.max_frames == 0 {
            return bad("max_frames must be at least 1".into());
        }
        if self.tolerance.is_nan() || self.tolerance <= 0.0 {
            return bad(format!("tolerance must be positive, got {}", self.tolerance));
        }
        if self.slots_per_frame == 0 {
            return bad("slots_per_frame must be at least 1".into());
        }
        Ok(())
    }

    pub fn initial_step(&self, net: &Network) -> f64 {
        self.eta0.unwrap_or_else(|| net.min_weight())
    }

    /// Step size used in frame `m` (0-based).
    pub fn step_size(&self, net: &Network, frame: usize) -> f64 {
        let eta0 = self.initial_step(net);
        match self.schedule {
            StepSchedule::Constant => eta0,
            StepSchedule::Diminishing => eta0 / ((frame + 1) as f64).sqrt(),
        }
    }
}

/// Dual variables held by every link at the start of frame `frame`.
#[derive(Debug, Clone, PartialEq)]
pub struct DualState {
    pub frame: usize,
    pub lambda: Vec<f64>,
    pub theta: Vec<f64>,
    pub p: Vec<f64>,
}

impl DualState {
    /// `λ_e = 1`, `θ_e = |N_e|`, `p_e = 1/2`.
    pub fn initial(net: &Network) -> Self {
        Self {
            frame: 0,
            lambda: vec![1.0; net.len()],
            theta: (0..net.len()).map(|e| net.neighbors(e).len() as f64).collect(),
            p: vec![0.5; net.len()],
        }
    }
}

/// A value sent by link `from`, as seen by the receiver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Message {
    pub from: usize,
    pub value: f64,
}

/// Every link sends `values[e]` to each member of `N_e`. Returns the inbox of
/// every link. Under symmetric interference link `k` hears exactly `N_k`.
pub fn exchange(net: &Network, values: &[f64]) -> Vec<Vec<Message>> {
    let mut inboxes = vec![Vec::new(); net.len()];
    for (e, &value) in values.iter().enumerate() {
        for &k in net.neighbors(e) {
            inboxes[k].push(Message { from: e, value });
        }
    }
    inboxes
}

/// What one link knows when it computes its frame update.
#[derive(Debug, Clone)]
pub struct LocalView<'a> {
    pub weight: f64,
    pub gamma: f64,
    pub lambda: f64,
    pub theta: f64,
    /// Neighbors' `λ` from the previous frame's second exchange.
    pub lambda_in: &'a [Message],
    /// Neighbors' `θ` from this frame's first exchange.
    pub theta_in: &'a [Message],
}

/// Projected ascent step of a single link. Reads nothing but its view.
pub fn link_update(view: &LocalView<'_>, eta: f64, cfg: &OptimizerConfig) -> f64 {
    let scale = if cfg.gamma_corrected {
        view.weight / view.gamma
    } else {
        view.weight
    };
    let spill: f64 = view
        .lambda_in
        .iter()
        .map(|m| {
            let theta = view
                .theta_in
                .iter()
                .find(|t| t.from == m.from)
                .map_or(f64::NAN, |t| t.value);
            (m.value / theta).ln_1p()
        })
        .sum();
    let grad = (scale / view.lambda).ln() + (view.theta / view.lambda).ln_1p() + spill;
    (view.lambda + eta * grad).max(cfg.epsilon)
}

fn local_view<'a>(
    net: &Network,
    state: &DualState,
    e: usize,
    lambda_in: &'a [Message],
    theta_in: &'a [Message],
) -> LocalView<'a> {
    LocalView {
        weight: net.weight(e),
        gamma: net.gamma(e),
        lambda: state.lambda[e],
        theta: state.theta[e],
        lambda_in,
        theta_in,
    }
}

/// The new `λ_e` that link `e` computes in the frame starting at `state`,
/// obtained through the same message exchange as [`advance`].
pub fn link_frame_update(net: &Network, state: &DualState, e: usize, cfg: &OptimizerConfig) -> f64 {
    let lambda_in = exchange(net, &state.lambda);
    let theta_in = exchange(net, &state.theta);
    let view = local_view(net, state, e, &lambda_in[e], &theta_in[e]);
    link_update(&view, cfg.step_size(net, state.frame), cfg)
}

/// Messages sent during one frame. A send to all neighbors counts once as a
/// broadcast and once per receiver as a delivery.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FrameTraffic {
    pub broadcasts: usize,
    pub deliveries: usize,
}

/// Runs one frame in lockstep for all links: exchange `θ`, update `λ`,
/// exchange `λ`, recompute `θ` and `p`.
pub fn advance(net: &Network, state: &DualState, cfg: &OptimizerConfig) -> Result<(DualState, FrameTraffic)> {
    let n = net.len();
    let eta = cfg.step_size(net, state.frame);
    // λ(m) arrived at the end of the previous frame; re-delivered here rather
    // than cached, and not counted again.
    let lambda_in = exchange(net, &state.lambda);
    let theta_in = exchange(net, &state.theta);

    let mut lambda = Vec::with_capacity(n);
    for e in 0..n {
        let view = local_view(net, state, e, &lambda_in[e], &theta_in[e]);
        let next = link_update(&view, eta, cfg);
        if !next.is_finite() {
            return Err(Error::NonFinite {
                frame: state.frame,
                link: e,
            });
        }
        lambda.push(next);
    }

    let fresh = exchange(net, &lambda);
    let theta: Vec<f64> = fresh.iter().map(|inbox| inbox.iter().map(|m| m.value).sum()).collect();
    let p = lambda.iter().zip(&theta).map(|(&l, &t)| l / (l + t)).collect();

    let deliveries = 2 * theta_in.iter().map(Vec::len).sum::<usize>();
    Ok((
        DualState {
            frame: state.frame + 1,
            lambda,
            theta,
            p,
        },
        FrameTraffic {
            broadcasts: 2 * n,
            deliveries,
        },
    ))
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerResult {
    pub converged: bool,
    pub frames: usize,
    pub lambda: Vec<f64>,
    pub theta: Vec<f64>,
    pub policy: Policy,
    /// `G(λ(m))` for `m = 0..=frames`.
    pub objective_trajectory: Vec<f64>,
    pub dual_objective: f64,
    /// `Σ_e w_e / (γ_e f_e(p*))`.
    pub primal_objective: f64,
    /// `|G(λ*) − primal|`.
    pub duality_gap: f64,
    /// Optimality residual at `p*`; `None` if some age diverges.
    pub residual: Option<Vec<f64>>,
    pub broadcasts: usize,
    pub deliveries: usize,
}

impl OptimizerResult {
    pub fn max_residual(&self) -> f64 {
        self.residual.as_deref().map_or(f64::INFINITY, max_abs)
    }

    /// Duality gap relative to `1 + |G(λ*)|`.
    pub fn relative_gap(&self) -> f64 {
        self.duality_gap / (1.0 + self.dual_objective.abs())
    }
}

/// Frame-synchronous distributed optimization. Needs symmetric interference.
pub fn run_frames(net: &Network, cfg: &OptimizerConfig) -> Result<OptimizerResult> {
    run_frames_observed(net, cfg, |_, _| Ok(()))
}

/// Like [`run_frames`], calling `observer(state, G)` for the initial state and
/// after every frame.
pub fn run_frames_observed<F>(net: &Network, cfg: &OptimizerConfig, mut observer: F) -> Result<OptimizerResult>
where
    F: FnMut(&DualState, f64) -> Result<()>,
{
    cfg.check()?;
    let report = validate(net, Intent::Distributed);
    if !report.ok {
        return Err(Error::Invalid(report));
    }

    let mut state = DualState::initial(net);
    let g0 = dual_objective(net, &state.lambda, cfg.gamma_corrected)?;
    observer(&state, g0)?;
    let mut trajectory = vec![g0];
    let mut traffic = FrameTraffic::default();
    let mut converged = false;

    while state.frame < cfg.max_frames {
        let (next, sent) = advance(net, &state, cfg)?;
        traffic.broadcasts += sent.broadcasts;
        traffic.deliveries += sent.deliveries;
        let change = sup_change(&state.lambda, &next.lambda);
        state = next;
        let g = dual_objective(net, &state.lambda, cfg.gamma_corrected)?;
        observer(&state, g)?;
        trajectory.push(g);
        if change < cfg.tolerance {
            converged = true;
            break;
        }
    }

    finish(net, state, converged, trajectory, traffic)
}

/// Projected gradient ascent on the full dual with global information. Works
/// for asymmetric interference too.
pub fn solve_centralized(net: &Network, cfg: &OptimizerConfig) -> Result<OptimizerResult> {
    cfg.check()?;
    let report = validate(net, Intent::General);
    if !report.ok {
        return Err(Error::Invalid(report));
    }
    let mut lambda = vec![1.0; net.len()];
    let mut trajectory = vec![dual_objective(net, &lambda, cfg.gamma_corrected)?];
    let mut converged = false;
    let mut frame = 0;
    while frame < cfg.max_frames {
        let eta = cfg.step_size(net, frame);
        let grad = dual_gradient(net, &lambda, cfg.gamma_corrected)?;
        let next: Vec<f64> = lambda
            .iter()
            .zip(&grad)
            .map(|(l, g)| (l + eta * g).max(cfg.epsilon))
            .collect();
        if let Some(link) = next.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { frame, link });
        }
        let change = sup_change(&lambda, &next);
        lambda = next;
        frame += 1;
        trajectory.push(dual_objective(net, &lambda, cfg.gamma_corrected)?);
        if change < cfg.tolerance {
            converged = true;
            break;
        }
    }
    let theta = neighbor_aggregate(net, &lambda);
    let p = recover_policy(net, &lambda)?.into_inner();
    let state = DualState {
        frame,
        lambda,
        theta,
        p,
    };
    finish(net, state, converged, trajectory, FrameTraffic::default())
}

fn sup_change(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

fn finish(
    net: &Network,
    state: DualState,
    converged: bool,
    objective_trajectory: Vec<f64>,
    traffic: FrameTraffic,
) -> Result<OptimizerResult> {
    let policy = Policy::new(state.p)?;
    let primal_objective = closed_form_age(net, &policy)?.network_age;
    let dual_objective = *objective_trajectory.last().expect("trajectory starts non-empty");
    let residual = fixed_point_residual(net, &policy).ok();
    Ok(OptimizerResult {
        converged,
        frames: state.frame,
        lambda: state.lambda,
        theta: state.theta,
        policy,
        objective_trajectory,
        dual_objective,
        primal_objective,
        duality_gap: (dual_objective - primal_objective).abs(),
        residual,
        broadcasts: traffic.broadcasts,
        deliveries: traffic.deliveries,
    })
}

/// Writes the optimizer trajectory as CSV: `frame,link,lambda,theta,p,G`.
pub struct TrajectoryWriter<'n, W: Write> {
    net: &'n Network,
    out: csv::Writer<W>,
}

impl<'n, W: Write> TrajectoryWriter<'n, W> {
    pub fn new(net: &'n Network, out: W) -> Result<Self> {
        let mut out = csv::Writer::from_writer(out);
        out.write_record(["frame", "link", "lambda", "theta", "p", "G"])?;
        Ok(Self { net, out })
    }

    pub fn record(&mut self, state: &DualState, g: f64) -> Result<()> {
        for e in 0..self.net.len() {
            self.out.write_record(&[
                state.frame.to_string(),
                self.net.id(e).to_string(),
                state.lambda[e].to_string(),
                state.theta[e].to_string(),
                state.p[e].to_string(),
                g.to_string(),
            ])?;
        }
        Ok(())
    }

    pub fn finish(mut self) -> Result<W> {
        self.out.flush()?;
        self.out
            .into_inner()
            .map_err(|e| Error::Io(std::io::Error::other(e.to_string())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair() -> Network {
        Network::with_pairs(&[(1.0, 1.0), (1.0, 1.0)], &[(0, 1)]).unwrap()
    }

    #[test]
    fn entropy_values() {
        assert!((entropy(0.5).unwrap() - std::f64::consts::LN_2).abs() < 1e-15);
        assert_eq!(entropy(0.0).unwrap(), 0.0);
        assert_eq!(entropy(1.0).unwrap(), 0.0);
        // 0.25 ln 4 + 0.75 ln(4/3), from 30-digit arbitrary-precision arithmetic
        assert!((entropy(0.25).unwrap() - 0.562_335_144_618_808_4).abs() < 1e-15);
        assert!(entropy(-0.1).is_err());
        assert!(entropy(1.5).is_err());
    }

    #[test]
    fn mixing_term_matches_entropy_form() {
        for &(l, t) in &[(1.0, 3.0), (4.0, 4.0), (1e-6, 10.0), (7.5, 0.2)] {
            let direct = (l + t) * entropy(l / (l + t)).unwrap();
            assert!((mixing_term(l, t) - direct).abs() < 1e-12 * (1.0 + direct));
        }
    }

    #[test]
    fn objective_examples() {
        let single = Network::with_pairs(&[(1.0, 1.0)], &[]).unwrap();
        assert_eq!(dual_objective(&single, &[1.0], true).unwrap(), 1.0);
        let lam: f64 = 2.5;
        let g = dual_objective(&single, &[lam], true).unwrap();
        assert!((g - lam * (1.0 + (1.0 / lam).ln())).abs() < 1e-15);

        let g = dual_objective(&pair(), &[4.0, 4.0], true).unwrap();
        assert!((g - 8.0).abs() < 1e-12, "{g}");

        let lossy = Network::with_pairs(&[(0.5, 1.0)], &[]).unwrap();
        assert!((dual_objective(&lossy, &[2.0], true).unwrap() - 2.0).abs() < 1e-15);
        assert!(dual_objective(&lossy, &[2.0], true).unwrap() > dual_objective(&lossy, &[1.9], true).unwrap());
        assert!(dual_objective(&lossy, &[2.0], true).unwrap() > dual_objective(&lossy, &[2.1], true).unwrap());
        // verbatim form peaks at λ = w instead, with value w
        assert_eq!(dual_objective(&lossy, &[1.0], false).unwrap(), 1.0);
    }

    #[test]
    fn objective_rejects_nonpositive_lambda() {
        assert!(matches!(
            dual_objective(&pair(), &[1.0, 0.0], true),
            Err(Error::NonPositiveLambda { link: 1, .. })
        ));
        assert!(dual_gradient(&pair(), &[-1.0, 1.0], true).is_err());
        assert!(recover_policy(&pair(), &[1.0]).is_err());
    }

    #[test]
    fn gradient_vanishes_at_known_optima() {
        let g = dual_gradient(&pair(), &[4.0, 4.0], true).unwrap();
        assert!(g.iter().all(|v| v.abs() < 1e-15), "{g:?}");
        let single = Network::with_pairs(&[(1.0, 1.0)], &[]).unwrap();
        assert_eq!(dual_gradient(&single, &[1.0], true).unwrap(), vec![0.0]);
    }

    #[test]
    fn recovery_examples() {
        assert_eq!(recover_policy(&pair(), &[4.0, 4.0]).unwrap().as_slice(), &[0.5, 0.5]);
        let single = Network::with_pairs(&[(1.0, 1.0)], &[]).unwrap();
        assert_eq!(recover_policy(&single, &[1.0]).unwrap().as_slice(), &[1.0]);
        let k3 = Network::complete(&[(1.0, 1.0); 3]).unwrap();
        assert_eq!(
            recover_policy(&k3, &[2.0, 1.0, 1.0]).unwrap().as_slice(),
            &[0.5, 0.25, 0.25]
        );
    }

    #[test]
    fn initial_state() {
        let k3 = Network::complete(&[(1.0, 1.0); 3]).unwrap();
        let s = DualState::initial(&k3);
        assert_eq!(s.lambda, vec![1.0; 3]);
        assert_eq!(s.theta, vec![2.0; 3]);
        assert_eq!(s.p, vec![0.5; 3]);
    }

    #[test]
    fn exchange_reaches_only_neighbors() {
        let path = Network::with_pairs(&[(1.0, 1.0); 3], &[(0, 1), (1, 2)]).unwrap();
        let inbox = exchange(&path, &[10.0, 20.0, 30.0]);
        assert_eq!(inbox[0], vec![Message { from: 1, value: 20.0 }]);
        assert_eq!(inbox[1].len(), 2);
        assert_eq!(inbox[2], vec![Message { from: 1, value: 20.0 }]);
    }

    #[test]
    fn distributed_step_matches_central_gradient() {
        let net = Network::with_pairs(&[(0.5, 2.0), (1.0, 1.0), (0.25, 1.0)], &[(0, 1), (1, 2)]).unwrap();
        let lambda = vec![3.0, 1.5, 7.0];
        let state = DualState {
            frame: 4,
            theta: neighbor_aggregate(&net, &lambda),
            p: recover_policy(&net, &lambda).unwrap().into_inner(),
            lambda: lambda.clone(),
        };
        let cfg = OptimizerConfig::default();
        let (next, traffic) = advance(&net, &state, &cfg).unwrap();
        let grad = dual_gradient(&net, &lambda, true).unwrap();
        let eta = cfg.step_size(&net, 4);
        for e in 0..3 {
            let want = (lambda[e] + eta * grad[e]).max(cfg.epsilon);
            assert!((next.lambda[e] - want).abs() < 1e-14);
        }
        assert_eq!(next.frame, 5);
        assert_eq!(next.theta, neighbor_aggregate(&net, &next.lambda));
        assert_eq!(
            traffic,
            FrameTraffic {
                broadcasts: 6,
                deliveries: 8
            }
        );
    }

    #[test]
    fn projection_floor_holds() {
        let single = Network::with_pairs(&[(1.0, 1.0)], &[]).unwrap();
        let cfg = OptimizerConfig {
            eta0: Some(100.0),
            epsilon: 1e-3,
            ..Default::default()
        };
        // gradient at λ=50 is ln(1/50) < 0, a big step overshoots below zero
        let state = DualState {
            frame: 0,
            lambda: vec![50.0],
            theta: vec![0.0],
            p: vec![1.0],
        };
        let (next, _) = advance(&single, &state, &cfg).unwrap();
        assert_eq!(next.lambda, vec![1e-3]);
    }

    #[test]
    fn step_schedules() {
        let net = Network::with_pairs(&[(1.0, 2.0), (1.0, 0.5)], &[(0, 1)]).unwrap();
        let mut cfg = OptimizerConfig::default();
        assert_eq!(cfg.step_size(&net, 10), 0.5);
        cfg.schedule = StepSchedule::Diminishing;
        cfg.eta0 = Some(0.3);
        assert_eq!(cfg.step_size(&net, 3), 0.15);
    }

    #[test]
    fn config_is_checked() {
        for cfg in [
            OptimizerConfig {
                epsilon: 0.0,
                ..Default::default()
            },
            OptimizerConfig {
                eta0: Some(-1.0),
                ..Default::default()
            },
            OptimizerConfig {
                max_frames: 0,
                ..Default::default()
            },
            OptimizerConfig {
                tolerance: 0.0,
                ..Default::default()
            },
        ] {
            assert!(matches!(run_frames(&pair(), &cfg), Err(Error::Parameter(_))));
        }
    }

    #[test]
    fn pair_converges_to_half() {
        let res = run_frames(&pair(), &OptimizerConfig::default()).unwrap();
        assert!(res.converged);
        for (&l, &p) in res.lambda.iter().zip(res.policy.as_slice()) {
            assert!((l - 4.0).abs() < 1e-7);
            assert!((p - 0.5).abs() < 1e-8);
        }
        assert!((res.primal_objective - 8.0).abs() < 1e-9);
        assert!(res.max_residual() < 1e-9);
        assert_eq!(res.broadcasts, 2 * 2 * res.frames);
        assert_eq!(res.objective_trajectory.len(), res.frames + 1);
    }

    #[test]
    fn isolated_link_transmits_always() {
        let net = Network::with_pairs(&[(0.8, 1.0)], &[]).unwrap();
        let res = run_frames(&net, &OptimizerConfig::default()).unwrap();
        assert!(res.converged);
        assert_eq!(res.policy.as_slice(), &[1.0]);
        assert_eq!(res.primal_objective, 1.25);
        assert!((res.lambda[0] - 1.25).abs() < 1e-8);
    }

    #[test]
    fn asymmetric_network_is_refused_but_centralized_runs() {
        let net = Network::new(
            vec![
                crate::network::Link {
                    id: 1,
                    gamma: 1.0,
                    weight: 1.0,
                },
                crate::network::Link {
                    id: 2,
                    gamma: 1.0,
                    weight: 1.0,
                },
            ],
            vec![vec![1], vec![]],
        )
        .unwrap();
        assert!(matches!(
            run_frames(&net, &OptimizerConfig::default()),
            Err(Error::Invalid(_))
        ));
        let res = solve_centralized(&net, &OptimizerConfig::default()).unwrap();
        assert!(res.converged);
        // link 1 hurts nobody → p = 1; link 2 balances 1/p + 1/(1-p)
        assert_eq!(res.policy.as_slice()[0], 1.0);
        assert!((res.policy.as_slice()[1] - 0.5).abs() < 1e-7);
        assert!((res.primal_objective - 4.0).abs() < 1e-9);
        assert!(res.relative_gap() < 1e-6);
    }

    #[test]
    fn huge_step_is_reported_not_propagated() {
        let cfg = OptimizerConfig {
            eta0: Some(f64::MAX),
            ..Default::default()
        };
        assert!(matches!(
            run_frames(&pair(), &cfg),
            Err(Error::NonFinite { frame: 0, .. })
        ));
    }

    #[test]
    fn unconverged_run_reports_state() {
        let cfg = OptimizerConfig {
            max_frames: 3,
            ..Default::default()
        };
        let res = run_frames(&pair(), &cfg).unwrap();
        assert!(!res.converged);
        assert_eq!(res.frames, 3);
        assert_eq!(res.broadcasts, 12);
    }

    #[test]
    fn trajectory_csv_layout() {
        let net = pair();
        let mut writer = TrajectoryWriter::new(&net, Vec::new()).unwrap();
        let cfg = OptimizerConfig {
            max_frames: 2,
            ..Default::default()
        };
        run_frames_observed(&net, &cfg, |s, g| writer.record(s, g)).unwrap();
        let body = String::from_utf8(writer.finish().unwrap()).unwrap();
        let lines: Vec<&str> = body.lines().collect();
        assert_eq!(lines[0], "frame,link,lambda,theta,p,G");
        assert!(lines[1].starts_with("0,0,1,1,0.5,"), "{}", lines[1]);
        assert_eq!(lines.len(), 1 + 3 * 2);
    }
}
