//! Closed-form quantities for a given stationary policy.

use crate::error::{Error, Result};
use crate::network::Network;
use crate::sim::Policy;

/// `f_e = p_e ∏_{e' ∈ N_e} (1 − p_e')`.
pub fn activation_frequency(net: &Network, policy: &Policy) -> Result<Vec<f64>> {
    policy.check_len(net)?;
    let p = policy.as_slice();
    Ok((0..net.len())
        .map(|e| net.neighbors(e).iter().fold(p[e], |acc, &k| acc * (1.0 - p[k])))
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ActivationProfile {
    pub frequency: Vec<f64>,
    /// `1 / (γ_e f_e)`; infinite where `γ_e f_e = 0`.
    pub age: Vec<f64>,
    /// `Σ_e w_e / (γ_e f_e)`; infinite if any link diverges.
    pub network_age: f64,
    pub divergent: Vec<usize>,
}

impl ActivationProfile {
    pub fn is_finite(&self) -> bool {
        self.divergent.is_empty()
    }
}

/// Stationary average age, which equals the peak age, per link and for the
/// weighted network.
pub fn closed_form_age(net: &Network, policy: &Policy) -> Result<ActivationProfile> {
    let frequency = activation_frequency(net, policy)?;
    let mut divergent = Vec::new();
    let age: Vec<f64> = frequency
        .iter()
        .enumerate()
        .map(|(e, &f)| {
            let rate = net.gamma(e) * f;
            if rate > 0.0 {
                1.0 / rate
            } else {
                divergent.push(e);
                f64::INFINITY
            }
        })
        .collect();
    let network_age = age.iter().enumerate().map(|(e, a)| net.weight(e) * a).sum();
    Ok(ActivationProfile {
        frequency,
        age,
        network_age,
        divergent,
    })
}

/// Attempt rates proportional to `1/√γ_e`, the folklore choice for a single
/// collision domain. Refuses other conflict graphs unless `force` is set.
pub fn heuristic_sqrt_policy(net: &Network, force: bool) -> Result<Policy> {
    if !force {
        if let Some((a, b)) = net.first_non_interfering_pair() {
            return Err(Error::NotCollisionDomain {
                a: net.id(a),
                b: net.id(b),
            });
        }
    }
    let inv: Vec<f64> = net.links().iter().map(|l| 1.0 / l.gamma.sqrt()).collect();
    let total: f64 = inv.iter().sum();
    Policy::new(inv.into_iter().map(|x| x / total).collect())
}

/// Optimality residual `r_e = p_e − w_e A_e / (w_e A_e + Σ_{e': e ∈ N_e'} w_e' A_e')`
/// with `A_e = 1 / (γ_e f_e)`. Zero exactly at the age-optimal policy.
pub fn fixed_point_residual(net: &Network, policy: &Policy) -> Result<Vec<f64>> {
    let profile = closed_form_age(net, policy)?;
    if let Some(&link) = profile.divergent.first() {
        return Err(Error::DivergentAge { link });
    }
    let weighted: Vec<f64> = profile.age.iter().enumerate().map(|(e, a)| net.weight(e) * a).collect();
    Ok((0..net.len())
        .map(|e| {
            let others: f64 = net.reverse_neighbors(e).iter().map(|&k| weighted[k]).sum();
            policy.as_slice()[e] - weighted[e] / (weighted[e] + others)
        })
        .collect())
}

pub fn max_abs(values: &[f64]) -> f64 {
    values.iter().fold(0.0, |m, v| m.max(v.abs()))
}
