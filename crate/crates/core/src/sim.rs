//! Slot-by-slot Monte Carlo simulation of link ages under a distributed
//! stationary policy.
//!
//! In every slot each link attempts with probability `p_e` and its channel
//! is ON with probability `γ_e`, independently across links and slots. A
//! transmission succeeds when the link attempts, its channel is ON and no
//! link in `N_e` attempts. Age resets to 1 on success and grows by 1
//! otherwise.

use std::io::{Read, Write};

use rand::distr::{Bernoulli, Distribution};
use rand_chacha::ChaCha8Rng;

use crate::analytics::activation_frequency;
use crate::error::{Error, Result};
use crate::network::{validate, Intent, Network};
use crate::rng::{substream, Purpose};

/// Per-link attempt probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct Policy(Vec<f64>);

impl Policy {
    pub fn new(p: Vec<f64>) -> Result<Self> {
        for (e, &v) in p.iter().enumerate() {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::OutOfRange {
                    what: "attempt probability",
                    range: "[0, 1]",
                    value: v,
                    link: e,
                });
            }
        }
        Ok(Self(p))
    }

    pub fn uniform(n: usize, p: f64) -> Result<Self> {
        Self::new(vec![p; n])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Links that never attempt; their age grows without bound.
    pub fn silent_links(&self) -> Vec<usize> {
        self.0
            .iter()
            .enumerate()
            .filter(|(_, &p)| p == 0.0)
            .map(|(e, _)| e)
            .collect()
    }

    pub(crate) fn check_len(&self, net: &Network) -> Result<()> {
        if self.len() != net.len() {
            return Err(Error::SizeMismatch {
                expected: net.len(),
                got: self.len(),
            });
        }
        Ok(())
    }

    /// Reads a policy from CSV with (at least) the columns `link` and `p`,
    /// where `link` is the config id. Every link must appear exactly once.
    pub fn from_csv<R: Read>(reader: R, net: &Network) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        let headers = rdr.headers()?.clone();
        let col = |name: &str| {
            headers
                .iter()
                .position(|h| h.trim() == name)
                .ok_or_else(|| Error::Parse(format!("policy CSV lacks a `{name}` column")))
        };
        let (link_col, p_col) = (col("link")?, col("p")?);
        let mut p = vec![None; net.len()];
        for record in rdr.records() {
            let record = record?;
            let field = |i: usize| record.get(i).unwrap_or("").trim().to_string();
            let id: i64 = field(link_col)
                .parse()
                .map_err(|_| Error::Parse(format!("bad link id {:?}", field(link_col))))?;
            let value: f64 = field(p_col)
                .parse()
                .map_err(|_| Error::Parse(format!("bad probability {:?}", field(p_col))))?;
            let e = net.index_of(id).ok_or_else(|| Error::UnknownLink {
                id,
                context: "policy file".into(),
            })?;
            if p[e].replace(value).is_some() {
                return Err(Error::Parse(format!("link {id} listed twice in policy file")));
            }
        }
        let p = p
            .into_iter()
            .enumerate()
            .map(|(e, v)| v.ok_or_else(|| Error::Parse(format!("policy file misses link {}", net.id(e)))))
            .collect::<Result<Vec<_>>>()?;
        Self::new(p)
    }
}

/// `Û_e = S_e · U_e · ∏_{e' ∈ N_e} (1 − U_e')`.
pub fn transmission_success(attempt: &[bool], channel: &[bool], net: &Network) -> Result<Vec<bool>> {
    for v in [attempt.len(), channel.len()] {
        if v != net.len() {
            return Err(Error::SizeMismatch {
                expected: net.len(),
                got: v,
            });
        }
    }
    Ok((0..net.len())
        .map(|e| attempt[e] && channel[e] && net.neighbors(e).iter().all(|&k| !attempt[k]))
        .collect())
}

/// Running age accumulators. `age` is the age at the start of the next
/// slot to be simulated.
#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub t: u64,
    pub age: Vec<u64>,
    pub success_count: Vec<u64>,
    pub attempt_count: Vec<u64>,
    /// Sum of pre-reset ages at success slots, i.e. of inter-success gaps.
    pub peak_sum: Vec<u64>,
    /// Sum of squared inter-success gaps.
    pub peak_sq_sum: Vec<u128>,
    /// Sum of post-transition ages.
    pub age_sum: Vec<u128>,
}

impl SimState {
    pub fn new(links: usize) -> Self {
        Self {
            t: 0,
            age: vec![1; links],
            success_count: vec![0; links],
            attempt_count: vec![0; links],
            peak_sum: vec![0; links],
            peak_sq_sum: vec![0; links],
            age_sum: vec![0; links],
        }
    }

    /// Advances one slot and returns the success vector `Û`.
    pub fn step(&mut self, attempt: &[bool], channel: &[bool], net: &Network) -> Result<Vec<bool>> {
        if self.age.len() != net.len() {
            return Err(Error::SizeMismatch {
                expected: net.len(),
                got: self.age.len(),
            });
        }
        let success = transmission_success(attempt, channel, net)?;
        for e in 0..net.len() {
            if attempt[e] {
                self.attempt_count[e] += 1;
            }
            if success[e] {
                let peak = self.age[e];
                self.peak_sum[e] += peak;
                self.peak_sq_sum[e] += u128::from(peak) * u128::from(peak);
                self.success_count[e] += 1;
                self.age[e] = 1;
            } else {
                self.age[e] += 1;
            }
            self.age_sum[e] += u128::from(self.age[e]);
        }
        self.t += 1;
        Ok(success)
    }

    fn link_stats_since(&self, base: &SimState, e: usize) -> LinkStats {
        let slots = self.t - base.t;
        let successes = self.success_count[e] - base.success_count[e];
        let peak_sum = self.peak_sum[e] - base.peak_sum[e];
        let peak_sq_sum = self.peak_sq_sum[e] - base.peak_sq_sum[e];
        let (peak_age, gap_second_moment) = if successes > 0 {
            (
                Some(peak_sum as f64 / successes as f64),
                Some(peak_sq_sum as f64 / successes as f64),
            )
        } else {
            (None, None)
        };
        LinkStats {
            average_age: (self.age_sum[e] - base.age_sum[e]) as f64 / slots as f64,
            peak_age,
            gap_second_moment,
            successes,
            attempts: self.attempt_count[e] - base.attempt_count[e],
            slots,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkStats {
    pub average_age: f64,
    /// Mean pre-reset age at success slots; `None` without any success.
    pub peak_age: Option<f64>,
    /// Mean squared inter-success gap.
    pub gap_second_moment: Option<f64>,
    pub successes: u64,
    pub attempts: u64,
    pub slots: u64,
}

impl LinkStats {
    pub fn success_frequency(&self) -> f64 {
        self.successes as f64 / self.slots as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceStats {
    pub horizon: u64,
    pub seed: u64,
    /// Full-horizon statistics.
    pub links: Vec<LinkStats>,
    /// Statistics over slots `(T/2, T]`.
    pub second_half: Vec<LinkStats>,
    pub network_average_age: f64,
    /// `None` when some link never succeeded.
    pub network_peak_age: Option<f64>,
    /// Links with `γ_e f_e = 0`: the age limit does not exist.
    pub divergent: Vec<usize>,
}

impl TraceStats {
    fn from_states(net: &Network, seed: u64, mid: &SimState, end: &SimState, divergent: Vec<usize>) -> Self {
        let zero = SimState::new(net.len());
        let links: Vec<LinkStats> = (0..net.len()).map(|e| end.link_stats_since(&zero, e)).collect();
        let second_half = (0..net.len()).map(|e| end.link_stats_since(mid, e)).collect();
        let network_average_age = links
            .iter()
            .enumerate()
            .map(|(e, s)| net.weight(e) * s.average_age)
            .sum();
        let network_peak_age = links
            .iter()
            .enumerate()
            .map(|(e, s)| s.peak_age.map(|a| net.weight(e) * a))
            .sum();
        Self {
            horizon: end.t,
            seed,
            links,
            second_half,
            network_average_age,
            network_peak_age,
            divergent,
        }
    }

    /// Relative deviation of empirical average and peak age from reference
    /// per-link ages, `(average, peak)`.
    pub fn relative_errors(&self, reference: &[f64]) -> Vec<(f64, Option<f64>)> {
        self.links
            .iter()
            .zip(reference)
            .map(|(s, &r)| {
                let rel = |x: f64| (x - r).abs() / r;
                (rel(s.average_age), s.peak_age.map(rel))
            })
            .collect()
    }
}

/// Simulates `horizon` slots. See [`simulate_traced`] for the per-slot dump.
pub fn simulate(net: &Network, policy: &Policy, horizon: u64, seed: u64) -> Result<TraceStats> {
    run(net, policy, horizon, seed, None::<&mut csv::Writer<std::io::Sink>>)
}

/// Like [`simulate`], additionally writing one CSV row per (slot, link):
/// `t,link,age,attempted,channel,success`, where `age` is `A_e(t)` at the
/// start of slot `t` (1-based) and the flags are 0/1.
pub fn simulate_traced<W: Write>(
    net: &Network,
    policy: &Policy,
    horizon: u64,
    seed: u64,
    trace: &mut csv::Writer<W>,
) -> Result<TraceStats> {
    run(net, policy, horizon, seed, Some(trace))
}

fn run<W: Write>(
    net: &Network,
    policy: &Policy,
    horizon: u64,
    seed: u64,
    mut trace: Option<&mut csv::Writer<W>>,
) -> Result<TraceStats> {
    if horizon == 0 {
        return Err(Error::Parameter("horizon must be at least one slot".into()));
    }
    policy.check_len(net)?;
    let report = validate(net, Intent::General);
    if !report.ok {
        return Err(Error::Invalid(report));
    }

    let n = net.len();
    let mut draws: Vec<(Bernoulli, ChaCha8Rng, Bernoulli, ChaCha8Rng)> = Vec::with_capacity(n);
    for e in 0..n {
        let attempt = Bernoulli::new(policy.as_slice()[e]).map_err(|_| Error::OutOfRange {
            what: "attempt probability",
            range: "[0, 1]",
            value: policy.as_slice()[e],
            link: e,
        })?;
        let channel = Bernoulli::new(net.gamma(e)).map_err(|_| Error::OutOfRange {
            what: "channel probability",
            range: "(0, 1]",
            value: net.gamma(e),
            link: e,
        })?;
        draws.push((
            attempt,
            substream(seed, e, Purpose::Attempt),
            channel,
            substream(seed, e, Purpose::Channel),
        ));
    }

    if let Some(w) = trace.as_deref_mut() {
        w.write_record(["t", "link", "age", "attempted", "channel", "success"])?;
    }

    let f = activation_frequency(net, policy)?;
    let divergent: Vec<usize> = (0..n).filter(|&e| f[e] * net.gamma(e) == 0.0).collect();

    let mut state = SimState::new(n);
    let mut mid = state.clone();
    let half = horizon / 2;
    let mut attempt = vec![false; n];
    let mut channel = vec![false; n];
    for _ in 0..horizon {
        if state.t == half {
            mid = state.clone();
        }
        for (e, (pa, ra, pc, rc)) in draws.iter_mut().enumerate() {
            attempt[e] = pa.sample(ra);
            channel[e] = pc.sample(rc);
        }
        let ages_before = trace.is_some().then(|| state.age.clone());
        let success = state.step(&attempt, &channel, net)?;
        if let (Some(w), Some(ages)) = (trace.as_deref_mut(), ages_before) {
            for e in 0..n {
                w.write_record(&[
                    state.t.to_string(),
                    net.id(e).to_string(),
                    ages[e].to_string(),
                    u8::from(attempt[e]).to_string(),
                    u8::from(channel[e]).to_string(),
                    u8::from(success[e]).to_string(),
                ])?;
            }
        }
    }
    if let Some(w) = trace {
        w.flush()?;
    }
    Ok(TraceStats::from_states(net, seed, &mid, &state, divergent))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair() -> Network {
        Network::with_pairs(&[(1.0, 1.0), (1.0, 1.0)], &[(0, 1)]).unwrap()
    }

    #[test]
    fn success_rule() {
        let net = pair();
        // neighbor silent
        assert_eq!(
            transmission_success(&[true, false], &[true, true], &net).unwrap(),
            vec![true, false]
        );
        // collision kills both
        assert_eq!(
            transmission_success(&[true, true], &[true, true], &net).unwrap(),
            vec![false, false]
        );
        // no attempt, no success
        assert_eq!(
            transmission_success(&[false, false], &[true, true], &net).unwrap(),
            vec![false, false]
        );
        // channel off
        assert_eq!(
            transmission_success(&[true, false], &[false, true], &net).unwrap(),
            vec![false, false]
        );
        assert!(matches!(
            transmission_success(&[true], &[true, true], &net),
            Err(Error::SizeMismatch { .. })
        ));
    }

    #[test]
    fn step_updates_age_and_peaks() {
        let net = Network::with_pairs(&[(1.0, 1.0)], &[]).unwrap();
        let mut s = SimState::new(1);
        s.age[0] = 3;
        s.step(&[false], &[true], &net).unwrap();
        assert_eq!(s.age[0], 4);
        assert_eq!(s.peak_sum[0], 0);

        s.age[0] = 3;
        s.step(&[true], &[true], &net).unwrap();
        assert_eq!(s.age[0], 1);
        assert_eq!(s.peak_sum[0], 3);
        assert_eq!(s.success_count[0], 1);

        s.step(&[true], &[true], &net).unwrap();
        assert_eq!(s.age[0], 1);
        assert_eq!(s.peak_sum[0], 4);
        assert_eq!(s.peak_sq_sum[0], 10);
        assert_eq!(s.t, 3);
        assert_eq!(s.age_sum[0], 4 + 1 + 1);
    }

    #[test]
    fn perfect_link_has_unit_age() {
        let net = Network::with_pairs(&[(1.0, 1.0)], &[]).unwrap();
        let stats = simulate(&net, &Policy::uniform(1, 1.0).unwrap(), 100, 1).unwrap();
        assert_eq!(stats.links[0].average_age, 1.0);
        assert_eq!(stats.links[0].peak_age, Some(1.0));
        assert_eq!(stats.links[0].successes, 100);
        assert_eq!(stats.network_average_age, 1.0);
    }

    #[test]
    fn silent_link_has_no_peak() {
        let net = pair();
        let policy = Policy::new(vec![0.0, 0.5]).unwrap();
        assert_eq!(policy.silent_links(), vec![0]);
        let stats = simulate(&net, &policy, 1000, 3).unwrap();
        assert_eq!(stats.links[0].peak_age, None);
        assert_eq!(stats.network_peak_age, None);
        assert_eq!(stats.divergent, vec![0]);
        // age just counts up: mean of 2..=1001
        assert_eq!(stats.links[0].average_age, 501.5);
    }

    #[test]
    fn certain_collision_is_divergent() {
        let stats = simulate(&pair(), &Policy::uniform(2, 1.0).unwrap(), 50, 0).unwrap();
        assert_eq!(stats.divergent, vec![0, 1]);
        assert!(stats.links.iter().all(|l| l.successes == 0));
    }

    #[test]
    fn zero_horizon_is_rejected() {
        assert!(simulate(&pair(), &Policy::uniform(2, 0.5).unwrap(), 0, 0).is_err());
    }

    #[test]
    fn policy_size_is_checked() {
        assert!(matches!(
            simulate(&pair(), &Policy::uniform(3, 0.5).unwrap(), 10, 0),
            Err(Error::SizeMismatch { .. })
        ));
        assert!(Policy::new(vec![1.2]).is_err());
        assert!(Policy::new(vec![f64::NAN]).is_err());
    }

    #[test]
    fn adding_an_isolated_link_does_not_perturb_others() {
        let small = pair();
        let big = Network::with_pairs(&[(1.0, 1.0), (1.0, 1.0), (0.5, 1.0)], &[(0, 1)]).unwrap();
        let a = simulate(&small, &Policy::uniform(2, 0.4).unwrap(), 5000, 11).unwrap();
        let b = simulate(&big, &Policy::uniform(3, 0.4).unwrap(), 5000, 11).unwrap();
        assert_eq!(a.links[..], b.links[..2]);
    }

    #[test]
    fn trace_rows_match_stats() {
        let net = pair();
        let mut w = csv::Writer::from_writer(Vec::new());
        let stats = simulate_traced(&net, &Policy::uniform(2, 0.5).unwrap(), 20, 5, &mut w).unwrap();
        let body = String::from_utf8(w.into_inner().unwrap()).unwrap();
        let lines: Vec<&str> = body.lines().collect();
        assert_eq!(lines[0], "t,link,age,attempted,channel,success");
        assert_eq!(lines.len(), 1 + 20 * 2);
        assert!(lines[1].starts_with("1,0,1,"));
        let successes = lines[1..]
            .iter()
            .filter(|l| l.ends_with(",1") && l.split(',').nth(1) == Some("0"))
            .count();
        assert_eq!(successes as u64, stats.links[0].successes);
    }

    #[test]
    fn policy_csv_by_id() {
        let net: Network = "pairs = [[5, 9]]\n[[links]]\nid = 5\ngamma = 1.0\n[[links]]\nid = 9\ngamma = 1.0\n"
            .parse()
            .unwrap();
        let p = Policy::from_csv("link,p\n9,0.25\n5,0.75\n".as_bytes(), &net).unwrap();
        assert_eq!(p.as_slice(), &[0.75, 0.25]);
        assert!(Policy::from_csv("link,p\n5,0.75\n".as_bytes(), &net).is_err());
        assert!(Policy::from_csv("link,p\n5,0.75\n7,0.1\n".as_bytes(), &net).is_err());
    }
}
