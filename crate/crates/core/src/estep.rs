//! Monte Carlo E-step: per-group Markov chains over capture histories, call
//! locations, and emission times, targeting the complete-data posterior.
//!
//! Each group's candidate-call count is fixed at its total detection count,
//! the most calls its detections could represent. A sweep visits every
//! detector with a capture-history move, every candidate with a location
//! move, and every candidate with an emission-time draw:
//!
//! - capture: propose a uniform draw over the C(N, J_m) ways detector m's
//!   detections can attach to candidates, with the detection order derived
//!   from predicted arrival times; accept on the detector-m likelihood
//!   factors alone (other detectors' factors are unchanged).
//! - location: Metropolis step with a Gaussian random walk mixed with an
//!   independent uniform draw over the region.
//! - emission: exact truncated-normal draw from the conditional posterior;
//!   a draw that would contradict the current detection order is rejected,
//!   which keeps the chain on states of positive density.
//!
//! Groups are independent and run on parallel child RNG streams; output is
//! identical for a fixed seed regardless of thread count.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::DetectionData;
use crate::detect;
use crate::error::Result;
use crate::exec;
use crate::geom::Point;
use crate::latent::{realign_order, CandidateCall, LatentState};
use crate::likelihood::complete_data_loglik;
use crate::params::ModelParams;
use crate::partition::DetectionGroup;
use crate::rng;
use crate::survey::SurveyConfig;
use crate::truncnorm;

/// E-step sampler settings.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SamplerConfig {
    /// Retained samples per group per E-step.
    pub n_samples: usize,
    /// Sweeps discarded before retention.
    pub burn_in: usize,
    /// Sweeps between retained samples.
    pub thinning: usize,
    /// Weight of the Gaussian random-walk component of the location proposal.
    pub mixture_weight: f64,
    /// Random-walk scale in metres; defaults to half the median detector
    /// spacing when unset.
    pub proposal_scale: Option<f64>,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            n_samples: 200,
            burn_in: 500,
            thinning: 5,
            mixture_weight: 0.5,
            proposal_scale: None,
        }
    }
}

impl SamplerConfig {
    pub fn resolved_scale(&self, config: &SurveyConfig) -> f64 {
        self.proposal_scale.unwrap_or(0.5 * config.median_detector_spacing()).max(1e-6)
    }
}

/// Move counters, aggregated across groups.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct EstepDiagnostics {
    pub capture_proposed: u64,
    pub capture_accepted: u64,
    pub location_proposed: u64,
    pub location_accepted: u64,
    pub location_order_rejects: u64,
    pub emission_draws: u64,
    pub emission_order_rejects: u64,
    pub emission_clamps: u64,
}

impl EstepDiagnostics {
    pub fn merge(&mut self, other: &EstepDiagnostics) {
        self.capture_proposed += other.capture_proposed;
        self.capture_accepted += other.capture_accepted;
        self.location_proposed += other.location_proposed;
        self.location_accepted += other.location_accepted;
        self.location_order_rejects += other.location_order_rejects;
        self.emission_draws += other.emission_draws;
        self.emission_order_rejects += other.emission_order_rejects;
        self.emission_clamps += other.emission_clamps;
    }

    pub fn capture_rate(&self) -> f64 {
        self.capture_accepted as f64 / (self.capture_proposed.max(1)) as f64
    }

    pub fn location_rate(&self) -> f64 {
        self.location_accepted as f64 / (self.location_proposed.max(1)) as f64
    }
}

/// Result of one E-step.
#[derive(Debug, Clone)]
pub struct EstepOutput {
    /// Retained latent states, indexed [group][sample].
    pub samples: Vec<Vec<LatentState>>,
    /// Final chain state per group, for warm-starting the next iteration.
    pub final_states: Vec<LatentState>,
    pub diagnostics: EstepDiagnostics,
}

/// One group's chain state with its cached log-likelihood.
pub struct GroupChainState<'a> {
    config: &'a SurveyConfig,
    params: &'a ModelParams,
    data: &'a DetectionData,
    latent: LatentState,
    loglik: f64,
    /// Distances [candidate][detector], kept in step with the locations.
    dist: Vec<Vec<f64>>,
    scale: f64,
    mixture_weight: f64,
    scratch: Vec<usize>,
    pub diagnostics: EstepDiagnostics,
}

impl<'a> GroupChainState<'a> {
    pub fn new(
        config: &'a SurveyConfig,
        params: &'a ModelParams,
        data: &'a DetectionData,
        latent: LatentState,
        sampler: &SamplerConfig,
    ) -> Result<Self> {
        latent.validate(data)?;
        let dist = (0..latent.n_candidates())
            .map(|n| {
                (0..config.n_detectors())
                    .map(|m| config.distance(m, latent.call(n).x))
                    .collect()
            })
            .collect();
        let loglik = complete_data_loglik(&latent, data, config, params);
        let n_cand = latent.n_candidates();
        Ok(GroupChainState {
            config,
            params,
            data,
            latent,
            loglik,
            dist,
            scale: sampler.resolved_scale(config),
            mixture_weight: sampler.mixture_weight,
            scratch: (0..n_cand).collect(),
            diagnostics: EstepDiagnostics::default(),
        })
    }

    pub fn latent(&self) -> &LatentState {
        &self.latent
    }

    pub fn loglik(&self) -> f64 {
        self.loglik
    }

    /// Likelihood factors involving detector `m` only, for a given attachment
    /// of its detections to candidates (`slots[j]` = candidate of detection j).
    fn detector_factor(&self, m: usize, slots: &[usize]) -> f64 {
        let mut detected = vec![false; self.latent.n_candidates()];
        let mut total = 0.0;
        for (j, &n) in slots.iter().enumerate() {
            detected[n] = true;
            let d = self.dist[n][m];
            total += detect::ln_detect_prob(d, self.params)
                + detect::logpdf_strength_unchecked(self.data.strength(m, j), d, self.params)
                + detect::logpdf_arrival_time(
                    self.data.time(m, j),
                    d,
                    self.latent.call(n).e,
                    self.params,
                    self.config.sound_speed,
                );
        }
        for (n, det) in detected.iter().enumerate() {
            if !det {
                total += detect::ln_miss_prob(self.dist[n][m], self.params);
            }
        }
        total
    }

    /// Current attachment of detector m's detections: slot j -> candidate.
    fn current_slots(&self, m: usize) -> Vec<usize> {
        let j_m = self.data.detector(m).len();
        let mut slots = vec![usize::MAX; j_m];
        for (n, call) in self.latent.calls().iter().enumerate() {
            if let Some(j) = call.assigned[m] {
                slots[j] = n;
            }
        }
        slots
    }

    /// Predicted-arrival attachment for a candidate subset at detector m.
    fn derived_slots(&self, m: usize, subset: &[usize]) -> Vec<usize> {
        let mut order: Vec<(f64, usize)> = subset
            .iter()
            .map(|&n| {
                (self.latent.call(n).e + self.dist[n][m] / self.config.sound_speed, n)
            })
            .collect();
        order.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
        order.into_iter().map(|(_, n)| n).collect()
    }

    /// Metropolis-Hastings move over detector m's capture history. The
    /// proposal is uniform over candidate subsets of size J_m; the detection
    /// order is derived, making the proposal symmetric over (z, k) pairs.
    pub fn capture_move<R: Rng + ?Sized>(&mut self, m: usize, rng: &mut R) {
        let j_m = self.data.detector(m).len();
        if j_m == 0 {
            return;
        }
        self.diagnostics.capture_proposed += 1;
        let n_cand = self.latent.n_candidates();
        // Partial Fisher-Yates: first j_m entries form a uniform subset.
        for i in 0..j_m {
            let j = rng.random_range(i..n_cand);
            self.scratch.swap(i, j);
        }
        let subset: Vec<usize> = self.scratch[..j_m].to_vec();
        let new_slots = self.derived_slots(m, &subset);
        let old_slots = self.current_slots(m);
        if new_slots == old_slots {
            self.diagnostics.capture_accepted += 1;
            return;
        }
        let delta = self.detector_factor(m, &new_slots) - self.detector_factor(m, &old_slots);
        if delta >= 0.0 || rng.random::<f64>().ln() < delta {
            for &n in &old_slots {
                self.latent.call_mut(n).assigned[m] = None;
            }
            for (j, &n) in new_slots.iter().enumerate() {
                self.latent.call_mut(n).assigned[m] = Some(j);
            }
            self.loglik += delta;
            self.diagnostics.capture_accepted += 1;
        }
    }

    /// Likelihood factors involving candidate n's location, evaluated at the
    /// detector distances in `dist_row`.
    fn column_factor(&self, n: usize, dist_row: &[f64]) -> f64 {
        let call = self.latent.call(n);
        let mut total = 0.0;
        for m in 0..self.config.n_detectors() {
            let d = dist_row[m];
            match call.assigned[m] {
                Some(j) => {
                    total += detect::ln_detect_prob(d, self.params)
                        + detect::logpdf_strength_unchecked(self.data.strength(m, j), d, self.params)
                        + detect::logpdf_arrival_time(
                            self.data.time(m, j),
                            d,
                            call.e,
                            self.params,
                            self.config.sound_speed,
                        );
                }
                None => total += detect::ln_miss_prob(d, self.params),
            }
        }
        total
    }

    /// Would moving candidate n (new location or emission time) preserve the
    /// detection order on every detector that detects it?
    fn move_keeps_order(&self, n: usize, new_x: Point, new_e: f64) -> bool {
        for m in 0..self.config.n_detectors() {
            if self.latent.call(n).assigned[m].is_none() {
                continue;
            }
            let detected = self.latent.detected_by(m);
            if detected.len() < 2 {
                continue;
            }
            let mut order: Vec<(f64, usize, usize)> = detected
                .iter()
                .map(|&(c, j)| {
                    let (e, d) = if c == n {
                        (new_e, self.config.distance(m, new_x))
                    } else {
                        (self.latent.call(c).e, self.dist[c][m])
                    };
                    (e + d / self.config.sound_speed, c, j)
                })
                .collect();
            order.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
            if order.iter().enumerate().any(|(rank, &(_, _, j))| rank != j) {
                return false;
            }
        }
        true
    }

    /// Metropolis move over candidate n's location: Gaussian random walk with
    /// probability `mixture_weight`, otherwise an independent uniform draw
    /// over the region. Both components are symmetric; proposals outside the
    /// region or contradicting the detection order have zero target density.
    pub fn location_move<R: Rng + ?Sized>(&mut self, n: usize, rng: &mut R) {
        self.diagnostics.location_proposed += 1;
        let x = self.latent.call(n).x;
        let proposal = if rng.random::<f64>() < self.mixture_weight {
            let dx: f64 = rng.sample(StandardNormal);
            let dy: f64 = rng.sample(StandardNormal);
            Point::new(x.x + self.scale * dx, x.y + self.scale * dy)
        } else {
            self.config.region.sample_uniform(rng)
        };
        if !self.config.region.contains(proposal) {
            return;
        }
        if !self.move_keeps_order(n, proposal, self.latent.call(n).e) {
            self.diagnostics.location_order_rejects += 1;
            return;
        }
        let new_row: Vec<f64> = (0..self.config.n_detectors())
            .map(|m| self.config.distance(m, proposal))
            .collect();
        let delta = self.column_factor(n, &new_row) - self.column_factor(n, &self.dist[n]);
        if delta >= 0.0 || rng.random::<f64>().ln() < delta {
            self.latent.call_mut(n).x = proposal;
            self.dist[n] = new_row;
            self.loglik += delta;
            self.diagnostics.location_accepted += 1;
        }
    }

    /// Conditional posterior parameters (mean, sd) of candidate n's emission
    /// time given its detections; `None` for undetected candidates.
    pub fn emission_posterior(&self, n: usize) -> Option<(f64, f64)> {
        let call = self.latent.call(n);
        let k = call.n_detections();
        if k == 0 {
            return None;
        }
        let mut sum = 0.0;
        for m in 0..self.config.n_detectors() {
            if let Some(j) = call.assigned[m] {
                sum += self.data.time(m, j) - self.dist[n][m] / self.config.sound_speed;
            }
        }
        Some((sum / k as f64, self.params.sigma_t / (k as f64).sqrt()))
    }

    /// Gibbs-style emission-time draw from the truncated-normal conditional.
    /// Draws contradicting the detection order are rejected (the conditional
    /// is an exact independence proposal, so the correction is accept-iff-
    /// consistent); windows with negligible mass fall back to clamping.
    pub fn emission_move<R: Rng + ?Sized>(&mut self, n: usize, rng: &mut R) {
        self.diagnostics.emission_draws += 1;
        let (lo, hi) = self.config.emission_window;
        let Some((mu, sd)) = self.emission_posterior(n) else {
            self.latent.call_mut(n).e = rng.random_range(lo..hi);
            return;
        };
        let draw = match truncnorm::sample(rng, mu, sd, lo, hi) {
            Some(e) => e,
            None => {
                self.diagnostics.emission_clamps += 1;
                mu.clamp(lo, hi)
            }
        };
        if !self.move_keeps_order(n, self.latent.call(n).x, draw) {
            self.diagnostics.emission_order_rejects += 1;
            return;
        }
        let call = self.latent.call(n);
        let mut delta = 0.0;
        for m in 0..self.config.n_detectors() {
            if let Some(j) = call.assigned[m] {
                let d = self.dist[n][m];
                let t = self.data.time(m, j);
                delta += detect::logpdf_arrival_time(t, d, draw, self.params, self.config.sound_speed)
                    - detect::logpdf_arrival_time(t, d, call.e, self.params, self.config.sound_speed);
            }
        }
        self.latent.call_mut(n).e = draw;
        self.loglik += delta;
    }

    /// One systematic sweep: all capture moves, then all location moves, then
    /// all emission draws.
    pub fn sweep<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        for m in 0..self.config.n_detectors() {
            self.capture_move(m, rng);
        }
        for n in 0..self.latent.n_candidates() {
            self.location_move(n, rng);
        }
        for n in 0..self.latent.n_candidates() {
            self.emission_move(n, rng);
        }
        #[cfg(debug_assertions)]
        {
            let fresh = complete_data_loglik(&self.latent, self.data, self.config, self.params);
            debug_assert!(
                (self.loglik - fresh).abs() < 1e-8,
                "cached loglik {} drifted from {}",
                self.loglik,
                fresh
            );
        }
    }
}

/// Greedy initial latent state: merge detections across detectors in time
/// order wherever travel-time feasible, one candidate per unmerged detection,
/// then place each observed call at its detector centroid (jittered) and
/// back-date its emission from the earliest arrival.
pub fn init_latent<R: Rng + ?Sized>(
    group: &DetectionGroup,
    config: &SurveyConfig,
    sampler: &SamplerConfig,
    rng: &mut R,
) -> LatentState {
    let data = &group.data;
    let m_total = config.n_detectors();
    let scale = sampler.resolved_scale(config);
    let (lo, hi) = config.emission_window;

    let mut flat: Vec<(usize, usize)> = Vec::new();
    for m in 0..m_total {
        for j in 0..data.detector(m).len() {
            flat.push((m, j));
        }
    }
    flat.sort_by(|&(ma, ja), &(mb, jb)| {
        data.time(ma, ja).partial_cmp(&data.time(mb, jb)).unwrap()
    });

    // Greedy merge under the same feasibility rule the partition uses.
    let mut members: Vec<Vec<(usize, usize)>> = Vec::new();
    for &(m, j) in &flat {
        let t = data.time(m, j);
        let slot = members.iter().position(|group_members| {
            group_members.iter().all(|&(m2, _)| m2 != m)
                && group_members.iter().all(|&(m2, j2)| {
                    let dt = (t - data.time(m2, j2)).abs();
                    dt < config.position(m).dist(config.position(m2)) / config.sound_speed
                        + 3.0 * group.sigma_slack
                })
        });
        match slot {
            Some(i) => members[i].push((m, j)),
            None => members.push(vec![(m, j)]),
        }
    }

    let n_cand = data.total();
    let mut calls = Vec::with_capacity(n_cand);
    for group_members in &members {
        let mut cx = 0.0;
        let mut cy = 0.0;
        for &(m, _) in group_members {
            cx += config.position(m).x;
            cy += config.position(m).y;
        }
        let centroid =
            Point::new(cx / group_members.len() as f64, cy / group_members.len() as f64);
        let mut x = centroid;
        for _ in 0..100 {
            let dx: f64 = rng.sample(StandardNormal);
            let dy: f64 = rng.sample(StandardNormal);
            let cand = Point::new(centroid.x + scale * dx, centroid.y + scale * dy);
            if config.region.contains(cand) {
                x = cand;
                break;
            }
        }
        if !config.region.contains(x) {
            x = config.region.sample_uniform(rng);
        }
        let (m0, j0) = group_members
            .iter()
            .copied()
            .min_by(|&(ma, ja), &(mb, jb)| {
                data.time(ma, ja).partial_cmp(&data.time(mb, jb)).unwrap()
            })
            .unwrap();
        let e = (data.time(m0, j0) - config.travel_time(m0, x)).clamp(lo, hi);
        let mut assigned = vec![None; m_total];
        for &(m, j) in group_members {
            assigned[m] = Some(j);
        }
        calls.push(CandidateCall { x, e, assigned });
    }
    while calls.len() < n_cand {
        calls.push(CandidateCall::undetected(
            config.region.sample_uniform(rng),
            rng.random_range(lo..hi),
            m_total,
        ));
    }
    for m in 0..m_total {
        realign_order(&mut calls, config, m);
    }
    let latent = LatentState::new(calls, m_total);
    debug_assert!(latent.validate(data).is_ok());
    latent
}

/// Run the E-step over all groups, returning `n_samples` retained states per
/// group. Independent groups run concurrently on derived seed streams;
/// identical seeds give bit-identical output at any thread count.
pub fn run_estep(
    groups: &[DetectionGroup],
    config: &SurveyConfig,
    params: &ModelParams,
    sampler: &SamplerConfig,
    warm: Option<&[LatentState]>,
    seed: u64,
) -> Result<EstepOutput> {
    params.validate()?;
    if let Some(w) = warm {
        if w.len() != groups.len() {
            return Err(crate::error::Error::InvalidInput(format!(
                "warm-start state count {} does not match group count {}",
                w.len(),
                groups.len()
            )));
        }
    }
    let per_group: Vec<Result<(Vec<LatentState>, LatentState, EstepDiagnostics)>> =
        exec::map_indexed(groups.len(), |i| {
            let group = &groups[i];
            let mut chain_rng: ChaCha8Rng = rng::stream(seed, &[0xE5, i as u64]);
            let start = match warm {
                Some(states) => states[i].clone(),
                None => init_latent(group, config, sampler, &mut chain_rng),
            };
            let mut chain = GroupChainState::new(config, params, &group.data, start, sampler)?;
            for _ in 0..sampler.burn_in {
                chain.sweep(&mut chain_rng);
            }
            let mut retained = Vec::with_capacity(sampler.n_samples);
            for _ in 0..sampler.n_samples {
                for _ in 0..sampler.thinning.max(1) {
                    chain.sweep(&mut chain_rng);
                }
                retained.push(chain.latent().clone());
            }
            Ok((retained, chain.latent().clone(), chain.diagnostics))
        });

    let mut samples = Vec::with_capacity(groups.len());
    let mut final_states = Vec::with_capacity(groups.len());
    let mut diagnostics = EstepDiagnostics::default();
    for item in per_group {
        let (retained, last, diag) = item?;
        samples.push(retained);
        final_states.push(last);
        diagnostics.merge(&diag);
    }
    Ok(EstepOutput { samples, final_states, diagnostics })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Detection;
    use crate::geom::SurveyRegion;
    use crate::partition::partition_detections;
    use crate::survey::Detector;
    use rand::SeedableRng;

    fn params() -> ModelParams {
        ModelParams { beta0: 150.0, beta1: 2.5, sigma_s: 8.0, sigma_t: 0.01, threshold: 132.0 }
    }

    fn two_detector_config() -> SurveyConfig {
        let region = SurveyRegion::rectangle(0.0, 0.0, 40.0, 40.0, 32).unwrap();
        let dets = vec![
            Detector { id: 1, position: Point::new(15.0, 20.0) },
            Detector { id: 2, position: Point::new(25.0, 20.0) },
        ];
        SurveyConfig::new(region, dets, 20.0, 330.0).unwrap()
    }

    fn groups_for(cfg: &SurveyConfig, rows: &[(u32, f64, f64)]) -> Vec<DetectionGroup> {
        let dets: Vec<Detection> = rows
            .iter()
            .map(|&(id, t, y)| Detection { detector_id: id, time: t, signal_strength: y })
            .collect();
        let data = DetectionData::from_detections(cfg, params().threshold, &dets).unwrap();
        partition_detections(&data, cfg, 0.015)
    }

    #[test]
    fn init_singleton_group() {
        let cfg = two_detector_config();
        let groups = groups_for(&cfg, &[(1, 5.0, 140.0)]);
        assert_eq!(groups.len(), 1);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let latent = init_latent(&groups[0], &cfg, &SamplerConfig::default(), &mut rng);
        assert_eq!(latent.n_candidates(), 1);
        assert_eq!(latent.n_observed(1), 1);
    }

    #[test]
    fn init_merges_feasible_detections() {
        let cfg = two_detector_config();
        // Three detections, two detectors, all within travel-time feasibility:
        // greedy merge pairs the first two, leaving at most 2 observed calls.
        let groups = groups_for(&cfg, &[(1, 5.000, 140.0), (2, 5.020, 139.0), (1, 5.015, 141.0)]);
        assert_eq!(groups.len(), 1);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let latent = init_latent(&groups[0], &cfg, &SamplerConfig::default(), &mut rng);
        assert_eq!(latent.n_candidates(), 3);
        let observed = latent.n_observed(1);
        assert!(observed <= 3 && observed >= 2);
        latent.validate(&groups[0].data).unwrap();
    }

    #[test]
    fn init_keeps_infeasible_detections_separate() {
        let cfg = two_detector_config();
        // Same group cannot arise here: times far apart -> separate groups,
        // each a singleton call.
        let groups = groups_for(&cfg, &[(1, 2.0, 140.0), (2, 8.0, 139.0)]);
        assert_eq!(groups.len(), 2);
        for g in &groups {
            let mut rng = ChaCha8Rng::seed_from_u64(3);
            let latent = init_latent(g, &cfg, &SamplerConfig::default(), &mut rng);
            assert_eq!(latent.n_observed(1), 1);
        }
    }

    #[test]
    fn capture_proposal_uniform_over_subsets() {
        let cfg = two_detector_config();
        let groups = groups_for(&cfg, &[(1, 5.000, 140.0), (1, 5.012, 139.0), (2, 5.004, 141.0)]);
        assert_eq!(groups.len(), 1);
        let p = params();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let init = init_latent(&groups[0], &cfg, &SamplerConfig::default(), &mut rng);
        let mut chain =
            GroupChainState::new(&cfg, &p, &groups[0].data, init, &SamplerConfig::default())
                .unwrap();
        // Detector 1 has J = 2 of N = 3 candidates: C(3,2) = 3 subsets.
        let n_draws = 10_000;
        let mut counts = std::collections::HashMap::new();
        for _ in 0..n_draws {
            for i in 0..2 {
                let j = rng.random_range(i..3);
                chain.scratch.swap(i, j);
            }
            let mut subset: Vec<usize> = chain.scratch[..2].to_vec();
            subset.sort_unstable();
            *counts.entry(subset).or_insert(0usize) += 1;
        }
        assert_eq!(counts.len(), 3);
        let expect = n_draws as f64 / 3.0;
        let sd = (n_draws as f64 * (1.0 / 3.0) * (2.0 / 3.0)).sqrt();
        for (_, c) in counts {
            assert!((c as f64 - expect).abs() < 3.0 * sd, "{c} vs {expect}");
        }
    }

    #[test]
    fn capture_move_with_full_subset_is_accepted() {
        let cfg = two_detector_config();
        let groups = groups_for(&cfg, &[(1, 5.0, 140.0)]);
        let p = params();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let init = init_latent(&groups[0], &cfg, &SamplerConfig::default(), &mut rng);
        let mut chain =
            GroupChainState::new(&cfg, &p, &groups[0].data, init, &SamplerConfig::default())
                .unwrap();
        // J_m = N_cand = 1: the only subset is the current one.
        for _ in 0..50 {
            chain.capture_move(0, &mut rng);
        }
        assert_eq!(chain.diagnostics.capture_proposed, chain.diagnostics.capture_accepted);
        assert_eq!(chain.latent().n_observed(1), 1);
    }

    #[test]
    fn capture_factored_ratio_equals_full_loglik_delta() {
        let cfg = two_detector_config();
        let groups = groups_for(&cfg, &[(1, 5.000, 140.0), (1, 5.012, 139.0), (2, 5.004, 141.0)]);
        let p = params();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let init = init_latent(&groups[0], &cfg, &SamplerConfig::default(), &mut rng);
        let chain =
            GroupChainState::new(&cfg, &p, &groups[0].data, init.clone(), &SamplerConfig::default())
                .unwrap();
        // Alternative attachment for detector 0 (J=2): swap which candidates
        // carry its detections.
        let old_slots = chain.current_slots(0);
        let all: Vec<usize> = (0..3).collect();
        for a in 0..3usize {
            for b in (a + 1)..3 {
                let subset = vec![all[a], all[b]];
                let new_slots = chain.derived_slots(0, &subset);
                if new_slots == old_slots {
                    continue;
                }
                let factored =
                    chain.detector_factor(0, &new_slots) - chain.detector_factor(0, &old_slots);
                // Same delta from the full complete-data log-likelihood.
                let mut alt = init.clone();
                for &n in &old_slots {
                    alt.call_mut(n).assigned[0] = None;
                }
                for (j, &n) in new_slots.iter().enumerate() {
                    alt.call_mut(n).assigned[0] = Some(j);
                }
                let full = complete_data_loglik(&alt, &groups[0].data, &cfg, &p)
                    - complete_data_loglik(&init, &groups[0].data, &cfg, &p);
                assert!(
                    (factored - full).abs() < 1e-9,
                    "factored {factored} vs full {full}"
                );
            }
        }
    }

    #[test]
    fn emission_posterior_closed_form() {
        let region = SurveyRegion::rectangle(0.0, 0.0, 1000.0, 1000.0, 32).unwrap();
        let dets = vec![
            Detector { id: 1, position: Point::new(330.0, 0.0) },
            Detector { id: 2, position: Point::new(495.0, 0.0) },
        ];
        let cfg = SurveyConfig::new(region, dets, 20.0, 330.0).unwrap();
        let p = params();
        // Call at the origin: distances are 330 and 495 exactly.
        let rows = vec![
            Detection { detector_id: 1, time: 2.0, signal_strength: 140.0 },
            Detection { detector_id: 2, time: 2.5, signal_strength: 139.0 },
        ];
        let data = DetectionData::from_detections(&cfg, p.threshold, &rows).unwrap();
        let call = CandidateCall {
            x: Point::new(0.0, 0.0),
            e: 1.0,
            assigned: vec![Some(0), Some(0)],
        };
        let latent = LatentState::new(vec![call], 2);
        let chain = GroupChainState::new(&cfg, &p, &data, latent, &SamplerConfig::default())
            .unwrap();
        let (mu, sd) = chain.emission_posterior(0).unwrap();
        // Residuals: 2.0 - 1.0 = 1.0 and 2.5 - 1.5 = 1.0.
        assert!((mu - 1.0).abs() < 1e-12);
        assert!((sd - p.sigma_t / 2f64.sqrt()).abs() < 1e-15);

        // Single-detector case: mu = t - d/v, sd = sigma_t.
        let call1 = CandidateCall {
            x: Point::new(0.0, 0.0),
            e: 1.0,
            assigned: vec![Some(0), None],
        };
        let data1 = DetectionData::from_parts(vec![
            vec![(2.0, 140.0)],
            vec![],
        ]);
        let latent1 = LatentState::new(vec![call1], 2);
        let chain1 = GroupChainState::new(&cfg, &p, &data1, latent1, &SamplerConfig::default())
            .unwrap();
        let (mu1, sd1) = chain1.emission_posterior(0).unwrap();
        assert!((mu1 - 1.0).abs() < 1e-12);
        assert!((sd1 - p.sigma_t).abs() < 1e-15);
    }

    #[test]
    fn estep_deterministic_and_prefix_stable() {
        let cfg = two_detector_config();
        let groups = groups_for(
            &cfg,
            &[(1, 5.000, 140.0), (2, 5.020, 139.0), (1, 8.0, 144.0), (2, 8.013, 137.0)],
        );
        let p = params();
        let sampler = SamplerConfig { n_samples: 20, burn_in: 30, thinning: 2, ..Default::default() };
        let a = run_estep(&groups, &cfg, &p, &sampler, None, 99).unwrap();
        let b = run_estep(&groups, &cfg, &p, &sampler, None, 99).unwrap();
        assert_eq!(a.samples, b.samples);
        assert_eq!(a.diagnostics, b.diagnostics);

        // Doubling the retained count leaves the first samples unchanged.
        let sampler2 = SamplerConfig { n_samples: 40, ..sampler };
        let c = run_estep(&groups, &cfg, &p, &sampler2, None, 99).unwrap();
        for (g, group_samples) in a.samples.iter().enumerate() {
            assert_eq!(&c.samples[g][..group_samples.len()], &group_samples[..]);
        }
    }

    #[test]
    fn single_detection_chain_keeps_capture_fixed() {
        let cfg = two_detector_config();
        let groups = groups_for(&cfg, &[(1, 5.0, 140.0)]);
        let p = params();
        let sampler = SamplerConfig { n_samples: 50, burn_in: 20, thinning: 1, ..Default::default() };
        let out = run_estep(&groups, &cfg, &p, &sampler, None, 7).unwrap();
        for s in &out.samples[0] {
            assert_eq!(s.n_observed(1), 1);
            assert!(s.call(0).assigned[0].is_some());
        }
    }

    #[test]
    fn observed_count_bounds_hold_per_sample() {
        let cfg = two_detector_config();
        let groups = groups_for(
            &cfg,
            &[(1, 5.000, 140.0), (2, 5.020, 139.0), (1, 5.030, 144.0), (2, 5.045, 137.0)],
        );
        assert_eq!(groups.len(), 1);
        let counts = groups[0].data.counts();
        let max_j = *counts.iter().max().unwrap();
        let sum_j: usize = counts.iter().sum();
        let p = params();
        let sampler = SamplerConfig { n_samples: 100, burn_in: 50, thinning: 1, ..Default::default() };
        let out = run_estep(&groups, &cfg, &p, &sampler, None, 13).unwrap();
        for s in &out.samples[0] {
            let n_obs = s.n_observed(1);
            assert!(n_obs >= max_j && n_obs <= sum_j, "{n_obs} outside [{max_j}, {sum_j}]");
            s.validate(&groups[0].data).unwrap();
        }
    }

    #[test]
    fn chain_loglik_finite_at_every_retained_sample() {
        let cfg = two_detector_config();
        let groups = groups_for(
            &cfg,
            &[(1, 5.000, 140.0), (2, 5.020, 139.0), (1, 5.030, 144.0)],
        );
        let p = params();
        let sampler = SamplerConfig { n_samples: 200, burn_in: 50, thinning: 1, ..Default::default() };
        let out = run_estep(&groups, &cfg, &p, &sampler, None, 21).unwrap();
        for s in &out.samples[0] {
            let l = complete_data_loglik(s, &groups[0].data, &cfg, &p);
            assert!(l.is_finite());
        }
    }

    #[test]
    fn warm_start_length_mismatch_is_error() {
        let cfg = two_detector_config();
        let groups = groups_for(&cfg, &[(1, 5.0, 140.0), (2, 12.0, 139.0)]);
        let p = params();
        let sampler = SamplerConfig::default();
        let err = run_estep(&groups, &cfg, &p, &sampler, Some(&[]), 1);
        assert!(err.is_err());
    }
}
