use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;

use super::metrics::METRIC_NAMES;
use super::sim::{run_episode, EpisodeResult, MapProvider};
use super::{NavConfig, NavError};
use crate::scenario::{GeneratorParams, Scenario, ScenarioClass};
use crate::seeds::derive_seed;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricSummary {
    pub metric: &'static str,
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchmarkReport {
    pub provider: String,
    pub class: ScenarioClass,
    pub n: usize,
    pub success_rate: f64,
    pub summaries: Vec<MetricSummary>,
    pub scenario_hashes: Vec<String>,
    /// Episodes that ended in a provider failure, with their causes.
    pub failures: Vec<String>,
    #[serde(skip)]
    pub episodes: Vec<EpisodeResult>,
}

impl BenchmarkReport {
    pub fn summary(&self, metric: &str) -> Option<&MetricSummary> {
        self.summaries.iter().find(|m| m.metric == metric)
    }
}

/// Scenario of episode `k` of a benchmark. Identical for every provider.
pub fn episode_scenario(gen: &GeneratorParams, class: ScenarioClass, seed: u64, k: usize) -> Result<Scenario, NavError> {
    let base = derive_seed(seed, k as u64);
    let mut last = None;
    for attempt in 0..100 {
        match gen.generate(class, derive_seed(base, attempt)) {
            Ok(s) => return Ok(s),
            Err(e) => last = Some(e),
        }
    }
    Err(NavError::Scenario(last.expect("at least one attempt")))
}

/// Mean and population standard deviation; `None` for empty input.
pub fn mean_std(xs: &[f64]) -> Option<(f64, f64)> {
    if xs.is_empty() {
        return None;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    Some((mean, var.sqrt()))
}

/// Runs `n` seeded episodes of `class` with default generator settings.
pub fn benchmark(provider: &dyn MapProvider, class: ScenarioClass, n: usize, seed: u64, cfg: &NavConfig) -> Result<BenchmarkReport, NavError> {
    benchmark_with(provider, &GeneratorParams::default(), class, n, seed, cfg)
}

/// Runs `n` seeded episodes of `class`. Metrics are averaged over all
/// episodes, successful or not.
pub fn benchmark_with(
    provider: &dyn MapProvider,
    gen: &GeneratorParams,
    class: ScenarioClass,
    n: usize,
    seed: u64,
    cfg: &NavConfig,
) -> Result<BenchmarkReport, NavError> {
    if n == 0 {
        return Err(NavError::Config("benchmark needs at least one episode".into()));
    }
    let episodes: Vec<EpisodeResult> = (0..n)
        .into_par_iter()
        .map(|k| run_episode(&episode_scenario(gen, class, seed, k)?, provider, cfg))
        .collect::<Result<_, _>>()?;
    let summaries = METRIC_NAMES
        .iter()
        .enumerate()
        .map(|(m, &metric)| {
            let xs: Vec<f64> = episodes.iter().map(|e| e.metrics.values()[m]).collect();
            let (mean, std) = mean_std(&xs).expect("n > 0");
            MetricSummary { metric, mean, std }
        })
        .collect();
    let failures = episodes
        .iter()
        .filter_map(|e| match &e.outcome {
            super::sim::Outcome::ProviderFailure(c) => Some(c.clone()),
            _ => None,
        })
        .collect();
    Ok(BenchmarkReport {
        provider: provider.name().to_string(),
        class,
        n,
        success_rate: episodes.iter().filter(|e| e.reached_goal).count() as f64 / n as f64,
        summaries,
        scenario_hashes: episodes.iter().map(|e| e.scenario_hash.clone()).collect(),
        failures,
        episodes,
    })
}

pub fn reports_to_csv(reports: &[BenchmarkReport]) -> String {
    let mut s = String::from("provider,class,metric,mean,std,n,success_rate\n");
    for r in reports {
        for m in &r.summaries {
            let _ = writeln!(s, "{},{},{},{:.6},{:.6},{},{:.4}", r.provider, r.class.name(), m.metric, m.mean, m.std, r.n, r.success_rate);
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nav::sim::{GmmProvider, TeacherProvider};
    use crate::scoring::SocialParams;

    #[test]
    fn single_episode_has_zero_std() {
        let p = GmmProvider { params: SocialParams::default(), side: 73, area_side: 10.0 };
        let r = benchmark(&p, ScenarioClass::SA, 1, 4, &NavConfig::default()).unwrap();
        assert_eq!(r.summaries.len(), 7);
        assert!(r.summaries.iter().all(|m| m.std == 0.0));
        let csv = reports_to_csv(&[r]);
        assert_eq!(csv.lines().count(), 8);
        assert!(csv.lines().nth(1).unwrap().starts_with("gmm,S_A,tau,"));
    }

    #[test]
    fn paired_providers_share_scenarios() {
        let cfg = NavConfig { timeout: 3.0, ..NavConfig::default() };
        let a = benchmark(&GmmProvider { params: SocialParams::default(), side: 73, area_side: 10.0 }, ScenarioClass::SB, 3, 8, &cfg).unwrap();
        let b = benchmark(&TeacherProvider { params: SocialParams::default(), side: 73, area_side: 10.0 }, ScenarioClass::SB, 3, 8, &cfg).unwrap();
        assert_eq!(a.scenario_hashes, b.scenario_hashes);
        // Same kernels evaluated two ways: identical maps, identical runs.
        assert_eq!(reports_to_csv(&[a.clone()]).replace("gmm", "x"), reports_to_csv(&[b]).replace("teacher", "x"));
        assert!(benchmark(&GmmProvider { params: SocialParams::default(), side: 73, area_side: 10.0 }, ScenarioClass::SB, 0, 8, &cfg).is_err());
    }

    #[test]
    fn mean_std_values() {
        assert_eq!(mean_std(&[2.0, 4.0]), Some((3.0, 1.0)));
        assert_eq!(mean_std(&[]), None);
    }
}
