//! Monte Carlo comparison of the windless, offline and online-adaptive
//! schemes over wind and city seeds.

use std::sync::Arc;

use rayon::prelude::*;

use crate::airlink::{expected_rate, generate_city, CityModel, Rect};
use crate::error::{Error, Result};
use crate::online::{angular_deviation, fly_offline, fly_online, median, FlightLog, OnlineConfig};
use crate::planner::{plan_offline, plan_windless, OfflinePlan, Scenario};
use crate::wind::{sample_trace, WindSample, WindStats};
use crate::Vec2;

use super::config::{EvalWind, ExperimentConfig, RateModel, Scheme};

/// Stream tags for seed derivation.
const WIND_STREAM: u64 = 0x57;
const CITY_STREAM: u64 = 0xC1;

/// SplitMix64 finalizer over `(root, stream, index)`.
pub fn derive_seed(root: u64, stream: u64, index: u64) -> u64 {
    let mut z = root
        .wrapping_add(stream.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(index.wrapping_mul(0xBF58_476D_1CE4_E5B9));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seeds of one repeat; shared by every scheme and sweep value so that
/// comparisons are paired.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunSeeds {
    pub rep: usize,
    pub wind: u64,
    pub city: u64,
}

impl RunSeeds {
    pub fn new(root: u64, rep: usize) -> Self {
        RunSeeds {
            rep,
            wind: derive_seed(root, WIND_STREAM, rep as u64),
            city: derive_seed(root, CITY_STREAM, rep as u64),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunMetrics {
    /// `min_k sum_n a_k[n] R_k[n] / sum_n P[n]` with realized rates and exact power.
    pub ee: f64,
    pub ee_bits_per_joule: f64,
    /// `sum_n P[n] Delta` (J).
    pub energy: f64,
    /// `min_k sum_n a_k[n] R_k[n]` (bits/s/Hz summed over slots).
    pub r_min: f64,
    /// `B Delta r_min` (bits).
    pub throughput_bits: f64,
    pub mean_altitude: f64,
    pub mean_angular_deviation: f64,
    pub median_angular_deviation: f64,
    pub fallbacks: usize,
    /// Mean per-slot decision time (s); not written to files.
    pub mean_slot_seconds: f64,
}

impl RunMetrics {
    pub fn from_log(log: &FlightLog, s: &Scenario) -> Self {
        let r_min = log.min_user_rate(s.k());
        let p_sum: f64 = log.rows.iter().map(|r| r.power).sum();
        let energy = log.energy();
        let bw = s.channel.bandwidth;
        let ang = angular_deviation(log);
        let mean_ang = if ang.is_empty() {
            f64::NAN
        } else {
            ang.iter().sum::<f64>() / ang.len() as f64
        };
        RunMetrics {
            ee: r_min / p_sum,
            ee_bits_per_joule: bw * r_min * log.delta / energy,
            energy,
            r_min,
            throughput_bits: bw * log.delta * r_min,
            mean_altitude: log.mean_altitude(),
            mean_angular_deviation: mean_ang,
            median_angular_deviation: median(&ang),
            fallbacks: log.fallbacks(),
            mean_slot_seconds: log.mean_slot_seconds,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunRecord {
    /// Index into the sweep points.
    pub point: usize,
    pub sweep_value: Option<f64>,
    /// Index into the configured scheme list.
    pub slot: usize,
    pub scheme: Scheme,
    pub seeds: RunSeeds,
    pub outcome: std::result::Result<RunMetrics, String>,
    pub log: Option<FlightLog>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Stat {
    pub mean: f64,
    /// Sample standard deviation; zero for a single value.
    pub std: f64,
}

impl Stat {
    pub fn of(xs: &[f64]) -> Self {
        let xs: Vec<f64> = xs.iter().copied().filter(|x| !x.is_nan()).collect();
        if xs.is_empty() {
            return Stat {
                mean: f64::NAN,
                std: f64::NAN,
            };
        }
        if xs.iter().all(|&x| x == xs[0]) {
            return Stat { mean: xs[0], std: 0.0 };
        }
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let std = if xs.len() > 1 {
            (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Stat { mean, std }
    }
}

/// Statistics of one scheme at one sweep value.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub point: usize,
    pub sweep_value: Option<f64>,
    pub slot: usize,
    pub scheme: Scheme,
    pub runs: usize,
    pub failed: usize,
    pub ee: Stat,
    pub ee_bits_per_joule: Stat,
    pub energy: Stat,
    pub throughput_bits: Stat,
    pub mean_altitude: Stat,
    pub angular_deviation: Stat,
    /// Mean over runs of the per-run median angular deviation.
    pub median_angular_deviation: f64,
    pub fallbacks: usize,
    /// Planner objective of the plan this scheme flew.
    pub plan_objective: f64,
}

impl SummaryRow {
    pub fn complete(&self) -> bool {
        self.failed == 0
    }
}

#[derive(Debug, Clone)]
pub struct EEReport {
    pub config: ExperimentConfig,
    pub records: Vec<RunRecord>,
    pub summary: Vec<SummaryRow>,
    pub seeds: Vec<RunSeeds>,
}

impl EEReport {
    pub fn row(&self, point: usize, scheme: Scheme) -> Option<&SummaryRow> {
        self.summary.iter().find(|r| r.point == point && r.scheme == scheme)
    }

    /// Successful metrics of one cell, ordered by repeat.
    pub fn metrics(&self, point: usize, slot: usize) -> Vec<&RunMetrics> {
        self.records
            .iter()
            .filter(|r| r.point == point && r.slot == slot)
            .filter_map(|r| r.outcome.as_ref().ok())
            .collect()
    }

    pub fn complete(&self) -> bool {
        self.summary.iter().all(SummaryRow::complete)
    }
}

/// Bounding box of the endpoints and users padded by 100 m.
pub fn city_bounds(s: &Scenario) -> Rect {
    let mut pts: Vec<Vec2> = vec![s.q_i.xy(), s.q_f.xy()];
    pts.extend(s.users.iter().map(|u| u.position));
    let (mut x0, mut y0, mut x1, mut y1) = (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for p in &pts {
        x0 = x0.min(p.x);
        y0 = y0.min(p.y);
        x1 = x1.max(p.x);
        y1 = y1.max(p.y);
    }
    Rect::new(x0 - 100.0, y0 - 100.0, x1 + 100.0, y1 + 100.0)
}

pub fn city_for(cfg: &ExperimentConfig, s: &Scenario, seed: u64) -> Result<CityModel> {
    let clear: Vec<Vec2> = s.users.iter().map(|u| u.position).collect();
    generate_city(&cfg.city.params(), &city_bounds(s), &clear, seed)
}

pub fn eval_wind(cfg: &ExperimentConfig, stats: &WindStats, n: usize, seed: u64) -> Result<Vec<WindSample>> {
    match cfg.experiment.eval_wind {
        EvalWind::Calm => Ok(vec![WindSample::CALM; n]),
        EvalWind::Stochastic => Ok(sample_trace(stats, n, 1, seed)?.scenario(0).to_vec()),
    }
}

/// Replaces the realized rates of a log with the statistical ones.
fn score_expected(log: &mut FlightLog, s: &Scenario) -> Result<()> {
    for r in log.rows.iter_mut() {
        if let Some(k) = r.user {
            r.rate = expected_rate(&r.q.xy(), r.q.z, &s.users[k].position, &s.channel)?;
            r.los = false;
        }
    }
    Ok(())
}

/// Flies one scheme once.
#[allow(clippy::too_many_arguments)]
pub fn fly_scheme(
    cfg: &ExperimentConfig,
    s: &Scenario,
    online: &OnlineConfig,
    scheme: Scheme,
    plan: &OfflinePlan,
    wind: &[WindSample],
    city: &CityModel,
) -> Result<FlightLog> {
    let (t, a) = (&plan.trajectory, &plan.schedule);
    let mut log = match scheme {
        Scheme::Windless | Scheme::Offline => fly_offline(s, t, a, wind, &s.wind, city)?,
        Scheme::Oboa => fly_online(s, t, a, wind, &s.wind, city, online)?,
    };
    if cfg.experiment.rate_model == RateModel::Expected {
        score_expected(&mut log, s)?;
    }
    Ok(log)
}

pub type PlanSlot = std::result::Result<Arc<OfflinePlan>, String>;

/// Plans keyed by scenario and planning seed, so sweep points with the same
/// wind statistics (and every point, for the windless plan) share one
/// design. A cache may be reused across experiments.
#[derive(Default)]
pub struct PlanCache {
    entries: Vec<(Scenario, u64, PlanSlot)>,
}

impl PlanCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&mut self, scheme: Scheme, s: &Scenario, plan_seed: u64) -> PlanSlot {
        let mut key = s.clone();
        let seed = match scheme {
            Scheme::Windless => {
                key.wind = WindStats::default();
                u64::MAX
            }
            Scheme::Offline | Scheme::Oboa => plan_seed,
        };
        if let Some((_, _, p)) = self.entries.iter().find(|(k, sd, _)| *sd == seed && *k == key) {
            return p.clone();
        }
        let plan = match scheme {
            Scheme::Windless => plan_windless(s),
            _ => plan_offline(s, plan_seed),
        };
        let p = plan.map(Arc::new).map_err(|e| e.to_string());
        self.entries.push((key, seed, p.clone()));
        p
    }
}

fn pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))
}

/// Runs every scheme at every sweep point over `repeats` paired seeds.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<EEReport> {
    run_experiment_with(cfg, &mut PlanCache::new())
}

pub fn run_experiment_with(cfg: &ExperimentConfig, cache: &mut PlanCache) -> Result<EEReport> {
    cfg.validate()?;
    let exp = &cfg.experiment;
    let seeds: Vec<RunSeeds> = (0..exp.repeats).map(|r| RunSeeds::new(exp.seed, r)).collect();
    let points = cfg.sweep_points();
    let pool = pool(exp.workers)?;
    let mut records = Vec::new();
    let mut summary = Vec::new();

    for (pi, &value) in points.iter().enumerate() {
        let (s, online) = cfg.at(value);
        let plans: Vec<PlanSlot> = exp.schemes.iter().map(|&sc| cache.get(sc, &s, exp.plan_seed)).collect();
        let n = s.n_slots();

        let runs: Vec<Vec<RunRecord>> = pool.install(|| {
            seeds
                .par_iter()
                .map(|seeds| {
                    let env = eval_wind(cfg, &s.wind, n, seeds.wind)
                        .and_then(|w| city_for(cfg, &s, seeds.city).map(|c| (w, c)));
                    exp.schemes
                        .iter()
                        .enumerate()
                        .map(|(slot, &scheme)| {
                            let flown = match (&env, &plans[slot]) {
                                (Err(e), _) => Err(e.to_string()),
                                (_, Err(e)) => Err(format!("planning failed: {e}")),
                                (Ok((w, c)), Ok(plan)) => {
                                    fly_scheme(cfg, &s, &online, scheme, plan, w, c).map_err(|e| e.to_string())
                                }
                            };
                            let (outcome, log) = match flown {
                                Ok(log) => (Ok(RunMetrics::from_log(&log, &s)), exp.flight_logs.then_some(log)),
                                Err(e) => (Err(e), None),
                            };
                            RunRecord {
                                point: pi,
                                sweep_value: value,
                                slot,
                                scheme,
                                seeds: *seeds,
                                outcome,
                                log,
                            }
                        })
                        .collect()
                })
                .collect()
        });
        let runs: Vec<RunRecord> = runs.into_iter().flatten().collect();

        for (slot, &scheme) in exp.schemes.iter().enumerate() {
            let cell: Vec<&RunRecord> = runs.iter().filter(|r| r.slot == slot).collect();
            let ok: Vec<&RunMetrics> = cell.iter().filter_map(|r| r.outcome.as_ref().ok()).collect();
            let col = |f: fn(&RunMetrics) -> f64| Stat::of(&ok.iter().map(|m| f(m)).collect::<Vec<_>>());
            summary.push(SummaryRow {
                point: pi,
                sweep_value: value,
                slot,
                scheme,
                runs: ok.len(),
                failed: cell.len() - ok.len(),
                ee: col(|m| m.ee),
                ee_bits_per_joule: col(|m| m.ee_bits_per_joule),
                energy: col(|m| m.energy),
                throughput_bits: col(|m| m.throughput_bits),
                mean_altitude: col(|m| m.mean_altitude),
                angular_deviation: col(|m| m.mean_angular_deviation),
                median_angular_deviation: col(|m| m.median_angular_deviation).mean,
                fallbacks: ok.iter().map(|m| m.fallbacks).sum(),
                plan_objective: plans[slot].as_ref().map_or(f64::NAN, |p| p.objective),
            });
        }
        records.extend(runs);
    }

    Ok(EEReport {
        config: cfg.clone(),
        records,
        summary,
        seeds,
    })
}

/// Scheme ordering at one sweep point.
#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub point: usize,
    pub sweep_value: Option<f64>,
    /// `(slot, scheme, rank)` by decreasing mean EE; equal means share a rank.
    pub ranking: Vec<(usize, Scheme, usize)>,
    /// `(a, b, fraction of paired seeds with EE_a >= EE_b)` over slot pairs.
    pub pairs: Vec<(usize, usize, f64)>,
    /// Fraction of seeds with OBOA >= offline >= windless, when all three ran.
    pub chain: Option<f64>,
}

impl Comparison {
    pub fn has_tie(&self) -> bool {
        self.ranking.windows(2).any(|w| w[0].2 == w[1].2)
    }

    pub fn pair(&self, a: usize, b: usize) -> Option<f64> {
        self.pairs.iter().find(|p| p.0 == a && p.1 == b).map(|p| p.2)
    }
}

/// Ranks schemes by mean EE and counts paired-seed orderings.
pub fn compare_schemes(report: &EEReport) -> Vec<Comparison> {
    let schemes = &report.config.experiment.schemes;
    let n_points = report.config.sweep_points().len();
    let mut out = Vec::with_capacity(n_points);
    for point in 0..n_points {
        let rows: Vec<&SummaryRow> = report.summary.iter().filter(|r| r.point == point).collect();
        let mut order: Vec<&SummaryRow> = rows.clone();
        order.sort_by(|a, b| b.ee.mean.total_cmp(&a.ee.mean).then(a.slot.cmp(&b.slot)));
        let mut ranking = Vec::with_capacity(order.len());
        for (i, r) in order.iter().enumerate() {
            let rank = match (i, ranking.last()) {
                (0, _) | (_, None) => 1,
                (_, Some(&(_, _, prev))) if order[i - 1].ee.mean == r.ee.mean => prev,
                _ => i + 1,
            };
            ranking.push((r.slot, r.scheme, rank));
        }

        // Per-seed EE by slot, None where the run failed.
        let ee: Vec<Vec<Option<f64>>> = (0..schemes.len())
            .map(|slot| {
                let mut v = vec![None; report.seeds.len()];
                for r in report.records.iter().filter(|r| r.point == point && r.slot == slot) {
                    v[r.seeds.rep] = r.outcome.as_ref().ok().map(|m| m.ee);
                }
                v
            })
            .collect();
        let frac = |cond: &dyn Fn(usize) -> Option<bool>| {
            let votes: Vec<bool> = (0..report.seeds.len()).filter_map(cond).collect();
            if votes.is_empty() {
                f64::NAN
            } else {
                votes.iter().filter(|&&b| b).count() as f64 / votes.len() as f64
            }
        };
        let mut pairs = Vec::new();
        for a in 0..schemes.len() {
            for b in 0..schemes.len() {
                if a != b {
                    pairs.push((a, b, frac(&|i| Some(ee[a][i]? >= ee[b][i]?))));
                }
            }
        }
        let find = |sc: Scheme| schemes.iter().position(|&x| x == sc);
        let chain = match (find(Scheme::Oboa), find(Scheme::Offline), find(Scheme::Windless)) {
            (Some(o), Some(f), Some(w)) => Some(frac(&|i| {
                let (eo, ef, ew) = (ee[o][i]?, ee[f][i]?, ee[w][i]?);
                Some(eo >= ef && ef >= ew)
            })),
            _ => None,
        };
        out.push(Comparison {
            point,
            sweep_value: rows.first().and_then(|r| r.sweep_value),
            ranking,
            pairs,
            chain,
        });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench::config::SweepAxis;

    fn small() -> ExperimentConfig {
        let mut cfg = ExperimentConfig::default();
        cfg.scenario.t0 = 30.0;
        cfg.scenario.q_f = [300.0, 500.0, 100.0];
        cfg.scenario.users = vec![[100.0, 450.0], [250.0, 550.0]];
        cfg.scenario.s_mcsaa = 3;
        cfg.experiment.repeats = 3;
        cfg.experiment.workers = 1;
        cfg
    }

    #[test]
    fn seeds_are_distinct_and_stable() {
        let a = RunSeeds::new(1, 0);
        assert_eq!(a, RunSeeds::new(1, 0));
        assert_ne!(a.wind, a.city);
        assert_ne!(a.wind, RunSeeds::new(1, 1).wind);
        assert_ne!(a.wind, RunSeeds::new(2, 0).wind);
    }

    #[test]
    fn stat_of_constant_has_zero_spread() {
        let s = Stat::of(&[2.0, 2.0, 2.0]);
        assert_eq!((s.mean, s.std), (2.0, 0.0));
        assert_eq!(Stat::of(&[5.0]).std, 0.0);
        assert!((Stat::of(&[1.0, 3.0]).std - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn bounds_cover_users() {
        let s = Scenario::default();
        let b = city_bounds(&s);
        assert_eq!((b.x0, b.y0, b.x1, b.y1), (-100.0, 100.0, 1100.0, 900.0));
    }

    #[test]
    fn calm_windless_is_deterministic() {
        let mut cfg = small();
        cfg.experiment.schemes = vec![Scheme::Windless];
        cfg.experiment.eval_wind = EvalWind::Calm;
        cfg.experiment.rate_model = RateModel::Expected;
        let rep = run_experiment(&cfg).unwrap();
        let row = rep.row(0, Scheme::Windless).unwrap();
        assert_eq!(row.runs, 3);
        assert_eq!(row.ee.std, 0.0);
        let cmp = compare_schemes(&rep);
        assert_eq!(cmp[0].ranking, vec![(0, Scheme::Windless, 1)]);
        assert!(cmp[0].chain.is_none());
    }

    #[test]
    fn duplicated_scheme_ties() {
        let mut cfg = small();
        cfg.experiment.schemes = vec![Scheme::Offline, Scheme::Offline];
        cfg.experiment.repeats = 2;
        let rep = run_experiment(&cfg).unwrap();
        let cmp = compare_schemes(&rep);
        assert!(cmp[0].has_tie());
        assert_eq!(cmp[0].pair(0, 1), Some(1.0));
        assert_eq!(cmp[0].pair(1, 0), Some(1.0));
    }

    #[test]
    fn eps_sweep_reuses_one_plan() {
        let mut cfg = small();
        cfg.experiment.schemes = vec![Scheme::Offline, Scheme::Oboa];
        cfg.experiment.sweep_axis = Some(SweepAxis::EpsQ);
        cfg.experiment.sweep_values = vec![0.0, 50.0];
        cfg.experiment.repeats = 2;
        let rep = run_experiment(&cfg).unwrap();
        assert!(rep.complete());
        assert_eq!(rep.records.len(), 2 * 2 * 2);
        let a = rep.row(0, Scheme::Offline).unwrap();
        let b = rep.row(1, Scheme::Offline).unwrap();
        assert_eq!(a.plan_objective, b.plan_objective);
        assert_eq!(a.ee, b.ee);
        // With eps_Q = 0 the online scheme flies the offline plan.
        assert_eq!(rep.row(0, Scheme::Oboa).unwrap().ee, a.ee);
    }

    #[test]
    fn cache_shares_windless_plan_across_wind() {
        let cfg = small();
        let mut cache = PlanCache::new();
        let (mut s, _) = cfg.at(None);
        let a = cache.get(Scheme::Windless, &s, 1).unwrap();
        s.wind.lambda_scale = 3.0;
        let b = cache.get(Scheme::Windless, &s, 2).unwrap();
        assert!(Arc::ptr_eq(&a, &b));
        assert_eq!(cache.len(), 1);
    }
}
