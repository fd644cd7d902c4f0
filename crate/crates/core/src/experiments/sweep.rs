//! Coupling continuation: warm-started schedules with cold-start audits, the
//! segregated interface family, and the β → 0⁻ / β → −∞ sweeps.

use std::collections::HashMap;
use std::ops::Range;
use std::sync::Arc;

use crate::config::ScheduleBlock;
use crate::energy::State;
use crate::error::{Error, Result};
use crate::grid::RadialGrid;
use crate::limits::limit_levels;
use crate::model::{Decomposition, SystemModel};
use crate::solver::{
    default_seeds, minimize, minimize_from, minimize_on, SolveConfig, SolveResult,
};

use super::measure::solved_record;
use super::record::{Start, SweepRecord};

pub const SWEEP_ZERO: &str = "sweep-zero";
pub const SWEEP_INFINITY: &str = "sweep-infinity";

/// `cfg` with the default seeds of `model` when it lists none.
pub fn seeded(cfg: &SolveConfig, model: &SystemModel) -> SolveConfig {
    let mut c = cfg.clone();
    if c.seeds.is_empty() {
        c.seeds = default_seeds(model.m());
    }
    c
}

/// `cfg` with the default seeds of `model`, replacing configured ones (used for
/// sub-problems whose group count differs from the configured model).
pub fn reseeded(cfg: &SolveConfig, model: &SystemModel) -> SolveConfig {
    SolveConfig {
        seeds: default_seeds(model.m()),
        ..cfg.clone()
    }
}

/// The model of group `h` alone, as a single group.
pub fn group_model(model: &SystemModel, h: usize) -> Result<SystemModel> {
    let comps: Vec<usize> = model.decomposition().group(h).collect();
    let n = comps.len();
    model.sub_model(&comps, Decomposition::single(n))
}

/// Least energies `c_h` of every group taken alone.
pub fn sub_levels(
    model: &SystemModel,
    grid: &Arc<RadialGrid>,
    cfg: &SolveConfig,
) -> Result<Vec<SolveResult>> {
    let groups: Vec<usize> = (0..model.m()).collect();
    cfg.execution
        .map(&groups, |_, &h| {
            let sub = group_model(model, h)?;
            minimize(&sub, grid, &reseeded(cfg, &sub))
        })
        .into_iter()
        .collect()
}

/// Bookkeeping of the candidate starts at one schedule point.
#[derive(Debug, Clone)]
pub struct Chosen {
    pub result: SolveResult,
    pub start: Start,
    pub warm_energy: Option<f64>,
    pub cold_energy: Option<f64>,
}

fn pick(candidates: Vec<(Start, Result<SolveResult>)>) -> Result<Chosen> {
    let energy_of = |s: Start, c: &[(Start, Result<SolveResult>)]| {
        c.iter()
            .find(|(k, _)| *k == s)
            .and_then(|(_, r)| r.as_ref().ok().map(|r| r.energy))
    };
    let warm_energy = energy_of(Start::Warm, &candidates);
    let cold_energy = energy_of(Start::Cold, &candidates);
    let mut best: Option<(Start, SolveResult)> = None;
    let mut first_err = None;
    for (start, res) in candidates {
        match res {
            Ok(r) => {
                // converged runs beat unconverged ones, then the lower energy wins
                let better = match &best {
                    None => true,
                    Some((_, b)) => {
                        (r.converged && !b.converged)
                            || (r.converged == b.converged
                                && r.energy < b.energy - 1e-12 * b.energy.abs())
                    }
                };
                if better {
                    best = Some((start, r));
                }
            }
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    match best {
        Some((start, result)) => Ok(Chosen {
            result,
            start,
            warm_energy,
            cold_energy,
        }),
        None => Err(first_err.unwrap_or_else(|| Error::Solver("no start candidates".into()))),
    }
}

type Candidate = Option<Result<SolveResult>>;
type Segregated = Option<(f64, Vec<Vec<f64>>)>;

/// Whether point `i` gets a cold start.
pub fn is_audit(i: usize, audit_every: usize) -> bool {
    i == 0 || (audit_every > 0 && i.is_multiple_of(audit_every))
}

/// Solves `models` in order. Cold starts (audits) and starts from `extra` run
/// independently and in parallel; the warm chain from the previous chosen state is
/// sequential. At every point the best candidate is kept.
pub fn continuation(
    models: &[SystemModel],
    grid: &Arc<RadialGrid>,
    cfg: &SolveConfig,
    audit_every: usize,
    extra: Option<&State>,
) -> Result<Vec<Chosen>> {
    let indices: Vec<usize> = (0..models.len()).collect();
    let independent: Vec<(Candidate, Candidate)> = cfg.execution.map(&indices, |_, &i| {
        let model = &models[i];
        let cold = is_audit(i, audit_every).then(|| minimize(model, grid, &seeded(cfg, model)));
        let iface = extra.map(|s| minimize_from(model, cfg, s, None));
        (cold, iface)
    });
    let mut chosen: Vec<Chosen> = Vec::with_capacity(models.len());
    for (i, (cold, iface)) in independent.into_iter().enumerate() {
        let mut candidates = Vec::new();
        if let Some(prev) = chosen.last() {
            candidates.push((
                Start::Warm,
                minimize_from(&models[i], cfg, &prev.result.state, None),
            ));
        }
        if let Some(c) = cold {
            candidates.push((Start::Cold, c));
        }
        if let Some(f) = iface {
            candidates.push((Start::Interface, f));
        }
        chosen.push(pick(candidates)?);
    }
    Ok(chosen)
}

/// Monotonicity of a coupling schedule: same sign, and `|β|` strictly decreasing
/// towards zero (`towards_zero`) or strictly increasing otherwise.
pub fn validate_schedule(values: &[f64], towards_zero: bool) -> Result<()> {
    if values.is_empty() {
        return Err(Error::Schedule("schedule is empty".into()));
    }
    if values.iter().any(|v| !v.is_finite() || *v == 0.0) {
        return Err(Error::Schedule(
            "schedule values must be finite and nonzero".into(),
        ));
    }
    if values.iter().any(|v| v.signum() != values[0].signum()) {
        return Err(Error::Schedule(
            "schedule values must share one sign".into(),
        ));
    }
    for w in values.windows(2) {
        let ok = if towards_zero {
            w[1].abs() < w[0].abs()
        } else {
            w[1].abs() > w[0].abs()
        };
        if !ok {
            return Err(Error::Schedule(format!(
                "schedule is not monotone at {} -> {}",
                w[0], w[1]
            )));
        }
    }
    Ok(())
}

/// Best state with group `inner` on the ball `[0, r_k)` and the other group on the
/// annulus `(r_k, R)`, each solved alone; its energy bounds `c(β)` from above for every
/// cross coupling.
#[derive(Debug, Clone)]
pub struct InterfaceLevel {
    pub energy: f64,
    /// Interface node `k`; both groups vanish there.
    pub interface: usize,
    pub inner_group: usize,
    pub state: State,
}

struct Piece {
    energy: f64,
    values: Vec<Vec<f64>>,
}

fn masked_group(
    model: &SystemModel,
    grid: &Arc<RadialGrid>,
    cfg: &SolveConfig,
    h: usize,
    support: Range<usize>,
) -> Option<Piece> {
    let sub = group_model(model, h).ok()?;
    let supports = vec![support; sub.d()];
    let r = minimize_on(&sub, grid, &reseeded(cfg, &sub), &supports).ok()?;
    Some(Piece {
        energy: r.energy,
        values: r
            .state
            .components()
            .iter()
            .map(|c| c.values().to_vec())
            .collect(),
    })
}

/// Interface levels for two groups over every node; `None` for other group counts.
/// A geometric scan over the interface node is refined by successive local grids.
pub fn interface_level(
    model: &SystemModel,
    grid: &Arc<RadialGrid>,
    cfg: &SolveConfig,
) -> Result<Option<InterfaceLevel>> {
    if model.m() != 2 {
        return Ok(None);
    }
    let n = grid.interior_len();
    if n < 8 {
        return Err(Error::Geometry(
            "too few nodes for an interface scan".into(),
        ));
    }
    // the solves inside each candidate already run in parallel over seeds
    let exec = cfg.execution;
    let mut cache: HashMap<(usize, usize), Segregated> = HashMap::new();
    let evaluate = |ks: &[(usize, usize)], cache: &mut HashMap<_, _>| {
        let todo: Vec<(usize, usize)> = ks
            .iter()
            .copied()
            .filter(|key| !cache.contains_key(key))
            .collect();
        let results = exec.map(&todo, |_, &(inner, k)| {
            let outer = 1 - inner;
            let a = masked_group(model, grid, cfg, inner, 0..k)?;
            let b = masked_group(model, grid, cfg, outer, k + 1..n)?;
            let mut values = vec![Vec::new(); model.d()];
            let dec = model.decomposition();
            for (slot, i) in dec.group(inner).enumerate() {
                values[i] = a.values[slot].clone();
            }
            for (slot, i) in dec.group(outer).enumerate() {
                values[i] = b.values[slot].clone();
            }
            Some((a.energy + b.energy, values))
        });
        for (key, r) in todo.into_iter().zip(results) {
            cache.insert(key, r);
        }
    };
    let energy = |cache: &HashMap<(usize, usize), Segregated>, key: &(usize, usize)| {
        cache
            .get(key)
            .and_then(|v| v.as_ref().map(|(e, _)| *e))
            .unwrap_or(f64::INFINITY)
    };
    let mut coarse: Vec<usize> = Vec::new();
    let mut k = 2usize;
    while k + 2 < n {
        coarse.push(k);
        let next = (k as f64 * 1.5).round() as usize;
        k = next.max(k + 1);
    }
    let mut best: Option<(usize, usize)> = None;
    for inner in 0..2 {
        let keys: Vec<(usize, usize)> = coarse.iter().map(|&k| (inner, k)).collect();
        evaluate(&keys, &mut cache);
        let j = (0..coarse.len())
            .min_by(|&a, &b| energy(&cache, &keys[a]).total_cmp(&energy(&cache, &keys[b])))
            .expect("nonempty scan");
        let mut lo = coarse[j.saturating_sub(1)];
        let mut hi = coarse[(j + 1).min(coarse.len() - 1)];
        loop {
            let pts: Vec<usize> = if hi - lo <= 8 {
                (lo..=hi).collect()
            } else {
                let mut v: Vec<usize> = (0..=8).map(|s| lo + (hi - lo) * s / 8).collect();
                v.dedup();
                v
            };
            let keys: Vec<(usize, usize)> = pts.iter().map(|&k| (inner, k)).collect();
            evaluate(&keys, &mut cache);
            let j = (0..pts.len())
                .min_by(|&a, &b| energy(&cache, &keys[a]).total_cmp(&energy(&cache, &keys[b])))
                .expect("nonempty refinement");
            if hi - lo <= 8 {
                let key = keys[j];
                if best.is_none_or(|b| energy(&cache, &key) < energy(&cache, &b)) {
                    best = Some(key);
                }
                break;
            }
            lo = pts[j.saturating_sub(1)];
            hi = pts[(j + 1).min(pts.len() - 1)];
        }
    }
    let key = best.expect("two orders scanned");
    match cache.remove(&key).flatten() {
        Some((e, values)) => Ok(Some(InterfaceLevel {
            energy: e,
            interface: key.1,
            inner_group: key.0,
            state: State::from_values(grid, values)?,
        })),
        None => Err(Error::Solver("every interface candidate failed".into())),
    }
}

/// Records and final states of a sweep.
#[derive(Debug, Clone)]
pub struct SweepOutput {
    pub records: Vec<SweepRecord>,
    pub states: Vec<State>,
}

fn sweep(
    sweep_id: &str,
    model: &SystemModel,
    grid: &Arc<RadialGrid>,
    cfg: &SolveConfig,
    schedule: &ScheduleBlock,
) -> Result<SweepOutput> {
    let towards_zero = sweep_id == SWEEP_ZERO;
    validate_schedule(&schedule.values, towards_zero)?;
    if model.m() < 2 {
        return Err(Error::InvalidModel(
            "a coupling sweep needs at least two groups".into(),
        ));
    }
    let subs = sub_levels(model, grid, cfg)?;
    let c_h: Vec<f64> = subs.iter().map(|r| r.energy).collect();
    let l_h = limit_levels(model);
    let iface = if !towards_zero && schedule.interface_family {
        interface_level(model, grid, cfg)?
    } else {
        None
    };
    let models: Vec<SystemModel> = schedule
        .values
        .iter()
        .map(|&v| model.clone().with_cross_coupling(v))
        .collect();
    let chosen = continuation(
        &models,
        grid,
        cfg,
        schedule.audit_every,
        iface.as_ref().map(|f| &f.state),
    )?;
    let mut records = Vec::with_capacity(chosen.len());
    let mut states = Vec::with_capacity(chosen.len());
    for (i, ch) in chosen.into_iter().enumerate() {
        let mut r = solved_record(
            sweep_id,
            i,
            schedule.values[i],
            &models[i],
            &ch.result,
            ch.start,
            schedule.support_threshold,
        );
        r.sub_levels = c_h.clone();
        r.limit_levels = l_h.clone();
        r.warm_energy = ch.warm_energy;
        r.cold_energy = ch.cold_energy;
        r.set_extra("sum_sub_levels", c_h.iter().sum());
        if let Some(f) = &iface {
            r.set_extra("interface_level", f.energy);
            r.set_extra("interface_node", f.interface as f64);
            r.set_extra("interface_inner_group", f.inner_group as f64);
        }
        records.push(r);
        states.push(ch.result.state);
    }
    Ok(SweepOutput { records, states })
}

/// Cross couplings `β → 0⁻` along the schedule; the reference is `Σ c_h`.
pub fn sweep_to_zero(
    model: &SystemModel,
    grid: &Arc<RadialGrid>,
    cfg: &SolveConfig,
    schedule: &ScheduleBlock,
) -> Result<SweepOutput> {
    sweep(SWEEP_ZERO, model, grid, cfg, schedule)
}

/// Cross couplings `β → −∞` along the schedule; the reference is the interface level.
pub fn sweep_to_infinity(
    model: &SystemModel,
    grid: &Arc<RadialGrid>,
    cfg: &SolveConfig,
    schedule: &ScheduleBlock,
) -> Result<SweepOutput> {
    sweep(SWEEP_INFINITY, model, grid, cfg, schedule)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedules_must_be_monotone() {
        assert!(validate_schedule(&[-1.0, -10.0, -100.0], false).is_ok());
        assert!(validate_schedule(&[-1.0, -0.1, -0.01], true).is_ok());
        assert!(matches!(
            validate_schedule(&[-1.0, -0.1], false),
            Err(Error::Schedule(_))
        ));
        assert!(validate_schedule(&[-1.0, -1.0], false).is_err());
        assert!(validate_schedule(&[-1.0, 2.0], false).is_err());
        assert!(validate_schedule(&[], true).is_err());
        assert!(validate_schedule(&[0.0], true).is_err());
    }

    #[test]
    fn audits_follow_the_period() {
        let hits: Vec<usize> = (0..7).filter(|&i| is_audit(i, 3)).collect();
        assert_eq!(hits, vec![0, 3, 6]);
        assert_eq!((0..5).filter(|&i| is_audit(i, 0)).count(), 1);
    }
}
