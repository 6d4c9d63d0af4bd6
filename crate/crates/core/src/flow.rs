//! Time integration of the C⁰ Theta flow and the C¹ Triod flow.
//!
//! Each step treats the fourth-order term implicitly with its coefficient
//! frozen at the current state, the lower-order remainder explicitly, and
//! imposes the linearized boundary rows. The rows are first built on frames
//! of the current state and then rebuilt once on the frames of the predicted
//! state, which removes most of the lag in the nonlinear conditions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{EnergyParams, DEFAULT_REGULARITY_FLOOR};
use crate::linear::{assemble, assemble_with_frames, natural_boundary, AssembleOptions, LinearData};
use crate::network::{
    junction_residuals, normal_span_measure, parametric_admissibility, AdmissibilityReport, End, Flavor, NetworkState,
    Topology, GRID_TOLERANCE,
};

/// Numerical settings of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SchemeConfig {
    /// Grid intervals used when a scenario is generated for the run.
    pub n: usize,
    pub dt_init: f64,
    pub dt_min: f64,
    pub t_final: f64,
    /// Tolerance on the imposed boundary rows after each solve.
    pub boundary_tolerance: f64,
    /// Tolerance of the admissibility check of the initial data.
    pub admissibility_tolerance: f64,
    /// Relative energy increase tolerated per unit time, `E₁ ≤ E₀ + tol·dt·E(0)`.
    pub energy_tolerance: f64,
    pub regularity_floor: f64,
    /// Number of times the boundary frames are refreshed from the prediction.
    pub boundary_corrections: usize,
    /// Keep a snapshot every this many accepted steps (0 keeps none).
    pub snapshot_every: usize,
    pub max_steps: usize,
}

impl Default for SchemeConfig {
    fn default() -> Self {
        Self {
            n: 64,
            dt_init: 1e-4,
            dt_min: 1e-9,
            t_final: 0.1,
            boundary_tolerance: 1e-8,
            admissibility_tolerance: GRID_TOLERANCE,
            energy_tolerance: 1e-8,
            regularity_floor: DEFAULT_REGULARITY_FLOOR,
            boundary_corrections: 1,
            snapshot_every: 0,
            max_steps: 1_000_000,
        }
    }
}

impl SchemeConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("dt_init", self.dt_init),
            ("dt_min", self.dt_min),
            ("t_final", self.t_final),
            ("boundary_tolerance", self.boundary_tolerance),
            ("admissibility_tolerance", self.admissibility_tolerance),
            ("regularity_floor", self.regularity_floor),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.energy_tolerance >= 0.0 && self.energy_tolerance.is_finite()) {
            return Err(Error::InvalidArgument("energy_tolerance must be non-negative".into()));
        }
        if self.dt_min >= self.dt_init {
            return Err(Error::InvalidArgument(format!(
                "dt_min ({}) must be smaller than dt_init ({})",
                self.dt_min, self.dt_init
            )));
        }
        if self.n < crate::geometry::MIN_INTERVALS {
            return Err(Error::GridTooSmall {
                n: self.n,
                required: crate::geometry::MIN_INTERVALS,
            });
        }
        if self.max_steps == 0 {
            return Err(Error::InvalidArgument("max_steps must be positive".into()));
        }
        Ok(())
    }
}

/// Diagnostics of one state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Monitor {
    pub energy: f64,
    pub residuals: AdmissibilityReport,
    /// Smallest singular value of the junction normals at each junction.
    pub span: Vec<(End, f64)>,
    pub min_speed: f64,
}

impl Monitor {
    fn max_of(&self, prefixes: &[&str]) -> f64 {
        prefixes
            .iter()
            .map(|p| self.residuals.max_with_prefix(p))
            .fold(0.0, f64::max)
    }

    /// The residual columns of the CSV trace:
    /// concurrency, angle, curvature, second order, third order.
    pub fn csv_residuals(&self) -> [f64; 5] {
        [
            self.max_of(&["concurrency@"]),
            self.max_of(&["angle@"]),
            self.max_of(&["curvature@", "curvature_sum@"]),
            self.max_of(&["second_order@", "tangential_second_order@"]),
            self.max_of(&["third_order@"]),
        ]
    }
}

pub fn monitor(net: &NetworkState, params: &EnergyParams) -> Result<Monitor> {
    Ok(Monitor {
        energy: net.energy(params)?,
        residuals: junction_residuals(net, params)?,
        span: net
            .junction_ends()
            .iter()
            .map(|&e| (e, normal_span_measure(net, e)))
            .collect(),
        min_speed: net.min_speed(),
    })
}

#[derive(Debug, Clone)]
pub struct FlowState {
    pub time: f64,
    pub net: NetworkState,
    pub energy: f64,
    pub monitor: Monitor,
}

impl FlowState {
    pub fn new(net: NetworkState, params: &EnergyParams) -> Result<Self> {
        let monitor = monitor(&net, params)?;
        Ok(Self {
            time: 0.0,
            energy: monitor.energy,
            net,
            monitor,
        })
    }
}

/// Outcome of one step.
#[derive(Debug, Clone)]
pub struct StepResult {
    pub state: FlowState,
    /// Largest row-normalized residual of the imposed boundary rows.
    pub imposed_residual: f64,
}

/// Lower-order conditions a state must meet before stepping: concurrency and,
/// for Triods, the fixed endpoints. The remaining conditions are only
/// imposed in linearized form and are not required to hold exactly.
fn check_steppable(net: &NetworkState, params: &EnergyParams, floor: f64) -> Result<()> {
    net.check_regular(floor)?;
    let r = junction_residuals(net, params)?;
    let worst = r.max_with_prefix("concurrency@").max(r.max_with_prefix("endpoint@"));
    if worst > GRID_TOLERANCE {
        return Err(Error::Inadmissible(format!(
            "junction points do not match (residual {worst:.3e})"
        )));
    }
    Ok(())
}

pub fn step(state: &FlowState, dt: f64, params: &EnergyParams, flavor: Flavor) -> Result<StepResult> {
    step_with(state, dt, params, flavor, &SchemeConfig::default())
}

pub fn step_with(
    state: &FlowState,
    dt: f64,
    params: &EnergyParams,
    flavor: Flavor,
    config: &SchemeConfig,
) -> Result<StepResult> {
    let net = &state.net;
    if net.topology() != flavor.topology() {
        return Err(Error::WrongTopology {
            expected: flavor.topology(),
            found: net.topology(),
        });
    }
    check_steppable(net, params, config.regularity_floor)?;
    let mut data = LinearData::natural(net, params, flavor, dt)?;
    let mut solution = assemble(net, flavor, &data, AssembleOptions::default())?.solve()?;
    for _ in 0..config.boundary_corrections {
        let predicted = solution.state;
        predicted.check_regular(config.regularity_floor)?;
        data.boundary = natural_boundary(&predicted, params, flavor);
        solution = assemble_with_frames(net, &predicted, flavor, &data, AssembleOptions::default())?.solve()?;
    }
    let next = solution.state;
    next.check_regular(config.regularity_floor)?;
    let monitor = monitor(&next, params)?;
    Ok(StepResult {
        imposed_residual: solution.boundary.iter().map(|r| r.value).fold(0.0, f64::max),
        state: FlowState {
            time: state.time + dt,
            energy: monitor.energy,
            net: next,
            monitor,
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    /// Reached the final time.
    TFinal,
    /// The speed of some curve fell below the regularity floor.
    RegularityFloor,
    /// The step size dropped below `dt_min` without an acceptable step.
    StepUnderflow,
    /// `max_steps` accepted steps were taken before the final time.
    StepLimit,
}

impl Termination {
    pub fn label(self) -> &'static str {
        match self {
            Termination::TFinal => "t_final",
            Termination::RegularityFloor => "regularity floor",
            Termination::StepUnderflow => "step underflow",
            Termination::StepLimit => "step limit",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub t: f64,
    /// Step that produced this entry (0 for the initial state).
    pub dt: f64,
    pub energy: f64,
    pub imposed_residual: f64,
    pub monitor: Monitor,
    /// Index into [`FlowTrace::snapshots`].
    pub snapshot: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct FlowTrace {
    pub entries: Vec<TraceEntry>,
    pub snapshots: Vec<NetworkState>,
    pub termination: Termination,
    pub final_state: NetworkState,
    pub rejected_steps: usize,
}

impl FlowTrace {
    pub fn initial_energy(&self) -> f64 {
        self.entries[0].energy
    }

    pub fn final_energy(&self) -> f64 {
        self.entries.last().expect("trace is never empty").energy
    }
}

/// Runs the flow from `initial` to `config.t_final`, halving the step after
/// a solver failure or an energy increase beyond the tolerance.
pub fn run(initial: &NetworkState, config: &SchemeConfig, params: &EnergyParams, flavor: Flavor) -> Result<FlowTrace> {
    config.validate()?;
    if initial.topology() != flavor.topology() {
        return Err(Error::WrongTopology {
            expected: flavor.topology(),
            found: initial.topology(),
        });
    }
    let report = parametric_admissibility(initial, params, flavor).with_tolerance(config.admissibility_tolerance);
    if !report.pass() {
        let names: Vec<String> = report
            .failures()
            .map(|r| format!("{}={:.3e}", r.name, r.value))
            .collect();
        return Err(Error::Inadmissible(names.join(", ")));
    }
    let mut state = FlowState::new(initial.clone(), params)?;
    let e0 = state.energy;
    let keep = config.snapshot_every > 0;
    let mut snapshots = Vec::new();
    if keep {
        snapshots.push(initial.clone());
    }
    let mut entries = vec![TraceEntry {
        t: 0.0,
        dt: 0.0,
        energy: e0,
        imposed_residual: 0.0,
        monitor: state.monitor.clone(),
        snapshot: keep.then_some(0),
    }];
    let mut dt = config.dt_init;
    let mut rejected = 0;
    let mut accepted = 0;
    // the last step may be shortened to land on t_final
    let eps = 1e-12 * config.t_final;
    let termination = loop {
        if state.time >= config.t_final - eps {
            break Termination::TFinal;
        }
        if accepted >= config.max_steps {
            break Termination::StepLimit;
        }
        if dt < config.dt_min {
            break Termination::StepUnderflow;
        }
        let h = dt.min(config.t_final - state.time);
        match step_with(&state, h, params, flavor, config) {
            Ok(res) if res.state.energy <= state.energy + config.energy_tolerance * h * e0.abs() => {
                accepted += 1;
                state = res.state;
                if config.t_final - state.time <= eps {
                    state.time = config.t_final;
                }
                let snapshot = if keep && accepted % config.snapshot_every == 0 {
                    snapshots.push(state.net.clone());
                    Some(snapshots.len() - 1)
                } else {
                    None
                };
                entries.push(TraceEntry {
                    t: state.time,
                    dt: h,
                    energy: state.energy,
                    imposed_residual: res.imposed_residual,
                    monitor: state.monitor.clone(),
                    snapshot,
                });
                if state.net.min_speed() < config.regularity_floor {
                    break Termination::RegularityFloor;
                }
            }
            Ok(_) | Err(Error::Singular { .. }) => {
                rejected += 1;
                dt *= 0.5;
            }
            Err(Error::Irregular { .. }) => {
                // a step that breaches the floor is retried smaller; if that
                // keeps failing the degeneracy is real
                rejected += 1;
                dt *= 0.5;
                if dt < config.dt_min {
                    break Termination::RegularityFloor;
                }
            }
            Err(e) => return Err(e),
        }
    };
    Ok(FlowTrace {
        entries,
        snapshots,
        termination,
        final_state: state.net,
        rejected_steps: rejected,
    })
}

/// Whether the network is flowed by the C⁰ or the C¹ system.
pub fn flavor_of(net: &NetworkState) -> Flavor {
    match net.topology() {
        Topology::Theta => Flavor::C0,
        Topology::Triod => Flavor::C1,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Vec2;
    use crate::scenario::{theta_warped, triod_perturbed, triod_straight};

    fn sup_diff(a: &NetworkState, b: &NetworkState) -> f64 {
        (0..3)
            .flat_map(|i| {
                a.curve(i)
                    .points()
                    .iter()
                    .zip(b.curve(i).points())
                    .map(|(p, q)| (p - q).norm())
                    .collect::<Vec<_>>()
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn config_validation() {
        assert!(SchemeConfig::default().validate().is_ok());
        let bad = SchemeConfig {
            dt_min: 1.0,
            ..SchemeConfig::default()
        };
        assert!(bad.validate().is_err());
        let neg = SchemeConfig {
            t_final: -1.0,
            ..SchemeConfig::default()
        };
        assert!(neg.validate().is_err());
    }

    #[test]
    fn straight_triod_is_stationary() {
        let net = triod_straight(32).unwrap();
        let params = EnergyParams::new(0.2).unwrap();
        let s0 = FlowState::new(net.clone(), &params).unwrap();
        for dt in [1e-4, 1e-2, 1.0] {
            let s1 = step(&s0, dt, &params, Flavor::C1).unwrap();
            assert!(sup_diff(&s1.state.net, &net) < 1e-10, "dt={dt}");
        }
    }

    #[test]
    fn perturbed_triod_loses_energy() {
        let net = triod_perturbed(64, 0.05).unwrap();
        let params = EnergyParams::new(0.2).unwrap();
        let mut s = FlowState::new(net, &params).unwrap();
        for _ in 0..20 {
            let next = step(&s, 1e-4, &params, Flavor::C1).unwrap();
            assert!(next.state.energy < s.energy);
            assert!(next.imposed_residual < 1e-8, "{}", next.imposed_residual);
            s = next.state;
        }
    }

    #[test]
    fn warped_theta_loses_energy() {
        let net = theta_warped(64, [0.0; 3]).unwrap();
        let params = EnergyParams::new(1.0).unwrap();
        let mut s = FlowState::new(net, &params).unwrap();
        for _ in 0..10 {
            let next = step(&s, 1e-5, &params, Flavor::C0).unwrap();
            assert!(next.state.energy < s.energy, "{} -> {}", s.energy, next.state.energy);
            s = next.state;
        }
    }

    #[test]
    fn step_commutes_with_translation() {
        let net = triod_perturbed(48, 0.05).unwrap();
        let params = EnergyParams::new(0.2).unwrap();
        let v = Vec2::new(0.375, -1.25);
        let a = step(
            &FlowState::new(net.clone(), &params).unwrap(),
            1e-4,
            &params,
            Flavor::C1,
        )
        .unwrap();
        let b = step(
            &FlowState::new(net.translate(v).unwrap(), &params).unwrap(),
            1e-4,
            &params,
            Flavor::C1,
        )
        .unwrap();
        assert!(sup_diff(&a.state.net.translate(v).unwrap(), &b.state.net) < 1e-10);
    }

    #[test]
    fn run_reaches_final_time() {
        let net = triod_straight(32).unwrap();
        let params = EnergyParams::new(0.2).unwrap();
        let config = SchemeConfig {
            n: 32,
            dt_init: 0.05,
            dt_min: 1e-6,
            t_final: 0.5,
            ..SchemeConfig::default()
        };
        let trace = run(&net, &config, &params, Flavor::C1).unwrap();
        assert_eq!(trace.termination, Termination::TFinal);
        assert_eq!(trace.entries.last().unwrap().t, 0.5);
        for e in &trace.entries {
            assert!((e.energy - 0.6).abs() < 1e-9);
        }
    }

    #[test]
    fn run_rejects_inadmissible_data() {
        let net = triod_straight(32).unwrap();
        let bent = net
            .with_points([0, 1, 2].map(|i| {
                let mut p = net.curve(i).points().to_vec();
                if i == 0 {
                    p[0] += Vec2::new(1e-3, 0.0);
                }
                p
            }))
            .unwrap();
        let params = EnergyParams::new(0.2).unwrap();
        assert!(matches!(
            run(&bent, &SchemeConfig::default(), &params, Flavor::C1),
            Err(Error::Inadmissible(_))
        ));
    }
}
