//! File formats: network snapshots, flow traces and SVG frames.
//!
//! Every writer is a pure function of its input so that repeated runs emit
//! identical bytes.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{FlowTrace, SchemeConfig};
use crate::geometry::{EnergyParams, Vec2};
use crate::network::{Flavor, NetworkState, Topology};

pub const CSV_HEADER: &str = "t,energy,res_concurrency,res_angle,res_curvature,res_second,res_third,min_speed";

/// On-disk form of a network together with its length weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Snapshot {
    pub topology: Topology,
    pub mu: f64,
    pub curves: Vec<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoints: Option<Vec<[f64; 2]>>,
}

fn pair(v: Vec2) -> [f64; 2] {
    [v.x, v.y]
}

impl Snapshot {
    pub fn from_network(net: &NetworkState, params: &EnergyParams) -> Self {
        Self {
            topology: net.topology(),
            mu: params.mu,
            curves: net
                .curves()
                .iter()
                .map(|c| c.points().iter().map(|&p| pair(p)).collect())
                .collect(),
            endpoints: net.endpoints().map(|e| e.iter().map(|&p| pair(p)).collect()),
        }
    }

    pub fn params(&self) -> Result<EnergyParams> {
        EnergyParams::new(self.mu)
    }

    pub fn to_network(&self) -> Result<NetworkState> {
        let curves: [Vec<Vec2>; 3] = self
            .curves
            .iter()
            .map(|c| c.iter().map(|p| Vec2::new(p[0], p[1])).collect())
            .collect::<Vec<_>>()
            .try_into()
            .map_err(|v: Vec<_>| Error::Parse(format!("expected 3 curves, found {}", v.len())))?;
        let endpoints = match &self.endpoints {
            None => None,
            Some(e) => {
                let arr: [[f64; 2]; 3] = e
                    .as_slice()
                    .try_into()
                    .map_err(|_| Error::Parse(format!("expected 3 endpoints, found {}", e.len())))?;
                Some(arr.map(|p| Vec2::new(p[0], p[1])))
            }
        };
        NetworkState::from_points(self.topology, curves, endpoints)
    }

    /// JSON text with every number written to 17 significant digits.
    pub fn to_json(&self) -> String {
        let mut s = String::new();
        let topo = match self.topology {
            Topology::Theta => "theta",
            Topology::Triod => "triod",
        };
        let _ = write!(
            s,
            "{{\n  \"topology\": \"{topo}\",\n  \"mu\": {},\n  \"curves\": [\n",
            num(self.mu)
        );
        for (i, c) in self.curves.iter().enumerate() {
            s.push_str("    [\n");
            for (j, p) in c.iter().enumerate() {
                let sep = if j + 1 < c.len() { "," } else { "" };
                let _ = writeln!(s, "      [{}, {}]{sep}", num(p[0]), num(p[1]));
            }
            s.push_str(if i + 1 < self.curves.len() {
                "    ],\n"
            } else {
                "    ]\n"
            });
        }
        s.push_str("  ]");
        if let Some(e) = &self.endpoints {
            let pts: Vec<String> = e.iter().map(|p| format!("[{}, {}]", num(p[0]), num(p[1]))).collect();
            let _ = write!(s, ",\n  \"endpoints\": [{}]", pts.join(", "));
        }
        s.push_str("\n}\n");
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }
}

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_snapshot(path: &Path, net: &NetworkState, params: &EnergyParams) -> Result<()> {
    std::fs::write(path, Snapshot::from_network(net, params).to_json())?;
    Ok(())
}

/// Reads a snapshot file and rebuilds the network and its parameters.
pub fn read_snapshot(path: &Path) -> Result<(NetworkState, EnergyParams)> {
    let text = std::fs::read_to_string(path)?;
    let snap = Snapshot::from_json(&text)?;
    Ok((snap.to_network()?, snap.params()?))
}

pub fn trace_csv(trace: &FlowTrace) -> String {
    let mut s = String::from(CSV_HEADER);
    s.push('\n');
    for e in &trace.entries {
        let r = e.monitor.csv_residuals();
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            num(e.t),
            num(e.energy),
            num(r[0]),
            num(r[1]),
            num(r[2]),
            num(r[3]),
            num(r[4]),
            num(e.monitor.min_speed)
        );
    }
    s
}

#[derive(Serialize)]
struct TraceRow {
    t: f64,
    dt: f64,
    energy: f64,
    imposed_residual: f64,
    residuals: [f64; 5],
    min_speed: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    snapshot: Option<usize>,
}

#[derive(Serialize)]
struct TraceDoc<'a> {
    flavor: Flavor,
    mu: f64,
    config: &'a SchemeConfig,
    termination: &'static str,
    rejected_steps: usize,
    entries: Vec<TraceRow>,
    snapshots: Vec<Snapshot>,
}

/// The full trace with its snapshots as a JSON document.
pub fn trace_json(trace: &FlowTrace, config: &SchemeConfig, params: &EnergyParams, flavor: Flavor) -> Result<String> {
    let doc = TraceDoc {
        flavor,
        mu: params.mu,
        config,
        termination: trace.termination.label(),
        rejected_steps: trace.rejected_steps,
        entries: trace
            .entries
            .iter()
            .map(|e| TraceRow {
                t: e.t,
                dt: e.dt,
                energy: e.energy,
                imposed_residual: e.imposed_residual,
                residuals: e.monitor.csv_residuals(),
                min_speed: e.monitor.min_speed,
                snapshot: e.snapshot,
            })
            .collect(),
        snapshots: trace
            .snapshots
            .iter()
            .map(|n| Snapshot::from_network(n, params))
            .collect(),
    };
    let mut s = serde_json::to_string_pretty(&doc).map_err(|e| Error::Parse(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

/// Axis-aligned box in model coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds {
    pub min: Vec2,
    pub max: Vec2,
}

impl Bounds {
    /// Smallest box containing every node of every network, widened by 5%.
    pub fn of<'a>(nets: impl IntoIterator<Item = &'a NetworkState>) -> Self {
        let mut min = Vec2::repeat(f64::INFINITY);
        let mut max = Vec2::repeat(f64::NEG_INFINITY);
        for net in nets {
            for p in net.curves().iter().flat_map(|c| c.points()) {
                min = min.inf(p);
                max = max.sup(p);
            }
        }
        if !min.x.is_finite() {
            return Self {
                min: Vec2::new(-1.0, -1.0),
                max: Vec2::new(1.0, 1.0),
            };
        }
        let pad = 0.05 * (max - min).max().max(1e-9);
        Self {
            min: min.add_scalar(-pad),
            max: max.add_scalar(pad),
        }
    }
}

pub const SVG_SIZE: f64 = 512.0;
const COLORS: [&str; 3] = ["#1f77b4", "#d62728", "#2ca02c"];

/// Maps a model point into the SVG canvas (y pointing up in the model).
pub fn to_pixel(p: Vec2, bounds: &Bounds) -> (f64, f64) {
    let span = (bounds.max - bounds.min).max();
    let s = SVG_SIZE / span;
    let cx = 0.5 * (bounds.min.x + bounds.max.x);
    let cy = 0.5 * (bounds.min.y + bounds.max.y);
    (0.5 * SVG_SIZE + s * (p.x - cx), 0.5 * SVG_SIZE - s * (p.y - cy))
}

/// One frame: the three curves as polylines, junctions as filled discs and
/// fixed endpoints as squares.
pub fn frame_svg(net: &NetworkState, bounds: &Bounds, t: f64) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0}\" height=\"{0}\" viewBox=\"0 0 {0} {0}\">",
        SVG_SIZE
    );
    let _ = writeln!(s, "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>");
    let _ = writeln!(
        s,
        "<text x=\"8\" y=\"20\" font-family=\"monospace\" font-size=\"14\">t = {t:.6e}</text>"
    );
    for (c, color) in net.curves().iter().zip(COLORS) {
        let pts: Vec<String> = c
            .points()
            .iter()
            .map(|&p| {
                let (x, y) = to_pixel(p, bounds);
                format!("{x:.3},{y:.3}")
            })
            .collect();
        let _ = writeln!(
            s,
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"2\" points=\"{}\"/>",
            pts.join(" ")
        );
    }
    for &end in net.junction_ends() {
        let (x, y) = to_pixel(net.curve(0).points()[end.node(net.n())], bounds);
        let _ = writeln!(s, "<circle cx=\"{x:.3}\" cy=\"{y:.3}\" r=\"5\" fill=\"black\"/>");
    }
    if let Some(e) = net.endpoints() {
        for &p in e {
            let (x, y) = to_pixel(p, bounds);
            let _ = writeln!(
                s,
                "<rect x=\"{:.3}\" y=\"{:.3}\" width=\"8\" height=\"8\" fill=\"gray\"/>",
                x - 4.0,
                y - 4.0
            );
        }
    }
    s.push_str("</svg>\n");
    s
}
