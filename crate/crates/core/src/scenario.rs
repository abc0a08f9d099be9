//! The three control scenarios and their side-by-side comparison.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use crate::control::ControlMode;
use crate::error::{Error, Result};
use crate::grid::ZoneId;
use crate::io::config::SimulationConfig;
use crate::io::csv::{format_table, write_observables};
use crate::io::vtk::write_snapshot;
use crate::stepper::{simulate, RunOutput};

pub const COMPARISON_HEADER: &str = "t,M_P_wc,M_P_sc1,M_P_sc2,M_P2_wc,M_P2_sc1,M_P2_sc2";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    /// No control.
    Wc,
    /// Departure-area control in zone 1 only.
    Sc1,
    /// Arrival-area control in zone 2 only.
    Sc2,
}

impl Scenario {
    pub const ALL: [Scenario; 3] = [Scenario::Wc, Scenario::Sc1, Scenario::Sc2];

    pub fn mode(self) -> ControlMode {
        match self {
            Scenario::Wc => ControlMode::Off,
            Scenario::Sc1 => ControlMode::Departure,
            Scenario::Sc2 => ControlMode::Arrival,
        }
    }

    /// `cfg` with its control mode replaced; gains and windows are kept.
    pub fn apply(self, cfg: &SimulationConfig) -> SimulationConfig {
        let mut out = cfg.clone();
        out.control.mode = self.mode();
        out
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scenario::Wc => "wc",
            Scenario::Sc1 => "sc1",
            Scenario::Sc2 => "sc2",
        })
    }
}

impl FromStr for Scenario {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "wc" => Ok(Scenario::Wc),
            "sc1" => Ok(Scenario::Sc1),
            "sc2" => Ok(Scenario::Sc2),
            _ => Err(format!("expected wc|sc1|sc2, got `{s}`")),
        }
    }
}

/// Runs one scenario and, with `out` set, writes `observables.csv` and the
/// zone snapshots there.
pub fn run_scenario(cfg: &SimulationConfig, scenario: Scenario, out: Option<&Path>) -> Result<RunOutput> {
    let output = simulate(&scenario.apply(cfg))?;
    if let Some(dir) = out {
        write_run(dir, &output)?;
    }
    Ok(output)
}

pub fn write_run(dir: &Path, output: &RunOutput) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_observables(&dir.join("observables.csv"), &output.records)?;
    for snap in &output.snapshots {
        for zone in [ZoneId::One, ZoneId::Two] {
            write_snapshot(dir, snap.state.zone(zone), snap.t)?;
        }
    }
    Ok(())
}

/// One terminal-time ordering check.
#[derive(Debug, Clone, PartialEq)]
pub struct Verdict {
    pub claim: &'static str,
    pub lhs: f64,
    pub rhs: f64,
}

impl Verdict {
    pub fn holds(&self) -> bool {
        self.lhs < self.rhs
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}: {} ({:.6e} vs {:.6e})",
            if self.holds() { "PASS" } else { "FAIL" },
            self.claim,
            self.lhs,
            self.rhs
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    /// Indexed like [`Scenario::ALL`].
    pub runs: [RunOutput; 3],
}

impl Comparison {
    pub fn run(&self, s: Scenario) -> &RunOutput {
        &self.runs[s as usize]
    }

    /// Terminal-time orderings: departure control lowers the network's
    /// stressed mass most, arrival control lowers zone 2's most.
    pub fn verdicts(&self) -> Vec<Verdict> {
        let [wc, sc1, sc2] = [
            self.run(Scenario::Wc).last(),
            self.run(Scenario::Sc1).last(),
            self.run(Scenario::Sc2).last(),
        ];
        vec![
            Verdict {
                claim: "M_P(sc1) < M_P(wc)",
                lhs: sc1.m_p,
                rhs: wc.m_p,
            },
            Verdict {
                claim: "M_P2(sc2) < M_P2(wc)",
                lhs: sc2.m_p2,
                rhs: wc.m_p2,
            },
            Verdict {
                claim: "M_P(sc1) < M_P(sc2)",
                lhs: sc1.m_p,
                rhs: sc2.m_p,
            },
            Verdict {
                claim: "M_P2(sc2) < M_P2(sc1)",
                lhs: sc2.m_p2,
                rhs: sc1.m_p2,
            },
        ]
    }

    pub fn table(&self) -> String {
        let [wc, sc1, sc2] = &self.runs;
        format_table(
            COMPARISON_HEADER,
            wc.records
                .iter()
                .zip(&sc1.records)
                .zip(&sc2.records)
                .map(|((a, b), c)| vec![a.t, a.m_p, b.m_p, c.m_p, a.m_p2, b.m_p2, c.m_p2]),
        )
    }
}

/// Runs all three scenarios from the same initial data. With `out` set,
/// each run goes to its own subdirectory and `comparison.csv` is written
/// alongside.
pub fn compare(cfg: &SimulationConfig, out: Option<&Path>) -> Result<Comparison> {
    let mut runs = Vec::with_capacity(3);
    for s in Scenario::ALL {
        let dir = out.map(|d| d.join(s.to_string()));
        runs.push(run_scenario(cfg, s, dir.as_deref())?);
    }
    let runs: [RunOutput; 3] = runs.try_into().expect("three scenarios");
    let cmp = Comparison { runs };
    if let Some(dir) = out {
        let path = dir.join("comparison.csv");
        std::fs::write(&path, cmp.table()).map_err(|e| Error::io(&path, e))?;
    }
    Ok(cmp)
}
