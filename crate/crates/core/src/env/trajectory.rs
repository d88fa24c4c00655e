use std::fmt::Write as _;
use std::path::Path;

use super::{Phase, Status};

pub const TRAJECTORY_HEADER: &str = "t,phase,theta,phi,r,theta_dot,phi_dot,r_dot,x,y,z,alpha_deg,psi_deg,beta_rad,Wr,Ft,power_kW,reward,status";

/// One decision step of an exported trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryRow {
    pub t: f64,
    pub phase: Phase,
    pub theta: f64,
    pub phi: f64,
    pub r: f64,
    pub theta_dot: f64,
    pub phi_dot: f64,
    pub r_dot: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub alpha_deg: f64,
    pub psi_deg: f64,
    pub beta_rad: f64,
    pub w_rel: f64,
    pub tension: f64,
    pub power_kw: f64,
    pub reward: f64,
    pub status: Status,
}

impl TrajectoryRow {
    fn numbers(&self) -> [f64; 17] {
        [
            self.t,
            self.theta,
            self.phi,
            self.r,
            self.theta_dot,
            self.phi_dot,
            self.r_dot,
            self.x,
            self.y,
            self.z,
            self.alpha_deg,
            self.psi_deg,
            self.beta_rad,
            self.w_rel,
            self.tension,
            self.power_kw,
            self.reward,
        ]
    }

    pub fn to_line(&self) -> String {
        let n = self.numbers();
        let mut s = String::new();
        // Rust's float Display is the shortest string that round-trips.
        write!(s, "{},{}", n[0], self.phase).unwrap();
        for v in &n[1..] {
            write!(s, ",{v}").unwrap();
        }
        write!(s, ",{}", self.status.label()).unwrap();
        s
    }

    pub fn parse_line(line: &str) -> Result<Self, String> {
        let f: Vec<&str> = line.trim().split(',').collect();
        if f.len() != 19 {
            return Err(format!("expected 19 fields, found {}", f.len()));
        }
        let num = |i: usize| -> Result<f64, String> {
            f[i].parse::<f64>().map_err(|e| format!("field {i} `{}`: {e}", f[i]))
        };
        Ok(TrajectoryRow {
            t: num(0)?,
            phase: f[1].parse()?,
            theta: num(2)?,
            phi: num(3)?,
            r: num(4)?,
            theta_dot: num(5)?,
            phi_dot: num(6)?,
            r_dot: num(7)?,
            x: num(8)?,
            y: num(9)?,
            z: num(10)?,
            alpha_deg: num(11)?,
            psi_deg: num(12)?,
            beta_rad: num(13)?,
            w_rel: num(14)?,
            tension: num(15)?,
            power_kw: num(16)?,
            reward: num(17)?,
            status: f[18].parse()?,
        })
    }
}

pub fn trajectory_to_string(rows: &[TrajectoryRow]) -> String {
    let mut out = String::with_capacity(rows.len() * 200 + TRAJECTORY_HEADER.len() + 1);
    out.push_str(TRAJECTORY_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&r.to_line());
        out.push('\n');
    }
    out
}

pub fn write_trajectory(path: &Path, rows: &[TrajectoryRow]) -> std::io::Result<()> {
    std::fs::write(path, trajectory_to_string(rows))
}

pub fn read_trajectory(path: &Path) -> Result<Vec<TrajectoryRow>, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == TRAJECTORY_HEADER => {}
        _ => return Err(format!("{}: missing trajectory header", path.display())),
    }
    lines
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, l)| TrajectoryRow::parse_line(l).map_err(|e| format!("{}: row {}: {e}", path.display(), i + 1)))
        .collect()
}
