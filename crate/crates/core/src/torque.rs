//! Joint angles from markers, static-equilibrium joint torques, and scaled
//! per-window regression targets.
//!
//! Lab frame: `x` forward, `y` left, `z` up. The right arm is the measured
//! arm. `θ_e` is the angle between the shoulder→elbow and elbow→wrist
//! directions, so a straight arm gives 0. `θ_s` is the angle of the upper arm's
//! projection onto the frontal plane (spanned by the shoulder-to-shoulder
//! axis and gravity) away from straight down, positive toward the arm's side.

use ndarray::Array2;

use crate::data::manifest::ForearmLever;
use crate::data::{BodyParameters, Marker, MarkerTrajectory, RunManifest, Sex};
use crate::error::{Error, Result};
use crate::features::WindowPlan;
use crate::preprocess::Sos;

pub const GRAVITY: f64 = 9.81;

type V3 = [f64; 3];

fn sub(a: V3, b: V3) -> V3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn dot(a: V3, b: V3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn norm(a: V3) -> f64 {
    dot(a, a).sqrt()
}

fn scale(a: V3, s: f64) -> V3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

#[derive(Debug, Clone, PartialEq)]
pub struct JointAngles {
    pub theta_s: Vec<f64>,
    pub theta_e: Vec<f64>,
}

impl JointAngles {
    pub fn len(&self) -> usize {
        self.theta_s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.theta_s.is_empty()
    }
}

const MIN_SEGMENT_M: f64 = 1e-6;

fn unit(v: V3, sample: usize, what: &str) -> Result<V3> {
    let n = norm(v);
    if n < MIN_SEGMENT_M {
        return Err(Error::Kinematics {
            sample,
            msg: format!("{what} markers coincide"),
        });
    }
    Ok(scale(v, 1.0 / n))
}

pub fn compute_angles(traj: &MarkerTrajectory) -> Result<JointAngles> {
    let n = traj.n_samples();
    let mut theta_s = Vec::with_capacity(n);
    let mut theta_e = Vec::with_capacity(n);
    for t in 0..n {
        let sh = traj.at(t, Marker::RightShoulder);
        let el = traj.at(t, Marker::RightElbow);
        let wr = traj.at(t, Marker::RightWrist);
        let upper = unit(sub(el, sh), t, "shoulder and elbow")?;
        let fore = unit(sub(wr, el), t, "elbow and wrist")?;
        let lateral = unit(
            sub(sh, traj.at(t, Marker::LeftShoulder)),
            t,
            "left and right shoulder",
        )?;

        theta_e.push(dot(upper, fore).clamp(-1.0, 1.0).acos());

        let g = [0.0, 0.0, -1.0];
        let down = sub(g, scale(lateral, dot(g, lateral)));
        let down = unit(down, t, "shoulder axis parallel to gravity;")?;
        let a = dot(upper, lateral);
        let b = dot(upper, down);
        theta_s.push(if a.hypot(b) < 1e-12 { 0.0 } else { a.atan2(b) });
    }
    Ok(JointAngles { theta_s, theta_e })
}

/// Segment mass and centre-of-mass percentages for upper arm, forearm, hand.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnthropometricTable {
    pub mass_pct: [f64; 3],
    pub com_pct: [f64; 3],
}

impl AnthropometricTable {
    pub const MALE: AnthropometricTable = AnthropometricTable {
        mass_pct: [2.71, 1.62, 0.61],
        com_pct: [57.72, 45.74, 79.00],
    };
    pub const FEMALE: AnthropometricTable = AnthropometricTable {
        mass_pct: [2.55, 1.38, 0.56],
        com_pct: [57.54, 45.59, 74.74],
    };

    pub fn for_sex(sex: Sex) -> Self {
        match sex {
            Sex::Male => Self::MALE,
            Sex::Female => Self::FEMALE,
        }
    }
}

/// Perpendicular distances `y = l_ua·sin θ_s` and `x = l_fa·sin(θ_e − θ_s)`.
pub fn perpendicular_distances(theta_s: f64, theta_e: f64, body: &BodyParameters) -> (f64, f64) {
    (
        body.forearm_length_m * (theta_e - theta_s).sin(),
        body.upper_arm_length_m * theta_s.sin(),
    )
}

/// Elbow, shoulder, front-shoulder and side-shoulder torque at one pose.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoseTorque {
    pub elbow: f64,
    pub shoulder: f64,
    pub front: f64,
    pub side: f64,
}

pub fn pose_torque(
    theta_s: f64,
    theta_e: f64,
    body: &BodyParameters,
    table: &AnthropometricTable,
    m_obj: f64,
    variant: ForearmLever,
) -> PoseTorque {
    let g = GRAVITY;
    let [m_ua, m_fa, m_h] = table.mass_pct.map(|p| body.body_mass_kg * p / 100.0);
    let [p_ua, p_fa, p_h] = table.com_pct;
    let (x, y) = perpendicular_distances(theta_s, theta_e, body);
    let rel = (theta_e - theta_s).sin();
    let arm = match variant {
        ForearmLever::AsPrinted => body.forearm_length_m,
        ForearmLever::MomentArmX => x,
    };
    let elbow = m_fa * g * (p_fa / 100.0) * x
        + (m_obj + m_h) * g * (arm + (p_h / 100.0) * body.hand_length_m * rel);
    let shoulder =
        elbow + m_ua * g * (p_ua / 100.0) * y + (m_obj + m_h + m_fa) * g * body.upper_arm_length_m;
    PoseTorque {
        elbow,
        shoulder,
        front: shoulder * theta_s.cos(),
        side: shoulder * theta_s.sin(),
    }
}

/// Sample-rate torque series: elbow, front-shoulder, side-shoulder in N·m.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTorques {
    pub elbow: Vec<f64>,
    pub front: Vec<f64>,
    pub side: Vec<f64>,
}

impl RawTorques {
    pub fn len(&self) -> usize {
        self.elbow.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elbow.is_empty()
    }

    pub fn joints(&self) -> [&[f64]; 3] {
        [&self.elbow, &self.front, &self.side]
    }
}

pub fn compute_torques(
    angles: &JointAngles,
    body: &BodyParameters,
    table: &AnthropometricTable,
    m_obj: f64,
    variant: ForearmLever,
) -> RawTorques {
    let mut out = RawTorques {
        elbow: Vec::with_capacity(angles.len()),
        front: Vec::with_capacity(angles.len()),
        side: Vec::with_capacity(angles.len()),
    };
    for (&s, &e) in angles.theta_s.iter().zip(&angles.theta_e) {
        let p = pose_torque(s, e, body, table, m_obj, variant);
        out.elbow.push(p.elbow);
        out.front.push(p.front);
        out.side.push(p.side);
    }
    out
}

/// Torques of a recorded trajectory, with the object mass taken from its condition.
pub fn trajectory_torques(traj: &MarkerTrajectory, m: &RunManifest) -> Result<RawTorques> {
    let angles = compute_angles(traj)?;
    let table = AnthropometricTable::for_sex(m.body.sex);
    Ok(compute_torques(
        &angles,
        &m.body,
        &table,
        traj.condition.weight_kg,
        m.forearm_lever,
    ))
}

/// Low-pass each joint and keep the last sample of every window: `[n_windows × 3]` N·m.
pub fn window_targets(raw: &RawTorques, plan: &WindowPlan, lowpass: &Sos) -> Result<Array2<f64>> {
    let mut out = Array2::zeros((plan.n_windows, 3));
    for (j, series) in raw.joints().into_iter().enumerate() {
        let smooth = lowpass.filtfilt(series)?;
        for w in 0..plan.n_windows {
            out[[w, j]] = smooth[plan.last(w)];
        }
    }
    Ok(out)
}

/// Per-joint affine map of `[min, max]` onto `[−1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MinMaxScaler {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl MinMaxScaler {
    /// A column with no range is given bounds `c ± 1`, so it maps to 0.
    pub fn fit(y: &Array2<f64>) -> Result<Self> {
        if y.nrows() == 0 {
            return Err(Error::Empty("target scaler needs at least one row".into()));
        }
        let mut min = Vec::new();
        let mut max = Vec::new();
        for col in y.columns() {
            let lo = col.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if hi - lo > 1e-12 * hi.abs().max(lo.abs()).max(1.0) {
                min.push(lo);
                max.push(hi);
            } else {
                min.push(lo - 1.0);
                max.push(lo + 1.0);
            }
        }
        Ok(Self { min, max })
    }

    pub fn transform(&self, y: &Array2<f64>) -> Array2<f64> {
        let mut out = y.clone();
        for (j, mut col) in out.columns_mut().into_iter().enumerate() {
            let (lo, hi) = (self.min[j], self.max[j]);
            col.mapv_inplace(|v| 2.0 * (v - lo) / (hi - lo) - 1.0);
        }
        out
    }

    pub fn inverse(&self, y: &Array2<f64>) -> Array2<f64> {
        let mut out = y.clone();
        for (j, mut col) in out.columns_mut().into_iter().enumerate() {
            let (lo, hi) = (self.min[j], self.max[j]);
            col.mapv_inplace(|v| (v + 1.0) * (hi - lo) / 2.0 + lo);
        }
        out
    }
}
