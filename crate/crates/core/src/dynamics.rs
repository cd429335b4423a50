//! Planar 3-DOF surface-vessel dynamics.
//!
//! The vessel state is the pose `(x, y, psi)` in the world frame and the
//! body-frame velocities `(u, v, r)`. Forces follow
//!
//! ```text
//! M * nu_dot = tau_thruster + tau_disturbance - (D_l + D_q(nu)) * nu
//! ```
//!
//! with diagonal inertia `M = diag(m + Xa, m + Ya, Iz + Na)`, diagonal linear
//! damping `D_l = diag(Xu, Yv, Nr)` and diagonal quadratic damping
//! `D_q = diag(Xuu |u|, Yvv |v|, Nrr |r|)`. Coriolis terms are not modelled.
//!
//! Sign convention: [`damping_wrench`] returns the force *applied to the
//! body*, so it is added to the external wrench, never subtracted.

use std::f64::consts::PI;
use std::ops::{Add, AddAssign, Neg};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const GRAVITY: f64 = 9.81;

/// Physics step used throughout training and evaluation (50 Hz).
pub const DEFAULT_DT: f64 = 0.02;

/// Wraps an angle to `(-pi, pi]`.
#[inline]
pub fn wrap_angle(angle: f64) -> f64 {
    if angle > -PI && angle <= PI {
        return angle;
    }
    let wrapped = (angle + PI).rem_euclid(2.0 * PI) - PI;
    if wrapped <= -PI {
        wrapped + 2.0 * PI
    } else {
        wrapped
    }
}

/// Pose in the world frame and velocities in the body frame.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BodyState {
    pub x: f64,
    pub y: f64,
    pub psi: f64,
    pub u: f64,
    pub v: f64,
    pub r: f64,
}

impl BodyState {
    pub fn kinetic_energy(&self, inertia: &Inertia) -> f64 {
        let [mu, mv, mr] = inertia.diagonal();
        0.5 * (mu * self.u * self.u + mv * self.v * self.v + mr * self.r * self.r)
    }

    pub fn is_finite(&self) -> bool {
        [self.x, self.y, self.psi, self.u, self.v, self.r].iter().all(|c| c.is_finite())
    }
}

/// Diagonal hydrodynamic damping coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Damping {
    pub xu: f64,
    pub yv: f64,
    pub nr: f64,
    pub xuu: f64,
    pub yvv: f64,
    pub nrr: f64,
}

impl Damping {
    /// Manufacturer-nominal coefficients.
    pub const NOMINAL: Damping =
        Damping { xu: 16.45, yv: 15.80, nr: 6.00, xuu: 2.94, yvv: 2.76, nrr: 5.00 };

    /// Coefficients identified from acceleration and rotation tests. Sway is
    /// pinned at a saturation value because it was never observed above 0.1 m/s.
    pub const IDENTIFIED: Damping =
        Damping { xu: 0.00, yv: 99.99, nr: 0.83, xuu: 17.26, yvv: 99.99, nrr: 17.34 };

    pub fn validate(&self) -> Result<()> {
        let named = [
            ("xu", self.xu),
            ("yv", self.yv),
            ("nr", self.nr),
            ("xuu", self.xuu),
            ("yvv", self.yvv),
            ("nrr", self.nrr),
        ];
        for (name, value) in named {
            if !(value.is_finite() && value >= 0.0) {
                return Err(Error::invalid(name, format!("damping must be finite and >= 0, got {value}")));
            }
        }
        Ok(())
    }

    /// Multiplies every coefficient by the matching factor in
    /// `[xu, yv, nr, xuu, yvv, nrr]` order.
    pub fn scaled(&self, factors: [f64; 6]) -> Damping {
        Damping {
            xu: self.xu * factors[0],
            yv: self.yv * factors[1],
            nr: self.nr * factors[2],
            xuu: self.xuu * factors[3],
            yvv: self.yvv * factors[4],
            nrr: self.nrr * factors[5],
        }
    }
}

/// Rigid-body inertia with optional added mass per axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Inertia {
    /// kg
    pub mass: f64,
    /// kg·m²
    pub iz: f64,
    pub added_surge: f64,
    pub added_sway: f64,
    pub added_yaw: f64,
}

impl Inertia {
    pub const KINGFISHER_MASS: f64 = 35.96;
    pub const KINGFISHER_LENGTH: f64 = 1.35;
    pub const KINGFISHER_BEAM: f64 = 0.98;

    /// Yaw inertia of a uniform rectangular plate, `m (L² + W²) / 12`.
    pub fn plate_yaw_inertia(mass: f64, length: f64, beam: f64) -> f64 {
        mass * (length * length + beam * beam) / 12.0
    }

    pub fn diagonal(&self) -> [f64; 3] {
        [self.mass + self.added_surge, self.mass + self.added_sway, self.iz + self.added_yaw]
    }

    pub fn inverse_diagonal(&self) -> [f64; 3] {
        self.diagonal().map(|m| 1.0 / m)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mass.is_finite() && self.mass > 0.0) {
            return Err(Error::invalid("mass", format!("must be > 0, got {}", self.mass)));
        }
        if !(self.iz.is_finite() && self.iz > 0.0) {
            return Err(Error::invalid("iz", format!("must be > 0, got {}", self.iz)));
        }
        for (name, value) in [
            ("added_surge", self.added_surge),
            ("added_sway", self.added_sway),
            ("added_yaw", self.added_yaw),
        ] {
            if !(value.is_finite() && value >= 0.0) {
                return Err(Error::invalid(name, format!("must be >= 0, got {value}")));
            }
        }
        Ok(())
    }
}

impl Default for Inertia {
    fn default() -> Self {
        let mass = Self::KINGFISHER_MASS;
        Inertia {
            mass,
            iz: Self::plate_yaw_inertia(mass, Self::KINGFISHER_LENGTH, Self::KINGFISHER_BEAM),
            added_surge: 0.0,
            added_sway: 0.0,
            added_yaw: 0.0,
        }
    }
}

/// Damping plus inertia: everything the integrator needs about the hull.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HydroParams {
    pub damping: Damping,
    pub inertia: Inertia,
}

impl HydroParams {
    pub fn nominal() -> Self {
        HydroParams { damping: Damping::NOMINAL, inertia: Inertia::default() }
    }

    pub fn identified() -> Self {
        HydroParams { damping: Damping::IDENTIFIED, inertia: Inertia::default() }
    }

    pub fn validate(&self) -> Result<()> {
        self.damping.validate()?;
        self.inertia.validate()
    }
}

/// Body-frame force and moment.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Wrench {
    pub fx: f64,
    pub fy: f64,
    pub nz: f64,
}

impl Wrench {
    pub const ZERO: Wrench = Wrench { fx: 0.0, fy: 0.0, nz: 0.0 };

    pub fn new(fx: f64, fy: f64, nz: f64) -> Self {
        Wrench { fx, fy, nz }
    }
}

impl Add for Wrench {
    type Output = Wrench;
    fn add(self, rhs: Wrench) -> Wrench {
        Wrench { fx: self.fx + rhs.fx, fy: self.fy + rhs.fy, nz: self.nz + rhs.nz }
    }
}

impl AddAssign for Wrench {
    fn add_assign(&mut self, rhs: Wrench) {
        *self = *self + rhs;
    }
}

impl Neg for Wrench {
    type Output = Wrench;
    fn neg(self) -> Wrench {
        Wrench { fx: -self.fx, fy: -self.fy, nz: -self.nz }
    }
}

/// Hydrodynamic damping force on the body, `-(D_l + D_q(nu)) nu`.
#[inline]
pub fn damping_wrench(u: f64, v: f64, r: f64, d: &Damping) -> Wrench {
    Wrench {
        fx: -(d.xu + d.xuu * u.abs()) * u,
        fy: -(d.yv + d.yvv * v.abs()) * v,
        nz: -(d.nr + d.nrr * r.abs()) * r,
    }
}

/// Monotone piecewise-linear map from a normalised command in `[-1, 1]` to
/// thrust in newtons.
///
/// Knots are strictly increasing in command and non-decreasing in force, and
/// the curve passes through `(0, 0)`. Commands outside the knot span hold the
/// end value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<(f64, f64)>", into = "Vec<(f64, f64)>")]
pub struct ThrusterCurve {
    knots: Vec<(f64, f64)>,
}

impl ThrusterCurve {
    /// Full-ahead thrust of the default curve, per thruster.
    pub const DEFAULT_FORWARD_N: f64 = 25.0;
    /// Full-astern thrust magnitude of the default curve, per thruster.
    pub const DEFAULT_REVERSE_N: f64 = 12.5;

    pub fn new(knots: Vec<(f64, f64)>) -> Result<Self> {
        if knots.len() < 2 {
            return Err(Error::InvalidCurve(format!("need at least 2 knots, got {}", knots.len())));
        }
        for &(c, f) in &knots {
            if !c.is_finite() || !f.is_finite() {
                return Err(Error::InvalidCurve(format!("non-finite knot ({c}, {f})")));
            }
            if !(-1.0..=1.0).contains(&c) {
                return Err(Error::InvalidCurve(format!("command {c} outside [-1, 1]")));
            }
        }
        for pair in knots.windows(2) {
            let ((c0, f0), (c1, f1)) = (pair[0], pair[1]);
            if c1 <= c0 {
                return Err(Error::InvalidCurve(format!("commands not strictly increasing at {c0} -> {c1}")));
            }
            if f1 < f0 {
                return Err(Error::InvalidCurve(format!("force decreases between commands {c0} and {c1}")));
            }
        }
        let curve = ThrusterCurve { knots };
        let at_zero = curve.eval(0.0);
        if at_zero != 0.0 {
            return Err(Error::InvalidCurve(format!("curve(0) must be 0 N, got {at_zero}")));
        }
        Ok(curve)
    }

    /// `(-1, -reverse)`, `(0, 0)`, `(1, forward)`.
    pub fn linear(forward_n: f64, reverse_n: f64) -> Result<Self> {
        Self::new(vec![(-1.0, -reverse_n), (0.0, 0.0), (1.0, forward_n)])
    }

    pub fn knots(&self) -> &[(f64, f64)] {
        &self.knots
    }

    #[inline]
    pub fn eval(&self, command: f64) -> f64 {
        let c = command.clamp(-1.0, 1.0);
        let knots = &self.knots;
        let first = knots[0];
        if c <= first.0 {
            return first.1;
        }
        for pair in knots.windows(2) {
            let ((c0, f0), (c1, f1)) = (pair[0], pair[1]);
            if c <= c1 {
                return f0 + (f1 - f0) * (c - c0) / (c1 - c0);
            }
        }
        knots[knots.len() - 1].1
    }
}

impl Default for ThrusterCurve {
    fn default() -> Self {
        Self::linear(Self::DEFAULT_FORWARD_N, Self::DEFAULT_REVERSE_N).expect("default curve is valid")
    }
}

impl TryFrom<Vec<(f64, f64)>> for ThrusterCurve {
    type Error = Error;
    fn try_from(knots: Vec<(f64, f64)>) -> Result<Self> {
        ThrusterCurve::new(knots)
    }
}

impl From<ThrusterCurve> for Vec<(f64, f64)> {
    fn from(curve: ThrusterCurve) -> Self {
        curve.knots
    }
}

/// Twin-thruster propulsion: one thruster on each hull.
#[derive(Debug, Clone, PartialEq)]
pub struct ThrusterModel {
    pub left: ThrusterCurve,
    pub right: ThrusterCurve,
    /// Lateral distance between the two thrust lines, m.
    pub separation: f64,
    pub scale_left: f64,
    pub scale_right: f64,
}

impl ThrusterModel {
    pub const DEFAULT_SEPARATION: f64 = 0.76;

    pub fn symmetric(curve: ThrusterCurve, separation: f64) -> Result<Self> {
        Self::new(curve.clone(), curve, separation)
    }

    pub fn new(left: ThrusterCurve, right: ThrusterCurve, separation: f64) -> Result<Self> {
        if !(separation.is_finite() && separation > 0.0) {
            return Err(Error::invalid("separation", format!("must be > 0, got {separation}")));
        }
        Ok(ThrusterModel { left, right, separation, scale_left: 1.0, scale_right: 1.0 })
    }

    pub fn with_scales(mut self, scale_left: f64, scale_right: f64) -> Self {
        self.scale_left = scale_left;
        self.scale_right = scale_right;
        self
    }
}

impl Default for ThrusterModel {
    fn default() -> Self {
        Self::symmetric(ThrusterCurve::default(), Self::DEFAULT_SEPARATION).expect("default model is valid")
    }
}

/// Thrust forces of both hulls folded into a body wrench.
#[inline]
pub fn thruster_wrench(cmd_left: f64, cmd_right: f64, model: &ThrusterModel) -> Wrench {
    scaled_thrust([cmd_left, cmd_right], model, [model.scale_left, model.scale_right])
}

/// [`thruster_wrench`] with the model's scales replaced by `scale`.
#[inline(always)]
pub(crate) fn scaled_thrust(command: [f64; 2], model: &ThrusterModel, scale: [f64; 2]) -> Wrench {
    let f_left = scale[0] * model.left.eval(command[0]);
    let f_right = scale[1] * model.right.eval(command[1]);
    Wrench { fx: f_left + f_right, fy: 0.0, nz: (f_right - f_left) * model.separation / 2.0 }
}

/// An offset-plus-sinusoid force field (world frame) and yaw torque.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DisturbanceState {
    pub force_offset: [f64; 2],
    pub force_amp: [f64; 2],
    pub torque_offset: f64,
    pub torque_amp: f64,
    /// rad/s
    pub omega: f64,
    /// rad
    pub phase: f64,
}

impl DisturbanceState {
    pub const NONE: DisturbanceState = DisturbanceState {
        force_offset: [0.0; 2],
        force_amp: [0.0; 2],
        torque_offset: 0.0,
        torque_amp: 0.0,
        omega: 0.0,
        phase: 0.0,
    };
}

/// Disturbance wrench at time `t`, with the world-frame force rotated into the
/// body frame of a vessel heading `psi`.
#[inline]
pub fn disturbance_wrench(t: f64, d: &DisturbanceState, psi: f64) -> Wrench {
    let s = (d.omega * t + d.phase).sin();
    let wx = d.force_offset[0] + d.force_amp[0] * s;
    let wy = d.force_offset[1] + d.force_amp[1] * s;
    let (sin_psi, cos_psi) = psi.sin_cos();
    Wrench {
        fx: cos_psi * wx + sin_psi * wy,
        fy: -sin_psi * wx + cos_psi * wy,
        nz: d.torque_offset + d.torque_amp * s,
    }
}

/// One semi-implicit Euler step. `total` is thrust plus disturbance; damping
/// is evaluated here from the current velocities.
pub fn step(state: &BodyState, total: Wrench, params: &HydroParams, dt: f64) -> Result<BodyState> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::InvalidTimeStep(dt));
    }
    Ok(advance(state, total, &params.damping, params.inertia.inverse_diagonal(), dt))
}

/// [`step`] without the time-step check; `inv_mass` is the inverse inertia
/// diagonal. The batch kernel calls this directly so both paths share one
/// arithmetic sequence.
#[inline(always)]
pub(crate) fn advance(
    s: &BodyState,
    total: Wrench,
    damping: &Damping,
    inv_mass: [f64; 3],
    dt: f64,
) -> BodyState {
    let drag = damping_wrench(s.u, s.v, s.r, damping);
    let u = s.u + inv_mass[0] * (total.fx + drag.fx) * dt;
    let v = s.v + inv_mass[1] * (total.fy + drag.fy) * dt;
    let r = s.r + inv_mass[2] * (total.nz + drag.nz) * dt;
    let (sin_psi, cos_psi) = s.psi.sin_cos();
    BodyState {
        x: s.x + (u * cos_psi - v * sin_psi) * dt,
        y: s.y + (u * sin_psi + v * cos_psi) * dt,
        psi: wrap_angle(s.psi + r * dt),
        u,
        v,
        r,
    }
}

/// Box-hull hydrostatics for the heave equilibrium.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BuoyancyParams {
    /// kg/m³
    pub water_density: f64,
    /// Combined waterplane area of both hulls, m².
    pub waterplane_area: f64,
    /// m
    pub hull_height: f64,
}

impl Default for BuoyancyParams {
    fn default() -> Self {
        BuoyancyParams { water_density: 1000.0, waterplane_area: 0.24, hull_height: 0.32 }
    }
}

impl BuoyancyParams {
    pub fn validate(&self) -> Result<()> {
        for (name, value) in [
            ("water_density", self.water_density),
            ("waterplane_area", self.waterplane_area),
            ("hull_height", self.hull_height),
        ] {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::invalid(name, format!("must be > 0, got {value}")));
            }
        }
        Ok(())
    }
}

/// Buoyancy minus weight at a given draft (N, positive up).
pub fn net_vertical_force(params: &BuoyancyParams, mass: f64, draft: f64) -> f64 {
    params.water_density * params.waterplane_area * draft * GRAVITY - mass * GRAVITY
}

/// Draft at which buoyancy balances weight, `m / (rho A)`.
pub fn equilibrium_draft(params: &BuoyancyParams, mass: f64) -> Result<f64> {
    params.validate()?;
    if !(mass.is_finite() && mass > 0.0) {
        return Err(Error::invalid("mass", format!("must be > 0, got {mass}")));
    }
    let draft = mass / (params.water_density * params.waterplane_area);
    if draft > params.hull_height {
        return Err(Error::Sinks { draft, hull_height: params.hull_height });
    }
    Ok(draft)
}
