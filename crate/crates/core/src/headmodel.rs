//! Single-sphere EEG forward model.
//!
//! Potentials of current dipoles inside a homogeneous conducting sphere,
//! evaluated on the sphere surface by the Legendre expansion of the
//! monopole Green's function with an insulating boundary:
//!
//! ```text
//! V(r) = 1/(4πσ) Σₙ (2n+1)/n · ρⁿ⁻¹/Rⁿ⁺¹ · [ n Pₙ(c) (q·ρ̂) + Pₙ'(c) (q·r̂ − c q·ρ̂) ]
//! ```
//!
//! with `ρ` the dipole position, `q` its moment and `c = ρ̂·r̂`. Leadfield
//! columns are average-referenced.

use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::montage::{dot3, norm3, project_unit_sphere, scale3, Montage, HEAD_RADIUS};
use crate::special::legendre_with_derivative;

/// Default tissue conductivity (S/m).
pub const CONDUCTIVITY: f64 = 0.33;
/// Default truncation degree of the Legendre series.
pub const SERIES_DEGREE: usize = 60;
/// Default number of grid locations.
pub const GRID_LOCATIONS: usize = 642;
/// Default source depth as a fraction of the head radius.
pub const RADIUS_FRACTION: f64 = 0.7;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Dipole {
    /// Position in meters.
    pub pos: [f64; 3],
    /// Unit orientation.
    pub ori: [f64; 3],
}

/// Set of fixed-orientation dipole components.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceSpace {
    pub dipoles: Vec<Dipole>,
    pub radius_fraction: f64,
    pub head_radius: f64,
}

impl SourceSpace {
    pub fn new(dipoles: Vec<Dipole>, radius_fraction: f64, head_radius: f64) -> Result<Self> {
        for d in &dipoles {
            let r = norm3(&d.pos);
            if !(r < head_radius) {
                return Err(Error::DipoleOutsideSphere {
                    radius: r,
                    sphere: head_radius,
                });
            }
            if (norm3(&d.ori) - 1.0).abs() > 1e-12 {
                return Err(Error::InvalidArgument("dipole orientation must be unit norm".into()));
            }
        }
        Ok(Self {
            dipoles,
            radius_fraction,
            head_radius,
        })
    }

    pub fn n_components(&self) -> usize {
        self.dipoles.len()
    }

    /// FNV-1a hash of positions and orientations, used to check that two
    /// leadfields share a source space.
    pub fn fingerprint(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for d in &self.dipoles {
            for v in d.pos.iter().chain(d.ori.iter()) {
                for b in v.to_bits().to_le_bytes() {
                    h ^= b as u64;
                    h = h.wrapping_mul(0x0000_0100_0000_01b3);
                }
            }
        }
        h
    }
}

/// `n` quasi-uniform locations on the sphere of radius
/// `radius_fraction · HEAD_RADIUS`, each carrying three orthogonal unit
/// dipoles along the head axes.
pub fn fibonacci_source_grid(n: usize, radius_fraction: f64) -> Result<SourceSpace> {
    fibonacci_source_grid_with_radius(n, radius_fraction, HEAD_RADIUS)
}

pub fn fibonacci_source_grid_with_radius(
    n: usize,
    radius_fraction: f64,
    head_radius: f64,
) -> Result<SourceSpace> {
    if n < 4 {
        return Err(Error::InvalidArgument("source grid needs at least 4 locations".into()));
    }
    if !(radius_fraction > 0.0 && radius_fraction < 1.0) {
        return Err(Error::InvalidArgument("radius fraction must lie in (0, 1)".into()));
    }
    let radius = radius_fraction * head_radius;
    let golden = core::f64::consts::PI * (3.0 - libm::sqrt(5.0));
    let axes = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    let mut dipoles = Vec::with_capacity(3 * n);
    for i in 0..n {
        let z = 1.0 - (2 * i + 1) as f64 / n as f64;
        let r = libm::sqrt(1.0 - z * z);
        let phi = golden * i as f64;
        let pos = [
            radius * r * libm::cos(phi),
            radius * r * libm::sin(phi),
            radius * z,
        ];
        for ori in axes {
            dipoles.push(Dipole { pos, ori });
        }
    }
    SourceSpace::new(dipoles, radius_fraction, head_radius)
}

/// Conductor parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphereModel {
    pub conductivity: f64,
    pub degree: usize,
}

impl Default for SphereModel {
    fn default() -> Self {
        Self {
            conductivity: CONDUCTIVITY,
            degree: SERIES_DEGREE,
        }
    }
}

impl SphereModel {
    /// Surface potential at unit direction `electrode` of a dipole with
    /// position `pos` and moment `moment`, sphere radius `radius`.
    pub fn potential(&self, pos: &[f64; 3], moment: &[f64; 3], electrode: &[f64; 3], radius: f64) -> f64 {
        let k = 1.0 / (4.0 * core::f64::consts::PI * self.conductivity);
        let rho = norm3(pos);
        let q_r = dot3(moment, electrode);
        if rho == 0.0 {
            // Only the n = 1 term survives at the centre.
            return k * 3.0 * q_r / (radius * radius);
        }
        let rho_hat = scale3(pos, 1.0 / rho);
        let c = dot3(&rho_hat, electrode).clamp(-1.0, 1.0);
        let q_rho = dot3(moment, &rho_hat);
        let (p, dp) = legendre_with_derivative(c, self.degree);
        let ratio = rho / radius;
        let mut scale = 1.0 / (radius * radius);
        let mut sum = 0.0;
        for n in 1..=self.degree {
            let nf = n as f64;
            let term = nf * p[n] * q_rho + dp[n] * (q_r - c * q_rho);
            sum += (2.0 * nf + 1.0) / nf * scale * term;
            scale *= ratio;
        }
        k * sum
    }
}

/// Average-referenced gain matrix, electrodes × dipole components.
#[derive(Debug, Clone, PartialEq)]
pub struct Leadfield {
    pub matrix: Matrix,
    pub channels: Vec<String>,
    pub source_fingerprint: u64,
}

pub fn leadfield(src: &SourceSpace, m: &Montage) -> Result<Leadfield> {
    leadfield_with(src, m, &SphereModel::default())
}

pub fn leadfield_with(src: &SourceSpace, m: &Montage, model: &SphereModel) -> Result<Leadfield> {
    let radius = m.head_radius;
    for d in &src.dipoles {
        let r = norm3(&d.pos);
        if !(r < radius) {
            return Err(Error::DipoleOutsideSphere {
                radius: r,
                sphere: radius,
            });
        }
    }
    let dirs = project_unit_sphere(m)?;
    let n_src = src.n_components();
    let mut g = Matrix::zeros(dirs.len(), n_src);
    for (i, e) in dirs.iter().enumerate() {
        for (j, d) in src.dipoles.iter().enumerate() {
            g[(i, j)] = model.potential(&d.pos, &d.ori, e, radius);
        }
    }
    average_reference_columns(&mut g);
    Ok(Leadfield {
        matrix: g,
        channels: m.names(),
        source_fingerprint: src.fingerprint(),
    })
}

/// Removes the across-electrode mean from every column.
pub fn average_reference_columns(g: &mut Matrix) {
    let rows = g.rows();
    if rows == 0 {
        return;
    }
    for j in 0..g.cols() {
        let mean = (0..rows).map(|i| g[(i, j)]).sum::<f64>() / rows as f64;
        for i in 0..rows {
            g[(i, j)] -= mean;
        }
    }
}
