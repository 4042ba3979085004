//! Electrode montages, analytic 10-20 / 10-10 / 10-5 coordinates and
//! channel matching across datasets.
//!
//! Head frame: `+x` right, `+y` nasion, `+z` vertex. Positions are generated
//! on an ideal sphere. A midline electrode of row `r` sits at signed polar
//! angle `αᵣ` from the vertex (positive towards the nasion, 18° per 10-10
//! row, 9° per 10-5 half-row). Each row ends on the 72° ring at azimuth
//! `90° − αᵣ` from the front, and lateral electrodes are spaced evenly along
//! the great circle from the midline point to that ring point.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Default head radius in meters.
pub const HEAD_RADIUS: f64 = 0.095;

/// Channels every dataset is interpolated to.
pub const TEMPLATE_17: [&str; 17] = [
    "Fp1", "Fp2", "F7", "F3", "Fz", "F4", "F8", "C3", "Cz", "C4", "P3", "Pz", "P4", "T3", "T4",
    "T5", "T6",
];

/// Old (10-20) names and their 10-10 equivalents.
const ALIASES: [(&str, &str); 4] = [("T3", "T7"), ("T4", "T8"), ("T5", "P7"), ("T6", "P8")];

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Electrode {
    pub name: String,
    /// Position in meters, head frame.
    pub pos: [f64; 3],
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Montage {
    pub channels: Vec<Electrode>,
    pub head_radius: f64,
}

/// Canonical key of a channel name: case-folded, with old temporal names
/// mapped to their 10-10 equivalents. Idempotent.
pub fn normalize_name(name: &str) -> String {
    let trimmed = name.trim();
    let key = trimmed.to_ascii_uppercase();
    for (old, new) in ALIASES {
        if key == old.to_ascii_uppercase() {
            return new.to_ascii_uppercase();
        }
    }
    key
}

impl Montage {
    /// Validates uniqueness (after alias normalization) and that every
    /// electrode lies within 1.25 head radii of the origin.
    pub fn new(channels: Vec<Electrode>, head_radius: f64) -> Result<Self> {
        if !(head_radius > 0.0) {
            return Err(Error::InvalidArgument("head radius must be positive".into()));
        }
        let mut seen: Vec<String> = Vec::with_capacity(channels.len());
        for ch in &channels {
            let key = normalize_name(&ch.name);
            if seen.contains(&key) {
                return Err(Error::InvalidArgument(alloc::format!(
                    "duplicate channel {}",
                    ch.name
                )));
            }
            seen.push(key);
            if !ch.pos.iter().all(|v| v.is_finite()) || norm3(&ch.pos) > 1.25 * head_radius {
                return Err(Error::InvalidArgument(alloc::format!(
                    "channel {} lies outside the head",
                    ch.name
                )));
            }
        }
        Ok(Self {
            channels,
            head_radius,
        })
    }

    /// Montage with canonical positions for the given names.
    pub fn from_names<S: AsRef<str>>(names: &[S]) -> Result<Self> {
        let channels = names
            .iter()
            .map(|n| {
                let dir = standard_direction(n.as_ref())?;
                Ok(Electrode {
                    name: n.as_ref().to_string(),
                    pos: scale3(&dir, HEAD_RADIUS),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(channels, HEAD_RADIUS)
    }

    pub fn len(&self) -> usize {
        self.channels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.channels.is_empty()
    }

    pub fn names(&self) -> Vec<String> {
        self.channels.iter().map(|c| c.name.clone()).collect()
    }

    pub fn position(&self, name: &str) -> Option<[f64; 3]> {
        self.index_of(name).map(|i| self.channels[i].pos)
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        let key = normalize_name(name);
        self.channels
            .iter()
            .position(|c| normalize_name(&c.name) == key)
    }

    /// Sub-montage with the given channels, in the given order.
    pub fn select<S: AsRef<str>>(&self, names: &[S]) -> Result<Montage> {
        let channels = names
            .iter()
            .map(|n| {
                self.index_of(n.as_ref())
                    .map(|i| self.channels[i].clone())
                    .ok_or_else(|| Error::UnknownChannel(n.as_ref().to_string()))
            })
            .collect::<Result<Vec<_>>>()?;
        Montage::new(channels, self.head_radius)
    }
}

/// The fixed 17-channel interpolation template.
pub fn template_17() -> Montage {
    Montage::from_names(&TEMPLATE_17).expect("template names are canonical")
}

/// Unit-norm directions of every electrode.
pub fn project_unit_sphere(m: &Montage) -> Result<Vec<[f64; 3]>> {
    m.channels
        .iter()
        .map(|c| {
            let n = norm3(&c.pos);
            if n == 0.0 {
                return Err(Error::ZeroPosition {
                    channel: c.name.clone(),
                });
            }
            Ok(scale3(&c.pos, 1.0 / n))
        })
        .collect()
}

/// Result of pairing two montages by normalized name.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChannelMatch {
    /// `(index in a, index in b)`, in the channel order of `a`.
    pub pairs: Vec<(usize, usize)>,
    pub unmatched_source: Vec<usize>,
    pub unmatched_target: Vec<usize>,
}

pub fn match_channels(a: &Montage, b: &Montage) -> ChannelMatch {
    let b_keys: Vec<String> = b.channels.iter().map(|c| normalize_name(&c.name)).collect();
    let mut pairs = Vec::new();
    let mut unmatched_source = Vec::new();
    let mut used = alloc::vec![false; b.len()];
    for (i, ch) in a.channels.iter().enumerate() {
        let key = normalize_name(&ch.name);
        match b_keys.iter().position(|k| *k == key) {
            Some(j) => {
                pairs.push((i, j));
                used[j] = true;
            }
            None => unmatched_source.push(i),
        }
    }
    let unmatched_target = (0..b.len()).filter(|&j| !used[j]).collect();
    ChannelMatch {
        pairs,
        unmatched_source,
        unmatched_target,
    }
}

/// Sorts names with template channels first (template order), then the rest
/// alphabetically by normalized name. Duplicates (after normalization) are
/// removed, keeping the first spelling seen.
pub fn canonical_order(names: &[String]) -> Vec<String> {
    let mut uniq: Vec<String> = Vec::new();
    for n in names {
        if !uniq.iter().any(|u| normalize_name(u) == normalize_name(n)) {
            uniq.push(n.clone());
        }
    }
    let rank = |n: &String| {
        let key = normalize_name(n);
        TEMPLATE_17
            .iter()
            .position(|t| normalize_name(t) == key)
            .unwrap_or(usize::MAX)
    };
    uniq.sort_by(|a, b| {
        rank(a)
            .cmp(&rank(b))
            .then_with(|| normalize_name(a).cmp(&normalize_name(b)))
    });
    uniq
}

// Row prefix → signed midline polar angle (degrees), lateral steps to the ring.
const ROWS: [(&str, f64, f64); 22] = [
    ("FP", 72.0, 1.0),
    ("AFP", 63.0, 4.0),
    ("AF", 54.0, 4.0),
    ("AFF", 45.0, 4.0),
    ("F", 36.0, 4.0),
    ("FFC", 27.0, 4.0),
    ("FC", 18.0, 4.0),
    ("FT", 18.0, 4.0),
    ("FCC", 9.0, 4.0),
    ("C", 0.0, 4.0),
    ("T", 0.0, 4.0),
    ("CCP", -9.0, 4.0),
    ("CP", -18.0, 4.0),
    ("TP", -18.0, 4.0),
    ("CPP", -27.0, 4.0),
    ("P", -36.0, 4.0),
    ("PPO", -45.0, 4.0),
    ("PO", -54.0, 4.0),
    ("POO", -63.0, 4.0),
    ("O", -72.0, 1.0),
    ("I", -90.0, 1.0),
    ("CB", -90.0, 1.0),
];

const RING_POLAR: f64 = 72.0;

/// Unit direction of a standard 10-20 / 10-10 / 10-5 electrode name
/// (`h` suffix for half positions; old temporal names accepted).
pub fn standard_direction(name: &str) -> Result<[f64; 3]> {
    let key = normalize_name(name);
    let unknown = || Error::UnknownChannel(name.to_string());
    let (prefix, lateral, side) = if let Some(p) = key.strip_suffix('Z') {
        (p, 0.0, 0.0)
    } else {
        let (body, half) = match key.strip_suffix('H') {
            Some(b) => (b, true),
            None => (key.as_str(), false),
        };
        let split = body
            .find(|c: char| c.is_ascii_digit())
            .ok_or_else(unknown)?;
        let (p, num) = body.split_at(split);
        let n: u32 = num.parse().map_err(|_| unknown())?;
        if n == 0 || n > 10 {
            return Err(unknown());
        }
        let mut lat = ((n + 1) / 2) as f64;
        if half {
            lat -= 0.5;
        }
        let side = if n % 2 == 1 { -1.0 } else { 1.0 };
        (p, lat, side)
    };
    let &(_, alpha, steps) = ROWS
        .iter()
        .find(|(p, _, _)| *p == prefix)
        .ok_or_else(unknown)?;
    let deg = core::f64::consts::PI / 180.0;
    let mid = [0.0, libm::sin(alpha * deg), libm::cos(alpha * deg)];
    if lateral == 0.0 {
        return Ok(mid);
    }
    let (ring_polar, azimuth) = if alpha.abs() >= 90.0 {
        (90.0, 162.0)
    } else {
        (RING_POLAR, 90.0 - alpha)
    };
    let ring = [
        side * libm::sin(ring_polar * deg) * libm::sin(azimuth * deg),
        libm::sin(ring_polar * deg) * libm::cos(azimuth * deg),
        libm::cos(ring_polar * deg),
    ];
    Ok(slerp(&mid, &ring, lateral / steps))
}

/// High-density 10-5 style name set: every row between AFp and POO with
/// full and half lateral positions up to two steps below the ring, plus the
/// Fp, O and I midline rows.
pub fn ten_five_names() -> Vec<String> {
    let mut names = Vec::new();
    names.extend(["Fp1", "Fpz", "Fp2"].map(String::from));
    for row in [
        "AFp", "AF", "AFF", "F", "FFC", "FC", "FCC", "C", "CCP", "CP", "CPP", "P", "PPO", "PO", "POO",
    ] {
        names.push(alloc::format!("{row}z"));
        for n in 1..=10 {
            names.push(alloc::format!("{row}{n}"));
            if n <= 8 {
                names.push(alloc::format!("{row}{n}h"));
            }
        }
    }
    names.extend(["O1", "Oz", "O2", "Iz"].map(String::from));
    names
}

fn slerp(a: &[f64; 3], b: &[f64; 3], t: f64) -> [f64; 3] {
    let cos = (a[0] * b[0] + a[1] * b[1] + a[2] * b[2]).clamp(-1.0, 1.0);
    let omega = libm::acos(cos);
    let so = libm::sin(omega);
    let wa = libm::sin((1.0 - t) * omega) / so;
    let wb = libm::sin(t * omega) / so;
    let v = [
        wa * a[0] + wb * b[0],
        wa * a[1] + wb * b[1],
        wa * a[2] + wb * b[2],
    ];
    scale3(&v, 1.0 / norm3(&v))
}

#[inline]
pub(crate) fn norm3(v: &[f64; 3]) -> f64 {
    libm::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2])
}

#[inline]
pub(crate) fn scale3(v: &[f64; 3], s: f64) -> [f64; 3] {
    [v[0] * s, v[1] * s, v[2] * s]
}

#[inline]
pub(crate) fn dot3(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}
