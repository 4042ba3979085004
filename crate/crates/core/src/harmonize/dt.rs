use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::geometry::SpdMatrix;
use crate::linalg::Matrix;
use crate::montage::{canonical_order, normalize_name};

/// Covariance embedded in the channel union, rows ordered by `union_names`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpandedCov {
    pub matrix: SpdMatrix,
    pub union_names: Vec<String>,
}

/// Union of several channel lists in canonical order.
pub fn union_channels<S: AsRef<[String]>>(lists: &[S]) -> Vec<String> {
    let all: Vec<String> = lists.iter().flat_map(|l| l.as_ref().iter().cloned()).collect();
    canonical_order(&all)
}

/// Embeds `c` as `[[C, 0], [0, I]]` and permutes rows and columns into
/// union order.
pub fn dt_expand(c: &SpdMatrix, names: &[String], union_names: &[String]) -> Result<ExpandedCov> {
    if c.dim() != names.len() {
        return Err(Error::DimMismatch {
            expected: names.len(),
            found: c.dim(),
        });
    }
    let keys: Vec<String> = union_names.iter().map(|n| normalize_name(n)).collect();
    let mut slot = Vec::with_capacity(names.len());
    for n in names {
        let key = normalize_name(n);
        let pos = keys
            .iter()
            .position(|k| *k == key)
            .ok_or_else(|| Error::UnknownChannel(n.clone()))?;
        slot.push(pos);
    }
    let p = union_names.len();
    let mut out = Matrix::identity(p);
    let m = c.matrix();
    for (i, &si) in slot.iter().enumerate() {
        for (j, &sj) in slot.iter().enumerate() {
            out[(si, sj)] = m[(i, j)];
        }
    }
    Ok(ExpandedCov {
        matrix: SpdMatrix::from_trusted(out),
        union_names: union_names.to_vec(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::riemannian_distance;
    use crate::rng::SimRng;
    use alloc::string::ToString;
    use alloc::vec;

    fn random_spd(rng: &mut SimRng, n: usize) -> SpdMatrix {
        let a = Matrix::from_fn(n, n + 3, |_, _| rng.normal());
        SpdMatrix::new(a.matmul_t(&a).scale(1.0 / (n + 3) as f64).symmetrized()).unwrap()
    }

    fn s(v: &[&str]) -> Vec<String> {
        v.iter().map(|x| x.to_string()).collect()
    }

    #[test]
    fn permutation_only_when_names_equal_union() {
        let mut rng = SimRng::seed_from(5);
        let c = random_spd(&mut rng, 3);
        let e = dt_expand(&c, &s(&["C4", "C3", "Cz"]), &s(&["C3", "Cz", "C4"])).unwrap();
        let m = e.matrix.matrix();
        assert_eq!(m[(0, 0)], c.matrix()[(1, 1)]);
        assert_eq!(m[(2, 1)], c.matrix()[(0, 2)]);
        assert_eq!(e.matrix.dim(), 3);
    }

    #[test]
    fn padding_and_unknown() {
        let c = SpdMatrix::from_diag(&[2.0, 3.0]).unwrap();
        let e = dt_expand(&c, &s(&["Cz", "T3"]), &s(&["C3", "Cz", "T7"])).unwrap();
        assert_eq!(e.matrix.matrix().diag(), vec![1.0, 2.0, 3.0]);
        assert_eq!(
            dt_expand(&c, &s(&["Cz", "Oz"]), &s(&["C3", "Cz"])),
            Err(Error::UnknownChannel("Oz".into()))
        );
    }

    #[test]
    fn isometry_on_random_pairs() {
        let mut rng = SimRng::seed_from(6);
        let names = s(&["Pz", "C3", "Fz", "O1"]);
        let union = s(&["Fz", "C3", "Cz", "C4", "Pz", "O1", "O2"]);
        for _ in 0..100 {
            let a = random_spd(&mut rng, 4);
            let b = random_spd(&mut rng, 4);
            let d = riemannian_distance(&a, &b).unwrap();
            let ea = dt_expand(&a, &names, &union).unwrap();
            let eb = dt_expand(&b, &names, &union).unwrap();
            let de = riemannian_distance(&ea.matrix, &eb.matrix).unwrap();
            assert!((d - de).abs() <= 1e-8 * d.max(1.0));
        }
    }
}
