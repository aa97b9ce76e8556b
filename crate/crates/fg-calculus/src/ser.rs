//! Serde adapters: complex numbers serialize as `{"re": .., "im": ..}`
//! objects so report schemas stay explicit and stable.

use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

#[derive(Serialize, Deserialize)]
struct CxRepr {
    re: f64,
    im: f64,
}

/// Use with `#[serde(with = "crate::ser::c64")]` on `Complex64` fields.
pub mod c64 {
    use super::*;

    pub fn serialize<S: Serializer>(v: &Complex64, s: S) -> Result<S::Ok, S::Error> {
        CxRepr { re: v.re, im: v.im }.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Complex64, D::Error> {
        let r = CxRepr::deserialize(d)?;
        Ok(Complex64::new(r.re, r.im))
    }
}

/// Use with `#[serde(with = "crate::ser::c64_vec")]` on `Vec<Complex64>` fields.
pub mod c64_vec {
    use super::*;

    pub fn serialize<S: Serializer>(v: &[Complex64], s: S) -> Result<S::Ok, S::Error> {
        let repr: Vec<CxRepr> = v.iter().map(|z| CxRepr { re: z.re, im: z.im }).collect();
        repr.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Complex64>, D::Error> {
        let repr: Vec<CxRepr> = Vec::deserialize(d)?;
        Ok(repr.into_iter().map(|r| Complex64::new(r.re, r.im)).collect())
    }
}

/// Use with `#[serde(with = "crate::ser::c64_mat")]` on `Vec<Vec<Complex64>>` fields.
pub mod c64_mat {
    use super::*;

    pub fn serialize<S: Serializer>(v: &[Vec<Complex64>], s: S) -> Result<S::Ok, S::Error> {
        let repr: Vec<Vec<CxRepr>> = v
            .iter()
            .map(|row| row.iter().map(|z| CxRepr { re: z.re, im: z.im }).collect())
            .collect();
        repr.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Vec<Complex64>>, D::Error> {
        let repr: Vec<Vec<CxRepr>> = Vec::deserialize(d)?;
        Ok(repr
            .into_iter()
            .map(|row| row.into_iter().map(|r| Complex64::new(r.re, r.im)).collect())
            .collect())
    }
}

/// Use with `#[serde(with = "crate::ser::c64_map")]` on
/// `BTreeMap<String, Complex64>` fields (key order is the map's, so stable).
pub mod c64_map {
    use super::*;
    use std::collections::BTreeMap;

    pub fn serialize<S: Serializer>(
        v: &BTreeMap<String, Complex64>,
        s: S,
    ) -> Result<S::Ok, S::Error> {
        let repr: BTreeMap<&String, CxRepr> = v
            .iter()
            .map(|(k, z)| (k, CxRepr { re: z.re, im: z.im }))
            .collect();
        repr.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        d: D,
    ) -> Result<BTreeMap<String, Complex64>, D::Error> {
        let repr: BTreeMap<String, CxRepr> = BTreeMap::deserialize(d)?;
        Ok(repr
            .into_iter()
            .map(|(k, r)| (k, Complex64::new(r.re, r.im)))
            .collect())
    }
}

/// Use with `#[serde(with = "crate::ser::c64_opt_vec")]` on
/// `Vec<Option<Complex64>>` fields (skipped entries serialize as null).
pub mod c64_opt_vec {
    use super::*;

    pub fn serialize<S: Serializer>(v: &[Option<Complex64>], s: S) -> Result<S::Ok, S::Error> {
        let repr: Vec<Option<CxRepr>> = v
            .iter()
            .map(|o| o.map(|z| CxRepr { re: z.re, im: z.im }))
            .collect();
        repr.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        d: D,
    ) -> Result<Vec<Option<Complex64>>, D::Error> {
        let repr: Vec<Option<CxRepr>> = Vec::deserialize(d)?;
        Ok(repr
            .into_iter()
            .map(|o| o.map(|r| Complex64::new(r.re, r.im)))
            .collect())
    }
}
