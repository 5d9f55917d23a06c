//! JSON helpers: complex entries are written as `[re, im]` pairs and matrices
//! as lists of rows.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

fn pair(z: &Complex64) -> [f64; 2] {
    [z.re, z.im]
}

pub mod cvec {
    use super::*;

    pub fn serialize<S: Serializer>(v: &DVector<Complex64>, s: S) -> Result<S::Ok, S::Error> {
        v.iter().map(pair).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DVector<Complex64>, D::Error> {
        let raw = Vec::<[f64; 2]>::deserialize(d)?;
        Ok(DVector::from_iterator(
            raw.len(),
            raw.into_iter().map(|[re, im]| Complex64::new(re, im)),
        ))
    }
}

pub mod cvec_list {
    use super::*;

    #[derive(Serialize, Deserialize)]
    struct Wrapped(#[serde(with = "super::cvec")] DVector<Complex64>);

    pub fn serialize<S: Serializer>(v: &[DVector<Complex64>], s: S) -> Result<S::Ok, S::Error> {
        v.iter()
            .map(|x| Wrapped(x.clone()))
            .collect::<Vec<_>>()
            .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<DVector<Complex64>>, D::Error> {
        Ok(Vec::<Wrapped>::deserialize(d)?.into_iter().map(|w| w.0).collect())
    }
}

pub mod cmat {
    use super::*;

    pub fn serialize<S: Serializer>(m: &DMatrix<Complex64>, s: S) -> Result<S::Ok, S::Error> {
        (0..m.nrows())
            .map(|r| m.row(r).iter().map(pair).collect::<Vec<_>>())
            .collect::<Vec<_>>()
            .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DMatrix<Complex64>, D::Error> {
        let rows = Vec::<Vec<[f64; 2]>>::deserialize(d)?;
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != ncols) {
            return Err(D::Error::custom("ragged complex matrix"));
        }
        Ok(DMatrix::from_fn(nrows, ncols, |r, c| {
            let [re, im] = rows[r][c];
            Complex64::new(re, im)
        }))
    }
}

/// `f64` where positive infinity is written as `null`.
pub mod unbounded {
    use super::*;

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_some(v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}
