use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{config_err, Error, Result};
use crate::nn::Matrix;
use crate::rng;

use super::{Dataset, FeatureKind};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SyntheticMode {
    /// Isotropic Gaussian clusters around class means on a sphere.
    #[default]
    GaussianBlobs,
    /// Binary records: a thresholded Gaussian latent around per-class templates.
    BinaryRecords,
}

impl std::str::FromStr for SyntheticMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian_blobs" => Ok(SyntheticMode::GaussianBlobs),
            "binary_records" => Ok(SyntheticMode::BinaryRecords),
            other => Err(config_err!("unknown synthetic mode `{other}`")),
        }
    }
}

impl SyntheticMode {
    pub fn name(self) -> &'static str {
        match self {
            SyntheticMode::GaussianBlobs => "gaussian_blobs",
            SyntheticMode::BinaryRecords => "binary_records",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub classes: usize,
    pub dim: usize,
    pub per_class: usize,
    pub class_separation: f64,
    pub noise_sigma: f64,
    pub mode: SyntheticMode,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            classes: 20,
            dim: 50,
            per_class: 500,
            class_separation: 2.0,
            noise_sigma: 1.0,
            mode: SyntheticMode::GaussianBlobs,
            seed: 0,
        }
    }
}

fn normal_vec(rng: &mut rng::LabRng, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

/// Deterministic synthetic classification data, class-major order.
///
/// Blobs: `x = μ_c + σ·ε` with `‖μ_c‖ = class_separation`. Records:
/// `x_j = 1[class_separation·m_cj + σ·ε_j > 0]` with `m_c ~ N(0, I)`.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<Dataset> {
    if spec.classes < 2 || spec.dim == 0 || spec.per_class == 0 {
        return Err(config_err!("synthetic spec needs classes >= 2, dim >= 1 and per_class >= 1"));
    }
    if !(spec.class_separation >= 0.0 && spec.class_separation.is_finite()) {
        return Err(config_err!("class separation must be non-negative"));
    }
    if !(spec.noise_sigma > 0.0 && spec.noise_sigma.is_finite()) {
        return Err(config_err!("noise sigma must be positive"));
    }
    let mut center_rng = rng::stream(spec.seed, 0xC3E7);
    let centers: Vec<Vec<f64>> = (0..spec.classes)
        .map(|_| {
            let v = normal_vec(&mut center_rng, spec.dim);
            match spec.mode {
                SyntheticMode::GaussianBlobs => {
                    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
                    v.iter().map(|x| x / norm * spec.class_separation).collect()
                }
                SyntheticMode::BinaryRecords => v.iter().map(|x| x * spec.class_separation).collect(),
            }
        })
        .collect();

    let mut sample_rng = rng::stream(spec.seed, 0x5A3B);
    let n = spec.classes * spec.per_class;
    let mut data = Vec::with_capacity(n * spec.dim);
    let mut labels = Vec::with_capacity(n);
    for (c, center) in centers.iter().enumerate() {
        for _ in 0..spec.per_class {
            for &m in center {
                let e: f64 = StandardNormal.sample(&mut sample_rng);
                let latent = m + spec.noise_sigma * e;
                data.push(match spec.mode {
                    SyntheticMode::GaussianBlobs => latent,
                    SyntheticMode::BinaryRecords => f64::from(u8::from(latent > 0.0)),
                });
            }
            labels.push(c);
        }
    }
    let kind = match spec.mode {
        SyntheticMode::GaussianBlobs => FeatureKind::RealValued,
        SyntheticMode::BinaryRecords => FeatureKind::Binary,
    };
    Dataset::new(
        format!("synthetic-{}", spec.mode.name()),
        Matrix::from_vec(n, spec.dim, data)?,
        labels,
        spec.classes,
        kind,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(mode: SyntheticMode) -> SyntheticSpec {
        SyntheticSpec {
            classes: 20,
            dim: 8,
            per_class: 10,
            mode,
            seed: 9,
            ..SyntheticSpec::default()
        }
    }

    #[test]
    fn deterministic() {
        for mode in [SyntheticMode::GaussianBlobs, SyntheticMode::BinaryRecords] {
            let a = generate_synthetic(&small(mode)).unwrap();
            let b = generate_synthetic(&small(mode)).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn class_counts() {
        let d = generate_synthetic(&small(SyntheticMode::GaussianBlobs)).unwrap();
        assert_eq!(d.len(), 200);
        for c in 0..20 {
            assert_eq!(d.labels.iter().filter(|&&y| y == c).count(), 10);
        }
    }

    #[test]
    fn binary_records_are_binary() {
        let d = generate_synthetic(&small(SyntheticMode::BinaryRecords)).unwrap();
        assert_eq!(d.feature_kind, FeatureKind::Binary);
        assert!(d.features.data().iter().all(|&v| v == 0.0 || v == 1.0));
    }

    #[test]
    fn class_means_sit_on_the_sphere() {
        let spec = SyntheticSpec {
            classes: 3,
            dim: 4,
            per_class: 4000,
            class_separation: 5.0,
            noise_sigma: 0.5,
            mode: SyntheticMode::GaussianBlobs,
            seed: 1,
        };
        let d = generate_synthetic(&spec).unwrap();
        for c in 0..3 {
            let rows: Vec<&[f64]> = (0..d.len()).filter(|&i| d.labels[i] == c).map(|i| d.features.row(i)).collect();
            let mean: Vec<f64> = (0..4).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / rows.len() as f64).collect();
            let norm = mean.iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!((norm - 5.0).abs() < 0.05, "class {c}: {norm}");
        }
    }

    #[test]
    fn rejects_bad_specs() {
        let mut s = small(SyntheticMode::GaussianBlobs);
        s.noise_sigma = 0.0;
        assert!(generate_synthetic(&s).is_err());
        let mut s = small(SyntheticMode::GaussianBlobs);
        s.classes = 1;
        assert!(generate_synthetic(&s).is_err());
    }
}
