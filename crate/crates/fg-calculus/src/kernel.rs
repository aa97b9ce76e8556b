//! Candidate (f,g) pairs: the built-in family, membership checking against
//! the defining three-term identity
//! f(x,a) g(b,c) + f(x,b) g(c,a) + f(x,c) g(a,b) = 0,
//! and antisymmetry diagnostics for g.

use crate::dd::DdC;
use crate::error::{FgError, Result};
use crate::qcore::{theta, QBase};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

pub const PAIR_NAMES: &[&str] = &["one-diff", "diff-diff", "onexy-diff", "bibasic", "theta"];

#[derive(Clone, Debug)]
enum PairKind {
    /// f = 1, g = x - y.
    OneDiff,
    /// f = x - y, g = x - y.
    DiffDiff,
    /// f = 1 - xy, g = x - y.
    OnexyDiff,
    /// f = (1 - a x y)(1 - b x / y), g = (x - y)(1 - b / (a x y)).
    Bibasic { a: Complex64, b: Complex64 },
    /// f = g = y theta(x y) theta(x / y) under a fixed base.
    Theta { base: QBase },
    /// Deliberately broken negative control: f = 1 + x y^2, g = x - y.
    Broken,
}

/// A named two-variable function pair (f, g) with bound parameters.
#[derive(Clone, Debug)]
pub struct FGPair {
    name: &'static str,
    kind: PairKind,
}

/// Optional parameters consumed by [`FGPair::by_name`].
#[derive(Clone, Copy, Debug, Default)]
pub struct PairParams {
    pub a: Option<Complex64>,
    pub b: Option<Complex64>,
    pub base: Option<QBase>,
}

impl FGPair {
    pub fn one_diff() -> FGPair {
        FGPair {
            name: "one-diff",
            kind: PairKind::OneDiff,
        }
    }

    pub fn diff_diff() -> FGPair {
        FGPair {
            name: "diff-diff",
            kind: PairKind::DiffDiff,
        }
    }

    pub fn onexy_diff() -> FGPair {
        FGPair {
            name: "onexy-diff",
            kind: PairKind::OnexyDiff,
        }
    }

    pub fn bibasic(a: Complex64, b: Complex64) -> Result<FGPair> {
        if a.norm() == 0.0 {
            return Err(FgError::Invalid(
                "bibasic pair needs a != 0 (g divides by a x y)".to_string(),
            ));
        }
        Ok(FGPair {
            name: "bibasic",
            kind: PairKind::Bibasic { a, b },
        })
    }

    pub fn theta_pair(base: QBase) -> FGPair {
        FGPair {
            name: "theta",
            kind: PairKind::Theta { base },
        }
    }

    /// The negative control violating the three-term identity.
    pub fn broken() -> FGPair {
        FGPair {
            name: "broken",
            kind: PairKind::Broken,
        }
    }

    /// Look a pair up by its public name, binding parameters as needed.
    pub fn by_name(name: &str, params: &PairParams) -> Result<FGPair> {
        match name {
            "one-diff" => Ok(Self::one_diff()),
            "diff-diff" => Ok(Self::diff_diff()),
            "onexy-diff" => Ok(Self::onexy_diff()),
            "bibasic" => {
                let a = params
                    .a
                    .ok_or_else(|| FgError::MissingParameter("a (bibasic pair)".to_string()))?;
                let b = params
                    .b
                    .ok_or_else(|| FgError::MissingParameter("b (bibasic pair)".to_string()))?;
                Self::bibasic(a, b)
            }
            "theta" => {
                let base = params
                    .base
                    .ok_or_else(|| FgError::MissingParameter("q (theta pair base)".to_string()))?;
                Ok(Self::theta_pair(base))
            }
            "broken" => Ok(Self::broken()),
            other => Err(FgError::UnknownName {
                name: other.to_string(),
                valid: format!("{}, broken", PAIR_NAMES.join(", ")),
            }),
        }
    }

    pub fn name(&self) -> &'static str {
        self.name
    }

    /// True when g(x,y) = -g(y,x) holds pointwise for this pair. Every
    /// built-in g satisfies it: the algebraic pairs carry an explicit x - y
    /// factor, and the theta pair inherits it from the inversion identity
    /// theta(1/z) = -z^{-1} theta(z) applied to the theta(x/y) factor.
    /// Membership in the kernel still rests on the residual check, which is
    /// the authoritative criterion; this flag is informative.
    pub fn pointwise_antisymmetric(&self) -> bool {
        true
    }

    pub fn f(&self, x: Complex64, y: Complex64) -> Result<Complex64> {
        let one = Complex64::new(1.0, 0.0);
        match &self.kind {
            PairKind::OneDiff => Ok(one),
            PairKind::DiffDiff => Ok(x - y),
            PairKind::OnexyDiff => Ok(one - x * y),
            PairKind::Bibasic { a, b } => {
                if y.norm() == 0.0 {
                    return Err(FgError::Domain(
                        "bibasic f divides by y; y = 0 is a pole".to_string(),
                    ));
                }
                Ok((one - a * x * y) * (one - b * x / y))
            }
            PairKind::Theta { base } => theta_kernel(x, y, base),
            PairKind::Broken => Ok(one + x * y * y),
        }
    }

    pub fn g(&self, x: Complex64, y: Complex64) -> Result<Complex64> {
        let one = Complex64::new(1.0, 0.0);
        match &self.kind {
            PairKind::OneDiff | PairKind::DiffDiff | PairKind::OnexyDiff | PairKind::Broken => {
                Ok(x - y)
            }
            PairKind::Bibasic { a, b } => {
                let axy = a * x * y;
                if axy.norm() == 0.0 {
                    return Err(FgError::Domain(
                        "bibasic g divides by a x y; x = 0 or y = 0 is a pole".to_string(),
                    ));
                }
                Ok((x - y) * (one - b / axy))
            }
            PairKind::Theta { base } => theta_kernel(x, y, base),
        }
    }

    /// f in extended precision. Algebraic pairs evaluate exactly in dd; the
    /// theta pair promotes its f64 value (its own product truncation already
    /// dominates, and every tolerance involving it is scaled accordingly).
    pub(crate) fn f_dd(&self, x: DdC, y: DdC) -> Result<DdC> {
        match &self.kind {
            PairKind::OneDiff => Ok(DdC::ONE),
            PairKind::DiffDiff => Ok(x - y),
            PairKind::OnexyDiff => Ok(DdC::ONE - x * y),
            PairKind::Bibasic { a, b } => {
                if y.abs_est() == 0.0 {
                    return Err(FgError::Domain(
                        "bibasic f divides by y; y = 0 is a pole".to_string(),
                    ));
                }
                let ad = DdC::from_c64(*a);
                let bd = DdC::from_c64(*b);
                Ok((DdC::ONE - ad * x * y) * (DdC::ONE - bd * x / y))
            }
            PairKind::Theta { .. } => Ok(DdC::from_c64(self.f(x.to_c64(), y.to_c64())?)),
            PairKind::Broken => Ok(DdC::ONE + x * y * y),
        }
    }

    /// g in extended precision; see [`FGPair::f_dd`].
    pub(crate) fn g_dd(&self, x: DdC, y: DdC) -> Result<DdC> {
        match &self.kind {
            PairKind::OneDiff | PairKind::DiffDiff | PairKind::OnexyDiff | PairKind::Broken => {
                Ok(x - y)
            }
            PairKind::Bibasic { a, b } => {
                let ad = DdC::from_c64(*a);
                let bd = DdC::from_c64(*b);
                let axy = ad * x * y;
                if axy.abs_est() == 0.0 {
                    return Err(FgError::Domain(
                        "bibasic g divides by a x y; x = 0 or y = 0 is a pole".to_string(),
                    ));
                }
                Ok((x - y) * (DdC::ONE - bd / axy))
            }
            PairKind::Theta { .. } => Ok(DdC::from_c64(self.g(x.to_c64(), y.to_c64())?)),
        }
    }
}

fn theta_kernel(x: Complex64, y: Complex64, base: &QBase) -> Result<Complex64> {
    if x.norm() == 0.0 || y.norm() == 0.0 {
        return Err(FgError::Domain(
            "theta pair needs x != 0 and y != 0".to_string(),
        ));
    }
    Ok(y * theta(x * y, base)? * theta(x / y, base)?)
}

/// The five built-in pairs with parameters bound.
pub fn builtin_pairs(a: Complex64, b: Complex64, theta_base: QBase) -> Result<Vec<FGPair>> {
    Ok(vec![
        FGPair::one_diff(),
        FGPair::diff_diff(),
        FGPair::onexy_diff(),
        FGPair::bibasic(a, b)?,
        FGPair::theta_pair(theta_base),
    ])
}

/// Left-hand side of the three-term identity at one quadruple; zero (up to
/// roundoff scaled by the product magnitudes) exactly for kernel members.
pub fn kernel_residual(
    pair: &FGPair,
    x: Complex64,
    a: Complex64,
    b: Complex64,
    c: Complex64,
) -> Result<Complex64> {
    Ok(kernel_residual_scaled(pair, x, a, b, c)?.0)
}

/// Residual together with the cancellation scale 1 + max |f·g| over the three
/// summands (the identity cancels large terms for the theta pair, so raw
/// residual magnitudes are only meaningful relative to this scale).
pub fn kernel_residual_scaled(
    pair: &FGPair,
    x: Complex64,
    a: Complex64,
    b: Complex64,
    c: Complex64,
) -> Result<(Complex64, f64)> {
    let t1 = pair.f(x, a)? * pair.g(b, c)?;
    let t2 = pair.f(x, b)? * pair.g(c, a)?;
    let t3 = pair.f(x, c)? * pair.g(a, b)?;
    let scale = 1.0 + t1.norm().max(t2.norm()).max(t3.norm());
    Ok((t1 + t2 + t3, scale))
}

/// Outcome of a seeded random membership check.
#[derive(Clone, Debug, Serialize)]
pub struct KernelReport {
    pub pair: String,
    pub samples: usize,
    pub seed: u64,
    pub tolerance: f64,
    /// max over samples of |residual| / (1 + max |f·g| term).
    pub max_scaled_residual: f64,
    pub passes: bool,
}

/// Sampling annulus for random points: pairs that divide by x, y, or x y
/// keep moduli away from the origin; the theta pair keeps them in the
/// [0.5, 2] band where its products stay well-conditioned.
fn sample_annulus(pair: &FGPair) -> (f64, f64) {
    match pair.kind {
        PairKind::Theta { .. } => (0.5, 2.0),
        PairKind::Bibasic { .. } => (0.15, 1.5),
        _ => (0.02, 1.5),
    }
}

fn random_point(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> Complex64 {
    let r = rng.random_range(lo..hi);
    let phi = rng.random_range(0.0..std::f64::consts::TAU);
    Complex64::from_polar(r, phi)
}

/// Check the three-term identity at `samples` seeded random quadruples.
pub fn kernel_membership_check(
    pair: &FGPair,
    samples: usize,
    seed: u64,
    tolerance: f64,
) -> Result<KernelReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lo, hi) = sample_annulus(pair);
    let mut max_scaled = 0.0f64;
    for _ in 0..samples {
        let x = random_point(&mut rng, lo, hi);
        let a = random_point(&mut rng, lo, hi);
        let b = random_point(&mut rng, lo, hi);
        let c = random_point(&mut rng, lo, hi);
        let (res, scale) = kernel_residual_scaled(pair, x, a, b, c)?;
        max_scaled = max_scaled.max(res.norm() / scale);
    }
    Ok(KernelReport {
        pair: pair.name().to_string(),
        samples,
        seed,
        tolerance,
        max_scaled_residual: max_scaled,
        passes: max_scaled <= tolerance,
    })
}

/// Outcome of the pointwise antisymmetry probe for g.
#[derive(Clone, Debug, Serialize)]
pub struct AntisymmetryReport {
    pub pair: String,
    pub samples: usize,
    pub seed: u64,
    /// max over samples of |g(x,y) + g(y,x)|.
    pub max_residual: f64,
    /// Same residual scaled by max(1, |g(x,y)|).
    pub max_scaled_residual: f64,
    pub passes: bool,
    /// False for the theta pair: its g is not pointwise antisymmetric and
    /// the kernel membership check is the authority instead.
    pub pointwise_antisymmetry_expected: bool,
}

pub fn check_antisymmetry(pair: &FGPair, samples: usize, seed: u64) -> Result<AntisymmetryReport> {
    const TOL: f64 = 1e-12;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lo, hi) = sample_annulus(pair);
    let mut max_res = 0.0f64;
    let mut max_scaled = 0.0f64;
    for _ in 0..samples.max(1) {
        let x = random_point(&mut rng, lo, hi);
        let y = random_point(&mut rng, lo, hi);
        let fwd = pair.g(x, y)?;
        let bwd = pair.g(y, x)?;
        let res = (fwd + bwd).norm();
        max_res = max_res.max(res);
        max_scaled = max_scaled.max(res / fwd.norm().max(1.0));
    }
    Ok(AntisymmetryReport {
        pair: pair.name().to_string(),
        samples: samples.max(1),
        seed,
        max_residual: max_res,
        max_scaled_residual: max_scaled,
        passes: max_scaled <= TOL,
        pointwise_antisymmetry_expected: pair.pointwise_antisymmetric(),
    })
}
