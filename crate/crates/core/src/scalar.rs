//! Numeric scalar abstraction shared by tables, constants and the interpreter.

use std::fmt::{Debug, Display};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{FromPrimitive, Num, One, Signed, ToPrimitive, Zero};

/// Scalar values flowing through kernels.
///
/// Floating point types support intrinsic calls; the exact rational type
/// rejects them since their results are not representable.
pub trait Scalar:
    Num + Signed + FromPrimitive + ToPrimitive + Clone + PartialEq + PartialOrd + Debug + Display + Send + Sync + 'static
{
    /// Converts a literal read from JSON.
    fn lit(v: f64) -> Self;

    /// Lossy conversion used for serialization and reporting.
    fn approx(&self) -> f64;

    /// Applies a named intrinsic, or `None` if unsupported.
    fn call(name: &str, args: &[Self]) -> Option<Self>;

    /// Exact equality of representations.
    fn bits_eq(&self, other: &Self) -> bool;

    /// Canonical text used for ordering and hashing expressions.
    fn key(&self) -> String;

    /// Literal spelled for C source.
    fn c_literal(&self) -> String {
        let v = self.approx();
        let s = format!("{v:?}");
        if s.contains('.') || s.contains('e') || s.contains("inf") || s.contains("NaN") {
            s
        } else {
            format!("{s}.0")
        }
    }
}

fn float_call(name: &str, args: &[f64]) -> Option<f64> {
    let r = match (name, args) {
        ("sqrt", [a]) => a.sqrt(),
        ("abs" | "fabs", [a]) => a.abs(),
        ("exp", [a]) => a.exp(),
        ("log", [a]) => a.ln(),
        ("sin", [a]) => a.sin(),
        ("cos", [a]) => a.cos(),
        ("tan", [a]) => a.tan(),
        ("pow", [a, b]) => a.powf(*b),
        ("min" | "fmin", [a, b]) => a.min(*b),
        ("max" | "fmax", [a, b]) => a.max(*b),
        _ => return None,
    };
    Some(r)
}

impl Scalar for f64 {
    fn lit(v: f64) -> Self {
        v
    }

    fn approx(&self) -> f64 {
        *self
    }

    fn call(name: &str, args: &[Self]) -> Option<Self> {
        float_call(name, args)
    }

    fn bits_eq(&self, other: &Self) -> bool {
        self.to_bits() == other.to_bits()
    }

    fn key(&self) -> String {
        format!("{self:?}")
    }
}

impl Scalar for f32 {
    fn lit(v: f64) -> Self {
        v as f32
    }

    fn approx(&self) -> f64 {
        *self as f64
    }

    fn call(name: &str, args: &[Self]) -> Option<Self> {
        let wide: Vec<f64> = args.iter().map(|a| *a as f64).collect();
        float_call(name, &wide).map(|v| v as f32)
    }

    fn bits_eq(&self, other: &Self) -> bool {
        self.to_bits() == other.to_bits()
    }

    fn key(&self) -> String {
        format!("{self:?}")
    }
}

impl Scalar for BigRational {
    fn lit(v: f64) -> Self {
        BigRational::from_float(v).unwrap_or_else(|| BigRational::new(BigInt::zero(), BigInt::one()))
    }

    fn approx(&self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    fn call(_name: &str, _args: &[Self]) -> Option<Self> {
        None
    }

    fn bits_eq(&self, other: &Self) -> bool {
        self == other
    }

    fn key(&self) -> String {
        format!("{self}")
    }
}
