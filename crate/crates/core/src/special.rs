//! Complete elliptic integrals and the Jacobi function cn, all through the
//! arithmetic-geometric mean.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Largest modulus accepted. Beyond it the period 4K grows past anything the
/// wave solvers use.
pub const MAX_MODULUS: f64 = 1.0 - 1e-10;

const AGM_MAX_STEPS: usize = 64;

/// Elliptic modulus `k` in `[0, 1 - 1e-10]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct EllipticModulus(f64);

impl EllipticModulus {
    pub fn new(k: f64) -> Result<Self> {
        if (0.0..=MAX_MODULUS).contains(&k) {
            Ok(Self(k))
        } else {
            Err(Error::ModulusOutOfRange(k))
        }
    }

    pub fn k(self) -> f64 {
        self.0
    }

    /// `k' = √(1 - k²)`, factored to avoid cancellation near k = 1.
    pub fn complementary(self) -> f64 {
        ((1.0 - self.0) * (1.0 + self.0)).sqrt()
    }
}

/// The AGM ladder `(a_n, b_n, c_n)` started from `(1, k', k)`.
struct Agm {
    a: Vec<f64>,
    c: Vec<f64>,
}

impl Agm {
    fn run(m: EllipticModulus) -> Self {
        let mut a = vec![1.0];
        let mut c = vec![m.k()];
        let mut an = 1.0;
        let mut bn = m.complementary();
        for _ in 0..AGM_MAX_STEPS {
            if (an - bn).abs() <= 1e-16 * an {
                break;
            }
            let next_a = 0.5 * (an + bn);
            let next_c = 0.5 * (an - bn);
            bn = (an * bn).sqrt();
            an = next_a;
            a.push(an);
            c.push(next_c);
        }
        Self { a, c }
    }

    fn last_a(&self) -> f64 {
        *self.a.last().expect("AGM ladder is never empty")
    }
}

/// Complete elliptic integral of the first kind.
pub fn ellip_k(m: EllipticModulus) -> f64 {
    PI / (2.0 * Agm::run(m).last_a())
}

/// Complete elliptic integral of the second kind.
pub fn ellip_e(m: EllipticModulus) -> f64 {
    let agm = Agm::run(m);
    let k = PI / (2.0 * agm.last_a());
    let mut weight = 0.5;
    let mut sum = 0.0;
    for c in &agm.c {
        sum += weight * c * c;
        weight *= 2.0;
    }
    k * (1.0 - sum)
}

/// Jacobi cn(u; k).
pub fn jacobi_cn(u: f64, m: EllipticModulus) -> f64 {
    jacobi_sn_cn_dn(u, m).1
}

/// The triple (sn, cn, dn) from one descending Landen pass.
pub(crate) fn jacobi_sn_cn_dn(u: f64, m: EllipticModulus) -> (f64, f64, f64) {
    let agm = Agm::run(m);
    let quarter = PI / (2.0 * agm.last_a());
    let period = 4.0 * quarter;
    let u = u - period * (u / period).round();

    let steps = agm.a.len() - 1;
    let mut phi = 2f64.powi(steps as i32) * agm.last_a() * u;
    let mut prev = phi;
    for n in (1..=steps).rev() {
        prev = phi;
        let ratio = agm.c[n] / agm.a[n] * phi.sin();
        phi = 0.5 * (phi + ratio.asin());
    }
    let (sn, cn) = phi.sin_cos();
    let dn = if steps == 0 {
        1.0
    } else {
        cn / (prev - phi).cos()
    };
    (sn, cn, dn)
}
