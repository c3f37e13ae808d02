//! Log-space combinatorics shared by every likelihood and prior term.
//!
//! All quantities are base-2 logarithms. Factorials and binomials go
//! through a precomputed `log2(n!)` table with a log-gamma fallback, so
//! nothing overflows for edge counts up to ~1e8. Restricted integer
//! partition counts `q(m, n)` are memoized in a lazily grown dynamic
//! programming table with a hard cap on `m`.

use once_cell::sync::Lazy;
use std::sync::RwLock;

/// Entries below this bound are served from the precomputed table.
const FACT_TABLE_SIZE: usize = 1 << 16;

static LOG2_FACT: Lazy<Vec<f64>> = Lazy::new(|| {
    (0..FACT_TABLE_SIZE as u64).map(ln_gamma_log2_fact).collect()
});

fn ln_gamma_log2_fact(n: u64) -> f64 {
    if n <= 1 {
        return 0.0;
    }
    statrs::function::gamma::ln_gamma(n as f64 + 1.0) * std::f64::consts::LOG2_E
}

/// log2(n!)
#[inline]
pub fn log2_factorial(n: u64) -> f64 {
    if (n as usize) < FACT_TABLE_SIZE {
        LOG2_FACT[n as usize]
    } else {
        ln_gamma_log2_fact(n)
    }
}

/// log2 of the binomial coefficient C(n, k). Requires `k <= n`.
#[inline]
pub fn log2_binomial(n: u64, k: u64) -> f64 {
    debug_assert!(k <= n, "binomial with k={k} > n={n}");
    log2_factorial(n) - log2_factorial(k) - log2_factorial(n - k)
}

/// log2 of the number of m-combinations with repetition from n items,
/// i.e. C(n + m - 1, m). Requires `n >= 1` or `m == 0`.
#[inline]
pub fn log2_multiset(n: u64, m: u64) -> f64 {
    if m == 0 {
        return 0.0;
    }
    log2_binomial(n + m - 1, m)
}

/// log2(2^a + 2^b), tolerating -inf on either side.
#[inline]
pub fn log2_add(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if lo == f64::NEG_INFINITY {
        return hi;
    }
    hi + (lo - hi).exp2().ln_1p() * std::f64::consts::LOG2_E
}

/// Restricted-partition table cap was exceeded.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error(
    "restricted partition count q({m}, {n}) exceeds the table cap m <= {cap}; \
     raise the cap (--q-cap) to evaluate this degree prior"
)]
pub struct QCapExceeded {
    pub m: u64,
    pub n: u64,
    pub cap: u64,
}

/// Default cap on the first argument of `q(m, n)`.
pub const DEFAULT_Q_CAP: u64 = 20_000;

/// Memoized log2 of q(m, n), the number of partitions of the integer m
/// into at most n parts.
///
/// Boundary conventions: q(0, n) = 1 for n >= 0 (the empty partition;
/// a group with zero edges has exactly one degree histogram) and
/// q(m, 0) = 0 for m > 0. The identity q(m, n) = q(m, m) for n > m
/// bounds the table at n <= m <= cap.
pub struct QTable {
    cap: u64,
    // cols[n][m] = log2 q(m, n); all columns share the same length.
    cols: RwLock<Vec<Vec<f64>>>,
}

impl QTable {
    pub fn new(cap: u64) -> Self {
        QTable {
            cap,
            cols: RwLock::new(vec![vec![0.0]]), // q(0, 0) = 1
        }
    }

    pub fn cap(&self) -> u64 {
        self.cap
    }

    /// log2 q(m, n). Errors when `m` exceeds the configured cap.
    pub fn log2_q(&self, m: u64, n: u64) -> Result<f64, QCapExceeded> {
        if m == 0 {
            return Ok(0.0);
        }
        if n == 0 {
            return Ok(f64::NEG_INFINITY);
        }
        if m > self.cap {
            return Err(QCapExceeded { m, n, cap: self.cap });
        }
        let n_eff = n.min(m) as usize;
        let m = m as usize;
        {
            let cols = self.cols.read().unwrap();
            if n_eff < cols.len() && m < cols[n_eff].len() {
                return Ok(cols[n_eff][m]);
            }
        }
        let mut cols = self.cols.write().unwrap();
        let target_m = m.max(cols[0].len() - 1);
        let target_n = n_eff.max(cols.len() - 1);
        // Column 0: q(0, 0) = 1, q(m, 0) = 0.
        cols[0].resize(target_m + 1, f64::NEG_INFINITY);
        for n_col in 1..=target_n {
            if cols.len() <= n_col {
                cols.push(vec![0.0]); // q(0, n) = 1
            }
            let start = cols[n_col].len();
            for mm in start..=target_m {
                let fewer = cols[n_col - 1][mm];
                let exact = if mm >= n_col { cols[n_col][mm - n_col] } else { f64::NEG_INFINITY };
                let v = log2_add(fewer, exact);
                cols[n_col].push(v);
            }
        }
        Ok(cols[n_eff][m])
    }

    /// q(m, n) rounded to the nearest integer, for small exact checks.
    pub fn q_exact(&self, m: u64, n: u64) -> Result<u64, QCapExceeded> {
        Ok(self.log2_q(m, n)?.exp2().round() as u64)
    }
}

/// Shared lookup tables needed by the description-length terms.
pub struct DlTables {
    pub q: QTable,
}

impl DlTables {
    pub fn new(q_cap: u64) -> Self {
        DlTables { q: QTable::new(q_cap) }
    }
}

impl Default for DlTables {
    fn default() -> Self {
        DlTables::new(DEFAULT_Q_CAP)
    }
}
