use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tomography::state::{outcome_probabilities, Basis, TwoQubitState};

/// Probabilities below this are clamped before taking logarithms.
pub const PROBABILITY_FLOOR: f64 = 1e-12;

/// Coincidence counts in both bases, outcome order `uu, uv, vu, vv`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CountsRecord {
    pub hv: [u64; 4],
    pub da: [u64; 4],
    /// Integration time in milliseconds; informational only.
    #[serde(default)]
    pub integration_time_ms: u64,
}

impl CountsRecord {
    pub fn basis(&self, basis: Basis) -> &[u64; 4] {
        match basis {
            Basis::HV => &self.hv,
            Basis::DA => &self.da,
        }
    }

    pub fn basis_mut(&mut self, basis: Basis) -> &mut [u64; 4] {
        match basis {
            Basis::HV => &mut self.hv,
            Basis::DA => &mut self.da,
        }
    }

    pub fn total(&self, basis: Basis) -> u64 {
        self.basis(basis).iter().sum()
    }

    /// Relabels the two analyzers (`uv ↔ vu` in both bases).
    pub fn swapped_users(&self) -> Self {
        let swap = |c: [u64; 4]| [c[0], c[2], c[1], c[3]];
        Self {
            hv: swap(self.hv),
            da: swap(self.da),
            ..*self
        }
    }

    /// Parses `basis,outcome,count` lines. Blank lines and `#` comments are
    /// skipped, as is a `basis,outcome,count` header.
    pub fn parse_text(text: &str) -> Result<Self> {
        let mut record = Self::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') || line.eq_ignore_ascii_case("basis,outcome,count") {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            let [basis, outcome, count] = fields[..] else {
                return Err(Error::Data(format!("line {}: expected basis,outcome,count", n + 1)));
            };
            let basis = match basis.to_ascii_uppercase().as_str() {
                "HV" => Basis::HV,
                "DA" => Basis::DA,
                other => return Err(Error::Data(format!("line {}: unknown basis {other}", n + 1))),
            };
            let slot = basis
                .labels()
                .iter()
                .position(|l| l.eq_ignore_ascii_case(outcome))
                .ok_or_else(|| {
                    Error::Data(format!("line {}: outcome {outcome} not in basis {}", n + 1, basis.name()))
                })?;
            let count: u64 = count
                .parse()
                .map_err(|_| Error::Data(format!("line {}: bad count {count}", n + 1)))?;
            record.basis_mut(basis)[slot] = count;
        }
        Ok(record)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from("basis,outcome,count\n");
        for basis in Basis::ALL {
            for (label, count) in basis.labels().iter().zip(self.basis(basis)) {
                out.push_str(&format!("{},{label},{count}\n", basis.name()));
            }
        }
        out
    }
}

/// Anticorrelation contrast `(N_uv + N_vu − N_uu − N_vv) / N`.
pub fn visibility(counts: &CountsRecord, basis: Basis) -> Result<f64> {
    let c = counts.basis(basis);
    let total = counts.total(basis);
    if total == 0 {
        return Err(Error::Undefined(format!("no counts in basis {}", basis.name())));
    }
    Ok((c[1] as f64 + c[2] as f64 - c[0] as f64 - c[3] as f64) / total as f64)
}

/// Multinomial log-likelihood of `counts` given outcome probabilities per
/// basis (HV first, then DA).
pub fn log_likelihood_from_probabilities(probabilities: &[[f64; 4]; 2], counts: &CountsRecord) -> f64 {
    let mut ll = 0.0;
    for (basis, p) in Basis::ALL.iter().zip(probabilities) {
        for (&n, &pk) in counts.basis(*basis).iter().zip(p) {
            if n > 0 {
                ll += n as f64 * pk.max(PROBABILITY_FLOOR).ln();
            }
        }
    }
    ll
}

pub fn log_likelihood(state: &TwoQubitState, counts: &CountsRecord) -> Result<f64> {
    let probabilities = [
        outcome_probabilities(state, Basis::HV)?,
        outcome_probabilities(state, Basis::DA)?,
    ];
    Ok(log_likelihood_from_probabilities(&probabilities, counts))
}

fn multinomial(rng: &mut ChaCha8Rng, total: u64, p: &[f64; 4]) -> [u64; 4] {
    let mut out = [0u64; 4];
    let mut remaining = total;
    let mut mass = 1.0;
    for k in 0..3 {
        if remaining == 0 {
            break;
        }
        let q = if mass > 0.0 { (p[k] / mass).clamp(0.0, 1.0) } else { 0.0 };
        let draw = Binomial::new(remaining, q).map(|b| b.sample(rng)).unwrap_or(0);
        out[k] = draw;
        remaining -= draw;
        mass -= p[k];
    }
    out[3] = remaining;
    out
}

/// Multinomial draws of `per_basis_total` events in each basis.
pub fn synth_counts(state: &TwoQubitState, per_basis_total: u64, seed: u64) -> Result<CountsRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let hv = outcome_probabilities(state, Basis::HV)?;
    let da = outcome_probabilities(state, Basis::DA)?;
    Ok(CountsRecord {
        hv: multinomial(&mut rng, per_basis_total, &hv),
        da: multinomial(&mut rng, per_basis_total, &da),
        integration_time_ms: 0,
    })
}
