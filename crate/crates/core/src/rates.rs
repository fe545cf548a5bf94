//! Reverse-time generators of the masking process.
//!
//! Every single-coordinate unmasking rate factors as
//! `time_factor(t) * base(y, x)` with `base` independent of `t`, so a
//! generator stores only the constant base in compressed-column form: for
//! each source state `x`, the list of targets `y` and their rates. The
//! diagonal is minus the column's exit rate.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::distribution::DenseDistribution;
use crate::error::{Error, Result};
use crate::mixture::{GuidanceConfig, MixtureModel};
use crate::numerics::ln0;
use crate::space::StateSpace;

pub use crate::numerics::time_factor;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum GeneratorKind {
    Unguided,
    Conditional,
    Guided { w: f64 },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratorDiagnostics {
    /// Masked states whose reference partial marginal vanishes; their
    /// columns are zero.
    pub zero_marginal_columns: usize,
    /// Candidate transitions dropped because both partial sums are zero.
    pub zero_over_zero: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReverseGenerator {
    space: StateSpace,
    kind: GeneratorKind,
    offsets: Vec<usize>,
    targets: Vec<usize>,
    rates: Vec<f64>,
    exit: Vec<f64>,
    diagnostics: GeneratorDiagnostics,
}

/// Partial marginal sums `M(x) = sum_{u : u_UM = x_UM} mu(u)`, where the
/// mask token at coordinate `d` means "summed over coordinate `d`".
pub fn partial_marginals(space: StateSpace, probs: &[f64]) -> Vec<f64> {
    let n = space.alphabet();
    let mut m = probs.to_vec();
    for d in 0..space.dims() {
        let stride = space.stride(d);
        for start in (0..m.len()).step_by(stride * n) {
            for off in 0..stride {
                let base = start + off;
                let total: f64 = (0..n).map(|k| m[base + k * stride]).sum();
                m[base + (n - 1) * stride] = total;
            }
        }
    }
    m
}

impl ReverseGenerator {
    fn build(
        space: StateSpace,
        kind: GeneratorKind,
        mut rate: impl FnMut(usize, usize) -> Result<Option<f64>>,
        mut column_alive: impl FnMut(usize) -> bool,
    ) -> Result<Self> {
        let n = space.alphabet();
        let total = space.total_states();
        let mut offsets = Vec::with_capacity(total + 1);
        let mut targets = Vec::new();
        let mut rates = Vec::new();
        let mut exit = vec![0.0; total];
        let mut diagnostics = GeneratorDiagnostics::default();
        offsets.push(0);
        for x in 0..total {
            let masked: Vec<usize> = (0..space.dims()).filter(|&d| space.is_masked_at(x, d)).collect();
            if !masked.is_empty() {
                if !column_alive(x) {
                    diagnostics.zero_marginal_columns += 1;
                    diagnostics.zero_over_zero += masked.len() * (n - 1);
                } else {
                    for &d in &masked {
                        for k in 0..n - 1 {
                            let y = space.with_digit(x, d, k);
                            if let Some(v) = rate(y, x)? {
                                if v > 0.0 {
                                    targets.push(y);
                                    rates.push(v);
                                    exit[x] += v;
                                }
                            }
                        }
                    }
                }
            }
            offsets.push(targets.len());
        }
        if diagnostics.zero_marginal_columns > 0 {
            log::debug!(
                "{} masked states have a zero partial marginal; their columns are zero",
                diagnostics.zero_marginal_columns
            );
        }
        Ok(Self {
            space,
            kind,
            offsets,
            targets,
            rates,
            exit,
            diagnostics,
        })
    }

    pub fn space(&self) -> StateSpace {
        self.space
    }

    pub fn kind(&self) -> GeneratorKind {
        self.kind
    }

    pub fn diagnostics(&self) -> GeneratorDiagnostics {
        self.diagnostics
    }

    /// Outgoing `(target, rate)` pairs of state `x`, diagonal excluded.
    pub fn transitions(&self, x: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.offsets[x]..self.offsets[x + 1];
        self.targets[range.clone()].iter().copied().zip(self.rates[range].iter().copied())
    }

    pub fn exit_rate(&self, x: usize) -> f64 {
        self.exit[x]
    }

    pub fn max_exit_rate(&self) -> f64 {
        self.exit.iter().copied().fold(0.0, f64::max)
    }

    /// Number of stored off-diagonal entries.
    pub fn nnz(&self) -> usize {
        self.targets.len()
    }

    /// Base entry `base(y, x)`.
    pub fn entry(&self, y: usize, x: usize) -> f64 {
        if y == x {
            return -self.exit[x];
        }
        self.transitions(x).find(|&(t, _)| t == y).map_or(0.0, |(_, v)| v)
    }

    /// Full rate `time_factor(t) * base(y, x)` at forward time `t > 0`.
    pub fn rate_at(&self, t: f64, y: usize, x: usize) -> f64 {
        time_factor(t) * self.entry(y, x)
    }

    /// `out = base * q`.
    pub fn apply(&self, q: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for x in 0..self.exit.len() {
            let qx = q[x];
            if qx == 0.0 {
                continue;
            }
            out[x] -= self.exit[x] * qx;
            for (y, v) in self.transitions(x) {
                out[y] += v * qx;
            }
        }
    }

    /// Dense base matrix in row-major `(y, x)` layout; intended for small spaces.
    pub fn to_dense(&self) -> Vec<f64> {
        let n = self.space.total_states();
        let mut out = vec![0.0; n * n];
        for x in 0..n {
            out[x * n + x] = -self.exit[x];
            for (y, v) in self.transitions(x) {
                out[y * n + x] = v;
            }
        }
        out
    }

    /// Largest absolute column sum; zero up to rounding for a generator.
    pub fn max_column_sum(&self) -> f64 {
        (0..self.exit.len())
            .map(|x| (self.transitions(x).map(|(_, v)| v).sum::<f64>() - self.exit[x]).abs())
            .fold(0.0, f64::max)
    }

    /// Writes `row,col,value` lines (0-based flat indices, diagonal
    /// included) after a `#` header recording the space and kind.
    pub fn write_triplets<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(
            out,
            "# N={} D={} kind={:?}",
            self.space.alphabet(),
            self.space.dims(),
            self.kind
        )?;
        writeln!(out, "row,col,value")?;
        for x in 0..self.exit.len() {
            if self.exit[x] != 0.0 {
                writeln!(out, "{x},{x},{:.16e}", -self.exit[x])?;
            }
            for (y, v) in self.transitions(x) {
                writeln!(out, "{y},{x},{v:.16e}")?;
            }
        }
        Ok(())
    }
}

/// One `(row, col, value)` entry of a serialized generator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Triplet {
    pub row: usize,
    pub col: usize,
    pub value: f64,
}

pub fn read_triplets<R: BufRead>(input: R) -> Result<Vec<Triplet>> {
    let mut out = Vec::new();
    for (lineno, line) in input.lines().enumerate() {
        let line = line.map_err(|e| Error::InvalidArgument(e.to_string()))?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line == "row,col,value" {
            continue;
        }
        let bad = || Error::InvalidArgument(format!("malformed triplet on line {}: {line:?}", lineno + 1));
        let mut parts = line.split(',');
        let row = parts.next().and_then(|s| s.parse().ok()).ok_or_else(bad)?;
        let col = parts.next().and_then(|s| s.parse().ok()).ok_or_else(bad)?;
        let value = parts.next().and_then(|s| s.parse().ok()).ok_or_else(bad)?;
        if parts.next().is_some() {
            return Err(bad());
        }
        out.push(Triplet { row, col, value });
    }
    Ok(out)
}

fn unguided_with_kind(mu: &DenseDistribution, kind: GeneratorKind) -> Result<ReverseGenerator> {
    let space = mu.space();
    if mu.masked_mass() > 0.0 {
        return Err(Error::InvalidDistribution(
            "reverse rates need a data distribution without mask mass".into(),
        ));
    }
    let m = partial_marginals(space, mu.probs());
    ReverseGenerator::build(
        space,
        kind,
        |y, x| Ok(Some(m[y] / m[x])),
        |x| m[x] > 0.0,
    )
}

/// Reverse generator of the unguided dynamics for data law `mu`:
/// `base(y, x) = M(y) / M(x)` for single-coordinate unmaskings.
pub fn unguided_reverse(mu: &DenseDistribution) -> Result<ReverseGenerator> {
    unguided_with_kind(mu, GeneratorKind::Unguided)
}

/// Unguided generator of the class-`k` conditional.
pub fn conditional_reverse(m: &MixtureModel, k: usize) -> Result<ReverseGenerator> {
    unguided_with_kind(m.conditional(k), GeneratorKind::Conditional)
}

/// Guided generator with entries `base_p(y,x)^-w * base_z(y,x)^(1+w)`.
pub fn guided_reverse(m: &MixtureModel, g: &GuidanceConfig) -> Result<ReverseGenerator> {
    let g = GuidanceConfig::new(g.class_index, g.w)?;
    if g.class_index >= m.num_classes() {
        return Err(Error::InvalidArgument(format!("class index {} out of range", g.class_index)));
    }
    let space = m.space();
    let w = g.w;
    let mp: Vec<f64> = partial_marginals(space, m.full().probs());
    let mz: Vec<f64> = partial_marginals(space, m.conditional(g.class_index).probs());
    let lp: Vec<f64> = mp.iter().map(|&v| ln0(v)).collect();
    let lz: Vec<f64> = mz.iter().map(|&v| ln0(v)).collect();
    // The reference marginal decides which columns are reachable.
    let reference = if w == -1.0 { &mp } else { &mz };
    ReverseGenerator::build(
        space,
        GeneratorKind::Guided { w },
        |y, x| {
            if w > -1.0 && mz[y] == 0.0 {
                return Ok(None);
            }
            if mp[y] == 0.0 || mp[x] == 0.0 {
                if w == -1.0 {
                    return Ok(None);
                }
                return Err(Error::IncompatibleSupports { from: x, to: y });
            }
            let p_part = if w == 0.0 { 0.0 } else { -w * (lp[y] - lp[x]) };
            let z_part = if w == -1.0 { 0.0 } else { (1.0 + w) * (lz[y] - lz[x]) };
            Ok(Some((p_part + z_part).exp()))
        },
        |x| reference[x] > 0.0,
    )
}
