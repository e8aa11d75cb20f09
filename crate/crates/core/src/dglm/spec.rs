use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Observation model and link for a DGLM component.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Link {
    LogitBernoulli,
    LogPoisson,
    IdentityNormal,
}

/// One structural block of the state vector.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Block {
    /// Local level (dimension 1).
    Level,
    /// Local linear trend: level + gradient (dimension 2).
    LocalLinearTrend,
    /// Dynamic regression, one state element per named predictor.
    Regression { predictors: Vec<String> },
    /// Fourier seasonality of the given period. Dimension is `2h`, or
    /// `2h - 1` when the Nyquist harmonic (`h = period/2`, even period)
    /// is included as a single state element.
    FourierSeasonal { period: u32, harmonics: u32 },
    /// Time-specific random effect: design entry 1, no persistence
    /// (zero row/column in the evolution matrix). Its uncertainty is
    /// injected at the predictor level via the random-effects discount,
    /// not through block discounting.
    RandomEffect,
}

impl Block {
    pub fn dim(&self) -> usize {
        match self {
            Block::Level => 1,
            Block::LocalLinearTrend => 2,
            Block::Regression { predictors } => predictors.len(),
            Block::FourierSeasonal { period, harmonics } => {
                let h = *harmonics as usize;
                if period % 2 == 0 && h == (*period as usize) / 2 {
                    2 * h - 1
                } else {
                    2 * h
                }
            }
            Block::RandomEffect => 1,
        }
    }
}

/// Declarative model description: blocks, per-block discount factors and
/// the link choice. The random-effects discount `re_discount` is only
/// meaningful for a Poisson component (and then regardless of whether a
/// `RandomEffect` block is present in the state).
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ModelSpec {
    pub blocks: Vec<Block>,
    pub discounts: Vec<f64>,
    pub re_discount: f64,
    pub link: Link,
}

impl ModelSpec {
    pub fn new(blocks: Vec<Block>, discounts: Vec<f64>, link: Link) -> Result<Self> {
        let spec = ModelSpec { blocks, discounts, re_discount: 1.0, link };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_re_discount(mut self, rho: f64) -> Result<Self> {
        self.re_discount = rho;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.blocks.is_empty() {
            return Err(Error::config("model needs at least one block"));
        }
        if self.blocks.len() != self.discounts.len() {
            return Err(Error::config(alloc::format!(
                "{} blocks but {} discount factors",
                self.blocks.len(),
                self.discounts.len()
            )));
        }
        for &d in &self.discounts {
            if !(d > 0.0 && d <= 1.0) {
                return Err(Error::config(alloc::format!("discount factor {d} outside (0, 1]")));
            }
        }
        if !(self.re_discount > 0.0 && self.re_discount <= 1.0) {
            return Err(Error::config(alloc::format!(
                "random-effects discount {} outside (0, 1]",
                self.re_discount
            )));
        }
        for b in &self.blocks {
            match b {
                Block::Regression { predictors } if predictors.is_empty() => {
                    return Err(Error::config("regression block with no predictors"));
                }
                Block::FourierSeasonal { period, harmonics } => {
                    if *period < 2 || *harmonics == 0 || *harmonics as usize > (*period as usize) / 2
                    {
                        return Err(Error::config(alloc::format!(
                            "fourier block with period {period}, harmonics {harmonics}"
                        )));
                    }
                }
                _ => {}
            }
        }
        Ok(())
    }

    /// Total state dimension.
    pub fn dim(&self) -> usize {
        self.blocks.iter().map(Block::dim).sum()
    }

    /// Offset of each block within the state vector.
    pub fn block_offsets(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.blocks.len());
        let mut o = 0;
        for b in &self.blocks {
            out.push(o);
            o += b.dim();
        }
        out
    }
}
